"""Smoke test for the `har` extension module.

Build and install first:

    pip install maturin
    maturin develop --release -m crates/py/Cargo.toml

then run `python python/smoke_test.py`.
"""

import math
import sys
import tempfile
from pathlib import Path

import har


def main() -> int:
    assert har.N_FEATURES == 117
    names = har.feature_names()
    assert len(names) == har.N_FEATURES
    assert names[16] == "stretch_min" and names[-1] == "prev_activity"
    codes = har.activities()
    assert codes == ["D", "J", "L", "S", "Sd", "W", "T"], codes

    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        xs, ys = [], []
        for user in range(3):
            rec = tmp / f"user{user}"
            n = har.synthesize(str(rec), seed=user, duration_s=120.0, user=user)
            x, y = har.extract_features(str(rec))
            assert len(x) == len(y) == n
            for row, label in zip(x, y):
                if label is not None:
                    xs.append(row)
                    ys.append(label)

        model, test_acc = har.train(xs, ys, epochs=600, restarts=2, seed=1)
        assert model.n_hidden == 4 and model.weight_bytes == 2028
        assert test_acc is not None and test_acc > 0.8, test_acc

        label, probs = model.classify(xs[0])
        assert label in codes
        assert math.isclose(sum(probs), 1.0, abs_tol=1e-9)

        before = model.classify(xs[0])[1][codes.index(ys[0])]
        model.update(xs[0], ys[0], 1.0, alpha=0.01)
        after = model.classify(xs[0])[1][codes.index(ys[0])]
        assert after >= before, (before, after)

        path = tmp / "model.harn"
        model.save(str(path))
        again = har.Model.load(str(path))
        assert again.to_bytes() == model.to_bytes()
        assert har.Model.from_bytes(path.read_bytes()).classify(xs[0]) == again.classify(xs[0])

        rows = har.run_pipeline(str(tmp / "user0"), str(path), mode="infer")
        assert rows and all(r[0] in codes for r in rows)
        correct = sum(r[0] == r[3] for r in rows if r[3] is not None)
        labeled = sum(r[3] is not None for r in rows)
        print(f"pipeline accuracy on user0: {correct}/{labeled}")

        try:
            har.Model.from_bytes(b"nope")
        except ValueError as e:
            print(f"bad model rejected: {e}")
        else:
            raise AssertionError("corrupt model bytes accepted")

        try:
            model.classify([0.0] * 3)
        except ValueError:
            pass
        else:
            raise AssertionError("short feature vector accepted")

    print("smoke test ok")
    return 0


if __name__ == "__main__":
    sys.exit(main())
