use pyo3::prelude::*;
use pyo3::types::PyDict;

fn with_module<F: FnOnce(Python<'_>, &Bound<'_, PyDict>)>(f: F) {
    Python::attach(|py| {
        let module = PyModule::new(py, "har").unwrap();
        har::har(&module).unwrap();
        let globals = PyDict::new(py);
        globals.set_item("har", module).unwrap();
        f(py, &globals);
    });
}

fn run(py: Python<'_>, globals: &Bound<'_, PyDict>, code: &str) {
    let code = std::ffi::CString::new(code).unwrap();
    if let Err(e) = py.run(&code, Some(globals), None) {
        e.print(py);
        panic!("python snippet failed");
    }
}

#[test]
fn module_exposes_names_and_codes() {
    with_module(|py, g| {
        run(
            py,
            g,
            r#"
assert har.N_FEATURES == 117
assert len(har.feature_names()) == 117
assert har.activities() == ["D", "J", "L", "S", "Sd", "W", "T"]
"#,
        );
    });
}

#[test]
fn train_classify_update_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    with_module(|py, g| {
        g.set_item("tmp", dir.path().to_str().unwrap()).unwrap();
        run(
            py,
            g,
            r#"
import os
xs, ys = [], []
for user in range(2):
    rec = os.path.join(tmp, f"user{user}")
    har.synthesize(rec, seed=user, duration_s=90.0, user=user)
    x, y = har.extract_features(rec)
    xs += [r for r, l in zip(x, y) if l is not None]
    ys += [l for l in y if l is not None]
model, acc = har.train(xs, ys, epochs=300, restarts=1)
assert model.weight_bytes == 2028
label, probs = model.classify(xs[0])
assert abs(sum(probs) - 1.0) < 1e-12
i = har.activities().index(label)
model.update(xs[0], label, 1.0, alpha=0.01)
assert model.classify(xs[0])[1][i] >= probs[i]
path = os.path.join(tmp, "m.harn")
model.save(path)
assert har.Model.load(path).to_bytes() == model.to_bytes()
rows = har.run_pipeline(os.path.join(tmp, "user0"), path, mode="rl", model_out=os.path.join(tmp, "m2.harn"))
assert len(rows) > 0 and os.path.exists(os.path.join(tmp, "m2.harn"))
"#,
        );
    });
}

#[test]
fn errors_map_to_python_exceptions() {
    with_module(|py, g| {
        run(
            py,
            g,
            r#"
def raises(exc, f):
    try:
        f()
    except exc:
        return
    raise AssertionError(f"expected {exc.__name__}")

raises(ValueError, lambda: har.Model.from_bytes(b"junk"))
raises(ValueError, lambda: har.train([[0.0] * 117], ["nope"]))
raises(ValueError, lambda: har.train([[0.0] * 117], []))
raises(OSError, lambda: har.Model.load("/nonexistent/model.harn"))
raises(ValueError, lambda: har.run_pipeline("/tmp", "/tmp/x", mode="sideways"))
"#,
        );
    });
}
