use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::activity::{ActivityLabel, N_ACTIVITIES};
use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::model::NetworkParams;

/// Rows are true labels, columns are predictions.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[usize; N_ACTIVITIES]; N_ACTIVITIES],
}

impl ConfusionMatrix {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (ActivityLabel, ActivityLabel)>) -> Self {
        let mut m = Self::default();
        for (truth, pred) in pairs {
            m.record(truth, pred);
        }
        m
    }

    pub fn record(&mut self, truth: ActivityLabel, predicted: ActivityLabel) {
        self.counts[truth.index()][predicted.index()] += 1;
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn class_count(&self, label: ActivityLabel) -> usize {
        self.counts[label.index()].iter().sum()
    }

    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        let trace: usize = (0..N_ACTIVITIES).map(|i| self.counts[i][i]).sum();
        trace as f64 / total as f64
    }

    /// Per-class recall; `None` for classes absent from the truth.
    pub fn recall(&self, label: ActivityLabel) -> Option<f64> {
        let n = self.class_count(label);
        (n > 0).then(|| self.counts[label.index()][label.index()] as f64 / n as f64)
    }

    /// CSV with a header row of predicted labels, one row per true label,
    /// then the row's recall and support.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("truth");
        for a in ActivityLabel::ALL {
            let _ = write!(out, ",{a}");
        }
        out.push_str(",recall,count\n");
        for a in ActivityLabel::ALL {
            let _ = write!(out, "{a}");
            for c in self.counts[a.index()] {
                let _ = write!(out, ",{c}");
            }
            let recall = self.recall(a).map_or(String::new(), |r| format!("{r:.4}"));
            let _ = writeln!(out, ",{recall},{}", self.class_count(a));
        }
        let _ = writeln!(out, "overall,,,,,,,,{:.4},{}", self.accuracy(), self.total());
        out
    }
}

/// Classify every row and tabulate against its label.
pub fn evaluate(model: &NetworkParams, rows: &[(FeatureVector, Option<ActivityLabel>)]) -> Result<ConfusionMatrix> {
    let mut m = ConfusionMatrix::default();
    for (i, (x, y)) in rows.iter().enumerate() {
        let truth = y.ok_or(Error::Unlabeled(i))?;
        m.record(truth, model.classify(x)?);
    }
    Ok(m)
}
