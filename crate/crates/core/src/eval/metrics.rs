use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gridmap::{Ternary, TernaryMap};

/// Binary occupancy confusion counts; only exactly-occupied cells are positive.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

impl std::ops::AddAssign for ConfusionCounts {
    fn add_assign(&mut self, o: Self) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
        self.tn += o.tn;
    }
}

pub fn confusion(pred: &TernaryMap, truth: &TernaryMap) -> Result<ConfusionCounts> {
    if (pred.width(), pred.height()) != (truth.width(), truth.height()) {
        return Err(Error::Shape(format!(
            "prediction {}x{} vs truth {}x{}",
            pred.width(),
            pred.height(),
            truth.width(),
            truth.height()
        )));
    }
    let mut c = ConfusionCounts::default();
    for (&p, &t) in pred.cells().iter().zip(truth.cells()) {
        match (p == Ternary::Occupied, t == Ternary::Occupied) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    /// Set when some ratio had a zero denominator and was reported as 0.
    pub degenerate: bool,
}

impl Metrics {
    pub fn as_array(&self) -> [f64; 4] {
        [self.accuracy, self.precision, self.recall, self.f_measure]
    }
}

pub fn metrics(c: &ConfusionCounts) -> Metrics {
    let mut degenerate = false;
    let mut ratio = |num: u64, den: u64| {
        if den == 0 {
            degenerate = true;
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let accuracy = ratio(c.tp + c.tn, c.total());
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f_measure = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        degenerate = true;
        0.0
    };
    Metrics {
        accuracy,
        precision,
        recall,
        f_measure,
        degenerate,
    }
}

/// Index of the candidate with the highest precision against `query`, where
/// `query` plays the truth and the candidate the prediction. Ties go to the
/// lowest index.
pub fn best_match_index<'a>(query: &TernaryMap, candidates: impl IntoIterator<Item = &'a TernaryMap>) -> Result<Option<(usize, f64)>> {
    let mut best: Option<(usize, f64)> = None;
    for (i, m) in candidates.into_iter().enumerate() {
        let p = metrics(&confusion(m, query)?).precision;
        if best.is_none_or(|(_, bp)| p > bp) {
            best = Some((i, p));
        }
    }
    Ok(best)
}

/// The nearest training map by precision, used as a retrieval baseline.
pub fn baseline_best_match(query: &TernaryMap, training: &[TernaryMap]) -> Result<TernaryMap> {
    match best_match_index(query, training)? {
        Some((i, _)) => Ok(training[i].clone()),
        None => Err(Error::InvalidParam("baseline needs a nonempty training set".into())),
    }
}
