use serde::{Deserialize, Serialize};
use serde_json::Value;

use kahler_tube::{SignStatus, SignVerdict, Witness};

use crate::opts::RunConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    NonNegative,
    Violated,
    Inconclusive,
    Pass,
    Fail,
}

impl From<SignStatus> for Status {
    fn from(s: SignStatus) -> Self {
        match s {
            SignStatus::NonNegative => Status::NonNegative,
            SignStatus::Violated => Status::Violated,
            SignStatus::Inconclusive => Status::Inconclusive,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictLine {
    pub name: String,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub min_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub samples: Option<usize>,
}

/// A replayable violation: re-evaluating `quantity` at `witness` gives a value
/// that is violated when below `−10·tol`, as for sign verdicts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessEntry {
    pub source: String,
    pub quantity: String,
    pub tol: f64,
    pub value: f64,
    pub witness: Witness,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub config: RunConfig,
    pub verdicts: Vec<VerdictLine>,
    pub result: Value,
    pub witnesses: Vec<WitnessEntry>,
}

impl Report {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Report { command: command.into(), config: config.clone(), verdicts: vec![], result: Value::Null, witnesses: vec![] }
    }

    pub fn result<T: Serialize>(&mut self, r: &T) {
        self.result = serde_json::to_value(r).expect("report values serialize");
    }

    /// Record a sign verdict; a violation's witness becomes replayable under
    /// the quantity it carries.
    pub fn sign(&mut self, name: &str, v: &SignVerdict) {
        self.verdicts.push(VerdictLine {
            name: name.into(),
            status: v.status.into(),
            min_value: Some(v.min_value),
            tol: Some(v.tol),
            samples: Some(v.samples),
        });
        if v.is_violated() {
            if let Some(w) = &v.witness {
                self.witness(name, quantity_of(w), v.tol, v.min_value, w.clone());
            }
        }
    }

    pub fn witness(&mut self, source: &str, quantity: &str, tol: f64, value: f64, witness: Witness) {
        self.witnesses.push(WitnessEntry { source: source.into(), quantity: quantity.into(), tol, value, witness });
    }

    pub fn check(&mut self, name: &str, pass: bool) {
        self.status(name, if pass { Status::Pass } else { Status::Fail });
    }

    pub fn status(&mut self, name: &str, status: Status) {
        self.verdicts.push(VerdictLine { name: name.into(), status, min_value: None, tol: None, samples: None });
    }

    pub fn exit_code(&self) -> i32 {
        exit_code(self.verdicts.iter().map(|v| v.status))
    }
}

pub fn exit_code(statuses: impl IntoIterator<Item = Status>) -> i32 {
    let mut code = 0;
    for s in statuses {
        match s {
            Status::Violated | Status::Fail => return 1,
            Status::Inconclusive => code = 2,
            _ => {}
        }
    }
    code
}

fn quantity_of(w: &Witness) -> &str {
    match w {
        Witness::Radius { quantity, .. } | Witness::Point { quantity, .. } | Witness::PointVectors { quantity, .. } => quantity,
        Witness::Qqconv { .. } => "qqconv_gain",
        Witness::Segment { .. } => "ricci_midpoint",
        Witness::Ball { .. } => "ball_convexity",
    }
}
