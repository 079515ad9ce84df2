//! Uniform sign verdicts with replayable witnesses.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SignStatus {
    NonNegative,
    Violated,
    Inconclusive,
}

impl SignStatus {
    /// Combine: any violation wins, then any inconclusive.
    pub fn and(self, other: SignStatus) -> SignStatus {
        use SignStatus::*;
        match (self, other) {
            (Violated, _) | (_, Violated) => Violated,
            (Inconclusive, _) | (_, Inconclusive) => Inconclusive,
            _ => NonNegative,
        }
    }
}

/// The data needed to re-evaluate a reported value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    /// A radial quantity at a radius.
    Radius { r: f64, quantity: String, value: f64 },
    /// A scalar quantity at a point.
    Point { x: Vec<f64>, quantity: String, value: f64 },
    /// A curvature value at a point along a pair of vectors.
    PointVectors { x: Vec<f64>, u: Vec<f64>, v: Vec<f64>, quantity: String, value: f64 },
    /// A QQConv sample. `side` is "y" (c-segment in Y) or "x" (c*-segment in X).
    Qqconv {
        side: String,
        x: Vec<f64>,
        x0: Vec<f64>,
        x1: Vec<f64>,
        y: Vec<f64>,
        y0: Vec<f64>,
        y1: Vec<f64>,
        t: f64,
        g_t: f64,
        g_1: f64,
    },
    /// A midpoint-concavity probe `λQ(p₁) + (1−λ)Q(p₂) − Q(λp₁ + (1−λ)p₂)`.
    Segment { p1: Vec<f64>, p2: Vec<f64>, lambda: f64, kappa: f64, value: f64 },
    /// A convexity test of a ball image.
    Ball { center: Vec<f64>, eps: f64, residual: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignVerdict {
    pub status: SignStatus,
    pub min_value: f64,
    pub witness: Option<Witness>,
    pub tol: f64,
    pub samples: usize,
}

impl SignVerdict {
    /// Classify a minimum: `≥ −tol` is nonnegative, below `−10·tol` violated,
    /// and the band in between inconclusive.
    pub fn classify(min_value: f64, witness: Option<Witness>, tol: f64, samples: usize) -> Self {
        let status = if samples == 0 || !min_value.is_finite() {
            SignStatus::Inconclusive
        } else if min_value >= -tol {
            SignStatus::NonNegative
        } else if min_value < -10.0 * tol {
            SignStatus::Violated
        } else {
            SignStatus::Inconclusive
        };
        let min_value = if min_value.is_finite() { min_value } else { 0.0 };
        SignVerdict { status, min_value, witness, tol, samples }
    }

    pub fn holds(&self) -> bool {
        self.status == SignStatus::NonNegative
    }

    pub fn is_violated(&self) -> bool {
        self.status == SignStatus::Violated
    }
}

/// Running minimum with the witness of the smallest value.
#[derive(Debug, Clone)]
pub struct MinTracker {
    pub min: f64,
    pub witness: Option<Witness>,
    pub samples: usize,
}

impl Default for MinTracker {
    fn default() -> Self {
        MinTracker { min: f64::INFINITY, witness: None, samples: 0 }
    }
}

impl MinTracker {
    pub fn push(&mut self, value: f64, witness: impl FnOnce() -> Witness) {
        self.samples += 1;
        if value < self.min {
            self.min = value;
            self.witness = Some(witness());
        }
    }

    pub fn merge(mut self, other: MinTracker) -> MinTracker {
        self.samples += other.samples;
        if other.min < self.min {
            self.min = other.min;
            self.witness = other.witness;
        }
        self
    }

    pub fn verdict(self, tol: f64) -> SignVerdict {
        SignVerdict::classify(self.min, self.witness, tol, self.samples)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classification_bands() {
        assert_eq!(SignVerdict::classify(0.0, None, 1e-9, 1).status, SignStatus::NonNegative);
        assert_eq!(SignVerdict::classify(-5e-10, None, 1e-9, 1).status, SignStatus::NonNegative);
        assert_eq!(SignVerdict::classify(-5e-9, None, 1e-9, 1).status, SignStatus::Inconclusive);
        assert_eq!(SignVerdict::classify(-1.0, None, 1e-9, 1).status, SignStatus::Violated);
        assert_eq!(SignVerdict::classify(1.0, None, 1e-9, 0).status, SignStatus::Inconclusive);
    }

    #[test]
    fn witness_round_trips_through_json() {
        let w = Witness::Radius { r: 0.5, quantity: "A".into(), value: -0.25 };
        let v = SignVerdict::classify(-0.25, Some(w), 1e-9, 3);
        let s = serde_json::to_string(&v).unwrap();
        let back: SignVerdict = serde_json::from_str(&s).unwrap();
        assert_eq!(back, v);
    }
}
