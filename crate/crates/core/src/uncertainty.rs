//! Per-sub-structure uncertainty from a marginal distribution row.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Acquisition function used to rank sub-structures.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Acquisition {
    #[default]
    Margin,
    LeastConfidence,
    Entropy,
}

impl Acquisition {
    /// Ranking key where smaller means more uncertain: the margin itself,
    /// the top probability for least-confidence, negated entropy.
    pub fn priority(self, row: &[f64]) -> f64 {
        match self {
            Acquisition::Margin => margin(row),
            Acquisition::LeastConfidence => 1.0 - least_confidence(row),
            Acquisition::Entropy => -entropy(row),
        }
    }
}

impl fmt::Display for Acquisition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Acquisition::Margin => "margin",
            Acquisition::LeastConfidence => "least-confidence",
            Acquisition::Entropy => "entropy",
        })
    }
}

impl FromStr for Acquisition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "margin" => Ok(Acquisition::Margin),
            "least-confidence" | "lc" => Ok(Acquisition::LeastConfidence),
            "entropy" => Ok(Acquisition::Entropy),
            other => Err(format!(
                "unknown acquisition {other:?} (expected margin, least-confidence or entropy)"
            )),
        }
    }
}

/// Largest and second largest entries with the index of the largest
/// (lowest index on ties).
pub fn top_two(row: &[f64]) -> (usize, f64, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    let mut second = f64::NEG_INFINITY;
    for (i, &p) in row.iter().enumerate() {
        if p > best.1 {
            second = best.1;
            best = (i, p);
        } else if p > second {
            second = p;
        }
    }
    (best.0, best.1, second.max(0.0))
}

/// Difference between the two most probable values, clamped to [0, 1].
pub fn margin(row: &[f64]) -> f64 {
    let (_, p1, p2) = top_two(row);
    (p1 - p2).clamp(0.0, 1.0)
}

/// One minus the most probable value.
pub fn least_confidence(row: &[f64]) -> f64 {
    let (_, p1, _) = top_two(row);
    (1.0 - p1).clamp(0.0, 1.0)
}

/// Shannon entropy in nats.
pub fn entropy(row: &[f64]) -> f64 {
    -row.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn margins() {
        assert!((margin(&[0.7, 0.3]) - 0.4).abs() < 1e-12);
        assert_eq!(margin(&[0.25; 4]), 0.0);
        assert_eq!(margin(&[0.0, 1.0, 0.0]), 1.0);
        assert_eq!(margin(&[1.0]), 1.0);
    }

    #[test]
    fn variants() {
        assert!((least_confidence(&[0.7, 0.3]) - 0.3).abs() < 1e-12);
        assert!((entropy(&[0.5, 0.5]) - 2f64.ln()).abs() < 1e-12);
        assert_eq!(entropy(&[1.0, 0.0]), 0.0);
        // more uncertain rows get smaller priority under every acquisition
        for acq in [Acquisition::Margin, Acquisition::LeastConfidence, Acquisition::Entropy] {
            assert!(acq.priority(&[0.5, 0.5]) < acq.priority(&[0.9, 0.1]), "{acq}");
        }
    }
}
