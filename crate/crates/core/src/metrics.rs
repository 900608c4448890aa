//! Binary classification metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 2×2 counts; `counts[true][predicted]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 2]; 2],
}

impl ConfusionMatrix {
    pub fn from_labels(truth: &[u8], predicted: &[u8]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::SizeMismatch { expected: truth.len(), found: predicted.len() });
        }
        let mut counts = [[0u64; 2]; 2];
        for (&t, &p) in truth.iter().zip(predicted) {
            if t > 1 || p > 1 {
                return Err(Error::Shape(format!("non-binary label pair ({t}, {p})")));
            }
            counts[t as usize][p as usize] += 1;
        }
        Ok(Self { counts })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Samples whose true class is `c`.
    pub fn support(&self, c: usize) -> u64 {
        self.counts[c][0] + self.counts[c][1]
    }

    /// Samples of true class `c` that were misclassified.
    pub fn errors(&self, c: usize) -> u64 {
        self.counts[c][1 - c]
    }

    /// trace / total.
    pub fn accuracy(&self) -> f64 {
        ratio(self.counts[0][0] + self.counts[1][1], self.total())
    }

    /// Of the samples predicted `c`, the share that truly are `c`.
    pub fn precision(&self, c: usize) -> f64 {
        ratio(self.counts[c][c], self.counts[0][c] + self.counts[1][c])
    }

    /// Of the samples truly `c`, the share predicted `c`.
    pub fn recall(&self, c: usize) -> f64 {
        ratio(self.counts[c][c], self.support(c))
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Rank-based area under the ROC curve (Mann–Whitney U), tied scores
/// receiving their mid-rank.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::SizeMismatch { expected: labels.len(), found: scores.len() });
    }
    let positives = labels.iter().filter(|&&y| y == 1).count();
    let negatives = labels.len() - positives;
    if positives == 0 {
        return Err(Error::EmptyClass(1));
    }
    if negatives == 0 {
        return Err(Error::EmptyClass(0));
    }
    // (order-preserving integer key, label); the key maps -0.0 and 0.0
    // apart, so ties are detected on the float value instead
    let mut keyed: Vec<(u64, u8)> = scores.iter().zip(labels).map(|(&s, &y)| (order_key(s), y)).collect();
    keyed.sort_unstable();
    let value = |i: usize| key_value(keyed[i].0);
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < keyed.len() {
        let mut j = i + 1;
        while j < keyed.len() && value(j) == value(i) {
            j += 1;
        }
        // ranks i+1..=j share the mid-rank
        let mid = (i + 1 + j) as f64 / 2.0;
        let pos_in_tie = keyed[i..j].iter().filter(|&&(_, y)| y == 1).count();
        rank_sum += mid * pos_in_tie as f64;
        i = j;
    }
    let p = positives as f64;
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * negatives as f64))
}

fn order_key(x: f64) -> u64 {
    let bits = x.to_bits();
    if bits >> 63 == 1 {
        !bits
    } else {
        bits | (1 << 63)
    }
}

fn key_value(k: u64) -> f64 {
    f64::from_bits(if k >> 63 == 1 { k & !(1 << 63) } else { !k })
}
