//! Regression stumps and the additive reward model built from them.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// A single-split regression tree: `left` when `x[feature] <= threshold`,
/// `right` otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stump {
    pub feature: usize,
    pub threshold: f64,
    pub left: f64,
    pub right: f64,
}

impl Stump {
    pub fn constant(value: f64) -> Self {
        Self {
            feature: 0,
            threshold: 0.0,
            left: value,
            right: value,
        }
    }

    #[inline]
    pub fn predict(&self, x: &[f64]) -> f64 {
        if x[self.feature] <= self.threshold {
            self.left
        } else {
            self.right
        }
    }

    pub fn sse(&self, samples: &[(Vec<f64>, f64)]) -> f64 {
        samples
            .iter()
            .map(|(x, y)| {
                let e = y - self.predict(x);
                e * e
            })
            .sum()
    }
}

/// Least-squares stump over candidate thresholds at midpoints of sorted
/// distinct feature values. Ties go to the lowest feature index, then the
/// lowest threshold. When no split reduces the error (including constant
/// targets) the result predicts the mean on both sides.
pub fn fit_stump(samples: &[(Vec<f64>, f64)]) -> Result<Stump, Error> {
    let Some((first, _)) = samples.first() else {
        return Err(Error::TooFewSamples(0));
    };
    let dim = first.len();
    let mut rows = Vec::with_capacity(samples.len() * dim);
    let mut targets = Vec::with_capacity(samples.len());
    for (x, y) in samples {
        if x.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: x.len(),
            });
        }
        rows.extend_from_slice(x);
        targets.push(*y);
    }
    fit_stump_rows(&rows, dim, &targets)
}

struct Bin {
    value: f64,
    count: f64,
    sum: f64,
}

/// Same as [`fit_stump`] over a row-major feature matrix.
pub(crate) fn fit_stump_rows(rows: &[f64], dim: usize, targets: &[f64]) -> Result<Stump, Error> {
    let ones = alloc::vec![1.0; targets.len()];
    fit_stump_grouped(rows, dim, &ones, targets)
}

/// Stump fit where row `g` stands for `counts[g]` samples whose targets sum
/// to `sums[g]`. Identical to fitting the expanded samples, since the split
/// gain only depends on per-side counts and sums. Rows with a zero count
/// are ignored.
pub(crate) fn fit_stump_grouped(
    rows: &[f64],
    dim: usize,
    counts: &[f64],
    sums: &[f64],
) -> Result<Stump, Error> {
    let n: f64 = counts.iter().sum();
    if n < 2.0 {
        return Err(Error::TooFewSamples(n as usize));
    }
    if dim == 0 || rows.len() != counts.len() * dim || sums.len() != counts.len() {
        return Err(Error::DimensionMismatch {
            expected: counts.len() * dim.max(1),
            found: rows.len(),
        });
    }
    let total: f64 = sums.iter().sum();
    let total_sq: f64 = counts
        .iter()
        .zip(sums)
        .filter(|(c, _)| **c > 0.0)
        .map(|(c, s)| s * s / c)
        .sum();
    let mean = total / n;
    let base_gain = total * total / n;
    let tol = 1e-12 * total_sq.max(1.0);

    // gain = S_L^2/n_L + S_R^2/n_R; SSE = sum(y^2) - gain.
    let mut best: Option<(f64, Stump)> = None;
    let mut bins: Vec<Bin> = Vec::new();
    for feature in 0..dim {
        bins.clear();
        for (g, (&c, &y)) in counts.iter().zip(sums).enumerate() {
            if c <= 0.0 {
                continue;
            }
            let v = rows[g * dim + feature];
            match bins.binary_search_by(|b| b.value.total_cmp(&v)) {
                Ok(k) => {
                    bins[k].count += c;
                    bins[k].sum += y;
                }
                Err(k) => bins.insert(
                    k,
                    Bin {
                        value: v,
                        count: c,
                        sum: y,
                    },
                ),
            }
        }
        let mut count_l = 0.0;
        let mut sum_l = 0.0;
        for k in 0..bins.len().saturating_sub(1) {
            count_l += bins[k].count;
            sum_l += bins[k].sum;
            let count_r = n - count_l;
            let sum_r = total - sum_l;
            let gain = sum_l * sum_l / count_l + sum_r * sum_r / count_r;
            if best.as_ref().is_none_or(|(g, _)| gain > *g + tol) {
                best = Some((
                    gain,
                    Stump {
                        feature,
                        threshold: (bins[k].value + bins[k + 1].value) / 2.0,
                        left: sum_l / count_l,
                        right: sum_r / count_r,
                    },
                ));
            }
        }
    }
    match best {
        Some((gain, stump)) if gain > base_gain + tol => Ok(stump),
        _ => Ok(Stump::constant(mean)),
    }
}

/// Gradient-boosted stump ensemble. The raw score is the learning-rate
/// scaled sum of stump outputs; [`RewardModel::predict`] clamps it to
/// [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "ModelDoc", into = "ModelDoc")]
pub struct RewardModel {
    learning_rate: f64,
    max_stumps: usize,
    stumps: Vec<Stump>,
    // Stumps sharing (feature, threshold) summed together; scoring uses this.
    merged: Vec<Stump>,
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    learning_rate: f64,
    max_stumps: usize,
    stumps: Vec<Stump>,
}

impl From<ModelDoc> for RewardModel {
    fn from(doc: ModelDoc) -> Self {
        let mut model = RewardModel::new(doc.learning_rate, doc.max_stumps);
        for s in doc.stumps {
            model.push_unchecked(s);
        }
        model
    }
}

impl From<RewardModel> for ModelDoc {
    fn from(m: RewardModel) -> Self {
        ModelDoc {
            learning_rate: m.learning_rate,
            max_stumps: m.max_stumps,
            stumps: m.stumps,
        }
    }
}

impl RewardModel {
    pub fn new(learning_rate: f64, max_stumps: usize) -> Self {
        Self {
            learning_rate,
            max_stumps,
            stumps: Vec::new(),
            merged: Vec::new(),
        }
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn max_stumps(&self) -> usize {
        self.max_stumps
    }

    pub fn stumps(&self) -> &[Stump] {
        &self.stumps
    }

    pub fn len(&self) -> usize {
        self.stumps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stumps.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.stumps.len() >= self.max_stumps
    }

    /// Append a stump unless the ensemble is at capacity.
    pub fn push(&mut self, stump: Stump) -> bool {
        if self.is_full() {
            return false;
        }
        self.push_unchecked(stump);
        true
    }

    fn push_unchecked(&mut self, stump: Stump) {
        self.stumps.push(stump);
        let key = (stump.feature, stump.threshold.to_bits());
        match self
            .merged
            .iter_mut()
            .find(|m| (m.feature, m.threshold.to_bits()) == key)
        {
            Some(m) => {
                m.left += stump.left;
                m.right += stump.right;
            }
            None => self.merged.push(stump),
        }
    }

    /// Replace the stump list by its merged form. Scores are unchanged; the
    /// ensemble shrinks to one stump per distinct (feature, threshold).
    pub fn compact(&mut self) {
        self.stumps = self.merged.clone();
    }

    /// Unclamped score of a full feature vector.
    #[inline]
    pub fn raw_score(&self, x: &[f64]) -> f64 {
        self.learning_rate * self.merged.iter().map(|s| s.predict(x)).sum::<f64>()
    }

    /// Unclamped score of `context ++ arm` without concatenating.
    #[inline]
    pub fn raw_score_split(&self, context: &[f64], arm: &[f64]) -> f64 {
        let split = context.len();
        let sum: f64 = self
            .merged
            .iter()
            .map(|s| {
                let v = if s.feature < split {
                    context[s.feature]
                } else {
                    arm[s.feature - split]
                };
                if v <= s.threshold {
                    s.left
                } else {
                    s.right
                }
            })
            .sum();
        self.learning_rate * sum
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.raw_score(x).clamp(0.0, 1.0)
    }

    /// The model whose every stump output `s` becomes `scale * s + shift`.
    pub fn affine(&self, scale: f64, shift: f64) -> Self {
        let mut out = RewardModel::new(self.learning_rate, self.max_stumps);
        for s in &self.stumps {
            out.push_unchecked(Stump {
                left: scale * s.left + shift,
                right: scale * s.right + shift,
                ..*s
            });
        }
        out
    }
}
