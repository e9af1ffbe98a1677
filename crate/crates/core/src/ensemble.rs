//! Convex ensemble of base-learner scores.
//!
//! Features are min-max scaled per learner and labels mapped from `1..=5` to
//! `[0, 1]`. Weights are the least-squares fit constrained to the probability
//! simplex, computed by accelerated projected gradient. Learners are kept only
//! if their weight exceeds the pruning threshold in every cross-validation
//! fold; the survivors are refit on all rows.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const LABEL_MIN: f64 = 1.0;
pub const LABEL_MAX: f64 = 5.0;

const MAX_ITERATIONS: usize = 100_000;
const STEP_TOLERANCE: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PairKey {
    pub judge_id: String,
    pub venture_id: String,
}

impl PairKey {
    pub fn new(judge_id: &str, venture_id: &str) -> Self {
        PairKey { judge_id: judge_id.to_string(), venture_id: venture_id.to_string() }
    }
}

/// Labeled rows × learner columns. Rows are kept sorted by pair key so
/// every downstream result is independent of input row order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub learners: Vec<String>,
    pub keys: Vec<PairKey>,
    /// Row-major, `keys.len() × learners.len()`.
    pub values: Vec<f64>,
    pub labels: Vec<f64>,
    /// Cells that were missing (degenerate scores) and got the column mean.
    pub imputed: Vec<(PairKey, String)>,
}

impl FeatureMatrix {
    /// `None` cells are imputed with the column mean of the present cells.
    pub fn new(learners: Vec<String>, rows: Vec<(PairKey, Vec<Option<f64>>, f64)>) -> Result<Self> {
        let p = learners.len();
        let mut rows = rows;
        rows.sort_by(|a, b| a.0.cmp(&b.0));
        if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::DuplicateIds(vec![format!("{}/{}", w[0].0.judge_id, w[0].0.venture_id)]));
        }
        for (k, cells, y) in &rows {
            if cells.len() != p {
                return Err(Error::Dimension(format!(
                    "row {}/{} has {} scores for {p} learners",
                    k.judge_id,
                    k.venture_id,
                    cells.len()
                )));
            }
            if !y.is_finite() || cells.iter().flatten().any(|x| !x.is_finite()) {
                return Err(Error::InvalidInput(format!("non-finite value in row {}/{}", k.judge_id, k.venture_id)));
            }
        }
        let means: Vec<f64> = (0..p)
            .map(|c| {
                let present: Vec<f64> = rows.iter().filter_map(|r| r.1[c]).collect();
                if present.is_empty() {
                    0.0
                } else {
                    present.iter().sum::<f64>() / present.len() as f64
                }
            })
            .collect();
        let mut values = Vec::with_capacity(rows.len() * p);
        let mut imputed = Vec::new();
        let mut keys = Vec::with_capacity(rows.len());
        let mut labels = Vec::with_capacity(rows.len());
        for (k, cells, y) in rows {
            for (c, cell) in cells.iter().enumerate() {
                values.push(cell.unwrap_or_else(|| {
                    imputed.push((k.clone(), learners[c].clone()));
                    means[c]
                }));
            }
            keys.push(k);
            labels.push(y);
        }
        Ok(FeatureMatrix { learners, keys, values, labels, imputed })
    }

    pub fn n_rows(&self) -> usize {
        self.keys.len()
    }

    pub fn n_cols(&self) -> usize {
        self.learners.len()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_cols() + col]
    }

    /// Audit export: `judge_id,venture_id,label,<learner...>`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["judge_id".to_string(), "venture_id".to_string(), "label".to_string()];
        header.extend(self.learners.iter().cloned());
        w.write_record(&header)?;
        for (r, k) in self.keys.iter().enumerate() {
            let mut rec = vec![k.judge_id.clone(), k.venture_id.clone(), format!("{:.6}", self.labels[r])];
            rec.extend((0..self.n_cols()).map(|c| format!("{:.6}", self.get(r, c))));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnerScale {
    pub min: f64,
    pub max: f64,
}

impl LearnerScale {
    /// Map into `[0, 1]`, clamping values outside the training range.
    pub fn apply(&self, x: f64) -> f64 {
        ((x - self.min) / (self.max - self.min)).clamp(0.0, 1.0)
    }
}

pub fn normalize_label(y: f64) -> f64 {
    (y - LABEL_MIN) / (LABEL_MAX - LABEL_MIN)
}

pub fn quality_from_similarity(s: f64) -> f64 {
    LABEL_MIN + (LABEL_MAX - LABEL_MIN) * s
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedFeatures {
    pub learners: Vec<String>,
    pub keys: Vec<PairKey>,
    /// Row-major, scaled into `[0, 1]`.
    pub values: Vec<f64>,
    pub labels: Vec<f64>,
    pub scales: Vec<LearnerScale>,
    pub warnings: Vec<String>,
}

impl NormalizedFeatures {
    pub fn n_cols(&self) -> usize {
        self.learners.len()
    }

    pub fn n_rows(&self) -> usize {
        self.keys.len()
    }

    fn column_subset(&self, cols: &[usize], rows: &[usize]) -> Vec<f64> {
        let p = self.n_cols();
        let mut out = Vec::with_capacity(cols.len() * rows.len());
        for &r in rows {
            out.extend(cols.iter().map(|&c| self.values[r * p + c]));
        }
        out
    }
}

/// Per-column min-max scaling. Constant columns are dropped, and so are
/// columns identical (after scaling) to an earlier one, keeping the first in
/// learner order.
pub fn normalize_features(x: &FeatureMatrix) -> Result<NormalizedFeatures> {
    if x.n_rows() == 0 || x.n_cols() == 0 {
        return Err(Error::EmptyFeatures);
    }
    let n = x.n_rows();
    let mut learners = Vec::new();
    let mut scales = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut warnings = Vec::new();
    for (c, name) in x.learners.iter().enumerate() {
        let col: Vec<f64> = (0..n).map(|r| x.get(r, c)).collect();
        let min = col.iter().copied().fold(f64::INFINITY, f64::min);
        let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(max > min) {
            warnings.push(format!("learner `{name}` is constant on training rows; dropped"));
            continue;
        }
        let scale = LearnerScale { min, max };
        let scaled: Vec<f64> = col.iter().map(|&v| scale.apply(v)).collect();
        if let Some(i) = columns.iter().position(|c| *c == scaled) {
            warnings.push(format!("learner `{name}` duplicates `{}`; dropped", learners[i]));
            continue;
        }
        learners.push(name.clone());
        scales.push(scale);
        columns.push(scaled);
    }
    if learners.is_empty() {
        return Err(Error::EmptyFeatures);
    }
    let p = learners.len();
    let mut values = vec![0.0; n * p];
    for (c, col) in columns.iter().enumerate() {
        for (r, v) in col.iter().enumerate() {
            values[r * p + c] = *v;
        }
    }
    Ok(NormalizedFeatures {
        learners,
        keys: x.keys.clone(),
        values,
        labels: x.labels.iter().map(|&y| normalize_label(y)).collect(),
        scales,
        warnings,
    })
}

/// Euclidean projection onto `{β : β ≥ 0, Σβ = 1}` (sort-based).
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        cumsum += ui;
        let t = (cumsum - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexFit {
    pub weights: Vec<f64>,
    /// Mean squared error at `weights`.
    pub objective: f64,
    pub iterations: usize,
}

/// Mean squared error of `x·β` against `y`; `x` is row-major with `p` columns.
pub fn mse(x: &[f64], p: usize, y: &[f64], beta: &[f64]) -> f64 {
    let n = y.len();
    (0..n)
        .map(|r| {
            let pred: f64 = (0..p).map(|c| x[r * p + c] * beta[c]).sum();
            (pred - y[r]).powi(2)
        })
        .sum::<f64>()
        / n as f64
}

fn largest_eigenvalue(q: &[f64], p: usize) -> f64 {
    let mut v = vec![1.0 / (p as f64).sqrt(); p];
    let mut lambda = 0.0;
    for _ in 0..500 {
        let w: Vec<f64> = (0..p).map(|i| (0..p).map(|j| q[i * p + j] * v[j]).sum()).collect();
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let next = norm;
        v = w.into_iter().map(|x| x / norm).collect();
        if (next - lambda).abs() <= 1e-12 * next {
            return next;
        }
        lambda = next;
    }
    lambda
}

/// Least squares over the probability simplex: `argmin ‖Xβ − y‖²` subject to
/// `β ≥ 0, Σβ = 1`. `x` is row-major `n × p`.
pub fn fit_simplex_weights(x: &[f64], p: usize, y: &[f64]) -> Result<SimplexFit> {
    let n = y.len();
    if n == 0 || p == 0 || x.len() != n * p {
        return Err(Error::EmptyFeatures);
    }
    if p == 1 {
        return Ok(SimplexFit { weights: vec![1.0], objective: mse(x, 1, y, &[1.0]), iterations: 0 });
    }
    // Gram matrix and moment vector, scaled by 1/n.
    let mut q = vec![0.0; p * p];
    let mut c = vec![0.0; p];
    for r in 0..n {
        let row = &x[r * p..(r + 1) * p];
        for i in 0..p {
            c[i] += row[i] * y[r];
            for j in 0..p {
                q[i * p + j] += row[i] * row[j];
            }
        }
    }
    q.iter_mut().for_each(|v| *v /= n as f64);
    c.iter_mut().for_each(|v| *v /= n as f64);
    let lipschitz = 1.05 * largest_eigenvalue(&q, p);
    if lipschitz == 0.0 {
        let w = vec![1.0 / p as f64; p];
        return Ok(SimplexFit { objective: mse(x, p, y, &w), weights: w, iterations: 0 });
    }
    let step = 1.0 / lipschitz;
    let grad = |b: &[f64]| -> Vec<f64> {
        (0..p)
            .map(|i| (0..p).map(|j| q[i * p + j] * b[j]).sum::<f64>() - c[i])
            .collect()
    };
    let quad = |b: &[f64]| -> f64 {
        let qb: f64 = (0..p)
            .map(|i| b[i] * (0..p).map(|j| q[i * p + j] * b[j]).sum::<f64>())
            .sum();
        0.5 * qb - (0..p).map(|i| c[i] * b[i]).sum::<f64>()
    };

    let mut beta = vec![1.0 / p as f64; p];
    let mut z = beta.clone();
    let mut t = 1.0f64;
    let mut f_prev = quad(&beta);
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let g = grad(&z);
        let stepped: Vec<f64> = z.iter().zip(&g).map(|(zi, gi)| zi - step * gi).collect();
        let next = project_to_simplex(&stepped);
        let f_next = quad(&next);
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let delta = next
            .iter()
            .zip(&beta)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if f_next > f_prev {
            // Adaptive restart: drop momentum when the objective goes up.
            z = beta.clone();
            t = 1.0;
            continue;
        }
        let momentum = (t - 1.0) / t_next;
        z = next
            .iter()
            .zip(&beta)
            .map(|(a, b)| a + momentum * (a - b))
            .collect();
        beta = next;
        t = t_next;
        f_prev = f_next;
        if delta < STEP_TOLERANCE {
            break;
        }
    }
    for w in &mut beta {
        if *w < 0.0 {
            *w = 0.0;
        }
    }
    let total: f64 = beta.iter().sum();
    beta.iter_mut().for_each(|w| *w /= total);
    Ok(SimplexFit { objective: mse(x, p, y, &beta), weights: beta, iterations })
}

/// Fold index of a labeled pair: a hash of (seed, judge, venture) mod `folds`.
pub fn fold_of(key: &PairKey, seed: u64, folds: usize) -> usize {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(key.judge_id.as_bytes());
    h.update([0x1f]);
    h.update(key.venture_id.as_bytes());
    let digest = h.finalize();
    let mut first = [0u8; 8];
    first.copy_from_slice(&digest[..8]);
    (u64::from_le_bytes(first) % folds as u64) as usize
}

/// Indices of learners whose weight is strictly above `threshold` in every fold.
pub fn surviving_learners(fold_weights: &[Vec<f64>], threshold: f64) -> Vec<usize> {
    let p = fold_weights.first().map_or(0, Vec::len);
    (0..p)
        .filter(|&c| fold_weights.iter().all(|w| w[c] > threshold))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub folds: usize,
    pub threshold: f64,
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig { folds: 5, threshold: 0.01, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetainedLearner {
    pub id: String,
    pub weight: f64,
    pub scale: LearnerScale,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    pub learners: Vec<RetainedLearner>,
    pub label_min: f64,
    pub label_max: f64,
    pub folds: usize,
    pub threshold: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    /// Learners that entered cross-validation, after normalization drops.
    pub candidates: Vec<String>,
    /// `fold_weights[k][c]`: weight of candidate `c` when fold `k` is held out.
    pub fold_weights: Vec<Vec<f64>>,
    pub fold_sizes: Vec<usize>,
    pub pruned: Vec<String>,
    pub warnings: Vec<String>,
    pub final_objective: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub similarity: f64,
    pub quality: f64,
}

impl EnsembleModel {
    pub fn learner_ids(&self) -> impl Iterator<Item = &str> {
        self.learners.iter().map(|l| l.id.as_str())
    }

    /// Weighted sum of clamped, scaled scores; quality is `1 + 4·similarity`.
    pub fn predict(&self, raw: &BTreeMap<String, f64>) -> Result<Prediction> {
        let mut s = 0.0;
        for l in &self.learners {
            let x = raw.get(&l.id).ok_or_else(|| Error::MissingLearner(l.id.clone()))?;
            s += l.weight * l.scale.apply(*x);
        }
        let s = s.clamp(0.0, 1.0);
        Ok(Prediction { similarity: s, quality: self.label_min + (self.label_max - self.label_min) * s })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: EnsembleModel = serde_json::from_str(s)?;
        m.check()?;
        Ok(m)
    }

    fn check(&self) -> Result<()> {
        if self.learners.is_empty() {
            return Err(Error::InvalidInput("ensemble has no learners".into()));
        }
        let total: f64 = self.learners.iter().map(|l| l.weight).sum();
        if (total - 1.0).abs() > 1e-9 || self.learners.iter().any(|l| l.weight < 0.0) {
            return Err(Error::InvalidWeights(format!("weights sum to {total}")));
        }
        Ok(())
    }
}

/// Cross-validated pruning followed by a refit of the survivors on all rows.
pub fn cross_validate_prune(x: &FeatureMatrix, cfg: CvConfig) -> Result<(EnsembleModel, TrainingReport)> {
    if cfg.folds < 2 {
        return Err(Error::InvalidInput("need at least 2 folds".into()));
    }
    if x.n_rows() < cfg.folds {
        return Err(Error::InvalidInput(format!(
            "{} labeled rows for {} folds",
            x.n_rows(),
            cfg.folds
        )));
    }
    let norm = normalize_features(x)?;
    let p = norm.n_cols();
    let all_cols: Vec<usize> = (0..p).collect();
    let fold_ids: Vec<usize> = norm.keys.iter().map(|k| fold_of(k, cfg.seed, cfg.folds)).collect();
    let mut fold_weights = Vec::with_capacity(cfg.folds);
    let mut fold_sizes = Vec::with_capacity(cfg.folds);
    for k in 0..cfg.folds {
        let train: Vec<usize> = (0..norm.n_rows()).filter(|&r| fold_ids[r] != k).collect();
        fold_sizes.push(norm.n_rows() - train.len());
        let xs = norm.column_subset(&all_cols, &train);
        let ys: Vec<f64> = train.iter().map(|&r| norm.labels[r]).collect();
        fold_weights.push(fit_simplex_weights(&xs, p, &ys)?.weights);
    }
    let keep = surviving_learners(&fold_weights, cfg.threshold);
    if keep.is_empty() {
        return Err(Error::NoSurvivors { threshold: cfg.threshold });
    }
    let rows: Vec<usize> = (0..norm.n_rows()).collect();
    let xs = norm.column_subset(&keep, &rows);
    let fit = fit_simplex_weights(&xs, keep.len(), &norm.labels)?;
    let learners = keep
        .iter()
        .zip(&fit.weights)
        .map(|(&c, &w)| RetainedLearner { id: norm.learners[c].clone(), weight: w, scale: norm.scales[c] })
        .collect();
    let pruned = (0..p)
        .filter(|c| !keep.contains(c))
        .map(|c| norm.learners[c].clone())
        .collect();
    let model = EnsembleModel {
        learners,
        label_min: LABEL_MIN,
        label_max: LABEL_MAX,
        folds: cfg.folds,
        threshold: cfg.threshold,
        seed: cfg.seed,
    };
    let report = TrainingReport {
        candidates: norm.learners.clone(),
        fold_weights,
        fold_sizes,
        pruned,
        warnings: norm.warnings,
        final_objective: fit.objective,
    };
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn simplex_ok(w: &[f64]) -> bool {
        (w.iter().sum::<f64>() - 1.0).abs() <= 1e-9 && w.iter().all(|&x| x >= 0.0)
    }

    #[test]
    fn projection_examples() {
        assert_eq!(project_to_simplex(&[0.2, 0.8]), vec![0.2, 0.8]);
        assert_eq!(project_to_simplex(&[2.0, 0.0]), vec![1.0, 0.0]);
        let p = project_to_simplex(&[0.0, 0.0, 0.0]);
        assert!(p.iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn recovers_known_convex_combination() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 60;
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let (a, b): (f64, f64) = (rng.random(), rng.random());
            x.extend([a, b]);
            y.push(0.7 * a + 0.3 * b);
        }
        let fit = fit_simplex_weights(&x, 2, &y).unwrap();
        assert!((fit.weights[0] - 0.7).abs() < 1e-6, "{:?}", fit.weights);
        assert!((fit.weights[1] - 0.3).abs() < 1e-6);
        assert!(simplex_ok(&fit.weights));
    }

    #[test]
    fn single_learner_gets_full_weight() {
        let fit = fit_simplex_weights(&[0.1, 0.5, 0.9], 1, &[0.0, 1.0, 0.5]).unwrap();
        assert_eq!(fit.weights, vec![1.0]);
    }

    #[test]
    fn empty_input_errors() {
        assert!(matches!(fit_simplex_weights(&[], 2, &[]), Err(Error::EmptyFeatures)));
    }

    #[test]
    fn normalize_examples() {
        let fm = FeatureMatrix::new(
            vec!["a".into(), "flat".into()],
            vec![
                (PairKey::new("J1", "V1"), vec![Some(0.2), Some(0.3)], 5.0),
                (PairKey::new("J2", "V1"), vec![Some(0.4), Some(0.3)], 1.0),
                (PairKey::new("J3", "V1"), vec![Some(0.6), Some(0.3)], 3.0),
            ],
        )
        .unwrap();
        let n = normalize_features(&fm).unwrap();
        assert_eq!(n.learners, vec!["a".to_string()]);
        let col: Vec<f64> = n.values.clone();
        assert!((col[0] - 0.0).abs() < 1e-12 && (col[1] - 0.5).abs() < 1e-12 && (col[2] - 1.0).abs() < 1e-12);
        assert_eq!(n.labels, vec![1.0, 0.0, 0.5]);
        assert_eq!(n.warnings.len(), 1);
    }

    #[test]
    fn missing_cells_imputed_with_column_mean() {
        let fm = FeatureMatrix::new(
            vec!["a".into()],
            vec![
                (PairKey::new("J1", "V1"), vec![Some(0.2)], 5.0),
                (PairKey::new("J2", "V1"), vec![None], 1.0),
                (PairKey::new("J3", "V1"), vec![Some(0.6)], 3.0),
            ],
        )
        .unwrap();
        assert!((fm.get(1, 0) - 0.4).abs() < 1e-15);
        assert_eq!(fm.imputed, vec![(PairKey::new("J2", "V1"), "a".to_string())]);
    }

    #[test]
    fn pruning_rule_is_strict_in_every_fold() {
        let folds = vec![
            vec![0.5, 0.49, 0.01],
            vec![0.005, 0.99, 0.005],
            vec![0.5, 0.49, 0.01],
        ];
        assert_eq!(surviving_learners(&folds, 0.01), vec![1]);
    }

    #[test]
    fn predict_examples() {
        let unit = LearnerScale { min: 0.0, max: 1.0 };
        let model = EnsembleModel {
            learners: vec![
                RetainedLearner { id: "a".into(), weight: 0.5, scale: unit },
                RetainedLearner { id: "b".into(), weight: 0.5, scale: unit },
            ],
            label_min: 1.0,
            label_max: 5.0,
            folds: 5,
            threshold: 0.01,
            seed: 0,
        };
        let raw = BTreeMap::from([("a".to_string(), 0.2), ("b".to_string(), 0.4)]);
        let p = model.predict(&raw).unwrap();
        assert!((p.similarity - 0.3).abs() < 1e-15 && (p.quality - 2.2).abs() < 1e-12);
        let top = BTreeMap::from([("a".to_string(), 1.0), ("b".to_string(), 1.0)]);
        assert_eq!(model.predict(&top).unwrap().quality, 5.0);
        let over = BTreeMap::from([("a".to_string(), 7.0), ("b".to_string(), 1.0)]);
        assert_eq!(model.predict(&over).unwrap().similarity, 1.0);
        let missing = BTreeMap::from([("a".to_string(), 0.1)]);
        assert!(matches!(model.predict(&missing), Err(Error::MissingLearner(id)) if id == "b"));
    }

    #[test]
    fn identical_learners_keep_first() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows = (0..40)
            .map(|i| {
                let v: f64 = rng.random();
                (PairKey::new(&format!("J{i}"), "V"), vec![Some(v), Some(v), Some(v)], 1.0 + 4.0 * v)
            })
            .collect();
        let fm = FeatureMatrix::new(vec!["l0".into(), "l1".into(), "l2".into()], rows).unwrap();
        let (model, report) = cross_validate_prune(&fm, CvConfig::default()).unwrap();
        assert_eq!(model.learner_ids().collect::<Vec<_>>(), vec!["l0"]);
        assert_eq!(report.warnings.len(), 2);
    }

    #[test]
    fn model_json_roundtrip() {
        let model = EnsembleModel {
            learners: vec![RetainedLearner { id: "a".into(), weight: 1.0, scale: LearnerScale { min: 0.1, max: 0.9 } }],
            label_min: 1.0,
            label_max: 5.0,
            folds: 5,
            threshold: 0.01,
            seed: 9,
        };
        assert_eq!(EnsembleModel::from_json(&model.to_json().unwrap()).unwrap(), model);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn weights_on_simplex_and_beat_vertices(
            seed in 0u64..10_000,
            p in 2usize..6,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 30;
            let x: Vec<f64> = (0..n * p).map(|_| rng.random()).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.random()).collect();
            let fit = fit_simplex_weights(&x, p, &y).unwrap();
            prop_assert!(simplex_ok(&fit.weights));
            for v in 0..p {
                let mut e = vec![0.0; p];
                e[v] = 1.0;
                prop_assert!(fit.objective <= mse(&x, p, &y, &e) + 1e-12);
            }
        }

        #[test]
        fn prediction_monotone_in_each_score(
            w in prop::collection::vec(0.0f64..1.0, 3),
            base in prop::collection::vec(0.0f64..1.0, 3),
            bump in 0.0f64..0.5,
            which in 0usize..3,
        ) {
            let total: f64 = w.iter().sum::<f64>().max(1e-9);
            let unit = LearnerScale { min: 0.0, max: 1.0 };
            let model = EnsembleModel {
                learners: (0..3).map(|i| RetainedLearner { id: format!("l{i}"), weight: w[i] / total, scale: unit }).collect(),
                label_min: 1.0, label_max: 5.0, folds: 5, threshold: 0.01, seed: 0,
            };
            let raw: BTreeMap<String, f64> = (0..3).map(|i| (format!("l{i}"), base[i])).collect();
            let mut bumped = raw.clone();
            *bumped.get_mut(&format!("l{which}")).unwrap() += bump;
            prop_assert!(model.predict(&bumped).unwrap().similarity >= model.predict(&raw).unwrap().similarity);
        }
    }
}
