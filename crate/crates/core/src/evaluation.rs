//! Cohort comparison statistics: the overlap-adjusted Mann-Whitney
//! statistic per venture, its inverse-variance weighted mean, a
//! within-venture label permutation test, and Kendall's tau-b.

use std::collections::BTreeMap;
use std::io::Read;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

pub const VARIANCE_FLOOR: f64 = 1e-3;
pub const DEFAULT_RESAMPLES: usize = 5000;
/// Resampled statistics this close to the observed one count as extreme.
pub const EXTREME_TOLERANCE: f64 = 1e-12;

/// Mann-Whitney kernel.
pub fn mw_h(x: u8, y: u8) -> f64 {
    match x.cmp(&y) {
        std::cmp::Ordering::Greater => 1.0,
        std::cmp::Ordering::Equal => 0.5,
        std::cmp::Ordering::Less => 0.0,
    }
}

/// Scores for one venture: algorithm-only, manual-only and overlap.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VentureScores {
    pub algorithmic: Vec<u8>,
    pub manual: Vec<u8>,
    pub overlap: Vec<u8>,
}

impl VentureScores {
    pub fn new(algorithmic: Vec<u8>, manual: Vec<u8>, overlap: Vec<u8>) -> Result<Self> {
        let s = VentureScores { algorithmic, manual, overlap };
        s.check()?;
        Ok(s)
    }

    fn check(&self) -> Result<()> {
        if let Some(bad) = self.all().find(|s| !(1..=5).contains(s)) {
            return Err(Error::InvalidInput(format!("score {bad} outside 1..=5")));
        }
        Ok(())
    }

    fn all(&self) -> impl Iterator<Item = u8> + '_ {
        self.algorithmic.iter().chain(&self.manual).chain(&self.overlap).copied()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortScores {
    pub ventures: BTreeMap<String, VentureScores>,
}

impl CohortScores {
    /// Reads `judge_id,venture_id,source,score` rows where source is one of
    /// `manual`, `algorithmic`, `both`.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| {
            headers.iter().position(|h| h == name).ok_or_else(|| Error::MissingColumn(name.to_string()))
        };
        let (vc, sc, qc) = (col("venture_id")?, col("source")?, col("score")?);
        col("judge_id")?;
        let mut out = CohortScores::default();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = i + 2;
            let venture = rec.get(vc).unwrap_or("").to_string();
            if venture.is_empty() {
                return Err(Error::MissingId { row });
            }
            let raw = rec.get(qc).unwrap_or("");
            let score: u8 = raw
                .parse()
                .ok()
                .filter(|s| (1..=5).contains(s))
                .ok_or_else(|| Error::InvalidRecord { row, message: format!("score `{raw}` is not an integer in 1..=5") })?;
            let entry = out.ventures.entry(venture).or_default();
            match rec.get(sc).unwrap_or("") {
                "manual" => entry.manual.push(score),
                "algorithmic" => entry.algorithmic.push(score),
                "both" => entry.overlap.push(score),
                other => {
                    return Err(Error::InvalidRecord { row, message: format!("unknown source `{other}`") });
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VentureStat {
    pub u: f64,
    pub u_overlap: f64,
    pub v: u64,
    /// `None` when the venture is excluded.
    pub t: Option<f64>,
    pub variance: f64,
    pub included: bool,
}

/// Doubled kernel sums over score histograms, so ties stay exact.
fn h2_sum(x: &[u64; 6], y: &[u64; 6]) -> u64 {
    let mut s = 0;
    for a in 1..6 {
        if x[a] == 0 {
            continue;
        }
        let below: u64 = y[1..a].iter().sum();
        s += x[a] * (2 * below + y[a]);
    }
    s
}

fn histogram(scores: impl Iterator<Item = u8>) -> [u64; 6] {
    let mut h = [0u64; 6];
    for s in scores {
        h[s as usize] += 1;
    }
    h
}

fn add(a: &[u64; 6], b: &[u64; 6]) -> [u64; 6] {
    std::array::from_fn(|i| a[i] + b[i])
}

fn population_variance(h: &[u64; 6]) -> f64 {
    let n: u64 = h.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let mean = (1..6).map(|s| s as f64 * h[s] as f64).sum::<f64>() / n as f64;
    (1..6).map(|s| h[s] as f64 * (s as f64 - mean).powi(2)).sum::<f64>() / n as f64
}

fn stat_from_histograms(a: &[u64; 6], m: &[u64; 6], o: &[u64; 6]) -> VentureStat {
    let (na, nm, no) = (a.iter().sum::<u64>(), m.iter().sum::<u64>(), o.iter().sum::<u64>());
    let u2 = h2_sum(&add(a, o), &add(m, o));
    let uo2 = h2_sum(o, o);
    let v = (na + no) * (nm + no) - no * no;
    let u = u2 as f64 / 2.0;
    let u_overlap = uo2 as f64 / 2.0;
    let included = v > 0;
    let t = included.then(|| (u - u_overlap) / v as f64);
    VentureStat { u, u_overlap, v, t, variance: population_variance(&add(&add(a, m), o)), included }
}

pub fn venture_statistic(scores: &VentureScores) -> VentureStat {
    stat_from_histograms(
        &histogram(scores.algorithmic.iter().copied()),
        &histogram(scores.manual.iter().copied()),
        &histogram(scores.overlap.iter().copied()),
    )
}

/// Inverse-variance weighted mean of the included statistics.
pub fn weighted_auc(stats: &[VentureStat]) -> Result<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for s in stats.iter().filter(|s| s.included) {
        let w = 1.0 / s.variance.max(VARIANCE_FLOOR);
        num += w * s.t.expect("included ventures have a statistic");
        den += w;
    }
    if den == 0.0 {
        return Err(Error::InvalidInput("no venture has both algorithmic and manual comparisons".into()));
    }
    Ok(num / den)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VentureReport {
    pub venture_id: String,
    #[serde(flatten)]
    pub stat: VentureStat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub auc: f64,
    pub p: f64,
    pub n_resamples: usize,
    pub seed: u64,
    pub extreme_count: usize,
    pub per_venture: Vec<VentureReport>,
    pub excluded_ventures: Vec<String>,
}

impl TestResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Two-sided permutation test of the weighted AUC against 0.5. Each
/// resample shuffles the algorithm-only and manual-only labels within every
/// venture, overlap scores fixed. Resample `j` draws from ChaCha8 seeded with
/// `seed` on stream `j`, so results do not depend on evaluation order.
pub fn permutation_test(cohort: &CohortScores, n_resamples: usize, seed: u64) -> Result<TestResult> {
    if n_resamples == 0 {
        return Err(Error::InvalidInput("at least one resample is required".into()));
    }
    for s in cohort.ventures.values() {
        s.check()?;
    }
    let per_venture: Vec<VentureReport> = cohort
        .ventures
        .iter()
        .map(|(id, s)| VentureReport { venture_id: id.clone(), stat: venture_statistic(s) })
        .collect();
    let stats: Vec<VentureStat> = per_venture.iter().map(|r| r.stat).collect();
    let auc = weighted_auc(&stats)?;
    let observed = (auc - 0.5).abs();

    struct Slot {
        pool: Vec<u8>,
        n_alg: usize,
        overlap: [u64; 6],
        weight: f64,
    }
    let slots: Vec<Slot> = cohort
        .ventures
        .values()
        .zip(&stats)
        .filter(|(_, st)| st.included)
        .map(|(s, st)| {
            let mut pool = s.algorithmic.clone();
            pool.extend(&s.manual);
            Slot {
                pool,
                n_alg: s.algorithmic.len(),
                overlap: histogram(s.overlap.iter().copied()),
                weight: 1.0 / st.variance.max(VARIANCE_FLOOR),
            }
        })
        .collect();
    let den: f64 = slots.iter().map(|s| s.weight).sum();

    let mut extreme = 0usize;
    let mut pool = Vec::new();
    for j in 0..n_resamples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(j as u64);
        let mut num = 0.0;
        for slot in &slots {
            pool.clear();
            pool.extend_from_slice(&slot.pool);
            pool.shuffle(&mut rng);
            let a = histogram(pool[..slot.n_alg].iter().copied());
            let m = histogram(pool[slot.n_alg..].iter().copied());
            num += slot.weight * stat_from_histograms(&a, &m, &slot.overlap).t.expect("pool sizes unchanged");
        }
        if ((num / den) - 0.5).abs() >= observed - EXTREME_TOLERANCE {
            extreme += 1;
        }
    }
    Ok(TestResult {
        auc,
        p: (1 + extreme) as f64 / (1 + n_resamples) as f64,
        n_resamples,
        seed,
        extreme_count: extreme,
        excluded_ventures: per_venture.iter().filter(|r| !r.stat.included).map(|r| r.venture_id.clone()).collect(),
        per_venture,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KendallTau {
    pub tau: f64,
    pub p: f64,
}

/// Kendall's tau-b with a two-sided p-value from the tie-corrected normal
/// approximation.
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Result<KendallTau> {
    let n = x.len();
    if n != y.len() || n < 2 {
        return Err(Error::InvalidInput("kendall tau needs two equal-length lists of at least 2 values".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("kendall tau inputs must be finite".into()));
    }
    let mut s: i64 = 0;
    for i in 0..n {
        for j in i + 1..n {
            let a = (x[i] - x[j]).partial_cmp(&0.0).expect("finite") as i64;
            let b = (y[i] - y[j]).partial_cmp(&0.0).expect("finite") as i64;
            s += a * b;
        }
    }
    let ties = |v: &[f64]| {
        let mut sorted = v.to_vec();
        sorted.sort_by(f64::total_cmp);
        let (mut t0, mut t1, mut t2) = (0f64, 0f64, 0f64);
        let mut i = 0;
        while i < sorted.len() {
            let mut k = i;
            while k < sorted.len() && sorted[k] == sorted[i] {
                k += 1;
            }
            let t = (k - i) as f64;
            if t > 1.0 {
                t0 += t * (t - 1.0) / 2.0;
                t1 += t * (t - 1.0) * (t - 2.0);
                t2 += t * (t - 1.0) * (2.0 * t + 5.0);
            }
            i = k;
        }
        (t0, t1, t2)
    };
    let (xt, x1, x2) = ties(x);
    let (yt, y1, y2) = ties(y);
    let nf = n as f64;
    let n0 = nf * (nf - 1.0) / 2.0;
    if xt == n0 || yt == n0 {
        return Err(Error::InvalidInput("kendall tau is undefined for constant input".into()));
    }
    let tau = s as f64 / ((n0 - xt).sqrt() * (n0 - yt).sqrt());
    let m = nf * (nf - 1.0);
    let third = if n > 2 { x1 * y1 / (9.0 * m * (nf - 2.0)) } else { 0.0 };
    let var = (m * (2.0 * nf + 5.0) - x2 - y2) / 18.0 + 2.0 * xt * yt / m + third;
    let p = if var > 0.0 {
        let z = s as f64 / var.sqrt();
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        (2.0 * normal.sf(z.abs())).min(1.0)
    } else {
        1.0
    };
    Ok(KendallTau { tau, p })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vs(a: &[u8], m: &[u8], o: &[u8]) -> VentureScores {
        VentureScores::new(a.to_vec(), m.to_vec(), o.to_vec()).unwrap()
    }

    #[test]
    fn kernel() {
        assert_eq!(mw_h(5, 3), 1.0);
        assert_eq!(mw_h(4, 4), 0.5);
        assert_eq!(mw_h(2, 4), 0.0);
    }

    #[test]
    fn worked_examples() {
        let s = venture_statistic(&vs(&[5, 3], &[4], &[]));
        assert_eq!((s.u, s.v, s.t), (1.0, 2, Some(0.5)));
        let s = venture_statistic(&vs(&[5], &[3], &[4]));
        assert_eq!((s.u, s.u_overlap, s.v, s.t), (3.5, 0.5, 3, Some(1.0)));
        let s = venture_statistic(&vs(&[], &[], &[4]));
        assert_eq!(s.v, 0);
        assert!(!s.included);
    }

    #[test]
    fn weighted_mean() {
        let mk = |t, variance| VentureStat { u: 0.0, u_overlap: 0.0, v: 1, t: Some(t), variance, included: true };
        assert!((weighted_auc(&[mk(0.4, 1.0), mk(0.8, 1.0)]).unwrap() - 0.6).abs() < 1e-15);
        assert_eq!(weighted_auc(&[mk(0.3, 0.5)]).unwrap(), 0.3);
        let w = weighted_auc(&[mk(0.2, 0.0), mk(0.9, 1.0)]).unwrap();
        assert!(w.is_finite() && w < 0.21);
        let excluded = VentureStat { included: false, t: None, ..mk(0.5, 1.0) };
        assert!(weighted_auc(&[excluded]).is_err());
    }

    #[test]
    fn identical_scores_give_p_one() {
        let mut c = CohortScores::default();
        c.ventures.insert("V1".into(), vs(&[3, 3], &[3, 3, 3], &[3]));
        c.ventures.insert("V2".into(), vs(&[3], &[3], &[]));
        let r = permutation_test(&c, 200, 7).unwrap();
        assert_eq!(r.p, 1.0);
    }

    #[test]
    fn two_point_instance() {
        // A={5}, M={1}: the two labelings give T=1 and T=0, both extreme.
        let mut c = CohortScores::default();
        c.ventures.insert("V1".into(), vs(&[5], &[1], &[]));
        let r = permutation_test(&c, 100, 1).unwrap();
        assert_eq!(r.auc, 1.0);
        assert_eq!(r.p, 1.0);
    }

    #[test]
    fn reproducible() {
        let mut c = CohortScores::default();
        c.ventures.insert("V1".into(), vs(&[5, 4, 4], &[1, 2, 3], &[3]));
        c.ventures.insert("V2".into(), vs(&[2, 5], &[1, 1, 2], &[]));
        let a = permutation_test(&c, 500, 42).unwrap();
        let b = permutation_test(&c, 500, 42).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        assert!(a.p >= 1.0 / 501.0 && a.p <= 1.0);
    }

    #[test]
    fn csv_input() {
        let csv = "judge_id,venture_id,source,score\nJ1,V1,manual,4\nJ2,V1,algorithmic,5\nJ3,V1,both,3\nJ4,V2,both,2\n";
        let c = CohortScores::from_csv(csv.as_bytes()).unwrap();
        assert_eq!(c.ventures["V1"], vs(&[5], &[4], &[3]));
        let r = permutation_test(&c, 10, 0).unwrap();
        assert_eq!(r.excluded_ventures, vec!["V2".to_string()]);
        assert!(CohortScores::from_csv("judge_id,venture_id,source,score\nJ1,V1,manual,6\n".as_bytes()).is_err());
        assert!(CohortScores::from_csv("judge_id,venture_id,source,score\nJ1,V1,other,3\n".as_bytes()).is_err());
    }

    #[test]
    fn kendall_examples() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!((kendall_tau_b(&x, &x).unwrap().tau - 1.0).abs() < 1e-15);
        let r: Vec<f64> = x.iter().rev().copied().collect();
        assert!((kendall_tau_b(&x, &r).unwrap().tau + 1.0).abs() < 1e-15);
        let k = kendall_tau_b(&x, &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((k.tau - 4.0 / 6.0).abs() < 1e-15);
        assert!(kendall_tau_b(&x, &[2.0; 4]).is_err());
        assert!(kendall_tau_b(&x, &[1.0]).is_err());
    }

    #[test]
    fn kendall_matches_reference_with_ties() {
        let x = [1.0, 2.0, 2.0, 3.0, 4.0, 4.0, 5.0];
        let y = [2.0, 1.0, 3.0, 3.0, 5.0, 4.0, 4.0];
        let k = kendall_tau_b(&x, &y).unwrap();
        assert!((k.tau - 0.6842105263157894).abs() < 1e-12, "{}", k.tau);
        assert!((k.p - 0.041136383569940586).abs() < 1e-9, "{}", k.p);
        let k = kendall_tau_b(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((k.p - 0.17423138824802498).abs() < 1e-9, "{}", k.p);
    }
}
