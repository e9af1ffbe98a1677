//! Brute-force reference implementations shared by the oracle and
//! acceptance tests.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use judgematch::assignment::{build_grid, to_units, ConstraintSet, JudgeInfo, SimilarityGrid, VentureInfo};
use judgematch::evaluation::{mw_h, venture_statistic, weighted_auc, CohortScores, VentureScores};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    d / (na * nb)
}

pub struct Inst {
    pub grid: SimilarityGrid,
    pub constraints: ConstraintSet,
}

pub fn random_instance(rng: &mut ChaCha8Rng) -> Option<Inst> {
    let nj = rng.random_range(1..=6);
    let nv = rng.random_range(1..=3);
    let tracks = ["Open", "Impact"];
    let judges: Vec<JudgeInfo> = (0..nj)
        .map(|i| {
            let mut t: Vec<String> = tracks.iter().filter(|_| rng.random_bool(0.8)).map(|s| s.to_string()).collect();
            if t.is_empty() {
                t.push("Open".into());
            }
            JudgeInfo { id: format!("j{i}"), tracks: t }
        })
        .collect();
    let ventures: Vec<VentureInfo> = (0..nv)
        .map(|i| VentureInfo { id: format!("v{i}"), track: tracks[rng.random_range(0..2)].to_string() })
        .collect();
    let mut constraints = ConstraintSet {
        panel_size: rng.random_range(1..=2),
        judge_load_max: rng.random_range(1..=3),
        ..Default::default()
    };
    for j in &judges {
        for v in &ventures {
            if rng.random_bool(0.1) {
                constraints.coi_pairs.insert((j.id.clone(), v.id.clone()));
            }
        }
    }
    // Coarse values make ties common.
    let sims: BTreeMap<(String, String), f64> = judges
        .iter()
        .flat_map(|j| ventures.iter().map(move |v| (j.id.clone(), v.id.clone())))
        .map(|k| (k, rng.random_range(0..=10) as f64 / 10.0))
        .collect();
    let grid = build_grid(&judges, &ventures, |j, v| sims.get(&(j.to_string(), v.to_string())).copied(), &constraints).ok()?;
    Some(Inst { grid, constraints })
}

pub fn combinations(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    if items.len() < k {
        return vec![];
    }
    let mut out: Vec<Vec<usize>> = combinations(&items[1..], k - 1)
        .into_iter()
        .map(|mut c| {
            c.insert(0, items[0]);
            c
        })
        .collect();
    out.extend(combinations(&items[1..], k));
    out
}

/// Best (min, total) and the smallest sorted pair list achieving it.
pub fn exhaustive(inst: &Inst) -> Option<((i64, i64), Vec<(String, String)>)> {
    let g = &inst.grid;
    let per_venture: Vec<Vec<Vec<usize>>> = (0..g.n_ventures())
        .map(|v| {
            let elig: Vec<usize> = (0..g.n_judges()).filter(|&j| g.is_eligible(j, v)).collect();
            combinations(&elig, g.panel[v])
        })
        .collect();
    let mut best: Option<((i64, i64), Vec<(String, String)>)> = None;
    let mut choice = vec![0usize; g.n_ventures()];
    loop {
        let mut load = vec![0usize; g.n_judges()];
        let mut ok = true;
        let mut sums = Vec::new();
        let mut pairs = Vec::new();
        for (v, &c) in choice.iter().enumerate() {
            let panel = &per_venture[v][c];
            let mut s = 0;
            for &j in panel {
                load[j] += 1;
                s += to_units(g.similarity(j, v).unwrap());
                pairs.push((g.judges[j].id.clone(), g.ventures[v].id.clone()));
            }
            sums.push(s);
        }
        if load.iter().any(|&l| l > inst.constraints.judge_load_max) {
            ok = false;
        }
        if ok {
            pairs.sort();
            let obj = (*sums.iter().min().unwrap(), sums.iter().sum());
            let better = match &best {
                None => true,
                Some((b, bp)) => obj > *b || (obj == *b && pairs < *bp),
            };
            if better {
                best = Some((obj, pairs));
            }
        }
        // Next combination in mixed radix.
        let mut k = 0;
        loop {
            if k == choice.len() {
                return best;
            }
            choice[k] += 1;
            if choice[k] < per_venture[k].len() {
                break;
            }
            choice[k] = 0;
            k += 1;
        }
    }
}

pub fn brute_stat(a: &[u8], m: &[u8], o: &[u8]) -> (f64, f64, i64, Option<f64>) {
    let left: Vec<u8> = a.iter().chain(o).copied().collect();
    let right: Vec<u8> = m.iter().chain(o).copied().collect();
    let mut u = 0.0;
    for &x in &left {
        for &y in &right {
            u += mw_h(x, y);
        }
    }
    let mut uo = 0.0;
    for &x in o {
        for &y in o {
            uo += mw_h(x, y);
        }
    }
    let (na, nm, no) = (a.len() as i64, m.len() as i64, o.len() as i64);
    let v = (na + no) * (nm + no) - no * no;
    (u, uo, v, (v > 0).then(|| (u - uo) / v as f64))
}

/// Exact p over every relabeling of the pooled algorithm/manual scores.
pub fn exact_p(cohort: &CohortScores) -> f64 {
    let ventures: Vec<&VentureScores> = cohort.ventures.values().collect();
    let stats: Vec<_> = ventures.iter().map(|v| venture_statistic(v)).collect();
    let observed = (weighted_auc(&stats).unwrap() - 0.5).abs();
    let options: Vec<Vec<(Vec<u8>, Vec<u8>)>> = ventures
        .iter()
        .map(|v| {
            let pool: Vec<u8> = v.algorithmic.iter().chain(&v.manual).copied().collect();
            let idx: Vec<usize> = (0..pool.len()).collect();
            combinations(&idx, v.algorithmic.len())
                .into_iter()
                .map(|chosen| {
                    let set: BTreeSet<usize> = chosen.into_iter().collect();
                    let a = idx.iter().filter(|i| set.contains(i)).map(|&i| pool[i]).collect();
                    let m = idx.iter().filter(|i| !set.contains(i)).map(|&i| pool[i]).collect();
                    (a, m)
                })
                .collect()
        })
        .collect();
    let mut choice = vec![0usize; ventures.len()];
    let (mut hits, mut total) = (0u64, 0u64);
    loop {
        let st: Vec<_> = ventures
            .iter()
            .zip(&choice)
            .enumerate()
            .map(|(k, (v, &c))| {
                let (a, m) = &options[k][c];
                venture_statistic(&VentureScores::new(a.clone(), m.clone(), v.overlap.clone()).unwrap())
            })
            .collect();
        if (weighted_auc(&st).unwrap() - 0.5).abs() >= observed - 1e-9 {
            hits += 1;
        }
        total += 1;
        let mut k = 0;
        loop {
            if k == choice.len() {
                return hits as f64 / total as f64;
            }
            choice[k] += 1;
            if choice[k] < options[k].len() {
                break;
            }
            choice[k] = 0;
            k += 1;
        }
    }
}
