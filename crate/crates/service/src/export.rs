//! CSV and report rendering for assignment artifacts.

use std::collections::BTreeMap;

use judgematch::assignment::{validate, Assignment, ConstraintSet, SimilarityGrid, Violation};
use judgematch::evaluation::TestResult;
use serde::{Deserialize, Serialize};

use crate::error::ServiceResult;

pub const CSV_HEADER: [&str; 4] = ["judge_id", "venture_id", "similarity", "track"];

pub fn round6(x: f64) -> f64 {
    let r = (x * 1e6).round() / 1e6;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn fmt6(x: f64) -> String {
    format!("{:.6}", round6(x))
}

/// File-name safe form of a track id.
pub fn slug(track: &str) -> String {
    let s: String = track
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c.to_ascii_lowercase() } else { '_' })
        .collect();
    if s.is_empty() {
        "track".into()
    } else {
        s
    }
}

/// `judge_id,venture_id,similarity,track`, one row per assigned pair,
/// optionally restricted to one track.
pub fn assignment_csv(a: &Assignment, grid: &SimilarityGrid, track: Option<&str>) -> ServiceResult<Vec<u8>> {
    let tracks: BTreeMap<&str, &str> = grid.ventures.iter().map(|v| (v.id.as_str(), v.track.as_str())).collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for p in &a.pairs {
        let t = tracks.get(p.venture_id.as_str()).copied().unwrap_or("");
        if track.is_some_and(|want| want != t) {
            continue;
        }
        w.write_record([p.judge_id.as_str(), p.venture_id.as_str(), &fmt6(p.similarity), t])?;
    }
    Ok(w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?)
}

/// Every eligible cell of the grid, same columns as the assignment CSV.
pub fn grid_csv(grid: &SimilarityGrid) -> ServiceResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for (j, judge) in grid.judges.iter().enumerate() {
        for (v, venture) in grid.ventures.iter().enumerate() {
            if let Some(s) = grid.similarity(j, v) {
                w.write_record([judge.id.as_str(), venture.id.as_str(), &fmt6(s), venture.track.as_str()])?;
            }
        }
    }
    Ok(w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualitySummary {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VentureQuality {
    pub venture_id: String,
    pub track: String,
    pub judges: Vec<String>,
    pub quality: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentReport {
    pub optimality: judgematch::assignment::Optimality,
    pub ventures: Vec<VentureQuality>,
    pub summary: Option<QualitySummary>,
    pub by_track: BTreeMap<String, QualitySummary>,
    pub judge_loads: BTreeMap<String, usize>,
    pub total_similarity: f64,
    pub violations: Vec<Violation>,
}

fn summarize(xs: &[f64]) -> Option<QualitySummary> {
    if xs.is_empty() {
        return None;
    }
    let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    Some(QualitySummary { min: round6(min), mean: round6(mean), max: round6(max) })
}

pub fn assignment_report(a: &Assignment, grid: &SimilarityGrid, constraints: &ConstraintSet) -> AssignmentReport {
    let quality = a.venture_quality(grid);
    let ventures: Vec<VentureQuality> = grid
        .ventures
        .iter()
        .map(|v| VentureQuality {
            venture_id: v.id.clone(),
            track: v.track.clone(),
            judges: a.judges_of(&v.id).map(|p| p.judge_id.clone()).collect(),
            quality: round6(quality.get(&v.id).copied().unwrap_or(0.0)),
        })
        .collect();
    let all: Vec<f64> = ventures.iter().map(|v| v.quality).collect();
    let mut per_track: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for v in &ventures {
        per_track.entry(v.track.clone()).or_default().push(v.quality);
    }
    let by_track = per_track.into_iter().filter_map(|(t, xs)| summarize(&xs).map(|s| (t, s))).collect();
    let judge_loads = grid.judges.iter().map(|j| (j.id.clone(), a.load_of(&j.id))).collect();
    AssignmentReport {
        optimality: a.optimality,
        summary: summarize(&all),
        ventures,
        by_track,
        judge_loads,
        total_similarity: round6(a.total_similarity()),
        violations: validate(a, grid, constraints),
    }
}

/// Evaluation result with floats rounded for the written artifact.
pub fn round_report(r: &TestResult) -> TestResult {
    let mut out = r.clone();
    out.auc = round6(out.auc);
    out.p = round6(out.p);
    for v in &mut out.per_venture {
        v.stat.t = v.stat.t.map(round6);
        v.stat.variance = round6(v.stat.variance);
    }
    out
}
