//! Constrained judge assignment.
//!
//! Every venture receives exactly its panel size of judges, no judge exceeds
//! the load cap, and conflicted or cross-track pairs are never used. Among
//! feasible assignments the solver maximizes the smallest per-venture
//! quality (sum of assigned similarities), then the total similarity.
//!
//! Similarities are compared on a fixed `1e-6` grid ([`UNITS_PER_SIMILARITY`])
//! so sums and ties are exact. Small instances are solved exactly by
//! branch-and-bound; larger ones start from min-cost-flow solutions (plain
//! max-total, and max-total restricted to the bottleneck edge threshold
//! found by binary search with max-flow feasibility checks) and are improved
//! by leximin local search.

mod exact;
mod flow;
mod local;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use flow::FlowNetwork;

pub const DEFAULT_PANEL_SIZE: usize = 12;
pub const DEFAULT_LOAD_MAX: usize = 7;
pub const UNITS_PER_SIMILARITY: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSet {
    pub panel_size: usize,
    #[serde(default)]
    pub panel_size_by_track: BTreeMap<String, usize>,
    pub judge_load_max: usize,
    /// Forbidden (judge_id, venture_id) pairs.
    #[serde(default)]
    pub coi_pairs: BTreeSet<(String, String)>,
}

impl Default for ConstraintSet {
    fn default() -> Self {
        ConstraintSet {
            panel_size: DEFAULT_PANEL_SIZE,
            panel_size_by_track: BTreeMap::new(),
            judge_load_max: DEFAULT_LOAD_MAX,
            coi_pairs: BTreeSet::new(),
        }
    }
}

impl ConstraintSet {
    pub fn panel_for(&self, track: &str) -> usize {
        self.panel_size_by_track.get(track).copied().unwrap_or(self.panel_size)
    }

    pub fn validate(&self) -> Result<()> {
        if self.panel_size == 0 || self.judge_load_max == 0 || self.panel_size_by_track.values().any(|&p| p == 0) {
            return Err(Error::InvalidInput("panel size and load cap must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeInfo {
    pub id: String,
    pub tracks: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VentureInfo {
    pub id: String,
    pub track: String,
}

impl From<&crate::corpus::JudgeProfile> for JudgeInfo {
    fn from(j: &crate::corpus::JudgeProfile) -> Self {
        JudgeInfo { id: j.judge_id.clone(), tracks: j.preferred_tracks.clone() }
    }
}

impl From<&crate::corpus::VentureApplication> for VentureInfo {
    fn from(v: &crate::corpus::VentureApplication) -> Self {
        VentureInfo { id: v.venture_id.clone(), track: v.track.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Eligible,
    CrossTrack,
    Conflict,
}

/// Judges × ventures similarity matrix with eligibility. Judges and
/// ventures are sorted by id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityGrid {
    pub judges: Vec<JudgeInfo>,
    pub ventures: Vec<VentureInfo>,
    /// Required panel size per venture.
    pub panel: Vec<usize>,
    /// `judges.len() × ventures.len()`, judge-major; 0 where ineligible.
    sims: Vec<f64>,
    status: Vec<CellStatus>,
}

impl SimilarityGrid {
    pub fn n_judges(&self) -> usize {
        self.judges.len()
    }

    pub fn n_ventures(&self) -> usize {
        self.ventures.len()
    }

    fn cell(&self, j: usize, v: usize) -> usize {
        j * self.ventures.len() + v
    }

    pub fn status(&self, j: usize, v: usize) -> CellStatus {
        self.status[self.cell(j, v)]
    }

    pub fn is_eligible(&self, j: usize, v: usize) -> bool {
        self.status(j, v) == CellStatus::Eligible
    }

    /// Similarity of an eligible cell; `None` otherwise.
    pub fn similarity(&self, j: usize, v: usize) -> Option<f64> {
        self.is_eligible(j, v).then(|| self.sims[self.cell(j, v)])
    }

    pub fn judge_index(&self, id: &str) -> Option<usize> {
        self.judges.binary_search_by(|j| j.id.as_str().cmp(id)).ok()
    }

    pub fn venture_index(&self, id: &str) -> Option<usize> {
        self.ventures.binary_search_by(|v| v.id.as_str().cmp(id)).ok()
    }

    pub fn eligible_count(&self, v: usize) -> usize {
        (0..self.n_judges()).filter(|&j| self.is_eligible(j, v)).count()
    }

    /// Apply `f` to every eligible similarity.
    pub fn map_similarities(&self, f: impl Fn(f64) -> f64) -> Self {
        let mut g = self.clone();
        for (s, st) in g.sims.iter_mut().zip(&g.status) {
            if *st == CellStatus::Eligible {
                *s = f(*s);
            }
        }
        g
    }

    /// Restrict to the ventures of one track and the judges who prefer it.
    pub fn track_subgrid(&self, track: &str) -> Self {
        let vs: Vec<usize> = (0..self.n_ventures()).filter(|&v| self.ventures[v].track == track).collect();
        let js: Vec<usize> = (0..self.n_judges())
            .filter(|&j| self.judges[j].tracks.iter().any(|t| t == track))
            .collect();
        let mut sims = Vec::with_capacity(vs.len() * js.len());
        let mut status = Vec::with_capacity(vs.len() * js.len());
        for &j in &js {
            for &v in &vs {
                sims.push(self.sims[self.cell(j, v)]);
                status.push(self.status(j, v));
            }
        }
        SimilarityGrid {
            judges: js.iter().map(|&j| self.judges[j].clone()).collect(),
            ventures: vs.iter().map(|&v| self.ventures[v].clone()).collect(),
            panel: vs.iter().map(|&v| self.panel[v]).collect(),
            sims,
            status,
        }
    }
}

/// Build the eligibility-masked grid. `predict(judge, venture)` must return a
/// similarity for every eligible pair.
pub fn build_grid(
    judges: &[JudgeInfo],
    ventures: &[VentureInfo],
    predict: impl Fn(&str, &str) -> Option<f64>,
    constraints: &ConstraintSet,
) -> Result<SimilarityGrid> {
    constraints.validate()?;
    let mut judges = judges.to_vec();
    let mut ventures = ventures.to_vec();
    judges.sort_by(|a, b| a.id.cmp(&b.id));
    ventures.sort_by(|a, b| a.id.cmp(&b.id));
    for w in judges.windows(2).filter(|w| w[0].id == w[1].id) {
        return Err(Error::DuplicateIds(vec![w[0].id.clone()]));
    }
    for w in ventures.windows(2).filter(|w| w[0].id == w[1].id) {
        return Err(Error::DuplicateIds(vec![w[0].id.clone()]));
    }
    let jset: BTreeSet<&str> = judges.iter().map(|j| j.id.as_str()).collect();
    let vset: BTreeSet<&str> = ventures.iter().map(|v| v.id.as_str()).collect();
    for (j, v) in &constraints.coi_pairs {
        if !jset.contains(j.as_str()) {
            return Err(Error::UnknownId(j.clone()));
        }
        if !vset.contains(v.as_str()) {
            return Err(Error::UnknownId(v.clone()));
        }
    }
    let mut sims = Vec::with_capacity(judges.len() * ventures.len());
    let mut status = Vec::with_capacity(judges.len() * ventures.len());
    for j in &judges {
        for v in &ventures {
            let st = if constraints.coi_pairs.contains(&(j.id.clone(), v.id.clone())) {
                CellStatus::Conflict
            } else if !j.tracks.iter().any(|t| *t == v.track) {
                CellStatus::CrossTrack
            } else {
                CellStatus::Eligible
            };
            let s = if st == CellStatus::Eligible {
                let s = predict(&j.id, &v.id).ok_or_else(|| {
                    Error::InvalidInput(format!("no similarity for eligible pair ({}, {})", j.id, v.id))
                })?;
                if !s.is_finite() {
                    return Err(Error::InvalidInput(format!("non-finite similarity for ({}, {})", j.id, v.id)));
                }
                s
            } else {
                0.0
            };
            sims.push(s);
            status.push(st);
        }
    }
    let panel = ventures.iter().map(|v| constraints.panel_for(&v.track)).collect();
    let grid = SimilarityGrid { judges, ventures, panel, sims, status };
    let short: Vec<DeficientVenture> = (0..grid.n_ventures())
        .filter(|&v| grid.eligible_count(v) < grid.panel[v])
        .map(|v| DeficientVenture {
            venture_id: grid.ventures[v].id.clone(),
            eligible_judges: grid.eligible_count(v),
            required: grid.panel[v],
        })
        .collect();
    if !short.is_empty() {
        let required = short.iter().map(|d| d.required).sum();
        let available = short.iter().map(|d| d.eligible_judges).sum();
        return Err(Error::Infeasible(InfeasibilityCertificate {
            deficient_ventures: short,
            required_slots: required,
            available_slots: available,
        }));
    }
    Ok(grid)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeficientVenture {
    pub venture_id: String,
    pub eligible_judges: usize,
    pub required: usize,
}

/// A set of ventures whose combined panel demand exceeds what their eligible
/// judges can supply.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InfeasibilityCertificate {
    pub deficient_ventures: Vec<DeficientVenture>,
    pub required_slots: usize,
    pub available_slots: usize,
}

impl fmt::Display for InfeasibilityCertificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ids: Vec<&str> = self.deficient_ventures.iter().map(|d| d.venture_id.as_str()).collect();
        write!(
            f,
            "ventures [{}] need {} judge slots but only {} are available",
            ids.join(", "),
            self.required_slots,
            self.available_slots
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimality {
    /// Exhaustive search finished: optimal for (min quality, total).
    Proven,
    /// Local search result.
    Heuristic,
    /// Modified by hand after solving.
    Edited,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignedPair {
    pub judge_id: String,
    pub venture_id: String,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    /// Sorted by (judge_id, venture_id).
    pub pairs: Vec<AssignedPair>,
    pub optimality: Optimality,
}

impl Assignment {
    pub fn from_pairs(mut pairs: Vec<AssignedPair>, optimality: Optimality) -> Self {
        pairs.sort_by(|a, b| (&a.judge_id, &a.venture_id).cmp(&(&b.judge_id, &b.venture_id)));
        Assignment { pairs, optimality }
    }

    pub fn contains(&self, judge: &str, venture: &str) -> bool {
        self.pairs.iter().any(|p| p.judge_id == judge && p.venture_id == venture)
    }

    pub fn judges_of<'a>(&'a self, venture: &'a str) -> impl Iterator<Item = &'a AssignedPair> + 'a {
        self.pairs.iter().filter(move |p| p.venture_id == venture)
    }

    pub fn load_of(&self, judge: &str) -> usize {
        self.pairs.iter().filter(|p| p.judge_id == judge).count()
    }

    /// Sum of assigned similarities per venture (every grid venture listed).
    pub fn venture_quality(&self, grid: &SimilarityGrid) -> BTreeMap<String, f64> {
        let mut q: BTreeMap<String, f64> = grid.ventures.iter().map(|v| (v.id.clone(), 0.0)).collect();
        for p in &self.pairs {
            *q.entry(p.venture_id.clone()).or_insert(0.0) += p.similarity;
        }
        q
    }

    pub fn min_quality(&self, grid: &SimilarityGrid) -> f64 {
        self.venture_quality(grid).values().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn total_similarity(&self) -> f64 {
        self.pairs.iter().map(|p| p.similarity).sum()
    }

    /// Sorted (judge, venture) id pairs.
    pub fn pair_set(&self) -> BTreeSet<(String, String)> {
        self.pairs.iter().map(|p| (p.judge_id.clone(), p.venture_id.clone())).collect()
    }
}

/// Integer view of a grid used by the solvers.
#[derive(Debug, Clone)]
pub(crate) struct Instance {
    pub nj: usize,
    pub nv: usize,
    pub w: Vec<i64>,
    pub eligible: Vec<bool>,
    pub panel: Vec<usize>,
    pub load_max: usize,
}

impl Instance {
    pub fn from_grid(grid: &SimilarityGrid, constraints: &ConstraintSet) -> Self {
        let (nj, nv) = (grid.n_judges(), grid.n_ventures());
        let mut w = Vec::with_capacity(nj * nv);
        let mut eligible = Vec::with_capacity(nj * nv);
        for j in 0..nj {
            for v in 0..nv {
                let e = grid.is_eligible(j, v);
                eligible.push(e);
                w.push(if e { to_units(grid.sims[grid.cell(j, v)]) } else { 0 });
            }
        }
        Instance { nj, nv, w, eligible, panel: grid.panel.clone(), load_max: constraints.judge_load_max }
    }

    #[inline]
    pub fn idx(&self, j: usize, v: usize) -> usize {
        j * self.nv + v
    }

    pub fn demand(&self) -> usize {
        self.panel.iter().sum()
    }

    pub fn objective(&self, x: &[bool]) -> Objective {
        let mut sums = vec![0i64; self.nv];
        for j in 0..self.nj {
            for v in 0..self.nv {
                if x[self.idx(j, v)] {
                    sums[v] += self.w[self.idx(j, v)];
                }
            }
        }
        Objective::from_sums(&sums)
    }
}

pub fn to_units(s: f64) -> i64 {
    (s * UNITS_PER_SIMILARITY).round() as i64
}

/// (smallest venture quality, total), compared lexicographically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) struct Objective {
    pub min: i64,
    pub total: i64,
}

impl Objective {
    pub fn from_sums(sums: &[i64]) -> Self {
        Objective { min: sums.iter().copied().min().unwrap_or(0), total: sums.iter().sum() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolverOptions {
    /// Instances with at most this many eligible cells are solved exactly.
    pub exact_cell_limit: usize,
    /// Search-node cap for the exact solver; on overrun the heuristic
    /// result is returned.
    pub node_budget: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { exact_cell_limit: 48, node_budget: 5_000_000 }
    }
}

/// Check that panels can be filled at all; on failure report the ventures
/// on the source side of a minimum cut.
pub fn check_feasible(grid: &SimilarityGrid, constraints: &ConstraintSet) -> Result<()> {
    let inst = Instance::from_grid(grid, constraints);
    let mut n = local::network(&inst, None, false);
    let flow = n.net.max_flow(n.source, n.sink);
    if flow as usize == inst.demand() {
        return Ok(());
    }
    let reach = n.net.residual_reachable(n.source);
    let deficient: Vec<usize> = (0..inst.nv).filter(|&v| reach[1 + v]).collect();
    let judges: Vec<usize> = (0..inst.nj).filter(|&j| reach[1 + inst.nv + j]).collect();
    let required: usize = deficient.iter().map(|&v| inst.panel[v]).sum();
    let available: usize = judges
        .iter()
        .map(|&j| {
            let links = deficient.iter().filter(|&&v| inst.eligible[inst.idx(j, v)]).count();
            links.min(inst.load_max)
        })
        .sum();
    Err(Error::Infeasible(InfeasibilityCertificate {
        deficient_ventures: deficient
            .iter()
            .map(|&v| DeficientVenture {
                venture_id: grid.ventures[v].id.clone(),
                eligible_judges: grid.eligible_count(v),
                required: inst.panel[v],
            })
            .collect(),
        required_slots: required,
        available_slots: available,
    }))
}

/// Max-min fair assignment with default solver options.
pub fn assign_maxmin(grid: &SimilarityGrid, constraints: &ConstraintSet) -> Result<Assignment> {
    assign_maxmin_with(grid, constraints, SolverOptions::default())
}

pub fn assign_maxmin_with(
    grid: &SimilarityGrid,
    constraints: &ConstraintSet,
    opts: SolverOptions,
) -> Result<Assignment> {
    constraints.validate()?;
    check_feasible(grid, constraints)?;
    if grid.n_ventures() == 0 {
        return Ok(Assignment::from_pairs(Vec::new(), Optimality::Proven));
    }
    let inst = Instance::from_grid(grid, constraints);
    let heuristic = local::solve(&inst);
    let eligible_cells = inst.eligible.iter().filter(|&&e| e).count();
    let (x, optimality) = if eligible_cells <= opts.exact_cell_limit {
        let out = exact::solve(&inst, &heuristic, opts.node_budget);
        (out.x, if out.proven { Optimality::Proven } else { Optimality::Heuristic })
    } else {
        (heuristic, Optimality::Heuristic)
    };
    Ok(to_assignment(grid, &inst, &x, optimality))
}

/// Max-total-similarity assignment (no fairness objective), via min-cost flow.
pub fn assign_max_total(grid: &SimilarityGrid, constraints: &ConstraintSet) -> Result<Assignment> {
    constraints.validate()?;
    check_feasible(grid, constraints)?;
    let inst = Instance::from_grid(grid, constraints);
    let x = local::flow_assign(&inst, None).expect("feasibility checked");
    Ok(to_assignment(grid, &inst, &x, Optimality::Heuristic))
}

fn to_assignment(grid: &SimilarityGrid, inst: &Instance, x: &[bool], optimality: Optimality) -> Assignment {
    let mut pairs = Vec::new();
    for j in 0..inst.nj {
        for v in 0..inst.nv {
            if x[inst.idx(j, v)] {
                pairs.push(AssignedPair {
                    judge_id: grid.judges[j].id.clone(),
                    venture_id: grid.ventures[v].id.clone(),
                    similarity: grid.sims[grid.cell(j, v)],
                });
            }
        }
    }
    Assignment::from_pairs(pairs, optimality)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Violation {
    PanelSize { venture_id: String, observed: usize, required: usize },
    Load { judge_id: String, observed: usize, max: usize },
    Conflict { judge_id: String, venture_id: String },
    Track { judge_id: String, venture_id: String },
    UnknownPair { judge_id: String, venture_id: String },
    Duplicate { judge_id: String, venture_id: String },
}

/// All constraint violations of `assignment`; empty when it is valid.
pub fn validate(assignment: &Assignment, grid: &SimilarityGrid, constraints: &ConstraintSet) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    let mut per_venture: BTreeMap<&str, usize> = BTreeMap::new();
    let mut per_judge: BTreeMap<&str, usize> = BTreeMap::new();
    for p in &assignment.pairs {
        let key = (p.judge_id.as_str(), p.venture_id.as_str());
        if !seen.insert(key) {
            out.push(Violation::Duplicate { judge_id: p.judge_id.clone(), venture_id: p.venture_id.clone() });
            continue;
        }
        *per_venture.entry(&p.venture_id).or_insert(0) += 1;
        *per_judge.entry(&p.judge_id).or_insert(0) += 1;
        let ids = || (p.judge_id.clone(), p.venture_id.clone());
        match (grid.judge_index(&p.judge_id), grid.venture_index(&p.venture_id)) {
            (Some(j), Some(v)) => match grid.status(j, v) {
                CellStatus::Eligible => {}
                CellStatus::Conflict => {
                    let (judge_id, venture_id) = ids();
                    out.push(Violation::Conflict { judge_id, venture_id });
                }
                CellStatus::CrossTrack => {
                    let (judge_id, venture_id) = ids();
                    out.push(Violation::Track { judge_id, venture_id });
                }
            },
            _ => {
                let (judge_id, venture_id) = ids();
                out.push(Violation::UnknownPair { judge_id, venture_id });
            }
        }
    }
    for (v, info) in grid.ventures.iter().enumerate() {
        let observed = per_venture.get(info.id.as_str()).copied().unwrap_or(0);
        if observed != grid.panel[v] {
            out.push(Violation::PanelSize { venture_id: info.id.clone(), observed, required: grid.panel[v] });
        }
    }
    for (judge, &observed) in &per_judge {
        if observed > constraints.judge_load_max {
            out.push(Violation::Load { judge_id: judge.to_string(), observed, max: constraints.judge_load_max });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub judge_id: String,
    pub similarity: f64,
    pub load: usize,
}

/// Judges who could replace `removed_judge` on `venture`: eligible, not on
/// the panel, and under the load cap. Best similarity first, ties by id.
pub fn suggest_replacements(
    assignment: &Assignment,
    venture: &str,
    removed_judge: &str,
    k: usize,
    grid: &SimilarityGrid,
    constraints: &ConstraintSet,
) -> Result<Vec<Candidate>> {
    if !assignment.contains(removed_judge, venture) {
        return Err(Error::NotAssigned { judge: removed_judge.to_string(), venture: venture.to_string() });
    }
    let v = grid.venture_index(venture).ok_or_else(|| Error::UnknownId(venture.to_string()))?;
    let mut out: Vec<Candidate> = (0..grid.n_judges())
        .filter(|&j| grid.is_eligible(j, v))
        .filter_map(|j| {
            let id = &grid.judges[j].id;
            if id == removed_judge || assignment.contains(id, venture) {
                return None;
            }
            let load = assignment.load_of(id);
            (load < constraints.judge_load_max).then(|| Candidate {
                judge_id: id.clone(),
                similarity: grid.sims[grid.cell(j, v)],
                load,
            })
        })
        .collect();
    out.sort_by(|a, b| b.similarity.total_cmp(&a.similarity).then_with(|| a.judge_id.cmp(&b.judge_id)));
    out.truncate(k);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn judges(n: usize, track: &str) -> Vec<JudgeInfo> {
        (1..=n).map(|i| JudgeInfo { id: format!("J{i}"), tracks: vec![track.to_string()] }).collect()
    }

    fn ventures(n: usize, track: &str) -> Vec<VentureInfo> {
        (1..=n).map(|i| VentureInfo { id: format!("V{i}"), track: track.to_string() }).collect()
    }

    fn constraints(panel: usize, load: usize) -> ConstraintSet {
        ConstraintSet { panel_size: panel, judge_load_max: load, ..Default::default() }
    }

    fn table_grid(sims: &[&[f64]], c: &ConstraintSet) -> SimilarityGrid {
        let js = judges(sims.len(), "Open");
        let vs = ventures(sims[0].len(), "Open");
        build_grid(
            &js,
            &vs,
            |j, v| {
                let ji: usize = j[1..].parse().unwrap();
                let vi: usize = v[1..].parse().unwrap();
                Some(sims[ji - 1][vi - 1])
            },
            c,
        )
        .unwrap()
    }

    #[test]
    fn defaults() {
        let c = ConstraintSet::default();
        assert_eq!((c.panel_size, c.judge_load_max), (12, 7));
    }

    #[test]
    fn cross_track_and_coi_cells_are_ineligible() {
        let js = vec![
            JudgeInfo { id: "J1".into(), tracks: vec!["Open".into()] },
            JudgeInfo { id: "J3".into(), tracks: vec!["Social Impact".into()] },
        ];
        let vs = vec![
            VentureInfo { id: "V1".into(), track: "Social Impact".into() },
            VentureInfo { id: "V9".into(), track: "Social Impact".into() },
        ];
        let mut c = constraints(1, 2);
        c.coi_pairs.insert(("J3".into(), "V9".into()));
        let err = build_grid(&js, &vs, |_, _| Some(0.99), &c).unwrap_err();
        match err {
            Error::Infeasible(cert) => {
                let ids: Vec<_> = cert.deficient_ventures.iter().map(|d| d.venture_id.as_str()).collect();
                assert_eq!(ids, vec!["V9"]);
            }
            other => panic!("{other:?}"),
        }
        c.coi_pairs.clear();
        let g = build_grid(&js, &vs, |_, _| Some(0.99), &c).unwrap();
        assert_eq!(g.status(0, 0), CellStatus::CrossTrack);
        assert_eq!(g.similarity(0, 0), None);
        assert_eq!(g.similarity(1, 1), Some(0.99));
    }

    #[test]
    fn unknown_coi_ids_rejected() {
        let mut c = constraints(1, 1);
        c.coi_pairs.insert(("J404".into(), "V1".into()));
        assert!(matches!(
            build_grid(&judges(1, "Open"), &ventures(1, "Open"), |_, _| Some(0.5), &c),
            Err(Error::UnknownId(_))
        ));
    }

    #[test]
    fn picks_argmax_for_single_slot() {
        let c = constraints(1, 1);
        let g = table_grid(&[&[0.9], &[0.1]], &c);
        let a = assign_maxmin(&g, &c).unwrap();
        assert_eq!(a.pair_set(), BTreeSet::from([("J1".to_string(), "V1".to_string())]));
        assert_eq!(a.optimality, Optimality::Proven);
    }

    #[test]
    fn maxmin_beats_greedy() {
        let c = constraints(1, 1);
        let g = table_grid(&[&[0.9, 0.8], &[0.7, 0.1]], &c);
        let a = assign_maxmin(&g, &c).unwrap();
        let expected = BTreeSet::from([
            ("J1".to_string(), "V2".to_string()),
            ("J2".to_string(), "V1".to_string()),
        ]);
        assert_eq!(a.pair_set(), expected);
        assert!((a.min_quality(&g) - 0.7).abs() < 1e-12);
        assert!(validate(&a, &g, &c).is_empty());
    }

    #[test]
    fn tight_venture_gets_all_eligible_judges() {
        let c = constraints(2, 3);
        let js = judges(4, "Open");
        let mut vs = ventures(2, "Open");
        vs[1].track = "Other".into();
        let mut js2 = js.clone();
        js2[0].tracks.push("Other".into());
        js2[1].tracks.push("Other".into());
        let g = build_grid(&js2, &vs, |_, _| Some(0.5), &c).unwrap();
        let a = assign_maxmin(&g, &c).unwrap();
        let panel: BTreeSet<_> = a.judges_of("V2").map(|p| p.judge_id.clone()).collect();
        assert_eq!(panel, BTreeSet::from(["J1".to_string(), "J2".to_string()]));
    }

    #[test]
    fn infeasible_load_reports_certificate() {
        // Two ventures need 2 judges each; only 2 judges with load 1.
        let c = constraints(2, 1);
        let g = table_grid(&[&[0.5, 0.5], &[0.5, 0.5]], &c);
        match assign_maxmin(&g, &c) {
            Err(Error::Infeasible(cert)) => {
                assert_eq!(cert.required_slots, 4);
                assert_eq!(cert.available_slots, 2);
                assert_eq!(cert.deficient_ventures.len(), 2);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn validate_reports_each_family() {
        let c = constraints(2, 1);
        let mut c2 = c.clone();
        c2.coi_pairs.insert(("J3".into(), "V1".into()));
        let g = build_grid(&judges(3, "Open"), &ventures(1, "Open"), |_, _| Some(0.5), &c2).unwrap();
        let a = Assignment::from_pairs(
            vec![AssignedPair { judge_id: "J3".into(), venture_id: "V1".into(), similarity: 0.5 }],
            Optimality::Heuristic,
        );
        let v = validate(&a, &g, &c2);
        assert!(v.contains(&Violation::Conflict { judge_id: "J3".into(), venture_id: "V1".into() }));
        assert!(v.contains(&Violation::PanelSize { venture_id: "V1".into(), observed: 1, required: 2 }));
    }

    #[test]
    fn validate_panel_and_load_counts() {
        let c = constraints(12, 7);
        let g = build_grid(&judges(14, "Open"), &ventures(9, "Open"), |_, _| Some(0.5), &c).unwrap();
        let mut pairs = Vec::new();
        for v in 1..=8 {
            pairs.push(AssignedPair { judge_id: "J1".into(), venture_id: format!("V{v}"), similarity: 0.5 });
        }
        for j in 2..=12 {
            pairs.push(AssignedPair { judge_id: format!("J{j}"), venture_id: "V9".into(), similarity: 0.5 });
        }
        let a = Assignment::from_pairs(pairs, Optimality::Heuristic);
        let v = validate(&a, &g, &c);
        assert!(v.contains(&Violation::PanelSize { venture_id: "V9".into(), observed: 11, required: 12 }));
        assert!(v.contains(&Violation::Load { judge_id: "J1".into(), observed: 8, max: 7 }));
    }

    #[test]
    fn suggestions_ranked_and_filtered() {
        let c = constraints(1, 1);
        // J1 on V1, J2 on V2 (full), J3 and J4 free.
        let g = table_grid(&[&[0.9, 0.1], &[0.95, 0.9], &[0.6, 0.1], &[0.8, 0.1]], &c);
        let a = Assignment::from_pairs(
            vec![
                AssignedPair { judge_id: "J1".into(), venture_id: "V1".into(), similarity: 0.9 },
                AssignedPair { judge_id: "J2".into(), venture_id: "V2".into(), similarity: 0.9 },
            ],
            Optimality::Heuristic,
        );
        let s = suggest_replacements(&a, "V1", "J1", 10, &g, &c).unwrap();
        let ids: Vec<_> = s.iter().map(|c| c.judge_id.as_str()).collect();
        assert_eq!(ids, vec!["J4", "J3"]);
        assert!(suggest_replacements(&a, "V1", "J3", 10, &g, &c).is_err());
        assert_eq!(suggest_replacements(&a, "V1", "J1", 1, &g, &c).unwrap().len(), 1);
    }

    #[test]
    fn no_slack_means_no_suggestions() {
        let c = constraints(1, 1);
        let g = table_grid(&[&[0.9]], &c);
        let a = assign_maxmin(&g, &c).unwrap();
        assert!(suggest_replacements(&a, "V1", "J1", 10, &g, &c).unwrap().is_empty());
    }

    #[test]
    fn track_subgrid_keeps_track_members() {
        let mut js = judges(2, "Open");
        js.push(JudgeInfo { id: "J9".into(), tracks: vec!["Social Impact".into()] });
        let mut vs = ventures(1, "Open");
        vs.push(VentureInfo { id: "V7".into(), track: "Social Impact".into() });
        let c = constraints(1, 2);
        let g = build_grid(&js, &vs, |_, _| Some(0.4), &c).unwrap();
        let sub = g.track_subgrid("Social Impact");
        assert_eq!(sub.judges.len(), 1);
        assert_eq!(sub.ventures[0].id, "V7");
    }
}
