//! Depth-first branch-and-bound over eligible cells.
//!
//! Cells are visited judge-major in id order with "assign" tried first, so
//! the first optimal solution found is the lexicographically smallest
//! sorted pair list among all optima.

use super::{Instance, Objective};

pub(super) struct Outcome {
    pub x: Vec<bool>,
    /// False when the node budget ran out before the search finished.
    pub proven: bool,
}

struct Search<'a> {
    inst: &'a Instance,
    /// (judge, venture, weight) for eligible cells, judge-major.
    cells: Vec<(usize, usize, i64)>,
    /// Per venture: (cell position, judge, weight), ascending position.
    by_venture: Vec<Vec<(usize, usize, i64)>>,
    take: Vec<bool>,
    load: Vec<usize>,
    count: Vec<usize>,
    sum: Vec<i64>,
    best: Objective,
    best_take: Option<Vec<bool>>,
    incumbent_x: Vec<bool>,
    nodes: u64,
    budget: u64,
    scratch: Vec<i64>,
}

pub(super) fn solve(inst: &Instance, incumbent: &[bool], budget: u64) -> Outcome {
    let mut cells = Vec::new();
    let mut by_venture = vec![Vec::new(); inst.nv];
    for j in 0..inst.nj {
        for v in 0..inst.nv {
            let c = inst.idx(j, v);
            if inst.eligible[c] {
                by_venture[v].push((cells.len(), j, inst.w[c]));
                cells.push((j, v, inst.w[c]));
            }
        }
    }
    let n = cells.len();
    let mut s = Search {
        inst,
        cells,
        by_venture,
        take: vec![false; n],
        load: vec![0; inst.nj],
        count: vec![0; inst.nv],
        sum: vec![0; inst.nv],
        best: inst.objective(incumbent),
        best_take: None,
        incumbent_x: incumbent.to_vec(),
        nodes: 0,
        budget,
        scratch: Vec::new(),
    };
    let finished = s.dfs(0);
    let x = match &s.best_take {
        Some(take) => {
            let mut x = vec![false; inst.w.len()];
            for (k, &(j, v, _)) in s.cells.iter().enumerate() {
                if take[k] {
                    x[inst.idx(j, v)] = true;
                }
            }
            x
        }
        None => s.incumbent_x.clone(),
    };
    Outcome { x, proven: finished }
}

impl Search<'_> {
    /// Optimistic objective for any completion from `pos`; `None` when some
    /// panel can no longer be filled.
    fn bound(&mut self, pos: usize) -> Option<Objective> {
        let mut min = i64::MAX;
        let mut total = 0i64;
        for v in 0..self.inst.nv {
            let need = self.inst.panel[v] - self.count[v];
            self.scratch.clear();
            if need > 0 {
                let start = self.by_venture[v].partition_point(|&(p, _, _)| p < pos);
                for &(_, j, w) in &self.by_venture[v][start..] {
                    if self.load[j] < self.inst.load_max {
                        self.scratch.push(w);
                    }
                }
                if self.scratch.len() < need {
                    return None;
                }
                self.scratch.sort_unstable_by(|a, b| b.cmp(a));
            }
            let ub = self.sum[v] + self.scratch.iter().take(need).sum::<i64>();
            min = min.min(ub);
            total += ub;
        }
        Some(Objective { min, total })
    }

    /// Returns false when the budget is exhausted.
    fn dfs(&mut self, pos: usize) -> bool {
        self.nodes += 1;
        if self.nodes > self.budget {
            return false;
        }
        let Some(ub) = self.bound(pos) else { return true };
        if ub < self.best || (ub == self.best && self.best_take.is_some()) {
            return true;
        }
        if pos == self.cells.len() {
            // Every panel is full here, so the bound is the objective.
            self.best = ub;
            self.best_take = Some(self.take.clone());
            return true;
        }
        let (j, v, w) = self.cells[pos];
        if self.load[j] < self.inst.load_max && self.count[v] < self.inst.panel[v] {
            self.take[pos] = true;
            self.load[j] += 1;
            self.count[v] += 1;
            self.sum[v] += w;
            let ok = self.dfs(pos + 1);
            self.take[pos] = false;
            self.load[j] -= 1;
            self.count[v] -= 1;
            self.sum[v] -= w;
            if !ok {
                return false;
            }
        }
        self.dfs(pos + 1)
    }
}
