//! Flow-based starting points and leximin local search.

use super::flow::FlowNetwork;
use super::{Instance, Objective};

const PHASE1_MOVE_CAP: usize = 200_000;
const PHASE2_SWEEP_CAP: usize = 200;

pub(super) struct Network {
    pub net: FlowNetwork,
    pub source: usize,
    pub sink: usize,
    /// (judge, venture, edge id) for every venture→judge edge.
    pub cells: Vec<(usize, usize, usize)>,
}

/// source → venture (panel) → judge (1 per eligible cell with weight ≥
/// `threshold`) → sink (load cap). Costs are `wmax - w` when `with_cost`.
pub(super) fn network(inst: &Instance, threshold: Option<i64>, with_cost: bool) -> Network {
    let source = 0;
    let sink = inst.nv + inst.nj + 1;
    let mut net = FlowNetwork::new(sink + 1);
    let wmax = (0..inst.w.len()).filter(|&c| inst.eligible[c]).map(|c| inst.w[c]).max().unwrap_or(0);
    for v in 0..inst.nv {
        net.add_edge(source, 1 + v, inst.panel[v] as i64, 0);
    }
    let mut cells = Vec::new();
    for v in 0..inst.nv {
        for j in 0..inst.nj {
            let c = inst.idx(j, v);
            if !inst.eligible[c] || threshold.is_some_and(|t| inst.w[c] < t) {
                continue;
            }
            let cost = if with_cost { wmax - inst.w[c] } else { 0 };
            let id = net.add_edge(1 + v, 1 + inst.nv + j, 1, cost);
            cells.push((j, v, id));
        }
    }
    for j in 0..inst.nj {
        net.add_edge(1 + inst.nv + j, sink, inst.load_max as i64, 0);
    }
    Network { net, source, sink, cells }
}

fn feasible_at(inst: &Instance, threshold: i64) -> bool {
    let mut n = network(inst, Some(threshold), false);
    n.net.max_flow(n.source, n.sink) as usize == inst.demand()
}

/// Max-total assignment, optionally restricted to cells with weight ≥
/// `threshold`. `None` when the restricted instance is infeasible.
pub(super) fn flow_assign(inst: &Instance, threshold: Option<i64>) -> Option<Vec<bool>> {
    let mut n = network(inst, threshold, true);
    let demand = inst.demand() as i64;
    let (flow, _) = n.net.min_cost_flow(n.source, n.sink, demand);
    if flow != demand {
        return None;
    }
    let mut x = vec![false; inst.w.len()];
    for &(j, v, id) in &n.cells {
        if n.net.flow(id) > 0 {
            x[inst.idx(j, v)] = true;
        }
    }
    Some(x)
}

/// Largest edge threshold at which all panels can still be filled.
pub(super) fn bottleneck_threshold(inst: &Instance) -> Option<i64> {
    let mut vals: Vec<i64> = (0..inst.w.len()).filter(|&c| inst.eligible[c]).map(|c| inst.w[c]).collect();
    vals.sort_unstable();
    vals.dedup();
    if vals.is_empty() || !feasible_at(inst, vals[0]) {
        return None;
    }
    let (mut lo, mut hi) = (0usize, vals.len() - 1);
    while lo < hi {
        let mid = (lo + hi).div_ceil(2);
        if feasible_at(inst, vals[mid]) {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    Some(vals[lo])
}

/// Best of the improved max-total and improved bottleneck starts.
pub(super) fn solve(inst: &Instance) -> Vec<bool> {
    let mut starts = Vec::new();
    if let Some(x) = flow_assign(inst, None) {
        starts.push(x);
    }
    if let Some(t) = bottleneck_threshold(inst) {
        if let Some(x) = flow_assign(inst, Some(t)) {
            starts.push(x);
        }
    }
    let mut best: Option<(Objective, Vec<bool>)> = None;
    for x in starts {
        let mut st = State::new(inst, x);
        st.raise_minimum();
        st.raise_total();
        let obj = Objective::from_sums(&st.sum);
        if best.as_ref().is_none_or(|(b, _)| obj > *b) {
            best = Some((obj, st.x));
        }
    }
    best.map(|(_, x)| x).expect("solve called on a feasible instance")
}

enum Move {
    Replace { v: usize, out: usize, inn: usize },
    Chain { v: usize, out: usize, inn: usize, u: usize, fill: usize },
}

struct State<'a> {
    inst: &'a Instance,
    x: Vec<bool>,
    load: Vec<usize>,
    sum: Vec<i64>,
    members: Vec<Vec<usize>>,
    ventures_of: Vec<Vec<usize>>,
}

impl<'a> State<'a> {
    fn new(inst: &'a Instance, x: Vec<bool>) -> Self {
        let mut st = State {
            inst,
            x: vec![false; x.len()],
            load: vec![0; inst.nj],
            sum: vec![0; inst.nv],
            members: vec![Vec::new(); inst.nv],
            ventures_of: vec![Vec::new(); inst.nj],
        };
        for j in 0..inst.nj {
            for v in 0..inst.nv {
                if x[inst.idx(j, v)] {
                    st.add(j, v);
                }
            }
        }
        st
    }

    fn w(&self, j: usize, v: usize) -> i64 {
        self.inst.w[self.inst.idx(j, v)]
    }

    fn open(&self, j: usize, v: usize) -> bool {
        let c = self.inst.idx(j, v);
        self.inst.eligible[c] && !self.x[c]
    }

    fn add(&mut self, j: usize, v: usize) {
        let c = self.inst.idx(j, v);
        debug_assert!(!self.x[c]);
        self.x[c] = true;
        self.load[j] += 1;
        self.sum[v] += self.inst.w[c];
        let m = &mut self.members[v];
        let pos = m.partition_point(|&k| k < j);
        m.insert(pos, j);
        let vs = &mut self.ventures_of[j];
        let pos = vs.partition_point(|&k| k < v);
        vs.insert(pos, v);
    }

    fn remove(&mut self, j: usize, v: usize) {
        let c = self.inst.idx(j, v);
        debug_assert!(self.x[c]);
        self.x[c] = false;
        self.load[j] -= 1;
        self.sum[v] -= self.inst.w[c];
        self.members[v].retain(|&k| k != j);
        self.ventures_of[j].retain(|&k| k != v);
    }

    fn apply(&mut self, mv: &Move) {
        match *mv {
            Move::Replace { v, out, inn } => {
                self.remove(out, v);
                self.add(inn, v);
            }
            Move::Chain { v, out, inn, u, fill } => {
                self.remove(out, v);
                self.remove(inn, u);
                self.add(inn, v);
                self.add(fill, u);
            }
        }
    }

    /// Highest-weight judge who could join `u` without exceeding the load cap.
    fn best_spare(&self, u: usize) -> Option<usize> {
        let mut best: Option<usize> = None;
        for r in 0..self.inst.nj {
            if self.load[r] < self.inst.load_max && self.open(r, u) && best.is_none_or(|b| self.w(r, u) > self.w(b, u)) {
                best = Some(r);
            }
        }
        best
    }

    /// Repeatedly lift the worst venture above the current minimum by a
    /// replacement, a swap with another panel, or a swap whose vacated seat
    /// is refilled by a judge with spare load.
    fn raise_minimum(&mut self) {
        let inst = self.inst;
        for _ in 0..PHASE1_MOVE_CAP {
            let m = *self.sum.iter().min().expect("non-empty");
            let v = self.sum.iter().position(|&s| s == m).expect("min exists");
            let spare: Vec<Option<usize>> = (0..inst.nv).map(|u| self.best_spare(u)).collect();
            let mut best: Option<((i64, i64), Move)> = None;
            let offer = |key: (i64, i64), mv: Move, best: &mut Option<((i64, i64), Move)>| {
                if best.as_ref().is_none_or(|(k, _)| key > *k) {
                    *best = Some((key, mv));
                }
            };
            for &out in &self.members[v] {
                for inn in 0..inst.nj {
                    if !self.open(inn, v) {
                        continue;
                    }
                    let new_v = self.sum[v] - self.w(out, v) + self.w(inn, v);
                    if new_v <= m {
                        continue;
                    }
                    if self.load[inn] < inst.load_max {
                        offer((new_v, new_v - self.sum[v]), Move::Replace { v, out, inn }, &mut best);
                    }
                    for &u in &self.ventures_of[inn] {
                        let mut fills = Vec::with_capacity(2);
                        if self.open(out, u) {
                            fills.push(out);
                        }
                        if let Some(r) = spare[u] {
                            if r != out {
                                fills.push(r);
                            }
                        }
                        for fill in fills {
                            let new_u = self.sum[u] - self.w(inn, u) + self.w(fill, u);
                            if new_u <= m {
                                continue;
                            }
                            let gain = new_v - self.sum[v] + new_u - self.sum[u];
                            offer((new_v.min(new_u), gain), Move::Chain { v, out, inn, u, fill }, &mut best);
                        }
                    }
                }
            }
            match best {
                Some((_, mv)) => self.apply(&mv),
                None => return,
            }
        }
    }

    /// Raise the total by replacements and pairwise swaps that keep every
    /// venture at or above the current minimum.
    fn raise_total(&mut self) {
        let inst = self.inst;
        let floor = *self.sum.iter().min().expect("non-empty");
        for _ in 0..PHASE2_SWEEP_CAP {
            let mut changed = false;
            for v in 0..inst.nv {
                // Replacement by a judge with spare load.
                loop {
                    let mut best: Option<(i64, usize, usize)> = None;
                    for &out in &self.members[v] {
                        for inn in 0..inst.nj {
                            if self.load[inn] >= inst.load_max || !self.open(inn, v) {
                                continue;
                            }
                            let gain = self.w(inn, v) - self.w(out, v);
                            if gain > 0 && best.is_none_or(|(g, _, _)| gain > g) {
                                best = Some((gain, out, inn));
                            }
                        }
                    }
                    match best {
                        Some((_, out, inn)) => {
                            self.apply(&Move::Replace { v, out, inn });
                            changed = true;
                        }
                        None => break,
                    }
                }
                // Swap `out` (on v) with `inn` (on u).
                let mut best: Option<(i64, usize, usize, usize)> = None;
                for &out in &self.members[v] {
                    for inn in 0..inst.nj {
                        if !self.open(inn, v) {
                            continue;
                        }
                        for &u in &self.ventures_of[inn] {
                            if !self.open(out, u) {
                                continue;
                            }
                            let dv = self.w(inn, v) - self.w(out, v);
                            let du = self.w(out, u) - self.w(inn, u);
                            if dv + du <= 0 || self.sum[v] + dv < floor || self.sum[u] + du < floor {
                                continue;
                            }
                            if best.is_none_or(|(g, ..)| dv + du > g) {
                                best = Some((dv + du, out, inn, u));
                            }
                        }
                    }
                }
                if let Some((_, out, inn, u)) = best {
                    self.apply(&Move::Chain { v, out, inn, u, fill: out });
                    changed = true;
                }
            }
            if !changed {
                return;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(w: Vec<i64>, nj: usize, nv: usize, panel: usize, load: usize) -> Instance {
        Instance { nj, nv, eligible: vec![true; w.len()], w, panel: vec![panel; nv], load_max: load }
    }

    #[test]
    fn bottleneck_is_largest_feasible_edge() {
        // J1: [9, 8], J2: [7, 1]; one judge each, load 1.
        let i = inst(vec![9, 8, 7, 1], 2, 2, 1, 1);
        assert_eq!(bottleneck_threshold(&i), Some(7));
        let x = flow_assign(&i, Some(7)).unwrap();
        assert_eq!(x, vec![false, true, true, false]);
    }

    #[test]
    fn max_total_prefers_total() {
        let i = inst(vec![9, 8, 7, 1], 2, 2, 1, 1);
        let x = flow_assign(&i, None).unwrap();
        // 9 + 1 = 10 < 8 + 7 = 15
        assert_eq!(x, vec![false, true, true, false]);
    }

    #[test]
    fn local_search_keeps_constraints() {
        let w: Vec<i64> = (0..60).map(|k| (k * 37 % 101) as i64).collect();
        let i = inst(w, 10, 6, 3, 2);
        let x = solve(&i);
        for v in 0..6 {
            assert_eq!((0..10).filter(|&j| x[i.idx(j, v)]).count(), 3);
        }
        for j in 0..10 {
            assert!((0..6).filter(|&v| x[i.idx(j, v)]).count() <= 2);
        }
    }
}
