//! Small flow primitives: Dinic max-flow and successive-shortest-path
//! min-cost flow with Dijkstra potentials. Integer capacities and costs.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

#[derive(Debug, Clone)]
struct Edge {
    to: usize,
    cap: i64,
    cost: i64,
}

#[derive(Debug, Clone)]
pub struct FlowNetwork {
    adj: Vec<Vec<usize>>,
    edges: Vec<Edge>,
}

impl FlowNetwork {
    pub fn new(n: usize) -> Self {
        FlowNetwork { adj: vec![Vec::new(); n], edges: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    /// Adds `from → to`; returns the edge id (its reverse is `id ^ 1`).
    pub fn add_edge(&mut self, from: usize, to: usize, cap: i64, cost: i64) -> usize {
        let id = self.edges.len();
        self.adj[from].push(id);
        self.edges.push(Edge { to, cap, cost });
        self.adj[to].push(id + 1);
        self.edges.push(Edge { to: from, cap: 0, cost: -cost });
        id
    }

    /// Flow currently pushed through forward edge `id`.
    pub fn flow(&self, id: usize) -> i64 {
        self.edges[id ^ 1].cap
    }

    fn bfs_levels(&self, s: usize, t: usize, level: &mut [i32]) -> bool {
        level.iter_mut().for_each(|l| *l = -1);
        level[s] = 0;
        let mut q = VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            for &e in &self.adj[u] {
                let Edge { to, cap, .. } = self.edges[e];
                if cap > 0 && level[to] < 0 {
                    level[to] = level[u] + 1;
                    q.push_back(to);
                }
            }
        }
        level[t] >= 0
    }

    fn dfs_push(&mut self, u: usize, t: usize, f: i64, level: &[i32], iter: &mut [usize]) -> i64 {
        if u == t {
            return f;
        }
        while iter[u] < self.adj[u].len() {
            let e = self.adj[u][iter[u]];
            let Edge { to, cap, .. } = self.edges[e];
            if cap > 0 && level[to] == level[u] + 1 {
                let d = self.dfs_push(to, t, f.min(cap), level, iter);
                if d > 0 {
                    self.edges[e].cap -= d;
                    self.edges[e ^ 1].cap += d;
                    return d;
                }
            }
            iter[u] += 1;
        }
        0
    }

    pub fn max_flow(&mut self, s: usize, t: usize) -> i64 {
        let n = self.len();
        let mut level = vec![-1; n];
        let mut total = 0;
        while self.bfs_levels(s, t, &mut level) {
            let mut iter = vec![0; n];
            loop {
                let f = self.dfs_push(s, t, i64::MAX, &level, &mut iter);
                if f == 0 {
                    break;
                }
                total += f;
            }
        }
        total
    }

    /// Vertices reachable from `s` in the residual graph.
    pub fn residual_reachable(&self, s: usize) -> Vec<bool> {
        let mut seen = vec![false; self.len()];
        seen[s] = true;
        let mut q = VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            for &e in &self.adj[u] {
                let Edge { to, cap, .. } = self.edges[e];
                if cap > 0 && !seen[to] {
                    seen[to] = true;
                    q.push_back(to);
                }
            }
        }
        seen
    }

    /// Push up to `limit` units from `s` to `t` at minimum cost. Costs on
    /// forward edges must be non-negative. Returns (flow, cost).
    pub fn min_cost_flow(&mut self, s: usize, t: usize, limit: i64) -> (i64, i64) {
        let n = self.len();
        let mut potential = vec![0i64; n];
        let (mut flow, mut cost) = (0i64, 0i64);
        let mut dist = vec![i64::MAX; n];
        let mut prev_edge = vec![usize::MAX; n];
        while flow < limit {
            dist.iter_mut().for_each(|d| *d = i64::MAX);
            prev_edge.iter_mut().for_each(|p| *p = usize::MAX);
            dist[s] = 0;
            let mut heap = BinaryHeap::from([Reverse((0i64, s))]);
            while let Some(Reverse((d, u))) = heap.pop() {
                if d > dist[u] {
                    continue;
                }
                for &e in &self.adj[u] {
                    let Edge { to, cap, cost: c } = self.edges[e];
                    if cap <= 0 {
                        continue;
                    }
                    let nd = d + c + potential[u] - potential[to];
                    if nd < dist[to] {
                        dist[to] = nd;
                        prev_edge[to] = e;
                        heap.push(Reverse((nd, to)));
                    }
                }
            }
            if dist[t] == i64::MAX {
                break;
            }
            for v in 0..n {
                if dist[v] != i64::MAX {
                    potential[v] += dist[v];
                }
            }
            let mut push = limit - flow;
            let mut v = t;
            while v != s {
                let e = prev_edge[v];
                push = push.min(self.edges[e].cap);
                v = self.edges[e ^ 1].to;
            }
            let mut v = t;
            while v != s {
                let e = prev_edge[v];
                self.edges[e].cap -= push;
                self.edges[e ^ 1].cap += push;
                cost += push * self.edges[e].cost;
                v = self.edges[e ^ 1].to;
            }
            flow += push;
        }
        (flow, cost)
    }
}
