//! Dinic max-flow on real capacities.

use std::collections::VecDeque;

#[derive(Debug, Clone)]
struct Arc {
    to: usize,
    cap: f64,
    rev: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct FlowNetwork {
    adj: Vec<Vec<Arc>>,
    eps: f64,
}

impl FlowNetwork {
    pub fn new(n: usize, eps: f64) -> Self {
        FlowNetwork { adj: vec![Vec::new(); n], eps }
    }

    /// Adds an arc and returns its handle `(node, index)`.
    pub fn add_arc(&mut self, from: usize, to: usize, cap: f64) -> (usize, usize) {
        let rf = self.adj[to].len() + usize::from(from == to);
        let rt = self.adj[from].len();
        self.adj[from].push(Arc { to, cap, rev: rf });
        self.adj[to].push(Arc { to: from, cap: 0.0, rev: rt });
        (from, rt)
    }

    /// Flow currently on the arc with the given handle.
    pub fn flow(&self, handle: (usize, usize)) -> f64 {
        let a = &self.adj[handle.0][handle.1];
        self.adj[a.to][a.rev].cap
    }

    fn levels(&self, s: usize) -> Vec<i64> {
        let mut level = vec![-1; self.adj.len()];
        level[s] = 0;
        let mut q = VecDeque::from([s]);
        while let Some(v) = q.pop_front() {
            for a in &self.adj[v] {
                if a.cap > self.eps && level[a.to] < 0 {
                    level[a.to] = level[v] + 1;
                    q.push_back(a.to);
                }
            }
        }
        level
    }

    fn augment(&mut self, v: usize, t: usize, pushed: f64, level: &[i64], it: &mut [usize]) -> f64 {
        if v == t {
            return pushed;
        }
        while it[v] < self.adj[v].len() {
            let i = it[v];
            let (to, cap) = (self.adj[v][i].to, self.adj[v][i].cap);
            if cap > self.eps && level[to] == level[v] + 1 {
                let d = self.augment(to, t, pushed.min(cap), level, it);
                if d > 0.0 {
                    self.adj[v][i].cap -= d;
                    let r = self.adj[v][i].rev;
                    self.adj[to][r].cap += d;
                    return d;
                }
            }
            it[v] += 1;
        }
        0.0
    }

    pub fn max_flow(&mut self, s: usize, t: usize) -> f64 {
        let mut total = 0.0;
        loop {
            let level = self.levels(s);
            if level[t] < 0 {
                return total;
            }
            let mut it = vec![0; self.adj.len()];
            loop {
                let f = self.augment(s, t, f64::INFINITY, &level, &mut it);
                if f <= 0.0 {
                    break;
                }
                total += f;
            }
        }
    }

    /// Nodes reachable from `s` in the residual network.
    pub fn source_side(&self, s: usize) -> Vec<bool> {
        self.levels(s).into_iter().map(|l| l >= 0).collect()
    }
}
