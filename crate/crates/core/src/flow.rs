//! Exact network-flow kernels: dense min-cost transportation and Dinic max-flow.

use crate::int::Int;
use crate::rational::{lcm_denoms, scale_to_int, Q};
use num_bigint::BigInt;
use num_traits::ToPrimitive;
use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

/// Optimal solution of a balanced transportation problem.
#[derive(Clone, Debug)]
pub struct Transport<T> {
    /// Positive flows `(i, j, amount)` in row-major order.
    pub flow: Vec<(usize, usize, T)>,
    /// Row duals and column duals with `u_i + v_j <= c_ij`, tight on the support.
    pub u: Vec<T>,
    pub v: Vec<T>,
    pub cost: T,
}

/// Successive shortest paths with potentials on the complete bipartite graph.
/// `cost` is row-major `n × m` and must be nonnegative; supplies and demands
/// must have equal sums.
pub fn min_cost_transport<T: Int>(supply: &[T], demand: &[T], cost: &[T]) -> Transport<T> {
    let (n, m) = (supply.len(), demand.len());
    assert_eq!(cost.len(), n * m);
    let zero = T::zero();
    let mut excess = supply.to_vec();
    let mut deficit = demand.to_vec();
    let mut flow = vec![zero.clone(); n * m];
    let mut pot = vec![zero.clone(); n + m];
    let nodes = n + m;
    loop {
        if excess.iter().all(|e| e.is_zero()) {
            break;
        }
        let mut dist: Vec<Option<T>> = vec![None; nodes];
        let mut parent = vec![usize::MAX; nodes];
        let mut done = vec![false; nodes];
        for i in 0..n {
            if excess[i].is_positive() {
                dist[i] = Some(zero.clone());
            }
        }
        let mut heap: BinaryHeap<Reverse<(T, usize)>> =
            (0..n).filter(|&i| excess[i].is_positive()).map(|i| Reverse((zero.clone(), i))).collect();
        let mut target = None;
        while let Some(Reverse((dk, k))) = heap.pop() {
            if done[k] || dist[k].as_ref() != Some(&dk) {
                continue;
            }
            done[k] = true;
            if k >= n {
                let j = k - n;
                if deficit[j].is_positive() {
                    target = Some((k, dk));
                    break;
                }
                for i in 0..n {
                    if done[i] || !flow[i * m + j].is_positive() {
                        continue;
                    }
                    let nd = dk.clone() - cost[i * m + j].clone() + pot[k].clone() - pot[i].clone();
                    if dist[i].as_ref().is_none_or(|d| &nd < d) {
                        dist[i] = Some(nd.clone());
                        parent[i] = k;
                        heap.push(Reverse((nd, i)));
                    }
                }
            } else {
                let i = k;
                for j in 0..m {
                    let w = n + j;
                    if done[w] {
                        continue;
                    }
                    let nd = dk.clone() + cost[i * m + j].clone() + pot[i].clone() - pot[w].clone();
                    if dist[w].as_ref().is_none_or(|d| &nd < d) {
                        dist[w] = Some(nd.clone());
                        parent[w] = i;
                        heap.push(Reverse((nd, w)));
                    }
                }
            }
        }
        let (t, dt) = target.expect("balanced transportation problem must stay feasible");
        for k in 0..nodes {
            let add = match &dist[k] {
                Some(d) if done[k] => d.clone().min(dt.clone()),
                _ => dt.clone(),
            };
            pot[k] = pot[k].clone() + add;
        }
        // bottleneck along the path
        let mut amount = deficit[t - n].clone();
        let mut k = t;
        while parent[k] != usize::MAX {
            let p = parent[k];
            if k < n {
                // backward edge column p -> row k
                amount = amount.min(flow[k * m + (p - n)].clone());
            }
            k = p;
        }
        amount = amount.min(excess[k].clone());
        let src = k;
        let mut k = t;
        while parent[k] != usize::MAX {
            let p = parent[k];
            if k >= n {
                let idx = p * m + (k - n);
                flow[idx] = flow[idx].clone() + amount.clone();
            } else {
                let idx = k * m + (p - n);
                flow[idx] = flow[idx].clone() - amount.clone();
            }
            k = p;
        }
        excess[src] = excess[src].clone() - amount.clone();
        deficit[t - n] = deficit[t - n].clone() - amount;
    }
    let mut out = Vec::new();
    let mut total = zero.clone();
    for i in 0..n {
        for j in 0..m {
            let f = &flow[i * m + j];
            if f.is_positive() {
                total = total + f.clone() * cost[i * m + j].clone();
                out.push((i, j, f.clone()));
            }
        }
    }
    let u = (0..n).map(|i| -pot[i].clone()).collect();
    let v = (0..m).map(|j| pot[n + j].clone()).collect();
    Transport { flow: out, u, v, cost: total }
}

/// Dinic max-flow on a general directed graph.
#[derive(Clone, Debug)]
pub struct MaxFlow<T> {
    adj: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<T>,
}

impl<T: Int> MaxFlow<T> {
    pub fn new(n: usize) -> Self {
        MaxFlow { adj: vec![Vec::new(); n], to: Vec::new(), cap: Vec::new() }
    }

    pub fn add_edge(&mut self, u: usize, v: usize, c: T) -> usize {
        let id = self.to.len();
        self.adj[u].push(id);
        self.to.push(v);
        self.cap.push(c);
        self.adj[v].push(id + 1);
        self.to.push(u);
        self.cap.push(T::zero());
        id
    }

    /// Flow currently carried by edge `id`.
    pub fn flow_on(&self, id: usize) -> T {
        self.cap[id ^ 1].clone()
    }

    fn bfs(&self, s: usize, level: &mut [i64]) {
        level.iter_mut().for_each(|l| *l = -1);
        level[s] = 0;
        let mut q = VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            for &e in &self.adj[u] {
                let v = self.to[e];
                if level[v] < 0 && self.cap[e].is_positive() {
                    level[v] = level[u] + 1;
                    q.push_back(v);
                }
            }
        }
    }

    fn dfs(&mut self, u: usize, t: usize, f: T, level: &[i64], it: &mut [usize]) -> T {
        if u == t {
            return f;
        }
        while it[u] < self.adj[u].len() {
            let e = self.adj[u][it[u]];
            let v = self.to[e];
            if self.cap[e].is_positive() && level[v] == level[u] + 1 {
                let pushed = self.dfs(v, t, f.clone().min(self.cap[e].clone()), level, it);
                if pushed.is_positive() {
                    self.cap[e] = self.cap[e].clone() - pushed.clone();
                    self.cap[e ^ 1] = self.cap[e ^ 1].clone() + pushed.clone();
                    return pushed;
                }
            }
            it[u] += 1;
        }
        T::zero()
    }

    /// Maximum flow value; `limit` must exceed any achievable flow.
    pub fn run(&mut self, s: usize, t: usize, limit: T) -> T {
        let n = self.adj.len();
        let mut total = T::zero();
        let mut level = vec![-1i64; n];
        loop {
            self.bfs(s, &mut level);
            if level[t] < 0 {
                return total;
            }
            let mut it = vec![0usize; n];
            loop {
                let f = self.dfs(s, t, limit.clone(), &level, &mut it);
                if !f.is_positive() {
                    break;
                }
                total = total + f;
            }
        }
    }

    /// Nodes reachable from `s` in the residual graph.
    pub fn reachable_from(&self, s: usize) -> Vec<bool> {
        let mut seen = vec![false; self.adj.len()];
        seen[s] = true;
        let mut q = VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            for &e in &self.adj[u] {
                let v = self.to[e];
                if !seen[v] && self.cap[e].is_positive() {
                    seen[v] = true;
                    q.push_back(v);
                }
            }
        }
        seen
    }

    /// Nodes that can still reach `t` in the residual graph.
    pub fn reaching(&self, t: usize) -> Vec<bool> {
        let mut seen = vec![false; self.adj.len()];
        seen[t] = true;
        let mut q = VecDeque::from([t]);
        while let Some(v) = q.pop_front() {
            // residual edge u -> v exists when the twin of an edge out of v has capacity
            for &e in &self.adj[v] {
                let u = self.to[e];
                if !seen[u] && self.cap[e ^ 1].is_positive() {
                    seen[u] = true;
                    q.push_back(u);
                }
            }
        }
        seen
    }
}

/// Outcome of a mass-weighted Hall check. On success `lhs` is the total left
/// mass and `rhs` the flow routed; on failure both refer to the witness set.
#[derive(Clone, Debug, PartialEq)]
pub struct HallCheck {
    pub ok: bool,
    pub lhs: Q,
    pub rhs: Q,
    pub witness: Option<Vec<usize>>,
}

/// Checks `a(A) ≤ b(N(A))` for every subset `A` of the left atoms by one
/// max-flow; on failure the witness is the largest violating set.
pub fn hall_flow(a: &[Q], b: &[Q], adj: &[Vec<usize>]) -> HallCheck {
    let d = lcm_denoms(a.iter().chain(b));
    let ai: Vec<BigInt> = a.iter().map(|x| scale_to_int(x, &d)).collect();
    let bi: Vec<BigInt> = b.iter().map(|x| scale_to_int(x, &d)).collect();
    let total: BigInt = ai.iter().sum::<BigInt>() + bi.iter().sum::<BigInt>() + 1;
    let dq = Q::from_integer(d);
    if total.bits() < 120 {
        let c = |x: &BigInt| x.to_i128().unwrap();
        let (ok, flow, w) = flow_check::<i128>(&ai.iter().map(c).collect::<Vec<_>>(), &bi.iter().map(c).collect::<Vec<_>>(), adj, c(&total));
        finish(ok, Q::from_integer(flow.into()) / &dq, w, a, b, adj)
    } else {
        let (ok, flow, w) = flow_check::<BigInt>(&ai, &bi, adj, total);
        finish(ok, Q::from_integer(flow) / &dq, w, a, b, adj)
    }
}

fn finish(ok: bool, flow: Q, w: Vec<usize>, a: &[Q], b: &[Q], adj: &[Vec<usize>]) -> HallCheck {
    if ok {
        HallCheck { ok: true, lhs: a.iter().sum(), rhs: flow, witness: None }
    } else {
        let mut nb: Vec<usize> = w.iter().flat_map(|&i| adj[i].iter().copied()).collect();
        nb.sort_unstable();
        nb.dedup();
        let lhs: Q = w.iter().map(|&i| &a[i]).sum();
        let rhs: Q = nb.iter().map(|&j| &b[j]).sum();
        HallCheck { ok: false, lhs, rhs, witness: Some(w) }
    }
}

fn flow_check<T: Int>(a: &[T], b: &[T], adj: &[Vec<usize>], inf: T) -> (bool, T, Vec<usize>) {
    let (n, m) = (a.len(), b.len());
    let (s, t) = (n + m, n + m + 1);
    let mut g = MaxFlow::new(n + m + 2);
    for (i, ai) in a.iter().enumerate() {
        g.add_edge(s, i, ai.clone());
        for &j in &adj[i] {
            g.add_edge(i, n + j, inf.clone());
        }
    }
    for (j, bj) in b.iter().enumerate() {
        g.add_edge(n + j, t, bj.clone());
    }
    let f = g.run(s, t, inf);
    let need = a.iter().fold(T::zero(), |x, y| x + y.clone());
    if f == need {
        return (true, f, Vec::new());
    }
    let reach = g.reaching(t);
    (false, f, (0..n).filter(|&i| !reach[i]).collect())
}
