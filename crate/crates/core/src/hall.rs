//! Permutations inside Hall-feasible supports and plans concentrated on a
//! prescribed support.

use crate::error::HallError;
use crate::flow::hall_flow;
use crate::measures::WeightedPointCloud;
use crate::rational::{fmt_q, lcm_denoms, scale_to_int, Q};
use crate::transport::TransportPlan;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, VecDeque};

/// Bipartite 0/1 support between sources and targets.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportGraph {
    #[serde(rename = "n")]
    pub n_sources: usize,
    #[serde(rename = "m")]
    pub n_targets: usize,
    pub edges: BTreeSet<(usize, usize)>,
}

impl SupportGraph {
    pub fn new(n_sources: usize, n_targets: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self, HallError> {
        let edges: BTreeSet<_> = edges.into_iter().collect();
        if let Some((i, j)) = edges.iter().find(|(i, j)| *i >= n_sources || *j >= n_targets) {
            return Err(HallError::Invalid(format!("edge ({i},{j}) out of range")));
        }
        Ok(SupportGraph { n_sources, n_targets, edges })
    }

    pub fn complete(n: usize, m: usize) -> Self {
        SupportGraph { n_sources: n, n_targets: m, edges: (0..n).flat_map(|i| (0..m).map(move |j| (i, j))).collect() }
    }

    /// Row-major 0/1 matrix.
    pub fn from_matrix(rows: &[Vec<u8>]) -> Result<Self, HallError> {
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(HallError::Invalid("ragged matrix".into()));
        }
        let edges = rows.iter().enumerate().flat_map(|(i, r)| r.iter().enumerate().filter(|(_, &v)| v != 0).map(move |(j, _)| (i, j)));
        SupportGraph::new(rows.len(), m, edges)
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&(i, j))
    }

    /// Sorted neighbour lists of the sources.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_sources];
        for &(i, j) in &self.edges {
            adj[i].push(j);
        }
        adj
    }

    pub fn transpose(&self) -> SupportGraph {
        SupportGraph { n_sources: self.n_targets, n_targets: self.n_sources, edges: self.edges.iter().map(|&(i, j)| (j, i)).collect() }
    }
}

fn unit_check(g: &SupportGraph) -> Option<Vec<usize>> {
    let a = vec![Q::one(); g.n_sources];
    let b = vec![Q::one(); g.n_targets];
    hall_flow(&a, &b, &g.adjacency()).witness
}

/// Both Hall conditions of a square support, by two max-flow checks.
pub fn check_hall(a: &SupportGraph) -> Result<bool, HallError> {
    if a.n_sources != a.n_targets {
        return Err(HallError::NotSquare(a.n_sources, a.n_targets));
    }
    Ok(unit_check(a).is_none() && unit_check(&a.transpose()).is_none())
}

/// Permutation `σ` with `(i, σ(i))` in the support, following the splitting
/// induction: a tight row set splits the problem in two, otherwise the
/// smallest edge is fixed and the rest recurses.
pub fn find_permutation(a: &SupportGraph) -> Result<Vec<usize>, HallError> {
    let n = a.n_sources;
    if n != a.n_targets {
        return Err(HallError::NotSquare(n, a.n_targets));
    }
    if let Some(w) = unit_check(a) {
        return Err(HallError::HallViolation { witness: w });
    }
    let adj = a.adjacency();
    let mut mate = perfect_matching(&adj, n).expect("Hall condition implies a perfect matching");
    let mut mate_inv = vec![0; n];
    for (i, &j) in mate.iter().enumerate() {
        mate_inv[j] = i;
    }
    let mut radj = vec![Vec::new(); n];
    for (r, cs) in adj.iter().enumerate() {
        cs.iter().for_each(|&c| radj[c].push(r));
    }
    let mut w = Work { adj: &adj, radj: &radj, row_in: vec![false; n], col_in: vec![false; n], mark: vec![0; n], stamp: 0 };
    let mut sigma = vec![usize::MAX; n];
    let mut stack = vec![((0..n).collect::<Vec<_>>(), (0..n).collect::<Vec<_>>(), 0usize)];
    while let Some((rows, cols, depth)) = stack.pop() {
        assert!(depth <= n, "recursion deeper than the matrix size");
        if rows.is_empty() {
            continue;
        }
        rows.iter().for_each(|&r| w.row_in[r] = true);
        cols.iter().for_each(|&c| w.col_in[c] = true);
        if let Some(t) = w.tight_set(&rows, &mate, &mate_inv) {
            let t_cols: BTreeSet<usize> = t.iter().map(|&r| mate[r]).collect();
            let rest_rows: Vec<usize> = rows.iter().copied().filter(|r| t.binary_search(r).is_err()).collect();
            let rest_cols: Vec<usize> = cols.iter().copied().filter(|c| !t_cols.contains(c)).collect();
            w.clear(&rows, &cols);
            stack.push((rest_rows, rest_cols, depth + 1));
            stack.push((t, t_cols.into_iter().collect(), depth + 1));
            continue;
        }
        let r = rows[0];
        let c = *adj[r].iter().find(|&&c| w.col_in[c]).expect("row without admissible column");
        sigma[r] = c;
        let rest_rows: Vec<usize> = rows[1..].to_vec();
        let rest_cols: Vec<usize> = cols.iter().copied().filter(|&x| x != c).collect();
        if mate[r] != c {
            // re-pair the partners freed by fixing (r, c)
            let (r2, c2) = (mate_inv[c], mate[r]);
            w.col_in[c] = false;
            let ok = w.augment(r2, c2, &mut mate, &mut mate_inv);
            assert!(ok, "strict Hall surplus guarantees an augmenting path");
        }
        w.clear(&rows, &cols);
        stack.push((rest_rows, rest_cols, depth + 1));
    }
    Ok(sigma)
}

/// Kuhn's augmenting-path matching; `None` if not perfect.
fn perfect_matching(adj: &[Vec<usize>], n: usize) -> Option<Vec<usize>> {
    let mut owner = vec![usize::MAX; n];
    let mut seen = vec![0usize; n];
    for r in 0..adj.len() {
        if !kuhn(r, r + 1, adj, &mut owner, &mut seen) {
            return None;
        }
    }
    let mut mate = vec![0; adj.len()];
    for (c, &r) in owner.iter().enumerate() {
        mate[r] = c;
    }
    Some(mate)
}

fn kuhn(r: usize, stamp: usize, adj: &[Vec<usize>], owner: &mut [usize], seen: &mut [usize]) -> bool {
    // free columns first keeps the search shallow on dense supports
    if let Some(&c) = adj[r].iter().find(|&&c| owner[c] == usize::MAX) {
        seen[c] = stamp;
        owner[c] = r;
        return true;
    }
    for &c in &adj[r] {
        if seen[c] != stamp {
            seen[c] = stamp;
            if kuhn(owner[c], stamp, adj, owner, seen) {
                owner[c] = r;
                return true;
            }
        }
    }
    false
}

/// Scratch state of the splitting induction on the current subproblem.
struct Work<'a> {
    adj: &'a [Vec<usize>],
    radj: &'a [Vec<usize>],
    row_in: Vec<bool>,
    col_in: Vec<bool>,
    mark: Vec<u32>,
    stamp: u32,
}

impl Work<'_> {
    fn clear(&mut self, rows: &[usize], cols: &[usize]) {
        rows.iter().for_each(|&r| self.row_in[r] = false);
        cols.iter().for_each(|&c| self.col_in[c] = false);
    }

    fn fresh(&mut self) -> u32 {
        self.stamp += 1;
        self.stamp
    }

    /// Rows reachable from `r0` by an edge followed by a matched edge back, sorted.
    fn closure(&mut self, r0: usize, mate_inv: &[usize]) -> Vec<usize> {
        let s = self.fresh();
        self.mark[r0] = s;
        let mut out = vec![r0];
        let mut k = 0;
        while k < out.len() {
            let r = out[k];
            k += 1;
            for &c in &self.adj[r] {
                let nr = mate_inv[c];
                if self.col_in[c] && self.mark[nr] != s {
                    self.mark[nr] = s;
                    out.push(nr);
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// A proper row subset matched onto its whole neighbourhood, if any:
    /// the closure of the first row, or else the closure of the first row
    /// that cannot reach it.
    fn tight_set(&mut self, rows: &[usize], mate: &[usize], mate_inv: &[usize]) -> Option<Vec<usize>> {
        if rows.len() < 2 {
            return None;
        }
        let forward = self.closure(rows[0], mate_inv);
        if forward.len() < rows.len() {
            return Some(forward);
        }
        let s = self.fresh();
        self.mark[rows[0]] = s;
        let mut back = vec![rows[0]];
        let mut k = 0;
        while k < back.len() {
            let c = mate[back[k]];
            k += 1;
            for &p in &self.radj[c] {
                if self.row_in[p] && self.mark[p] != s {
                    self.mark[p] = s;
                    back.push(p);
                }
            }
        }
        if back.len() == rows.len() {
            return None;
        }
        let p = *rows.iter().find(|&&r| self.mark[r] != s).unwrap();
        Some(self.closure(p, mate_inv))
    }

    /// Alternating BFS from the unmatched row `r0` to the free column `c_free`.
    fn augment(&mut self, r0: usize, c_free: usize, mate: &mut [usize], mate_inv: &mut [usize]) -> bool {
        let s = self.fresh();
        let mut from_row: BTreeMap<usize, usize> = BTreeMap::new();
        let mut q = VecDeque::from([r0]);
        self.mark[r0] = s;
        while let Some(r) = q.pop_front() {
            for &c in &self.adj[r] {
                if !self.col_in[c] || from_row.contains_key(&c) {
                    continue;
                }
                from_row.insert(c, r);
                if c == c_free {
                    let mut c = c;
                    loop {
                        let r = from_row[&c];
                        let prev = mate[r];
                        mate[r] = c;
                        mate_inv[c] = r;
                        if r == r0 {
                            return true;
                        }
                        c = prev;
                    }
                }
                let nr = mate_inv[c];
                if self.mark[nr] != s {
                    self.mark[nr] = s;
                    q.push_back(nr);
                }
            }
        }
        false
    }
}

/// Largest number of unit atoms the exact expansion may create.
pub const MAX_UNITS: usize = 1024;

/// Plan with exact marginals supported on `gamma`, via the common-denominator
/// expansion into unit atoms and a permutation of the expanded support.
pub fn construct_plan(mu: &WeightedPointCloud, nu: &WeightedPointCloud, gamma: &SupportGraph) -> Result<TransportPlan, HallError> {
    if gamma.n_sources != mu.len() || gamma.n_targets != nu.len() {
        return Err(HallError::Invalid("support size does not match the measures".into()));
    }
    let (tm, tn) = (mu.total_mass(), nu.total_mass());
    if tm != tn {
        return Err(HallError::MassMismatch(fmt_q(&tm), fmt_q(&tn)));
    }
    let a: Vec<Q> = mu.atoms().iter().map(|(_, m)| m.clone()).collect();
    let b: Vec<Q> = nu.atoms().iter().map(|(_, m)| m.clone()).collect();
    let adj = gamma.adjacency();
    if let Some(w) = hall_flow(&a, &b, &adj).witness {
        return Err(HallError::HallViolation { witness: w });
    }
    let d = lcm_denoms(a.iter().chain(&b));
    let units = scale_to_int(&tm, &d).to_usize().filter(|&u| u <= MAX_UNITS);
    let Some(units) = units else {
        return Err(HallError::TooLarge(scale_to_int(&tm, &d).to_usize().unwrap_or(usize::MAX)));
    };
    let owners = |ms: &[Q]| -> Vec<usize> {
        ms.iter().enumerate().flat_map(|(i, m)| std::iter::repeat_n(i, scale_to_int(m, &d).to_usize().unwrap())).collect()
    };
    let (row_of, col_of) = (owners(&a), owners(&b));
    let mut first_col = vec![0; nu.len() + 1];
    for &j in &col_of {
        first_col[j + 1] += 1;
    }
    for j in 0..nu.len() {
        first_col[j + 1] += first_col[j];
    }
    let edges = (0..units).flat_map(|u| {
        let i = row_of[u];
        adj[i].iter().flat_map(|&j| first_col[j]..first_col[j + 1]).map(move |v| (u, v)).collect::<Vec<_>>()
    });
    let expanded = SupportGraph::new(units, units, edges)?;
    let sigma = find_permutation(&expanded)?;
    let unit = Q::new(1.into(), d);
    let mut acc: BTreeMap<(usize, usize), Q> = BTreeMap::new();
    for (u, &v) in sigma.iter().enumerate() {
        *acc.entry((row_of[u], col_of[v])).or_insert_with(Q::zero) += &unit;
    }
    Ok(TransportPlan {
        entries: acc.into_iter().map(|((i, j), m)| (i, j, m)).collect(),
        source: mu.clone(),
        target: nu.clone(),
    })
}
