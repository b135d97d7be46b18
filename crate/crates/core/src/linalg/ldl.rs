//! Sparse LDL^T factorization for symmetric quasi-definite matrices.
//!
//! The factorization is split into a symbolic phase (fill-reducing ordering,
//! elimination tree, column counts) and a numeric phase that can be repeated
//! with new values on the same pattern. No pivoting is performed; every pivot
//! has an expected sign and pivots that come out too small or with the wrong
//! sign are replaced by a signed regularization value.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

/// Minimum degree ordering on the graph of a symmetric pattern.
///
/// `adjacency[i]` lists the neighbours of `i` (diagonal excluded, any order,
/// duplicates allowed). Returns `perm` with `perm[k]` = node eliminated at
/// step `k`. Ties are broken by the smaller node index, so the result is
/// deterministic. Nodes of very high degree are ordered last.
pub fn minimum_degree(adjacency: &[Vec<usize>]) -> Vec<usize> {
    let n = adjacency.len();
    let dense_threshold = (10.0 * (n as f64).sqrt()).max(16.0) as usize;
    let mut adj: Vec<Vec<usize>> = adjacency
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let mut v: Vec<usize> = a.iter().copied().filter(|&j| j != i).collect();
            v.sort_unstable();
            v.dedup();
            v
        })
        .collect();

    let mut dense = vec![false; n];
    for i in 0..n {
        if adj[i].len() > dense_threshold {
            dense[i] = true;
        }
    }
    for i in 0..n {
        if !dense[i] {
            adj[i].retain(|&j| !dense[j]);
        }
    }

    let mut eliminated = vec![false; n];
    let mut heap: BinaryHeap<Reverse<(usize, usize)>> = (0..n)
        .filter(|&i| !dense[i])
        .map(|i| Reverse((adj[i].len(), i)))
        .collect();
    let mut perm = Vec::with_capacity(n);
    let mut merged = Vec::new();

    while let Some(Reverse((deg, v))) = heap.pop() {
        if eliminated[v] || deg != adj[v].len() {
            continue;
        }
        eliminated[v] = true;
        perm.push(v);
        let nbrs = std::mem::take(&mut adj[v]);
        for &u in &nbrs {
            // adj[u] <- (adj[u] ∪ nbrs) \ {u, v}
            merged.clear();
            let (a, b) = (&adj[u], &nbrs);
            let (mut p, mut q) = (0, 0);
            while p < a.len() || q < b.len() {
                let next = match (a.get(p), b.get(q)) {
                    (Some(&x), Some(&y)) if x == y => {
                        p += 1;
                        q += 1;
                        x
                    }
                    (Some(&x), Some(&y)) if x < y => {
                        p += 1;
                        x
                    }
                    (Some(_), Some(&y)) => {
                        q += 1;
                        y
                    }
                    (Some(&x), None) => {
                        p += 1;
                        x
                    }
                    (None, Some(&y)) => {
                        q += 1;
                        y
                    }
                    (None, None) => unreachable!(),
                };
                if next != u && next != v {
                    merged.push(next);
                }
            }
            std::mem::swap(&mut adj[u], &mut merged);
            heap.push(Reverse((adj[u].len(), u)));
        }
    }
    perm.extend((0..n).filter(|&i| dense[i]));
    perm
}

#[derive(Debug, Clone, PartialEq)]
pub enum FactorError {
    /// A pivot was exactly zero and no regularization was requested.
    ZeroPivot(usize),
}

/// Symbolic + numeric LDL^T of a symmetric matrix with a fixed pattern.
#[derive(Debug, Clone)]
pub struct LdlFactor {
    n: usize,
    perm: Vec<usize>,
    iperm: Vec<usize>,
    // Upper triangle of P A P^T in compressed column form.
    ap: Vec<usize>,
    ai: Vec<usize>,
    ax: Vec<f64>,
    parent: Vec<Option<usize>>,
    lp: Vec<usize>,
    lnz: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    d: Vec<f64>,
    signs: Vec<f64>,
    flag: Vec<usize>,
    y: Vec<f64>,
    pattern: Vec<usize>,
    regularized: usize,
}

impl LdlFactor {
    /// Runs the symbolic phase.
    ///
    /// `entries` is the structural pattern (either triangle or both, diagonal
    /// entries must all be present). `signs[i]` is the expected pivot sign of
    /// original index `i`. Returns the factor and, for every entry, the slot
    /// in the value array that receives it (mirrored entries share a slot).
    pub fn symbolic(n: usize, entries: &[(usize, usize)], signs: &[f64]) -> (Self, Vec<usize>) {
        assert_eq!(signs.len(), n);
        let mut adjacency = vec![Vec::new(); n];
        for &(i, j) in entries {
            if i != j {
                adjacency[i].push(j);
                adjacency[j].push(i);
            }
        }
        let perm = minimum_degree(&adjacency);
        let mut iperm = vec![0; n];
        for (k, &p) in perm.iter().enumerate() {
            iperm[p] = k;
        }

        // Upper-triangular permuted coordinates, deduplicated.
        let mut coords: Vec<(usize, usize)> = entries
            .iter()
            .map(|&(i, j)| {
                let (a, b) = (iperm[i], iperm[j]);
                (a.min(b), a.max(b))
            })
            .collect();
        let mut order: Vec<usize> = (0..coords.len()).collect();
        order.sort_by_key(|&e| (coords[e].1, coords[e].0));
        let mut ap = vec![0usize; n + 1];
        let mut ai = Vec::with_capacity(coords.len());
        let mut slot = vec![0usize; coords.len()];
        let mut last: Option<(usize, usize)> = None;
        for &e in &order {
            let (r, c) = coords[e];
            if last != Some((r, c)) {
                ai.push(r);
                ap[c + 1] += 1;
                last = Some((r, c));
            }
            slot[e] = ai.len() - 1;
        }
        for c in 0..n {
            ap[c + 1] += ap[c];
        }
        coords.clear();

        // Elimination tree and column counts (Davis, LDL symbolic).
        let mut parent = vec![None; n];
        let mut lnz = vec![0usize; n];
        let mut flag = vec![usize::MAX; n];
        for k in 0..n {
            flag[k] = k;
            for p in ap[k]..ap[k + 1] {
                let mut i = ai[p];
                while i < k && flag[i] != k {
                    if parent[i].is_none() {
                        parent[i] = Some(k);
                    }
                    lnz[i] += 1;
                    flag[i] = k;
                    i = parent[i].expect("parent set above");
                }
            }
        }
        let mut lp = vec![0usize; n + 1];
        for k in 0..n {
            lp[k + 1] = lp[k] + lnz[k];
        }
        let total = lp[n];
        let permuted_signs = perm.iter().map(|&p| signs[p]).collect();
        let ax = vec![0.0; ai.len()];
        (
            Self {
                n,
                perm,
                iperm,
                ap,
                ai,
                ax,
                parent,
                lp,
                lnz,
                li: vec![0; total],
                lx: vec![0.0; total],
                d: vec![0.0; n],
                signs: permuted_signs,
                flag,
                y: vec![0.0; n],
                pattern: vec![0; n],
                regularized: 0,
            },
            slot,
        )
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz_l(&self) -> usize {
        self.lp[self.n]
    }

    /// Value slots of the permuted upper triangle, indexed by the slot map
    /// returned from [`LdlFactor::symbolic`].
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.ax
    }

    /// Number of pivots replaced by regularization in the last factorization.
    pub fn regularized_pivots(&self) -> usize {
        self.regularized
    }

    /// Numeric factorization. Pivots with `sign * d < threshold` are set to
    /// `sign * reg`.
    pub fn factor(&mut self, threshold: f64, reg: f64) -> Result<(), FactorError> {
        let n = self.n;
        self.regularized = 0;
        for k in 0..n {
            self.y[k] = 0.0;
            let mut top = n;
            self.flag[k] = k;
            self.lnz[k] = 0;
            for p in self.ap[k]..self.ap[k + 1] {
                let mut i = self.ai[p];
                self.y[i] += self.ax[p];
                let mut len = 0;
                while self.flag[i] != k {
                    self.pattern[len] = i;
                    len += 1;
                    self.flag[i] = k;
                    i = self.parent[i].expect("row index below diagonal has a parent");
                }
                while len > 0 {
                    top -= 1;
                    len -= 1;
                    self.pattern[top] = self.pattern[len];
                }
            }
            let mut dk = self.y[k];
            self.y[k] = 0.0;
            while top < n {
                let i = self.pattern[top];
                let yi = self.y[i];
                self.y[i] = 0.0;
                let p2 = self.lp[i] + self.lnz[i];
                for p in self.lp[i]..p2 {
                    self.y[self.li[p]] -= self.lx[p] * yi;
                }
                let l_ki = yi / self.d[i];
                dk -= l_ki * yi;
                self.li[p2] = k;
                self.lx[p2] = l_ki;
                self.lnz[i] += 1;
                top += 1;
            }
            let sign = self.signs[k];
            if sign * dk < threshold {
                if reg <= 0.0 && dk == 0.0 {
                    return Err(FactorError::ZeroPivot(self.perm[k]));
                }
                if reg > 0.0 {
                    dk = sign * reg;
                    self.regularized += 1;
                }
            }
            self.d[k] = dk;
        }
        Ok(())
    }

    /// Solves `A x = b` in place (original ordering).
    pub fn solve(&self, b: &mut [f64]) {
        let n = self.n;
        let mut x: Vec<f64> = (0..n).map(|k| b[self.perm[k]]).collect();
        for j in 0..n {
            let xj = x[j];
            if xj != 0.0 {
                for p in self.lp[j]..self.lp[j] + self.lnz[j] {
                    x[self.li[p]] -= self.lx[p] * xj;
                }
            }
        }
        for j in 0..n {
            x[j] /= self.d[j];
        }
        for j in (0..n).rev() {
            let mut acc = x[j];
            for p in self.lp[j]..self.lp[j] + self.lnz[j] {
                acc -= self.lx[p] * x[self.li[p]];
            }
            x[j] = acc;
        }
        for k in 0..n {
            b[self.perm[k]] = x[k];
        }
    }

    /// Permutation (`perm[k]` = original index at position `k`).
    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn inverse_perm(&self) -> &[usize] {
        &self.iperm
    }
}
