//! Sparse symmetric indefinite factorization `P A Pᵀ = L D Lᵀ` with a
//! minimum-degree fill-reducing ordering and inertia reporting.
//!
//! The ordering and symbolic analysis are computed once for a fixed pattern;
//! numeric factorizations reuse them. There is no numerical pivoting: callers
//! regularize the matrix (the interior-point method does so through its
//! inertia correction) so that every pivot is safely nonzero.

use std::collections::BTreeSet;

/// Pattern of a symmetric matrix given by lower-triangle coordinates
/// `(row, col)` with `row >= col`. Duplicate coordinates are summed.
#[derive(Clone, Debug)]
pub struct SymmetricPattern {
    pub dim: usize,
    pub entries: Vec<(usize, usize)>,
}

/// Minimum-degree ordering of the graph of a symmetric pattern, computed on
/// the explicit elimination graph. Ties are broken by the smaller index so
/// the result is deterministic. Returns `perm` with `perm[k]` the original
/// index eliminated at step `k`.
pub fn minimum_degree(pattern: &SymmetricPattern) -> Vec<usize> {
    let n = pattern.dim;
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for &(r, c) in &pattern.entries {
        if r != c {
            adj[r].insert(c);
            adj[c].insert(r);
        }
    }
    let mut queue: BTreeSet<(usize, usize)> = (0..n).map(|i| (adj[i].len(), i)).collect();
    let mut perm = Vec::with_capacity(n);
    while let Some((_, v)) = queue.pop_first() {
        perm.push(v);
        let nbrs: Vec<usize> = std::mem::take(&mut adj[v]).into_iter().collect();
        for &u in &nbrs {
            queue.remove(&(adj[u].len(), u));
            adj[u].remove(&v);
        }
        // Eliminating v turns its neighbourhood into a clique.
        for (a, &u) in nbrs.iter().enumerate() {
            for &w in &nbrs[a + 1..] {
                adj[u].insert(w);
                adj[w].insert(u);
            }
        }
        for &u in &nbrs {
            queue.insert((adj[u].len(), u));
        }
    }
    perm
}

/// Signs of the pivots of a factorization.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct Inertia {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum FactorError {
    /// A pivot was zero, tiny relative to the matrix, or not finite.
    SingularPivot { step: usize },
}

/// Symbolic analysis plus storage for numeric factors.
#[derive(Clone, Debug)]
pub struct LdlFactor {
    n: usize,
    perm: Vec<usize>,
    pinv: Vec<usize>,
    /// Column pointers/rows of the permuted upper triangle (CSC).
    up_ptr: Vec<usize>,
    up_row: Vec<usize>,
    /// For each input coordinate, its slot in the permuted upper triangle.
    slot_of_entry: Vec<usize>,
    parent: Vec<Option<usize>>,
    l_ptr: Vec<usize>,
    l_row: Vec<usize>,
    l_val: Vec<f64>,
    d: Vec<f64>,
    up_val: Vec<f64>,
    inertia: Inertia,
    factored: bool,
}

/// Relative pivot threshold below which a pivot counts as zero.
const PIVOT_TOL: f64 = 1e-14;

impl LdlFactor {
    pub fn analyze(pattern: &SymmetricPattern) -> Self {
        let perm = minimum_degree(pattern);
        Self::analyze_with_order(pattern, perm)
    }

    pub fn analyze_with_order(pattern: &SymmetricPattern, perm: Vec<usize>) -> Self {
        let n = pattern.dim;
        let mut pinv = vec![0; n];
        for (k, &p) in perm.iter().enumerate() {
            pinv[p] = k;
        }
        // Permuted coordinates in upper form (row <= col), always including the
        // diagonal so every column has a pivot slot.
        let mut coords: Vec<(usize, usize)> = pattern
            .entries
            .iter()
            .map(|&(r, c)| {
                let (a, b) = (pinv[r], pinv[c]);
                (a.max(b), a.min(b))
            })
            .collect();
        coords.extend((0..n).map(|k| (k, k)));
        let mut uniq = coords.clone();
        uniq.sort_unstable();
        uniq.dedup();
        let mut up_ptr = vec![0; n + 1];
        for &(col, _) in &uniq {
            up_ptr[col + 1] += 1;
        }
        for k in 0..n {
            up_ptr[k + 1] += up_ptr[k];
        }
        let up_row: Vec<usize> = uniq.iter().map(|&(_, row)| row).collect();
        let slot_of_entry = coords[..pattern.entries.len()]
            .iter()
            .map(|key| uniq.binary_search(key).expect("coordinate present"))
            .collect();

        // Elimination tree and column counts of L.
        let mut parent = vec![None; n];
        let mut flag = vec![usize::MAX; n];
        let mut lnz = vec![0usize; n];
        for k in 0..n {
            flag[k] = k;
            for &row in &up_row[up_ptr[k]..up_ptr[k + 1]] {
                let mut i = row;
                if i >= k {
                    continue;
                }
                while flag[i] != k {
                    if parent[i].is_none() {
                        parent[i] = Some(k);
                    }
                    lnz[i] += 1;
                    flag[i] = k;
                    i = parent[i].expect("set above");
                }
            }
        }
        let mut l_ptr = vec![0; n + 1];
        for k in 0..n {
            l_ptr[k + 1] = l_ptr[k] + lnz[k];
        }
        let nnz = l_ptr[n];
        Self {
            n,
            perm,
            pinv,
            up_val: vec![0.0; up_row.len()],
            up_ptr,
            up_row,
            slot_of_entry,
            parent,
            l_row: vec![0; nnz],
            l_val: vec![0.0; nnz],
            l_ptr,
            d: vec![0.0; n],
            inertia: Inertia::default(),
            factored: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn factor_nonzeros(&self) -> usize {
        self.l_ptr[self.n]
    }

    pub fn inertia(&self) -> Inertia {
        self.inertia
    }

    /// Numeric factorization for values matching the analyzed pattern's
    /// entries, plus `diag_shift[i]` added to each diagonal entry.
    pub fn factor(&mut self, values: &[f64], diag_shift: &[f64]) -> Result<Inertia, FactorError> {
        let n = self.n;
        self.factored = false;
        self.up_val.iter_mut().for_each(|v| *v = 0.0);
        for (k, &slot) in self.slot_of_entry.iter().enumerate() {
            self.up_val[slot] += values[k];
        }
        for (orig, &shift) in diag_shift.iter().enumerate() {
            let slot = self.diag_slot(self.pinv[orig]);
            self.up_val[slot] += shift;
        }
        // Pivots are judged against the largest entry in their own row.
        let mut scale = vec![0.0f64; n];
        for k in 0..n {
            for p in self.up_ptr[k]..self.up_ptr[k + 1] {
                let v = self.up_val[p].abs();
                scale[k] = scale[k].max(v);
                scale[self.up_row[p]] = scale[self.up_row[p]].max(v);
            }
        }

        let mut y = vec![0.0; n];
        let mut pattern = vec![0usize; n];
        let mut flag = vec![usize::MAX; n];
        let mut lnz = vec![0usize; n];
        let mut inertia = Inertia::default();
        for k in 0..n {
            let mut top = n;
            flag[k] = k;
            for p in self.up_ptr[k]..self.up_ptr[k + 1] {
                let mut i = self.up_row[p];
                y[i] += self.up_val[p];
                let mut len = 0;
                while flag[i] != k {
                    pattern[len] = i;
                    len += 1;
                    flag[i] = k;
                    i = self.parent[i].expect("row below the diagonal has a parent");
                }
                while len > 0 {
                    top -= 1;
                    len -= 1;
                    pattern[top] = pattern[len];
                }
            }
            let mut dk = y[k];
            y[k] = 0.0;
            for &i in &pattern[top..n] {
                let yi = y[i];
                y[i] = 0.0;
                let start = self.l_ptr[i];
                let end = start + lnz[i];
                for p in start..end {
                    y[self.l_row[p]] -= self.l_val[p] * yi;
                }
                let lki = yi / self.d[i];
                dk -= lki * yi;
                self.l_row[end] = k;
                self.l_val[end] = lki;
                lnz[i] += 1;
            }
            if !dk.is_finite() || dk.abs() <= PIVOT_TOL * scale[k].max(1e-300) {
                inertia.zero += 1;
                self.inertia = inertia;
                return Err(FactorError::SingularPivot { step: k });
            }
            if dk > 0.0 {
                inertia.positive += 1;
            } else {
                inertia.negative += 1;
            }
            self.d[k] = dk;
        }
        self.inertia = inertia;
        self.factored = true;
        Ok(inertia)
    }

    fn diag_slot(&self, k: usize) -> usize {
        // Diagonal is the last (largest row) entry of column k in upper form.
        self.up_ptr[k + 1] - 1
    }

    /// Solves `A x = b` in place using the last successful factorization.
    pub fn solve(&self, b: &mut [f64]) {
        assert!(self.factored, "solve called without a valid factorization");
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for j in 0..n {
            let xj = x[j];
            for p in self.l_ptr[j]..self.l_ptr[j + 1] {
                x[self.l_row[p]] -= self.l_val[p] * xj;
            }
        }
        for j in 0..n {
            x[j] /= self.d[j];
        }
        for j in (0..n).rev() {
            let mut xj = x[j];
            for p in self.l_ptr[j]..self.l_ptr[j + 1] {
                xj -= self.l_val[p] * x[self.l_row[p]];
            }
            x[j] = xj;
        }
        for (k, &p) in self.perm.iter().enumerate() {
            b[p] = x[k];
        }
    }
}

/// `y = A x` for a symmetric matrix stored as lower-triangle coordinates.
pub fn symmetric_matvec(pattern: &SymmetricPattern, values: &[f64], x: &[f64], y: &mut [f64]) {
    y.iter_mut().for_each(|v| *v = 0.0);
    for (k, &(r, c)) in pattern.entries.iter().enumerate() {
        y[r] += values[k] * x[c];
        if r != c {
            y[c] += values[k] * x[r];
        }
    }
}
