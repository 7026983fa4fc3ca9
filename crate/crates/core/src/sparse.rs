//! Sparse symmetric matrices and the two solvers the workbench needs:
//! a skyline LDL^T factorization (after reverse Cuthill-McKee reordering)
//! for shifted eigensolves, and Jacobi-preconditioned conjugate gradients
//! for the large grid Laplacians in the Hardy estimates.

use crate::{Error, Result};

/// Symmetric sparse matrix in CSR form; both triangles are stored so matvec
/// stays a plain row sweep.
#[derive(Debug, Clone)]
pub struct SymCsr {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SymCsr {
    /// Assemble from (row, col, value) triplets, summing duplicates.
    /// Off-diagonal triplets are mirrored, so callers pass each undirected
    /// coupling once.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> SymCsr {
        let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len() * 2);
        for &(i, j, v) in triplets {
            entries.push((i, j, v));
            if i != j {
                entries.push((j, i, v));
            }
        }
        entries.sort_by_key(|&(i, j, _)| (i, j));

        let mut row_counts = vec![0usize; n];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for &(i, j, v) in &entries {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_counts[i] += 1;
                last = Some((i, j));
            }
        }
        let mut row_ptr = vec![0usize; n + 1];
        for i in 0..n {
            row_ptr[i + 1] = row_ptr[i] + row_counts[i];
        }
        SymCsr {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        for i in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            y[i] = acc;
        }
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.values[self.row_ptr[i]..self.row_ptr[i + 1]].iter().sum())
            .collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                if self.col_idx[k] == i {
                    d[i] = self.values[k];
                }
            }
        }
        d
    }

    /// `A + alpha * diag(d)`; the matrix must carry an explicit diagonal.
    pub fn add_diagonal(&self, d: &[f64], alpha: f64) -> SymCsr {
        let mut out = self.clone();
        for i in 0..self.n {
            let mut found = false;
            for k in out.row_ptr[i]..out.row_ptr[i + 1] {
                if out.col_idx[k] == i {
                    out.values[k] += alpha * d[i];
                    found = true;
                }
            }
            assert!(found, "matrix must carry an explicit diagonal");
        }
        out
    }

    fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]]
            .iter()
            .copied()
            .filter(move |&j| j != i)
    }
}

/// Reverse Cuthill-McKee ordering; returns `perm` with `perm[new] = old`.
pub fn rcm_order(a: &SymCsr) -> Vec<usize> {
    let n = a.n();
    let degree: Vec<usize> = (0..n).map(|i| a.neighbors(i).count()).collect();

    // pseudo-peripheral start: double BFS from a minimum-degree vertex
    let start = (0..n).min_by_key(|&i| (degree[i], i)).unwrap_or(0);
    let far = bfs_farthest(a, start);
    let start = bfs_farthest(a, far);

    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = std::collections::VecDeque::new();

    let mut seed = Some(start);
    while order.len() < n {
        let s = match seed.take() {
            Some(s) if !visited[s] => s,
            _ => (0..n).find(|&i| !visited[i]).unwrap(),
        };
        visited[s] = true;
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nbrs: Vec<usize> = a.neighbors(v).filter(|&w| !visited[w]).collect();
            nbrs.sort_by_key(|&w| (degree[w], w));
            for w in nbrs {
                if !visited[w] {
                    visited[w] = true;
                    queue.push_back(w);
                }
            }
        }
    }
    order.reverse();
    order
}

fn bfs_farthest(a: &SymCsr, start: usize) -> usize {
    let n = a.n();
    let mut dist = vec![usize::MAX; n];
    let mut queue = std::collections::VecDeque::new();
    dist[start] = 0;
    queue.push_back(start);
    let mut last = start;
    while let Some(v) = queue.pop_front() {
        last = v;
        for w in a.neighbors(v) {
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
        }
    }
    last
}

/// Skyline (envelope) LDL^T factorization of a symmetric matrix under a
/// permutation. Suited to the reordered, narrow-envelope matrices meshes
/// produce at desk scale; mildly indefinite matrices factor fine as long as
/// no pivot collapses.
pub struct SkylineLdlt {
    n: usize,
    /// perm[new] = old
    perm: Vec<usize>,
    /// first stored column per row
    first: Vec<usize>,
    /// strictly-lower envelope entries per row (columns first[i]..i)
    rows: Vec<Vec<f64>>,
    diag: Vec<f64>,
}

impl SkylineLdlt {
    pub fn factor(a: &SymCsr, perm: Vec<usize>) -> Result<SkylineLdlt> {
        let n = a.n();
        assert_eq!(perm.len(), n);
        let mut inv_perm = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv_perm[old] = new;
        }

        let mut first: Vec<usize> = (0..n).collect();
        for i_old in 0..n {
            let i = inv_perm[i_old];
            for k in a.row_ptr[i_old]..a.row_ptr[i_old + 1] {
                let j = inv_perm[a.col_idx[k]];
                if j < i {
                    first[i] = first[i].min(j);
                }
            }
        }

        let mut rows: Vec<Vec<f64>> = (0..n).map(|i| vec![0.0; i - first[i]]).collect();
        let mut diag = vec![0.0; n];
        for i_old in 0..n {
            let i = inv_perm[i_old];
            for k in a.row_ptr[i_old]..a.row_ptr[i_old + 1] {
                let j = inv_perm[a.col_idx[k]];
                if j < i {
                    rows[i][j - first[i]] = a.values[k];
                } else if j == i {
                    diag[i] = a.values[k];
                }
            }
        }

        let scale: f64 = diag.iter().map(|d| d.abs()).fold(0.0, f64::max).max(1e-300);
        for i in 0..n {
            let fi = first[i];
            for j in fi..i {
                let fj = first[j];
                let lo = fi.max(fj);
                let mut acc = rows[i][j - fi];
                for k in lo..j {
                    acc -= rows[i][k - fi] * diag[k] * rows[j][k - fj];
                }
                rows[i][j - fi] = acc / diag[j];
            }
            let mut d = diag[i];
            for k in fi..i {
                let l = rows[i][k - fi];
                d -= l * l * diag[k];
            }
            if d.abs() < 1e-14 * scale {
                return Err(Error::Solver {
                    context: format!("LDL^T pivot {i} collapsed; shift too close to an eigenvalue"),
                    residuals: vec![d],
                });
            }
            diag[i] = d;
        }

        Ok(SkylineLdlt {
            n,
            perm,
            first,
            rows,
            diag,
        })
    }

    /// Solve `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y: Vec<f64> = (0..n).map(|i| b[self.perm[i]]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let mut acc = y[i];
            for k in fi..i {
                acc -= self.rows[i][k - fi] * y[k];
            }
            y[i] = acc;
        }
        for i in 0..n {
            y[i] /= self.diag[i];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let yi = y[i];
            for k in fi..i {
                y[k] -= self.rows[i][k - fi] * yi;
            }
        }
        let mut x = vec![0.0; n];
        for i in 0..n {
            x[self.perm[i]] = y[i];
        }
        x
    }
}

/// Jacobi-preconditioned conjugate gradients for SPD systems.
pub fn cg_solve(
    a: &SymCsr,
    b: &[f64],
    x0: Option<&[f64]>,
    rel_tol: f64,
    max_iters: usize,
) -> Result<Vec<f64>> {
    let n = a.n();
    let diag = a.diagonal();
    let minv: Vec<f64> = diag
        .iter()
        .map(|&d| if d.abs() > 1e-300 { 1.0 / d } else { 1.0 })
        .collect();

    let mut x = x0.map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; n]);
    let mut r = vec![0.0; n];
    a.matvec(&x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
    let mut z: Vec<f64> = (0..n).map(|i| minv[i] * r[i]).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];

    for _ in 0..max_iters {
        let rnorm = dot(&r, &r).sqrt();
        if rnorm <= rel_tol * bnorm {
            return Ok(x);
        }
        a.matvec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::Solver {
                context: "CG hit a non-positive curvature direction; matrix not SPD".into(),
                residuals: vec![pap],
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = minv[i] * r[i];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let rnorm = dot(&r, &r).sqrt();
    if rnorm <= rel_tol * bnorm * 10.0 {
        // close enough for an inner solve; callers monitor the outer residual
        return Ok(x);
    }
    Err(Error::Solver {
        context: "CG did not converge".into(),
        residuals: vec![rnorm / bnorm],
    })
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn laplacian_1d(n: usize) -> SymCsr {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        SymCsr::from_triplets(n, &t)
    }

    #[test]
    fn triplets_accumulate_and_mirror() {
        let a = SymCsr::from_triplets(3, &[(0, 1, 1.0), (0, 1, 2.0), (1, 1, 5.0), (2, 2, 1.0)]);
        let mut y = vec![0.0; 3];
        a.matvec(&[1.0, 1.0, 1.0], &mut y);
        assert_eq!(y, vec![3.0, 8.0, 1.0]);
    }

    #[test]
    fn ldlt_solves_poisson() {
        let n = 50;
        let a = laplacian_1d(n);
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let perm = rcm_order(&a);
        let f = SkylineLdlt::factor(&a, perm).unwrap();
        let x = f.solve(&b);
        let mut ax = vec![0.0; n];
        a.matvec(&x, &mut ax);
        for i in 0..n {
            assert_relative_eq!(ax[i], b[i], epsilon = 1e-9);
        }
    }

    #[test]
    fn ldlt_handles_indefinite_shift() {
        // A - sigma I with sigma inside the spectrum is indefinite but factors.
        let n = 30;
        let a = laplacian_1d(n);
        let shifted = a.add_diagonal(&vec![1.5; n], -1.0);
        let f = SkylineLdlt::factor(&shifted, rcm_order(&shifted)).unwrap();
        let b = vec![1.0; n];
        let x = f.solve(&b);
        let mut ax = vec![0.0; n];
        shifted.matvec(&x, &mut ax);
        for i in 0..n {
            assert_relative_eq!(ax[i], b[i], epsilon = 1e-8);
        }
    }

    #[test]
    fn cg_matches_ldlt() {
        let n = 80;
        let a = laplacian_1d(n);
        let b: Vec<f64> = (0..n).map(|i| ((i * 7 % 13) as f64) - 6.0).collect();
        let x1 = cg_solve(&a, &b, None, 1e-12, 10_000).unwrap();
        let f = SkylineLdlt::factor(&a, rcm_order(&a)).unwrap();
        let x2 = f.solve(&b);
        for i in 0..n {
            assert_relative_eq!(x1[i], x2[i], epsilon = 1e-6);
        }
    }

    #[test]
    fn rcm_is_a_permutation() {
        let a = laplacian_1d(17);
        let mut p = rcm_order(&a);
        p.sort_unstable();
        assert_eq!(p, (0..17).collect::<Vec<_>>());
    }
}
