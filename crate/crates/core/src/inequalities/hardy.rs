//! Weighted Hardy constants on uniform grids.
//!
//! The constant of `int w f^2 <= c int |grad f|^2` over f supported off the
//! zero set of P is estimated as 1/sigma_min of the generalized pencil
//! (graph Dirichlet energy, weight mass): free box walls, Dirichlet nodes
//! inside the value-tube |P| < 2h. Estimates increase under refinement and
//! stay below the continuum constant; refinement monotonicity is the
//! convergence witness.

use super::poly::Polynomial;
use crate::sparse::{cg_solve, SymCsr};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HardyInequality {
    /// weight |P|^{-2/m}
    Gh1,
    /// weight |grad P / P|^2
    Gh2,
    /// weight |Delta P / P|
    Gh3,
    /// 2-D log variant: weight 1 / (P^{2/m} |log(|P|/delta)|)
    Log2d,
}

impl HardyInequality {
    pub fn id(&self) -> &'static str {
        match self {
            HardyInequality::Gh1 => "gh1",
            HardyInequality::Gh2 => "gh2",
            HardyInequality::Gh3 => "gh3",
            HardyInequality::Log2d => "log2d",
        }
    }
}

#[derive(Debug, Clone)]
pub struct HardyEstimate {
    pub inequality: HardyInequality,
    pub constant: f64,
    pub sigma_min: f64,
    pub resolution: usize,
    pub kept_nodes: usize,
    pub degree: u32,
    /// Log-variant scale; `None` for gh1..gh3.
    pub delta: Option<f64>,
}

/// Uniform grid on `[-box_half, box_half]^n` with `resolution` cells per
/// axis; nodes include the (free) walls.
struct Grid {
    n: usize,
    res: usize,
    h: f64,
    box_half: f64,
}

impl Grid {
    fn nodes_per_axis(&self) -> usize {
        self.res + 1
    }

    fn total_nodes(&self) -> usize {
        self.nodes_per_axis().pow(self.n as u32)
    }

    fn coords(&self, idx: usize) -> Vec<f64> {
        let m = self.nodes_per_axis();
        let mut rem = idx;
        let mut x = Vec::with_capacity(self.n);
        for _ in 0..self.n {
            let i = rem % m;
            rem /= m;
            x.push(-self.box_half + i as f64 * self.h);
        }
        x
    }

    fn neighbor(&self, idx: usize, axis: usize, up: bool) -> Option<usize> {
        let m = self.nodes_per_axis();
        let stride = m.pow(axis as u32);
        let i = (idx / stride) % m;
        if up {
            (i + 1 < m).then(|| idx + stride)
        } else {
            (i > 0).then(|| idx - stride)
        }
    }
}

fn weight_for(
    inequality: HardyInequality,
    poly: &Polynomial,
    x: &[f64],
    delta: Option<f64>,
) -> f64 {
    let p = poly.eval(x);
    let m = poly.degree() as f64;
    match inequality {
        HardyInequality::Gh1 => p.abs().powf(-2.0 / m),
        HardyInequality::Gh2 => {
            let g = poly.grad_norm(x);
            (g / p) * (g / p)
        }
        HardyInequality::Gh3 => (poly.laplacian().eval(x) / p).abs(),
        HardyInequality::Log2d => {
            let delta = delta.expect("log variant needs delta");
            1.0 / (p.abs().powf(2.0 / m) * (p.abs() / delta).ln().abs())
        }
    }
}

/// Estimate the constant of one of the polynomial Hardy inequalities.
pub fn hardy_constant(
    poly: &Polynomial,
    inequality: HardyInequality,
    box_half: f64,
    resolution: usize,
) -> Result<HardyEstimate> {
    if inequality == HardyInequality::Log2d {
        return Err(Error::domain(
            "use hardy2d_log_constant for the logarithmic variant",
        ));
    }
    estimate(poly, inequality, box_half, resolution, None)
}

/// The 2-D logarithmic variant: one estimate per delta; the reported
/// normalized constant is `c(delta) |log delta|`.
pub fn hardy2d_log_constant(
    poly: &Polynomial,
    deltas: &[f64],
    box_half: f64,
    resolution: usize,
) -> Result<Vec<HardyEstimate>> {
    if poly.n_vars() != 2 {
        return Err(Error::domain("the logarithmic variant is two-dimensional"));
    }
    deltas
        .iter()
        .map(|&delta| {
            if !(delta > 0.0 && delta < 1.0) {
                return Err(Error::domain(format!("delta must lie in (0, 1), got {delta}")));
            }
            if delta.ln().abs() < 0.05 {
                return Err(Error::domain(format!(
                    "delta = {delta} too close to 1: |log delta| collapses and c diverges"
                )));
            }
            estimate(poly, HardyInequality::Log2d, box_half, resolution, Some(delta))
        })
        .collect()
}

fn estimate(
    poly: &Polynomial,
    inequality: HardyInequality,
    box_half: f64,
    resolution: usize,
    delta: Option<f64>,
) -> Result<HardyEstimate> {
    if !poly.is_homogeneous() || poly.degree() == 0 {
        return Err(Error::domain(
            "Hardy weights need a homogeneous polynomial of degree >= 1",
        ));
    }
    if resolution < 4 {
        return Err(Error::domain("grid resolution must be at least 4"));
    }
    let n = poly.n_vars();
    let grid = Grid {
        n,
        res: resolution,
        h: 2.0 * box_half / resolution as f64,
        box_half,
    };
    let tube_eps = 2.0 * grid.h;
    let total = grid.total_nodes();

    // keep nodes outside the value-tube (and off the log degeneracy)
    let mut keep = Vec::with_capacity(total);
    let mut weights = Vec::new();
    let mut index = vec![usize::MAX; total];
    for idx in 0..total {
        let x = grid.coords(idx);
        let p = poly.eval(&x);
        if p.abs() < tube_eps {
            continue;
        }
        if let Some(d) = delta {
            if (p.abs() / d).ln().abs() < 0.5 {
                continue;
            }
        }
        let w = weight_for(inequality, poly, &x, delta);
        if !w.is_finite() {
            continue;
        }
        index[idx] = keep.len();
        keep.push(idx);
        weights.push(w);
    }
    if keep.is_empty() {
        return Err(Error::domain("the tube swallowed the whole grid"));
    }
    if keep.len() == total {
        return Err(Error::domain(
            "no tube inside the box: constants are unbounded without a Dirichlet set",
        ));
    }
    let w_total: f64 = weights.iter().sum();
    if w_total <= 0.0 {
        return Err(Error::domain("weight vanishes identically (singular mass)"));
    }

    // graph Dirichlet energy with edge weight h^{n-2} (excluded neighbors
    // act as zeroes), weight mass w h^n
    let hn2 = grid.h.powi(n as i32 - 2);
    let mut triplets = Vec::new();
    for (row, &idx) in keep.iter().enumerate() {
        let mut diag = 0.0;
        for axis in 0..n {
            for up in [false, true] {
                if let Some(nb) = grid.neighbor(idx, axis, up) {
                    diag += hn2;
                    let col = index[nb];
                    if col != usize::MAX && col > row {
                        triplets.push((row, col, -hn2));
                    }
                }
            }
        }
        triplets.push((row, row, diag));
    }
    let a = SymCsr::from_triplets(keep.len(), &triplets);
    let hn = grid.h.powi(n as i32);
    let mass: Vec<f64> = weights.iter().map(|w| w * hn).collect();

    let sigma = smallest_pencil_eigenvalue(&a, &mass)?;
    Ok(HardyEstimate {
        inequality,
        constant: 1.0 / sigma,
        sigma_min: sigma,
        resolution,
        kept_nodes: keep.len(),
        degree: poly.degree(),
        delta,
    })
}

/// Inverse power iteration on (A, diag(mass)) with CG inner solves;
/// deterministic all-ones start.
fn smallest_pencil_eigenvalue(a: &SymCsr, mass: &[f64]) -> Result<f64> {
    let n = a.n();
    let mut v = vec![1.0; n];
    normalize(&mut v);
    let mut sigma = f64::INFINITY;
    let mut x_prev: Option<Vec<f64>> = None;
    for iter in 0..200 {
        let rhs: Vec<f64> = v.iter().zip(mass).map(|(x, m)| x * m).collect();
        let x = cg_solve(a, &rhs, x_prev.as_deref(), 1e-10, 200_000)?;
        let mut ax = vec![0.0; n];
        a.matvec(&x, &mut ax);
        let num = dot(&ax, &x);
        let den: f64 = x.iter().zip(mass).map(|(xi, m)| xi * xi * m).sum();
        let next = num / den;
        let done = iter > 2 && (next - sigma).abs() <= 1e-8 * next.abs();
        sigma = next;
        v = x.clone();
        normalize(&mut v);
        x_prev = Some(x);
        if done {
            break;
        }
    }
    Ok(sigma)
}

fn normalize(v: &mut [f64]) {
    let norm = dot(v, v).sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gh2_x1_matches_separable_oracle_and_monotone() {
        // P = x1 in R^3: the pencil separates exactly; frozen values come
        // from the 1-D reduction solved densely.
        let p = Polynomial::coordinate(3, 0);
        let frozen = [(16usize, 0.85745), (32, 1.19454)];
        let mut last = 0.0;
        for (res, expect) in frozen {
            let est = hardy_constant(&p, HardyInequality::Gh2, 1.0, res).unwrap();
            assert_relative_eq!(est.constant, expect, max_relative = 0.01);
            assert!(est.constant > last - 1e-3, "not monotone at {res}");
            assert!(est.constant < 4.0, "above the continuum constant");
            last = est.constant;
        }
    }

    #[test]
    fn gh1_against_dense_oracle_on_small_grid() {
        // P = x1 x2 in R^3 at 16^3: dense Cholesky inverse iteration is an
        // independent route to the same pencil.
        let p = Polynomial::new(3, [(vec![1, 1, 0], 1.0)]).unwrap();
        let est = hardy_constant(&p, HardyInequality::Gh1, 1.0, 16).unwrap();

        // dense oracle: rebuild the same pencil and factor it densely
        let grid_h = 2.0 / 16.0;
        let m = 17usize;
        let tube = 2.0 * grid_h;
        let coord = |i: usize| -1.0 + i as f64 * grid_h;
        let mut kept: Vec<(usize, usize, usize)> = Vec::new();
        let mut index = std::collections::HashMap::new();
        for k in 0..m {
            for j in 0..m {
                for i in 0..m {
                    let x = [coord(i), coord(j), coord(k)];
                    if p.eval(&x).abs() >= tube {
                        index.insert((i, j, k), kept.len());
                        kept.push((i, j, k));
                    }
                }
            }
        }
        let nk = kept.len();
        let mut a = nalgebra::DMatrix::<f64>::zeros(nk, nk);
        let mut w = nalgebra::DVector::<f64>::zeros(nk);
        for (row, &(i, j, k)) in kept.iter().enumerate() {
            let x = [coord(i), coord(j), coord(k)];
            w[row] = p.eval(&x).abs().powf(-1.0) * grid_h.powi(3);
            let mut diag = 0.0;
            let neighbors = [
                (i.wrapping_sub(1), j, k),
                (i + 1, j, k),
                (i, j.wrapping_sub(1), k),
                (i, j + 1, k),
                (i, j, k.wrapping_sub(1)),
                (i, j, k + 1),
            ];
            for nb in neighbors {
                if nb.0 < m && nb.1 < m && nb.2 < m {
                    diag += grid_h;
                    if let Some(&col) = index.get(&nb) {
                        a[(row, col)] = -grid_h;
                    }
                }
            }
            a[(row, row)] = diag;
        }
        // dense inverse iteration
        let chol = a.clone().cholesky().expect("Dirichlet energy is SPD");
        let mut v = nalgebra::DVector::from_element(nk, 1.0);
        v /= v.norm();
        let mut sigma = 0.0;
        for _ in 0..120 {
            let rhs = v.component_mul(&w);
            let x = chol.solve(&rhs);
            let num = (&a * &x).dot(&x);
            let den = x.component_mul(&w).dot(&x);
            sigma = num / den;
            v = x.normalize();
        }
        let dense_constant = 1.0 / sigma;
        assert_relative_eq!(est.constant, dense_constant, max_relative = 0.01);
    }

    #[test]
    fn bounded_weight_sanity() {
        // wherever the weight is capped, the quotient of any admissible f is
        // at most W_max times the Poincare quotient: int w f^2 <= W_max
        // int f^2 for w <= W_max pointwise.
        let p = Polynomial::coordinate(2, 0);
        let res = 32usize;
        let h = 2.0 / res as f64;
        let mut lhs = 0.0;
        let mut mid = 0.0;
        for i in 0..=res {
            for j in 0..=res {
                let x = [-1.0 + i as f64 * h, -1.0 + j as f64 * h];
                if x[0].abs() < 2.0 * h {
                    continue;
                }
                let f = (1.0 - x[0].abs()) * (1.0 - x[1].abs()); // admissible bump
                let w = 1.0 / (x[0] * x[0]);
                let w_max = 1.0 / (2.0 * h) / (2.0 * h);
                assert!(w <= w_max + 1e-9);
                lhs += w * f * f;
                mid += w_max * f * f;
            }
        }
        assert!(lhs <= mid);
    }

    #[test]
    fn gh3_singular_weight_rejected() {
        // harmonic P: Delta P = 0 makes the gh3 weight vanish identically
        let p = Polynomial::re_z_pow(2);
        let err = hardy_constant(&p, HardyInequality::Gh3, 1.0, 8).unwrap_err();
        assert!(format!("{err}").contains("singular mass"), "{err}");
    }

    #[test]
    fn non_homogeneous_rejected() {
        let p = Polynomial::new(2, [(vec![1, 0], 1.0), (vec![0, 0], 0.5)]).unwrap();
        assert!(hardy_constant(&p, HardyInequality::Gh1, 1.0, 8).is_err());
    }

    #[test]
    fn log2d_normalized_constants_agree() {
        let p = Polynomial::coordinate(2, 0);
        let ests = hardy2d_log_constant(&p, &[1e-2, 1e-3, 1e-4], 1.0, 256).unwrap();
        let norms: Vec<f64> = ests
            .iter()
            .map(|e| e.constant * e.delta.unwrap().ln().abs())
            .collect();
        let max = norms.iter().fold(0.0f64, |a, &b| a.max(b));
        let min = norms.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        let mean = norms.iter().sum::<f64>() / norms.len() as f64;
        assert!(
            (max - min) / mean <= 0.20,
            "normalized constants spread too far: {norms:?}"
        );
    }

    #[test]
    fn log2d_rejects_degenerate_delta() {
        let p = Polynomial::coordinate(2, 0);
        assert!(hardy2d_log_constant(&p, &[1.0], 1.0, 32).is_err());
        assert!(hardy2d_log_constant(&p, &[0.999], 1.0, 32).is_err());
        assert!(hardy2d_log_constant(&p, &[2.0], 1.0, 32).is_err());
    }

    /// Dense 1-D radial pencil for the log-weighted model inequality; an
    /// independent oracle for the 2-D grid path (the box pencil separates,
    /// so both must agree).
    fn radial_model_constant(res: usize, span: f64, delta: f64) -> f64 {
        let h = span / res as f64;
        let keep: Vec<usize> = (1..=res)
            .filter(|&i| {
                let r = i as f64 * h;
                r >= 2.0 * h && (r / delta).ln().abs() >= 0.5
            })
            .collect();
        let nk = keep.len();
        let mut a = nalgebra::DMatrix::<f64>::zeros(nk, nk);
        let mut w = nalgebra::DVector::<f64>::zeros(nk);
        for (row, &i) in keep.iter().enumerate() {
            let r = i as f64 * h;
            w[row] = h / (r * r * (r / delta).ln().abs());
            let mut diag = 0.0;
            for nb in [i - 1, i + 1] {
                if nb >= 1 && nb <= res {
                    diag += 1.0 / h;
                    if let Ok(col) = keep.binary_search(&nb) {
                        a[(row, col)] = -1.0 / h;
                    }
                }
            }
            a[(row, row)] = diag;
        }
        let chol = a.clone().cholesky().unwrap();
        let mut v = nalgebra::DVector::from_element(nk, 1.0).normalize();
        let mut sigma = 0.0;
        for _ in 0..200 {
            let x = chol.solve(&v.component_mul(&w));
            sigma = (&a * &x).dot(&x) / x.component_mul(&w).dot(&x);
            v = x.normalize();
        }
        1.0 / sigma
    }

    #[test]
    fn log2d_matches_radial_model_scaling() {
        // the normalized constants must stabilize across deltas and the 2-D
        // grid path must reproduce the 1-D radial oracle value per delta
        let deltas = [1e-2f64, 1e-3, 1e-4];
        let p = Polynomial::coordinate(2, 0);
        let ests = hardy2d_log_constant(&p, &deltas, 1.0, 256).unwrap();
        let mut norms = Vec::new();
        for (est, &delta) in ests.iter().zip(&deltas) {
            // same node geometry: the 2-D box at res 256 has h = 2/256,
            // matching the unit-interval model at res 128
            let oracle = radial_model_constant(128, 1.0, delta);
            assert_relative_eq!(est.constant, oracle, max_relative = 0.01);
            norms.push(est.constant * delta.ln().abs());
        }
        let max = norms.iter().fold(0.0f64, |a, &b| a.max(b));
        let min = norms.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        assert!(
            (max - min) / max < 0.20,
            "normalized spread too wide: {norms:?}"
        );
    }
}
