//! Eigenpairs of the Laplace-Beltrami operator: closed-form families on the
//! sphere and flat torus, and a cotangent finite-element solver on meshes.

use std::io::Write as _;
use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::mesh::TriangleMesh;
use crate::sparse::{dot, rcm_order, SkylineLdlt, SymCsr};
use crate::spharm;
use crate::surface::{Surface, SurfaceKind};
use crate::vec3::{self, V3};
use crate::{Error, Result};

/// Acceptable relative residual for FEM eigenpairs.
pub const FEM_RESIDUAL_TOL: f64 = 1e-8;
/// Absolute residual floor for the kernel eigenvalue.
pub const KERNEL_RESIDUAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TorusBranch {
    Sine,
    Cosine,
}

/// Closed-form eigenfunction families with exact pointwise evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClosedFormFamily {
    /// Real spherical harmonic `Y_l^m` on the unit sphere; `m < 0` selects
    /// the sine branch.
    Sphere { l: u32, m: i32 },
    /// `sin/cos(2 pi (m u / period_u + n v / period_v))` on the flat torus.
    Torus {
        m: i32,
        n: i32,
        branch: TorusBranch,
        period_u: f64,
        period_v: f64,
    },
}

#[derive(Debug, Clone)]
pub enum EigenSource {
    ClosedForm {
        family: ClosedFormFamily,
        /// Normalization applied on top of the raw family formula.
        amplitude: f64,
    },
    Fem {
        residual: f64,
    },
}

/// An eigenvalue with its vertex-sampled eigenfunction and per-triangle
/// gradients, mass-normalized to unit L2 norm.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub lambda: f64,
    pub values: Vec<f64>,
    pub gradients: Vec<V3>,
    pub source: EigenSource,
}

impl EigenPair {
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn residual(&self) -> f64 {
        match self.source {
            EigenSource::ClosedForm { .. } => 0.0,
            EigenSource::Fem { residual } => residual,
        }
    }

    /// Exact value and ambient gradient for closed-form pairs at an ambient
    /// point; `None` for FEM pairs.
    pub fn eval_closed_form(&self, p: V3) -> Option<(f64, V3)> {
        let EigenSource::ClosedForm { family, amplitude } = &self.source else {
            return None;
        };
        Some(eval_family(*family, *amplitude, p))
    }

    /// CSV export: `vertex_id,value` rows.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "vertex_id,value")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(f, "{i},{v:.17e}")?;
        }
        Ok(())
    }

    /// JSON header: eigenvalue, residual and normalization convention.
    pub fn write_json_header(&self, path: impl AsRef<Path>) -> Result<()> {
        let header = serde_json::json!({
            "lambda": self.lambda,
            "residual": self.residual(),
            "normalization": "mass-weighted unit L2 norm",
        });
        std::fs::write(path, serde_json::to_string_pretty(&header).unwrap())?;
        Ok(())
    }
}

/// Cotangent stiffness and barycentric lumped mass.
#[derive(Debug, Clone)]
pub struct DiscreteOperatorPair {
    pub stiffness: SymCsr,
    /// Diagonal lumped mass.
    pub mass: Vec<f64>,
    /// Triangles with a corner angle within 1e-6 of pi (conditioning risk).
    pub ill_conditioned_triangles: Vec<usize>,
}

/// Assemble the cotangent Laplacian and lumped mass of a closed mesh.
pub fn assemble_laplacian(mesh: &TriangleMesh) -> DiscreteOperatorPair {
    let mut triplets = Vec::with_capacity(mesh.n_triangles() * 6);
    let mut ill = Vec::new();
    for t in 0..mesh.n_triangles() {
        let tri = mesh.triangle(t);
        for k in 0..3 {
            if mesh.corner_angle(t, k) >= std::f64::consts::PI - 1e-6 {
                ill.push(t);
            }
            let w = 0.5 * mesh.corner_cotangent(t, k);
            let a = tri[(k + 1) % 3];
            let b = tri[(k + 2) % 3];
            triplets.push((a.min(b), a.max(b), -w));
            triplets.push((a, a, w));
            triplets.push((b, b, w));
        }
    }
    ill.dedup();
    DiscreteOperatorPair {
        stiffness: SymCsr::from_triplets(mesh.n_vertices(), &triplets),
        mass: mesh.vertex_areas(),
        ill_conditioned_triangles: ill,
    }
}

/// Per-triangle gradient of the linear interpolant of per-vertex values.
pub fn triangle_gradients(mesh: &TriangleMesh, values: &[f64]) -> Vec<V3> {
    (0..mesh.n_triangles())
        .map(|t| triangle_gradient(mesh, values, t))
        .collect()
}

pub fn triangle_gradient(mesh: &TriangleMesh, values: &[f64], t: usize) -> V3 {
    let tri = mesh.triangle(t);
    let c = mesh.triangle_corners(t);
    let normal = vec3::cross(vec3::sub(c[1], c[0]), vec3::sub(c[2], c[0]));
    let two_area = vec3::norm(normal);
    let n_hat = vec3::scale(normal, 1.0 / two_area);
    let mut g = [0.0; 3];
    for k in 0..3 {
        let opposite = vec3::sub(c[(k + 2) % 3], c[(k + 1) % 3]);
        g = vec3::add(g, vec3::scale(vec3::cross(n_hat, opposite), values[tri[k]] / two_area));
    }
    g
}

/// The constant gradient of the linear interpolant on one triangle.
pub fn evaluate_gradient(pair: &EigenPair, triangle: usize) -> V3 {
    pair.gradients[triangle]
}

/// Sample a closed-form eigenfunction family on the surface's mesh.
pub fn closed_form_eigenpair(surface: &Surface, family: ClosedFormFamily) -> Result<EigenPair> {
    let lambda = match family {
        ClosedFormFamily::Sphere { l, m } => {
            if !matches!(surface.kind(), SurfaceKind::UnitSphere) {
                return Err(Error::domain("sphere harmonics need a unit-sphere surface"));
            }
            if m.unsigned_abs() > l {
                return Err(Error::domain(format!("need |m| <= l, got l = {l}, m = {m}")));
            }
            (l * (l + 1)) as f64
        }
        ClosedFormFamily::Torus {
            m,
            n,
            period_u,
            period_v,
            ..
        } => {
            let SurfaceKind::FlatTorus {
                period_u: pu,
                period_v: pv,
            } = surface.kind()
            else {
                return Err(Error::domain("torus modes need a flat-torus surface"));
            };
            if (period_u - pu).abs() > 1e-12 || (period_v - pv).abs() > 1e-12 {
                return Err(Error::domain("family periods disagree with the surface"));
            }
            if m == 0 && n == 0 {
                return Err(Error::domain("torus mode (0,0) is the constant, not admitted"));
            }
            let fu = m as f64 / period_u;
            let fv = n as f64 / period_v;
            4.0 * std::f64::consts::PI.powi(2) * (fu * fu + fv * fv)
        }
    };

    let mesh = surface.mesh();
    let raw: Vec<f64> = (0..mesh.n_vertices())
        .map(|v| eval_family(family, 1.0, mesh.vertex(v)).0)
        .collect();
    let mass = mesh.vertex_areas();
    let norm2: f64 = raw.iter().zip(&mass).map(|(u, m)| u * u * m).sum();
    if norm2 <= 0.0 {
        return Err(Error::domain("family evaluates to zero on every vertex"));
    }
    let amplitude = norm2.sqrt().recip();
    let values: Vec<f64> = raw.iter().map(|u| u * amplitude).collect();
    let gradients = triangle_gradients(mesh, &values);
    Ok(EigenPair {
        lambda,
        values,
        gradients,
        source: EigenSource::ClosedForm { family, amplitude },
    })
}

/// `sin(2 pi t)` with quadrant reduction: zeros at half-integer `t` and
/// extrema at quarter-integer `t` are exact, so symmetry zeros of torus
/// modes land exactly on grid lines.
fn sin2pi(t: f64) -> f64 {
    let t = t - t.floor();
    let tau = 2.0 * std::f64::consts::PI;
    if t < 0.25 {
        (tau * t).sin()
    } else if t < 0.5 {
        (tau * (0.5 - t)).sin()
    } else if t < 0.75 {
        -(tau * (t - 0.5)).sin()
    } else {
        -(tau * (1.0 - t)).sin()
    }
}

fn cos2pi(t: f64) -> f64 {
    sin2pi(t + 0.25)
}

/// Exact evaluation of a family at an ambient point: (value, ambient gradient).
fn eval_family(family: ClosedFormFamily, amplitude: f64, p: V3) -> (f64, V3) {
    match family {
        ClosedFormFamily::Torus {
            m,
            n,
            branch,
            period_u,
            period_v,
        } => {
            let w = [
                2.0 * std::f64::consts::PI * m as f64 / period_u,
                2.0 * std::f64::consts::PI * n as f64 / period_v,
                0.0,
            ];
            let t = m as f64 * p[0] / period_u + n as f64 * p[1] / period_v;
            match branch {
                TorusBranch::Sine => (
                    amplitude * sin2pi(t),
                    vec3::scale(w, amplitude * cos2pi(t)),
                ),
                TorusBranch::Cosine => (
                    amplitude * cos2pi(t),
                    vec3::scale(w, -amplitude * sin2pi(t)),
                ),
            }
        }
        ClosedFormFamily::Sphere { l, m } => {
            let q = vec3::normalize(p);
            let theta = q[2].clamp(-1.0, 1.0).acos();
            let phi = q[1].atan2(q[0]);
            let mabs = m.unsigned_abs();
            let plm = spharm::assoc_legendre(l, mabs, theta.cos());
            let dplm = spharm::assoc_legendre_dtheta(l, mabs, theta);
            let (azim, dazim) = if m >= 0 {
                ((mabs as f64 * phi).cos(), -(mabs as f64) * (mabs as f64 * phi).sin())
            } else {
                ((mabs as f64 * phi).sin(), (mabs as f64) * (mabs as f64 * phi).cos())
            };
            let value = amplitude * plm * azim;
            // tangent frame
            let sin_t = theta.sin();
            let e_theta = [
                theta.cos() * phi.cos(),
                theta.cos() * phi.sin(),
                -sin_t,
            ];
            let e_phi = [-phi.sin(), phi.cos(), 0.0];
            let du_dtheta = amplitude * dplm * azim;
            let du_dphi_over_sin = if sin_t.abs() > 1e-12 {
                amplitude * plm * dazim / sin_t
            } else {
                0.0
            };
            let grad = vec3::add(
                vec3::scale(e_theta, du_dtheta),
                vec3::scale(e_phi, du_dphi_over_sin),
            );
            (value, grad)
        }
    }
}

/// Shift-invert Lanczos with full reorthogonalization: the `count`
/// eigenpairs nearest above `shift`, M-orthonormal, ascending. The `seed`
/// fixes the starting vector; identical inputs give identical output.
pub fn solve_eigen(
    ops: &DiscreteOperatorPair,
    mesh: &TriangleMesh,
    count: usize,
    shift: f64,
    seed: u64,
) -> Result<Vec<EigenPair>> {
    if count == 0 {
        return Err(Error::domain("eigenpair count must be at least 1"));
    }
    let n = ops.stiffness.n();
    if count >= n {
        return Err(Error::domain(format!(
            "requested {count} eigenpairs of an n = {n} operator"
        )));
    }

    let shifted = ops.stiffness.add_diagonal(&ops.mass, -shift);
    let perm = rcm_order(&shifted);
    let factor = SkylineLdlt::factor(&shifted, perm)?;

    let sqrt_m: Vec<f64> = ops.mass.iter().map(|&m| m.sqrt()).collect();
    // B = M^{1/2} (K - shift M)^{-1} M^{1/2}, symmetric in the plain inner
    // product; eigenvalues 1/(lambda - shift).
    let apply_b = |x: &[f64]| -> Vec<f64> {
        let scaled: Vec<f64> = x.iter().zip(&sqrt_m).map(|(v, s)| v * s).collect();
        let mut y = factor.solve(&scaled);
        for i in 0..n {
            y[i] *= sqrt_m[i];
        }
        y
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut steps = (2 * count + 30).min(n);
    for _attempt in 0..3 {
        let (ritz, vectors) = lanczos(&apply_b, n, steps, &mut rng);

        // Eigenvalues above the shift correspond to the largest positive Ritz
        // values of B.
        let mut order: Vec<usize> = (0..ritz.len()).filter(|&i| ritz[i] > 0.0).collect();
        order.sort_by(|&a, &b| ritz[b].partial_cmp(&ritz[a]).unwrap());
        if order.len() < count {
            steps = (steps * 2).min(n);
            continue;
        }

        let mut pairs = Vec::with_capacity(count);
        let mut residuals = Vec::with_capacity(count);
        let mut ok = true;
        for &idx in order.iter().take(count) {
            let theta = ritz[idx];
            let lambda = shift + 1.0 / theta;
            let y = &vectors[idx];
            // back to the generalized problem: u = M^{-1/2} y
            let mut u: Vec<f64> = y.iter().zip(&sqrt_m).map(|(v, s)| v / s).collect();
            // residual || K u - lambda M u || in the M^{-1} norm
            let mut ku = vec![0.0; n];
            ops.stiffness.matvec(&u, &mut ku);
            let mut r2 = 0.0;
            for i in 0..n {
                let r = ku[i] - lambda * ops.mass[i] * u[i];
                r2 += r * r / ops.mass[i];
            }
            let res = r2.sqrt();
            let tol = if lambda.abs() < 1e-6 {
                KERNEL_RESIDUAL_TOL
            } else {
                FEM_RESIDUAL_TOL * lambda.abs()
            };
            residuals.push(res);
            if res > tol {
                ok = false;
            }
            fix_sign(&mut u);
            pairs.push((lambda, u, res));
        }

        if !ok {
            if steps >= n {
                return Err(Error::Solver {
                    context: "Lanczos residuals above tolerance at full subspace".into(),
                    residuals,
                });
            }
            steps = (steps * 2).min(n);
            continue;
        }

        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        return Ok(pairs
            .into_iter()
            .map(|(lambda, values, residual)| {
                let gradients = triangle_gradients(mesh, &values);
                EigenPair {
                    lambda,
                    values,
                    gradients,
                    source: EigenSource::Fem { residual },
                }
            })
            .collect());
    }
    Err(Error::Solver {
        context: "Lanczos failed to converge within the attempt cap".into(),
        residuals: vec![],
    })
}

/// Lanczos with full reorthogonalization; returns Ritz values and vectors of
/// the operator.
fn lanczos(
    apply: &dyn Fn(&[f64]) -> Vec<f64>,
    n: usize,
    steps: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(steps);
    let mut alphas: Vec<f64> = Vec::with_capacity(steps);
    let mut betas: Vec<f64> = Vec::with_capacity(steps);

    let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    normalize(&mut v);

    for j in 0..steps {
        let mut w = apply(&v);
        let alpha = dot(&v, &w);
        for i in 0..n {
            w[i] -= alpha * v[i];
        }
        if let Some(prev) = basis.last() {
            let beta_prev = *betas.last().unwrap();
            for i in 0..n {
                w[i] -= beta_prev * prev[i];
            }
        }
        // full reorthogonalization, twice
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &w);
                for i in 0..n {
                    w[i] -= c * b[i];
                }
            }
            let c = dot(&v, &w);
            for i in 0..n {
                w[i] -= c * v[i];
            }
        }
        alphas.push(alpha);
        basis.push(v.clone());
        let beta = dot(&w, &w).sqrt();
        if beta < 1e-13 || j + 1 == steps {
            break;
        }
        betas.push(beta);
        for i in 0..n {
            w[i] /= beta;
        }
        v = w;
    }

    // tridiagonal eigendecomposition (small, dense)
    let m = alphas.len();
    let mut t = nalgebra::DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alphas[i];
        if i + 1 < m {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let eig = nalgebra::SymmetricEigen::new(t);
    let mut ritz_vals = Vec::with_capacity(m);
    let mut ritz_vecs = Vec::with_capacity(m);
    for k in 0..m {
        ritz_vals.push(eig.eigenvalues[k]);
        let mut y = vec![0.0; n];
        for (j, b) in basis.iter().enumerate() {
            let s = eig.eigenvectors[(j, k)];
            for i in 0..n {
                y[i] += s * b[i];
            }
        }
        normalize(&mut y);
        ritz_vecs.push(y);
    }
    (ritz_vals, ritz_vecs)
}

fn normalize(v: &mut [f64]) {
    let norm = dot(v, v).sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
}

/// Scale so the entry of largest magnitude is positive (ties: lowest index).
fn fix_sign(v: &mut [f64]) {
    let mut best = 0usize;
    let mut best_abs = 0.0;
    for (i, &x) in v.iter().enumerate() {
        if x.abs() > best_abs {
            best_abs = x.abs();
            best = i;
        }
    }
    if v[best] < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn torus_mode_lambda() {
        let s = Surface::flat_torus(1.0, 1.0, 16, 16).unwrap();
        let pair = closed_form_eigenpair(
            &s,
            ClosedFormFamily::Torus {
                m: 1,
                n: 0,
                branch: TorusBranch::Sine,
                period_u: 1.0,
                period_v: 1.0,
            },
        )
        .unwrap();
        assert_relative_eq!(pair.lambda, 4.0 * std::f64::consts::PI.powi(2), max_relative = 1e-14);
    }

    #[test]
    fn sphere_lambda_l3() {
        let s = Surface::unit_sphere(2);
        let pair = closed_form_eigenpair(&s, ClosedFormFamily::Sphere { l: 3, m: 0 }).unwrap();
        assert_relative_eq!(pair.lambda, 12.0);
    }

    #[test]
    fn y20_equator_ratio_is_legendre() {
        // u(theta = pi/2) / u(theta = 0) = P_2(0) / P_2(1) = -1/2
        let s = Surface::unit_sphere(3);
        let pair = closed_form_eigenpair(&s, ClosedFormFamily::Sphere { l: 2, m: 0 }).unwrap();
        let (at_eq, _) = pair.eval_closed_form([1.0, 0.0, 0.0]).unwrap();
        let (at_pole, _) = pair.eval_closed_form([0.0, 0.0, 1.0]).unwrap();
        assert_relative_eq!(at_eq / at_pole, -0.5, max_relative = 1e-12);
    }

    #[test]
    fn invalid_indices_rejected() {
        let s = Surface::unit_sphere(1);
        assert!(closed_form_eigenpair(&s, ClosedFormFamily::Sphere { l: 2, m: 3 }).is_err());
        let t = Surface::flat_torus(1.0, 1.0, 8, 8).unwrap();
        assert!(closed_form_eigenpair(
            &t,
            ClosedFormFamily::Torus {
                m: 0,
                n: 0,
                branch: TorusBranch::Sine,
                period_u: 1.0,
                period_v: 1.0
            }
        )
        .is_err());
    }

    #[test]
    fn stiffness_rows_sum_to_zero_and_mass_traces_area() {
        let mesh = TriangleMesh::icosphere(2);
        let ops = assemble_laplacian(&mesh);
        for (i, s) in ops.stiffness.row_sums().iter().enumerate() {
            assert!(s.abs() < 1e-12, "row {i} sums to {s}");
        }
        let trace: f64 = ops.mass.iter().sum();
        assert_relative_eq!(trace, mesh.total_area(), max_relative = 1e-12);
    }

    #[test]
    fn right_triangle_cotangent_weight() {
        // Weight opposite the right angle is cot(pi/2)/2 = 0.
        let verts = vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [1.0, 1.0, 1.0],
        ];
        let tris = vec![[0, 1, 2], [1, 0, 3], [2, 1, 3], [0, 2, 3]];
        let mesh = TriangleMesh::new(verts, tris).unwrap();
        let w = 0.5 * mesh.corner_cotangent(0, 0);
        assert!(w.abs() < 1e-14);
    }

    #[test]
    fn linear_function_gradient_is_exact() {
        let mesh = TriangleMesh::icosphere(1);
        // u = 3x restricted to each planar triangle: tangential part of (3,0,0)
        let values: Vec<f64> = (0..mesh.n_vertices()).map(|v| 3.0 * mesh.vertex(v)[0]).collect();
        let grads = triangle_gradients(&mesh, &values);
        for t in 0..mesh.n_triangles() {
            let n = mesh.unit_normal(t);
            let expected = vec3::sub([3.0, 0.0, 0.0], vec3::scale(n, 3.0 * n[0]));
            for k in 0..3 {
                assert_relative_eq!(grads[t][k], expected[k], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn constant_function_gradient_is_zero() {
        let mesh = TriangleMesh::torus_grid(1.0, 1.0, 8, 8).unwrap();
        let values = vec![2.5; mesh.n_vertices()];
        for g in triangle_gradients(&mesh, &values) {
            assert!(vec3::norm(g) < 1e-12);
        }
    }

    #[test]
    fn plane_wave_gradient_magnitude() {
        let s = Surface::flat_torus(1.0, 1.0, 64, 64).unwrap();
        let pair = closed_form_eigenpair(
            &s,
            ClosedFormFamily::Torus {
                m: 1,
                n: 0,
                branch: TorusBranch::Sine,
                period_u: 1.0,
                period_v: 1.0,
            },
        )
        .unwrap();
        // at x = 0 the interpolated gradient matches 2 pi cos(0) up to O(h^2)
        let (_, g) = pair.eval_closed_form([0.0, 0.1, 0.0]).unwrap();
        let scale = pair.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        assert_relative_eq!(
            vec3::norm(g),
            2.0 * std::f64::consts::PI * scale,
            max_relative = 1e-9
        );
    }

    #[test]
    fn kernel_eigenpair_on_closed_mesh() {
        let mesh = TriangleMesh::icosphere(2);
        let ops = assemble_laplacian(&mesh);
        let pairs = solve_eigen(&ops, &mesh, 1, -1.0, 7).unwrap();
        assert!(pairs[0].lambda.abs() < 1e-9, "lambda1 = {}", pairs[0].lambda);
        // constant eigenvector
        let mean = pairs[0].values.iter().sum::<f64>() / pairs[0].values.len() as f64;
        for v in &pairs[0].values {
            assert_relative_eq!(*v, mean, max_relative = 1e-6);
        }
    }

    #[test]
    fn icosphere_first_band_near_two() {
        let mesh = TriangleMesh::icosphere(4);
        let ops = assemble_laplacian(&mesh);
        let pairs = solve_eigen(&ops, &mesh, 4, -1.0, 7).unwrap();
        for p in &pairs[1..4] {
            assert!((p.lambda - 2.0).abs() / 2.0 < 0.01, "lambda = {}", p.lambda);
        }
    }

    #[test]
    fn torus_grid_fem_mode() {
        let mesh = TriangleMesh::torus_grid(1.0, 1.0, 64, 64).unwrap();
        let ops = assemble_laplacian(&mesh);
        // modes: 0, then (1,0)/(0,1) sine/cosine cluster of multiplicity 4
        let pairs = solve_eigen(&ops, &mesh, 5, -1.0, 7).unwrap();
        let expect = 4.0 * std::f64::consts::PI.powi(2);
        for p in &pairs[1..5] {
            assert!(
                (p.lambda - expect).abs() / expect < 0.01,
                "lambda = {} vs {expect}",
                p.lambda
            );
        }
    }

    #[test]
    fn m_orthonormality_and_rayleigh_consistency() {
        let mesh = TriangleMesh::icosphere(3);
        let ops = assemble_laplacian(&mesh);
        let pairs = solve_eigen(&ops, &mesh, 6, -1.0, 7).unwrap();
        let n = mesh.n_vertices();
        for (i, a) in pairs.iter().enumerate() {
            let mut ka = vec![0.0; n];
            ops.stiffness.matvec(&a.values, &mut ka);
            let num = dot(&ka, &a.values);
            let den: f64 = a.values.iter().zip(&ops.mass).map(|(v, m)| v * v * m).sum();
            if a.lambda.abs() > 1e-8 {
                assert_relative_eq!(num / den, a.lambda, max_relative = 1e-8);
            }
            for b in pairs.iter().skip(i + 1) {
                let ip: f64 = a
                    .values
                    .iter()
                    .zip(&b.values)
                    .zip(&ops.mass)
                    .map(|((x, y), m)| x * y * m)
                    .sum();
                assert!(ip.abs() < 1e-8, "M-orthogonality violated: {ip}");
            }
        }
    }

    #[test]
    fn sphere_eigenvalue_error_shrinks_with_refinement() {
        let mut errors = Vec::new();
        for sub in [2u32, 3, 4] {
            let mesh = TriangleMesh::icosphere(sub);
            let ops = assemble_laplacian(&mesh);
            let pairs = solve_eigen(&ops, &mesh, 4, -1.0, 7).unwrap();
            let err = pairs[1..4]
                .iter()
                .map(|p| (p.lambda - 2.0).abs())
                .fold(0.0, f64::max);
            errors.push(err);
        }
        assert!(
            errors[0] / errors[1] >= 3.0 && errors[1] / errors[2] >= 3.0,
            "refinement errors {errors:?}"
        );
    }

    #[test]
    fn deterministic_under_fixed_seed() {
        let mesh = TriangleMesh::icosphere(2);
        let ops = assemble_laplacian(&mesh);
        let a = solve_eigen(&ops, &mesh, 3, -1.0, 42).unwrap();
        let b = solve_eigen(&ops, &mesh, 3, -1.0, 42).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.lambda, y.lambda);
            assert_eq!(x.values, y.values);
        }
    }
}
