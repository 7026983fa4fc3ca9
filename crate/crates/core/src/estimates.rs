//! The quantitative checks: Dong's upper bound on nodal length, per-pixel
//! density statistics, the sqrt-lambda scaling fit, empirical Harnack and
//! Bernstein ratios, Dirichlet eigenvalue checks on nodal domains, and zero
//! counting along fronts.

use crate::mesh::TriangleMesh;
use crate::nodal::{nodal_length, NodalDomainSet, NodalSet};
use crate::pixelize::{CenterCluster, FrontArc, PixelDecomposition};
use crate::region::Region;
use crate::sparse::{rcm_order, SkylineLdlt, SymCsr};
use crate::spectral::{DiscreteOperatorPair, EigenPair};
use crate::vec3::{self, V3};
use crate::{Error, Result};

/// Ambient dimension of the numerics. All surfaces here are 2-D; the
/// formulas keep `n` explicit so the constant is the single knob.
pub const SURFACE_DIMENSION: f64 = 2.0;

// ----------------------------------------------------------------------
// Dong's upper bound
// ----------------------------------------------------------------------

/// Terms of the nodal-length upper bound on a region:
/// `1/2 int |grad log q_eps| + sqrt(n lambda) vol(P) + vol(dP)` with
/// `q = |grad u|^2 + (lambda/n) u^2`.
#[derive(Debug, Clone)]
pub struct DongBound {
    pub integral_term: f64,
    pub volume_term: f64,
    pub boundary_term: f64,
    pub total: f64,
    pub eps_rel: f64,
    pub extracted_length: f64,
}

/// Precomputed regularized `log q` field of one eigenpair, reusable across
/// many region evaluations.
pub struct DongField {
    pub log_q: Vec<f64>,
    pub lambda: f64,
    pub eps_rel: f64,
}

impl DongField {
    pub fn new(pair: &EigenPair, mesh: &TriangleMesh, eps_rel: f64) -> Result<DongField> {
        if !(eps_rel > 0.0 && eps_rel <= 1e-2) {
            return Err(Error::domain("eps_rel must lie in (0, 1e-2]"));
        }
        let n = SURFACE_DIMENSION;
        // q at vertices: area-averaged squared gradient plus (lambda/n) u^2
        let areas = mesh.vertex_areas();
        let mut grad2 = vec![0.0; mesh.n_vertices()];
        for t in 0..mesh.n_triangles() {
            let g = pair.gradients[t];
            let w = mesh.area(t) / 3.0;
            for &v in &mesh.triangle(t) {
                grad2[v] += w * vec3::dot(g, g);
            }
        }
        let mut q = vec![0.0; mesh.n_vertices()];
        let mut q_max = 0.0f64;
        for v in 0..mesh.n_vertices() {
            q[v] = grad2[v] / areas[v] + (pair.lambda / n) * pair.values[v] * pair.values[v];
            q_max = q_max.max(q[v]);
        }
        let reg = (eps_rel * q_max).powi(2);
        Ok(DongField {
            log_q: q.iter().map(|&x| (x + reg).ln()).collect(),
            lambda: pair.lambda,
            eps_rel,
        })
    }

    /// Evaluate the bound on one region; cost is linear in the region size.
    pub fn bound_on(
        &self,
        mesh: &TriangleMesh,
        set: &NodalSet,
        region: &Region,
        region_values: Option<&[f64]>,
    ) -> Result<DongBound> {
        if region.is_empty() {
            return Err(Error::domain("Dong bound needs a nonempty region"));
        }
        let n = SURFACE_DIMENSION;
        let mut integral = 0.0;
        for &t in &region.full {
            let g = crate::spectral::triangle_gradient(mesh, &self.log_q, t);
            integral += 0.5 * vec3::norm(g) * mesh.area(t);
        }
        for p in &region.partial {
            let g = crate::spectral::triangle_gradient(mesh, &self.log_q, p.tri);
            integral += 0.5 * vec3::norm(g) * p.area;
        }
        let volume_term = (n * self.lambda).sqrt() * region.area;
        let boundary_term = region.boundary_length;
        let extracted_length = nodal_length(set, mesh, Some((region, region_values)));
        Ok(DongBound {
            integral_term: integral,
            volume_term,
            boundary_term,
            total: integral + volume_term + boundary_term,
            eps_rel: self.eps_rel,
            extracted_length,
        })
    }
}

/// Evaluate the bound on a region. `region_values` is the field that built
/// the region (for clipping); pass `None` for whole-triangle regions. For
/// sweeps over many regions of one eigenpair, build a [`DongField`] once.
pub fn dong_upper_bound(
    pair: &EigenPair,
    mesh: &TriangleMesh,
    set: &NodalSet,
    region: &Region,
    region_values: Option<&[f64]>,
    eps_rel: f64,
) -> Result<DongBound> {
    DongField::new(pair, mesh, eps_rel)?.bound_on(mesh, set, region, region_values)
}

// ----------------------------------------------------------------------
// Per-pixel density and the scaling fit
// ----------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct DensityReport {
    /// (pixel id, sqrt(lambda) * length(N in pixel)) over center-holding pixels.
    pub per_pixel: Vec<(usize, f64)>,
    pub min: f64,
    pub median: f64,
    pub max: f64,
    /// Pixels holding no center, excluded from the statistics.
    pub excluded_no_center: usize,
}

/// `s_P = sqrt(lambda) * length(N(u) in P)` per center-holding pixel.
pub fn lower_bound_density(
    pair: &EigenPair,
    mesh: &TriangleMesh,
    set: &NodalSet,
    decomposition: &PixelDecomposition,
    cluster: &CenterCluster,
) -> Result<DensityReport> {
    let with_centers = decomposition.pixels_with_centers(cluster);
    if with_centers.is_empty() {
        return Err(Error::domain("no pixel holds a center"));
    }
    let mut length_per_pixel = vec![0.0; decomposition.pixels.len()];
    for seg in &set.segments {
        if let Some(p) = decomposition.pixel_of_triangle[seg.triangle] {
            length_per_pixel[p] += seg.length();
        }
    }
    let sqrt_lambda = pair.lambda.sqrt();
    let mut per_pixel: Vec<(usize, f64)> = with_centers
        .iter()
        .map(|&p| (p, sqrt_lambda * length_per_pixel[p]))
        .collect();
    per_pixel.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    let values: Vec<f64> = per_pixel.iter().map(|x| x.1).collect();
    let median = values[values.len() / 2];
    let _ = mesh;
    Ok(DensityReport {
        min: values[0],
        median,
        max: *values.last().unwrap(),
        excluded_no_center: decomposition.pixels.len() - with_centers.len(),
        per_pixel,
    })
}

#[derive(Debug, Clone)]
pub struct ScalingFit {
    pub samples: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    /// RMS residual of log L about the fit.
    pub residual: f64,
}

/// Least squares of `log L` against `log lambda`.
pub fn scaling_fit(samples: &[(f64, f64)]) -> Result<ScalingFit> {
    if samples.len() < 2 {
        return Err(Error::domain("scaling fit needs at least 2 samples"));
    }
    for (i, a) in samples.iter().enumerate() {
        if !(a.0 > 0.0 && a.1 > 0.0) {
            return Err(Error::domain("scaling fit needs positive lambda and length"));
        }
        for b in samples.iter().skip(i + 1) {
            if a.0 == b.0 {
                return Err(Error::domain("scaling fit needs distinct lambdas"));
            }
        }
    }
    let xs: Vec<f64> = samples.iter().map(|s| s.0.ln()).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.1.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(ScalingFit {
        samples: samples.to_vec(),
        slope,
        intercept,
        residual,
    })
}

// ----------------------------------------------------------------------
// Harnack ratios
// ----------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct PixelComponentRecord {
    pub pixel: usize,
    pub eps: f64,
    pub component: usize,
    /// sup |u| / eps over the component.
    pub c20: f64,
    pub grad_sup: f64,
    pub grad_inf: f64,
    pub hess_sup: f64,
    pub hess_inf: f64,
    /// Whether the component holds the pixel's |u| maximizer.
    pub contains_max: bool,
    pub n_vertices: usize,
}

#[derive(Debug, Clone)]
pub struct FrontComponentRecord {
    pub front: usize,
    pub eps: f64,
    pub component: usize,
    /// sup |u| / eps along the front component.
    pub c30: f64,
    pub tangential_grad_sup: f64,
    pub tangential_grad_inf: f64,
    pub n_samples: usize,
}

#[derive(Debug, Clone)]
pub struct MorreyRecord {
    pub pixel: usize,
    pub eps: f64,
    /// int zeta^2 |grad log u_eps|^2 / int (|grad zeta|^2 + zeta^2).
    pub log_gradient_ratio: f64,
}

#[derive(Debug, Clone)]
pub struct HarnackReport {
    pub pixel_records: Vec<PixelComponentRecord>,
    pub front_records: Vec<FrontComponentRecord>,
    pub morrey_records: Vec<MorreyRecord>,
    /// (pixel, eps) pairs with empty superlevel sets.
    pub skipped: Vec<(usize, f64)>,
    pub eps_grid: Vec<f64>,
}

/// Per-component Harnack quantities over `{|u| > eps}` inside each pixel,
/// plus their front-restricted analogues and the log-gradient (Morrey)
/// ratio per pixel and eps.
pub fn harnack_ratios(
    pair: &EigenPair,
    mesh: &TriangleMesh,
    decomposition: &PixelDecomposition,
    eps_grid: &[f64],
) -> Result<HarnackReport> {
    if eps_grid.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::domain("eps grid entries must be positive"));
    }
    let mut pixel_records = Vec::new();
    let mut front_records = Vec::new();
    let mut morrey_records = Vec::new();
    let mut skipped = Vec::new();

    for (pid, pixel) in decomposition.pixels.iter().enumerate() {
        // vertex set of the pixel
        let mut verts: Vec<usize> = pixel
            .triangles
            .iter()
            .flat_map(|&t| mesh.triangle(t))
            .collect();
        verts.sort_unstable();
        verts.dedup();
        let in_pixel: std::collections::BTreeMap<usize, usize> =
            verts.iter().enumerate().map(|(i, &v)| (v, i)).collect();

        // argmax of |u| within the pixel
        let argmax = verts
            .iter()
            .copied()
            .max_by(|&a, &b| {
                pair.values[a]
                    .abs()
                    .partial_cmp(&pair.values[b].abs())
                    .unwrap()
            })
            .unwrap_or(0);

        for &eps in eps_grid {
            // flood fill components of {|u| > eps} on pixel vertices
            let mut label: Vec<Option<usize>> = vec![None; verts.len()];
            let mut n_components = 0;
            for start in 0..verts.len() {
                if label[start].is_some() || pair.values[verts[start]].abs() <= eps {
                    continue;
                }
                let sign = pair.values[verts[start]] > 0.0;
                let id = n_components;
                n_components += 1;
                let mut queue = std::collections::VecDeque::new();
                label[start] = Some(id);
                queue.push_back(start);
                while let Some(i) = queue.pop_front() {
                    for &w in mesh.vertex_neighbors(verts[i]) {
                        if let Some(&j) = in_pixel.get(&w) {
                            if label[j].is_none()
                                && pair.values[w].abs() > eps
                                && (pair.values[w] > 0.0) == sign
                            {
                                label[j] = Some(id);
                                queue.push_back(j);
                            }
                        }
                    }
                }
            }
            if n_components == 0 {
                skipped.push((pid, eps));
                continue;
            }

            for comp in 0..n_components {
                let members: Vec<usize> = (0..verts.len())
                    .filter(|&i| label[i] == Some(comp))
                    .map(|i| verts[i])
                    .collect();
                let sup_u = members
                    .iter()
                    .map(|&v| pair.values[v].abs())
                    .fold(0.0f64, f64::max);
                // triangles fully inside the component
                let mut grad_sup = 0.0f64;
                let mut grad_inf = f64::INFINITY;
                let mut comp_tris = Vec::new();
                for &t in &pixel.triangles {
                    let tri = mesh.triangle(t);
                    if tri.iter().all(|v| members.binary_search(v).is_ok()) {
                        let g = vec3::norm(pair.gradients[t]);
                        grad_sup = grad_sup.max(g);
                        grad_inf = grad_inf.min(g);
                        comp_tris.push(t);
                    }
                }
                // hessian proxy: gradient jumps across interior edges
                let mut hess_sup = 0.0f64;
                let mut hess_inf = f64::INFINITY;
                comp_tris.sort_unstable();
                for e in mesh.edges() {
                    if comp_tris.binary_search(&e.tris[0]).is_ok()
                        && comp_tris.binary_search(&e.tris[1]).is_ok()
                    {
                        let h = gradient_jump(mesh, pair, e.tris[0], e.tris[1]);
                        hess_sup = hess_sup.max(h);
                        hess_inf = hess_inf.min(h);
                    }
                }
                pixel_records.push(PixelComponentRecord {
                    pixel: pid,
                    eps,
                    component: comp,
                    c20: sup_u / eps,
                    grad_sup,
                    grad_inf: if grad_inf.is_finite() { grad_inf } else { 0.0 },
                    hess_sup,
                    hess_inf: if hess_inf.is_finite() { hess_inf } else { 0.0 },
                    contains_max: members.binary_search(&argmax).is_ok(),
                    n_vertices: members.len(),
                });
            }

            morrey_records.push(MorreyRecord {
                pixel: pid,
                eps,
                log_gradient_ratio: morrey_ratio(pair, mesh, decomposition, pid, eps),
            });
        }
    }

    // front-restricted analogues
    for (fid, front) in decomposition.fronts.iter().enumerate() {
        let u = front_values(pair, mesh, front);
        for &eps in eps_grid {
            for (comp, run) in superlevel_runs(&u, eps, front.closed).into_iter().enumerate() {
                let sup_u = run.iter().map(|&i| u[i].abs()).fold(0.0f64, f64::max);
                let mut dsup = 0.0f64;
                let mut dinf = f64::INFINITY;
                if run.len() >= 3 {
                    for w in run.windows(3) {
                        let ds = front.arclength[w[2]] - front.arclength[w[0]];
                        if ds > 0.0 {
                            let d = ((u[w[2]] - u[w[0]]) / ds).abs();
                            dsup = dsup.max(d);
                            dinf = dinf.min(d);
                        }
                    }
                }
                front_records.push(FrontComponentRecord {
                    front: fid,
                    eps,
                    component: comp,
                    c30: sup_u / eps,
                    tangential_grad_sup: dsup,
                    tangential_grad_inf: if dinf.is_finite() { dinf } else { 0.0 },
                    n_samples: run.len(),
                });
            }
        }
    }

    Ok(HarnackReport {
        pixel_records,
        front_records,
        morrey_records,
        skipped,
        eps_grid: eps_grid.to_vec(),
    })
}

fn gradient_jump(mesh: &TriangleMesh, pair: &EigenPair, t1: usize, t2: usize) -> f64 {
    let c1 = mesh.centroid(t1);
    let c2 = mesh.unwrap_point(mesh.centroid(t2), c1);
    let d = vec3::dist(c1, c2).max(1e-300);
    vec3::dist(pair.gradients[t1], pair.gradients[t2]) / d
}

fn front_values(pair: &EigenPair, mesh: &TriangleMesh, front: &FrontArc) -> Vec<f64> {
    front
        .points
        .iter()
        .zip(&front.point_triangles)
        .map(|(&p, &t)| {
            let tri = mesh.triangle(t);
            let b = mesh.barycentric(t, p);
            b[0] * pair.values[tri[0]] + b[1] * pair.values[tri[1]] + b[2] * pair.values[tri[2]]
        })
        .collect()
}

/// Maximal runs of consecutive indices with |u| > eps and constant sign.
fn superlevel_runs(u: &[f64], eps: f64, closed: bool) -> Vec<Vec<usize>> {
    let m = if closed && u.len() > 1 { u.len() - 1 } else { u.len() };
    let above = |i: usize| u[i].abs() > eps;
    let mut runs: Vec<Vec<usize>> = Vec::new();
    let mut current: Vec<usize> = Vec::new();
    for i in 0..m {
        let extend = above(i)
            && match current.last() {
                Some(&p) => (u[p] > 0.0) == (u[i] > 0.0),
                None => true,
            };
        if extend {
            current.push(i);
        } else {
            if !current.is_empty() {
                runs.push(std::mem::take(&mut current));
            }
            if above(i) {
                current.push(i);
            }
        }
    }
    if !current.is_empty() {
        runs.push(current);
    }
    // merge the wrap-around run on closed arcs
    if closed && runs.len() > 1 {
        let first_starts_at_zero = runs[0].first() == Some(&0);
        let last_ends_at_m = runs.last().unwrap().last() == Some(&(m - 1));
        if first_starts_at_zero && last_ends_at_m {
            let same_sign = {
                let a = runs[0][0];
                let b = *runs.last().unwrap().last().unwrap();
                (u[a] > 0.0) == (u[b] > 0.0)
            };
            if same_sign {
                let first = runs.remove(0);
                runs.last_mut().unwrap().extend(first);
            }
        }
    }
    runs
}

/// Log-gradient ratio on one pixel: tent cutoff from the pixel's first ball.
fn morrey_ratio(
    pair: &EigenPair,
    mesh: &TriangleMesh,
    decomposition: &PixelDecomposition,
    pixel: usize,
    eps: f64,
) -> f64 {
    let p = &decomposition.pixels[pixel];
    let ball = &decomposition.balls[p.signature[0]];
    let r = ball.radius;
    let mut num = 0.0;
    let mut den = 0.0;
    for &t in &p.triangles {
        let tri = mesh.triangle(t);
        let area = mesh.area(t);
        let c = mesh.centroid(t);
        let u_mid =
            (pair.values[tri[0]] + pair.values[tri[1]] + pair.values[tri[2]]) / 3.0;
        let g = pair.gradients[t];
        // grad log sqrt(u^2 + eps^2) = u grad u / (u^2 + eps^2)
        let glog = vec3::norm(g) * u_mid.abs() / (u_mid * u_mid + eps * eps);
        let d = vec3::dist(mesh.unwrap_point(ball.center, c), c);
        let zeta = (1.0 - d / r).max(0.0);
        num += zeta * zeta * glog * glog * area;
        den += (1.0 / (r * r) + zeta * zeta) * area;
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

// ----------------------------------------------------------------------
// Bernstein ratios
// ----------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct BernsteinRatios {
    /// sup |grad u| / (sqrt(lambda) (|u| + eps)).
    pub grad_ratio: f64,
    /// sup |hess u| / (lambda (|u| + eps)), hessian by gradient jumps.
    pub hess_ratio: f64,
    pub eps: f64,
}

/// Empirical Bernstein quotients over a region. The normalization uses the
/// sharp classical orders sqrt(lambda) and lambda rather than the loose
/// lambda^{n/2+1} envelope, so the reported constants stay O(1).
pub fn bernstein_ratios(
    pair: &EigenPair,
    mesh: &TriangleMesh,
    region: &Region,
    eps: f64,
) -> Result<BernsteinRatios> {
    if !(eps > 0.0) {
        return Err(Error::domain("Bernstein eps must be positive"));
    }
    let membership = region.classify(mesh);
    let in_region = |t: usize| {
        !matches!(membership[t], crate::region::Membership::Outside)
    };
    let sqrt_lambda = pair.lambda.sqrt();
    let mut grad_ratio = 0.0f64;
    for t in 0..mesh.n_triangles() {
        if !in_region(t) {
            continue;
        }
        let tri = mesh.triangle(t);
        let u_min = tri
            .iter()
            .map(|&v| pair.values[v].abs())
            .fold(f64::INFINITY, f64::min);
        let g = vec3::norm(pair.gradients[t]);
        grad_ratio = grad_ratio.max(g / (sqrt_lambda * (u_min + eps)));
    }
    let mut hess_ratio = 0.0f64;
    for e in mesh.edges() {
        if !in_region(e.tris[0]) || !in_region(e.tris[1]) {
            continue;
        }
        let h = gradient_jump(mesh, pair, e.tris[0], e.tris[1]);
        let mut u_min = f64::INFINITY;
        for t in e.tris {
            for &v in &mesh.triangle(t) {
                u_min = u_min.min(pair.values[v].abs());
            }
        }
        hess_ratio = hess_ratio.max(h / (pair.lambda * (u_min + eps)));
    }
    Ok(BernsteinRatios {
        grad_ratio,
        hess_ratio,
        eps,
    })
}

// ----------------------------------------------------------------------
// Nodal-domain Dirichlet eigenvalue and Cheeger check
// ----------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct EigencheckReport {
    pub lambda1_dirichlet: f64,
    /// |lambda_1 - lambda| / lambda.
    pub relative_gap: f64,
    /// lambda_1 * vol^{2/(n-1)}.
    pub cheeger_lhs: f64,
    /// (lambda_1 + inf |h|) * vol^{2/(n-1)}: the empirical Cheeger floor
    /// witness, with inf |h| the smallest boundary turning rate.
    pub cheeger_rhs: f64,
    pub volume: f64,
    pub interior_vertices: usize,
    pub skipped: bool,
}

/// First Dirichlet eigenvalue of one nodal domain (vertices labeled
/// `domain_id`), its gap to the eigenvalue, and the Cheeger pair.
pub fn nodal_domain_eigencheck(
    pair: &EigenPair,
    mesh: &TriangleMesh,
    ops: &DiscreteOperatorPair,
    domains: &NodalDomainSet,
    domain_id: usize,
    set: &NodalSet,
) -> Result<EigencheckReport> {
    let members: Vec<usize> = (0..mesh.n_vertices())
        .filter(|&v| domains.labels[v] == Some(domain_id))
        .collect();
    if members.is_empty() {
        return Err(Error::domain(format!("domain {domain_id} has no vertices")));
    }
    if members.len() == mesh.n_vertices() {
        return Err(Error::domain(
            "domain covers the whole surface; a Dirichlet problem needs boundary",
        ));
    }
    let member_set: std::collections::BTreeMap<usize, usize> =
        members.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let interior = members
        .iter()
        .filter(|&&v| {
            mesh.vertex_neighbors(v)
                .iter()
                .all(|w| member_set.contains_key(w))
        })
        .count();
    let areas = mesh.vertex_areas();
    let volume: f64 = members.iter().map(|&v| areas[v]).sum();
    if interior < 10 {
        return Ok(EigencheckReport {
            lambda1_dirichlet: f64::NAN,
            relative_gap: f64::NAN,
            cheeger_lhs: f64::NAN,
            cheeger_rhs: f64::NAN,
            volume,
            interior_vertices: interior,
            skipped: true,
        });
    }

    // restricted stiffness (Dirichlet on the complement) and mass
    let mut triplets = Vec::new();
    let full_diag = ops.stiffness.diagonal();
    for (i, &v) in members.iter().enumerate() {
        triplets.push((i, i, full_diag[v]));
    }
    for e in mesh.edges() {
        if let (Some(&i), Some(&j)) = (member_set.get(&e.v[0]), member_set.get(&e.v[1])) {
            // cotangent weight of the edge from both adjacent triangles
            let mut w = 0.0;
            for t in e.tris {
                let tri = mesh.triangle(t);
                let k = tri
                    .iter()
                    .position(|&x| x != e.v[0] && x != e.v[1])
                    .unwrap();
                w += 0.5 * mesh.corner_cotangent(t, k);
            }
            triplets.push((i.min(j), i.max(j), -w));
        }
    }
    let k_sub = SymCsr::from_triplets(members.len(), &triplets);
    let m_sub: Vec<f64> = members.iter().map(|&v| ops.mass[v]).collect();

    let lambda1 = smallest_dirichlet_eigenvalue(&k_sub, &m_sub)?;
    let relative_gap = (lambda1 - pair.lambda).abs() / pair.lambda;

    // boundary turning rate of the adjacent nodal curve
    let inf_h = boundary_turning_floor(mesh, set, &member_set);

    let n = SURFACE_DIMENSION;
    let vol_pow = volume.powf(2.0 / (n - 1.0));
    Ok(EigencheckReport {
        lambda1_dirichlet: lambda1,
        relative_gap,
        cheeger_lhs: lambda1 * vol_pow,
        cheeger_rhs: (lambda1 + inf_h) * vol_pow,
        volume,
        interior_vertices: interior,
        skipped: false,
    })
}

/// Inverse power iteration for the smallest eigenvalue of `K x = lambda M x`
/// with K SPD (Dirichlet-restricted stiffness).
fn smallest_dirichlet_eigenvalue(k: &SymCsr, mass: &[f64]) -> Result<f64> {
    let n = k.n();
    let factor = SkylineLdlt::factor(k, rcm_order(k))?;
    let mut v: Vec<f64> = vec![1.0; n];
    let norm0 = (crate::sparse::dot(&v, &v)).sqrt();
    for x in v.iter_mut() {
        *x /= norm0;
    }
    let mut lambda = 0.0;
    for _ in 0..500 {
        let mv: Vec<f64> = v.iter().zip(mass).map(|(x, m)| x * m).collect();
        let mut w = factor.solve(&mv);
        let norm = crate::sparse::dot(&w, &w).sqrt();
        if norm == 0.0 {
            return Err(Error::Solver {
                context: "inverse power iteration collapsed".into(),
                residuals: vec![],
            });
        }
        for x in w.iter_mut() {
            *x /= norm;
        }
        // Rayleigh quotient
        let mut kw = vec![0.0; n];
        k.matvec(&w, &mut kw);
        let num = crate::sparse::dot(&kw, &w);
        let den: f64 = w.iter().zip(mass).map(|(x, m)| x * x * m).sum();
        let next = num / den;
        let done = (next - lambda).abs() <= 1e-12 * next.abs();
        lambda = next;
        v = w;
        if done {
            break;
        }
    }
    Ok(lambda)
}

/// Smallest discrete turning rate |h| of the nodal segments bordering the
/// domain: turning angle over mean adjacent segment length at each interior
/// joint of the nodal graph.
fn boundary_turning_floor(
    mesh: &TriangleMesh,
    set: &NodalSet,
    member_set: &std::collections::BTreeMap<usize, usize>,
) -> f64 {
    let mut inf_h = f64::INFINITY;
    for ids in set.graph.values() {
        if ids.len() != 2 {
            continue;
        }
        let (s1, s2) = (&set.segments[ids[0]], &set.segments[ids[1]]);
        // joint is relevant when a bordering triangle touches the domain
        let touches = [s1.triangle, s2.triangle].iter().any(|&t| {
            mesh.triangle(t).iter().any(|v| member_set.contains_key(v))
        });
        if !touches {
            continue;
        }
        // orient both segments away from the shared joint
        let shared_key = s1
            .edges
            .iter()
            .find(|k| s2.edges.contains(k))
            .copied();
        let Some(key) = shared_key else { continue };
        let dir = |s: &crate::nodal::NodalSegment| -> V3 {
            let (from, to) = if s.edges[0] == key {
                (s.endpoints[0], s.endpoints[1])
            } else {
                (s.endpoints[1], s.endpoints[0])
            };
            vec3::normalize(vec3::sub(mesh.unwrap_point(to, from), from))
        };
        let d1 = dir(s1);
        let d2 = dir(s2);
        let turn = std::f64::consts::PI - vec3::dot(d1, d2).clamp(-1.0, 1.0).acos();
        let len = 0.5 * (s1.length() + s2.length());
        if len > 0.0 {
            inf_h = inf_h.min(turn.abs() / len);
        }
    }
    if inf_h.is_finite() {
        inf_h
    } else {
        0.0
    }
}

// ----------------------------------------------------------------------
// Zero counting along fronts
// ----------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct FrontZeroReport {
    pub zero_count: usize,
    pub arc_length: f64,
    /// zero_count / (sqrt(lambda) length).
    pub normalized: f64,
    pub n_samples: usize,
}

/// Count sign changes of `u` along a front arc. The arc's sample density
/// must reach 8 sqrt(lambda) per unit length.
pub fn front_restriction_zeros(
    pair: &EigenPair,
    mesh: &TriangleMesh,
    front: &FrontArc,
) -> Result<FrontZeroReport> {
    let len = front.length();
    if len <= 0.0 {
        return Err(Error::domain("front arc has zero length"));
    }
    let required = (8.0 * pair.lambda.sqrt() * len).ceil() as usize;
    let n = front.points.len();
    if n < required.max(2) {
        return Err(Error::domain(format!(
            "front needs at least {required} samples for lambda = {}, has {n}",
            pair.lambda
        )));
    }
    let u = front_values(pair, mesh, front);
    let m = if front.closed { n - 1 } else { n };
    let mut zero_count = 0;
    for i in 0..m {
        let j = if i + 1 == m {
            if front.closed {
                0
            } else {
                break;
            }
        } else {
            i + 1
        };
        if (u[i] > 0.0) != (u[j] > 0.0) {
            zero_count += 1;
        }
    }
    Ok(FrontZeroReport {
        zero_count,
        arc_length: len,
        normalized: zero_count as f64 / (pair.lambda.sqrt() * len),
        n_samples: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nodal::{extract_nodal_set, nodal_domains};
    use crate::pixelize::{build_pixels, select_centers, RadiusRule};
    use crate::spectral::{
        assemble_laplacian, closed_form_eigenpair, ClosedFormFamily, EigenSource, TorusBranch,
    };
    use crate::surface::Surface;
    use approx::assert_relative_eq;

    fn torus_pair(m: i32, grid: usize) -> (Surface, EigenPair) {
        let s = Surface::flat_torus(1.0, 1.0, grid, grid).unwrap();
        let pair = closed_form_eigenpair(
            &s,
            ClosedFormFamily::Torus {
                m,
                n: 0,
                branch: TorusBranch::Sine,
                period_u: 1.0,
                period_v: 1.0,
            },
        )
        .unwrap();
        (s, pair)
    }

    fn locate_triangle(mesh: &TriangleMesh, p: V3) -> usize {
        for t in 0..mesh.n_triangles() {
            let b = mesh.barycentric(t, p);
            if b.iter().all(|&x| x >= -1e-9) {
                return t;
            }
        }
        panic!("point {p:?} not on mesh");
    }

    #[test]
    fn dong_on_full_torus_dominates_and_matches_oracle() {
        let (s, pair) = torus_pair(1, 64);
        let mesh = s.mesh();
        let set = extract_nodal_set(&pair, mesh).unwrap();
        let region = Region::whole(mesh);
        let bound = dong_upper_bound(&pair, mesh, &set, &region, None, 1e-3).unwrap();
        // closed surface: no boundary term
        assert_eq!(bound.boundary_term, 0.0);
        assert_relative_eq!(bound.extracted_length, 2.0, epsilon = 1e-9);
        assert!(bound.total >= bound.extracted_length);
        // analytic reduction: q = 4 pi^2 (1 - sin^2(2 pi x)/2), and
        // (1/2) int |d/dx log q| = 2 log 2 over the unit torus
        assert_relative_eq!(bound.integral_term, 2.0 * (2.0_f64).ln(), max_relative = 0.02);
        assert_relative_eq!(
            bound.volume_term,
            (2.0 * pair.lambda).sqrt(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn dong_integral_stable_under_halved_regularization() {
        let (s, pair) = torus_pair(2, 128);
        let mesh = s.mesh();
        let set = extract_nodal_set(&pair, mesh).unwrap();
        let region = Region::whole(mesh);
        let a = dong_upper_bound(&pair, mesh, &set, &region, None, 1e-3).unwrap();
        let b = dong_upper_bound(&pair, mesh, &set, &region, None, 5e-4).unwrap();
        assert!(
            (a.integral_term - b.integral_term).abs() / a.integral_term < 0.01,
            "{} vs {}",
            a.integral_term,
            b.integral_term
        );
    }

    #[test]
    fn dong_on_positive_region() {
        let (s, pair) = torus_pair(1, 64);
        let mesh = s.mesh();
        let set = extract_nodal_set(&pair, mesh).unwrap();
        // triangles strictly inside the positive strip x in (0.1, 0.4)
        let tris: Vec<usize> = (0..mesh.n_triangles())
            .filter(|&t| {
                let c = mesh.centroid(t);
                c[0] > 0.1 && c[0] < 0.4
            })
            .collect();
        let region = Region::from_triangles(mesh, tris);
        let bound = dong_upper_bound(&pair, mesh, &set, &region, None, 1e-3).unwrap();
        assert_eq!(bound.extracted_length, 0.0);
        assert!(bound.total >= (2.0 * pair.lambda).sqrt() * region.area);
    }

    #[test]
    fn dong_per_pixel_dominates_on_sphere_zonal() {
        let s = Surface::unit_sphere(4);
        let pair = closed_form_eigenpair(&s, ClosedFormFamily::Sphere { l: 2, m: 0 }).unwrap();
        let mesh = s.mesh();
        let set = extract_nodal_set(&pair, mesh).unwrap();
        let d0 = 1.0 / pair.lambda.sqrt();
        let cluster = select_centers(&set, &s, d0).unwrap();
        let decomp = build_pixels(&s, &cluster, &RadiusRule::default_for(&cluster)).unwrap();
        for pixel in &decomp.pixels {
            let region = Region::from_triangles(mesh, pixel.triangles.clone());
            let bound = dong_upper_bound(&pair, mesh, &set, &region, None, 1e-3).unwrap();
            assert!(
                bound.total >= bound.extracted_length,
                "pixel violates the bound: {} < {}",
                bound.total,
                bound.extracted_length
            );
        }
    }

    #[test]
    fn density_statistics_across_torus_family() {
        // self-similar family: per-pixel sqrt(lambda) * length stays in a
        // narrow band; the geometry oracle puts the 3-ball cells near 0.4
        let mut mins = Vec::new();
        for m in [1i32, 2, 4] {
            let (s, pair) = torus_pair(m, 64 * m as usize);
            let mesh = s.mesh();
            let set = extract_nodal_set(&pair, mesh).unwrap();
            let d0 = 1.0 / pair.lambda.sqrt();
            let cluster = select_centers(&set, &s, d0).unwrap();
            let decomp = build_pixels(&s, &cluster, &RadiusRule::default_for(&cluster)).unwrap();
            let report = lower_bound_density(&pair, mesh, &set, &decomp, &cluster).unwrap();
            assert!(report.min > 0.0, "m={m}: a center pixel misses the nodal set");
            assert!(
                report.median > 0.2 && report.median < 4.0,
                "m={m}: median {}",
                report.median
            );
            mins.push(report.min);
        }
        let band = mins.iter().fold(0.0f64, |a, &b| a.max(b))
            / mins.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        assert!(band <= 4.0, "family min band {band}");
    }

    #[test]
    fn single_pixel_density_reduces_to_global() {
        let (s, pair) = torus_pair(1, 64);
        let mesh = s.mesh();
        let set = extract_nodal_set(&pair, mesh).unwrap();
        let cluster = select_centers(&set, &s, 10.0).unwrap();
        // one ball covering everything
        let decomp = build_pixels(&s, &cluster, &RadiusRule::Uniform(0.8)).unwrap();
        assert_eq!(decomp.pixels.len(), 1);
        let report = lower_bound_density(&pair, mesh, &set, &decomp, &cluster).unwrap();
        assert_relative_eq!(
            report.max,
            pair.lambda.sqrt() * set.length,
            max_relative = 1e-12
        );
    }

    #[test]
    fn scaling_fit_exact_half() {
        let samples: Vec<(f64, f64)> = (1..=8)
            .map(|m| {
                let m = m as f64;
                (4.0 * std::f64::consts::PI.powi(2) * m * m, 2.0 * m)
            })
            .collect();
        let fit = scaling_fit(&samples).unwrap();
        assert_relative_eq!(fit.slope, 0.5, epsilon = 1e-12);
        assert!(fit.residual < 1e-12);
    }

    #[test]
    fn scaling_fit_sphere_zonal_roots() {
        // lengths from Legendre roots: sum_j 2 pi sin(theta_j)
        let samples: Vec<(f64, f64)> = (2..=10u32)
            .map(|l| {
                let length: f64 = crate::spharm::legendre_roots(l)
                    .iter()
                    .map(|&x| 2.0 * std::f64::consts::PI * (1.0 - x * x).sqrt())
                    .sum();
                ((l * (l + 1)) as f64, length)
            })
            .collect();
        let fit = scaling_fit(&samples).unwrap();
        assert!((fit.slope - 0.5).abs() <= 0.03, "slope {}", fit.slope);
        // frozen from the root-sum oracle
        assert_relative_eq!(fit.slope, 0.48661, epsilon = 2e-4);
    }

    #[test]
    fn scaling_fit_rejects_degenerate_input() {
        assert!(scaling_fit(&[(1.0, 2.0)]).is_err());
        assert!(scaling_fit(&[(1.0, 2.0), (1.0, 3.0)]).is_err());
    }

    #[test]
    fn harnack_quarter_period_pixel() {
        let (s, pair) = torus_pair(1, 64);
        let mesh = s.mesh();
        let set = extract_nodal_set(&pair, mesh).unwrap();
        // one ball centered on the line x = 0 with radius a quarter period:
        // the positive component reaches the maximum at x = 1/4
        let cluster = select_centers(&set, &s, 10.0).unwrap();
        let decomp = build_pixels(&s, &cluster, &RadiusRule::Uniform(0.26)).unwrap();
        let eps = 0.5 * pair.max_abs();
        let report = harnack_ratios(&pair, mesh, &decomp, &[eps]).unwrap();
        let with_max: Vec<_> = report
            .pixel_records
            .iter()
            .filter(|r| r.contains_max)
            .collect();
        assert!(!with_max.is_empty());
        for r in with_max {
            assert_relative_eq!(r.c20, 2.0, max_relative = 1e-3);
        }
    }

    #[test]
    fn harnack_c20_tends_to_one_near_sup() {
        let (s, pair) = torus_pair(1, 64);
        let mesh = s.mesh();
        let set = extract_nodal_set(&pair, mesh).unwrap();
        let cluster = select_centers(&set, &s, 10.0).unwrap();
        let decomp = build_pixels(&s, &cluster, &RadiusRule::Uniform(0.3)).unwrap();
        let eps = 0.999 * pair.max_abs();
        let report = harnack_ratios(&pair, mesh, &decomp, &[eps]).unwrap();
        for r in report.pixel_records.iter().filter(|r| r.contains_max) {
            assert!(r.c20 >= 1.0 && r.c20 < 1.01, "c20 = {}", r.c20);
        }
    }

    #[test]
    fn harnack_c20_monotone_in_eps_on_max_component() {
        let (s, pair) = torus_pair(2, 96);
        let mesh = s.mesh();
        let set = extract_nodal_set(&pair, mesh).unwrap();
        let d0 = 1.0 / pair.lambda.sqrt();
        let cluster = select_centers(&set, &s, d0).unwrap();
        let decomp = build_pixels(&s, &cluster, &RadiusRule::default_for(&cluster)).unwrap();
        let scale = pair.max_abs();
        let grid: Vec<f64> = vec![0.2 * scale, 0.4 * scale, 0.6 * scale, 0.8 * scale];
        let report = harnack_ratios(&pair, mesh, &decomp, &grid).unwrap();
        // fix one pixel; track the component containing its max across eps
        let pid = report.pixel_records[0].pixel;
        let mut last = f64::INFINITY;
        for &eps in &grid {
            let c20 = report
                .pixel_records
                .iter()
                .find(|r| r.pixel == pid && r.eps == eps && r.contains_max)
                .map(|r| r.c20);
            if let Some(c) = c20 {
                assert!(c <= last + 1e-12, "c20 not monotone: {c} after {last}");
                last = c;
            }
        }
        // empty-set skips are flagged, not silently dropped
        assert!(report.skipped.iter().all(|&(_, e)| e > 0.0));
    }

    #[test]
    fn bernstein_plane_wave_unit_ratio() {
        let (s, pair) = torus_pair(2, 128);
        let mesh = s.mesh();
        let region = Region::whole(mesh);
        // eps = ||u||_inf reproduces the unit-amplitude, eps = 1 convention
        let eps = pair.max_abs();
        let r = bernstein_ratios(&pair, mesh, &region, eps).unwrap();
        assert_relative_eq!(r.grad_ratio, 1.0, max_relative = 0.02);
    }

    #[test]
    fn bernstein_invariant_under_joint_rescaling() {
        let (s, pair) = torus_pair(1, 48);
        let mesh = s.mesh();
        let region = Region::whole(mesh);
        let eps = 0.3 * pair.max_abs();
        let base = bernstein_ratios(&pair, mesh, &region, eps).unwrap();
        let scaled_pair = EigenPair {
            lambda: pair.lambda,
            values: pair.values.iter().map(|v| 5.0 * v).collect(),
            gradients: pair.gradients.iter().map(|g| vec3::scale(*g, 5.0)).collect(),
            source: EigenSource::Fem { residual: 0.0 },
        };
        let scaled = bernstein_ratios(&scaled_pair, mesh, &region, 5.0 * eps).unwrap();
        assert_relative_eq!(base.grad_ratio, scaled.grad_ratio, max_relative = 1e-12);
        assert_relative_eq!(base.hess_ratio, scaled.hess_ratio, max_relative = 1e-12);
    }

    #[test]
    fn bernstein_vanishes_for_huge_eps() {
        let (s, pair) = torus_pair(1, 48);
        let mesh = s.mesh();
        let region = Region::whole(mesh);
        let r = bernstein_ratios(&pair, mesh, &region, 1e6 * pair.max_abs()).unwrap();
        assert!(r.grad_ratio < 1e-4);
        assert!(r.hess_ratio < 1e-4);
    }

    #[test]
    fn eigencheck_torus_strip() {
        let (s, pair) = torus_pair(2, 128);
        let mesh = s.mesh();
        let ops = assemble_laplacian(mesh);
        let set = extract_nodal_set(&pair, mesh).unwrap();
        let domains = nodal_domains(&pair, mesh, 0.0).unwrap();
        let report = nodal_domain_eigencheck(&pair, mesh, &ops, &domains, 0, &set).unwrap();
        assert!(!report.skipped);
        // the restricted eigenfunction is the strip's first Dirichlet mode
        assert!(report.relative_gap <= 0.05, "gap {}", report.relative_gap);
        // straight boundary: Cheeger witness collapses to lambda1 vol^2,
        // near pi^2 for strips (lumped volume slightly under 1/(2m))
        assert!((report.cheeger_lhs - std::f64::consts::PI.powi(2)).abs() < 1.2);
        assert_relative_eq!(report.cheeger_lhs, report.cheeger_rhs, max_relative = 0.05);
    }

    #[test]
    fn eigencheck_whole_surface_rejected() {
        let (s, pair) = torus_pair(1, 32);
        let mesh = s.mesh();
        let ops = assemble_laplacian(mesh);
        let set = extract_nodal_set(&pair, mesh).unwrap();
        let fake = NodalDomainSet {
            labels: vec![Some(0); mesh.n_vertices()],
            count: 1,
            volumes: vec![mesh.total_area()],
            signs: vec![1],
            epsilon: 0.0,
        };
        assert!(nodal_domain_eigencheck(&pair, mesh, &ops, &fake, 0, &set).is_err());
    }

    #[test]
    fn eigencheck_lambda_area_growth() {
        // lambda_1 * area = 2 pi^2 m grows with m; lambda_1 * area^2 stays
        // near pi^2 (the Cheeger floor scaling)
        let mut products = Vec::new();
        for m in [1i32, 2, 4] {
            let (s, pair) = torus_pair(m, 64 * m as usize);
            let mesh = s.mesh();
            let ops = assemble_laplacian(mesh);
            let set = extract_nodal_set(&pair, mesh).unwrap();
            let domains = nodal_domains(&pair, mesh, 0.0).unwrap();
            let r = nodal_domain_eigencheck(&pair, mesh, &ops, &domains, 0, &set).unwrap();
            products.push((r.lambda1_dirichlet * r.volume, r.cheeger_lhs));
        }
        assert!(products[1].0 > products[0].0 && products[2].0 > products[1].0);
        for (_, lhs) in products {
            assert!((lhs - std::f64::consts::PI.powi(2)).abs() < 1.2, "lhs {lhs}");
        }
    }

    #[test]
    fn front_zeros_transverse_line() {
        // synthetic straight front through the strips of sin(2 pi 4 x):
        // length 0.5 crosses 4 zero lines
        let (s, pair) = torus_pair(4, 256);
        let mesh = s.mesh();
        let n = 512;
        let mut points = Vec::new();
        let mut tris = Vec::new();
        let mut arclength = Vec::new();
        for i in 0..=n {
            let x = 0.0625 + 0.5 * i as f64 / n as f64;
            let p = [x, 0.37, 0.0];
            points.push(p);
            tris.push(locate_triangle(mesh, p));
            arclength.push(0.5 * i as f64 / n as f64);
        }
        let front = FrontArc {
            ball: 0,
            pixel: 0,
            points,
            point_triangles: tris,
            arclength,
            h: vec![0.0; n + 1],
            closed: false,
        };
        let report = front_restriction_zeros(&pair, mesh, &front).unwrap();
        assert!(
            (3..=5).contains(&report.zero_count),
            "zero count {}",
            report.zero_count
        );
    }

    #[test]
    fn front_zeros_inside_one_domain_and_closed_parity() {
        let (s, pair) = torus_pair(2, 128);
        let mesh = s.mesh();
        let set = extract_nodal_set(&pair, mesh).unwrap();
        let cluster = select_centers(&set, &s, 10.0).unwrap();
        let decomp = build_pixels(&s, &cluster, &RadiusRule::Uniform(0.3)).unwrap();
        for front in &decomp.fronts {
            if !front.closed {
                continue;
            }
            let report = front_restriction_zeros(&pair, mesh, front).unwrap();
            assert_eq!(report.zero_count % 2, 0, "parity on a closed loop");
        }
        // a small circle strictly inside the strip (0, 1/4) sees no zeros
        let mut points = Vec::new();
        let mut tris = Vec::new();
        let mut arclength = Vec::new();
        let n = 128;
        let r = 0.05;
        for i in 0..=n {
            let t = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            let p = [0.125 + r * t.cos(), 0.5 + r * t.sin(), 0.0];
            points.push(p);
            tris.push(locate_triangle(mesh, p));
            arclength.push(r * t);
        }
        let front = FrontArc {
            ball: 0,
            pixel: 0,
            points,
            point_triangles: tris,
            arclength,
            h: vec![0.0; n + 1],
            closed: true,
        };
        let report = front_restriction_zeros(&pair, mesh, &front).unwrap();
        assert_eq!(report.zero_count, 0);
    }
}
