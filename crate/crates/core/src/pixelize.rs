//! Geodesic pixel decompositions: a net of centers on the nodal set,
//! geodesic balls around them, overlap-signature cells, and the boundary
//! arcs (elementary wave fronts) with their curvature functionals.

use std::collections::BTreeMap;
use std::path::Path;

use crate::mesh::TriangleMesh;
use crate::nodal::NodalSet;
use crate::riccati::geodesic_circle_curvature;
use crate::surface::{sphere_distance, torus_distance, Surface, SurfaceKind, SurfacePoint};
use crate::vec3::{self, V3};
use crate::{Error, Result};

/// A point of the center net, anchored to the triangle that produced it.
#[derive(Debug, Clone, Copy)]
pub struct Center {
    pub position: V3,
    pub triangle: usize,
}

/// Centers on the nodal set at target spacing d0 (single generation).
#[derive(Debug, Clone)]
pub struct CenterCluster {
    pub centers: Vec<Center>,
    pub spacing: f64,
    pub generation: u32,
}

/// Greedy net on the nodal polylines: walk segments in triangle order with
/// step `spacing / 16`, accepting any point at geodesic distance
/// >= spacing - step from all accepted centers. The step slack absorbs the
/// quantization of candidates to mesh sub-points, so pairwise separation is
/// spacing (1 - 1/16) and every nodal point lies within spacing of a center.
pub fn select_centers(set: &NodalSet, surface: &Surface, spacing: f64) -> Result<CenterCluster> {
    if set.is_empty() {
        return Err(Error::domain("cannot place centers on an empty nodal set"));
    }
    if !(spacing > 0.0) {
        return Err(Error::domain("spacing must be positive"));
    }
    let mut centers: Vec<Center> = Vec::new();
    let step = spacing / 16.0;
    let accept_at = spacing - step;
    for seg in &set.segments {
        let len = seg.length();
        let n_steps = (len / step).ceil().max(1.0) as usize;
        for i in 0..=n_steps {
            let p = vec3::lerp(seg.endpoints[0], seg.endpoints[1], i as f64 / n_steps as f64);
            let far_enough = centers
                .iter()
                .all(|c| center_distance(surface, c.position, p) >= accept_at);
            if far_enough {
                centers.push(Center {
                    position: p,
                    triangle: seg.triangle,
                });
            }
        }
    }
    Ok(CenterCluster {
        centers,
        spacing,
        generation: 0,
    })
}

/// Geodesic distance between ambient points; Euclidean chord (a lower bound)
/// on generic meshes, which keeps greedy acceptance conservative.
fn center_distance(surface: &Surface, p: V3, q: V3) -> f64 {
    match surface.kind() {
        SurfaceKind::UnitSphere => sphere_distance(vec3::normalize(p), vec3::normalize(q)),
        SurfaceKind::FlatTorus { period_u, period_v } => {
            torus_distance(p, q, period_u, period_v)
        }
        SurfaceKind::Generic => vec3::dist(p, q),
    }
}

#[derive(Debug, Clone)]
pub enum RadiusRule {
    Uniform(f64),
    PerCenter(Vec<f64>),
}

impl RadiusRule {
    /// Default rule: uniform radius 1.2 x spacing.
    pub fn default_for(cluster: &CenterCluster) -> RadiusRule {
        RadiusRule::Uniform(1.2 * cluster.spacing)
    }

    fn radii(&self, n: usize) -> Result<Vec<f64>> {
        let radii = match self {
            RadiusRule::Uniform(r) => vec![*r; n],
            RadiusRule::PerCenter(rs) => {
                if rs.len() != n {
                    return Err(Error::domain(format!(
                        "radius list has {} entries for {n} centers",
                        rs.len()
                    )));
                }
                rs.clone()
            }
        };
        if radii.iter().any(|&r| !(r > 0.0)) {
            return Err(Error::domain("all ball radii must be positive"));
        }
        Ok(radii)
    }
}

/// A geodesic ball of the decomposition with distance queries.
#[derive(Debug, Clone)]
pub struct BallField {
    pub center: V3,
    pub radius: f64,
    source: SurfacePoint,
    /// Marching field for generic meshes; closed-form kinds answer on the fly.
    field: Option<Vec<f64>>,
}

impl BallField {
    fn build(surface: &Surface, center: &Center, radius: f64) -> Result<BallField> {
        let mesh = surface.mesh();
        let bary = mesh.barycentric(center.triangle, center.position);
        let bary = [
            bary[0].clamp(0.0, 1.0),
            bary[1].clamp(0.0, 1.0),
            bary[2].clamp(0.0, 1.0),
        ];
        let sum = bary[0] + bary[1] + bary[2];
        let source = SurfacePoint::OnTriangle {
            tri: center.triangle,
            bary: [bary[0] / sum, bary[1] / sum, bary[2] / sum],
        };
        let field = match surface.kind() {
            SurfaceKind::Generic => Some(surface.geodesic_distance(&source)?.values),
            _ => None,
        };
        Ok(BallField {
            center: center.position,
            radius,
            source,
            field,
        })
    }

    pub fn distance_to_vertex(&self, surface: &Surface, v: usize) -> f64 {
        match &self.field {
            Some(f) => f[v],
            None => center_distance(surface, self.center, surface.mesh().vertex(v)),
        }
    }

    /// Distance at an arbitrary point inside triangle `tri`.
    pub fn distance_to_point(&self, surface: &Surface, tri: usize, p: V3) -> f64 {
        match &self.field {
            Some(f) => {
                let t = surface.mesh().triangle(tri);
                let b = surface.mesh().barycentric(tri, p);
                b[0] * f[t[0]] + b[1] * f[t[1]] + b[2] * f[t[2]]
            }
            None => center_distance(surface, self.center, p),
        }
    }
}

/// Boundary arc of a pixel lying on one ball's geodesic circle, with mean
/// curvature samples along it.
#[derive(Debug, Clone)]
pub struct FrontArc {
    pub ball: usize,
    pub pixel: usize,
    /// Ordered polyline points.
    pub points: Vec<V3>,
    /// Triangle containing each point (the segment that contributed it).
    pub point_triangles: Vec<usize>,
    /// Cumulative arclength per point.
    pub arclength: Vec<f64>,
    /// Geodesic-circle curvature h at each point.
    pub h: Vec<f64>,
    pub closed: bool,
}

impl FrontArc {
    pub fn length(&self) -> f64 {
        *self.arclength.last().unwrap_or(&0.0)
    }
}

#[derive(Debug, Clone)]
pub struct Pixel {
    /// Sorted ball ids whose intersection forms this cell.
    pub signature: Vec<usize>,
    pub triangles: Vec<usize>,
    pub area: f64,
    /// Indices into `PixelDecomposition::fronts`.
    pub fronts: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct PixelDecomposition {
    pub balls: Vec<BallField>,
    pub pixels: Vec<Pixel>,
    /// Pixel id per triangle; `None` when no ball covers the triangle.
    pub pixel_of_triangle: Vec<Option<usize>>,
    pub fronts: Vec<FrontArc>,
    /// Triangles covered by no ball.
    pub uncovered: Vec<usize>,
    /// Pixels whose signature exceeds n + 1 = 3 balls (reported, not hidden).
    pub signature_size_violations: Vec<usize>,
}

/// Build the overlap-signature decomposition. A triangle belongs to a ball
/// when all three corners are within the radius; each triangle then carries
/// exactly one signature.
pub fn build_pixels(
    surface: &Surface,
    cluster: &CenterCluster,
    radius_rule: &RadiusRule,
) -> Result<PixelDecomposition> {
    let mesh = surface.mesh();
    let radii = radius_rule.radii(cluster.centers.len())?;
    let mut balls = Vec::with_capacity(cluster.centers.len());
    for (c, &r) in cluster.centers.iter().zip(&radii) {
        balls.push(BallField::build(surface, c, r)?);
    }

    // one pass per ball: vertex distances once into a buffer, then triangle
    // coverage and the circle isocontour off the same values
    let mut signature: Vec<Vec<usize>> = vec![Vec::new(); mesh.n_triangles()];
    let mut circle_segs: Vec<Vec<(usize, [V3; 2], [(usize, usize); 2])>> =
        vec![Vec::new(); balls.len()];
    let mut dist_buf = vec![0.0f64; mesh.n_vertices()];
    for (i, ball) in balls.iter().enumerate() {
        for (v, d) in dist_buf.iter_mut().enumerate() {
            *d = ball.distance_to_vertex(surface, v);
        }
        for t in 0..mesh.n_triangles() {
            let tri = mesh.triangle(t);
            let d = [dist_buf[tri[0]], dist_buf[tri[1]], dist_buf[tri[2]]];
            if d.iter().all(|&x| x <= ball.radius) {
                signature[t].push(i);
            }
            // sign-change edges of {d = r} in this triangle
            let f = [d[0] - ball.radius, d[1] - ball.radius, d[2] - ball.radius];
            if f.iter().all(|&x| x > 0.0) || f.iter().all(|&x| x <= 0.0) {
                continue;
            }
            let corners = mesh.triangle_corners(t);
            let mut pts = Vec::with_capacity(2);
            for k in 0..3 {
                let j = (k + 1) % 3;
                if (f[k] > 0.0) != (f[j] > 0.0) {
                    let sfrac = f[k] / (f[k] - f[j]);
                    pts.push((
                        (tri[k].min(tri[j]), tri[k].max(tri[j])),
                        vec3::lerp(corners[k], corners[j], sfrac),
                    ));
                }
            }
            if pts.len() == 2 {
                circle_segs[i].push((t, [pts[0].1, pts[1].1], [pts[0].0, pts[1].0]));
            }
        }
    }

    let mut by_signature: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
    let mut uncovered = Vec::new();
    for (t, sig) in signature.iter().enumerate() {
        if sig.is_empty() {
            uncovered.push(t);
        } else {
            by_signature.entry(sig.clone()).or_default().push(t);
        }
    }

    let mut pixels: Vec<Pixel> = Vec::with_capacity(by_signature.len());
    let mut pixel_of_triangle: Vec<Option<usize>> = vec![None; mesh.n_triangles()];
    let mut sig_index: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
    let mut violations = Vec::new();
    for (sig, tris) in by_signature {
        let id = pixels.len();
        for &t in &tris {
            pixel_of_triangle[t] = Some(id);
        }
        if sig.len() > 3 {
            violations.push(id);
        }
        sig_index.insert(sig.clone(), id);
        let area = tris.iter().map(|&t| mesh.area(t)).sum();
        pixels.push(Pixel {
            signature: sig,
            triangles: tris,
            area,
            fronts: Vec::new(),
        });
    }

    // fronts: the circle {d_i = r_i} split by pointwise overlap signature
    let curvature = surface.curvature_field()?;
    let mut fronts: Vec<FrontArc> = Vec::new();
    for (i, ball) in balls.iter().enumerate() {
        let segments = std::mem::take(&mut circle_segs[i]);
        // group by the pointwise signature at the segment midpoint
        let mut grouped: BTreeMap<Vec<usize>, Vec<(usize, [V3; 2], [(usize, usize); 2])>> =
            BTreeMap::new();
        for (tri, endpoints, keys) in segments {
            let mid = vec3::lerp(endpoints[0], endpoints[1], 0.5);
            let mut sig: Vec<usize> = balls
                .iter()
                .enumerate()
                .filter(|(_, b)| {
                    b.distance_to_point(surface, tri, mid) <= b.radius + 1e-12
                })
                .map(|(j, _)| j)
                .collect();
            sig.sort_unstable();
            if !sig.contains(&i) {
                continue;
            }
            grouped.entry(sig).or_default().push((tri, endpoints, keys));
        }
        for (sig, segs) in grouped {
            let Some(&pixel_id) = sig_index.get(&sig) else {
                // the continuum cell is too thin to own a whole triangle
                continue;
            };
            for chain in chain_segments(&segs, |p, anchor| mesh.unwrap_point(p, anchor)) {
                let closed = chain.len() > 2 && chain.first().map(|c| c.0) == chain.last().map(|c| c.0);
                let points: Vec<V3> = chain.iter().map(|c| c.0).collect();
                let point_triangles: Vec<usize> = chain.iter().map(|c| c.1).collect();
                let mut arclength = vec![0.0];
                for w in points.windows(2) {
                    arclength.push(arclength.last().unwrap() + vec3::dist(w[0], w[1]));
                }
                let h = points
                    .iter()
                    .map(|&p| front_curvature(surface, ball, &curvature, p))
                    .collect::<Result<Vec<f64>>>()?;
                let id = fronts.len();
                pixels[pixel_id].fronts.push(id);
                fronts.push(FrontArc {
                    ball: i,
                    pixel: pixel_id,
                    points,
                    point_triangles,
                    arclength,
                    h,
                    closed,
                });
            }
        }
    }

    Ok(PixelDecomposition {
        balls,
        pixels,
        pixel_of_triangle,
        fronts,
        uncovered,
        signature_size_violations: violations,
    })
}

/// Chain contour segments into ordered polylines via shared edge keys.
/// `unwrap` maps a point to the period copy nearest an anchor so chains stay
/// continuous across periodic seams.
fn chain_segments(
    segs: &[(usize, [V3; 2], [(usize, usize); 2])],
    unwrap: impl Fn(V3, V3) -> V3,
) -> Vec<Vec<(V3, usize)>> {
    type Key = (usize, usize);
    let mut adjacency: BTreeMap<Key, Vec<usize>> = BTreeMap::new();
    for (i, (_, _, keys)) in segs.iter().enumerate() {
        adjacency.entry(keys[0]).or_default().push(i);
        adjacency.entry(keys[1]).or_default().push(i);
    }
    let mut used = vec![false; segs.len()];
    let mut chains = Vec::new();
    for start in 0..segs.len() {
        if used[start] {
            continue;
        }
        // walk both directions from the starting segment
        let mut chain: std::collections::VecDeque<(V3, usize)> = std::collections::VecDeque::new();
        chain.push_back((segs[start].1[0], segs[start].0));
        chain.push_back((unwrap(segs[start].1[1], segs[start].1[0]), segs[start].0));
        used[start] = true;
        let mut terminal = [segs[start].2[0], segs[start].2[1]];
        for dir in 0..2 {
            let mut key = segs[start].2[dir];
            loop {
                let next = adjacency
                    .get(&key)
                    .and_then(|ids| ids.iter().find(|&&i| !used[i]).copied());
                let Some(i) = next else { break };
                used[i] = true;
                let (p, far_key) = if segs[i].2[0] == key {
                    (segs[i].1[1], segs[i].2[1])
                } else {
                    (segs[i].1[0], segs[i].2[0])
                };
                if dir == 1 {
                    let anchor = chain.back().unwrap().0;
                    chain.push_back((unwrap(p, anchor), segs[i].0));
                } else {
                    let anchor = chain.front().unwrap().0;
                    chain.push_front((unwrap(p, anchor), segs[i].0));
                }
                key = far_key;
            }
            terminal[dir] = key;
        }
        // a loop ends where it started: close the polyline explicitly
        if chain.len() > 2 && terminal[0] == terminal[1] {
            let (first, tri) = *chain.front().unwrap();
            let anchor = chain.back().unwrap().0;
            chain.push_back((unwrap(first, anchor), tri));
        }
        chains.push(chain.into_iter().collect());
    }
    chains
}

/// Geodesic-circle curvature at a front sample: the Riccati solution at the
/// ball radius, with the curvature profile along the ray approximated by a
/// linear blend between the center and sample values.
fn front_curvature(
    surface: &Surface,
    ball: &BallField,
    curvature: &[f64],
    sample: V3,
) -> Result<f64> {
    let r = ball.radius;
    let r0 = (r * 1e-4).max(1e-12);
    match surface.kind() {
        SurfaceKind::UnitSphere => geodesic_circle_curvature(|_| 1.0, r, r0, None),
        SurfaceKind::FlatTorus { .. } => geodesic_circle_curvature(|_| 0.0, r, r0, None),
        SurfaceKind::Generic => {
            let mesh = surface.mesh();
            let k_center = match ball.source {
                SurfacePoint::OnTriangle { tri, bary } => {
                    let t = mesh.triangle(tri);
                    bary[0] * curvature[t[0]] + bary[1] * curvature[t[1]] + bary[2] * curvature[t[2]]
                }
                SurfacePoint::Vertex(v) => curvature[v],
                SurfacePoint::Ambient(_) => 0.0,
            };
            // nearest vertex's curvature for the sample end
            let mut k_sample = k_center;
            let mut best = f64::INFINITY;
            for v in 0..mesh.n_vertices() {
                let d = vec3::dist(mesh.vertex(v), sample);
                if d < best {
                    best = d;
                    k_sample = curvature[v];
                }
            }
            geodesic_circle_curvature(
                move |rr| k_center + (k_sample - k_center) * (rr / r),
                r,
                r0,
                None,
            )
        }
    }
}

/// Front tension t(F): the concentration limit of the tension Rayleigh
/// quotient, max over samples of |dh/ds|^2 / (h^2 + eps^2) with
/// eps = 1e-12 max|h|.
pub fn front_tension(arc: &FrontArc) -> Result<f64> {
    front_tension_of_samples(&arc.arclength, &arc.h, arc.closed)
}

/// Same functional on raw (arclength, h) samples; used directly by tests
/// with synthetic profiles. On closed arcs the last sample must repeat the
/// first; differences wrap around the loop.
pub fn front_tension_of_samples(arclength: &[f64], h: &[f64], closed: bool) -> Result<f64> {
    let n = h.len();
    if n < 3 || arclength.len() != n {
        return Err(Error::domain("front tension needs at least 3 samples"));
    }
    let max_h = h.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let eps = 1e-12 * max_h;

    // unique sample count and the gap following each unique sample
    let m = if closed { n - 1 } else { n };
    let gap_after = |j: usize| -> f64 {
        if j + 1 < n {
            arclength[j + 1] - arclength[j]
        } else {
            0.0
        }
    };

    let mut t = 0.0f64;
    for i in 0..m {
        if !closed && (i == 0 || i == m - 1) {
            continue;
        }
        let prev = if i == 0 { m - 1 } else { i - 1 };
        let next = if i + 1 == m { 0 } else { i + 1 };
        let ds = gap_after(prev) + gap_after(i);
        if ds <= 0.0 {
            continue;
        }
        let d = (h[next] - h[prev]) / ds;
        let denom = h[i] * h[i] + eps * eps;
        if denom > 0.0 {
            t = t.max(d * d / denom);
        } else if d != 0.0 {
            return Err(Error::domain("front tension degenerate: h = 0 with dh/ds != 0"));
        }
    }
    Ok(t)
}

/// Pixel curvature ratio r(P): max over pixel triangles of
/// |grad R|^2 / (|R|^3 + eps^3), with R the scalar curvature sampled at
/// vertices and eps = 1e-9 max|R|.
pub fn pixel_curvature_ratio(
    mesh: &TriangleMesh,
    pixel_triangles: &[usize],
    scalar_curvature: &[f64],
) -> Result<f64> {
    if pixel_triangles.is_empty() {
        return Err(Error::domain("pixel has no triangles"));
    }
    let max_r = scalar_curvature.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let eps = 1e-9 * max_r;
    let mut best = 0.0f64;
    for &t in pixel_triangles {
        let tri = mesh.triangle(t);
        let grad = crate::spectral::triangle_gradient(mesh, scalar_curvature, t);
        let g2 = vec3::dot(grad, grad);
        if g2 == 0.0 {
            continue;
        }
        let r_mid =
            (scalar_curvature[tri[0]] + scalar_curvature[tri[1]] + scalar_curvature[tri[2]]) / 3.0;
        best = best.max(g2 / (r_mid.abs().powi(3) + eps * eps * eps));
    }
    Ok(best)
}

/// Report of an (eta, mu) admissibility check.
#[derive(Debug, Clone)]
pub struct ConditionReport {
    pub satisfied: bool,
    /// Front indices whose tension exceeded its eta.
    pub failed_fronts: Vec<usize>,
    /// Whether r(P) <= mu failed.
    pub curvature_failed: bool,
}

/// `t(F_l) <= eta_l` for every front and `r(P) <= mu` (inclusive).
pub fn check_condition(front_tensions: &[f64], etas: &[f64], r_pixel: f64, mu: f64) -> Result<ConditionReport> {
    if front_tensions.len() != etas.len() {
        return Err(Error::domain(format!(
            "{} tensions against {} thresholds",
            front_tensions.len(),
            etas.len()
        )));
    }
    let failed_fronts: Vec<usize> = front_tensions
        .iter()
        .zip(etas)
        .enumerate()
        .filter(|(_, (t, eta))| *t > *eta)
        .map(|(i, _)| i)
        .collect();
    let curvature_failed = r_pixel > mu;
    Ok(ConditionReport {
        satisfied: failed_fronts.is_empty() && !curvature_failed,
        failed_fronts,
        curvature_failed,
    })
}

impl PixelDecomposition {
    /// Pixels holding at least one net center (the cells the per-pixel
    /// density statistics run over).
    pub fn pixels_with_centers(&self, cluster: &CenterCluster) -> Vec<usize> {
        let mut has_center = vec![false; self.pixels.len()];
        for c in &cluster.centers {
            if let Some(id) = self.pixel_of_triangle[c.triangle] {
                has_center[id] = true;
            }
        }
        (0..self.pixels.len()).filter(|&i| has_center[i]).collect()
    }

    /// JSON export of the decomposition: centers, radii, signatures, areas,
    /// per-front tension and per-pixel curvature ratio.
    pub fn write_json(
        &self,
        surface: &Surface,
        path: impl AsRef<Path>,
    ) -> Result<()> {
        let mesh = surface.mesh();
        let curvature: Vec<f64> = surface
            .curvature_field()?
            .iter()
            .map(|k| 2.0 * k)
            .collect();
        let balls: Vec<serde_json::Value> = self
            .balls
            .iter()
            .map(|b| {
                serde_json::json!({
                    "center": b.center,
                    "radius": b.radius,
                })
            })
            .collect();
        let pixels: Vec<serde_json::Value> = self
            .pixels
            .iter()
            .map(|p| {
                let r = pixel_curvature_ratio(mesh, &p.triangles, &curvature).unwrap_or(0.0);
                let tensions: Vec<f64> = p
                    .fronts
                    .iter()
                    .map(|&f| front_tension(&self.fronts[f]).unwrap_or(0.0))
                    .collect();
                serde_json::json!({
                    "signature": p.signature,
                    "n_triangles": p.triangles.len(),
                    "area": p.area,
                    "front_tensions": tensions,
                    "curvature_ratio": r,
                })
            })
            .collect();
        let doc = serde_json::json!({
            "balls": balls,
            "pixels": pixels,
            "uncovered_triangles": self.uncovered.len(),
            "signature_size_violations": self.signature_size_violations.len(),
        });
        std::fs::write(path, serde_json::to_string_pretty(&doc).unwrap())?;
        Ok(())
    }
}
