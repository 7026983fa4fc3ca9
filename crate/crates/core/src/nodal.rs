//! Nodal sets of eigenfunctions: marching-triangles extraction, length
//! accounting, nodal domains, ball-density checks, tubular neighborhoods and
//! singular points.

use std::collections::BTreeMap;
use std::collections::VecDeque;
use std::io::Write as _;
use std::path::Path;

use crate::mesh::TriangleMesh;
use crate::region::Region;
use crate::spectral::EigenPair;
use crate::surface::{sphere_distance, Surface, SurfaceKind, SurfacePoint};
use crate::vec3::{self, V3};
use crate::{Error, Result};

/// Vertex-pair key of the mesh edge an endpoint lies on.
pub type EdgeKey = (usize, usize);

#[derive(Debug, Clone)]
pub struct NodalSegment {
    pub triangle: usize,
    /// Endpoints in unwrapped coordinates local to the triangle.
    pub endpoints: [V3; 2],
    /// The sign-change edges carrying the endpoints.
    pub edges: [EdgeKey; 2],
}

impl NodalSegment {
    pub fn length(&self) -> f64 {
        vec3::dist(self.endpoints[0], self.endpoints[1])
    }

    pub fn midpoint(&self) -> V3 {
        vec3::lerp(self.endpoints[0], self.endpoints[1], 0.5)
    }
}

/// Polyline graph of zero crossings.
#[derive(Debug, Clone)]
pub struct NodalSet {
    pub segments: Vec<NodalSegment>,
    /// Total H^1 measure.
    pub length: f64,
    /// Segment ids per triangle.
    pub per_triangle: BTreeMap<usize, Vec<usize>>,
    /// Segment ids incident to each edge zero-point.
    pub graph: BTreeMap<EdgeKey, Vec<usize>>,
    /// Vertices whose exact zero was perturbed before extraction.
    pub perturbed_vertices: Vec<usize>,
}

impl NodalSet {
    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Connected components of the segment graph (closed curves and arcs).
    pub fn component_count(&self) -> usize {
        let n = self.segments.len();
        let mut parent: Vec<usize> = (0..n).collect();
        for ids in self.graph.values() {
            for w in ids.windows(2) {
                let (a, b) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
                if a != b {
                    parent[a] = b;
                }
            }
        }
        let mut roots: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
        roots.sort_unstable();
        roots.dedup();
        roots.len()
    }

    /// CSV export: one `x1,y1,z1,x2,y2,z2` row per segment.
    pub fn write_segments_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "x1,y1,z1,x2,y2,z2")?;
        for s in &self.segments {
            let [p, q] = s.endpoints;
            writeln!(
                f,
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                p[0], p[1], p[2], q[0], q[1], q[2]
            )?;
        }
        Ok(())
    }

    /// SVG chart export: unit torus chart or equirectangular sphere chart.
    pub fn write_svg_chart(&self, surface: &Surface, path: impl AsRef<Path>) -> Result<()> {
        let svg = self.svg_chart(surface)?;
        std::fs::write(path, svg)?;
        Ok(())
    }

    pub fn svg_chart(&self, surface: &Surface) -> Result<String> {
        let size = 512.0;
        let chart = |p: V3| -> Result<(f64, f64)> {
            match surface.kind() {
                SurfaceKind::FlatTorus { period_u, period_v } => Ok((
                    p[0].rem_euclid(period_u) / period_u * size,
                    p[1].rem_euclid(period_v) / period_v * size,
                )),
                SurfaceKind::UnitSphere => {
                    let q = vec3::normalize(p);
                    let theta = q[2].clamp(-1.0, 1.0).acos();
                    let phi = q[1].atan2(q[0]) + std::f64::consts::PI;
                    Ok((
                        phi / (2.0 * std::f64::consts::PI) * size,
                        theta / std::f64::consts::PI * size,
                    ))
                }
                SurfaceKind::Generic => Err(Error::domain(
                    "SVG charts need a parameterizable surface (sphere or torus)",
                )),
            }
        };
        let mut out = String::new();
        out.push_str(&format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{size}\" height=\"{size}\" viewBox=\"0 0 {size} {size}\">\n<rect width=\"{size}\" height=\"{size}\" fill=\"white\"/>\n"
        ));
        for s in &self.segments {
            let (x1, y1) = chart(s.endpoints[0])?;
            let (x2, y2) = chart(s.endpoints[1])?;
            // skip seam-crossing chart jumps; the wrapped copy draws the rest
            if (x1 - x2).abs() > size / 2.0 || (y1 - y2).abs() > size / 2.0 {
                continue;
            }
            out.push_str(&format!(
                "<line x1=\"{x1:.3}\" y1=\"{y1:.3}\" x2=\"{x2:.3}\" y2=\"{y2:.3}\" stroke=\"black\" stroke-width=\"1\"/>\n"
            ));
        }
        out.push_str("</svg>\n");
        Ok(out)
    }
}

fn find(parent: &mut Vec<usize>, i: usize) -> usize {
    if parent[i] != i {
        let r = find(parent, parent[i]);
        parent[i] = r;
    }
    parent[i]
}

/// Marching-triangles extraction of the zero set. Exact-zero vertices are
/// perturbed by +1e-12 * ||u||_inf first (recorded in the result).
pub fn extract_nodal_set(pair: &EigenPair, mesh: &TriangleMesh) -> Result<NodalSet> {
    let max_abs = pair.max_abs();
    if max_abs == 0.0 {
        return Err(Error::domain("cannot extract the nodal set of the zero function"));
    }
    let eps = 1e-12 * max_abs;
    let mut values = pair.values.clone();
    let mut perturbed = Vec::new();
    for (i, v) in values.iter_mut().enumerate() {
        if *v == 0.0 {
            *v = eps;
            perturbed.push(i);
        }
    }

    let mut segments = Vec::new();
    let mut per_triangle: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut graph: BTreeMap<EdgeKey, Vec<usize>> = BTreeMap::new();
    let mut length = 0.0;

    for t in 0..mesh.n_triangles() {
        let tri = mesh.triangle(t);
        let corners = mesh.triangle_corners(t);
        let f = [values[tri[0]], values[tri[1]], values[tri[2]]];
        let mut pts = Vec::with_capacity(2);
        for k in 0..3 {
            let j = (k + 1) % 3;
            if (f[k] > 0.0) != (f[j] > 0.0) {
                let s = f[k] / (f[k] - f[j]);
                let p = vec3::lerp(corners[k], corners[j], s);
                let key = (tri[k].min(tri[j]), tri[k].max(tri[j]));
                pts.push((key, p));
            }
        }
        if pts.len() == 2 {
            let id = segments.len();
            let seg = NodalSegment {
                triangle: t,
                endpoints: [pts[0].1, pts[1].1],
                edges: [pts[0].0, pts[1].0],
            };
            length += seg.length();
            per_triangle.entry(t).or_default().push(id);
            graph.entry(pts[0].0).or_default().push(id);
            graph.entry(pts[1].0).or_default().push(id);
            segments.push(seg);
        }
    }

    Ok(NodalSet {
        segments,
        length,
        per_triangle,
        graph,
        perturbed_vertices: perturbed,
    })
}

/// Total length, optionally clipped to a region. `region_values` is the
/// per-vertex field the region was built from (needed to clip inside
/// partially covered triangles).
pub fn nodal_length(
    set: &NodalSet,
    mesh: &TriangleMesh,
    restrict_to: Option<(&Region, Option<&[f64]>)>,
) -> f64 {
    match restrict_to {
        None => set.length,
        Some((region, values)) => {
            // region-local: look up segments per region triangle
            let mut total = 0.0;
            for &t in &region.full {
                if let Some(ids) = set.per_triangle.get(&t) {
                    for &id in ids {
                        total += set.segments[id].length();
                    }
                }
            }
            for p in &region.partial {
                if let Some(ids) = set.per_triangle.get(&p.tri) {
                    for &id in ids {
                        let seg = &set.segments[id];
                        total += region.clip_segment_length(
                            mesh,
                            values,
                            seg.triangle,
                            seg.endpoints[0],
                            seg.endpoints[1],
                        );
                    }
                }
            }
            total
        }
    }
}

/// Connected components of `{u > eps}` and `{u < -eps}` over vertex
/// adjacency. Vertices with `|u| <= eps` join no domain.
#[derive(Debug, Clone)]
pub struct NodalDomainSet {
    /// Domain id per vertex; `None` for the eps-tube.
    pub labels: Vec<Option<usize>>,
    pub count: usize,
    /// Lumped area per domain.
    pub volumes: Vec<f64>,
    /// Sign per domain (+1 / -1).
    pub signs: Vec<i8>,
    pub epsilon: f64,
}

pub fn nodal_domains(pair: &EigenPair, mesh: &TriangleMesh, epsilon: f64) -> Result<NodalDomainSet> {
    if epsilon < 0.0 {
        return Err(Error::domain("epsilon must be nonnegative"));
    }
    if epsilon >= pair.max_abs() {
        return Err(Error::domain(format!(
            "epsilon {epsilon} at or above ||u||_inf = {}; no domains remain",
            pair.max_abs()
        )));
    }
    let n = mesh.n_vertices();
    let areas = mesh.vertex_areas();
    let mut labels: Vec<Option<usize>> = vec![None; n];
    let mut volumes = Vec::new();
    let mut signs = Vec::new();

    for start in 0..n {
        if labels[start].is_some() || pair.values[start].abs() <= epsilon {
            continue;
        }
        let id = volumes.len();
        let sign = if pair.values[start] > 0.0 { 1i8 } else { -1 };
        let mut volume = 0.0;
        let mut queue = VecDeque::new();
        labels[start] = Some(id);
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            volume += areas[v];
            for &w in mesh.vertex_neighbors(v) {
                if labels[w].is_none()
                    && pair.values[w].abs() > epsilon
                    && (pair.values[w] > 0.0) == (sign > 0)
                {
                    labels[w] = Some(id);
                    queue.push_back(w);
                }
            }
        }
        volumes.push(volume);
        signs.push(sign);
    }

    Ok(NodalDomainSet {
        count: volumes.len(),
        labels,
        volumes,
        signs,
        epsilon,
    })
}

/// Result of the every-ball-holds-a-zero check.
#[derive(Debug, Clone)]
pub struct ZeroBallReport {
    pub holds: bool,
    pub radius: f64,
    pub centers_tested: usize,
    /// Center with the largest margin (violating when margin > 0).
    pub worst_center: V3,
    /// min distance to the nodal set minus the radius, at the worst center.
    pub worst_margin: f64,
}

/// Test whether every sampled geodesic ball of the given radius meets the
/// nodal set. Centers are sampled deterministically: half at the vertices of
/// largest |u| (where violations live), half evenly spread by index.
pub fn zero_in_every_ball(
    pair: &EigenPair,
    surface: &Surface,
    radius: f64,
    sample_centers: usize,
) -> Result<ZeroBallReport> {
    if radius <= 0.0 {
        return Err(Error::domain("ball radius must be positive"));
    }
    let mesh = surface.mesh();
    let set = extract_nodal_set(pair, mesh)?;

    let n = mesh.n_vertices();
    let k = sample_centers.max(2).min(n);
    let mut centers: Vec<usize> = Vec::with_capacity(k);
    let mut by_amp: Vec<usize> = (0..n).collect();
    by_amp.sort_by(|&a, &b| {
        pair.values[b]
            .abs()
            .partial_cmp(&pair.values[a].abs())
            .unwrap()
            .then(a.cmp(&b))
    });
    centers.extend(by_amp.iter().take(k / 2).copied());
    for i in 0..(k - k / 2) {
        centers.push(i * n / (k - k / 2));
    }
    centers.sort_unstable();
    centers.dedup();

    let mut worst_center = mesh.vertex(centers[0]);
    let mut worst_margin = f64::NEG_INFINITY;
    for &c in &centers {
        let margin = min_distance_to_set(surface, c, &set)? - radius;
        if margin > worst_margin {
            worst_margin = margin;
            worst_center = mesh.vertex(c);
        }
    }
    Ok(ZeroBallReport {
        holds: worst_margin <= 0.0,
        radius,
        centers_tested: centers.len(),
        worst_center,
        worst_margin,
    })
}

fn min_distance_to_set(surface: &Surface, center: usize, set: &NodalSet) -> Result<f64> {
    let cpos = surface.mesh().vertex(center);
    match surface.kind() {
        SurfaceKind::FlatTorus { period_u, period_v } => {
            let mut best = f64::INFINITY;
            for seg in &set.segments {
                // unwrap the center near the segment, then exact
                // point-to-segment distance in the chart
                let anchor = seg.endpoints[0];
                let c = unwrap_chart(cpos, anchor, period_u, period_v);
                best = best.min(point_segment_distance(c, seg.endpoints[0], seg.endpoints[1]));
            }
            Ok(best)
        }
        SurfaceKind::UnitSphere => {
            let c = vec3::normalize(cpos);
            let mut best = f64::INFINITY;
            for seg in &set.segments {
                for i in 0..=16 {
                    let p = vec3::lerp(seg.endpoints[0], seg.endpoints[1], i as f64 / 16.0);
                    best = best.min(sphere_distance(c, vec3::normalize(p)));
                }
            }
            Ok(best)
        }
        SurfaceKind::Generic => {
            let field = surface.geodesic_distance(&SurfacePoint::Vertex(center))?;
            let mesh = surface.mesh();
            let mut best = f64::INFINITY;
            for seg in &set.segments {
                for (end, key) in seg.endpoints.iter().zip(&seg.edges) {
                    // linear interpolation of the field along the carrying edge
                    let pa = mesh.vertex(key.0);
                    let pb = mesh.unwrap_point(mesh.vertex(key.1), pa);
                    let e = vec3::sub(pb, pa);
                    let t = if vec3::dot(e, e) > 0.0 {
                        vec3::dot(vec3::sub(*end, pa), e) / vec3::dot(e, e)
                    } else {
                        0.0
                    };
                    let d = field.values[key.0] * (1.0 - t) + field.values[key.1] * t;
                    best = best.min(d);
                }
            }
            Ok(best)
        }
    }
}

fn unwrap_chart(p: V3, anchor: V3, period_u: f64, period_v: f64) -> V3 {
    let mut out = p;
    for (k, period) in [(0usize, period_u), (1usize, period_v)] {
        let d = p[k] - anchor[k];
        out[k] -= (d / period).round() * period;
    }
    out
}

fn point_segment_distance(p: V3, a: V3, b: V3) -> f64 {
    let ab = vec3::sub(b, a);
    let denom = vec3::dot(ab, ab);
    let t = if denom > 0.0 {
        (vec3::dot(vec3::sub(p, a), ab) / denom).clamp(0.0, 1.0)
    } else {
        0.0
    };
    vec3::dist(p, vec3::lerp(a, b, t))
}

/// Tubular neighborhood `T_eta = {|u| <= eta}` with exact clipped area.
pub fn tubular_neighborhood(pair: &EigenPair, mesh: &TriangleMesh, eta: f64) -> Result<Region> {
    if !(eta > 0.0) {
        return Err(Error::domain("eta must be positive"));
    }
    if eta >= pair.max_abs() {
        return Ok(Region::whole(mesh));
    }
    let abs_values: Vec<f64> = pair.values.iter().map(|v| v.abs()).collect();
    Ok(Region::sublevel(mesh, &abs_values, eta))
}

/// The absolute-value field used to build tubular neighborhoods; exposed so
/// callers can clip against the same interpolant.
pub fn abs_field(pair: &EigenPair) -> Vec<f64> {
    pair.values.iter().map(|v| v.abs()).collect()
}

#[derive(Debug, Clone)]
pub struct SingularPoint {
    pub position: V3,
    /// Estimated vanishing order (>= 2 for every listed point).
    pub multiplicity: u32,
    /// Number of merged candidate crossings.
    pub cluster_size: usize,
}

#[derive(Debug, Clone)]
pub struct SingularPointSet {
    pub points: Vec<SingularPoint>,
    pub gradient_threshold: f64,
}

/// Locate singular points: nodal-graph vertices of degree >= 3 plus zero
/// crossings where the FEM gradient magnitude falls below `eta`. Nearby
/// candidates merge into clusters; each cluster's multiplicity comes from a
/// least-squares harmonic-polynomial fit (degree <= 4) on a geodesic patch
/// of radius 3 mesh edge lengths.
pub fn singular_points(
    set: &NodalSet,
    pair: &EigenPair,
    surface: &Surface,
    eta: f64,
) -> Result<SingularPointSet> {
    if !(eta > 0.0) {
        return Err(Error::domain("gradient threshold must be positive"));
    }
    let mesh = surface.mesh();
    let mut candidates: Vec<V3> = Vec::new();

    for (key, ids) in &set.graph {
        if ids.len() >= 3 {
            let pa = mesh.vertex(key.0);
            let pb = mesh.unwrap_point(mesh.vertex(key.1), pa);
            candidates.push(vec3::scale(vec3::add(pa, pb), 0.5));
        }
    }
    for seg in &set.segments {
        if vec3::norm(pair.gradients[seg.triangle]) < eta {
            candidates.push(seg.midpoint());
        }
    }
    if candidates.is_empty() {
        return Ok(SingularPointSet {
            points: Vec::new(),
            gradient_threshold: eta,
        });
    }

    // cluster candidates within 2 mean edge lengths
    let h = mesh.mean_edge_length();
    let merge_radius = 2.0 * h;
    let n = candidates.len();
    let mut parent: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in (i + 1)..n {
            let pj = mesh.unwrap_point(candidates[j], candidates[i]);
            if vec3::dist(candidates[i], pj) <= merge_radius {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a] = b;
                }
            }
        }
    }
    let mut clusters: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        clusters.entry(r).or_default().push(i);
    }

    let mut points = Vec::new();
    for members in clusters.values() {
        let anchor = candidates[members[0]];
        let mut centroid = [0.0; 3];
        for &i in members {
            centroid = vec3::add(centroid, mesh.unwrap_point(candidates[i], anchor));
        }
        let centroid = vec3::scale(centroid, 1.0 / members.len() as f64);
        let multiplicity = fit_multiplicity(pair, surface, centroid, 3.0 * h).max(2);
        points.push(SingularPoint {
            position: centroid,
            multiplicity,
            cluster_size: members.len(),
        });
    }
    Ok(SingularPointSet {
        points,
        gradient_threshold: eta,
    })
}

/// Fit `u` near `center` against harmonic polynomials `r^m cos/sin(m phi)`,
/// `m <= 4`, in local tangent coordinates; returns the lowest degree whose
/// energy dominates.
fn fit_multiplicity(pair: &EigenPair, surface: &Surface, center: V3, patch_radius: f64) -> u32 {
    let mesh = surface.mesh();
    let (e1, e2) = tangent_frame(surface, center);

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut us = Vec::new();
    for v in 0..mesh.n_vertices() {
        let p = mesh.unwrap_point(mesh.vertex(v), center);
        let d = vec3::dist(p, center);
        if d <= patch_radius {
            let rel = vec3::sub(p, center);
            xs.push(vec3::dot(rel, e1));
            ys.push(vec3::dot(rel, e2));
            us.push(pair.values[v]);
        }
    }
    if us.len() < 10 {
        return 2;
    }

    // harmonic basis: 1; x, y; Re/Im z^2; Re/Im z^3; Re/Im z^4
    let cols = 9;
    let rows = us.len();
    let mut a = nalgebra::DMatrix::<f64>::zeros(rows, cols);
    let scale = patch_radius;
    for (i, (&x, &y)) in xs.iter().zip(&ys).enumerate() {
        let (x, y) = (x / scale, y / scale);
        let z2 = (x * x - y * y, 2.0 * x * y);
        let z3 = (z2.0 * x - z2.1 * y, z2.0 * y + z2.1 * x);
        let z4 = (z3.0 * x - z3.1 * y, z3.0 * y + z3.1 * x);
        let row = [1.0, x, y, z2.0, z2.1, z3.0, z3.1, z4.0, z4.1];
        for (j, v) in row.iter().enumerate() {
            a[(i, j)] = *v;
        }
    }
    let b = nalgebra::DVector::from_column_slice(&us);
    let svd = a.clone().svd(true, true);
    let coef = match svd.solve(&b, 1e-12) {
        Ok(c) => c,
        Err(_) => return 2,
    };

    // energy of each degree's contribution over the patch samples
    let mut energy = [0.0f64; 5];
    let degree_cols: [&[usize]; 5] = [&[0], &[1, 2], &[3, 4], &[5, 6], &[7, 8]];
    for i in 0..rows {
        for (deg, cols) in degree_cols.iter().enumerate() {
            let mut contrib = 0.0;
            for &j in *cols {
                contrib += coef[j] * a[(i, j)];
            }
            energy[deg] += contrib * contrib;
        }
    }
    let max_energy = energy[1..].iter().fold(0.0f64, |m, &e| m.max(e));
    if max_energy <= 0.0 {
        return 2;
    }
    for m in 1..=4u32 {
        if energy[m as usize] >= 0.5 * max_energy {
            return m;
        }
    }
    4
}

fn tangent_frame(surface: &Surface, center: V3) -> (V3, V3) {
    let mesh = surface.mesh();
    match surface.kind() {
        SurfaceKind::FlatTorus { .. } => ([1.0, 0.0, 0.0], [0.0, 1.0, 0.0]),
        SurfaceKind::UnitSphere => {
            let up = vec3::normalize(center);
            let seed = if up[0].abs() < 0.9 {
                [1.0, 0.0, 0.0]
            } else {
                [0.0, 1.0, 0.0]
            };
            let e1 = vec3::normalize(vec3::sub(seed, vec3::scale(up, vec3::dot(seed, up))));
            (e1, vec3::cross(up, e1))
        }
        SurfaceKind::Generic => {
            let mut best_t = 0;
            let mut best_d = f64::INFINITY;
            for t in 0..mesh.n_triangles() {
                let d = vec3::dist(mesh.centroid(t), center);
                if d < best_d {
                    best_d = d;
                    best_t = t;
                }
            }
            let nrm = mesh.unit_normal(best_t);
            let c = mesh.triangle_corners(best_t);
            let e1 = vec3::normalize(vec3::sub(c[1], c[0]));
            (e1, vec3::cross(nrm, e1))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{closed_form_eigenpair, ClosedFormFamily, TorusBranch};
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

    #[test]
    fn torus_m1_two_lines_length_two() {
        let (s, pair) = torus_pair(1, 64);
        let set = extract_nodal_set(&pair, s.mesh()).unwrap();
        assert_relative_eq!(set.length, 2.0, epsilon = 1e-9);
        assert_eq!(set.component_count(), 2);
    }

    #[test]
    fn torus_m3_length_six() {
        let (s, pair) = torus_pair(3, 192);
        let set = extract_nodal_set(&pair, s.mesh()).unwrap();
        assert_relative_eq!(set.length, 6.0, epsilon = 1e-9);
        assert_eq!(set.component_count(), 6);
    }

    #[test]
    fn positive_function_has_empty_set() {
        let s = Surface::flat_torus(1.0, 1.0, 16, 16).unwrap();
        let mesh = s.mesh();
        let pair = EigenPair {
            lambda: 1.0,
            values: vec![1.0; mesh.n_vertices()],
            gradients: vec![[0.0; 3]; mesh.n_triangles()],
            source: crate::spectral::EigenSource::Fem { residual: 0.0 },
        };
        let set = extract_nodal_set(&pair, mesh).unwrap();
        assert!(set.is_empty());
        assert_eq!(set.length, 0.0);
        assert_eq!(nodal_length(&set, mesh, None), 0.0);
    }

    #[test]
    fn all_zero_function_rejected() {
        let s = Surface::flat_torus(1.0, 1.0, 8, 8).unwrap();
        let mesh = s.mesh();
        let pair = EigenPair {
            lambda: 1.0,
            values: vec![0.0; mesh.n_vertices()],
            gradients: vec![[0.0; 3]; mesh.n_triangles()],
            source: crate::spectral::EigenSource::Fem { residual: 0.0 },
        };
        assert!(extract_nodal_set(&pair, mesh).is_err());
    }

    #[test]
    fn sphere_y10_equator() {
        let s = Surface::unit_sphere(4);
        let pair = closed_form_eigenpair(&s, ClosedFormFamily::Sphere { l: 1, m: 0 }).unwrap();
        let set = extract_nodal_set(&pair, s.mesh()).unwrap();
        assert_eq!(set.component_count(), 1);
        assert_relative_eq!(set.length, 2.0 * std::f64::consts::PI, max_relative = 0.01);
    }

    #[test]
    fn zonal_nodal_length_matches_legendre_roots() {
        let s = Surface::unit_sphere(4);
        let l = 2u32;
        let pair = closed_form_eigenpair(&s, ClosedFormFamily::Sphere { l, m: 0 }).unwrap();
        let set = extract_nodal_set(&pair, s.mesh()).unwrap();
        let expected: f64 = crate::spharm::legendre_roots(l)
            .iter()
            .map(|&x| 2.0 * std::f64::consts::PI * (1.0 - x * x).sqrt())
            .sum();
        assert_relative_eq!(set.length, expected, max_relative = 0.02);
    }

    #[test]
    fn domains_count_strips_and_bands() {
        let (s, pair) = torus_pair(3, 96);
        let d = nodal_domains(&pair, s.mesh(), 0.0).unwrap();
        assert_eq!(d.count, 6);

        let sph = Surface::unit_sphere(3);
        for l in 1..=4u32 {
            let pair = closed_form_eigenpair(&sph, ClosedFormFamily::Sphere { l, m: 0 }).unwrap();
            let d = nodal_domains(&pair, sph.mesh(), 0.0).unwrap();
            assert_eq!(d.count as u32, l + 1, "zonal l={l}");
        }
    }

    #[test]
    fn any_nonconstant_pair_has_two_domains() {
        let (s, pair) = torus_pair(1, 32);
        let d = nodal_domains(&pair, s.mesh(), 0.0).unwrap();
        assert!(d.count >= 2);
        // partition identity under the lumped vertex measure: domains plus
        // the |u| <= eps vertices tile the surface
        let areas = s.mesh().vertex_areas();
        let tube: f64 = (0..s.mesh().n_vertices())
            .filter(|&v| pair.values[v].abs() <= 0.0)
            .map(|v| areas[v])
            .sum();
        let total: f64 = d.volumes.iter().sum();
        assert_relative_eq!(total + tube, s.mesh().total_area(), max_relative = 1e-9);
    }

    #[test]
    fn epsilon_at_max_rejected_and_volumes_account_tube() {
        let (s, pair) = torus_pair(2, 64);
        assert!(nodal_domains(&pair, s.mesh(), pair.max_abs()).is_err());
        let eps = 0.3 * pair.max_abs();
        let d = nodal_domains(&pair, s.mesh(), eps).unwrap();
        let areas = s.mesh().vertex_areas();
        let tube: f64 = (0..s.mesh().n_vertices())
            .filter(|&v| pair.values[v].abs() <= eps)
            .map(|v| areas[v])
            .sum();
        let total: f64 = d.volumes.iter().sum();
        assert_relative_eq!(total + tube, s.mesh().total_area(), max_relative = 1e-9);
    }

    #[test]
    fn ball_density_torus() {
        let m = 2;
        let (s, pair) = torus_pair(m, 64 * m as usize);
        let mf = m as f64;
        let generous = zero_in_every_ball(&pair, &s, 1.0 / (4.0 * mf) + 1e-3, 64).unwrap();
        assert!(generous.holds, "worst margin {}", generous.worst_margin);
        let tight = zero_in_every_ball(&pair, &s, 1.0 / (8.0 * mf), 64).unwrap();
        assert!(!tight.holds);
        // worst violating center sits mid-strip at distance 1/(4m)
        assert_relative_eq!(
            tight.worst_margin,
            1.0 / (4.0 * mf) - 1.0 / (8.0 * mf),
            max_relative = 1e-6
        );
    }

    #[test]
    fn huge_radius_always_holds() {
        let (s, pair) = torus_pair(1, 32);
        let r = zero_in_every_ball(&pair, &s, 0.7, 16).unwrap();
        assert!(r.holds);
    }

    #[test]
    fn tube_area_strips() {
        let (s, pair) = torus_pair(1, 64);
        // eta = |u| at x = 0.05: strips of width 0.1 around x = 0 and x = 0.5
        let scale = pair.max_abs();
        let eta = (2.0 * std::f64::consts::PI * 0.05).sin() * scale;
        let region = tubular_neighborhood(&pair, s.mesh(), eta).unwrap();
        assert_relative_eq!(region.area, 0.2, max_relative = 0.02);
    }

    #[test]
    fn tube_areas_monotone_in_eta() {
        let (s, pair) = torus_pair(2, 48);
        let mut last = 0.0;
        for i in 1..=8 {
            let eta = pair.max_abs() * i as f64 / 9.0;
            let r = tubular_neighborhood(&pair, s.mesh(), eta).unwrap();
            assert!(r.area >= last - 1e-12);
            last = r.area;
        }
    }

    #[test]
    fn tube_at_max_is_whole_surface() {
        let (s, pair) = torus_pair(1, 32);
        let r = tubular_neighborhood(&pair, s.mesh(), pair.max_abs() * 1.001).unwrap();
        assert_relative_eq!(r.area, s.mesh().total_area(), max_relative = 1e-12);
    }

    #[test]
    fn product_mode_singular_points() {
        // sin(2 pi x) sin(2 pi y): crossings at the 4 points where both
        // factors vanish, each locally xy (multiplicity 2).
        let s = Surface::flat_torus(1.0, 1.0, 64, 64).unwrap();
        let mesh = s.mesh();
        let values: Vec<f64> = (0..mesh.n_vertices())
            .map(|v| {
                let p = mesh.vertex(v);
                (2.0 * std::f64::consts::PI * p[0]).sin()
                    * (2.0 * std::f64::consts::PI * p[1]).sin()
            })
            .collect();
        let gradients = crate::spectral::triangle_gradients(mesh, &values);
        let pair = EigenPair {
            lambda: 8.0 * std::f64::consts::PI.powi(2),
            values,
            gradients,
            source: crate::spectral::EigenSource::Fem { residual: 0.0 },
        };
        let set = extract_nodal_set(&pair, mesh).unwrap();
        let sing = singular_points(&set, &pair, &s, 1.0).unwrap();
        assert_eq!(sing.points.len(), 4, "points: {:?}", sing.points);
        for p in &sing.points {
            assert_eq!(p.multiplicity, 2);
        }
    }

    #[test]
    fn zonal_mode_has_no_singular_points() {
        let s = Surface::unit_sphere(3);
        let pair = closed_form_eigenpair(&s, ClosedFormFamily::Sphere { l: 1, m: 0 }).unwrap();
        let set = extract_nodal_set(&pair, s.mesh()).unwrap();
        // |grad| is bounded below on the equator; a small threshold stays empty
        let sing = singular_points(&set, &pair, &s, 1e-3).unwrap();
        assert!(sing.points.is_empty());
    }

    #[test]
    fn length_stability_under_refinement() {
        let (s1, p1) = torus_pair(2, 64);
        let (s2, p2) = torus_pair(2, 128);
        let l1 = extract_nodal_set(&p1, s1.mesh()).unwrap().length;
        let l2 = extract_nodal_set(&p2, s2.mesh()).unwrap().length;
        assert!((l1 - l2).abs() / l2 < 0.01);
    }

    #[test]
    fn clipped_length_in_ball() {
        let (s, pair) = torus_pair(1, 64);
        let set = extract_nodal_set(&pair, s.mesh()).unwrap();
        // ball of radius 0.2 around (0, 0.5): the line x = 0 crosses it in a
        // diameter of length 0.4
        let ball = s
            .geodesic_ball(&SurfacePoint::Ambient([0.0, 0.5, 0.0]), 0.2)
            .unwrap();
        let clipped = nodal_length(
            &set,
            s.mesh(),
            Some((&ball.region, Some(&ball.distance.values))),
        );
        assert_relative_eq!(clipped, 0.4, max_relative = 0.01);
    }

    #[test]
    fn svg_chart_has_lines() {
        let (s, pair) = torus_pair(3, 96);
        let set = extract_nodal_set(&pair, s.mesh()).unwrap();
        let svg = set.svg_chart(&s).unwrap();
        assert!(svg.contains("<svg"));
        assert!(svg.matches("<line").count() > 100);
    }

    #[test]
    fn courant_bound_on_fem_eigenpairs() {
        let mesh = crate::mesh::TriangleMesh::icosphere(3);
        let ops = crate::spectral::assemble_laplacian(&mesh);
        let pairs = crate::spectral::solve_eigen(&ops, &mesh, 12, -1.0, 7).unwrap();
        for (k, pair) in pairs.iter().enumerate() {
            if pair.lambda < 1e-8 {
                continue;
            }
            let d = nodal_domains(pair, &mesh, 0.0).unwrap();
            assert!(
                d.count <= k + 1,
                "Courant bound violated at index {}: {} domains",
                k + 1,
                d.count
            );
        }
    }

    #[test]
    fn faber_krahn_area_lambda_bounded_below() {
        let mut min_product = f64::INFINITY;
        for m in 1..=8 {
            let (s, pair) = torus_pair(m, 32 * m as usize);
            let d = nodal_domains(&pair, s.mesh(), 0.0).unwrap();
            for &vol in &d.volumes {
                min_product = min_product.min(vol * pair.lambda);
            }
        }
        // strips of width 1/(2m): continuum area * lambda = 2 pi^2 m; under
        // the lumped vertex measure on a 32m grid the zero columns drop out,
        // leaving (16m - 1)/(32m) per strip. Minimum sits at m = 1.
        assert!(min_product > 1.0, "min area*lambda = {min_product}");
        let expected = 4.0 * std::f64::consts::PI.powi(2) * 15.0 / 32.0;
        assert_relative_eq!(min_product, expected, max_relative = 0.01);
    }
}
