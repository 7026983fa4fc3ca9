//! Surface geometry backend: the three supported surface kinds with their
//! distance fields, curvature queries and geodesic balls.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::mesh::TriangleMesh;
use crate::region::Region;
use crate::vec3::{self, V3};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SurfaceKind {
    UnitSphere,
    FlatTorus { period_u: f64, period_v: f64 },
    /// Triangle mesh with no closed-form structure; all queries go through
    /// the mesh.
    Generic,
}

/// A surface is a computation mesh tagged with the geometry it samples.
/// Closed-form kinds answer metric queries exactly; `Generic` falls back to
/// graph marching and angle defects.
#[derive(Debug, Clone)]
pub struct Surface {
    kind: SurfaceKind,
    mesh: TriangleMesh,
}

/// Where a query point sits on a surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SurfacePoint {
    /// A point in the ambient representation: a unit vector for the sphere,
    /// a chart point (u, v, 0) for the torus. Not accepted on generic meshes.
    Ambient(V3),
    Vertex(usize),
    OnTriangle { tri: usize, bary: [f64; 3] },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceMethod {
    Exact,
    GraphMarching,
}

/// Per-vertex geodesic distances from one source point.
#[derive(Debug, Clone)]
pub struct DistanceField {
    pub source: V3,
    pub values: Vec<f64>,
    pub method: DistanceMethod,
}

/// Gaussian curvature at a vertex. Scalar curvature on a surface is `2K`.
#[derive(Debug, Clone, Copy)]
pub struct CurvatureSample {
    pub k: f64,
    pub vertex: usize,
}

impl CurvatureSample {
    pub fn scalar_curvature(&self) -> f64 {
        2.0 * self.k
    }
}

/// A geodesic ball `{d <= radius}` with its generating distance field.
#[derive(Debug, Clone)]
pub struct GeodesicBall {
    pub center: V3,
    pub radius: f64,
    pub region: Region,
    pub distance: DistanceField,
    /// Set when the radius exceeds the surface's injectivity scale and the
    /// ball may self-overlap.
    pub may_self_overlap: bool,
}

impl Surface {
    /// Unit sphere sampled on an icosphere mesh.
    pub fn unit_sphere(subdivisions: u32) -> Surface {
        Surface {
            kind: SurfaceKind::UnitSphere,
            mesh: TriangleMesh::icosphere(subdivisions),
        }
    }

    /// Flat torus sampled on a regular grid mesh.
    pub fn flat_torus(period_u: f64, period_v: f64, nu: usize, nv: usize) -> Result<Surface> {
        Ok(Surface {
            kind: SurfaceKind::FlatTorus { period_u, period_v },
            mesh: TriangleMesh::torus_grid(period_u, period_v, nu, nv)?,
        })
    }

    /// Wrap an arbitrary closed mesh; all queries use mesh algorithms.
    pub fn from_mesh(mesh: TriangleMesh) -> Surface {
        Surface {
            kind: SurfaceKind::Generic,
            mesh,
        }
    }

    pub fn kind(&self) -> SurfaceKind {
        self.kind
    }

    pub fn mesh(&self) -> &TriangleMesh {
        &self.mesh
    }

    /// Resolve a surface point to its ambient position.
    pub fn position(&self, p: &SurfacePoint) -> Result<V3> {
        match *p {
            SurfacePoint::Ambient(x) => match self.kind {
                SurfaceKind::UnitSphere => {
                    if (vec3::norm(x) - 1.0).abs() > 1e-6 {
                        return Err(Error::domain(format!(
                            "point {x:?} is not on the unit sphere"
                        )));
                    }
                    Ok(x)
                }
                SurfaceKind::FlatTorus { period_u, period_v } => {
                    if x[2].abs() > 1e-9 {
                        return Err(Error::domain("torus chart points must have z = 0"));
                    }
                    Ok([x[0].rem_euclid(period_u), x[1].rem_euclid(period_v), 0.0])
                }
                SurfaceKind::Generic => Err(Error::domain(
                    "generic meshes only accept vertex or barycentric source points",
                )),
            },
            SurfacePoint::Vertex(v) => {
                if v >= self.mesh.n_vertices() {
                    return Err(Error::domain(format!("vertex {v} out of range")));
                }
                Ok(self.mesh.vertex(v))
            }
            SurfacePoint::OnTriangle { tri, bary } => {
                if tri >= self.mesh.n_triangles() {
                    return Err(Error::domain(format!("triangle {tri} out of range")));
                }
                if bary.iter().any(|&b| b < -1e-9) || (bary[0] + bary[1] + bary[2] - 1.0).abs() > 1e-9
                {
                    return Err(Error::domain("barycentric coordinates must be a convex combination"));
                }
                Ok(self.mesh.point_at(tri, bary))
            }
        }
    }

    /// Exact distance between two ambient points (closed-form kinds only).
    pub fn exact_distance(&self, p: V3, q: V3) -> Option<f64> {
        match self.kind {
            SurfaceKind::UnitSphere => Some(sphere_distance(p, q)),
            SurfaceKind::FlatTorus { period_u, period_v } => {
                Some(torus_distance(p, q, period_u, period_v))
            }
            SurfaceKind::Generic => None,
        }
    }

    /// Geodesic distance field from a source point: closed form on the
    /// sphere and torus, one marching pass (with triangle-unfolding updates)
    /// on generic meshes, which overestimates by at most a couple of percent
    /// on refined meshes.
    pub fn geodesic_distance(&self, source: &SurfacePoint) -> Result<DistanceField> {
        let src = self.position(source)?;
        match self.kind {
            SurfaceKind::UnitSphere => {
                let src = vec3::normalize(src);
                let values = (0..self.mesh.n_vertices())
                    .map(|v| sphere_distance(src, vec3::normalize(self.mesh.vertex(v))))
                    .collect();
                Ok(DistanceField {
                    source: src,
                    values,
                    method: DistanceMethod::Exact,
                })
            }
            SurfaceKind::FlatTorus { period_u, period_v } => {
                let values = (0..self.mesh.n_vertices())
                    .map(|v| torus_distance(src, self.mesh.vertex(v), period_u, period_v))
                    .collect();
                Ok(DistanceField {
                    source: src,
                    values,
                    method: DistanceMethod::Exact,
                })
            }
            SurfaceKind::Generic => {
                let values = march_distance(&self.mesh, source, src)?;
                Ok(DistanceField {
                    source: src,
                    values,
                    method: DistanceMethod::GraphMarching,
                })
            }
        }
    }

    /// Gaussian curvature at a vertex: closed form where available, angle
    /// defect over mixed area on meshes.
    pub fn gaussian_curvature(&self, vertex: usize) -> Result<CurvatureSample> {
        if vertex >= self.mesh.n_vertices() {
            return Err(Error::domain(format!("vertex {vertex} out of range")));
        }
        let k = match self.kind {
            SurfaceKind::UnitSphere => 1.0,
            SurfaceKind::FlatTorus { .. } => 0.0,
            SurfaceKind::Generic => {
                let area = self.mesh.mixed_vertex_areas()[vertex];
                if area <= 0.0 {
                    return Err(Error::geometry(format!(
                        "vertex {vertex} has a degenerate star (zero mixed area)"
                    )));
                }
                self.mesh.angle_defect(vertex) / area
            }
        };
        Ok(CurvatureSample { k, vertex })
    }

    /// Per-vertex Gaussian curvature field.
    pub fn curvature_field(&self) -> Result<Vec<f64>> {
        match self.kind {
            SurfaceKind::UnitSphere => Ok(vec![1.0; self.mesh.n_vertices()]),
            SurfaceKind::FlatTorus { .. } => Ok(vec![0.0; self.mesh.n_vertices()]),
            SurfaceKind::Generic => {
                let areas = self.mesh.mixed_vertex_areas();
                (0..self.mesh.n_vertices())
                    .map(|v| {
                        if areas[v] <= 0.0 {
                            Err(Error::geometry(format!("vertex {v} has zero mixed area")))
                        } else {
                            Ok(self.mesh.angle_defect(v) / areas[v])
                        }
                    })
                    .collect()
            }
        }
    }

    /// Scale beyond which geodesic balls may stop being embedded.
    pub fn injectivity_scale(&self) -> f64 {
        match self.kind {
            SurfaceKind::UnitSphere => std::f64::consts::PI,
            SurfaceKind::FlatTorus { period_u, period_v } => 0.5 * period_u.min(period_v),
            // Conservative heuristic for meshes.
            SurfaceKind::Generic => 0.5 * (self.mesh.total_area() / std::f64::consts::PI).sqrt(),
        }
    }

    /// Rough diameter bound used for radius preconditions.
    pub fn diameter_bound(&self) -> f64 {
        match self.kind {
            SurfaceKind::UnitSphere => std::f64::consts::PI,
            SurfaceKind::FlatTorus { period_u, period_v } => 0.5 * (period_u + period_v),
            SurfaceKind::Generic => {
                // Half total edge length is a crude upper bound; good enough
                // for validating radii.
                self.mesh.mean_edge_length() * self.mesh.edges().len() as f64 * 0.5
            }
        }
    }

    /// Geodesic ball `{d(center, .) <= radius}`.
    pub fn geodesic_ball(&self, center: &SurfacePoint, radius: f64) -> Result<GeodesicBall> {
        if radius < 0.0 {
            return Err(Error::domain("ball radius must be nonnegative"));
        }
        if radius > self.diameter_bound() {
            return Err(Error::domain(format!(
                "radius {radius} exceeds the surface diameter bound {}",
                self.diameter_bound()
            )));
        }
        let distance = self.geodesic_distance(center)?;
        let region = Region::sublevel(&self.mesh, &distance.values, radius);
        Ok(GeodesicBall {
            center: distance.source,
            radius,
            may_self_overlap: radius > self.injectivity_scale(),
            region,
            distance,
        })
    }
}

pub fn sphere_distance(p: V3, q: V3) -> f64 {
    vec3::norm(vec3::cross(p, q)).atan2(vec3::dot(p, q))
}

pub fn torus_distance(p: V3, q: V3, period_u: f64, period_v: f64) -> f64 {
    let du = wrap_delta(p[0] - q[0], period_u);
    let dv = wrap_delta(p[1] - q[1], period_v);
    (du * du + dv * dv).sqrt()
}

fn wrap_delta(d: f64, period: f64) -> f64 {
    let d = d.rem_euclid(period);
    d.min(period - d)
}

// ----------------------------------------------------------------------
// Graph marching with triangle-unfolding updates
// ----------------------------------------------------------------------

struct HeapEntry {
    dist: f64,
    vertex: usize,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.dist == other.dist && self.vertex == other.vertex
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on distance, ties by vertex id for determinism
        other
            .dist
            .partial_cmp(&self.dist)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

fn march_distance(mesh: &TriangleMesh, source: &SurfacePoint, src_pos: V3) -> Result<Vec<f64>> {
    let n = mesh.n_vertices();
    let mut dist = vec![f64::INFINITY; n];
    let mut settled = vec![false; n];
    let mut heap = BinaryHeap::new();

    match *source {
        SurfacePoint::Vertex(v) => {
            dist[v] = 0.0;
            heap.push(HeapEntry { dist: 0.0, vertex: v });
        }
        SurfacePoint::OnTriangle { tri, .. } => {
            for &v in &mesh.triangle(tri) {
                let d = vec3::dist(mesh.vertex(v), src_pos);
                dist[v] = d;
                heap.push(HeapEntry { dist: d, vertex: v });
            }
        }
        SurfacePoint::Ambient(_) => {
            return Err(Error::domain(
                "generic meshes only accept vertex or barycentric source points",
            ))
        }
    }

    while let Some(HeapEntry { dist: d, vertex: v }) = heap.pop() {
        if settled[v] || d > dist[v] {
            continue;
        }
        settled[v] = true;
        for &t in mesh.triangles_of_vertex(v) {
            let tri = mesh.triangle(t);
            let corners = mesh.triangle_corners(t);
            for k in 0..3 {
                let w = tri[k];
                if settled[w] {
                    continue;
                }
                let a = tri[(k + 1) % 3];
                let b = tri[(k + 2) % 3];
                let update = triangle_update(
                    corners[(k + 1) % 3],
                    corners[(k + 2) % 3],
                    corners[k],
                    dist[a],
                    dist[b],
                );
                if update < dist[w] {
                    dist[w] = update;
                    heap.push(HeapEntry { dist: update, vertex: w });
                }
            }
        }
    }
    Ok(dist)
}

/// Planar-wavefront update of the value at `c` from `a`, `b` with values
/// `da`, `db`; falls back to edge hops when the front direction misses the
/// triangle.
fn triangle_update(pa: V3, pb: V3, pc: V3, da: f64, db: f64) -> f64 {
    let edge_fallback = (da + vec3::dist(pa, pc)).min(db + vec3::dist(pb, pc));
    if !da.is_finite() || !db.is_finite() {
        return edge_fallback;
    }
    // Arrange so the smaller value sits at A.
    let (pa, pb, da, db) = if da <= db {
        (pa, pb, da, db)
    } else {
        (pb, pa, db, da)
    };
    let a_len = vec3::dist(pb, pc);
    let b_len = vec3::dist(pa, pc);
    let u = db - da;
    let ca = vec3::sub(pa, pc);
    let cb = vec3::sub(pb, pc);
    let cos_theta = (vec3::dot(ca, cb) / (a_len * b_len)).clamp(-1.0, 1.0);
    let sin_theta = (1.0 - cos_theta * cos_theta).sqrt();

    let qa = a_len * a_len + b_len * b_len - 2.0 * a_len * b_len * cos_theta;
    let qb = 2.0 * b_len * u * (a_len * cos_theta - b_len);
    let qc = b_len * b_len * (u * u - a_len * a_len * sin_theta * sin_theta);
    let disc = qb * qb - 4.0 * qa * qc;
    if disc < 0.0 || qa <= 0.0 {
        return edge_fallback;
    }
    let t = (-qb + disc.sqrt()) / (2.0 * qa);
    // Monotonicity and in-triangle checks from the standard scheme.
    if u < t && a_len * cos_theta < b_len * (t - u) / t && b_len * (t - u) / t < a_len / cos_theta.max(1e-300)
    {
        (da + t).min(edge_fallback)
    } else {
        edge_fallback
    }
}
