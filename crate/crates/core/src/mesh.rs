//! Triangle meshes: construction, validation, file ingestion and the local
//! geometric queries (areas, angles, cotangents, angle defects) everything
//! else is built on.
//!
//! Flat-torus meshes are stored in chart coordinates with explicit periods;
//! per-triangle geometry always works on unwrapped corner copies so the seam
//! is invisible to downstream code.

use std::collections::HashMap;
use std::path::Path;

use crate::vec3::{self, V3};
use crate::{Error, Result};

/// An edge with its two adjacent triangles (closed manifold meshes only).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    /// Endpoint vertex ids, `v[0] < v[1]`.
    pub v: [usize; 2],
    /// The two incident triangles.
    pub tris: [usize; 2],
}

#[derive(Debug, Clone)]
pub struct TriangleMesh {
    vertices: Vec<V3>,
    triangles: Vec<[usize; 3]>,
    /// Chart periods for periodic planar meshes (flat torus), `None` for
    /// embedded meshes.
    wrap: Option<[f64; 2]>,
    edges: Vec<Edge>,
    vertex_tris: Vec<Vec<usize>>,
    vertex_neighbors: Vec<Vec<usize>>,
}

impl TriangleMesh {
    /// Build and validate an embedded closed triangle mesh.
    pub fn new(vertices: Vec<V3>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        Self::build(vertices, triangles, None)
    }

    /// Build a periodic planar mesh; vertices live in the fundamental domain
    /// `[0, period_u) x [0, period_v)` with z = 0.
    pub fn new_periodic(
        vertices: Vec<V3>,
        triangles: Vec<[usize; 3]>,
        period_u: f64,
        period_v: f64,
    ) -> Result<Self> {
        if period_u <= 0.0 || period_v <= 0.0 {
            return Err(Error::geometry("torus periods must be strictly positive"));
        }
        Self::build(vertices, triangles, Some([period_u, period_v]))
    }

    fn build(vertices: Vec<V3>, triangles: Vec<[usize; 3]>, wrap: Option<[f64; 2]>) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::geometry("mesh has no triangles"));
        }
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= vertices.len() {
                    return Err(Error::geometry(format!(
                        "triangle {t} references vertex {v} out of range"
                    )));
                }
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::geometry(format!("triangle {t} is degenerate")));
            }
        }

        // Closed + manifold: every undirected edge borders exactly two
        // triangles. Orientable: each directed edge appears exactly once.
        let mut undirected: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for (t, tri) in triangles.iter().enumerate() {
            for k in 0..3 {
                let a = tri[k];
                let b = tri[(k + 1) % 3];
                if directed.insert((a, b), t).is_some() {
                    return Err(Error::geometry(format!(
                        "mesh is not orientable: directed edge ({a},{b}) repeated"
                    )));
                }
                undirected
                    .entry((a.min(b), a.max(b)))
                    .or_default()
                    .push(t);
            }
        }
        let mut edges = Vec::with_capacity(undirected.len());
        for (&(a, b), tris) in &undirected {
            if tris.len() != 2 {
                return Err(Error::geometry(format!(
                    "edge ({a},{b}) borders {} triangles; mesh must be closed and manifold",
                    tris.len()
                )));
            }
            edges.push(Edge {
                v: [a, b],
                tris: [tris[0].min(tris[1]), tris[0].max(tris[1])],
            });
        }
        edges.sort_by_key(|e| e.v);

        let mut vertex_tris = vec![Vec::new(); vertices.len()];
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                vertex_tris[v].push(t);
            }
        }
        let mut vertex_neighbors = vec![Vec::new(); vertices.len()];
        for e in &edges {
            vertex_neighbors[e.v[0]].push(e.v[1]);
            vertex_neighbors[e.v[1]].push(e.v[0]);
        }
        for n in &mut vertex_neighbors {
            n.sort_unstable();
        }

        let mesh = Self {
            vertices,
            triangles,
            wrap,
            edges,
            vertex_tris,
            vertex_neighbors,
        };
        for t in 0..mesh.n_triangles() {
            if mesh.area(t) <= 0.0 {
                return Err(Error::geometry(format!("triangle {t} has non-positive area")));
            }
        }
        Ok(mesh)
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn vertex(&self, i: usize) -> V3 {
        self.vertices[i]
    }

    pub fn triangle(&self, t: usize) -> [usize; 3] {
        self.triangles[t]
    }

    pub fn wrap_periods(&self) -> Option<[f64; 2]> {
        self.wrap
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn triangles_of_vertex(&self, v: usize) -> &[usize] {
        &self.vertex_tris[v]
    }

    pub fn vertex_neighbors(&self, v: usize) -> &[usize] {
        &self.vertex_neighbors[v]
    }

    /// Corner positions of a triangle with periodic unwrapping: corners 1 and 2
    /// are shifted to the period copy nearest corner 0.
    pub fn triangle_corners(&self, t: usize) -> [V3; 3] {
        let [a, b, c] = self.triangles[t];
        let pa = self.vertices[a];
        match self.wrap {
            None => [pa, self.vertices[b], self.vertices[c]],
            Some(periods) => [
                pa,
                unwrap_near(self.vertices[b], pa, periods),
                unwrap_near(self.vertices[c], pa, periods),
            ],
        }
    }

    /// Representative of `p` in the period copy nearest `anchor` (identity for
    /// embedded meshes).
    pub fn unwrap_point(&self, p: V3, anchor: V3) -> V3 {
        match self.wrap {
            None => p,
            Some(periods) => unwrap_near(p, anchor, periods),
        }
    }

    pub fn area(&self, t: usize) -> f64 {
        let [p0, p1, p2] = self.triangle_corners(t);
        0.5 * vec3::norm(vec3::cross(vec3::sub(p1, p0), vec3::sub(p2, p0)))
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.area(t)).sum()
    }

    pub fn centroid(&self, t: usize) -> V3 {
        let [p0, p1, p2] = self.triangle_corners(t);
        vec3::scale(vec3::add(vec3::add(p0, p1), p2), 1.0 / 3.0)
    }

    pub fn unit_normal(&self, t: usize) -> V3 {
        let [p0, p1, p2] = self.triangle_corners(t);
        vec3::normalize(vec3::cross(vec3::sub(p1, p0), vec3::sub(p2, p0)))
    }

    /// Interior angle at local corner `k` of triangle `t`.
    pub fn corner_angle(&self, t: usize, k: usize) -> f64 {
        let c = self.triangle_corners(t);
        let u = vec3::sub(c[(k + 1) % 3], c[k]);
        let v = vec3::sub(c[(k + 2) % 3], c[k]);
        let cosang = vec3::dot(u, v) / (vec3::norm(u) * vec3::norm(v));
        cosang.clamp(-1.0, 1.0).acos()
    }

    /// Cotangent of the corner angle, used for stiffness weights.
    pub fn corner_cotangent(&self, t: usize, k: usize) -> f64 {
        let c = self.triangle_corners(t);
        let u = vec3::sub(c[(k + 1) % 3], c[k]);
        let v = vec3::sub(c[(k + 2) % 3], c[k]);
        vec3::dot(u, v) / vec3::norm(vec3::cross(u, v))
    }

    /// Barycentric (lumped) vertex areas: one third of each incident triangle.
    pub fn vertex_areas(&self) -> Vec<f64> {
        let mut areas = vec![0.0; self.n_vertices()];
        for t in 0..self.n_triangles() {
            let a = self.area(t) / 3.0;
            for &v in &self.triangles[t] {
                areas[v] += a;
            }
        }
        areas
    }

    /// Meyer mixed vertex areas: Voronoi area on non-obtuse triangles, with
    /// the standard obtuse-triangle correction.
    pub fn mixed_vertex_areas(&self) -> Vec<f64> {
        let mut areas = vec![0.0; self.n_vertices()];
        for t in 0..self.n_triangles() {
            let corners = self.triangle_corners(t);
            let tri = self.triangles[t];
            let angles = [
                self.corner_angle(t, 0),
                self.corner_angle(t, 1),
                self.corner_angle(t, 2),
            ];
            let obtuse = angles.iter().position(|&a| a > std::f64::consts::FRAC_PI_2);
            let area_t = self.area(t);
            match obtuse {
                Some(i) => {
                    for k in 0..3 {
                        areas[tri[k]] += if k == i { area_t / 2.0 } else { area_t / 4.0 };
                    }
                }
                None => {
                    for k in 0..3 {
                        let e1 = vec3::sub(corners[(k + 1) % 3], corners[k]);
                        let e2 = vec3::sub(corners[(k + 2) % 3], corners[k]);
                        let cot1 = self.corner_cotangent(t, (k + 2) % 3);
                        let cot2 = self.corner_cotangent(t, (k + 1) % 3);
                        areas[tri[k]] +=
                            (vec3::dot(e1, e1) * cot1 + vec3::dot(e2, e2) * cot2) / 8.0;
                    }
                }
            }
        }
        areas
    }

    /// Angle defect `2*pi - sum of incident angles` at a vertex.
    pub fn angle_defect(&self, v: usize) -> f64 {
        let mut sum = 0.0;
        for &t in &self.vertex_tris[v] {
            let k = self.triangles[t].iter().position(|&w| w == v).unwrap();
            sum += self.corner_angle(t, k);
        }
        2.0 * std::f64::consts::PI - sum
    }

    pub fn total_angle_defect(&self) -> f64 {
        (0..self.n_vertices()).map(|v| self.angle_defect(v)).sum()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.n_vertices() as i64 - self.edges.len() as i64 + self.n_triangles() as i64
    }

    pub fn mean_edge_length(&self) -> f64 {
        let mut sum = 0.0;
        for e in &self.edges {
            sum += self.edge_length(e);
        }
        sum / self.edges.len() as f64
    }

    pub fn edge_length(&self, e: &Edge) -> f64 {
        let pa = self.vertices[e.v[0]];
        let pb = self.unwrap_point(self.vertices[e.v[1]], pa);
        vec3::dist(pa, pb)
    }

    /// Barycentric coordinates of an in-plane point within triangle `t`
    /// (computed against the unwrapped corners).
    pub fn barycentric(&self, t: usize, p: V3) -> [f64; 3] {
        let [a, b, c] = self.triangle_corners(t);
        let p = self.unwrap_point(p, a);
        let v0 = vec3::sub(b, a);
        let v1 = vec3::sub(c, a);
        let v2 = vec3::sub(p, a);
        let d00 = vec3::dot(v0, v0);
        let d01 = vec3::dot(v0, v1);
        let d11 = vec3::dot(v1, v1);
        let d20 = vec3::dot(v2, v0);
        let d21 = vec3::dot(v2, v1);
        let denom = d00 * d11 - d01 * d01;
        let w1 = (d11 * d20 - d01 * d21) / denom;
        let w2 = (d00 * d21 - d01 * d20) / denom;
        [1.0 - w1 - w2, w1, w2]
    }

    /// Point at barycentric coordinates in triangle `t`.
    pub fn point_at(&self, t: usize, bary: [f64; 3]) -> V3 {
        let [a, b, c] = self.triangle_corners(t);
        vec3::add(
            vec3::add(vec3::scale(a, bary[0]), vec3::scale(b, bary[1])),
            vec3::scale(c, bary[2]),
        )
    }

    // ------------------------------------------------------------------
    // Builders
    // ------------------------------------------------------------------

    /// Regular `nu x nv` grid mesh of the flat torus with the given periods,
    /// each cell split along the same diagonal.
    pub fn torus_grid(period_u: f64, period_v: f64, nu: usize, nv: usize) -> Result<Self> {
        if nu < 3 || nv < 3 {
            return Err(Error::geometry("torus grid needs at least 3 cells per axis"));
        }
        let du = period_u / nu as f64;
        let dv = period_v / nv as f64;
        let mut vertices = Vec::with_capacity(nu * nv);
        for j in 0..nv {
            for i in 0..nu {
                vertices.push([i as f64 * du, j as f64 * dv, 0.0]);
            }
        }
        let idx = |i: usize, j: usize| (j % nv) * nu + (i % nu);
        let mut triangles = Vec::with_capacity(2 * nu * nv);
        for j in 0..nv {
            for i in 0..nu {
                triangles.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
                triangles.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
            }
        }
        Self::new_periodic(vertices, triangles, period_u, period_v)
    }

    /// Icosphere: subdivided icosahedron projected to the unit sphere.
    pub fn icosphere(subdivisions: u32) -> Self {
        let phi = (1.0 + 5.0_f64.sqrt()) / 2.0;
        let mut vertices: Vec<V3> = vec![
            [-1.0, phi, 0.0],
            [1.0, phi, 0.0],
            [-1.0, -phi, 0.0],
            [1.0, -phi, 0.0],
            [0.0, -1.0, phi],
            [0.0, 1.0, phi],
            [0.0, -1.0, -phi],
            [0.0, 1.0, -phi],
            [phi, 0.0, -1.0],
            [phi, 0.0, 1.0],
            [-phi, 0.0, -1.0],
            [-phi, 0.0, 1.0],
        ]
        .into_iter()
        .map(vec3::normalize)
        .collect();
        let mut triangles: Vec<[usize; 3]> = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];

        for _ in 0..subdivisions {
            let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
            let mut next = Vec::with_capacity(triangles.len() * 4);
            for tri in &triangles {
                let mut mid = [0usize; 3];
                for k in 0..3 {
                    let a = tri[k];
                    let b = tri[(k + 1) % 3];
                    let key = (a.min(b), a.max(b));
                    mid[k] = *midpoint.entry(key).or_insert_with(|| {
                        let m = vec3::normalize(vec3::scale(
                            vec3::add(vertices[a], vertices[b]),
                            0.5,
                        ));
                        vertices.push(m);
                        vertices.len() - 1
                    });
                }
                next.push([tri[0], mid[0], mid[2]]);
                next.push([tri[1], mid[1], mid[0]]);
                next.push([tri[2], mid[2], mid[1]]);
                next.push([mid[0], mid[1], mid[2]]);
            }
            triangles = next;
        }
        Self::new(vertices, triangles).expect("icosphere construction is always valid")
    }

    // ------------------------------------------------------------------
    // File ingestion (ASCII OFF / OBJ, triangles only)
    // ------------------------------------------------------------------

    pub fn load_off(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_off_str(&std::fs::read_to_string(path)?)
    }

    pub fn load_obj(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_obj_str(&std::fs::read_to_string(path)?)
    }

    pub fn from_off_str(text: &str) -> Result<Self> {
        let mut tokens = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or(""))
            .flat_map(|l| l.split_whitespace())
            .peekable();
        match tokens.next() {
            Some("OFF") => {}
            other => {
                return Err(Error::Parse(format!(
                    "OFF file must start with the OFF keyword, got {other:?}"
                )))
            }
        }
        let mut next_num = |what: &str| -> Result<f64> {
            tokens
                .next()
                .ok_or_else(|| Error::Parse(format!("unexpected end of OFF file reading {what}")))?
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("bad {what}: {e}")))
        };
        let nv = next_num("vertex count")? as usize;
        let nf = next_num("face count")? as usize;
        let _ne = next_num("edge count")?;
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            vertices.push([next_num("x")?, next_num("y")?, next_num("z")?]);
        }
        let mut triangles = Vec::with_capacity(nf);
        for _ in 0..nf {
            let deg = next_num("face degree")? as usize;
            if deg != 3 {
                return Err(Error::Parse(format!(
                    "only triangular faces are supported, found a face of degree {deg}"
                )));
            }
            let a = next_num("face index")? as usize;
            let b = next_num("face index")? as usize;
            let c = next_num("face index")? as usize;
            triangles.push([a, b, c]);
        }
        Self::new(vertices, triangles)
    }

    pub fn from_obj_str(text: &str) -> Result<Self> {
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            match parts.next() {
                Some("v") => {
                    let mut coord = |what: &str| -> Result<f64> {
                        parts
                            .next()
                            .ok_or_else(|| {
                                Error::Parse(format!("line {}: missing {what}", lineno + 1))
                            })?
                            .parse()
                            .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
                    };
                    vertices.push([coord("x")?, coord("y")?, coord("z")?]);
                }
                Some("f") => {
                    let idx: Vec<usize> = parts
                        .map(|p| {
                            // "f v", "f v/vt", "f v/vt/vn" all key on the first field
                            let first = p.split('/').next().unwrap_or(p);
                            first.parse::<usize>().map_err(|e| {
                                Error::Parse(format!("line {}: {e}", lineno + 1))
                            })
                        })
                        .collect::<Result<_>>()?;
                    if idx.len() != 3 {
                        return Err(Error::Parse(format!(
                            "line {}: only triangular faces are supported, found degree {}",
                            lineno + 1,
                            idx.len()
                        )));
                    }
                    if idx.iter().any(|&i| i == 0) {
                        return Err(Error::Parse(format!(
                            "line {}: OBJ indices are 1-based",
                            lineno + 1
                        )));
                    }
                    triangles.push([idx[0] - 1, idx[1] - 1, idx[2] - 1]);
                }
                // v/f records only; everything else is ignored
                _ => {}
            }
        }
        Self::new(vertices, triangles)
    }
}

fn unwrap_near(p: V3, anchor: V3, periods: [f64; 2]) -> V3 {
    let mut out = p;
    for k in 0..2 {
        let period = periods[k];
        let d = p[k] - anchor[k];
        out[k] -= (d / period).round() * period;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn torus_grid_is_closed_and_has_right_area() {
        let mesh = TriangleMesh::torus_grid(1.0, 1.0, 16, 16).unwrap();
        assert_eq!(mesh.n_vertices(), 256);
        assert_eq!(mesh.n_triangles(), 512);
        assert_relative_eq!(mesh.total_area(), 1.0, max_relative = 1e-12);
        assert_eq!(mesh.euler_characteristic(), 0);
    }

    #[test]
    fn icosphere_area_converges_to_sphere() {
        let mesh = TriangleMesh::icosphere(3);
        let area = mesh.total_area();
        assert!((area - 4.0 * std::f64::consts::PI).abs() / (4.0 * std::f64::consts::PI) < 0.01);
        assert_eq!(mesh.euler_characteristic(), 2);
    }

    #[test]
    fn gauss_bonnet_total_defect() {
        // Sum of angle defects = 2 pi chi, exactly up to rounding.
        let sphere = TriangleMesh::icosphere(2);
        let expect = 2.0 * std::f64::consts::PI * 2.0;
        assert_relative_eq!(sphere.total_angle_defect(), expect, max_relative = 1e-9);

        let torus = TriangleMesh::torus_grid(1.0, 1.0, 8, 8).unwrap();
        assert!(torus.total_angle_defect().abs() < 1e-9);
    }

    #[test]
    fn periodic_triangles_unwrap_across_seam() {
        let mesh = TriangleMesh::torus_grid(1.0, 1.0, 4, 4).unwrap();
        for t in 0..mesh.n_triangles() {
            let [a, b, c] = mesh.triangle_corners(t);
            assert!(vec3::dist(a, b) < 0.5);
            assert!(vec3::dist(a, c) < 0.5);
        }
    }

    #[test]
    fn off_round_trip() {
        let text = "OFF\n4 4 6\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n3 0 2 1\n3 0 1 3\n3 0 3 2\n3 1 2 3\n";
        let mesh = TriangleMesh::from_off_str(text).unwrap();
        assert_eq!(mesh.n_vertices(), 4);
        assert_eq!(mesh.n_triangles(), 4);
        assert_eq!(mesh.euler_characteristic(), 2);
    }

    #[test]
    fn off_rejects_quads() {
        let text = "OFF\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n";
        assert!(TriangleMesh::from_off_str(text).is_err());
    }

    #[test]
    fn obj_parses_v_and_f_records() {
        let text = "# tetra\nv 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\nf 1 3 2\nf 1 2 4\nf 1 4 3\nf 2 3 4\n";
        let mesh = TriangleMesh::from_obj_str(text).unwrap();
        assert_eq!(mesh.n_triangles(), 4);
    }

    #[test]
    fn open_mesh_rejected() {
        // A single triangle: every edge borders one face.
        let err = TriangleMesh::new(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            vec![[0, 1, 2]],
        );
        assert!(err.is_err());
    }

    #[test]
    fn mixed_areas_partition_total_area() {
        let mesh = TriangleMesh::icosphere(2);
        let total: f64 = mesh.mixed_vertex_areas().iter().sum();
        assert_relative_eq!(total, mesh.total_area(), max_relative = 1e-10);
    }
}
