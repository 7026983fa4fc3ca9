//! Sublevel regions of per-vertex scalar fields.
//!
//! A region `{f <= level}` of a linearly interpolated field is a union of
//! full triangles and clipped polygons inside partially covered triangles.
//! Areas, boundary polylines and segment clipping are all exact for the
//! interpolant, which keeps the measure bookkeeping consistent across
//! geodesic balls, tubular neighborhoods and integration domains.

use crate::mesh::TriangleMesh;
use crate::vec3::{self, V3};

#[derive(Debug, Clone)]
pub struct PartialTriangle {
    pub tri: usize,
    /// Clip polygon in unwrapped coordinates, 3 or 4 corners.
    pub polygon: Vec<V3>,
    pub area: f64,
}

/// `{f <= level}` for a per-vertex field `f`.
#[derive(Debug, Clone)]
pub struct Region {
    pub level: f64,
    /// Triangles with all three corners at or below the level.
    pub full: Vec<usize>,
    pub partial: Vec<PartialTriangle>,
    /// Vertices with `f <= level`.
    pub vertices: Vec<usize>,
    /// Exact area of the interpolant sublevel set.
    pub area: f64,
    /// Level-line segments, oriented counterclockwise with respect to the
    /// outward field gradient.
    pub boundary: Vec<[V3; 2]>,
    pub boundary_length: f64,
}

impl Region {
    /// Build the sublevel region `{f <= level}`.
    pub fn sublevel(mesh: &TriangleMesh, values: &[f64], level: f64) -> Region {
        assert_eq!(values.len(), mesh.n_vertices());
        let mut full = Vec::new();
        let mut partial = Vec::new();
        let mut boundary = Vec::new();
        let mut area = 0.0;
        let mut boundary_length = 0.0;

        for t in 0..mesh.n_triangles() {
            let tri = mesh.triangle(t);
            let corners = mesh.triangle_corners(t);
            let f = [values[tri[0]], values[tri[1]], values[tri[2]]];
            let inside = [f[0] <= level, f[1] <= level, f[2] <= level];
            let n_in = inside.iter().filter(|&&b| b).count();
            if n_in == 3 {
                area += mesh.area(t);
                full.push(t);
                continue;
            }
            if n_in == 0 {
                continue;
            }

            // Clip polygon: kept corners plus edge crossings, in edge order.
            let mut poly = Vec::with_capacity(4);
            let mut crossings = Vec::with_capacity(2);
            for k in 0..3 {
                let j = (k + 1) % 3;
                if inside[k] {
                    poly.push(corners[k]);
                }
                if inside[k] != inside[j] {
                    let t_cross = (level - f[k]) / (f[j] - f[k]);
                    let p = vec3::lerp(corners[k], corners[j], t_cross);
                    poly.push(p);
                    crossings.push(p);
                }
            }
            let poly_area = planar_polygon_area(&poly);
            area += poly_area;

            if crossings.len() == 2 {
                let seg = orient_boundary_segment(
                    [crossings[0], crossings[1]],
                    &corners,
                    &f,
                );
                boundary_length += vec3::dist(seg[0], seg[1]);
                boundary.push(seg);
            }
            partial.push(PartialTriangle {
                tri: t,
                polygon: poly,
                area: poly_area,
            });
        }

        let vertices = (0..mesh.n_vertices())
            .filter(|&v| values[v] <= level)
            .collect();

        Region {
            level,
            full,
            partial,
            vertices,
            area,
            boundary,
            boundary_length,
        }
    }

    /// A region made of whole triangles (no clipping).
    pub fn from_triangles(mesh: &TriangleMesh, mut tris: Vec<usize>) -> Region {
        tris.sort_unstable();
        tris.dedup();
        let area = tris.iter().map(|&t| mesh.area(t)).sum();
        let mut in_set = vec![false; mesh.n_triangles()];
        for &t in &tris {
            in_set[t] = true;
        }
        // Perimeter: edges bordering exactly one triangle of the set.
        let mut boundary = Vec::new();
        let mut boundary_length = 0.0;
        for e in mesh.edges() {
            if in_set[e.tris[0]] != in_set[e.tris[1]] {
                let pa = mesh.vertex(e.v[0]);
                let pb = mesh.unwrap_point(mesh.vertex(e.v[1]), pa);
                boundary_length += vec3::dist(pa, pb);
                boundary.push([pa, pb]);
            }
        }
        let mut vertices: Vec<usize> = tris
            .iter()
            .flat_map(|&t| mesh.triangle(t))
            .collect();
        vertices.sort_unstable();
        vertices.dedup();
        Region {
            level: 0.0,
            full: tris,
            partial: Vec::new(),
            vertices,
            area,
            boundary,
            boundary_length,
        }
    }

    /// Whole-surface region.
    pub fn whole(mesh: &TriangleMesh) -> Region {
        Region::from_triangles(mesh, (0..mesh.n_triangles()).collect())
    }

    pub fn is_empty(&self) -> bool {
        self.full.is_empty() && self.partial.is_empty()
    }

    /// Triangle membership: `Full`, `Partial` (with index into `partial`) or
    /// `Outside`.
    pub fn classify(&self, mesh: &TriangleMesh) -> Vec<Membership> {
        let mut m = vec![Membership::Outside; mesh.n_triangles()];
        for &t in &self.full {
            m[t] = Membership::Full;
        }
        for (i, p) in self.partial.iter().enumerate() {
            m[p.tri] = Membership::Partial(i);
        }
        m
    }

    /// Length of the part of segment `[p, q]` inside the region, assuming the
    /// segment lies in triangle `tri` of the region's mesh. Exact for the
    /// linear interpolant that defined the region.
    pub fn clip_segment_length(
        &self,
        mesh: &TriangleMesh,
        values: Option<&[f64]>,
        tri: usize,
        p: V3,
        q: V3,
    ) -> f64 {
        let len = vec3::dist(p, q);
        match self.membership_of(tri) {
            Membership::Full => len,
            Membership::Outside => 0.0,
            Membership::Partial(_) => {
                let values = match values {
                    Some(v) => v,
                    // Whole-triangle regions have no partials, so values are
                    // only needed on the clipped path.
                    None => return 0.0,
                };
                let t = mesh.triangle(tri);
                let interp = |x: V3| {
                    let b = mesh.barycentric(tri, x);
                    b[0] * values[t[0]] + b[1] * values[t[1]] + b[2] * values[t[2]]
                };
                let fp = interp(p) - self.level;
                let fq = interp(q) - self.level;
                match (fp <= 0.0, fq <= 0.0) {
                    (true, true) => len,
                    (false, false) => 0.0,
                    (true, false) => len * (0.0 - fp) / (fq - fp),
                    (false, true) => len * (1.0 - (0.0 - fp) / (fq - fp)),
                }
            }
        }
    }

    fn membership_of(&self, tri: usize) -> Membership {
        if self.full.binary_search(&tri).is_ok() {
            return Membership::Full;
        }
        if let Some(i) = self.partial.iter().position(|p| p.tri == tri) {
            return Membership::Partial(i);
        }
        Membership::Outside
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Membership {
    Full,
    Partial(usize),
    Outside,
}

/// Area of a convex planar polygon given in order.
fn planar_polygon_area(poly: &[V3]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut acc = [0.0; 3];
    for i in 1..poly.len() - 1 {
        let c = vec3::cross(
            vec3::sub(poly[i], poly[0]),
            vec3::sub(poly[i + 1], poly[0]),
        );
        acc = vec3::add(acc, c);
    }
    0.5 * vec3::norm(acc)
}

/// Orient a level-line segment so travel direction = normal x gradient
/// (counterclockwise around the sublevel set, seen from outside).
fn orient_boundary_segment(seg: [V3; 2], corners: &[V3; 3], f: &[f64; 3]) -> [V3; 2] {
    let e1 = vec3::sub(corners[1], corners[0]);
    let e2 = vec3::sub(corners[2], corners[0]);
    let normal = vec3::cross(e1, e2);
    // In-plane gradient of the linear interpolant.
    let n2 = vec3::dot(normal, normal);
    let g1 = vec3::scale(vec3::cross(normal, vec3::sub(corners[0], corners[2])), (f[1] - f[0]) / n2);
    let grad = vec3::add(
        g1,
        vec3::scale(vec3::cross(normal, vec3::sub(corners[1], corners[0])), (f[2] - f[0]) / n2),
    );
    let want = vec3::cross(normal, grad);
    if vec3::dot(vec3::sub(seg[1], seg[0]), want) < 0.0 {
        [seg[1], seg[0]]
    } else {
        seg
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn strip_area_on_torus_grid() {
        let mesh = TriangleMesh::torus_grid(1.0, 1.0, 32, 32).unwrap();
        // f = wraparound distance to the line x = 0.5; strip of half-width 1/4.
        let values: Vec<f64> = (0..mesh.n_vertices())
            .map(|v| {
                let x = mesh.vertex(v)[0];
                let d = (x - 0.5).abs();
                d.min(1.0 - d)
            })
            .collect();
        let region = Region::sublevel(&mesh, &values, 0.25 + 1e-12);
        assert_relative_eq!(region.area, 0.5, max_relative = 1e-6);
    }

    #[test]
    fn clipped_disc_area() {
        let mesh = TriangleMesh::torus_grid(1.0, 1.0, 64, 64).unwrap();
        let c = [0.5, 0.5, 0.0];
        let values: Vec<f64> = (0..mesh.n_vertices())
            .map(|v| vec3::dist(mesh.vertex(v), c))
            .collect();
        let r = 0.1;
        let region = Region::sublevel(&mesh, &values, r);
        assert_relative_eq!(region.area, std::f64::consts::PI * r * r, max_relative = 0.02);
        assert_relative_eq!(
            region.boundary_length,
            2.0 * std::f64::consts::PI * r,
            max_relative = 0.02
        );
    }

    #[test]
    fn empty_and_whole_levels() {
        let mesh = TriangleMesh::torus_grid(1.0, 1.0, 8, 8).unwrap();
        let values: Vec<f64> = (0..mesh.n_vertices()).map(|v| mesh.vertex(v)[0]).collect();
        let empty = Region::sublevel(&mesh, &values, -1.0);
        assert!(empty.is_empty());
        assert_eq!(empty.area, 0.0);
        let whole = Region::sublevel(&mesh, &values, 2.0);
        assert_relative_eq!(whole.area, mesh.total_area(), max_relative = 1e-12);
        assert_eq!(whole.boundary.len(), 0);
    }

    #[test]
    fn sublevel_areas_monotone_in_level() {
        let mesh = TriangleMesh::torus_grid(1.0, 1.0, 16, 16).unwrap();
        let values: Vec<f64> = (0..mesh.n_vertices())
            .map(|v| (2.0 * std::f64::consts::PI * mesh.vertex(v)[0]).sin())
            .collect();
        let mut last = 0.0;
        for i in 0..12 {
            let level = -1.0 + 0.2 * i as f64;
            let region = Region::sublevel(&mesh, &values, level);
            assert!(region.area >= last - 1e-12);
            last = region.area;
        }
    }

    #[test]
    fn triangle_set_region_perimeter() {
        let mesh = TriangleMesh::torus_grid(1.0, 1.0, 8, 8).unwrap();
        // Both triangles of cell (0,0) form a unit cell: perimeter 4 * (1/8).
        let region = Region::from_triangles(&mesh, vec![0, 1]);
        assert_relative_eq!(region.area, 1.0 / 64.0, max_relative = 1e-12);
        assert_relative_eq!(region.boundary_length, 0.5, max_relative = 1e-12);
    }
}
