//! Halfspace intersections through the dual convex hull.
//!
//! The body `{ y : y·x_i ≤ g_i }` is polar-dual to the convex hull of the
//! points `x_i / g_i`: each hull facet through points `i, j, k` is a vertex
//! `v` of the intersection solving `x_i·v = g_i`, `x_j·v = g_j`, `x_k·v = g_k`.

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};

use crate::error::{Error, Result};

/// Vertices of the intersection of the halfspaces `{ y : y·n_i ≤ g_i }`,
/// together with the indices of the constraints that touch the boundary.
#[derive(Clone, Debug)]
pub struct HalfspaceIntersection {
    pub vertices: Vec<[f64; 3]>,
    pub active: Vec<bool>,
}

impl HalfspaceIntersection {
    /// Support function of the polytope in direction `u`.
    pub fn support(&self, u: &[f64; 3]) -> f64 {
        self.vertices
            .iter()
            .map(|v| u[0] * v[0] + u[1] * v[1] + u[2] * v[2])
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Intersection of planar halfplanes; `normals` are unit vectors (third
/// component ignored) and `offsets` are positive.
pub fn intersect_halfplanes(normals: &[[f64; 3]], offsets: &[f64]) -> Result<HalfspaceIntersection> {
    let pts: Vec<Vector2<f64>> = normals
        .iter()
        .zip(offsets)
        .map(|(n, g)| Vector2::new(n[0] / g, n[1] / g))
        .collect();
    let hull = hull_2d(&pts);
    if hull.len() < 3 {
        return Err(Error::DegenerateBody("dual hull has fewer than three vertices".into()));
    }
    let mut active = vec![false; pts.len()];
    let mut vertices = Vec::with_capacity(hull.len());
    for e in 0..hull.len() {
        let (a, b) = (hull[e], hull[(e + 1) % hull.len()]);
        active[a] = true;
        // the edge's supporting line must keep the origin strictly inside
        let (pa, pb) = (pts[a], pts[b]);
        let cross = pa.x * pb.y - pa.y * pb.x;
        if cross <= 1e-14 * pa.norm() * pb.norm() {
            return Err(Error::DegenerateBody(
                "origin is not interior to the dual hull (unbounded intersection)".into(),
            ));
        }
        let m = Matrix2::new(normals[a][0], normals[a][1], normals[b][0], normals[b][1]);
        let rhs = Vector2::new(offsets[a], offsets[b]);
        let v = m
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::DegenerateBody("parallel adjacent halfplanes".into()))?;
        vertices.push([v.x, v.y, 0.0]);
    }
    Ok(HalfspaceIntersection { vertices, active })
}

/// Counter-clockwise hull (monotone chain), collinear points dropped.
pub fn hull_2d(pts: &[Vector2<f64>]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..pts.len()).collect();
    idx.sort_by(|&a, &b| {
        pts[a]
            .x
            .total_cmp(&pts[b].x)
            .then(pts[a].y.total_cmp(&pts[b].y))
    });
    if idx.len() < 3 {
        return idx;
    }
    let cross = |o: usize, a: usize, b: usize| {
        let (o, a, b) = (pts[o], pts[a], pts[b]);
        (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
    };
    let mut hull: Vec<usize> = Vec::with_capacity(2 * idx.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &usize>> = if pass == 0 {
            Box::new(idx.iter())
        } else {
            Box::new(idx.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

#[derive(Clone, Debug)]
struct Face {
    v: [usize; 3],
    normal: Vector3<f64>,
    offset: f64,
    alive: bool,
}

/// Triangulated convex hull in 3D (incremental insertion); returns outward
/// oriented triangles.
pub fn hull_3d(pts: &[Vector3<f64>]) -> Result<Vec<[usize; 3]>> {
    let n = pts.len();
    if n < 4 {
        return Err(Error::DegenerateBody("fewer than four points".into()));
    }
    let scale = pts.iter().fold(0.0f64, |a, p| a.max(p.amax()));
    let eps = 1e-12 * scale;

    // initial tetrahedron from extreme points
    let i0 = (0..n).max_by(|&a, &b| pts[a].x.total_cmp(&pts[b].x)).unwrap_or(0);
    let i1 = (0..n)
        .max_by(|&a, &b| (pts[a] - pts[i0]).norm().total_cmp(&(pts[b] - pts[i0]).norm()))
        .unwrap_or(0);
    let line = (pts[i1] - pts[i0]).normalize();
    let dist_line = |p: &Vector3<f64>| {
        let d = p - pts[i0];
        (d - line * d.dot(&line)).norm()
    };
    let i2 = (0..n)
        .max_by(|&a, &b| dist_line(&pts[a]).total_cmp(&dist_line(&pts[b])))
        .unwrap_or(0);
    let plane = (pts[i1] - pts[i0]).cross(&(pts[i2] - pts[i0]));
    if plane.norm() <= eps * scale {
        return Err(Error::DegenerateBody("points are collinear".into()));
    }
    let plane = plane.normalize();
    let i3 = (0..n)
        .max_by(|&a, &b| {
            (pts[a] - pts[i0])
                .dot(&plane)
                .abs()
                .total_cmp(&(pts[b] - pts[i0]).dot(&plane).abs())
        })
        .unwrap_or(0);
    if (pts[i3] - pts[i0]).dot(&plane).abs() <= eps {
        return Err(Error::DegenerateBody("points are coplanar".into()));
    }
    let interior = (pts[i0] + pts[i1] + pts[i2] + pts[i3]) / 4.0;

    let make_face = |a: usize, b: usize, c: usize| -> Face {
        let mut v = [a, b, c];
        let mut normal = (pts[b] - pts[a]).cross(&(pts[c] - pts[a]));
        if normal.dot(&(interior - pts[a])) > 0.0 {
            v.swap(1, 2);
            normal = -normal;
        }
        let normal = normal.normalize();
        Face {
            v,
            normal,
            offset: normal.dot(&pts[v[0]]),
            alive: true,
        }
    };

    let mut faces = vec![
        make_face(i0, i1, i2),
        make_face(i0, i1, i3),
        make_face(i0, i2, i3),
        make_face(i1, i2, i3),
    ];
    let seed = [i0, i1, i2, i3];
    let mut edges: std::collections::HashSet<(usize, usize)> = Default::default();
    for p in (0..n).filter(|p| !seed.contains(p)) {
        let visible: Vec<usize> = (0..faces.len())
            .filter(|&f| faces[f].alive && faces[f].normal.dot(&pts[p]) - faces[f].offset > eps)
            .collect();
        if visible.is_empty() {
            continue;
        }
        edges.clear();
        for &f in &visible {
            let v = faces[f].v;
            for k in 0..3 {
                edges.insert((v[k], v[(k + 1) % 3]));
            }
            faces[f].alive = false;
        }
        let horizon: Vec<(usize, usize)> = edges
            .iter()
            .filter(|&&(a, b)| !edges.contains(&(b, a)))
            .copied()
            .collect();
        for (a, b) in horizon {
            let normal = (pts[b] - pts[a]).cross(&(pts[p] - pts[a]));
            let len = normal.norm();
            if len == 0.0 {
                continue;
            }
            let normal = normal / len;
            faces.push(Face {
                v: [a, b, p],
                normal,
                offset: normal.dot(&pts[a]),
                alive: true,
            });
        }
        if faces.len() > 8 * n {
            faces.retain(|f| f.alive);
        }
    }
    Ok(faces.into_iter().filter(|f| f.alive).map(|f| f.v).collect())
}

/// Intersection of halfspaces in R^3 with unit `normals` and positive `offsets`.
pub fn intersect_halfspaces(normals: &[[f64; 3]], offsets: &[f64]) -> Result<HalfspaceIntersection> {
    let pts: Vec<Vector3<f64>> = normals
        .iter()
        .zip(offsets)
        .map(|(n, g)| Vector3::new(n[0], n[1], n[2]) / *g)
        .collect();
    let tris = hull_3d(&pts)?;
    let mut active = vec![false; pts.len()];
    let mut vertices = Vec::with_capacity(tris.len());
    for t in tris {
        let (a, b, c) = (pts[t[0]], pts[t[1]], pts[t[2]]);
        let normal = (b - a).cross(&(c - a));
        if normal.dot(&a) <= 1e-14 * normal.norm() * a.norm() {
            return Err(Error::DegenerateBody(
                "origin is not interior to the dual hull (unbounded intersection)".into(),
            ));
        }
        let m = Matrix3::from_rows(&[
            Vector3::from(normals[t[0]]).transpose(),
            Vector3::from(normals[t[1]]).transpose(),
            Vector3::from(normals[t[2]]).transpose(),
        ]);
        let rhs = Vector3::new(offsets[t[0]], offsets[t[1]], offsets[t[2]]);
        let Some(v) = m.lu().solve(&rhs) else {
            continue;
        };
        for &k in &t {
            active[k] = true;
        }
        vertices.push([v.x, v.y, v.z]);
    }
    Ok(HalfspaceIntersection { vertices, active })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_from_four_halfplanes() {
        let normals = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]];
        let p = intersect_halfplanes(&normals, &[1.0; 4]).unwrap();
        assert_eq!(p.vertices.len(), 4);
        let s = 0.5f64.sqrt();
        assert!((p.support(&[s, s, 0.0]) - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn redundant_halfplane_is_inactive() {
        let normals = [
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [-1.0, 0.0, 0.0],
            [0.0, -1.0, 0.0],
            [0.5f64.sqrt(), 0.5f64.sqrt(), 0.0],
        ];
        let p = intersect_halfplanes(&normals, &[1.0, 1.0, 1.0, 1.0, 5.0]).unwrap();
        assert!(!p.active[4]);
        assert!(p.active[..4].iter().all(|&a| a));
    }

    #[test]
    fn unbounded_intersection_is_degenerate() {
        let normals = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.5f64.sqrt(), 0.5f64.sqrt(), 0.0]];
        assert!(intersect_halfplanes(&normals, &[1.0; 3]).is_err());
    }

    #[test]
    fn cube_from_six_halfspaces() {
        let normals = [
            [1.0, 0.0, 0.0],
            [-1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, -1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.0, 0.0, -1.0],
        ];
        let p = intersect_halfspaces(&normals, &[1.0; 6]).unwrap();
        let s = 1.0 / 3f64.sqrt();
        assert!((p.support(&[s, s, s]) - 3f64.sqrt()).abs() < 1e-12);
        assert!((p.support(&[1.0, 0.0, 0.0]) - 1.0).abs() < 1e-12);
        assert!(p.active.iter().all(|&a| a));
    }

    #[test]
    fn hull_of_sphere_points_uses_every_point() {
        // Fibonacci lattice: no four points coplanar
        let n = 300;
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        let pts: Vec<Vector3<f64>> = (0..n)
            .map(|i| {
                let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                let r = (1.0 - z * z).sqrt();
                let a = golden * i as f64;
                Vector3::new(r * a.cos(), r * a.sin(), z)
            })
            .collect();
        let tris = hull_3d(&pts).unwrap();
        let mut used = vec![false; pts.len()];
        for t in &tris {
            for &k in t {
                used[k] = true;
            }
        }
        assert!(used.iter().all(|&u| u));
        // Euler: a triangulated sphere with V vertices has 2V - 4 faces
        assert_eq!(tris.len(), 2 * pts.len() - 4);
    }
}
