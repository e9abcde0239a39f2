//! Exact planar convex polygons.
//!
//! Predicates use a `1e-12` tolerance; derived polygons are cleaned of
//! near-duplicate and collinear vertices before validation.

use std::fmt::Write as _;

use crate::centroid::support_zp;
use crate::error::{invalid, LabError, Result};
use crate::orthogonal::Direction;
use crate::sampler::SampleBatch;

const EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }

    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }

    fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }
}

/// A convex polygon with counter-clockwise vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexPolygon {
    vertices: Vec<Point>,
}

impl ConvexPolygon {
    /// Validates and wraps a CCW vertex list.
    pub fn new(vertices: Vec<Point>) -> Result<Self> {
        let m = vertices.len();
        if m < 3 {
            return Err(LabError::InvalidPolygon(format!("{m} vertices, need at least 3")));
        }
        for i in 0..m {
            let a = vertices[i];
            let b = vertices[(i + 1) % m];
            let c = vertices[(i + 2) % m];
            if !(a.x.is_finite() && a.y.is_finite()) {
                return Err(LabError::InvalidPolygon("non-finite vertex".into()));
            }
            if b.sub(a).norm() <= EPS {
                return Err(LabError::InvalidPolygon(format!("duplicate vertex at index {i}")));
            }
            if b.sub(a).cross(c.sub(b)) < -EPS {
                return Err(LabError::InvalidPolygon(format!("reflex or clockwise turn at vertex {}", (i + 1) % m)));
            }
        }
        let poly = Self { vertices };
        if poly.signed_area() <= EPS {
            return Err(LabError::InvalidPolygon("non-positive area".into()));
        }
        Ok(poly)
    }

    /// Convex hull of a point cloud (monotone chain).
    pub fn hull(points: &[Point]) -> Result<Self> {
        let mut pts = points.to_vec();
        pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
        pts.dedup_by(|a, b| a.sub(*b).norm() <= EPS);
        if pts.len() < 3 {
            return Err(LabError::InvalidPolygon("fewer than 3 distinct points".into()));
        }
        let mut hull: Vec<Point> = Vec::with_capacity(2 * pts.len());
        for pass in 0..2 {
            let start = hull.len();
            let iter: Box<dyn Iterator<Item = &Point>> = if pass == 0 {
                Box::new(pts.iter())
            } else {
                Box::new(pts.iter().rev())
            };
            for &p in iter {
                while hull.len() >= start + 2 {
                    let a = hull[hull.len() - 2];
                    let b = hull[hull.len() - 1];
                    if b.sub(a).cross(p.sub(b)) <= EPS {
                        hull.pop();
                    } else {
                        break;
                    }
                }
                hull.push(p);
            }
            hull.pop();
        }
        Self::new(hull)
    }

    /// Axis-aligned box `[x0, x1] × [y0, y1]`.
    pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        Self::new(vec![
            Point::new(x0, y0),
            Point::new(x1, y0),
            Point::new(x1, y1),
            Point::new(x0, y1),
        ])
    }

    /// Regular `m`-gon with the given circumradius, first vertex at angle `phase`.
    pub fn regular(m: usize, circumradius: f64, phase: f64) -> Result<Self> {
        let step = std::f64::consts::TAU / m as f64;
        Self::new(
            (0..m)
                .map(|k| {
                    let a = phase + step * k as f64;
                    Point::new(circumradius * a.cos(), circumradius * a.sin())
                })
                .collect(),
        )
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    fn signed_area(&self) -> f64 {
        let m = self.vertices.len();
        0.5 * (0..m)
            .map(|i| self.vertices[i].cross(self.vertices[(i + 1) % m]))
            .sum::<f64>()
    }

    /// Shoelace area.
    pub fn area(&self) -> f64 {
        self.signed_area()
    }

    /// Volume radius `√(area/π)`.
    pub fn volume_radius(&self) -> f64 {
        (self.area() / std::f64::consts::PI).sqrt()
    }

    pub fn support(&self, theta: &Direction) -> f64 {
        let t = Point::new(theta.coords()[0], theta.coords()[1]);
        self.vertices
            .iter()
            .map(|v| v.dot(t))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `−P`.
    pub fn reflect(&self) -> ConvexPolygon {
        // Point reflection is a rotation by π, so orientation is preserved.
        ConvexPolygon {
            vertices: self.vertices.iter().map(|v| Point::new(-v.x, -v.y)).collect(),
        }
    }

    pub fn translate(&self, v: Point) -> ConvexPolygon {
        ConvexPolygon {
            vertices: self.vertices.iter().map(|p| p.add(v)).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Result<ConvexPolygon> {
        if !(s > 0.0) {
            return invalid("scale factor must be positive");
        }
        Ok(ConvexPolygon {
            vertices: self.vertices.iter().map(|p| Point::new(p.x * s, p.y * s)).collect(),
        })
    }

    /// Centroid of the region (triangle-fan formula).
    pub fn barycenter(&self) -> Point {
        let m = self.vertices.len();
        let o = self.vertices[0];
        let (mut cx, mut cy, mut a2) = (0.0, 0.0, 0.0);
        for i in 0..m {
            let p = self.vertices[i].sub(o);
            let q = self.vertices[(i + 1) % m].sub(o);
            let c = p.cross(q);
            a2 += c;
            cx += (p.x + q.x) * c;
            cy += (p.y + q.y) * c;
        }
        Point::new(o.x + cx / (3.0 * a2), o.y + cy / (3.0 * a2))
    }

    /// Edge-merge Minkowski sum, starting from the lowest-leftmost vertices.
    pub fn minkowski_sum(&self, other: &ConvexPolygon) -> Result<ConvexPolygon> {
        let p = rotate_to_lowest(&self.vertices);
        let q = rotate_to_lowest(&other.vertices);
        let (n, m) = (p.len(), q.len());
        let mut out = Vec::with_capacity(n + m);
        let (mut i, mut j) = (0, 0);
        while i < n || j < m {
            out.push(p[i % n].add(q[j % m]));
            let ep = p[(i + 1) % n].sub(p[i % n]);
            let eq = q[(j + 1) % m].sub(q[j % m]);
            let c = if i >= n {
                -1.0
            } else if j >= m {
                1.0
            } else {
                ep.cross(eq)
            };
            if c > 0.0 {
                i += 1;
            } else if c < 0.0 {
                j += 1;
            } else {
                i += 1;
                j += 1;
            }
        }
        ConvexPolygon::new(clean(out))
    }

    /// `P + {v}` for a single point.
    pub fn minkowski_point(&self, v: Point) -> ConvexPolygon {
        self.translate(v)
    }

    /// `P ∩ Q` by clipping `P` against each edge of `Q`; `None` when the
    /// intersection has area below `1e-12`.
    pub fn intersect(&self, other: &ConvexPolygon) -> Option<ConvexPolygon> {
        let m = other.vertices.len();
        let mut poly = self.vertices.clone();
        for k in 0..m {
            let a = other.vertices[k];
            let b = other.vertices[(k + 1) % m];
            let normal = Point::new(b.y - a.y, a.x - b.x);
            poly = clip_half_plane(&poly, normal, normal.dot(a));
            if poly.len() < 3 {
                return None;
            }
        }
        let poly = clean(poly);
        ConvexPolygon::new(poly).ok().filter(|p| p.area() >= EPS)
    }

    /// Intersection with the half-plane `⟨x, normal⟩ ≤ offset`.
    pub fn clip(&self, normal: Point, offset: f64) -> Option<ConvexPolygon> {
        let poly = clean(clip_half_plane(&self.vertices, normal, offset));
        ConvexPolygon::new(poly).ok().filter(|p| p.area() >= EPS)
    }

    /// Distance from the origin to the nearest edge line, negative when the
    /// origin lies outside.
    pub fn origin_margin(&self) -> f64 {
        let m = self.vertices.len();
        (0..m)
            .map(|k| {
                let a = self.vertices[k];
                let b = self.vertices[(k + 1) % m];
                let normal = Point::new(b.y - a.y, a.x - b.x);
                normal.dot(a) / normal.norm()
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Polar body: each edge line `⟨a, x⟩ = b` becomes the vertex `a / b`.
    pub fn polar(&self) -> Result<ConvexPolygon> {
        if self.origin_margin() <= 1e-9 {
            return invalid("origin is not strictly inside the polygon");
        }
        let m = self.vertices.len();
        let mut out = Vec::with_capacity(m);
        for k in 0..m {
            let a = self.vertices[k];
            let b = self.vertices[(k + 1) % m];
            let normal = Point::new(b.y - a.y, a.x - b.x);
            let offset = normal.dot(a);
            out.push(Point::new(normal.x / offset, normal.y / offset));
        }
        ConvexPolygon::new(clean(out))
    }

    /// Text form: one `x y` line per vertex, CCW.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for v in &self.vertices {
            let _ = writeln!(s, "{} {}", v.x, v.y);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<ConvexPolygon> {
        let mut vertices = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let parse = |t: Option<&str>| -> Result<f64> {
                t.and_then(|t| t.parse().ok())
                    .ok_or_else(|| LabError::InvalidPolygon(format!("line {}: expected `x y`", lineno + 1)))
            };
            let x = parse(parts.next())?;
            let y = parse(parts.next())?;
            if parts.next().is_some() {
                return Err(LabError::InvalidPolygon(format!("line {}: trailing data", lineno + 1)));
            }
            vertices.push(Point::new(x, y));
        }
        ConvexPolygon::new(vertices)
    }
}

fn rotate_to_lowest(v: &[Point]) -> Vec<Point> {
    let start = (0..v.len())
        .min_by(|&a, &b| v[a].y.total_cmp(&v[b].y).then(v[a].x.total_cmp(&v[b].x)))
        .unwrap_or(0);
    v[start..].iter().chain(&v[..start]).copied().collect()
}

fn clip_half_plane(poly: &[Point], normal: Point, offset: f64) -> Vec<Point> {
    let m = poly.len();
    let mut out = Vec::with_capacity(m + 1);
    for k in 0..m {
        let cur = poly[k];
        let next = poly[(k + 1) % m];
        let dc = normal.dot(cur) - offset;
        let dn = normal.dot(next) - offset;
        if dc <= 0.0 {
            out.push(cur);
        }
        if (dc < 0.0 && dn > 0.0) || (dc > 0.0 && dn < 0.0) {
            let t = dc / (dc - dn);
            out.push(Point::new(cur.x + t * (next.x - cur.x), cur.y + t * (next.y - cur.y)));
        }
    }
    out
}

/// Drops near-duplicate vertices and merges collinear runs.
fn clean(mut v: Vec<Point>) -> Vec<Point> {
    loop {
        let m = v.len();
        if m < 3 {
            return v;
        }
        let scale = v.iter().map(|p| p.norm()).fold(1.0, f64::max);
        let mut drop = None;
        for i in 0..m {
            let prev = v[(i + m - 1) % m];
            let cur = v[i];
            let next = v[(i + 1) % m];
            if cur.sub(prev).norm() <= EPS * scale {
                drop = Some(i);
                break;
            }
            let e1 = cur.sub(prev);
            let e2 = next.sub(cur);
            if e1.cross(e2).abs() <= EPS * scale * (e1.norm() + e2.norm()) && e1.dot(e2) > 0.0 {
                drop = Some(i);
                break;
            }
        }
        match drop {
            Some(i) => {
                v.remove(i);
            }
            None => return v,
        }
    }
}

/// `area(P − P) / area(P)`; lies in `[4, 6]` in the plane.
pub fn rogers_shephard_ratio(p: &ConvexPolygon) -> Result<f64> {
    Ok(p.minkowski_sum(&p.reflect())?.area() / p.area())
}

/// `area(P ∩ −P) / area(P)` for a polygon with barycenter at the origin.
pub fn milman_pajor_ratio(p: &ConvexPolygon) -> Result<f64> {
    let c = p.barycenter();
    if c.norm() > 1e-9 {
        return invalid(format!("barycenter ({}, {}) is not at the origin", c.x, c.y));
    }
    Ok(p.intersect(&p.reflect()).map_or(0.0, |s| s.area()) / p.area())
}

/// Outer polygonal model of the empirical `Z_p` of a planar batch: the
/// intersection of the half-planes `⟨x, θ_k⟩ ≤ h_{Z_p}(θ_k)` over
/// `angle_count` equally spaced angles.
pub fn zp_polygon(batch: &SampleBatch, p: f64, angle_count: usize) -> Result<ConvexPolygon> {
    if batch.dimension() != 2 {
        return invalid("zp_polygon needs a planar batch");
    }
    if angle_count < 16 {
        return invalid("zp_polygon needs at least 16 angles");
    }
    let mut supports = Vec::with_capacity(angle_count);
    for k in 0..angle_count {
        let theta = Direction::planar(std::f64::consts::TAU * k as f64 / angle_count as f64);
        let h = support_zp(batch, &theta, p)?.value;
        supports.push((theta, h));
    }
    let big = 2.0 * supports.iter().map(|(_, h)| *h).fold(0.0, f64::max);
    let mut poly = ConvexPolygon::rectangle(-big, -big, big, big)?;
    for (theta, h) in &supports {
        let normal = Point::new(theta.coords()[0], theta.coords()[1]);
        poly = poly
            .clip(normal, *h)
            .ok_or_else(|| LabError::InvalidPolygon("empty centroid-body model".into()))?;
    }
    Ok(poly)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn square() -> ConvexPolygon {
        ConvexPolygon::rectangle(-1.0, -1.0, 1.0, 1.0).unwrap()
    }

    fn triangle() -> ConvexPolygon {
        ConvexPolygon::new(vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0)]).unwrap()
    }

    fn diamond() -> ConvexPolygon {
        ConvexPolygon::new(vec![
            Point::new(1.0, 0.0),
            Point::new(0.0, 1.0),
            Point::new(-1.0, 0.0),
            Point::new(0.0, -1.0),
        ])
        .unwrap()
    }

    #[test]
    fn validation() {
        assert!(ConvexPolygon::new(vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0)]).is_err());
        // clockwise
        assert!(ConvexPolygon::new(vec![Point::new(0.0, 0.0), Point::new(0.0, 1.0), Point::new(1.0, 0.0)]).is_err());
        // duplicate
        assert!(ConvexPolygon::new(vec![
            Point::new(0.0, 0.0),
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(0.0, 1.0)
        ])
        .is_err());
        // collinear
        assert!(ConvexPolygon::new(vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(2.0, 0.0)]).is_err());
    }

    #[test]
    fn areas() {
        assert!((square().area() - 4.0).abs() < 1e-15);
        assert!((triangle().area() - 0.5).abs() < 1e-15);
        let hex = ConvexPolygon::regular(6, 1.0, 0.0).unwrap();
        assert!((hex.area() - 1.5 * 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn minkowski_examples() {
        let s2 = square().minkowski_sum(&square()).unwrap();
        assert_eq!(s2.vertices().len(), 4);
        assert!((s2.area() - 16.0).abs() < 1e-12);
        let e1 = Direction::axis(2, 0).unwrap();
        assert!((s2.support(&e1) - 2.0).abs() < 1e-12);
        let t = triangle();
        let hex = t.minkowski_sum(&t.reflect()).unwrap();
        assert_eq!(hex.vertices().len(), 6);
        assert!((hex.area() - 3.0).abs() < 1e-12);
        let moved = t.minkowski_point(Point::new(2.0, -1.0));
        assert!((moved.vertices()[0].x - 2.0).abs() < 1e-15);
    }

    #[test]
    fn support_additivity_on_grid() {
        let p = ConvexPolygon::regular(5, 1.3, 0.2).unwrap();
        let q = ConvexPolygon::hull(&[
            Point::new(0.0, 0.0),
            Point::new(2.0, 0.5),
            Point::new(1.0, 2.0),
            Point::new(-0.5, 1.0),
        ])
        .unwrap();
        let s = p.minkowski_sum(&q).unwrap();
        for k in 0..360 {
            let th = Direction::planar(k as f64 * PI / 180.0);
            assert!((s.support(&th) - p.support(&th) - q.support(&th)).abs() < 1e-9);
            assert!((p.reflect().support(&th) - p.support(&th.neg())).abs() < 1e-12);
        }
    }

    #[test]
    fn reflect_examples() {
        let t = triangle();
        assert_eq!(t.reflect().reflect(), t);
        let r = t.reflect();
        assert_eq!(r.vertices()[1], Point::new(-1.0, 0.0));
        assert_eq!(r.vertices()[2], Point::new(0.0, -1.0));
        let sq = square();
        assert!((sq.reflect().intersect(&sq).unwrap().area() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn intersections() {
        let sq = square();
        assert!((sq.intersect(&sq).unwrap().area() - 4.0).abs() < 1e-12);
        assert!((sq.intersect(&diamond()).unwrap().area() - 2.0).abs() < 1e-12);
        let far = sq.translate(Point::new(5.0, 0.0));
        assert!(sq.intersect(&far).is_none());
        // touching along an edge has zero area
        let touching = sq.translate(Point::new(2.0, 0.0));
        assert!(sq.intersect(&touching).is_none());
    }

    #[test]
    fn centered_triangle_symmetrization() {
        let t = triangle();
        let c = t.barycenter();
        assert!((c.x - 1.0 / 3.0).abs() < 1e-15 && (c.y - 1.0 / 3.0).abs() < 1e-15);
        let t0 = t.translate(Point::new(-c.x, -c.y));
        let b = t0.barycenter();
        assert!(b.x.abs() < 1e-12 && b.y.abs() < 1e-12);
        let s = t0.intersect(&t0.reflect()).unwrap();
        assert_eq!(s.vertices().len(), 6);
        assert!((s.area() / t0.area() - 2.0 / 3.0).abs() < 1e-12);
        assert!((milman_pajor_ratio(&t0).unwrap() - 2.0 / 3.0).abs() < 1e-9);
        assert!(milman_pajor_ratio(&t).is_err());
        assert!((milman_pajor_ratio(&square()).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rogers_shephard_examples() {
        assert!((rogers_shephard_ratio(&triangle()).unwrap() - 6.0).abs() < 1e-9);
        assert!((rogers_shephard_ratio(&square()).unwrap() - 4.0).abs() < 1e-9);
    }

    #[test]
    fn polar_examples() {
        let d = square().polar().unwrap();
        let want = diamond();
        assert!((d.area() - 2.0).abs() < 1e-12);
        for v in want.vertices() {
            assert!(d.vertices().iter().any(|w| w.sub(*v).norm() < 1e-12));
        }
        // polar of r·(regular m-gon) is the dual m-gon with circumradius 1/(r cos(π/m))
        let (m, r) = (7, 1.7);
        let p = ConvexPolygon::regular(m, r, 0.3).unwrap();
        let pp = p.polar().unwrap();
        let expect = 1.0 / (r * (PI / m as f64).cos());
        for v in pp.vertices() {
            assert!((v.norm() - expect).abs() < 1e-12);
        }
        let back = pp.polar().unwrap();
        assert_eq!(back.vertices().len(), m);
        for v in p.vertices() {
            assert!(back.vertices().iter().any(|w| w.sub(*v).norm() < 1e-9));
        }
        assert!(triangle().polar().is_err());
    }

    #[test]
    fn text_roundtrip() {
        let p = ConvexPolygon::regular(5, 0.1 + 0.2, 0.7).unwrap();
        let back = ConvexPolygon::from_text(&p.to_text()).unwrap();
        assert_eq!(back, p);
        assert!(ConvexPolygon::from_text("0 0\n1 x\n0 1\n").is_err());
        assert!(ConvexPolygon::from_text("0 0 0\n1 0\n0 1\n").is_err());
    }

    #[test]
    fn hull_drops_interior_points() {
        let h = ConvexPolygon::hull(&[
            Point::new(0.0, 0.0),
            Point::new(2.0, 0.0),
            Point::new(1.0, 0.5),
            Point::new(2.0, 2.0),
            Point::new(1.0, 0.0),
            Point::new(0.0, 2.0),
        ])
        .unwrap();
        assert_eq!(h.vertices().len(), 4);
        assert!((h.area() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn zp_polygon_rejects_bad_input() {
        let b = SampleBatch::from_rows(3, vec![1.0; 9]).unwrap();
        assert!(zp_polygon(&b, 2.0, 32).is_err());
        let b2 = SampleBatch::from_rows(2, vec![1.0, 0.0, 0.0, 1.0, -1.0, -1.0]).unwrap();
        assert!(zp_polygon(&b2, 2.0, 8).is_err());
        let poly = zp_polygon(&b2, 2.0, 64).unwrap();
        for k in 0..64 {
            let th = Direction::planar(std::f64::consts::TAU * k as f64 / 64.0);
            assert!(poly.support(&th) >= support_zp(&b2, &th, 2.0).unwrap().value - 1e-9);
        }
    }
}
