//! Planar primitives: points, convex domains, projection, uniform sampling and
//! the two travel metrics.

use std::ops::{Add, Mul, Sub};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point (or vector) in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    /// z-component of the cross product.
    pub fn cross(self, other: Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }
}

/// Travel metric used for response distances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    #[default]
    L2,
    L1,
}

pub fn distance(p: Point2, q: Point2, norm: Norm) -> f64 {
    let dx = p.x - q.x;
    let dy = p.y - q.y;
    match norm {
        Norm::L2 => dx.hypot(dy),
        Norm::L1 => dx.abs() + dy.abs(),
    }
}

/// Axis-aligned rectangle `[min.x, max.x] × [min.y, max.y]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Point2,
    pub max: Point2,
}

impl Rect {
    pub fn new(min: Point2, max: Point2) -> Result<Self> {
        if !min.is_finite() || !max.is_finite() {
            return Err(Error::input("rectangle corners must be finite"));
        }
        if min.x > max.x || min.y > max.y {
            return Err(Error::input("rectangle min corner exceeds max corner"));
        }
        Ok(Self { min, max })
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> Point2 {
        Point2::new(0.5 * (self.min.x + self.max.x), 0.5 * (self.min.y + self.max.y))
    }

    /// Corners in counter-clockwise order starting at `min`.
    pub fn corners(&self) -> [Point2; 4] {
        [
            self.min,
            Point2::new(self.max.x, self.min.y),
            self.max,
            Point2::new(self.min.x, self.max.y),
        ]
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point2 {
        Point2::new(
            self.min.x + rng.random::<f64>() * self.width(),
            self.min.y + rng.random::<f64>() * self.height(),
        )
    }

    pub fn to_polygon(&self) -> ConvexPolygon {
        convex_hull(&self.corners()).expect("rectangle corners are finite")
    }
}

/// Closed convex polygon stored counter-clockwise with collinear vertices
/// removed. One vertex is a point, two vertices a segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Point2>", into = "Vec<Point2>")]
pub struct ConvexPolygon {
    vertices: Vec<Point2>,
}

impl TryFrom<Vec<Point2>> for ConvexPolygon {
    type Error = Error;
    fn try_from(v: Vec<Point2>) -> Result<Self> {
        convex_hull(&v)
    }
}

impl From<ConvexPolygon> for Vec<Point2> {
    fn from(p: ConvexPolygon) -> Self {
        p.vertices
    }
}

/// Convex hull by Andrew's monotone chain. Collinear and duplicate points are
/// dropped, so the result is strictly convex.
pub fn convex_hull(points: &[Point2]) -> Result<ConvexPolygon> {
    if points.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    if points.iter().any(|p| !p.is_finite()) {
        return Err(Error::input("non-finite point"));
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() <= 2 {
        return Ok(ConvexPolygon { vertices: pts });
    }

    let turn = |o: Point2, a: Point2, b: Point2| (a - o).cross(b - o);
    let mut hull: Vec<Point2> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && turn(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len && turn(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    // all points collinear: the chain collapses to the two extremes
    if hull.len() < 3 {
        hull = vec![pts[0], pts[pts.len() - 1]];
    }
    Ok(ConvexPolygon { vertices: hull })
}

fn project_to_segment(a: Point2, b: Point2, p: Point2) -> Point2 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return a;
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    a + ab * t
}

impl ConvexPolygon {
    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn is_degenerate(&self) -> bool {
        self.vertices.len() < 3
    }

    /// Edges `(v[i], v[i+1])`, closing back to the first vertex. A segment
    /// yields itself once, a point yields nothing.
    pub fn edges(&self) -> impl Iterator<Item = (Point2, Point2)> + '_ {
        let n = self.vertices.len();
        let count = match n {
            0 | 1 => 0,
            2 => 1,
            _ => n,
        };
        (0..count).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn area(&self) -> f64 {
        if self.vertices.len() < 3 {
            return 0.0;
        }
        let v0 = self.vertices[0];
        self.vertices
            .windows(2)
            .skip(1)
            .map(|w| (w[0] - v0).cross(w[1] - v0))
            .sum::<f64>()
            * 0.5
    }

    pub fn bounding_box(&self) -> Rect {
        let mut min = self.vertices[0];
        let mut max = self.vertices[0];
        for v in &self.vertices[1..] {
            min.x = min.x.min(v.x);
            min.y = min.y.min(v.y);
            max.x = max.x.max(v.x);
            max.y = max.y.max(v.y);
        }
        Rect { min, max }
    }

    /// Largest Euclidean distance between two vertices.
    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for (i, a) in self.vertices.iter().enumerate() {
            for b in &self.vertices[i + 1..] {
                d = d.max((*a - *b).norm());
            }
        }
        d
    }

    fn tolerance(&self) -> f64 {
        1e-12 * (1.0 + self.diameter())
    }

    /// Closed containment, with a relative tolerance of order 1e-12 so that
    /// projected boundary points test as inside.
    pub fn contains(&self, p: Point2) -> bool {
        let tol = self.tolerance();
        match self.vertices.len() {
            1 => (p - self.vertices[0]).norm() <= tol,
            2 => (project_to_segment(self.vertices[0], self.vertices[1], p) - p).norm() <= tol,
            _ => self.edges().all(|(a, b)| {
                let e = b - a;
                e.cross(p - a) >= -tol * e.norm()
            }),
        }
    }

    /// Euclidean projection onto the closed polygon.
    pub fn project(&self, p: Point2) -> Point2 {
        if self.vertices.len() == 1 {
            return self.vertices[0];
        }
        if self.vertices.len() >= 3 && self.contains(p) {
            return p;
        }
        let mut best = self.vertices[0];
        let mut best_d = f64::INFINITY;
        for (a, b) in self.edges() {
            let q = project_to_segment(a, b, p);
            let d = (q - p).norm();
            if d < best_d {
                best_d = d;
                best = q;
            }
        }
        best
    }

    /// Uniform point in a polygon of positive area.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Point2> {
        let area = self.area();
        if self.vertices.len() < 3 || area <= 0.0 {
            return Err(Error::DegenerateDomain);
        }
        let v0 = self.vertices[0];
        let mut u = rng.random::<f64>() * area;
        let last = self.vertices.len() - 2;
        for i in 1..=last {
            let (a, b) = (self.vertices[i], self.vertices[i + 1]);
            let tri = 0.5 * (a - v0).cross(b - v0);
            if u <= tri || i == last {
                let (mut s, mut t) = (rng.random::<f64>(), rng.random::<f64>());
                if s + t > 1.0 {
                    s = 1.0 - s;
                    t = 1.0 - t;
                }
                return Ok(v0 + (a - v0) * s + (b - v0) * t);
            }
            u -= tri;
        }
        unreachable!("fan triangulation covers the polygon")
    }

    /// Uniform point with respect to the polygon's own dimension: area for a
    /// proper polygon, length for a segment, the point itself otherwise.
    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Point2 {
        match self.vertices.len() {
            1 => self.vertices[0],
            2 => {
                let (a, b) = (self.vertices[0], self.vertices[1]);
                a + (b - a) * rng.random::<f64>()
            }
            _ => self.sample_uniform(rng).unwrap_or_else(|_| self.vertices[0]),
        }
    }

    /// `n × n` lattice over the bounding box, endpoints included, keeping the
    /// points inside the polygon. `n = 1` is the box center.
    pub fn lattice(&self, n: usize) -> Vec<Point2> {
        let bb = self.bounding_box();
        let coord = |lo: f64, hi: f64, i: usize| {
            if n <= 1 {
                0.5 * (lo + hi)
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        };
        let mut out = Vec::new();
        for j in 0..n.max(1) {
            for i in 0..n.max(1) {
                let p = Point2::new(coord(bb.min.x, bb.max.x, i), coord(bb.min.y, bb.max.y, j));
                if self.contains(p) {
                    out.push(p);
                }
            }
        }
        out
    }
}
