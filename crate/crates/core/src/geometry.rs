//! Planar shape kernels used by the cluster shape features.
//!
//! All functions accept arbitrary point clouds including duplicates and
//! collinear sets. Degenerate inputs produce zero areas, zero axes or zero
//! radii rather than errors.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

/// 95% quantile of the chi-square distribution with two degrees of freedom.
pub const CHI2_2DOF_95: f64 = 5.991464547;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }

    fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, o: Point) -> f64 {
        self.sub(o).norm()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexHull {
    /// Counter-clockwise, strictly convex; no repeated closing vertex.
    pub vertices: Vec<Point>,
    pub area: f64,
    pub perimeter: f64,
}

impl ConvexHull {
    /// Fewer than three vertices: a point or a segment.
    pub fn is_degenerate(&self) -> bool {
        self.vertices.len() < 3
    }

    /// Isoperimetric quotient `4π·A / P²`, zero for degenerate hulls.
    pub fn circularity(&self) -> f64 {
        if self.perimeter > 0.0 {
            (4.0 * PI * self.area / (self.perimeter * self.perimeter)).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }
}

/// Andrew's monotone chain. Collinear boundary points are dropped.
pub fn convex_hull(points: &[Point]) -> ConvexHull {
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() <= 2 {
        let perimeter = if pts.len() == 2 { 2.0 * pts[0].dist(pts[1]) } else { 0.0 };
        return ConvexHull {
            vertices: pts,
            area: 0.0,
            perimeter,
        };
    }

    // near-collinear turns count as straight
    let straight_or_right = |a: Point, b: Point, p: Point| {
        let (ab, ap) = (b.sub(a), p.sub(a));
        ab.cross(ap) <= 1e-12 * ab.norm() * ap.norm()
    };
    let mut hull: Vec<Point> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && straight_or_right(hull[hull.len() - 2], hull[hull.len() - 1], p) {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len && straight_or_right(hull[hull.len() - 2], hull[hull.len() - 1], p) {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop(); // closing vertex repeats the first

    if hull.len() < 3 {
        // all points collinear: the chain collapses to the two extremes
        let (a, b) = (pts[0], pts[pts.len() - 1]);
        return ConvexHull {
            vertices: vec![a, b],
            area: 0.0,
            perimeter: 2.0 * a.dist(b),
        };
    }

    let n = hull.len();
    let mut twice_area = 0.0;
    let mut perimeter = 0.0;
    for i in 0..n {
        let (a, b) = (hull[i], hull[(i + 1) % n]);
        twice_area += a.cross(b);
        perimeter += a.dist(b);
    }
    ConvexHull {
        vertices: hull,
        area: 0.5 * twice_area.abs(),
        perimeter,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingRect {
    pub center: Point,
    /// Half side lengths along the rotated x and y axes.
    pub half_extents: (f64, f64),
    pub rotation: f64,
    pub area: f64,
    pub perimeter: f64,
}

impl BoundingRect {
    /// Whether `p` lies inside the rectangle, allowing `slack` metres.
    pub fn contains(&self, p: Point, slack: f64) -> bool {
        let (c, s) = (self.rotation.cos(), self.rotation.sin());
        let d = p.sub(self.center);
        let u = d.x * c + d.y * s;
        let v = -d.x * s + d.y * c;
        u.abs() <= self.half_extents.0 + slack && v.abs() <= self.half_extents.1 + slack
    }
}

/// Minimum-area enclosing rectangle by rotating calipers.
///
/// One side of the result is parallel to a hull edge. Candidates whose
/// areas agree to a relative 1e-9 are ranked by perimeter.
pub fn min_bounding_rect(hull: &ConvexHull) -> BoundingRect {
    let v = &hull.vertices;
    match v.len() {
        0 => {
            return BoundingRect {
                center: Point::default(),
                half_extents: (0.0, 0.0),
                rotation: 0.0,
                area: 0.0,
                perimeter: 0.0,
            }
        }
        1 => {
            return BoundingRect {
                center: v[0],
                half_extents: (0.0, 0.0),
                rotation: 0.0,
                area: 0.0,
                perimeter: 0.0,
            }
        }
        2 => {
            let d = v[1].sub(v[0]);
            let len = d.norm();
            return BoundingRect {
                center: Point::new(0.5 * (v[0].x + v[1].x), 0.5 * (v[0].y + v[1].y)),
                half_extents: (0.5 * len, 0.0),
                rotation: d.y.atan2(d.x),
                area: 0.0,
                perimeter: 2.0 * len,
            };
        }
        _ => {}
    }

    let n = v.len();
    let next = |i: usize| (i + 1) % n;
    let frame = |i: usize| {
        let d = v[next(i)].sub(v[i]);
        let len = d.norm();
        let u = Point::new(d.x / len, d.y / len);
        (u, Point::new(-u.y, u.x))
    };

    // caliper pointers for the first edge, found by a full scan
    let (u0, n0) = frame(0);
    let argmax = |f: &dyn Fn(Point) -> f64| {
        (0..n).fold(0, |best, k| if f(v[k]) > f(v[best]) { k } else { best })
    };
    let mut right = argmax(&|p| u0.dot(p));
    let mut left = argmax(&|p| -u0.dot(p));
    let mut top = argmax(&|p| n0.dot(p));

    let mut best: Option<BoundingRect> = None;
    for i in 0..n {
        let (u, nrm) = frame(i);
        for (ptr, sign, axis) in [(&mut right, 1.0, u), (&mut left, -1.0, u), (&mut top, 1.0, nrm)] {
            // each pointer only ever moves forward around the hull
            for _ in 0..n {
                let ahead = next(*ptr);
                if sign * axis.dot(v[ahead]) > sign * axis.dot(v[*ptr]) {
                    *ptr = ahead;
                } else {
                    break;
                }
            }
        }
        let u_max = u.dot(v[right]);
        let u_min = u.dot(v[left]);
        let n_edge = nrm.dot(v[i]);
        let n_max = nrm.dot(v[top]);
        let w = (u_max - u_min).max(0.0);
        let h = (n_max - n_edge).max(0.0);
        let area = w * h;
        let perimeter = 2.0 * (w + h);
        // areas equal up to rounding are decided by the smaller perimeter
        let tol = 1e-9 * area.max(1e-300);
        let better = best.is_none_or(|b| {
            area < b.area - tol || (area <= b.area + tol && perimeter < b.perimeter)
        });
        if better {
            let cu = 0.5 * (u_max + u_min);
            let cn = 0.5 * (n_max + n_edge);
            best = Some(BoundingRect {
                center: Point::new(u.x * cu + nrm.x * cn, u.y * cu + nrm.y * cn),
                half_extents: (0.5 * w, 0.5 * h),
                rotation: u.y.atan2(u.x),
                area,
                perimeter,
            });
        }
    }
    best.expect("hull with >= 3 vertices yields a rectangle")
}

/// Sample covariance of planar points, `1/(n-1)` normalised.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Covariance2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Covariance2 {
    pub fn of(points: &[Point]) -> Self {
        let n = points.len();
        if n < 2 {
            return Covariance2::default();
        }
        let c = centroid(points);
        let (mut xx, mut xy, mut yy) = (0.0, 0.0, 0.0);
        for p in points {
            let (dx, dy) = (p.x - c.x, p.y - c.y);
            xx += dx * dx;
            xy += dx * dy;
            yy += dy * dy;
        }
        let k = 1.0 / (n as f64 - 1.0);
        Covariance2 {
            xx: xx * k,
            xy: xy * k,
            yy: yy * k,
        }
    }

    /// Eigenvalues, larger first, both clamped to `>= 0`.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let m = 0.5 * (self.xx + self.yy);
        let d = (0.5 * (self.xx - self.yy)).hypot(self.xy);
        let major = (m + d).max(0.0);
        let minor = m - d;
        // cancellation residue of a collinear set is clamped to zero
        let minor = if minor <= 1e-12 * major { 0.0 } else { minor };
        (major, minor)
    }

    /// Angle of the eigenvector belonging to the larger eigenvalue.
    pub fn major_angle(&self) -> f64 {
        0.5 * (2.0 * self.xy).atan2(self.xx - self.yy)
    }
}

pub fn centroid(points: &[Point]) -> Point {
    if points.is_empty() {
        return Point::default();
    }
    let n = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
    Point::new(sx / n, sy / n)
}

/// Coordinate-wise median; even counts average the two middle values.
pub fn median_center(points: &[Point]) -> Point {
    fn median(mut v: Vec<f64>) -> f64 {
        if v.is_empty() {
            return 0.0;
        }
        v.sort_by(f64::total_cmp);
        let m = v.len() / 2;
        if v.len() % 2 == 1 {
            v[m]
        } else {
            0.5 * (v[m - 1] + v[m])
        }
    }
    Point::new(
        median(points.iter().map(|p| p.x).collect()),
        median(points.iter().map(|p| p.y).collect()),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceEllipse {
    pub center: Point,
    /// Full axis lengths (twice the semi-axes).
    pub major_axis_len: f64,
    pub minor_axis_len: f64,
    /// Direction of the major axis.
    pub orientation: f64,
}

impl ConfidenceEllipse {
    pub fn major_unit(&self) -> Point {
        Point::new(self.orientation.cos(), self.orientation.sin())
    }

    pub fn minor_unit(&self) -> Point {
        Point::new(-self.orientation.sin(), self.orientation.cos())
    }
}

/// 95% confidence ellipse of the sample covariance.
pub fn confidence_ellipse_95(points: &[Point]) -> ConfidenceEllipse {
    let cov = Covariance2::of(points);
    let (l1, l2) = cov.eigenvalues();
    ConfidenceEllipse {
        center: centroid(points),
        major_axis_len: 2.0 * (CHI2_2DOF_95 * l1).sqrt(),
        minor_axis_len: 2.0 * (CHI2_2DOF_95 * l2).sqrt(),
        orientation: cov.major_angle(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    pub center: Point,
    pub radius: f64,
}

impl Circle {
    fn contains(&self, p: Point) -> bool {
        p.dist(self.center) <= self.radius * (1.0 + 1e-12) + 1e-12
    }

    fn diametral(a: Point, b: Point) -> Circle {
        let center = Point::new(0.5 * (a.x + b.x), 0.5 * (a.y + b.y));
        Circle {
            center,
            radius: 0.5 * a.dist(b),
        }
    }

    /// Circle through three points; falls back to the widest diametral
    /// circle when they are (nearly) collinear.
    fn through(a: Point, b: Point, c: Point) -> Circle {
        let ab = b.sub(a);
        let ac = c.sub(a);
        let d = 2.0 * ab.cross(ac);
        let scale = ab.dot(ab).max(ac.dot(ac));
        if d.abs() <= 1e-14 * scale {
            return [Circle::diametral(a, b), Circle::diametral(a, c), Circle::diametral(b, c)]
                .into_iter()
                .max_by(|x, y| x.radius.total_cmp(&y.radius))
                .expect("three candidates");
        }
        let (ab2, ac2) = (ab.dot(ab), ac.dot(ac));
        let ux = (ac.y * ab2 - ab.y * ac2) / d;
        let uy = (ab.x * ac2 - ac.x * ab2) / d;
        Circle {
            center: Point::new(a.x + ux, a.y + uy),
            radius: ux.hypot(uy),
        }
    }
}

/// Smallest circle containing every point (incremental Welzl).
pub fn min_enclosing_circle(points: &[Point]) -> Circle {
    let Some(&first) = points.first() else {
        return Circle {
            center: Point::default(),
            radius: 0.0,
        };
    };
    let mut c = Circle {
        center: first,
        radius: 0.0,
    };
    for i in 1..points.len() {
        if c.contains(points[i]) {
            continue;
        }
        c = Circle {
            center: points[i],
            radius: 0.0,
        };
        for j in 0..i {
            if c.contains(points[j]) {
                continue;
            }
            c = Circle::diametral(points[i], points[j]);
            for k in 0..j {
                if !c.contains(points[k]) {
                    c = Circle::through(points[i], points[j], points[k]);
                }
            }
        }
    }
    c
}

/// Occupied 45° sectors in three equal-width concentric rings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CboDescriptor {
    pub inner: u8,
    pub middle: u8,
    pub outer: u8,
}

/// Ring index for distance `d` when the outer radius is `r_max`. Upper
/// boundaries are inclusive, so a point exactly on a boundary falls into
/// the inner ring.
fn cbo_ring(d: f64, r_max: f64) -> usize {
    let width = r_max / 3.0;
    if d <= width {
        0
    } else if d <= 2.0 * width {
        1
    } else {
        2
    }
}

/// Sector index for direction `(dx, dy)`; sectors start at angle 0 and
/// include their upper boundary.
fn cbo_sector(dx: f64, dy: f64) -> usize {
    let mut a = dy.atan2(dx);
    if a < 0.0 {
        a += TAU;
    }
    let k = (a / (PI / 4.0)).ceil() as usize;
    k.saturating_sub(1).min(7)
}

pub fn cbo(points: &[Point], center: Point) -> CboDescriptor {
    let r_max = points.iter().map(|p| p.dist(center)).fold(0.0, f64::max);
    if !(r_max > 0.0) {
        return CboDescriptor {
            inner: 1,
            middle: 0,
            outer: 0,
        };
    }
    let mut occupied = [[false; 8]; 3];
    for p in points {
        let d = p.dist(center);
        occupied[cbo_ring(d, r_max)][cbo_sector(p.x - center.x, p.y - center.y)] = true;
    }
    let count = |ring: &[bool; 8]| ring.iter().filter(|o| **o).count() as u8;
    CboDescriptor {
        inner: count(&occupied[0]),
        middle: count(&occupied[1]),
        outer: count(&occupied[2]),
    }
}

/// Mean perpendicular distance of all points to the line through the two
/// most distant points.
pub fn max_dist_line_deviation(points: &[Point]) -> f64 {
    let n = points.len();
    if n < 2 {
        return 0.0;
    }
    let (mut a, mut b, mut best) = (0, 0, -1.0);
    for i in 0..n {
        for j in i + 1..n {
            let d = points[i].dist(points[j]);
            if d > best {
                (a, b, best) = (i, j, d);
            }
        }
    }
    if !(best > 0.0) {
        return 0.0;
    }
    let dir = points[b].sub(points[a]);
    let total: f64 = points
        .iter()
        .map(|p| (dir.cross(p.sub(points[a])) / best).abs())
        .sum();
    total / n as f64
}
