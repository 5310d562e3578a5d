//! Sub-pixel 2D primitives: points, segments, polylines, distances,
//! normals, arc-length resampling, and the line / quadratic-spline
//! contour constructions.

use crate::{Error, Result};

/// A sub-pixel 2D point in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(&self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// A directed line segment with distinct endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub a: Point2,
    pub b: Point2,
}

impl Segment {
    /// Zero-length segments are rejected at construction.
    pub fn new(a: Point2, b: Point2) -> Result<Self> {
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::Geometry("non-finite segment endpoint".into()));
        }
        if a.x == b.x && a.y == b.y {
            return Err(Error::Geometry("zero-length segment".into()));
        }
        Ok(Segment { a, b })
    }

    pub fn length(&self) -> f64 {
        self.a.distance(self.b)
    }

    /// Unit direction from `a` to `b`.
    pub fn direction(&self) -> (f64, f64) {
        let len = self.length();
        ((self.b.x - self.a.x) / len, (self.b.y - self.a.y) / len)
    }
}

/// Euclidean distance from a point to the closed segment `[a, b]`.
pub fn point_segment_distance(p: Point2, s: &Segment) -> f64 {
    let dx = s.b.x - s.a.x;
    let dy = s.b.y - s.a.y;
    let len2 = dx * dx + dy * dy;
    let t = (((p.x - s.a.x) * dx + (p.y - s.a.y) * dy) / len2).clamp(0.0, 1.0);
    let proj = Point2::new(s.a.x + t * dx, s.a.y + t * dy);
    p.distance(proj)
}

/// An ordered chain of distinct points. When `closed`, the last point
/// connects back to the first implicitly (no duplicated endpoint stored).
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    points: Vec<Point2>,
    closed: bool,
}

/// Sparse contour landmarks forming a chain; same structural invariants
/// as [`Polyline`].
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkChain {
    pub points: Vec<Point2>,
    pub closed: bool,
}

impl LandmarkChain {
    pub fn new(points: Vec<Point2>, closed: bool) -> Result<Self> {
        // Reuse the polyline validation.
        let p = Polyline::new(points, closed)?;
        Ok(LandmarkChain {
            points: p.points,
            closed: p.closed,
        })
    }
}

impl Polyline {
    pub fn new(points: Vec<Point2>, closed: bool) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Geometry("polyline needs at least 2 points".into()));
        }
        for p in &points {
            if !p.is_finite() {
                return Err(Error::Geometry("non-finite polyline point".into()));
            }
        }
        for w in points.windows(2) {
            if w[0] == w[1] {
                return Err(Error::Geometry("consecutive duplicate points".into()));
            }
        }
        if closed && points[0] == *points.last().unwrap() {
            return Err(Error::Geometry(
                "closed polyline must not store a duplicated endpoint".into(),
            ));
        }
        Ok(Polyline { points, closed })
    }

    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    /// All segments, including the implicit closing segment for closed
    /// polylines.
    pub fn segments(&self) -> impl Iterator<Item = Segment> + '_ {
        let n = self.points.len();
        let count = if self.closed { n } else { n - 1 };
        (0..count).map(move |i| Segment {
            a: self.points[i],
            b: self.points[(i + 1) % n],
        })
    }

    pub fn total_length(&self) -> f64 {
        self.segments().map(|s| s.length()).sum()
    }

    /// Point at a given arc length from the start.
    pub fn point_at(&self, arclength: f64) -> Result<Point2> {
        let total = self.total_length();
        if !(0.0..=total + 1e-9).contains(&arclength) {
            return Err(Error::OutOfBounds(format!(
                "arclength {arclength} outside [0, {total}]"
            )));
        }
        let mut acc = 0.0;
        for s in self.segments() {
            let len = s.length();
            if arclength <= acc + len {
                let t = (arclength - acc) / len;
                return Ok(Point2::new(
                    s.a.x + t * (s.b.x - s.a.x),
                    s.a.y + t * (s.b.y - s.a.y),
                ));
            }
            acc += len;
        }
        Ok(*self.points.last().unwrap())
    }
}

fn perp(d: (f64, f64)) -> (f64, f64) {
    (-d.1, d.0)
}

fn normalize(x: f64, y: f64) -> Option<(f64, f64)> {
    let n = x.hypot(y);
    if n < 1e-12 {
        None
    } else {
        Some((x / n, y / n))
    }
}

/// Unit normal at a given arc length along the polyline. On segment
/// interiors the normal is perpendicular to the segment direction; at
/// vertices it is perpendicular to the bisector of the two adjacent
/// segment directions.
pub fn polyline_normal_at(c: &Polyline, arclength: f64) -> Result<(f64, f64)> {
    let total = c.total_length();
    if !(0.0..=total + 1e-9).contains(&arclength) {
        return Err(Error::OutOfBounds(format!(
            "arclength {arclength} outside [0, {total}]"
        )));
    }
    let segs: Vec<Segment> = c.segments().collect();
    let n = segs.len();
    const EPS: f64 = 1e-9;

    let mut acc = 0.0;
    for (i, s) in segs.iter().enumerate() {
        let len = s.length();
        let local = arclength - acc;
        if local < len - EPS || i == n - 1 {
            if local.abs() <= EPS {
                // Vertex at segment start.
                let prev = if i > 0 {
                    Some(segs[i - 1])
                } else if c.is_closed() {
                    Some(segs[n - 1])
                } else {
                    None
                };
                return Ok(vertex_normal(prev.as_ref(), s));
            }
            if (local - len).abs() <= EPS {
                // Vertex at segment end (only reachable on the last
                // segment of an open polyline; closed wraps to start).
                let next = if i + 1 < n {
                    Some(segs[i + 1])
                } else if c.is_closed() {
                    Some(segs[0])
                } else {
                    None
                };
                return Ok(match next {
                    Some(nx) => vertex_normal(Some(s), &nx),
                    None => perp(s.direction()),
                });
            }
            return Ok(perp(s.direction()));
        }
        acc += len;
    }
    unreachable!("arclength walk exhausted")
}

fn vertex_normal(prev: Option<&Segment>, next: &Segment) -> (f64, f64) {
    let dn = next.direction();
    match prev {
        Some(p) => {
            let dp = p.direction();
            match normalize(dp.0 + dn.0, dp.1 + dn.1) {
                Some(bis) => perp(bis),
                // 180-degree reversal: bisector undefined, keep the
                // outgoing segment's normal.
                None => perp(dn),
            }
        }
        None => perp(dn),
    }
}

/// Minimum distance from a point to any segment of the polyline.
pub fn point_polyline_distance(p: Point2, c: &Polyline) -> f64 {
    c.segments()
        .map(|s| point_segment_distance(p, &s))
        .fold(f64::INFINITY, f64::min)
}

/// Sample the polyline at uniform arc-length intervals, pairing each
/// sample with its unit normal. Open polylines always include the final
/// endpoint (a shorter last step when the length is not a multiple of
/// `spacing`); closed polylines walk the loop without duplicating the
/// start.
pub fn resample_polyline(c: &Polyline, spacing: f64) -> Result<Vec<(Point2, (f64, f64))>> {
    if spacing <= 0.0 {
        return Err(Error::InvalidParam("spacing must be > 0".into()));
    }
    let total = c.total_length();
    let mut arcs: Vec<f64> = Vec::new();
    let mut t = 0.0;
    while t < total - 1e-9 {
        arcs.push(t);
        t += spacing;
    }
    if !c.is_closed() {
        arcs.push(total);
    }
    arcs.iter()
        .map(|&a| Ok((c.point_at(a)?, polyline_normal_at(c, a)?)))
        .collect()
}

/// Connect adjacent landmarks with straight segments.
pub fn line_contour(l: &LandmarkChain) -> Polyline {
    Polyline {
        points: l.points.clone(),
        closed: l.closed,
    }
}

/// Chord-length-parameterized C1 quadratic spline through all landmarks,
/// densified into a polyline. One quadratic per span; first derivatives
/// match at interior knots. The start tangent of an open chain comes from
/// the parabola through the first three landmarks; a plain first-chord
/// slope would seed an O(h) tangent error that the d_{i+1} = 2 s_i - d_i
/// propagation carries down the whole chain as an undamped zigzag.
/// Closed chains wrap with the start tangent taken as the mean of the
/// two adjacent chord slopes.
pub fn spline_contour(l: &LandmarkChain, samples_per_span: usize) -> Result<Polyline> {
    if l.points.len() < 3 {
        return Err(Error::Geometry("spline needs at least 3 landmarks".into()));
    }
    if samples_per_span < 1 {
        return Err(Error::InvalidParam("samples_per_span must be >= 1".into()));
    }
    let pts = &l.points;
    let n = pts.len();
    let spans = if l.closed { n } else { n - 1 };

    // Chord slopes s_i = (P_{i+1} - P_i) / h_i.
    let mut h = Vec::with_capacity(spans);
    let mut slope = Vec::with_capacity(spans);
    for i in 0..spans {
        let a = pts[i];
        let b = pts[(i + 1) % n];
        let hi = a.distance(b);
        h.push(hi);
        slope.push(((b.x - a.x) / hi, (b.y - a.y) / hi));
    }

    // Tangent propagation: d_{i+1} = 2 s_i - d_i.
    let d0 = if l.closed {
        let s_last = slope[spans - 1];
        (
            0.5 * (s_last.0 + slope[0].0),
            0.5 * (s_last.1 + slope[0].1),
        )
    } else {
        // Three-point endpoint derivative in the chord-length parameter.
        let w = h[0] / (h[0] + h[1]);
        (
            (1.0 + w) * slope[0].0 - w * slope[1].0,
            (1.0 + w) * slope[0].1 - w * slope[1].1,
        )
    };
    let mut d = Vec::with_capacity(spans);
    d.push(d0);
    for i in 1..spans {
        let prev = d[i - 1];
        d.push((2.0 * slope[i - 1].0 - prev.0, 2.0 * slope[i - 1].1 - prev.1));
    }

    let mut out: Vec<Point2> = Vec::with_capacity(spans * samples_per_span + 1);
    for i in 0..spans {
        let p = pts[i];
        let di = d[i];
        let si = slope[i];
        // Q_i(t) = P_i + d_i t + (s_i - d_i)/h_i t^2, t in [0, h_i].
        let e = ((si.0 - di.0) / h[i], (si.1 - di.1) / h[i]);
        for k in 0..samples_per_span {
            let t = h[i] * k as f64 / samples_per_span as f64;
            let q = Point2::new(p.x + di.0 * t + e.0 * t * t, p.y + di.1 * t + e.1 * t * t);
            if out.last().map_or(true, |last| last.distance(q) > 1e-12) {
                out.push(q);
            }
        }
    }
    if !l.closed {
        out.push(*pts.last().unwrap());
    }
    Polyline::new(out, l.closed)
}
