use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }

    pub fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }

    pub fn scale(self, k: f64) -> Point {
        Point::new(self.x * k, self.y * k)
    }

    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, o: Point) -> f64 {
        self.sub(o).norm()
    }

    /// Rotation by `angle` about `pivot`.
    pub fn rotate_about(self, pivot: Point, angle: f64) -> Point {
        let (s, c) = angle.sin_cos();
        let d = self.sub(pivot);
        Point::new(pivot.x + c * d.x - s * d.y, pivot.y + s * d.x + c * d.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub a: Point,
    pub b: Point,
}

impl Segment {
    pub fn new(a: Point, b: Point) -> Self {
        Self { a, b }
    }

    /// Distance along the ray `origin + t·dir` (unit `dir`) to this segment,
    /// if the ray hits it at `t ≥ 0`. Parallel segments never register;
    /// the adjacent edges of a closed shape catch those rays.
    pub fn ray_hit(&self, origin: Point, dir: Point) -> Option<f64> {
        let e = self.b.sub(self.a);
        let denom = dir.cross(e);
        if denom.abs() < 1e-15 {
            return None;
        }
        let w = self.a.sub(origin);
        let t = w.cross(e) / denom;
        let u = w.cross(dir) / denom;
        (t >= 0.0 && (0.0..=1.0).contains(&u)).then_some(t)
    }

    pub fn distance_to(&self, p: Point) -> f64 {
        let e = self.b.sub(self.a);
        let len2 = e.dot(e);
        if len2 == 0.0 {
            return p.distance(self.a);
        }
        let u = (p.sub(self.a).dot(e) / len2).clamp(0.0, 1.0);
        p.distance(self.a.add(e.scale(u)))
    }

    /// Proper or touching intersection of two closed segments.
    pub fn intersects(&self, o: &Segment) -> bool {
        fn orient(p: Point, q: Point, r: Point) -> f64 {
            q.sub(p).cross(r.sub(p))
        }
        fn on_segment(p: Point, q: Point, r: Point) -> bool {
            r.x >= p.x.min(q.x) && r.x <= p.x.max(q.x) && r.y >= p.y.min(q.y) && r.y <= p.y.max(q.y)
        }
        let d1 = orient(o.a, o.b, self.a);
        let d2 = orient(o.a, o.b, self.b);
        let d3 = orient(self.a, self.b, o.a);
        let d4 = orient(self.a, self.b, o.b);
        if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
            return true;
        }
        (d1 == 0.0 && on_segment(o.a, o.b, self.a))
            || (d2 == 0.0 && on_segment(o.a, o.b, self.b))
            || (d3 == 0.0 && on_segment(self.a, self.b, o.a))
            || (d4 == 0.0 && on_segment(self.a, self.b, o.b))
    }
}

/// Closed simple polygon given by its vertices in order.
#[derive(Clone, Debug, PartialEq)]
pub struct Polygon {
    vertices: Vec<Point>,
}

impl Polygon {
    pub fn new(vertices: Vec<Point>) -> Self {
        Self { vertices }
    }

    pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self::new(vec![
            Point::new(x0, y0),
            Point::new(x1, y0),
            Point::new(x1, y1),
            Point::new(x0, y1),
        ])
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn edges(&self) -> impl Iterator<Item = Segment> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| Segment::new(self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Even-odd rule.
    pub fn contains(&self, p: Point) -> bool {
        let mut inside = false;
        let n = self.vertices.len();
        let mut j = n - 1;
        for i in 0..n {
            let (a, b) = (self.vertices[i], self.vertices[j]);
            if (a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x {
                inside = !inside;
            }
            j = i;
        }
        inside
    }

    /// No two non-adjacent edges touch and no edge is degenerate.
    pub fn is_simple(&self) -> bool {
        let n = self.vertices.len();
        if n < 3 {
            return false;
        }
        let edges: Vec<Segment> = self.edges().collect();
        if edges.iter().any(|e| e.a == e.b) {
            return false;
        }
        let area2: f64 = edges.iter().map(|e| e.a.cross(e.b)).sum();
        if area2 == 0.0 {
            return false;
        }
        for i in 0..n {
            for j in i + 1..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if adjacent {
                    // adjacent edges may only share their common vertex
                    let (e, f) = (edges[i], edges[j]);
                    let (far_e, far_f) = if j == i + 1 { (e.a, f.b) } else { (e.b, f.a) };
                    if e.distance_to(far_f) == 0.0 || f.distance_to(far_e) == 0.0 {
                        return false;
                    }
                    continue;
                }
                if edges[i].intersects(&edges[j]) {
                    return false;
                }
            }
        }
        true
    }

    pub fn rotate_about(&self, pivot: Point, angle: f64) -> Polygon {
        Polygon::new(self.vertices.iter().map(|v| v.rotate_about(pivot, angle)).collect())
    }

    pub fn distance_to(&self, p: Point) -> f64 {
        self.edges().map(|e| e.distance_to(p)).fold(f64::INFINITY, f64::min)
    }
}
