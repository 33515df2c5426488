use std::path::Path;

use serde::{Deserialize, Serialize};

use super::geometry::{Point, Polygon, Segment};

const MAX_VERTICES: usize = 1024;

#[derive(Debug, thiserror::Error)]
pub enum WorldError {
    #[error("malformed world file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid world: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.x0 && p.x <= self.x1 && p.y >= self.y0 && p.y <= self.y1
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }
}

/// Polygonal world bounded by walls on the rectangle `[0, w] × [0, h]`.
#[derive(Clone, Debug, PartialEq)]
pub struct WorldSpec {
    width: f64,
    height: f64,
    obstacles: Vec<Polygon>,
    spawn: Rect,
    min_clearance: f64,
    segments: Vec<Segment>,
}

/// On-disk JSON form.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WorldFile {
    bounds: [f64; 2],
    obstacles: Vec<ObstacleFile>,
    spawn: [f64; 4],
    min_clearance: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObstacleFile {
    polygon: Vec<[f64; 2]>,
}

impl WorldSpec {
    pub fn new(
        width: f64,
        height: f64,
        obstacles: Vec<Polygon>,
        spawn: Rect,
        min_clearance: f64,
    ) -> Result<Self, WorldError> {
        let bad = |m: String| Err(WorldError::Invalid(m));
        if !(width.is_finite() && height.is_finite() && width > 0.0 && height > 0.0) {
            return bad(format!("bounds must be positive, got {width} x {height}"));
        }
        if !(min_clearance.is_finite() && min_clearance > 0.0) {
            return bad(format!("min_clearance must be positive, got {min_clearance}"));
        }
        let bounds = Rect {
            x0: 0.0,
            y0: 0.0,
            x1: width,
            y1: height,
        };
        let spawn_ok = [spawn.x0, spawn.y0, spawn.x1, spawn.y1].iter().all(|v| v.is_finite())
            && spawn.x0 <= spawn.x1
            && spawn.y0 <= spawn.y1
            && bounds.contains(Point::new(spawn.x0, spawn.y0))
            && bounds.contains(Point::new(spawn.x1, spawn.y1));
        if !spawn_ok {
            return bad(format!("spawn region {spawn:?} is not inside the bounds"));
        }
        for (i, poly) in obstacles.iter().enumerate() {
            if poly.vertices().len() > MAX_VERTICES {
                return bad(format!("obstacle {i} has more than {MAX_VERTICES} vertices"));
            }
            if !poly.vertices().iter().all(|v| v.is_finite() && bounds.contains(*v)) {
                return bad(format!("obstacle {i} is not inside the bounds"));
            }
            if !poly.is_simple() {
                return bad(format!("obstacle {i} is not a simple polygon"));
            }
        }
        let corners = [
            Point::new(0.0, 0.0),
            Point::new(width, 0.0),
            Point::new(width, height),
            Point::new(0.0, height),
        ];
        let mut segments: Vec<Segment> = (0..4).map(|i| Segment::new(corners[i], corners[(i + 1) % 4])).collect();
        for poly in &obstacles {
            segments.extend(poly.edges());
        }
        Ok(Self {
            width,
            height,
            obstacles,
            spawn,
            min_clearance,
            segments,
        })
    }

    /// Empty room whose spawn region is the whole floor.
    pub fn empty(width: f64, height: f64) -> Self {
        let spawn = Rect {
            x0: 0.0,
            y0: 0.0,
            x1: width,
            y1: height,
        };
        Self::new(width, height, Vec::new(), spawn, 0.3).expect("valid empty room")
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn bounds(&self) -> Rect {
        Rect {
            x0: 0.0,
            y0: 0.0,
            x1: self.width,
            y1: self.height,
        }
    }

    pub fn obstacles(&self) -> &[Polygon] {
        &self.obstacles
    }

    pub fn spawn(&self) -> Rect {
        self.spawn
    }

    pub fn min_clearance(&self) -> f64 {
        self.min_clearance
    }

    /// Walls followed by every obstacle edge.
    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Inside an obstacle or outside the walls.
    pub fn is_blocked(&self, p: Point) -> bool {
        !self.bounds().contains(p) || self.obstacles.iter().any(|o| o.contains(p))
    }

    /// Distance from `p` to the nearest wall or obstacle edge; zero when blocked.
    pub fn clearance(&self, p: Point) -> f64 {
        if self.is_blocked(p) {
            return 0.0;
        }
        self.segments
            .iter()
            .map(|s| s.distance_to(p))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn from_json(text: &str) -> Result<Self, WorldError> {
        let f: WorldFile = serde_json::from_str(text)?;
        let obstacles = f
            .obstacles
            .into_iter()
            .map(|o| Polygon::new(o.polygon.into_iter().map(|[x, y]| Point::new(x, y)).collect()))
            .collect();
        let [x0, y0, x1, y1] = f.spawn;
        Self::new(f.bounds[0], f.bounds[1], obstacles, Rect { x0, y0, x1, y1 }, f.min_clearance)
    }

    pub fn to_json(&self) -> String {
        let f = WorldFile {
            bounds: [self.width, self.height],
            obstacles: self
                .obstacles
                .iter()
                .map(|o| ObstacleFile {
                    polygon: o.vertices().iter().map(|v| [v.x, v.y]).collect(),
                })
                .collect(),
            spawn: [self.spawn.x0, self.spawn.y0, self.spawn.x1, self.spawn.y1],
            min_clearance: self.min_clearance,
        };
        serde_json::to_string_pretty(&f).expect("world serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, WorldError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Worlds shipped with the crate.
pub mod bundled {
    use super::WorldSpec;

    pub const ENV1: &str = include_str!("../../worlds/env1.json");
    pub const ENV2: &str = include_str!("../../worlds/env2.json");
    pub const TEST_7X10: &str = include_str!("../../worlds/test7x10.json");
    pub const TEST_7X10_TARGETS: &str = include_str!("../../worlds/test7x10_targets.json");

    /// 10 × 10 m room with three scattered obstacles.
    pub fn env1() -> WorldSpec {
        WorldSpec::from_json(ENV1).expect("bundled env1 is valid")
    }

    /// 10 × 10 m room with obstacles packed around the start area.
    pub fn env2() -> WorldSpec {
        WorldSpec::from_json(ENV2).expect("bundled env2 is valid")
    }

    /// 7 × 10 m evaluation world.
    pub fn test_7x10() -> WorldSpec {
        WorldSpec::from_json(TEST_7X10).expect("bundled test world is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_worlds_parse() {
        for w in [bundled::env1(), bundled::env2(), bundled::test_7x10()] {
            assert!(w.obstacles().len() >= 3);
            assert_eq!(WorldSpec::from_json(&w.to_json()).unwrap(), w);
        }
        assert_eq!(bundled::test_7x10().width(), 7.0);
    }

    #[test]
    fn rejects_bad_worlds() {
        let cases = [
            r#"{"bounds":[10,10],"obstacles":[],"spawn":[0,0,1,1],"min_clearance":0}"#,
            r#"{"bounds":[10,10],"obstacles":[{"polygon":[[1,1],[12,1],[1,2]]}],"spawn":[0,0,1,1],"min_clearance":0.3}"#,
            r#"{"bounds":[10,10],"obstacles":[{"polygon":[[0,0],[1,1],[1,0],[0,1]]}],"spawn":[0,0,1,1],"min_clearance":0.3}"#,
            r#"{"bounds":[10,10],"obstacles":[],"spawn":[0,0,11,1],"min_clearance":0.3}"#,
            r#"{"bounds":[10,10],"obstacles":[],"spawn":[0,0,1,1],"min_clearance":0.3,"extra":1}"#,
            r#"{"bounds":[-1,10],"obstacles":[],"spawn":[0,0,1,1],"min_clearance":0.3}"#,
            r#"not json"#,
        ];
        for c in cases {
            assert!(WorldSpec::from_json(c).is_err(), "{c}");
        }
    }
}
