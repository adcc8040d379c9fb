//! Ground-truth world model: static occupancy, scripted dynamic obstacles,
//! ray-cast range sensing, and collision checking.
//!
//! Worlds are immutable after load. All geometry lives in a frame whose
//! origin is the lower-left corner of the static grid.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::kinematics::Pose2D;
use crate::{Error, Result};

/// Smallest range a beam may report; keeps ranges strictly positive.
const RANGE_FLOOR: f64 = 1e-9;

fn default_resolution() -> f64 {
    0.05
}

fn default_true() -> bool {
    true
}

/// Declarative world description (the `world:` section of a scenario
/// document). Rectangles and discs are burned into the static grid; the
/// optional border ring closes the world like a room.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldConfig {
    /// World extent in meters, [width, height].
    pub size: [f64; 2],
    #[serde(default = "default_resolution")]
    pub resolution: f64,
    #[serde(default = "default_true")]
    pub border_walls: bool,
    /// Axis-aligned occupied rectangles, [x0, y0, x1, y1].
    #[serde(default)]
    pub rects: Vec<[f64; 4]>,
    /// Static occupied discs, [cx, cy, radius].
    #[serde(default)]
    pub discs: Vec<[f64; 3]>,
    #[serde(default)]
    pub dynamic_obstacles: Vec<DynamicObstacleConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicObstacleConfig {
    pub radius: f64,
    /// Schedule as [time, x, y] rows; motion interpolates linearly and
    /// clamps outside the scripted interval.
    pub waypoints: Vec<[f64; 3]>,
}

/// Scripted disc obstacle following a piecewise-linear schedule.
#[derive(Debug, Clone)]
pub struct DynamicObstacle {
    pub radius: f64,
    pub waypoints: Vec<(f64, f64, f64)>,
    /// Position materialized by the latest [`step_dynamics`] call.
    pub current: (f64, f64),
}

impl DynamicObstacle {
    /// Interpolated center at time `t`, clamping before the first and after
    /// the last waypoint.
    pub fn center_at(&self, t: f64) -> (f64, f64) {
        let wps = &self.waypoints;
        let (t0, x0, y0) = wps[0];
        if t <= t0 {
            return (x0, y0);
        }
        for pair in wps.windows(2) {
            let (ta, xa, ya) = pair[0];
            let (tb, xb, yb) = pair[1];
            if t <= tb {
                let s = (t - ta) / (tb - ta);
                return (xa + s * (xb - xa), ya + s * (yb - ya));
            }
        }
        let (_, xl, yl) = *wps.last().unwrap();
        (xl, yl)
    }
}

/// Simulated planar range sensor parameters. Beam i points at bearing
/// `angle_min + (i + 0.5) * (angle_max - angle_min) / beam_count`, so a
/// symmetric field of view yields symmetric bearings with no duplicated
/// endpoint beam.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ScanParams {
    pub beam_count: usize,
    pub angle_min: f64,
    pub angle_max: f64,
    pub max_range: f64,
    pub range_noise_sigma: f64,
}

impl ScanParams {
    pub fn validate(&self) -> Result<()> {
        if self.beam_count < 2 {
            return Err(Error::Validation(format!(
                "scan.beam_count must be >= 2, got {}",
                self.beam_count
            )));
        }
        if !(self.angle_min < self.angle_max) {
            return Err(Error::Validation(
                "scan.angle_min must be < scan.angle_max".into(),
            ));
        }
        if !(self.max_range > 0.0) {
            return Err(Error::Validation("scan.max_range must be > 0".into()));
        }
        if self.range_noise_sigma < 0.0 {
            return Err(Error::Validation(
                "scan.range_noise_sigma must be >= 0".into(),
            ));
        }
        Ok(())
    }

    pub fn increment(&self) -> f64 {
        (self.angle_max - self.angle_min) / self.beam_count as f64
    }

    /// Bearing of beam `i` in the sensor frame.
    pub fn bearing(&self, i: usize) -> f64 {
        self.angle_min + (i as f64 + 0.5) * self.increment()
    }
}

/// One simulated scan. `hit_flags[i]` is false iff beam i saw nothing
/// within `max_range`, in which case `ranges[i] == max_range` exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LaserScan {
    pub ranges: Vec<f64>,
    pub hit_flags: Vec<bool>,
    pub params: ScanParams,
    pub stamp: f64,
}

/// Binary ground-truth occupancy raster anchored at the world origin.
#[derive(Debug, Clone)]
pub struct StaticGrid {
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    occupied: Vec<bool>,
}

impl StaticGrid {
    pub fn occupied_at(&self, ix: i64, iy: i64) -> bool {
        if ix < 0 || iy < 0 || ix >= self.width as i64 || iy >= self.height as i64 {
            return false;
        }
        self.occupied[iy as usize * self.width + ix as usize]
    }

    pub fn cell_of(&self, x: f64, y: f64) -> (i64, i64) {
        (
            (x / self.resolution).floor() as i64,
            (y / self.resolution).floor() as i64,
        )
    }

    pub fn cell_center(&self, ix: usize, iy: usize) -> (f64, f64) {
        (
            (ix as f64 + 0.5) * self.resolution,
            (iy as f64 + 0.5) * self.resolution,
        )
    }

    fn set(&mut self, ix: usize, iy: usize, value: bool) {
        self.occupied[iy * self.width + ix] = value;
    }
}

/// Immutable world: static grid plus scripted dynamic obstacles.
#[derive(Debug, Clone)]
pub struct World {
    pub static_grid: StaticGrid,
    pub dynamic_obstacles: Vec<DynamicObstacle>,
    /// World extent in meters, (width, height); the origin is (0, 0).
    pub bounds: (f64, f64),
}

impl World {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= 0.0 && y >= 0.0 && x <= self.bounds.0 && y <= self.bounds.1
    }
}

/// Build and validate a [`World`] from its declarative description.
pub fn load_world(config: &WorldConfig) -> Result<World> {
    let [w_m, h_m] = config.size;
    if !(w_m > 0.0 && h_m > 0.0) {
        return Err(Error::Config(format!(
            "world.size entries must be positive, got [{w_m}, {h_m}]"
        )));
    }
    if !(config.resolution > 0.0) {
        return Err(Error::Config(format!(
            "world.resolution must be positive, got {}",
            config.resolution
        )));
    }
    let width = (w_m / config.resolution).round().max(1.0) as usize;
    let height = (h_m / config.resolution).round().max(1.0) as usize;
    let mut grid = StaticGrid {
        width,
        height,
        resolution: config.resolution,
        occupied: vec![false; width * height],
    };

    if config.border_walls {
        for ix in 0..width {
            grid.set(ix, 0, true);
            grid.set(ix, height - 1, true);
        }
        for iy in 0..height {
            grid.set(0, iy, true);
            grid.set(width - 1, iy, true);
        }
    }

    for (i, rect) in config.rects.iter().enumerate() {
        let [x0, y0, x1, y1] = *rect;
        if !(x0 < x1 && y0 < y1) {
            return Err(Error::Config(format!(
                "world.rects[{i}] must satisfy x0 < x1 and y0 < y1"
            )));
        }
        for iy in 0..height {
            for ix in 0..width {
                let (cx, cy) = grid.cell_center(ix, iy);
                if cx >= x0 && cx <= x1 && cy >= y0 && cy <= y1 {
                    grid.set(ix, iy, true);
                }
            }
        }
    }

    for (i, disc) in config.discs.iter().enumerate() {
        let [cx, cy, r] = *disc;
        if !(r > 0.0) {
            return Err(Error::Config(format!(
                "world.discs[{i}] radius must be positive"
            )));
        }
        for iy in 0..height {
            for ix in 0..width {
                let (px, py) = grid.cell_center(ix, iy);
                if (px - cx).hypot(py - cy) <= r {
                    grid.set(ix, iy, true);
                }
            }
        }
    }

    let mut dynamic = Vec::with_capacity(config.dynamic_obstacles.len());
    for (i, obs) in config.dynamic_obstacles.iter().enumerate() {
        if !(obs.radius > 0.0) {
            return Err(Error::Validation(format!(
                "world.dynamic_obstacles[{i}].radius must be positive"
            )));
        }
        if obs.waypoints.is_empty() {
            return Err(Error::Validation(format!(
                "world.dynamic_obstacles[{i}].waypoints must not be empty"
            )));
        }
        for pair in obs.waypoints.windows(2) {
            if !(pair[0][0] < pair[1][0]) {
                return Err(Error::Validation(format!(
                    "world.dynamic_obstacles[{i}].waypoints times must be strictly increasing"
                )));
            }
        }
        for wp in &obs.waypoints {
            let [_, x, y] = *wp;
            if x < 0.0 || y < 0.0 || x > w_m || y > h_m {
                return Err(Error::Validation(format!(
                    "world.dynamic_obstacles[{i}] waypoint ({x}, {y}) lies outside bounds"
                )));
            }
        }
        let start = (obs.waypoints[0][1], obs.waypoints[0][2]);
        dynamic.push(DynamicObstacle {
            radius: obs.radius,
            waypoints: obs.waypoints.iter().map(|w| (w[0], w[1], w[2])).collect(),
            current: start,
        });
    }

    Ok(World {
        static_grid: grid,
        dynamic_obstacles: dynamic,
        bounds: (w_m, h_m),
    })
}

/// Place every dynamic obstacle at its scheduled position for time `t`.
/// Clamping semantics make this total and idempotent for fixed `t`.
pub fn step_dynamics(world: &World, t: f64) -> World {
    let mut next = world.clone();
    for obs in &mut next.dynamic_obstacles {
        obs.current = obs.center_at(t);
    }
    next
}

/// Incremental cell walk along a ray (exact Amanatides-Woo stepping: every
/// cell the segment passes through is visited, in order).
///
/// Yields `(ix, iy, t_enter)` where `t_enter` is the distance from the ray
/// origin to the point where the ray enters that cell (0 for the start
/// cell). Iteration ends when the walk leaves the grid.
pub struct GridWalk {
    ix: i64,
    iy: i64,
    step_x: i64,
    step_y: i64,
    t_max_x: f64,
    t_max_y: f64,
    t_delta_x: f64,
    t_delta_y: f64,
    width: i64,
    height: i64,
    started: bool,
}

impl GridWalk {
    /// `start` is in grid-local coordinates (relative to the grid's lower
    /// left corner); `dir` must be a unit vector.
    pub fn new(start: (f64, f64), dir: (f64, f64), resolution: f64, width: usize, height: usize) -> Self {
        let (sx, sy) = start;
        let (dx, dy) = dir;
        let ix = (sx / resolution).floor() as i64;
        let iy = (sy / resolution).floor() as i64;
        let (step_x, t_max_x, t_delta_x) = axis_setup(sx, dx, ix, resolution);
        let (step_y, t_max_y, t_delta_y) = axis_setup(sy, dy, iy, resolution);
        GridWalk {
            ix,
            iy,
            step_x,
            step_y,
            t_max_x,
            t_max_y,
            t_delta_x,
            t_delta_y,
            width: width as i64,
            height: height as i64,
            started: false,
        }
    }

    fn inside(&self) -> bool {
        self.ix >= 0 && self.iy >= 0 && self.ix < self.width && self.iy < self.height
    }
}

fn axis_setup(s: f64, d: f64, i: i64, res: f64) -> (i64, f64, f64) {
    if d > 0.0 {
        (1, ((i + 1) as f64 * res - s) / d, res / d)
    } else if d < 0.0 {
        (-1, (i as f64 * res - s) / d, res / -d)
    } else {
        (0, f64::INFINITY, f64::INFINITY)
    }
}

impl Iterator for GridWalk {
    type Item = (i64, i64, f64);

    fn next(&mut self) -> Option<(i64, i64, f64)> {
        if !self.started {
            self.started = true;
            if !self.inside() {
                return None;
            }
            return Some((self.ix, self.iy, 0.0));
        }
        let t;
        if self.t_max_x < self.t_max_y {
            t = self.t_max_x;
            self.t_max_x += self.t_delta_x;
            self.ix += self.step_x;
        } else {
            t = self.t_max_y;
            self.t_max_y += self.t_delta_y;
            self.iy += self.step_y;
        }
        if !self.inside() {
            return None;
        }
        Some((self.ix, self.iy, t))
    }
}

/// Distance along the ray to the first occupied static cell, if any within
/// `max_dist`.
fn raycast_static(grid: &StaticGrid, start: (f64, f64), dir: (f64, f64), max_dist: f64) -> Option<f64> {
    for (ix, iy, t) in GridWalk::new(start, dir, grid.resolution, grid.width, grid.height) {
        if t > max_dist {
            return None;
        }
        if grid.occupied_at(ix, iy) {
            return Some(t);
        }
    }
    None
}

/// Distance along the ray to a disc boundary, if hit within `max_dist`.
/// A ray starting inside the disc reports distance 0.
fn raycast_disc(start: (f64, f64), dir: (f64, f64), center: (f64, f64), radius: f64, max_dist: f64) -> Option<f64> {
    let ox = center.0 - start.0;
    let oy = center.1 - start.1;
    let proj = ox * dir.0 + oy * dir.1;
    let disc = proj * proj - (ox * ox + oy * oy) + radius * radius;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let t_near = proj - sq;
    let t_far = proj + sq;
    let t = if t_near > 0.0 {
        t_near
    } else if t_far > 0.0 {
        0.0 // started inside the disc
    } else {
        return None;
    };
    (t <= max_dist).then_some(t)
}

/// Simulate one scan from `pose` at time `t`.
///
/// Each beam reports the nearest static-cell or dynamic-disc intersection,
/// perturbed by additive Gaussian noise (sigma from `params`) and clamped to
/// (0, max_range]. Beams that hit nothing report exactly `max_range` with
/// `hit_flag` false and consume no noise draw ordering difference: when
/// sigma > 0 one draw is consumed per beam regardless of hit.
pub fn ray_cast<R: Rng>(
    world: &World,
    pose: &Pose2D,
    params: &ScanParams,
    t: f64,
    rng: &mut R,
) -> Result<LaserScan> {
    params.validate()?;
    if !world.contains(pose.x, pose.y) {
        return Err(Error::Domain(format!(
            "ray_cast pose ({}, {}) outside world bounds",
            pose.x, pose.y
        )));
    }
    let noise = (params.range_noise_sigma > 0.0)
        .then(|| Normal::new(0.0, params.range_noise_sigma).expect("sigma > 0"));

    let obstacles: Vec<((f64, f64), f64)> = world
        .dynamic_obstacles
        .iter()
        .map(|o| (o.center_at(t), o.radius))
        .collect();

    let mut ranges = Vec::with_capacity(params.beam_count);
    let mut hit_flags = Vec::with_capacity(params.beam_count);
    for i in 0..params.beam_count {
        let angle = pose.theta + params.bearing(i);
        let dir = (angle.cos(), angle.sin());
        let start = (pose.x, pose.y);

        let mut best: Option<f64> = raycast_static(&world.static_grid, start, dir, params.max_range);
        for &(center, radius) in &obstacles {
            if let Some(d) = raycast_disc(start, dir, center, radius, params.max_range) {
                best = Some(best.map_or(d, |b: f64| b.min(d)));
            }
        }

        let draw = noise.map(|n| n.sample(rng)).unwrap_or(0.0);
        match best {
            Some(d) => {
                let r = (d + draw).clamp(RANGE_FLOOR, params.max_range);
                ranges.push(r);
                hit_flags.push(true);
            }
            None => {
                ranges.push(params.max_range);
                hit_flags.push(false);
            }
        }
    }

    Ok(LaserScan {
        ranges,
        hit_flags,
        params: *params,
        stamp: t,
    })
}

/// True iff the robot disc at `pose` overlaps an occupied static cell or a
/// dynamic disc at time `t`. Pure in (pose, t).
pub fn check_collision(world: &World, pose: &Pose2D, footprint_radius: f64, t: f64) -> bool {
    let grid = &world.static_grid;
    let res = grid.resolution;
    let r = footprint_radius;

    let ix_lo = ((pose.x - r) / res).floor() as i64;
    let ix_hi = ((pose.x + r) / res).floor() as i64;
    let iy_lo = ((pose.y - r) / res).floor() as i64;
    let iy_hi = ((pose.y + r) / res).floor() as i64;
    for iy in iy_lo..=iy_hi {
        for ix in ix_lo..=ix_hi {
            if !grid.occupied_at(ix, iy) {
                continue;
            }
            // Closest point of the cell rectangle to the disc center.
            let cx = pose.x.clamp(ix as f64 * res, (ix + 1) as f64 * res);
            let cy = pose.y.clamp(iy as f64 * res, (iy + 1) as f64 * res);
            if (cx - pose.x).hypot(cy - pose.y) < r {
                return true;
            }
        }
    }

    world.dynamic_obstacles.iter().any(|obs| {
        let (cx, cy) = obs.center_at(t);
        (cx - pose.x).hypot(cy - pose.y) < r + obs.radius
    })
}
