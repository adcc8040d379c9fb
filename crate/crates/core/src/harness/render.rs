//! Raster rendering of a run: occupancy in grayscale with trajectory, path,
//! and obstacle overlays in fixed colors, written as binary PPM (P6).
//!
//! Colors: planned path (220, 30, 30), estimated trajectory (40, 160, 40),
//! dynamic obstacles at the final trace time (255, 140, 0), true trajectory
//! (30, 60, 255) drawn last so no trace point is covered.

use std::path::Path;

use super::TraceRecord;
use crate::mapping::{CellState, OccupancyGrid, DEFAULT_FREE_THRESH, DEFAULT_OCCUPIED_THRESH};
use crate::world::World;
use crate::{Error, Result};

const COLOR_PATH: [u8; 3] = [220, 30, 30];
const COLOR_ESTIMATE: [u8; 3] = [40, 160, 40];
const COLOR_OBSTACLE: [u8; 3] = [255, 140, 0];
const COLOR_TRUE: [u8; 3] = [30, 60, 255];

struct Canvas {
    width: usize,
    height: usize,
    resolution: f64,
    origin: (f64, f64),
    rgb: Vec<u8>,
}

impl Canvas {
    fn cell(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let ix = ((x - self.origin.0) / self.resolution).floor() as i64;
        let iy = ((y - self.origin.1) / self.resolution).floor() as i64;
        (ix >= 0 && iy >= 0 && ix < self.width as i64 && iy < self.height as i64)
            .then_some((ix as usize, iy as usize))
    }

    fn paint(&mut self, ix: usize, iy: usize, color: [u8; 3]) {
        let i = 3 * (iy * self.width + ix);
        self.rgb[i..i + 3].copy_from_slice(&color);
    }

    fn paint_world(&mut self, x: f64, y: f64, color: [u8; 3]) {
        if let Some((ix, iy)) = self.cell(x, y) {
            self.paint(ix, iy, color);
        }
    }

    /// Bresenham segment between two world points; never skips a cell of
    /// either endpoint.
    fn line(&mut self, a: (f64, f64), b: (f64, f64), color: [u8; 3]) {
        let (Some(c0), Some(c1)) = (self.cell(a.0, a.1), self.cell(b.0, b.1)) else {
            self.paint_world(a.0, a.1, color);
            self.paint_world(b.0, b.1, color);
            return;
        };
        let (mut x0, mut y0) = (c0.0 as i64, c0.1 as i64);
        let (x1, y1) = (c1.0 as i64, c1.1 as i64);
        let dx = (x1 - x0).abs();
        let dy = -(y1 - y0).abs();
        let sx = if x0 < x1 { 1 } else { -1 };
        let sy = if y0 < y1 { 1 } else { -1 };
        let mut err = dx + dy;
        loop {
            self.paint(x0 as usize, y0 as usize, color);
            if x0 == x1 && y0 == y1 {
                break;
            }
            let e2 = 2 * err;
            if e2 >= dy {
                err += dy;
                x0 += sx;
            }
            if e2 <= dx {
                err += dx;
                y0 += sy;
            }
        }
    }
}

/// Render a run into `out_path`. The base layer is the loaded map when
/// given, else the world's ground-truth occupancy. Bytes are deterministic.
pub fn render(
    world: &World,
    trace: &[TraceRecord],
    planned_path: Option<&[(f64, f64)]>,
    map: Option<&OccupancyGrid>,
    out_path: &Path,
) -> Result<()> {
    let mut canvas = match map {
        Some(grid) => {
            let mut rgb = Vec::with_capacity(3 * grid.width() * grid.height());
            for iy in 0..grid.height() {
                for ix in 0..grid.width() {
                    let v = match grid.classify(ix, iy, DEFAULT_OCCUPIED_THRESH, DEFAULT_FREE_THRESH)
                    {
                        CellState::Free => 254,
                        CellState::Occupied => 0,
                        CellState::Unknown => 205,
                    };
                    rgb.extend_from_slice(&[v, v, v]);
                }
            }
            Canvas {
                width: grid.width(),
                height: grid.height(),
                resolution: grid.resolution(),
                origin: (grid.origin().x, grid.origin().y),
                rgb,
            }
        }
        None => {
            let g = &world.static_grid;
            let mut rgb = Vec::with_capacity(3 * g.width * g.height);
            for iy in 0..g.height {
                for ix in 0..g.width {
                    let v = if g.occupied_at(ix as i64, iy as i64) { 0 } else { 254 };
                    rgb.extend_from_slice(&[v, v, v]);
                }
            }
            Canvas {
                width: g.width,
                height: g.height,
                resolution: g.resolution,
                origin: (0.0, 0.0),
                rgb,
            }
        }
    };

    if let Some(points) = planned_path {
        for pair in points.windows(2) {
            canvas.line(pair[0], pair[1], COLOR_PATH);
        }
        if let Some(&p) = points.first() {
            canvas.paint_world(p.0, p.1, COLOR_PATH);
        }
    }

    for pair in trace.windows(2) {
        canvas.line(
            (pair[0].est_pose[0], pair[0].est_pose[1]),
            (pair[1].est_pose[0], pair[1].est_pose[1]),
            COLOR_ESTIMATE,
        );
    }

    if let Some(last) = trace.last() {
        for obs in &world.dynamic_obstacles {
            let (cx, cy) = obs.center_at(last.t);
            let r_cells = (obs.radius / canvas.resolution).ceil() as i64;
            let (Some((ox, oy)), r) = (canvas.cell(cx, cy), obs.radius) else {
                continue;
            };
            for dy in -r_cells..=r_cells {
                for dx in -r_cells..=r_cells {
                    let ix = ox as i64 + dx;
                    let iy = oy as i64 + dy;
                    if ix < 0 || iy < 0 || ix >= canvas.width as i64 || iy >= canvas.height as i64 {
                        continue;
                    }
                    let (px, py) = (
                        canvas.origin.0 + (ix as f64 + 0.5) * canvas.resolution,
                        canvas.origin.1 + (iy as f64 + 0.5) * canvas.resolution,
                    );
                    if (px - cx).hypot(py - cy) <= r {
                        canvas.paint(ix as usize, iy as usize, COLOR_OBSTACLE);
                    }
                }
            }
        }
    }

    for pair in trace.windows(2) {
        canvas.line(
            (pair[0].true_pose[0], pair[0].true_pose[1]),
            (pair[1].true_pose[0], pair[1].true_pose[1]),
            COLOR_TRUE,
        );
    }
    if let Some(first) = trace.first() {
        canvas.paint_world(first.true_pose[0], first.true_pose[1], COLOR_TRUE);
    }

    // P6 with image row 0 at the top of the map.
    let mut bytes = format!("P6\n{} {}\n255\n", canvas.width, canvas.height).into_bytes();
    for iy in (0..canvas.height).rev() {
        let row = 3 * iy * canvas.width;
        bytes.extend_from_slice(&canvas.rgb[row..row + 3 * canvas.width]);
    }
    std::fs::write(out_path, bytes).map_err(|e| Error::io(out_path, e))
}
