//! Occupancy-grid mapping with known poses, map persistence in the two-file
//! (image + YAML metadata) format, and costmap derivation.
//!
//! Grids store per-cell log-odds so scan integration is additive. The image
//! file is binary PGM (P5) with the de-facto value semantics: occupancy
//! p = (255 - pixel)/255 for negate = 0, unknown pixel 205, free 254,
//! occupied 0. In-memory row 0 sits at the grid origin; the image stores
//! row 0 at the top of the map, so rows flip on save/load.

use std::fs;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::kinematics::Pose2D;
use crate::world::{GridWalk, LaserScan};
use crate::{Error, Result};

/// Log-odds increment for an occupied endpoint observation.
pub const L_OCC: f64 = 0.85;
/// Log-odds increment for a traversed free cell (negative).
pub const L_FREE: f64 = -0.4;
/// Symmetric log-odds clamp magnitude.
pub const L_CLAMP: f64 = 4.0;

pub const DEFAULT_OCCUPIED_THRESH: f64 = 0.65;
pub const DEFAULT_FREE_THRESH: f64 = 0.196;

pub const PIXEL_FREE: u8 = 254;
pub const PIXEL_OCCUPIED: u8 = 0;
pub const PIXEL_UNKNOWN: u8 = 205;

pub const COST_LETHAL: u8 = 254;
pub const COST_UNKNOWN: u8 = 255;

/// Trinary classification of a cell belief.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellState {
    Free,
    Occupied,
    Unknown,
}

/// Log-odds occupancy grid. `origin` is the world pose of the corner of
/// cell (0, 0); cell (ix, iy) has center origin + ((ix+0.5)res, (iy+0.5)res).
/// Grid axes are world-aligned (origin yaw is carried but not applied).
#[derive(Debug, Clone)]
pub struct OccupancyGrid {
    width: usize,
    height: usize,
    resolution: f64,
    origin: Pose2D,
    log_odds: Vec<f64>,
    clamp: (f64, f64),
}

impl OccupancyGrid {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> Pose2D {
        self.origin
    }

    pub fn clamp_bounds(&self) -> (f64, f64) {
        self.clamp
    }

    pub fn log_odds(&self, ix: usize, iy: usize) -> f64 {
        self.log_odds[iy * self.width + ix]
    }

    pub fn set_log_odds(&mut self, ix: usize, iy: usize, value: f64) {
        self.log_odds[iy * self.width + ix] = value.clamp(self.clamp.0, self.clamp.1);
    }

    fn add_log_odds(&mut self, ix: usize, iy: usize, delta: f64) {
        let i = iy * self.width + ix;
        self.log_odds[i] = (self.log_odds[i] + delta).clamp(self.clamp.0, self.clamp.1);
    }

    /// Occupancy probability of a cell.
    pub fn probability(&self, ix: usize, iy: usize) -> f64 {
        1.0 / (1.0 + (-self.log_odds(ix, iy)).exp())
    }

    pub fn classify(&self, ix: usize, iy: usize, occupied_thresh: f64, free_thresh: f64) -> CellState {
        let p = self.probability(ix, iy);
        if p > occupied_thresh {
            CellState::Occupied
        } else if p < free_thresh {
            CellState::Free
        } else {
            CellState::Unknown
        }
    }

    pub fn in_grid(&self, ix: i64, iy: i64) -> bool {
        ix >= 0 && iy >= 0 && ix < self.width as i64 && iy < self.height as i64
    }

    pub fn world_to_cell(&self, x: f64, y: f64) -> (i64, i64) {
        (
            ((x - self.origin.x) / self.resolution).floor() as i64,
            ((y - self.origin.y) / self.resolution).floor() as i64,
        )
    }

    pub fn cell_center(&self, ix: usize, iy: usize) -> (f64, f64) {
        (
            self.origin.x + (ix as f64 + 0.5) * self.resolution,
            self.origin.y + (iy as f64 + 0.5) * self.resolution,
        )
    }
}

/// Create a grid with every cell at the 0.5 prior (log-odds 0).
pub fn new_grid(width: usize, height: usize, resolution: f64, origin: Pose2D) -> Result<OccupancyGrid> {
    if width == 0 || height == 0 {
        return Err(Error::Validation(format!(
            "grid dimensions must be positive, got {width}x{height}"
        )));
    }
    if !(resolution > 0.0) {
        return Err(Error::Validation(format!(
            "grid resolution must be positive, got {resolution}"
        )));
    }
    Ok(OccupancyGrid {
        width,
        height,
        resolution,
        origin,
        log_odds: vec![0.0; width * height],
        clamp: (-L_CLAMP, L_CLAMP),
    })
}

/// Log-odds increments applied per beam.
#[derive(Debug, Clone, Copy)]
pub struct InverseSensorModel {
    pub l_occ: f64,
    pub l_free: f64,
}

impl Default for InverseSensorModel {
    fn default() -> Self {
        InverseSensorModel {
            l_occ: L_OCC,
            l_free: L_FREE,
        }
    }
}

/// Fold one scan taken from `pose` into the grid.
///
/// Cells strictly between the sensor and each beam endpoint receive
/// `l_free`; the endpoint cell receives `l_occ` iff the beam hit. Updates
/// clamp to the grid bounds; untouched cells keep their exact value.
pub fn integrate_scan(
    grid: &mut OccupancyGrid,
    pose: &Pose2D,
    scan: &LaserScan,
    model: &InverseSensorModel,
) -> Result<()> {
    let (pix, piy) = grid.world_to_cell(pose.x, pose.y);
    if !grid.in_grid(pix, piy) {
        return Err(Error::Domain(format!(
            "integrate_scan pose ({}, {}) outside grid extent",
            pose.x, pose.y
        )));
    }
    let local = (pose.x - grid.origin.x, pose.y - grid.origin.y);
    for i in 0..scan.params.beam_count {
        let range = scan.ranges[i];
        let hit = scan.hit_flags[i];
        let angle = pose.theta + scan.params.bearing(i);
        let dir = (angle.cos(), angle.sin());
        let end = (local.0 + range * dir.0, local.1 + range * dir.1);
        let end_cell = (
            (end.0 / grid.resolution).floor() as i64,
            (end.1 / grid.resolution).floor() as i64,
        );

        let walk = GridWalk::new(local, dir, grid.resolution, grid.width, grid.height);
        for (step, (ix, iy, t)) in walk.enumerate() {
            if (ix, iy) == end_cell || t > range {
                break;
            }
            if step > 0 {
                grid.add_log_odds(ix as usize, iy as usize, model.l_free);
            }
        }
        if hit && grid.in_grid(end_cell.0, end_cell.1) {
            grid.add_log_odds(end_cell.0 as usize, end_cell.1 as usize, model.l_occ);
        }
    }
    Ok(())
}

/// Map metadata mirroring the two-file map format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapMetadata {
    pub image: String,
    pub resolution: f64,
    pub origin: [f64; 3],
    pub negate: u8,
    pub occupied_thresh: f64,
    pub free_thresh: f64,
}

impl MapMetadata {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.free_thresh && self.free_thresh < self.occupied_thresh && self.occupied_thresh <= 1.0) {
            return Err(Error::Validation(format!(
                "map thresholds must satisfy 0 <= free_thresh < occupied_thresh <= 1, got free {} / occupied {}",
                self.free_thresh, self.occupied_thresh
            )));
        }
        if self.negate > 1 {
            return Err(Error::Validation(format!(
                "map negate must be 0 or 1, got {}",
                self.negate
            )));
        }
        Ok(())
    }
}

/// Save `<basename>.pgm` and `<basename>.yaml` under `directory`.
///
/// Bytes are deterministic for a given grid: the image is binary P5 with
/// row 0 at the top of the map, the YAML carries exactly the keys image,
/// resolution, origin, negate, occupied_thresh, free_thresh in that order.
pub fn save_map(grid: &OccupancyGrid, directory: &Path, basename: &str) -> Result<()> {
    let pgm_path = directory.join(format!("{basename}.pgm"));
    let yaml_path = directory.join(format!("{basename}.yaml"));

    let mut bytes = format!("P5\n{} {}\n255\n", grid.width, grid.height).into_bytes();
    for iy in (0..grid.height).rev() {
        for ix in 0..grid.width {
            let px = match grid.classify(ix, iy, DEFAULT_OCCUPIED_THRESH, DEFAULT_FREE_THRESH) {
                CellState::Free => PIXEL_FREE,
                CellState::Occupied => PIXEL_OCCUPIED,
                CellState::Unknown => PIXEL_UNKNOWN,
            };
            bytes.push(px);
        }
    }
    fs::write(&pgm_path, bytes).map_err(|e| Error::io(&pgm_path, e))?;

    let yaml = format!(
        "image: {basename}.pgm\nresolution: {}\norigin: [{}, {}, {}]\nnegate: 0\noccupied_thresh: {DEFAULT_OCCUPIED_THRESH}\nfree_thresh: {DEFAULT_FREE_THRESH}\n",
        grid.resolution, grid.origin.x, grid.origin.y, grid.origin.theta
    );
    fs::write(&yaml_path, yaml).map_err(|e| Error::io(&yaml_path, e))?;
    Ok(())
}

/// Load a saved map back into a trinary grid (log-odds at the clamp bounds
/// or 0) plus its metadata.
pub fn load_map(directory: &Path, basename: &str) -> Result<(OccupancyGrid, MapMetadata)> {
    let yaml_path = directory.join(format!("{basename}.yaml"));
    let text = fs::read_to_string(&yaml_path).map_err(|e| Error::io(&yaml_path, e))?;
    let meta: MapMetadata = serde_yaml::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", yaml_path.display())))?;
    meta.validate()?;

    let pgm_path = directory.join(&meta.image);
    let data = fs::read(&pgm_path).map_err(|e| Error::io(&pgm_path, e))?;
    let (width, height, maxval, pixels) = parse_pgm(&data)
        .map_err(|msg| Error::Config(format!("{}: {msg}", pgm_path.display())))?;
    if maxval != 255 {
        return Err(Error::Config(format!(
            "{}: expected maxval 255, got {maxval}",
            pgm_path.display()
        )));
    }

    let mut grid = new_grid(
        width,
        height,
        meta.resolution,
        Pose2D::new(meta.origin[0], meta.origin[1], meta.origin[2]),
    )?;
    for iy in 0..height {
        for ix in 0..width {
            // Image row 0 is the top of the map.
            let px = pixels[(height - 1 - iy) * width + ix] as f64;
            let occupancy = if meta.negate == 0 {
                (255.0 - px) / 255.0
            } else {
                px / 255.0
            };
            let l = if occupancy > meta.occupied_thresh {
                L_CLAMP
            } else if occupancy < meta.free_thresh {
                -L_CLAMP
            } else {
                0.0
            };
            grid.set_log_odds(ix, iy, l);
        }
    }
    Ok((grid, meta))
}

fn parse_pgm(data: &[u8]) -> std::result::Result<(usize, usize, u32, Vec<u8>), String> {
    let mut cursor = 0usize;

    let mut next_token = |data: &[u8]| -> std::result::Result<String, String> {
        // Skip whitespace and '#' comments.
        loop {
            while cursor < data.len() && data[cursor].is_ascii_whitespace() {
                cursor += 1;
            }
            if cursor < data.len() && data[cursor] == b'#' {
                while cursor < data.len() && data[cursor] != b'\n' {
                    cursor += 1;
                }
                continue;
            }
            break;
        }
        let start = cursor;
        while cursor < data.len() && !data[cursor].is_ascii_whitespace() {
            cursor += 1;
        }
        if start == cursor {
            return Err("unexpected end of header".into());
        }
        String::from_utf8(data[start..cursor].to_vec()).map_err(|_| "non-ASCII header".into())
    };

    let magic = next_token(data)?;
    if magic != "P5" {
        return Err(format!("expected P5 magic, got {magic:?}"));
    }
    let width: usize = next_token(data)?.parse().map_err(|_| "bad width")?;
    let height: usize = next_token(data)?.parse().map_err(|_| "bad height")?;
    let maxval: u32 = next_token(data)?.parse().map_err(|_| "bad maxval")?;
    // Exactly one whitespace byte separates the header from the raster.
    cursor += 1;
    let need = width * height;
    let mut pixels = vec![0u8; need];
    let mut slice = &data[cursor.min(data.len())..];
    slice
        .read_exact(&mut pixels)
        .map_err(|_| format!("raster truncated: need {need} bytes"))?;
    Ok((width, height, maxval, pixels))
}

/// Trinary belief grid mirroring a world's ground-truth occupancy
/// (log-odds pinned to the clamp bounds).
pub fn grid_from_ground_truth(world: &crate::world::World) -> OccupancyGrid {
    let g = &world.static_grid;
    let mut grid = new_grid(g.width, g.height, g.resolution, Pose2D::new(0.0, 0.0, 0.0))
        .expect("world grids are non-empty");
    for iy in 0..g.height {
        for ix in 0..g.width {
            let l = if g.occupied_at(ix as i64, iy as i64) {
                L_CLAMP
            } else {
                -L_CLAMP
            };
            grid.set_log_odds(ix, iy, l);
        }
    }
    grid
}

/// Traversal-cost raster with the same geometry as its source grid.
/// Cost 0..=253 is traversable, 254 lethal, 255 unknown.
#[derive(Debug, Clone)]
pub struct Costmap {
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    pub origin: Pose2D,
    cost: Vec<u8>,
}

impl Costmap {
    pub fn new(width: usize, height: usize, resolution: f64, origin: Pose2D, fill: u8) -> Self {
        Costmap {
            width,
            height,
            resolution,
            origin,
            cost: vec![fill; width * height],
        }
    }

    pub fn cost(&self, ix: usize, iy: usize) -> u8 {
        self.cost[iy * self.width + ix]
    }

    pub fn set_cost(&mut self, ix: usize, iy: usize, value: u8) {
        self.cost[iy * self.width + ix] = value;
    }

    pub fn in_grid(&self, ix: i64, iy: i64) -> bool {
        ix >= 0 && iy >= 0 && ix < self.width as i64 && iy < self.height as i64
    }

    pub fn is_traversable(&self, ix: usize, iy: usize) -> bool {
        self.cost(ix, iy) < COST_LETHAL
    }

    pub fn world_to_cell(&self, x: f64, y: f64) -> (i64, i64) {
        (
            ((x - self.origin.x) / self.resolution).floor() as i64,
            ((y - self.origin.y) / self.resolution).floor() as i64,
        )
    }

    pub fn cell_center(&self, ix: usize, iy: usize) -> (f64, f64) {
        (
            self.origin.x + (ix as f64 + 0.5) * self.resolution,
            self.origin.y + (iy as f64 + 0.5) * self.resolution,
        )
    }
}

/// Project a belief grid onto a costmap: occupied -> lethal (254),
/// unknown -> 255, free -> 0.
pub fn to_costmap(grid: &OccupancyGrid, occupied_thresh: f64, free_thresh: f64) -> Result<Costmap> {
    if !(0.0 <= free_thresh && free_thresh < occupied_thresh && occupied_thresh <= 1.0) {
        return Err(Error::Validation(
            "to_costmap thresholds must satisfy 0 <= free < occupied <= 1".into(),
        ));
    }
    let mut cm = Costmap::new(grid.width, grid.height, grid.resolution, grid.origin, 0);
    for iy in 0..grid.height {
        for ix in 0..grid.width {
            let c = match grid.classify(ix, iy, occupied_thresh, free_thresh) {
                CellState::Occupied => COST_LETHAL,
                CellState::Unknown => COST_UNKNOWN,
                CellState::Free => 0,
            };
            cm.set_cost(ix, iy, c);
        }
    }
    Ok(cm)
}

/// Exact Euclidean distance transform. Returns per-cell distance in cell
/// units to the nearest source cell (large sentinel when no source exists).
///
/// Two-pass parabolic envelope over squared distances, exact for all
/// configurations.
pub fn distance_transform(width: usize, height: usize, is_source: impl Fn(usize, usize) -> bool) -> Vec<f64> {
    const BIG: f64 = 1e9;
    let mut field = vec![0.0f64; width * height];
    for iy in 0..height {
        for ix in 0..width {
            field[iy * width + ix] = if is_source(ix, iy) { 0.0 } else { BIG };
        }
    }

    let n = width.max(height);
    let mut f = vec![0.0f64; n];
    let mut d = vec![0.0f64; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];

    // Columns, then rows.
    for ix in 0..width {
        for iy in 0..height {
            f[iy] = field[iy * width + ix];
        }
        dt_1d(&f[..height], &mut d, &mut v, &mut z);
        for iy in 0..height {
            field[iy * width + ix] = d[iy];
        }
    }
    for iy in 0..height {
        f[..width].copy_from_slice(&field[iy * width..iy * width + width]);
        dt_1d(&f[..width], &mut d, &mut v, &mut z);
        for ix in 0..width {
            field[iy * width + ix] = d[ix];
        }
    }

    field.iter().map(|&sq| sq.sqrt()).collect()
}

fn dt_1d(f: &[f64], d: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        loop {
            let p = v[k];
            let s = (f[q] + (q * q) as f64 - f[p] - (p * p) as f64) / (2 * q - 2 * p) as f64;
            if s <= z[k] {
                k -= 1;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = f64::INFINITY;
                break;
            }
        }
    }
    k = 0;
    for q in 0..n {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let dq = q as f64 - v[k] as f64;
        d[q] = dq * dq + f[v[k]];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::ScanParams;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use tempfile::tempdir;

    fn origin0() -> Pose2D {
        Pose2D::new(0.0, 0.0, 0.0)
    }

    fn two_beam_scan(ranges: [f64; 2], hits: [bool; 2], max_range: f64) -> LaserScan {
        LaserScan {
            ranges: ranges.to_vec(),
            hit_flags: hits.to_vec(),
            params: ScanParams {
                beam_count: 2,
                angle_min: -0.02,
                angle_max: 0.02,
                max_range,
                range_noise_sigma: 0.0,
            },
            stamp: 0.0,
        }
    }

    #[test]
    fn new_grid_starts_at_prior() {
        let g = new_grid(10, 10, 0.05, origin0()).unwrap();
        for iy in 0..10 {
            for ix in 0..10 {
                assert_eq!(g.probability(ix, iy), 0.5);
            }
        }
        assert!(matches!(
            new_grid(0, 10, 0.05, origin0()),
            Err(Error::Validation(_))
        ));
        let (cx, cy) = g.cell_center(0, 0);
        assert_eq!((cx, cy), (0.025, 0.025));
    }

    #[test]
    fn no_hit_scan_only_decrements() {
        let mut g = new_grid(60, 60, 0.05, origin0()).unwrap();
        let scan = two_beam_scan([1.0, 1.0], [false, false], 1.0);
        integrate_scan(&mut g, &Pose2D::new(1.5, 1.5, 0.0), &scan, &Default::default()).unwrap();
        for iy in 0..60 {
            for ix in 0..60 {
                assert!(g.log_odds(ix, iy) <= 0.0);
            }
        }
        assert!((0..3600).any(|i| g.log_odds(i % 60, i / 60) < 0.0));
    }

    #[test]
    fn double_hit_accumulates_log_odds() {
        let mut g = new_grid(60, 60, 0.05, origin0()).unwrap();
        // Endpoint lands in the cell containing (2.5, 1.5).
        let scan = two_beam_scan([1.0, 3.0], [true, false], 3.0);
        let pose = Pose2D::new(1.5, 1.5, 0.0);
        integrate_scan(&mut g, &pose, &scan, &Default::default()).unwrap();
        integrate_scan(&mut g, &pose, &scan, &Default::default()).unwrap();
        let bearing = scan.params.bearing(0);
        let (ix, iy) = g.world_to_cell(1.5 + bearing.cos(), 1.5 + bearing.sin());
        let l = g.log_odds(ix as usize, iy as usize);
        assert!((l - 1.7).abs() < 1e-12, "l = {l}");
        let p = g.probability(ix as usize, iy as usize);
        assert!((p - 0.845534).abs() < 1e-4, "p = {p}");
    }

    #[test]
    fn repeated_scans_reach_clamp_fixed_point() {
        let mut g = new_grid(60, 60, 0.05, origin0()).unwrap();
        let scan = two_beam_scan([1.0, 1.0], [true, true], 3.0);
        let pose = Pose2D::new(1.5, 1.5, 0.0);
        for _ in 0..30 {
            integrate_scan(&mut g, &pose, &scan, &Default::default()).unwrap();
        }
        let snapshot: Vec<f64> = (0..3600).map(|i| g.log_odds(i % 60, i / 60)).collect();
        integrate_scan(&mut g, &pose, &scan, &Default::default()).unwrap();
        let after: Vec<f64> = (0..3600).map(|i| g.log_odds(i % 60, i / 60)).collect();
        assert_eq!(snapshot, after);
        assert!(snapshot.iter().any(|&l| l == L_CLAMP));
        assert!(snapshot.iter().any(|&l| l == -L_CLAMP));
    }

    #[test]
    fn integration_order_independent_inside_clamp() {
        let pose_a = Pose2D::new(1.5, 1.5, 0.0);
        let pose_b = Pose2D::new(1.5, 1.6, 0.5);
        let scan_a = two_beam_scan([1.2, 0.8], [true, true], 3.0);
        let scan_b = two_beam_scan([0.9, 1.4], [true, false], 3.0);

        let mut g1 = new_grid(60, 60, 0.05, origin0()).unwrap();
        integrate_scan(&mut g1, &pose_a, &scan_a, &Default::default()).unwrap();
        integrate_scan(&mut g1, &pose_b, &scan_b, &Default::default()).unwrap();

        let mut g2 = new_grid(60, 60, 0.05, origin0()).unwrap();
        integrate_scan(&mut g2, &pose_b, &scan_b, &Default::default()).unwrap();
        integrate_scan(&mut g2, &pose_a, &scan_a, &Default::default()).unwrap();

        for iy in 0..60 {
            for ix in 0..60 {
                assert!((g1.log_odds(ix, iy) - g2.log_odds(ix, iy)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn untouched_cells_keep_exact_prior() {
        let mut g = new_grid(60, 60, 0.05, origin0()).unwrap();
        let scan = two_beam_scan([0.5, 0.5], [true, true], 3.0);
        integrate_scan(&mut g, &Pose2D::new(1.5, 1.5, 0.0), &scan, &Default::default()).unwrap();
        // A far corner cell is untouched by beams pointing along +x.
        assert_eq!(g.log_odds(5, 55), 0.0);
    }

    #[test]
    fn pose_outside_grid_is_domain_error() {
        let mut g = new_grid(10, 10, 0.05, origin0()).unwrap();
        let scan = two_beam_scan([0.5, 0.5], [true, true], 3.0);
        let r = integrate_scan(&mut g, &Pose2D::new(5.0, 5.0, 0.0), &scan, &Default::default());
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn save_load_roundtrip_preserves_trinary() {
        let dir = tempdir().unwrap();
        let mut g = new_grid(30, 20, 0.05, Pose2D::new(-1.0, 0.5, 0.0)).unwrap();
        g.set_log_odds(3, 4, L_CLAMP);
        g.set_log_odds(10, 10, -L_CLAMP);
        g.set_log_odds(11, 10, -2.0);
        save_map(&g, dir.path(), "m").unwrap();
        let (loaded, meta) = load_map(dir.path(), "m").unwrap();
        assert_eq!(meta.resolution, 0.05);
        assert_eq!(meta.origin, [-1.0, 0.5, 0.0]);
        for iy in 0..20 {
            for ix in 0..30 {
                assert_eq!(
                    g.classify(ix, iy, DEFAULT_OCCUPIED_THRESH, DEFAULT_FREE_THRESH),
                    loaded.classify(ix, iy, DEFAULT_OCCUPIED_THRESH, DEFAULT_FREE_THRESH),
                    "cell ({ix}, {iy})"
                );
            }
        }
        // Determinism: saving again produces identical bytes.
        let bytes1 = std::fs::read(dir.path().join("m.pgm")).unwrap();
        save_map(&g, dir.path(), "m").unwrap();
        let bytes2 = std::fs::read(dir.path().join("m.pgm")).unwrap();
        assert_eq!(bytes1, bytes2);
    }

    #[test]
    fn all_unknown_grid_encodes_205() {
        let dir = tempdir().unwrap();
        let g = new_grid(5, 5, 0.1, origin0()).unwrap();
        save_map(&g, dir.path(), "u").unwrap();
        let bytes = std::fs::read(dir.path().join("u.pgm")).unwrap();
        let raster = &bytes[bytes.len() - 25..];
        assert!(raster.iter().all(|&b| b == PIXEL_UNKNOWN));
    }

    #[test]
    fn pixel_value_semantics() {
        let dir = tempdir().unwrap();
        let pgm = b"P5\n2 1\n255\n".iter().copied().chain([254u8, 0u8]).collect::<Vec<u8>>();
        std::fs::write(dir.path().join("v.pgm"), pgm).unwrap();
        std::fs::write(
            dir.path().join("v.yaml"),
            "image: v.pgm\nresolution: 0.1\norigin: [0, 0, 0]\nnegate: 0\noccupied_thresh: 0.65\nfree_thresh: 0.196\n",
        )
        .unwrap();
        let (g, _) = load_map(dir.path(), "v").unwrap();
        assert_eq!(g.classify(0, 0, 0.65, 0.196), CellState::Free);
        assert_eq!(g.classify(1, 0, 0.65, 0.196), CellState::Occupied);
    }

    #[test]
    fn bad_thresholds_rejected() {
        let dir = tempdir().unwrap();
        std::fs::write(dir.path().join("b.pgm"), b"P5\n1 1\n255\n\x00").unwrap();
        std::fs::write(
            dir.path().join("b.yaml"),
            "image: b.pgm\nresolution: 0.1\norigin: [0, 0, 0]\nnegate: 0\noccupied_thresh: 0.1\nfree_thresh: 0.5\n",
        )
        .unwrap();
        assert!(matches!(load_map(dir.path(), "b"), Err(Error::Validation(_))));
    }

    #[test]
    fn missing_file_is_io_error() {
        let dir = tempdir().unwrap();
        assert!(matches!(load_map(dir.path(), "nope"), Err(Error::Io { .. })));
    }

    #[test]
    fn costmap_projection() {
        let mut g = new_grid(3, 1, 0.1, origin0()).unwrap();
        g.set_log_odds(0, 0, -L_CLAMP);
        g.set_log_odds(1, 0, L_CLAMP);
        let cm = to_costmap(&g, 0.65, 0.196).unwrap();
        assert_eq!(cm.cost(0, 0), 0);
        assert_eq!(cm.cost(1, 0), COST_LETHAL);
        assert_eq!(cm.cost(2, 0), COST_UNKNOWN);
    }

    #[test]
    fn edt_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let w = rng.random_range(3..18);
            let h = rng.random_range(3..18);
            let src: Vec<bool> = (0..w * h).map(|_| rng.random_bool(0.2)).collect();
            if !src.iter().any(|&s| s) {
                continue;
            }
            let d = distance_transform(w, h, |x, y| src[y * w + x]);
            for iy in 0..h {
                for ix in 0..w {
                    let mut best = f64::INFINITY;
                    for sy in 0..h {
                        for sx in 0..w {
                            if src[sy * w + sx] {
                                let dx = ix as f64 - sx as f64;
                                let dy = iy as f64 - sy as f64;
                                best = best.min((dx * dx + dy * dy).sqrt());
                            }
                        }
                    }
                    assert!(
                        (d[iy * w + ix] - best).abs() < 1e-9,
                        "cell ({ix},{iy}): {} vs {best}",
                        d[iy * w + ix]
                    );
                }
            }
        }
    }
}
