//! Global planning on costmaps: obstacle inflation, Dijkstra and weighted
//! A* over an 8-connected grid, carrot goal adjustment, and polyline
//! simplification for the path follower.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::kinematics::Pose2D;
use crate::mapping::{distance_transform, Costmap, COST_LETHAL, COST_UNKNOWN};
use crate::{Error, Result};

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// 8-connected grid path. Consecutive cells are adjacent, no cell is lethal
/// or unknown, and `total_cost` is the sum of step costs: base 1 (straight)
/// or sqrt(2) (diagonal), scaled by 1 + avg(cell costs)/64.
#[derive(Debug, Clone)]
pub struct Path {
    /// Cells as (ix, iy) grid indices.
    pub cells: Vec<(usize, usize)>,
    /// Cell centers in world coordinates.
    pub world_points: Vec<(f64, f64)>,
    pub total_cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Dijkstra,
    Astar,
}

#[derive(Debug, Clone)]
pub struct PlanRequest {
    pub start: Pose2D,
    pub goal: Pose2D,
    pub algorithm: Algorithm,
    /// Heuristic weight for A*; 0 reproduces Dijkstra exactly, weights in
    /// (0, 1] keep optimality, larger trades cost for speed.
    pub heuristic_weight: f64,
}

/// Dispatch a plan request to the selected algorithm.
pub fn plan(costmap: &Costmap, request: &PlanRequest) -> Result<Path> {
    match request.algorithm {
        Algorithm::Dijkstra => plan_dijkstra(costmap, &request.start, &request.goal),
        Algorithm::Astar => {
            plan_astar(costmap, &request.start, &request.goal, request.heuristic_weight)
        }
    }
}

/// Spread cost around lethal cells.
///
/// Cells strictly closer than `robot_radius` (meters, exact Euclidean
/// distance to the nearest lethal cell) become lethal; cells from
/// `robot_radius` out to `inflation_radius` get
/// `253 * exp(-cost_scaling * (d - robot_radius))`, floored against any
/// existing cost; unknown cells and cells beyond the radius are unchanged.
pub fn inflate(costmap: &Costmap, robot_radius: f64, inflation_radius: f64, cost_scaling: f64) -> Result<Costmap> {
    if inflation_radius < robot_radius {
        return Err(Error::Validation(
            "inflation_radius must be >= robot_radius".into(),
        ));
    }
    let dist = distance_transform(costmap.width, costmap.height, |ix, iy| {
        costmap.cost(ix, iy) == COST_LETHAL
    });
    let mut out = costmap.clone();
    for iy in 0..costmap.height {
        for ix in 0..costmap.width {
            let src = costmap.cost(ix, iy);
            if src == COST_UNKNOWN || src == COST_LETHAL {
                continue;
            }
            let d = dist[iy * costmap.width + ix] * costmap.resolution;
            if d < robot_radius {
                out.set_cost(ix, iy, COST_LETHAL);
            } else if d <= inflation_radius {
                let c = (253.0 * (-cost_scaling * (d - robot_radius)).exp()).round() as u8;
                out.set_cost(ix, iy, src.max(c.min(253)));
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapNode {
    f: f64,
    row: usize,
    col: usize,
    index: usize,
}

impl Eq for HeapNode {}

impl Ord for HeapNode {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap pops the maximum; reverse so the smallest f wins, with
        // ties broken toward the lower (row, col).
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.row.cmp(&self.row))
            .then_with(|| other.col.cmp(&self.col))
    }
}

impl PartialOrd for HeapNode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

const NEIGHBORS: [(i64, i64, f64); 8] = [
    (1, 0, 1.0),
    (-1, 0, 1.0),
    (0, 1, 1.0),
    (0, -1, 1.0),
    (1, 1, SQRT2),
    (1, -1, SQRT2),
    (-1, 1, SQRT2),
    (-1, -1, SQRT2),
];

fn octile(a: (usize, usize), b: (usize, usize)) -> f64 {
    let dx = (a.0 as f64 - b.0 as f64).abs();
    let dy = (a.1 as f64 - b.1 as f64).abs();
    dx.max(dy) + (SQRT2 - 1.0) * dx.min(dy)
}

fn endpoint_cell(costmap: &Costmap, pose: &Pose2D, invalid: Error) -> Result<(usize, usize)> {
    let (ix, iy) = costmap.world_to_cell(pose.x, pose.y);
    if !costmap.in_grid(ix, iy) || !costmap.is_traversable(ix as usize, iy as usize) {
        return Err(invalid);
    }
    Ok((ix as usize, iy as usize))
}

/// Shortest path by Dijkstra (the A* engine with zero heuristic weight).
pub fn plan_dijkstra(costmap: &Costmap, start: &Pose2D, goal: &Pose2D) -> Result<Path> {
    plan_astar(costmap, start, goal, 0.0)
}

/// Weighted A*. `heuristic_weight <= 1` keeps the octile heuristic
/// admissible and the cost equal to Dijkstra's; larger weights may return
/// suboptimal (still valid) paths faster.
pub fn plan_astar(costmap: &Costmap, start: &Pose2D, goal: &Pose2D, heuristic_weight: f64) -> Result<Path> {
    if heuristic_weight < 0.0 {
        return Err(Error::Validation("heuristic_weight must be >= 0".into()));
    }
    let start_cell = endpoint_cell(costmap, start, Error::InvalidStart)?;
    let goal_cell = endpoint_cell(costmap, goal, Error::InvalidGoal)?;

    let (w, h) = (costmap.width, costmap.height);
    let idx = |c: (usize, usize)| c.1 * w + c.0;
    let mut dist = vec![f64::INFINITY; w * h];
    let mut parent: Vec<u32> = vec![u32::MAX; w * h];
    let mut closed = vec![false; w * h];
    let mut heap = BinaryHeap::new();

    dist[idx(start_cell)] = 0.0;
    heap.push(HeapNode {
        f: heuristic_weight * octile(start_cell, goal_cell),
        row: start_cell.1,
        col: start_cell.0,
        index: idx(start_cell),
    });

    while let Some(node) = heap.pop() {
        if closed[node.index] {
            continue;
        }
        closed[node.index] = true;
        let cell = (node.col, node.row);
        if cell == goal_cell {
            break;
        }
        let here = dist[node.index];
        let c_here = costmap.cost(cell.0, cell.1) as f64;
        for &(dx, dy, base) in &NEIGHBORS {
            let nx = cell.0 as i64 + dx;
            let ny = cell.1 as i64 + dy;
            if !costmap.in_grid(nx, ny) {
                continue;
            }
            let (nxu, nyu) = (nx as usize, ny as usize);
            let ni = nyu * w + nxu;
            if closed[ni] || !costmap.is_traversable(nxu, nyu) {
                continue;
            }
            if dx != 0 && dy != 0 {
                // No corner cutting: a diagonal is forbidden when both
                // orthogonal neighbors are blocked.
                let a = blocked(costmap, cell.0 as i64 + dx, cell.1 as i64);
                let b = blocked(costmap, cell.0 as i64, cell.1 as i64 + dy);
                if a && b {
                    continue;
                }
            }
            let step = base * (1.0 + (c_here + costmap.cost(nxu, nyu) as f64) / 128.0);
            let nd = here + step;
            if nd < dist[ni] {
                dist[ni] = nd;
                parent[ni] = node.index as u32;
                heap.push(HeapNode {
                    f: nd + heuristic_weight * octile((nxu, nyu), goal_cell),
                    row: nyu,
                    col: nxu,
                    index: ni,
                });
            }
        }
    }

    if !dist[idx(goal_cell)].is_finite() {
        return Err(Error::NoPath);
    }

    let mut cells = vec![goal_cell];
    let mut cur = idx(goal_cell);
    while cur != idx(start_cell) {
        cur = parent[cur] as usize;
        cells.push((cur % w, cur / w));
    }
    cells.reverse();
    let world_points = cells
        .iter()
        .map(|&(ix, iy)| costmap.cell_center(ix, iy))
        .collect();
    Ok(Path {
        cells,
        world_points,
        total_cost: dist[idx(goal_cell)],
    })
}

fn blocked(costmap: &Costmap, ix: i64, iy: i64) -> bool {
    !costmap.in_grid(ix, iy) || !costmap.is_traversable(ix as usize, iy as usize)
}

/// Walk an in-obstacle goal back toward the robot, in steps of half a cell,
/// until a usable goal point is found. Total: falls back to the robot
/// position when the whole segment is blocked.
pub fn carrot_adjust_goal(costmap: &Costmap, robot: &Pose2D, goal: &Pose2D) -> Pose2D {
    let usable = |x: f64, y: f64| {
        let (ix, iy) = costmap.world_to_cell(x, y);
        costmap.in_grid(ix, iy) && costmap.cost(ix as usize, iy as usize) < COST_LETHAL
    };
    if usable(goal.x, goal.y) {
        return *goal;
    }
    let dx = robot.x - goal.x;
    let dy = robot.y - goal.y;
    let dist = dx.hypot(dy);
    let step = costmap.resolution / 2.0;
    if dist > 0.0 {
        let (ux, uy) = (dx / dist, dy / dist);
        let mut s = step;
        while s < dist {
            let (x, y) = (goal.x + ux * s, goal.y + uy * s);
            if usable(x, y) {
                return Pose2D::new(x, y, goal.theta);
            }
            s += step;
        }
    }
    Pose2D::new(robot.x, robot.y, goal.theta)
}

/// Reduce a polyline, keeping endpoints and every original point within
/// `tolerance` of the result. Tolerance 0 returns the input unchanged.
pub fn simplify_path(points: &[(f64, f64)], tolerance: f64) -> Vec<(f64, f64)> {
    if tolerance <= 0.0 || points.len() <= 2 {
        return points.to_vec();
    }
    let mut keep = vec![false; points.len()];
    keep[0] = true;
    keep[points.len() - 1] = true;
    rdp_mark(points, 0, points.len() - 1, tolerance, &mut keep);
    points
        .iter()
        .zip(&keep)
        .filter_map(|(p, &k)| k.then_some(*p))
        .collect()
}

fn rdp_mark(points: &[(f64, f64)], lo: usize, hi: usize, tol: f64, keep: &mut [bool]) {
    if hi <= lo + 1 {
        return;
    }
    let (mut max_d, mut max_i) = (0.0, lo);
    for i in lo + 1..hi {
        let d = point_segment_distance(points[i], points[lo], points[hi]);
        if d > max_d {
            max_d = d;
            max_i = i;
        }
    }
    if max_d > tol {
        keep[max_i] = true;
        rdp_mark(points, lo, max_i, tol, keep);
        rdp_mark(points, max_i, hi, tol, keep);
    }
}

fn point_segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (abx, aby) = (b.0 - a.0, b.1 - a.1);
    let len_sq = abx * abx + aby * aby;
    if len_sq == 0.0 {
        return (p.0 - a.0).hypot(p.1 - a.1);
    }
    let t = ((p.0 - a.0) * abx + (p.1 - a.1) * aby) / len_sq;
    let t = t.clamp(0.0, 1.0);
    (p.0 - (a.0 + t * abx)).hypot(p.1 - (a.1 + t * aby))
}

/// Check the Path type invariants: adjacency, no lethal/unknown cell, and
/// total_cost consistency. Used by tests on every planner output.
pub fn validate_path(costmap: &Costmap, path: &Path) -> Result<()> {
    if path.cells.is_empty() {
        return Err(Error::Contract("path has no cells".into()));
    }
    let mut cost = 0.0;
    for (i, &(ix, iy)) in path.cells.iter().enumerate() {
        let c = costmap.cost(ix, iy);
        if c >= COST_LETHAL {
            return Err(Error::Contract(format!(
                "path cell ({ix}, {iy}) is lethal or unknown"
            )));
        }
        if i > 0 {
            let (px, py) = path.cells[i - 1];
            let dx = (ix as i64 - px as i64).abs();
            let dy = (iy as i64 - py as i64).abs();
            if dx > 1 || dy > 1 || (dx == 0 && dy == 0) {
                return Err(Error::Contract(format!(
                    "path cells ({px}, {py}) -> ({ix}, {iy}) are not 8-adjacent"
                )));
            }
            let base = if dx + dy == 2 { SQRT2 } else { 1.0 };
            cost += base * (1.0 + (costmap.cost(px, py) as f64 + c as f64) / 128.0);
        }
    }
    if (cost - path.total_cost).abs() > 1e-9 {
        return Err(Error::Contract(format!(
            "total_cost {} does not match recomputed {cost}",
            path.total_cost
        )));
    }
    Ok(())
}
