//! Python bindings: the main pose/kinematics types, the low-pass control
//! laws, map planning, and end-to-end scenario runs.
//!
//! Build with `cargo build -p nav2d-py --release` and import the produced
//! `libnav2d_py.so` as `nav2d_py` (see python/smoke_test.py).

use std::path::Path;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use nav2d::control::{ControlParams, ControlState};
use nav2d::harness::{self, ScenarioConfig};
use nav2d::kinematics::{self, RobotParams, Twist2D, WheelRates};
use nav2d::mapping::{
    grid_from_ground_truth, load_map, save_map, to_costmap, DEFAULT_FREE_THRESH,
    DEFAULT_OCCUPIED_THRESH,
};
use nav2d::planning;
use nav2d::world::load_world;

fn to_py_err(err: nav2d::Error) -> PyErr {
    match &err {
        nav2d::Error::Io { .. } => PyIOError::new_err(err.to_string()),
        _ => PyValueError::new_err(err.to_string()),
    }
}

/// Planar pose (x, y, theta), theta normalized to (-pi, pi].
#[pyclass(skip_from_py_object)]
#[derive(Clone, Copy)]
struct Pose2D {
    inner: kinematics::Pose2D,
}

#[pymethods]
impl Pose2D {
    #[new]
    fn new(x: f64, y: f64, theta: f64) -> Self {
        Pose2D {
            inner: kinematics::Pose2D::new(x, y, theta),
        }
    }

    #[getter]
    fn x(&self) -> f64 {
        self.inner.x
    }

    #[getter]
    fn y(&self) -> f64 {
        self.inner.y
    }

    #[getter]
    fn theta(&self) -> f64 {
        self.inner.theta
    }

    /// Integrate a constant twist (v, w) for dt seconds (exact arc).
    fn integrate(&self, v: f64, w: f64, dt: f64) -> Pose2D {
        Pose2D {
            inner: kinematics::integrate_pose(&self.inner, &Twist2D { v, w }, dt),
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "Pose2D(x={}, y={}, theta={})",
            self.inner.x, self.inner.y, self.inner.theta
        )
    }
}

fn robot_params(wheel_radius: f64, wheel_base: f64) -> PyResult<RobotParams> {
    let params = RobotParams {
        wheel_radius,
        wheel_base,
        footprint_radius: 0.12,
        v_max: 1.0,
        w_max: 10.0,
    };
    params.validate().map_err(to_py_err)?;
    Ok(params)
}

/// (v, w) from wheel rates: v = R/2 (v_r + v_l), w = R/L (v_r - v_l).
#[pyfunction]
fn body_twist_from_wheels(v_r: f64, v_l: f64, wheel_radius: f64, wheel_base: f64) -> PyResult<(f64, f64)> {
    let t = kinematics::body_twist_from_wheels(WheelRates { v_r, v_l }, &robot_params(wheel_radius, wheel_base)?);
    Ok((t.v, t.w))
}

/// (v_r, v_l) from a body twist; exact inverse of body_twist_from_wheels.
#[pyfunction]
fn wheels_from_body_twist(v: f64, w: f64, wheel_radius: f64, wheel_base: f64) -> PyResult<(f64, f64)> {
    let r = kinematics::wheels_from_body_twist(Twist2D { v, w }, &robot_params(wheel_radius, wheel_base)?);
    Ok((r.v_r, r.v_l))
}

/// Velocity law v_k = (1 - alpha) v_prev + alpha (1 - p_t) v_max.
#[pyfunction]
fn lpf_velocity(v_prev: f64, p_t: f64, alpha: f64, v_max: f64) -> PyResult<f64> {
    let params = ControlParams {
        alpha,
        v_max,
        ..ControlParams::retuned()
    };
    params.validate().map_err(to_py_err)?;
    let mut state = ControlState::new();
    state.v_prev = v_prev;
    nav2d::control::lpf_velocity(&mut state, p_t, &params).map_err(to_py_err)
}

/// Steering law theta_k = (1 - beta) theta_prev + beta (pi/2) s_k.
#[pyfunction]
fn lpf_steering(theta_prev: f64, s_k: f64, beta: f64) -> PyResult<f64> {
    let params = ControlParams {
        beta,
        ..ControlParams::retuned()
    };
    params.validate().map_err(to_py_err)?;
    let mut state = ControlState::new();
    state.theta_prev = theta_prev;
    nav2d::control::lpf_steering(&mut state, s_k, &params).map_err(to_py_err)
}

fn split_map_spec(spec: &str) -> PyResult<(&Path, &str)> {
    let path = Path::new(spec);
    let base = path
        .file_name()
        .and_then(|s| s.to_str())
        .ok_or_else(|| PyValueError::new_err(format!("bad map spec {spec:?}")))?;
    Ok((path.parent().unwrap_or(Path::new(".")), base))
}

/// Save the scenario world's ground-truth occupancy as a two-file map.
#[pyfunction]
fn save_ground_truth_map(scenario_path: &str, out_dir: &str, basename: &str) -> PyResult<()> {
    let config = ScenarioConfig::from_file(Path::new(scenario_path)).map_err(to_py_err)?;
    let world = load_world(&config.world).map_err(to_py_err)?;
    let grid = grid_from_ground_truth(&world);
    harness::ensure_dir(Path::new(out_dir)).map_err(to_py_err)?;
    save_map(&grid, Path::new(out_dir), basename).map_err(to_py_err)
}

/// Plan on a saved map ("<dir>/<basename>"); returns the path as [(x, y)].
#[pyfunction]
#[pyo3(signature = (map_spec, start, goal, algorithm="dijkstra", heuristic_weight=1.0, robot_radius=0.12, inflation_radius=0.45, cost_scaling=5.0, simplify_tolerance=0.0))]
#[allow(clippy::too_many_arguments)]
fn plan_on_map(
    map_spec: &str,
    start: (f64, f64),
    goal: (f64, f64),
    algorithm: &str,
    heuristic_weight: f64,
    robot_radius: f64,
    inflation_radius: f64,
    cost_scaling: f64,
    simplify_tolerance: f64,
) -> PyResult<Vec<(f64, f64)>> {
    let weight = match algorithm {
        "dijkstra" => 0.0,
        "astar" => heuristic_weight,
        other => {
            return Err(PyValueError::new_err(format!(
                "algorithm must be 'dijkstra' or 'astar', got {other:?}"
            )))
        }
    };
    let (dir, base) = split_map_spec(map_spec)?;
    let (grid, _) = load_map(dir, base).map_err(to_py_err)?;
    let costmap = to_costmap(&grid, DEFAULT_OCCUPIED_THRESH, DEFAULT_FREE_THRESH).map_err(to_py_err)?;
    let inflated = planning::inflate(
        &costmap,
        robot_radius,
        inflation_radius.max(robot_radius),
        cost_scaling,
    )
    .map_err(to_py_err)?;
    let start_pose = kinematics::Pose2D::new(start.0, start.1, 0.0);
    let goal_pose = planning::carrot_adjust_goal(
        &inflated,
        &start_pose,
        &kinematics::Pose2D::new(goal.0, goal.1, 0.0),
    );
    let path = planning::plan_astar(&inflated, &start_pose, &goal_pose, weight).map_err(to_py_err)?;
    Ok(planning::simplify_path(&path.world_points, simplify_tolerance))
}

/// Run a scenario file; returns a metrics dict (plus steps and trace_hash).
/// When out_dir is given, trace.jsonl and metrics.json are written there.
#[pyfunction]
#[pyo3(signature = (scenario_path, seed=None, out_dir=None))]
fn run_scenario(
    py: Python<'_>,
    scenario_path: &str,
    seed: Option<u64>,
    out_dir: Option<&str>,
) -> PyResult<Py<PyDict>> {
    let config = ScenarioConfig::from_file(Path::new(scenario_path)).map_err(to_py_err)?;
    let (records, metrics) = harness::run_scenario(&config, seed).map_err(to_py_err)?;
    if let Some(dir) = out_dir {
        harness::write_run_outputs(Path::new(dir), &records, &metrics).map_err(to_py_err)?;
    }
    let dict = PyDict::new(py);
    dict.set_item("success", metrics.success)?;
    dict.set_item("collisions", metrics.collisions)?;
    dict.set_item("time_to_goal", metrics.time_to_goal)?;
    dict.set_item("path_length", metrics.path_length)?;
    dict.set_item("min_clearance", metrics.min_clearance)?;
    dict.set_item("mean_localization_error", metrics.mean_localization_error)?;
    dict.set_item("steps", records.len())?;
    dict.set_item("trace_hash", harness::trace::hash_records(&records))?;
    Ok(dict.into())
}

#[pymodule]
fn nav2d_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Pose2D>()?;
    m.add_function(wrap_pyfunction!(body_twist_from_wheels, m)?)?;
    m.add_function(wrap_pyfunction!(wheels_from_body_twist, m)?)?;
    m.add_function(wrap_pyfunction!(lpf_velocity, m)?)?;
    m.add_function(wrap_pyfunction!(lpf_steering, m)?)?;
    m.add_function(wrap_pyfunction!(save_ground_truth_map, m)?)?;
    m.add_function(wrap_pyfunction!(plan_on_map, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    Ok(())
}
