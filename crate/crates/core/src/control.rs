//! Reactive control: low-pass-filtered velocity and steering laws driven by
//! (collision probability, scaled steering) inputs, a pure-pursuit path
//! follower, and the executive state machine that arbitrates between them
//! with hysteresis and a rotate-recovery behavior.

use serde::{Deserialize, Serialize};

use crate::kinematics::{wrap_angle, Pose2D};
use crate::perception::PerceptionOutput;
use crate::{Error, Result};

/// Controller gains and thresholds.
///
/// `alpha`/`beta` are the velocity and steering low-pass coefficients
/// (retuned default alpha 0.3; the original preset uses 0.7, beta 0.5 in
/// both). Reactive override engages above `override_on` and releases after
/// the collision probability stays below `override_off` for
/// `override_hold` seconds.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ControlParams {
    pub alpha: f64,
    pub beta: f64,
    pub v_max: f64,
    pub w_max: f64,
    pub override_on: f64,
    pub override_off: f64,
    pub override_hold: f64,
    pub lookahead: f64,
    pub goal_tolerance: f64,
    pub stuck_speed: f64,
    pub stuck_time: f64,
    pub recovery_spin: f64,
}

impl Default for ControlParams {
    fn default() -> Self {
        ControlParams::retuned()
    }
}

impl ControlParams {
    /// Retuned ground-robot preset (alpha 0.3, beta 0.5).
    pub fn retuned() -> Self {
        ControlParams {
            alpha: 0.3,
            beta: 0.5,
            v_max: 0.5,
            w_max: 1.5,
            override_on: 0.7,
            override_off: 0.4,
            override_hold: 1.0,
            lookahead: 0.3,
            goal_tolerance: 0.15,
            stuck_speed: 0.01,
            stuck_time: 3.0,
            recovery_spin: 0.5,
        }
    }

    /// Original preset (alpha 0.7, beta 0.5).
    pub fn original() -> Self {
        ControlParams {
            alpha: 0.7,
            ..ControlParams::retuned()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) || !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::Validation(
                "control alpha and beta must lie in [0, 1]".into(),
            ));
        }
        if !(self.override_off < self.override_on) {
            return Err(Error::Validation(
                "control.override_off must be < control.override_on".into(),
            ));
        }
        for (name, v) in [
            ("v_max", self.v_max),
            ("w_max", self.w_max),
            ("override_hold", self.override_hold),
            ("lookahead", self.lookahead),
            ("goal_tolerance", self.goal_tolerance),
            ("stuck_speed", self.stuck_speed),
            ("stuck_time", self.stuck_time),
            ("recovery_spin", self.recovery_spin),
        ] {
            if !(v > 0.0) {
                return Err(Error::Validation(format!(
                    "control.{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Tracking,
    Reactive,
    Recovery,
    Done,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Mode::Tracking => "Tracking",
            Mode::Reactive => "Reactive",
            Mode::Recovery => "Recovery",
            Mode::Done => "Done",
        };
        f.write_str(s)
    }
}

/// Mutable controller state carried between steps. `v_prev` and
/// `theta_prev` start at zero for the first iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlState {
    pub v_prev: f64,
    pub theta_prev: f64,
    pub mode: Mode,
    pub mode_entered_at: f64,
    /// First time the collision probability dropped below `override_off`
    /// during the current reactive episode.
    pub below_off_since: Option<f64>,
    /// First time the commanded speed dropped below `stuck_speed`.
    pub slow_since: Option<f64>,
}

impl ControlState {
    pub fn new() -> Self {
        ControlState {
            v_prev: 0.0,
            theta_prev: 0.0,
            mode: Mode::Tracking,
            mode_entered_at: 0.0,
            below_off_since: None,
            slow_since: None,
        }
    }
}

impl Default for ControlState {
    fn default() -> Self {
        ControlState::new()
    }
}

/// Commanded planar twist, bounded by `v_max`/`w_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlCommand {
    pub v: f64,
    pub w: f64,
}

/// Velocity low-pass law: v_k = (1 - alpha) v_{k-1} + alpha (1 - p_t) v_max.
/// Updates `state.v_prev`.
pub fn lpf_velocity(state: &mut ControlState, p_t: f64, params: &ControlParams) -> Result<f64> {
    if !p_t.is_finite() || !(0.0..=1.0).contains(&p_t) {
        return Err(Error::Contract(format!("p_t must be in [0, 1], got {p_t}")));
    }
    let v_k = (1.0 - params.alpha) * state.v_prev + params.alpha * (1.0 - p_t) * params.v_max;
    state.v_prev = v_k;
    Ok(v_k)
}

/// Steering low-pass law: theta_k = (1 - beta) theta_{k-1} + beta (pi/2) s_k.
/// Updates `state.theta_prev`.
pub fn lpf_steering(state: &mut ControlState, s_k: f64, params: &ControlParams) -> Result<f64> {
    if !s_k.is_finite() || !(-1.0..=1.0).contains(&s_k) {
        return Err(Error::Contract(format!("s_k must be in [-1, 1], got {s_k}")));
    }
    let theta_k =
        (1.0 - params.beta) * state.theta_prev + params.beta * std::f64::consts::FRAC_PI_2 * s_k;
    state.theta_prev = theta_k;
    Ok(theta_k)
}

/// Geometric path follower.
///
/// The robot is projected onto the waypoint polyline; the target is the
/// first waypoint at least `lookahead` arc length ahead of the projection
/// (else the final point). Returns (v_ref, w_ref, goal_reached) with
/// w_ref = 2 v_ref sin(bearing error) / lookahead and v_ref slowed linearly
/// once the bearing error exceeds 45 degrees.
pub fn pure_pursuit(
    pose: &Pose2D,
    waypoints: &[(f64, f64)],
    params: &ControlParams,
) -> Result<(f64, f64, bool)> {
    if waypoints.is_empty() {
        return Err(Error::Contract("pure_pursuit requires waypoints".into()));
    }
    let last = *waypoints.last().unwrap();
    if (pose.x - last.0).hypot(pose.y - last.1) <= params.goal_tolerance {
        return Ok((0.0, 0.0, true));
    }

    let target = if waypoints.len() == 1 {
        waypoints[0]
    } else {
        // Arc-length position of the closest point on the polyline.
        let mut cum = Vec::with_capacity(waypoints.len());
        cum.push(0.0);
        for seg in waypoints.windows(2) {
            let len = (seg[1].0 - seg[0].0).hypot(seg[1].1 - seg[0].1);
            cum.push(cum.last().unwrap() + len);
        }
        let mut best = (f64::INFINITY, 0.0);
        for (i, seg) in waypoints.windows(2).enumerate() {
            let (ax, ay) = seg[0];
            let (bx, by) = seg[1];
            let (abx, aby) = (bx - ax, by - ay);
            let len_sq = abx * abx + aby * aby;
            let t = if len_sq == 0.0 {
                0.0
            } else {
                (((pose.x - ax) * abx + (pose.y - ay) * aby) / len_sq).clamp(0.0, 1.0)
            };
            let (px, py) = (ax + t * abx, ay + t * aby);
            let d = (pose.x - px).hypot(pose.y - py);
            if d < best.0 {
                best = (d, cum[i] + t * len_sq.sqrt());
            }
        }
        let along = best.1;
        waypoints
            .iter()
            .zip(&cum)
            .find(|(_, &c)| c - along >= params.lookahead)
            .map(|(&p, _)| p)
            .unwrap_or(last)
    };

    let bearing = wrap_angle((target.1 - pose.y).atan2(target.0 - pose.x) - pose.theta);
    let factor = if bearing.abs() <= std::f64::consts::FRAC_PI_4 {
        1.0
    } else {
        (1.0 - (bearing.abs() - std::f64::consts::FRAC_PI_4) / std::f64::consts::FRAC_PI_2)
            .max(0.1)
    };
    let v_ref = params.v_max * factor;
    let w_ref = 2.0 * v_ref * bearing.sin() / params.lookahead;
    Ok((v_ref, w_ref, false))
}

/// One step of the executive.
///
/// Tracking follows the path, with speed additionally capped by the
/// velocity law when perception is available; collision probability above
/// `override_on` hands control to the reactive laws, which release back to
/// Tracking only after holding below `override_off` for `override_hold`
/// seconds. Commanded speed below `stuck_speed` for `stuck_time` triggers a
/// rotate recovery that spins until the front clears. Reaching the final
/// waypoint within `goal_tolerance` is terminal.
pub fn executive_step(
    state: &ControlState,
    pose: &Pose2D,
    perception: Option<&PerceptionOutput>,
    waypoints: &[(f64, f64)],
    params: &ControlParams,
    t: f64,
) -> (ControlCommand, ControlState) {
    let mut next = *state;
    let halt = ControlCommand { v: 0.0, w: 0.0 };

    if next.mode == Mode::Done {
        return (halt, next);
    }
    if let Some(&(gx, gy)) = waypoints.last() {
        if (pose.x - gx).hypot(pose.y - gy) <= params.goal_tolerance {
            next.mode = Mode::Done;
            next.mode_entered_at = t;
            return (halt, next);
        }
    }

    // The filters run every non-terminal step perception is available, so
    // their state is continuous across mode changes.
    let filtered = perception.map(|p| {
        let p_t = p.p_t.clamp(0.0, 1.0);
        let s_k = p.s_k.clamp(-1.0, 1.0);
        let v_k = lpf_velocity(&mut next, p_t, params).expect("clamped p_t");
        let theta_k = lpf_steering(&mut next, s_k, params).expect("clamped s_k");
        (p_t, v_k, theta_k)
    });

    // Mode transitions, evaluated before the command is computed.
    match next.mode {
        Mode::Tracking => {
            if let Some((p_t, _, _)) = filtered {
                if p_t > params.override_on {
                    next.mode = Mode::Reactive;
                    next.mode_entered_at = t;
                    next.below_off_since = None;
                }
            }
        }
        Mode::Reactive => {
            if let Some((p_t, _, _)) = filtered {
                if p_t < params.override_off {
                    let since = *next.below_off_since.get_or_insert(t);
                    if t - since >= params.override_hold {
                        next.mode = Mode::Tracking;
                        next.mode_entered_at = t;
                        next.below_off_since = None;
                    }
                } else {
                    next.below_off_since = None;
                }
            }
        }
        Mode::Recovery => {
            let clear = filtered.is_none_or(|(p_t, _, _)| p_t == 0.0);
            if clear {
                next.mode = Mode::Tracking;
                next.mode_entered_at = t;
            }
        }
        Mode::Done => unreachable!(),
    }
    if next.mode != Mode::Recovery {
        let stuck = next
            .slow_since
            .is_some_and(|s| t - s >= params.stuck_time);
        if stuck {
            next.mode = Mode::Recovery;
            next.mode_entered_at = t;
            next.slow_since = None;
        }
    }

    let cmd = match next.mode {
        Mode::Tracking => {
            let (v_ref, w_ref, reached) =
                pure_pursuit(pose, waypoints, params).unwrap_or((0.0, 0.0, false));
            if reached {
                next.mode = Mode::Done;
                next.mode_entered_at = t;
                halt
            } else {
                let v = match filtered {
                    Some((_, v_k, _)) => v_ref.min(v_k),
                    None => v_ref,
                };
                ControlCommand {
                    v,
                    w: w_ref.clamp(-params.w_max, params.w_max),
                }
            }
        }
        Mode::Reactive => {
            let (_, v_k, theta_k) = filtered.expect("reactive mode requires perception");
            ControlCommand {
                v: v_k,
                w: theta_k.clamp(-params.w_max, params.w_max),
            }
        }
        Mode::Recovery => ControlCommand {
            v: 0.0,
            w: params.recovery_spin,
        },
        Mode::Done => halt,
    };

    // Stuck bookkeeping over the commanded speed.
    if matches!(next.mode, Mode::Tracking | Mode::Reactive) {
        if cmd.v.abs() < params.stuck_speed {
            next.slow_since.get_or_insert(t);
        } else {
            next.slow_since = None;
        }
    }

    (cmd, next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn perception(p_t: f64, s_k: f64) -> PerceptionOutput {
        PerceptionOutput::new(p_t, s_k, 0.0).unwrap()
    }

    #[test]
    fn velocity_law_fixed_points() {
        let params = ControlParams::retuned();
        let mut state = ControlState::new();
        assert_eq!(lpf_velocity(&mut state, 1.0, &params).unwrap(), 0.0);

        let mut state = ControlState::new();
        state.v_prev = params.v_max;
        let v = lpf_velocity(&mut state, 0.0, &params).unwrap();
        assert!((v - params.v_max).abs() < 1e-15);
    }

    #[test]
    fn velocity_law_substitution() {
        let params = ControlParams::retuned(); // alpha = 0.3, v_max = 0.5
        let mut state = ControlState::new();
        let v = lpf_velocity(&mut state, 0.0, &params).unwrap();
        assert!((v - 0.15).abs() < 1e-15);
        assert_eq!(state.v_prev, v);
    }

    #[test]
    fn velocity_law_rejects_bad_p_t() {
        let params = ControlParams::retuned();
        let mut state = ControlState::new();
        assert!(matches!(
            lpf_velocity(&mut state, 1.5, &params),
            Err(Error::Contract(_))
        ));
        assert!(matches!(
            lpf_velocity(&mut state, f64::NAN, &params),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn steering_law_substitution() {
        let params = ControlParams::retuned(); // beta = 0.5
        let mut state = ControlState::new();
        assert_eq!(lpf_steering(&mut state, 0.0, &params).unwrap(), 0.0);

        let mut state = ControlState::new();
        state.theta_prev = 0.2;
        let theta = lpf_steering(&mut state, -1.0, &params).unwrap();
        let expect = 0.1 - std::f64::consts::FRAC_PI_4;
        assert!((theta - expect).abs() < 1e-12);
        assert!((theta + 0.68540).abs() < 1e-5);
    }

    #[test]
    fn steering_law_converges_geometrically() {
        let params = ControlParams::retuned();
        let mut state = ControlState::new();
        let target = std::f64::consts::FRAC_PI_2;
        let mut prev_gap = target;
        for _ in 0..30 {
            lpf_steering(&mut state, 1.0, &params).unwrap();
            let gap = target - state.theta_prev;
            assert!((gap - prev_gap * (1.0 - params.beta)).abs() < 1e-12);
            prev_gap = gap;
        }
    }

    #[test]
    fn step_response_is_exact() {
        for alpha in [0.3, 0.7] {
            let params = ControlParams {
                alpha,
                ..ControlParams::retuned()
            };
            let mut state = ControlState::new();
            for k in 1..=50 {
                let v = lpf_velocity(&mut state, 0.0, &params).unwrap();
                let expect = params.v_max * (1.0 - (1.0 - alpha).powi(k));
                assert!(
                    (v - expect).abs() < 1e-12,
                    "alpha {alpha} k {k}: {v} vs {expect}"
                );
            }
        }
    }

    #[test]
    fn bounds_closed_under_iteration() {
        let params = ControlParams::retuned();
        let mut state = ControlState::new();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10_000 {
            let v = lpf_velocity(&mut state, rng.random_range(0.0..=1.0), &params).unwrap();
            let th = lpf_steering(&mut state, rng.random_range(-1.0..=1.0), &params).unwrap();
            assert!((0.0..=params.v_max).contains(&v));
            assert!(th.abs() <= std::f64::consts::FRAC_PI_2);
        }
    }

    #[test]
    fn velocity_monotone_in_p_t() {
        let params = ControlParams::retuned();
        let mut prev = f64::INFINITY;
        for k in 0..=10 {
            let mut state = ControlState::new();
            state.v_prev = 0.3;
            let v = lpf_velocity(&mut state, k as f64 / 10.0, &params).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn pure_pursuit_aligned_straight_path() {
        let params = ControlParams::retuned();
        let path: Vec<(f64, f64)> = (0..20).map(|i| (i as f64 * 0.1, 0.0)).collect();
        let (v, w, reached) =
            pure_pursuit(&Pose2D::new(0.0, 0.0, 0.0), &path, &params).unwrap();
        assert!(!reached);
        assert_eq!(v, params.v_max);
        assert!(w.abs() < 1e-9);
    }

    #[test]
    fn pure_pursuit_goal_tolerance() {
        let params = ControlParams::retuned();
        let path = vec![(0.0, 0.0), (1.0, 0.0)];
        let (v, _, reached) =
            pure_pursuit(&Pose2D::new(0.95, 0.05, 1.0), &path, &params).unwrap();
        assert!(reached);
        assert_eq!(v, 0.0);
    }

    #[test]
    fn pure_pursuit_lateral_target() {
        let params = ControlParams::retuned();
        // Target directly to the robot's left.
        let path = vec![(0.0, 1.0)];
        let (v, w, _) = pure_pursuit(&Pose2D::new(0.0, 0.0, 0.0), &path, &params).unwrap();
        assert!((w - 2.0 * v / params.lookahead).abs() < 1e-12);
    }

    #[test]
    fn pure_pursuit_requires_waypoints() {
        let params = ControlParams::retuned();
        assert!(matches!(
            pure_pursuit(&Pose2D::new(0.0, 0.0, 0.0), &[], &params),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn executive_terminal_at_goal() {
        let params = ControlParams::retuned();
        let state = ControlState::new();
        let path = vec![(0.0, 0.0), (1.0, 0.0)];
        let (cmd, next) = executive_step(
            &state,
            &Pose2D::new(0.99, 0.0, 0.0),
            None,
            &path,
            &params,
            0.0,
        );
        assert_eq!(next.mode, Mode::Done);
        assert_eq!(cmd, ControlCommand { v: 0.0, w: 0.0 });
        // Done is absorbing.
        let (cmd2, next2) = executive_step(
            &next,
            &Pose2D::new(0.0, 0.0, 0.0),
            None,
            &path,
            &params,
            1.0,
        );
        assert_eq!(next2.mode, Mode::Done);
        assert_eq!(cmd2, ControlCommand { v: 0.0, w: 0.0 });
    }

    #[test]
    fn executive_enters_reactive_above_threshold() {
        let params = ControlParams::retuned();
        let state = ControlState::new();
        let path = vec![(0.0, 0.0), (5.0, 0.0)];
        let p = perception(0.9, 0.0);
        let (_, next) = executive_step(
            &state,
            &Pose2D::new(0.5, 0.0, 0.0),
            Some(&p),
            &path,
            &params,
            0.0,
        );
        assert_eq!(next.mode, Mode::Reactive);
    }

    #[test]
    fn executive_hysteresis_release() {
        let params = ControlParams::retuned();
        let path = vec![(0.0, 0.0), (5.0, 0.0)];
        let pose = Pose2D::new(0.5, 0.0, 0.0);
        let mut state = ControlState::new();
        let mut t = 0.0;
        let dt = 0.1;

        let high = perception(0.9, 0.0);
        let (_, s) = executive_step(&state, &pose, Some(&high), &path, &params, t);
        state = s;
        assert_eq!(state.mode, Mode::Reactive);

        // Below override_off continuously for override_hold releases.
        let low = perception(0.2, 0.0);
        let mut released_at = None;
        for _ in 0..20 {
            t += dt;
            let (_, s) = executive_step(&state, &pose, Some(&low), &path, &params, t);
            state = s;
            if state.mode == Mode::Tracking {
                released_at = Some(t);
                break;
            }
        }
        let released = released_at.expect("executive should release to Tracking");
        assert!(released >= params.override_hold, "released at {released}");
    }

    #[test]
    fn executive_reactive_brakes_geometrically() {
        let params = ControlParams::retuned();
        let path = vec![(0.0, 0.0), (5.0, 0.0)];
        let pose = Pose2D::new(0.5, 0.0, 0.0);
        let mut state = ControlState::new();
        state.v_prev = params.v_max;
        let full = perception(1.0, 0.0);
        let mut prev = params.v_max;
        let mut t = 0.0;
        for _ in 0..10 {
            let (cmd, s) = executive_step(&state, &pose, Some(&full), &path, &params, t);
            state = s;
            t += 0.05;
            if state.mode == Mode::Reactive {
                assert!((cmd.v - prev * (1.0 - params.alpha)).abs() < 1e-12);
                prev = cmd.v;
            }
        }
        assert!(prev < 0.02);
    }

    #[test]
    fn no_chattering_between_thresholds() {
        let params = ControlParams::retuned();
        let path = vec![(0.0, 0.0), (5.0, 0.0)];
        let pose = Pose2D::new(0.5, 0.0, 0.0);

        // Oscillating strictly between override_off and override_on must
        // produce zero transitions from either starting mode.
        for start_reactive in [false, true] {
            let mut state = ControlState::new();
            let mut t = 0.0;
            if start_reactive {
                let (_, s) =
                    executive_step(&state, &pose, Some(&perception(0.95, 0.0)), &path, &params, t);
                state = s;
                assert_eq!(state.mode, Mode::Reactive);
            }
            let start_mode = state.mode;
            let mut transitions = 0;
            for k in 0..100 {
                t += 0.05;
                let p_t = if k % 2 == 0 { 0.45 } else { 0.65 };
                let (_, s) =
                    executive_step(&state, &pose, Some(&perception(p_t, 0.0)), &path, &params, t);
                if s.mode != state.mode {
                    transitions += 1;
                }
                state = s;
            }
            assert_eq!(transitions, 0, "started in {start_mode:?}");
        }
    }

    #[test]
    fn stuck_triggers_recovery_and_clears() {
        let params = ControlParams::retuned();
        let path = vec![(0.0, 0.0), (5.0, 0.0)];
        let pose = Pose2D::new(0.5, 0.0, 0.0);
        let mut state = ControlState::new();
        let mut t = 0.0;
        // Permanent full-brake perception forces commanded v -> 0.
        let blocked = perception(1.0, 0.0);
        let (_, s) = executive_step(&state, &pose, Some(&blocked), &path, &params, t);
        state = s;
        let mut entered_recovery = false;
        for _ in 0..200 {
            t += 0.05;
            let (cmd, s) = executive_step(&state, &pose, Some(&blocked), &path, &params, t);
            state = s;
            if state.mode == Mode::Recovery {
                entered_recovery = true;
                assert_eq!(cmd.v, 0.0);
                assert_eq!(cmd.w, params.recovery_spin);
                break;
            }
        }
        assert!(entered_recovery);

        // Clear front: recovery hands back to tracking.
        t += 0.05;
        let clear = perception(0.0, 0.0);
        let (_, s) = executive_step(&state, &pose, Some(&clear), &path, &params, t);
        assert_eq!(s.mode, Mode::Tracking);
    }
}
