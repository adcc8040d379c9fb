//! Differential-drive kinematics: wheel-rate/body-twist conversions, exact
//! constant-twist pose integration, and an odometry noise model.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Angular-rate threshold below which integration switches to the
/// straight-line (midpoint) limit.
pub const TWIST_EPSILON: f64 = 1e-6;

/// Normalize an angle to (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let mut r = a % std::f64::consts::TAU;
    if r <= -std::f64::consts::PI {
        r += std::f64::consts::TAU;
    } else if r > std::f64::consts::PI {
        r -= std::f64::consts::TAU;
    }
    r
}

/// Physical robot parameters.
///
/// `wheel_radius` and `wheel_base` are the R and L of the drive model;
/// `footprint_radius` is the disc used for collision checks, and
/// `v_max`/`w_max` bound commanded twists.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RobotParams {
    pub wheel_radius: f64,
    pub wheel_base: f64,
    pub footprint_radius: f64,
    pub v_max: f64,
    pub w_max: f64,
}

impl RobotParams {
    pub fn validate(&self) -> crate::Result<()> {
        let fields = [
            ("wheel_radius", self.wheel_radius),
            ("wheel_base", self.wheel_base),
            ("footprint_radius", self.footprint_radius),
            ("v_max", self.v_max),
            ("w_max", self.w_max),
        ];
        for (name, v) in fields {
            if !(v > 0.0) || !v.is_finite() {
                return Err(crate::Error::Validation(format!(
                    "robot.{name} must be strictly positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Planar pose (x, y, theta) with theta normalized to (-pi, pi].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Pose2D {
            x,
            y,
            theta: wrap_angle(theta),
        }
    }

    pub fn position(&self) -> (f64, f64) {
        (self.x, self.y)
    }

    pub fn distance_to(&self, other: &Pose2D) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Increment from `self` to `next`, expressed in the frame of `self`
    /// (x forward, y left, theta change wrapped).
    pub fn delta_to(&self, next: &Pose2D) -> Pose2D {
        let dx = next.x - self.x;
        let dy = next.y - self.y;
        let (s, c) = self.theta.sin_cos();
        Pose2D {
            x: c * dx + s * dy,
            y: -s * dx + c * dy,
            theta: wrap_angle(next.theta - self.theta),
        }
    }

    /// Apply an increment expressed in the frame of `self`.
    pub fn apply_delta(&self, delta: &Pose2D) -> Pose2D {
        let (s, c) = self.theta.sin_cos();
        Pose2D {
            x: self.x + c * delta.x - s * delta.y,
            y: self.y + s * delta.x + c * delta.y,
            theta: wrap_angle(self.theta + delta.theta),
        }
    }
}

/// Wheel angular rates (rad/s), right and left.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WheelRates {
    pub v_r: f64,
    pub v_l: f64,
}

/// Planar body velocity: forward speed v (m/s) and yaw rate w (rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Twist2D {
    pub v: f64,
    pub w: f64,
}

/// Forward model: v = (R/2)(v_r + v_l), w = (R/L)(v_r - v_l).
pub fn body_twist_from_wheels(rates: WheelRates, params: &RobotParams) -> Twist2D {
    let r = params.wheel_radius;
    Twist2D {
        v: r / 2.0 * (rates.v_r + rates.v_l),
        w: r / params.wheel_base * (rates.v_r - rates.v_l),
    }
}

/// Exact inverse of [`body_twist_from_wheels`]:
/// v_r = (2v + wL)/(2R), v_l = (2v - wL)/(2R).
pub fn wheels_from_body_twist(twist: Twist2D, params: &RobotParams) -> WheelRates {
    let r = params.wheel_radius;
    let l = params.wheel_base;
    WheelRates {
        v_r: (2.0 * twist.v + twist.w * l) / (2.0 * r),
        v_l: (2.0 * twist.v - twist.w * l) / (2.0 * r),
    }
}

/// Integrate a constant twist over `dt` seconds along the exact circular arc.
///
/// Below [`TWIST_EPSILON`] yaw rate the arc is replaced by the midpoint
/// straight-line limit, which matches the arc to O(w^2 dt^3) and keeps the
/// branch switch continuous.
pub fn integrate_pose(pose: &Pose2D, twist: &Twist2D, dt: f64) -> Pose2D {
    let Twist2D { v, w } = *twist;
    if w.abs() >= TWIST_EPSILON {
        let theta1 = pose.theta + w * dt;
        Pose2D {
            x: pose.x + v / w * (theta1.sin() - pose.theta.sin()),
            y: pose.y - v / w * (theta1.cos() - pose.theta.cos()),
            theta: wrap_angle(theta1),
        }
    } else {
        let mid = pose.theta + w * dt / 2.0;
        Pose2D {
            x: pose.x + v * dt * mid.cos(),
            y: pose.y + v * dt * mid.sin(),
            theta: wrap_angle(pose.theta + w * dt),
        }
    }
}

/// Standard deviations for the (rot1, trans, rot2) odometry decomposition.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct OdometryNoise {
    pub sigma_rot1: f64,
    pub sigma_trans: f64,
    pub sigma_rot2: f64,
}

impl OdometryNoise {
    pub fn new(sigma_rot1: f64, sigma_trans: f64, sigma_rot2: f64) -> Self {
        OdometryNoise {
            sigma_rot1,
            sigma_trans,
            sigma_rot2,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.sigma_rot1 == 0.0 && self.sigma_trans == 0.0 && self.sigma_rot2 == 0.0
    }
}

/// Decompose a frame-local increment into (rot1, trans, rot2).
///
/// rot1 is the heading turn toward the translation direction, trans the
/// straight-line distance, rot2 the residual turn. Near-zero translations
/// keep rot1 = 0 so the decomposition stays stable.
pub fn decompose_increment(delta: &Pose2D) -> (f64, f64, f64) {
    let trans = delta.x.hypot(delta.y);
    let rot1 = if trans < 1e-12 {
        0.0
    } else {
        delta.y.atan2(delta.x)
    };
    let rot2 = wrap_angle(delta.theta - rot1);
    (rot1, trans, rot2)
}

/// Recompose (rot1, trans, rot2) into a frame-local increment.
pub fn compose_increment(rot1: f64, trans: f64, rot2: f64) -> Pose2D {
    Pose2D {
        x: trans * rot1.cos(),
        y: trans * rot1.sin(),
        theta: wrap_angle(rot1 + rot2),
    }
}

/// Perturb a true pose increment with Gaussian noise on its
/// (rot1, trans, rot2) decomposition. Zero sigmas return the input exactly.
pub fn noisy_odometry<R: Rng>(true_delta: &Pose2D, noise: &OdometryNoise, rng: &mut R) -> Pose2D {
    if noise.is_zero() {
        return *true_delta;
    }
    let (rot1, trans, rot2) = decompose_increment(true_delta);
    let sample = |sigma: f64, rng: &mut R| -> f64 {
        if sigma > 0.0 {
            Normal::new(0.0, sigma).expect("sigma >= 0").sample(rng)
        } else {
            0.0
        }
    };
    let rot1 = rot1 + sample(noise.sigma_rot1, rng);
    let trans = trans + sample(noise.sigma_trans, rng);
    let rot2 = rot2 + sample(noise.sigma_rot2, rng);
    compose_increment(rot1, trans, rot2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params() -> RobotParams {
        RobotParams {
            wheel_radius: 0.05,
            wheel_base: 0.2,
            footprint_radius: 0.15,
            v_max: 0.5,
            w_max: 1.5,
        }
    }

    #[test]
    fn symmetric_wheels_drive_straight() {
        let t = body_twist_from_wheels(WheelRates { v_r: 1.0, v_l: 1.0 }, &params());
        assert_eq!(t.v, 0.05);
        assert_eq!(t.w, 0.0);
    }

    #[test]
    fn antisymmetric_wheels_spin_in_place() {
        let t = body_twist_from_wheels(WheelRates { v_r: 0.7, v_l: -0.7 }, &params());
        assert_eq!(t.v, 0.0);
        assert!(t.w > 0.0);
    }

    #[test]
    fn forward_model_matches_substitution() {
        let t = body_twist_from_wheels(WheelRates { v_r: 2.0, v_l: 1.0 }, &params());
        assert!((t.v - 0.075).abs() < 1e-15);
        assert!((t.w - 0.25).abs() < 1e-15);
    }

    #[test]
    fn inverse_model_matches_substitution() {
        let rates = wheels_from_body_twist(Twist2D { v: 0.075, w: 0.25 }, &params());
        assert!((rates.v_r - 2.0).abs() < 1e-12);
        assert!((rates.v_l - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_twist_zero_wheels() {
        let rates = wheels_from_body_twist(Twist2D { v: 0.0, w: 0.0 }, &params());
        assert_eq!(rates.v_r, 0.0);
        assert_eq!(rates.v_l, 0.0);
    }

    #[test]
    fn integrate_straight_line() {
        let p = integrate_pose(
            &Pose2D::new(0.0, 0.0, 0.0),
            &Twist2D { v: 1.0, w: 0.0 },
            1.0,
        );
        assert!((p.x - 1.0).abs() < 1e-15);
        assert!(p.y.abs() < 1e-15);
        assert_eq!(p.theta, 0.0);
    }

    #[test]
    fn integrate_quarter_arc() {
        let w = std::f64::consts::FRAC_PI_2;
        let p = integrate_pose(&Pose2D::new(0.0, 0.0, 0.0), &Twist2D { v: 1.0, w }, 1.0);
        let expect = 2.0 / std::f64::consts::PI;
        assert!((p.x - expect).abs() < 1e-12, "x = {}", p.x);
        assert!((p.y - expect).abs() < 1e-12, "y = {}", p.y);
        assert!((p.theta - w).abs() < 1e-12);
    }

    #[test]
    fn integrate_pure_spin_keeps_position() {
        let p = integrate_pose(
            &Pose2D::new(1.0, 2.0, 0.3),
            &Twist2D { v: 0.0, w: 0.8 },
            0.5,
        );
        assert_eq!(p.x, 1.0);
        assert_eq!(p.y, 2.0);
        assert!((p.theta - 0.7).abs() < 1e-12);
    }

    #[test]
    fn integration_continuous_across_epsilon() {
        // At the same w near the switch point, the exact-arc formula and the
        // straight-line limit must agree tightly, whichever branch
        // integrate_pose picked.
        let exact_arc = |pose: &Pose2D, v: f64, w: f64, dt: f64| {
            let theta1 = pose.theta + w * dt;
            Pose2D {
                x: pose.x + v / w * (theta1.sin() - pose.theta.sin()),
                y: pose.y - v / w * (theta1.cos() - pose.theta.cos()),
                theta: wrap_angle(theta1),
            }
        };
        let pose = Pose2D::new(0.0, 0.0, 0.4);
        for &v in &[0.1, 0.5, 1.0] {
            for &w in &[TWIST_EPSILON * 0.9, TWIST_EPSILON, TWIST_EPSILON * 1.1] {
                for dt in [0.05, 1.0] {
                    let picked = integrate_pose(&pose, &Twist2D { v, w }, dt);
                    let arc = exact_arc(&pose, v, w, dt);
                    assert!((picked.x - arc.x).abs() < 1e-9);
                    assert!((picked.y - arc.y).abs() < 1e-9);
                    assert!((picked.theta - arc.theta).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn arc_composition_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let pose = Pose2D::new(
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-3.0..3.0),
            );
            let twist = Twist2D {
                v: rng.random_range(-1.0..1.0),
                w: rng.random_range(-1.5..1.5),
            };
            let dt = rng.random_range(0.01..0.5);
            let two_steps = integrate_pose(&integrate_pose(&pose, &twist, dt), &twist, dt);
            let one_step = integrate_pose(&pose, &twist, 2.0 * dt);
            assert!((two_steps.x - one_step.x).abs() < 1e-9);
            assert!((two_steps.y - one_step.y).abs() < 1e-9);
            assert!(wrap_angle(two_steps.theta - one_step.theta).abs() < 1e-9);
        }
    }

    #[test]
    fn noisy_odometry_zero_sigma_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let delta = Pose2D::new(0.3, -0.1, 0.2);
        let out = noisy_odometry(&delta, &OdometryNoise::default(), &mut rng);
        assert_eq!(out, delta);

        let zero = Pose2D::new(0.0, 0.0, 0.0);
        assert_eq!(noisy_odometry(&zero, &OdometryNoise::default(), &mut rng), zero);
    }

    #[test]
    fn noisy_odometry_is_reproducible() {
        let noise = OdometryNoise::new(0.0, 0.01, 0.0);
        let delta = Pose2D::new(0.5, 0.0, 0.1);
        let a = noisy_odometry(&delta, &noise, &mut ChaCha8Rng::seed_from_u64(42));
        let b = noisy_odometry(&delta, &noise, &mut ChaCha8Rng::seed_from_u64(42));
        assert_eq!(a, b);
    }

    #[test]
    fn delta_roundtrip() {
        let a = Pose2D::new(1.0, 2.0, 0.7);
        let b = Pose2D::new(1.4, 1.8, -0.3);
        let d = a.delta_to(&b);
        let back = a.apply_delta(&d);
        assert!((back.x - b.x).abs() < 1e-12);
        assert!((back.y - b.y).abs() < 1e-12);
        assert!(wrap_angle(back.theta - b.theta).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn wheel_conversions_are_mutual_inverses(
            v_r in -10.0f64..10.0,
            v_l in -10.0f64..10.0,
        ) {
            let p = params();
            let twist = body_twist_from_wheels(WheelRates { v_r, v_l }, &p);
            let back = wheels_from_body_twist(twist, &p);
            prop_assert!((back.v_r - v_r).abs() < 1e-12);
            prop_assert!((back.v_l - v_l).abs() < 1e-12);
        }

        #[test]
        fn forward_model_is_linear(
            a in -5.0f64..5.0,
            b in -5.0f64..5.0,
            c in -5.0f64..5.0,
            d in -5.0f64..5.0,
            k in -3.0f64..3.0,
        ) {
            let p = params();
            let t1 = body_twist_from_wheels(WheelRates { v_r: a, v_l: b }, &p);
            let t2 = body_twist_from_wheels(WheelRates { v_r: c, v_l: d }, &p);
            let sum = body_twist_from_wheels(
                WheelRates { v_r: a + k * c, v_l: b + k * d },
                &p,
            );
            prop_assert!((sum.v - (t1.v + k * t2.v)).abs() < 1e-9);
            prop_assert!((sum.w - (t1.w + k * t2.w)).abs() < 1e-9);
        }
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(std::f64::consts::PI), std::f64::consts::PI);
        assert!((wrap_angle(-std::f64::consts::PI) - std::f64::consts::PI).abs() < 1e-15);
        assert!((wrap_angle(3.0 * std::f64::consts::PI) - std::f64::consts::PI).abs() < 1e-12);
        assert!(wrap_angle(7.0).abs() <= std::f64::consts::PI);
    }
}
