//! Monte Carlo localization against a stored map: particle prediction with
//! the (rot1, trans, rot2) odometry noise model, likelihood-field
//! measurement weighting, and low-variance systematic resampling.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::kinematics::{noisy_odometry, wrap_angle, OdometryNoise, Pose2D};
use crate::mapping::{
    distance_transform, CellState, OccupancyGrid, DEFAULT_FREE_THRESH, DEFAULT_OCCUPIED_THRESH,
};
use crate::world::LaserScan;
use crate::{Error, Result};

/// One pose hypothesis.
#[derive(Debug, Clone, Copy)]
pub struct Particle {
    pub pose: Pose2D,
    pub weight: f64,
}

/// Fixed-size set of weighted hypotheses. `normalized` records whether the
/// weights currently sum to one.
#[derive(Debug, Clone)]
pub struct ParticleSet {
    pub particles: Vec<Particle>,
    pub normalized: bool,
}

impl ParticleSet {
    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    fn set_uniform_weights(&mut self) {
        let w = 1.0 / self.len() as f64;
        for p in &mut self.particles {
            p.weight = w;
        }
        self.normalized = true;
    }
}

/// Pose estimate with a 3x3 covariance over (x, y, theta); angular
/// residuals are wrapped.
#[derive(Debug, Clone, Copy)]
pub struct PoseEstimate {
    pub mean: Pose2D,
    pub covariance: [[f64; 3]; 3],
}

/// Initial particle distribution.
#[derive(Debug, Clone)]
pub enum Prior {
    /// Uniform over the map's free cells with uniform heading.
    Uniform,
    /// Gaussian around a pose with (x, y, theta) sigmas.
    Gaussian { pose: Pose2D, sigmas: [f64; 3] },
}

/// Precomputed distance-to-nearest-occupied field for a map.
#[derive(Debug, Clone)]
pub struct LikelihoodField {
    width: usize,
    height: usize,
    resolution: f64,
    origin: Pose2D,
    dist_m: Vec<f64>,
}

impl LikelihoodField {
    pub fn from_grid(grid: &OccupancyGrid) -> Self {
        let dist = distance_transform(grid.width(), grid.height(), |ix, iy| {
            grid.classify(ix, iy, DEFAULT_OCCUPIED_THRESH, DEFAULT_FREE_THRESH)
                == CellState::Occupied
        });
        LikelihoodField {
            width: grid.width(),
            height: grid.height(),
            resolution: grid.resolution(),
            origin: grid.origin(),
            dist_m: dist.into_iter().map(|d| d * grid.resolution()).collect(),
        }
    }

    /// Distance in meters from a world point to the nearest occupied cell,
    /// or None outside the map.
    pub fn distance_at(&self, x: f64, y: f64) -> Option<f64> {
        let ix = ((x - self.origin.x) / self.resolution).floor() as i64;
        let iy = ((y - self.origin.y) / self.resolution).floor() as i64;
        if ix < 0 || iy < 0 || ix >= self.width as i64 || iy >= self.height as i64 {
            return None;
        }
        Some(self.dist_m[iy as usize * self.width + ix as usize])
    }
}

/// Likelihood-field beam model: z_hit N(d; 0, sigma_hit) + z_rand/max_range
/// over a decimated beam subset.
#[derive(Debug, Clone, Copy)]
pub struct SensorModel {
    pub z_hit: f64,
    pub z_rand: f64,
    pub sigma_hit: f64,
    pub decimation: usize,
}

impl Default for SensorModel {
    fn default() -> Self {
        SensorModel {
            z_hit: 0.95,
            z_rand: 0.05,
            sigma_hit: 0.1,
            decimation: 30,
        }
    }
}

/// Create `n` equally weighted particles from the prior. Uniform priors
/// sample positions only from free cells.
pub fn init_particles<R: Rng>(
    n: usize,
    map: &OccupancyGrid,
    prior: &Prior,
    rng: &mut R,
) -> Result<ParticleSet> {
    if n == 0 {
        return Err(Error::Validation("particle count must be >= 1".into()));
    }
    let mut particles = Vec::with_capacity(n);
    match prior {
        Prior::Uniform => {
            let free: Vec<(usize, usize)> = (0..map.height())
                .flat_map(|iy| (0..map.width()).map(move |ix| (ix, iy)))
                .filter(|&(ix, iy)| {
                    map.classify(ix, iy, DEFAULT_OCCUPIED_THRESH, DEFAULT_FREE_THRESH)
                        == CellState::Free
                })
                .collect();
            if free.is_empty() {
                return Err(Error::Domain("map has no free cells to sample".into()));
            }
            let res = map.resolution();
            for _ in 0..n {
                let (ix, iy) = free[rng.random_range(0..free.len())];
                let x = map.origin().x + (ix as f64 + rng.random::<f64>()) * res;
                let y = map.origin().y + (iy as f64 + rng.random::<f64>()) * res;
                let theta = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
                particles.push(Particle {
                    pose: Pose2D::new(x, y, theta),
                    weight: 1.0 / n as f64,
                });
            }
        }
        Prior::Gaussian { pose, sigmas } => {
            let draw = |sigma: f64, rng: &mut R| -> f64 {
                if sigma > 0.0 {
                    Normal::new(0.0, sigma).expect("sigma >= 0").sample(rng)
                } else {
                    0.0
                }
            };
            for _ in 0..n {
                let dx = draw(sigmas[0], rng);
                let dy = draw(sigmas[1], rng);
                let dth = draw(sigmas[2], rng);
                particles.push(Particle {
                    pose: Pose2D::new(pose.x + dx, pose.y + dy, pose.theta + dth),
                    weight: 1.0 / n as f64,
                });
            }
        }
    }
    Ok(ParticleSet {
        particles,
        normalized: true,
    })
}

/// Advance every particle by the odometry increment, perturbed per particle
/// through the (rot1, trans, rot2) noise model. Weights are unchanged.
pub fn motion_update<R: Rng>(
    set: &mut ParticleSet,
    odom_increment: &Pose2D,
    noise: &OdometryNoise,
    rng: &mut R,
) {
    for p in &mut set.particles {
        let delta = noisy_odometry(odom_increment, noise, rng);
        p.pose = p.pose.apply_delta(&delta);
    }
}

/// Reweight particles by scan likelihood and normalize.
///
/// Returns true when every weight underflowed to zero and the set was reset
/// to uniform weights (the recovery path).
pub fn measurement_update(
    set: &mut ParticleSet,
    scan: &LaserScan,
    field: &LikelihoodField,
    model: &SensorModel,
) -> bool {
    let n = scan.params.beam_count;
    let beams: Vec<usize> = if n <= model.decimation {
        (0..n).collect()
    } else {
        (0..model.decimation).map(|k| k * n / model.decimation).collect()
    };
    let gauss_coef = 1.0 / (model.sigma_hit * (2.0 * std::f64::consts::PI).sqrt());
    let rand_term = model.z_rand / scan.params.max_range;

    for p in &mut set.particles {
        let mut weight = p.weight;
        for &i in &beams {
            let angle = p.pose.theta + scan.params.bearing(i);
            let ex = p.pose.x + scan.ranges[i] * angle.cos();
            let ey = p.pose.y + scan.ranges[i] * angle.sin();
            let gauss = match field.distance_at(ex, ey) {
                Some(d) => {
                    gauss_coef * (-d * d / (2.0 * model.sigma_hit * model.sigma_hit)).exp()
                }
                None => 0.0,
            };
            weight *= model.z_hit * gauss + rand_term;
        }
        p.weight = weight;
    }

    let total: f64 = set.particles.iter().map(|p| p.weight).sum();
    if total <= 0.0 || !total.is_finite() {
        set.set_uniform_weights();
        return true;
    }
    for p in &mut set.particles {
        p.weight /= total;
    }
    set.normalized = true;
    false
}

/// Survivor indices for low-variance (systematic) resampling with stratum
/// offset `u0` in [0, 1/n).
pub fn systematic_indices(weights: &[f64], u0: f64) -> Vec<usize> {
    let n = weights.len();
    let mut out = Vec::with_capacity(n);
    let mut cum = weights[0];
    let mut i = 0usize;
    for j in 0..n {
        let p = u0 + j as f64 / n as f64;
        while p >= cum && i + 1 < n {
            i += 1;
            cum += weights[i];
        }
        out.push(i);
    }
    out
}

/// Low-variance resampling. Size is preserved and output weights are
/// uniform. The caller decides when to trigger (e.g. on low ESS).
pub fn resample<R: Rng>(set: &mut ParticleSet, rng: &mut R) -> Result<()> {
    if !set.normalized {
        return Err(Error::Contract(
            "resample requires a normalized particle set".into(),
        ));
    }
    let n = set.len();
    let u0 = rng.random::<f64>() / n as f64;
    let weights: Vec<f64> = set.particles.iter().map(|p| p.weight).collect();
    let survivors = systematic_indices(&weights, u0);
    set.particles = survivors
        .into_iter()
        .map(|i| Particle {
            pose: set.particles[i].pose,
            weight: 1.0 / n as f64,
        })
        .collect();
    set.normalized = true;
    Ok(())
}

/// Degeneracy measure 1 / sum(w^2); equals n for uniform weights.
pub fn effective_sample_size(set: &ParticleSet) -> f64 {
    let sum_sq: f64 = set.particles.iter().map(|p| p.weight * p.weight).sum();
    if sum_sq > 0.0 {
        1.0 / sum_sq
    } else {
        0.0
    }
}

/// Weighted mean pose (circular mean for theta) and covariance about it.
pub fn estimate(set: &ParticleSet) -> PoseEstimate {
    let total: f64 = set.particles.iter().map(|p| p.weight).sum();
    let inv = if total > 0.0 { 1.0 / total } else { 0.0 };

    let mut mx = 0.0;
    let mut my = 0.0;
    let mut sin_sum = 0.0;
    let mut cos_sum = 0.0;
    for p in &set.particles {
        let w = p.weight * inv;
        mx += w * p.pose.x;
        my += w * p.pose.y;
        sin_sum += w * p.pose.theta.sin();
        cos_sum += w * p.pose.theta.cos();
    }
    let mtheta = sin_sum.atan2(cos_sum);

    let mut cov = [[0.0f64; 3]; 3];
    for p in &set.particles {
        let w = p.weight * inv;
        let r = [
            p.pose.x - mx,
            p.pose.y - my,
            wrap_angle(p.pose.theta - mtheta),
        ];
        for (i, ri) in r.iter().enumerate() {
            for (j, rj) in r.iter().enumerate() {
                cov[i][j] += w * ri * rj;
            }
        }
    }

    PoseEstimate {
        mean: Pose2D::new(mx, my, mtheta),
        covariance: cov,
    }
}
