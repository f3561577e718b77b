//! Constant-input braking maneuvers on a planar bicycle model.
//!
//! [`simulate_kinematic`] integrates the no-slip kinematic bicycle with RK4
//! until the speed reaches zero, [`analytic_arc_oracle`] gives the closed-form
//! end pose of the same model, and [`simulate_dynamic_surrogate`] adds friction
//! saturation and capture noise as a synthetic stand-in for measured data.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

pub const STANDARD_GRAVITY: f64 = 9.81;
pub const DEFAULT_STEP: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid vehicle `{0}`: wheelbase and normal forces must be positive")]
    InvalidVehicle(String),
    #[error("invalid maneuver: {0}")]
    InvalidInput(&'static str),
    #[error("acceleration {0} is not braking; the maneuver never stops")]
    NonBraking(f64),
    #[error("friction coefficient must be positive, got {0}")]
    InvalidFriction(f64),
    #[error("integration step must be positive and finite, got {0}")]
    InvalidStep(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct VehicleSpec {
    pub name: String,
    /// Distance between axles, m.
    pub wheelbase: f64,
    /// Static normal force on the front wheels, N.
    pub front_normal: f64,
    /// Static normal force on the rear wheels, N.
    pub rear_normal: f64,
}

impl VehicleSpec {
    pub fn new(name: impl Into<String>, wheelbase: f64, front_normal: f64, rear_normal: f64) -> Result<Self, SimError> {
        let name = name.into();
        let ok = |x: f64| x.is_finite() && x > 0.0;
        if name.is_empty() || !ok(wheelbase) || !ok(front_normal) || !ok(rear_normal) {
            return Err(SimError::InvalidVehicle(name));
        }
        Ok(Self {
            name,
            wheelbase,
            front_normal,
            rear_normal,
        })
    }

    /// Modified 1:10 platform.
    pub fn small() -> Self {
        Self::new("small", 0.345, 37.77, 28.84).unwrap()
    }

    /// 1:10 platform with a stretched chassis.
    pub fn long() -> Self {
        Self::new("long", 0.853, 22.74, 52.89).unwrap()
    }

    /// 1:5 platform.
    pub fn large() -> Self {
        Self::new("large", 0.475, 71.12, 71.12).unwrap()
    }

    /// Default registry: small, long, large.
    pub fn registry() -> Vec<Self> {
        vec![Self::small(), Self::long(), Self::large()]
    }

    /// Share of the weight carried by the braked rear axle.
    pub fn rear_share(&self) -> f64 {
        self.rear_normal / (self.front_normal + self.rear_normal)
    }
}

/// Initial speed and constant controls of one maneuver. `a` is signed, so
/// braking is negative. `mu` is only read by the surrogate; kinematic records
/// carry 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ManeuverInput {
    pub v_i: f64,
    pub a: f64,
    pub delta: f64,
    pub mu: f64,
    pub g: f64,
}

impl ManeuverInput {
    pub fn kinematic(v_i: f64, a: f64, delta: f64) -> Self {
        Self {
            v_i,
            a,
            delta,
            mu: 0.0,
            g: STANDARD_GRAVITY,
        }
    }

    pub fn with_friction(mut self, mu: f64) -> Self {
        self.mu = mu;
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.v_i.is_finite() && self.v_i > 0.0) {
            return Err(SimError::InvalidInput("initial speed must be positive"));
        }
        if !(self.delta.is_finite() && self.delta.abs() < std::f64::consts::FRAC_PI_2) {
            return Err(SimError::InvalidInput("steering angle must satisfy |delta| < pi/2"));
        }
        if !(self.g.is_finite() && self.g > 0.0) {
            return Err(SimError::InvalidInput("gravity must be positive"));
        }
        if !self.a.is_finite() {
            return Err(SimError::InvalidInput("acceleration must be finite"));
        }
        if self.a >= 0.0 {
            return Err(SimError::NonBraking(self.a));
        }
        Ok(())
    }

    /// Distance travelled until stop under constant deceleration.
    pub fn stopping_distance(&self) -> f64 {
        self.v_i * self.v_i / (2.0 * self.a.abs())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FinalPose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl FinalPose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.x, self.y, self.theta]
    }

    pub fn from_array(v: [f64; 3]) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    pub fn max_abs_diff(&self, other: &FinalPose) -> f64 {
        (self.x - other.x)
            .abs()
            .max((self.y - other.y).abs())
            .max((self.theta - other.theta).abs())
    }
}

/// End state of an integrated maneuver.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StopState {
    pub pose: FinalPose,
    /// Speed after the terminating partial step; zero up to rounding.
    pub speed: f64,
    pub time: f64,
    pub steps: usize,
}

type State = [f64; 4];

fn rk4_step<F: Fn(&State) -> State>(f: &F, s: &State, h: f64) -> State {
    let add = |s: &State, k: &State, c: f64| -> State { [s[0] + c * k[0], s[1] + c * k[1], s[2] + c * k[2], s[3] + c * k[3]] };
    let k1 = f(s);
    let k2 = f(&add(s, &k1, h / 2.0));
    let k3 = f(&add(s, &k2, h / 2.0));
    let k4 = f(&add(s, &k3, h));
    let mut out = *s;
    for i in 0..4 {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// Integrates `[X, Y, θ, v]' = [v cos θ, v sin θ, yaw_rate(v), accel]` from
/// rest pose at speed `v0` until `v` crosses zero. The crossing time inside
/// the last step is found by linear interpolation of `v`, and the step is
/// redone to that time.
fn integrate_until_stop<W: Fn(f64) -> f64>(v0: f64, accel: f64, yaw_rate: W, step: f64) -> StopState {
    let f = |s: &State| -> State {
        let v = s[3];
        [v * s[2].cos(), v * s[2].sin(), yaw_rate(v), accel]
    };
    let mut s: State = [0.0, 0.0, 0.0, v0];
    let mut t = 0.0;
    let mut steps = 0;
    loop {
        let next = rk4_step(&f, &s, step);
        steps += 1;
        if next[3] > 0.0 {
            s = next;
            t += step;
            continue;
        }
        let mut tau = step * s[3] / (s[3] - next[3]);
        let mut last = rk4_step(&f, &s, tau);
        // rounding may leave a residual positive speed of a few ulps
        while last[3] > 0.0 {
            tau = tau.next_up();
            last = rk4_step(&f, &s, tau);
        }
        return StopState {
            pose: FinalPose::new(last[0], last[1], last[2]),
            speed: last[3],
            time: t + tau,
            steps,
        };
    }
}

fn check_step(step: f64) -> Result<(), SimError> {
    if step.is_finite() && step > 0.0 {
        Ok(())
    } else {
        Err(SimError::InvalidStep(step))
    }
}

/// Kinematic bicycle with RK4, returning the full end state.
pub fn simulate_kinematic_state(v: &VehicleSpec, m: &ManeuverInput, step: f64) -> Result<StopState, SimError> {
    m.validate()?;
    check_step(step)?;
    let k = m.delta.tan() / v.wheelbase;
    Ok(integrate_until_stop(m.v_i, m.a, |speed| speed * k, step))
}

pub fn simulate_kinematic(v: &VehicleSpec, m: &ManeuverInput, step: f64) -> Result<FinalPose, SimError> {
    simulate_kinematic_state(v, m, step).map(|s| s.pose)
}

/// Closed-form end pose of the kinematic model under constant inputs: a
/// circular arc of radius `l / tan δ` and length `v_i² / (2|a|)`.
pub fn analytic_arc_oracle(v: &VehicleSpec, m: &ManeuverInput) -> Result<FinalPose, SimError> {
    if m.a.is_nan() || m.a >= 0.0 {
        return Err(SimError::NonBraking(m.a));
    }
    let s = m.stopping_distance();
    if m.delta == 0.0 {
        return Ok(FinalPose::new(s, 0.0, 0.0));
    }
    let radius = v.wheelbase / m.delta.tan();
    let theta = s / radius;
    Ok(FinalPose::new(radius * theta.sin(), radius * (1.0 - theta.cos()), theta))
}

/// Starts at [`DEFAULT_STEP`] and halves until a demanding probe maneuver (the
/// small vehicle at full lock and top speed) agrees with the oracle to 1e-6.
pub fn calibrated_step() -> f64 {
    let vehicle = VehicleSpec::small();
    let probe = ManeuverInput::kinematic(5.0, -0.1 * STANDARD_GRAVITY, std::f64::consts::FRAC_PI_4);
    let oracle = analytic_arc_oracle(&vehicle, &probe).expect("probe brakes");
    let mut step = DEFAULT_STEP;
    for _ in 0..16 {
        let pose = simulate_kinematic(&vehicle, &probe, step).expect("probe is valid");
        if pose.max_abs_diff(&oracle) <= 1e-6 {
            break;
        }
        step /= 2.0;
    }
    step
}

/// Friction and noise parameters of the dynamic surrogate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurrogateConfig {
    /// Standard deviation of the position noise, m.
    pub sigma_xy: f64,
    /// Standard deviation of the heading noise, rad.
    pub sigma_theta: f64,
    pub step: f64,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self {
            sigma_xy: 0.005,
            sigma_theta: 0.01,
            step: DEFAULT_STEP,
        }
    }
}

impl SurrogateConfig {
    pub fn noiseless() -> Self {
        Self {
            sigma_xy: 0.0,
            sigma_theta: 0.0,
            ..Self::default()
        }
    }
}

/// Synthetic friction-limited maneuver with default noise.
///
/// This is not a tire model. Deceleration saturates at the rear-axle adhesion
/// limit `μ g N_r / (N_f + N_r)`; when `μ g R < v_i²` the turn radius `R`
/// grows by `v_i² / (μ g R)` for the whole maneuver; Gaussian noise is added
/// to the final pose.
pub fn simulate_dynamic_surrogate(v: &VehicleSpec, m: &ManeuverInput, noise_seed: u64) -> Result<FinalPose, SimError> {
    simulate_dynamic_surrogate_with(v, m, &SurrogateConfig::default(), noise_seed)
}

pub fn simulate_dynamic_surrogate_with(
    v: &VehicleSpec,
    m: &ManeuverInput,
    cfg: &SurrogateConfig,
    noise_seed: u64,
) -> Result<FinalPose, SimError> {
    m.validate()?;
    check_step(cfg.step)?;
    if !(m.mu.is_finite() && m.mu > 0.0) {
        return Err(SimError::InvalidFriction(m.mu));
    }
    let grip = m.mu * m.g;
    let a_eff = -m.a.abs().min(grip * v.rear_share());
    // Lateral slip when mu g R < v_i^2: the radius grows by v_i^2 / (mu g R).
    let k = m.delta.tan() / v.wheelbase;
    let lateral = grip / (m.v_i * m.v_i * k.abs());
    let k_eff = if lateral < 1.0 { k * lateral } else { k };
    let yaw_rate = |speed: f64| speed * k_eff;
    let mut pose = integrate_until_stop(m.v_i, a_eff, yaw_rate, cfg.step).pose;
    if cfg.sigma_xy > 0.0 || cfg.sigma_theta > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
        let xy = Normal::new(0.0, cfg.sigma_xy).expect("finite sigma");
        let th = Normal::new(0.0, cfg.sigma_theta).expect("finite sigma");
        pose.x += xy.sample(&mut rng);
        pose.y += xy.sample(&mut rng);
        pose.theta += th.sample(&mut rng);
    }
    Ok(pose)
}
