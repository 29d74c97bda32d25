//! Wheel-drive dynamics and rigid-body kinematics.
//!
//! Each wheel's servo drive is modelled as a second-order transfer function
//! with an input dead time,
//!
//! ```text
//!            num1 * s + num0
//!   G(s) = ------------------- * exp(-tau * s),
//!           s^2 + den1*s + den0
//! ```
//!
//! discretized exactly under a zero-order hold so the fixed-step loop
//! reproduces the continuous response at the sample instants. The robot body
//! is a unicycle driven by the mean and difference of the wheel velocities.

use nalgebra::{Matrix2, Matrix3, RowVector2, Vector2};

use crate::error::ConfigError;

/// Second-order strictly proper transfer function with input dead time.
/// Input is drive voltage (V), output is wheel linear velocity (m/s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayedSecondOrder {
    pub num1: f64,
    pub num0: f64,
    pub den1: f64,
    pub den0: f64,
    /// Input dead time in seconds.
    pub tau_s: f64,
}

impl DelayedSecondOrder {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, v) in [
            ("plant.num1", self.num1),
            ("plant.num0", self.num0),
            ("plant.den1", self.den1),
            ("plant.den0", self.den0),
            ("plant.tau_s", self.tau_s),
        ] {
            if !v.is_finite() {
                return Err(ConfigError::invalid(name, "must be finite"));
            }
        }
        if self.den1 <= 0.0 || self.den0 <= 0.0 {
            return Err(ConfigError::invalid(
                "plant.den",
                format!("denominator coefficients must be positive (got den1 = {}, den0 = {})", self.den1, self.den0),
            ));
        }
        if self.tau_s < 0.0 {
            return Err(ConfigError::invalid("plant.tau_s", "dead time must be non-negative"));
        }
        Ok(())
    }

    /// Steady-state gain for a constant input: num0 / den0.
    pub fn dc_gain(&self) -> f64 {
        self.num0 / self.den0
    }

    /// Roots of the denominator.
    pub fn poles(&self) -> Poles {
        let disc = self.den1 * self.den1 - 4.0 * self.den0;
        if disc >= 0.0 {
            let r = disc.sqrt();
            Poles::Real((-self.den1 - r) / 2.0, (-self.den1 + r) / 2.0)
        } else {
            Poles::Complex { re: -self.den1 / 2.0, im: (-disc).sqrt() / 2.0 }
        }
    }

    /// Root of the numerator, if the numerator has degree one.
    pub fn zero(&self) -> Option<f64> {
        (self.num1 != 0.0).then(|| -self.num0 / self.num1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Poles {
    Real(f64, f64),
    Complex { re: f64, im: f64 },
}

/// Exact zero-order-hold discretization of a [`DelayedSecondOrder`].
///
/// State space is controllable canonical form; the dead time becomes an
/// integer number of input samples.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePlant {
    ad: Matrix2<f64>,
    bd: Vector2<f64>,
    c: RowVector2<f64>,
    pub dt_s: f64,
    pub delay_steps: usize,
}

/// Residual tolerance (in steps) when rounding tau/dt to an integer.
const DELAY_RESIDUAL_TOL: f64 = 1e-9;

impl DiscretePlant {
    pub fn new(plant: &DelayedSecondOrder, dt_s: f64) -> Result<Self, ConfigError> {
        plant.validate()?;
        if !(dt_s.is_finite() && dt_s > 0.0) {
            return Err(ConfigError::invalid("sim.dt_s", "step size must be positive"));
        }
        let ratio = plant.tau_s / dt_s;
        let steps = ratio.round();
        let residual = (ratio - steps).abs();
        if residual >= DELAY_RESIDUAL_TOL {
            return Err(ConfigError::NonRepresentableDelay { tau_s: plant.tau_s, dt_s, residual });
        }

        let a = Matrix2::new(0.0, 1.0, -plant.den0, -plant.den1);
        let b = Vector2::new(0.0, 1.0);
        // Augmented exponential yields [Ad, Bd; 0, 1] in one shot.
        let mut m = Matrix3::zeros();
        m.fixed_view_mut::<2, 2>(0, 0).copy_from(&(a * dt_s));
        m.fixed_view_mut::<2, 1>(0, 2).copy_from(&(b * dt_s));
        let e = m.exp();
        let ad = e.fixed_view::<2, 2>(0, 0).into_owned();
        let bd = e.fixed_view::<2, 1>(0, 2).into_owned();
        let c = RowVector2::new(plant.num0, plant.num1);

        Ok(DiscretePlant { ad, bd, c, dt_s, delay_steps: steps as usize })
    }

    /// Gain of the discrete recurrence for a constant input,
    /// C (I - Ad)^-1 Bd. Equals the continuous DC gain.
    pub fn dc_gain(&self) -> f64 {
        let inv = (Matrix2::identity() - self.ad)
            .try_inverse()
            .expect("plant with den0 > 0 has no pole at z = 1");
        (self.c * inv * self.bd)[(0, 0)]
    }
}

/// Fixed-length FIFO used for the input dead time.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayLine {
    buf: Vec<f64>,
    head: usize,
}

impl DelayLine {
    pub fn new(len: usize) -> Self {
        DelayLine { buf: vec![0.0; len], head: 0 }
    }

    /// Push the newest sample, return the one from `len` pushes ago.
    /// A zero-length line passes the input straight through.
    pub fn push_pop(&mut self, x: f64) -> f64 {
        if self.buf.is_empty() {
            return x;
        }
        let out = self.buf[self.head];
        self.buf[self.head] = x;
        self.head = (self.head + 1) % self.buf.len();
        out
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }
}

/// One wheel drive: delay line feeding the discrete recurrence.
/// Starts at rest (zero state, zero-filled delay line).
#[derive(Debug, Clone, PartialEq)]
pub struct WheelState {
    disc: DiscretePlant,
    x: Vector2<f64>,
    delay: DelayLine,
    output: f64,
}

impl WheelState {
    pub fn new(disc: DiscretePlant) -> Self {
        let delay = DelayLine::new(disc.delay_steps);
        WheelState { disc, x: Vector2::zeros(), delay, output: 0.0 }
    }

    /// Apply drive voltage `u` held over one step; returns the wheel velocity
    /// at the end of the step. The result is unaffected by inputs newer than
    /// the dead time.
    pub fn step(&mut self, u: f64) -> f64 {
        let ud = self.delay.push_pop(u);
        self.x = self.disc.ad * self.x + self.disc.bd * ud;
        self.output = (self.disc.c * self.x)[(0, 0)];
        self.output
    }

    /// Wheel velocity at the current sample.
    pub fn output(&self) -> f64 {
        self.output
    }
}

/// Planar pose. `theta_rad` is unwrapped (accumulates across revolutions).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub x_m: f64,
    pub y_m: f64,
    pub theta_rad: f64,
}

/// Body velocities of the unicycle model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyTwist {
    pub v_mps: f64,
    pub omega_radps: f64,
}

/// Wheel separation; converts between wheel velocities and body twist.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WheelBase {
    d_m: f64,
}

impl WheelBase {
    pub fn new(d_m: f64) -> Result<Self, ConfigError> {
        if !(d_m.is_finite() && d_m > 0.0) {
            return Err(ConfigError::invalid("robot.wheel_separation_m", "wheel separation must be positive"));
        }
        Ok(WheelBase { d_m })
    }

    pub fn separation_m(&self) -> f64 {
        self.d_m
    }

    /// v = (vr + vl)/2, omega = (vr - vl)/d.
    pub fn wheels_to_body(&self, v_r: f64, v_l: f64) -> BodyTwist {
        BodyTwist { v_mps: 0.5 * (v_r + v_l), omega_radps: (v_r - v_l) / self.d_m }
    }

    /// Inverse of [`WheelBase::wheels_to_body`]: (vr, vl).
    pub fn body_to_wheels(&self, v: f64, omega: f64) -> (f64, f64) {
        let half = 0.5 * self.d_m * omega;
        (v + half, v - half)
    }
}

/// One classical 4th-order Runge-Kutta step of the unicycle
/// (x' = v cos theta, y' = v sin theta, theta' = omega) with the twist held
/// constant over the step.
pub fn step_pose(pose: &Pose, twist: &BodyTwist, dt_s: f64) -> Pose {
    let f = |p: &Pose| (twist.v_mps * p.theta_rad.cos(), twist.v_mps * p.theta_rad.sin(), twist.omega_radps);
    let k1 = f(pose);
    let mid1 = Pose {
        x_m: pose.x_m + 0.5 * dt_s * k1.0,
        y_m: pose.y_m + 0.5 * dt_s * k1.1,
        theta_rad: pose.theta_rad + 0.5 * dt_s * k1.2,
    };
    let k2 = f(&mid1);
    let mid2 = Pose {
        x_m: pose.x_m + 0.5 * dt_s * k2.0,
        y_m: pose.y_m + 0.5 * dt_s * k2.1,
        theta_rad: pose.theta_rad + 0.5 * dt_s * k2.2,
    };
    let k3 = f(&mid2);
    let end = Pose {
        x_m: pose.x_m + dt_s * k3.0,
        y_m: pose.y_m + dt_s * k3.1,
        theta_rad: pose.theta_rad + dt_s * k3.2,
    };
    let k4 = f(&end);
    Pose {
        x_m: pose.x_m + dt_s / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
        y_m: pose.y_m + dt_s / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
        theta_rad: pose.theta_rad + dt_s / 6.0 * (k1.2 + 2.0 * k2.2 + 2.0 * k3.2 + k4.2),
    }
}
