//! Barrier-certificate safe-heading filter.
//!
//! Obstacles are encoded in a scalar field B(x, y) that is negative in free
//! space and rises above zero inside the avoidance regions. Requiring the
//! sampled motion to satisfy dB/dt <= -alpha * B keeps B negative for all
//! time; along unicycle motion that inequality restricts only the *heading*:
//!
//! ```text
//!   dB/dt = v * ||g|| * cos(theta - beta) <= -alpha * B,
//! ```
//!
//! where g is the field gradient and beta its direction. The filter turns
//! this into an interval of forbidden headings [beta - delta, beta + delta]
//! with delta = acos(c), c = -alpha*B / (v*||g||), and pushes the commanded
//! heading to the interval edge whenever the tracking command falls inside.
//! beta is propagated by its own differential equation (rather than raw
//! atan2) so the override command stays on a continuous angle branch.

use crate::error::ConfigError;
use crate::vfo::{nearest_rev, wrap_to_pi};

/// Gradient magnitude below which the field direction (and hence the unsafe
/// interval) is treated as undefined.
pub const EPS_GRAD: f64 = 1e-12;

/// Forward speed below which the activation condition is not evaluated; the
/// certificate presumes forward motion and a resting robot cannot collide.
pub const EPS_SPEED: f64 = 1e-9;

/// Hysteresis: once active, the filter only disengages when c rises past
/// this value, preventing chattering at the c = 1 boundary.
pub const C_RELEASE: f64 = 1.05;

/// One obstacle term of the barrier field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Obstacle {
    /// exp(-d^2 / sigma) around (x, y); sigma has units m^2.
    Circular { x_m: f64, y_m: f64, sigma_m2: f64 },
    /// exp(-((x-xo)/sx)^(2n) - ((y-yo)/sy)^(2n)): a rounded rectangle for
    /// n >= 2, axis lengths set by sx, sy (units m).
    Superellipse { x_m: f64, y_m: f64, sigma_x_m: f64, sigma_y_m: f64, n: u32 },
}

impl Obstacle {
    fn validate(&self) -> Result<(), ConfigError> {
        match *self {
            Obstacle::Circular { sigma_m2, .. } => {
                if !(sigma_m2.is_finite() && sigma_m2 > 0.0) {
                    return Err(ConfigError::invalid("safety.obstacles.sigma_m2", "spread must be positive"));
                }
            }
            Obstacle::Superellipse { sigma_x_m, sigma_y_m, n, .. } => {
                if !(sigma_x_m.is_finite() && sigma_x_m > 0.0) || !(sigma_y_m.is_finite() && sigma_y_m > 0.0) {
                    return Err(ConfigError::invalid("safety.obstacles.sigma", "axis lengths must be positive"));
                }
                if n == 0 {
                    return Err(ConfigError::invalid("safety.obstacles.n", "exponent must be at least 1"));
                }
            }
        }
        Ok(())
    }

    /// Term value and its first and second partial derivatives.
    fn eval(&self, x: f64, y: f64) -> Term {
        match *self {
            Obstacle::Circular { x_m, y_m, sigma_m2: s } => {
                let dx = x - x_m;
                let dy = y - y_m;
                let e = (-(dx * dx + dy * dy) / s).exp();
                Term {
                    b: e,
                    gx: -2.0 * dx / s * e,
                    gy: -2.0 * dy / s * e,
                    hxx: e * (4.0 * dx * dx / (s * s) - 2.0 / s),
                    hxy: e * 4.0 * dx * dy / (s * s),
                    hyy: e * (4.0 * dy * dy / (s * s) - 2.0 / s),
                }
            }
            Obstacle::Superellipse { x_m, y_m, sigma_x_m: sx, sigma_y_m: sy, n } => {
                let p = 2.0 * n as f64;
                let ux = (x - x_m) / sx;
                let uy = (y - y_m) / sy;
                let e = (-(ux.powf(p) + uy.powf(p))).exp();
                // dP/dx and d2P/dx2 of P = ux^p in physical coordinates.
                let dpx = p * ux.powf(p - 1.0) / sx;
                let dpy = p * uy.powf(p - 1.0) / sy;
                let d2px = p * (p - 1.0) * ux.powf(p - 2.0) / (sx * sx);
                let d2py = p * (p - 1.0) * uy.powf(p - 2.0) / (sy * sy);
                Term {
                    b: e,
                    gx: -dpx * e,
                    gy: -dpy * e,
                    hxx: e * (dpx * dpx - d2px),
                    hxy: e * dpx * dpy,
                    hyy: e * (dpy * dpy - d2py),
                }
            }
        }
    }
}

struct Term {
    b: f64,
    gx: f64,
    gy: f64,
    hxx: f64,
    hxy: f64,
    hyy: f64,
}

/// Barrier field B(x, y) = -b0 + sum of obstacle terms, with the certificate
/// decay rate alpha.
#[derive(Debug, Clone, PartialEq)]
pub struct BarrierField {
    pub b0: f64,
    pub alpha: f64,
    pub obstacles: Vec<Obstacle>,
}

impl BarrierField {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.b0.is_finite() && self.b0 > 0.0) {
            return Err(ConfigError::invalid("safety.b0", "field offset must be positive"));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(ConfigError::invalid("safety.alpha", "certificate rate must be positive"));
        }
        if self.obstacles.is_empty() {
            return Err(ConfigError::invalid("safety.obstacles", "at least one obstacle required"));
        }
        for o in &self.obstacles {
            o.validate()?;
        }
        Ok(())
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        -self.b0 + self.obstacles.iter().map(|o| o.eval(x, y).b).sum::<f64>()
    }

    pub fn gradient(&self, x: f64, y: f64) -> [f64; 2] {
        let mut g = [0.0; 2];
        for o in &self.obstacles {
            let t = o.eval(x, y);
            g[0] += t.gx;
            g[1] += t.gy;
        }
        g
    }

    /// Symmetric Hessian [[hxx, hxy], [hxy, hyy]].
    pub fn hessian(&self, x: f64, y: f64) -> [[f64; 2]; 2] {
        let mut h = [[0.0; 2]; 2];
        for o in &self.obstacles {
            let t = o.eval(x, y);
            h[0][0] += t.hxx;
            h[0][1] += t.hxy;
            h[1][0] += t.hxy;
            h[1][1] += t.hyy;
        }
        h
    }
}

/// Activation ratio c = -alpha * B / (v * ||g||): headings are restricted
/// exactly when c < 1. Returns +inf (no restriction) where the gradient is
/// numerically zero. The certificate presumes forward motion.
pub fn activation_ratio(field: &BarrierField, x: f64, y: f64, v: f64) -> Result<f64, ConfigError> {
    if v.is_nan() || v <= 0.0 {
        return Err(ConfigError::invalid("safety", format!("activation ratio requires forward motion, got v = {v}")));
    }
    let b = field.value(x, y);
    let g = field.gradient(x, y);
    let gn = g[0].hypot(g[1]);
    if gn < EPS_GRAD {
        return Ok(f64::INFINITY);
    }
    Ok(-field.alpha * b / (v * gn))
}

/// Half-width of the forbidden heading interval. `None` when c >= 1 (no
/// heading is restricted). c < 0 means the robot is inside an avoidance
/// region: the half-width saturates at pi/2 and the flag is set.
pub fn unsafe_half_width(c: f64) -> Option<(f64, bool)> {
    if c >= 1.0 {
        None
    } else if c < 0.0 {
        Some((std::f64::consts::FRAC_PI_2, true))
    } else {
        Some((c.clamp(0.0, 1.0).acos(), false))
    }
}

/// Forbidden heading interval [beta - delta, beta + delta].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnsafeInterval {
    pub beta_rad: f64,
    pub delta_rad: f64,
}

impl UnsafeInterval {
    /// Membership for an unwrapped candidate: the candidate is reduced
    /// modulo 2*pi to the representative nearest beta.
    pub fn contains(&self, theta: f64) -> bool {
        wrap_to_pi(theta - self.beta_rad).abs() <= self.delta_rad
    }

    pub fn lo(&self) -> f64 {
        self.beta_rad - self.delta_rad
    }

    pub fn hi(&self) -> f64 {
        self.beta_rad + self.delta_rad
    }
}

/// One explicit integration step of the gradient-direction dynamics
///
/// ```text
///   beta' = v * [g1 (H21 c + H22 s) - g2 (H11 c + H12 s)] / ||g||^2,
/// ```
///
/// with (c, s) = (cos theta, sin theta). This reproduces d/dt atan2(g2, g1)
/// along the motion, so beta follows the gradient direction without branch
/// jumps. beta' does not depend on beta itself, so the explicit step is exact
/// for the frozen sample values. Returns `beta` unchanged (degenerate
/// gradient) when ||g|| is numerically zero.
pub fn beta_step(beta: f64, field: &BarrierField, x: f64, y: f64, v: f64, theta: f64, dt_s: f64) -> f64 {
    let g = field.gradient(x, y);
    let n2 = g[0] * g[0] + g[1] * g[1];
    if n2.sqrt() < EPS_GRAD {
        return beta;
    }
    let h = field.hessian(x, y);
    let (ct, st) = (theta.cos(), theta.sin());
    let phi = g[0] * (h[1][0] * ct + h[1][1] * st) - g[1] * (h[0][0] * ct + h[0][1] * st);
    beta + dt_s * v * phi / n2
}

/// Which side of the forbidden interval the override steers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TurnDirection {
    /// Steer to beta + delta (obstacle passes on the right).
    Left,
    /// Steer to beta - delta.
    Right,
}

/// First-order high-pass s/(T s + 1), discretized with the bilinear
/// transform. Used to estimate the rate of the override heading command.
#[derive(Debug, Clone, PartialEq)]
pub struct HighPass {
    t_s: f64,
    x_prev: f64,
    y: f64,
}

impl HighPass {
    pub fn new(t_s: f64, x0: f64) -> Result<Self, ConfigError> {
        if !(t_s.is_finite() && t_s > 0.0) {
            return Err(ConfigError::invalid("safety.hpf_time_constant_s", "time constant must be positive"));
        }
        Ok(HighPass { t_s, x_prev: x0, y: 0.0 })
    }

    pub fn step(&mut self, x: f64, dt_s: f64) -> f64 {
        self.y = (2.0 * (x - self.x_prev) + (2.0 * self.t_s - dt_s) * self.y) / (2.0 * self.t_s + dt_s);
        self.x_prev = x;
        self.y
    }

    pub fn output(&self) -> f64 {
        self.y
    }
}

/// Command triple leaving the filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafeCommand {
    /// Heading command, continuous with previously emitted values.
    pub theta_s_rad: f64,
    /// Heading-rate feedforward: the tracking rate when passing through, the
    /// high-pass estimate while overriding.
    pub z_radps: f64,
    pub v_s_mps: f64,
    pub overridden: bool,
}

/// Per-sample field diagnostics for logging.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafetyDiag {
    pub b: f64,
    pub c: f64,
    /// 0 when no heading is restricted.
    pub delta_rad: f64,
    pub beta_rad: f64,
    pub active: bool,
}

/// Stateful safe-heading filter.
#[derive(Debug, Clone, PartialEq)]
pub struct SafetyFilter {
    field: BarrierField,
    turn: TurnDirection,
    hpf: HighPass,
    beta_rad: f64,
    active: bool,
    prev_theta_s: f64,
}

impl SafetyFilter {
    pub fn new(field: BarrierField, turn: TurnDirection, hpf_t_s: f64, initial_heading_rad: f64) -> Result<Self, ConfigError> {
        field.validate()?;
        Ok(SafetyFilter {
            field,
            turn,
            hpf: HighPass::new(hpf_t_s, initial_heading_rad)?,
            beta_rad: initial_heading_rad,
            active: false,
            prev_theta_s: initial_heading_rad,
        })
    }

    pub fn field(&self) -> &BarrierField {
        &self.field
    }

    /// Filter the tracking commands (`theta_a`, `dtheta_a`, `v_a`) given the
    /// measured pose/speed and the reference speed `v_r`.
    #[allow(clippy::too_many_arguments)]
    pub fn step(
        &mut self,
        x: f64,
        y: f64,
        v: f64,
        theta: f64,
        v_a: f64,
        theta_a: f64,
        dtheta_a: f64,
        v_r: f64,
        dt_s: f64,
    ) -> (SafeCommand, SafetyDiag) {
        let b = self.field.value(x, y);
        let g = self.field.gradient(x, y);
        let gn = g[0].hypot(g[1]);

        // The certificate presumes forward motion; at standstill no heading
        // restriction applies (and none is needed).
        let c = if v < EPS_SPEED || gn < EPS_GRAD {
            f64::INFINITY
        } else {
            -self.field.alpha * b / (v * gn)
        };

        if c < 1.0 {
            if !self.active {
                // First engagement: seed the gradient-direction state with
                // the current heading (the robot is driving at the obstacle,
                // so the heading approximates the gradient direction on the
                // current angle branch).
                self.active = true;
                self.beta_rad = theta;
            } else {
                self.beta_rad = beta_step(self.beta_rad, &self.field, x, y, v, theta, dt_s);
            }
        } else if self.active && c >= C_RELEASE {
            self.active = false;
        }

        let restriction = if self.active { unsafe_half_width(c) } else { None };
        let delta = restriction.map_or(0.0, |(d, _)| d);

        let interval = UnsafeInterval { beta_rad: self.beta_rad, delta_rad: delta };
        let overridden = restriction.is_some() && interval.contains(theta_a);

        let theta_s = if overridden {
            let edge = match self.turn {
                TurnDirection::Left => interval.hi(),
                TurnDirection::Right => interval.lo(),
            };
            // Keep the emitted command on the branch of previous emissions.
            nearest_rev(edge, self.prev_theta_s)
        } else {
            theta_a
        };
        // The rate filter runs on every sample so its history is warm at the
        // moment an override engages.
        let z_filtered = self.hpf.step(theta_s, dt_s);
        let z = if overridden { z_filtered } else { dtheta_a };
        let v_s = if overridden { v_r } else { v_a };
        self.prev_theta_s = theta_s;

        (
            SafeCommand { theta_s_rad: theta_s, z_radps: z, v_s_mps: v_s, overridden },
            SafetyDiag { b, c, delta_rad: delta, beta_rad: self.beta_rad, active: self.active },
        )
    }
}
