//! Dead-time compensation for the velocity and heading loops.
//!
//! Each loop carries a predictor that runs two copies of the nominal model,
//! one fed directly and one through the modelled dead time. Their output
//! difference, added to the measurement, removes the delay from the feedback
//! path: with a perfect model the loop behaves like its delay-free version
//! and the physical response is simply shifted by the dead time.
//!
//! The heading layer predicts through the *closed* velocity loop: its nominal
//! plant is the delay-free velocity loop (PI wrapped around the nominal wheel
//! model) followed by an integrator, simulated structurally rather than as a
//! reduced transfer function so the discrete recurrences match the real loop
//! sample for sample.

use crate::error::ConfigError;
use crate::plant::{DelayLine, DelayedSecondOrder, DiscretePlant, WheelState};
use crate::vfo::PiController;

/// Predictor for one velocity servo loop.
#[derive(Debug, Clone, PartialEq)]
pub struct ServoPredictor {
    enabled: bool,
    /// Nominal model fed directly.
    direct: WheelState,
    /// Nominal model fed through the modelled dead time.
    delayed: WheelState,
}

impl ServoPredictor {
    pub fn new(nominal: &DelayedSecondOrder, dt_s: f64, enabled: bool) -> Result<Self, ConfigError> {
        let undelayed = DelayedSecondOrder { tau_s: 0.0, ..*nominal };
        Ok(ServoPredictor {
            enabled,
            direct: WheelState::new(DiscretePlant::new(&undelayed, dt_s)?),
            delayed: WheelState::new(DiscretePlant::new(nominal, dt_s)?),
        })
    }

    /// Feedback correction from inputs applied so far. Zero when disabled,
    /// and converges to zero whenever the input settles.
    pub fn correction(&self) -> f64 {
        if self.enabled {
            self.direct.output() - self.delayed.output()
        } else {
            0.0
        }
    }

    pub fn advance(&mut self, u: f64) {
        if self.enabled {
            self.direct.step(u);
            self.delayed.step(u);
        }
    }
}

/// Velocity servo for one wheel: PI with predictor-compensated feedback and a
/// hard voltage limit.
#[derive(Debug, Clone, PartialEq)]
pub struct ServoLoop {
    pi: PiController,
    predictor: ServoPredictor,
    u_max_v: f64,
    last_u_v: f64,
}

impl ServoLoop {
    pub fn new(pi: PiController, predictor: ServoPredictor, u_max_v: f64) -> Result<Self, ConfigError> {
        if !(u_max_v.is_finite() && u_max_v > 0.0) {
            return Err(ConfigError::invalid("robot.u_max_v", "voltage limit must be positive"));
        }
        Ok(ServoLoop { pi, predictor, u_max_v, last_u_v: 0.0 })
    }

    /// One control step: returns the drive voltage for this sample.
    /// `hold_integrator` freezes the PI integrator (used while the upstream
    /// command scaling reports saturation).
    pub fn step(&mut self, v_cmd: f64, v_meas: f64, dt_s: f64, hold_integrator: bool) -> f64 {
        let e = v_cmd - (v_meas + self.predictor.correction());
        let u = if hold_integrator { self.pi.step_held(e) } else { self.pi.step(e, dt_s) };
        let u = u.clamp(-self.u_max_v, self.u_max_v);
        self.predictor.advance(u);
        self.last_u_v = u;
        u
    }

    /// Voltage issued at the previous step.
    pub fn last_u_v(&self) -> f64 {
        self.last_u_v
    }
}

/// Delay-free nominal velocity loop: the servo PI in unity feedback around
/// the nominal wheel model without dead time.
#[derive(Debug, Clone, PartialEq)]
pub struct NominalVelocityLoop {
    pi: PiController,
    plant: WheelState,
}

impl NominalVelocityLoop {
    pub fn new(nominal: &DelayedSecondOrder, servo_pi: &PiController, dt_s: f64) -> Result<Self, ConfigError> {
        let undelayed = DelayedSecondOrder { tau_s: 0.0, ..*nominal };
        Ok(NominalVelocityLoop {
            pi: PiController::new(servo_pi.kp, servo_pi.ki),
            plant: WheelState::new(DiscretePlant::new(&undelayed, dt_s)?),
        })
    }

    pub fn output(&self) -> f64 {
        self.plant.output()
    }

    pub fn advance(&mut self, cmd: f64, dt_s: f64) {
        let e = cmd - self.plant.output();
        let u = self.pi.step(e, dt_s);
        self.plant.step(u);
    }
}

/// Nominal heading plant: closed velocity loop followed by an integrator.
/// The integrator accumulates the loop output *before* each advance, matching
/// how the physical heading integrates the sensed turn rate.
#[derive(Debug, Clone, PartialEq)]
struct HeadingChannel {
    loop_: NominalVelocityLoop,
    theta_rad: f64,
}

impl HeadingChannel {
    fn advance(&mut self, cmd: f64, dt_s: f64) {
        self.theta_rad += dt_s * self.loop_.output();
        self.loop_.advance(cmd, dt_s);
    }
}

/// Predictor for the heading loop.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadingPredictor {
    enabled: bool,
    direct: HeadingChannel,
    delayed: HeadingChannel,
    delay: DelayLine,
}

impl HeadingPredictor {
    pub fn new(
        nominal: &DelayedSecondOrder,
        servo_pi: &PiController,
        dt_s: f64,
        enabled: bool,
    ) -> Result<Self, ConfigError> {
        let mk = || -> Result<HeadingChannel, ConfigError> {
            Ok(HeadingChannel { loop_: NominalVelocityLoop::new(nominal, servo_pi, dt_s)?, theta_rad: 0.0 })
        };
        let steps = DiscretePlant::new(nominal, dt_s)?.delay_steps;
        Ok(HeadingPredictor { enabled, direct: mk()?, delayed: mk()?, delay: DelayLine::new(steps) })
    }

    pub fn correction(&self) -> f64 {
        if self.enabled {
            self.direct.theta_rad - self.delayed.theta_rad
        } else {
            0.0
        }
    }

    pub fn advance(&mut self, omega_cmd: f64, dt_s: f64) {
        if self.enabled {
            self.direct.advance(omega_cmd, dt_s);
            let delayed_cmd = self.delay.push_pop(omega_cmd);
            self.delayed.advance(delayed_cmd, dt_s);
        }
    }
}

/// Outer heading loop: PI on the predictor-compensated heading error plus the
/// commanded heading rate as feedforward.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadingLoop {
    pi: PiController,
    predictor: HeadingPredictor,
}

impl HeadingLoop {
    pub fn new(pi: PiController, predictor: HeadingPredictor) -> Self {
        HeadingLoop { pi, predictor }
    }

    /// One control step: returns the turn-rate command for this sample.
    pub fn step(&mut self, theta_cmd: f64, dtheta_cmd: f64, theta_meas: f64, dt_s: f64) -> f64 {
        let e = theta_cmd - (theta_meas + self.predictor.correction());
        let omega = self.pi.step(e, dt_s) + dtheta_cmd;
        self.predictor.advance(omega, dt_s);
        omega
    }
}
