//! Closed-loop runner: wheel plants, tracking, prediction and the safety
//! filter wired into one fixed-step loop.

use crate::config::ScenarioConfig;
use crate::error::{ConfigError, Error, RunError};
use crate::metrics::{compute_metrics, Metrics};
use crate::plant::{step_pose, DelayedSecondOrder, DiscretePlant, Pose, WheelBase, WheelState};
use crate::safety::{SafeCommand, SafetyDiag, SafetyFilter};
use crate::smith::{HeadingLoop, HeadingPredictor, ServoLoop, ServoPredictor};
use crate::trace::{Sample, SimTrace};
use crate::vfo::{scale_commands, PiController, VfoController};

/// Simulate one scenario to completion.
///
/// Sample `k` logs the system as sensed at `t = k*dt` together with the
/// commands computed from that measurement; actuation and integration happen
/// after logging, so the trace has `round(duration/dt) + 1` rows (none for a
/// zero-length run).
pub fn run(cfg: &ScenarioConfig) -> Result<SimTrace, Error> {
    cfg.validate()?;
    let dt = cfg.sim.dt_s;
    let n = (cfg.sim.duration_s / dt).round() as usize;
    if n == 0 {
        return Ok(SimTrace { dt_s: dt, samples: Vec::new() });
    }

    let plant: DelayedSecondOrder = cfg.plant.into();
    let disc = DiscretePlant::new(&plant, dt)?;
    let nominal = cfg.nominal_model();
    let base = WheelBase::new(cfg.robot.wheel_separation_m)?;
    let traj = cfg.trajectory();

    let mut wheel_r = WheelState::new(disc.clone());
    let mut wheel_l = WheelState::new(disc);

    let mk_servo = || -> Result<ServoLoop, ConfigError> {
        ServoLoop::new(
            PiController::new(cfg.servo_pi.kp, cfg.servo_pi.ki),
            ServoPredictor::new(&nominal, dt, cfg.predictor.servo)?,
            cfg.robot.u_max_v,
        )
    };
    let mut servo_r = mk_servo()?;
    let mut servo_l = mk_servo()?;

    let servo_pi = PiController::new(cfg.servo_pi.kp, cfg.servo_pi.ki);
    let mut heading = HeadingLoop::new(
        PiController::new(cfg.angle_pi.kp, cfg.angle_pi.ki),
        HeadingPredictor::new(&nominal, &servo_pi, dt, cfg.predictor.angle)?,
    );

    let mut pose = Pose {
        x_m: cfg.initial_pose.x_m,
        y_m: cfg.initial_pose.y_m,
        theta_rad: cfg.initial_pose.theta_rad,
    };
    let mut vfo = VfoController::new(cfg.vfo.gain, pose.theta_rad)?;
    let mut safety = match cfg.safety.as_ref().filter(|s| s.enabled) {
        Some(s) => Some(SafetyFilter::new(
            s.barrier_field(),
            s.turn.into(),
            s.hpf_time_constant_s,
            pose.theta_rad,
        )?),
        None => None,
    };

    let mut samples = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let t = k as f64 * dt;

        let v_r_meas = wheel_r.output();
        let v_l_meas = wheel_l.output();
        let twist = base.wheels_to_body(v_r_meas, v_l_meas);

        let r = traj.sample(t);
        let a = vfo.step(&pose, &r);

        let (cmd, diag) = match safety.as_mut() {
            Some(f) => f.step(
                pose.x_m,
                pose.y_m,
                twist.v_mps,
                pose.theta_rad,
                a.v_a_mps,
                a.theta_a_rad,
                a.dtheta_a_radps,
                r.v_mps,
                dt,
            ),
            None => (
                SafeCommand {
                    theta_s_rad: a.theta_a_rad,
                    z_radps: a.dtheta_a_radps,
                    v_s_mps: a.v_a_mps,
                    overridden: false,
                },
                SafetyDiag {
                    b: f64::NAN,
                    c: f64::INFINITY,
                    delta_rad: 0.0,
                    beta_rad: f64::NAN,
                    active: false,
                },
            ),
        };

        let omega_a = heading.step(cmd.theta_s_rad, cmd.z_radps, pose.theta_rad, dt);
        let (v_r_cmd, v_l_cmd) = base.body_to_wheels(cmd.v_s_mps, omega_a);
        let scaled = scale_commands(v_r_cmd, v_l_cmd, servo_r.last_u_v(), servo_l.last_u_v(), cfg.robot.u_max_v);
        let hold = scaled.mu > 1.0;
        let u_r = servo_r.step(scaled.v_r_mps, v_r_meas, dt, hold);
        let u_l = servo_l.step(scaled.v_l_mps, v_l_meas, dt, hold);

        for (signal, value) in [
            ("x_m", pose.x_m),
            ("y_m", pose.y_m),
            ("theta_rad", pose.theta_rad),
            ("v_mps", twist.v_mps),
            ("omega_radps", twist.omega_radps),
            ("u_r_v", u_r),
            ("u_l_v", u_l),
            ("v_a_mps", a.v_a_mps),
            ("theta_a_rad", a.theta_a_rad),
            ("dtheta_a_radps", a.dtheta_a_radps),
            ("theta_s_rad", cmd.theta_s_rad),
            ("z_radps", cmd.z_radps),
            ("v_s_mps", cmd.v_s_mps),
        ] {
            if !value.is_finite() {
                return Err(RunError::NonFinite { signal, step: k, t_s: t }.into());
            }
        }

        samples.push(Sample {
            t_s: t,
            x_m: pose.x_m,
            y_m: pose.y_m,
            theta_rad: pose.theta_rad,
            v_mps: twist.v_mps,
            omega_radps: twist.omega_radps,
            u_r_v: u_r,
            u_l_v: u_l,
            v_a_mps: a.v_a_mps,
            theta_a_rad: a.theta_a_rad,
            dtheta_a_radps: a.dtheta_a_radps,
            theta_s_rad: cmd.theta_s_rad,
            z_radps: cmd.z_radps,
            v_s_mps: cmd.v_s_mps,
            barrier: diag.b,
            ratio_c: diag.c,
            delta_rad: diag.delta_rad,
            beta_rad: diag.beta_rad,
            safety_active: diag.active,
            override_active: cmd.overridden,
            x_r_m: r.x_m,
            y_r_m: r.y_m,
            theta_r_rad: r.theta_rad,
            v_r_mps: r.v_mps,
            omega_r_radps: r.omega_radps,
        });

        if k < n {
            wheel_r.step(u_r);
            wheel_l.step(u_l);
            // The pose integrates the twist sensed at the start of the
            // interval, matching how the logged heading relates to the
            // logged turn rate.
            pose = step_pose(&pose, &twist, dt);
        }
    }

    Ok(SimTrace { dt_s: dt, samples })
}

/// Run the scenario once per barrier-decay value, returning each value's
/// metrics. Requires a `[safety]` section.
pub fn sweep_alpha(cfg: &ScenarioConfig, values: &[f64]) -> Result<Vec<(f64, Metrics)>, Error> {
    if cfg.safety.is_none() {
        return Err(ConfigError::invalid("safety", "alpha sweep requires a [safety] section").into());
    }
    let traj = cfg.trajectory();
    let mut out = Vec::with_capacity(values.len());
    for &alpha in values {
        let mut c = cfg.clone();
        c.safety.as_mut().expect("checked above").alpha = alpha;
        let trace = run(&c)?;
        if trace.samples.is_empty() {
            return Err(ConfigError::invalid("sim.duration_s", "alpha sweep requires a non-empty run").into());
        }
        out.push((alpha, compute_metrics(&trace, &traj)));
    }
    Ok(out)
}
