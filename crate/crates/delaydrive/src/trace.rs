//! Time-series log of a run and its CSV export.

use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::RunError;

/// Everything logged at one sample instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t_s: f64,
    // Sensed state
    pub x_m: f64,
    pub y_m: f64,
    pub theta_rad: f64,
    pub v_mps: f64,
    pub omega_radps: f64,
    // Drive voltages issued this step
    pub u_r_v: f64,
    pub u_l_v: f64,
    // Tracking commands
    pub v_a_mps: f64,
    pub theta_a_rad: f64,
    pub dtheta_a_radps: f64,
    // Safety-filtered commands
    pub theta_s_rad: f64,
    pub z_radps: f64,
    pub v_s_mps: f64,
    // Safety diagnostics (NaN/inf sentinels when no field is configured)
    pub barrier: f64,
    pub ratio_c: f64,
    pub delta_rad: f64,
    pub beta_rad: f64,
    pub safety_active: bool,
    pub override_active: bool,
    // Reference state
    pub x_r_m: f64,
    pub y_r_m: f64,
    pub theta_r_rad: f64,
    pub v_r_mps: f64,
    pub omega_r_radps: f64,
}

/// Uniformly sampled run log. All columns share the same time base; a run of
/// duration T at step dt yields round(T/dt) + 1 rows (one per sample instant
/// including both endpoints), or no rows for a zero-duration run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimTrace {
    pub dt_s: f64,
    pub samples: Vec<Sample>,
}

pub const CSV_HEADER: &str = "t_s,x_m,y_m,theta_rad,v_mps,omega_radps,u_r_v,u_l_v,v_a_mps,theta_a_rad,dtheta_a_radps,theta_s_rad,z_radps,v_s_mps,barrier,ratio_c,delta_rad,beta_rad,safety_active,override_active,x_r_m,y_r_m,theta_r_rad,v_r_mps,omega_r_radps";

impl SimTrace {
    /// Write the trace as CSV: header plus one row per sample, floats with
    /// ten significant digits so values parse back to within 1e-9 relative.
    /// Output bytes are a pure function of the trace.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for s in &self.samples {
            writeln!(
                w,
                "{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{},{},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e}",
                s.t_s,
                s.x_m,
                s.y_m,
                s.theta_rad,
                s.v_mps,
                s.omega_radps,
                s.u_r_v,
                s.u_l_v,
                s.v_a_mps,
                s.theta_a_rad,
                s.dtheta_a_radps,
                s.theta_s_rad,
                s.z_radps,
                s.v_s_mps,
                s.barrier,
                s.ratio_c,
                s.delta_rad,
                s.beta_rad,
                s.safety_active as u8,
                s.override_active as u8,
                s.x_r_m,
                s.y_r_m,
                s.theta_r_rad,
                s.v_r_mps,
                s.omega_r_radps,
            )?;
        }
        Ok(())
    }

    pub fn export_csv(&self, path: &Path) -> Result<(), RunError> {
        let map_err = |e: std::io::Error| RunError::Io { path: path.display().to_string(), source: e };
        let file = std::fs::File::create(path).map_err(map_err)?;
        let mut w = BufWriter::new(file);
        self.write_csv(&mut w).map_err(map_err)?;
        w.flush().map_err(map_err)
    }
}
