//! Run metrics: contour error, settling time, steady-state statistics.

use crate::trace::SimTrace;
use crate::vfo::Trajectory;

/// A run counts as settled once the contour error stays below this bound.
pub const SETTLING_THRESHOLD_M: f64 = 0.05;

/// Number of curve samples used to bracket the nearest point on
/// non-circular trajectories.
const CONTOUR_GRID: usize = 2000;

/// Distance-to-curve evaluator. Circles have a closed form; other curves are
/// minimized numerically over a precomputed parameter grid, then the winning
/// bracket is shrunk by golden-section search until the parameter resolution
/// is far below 1e-6, so the returned distance never exceeds the distance to
/// any grid sample.
#[derive(Debug, Clone)]
pub struct ContourMeter {
    traj: Trajectory,
    grid: Vec<[f64; 2]>,
}

impl ContourMeter {
    pub fn new(traj: &Trajectory) -> Self {
        let grid = match traj {
            Trajectory::Circle { .. } => Vec::new(),
            Trajectory::Figure8 { .. } => {
                let period = traj.period_s();
                (0..CONTOUR_GRID)
                    .map(|i| {
                        let s = traj.sample(period * i as f64 / CONTOUR_GRID as f64);
                        [s.x_m, s.y_m]
                    })
                    .collect()
            }
        };
        ContourMeter { traj: *traj, grid }
    }

    /// Distance from a point to the closest point of the reference curve
    /// (geometric distance, independent of where the reference currently is).
    pub fn error(&self, x: f64, y: f64) -> f64 {
        if let Trajectory::Circle { radius_m, .. } = self.traj {
            return (x.hypot(y) - radius_m).abs();
        }
        let period = self.traj.period_s();
        let d2 = |t: f64| {
            let s = self.traj.sample(t);
            let dx = s.x_m - x;
            let dy = s.y_m - y;
            dx * dx + dy * dy
        };
        let mut best_i = 0;
        let mut best = f64::INFINITY;
        for (i, p) in self.grid.iter().enumerate() {
            let dx = p[0] - x;
            let dy = p[1] - y;
            let v = dx * dx + dy * dy;
            if v < best {
                best = v;
                best_i = i;
            }
        }
        // Shrink the bracket around the best grid sample; the curve is
        // periodic so an out-of-range parameter is harmless.
        let step = period / CONTOUR_GRID as f64;
        let mut a = (best_i as f64 - 1.0) * step;
        let mut b = (best_i as f64 + 1.0) * step;
        let inv_phi = 0.5 * (5.0f64.sqrt() - 1.0);
        let mut c = b - inv_phi * (b - a);
        let mut d = a + inv_phi * (b - a);
        let (mut fc, mut fd) = (d2(c), d2(d));
        for _ in 0..60 {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - inv_phi * (b - a);
                fc = d2(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + inv_phi * (b - a);
                fd = d2(d);
            }
        }
        best.min(fc).min(fd).sqrt()
    }
}

/// One-shot distance to the curve; prefer [`ContourMeter`] in loops.
pub fn contour_error(x: f64, y: f64, traj: &Trajectory) -> f64 {
    ContourMeter::new(traj).error(x, y)
}

/// Summary of one run. Steady-state statistics are present only when the run
/// settled (contour error below [`SETTLING_THRESHOLD_M`] through the end).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    /// First time after which the contour error stays below the threshold;
    /// `None` when the run never settles.
    pub settling_time_s: Option<f64>,
    pub contour_rms_m: Option<f64>,
    pub contour_mean_m: Option<f64>,
    /// RMS of the heading-command error theta_a - theta over the settled
    /// window.
    pub angle_rms_rad: Option<f64>,
    /// Largest barrier value over the whole run; NaN when no field is
    /// configured.
    pub barrier_max: f64,
    /// Number of samples with barrier >= 0 (safety violations).
    pub violations: usize,
    /// Number of maximal consecutive runs of overridden samples.
    pub override_intervals: usize,
}

/// Compute metrics over a finished trace. The trace must be non-empty.
pub fn compute_metrics(trace: &SimTrace, traj: &Trajectory) -> Metrics {
    assert!(!trace.samples.is_empty(), "metrics require a non-empty trace");

    let meter = ContourMeter::new(traj);
    let errs: Vec<f64> = trace.samples.iter().map(|s| meter.error(s.x_m, s.y_m)).collect();

    // Last sample above threshold decides settling.
    let last_above = errs.iter().rposition(|&e| e >= SETTLING_THRESHOLD_M);
    let settled_from = match last_above {
        None => Some(0),
        Some(i) if i + 1 < errs.len() => Some(i + 1),
        Some(_) => None,
    };
    let settling_time_s = settled_from.map(|i| trace.samples[i].t_s);

    let (contour_rms_m, contour_mean_m, angle_rms_rad) = match settled_from {
        Some(i) => {
            let window = &errs[i..];
            let n = window.len() as f64;
            let rms = (window.iter().map(|e| e * e).sum::<f64>() / n).sqrt();
            let mean = window.iter().sum::<f64>() / n;
            let angle = (trace.samples[i..]
                .iter()
                .map(|s| {
                    let e = s.theta_a_rad - s.theta_rad;
                    e * e
                })
                .sum::<f64>()
                / n)
                .sqrt();
            (Some(rms), Some(mean), Some(angle))
        }
        None => (None, None, None),
    };

    let barrier_max = trace
        .samples
        .iter()
        .map(|s| s.barrier)
        .filter(|b| !b.is_nan())
        .fold(f64::NAN, |acc, b| if acc.is_nan() || b > acc { b } else { acc });
    let violations = trace.samples.iter().filter(|s| s.barrier >= 0.0).count();

    let mut override_intervals = 0;
    let mut prev = false;
    for s in &trace.samples {
        if s.override_active && !prev {
            override_intervals += 1;
        }
        prev = s.override_active;
    }

    Metrics {
        settling_time_s,
        contour_rms_m,
        contour_mean_m,
        angle_rms_rad,
        barrier_max,
        violations,
        override_intervals,
    }
}

impl Metrics {
    /// `key=value` lines for scripting. Unsettled runs report
    /// `settling_time_s=inf` and omit the steady-state statistics.
    pub fn to_key_value_lines(&self) -> String {
        let mut out = String::new();
        match self.settling_time_s {
            Some(t) => out.push_str(&format!("settling_time_s={t:.9e}\n")),
            None => out.push_str("settling_time_s=inf\n"),
        }
        if let Some(v) = self.contour_rms_m {
            out.push_str(&format!("contour_rms_m={v:.9e}\n"));
        }
        if let Some(v) = self.contour_mean_m {
            out.push_str(&format!("contour_mean_m={v:.9e}\n"));
        }
        if let Some(v) = self.angle_rms_rad {
            out.push_str(&format!("angle_rms_rad={v:.9e}\n"));
        }
        out.push_str(&format!("barrier_max={:.9e}\n", self.barrier_max));
        out.push_str(&format!("violations={}\n", self.violations));
        out.push_str(&format!("override_intervals={}\n", self.override_intervals));
        out
    }
}
