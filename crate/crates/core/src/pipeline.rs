//! A full diagnostic run: time stepping with energy bookkeeping at every
//! step and the derivative-based functionals at stored snapshots.

use std::io::Write;

use serde::Serialize;

use crate::coupling::{CoupledState, Coupler, Forcing, StepReport};
use crate::diagnostics::{
    ball_audit_from, decay_fit, default_eta, higher_energy_audit_from, higher_terms_series, lyapunov_series, EnergyReport, EnergyTracker,
};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticSettings {
    /// Cross-term weight; `None` selects `0.1 min(nu, 1)`.
    pub eta: Option<f64>,
    /// Exponential weights for the Ball audit; the first one fills the CSV
    /// column.
    pub omegas: Vec<f64>,
    pub snapshot_stride: usize,
}

impl Default for DiagnosticSettings {
    fn default() -> Self {
        Self {
            eta: None,
            omegas: vec![0.1, 0.5],
            snapshot_stride: 1,
        }
    }
}

/// One CSV row. Derivative-based columns are `None` away from interior
/// snapshots.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Row {
    pub energy: EnergyReport,
    pub e_tilde: Option<f64>,
    pub lambda: Option<f64>,
    pub ball_residual: Option<f64>,
    pub interface_residual: f64,
    pub subiterations: usize,
}

pub const CSV_COLUMNS: [&str; 15] = [
    "t",
    "E_total",
    "kinetic_fluid",
    "kinetic_plate",
    "bending",
    "membrane",
    "dissipation_cum",
    "work_cum",
    "balance_residual",
    "E_tilde",
    "Lambda",
    "ball_residual",
    "mean_w",
    "interface_residual",
    "subiterations",
];

#[derive(Clone, Debug, Serialize)]
pub struct BallSummary {
    pub omega: f64,
    pub max_abs_residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub steps: usize,
    pub t_end: f64,
    pub eta: f64,
    pub cbar: Option<f64>,
    pub energy_decay_rate: Option<f64>,
    pub lambda_decay_rate: Option<f64>,
    pub balance_max_abs_residual: f64,
    pub balance_min_residual: f64,
    pub higher_energy_max_abs_residual: Option<f64>,
    pub ball: Vec<BallSummary>,
    pub mean_w_drift: f64,
    pub max_interface_residual: f64,
    /// Balance residual is nonnegative at every step.
    pub balance_nonnegative: bool,
    /// Plate volume constant to `1e-10` times the plate area.
    pub volume_preserved: bool,
    /// Energy nonincreasing step to step; only judged at zero load.
    pub energy_monotone: Option<bool>,
}

impl Summary {
    pub fn passed(&self) -> bool {
        self.balance_nonnegative && self.volume_preserved && self.energy_monotone != Some(false)
    }
}

#[derive(Clone, Debug)]
pub struct SimulationOutput {
    pub rows: Vec<Row>,
    pub summary: Summary,
    pub final_state: CoupledState,
}

/// Runs `steps` steps from `state0` and evaluates every diagnostic.
pub fn simulate(coupler: &Coupler, state0: CoupledState, forcing: &Forcing, steps: usize, settings: &DiagnosticSettings) -> Result<SimulationOutput> {
    let stride = settings.snapshot_stride.max(1);
    let (mut tracker, r0) = EnergyTracker::new(coupler, &state0);
    let mut energies = vec![r0];
    let mut reports: Vec<StepReport> = Vec::with_capacity(steps);
    let traj = coupler
        .run(state0, forcing, steps, stride, |s, rep| {
            if let Some(rep) = rep {
                energies.push(tracker.observe(coupler, s, forcing));
                reports.push(rep.clone());
            }
        })
        .map_err(|f| f.error)?;
    let final_state = traj.snapshots.last().cloned().ok_or(Error::TrajectoryTooShort { needed: 1, have: 0 })?;
    let eta = settings.eta.unwrap_or_else(|| default_eta(coupler.params.nu));
    let h = traj.snapshot_dt();
    let nu = coupler.params.nu;

    let mut rows: Vec<Row> = energies
        .iter()
        .enumerate()
        .map(|(n, e)| Row {
            energy: *e,
            e_tilde: None,
            lambda: None,
            ball_residual: None,
            interface_residual: if n == 0 { 0.0 } else { reports[n - 1].interface_residual },
            subiterations: if n == 0 { 0 } else { reports[n - 1].subiterations },
        })
        .collect();

    let mut summary = Summary {
        steps,
        t_end: energies.last().map_or(0.0, |e| e.t),
        eta,
        cbar: None,
        energy_decay_rate: decay_fit(&energies.iter().map(|e| (e.t, e.e_total)).collect::<Vec<_>>()).ok().map(|f| f.rate),
        lambda_decay_rate: None,
        balance_max_abs_residual: energies.iter().map(|e| e.balance_residual.abs()).fold(0.0, f64::max),
        balance_min_residual: energies.iter().map(|e| e.balance_residual).fold(f64::INFINITY, f64::min),
        higher_energy_max_abs_residual: None,
        ball: Vec::new(),
        mean_w_drift: energies.iter().map(|e| (e.mean_w - energies[0].mean_w).abs()).fold(0.0, f64::max),
        max_interface_residual: reports.iter().map(|r| r.interface_residual).fold(0.0, f64::max),
        balance_nonnegative: false,
        volume_preserved: false,
        energy_monotone: None,
    };
    summary.balance_nonnegative = summary.balance_min_residual >= 0.0;
    summary.volume_preserved = summary.mean_w_drift <= 1e-10 * coupler.params.geometry.plate_area();
    if forcing.is_zero() {
        summary.energy_monotone = Some(energies.windows(2).all(|w| w[1].e_total <= w[0].e_total));
    }

    if traj.snapshots.len() >= 3 {
        let terms = higher_terms_series(coupler, &traj)?;
        let lyap = lyapunov_series(&terms, eta, settings.omegas.first().copied().unwrap_or(0.1));
        summary.cbar = lyap.first().map(|l| l.cbar);
        summary.lambda_decay_rate = decay_fit(&lyap.iter().map(|l| (l.t, l.lambda)).collect::<Vec<_>>()).ok().map(|f| f.rate);
        summary.higher_energy_max_abs_residual = Some(higher_energy_audit_from(&terms, nu, h).max_abs_residual);
        let audits: Vec<_> = settings.omegas.iter().map(|&w| ball_audit_from(&terms, nu, h, eta, w)).collect();
        summary.ball = audits
            .iter()
            .map(|a| BallSummary {
                omega: a.omega,
                max_abs_residual: a.max_abs_residual,
            })
            .collect();
        for (k, l) in lyap.iter().enumerate() {
            let row = &mut rows[(k + 1) * stride];
            row.e_tilde = Some(l.e_tilde);
            row.lambda = Some(l.lambda);
            row.ball_residual = audits.first().map(|a| a.residual[k]);
        }
    }
    Ok(SimulationOutput { rows, summary, final_state })
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x:e}"))
}

/// Writes the header line and one line per row. Floats use the shortest
/// representation that round-trips, so identical runs give identical bytes.
pub fn write_csv(w: &mut impl Write, rows: &[Row]) -> Result<()> {
    writeln!(w, "{}", CSV_COLUMNS.join(","))?;
    for r in rows {
        let e = &r.energy;
        writeln!(
            w,
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{},{},{},{:e},{:e},{}",
            e.t,
            e.e_total,
            e.kinetic_fluid,
            e.kinetic_plate,
            e.bending,
            e.membrane,
            e.dissipation_cum,
            e.work_cum,
            e.balance_residual,
            opt(r.e_tilde),
            opt(r.lambda),
            opt(r.ball_residual),
            e.mean_w,
            r.interface_residual,
            r.subiterations
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::ModelParams;
    use crate::grid::BoxGeometry;

    #[test]
    fn zero_run_has_one_row_per_step_and_zero_energy() {
        let c = Coupler::new(ModelParams::new(BoxGeometry::new(1.0, 1.0, 1.0, 4, 4, 4).unwrap(), 1.0, 0.3, 0.01)).unwrap();
        let out = simulate(&c, c.zero_state(), &c.zero_forcing(), 10, &DiagnosticSettings::default()).unwrap();
        assert_eq!(out.rows.len(), 11);
        assert!(out.rows.iter().all(|r| r.energy.e_total == 0.0));
        assert!(out.rows[1].lambda.is_some() && out.rows[0].lambda.is_none() && out.rows[10].lambda.is_none());
        assert!(out.summary.passed());
        let mut buf = Vec::new();
        write_csv(&mut buf, &out.rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 12);
        assert!(text.lines().all(|l| l.split(',').count() == CSV_COLUMNS.len()));
    }
}
