//! Energy functionals and identity audits along trajectories.
//!
//! Time integrals of step quantities use the right-endpoint rule, which is
//! the rule under which implicit Euler satisfies a discrete balance whose
//! defect is exactly the (nonnegative) numerical dissipation. Integrals over
//! stored snapshots use the trapezoidal rule.

use serde::Serialize;

use crate::coupling::{CoupledState, Coupler, Forcing, Trajectory};
use crate::error::{Error, Result};
use crate::grid::{PlateGrid, PlateVector, StaggeredVelocity};
use crate::plate::law::{eps0, stress, SymTensor2};
use crate::plate::{quad_points, quad_weight, PlateField, PlateModel};
use crate::stokes::strain_form;

/// Instantaneous energy terms plus running integrals.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct EnergyReport {
    pub t: f64,
    pub e_total: f64,
    pub kinetic_fluid: f64,
    pub kinetic_plate: f64,
    pub bending: f64,
    pub membrane: f64,
    /// `nu * int E(v, v)`.
    pub dissipation_cum: f64,
    /// `int (G_fl, v) + (G_pl, u_t)`.
    pub work_cum: f64,
    /// `E(0) + work - E(t) - dissipation`; nonnegative for implicit Euler
    /// at zero load.
    pub balance_residual: f64,
    pub mean_w: f64,
}

/// Instantaneous part of [`EnergyReport`]; running integrals are zero.
pub fn energy_total(coupler: &Coupler, state: &CoupledState) -> EnergyReport {
    let fg = &coupler.fluid_grid;
    let pg = &coupler.plate_grid;
    let kinetic_fluid = 0.5 * state.fluid.v.dot(fg, &state.fluid.v);
    let kinetic_plate = state.plate.kinetic(pg);
    let el = coupler.plate.model.energy(pg, &state.plate);
    EnergyReport {
        t: state.time,
        e_total: kinetic_fluid + kinetic_plate + el.bending + el.membrane,
        kinetic_fluid,
        kinetic_plate,
        bending: el.bending,
        membrane: el.membrane,
        mean_w: pg.mean(&state.plate.w),
        ..Default::default()
    }
}

fn power(coupler: &Coupler, state: &CoupledState, forcing: &Forcing) -> f64 {
    state.fluid.v.dot(&coupler.fluid_grid, &forcing.fluid) + state.plate.velocity().dot(&coupler.plate_grid, &forcing.plate)
}

fn dissipation_rate(coupler: &Coupler, v: &StaggeredVelocity) -> f64 {
    coupler.params.nu * strain_form(&coupler.fluid_grid, v, v)
}

/// Streaming energy-balance bookkeeping, one call per time step.
#[derive(Clone, Debug)]
pub struct EnergyTracker {
    e0: f64,
    t_prev: f64,
    dissipation: f64,
    work: f64,
}

impl EnergyTracker {
    pub fn new(coupler: &Coupler, initial: &CoupledState) -> (Self, EnergyReport) {
        let r = energy_total(coupler, initial);
        let tracker = Self {
            e0: r.e_total,
            t_prev: initial.time,
            dissipation: 0.0,
            work: 0.0,
        };
        (tracker, r)
    }

    /// Accounts the step ending at `state`.
    pub fn observe(&mut self, coupler: &Coupler, state: &CoupledState, forcing: &Forcing) -> EnergyReport {
        let dt = state.time - self.t_prev;
        self.t_prev = state.time;
        self.dissipation += dt * dissipation_rate(coupler, &state.fluid.v);
        self.work += dt * power(coupler, state, forcing);
        let mut r = energy_total(coupler, state);
        r.dissipation_cum = self.dissipation;
        r.work_cum = self.work;
        r.balance_residual = self.e0 + self.work - r.e_total - self.dissipation;
        r
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BalanceAudit {
    pub reports: Vec<EnergyReport>,
    pub max_abs_residual: f64,
    pub min_residual: f64,
}

/// Energy balance along a trajectory stored at every step.
pub fn energy_balance_audit(coupler: &Coupler, traj: &Trajectory, forcing: &Forcing) -> Result<BalanceAudit> {
    if traj.stride != 1 {
        return Err(Error::Parameter {
            name: "stride",
            reason: format!("energy balance audit needs every step, got stride {}", traj.stride),
        });
    }
    let first = traj.snapshots.first().ok_or(Error::TrajectoryTooShort { needed: 1, have: 0 })?;
    let (mut tracker, r0) = EnergyTracker::new(coupler, first);
    let mut reports = vec![r0];
    for s in &traj.snapshots[1..] {
        reports.push(tracker.observe(coupler, s, forcing));
    }
    let max_abs_residual = reports.iter().map(|r| r.balance_residual.abs()).fold(0.0, f64::max);
    let min_residual = reports.iter().map(|r| r.balance_residual).fold(f64::INFINITY, f64::min);
    Ok(BalanceAudit {
        reports,
        max_abs_residual,
        min_residual,
    })
}

/// Time derivatives at a stored snapshot: `v_t`, `u_t`, `u_tt`, `v_tt`.
/// Centred differences over the snapshot spacing; `u_t` is the stored plate
/// velocity, which is the stepper's own difference quotient.
#[derive(Clone, Debug)]
pub struct TimeDerivedState {
    pub v_t: StaggeredVelocity,
    pub u_t: PlateVector,
    pub u_tt: PlateVector,
    pub v_tt: StaggeredVelocity,
}

/// Derivatives at snapshot `k`, which must have neighbours on both sides.
pub fn time_derivatives(traj: &Trajectory, k: usize) -> Result<TimeDerivedState> {
    let n = traj.snapshots.len();
    if n < 3 {
        return Err(Error::TrajectoryTooShort { needed: 3, have: n });
    }
    if k == 0 || k + 1 >= n {
        return Err(Error::Parameter {
            name: "k",
            reason: format!("snapshot {k} has no neighbours on both sides (of {n})"),
        });
    }
    let h = traj.snapshot_dt();
    let (a, b, c) = (&traj.snapshots[k - 1], &traj.snapshots[k], &traj.snapshots[k + 1]);
    let mut v_t = c.fluid.v.clone();
    v_t.axpy(-1.0, &a.fluid.v);
    v_t.scale(0.5 / h);
    let mut v_tt = c.fluid.v.clone();
    v_tt.axpy(-2.0, &b.fluid.v);
    v_tt.axpy(1.0, &a.fluid.v);
    v_tt.scale(1.0 / (h * h));
    let u_tt = c.plate.velocity().sub(&a.plate.velocity()).scaled(0.5 / h);
    Ok(TimeDerivedState {
        v_t,
        u_t: b.plate.velocity(),
        u_tt,
        v_tt,
    })
}

/// Plate terms of the higher-order energy at one state.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct PlateRateTerms {
    /// `|u_tt|^2`.
    pub acc_sq: f64,
    /// `|lap w_t|^2`.
    pub bend_sq: f64,
    /// `(C(P(u, u_t)), P(u, u_t))`.
    pub cpp: f64,
    /// `(C(P(u)), grad w_t (x) grad w_t)`.
    pub cpww: f64,
    /// `(C(P(u, u_t)), grad w_t (x) grad w_t)`.
    pub q: f64,
}

pub fn plate_rate_terms(pg: &PlateGrid, model: &PlateModel, u: &PlateField, ut: &PlateVector, utt: &PlateVector) -> PlateRateTerms {
    let wq = quad_weight(pg);
    let mut t = PlateRateTerms {
        acc_sq: utt.dot(pg, utt),
        bend_sq: 2.0 * model.bending_energy(pg, &ut.z),
        ..Default::default()
    };
    for qp in quad_points(pg) {
        let mut pr = eps0(qp.grad(pg, &ut.x), qp.grad(pg, &ut.y));
        if model.nonlinear {
            let gw = qp.grad(pg, &u.w);
            let gwt = qp.grad(pg, &ut.z);
            pr = pr.add(&SymTensor2::sym_outer(gw, gwt));
            let ww = SymTensor2::sym_outer(gwt, gwt);
            let p = model.strain_at(pg, &qp, &u.u1, &u.u2, &u.w);
            t.cpww += wq * stress(&p, model.mu).contract(&ww);
            t.q += wq * stress(&pr, model.mu).contract(&ww);
        }
        t.cpp += wq * stress(&pr, model.mu).contract(&pr);
    }
    t
}

/// Scalar ingredients of the higher-order energy, the Lyapunov function and
/// the Ball functionals at one snapshot.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct HigherTerms {
    pub t: f64,
    /// `|v_t|^2`.
    pub v_sq: f64,
    pub plate: PlateRateTerms,
    /// `E(v_t, v_t)` (without `nu`).
    pub evv: f64,
    /// `(u_t, u_tt) + (v_t, N0 u_t)`.
    pub cross: f64,
    /// `(v_t, N0 u_tt) - nu E(v_t, N0 u_t)`.
    pub coupling: f64,
}

impl HigherTerms {
    /// Higher-order energy.
    pub fn e_tilde(&self) -> f64 {
        0.5 * (self.v_sq + self.plate.acc_sq + self.plate.bend_sq + self.plate.cpp + self.plate.cpww)
    }

    /// Lyapunov function without its additive constant.
    pub fn lambda_shifted(&self, eta: f64) -> f64 {
        self.e_tilde() + eta * self.cross
    }

    /// Dissipation functional of the exponential-weight identity.
    pub fn ball_l(&self, nu: f64, eta: f64, omega: f64) -> f64 {
        let p = &self.plate;
        (eta - omega) * (p.bend_sq + p.cpp + p.cpww) - (eta + omega) * p.acc_sq - omega * self.v_sq + nu * self.evv
    }

    /// Compact functional of the exponential-weight identity.
    pub fn ball_k(&self, eta: f64, omega: f64) -> f64 {
        eta * self.coupling + 1.5 * self.plate.q + 2.0 * omega * eta * self.cross
    }
}

pub fn higher_terms(coupler: &Coupler, state: &CoupledState, tds: &TimeDerivedState) -> Result<HigherTerms> {
    let fg = &coupler.fluid_grid;
    let pg = &coupler.plate_grid;
    let nu = coupler.params.nu;
    let n0u = coupler.stokes.lifting_n0(&tds.u_t)?;
    let n0ut = coupler.stokes.lifting_n0(&tds.u_tt)?;
    let cross = tds.u_t.dot(pg, &tds.u_tt) + tds.v_t.dot(fg, &n0u.v);
    Ok(HigherTerms {
        t: state.time,
        v_sq: tds.v_t.dot(fg, &tds.v_t),
        plate: plate_rate_terms(pg, &coupler.plate.model, &state.plate, &tds.u_t, &tds.u_tt),
        evv: strain_form(fg, &tds.v_t, &tds.v_t),
        cross,
        coupling: tds.v_t.dot(fg, &n0ut.v) - nu * strain_form(fg, &tds.v_t, &n0u.v),
    })
}

fn par_map<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let workers = std::thread::available_parallelism().map_or(1, |p| p.get()).min(n.max(1));
    let chunk = n.div_ceil(workers.max(1)).max(1);
    let f = &f;
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..n)
            .step_by(chunk)
            .map(|lo| s.spawn(move || (lo..(lo + chunk).min(n)).map(f).collect::<Vec<_>>()))
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("diagnostic worker panicked")).collect()
    })
}

/// [`HigherTerms`] at every snapshot with neighbours on both sides.
pub fn higher_terms_series(coupler: &Coupler, traj: &Trajectory) -> Result<Vec<HigherTerms>> {
    let n = traj.snapshots.len();
    if n < 3 {
        return Err(Error::TrajectoryTooShort { needed: 3, have: n });
    }
    par_map(n - 2, |i| {
        let k = i + 1;
        let tds = time_derivatives(traj, k)?;
        higher_terms(coupler, &traj.snapshots[k], &tds)
    })
    .into_iter()
    .collect()
}

fn trapezoid_cumulative(h: f64, f: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(f.len());
    let mut acc = 0.0;
    for (j, &v) in f.iter().enumerate() {
        if j > 0 {
            acc += 0.5 * h * (f[j - 1] + v);
        }
        out.push(acc);
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct HigherEnergyAudit {
    pub times: Vec<f64>,
    pub e_tilde: Vec<f64>,
    /// `E~(t) + nu int E(v_t, v_t) - E~(t0) - 3/2 int Q`.
    pub residual: Vec<f64>,
    pub max_abs_residual: f64,
}

pub fn higher_energy_audit_from(terms: &[HigherTerms], nu: f64, h: f64) -> HigherEnergyAudit {
    let e: Vec<f64> = terms.iter().map(HigherTerms::e_tilde).collect();
    let d = trapezoid_cumulative(h, &terms.iter().map(|t| nu * t.evv).collect::<Vec<_>>());
    let q = trapezoid_cumulative(h, &terms.iter().map(|t| t.plate.q).collect::<Vec<_>>());
    let residual: Vec<f64> = (0..terms.len()).map(|j| e[j] + d[j] - e[0] - 1.5 * q[j]).collect();
    HigherEnergyAudit {
        times: terms.iter().map(|t| t.t).collect(),
        max_abs_residual: residual.iter().fold(0.0, |m, r| m.max(r.abs())),
        e_tilde: e,
        residual,
    }
}

/// Higher-order energy equality over the interior snapshots of `traj`.
pub fn higher_energy_audit(coupler: &Coupler, traj: &Trajectory) -> Result<HigherEnergyAudit> {
    let terms = higher_terms_series(coupler, traj)?;
    Ok(higher_energy_audit_from(&terms, coupler.params.nu, traj.snapshot_dt()))
}

/// Default cross-term weight `0.1 min(nu, 1)`.
pub fn default_eta(nu: f64) -> f64 {
    0.1 * nu.min(1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LyapunovReport {
    pub t: f64,
    pub e_tilde: f64,
    /// `eta [(u_t, u_tt) + (v_t, N0 u_t)]`.
    pub cross_terms: f64,
    pub lambda: f64,
    pub eta: f64,
    pub cbar: f64,
    pub omega: f64,
}

pub fn lyapunov_report(terms: &HigherTerms, eta: f64, cbar: f64, omega: f64) -> LyapunovReport {
    let e_tilde = terms.e_tilde();
    let cross_terms = eta * terms.cross;
    LyapunovReport {
        t: terms.t,
        e_tilde,
        cross_terms,
        lambda: e_tilde + cross_terms + cbar,
        eta,
        cbar,
        omega,
    }
}

pub fn lyapunov(coupler: &Coupler, state: &CoupledState, tds: &TimeDerivedState, eta: f64, cbar: f64, omega: f64) -> Result<LyapunovReport> {
    Ok(lyapunov_report(&higher_terms(coupler, state, tds)?, eta, cbar, omega))
}

/// Positivity constant fixed from the first snapshot so that the Lyapunov
/// function starts at least at one.
pub fn choose_cbar(first: &HigherTerms, eta: f64) -> f64 {
    (-first.lambda_shifted(eta)).max(0.0) + 1.0
}

pub fn lyapunov_series(terms: &[HigherTerms], eta: f64, omega: f64) -> Vec<LyapunovReport> {
    let cbar = terms.first().map_or(1.0, |t| choose_cbar(t, eta));
    terms.iter().map(|t| lyapunov_report(t, eta, cbar, omega)).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct BallAudit {
    pub omega: f64,
    pub eta: f64,
    pub times: Vec<f64>,
    /// Residual with `s` the first snapshot, as a function of `t`.
    pub residual: Vec<f64>,
    /// Maximum over all snapshot pairs `s <= t`.
    pub max_abs_residual: f64,
    /// Largest `|Lambda - Cbar|` along the run, for scaling.
    pub lambda_scale: f64,
}

/// Exponential-weight identity for the shifted Lyapunov function
/// `Lambda - Cbar`:
/// `Lambda(t) + int_s^t L e^{-2w(t-r)} dr - Lambda(s) e^{-2w(t-s)} - int_s^t K e^{-2w(t-r)} dr`.
pub fn ball_audit_from(terms: &[HigherTerms], nu: f64, h: f64, eta: f64, omega: f64) -> BallAudit {
    let lam: Vec<f64> = terms.iter().map(|t| t.lambda_shifted(eta)).collect();
    let f: Vec<f64> = terms.iter().map(|t| t.ball_l(nu, eta, omega) - t.ball_k(eta, omega)).collect();
    let decay = (-2.0 * omega * h).exp();
    let n = terms.len();
    let mut residual = vec![0.0; n];
    let mut max_abs: f64 = 0.0;
    for s in 0..n {
        let mut integral = 0.0;
        let mut weight = 1.0;
        for t in s..n {
            if t > s {
                integral = decay * integral + 0.5 * h * (decay * f[t - 1] + f[t]);
                weight *= decay;
            }
            let r = lam[t] + integral - lam[s] * weight;
            if s == 0 {
                residual[t] = r;
            }
            max_abs = max_abs.max(r.abs());
        }
    }
    BallAudit {
        omega,
        eta,
        times: terms.iter().map(|t| t.t).collect(),
        residual,
        max_abs_residual: max_abs,
        lambda_scale: lam.iter().fold(0.0, |m, v| m.max(v.abs())),
    }
}

pub fn ball_identity_audit(coupler: &Coupler, traj: &Trajectory, eta: f64, omega: f64) -> Result<BallAudit> {
    let terms = higher_terms_series(coupler, traj)?;
    Ok(ball_audit_from(&terms, coupler.params.nu, traj.snapshot_dt(), eta, omega))
}

/// `value ~ amplitude exp(-rate t) + offset`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecayFit {
    pub rate: f64,
    pub offset: f64,
    pub amplitude: f64,
    /// RMS misfit in value space.
    pub rms: f64,
}

impl DecayFit {
    pub fn eval(&self, t: f64) -> f64 {
        self.amplitude * (-self.rate * t).exp() + self.offset
    }
}

fn check_series(series: &[(f64, f64)]) -> Result<()> {
    if series.len() < 10 {
        return Err(Error::Fit(format!("need at least 10 samples, got {}", series.len())));
    }
    if series.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
        return Err(Error::Fit("non-finite sample".into()));
    }
    Ok(())
}

fn tail(series: &[(f64, f64)]) -> &[(f64, f64)] {
    &series[series.len() / 2..]
}

fn log_linear(series: &[(f64, f64)], offset: f64) -> Result<DecayFit> {
    let mut pts = Vec::with_capacity(series.len());
    for &(t, v) in series {
        let d = v - offset;
        if !(d > 0.0) {
            return Err(Error::Fit(format!("non-positive value {d:e} at t = {t} after removing offset {offset:e}")));
        }
        pts.push((t, d.ln()));
    }
    let n = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = pts.iter().map(|p| (p.0 - tm).powi(2)).sum();
    let sty: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - ym)).sum();
    let slope = if stt > 0.0 { sty / stt } else { 0.0 };
    let icpt = ym - slope * tm;
    let mut fit = DecayFit {
        rate: -slope,
        offset,
        amplitude: icpt.exp(),
        rms: 0.0,
    };
    fit.rms = (series.iter().map(|&(t, v)| (v - fit.eval(t)).powi(2)).sum::<f64>() / n).sqrt();
    Ok(fit)
}

/// Exponential rate with a known offset, fitted on the tail half.
pub fn decay_fit_with_offset(series: &[(f64, f64)], offset: f64) -> Result<DecayFit> {
    check_series(series)?;
    log_linear(tail(series), offset)
}

/// Exponential rate and offset, fitted on the tail half. The offset is
/// chosen in `[0, min value)` by golden-section search on the value-space
/// misfit of the log-linear fit.
pub fn decay_fit(series: &[(f64, f64)]) -> Result<DecayFit> {
    check_series(series)?;
    let tail = tail(series);
    let vmin = tail.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    if !(vmin > 0.0) {
        return Err(Error::Fit(format!("series must be positive, minimum is {vmin:e}")));
    }
    let misfit = |c: f64| log_linear(tail, c).map_or(f64::INFINITY, |f| f.rms);
    let g = 0.5 * (5.0_f64.sqrt() - 1.0);
    let (mut a, mut b) = (0.0, vmin * (1.0 - 1e-12));
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (misfit(x1), misfit(x2));
    for _ in 0..200 {
        if b - a <= 1e-15 * vmin {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = misfit(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = misfit(x2);
        }
    }
    let best = [(0.0, misfit(0.0)), (x1, f1), (x2, f2)]
        .into_iter()
        .fold((0.0, f64::INFINITY), |acc, p| if p.1 < acc.1 { p } else { acc });
    log_linear(tail, best.0)
}
