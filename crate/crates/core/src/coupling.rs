//! Strongly coupled partitioned stepper.
//!
//! Each step iterates on the interface velocity `lambda`: the fluid takes an
//! implicit step with `lambda` as top-face data, its interface load drives an
//! implicit plate step, and the resulting plate velocity is the next
//! candidate. Aitken relaxation accelerates the fixed point. The plate step
//! preserves the total of `w`, so every candidate is an admissible fluid
//! boundary datum.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::{build_grids, BoxGeometry, FluidGrid, PlateGrid, PlateVector, StaggeredVelocity};
use crate::plate::{PlateField, PlateModel, PlateSolver};
use crate::stokes::{FluidField, StokesWorkspace};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub geometry: BoxGeometry,
    pub nu: f64,
    pub mu: f64,
    pub dt: f64,
    pub tol_couple: f64,
    pub tol_linear: f64,
    pub picard_tol: f64,
    pub picard_max: usize,
    pub max_subiterations: usize,
    pub nonlinear: bool,
}

impl ModelParams {
    pub fn new(geometry: BoxGeometry, nu: f64, mu: f64, dt: f64) -> Self {
        Self {
            geometry,
            nu,
            mu,
            dt,
            tol_couple: 1e-8,
            tol_linear: 1e-10,
            picard_tol: 1e-9,
            picard_max: 50,
            max_subiterations: 200,
            nonlinear: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        crate::plate::law::check_poisson(self.mu)?;
        let positive = [
            ("nu", self.nu),
            ("dt", self.dt),
            ("tol_couple", self.tol_couple),
            ("tol_linear", self.tol_linear),
            ("picard_tol", self.picard_tol),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Parameter {
                    name,
                    reason: format!("must be positive, got {v}"),
                });
            }
        }
        if self.picard_max == 0 || self.max_subiterations == 0 {
            return Err(Error::Parameter {
                name: "picard_max",
                reason: "iteration limits must be at least 1".into(),
            });
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("params serialize");
        hex::encode(Sha256::digest(&json))
    }
}

/// External loads: fluid body force on faces, plate load density on nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct Forcing {
    pub fluid: StaggeredVelocity,
    pub plate: PlateVector,
}

impl Forcing {
    pub fn zero(fg: &FluidGrid, pg: &PlateGrid) -> Self {
        Self {
            fluid: StaggeredVelocity::zeros(fg),
            plate: PlateVector::zeros(pg),
        }
    }

    pub fn uniform(fg: &FluidGrid, pg: &PlateGrid, g_fl: [f64; 3], g_pl: [f64; 3]) -> Self {
        let mut plate = PlateVector::zeros(pg);
        for (c, v) in plate.components_mut().into_iter().zip(g_pl) {
            c.fill(v);
            pg.zero_boundary(c);
        }
        Self {
            fluid: StaggeredVelocity::sample_interior(fg, |_, _, _| g_fl),
            plate,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.fluid.max_abs() == 0.0 && self.plate.max_abs() == 0.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoupledState {
    pub fluid: FluidField,
    pub plate: PlateField,
    pub time: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct StepReport {
    pub subiterations: usize,
    pub interface_residual: f64,
    pub fluid_iterations: usize,
    pub fluid_residual: f64,
    pub picard_iterations: usize,
    pub picard_residual: f64,
    pub history: Vec<f64>,
}

/// Grids, factorizations and parameters for one coupled simulation.
#[derive(Clone, Debug)]
pub struct Coupler {
    pub params: ModelParams,
    pub fluid_grid: FluidGrid,
    pub plate_grid: PlateGrid,
    pub stokes: StokesWorkspace,
    pub plate: PlateSolver,
}

impl Coupler {
    pub fn new(params: ModelParams) -> Result<Self> {
        params.validate()?;
        let (fg, pg) = build_grids(params.geometry)?;
        let stokes = StokesWorkspace::new(fg, pg, params.nu, params.tol_linear)?;
        let model = PlateModel::new(params.mu, params.nonlinear)?;
        let plate = PlateSolver::new(pg, model, Some(params.dt), params.picard_tol, params.picard_max)?;
        Ok(Self {
            params,
            fluid_grid: fg,
            plate_grid: pg,
            stokes,
            plate,
        })
    }

    pub fn zero_state(&self) -> CoupledState {
        CoupledState {
            fluid: FluidField::zeros(&self.fluid_grid, &self.plate_grid),
            plate: PlateField::zeros(&self.plate_grid),
            time: 0.0,
        }
    }

    pub fn zero_forcing(&self) -> Forcing {
        Forcing::zero(&self.fluid_grid, &self.plate_grid)
    }

    /// Builds a compatible initial state. `v0` supplies interior fluid
    /// velocities; its zero-trace divergence-free part is kept and the
    /// Stokes lift of the plate velocity is added, so the fluid trace equals
    /// `u1` exactly.
    pub fn make_initial_state(&self, v0: Option<&StaggeredVelocity>, u0: &PlateVector, u1: &PlateVector) -> Result<CoupledState> {
        let pg = &self.plate_grid;
        let plate = PlateField::from_parts(u0.clone(), u1.clone());
        plate.check(pg).map_err(|e| Error::InitialData(format!("plate data violate clamped conditions: {e}")))?;
        let mean = pg.mean(&u1.z);
        let scale = u1.z.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        if mean.abs() > 1e-10 * scale {
            return Err(Error::InitialData(format!("initial w velocity has nonzero mean {mean:e}")));
        }
        // remove rounding-level mean so the lift is exactly compatible
        let mut u1 = u1.clone();
        let n = pg.interior_count() as f64;
        let shift: f64 = pg.interior_nodes().map(|(i, j)| u1.z[[i, j]]).sum::<f64>() / n;
        for (i, j) in pg.interior_nodes().collect::<Vec<_>>() {
            u1.z[[i, j]] -= shift;
        }
        let lift = self.stokes.lifting_n0(&u1)?;
        let mut v = lift.v.clone();
        if let Some(v0) = v0 {
            v0.check(&self.fluid_grid)?;
            let mut inner = v0.clone();
            inner.clear_boundary();
            let mut lifted_inner = lift.v.clone();
            lifted_inner.clear_boundary();
            inner.axpy(-1.0, &lifted_inner);
            self.stokes.project_interior(&mut inner);
            v.axpy(1.0, &inner);
        }
        let mut plate = plate;
        plate.wt = u1.z.clone();
        Ok(CoupledState {
            fluid: FluidField {
                v,
                p: lift.p,
                boundary: u1,
            },
            plate,
            time: 0.0,
        })
    }

    /// Advances one step of size `params.dt`.
    pub fn advance(&self, state: &CoupledState, forcing: &Forcing) -> Result<(CoupledState, StepReport)> {
        let tol = self.params.tol_couple;
        let mut lambda = state.plate.velocity();
        let mut report = StepReport::default();
        let mut omega = 0.5;
        let mut prev_r: Option<PlateVector> = None;
        loop {
            let (fluid, fstats) = self
                .stokes
                .fluid_substep(&state.fluid.v, &lambda, &forcing.fluid, self.params.dt)?;
            let load = self.stokes.interface_load(&fluid);
            let (plate, pstats) = self.plate.substep(&state.plate, &load, &forcing.plate)?;
            let candidate = plate.velocity();
            let r = candidate.sub(&lambda);
            let res = r.max_abs();
            report.subiterations += 1;
            report.fluid_iterations += fstats.iterations;
            report.fluid_residual = fstats.residual;
            report.picard_iterations += pstats.picard_iterations;
            report.picard_residual = pstats.picard_residual;
            report.history.push(res);
            report.interface_residual = res;
            if res <= tol {
                let next = CoupledState {
                    fluid,
                    plate,
                    time: state.time + self.params.dt,
                };
                return Ok((next, report));
            }
            if report.subiterations >= self.params.max_subiterations || !res.is_finite() {
                return Err(Error::CouplingDivergence { history: report.history });
            }
            if let Some(pr) = &prev_r {
                let dr = r.sub(pr);
                let denom = dr.dot(&self.plate_grid, &dr);
                if denom > 0.0 {
                    omega = -omega * pr.dot(&self.plate_grid, &dr) / denom;
                }
                omega = omega.clamp(0.05, 1.0);
            }
            lambda.axpy(omega, &r);
            prev_r = Some(r);
        }
    }

    /// Advances `steps` steps, keeping every `stride`-th state (and the
    /// first), and calls `observer` on the initial state and after each step.
    pub fn run(
        &self,
        state0: CoupledState,
        forcing: &Forcing,
        steps: usize,
        stride: usize,
        mut observer: impl FnMut(&CoupledState, Option<&StepReport>),
    ) -> std::result::Result<Trajectory, RunFailure> {
        let stride = stride.max(1);
        let mut traj = Trajectory {
            dt: self.params.dt,
            stride,
            snapshots: vec![state0.clone()],
            reports: Vec::with_capacity(steps),
        };
        observer(&state0, None);
        let mut state = state0;
        for n in 0..steps {
            match self.advance(&state, forcing) {
                Ok((next, report)) => {
                    observer(&next, Some(&report));
                    state = next;
                    if (n + 1) % stride == 0 {
                        traj.snapshots.push(state.clone());
                    }
                    traj.reports.push(report);
                }
                Err(error) => {
                    return Err(RunFailure {
                        step: n,
                        error,
                        last_state: Box::new(state),
                        partial: traj,
                    })
                }
            }
        }
        Ok(traj)
    }

    /// Number of steps for a horizon `t_end`.
    pub fn steps_for(&self, t_end: f64) -> Result<usize> {
        if !(t_end.is_finite() && t_end > 0.0) {
            return Err(Error::Parameter {
                name: "t_end",
                reason: format!("must be positive, got {t_end}"),
            });
        }
        Ok(((t_end / self.params.dt) - 1e-9).ceil().max(1.0) as usize)
    }
}

/// Stored states of a run with uniform spacing `dt * stride`.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub dt: f64,
    pub stride: usize,
    pub snapshots: Vec<CoupledState>,
    pub reports: Vec<StepReport>,
}

impl Trajectory {
    pub fn snapshot_dt(&self) -> f64 {
        self.dt * self.stride as f64
    }
}

#[derive(Debug)]
pub struct RunFailure {
    pub step: usize,
    pub error: Error,
    pub last_state: Box<CoupledState>,
    pub partial: Trajectory,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "run aborted at step {}: {}", self.step, self.error)
    }
}

impl std::error::Error for RunFailure {}
