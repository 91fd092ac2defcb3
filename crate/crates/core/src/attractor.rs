//! Long-time experiments: stationary states, absorbing balls and trajectory
//! separation.

use serde::Serialize;

use crate::coupling::{CoupledState, Coupler, Forcing, ModelParams};
use crate::diagnostics::{decay_fit, energy_total};
use crate::error::{Error, Result};
use crate::grid::{plate_norms, PlateVector};
use crate::plate::{PlateField, PlateSolver};
use crate::stokes::FluidField;

#[derive(Clone, Debug)]
pub struct StationaryState {
    pub plate: PlateField,
    pub fluid: FluidField,
    /// Max-norm of the static plate equation residual, per unit area.
    pub plate_residual: f64,
    pub picard_iterations: usize,
    /// Uniform pressure keeping the plate volume fixed.
    pub multiplier: f64,
}

impl StationaryState {
    pub fn to_state(&self) -> CoupledState {
        CoupledState {
            fluid: self.fluid.clone(),
            plate: self.plate.clone(),
            time: 0.0,
        }
    }
}

/// Equilibrium under time-independent loads: steady Stokes with a resting
/// interface, then the static plate problem under the resulting traction.
pub fn stationary_solve(coupler: &Coupler, forcing: &Forcing) -> Result<StationaryState> {
    let pg = coupler.plate_grid;
    let p = &coupler.params;
    let fluid = coupler.stokes.solve_stokes(&forcing.fluid, &PlateVector::zeros(&pg))?;
    let mut base = coupler.stokes.interface_load(&fluid);
    base.axpy(pg.node_area(), &forcing.plate);
    for c in base.components_mut() {
        pg.zero_boundary(c);
    }
    let solver = PlateSolver::new(pg, coupler.plate.model, None, p.picard_tol.min(1e-12), p.picard_max.max(200))?;
    let (disp, stats) = solver.static_solve(&base)?;
    let mut r = coupler.plate.model.gradient(&pg, &disp);
    r.axpy(-1.0, &base);
    for (i, j) in pg.interior_nodes() {
        r.z[[i, j]] -= stats.multiplier * pg.node_area();
    }
    Ok(StationaryState {
        plate: PlateField::from_parts(disp, PlateVector::zeros(&pg)),
        fluid,
        plate_residual: r.max_abs() / pg.node_area(),
        picard_iterations: stats.picard_iterations,
        multiplier: stats.multiplier,
    })
}

/// Discrete phase-space distance: fluid L2, `lap w` and in-plane H1 for the
/// displacements, L2 for the plate velocity.
pub fn h_distance(coupler: &Coupler, a: &CoupledState, b: &CoupledState) -> f64 {
    let pg = &coupler.plate_grid;
    let mut dv = a.fluid.v.clone();
    dv.axpy(-1.0, &b.fluid.v);
    let du = a.plate.displacement().sub(&b.plate.displacement());
    let dvel = a.plate.velocity().sub(&b.plate.velocity());
    let bend = 2.0 * coupler.plate.model.bending_energy(pg, &du.z);
    let h1 = |f| plate_norms(pg, f).h1.powi(2);
    (dv.dot(&coupler.fluid_grid, &dv) + bend + h1(&du.x) + h1(&du.y) + dvel.dot(pg, &dvel)).sqrt()
}

/// Candidate absorbing radius `2 E(stationary) + c_probe`.
pub fn absorbing_radius(coupler: &Coupler, stationary: &StationaryState, c_probe: f64) -> f64 {
    2.0 * energy_total(coupler, &stationary.to_state()).e_total + c_probe
}

#[derive(Clone, Debug, Serialize)]
pub struct TrajectoryProbe {
    pub initial_energy: f64,
    /// First time with energy at most the radius.
    pub entry_time: Option<f64>,
    pub sup_energy_after_entry: Option<f64>,
    pub left_after_entry: bool,
    pub decay_rate: Option<f64>,
    pub energy: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeReport {
    pub radius: f64,
    pub t_end: f64,
    pub trajectories: Vec<TrajectoryProbe>,
}

impl ProbeReport {
    /// Every trajectory entered the ball and stayed.
    pub fn absorbed(&self) -> bool {
        self.trajectories.iter().all(|t| t.entry_time.is_some() && !t.left_after_entry)
    }
}

fn probe_one(params: &ModelParams, state0: &CoupledState, forcing: &Forcing, steps: usize, radius: f64) -> Result<TrajectoryProbe> {
    let coupler = Coupler::new(params.clone())?;
    let mut energy = Vec::with_capacity(steps + 1);
    coupler
        .run(state0.clone(), forcing, steps, steps + 1, |s, _| {
            energy.push((s.time, energy_total(&coupler, s).e_total));
        })
        .map_err(|f| f.error)?;
    let entry = energy.iter().position(|&(_, e)| e <= radius);
    let after = entry.map(|k| &energy[k..]);
    Ok(TrajectoryProbe {
        initial_energy: energy[0].1,
        entry_time: entry.map(|k| energy[k].0),
        sup_energy_after_entry: after.map(|a| a.iter().map(|p| p.1).fold(0.0, f64::max)),
        left_after_entry: after.is_some_and(|a| a.iter().any(|p| p.1 > radius)),
        decay_rate: decay_fit(&energy).ok().map(|f| f.rate),
        energy,
    })
}

/// Runs every initial state to `t_end` concurrently, each with its own
/// solver workspaces, and records entry into the ball `{E <= radius}`.
pub fn dissipativity_probe(params: &ModelParams, initial: &[CoupledState], forcing: &Forcing, t_end: f64, radius: f64) -> Result<ProbeReport> {
    if initial.len() < 2 {
        return Err(Error::Parameter {
            name: "initial_states",
            reason: format!("need at least two initial states, got {}", initial.len()),
        });
    }
    let steps = Coupler::new(params.clone())?.steps_for(t_end)?;
    let results: Vec<Result<TrajectoryProbe>> = std::thread::scope(|s| {
        let handles: Vec<_> = initial
            .iter()
            .map(|st| s.spawn(move || probe_one(params, st, forcing, steps, radius)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("probe worker panicked")).collect()
    });
    Ok(ProbeReport {
        radius,
        t_end,
        trajectories: results.into_iter().collect::<Result<_>>()?,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SeparationReport {
    pub times: Vec<f64>,
    pub distance: Vec<f64>,
    /// Exponential contraction rate of the distance, when fittable.
    pub contraction_rate: Option<f64>,
}

/// Distance between two trajectories, sampled every `stride` steps.
pub fn separation_probe(
    params: &ModelParams,
    a: &CoupledState,
    b: &CoupledState,
    forcing: &Forcing,
    t_end: f64,
    stride: usize,
) -> Result<SeparationReport> {
    let coupler = Coupler::new(params.clone())?;
    let steps = coupler.steps_for(t_end)?;
    let run = |st: &CoupledState| {
        let c = Coupler::new(params.clone())?;
        c.run(st.clone(), forcing, steps, stride, |_, _| {}).map_err(|f| f.error)
    };
    let (ta, tb) = std::thread::scope(|s| {
        let ha = s.spawn(|| run(a));
        let hb = s.spawn(|| run(b));
        (ha.join().expect("probe worker panicked"), hb.join().expect("probe worker panicked"))
    });
    let (ta, tb) = (ta?, tb?);
    let times: Vec<f64> = ta.snapshots.iter().map(|s| s.time).collect();
    let distance: Vec<f64> = ta.snapshots.iter().zip(&tb.snapshots).map(|(x, y)| h_distance(&coupler, x, y)).collect();
    let series: Vec<(f64, f64)> = times.iter().cloned().zip(distance.iter().cloned()).collect();
    Ok(SeparationReport {
        contraction_rate: decay_fit(&series).ok().map(|f| f.rate),
        times,
        distance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::BoxGeometry;
    use crate::profiles::Profile;

    fn params() -> ModelParams {
        ModelParams::new(BoxGeometry::new(1.0, 1.0, 1.0, 6, 6, 6).unwrap(), 1.0, 0.3, 0.01)
    }

    fn small_forcing(c: &Coupler) -> Forcing {
        let mut f = Forcing::uniform(&c.fluid_grid, &c.plate_grid, [0.0, 0.0, 0.01], [0.01, -0.005, 0.0]);
        f.plate.z = Profile::Bump { amplitude: 0.01 }.sample(&c.plate_grid).z;
        f
    }

    #[test]
    fn zero_load_gives_zero_state() {
        let c = Coupler::new(params()).unwrap();
        let st = stationary_solve(&c, &c.zero_forcing()).unwrap();
        assert!(st.plate.displacement().max_abs() == 0.0 && st.fluid.v.max_abs() == 0.0);
        assert_eq!(st.plate_residual, 0.0);
    }

    #[test]
    fn stationary_state_is_a_fixed_point() {
        let c = Coupler::new(params()).unwrap();
        let f = small_forcing(&c);
        let st = stationary_solve(&c, &f).unwrap();
        assert!(st.plate_residual < 1e-9, "{}", st.plate_residual);
        assert!(st.plate.w.iter().any(|v| v.abs() > 1e-8));
        let s0 = st.to_state();
        let (s1, _) = c.advance(&s0, &f).unwrap();
        let d = h_distance(&c, &s0, &s1);
        assert!(d <= 10.0 * c.params.tol_couple, "moved by {d:e}");
    }

    #[test]
    fn identical_states_do_not_separate() {
        let p = params();
        let c = Coupler::new(p.clone()).unwrap();
        let u0 = Profile::Bump { amplitude: 0.01 }.sample(&c.plate_grid);
        let s = c.make_initial_state(None, &u0, &PlateVector::zeros(&c.plate_grid)).unwrap();
        let r = separation_probe(&p, &s, &s, &c.zero_forcing(), 0.05, 1).unwrap();
        assert_eq!(r.distance.len(), 6);
        assert!(r.distance.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn probe_needs_two_states() {
        let p = params();
        let c = Coupler::new(p.clone()).unwrap();
        let r = dissipativity_probe(&p, &[c.zero_state()], &c.zero_forcing(), 0.02, 1.0);
        assert!(r.is_err());
        let r = dissipativity_probe(&p, &[c.zero_state(), c.zero_state()], &c.zero_forcing(), 0.02, 0.0).unwrap();
        assert!(r.trajectories.iter().all(|t| t.entry_time == Some(0.0)));
        assert!(r.absorbed());
    }
}
