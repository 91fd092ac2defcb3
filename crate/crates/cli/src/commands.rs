use fluidplate::attractor::{absorbing_radius, dissipativity_probe, h_distance, separation_probe, stationary_solve};
use fluidplate::pipeline::{simulate as run_pipeline, write_csv, DiagnosticSettings};
use fluidplate::profiles::Profile;
use fluidplate::Coupler;
use serde_json::json;

use crate::config::RunConfig;
use crate::{CliError, Output, ProbeKind, SCHEMA_VERSION};

pub fn settings(cfg: &RunConfig) -> DiagnosticSettings {
    DiagnosticSettings {
        eta: cfg.diagnostics.eta,
        omegas: cfg.diagnostics.omegas.clone(),
        snapshot_stride: cfg.diagnostics.snapshot_stride,
    }
}

pub fn simulate(cfg: &RunConfig, out: &Output) -> Result<bool, CliError> {
    let params = cfg.model_params();
    let hash = params.hash();
    let c = Coupler::new(params)?;
    let forcing = cfg.forcing(&c);
    let (state0, _) = cfg.initial_state(&c)?;
    let result = run_pipeline(&c, state0, &forcing, cfg.steps(), &settings(cfg))?;

    let mut csv = std::io::BufWriter::new(std::fs::File::create(out.path("diagnostics.csv"))?);
    write_csv(&mut csv, &result.rows)?;
    std::io::Write::flush(&mut csv)?;
    fluidplate::snapshot::save(&out.path("final.snap"), cfg.geometry, Some(&hash), &result.final_state)?;
    let passed = result.summary.passed();
    out.write_json(
        "summary.json",
        &json!({
            "schema_version": SCHEMA_VERSION,
            "command": "simulate",
            "params_hash": hash,
            "passed": passed,
            "summary": result.summary,
        }),
    )?;
    println!(
        "simulate: {} steps to t = {:.6}, E = {:.6e}, {}",
        cfg.steps(),
        result.summary.t_end,
        result.rows.last().map_or(0.0, |r| r.energy.e_total),
        if passed { "checks passed" } else { "checks FAILED" }
    );
    Ok(passed)
}

pub fn probe(cfg: &RunConfig, kind: ProbeKind, out: &Output) -> Result<bool, CliError> {
    let params = cfg.model_params();
    let c = Coupler::new(params.clone())?;
    let forcing = cfg.forcing(&c);
    let in_plane = cfg.in_plane_load(&forcing);
    let small = in_plane <= cfg.diagnostics.in_plane_limit;
    let (passed, report) = match kind {
        ProbeKind::Stationary => {
            let st = stationary_solve(&c, &forcing)?;
            let s0 = st.to_state();
            let (s1, _) = c.advance(&s0, &forcing)?;
            let moved = h_distance(&c, &s0, &s1);
            let passed = st.plate_residual <= 1e-9 && moved <= 10.0 * params.tol_couple;
            let report = json!({
                "plate_residual": st.plate_residual,
                "picard_iterations": st.picard_iterations,
                "multiplier": st.multiplier,
                "one_step_distance": moved,
                "max_abs_w": st.plate.w.iter().fold(0.0_f64, |m, v| m.max(v.abs())),
            });
            (passed, report)
        }
        ProbeKind::Dissipativity => {
            let states = cfg
                .probe
                .amplitudes
                .iter()
                .map(|&a| cfg.state_from(&c, &[Profile::Bump { amplitude: a }]))
                .collect::<Result<Vec<_>, _>>()?;
            let radius = match cfg.diagnostics.r0 {
                Some(r) => r,
                None => absorbing_radius(&c, &stationary_solve(&c, &forcing)?, cfg.diagnostics.c_probe),
            };
            let r = dissipativity_probe(&params, &states, &forcing, cfg.numerics.t_end, radius)?;
            (r.absorbed(), serde_json::to_value(&r).map_err(|e| CliError::Output(e.into()))?)
        }
        ProbeKind::Separation => {
            let (a, _) = cfg.initial_state(&c)?;
            let b = if cfg.probe.separation_displacement.is_empty() {
                a.clone()
            } else {
                cfg.state_from(&c, &cfg.probe.separation_displacement)?
            };
            let r = separation_probe(&params, &a, &b, &forcing, cfg.numerics.t_end, cfg.probe.separation_stride)?;
            (r.distance.iter().all(|d| d.is_finite()), serde_json::to_value(&r).map_err(|e| CliError::Output(e.into()))?)
        }
    };
    let path = out.write_json(
        &format!("probe_{}.json", kind_name(kind)),
        &json!({
            "schema_version": SCHEMA_VERSION,
            "command": "probe",
            "kind": kind,
            "params_hash": params.hash(),
            "in_plane_load": in_plane,
            "in_plane_load_small": small,
            "passed": passed,
            "report": report,
        }),
    )?;
    println!("probe {}: {} ({})", kind_name(kind), if passed { "PASS" } else { "FAIL" }, path.display());
    Ok(passed)
}

fn kind_name(kind: ProbeKind) -> &'static str {
    match kind {
        ProbeKind::Stationary => "stationary",
        ProbeKind::Dissipativity => "dissipativity",
        ProbeKind::Separation => "separation",
    }
}
