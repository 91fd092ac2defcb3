//! Manufactured Stokes solution on the unit cube `(0,1)^2 x (-1,0)`.
//!
//! `v = curl A` with `A = (sin(pi x) sin^2(pi y), sin^2(pi x) sin(pi y), 0) (z+1)^2`
//! is solenoidal, vanishes on the side and bottom walls, and has a nonzero,
//! mean-free trace on the top face. The pressure `cos(pi x) cos(pi y) sin(pi z)`
//! has zero mean.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::Result;
use crate::grid::{build_grids, discrete_div, BoxGeometry, PlateVector, StaggeredVelocity};
use crate::stokes::{traction_tf, StokesWorkspace};

fn s(x: f64) -> f64 {
    (PI * x).sin()
}
fn s_dd(x: f64) -> f64 {
    -PI * PI * s(x)
}
fn s_d(x: f64) -> f64 {
    PI * (PI * x).cos()
}
fn q(x: f64) -> f64 {
    s(x) * s(x)
}
fn q_d(x: f64) -> f64 {
    PI * (2.0 * PI * x).sin()
}
fn q_dd(x: f64) -> f64 {
    2.0 * PI * PI * (2.0 * PI * x).cos()
}
fn q_ddd(x: f64) -> f64 {
    -4.0 * PI * PI * PI * (2.0 * PI * x).sin()
}
fn h(z: f64) -> f64 {
    (z + 1.0) * (z + 1.0)
}
fn h_d(z: f64) -> f64 {
    2.0 * (z + 1.0)
}

pub fn velocity(x: f64, y: f64, z: f64) -> [f64; 3] {
    [
        -q(x) * s(y) * h_d(z),
        s(x) * q(y) * h_d(z),
        h(z) * (q_d(x) * s(y) - s(x) * q_d(y)),
    ]
}

pub fn pressure(x: f64, y: f64, z: f64) -> f64 {
    (PI * x).cos() * (PI * y).cos() * (PI * z).sin()
}

/// `-nu lap v + grad p`.
pub fn forcing(nu: f64, x: f64, y: f64, z: f64) -> [f64; 3] {
    let lap1 = -(q_dd(x) * s(y) * h_d(z) + q(x) * s_dd(y) * h_d(z));
    let lap2 = s_dd(x) * q(y) * h_d(z) + s(x) * q_dd(y) * h_d(z);
    let a = q_ddd(x) * s(y) * h(z) + q_d(x) * s_dd(y) * h(z) + 2.0 * q_d(x) * s(y);
    let b = s_dd(x) * q_d(y) * h(z) + s(x) * q_ddd(y) * h(z) + 2.0 * s(x) * q_d(y);
    let (cx, cy, cz) = ((PI * x).cos(), (PI * y).cos(), (PI * z).cos());
    let (sx, sy, sz) = ((PI * x).sin(), (PI * y).sin(), (PI * z).sin());
    [
        -nu * lap1 - PI * sx * cy * sz,
        -nu * lap2 - PI * cx * sy * sz,
        -nu * (a - b) + PI * cx * cy * cz,
    ]
}

/// Exact traction on `z = 0`.
pub fn traction(nu: f64, x: f64, y: f64) -> [f64; 3] {
    let z = 0.0;
    let v1z = -q(x) * s(y) * 2.0;
    let v2z = s(x) * q(y) * 2.0;
    let v3x = h(z) * (q_dd(x) * s(y) - s_d(x) * q_d(y));
    let v3y = h(z) * (q_d(x) * s_d(y) - s(x) * q_dd(y));
    let v3z = h_d(z) * (q_d(x) * s(y) - s(x) * q_d(y));
    [nu * (v1z + v3x), nu * (v2z + v3y), 2.0 * nu * v3z - pressure(x, y, z)]
}

#[derive(Clone, Debug, Serialize)]
pub struct MmsLevel {
    pub n: usize,
    pub velocity_l2: f64,
    pub traction_l2: f64,
    pub max_div: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct MmsReport {
    pub nu: f64,
    pub levels: Vec<MmsLevel>,
    pub velocity_orders: Vec<f64>,
    pub traction_orders: Vec<f64>,
}

impl MmsReport {
    pub fn min_velocity_order(&self) -> f64 {
        self.velocity_orders.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn min_traction_order(&self) -> f64 {
        self.traction_orders.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_div(&self) -> f64 {
        self.levels.iter().map(|l| l.max_div).fold(0.0, f64::max)
    }
}

pub fn solve_level(n: usize, nu: f64, tol: f64) -> Result<MmsLevel> {
    let (fg, pg) = build_grids(BoxGeometry::new(1.0, 1.0, 1.0, n, n, n)?)?;
    let ws = StokesWorkspace::new(fg, pg, nu, tol)?;
    let g = StaggeredVelocity::sample_interior(&fg, |x, y, z| forcing(nu, x, y, z));
    let mut psi = PlateVector::zeros(&pg);
    for (i, j) in pg.interior_nodes().collect::<Vec<_>>() {
        let v = velocity(pg.x(i), pg.y(j), 0.0);
        psi.x[[i, j]] = v[0];
        psi.y[[i, j]] = v[1];
        psi.z[[i, j]] = v[2];
    }
    let (ff, stats) = ws.solve(0.0, &g, &psi)?;
    let mut err = ff.v.clone();
    err.axpy(-1.0, &StaggeredVelocity::sample_interior(&fg, velocity));
    let velocity_l2 = err.dot(&fg, &err).sqrt();
    let t = traction_tf(&fg, &pg, nu, &ff);
    let mut te = 0.0;
    for (i, j) in pg.interior_nodes() {
        let e = traction(nu, pg.x(i), pg.y(j));
        te += ((t.x[[i, j]] - e[0]).powi(2) + (t.y[[i, j]] - e[1]).powi(2) + (t.z[[i, j]] - e[2]).powi(2)) * pg.node_area();
    }
    let max_div = discrete_div(&fg, &ff.v).iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    Ok(MmsLevel {
        n,
        velocity_l2,
        traction_l2: te.sqrt(),
        max_div,
        iterations: stats.iterations,
    })
}

/// Runs the manufactured problem on each resolution and reports observed
/// orders between consecutive levels (resolutions should double).
pub fn convergence_study(ns: &[usize], nu: f64, tol: f64) -> Result<MmsReport> {
    let levels = ns.iter().map(|&n| solve_level(n, nu, tol)).collect::<Result<Vec<_>>>()?;
    let order = |a: f64, b: f64, na: usize, nb: usize| (a / b).ln() / (nb as f64 / na as f64).ln();
    let velocity_orders = levels
        .windows(2)
        .map(|w| order(w[0].velocity_l2, w[1].velocity_l2, w[0].n, w[1].n))
        .collect();
    let traction_orders = levels
        .windows(2)
        .map(|w| order(w[0].traction_l2, w[1].traction_l2, w[0].n, w[1].n))
        .collect();
    Ok(MmsReport {
        nu,
        levels,
        velocity_orders,
        traction_orders,
    })
}
