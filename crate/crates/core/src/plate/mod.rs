//! Full von Karman plate on the node grid.
//!
//! Elastic energy is `bending + membrane`, with
//! `bending = 1/2 sum_trapezoid (lap_h w)^2` (clamped ghosts) and
//! `membrane = 1/2 sum_cells sum_corners A/4 (C(P), P)`. On each cell the
//! strain is sampled at the four corners using the two edge differences that
//! meet there, which keeps the quadrature free of zero-energy checkerboard
//! modes. Nodal forces are exact negative gradients of this energy divided by
//! the node area, so the semi-discrete system is conservative by construction.

pub mod law;

use ndarray::Array2;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{biharmonic, plate_laplacian, plate_norms, PlateGrid, PlateVector};
use crate::linalg::BandedSpd;
use law::{check_poisson, stress, SymTensor2};

/// Plate displacements and velocities at nodes. The boundary ring stays zero.
#[derive(Clone, Debug, PartialEq)]
pub struct PlateField {
    pub w: Array2<f64>,
    pub u1: Array2<f64>,
    pub u2: Array2<f64>,
    pub wt: Array2<f64>,
    pub u1t: Array2<f64>,
    pub u2t: Array2<f64>,
}

impl PlateField {
    pub fn zeros(pg: &PlateGrid) -> Self {
        Self {
            w: pg.zeros(),
            u1: pg.zeros(),
            u2: pg.zeros(),
            wt: pg.zeros(),
            u1t: pg.zeros(),
            u2t: pg.zeros(),
        }
    }

    pub fn displacement(&self) -> PlateVector {
        PlateVector {
            x: self.u1.clone(),
            y: self.u2.clone(),
            z: self.w.clone(),
        }
    }

    pub fn velocity(&self) -> PlateVector {
        PlateVector {
            x: self.u1t.clone(),
            y: self.u2t.clone(),
            z: self.wt.clone(),
        }
    }

    pub fn from_parts(disp: PlateVector, vel: PlateVector) -> Self {
        Self {
            w: disp.z,
            u1: disp.x,
            u2: disp.y,
            wt: vel.z,
            u1t: vel.x,
            u2t: vel.y,
        }
    }

    fn arrays(&self) -> [&Array2<f64>; 6] {
        [&self.w, &self.u1, &self.u2, &self.wt, &self.u1t, &self.u2t]
    }

    /// Clamped conditions: all six fields vanish on the boundary ring.
    pub fn check(&self, pg: &PlateGrid) -> Result<()> {
        for a in self.arrays() {
            if a.dim() != pg.dims() {
                return Err(Error::GridMismatch("plate field does not match plate grid".into()));
            }
        }
        let ring = self.arrays().iter().map(|a| pg.max_boundary_abs(a)).fold(0.0, f64::max);
        if ring > 0.0 {
            return Err(Error::BoundaryData(ring));
        }
        Ok(())
    }

    pub fn kinetic(&self, pg: &PlateGrid) -> f64 {
        0.5 * (pg.dot(&self.wt, &self.wt) + pg.dot(&self.u1t, &self.u1t) + pg.dot(&self.u2t, &self.u2t))
    }
}

/// Nodal symmetric tensor field.
#[derive(Clone, Debug, PartialEq)]
pub struct SymTensorField2D {
    pub e11: Array2<f64>,
    pub e12: Array2<f64>,
    pub e22: Array2<f64>,
}

impl SymTensorField2D {
    pub fn at(&self, i: usize, j: usize) -> SymTensor2<f64> {
        SymTensor2::new(self.e11[[i, j]], self.e12[[i, j]], self.e22[[i, j]])
    }

    pub fn from_fn(pg: &PlateGrid, f: impl Fn(usize, usize) -> SymTensor2<f64>) -> Self {
        let mut out = Self {
            e11: pg.zeros(),
            e12: pg.zeros(),
            e22: pg.zeros(),
        };
        for ((i, j), x) in out.e11.indexed_iter_mut() {
            *x = f(i, j).e11;
        }
        for ((i, j), x) in out.e12.indexed_iter_mut() {
            *x = f(i, j).e12;
        }
        for ((i, j), x) in out.e22.indexed_iter_mut() {
            *x = f(i, j).e22;
        }
        out
    }
}

/// Pointwise stress law applied to a field.
pub fn stress_c(eps: &SymTensorField2D, mu: f64) -> Result<SymTensorField2D> {
    check_poisson(mu)?;
    let (n1, n2) = eps.e11.dim();
    let pg = PlateGrid {
        nx: n1 - 1,
        ny: n2 - 1,
        hx: 1.0,
        hy: 1.0,
    };
    Ok(SymTensorField2D::from_fn(&pg, |i, j| stress(&eps.at(i, j), mu)))
}

/// Centred-difference gradient at a node (one-sided on the ring).
pub fn node_gradient(pg: &PlateGrid, f: &Array2<f64>, i: usize, j: usize) -> [f64; 2] {
    let (nx, ny) = (pg.nx, pg.ny);
    let gx = if i == 0 {
        (f[[1, j]] - f[[0, j]]) / pg.hx
    } else if i == nx {
        (f[[nx, j]] - f[[nx - 1, j]]) / pg.hx
    } else {
        (f[[i + 1, j]] - f[[i - 1, j]]) / (2.0 * pg.hx)
    };
    let gy = if j == 0 {
        (f[[i, 1]] - f[[i, 0]]) / pg.hy
    } else if j == ny {
        (f[[i, ny]] - f[[i, ny - 1]]) / pg.hy
    } else {
        (f[[i, j + 1]] - f[[i, j - 1]]) / (2.0 * pg.hy)
    };
    [gx, gy]
}

/// Nodal von Karman strain `eps0(u) + grad w (x) grad w / 2`.
pub fn strain_p(pg: &PlateGrid, u: &PlateField) -> SymTensorField2D {
    SymTensorField2D::from_fn(pg, |i, j| {
        law::strain(
            node_gradient(pg, &u.u1, i, j),
            node_gradient(pg, &u.u2, i, j),
            node_gradient(pg, &u.w, i, j),
        )
    })
}

/// Nodal rate tensor `eps0(rate_u) + sym(grad w (x) grad rate_w)`; `rate`
/// holds `(u1, u2, w)` rates in `(x, y, z)`.
pub fn strain_rate_p(pg: &PlateGrid, u: &PlateField, rate: &PlateVector) -> SymTensorField2D {
    SymTensorField2D::from_fn(pg, |i, j| {
        law::strain_rate(
            node_gradient(pg, &rate.x, i, j),
            node_gradient(pg, &rate.y, i, j),
            node_gradient(pg, &u.w, i, j),
            node_gradient(pg, &rate.z, i, j),
        )
    })
}

/// One corner of one cell: the membrane quadrature point.
#[derive(Clone, Copy, Debug)]
pub struct QuadPoint {
    pub i: usize,
    pub j: usize,
    pub cx: usize,
    pub cy: usize,
}

impl QuadPoint {
    pub fn grad(&self, pg: &PlateGrid, f: &Array2<f64>) -> [f64; 2] {
        let (i, j) = (self.i, self.j);
        [
            (f[[i + 1, j + self.cy]] - f[[i, j + self.cy]]) / pg.hx,
            (f[[i + self.cx, j + 1]] - f[[i + self.cx, j]]) / pg.hy,
        ]
    }

    /// Adds `a * d(grad f . g)/df` into `out`.
    pub fn scatter(&self, pg: &PlateGrid, out: &mut Array2<f64>, g: [f64; 2], a: f64) {
        let (i, j) = (self.i, self.j);
        let gx = a * g[0] / pg.hx;
        let gy = a * g[1] / pg.hy;
        out[[i + 1, j + self.cy]] += gx;
        out[[i, j + self.cy]] -= gx;
        out[[i + self.cx, j + 1]] += gy;
        out[[i + self.cx, j]] -= gy;
    }
}

pub fn quad_points(pg: &PlateGrid) -> impl Iterator<Item = QuadPoint> + '_ {
    (0..pg.ny).flat_map(move |j| {
        (0..pg.nx).flat_map(move |i| {
            [(0, 0), (1, 0), (0, 1), (1, 1)]
                .into_iter()
                .map(move |(cx, cy)| QuadPoint { i, j, cx, cy })
        })
    })
}

/// Quadrature weight of each membrane point.
pub fn quad_weight(pg: &PlateGrid) -> f64 {
    0.25 * pg.node_area()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct ElasticEnergy {
    pub bending: f64,
    pub membrane: f64,
}

impl ElasticEnergy {
    pub fn total(&self) -> f64 {
        self.bending + self.membrane
    }
}

/// Material and model switches shared by energy, forces and solvers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlateModel {
    pub mu: f64,
    /// When false the strain is `eps0(u)` only and the plate is linear.
    pub nonlinear: bool,
}

impl PlateModel {
    pub fn new(mu: f64, nonlinear: bool) -> Result<Self> {
        check_poisson(mu)?;
        Ok(Self { mu, nonlinear })
    }

    /// Strain at a quadrature point.
    pub fn strain_at(&self, pg: &PlateGrid, q: &QuadPoint, u1: &Array2<f64>, u2: &Array2<f64>, w: &Array2<f64>) -> SymTensor2<f64> {
        let e = law::eps0(q.grad(pg, u1), q.grad(pg, u2));
        if self.nonlinear {
            let gw = q.grad(pg, w);
            e.add(&SymTensor2::sym_outer(gw, gw).scale(0.5))
        } else {
            e
        }
    }

    pub fn bending_energy(&self, pg: &PlateGrid, w: &Array2<f64>) -> f64 {
        let lap = plate_laplacian(pg, w);
        let mut s = 0.0;
        for ((i, j), &l) in lap.indexed_iter() {
            s += pg.trapezoid_weight(i, j) * l * l;
        }
        0.5 * s
    }

    pub fn membrane_energy(&self, pg: &PlateGrid, u1: &Array2<f64>, u2: &Array2<f64>, w: &Array2<f64>) -> f64 {
        let wq = quad_weight(pg);
        let mut s = 0.0;
        for q in quad_points(pg) {
            let p = self.strain_at(pg, &q, u1, u2, w);
            s += wq * stress(&p, self.mu).contract(&p);
        }
        0.5 * s
    }

    pub fn energy(&self, pg: &PlateGrid, u: &PlateField) -> ElasticEnergy {
        ElasticEnergy {
            bending: self.bending_energy(pg, &u.w),
            membrane: self.membrane_energy(pg, &u.u1, &u.u2, &u.w),
        }
    }

    /// Gradient of the membrane energy with respect to nodal `(u1, u2, w)`,
    /// all nodes (ring included).
    pub fn membrane_gradient(&self, pg: &PlateGrid, u1: &Array2<f64>, u2: &Array2<f64>, w: &Array2<f64>) -> PlateVector {
        let wq = quad_weight(pg);
        let mut out = PlateVector::zeros(pg);
        for q in quad_points(pg) {
            let p = self.strain_at(pg, &q, u1, u2, w);
            let n = stress(&p, self.mu);
            q.scatter(pg, &mut out.x, [n.e11, n.e12], wq);
            q.scatter(pg, &mut out.y, [n.e12, n.e22], wq);
            if self.nonlinear {
                q.scatter(pg, &mut out.z, n.apply(q.grad(pg, w)), wq);
            }
        }
        out
    }

    /// Gradient of the elastic energy at interior nodes (ring zeroed).
    pub fn gradient(&self, pg: &PlateGrid, disp: &PlateVector) -> PlateVector {
        let mut g = self.membrane_gradient(pg, &disp.x, &disp.y, &disp.z);
        g.z.scaled_add(pg.node_area(), &biharmonic(pg, &disp.z));
        for c in g.components_mut() {
            pg.zero_boundary(c);
        }
        g
    }

    /// Gradient of the quadratic part (energy at `u = 0` to second order).
    pub fn linear_gradient(&self, pg: &PlateGrid, disp: &PlateVector) -> PlateVector {
        let lin = Self {
            mu: self.mu,
            nonlinear: false,
        };
        lin.gradient(pg, disp)
    }
}

/// Von Karman force densities `div{C(P) grad w}` and `div C(P)` at interior
/// nodes.
pub fn vonkarman_forces(pg: &PlateGrid, u: &PlateField, mu: f64) -> Result<(Array2<f64>, [Array2<f64>; 2])> {
    let model = PlateModel::new(mu, true)?;
    let mut g = model.membrane_gradient(pg, &u.u1, &u.u2, &u.w);
    let s = -1.0 / pg.node_area();
    for c in g.components_mut() {
        pg.zero_boundary(c);
        *c *= s;
    }
    Ok((g.z, [g.x, g.y]))
}

/// `1/2 [ |lap w|^2 + (C(P), P) ]`.
pub fn plate_energy(pg: &PlateGrid, u: &PlateField, mu: f64) -> Result<f64> {
    Ok(PlateModel::new(mu, true)?.energy(pg, u).total())
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CoercivityTerms {
    /// `|lap w|^2`
    pub bending_sq: f64,
    /// `(C(P(u)), P(u))`
    pub membrane: f64,
    /// `(G, u)`
    pub load_work: f64,
    /// `|w|_{H2}^2 + |u1|_{H1}^2 + |u2|_{H1}^2`
    pub norm_w_sq: f64,
    /// `|grad w|_{L2}`
    pub grad_w: f64,
}

impl CoercivityTerms {
    pub fn lhs(&self) -> f64 {
        self.bending_sq + self.membrane + self.load_work
    }

    pub fn ratio(&self) -> f64 {
        self.norm_w_sq / (self.bending_sq + self.membrane)
    }
}

/// Terms of the lower bound `|lap w|^2 + (C(P),P) + (G,u) >= c |u|_W - C`.
pub fn coercivity_probe(pg: &PlateGrid, u: &PlateField, g: &PlateVector, mu: f64) -> Result<CoercivityTerms> {
    let model = PlateModel::new(mu, true)?;
    let e = model.energy(pg, u);
    let nw = plate_norms(pg, &u.w);
    let n1 = plate_norms(pg, &u.u1);
    let n2 = plate_norms(pg, &u.u2);
    Ok(CoercivityTerms {
        bending_sq: 2.0 * e.bending,
        membrane: 2.0 * e.membrane,
        load_work: g.dot(pg, &u.displacement()),
        norm_w_sq: nw.h2 * nw.h2 + n1.h1 * n1.h1 + n2.h1 * n2.h1,
        grad_w: (nw.h1 * nw.h1 - nw.l2 * nw.l2).max(0.0).sqrt(),
    })
}

fn w_index(pg: &PlateGrid, i: usize, j: usize) -> usize {
    (j - 1) * (pg.nx - 1) + (i - 1)
}

/// Assembles a symmetric operator acting on interior nodal fields with the
/// given stencil radius by colored probing. `ncomp` components per node are
/// interleaved.
fn probe_assemble(
    pg: &PlateGrid,
    radius: usize,
    ncomp: usize,
    mass: f64,
    apply: impl Fn(&[Array2<f64>]) -> Vec<Array2<f64>>,
) -> BandedSpd {
    let m = 2 * radius + 1;
    let n = pg.interior_count() * ncomp;
    let bw = ncomp * ((pg.nx - 1) * radius + radius) + ncomp - 1;
    let mut k = BandedSpd::zeros(n, bw);
    let nodes: Vec<_> = pg.interior_nodes().collect();
    for a in 0..m {
        for b in 0..m {
            for c in 0..ncomp {
                let mut probe = vec![pg.zeros(); ncomp];
                for &(i, j) in &nodes {
                    if i % m == a && j % m == b {
                        probe[c][[i, j]] = 1.0;
                    }
                }
                let out = apply(&probe);
                for &(i, j) in &nodes {
                    // the unique probed node within the stencil radius
                    let pick = |x: usize, target: usize| -> isize {
                        let base = x + m - radius;
                        (base + (target + m - base % m) % m) as isize - m as isize
                    };
                    let (pi, pj) = (pick(i, a), pick(j, b));
                    if pi < 1 || pj < 1 || pi >= pg.nx as isize || pj >= pg.ny as isize {
                        continue;
                    }
                    let (pi, pj) = (pi as usize, pj as usize);
                    let col = w_index(pg, pi, pj) * ncomp + c;
                    for (d, o) in out.iter().enumerate() {
                        let row = w_index(pg, i, j) * ncomp + d;
                        if row >= col {
                            k.add(row, col, o[[i, j]]);
                        }
                    }
                }
            }
        }
    }
    for r in 0..n {
        k.add(r, r, mass);
    }
    k
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct PlateStepStats {
    pub picard_iterations: usize,
    pub picard_residual: f64,
    /// Uniform pressure enforcing the volume constraint.
    pub multiplier: f64,
}

/// Factored linear parts of the plate update for one model and time step.
#[derive(Clone, Debug)]
pub struct PlateSolver {
    pub grid: PlateGrid,
    pub model: PlateModel,
    /// `None` for static problems.
    pub dt: Option<f64>,
    pub picard_tol: f64,
    pub picard_max: usize,
    kw: BandedSpd,
    ku: BandedSpd,
    unit_response: Vec<f64>,
}

impl PlateSolver {
    pub fn new(grid: PlateGrid, model: PlateModel, dt: Option<f64>, picard_tol: f64, picard_max: usize) -> Result<Self> {
        if let Some(dt) = dt {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(Error::Parameter {
                    name: "dt",
                    reason: format!("must be positive, got {dt}"),
                });
            }
        }
        let area = grid.node_area();
        let mass = dt.map_or(0.0, |dt| area / (dt * dt));
        let pg = grid;
        let kw = probe_assemble(&pg, 2, 1, mass, |f| vec![biharmonic(&pg, &f[0]) * area]).factor()?;
        let lin = PlateModel {
            mu: model.mu,
            nonlinear: false,
        };
        let zero = pg.zeros();
        let ku = probe_assemble(&pg, 1, 2, mass, |f| {
            let g = lin.membrane_gradient(&pg, &f[0], &f[1], &zero);
            vec![g.x, g.y]
        })
        .factor()?;
        let ones = vec![area; pg.interior_count()];
        let unit_response = kw.solve(&ones);
        Ok(Self {
            grid,
            model,
            dt,
            picard_tol,
            picard_max,
            kw,
            ku,
            unit_response,
        })
    }

    /// Solves `(M + K_lin) u = rhs` with `sum w = w_sum` imposed by a uniform
    /// multiplier on the transversal equation. Returns the multiplier.
    fn solve_linear(&self, rhs: &PlateVector, w_sum: f64) -> (PlateVector, f64) {
        let pg = &self.grid;
        let nodes: Vec<_> = pg.interior_nodes().collect();
        let bw: Vec<f64> = nodes.iter().map(|&(i, j)| rhs.z[[i, j]]).collect();
        let w0 = self.kw.solve(&bw);
        let s0: f64 = w0.iter().sum();
        let s1: f64 = self.unit_response.iter().sum();
        let c = (w_sum - s0) / s1;
        let mut bu = vec![0.0; 2 * nodes.len()];
        for (n, &(i, j)) in nodes.iter().enumerate() {
            bu[2 * n] = rhs.x[[i, j]];
            bu[2 * n + 1] = rhs.y[[i, j]];
        }
        let u = self.ku.solve(&bu);
        let mut out = PlateVector::zeros(pg);
        for (n, &(i, j)) in nodes.iter().enumerate() {
            out.z[[i, j]] = w0[n] + c * self.unit_response[n];
            out.x[[i, j]] = u[2 * n];
            out.y[[i, j]] = u[2 * n + 1];
        }
        (out, c)
    }

    /// Nonlinear remainder `grad E(u) - K_lin u`.
    pub fn remainder(&self, disp: &PlateVector) -> PlateVector {
        let pg = &self.grid;
        if !self.model.nonlinear {
            return PlateVector::zeros(pg);
        }
        let mut g = self.model.gradient(pg, disp);
        g.axpy(-1.0, &self.model.linear_gradient(pg, disp));
        g
    }

    fn picard(&self, base: &PlateVector, w_sum: f64, start: PlateVector) -> Result<(PlateVector, PlateStepStats)> {
        let mut u = start;
        let mut stats = PlateStepStats::default();
        loop {
            let mut rhs = base.clone();
            rhs.axpy(-1.0, &self.remainder(&u));
            let (next, c) = self.solve_linear(&rhs, w_sum);
            let diff = next.sub(&u).max_abs();
            let scale = next.max_abs().max(1e-300);
            stats.picard_iterations += 1;
            stats.picard_residual = diff / scale;
            stats.multiplier = c;
            u = next;
            if !self.model.nonlinear || diff <= self.picard_tol * scale {
                return Ok((u, stats));
            }
            if stats.picard_iterations >= self.picard_max || !diff.is_finite() {
                return Err(Error::NonConvergence {
                    solver: "plate picard",
                    iterations: stats.picard_iterations,
                    residual: stats.picard_residual,
                });
            }
        }
    }

    /// One implicit Euler step. `fluid_load` is the nodal interface force
    /// (already integrated over node areas); `g` is the load density.
    /// The total of `w` is preserved exactly.
    pub fn substep(&self, old: &PlateField, fluid_load: &PlateVector, g: &PlateVector) -> Result<(PlateField, PlateStepStats)> {
        let pg = &self.grid;
        let dt = self.dt.ok_or_else(|| Error::Parameter {
            name: "dt",
            reason: "static solver cannot take time steps".into(),
        })?;
        let area = pg.node_area();
        let disp = old.displacement();
        let vel = old.velocity();
        let mut predictor = disp.clone();
        predictor.axpy(dt, &vel);
        let mut base = predictor.scaled(area / (dt * dt));
        base.axpy(area, g);
        base.axpy(1.0, fluid_load);
        for c in base.components_mut() {
            pg.zero_boundary(c);
        }
        let w_sum: f64 = pg.interior_nodes().map(|(i, j)| old.w[[i, j]]).sum();
        let (next, stats) = self.picard(&base, w_sum, predictor)?;
        let mut rate = next.sub(&disp);
        rate = rate.scaled(1.0 / dt);
        Ok((PlateField::from_parts(next, rate), stats))
    }

    /// Static equilibrium `grad E(u) = load + c A 1` with zero mean `w`.
    /// `load` is a nodal force.
    pub fn static_solve(&self, load: &PlateVector) -> Result<(PlateVector, PlateStepStats)> {
        let mut base = load.clone();
        for c in base.components_mut() {
            self.grid.zero_boundary(c);
        }
        self.picard(&base, 0.0, PlateVector::zeros(&self.grid))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grids, BoxGeometry};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pgrid(nx: usize, ny: usize) -> PlateGrid {
        build_grids(BoxGeometry::new(1.0, 0.8, 1.0, nx, ny, 4).unwrap()).unwrap().1
    }

    fn random_field(pg: &PlateGrid, rng: &mut ChaCha8Rng, amp: f64) -> PlateField {
        let mut u = PlateField::zeros(pg);
        for a in [&mut u.w, &mut u.u1, &mut u.u2, &mut u.wt, &mut u.u1t, &mut u.u2t] {
            a.mapv_inplace(|_| rng.gen_range(-amp..amp));
            pg.zero_boundary(a);
        }
        u
    }

    #[test]
    fn zero_field_has_zero_energy_and_forces() {
        let pg = pgrid(6, 5);
        let u = PlateField::zeros(&pg);
        assert_eq!(plate_energy(&pg, &u, 0.3).unwrap(), 0.0);
        let (t, [a, b]) = vonkarman_forces(&pg, &u, 0.3).unwrap();
        assert!(t.iter().chain(a.iter()).chain(b.iter()).all(|&x| x == 0.0));
    }

    #[test]
    fn constant_stress_has_no_in_plane_force() {
        let pg = pgrid(8, 8);
        let mut u = PlateField::zeros(&pg);
        u.u1 = pg.sample(|x, _| x);
        let (t, [a, b]) = vonkarman_forces(&pg, &u, 0.25).unwrap();
        for (i, j) in pg.interior_nodes() {
            assert!(a[[i, j]].abs() < 1e-12 && b[[i, j]].abs() < 1e-12 && t[[i, j]] == 0.0);
        }
        let e = strain_p(&pg, &u);
        assert!((e.e11[[3, 3]] - 1.0).abs() < 1e-14 && e.e12[[3, 3]] == 0.0 && e.e22[[3, 3]] == 0.0);
    }

    #[test]
    fn membrane_divergence_duality() {
        let pg = pgrid(7, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = random_field(&pg, &mut rng, 1.0);
        let delta = random_field(&pg, &mut rng, 1.0).w;
        let (t, _) = vonkarman_forces(&pg, &u, 0.3).unwrap();
        let lhs = pg.dot(&t, &delta);
        let model = PlateModel::new(0.3, true).unwrap();
        let mut rhs = 0.0;
        for q in quad_points(&pg) {
            let n = stress(&model.strain_at(&pg, &q, &u.u1, &u.u2, &u.w), 0.3);
            let f = n.apply(q.grad(&pg, &u.w));
            let d = q.grad(&pg, &delta);
            rhs -= quad_weight(&pg) * (f[0] * d[0] + f[1] * d[1]);
        }
        assert!((lhs - rhs).abs() < 1e-10 * rhs.abs().max(1.0));
    }

    #[test]
    fn bending_gradient_is_area_biharmonic() {
        let pg = pgrid(7, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let u = random_field(&pg, &mut rng, 1.0);
        let d = random_field(&pg, &mut rng, 1.0).w;
        let model = PlateModel::new(0.3, true).unwrap();
        let h = 1e-4;
        let ep = model.bending_energy(&pg, &(&u.w + &(&d * h)));
        let em = model.bending_energy(&pg, &(&u.w - &(&d * h)));
        let fd = (ep - em) / (2.0 * h);
        let an = pg.node_area() * (&biharmonic(&pg, &u.w) * &d).sum();
        assert!((fd - an).abs() < 1e-7 * an.abs().max(1.0), "{fd} {an}");
    }

    #[test]
    fn linear_plate_static_solve_matches_biharmonic() {
        let pg = pgrid(8, 8);
        let model = PlateModel::new(0.3, false).unwrap();
        let solver = PlateSolver::new(pg, model, None, 1e-9, 50).unwrap();
        let g3 = pg.sample(|x, y| (std::f64::consts::PI * x).sin() * (2.0 * std::f64::consts::PI * y / 0.8).sin());
        let mut load = PlateVector::zeros(&pg);
        load.z = &g3 * pg.node_area();
        let (u, stats) = solver.static_solve(&load).unwrap();
        // antisymmetric load: zero multiplier, pure biharmonic solve
        assert!(stats.multiplier.abs() < 1e-10);
        let r = &biharmonic(&pg, &u.z) - &g3;
        for (i, j) in pg.interior_nodes() {
            assert!(r[[i, j]].abs() < 1e-9);
        }
    }
}
