//! Stokes solves on the MAC grid.
//!
//! The viscous term is the symmetric-gradient form
//! `Phi(v) = nu/2 * E_h(v, v)`, `E_h = V * [2 sum d_ii^2 + 4 sum w_e d_ij^2]`,
//! with `d_ii` at cell centres and the shear components on cell edges
//! (edge weights halved on walls). The momentum operator is the exact gradient
//! of `Phi`, so it is symmetric and the discrete energy bookkeeping closes.
//!
//! Saddle-point systems are solved by preconditioned conjugate gradients on
//! the discretely divergence-free subspace: every iterate is projected with a
//! Neumann pressure Poisson solve, and a shifted vector Laplacian solved by
//! fast diagonalization serves as preconditioner.

use ndarray::{s, Array3};

use crate::error::{Error, Result};
use crate::grid::{
    discrete_div, discrete_grad_p, lift_to_topface, lift_transpose, FluidGrid, PlateGrid, PlateVector,
    StaggeredVelocity, TopFace,
};
use crate::linalg::{Basis1D, FastDiag3};

/// Velocity, zero-mean pressure and the nodal plate data the top face was
/// lifted from.
#[derive(Clone, Debug, PartialEq)]
pub struct FluidField {
    pub v: StaggeredVelocity,
    pub p: Array3<f64>,
    pub boundary: PlateVector,
}

impl FluidField {
    pub fn zeros(fg: &FluidGrid, pg: &PlateGrid) -> Self {
        Self {
            v: StaggeredVelocity::zeros(fg),
            p: Array3::zeros(fg.p_dims()),
            boundary: PlateVector::zeros(pg),
        }
    }

    /// Nodal velocity on the plate face.
    pub fn trace_to_plate(&self) -> PlateVector {
        self.boundary.clone()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Clone, Copy, Debug)]
enum Slot {
    U(usize, usize, usize),
    V(usize, usize, usize),
    W(usize, usize, usize),
    TopU(usize, usize),
    TopV(usize, usize),
}

/// Sparse linear form over velocity slots.
#[derive(Clone, Copy, Debug)]
struct Form {
    terms: [(Slot, f64); 8],
    n: usize,
}

impl Form {
    fn empty() -> Self {
        Self {
            terms: [(Slot::U(0, 0, 0), 0.0); 8],
            n: 0,
        }
    }

    fn one(s: Slot, c: f64) -> Self {
        let mut f = Self::empty();
        f.push(s, c);
        f
    }

    fn push(&mut self, s: Slot, c: f64) {
        self.terms[self.n] = (s, c);
        self.n += 1;
    }

    fn add_scaled(mut self, other: &Form, a: f64) -> Self {
        for &(s, c) in &other.terms[..other.n] {
            self.push(s, a * c);
        }
        self
    }

    fn eval(&self, v: &StaggeredVelocity) -> f64 {
        self.terms[..self.n].iter().map(|&(s, c)| c * read(v, s)).sum()
    }

    fn scatter(&self, out: &mut StaggeredVelocity, a: f64) {
        for &(s, c) in &self.terms[..self.n] {
            *slot_mut(out, s) += a * c;
        }
    }
}

fn read(v: &StaggeredVelocity, s: Slot) -> f64 {
    match s {
        Slot::U(i, j, k) => v.u[[i, j, k]],
        Slot::V(i, j, k) => v.v[[i, j, k]],
        Slot::W(i, j, k) => v.w[[i, j, k]],
        Slot::TopU(i, j) => v.top_u[[i, j]],
        Slot::TopV(i, j) => v.top_v[[i, j]],
    }
}

fn slot_mut(v: &mut StaggeredVelocity, s: Slot) -> &mut f64 {
    match s {
        Slot::U(i, j, k) => &mut v.u[[i, j, k]],
        Slot::V(i, j, k) => &mut v.v[[i, j, k]],
        Slot::W(i, j, k) => &mut v.w[[i, j, k]],
        Slot::TopU(i, j) => &mut v.top_u[[i, j]],
        Slot::TopV(i, j) => &mut v.top_v[[i, j]],
    }
}

/// Value of a tangential component one index past a wall: odd reflection
/// about zero, or about the top Dirichlet value.
struct Ghosts {
    nx: isize,
    ny: isize,
    nz: isize,
}

impl Ghosts {
    fn u(&self, i: usize, j: isize, k: isize) -> Form {
        let (ny, nz) = (self.ny, self.nz);
        if j < 0 {
            Form::one(Slot::U(i, 0, k as usize), -1.0)
        } else if j >= ny {
            Form::one(Slot::U(i, (ny - 1) as usize, k as usize), -1.0)
        } else if k < 0 {
            Form::one(Slot::U(i, j as usize, 0), -1.0)
        } else if k >= nz {
            let mut f = Form::one(Slot::TopU(i, j as usize), 2.0);
            f.push(Slot::U(i, j as usize, (nz - 1) as usize), -1.0);
            f
        } else {
            Form::one(Slot::U(i, j as usize, k as usize), 1.0)
        }
    }

    fn v(&self, i: isize, j: usize, k: isize) -> Form {
        let (nx, nz) = (self.nx, self.nz);
        if i < 0 {
            Form::one(Slot::V(0, j, k as usize), -1.0)
        } else if i >= nx {
            Form::one(Slot::V((nx - 1) as usize, j, k as usize), -1.0)
        } else if k < 0 {
            Form::one(Slot::V(i as usize, j, 0), -1.0)
        } else if k >= nz {
            let mut f = Form::one(Slot::TopV(i as usize, j), 2.0);
            f.push(Slot::V(i as usize, j, (nz - 1) as usize), -1.0);
            f
        } else {
            Form::one(Slot::V(i as usize, j, k as usize), 1.0)
        }
    }

    fn w(&self, i: isize, j: isize, k: usize) -> Form {
        let (nx, ny) = (self.nx, self.ny);
        if i < 0 {
            Form::one(Slot::W(0, j as usize, k), -1.0)
        } else if i >= nx {
            Form::one(Slot::W((nx - 1) as usize, j as usize, k), -1.0)
        } else if j < 0 {
            Form::one(Slot::W(i as usize, 0, k), -1.0)
        } else if j >= ny {
            Form::one(Slot::W(i as usize, (ny - 1) as usize, k), -1.0)
        } else {
            Form::one(Slot::W(i as usize, j as usize, k), 1.0)
        }
    }
}

fn wall_weight(idx: usize, n: usize) -> f64 {
    if idx == 0 || idx == n {
        0.5
    } else {
        1.0
    }
}

/// Enumerates every strain component as a linear form together with its
/// quadrature coefficient in `E_h / V`.
fn for_each_strain(g: &FluidGrid, mut visit: impl FnMut(f64, &Form)) {
    let (nx, ny, nz) = (g.nx, g.ny, g.nz);
    let gh = Ghosts {
        nx: nx as isize,
        ny: ny as isize,
        nz: nz as isize,
    };
    let (hx, hy, hz) = (g.hx, g.hy, g.hz);
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let mut d = Form::one(Slot::U(i + 1, j, k), 1.0 / hx);
                d.push(Slot::U(i, j, k), -1.0 / hx);
                visit(2.0, &d);
                let mut d = Form::one(Slot::V(i, j + 1, k), 1.0 / hy);
                d.push(Slot::V(i, j, k), -1.0 / hy);
                visit(2.0, &d);
                let mut d = Form::one(Slot::W(i, j, k + 1), 1.0 / hz);
                d.push(Slot::W(i, j, k), -1.0 / hz);
                visit(2.0, &d);
            }
        }
    }
    // d12 on z-edges
    for k in 0..nz {
        for j in 0..=ny {
            for i in 0..=nx {
                let w = wall_weight(i, nx) * wall_weight(j, ny);
                let (ii, jj, kk) = (i as isize, j as isize, k as isize);
                let d = Form::empty()
                    .add_scaled(&gh.u(i, jj, kk), 0.5 / hy)
                    .add_scaled(&gh.u(i, jj - 1, kk), -0.5 / hy)
                    .add_scaled(&gh.v(ii, j, kk), 0.5 / hx)
                    .add_scaled(&gh.v(ii - 1, j, kk), -0.5 / hx);
                visit(4.0 * w, &d);
            }
        }
    }
    // d13 on y-edges
    for k in 0..=nz {
        for j in 0..ny {
            for i in 0..=nx {
                let w = wall_weight(i, nx) * wall_weight(k, nz);
                let (ii, jj, kk) = (i as isize, j as isize, k as isize);
                let d = Form::empty()
                    .add_scaled(&gh.u(i, jj, kk), 0.5 / hz)
                    .add_scaled(&gh.u(i, jj, kk - 1), -0.5 / hz)
                    .add_scaled(&gh.w(ii, jj, k), 0.5 / hx)
                    .add_scaled(&gh.w(ii - 1, jj, k), -0.5 / hx);
                visit(4.0 * w, &d);
            }
        }
    }
    // d23 on x-edges
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..nx {
                let w = wall_weight(j, ny) * wall_weight(k, nz);
                let (ii, jj, kk) = (i as isize, j as isize, k as isize);
                let d = Form::empty()
                    .add_scaled(&gh.v(ii, j, kk), 0.5 / hz)
                    .add_scaled(&gh.v(ii, j, kk - 1), -0.5 / hz)
                    .add_scaled(&gh.w(ii, jj, k), 0.5 / hy)
                    .add_scaled(&gh.w(ii, jj - 1, k), -0.5 / hy);
                visit(4.0 * w, &d);
            }
        }
    }
}

/// Symmetric-gradient form `E_h(a, b)`.
pub fn strain_form(g: &FluidGrid, a: &StaggeredVelocity, b: &StaggeredVelocity) -> f64 {
    let mut s = 0.0;
    for_each_strain(g, |c, d| s += c * d.eval(a) * d.eval(b));
    s * g.cell_volume()
}

/// Gradient of `Phi = nu/2 E_h(v, v)` with respect to every stored velocity
/// value (wall slots included, they are simply ignored by callers).
pub fn viscous_gradient(g: &FluidGrid, nu: f64, v: &StaggeredVelocity) -> StaggeredVelocity {
    let mut out = StaggeredVelocity::zeros(g);
    let scale = nu * g.cell_volume();
    for_each_strain(g, |c, d| {
        let e = d.eval(v);
        d.scatter(&mut out, scale * c * e);
    });
    out
}

/// Reusable operators for one grid and viscosity.
#[derive(Clone, Debug)]
pub struct StokesWorkspace {
    pub fluid: FluidGrid,
    pub plate: PlateGrid,
    pub nu: f64,
    pub tol: f64,
    pub max_iter: usize,
    pressure: FastDiag3,
    pre_u: FastDiag3,
    pre_v: FastDiag3,
    pre_w: FastDiag3,
}

impl StokesWorkspace {
    pub fn new(fluid: FluidGrid, plate: PlateGrid, nu: f64, tol: f64) -> Result<Self> {
        if !(nu.is_finite() && nu > 0.0) {
            return Err(Error::Parameter {
                name: "nu",
                reason: format!("must be positive, got {nu}"),
            });
        }
        if !(tol.is_finite() && tol > 0.0) {
            return Err(Error::Parameter {
                name: "tol_linear",
                reason: format!("must be positive, got {tol}"),
            });
        }
        let (nx, ny, nz, hx, hy, hz) = (fluid.nx, fluid.ny, fluid.nz, fluid.hx, fluid.hy, fluid.hz);
        Ok(Self {
            fluid,
            plate,
            nu,
            tol,
            max_iter: 2000,
            pressure: FastDiag3::new(
                Basis1D::neumann_cells(nx, hx),
                Basis1D::neumann_cells(ny, hy),
                Basis1D::neumann_cells(nz, hz),
            ),
            pre_u: FastDiag3::new(
                Basis1D::dirichlet_nodes(nx, hx),
                Basis1D::dirichlet_cells(ny, hy),
                Basis1D::dirichlet_cells(nz, hz),
            ),
            pre_v: FastDiag3::new(
                Basis1D::dirichlet_cells(nx, hx),
                Basis1D::dirichlet_nodes(ny, hy),
                Basis1D::dirichlet_cells(nz, hz),
            ),
            pre_w: FastDiag3::new(
                Basis1D::dirichlet_cells(nx, hx),
                Basis1D::dirichlet_cells(ny, hy),
                Basis1D::dirichlet_nodes(nz, hz),
            ),
        })
    }

    fn check_compatible(&self, psi: &PlateVector) -> Result<()> {
        let pg = &self.plate;
        if psi.x.dim() != pg.dims() || psi.y.dim() != pg.dims() || psi.z.dim() != pg.dims() {
            return Err(Error::GridMismatch("plate data does not match plate grid".into()));
        }
        let ring = psi
            .components()
            .iter()
            .map(|c| pg.max_boundary_abs(c))
            .fold(0.0, f64::max);
        if ring > 0.0 {
            return Err(Error::BoundaryData(ring));
        }
        let mean = pg.mean(&psi.z);
        let scale = psi.z.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        let tol = 1e-10 * scale;
        if mean.abs() > tol {
            return Err(Error::Compatibility { mean, tol });
        }
        Ok(())
    }

    /// Projection onto discretely divergence-free interior fields.
    fn project(&self, r: &mut StaggeredVelocity) {
        let phi = self.pressure.solve(0.0, 1.0, &discrete_div(&self.fluid, r));
        r.axpy(1.0, &discrete_grad_p(&self.fluid, &phi));
    }

    /// Projects an interior-supported field onto the discretely
    /// divergence-free, zero-trace subspace.
    pub fn project_interior(&self, v: &mut StaggeredVelocity) {
        v.clear_boundary();
        self.project(v);
    }

    fn precondition(&self, alpha: f64, r: &StaggeredVelocity) -> StaggeredVelocity {
        let (nx, ny, nz) = (self.fluid.nx, self.fluid.ny, self.fluid.nz);
        let mut z = StaggeredVelocity::zeros(&self.fluid);
        let ru = r.u.slice(s![1..nx, .., ..]).to_owned();
        z.u.slice_mut(s![1..nx, .., ..]).assign(&self.pre_u.solve(alpha, self.nu, &ru));
        let rv = r.v.slice(s![.., 1..ny, ..]).to_owned();
        z.v.slice_mut(s![.., 1..ny, ..]).assign(&self.pre_v.solve(alpha, self.nu, &rv));
        let rw = r.w.slice(s![.., .., 1..nz]).to_owned();
        z.w.slice_mut(s![.., .., 1..nz]).assign(&self.pre_w.solve(alpha, self.nu, &rw));
        z
    }

    /// Interior part of `alpha x + (1/V) grad Phi(x)`.
    fn apply(&self, alpha: f64, x: &StaggeredVelocity) -> StaggeredVelocity {
        let mut y = viscous_gradient(&self.fluid, self.nu, x);
        y.scale(1.0 / self.fluid.cell_volume());
        y.axpy(alpha, x);
        y.clear_boundary();
        y
    }

    /// Solves `alpha v + (1/V) grad Phi(v) + grad p = rhs`, `div v = 0`,
    /// `v = L psi` on the top face, zero on the other walls.
    pub fn solve(&self, alpha: f64, rhs: &StaggeredVelocity, psi: &PlateVector) -> Result<(FluidField, SolveStats)> {
        self.check_compatible(psi)?;
        let fg = &self.fluid;
        let top: TopFace = lift_to_topface(&self.plate, psi)?;
        let mut boundary_only = StaggeredVelocity::zeros(fg);
        boundary_only.set_top(&top);

        // particular interior field cancelling the boundary flux
        let phi = self.pressure.solve(0.0, 1.0, &discrete_div(fg, &boundary_only));
        let mut x = discrete_grad_p(fg, &phi);
        x.axpy(1.0, &boundary_only);

        let mut b = rhs.clone();
        b.clear_boundary();
        let mut r = b.clone();
        r.axpy(-1.0, &self.apply(alpha, &x));
        self.project(&mut r);

        let bnorm = {
            let mut pb = b.clone();
            self.project(&mut pb);
            pb.dot(fg, &pb).sqrt()
        };
        let target = self.tol * bnorm.max(1.0);
        let mut rnorm = r.dot(fg, &r).sqrt();
        let mut iterations = 0;
        if rnorm > target {
            let mut z = self.precondition(alpha, &r);
            self.project(&mut z);
            let mut d = z.clone();
            let mut rz = r.dot(fg, &z);
            while rnorm > target {
                if iterations >= self.max_iter || !rnorm.is_finite() {
                    return Err(Error::NonConvergence {
                        solver: "stokes pcg",
                        iterations,
                        residual: rnorm,
                    });
                }
                let mut q = self.apply(alpha, &d);
                self.project(&mut q);
                let step = rz / d.dot(fg, &q);
                x.axpy(step, &d);
                r.axpy(-step, &q);
                rnorm = r.dot(fg, &r).sqrt();
                iterations += 1;
                z = self.precondition(alpha, &r);
                self.project(&mut z);
                let rz_new = r.dot(fg, &z);
                let beta = rz_new / rz;
                rz = rz_new;
                d.scale(beta);
                d.axpy(1.0, &z);
            }
        }

        // pressure from the unprojected residual
        let mut full = b;
        full.axpy(-1.0, &self.apply(alpha, &x));
        let mut p = self.pressure.solve(0.0, 1.0, &discrete_div(fg, &full));
        p.mapv_inplace(|q| -q);
        let mean = p.mean().unwrap_or(0.0);
        p -= mean;

        Ok((
            FluidField {
                v: x,
                p,
                boundary: psi.clone(),
            },
            SolveStats {
                iterations,
                residual: rnorm,
            },
        ))
    }

    /// Steady Stokes problem with body force `g` (sampled on faces) and top
    /// velocity `psi`.
    pub fn solve_stokes(&self, g: &StaggeredVelocity, psi: &PlateVector) -> Result<FluidField> {
        Ok(self.solve(0.0, g, psi)?.0)
    }

    pub fn lifting_n0(&self, psi: &PlateVector) -> Result<FluidField> {
        self.solve_stokes(&StaggeredVelocity::zeros(&self.fluid), psi)
    }

    /// One implicit Euler step of the unsteady Stokes equations.
    pub fn fluid_substep(
        &self,
        v_old: &StaggeredVelocity,
        boundary_velocity: &PlateVector,
        g: &StaggeredVelocity,
        dt: f64,
    ) -> Result<(FluidField, SolveStats)> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Parameter {
                name: "dt",
                reason: format!("must be positive, got {dt}"),
            });
        }
        let mut rhs = g.clone();
        rhs.axpy(1.0 / dt, v_old);
        self.solve(1.0 / dt, &rhs, boundary_velocity)
    }

    /// Nodal force the fluid exerts on the plate, consistent with the discrete
    /// weak form: the negative derivative of the fluid residual with respect
    /// to the top-face data, pulled back to plate nodes. Units of force
    /// (integrated over the node's control area).
    pub fn interface_load(&self, ff: &FluidField) -> PlateVector {
        let fg = &self.fluid;
        let grad = viscous_gradient(fg, self.nu, &ff.v);
        let nz = fg.nz;
        let area = fg.hx * fg.hy;
        let t = TopFace {
            u: -&grad.top_u,
            v: -&grad.top_v,
            w: ndarray::Array2::from_shape_fn((fg.nx, fg.ny), |(i, j)| {
                -grad.w[[i, j, nz]] + area * ff.p[[i, j, nz - 1]]
            }),
        };
        let mut f = lift_transpose(&self.plate, &t);
        for c in f.components_mut() {
            self.plate.zero_boundary(c);
        }
        f
    }

    /// Interface load expressed as a traction (force per unit area).
    pub fn interface_traction(&self, ff: &FluidField) -> PlateVector {
        self.interface_load(ff).scaled(-1.0 / self.plate.node_area())
    }
}

/// Fluid traction `(nu(v1_z + v3_x), nu(v2_z + v3_y), 2 nu v3_z - p)` at
/// `z = 0`, by one-sided second-order differences, averaged to plate nodes.
pub fn traction_tf(fg: &FluidGrid, pg: &PlateGrid, nu: f64, ff: &FluidField) -> PlateVector {
    let (nx, ny, nz) = (fg.nx, fg.ny, fg.nz);
    let hz = fg.hz;
    let v = &ff.v;
    let b = &ff.boundary;
    let uz = ndarray::Array2::from_shape_fn((nx + 1, ny), |(i, j)| {
        (8.0 * v.top_u[[i, j]] - 9.0 * v.u[[i, j, nz - 1]] + v.u[[i, j, nz - 2]]) / (3.0 * hz)
    });
    let vz = ndarray::Array2::from_shape_fn((nx, ny + 1), |(i, j)| {
        (8.0 * v.top_v[[i, j]] - 9.0 * v.v[[i, j, nz - 1]] + v.v[[i, j, nz - 2]]) / (3.0 * hz)
    });
    let normal = ndarray::Array2::from_shape_fn((nx, ny), |(i, j)| {
        let wz = (3.0 * v.w[[i, j, nz]] - 4.0 * v.w[[i, j, nz - 1]] + v.w[[i, j, nz - 2]]) / (2.0 * hz);
        let p0 = (3.0 * ff.p[[i, j, nz - 1]] - ff.p[[i, j, nz - 2]]) / 2.0;
        2.0 * nu * wz - p0
    });
    let mut out = PlateVector::zeros(pg);
    let avg = |vals: &[f64]| vals.iter().sum::<f64>() / vals.len() as f64;
    for j in 0..=ny {
        for i in 0..=nx {
            let js: Vec<usize> = [j.wrapping_sub(1), j].into_iter().filter(|&q| q < ny).collect();
            let is: Vec<usize> = [i.wrapping_sub(1), i].into_iter().filter(|&q| q < nx).collect();
            let d3x = if i > 0 && i < nx {
                (b.z[[i + 1, j]] - b.z[[i - 1, j]]) / (2.0 * pg.hx)
            } else {
                0.0
            };
            let d3y = if j > 0 && j < ny {
                (b.z[[i, j + 1]] - b.z[[i, j - 1]]) / (2.0 * pg.hy)
            } else {
                0.0
            };
            let u_part = avg(&js.iter().map(|&q| uz[[i, q]]).collect::<Vec<_>>());
            let v_part = avg(&is.iter().map(|&q| vz[[q, j]]).collect::<Vec<_>>());
            let n_vals: Vec<f64> = is.iter().flat_map(|&a| js.iter().map(move |&c| (a, c))).map(|(a, c)| normal[[a, c]]).collect();
            out.x[[i, j]] = nu * (u_part + d3x);
            out.y[[i, j]] = nu * (v_part + d3y);
            out.z[[i, j]] = avg(&n_vals);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grids, BoxGeometry};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(n: usize, nu: f64) -> StokesWorkspace {
        let (f, p) = build_grids(BoxGeometry::new(1.0, 1.0, 1.0, n, n, n).unwrap()).unwrap();
        StokesWorkspace::new(f, p, nu, 1e-11).unwrap()
    }

    fn random_velocity(g: &FluidGrid, rng: &mut ChaCha8Rng, top: bool) -> StaggeredVelocity {
        let mut v = StaggeredVelocity::zeros(g);
        for x in v.u.iter_mut().chain(v.v.iter_mut()).chain(v.w.iter_mut()) {
            *x = rng.gen_range(-1.0..1.0);
        }
        v.clear_boundary();
        if top {
            for x in v.top_u.iter_mut().chain(v.top_v.iter_mut()) {
                *x = rng.gen_range(-1.0..1.0);
            }
            let nz = g.nz;
            for x in v.w.slice_mut(s![.., .., nz]).iter_mut() {
                *x = rng.gen_range(-1.0..1.0);
            }
        }
        v
    }

    fn random_plate(pg: &PlateGrid, rng: &mut ChaCha8Rng) -> PlateVector {
        let mut b = PlateVector::zeros(pg);
        for c in b.components_mut() {
            c.mapv_inplace(|_| rng.gen_range(-1.0..1.0));
            pg.zero_boundary(c);
        }
        let m = pg.mean(&b.z) * (pg.nx as f64 * pg.hx * pg.ny as f64 * pg.hy) / (pg.interior_count() as f64 * pg.node_area());
        for (i, j) in pg.interior_nodes().collect::<Vec<_>>() {
            b.z[[i, j]] -= m;
        }
        b
    }

    #[test]
    fn viscous_gradient_is_derivative_of_form() {
        let ws = setup(5, 0.7);
        let g = &ws.fluid;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let v = random_velocity(g, &mut rng, true);
        let d = random_velocity(g, &mut rng, true);
        let grad = viscous_gradient(g, 0.7, &v);
        let all_dot = |a: &StaggeredVelocity, b: &StaggeredVelocity| {
            (&a.u * &b.u).sum() + (&a.v * &b.v).sum() + (&a.w * &b.w).sum() + (&a.top_u * &b.top_u).sum() + (&a.top_v * &b.top_v).sum()
        };
        let lhs = all_dot(&grad, &d);
        let rhs = 0.7 * strain_form(g, &v, &d);
        assert!((lhs - rhs).abs() < 1e-10 * rhs.abs().max(1.0));
        let sym = strain_form(g, &v, &d) - strain_form(g, &d, &v);
        assert!(sym.abs() < 1e-12);
        assert!(strain_form(g, &v, &v) > 0.0);
    }

    #[test]
    fn viscous_operator_matches_laplacian_plus_grad_div() {
        let ws = setup(6, 1.0);
        let g = &ws.fluid;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v = random_velocity(g, &mut rng, false);
        let mut a = viscous_gradient(g, 1.0, &v);
        a.scale(1.0 / g.cell_volume());
        let lap = crate::grid::vector_laplacian(g, &v);
        let gd = discrete_grad_p(g, &discrete_div(g, &v));
        for i in 1..g.nx {
            for j in 0..g.ny {
                for k in 0..g.nz {
                    let expect = -(lap.u[[i, j, k]] + gd.u[[i, j, k]]);
                    assert!((a.u[[i, j, k]] - expect).abs() < 1e-9, "{i} {j} {k}");
                }
            }
        }
    }

    #[test]
    fn zero_data_gives_zero() {
        let ws = setup(6, 1.0);
        let ff = ws.solve_stokes(&StaggeredVelocity::zeros(&ws.fluid), &PlateVector::zeros(&ws.plate)).unwrap();
        assert_eq!(ff.v.max_abs(), 0.0);
        assert_eq!(ff.p.iter().fold(0.0_f64, |m, v| m.max(v.abs())), 0.0);
    }

    #[test]
    fn hydrostatic_pressure() {
        let ws = setup(6, 1.0);
        let g = StaggeredVelocity::sample_interior(&ws.fluid, |_, _, _| [0.0, 0.0, -1.0]);
        let ff = ws.solve_stokes(&g, &PlateVector::zeros(&ws.plate)).unwrap();
        assert!(ff.v.max_abs() < 1e-10);
        let mean_z: f64 = (0..ws.fluid.nz).map(|k| ws.fluid.zc(k)).sum::<f64>() / ws.fluid.nz as f64;
        for ((_, _, k), &p) in ff.p.indexed_iter() {
            assert!((p - (-ws.fluid.zc(k) + mean_z)).abs() < 1e-10);
        }
    }

    #[test]
    fn lifting_is_divergence_free_linear_and_traces() {
        let ws = setup(6, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let a = random_plate(&ws.plate, &mut rng);
        let b = random_plate(&ws.plate, &mut rng);
        let na = ws.lifting_n0(&a).unwrap();
        let nb = ws.lifting_n0(&b).unwrap();
        let mut comb = a.scaled(2.0);
        comb.axpy(-3.0, &b);
        let nc = ws.lifting_n0(&comb).unwrap();
        let mut expect = na.v.clone();
        expect.scale(2.0);
        expect.axpy(-3.0, &nb.v);
        let mut diff = nc.v.clone();
        diff.axpy(-1.0, &expect);
        assert!(diff.max_abs() < 1e-8 * expect.max_abs());
        let div = discrete_div(&ws.fluid, &nc.v);
        assert!(div.iter().fold(0.0_f64, |m, v| m.max(v.abs())) < 1e-10);
        assert!(nc.p.mean().unwrap().abs() < 1e-12);
        assert_eq!(nc.trace_to_plate(), comb);
        let top = lift_to_topface(&ws.plate, &comb).unwrap();
        let nz = ws.fluid.nz;
        let wtop = nc.v.w.slice(s![.., .., nz]).to_owned();
        assert!((&wtop - &top.w).iter().all(|d| d.abs() < 1e-14));
    }

    #[test]
    fn rejects_incompatible_or_ring_data() {
        let ws = setup(5, 1.0);
        let mut b = PlateVector::zeros(&ws.plate);
        b.z[[2, 2]] = 1.0;
        assert!(matches!(ws.lifting_n0(&b), Err(Error::Compatibility { .. })));
        let mut b = PlateVector::zeros(&ws.plate);
        b.x[[0, 2]] = 1.0;
        assert!(matches!(ws.lifting_n0(&b), Err(Error::BoundaryData(_))));
    }

    #[test]
    fn substep_energy_identity() {
        let ws = setup(6, 0.3);
        let fg = ws.fluid;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let psi = random_plate(&ws.plate, &mut rng);
        let mut v_old = ws.lifting_n0(&random_plate(&ws.plate, &mut rng)).unwrap().v;
        v_old.clear_top();
        let g = random_velocity(&fg, &mut rng, false);
        let dt = 0.05;
        let (ff, _) = ws.fluid_substep(&v_old, &psi, &g, dt).unwrap();
        let mut dv = ff.v.clone();
        dv.axpy(-1.0, &v_old);
        let lhs = dv.dot(&fg, &ff.v) / dt + ws.nu * strain_form(&fg, &ff.v, &ff.v);
        let f = ws.interface_load(&ff);
        let rhs = g.dot(&fg, &ff.v)
            - ((&f.x * &psi.x).sum() + (&f.y * &psi.y).sum() + (&f.z * &psi.z).sum());
        assert!((lhs - rhs).abs() < 1e-8 * lhs.abs().max(1.0), "{lhs} {rhs}");
    }

    #[test]
    fn huge_dt_approaches_steady_solve() {
        let ws = setup(6, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let psi = random_plate(&ws.plate, &mut rng);
        let g = random_velocity(&ws.fluid, &mut rng, false);
        let steady = ws.solve_stokes(&g, &psi).unwrap();
        let (step, _) = ws.fluid_substep(&StaggeredVelocity::zeros(&ws.fluid), &psi, &g, 1e8).unwrap();
        let mut d = step.v.clone();
        d.axpy(-1.0, &steady.v);
        assert!(d.max_abs() < 1e-7 * steady.v.max_abs());
        // the steady solution is a fixed point of the substep
        let (again, _) = ws.fluid_substep(&steady.v, &psi, &g, 0.1).unwrap();
        let mut d = again.v.clone();
        d.axpy(-1.0, &steady.v);
        assert!(d.max_abs() < 1e-8 * steady.v.max_abs());
    }

    #[test]
    fn traction_of_quadratic_shear() {
        let depth = 1.0;
        let (fg, pg) = build_grids(BoxGeometry::new(1.0, 1.0, depth, 6, 6, 6).unwrap()).unwrap();
        let mut ff = FluidField::zeros(&fg, &pg);
        for ((_, _, k), x) in ff.v.u.indexed_iter_mut() {
            let z = fg.zc(k);
            *x = z * z + depth * z;
        }
        let t = traction_tf(&fg, &pg, 1.0, &ff);
        for (i, j) in pg.interior_nodes() {
            assert!((t.x[[i, j]] - depth).abs() < 1e-12);
            assert!(t.y[[i, j]].abs() < 1e-12 && t.z[[i, j]].abs() < 1e-12);
        }
        let zero = traction_tf(&fg, &pg, 1.0, &FluidField::zeros(&fg, &pg));
        assert_eq!(zero.max_abs(), 0.0);
    }
}
