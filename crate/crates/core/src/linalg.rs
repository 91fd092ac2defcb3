//! Small dense/banded linear algebra kernels: separable fast diagonalization
//! for the box Laplacians and a banded Cholesky factorization for the plate.

use ndarray::{s, Array1, Array2, Array3, Axis};

use crate::error::{Error, Result};

/// Orthonormal eigenbasis of a 1-D second-difference operator.
#[derive(Clone, Debug)]
pub struct Basis1D {
    /// Columns are orthonormal eigenvectors.
    pub q: Array2<f64>,
    /// Eigenvalues of `-d2/dx2`.
    pub lambda: Array1<f64>,
}

impl Basis1D {
    fn from_fn(n: usize, h: f64, f: impl Fn(usize, usize) -> f64, freq: impl Fn(usize) -> f64, period: f64) -> Self {
        let mut q = Array2::from_shape_fn((n, n), |(i, k)| f(i, k));
        for mut col in q.columns_mut() {
            let norm = col.dot(&col).sqrt();
            col /= norm;
        }
        let lambda = Array1::from_shape_fn(n, |k| {
            let s = (std::f64::consts::PI * freq(k) / (2.0 * period)).sin();
            4.0 / (h * h) * s * s
        });
        Self { q, lambda }
    }

    /// Node-based unknowns `1..n-1` with homogeneous Dirichlet values at `0`
    /// and `n` (n intervals).
    pub fn dirichlet_nodes(n: usize, h: f64) -> Self {
        let pi = std::f64::consts::PI;
        Self::from_fn(
            n - 1,
            h,
            |i, k| (pi * (k + 1) as f64 * (i + 1) as f64 / n as f64).sin(),
            |k| (k + 1) as f64,
            n as f64,
        )
    }

    /// Cell-centred unknowns with odd reflection (Dirichlet at cell faces).
    pub fn dirichlet_cells(n: usize, h: f64) -> Self {
        let pi = std::f64::consts::PI;
        Self::from_fn(
            n,
            h,
            |j, k| (pi * (k + 1) as f64 * (j as f64 + 0.5) / n as f64).sin(),
            |k| (k + 1) as f64,
            n as f64,
        )
    }

    /// Cell-centred unknowns with even reflection (Neumann); mode 0 is constant.
    pub fn neumann_cells(n: usize, h: f64) -> Self {
        let pi = std::f64::consts::PI;
        Self::from_fn(
            n,
            h,
            |j, k| (pi * k as f64 * (j as f64 + 0.5) / n as f64).cos(),
            |k| k as f64,
            n as f64,
        )
    }

    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
    }
}

/// Applies `m` (or its transpose) along one axis of a 3-D array.
fn along_axis(x: &Array3<f64>, m: &Array2<f64>, axis: usize, transpose: bool) -> Array3<f64> {
    let m = if transpose { m.t().to_owned() } else { m.clone() };
    let mut out = Array3::zeros(x.dim());
    for (src, mut dst) in x.lanes(Axis(axis)).into_iter().zip(out.lanes_mut(Axis(axis))) {
        dst.assign(&m.dot(&src));
    }
    out
}

/// Solver for `(shift + scale * (Lx + Ly + Lz)) x = b` on a tensor-product grid.
#[derive(Clone, Debug)]
pub struct FastDiag3 {
    pub bases: [Basis1D; 3],
}

impl FastDiag3 {
    pub fn new(bx: Basis1D, by: Basis1D, bz: Basis1D) -> Self {
        Self { bases: [bx, by, bz] }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.bases[0].len(), self.bases[1].len(), self.bases[2].len())
    }

    /// Modes whose eigenvalue vanishes are projected out (pseudo-inverse).
    pub fn solve(&self, shift: f64, scale: f64, b: &Array3<f64>) -> Array3<f64> {
        let mut y = b.clone();
        for (ax, basis) in self.bases.iter().enumerate() {
            y = along_axis(&y, &basis.q, ax, true);
        }
        let [bx, by, bz] = &self.bases;
        let top = |b: &Basis1D| b.lambda.iter().fold(0.0_f64, |m, v| m.max(*v));
        let tol = 1e-12 * (shift.abs() + scale.abs() * (top(bx) + top(by) + top(bz)));
        for ((i, j, k), v) in y.indexed_iter_mut() {
            let d = shift + scale * (bx.lambda[i] + by.lambda[j] + bz.lambda[k]);
            *v = if d.abs() > tol { *v / d } else { 0.0 };
        }
        for (ax, basis) in self.bases.iter().enumerate() {
            y = along_axis(&y, &basis.q, ax, false);
        }
        y
    }
}

/// Symmetric positive definite banded matrix stored by lower band, factored
/// in place by Cholesky.
#[derive(Clone, Debug)]
pub struct BandedSpd {
    n: usize,
    bw: usize,
    /// Row `i`, offset `d` holds entry `(i, i - d)`.
    data: Array2<f64>,
    factored: bool,
}

impl BandedSpd {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: Array2::zeros((n, bw + 1)),
            factored: false,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    /// Adds `v` to entry `(i, j)`; only the lower triangle is stored so
    /// symmetric contributions should be added once.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        let d = r - c;
        assert!(d <= self.bw, "entry ({i},{j}) outside band {}", self.bw);
        self.data[[r, d]] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        let d = r - c;
        if d > self.bw {
            0.0
        } else {
            self.data[[r, d]]
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert!(!self.factored);
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            y[i] += self.data[[i, 0]] * x[i];
            for d in 1..=self.bw.min(i) {
                let a = self.data[[i, d]];
                y[i] += a * x[i - d];
                y[i - d] += a * x[i];
            }
        }
        y
    }

    pub fn factor(mut self) -> Result<Self> {
        let (n, bw) = (self.n, self.bw);
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let mut sum = self.data[[i, i - j]];
                let klo = lo.max(j.saturating_sub(bw));
                for k in klo..j {
                    sum -= self.data[[i, i - k]] * self.data[[j, j - k]];
                }
                if i == j {
                    if !(sum > 0.0) || !sum.is_finite() {
                        return Err(Error::NonConvergence {
                            solver: "banded cholesky",
                            iterations: i,
                            residual: sum,
                        });
                    }
                    self.data[[i, 0]] = sum.sqrt();
                } else {
                    self.data[[i, i - j]] = sum / self.data[[j, 0]];
                }
            }
        }
        self.factored = true;
        Ok(self)
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert!(self.factored, "solve called before factor");
        let (n, bw) = (self.n, self.bw);
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.data[[i, i - k]] * y[k];
            }
            y[i] = s / self.data[[i, 0]];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..(i + bw + 1).min(n) {
                s -= self.data[[k, k - i]] * y[k];
            }
            y[i] = s / self.data[[i, 0]];
        }
        y
    }

    /// Dense copy of the lower band, for tests.
    pub fn band(&self) -> ndarray::ArrayView2<'_, f64> {
        self.data.slice(s![.., ..])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn second_difference(n: usize, h: f64, lo: f64, hi: f64) -> Array2<f64> {
        // lo/hi: coefficient added to the diagonal at the ends by the ghost rule
        let mut a = Array2::zeros((n, n));
        for i in 0..n {
            a[[i, i]] = 2.0 / (h * h);
            if i > 0 {
                a[[i, i - 1]] = -1.0 / (h * h);
            }
            if i + 1 < n {
                a[[i, i + 1]] = -1.0 / (h * h);
            }
        }
        a[[0, 0]] += lo / (h * h);
        a[[n - 1, n - 1]] += hi / (h * h);
        a
    }

    fn check_basis(b: &Basis1D, a: &Array2<f64>) {
        let n = b.len();
        let qtq = b.q.t().dot(&b.q);
        for i in 0..n {
            for j in 0..n {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((qtq[[i, j]] - e).abs() < 1e-12);
            }
        }
        let aq = a.dot(&b.q);
        for k in 0..n {
            for i in 0..n {
                assert!((aq[[i, k]] - b.lambda[k] * b.q[[i, k]]).abs() < 1e-9 * b.lambda[k].max(1.0));
            }
        }
    }

    #[test]
    fn bases_diagonalize_their_operators() {
        let h = 0.1;
        check_basis(&Basis1D::dirichlet_nodes(7, h), &second_difference(6, h, 0.0, 0.0));
        check_basis(&Basis1D::dirichlet_cells(6, h), &second_difference(6, h, 1.0, 1.0));
        check_basis(&Basis1D::neumann_cells(6, h), &second_difference(6, h, -1.0, -1.0));
        assert!(Basis1D::neumann_cells(6, h).lambda[0].abs() < 1e-14);
    }

    #[test]
    fn fast_diag_inverts_shifted_laplacian() {
        let (nx, ny, nz) = (5, 4, 6);
        let (hx, hy, hz) = (0.2, 0.25, 1.0 / 6.0);
        let fd = FastDiag3::new(
            Basis1D::dirichlet_nodes(nx + 1, hx),
            Basis1D::dirichlet_cells(ny, hy),
            Basis1D::neumann_cells(nz, hz),
        );
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let b = Array3::from_shape_fn(fd.dims(), |_| rng.gen_range(-1.0..1.0));
        let x = fd.solve(3.0, 0.5, &b);
        let ax = second_difference(nx, hx, 0.0, 0.0);
        let ay = second_difference(ny, hy, 1.0, 1.0);
        let az = second_difference(nz, hz, -1.0, -1.0);
        let mut r = &x * 3.0;
        r = r + &(along_axis(&x, &ax, 0, false) * 0.5);
        r = r + &(along_axis(&x, &ay, 1, false) * 0.5);
        r = r + &(along_axis(&x, &az, 2, false) * 0.5);
        let err = (&r - &b).iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn pure_neumann_pseudo_inverse() {
        let n = 5;
        let fd = FastDiag3::new(
            Basis1D::neumann_cells(n, 0.2),
            Basis1D::neumann_cells(n, 0.2),
            Basis1D::neumann_cells(n, 0.2),
        );
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut b = Array3::from_shape_fn(fd.dims(), |_| rng.gen_range(-1.0..1.0));
        let mean = b.mean().unwrap();
        b -= mean;
        let x = fd.solve(0.0, 1.0, &b);
        assert!(x.mean().unwrap().abs() < 1e-12);
        let a = second_difference(n, 0.2, -1.0, -1.0);
        let r = along_axis(&x, &a, 0, false) + along_axis(&x, &a, 1, false) + along_axis(&x, &a, 2, false);
        assert!((&r - &b).iter().fold(0.0_f64, |m, v| m.max(v.abs())) < 1e-10);
    }

    #[test]
    fn banded_cholesky_matches_matvec() {
        let n = 30;
        let bw = 4;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut a = BandedSpd::zeros(n, bw);
        for i in 0..n {
            a.add(i, i, 10.0);
            for d in 1..=bw.min(i) {
                a.add(i, i - d, rng.gen_range(-1.0..1.0));
            }
        }
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b = a.matvec(&x);
        let f = a.factor().unwrap();
        let y = f.solve(&b);
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn banded_cholesky_rejects_indefinite() {
        let mut a = BandedSpd::zeros(3, 1);
        a.add(0, 0, 1.0);
        a.add(1, 1, -1.0);
        a.add(2, 2, 1.0);
        assert!(a.factor().is_err());
    }
}
