//! Pointwise constitutive algebra of the plate, generic over the scalar so it
//! can be checked in exact rational arithmetic.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Symmetric 2x2 tensor stored by its three independent components.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymTensor2<T> {
    pub e11: T,
    pub e12: T,
    pub e22: T,
}

impl<T: Scalar> SymTensor2<T> {
    pub fn new(e11: T, e12: T, e22: T) -> Self {
        Self { e11, e12, e22 }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn identity() -> Self {
        Self::new(T::one(), T::zero(), T::one())
    }

    pub fn trace(&self) -> T {
        self.e11 + self.e22
    }

    /// Frobenius inner product `a : b`.
    pub fn contract(&self, b: &Self) -> T {
        self.e11 * b.e11 + T::two() * self.e12 * b.e12 + self.e22 * b.e22
    }

    pub fn add(&self, b: &Self) -> Self {
        Self::new(self.e11 + b.e11, self.e12 + b.e12, self.e22 + b.e22)
    }

    pub fn scale(&self, a: T) -> Self {
        Self::new(a * self.e11, a * self.e12, a * self.e22)
    }

    /// Matrix-vector product.
    pub fn apply(&self, s: [T; 2]) -> [T; 2] {
        [self.e11 * s[0] + self.e12 * s[1], self.e12 * s[0] + self.e22 * s[1]]
    }

    /// `(a (x) b + b (x) a) / 2`.
    pub fn sym_outer(a: [T; 2], b: [T; 2]) -> Self {
        Self::new(a[0] * b[0], (a[0] * b[1] + a[1] * b[0]) * T::half(), a[1] * b[1])
    }
}

pub fn check_poisson<T: Scalar>(mu: T) -> Result<()> {
    if mu > T::zero() && mu < T::half() {
        Ok(())
    } else {
        Err(Error::Parameter {
            name: "mu",
            reason: format!("Poisson ratio must lie in (0, 1/2), got {mu:?}"),
        })
    }
}

/// Stress law `C(eps) = 2/(1-mu) [mu tr(eps) I + (1-mu) eps]`.
pub fn stress<T: Scalar>(eps: &SymTensor2<T>, mu: T) -> SymTensor2<T> {
    let c = T::two() / (T::one() - mu);
    let t = mu * eps.trace();
    let a = T::one() - mu;
    SymTensor2::new(c * (t + a * eps.e11), c * a * eps.e12, c * (t + a * eps.e22))
}

pub fn stress_checked<T: Scalar>(eps: &SymTensor2<T>, mu: T) -> Result<SymTensor2<T>> {
    check_poisson(mu)?;
    Ok(stress(eps, mu))
}

/// Symmetric in-plane strain from the gradients of the in-plane displacements.
pub fn eps0<T: Scalar>(grad_u1: [T; 2], grad_u2: [T; 2]) -> SymTensor2<T> {
    SymTensor2::new(grad_u1[0], (grad_u1[1] + grad_u2[0]) * T::half(), grad_u2[1])
}

/// Von Karman strain `eps0(u) + grad w (x) grad w / 2`.
pub fn strain<T: Scalar>(grad_u1: [T; 2], grad_u2: [T; 2], grad_w: [T; 2]) -> SymTensor2<T> {
    eps0(grad_u1, grad_u2).add(&SymTensor2::sym_outer(grad_w, grad_w).scale(T::half()))
}

/// Linearization of [`strain`] at `grad_w` in the direction of the rate
/// fields: `eps0(ut) + (grad w (x) grad wt + grad wt (x) grad w) / 2`.
pub fn strain_rate<T: Scalar>(grad_u1t: [T; 2], grad_u2t: [T; 2], grad_w: [T; 2], grad_wt: [T; 2]) -> SymTensor2<T> {
    eps0(grad_u1t, grad_u2t).add(&SymTensor2::sym_outer(grad_w, grad_wt))
}
