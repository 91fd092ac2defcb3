//! Scalar abstraction for the pointwise constitutive algebra.
//!
//! The plate stress law and the strain tensors only need field operations,
//! so they are written against [`Scalar`] and work for `f32`, `f64` and
//! exact rationals alike. Grid solvers are fixed to `f64`.

use num_traits::Num;

pub trait Scalar: Num + Copy + PartialOrd + std::fmt::Debug {
    fn two() -> Self {
        Self::one() + Self::one()
    }

    fn half() -> Self {
        Self::one() / Self::two()
    }
}

impl<T> Scalar for T where T: Num + Copy + PartialOrd + std::fmt::Debug {}
