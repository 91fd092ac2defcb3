//! Named analytic initial profiles for the plate.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::grid::{PlateGrid, PlateVector};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    Zero,
    /// Mean-free clamped bump in `w`:
    /// `A [s1(x) s1(y) - s2(x) s2(y)]` with `sk(x) = sin^2(k pi x / l)`.
    Bump { amplitude: f64 },
    /// Clamped in-plane field `u1 = A s1(x) s1(y) sin(2 pi y / ly)`, `u2 = 0`.
    Shear { amplitude: f64 },
}

fn s(k: f64, x: f64, l: f64) -> f64 {
    (k * PI * x / l).sin().powi(2)
}

impl Profile {
    pub fn sample(&self, pg: &PlateGrid) -> PlateVector {
        let mut out = PlateVector::zeros(pg);
        let (lx, ly) = (pg.nx as f64 * pg.hx, pg.ny as f64 * pg.hy);
        for (i, j) in pg.interior_nodes().collect::<Vec<_>>() {
            let (x, y) = (pg.x(i), pg.y(j));
            match *self {
                Profile::Zero => {}
                Profile::Bump { amplitude } => {
                    out.z[[i, j]] = amplitude * (s(1.0, x, lx) * s(1.0, y, ly) - s(2.0, x, lx) * s(2.0, y, ly));
                }
                Profile::Shear { amplitude } => {
                    out.x[[i, j]] = amplitude * s(1.0, x, lx) * s(1.0, y, ly) * (2.0 * PI * y / ly).sin();
                }
            }
        }
        out
    }
}
