use fluidplate::grid::{build_grids, discrete_div, discrete_grad_p, BoxGeometry, FluidGrid, PlateGrid, PlateVector, StaggeredVelocity};
use fluidplate::plate::law::{stress, SymTensor2};
use fluidplate::stokes::{strain_form, StokesWorkspace};
use ndarray::Array3;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn grids(nx: usize, ny: usize, nz: usize) -> (FluidGrid, PlateGrid) {
    build_grids(BoxGeometry::new(1.0, 0.8, 0.6, nx, ny, nz).unwrap()).unwrap()
}

fn random_velocity(g: &FluidGrid, rng: &mut ChaCha8Rng) -> StaggeredVelocity {
    let mut v = StaggeredVelocity::zeros(g);
    for x in v.u.iter_mut().chain(v.v.iter_mut()).chain(v.w.iter_mut()) {
        *x = rng.gen_range(-1.0..1.0);
    }
    v.clear_boundary();
    v
}

fn random_interface(pg: &PlateGrid, rng: &mut ChaCha8Rng) -> PlateVector {
    let mut b = PlateVector::zeros(pg);
    for c in b.components_mut() {
        c.mapv_inplace(|_| rng.gen_range(-1.0..1.0));
        pg.zero_boundary(c);
    }
    let m = pg.mean(&b.z);
    for (i, j) in pg.interior_nodes().collect::<Vec<_>>() {
        b.z[[i, j]] -= m * (pg.nx * pg.ny) as f64 / pg.interior_count() as f64;
    }
    b
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn gradient_is_minus_adjoint_of_divergence(seed in any::<u64>(), nx in 4usize..8, ny in 4usize..8, nz in 4usize..7) {
        let (g, _) = grids(nx, ny, nz);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = Array3::from_shape_fn(g.p_dims(), |_| rng.gen_range(-1.0..1.0));
        let v = random_velocity(&g, &mut rng);
        let lhs = discrete_grad_p(&g, &p).dot(&g, &v);
        let rhs = -(&p * &discrete_div(&g, &v)).sum() * g.cell_volume();
        prop_assert!((lhs - rhs).abs() <= 1e-11 * lhs.abs().max(1.0));
    }

    #[test]
    fn elasticity_tensor_is_positive_definite(e11 in -1e3f64..1e3, e12 in -1e3f64..1e3, e22 in -1e3f64..1e3, mu in 0.001f64..0.499) {
        prop_assume!(e11.abs() + e12.abs() + e22.abs() > 1e-9);
        let e = SymTensor2::new(e11, e12, e22);
        prop_assert!(stress(&e, mu).contract(&e) > 0.0);
    }

    #[test]
    fn viscous_form_is_symmetric_and_nonnegative(seed in any::<u64>()) {
        let (g, pg) = grids(5, 4, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = random_velocity(&g, &mut rng);
        let b = random_velocity(&g, &mut rng);
        let top = fluidplate::grid::lift_to_topface(&pg, &random_interface(&pg, &mut rng)).unwrap();
        a.set_top(&top);
        let (ab, ba) = (strain_form(&g, &a, &b), strain_form(&g, &b, &a));
        prop_assert!((ab - ba).abs() <= 1e-12 * ab.abs().max(1.0));
        prop_assert!(strain_form(&g, &a, &a) > 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn stokes_lifting_is_linear(seed in any::<u64>(), alpha in -3.0f64..3.0, beta in -3.0f64..3.0) {
        let (g, pg) = grids(6, 6, 5);
        let ws = StokesWorkspace::new(g, pg, 0.7, 1e-12).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b) = (random_interface(&pg, &mut rng), random_interface(&pg, &mut rng));
        let mut ab = a.scaled(alpha);
        ab.axpy(beta, &b);
        let na = ws.lifting_n0(&a).unwrap().v;
        let nb = ws.lifting_n0(&b).unwrap().v;
        let mut combo = ws.lifting_n0(&ab).unwrap().v;
        combo.axpy(-alpha, &na);
        combo.axpy(-beta, &nb);
        let scale = na.max_abs().max(nb.max_abs()) * (alpha.abs() + beta.abs()).max(1.0);
        prop_assert!(combo.max_abs() <= 1e-8 * scale, "{:e}", combo.max_abs() / scale);
    }
}
