use std::sync::Arc;

use maxreg::duhamel::{nu_shift, nu_unshift, solve_reference};
use maxreg::problems::{
    assemble_elliptic, export_writer, generate_path, ingest_reader, uniform_grid, Boundary, Fem1D, PathKind,
    PathParams,
};
use maxreg::{Forcing, FormPath, GelfandTriple, Interp, Scheme, Space};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn spd(n: usize, entries: &[f64], shift: f64) -> DMatrix<f64> {
    let b = DMatrix::from_iterator(n, n, entries.iter().copied().cycle().take(n * n));
    &b * b.transpose() + DMatrix::identity(n, n) * shift
}

fn triple_strategy() -> impl Strategy<Value = (GelfandTriple, usize)> {
    (2usize..6, prop::collection::vec(-1.0f64..1.0, 36), prop::collection::vec(-1.0f64..1.0, 36)).prop_map(
        |(n, a, b)| {
            let mass = spd(n, &a, 0.5);
            let gram = &mass + spd(n, &b, 0.1);
            (GelfandTriple::new(mass, gram).unwrap(), n)
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn norms_are_ordered((tr, n) in triple_strategy(), x in prop::collection::vec(-1.0f64..1.0, 6)) {
        let u = DVector::from_iterator(n, x.into_iter().take(n));
        let h = tr.h_norm(&u);
        let v = tr.v_norm(&u);
        let dual = tr.norm(&u, Space::Dual(1.0)).unwrap();
        prop_assert!(v + 1e-12 >= h * tr.lambda_min().sqrt());
        prop_assert!(dual <= h / tr.lambda_min().sqrt() + 1e-12);
        let back = tr.from_coords(&tr.coords(&u));
        prop_assert!((back - &u).amax() <= 1e-10 * (1.0 + u.amax()));
    }

    #[test]
    fn reduction_is_an_isometry_on_coordinates((tr, n) in triple_strategy(), g in 0.0f64..1.0) {
        let id = tr.reduce_form(tr.gram(), 1.0, 1.0);
        prop_assert!((id - DMatrix::identity(n, n)).amax() < 1e-9);
        let m = tr.form_opnorm(tr.mass(), 1.0, g).unwrap();
        prop_assert!(m <= 1.0 / tr.lambda_min().powf(0.5 * (1.0 + g)) * (1.0 + 1e-9));
    }

    #[test]
    fn difference_norm_is_a_metric(a in 0.5f64..2.0, b in -1.0f64..1.0, t in 0.0f64..1.0, s in 0.0f64..1.0, r in 0.0f64..1.0) {
        let path = FormPath::scalar(2.0, 1.0, 8, Interp::PiecewiseLinear, |x| a + 0.4 * b * (6.0 * x).sin()).unwrap();
        let d = |x: f64, y: f64| path.diff_norm(x, y, 1.0).unwrap();
        prop_assert_eq!(d(t, t), 0.0);
        prop_assert!((d(t, s) - d(s, t)).abs() < 1e-14);
        prop_assert!(d(t, s) <= d(t, r) + d(r, s) + 1e-12);
    }

    #[test]
    fn subdivisions_certify(alpha in 0.55f64..1.0, amp in 0.05f64..0.6, seed in 0u64..100, eps in 0.05f64..0.5) {
        let fem = Fem1D::new(6, Boundary::Dirichlet).unwrap();
        let p = PathParams { alpha, amp, seed, elements: fem.elements(), ..Default::default() };
        let c = generate_path(PathKind::Holder, &p, &uniform_grid(1.0, 65).unwrap()).unwrap();
        let path = assemble_elliptic(&c, Boundary::Dirichlet, 6).unwrap();
        let sub = path.subdivide(eps).unwrap();
        prop_assert_eq!(sub.breakpoints[0], 0.0);
        prop_assert_eq!(*sub.breakpoints.last().unwrap(), 1.0);
        for (cert, (a, b)) in sub.certificates.iter().zip(sub.intervals()) {
            prop_assert!(*cert < eps);
            prop_assert!(path.eq_hyp_certificate(a, b, 2).unwrap() < eps);
        }
    }

    #[test]
    fn shift_round_trip(nu in 0.0f64..5.0, c in -2.0f64..2.0) {
        let path = FormPath::scalar(1.0, 1.0, 4, Interp::PiecewiseLinear, |t| 1.0 + t).unwrap();
        let f = Forcing::new(1, move |t| DVector::from_element(1, c * (3.0 * t).cos()));
        let u0 = DVector::from_element(1, 1.0);
        let u = solve_reference(&path, &u0, &f, 1.0 / 32.0, Scheme::BackwardEuler).unwrap();
        let (sp, sf) = nu_shift(&path, &f, nu).unwrap();
        prop_assert!((sp.form_at(0.3).unwrap()[(0, 0)] - 1.3 - nu).abs() < 1e-12);
        prop_assert!((sf.eval(0.7)[0] - (-0.7 * nu).exp() * f.eval(0.7)[0]).abs() < 1e-12);
        let damped: Vec<DVector<f64>> = u.grid().iter().zip(u.values()).map(|(t, v)| v * (-nu * t).exp()).collect();
        let v = maxreg::Trajectory::assemble(&sp, &sf, u.grid().to_vec(), damped, u.diagnostics().clone()).unwrap();
        let back = nu_unshift(&path, &f, &v, nu).unwrap();
        for (a, b) in back.values().iter().zip(u.values()) {
            prop_assert!((a - b).amax() <= 1e-12 * (1.0 + b.amax()));
        }
    }

    #[test]
    fn csv_round_trip(values in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 3), 2..20)) {
        let grid = uniform_grid(2.0, values.len()).unwrap();
        let path = maxreg::problems::CoefficientPath::new(
            PathKind::File, PathParams::default(), grid.clone(), values.clone(), Interp::PiecewiseLinear,
        ).unwrap();
        let mut buf = Vec::new();
        export_writer(&path, &mut buf).unwrap();
        let back = ingest_reader(buf.as_slice()).unwrap();
        prop_assert_eq!(back.grid, grid);
        prop_assert_eq!(back.values, values);
    }

    #[test]
    fn generators_respect_bounds(kind in prop::sample::select(vec![PathKind::Holder, PathKind::FourierH, PathKind::Affine, PathKind::Random]), seed in 0u64..1000) {
        let p = PathParams { mid: 2.0, amp: 1.0, lo: 1.0, hi: 3.0, seed, elements: 4, ..Default::default() };
        let c = generate_path(kind, &p, &uniform_grid(1.0, 33).unwrap()).unwrap();
        prop_assert!(c.window.0 >= 1.0 - 1e-12 && c.window.1 <= 3.0 + 1e-12);
    }
}

#[test]
fn triple_shares_constant_paths() {
    let fem = Fem1D::new(5, Boundary::Neumann).unwrap();
    let tr = Arc::new(fem.triple().unwrap());
    let form = fem.unit_stiffness() + fem.mass();
    let p = FormPath::constant(tr.clone(), form, 2.0).unwrap();
    assert!(p.is_constant());
    assert!(Arc::ptr_eq(p.triple(), &tr));
}
