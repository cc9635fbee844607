//! End-to-end checks of the reduction pipeline on the seed-fixed 3D
//! system and on closed-form systems.

mod common;

use common::{suite_exact_spectrum, suite_system};
use takens::cocycle::FamilySpec;
use takens::jets::{AxisGroup, JetPoly, SpaceSplit, TimeJetSeq};
use takens::pipeline::takens_normal_form;
use takens::spectrum::{extract_splitting, Interval, SpectrumResult};

fn point_spectrum(points: &[f64]) -> SpectrumResult<f64> {
    SpectrumResult::from_intervals(
        points.iter().map(|&x| Interval::point(x)).collect(),
        Vec::new(),
    )
    .unwrap()
}

#[test]
fn linear_system_has_identity_conjugacy() {
    let window = 64;
    let split = SpaceSplit::elementary(1, 1, 1);
    let linear = FamilySpec::Autonomous {
        matrix: vec![
            vec![0.2, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 3.0],
        ],
    }
    .build(window, 0)
    .unwrap();
    let f = JetPoly::zero(split.clone(), split.clone(), 4);
    let sys = takens::cocycle::NonlinearSystem::new(
        linear,
        split.clone(),
        TimeJetSeq::constant(window, f),
        0.0,
        1.0,
    )
    .unwrap();
    let spectrum = point_spectrum(&[0.2, 1.0, 3.0]);
    let data = extract_splitting(&sys.linear, &spectrum).unwrap();
    let out = takens_normal_form(&sys, &spectrum, &data, 2, 4, 1e-11).unwrap();
    let id = JetPoly::identity(split, sys.max_order());
    for n in out.transform.band.0..=out.transform.band.1 {
        assert!(out.transform.maps.get(n).unwrap().sub(&id).coeff_norm() < 1e-12);
    }
    for &r in &out.report.max_residuals {
        assert!(r < 1e-13, "linear residual {r:.3e}");
    }
}

#[test]
fn closed_form_p1_elimination_is_exact() {
    // F(x_c, v) = (x_c + c v, 0.5 v): exact elimination at p = 1.
    let c = 0.4;
    let window = 64;
    let split = SpaceSplit::elementary(1, 1, 0);
    let linear = FamilySpec::Autonomous {
        matrix: vec![vec![0.5, 0.0], vec![0.0, 1.0]],
    }
    .build(window, 0)
    .unwrap();
    let mut f = JetPoly::zero(split.clone(), split.clone(), 4);
    f.add_to(&[1], &[0], 1, c);
    let sys = takens::cocycle::NonlinearSystem::new(
        linear,
        split,
        TimeJetSeq::constant(window, f),
        c,
        1.0,
    )
    .unwrap();
    let spectrum = point_spectrum(&[0.5, 1.0]);
    let data = extract_splitting(&sys.linear, &spectrum).unwrap();
    let out = takens_normal_form(&sys, &spectrum, &data, 1, 4, 1e-11).unwrap();
    for &r in &out.report.max_residuals {
        assert!(r <= 1e-12, "residual {r:.3e}");
    }
}

#[test]
fn suite_normal_form_structure_and_slope() {
    let sys = suite_system(20260810);
    let spectrum = suite_exact_spectrum();
    let data = extract_splitting(&sys.linear, &spectrum).unwrap();
    let out = takens_normal_form(&sys, &spectrum, &data, 3, 6, 1e-9).unwrap();

    // Structural invariants: center rows carry no v-dependence through
    // order N0, hyperbolic rows are linear in v through order N0.
    for n in out.form.band.0..=out.form.band.1 {
        let f = out.normal_system.nonlinearity.get(n).unwrap();
        let center_v = f
            .filter(|k| k.v_degree() >= 1 && k.v_degree() <= 3)
            .project_target(AxisGroup::Center)
            .unwrap()
            .coeff_norm();
        let hyp = f
            .filter(|k| k.v_degree() >= 2 && k.v_degree() <= 3)
            .project_target(AxisGroup::Hyperbolic)
            .unwrap()
            .coeff_norm();
        assert!(center_v <= 1e-9, "center v-coefficient {center_v:.3e} at n={n}");
        assert!(hyp <= 1e-9, "hyperbolic coefficient {hyp:.3e} at n={n}");
    }

    // Conjugacy residual order: slope >= 3.8 over two decades.
    assert!(
        out.report.slope >= 3.8,
        "slope {:.3} from residuals {:?}",
        out.report.slope,
        out.report.max_residuals
    );

    // Transform invertibility at truncation order.
    let split = sys.split.clone();
    let order = sys.max_order();
    let id = JetPoly::identity(split, order);
    for n in [out.form.band.0, 0, out.form.band.1] {
        let comp = out
            .transform
            .maps
            .get(n)
            .unwrap()
            .compose_map(out.transform.invs.get(n).unwrap(), order)
            .unwrap();
        assert!(
            comp.sub(&id).coeff_norm() < 1e-9,
            "Psi o Psi^{{-1}} defect {:.3e} at n={n}",
            comp.sub(&id).coeff_norm()
        );
    }
}

#[test]
fn suite_homological_residuals() {
    let sys = suite_system(20260810);
    let spectrum = suite_exact_spectrum();
    // Straighten first so the center solve's preconditions hold at p >= 1.
    let data = extract_splitting(&sys.linear, &spectrum).unwrap();
    let cm = takens::manifold::center_manifold_jets(&sys, &data, 5, 1e-9).unwrap();
    let flat = takens::manifold::straighten(&sys, &cm).unwrap();

    let solve = takens::homological::solve_homological_center(&flat, &spectrum, 1, 4, 1e-9).unwrap();
    assert!(solve.h.diagnostics.residual <= 1e-9);
    assert!(solve.sampled_residual <= 1e-8);

    let hyp = takens::homological::solve_homological_hyperbolic(&flat, &spectrum, 2, 3, 1e-9).unwrap();
    assert!(hyp.diagnostics.residual <= 1e-9);
}

#[test]
fn residual_contract_never_degrades() {
    // Halving tol either meets it or raises the window error.
    let sys = suite_system(7);
    let spectrum = suite_exact_spectrum();
    let mut tol = 1e-6;
    for _ in 0..6 {
        match takens::homological::solve_homological_center(&sys, &spectrum, 1, 3, tol) {
            Ok(solve) => assert!(
                solve.h.diagnostics.residual <= tol,
                "tol {tol:.1e}: residual {:.3e}",
                solve.h.diagnostics.residual
            ),
            Err(takens::Error::WindowTooSmallForTol { .. }) => {}
            Err(other) => panic!("unexpected error at tol {tol:.1e}: {other}"),
        }
        tol *= 0.5;
    }
}
