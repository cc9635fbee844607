use takens::cocycle::FamilySpec;
use takens::spectrum::dichotomy_test;

fn main() {
    let spec = FamilySpec::Autonomous {
        matrix: vec![vec![0.5, 0.0], vec![0.0, 2.0]],
    }
    .build::<f64>(64, 0)
    .unwrap();
    for gamma in [1.0, 2.0, 0.5, 3.0] {
        let v = dichotomy_test(&spec, gamma, 16, 1e-4).unwrap();
        println!(
            "gamma={gamma}: has={} sigma_w={:.6e} sigma_2w={:.6e} rank={:?}",
            v.has_dichotomy, v.margin, v.margin_wide, v.rank
        );
    }
}
