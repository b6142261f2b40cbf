use chartflow_demo::{commutator_norms, density_paths, truncation_curves};

#[test]
fn curves_are_quadratic_below_the_blend() {
    let rows = truncation_curves(4.0, 121).unwrap();
    assert_eq!(rows.len(), 5 * 121);
    for r in rows.chunks(5) {
        let xi = r[0];
        if xi * xi <= 4.0 {
            assert!((r[1] - xi * xi).abs() < 1e-12 && (r[4] - xi * xi).abs() < 1e-12);
        }
        if xi * xi >= 8.0 {
            assert!((r[1] - 8.0).abs() < 1e-12 && r[3] == 0.0);
        }
    }
    assert!(truncation_curves(-1.0, 10).is_err());
}

#[test]
fn commutator_ladder_and_slope() {
    let out = commutator_norms("r", 512, false).unwrap();
    assert_eq!(out.len(), 2 * 5 + 1);
    assert!(out[10] >= 1.0, "slope {}", out[10]);
    assert!(commutator_norms("nope", 512, false).is_err());
}

#[test]
fn paths_are_seeded_and_conserve_mass() {
    let a = density_paths("generic", 64, 3, 0.05, 4).unwrap();
    assert_eq!(a.len(), 64 * 5);
    assert_eq!(a, density_paths("generic", 64, 3, 0.05, 4).unwrap());
    assert_ne!(a, density_paths("generic", 64, 4, 0.05, 4).unwrap());
    let mass = |f: usize| a[64 * f..64 * (f + 1)].iter().sum::<f64>();
    assert!((mass(1) - mass(4)).abs() < 1e-9 * mass(1));
}
