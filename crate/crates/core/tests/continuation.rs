use homlab_core::continuation::{
    alpha_beta_s, counterexample_study, doubling_report, growth_check, multiscale_three_ball, three_ball_constant,
    GrowthParams,
};
use homlab_core::elliptic::harmonic_polynomial;
use homlab_core::fields::{DomainGrid, ScalarField};
use homlab_core::Error;

#[test]
fn counterexample_matches_homogeneity_and_fails_growth() {
    let grid = DomainGrid::new(3.0, 512).unwrap();
    let params = GrowthParams::new(10.0, 2.0, 2.0).unwrap();
    let ks: Vec<u32> = (0..=6).collect();
    let rep = counterexample_study(grid, &ks, &params, 4).unwrap();
    assert!((rep.rows[0].exact - 1.0 / 9.0).abs() < 1e-15);
    assert!((rep.rows[1].exact - 1.0 / 81.0).abs() < 1e-15);
    for r in &rep.rows {
        assert!(r.rel_err < 1e-3, "k = {}: {}", r.k, r.rel_err);
    }
    assert_eq!(rep.threshold, Some(5));
    assert!(rep.rows.iter().filter(|r| r.k >= 5).all(|r| !r.growth.holds));
}

#[test]
fn beta_is_positive_on_a_grid() {
    for i in 0..50 {
        let lambda = 0.1 * 1.15f64.powi(i);
        assert!(alpha_beta_s(lambda).unwrap().beta > 0.0, "lambda = {lambda}");
    }
}

#[test]
fn harmonic_data_constants() {
    let grid = DomainGrid::new(3.0, 384).unwrap();
    let u = harmonic_polynomial(1).sample(grid).unwrap();
    let s = alpha_beta_s(1.0).unwrap().s;
    // |x1|^2 on B_r integrates to pi r^4 / 4
    let exact = 4.0 * 9f64.powf(s - 1.0);
    let got = three_ball_constant(&u, s, [1.0, 2.0, 3.0]).unwrap();
    assert!((got / exact - 1.0).abs() < 1e-3, "{got} vs {exact}");
    let rows = multiscale_three_ball(&u, s, &[0.5, 0.25]).unwrap();
    assert!((rows[0].1 / rows[1].1 - 1.0).abs() < 1e-2);
    let d = doubling_report(&u, &[0.5, 1.0, 2.0], 1.0, 10.0).unwrap();
    assert!(d.ratios.iter().all(|r| (r - 4.0).abs() < 4e-2), "{:?}", d.ratios);
    assert!(d.macroscopic.holds);
}

#[test]
fn growth_depends_on_normalization() {
    let grid = DomainGrid::new(3.0, 256).unwrap();
    let u = ScalarField::from_fn(grid, |_| 1.0).unwrap();
    let p = GrowthParams::new(1.0, 2.0, 2.0).unwrap();
    assert!(growth_check(&u, &p).unwrap().holds);
    // int_{B_2} u^2 = 1 makes both branches of the bound equal to M
    let unit = u.scaled(1.0 / (4.0 * std::f64::consts::PI).sqrt());
    assert!(!growth_check(&unit, &p).unwrap().holds);
    assert!(matches!(GrowthParams::new(1.0, 0.5, 1.0), Err(Error::Config(_))));
}

#[test]
fn zero_field_is_degenerate() {
    let grid = DomainGrid::new(3.0, 128).unwrap();
    let z = ScalarField::zeros(grid);
    assert!(matches!(three_ball_constant(&z, 0.9, [1.0, 2.0, 3.0]), Err(Error::Degenerate(_))));
    assert!(matches!(doubling_report(&z, &[1.0], 0.5, 2.0), Err(Error::Degenerate(_))));
}
