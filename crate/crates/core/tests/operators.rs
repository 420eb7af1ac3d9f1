use homlab_core::elliptic::{
    assemble, assemble_homogenized, harmonic_polynomial, solve_dirichlet, BoundaryData, BoundaryMask,
};
use homlab_core::fields::{builtin_coefficient, DomainGrid, Mat2, ScalarField};
use homlab_core::Error;

fn interior_max(f: &ScalarField) -> f64 {
    let g = f.grid();
    let n = g.n();
    let mut m: f64 = 0.0;
    for j in 1..n {
        for i in 1..n {
            m = m.max(f.at(i, j).abs());
        }
    }
    m
}

#[test]
fn constants_are_in_the_kernel() {
    let a = builtin_coefficient("smooth2d").unwrap();
    let grid = DomainGrid::new(1.0, 64).unwrap();
    let op = assemble(&a, 0.25, grid, BoundaryMask::Square).unwrap();
    let one = ScalarField::from_fn(grid, |_| 1.0).unwrap();
    assert!(op.apply(&one).max_abs() < 1e-10);
}

#[test]
fn anisotropic_second_difference() {
    let a = Mat2::diag(0.5, 1.0 / 3f64.sqrt());
    let grid = DomainGrid::new(1.0, 32).unwrap();
    let op = assemble_homogenized(a, grid, BoundaryMask::Square).unwrap();
    let q = ScalarField::from_fn(grid, |x| x[0] * x[0]).unwrap();
    let l = op.apply(&q).map(|v| v + 1.0);
    assert!(interior_max(&l) < 1e-9);
}

#[test]
fn cross_difference_of_a_bilinear() {
    let a = Mat2::symmetric(1.0, 0.1, 1.0);
    let grid = DomainGrid::new(1.0, 32).unwrap();
    let op = assemble_homogenized(a, grid, BoundaryMask::Square).unwrap();
    let q = ScalarField::from_fn(grid, |x| x[0] * x[1]).unwrap();
    let l = op.apply(&q).map(|v| v + 0.2);
    assert!(interior_max(&l) < 1e-9);
}

#[test]
fn resolution_check_at_the_documented_size() {
    let a = builtin_coefficient("laminate").unwrap();
    let grid = DomainGrid::new(3.2, 512).unwrap();
    assert!((grid.h() - 0.0125).abs() < 1e-15);
    assert!(assemble(&a, 0.125, grid, BoundaryMask::Square).is_ok());
    let coarse = DomainGrid::new(3.2, 256).unwrap();
    assert!(matches!(
        assemble(&a, 0.125, coarse, BoundaryMask::Square),
        Err(Error::Resolution { required_n: 410, .. })
    ));
}

#[test]
fn linear_data_is_reproduced_exactly() {
    let grid = DomainGrid::new(1.0, 48).unwrap();
    let op = assemble_homogenized(Mat2::IDENTITY, grid, BoundaryMask::Square).unwrap();
    let u = solve_dirichlet(&op, &BoundaryData::harmonic(1), 1e-12).unwrap();
    let exact = ScalarField::from_fn(grid, |x| x[0]).unwrap();
    assert!(u.zip_map(&exact, |p, q| p - q).max_abs() < 1e-10);
}

#[test]
fn cubic_harmonic_converges_at_second_order() {
    let mut errs = vec![];
    for n in [16, 32, 64] {
        let grid = DomainGrid::new(1.0, n).unwrap();
        let op = assemble_homogenized(Mat2::IDENTITY, grid, BoundaryMask::Square).unwrap();
        let u = solve_dirichlet(&op, &BoundaryData::harmonic(3), 1e-12).unwrap();
        let exact = harmonic_polynomial(3).sample(grid).unwrap();
        errs.push(u.zip_map(&exact, |p, q| p - q).max_abs());
    }
    // the 5-point stencil is exact on cubics, so only solver error remains
    assert!(errs.iter().all(|&e| e < 1e-9), "{errs:?}");
    let mut errs = vec![];
    let quartic = |x: [f64; 2]| x[0].powi(4) - 6.0 * x[0] * x[0] * x[1] * x[1] + x[1].powi(4);
    for n in [16, 32, 64] {
        let grid = DomainGrid::new(1.0, n).unwrap();
        let op = assemble_homogenized(Mat2::IDENTITY, grid, BoundaryMask::Square).unwrap();
        let u = solve_dirichlet(&op, &BoundaryData::from_fn("quartic", quartic), 1e-12).unwrap();
        let exact = ScalarField::from_fn(grid, quartic).unwrap();
        errs.push(u.zip_map(&exact, |p, q| p - q).max_abs());
    }
    let order = (errs[1] / errs[2]).log2();
    assert!(order > 1.8, "{errs:?}");
}

#[test]
fn maximum_principle_for_random_data() {
    let grid = DomainGrid::new(1.0, 40).unwrap();
    let op = assemble_homogenized(Mat2::IDENTITY, grid, BoundaryMask::Square).unwrap();
    for seed in 0..5 {
        let g = BoundaryData::fourier(seed, 6);
        let u = solve_dirichlet(&op, &g, 1e-12).unwrap();
        let n = grid.n();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for k in 0..=n {
            for (i, j) in [(k, 0), (k, n), (0, k), (n, k)] {
                lo = lo.min(u.at(i, j));
                hi = hi.max(u.at(i, j));
            }
        }
        assert!(u.values().iter().all(|&v| v >= lo - 1e-10 && v <= hi + 1e-10));
    }
}
