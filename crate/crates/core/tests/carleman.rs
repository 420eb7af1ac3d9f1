use homlab_core::carleman::{
    carleman_check, carleman_lhs, carleman_rhs, expansion_remainder, lemma31_residual, make_cutoff,
    remainder_bound_constant, CarlemanConstants, CarlemanWeight,
};
use homlab_core::cell::{solve_corrector, CorrectorSampler, DEFAULT_TOL};
use homlab_core::elliptic::{assemble, solve_dirichlet, BoundaryData, BoundaryMask};
use homlab_core::fields::{builtin_coefficient, CoefficientField, DomainGrid, PeriodicGrid, ScalarField};
use homlab_core::Error;

const EPS: f64 = 0.125;

struct Setup {
    a: CoefficientField,
    chi: CorrectorSampler,
    grid: DomainGrid,
    u: ScalarField,
}

fn laminate(n: usize) -> Setup {
    let a = builtin_coefficient("laminate").unwrap();
    let corrector = solve_corrector(&a, PeriodicGrid::new(128).unwrap(), DEFAULT_TOL).unwrap();
    let chi = CorrectorSampler::new(&a, &corrector).unwrap();
    let grid = DomainGrid::new(3.0, n).unwrap();
    let op = assemble(&a, EPS, grid, BoundaryMask::Square).unwrap();
    let u = solve_dirichlet(&op, &BoundaryData::fourier(7, 4), 1e-10).unwrap();
    Setup { a, chi, grid, u }
}

#[test]
fn remainder_is_supported_where_the_cutoff_varies() {
    let s = laminate(384);
    let cutoff = make_cutoff(s.grid).unwrap();
    let r = expansion_remainder(&s.u, &s.chi, EPS, &s.a, &cutoff).unwrap();
    let rmax = r.max_abs();
    assert!(rmax > 0.0);
    let (b, c) = (cutoff.profile.b, cutoff.profile.c);
    let np = s.grid.nodes_per_side();
    let mut plateau: f64 = 0.0;
    for (p, v) in r.values().iter().enumerate() {
        let x = s.grid.coord(p % np, p / np);
        let rad = x[0].hypot(x[1]);
        if rad < cutoff.profile.a || rad > cutoff.profile.d || (rad > b && rad < c) {
            plateau = plateau.max(v.abs());
        }
    }
    assert!(plateau <= 1e-12 * rmax, "{plateau} vs {rmax}");
}

#[test]
fn remainder_obeys_the_pointwise_bound() {
    let s = laminate(384);
    let cutoff = make_cutoff(s.grid).unwrap();
    let r = expansion_remainder(&s.u, &s.chi, EPS, &s.a, &cutoff).unwrap();
    let c = remainder_bound_constant(s.a.mu(), &s.chi, EPS, &cutoff);
    let [gx, gy] = s.u.gradient();
    for p in 0..r.values().len() {
        let rhs = c * (s.u.values()[p].powi(2) + gx.values()[p].powi(2) + gy.values()[p].powi(2));
        assert!(r.values()[p].powi(2) <= rhs * (1.0 + 1e-12) + 1e-300);
    }
}

#[test]
fn product_rule_residual_shrinks_under_refinement() {
    let coarse = laminate(384);
    let fine = laminate(768);
    let res: Vec<f64> = [&coarse, &fine]
        .iter()
        .map(|s| {
            let cutoff = make_cutoff(s.grid).unwrap();
            lemma31_residual(&s.u, &s.chi, EPS, &s.a, &cutoff).unwrap()
        })
        .collect();
    assert!(res[0] / res[1] >= 1.8, "{res:?}");
}

#[test]
fn check_is_invariant_under_scaling_of_u() {
    let s = laminate(384);
    let cutoff = make_cutoff(s.grid).unwrap();
    let k = CarlemanConstants::default().with_c0(2.0);
    let base = carleman_check(&s.u, &s.u, &s.chi, EPS, &s.a, &k, &[1.0, 2.0], &cutoff, None).unwrap();
    let u3 = s.u.scaled(3.0);
    let scaled = carleman_check(&u3, &u3, &s.chi, EPS, &s.a, &k, &[1.0, 2.0], &cutoff, None).unwrap();
    assert_eq!(base.rows.len(), 16);
    for (p, q) in base.rows.iter().zip(&scaled.rows) {
        assert!((p.tau / q.tau - 1.0).abs() < 1e-12);
        assert!((p.ratio / q.ratio - 1.0).abs() < 1e-9);
    }
}

#[test]
fn both_sides_vanish_for_the_zero_field() {
    let grid = DomainGrid::new(3.0, 128).unwrap();
    let a = builtin_coefficient("identity").unwrap();
    let chi = CorrectorSampler::zero(PeriodicGrid::new(16).unwrap());
    let cutoff = make_cutoff(grid).unwrap();
    let zero = ScalarField::zeros(grid);
    let w = CarlemanWeight::new(1.0, 5.0).unwrap();
    assert_eq!(carleman_rhs(&zero, &chi, 1.0, &a, &cutoff, &w).unwrap(), 0.0);
    assert_eq!(carleman_lhs(&zero, &zero, &chi, 1.0, &w, &cutoff, 1.0).unwrap().combined, 0.0);
    let k = CarlemanConstants::default();
    assert!(matches!(
        carleman_check(&zero, &zero, &chi, 1.0, &a, &k, &[1.0], &cutoff, None),
        Err(Error::Degenerate(_))
    ));
}

#[test]
fn small_lambda_is_rejected() {
    let grid = DomainGrid::new(3.0, 64).unwrap();
    let a = builtin_coefficient("identity").unwrap();
    let chi = CorrectorSampler::zero(PeriodicGrid::new(16).unwrap());
    let cutoff = make_cutoff(grid).unwrap();
    let u = ScalarField::from_fn(grid, |x| x[0]).unwrap();
    let k = CarlemanConstants::default();
    assert!(matches!(
        carleman_check(&u, &u, &chi, 1.0, &a, &k, &[0.5], &cutoff, None),
        Err(Error::Config(_))
    ));
}
