//! Periodic cell problem: correctors `chi_j`, the homogenized tensor and the
//! flux correctors `b_ij` with their skew potentials `F_kij`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{verify_assumptions, CellField, CoefficientField, Grid, Mat2, PeriodicGrid};
use crate::flux::FluxOperator;
use crate::linalg::{pcg, CgOptions, IdentityPreconditioner, LinearOperator};

pub const DEFAULT_TOL: f64 = 1e-10;

struct Periodic<'a>(&'a FluxOperator);

impl LinearOperator for Periodic<'_> {
    fn len(&self) -> usize {
        self.0.len()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.0.apply(x, y);
    }
}

fn cell_operator(a: &CoefficientField, grid: PeriodicGrid) -> FluxOperator {
    FluxOperator::new(grid.n(), grid.n(), true, grid.h(), [0.0, 0.0], |y| a.eval(y))
}

fn laplacian(grid: PeriodicGrid) -> FluxOperator {
    FluxOperator::new(grid.n(), grid.n(), true, grid.h(), [0.0, 0.0], |_| Mat2::IDENTITY)
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol <= 1e-6 {
        Ok(())
    } else {
        Err(Error::Config(format!("solver tolerance must lie in (0, 1e-6], got {tol}")))
    }
}

fn solve_periodic(op: &FluxOperator, rhs: &[f64], tol: f64, n: usize) -> Result<(Vec<f64>, f64, usize)> {
    let mut x = vec![0.0; rhs.len()];
    let stats = pcg(&Periodic(op), &mut IdentityPreconditioner, rhs, &mut x, CgOptions {
        tol,
        max_iter: 50 * n,
        project_mean: true,
    })?;
    Ok((x, stats.relative_residual, stats.iterations))
}

/// Mean-zero periodic solutions of `-div(A grad chi_j) = div(A e_j)`.
#[derive(Clone, Debug)]
pub struct Corrector {
    pub chi: [CellField; 2],
    /// Largest relative residual of the two solves.
    pub residual_norm: f64,
    pub iterations: [usize; 2],
}

impl Corrector {
    pub fn grid(&self) -> &PeriodicGrid {
        self.chi[0].grid()
    }

    pub fn zero(grid: PeriodicGrid) -> Self {
        Self {
            chi: [CellField::zeros(grid), CellField::zeros(grid)],
            residual_norm: 0.0,
            iterations: [0, 0],
        }
    }
}

pub fn solve_corrector(a: &CoefficientField, grid: PeriodicGrid, tol: f64) -> Result<Corrector> {
    check_tol(tol)?;
    verify_assumptions(a, 10_000)?;
    let op = cell_operator(a, grid);
    let mut chi = Vec::with_capacity(2);
    let mut residual: f64 = 0.0;
    let mut iterations = [0; 2];
    for j in 0..2 {
        let (d1, d2) = op.slope_differences(j);
        let (q1, q2) = op.fluxes(&d1, &d2);
        let mut rhs = vec![0.0; op.len()];
        op.neg_divergence(&q1, &q2, &mut rhs);
        rhs.iter_mut().for_each(|v| *v = -*v);
        let (x, res, it) = solve_periodic(&op, &rhs, tol, grid.n())?;
        residual = residual.max(res);
        iterations[j] = it;
        chi.push(CellField::from_values(grid, x)?);
    }
    let [c1, c2]: [CellField; 2] = chi.try_into().expect("two correctors");
    Ok(Corrector { chi: [c1, c2], residual_norm: residual, iterations })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HomogenizedTensor {
    pub a_hat: Mat2,
    /// `|a_12 - a_21|` before symmetrization.
    pub asymmetry: f64,
}

impl HomogenizedTensor {
    pub fn from_matrix(a_hat: Mat2) -> Self {
        Self { a_hat: a_hat.symmetrized(), asymmetry: a_hat.asymmetry() }
    }
}

fn corrected_fluxes(op: &FluxOperator, chi: &CellField, j: usize) -> (Vec<f64>, Vec<f64>) {
    let (mut d1, mut d2) = op.differences(chi.values());
    if j == 0 {
        d1.iter_mut().for_each(|v| *v += 1.0);
    } else {
        d2.iter_mut().for_each(|v| *v += 1.0);
    }
    op.fluxes(&d1, &d2)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// `a_hat_ij = mean of (A (e_j + grad chi_j))_i`, averaged over the edges
/// carrying component `i`.
pub fn homogenize(a: &CoefficientField, chi: &Corrector) -> Result<HomogenizedTensor> {
    let op = cell_operator(a, *chi.grid());
    let mut m = [[0.0; 2]; 2];
    for j in 0..2 {
        let (q1, q2) = corrected_fluxes(&op, &chi.chi[j], j);
        m[0][j] = mean(&q1);
        m[1][j] = mean(&q2);
    }
    let t = HomogenizedTensor::from_matrix(Mat2(m));
    let (lo, hi) = t.a_hat.sym_eigenvalues();
    let slack = 1e-6;
    if lo < a.mu() - slack || hi > 1.0 / a.mu() + slack {
        return Err(Error::Consistency(format!(
            "homogenized eigenvalues ({lo:.6}, {hi:.6}) leave [{:.6}, {:.6}]",
            a.mu(),
            1.0 / a.mu()
        )));
    }
    Ok(t)
}

/// Where the values of a staggered field live on the periodic lattice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Location {
    Node,
    /// `((i + 1/2) h, j h)`
    XEdge,
    /// `(i h, (j + 1/2) h)`
    YEdge,
    /// `((i + 1/2) h, (j + 1/2) h)`
    Dual,
}

#[derive(Clone, Debug)]
pub struct StaggeredField {
    pub location: Location,
    pub field: CellField,
}

/// `b[i][j] = b_ij` (mean zero) and `f[k][i][j] = F_kij` with
/// `sum_k d_k F_kij = b_ij` and `F_kij = -F_ikj`.
#[derive(Clone, Debug)]
pub struct FluxCorrector {
    pub b: [[StaggeredField; 2]; 2],
    pub f: [[[StaggeredField; 2]; 2]; 2],
    /// RMS of `d_k F_kij - b_ij`, worst over `(i, j)`.
    pub divergence_residual: f64,
}

impl FluxCorrector {
    /// Discrete `sum_k d_k F_kij`, on the same lattice as `b_ij`.
    pub fn divergence(&self, i: usize, j: usize) -> CellField {
        let phi = &self.f[1][0][j].field;
        let g = *phi.grid();
        let n = g.n() as isize;
        let inv = 1.0 / g.h();
        let mut out = Vec::with_capacity(g.node_count());
        for r in 0..n {
            for c in 0..n {
                out.push(if i == 0 {
                    (phi.at(c, r) - phi.at(c, r - 1)) * inv
                } else {
                    -(phi.at(c, r) - phi.at(c - 1, r)) * inv
                });
            }
        }
        CellField::from_values_unchecked(g, out)
    }
}

fn rms(v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}

pub fn flux_correctors(
    a: &CoefficientField,
    chi: &Corrector,
    a_hat: &HomogenizedTensor,
    tol: f64,
) -> Result<FluxCorrector> {
    check_tol(tol)?;
    let grid = *chi.grid();
    let n = grid.n();
    let op = cell_operator(a, grid);
    let lap = laplacian(grid);
    let inv = 1.0 / grid.h();

    let mut b: Vec<[StaggeredField; 2]> = Vec::new();
    let mut bvals = [[vec![], vec![]], [vec![], vec![]]];
    for j in 0..2 {
        let (q1, q2) = corrected_fluxes(&op, &chi.chi[j], j);
        for (i, q) in [q1, q2].into_iter().enumerate() {
            let mut v: Vec<f64> = q.iter().map(|q| a_hat.a_hat.get(i, j) - q).collect();
            let m = mean(&v);
            v.iter_mut().for_each(|x| *x -= m);
            bvals[i][j] = v;
        }
    }
    for i in 0..2 {
        let loc = if i == 0 { Location::XEdge } else { Location::YEdge };
        b.push([0, 1].map(|j| StaggeredField {
            location: loc,
            field: CellField::from_values_unchecked(grid, bvals[i][j].clone()),
        }));
    }

    // Potentials f_ij solve Laplace f = b on the lattice of b_ij; the stream
    // function F_21j = D2 f_1j - D1 f_2j lives on the dual lattice.
    let mut phis = Vec::with_capacity(2);
    for j in 0..2 {
        let mut f = [vec![], vec![]];
        for i in 0..2 {
            let rhs: Vec<f64> = bvals[i][j].iter().map(|v| -v).collect();
            f[i] = solve_periodic(&lap, &rhs, tol, n)?.0;
        }
        let at = |v: &Vec<f64>, c: usize, r: usize| v[(r % n) * n + (c % n)];
        let mut phi = Vec::with_capacity(n * n);
        for r in 0..n {
            for c in 0..n {
                phi.push((at(&f[0], c, r + 1) - at(&f[0], c, r)) * inv - (at(&f[1], c + 1, r) - at(&f[1], c, r)) * inv);
            }
        }
        phis.push(CellField::from_values(grid, phi)?);
    }
    let dual = |v: CellField| StaggeredField { location: Location::Dual, field: v };
    let zero = || dual(CellField::zeros(grid));
    let f = [
        [[zero(), zero()], [0, 1].map(|j| dual(phis[j].scaled(-1.0)))],
        [[0, 1].map(|j| dual(phis[j].clone())), [zero(), zero()]],
    ];
    let [b0, b1]: [[StaggeredField; 2]; 2] = b.try_into().expect("two rows");
    let mut out = FluxCorrector { b: [b0, b1], f, divergence_residual: 0.0 };
    let mut worst: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let d = out.divergence(i, j);
            let diff: Vec<f64> = d.values().iter().zip(out.b[i][j].field.values()).map(|(x, y)| x - y).collect();
            worst = worst.max(rms(&diff));
        }
    }
    out.divergence_residual = worst;
    Ok(out)
}

/// Corrector data sampled at `y = x / eps`: `chi_j`, `grad_y chi_j` and
/// `div_y(A chi_j)` (the vector with components `sum_i d_{y_i}(a_ik chi_j)`),
/// all precomputed on the cell grid and interpolated bilinearly.
#[derive(Clone, Debug)]
pub struct CorrectorSampler {
    chi: [CellField; 2],
    grad: [[CellField; 2]; 2],
    div_a_chi: [[CellField; 2]; 2],
    zero: bool,
    chi_max: f64,
    grad_max: f64,
    div_max: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CorrectorSample {
    pub chi: [f64; 2],
    /// `grad[j][k] = d_{y_k} chi_j`
    pub grad: [[f64; 2]; 2],
    /// `div[j][k] = sum_i d_{y_i}(a_ik chi_j)`
    pub div: [[f64; 2]; 2],
}

impl CorrectorSampler {
    pub fn new(a: &CoefficientField, chi: &Corrector) -> Result<Self> {
        let grid = *chi.grid();
        let zero = chi.chi.iter().all(|c| c.max_abs() == 0.0);
        let grad = [chi.chi[0].gradient(), chi.chi[1].gradient()];
        let mut div = Vec::with_capacity(2);
        for j in 0..2 {
            let mut comps = Vec::with_capacity(2);
            for k in 0..2 {
                // sum_i d_i (a_ik chi_j)
                let prod = |i: usize| -> Result<CellField> {
                    let n = grid.n();
                    let values = (0..n * n)
                        .map(|p| a.eval(grid.coord(p % n, p / n)).get(i, k) * chi.chi[j].values()[p])
                        .collect();
                    CellField::from_values(grid, values)
                };
                let g0 = prod(0)?.gradient();
                let g1 = prod(1)?.gradient();
                comps.push(g0[0].zip_map(&g1[1], |u, v| u + v));
            }
            let [c0, c1]: [CellField; 2] = comps.try_into().expect("two components");
            div.push([c0, c1]);
        }
        let [d0, d1]: [[CellField; 2]; 2] = div.try_into().expect("two correctors");
        let max_of = |fs: &[&CellField]| fs.iter().fold(0.0f64, |m, f| m.max(f.max_abs()));
        Ok(Self {
            chi_max: max_of(&[&chi.chi[0], &chi.chi[1]]),
            grad_max: max_of(&[&grad[0][0], &grad[0][1], &grad[1][0], &grad[1][1]]),
            div_max: max_of(&[&d0[0], &d0[1], &d1[0], &d1[1]]),
            chi: chi.chi.clone(),
            grad,
            div_a_chi: [d0, d1],
            zero,
        })
    }

    pub fn zero(grid: PeriodicGrid) -> Self {
        let z = || CellField::zeros(grid);
        Self {
            chi: [z(), z()],
            grad: [[z(), z()], [z(), z()]],
            div_a_chi: [[z(), z()], [z(), z()]],
            zero: true,
            chi_max: 0.0,
            grad_max: 0.0,
            div_max: 0.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.zero
    }

    /// `(max |chi|, max |grad chi|, max |div_y(A chi)|)` over the cell grid.
    pub fn sup_norms(&self) -> (f64, f64, f64) {
        (self.chi_max, self.grad_max, self.div_max)
    }

    #[inline]
    pub fn chi(&self, y: [f64; 2]) -> [f64; 2] {
        if self.zero {
            return [0.0; 2];
        }
        [self.chi[0].interpolate(y), self.chi[1].interpolate(y)]
    }

    pub fn sample(&self, y: [f64; 2]) -> CorrectorSample {
        if self.zero {
            return CorrectorSample::default();
        }
        let mut s = CorrectorSample { chi: self.chi(y), ..Default::default() };
        for j in 0..2 {
            for k in 0..2 {
                s.grad[j][k] = self.grad[j][k].interpolate(y);
                s.div[j][k] = self.div_a_chi[j][k].interpolate(y);
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{builtin_coefficient, laminate_profile};
    use std::f64::consts::TAU;

    #[test]
    fn identity_has_trivial_cell_data() {
        let a = builtin_coefficient("identity").unwrap();
        let g = PeriodicGrid::new(32).unwrap();
        let chi = solve_corrector(&a, g, DEFAULT_TOL).unwrap();
        assert_eq!(chi.residual_norm, 0.0);
        assert!(chi.chi.iter().all(|c| c.max_abs() == 0.0));
        let t = homogenize(&a, &chi).unwrap();
        assert_eq!(t.a_hat, Mat2::IDENTITY);
        let fc = flux_correctors(&a, &chi, &t, DEFAULT_TOL).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(fc.b[i][j].field.max_abs(), 0.0);
                for k in 0..2 {
                    assert_eq!(fc.f[k][i][j].field.max_abs(), 0.0);
                }
            }
        }
    }

    #[test]
    fn laminate_tensor_and_corrector() {
        let a = builtin_coefficient("laminate").unwrap();
        let g = PeriodicGrid::new(128).unwrap();
        let chi = solve_corrector(&a, g, DEFAULT_TOL).unwrap();
        let t = homogenize(&a, &chi).unwrap();
        assert!((t.a_hat.get(0, 0) - 0.5).abs() < 1e-8);
        assert!((t.a_hat.get(1, 1) - 1.0 / 3f64.sqrt()).abs() < 1e-8);
        assert!(t.a_hat.get(0, 1).abs() < 1e-10);
        assert!(chi.chi[1].max_abs() < 1e-12);
        // chi_1 = -cos(2 pi y1) / (4 pi), independent of y2
        for (i, j) in [(0, 0), (17, 5), (64, 99), (100, 127)] {
            let y = g.coord(i, j);
            let exact = -(TAU * y[0]).cos() / (2.0 * TAU);
            assert!((chi.chi[0].at(i as isize, j as isize) - exact).abs() < 1e-4);
        }
        // discrete flux a (1 + D1 chi_1) is constant on x-edges
        let h = g.h();
        for i in [0isize, 31, 77] {
            let mid = laminate_profile((i as f64 + 0.5) * h);
            let d = (chi.chi[0].at(i + 1, 3) - chi.chi[0].at(i, 3)) / h;
            assert!((mid * (1.0 + d) - 0.5).abs() < 1e-8);
        }
    }

    #[test]
    fn laminate_flux_corrector_identities() {
        let a = builtin_coefficient("laminate").unwrap();
        let g = PeriodicGrid::new(64).unwrap();
        let chi = solve_corrector(&a, g, DEFAULT_TOL).unwrap();
        let t = homogenize(&a, &chi).unwrap();
        let fc = flux_correctors(&a, &chi, &t, DEFAULT_TOL).unwrap();
        assert!(fc.divergence_residual < 10.0 * DEFAULT_TOL);
        // b_11 vanishes: the laminate flux in the layering direction is constant
        assert!(fc.b[0][0].field.max_abs() < 1e-8);
        // b_22 = 1/sqrt3 - a(y1)
        let b22 = &fc.b[1][1].field;
        for (i, j) in [(3, 4), (40, 1)] {
            let exact = 1.0 / 3f64.sqrt() - laminate_profile(i as f64 * g.h());
            assert!((b22.at(i, j) - exact).abs() < 1e-8);
        }
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    let sum = fc.f[k][i][j].field.zip_map(&fc.f[i][k][j].field, |x, y| x + y);
                    assert_eq!(sum.max_abs(), 0.0);
                }
            }
        }
    }

    #[test]
    fn energy_identity() {
        let a = builtin_coefficient("smooth2d").unwrap();
        let g = PeriodicGrid::new(32).unwrap();
        let chi = solve_corrector(&a, g, DEFAULT_TOL).unwrap();
        let t = homogenize(&a, &chi).unwrap();
        let op = cell_operator(&a, g);
        for j in 0..2 {
            // B(y_j + chi_j, y_j + chi_j) / |Y| via edge fluxes and differences
            let (mut d1, mut d2) = op.differences(chi.chi[j].values());
            if j == 0 {
                d1.iter_mut().for_each(|v| *v += 1.0);
            } else {
                d2.iter_mut().for_each(|v| *v += 1.0);
            }
            let (q1, q2) = op.fluxes(&d1, &d2);
            let e: f64 = q1.iter().zip(&d1).chain(q2.iter().zip(&d2)).map(|(q, d)| q * d).sum::<f64>() / (g.n() * g.n()) as f64;
            assert!((e - t.a_hat.get(j, j)).abs() < 1e-8, "{e} vs {}", t.a_hat.get(j, j));
        }
    }

    #[test]
    fn sampler_matches_laminate_formulas() {
        let a = builtin_coefficient("laminate").unwrap();
        let g = PeriodicGrid::new(256).unwrap();
        let chi = solve_corrector(&a, g, DEFAULT_TOL).unwrap();
        let s = CorrectorSampler::new(&a, &chi).unwrap();
        let y = [0.3, 0.7];
        let smp = s.sample(y);
        let exact_grad = (TAU * y[0]).sin() / 2.0;
        assert!((smp.grad[0][0] - exact_grad).abs() < 1e-3);
        assert!(smp.grad[0][1].abs() < 1e-9);
        // div_y(A chi_1)_1 = d1(a chi_1)
        let da = |t: f64| -TAU * (TAU * t).cos() * laminate_profile(t).powi(2);
        let c = -(TAU * y[0]).cos() / (2.0 * TAU);
        let exact_div = da(y[0]) * c + laminate_profile(y[0]) * exact_grad;
        assert!((smp.div[0][0] - exact_div).abs() < 1e-3);
    }
}
