use crate::error::{Error, Result};
use crate::fields::{CoefficientField, DomainGrid, Mat2, ScalarField};
use crate::flux::FluxOperator;
use crate::linalg::{CgStats, LinearOperator, Multigrid, SymStencil9};

use super::boundary::BoundaryData;

pub const DEFAULT_SOLVE_TOL: f64 = 1e-10;
const MAX_ITER: usize = 2000;
/// Interior nodes closer than this fraction of `h` to the circle (along a
/// grid line) take the boundary value directly.
const SNAP: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BoundaryMask {
    /// Dirichlet data on the boundary of `[-L, L]^2`.
    Square,
    /// Dirichlet data on the circle `|x| = radius`, imposed by
    /// Shortley–Weller style boundary links; nodes outside the disc are
    /// filled with the data itself.
    Disc { radius: f64 },
}

const ACTIVE: u8 = 0;
const OUTSIDE: u8 = 1;
const SNAPPED: u8 = 2;

struct BoundaryLink {
    unknown: usize,
    point: [f64; 2],
    weight: f64,
}

struct DiscGeometry {
    radius: f64,
    kind: Vec<u8>,
    links: Vec<BoundaryLink>,
}

/// Assembled discrete operator together with its multigrid hierarchy.
pub struct DiscreteOperator {
    grid: DomainGrid,
    mask: BoundaryMask,
    flux: FluxOperator,
    mg: Multigrid,
    disc: Option<DiscGeometry>,
}

impl std::fmt::Debug for DiscreteOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DiscreteOperator")
            .field("grid", &self.grid)
            .field("mask", &self.mask)
            .field("levels", &self.mg.depth())
            .finish()
    }
}

/// Operator for `-div(A(x/eps) grad u)`; requires `h <= eps/8`.
pub fn assemble(
    a: &CoefficientField,
    eps: f64,
    grid: DomainGrid,
    mask: BoundaryMask,
) -> Result<DiscreteOperator> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::Config(format!("eps must lie in (0, 1], got {eps}")));
    }
    let limit = eps / 8.0;
    if grid.h() > limit * (1.0 + 1e-9) {
        return Err(Error::Resolution {
            h: grid.h(),
            limit,
            required_n: (16.0 * grid.half_extent() / eps).ceil() as usize,
        });
    }
    let flux = oscillating_flux(a, eps, grid);
    DiscreteOperator::build(grid, mask, flux)
}

/// Operator for the constant-coefficient problem `-div(a_hat grad u)`. On a
/// disc mask only diagonal tensors are supported.
pub fn assemble_homogenized(a_hat: Mat2, grid: DomainGrid, mask: BoundaryMask) -> Result<DiscreteOperator> {
    let sym = a_hat.symmetrized();
    let a = match mask {
        BoundaryMask::Square => sym,
        BoundaryMask::Disc { .. } => {
            if sym.get(0, 1).abs() > 1e-8 * sym.max_abs_entry() {
                return Err(Error::Config(format!(
                    "disc solver needs a diagonal tensor, off-diagonal entry is {:.3e}",
                    sym.get(0, 1)
                )));
            }
            Mat2::diag(sym.get(0, 0), sym.get(1, 1))
        }
    };
    let flux = flux_for(grid, |_| a);
    DiscreteOperator::build(grid, mask, flux)
}

/// Flux-form `L_h` for `A(x/eps)` without the solver hierarchy.
pub(crate) fn oscillating_flux(a: &CoefficientField, eps: f64, grid: DomainGrid) -> FluxOperator {
    flux_for(grid, |x| a.eval([x[0] / eps, x[1] / eps]))
}

fn flux_for(grid: DomainGrid, coef: impl Fn([f64; 2]) -> Mat2) -> FluxOperator {
    let np = grid.nodes_per_side();
    let l = grid.half_extent();
    FluxOperator::new(np, np, false, grid.h(), [-l, -l], coef)
}

/// Parameter `t` in `(0, 1]` with `|x + t h e| = radius`, for `|x| < radius`.
fn crossing(x: [f64; 2], e: [f64; 2], h: f64, radius: f64) -> f64 {
    let xe = x[0] * e[0] + x[1] * e[1];
    let c = x[0] * x[0] + x[1] * x[1] - radius * radius;
    (-xe + (xe * xe - c).sqrt()) / h
}

impl DiscreteOperator {
    fn build(grid: DomainGrid, mask: BoundaryMask, flux: FluxOperator) -> Result<Self> {
        let n = grid.n();
        if n < 4 {
            return Err(Error::Config(format!("domain grid needs n >= 4, got {n}")));
        }
        let (stencil, disc) = match mask {
            BoundaryMask::Square if flux.has_cross() => (Self::probed_stencil(grid, &flux), None),
            BoundaryMask::Square => (Self::five_point(grid, &flux), None),
            BoundaryMask::Disc { radius } => {
                if flux.has_cross() {
                    return Err(Error::Config("disc solver needs a diagonal coefficient".into()));
                }
                if !(radius > 0.0 && radius <= grid.half_extent() - 2.0 * grid.h()) {
                    return Err(Error::Geometry(format!(
                        "disc of radius {radius} does not fit inside [-{L}, {L}]^2 with a margin of 2h",
                        L = grid.half_extent()
                    )));
                }
                let (s, d) = Self::disc_stencil(grid, &flux, radius);
                (s, Some(d))
            }
        };
        let mg = Multigrid::new(stencil)?;
        Ok(Self { grid, mask, flux, mg, disc })
    }

    fn five_point(grid: DomainGrid, flux: &FluxOperator) -> SymStencil9 {
        let n = grid.n();
        let (m, np, xw) = (n - 1, n + 1, n);
        let ih2 = 1.0 / (grid.h() * grid.h());
        let (a11, a22) = (flux.a11(), flux.a22());
        let mut s = SymStencil9::zeros(m, m, false);
        for j in 1..n {
            for i in 1..n {
                let p = (j - 1) * m + (i - 1);
                let (ae, aw) = (a11[j * xw + i], a11[j * xw + i - 1]);
                let (an, as_) = (a22[j * np + i], a22[(j - 1) * np + i]);
                s.set_center(p, (ae + aw + an + as_) * ih2);
                if i < n - 1 {
                    s.set_east(p, -ae * ih2);
                }
                if j < n - 1 {
                    s.set_north(p, -an * ih2);
                }
            }
        }
        s
    }

    fn probed_stencil(grid: DomainGrid, flux: &FluxOperator) -> SymStencil9 {
        let n = grid.n();
        let (m, np) = (n - 1, n + 1);
        let mut full = vec![0.0; np * np];
        let mut out = vec![0.0; np * np];
        SymStencil9::probe(m, m, true, |x, y| {
            embed(x, n, &mut full);
            flux.apply(&full, &mut out);
            extract(&out, n, y);
        })
    }

    fn disc_stencil(grid: DomainGrid, flux: &FluxOperator, radius: f64) -> (SymStencil9, DiscGeometry) {
        let n = grid.n();
        let (m, np, xw) = (n - 1, n + 1, n);
        let h = grid.h();
        let ih2 = 1.0 / (h * h);
        let (a11, a22) = (flux.a11(), flux.a22());
        let r2 = radius * radius;
        const DIRS: [[f64; 2]; 4] = [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]];

        let inside = |i: usize, j: usize| {
            let x = grid.coord(i, j);
            x[0] * x[0] + x[1] * x[1] < r2
        };
        let mut kind = vec![OUTSIDE; m * m];
        for j in 1..n {
            for i in 1..n {
                if !inside(i, j) {
                    continue;
                }
                let x = grid.coord(i, j);
                let near = DIRS.iter().any(|&e| {
                    let (ni, nj) = ((i as f64 + e[0]) as usize, (j as f64 + e[1]) as usize);
                    !inside(ni, nj) && crossing(x, e, h, radius) < SNAP
                });
                kind[(j - 1) * m + (i - 1)] = if near { SNAPPED } else { ACTIVE };
            }
        }

        let mut s = SymStencil9::zeros(m, m, false);
        let mut links = Vec::new();
        for j in 1..n {
            for i in 1..n {
                let p = (j - 1) * m + (i - 1);
                if kind[p] != ACTIVE {
                    s.set_center(p, 1.0);
                    continue;
                }
                let x = grid.coord(i, j);
                let coeffs = [
                    a11[j * xw + i],
                    a11[j * xw + i - 1],
                    a22[j * np + i],
                    a22[(j - 1) * np + i],
                ];
                let mut diag = 0.0;
                for (d, (&e, &a)) in DIRS.iter().zip(&coeffs).enumerate() {
                    let (ni, nj) = ((i as f64 + e[0]) as usize, (j as f64 + e[1]) as usize);
                    let q_kind = if grid.is_boundary(ni, nj) {
                        OUTSIDE
                    } else {
                        kind[(nj - 1) * m + (ni - 1)]
                    };
                    match q_kind {
                        ACTIVE => {
                            diag += a * ih2;
                            match d {
                                0 => s.set_east(p, -a * ih2),
                                2 => s.set_north(p, -a * ih2),
                                _ => {}
                            }
                        }
                        SNAPPED => {
                            diag += a * ih2;
                            links.push(BoundaryLink {
                                unknown: p,
                                point: project(grid.coord(ni, nj), radius),
                                weight: a * ih2,
                            });
                        }
                        _ => {
                            let t = crossing(x, e, h, radius);
                            let w = a * ih2 / t;
                            diag += w;
                            links.push(BoundaryLink {
                                unknown: p,
                                point: [x[0] + t * h * e[0], x[1] + t * h * e[1]],
                                weight: w,
                            });
                        }
                    }
                }
                s.set_center(p, diag);
            }
        }
        (s, DiscGeometry { radius, kind, links })
    }

    pub fn grid(&self) -> DomainGrid {
        self.grid
    }

    pub fn mask(&self) -> BoundaryMask {
        self.mask
    }

    pub fn multigrid_depth(&self) -> usize {
        self.mg.depth()
    }

    /// Flux-form `L_h v` at interior nodes of the square (boundary entries
    /// zero), independent of the mask.
    pub fn apply(&self, v: &ScalarField) -> ScalarField {
        assert_eq!(*v.grid(), self.grid, "field lives on a different grid");
        let mut out = vec![0.0; v.values().len()];
        self.flux.apply(v.values(), &mut out);
        ScalarField::from_values_unchecked(self.grid, out)
    }

    /// The assembled system matrix acting on the interior values of `v`
    /// (boundary values are ignored); this is the matrix the solver inverts.
    pub fn apply_interior(&self, v: &ScalarField) -> ScalarField {
        assert_eq!(*v.grid(), self.grid, "field lives on a different grid");
        let n = self.grid.n();
        let m = n - 1;
        let mut x = vec![0.0; m * m];
        extract(v.values(), n, &mut x);
        let mut y = vec![0.0; m * m];
        self.mg.fine().apply(&x, &mut y);
        let mut out = vec![0.0; v.values().len()];
        embed(&y, n, &mut out);
        ScalarField::from_values_unchecked(self.grid, out)
    }

    fn rhs(&self, g: &BoundaryData) -> Result<Vec<f64>> {
        let grid = self.grid;
        let n = grid.n();
        let m = n - 1;
        match &self.disc {
            None => {
                let mut ext = vec![0.0; grid.nodes_per_side().pow(2)];
                for j in 0..=n {
                    for i in 0..=n {
                        if grid.is_boundary(i, j) {
                            ext[grid.index(i, j)] = g.eval(grid.coord(i, j))?;
                        }
                    }
                }
                let mut out = vec![0.0; ext.len()];
                self.flux.apply(&ext, &mut out);
                let mut b = vec![0.0; m * m];
                extract(&out, n, &mut b);
                b.iter_mut().for_each(|v| *v = -*v);
                Ok(b)
            }
            Some(d) => {
                let mut b = vec![0.0; m * m];
                for j in 1..n {
                    for i in 1..n {
                        let p = (j - 1) * m + (i - 1);
                        let x = grid.coord(i, j);
                        b[p] = match d.kind[p] {
                            OUTSIDE => g.eval(x)?,
                            SNAPPED => g.eval(project(x, d.radius))?,
                            _ => 0.0,
                        };
                    }
                }
                for l in &d.links {
                    b[l.unknown] += l.weight * g.eval(l.point)?;
                }
                Ok(b)
            }
        }
    }
}

fn project(x: [f64; 2], radius: f64) -> [f64; 2] {
    let r = x[0].hypot(x[1]);
    if r == 0.0 {
        [radius, 0.0]
    } else {
        [x[0] * radius / r, x[1] * radius / r]
    }
}

/// Interior block (`(n-1)^2`, row-major) into a full node vector; boundary
/// entries are zeroed.
fn embed(x: &[f64], n: usize, full: &mut [f64]) {
    let (m, np) = (n - 1, n + 1);
    full.iter_mut().for_each(|v| *v = 0.0);
    for j in 1..n {
        full[j * np + 1..j * np + n].copy_from_slice(&x[(j - 1) * m..j * m]);
    }
}

fn extract(full: &[f64], n: usize, x: &mut [f64]) {
    let (m, np) = (n - 1, n + 1);
    for j in 1..n {
        x[(j - 1) * m..j * m].copy_from_slice(&full[j * np + 1..j * np + n]);
    }
}

pub fn solve_dirichlet(op: &DiscreteOperator, g: &BoundaryData, tol: f64) -> Result<ScalarField> {
    solve_dirichlet_with_stats(op, g, tol).map(|(u, _)| u)
}

/// Solves the Dirichlet problem to relative residual `tol`. On a square mask
/// the boundary nodes carry `g`; on a disc mask every node outside the disc
/// carries `g` evaluated at the node.
pub fn solve_dirichlet_with_stats(
    op: &DiscreteOperator,
    g: &BoundaryData,
    tol: f64,
) -> Result<(ScalarField, CgStats)> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::Config(format!("solver tolerance must lie in (0, 1), got {tol}")));
    }
    let grid = op.grid;
    let n = grid.n();
    let b = op.rhs(g)?;
    let mut x = vec![0.0; b.len()];
    let stats = if b.iter().all(|&v| v == 0.0) {
        CgStats { iterations: 0, relative_residual: 0.0 }
    } else {
        op.mg.solve(&b, &mut x, tol, MAX_ITER)?
    };
    if let Some(d) = &op.disc {
        // decoupled rows: copy the data exactly rather than to solver tolerance
        for (p, &k) in d.kind.iter().enumerate() {
            if k != ACTIVE {
                x[p] = b[p];
            }
        }
    }
    let mut full = vec![0.0; grid.nodes_per_side().pow(2)];
    embed(&x, n, &mut full);
    for j in 0..=n {
        for i in 0..=n {
            if grid.is_boundary(i, j) {
                full[grid.index(i, j)] = g.eval(grid.coord(i, j))?;
            }
        }
    }
    Ok((ScalarField::from_values(grid, full)?, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptic::harmonic_polynomial;
    use crate::fields::builtin_coefficient;

    fn random_field(grid: DomainGrid, seed: u64) -> ScalarField {
        let mut s = seed;
        let vals = (0..grid.nodes_per_side().pow(2))
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
            })
            .collect();
        ScalarField::from_values(grid, vals).unwrap()
    }

    fn dot(a: &ScalarField, b: &ScalarField) -> f64 {
        a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn quadratic_harmonic_is_reproduced_on_the_square() {
        let grid = DomainGrid::new(1.0, 32).unwrap();
        let op = assemble_homogenized(Mat2::IDENTITY, grid, BoundaryMask::Square).unwrap();
        let (u, stats) = solve_dirichlet_with_stats(&op, &BoundaryData::harmonic(2), 1e-12).unwrap();
        let exact = harmonic_polynomial(2).sample(grid).unwrap();
        assert!(u.zip_map(&exact, |a, b| a - b).max_abs() < 1e-9);
        assert!(stats.iterations < 30);
    }

    #[test]
    fn cross_terms_reproduce_a_quadratic_solution() {
        // 2 a11 + 2 a12 b = 0 for u = x^2 + b x y
        let a = Mat2::symmetric(1.0, 0.3, 2.0);
        let b = -1.0 / 0.3;
        let grid = DomainGrid::new(1.0, 32).unwrap();
        let op = assemble_homogenized(a, grid, BoundaryMask::Square).unwrap();
        let g = BoundaryData::from_fn("quad", move |x| x[0] * x[0] + b * x[0] * x[1]);
        let u = solve_dirichlet(&op, &g, 1e-12).unwrap();
        let exact = ScalarField::from_fn(grid, |x| x[0] * x[0] + b * x[0] * x[1]).unwrap();
        assert!(u.zip_map(&exact, |p, q| p - q).max_abs() < 1e-8);
    }

    #[test]
    fn system_matrix_is_self_adjoint() {
        let a = builtin_coefficient("smooth2d").unwrap();
        let grid = DomainGrid::new(1.0, 16).unwrap();
        let op = assemble(&a, 1.0, grid, BoundaryMask::Square).unwrap();
        let (v, w) = (random_field(grid, 1), random_field(grid, 2));
        let zero_bd = |f: ScalarField| {
            let vals = f
                .values()
                .iter()
                .enumerate()
                .map(|(k, &x)| if grid.is_boundary(k % 17, k / 17) { 0.0 } else { x })
                .collect();
            ScalarField::from_values(grid, vals).unwrap()
        };
        let (v, w) = (zero_bd(v), zero_bd(w));
        let lhs = dot(&op.apply_interior(&v), &w);
        let rhs = dot(&v, &op.apply_interior(&w));
        assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0));
        // matches the flux form for fields vanishing on the boundary
        let diff = op.apply(&v).zip_map(&op.apply_interior(&v), |p, q| p - q);
        assert!(diff.max_abs() < 1e-9);
        assert!(dot(&op.apply_interior(&v), &v) > 0.0);
    }

    #[test]
    fn oscillating_solution_obeys_the_maximum_principle() {
        let a = builtin_coefficient("laminate").unwrap();
        let grid = DomainGrid::new(1.0, 64).unwrap();
        let op = assemble(&a, 0.25, grid, BoundaryMask::Square).unwrap();
        let g = BoundaryData::fourier(3, 4);
        let u = solve_dirichlet(&op, &g, 1e-10).unwrap();
        let n = grid.n();
        let (mut bmin, mut bmax) = (f64::INFINITY, f64::NEG_INFINITY);
        for j in 0..=n {
            for i in 0..=n {
                if grid.is_boundary(i, j) {
                    bmin = bmin.min(u.at(i, j));
                    bmax = bmax.max(u.at(i, j));
                }
            }
        }
        assert!(u.values().iter().all(|&v| v >= bmin - 1e-9 && v <= bmax + 1e-9));
    }

    #[test]
    fn under_resolved_grids_are_rejected() {
        let a = builtin_coefficient("laminate").unwrap();
        let grid = DomainGrid::new(1.0, 32).unwrap();
        match assemble(&a, 0.25, grid, BoundaryMask::Square) {
            Err(Error::Resolution { required_n, .. }) => assert_eq!(required_n, 64),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn disc_solver_converges_at_second_order() {
        let exact = harmonic_polynomial(3);
        let mut errs = Vec::new();
        for n in [32, 64, 128] {
            let grid = DomainGrid::new(1.5, n).unwrap();
            let op = assemble_homogenized(Mat2::IDENTITY, grid, BoundaryMask::Disc { radius: 1.2 }).unwrap();
            let u = solve_dirichlet(&op, &BoundaryData::harmonic(3), 1e-12).unwrap();
            let mut e: f64 = 0.0;
            for j in 0..=n {
                for i in 0..=n {
                    let x = grid.coord(i, j);
                    if x[0].hypot(x[1]) < 1.2 {
                        e = e.max((u.at(i, j) - exact.value(x)).abs());
                    }
                }
            }
            errs.push(e);
        }
        assert!(errs[2] < 1e-3, "{errs:?}");
        assert!(errs[0] / errs[1] > 2.5 && errs[1] / errs[2] > 2.5, "{errs:?}");
    }

    #[test]
    fn disc_solver_fills_the_exterior_with_the_data() {
        let grid = DomainGrid::new(1.5, 32).unwrap();
        let op = assemble_homogenized(Mat2::diag(0.5, 2.0), grid, BoundaryMask::Disc { radius: 1.0 }).unwrap();
        let g = BoundaryData::fourier(1, 3);
        let u = solve_dirichlet(&op, &g, 1e-10).unwrap();
        let x = grid.coord(1, 1);
        assert_eq!(u.at(1, 1), g.eval(x).unwrap());
    }

    #[test]
    fn disc_rejects_cross_terms_and_oversized_radii() {
        let grid = DomainGrid::new(1.0, 32).unwrap();
        let a = Mat2::symmetric(1.0, 0.1, 1.0);
        assert!(matches!(
            assemble_homogenized(a, grid, BoundaryMask::Disc { radius: 0.5 }),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            assemble_homogenized(Mat2::IDENTITY, grid, BoundaryMask::Disc { radius: 1.0 }),
            Err(Error::Geometry(_))
        ));
    }
}
