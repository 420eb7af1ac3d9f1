//! Geometric multigrid with Galerkin coarse operators, used as a
//! preconditioner for CG on vertex-centred Dirichlet grids.
//!
//! A grid with `m = 2 mc + 1` unknowns per side coarsens to `mc`; coarse node
//! `I` sits on fine node `2 I + 1`. Prolongation is bilinear, restriction its
//! transpose, and coarse operators are `P^T A P`, recovered by probing.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

use super::cg::{pcg, CgOptions, CgStats, LinearOperator, Preconditioner};
use super::stencil::SymStencil9;

const MAX_DENSE: usize = 2500;
const SMOOTHING_STEPS: usize = 2;

enum CoarseSolver {
    Dense(Cholesky<f64, Dyn>),
    Sweeps(usize),
}

pub struct Multigrid {
    levels: Vec<SymStencil9>,
    coarse: CoarseSolver,
}

fn coarsenable(s: &SymStencil9) -> bool {
    let (mx, my) = (s.mx(), s.my());
    mx % 2 == 1 && my % 2 == 1 && mx >= 7 && my >= 7
}

fn prolong(xc: &[f64], mcx: usize, mcy: usize, xf: &mut [f64]) {
    let (mx, my) = (2 * mcx + 1, 2 * mcy + 1);
    let at = |i: isize, j: isize| -> f64 {
        if i < 0 || j < 0 || i >= mcx as isize || j >= mcy as isize {
            0.0
        } else {
            xc[j as usize * mcx + i as usize]
        }
    };
    for j in 0..my {
        let (jc, jodd) = ((j as isize - 1).div_euclid(2), j % 2 == 1);
        for i in 0..mx {
            let (ic, iodd) = ((i as isize - 1).div_euclid(2), i % 2 == 1);
            xf[j * mx + i] = match (iodd, jodd) {
                (true, true) => at(ic, jc),
                (false, true) => 0.5 * (at(ic, jc) + at(ic + 1, jc)),
                (true, false) => 0.5 * (at(ic, jc) + at(ic, jc + 1)),
                (false, false) => {
                    0.25 * (at(ic, jc) + at(ic + 1, jc) + at(ic, jc + 1) + at(ic + 1, jc + 1))
                }
            };
        }
    }
}

fn restrict(rf: &[f64], mcx: usize, mcy: usize, rc: &mut [f64]) {
    let mx = 2 * mcx + 1;
    const W: [f64; 3] = [0.5, 1.0, 0.5];
    for jc in 0..mcy {
        for ic in 0..mcx {
            let mut s = 0.0;
            for (dj, wj) in W.iter().enumerate() {
                let row = (2 * jc + dj) * mx + 2 * ic;
                for (di, wi) in W.iter().enumerate() {
                    s += wi * wj * rf[row + di];
                }
            }
            rc[jc * mcx + ic] = s;
        }
    }
}

impl Multigrid {
    pub fn new(fine: SymStencil9) -> Result<Self> {
        let mut levels = vec![fine];
        while coarsenable(levels.last().unwrap()) {
            let a = levels.last().unwrap();
            let (mcx, mcy) = ((a.mx() - 1) / 2, (a.my() - 1) / 2);
            let mut xf = vec![0.0; a.len()];
            let mut yf = vec![0.0; a.len()];
            let coarse = SymStencil9::probe(mcx, mcy, true, |xc, yc| {
                prolong(xc, mcx, mcy, &mut xf);
                a.apply(&xf, &mut yf);
                restrict(&yf, mcx, mcy, yc);
            });
            levels.push(coarse);
        }
        let last = levels.last().unwrap();
        let coarse = if last.len() <= MAX_DENSE {
            let n = last.len();
            let m = DMatrix::from_row_slice(n, n, &last.to_dense());
            CoarseSolver::Dense(
                m.cholesky()
                    .ok_or_else(|| Error::Consistency("coarse-grid operator is not positive definite".into()))?,
            )
        } else {
            CoarseSolver::Sweeps(40)
        };
        Ok(Self { levels, coarse })
    }

    pub fn fine(&self) -> &SymStencil9 {
        &self.levels[0]
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// CG on the fine operator preconditioned by one V(2,2)-cycle per step.
    pub fn solve(&self, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> Result<CgStats> {
        let mut pc = VCycle::new(self);
        pcg(self.fine(), &mut pc, b, x, CgOptions { tol, max_iter, project_mean: false })
    }
}

struct Scratch {
    x: Vec<f64>,
    b: Vec<f64>,
    r: Vec<f64>,
}

struct VCycle<'a> {
    mg: &'a Multigrid,
    scratch: Vec<Scratch>,
}

impl<'a> VCycle<'a> {
    fn new(mg: &'a Multigrid) -> Self {
        let scratch = mg
            .levels
            .iter()
            .map(|l| Scratch {
                x: vec![0.0; l.len()],
                b: vec![0.0; l.len()],
                r: vec![0.0; l.len()],
            })
            .collect();
        Self { mg, scratch }
    }

    /// Solves approximately on `level` with rhs in `scratch[level].b`, result
    /// in `scratch[level].x`, zero initial guess.
    fn cycle(&mut self, level: usize) {
        let a = &self.mg.levels[level];
        let last = level + 1 == self.mg.levels.len();
        if last {
            let s = &mut self.scratch[level];
            match &self.mg.coarse {
                CoarseSolver::Dense(ch) => {
                    let sol = ch.solve(&DVector::from_column_slice(&s.b));
                    s.x.copy_from_slice(sol.as_slice());
                }
                CoarseSolver::Sweeps(k) => {
                    s.x.iter_mut().for_each(|v| *v = 0.0);
                    for _ in 0..*k {
                        a.gauss_seidel_forward(&mut s.x, &s.b);
                        a.gauss_seidel_backward(&mut s.x, &s.b);
                    }
                }
            }
            return;
        }
        let (mcx, mcy) = ((a.mx() - 1) / 2, (a.my() - 1) / 2);
        {
            let s = &mut self.scratch[level];
            s.x.iter_mut().for_each(|v| *v = 0.0);
            for _ in 0..SMOOTHING_STEPS {
                a.gauss_seidel_forward(&mut s.x, &s.b);
            }
            a.residual(&s.x, &s.b, &mut s.r);
        }
        {
            let (fine, coarse) = self.scratch.split_at_mut(level + 1);
            restrict(&fine[level].r, mcx, mcy, &mut coarse[0].b);
        }
        self.cycle(level + 1);
        {
            let (fine, coarse) = self.scratch.split_at_mut(level + 1);
            let s = &mut fine[level];
            prolong(&coarse[0].x, mcx, mcy, &mut s.r);
            for (x, c) in s.x.iter_mut().zip(&s.r) {
                *x += c;
            }
            for _ in 0..SMOOTHING_STEPS {
                a.gauss_seidel_backward(&mut s.x, &s.b);
            }
        }
    }
}

impl Preconditioner for VCycle<'_> {
    fn apply(&mut self, r: &[f64], z: &mut [f64]) {
        self.scratch[0].b.copy_from_slice(r);
        self.cycle(0);
        z.copy_from_slice(&self.scratch[0].x);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn variable_laplacian(m: usize) -> SymStencil9 {
        // -div(k grad) with k jumping by a factor of 3 in stripes
        let k = |i: usize| if (i / 3).is_multiple_of(2) { 1.0 } else { 3.0 };
        let mut s = SymStencil9::zeros(m, m, false);
        for j in 0..m {
            for i in 0..m {
                let p = j * m + i;
                let (ke, kw) = (k(i + 1), k(i));
                s.set_center(p, ke + kw + 2.0 * k(i));
                s.set_east(p, -ke);
                s.set_north(p, -k(i));
            }
        }
        s
    }

    #[test]
    fn prolongation_is_transpose_of_restriction() {
        let (mcx, mcy) = (3, 4);
        let (nf, nc) = ((2 * mcx + 1) * (2 * mcy + 1), mcx * mcy);
        let xc: Vec<f64> = (0..nc).map(|k| (k as f64 * 0.37).sin()).collect();
        let yf: Vec<f64> = (0..nf).map(|k| (k as f64 * 0.11).cos()).collect();
        let mut pxc = vec![0.0; nf];
        prolong(&xc, mcx, mcy, &mut pxc);
        let mut ryf = vec![0.0; nc];
        restrict(&yf, mcx, mcy, &mut ryf);
        let lhs: f64 = pxc.iter().zip(&yf).map(|(a, b)| a * b).sum();
        let rhs: f64 = xc.iter().zip(&ryf).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn preconditioned_cg_converges_quickly() {
        let m = 127;
        let mg = Multigrid::new(variable_laplacian(m)).unwrap();
        assert!(mg.depth() >= 5);
        let b: Vec<f64> = (0..m * m).map(|k| ((k * 7919) % 113) as f64 - 56.0).collect();
        let mut x = vec![0.0; m * m];
        let st = mg.solve(&b, &mut x, 1e-10, 100).unwrap();
        assert!(st.iterations < 30, "{} iterations", st.iterations);
        let mut r = vec![0.0; m * m];
        mg.fine().residual(&x, &b, &mut r);
        let rn: f64 = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        let bn: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(rn <= 1e-9 * bn);
    }
}
