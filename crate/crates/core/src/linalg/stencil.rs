use super::cg::LinearOperator;

/// Symmetric 9-point operator on an `mx x my` block of unknowns (row-major,
/// `p = j mx + i`); neighbours outside the block are homogeneous Dirichlet
/// values. Only the forward couplings are stored: `e[p]` links `p` and
/// `p + 1`, `n[p]` links `p` and `p + mx`, `ne[p]` links `p` and `p + mx + 1`,
/// `nw[p]` links `p` and `p + mx - 1`.
#[derive(Clone, Debug)]
pub struct SymStencil9 {
    mx: usize,
    my: usize,
    c: Vec<f64>,
    e: Vec<f64>,
    n: Vec<f64>,
    diagonals: Option<(Vec<f64>, Vec<f64>)>,
}

impl SymStencil9 {
    pub fn zeros(mx: usize, my: usize, with_diagonals: bool) -> Self {
        let len = mx * my;
        Self {
            mx,
            my,
            c: vec![0.0; len],
            e: vec![0.0; len],
            n: vec![0.0; len],
            diagonals: with_diagonals.then(|| (vec![0.0; len], vec![0.0; len])),
        }
    }

    /// Recovers the stencil of a symmetric operator with 3x3 support from nine
    /// applications to colour-class indicator vectors.
    pub fn probe(mx: usize, my: usize, with_diagonals: bool, mut apply: impl FnMut(&[f64], &mut [f64])) -> Self {
        let mut s = Self::zeros(mx, my, with_diagonals);
        let len = mx * my;
        let mut probe = vec![0.0; len];
        let mut out = vec![0.0; len];
        for cy in 0..3 {
            for cx in 0..3 {
                probe.iter_mut().for_each(|v| *v = 0.0);
                for j in (cy..my).step_by(3) {
                    for i in (cx..mx).step_by(3) {
                        probe[j * mx + i] = 1.0;
                    }
                }
                apply(&probe, &mut out);
                for j in (cy..my).step_by(3) {
                    for i in (cx..mx).step_by(3) {
                        let p = j * mx + i;
                        s.c[p] = out[p];
                        if i + 1 < mx {
                            s.e[p] = out[p + 1];
                        }
                        if j + 1 < my {
                            s.n[p] = out[p + mx];
                        }
                        if let Some((ne, nw)) = s.diagonals.as_mut() {
                            if i + 1 < mx && j + 1 < my {
                                ne[p] = out[p + mx + 1];
                            }
                            if i > 0 && j + 1 < my {
                                nw[p] = out[p + mx - 1];
                            }
                        }
                    }
                }
            }
        }
        s
    }

    pub fn mx(&self) -> usize {
        self.mx
    }

    pub fn my(&self) -> usize {
        self.my
    }

    pub fn has_diagonals(&self) -> bool {
        self.diagonals.is_some()
    }

    pub fn set_center(&mut self, p: usize, v: f64) {
        self.c[p] = v;
    }

    pub fn set_east(&mut self, p: usize, v: f64) {
        self.e[p] = v;
    }

    pub fn set_north(&mut self, p: usize, v: f64) {
        self.n[p] = v;
    }

    pub fn center(&self, p: usize) -> f64 {
        self.c[p]
    }

    #[inline(always)]
    fn off_diagonal_sum(&self, x: &[f64], i: usize, j: usize, p: usize) -> f64 {
        let mx = self.mx;
        let mut s = 0.0;
        if i + 1 < mx {
            s += self.e[p] * x[p + 1];
        }
        if i > 0 {
            s += self.e[p - 1] * x[p - 1];
        }
        if j + 1 < self.my {
            s += self.n[p] * x[p + mx];
        }
        if j > 0 {
            s += self.n[p - mx] * x[p - mx];
        }
        if let Some((ne, nw)) = &self.diagonals {
            if j + 1 < self.my {
                if i + 1 < mx {
                    s += ne[p] * x[p + mx + 1];
                }
                if i > 0 {
                    s += nw[p] * x[p + mx - 1];
                }
            }
            if j > 0 {
                if i > 0 {
                    s += ne[p - mx - 1] * x[p - mx - 1];
                }
                if i + 1 < mx {
                    s += nw[p - mx + 1] * x[p - mx + 1];
                }
            }
        }
        s
    }

    pub fn gauss_seidel_forward(&self, x: &mut [f64], b: &[f64]) {
        for j in 0..self.my {
            for i in 0..self.mx {
                let p = j * self.mx + i;
                x[p] = (b[p] - self.off_diagonal_sum(x, i, j, p)) / self.c[p];
            }
        }
    }

    pub fn gauss_seidel_backward(&self, x: &mut [f64], b: &[f64]) {
        for j in (0..self.my).rev() {
            for i in (0..self.mx).rev() {
                let p = j * self.mx + i;
                x[p] = (b[p] - self.off_diagonal_sum(x, i, j, p)) / self.c[p];
            }
        }
    }

    pub fn residual(&self, x: &[f64], b: &[f64], r: &mut [f64]) {
        for j in 0..self.my {
            for i in 0..self.mx {
                let p = j * self.mx + i;
                r[p] = b[p] - self.c[p] * x[p] - self.off_diagonal_sum(x, i, j, p);
            }
        }
    }

    /// Dense row-major copy, for small coarse problems and tests.
    pub fn to_dense(&self) -> Vec<f64> {
        let len = self.len();
        let mut a = vec![0.0; len * len];
        let mut unit = vec![0.0; len];
        let mut col = vec![0.0; len];
        for q in 0..len {
            unit[q] = 1.0;
            self.apply(&unit, &mut col);
            unit[q] = 0.0;
            for p in 0..len {
                a[p * len + q] = col[p];
            }
        }
        a
    }
}

impl LinearOperator for SymStencil9 {
    fn len(&self) -> usize {
        self.mx * self.my
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for j in 0..self.my {
            for i in 0..self.mx {
                let p = j * self.mx + i;
                y[p] = self.c[p] * x[p] + self.off_diagonal_sum(x, i, j, p);
            }
        }
    }
}
