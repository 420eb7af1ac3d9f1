//! Flux-form discretization of `L v = -div(A grad v)` on a uniform node
//! lattice, periodic or bounded.
//!
//! Fluxes live on edges: x-edge `(i, j)` joins nodes `(i, j)` and `(i+1, j)`,
//! y-edge `(i, j)` joins `(i, j)` and `(i, j+1)`; coefficients are sampled at
//! edge midpoints. The mixed term uses the four transverse differences around
//! each edge, arranged so that the resulting operator is symmetric.

use crate::fields::Mat2;

pub(crate) struct FluxOperator {
    nx: usize,
    ny: usize,
    periodic: bool,
    h: f64,
    a11: Vec<f64>,
    a22: Vec<f64>,
    cross: Option<(Vec<f64>, Vec<f64>)>,
}

impl FluxOperator {
    /// `coef` receives physical coordinates; node `(i, j)` sits at
    /// `origin + (i h, j h)`.
    pub fn new(
        nx: usize,
        ny: usize,
        periodic: bool,
        h: f64,
        origin: [f64; 2],
        coef: impl Fn([f64; 2]) -> Mat2,
    ) -> Self {
        let (xw, yh) = Self::edge_dims(nx, ny, periodic);
        let mut a11 = Vec::with_capacity(xw * ny);
        let mut a12x = Vec::with_capacity(xw * ny);
        for j in 0..ny {
            for i in 0..xw {
                let m = coef([origin[0] + (i as f64 + 0.5) * h, origin[1] + j as f64 * h]);
                a11.push(m.get(0, 0));
                a12x.push(0.5 * (m.get(0, 1) + m.get(1, 0)));
            }
        }
        let mut a22 = Vec::with_capacity(nx * yh);
        let mut a12y = Vec::with_capacity(nx * yh);
        for j in 0..yh {
            for i in 0..nx {
                let m = coef([origin[0] + i as f64 * h, origin[1] + (j as f64 + 0.5) * h]);
                a22.push(m.get(1, 1));
                a12y.push(0.5 * (m.get(0, 1) + m.get(1, 0)));
            }
        }
        let has_cross = a12x.iter().chain(&a12y).any(|&v| v != 0.0);
        Self {
            nx,
            ny,
            periodic,
            h,
            a11,
            a22,
            cross: has_cross.then_some((a12x, a12y)),
        }
    }

    fn edge_dims(nx: usize, ny: usize, periodic: bool) -> (usize, usize) {
        if periodic {
            (nx, ny)
        } else {
            (nx - 1, ny - 1)
        }
    }

    pub fn has_cross(&self) -> bool {
        self.cross.is_some()
    }

    pub fn a11(&self) -> &[f64] {
        &self.a11
    }

    pub fn a22(&self) -> &[f64] {
        &self.a22
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    fn wrap(&self, k: isize, n: usize) -> Option<usize> {
        if self.periodic {
            Some(k.rem_euclid(n as isize) as usize)
        } else if k >= 0 && (k as usize) < n {
            Some(k as usize)
        } else {
            None
        }
    }

    /// Edge differences `(D1 v, D2 v)`.
    pub fn differences(&self, v: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (nx, ny) = (self.nx, self.ny);
        let (xw, yh) = Self::edge_dims(nx, ny, self.periodic);
        let inv = 1.0 / self.h;
        let mut d1 = Vec::with_capacity(xw * ny);
        for j in 0..ny {
            for i in 0..xw {
                let ip = (i + 1) % nx;
                d1.push((v[j * nx + ip] - v[j * nx + i]) * inv);
            }
        }
        let mut d2 = Vec::with_capacity(nx * yh);
        for j in 0..yh {
            let jp = (j + 1) % ny;
            for i in 0..nx {
                d2.push((v[jp * nx + i] - v[j * nx + i]) * inv);
            }
        }
        (d1, d2)
    }

    /// Constant differences of the linear function `y_k` (`k = 0, 1`).
    pub fn slope_differences(&self, k: usize) -> (Vec<f64>, Vec<f64>) {
        let (xw, yh) = Self::edge_dims(self.nx, self.ny, self.periodic);
        (
            vec![if k == 0 { 1.0 } else { 0.0 }; xw * self.ny],
            vec![if k == 1 { 1.0 } else { 0.0 }; self.nx * yh],
        )
    }

    /// Edge fluxes `(q1, q2) = A grad v` from edge differences.
    pub fn fluxes(&self, d1: &[f64], d2: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (nx, ny) = (self.nx, self.ny);
        let (xw, yh) = Self::edge_dims(nx, ny, self.periodic);
        let mut q1: Vec<f64> = self.a11.iter().zip(d1).map(|(a, d)| a * d).collect();
        let mut q2: Vec<f64> = self.a22.iter().zip(d2).map(|(a, d)| a * d).collect();
        let Some((a12x, a12y)) = &self.cross else {
            return (q1, q2);
        };
        for j in 0..ny {
            for i in 0..xw {
                // y-edges around x-edge (i, j): columns i, i+1; rows j-1, j
                let (Some(c0), Some(c1), Some(r0), Some(r1)) = (
                    Some(i),
                    self.wrap(i as isize + 1, nx),
                    self.wrap(j as isize - 1, yh),
                    self.wrap(j as isize, yh),
                ) else {
                    continue;
                };
                let mut t = 0.0;
                let mut at = 0.0;
                for &(c, r) in &[(c0, r0), (c0, r1), (c1, r0), (c1, r1)] {
                    let e = r * nx + c;
                    t += d2[e];
                    at += a12y[e] * d2[e];
                }
                let e = j * xw + i;
                q1[e] += 0.125 * (a12x[e] * t + at);
            }
        }
        for j in 0..yh {
            for i in 0..nx {
                // x-edges around y-edge (i, j): columns i-1, i; rows j, j+1
                let (Some(c0), Some(c1), Some(r0), Some(r1)) = (
                    self.wrap(i as isize - 1, xw),
                    self.wrap(i as isize, xw),
                    Some(j),
                    self.wrap(j as isize + 1, ny),
                ) else {
                    continue;
                };
                let mut t = 0.0;
                let mut at = 0.0;
                for &(c, r) in &[(c0, r0), (c0, r1), (c1, r0), (c1, r1)] {
                    let e = r * xw + c;
                    t += d1[e];
                    at += a12x[e] * d1[e];
                }
                let e = j * nx + i;
                q2[e] += 0.125 * (a12y[e] * t + at);
            }
        }
        (q1, q2)
    }

    /// `-div q` at nodes; for bounded lattices only interior nodes are
    /// written and the boundary entries are set to zero.
    pub fn neg_divergence(&self, q1: &[f64], q2: &[f64], out: &mut [f64]) {
        let (nx, ny) = (self.nx, self.ny);
        let (xw, _) = Self::edge_dims(nx, ny, self.periodic);
        let inv = 1.0 / self.h;
        if self.periodic {
            for j in 0..ny {
                let jm = (j + ny - 1) % ny;
                for i in 0..nx {
                    let im = (i + nx - 1) % nx;
                    out[j * nx + i] = -((q1[j * xw + i] - q1[j * xw + im])
                        + (q2[j * nx + i] - q2[jm * nx + i]))
                        * inv;
                }
            }
        } else {
            out.iter_mut().for_each(|v| *v = 0.0);
            for j in 1..ny - 1 {
                for i in 1..nx - 1 {
                    out[j * nx + i] = -((q1[j * xw + i] - q1[j * xw + i - 1])
                        + (q2[j * nx + i] - q2[(j - 1) * nx + i]))
                        * inv;
                }
            }
        }
    }

    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        let (d1, d2) = self.differences(v);
        let (q1, q2) = self.fluxes(&d1, &d2);
        self.neg_divergence(&q1, &q2, out);
    }
}
