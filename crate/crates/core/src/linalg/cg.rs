use crate::error::{Error, Result};

pub trait LinearOperator {
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

pub trait Preconditioner {
    fn apply(&mut self, r: &[f64], z: &mut [f64]);
}

pub struct IdentityPreconditioner;

impl Preconditioner for IdentityPreconditioner {
    fn apply(&mut self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

#[derive(Clone, Copy, Debug)]
pub struct CgOptions {
    /// Stop once `|b - A x| <= tol |b|`.
    pub tol: f64,
    pub max_iter: usize,
    /// Work in the mean-zero subspace (periodic problems with constant kernel).
    pub project_mean: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn remove_mean(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
}

/// Preconditioned conjugate gradients starting from the contents of `x`.
/// The reported residual is recomputed from scratch at exit.
pub fn pcg<A: LinearOperator + ?Sized, P: Preconditioner + ?Sized>(
    a: &A,
    pc: &mut P,
    b: &[f64],
    x: &mut [f64],
    opts: CgOptions,
) -> Result<CgStats> {
    let n = a.len();
    assert_eq!(b.len(), n);
    assert_eq!(x.len(), n);
    let mut b = b.to_vec();
    if opts.project_mean {
        remove_mean(&mut b);
        remove_mean(x);
    }
    let bnorm = dot(&b, &b).sqrt();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgStats { iterations: 0, relative_residual: 0.0 });
    }

    let mut r = vec![0.0; n];
    let mut ap = vec![0.0; n];
    a.apply(x, &mut ap);
    for k in 0..n {
        r[k] = b[k] - ap[k];
    }
    if opts.project_mean {
        remove_mean(&mut r);
    }
    let mut z = vec![0.0; n];
    pc.apply(&r, &mut z);
    if opts.project_mean {
        remove_mean(&mut z);
    }
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut rel = dot(&r, &r).sqrt() / bnorm;
    let mut it = 0;
    while rel > opts.tol && it < opts.max_iter {
        a.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = rz / pap;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        if opts.project_mean {
            remove_mean(&mut r);
        }
        pc.apply(&r, &mut z);
        if opts.project_mean {
            remove_mean(&mut z);
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
        rel = dot(&r, &r).sqrt() / bnorm;
        it += 1;
    }

    a.apply(x, &mut ap);
    for k in 0..n {
        r[k] = b[k] - ap[k];
    }
    if opts.project_mean {
        remove_mean(&mut r);
        remove_mean(x);
    }
    let true_rel = dot(&r, &r).sqrt() / bnorm;
    // allow a little round-off drift between recurrence and true residual
    if true_rel > opts.tol * 10.0 || !true_rel.is_finite() {
        return Err(Error::Solver { iterations: it, residual: true_rel });
    }
    Ok(CgStats { iterations: it, relative_residual: true_rel })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Tridiag(usize);

    impl LinearOperator for Tridiag {
        fn len(&self) -> usize {
            self.0
        }
        fn apply(&self, x: &[f64], y: &mut [f64]) {
            let n = self.0;
            for i in 0..n {
                let l = if i > 0 { x[i - 1] } else { 0.0 };
                let r = if i + 1 < n { x[i + 1] } else { 0.0 };
                y[i] = 2.0 * x[i] - l - r;
            }
        }
    }

    #[test]
    fn solves_dirichlet_laplacian_1d() {
        let n = 50;
        let b = vec![1.0; n];
        let mut x = vec![0.0; n];
        let st = pcg(&Tridiag(n), &mut IdentityPreconditioner, &b, &mut x, CgOptions {
            tol: 1e-12,
            max_iter: 200,
            project_mean: false,
        })
        .unwrap();
        assert!(st.relative_residual <= 1e-11);
        // exact: x_i = (i+1)(n-i)/2
        for (i, v) in x.iter().enumerate() {
            let e = (i + 1) as f64 * (n - i) as f64 / 2.0;
            assert!((v - e).abs() < 1e-8 * e);
        }
    }

    #[test]
    fn zero_rhs_returns_zero() {
        let mut x = vec![3.0; 10];
        let st = pcg(&Tridiag(10), &mut IdentityPreconditioner, &[0.0; 10], &mut x, CgOptions {
            tol: 1e-10,
            max_iter: 5,
            project_mean: false,
        })
        .unwrap();
        assert_eq!(st.iterations, 0);
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn iteration_cap_reports_residual() {
        let mut x = vec![0.0; 200];
        let err = pcg(&Tridiag(200), &mut IdentityPreconditioner, &vec![1.0; 200], &mut x, CgOptions {
            tol: 1e-12,
            max_iter: 3,
            project_mean: false,
        })
        .unwrap_err();
        assert!(matches!(err, Error::Solver { iterations: 3, .. }));
    }
}
