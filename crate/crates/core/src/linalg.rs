//! Small dense complex linear systems.
//!
//! Gaussian elimination with row equilibration and partial pivoting. The
//! systems here are at most 7x7 but badly scaled (the mechanical row carries
//! entries near `omega_m^2 ~ 1e16` next to optical rates near `1e6`), so every
//! row is normalised to unit max-norm before pivoting.

use crate::error::{Error, Result};
use crate::num::{Cplx, Real};

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T: Real> {
    n: usize,
    data: Vec<Cplx<T>>,
}

impl<T: Real> DenseMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![Cplx::new(T::zero(), T::zero()); n * n],
        }
    }

    pub fn from_rows(rows: &[Vec<Cplx<T>>]) -> Self {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n, "row {i} has wrong length");
            for (j, v) in row.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn mul_vec(&self, x: &[Cplx<T>]) -> Vec<Cplx<T>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self[(i, j)] * x[j]).sum())
            .collect()
    }

    /// Induced infinity norm (max absolute row sum).
    pub fn norm_inf(&self) -> T {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self[(i, j)].norm()).sum::<T>())
            .fold(T::zero(), T::max)
    }

    /// Induced 1-norm (max absolute column sum).
    pub fn norm_one(&self) -> T {
        (0..self.n)
            .map(|j| (0..self.n).map(|i| self[(i, j)].norm()).sum::<T>())
            .fold(T::zero(), T::max)
    }

    pub fn all_finite(&self) -> bool {
        self.data
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl<T: Real> std::ops::Index<(usize, usize)> for DenseMatrix<T> {
    type Output = Cplx<T>;
    fn index(&self, (i, j): (usize, usize)) -> &Cplx<T> {
        &self.data[i * self.n + j]
    }
}

impl<T: Real> std::ops::IndexMut<(usize, usize)> for DenseMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Cplx<T> {
        &mut self.data[i * self.n + j]
    }
}

/// LU factors of an equilibrated matrix: `P R A C = L U`.
#[derive(Debug, Clone)]
pub struct LuFactors<T: Real> {
    lu: DenseMatrix<T>,
    perm: Vec<usize>,
    row_scale: Vec<T>,
    col_scale: Vec<T>,
}

impl<T: Real> LuFactors<T> {
    pub fn factor(a: &DenseMatrix<T>, context: &str) -> Result<Self> {
        let n = a.dim();
        let mut lu = a.clone();
        let mut col_scale = vec![T::one(); n];
        for (j, scale) in col_scale.iter_mut().enumerate() {
            let m = (0..n).map(|i| lu[(i, j)].norm()).fold(T::zero(), T::max);
            if !(m > T::zero()) {
                return Err(singular(context, a, 0.0));
            }
            *scale = T::one() / m;
            for i in 0..n {
                lu[(i, j)] *= *scale;
            }
        }
        let mut row_scale = vec![T::one(); n];
        for (i, scale) in row_scale.iter_mut().enumerate() {
            let m = (0..n).map(|j| lu[(i, j)].norm()).fold(T::zero(), T::max);
            if !(m > T::zero()) || !m.is_finite() {
                return Err(singular(context, a, 0.0));
            }
            *scale = T::one() / m;
            for j in 0..n {
                lu[(i, j)] *= *scale;
            }
        }
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, lu[(i, k)].norm()))
                .fold((k, T::zero()), |acc, c| if c.1 > acc.1 { c } else { acc });
            if !(pmax > T::epsilon()) {
                return Err(singular(context, a, pmax.to_f64_lossy()));
            }
            if p != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
                perm.swap(k, p);
            }
            let pivot = lu[(k, k)];
            for i in (k + 1)..n {
                let f = lu[(i, k)];
                if f.re == T::zero() && f.im == T::zero() {
                    continue;
                }
                let l = f / pivot;
                lu[(i, k)] = l;
                for j in (k + 1)..n {
                    let u = lu[(k, j)];
                    lu[(i, j)] -= l * u;
                }
            }
        }
        Ok(Self {
            lu,
            perm,
            row_scale,
            col_scale,
        })
    }

    pub fn solve(&self, b: &[Cplx<T>]) -> Vec<Cplx<T>> {
        let n = self.lu.dim();
        let mut x: Vec<Cplx<T>> = self
            .perm
            .iter()
            .map(|&i| b[i] * self.row_scale[i])
            .collect();
        for i in 0..n {
            for j in 0..i {
                let l = self.lu[(i, j)];
                if l.re != T::zero() || l.im != T::zero() {
                    x[i] = x[i] - l * x[j];
                }
            }
        }
        for i in (0..n).rev() {
            for j in (i + 1)..n {
                let u = self.lu[(i, j)];
                if u.re != T::zero() || u.im != T::zero() {
                    x[i] = x[i] - u * x[j];
                }
            }
            x[i] /= self.lu[(i, i)];
        }
        for (xi, &c) in x.iter_mut().zip(&self.col_scale) {
            *xi *= c;
        }
        x
    }
}

fn singular<T: Real>(context: &str, a: &DenseMatrix<T>, pivot: f64) -> Error {
    Error::Singular {
        context: context.to_string(),
        pivot,
        condition: condition_estimate(a).unwrap_or(f64::INFINITY),
    }
}

/// Exact 1-norm condition number `||A||_1 ||A^-1||_1`, computed column by
/// column. Only meant for the small systems in this crate.
pub fn condition_estimate<T: Real>(a: &DenseMatrix<T>) -> Option<f64> {
    let n = a.dim();
    let mut lu = a.clone();
    // Cheap LU without the singularity guard.
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let p = (k..n).max_by(|&x, &y| {
            lu[(x, k)]
                .norm()
                .partial_cmp(&lu[(y, k)].norm())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if lu[(p, k)].norm() == T::zero() {
            return None;
        }
        for j in 0..n {
            let tmp = lu[(k, j)];
            lu[(k, j)] = lu[(p, j)];
            lu[(p, j)] = tmp;
        }
        perm.swap(k, p);
        for i in (k + 1)..n {
            let l = lu[(i, k)] / lu[(k, k)];
            lu[(i, k)] = l;
            for j in (k + 1)..n {
                let u = lu[(k, j)];
                lu[(i, j)] -= l * u;
            }
        }
    }
    let mut inv_norm = T::zero();
    for col in 0..n {
        let mut x: Vec<Cplx<T>> = perm
            .iter()
            .map(|&i| {
                if i == col {
                    Cplx::new(T::one(), T::zero())
                } else {
                    Cplx::new(T::zero(), T::zero())
                }
            })
            .collect();
        for i in 0..n {
            for j in 0..i {
                let l = lu[(i, j)];
                x[i] = x[i] - l * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in (i + 1)..n {
                let u = lu[(i, j)];
                x[i] = x[i] - u * x[j];
            }
            x[i] /= lu[(i, i)];
        }
        let s: T = x.iter().map(|z| z.norm()).sum();
        inv_norm = inv_norm.max(s);
    }
    Some((a.norm_one() * inv_norm).to_f64_lossy())
}

pub fn vec_norm<T: Real>(v: &[Cplx<T>]) -> T {
    v.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()
}

/// Solves `A x = b`, returning the solution and the residual 2-norm
/// `||A x - b||`.
pub fn solve_with_residual<T: Real>(
    a: &DenseMatrix<T>,
    b: &[Cplx<T>],
    context: &str,
) -> Result<(Vec<Cplx<T>>, T)> {
    let lu = LuFactors::factor(a, context)?;
    let x = lu.solve(b);
    let ax = a.mul_vec(&x);
    let r: Vec<Cplx<T>> = ax.iter().zip(b).map(|(p, q)| *p - *q).collect();
    Ok((x, vec_norm(&r)))
}
