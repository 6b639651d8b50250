//! Symmetric cones in standard form with Nesterov–Todd scaling.
//!
//! PSD blocks use the orthonormal `svec` layout: upper triangle column by
//! column with off-diagonal entries multiplied by √2.

use nalgebra::{DMatrix, SymmetricEigen};

use std::f64::consts::SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum ConeType {
    /// `s = 0`, dual free. Equality rows.
    Zero,
    Nonneg,
    Soc,
    Psd {
        k: usize,
    },
}

#[derive(Debug, Clone)]
enum Scaling {
    None,
    Nonneg { w: Vec<f64> },
    Soc { eta: f64, w: Vec<f64> },
    Psd { r: DMatrix<f64>, rinv: DMatrix<f64> },
}

#[derive(Debug, Clone)]
pub(crate) struct Cone {
    pub ty: ConeType,
    pub offset: usize,
    pub dim: usize,
    scaling: Scaling,
}

pub(crate) fn svec_index(i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    j * (j + 1) / 2 + i
}

pub(crate) fn smat(k: usize, v: &[f64]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(k, k);
    for j in 0..k {
        for i in 0..=j {
            let x = v[svec_index(i, j)];
            if i == j {
                m[(i, i)] = x;
            } else {
                m[(i, j)] = x / SQRT_2;
                m[(j, i)] = x / SQRT_2;
            }
        }
    }
    m
}

pub(crate) fn svec(m: &DMatrix<f64>, out: &mut [f64]) {
    let k = m.nrows();
    for j in 0..k {
        for i in 0..=j {
            out[svec_index(i, j)] = if i == j {
                m[(i, i)]
            } else {
                SQRT_2 * 0.5 * (m[(i, j)] + m[(j, i)])
            };
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Largest `α` with `x + α·d` inside the second-order cone, capped at `cap`.
fn soc_step(x: &[f64], d: &[f64], cap: f64) -> f64 {
    let a = d[0] * d[0] - dot(&d[1..], &d[1..]);
    let b = 2.0 * (x[0] * d[0] - dot(&x[1..], &d[1..]));
    let c = (x[0] * x[0] - dot(&x[1..], &x[1..])).max(0.0);
    let disc = b * b - 4.0 * a * c;
    let mut alpha = cap;
    if (a > 0.0 && b > 0.0) || disc < 0.0 {
        // both roots negative or complex: the segment never leaves the cone
    } else if a == 0.0 {
        if b < 0.0 {
            alpha = alpha.min(-c / b);
        }
    } else if c == 0.0 {
        if a < 0.0 || b < 0.0 {
            alpha = 0.0;
        }
    } else {
        let t = -0.5 * (b + b.signum() * disc.sqrt());
        for r in [c / t, t / a] {
            if r >= 0.0 {
                alpha = alpha.min(r);
            }
        }
    }
    // head must stay non-negative
    if d[0] < 0.0 {
        alpha = alpha.min(-x[0] / d[0]);
    }
    alpha.max(0.0)
}

impl Cone {
    pub fn new(ty: ConeType, offset: usize) -> Self {
        let dim = match ty {
            ConeType::Psd { k } => k * (k + 1) / 2,
            _ => 0,
        };
        Self {
            ty,
            offset,
            dim,
            scaling: Scaling::None,
        }
    }

    pub fn with_dim(ty: ConeType, offset: usize, dim: usize) -> Self {
        let mut c = Self::new(ty, offset);
        if !matches!(ty, ConeType::Psd { .. }) {
            c.dim = dim;
        }
        c
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.dim
    }

    pub fn degree(&self) -> usize {
        match self.ty {
            ConeType::Zero => 0,
            ConeType::Nonneg => self.dim,
            ConeType::Soc => 1,
            ConeType::Psd { k } => k,
        }
    }

    /// Smallest "eigenvalue" of `s` in the cone's Jordan algebra.
    pub fn margin(&self, s: &[f64]) -> f64 {
        match self.ty {
            ConeType::Zero => f64::INFINITY,
            ConeType::Nonneg => s.iter().copied().fold(f64::INFINITY, f64::min),
            ConeType::Soc => s[0] - norm(&s[1..]),
            ConeType::Psd { k } => SymmetricEigen::new(smat(k, s)).eigenvalues.min(),
        }
    }

    /// `s += alpha·e` with `e` the cone's identity element.
    pub fn add_identity(&self, s: &mut [f64], alpha: f64) {
        match self.ty {
            ConeType::Zero => {}
            ConeType::Nonneg => s.iter_mut().for_each(|v| *v += alpha),
            ConeType::Soc => s[0] += alpha,
            ConeType::Psd { k } => {
                for i in 0..k {
                    s[svec_index(i, i)] += alpha;
                }
            }
        }
    }

    pub fn set_identity_scaling(&mut self) {
        self.scaling = match self.ty {
            ConeType::Zero => Scaling::None,
            ConeType::Nonneg => Scaling::Nonneg { w: vec![1.0; self.dim] },
            ConeType::Soc => {
                let mut w = vec![0.0; self.dim];
                w[0] = 1.0;
                Scaling::Soc { eta: 1.0, w }
            }
            ConeType::Psd { k } => Scaling::Psd {
                r: DMatrix::identity(k, k),
                rinv: DMatrix::identity(k, k),
            },
        };
    }

    /// Recomputes the NT scaling for interior `(s, z)` and writes `λ = W z`.
    /// Returns `false` if either point is not strictly interior.
    pub fn update_scaling(&mut self, s: &[f64], z: &[f64], lambda: &mut [f64]) -> bool {
        match self.ty {
            ConeType::Zero => true,
            ConeType::Nonneg => {
                if s.iter().chain(z).any(|&v| v <= 0.0 || !v.is_finite()) {
                    return false;
                }
                let w: Vec<f64> = s.iter().zip(z).map(|(a, b)| (a / b).sqrt()).collect();
                for i in 0..self.dim {
                    lambda[i] = (s[i] * z[i]).sqrt();
                }
                self.scaling = Scaling::Nonneg { w };
                true
            }
            ConeType::Soc => {
                let sres = s[0] * s[0] - dot(&s[1..], &s[1..]);
                let zres = z[0] * z[0] - dot(&z[1..], &z[1..]);
                if sres <= 0.0 || zres <= 0.0 || s[0] <= 0.0 || z[0] <= 0.0 {
                    return false;
                }
                let (sn, zn) = (sres.sqrt(), zres.sqrt());
                let sz: f64 = s.iter().zip(z).map(|(a, b)| a * b).sum::<f64>() / (sn * zn);
                let gamma = ((1.0 + sz) / 2.0).sqrt();
                let mut w = vec![0.0; self.dim];
                w[0] = (s[0] / sn + z[0] / zn) / (2.0 * gamma);
                for i in 1..self.dim {
                    w[i] = (s[i] / sn - z[i] / zn) / (2.0 * gamma);
                }
                // renormalise so that wᵀJw = 1 exactly
                let tail = norm(&w[1..]);
                w[0] = (1.0 + tail * tail).sqrt();
                let eta = (sn / zn).sqrt();
                self.scaling = Scaling::Soc { eta, w };
                self.mul_w(z, lambda);
                true
            }
            ConeType::Psd { k } => {
                let (Some(ls), Some(lz)) = (smat(k, s).cholesky(), smat(k, z).cholesky()) else {
                    return false;
                };
                let ls = ls.l();
                let lz = lz.l();
                let svd = (lz.transpose() * &ls).svd(true, true);
                let (Some(u), Some(vt)) = (svd.u, svd.v_t) else {
                    return false;
                };
                let lam = svd.singular_values;
                if lam.iter().any(|&l| l <= 0.0 || !l.is_finite()) {
                    return false;
                }
                let inv_sqrt = DMatrix::from_diagonal(&lam.map(|l| 1.0 / l.sqrt()));
                let r = &ls * vt.transpose() * &inv_sqrt;
                let rinv = &inv_sqrt * u.transpose() * lz.transpose();
                lambda.iter_mut().for_each(|v| *v = 0.0);
                for i in 0..k {
                    lambda[svec_index(i, i)] = lam[i];
                }
                self.scaling = Scaling::Psd { r, rinv };
                true
            }
        }
    }

    /// Sparsity pattern `(a, b)` with `a <= b` of the block `WᵀW`, column by column.
    pub fn hessian_pattern(&self) -> Vec<(usize, usize)> {
        match self.ty {
            ConeType::Zero | ConeType::Nonneg => (0..self.dim).map(|i| (i, i)).collect(),
            ConeType::Soc | ConeType::Psd { .. } => (0..self.dim).flat_map(|b| (0..=b).map(move |a| (a, b))).collect(),
        }
    }

    /// Values of `WᵀW` in [`Cone::hessian_pattern`] order.
    pub fn hessian_values(&self, out: &mut Vec<f64>) {
        match (&self.scaling, self.ty) {
            (_, ConeType::Zero) => out.extend(std::iter::repeat_n(0.0, self.dim)),
            (Scaling::Nonneg { w }, _) => out.extend(w.iter().map(|x| x * x)),
            (Scaling::Soc { eta, w }, _) => {
                let e2 = eta * eta;
                for b in 0..self.dim {
                    for a in 0..=b {
                        let j = if a == 0 && b == 0 {
                            1.0
                        } else if a == b {
                            -1.0
                        } else {
                            0.0
                        };
                        out.push(e2 * (2.0 * w[a] * w[b] - j));
                    }
                }
            }
            (Scaling::Psd { r, .. }, ConeType::Psd { k }) => {
                let q = r * r.transpose();
                let pairs: Vec<(usize, usize)> = (0..k).flat_map(|j| (0..=j).map(move |i| (i, j))).collect();
                for (b, &(k1, l1)) in pairs.iter().enumerate() {
                    let c = if k1 == l1 { 0.5 } else { 1.0 / SQRT_2 };
                    for &(i, j) in &pairs[..=b] {
                        let d = if i == j { 1.0 } else { SQRT_2 };
                        out.push(d * c * (q[(i, k1)] * q[(j, l1)] + q[(i, l1)] * q[(j, k1)]));
                    }
                }
            }
            _ => unreachable!("scaling not initialised"),
        }
    }

    pub fn mul_w(&self, v: &[f64], out: &mut [f64]) {
        self.apply(v, out, false, false)
    }

    pub fn mul_wt(&self, v: &[f64], out: &mut [f64]) {
        self.apply(v, out, false, true)
    }

    #[cfg(test)]
    pub fn mul_winv(&self, v: &[f64], out: &mut [f64]) {
        self.apply(v, out, true, false)
    }

    pub fn mul_wtinv(&self, v: &[f64], out: &mut [f64]) {
        self.apply(v, out, true, true)
    }

    fn apply(&self, v: &[f64], out: &mut [f64], inverse: bool, transpose: bool) {
        match (&self.scaling, self.ty) {
            (_, ConeType::Zero) => out.iter_mut().for_each(|o| *o = 0.0),
            (Scaling::Nonneg { w }, _) => {
                for i in 0..self.dim {
                    out[i] = if inverse { v[i] / w[i] } else { v[i] * w[i] };
                }
            }
            (Scaling::Soc { eta, w }, _) => {
                let tail_dot = dot(&w[1..], &v[1..]);
                let (sgn, scale) = if inverse { (-1.0, 1.0 / eta) } else { (1.0, *eta) };
                out[0] = scale * (w[0] * v[0] + sgn * tail_dot);
                let coef = sgn * v[0] + tail_dot / (1.0 + w[0]);
                for i in 1..self.dim {
                    out[i] = scale * (v[i] + coef * w[i]);
                }
            }
            (Scaling::Psd { r, rinv }, ConeType::Psd { k }) => {
                let m = smat(k, v);
                // W: RᵀXR, Wᵀ: RXRᵀ, W⁻¹: R⁻ᵀXR⁻¹, W⁻ᵀ: R⁻¹XR⁻ᵀ
                let res = match (inverse, transpose) {
                    (false, false) => r.transpose() * m * r,
                    (false, true) => r * m * r.transpose(),
                    (true, false) => rinv.transpose() * m * rinv,
                    (true, true) => rinv * m * rinv.transpose(),
                };
                svec(&res, out);
            }
            _ => unreachable!("scaling not initialised"),
        }
    }

    /// Jordan product `u ∘ v`.
    pub fn circ(&self, u: &[f64], v: &[f64], out: &mut [f64]) {
        match self.ty {
            ConeType::Zero => out.iter_mut().for_each(|o| *o = 0.0),
            ConeType::Nonneg => {
                for i in 0..self.dim {
                    out[i] = u[i] * v[i];
                }
            }
            ConeType::Soc => {
                out[0] = dot(u, v);
                for i in 1..self.dim {
                    out[i] = u[0] * v[i] + v[0] * u[i];
                }
            }
            ConeType::Psd { k } => {
                let (mu, mv) = (smat(k, u), smat(k, v));
                let p = (&mu * &mv + &mv * &mu) * 0.5;
                svec(&p, out);
            }
        }
    }

    /// Solves `λ ∘ u = v` for `u`, where `λ` is the current scaled point.
    pub fn inv_circ(&self, lambda: &[f64], v: &[f64], out: &mut [f64]) {
        match self.ty {
            ConeType::Zero => out.iter_mut().for_each(|o| *o = 0.0),
            ConeType::Nonneg => {
                for i in 0..self.dim {
                    out[i] = v[i] / lambda[i];
                }
            }
            ConeType::Soc => {
                let rho = lambda[0] * lambda[0] - dot(&lambda[1..], &lambda[1..]);
                let u0 = (lambda[0] * v[0] - dot(&lambda[1..], &v[1..])) / rho;
                out[0] = u0;
                for i in 1..self.dim {
                    out[i] = (v[i] - u0 * lambda[i]) / lambda[0];
                }
            }
            ConeType::Psd { k } => {
                // λ is diagonal in the scaled frame
                for j in 0..k {
                    for i in 0..=j {
                        let idx = svec_index(i, j);
                        let (li, lj) = (lambda[svec_index(i, i)], lambda[svec_index(j, j)]);
                        out[idx] = 2.0 * v[idx] / (li + lj);
                    }
                }
            }
        }
    }

    /// Largest step `α <= cap` keeping `x + α·d` in the cone.
    pub fn step_length(&self, x: &[f64], d: &[f64], cap: f64) -> f64 {
        match self.ty {
            ConeType::Zero => cap,
            ConeType::Nonneg => x
                .iter()
                .zip(d)
                .filter(|(_, &di)| di < 0.0)
                .map(|(&xi, &di)| -xi / di)
                .fold(cap, f64::min),
            ConeType::Soc => soc_step(x, d, cap),
            ConeType::Psd { k } => {
                let Some(chol) = smat(k, x).cholesky() else {
                    return 0.0;
                };
                let l = chol.l();
                let Some(linv) = l.clone().try_inverse() else {
                    return 0.0;
                };
                let m = &linv * smat(k, d) * linv.transpose();
                let m = (&m + m.transpose()) * 0.5;
                let lmin = SymmetricEigen::new(m).eigenvalues.min();
                if lmin < 0.0 {
                    cap.min(-1.0 / lmin)
                } else {
                    cap
                }
            }
        }
    }
}
