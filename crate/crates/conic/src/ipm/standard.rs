//! Conversion of a [`ConicProgram`] to `min cᵀx  s.t.  A x + s = b, s ∈ K`.

use std::f64::consts::FRAC_1_SQRT_2;

use super::cones::{Cone, ConeType};
use crate::expr::AffineExpr;
use crate::linalg::CscMatrix;
use crate::program::{psd_side, ConeKind, ConicProgram};

#[derive(Debug, Clone)]
pub(crate) struct StandardForm {
    pub n: usize,
    pub m: usize,
    pub a: CscMatrix,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub cones: Vec<Cone>,
}

struct RowBuilder {
    triplets: Vec<(usize, usize, f64)>,
    b: Vec<f64>,
}

impl RowBuilder {
    /// Appends the row `s = expr(x)`, i.e. `A_row = -coefs`, `b_row = constant`.
    fn push(&mut self, expr: &AffineExpr) {
        let row = self.b.len();
        let mut e = expr.clone();
        e.compact();
        for (v, c) in e.terms {
            self.triplets.push((row, v.0, -c));
        }
        self.b.push(e.constant);
    }

    fn len(&self) -> usize {
        self.b.len()
    }
}

pub(crate) fn to_standard_form(prog: &ConicProgram) -> StandardForm {
    let n = prog.num_vars();
    let mut c = vec![0.0; n];
    for &(v, coef) in &prog.objective().terms {
        c[v.0] += coef;
    }

    let mut rows = RowBuilder {
        triplets: Vec::new(),
        b: Vec::new(),
    };
    let mut cones = Vec::new();

    if !prog.equalities().is_empty() {
        for e in prog.equalities() {
            rows.push(e);
        }
        cones.push(Cone::with_dim(ConeType::Zero, 0, rows.len()));
    }

    let start = rows.len();
    for cm in prog.cones().iter().filter(|c| c.kind == ConeKind::Nonnegative) {
        for e in &cm.exprs {
            rows.push(e);
        }
    }
    if rows.len() > start {
        cones.push(Cone::with_dim(ConeType::Nonneg, start, rows.len() - start));
    }

    for cm in prog.cones() {
        let start = rows.len();
        match cm.kind {
            ConeKind::Nonnegative => continue,
            ConeKind::SecondOrder => {
                for e in &cm.exprs {
                    rows.push(e);
                }
                cones.push(Cone::with_dim(ConeType::Soc, start, cm.exprs.len()));
            }
            ConeKind::RotatedSecondOrder => {
                let (u, v) = (&cm.exprs[0], &cm.exprs[1]);
                rows.push(&((u.clone() + v.clone()) * FRAC_1_SQRT_2));
                rows.push(&((u.clone() - v.clone()) * FRAC_1_SQRT_2));
                for e in &cm.exprs[2..] {
                    rows.push(e);
                }
                cones.push(Cone::with_dim(ConeType::Soc, start, cm.exprs.len()));
            }
            ConeKind::Psd => {}
        }
    }

    for cm in prog.cones().iter().filter(|c| c.kind == ConeKind::Psd) {
        let start = rows.len();
        let k = psd_side(cm.exprs.len()).expect("validated psd arity");
        let mut idx = 0;
        for j in 0..k {
            for i in 0..=j {
                let e = &cm.exprs[idx];
                if i == j {
                    rows.push(e);
                } else {
                    rows.push(&(e.clone() * std::f64::consts::SQRT_2));
                }
                idx += 1;
            }
        }
        cones.push(Cone::new(ConeType::Psd { k }, start));
    }

    let m = rows.len();
    StandardForm {
        n,
        m,
        a: CscMatrix::from_triplets(m, n, &rows.triplets),
        b: rows.b,
        c,
        cones,
    }
}
