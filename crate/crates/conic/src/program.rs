use std::fmt::{self, Write as _};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::expr::{AffineExpr, Var};
use crate::ConicError;

/// Cone families understood by the modelling layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ConeKind {
    /// Every expression is `>= 0`.
    Nonnegative,
    /// `(t, w...)` with `t >= ‖w‖₂`.
    SecondOrder,
    /// `(u, v, w...)` with `2uv >= ‖w‖²` and `u, v >= 0`.
    RotatedSecondOrder,
    /// Upper triangle of a symmetric `k×k` matrix, column by column
    /// (`(0,0), (0,1), (1,1), (0,2), ...`), constrained positive semidefinite.
    Psd,
}

impl ConeKind {
    pub fn name(self) -> &'static str {
        match self {
            ConeKind::Nonnegative => "nonnegative",
            ConeKind::SecondOrder => "second_order",
            ConeKind::RotatedSecondOrder => "rotated_second_order",
            ConeKind::Psd => "psd",
        }
    }
}

impl fmt::Display for ConeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConeMembership {
    pub kind: ConeKind,
    pub exprs: Vec<AffineExpr>,
}

/// Side length `k` of a PSD block given `k(k+1)/2` triangle entries.
pub fn psd_side(len: usize) -> Option<usize> {
    let k = ((((8 * len + 1) as f64).sqrt() - 1.0) / 2.0).round() as usize;
    (k * (k + 1) / 2 == len && k > 0).then_some(k)
}

/// Maximum violations of a candidate point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Residuals {
    pub equality: f64,
    pub cone: f64,
}

/// Linear objective, linear equalities and cone memberships over `z`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConicProgram {
    num_vars: usize,
    objective: AffineExpr,
    equalities: Vec<AffineExpr>,
    cones: Vec<ConeMembership>,
}

impl ConicProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn objective(&self) -> &AffineExpr {
        &self.objective
    }

    pub fn equalities(&self) -> &[AffineExpr] {
        &self.equalities
    }

    pub fn cones(&self) -> &[ConeMembership] {
        &self.cones
    }

    pub fn add_var(&mut self) -> Var {
        self.num_vars += 1;
        Var(self.num_vars - 1)
    }

    pub fn add_vars(&mut self, count: usize) -> Vec<Var> {
        (0..count).map(|_| self.add_var()).collect()
    }

    /// Adds `coef·z[v]` to the minimised objective.
    pub fn add_objective_term(&mut self, v: Var, coef: f64) {
        self.objective.push_term(v, coef);
    }

    pub fn add_objective_expr(&mut self, expr: AffineExpr) {
        self.objective = std::mem::take(&mut self.objective) + expr;
    }

    /// Constrains `expr == 0`.
    pub fn add_equality(&mut self, expr: AffineExpr) {
        self.equalities.push(expr);
    }

    /// Constrains `expr >= 0`.
    pub fn add_nonnegative(&mut self, expr: AffineExpr) {
        self.cones.push(ConeMembership {
            kind: ConeKind::Nonnegative,
            exprs: vec![expr],
        });
    }

    pub fn add_cone(&mut self, kind: ConeKind, exprs: Vec<AffineExpr>) -> Result<(), ConicError> {
        check_arity(kind, exprs.len()).map_err(|reason| ConicError::InvalidCone {
            index: self.cones.len(),
            reason,
        })?;
        self.cones.push(ConeMembership { kind, exprs });
        Ok(())
    }

    /// Introduces `s` with `s >= |expr|`.
    pub fn add_abs_epigraph(&mut self, expr: AffineExpr) -> Var {
        let s = self.add_var();
        self.add_nonnegative(AffineExpr::var(s) - expr.clone());
        self.add_nonnegative(AffineExpr::var(s) + expr);
        s
    }

    /// Introduces `t` with `t >= ‖exprs‖₂`.
    pub fn add_norm2_epigraph(&mut self, exprs: Vec<AffineExpr>) -> Var {
        assert!(!exprs.is_empty(), "norm epigraph of an empty vector");
        let t = self.add_var();
        let mut cone = Vec::with_capacity(exprs.len() + 1);
        cone.push(AffineExpr::var(t));
        cone.extend(exprs);
        self.cones.push(ConeMembership {
            kind: ConeKind::SecondOrder,
            exprs: cone,
        });
        t
    }

    /// Enforces `‖vec‖² <= lin` as the rotated cone `2·(lin/2)·1 >= ‖vec‖²`.
    pub fn add_quadratic_upper_bound(&mut self, lin: AffineExpr, vec: Vec<AffineExpr>) {
        let mut exprs = Vec::with_capacity(vec.len() + 2);
        exprs.push(lin * 0.5);
        exprs.push(AffineExpr::constant(1.0));
        exprs.extend(vec);
        self.cones.push(ConeMembership {
            kind: ConeKind::RotatedSecondOrder,
            exprs,
        });
    }

    pub fn uses(&self, kind: ConeKind) -> bool {
        self.cones.iter().any(|c| c.kind == kind)
    }

    /// Checks variable indices, finiteness and cone arities.
    pub fn validate(&self) -> Result<(), ConicError> {
        let check = |e: &AffineExpr| -> Result<(), ConicError> {
            if !e.constant.is_finite() || e.terms.iter().any(|&(_, c)| !c.is_finite()) {
                return Err(ConicError::NonFinite);
            }
            match e.max_var() {
                Some(v) if v.0 >= self.num_vars => Err(ConicError::VarOutOfRange {
                    var: v.0,
                    num_vars: self.num_vars,
                }),
                _ => Ok(()),
            }
        };
        check(&self.objective)?;
        self.equalities.iter().try_for_each(check)?;
        for (index, cone) in self.cones.iter().enumerate() {
            check_arity(cone.kind, cone.exprs.len()).map_err(|reason| ConicError::InvalidCone { index, reason })?;
            cone.exprs.iter().try_for_each(check)?;
        }
        Ok(())
    }

    pub fn evaluate_objective(&self, z: &[f64]) -> f64 {
        self.objective.eval(z)
    }

    /// Max-norm violation of the equalities and of the cone memberships at `z`.
    pub fn residuals(&self, z: &[f64]) -> Residuals {
        assert_eq!(z.len(), self.num_vars, "primal vector length mismatch");
        let equality = self.equalities.iter().map(|e| e.eval(z).abs()).fold(0.0, f64::max);
        let cone = self
            .cones
            .iter()
            .map(|c| {
                let v: Vec<f64> = c.exprs.iter().map(|e| e.eval(z)).collect();
                cone_violation(c.kind, &v)
            })
            .fold(0.0, f64::max);
        Residuals { equality, cone }
    }

    /// Line-oriented text dump with stable ordering, for diffing programs.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "vars {}", self.num_vars);
        let _ = writeln!(out, "objective {}", fmt_expr(&self.objective));
        for (i, e) in self.equalities.iter().enumerate() {
            let _ = writeln!(out, "eq {i} {}", fmt_expr(e));
        }
        for (i, c) in self.cones.iter().enumerate() {
            for (k, e) in c.exprs.iter().enumerate() {
                let _ = writeln!(out, "cone {i} {} {k} {}", c.kind, fmt_expr(e));
            }
        }
        out
    }
}

fn fmt_expr(e: &AffineExpr) -> String {
    let mut e = e.clone();
    e.compact();
    let mut s = format!("{}", e.constant);
    for (v, c) in e.terms {
        let _ = write!(s, " {}:{}", v.0, c);
    }
    s
}

fn check_arity(kind: ConeKind, len: usize) -> Result<(), String> {
    match kind {
        ConeKind::Nonnegative if len == 0 => Err("nonnegative cone needs at least one expression".into()),
        ConeKind::SecondOrder if len < 2 => Err("second-order cone needs (t, w...) with at least 2 entries".into()),
        ConeKind::RotatedSecondOrder if len < 3 => {
            Err("rotated second-order cone needs (u, v, w...) with at least 3 entries".into())
        }
        ConeKind::Psd if psd_side(len).is_none() => Err(format!("{len} is not a triangular number")),
        _ => Ok(()),
    }
}

/// Distance-like violation of `v` with respect to the cone `kind`.
pub fn cone_violation(kind: ConeKind, v: &[f64]) -> f64 {
    match kind {
        ConeKind::Nonnegative => v.iter().map(|&x| (-x).max(0.0)).fold(0.0, f64::max),
        ConeKind::SecondOrder => (norm(&v[1..]) - v[0]).max(0.0),
        ConeKind::RotatedSecondOrder => {
            let (u, w) = (v[0], v[1]);
            let head = (u + w) / std::f64::consts::SQRT_2;
            let mut tail = Vec::with_capacity(v.len() - 1);
            tail.push((u - w) / std::f64::consts::SQRT_2);
            tail.extend_from_slice(&v[2..]);
            (norm(&tail) - head).max(0.0)
        }
        ConeKind::Psd => {
            let k = psd_side(v.len()).expect("validated psd arity");
            let m = triangle_to_matrix(k, v);
            let eig = SymmetricEigen::new(m);
            (-eig.eigenvalues.min()).max(0.0)
        }
    }
}

/// Symmetric matrix from its upper triangle listed column by column.
pub fn triangle_to_matrix(k: usize, v: &[f64]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(k, k);
    let mut idx = 0;
    for j in 0..k {
        for i in 0..=j {
            m[(i, j)] = v[idx];
            m[(j, i)] = v[idx];
            idx += 1;
        }
    }
    m
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
