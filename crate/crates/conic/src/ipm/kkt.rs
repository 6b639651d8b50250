//! Quasi-definite KKT system `[[0, Aᵀ], [A, -WᵀW]]` with a fixed pattern.

use super::cones::Cone;
use crate::linalg::{approximate_minimum_degree, CscMatrix, LdlFactor, LdlSymbolic};

pub(crate) struct KktSettings {
    pub static_reg: f64,
    pub dyn_reg_eps: f64,
    pub dyn_reg_delta: f64,
    pub refine_max_iter: usize,
    pub refine_rel_tol: f64,
    pub refine_abs_tol: f64,
}

pub(crate) struct Kkt {
    dim: usize,
    rows: Vec<usize>,
    cols: Vec<usize>,
    /// Current unregularised values, one per triplet.
    vals: Vec<f64>,
    reg: Vec<f64>,
    /// First triplet of each cone's Hessian block.
    cone_start: Vec<usize>,
    perm: Vec<usize>,
    iperm: Vec<usize>,
    upper: CscMatrix,
    slot: Vec<usize>,
    signs: Vec<f64>,
    factor: LdlFactor,
    settings: KktSettings,
    work: Vec<f64>,
    resid: Vec<f64>,
}

impl Kkt {
    pub fn new(a: &CscMatrix, cones: &[Cone], settings: KktSettings) -> Self {
        let (n, m) = (a.ncols, a.nrows);
        let dim = n + m;
        let mut rows = Vec::new();
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let mut reg = Vec::new();
        for j in 0..n {
            rows.push(j);
            cols.push(j);
            vals.push(0.0);
            reg.push(settings.static_reg);
        }
        for j in 0..n {
            for (i, v) in a.col(j) {
                rows.push(j);
                cols.push(n + i);
                vals.push(v);
                reg.push(0.0);
            }
        }
        let mut cone_start = Vec::with_capacity(cones.len());
        for cone in cones {
            cone_start.push(rows.len());
            for (p, q) in cone.hessian_pattern() {
                rows.push(n + cone.offset + p);
                cols.push(n + cone.offset + q);
                vals.push(0.0);
                reg.push(if p == q { -settings.static_reg } else { 0.0 });
            }
        }

        let mut adj = vec![Vec::new(); dim];
        for (&r, &c) in rows.iter().zip(&cols) {
            if r != c {
                adj[r].push(c);
                adj[c].push(r);
            }
        }
        let perm = approximate_minimum_degree(&adj);
        let mut iperm = vec![0; dim];
        for (new, &old) in perm.iter().enumerate() {
            iperm[old] = new;
        }
        let triplets: Vec<(usize, usize, f64)> = rows
            .iter()
            .zip(&cols)
            .map(|(&r, &c)| {
                let (pr, pc) = (iperm[r], iperm[c]);
                (pr.min(pc), pr.max(pc), 0.0)
            })
            .collect();
        let upper = CscMatrix::from_triplets(dim, dim, &triplets);
        let slot = triplets
            .iter()
            .map(|&(r, c, _)| {
                let range = upper.colptr[c]..upper.colptr[c + 1];
                range.start + upper.rowval[range].binary_search(&r).expect("pattern entry")
            })
            .collect();
        let signs = perm.iter().map(|&o| if o < n { 1.0 } else { -1.0 }).collect();
        let factor = LdlFactor::new(LdlSymbolic::analyse(&upper));
        Self {
            dim,
            rows,
            cols,
            vals,
            reg,
            cone_start,
            perm,
            iperm,
            upper,
            slot,
            signs,
            factor,
            settings,
            work: vec![0.0; dim],
            resid: vec![0.0; dim],
        }
    }

    /// Loads `-WᵀW` for every cone and refactors.
    pub fn update(&mut self, cones: &[Cone]) -> Result<(), usize> {
        let mut buf = Vec::new();
        for (cone, &start) in cones.iter().zip(&self.cone_start) {
            buf.clear();
            cone.hessian_values(&mut buf);
            for (k, v) in buf.iter().enumerate() {
                self.vals[start + k] = -v;
            }
        }
        self.upper.nzval.iter_mut().for_each(|v| *v = 0.0);
        for t in 0..self.vals.len() {
            self.upper.nzval[self.slot[t]] += self.vals[t] + self.reg[t];
        }
        self.factor.factor(
            &self.upper,
            &self.signs,
            self.settings.dyn_reg_eps,
            self.settings.dyn_reg_delta,
        )
    }

    fn solve_regularised(&mut self, rhs: &[f64], out: &mut [f64]) {
        for k in 0..self.dim {
            self.work[k] = rhs[self.perm[k]];
        }
        self.factor.solve(&mut self.work);
        for i in 0..self.dim {
            out[i] = self.work[self.iperm[i]];
        }
    }

    /// `y = K x` with the unregularised matrix.
    fn mul(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for t in 0..self.vals.len() {
            let (r, c, v) = (self.rows[t], self.cols[t], self.vals[t]);
            y[r] += v * x[c];
            if r != c {
                y[c] += v * x[r];
            }
        }
    }

    /// Solves `K sol = rhs` with iterative refinement against the unregularised `K`.
    pub fn solve(&mut self, rhs: &[f64], sol: &mut [f64]) {
        self.solve_regularised(rhs, sol);
        let rhs_norm = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tol = self.settings.refine_abs_tol + self.settings.refine_rel_tol * rhs_norm;
        let mut resid = std::mem::take(&mut self.resid);
        let mut corr = vec![0.0; self.dim];
        let mut prev = f64::INFINITY;
        for _ in 0..self.settings.refine_max_iter {
            self.mul(sol, &mut resid);
            let mut norm = 0.0f64;
            for i in 0..self.dim {
                resid[i] = rhs[i] - resid[i];
                norm = norm.max(resid[i].abs());
            }
            if norm <= tol || norm >= prev {
                break;
            }
            prev = norm;
            self.solve_regularised(&resid, &mut corr);
            for i in 0..self.dim {
                sol[i] += corr[i];
            }
        }
        self.resid = resid;
    }
}
