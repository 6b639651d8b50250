//! Primal-dual interior point method on the homogeneous self-dual embedding.
//!
//! Mehrotra predictor-corrector with Nesterov–Todd scaling, a sparse
//! quasi-definite LDLᵀ solve of the reduced KKT system and Ruiz equilibration.

mod cones;
mod equilibrate;
mod kkt;
mod standard;

use std::time::Instant;

use cones::{Cone, ConeType};
use equilibrate::{equilibrate, Equilibration};
use kkt::{Kkt, KktSettings};
use standard::{to_standard_form, StandardForm};

use crate::backend::{Backend, BackendResult, SolveStatus};
use crate::program::{ConeKind, ConicProgram};

#[derive(Debug, Clone, PartialEq)]
pub struct IpmSettings {
    pub max_iter: usize,
    pub tol_gap_abs: f64,
    pub tol_gap_rel: f64,
    pub tol_feas: f64,
    pub tol_infeas: f64,
    /// Accepted as optimal when the solver stalls or runs out of iterations.
    pub reduced_tol_gap_abs: f64,
    pub reduced_tol_gap_rel: f64,
    pub reduced_tol_feas: f64,
    pub step_fraction: f64,
    pub equilibrate_iter: usize,
    pub static_reg: f64,
    pub dyn_reg_eps: f64,
    pub dyn_reg_delta: f64,
    pub refine_max_iter: usize,
}

impl Default for IpmSettings {
    fn default() -> Self {
        Self {
            max_iter: 200,
            tol_gap_abs: 1e-8,
            tol_gap_rel: 1e-8,
            tol_feas: 1e-8,
            tol_infeas: 1e-8,
            reduced_tol_gap_abs: 5e-5,
            reduced_tol_gap_rel: 5e-5,
            reduced_tol_feas: 1e-6,
            step_fraction: 0.99,
            equilibrate_iter: 10,
            static_reg: 1e-8,
            dyn_reg_eps: 1e-13,
            dyn_reg_delta: 2e-7,
            refine_max_iter: 10,
        }
    }
}

/// Built-in conic solver.
#[derive(Debug, Clone, Default)]
pub struct InteriorPoint {
    pub settings: IpmSettings,
    without_psd: bool,
}

impl InteriorPoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_settings(settings: IpmSettings) -> Self {
        Self {
            settings,
            without_psd: false,
        }
    }

    /// Same solver with semidefinite cones disabled.
    pub fn without_psd() -> Self {
        Self {
            settings: IpmSettings::default(),
            without_psd: true,
        }
    }
}

impl Backend for InteriorPoint {
    fn name(&self) -> &str {
        if self.without_psd {
            "reference-soc"
        } else {
            "reference"
        }
    }

    fn supports(&self, kind: ConeKind) -> bool {
        !(self.without_psd && kind == ConeKind::Psd)
    }

    fn solve_unchecked(&self, prog: &ConicProgram) -> BackendResult {
        let start = Instant::now();
        let (status, primal, iterations) = solve_program(prog, &self.settings);
        let objective_value = primal.as_deref().map_or(f64::NAN, |x| prog.evaluate_objective(x));
        BackendResult {
            status,
            primal,
            objective_value,
            solve_time: start.elapsed().as_secs_f64(),
            iterations,
        }
    }
}

fn solve_program(prog: &ConicProgram, settings: &IpmSettings) -> (SolveStatus, Option<Vec<f64>>, usize) {
    let mut sf = to_standard_form(prog);
    if sf.n == 0 {
        let r = prog.residuals(&[]);
        let status = if r.equality <= settings.tol_feas && r.cone <= settings.tol_feas {
            SolveStatus::Optimal
        } else {
            SolveStatus::Infeasible
        };
        return (status, (status == SolveStatus::Optimal).then(Vec::new), 0);
    }
    if sf.m == 0 {
        return if sf.c.iter().all(|&v| v == 0.0) {
            (SolveStatus::Optimal, Some(vec![0.0; sf.n]), 0)
        } else {
            (SolveStatus::Unbounded, None, 0)
        };
    }
    let eq = if settings.equilibrate_iter > 0 {
        equilibrate(&mut sf, settings.equilibrate_iter)
    } else {
        Equilibration::identity(sf.n, sf.m)
    };
    let mut solver = Solver::new(sf, eq, settings);
    solver.run()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Direction {
    x: Vec<f64>,
    z: Vec<f64>,
    s: Vec<f64>,
    tau: f64,
    kappa: f64,
}

impl Direction {
    fn zeros(n: usize, m: usize) -> Self {
        Self {
            x: vec![0.0; n],
            z: vec![0.0; m],
            s: vec![0.0; m],
            tau: 0.0,
            kappa: 0.0,
        }
    }
}

struct Residuals {
    rx: Vec<f64>,
    rz: Vec<f64>,
    rtau: f64,
    ax: Vec<f64>,
    atz: Vec<f64>,
    cx: f64,
    bz: f64,
}

enum Check {
    Solved,
    ReducedOnly,
    PrimalInfeasible,
    DualInfeasible,
    Continue,
}

struct Solver<'a> {
    sf: StandardForm,
    eq: Equilibration,
    settings: &'a IpmSettings,
    cones: Vec<Cone>,
    kkt: Kkt,
    nu: f64,
    x: Vec<f64>,
    s: Vec<f64>,
    z: Vec<f64>,
    tau: f64,
    kappa: f64,
    lambda: Vec<f64>,
    // unscaled data norms
    b_norm: f64,
    c_norm: f64,
}

impl<'a> Solver<'a> {
    fn new(sf: StandardForm, eq: Equilibration, settings: &'a IpmSettings) -> Self {
        let mut cones = sf.cones.clone();
        cones.iter_mut().for_each(Cone::set_identity_scaling);
        let kkt = Kkt::new(
            &sf.a,
            &cones,
            KktSettings {
                static_reg: settings.static_reg,
                dyn_reg_eps: settings.dyn_reg_eps,
                dyn_reg_delta: settings.dyn_reg_delta,
                refine_max_iter: settings.refine_max_iter,
                refine_rel_tol: 1e-13,
                refine_abs_tol: 1e-12,
            },
        );
        let nu = cones.iter().map(Cone::degree).sum::<usize>() as f64;
        let b_norm = sf.b.iter().zip(&eq.e).map(|(b, e)| (b / e).abs()).fold(0.0, f64::max);
        let c_norm =
            sf.c.iter()
                .zip(&eq.d)
                .map(|(c, d)| (c / (d * eq.cost)).abs())
                .fold(0.0, f64::max);
        let (n, m) = (sf.n, sf.m);
        Self {
            sf,
            eq,
            settings,
            cones,
            kkt,
            nu,
            x: vec![0.0; n],
            s: vec![0.0; m],
            z: vec![0.0; m],
            tau: 1.0,
            kappa: 1.0,
            lambda: vec![0.0; m],
            b_norm,
            c_norm,
        }
    }

    fn initialise(&mut self) -> bool {
        let (n, m) = (self.sf.n, self.sf.m);
        if self.kkt.update(&self.cones).is_err() {
            return false;
        }
        let mut rhs = vec![0.0; n + m];
        let mut sol = vec![0.0; n + m];
        rhs[n..].copy_from_slice(&self.sf.b);
        self.kkt.solve(&rhs, &mut sol);
        self.x.copy_from_slice(&sol[..n]);
        for i in 0..m {
            self.s[i] = -sol[n + i];
        }
        rhs.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..n {
            rhs[j] = -self.sf.c[j];
        }
        self.kkt.solve(&rhs, &mut sol);
        self.z.copy_from_slice(&sol[n..]);

        // Shift into the interior unless the point is already well inside.
        for v in [&mut self.s, &mut self.z] {
            let mut margin = f64::INFINITY;
            let mut size = 1.0f64;
            for cone in &self.cones {
                if cone.ty != ConeType::Zero {
                    margin = margin.min(cone.margin(&v[cone.range()]));
                    size = v[cone.range()].iter().fold(size, |m, x| m.max(x.abs()));
                }
            }
            if margin < 1e-3 * size {
                for cone in &self.cones {
                    cone.add_identity(&mut v[cone.range()], 1.0 + (-margin).max(0.0));
                }
            }
        }
        for cone in &self.cones {
            if cone.ty == ConeType::Zero {
                self.s[cone.range()].iter_mut().for_each(|v| *v = 0.0);
            }
        }
        self.tau = 1.0;
        self.kappa = 1.0;
        self.x.iter().chain(&self.s).chain(&self.z).all(|v| v.is_finite())
    }

    fn residuals(&self) -> Residuals {
        let (n, m) = (self.sf.n, self.sf.m);
        let mut ax = vec![0.0; m];
        let mut atz = vec![0.0; n];
        self.sf.a.mul_vec(&self.x, &mut ax);
        self.sf.a.tr_mul_vec(&self.z, &mut atz);
        let rx: Vec<f64> = (0..n).map(|j| atz[j] + self.sf.c[j] * self.tau).collect();
        let rz: Vec<f64> = (0..m).map(|i| ax[i] + self.s[i] - self.sf.b[i] * self.tau).collect();
        let cx = dot(&self.sf.c, &self.x);
        let bz = dot(&self.sf.b, &self.z);
        Residuals {
            rx,
            rz,
            rtau: self.kappa + cx + bz,
            ax,
            atz,
            cx,
            bz,
        }
    }

    fn check(&self, r: &Residuals) -> Check {
        let (eq, tau, set) = (&self.eq, self.tau, self.settings);
        let scaled_norm = |v: &[f64], f: &dyn Fn(usize) -> f64| {
            v.iter().enumerate().map(|(i, x)| (x * f(i)).abs()).fold(0.0, f64::max)
        };
        let inv_e = |i: usize| 1.0 / eq.e[i];
        let inv_cd = |j: usize| 1.0 / (eq.d[j] * eq.cost);

        let pres = scaled_norm(&r.rz, &inv_e) / tau;
        let dres = scaled_norm(&r.rx, &inv_cd) / tau;
        let ax_norm = scaled_norm(&r.ax, &inv_e) / tau;
        let s_norm = scaled_norm(&self.s, &inv_e) / tau;
        let atz_norm = scaled_norm(&r.atz, &inv_cd) / tau;
        let pres_rel = pres / 1f64.max(self.b_norm).max(ax_norm).max(s_norm);
        let dres_rel = dres / 1f64.max(self.c_norm).max(atz_norm);
        let pcost = r.cx / (eq.cost * tau);
        let dcost = -r.bz / (eq.cost * tau);
        let gap = (pcost - dcost).abs();
        let gap_rel = gap / 1f64.max(pcost.abs().min(dcost.abs()));

        let ok = |feas: f64, gap_abs: f64, gap_rel_tol: f64| {
            pres_rel <= feas && dres_rel <= feas && (gap <= gap_abs || gap_rel <= gap_rel_tol)
        };
        if ok(set.tol_feas, set.tol_gap_abs, set.tol_gap_rel) {
            return Check::Solved;
        }
        if self.tau < self.kappa {
            if r.bz < 0.0 {
                let atz_unscaled = scaled_norm(&r.atz, &|j| 1.0 / eq.d[j]);
                if atz_unscaled <= set.tol_infeas * -r.bz {
                    return Check::PrimalInfeasible;
                }
            }
            if r.cx < 0.0 {
                let mut v = 0.0f64;
                for i in 0..self.sf.m {
                    v = v.max(((r.ax[i] + self.s[i]) / eq.e[i]).abs());
                }
                if v <= set.tol_infeas * (-r.cx / eq.cost) {
                    return Check::DualInfeasible;
                }
            }
        }
        if ok(set.reduced_tol_feas, set.reduced_tol_gap_abs, set.reduced_tol_gap_rel) {
            return Check::ReducedOnly;
        }
        Check::Continue
    }

    fn unscaled_primal(&self) -> Vec<f64> {
        self.x.iter().zip(&self.eq.d).map(|(x, d)| x * d / self.tau).collect()
    }

    fn finish(&self, status: SolveStatus, iters: usize) -> (SolveStatus, Option<Vec<f64>>, usize) {
        let primal = (status == SolveStatus::Optimal).then(|| self.unscaled_primal());
        (status, primal, iters)
    }

    fn run(&mut self) -> (SolveStatus, Option<Vec<f64>>, usize) {
        if !self.initialise() {
            return (SolveStatus::NumericalFailure, None, 0);
        }
        let (n, m) = (self.sf.n, self.sf.m);
        let mut sol1 = vec![0.0; n + m];
        let mut rhs = vec![0.0; n + m];
        let mut aff = Direction::zeros(n, m);
        let mut comb = Direction::zeros(n, m);

        // Most recent iterate meeting the reduced tolerances, returned if the solver stalls later.
        let mut reduced: Option<Vec<f64>> = None;
        let fallback = |reduced: Option<Vec<f64>>, otherwise: SolveStatus, iter: usize| match reduced {
            Some(x) => (SolveStatus::Optimal, Some(x), iter),
            None => (otherwise, None, iter),
        };

        for iter in 0..=self.settings.max_iter {
            let r = self.residuals();
            match self.check(&r) {
                Check::Solved => return self.finish(SolveStatus::Optimal, iter),
                Check::PrimalInfeasible => return self.finish(SolveStatus::Infeasible, iter),
                Check::DualInfeasible => return self.finish(SolveStatus::Unbounded, iter),
                Check::ReducedOnly => reduced = Some(self.unscaled_primal()),
                Check::Continue => {}
            }
            if iter == self.settings.max_iter {
                return fallback(reduced, SolveStatus::IterationLimit, iter);
            }

            let mut scaled_ok = true;
            for cone in self.cones.iter_mut() {
                let rg = cone.range();
                scaled_ok &= cone.update_scaling(&self.s[rg.clone()], &self.z[rg.clone()], &mut self.lambda[rg]);
            }
            if !scaled_ok || self.kkt.update(&self.cones).is_err() {
                return fallback(reduced, SolveStatus::NumericalFailure, iter);
            }

            for j in 0..n {
                rhs[j] = -self.sf.c[j];
            }
            rhs[n..].copy_from_slice(&self.sf.b);
            self.kkt.solve(&rhs, &mut sol1);

            let mu = (self.complementarity() + self.tau * self.kappa) / (self.nu + 1.0);

            // predictor
            let mut ds_target = vec![0.0; m];
            for cone in &self.cones {
                let rg = cone.range();
                cone.circ(&self.lambda[rg.clone()], &self.lambda[rg.clone()], &mut ds_target[rg]);
            }
            let dk_target = self.tau * self.kappa;
            self.direction(&r, &sol1, &ds_target, dk_target, 1.0, &mut rhs, &mut aff);
            let alpha_aff = self.step_length(&aff, 1.0);
            let sigma = (1.0 - alpha_aff).powi(3);

            // corrector
            let mut t1 = vec![0.0; m];
            let mut t2 = vec![0.0; m];
            let mut corr = vec![0.0; m];
            for cone in &self.cones {
                let rg = cone.range();
                cone.mul_wtinv(&aff.s[rg.clone()], &mut t1[rg.clone()]);
                cone.mul_w(&aff.z[rg.clone()], &mut t2[rg.clone()]);
                cone.circ(&t1[rg.clone()], &t2[rg.clone()], &mut corr[rg.clone()]);
                for i in rg.clone() {
                    ds_target[i] += corr[i];
                }
                cone.add_identity(&mut ds_target[rg], -sigma * mu);
            }
            let dk_target = self.tau * self.kappa + aff.tau * aff.kappa - sigma * mu;
            self.direction(&r, &sol1, &ds_target, dk_target, 1.0 - sigma, &mut rhs, &mut comb);
            let alpha = (self.settings.step_fraction * self.step_length(&comb, 1e6)).min(1.0);
            if !(alpha > 1e-10) {
                return fallback(reduced, SolveStatus::NumericalFailure, iter);
            }

            for j in 0..n {
                self.x[j] += alpha * comb.x[j];
            }
            for i in 0..m {
                self.s[i] += alpha * comb.s[i];
                self.z[i] += alpha * comb.z[i];
            }
            self.tau += alpha * comb.tau;
            self.kappa += alpha * comb.kappa;

            // keep the embedding away from overflow on diverging instances
            let scale = self.tau.max(self.kappa);
            if scale > 1e10 {
                let f = 1.0 / scale;
                self.x.iter_mut().for_each(|v| *v *= f);
                self.s.iter_mut().for_each(|v| *v *= f);
                self.z.iter_mut().for_each(|v| *v *= f);
                self.tau *= f;
                self.kappa *= f;
            }
        }
        unreachable!("loop returns on the last iteration")
    }

    fn complementarity(&self) -> f64 {
        self.cones
            .iter()
            .filter(|c| c.ty != ConeType::Zero)
            .map(|c| dot(&self.s[c.range()], &self.z[c.range()]))
            .sum()
    }

    #[allow(clippy::too_many_arguments)]
    fn direction(
        &mut self,
        r: &Residuals,
        sol1: &[f64],
        ds_target: &[f64],
        dk_target: f64,
        res_scale: f64,
        rhs: &mut [f64],
        out: &mut Direction,
    ) {
        let (n, m) = (self.sf.n, self.sf.m);
        let mut tmp = vec![0.0; m];
        let mut wt = vec![0.0; m];
        for cone in &self.cones {
            let rg = cone.range();
            cone.inv_circ(&self.lambda[rg.clone()], &ds_target[rg.clone()], &mut tmp[rg.clone()]);
            cone.mul_wt(&tmp[rg.clone()], &mut wt[rg]);
        }
        for j in 0..n {
            rhs[j] = -res_scale * r.rx[j];
        }
        for i in 0..m {
            rhs[n + i] = -res_scale * r.rz[i] + wt[i];
        }
        let mut sol2 = vec![0.0; n + m];
        self.kkt.solve(rhs, &mut sol2);

        let (c, b) = (&self.sf.c, &self.sf.b);
        let num = -res_scale * r.rtau + dk_target / self.tau - dot(c, &sol2[..n]) - dot(b, &sol2[n..]);
        let den = dot(c, &sol1[..n]) + dot(b, &sol1[n..]) - self.kappa / self.tau;
        let dtau = num / den;
        for j in 0..n {
            out.x[j] = sol2[j] + dtau * sol1[j];
        }
        for i in 0..m {
            out.z[i] = sol2[n + i] + dtau * sol1[n + i];
        }
        // Δs = -Wᵀ(λ \ d_s + W Δz)
        let mut wdz = vec![0.0; m];
        for cone in &self.cones {
            let rg = cone.range();
            cone.mul_w(&out.z[rg.clone()], &mut wdz[rg.clone()]);
            for i in rg.clone() {
                wdz[i] += tmp[i];
            }
            cone.mul_wt(&wdz[rg.clone()], &mut out.s[rg.clone()]);
            out.s[rg].iter_mut().for_each(|v| *v = -*v);
        }
        out.tau = dtau;
        out.kappa = -(dk_target + self.kappa * dtau) / self.tau;
    }

    fn step_length(&self, d: &Direction, cap: f64) -> f64 {
        let mut alpha = cap;
        if d.tau < 0.0 {
            alpha = alpha.min(-self.tau / d.tau);
        }
        if d.kappa < 0.0 {
            alpha = alpha.min(-self.kappa / d.kappa);
        }
        for cone in &self.cones {
            if cone.ty == ConeType::Zero {
                continue;
            }
            let rg = cone.range();
            alpha = cone.step_length(&self.s[rg.clone()], &d.s[rg.clone()], alpha);
            alpha = cone.step_length(&self.z[rg.clone()], &d.z[rg], alpha);
        }
        alpha.max(0.0)
    }
}
