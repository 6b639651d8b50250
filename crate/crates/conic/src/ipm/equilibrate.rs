//! Ruiz equilibration of `A`, with uniform row scaling inside non-separable cones.

use super::cones::{Cone, ConeType};
use super::standard::StandardForm;

const MIN_SCALING: f64 = 1e-4;
const MAX_SCALING: f64 = 1e4;

/// `Ã = E A D`, `b̃ = E b`, `c̃ = σ D c`.
#[derive(Debug, Clone)]
pub(crate) struct Equilibration {
    pub d: Vec<f64>,
    pub e: Vec<f64>,
    pub cost: f64,
}

impl Equilibration {
    pub fn identity(n: usize, m: usize) -> Self {
        Self {
            d: vec![1.0; n],
            e: vec![1.0; m],
            cost: 1.0,
        }
    }
}

fn clamp(v: f64) -> f64 {
    if v == 0.0 {
        1.0
    } else {
        v.clamp(MIN_SCALING, MAX_SCALING)
    }
}

fn rectify(cones: &[Cone], e: &mut [f64]) {
    for cone in cones {
        if matches!(cone.ty, ConeType::Soc | ConeType::Psd { .. }) {
            let r = cone.range();
            let mean = e[r.clone()].iter().sum::<f64>() / r.len() as f64;
            e[r].iter_mut().for_each(|v| *v = mean);
        }
    }
}

/// Scales `sf` in place and returns the applied scaling.
pub(crate) fn equilibrate(sf: &mut StandardForm, iterations: usize) -> Equilibration {
    let (n, m) = (sf.n, sf.m);
    let mut eq = Equilibration::identity(n, m);
    let mut col = vec![0.0; n];
    let mut row = vec![0.0; m];
    for _ in 0..iterations {
        sf.a.col_abs_max(&mut col);
        sf.a.row_abs_max(&mut row);
        let delta: Vec<f64> = col.iter().map(|&v| 1.0 / clamp(v).sqrt()).collect();
        let mut eps: Vec<f64> = row.iter().map(|&v| 1.0 / clamp(v).sqrt()).collect();
        rectify(&sf.cones, &mut eps);
        sf.a.scale(&eps, &delta);
        for j in 0..n {
            eq.d[j] *= delta[j];
        }
        for i in 0..m {
            eq.e[i] *= eps[i];
        }
    }
    for j in 0..n {
        sf.c[j] *= eq.d[j];
    }
    for i in 0..m {
        sf.b[i] *= eq.e[i];
    }
    let cmax = sf.c.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    eq.cost = 1.0 / clamp(cmax);
    sf.c.iter_mut().for_each(|v| *v *= eq.cost);
    eq
}
