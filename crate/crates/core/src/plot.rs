//! Deterministic SVG rendering of scenarios and trajectories.

use std::fmt::Write;

use crate::model::{ProblemInstance, Solution};
use crate::CoreError;

pub const PANEL: f64 = 800.0;
pub const MARGIN: f64 = 40.0;

/// Axis pairs drawn for each dimension.
fn projections(n: usize) -> Result<Vec<(usize, usize)>, CoreError> {
    match n {
        1 => Ok(vec![(0, usize::MAX)]),
        2 => Ok(vec![(0, 1)]),
        3 => Ok(vec![(0, 1), (0, 2), (1, 2)]),
        _ => Err(CoreError::Dimension(format!("cannot plot dimension {n}"))),
    }
}

/// Affine map from world coordinates of one projection to panel pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Viewport {
    pub min: (f64, f64),
    pub scale: f64,
    pub offset_x: f64,
}

impl Viewport {
    pub fn map(&self, x: f64, y: f64) -> (f64, f64) {
        (
            self.offset_x + MARGIN + (x - self.min.0) * self.scale,
            PANEL - MARGIN - (y - self.min.1) * self.scale,
        )
    }
}

fn coord(p: &[f64], axis: usize) -> f64 {
    p.get(axis).copied().unwrap_or(0.0)
}

/// Unit arena grown to contain every drawn position and radius.
pub fn viewport(inst: &ProblemInstance, sol: Option<&Solution>, axes: (usize, usize), panel: usize) -> Viewport {
    let (mut lo, mut hi) = ((0.0f64, 0.0f64), (1.0f64, 1.0f64));
    let mut grow = |p: &[f64], r: f64| {
        let (x, y) = (coord(p, axes.0), coord(p, axes.1));
        lo = (lo.0.min(x - r), lo.1.min(y - r));
        hi = (hi.0.max(x + r), hi.1.max(y + r));
    };
    for r in &inst.robots {
        grow(inst.position(&r.x_init), r.radius);
        grow(inst.position(&r.x_goal), r.radius);
        if let Some(traj) = sol.and_then(|s| s.states.get(&r.id)) {
            for x in traj {
                grow(inst.position(x), 0.0);
            }
        }
    }
    for o in &inst.obstacles {
        for x in &o.states {
            grow(inst.position(x), o.radius);
        }
    }
    let span = (hi.0 - lo.0).max(hi.1 - lo.1);
    Viewport {
        min: lo,
        scale: (PANEL - 2.0 * MARGIN) / span,
        offset_x: panel as f64 * PANEL,
    }
}

pub fn render_svg(inst: &ProblemInstance, sol: Option<&Solution>) -> Result<String, CoreError> {
    let panels = projections(inst.n)?;
    let width = PANEL * panels.len() as f64;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{PANEL}" viewBox="0 0 {width} {PANEL}">"#
    );
    let _ = writeln!(
        s,
        r#"<rect x="0" y="0" width="{width}" height="{PANEL}" fill="white"/>"#
    );
    for (k, &axes) in panels.iter().enumerate() {
        let vp = viewport(inst, sol, axes, k);
        let pt = |p: &[f64]| vp.map(coord(p, axes.0), coord(p, axes.1));
        let (x0, y0) = vp.map(0.0, 1.0);
        let (x1, y1) = vp.map(1.0, 0.0);
        let _ = writeln!(
            s,
            r#"<rect class="arena" x="{x0:.3}" y="{y0:.3}" width="{:.3}" height="{:.3}" fill="none" stroke="black" stroke-width="2"/>"#,
            x1 - x0,
            y1 - y0
        );
        for o in &inst.obstacles {
            let (cx, cy) = pt(inst.position(&o.states[0]));
            let _ = writeln!(
                s,
                r#"<circle class="obstacle" cx="{cx:.3}" cy="{cy:.3}" r="{:.3}" fill="red"/>"#,
                o.radius * vp.scale
            );
        }
        for r in &inst.robots {
            if let Some(traj) = sol.and_then(|sol| sol.states.get(&r.id)) {
                let pts: Vec<String> = traj
                    .iter()
                    .map(|x| {
                        let (px, py) = pt(inst.position(x));
                        format!("{px:.3},{py:.3}")
                    })
                    .collect();
                let _ = writeln!(
                    s,
                    r#"<polyline class="trajectory" data-robot="{}" points="{}" fill="none" stroke="black" stroke-width="1.5"/>"#,
                    r.id,
                    pts.join(" ")
                );
            }
            let rad = r.radius * vp.scale;
            let (cx, cy) = pt(inst.position(&r.x_init));
            let _ = writeln!(
                s,
                r#"<circle class="start" data-robot="{}" cx="{cx:.3}" cy="{cy:.3}" r="{rad:.3}" fill="blue" fill-opacity="0.6"/>"#,
                r.id
            );
            let (cx, cy) = pt(inst.position(&r.x_goal));
            let _ = writeln!(
                s,
                r#"<circle class="goal" data-robot="{}" cx="{cx:.3}" cy="{cy:.3}" r="{rad:.3}" fill="green" fill-opacity="0.6"/>"#,
                r.id
            );
        }
    }
    s.push_str("</svg>\n");
    Ok(s)
}
