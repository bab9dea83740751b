//! Second-order extension by the generalized Riemann problem.
//!
//! Each cell carries a linear profile with slopes in `λ` and `φ`. Edge side
//! values come from that profile at the edge midpoint; the Riemann solution
//! `u*` is then advanced half a step with the instantaneous time derivative
//! `−s · ∂g/∂u(u*)`, where `s` is the upwind slope normal to the edge. A
//! sonic interface has zero time derivative.

use crate::flux::FluxModel;
use crate::geometry::{lambda_difference, SpherePoint};
use crate::godunov::{Scheme, State, StepError};
use crate::grid::{CellId, Edge, EdgeKind, Grid};
use crate::riemann::{solve_riemann, Flux1d, RiemannError, WaveCategory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Limiter {
    #[default]
    Minmod,
    /// Centred differences, unlimited.
    None,
}

/// Per-cell slopes, in units of `u` per radian.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeField {
    pub s_lambda: Vec<f64>,
    pub s_phi: Vec<f64>,
}

impl SlopeField {
    pub fn zeros(n_cells: usize) -> Self {
        Self {
            s_lambda: vec![0.0; n_cells],
            s_phi: vec![0.0; n_cells],
        }
    }

    /// The linear profile of `cell` evaluated at `at`.
    pub fn edge_side_value(&self, grid: &Grid, cell: CellId, u: f64, at: &SpherePoint) -> f64 {
        let (sl, sp) = (self.s_lambda[cell], self.s_phi[cell]);
        if sl == 0.0 && sp == 0.0 {
            return u;
        }
        let c = grid.cell(cell);
        u + sl * lambda_difference(c.lambda_center(), at.lambda) + sp * (at.phi - c.phi_center())
    }
}

fn minmod(a: f64, b: f64, c: f64) -> f64 {
    if a > 0.0 && b > 0.0 && c > 0.0 {
        a.min(b).min(c)
    } else if a < 0.0 && b < 0.0 && c < 0.0 {
        a.max(b).max(c)
    } else {
        0.0
    }
}

fn limited(limiter: Limiter, back: Option<f64>, centred: Option<f64>, fwd: Option<f64>) -> f64 {
    match (back, fwd) {
        (Some(b), Some(f)) => {
            let c = centred.expect("both sides present");
            match limiter {
                Limiter::Minmod => minmod(b, c, f),
                Limiter::None => c,
            }
        }
        (Some(s), None) | (None, Some(s)) => s,
        (None, None) => 0.0,
    }
}

/// Area-weighted value and centre latitude of the cells across one side.
fn side_average(grid: &Grid, u: &[f64], cells: &[CellId]) -> Option<(f64, f64)> {
    if cells.is_empty() {
        return None;
    }
    // offsets from the first value keep equal values exact
    let base = u[cells[0]];
    let mut excess = 0.0;
    let mut area = 0.0;
    for &c in cells {
        excess += grid.cell(c).area * (u[c] - base);
        area += grid.cell(c).area;
    }
    Some((base + excess / area, grid.cell(cells[0]).phi_center()))
}

/// Limited slopes from neighbour averages. A coarse cell facing two fine
/// cells uses their area-weighted mean; pole cells use a one-sided
/// difference in `φ`.
pub fn reconstruct_slopes(grid: &Grid, state: &State, limiter: Limiter) -> SlopeField {
    let u = &state.u;
    let n = grid.n_cells();
    let mut out = SlopeField::zeros(n);
    for id in 0..n {
        let c = grid.cell(id);
        let (w, e) = grid.lon_neighbors(id);
        if w != id {
            let h = c.dlambda();
            out.s_lambda[id] = limited(
                limiter,
                Some((u[id] - u[w]) / h),
                Some((u[e] - u[w]) / (2.0 * h)),
                Some((u[e] - u[id]) / h),
            );
        }
        let (south, north) = grid.lat_neighbors(id);
        let s = side_average(grid, u, &south);
        let nn = side_average(grid, u, &north);
        let pc = c.phi_center();
        let back = s.map(|(v, p)| (u[id] - v) / (pc - p));
        let fwd = nn.map(|(v, p)| (v - u[id]) / (p - pc));
        let centred = match (s, nn) {
            (Some((vs, ps)), Some((vn, pn))) => Some((vn - vs) / (pn - ps)),
            _ => None,
        };
        out.s_phi[id] = limited(limiter, back, centred, fwd);
    }
    out
}

/// Half-step interface value from reconstructed side values `ul`, `ur` and
/// the slopes normal to the edge. `speed_scale` converts the directional
/// flux derivative to a speed in radians per unit time.
pub fn grp_mid_value<F: Flux1d + ?Sized>(
    flux: &F,
    speed_scale: f64,
    ul: f64,
    ur: f64,
    sl: f64,
    sr: f64,
    dt: f64,
) -> Result<f64, RiemannError> {
    let sol = solve_riemann(flux, ul, ur)?;
    let slope = match sol.category {
        WaveCategory::Sonic => return Ok(sol.u_star),
        WaveCategory::LeftUpwind => sl,
        WaveCategory::RightUpwind => sr,
    };
    if slope == 0.0 {
        return Ok(sol.u_star);
    }
    let u_t = -slope * flux.derivative(sol.u_star) * speed_scale;
    Ok(sol.u_star + 0.5 * dt * u_t)
}

/// [`grp_mid_value`] for a grid edge, building its directional flux.
/// Pole edges carry no flux and return `ul`.
pub fn grp_edge_value(
    model: &FluxModel,
    edge: &Edge,
    ul: f64,
    ur: f64,
    sl: f64,
    sr: f64,
    dt: f64,
) -> Result<f64, RiemannError> {
    let Some(line) = model.riemann_line(edge) else {
        return Ok(ul);
    };
    let scale = match edge.kind {
        EdgeKind::Phi => 1.0,
        EdgeKind::Lambda => 1.0 / edge.midpoint.phi.cos(),
    };
    grp_mid_value(&line, scale, ul, ur, sl, sr, dt)
}

pub fn grp_step_with_slopes(
    grid: &Grid,
    model: &FluxModel,
    state: &State,
    dt: f64,
    slopes: &SlopeField,
) -> Result<State, StepError> {
    Scheme::new(grid, model).step(state, dt, Some(slopes))
}

pub fn grp_step(
    grid: &Grid,
    model: &FluxModel,
    state: &State,
    dt: f64,
    limiter: Limiter,
) -> Result<State, StepError> {
    let slopes = reconstruct_slopes(grid, state, limiter);
    grp_step_with_slopes(grid, model, state, dt, &slopes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::godunov::godunov_step;
    use crate::grid::{build_grid, Reduction};
    use crate::poly::Polynomial;
    use crate::testcases::{confined_model, init_confined, init_steady, steady_model};
    use std::f64::consts::TAU;

    #[test]
    fn constant_state_has_zero_slopes() {
        let g = build_grid(12, 32, Reduction::default()).unwrap();
        let s = State::constant(&g, 2.5);
        for lim in [Limiter::Minmod, Limiter::None] {
            assert_eq!(reconstruct_slopes(&g, &s, lim), SlopeField::zeros(g.n_cells()));
        }
    }

    #[test]
    fn linear_profile_in_lambda_is_recovered() {
        let g = build_grid(6, 64, Reduction::None).unwrap();
        // u = λ, checked away from the periodic seam
        let u = g.cells().iter().map(|c| c.lambda_center()).collect();
        let s = reconstruct_slopes(&g, &State { u, time: 0.0 }, Limiter::Minmod);
        for (id, c) in g.cells().iter().enumerate() {
            let l = c.lambda_center();
            if l > 0.2 && l < TAU - 0.2 {
                assert!((s.s_lambda[id] - 1.0).abs() < 1e-12);
                assert_eq!(s.s_phi[id], 0.0);
            }
        }
    }

    #[test]
    fn local_extremum_is_flattened() {
        let g = build_grid(6, 16, Reduction::None).unwrap();
        let mut u = vec![0.0; g.n_cells()];
        let peak = g.locate(1.0, 0.1);
        u[peak] = 1.0;
        let s = reconstruct_slopes(&g, &State { u, time: 0.0 }, Limiter::Minmod);
        assert_eq!(s.s_lambda[peak], 0.0);
        assert_eq!(s.s_phi[peak], 0.0);
    }

    #[test]
    fn limited_side_values_stay_in_local_range() {
        let g = build_grid(20, 64, Reduction::default()).unwrap();
        let st = init_confined(&g);
        let s = reconstruct_slopes(&g, &st, Limiter::Minmod);
        for e in g.edges() {
            let Some(r) = e.right else { continue };
            for c in [e.left, r] {
                let v = s.edge_side_value(&g, c, st.u[c], &e.midpoint);
                let mut lo = st.u[c];
                let mut hi = st.u[c];
                for &(f, _) in &g.cell(c).edges {
                    if let Some(n) = g.edge(f).neighbor_of(c) {
                        lo = lo.min(st.u[n]);
                        hi = hi.max(st.u[n]);
                    }
                }
                assert!(v >= lo - 1e-14 && v <= hi + 1e-14, "cell {c}: {v} not in [{lo}, {hi}]");
            }
        }
    }

    #[test]
    fn linear_advection_taylor_value() {
        // g = c u with c > 0: exact half-step value at the interface is the
        // left profile traced back by c dt/2
        let c = 0.8;
        let g = Polynomial::new(vec![0.0, c]);
        let (ul, ur, sl, sr, dt) = (0.3, 0.9, 0.5, -2.0, 0.1);
        let v = grp_mid_value(&g, 1.0, ul, ur, sl, sr, dt).unwrap();
        assert!((v - (ul - 0.5 * dt * sl * c)).abs() < 1e-15);
        let neg = Polynomial::new(vec![0.0, -c]);
        let w = grp_mid_value(&neg, 1.0, ul, ur, sl, sr, dt).unwrap();
        assert!((w - (ur + 0.5 * dt * sr * c)).abs() < 1e-15);
    }

    #[test]
    fn sonic_and_zero_slope_cases_reduce_to_riemann() {
        let b = Polynomial::new(vec![0.0, 0.0, 0.5]);
        assert_eq!(grp_mid_value(&b, 1.0, -1.0, 1.0, 3.0, -7.0, 0.1).unwrap(), 0.0);
        let u = solve_riemann(&b, 0.4, 0.1).unwrap().u_star;
        assert_eq!(grp_mid_value(&b, 1.0, 0.4, 0.1, 0.0, 0.0, 0.1).unwrap(), u);
    }

    #[test]
    fn zero_slopes_reproduce_godunov_bitwise() {
        let g = build_grid(16, 64, Reduction::default()).unwrap();
        for (m, s) in [(steady_model(), init_steady(&g)), (confined_model(), init_confined(&g))] {
            let z = SlopeField::zeros(g.n_cells());
            let a = godunov_step(&g, &m, &s, 0.01).unwrap();
            let b = grp_step_with_slopes(&g, &m, &s, 0.01, &z).unwrap();
            assert!(a.u.iter().zip(&b.u).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn grp_step_keeps_constants() {
        let g = build_grid(16, 64, Reduction::default()).unwrap();
        let s = State::constant(&g, -0.4);
        let out = grp_step(&g, &steady_model(), &s, 0.05, Limiter::Minmod).unwrap();
        assert_eq!(out.u, s.u);
    }
}
