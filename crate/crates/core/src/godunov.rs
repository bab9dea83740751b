//! Conservative time stepping.
//!
//! Every non-degenerate edge poses a 1D Riemann problem in its normal
//! direction with coordinates frozen at the edge midpoint. The resulting
//! interface value `u*` is fed to the exact endpoint-difference edge flux.
//!
//! Cell residuals are assembled vertex by vertex: for a cell with vertices
//! `v_k` in counter-clockwise order and interface values `u_k` on the edge
//! leaving `v_k`,
//!
//! ```text
//! Σ_e ±E_e = Σ_k [h(v_k, u_k) − h(v_k, u_{k−1})]
//! ```
//!
//! which is the same sum regrouped. Each term vanishes when neighbouring
//! interface values agree, so constant states are fixed points bit for bit.

use rayon::prelude::*;
use thiserror::Error;

use crate::flux::{FluxModel, LineFlux};
use crate::geometry::Vec3;
use crate::grid::{CellId, EdgeKind, Grid};
use crate::grp::{self, Limiter, SlopeField};
use crate::riemann::{solve_riemann, wave_speed_bound, Flux1d, RiemannError};
use crate::testcases::{min_max, total_mass};

/// Default Courant number.
pub const DEFAULT_CFL: f64 = 0.45;
/// Default upper limit on a CFL-controlled step.
pub const DEFAULT_DT_MAX: f64 = 0.1;
/// Post-step check that each new value lies within the old range of its
/// cell and neighbours, widened by `abs + rel · (hi − lo)`.
///
/// Fluxes with `x`-dependent weights are not exactly monotone when the
/// frozen-midpoint Riemann flux and the endpoint-difference edge flux
/// disagree in sign, so the default allows a small relative excursion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeCheck {
    pub abs: f64,
    pub rel: f64,
}

impl Default for RangeCheck {
    fn default() -> Self {
        Self { abs: 1e-12, rel: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StepError {
    #[error("CFL violated: cell {cell} reached {value}, neighbourhood range [{lo}, {hi}]")]
    CflViolated { cell: CellId, value: f64, lo: f64, hi: f64 },
    #[error("non-finite value in cell {cell}")]
    NonFinite { cell: CellId },
    #[error(transparent)]
    Riemann(#[from] RiemannError),
    #[error("time step {dt} must be positive and finite")]
    BadTimeStep { dt: f64 },
    #[error("state has {got} values, grid has {expected} cells")]
    LengthMismatch { expected: usize, got: usize },
    #[error("final time {t_final} precedes state time {time}")]
    FinalTimeBeforeStart { t_final: f64, time: f64 },
}

/// Cell averages at a given time.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub u: Vec<f64>,
    pub time: f64,
}

impl State {
    pub fn constant(grid: &Grid, value: f64) -> Self {
        Self {
            u: vec![value; grid.n_cells()],
            time: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stepping {
    Fixed(f64),
    Cfl { cfl: f64, dt_max: f64 },
}

impl Default for Stepping {
    fn default() -> Self {
        Stepping::Cfl {
            cfl: DEFAULT_CFL,
            dt_max: DEFAULT_DT_MAX,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Order {
    /// First-order Godunov.
    First,
    /// Second-order GRP with the given slope limiter.
    Second(Limiter),
}

impl Order {
    pub fn as_number(&self) -> u8 {
        match self {
            Order::First => 1,
            Order::Second(_) => 2,
        }
    }
}

/// Per-step record passed to [`run`] callbacks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    pub step: usize,
    pub time: f64,
    pub dt: f64,
    pub mass: f64,
    pub min_u: f64,
    pub max_u: f64,
}

struct EdgeData {
    /// Directional flux of the Riemann problem; `None` on pole edges.
    riemann: Option<LineFlux>,
    /// Multiplies the directional flux derivative to give a speed in
    /// radians per unit time.
    speed_scale: f64,
    /// Edge flux as a function of the interface value, for step sizing.
    edge_flux: LineFlux,
}

/// `h(v, ·)` restricted to the data needed at one cell vertex.
enum VertexWeights {
    Separable([f64; 3]),
    General(Vec3),
}

struct CellData {
    /// `(edge leaving v_k, weights at v_k)` in counter-clockwise order.
    vertices: Vec<(usize, VertexWeights)>,
    neighbours: Vec<CellId>,
}

/// A grid and model with all per-edge and per-cell data prepared.
pub struct Scheme<'a> {
    grid: &'a Grid,
    model: &'a FluxModel,
    edges: Vec<EdgeData>,
    cells: Vec<CellData>,
    /// `None` disables the post-step range check.
    pub range_check: Option<RangeCheck>,
}

impl<'a> Scheme<'a> {
    pub fn new(grid: &'a Grid, model: &'a FluxModel) -> Self {
        let edges = grid
            .edges()
            .par_iter()
            .map(|e| EdgeData {
                riemann: model.riemann_line(e),
                speed_scale: match e.kind {
                    EdgeKind::Phi => 1.0,
                    EdgeKind::Lambda => 1.0 / e.midpoint.phi.cos(),
                },
                edge_flux: model.edge_line(e),
            })
            .collect();
        let cells = grid
            .cells()
            .iter()
            .enumerate()
            .map(|(id, c)| {
                let vertices = c
                    .edges
                    .iter()
                    .map(|&(e, sign)| {
                        let edge = grid.edge(e);
                        let start = if sign > 0.0 { edge.p1 } else { edge.p2 };
                        let w = match model {
                            FluxModel::Separable { components, .. } => {
                                let mut w = [0.0; 3];
                                for j in 0..3 {
                                    w[j] = components[j].r.value(start.cart[j]);
                                }
                                VertexWeights::Separable(w)
                            }
                            FluxModel::General { .. } => VertexWeights::General(start.cart),
                        };
                        (e, w)
                    })
                    .collect();
                let mut neighbours: Vec<CellId> = c
                    .edges
                    .iter()
                    .filter_map(|&(e, _)| grid.edge(e).neighbor_of(id))
                    .collect();
                neighbours.sort_unstable();
                neighbours.dedup();
                CellData {
                    vertices,
                    neighbours,
                }
            })
            .collect();
        Self {
            grid,
            model,
            edges,
            cells,
            range_check: Some(RangeCheck::default()),
        }
    }

    pub fn grid(&self) -> &Grid {
        self.grid
    }

    pub fn model(&self) -> &FluxModel {
        self.model
    }

    fn check_state(&self, state: &State) -> Result<(), StepError> {
        if state.u.len() != self.grid.n_cells() {
            return Err(StepError::LengthMismatch {
                expected: self.grid.n_cells(),
                got: state.u.len(),
            });
        }
        if let Some(cell) = state.u.iter().position(|v| !v.is_finite()) {
            return Err(StepError::NonFinite { cell });
        }
        Ok(())
    }

    /// Largest stable step: `cfl · min_c A_c / Σ_e max|E_e′|`, where the
    /// maximum runs over the values of the cell and its neighbour across
    /// `e`, capped at `dt_max`.
    pub fn compute_dt(&self, state: &State, cfl: f64, dt_max: f64) -> f64 {
        let u = &state.u;
        let rate = self
            .grid
            .cells()
            .par_iter()
            .enumerate()
            .map(|(id, c)| {
                let total: f64 = c
                    .edges
                    .iter()
                    .map(|&(e, _)| {
                        let edge = self.grid.edge(e);
                        let data = &self.edges[e];
                        if edge.is_degenerate() || data.edge_flux.is_identically_zero() {
                            return 0.0;
                        }
                        let nb = edge.neighbor_of(id).map_or(u[id], |n| u[n]);
                        wave_speed_bound(&data.edge_flux, u[id], nb)
                    })
                    .sum();
                total / c.area
            })
            .reduce(|| 0.0, f64::max);
        (cfl / rate.max(1e-30)).min(dt_max)
    }

    /// Interface value on edge `e`. With `slopes`, the reconstructed side
    /// values and the half-step GRP correction are used.
    fn edge_value(
        &self,
        e: usize,
        u: &[f64],
        slopes: Option<&SlopeField>,
        dt: f64,
    ) -> Result<f64, RiemannError> {
        let edge = self.grid.edge(e);
        let data = &self.edges[e];
        let Some(line) = &data.riemann else {
            return Ok(u[edge.left]);
        };
        let (l, r) = (edge.left, edge.right.expect("non-degenerate edge"));
        match slopes {
            None => Ok(solve_riemann(line, u[l], u[r])?.u_star),
            Some(s) => {
                let ul = s.edge_side_value(self.grid, l, u[l], &edge.midpoint);
                let ur = s.edge_side_value(self.grid, r, u[r], &edge.midpoint);
                let (sl, sr) = match edge.kind {
                    EdgeKind::Phi => (s.s_lambda[l], s.s_lambda[r]),
                    EdgeKind::Lambda => (s.s_phi[l], s.s_phi[r]),
                };
                grp::grp_mid_value(line, data.speed_scale, ul, ur, sl, sr, dt)
            }
        }
    }

    /// One conservative step. `slopes = None` is first-order Godunov.
    pub fn step(&self, state: &State, dt: f64, slopes: Option<&SlopeField>) -> Result<State, StepError> {
        self.step_with_check(state, dt, slopes, self.range_check)
    }

    fn step_with_check(
        &self,
        state: &State,
        dt: f64,
        slopes: Option<&SlopeField>,
        range_check: Option<RangeCheck>,
    ) -> Result<State, StepError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(StepError::BadTimeStep { dt });
        }
        self.check_state(state)?;
        let u = &state.u;
        let values = (0..self.edges.len())
            .into_par_iter()
            .map(|e| self.edge_value(e, u, slopes, dt))
            .collect::<Result<Vec<f64>, _>>()?;

        let new_u: Vec<f64> = match self.model {
            FluxModel::Separable { components, .. } => {
                let active: Vec<usize> = (0..3).filter(|&j| !components[j].f.is_zero()).collect();
                let fvals: Vec<[f64; 3]> = values
                    .par_iter()
                    .map(|&v| {
                        let mut f = [0.0; 3];
                        for &j in &active {
                            f[j] = components[j].f.value(v);
                        }
                        f
                    })
                    .collect();
                self.update(u, dt, |cell| {
                    let verts = &self.cells[cell].vertices;
                    let n = verts.len();
                    let mut total = 0.0;
                    for k in 0..n {
                        let (e, VertexWeights::Separable(w)) = &verts[k] else { unreachable!() };
                        let prev = verts[(k + n - 1) % n].0;
                        for &j in &active {
                            total += w[j] * (fvals[*e][j] - fvals[prev][j]);
                        }
                    }
                    total
                })
            }
            FluxModel::General { h, .. } => self.update(u, dt, |cell| {
                let verts = &self.cells[cell].vertices;
                let n = verts.len();
                let mut total = 0.0;
                for k in 0..n {
                    let (e, VertexWeights::General(x)) = &verts[k] else { unreachable!() };
                    let prev = verts[(k + n - 1) % n].0;
                    total += h(*x, values[*e]) - h(*x, values[prev]);
                }
                total
            }),
        };

        for (cell, v) in new_u.iter().enumerate() {
            if !v.is_finite() {
                return Err(StepError::NonFinite { cell });
            }
        }
        if let Some(check) = range_check {
            for (cell, &v) in new_u.iter().enumerate() {
                let (lo, hi) = self.cells[cell]
                    .neighbours
                    .iter()
                    .fold((u[cell], u[cell]), |(lo, hi), &n| (lo.min(u[n]), hi.max(u[n])));
                let tol = check.abs + check.rel * (hi - lo);
                if v < lo - tol || v > hi + tol {
                    return Err(StepError::CflViolated { cell, value: v, lo, hi });
                }
            }
        }
        Ok(State {
            u: new_u,
            time: state.time + dt,
        })
    }

    fn update<R>(&self, u: &[f64], dt: f64, residual: R) -> Vec<f64>
    where
        R: Fn(usize) -> f64 + Sync,
    {
        (0..u.len())
            .into_par_iter()
            .map(|c| u[c] - dt / self.grid.cell(c).area * residual(c))
            .collect()
    }
}

pub fn compute_dt(grid: &Grid, model: &FluxModel, state: &State, cfl: f64, dt_max: f64) -> f64 {
    Scheme::new(grid, model).compute_dt(state, cfl, dt_max)
}

pub fn godunov_step(grid: &Grid, model: &FluxModel, state: &State, dt: f64) -> Result<State, StepError> {
    Scheme::new(grid, model).step(state, dt, None)
}

/// Advances `state0` to exactly `t_final`, clipping the last step.
pub fn run<F>(
    scheme: &Scheme<'_>,
    state0: &State,
    t_final: f64,
    stepping: Stepping,
    order: Order,
    mut on_step: F,
) -> Result<State, StepError>
where
    F: FnMut(&StepDiagnostics),
{
    if t_final < state0.time {
        return Err(StepError::FinalTimeBeforeStart {
            t_final,
            time: state0.time,
        });
    }
    if let Stepping::Fixed(dt) = stepping {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(StepError::BadTimeStep { dt });
        }
    }
    scheme.check_state(state0)?;
    let grid = scheme.grid();
    let t0 = state0.time;
    let mut state = state0.clone();
    let mut step = 0;
    // remaining intervals shorter than this are absorbed into the last step
    let slack = 1e-12 * t_final.abs().max(1.0);
    while state.time < t_final {
        let mut dt = match stepping {
            Stepping::Fixed(dt) => dt,
            Stepping::Cfl { cfl, dt_max } => scheme.compute_dt(&state, cfl, dt_max),
        };
        let last = state.time + dt >= t_final - slack;
        if last {
            dt = t_final - state.time;
        }
        let slopes = match order {
            Order::First => None,
            Order::Second(limiter) => Some(grp::reconstruct_slopes(grid, &state, limiter)),
        };
        // unlimited slopes may create new local extrema by design
        let check = match order {
            Order::Second(Limiter::None) => None,
            _ => scheme.range_check,
        };
        state = scheme.step_with_check(&state, dt, slopes.as_ref(), check)?;
        step += 1;
        state.time = if last {
            t_final
        } else if let Stepping::Fixed(h) = stepping {
            t0 + step as f64 * h
        } else {
            state.time
        };
        let (min_u, max_u) = min_max(&state.u);
        on_step(&StepDiagnostics {
            step,
            time: state.time,
            dt,
            mass: total_mass(grid, &state.u),
            min_u,
            max_u,
        });
    }
    Ok(state)
}

/// Oracle for the first-order 1D update `u_i − (dt/dx)(G_{i+1/2} − G_{i−1/2})`
/// with the Godunov flux of `flux` on a periodic grid.
pub fn periodic_godunov_1d<F: Flux1d>(flux: &F, u: &[f64], dx: f64, dt: f64) -> Result<Vec<f64>, RiemannError> {
    let n = u.len();
    let g = (0..n)
        .map(|i| solve_riemann(flux, u[i], u[(i + 1) % n]).map(|s| s.flux_at_interface))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((0..n)
        .map(|i| u[i] - dt / dx * (g[i] - g[(i + n - 1) % n]))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flux::ComponentFlux;
    use crate::grid::{build_grid, Reduction};
    use crate::poly::Polynomial;
    use crate::testcases::{equatorial_model, init_equatorial, init_steady, steady_model};
    use proptest::prelude::*;
    use std::f64::consts::{PI, TAU};

    fn cubic_model() -> FluxModel {
        FluxModel::homogeneous(
            "cubic",
            [
                ComponentFlux::polynomial(vec![0.0, 0.3, 0.0, -1.0]),
                ComponentFlux::burgers(0.8),
                ComponentFlux::linear(0.5),
            ],
        )
    }

    #[test]
    fn vertices_chain_around_each_cell() {
        let g = build_grid(20, 64, Reduction::default()).unwrap();
        for (id, c) in g.cells().iter().enumerate() {
            let n = c.edges.len();
            for k in 0..n {
                let (e, s) = c.edges[k];
                let (f, t) = (c.edges[(k + 1) % n].0, c.edges[(k + 1) % n].1);
                let end = if s > 0.0 { g.edge(e).p2 } else { g.edge(e).p1 };
                let next = if t > 0.0 { g.edge(f).p1 } else { g.edge(f).p2 };
                assert_eq!(end.cart, next.cart, "cell {id} edge {k}");
            }
        }
    }

    #[test]
    fn constant_state_is_exact() {
        let g = build_grid(16, 32, Reduction::default()).unwrap();
        for model in [cubic_model(), steady_model(), crate::testcases::confined_model()] {
            let s = State::constant(&g, 0.7);
            let scheme = Scheme::new(&g, &model);
            let out = scheme.step(&s, 0.02, None).unwrap();
            assert_eq!(out.u, s.u);
        }
    }

    #[test]
    fn zero_model_keeps_any_state_and_hits_dt_max() {
        let g = build_grid(8, 16, Reduction::default()).unwrap();
        let z = FluxModel::zero();
        let s = init_steady(&g);
        assert_eq!(godunov_step(&g, &z, &s, 0.3).unwrap().u, s.u);
        assert_eq!(compute_dt(&g, &z, &s, 0.45, 0.1), 0.1);
    }

    #[test]
    fn dt_scales_with_cfl_and_respects_equatorial_bound() {
        let g = build_grid(24, 16, Reduction::default()).unwrap();
        let m = equatorial_model();
        let s = init_equatorial(&g);
        let a = compute_dt(&g, &m, &s, 0.2, 10.0);
        let b = compute_dt(&g, &m, &s, 0.4, 10.0);
        assert!((b - 2.0 * a).abs() < 1e-15 * b);
        let max_u = s.u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(b <= 0.4 * (TAU / 16.0) / (TAU * max_u));
    }

    #[test]
    fn band_rows_follow_the_1d_scheme() {
        let g = build_grid(24, 32, Reduction::None).unwrap();
        let m = equatorial_model();
        let s = init_equatorial(&g);
        let dt = compute_dt(&g, &m, &s, 0.45, 1.0);
        let out = godunov_step(&g, &m, &s, dt).unwrap();
        let g1d = Polynomial::new(vec![0.0, 0.0, PI]);
        for b in g.bands() {
            let row: Vec<f64> = (0..b.n_cells).map(|i| s.u[b.first_cell + i]).collect();
            let expect = periodic_godunov_1d(&g1d, &row, TAU / b.n_cells as f64, dt).unwrap();
            for i in 0..b.n_cells {
                assert!((out.u[b.first_cell + i] - expect[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn run_to_start_time_returns_input() {
        let g = build_grid(8, 16, Reduction::default()).unwrap();
        let m = steady_model();
        let s = init_steady(&g);
        let sch = Scheme::new(&g, &m);
        let out = run(&sch, &s, 0.0, Stepping::default(), Order::First, |_| {}).unwrap();
        assert_eq!(out, s);
        assert!(run(&sch, &s, -1.0, Stepping::default(), Order::First, |_| {}).is_err());
    }

    #[test]
    fn run_lands_on_final_time() {
        let g = build_grid(12, 32, Reduction::default()).unwrap();
        let m = steady_model();
        let s = init_steady(&g);
        let sch = Scheme::new(&g, &m);
        let mut log = Vec::new();
        let out = run(&sch, &s, 0.33, Stepping::Fixed(0.05), Order::First, |d| log.push(*d)).unwrap();
        assert_eq!(out.time, 0.33);
        assert_eq!(log.len(), 7);
        assert!((log.last().unwrap().dt - 0.03).abs() < 1e-12);
        let m0 = total_mass(&g, &s.u);
        for d in &log {
            assert!((d.mass - m0).abs() < 1e-12 * g.n_cells() as f64);
        }
    }

    #[test]
    fn errors_are_reported() {
        let g = build_grid(8, 16, Reduction::default()).unwrap();
        let m = steady_model();
        let mut s = init_steady(&g);
        assert!(matches!(godunov_step(&g, &m, &s, 0.0), Err(StepError::BadTimeStep { .. })));
        assert!(matches!(godunov_step(&g, &m, &s, 50.0), Err(StepError::CflViolated { .. })));
        s.u[3] = f64::NAN;
        assert!(matches!(godunov_step(&g, &m, &s, 0.01), Err(StepError::NonFinite { cell: 3 })));
        s.u.pop();
        assert!(matches!(godunov_step(&g, &m, &s, 0.01), Err(StepError::LengthMismatch { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn conservation_and_maximum_principle(seed in 0u64..1000, n_lat in 2usize..10, k in 3u32..6) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let g = build_grid(2 * n_lat, 1 << k, Reduction::default()).unwrap();
            let m = cubic_model();
            let u: Vec<f64> = (0..g.n_cells()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut s = State { u, time: 0.0 };
            let (lo, hi) = min_max(&s.u);
            let m0 = total_mass(&g, &s.u);
            let sch = Scheme::new(&g, &m);
            for _ in 0..10 {
                let dt = sch.compute_dt(&s, 0.45, 1.0);
                s = sch.step(&s, dt, None).unwrap();
            }
            let (a, b) = min_max(&s.u);
            prop_assert!(a >= lo - 1e-12 && b <= hi + 1e-12);
            prop_assert!((total_mass(&g, &s.u) - m0).abs() < 1e-13);
        }
    }
}
