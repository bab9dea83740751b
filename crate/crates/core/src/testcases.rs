//! Models, initial data, reference solutions and error metrics for the
//! three standard experiments: an equatorial Burgers band, the steady state
//! `u = x1`, and a confined solution supported in `x1 < √2/2`.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2, TAU};
use std::fmt;

use thiserror::Error;

use crate::flux::{Component, ComponentFlux, FluxModel, Weight};
use crate::godunov::State;
use crate::grid::Grid;

/// Upper latitude of the equatorial band.
pub const BAND_TOP: f64 = PI / 12.0;

/// Shock formation time of the equatorial problem, `1/(2π)`.
pub const SHOCK_TIME: f64 = 1.0 / TAU;

/// Resolution of [`reference_burgers_1d`].
pub const REFERENCE_CELLS: usize = 1 << 15;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("state has {got} values, grid has {expected} cells")]
    LengthMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    UDiff,
    L1VsReference,
    MassDrift,
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MetricKind::UDiff => "u_diff",
            MetricKind::L1VsReference => "l1_vs_reference",
            MetricKind::MassDrift => "mass_drift",
        })
    }
}

/// A scalar error measure together with the constant it was divided by.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metric {
    pub kind: MetricKind,
    pub value: f64,
    pub normalization: f64,
}

/// `ψ(x) = 1` for `x ≤ 0`, `1 − 6x² + (8/√2)x³` up to `√2/2`, then 0.
pub fn psi_cutoff(x1: f64) -> f64 {
    if x1 <= 0.0 {
        1.0
    } else if x1 >= FRAC_1_SQRT_2 {
        0.0
    } else {
        1.0 - 6.0 * x1 * x1 + (8.0 / SQRT_2) * x1 * x1 * x1
    }
}

pub fn psi_cutoff_derivative(x1: f64) -> f64 {
    if x1 <= 0.0 || x1 >= FRAC_1_SQRT_2 {
        0.0
    } else {
        -12.0 * x1 + (24.0 / SQRT_2) * x1 * x1
    }
}

/// `f3(u) = −2π u²/2`, all other components zero.
pub fn equatorial_model() -> FluxModel {
    FluxModel::homogeneous(
        "equatorial",
        [ComponentFlux::zero(), ComponentFlux::zero(), ComponentFlux::burgers(-TAU)],
    )
}

/// `f1(u) = u²/2`.
pub fn steady_model() -> FluxModel {
    FluxModel::homogeneous(
        "steady",
        [ComponentFlux::burgers(1.0), ComponentFlux::zero(), ComponentFlux::zero()],
    )
}

/// `h = ψ(x1) x1 u²/2`.
pub fn confined_model() -> FluxModel {
    FluxModel::separable(
        "confined",
        [
            Component {
                f: ComponentFlux::burgers(1.0),
                r: Weight::CutoffPsi,
            },
            Component::homogeneous(ComponentFlux::zero()),
            Component::homogeneous(ComponentFlux::zero()),
        ],
    )
}

fn sample(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> State {
    let u = grid
        .cells()
        .iter()
        .map(|c| f(c.lambda_center(), c.phi_center()))
        .collect();
    State { u, time: 0.0 }
}

/// `sin λ` inside `0 < φ < π/12`, zero elsewhere, sampled at cell centres.
pub fn init_equatorial(grid: &Grid) -> State {
    sample(grid, |l, p| if p > 0.0 && p < BAND_TOP { l.sin() } else { 0.0 })
}

/// Exact cell averages of the equatorial data.
pub fn init_equatorial_exact(grid: &Grid) -> State {
    let u = grid
        .cells()
        .iter()
        .map(|c| {
            let lo = c.phi1.max(0.0);
            let hi = c.phi2.min(BAND_TOP);
            if hi <= lo {
                return 0.0;
            }
            let frac = (hi.sin() - lo.sin()) / (c.phi2.sin() - c.phi1.sin());
            frac * (c.lambda1.cos() - c.lambda2.cos()) / c.dlambda()
        })
        .collect();
    State { u, time: 0.0 }
}

/// `cos λ cos φ = x1` at cell centres.
pub fn init_steady(grid: &Grid) -> State {
    sample(grid, |l, p| l.cos() * p.cos())
}

/// `ψ(x1) x1` at cell centres.
pub fn init_confined(grid: &Grid) -> State {
    sample(grid, |l, p| {
        let x1 = l.cos() * p.cos();
        psi_cutoff(x1) * x1
    })
}

fn check_len(grid: &Grid, u: &[f64]) -> Result<(), MetricError> {
    if u.len() != grid.n_cells() {
        return Err(MetricError::LengthMismatch {
            expected: grid.n_cells(),
            got: u.len(),
        });
    }
    Ok(())
}

/// `Σ A_c |u_a − u_b|` without normalization.
pub fn u_diff_sum(grid: &Grid, a: &[f64], b: &[f64]) -> Result<f64, MetricError> {
    check_len(grid, a)?;
    check_len(grid, b)?;
    Ok(grid
        .cells()
        .iter()
        .zip(a.iter().zip(b))
        .map(|(c, (x, y))| c.area * (x - y).abs())
        .sum())
}

/// `Σ A_c |u_a − u_b| / 4π`.
pub fn u_diff_metric(grid: &Grid, a: &State, b: &State) -> Result<Metric, MetricError> {
    let normalization = 4.0 * PI;
    Ok(Metric {
        kind: MetricKind::UDiff,
        value: u_diff_sum(grid, &a.u, &b.u)? / normalization,
        normalization,
    })
}

/// `Σ A_c u_c`.
pub fn total_mass(grid: &Grid, u: &[f64]) -> f64 {
    grid.cells().iter().zip(u).map(|(c, v)| c.area * v).sum()
}

pub fn min_max(u: &[f64]) -> (f64, f64) {
    u.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Godunov flux of the convex `g(u) = π u²`.
fn burgers_flux(ul: f64, ur: f64) -> f64 {
    let g = |u: f64| PI * u * u;
    if ul <= ur {
        if ul <= 0.0 && 0.0 <= ur {
            0.0
        } else {
            g(ul).min(g(ur))
        }
    } else {
        g(ul).max(g(ur))
    }
}

/// Fine-grid periodic solution of `u_t + (π u²)_λ = 0`, `u(λ, 0) = sin λ`,
/// on [`REFERENCE_CELLS`] cells. Starts from exact averages.
pub fn reference_burgers_fine(t: f64) -> Vec<f64> {
    let n = REFERENCE_CELLS;
    let dx = TAU / n as f64;
    let mut u: Vec<f64> = (0..n)
        .map(|i| {
            let (a, b) = (i as f64 * dx, (i + 1) as f64 * dx);
            (a.cos() - b.cos()) / dx
        })
        .collect();
    let mut time = 0.0;
    let mut flux = vec![0.0; n];
    let mut done = t <= 0.0;
    while !done {
        let smax = u.iter().fold(0.0f64, |m, v| m.max(v.abs())) * TAU;
        let mut dt = 0.45 * dx / smax.max(1e-30);
        if time + dt >= t {
            dt = t - time;
            done = true;
        }
        // flux[i] sits between cell i and i+1
        for i in 0..n {
            flux[i] = burgers_flux(u[i], u[(i + 1) % n]);
        }
        let r = dt / dx;
        for i in 0..n {
            u[i] -= r * (flux[i] - flux[(i + n - 1) % n]);
        }
        time += dt;
    }
    u
}

/// Overlap average of a periodic fine profile onto `n` equal cells.
pub fn average_onto(fine: &[f64], n: usize) -> Vec<f64> {
    let m = fine.len();
    (0..n)
        .map(|k| {
            // cell k covers fine-index interval [k m / n, (k + 1) m / n)
            let a = k as f64 * m as f64 / n as f64;
            let b = (k + 1) as f64 * m as f64 / n as f64;
            let mut sum = 0.0;
            let mut i = a.floor() as usize;
            while (i as f64) < b && i < m {
                let lo = a.max(i as f64);
                let hi = b.min((i + 1) as f64);
                sum += fine[i] * (hi - lo);
                i += 1;
            }
            sum / (b - a)
        })
        .collect()
}

/// [`reference_burgers_fine`] averaged onto `n_cells` equal cells.
pub fn reference_burgers_1d(n_cells: usize, t: f64) -> Vec<f64> {
    average_onto(&reference_burgers_fine(t), n_cells)
}

/// Foot `ξ` of the characteristic through `λ` at time `t ≤ 1/(2π)`:
/// `λ = ξ + 2π t sin ξ`.
fn characteristic_foot(lambda: f64, t: f64) -> f64 {
    let c = TAU * t;
    // the map is monotone, so bisection on a bracket of width 2c is safe
    let (mut lo, mut hi) = (lambda - c - 1e-12, lambda + c + 1e-12);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid + c * mid.sin() < lambda {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Exact cell averages of the smooth solution on `n_cells` equal cells,
/// valid up to the shock time. Uses `∫ u dλ = [−cos ξ + π t sin²ξ]`.
pub fn burgers_exact_averages(n_cells: usize, t: f64) -> Vec<f64> {
    assert!(t <= SHOCK_TIME, "smooth solution only exists before the shock");
    let prim = |l: f64| {
        let xi = characteristic_foot(l, t);
        -xi.cos() + PI * t * xi.sin() * xi.sin()
    };
    let dx = TAU / n_cells as f64;
    (0..n_cells)
        .map(|k| (prim((k + 1) as f64 * dx) - prim(k as f64 * dx)) / dx)
        .collect()
}

/// Area-weighted L1 distance between the band cells of `u` and a 1D
/// profile, normalized by the band area. Requires every band inside
/// `0 < φ < π/12` to have `profile.len()` cells.
pub fn band_l1_error(grid: &Grid, u: &[f64], profile: &[f64]) -> Metric {
    let mut err = 0.0;
    let mut area = 0.0;
    for b in grid.bands() {
        if b.phi1 < -1e-14 || b.phi2 > BAND_TOP + 1e-14 {
            continue;
        }
        assert_eq!(b.n_cells, profile.len(), "band resolution differs from the profile");
        for i in 0..b.n_cells {
            let c = grid.cell(b.first_cell + i);
            err += c.area * (u[b.first_cell + i] - profile[i]).abs();
            area += c.area;
        }
    }
    Metric {
        kind: MetricKind::L1VsReference,
        value: err / area,
        normalization: area,
    }
}

/// True for cells whose every vertex has `x1 ≥ √2/2`, where the confined
/// potential vanishes identically.
pub fn in_confined_zero_region(grid: &Grid, cell: usize) -> bool {
    let c = grid.cell(cell);
    [c.phi1, c.phi2].iter().all(|&p| {
        [c.lambda1, c.lambda2]
            .iter()
            .all(|&l| crate::geometry::to_cartesian(l, p)[0] >= FRAC_1_SQRT_2)
    })
}
