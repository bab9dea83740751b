//! Scalar Riemann problems with general (nonconvex) fluxes.
//!
//! Only the value on the interface is built. For `uL < uR` it is the
//! minimizer of the flux over `[uL, uR]` (the convex-envelope construction),
//! for `uL > uR` the maximizer over `[uR, uL]` (concave envelope). The wave
//! fan itself is never reconstructed.

use thiserror::Error;

use crate::poly::Polynomial;

/// Number of uniform samples used for non-polynomial fluxes.
pub const SAMPLES: usize = 257;
/// Golden-section termination width in `u`.
pub const REFINE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RiemannError {
    #[error("non-finite Riemann data uL = {ul}, uR = {ur}")]
    NonFiniteData { ul: f64, ur: f64 },
    #[error("flux is not finite at u = {u}")]
    NonFiniteFlux { u: f64 },
}

/// A one-dimensional flux `u ↦ g(u)` with its derivative.
pub trait Flux1d {
    fn value(&self, u: f64) -> f64;
    fn derivative(&self, u: f64) -> f64;
    /// Polynomial fluxes get exact critical points instead of sampling.
    fn as_polynomial(&self) -> Option<&Polynomial> {
        None
    }
}

impl Flux1d for Polynomial {
    fn value(&self, u: f64) -> f64 {
        self.eval(u)
    }

    fn derivative(&self, u: f64) -> f64 {
        // Horner on the derivative without allocating it
        let c = self.coeffs();
        let mut acc = 0.0;
        for k in (1..c.len()).rev() {
            acc = acc * u + k as f64 * c[k];
        }
        acc
    }

    fn as_polynomial(&self) -> Option<&Polynomial> {
        Some(self)
    }
}

impl<T: Flux1d + ?Sized> Flux1d for &T {
    fn value(&self, u: f64) -> f64 {
        (**self).value(u)
    }
    fn derivative(&self, u: f64) -> f64 {
        (**self).derivative(u)
    }
    fn as_polynomial(&self) -> Option<&Polynomial> {
        (**self).as_polynomial()
    }
}

/// Flux from a pair of closures.
pub struct FnFlux<F, D> {
    f: F,
    df: D,
}

impl<F: Fn(f64) -> f64, D: Fn(f64) -> f64> FnFlux<F, D> {
    pub fn new(f: F, df: D) -> Self {
        Self { f, df }
    }
}

impl<F: Fn(f64) -> f64, D: Fn(f64) -> f64> Flux1d for FnFlux<F, D> {
    fn value(&self, u: f64) -> f64 {
        (self.f)(u)
    }
    fn derivative(&self, u: f64) -> f64 {
        (self.df)(u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaveCategory {
    /// Interior extremum: `g′(u*) = 0`, the fan straddles the interface.
    Sonic,
    /// `u* = uL`: every wave moves right.
    LeftUpwind,
    /// `u* = uR`: every wave moves left.
    RightUpwind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiemannSolution {
    pub u_star: f64,
    pub category: WaveCategory,
    pub flux_at_interface: f64,
}

#[derive(Clone, Copy, PartialEq)]
enum Sense {
    Min,
    Max,
}

impl Sense {
    /// True when `a` is strictly better than `b`.
    fn better(self, a: f64, b: f64) -> bool {
        match self {
            Sense::Min => a < b,
            Sense::Max => a > b,
        }
    }
}

fn checked<F: Flux1d + ?Sized>(flux: &F, u: f64) -> Result<f64, RiemannError> {
    let v = flux.value(u);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(RiemannError::NonFiniteFlux { u })
    }
}

/// Golden-section search for the extremum of `f` on `[a, b]`.
fn golden<G: Fn(f64) -> f64>(f: G, mut a: f64, mut b: f64, sense: Sense) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let key = |x: f64| match sense {
        Sense::Min => f(x),
        Sense::Max => -f(x),
    };
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (key(c), key(d));
    while (b - a).abs() > REFINE_TOL {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = key(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = key(d);
        }
        if c >= d {
            break;
        }
    }
    0.5 * (a + b)
}

/// Interior extremum candidates of `g` on `(lo, hi)`.
fn interior_candidates<F: Flux1d + ?Sized>(flux: &F, lo: f64, hi: f64, sense: Sense) -> Vec<f64> {
    if let Some(p) = flux.as_polynomial() {
        return p.critical_points_in(lo, hi);
    }
    let h = (hi - lo) / (SAMPLES - 1) as f64;
    let xs: Vec<f64> = (0..SAMPLES)
        .map(|i| if i + 1 == SAMPLES { hi } else { lo + i as f64 * h })
        .collect();
    let vs: Vec<f64> = xs.iter().map(|&x| flux.value(x)).collect();
    let best = (0..SAMPLES)
        .reduce(|i, j| if sense.better(vs[j], vs[i]) { j } else { i })
        .unwrap_or(0);
    let (a, b) = (xs[best.saturating_sub(1)], xs[(best + 1).min(SAMPLES - 1)]);
    let x = golden(|u| flux.value(u), a, b, sense);
    let margin = 1e-10 * (hi - lo);
    if x > lo + margin && x < hi - margin {
        vec![x]
    } else {
        Vec::new()
    }
}

/// Interface value of the Riemann problem with left state `ul` and right
/// state `ur`.
///
/// Ties between equally good candidates resolve to `uL`, then interior
/// points in increasing order, then `uR`.
pub fn solve_riemann<F: Flux1d + ?Sized>(
    flux: &F,
    ul: f64,
    ur: f64,
) -> Result<RiemannSolution, RiemannError> {
    if !(ul.is_finite() && ur.is_finite()) {
        return Err(RiemannError::NonFiniteData { ul, ur });
    }
    let gl = checked(flux, ul)?;
    if ul == ur {
        let category = if flux.derivative(ul) < 0.0 {
            WaveCategory::RightUpwind
        } else {
            WaveCategory::LeftUpwind
        };
        return Ok(RiemannSolution {
            u_star: ul,
            category,
            flux_at_interface: gl,
        });
    }
    let gr = checked(flux, ur)?;
    let (sense, lo, hi) = if ul < ur {
        (Sense::Min, ul, ur)
    } else {
        (Sense::Max, ur, ul)
    };

    let mut u_star = ul;
    let mut g_star = gl;
    let mut category = WaveCategory::LeftUpwind;
    for u in interior_candidates(flux, lo, hi, sense) {
        let g = checked(flux, u)?;
        if sense.better(g, g_star) {
            u_star = u;
            g_star = g;
            category = WaveCategory::Sonic;
        }
    }
    if sense.better(gr, g_star) {
        u_star = ur;
        g_star = gr;
        category = WaveCategory::RightUpwind;
    }
    Ok(RiemannSolution {
        u_star,
        category,
        flux_at_interface: g_star,
    })
}

/// Upper bound of `|g′|` over the interval spanned by `ul` and `ur`.
pub fn wave_speed_bound<F: Flux1d + ?Sized>(flux: &F, ul: f64, ur: f64) -> f64 {
    let (lo, hi) = if ul <= ur { (ul, ur) } else { (ur, ul) };
    let mut best = flux.derivative(lo).abs().max(flux.derivative(hi).abs());
    if lo == hi {
        return best;
    }
    if let Some(p) = flux.as_polynomial() {
        let d = p.derivative();
        for u in d.critical_points_in(lo, hi) {
            best = best.max(d.eval(u).abs());
        }
        return best;
    }
    let h = (hi - lo) / (SAMPLES - 1) as f64;
    let mut arg = lo;
    for i in 0..SAMPLES {
        let u = if i + 1 == SAMPLES { hi } else { lo + i as f64 * h };
        let s = flux.derivative(u).abs();
        if s > best {
            best = s;
            arg = u;
        }
    }
    let a = (arg - h).max(lo);
    let b = (arg + h).min(hi);
    let u = golden(|v| flux.derivative(v).abs(), a, b, Sense::Max);
    best.max(flux.derivative(u).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn burgers() -> Polynomial {
        Polynomial::new(vec![0.0, 0.0, 0.5])
    }

    /// Same flux without the polynomial fast path.
    fn opaque(p: &Polynomial) -> impl Flux1d + '_ {
        let d = p.derivative();
        FnFlux::new(move |u| p.eval(u), move |u| d.eval(u))
    }

    #[test]
    fn burgers_transonic_rarefaction_is_sonic() {
        let s = solve_riemann(&burgers(), -1.0, 1.0).unwrap();
        assert_eq!(s.u_star, 0.0);
        assert_eq!(s.category, WaveCategory::Sonic);
        assert_eq!(s.flux_at_interface, 0.0);
    }

    #[test]
    fn burgers_right_moving_shock_is_left_upwind() {
        let s = solve_riemann(&burgers(), 2.0, 0.0).unwrap();
        assert_eq!(s.u_star, 2.0);
        assert_eq!(s.category, WaveCategory::LeftUpwind);
    }

    #[test]
    fn stationary_shock_tie_goes_left() {
        let s = solve_riemann(&burgers(), 1.0, -1.0).unwrap();
        assert_eq!(s.u_star, 1.0);
        assert_eq!(s.category, WaveCategory::LeftUpwind);
        let s = solve_riemann(&opaque(&burgers()), 1.0, -1.0).unwrap();
        assert_eq!(s.u_star, 1.0);
    }

    #[test]
    fn cubic_interior_minimum() {
        let p = Polynomial::new(vec![0.0, -1.0, 0.0, 1.0]);
        let s = solve_riemann(&p, -0.9, 1.2).unwrap();
        assert!((s.u_star - 1.0 / 3f64.sqrt()).abs() < 1e-14);
        assert_eq!(s.category, WaveCategory::Sonic);
        // brute-force check of the argmin at 10⁶ points
        let n = 1_000_000;
        let (mut arg, mut best) = (0.0, f64::INFINITY);
        for i in 0..=n {
            let u = -0.9 + 2.1 * i as f64 / n as f64;
            let v = p.eval(u);
            if v < best {
                best = v;
                arg = u;
            }
        }
        assert!((arg - s.u_star).abs() < 3e-6);
        // sampled path agrees
        let s2 = solve_riemann(&opaque(&p), -0.9, 1.2).unwrap();
        assert!((s2.u_star - s.u_star).abs() < 1e-6);
        assert_eq!(s2.category, WaveCategory::Sonic);
    }

    #[test]
    fn equal_states() {
        let s = solve_riemann(&burgers(), 0.7, 0.7).unwrap();
        assert_eq!(s.u_star, 0.7);
        assert_eq!(s.flux_at_interface, burgers().eval(0.7));
    }

    #[test]
    fn non_finite_flux_is_an_error() {
        let f = FnFlux::new(|u: f64| 1.0 / u, |u: f64| -1.0 / (u * u));
        assert!(matches!(
            solve_riemann(&f, 0.0, 1.0),
            Err(RiemannError::NonFiniteFlux { .. })
        ));
        assert!(solve_riemann(&burgers(), f64::NAN, 1.0).is_err());
    }

    #[test]
    fn wave_speed_examples() {
        assert_eq!(wave_speed_bound(&burgers(), -1.0, 1.0), 1.0);
        let lin = Polynomial::new(vec![0.0, -3.0]);
        assert_eq!(wave_speed_bound(&lin, 5.0, -2.0), 3.0);
        let cubic = Polynomial::new(vec![0.0, 0.0, 0.0, 1.0]);
        assert_eq!(wave_speed_bound(&cubic, 0.0, 2.0), 12.0);
        // interior maximum of |g′|: g = u − u³/3 on [−1, 1] has g′ = 1 − u², max 1 at 0
        let g = Polynomial::new(vec![0.0, 1.0, 0.0, -1.0 / 3.0]);
        assert_eq!(wave_speed_bound(&g, -1.0, 1.0), 1.0);
        assert!((wave_speed_bound(&opaque(&g), -1.0, 1.0) - 1.0).abs() < 1e-12);
    }

    fn brute(p: &Polynomial, ul: f64, ur: f64) -> f64 {
        let n = 100_000;
        let (lo, hi) = (ul.min(ur), ul.max(ur));
        let vals = (0..=n).map(|i| p.eval(lo + (hi - lo) * i as f64 / n as f64));
        if ul < ur {
            vals.fold(f64::INFINITY, f64::min)
        } else {
            vals.fold(f64::NEG_INFINITY, f64::max)
        }
    }

    fn poly_strategy() -> impl Strategy<Value = Polynomial> {
        prop::collection::vec(-2.0f64..2.0, 1..=6).prop_map(Polynomial::new)
    }

    proptest! {
        #[test]
        fn matches_brute_force_extremum(p in poly_strategy(), ul in -2.0f64..2.0, ur in -2.0f64..2.0) {
            let s = solve_riemann(&p, ul, ur).unwrap();
            let b = brute(&p, ul, ur);
            // the dense grid can only be worse than the true extremum
            if ul < ur {
                prop_assert!(s.flux_at_interface <= b + 1e-12);
            } else if ul > ur {
                prop_assert!(s.flux_at_interface >= b - 1e-12);
            }
            prop_assert!((s.flux_at_interface - b).abs() < 1e-6);
            match s.category {
                WaveCategory::LeftUpwind => prop_assert_eq!(s.u_star, ul),
                WaveCategory::RightUpwind => prop_assert_eq!(s.u_star, ur),
                WaveCategory::Sonic => {
                    prop_assert!(s.u_star > ul.min(ur) && s.u_star < ul.max(ur));
                    let scale = 1.0 + wave_speed_bound(&p, ul, ur);
                    prop_assert!(p.derivative().eval(s.u_star).abs() <= 1e-10 * scale);
                }
            }
        }

        #[test]
        fn consistency_at_equal_states(p in poly_strategy(), u in -2.0f64..2.0) {
            let s = solve_riemann(&p, u, u).unwrap();
            prop_assert_eq!(s.flux_at_interface, p.eval(u));
        }

        #[test]
        fn godunov_flux_is_monotone(p in poly_strategy(), u in -2.0f64..2.0, du in 0.0f64..1.0, v in -2.0f64..2.0) {
            // nondecreasing in the left state, nonincreasing in the right state
            let a = solve_riemann(&p, u, v).unwrap().flux_at_interface;
            let b = solve_riemann(&p, u + du, v).unwrap().flux_at_interface;
            prop_assert!(b >= a - 1e-12);
            let c = solve_riemann(&p, v, u).unwrap().flux_at_interface;
            let d = solve_riemann(&p, v, u + du).unwrap().flux_at_interface;
            prop_assert!(d <= c + 1e-12);
        }

        #[test]
        fn even_flux_mirrors(c2 in -2.0f64..2.0, c4 in -2.0f64..2.0, ul in -2.0f64..2.0, ur in -2.0f64..2.0) {
            let p = Polynomial::new(vec![0.0, 0.0, c2, 0.0, c4]);
            let s = solve_riemann(&p, ul, ur).unwrap();
            let m = solve_riemann(&p, -ur, -ul).unwrap();
            prop_assert!((s.flux_at_interface - m.flux_at_interface).abs() < 1e-12);
        }

        #[test]
        fn sampled_path_agrees_with_exact_path(p in poly_strategy(), ul in -2.0f64..2.0, ur in -2.0f64..2.0) {
            let exact = solve_riemann(&p, ul, ur).unwrap().flux_at_interface;
            let sampled = solve_riemann(&opaque(&p), ul, ur).unwrap().flux_at_interface;
            prop_assert!((exact - sampled).abs() < 1e-6);
        }
    }
}
