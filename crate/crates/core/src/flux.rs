//! Geometry-compatible gradient fluxes.
//!
//! A model is a scalar potential `h(x, u)` on a neighbourhood of the
//! sphere; its flux vector is `F = n × ∇h`. The fast path is the separable
//! family `h = Σ r_j(x_j) f_j(u)` (with `r_j(x) = x` giving the homogeneous
//! fluxes); an arbitrary `h` is accepted through [`FluxModel::general`] with
//! finite-difference derivatives.
//!
//! In the local frame `F = F_λ i_λ + F_φ i_φ` with `F_λ = −∂_φ h` and
//! `F_φ = ∂_λ h / cos φ`. The split fluxes used to pose the 1D Riemann
//! problems are `g = F_λ / cos φ` (across `λ = const` edges) and
//! `k = F_φ cos φ` (across `φ = const` edges).

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::geometry::{cross, is_pole, tangent_basis, to_cartesian, GeometryError, SpherePoint, TangentVector, Vec3};
use crate::grid::{CellId, Edge, EdgeId, EdgeKind, Grid};
use crate::poly::Polynomial;
use crate::riemann::Flux1d;
use crate::testcases::{psi_cutoff, psi_cutoff_derivative};

/// Step for finite differences in `u` and `x`.
const FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FluxError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("no interface value supplied for edge {edge}")]
    MissingEdgeValue { edge: EdgeId },
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type Potential = Arc<dyn Fn(Vec3, f64) -> f64 + Send + Sync>;

/// The `u`-dependence `f_j(u)` of one Cartesian flux component.
#[derive(Clone)]
pub enum ComponentFlux {
    Polynomial(Polynomial),
    Custom { f: ScalarFn, df: ScalarFn },
}

impl ComponentFlux {
    pub fn zero() -> Self {
        ComponentFlux::Polynomial(Polynomial::zero())
    }

    /// `c·u`
    pub fn linear(c: f64) -> Self {
        ComponentFlux::Polynomial(Polynomial::new(vec![0.0, c]))
    }

    /// `a·u²/2`
    pub fn burgers(a: f64) -> Self {
        ComponentFlux::Polynomial(Polynomial::new(vec![0.0, 0.0, 0.5 * a]))
    }

    /// Coefficients in ascending powers of `u`.
    pub fn polynomial(coeffs: Vec<f64>) -> Self {
        ComponentFlux::Polynomial(Polynomial::new(coeffs))
    }

    pub fn custom<F, D>(f: F, df: D) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        ComponentFlux::Custom {
            f: Arc::new(f),
            df: Arc::new(df),
        }
    }

    pub fn value(&self, u: f64) -> f64 {
        match self {
            ComponentFlux::Polynomial(p) => p.eval(u),
            ComponentFlux::Custom { f, .. } => f(u),
        }
    }

    pub fn derivative(&self, u: f64) -> f64 {
        match self {
            ComponentFlux::Polynomial(p) => Flux1d::derivative(p, u),
            ComponentFlux::Custom { df, .. } => df(u),
        }
    }

    pub fn as_polynomial(&self) -> Option<&Polynomial> {
        match self {
            ComponentFlux::Polynomial(p) => Some(p),
            ComponentFlux::Custom { .. } => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ComponentFlux::Polynomial(p) if p.is_zero())
    }
}

impl fmt::Debug for ComponentFlux {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ComponentFlux::Polynomial(p) => write!(f, "poly{:?}", p.coeffs()),
            ComponentFlux::Custom { .. } => f.write_str("custom"),
        }
    }
}

/// The spatial weight `r_j(x_j)` of one component, with `q_j = r_j′`.
#[derive(Clone)]
pub enum Weight {
    /// `r(x) = x`, the homogeneous case.
    Identity,
    /// `r(x) = ψ(x)·x` with the C¹ cutoff ψ vanishing for `x ≥ √2/2`.
    CutoffPsi,
    Polynomial(Polynomial),
    Custom { r: ScalarFn, q: ScalarFn },
}

impl Weight {
    pub fn value(&self, x: f64) -> f64 {
        match self {
            Weight::Identity => x,
            Weight::CutoffPsi => psi_cutoff(x) * x,
            Weight::Polynomial(p) => p.eval(x),
            Weight::Custom { r, .. } => r(x),
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            Weight::Identity => 1.0,
            Weight::CutoffPsi => psi_cutoff_derivative(x) * x + psi_cutoff(x),
            Weight::Polynomial(p) => Flux1d::derivative(p, x),
            Weight::Custom { q, .. } => q(x),
        }
    }
}

impl fmt::Debug for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Weight::Identity => f.write_str("identity"),
            Weight::CutoffPsi => f.write_str("cutoff_psi"),
            Weight::Polynomial(p) => write!(f, "poly{:?}", p.coeffs()),
            Weight::Custom { .. } => f.write_str("custom"),
        }
    }
}

/// One term `r_j(x_j) f_j(u)` of a separable potential.
#[derive(Debug, Clone)]
pub struct Component {
    pub f: ComponentFlux,
    pub r: Weight,
}

impl Component {
    pub fn homogeneous(f: ComponentFlux) -> Self {
        Self {
            f,
            r: Weight::Identity,
        }
    }
}

#[derive(Clone)]
pub enum FluxModel {
    Separable {
        components: [Component; 3],
        label: String,
    },
    General {
        h: Potential,
        label: String,
    },
}

impl fmt::Debug for FluxModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FluxModel::Separable { components, label } => f
                .debug_struct("Separable")
                .field("label", label)
                .field("components", components)
                .finish(),
            FluxModel::General { label, .. } => {
                f.debug_struct("General").field("label", label).finish()
            }
        }
    }
}

impl FluxModel {
    /// `h = x1 f1(u) + x2 f2(u) + x3 f3(u)`.
    pub fn homogeneous(label: impl Into<String>, f: [ComponentFlux; 3]) -> Self {
        let [f1, f2, f3] = f;
        FluxModel::Separable {
            components: [
                Component::homogeneous(f1),
                Component::homogeneous(f2),
                Component::homogeneous(f3),
            ],
            label: label.into(),
        }
    }

    pub fn separable(label: impl Into<String>, components: [Component; 3]) -> Self {
        FluxModel::Separable {
            components,
            label: label.into(),
        }
    }

    /// Arbitrary smooth potential `h(x, u)`, defined near the sphere.
    pub fn general<H>(label: impl Into<String>, h: H) -> Self
    where
        H: Fn(Vec3, f64) -> f64 + Send + Sync + 'static,
    {
        FluxModel::General {
            h: Arc::new(h),
            label: label.into(),
        }
    }

    pub fn zero() -> Self {
        Self::homogeneous(
            "zero",
            [ComponentFlux::zero(), ComponentFlux::zero(), ComponentFlux::zero()],
        )
    }

    pub fn label(&self) -> &str {
        match self {
            FluxModel::Separable { label, .. } | FluxModel::General { label, .. } => label,
        }
    }

    /// `h(x, u)` at a point of the sphere.
    pub fn h_eval(&self, point: &SpherePoint, u: f64) -> f64 {
        self.h_at(point.cart, u)
    }

    fn h_at(&self, x: Vec3, u: f64) -> f64 {
        match self {
            FluxModel::Separable { components, .. } => components
                .iter()
                .zip(x)
                .map(|(c, xj)| if c.f.is_zero() { 0.0 } else { c.r.value(xj) * c.f.value(u) })
                .sum(),
            FluxModel::General { h, .. } => h(x, u),
        }
    }

    /// `Φ = ∇_x h` at `(x, u)`.
    pub fn ambient_gradient(&self, x: Vec3, u: f64) -> Vec3 {
        match self {
            FluxModel::Separable { components, .. } => {
                let mut g = [0.0; 3];
                for j in 0..3 {
                    let c = &components[j];
                    if !c.f.is_zero() {
                        g[j] = c.r.derivative(x[j]) * c.f.value(u);
                    }
                }
                g
            }
            FluxModel::General { h, .. } => {
                let mut g = [0.0; 3];
                for j in 0..3 {
                    let mut xp = x;
                    let mut xm = x;
                    xp[j] += FD_STEP;
                    xm[j] -= FD_STEP;
                    g[j] = (h(xp, u) - h(xm, u)) / (2.0 * FD_STEP);
                }
                g
            }
        }
    }

    /// `F = n × ∇h` in the local frame.
    pub fn tangent_flux(&self, point: &SpherePoint, u: f64) -> Result<TangentVector, FluxError> {
        let (il, ip) = tangent_basis(point.lambda, point.phi)?;
        let f = cross(point.normal(), self.ambient_gradient(point.cart, u));
        let dot = |a: Vec3, b: Vec3| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        Ok(TangentVector::new(dot(f, il), dot(f, ip), *point)?)
    }

    /// Weights `a_j` with `g(u) = Σ a_j f_j(u)` at `(λ, φ)` (separable only).
    fn g_weights(components: &[Component; 3], lambda: f64, phi: f64) -> [f64; 3] {
        let x = to_cartesian(lambda, phi);
        let t = phi.tan();
        let (sl, cl) = lambda.sin_cos();
        [
            t * components[0].r.derivative(x[0]) * cl,
            t * components[1].r.derivative(x[1]) * sl,
            -components[2].r.derivative(x[2]),
        ]
    }

    fn k_weights(components: &[Component; 3], lambda: f64, phi: f64) -> [f64; 3] {
        if is_pole(phi) {
            return [0.0; 3];
        }
        let x = to_cartesian(lambda, phi);
        let cp = phi.cos();
        let (sl, cl) = lambda.sin_cos();
        [
            -sl * components[0].r.derivative(x[0]) * cp,
            cl * components[1].r.derivative(x[1]) * cp,
            0.0,
        ]
    }

    /// λ-directional flux `g = F_λ / cos φ`, posed across `λ = const` edges.
    pub fn g_flux(&self, lambda: f64, phi: f64, u: f64) -> Result<f64, FluxError> {
        Ok(self.g_line(lambda, phi)?.value(u))
    }

    /// φ-directional flux `k = F_φ cos φ`, posed across `φ = const` edges.
    pub fn k_flux(&self, lambda: f64, phi: f64, u: f64) -> f64 {
        self.k_line(lambda, phi).value(u)
    }

    /// `u ↦ g(λ, φ, u)` with the coordinates frozen.
    pub fn g_line(&self, lambda: f64, phi: f64) -> Result<LineFlux, FluxError> {
        if is_pole(phi) {
            return Err(GeometryError::PoleSingular { phi }.into());
        }
        Ok(match self {
            FluxModel::Separable { components, .. } => {
                LineFlux::combine(Self::g_weights(components, lambda, phi), components)
            }
            FluxModel::General { .. } => {
                let model = self.clone();
                let p = SpherePoint::new(lambda, phi)?;
                LineFlux::closure(move |u| {
                    model.tangent_flux(&p, u).map(|t| t.f_lambda).unwrap_or(f64::NAN) / p.phi.cos()
                })
            }
        })
    }

    /// `u ↦ k(λ, φ, u)` with the coordinates frozen.
    pub fn k_line(&self, lambda: f64, phi: f64) -> LineFlux {
        match self {
            FluxModel::Separable { components, .. } => {
                LineFlux::combine(Self::k_weights(components, lambda, phi), components)
            }
            FluxModel::General { .. } => {
                if is_pole(phi) {
                    return LineFlux::combine([0.0; 3], &Self::zero_components());
                }
                let model = self.clone();
                let p = SpherePoint::new(lambda, phi).expect("latitude checked");
                LineFlux::closure(move |u| {
                    model.tangent_flux(&p, u).map(|t| t.f_phi).unwrap_or(f64::NAN) * p.phi.cos()
                })
            }
        }
    }

    fn zero_components() -> [Component; 3] {
        [
            Component::homogeneous(ComponentFlux::zero()),
            Component::homogeneous(ComponentFlux::zero()),
            Component::homogeneous(ComponentFlux::zero()),
        ]
    }

    /// Outward flux of the edge's left cell at the frozen value `u_star`:
    /// `−(h(e², u) − h(e¹, u))`. The right cell receives the negation.
    pub fn edge_flux(&self, edge: &Edge, u_star: f64) -> f64 {
        -(self.h_at(edge.p2.cart, u_star) - self.h_at(edge.p1.cart, u_star))
    }

    /// [`edge_flux`](Self::edge_flux) as a function of `u`.
    pub fn edge_line(&self, edge: &Edge) -> LineFlux {
        match self {
            FluxModel::Separable { components, .. } => {
                let mut w = [0.0; 3];
                for j in 0..3 {
                    let r = &components[j].r;
                    w[j] = -(r.value(edge.p2.cart[j]) - r.value(edge.p1.cart[j]));
                }
                LineFlux::combine(w, components)
            }
            FluxModel::General { .. } => {
                let model = self.clone();
                let edge = edge.clone();
                LineFlux::closure(move |u| model.edge_flux(&edge, u))
            }
        }
    }

    /// Directional 1D flux for the Riemann problem across `edge`, with
    /// coordinates frozen at the edge midpoint. `None` for pole edges.
    pub fn riemann_line(&self, edge: &Edge) -> Option<LineFlux> {
        if edge.is_degenerate() {
            return None;
        }
        let m = &edge.midpoint;
        Some(match edge.kind {
            EdgeKind::Phi => self.g_line(m.lambda, m.phi).expect("phi-edge midpoints avoid the poles"),
            EdgeKind::Lambda => self.k_line(m.lambda, m.phi),
        })
    }

    /// Approximate divergence `I_R / A_R` over a cell, given an interface
    /// value for each of its edges.
    pub fn discrete_divergence(
        &self,
        grid: &Grid,
        cell: CellId,
        edge_values: &HashMap<EdgeId, f64>,
    ) -> Result<f64, FluxError> {
        let c = grid.cell(cell);
        let mut total = 0.0;
        for &(e, sign) in &c.edges {
            let u = *edge_values
                .get(&e)
                .ok_or(FluxError::MissingEdgeValue { edge: e })?;
            total += sign * self.edge_flux(grid.edge(e), u);
        }
        Ok(total / c.area)
    }
}

#[derive(Clone)]
enum LineKind {
    Polynomial(Polynomial),
    Combination {
        weights: [f64; 3],
        parts: [ComponentFlux; 3],
    },
    Closure(ScalarFn),
}

/// A frozen-coordinate flux `u ↦ Σ w_j f_j(u)` (or an opaque closure for
/// general potentials). Collapses to a single polynomial when every part is
/// polynomial, which gives the Riemann solver exact critical points.
#[derive(Clone)]
pub struct LineFlux {
    kind: LineKind,
}

impl LineFlux {
    fn combine(weights: [f64; 3], components: &[Component; 3]) -> Self {
        let all_poly = components.iter().all(|c| c.f.as_polynomial().is_some());
        if all_poly {
            let mut p = Polynomial::zero();
            for j in 0..3 {
                if weights[j] != 0.0 {
                    p.add_scaled(components[j].f.as_polynomial().expect("checked"), weights[j]);
                }
            }
            LineFlux {
                kind: LineKind::Polynomial(p),
            }
        } else {
            LineFlux {
                kind: LineKind::Combination {
                    weights,
                    parts: [
                        components[0].f.clone(),
                        components[1].f.clone(),
                        components[2].f.clone(),
                    ],
                },
            }
        }
    }

    fn closure<F: Fn(f64) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        LineFlux {
            kind: LineKind::Closure(Arc::new(f)),
        }
    }

    /// True when the flux vanishes for every `u`.
    pub fn is_identically_zero(&self) -> bool {
        match &self.kind {
            LineKind::Polynomial(p) => p.is_zero(),
            LineKind::Combination { weights, parts } => weights
                .iter()
                .zip(parts)
                .all(|(w, p)| *w == 0.0 || p.is_zero()),
            LineKind::Closure(_) => false,
        }
    }
}

impl Flux1d for LineFlux {
    fn value(&self, u: f64) -> f64 {
        match &self.kind {
            LineKind::Polynomial(p) => p.eval(u),
            LineKind::Combination { weights, parts } => weights
                .iter()
                .zip(parts)
                .map(|(w, p)| if *w == 0.0 { 0.0 } else { w * p.value(u) })
                .sum(),
            LineKind::Closure(f) => f(u),
        }
    }

    fn derivative(&self, u: f64) -> f64 {
        match &self.kind {
            LineKind::Polynomial(p) => Flux1d::derivative(p, u),
            LineKind::Combination { weights, parts } => weights
                .iter()
                .zip(parts)
                .map(|(w, p)| if *w == 0.0 { 0.0 } else { w * p.derivative(u) })
                .sum(),
            LineKind::Closure(f) => {
                let h = FD_STEP * (1.0 + u.abs());
                (f(u + h) - f(u - h)) / (2.0 * h)
            }
        }
    }

    fn as_polynomial(&self) -> Option<&Polynomial> {
        match &self.kind {
            LineKind::Polynomial(p) => Some(p),
            _ => None,
        }
    }
}
