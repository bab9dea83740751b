//! Finite volume schemes for scalar conservation laws on the unit sphere.
//!
//! The flux is always a gradient flux `F = n × ∇h(x, u)`, and every edge
//! flux is the exact line integral `−(h(e², u) − h(e¹, u))` at a frozen
//! interface value `u`. Constant states are therefore exact fixed points of
//! both the first-order Godunov stepper and its second-order GRP extension,
//! on any web grid.

pub mod geometry;
pub mod flux;
pub mod godunov;
pub mod grid;
pub mod grp;
pub mod poly;
pub mod riemann;
pub mod testcases;
