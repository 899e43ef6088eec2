//! Discretized Neumann and periodic eigenproblems.
//!
//! All tensor-product domains share [`GridOperator`], a cell-centered
//! finite-volume Laplacian written as a symmetrized Kronecker sum. The radial
//! ball uses a one-dimensional grid solved by a Sturm count in flux form.

mod boxes;
mod grid;
mod radial;
pub mod richardson;
mod torus;

use serde::{Deserialize, Serialize};

pub use boxes::{
    neumann_box_3d, neumann_box_k_ground, two_body_box_ground, two_body_box_ground_with, BoxOptions,
    DEFAULT_MEMORY_BUDGET, MAX_BOX6_POINTS_PER_DIM,
};
pub use grid::{cell_average_radial, Axis, GridOperator};
pub use radial::{
    neumann_ball_eigenvalues, neumann_ball_ground, wavenumber_h, wavenumber_h_for_length, RadialGrid,
    Wavenumber,
};
pub use torus::{
    torus_grading, torus_operator, two_body_torus_ground, two_body_torus_ground_with, TorusOptions,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    RadialBall,
    BoxNeumann3d,
    Torus3d,
    BoxNeumann6d,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extrapolation {
    pub value: f64,
    /// Convergence order used (assumed) or measured (observed).
    pub order: f64,
    pub order_observed: bool,
    /// `(points_per_dim, eigenvalue)` for every grid used.
    pub grids: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralResult {
    pub domain_kind: DomainKind,
    pub extent: f64,
    pub points_per_dim: usize,
    /// Lowest eigenvalues, nondecreasing.
    pub eigenvalues: Vec<f64>,
    /// `‖Mv − Ev‖ / ‖v‖` per eigenpair.
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub extrapolated: Option<Extrapolation>,
    /// Radial ground state `(r, u(r) = r φ(r))` at cell centers; ball only.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub samples: Vec<(f64, f64)>,
    pub potential_ref: String,
}

impl SpectralResult {
    pub fn ground(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// Extrapolated ground energy if available, else the finest-grid value.
    pub fn best(&self) -> f64 {
        self.extrapolated.as_ref().map_or(self.eigenvalues[0], |e| e.value)
    }
}
