//! Independent checks of computed solutions: the Pohozaev identity, a
//! shooting oracle for interval and radial problems, uniqueness and decay
//! probes, and the PDE residual certificate.

mod pohozaev;
mod probes;
mod shooting;

pub use pohozaev::{pohozaev_residual, transformed_gradient_bound, PohozaevReport, PowerSource};
pub use probes::{
    contraction_quantity, residual_certificate, supnorm_decay_scan, uniqueness_probe, DecayRow,
    DecayScan, UniquenessRecord, DECAY_RATIO, MONOTONE_SLACK,
};
pub use shooting::{shooting_solve, shooting_solve_kirchhoff, ShootingSolution};
