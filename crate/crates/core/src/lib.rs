//! Taylor-Hood finite element solver for the 2D incompressible
//! Navier-Stokes equations with a choice of nonlinear forms.

pub mod assembly;
pub mod fespace;
pub mod linsolve;
pub mod mesh;
pub mod timestep;
pub mod diagnostics;
pub mod bench;
pub mod verify;
