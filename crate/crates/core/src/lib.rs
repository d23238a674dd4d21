//! Adaptive stabilized finite elements for advection-diffusion-reaction
//! problems in 2D.
//!
//! A continuous trial solution is obtained by minimizing the residual of a
//! discontinuous Galerkin formulation (SWIP diffusion with upwind advection)
//! in the dual of the broken test space. The Riesz representative of the
//! residual comes for free from the saddle-point system and drives Dörfler
//! marking with newest-vertex bisection.

pub mod adapt;
pub mod assembly;
pub mod config;
pub mod estimate;
pub mod io;
pub mod linalg;
pub mod mesh;
mod par;
pub mod problem;
pub mod solver;
pub mod spaces;
pub use par::configure_threads;
