//! Design-space exploration toolkit for FHE accelerators.
//!
//! Bit-exact functional references ([`ntt`], [`rns`]) for the kernels an
//! accelerator pipelines, closed-form cycle and multiplier-count models for
//! Group- and Grid-style key-switching pipelines ([`perfmodel`]), a
//! cycle-level transpose network simulator ([`transpose`]), and a
//! cycle-approximate heterogeneous cluster model with a mixed-workload
//! scheduler ([`flashsim`], [`scheduler`]).

pub mod checks;
pub mod flashsim;
pub mod modarith;
pub mod ntt;
pub mod oracle;
pub mod perfmodel;
pub mod rns;
pub mod scheduler;
pub mod transpose;
