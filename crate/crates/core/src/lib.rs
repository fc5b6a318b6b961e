//! Randomly scrambled polynomial lattice rules for integration in weighted
//! reproducing kernel spaces of unbounded dimension.
//!
//! The numeric core is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar for common use.

pub mod cbc;
pub mod cli;
pub mod error;
pub mod gfpoly;
pub mod harness;
pub mod infdim;
pub mod io;
pub mod polylattice;
pub mod real;
pub mod scramble;
pub mod wspace;

#[cfg(test)]
mod testutil;

pub use cbc::{cbc_construct, cbc_construct_with, wce_squared, CbcOptions, Criterion, MeritReport, Search};
pub use error::{Error, Result};
pub use gfpoly::{find_irreducible, is_irreducible, Poly};
pub use harness::{fit_slope, rmse, sweep, ConvergenceRecord, Regime, SweepConfig};
pub use infdim::{plan_fixed, plan_multilevel, FixedPlan, Level, MultilevelPlan, PlanTuning};
pub use polylattice::{generate_points, GeneratingVector, PointSet};
pub use real::{CompensatedSum, Real};
pub use scramble::{scramble, ScrambleKind, ScrambleSpec, ScrambledPointSet};
pub use wspace::{Beta, KernelSpace, ProductIntegrand, Shape, WeightSequence};

pub type WeightSequence64 = WeightSequence<f64>;
pub type WeightSequence32 = WeightSequence<f32>;
pub type KernelSpace64 = KernelSpace<f64>;
pub type KernelSpace32 = KernelSpace<f32>;
pub type ProductIntegrand64 = ProductIntegrand<f64>;
pub type ProductIntegrand32 = ProductIntegrand<f32>;
pub type ScrambledPointSet64<'a> = ScrambledPointSet<'a, f64>;
pub type ScrambledPointSet32<'a> = ScrambledPointSet<'a, f32>;
pub type FixedRule64 = infdim::FixedRule<f64>;
pub type MultilevelRule64 = infdim::MultilevelRule<f64>;
