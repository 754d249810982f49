//! Finite-model workbench for diagram signatures and dependent-sorted
//! first-order (FOLDS) theories.
//!
//! The crate validates signatures presented as finite inverse categories,
//! checks finite models against axioms, computes indiscernibilities and
//! univalence through the generic joker-derivative construction, and
//! enumerates and classifies equivalences between models.

pub mod corpus;
pub mod dsl;
pub mod equiv;
pub mod folds;
pub mod indisc;
pub mod sigcore;
pub mod structure;
