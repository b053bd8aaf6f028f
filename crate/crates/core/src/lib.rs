//! Jet-mount geometry co-design for a jet-powered humanoid.
//!
//! A design ([`geometry::GeometryParams`]) is turned into bracket solids,
//! checked by a finite-element safety-factor gate ([`structural`]), written
//! into a robot model ([`dynamics`]) and flown under a momentum QP controller
//! ([`controller`], [`simulation`]). [`optimizer`] searches the design grid
//! with constrained NSGA-II.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod controller;
pub mod dynamics;
pub mod geometry;
pub mod optimizer;
pub mod simulation;
pub mod structural;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/design-space.md")]
    mod design_space {}
    #[doc = include_str!("../../../book/src/structural.md")]
    mod structural {}
    #[doc = include_str!("../../../book/src/flight.md")]
    mod flight {}
    #[doc = include_str!("../../../book/src/optimizer.md")]
    mod optimizer {}
}
