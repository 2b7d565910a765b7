//! Synthesis of polynomial interpolants for pairs of disjoint semialgebraic
//! systems.
//!
//! The pipeline is: build a semidefinite relaxation of a strict-cone
//! certificate ([`relax`]), solve it numerically ([`sdp`]), round the
//! solution with continued fractions ([`round`]) and check the rounded
//! certificate in exact arithmetic ([`validate`]). [`driver`] ties the
//! phases together.

pub mod cert;
pub mod cli;
pub mod driver;
pub mod par;
pub mod poly;
pub mod relax;
pub mod round;
pub mod sas;
pub mod sdp;
pub mod validate;
