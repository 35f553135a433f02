//! Symbolic-numeric analysis of Lagrangians affine in the acceleration.

pub mod expr;
pub mod model;
pub mod catalog;
pub mod constraints;
pub mod dynamics;
pub mod verify;
