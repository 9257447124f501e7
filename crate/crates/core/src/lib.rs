#![allow(clippy::needless_range_loop)]

pub mod analysis;
pub mod atom;
pub mod budget;
pub mod calculus;
pub mod catalog;
pub mod cli;
pub mod dsl;
pub mod elementary;
pub mod equation;
pub mod evaluate;
pub mod expr;
pub mod fieldgeom;
pub mod gcd;
pub mod geometry;
pub mod jetpoint;
pub mod modp;
pub mod numeric;
pub mod poly;
pub mod rational;
pub mod report;
pub mod runner;
