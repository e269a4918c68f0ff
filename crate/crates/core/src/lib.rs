//! Type inference for an ML calculus with overloaded record labels, tuples
//! and semi-explicit first-class polymorphism, by solving constraints that
//! may suspend until the shape of a type is known.

pub mod congen;
pub mod constraint;
pub mod driver;
pub mod oracle;
pub mod surface;
pub mod types;
pub mod solver;
pub mod unify;
