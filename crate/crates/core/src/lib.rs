//! Contact-interaction dualities for identical particles on a line.

pub mod boundary;
pub mod cli;
pub mod config_space;
pub mod propagator;
pub mod quadrature;
pub mod special;
pub mod spectral;
pub mod statistics;
