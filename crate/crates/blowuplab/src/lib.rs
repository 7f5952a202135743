//! Numerical laboratory for blow-up of semilinear wave equations with
//! scale-invariant damping and mass: exponent classification, Bessel-based
//! test functions, a radial finite-difference solver with blow-up detection,
//! functional diagnostics, and lifespan power-law sweeps.

pub mod cli_io;
pub mod diagnostics;
pub mod exponents;
pub mod lifespan;
pub mod linode;
pub mod specfun;
pub mod suite;
pub mod testfunc;
pub mod wavesolver;
