//! Semi-wave profiles, spreading speeds and free-boundary simulation for
//! cooperative reaction systems with nonlocal (convolution) diffusion.

pub mod asymptotics;
pub mod fbsolver;
pub mod kernels;
pub mod lattice;
pub mod quadrature;
pub mod reaction;
pub mod semiwave;
