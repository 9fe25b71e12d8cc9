#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod quad;
pub mod stable;
pub mod lattice;
pub mod linalg;
pub mod rng;
pub mod stats;
pub mod sampler;
pub mod diagnostics;
pub mod rcm;
pub mod scaling;
