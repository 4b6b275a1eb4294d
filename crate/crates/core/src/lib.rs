//! Group and phase velocities of spatially confined free-space wavepackets.
//!
//! Three independent routes to the same pair of numbers:
//!
//! * momentum-space spectral averages ([`spectra`], [`velocimetry`]),
//! * real-space beams and centroid tracking of propagated packets
//!   ([`beams`], [`wavepacket`]),
//! * electromagnetic field theory on exact plane-wave superpositions and the
//!   Riemann–Silberstein operator formalism ([`emfield`], [`rs_quantum`]).
//!
//! Units: `c = 1`, lengths in `1/k0`, times in `1/(c k0)`, `hbar = 1`.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod beams;
pub mod cli;
pub mod emfield;
pub mod error;
pub mod io;
pub mod numerics;
pub mod par;
pub mod rs_quantum;
pub mod selftest;
pub mod spectra;
pub mod velocimetry;
pub mod wavepacket;

pub use error::{Error, Result};
