//! Joint pilot design and uplink power allocation for multi-cell Massive MIMO.
//!
//! Pilots are built from a canonical orthonormal basis of length `tau_p`, and
//! every user spreads a power budget over the basis vectors. The library
//! provides:
//!
//! * [`network`]: reproducible wrapped-around square-cell layouts with
//!   pathloss and shadow fading.
//! * [`pilots`]: the continuous pilot structure, the combinatorial assignment
//!   structure and the conversions between them.
//! * [`estimation`]: MMSE / LMMSE channel estimation statistics.
//! * [`se`]: closed-form effective SINR and spectral efficiency for MR
//!   detection under ideal hardware, hardware impairments and spatially
//!   correlated fading.
//! * [`gp`]: a small geometric-programming toolkit with a log-barrier solver.
//! * [`optimize`]: max-min fairness by exhaustive search over pilot
//!   assignments and by successive approximation over pilot powers.
//! * [`montecarlo`]: a simulation oracle for every closed form.
//!
//! Data-parallel loops (Monte Carlo realizations, the assignment dictionary)
//! use rayon when the default `parallel` feature is enabled and fall back to
//! plain iterators otherwise. Results do not depend on the thread count.

pub mod error;
pub mod estimation;
pub mod gp;
pub mod montecarlo;
pub mod network;
mod numeric;
pub mod optimize;
pub mod par;
pub mod pilots;
pub mod se;

pub use error::{Error, Result};
pub use network::{NetworkConfig, NetworkRealization};
pub use pilots::{PilotAllocation, PilotAssignment, UserId};
pub use se::{ChannelModel, SinrReport};
