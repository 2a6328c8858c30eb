//! Energy model for IoT devices powered by ambient RF energy.
//!
//! * [`harvest`]: RC charging curve of the storage capacitor, its
//!   least-squares fit, and harvester open-circuit voltage versus incident power.
//! * [`radio`]: modified-sigmoid mapping between supply current and transmit power.
//! * [`packet`]: wake-up, sleep, airtime and inter-packet overheads of one frame.
//! * [`burst`]: per-bit energy under a draining capacitor and the cumulative
//!   ledger of a multi-packet active cycle.
//! * [`planner`]: packets-per-cycle and recharge-time queries.
//! * [`io`] and [`report`]: CSV ingestion and deterministic report output.
//!
//! All quantities are SI (s, V, A, F, J, bit/s) unless a name says otherwise.

// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod burst;
pub mod error;
pub mod harvest;
pub mod io;
mod lsq;
pub mod packet;
pub mod planner;
pub mod profile;
pub mod radio;
pub mod report;
pub mod units;

pub use error::{Error, Result, Stage};
pub use profile::{DeviceConfig, DeviceProfile, EscState, FrameLayout, PacketPlan};
