//! Multi-cell TDD massive MIMO downlink: channel generation, pilot-based
//! estimation, linear precoding and Monte-Carlo BER measurement.

pub mod asymptotics;
pub mod channel;
pub mod error;
pub mod geometry;
pub mod gramstats;
pub mod harness;
pub mod linalg;
pub mod modem;
pub mod precoding;
pub mod rng;
pub mod sysmodel;
pub mod training;

pub use error::{Error, Result};
pub use geometry::{BetaTensor, Placement, Point};
pub use harness::{BerPoint, PowerAllocation, Scenario};
pub use linalg::CMatrix;
pub use precoding::Precoder;
pub use rng::{Purpose, Streams};
pub use sysmodel::{CsiMode, ModulationSpec, PrecoderKind, RzfZeta, SystemConfig};
pub use training::PowerGrid;
