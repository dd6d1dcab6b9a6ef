//! Link-level simulation and analysis of hybrid reflection modulation (HRM).
//!
//! A reconfigurable surface is split into groups; information is carried by
//! how many groups amplify while the rest reflect passively. The crate
//! provides the channel model, the transmitter/receiver chain with its
//! reference schemes, closed-form error and rate analysis, power accounting,
//! and a deterministic parallel Monte Carlo engine.
//!
//! All physics is generic over [`Real`] (`f32` or `f64`); the aliases at the
//! crate root fix the scalar to `f64`, with `*32` variants for `f32`.

pub mod analysis;
pub mod channel;
pub mod error;
pub mod modem;
pub mod num;
pub mod power;
pub mod rng;
pub mod simkit;
pub mod special;

pub use error::{HrmError, Result};
pub use num::Real;
pub use rng::{Streams, TrialRng};

pub type Geometry = channel::LinkGeometry<f64>;
pub type Layout = channel::RisLayout<f64>;
pub type Channel = channel::ChannelRealization<f64>;
pub type Model = channel::ChannelModel<f64>;
pub type Config = modem::HrmConfig<f64>;
pub type Symbols = modem::SymbolSet<f64>;
pub type Power = power::PowerModel<f64>;
pub type Sweep = simkit::SweepSpec<f64>;

pub type Geometry32 = channel::LinkGeometry<f32>;
pub type Layout32 = channel::RisLayout<f32>;
pub type Channel32 = channel::ChannelRealization<f32>;
pub type Model32 = channel::ChannelModel<f32>;
pub type Config32 = modem::HrmConfig<f32>;
pub type Symbols32 = modem::SymbolSet<f32>;
pub type Power32 = power::PowerModel<f32>;
pub type Sweep32 = simkit::SweepSpec<f32>;
