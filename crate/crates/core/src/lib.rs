//! Discrete-event simulation of spectrum sharing between cellular service
//! providers.
//!
//! Each provider owns an exclusive pool of licensed channels. When a base
//! station runs out of admissible owned channels it asks the cognitive-radio
//! (CR) sensor nodes sitting on its cell vertices which foreign channels are
//! currently free, scores the answers with the SBAC utility and borrows the
//! best one. The simulator reports call blocking, spectrum efficiency and
//! revenue efficiency per provider.
//!
//! ```no_run
//! use spectrum_share::{engine, Scenario};
//!
//! let scenario = Scenario::default();
//! let out = engine::run(&scenario, &engine::RunOptions::default()).unwrap();
//! println!("blocking rate: {:?}", out.report.blocking_rate);
//! ```

pub mod engine;
pub mod error;
pub mod metrics;
pub mod protocol;
pub mod report;
pub mod sbac;
pub mod traffic;
pub mod world;

pub use engine::scenario::Scenario;
pub use engine::{run, sweep, RunOptions, RunOutput, SweepAxis, SweepRow};
pub use error::{Error, Result};
pub use metrics::{MetricsAccumulator, MetricsReport, ProviderReport};
pub use world::{CellId, ChannelId, CrNodeId, ProviderId};
