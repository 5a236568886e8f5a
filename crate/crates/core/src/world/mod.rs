//! Providers, licensed channels, the cell grid and ground-truth occupancy.

pub mod hex;
pub mod occupancy;

pub use hex::{build_topology, Cell, CrNode, Hex, Point, Site, Topology};
pub use occupancy::Occupancy;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ProviderId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ChannelId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CrNodeId(pub usize);

#[derive(Debug, Clone)]
pub struct ServiceProvider {
    pub id: ProviderId,
    pub licensed_channels: Vec<ChannelId>,
    /// Unit price, currency per second per channel.
    pub alpha: f64,
}

#[derive(Debug, Clone)]
pub struct Channel {
    pub id: ChannelId,
    pub owner: ProviderId,
    pub center_freq_hz: f64,
    pub capacity: u32,
}

/// Channel plan: how many channels each provider licenses and where they
/// sit in frequency.
#[derive(Debug, Clone)]
pub struct ChannelPlan {
    pub channels_per_provider: Vec<usize>,
    pub capacity: u32,
    pub base_freq_hz: f64,
    pub spacing_hz: f64,
}

/// Static description of the simulated area.
#[derive(Debug, Clone)]
pub struct World {
    pub topology: Topology,
    pub providers: Vec<ServiceProvider>,
    pub channels: Vec<Channel>,
}

impl World {
    /// Channels are numbered consecutively by owner; channel `i` sits at
    /// `base + i * spacing`.
    pub fn new(topology: Topology, plan: &ChannelPlan, alpha: &[f64]) -> Result<Self> {
        let n = topology.n_providers;
        if plan.channels_per_provider.len() != n {
            return Err(Error::config(format!(
                "channels_per_provider has {} entries for {n} providers",
                plan.channels_per_provider.len()
            )));
        }
        if alpha.len() != n {
            return Err(Error::config(format!("alpha has {} entries for {n} providers", alpha.len())));
        }
        if let Some(a) = alpha.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
            return Err(Error::config(format!("alpha must be > 0, got {a}")));
        }
        if plan.capacity == 0 {
            return Err(Error::config("channel capacity must be >= 1"));
        }
        if !(plan.base_freq_hz > 0.0 && plan.spacing_hz > 0.0) {
            return Err(Error::config("base frequency and channel spacing must be > 0"));
        }

        let mut channels = Vec::new();
        let mut providers = Vec::with_capacity(n);
        for (p, (&count, &alpha)) in plan.channels_per_provider.iter().zip(alpha).enumerate() {
            let mut licensed = Vec::with_capacity(count);
            for _ in 0..count {
                let id = ChannelId(channels.len());
                channels.push(Channel {
                    id,
                    owner: ProviderId(p),
                    center_freq_hz: plan.base_freq_hz + id.0 as f64 * plan.spacing_hz,
                    capacity: plan.capacity,
                });
                licensed.push(id);
            }
            providers.push(ServiceProvider { id: ProviderId(p), licensed_channels: licensed, alpha });
        }
        Ok(World { topology, providers, channels })
    }

    pub fn owner(&self, ch: ChannelId) -> ProviderId {
        self.channels[ch.0].owner
    }

    pub fn empty_occupancy(&self) -> Occupancy {
        Occupancy::new(
            self.topology.sites.iter().map(|s| s.adjacent.clone()).collect(),
            self.channels.iter().map(|c| c.capacity).collect(),
            self.channels.iter().map(|c| c.owner).collect(),
            self.providers.len(),
        )
    }
}
