use super::{ChannelId, ProviderId};
use crate::error::{Error, Result};

/// Ground-truth channel usage per site.
///
/// Providers' grids are co-located, so a channel used at a site by its owner
/// and by a borrower shares the same user budget and the same interference
/// footprint. A channel is admissible at a site when its user count there
/// is below capacity and no adjacent site carries it.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Occupancy {
    n_channels: usize,
    capacity: Vec<u32>,
    owner: Vec<ProviderId>,
    adjacency: Vec<Vec<usize>>,
    counts: Vec<u32>,
    channel_users: Vec<u32>,
    busy_sites: Vec<u32>,
    busy_by_owner: Vec<usize>,
    users_by_owner: Vec<u64>,
    total: u64,
}

impl Occupancy {
    /// `adjacency[s]` lists the sites adjacent to site `s`.
    pub fn new(
        adjacency: Vec<Vec<usize>>,
        capacity: Vec<u32>,
        owner: Vec<ProviderId>,
        n_providers: usize,
    ) -> Self {
        assert_eq!(capacity.len(), owner.len());
        let n_channels = capacity.len();
        let n_sites = adjacency.len();
        Occupancy {
            n_channels,
            capacity,
            owner,
            adjacency,
            counts: vec![0; n_sites * n_channels],
            channel_users: vec![0; n_channels],
            busy_sites: vec![0; n_channels],
            busy_by_owner: vec![0; n_providers],
            users_by_owner: vec![0; n_providers],
            total: 0,
        }
    }

    pub fn n_sites(&self) -> usize {
        self.adjacency.len()
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    fn idx(&self, site: usize, ch: ChannelId) -> usize {
        site * self.n_channels + ch.0
    }

    pub fn count(&self, site: usize, ch: ChannelId) -> u32 {
        self.counts[self.idx(site, ch)]
    }

    pub fn capacity(&self, ch: ChannelId) -> u32 {
        self.capacity[ch.0]
    }

    pub fn is_admissible(&self, site: usize, ch: ChannelId) -> bool {
        self.count(site, ch) < self.capacity[ch.0]
            && self.adjacency[site].iter().all(|&a| self.count(a, ch) == 0)
    }

    pub fn occupy(&mut self, site: usize, ch: ChannelId) -> Result<()> {
        if !self.is_admissible(site, ch) {
            return Err(Error::invariant(format!(
                "occupy of channel {} at site {site} not admissible: count {} / {}, adjacent counts {:?}",
                ch.0,
                self.count(site, ch),
                self.capacity[ch.0],
                self.adjacency[site].iter().map(|&a| self.count(a, ch)).collect::<Vec<_>>()
            )));
        }
        let i = self.idx(site, ch);
        let owner = self.owner[ch.0].0;
        self.counts[i] += 1;
        if self.counts[i] == 1 {
            self.busy_sites[ch.0] += 1;
        }
        self.channel_users[ch.0] += 1;
        if self.channel_users[ch.0] == 1 {
            self.busy_by_owner[owner] += 1;
        }
        self.users_by_owner[owner] += 1;
        self.total += 1;
        Ok(())
    }

    pub fn release(&mut self, site: usize, ch: ChannelId) -> Result<()> {
        let i = self.idx(site, ch);
        if self.counts[i] == 0 {
            return Err(Error::invariant(format!(
                "release of channel {} at site {site} with no users",
                ch.0
            )));
        }
        let owner = self.owner[ch.0].0;
        self.counts[i] -= 1;
        if self.counts[i] == 0 {
            self.busy_sites[ch.0] -= 1;
        }
        self.channel_users[ch.0] -= 1;
        if self.channel_users[ch.0] == 0 {
            self.busy_by_owner[owner] -= 1;
        }
        self.users_by_owner[owner] -= 1;
        self.total -= 1;
        Ok(())
    }

    /// Sites currently carrying at least one user on `ch`.
    pub fn sites_using(&self, ch: ChannelId) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_sites()).filter(move |&s| self.count(s, ch) > 0)
    }

    /// Owned channels of `provider` with at least one user anywhere.
    pub fn busy_owned(&self, provider: ProviderId) -> usize {
        self.busy_by_owner[provider.0]
    }

    /// Users on channels owned by `provider`, whoever carries them.
    pub fn users_on_owned(&self, provider: ProviderId) -> u64 {
        self.users_by_owner[provider.0]
    }

    pub fn total_users(&self) -> u64 {
        self.total
    }

    /// Recounts every derived index from the raw counts and checks the
    /// co-channel rule. Used by the engine's invariant checks.
    pub fn check_consistency(&self) -> Result<()> {
        let n_sites = self.n_sites();
        let mut sum = 0u64;
        let mut busy = vec![0usize; self.busy_by_owner.len()];
        let mut users = vec![0u64; self.users_by_owner.len()];
        for c in 0..self.n_channels {
            let ch = ChannelId(c);
            let mut ch_users = 0u32;
            let mut sites = 0u32;
            for s in 0..n_sites {
                let n = self.count(s, ch);
                if n > self.capacity[c] {
                    return Err(Error::invariant(format!("channel {c} over capacity at site {s}")));
                }
                if n > 0 {
                    sites += 1;
                    if let Some(&a) = self.adjacency[s].iter().find(|&&a| self.count(a, ch) > 0) {
                        return Err(Error::invariant(format!(
                            "co-channel violation: channel {c} in use at adjacent sites {s} and {a}"
                        )));
                    }
                }
                ch_users += n;
            }
            if ch_users != self.channel_users[c] || sites != self.busy_sites[c] {
                return Err(Error::invariant(format!("channel {c} index out of sync")));
            }
            let o = self.owner[c].0;
            if ch_users > 0 {
                busy[o] += 1;
            }
            users[o] += ch_users as u64;
            sum += ch_users as u64;
        }
        if sum != self.total || busy != self.busy_by_owner || users != self.users_by_owner {
            return Err(Error::invariant("occupancy totals out of sync"));
        }
        Ok(())
    }
}
