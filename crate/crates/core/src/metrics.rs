//! Event-integrated performance counters: call blocking rate, spectrum
//! efficiency and revenue efficiency.
//!
//! Levels (busy channels, active calls, ...) are piecewise constant between
//! events and integrated by rectangles. Nothing before `window_start` is
//! counted, which realises the warm-up cut.

use crate::error::{Error, Result};
use crate::world::ProviderId;

/// Static per-provider inputs of the accumulator.
#[derive(Debug, Clone, Copy)]
pub struct ProviderSetup {
    /// Owned channel count N_ch.
    pub n_channels: usize,
    /// Upper bound on simultaneous users of the owned channels
    /// (channels × capacity × sites); denominator of the user-weighted
    /// efficiency.
    pub user_slots: u64,
    pub alpha: f64,
}

#[derive(Debug, Clone, Default)]
struct Levels {
    busy: f64,
    users: f64,
    active: f64,
    offered: f64,
}

#[derive(Debug, Clone)]
struct ProviderAcc {
    setup: ProviderSetup,
    n_blocked: u64,
    n_processed: u64,
    level: Levels,
    integral: Levels,
}

#[derive(Debug, Clone)]
pub struct MetricsAccumulator {
    providers: Vec<ProviderAcc>,
    window_start: f64,
    last: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProviderReport {
    /// `None` for the all-provider aggregate.
    pub provider: Option<ProviderId>,
    pub n_blocked: u64,
    pub n_processed: u64,
    pub n_channels: usize,
    /// Integral of busy owned channels, channel·seconds.
    pub busy_channel_time: f64,
    pub eta_s: Option<f64>,
    pub eta_s_user_weighted: Option<f64>,
    pub c_e: Option<f64>,
    pub alpha: Option<f64>,
    pub active_users_mean: f64,
    pub traffic_load_offered: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    /// Length of the measured window, seconds.
    pub t_obs: f64,
    pub blocking_rate: Option<f64>,
    /// 95% normal-approximation half width of `blocking_rate`.
    pub blocking_half_width: Option<f64>,
    pub providers: Vec<ProviderReport>,
    pub total: ProviderReport,
}

impl MetricsAccumulator {
    pub fn new(window_start: f64, setups: Vec<ProviderSetup>) -> Self {
        let providers = setups
            .into_iter()
            .map(|setup| ProviderAcc {
                setup,
                n_blocked: 0,
                n_processed: 0,
                level: Levels::default(),
                integral: Levels::default(),
            })
            .collect();
        MetricsAccumulator { providers, window_start, last: 0.0 }
    }

    pub fn window_start(&self) -> f64 {
        self.window_start
    }

    /// Observed window length so far.
    pub fn t_obs(&self) -> f64 {
        (self.last - self.window_start).max(0.0)
    }

    /// Integrates all current levels up to `now`.
    pub fn advance(&mut self, now: f64) -> Result<()> {
        if now < self.last {
            return Err(Error::invariant(format!("metrics time regression: {now} < {}", self.last)));
        }
        let from = self.last.max(self.window_start);
        if now > from {
            let dt = now - from;
            for p in self.providers.iter_mut() {
                p.integral.busy += p.level.busy * dt;
                p.integral.users += p.level.users * dt;
                p.integral.active += p.level.active * dt;
                p.integral.offered += p.level.offered * dt;
            }
        }
        self.last = now;
        Ok(())
    }

    /// Counts an admit-or-block decision for a call that arrived at
    /// `arrival_time`; calls arriving during warm-up are ignored.
    pub fn record_decision(&mut self, provider: ProviderId, blocked: bool, arrival_time: f64) {
        if arrival_time < self.window_start {
            return;
        }
        let p = &mut self.providers[provider.0];
        p.n_processed += 1;
        if blocked {
            p.n_blocked += 1;
        }
    }

    pub fn record_occupancy_change(&mut self, provider: ProviderId, n_busy: usize, now: f64) -> Result<()> {
        self.advance(now)?;
        self.providers[provider.0].level.busy = n_busy as f64;
        Ok(())
    }

    pub fn record_users_on_owned(&mut self, provider: ProviderId, users: u64, now: f64) -> Result<()> {
        self.advance(now)?;
        self.providers[provider.0].level.users = users as f64;
        Ok(())
    }

    pub fn record_active_calls(&mut self, provider: ProviderId, active: u64, now: f64) -> Result<()> {
        self.advance(now)?;
        self.providers[provider.0].level.active = active as f64;
        Ok(())
    }

    /// Offered load in Erlangs (rate × mean holding).
    pub fn record_offered_load(&mut self, provider: ProviderId, erlangs: f64, now: f64) -> Result<()> {
        self.advance(now)?;
        self.providers[provider.0].level.offered = erlangs;
        Ok(())
    }

    pub fn n_blocked(&self, provider: ProviderId) -> u64 {
        self.providers[provider.0].n_blocked
    }

    pub fn n_processed(&self, provider: ProviderId) -> u64 {
        self.providers[provider.0].n_processed
    }

    pub fn busy_channel_time(&self, provider: ProviderId) -> f64 {
        self.providers[provider.0].integral.busy
    }

    /// Blocked over processed calls, summed over all providers.
    pub fn blocking_rate(&self) -> Option<f64> {
        let blocked: u64 = self.providers.iter().map(|p| p.n_blocked).sum();
        let processed: u64 = self.providers.iter().map(|p| p.n_processed).sum();
        (processed > 0).then(|| blocked as f64 / processed as f64)
    }

    /// Time-averaged fraction of the provider's owned channels that are busy.
    pub fn spectrum_efficiency(&self, provider: ProviderId) -> Option<f64> {
        let p = &self.providers[provider.0];
        let t = self.t_obs();
        (t > 0.0 && p.setup.n_channels > 0).then(|| fraction(p.integral.busy, p.setup.n_channels as f64 * t))
    }

    pub fn revenue_efficiency(&self, provider: ProviderId, alpha: f64) -> Option<f64> {
        self.spectrum_efficiency(provider).map(|eta| revenue_efficiency(alpha, self.t_obs(), eta))
    }

    /// Integrates up to `end` and produces the report.
    pub fn finish(&mut self, end: f64) -> Result<MetricsReport> {
        self.advance(end)?;
        let t = self.t_obs();
        let per_time = |x: f64| if t > 0.0 { x / t } else { 0.0 };

        let mut providers = Vec::with_capacity(self.providers.len());
        for (i, p) in self.providers.iter().enumerate() {
            let id = ProviderId(i);
            let eta = self.spectrum_efficiency(id);
            let bound = p.setup.n_channels as f64 * t;
            if p.integral.busy > bound * (1.0 + 1e-12) {
                return Err(Error::invariant(format!(
                    "provider {i}: busy channel time {} exceeds {bound}",
                    p.integral.busy
                )));
            }
            providers.push(ProviderReport {
                provider: Some(id),
                n_blocked: p.n_blocked,
                n_processed: p.n_processed,
                n_channels: p.setup.n_channels,
                busy_channel_time: p.integral.busy,
                eta_s: eta,
                eta_s_user_weighted: (t > 0.0 && p.setup.user_slots > 0)
                    .then(|| fraction(p.integral.users, p.setup.user_slots as f64 * t)),
                c_e: eta.map(|e| revenue_efficiency(p.setup.alpha, t, e)),
                alpha: Some(p.setup.alpha),
                active_users_mean: per_time(p.integral.active),
                traffic_load_offered: per_time(p.integral.offered),
            });
        }

        let n_channels: usize = self.providers.iter().map(|p| p.setup.n_channels).sum();
        let slots: u64 = self.providers.iter().map(|p| p.setup.user_slots).sum();
        let busy: f64 = self.providers.iter().map(|p| p.integral.busy).sum();
        let users: f64 = self.providers.iter().map(|p| p.integral.users).sum();
        let total = ProviderReport {
            provider: None,
            n_blocked: providers.iter().map(|p| p.n_blocked).sum(),
            n_processed: providers.iter().map(|p| p.n_processed).sum(),
            n_channels,
            busy_channel_time: busy,
            eta_s: (t > 0.0 && n_channels > 0).then(|| fraction(busy, n_channels as f64 * t)),
            eta_s_user_weighted: (t > 0.0 && slots > 0).then(|| fraction(users, slots as f64 * t)),
            c_e: providers.iter().filter_map(|p| p.c_e).reduce(|a, b| a + b),
            alpha: None,
            active_users_mean: providers.iter().map(|p| p.active_users_mean).sum(),
            traffic_load_offered: providers.iter().map(|p| p.traffic_load_offered).sum(),
        };

        let blocking_rate = self.blocking_rate();
        let blocking_half_width =
            blocking_rate.map(|r| 1.96 * (r * (1.0 - r) / total.n_processed as f64).sqrt());
        Ok(MetricsReport { t_obs: t, blocking_rate, blocking_half_width, providers, total })
    }
}

/// Income proxy `α · t_obs · η_s`.
/// Ratio of an integral to its full-occupancy bound. Summation rounding can
/// overshoot 1 by an ulp at saturation; real overruns are caught in `finish`.
fn fraction(integral: f64, bound: f64) -> f64 {
    (integral / bound).min(1.0)
}

pub fn revenue_efficiency(alpha: f64, t_obs: f64, eta_s: f64) -> f64 {
    alpha * t_obs * eta_s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn acc(n: usize, channels: usize) -> MetricsAccumulator {
        MetricsAccumulator::new(
            0.0,
            vec![ProviderSetup { n_channels: channels, user_slots: channels as u64 * 10, alpha: 0.01 }; n],
        )
    }

    #[test]
    fn two_of_ten_blocked() {
        let mut a = acc(1, 8);
        for i in 0..10 {
            a.record_decision(ProviderId(0), i < 2, 1.0);
        }
        assert_eq!(a.blocking_rate(), Some(0.2));
    }

    #[test]
    fn blocking_sums_before_dividing() {
        let mut a = acc(2, 8);
        for i in 0..5 {
            a.record_decision(ProviderId(0), i < 1, 0.0);
            a.record_decision(ProviderId(1), i < 3, 0.0);
        }
        assert_eq!(a.blocking_rate(), Some(0.4));
        assert_eq!(acc(1, 1).blocking_rate(), None);

        let mut none = acc(1, 1);
        let mut all = acc(1, 1);
        for _ in 0..3 {
            none.record_decision(ProviderId(0), false, 0.0);
            all.record_decision(ProviderId(0), true, 0.0);
        }
        assert_eq!(none.blocking_rate(), Some(0.0));
        assert_eq!(all.blocking_rate(), Some(1.0));
    }

    #[test]
    fn constant_half_busy() {
        let mut a = acc(1, 8);
        a.record_occupancy_change(ProviderId(0), 4, 0.0).unwrap();
        let r = a.finish(100.0).unwrap();
        assert_eq!(r.providers[0].eta_s, Some(0.5));
    }

    #[test]
    fn piecewise_profile() {
        // 2 busy for 10 s then 6 busy for 5 s: (20 + 30) / (8 * 15)
        let mut a = acc(1, 8);
        a.record_occupancy_change(ProviderId(0), 2, 0.0).unwrap();
        a.record_occupancy_change(ProviderId(0), 6, 10.0).unwrap();
        let r = a.finish(15.0).unwrap();
        assert!((r.providers[0].eta_s.unwrap() - 50.0 / 120.0).abs() < 1e-15);
        assert_eq!(r.t_obs, 15.0);
    }

    #[test]
    fn zero_traffic() {
        let r = acc(2, 3).finish(50.0).unwrap();
        assert_eq!(r.providers[0].eta_s, Some(0.0));
        assert_eq!(r.providers[0].c_e, Some(0.0));
        assert_eq!(r.blocking_rate, None);
    }

    #[test]
    fn revenue_identity() {
        assert!((revenue_efficiency(0.01, 3600.0, 0.5) - 18.0).abs() < 1e-12);
        assert_eq!(revenue_efficiency(0.01, 3600.0, 0.0), 0.0);
        let mut a = acc(1, 4);
        a.record_occupancy_change(ProviderId(0), 3, 0.0).unwrap();
        a.record_occupancy_change(ProviderId(0), 1, 7.0).unwrap();
        let r = a.finish(33.0).unwrap();
        let p = &r.providers[0];
        assert_eq!(p.c_e.unwrap(), 0.01 * r.t_obs * p.eta_s.unwrap());
        assert_eq!(a.revenue_efficiency(ProviderId(0), 0.01), p.c_e);
    }

    #[test]
    fn warmup_excluded() {
        let mut a = MetricsAccumulator::new(
            10.0,
            vec![ProviderSetup { n_channels: 2, user_slots: 20, alpha: 1.0 }],
        );
        a.record_occupancy_change(ProviderId(0), 2, 0.0).unwrap();
        a.record_decision(ProviderId(0), true, 5.0);
        a.record_occupancy_change(ProviderId(0), 1, 15.0).unwrap();
        a.record_decision(ProviderId(0), false, 12.0);
        let r = a.finish(20.0).unwrap();
        assert_eq!(r.t_obs, 10.0);
        // 2 busy over [10, 15), 1 busy over [15, 20)
        assert_eq!(r.providers[0].busy_channel_time, 15.0);
        assert_eq!(r.blocking_rate, Some(0.0));
        assert_eq!(r.total.n_processed, 1);
    }

    #[test]
    fn time_regression_faults() {
        let mut a = acc(1, 1);
        a.advance(5.0).unwrap();
        assert!(matches!(a.record_occupancy_change(ProviderId(0), 1, 4.0), Err(Error::Invariant(_))));
    }

    #[test]
    fn aggregate_pools_channels() {
        let mut a = MetricsAccumulator::new(
            0.0,
            vec![
                ProviderSetup { n_channels: 2, user_slots: 20, alpha: 1.0 },
                ProviderSetup { n_channels: 6, user_slots: 60, alpha: 2.0 },
            ],
        );
        a.record_occupancy_change(ProviderId(0), 2, 0.0).unwrap();
        a.record_occupancy_change(ProviderId(1), 2, 0.0).unwrap();
        a.record_active_calls(ProviderId(1), 12, 0.0).unwrap();
        let r = a.finish(10.0).unwrap();
        assert_eq!(r.total.eta_s, Some(0.5));
        assert_eq!(r.total.active_users_mean, 12.0);
        assert_eq!(r.total.c_e, Some(1.0 * 10.0 * 1.0 + 2.0 * 10.0 * (1.0 / 3.0)));
    }
}
