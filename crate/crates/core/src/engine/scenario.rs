//! Scenario description, read from JSON.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::{ProbMode, ProtocolConfig};
use crate::sbac::{CostParams, SbacWeights};
use crate::traffic::{equicorrelated, TrafficModel};
use crate::world::{build_topology, ChannelPlan, World};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrafficParams {
    /// Mean arrival rate per provider, calls/second.
    pub mean_rates: Vec<f64>,
    /// Standard deviation of every provider's rate, calls/second.
    pub rate_std: f64,
    /// Pairwise correlation of the rates; ignored when `covariance` is set.
    pub correlation: f64,
    pub covariance: Option<Vec<Vec<f64>>>,
    pub mean_holding_s: f64,
    /// Seconds between rate re-draws; `null` draws once per run.
    pub epoch_length_s: Option<f64>,
    pub rate_floor: f64,
}

impl Default for TrafficParams {
    fn default() -> Self {
        // 20 Erlangs per provider, 100 in total
        TrafficParams {
            mean_rates: vec![20.0 / 180.0; 5],
            rate_std: 0.0,
            correlation: 0.0,
            covariance: None,
            mean_holding_s: 180.0,
            epoch_length_s: Some(600.0),
            rate_floor: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SbacParams {
    pub weights: SbacWeights,
    /// Expected call duration used in the cost term, minutes.
    pub t_call_min: f64,
    /// Price per second used in the cost term.
    pub price_per_s: f64,
    pub prob_mode: ProbMode,
    /// Sweeps remembered for the per-channel free fraction.
    pub history_window: usize,
}

impl Default for SbacParams {
    fn default() -> Self {
        SbacParams {
            weights: SbacWeights::default(),
            t_call_min: 3.0,
            price_per_s: 0.01,
            prob_mode: ProbMode::Global,
            history_window: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolParams {
    pub message_latency_s: f64,
    pub reply_timeout_s: f64,
    pub sensing_period_s: f64,
    pub pending_timeout_s: f64,
    /// Defaults to the cell radius.
    pub sensing_range_m: Option<f64>,
    pub false_free_prob: f64,
    pub false_busy_prob: f64,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        let d = ProtocolConfig::default();
        ProtocolParams {
            message_latency_s: d.message_latency,
            reply_timeout_s: d.reply_timeout,
            sensing_period_s: d.sensing_period,
            pending_timeout_s: d.pending_timeout,
            sensing_range_m: None,
            false_free_prob: 0.0,
            false_busy_prob: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scenario {
    pub id: String,
    pub n_providers: usize,
    pub cells_per_provider: usize,
    pub cell_radius_m: f64,
    pub channels_per_provider: Vec<usize>,
    pub channel_capacity: u32,
    pub base_freq_hz: f64,
    pub channel_spacing_hz: f64,
    /// Unit price per provider, currency per second per channel.
    pub alpha: Vec<f64>,
    pub traffic: TrafficParams,
    pub sbac: SbacParams,
    pub protocol: ProtocolParams,
    pub sharing_enabled: bool,
    /// Simulated time, seconds. Metrics cover the part after warm-up.
    pub t_obs_s: f64,
    pub seed: u64,
    pub warmup_fraction: f64,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            id: "default".into(),
            n_providers: 5,
            cells_per_provider: 1,
            cell_radius_m: 500.0,
            channels_per_provider: vec![5; 5],
            channel_capacity: 10,
            base_freq_hz: 900e6,
            channel_spacing_hz: 200e3,
            alpha: vec![0.01; 5],
            traffic: TrafficParams::default(),
            sbac: SbacParams::default(),
            protocol: ProtocolParams::default(),
            sharing_enabled: true,
            t_obs_s: 36_000.0,
            seed: 1,
            warmup_fraction: 0.1,
        }
    }
}

impl Scenario {
    /// Parses a scenario document. `seed` is required, every other field
    /// falls back to its default; unknown keys are rejected.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        if value.get("seed").is_none() {
            return Err(Error::config("scenario: missing required field `seed`"));
        }
        let s: Scenario = serde_json::from_value(value)?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_providers;
        let per_provider = [
            ("channels_per_provider", self.channels_per_provider.len()),
            ("alpha", self.alpha.len()),
            ("traffic.mean_rates", self.traffic.mean_rates.len()),
        ];
        for (name, len) in per_provider {
            if len != n {
                return Err(Error::config(format!("{name} has {len} entries for {n} providers")));
            }
        }
        if !(self.t_obs_s.is_finite() && self.t_obs_s > 0.0) {
            return Err(Error::config("t_obs_s must be > 0"));
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return Err(Error::config("warmup_fraction must be in [0, 1)"));
        }
        if !(self.traffic.rate_std.is_finite() && self.traffic.rate_std >= 0.0) {
            return Err(Error::config("traffic.rate_std must be >= 0"));
        }
        if !(-1.0..=1.0).contains(&self.traffic.correlation) {
            return Err(Error::config("traffic.correlation must be in [-1, 1]"));
        }
        let p = &self.protocol;
        for (name, v) in [
            ("message_latency_s", p.message_latency_s),
            ("reply_timeout_s", p.reply_timeout_s),
            ("pending_timeout_s", p.pending_timeout_s),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(format!("protocol.{name} must be >= 0")));
            }
        }
        if !(p.sensing_period_s.is_finite() && p.sensing_period_s > 0.0) {
            return Err(Error::config("protocol.sensing_period_s must be > 0"));
        }
        for v in [p.false_free_prob, p.false_busy_prob] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config("sensing error probabilities must be in [0, 1]"));
            }
        }
        self.sbac.weights.validate()?;
        if !(self.sbac.t_call_min > 0.0 && self.sbac.price_per_s > 0.0) {
            return Err(Error::config("sbac.t_call_min and sbac.price_per_s must be > 0"));
        }
        if self.sbac.history_window == 0 {
            return Err(Error::config("sbac.history_window must be >= 1"));
        }
        Ok(())
    }

    pub fn build_world(&self) -> Result<World> {
        let mut topo = build_topology(self.n_providers, self.cells_per_provider, self.cell_radius_m)?;
        if let Some(r) = self.protocol.sensing_range_m {
            topo.set_sensing_range(r)?;
        }
        let plan = ChannelPlan {
            channels_per_provider: self.channels_per_provider.clone(),
            capacity: self.channel_capacity,
            base_freq_hz: self.base_freq_hz,
            spacing_hz: self.channel_spacing_hz,
        };
        World::new(topo, &plan, &self.alpha)
    }

    pub fn traffic_model(&self) -> Result<TrafficModel> {
        let t = &self.traffic;
        let cov = match &t.covariance {
            Some(c) => c.clone(),
            None => equicorrelated(self.n_providers, t.rate_std, t.correlation),
        };
        TrafficModel::new(t.mean_rates.clone(), cov, t.mean_holding_s, t.epoch_length_s, t.rate_floor)
    }

    pub fn protocol_config(&self) -> ProtocolConfig {
        ProtocolConfig {
            message_latency: self.protocol.message_latency_s,
            reply_timeout: self.protocol.reply_timeout_s,
            sensing_period: self.protocol.sensing_period_s,
            pending_timeout: self.protocol.pending_timeout_s,
            history_window: self.sbac.history_window,
        }
    }

    pub fn cost_params(&self) -> CostParams {
        CostParams { t_call_min: self.sbac.t_call_min, price_per_s: self.sbac.price_per_s }
    }

    /// Sets every provider's mean rate from offered Erlangs.
    pub fn with_offered_erlangs(mut self, erlangs: &[f64]) -> Self {
        self.traffic.mean_rates = erlangs.iter().map(|a| a / self.traffic.mean_holding_s).collect();
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_and_validates() {
        let s = Scenario::default();
        s.validate().unwrap();
        assert_eq!(Scenario::from_json(&s.to_json()).unwrap(), s);
    }

    #[test]
    fn seed_required() {
        let e = Scenario::from_json(r#"{"id": "x"}"#).unwrap_err();
        assert!(matches!(e, Error::Config(m) if m.contains("seed")));
        assert_eq!(Scenario::from_json(r#"{"seed": 9}"#).unwrap().seed, 9);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(Scenario::from_json(r#"{"seed": 1, "bogus": 2}"#), Err(Error::Config(_))));
        assert!(Scenario::from_json(r#"{"seed": 1, "traffic": {"rate": 2}}"#).is_err());
        assert!(Scenario::from_json(r#"{"seed": 1, "sbac": {"weights": {"beta4": 1}}}"#).is_err());
    }

    #[test]
    fn partial_documents_use_defaults() {
        let s = Scenario::from_json(
            r#"{"seed": 3, "n_providers": 1, "channels_per_provider": [2], "alpha": [0.5],
                "traffic": {"mean_rates": [0.1], "epoch_length_s": null},
                "sbac": {"prob_mode": "history"}}"#,
        )
        .unwrap();
        assert_eq!(s.traffic.mean_holding_s, 180.0);
        assert_eq!(s.traffic.epoch_length_s, None);
        assert_eq!(s.sbac.prob_mode, ProbMode::History);
        assert_eq!(s.build_world().unwrap().channels.len(), 2);
    }

    #[test]
    fn inconsistent_counts_rejected() {
        let mut s = Scenario::default();
        s.alpha.pop();
        assert!(s.validate().is_err());
        let s = Scenario { warmup_fraction: 1.0, ..Scenario::default() };
        assert!(s.validate().is_err());
        let mut s = Scenario::default();
        s.traffic.rate_std = 0.1;
        s.traffic.correlation = -0.9;
        assert!(s.traffic_model().is_err(), "not PSD for five providers");
    }
}
