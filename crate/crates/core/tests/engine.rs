#![allow(clippy::field_reassign_with_default)]

use proptest::prelude::*;

use spectrum_share::engine::{self, RunOptions, RunOutput};
use spectrum_share::protocol::MessageKind;
use spectrum_share::{ProviderId, Scenario};

fn small(n: usize, erlangs: f64) -> Scenario {
    let mut s = Scenario::default();
    s.n_providers = n;
    s.channels_per_provider = vec![3; n];
    s.alpha = vec![0.01; n];
    s.channel_capacity = 4;
    s.traffic.mean_rates = vec![erlangs / 180.0; n];
    s.t_obs_s = 3600.0;
    s
}

fn run_all(s: &Scenario) -> RunOutput {
    engine::run(s, &RunOptions::everything()).unwrap()
}

/// Busy-channel time integrated offline from the occupancy change log.
fn eta_from_trace(out: &RunOutput, provider: usize, n_channels: usize) -> f64 {
    let (start, end) = (out.window_start, out.end_time);
    let mut level = 0usize;
    let mut last = start;
    let mut area = 0.0;
    for sample in out.occupancy_trace.iter().filter(|o| o.provider == ProviderId(provider)) {
        if sample.time > start {
            area += level as f64 * (sample.time.min(end) - last);
            last = sample.time.min(end);
        }
        level = sample.n_busy;
    }
    area += level as f64 * (end - last);
    area / (n_channels as f64 * (end - start))
}

#[test]
fn vanishing_load_never_blocks() {
    let mut s = small(3, 0.0);
    s.traffic.mean_rates = vec![1e-4; 3];
    s.traffic.epoch_length_s = None;
    s.t_obs_s = 100_000.0;
    let out = run_all(&s);
    assert!(out.report.total.n_processed > 0);
    assert_eq!(out.report.total.n_blocked, 0);
    assert_eq!(out.report.blocking_rate, Some(0.0));
}

#[test]
fn no_channels_blocks_everything() {
    for sharing in [false, true] {
        let mut s = small(2, 5.0);
        s.channels_per_provider = vec![0, 0];
        s.sharing_enabled = sharing;
        let out = run_all(&s);
        assert!(out.report.total.n_processed > 0);
        assert_eq!(out.report.blocking_rate, Some(1.0));
        assert!(out.report.providers.iter().all(|p| p.eta_s.is_none() && p.c_e.is_none()));
    }
}

#[test]
fn sharing_off_uses_only_owned_channels() {
    let mut s = small(3, 12.0);
    s.cells_per_provider = 7;
    s.sharing_enabled = false;
    let out = run_all(&s);
    let per = s.channels_per_provider[0];
    for c in out.call_log.iter().filter(|c| !c.blocked) {
        let ch = c.channel.unwrap();
        assert_eq!(ch.0 / per, c.provider.0, "call {} on foreign channel {}", c.id, ch.0);
        assert!(!c.borrowed);
    }
    assert!(out.episodes.is_empty());
    assert!(out.trace.iter().all(|l| l.kind != MessageKind::ChannelRequest));
}

#[test]
fn borrowing_happens_when_one_provider_is_overloaded() {
    let mut s = small(3, 4.0);
    s.traffic.mean_rates[0] = 30.0 / 180.0;
    let out = run_all(&s);
    assert!(out.call_log.iter().any(|c| c.borrowed && c.provider == ProviderId(0)));
    assert!(!out.episodes.is_empty());
}

#[test]
fn efficiency_matches_occupancy_log() {
    let mut s = small(3, 10.0);
    s.cells_per_provider = 7;
    s.traffic.mean_rates[1] = 25.0 / 180.0;
    let out = run_all(&s);
    for (p, rep) in out.report.providers.iter().enumerate() {
        let offline = eta_from_trace(&out, p, s.channels_per_provider[p]);
        let eta = rep.eta_s.unwrap();
        assert!((offline - eta).abs() < 1e-9, "provider {p}: {offline} vs {eta}");
    }
}

#[test]
fn decisions_follow_arrivals_and_window() {
    let s = small(2, 12.0);
    let out = run_all(&s);
    let mut last = 0.0;
    for c in &out.call_log {
        assert!(c.decided_at >= c.arrival);
        assert!(c.decided_at <= c.arrival + s.protocol.pending_timeout_s + 1e-12);
        assert!(c.decided_at >= last, "call log is not in decision order");
        last = c.decided_at;
    }
    let counted = out.call_log.iter().filter(|c| c.arrival >= out.window_start).count() as u64;
    assert_eq!(counted, out.report.total.n_processed);
    assert_eq!(out.report.t_obs, out.end_time - out.window_start);
}

#[test]
fn trace_times_are_monotone() {
    let mut s = small(3, 8.0);
    s.traffic.mean_rates[2] = 20.0 / 180.0;
    let out = run_all(&s);
    assert!(!out.trace.is_empty());
    assert!(out.trace.windows(2).all(|w| w[0].time <= w[1].time));
}

#[test]
fn seeds_change_results() {
    let mut s = small(2, 10.0);
    let a = engine::run(&s, &RunOptions::default()).unwrap();
    s.seed += 1;
    let b = engine::run(&s, &RunOptions::default()).unwrap();
    assert_ne!(a.report, b.report);
}

#[test]
fn sweep_row_count_and_seeds() {
    let mut s = small(2, 10.0);
    s.t_obs_s = 600.0;
    let values: Vec<String> = ["0.02", "0.04", "0.06", "0.08", "0.1"].iter().map(|v| v.to_string()).collect();
    let rows = engine::sweep(&s, engine::SweepAxis::MeanArrival, &values, 10).unwrap();
    assert_eq!(rows.len(), 50);
    for r in 0..10 {
        let seeds: Vec<u64> = rows.iter().filter(|x| x.replication == r).map(|x| x.seed).collect();
        assert_eq!(seeds.len(), 5);
        assert!(seeds.iter().all(|&x| x == seeds[0]));
    }
    assert!(engine::sweep(&s, engine::SweepAxis::Correlation, &["2".into()], 1).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_scenarios_keep_invariants(
        n in 1usize..4,
        cells in prop::sample::select(vec![1usize, 7]),
        load in 1.0f64..30.0,
        cap in 1u32..5,
        rho in -0.4f64..0.9,
        sharing: bool,
        seed: u64,
    ) {
        let mut s = small(n, load);
        s.cells_per_provider = cells;
        s.channel_capacity = cap;
        s.traffic.rate_std = 0.3 * load / 180.0;
        s.traffic.correlation = rho;
        s.traffic.epoch_length_s = Some(300.0);
        s.sharing_enabled = sharing;
        s.protocol.false_free_prob = 0.05;
        s.protocol.false_busy_prob = 0.05;
        s.t_obs_s = 1200.0;
        s.seed = seed;
        let out = engine::run(&s, &RunOptions::everything()).unwrap();
        let rep = &out.report;
        let total: u64 = rep.providers.iter().map(|p| p.n_processed).sum();
        prop_assert_eq!(total, rep.total.n_processed);
        if let Some(r) = rep.blocking_rate {
            prop_assert!((0.0..=1.0).contains(&r));
        }
        for p in &rep.providers {
            let eta = p.eta_s.unwrap();
            prop_assert!((0.0..=1.0).contains(&eta), "eta {}", eta);
            prop_assert!((0.0..=1.0).contains(&p.eta_s_user_weighted.unwrap()));
        }
        for ep in &out.episodes {
            prop_assert!(ep.channel_requests <= 6);
        }
    }
}
