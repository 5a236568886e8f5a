//! Selection of Best Available Channel (SBAC).
//!
//! Each candidate channel gets the utility
//!
//! ```text
//! ch_u = 10·β1·prob + β2·ln(1/inter) + β3/cost
//! ```
//!
//! where `prob` is the availability probability, `inter` the frequency
//! spread of the candidate list (normalised by the channel spacing) and
//! `cost = t·60·c` the expected price of a call. The highest utility wins,
//! ties going to the lowest channel id.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::world::ChannelId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SbacWeights {
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
}

impl Default for SbacWeights {
    fn default() -> Self {
        SbacWeights { beta1: 1.0, beta2: 1.0, beta3: 1.0 }
    }
}

impl SbacWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.beta1, self.beta2, self.beta3];
        if all.iter().any(|b| !b.is_finite() || *b < 0.0) {
            return Err(Error::config("SBAC weights must be finite and >= 0"));
        }
        if all.iter().all(|b| *b == 0.0) {
            return Err(Error::config("SBAC weights must not all be zero"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostParams {
    /// Expected call duration, minutes.
    pub t_call_min: f64,
    /// Price per second.
    pub price_per_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelCandidate {
    pub channel: ChannelId,
    pub freq_hz: f64,
    pub available_now: bool,
    pub prob: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredCandidate {
    pub channel: ChannelId,
    pub score: f64,
}

pub fn availability_prob(available: usize, total: usize) -> Result<f64> {
    if total == 0 {
        return Err(Error::config("availability ratio over zero channels"));
    }
    if available > total {
        return Err(Error::config(format!("{available} available out of {total} channels")));
    }
    Ok(available as f64 / total as f64)
}

/// `|max − min|` of the frequencies, never below `floor_hz`.
pub fn freq_spread(freqs: &[f64], floor_hz: f64) -> Result<f64> {
    let mut it = freqs.iter().copied();
    let first = it.next().ok_or_else(|| Error::config("frequency spread of an empty list"))?;
    let (lo, hi) = it.fold((first, first), |(lo, hi), f| (lo.min(f), hi.max(f)));
    Ok((hi - lo).abs().max(floor_hz))
}

pub fn channel_cost(params: &CostParams) -> f64 {
    params.t_call_min * 60.0 * params.price_per_s
}

/// `inter_norm` is the spread in units of the channel spacing (>= 1).
pub fn channel_utility(prob: f64, inter_norm: f64, cost: f64, w: &SbacWeights) -> f64 {
    10.0 * w.beta1 * prob + w.beta2 * (1.0 / inter_norm).ln() + w.beta3 * (1.0 / cost)
}

/// Scores the available candidates. The spread is computed once over the
/// whole available list and shared by every candidate.
pub fn score_candidates(
    candidates: &[ChannelCandidate],
    w: &SbacWeights,
    inter_unit_hz: f64,
) -> Vec<ScoredCandidate> {
    let available: Vec<&ChannelCandidate> = candidates.iter().filter(|c| c.available_now).collect();
    let freqs: Vec<f64> = available.iter().map(|c| c.freq_hz).collect();
    let Ok(inter) = freq_spread(&freqs, inter_unit_hz) else {
        return Vec::new();
    };
    let inter_norm = inter / inter_unit_hz;
    available
        .iter()
        .map(|c| ScoredCandidate { channel: c.channel, score: channel_utility(c.prob, inter_norm, c.cost, w) })
        .collect()
}

fn better(a: &ScoredCandidate, b: &ScoredCandidate) -> Ordering {
    b.score.total_cmp(&a.score).then(a.channel.cmp(&b.channel))
}

/// Highest-scoring channel; ties go to the lowest channel id.
pub fn select_best(candidates: &[ScoredCandidate]) -> Option<ChannelId> {
    candidates.iter().min_by(|a, b| better(a, b)).map(|c| c.channel)
}

/// All candidates best first, in the same order `select_best` would pick
/// them one after another.
pub fn rank(candidates: &[ScoredCandidate]) -> Vec<ChannelId> {
    let mut v = candidates.to_vec();
    v.sort_by(better);
    v.into_iter().map(|c| c.channel).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const W100: SbacWeights = SbacWeights { beta1: 1.0, beta2: 0.0, beta3: 0.0 };
    const W010: SbacWeights = SbacWeights { beta1: 0.0, beta2: 1.0, beta3: 0.0 };
    const W001: SbacWeights = SbacWeights { beta1: 0.0, beta2: 0.0, beta3: 1.0 };
    const W111: SbacWeights = SbacWeights { beta1: 1.0, beta2: 1.0, beta3: 1.0 };

    #[test]
    fn prob_ratio() {
        assert_eq!(availability_prob(5, 10).unwrap(), 0.5);
        assert_eq!(availability_prob(0, 10).unwrap(), 0.0);
        assert_eq!(availability_prob(10, 10).unwrap(), 1.0);
        assert!(availability_prob(0, 0).is_err());
        assert!(availability_prob(11, 10).is_err());
    }

    #[test]
    fn spread() {
        let f = freq_spread(&[900.0e6, 900.4e6, 900.2e6], 200e3).unwrap();
        assert!((f - 400e3).abs() < 1e-3);
        assert_eq!(freq_spread(&[900.0e6], 200e3).unwrap(), 200e3);
        assert!(freq_spread(&[], 200e3).is_err());
    }

    #[test]
    fn cost_formula() {
        let c = channel_cost(&CostParams { t_call_min: 3.0, price_per_s: 0.01 });
        assert!((c - 1.8).abs() < 1e-12);
        assert_eq!(channel_cost(&CostParams { t_call_min: 1.0, price_per_s: 1.0 }), 60.0);
        let base = channel_cost(&CostParams { t_call_min: 2.0, price_per_s: 0.5 });
        assert_eq!(channel_cost(&CostParams { t_call_min: 4.0, price_per_s: 0.5 }), 2.0 * base);
        assert_eq!(channel_cost(&CostParams { t_call_min: 2.0, price_per_s: 1.5 }), 3.0 * base);
    }

    #[test]
    fn utility_terms() {
        assert_eq!(channel_utility(0.5, 1.0, 1.0, &W100), 5.0);
        assert!((channel_utility(0.0, 1.0, 1.8, &W001) - 0.555_555_555_555_555_6).abs() < 1e-12);
        assert_eq!(channel_utility(0.3, 1.0, 7.0, &W010), 0.0);
        // 5 - ln 2 + 1/1.8, computed independently
        assert!((channel_utility(0.5, 2.0, 1.8, &W111) - 4.862_408_374_995_61).abs() < 1e-12);
    }

    #[test]
    fn select_edge_cases() {
        assert_eq!(select_best(&[]), None);
        let tie = [
            ScoredCandidate { channel: ChannelId(7), score: 4.8 },
            ScoredCandidate { channel: ChannelId(2), score: 4.8 },
        ];
        assert_eq!(select_best(&tie), Some(ChannelId(2)));
        assert_eq!(rank(&tie), vec![ChannelId(2), ChannelId(7)]);
    }

    #[test]
    fn scoring_skips_unavailable_and_shares_spread() {
        let c = |id: usize, f: f64, avail: bool| ChannelCandidate {
            channel: ChannelId(id),
            freq_hz: f,
            available_now: avail,
            prob: 0.5,
            cost: 1.8,
        };
        let cands = [c(1, 900.0e6, true), c(2, 901.0e6, false), c(3, 900.4e6, true)];
        let s = score_candidates(&cands, &W111, 200e3);
        assert_eq!(s.len(), 2);
        let expect = channel_utility(0.5, 2.0, 1.8, &W111);
        assert!(s.iter().all(|x| (x.score - expect).abs() < 1e-12));
        assert!(score_candidates(&[c(4, 1.0, false)], &W111, 1.0).is_empty());
    }

    fn brute_argmax(c: &[ScoredCandidate]) -> Option<ChannelId> {
        let mut best: Option<ScoredCandidate> = None;
        for x in c {
            best = match best {
                None => Some(*x),
                Some(b) if x.score > b.score || (x.score == b.score && x.channel < b.channel) => Some(*x),
                keep => keep,
            };
        }
        best.map(|b| b.channel)
    }

    fn scored() -> impl Strategy<Value = Vec<ScoredCandidate>> {
        proptest::collection::btree_map(0usize..40, 0u8..6, 0..20).prop_map(|m| {
            m.into_iter().map(|(id, s)| ScoredCandidate { channel: ChannelId(id), score: s as f64 * 0.25 }).collect()
        })
    }

    proptest! {
        #[test]
        fn select_matches_exhaustive_scan(c in scored()) {
            prop_assert_eq!(select_best(&c), brute_argmax(&c));
        }

        #[test]
        fn select_permutation_invariant(c in scored(), seed in any::<u64>()) {
            let mut shuffled = c.clone();
            // deterministic shuffle
            let n = shuffled.len();
            for i in (1..n).rev() {
                let j = (seed.wrapping_mul(i as u64 + 1) >> 7) as usize % (i + 1);
                shuffled.swap(i, j);
            }
            prop_assert_eq!(select_best(&c), select_best(&shuffled));
        }

        #[test]
        fn scaling_weights_keeps_choice(
            probs in proptest::collection::vec(0.0f64..=1.0, 1..15),
            costs in proptest::collection::vec(0.1f64..10.0, 15),
            b in (0.0f64..3.0, 0.0f64..3.0, 0.1f64..3.0),
            k in -4i32..5,
        ) {
            let w = SbacWeights { beta1: b.0, beta2: b.1, beta3: b.2 };
            let scale = 2f64.powi(k);
            let ws = SbacWeights { beta1: b.0 * scale, beta2: b.1 * scale, beta3: b.2 * scale };
            let cands: Vec<ChannelCandidate> = probs.iter().enumerate().map(|(i, p)| ChannelCandidate {
                channel: ChannelId(i), freq_hz: 900e6 + i as f64 * 2e5, available_now: true, prob: *p, cost: costs[i],
            }).collect();
            let a = select_best(&score_candidates(&cands, &w, 2e5));
            let b = select_best(&score_candidates(&cands, &ws, 2e5));
            prop_assert_eq!(a, b);
        }

        #[test]
        fn monotone_in_prob_cost_and_spread(
            p in 0.0f64..0.9, dp in 0.0f64..0.1, cost in 0.1f64..10.0, dc in 0.0f64..5.0,
            inter in 1.0f64..100.0, di in 0.0f64..50.0,
            b in (0.01f64..3.0, 0.01f64..3.0, 0.01f64..3.0),
        ) {
            let w = SbacWeights { beta1: b.0, beta2: b.1, beta3: b.2 };
            let base = channel_utility(p, inter, cost, &w);
            prop_assert!(channel_utility(p + dp, inter, cost, &w) >= base);
            prop_assert!(channel_utility(p, inter, cost + dc, &w) <= base);
            prop_assert!(channel_utility(p, inter + di, cost, &w) <= base);
            prop_assert!(base.is_finite());
        }
    }
}
