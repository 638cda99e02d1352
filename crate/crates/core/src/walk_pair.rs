//! Two independent oriented random walks and their meeting statistics.
//!
//! Both walks start at the origin and step along a uniform axis each time,
//! so they sit on the same level and can only meet at equal step indices.
//! A meeting at index `i < N` is a *stick* if the walks also agree at
//! `i + 1` and a *split* otherwise. Over a horizon `N` the stick count
//! stands in for `r_d` and the split count for `k_d`.

use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{ModelParams, Vertex, MAX_DIM};
use crate::seeds::seed_schedule;
use crate::stats::{Estimate, MeanAccumulator};

/// Stick and split counts over one window of a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MeetingCounts {
    pub sticks: u64,
    pub splits: u64,
}

/// The stopping-time decomposition of a truncated trace: the stick indices
/// `tau_1 < tau_2 < ...` below the horizon, the split count `sigma_k` strictly
/// between consecutive sticks (with `tau_0 = -1`), and the split count after
/// the last stick (`rho`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decomposition {
    pub stick_times: Vec<usize>,
    pub sigma: Vec<u64>,
    pub rho: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkPairTrace {
    pub d: usize,
    pub horizon: usize,
    pub first: Vec<Vertex>,
    pub second: Vec<Vertex>,
    /// First `j >= 1` with equal positions, `None` if not within the horizon.
    pub theta: Option<usize>,
    pub counts: MeetingCounts,
    pub decomposition: Decomposition,
}

fn check_dim(d: usize) -> Result<()> {
    if d == 0 || d > MAX_DIM {
        return Err(Error::InvalidParameter(format!(
            "dimension d = {d} must lie in [1, {MAX_DIM}]"
        )));
    }
    Ok(())
}

fn pair_rng(seed: u64) -> SmallRng {
    SmallRng::seed_from_u64(seed)
}

/// Simulate a pair up to `horizon` steps and extract every statistic.
pub fn simulate_pair(d: usize, horizon: usize, seed: u64) -> Result<WalkPairTrace> {
    check_dim(d)?;
    if horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be at least 1".into()));
    }
    let mut rng = pair_rng(seed);
    let mut first = Vec::with_capacity(horizon + 1);
    let mut second = Vec::with_capacity(horizon + 1);
    let (mut x, mut y) = (Vertex::origin(d), Vertex::origin(d));
    first.push(x);
    second.push(y);
    for _ in 0..horizon {
        let (a, b) = (rng.random_range(0..d), rng.random_range(0..d));
        x = x.step_forward(a);
        y = y.step_forward(b);
        first.push(x);
        second.push(y);
    }

    let meets = |j: usize| first[j] == second[j];
    let theta = (1..=horizon).find(|&j| meets(j));
    let mut counts = MeetingCounts::default();
    let mut stick_times = Vec::new();
    for i in 0..horizon {
        if meets(i) {
            if meets(i + 1) {
                counts.sticks += 1;
                stick_times.push(i);
            } else {
                counts.splits += 1;
            }
        }
    }

    // Window sums straight from the meeting indicators, independently of
    // the classification above.
    let meetings_in = |lo: usize, hi: usize| (lo..hi).filter(|&j| meets(j)).count() as u64;
    let mut sigma = Vec::with_capacity(stick_times.len());
    let mut prev: i64 = -1;
    for &tau in &stick_times {
        let lo = (prev + 1) as usize;
        sigma.push(if tau == lo { 0 } else { meetings_in(lo, tau) });
        prev = tau as i64;
    }
    // Meetings at the horizon itself cannot be classified and are excluded.
    let rho = meetings_in((prev + 1) as usize, horizon);

    Ok(WalkPairTrace {
        d,
        horizon,
        first,
        second,
        theta,
        counts,
        decomposition: Decomposition {
            stick_times,
            sigma,
            rho,
        },
    })
}

impl WalkPairTrace {
    /// Counts over the first `n <= horizon` steps.
    pub fn counts_up_to(&self, n: usize) -> MeetingCounts {
        let n = n.min(self.horizon);
        let mut c = MeetingCounts::default();
        for i in 0..n {
            if self.first[i] == self.second[i] {
                if self.first[i + 1] == self.second[i + 1] {
                    c.sticks += 1;
                } else {
                    c.splits += 1;
                }
            }
        }
        c
    }

    /// `k_d = sum sigma_l + rho` and `r_d = #sticks`, checked exactly.
    pub fn check_decomposition(&self) -> Result<()> {
        let dec = &self.decomposition;
        let total = dec.sigma.iter().sum::<u64>() + dec.rho;
        if total != self.counts.splits || dec.stick_times.len() as u64 != self.counts.sticks {
            return Err(Error::ContractViolation(format!(
                "decomposition gives {} splits and {} sticks, counts give {:?}",
                total,
                dec.stick_times.len(),
                self.counts
            )));
        }
        Ok(())
    }
}

/// Statistics of one pair, recorded at several horizons in a single pass.
/// Only the difference `S - S'` matters, so positions are not kept.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct PairSummary {
    pub theta: Option<usize>,
    /// First stick index below the largest horizon.
    pub first_stick: Option<usize>,
    /// Splits before the first stick (or before the largest horizon).
    pub splits_before_first_stick: u64,
    /// Counts at each requested horizon.
    pub at: Vec<MeetingCounts>,
}

/// `horizons` must be sorted ascending and nonempty.
pub(crate) fn summarize_pair(d: usize, horizons: &[usize], seed: u64) -> PairSummary {
    let max_n = *horizons.last().expect("nonempty horizons");
    let mut rng = pair_rng(seed);
    let mut diff = [0i32; MAX_DIM];
    let mut together = true;
    let mut theta = None;
    let mut first_stick = None;
    let mut splits_before = 0u64;
    let mut counts = MeetingCounts::default();
    let mut at = Vec::with_capacity(horizons.len());
    let mut next_checkpoint = 0;
    for step in 0..max_n {
        while next_checkpoint < horizons.len() && horizons[next_checkpoint] == step {
            at.push(counts);
            next_checkpoint += 1;
        }
        let (a, b) = (rng.random_range(0..d), rng.random_range(0..d));
        if a != b {
            diff[a] += 1;
            diff[b] -= 1;
        }
        let now_together = if together {
            a == b
        } else {
            a != b && diff[..d].iter().all(|&c| c == 0)
        };
        if together {
            if now_together {
                counts.sticks += 1;
                first_stick.get_or_insert(step);
            } else {
                counts.splits += 1;
                if first_stick.is_none() {
                    splits_before += 1;
                }
            }
        }
        if now_together && theta.is_none() {
            theta = Some(step + 1);
        }
        together = now_together;
    }
    while at.len() < horizons.len() {
        at.push(counts);
    }
    PairSummary {
        theta,
        first_stick,
        splits_before_first_stick: splits_before,
        at,
    }
}

fn check_horizons(horizons: &[usize]) -> Result<()> {
    if horizons.is_empty() || horizons[0] == 0 || horizons.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "horizons must be positive and strictly increasing".into(),
        ));
    }
    Ok(())
}

fn summaries(d: usize, horizons: &[usize], replicas: u64, master_seed: u64) -> Vec<PairSummary> {
    (0..replicas)
        .into_par_iter()
        .map(|i| summarize_pair(d, horizons, seed_schedule(master_seed, "walk-pair", i)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaTail {
    pub d: usize,
    pub horizon: usize,
    pub replicas: u64,
    /// `P(theta = 1)`, which is `1/d`.
    pub first_step_meeting: Estimate,
    /// `P(2 <= theta <= N)`.
    pub tail: Estimate,
    /// `d^2 * tail`, with its standard error.
    pub implied_constant: Estimate,
}

/// `P(2 <= theta <= N)` at each horizon, all from the same pairs.
pub fn estimate_theta_tail(
    d: usize,
    horizons: &[usize],
    replicas: u64,
    master_seed: u64,
) -> Result<Vec<ThetaTail>> {
    check_dim(d)?;
    check_horizons(horizons)?;
    let runs = summaries(d, horizons, replicas, master_seed);
    let first = runs.iter().filter(|s| s.theta == Some(1)).count() as u64;
    let d2 = (d * d) as f64;
    Ok(horizons
        .iter()
        .map(|&n| {
            let hits = runs
                .iter()
                .filter(|s| matches!(s.theta, Some(t) if t >= 2 && t <= n))
                .count() as u64;
            let tail = Estimate::from_indicators(hits, replicas);
            ThetaTail {
                d,
                horizon: n,
                replicas,
                first_step_meeting: Estimate::from_indicators(first, replicas),
                tail,
                implied_constant: Estimate {
                    mean: d2 * tail.mean,
                    se: d2 * tail.se,
                    n: replicas,
                },
            }
        })
        .collect())
}

/// Empirical stand-in for the collision constant: the largest `d^2 * tail`
/// over the tested dimensions.
pub fn empirical_constant(tails: &[ThetaTail]) -> Option<f64> {
    tails
        .iter()
        .map(|t| t.implied_constant.mean)
        .max_by(f64::total_cmp)
}

/// `P(sigma_1 = m, tau_1 < N)` for `m = 0..terms`, from the same pairs as
/// `P(2 <= theta <= N)`; the pair `(empirical, tail)` per `m`.
pub fn sigma_law(
    d: usize,
    horizon: usize,
    replicas: u64,
    terms: usize,
    master_seed: u64,
) -> Result<(Vec<Estimate>, Estimate)> {
    check_dim(d)?;
    check_horizons(&[horizon])?;
    let runs = summaries(d, &[horizon], replicas, master_seed);
    let tail_hits = runs
        .iter()
        .filter(|s| matches!(s.theta, Some(t) if t >= 2))
        .count() as u64;
    let law = (0..terms as u64)
        .map(|m| {
            let hits = runs
                .iter()
                .filter(|s| s.first_stick.is_some() && s.splits_before_first_stick == m)
                .count() as u64;
            Estimate::from_indicators(hits, replicas)
        })
        .collect();
    Ok((law, Estimate::from_indicators(tail_hits, replicas)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentPoint {
    pub horizon: usize,
    /// Mean of `2^splits * q^sticks` with `q = (1 + lambda) / (lambda p)`.
    pub estimate: Estimate,
    /// `E[2^sigma_1; tau_1 < N]`.
    pub stick_factor: Estimate,
    /// `E[2^rho_0; tau_1 >= N]`.
    pub tail_factor: Estimate,
    /// `tail / (1 - q * stick)` when `q * stick < 1`, else `None` (the
    /// geometric series diverges).
    pub series: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub params: ModelParams,
    pub replicas: u64,
    pub points: Vec<MomentPoint>,
    /// Successive horizons differ by at most 2 combined SE.
    pub stabilized: bool,
}

/// The truncated moment `E[2^k_d ((lambda + 1) / (lambda p))^r_d]` at each
/// horizon, with its geometric-series decomposition from the same pairs.
pub fn collision_moment(
    params: &ModelParams,
    horizons: &[usize],
    replicas: u64,
    master_seed: u64,
) -> Result<MomentReport> {
    params.validate()?;
    let lambda = params.require_lambda()?;
    if params.d == 1 {
        return Err(Error::Divergent(
            "in d = 1 the walks never separate, so r_1 is infinite almost surely".into(),
        ));
    }
    check_horizons(horizons)?;
    if replicas < 2 {
        return Err(Error::InvalidParameter("need at least two pairs".into()));
    }
    let q = (1.0 + lambda) / (lambda * params.p);
    let (ln2, lnq) = (std::f64::consts::LN_2, q.ln());
    let runs = summaries(params.d, horizons, replicas, master_seed);

    let points: Vec<MomentPoint> = horizons
        .iter()
        .enumerate()
        .map(|(h, &n)| {
            let mut moment = MeanAccumulator::default();
            let mut stick = MeanAccumulator::default();
            let mut tail = MeanAccumulator::default();
            for s in &runs {
                let c = s.at[h];
                moment.push((c.splits as f64 * ln2 + c.sticks as f64 * lnq).exp());
                match s.first_stick {
                    Some(tau) if tau < n => {
                        stick.push(2f64.powi(s.splits_before_first_stick as i32));
                        tail.push(0.0);
                    }
                    _ => {
                        stick.push(0.0);
                        tail.push(2f64.powi(c.splits as i32));
                    }
                }
            }
            let (stick, tail) = (stick.estimate(), tail.estimate());
            let ratio = q * stick.mean;
            MomentPoint {
                horizon: n,
                estimate: moment.estimate(),
                stick_factor: stick,
                tail_factor: tail,
                series: (ratio < 1.0).then(|| tail.mean / (1.0 - ratio)),
            }
        })
        .collect();
    let stabilized = points.windows(2).all(|w| {
        let (a, b) = (w[0].estimate, w[1].estimate);
        a.mean.is_finite()
            && b.mean.is_finite()
            && (b.mean - a.mean).abs() <= 2.0 * a.combined_se(&b)
    });
    Ok(MomentReport {
        params: *params,
        replicas,
        points,
        stabilized,
    })
}

/// `1 / (dp - 2pC/d - 1)`, or `None` when the denominator is not positive.
pub fn upper_bound_lambda(d: usize, p: f64, c_hat: f64) -> Option<f64> {
    let d = d as f64;
    let denom = d * p - 2.0 * p * c_hat / d - 1.0;
    (denom > 0.0).then(|| 1.0 / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn one_dimension_is_forced() {
        let t = simulate_pair(1, 50, 9).unwrap();
        assert_eq!(t.theta, Some(1));
        assert_eq!(t.counts, MeetingCounts { sticks: 50, splits: 0 });
        t.check_decomposition().unwrap();
        let tails = estimate_theta_tail(1, &[10, 100], 200, 1).unwrap();
        assert!(tails.iter().all(|t| t.tail.mean == 0.0));
        let params = ModelParams::new(1, 0.5, 1.0).unwrap();
        assert!(matches!(
            collision_moment(&params, &[10], 10, 0),
            Err(Error::Divergent(_))
        ));
    }

    #[test]
    fn bound_formula() {
        let b = upper_bound_lambda(20, 0.5, 1.0).unwrap();
        assert!((b - 1.0 / 8.95).abs() < 1e-15);
        assert_eq!(upper_bound_lambda(4, 0.5, 0.0), Some(1.0));
        assert_eq!(upper_bound_lambda(2, 0.5, 0.0), None);
        let scaled: Vec<f64> = [20, 100, 500]
            .iter()
            .map(|&d| d as f64 * 0.5 * upper_bound_lambda(d, 0.5, 1.0).unwrap())
            .collect();
        assert!(scaled.windows(2).all(|w| w[1] < w[0]));
        assert!(scaled[2] > 1.0 && scaled[2] < 1.01);
    }

    #[test]
    fn streaming_summary_matches_full_trace() {
        let horizons = [5, 17, 60];
        for seed in 0..300 {
            for d in [2, 3, 5] {
                let trace = simulate_pair(d, 60, seed).unwrap();
                let s = summarize_pair(d, &horizons, seed);
                assert_eq!(s.theta, trace.theta);
                for (h, &n) in horizons.iter().enumerate() {
                    assert_eq!(s.at[h], trace.counts_up_to(n));
                }
                let dec = &trace.decomposition;
                assert_eq!(s.first_stick, dec.stick_times.first().copied());
                let before = dec.sigma.first().copied().unwrap_or(dec.rho);
                assert_eq!(s.splits_before_first_stick, before);
            }
        }
    }

    #[test]
    fn first_meeting_probability() {
        let tails = estimate_theta_tail(4, &[1], 100_000, 3).unwrap();
        assert!(tails[0].first_step_meeting.within(0.25, 3.0));
    }

    #[test]
    fn moment_is_at_least_one_and_grows_with_horizon() {
        let params = ModelParams::new(3, 0.8, 3.0).unwrap();
        let r = collision_moment(&params, &[10, 40, 160], 2000, 5).unwrap();
        assert!(r.points.iter().all(|p| p.estimate.mean >= 1.0));
        assert!(r.points.windows(2).all(|w| w[1].estimate.mean >= w[0].estimate.mean));
    }

    proptest! {
        #[test]
        fn decomposition_and_count_identities(d in 1usize..7, horizon in 1usize..120, seed in any::<u64>()) {
            let t = simulate_pair(d, horizon, seed).unwrap();
            t.check_decomposition().unwrap();
            let meetings = (0..horizon).filter(|&i| t.first[i] == t.second[i]).count() as u64;
            prop_assert_eq!(t.counts.sticks + t.counts.splits, meetings);
            let mut last = 0;
            for n in 0..=horizon {
                let c = t.counts_up_to(n);
                prop_assert!(c.sticks >= last);
                last = c.sticks;
            }
            for w in t.first.windows(2).chain(t.second.windows(2)) {
                prop_assert_eq!(w[1].level(), w[0].level() + 1);
            }
        }
    }
}
