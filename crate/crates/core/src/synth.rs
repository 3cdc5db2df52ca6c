//! Synthetic dynamic networks with planted ground truth.
//!
//! Generation happens in two stages: [`sample_ground_truth`] draws planted
//! clusters (member sets, lifetime segments with constant or linear rate
//! programs, optional periodic on/off gating, a background noise rate) from
//! a [`SynthSpec`], and [`synthesize`] turns any ground truth — sampled or
//! hand-built — into an observed count tensor by drawing per-pair Poisson
//! edge counts. [`generate`] composes the two. Everything is deterministic
//! per seed.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lifetime::steps_to_intervals;
use crate::seed::rng_from;
use crate::tensor::DynTensor;

/// Rate law of one lifetime segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum RateFn {
    /// Fixed rate over the whole segment.
    Constant(f64),
    /// Linear ramp between the segment's first and last step.
    Linear(f64, f64),
}

/// One planted lifetime segment with inclusive bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateSegment {
    pub start: usize,
    pub end: usize,
    #[serde(flatten)]
    pub rate: RateFn,
}

impl RateSegment {
    /// Planted rate at `t`, assuming `t` lies within the segment.
    pub fn value_at(&self, t: usize) -> f64 {
        match self.rate {
            RateFn::Constant(v) => v,
            RateFn::Linear(v0, v1) => {
                if self.end == self.start {
                    v0
                } else {
                    let frac = (t - self.start) as f64 / (self.end - self.start) as f64;
                    v0 + (v1 - v0) * frac
                }
            }
        }
    }
}

/// One planted cluster: members, rate program, and the exact set of steps
/// where its rate is positive (periodic gating already applied).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthCluster {
    /// Member node ids, ascending.
    pub members: Vec<usize>,
    /// Lifetime segments carrying the rate law; ascending, non-overlapping.
    #[serde(rename = "segments")]
    pub rate_program: Vec<RateSegment>,
    /// Gating period for periodic lifetimes.
    pub period: Option<usize>,
    /// Steps with positive planted rate, ascending.
    #[serde(
        rename = "true_lifetime_intervals",
        serialize_with = "ser_steps_as_intervals",
        deserialize_with = "de_intervals_as_steps"
    )]
    pub true_lifetime: Vec<usize>,
}

fn ser_steps_as_intervals<S: serde::Serializer>(
    steps: &[usize],
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    steps_to_intervals(steps).serialize(s)
}

fn de_intervals_as_steps<'de, D: serde::Deserializer<'de>>(
    d: D,
) -> std::result::Result<Vec<usize>, D::Error> {
    let intervals: Vec<(usize, usize)> = Vec::deserialize(d)?;
    let mut steps = Vec::new();
    for (s, e) in intervals {
        if e < s {
            return Err(serde::de::Error::custom(format!(
                "interval [{s}, {e}] is reversed"
            )));
        }
        steps.extend(s..=e);
    }
    Ok(steps)
}

impl GroundTruthCluster {
    /// Planted rate at `t`: the segment value when `t` is in the (gated)
    /// lifetime, 0 otherwise.
    pub fn planted_rate(&self, t: usize) -> f64 {
        if self.true_lifetime.binary_search(&t).is_err() {
            return 0.0;
        }
        for seg in &self.rate_program {
            if t >= seg.start && t <= seg.end {
                return seg.value_at(t);
            }
        }
        0.0
    }

    /// Maximal runs of consecutive lifetime steps.
    pub fn lifetime_intervals(&self) -> Vec<(usize, usize)> {
        steps_to_intervals(&self.true_lifetime)
    }
}

/// A full planted network description, sufficient to synthesize the tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub node_count: usize,
    pub horizon: usize,
    /// Per-pair-per-step background edge rate.
    pub noise_rate: f64,
    /// Root seed the edges are drawn from.
    pub seed: u64,
    pub clusters: Vec<GroundTruthCluster>,
}

/// Parameters of the generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub node_count: usize,
    pub horizon: usize,
    pub cluster_count: usize,
    /// Inclusive member-count range per cluster.
    pub cluster_size: (usize, usize),
    /// Whether clusters may share nodes; when false members are disjoint.
    pub overlap_allowed: bool,
    /// Fraction of clusters that deliberately resample members from
    /// previously generated clusters (when overlap is allowed).
    pub overlap_fraction: f64,
    /// Ceiling on the shared portion of a deliberately overlapping cluster.
    pub overlap_share_max: f64,
    /// Fraction of clusters whose lifetime is gated periodically.
    pub periodic_fraction: f64,
    /// Inclusive gating-period range.
    pub period_range: (usize, usize),
    /// Fraction of each period the gate stays on.
    pub periodic_duty: f64,
    /// Inclusive planted-rate range; must stay within [0.0015, 1].
    pub rate_range: (f64, f64),
    /// Range the per-cluster target lifetime fraction is drawn from.
    pub lifetime_target: (f64, f64),
    /// Hard floor on the lifetime length as a fraction of the horizon.
    pub lifetime_floor: f64,
    /// Background noise rate is drawn uniformly from [0, this].
    pub background_noise_max: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec::small(0)
    }
}

impl SynthSpec {
    /// Desk-scale preset: 100 nodes, 1000 steps, 10 planted clusters.
    pub fn small(seed: u64) -> Self {
        SynthSpec {
            node_count: 100,
            horizon: 1000,
            cluster_count: 10,
            cluster_size: (8, 12),
            overlap_allowed: true,
            overlap_fraction: 0.25,
            overlap_share_max: 0.5,
            periodic_fraction: 0.25,
            period_range: (20, 500),
            periodic_duty: 0.5,
            rate_range: (0.0015, 1.0),
            lifetime_target: (0.35, 0.7),
            lifetime_floor: 0.3,
            background_noise_max: 0.01,
            seed,
        }
    }

    /// Full-protocol preset: dimensions drawn uniformly from the published
    /// ranges (|V| ∈ [100, 500], T ∈ [1000, 4000], clusters ∈ [10, 40],
    /// sizes ∈ [8, 80], periods ∈ [20, T/2]).
    pub fn paper(seed: u64) -> Self {
        let mut rng = rng_from(seed, "synth-spec-paper", 0);
        let horizon = rng.gen_range(1000..=4000);
        SynthSpec {
            node_count: rng.gen_range(100..=500),
            horizon,
            cluster_count: rng.gen_range(10..=40),
            cluster_size: (8, 80),
            period_range: (20, horizon / 2),
            ..SynthSpec::small(seed)
        }
    }

    /// Pins the planted-rate range so that every cluster's average density
    /// (which equals twice the mean rate under unit memberships) falls in
    /// the given bucket.
    pub fn with_density_bucket(mut self, lo: f64, hi: f64) -> Self {
        self.rate_range = ((lo / 2.0).max(0.0015), (hi / 2.0).min(1.0));
        self
    }

    /// Checks every knob for internal consistency; `generate` calls this
    /// first, and configuration loaders can call it to fail early.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidArgument(msg));
        if self.node_count < 2 || self.horizon < 2 {
            return fail(format!(
                "need at least 2 nodes and 2 steps, got {}x{}",
                self.node_count, self.horizon
            ));
        }
        let (s0, s1) = self.cluster_size;
        if s0 < 2 || s1 < s0 || s1 > self.node_count {
            return fail(format!(
                "cluster size range ({s0}, {s1}) invalid for {} nodes",
                self.node_count
            ));
        }
        let (r0, r1) = self.rate_range;
        if !(0.0015..=1.0).contains(&r0) || !(0.0015..=1.0).contains(&r1) || r1 < r0 {
            return fail(format!("rate range ({r0}, {r1}) outside [0.0015, 1]"));
        }
        let (p0, p1) = self.period_range;
        if p0 < 2 || p1 < p0 || p1 > self.horizon {
            return fail(format!(
                "period range ({p0}, {p1}) invalid for horizon {}",
                self.horizon
            ));
        }
        let (l0, l1) = self.lifetime_target;
        if !(l0 > 0.0 && l0 <= l1 && l1 <= 1.0) {
            return fail(format!("lifetime target range ({l0}, {l1}) invalid"));
        }
        for (name, v) in [
            ("overlap_fraction", self.overlap_fraction),
            ("overlap_share_max", self.overlap_share_max),
            ("periodic_fraction", self.periodic_fraction),
            ("lifetime_floor", self.lifetime_floor),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return fail(format!("{name} {v} outside [0, 1]"));
            }
        }
        if !(0.0..=1.0).contains(&self.periodic_duty) || self.periodic_duty == 0.0 {
            return fail(format!("periodic duty {} outside (0, 1]", self.periodic_duty));
        }
        if self.background_noise_max < 0.0 {
            return fail(format!(
                "background noise ceiling {} negative",
                self.background_noise_max
            ));
        }
        Ok(())
    }
}

/// Draws planted clusters and the background noise rate from a spec.
pub fn sample_ground_truth(spec: &SynthSpec) -> Result<GroundTruth> {
    spec.validate()?;
    let noise_rate =
        rng_from(spec.seed, "synth-noise-rate", 0).gen::<f64>() * spec.background_noise_max;

    let mut used: BTreeSet<usize> = BTreeSet::new();
    let mut prev_pool: BTreeSet<usize> = BTreeSet::new();
    let mut clusters = Vec::with_capacity(spec.cluster_count);
    for k in 0..spec.cluster_count {
        let mut rng = rng_from(spec.seed, "synth-cluster", k as u64);
        let size = rng.gen_range(spec.cluster_size.0..=spec.cluster_size.1);
        let members = sample_members(spec, &mut rng, size, &used, &prev_pool)?;
        used.extend(members.iter().copied());
        prev_pool.extend(members.iter().copied());

        let gate = if rng.gen_bool(spec.periodic_fraction) {
            let p_hi = spec.period_range.1.min(spec.horizon);
            let p = rng.gen_range(spec.period_range.0..=p_hi);
            let on = ((spec.periodic_duty * p as f64).round() as usize).clamp(1, p);
            Some((p, on))
        } else {
            None
        };

        let target = spec.lifetime_target.0
            + rng.gen::<f64>() * (spec.lifetime_target.1 - spec.lifetime_target.0);
        let floor = (spec.lifetime_floor * spec.horizon as f64).ceil() as usize;
        let (bounds, true_lifetime) =
            sample_lifetime(&mut rng, spec.horizon, target, floor, gate)?;

        let rate_program = bounds
            .into_iter()
            .map(|(start, end)| {
                let rate = if rng.gen_bool(0.5) {
                    RateFn::Constant(draw_rate(&mut rng, spec.rate_range))
                } else {
                    RateFn::Linear(
                        draw_rate(&mut rng, spec.rate_range),
                        draw_rate(&mut rng, spec.rate_range),
                    )
                };
                RateSegment { start, end, rate }
            })
            .collect();

        clusters.push(GroundTruthCluster {
            members,
            rate_program,
            period: gate.map(|(p, _)| p),
            true_lifetime,
        });
    }

    Ok(GroundTruth {
        node_count: spec.node_count,
        horizon: spec.horizon,
        noise_rate,
        seed: spec.seed,
        clusters,
    })
}

fn draw_rate(rng: &mut impl Rng, range: (f64, f64)) -> f64 {
    range.0 + rng.gen::<f64>() * (range.1 - range.0)
}

fn sample_members(
    spec: &SynthSpec,
    rng: &mut impl Rng,
    size: usize,
    used: &BTreeSet<usize>,
    prev_pool: &BTreeSet<usize>,
) -> Result<Vec<usize>> {
    let mut members: BTreeSet<usize> = BTreeSet::new();
    if !spec.overlap_allowed {
        let mut free: Vec<usize> = (0..spec.node_count).filter(|i| !used.contains(i)).collect();
        if free.len() < size {
            return Err(Error::InvalidArgument(format!(
                "disjoint clusters need {size} unused nodes but only {} remain",
                free.len()
            )));
        }
        free.shuffle(rng);
        members.extend(free.into_iter().take(size));
    } else {
        if !prev_pool.is_empty() && rng.gen_bool(spec.overlap_fraction) {
            let share_cap = ((size as f64 * spec.overlap_share_max).floor() as usize)
                .min(prev_pool.len());
            if share_cap >= 1 {
                let shared = rng.gen_range(1..=share_cap);
                let mut pool: Vec<usize> = prev_pool.iter().copied().collect();
                pool.shuffle(rng);
                members.extend(pool.into_iter().take(shared));
            }
        }
        let mut free: Vec<usize> = (0..spec.node_count)
            .filter(|i| !members.contains(i))
            .collect();
        free.shuffle(rng);
        for i in free {
            if members.len() >= size {
                break;
            }
            members.insert(i);
        }
    }
    Ok(members.into_iter().collect())
}

/// Splits `[0, horizon)` at random cut points, selects shuffled segments
/// until the target coverage is met, applies the periodic gate, and retries
/// with a growing target until the gated lifetime meets the floor.
fn sample_lifetime(
    rng: &mut impl Rng,
    horizon: usize,
    target0: f64,
    floor: usize,
    gate: Option<(usize, usize)>,
) -> Result<(Vec<(usize, usize)>, Vec<usize>)> {
    let mut target = target0;
    for _ in 0..60 {
        let seg_max = 8.min(horizon / 3).max(1);
        let seg_min = 3.min(seg_max);
        let n_seg = rng.gen_range(seg_min..=seg_max);
        let mut cuts: BTreeSet<usize> = BTreeSet::new();
        while cuts.len() < n_seg - 1 {
            cuts.insert(rng.gen_range(1..horizon));
        }
        let mut starts: Vec<usize> = Some(0).into_iter().chain(cuts).collect();
        starts.push(horizon);
        let bounds: Vec<(usize, usize)> = starts
            .windows(2)
            .map(|w| (w[0], w[1] - 1))
            .collect();

        let mut order: Vec<usize> = (0..bounds.len()).collect();
        order.shuffle(rng);
        let want = (target * horizon as f64).ceil() as usize;
        let mut chosen: Vec<usize> = Vec::new();
        let mut covered = 0;
        for idx in order {
            chosen.push(idx);
            covered += bounds[idx].1 - bounds[idx].0 + 1;
            if covered >= want {
                break;
            }
        }
        chosen.sort_unstable();
        let picked: Vec<(usize, usize)> = chosen.iter().map(|&i| bounds[i]).collect();
        let active: Vec<usize> = picked
            .iter()
            .flat_map(|&(s, e)| s..=e)
            .filter(|&t| match gate {
                Some((p, on)) => t % p < on,
                None => true,
            })
            .collect();
        if active.len() >= floor {
            return Ok((picked, active));
        }
        target = (target + 0.15).min(1.0);
    }
    Err(Error::DegenerateInput(format!(
        "could not place a lifetime covering {floor} of {horizon} steps"
    )))
}

/// Draws the observed count tensor implied by a ground truth: every member
/// pair of every cluster receives a Poisson count at each lifetime step,
/// and background edges arrive as a Poisson-superposed shower over all
/// pairs and steps.
pub fn synthesize(truth: &GroundTruth) -> Result<DynTensor> {
    let n = truth.node_count;
    if n < 2 {
        return Err(Error::DegenerateInput(
            "synthesis needs at least two nodes".to_string(),
        ));
    }
    let mut tensor = DynTensor::zeros(n, truth.horizon, false);

    for (k, cluster) in truth.clusters.iter().enumerate() {
        for &i in &cluster.members {
            if i >= n {
                return Err(Error::InvalidArgument(format!(
                    "cluster {k} member {i} out of range for {n} nodes"
                )));
            }
        }
        let mut rng = rng_from(truth.seed, "synth-edges", k as u64);
        let m = cluster.members.len();
        for &t in &cluster.true_lifetime {
            if t >= truth.horizon {
                return Err(Error::InvalidArgument(format!(
                    "cluster {k} lifetime step {t} beyond horizon {}",
                    truth.horizon
                )));
            }
            let rate = cluster.planted_rate(t);
            if rate <= 0.0 {
                continue;
            }
            let pois = Poisson::new(rate)
                .map_err(|e| Error::InvalidArgument(format!("invalid rate {rate}: {e}")))?;
            for a in 0..m {
                for b in (a + 1)..m {
                    let c: f64 = pois.sample(&mut rng);
                    if c > 0.0 {
                        tensor.add_count(cluster.members[a], cluster.members[b], t, c);
                    }
                }
            }
        }
    }

    if truth.noise_rate > 0.0 {
        let mut rng = rng_from(truth.seed, "synth-background", 0);
        let pairs = (n * (n - 1) / 2) as f64;
        let mean = truth.noise_rate * pairs * truth.horizon as f64;
        let shower = Poisson::new(mean)
            .map_err(|e| Error::InvalidArgument(format!("invalid noise mean {mean}: {e}")))?;
        let events = shower.sample(&mut rng) as u64;
        for _ in 0..events {
            let i = rng.gen_range(0..n);
            let mut j = rng.gen_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            let t = rng.gen_range(0..truth.horizon);
            tensor.add_count(i, j, t, 1.0);
        }
    }

    Ok(tensor)
}

/// Samples a ground truth from the spec and synthesizes its tensor.
pub fn generate(spec: &SynthSpec) -> Result<(DynTensor, GroundTruth)> {
    let truth = sample_ground_truth(spec)?;
    let tensor = synthesize(&truth)?;
    Ok((tensor, truth))
}

/// Builds a cluster whose lifetime is a square wave: within each period the
/// first `on_len` steps are active at a constant rate.
pub fn square_wave_cluster(
    members: Vec<usize>,
    period: usize,
    on_len: usize,
    rate: f64,
    horizon: usize,
) -> GroundTruthCluster {
    let true_lifetime: Vec<usize> = (0..horizon).filter(|t| t % period < on_len).collect();
    GroundTruthCluster {
        members,
        rate_program: vec![RateSegment {
            start: 0,
            end: horizon.saturating_sub(1),
            rate: RateFn::Constant(rate),
        }],
        period: Some(period),
        true_lifetime,
    }
}

/// Cluster density at `t` under the planted model: with every membership 1,
/// the ordered-pair sum collapses and the published formula evaluates to
/// twice the planted rate.
pub fn density_of_cluster(gt: &GroundTruthCluster, t: usize) -> f64 {
    2.0 * gt.planted_rate(t)
}

/// Mean cluster density over the cluster's lifetime steps.
pub fn average_density(gt: &GroundTruthCluster) -> f64 {
    if gt.true_lifetime.is_empty() {
        return 0.0;
    }
    let sum: f64 = gt
        .true_lifetime
        .iter()
        .map(|&t| density_of_cluster(gt, t))
        .sum();
    sum / gt.true_lifetime.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn tight_spec(seed: u64) -> SynthSpec {
        SynthSpec {
            node_count: 8,
            horizon: 1000,
            cluster_count: 1,
            cluster_size: (6, 6),
            overlap_allowed: true,
            overlap_fraction: 0.0,
            periodic_fraction: 0.0,
            rate_range: (1.0, 1.0),
            lifetime_target: (1.0, 1.0),
            background_noise_max: 0.0,
            seed,
            ..SynthSpec::small(seed)
        }
    }

    #[test]
    fn empty_spec_gives_zero_tensor() {
        let spec = SynthSpec {
            cluster_count: 0,
            background_noise_max: 0.0,
            ..SynthSpec::small(7)
        };
        let (tensor, truth) = generate(&spec).unwrap();
        assert_eq!(tensor.nnz(), 0);
        assert_eq!(truth.clusters.len(), 0);
        assert_eq!(truth.noise_rate, 0.0);
    }

    #[test]
    fn unit_rate_clique_concentrates_at_one_edge_per_pair_step() {
        let (tensor, truth) = generate(&tight_spec(3)).unwrap();
        let c = &truth.clusters[0];
        assert_eq!(c.true_lifetime.len(), 1000);
        let pairs = (c.members.len() * (c.members.len() - 1) / 2) as f64;
        let mean = tensor.total_mass() / (pairs * 1000.0);
        assert!((mean - 1.0).abs() <= 0.1, "empirical mean {mean}");

        // Tighter concentration: within 3 standard errors of the rate.
        let se = (1.0 / (pairs * 1000.0)).sqrt();
        assert!((mean - 1.0).abs() <= 3.0 * se, "mean {mean}, se {se}");
    }

    #[test]
    fn same_seed_reproduces_tensor_exactly() {
        let spec = SynthSpec::small(11);
        let (t1, g1) = generate(&spec).unwrap();
        let (t2, g2) = generate(&spec).unwrap();
        assert_eq!(t1, t2);
        assert_eq!(g1, g2);
        let (t3, _) = generate(&SynthSpec::small(12)).unwrap();
        assert_ne!(t1, t3);
    }

    #[test]
    fn small_preset_respects_planted_invariants() {
        for seed in 0..5 {
            let truth = sample_ground_truth(&SynthSpec::small(seed)).unwrap();
            assert_eq!(truth.clusters.len(), 10);
            for c in &truth.clusters {
                assert!(
                    c.true_lifetime.len() >= 300,
                    "lifetime {} below floor",
                    c.true_lifetime.len()
                );
                assert!((8..=12).contains(&c.members.len()));
                assert!(c.members.windows(2).all(|w| w[0] < w[1]));
                for seg in &c.rate_program {
                    let (lo, hi) = match seg.rate {
                        RateFn::Constant(v) => (v, v),
                        RateFn::Linear(a, b) => (a.min(b), a.max(b)),
                    };
                    assert!(lo >= 0.0015 && hi <= 1.0, "rates ({lo}, {hi})");
                }
                for &t in &c.true_lifetime {
                    assert!(c.planted_rate(t) >= 0.0015);
                }
            }
            assert!(truth.noise_rate <= 0.01);
        }
    }

    #[test]
    fn disjoint_mode_never_shares_nodes() {
        let spec = SynthSpec {
            node_count: 20,
            cluster_count: 5,
            cluster_size: (3, 3),
            overlap_allowed: false,
            ..SynthSpec::small(5)
        };
        let truth = sample_ground_truth(&spec).unwrap();
        let mut seen = BTreeSet::new();
        for c in &truth.clusters {
            for &m in &c.members {
                assert!(seen.insert(m), "node {m} appears twice");
            }
        }
        // Requesting more nodes than exist is rejected.
        let over = SynthSpec {
            cluster_count: 8,
            ..spec
        };
        assert!(sample_ground_truth(&over).is_err());
    }

    #[test]
    fn forced_overlap_shares_at_least_one_node() {
        let spec = SynthSpec {
            node_count: 60,
            cluster_count: 4,
            cluster_size: (10, 10),
            overlap_allowed: true,
            overlap_fraction: 1.0,
            overlap_share_max: 0.5,
            ..SynthSpec::small(9)
        };
        let truth = sample_ground_truth(&spec).unwrap();
        let first: BTreeSet<usize> = truth.clusters[0].members.iter().copied().collect();
        let later: BTreeSet<usize> = truth
            .clusters
            .iter()
            .skip(1)
            .flat_map(|c| c.members.iter().copied())
            .collect();
        assert!(!first.is_disjoint(&later), "no overlap produced");
    }

    #[test]
    fn periodic_gating_blanks_off_phase() {
        let spec = SynthSpec {
            periodic_fraction: 1.0,
            period_range: (10, 10),
            periodic_duty: 0.5,
            ..SynthSpec::small(2)
        };
        let truth = sample_ground_truth(&spec).unwrap();
        for c in &truth.clusters {
            assert_eq!(c.period, Some(10));
            for &t in &c.true_lifetime {
                assert!(t % 10 < 5, "step {t} is in the off phase");
            }
        }
    }

    #[test]
    fn square_wave_builder_alternates() {
        let c = square_wave_cluster(vec![0, 1, 2], 100, 50, 0.4, 400);
        assert_eq!(c.period, Some(100));
        assert_eq!(
            c.lifetime_intervals(),
            vec![(0, 49), (100, 149), (200, 249), (300, 349)]
        );
        assert_eq!(c.planted_rate(10), 0.4);
        assert_eq!(c.planted_rate(60), 0.0);
    }

    #[test]
    fn density_formula_examples() {
        let c = square_wave_cluster(vec![0, 1, 2, 3], 10, 5, 0.3, 100);
        assert_abs_diff_eq!(density_of_cluster(&c, 2), 0.6, epsilon = 1e-15);
        assert_eq!(density_of_cluster(&c, 7), 0.0);
        let double = square_wave_cluster(vec![0, 1, 2, 3], 10, 5, 0.6, 100);
        assert_abs_diff_eq!(
            density_of_cluster(&double, 2),
            2.0 * density_of_cluster(&c, 2),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(average_density(&c), 0.6, epsilon = 1e-15);
    }

    #[test]
    fn density_bucket_pins_rate_range() {
        let spec = SynthSpec::small(0).with_density_bucket(0.3, 0.4);
        assert_abs_diff_eq!(spec.rate_range.0, 0.15, epsilon = 1e-15);
        assert_abs_diff_eq!(spec.rate_range.1, 0.2, epsilon = 1e-15);
        let truth = sample_ground_truth(&spec).unwrap();
        for c in &truth.clusters {
            let d = average_density(c);
            assert!(
                (0.3 - 1e-9..=0.4 + 1e-9).contains(&d),
                "average density {d} outside bucket"
            );
        }
    }

    #[test]
    fn linear_segments_interpolate() {
        let seg = RateSegment {
            start: 10,
            end: 20,
            rate: RateFn::Linear(0.2, 0.4),
        };
        assert_abs_diff_eq!(seg.value_at(10), 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(seg.value_at(20), 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(seg.value_at(15), 0.3, epsilon = 1e-15);
    }

    #[test]
    fn ground_truth_json_round_trip() {
        let truth = sample_ground_truth(&SynthSpec::small(21)).unwrap();
        let json = serde_json::to_string(&truth).unwrap();
        let back: GroundTruth = serde_json::from_str(&json).unwrap();
        assert_eq!(truth, back);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let bad_rate = SynthSpec {
            rate_range: (0.0, 0.5),
            ..SynthSpec::small(0)
        };
        assert!(sample_ground_truth(&bad_rate).is_err());
        let bad_size = SynthSpec {
            cluster_size: (5, 3),
            ..SynthSpec::small(0)
        };
        assert!(sample_ground_truth(&bad_size).is_err());
        let bad_period = SynthSpec {
            period_range: (0, 10),
            ..SynthSpec::small(0)
        };
        assert!(sample_ground_truth(&bad_period).is_err());
    }

    #[test]
    fn paper_preset_dimensions_in_published_ranges() {
        for seed in 0..3 {
            let spec = SynthSpec::paper(seed);
            assert!((100..=500).contains(&spec.node_count));
            assert!((1000..=4000).contains(&spec.horizon));
            assert!((10..=40).contains(&spec.cluster_count));
            assert_eq!(spec.cluster_size, (8, 80));
            assert_eq!(spec.period_range.1, spec.horizon / 2);
            spec.validate().unwrap();
        }
    }
}
