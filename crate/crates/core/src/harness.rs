//! Seeded Monte-Carlo experiments: one drop per (seed, scheme), sweeps over
//! UE counts, and CSV / JSON output.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::allocator::{allocate, AllocOptions, Allocation};
use crate::coalition::{greedy_init, is_forbidden, rotation_refine, CoalitionStructure};
use crate::cost::{AccessMode, ConflictModel};
use crate::error::{HarnessError, MatchingError, ParamError};
use crate::topology::{generate_drop, stream_rng, ChannelState, QosTargets, SystemParams, UeProfile, STREAM_MATCHING};

/// Environment variable that overrides the configured output directory.
pub const OUT_DIR_ENV: &str = "MDMA_OUT_DIR";

/// Seed increment between attempts at an infeasible drop.
pub const RETRY_SEED_STRIDE: u64 = 1 << 32;

/// Default rate window as spectral efficiency on one subchannel (bit/s/Hz).
pub const DEFAULT_SE_MIN: f64 = 1.15;
pub const DEFAULT_SE_MAX: f64 = 3.3;

/// Access scheme under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Conflict-minimizing coalitions followed by joint allocation.
    Mdma,
    /// Singletons only; UEs beyond `M` are served round-robin.
    OmaOnly,
    /// Coalitions packed to the size cap in UE order, conflict ignored.
    ForcedHybrid,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Mdma, Scheme::OmaOnly, Scheme::ForcedHybrid];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Mdma => "mdma",
            Scheme::OmaOnly => "oma_only",
            Scheme::ForcedHybrid => "forced_hybrid",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| format!("unknown scheme `{s}`, expected one of mdma, oma_only, forced_hybrid"))
    }
}

/// Experiment description, read from TOML.
///
/// System parameters live under `[params]` with the same field names as
/// [`SystemParams`]; rates are in bit/s and default to 1.15 and 3.3 bit/s/Hz
/// on one subchannel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub params: SystemParams,
    pub seeds: Vec<u64>,
    pub ue_counts: Vec<usize>,
    pub schemes: Vec<Scheme>,
    pub rate_min: Option<f64>,
    pub rate_max: Option<f64>,
    /// Largest rotation subset tried during refinement.
    pub max_rotation_size: usize,
    /// Cap on accepted rotations per refinement.
    pub max_rotations: usize,
    /// Attempts per seed before a drop is reported infeasible.
    pub max_attempts: usize,
    pub output_dir: PathBuf,
    pub alloc: AllocOptions,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            params: SystemParams::default(),
            seeds: vec![0],
            ue_counts: vec![25],
            schemes: Scheme::ALL.to_vec(),
            rate_min: None,
            rate_max: None,
            max_rotation_size: 3,
            max_rotations: 100_000,
            max_attempts: 10,
            output_dir: PathBuf::from("out"),
            alloc: AllocOptions::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, HarnessError> {
        Ok(toml::from_str(s)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| HarnessError::ReadConfig { path: path.display().to_string(), source })?;
        Self::from_toml_str(&text)
    }

    /// Rate window, filling unset bounds from the default spectral efficiencies.
    pub fn qos(&self) -> QosTargets {
        let bw = self.params.subchannel_bandwidth();
        QosTargets {
            rate_min: self.rate_min.unwrap_or(DEFAULT_SE_MIN * bw),
            rate_max: self.rate_max.unwrap_or(DEFAULT_SE_MAX * bw),
        }
    }

    /// Same experiment with `num_ues` replaced.
    pub fn with_ue_count(&self, num_ues: usize) -> Self {
        let mut c = self.clone();
        c.params.num_ues = num_ues;
        c
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        self.params.validate()?;
        self.qos().validate()?;
        if self.seeds.is_empty() {
            return Err(ParamError::Invalid("seeds must not be empty".into()));
        }
        if self.schemes.is_empty() {
            return Err(ParamError::Invalid("schemes must not be empty".into()));
        }
        if self.max_rotation_size < 2 || self.max_attempts == 0 {
            return Err(ParamError::Invalid("max_rotation_size must be at least 2 and max_attempts positive".into()));
        }
        let grouping = self.schemes.iter().any(|s| *s != Scheme::OmaOnly);
        for &k in &self.ue_counts {
            if grouping && k <= self.params.num_subchannels {
                return Err(ParamError::Invalid(format!(
                    "ue count {k} must exceed the {} subchannels",
                    self.params.num_subchannels
                )));
            }
            self.with_ue_count(k).params.validate()?;
        }
        Ok(())
    }

    /// Output directory: an explicit override, then [`OUT_DIR_ENV`], then the config.
    pub fn resolve_output_dir(&self, explicit: Option<&Path>) -> PathBuf {
        if let Some(p) = explicit {
            return p.to_path_buf();
        }
        match std::env::var_os(OUT_DIR_ENV) {
            Some(v) if !v.is_empty() => PathBuf::from(v),
            _ => self.output_dir.clone(),
        }
    }
}

/// Outcome for one UE of one drop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UeRecord {
    pub scheme: Scheme,
    pub num_ues: usize,
    pub seed: u64,
    pub ue: usize,
    pub distance: f64,
    pub beamspace: usize,
    pub sic_capable: bool,
    /// Serving coalition; empty for time-shared OMA.
    pub coalition: Option<usize>,
    pub subchannel: Option<usize>,
    pub mode: AccessMode,
    pub power: f64,
    pub sinr: f64,
    pub rate: f64,
    pub surrogate_rate: f64,
    pub spectral_efficiency: f64,
    pub cost_pd: f64,
    pub cost_sd: f64,
    pub cost: f64,
    pub utility: f64,
}

/// Per-drop aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropSummary {
    pub scheme: Scheme,
    pub num_ues: usize,
    pub seed: u64,
    /// Seed that produced the drop after retries.
    pub drop_seed: u64,
    pub attempts: usize,
    pub mean_utility: f64,
    pub mean_cost: f64,
    pub mean_rate: f64,
    pub mean_spectral_efficiency: f64,
    pub total_power: f64,
    pub inner_iterations: usize,
    pub outer_iterations: usize,
    pub rotations: usize,
    /// Approximate total conflict of the coalition structure.
    pub conflict: Option<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropResult {
    pub summary: DropSummary,
    pub records: Vec<UeRecord>,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

/// Sample standard deviation; zero for fewer than two values.
fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs.iter().copied());
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

impl DropResult {
    /// Recomputes the aggregate means from the records.
    pub fn refresh_aggregates(&mut self) {
        let r = &self.records;
        self.summary.mean_utility = mean(r.iter().map(|x| x.utility));
        self.summary.mean_cost = mean(r.iter().map(|x| x.cost));
        self.summary.mean_rate = mean(r.iter().map(|x| x.rate));
        self.summary.mean_spectral_efficiency = mean(r.iter().map(|x| x.spectral_efficiency));
        self.summary.total_power = r.iter().map(|x| x.power).sum();
    }
}

/// Packs coalitions towards the size cap in UE id order.
///
/// Coalition `n` aims for `min(L_max, remaining - (M - n - 1))` members so
/// that every later coalition can still get one. Each UE joins the first
/// coalition below its target that it can enter without making it
/// forbidden, falling back to any coalition below the cap. Coalitions left
/// empty take the last member of the largest coalition.
pub fn forced_hybrid_structure(model: &ConflictModel, num_coalitions: usize) -> Result<CoalitionStructure, MatchingError> {
    let k = model.num_ues();
    if k < num_coalitions {
        return Err(MatchingError::TooFewUes { ues: k, coalitions: num_coalitions });
    }
    let cap = model.coalition_cap();
    let mut remaining = k;
    let mut targets = Vec::with_capacity(num_coalitions);
    for n in 0..num_coalitions {
        let t = cap.min(remaining - (num_coalitions - n - 1));
        targets.push(t);
        remaining -= t;
    }
    let mut coalitions: Vec<Vec<usize>> = vec![Vec::new(); num_coalitions];
    let admits = |members: &[usize], ue: usize| {
        let mut c = members.to_vec();
        c.push(ue);
        !is_forbidden(&c, model)
    };
    for ue in 0..k {
        let n = (0..num_coalitions)
            .find(|&n| coalitions[n].len() < targets[n] && admits(&coalitions[n], ue))
            .or_else(|| (0..num_coalitions).find(|&n| coalitions[n].len() < cap && admits(&coalitions[n], ue)))
            .ok_or(MatchingError::Infeasible(ue))?;
        coalitions[n].push(ue);
    }
    while let Some(empty) = coalitions.iter().position(Vec::is_empty) {
        let donor = (0..num_coalitions)
            .max_by_key(|&n| (coalitions[n].len(), std::cmp::Reverse(n)))
            .expect("at least one coalition");
        let ue = coalitions[donor].pop().expect("donor has members");
        coalitions[empty].push(ue);
    }
    let mut assignment = vec![0; k];
    for (n, members) in coalitions.iter().enumerate() {
        for &u in members {
            assignment[u] = n;
        }
    }
    CoalitionStructure::from_assignment(assignment, num_coalitions)
}

fn records_from_allocation(
    scheme: Scheme,
    seed: u64,
    structure: &CoalitionStructure,
    alloc: &Allocation,
    profiles: &[UeProfile],
    channels: &ChannelState,
    bandwidth: f64,
) -> Vec<UeRecord> {
    profiles
        .iter()
        .map(|u| {
            let n = structure.coalition_of(u.id);
            let m = alloc.metrics[u.id];
            UeRecord {
                scheme,
                num_ues: profiles.len(),
                seed,
                ue: u.id,
                distance: u.distance,
                beamspace: channels.beamspace(u.id),
                sic_capable: u.sic_capable,
                coalition: Some(n),
                subchannel: Some(alloc.subchannel_of[n]),
                mode: alloc.modes[n],
                power: alloc.powers[u.id],
                sinr: m.sinr,
                rate: m.rate,
                surrogate_rate: alloc.surrogate_rates[u.id],
                spectral_efficiency: m.rate / bandwidth,
                cost_pd: m.cost_pd,
                cost_sd: m.cost_sd,
                cost: m.cost,
                utility: m.utility,
            }
        })
        .collect()
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Round-robin OMA: UEs sorted by path gain are served `M` at a time; over
/// `K / gcd(K, M)` rounds each UE is served for a fraction `M / K` of them.
fn run_oma(config: &ExperimentConfig, seed: u64, profiles: &[UeProfile], channels: &ChannelState) -> Result<DropResult, String> {
    let params = &config.params;
    let k = profiles.len();
    let m = params.num_subchannels;
    let bw = params.subchannel_bandwidth();
    let model = ConflictModel::new(profiles, params).map_err(|e| e.to_string())?;
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| model.path_gain(b).total_cmp(&model.path_gain(a)).then(a.cmp(&b)));
    if k < m {
        return Err(format!("oma needs at least {m} UEs, drop has {k}"));
    }
    let rounds = k / gcd(k, m);
    let served = m;
    let mut sub_params = params.clone();
    sub_params.num_ues = served;

    #[derive(Default, Clone)]
    struct Acc {
        served: usize,
        sinr: f64,
        rate: f64,
        surrogate: f64,
        power: f64,
    }
    let mut acc = vec![Acc::default(); k];
    let (mut inner, mut outer, mut converged) = (0, 0, true);
    for r in 0..rounds {
        let ids: Vec<usize> = (0..served).map(|i| order[(r * served + i) % k]).collect();
        let sub_profiles: Vec<UeProfile> = ids
            .iter()
            .enumerate()
            .map(|(i, &u)| UeProfile { id: i, ..profiles[u].clone() })
            .collect();
        let sub_channels = ChannelState::from_parts(
            ids.iter().map(|&u| (0..m).map(|sc| channels.channel(u, sc).clone()).collect()).collect(),
            ids.iter().map(|&u| channels.beamspace(u)).collect(),
        )
        .map_err(|e| e.to_string())?;
        let structure = CoalitionStructure::singletons(served);
        let alloc = allocate(&structure, &sub_channels, &sub_profiles, &sub_params, &config.alloc).map_err(|e| e.to_string())?;
        inner += alloc.inner_iterations;
        outer += alloc.outer_iterations;
        converged &= alloc.converged;
        for (i, &u) in ids.iter().enumerate() {
            let a = &mut acc[u];
            a.served += 1;
            a.sinr += alloc.metrics[i].sinr;
            a.rate += alloc.metrics[i].rate;
            a.surrogate += alloc.surrogate_rates[i];
            a.power += alloc.powers[i];
        }
    }
    let share = 1.0 / rounds as f64;
    let records = profiles
        .iter()
        .map(|u| {
            let a = &acc[u.id];
            let rate = a.rate * share;
            UeRecord {
                scheme: Scheme::OmaOnly,
                num_ues: k,
                seed,
                ue: u.id,
                distance: u.distance,
                beamspace: channels.beamspace(u.id),
                sic_capable: u.sic_capable,
                coalition: None,
                subchannel: None,
                mode: AccessMode::Oma,
                power: a.power * share,
                sinr: if a.served > 0 { a.sinr / a.served as f64 } else { 0.0 },
                rate,
                surrogate_rate: a.surrogate * share,
                spectral_efficiency: rate / bw,
                cost_pd: 0.0,
                cost_sd: 0.0,
                cost: 0.0,
                utility: crate::cost::utility(rate, u.rate_max, u.weight, 0.0),
            }
        })
        .collect();
    Ok(finish(Scheme::OmaOnly, seed, records, inner, outer, 0, None, converged))
}

#[allow(clippy::too_many_arguments)]
fn finish(scheme: Scheme, seed: u64, records: Vec<UeRecord>, inner: usize, outer: usize, rotations: usize, conflict: Option<f64>, converged: bool) -> DropResult {
    let mut result = DropResult {
        summary: DropSummary {
            scheme,
            num_ues: records.len(),
            seed,
            drop_seed: seed,
            attempts: 1,
            mean_utility: 0.0,
            mean_cost: 0.0,
            mean_rate: 0.0,
            mean_spectral_efficiency: 0.0,
            total_power: 0.0,
            inner_iterations: inner,
            outer_iterations: outer,
            rotations,
            conflict,
            converged,
        },
        records,
    };
    result.refresh_aggregates();
    result
}

fn attempt_drop(config: &ExperimentConfig, drop_seed: u64, scheme: Scheme) -> Result<DropResult, String> {
    let params = &config.params;
    let qos = config.qos();
    let profiles = generate_drop(params, &qos, drop_seed).map_err(|e| e.to_string())?;
    let channels = ChannelState::sample(&profiles, params, drop_seed).map_err(|e| e.to_string())?;
    if scheme == Scheme::OmaOnly {
        return run_oma(config, drop_seed, &profiles, &channels);
    }
    let model = ConflictModel::new(&profiles, params).map_err(|e| e.to_string())?;
    let m = params.num_subchannels;
    let (structure, rotations) = match scheme {
        Scheme::Mdma => {
            let mut rng = stream_rng(drop_seed, STREAM_MATCHING);
            let init = greedy_init(&model, m, &mut rng).map_err(|e| e.to_string())?;
            let refined = rotation_refine(&init, &model, config.max_rotation_size, config.max_rotations);
            (refined.structure, refined.rotations)
        }
        _ => (forced_hybrid_structure(&model, m).map_err(|e| e.to_string())?, 0),
    };
    let conflict = crate::coalition::total_conflict(&structure, &model);
    let alloc = allocate(&structure, &channels, &profiles, params, &config.alloc).map_err(|e| e.to_string())?;
    let records = records_from_allocation(scheme, drop_seed, &structure, &alloc, &profiles, &channels, params.subchannel_bandwidth());
    Ok(finish(scheme, drop_seed, records, alloc.inner_iterations, alloc.outer_iterations, rotations, Some(conflict), alloc.converged))
}

/// Runs one drop end to end. An infeasible drop is regenerated from
/// `seed + attempt * RETRY_SEED_STRIDE`, up to `max_attempts` times.
pub fn run_drop(config: &ExperimentConfig, seed: u64, scheme: Scheme) -> Result<DropResult, HarnessError> {
    config.params.validate()?;
    config.qos().validate()?;
    let mut last = String::new();
    for attempt in 0..config.max_attempts {
        let drop_seed = seed.wrapping_add(attempt as u64 * RETRY_SEED_STRIDE);
        match attempt_drop(config, drop_seed, scheme) {
            Ok(mut r) => {
                r.summary.seed = seed;
                r.summary.drop_seed = drop_seed;
                r.summary.attempts = attempt + 1;
                for rec in &mut r.records {
                    rec.seed = seed;
                }
                return Ok(r);
            }
            Err(e) => {
                log::warn!("{scheme} seed {seed}: drop {drop_seed} infeasible ({e}); regenerating");
                last = e;
            }
        }
    }
    Err(HarnessError::Infeasible { seed, attempts: config.max_attempts, last })
}

/// One line of the sweep table: statistics over all UEs of all seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub num_ues: usize,
    pub scheme: Scheme,
    pub drops: usize,
    pub mean_utility: f64,
    pub std_utility: f64,
    pub mean_rate: f64,
    pub std_rate: f64,
    pub mean_cost: f64,
    pub std_cost: f64,
    pub mean_spectral_efficiency: f64,
    pub mean_total_power: f64,
    pub unconverged: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub drops: Vec<DropResult>,
}

/// Statistics for a group of drops of one (UE count, scheme).
pub fn summarize(num_ues: usize, scheme: Scheme, drops: &[&DropResult]) -> Result<SweepRow, HarnessError> {
    if drops.is_empty() {
        return Err(HarnessError::Empty("no drops for this ue count and scheme"));
    }
    let all = || drops.iter().flat_map(|d| d.records.iter());
    let u: Vec<f64> = all().map(|r| r.utility).collect();
    let r: Vec<f64> = all().map(|r| r.rate).collect();
    let c: Vec<f64> = all().map(|r| r.cost).collect();
    Ok(SweepRow {
        num_ues,
        scheme,
        drops: drops.len(),
        mean_utility: mean(u.iter().copied()),
        std_utility: std_dev(&u),
        mean_rate: mean(r.iter().copied()),
        std_rate: std_dev(&r),
        mean_cost: mean(c.iter().copied()),
        std_cost: std_dev(&c),
        mean_spectral_efficiency: mean(all().map(|r| r.spectral_efficiency)),
        mean_total_power: mean(drops.iter().map(|d| d.summary.total_power)),
        unconverged: drops.iter().filter(|d| !d.summary.converged).count(),
    })
}

/// Runs every (UE count, scheme, seed) combination in parallel. Rows follow
/// the configured UE-count order, then scheme order.
pub fn sweep(config: &ExperimentConfig) -> Result<SweepOutcome, HarnessError> {
    config.validate()?;
    let jobs: Vec<(usize, Scheme, u64)> = config
        .ue_counts
        .iter()
        .flat_map(|&k| config.schemes.iter().flat_map(move |&s| config.seeds.iter().map(move |&seed| (k, s, seed))))
        .collect();
    let drops = jobs
        .par_iter()
        .map(|&(k, s, seed)| run_drop(&config.with_ue_count(k), seed, s))
        .collect::<Result<Vec<_>, _>>()?;
    let mut rows = Vec::new();
    for &k in &config.ue_counts {
        for &s in &config.schemes {
            let group: Vec<&DropResult> = drops.iter().filter(|d| d.summary.num_ues == k && d.summary.scheme == s).collect();
            rows.push(summarize(k, s, &group)?);
        }
    }
    Ok(SweepOutcome { rows, drops })
}

/// Empirical CDF: ascending distinct values, each with the fraction of
/// samples at or below it.
pub fn empirical_cdf(values: &[f64]) -> Result<Vec<(f64, f64)>, HarnessError> {
    if values.is_empty() {
        return Err(HarnessError::Empty("cdf of an empty sample"));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(v.len());
    for (i, x) in v.into_iter().enumerate() {
        let f = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == x => last.1 = f,
            _ => out.push((x, f)),
        }
    }
    Ok(out)
}

/// Writes [`empirical_cdf`] of `values` as CSV with header `value,cdf`.
pub fn emit_cdf(values: &[f64], path: impl AsRef<Path>) -> Result<(), HarnessError> {
    let rows = empirical_cdf(values)?;
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["value", "cdf"])?;
    for (x, f) in rows {
        w.write_record([x.to_string(), f.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn write_records<'a>(path: &Path, records: impl Iterator<Item = &'a UeRecord>) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn write_cdfs(dir: &Path, suffix: &str, records: &[&UeRecord]) -> Result<(), HarnessError> {
    let metrics: [(&str, fn(&UeRecord) -> f64); 3] =
        [("utility", |r| r.utility), ("cost", |r| r.cost), ("spectral_efficiency", |r| r.spectral_efficiency)];
    for (name, f) in metrics {
        let values: Vec<f64> = records.iter().map(|r| f(r)).collect();
        emit_cdf(&values, dir.join(format!("cdf_{name}_{suffix}.csv")))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct RunSummary<'a> {
    config: &'a ExperimentConfig,
    drops: Vec<&'a DropSummary>,
}

#[derive(Serialize)]
struct SweepSummaryFile<'a> {
    config: &'a ExperimentConfig,
    rows: &'a [SweepRow],
    drops: Vec<&'a DropSummary>,
}

/// Writes per-UE records, CDFs per scheme, and `summary.json` for a set of drops.
pub fn write_run_outputs(dir: &Path, config: &ExperimentConfig, drops: &[DropResult]) -> Result<(), HarnessError> {
    fs::create_dir_all(dir)?;
    write_records(&dir.join("records.csv"), drops.iter().flat_map(|d| d.records.iter()))?;
    let mut by_scheme: BTreeMap<Scheme, Vec<&UeRecord>> = BTreeMap::new();
    for d in drops {
        by_scheme.entry(d.summary.scheme).or_default().extend(d.records.iter());
    }
    for (scheme, recs) in &by_scheme {
        write_cdfs(dir, scheme.as_str(), recs)?;
    }
    let summary = RunSummary { config, drops: drops.iter().map(|d| &d.summary).collect() };
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    Ok(())
}

/// Writes `sweep.csv`, all per-UE records, CDFs per (scheme, UE count), and
/// `summary.json`.
pub fn write_sweep_outputs(dir: &Path, config: &ExperimentConfig, outcome: &SweepOutcome) -> Result<(), HarnessError> {
    fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("sweep.csv"))?;
    for row in &outcome.rows {
        w.serialize(row)?;
    }
    w.flush()?;
    write_records(&dir.join("records.csv"), outcome.drops.iter().flat_map(|d| d.records.iter()))?;
    for row in &outcome.rows {
        let recs: Vec<&UeRecord> = outcome
            .drops
            .iter()
            .filter(|d| d.summary.num_ues == row.num_ues && d.summary.scheme == row.scheme)
            .flat_map(|d| d.records.iter())
            .collect();
        write_cdfs(dir, &format!("{}_k{}", row.scheme, row.num_ues), &recs)?;
    }
    let summary = SweepSummaryFile { config, rows: &outcome.rows, drops: outcome.drops.iter().map(|d| &d.summary).collect() };
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    Ok(())
}
