//! Metropolis-within-Gibbs sampling of the model law on `n` sites, and exact
//! enumeration of the law of `(S_n, T_n, U_n)` for small discrete systems.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interaction::Interaction;
use crate::measures::Measure;

/// Sweeps between full recomputations of the cached sums.
pub const REFRESH_INTERVAL: u64 = 256;
/// Redraws allowed when the initial configuration is identically zero.
pub const INIT_ATTEMPTS: usize = 100;
/// Largest system for which the unregularised interaction may be sampled.
pub const NATURAL_MAX_N: usize = 32;
/// Largest number of multisets [`enumerate_exact`] will visit.
pub const ENUMERATION_LIMIT: u128 = 10_000_000;

/// Name of the generator written to sample metadata.
pub const GENERATOR: &str = "xoshiro256++ (seed_from_u64)";

/// `(S_n, T_n, U_n)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SummaryTriple {
    pub s: f64,
    pub t: f64,
    pub u: f64,
}

impl SummaryTriple {
    pub fn of(config: &[f64]) -> Self {
        let mut out = SummaryTriple::default();
        for &x in config {
            let x2 = x * x;
            out.s += x;
            out.t += x2;
            out.u += x2 * x2;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanOrder {
    /// Sites `1..n` in order.
    #[default]
    Systematic,
    /// `n` uniformly chosen sites per sweep.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub chain_id: u32,
    pub sweep: u64,
    pub s: f64,
    pub t: f64,
    pub u: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ChainStats {
    pub proposals: u64,
    pub accepted: u64,
}

impl ChainStats {
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposals as f64
        }
    }

    fn merge(&mut self, other: &ChainStats) {
        self.proposals += other.proposals;
        self.accepted += other.accepted;
    }
}

/// One Markov chain: configuration, cached sums and its own generator.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub n: usize,
    pub config: Vec<f64>,
    pub sums: SummaryTriple,
    pub sweep_index: u64,
    pub stats: ChainStats,
    pub interaction: Interaction,
    pub scan: ScanOrder,
    nonzero: usize,
    energy: f64,
    rng: Xoshiro256PlusPlus,
}

impl ChainState {
    /// Draws `n` i.i.d. coordinates from `m`; the all-zero configuration is redrawn.
    pub fn new(m: &Measure, n: usize, seed: u64) -> Result<Self> {
        Self::with_interaction(m, n, seed, Interaction::Candidate)
    }

    pub fn with_interaction(
        m: &Measure,
        n: usize,
        seed: u64,
        interaction: Interaction,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("system size must be at least 1".into()));
        }
        if interaction == Interaction::Natural && n > NATURAL_MAX_N {
            return Err(Error::InvalidArgument(format!(
                "the natural interaction is only sampled for n <= {NATURAL_MAX_N}"
            )));
        }
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        for _ in 0..INIT_ATTEMPTS {
            let config = m.draw(&mut rng, n);
            let nonzero = config.iter().filter(|&&x| x != 0.0).count();
            if nonzero > 0 {
                let mut chain = ChainState {
                    n,
                    config,
                    sums: SummaryTriple::default(),
                    sweep_index: 0,
                    stats: ChainStats::default(),
                    interaction,
                    scan: ScanOrder::Systematic,
                    nonzero,
                    energy: 0.0,
                    rng,
                };
                chain.refresh();
                return Ok(chain);
            }
        }
        Err(Error::InitFailure)
    }

    /// Recomputes the sums and the cached interaction from the configuration.
    pub fn refresh(&mut self) {
        self.sums = SummaryTriple::of(&self.config);
        self.nonzero = self.config.iter().filter(|&&x| x != 0.0).count();
        self.energy = self.log_target_of(self.sums);
    }

    fn log_target_of(&self, s: SummaryTriple) -> f64 {
        self.interaction.on_sums(s.s, s.t, s.u)
    }

    /// `H(S_n, T_n, U_n)`, the log of the unnormalised density against the product law.
    pub fn log_target(&self) -> f64 {
        self.energy
    }

    /// Sums after replacing site `i` by `x`.
    #[inline]
    pub fn proposed_sums(&self, i: usize, x: f64) -> SummaryTriple {
        let old = self.config[i];
        let (o2, x2) = (old * old, x * x);
        SummaryTriple {
            s: self.sums.s - old + x,
            t: self.sums.t - o2 + x2,
            u: self.sums.u - o2 * o2 + x2 * x2,
        }
    }

    /// Metropolis update of site `i` with proposal `x`; returns whether it was accepted.
    #[inline]
    fn update_site(&mut self, i: usize, x: f64) -> bool {
        self.stats.proposals += 1;
        let old = self.config[i];
        let nonzero = self.nonzero - usize::from(old != 0.0) + usize::from(x != 0.0);
        let next = self.proposed_sums(i, x);
        if nonzero == 0 || !(next.t > 0.0) {
            return false;
        }
        let energy = self.log_target_of(next);
        let delta = energy - self.energy;
        let accept = delta >= 0.0 || self.rng.random::<f64>() < delta.exp();
        if accept {
            self.config[i] = x;
            self.sums = next;
            self.nonzero = nonzero;
            self.energy = energy;
            self.stats.accepted += 1;
        }
        accept
    }

    /// One sweep with proposals drawn from the base measure.
    pub fn sweep(&mut self, m: &Measure) {
        self.sweep_with(|rng| m.draw_one(rng));
    }

    /// One sweep with a caller-supplied proposal drawn from the chain's generator.
    pub fn sweep_with<F: FnMut(&mut Xoshiro256PlusPlus) -> f64>(&mut self, mut propose: F) {
        for k in 0..self.n {
            let i = match self.scan {
                ScanOrder::Systematic => k,
                ScanOrder::Random => self.rng.random_range(0..self.n),
            };
            let x = propose(&mut self.rng);
            self.update_site(i, x);
        }
        self.sweep_index += 1;
        if self.sweep_index.is_multiple_of(REFRESH_INTERVAL) {
            self.refresh();
        }
    }

    /// Largest relative gap between the cached sums and a fresh recomputation.
    pub fn drift(&self) -> f64 {
        let fresh = SummaryTriple::of(&self.config);
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-300);
        let scale_s = fresh.t.sqrt().max(fresh.s.abs());
        ((self.sums.s - fresh.s).abs() / scale_s.max(1e-300))
            .max(rel(self.sums.t, fresh.t))
            .max(rel(self.sums.u, fresh.u))
    }

    fn record(&self, chain_id: u32) -> SampleRecord {
        SampleRecord {
            chain_id,
            sweep: self.sweep_index,
            s: self.sums.s,
            t: self.sums.t,
            u: self.sums.u,
        }
    }
}

/// Sweep counts for one chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainPlan {
    pub sweeps: u64,
    pub burn_in: u64,
    pub thin: u64,
    #[serde(default)]
    pub scan: ScanOrder,
    #[serde(default)]
    pub interaction: Interaction,
}

impl ChainPlan {
    pub fn new(sweeps: u64, burn_in: u64, thin: u64) -> Self {
        ChainPlan {
            sweeps,
            burn_in,
            thin,
            scan: ScanOrder::Systematic,
            interaction: Interaction::Candidate,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 {
            return Err(Error::InvalidArgument("thin must be at least 1".into()));
        }
        if self.sweeps <= self.burn_in {
            return Err(Error::InvalidArgument(format!(
                "sweeps ({}) must exceed burn_in ({})",
                self.sweeps, self.burn_in
            )));
        }
        Ok(())
    }

    /// Records produced by one chain.
    pub fn records_per_chain(&self) -> u64 {
        (self.sweeps - self.burn_in) / self.thin
    }
}

/// Runs `sweeps` sweeps and records the sums every `thin` sweeps after `burn_in`.
pub fn run(
    chain: &mut ChainState,
    m: &Measure,
    chain_id: u32,
    plan: &ChainPlan,
) -> Result<Vec<SampleRecord>> {
    plan.validate()?;
    let mut out = Vec::with_capacity(plan.records_per_chain() as usize);
    let start = chain.sweep_index;
    for k in 1..=plan.sweeps {
        chain.sweep(m);
        if k > plan.burn_in && (k - plan.burn_in).is_multiple_of(plan.thin) {
            out.push(chain.record(chain_id));
        }
    }
    debug_assert_eq!(chain.sweep_index, start + plan.sweeps);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParallelRun {
    pub records: Vec<SampleRecord>,
    pub seeds: Vec<u64>,
    pub stats: Vec<ChainStats>,
}

impl ParallelRun {
    pub fn acceptance_rate(&self) -> f64 {
        let mut all = ChainStats::default();
        for s in &self.stats {
            all.merge(s);
        }
        all.acceptance_rate()
    }
}

/// Independent chains with seeds `base_seed + chain_id`, concatenated by chain.
pub fn run_parallel(
    m: &Measure,
    n: usize,
    chains: u32,
    plan: &ChainPlan,
    base_seed: u64,
) -> Result<ParallelRun> {
    if chains == 0 {
        return Err(Error::InvalidArgument("at least one chain is required".into()));
    }
    plan.validate()?;
    let seeds: Vec<u64> = (0..chains as u64).map(|c| base_seed.wrapping_add(c)).collect();
    let per_chain: Vec<(Vec<SampleRecord>, ChainStats)> = (0..chains)
        .into_par_iter()
        .map(|c| {
            let mut chain =
                ChainState::with_interaction(m, n, seeds[c as usize], plan.interaction)?;
            chain.scan = plan.scan;
            let recs = run(&mut chain, m, c, plan)?;
            Ok((recs, chain.stats))
        })
        .collect::<Result<_>>()?;
    let mut records = Vec::with_capacity(per_chain.iter().map(|p| p.0.len()).sum());
    let mut stats = Vec::with_capacity(per_chain.len());
    for (r, s) in per_chain {
        records.extend(r);
        stats.push(s);
    }
    Ok(ParallelRun {
        records,
        seeds,
        stats,
    })
}

pub const CSV_HEADER: &str = "chain_id,sweep,s,t,u";

/// Writes records as CSV with 17 significant digits.
pub fn write_csv<W: Write>(records: &[SampleRecord], mut w: W) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{:.16e},{:.16e},{:.16e}",
            r.chain_id, r.sweep, r.s, r.t, r.u
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Parses the output of [`write_csv`].
pub fn read_csv<R: BufRead>(r: R) -> Result<Vec<SampleRecord>> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .transpose()?
        .ok_or_else(|| Error::SchemaMismatch("empty sample file".into()))?;
    if header.trim_end() != CSV_HEADER {
        return Err(Error::SchemaMismatch(format!("unexpected header {header:?}")));
    }
    let mut out = Vec::new();
    for (k, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let bad = || Error::SchemaMismatch(format!("malformed row {}: {line:?}", k + 2));
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(bad());
        }
        let float = |s: &str| s.parse::<f64>().map_err(|_| bad());
        out.push(SampleRecord {
            chain_id: f[0].parse().map_err(|_| bad())?,
            sweep: f[1].parse().map_err(|_| bad())?,
            s: float(f[2])?,
            t: float(f[3])?,
            u: float(f[4])?,
        });
    }
    Ok(out)
}

/// Sidecar describing how a sample file was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMetadata {
    pub measure: serde_json::Value,
    pub n: usize,
    pub chains: u32,
    pub seeds: Vec<u64>,
    pub plan: ChainPlan,
    pub records: usize,
    pub acceptance_rate: f64,
    pub generator: String,
}

/// One attainable value of `(S_n, T_n, U_n)` with its exact probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactState {
    pub s: f64,
    pub t: f64,
    pub u: f64,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactLaw {
    pub n: usize,
    /// Normalising constant `E[exp(H) 1{T > 0}]` under the product law.
    pub z: f64,
    /// Product-law probability of `T > 0`.
    pub p_positive: f64,
    pub states: Vec<ExactState>,
    /// Law of `S_n` as sorted `(s, probability)` pairs.
    pub s_marginal: Vec<(f64, f64)>,
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) / (i + 1))
}

/// Stable key for merging sums that agree up to rounding.
fn key(v: f64) -> i128 {
    (v * 1e9).round() as i128
}

/// Exact law of the sums by enumeration over multisets of atoms.
pub fn enumerate_exact(m: &Measure, n: usize, interaction: Interaction) -> Result<ExactLaw> {
    let atoms = m
        .atoms()
        .ok_or_else(|| Error::InvalidArgument("exact enumeration needs a discrete measure".into()))?
        .to_vec();
    if n == 0 {
        return Err(Error::InvalidArgument("system size must be at least 1".into()));
    }
    let k = atoms.len();
    let count = binomial((n + k - 1) as u128, (k - 1) as u128);
    if count > ENUMERATION_LIMIT {
        return Err(Error::TooLarge(count));
    }
    let ln_fact: Vec<f64> = (0..=n)
        .scan(0.0, |acc, i| {
            if i > 0 {
                *acc += (i as f64).ln();
            }
            Some(*acc)
        })
        .collect();
    let ln_w: Vec<f64> = atoms.iter().map(|a| a.1.ln()).collect();

    let mut merged: BTreeMap<(i128, i128, i128), ExactState> = BTreeMap::new();
    let mut z = 0.0;
    let mut p_positive = 0.0;
    let mut counts = vec![0usize; k];
    counts[k - 1] = n;
    loop {
        let mut sums = SummaryTriple::default();
        let mut ln_p = ln_fact[n];
        for (j, &c) in counts.iter().enumerate() {
            if c > 0 {
                let x = atoms[j].0;
                let cf = c as f64;
                sums.s += cf * x;
                sums.t += cf * x * x;
                sums.u += cf * x.powi(4);
                ln_p += cf * ln_w[j] - ln_fact[c];
            }
        }
        let all_zero = counts
            .iter()
            .zip(&atoms)
            .all(|(&c, a)| c == 0 || a.0 == 0.0);
        if !all_zero {
            let p = ln_p.exp();
            let weight = (ln_p + interaction.on_sums(sums.s, sums.t, sums.u)).exp();
            p_positive += p;
            z += weight;
            merged
                .entry((key(sums.s), key(sums.t), key(sums.u)))
                .or_insert(ExactState {
                    s: sums.s,
                    t: sums.t,
                    u: sums.u,
                    probability: 0.0,
                })
                .probability += weight;
        }
        if !next_composition(&mut counts) {
            break;
        }
    }
    let mut states: Vec<ExactState> = merged.into_values().collect();
    for st in &mut states {
        st.probability /= z;
    }
    let mut marginal: BTreeMap<i128, (f64, f64)> = BTreeMap::new();
    for st in &states {
        marginal.entry(key(st.s)).or_insert((st.s, 0.0)).1 += st.probability;
    }
    Ok(ExactLaw {
        n,
        z,
        p_positive,
        states,
        s_marginal: marginal.into_values().collect(),
    })
}

/// Steps through all compositions of `n` into `counts.len()` nonnegative parts.
fn next_composition(counts: &mut [usize]) -> bool {
    let k = counts.len();
    let mut i = k - 1;
    while i > 0 && counts[i] == 0 {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    // Move one unit from position i to position i - 1, and push the rest of
    // position i to the end.
    let rest = counts[i] - 1;
    counts[i] = 0;
    counts[i - 1] += 1;
    counts[k - 1] += rest;
    true
}

/// Total-variation distance between an empirical and an exact law of `S_n`.
pub fn tv_distance(samples: &[f64], exact: &[(f64, f64)]) -> f64 {
    let mut emp: BTreeMap<i128, f64> = BTreeMap::new();
    let w = 1.0 / samples.len() as f64;
    for &s in samples {
        *emp.entry(key(s)).or_insert(0.0) += w;
    }
    let mut total = 0.0;
    for &(s, p) in exact {
        total += (emp.remove(&key(s)).unwrap_or(0.0) - p).abs();
    }
    total += emp.values().sum::<f64>();
    0.5 * total
}
