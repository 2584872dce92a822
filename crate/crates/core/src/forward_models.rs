//! One generation of diploid reproduction: the pairwise offspring array
//! `V_{i,j}` of each population model, plus analytic pair coalescence
//! probabilities where they are available.
//!
//! Individuals are indexed `0..N`. Couples are unordered, stored with
//! `i < j`, and selfing never occurs.

use std::collections::{HashMap, HashSet};
use std::fmt;

use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::rng::open_unit;

pub type Rational = Ratio<i128>;

fn default_resample_cap() -> u32 {
    100
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("{field}: {message}")]
    Invalid { field: &'static str, message: String },
    #[error("{what} resampling exceeded the cap of {cap} attempts")]
    ResampleCap { what: &'static str, cap: u32 },
    #[error("{tracked} tracked individuals exceed the population size {n_pop}")]
    Capacity { tracked: usize, n_pop: usize },
    #[error("offspring matrix invalid: {0}")]
    Matrix(String),
}

fn invalid(field: &'static str, message: impl Into<String>) -> ModelError {
    ModelError::Invalid { field, message: message.into() }
}

/// Law of the individual fitness `W`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum FitnessLaw {
    PointMass {
        value: f64,
    },
    /// `P(W > x) = (x / x_min)^(-alpha)` for `x >= x_min`.
    Pareto {
        alpha: f64,
        x_min: f64,
    },
    /// Finite discrete law. `tail` declares the `(alpha, c_w)` to use for
    /// the heavy-tailed asymptote, since a finite table has no tail.
    Tabulated {
        values: Vec<f64>,
        probs: Vec<f64>,
        #[serde(default)]
        tail: Option<TailSpec>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailSpec {
    pub alpha: f64,
    pub c: f64,
}

impl FitnessLaw {
    fn validate(&self) -> Result<(), ModelError> {
        match self {
            FitnessLaw::PointMass { value } => {
                if !(value.is_finite() && *value > 0.0) {
                    return Err(invalid("fitness.value", format!("{value} must be positive")));
                }
            }
            FitnessLaw::Pareto { alpha, x_min } => {
                if !(*alpha > 1.0 && *alpha < 2.0) {
                    return Err(invalid("fitness.alpha", format!("{alpha} outside the open interval (1,2)")));
                }
                if !(x_min.is_finite() && *x_min > 0.0) {
                    return Err(invalid("fitness.x_min", format!("{x_min} must be positive")));
                }
            }
            FitnessLaw::Tabulated { values, probs, tail } => {
                if values.is_empty() || values.len() != probs.len() {
                    return Err(invalid("fitness.values", "values and probs must be non-empty and of equal length"));
                }
                if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return Err(invalid("fitness.values", "values must be finite and non-negative"));
                }
                if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                    return Err(invalid("fitness.probs", "probabilities must be non-negative"));
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(invalid("fitness.probs", format!("probabilities sum to {total}, not 1")));
                }
                if self.mean() <= 0.0 {
                    return Err(invalid("fitness.values", "mean fitness must be positive"));
                }
                if let Some(t) = tail {
                    if !(t.alpha > 1.0 && t.alpha < 2.0) {
                        return Err(invalid("fitness.tail.alpha", format!("{} outside the open interval (1,2)", t.alpha)));
                    }
                    if !(t.c.is_finite() && t.c > 0.0) {
                        return Err(invalid("fitness.tail.c", format!("{} must be positive", t.c)));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        match self {
            FitnessLaw::PointMass { value } => *value,
            FitnessLaw::Pareto { alpha, x_min } => alpha * x_min / (alpha - 1.0),
            FitnessLaw::Tabulated { values, probs, .. } => values.iter().zip(probs).map(|(v, p)| v * p).sum(),
        }
    }

    /// `E[W^2]`, infinite for Pareto laws with `alpha < 2`.
    pub fn second_moment(&self) -> f64 {
        match self {
            FitnessLaw::PointMass { value } => value * value,
            FitnessLaw::Pareto { .. } => f64::INFINITY,
            FitnessLaw::Tabulated { values, probs, .. } => values.iter().zip(probs).map(|(v, p)| v * v * p).sum(),
        }
    }

    /// `(alpha, c_W)` with `P(W >= x) ~ c_W x^(-alpha)`, if heavy-tailed.
    pub fn tail(&self) -> Option<TailSpec> {
        match self {
            FitnessLaw::PointMass { .. } => None,
            FitnessLaw::Pareto { alpha, x_min } => Some(TailSpec { alpha: *alpha, c: x_min.powf(*alpha) }),
            FitnessLaw::Tabulated { tail, .. } => *tail,
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            FitnessLaw::PointMass { value } => *value,
            FitnessLaw::Pareto { alpha, x_min } => x_min * open_unit(rng).powf(-1.0 / alpha),
            FitnessLaw::Tabulated { values, probs, .. } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (v, p) in values.iter().zip(probs) {
                    acc += p;
                    if u < acc {
                        return *v;
                    }
                }
                *values.last().expect("validated non-empty")
            }
        }
    }

    fn id(&self) -> String {
        match self {
            FitnessLaw::PointMass { value } => format!("point:{value}"),
            FitnessLaw::Pareto { alpha, x_min } => format!("pareto:alpha={alpha}:x_min={x_min}"),
            FitnessLaw::Tabulated { values, .. } => format!("tabulated:{}", values.len()),
        }
    }
}

/// Law of the potential offspring count `X >= 1` of an active couple.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum PotentialOffspringLaw {
    Constant { value: u64 },
    /// `1 + Poisson(lambda)`.
    OnePlusPoisson { lambda: f64 },
    /// `X = floor(Y)` with `P(Y > y) = (y / x_min)^(-alpha)`, `x_min >= 1`,
    /// so that `P(X > k) ~ x_min^alpha k^(-alpha)`.
    ParetoFloor { alpha: f64, x_min: f64 },
}

impl PotentialOffspringLaw {
    fn validate(&self) -> Result<(), ModelError> {
        match self {
            PotentialOffspringLaw::Constant { value } if *value == 0 => {
                Err(invalid("offspring.value", "potential offspring count must be at least 1"))
            }
            PotentialOffspringLaw::OnePlusPoisson { lambda } if !(lambda.is_finite() && *lambda >= 0.0) => {
                Err(invalid("offspring.lambda", format!("{lambda} must be non-negative")))
            }
            PotentialOffspringLaw::ParetoFloor { alpha, .. } if !(*alpha > 1.0 && *alpha < 2.0) => {
                Err(invalid("offspring.alpha", format!("{alpha} outside the open interval (1,2)")))
            }
            PotentialOffspringLaw::ParetoFloor { x_min, .. } if !(x_min.is_finite() && *x_min >= 1.0) => {
                Err(invalid("offspring.x_min", format!("{x_min} must be at least 1")))
            }
            _ => Ok(()),
        }
    }

    /// `mu_X = E[X]`.
    pub fn mean(&self) -> f64 {
        match self {
            PotentialOffspringLaw::Constant { value } => *value as f64,
            PotentialOffspringLaw::OnePlusPoisson { lambda } => 1.0 + lambda,
            PotentialOffspringLaw::ParetoFloor { alpha, x_min } => {
                // sum over m >= 1 of P(Y >= m) = min(1, (m / x_min)^(-alpha))
                let floor = x_min.floor();
                floor + x_min.powf(*alpha) * hurwitz_zeta(*alpha, floor + 1.0)
            }
        }
    }

    /// `E[X(X-1)]`, infinite for heavy tails.
    pub fn second_factorial_moment(&self) -> f64 {
        match self {
            PotentialOffspringLaw::Constant { value } => (*value as f64) * (*value as f64 - 1.0),
            PotentialOffspringLaw::OnePlusPoisson { lambda } => lambda * lambda + 2.0 * lambda,
            PotentialOffspringLaw::ParetoFloor { .. } => f64::INFINITY,
        }
    }

    /// `(alpha, c_X2)` with `P(X > k) ~ c_X2 k^(-alpha)`, if heavy-tailed.
    pub fn tail(&self) -> Option<TailSpec> {
        match self {
            PotentialOffspringLaw::ParetoFloor { alpha, x_min } => Some(TailSpec { alpha: *alpha, c: x_min.powf(*alpha) }),
            _ => None,
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match self {
            PotentialOffspringLaw::Constant { value } => *value,
            PotentialOffspringLaw::OnePlusPoisson { lambda } => {
                if *lambda == 0.0 {
                    1
                } else {
                    1 + Poisson::new(*lambda).expect("validated").sample(rng) as u64
                }
            }
            PotentialOffspringLaw::ParetoFloor { alpha, x_min } => {
                let y = x_min * open_unit(rng).powf(-1.0 / alpha);
                // y >= 1 always; saturate far beyond any population size
                y.min(1e18).floor() as u64
            }
        }
    }

    fn id(&self) -> String {
        match self {
            PotentialOffspringLaw::Constant { value } => format!("constant:{value}"),
            PotentialOffspringLaw::OnePlusPoisson { lambda } => format!("one_plus_poisson:{lambda}"),
            PotentialOffspringLaw::ParetoFloor { alpha, x_min } => format!("pareto_floor:alpha={alpha}:x_min={x_min}"),
        }
    }
}

/// Hurwitz zeta `sum_{k >= 0} (a + k)^(-s)` for `s > 1`, `a > 0`, by
/// Euler-Maclaurin summation.
fn hurwitz_zeta(s: f64, a: f64) -> f64 {
    const M: usize = 24;
    // B_{2j} / (2j)!
    const B: [f64; 6] = [
        1.0 / 12.0,
        -1.0 / 720.0,
        1.0 / 30240.0,
        -1.0 / 1209600.0,
        1.0 / 47900160.0,
        -691.0 / 1307674368000.0,
    ];
    let mut sum: f64 = (0..M).map(|k| (a + k as f64).powf(-s)).sum();
    let x = a + M as f64;
    sum += x.powf(1.0 - s) / (s - 1.0) + 0.5 * x.powf(-s);
    // rising product s (s+1) ... (s+2j-2)
    let mut rising = s;
    let mut xp = x.powf(-s - 1.0);
    for (j, b) in B.iter().enumerate() {
        sum += b * rising * xp;
        let base = s + (2 * j + 1) as f64;
        rising *= base * (base + 1.0);
        xp /= x * x;
    }
    sum
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoupleLaw {
    /// Children placed uniformly and independently on couples.
    #[default]
    Multinomial,
    /// Every couple has exactly two children.
    Equal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    WrightFisher {
        n_pop: usize,
    },
    RandomFitness {
        n_pop: usize,
        fitness: FitnessLaw,
        #[serde(default = "default_resample_cap")]
        resample_cap: u32,
    },
    GaltonWatsonSampling {
        n_pop: usize,
        c_x1: f64,
        offspring: PotentialOffspringLaw,
        #[serde(default = "default_resample_cap")]
        resample_cap: u32,
    },
    /// `n_couples` monogamous couples, population size `2 n_couples`.
    FixedCouples {
        n_couples: usize,
        #[serde(default)]
        couple_law: CoupleLaw,
    },
    LargeFamily {
        n_pop: usize,
        psi: f64,
        gamma: f64,
    },
}

/// Largest population size; individual indices are stored as `u32`.
pub const MAX_POPULATION: usize = u32::MAX as usize / 2;

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let n = self.n_pop();
        if !(2..=MAX_POPULATION).contains(&n) {
            return Err(invalid("n_pop", format!("{n} outside 2..={MAX_POPULATION}")));
        }
        match self {
            ModelConfig::WrightFisher { .. } | ModelConfig::FixedCouples { .. } => Ok(()),
            ModelConfig::RandomFitness { fitness, .. } => fitness.validate(),
            ModelConfig::GaltonWatsonSampling { n_pop, c_x1, offspring, .. } => {
                offspring.validate()?;
                if !(c_x1.is_finite() && *c_x1 > 0.0) {
                    return Err(invalid("c_x1", format!("{c_x1} must be positive")));
                }
                if *c_x1 >= *n_pop as f64 {
                    return Err(invalid("c_x1", format!("activity probability c_x1/N = {} exceeds 1", c_x1 / *n_pop as f64)));
                }
                let mu = offspring.mean();
                if mu <= 2.0 / c_x1 {
                    return Err(invalid("offspring", format!("mean {mu} must exceed 2/c_x1 = {}", 2.0 / c_x1)));
                }
                Ok(())
            }
            ModelConfig::LargeFamily { n_pop, psi, gamma } => {
                if !(*psi > 0.0 && *psi < 1.0) {
                    return Err(invalid("psi", format!("{psi} outside the open interval (0,1)")));
                }
                if !(gamma.is_finite() && *gamma > 0.0) {
                    return Err(invalid("gamma", format!("{gamma} must be positive")));
                }
                if *n_pop < 4 {
                    return Err(invalid("n_pop", "large-family model needs at least 4 individuals"));
                }
                if (psi * *n_pop as f64).floor() < 1.0 {
                    return Err(invalid("psi", "floor(psi N) must be at least 1"));
                }
                Ok(())
            }
        }
    }

    /// Population size `N`.
    pub fn n_pop(&self) -> usize {
        match self {
            ModelConfig::WrightFisher { n_pop }
            | ModelConfig::RandomFitness { n_pop, .. }
            | ModelConfig::GaltonWatsonSampling { n_pop, .. }
            | ModelConfig::LargeFamily { n_pop, .. } => *n_pop,
            ModelConfig::FixedCouples { n_couples, .. } => 2 * n_couples,
        }
    }

    /// Same model at another population size.
    pub fn with_n_pop(&self, n: usize) -> ModelConfig {
        let mut c = self.clone();
        match &mut c {
            ModelConfig::WrightFisher { n_pop }
            | ModelConfig::RandomFitness { n_pop, .. }
            | ModelConfig::GaltonWatsonSampling { n_pop, .. }
            | ModelConfig::LargeFamily { n_pop, .. } => *n_pop = n,
            ModelConfig::FixedCouples { n_couples, .. } => *n_couples = n / 2,
        }
        c
    }

    /// Short identifier used in output files.
    pub fn id(&self) -> String {
        match self {
            ModelConfig::WrightFisher { .. } => "wright_fisher".into(),
            ModelConfig::RandomFitness { fitness, .. } => format!("random_fitness({})", fitness.id()),
            ModelConfig::GaltonWatsonSampling { c_x1, offspring, .. } => {
                format!("galton_watson(c_x1={c_x1}:{})", offspring.id())
            }
            ModelConfig::FixedCouples { couple_law, .. } => format!("fixed_couples({couple_law:?})").to_lowercase(),
            ModelConfig::LargeFamily { psi, gamma, .. } => format!("large_family(psi={psi}:gamma={gamma})"),
        }
    }

    /// `floor(psi N)` for the large-family model.
    pub fn large_family_size(&self) -> Option<usize> {
        match self {
            ModelConfig::LargeFamily { n_pop, psi, .. } => Some((psi * *n_pop as f64).floor() as usize),
            _ => None,
        }
    }
}

impl fmt::Display for ModelConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

/// One generation's pairwise offspring numbers, stored sparsely.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OffspringMatrix {
    n_pop: usize,
    /// `(i, j, count)` with `i < j`, `count >= 1`, sorted.
    entries: Vec<(u32, u32, u32)>,
    /// Whole-generation resamples needed to produce this matrix.
    pub resamples: u32,
}

impl OffspringMatrix {
    /// Validates and canonicalizes; pairs may be given in either order.
    pub fn from_entries(n_pop: usize, entries: Vec<(u32, u32, u32)>) -> Result<Self, ModelError> {
        let mut canon: Vec<(u32, u32, u32)> = Vec::with_capacity(entries.len());
        for (i, j, c) in entries {
            if i == j {
                return Err(ModelError::Matrix(format!("self-fertilisation entry ({i},{i})")));
            }
            if i.max(j) as usize >= n_pop {
                return Err(ModelError::Matrix(format!("individual {} outside 0..{n_pop}", i.max(j))));
            }
            if c > 0 {
                canon.push((i.min(j), i.max(j), c));
            }
        }
        canon.sort_unstable();
        if canon.windows(2).any(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(ModelError::Matrix("duplicate couple".into()));
        }
        let total: u64 = canon.iter().map(|e| e.2 as u64).sum();
        if total != n_pop as u64 {
            return Err(ModelError::Matrix(format!("counts sum to {total}, expected {n_pop}")));
        }
        Ok(Self { n_pop, entries: canon, resamples: 0 })
    }

    /// Builds from a list of child couples (one per child).
    fn from_child_couples(n_pop: usize, mut couples: Vec<(u32, u32)>, resamples: u32) -> Self {
        couples.sort_unstable();
        let mut entries: Vec<(u32, u32, u32)> = Vec::new();
        for (i, j) in couples {
            match entries.last_mut() {
                Some(e) if e.0 == i && e.1 == j => e.2 += 1,
                _ => entries.push((i, j, 1)),
            }
        }
        Self { n_pop, entries, resamples }
    }

    pub fn n_pop(&self) -> usize {
        self.n_pop
    }

    pub fn entries(&self) -> &[(u32, u32, u32)] {
        &self.entries
    }

    /// `V_{i,j}`.
    pub fn get(&self, i: u32, j: u32) -> u32 {
        let key = (i.min(j), i.max(j));
        self.entries
            .binary_search_by(|e| (e.0, e.1).cmp(&key))
            .map_or(0, |k| self.entries[k].2)
    }

    /// Total offspring numbers `V_i = sum_j V_{i,j}`.
    pub fn totals(&self) -> Vec<u32> {
        let mut v = vec![0u32; self.n_pop];
        for &(i, j, c) in &self.entries {
            v[i as usize] += c;
            v[j as usize] += c;
        }
        v
    }

    /// Sum of all counts; equals `N` for every valid matrix.
    pub fn total_children(&self) -> u64 {
        self.entries.iter().map(|e| e.2 as u64).sum()
    }

    /// Couples of `k` distinct children chosen uniformly at random.
    pub fn sample_child_couples<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Result<Vec<(u32, u32)>, ModelError> {
        if k > self.n_pop {
            return Err(ModelError::Capacity { tracked: k, n_pop: self.n_pop });
        }
        let mut cumulative = Vec::with_capacity(self.entries.len());
        let mut acc = 0u64;
        for e in &self.entries {
            acc += e.2 as u64;
            cumulative.push(acc);
        }
        Ok(distinct_indices(acc, k, rng)
            .into_iter()
            .map(|child| {
                let idx = cumulative.partition_point(|&c| c <= child);
                (self.entries[idx].0, self.entries[idx].1)
            })
            .collect())
    }
}

/// `k` distinct uniform draws from `0..n`, in draw order.
pub(crate) fn distinct_indices<R: Rng + ?Sized>(n: u64, k: usize, rng: &mut R) -> Vec<u64> {
    debug_assert!(k as u64 <= n);
    if (k as u64) * 2 > n {
        // dense: partial Fisher-Yates
        let mut all: Vec<u64> = (0..n).collect();
        let (chosen, _) = all.partial_shuffle(rng, k);
        return chosen.to_vec();
    }
    let mut seen = HashSet::with_capacity(k);
    let mut out = Vec::with_capacity(k);
    while out.len() < k {
        let x = rng.random_range(0..n);
        if seen.insert(x) {
            out.push(x);
        }
    }
    out
}

/// Uniform unordered pair of distinct members of `0..n`.
#[inline]
fn uniform_pair<R: Rng + ?Sized>(n: u32, rng: &mut R) -> (u32, u32) {
    let i = rng.random_range(0..n);
    let mut j = rng.random_range(0..n - 1);
    if j >= i {
        j += 1;
    }
    (i.min(j), i.max(j))
}

/// Index of the pair `i < j` in the row-major enumeration of `C(n,2)`.
#[inline]
fn pair_from_index(n: u64, idx: u64) -> (u32, u32) {
    // row i holds n-1-i pairs; find i by solving the quadratic then fix up
    let nf = n as f64;
    let disc = (2.0 * nf - 1.0).powi(2) - 8.0 * idx as f64;
    let mut i = (((2.0 * nf - 1.0) - disc.max(0.0).sqrt()) / 2.0).floor() as u64;
    let row_start = |i: u64| i * (2 * n - i - 1) / 2;
    while i > 0 && row_start(i) > idx {
        i -= 1;
    }
    while row_start(i + 1) <= idx {
        i += 1;
    }
    let j = i + 1 + (idx - row_start(i));
    (i as u32, j as u32)
}

/// Fitness vector with `Z_N > 0` and its derived samplers.
struct FitnessDraw {
    /// prefix sums of `W_i`
    cum_w: Vec<f64>,
    /// prefix sums of `W_i (S - W_i)`
    cum_first: Vec<f64>,
    w: Vec<f64>,
}

impl FitnessDraw {
    fn new<R: Rng + ?Sized>(law: &FitnessLaw, n: usize, cap: u32, rng: &mut R) -> Result<(Self, u32), ModelError> {
        let mut resamples = 0;
        loop {
            let w: Vec<f64> = (0..n).map(|_| law.sample(rng)).collect();
            // Z_N > 0 iff at least two weights are positive
            if w.iter().filter(|&&x| x > 0.0).count() >= 2 {
                let mut cum_w = Vec::with_capacity(n);
                let mut acc = 0.0;
                for &x in &w {
                    acc += x;
                    cum_w.push(acc);
                }
                let s = acc;
                let mut cum_first = Vec::with_capacity(n);
                let mut acc = 0.0;
                for &x in &w {
                    acc += x * (s - x);
                    cum_first.push(acc);
                }
                return Ok((Self { cum_w, cum_first, w }, resamples));
            }
            resamples += 1;
            if resamples > cap {
                return Err(ModelError::ResampleCap { what: "Z_N = 0", cap });
            }
        }
    }

    fn search(cum: &[f64], target: f64) -> usize {
        cum.partition_point(|&c| c <= target).min(cum.len() - 1)
    }

    /// Unordered couple with probability `W_i W_j / Z_N`: the first parent
    /// with weight `W_i (S - W_i)`, the second with weight `W_j`, `j != i`.
    fn couple<R: Rng + ?Sized>(&self, rng: &mut R) -> (u32, u32) {
        let total_first = *self.cum_first.last().expect("n >= 2");
        let mut i = Self::search(&self.cum_first, rng.random::<f64>() * total_first);
        while self.w[i] <= 0.0 || self.w[i] >= *self.cum_w.last().unwrap() {
            // zero-probability index hit through rounding
            i = Self::search(&self.cum_first, rng.random::<f64>() * total_first);
        }
        let s = *self.cum_w.last().unwrap();
        let start_i = self.cum_w[i] - self.w[i];
        loop {
            let mut t = rng.random::<f64>() * (s - self.w[i]);
            if t >= start_i {
                t += self.w[i];
            }
            let j = Self::search(&self.cum_w, t);
            if j != i && self.w[j] > 0.0 {
                return (i.min(j) as u32, i.max(j) as u32);
            }
        }
    }
}

/// Galton-Watson generation: active couples, their potential offspring
/// and the prefix sums over them.
struct GwDraw {
    counts: Vec<u64>,
    cumulative: Vec<u64>,
    resamples: u32,
}

impl GwDraw {
    fn new<R: Rng + ?Sized>(
        n: usize,
        c_x1: f64,
        law: &PotentialOffspringLaw,
        cap: u32,
        rng: &mut R,
    ) -> Result<Self, ModelError> {
        let pairs = (n as u64) * (n as u64 - 1) / 2;
        let p = c_x1 / n as f64;
        let active = Binomial::new(pairs, p).map_err(|e| invalid("c_x1", e.to_string()))?;
        let mut resamples = 0;
        loop {
            let m = active.sample(rng);
            let counts: Vec<u64> = (0..m).map(|_| law.sample(rng)).collect();
            let mut cumulative = Vec::with_capacity(counts.len());
            let mut acc = 0u64;
            for &x in &counts {
                acc = acc.saturating_add(x);
                cumulative.push(acc);
            }
            if acc >= n as u64 {
                return Ok(Self { counts, cumulative, resamples });
            }
            resamples += 1;
            if resamples > cap {
                return Err(ModelError::ResampleCap { what: "S_N < N", cap });
            }
        }
    }

    fn total(&self) -> u64 {
        *self.cumulative.last().unwrap_or(&0)
    }

    fn owner(&self, juvenile: u64) -> usize {
        self.cumulative.partition_point(|&c| c <= juvenile)
    }
}

/// Draws one generation's offspring matrix.
pub fn sample_offspring<R: Rng + ?Sized>(config: &ModelConfig, rng: &mut R) -> Result<OffspringMatrix, ModelError> {
    let n = config.n_pop();
    let n32 = n as u32;
    match config {
        ModelConfig::WrightFisher { .. } => {
            let couples = (0..n).map(|_| uniform_pair(n32, rng)).collect();
            Ok(OffspringMatrix::from_child_couples(n, couples, 0))
        }
        ModelConfig::RandomFitness { fitness, resample_cap, .. } => {
            let (draw, resamples) = FitnessDraw::new(fitness, n, *resample_cap, rng)?;
            let couples = (0..n).map(|_| draw.couple(rng)).collect();
            Ok(OffspringMatrix::from_child_couples(n, couples, resamples))
        }
        ModelConfig::GaltonWatsonSampling { c_x1, offspring, resample_cap, .. } => {
            let draw = GwDraw::new(n, *c_x1, offspring, *resample_cap, rng)?;
            let pairs = (n as u64) * (n as u64 - 1) / 2;
            let identities = distinct_indices(pairs, draw.counts.len(), rng);
            let mut per_pair = vec![0u32; draw.counts.len()];
            for juvenile in distinct_indices(draw.total(), n, rng) {
                per_pair[draw.owner(juvenile)] += 1;
            }
            let entries = per_pair
                .iter()
                .zip(&identities)
                .filter(|(&c, _)| c > 0)
                .map(|(&c, &idx)| {
                    let (i, j) = pair_from_index(n as u64, idx);
                    (i, j, c)
                })
                .collect::<Vec<_>>();
            let mut m = OffspringMatrix::from_entries(n, entries)?;
            m.resamples = draw.resamples;
            Ok(m)
        }
        ModelConfig::FixedCouples { n_couples, couple_law } => {
            let mut people: Vec<u32> = (0..n32).collect();
            people.shuffle(rng);
            let k = *n_couples;
            let mut per_couple = vec![0u32; k];
            match couple_law {
                CoupleLaw::Multinomial => {
                    for _ in 0..n {
                        per_couple[rng.random_range(0..k)] += 1;
                    }
                }
                CoupleLaw::Equal => per_couple.iter_mut().for_each(|c| *c = 2),
            }
            let entries = (0..k)
                .filter(|&c| per_couple[c] > 0)
                .map(|c| (people[2 * c], people[2 * c + 1], per_couple[c]))
                .collect();
            OffspringMatrix::from_entries(n, entries)
        }
        ModelConfig::LargeFamily { gamma, .. } => {
            if open_unit(rng) <= (n as f64).powf(-gamma) {
                let psi_n = config.large_family_size().expect("large family");
                let (a, b) = uniform_pair(n32, rng);
                let mut couples = vec![(a, b); psi_n];
                for _ in psi_n..n {
                    couples.push(pair_avoiding(n32, a, b, rng));
                }
                Ok(OffspringMatrix::from_child_couples(n, couples, 0))
            } else {
                let couples = (0..n).map(|_| uniform_pair(n32, rng)).collect();
                Ok(OffspringMatrix::from_child_couples(n, couples, 0))
            }
        }
    }
}

/// Uniform couple among `0..n` minus `{a, b}`, with `a < b`.
fn pair_avoiding<R: Rng + ?Sized>(n: u32, a: u32, b: u32, rng: &mut R) -> (u32, u32) {
    let lift = |x: u32| {
        let x = if x >= a { x + 1 } else { x };
        if x >= b {
            x + 1
        } else {
            x
        }
    };
    let (i, j) = uniform_pair(n - 2, rng);
    (lift(i), lift(j))
}

/// Parental couples of `k` distinct uniformly chosen children of one
/// generation, drawn without building the full offspring matrix. The joint
/// law equals that of [`OffspringMatrix::sample_child_couples`] applied to
/// [`sample_offspring`].
pub fn sample_parent_couples<R: Rng + ?Sized>(
    config: &ModelConfig,
    k: usize,
    rng: &mut R,
) -> Result<(Vec<(u32, u32)>, u32), ModelError> {
    let n = config.n_pop();
    if k > n {
        return Err(ModelError::Capacity { tracked: k, n_pop: n });
    }
    let n32 = n as u32;
    match config {
        ModelConfig::WrightFisher { .. } => Ok(((0..k).map(|_| uniform_pair(n32, rng)).collect(), 0)),
        ModelConfig::RandomFitness { fitness, resample_cap, .. } => {
            let (draw, resamples) = FitnessDraw::new(fitness, n, *resample_cap, rng)?;
            Ok(((0..k).map(|_| draw.couple(rng)).collect(), resamples))
        }
        ModelConfig::GaltonWatsonSampling { c_x1, offspring, resample_cap, .. } => {
            let draw = GwDraw::new(n, *c_x1, offspring, *resample_cap, rng)?;
            // k distinct sampled children are k distinct juveniles
            let mut identity: HashMap<usize, (u32, u32)> = HashMap::new();
            let mut used: HashSet<(u32, u32)> = HashSet::new();
            let couples = distinct_indices(draw.total(), k, rng)
                .into_iter()
                .map(|juv| {
                    let owner = draw.owner(juv);
                    *identity.entry(owner).or_insert_with(|| loop {
                        let p = uniform_pair(n32, rng);
                        if used.insert(p) {
                            break p;
                        }
                    })
                })
                .collect();
            Ok((couples, draw.resamples))
        }
        ModelConfig::FixedCouples { n_couples, couple_law } => {
            let couple_ids: Vec<usize> = match couple_law {
                CoupleLaw::Multinomial => (0..k).map(|_| rng.random_range(0..*n_couples)).collect(),
                CoupleLaw::Equal => distinct_indices(n as u64, k, rng).into_iter().map(|c| (c / 2) as usize).collect(),
            };
            // reveal the random matching lazily
            let mut revealed: HashMap<usize, (u32, u32)> = HashMap::new();
            let mut matched: HashSet<u32> = HashSet::new();
            let fresh = |rng: &mut R, matched: &mut HashSet<u32>| loop {
                let x = rng.random_range(0..n32);
                if matched.insert(x) {
                    break x;
                }
            };
            let couples = couple_ids
                .into_iter()
                .map(|c| {
                    *revealed.entry(c).or_insert_with(|| {
                        let a = fresh(rng, &mut matched);
                        let b = fresh(rng, &mut matched);
                        (a.min(b), a.max(b))
                    })
                })
                .collect();
            Ok((couples, 0))
        }
        ModelConfig::LargeFamily { gamma, .. } => {
            if open_unit(rng) <= (n as f64).powf(-gamma) {
                let psi_n = config.large_family_size().expect("large family") as u64;
                let (a, b) = uniform_pair(n32, rng);
                let couples = distinct_indices(n as u64, k, rng)
                    .into_iter()
                    .map(|child| if child < psi_n { (a, b) } else { pair_avoiding(n32, a, b, rng) })
                    .collect();
                Ok((couples, 0))
            } else {
                Ok(((0..k).map(|_| uniform_pair(n32, rng)).collect(), 0))
            }
        }
    }
}

/// The three expressions for `c_N` in terms of pairwise offspring moments,
/// each evaluated from its own moment representation:
/// `(1/8) E[V12^2 - 2/(N-1)] + (N-2)/8 E[V12 V13]`,
/// `(1/8) E[V12 (V1 - 1)]` and `E[(V1)_2] / (8 (N-1))`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CnExpressions {
    pub pair_moments: Rational,
    pub couple_total: Rational,
    pub factorial_moment: Rational,
}

impl CnExpressions {
    pub fn agree(&self) -> bool {
        self.pair_moments == self.couple_total && self.couple_total == self.factorial_moment
    }
}

fn r(x: i128) -> Rational {
    Rational::from_integer(x)
}

/// Exact `c_N` expressions for the models with closed-form moments.
pub fn cn_expressions(config: &ModelConfig) -> Option<CnExpressions> {
    let eighth = Rational::new(1, 8);
    match config {
        ModelConfig::WrightFisher { n_pop } => {
            let n = *n_pop as i128;
            let q = Rational::new(2, n * (n - 1));
            // multinomial over C(N,2) equally likely couples
            let e_v12_sq = r(n) * q * (r(1) - q) + r(n * n) * q * q;
            let e_v12_v13 = r(n * (n - 1)) * q * q;
            let pair_moments = eighth * (e_v12_sq - Rational::new(2, n - 1)) + Rational::new(n - 2, 8) * e_v12_v13;
            // V1 ~ Bin(N, 2/N) and V12 | V1 ~ Bin(V1, 1/(N-1))
            let p1 = Rational::new(2, n);
            let e_v1_fall2 = r(n * (n - 1)) * p1 * p1;
            let couple_total = eighth * e_v1_fall2 * Rational::new(1, n - 1);
            let factorial_moment = e_v1_fall2 / r(8 * (n - 1));
            Some(CnExpressions { pair_moments, couple_total, factorial_moment })
        }
        ModelConfig::FixedCouples { n_couples, couple_law } => {
            let k = *n_couples as i128;
            let m = 2 * k;
            // each couple law gives E[Vt^2] and E[(Vt)_2] for one couple
            let (e_sq, e_fall2) = match couple_law {
                CoupleLaw::Multinomial => {
                    let p = Rational::new(1, k);
                    let mean = r(m) * p;
                    let var = r(m) * p * (r(1) - p);
                    (var + mean * mean, r(m * (m - 1)) * p * p)
                }
                CoupleLaw::Equal => (r(4), r(2)),
            };
            // individuals 1 and 2 form a couple with probability 1/(M-1);
            // individual 1 belongs to exactly one couple, so V12 V13 = 0
            let p_couple = Rational::new(1, m - 1);
            let pair_moments = eighth * (p_couple * e_sq - Rational::new(2, m - 1));
            let couple_total = eighth * p_couple * e_fall2;
            let factorial_moment = e_fall2 / r(8 * (m - 1));
            Some(CnExpressions { pair_moments, couple_total, factorial_moment })
        }
        _ => None,
    }
}

/// Exact rational `c_N` where available.
pub fn pair_coalescence_exact(config: &ModelConfig) -> Option<Rational> {
    cn_expressions(config).map(|e| e.factorial_moment)
}

/// Analytic `c_N`, or `None` when only Monte Carlo estimation applies.
pub fn pair_coalescence_prob(config: &ModelConfig) -> Option<f64> {
    if let Some(q) = pair_coalescence_exact(config) {
        return Some(*q.numer() as f64 / *q.denom() as f64);
    }
    match config {
        ModelConfig::LargeFamily { n_pop, gamma, .. } => {
            let n = *n_pop as i128;
            let psi_n = config.large_family_size().expect("large family") as i128;
            let rest = n - psi_n;
            // E[(V1)_2] given a large-family generation: individual 1 is in
            // the big couple with probability 2/N, else V1 ~ Bin(R, 2/(N-2))
            let big = (r(2 * psi_n * (psi_n - 1)) + Rational::new(4 * rest * (rest - 1), n - 2)) / r(n);
            let big_cn = big / r(8 * (n - 1));
            let wf = Rational::new(1, 2 * n);
            let w = (*n_pop as f64).powf(-gamma);
            let to_f = |q: Rational| *q.numer() as f64 / *q.denom() as f64;
            Some((1.0 - w) * to_f(wf) + w * to_f(big_cn))
        }
        _ => None,
    }
}

/// Scaling `c_N ~ constant * N^exponent`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CnAsymptote {
    pub exponent: f64,
    pub constant: f64,
}

/// `mu_W^(2) / (2 mu_W^2)`.
pub fn rf_kingman_constant(mean: f64, second_moment: f64) -> f64 {
    second_moment / (2.0 * mean * mean)
}

/// `c_W (2/mu_W)^alpha alpha Gamma(2-alpha) Gamma(alpha) / 8`.
pub fn rf_beta_constant(alpha: f64, c_w: f64, mean: f64) -> f64 {
    c_w * (2.0 / mean).powf(alpha) * alpha * (ln_gamma(2.0 - alpha) + ln_gamma(alpha)).exp() / 8.0
}

/// `(E[X(X-1)] / (c_X1 mu_X^2) + 1) / 2`.
pub fn gw_kingman_constant(c_x1: f64, mean: f64, second_factorial: f64) -> f64 {
    0.5 * (second_factorial / (c_x1 * mean * mean) + 1.0)
}

/// `(1/8) c_X1 c_X2 alpha / mu^alpha B(2-alpha, alpha)`, `mu = c_X1 mu_X / 2`.
pub fn gw_beta_constant(alpha: f64, c_x1: f64, c_x2: f64, mean: f64) -> f64 {
    let mu = c_x1 * mean / 2.0;
    let b = (ln_gamma(2.0 - alpha) + ln_gamma(alpha)).exp(); // Gamma(2) = 1
    c_x1 * c_x2 * alpha / mu.powf(alpha) * b / 8.0
}

/// Predicted asymptotic scaling of `c_N` for the fitness and Galton-Watson
/// models.
pub fn predicted_cn_asymptote(config: &ModelConfig) -> Option<CnAsymptote> {
    match config {
        ModelConfig::RandomFitness { fitness, .. } => Some(match fitness.tail() {
            Some(t) => CnAsymptote { exponent: 1.0 - t.alpha, constant: rf_beta_constant(t.alpha, t.c, fitness.mean()) },
            None => CnAsymptote {
                exponent: -1.0,
                constant: rf_kingman_constant(fitness.mean(), fitness.second_moment()),
            },
        }),
        ModelConfig::GaltonWatsonSampling { c_x1, offspring, .. } => Some(match offspring.tail() {
            Some(t) => CnAsymptote { exponent: 1.0 - t.alpha, constant: gw_beta_constant(t.alpha, *c_x1, t.c, offspring.mean()) },
            None => CnAsymptote {
                exponent: -1.0,
                constant: gw_kingman_constant(*c_x1, offspring.mean(), offspring.second_factorial_moment()),
            },
        }),
        _ => None,
    }
}
