//! Estimators tying finite-population simulations to the limit theory.
//!
//! All estimators draw replicate `r` from its own stream, so results
//! depend only on `(seed, reps)` and never on the worker count.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::ln_beta;
use thiserror::Error;

use crate::ancestry::{draw_couples, step_with_couples, AncestryError, CoupleSource};
use crate::forward_models::{distinct_indices, sample_offspring, ModelConfig, ModelError};
use crate::partitions::{complete_dispersion, enumerate_diploid_states, DiploidState, Partition, PartitionError};
use crate::quadrature::integrate_unit;
use crate::rng::{domain, par_replicates, Stream};
use crate::stats::{chi2_test, ratio_estimate, Chi2Result, EstimateWithError, StatsError};
use crate::xi_coalescent::GenealogyRecord;
use crate::xi_rates::{rate, specs_with_at_most, RateError, XiMeasure};

/// Fewest replicates accepted by the `c_N` and moment estimators.
pub const MIN_REPS: u64 = 100;

/// Largest sample size for transition-matrix estimation.
pub const MAX_TRANSITION_N: usize = 4;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("{got} replicates, at least {min} required")]
    Reps { got: u64, min: u64 },
    #[error("{what} = {value} outside {domain}")]
    Argument { what: &'static str, value: String, domain: &'static str },
    #[error("sample size {n} exceeds the limit {limit}")]
    Size { n: usize, limit: usize },
    #[error("matrix is not stochastic: row {row} sums to {sum}")]
    NotStochastic { row: usize, sum: f64 },
    #[error("state {0} is not in the enumeration")]
    MissingState(String),
    #[error("step left the state space from row {row} (seed {seed})")]
    UnknownState { row: usize, seed: u64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Ancestry(#[from] AncestryError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Rate(#[from] RateError),
}

fn check_reps(reps: u64) -> Result<(), AnalysisError> {
    if reps < MIN_REPS {
        return Err(AnalysisError::Reps { got: reps, min: MIN_REPS });
    }
    Ok(())
}

/// Applies `f` to the total offspring numbers of `reps` sampled matrices.
fn per_matrix<T, F>(config: &ModelConfig, reps: u64, seed: u64, dom: u64, f: F) -> Result<Vec<T>, AnalysisError>
where
    T: Send,
    F: Fn(&[u32], &mut Stream) -> T + Sync + Send,
{
    config.validate()?;
    par_replicates(seed, dom, reps, |rng| -> Result<T, ModelError> {
        let totals = sample_offspring(config, rng)?.totals();
        Ok(f(&totals, rng))
    })
    .into_iter()
    .map(|r| r.map_err(AnalysisError::from))
    .collect()
}

/// `sum_i (V_i)_2 / (8 N (N-1))`, the per-matrix `c_N` sample.
fn cn_sample(totals: &[u32]) -> f64 {
    let n = totals.len() as f64;
    let s: f64 = totals.iter().map(|&v| v as f64 * (v as f64 - 1.0)).sum();
    s / (8.0 * n * (n - 1.0))
}

/// Monte Carlo `c_N = E[(V_1)_2] / (8 (N-1))`, averaging over all
/// individuals of each matrix.
pub fn estimate_cn(config: &ModelConfig, reps: u64, seed: u64) -> Result<EstimateWithError, AnalysisError> {
    check_reps(reps)?;
    let xs = per_matrix(config, reps, seed, domain::ESTIMATE_CN, |t, _| cn_sample(t))?;
    Ok(EstimateWithError::from_samples(&xs)?)
}

fn falling(v: u32, k: usize) -> f64 {
    (0..k).map(|i| v as f64 - i as f64).product()
}

/// Moment functional estimate together with the `c_N` estimate from the
/// same matrices.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiEstimate {
    pub phi: EstimateWithError,
    pub c_hat: EstimateWithError,
}

/// Ratio estimate of `E[(V_1)_{k_1} ... (V_j)_{k_j}] / (c_N N^{sum k - j} 2^{sum k})`
/// for distinct individuals `1..j`. Tuples are averaged over all
/// individuals for `j <= 2` and drawn at random for larger `j`.
pub fn estimate_phi(
    config: &ModelConfig,
    k_list: &[usize],
    reps: u64,
    seed: u64,
) -> Result<PhiEstimate, AnalysisError> {
    check_reps(reps)?;
    let j = k_list.len();
    if j == 0 || j > config.n_pop() {
        return Err(AnalysisError::Argument { what: "j", value: j.to_string(), domain: "1..=N" });
    }
    if let Some(k) = k_list.iter().find(|&&k| k < 2) {
        return Err(AnalysisError::Argument { what: "k", value: k.to_string(), domain: "k >= 2" });
    }
    let sum_k: usize = k_list.iter().sum();
    let n = config.n_pop() as f64;
    let scale = n.powi((sum_k - j) as i32) * 2f64.powi(sum_k as i32);
    let pairs = per_matrix(config, reps, seed, domain::PHI, |t, rng| {
        let num = match k_list {
            [k] => t.iter().map(|&v| falling(v, *k)).sum::<f64>() / n,
            [k1, k2] => {
                let (mut sa, mut sb, mut sab) = (0.0, 0.0, 0.0);
                for &v in t {
                    let (a, b) = (falling(v, *k1), falling(v, *k2));
                    sa += a;
                    sb += b;
                    sab += a * b;
                }
                (sa * sb - sab) / (n * (n - 1.0))
            }
            _ => distinct_indices(t.len() as u64, j, rng)
                .iter()
                .zip(k_list)
                .map(|(&i, &k)| falling(t[i as usize], k))
                .product(),
        };
        (num / scale, cn_sample(t))
    })?;
    let (num, den): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let c_hat = EstimateWithError::from_samples(&den)?;
    Ok(PhiEstimate { phi: ratio_estimate(&num, &den)?, c_hat })
}

/// Limit `8 int_x^1 y^{-2} Beta(2-alpha, alpha)(dy)` of the scaled tail of `V_1`.
pub fn tail_limit(alpha: f64, x: f64) -> Result<f64, AnalysisError> {
    if !(alpha > 1.0 && alpha < 2.0) {
        return Err(AnalysisError::Argument { what: "alpha", value: alpha.to_string(), domain: "(1,2)" });
    }
    if !(x > 0.0 && x <= 1.0) {
        return Err(AnalysisError::Argument { what: "x", value: x.to_string(), domain: "(0,1]" });
    }
    if x == 1.0 {
        return Ok(0.0);
    }
    let norm = ln_beta(2.0 - alpha, alpha);
    let ln_w = (1.0 - x).ln();
    // y = x + (1-x) u, so 1 - y = (1-x)(1-u) and dy = (1-x) du
    let v = integrate_unit(
        |lu, l1u| {
            let y = x + (1.0 - x) * lu.exp();
            let ln_f = -(1.0 + alpha) * y.ln() + (alpha - 1.0) * (ln_w + l1u) - norm + ln_w;
            (lu + l1u + ln_f).exp()
        },
        1e-12,
    )
    .map_err(RateError::from)?;
    Ok(8.0 * v)
}

/// One grid point of the tail-scaling curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailPoint {
    pub x: f64,
    /// `(N / c_hat) P_hat(V_1 > N x)` with its delta-method error.
    pub empirical: EstimateWithError,
    pub limit: f64,
}

/// Empirical `(N / c_N) P(V_1 > N x)` for a heavy-tailed fitness model.
pub fn tail_scaling(config: &ModelConfig, x_grid: &[f64], reps: u64, seed: u64) -> Result<Vec<TailPoint>, AnalysisError> {
    check_reps(reps)?;
    let alpha = match config {
        ModelConfig::RandomFitness { fitness, .. } => fitness.tail().map(|t| t.alpha),
        _ => None,
    }
    .ok_or(AnalysisError::Argument {
        what: "model",
        value: config.id(),
        domain: "fitness models with a power-law tail",
    })?;
    let limits = x_grid.iter().map(|&x| tail_limit(alpha, x)).collect::<Result<Vec<_>, _>>()?;
    let n = config.n_pop() as f64;
    let rows = per_matrix(config, reps, seed, domain::TAIL, |t, _| {
        let fr: Vec<f64> = x_grid
            .iter()
            .map(|&x| t.iter().filter(|&&v| v as f64 > n * x).count() as f64 / n)
            .collect();
        (fr, cn_sample(t))
    })?;
    let den: Vec<f64> = rows.iter().map(|r| r.1).collect();
    x_grid
        .iter()
        .zip(limits)
        .enumerate()
        .map(|(g, (&x, limit))| {
            let num: Vec<f64> = rows.iter().map(|r| r.0[g] * n).collect();
            Ok(TailPoint { x, empirical: ratio_estimate(&num, &den)?, limit })
        })
        .collect()
}

/// One-step transition counts over [`enumerate_diploid_states`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionEstimate {
    pub states: Vec<DiploidState>,
    /// `counts[i][j]`: steps from state `i` that landed on state `j`.
    pub counts: Vec<Vec<u64>>,
    pub reps: u64,
}

impl TransitionEstimate {
    pub fn index_of(&self, s: &DiploidState) -> Option<usize> {
        self.states.iter().position(|t| t == s)
    }

    /// Empirical transition probabilities; every row sums to 1.
    pub fn frequencies(&self) -> Vec<Vec<f64>> {
        self.counts
            .iter()
            .map(|row| row.iter().map(|&c| c as f64 / self.reps as f64).collect())
            .collect()
    }
}

/// Runs one backward step `reps` times from every state of `S_n`.
pub fn estimate_transition_matrix(
    config: &ModelConfig,
    n: usize,
    reps: u64,
    seed: u64,
    source: CoupleSource,
) -> Result<TransitionEstimate, AnalysisError> {
    if n > MAX_TRANSITION_N {
        return Err(AnalysisError::Size { n, limit: MAX_TRANSITION_N });
    }
    check_reps(reps)?;
    config.validate()?;
    let states = enumerate_diploid_states(n)?;
    let index: HashMap<&DiploidState, usize> = states.iter().enumerate().map(|(i, s)| (s, i)).collect();
    let m = states.len();
    let mut counts = Vec::with_capacity(m);
    for (row, start) in states.iter().enumerate() {
        // replicate r of row i uses stream index i * 2^40 + r
        let base = (row as u64) << 40;
        let c = (0..reps)
            .into_par_iter()
            .try_fold(
                || vec![0u64; m],
                |mut acc, r| -> Result<Vec<u64>, AnalysisError> {
                    let mut rng = Stream::new(seed, domain::TRANSITION, base + r);
                    let couples = draw_couples(config, start, source, &mut rng)?;
                    let (next, _) = step_with_couples(start, &couples, &mut rng)?;
                    let j = *index.get(&next).ok_or(AnalysisError::UnknownState { row, seed })?;
                    acc[j] += 1;
                    Ok(acc)
                },
            )
            .try_reduce(
                || vec![0u64; m],
                |mut a, b| {
                    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                    Ok(a)
                },
            )?;
        counts.push(c);
    }
    Ok(TransitionEstimate { states, counts, reps })
}

/// `Pi_hat = A + c_hat B` split, with `P = A` and `G = P B P`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MohleDecomposition {
    pub states: Vec<DiploidState>,
    /// Row `i` is the indicator of the dispersed form of `cd(state i)`.
    pub a: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub g: Vec<Vec<f64>>,
    pub c_hat: f64,
    /// `max_i sum_j |Pi_hat - A|_{ij} / c_hat`; near 1 when the norm and the
    /// pair-coalescence time scale agree.
    pub norm_ratio: f64,
}

fn mat_mul(x: &[Vec<f64>], y: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = y.first().map_or(0, Vec::len);
    x.iter()
        .map(|row| {
            let mut out = vec![0.0; m];
            for (k, &xk) in row.iter().enumerate() {
                if xk != 0.0 {
                    out.iter_mut().zip(&y[k]).for_each(|(o, &v)| *o += xk * v);
                }
            }
            out
        })
        .collect()
}

/// Structural instantaneous-dispersion matrix over `states`.
pub fn dispersion_matrix(states: &[DiploidState]) -> Result<Vec<Vec<f64>>, AnalysisError> {
    let m = states.len();
    states
        .iter()
        .map(|s| {
            let target = DiploidState::dispersed(complete_dispersion(s));
            let j = states.iter().position(|t| *t == target).ok_or_else(|| AnalysisError::MissingState(target.to_string()))?;
            let mut row = vec![0.0; m];
            row[j] = 1.0;
            Ok(row)
        })
        .collect()
}

pub fn mohle_decompose(states: &[DiploidState], pi_hat: &[Vec<f64>], c_hat: f64) -> Result<MohleDecomposition, AnalysisError> {
    if !(c_hat.is_finite() && c_hat > 0.0) {
        return Err(AnalysisError::Argument { what: "c_hat", value: c_hat.to_string(), domain: "(0,inf)" });
    }
    if pi_hat.len() != states.len() {
        return Err(AnalysisError::Size { n: pi_hat.len(), limit: states.len() });
    }
    for (row, r) in pi_hat.iter().enumerate() {
        let sum: f64 = r.iter().sum();
        if r.len() != states.len() || (sum - 1.0).abs() > 1e-9 || r.iter().any(|&x| x < 0.0) {
            return Err(AnalysisError::NotStochastic { row, sum });
        }
    }
    let a = dispersion_matrix(states)?;
    let p = a.clone();
    let b: Vec<Vec<f64>> = pi_hat
        .iter()
        .zip(&a)
        .map(|(pr, ar)| pr.iter().zip(ar).map(|(x, y)| (x - y) / c_hat).collect())
        .collect();
    let g = mat_mul(&mat_mul(&p, &b), &p);
    let norm_ratio = b
        .iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    Ok(MohleDecomposition { states: states.to_vec(), a, p, b, g, c_hat, norm_ratio })
}

impl MohleDecomposition {
    /// `max |P P - P|`.
    pub fn idempotence_error(&self) -> f64 {
        let pp = mat_mul(&self.p, &self.p);
        pp.iter()
            .zip(&self.p)
            .flat_map(|(x, y)| x.iter().zip(y).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max)
    }

    /// `G` restricted to the dispersed states, indexed by their partitions.
    pub fn restricted_generator(&self) -> (Vec<Partition>, Vec<Vec<f64>>) {
        let idx: Vec<usize> = (0..self.states.len()).filter(|&i| self.states[i].is_dispersed()).collect();
        let parts = idx.iter().map(|&i| self.states[i].partition().clone()).collect();
        let g = idx.iter().map(|&i| idx.iter().map(|&j| self.g[i][j]).collect()).collect();
        (parts, g)
    }

    /// `max_i |sum_j G_ij|`.
    pub fn max_row_sum(&self) -> f64 {
        self.g.iter().map(|r| r.iter().sum::<f64>().abs()).fold(0.0, f64::max)
    }

    /// Whether the norm diagnostic disagrees with `c_hat` by more than a
    /// factor of two.
    pub fn norm_flag(&self) -> bool {
        !(0.5..=2.0).contains(&self.norm_ratio)
    }
}

/// Generator entry `G(from, to)` between distinct partitions with a
/// standard error combining the binomial error of the step counts and
/// the relative error of `c_hat`.
pub fn generator_entry(
    est: &TransitionEstimate,
    from: &Partition,
    to: &Partition,
    c_hat: &EstimateWithError,
) -> Option<EstimateWithError> {
    let i = est.index_of(&DiploidState::dispersed(from.clone()))?;
    let hits: u64 = est
        .states
        .iter()
        .zip(&est.counts[i])
        .filter(|(s, _)| complete_dispersion(s) == *to)
        .map(|(_, &c)| c)
        .sum();
    let reps = est.reps as f64;
    let p = hits as f64 / reps;
    let g = p / c_hat.value;
    let rel_p2 = if hits > 0 { (1.0 - p) / (p * reps) } else { 1.0 / reps };
    let rel_c2 = (c_hat.std_error / c_hat.value).powi(2);
    let se = if hits > 0 { g * (rel_p2 + rel_c2).sqrt() } else { rel_p2.sqrt() / c_hat.value };
    Some(EstimateWithError { value: g, std_error: se, replicates: est.reps })
}

/// Expected number of merger events with `g` groups per genealogy of the
/// jump chain started from `n` singletons; index `g` of the result.
pub fn expected_group_counts(measure: &XiMeasure, n: usize) -> Result<Vec<f64>, AnalysisError> {
    if n < 2 {
        return Err(AnalysisError::Argument { what: "n", value: n.to_string(), domain: "n >= 2" });
    }
    let max_g = measure.max_groups().min(n / 2);
    let mut visit = vec![0.0; n + 1];
    visit[n] = 1.0;
    let mut out = vec![0.0; max_g + 1];
    for b in (2..=n).rev() {
        if visit[b] == 0.0 {
            continue;
        }
        let specs = specs_with_at_most(b, measure.max_groups());
        let w: Vec<f64> = specs.iter().map(|s| rate(measure, s) * s.multiplicity()).collect();
        let total: f64 = w.iter().sum();
        if total <= 0.0 {
            return Err(AnalysisError::Argument { what: "measure", value: measure.to_string(), domain: "positive exit rates" });
        }
        for (s, wi) in specs.iter().zip(w) {
            let p = visit[b] * wi / total;
            visit[s.blocks_after()] += p;
            out[s.groups()] += p;
        }
    }
    Ok(out)
}

/// Merger events per group count over a set of genealogies.
pub fn observed_group_counts<'a, I: IntoIterator<Item = &'a GenealogyRecord>>(records: I) -> Vec<u64> {
    let mut out: Vec<u64> = Vec::new();
    for r in records {
        for e in r.mergers() {
            let g = e.spec.as_ref().map_or(0, |s| s.groups());
            if out.len() <= g {
                out.resize(g + 1, 0);
            }
            out[g] += 1;
        }
    }
    out
}

/// Chi-square of the group-count distribution among events with at least
/// `min_groups` groups against the jump-chain expectation.
pub fn group_count_test(observed: &[u64], expected: &[f64], min_groups: usize) -> Result<Chi2Result, AnalysisError> {
    let top = observed.len().max(expected.len());
    let obs: Vec<u64> = (min_groups..top).map(|g| observed.get(g).copied().unwrap_or(0)).collect();
    let exp: Vec<f64> = (min_groups..top).map(|g| expected.get(g).copied().unwrap_or(0.0)).collect();
    let mass: f64 = exp.iter().sum();
    if mass <= 0.0 {
        return Err(AnalysisError::Argument { what: "min_groups", value: min_groups.to_string(), domain: "group counts with positive mass" });
    }
    let probs: Vec<f64> = exp.iter().map(|e| e / mass).collect();
    Ok(chi2_test(&obs, &probs)?)
}

/// Least-squares fit of `ln y = intercept + slope ln x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
}

pub fn log_log_fit(points: &[(f64, f64)]) -> Result<LogLogFit, AnalysisError> {
    if points.len() < 2 || points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(AnalysisError::Argument { what: "points", value: format!("{points:?}"), domain: "two or more positive pairs" });
    }
    let m = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let (mx, my) = (lx.iter().sum::<f64>() / m, ly.iter().sum::<f64>() / m);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    Ok(LogLogFit { slope, intercept: my - slope * mx })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward_models::{pair_coalescence_prob, CoupleLaw, FitnessLaw};
    use crate::xi_rates::generator_matrix;

    fn wf(n: usize) -> ModelConfig {
        ModelConfig::WrightFisher { n_pop: n }
    }

    #[test]
    fn cn_wright_fisher() {
        let e = estimate_cn(&wf(100), 20_000, 1).unwrap();
        assert!(e.within(0.005, 3.0), "{e:?}");
    }

    #[test]
    fn cn_fixed_couples_matches_closed_form() {
        let cfg = ModelConfig::FixedCouples { n_couples: 50, couple_law: CoupleLaw::Multinomial };
        let exact = pair_coalescence_prob(&cfg).unwrap();
        let e = estimate_cn(&cfg, 20_000, 2).unwrap();
        assert!(e.within(exact, 3.0), "{e:?} vs {exact}");
    }

    #[test]
    fn cn_needs_reps() {
        assert!(matches!(estimate_cn(&wf(10), 10, 1), Err(AnalysisError::Reps { .. })));
    }

    #[test]
    fn phi_normalization() {
        let cfg = wf(200);
        let e = estimate_phi(&cfg, &[2], 1000, 3).unwrap();
        assert!((e.phi.value - 2.0 * 199.0 / 200.0).abs() < 1e-12, "{e:?}");
        assert!(estimate_phi(&cfg, &[1], 1000, 3).is_err());
    }

    #[test]
    fn phi_random_tuples_run() {
        let e = estimate_phi(&wf(50), &[2, 2, 2], 500, 4).unwrap();
        assert!(e.phi.value >= 0.0 && e.phi.value.is_finite());
    }

    #[test]
    fn tail_limit_oracle() {
        // mpmath quadrature at 30 digits
        let cases = [
            (1.5, 0.5, 3.395_305_452_627_100_5),
            (1.5, 0.2, 27.162_443_621_016_801),
            (1.5, 0.4, 6.237_574_409_869_408),
            (1.5, 0.6, 1.848_170_195_516_862),
            (1.25, 0.3, 16.616_749_635_558_964),
        ];
        for (a, x, want) in cases {
            let got = tail_limit(a, x).unwrap();
            assert!((got - want).abs() < 1e-9 * want, "{a} {x}: {got} vs {want}");
        }
        assert_eq!(tail_limit(1.5, 1.0).unwrap(), 0.0);
        assert!(tail_limit(1.5, 0.999_999).unwrap() < 1e-6);
    }

    #[test]
    fn tail_scaling_rejects_light_tails() {
        let cfg = ModelConfig::RandomFitness { n_pop: 100, fitness: FitnessLaw::PointMass { value: 1.0 }, resample_cap: 100 };
        assert!(tail_scaling(&cfg, &[0.5], 100, 1).is_err());
    }

    #[test]
    fn transition_rows_and_no_selfing() {
        let est = estimate_transition_matrix(&wf(200), 2, 20_000, 5, CoupleSource::Lineages).unwrap();
        assert_eq!(est.states.len(), 3);
        for row in &est.counts {
            assert_eq!(row.iter().sum::<u64>(), est.reps);
        }
        let disp = est.index_of(&"[[1],[2]];pairs=[]".parse().unwrap()).unwrap();
        let paired = est.index_of(&"[[1],[2]];pairs=[[1,2]]".parse().unwrap()).unwrap();
        let merged = est.index_of(&"[[1,2]];pairs=[]".parse().unwrap()).unwrap();
        assert_eq!(est.counts[paired][merged], 0);
        let p = est.counts[disp][merged] as f64 / est.reps as f64;
        let se = (p * (1.0 - p) / est.reps as f64).sqrt().max(1e-4);
        assert!((p - 1.0 / 400.0).abs() < 3.0 * se, "{p}");
    }

    #[test]
    fn transition_size_limit() {
        assert!(matches!(
            estimate_transition_matrix(&wf(20), 5, 100, 1, CoupleSource::Lineages),
            Err(AnalysisError::Size { .. })
        ));
    }

    #[test]
    fn mohle_structure() {
        let est = estimate_transition_matrix(&wf(50), 3, 2000, 6, CoupleSource::Lineages).unwrap();
        let d = mohle_decompose(&est.states, &est.frequencies(), 0.01).unwrap();
        assert!(d.idempotence_error() < 1e-10);
        assert!(d.max_row_sum() < 1e-9);
        for r in &d.a {
            assert_eq!(r.iter().sum::<f64>(), 1.0);
        }
        let (parts, g) = d.restricted_generator();
        assert_eq!(parts.len(), 5);
        assert_eq!(g.len(), 5);
    }

    #[test]
    fn mohle_rejects_non_stochastic() {
        let states = enumerate_diploid_states(2).unwrap();
        let bad = vec![vec![0.5, 0.0, 0.0]; 3];
        assert!(matches!(mohle_decompose(&states, &bad, 0.1), Err(AnalysisError::NotStochastic { .. })));
    }

    #[test]
    fn kingman_group_counts() {
        let e = expected_group_counts(&XiMeasure::kingman(), 6).unwrap();
        assert!((e[1] - 5.0).abs() < 1e-12);
        assert!(e.iter().skip(2).all(|&x| x == 0.0));
    }

    #[test]
    fn group_counts_sum_to_expected_events() {
        // events of the jump chain equal the visited block counts above 1
        let m = XiMeasure::beta(4, 1.5).unwrap();
        let g = generator_matrix(&m, 4).unwrap();
        let e = expected_group_counts(&m, 4).unwrap();
        assert!(e.len() >= 3);
        // from 4 singletons the two-group event is ((4;2,2;0))
        let start = g.index_of(&Partition::singletons(4).unwrap()).unwrap();
        let exit = -g.diagonal(start);
        let two = g.index_of(&"[[1,2],[3,4]]".parse().unwrap()).unwrap();
        let p22 = 3.0 * g.get(start, two) / exit;
        assert!((e[2] - p22).abs() < 1e-12, "{} vs {p22}", e[2]);
    }

    #[test]
    fn log_log_slope() {
        let pts: Vec<(f64, f64)> = [1.0f64, 2.0, 4.0, 8.0].iter().map(|&x| (x, 3.0 * x.powf(-0.5))).collect();
        let f = log_log_fit(&pts).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
    }
}
