//! Backward-in-time ancestral process on diploid states.
//!
//! Each tracked individual holds one block, or two paired blocks. One
//! generation back, every tracked individual receives the parental couple
//! of a distinct child; its genes move to the parents and land on a
//! chromosome slot by fair coin flips. Genes meeting on the same
//! `(parent, slot)` coalesce, and genes on both slots of one parent become
//! a paired block-pair.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forward_models::{sample_offspring, sample_parent_couples, ModelConfig, ModelError, OffspringMatrix};
use crate::partitions::{complete_dispersion, merger_spec, DiploidState, Partition, PartitionError, Transition};
use crate::rng::Stream;
use crate::xi_coalescent::{Event, GenealogyRecord, Mode};

/// Default bound on the number of generations of one genealogy.
pub const DEFAULT_GENERATION_CAP: u64 = 1_000_000_000;

#[derive(Debug, Error)]
pub enum AncestryError {
    #[error("{tracked} tracked individuals exceed the population size {n_pop}")]
    Capacity { tracked: usize, n_pop: usize },
    #[error("generation cap {cap} reached (seed {seed}, replicate {replicate})")]
    GenerationCap { cap: u64, seed: u64, replicate: u64 },
    #[error("{got} parental couples supplied for {expected} tracked individuals")]
    CoupleCount { got: usize, expected: usize },
    #[error("couple ({0},{0}) would be selfing")]
    Selfing(u32),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
}

/// Where each block of a state sits after a step: `(parent, slot)` per
/// block of the new state, in canonical block order. Slots are 0 and 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SamplePlacement {
    pub slots: Vec<(u32, u8)>,
}

/// Tracked individuals of a state: each entry holds one or two block
/// indices. Paired individuals come first, in pair order.
pub fn individuals(state: &DiploidState) -> Vec<Vec<usize>> {
    let b = state.partition().block_count();
    let mut paired = vec![false; b];
    let mut out: Vec<Vec<usize>> = Vec::with_capacity(state.individual_count());
    for &(i, j) in state.pairs() {
        paired[i] = true;
        paired[j] = true;
        out.push(vec![i, j]);
    }
    out.extend((0..b).filter(|&i| !paired[i]).map(|i| vec![i]));
    out
}

/// One generation back, given the parental couple of each tracked
/// individual (in the order of [`individuals`]).
pub fn step_with_couples<R: Rng + ?Sized>(
    state: &DiploidState,
    couples: &[(u32, u32)],
    rng: &mut R,
) -> Result<(DiploidState, SamplePlacement), AncestryError> {
    let inds = individuals(state);
    if couples.len() != inds.len() {
        return Err(AncestryError::CoupleCount { got: couples.len(), expected: inds.len() });
    }
    let masks = state.partition().masks();
    let mut landing: BTreeMap<(u32, u8), u128> = BTreeMap::new();
    for (blocks, &(x, y)) in inds.iter().zip(couples) {
        if x == y {
            return Err(AncestryError::Selfing(x));
        }
        let (first, second) = if rng.random::<bool>() { (x, y) } else { (y, x) };
        // a paired individual sends one gene to each parent; a single
        // gene goes to `first`, which is a fair pick of the two
        for (&block, parent) in blocks.iter().zip([first, second]) {
            let slot = u8::from(rng.random::<bool>());
            *landing.entry((parent, slot)).or_insert(0) |= masks[block];
        }
    }
    let mut new_masks = Vec::with_capacity(landing.len());
    let mut pairs = Vec::new();
    let mut prev: Option<((u32, u8), u128)> = None;
    for (&key, &mask) in &landing {
        new_masks.push(mask);
        if let Some(((p, 0), m0)) = prev {
            if p == key.0 && key.1 == 1 {
                pairs.push((m0, mask));
            }
        }
        prev = Some((key, mask));
    }
    let next = DiploidState::from_mask_pairs(state.n(), new_masks, &pairs);
    let slots = next
        .partition()
        .masks()
        .iter()
        .map(|m| *landing.iter().find(|(_, v)| *v == m).expect("block landed").0)
        .collect();
    Ok((next, SamplePlacement { slots }))
}

/// One generation back through a given offspring matrix: tracked
/// individuals are assigned to distinct, uniformly chosen children.
pub fn step<R: Rng + ?Sized>(state: &DiploidState, matrix: &OffspringMatrix, rng: &mut R) -> Result<DiploidState, AncestryError> {
    let k = state.individual_count();
    if k > matrix.n_pop() {
        return Err(AncestryError::Capacity { tracked: k, n_pop: matrix.n_pop() });
    }
    let couples = matrix.sample_child_couples(k, rng)?;
    Ok(step_with_couples(state, &couples, rng)?.0)
}

/// How parental couples are drawn each generation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoupleSource {
    /// Only the couples of tracked children are drawn; same law, less work.
    #[default]
    Lineages,
    /// A full offspring matrix is sampled every generation.
    FullMatrix,
}

/// Draws the parental couples of the tracked individuals of `state`.
pub fn draw_couples(
    config: &ModelConfig,
    state: &DiploidState,
    source: CoupleSource,
    rng: &mut Stream,
) -> Result<Vec<(u32, u32)>, AncestryError> {
    let k = state.individual_count();
    if k > config.n_pop() {
        return Err(AncestryError::Capacity { tracked: k, n_pop: config.n_pop() });
    }
    Ok(match source {
        CoupleSource::Lineages => sample_parent_couples(config, k, rng)?.0,
        CoupleSource::FullMatrix => sample_offspring(config, rng)?.sample_child_couples(k, rng)?,
    })
}

/// Initial sampling of the `n` genes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartLayout {
    /// One gene in each of `n` distinct individuals.
    #[default]
    Dispersed,
    /// Both genes of `n/2` individuals (plus one single gene if `n` is odd).
    Paired,
}

pub fn start_state(n: usize, layout: StartLayout) -> Result<DiploidState, PartitionError> {
    let p = Partition::singletons(n)?;
    match layout {
        StartLayout::Dispersed => Ok(DiploidState::dispersed(p)),
        StartLayout::Paired => DiploidState::new(p, (0..n / 2).map(|i| (2 * i, 2 * i + 1)).collect()),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GenealogyOptions {
    pub start: StartLayout,
    pub source: CoupleSource,
    /// Record every diploid state, not only changes of the partition.
    pub full_trace: bool,
    pub generation_cap: u64,
}

impl Default for GenealogyOptions {
    fn default() -> Self {
        Self {
            start: StartLayout::Dispersed,
            source: CoupleSource::Lineages,
            full_trace: false,
            generation_cap: DEFAULT_GENERATION_CAP,
        }
    }
}

/// Runs the ancestral process of `n` genes until one block remains.
/// Events are the generations at which the complete dispersion changes.
pub fn run_genealogy(
    config: &ModelConfig,
    n: usize,
    rng: &mut Stream,
    options: &GenealogyOptions,
) -> Result<GenealogyRecord, AncestryError> {
    let state = start_state(n, options.start)?;
    run_genealogy_from(config, state, rng, options)
}

pub fn run_genealogy_from(
    config: &ModelConfig,
    mut state: DiploidState,
    rng: &mut Stream,
    options: &GenealogyOptions,
) -> Result<GenealogyRecord, AncestryError> {
    if state.individual_count() > config.n_pop() {
        return Err(AncestryError::Capacity { tracked: state.individual_count(), n_pop: config.n_pop() });
    }
    let mut partition = complete_dispersion(&state);
    let mut record = GenealogyRecord {
        mode: Mode::Discrete,
        n: state.n(),
        seed: rng.seed(),
        replicate: rng.index(),
        events: vec![Event { time: 0.0, state: partition.clone(), spec: None }],
        streamed_total_length: None,
        trace: options.full_trace.then(|| vec![(0, state.clone())]),
    };
    let mut generation = 0u64;
    while partition.block_count() > 1 {
        if generation >= options.generation_cap {
            return Err(AncestryError::GenerationCap {
                cap: options.generation_cap,
                seed: rng.seed(),
                replicate: rng.index(),
            });
        }
        generation += 1;
        let couples = draw_couples(config, &state, options.source, rng)?;
        state = step_with_couples(&state, &couples, rng)?.0;
        if let Some(trace) = record.trace.as_mut() {
            trace.push((generation, state.clone()));
        }
        if state.partition().block_count() < partition.block_count() {
            let next = complete_dispersion(&state);
            let spec = match merger_spec(&partition, &next)? {
                Transition::Merge(s) => s,
                Transition::NoMerge => unreachable!("block count decreased"),
            };
            record.events.push(Event { time: generation as f64, state: next.clone(), spec: Some(spec) });
            partition = next;
        }
    }
    Ok(record)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DispersionReport {
    pub blocks: usize,
    pub reps: u64,
    pub dispersed: u64,
    pub probability: f64,
    pub std_error: f64,
    /// `1 - C(a,2) c_N`.
    pub lower_bound: f64,
    /// `probability >= lower_bound - 3 std_error`.
    pub pass: bool,
}

/// Estimates the one-step probability that a state with `a` blocks, all
/// paired up (`a` even), moves to its complete dispersion with no
/// coalescence. A state that is already dispersed reaches it with
/// probability 1 and is not simulated.
pub fn dispersion_probability_check(
    config: &ModelConfig,
    a: usize,
    paired: bool,
    c_n: f64,
    reps: u64,
    seed: u64,
) -> Result<DispersionReport, AncestryError> {
    let layout = if paired { StartLayout::Paired } else { StartLayout::Dispersed };
    let start = start_state(a, layout)?;
    let lower_bound = 1.0 - (a * a.saturating_sub(1) / 2) as f64 * c_n;
    if start.is_dispersed() {
        return Ok(DispersionReport {
            blocks: a,
            reps: 0,
            dispersed: 0,
            probability: 1.0,
            std_error: 0.0,
            lower_bound,
            pass: true,
        });
    }
    let target = DiploidState::dispersed(complete_dispersion(&start));
    let hits = crate::rng::par_replicates(seed, crate::rng::domain::DISPERSION, reps, |rng| {
        let couples = draw_couples(config, &start, CoupleSource::Lineages, rng)?;
        Ok::<_, AncestryError>(step_with_couples(&start, &couples, rng)?.0 == target)
    });
    let mut dispersed = 0u64;
    for h in hits {
        dispersed += u64::from(h?);
    }
    let p = dispersed as f64 / reps as f64;
    let se = (p * (1.0 - p) / reps as f64).sqrt();
    Ok(DispersionReport {
        blocks: a,
        reps,
        dispersed,
        probability: p,
        std_error: se,
        lower_bound,
        pass: p >= lower_bound - 3.0 * se,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::domain;

    #[test]
    fn paired_genes_never_coalesce_in_one_step() {
        let wf = ModelConfig::WrightFisher { n_pop: 5 };
        let start = start_state(2, StartLayout::Paired).unwrap();
        let mut rng = Stream::new(1, domain::TRANSITION, 0);
        for _ in 0..20_000 {
            let couples = draw_couples(&wf, &start, CoupleSource::Lineages, &mut rng).unwrap();
            let (next, placement) = step_with_couples(&start, &couples, &mut rng).unwrap();
            assert_eq!(next.partition().block_count(), 2);
            assert!(next.is_dispersed());
            assert_ne!(placement.slots[0].0, placement.slots[1].0);
        }
    }

    #[test]
    fn two_gene_single_couple_enumeration() {
        // both children of couple (0,1): coalescence needs the same parent
        // and the same slot, probability 1/2 * 1/2 over the coin flips
        let m = OffspringMatrix::from_entries(2, vec![(0, 1, 2)]).unwrap();
        let start = start_state(2, StartLayout::Dispersed).unwrap();
        let mut rng = Stream::new(2, domain::TRANSITION, 0);
        let reps = 200_000;
        let mut merged = 0;
        for _ in 0..reps {
            if step(&start, &m, &mut rng).unwrap().partition().block_count() == 1 {
                merged += 1;
            }
        }
        let p = merged as f64 / reps as f64;
        assert!((p - 0.25).abs() < 4.0 * (0.25f64 * 0.75 / reps as f64).sqrt(), "{p}");
    }

    #[test]
    fn placements_are_distinct_and_genes_conserved() {
        let wf = ModelConfig::WrightFisher { n_pop: 6 };
        let start = start_state(6, StartLayout::Paired).unwrap();
        let mut rng = Stream::new(3, domain::TRANSITION, 0);
        let mut state = start;
        for _ in 0..2000 {
            let couples = draw_couples(&wf, &state, CoupleSource::FullMatrix, &mut rng).unwrap();
            let (next, placement) = step_with_couples(&state, &couples, &mut rng).unwrap();
            let mut seen = placement.slots.clone();
            seen.sort_unstable();
            seen.dedup();
            assert_eq!(seen.len(), placement.slots.len());
            let union = next.partition().masks().iter().fold(0u128, |a, m| a | m);
            assert_eq!(union, (1u128 << 6) - 1);
            assert!(next.partition().is_coarsening_of(state.partition()));
            // paired blocks share a parent
            for &(i, j) in next.pairs() {
                assert_eq!(placement.slots[i].0, placement.slots[j].0);
            }
            state = if next.partition().block_count() == 1 { start_state(6, StartLayout::Paired).unwrap() } else { next };
        }
    }

    #[test]
    fn genealogy_absorbs() {
        let wf = ModelConfig::WrightFisher { n_pop: 20 };
        let mut rng = Stream::new(4, domain::GENEALOGY, 0);
        let r = run_genealogy(&wf, 2, &mut rng, &GenealogyOptions::default()).unwrap();
        assert_eq!(r.events.last().unwrap().state, Partition::single_block(2).unwrap());
        assert!(r.events.windows(2).all(|w| w[1].state.is_coarsening_of(&w[0].state) && w[1].time > w[0].time));
    }

    #[test]
    fn capacity_error() {
        let wf = ModelConfig::WrightFisher { n_pop: 3 };
        let mut rng = Stream::new(5, domain::GENEALOGY, 0);
        assert!(matches!(
            run_genealogy(&wf, 4, &mut rng, &GenealogyOptions::default()),
            Err(AncestryError::Capacity { tracked: 4, n_pop: 3 })
        ));
    }

    #[test]
    fn dispersion_check_small_cases() {
        let wf = ModelConfig::WrightFisher { n_pop: 50 };
        let r = dispersion_probability_check(&wf, 2, true, 0.01, 5000, 6).unwrap();
        assert_eq!(r.probability, 1.0);
        let r = dispersion_probability_check(&wf, 2, false, 0.01, 5000, 6).unwrap();
        assert_eq!((r.probability, r.reps), (1.0, 0));
    }

    #[test]
    fn full_trace_records_every_generation() {
        let wf = ModelConfig::WrightFisher { n_pop: 10 };
        let mut rng = Stream::new(7, domain::GENEALOGY, 0);
        let opts = GenealogyOptions { full_trace: true, ..Default::default() };
        let r = run_genealogy(&wf, 3, &mut rng, &opts).unwrap();
        let trace = r.trace.unwrap();
        assert_eq!(trace.len() as f64, r.events.last().unwrap().time + 1.0);
    }
}
