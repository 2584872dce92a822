//! Jump-chain simulation of the n-Xi-coalescent and genealogy functionals.

use std::sync::OnceLock;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::partitions::{merger_spec, DiploidState, MergerSpec, Partition, PartitionError, Transition, MAX_GENES};
use crate::rng::{exponential, open_unit, Stream};
use crate::xi_rates::{generator_matrix, rate, specs_with_at_most, GeneratorMatrix, RateError, XiMeasure, MAX_GENERATOR_N};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("sample size {0} must be at least 2 and at most {MAX_GENES}")]
    SampleSize(usize),
    #[error("event cap {cap} exceeded (seed {seed}, replicate {replicate})")]
    EventCap { cap: usize, seed: u64, replicate: u64 },
    #[error("state with {blocks} blocks has no outgoing rate")]
    Stuck { blocks: usize },
    #[error("start partition has {got} genes, simulator built for {expected}")]
    StartSize { got: usize, expected: usize },
    #[error("generator kernel requires n <= {MAX_GENERATOR_N}, got {0}")]
    GeneratorTooLarge(usize),
    #[error(transparent)]
    Rate(#[from] RateError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RecordError {
    #[error("record did not reach the most recent common ancestor")]
    Incomplete,
    #[error("functional needs a continuous-time record")]
    Mode,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Continuous,
    Discrete,
}

/// One recorded state. `time` is coalescent time in continuous mode and
/// the generation count in discrete mode; `spec` is absent for the start.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub state: Partition,
    pub spec: Option<MergerSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenealogyRecord {
    pub mode: Mode,
    pub n: usize,
    pub seed: u64,
    pub replicate: u64,
    pub events: Vec<Event>,
    /// Total length accumulated while simulating, continuous mode only.
    pub streamed_total_length: Option<f64>,
    /// Full diploid trajectory `(generation, state)`, discrete mode only.
    pub trace: Option<Vec<(u64, DiploidState)>>,
}

impl GenealogyRecord {
    pub fn is_complete(&self) -> bool {
        self.events.last().is_some_and(|e| e.state.block_count() == 1)
    }

    /// Merger events, excluding the start.
    pub fn mergers(&self) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(|e| e.spec.is_some())
    }

    pub fn n_events(&self) -> usize {
        self.mergers().count()
    }

    /// A discrete record on the coalescent time scale: generation `g`
    /// becomes time `g * c`. The diploid trace is dropped.
    pub fn rescaled(&self, c: f64) -> GenealogyRecord {
        GenealogyRecord {
            mode: Mode::Continuous,
            n: self.n,
            seed: self.seed,
            replicate: self.replicate,
            events: self.events.iter().map(|e| Event { time: e.time * c, ..e.clone() }).collect(),
            streamed_total_length: None,
            trace: None,
        }
    }

    pub fn max_groups_in_one_event(&self) -> usize {
        self.mergers().filter_map(|e| e.spec.as_ref()).map(MergerSpec::groups).max().unwrap_or(0)
    }
}

/// Time of the final event.
pub fn tmrca(record: &GenealogyRecord) -> Result<f64, RecordError> {
    if !record.is_complete() {
        return Err(RecordError::Incomplete);
    }
    Ok(record.events.last().map_or(0.0, |e| e.time))
}

fn check_continuous(record: &GenealogyRecord) -> Result<(), RecordError> {
    if record.mode != Mode::Continuous {
        return Err(RecordError::Mode);
    }
    if !record.is_complete() {
        return Err(RecordError::Incomplete);
    }
    Ok(())
}

/// Integral over time of the number of blocks.
pub fn total_length(record: &GenealogyRecord) -> Result<f64, RecordError> {
    check_continuous(record)?;
    let mut acc = NeumaierSum::default();
    for w in record.events.windows(2) {
        acc.add((w[1].time - w[0].time) * w[0].state.block_count() as f64);
    }
    Ok(acc.value())
}

/// `L_i`, `i = 1..n-1`: time integral of the number of blocks of size `i`.
pub fn branch_lengths(record: &GenealogyRecord) -> Result<Vec<f64>, RecordError> {
    check_continuous(record)?;
    let mut acc = vec![NeumaierSum::default(); record.n.saturating_sub(1)];
    for w in record.events.windows(2) {
        let dt = w[1].time - w[0].time;
        for size in w[0].state.block_sizes() {
            if size < record.n {
                acc[size - 1].add(dt);
            }
        }
    }
    Ok(acc.iter().map(NeumaierSum::value).collect())
}

/// Compensated summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    /// Generator rows for `n <= 8`, lazily enumerated specs otherwise.
    #[default]
    Auto,
    Generator,
    Lazy,
}

/// Jump distribution over merger specs at a fixed block count; weights are
/// rate times the number of targets sharing the spec.
#[derive(Debug)]
struct SpecTable {
    specs: Vec<MergerSpec>,
    cumulative: Vec<f64>,
}

impl SpecTable {
    fn build(measure: &XiMeasure, b: usize) -> Self {
        let mut specs = Vec::new();
        let mut cumulative = Vec::new();
        let mut total = 0.0;
        for spec in specs_with_at_most(b, measure.max_groups()) {
            let w = rate(measure, &spec) * spec.multiplicity();
            if w > 0.0 {
                total += w;
                specs.push(spec);
                cumulative.push(total);
            }
        }
        Self { specs, cumulative }
    }

    fn total(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    fn pick(&self, u: f64) -> &MergerSpec {
        let target = u * self.total();
        let i = self.cumulative.partition_point(|&c| c < target).min(self.specs.len() - 1);
        &self.specs[i]
    }
}

/// Reusable simulator for one measure and sample size.
#[derive(Debug)]
pub struct CoalescentSimulator {
    measure: XiMeasure,
    n: usize,
    event_cap: usize,
    generator: Option<GeneratorMatrix>,
    tables: Vec<OnceLock<SpecTable>>,
}

impl CoalescentSimulator {
    pub fn new(measure: &XiMeasure, n: usize, kernel: Kernel) -> Result<Self, SimError> {
        if !(2..=MAX_GENES).contains(&n) {
            return Err(SimError::SampleSize(n));
        }
        let generator = match kernel {
            Kernel::Generator if n > MAX_GENERATOR_N => return Err(SimError::GeneratorTooLarge(n)),
            Kernel::Generator => Some(generator_matrix(measure, n)?),
            Kernel::Auto if n <= MAX_GENERATOR_N => Some(generator_matrix(measure, n)?),
            _ => None,
        };
        Ok(Self {
            measure: measure.clone(),
            n,
            event_cap: 10 * n * n,
            generator,
            tables: (0..=n).map(|_| OnceLock::new()).collect(),
        })
    }

    pub fn with_event_cap(mut self, cap: usize) -> Self {
        self.event_cap = cap;
        self
    }

    pub fn measure(&self) -> &XiMeasure {
        &self.measure
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Total outgoing rate from any state with `b` blocks.
    pub fn exit_rate(&self, b: usize) -> f64 {
        if b < 2 {
            return 0.0;
        }
        self.table(b).total()
    }

    fn table(&self, b: usize) -> &SpecTable {
        self.tables[b].get_or_init(|| SpecTable::build(&self.measure, b))
    }

    /// Runs from the all-singleton partition.
    pub fn simulate(&self, rng: &mut Stream) -> Result<GenealogyRecord, SimError> {
        self.simulate_from(&Partition::singletons(self.n)?, rng)
    }

    pub fn simulate_from(&self, start: &Partition, rng: &mut Stream) -> Result<GenealogyRecord, SimError> {
        if start.n() != self.n {
            return Err(SimError::StartSize { got: start.n(), expected: self.n });
        }
        let mut record = GenealogyRecord {
            mode: Mode::Continuous,
            n: self.n,
            seed: rng.seed(),
            replicate: rng.index(),
            events: vec![Event { time: 0.0, state: start.clone(), spec: None }],
            streamed_total_length: None,
            trace: None,
        };
        let mut time = NeumaierSum::default();
        let mut length = NeumaierSum::default();
        let mut state = start.clone();
        let mut gen_index = self.generator.as_ref().and_then(|g| g.index_of(start));
        let mut count = 0usize;
        while state.block_count() > 1 {
            if count >= self.event_cap {
                return Err(SimError::EventCap { cap: self.event_cap, seed: rng.seed(), replicate: rng.index() });
            }
            let b = state.block_count();
            let (next, spec, exit) = match (&self.generator, gen_index) {
                (Some(g), Some(i)) => {
                    let exit = -g.diagonal(i);
                    if exit <= 0.0 {
                        return Err(SimError::Stuck { blocks: b });
                    }
                    let row = g.row(i);
                    let target = open_unit(rng) * exit;
                    let mut acc = 0.0;
                    let mut j = row[row.len() - 1].0;
                    for &(c, r) in row {
                        acc += r;
                        if acc >= target {
                            j = c;
                            break;
                        }
                    }
                    gen_index = Some(j);
                    let next = g.states()[j].clone();
                    let spec = match merger_spec(&state, &next)? {
                        Transition::Merge(s) => s,
                        Transition::NoMerge => unreachable!("generator rows hold strict coarsenings"),
                    };
                    (next, spec, exit)
                }
                _ => {
                    let table = self.table(b);
                    let exit = table.total();
                    if exit <= 0.0 {
                        return Err(SimError::Stuck { blocks: b });
                    }
                    let spec = table.pick(open_unit(rng)).clone();
                    let next = apply_spec(&state, &spec, rng)?;
                    (next, spec, exit)
                }
            };
            let hold = exponential(rng, exit);
            length.add(hold * b as f64);
            time.add(hold);
            record.events.push(Event { time: time.value(), state: next.clone(), spec: Some(spec) });
            state = next;
            count += 1;
        }
        record.streamed_total_length = Some(length.value());
        Ok(record)
    }
}

/// Merges uniformly chosen blocks of `state` according to `spec`: a random
/// permutation of the blocks is cut into consecutive groups.
pub fn apply_spec<R: rand::Rng + ?Sized>(
    state: &Partition,
    spec: &MergerSpec,
    rng: &mut R,
) -> Result<Partition, PartitionError> {
    let mut order: Vec<usize> = (0..state.block_count()).collect();
    order.shuffle(rng);
    let mut groups = Vec::with_capacity(spec.groups());
    let mut pos = 0;
    for &k in spec.group_sizes() {
        groups.push(order[pos..pos + k].to_vec());
        pos += k;
    }
    state.merge_groups(&groups)
}

/// One-off simulation; builds a fresh simulator.
pub fn simulate(measure: &XiMeasure, n: usize, rng: &mut Stream) -> Result<GenealogyRecord, SimError> {
    CoalescentSimulator::new(measure, n, Kernel::Auto)?.simulate(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::domain;

    fn record_with_times(times: &[f64], states: &[&str]) -> GenealogyRecord {
        let events = times
            .iter()
            .zip(states)
            .enumerate()
            .map(|(i, (&t, s))| Event {
                time: t,
                state: s.parse().unwrap(),
                spec: (i > 0).then(|| MergerSpec::new(2, vec![2], 0).unwrap()),
            })
            .collect();
        GenealogyRecord {
            mode: Mode::Continuous,
            n: 2,
            seed: 0,
            replicate: 0,
            events,
            streamed_total_length: None,
            trace: None,
        }
    }

    #[test]
    fn single_event_functionals() {
        let r = record_with_times(&[0.0, 0.7], &["[[1],[2]]", "[[1,2]]"]);
        assert_eq!(tmrca(&r).unwrap(), 0.7);
        assert_eq!(total_length(&r).unwrap(), 1.4);
        assert_eq!(branch_lengths(&r).unwrap(), vec![1.4]);
    }

    #[test]
    fn incomplete_and_discrete_records() {
        let mut r = record_with_times(&[0.0], &["[[1],[2]]"]);
        assert_eq!(tmrca(&r), Err(RecordError::Incomplete));
        r = record_with_times(&[0.0, 12.0], &["[[1],[2]]", "[[1,2]]"]);
        r.mode = Mode::Discrete;
        assert_eq!(tmrca(&r).unwrap(), 12.0);
        assert_eq!(total_length(&r), Err(RecordError::Mode));
    }

    #[test]
    fn n2_length_is_twice_tmrca() {
        let sim = CoalescentSimulator::new(&XiMeasure::kingman(), 2, Kernel::Auto).unwrap();
        for i in 0..100 {
            let r = sim.simulate(&mut Stream::new(3, domain::COALESCENT, i)).unwrap();
            assert_eq!(r.n_events(), 1);
            assert_eq!(total_length(&r).unwrap(), 2.0 * tmrca(&r).unwrap());
        }
    }

    #[test]
    fn streamed_length_matches_post_hoc() {
        let m = XiMeasure::beta(4, 1.3).unwrap();
        for kernel in [Kernel::Generator, Kernel::Lazy] {
            let sim = CoalescentSimulator::new(&m, 7, kernel).unwrap();
            for i in 0..200 {
                let r = sim.simulate(&mut Stream::new(5, domain::COALESCENT, i)).unwrap();
                let a = r.streamed_total_length.unwrap();
                let b = total_length(&r).unwrap();
                assert!((a - b).abs() <= 1e-12 * a.max(1.0));
                let blocks: Vec<usize> = r.events.iter().map(|e| e.state.block_count()).collect();
                assert!(blocks.windows(2).all(|w| w[1] < w[0]));
                assert!(r.events.windows(2).all(|w| w[1].time > w[0].time));
            }
        }
    }

    #[test]
    fn two_fold_never_three_groups() {
        let m = XiMeasure::beta(2, 1.5).unwrap();
        let sim = CoalescentSimulator::new(&m, 12, Kernel::Lazy).unwrap();
        for i in 0..500 {
            let r = sim.simulate(&mut Stream::new(9, domain::COALESCENT, i)).unwrap();
            assert!(r.max_groups_in_one_event() <= 2);
        }
    }

    #[test]
    fn lazy_exit_rate_matches_generator_diagonal() {
        let m: XiMeasure = "0.3*kingman+0.7*beta:k=4:alpha=1.5".parse().unwrap();
        let g = generator_matrix(&m, 6).unwrap();
        let sim = CoalescentSimulator::new(&m, 6, Kernel::Lazy).unwrap();
        for (i, p) in g.states().iter().enumerate() {
            let b = p.block_count();
            assert!((sim.exit_rate(b) + g.diagonal(i)).abs() < 1e-12 * sim.exit_rate(b).max(1.0));
        }
    }

    #[test]
    fn event_cap_reports_seed() {
        let sim = CoalescentSimulator::new(&XiMeasure::kingman(), 5, Kernel::Auto)
            .unwrap()
            .with_event_cap(2);
        let err = sim.simulate(&mut Stream::new(42, domain::COALESCENT, 7)).unwrap_err();
        assert!(matches!(err, SimError::EventCap { cap: 2, seed: 42, replicate: 7 }));
    }
}
