use dipcoal::analysis::{estimate_cn, estimate_phi, expected_group_counts, group_count_test, observed_group_counts};
use dipcoal::forward_models::{sample_offspring, FitnessLaw, ModelConfig, PotentialOffspringLaw};
use dipcoal::partitions::Partition;
use dipcoal::rng::{domain, par_replicates};
use dipcoal::stats::{chi2_test, ks_two_sample, mean_var};
use dipcoal::xi_coalescent::{branch_lengths, simulate, CoalescentSimulator, Kernel};
use dipcoal::xi_rates::{rate, specs_for, XiMeasure};
use statrs::distribution::{Binomial, Discrete};

#[test]
fn kingman_branch_lengths_n4() {
    // first-step solve: E[L_i] = 2 / i for the Kingman coalescent
    let expected = [2.0, 1.0, 2.0 / 3.0];
    let lengths = par_replicates(11, domain::COALESCENT, 100_000, |s| {
        branch_lengths(&simulate(&XiMeasure::kingman(), 4, s).unwrap()).unwrap()
    });
    for (i, &want) in expected.iter().enumerate() {
        let xs: Vec<f64> = lengths.iter().map(|l| l[i]).collect();
        let (m, v) = mean_var(&xs);
        let se = (v / xs.len() as f64).sqrt();
        assert!((m - want).abs() < 4.0 * se, "L_{}: {m} vs {want} (se {se})", i + 1);
    }
}

#[test]
fn first_jump_frequencies_match_rates() {
    for n in 2..=5 {
        let m = XiMeasure::beta(4, 1.5).unwrap();
        let sim = CoalescentSimulator::new(&m, n, Kernel::Auto).unwrap();
        let specs = specs_for(n);
        let w: Vec<f64> = specs.iter().map(|s| rate(&m, s) * s.multiplicity()).collect();
        let total: f64 = w.iter().sum();
        let probs: Vec<f64> = w.iter().map(|x| x / total).collect();
        let first = par_replicates(12, domain::COALESCENT, 20_000, |s| {
            let rec = sim.simulate(s).unwrap();
            let spec = rec.events[1].spec.clone().unwrap();
            (specs.iter().position(|t| *t == spec).unwrap(), rec.events[1].time)
        });
        let mut counts = vec![0u64; specs.len()];
        for (i, _) in &first {
            counts[*i] += 1;
        }
        if specs.len() > 1 {
            let r = chi2_test(&counts, &probs).unwrap();
            assert!(r.p_value > 0.001, "n={n}: {r:?}");
        }
        let times: Vec<f64> = first.iter().map(|x| x.1).collect();
        let (mean, v) = mean_var(&times);
        assert!((mean - 1.0 / total).abs() < 4.0 * (v / times.len() as f64).sqrt(), "n={n}");
    }
}

#[test]
fn two_fold_group_histogram_matches_jump_chain() {
    let m = XiMeasure::beta(2, 1.25).unwrap();
    let sim = CoalescentSimulator::new(&m, 8, Kernel::Auto).unwrap();
    let recs = par_replicates(13, domain::COALESCENT, 20_000, |s| sim.simulate(s).unwrap());
    let observed = observed_group_counts(&recs);
    assert!(observed.len() <= 3, "two-fold measure produced {observed:?}");
    let expected = expected_group_counts(&m, 8).unwrap();
    let r = group_count_test(&observed, &expected, 1).unwrap();
    assert!(r.p_value > 0.001, "{r:?}");
}

fn totals(config: &ModelConfig, reps: u64, seed: u64) -> Vec<Vec<u32>> {
    par_replicates(seed, domain::OFFSPRING, reps, |s| sample_offspring(config, s).unwrap().totals())
}

#[test]
fn offspring_numbers_are_exchangeable() {
    let models = [
        ModelConfig::RandomFitness { n_pop: 60, fitness: FitnessLaw::Pareto { alpha: 1.5, x_min: 1.0 }, resample_cap: 100 },
        ModelConfig::GaltonWatsonSampling {
            n_pop: 60,
            c_x1: 4.0,
            offspring: PotentialOffspringLaw::ParetoFloor { alpha: 1.5, x_min: 1.0 },
            resample_cap: 100,
        },
        ModelConfig::LargeFamily { n_pop: 60, psi: 0.5, gamma: 0.5 },
    ];
    for (k, m) in models.iter().enumerate() {
        let t = totals(m, 20_000, 20 + k as u64);
        let first: Vec<f64> = t.iter().map(|v| v[0] as f64).collect();
        let last: Vec<f64> = t.iter().map(|v| v[59] as f64).collect();
        let r = ks_two_sample(&first, &last).unwrap();
        assert!(r.p_value > 0.001, "{}: {r:?}", m.id());
        for v in &t {
            assert_eq!(v.iter().map(|&x| x as u64).sum::<u64>(), 120);
        }
    }
}

#[test]
fn unit_fitness_is_wright_fisher() {
    let n = 100u64;
    let rf = ModelConfig::RandomFitness { n_pop: n as usize, fitness: FitnessLaw::PointMass { value: 1.0 }, resample_cap: 100 };
    // V_1 ~ Bin(N, 2/N) in the Wright-Fisher model
    let bin = Binomial::new(2.0 / n as f64, n).unwrap();
    let cells = 10;
    let mut probs: Vec<f64> = (0..cells - 1).map(|k| bin.pmf(k as u64)).collect();
    probs.push(1.0 - probs.iter().sum::<f64>());
    let mut counts = vec![0u64; cells];
    for v in totals(&rf, 20_000, 30) {
        counts[(v[0] as usize).min(cells - 1)] += 1;
    }
    let r = chi2_test(&counts, &probs).unwrap();
    assert!(r.p_value > 0.001, "{r:?}");

    let wf = ModelConfig::WrightFisher { n_pop: n as usize };
    let a = estimate_cn(&rf, 20_000, 31).unwrap();
    let b = estimate_cn(&wf, 20_000, 32).unwrap();
    let joint = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
    assert!((a.value - b.value).abs() < 3.0 * joint, "{a:?} vs {b:?}");
    assert!(b.within(0.005, 3.0));
}

#[test]
fn pair_normalization_does_not_drift_with_reps() {
    let m = ModelConfig::WrightFisher { n_pop: 200 };
    let small = estimate_phi(&m, &[2], 1_000, 40).unwrap();
    let large = estimate_phi(&m, &[2], 100_000, 41).unwrap();
    let exact = 2.0 * 199.0 / 200.0;
    assert!((large.phi.value - exact).abs() <= (small.phi.value - exact).abs() + 1e-12);
    assert!((large.phi.value - exact).abs() < 1e-9, "{small:?} {large:?}");
}

#[test]
fn singletons_partition_is_the_start() {
    let m = XiMeasure::kingman();
    let rec = simulate(&m, 5, &mut dipcoal::rng::Stream::new(1, domain::COALESCENT, 0)).unwrap();
    assert_eq!(rec.events[0].state, Partition::singletons(5).unwrap());
    assert!(rec.is_complete());
}
