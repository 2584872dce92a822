use std::collections::BTreeMap;

use dipcoal::ancestry::step_with_couples;
use dipcoal::partitions::{complete_dispersion, merger_spec, DiploidState, MergerSpec, Partition, Transition};
use dipcoal::rng::Stream;
use dipcoal::xi_rates::{consistency_check, rate, Component, Mixing, XiMeasure};
use proptest::prelude::*;

/// Partition of `1..=labels.len()` grouping equal labels.
fn partition_from_labels(labels: &[usize]) -> Partition {
    let mut blocks: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (g, &l) in labels.iter().enumerate() {
        blocks.entry(l).or_default().push(g + 1);
    }
    Partition::from_blocks(labels.len(), &blocks.into_values().collect::<Vec<_>>()).unwrap()
}

fn partition_strategy() -> impl Strategy<Value = Partition> {
    (2usize..=16).prop_flat_map(|n| prop::collection::vec(0..n, n)).prop_map(|l| partition_from_labels(&l))
}

proptest! {
    #[test]
    fn partition_text_round_trip(p in partition_strategy()) {
        let q: Partition = p.to_string().parse().unwrap();
        prop_assert_eq!(q, p);
    }

    #[test]
    fn merger_spec_recovers_grouping(p in partition_strategy(), seed in any::<u64>()) {
        let b = p.block_count();
        let mut rng = Stream::new(seed, 0, 0);
        let labels: Vec<usize> = (0..b).map(|_| rand::Rng::random_range(&mut rng, 0..b)).collect();
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, &l) in labels.iter().enumerate() {
            groups.entry(l).or_default().push(i);
        }
        let groups: Vec<Vec<usize>> = groups.into_values().collect();
        let q = p.merge_groups(&groups).unwrap();
        prop_assert!(q.is_coarsening_of(&p));
        let mut sizes: Vec<usize> = groups.iter().map(Vec::len).filter(|&k| k >= 2).collect();
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        let singles = groups.iter().filter(|g| g.len() == 1).count();
        match merger_spec(&p, &q).unwrap() {
            Transition::NoMerge => prop_assert!(sizes.is_empty()),
            Transition::Merge(s) => {
                prop_assert_eq!(s.group_sizes(), &sizes[..]);
                prop_assert_eq!(s.singletons(), singles);
                prop_assert_eq!(s.blocks_after(), q.block_count());
                prop_assert_eq!(s, MergerSpec::new(b, sizes.clone(), singles).unwrap());
            }
        }
    }

    #[test]
    fn diploid_text_round_trip(p in partition_strategy(), seed in any::<u64>()) {
        let b = p.block_count();
        let mut rng = Stream::new(seed, 0, 1);
        let mut order: Vec<usize> = (0..b).collect();
        rand::seq::SliceRandom::shuffle(&mut order[..], &mut rng);
        let d = rand::Rng::random_range(&mut rng, 0..=b / 2);
        let pairs: Vec<(usize, usize)> = (0..d).map(|i| (order[2 * i], order[2 * i + 1])).collect();
        let s = DiploidState::new(p.clone(), pairs).unwrap();
        let t: DiploidState = s.to_string().parse().unwrap();
        prop_assert_eq!(&t, &s);
        prop_assert_eq!(complete_dispersion(&s), p);
        prop_assert_eq!(s.individual_count(), b - d);
    }

    #[test]
    fn steps_preserve_genes_and_never_merge_pairs(p in partition_strategy(), seed in any::<u64>()) {
        let b = p.block_count();
        let pairs: Vec<(usize, usize)> = (0..b / 2).map(|i| (2 * i, 2 * i + 1)).collect();
        let s = DiploidState::new(p.clone(), pairs.clone()).unwrap();
        let mut rng = Stream::new(seed, 0, 2);
        let k = s.individual_count();
        // few parents so that mergers are common
        let couples: Vec<(u32, u32)> = (0..k)
            .map(|_| {
                let x = rand::Rng::random_range(&mut rng, 0..3u32);
                (x, x + 1 + rand::Rng::random_range(&mut rng, 0..2u32))
            })
            .collect();
        let (next, placement) = step_with_couples(&s, &couples, &mut rng).unwrap();
        prop_assert!(next.partition().is_coarsening_of(&p));
        prop_assert_eq!(placement.slots.len(), next.partition().block_count());
        let masks = p.masks();
        for &(i, j) in &pairs {
            let both = masks[i] | masks[j];
            prop_assert!(next.partition().masks().iter().all(|&m| m & both != both));
        }
    }

    #[test]
    fn rates_are_consistent_for_random_mixtures(
        alpha in 1.01f64..1.99,
        x0 in 0.01f64..1.0,
        w in 0.0f64..1.0,
        fold in 1usize..=5,
    ) {
        let m = XiMeasure::new(
            w,
            vec![
                Component { fold, mixing: Mixing::Beta { alpha }, weight: (1.0 - w) / 2.0 },
                Component { fold: 4, mixing: Mixing::PointMass { x0 }, weight: (1.0 - w) / 2.0 },
            ],
            false,
        );
        // zero-weight components are rejected
        prop_assume!(m.is_ok());
        let m = m.unwrap();
        let r = consistency_check(&m, 8).unwrap();
        prop_assert!(r.max_violation < 1e-10, "{:?}", r);
        let pair = MergerSpec::new(2, vec![2], 0).unwrap();
        prop_assert!((rate(&m, &pair) - m.total_mass()).abs() < 1e-12);
    }
}
