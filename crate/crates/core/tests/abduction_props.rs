//! Abduction spaces against the arithmetic and geometric oracles, and
//! consistency-based selection.

use std::collections::BTreeMap;

use cabl_core::abduction::{
    abduction_space_generic, abduction_space_oracle, conditioned_space, consistency_score, generic_spaces,
    select_candidate, select_weighted, AbductionSpace, ConceptDistribution,
};
use cabl_core::logic::{LabelId, SolveLimits, Target};
use cabl_core::partition::partition;
use cabl_core::tasks::{Instance, Square, Task};
use proptest::prelude::*;

fn assert_bounded(space: &AbductionSpace, m: usize) {
    assert!(space.len() as u64 <= space.bound(m), "|S|={} exceeds N^m", space.len());
    for z in &space.members {
        assert_eq!(z.len(), m);
        assert!(z.iter().all(|l| space.domain.contains(l)));
    }
}

fn domain_from_mask(mask: u32, n: usize) -> Vec<LabelId> {
    let d: Vec<LabelId> = (0..n).filter(|&l| mask & (1 << l) != 0).collect();
    if d.is_empty() {
        vec![0]
    } else {
        d
    }
}

#[test]
fn single_digit_spaces_match_the_oracle_everywhere() {
    for base in [10u32, 16] {
        let task = Task::addition(base, 1).unwrap();
        let all: Vec<LabelId> = (0..base as usize).collect();
        let spaces = generic_spaces(&task, task.theory(), &[], &all, 1 << 20, SolveLimits::default()).unwrap();
        assert_eq!(spaces.len(), 2 * base as usize - 1);
        for y in 0..2 * base as i64 - 1 {
            let y = Target::Int(y);
            let oracle = abduction_space_oracle(&task, &y, &[], &all);
            assert_eq!(spaces[&y].members, oracle.members, "base {base} target {y:?}");
            assert_bounded(&oracle, 2);
        }
    }
}

#[test]
fn every_phase_space_respects_the_bound() {
    let task = Task::addition(10, 2).unwrap();
    let c = partition(task.kb(), Some(2)).unwrap();
    for (p, s) in c.phases().iter().enumerate() {
        let domain: Vec<LabelId> = s.domain.iter().copied().collect();
        let theory = c.theory(task.theory(), p);
        for space in generic_spaces(&task, &theory, &[], &domain, 10_000, SolveLimits::default()).unwrap().values() {
            assert_bounded(space, 4);
            let oracle = abduction_space_oracle(&task, &space.target, &[], &domain);
            assert_eq!(space.members, oracle.members);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn restricted_domains_match_the_oracle(base in prop_oneof![Just(10u32), Just(16u32)], mask in 1u32..65536, y in 0i64..31) {
        let task = Task::addition(base, 1).unwrap();
        let domain = domain_from_mask(mask, base as usize);
        let y = Target::Int(y);
        let generic = abduction_space_generic(&task, task.theory(), &y, &[], &domain, 1 << 20, SolveLimits::default()).unwrap();
        let oracle = abduction_space_oracle(&task, &y, &[], &domain);
        prop_assert_eq!(&generic.members, &oracle.members);
        assert_bounded(&generic, 2);
    }

    #[test]
    fn chess_spaces_match_geometry(seed in any::<u64>(), mask in 1u32..64, attack in any::<bool>()) {
        use rand::SeedableRng;
        let task = Task::chess(8, 3).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let Instance { squares, .. } = task.sample(&mut rng, &[0]);
        let domain = domain_from_mask(mask, 6);
        let y = Target::Bool(attack);
        let generic = abduction_space_generic(&task, task.theory(), &y, &squares, &domain, 1 << 20, SolveLimits::default()).unwrap();
        let oracle = abduction_space_oracle(&task, &y, &squares, &domain);
        prop_assert_eq!(&generic.members, &oracle.members);
        assert_bounded(&generic, 3);
    }

    #[test]
    fn conditioning_keeps_the_truth(labels in prop::collection::vec(0usize..10, 4), fix in prop::collection::vec(any::<bool>(), 4)) {
        let task = Task::addition(10, 2).unwrap();
        let all: Vec<LabelId> = (0..10).collect();
        let instance = Instance { labels: labels.clone(), squares: Vec::<Square>::new() };
        let space = abduction_space_oracle(&task, &task.evaluate(&instance), &[], &all);
        let fixed: BTreeMap<usize, LabelId> = fix.iter().enumerate().filter(|(_, f)| **f).map(|(i, _)| (i, labels[i])).collect();
        let cond = conditioned_space(&space, &fixed);
        prop_assert!(cond.members.contains(&labels));
        prop_assert!(cond.members.iter().all(|z| space.members.contains(z)));
        prop_assert!(cond.len() <= space.len());
        assert_bounded(&cond, 4);
    }
}

/// Random simplex rows for `m` positions over `n` labels.
fn distribution(n: usize, m: usize) -> impl Strategy<Value = ConceptDistribution> {
    prop::collection::vec(prop::collection::vec(0.001f64..1.0, n), m).prop_map(|rows| {
        let rows = rows
            .into_iter()
            .map(|r| {
                let total: f64 = r.iter().sum();
                r.into_iter().map(|v| v / total).collect()
            })
            .collect();
        ConceptDistribution::new(rows).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn selection_maximizes_consistency(y in 0i64..199, d in distribution(10, 4), scale in prop::collection::vec(0.01f64..100.0, 4)) {
        let task = Task::addition(10, 2).unwrap();
        let all: Vec<LabelId> = (0..10).collect();
        let space = abduction_space_oracle(&task, &Target::Int(y), &[], &all);
        let chosen = select_candidate(&space, &d).unwrap();
        prop_assert!(space.members.contains(chosen));
        let best = consistency_score(chosen, &d);
        for z in &space.members {
            // log-domain comparison may differ from the product in the last bits
            prop_assert!(consistency_score(z, &d) <= best * (1.0 + 1e-12));
        }
        // rescaling a position multiplies every score by the same constant
        let scaled: Vec<Vec<f64>> = d
            .per_position()
            .iter()
            .zip(&scale)
            .map(|(row, s)| row.iter().map(|p| p * s).collect())
            .collect();
        prop_assert_eq!(select_weighted(&space, &scaled).unwrap(), chosen);
    }
}
