use std::collections::BTreeMap;

use proptest::prelude::*;
use seqsl_core::data::{TimeSlice, UnitId, UnitObservation};
use seqsl_core::graph::{degree_plus_one, DependencyGraph};
use seqsl_core::ledger::RiskLedger;
use seqsl_core::loss::{averaged_loss, pointwise_loss, LossSpec};

fn slice_from(rows: &[(bool, f64, f64)]) -> (TimeSlice, BTreeMap<UnitId, f64>) {
    let units = rows
        .iter()
        .enumerate()
        .map(|(i, &(w, y, _))| {
            UnitObservation::new(format!("u{i:03}"), w, vec![], vec![], if w { y } else { 0.0 })
                .unwrap()
        })
        .collect();
    let preds = rows
        .iter()
        .enumerate()
        .map(|(i, &(_, _, p))| (UnitId(format!("u{i:03}")), p))
        .collect();
    (TimeSlice::new(1, units).unwrap(), preds)
}

proptest! {
    #[test]
    fn averaged_loss_is_bounded(
        b in 0.1f64..10.0,
        rows in prop::collection::vec((any::<bool>(), 0.0f64..1.0, 0.0f64..1.0), 1..40),
    ) {
        let rows: Vec<_> = rows.into_iter().map(|(w, y, p)| (w, y * b, p * b)).collect();
        let (slice, preds) = slice_from(&rows);
        let l = averaged_loss(&LossSpec::least_squares(b), &preds, &slice).unwrap();
        prop_assert!((0.0..=4.0 * b * b).contains(&l));
    }

    #[test]
    fn pointwise_loss_is_midpoint_convex(b in 0.1f64..10.0, y in 0.0f64..1.0, p in 0.0f64..1.0, q in 0.0f64..1.0) {
        let spec = LossSpec::least_squares(b);
        let obs = UnitObservation::new("a", true, vec![], vec![], y * b).unwrap();
        let (p, q) = (p * b, q * b);
        let mid = pointwise_loss(&spec, 0.5 * (p + q), &obs).unwrap();
        let avg = 0.5 * (pointwise_loss(&spec, p, &obs).unwrap() + pointwise_loss(&spec, q, &obs).unwrap());
        prop_assert!(mid <= avg + 1e-12 * avg.max(1.0));
    }

    #[test]
    fn ledger_is_an_exact_running_mean(losses in prop::collection::vec(prop::collection::vec(0u32..1000, 3), 1..30)) {
        let ids = vec!["a".to_string(), "b".to_string(), "c".to_string()];
        let mut ledger = RiskLedger::new(ids);
        for l in &losses {
            let f: Vec<f64> = l.iter().map(|&v| v as f64).collect();
            ledger = ledger.update(&f).unwrap();
        }
        let t = losses.len();
        for (j, r) in ledger.risks().unwrap().into_iter().enumerate() {
            // integer sums below 2^53 are exact, so the quotient is the
            // correctly rounded mean
            let sum: u64 = losses.iter().map(|l| l[j] as u64).sum();
            prop_assert_eq!(r, sum as f64 / t as f64);
            prop_assert!(r >= 0.0);
        }
    }

    #[test]
    fn degree_is_invariant_under_relabeling(
        n in 1usize..25,
        edges in prop::collection::vec((0usize..25, 0usize..25), 0..60),
        perm_seed in any::<u64>(),
    ) {
        let ids: Vec<UnitId> = (0..n).map(|i| UnitId(format!("v{i:02}"))).collect();
        let edges: Vec<(usize, usize)> = edges
            .into_iter()
            .map(|(a, b)| (a % n, b % n))
            .filter(|(a, b)| a != b)
            .collect();
        let g = DependencyGraph::from_edges(
            ids.clone(),
            edges.iter().map(|&(a, b)| (ids[a].clone(), ids[b].clone())),
        ).unwrap();
        // a permutation of the labels from a simple LCG shuffle
        let mut perm: Vec<usize> = (0..n).collect();
        let mut s = perm_seed;
        for i in (1..n).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        let relabeled = DependencyGraph::from_edges(
            ids.clone(),
            edges.iter().map(|&(a, b)| (ids[perm[a]].clone(), ids[perm[b]].clone())),
        ).unwrap();
        prop_assert_eq!(degree_plus_one(&g).unwrap(), degree_plus_one(&relabeled).unwrap());
        prop_assert_eq!(g.edge_count(), relabeled.edge_count());
    }
}

#[test]
fn graph_adjacency_is_symmetric_without_self_loops() {
    let ids: Vec<UnitId> = (0..30).map(|i| UnitId(format!("v{i:02}"))).collect();
    let g = DependencyGraph::ring_lattice(ids, 3).unwrap();
    for i in 0..g.len() {
        assert!(!g.neighbors(i).contains(&i));
        for &j in g.neighbors(i) {
            assert!(g.neighbors(j).contains(&i));
        }
    }
}
