//! Property tests: parser robustness and round-tripping, and differential
//! checks of variable elimination against brute-force enumeration.

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use schemanet::infer::{
    cpt_factor, eliminate, posterior, posterior_by_enumeration, posterior_opts, Evidence, Factor,
    InferError, PosteriorOptions,
};
use schemanet::parser::{parse_kb, pretty_print};
use schemanet::testing::{random_evidence, random_kb, seed_from_env, GenConfig};

proptest! {
    #[test]
    fn parse_kb_never_panics(input in "\\PC*") {
        let _ = parse_kb(&input);
    }

    #[test]
    fn parse_kb_never_panics_on_bytes(input in proptest::collection::vec(any::<u8>(), 0..256)) {
        let _ = parse_kb(&String::from_utf8_lossy(&input));
    }

    #[test]
    fn diagnostics_stay_within_the_input(input in "[a-z(){}=.|~, \n0-9A-Z]{0,120}") {
        if let Err(diags) = parse_kb(&input) {
            let line_count = input.lines().count().max(1);
            for d in diags {
                prop_assert!(d.span.line >= 1 && d.span.line <= line_count);
                prop_assert!(d.span.column >= 1);
            }
        }
    }
}

#[test]
fn pretty_print_round_trips_generated_kbs() {
    let mut rng = ChaCha8Rng::seed_from_u64(seed_from_env(11));
    for _ in 0..100 {
        let (kb, _) = random_kb(&mut rng, &GenConfig::default());
        let printed = pretty_print(&kb);
        let reparsed = parse_kb(&printed).expect("printed kb reparses");
        assert_eq!(kb, reparsed, "round trip through text:\n{printed}");
    }
}

#[test]
fn elimination_matches_oracle_on_random_networks() {
    let mut rng = ChaCha8Rng::seed_from_u64(seed_from_env(13));
    for case in 0..200 {
        let (_, net) = random_kb(&mut rng, &GenConfig::default());
        let ev = random_evidence(&mut rng, &net, 3);
        let query = net.node(rng.gen_range(0..net.node_count())).clone();
        let ve = posterior(&net, &query, &ev);
        let oracle = posterior_by_enumeration(&net, &query, &ev);
        match (ve, oracle) {
            (Ok(a), Ok(b)) => {
                assert!(
                    (a.p_true - b.p_true).abs() < 1e-9,
                    "case {case}: VE {} vs oracle {}",
                    a.p_true,
                    b.p_true
                );
                assert!((a.evidence_probability - b.evidence_probability).abs() < 1e-9);
                assert!((0.0..=1.0).contains(&a.p_true));
                assert!(a.evidence_probability > 0.0 && a.evidence_probability <= 1.0);
            }
            (Err(InferError::ImpossibleEvidence), Err(InferError::ImpossibleEvidence)) => {}
            (a, b) => panic!("case {case}: VE {a:?} disagrees with oracle {b:?}"),
        }
    }
}

#[test]
fn barren_pruning_matches_plain_posteriors() {
    let mut rng = ChaCha8Rng::seed_from_u64(seed_from_env(17));
    for _ in 0..100 {
        let (_, net) = random_kb(&mut rng, &GenConfig::default());
        let ev = random_evidence(&mut rng, &net, 2);
        let query = net.node(rng.gen_range(0..net.node_count())).clone();
        let plain = posterior(&net, &query, &ev);
        let pruned =
            posterior_opts(&net, &query, &ev, PosteriorOptions { prune_barren: true });
        match (plain, pruned) {
            (Ok(a), Ok(b)) => {
                assert!((a.p_true - b.p_true).abs() < 1e-9);
                assert!((a.evidence_probability - b.evidence_probability).abs() < 1e-9);
            }
            (Err(a), Err(b)) => assert_eq!(a, b),
            (a, b) => panic!("pruning changed the outcome: {a:?} vs {b:?}"),
        }
    }
}

/// P(ev) computed through the public factor API with an explicit elimination
/// order.
fn event_prob_with_order(
    net: &schemanet::GroundNetwork,
    ev: &Evidence,
    order: &[usize],
) -> f64 {
    let ev_idx: Vec<(usize, bool)> = ev
        .iter()
        .map(|(id, &v)| (net.node_index(id).unwrap(), v))
        .collect();
    let mut constant = 1.0;
    let mut factors: Vec<Factor> = Vec::new();
    for node in 0..net.node_count() {
        let mut f = cpt_factor(net, node);
        for &(var, val) in &ev_idx {
            f = f.restrict(var, val);
        }
        if f.scope.is_empty() {
            constant *= f.values[0];
        } else {
            factors.push(f);
        }
    }
    for &var in order {
        if factors.iter().any(|f| f.scope.contains(&var)) {
            factors = eliminate(factors, var).unwrap();
        }
    }
    for f in factors {
        assert!(f.scope.is_empty());
        constant *= f.values[0];
    }
    constant
}

#[test]
fn any_elimination_order_gives_the_same_posterior() {
    let mut rng = ChaCha8Rng::seed_from_u64(seed_from_env(19));
    for _ in 0..50 {
        let (_, net) = random_kb(&mut rng, &GenConfig::default());
        let ev = random_evidence(&mut rng, &net, 2);
        let query_idx = rng.gen_range(0..net.node_count());
        let query = net.node(query_idx).clone();
        if ev.contains_key(&query) {
            continue;
        }
        let observed: BTreeSet<usize> =
            ev.keys().map(|id| net.node_index(id).unwrap()).collect();
        let mut hidden: Vec<usize> = (0..net.node_count())
            .filter(|i| !observed.contains(i) && *i != query_idx)
            .collect();

        let mut reference = None;
        for _ in 0..4 {
            let mut order = hidden.clone();
            order.push(query_idx);
            order.shuffle(&mut rng);
            let p_ev = event_prob_with_order(&net, &ev, &order);
            if p_ev <= 1e-12 {
                break;
            }
            let mut ev_true = ev.clone();
            ev_true.insert(query.clone(), true);
            hidden.shuffle(&mut rng);
            let p_joint = event_prob_with_order(&net, &ev_true, &hidden);
            let p = p_joint / p_ev;
            match reference {
                None => reference = Some(p),
                Some(r) => assert!(
                    (p - r).abs() < 1e-9,
                    "elimination order changed the posterior: {p} vs {r}"
                ),
            }
        }
    }
}
