mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use structal::corpus::{Span, SyntheticSpec};
use structal::ie::{
    combine_uncertainty, generate_ie, nil_adjusted_ratio, second_stage_query, IeConfig, IeSimulation, IeSyntheticSpec,
    RelationCandidate,
};
use structal::learner::TrainConfig;
use structal::selector::{check_records, ALConfig, Strategy};

use common::ie_fixtures::{check_formulas, check_protocol, sp};

#[test]
fn annotation_protocol_fixtures() {
    let (total, failures) = check_protocol();
    assert_eq!(total, 20);
    assert!(failures.is_empty(), "{failures:#?}");
}

#[test]
fn uncertainty_and_ratio_formulas() {
    let failures = check_formulas();
    assert!(failures.is_empty(), "{failures:#?}");
}

fn cand(a: usize, b: usize, margin: f64) -> RelationCandidate {
    RelationCandidate {
        a,
        b,
        distribution: vec![(1.0 + margin) / 2.0, (1.0 - margin) / 2.0],
        margin,
    }
}

#[test]
fn second_stage_counts() {
    let spans = vec![sp(0, 0, "PER"), sp(2, 2, "ORG"), sp(4, 4, "LOC"), sp(6, 6, "ORG")];
    let candidates = vec![
        cand(0, 1, 0.5),
        cand(0, 2, 0.1),
        cand(0, 3, 0.9),
        cand(1, 2, 0.0),
        cand(1, 3, 0.0),
        cand(2, 3, 0.0),
    ];
    let none = BTreeSet::new();
    assert!(second_stage_query(&spans, &candidates, &[], &none, 0.34).is_empty());
    let picked = second_stage_query(&spans, &candidates, &[spans[0].clone()], &none, 0.34);
    assert_eq!(picked, vec![0, 1]);
    let asked: BTreeSet<(Span, Span)> = [(spans[0].clone(), spans[2].clone())].into_iter().collect();
    let picked = second_stage_query(&spans, &candidates, &[spans[0].clone()], &asked, 0.34);
    assert_eq!(picked, vec![0]);
}

proptest! {
    #[test]
    fn combined_is_between_parts(m in 0.0f64..1.0, r in 0.0f64..1.0, beta in 0.0f64..=1.0) {
        let c = combine_uncertainty(m, r, beta).combined;
        prop_assert!(c >= m.min(r) - 1e-15 && c <= m.max(r) + 1e-15);
    }

    #[test]
    fn adjusted_ratio_never_shrinks(r in 0.0f64..=1.0, alphas in prop::collection::vec(0.0f64..=1.0, 0..20)) {
        let adj = nil_adjusted_ratio(r, &alphas);
        prop_assert!(adj >= r - 1e-15 && adj <= 1.0 + 1e-15);
    }
}

fn small_corpus(sentences: usize, seed: u64) -> structal::ie::IeCorpus {
    let spec = IeSyntheticSpec {
        base: SyntheticSpec {
            sentences,
            ..IeSyntheticSpec::default().base
        },
        ..IeSyntheticSpec::default()
    };
    generate_ie(&spec, seed).unwrap()
}

fn al(strategy: Strategy, st: bool) -> ALConfig {
    ALConfig {
        strategy,
        self_training: st,
        batch_tokens: 300,
        cycles: 2,
        seeds: vec![1],
        ..ALConfig::default()
    }
}

fn quick() -> TrainConfig {
    TrainConfig {
        steps: 200,
        eval_every: 100,
        ..TrainConfig::default()
    }
}

#[test]
fn partial_ie_cycles_keep_invariants() {
    let pool = small_corpus(250, 1);
    let test = small_corpus(40, 2);
    let mut sim = IeSimulation::new(&al(Strategy::Pa, true), &IeConfig::default(), &quick(), &pool, &test, 1).unwrap();
    let records = sim.run().unwrap();
    assert_eq!(records.len(), 2);
    check_records(&records).unwrap();
    sim.state.check_disjoint().unwrap();
    for r in &records {
        let d = r.ie.as_ref().unwrap();
        assert_eq!(d.relation_cost, d.relation_queries as f64);
        assert!(d.relation_ratio > 0.0 && d.relation_ratio <= 1.0);
        assert!((r.labeling_cost - d.mention_cost - d.relation_cost).abs() < 1e-9);
        assert!(matches!(r.test, structal::eval::EvalReport::Ie { .. }));
    }
    for (i, ann) in &sim.annotations {
        let s = &pool.sentences[*i];
        for ((a, b), label) in &ann.relations {
            if let (Some(x), Some(y)) = (s.gold_index(a), s.gold_index(b)) {
                assert_eq!(s.relation_between(x, y).unwrap_or("NONE"), label);
            } else {
                assert_eq!(label, "NONE");
            }
        }
    }
}

#[test]
fn full_ie_charges_every_pair() {
    let pool = small_corpus(250, 1);
    let test = small_corpus(40, 2);
    let mut sim = IeSimulation::new(
        &al(Strategy::Fa, false),
        &IeConfig::default(),
        &quick(),
        &pool,
        &test,
        1,
    )
    .unwrap();
    let r = sim.run_cycle().unwrap();
    let d = r.ie.unwrap();
    let pairs: usize = sim
        .annotations
        .keys()
        .map(|&i| {
            let n = pool.sentences[i].mentions.len();
            n * n.saturating_sub(1) / 2
        })
        .sum();
    let tokens: usize = sim.annotations.keys().map(|&i| pool.sentences[i].len()).sum();
    assert_eq!(d.relation_cost, pairs as f64);
    assert_eq!(d.mention_cost, tokens as f64);
    assert_eq!(r.reading_cost, tokens);
}
