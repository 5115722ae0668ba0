//! Hand-built relation annotation cases with their expected outcomes.

use structal::corpus::Span;
use structal::ie::{
    annotate_relation, candidate_nil_probability, combine_uncertainty, match_mention, nil_adjusted_ratio,
    relation_sentence_uncertainty, Endpoint, GoldRelation, IeSentence, MatchRule, MentionMatch, RelationOutcome,
};

use Endpoint::{Gold, Spurious};

pub fn fixture() -> IeSentence {
    IeSentence {
        id: "fx".into(),
        tokens: "a b c d e f g h i j".split(' ').map(String::from).collect(),
        pos: vec![],
        mentions: vec![Span::new(0, 1, "PER"), Span::new(4, 4, "ORG"), Span::new(7, 8, "LOC")],
        relations: vec![
            GoldRelation {
                head: 0,
                tail: 1,
                label: "WORK_FOR".into(),
            },
            GoldRelation {
                head: 2,
                tail: 1,
                label: "LOCATED_IN".into(),
            },
        ],
    }
}

pub fn sp(start: usize, end: usize, kind: &str) -> Span {
    Span::new(start, end, kind)
}

fn annotated(a: Endpoint, b: Endpoint, label: &str) -> RelationOutcome {
    RelationOutcome::Annotated {
        a,
        b,
        label: label.into(),
    }
}

fn corrected(a: Endpoint, b: Endpoint, label: &str, fixed: &[usize]) -> RelationOutcome {
    RelationOutcome::MentionsCorrected {
        a,
        b,
        label: label.into(),
        corrected: fixed.to_vec(),
    }
}

pub type ProtocolCase = (Span, Span, MatchRule, RelationOutcome);

pub fn protocol_cases() -> Vec<ProtocolCase> {
    let overlap = MatchRule::Overlap;
    let strict = MatchRule::Strict;
    vec![
        (
            sp(0, 1, "PER"),
            sp(4, 4, "ORG"),
            overlap,
            annotated(Gold(0), Gold(1), "WORK_FOR"),
        ),
        (
            sp(4, 4, "ORG"),
            sp(0, 1, "PER"),
            overlap,
            annotated(Gold(1), Gold(0), "WORK_FOR"),
        ),
        (
            sp(0, 1, "PER"),
            sp(7, 8, "LOC"),
            overlap,
            annotated(Gold(0), Gold(2), "NONE"),
        ),
        (
            sp(4, 4, "ORG"),
            sp(7, 8, "LOC"),
            overlap,
            annotated(Gold(1), Gold(2), "LOCATED_IN"),
        ),
        (
            sp(1, 1, "PER"),
            sp(4, 4, "ORG"),
            overlap,
            corrected(Gold(0), Gold(1), "WORK_FOR", &[0]),
        ),
        (
            sp(0, 2, "PER"),
            sp(4, 4, "ORG"),
            overlap,
            corrected(Gold(0), Gold(1), "WORK_FOR", &[0]),
        ),
        (
            sp(0, 1, "ORG"),
            sp(4, 4, "ORG"),
            overlap,
            corrected(Gold(0), Gold(1), "WORK_FOR", &[0]),
        ),
        (sp(2, 3, "PER"), sp(5, 6, "ORG"), overlap, RelationOutcome::Discarded),
        (
            sp(2, 3, "PER"),
            sp(4, 4, "ORG"),
            overlap,
            annotated(Spurious(sp(2, 3, "PER")), Gold(1), "NONE"),
        ),
        (
            sp(3, 5, "ORG"),
            sp(7, 7, "LOC"),
            overlap,
            corrected(Gold(1), Gold(2), "LOCATED_IN", &[1, 2]),
        ),
        (
            sp(1, 4, "PER"),
            sp(7, 8, "LOC"),
            overlap,
            corrected(Gold(0), Gold(2), "NONE", &[0]),
        ),
        (
            sp(0, 4, "ORG"),
            sp(4, 4, "ORG"),
            overlap,
            corrected(Gold(0), Gold(1), "WORK_FOR", &[0]),
        ),
        (
            sp(0, 0, "PER"),
            sp(1, 1, "PER"),
            overlap,
            corrected(Gold(0), Spurious(sp(1, 1, "PER")), "NONE", &[0]),
        ),
        (
            sp(1, 1, "PER"),
            sp(4, 4, "ORG"),
            strict,
            annotated(Spurious(sp(1, 1, "PER")), Gold(1), "NONE"),
        ),
        (
            sp(0, 1, "ORG"),
            sp(4, 4, "ORG"),
            strict,
            corrected(Gold(0), Gold(1), "WORK_FOR", &[0]),
        ),
        (sp(0, 2, "PER"), sp(3, 3, "ORG"), strict, RelationOutcome::Discarded),
    ]
}

/// Runs every fixture: the protocol cases, an empty-gold query and three
/// mention matches. Returns the number of fixtures and the failures.
pub fn check_protocol() -> (usize, Vec<String>) {
    let g = fixture();
    let mut failures = Vec::new();
    let cases = protocol_cases();
    let mut total = cases.len();
    for (k, (a, b, rule, want)) in cases.iter().enumerate() {
        let got = annotate_relation(a, b, &g, *rule);
        if &got != want {
            failures.push(format!("case {k}: {got:?} != {want:?}"));
        }
    }
    let empty = IeSentence {
        mentions: vec![],
        relations: vec![],
        ..fixture()
    };
    let got = annotate_relation(&sp(0, 1, "PER"), &sp(4, 4, "ORG"), &empty, MatchRule::Overlap);
    if got != RelationOutcome::Discarded {
        failures.push(format!("empty gold: {got:?}"));
    }
    let matches = [
        (sp(7, 8, "LOC"), MentionMatch::Exact(2)),
        (sp(8, 9, "LOC"), MentionMatch::Fixable(2)),
        (sp(9, 9, "LOC"), MentionMatch::Unfixable),
    ];
    total += 1 + matches.len();
    for (span, want) in matches {
        let got = match_mention(&span, &g.mentions, MatchRule::Overlap);
        if got != want {
            failures.push(format!("match {span:?}: {got:?} != {want:?}"));
        }
    }
    (total, failures)
}

/// Exact checks of the uncertainty combination, the sentence aggregation
/// and the adjusted ratio including both endpoints.
pub fn check_formulas() -> Vec<String> {
    let mut failures = Vec::new();
    let mut expect = |what: &str, ok: bool| {
        if !ok {
            failures.push(what.to_string());
        }
    };
    expect(
        "beta mix",
        combine_uncertainty(0.4, 0.8, 0.9).combined == 0.9 * 0.4 + 0.1 * 0.8,
    );
    expect("beta 1", combine_uncertainty(0.4, 0.8, 1.0).combined == 0.4);
    expect("beta 0", combine_uncertainty(0.4, 0.8, 0.0).combined == 0.8);
    expect("single pair", relation_sentence_uncertainty(2, &[(0, 1, 0.6)]) == 0.6);
    expect(
        "max per mention then mean",
        relation_sentence_uncertainty(3, &[(0, 2, 0.2), (0, 1, 0.8), (1, 2, 0.8)]) == (0.8 + 0.8 + 0.8) / 3.0,
    );
    expect(
        "duplicate pair keeps max",
        relation_sentence_uncertainty(2, &[(0, 1, 0.2), (0, 1, 0.8)]) == 0.8,
    );
    expect("no mentions", relation_sentence_uncertainty(0, &[]) == 0.0);
    expect("alpha 0", nil_adjusted_ratio(0.3, &[0.0, 0.0]) == 0.3);
    expect("alpha 1", nil_adjusted_ratio(0.3, &[1.0]) == 1.0);
    expect(
        "alpha mean",
        (nil_adjusted_ratio(0.3, &[0.1, 0.3]) - 0.44).abs() < 1e-12,
    );
    expect("no candidates", nil_adjusted_ratio(0.3, &[]) == 0.3);
    expect(
        "noisy or",
        (candidate_nil_probability(&[0.5, 0.5]) - 0.75).abs() < 1e-15,
    );
    expect("noisy or empty", candidate_nil_probability(&[]) == 0.0);
    failures
}
