//! BIO tag helpers.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Tag<'a> {
    Outside,
    Begin(&'a str),
    Inside(&'a str),
}

/// Parses `O`, `B-<type>` or `I-<type>`.
pub fn parse_tag(tag: &str) -> Option<Tag<'_>> {
    if tag == "O" {
        return Some(Tag::Outside);
    }
    let (prefix, kind) = tag.split_once('-')?;
    if kind.is_empty() || kind.chars().any(char::is_whitespace) {
        return None;
    }
    match prefix {
        "B" => Some(Tag::Begin(kind)),
        "I" => Some(Tag::Inside(kind)),
        _ => None,
    }
}

/// Whether an `I-<kind>` may follow `prev` (None = sentence start).
pub fn continues(prev: Option<&str>, kind: &str) -> bool {
    match prev.and_then(parse_tag) {
        Some(Tag::Begin(k)) | Some(Tag::Inside(k)) => k == kind,
        _ => false,
    }
}

/// Whether the transition `from -> to` is structurally valid.
pub fn valid_transition(from: &str, to: &str) -> bool {
    match parse_tag(to) {
        Some(Tag::Inside(kind)) => continues(Some(from), kind),
        Some(_) => true,
        None => false,
    }
}

/// Whether `tag` may start a sentence.
pub fn valid_start(tag: &str) -> bool {
    !matches!(parse_tag(tag), Some(Tag::Inside(_)) | None)
}

/// Rewrites orphan `I-X` tags to `B-X`. Returns the number of repairs.
pub fn repair(tags: &mut [String]) -> usize {
    let mut repaired = 0;
    for i in 0..tags.len() {
        let fix = match parse_tag(&tags[i]) {
            Some(Tag::Inside(kind)) => {
                let prev = if i == 0 { None } else { Some(tags[i - 1].as_str()) };
                (!continues(prev, kind)).then(|| format!("B-{kind}"))
            }
            _ => None,
        };
        if let Some(fixed) = fix {
            tags[i] = fixed;
            repaired += 1;
        }
    }
    repaired
}

/// A labeled mention span; `end` is inclusive.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub kind: String,
}

impl Span {
    pub fn new(start: usize, end: usize, kind: impl Into<String>) -> Self {
        Span {
            start,
            end,
            kind: kind.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, position: usize) -> bool {
        (self.start..=self.end).contains(&position)
    }

    /// Number of shared token positions.
    pub fn overlap(&self, other: &Span) -> usize {
        let lo = self.start.max(other.start);
        let hi = self.end.min(other.end);
        if lo > hi {
            0
        } else {
            hi - lo + 1
        }
    }

    pub fn same_extent(&self, other: &Span) -> bool {
        self.start == other.start && self.end == other.end
    }
}

/// Decodes spans from a BIO sequence. An orphan `I-X` opens a new span,
/// as in the CoNLL evaluation script.
pub fn spans<S: AsRef<str>>(tags: &[S]) -> Vec<Span> {
    let mut out = Vec::new();
    let mut open: Option<(usize, &str)> = None;
    for (i, tag) in tags.iter().enumerate() {
        match parse_tag(tag.as_ref()) {
            Some(Tag::Begin(kind)) => {
                if let Some((s, k)) = open.take() {
                    out.push(Span::new(s, i - 1, k));
                }
                open = Some((i, kind));
            }
            Some(Tag::Inside(kind)) => match open {
                Some((_, k)) if k == kind => {}
                _ => {
                    if let Some((s, k)) = open.take() {
                        out.push(Span::new(s, i - 1, k));
                    }
                    open = Some((i, kind));
                }
            },
            _ => {
                if let Some((s, k)) = open.take() {
                    out.push(Span::new(s, i - 1, k));
                }
            }
        }
    }
    if let Some((s, k)) = open {
        out.push(Span::new(s, tags.len() - 1, k));
    }
    out
}

/// Encodes non-overlapping spans as BIO tags over `n` positions.
pub fn encode(n: usize, spans: &[Span]) -> Vec<String> {
    let mut tags = vec!["O".to_string(); n];
    for span in spans {
        tags[span.start] = format!("B-{}", span.kind);
        for tag in &mut tags[span.start + 1..=span.end] {
            *tag = format!("I-{}", span.kind);
        }
    }
    tags
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_transitions() {
        assert_eq!(parse_tag("O"), Some(Tag::Outside));
        assert_eq!(parse_tag("B-PER"), Some(Tag::Begin("PER")));
        assert_eq!(parse_tag("X-PER"), None);
        assert_eq!(parse_tag("B-"), None);
        assert!(valid_transition("B-PER", "I-PER"));
        assert!(!valid_transition("O", "I-PER"));
        assert!(!valid_transition("I-LOC", "I-PER"));
        assert!(valid_start("B-LOC"));
        assert!(!valid_start("I-LOC"));
    }

    #[test]
    fn repair_orphans() {
        let mut tags: Vec<String> = ["I-PER", "I-PER", "O", "I-LOC", "B-ORG", "I-LOC"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert_eq!(repair(&mut tags), 3);
        assert_eq!(tags, ["B-PER", "I-PER", "O", "B-LOC", "B-ORG", "B-LOC"]);
    }

    #[test]
    fn span_decoding() {
        let tags = ["B-PER", "I-PER", "O", "I-LOC", "B-ORG", "B-ORG"];
        assert_eq!(
            spans(&tags),
            vec![
                Span::new(0, 1, "PER"),
                Span::new(3, 3, "LOC"),
                Span::new(4, 4, "ORG"),
                Span::new(5, 5, "ORG"),
            ]
        );
        assert_eq!(encode(6, &spans(&tags))[3], "B-LOC");
    }
}
