//! Property tests for edit distance, NED and the filter cascade.

use glyphforge::evalkit::{levenshtein, mean_ned, ned, sentence_acc};
use glyphforge::glyphdata::{filter_sample, BBox, FilterConfig, Orientation, SampleMeta, TextLine};
use proptest::prelude::*;

fn word() -> impl Strategy<Value = String> {
    "[ABC]{0,6}"
}

/// Independent recursive edit distance, memoized.
fn oracle(a: &[u8], b: &[u8], memo: &mut std::collections::HashMap<(usize, usize), usize>) -> usize {
    if a.is_empty() || b.is_empty() {
        return a.len().max(b.len());
    }
    if let Some(&d) = memo.get(&(a.len(), b.len())) {
        return d;
    }
    let sub = oracle(&a[1..], &b[1..], memo) + (a[0] != b[0]) as usize;
    let d = sub.min(oracle(&a[1..], b, memo) + 1).min(oracle(a, &b[1..], memo) + 1);
    memo.insert((a.len(), b.len()), d);
    d
}

fn meta() -> impl Strategy<Value = SampleMeta> {
    (
        100usize..2000,
        100usize..2000,
        prop::collection::vec((1usize..400, 1usize..400, 0.0f64..1.0), 1..12),
    )
        .prop_map(|(width, height, lines)| SampleMeta {
            width,
            height,
            lines: lines
                .into_iter()
                .map(|(w, h, score)| {
                    let bbox = BBox::new(0, 0, w, h);
                    TextLine {
                        content: "A".into(),
                        bbox,
                        orientation: Orientation::from_bbox(&bbox),
                        recognition_score: score,
                    }
                })
                .collect(),
        })
}

proptest! {
    #[test]
    fn distance_matches_oracle(a in word(), b in word()) {
        let d = oracle(a.as_bytes(), b.as_bytes(), &mut Default::default());
        prop_assert_eq!(levenshtein(&a, &b), d);
    }

    #[test]
    fn ned_symmetric_and_bounded(a in word(), b in word()) {
        let (x, y) = (ned(&a, &b), ned(&b, &a));
        prop_assert_eq!(x, y);
        prop_assert!((0.0..=1.0).contains(&x));
        prop_assert_eq!(x == 1.0, a == b);
    }

    #[test]
    fn triangle_inequality(a in word(), b in word(), c in word()) {
        prop_assert!(levenshtein(&a, &c) <= levenshtein(&a, &b) + levenshtein(&b, &c));
    }

    #[test]
    fn accuracy_bounds_ned(pairs in prop::collection::vec((word(), word()), 1..10)) {
        let (p, g): (Vec<String>, Vec<String>) = pairs.into_iter().unzip();
        prop_assert!(sentence_acc(&p, &g).unwrap() <= mean_ned(&p, &g).unwrap() + 1e-12);
    }

    #[test]
    fn stricter_filters_reject_more(m in meta(), extra_width in 0usize..500, extra_lines in 0usize..5) {
        let loose = FilterConfig::default();
        let strict = FilterConfig {
            min_width: loose.min_width + extra_width,
            max_lines: loose.max_lines.saturating_sub(extra_lines),
            ..loose.clone()
        };
        if !filter_sample(&m, &loose).accept {
            prop_assert!(!filter_sample(&m, &strict).accept);
        }
    }

    #[test]
    fn rejection_names_a_rule(m in meta()) {
        let d = filter_sample(&m, &FilterConfig::default());
        prop_assert_eq!(d.accept, d.reason.is_none());
    }
}
