use crate::error::{Error, Result};

/// Character-level edit distance with unit costs.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Similarity form of normalized edit distance; two empty strings score 1.
pub fn ned(a: &str, b: &str) -> f64 {
    let n = a.chars().count().max(b.chars().count());
    if n == 0 {
        return 1.0;
    }
    1.0 - levenshtein(a, b) as f64 / n as f64
}

/// Fraction of lines predicted exactly.
pub fn sentence_acc<S: AsRef<str>, T: AsRef<str>>(pred: &[S], gt: &[T]) -> Result<f64> {
    if pred.len() != gt.len() {
        return Err(Error::Shape {
            axis: "line count",
            expected: gt.len(),
            got: pred.len(),
        });
    }
    if gt.is_empty() {
        return Ok(0.0);
    }
    let hits = pred.iter().zip(gt).filter(|(p, g)| p.as_ref() == g.as_ref()).count();
    Ok(hits as f64 / gt.len() as f64)
}

/// Mean [`ned`] over aligned lines.
pub fn mean_ned<S: AsRef<str>, T: AsRef<str>>(pred: &[S], gt: &[T]) -> Result<f64> {
    if pred.len() != gt.len() {
        return Err(Error::Shape {
            axis: "line count",
            expected: gt.len(),
            got: pred.len(),
        });
    }
    if gt.is_empty() {
        return Ok(0.0);
    }
    Ok(pred.iter().zip(gt).map(|(p, g)| ned(p.as_ref(), g.as_ref())).sum::<f64>() / gt.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Full-table recursion, no row reuse.
    fn dp_oracle(a: &[char], b: &[char]) -> usize {
        let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
        for (i, row) in d.iter_mut().enumerate() {
            row[0] = i;
        }
        for j in 0..=b.len() {
            d[0][j] = j;
        }
        for i in 1..=a.len() {
            for j in 1..=b.len() {
                let c = usize::from(a[i - 1] != b[j - 1]);
                d[i][j] = (d[i - 1][j] + 1).min(d[i][j - 1] + 1).min(d[i - 1][j - 1] + c);
            }
        }
        d[a.len()][b.len()]
    }

    fn all_strings(max_len: usize) -> Vec<String> {
        let mut out = vec![String::new()];
        let mut frontier = vec![String::new()];
        for _ in 0..max_len {
            frontier = frontier
                .iter()
                .flat_map(|s| ['A', 'B', 'C'].map(|c| format!("{s}{c}")))
                .collect();
            out.extend(frontier.iter().cloned());
        }
        out
    }

    #[test]
    fn spot_values() {
        assert_eq!(ned("ABC", "ABC"), 1.0);
        assert!((ned("ABC", "ABD") - (1.0 - 1.0 / 3.0)).abs() < 1e-15);
        assert_eq!(ned("A", ""), 0.0);
        assert_eq!(ned("", ""), 1.0);
    }

    #[test]
    fn exhaustive_against_dp() {
        let all = all_strings(3);
        assert_eq!(all.len(), 40);
        for a in &all {
            for b in &all {
                let ac: Vec<char> = a.chars().collect();
                let bc: Vec<char> = b.chars().collect();
                assert_eq!(levenshtein(a, b), dp_oracle(&ac, &bc), "{a:?} {b:?}");
                assert_eq!(ned(a, b), ned(b, a));
                for c in &all {
                    assert!(levenshtein(a, c) <= levenshtein(a, b) + levenshtein(b, c));
                }
            }
        }
    }

    #[test]
    fn acc_definition() {
        assert_eq!(sentence_acc(&["AB", "C"], &["AB", "C"]).unwrap(), 1.0);
        assert_eq!(sentence_acc(&["AB", "C", "D", "EX"], &["AB", "C", "D", "EF"]).unwrap(), 0.75);
        assert!(sentence_acc(&["A"], &["A", "B"]).is_err());
    }

    #[test]
    fn acc_matches_recount() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let gt: Vec<String> = (0..100).map(|i| format!("L{i}")).collect();
        let pred: Vec<String> = gt
            .iter()
            .map(|g| if rng.random_bool(0.3) { format!("{g}x") } else { g.clone() })
            .collect();
        let mut hits = 0;
        for i in 0..100 {
            if pred[i] == gt[i] {
                hits += 1;
            }
        }
        assert_eq!(sentence_acc(&pred, &gt).unwrap(), hits as f64 / 100.0);
    }
}
