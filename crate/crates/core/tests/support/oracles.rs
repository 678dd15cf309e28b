//! Slow, direct reference implementations used to check the library.
//! Shared with the CLI acceptance suite.

#![allow(dead_code)]

use std::collections::HashMap;

use xcal_core::rng::{KeyedRng, Rng64};

/// Fleiss' kappa by counting agreeing rater pairs item by item.
pub fn fleiss_kappa(rows: &[Vec<u32>]) -> f64 {
    let mut agreeing_share = 0.0;
    let mut labels_seen: HashMap<usize, u64> = HashMap::new();
    let mut total_labels = 0u64;
    for row in rows {
        let labels: Vec<usize> = row
            .iter()
            .enumerate()
            .flat_map(|(cat, &c)| std::iter::repeat_n(cat, c as usize))
            .collect();
        let mut agree = 0u64;
        let mut pairs = 0u64;
        for a in 0..labels.len() {
            for b in (a + 1)..labels.len() {
                pairs += 1;
                if labels[a] == labels[b] {
                    agree += 1;
                }
            }
        }
        agreeing_share += agree as f64 / pairs as f64;
        for l in labels {
            *labels_seen.entry(l).or_default() += 1;
            total_labels += 1;
        }
    }
    let p_bar = agreeing_share / rows.len() as f64;
    let pe: f64 = labels_seen
        .values()
        .map(|&c| (c as f64 / total_labels as f64).powi(2))
        .sum();
    if (1.0 - pe).abs() < 1e-15 {
        return 1.0;
    }
    (p_bar - pe) / (1.0 - pe)
}

/// Edit distance by memoized recursion over suffixes.
pub fn levenshtein(a: &str, b: &str) -> usize {
    fn go(a: &[char], b: &[char], memo: &mut HashMap<(usize, usize), usize>) -> usize {
        if a.is_empty() {
            return b.len();
        }
        if b.is_empty() {
            return a.len();
        }
        if let Some(&v) = memo.get(&(a.len(), b.len())) {
            return v;
        }
        let v = if a[0] == b[0] {
            go(&a[1..], &b[1..], memo)
        } else {
            1 + go(&a[1..], b, memo)
                .min(go(a, &b[1..], memo))
                .min(go(&a[1..], &b[1..], memo))
        };
        memo.insert((a.len(), b.len()), v);
        v
    }
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    go(&a, &b, &mut HashMap::new())
}

fn substrings(s: &[char], n: usize) -> Vec<String> {
    if s.len() < n {
        return Vec::new();
    }
    (0..=s.len() - n)
        .map(|i| s[i..i + n].iter().collect())
        .collect()
}

/// Multiset intersection size by removing matched elements one at a time.
fn clipped_matches(cand: &[String], reference: &[String]) -> usize {
    let mut pool: Vec<&String> = reference.iter().collect();
    let mut matched = 0;
    for g in cand {
        if let Some(pos) = pool.iter().position(|r| *r == g) {
            pool.swap_remove(pos);
            matched += 1;
        }
    }
    matched
}

/// chrF: whitespace removed, mean F_beta over orders where both sides have
/// n-grams, times 100.
pub fn chrf(candidate: &str, reference: &str, order: usize, beta: f64) -> f64 {
    let c: Vec<char> = candidate.chars().filter(|c| !c.is_whitespace()).collect();
    let r: Vec<char> = reference.chars().filter(|c| !c.is_whitespace()).collect();
    let mut sum = 0.0;
    let mut effective = 0;
    for n in 1..=order {
        let (cg, rg) = (substrings(&c, n), substrings(&r, n));
        if cg.is_empty() || rg.is_empty() {
            continue;
        }
        effective += 1;
        let m = clipped_matches(&cg, &rg) as f64;
        if m == 0.0 {
            continue;
        }
        let p = m / cg.len() as f64;
        let rec = m / rg.len() as f64;
        sum += (1.0 + beta * beta) * p * rec / (beta * beta * p + rec);
    }
    if effective == 0 {
        0.0
    } else {
        100.0 * sum / effective as f64
    }
}

fn word_ngrams(tokens: &[&str], n: usize) -> Vec<String> {
    if tokens.len() < n {
        return Vec::new();
    }
    (0..=tokens.len() - n)
        .map(|i| tokens[i..i + n].join("\u{1}"))
        .collect()
}

/// Corpus BLEU on whitespace tokens, precisions multiplied directly.
pub fn corpus_bleu(cands: &[String], refs: &[String], max_n: usize) -> f64 {
    let mut product = 1.0;
    let (mut c_len, mut r_len) = (0usize, 0usize);
    for n in 1..=max_n {
        let (mut matched, mut total) = (0usize, 0usize);
        for (c, r) in cands.iter().zip(refs) {
            let ct: Vec<&str> = c.split_whitespace().collect();
            let rt: Vec<&str> = r.split_whitespace().collect();
            if n == 1 {
                c_len += ct.len();
                r_len += rt.len();
            }
            let (cg, rg) = (word_ngrams(&ct, n), word_ngrams(&rt, n));
            matched += clipped_matches(&cg, &rg);
            total += cg.len();
        }
        if matched == 0 || total == 0 {
            return 0.0;
        }
        product *= matched as f64 / total as f64;
    }
    let bp = if c_len == 0 {
        0.0
    } else if c_len > r_len {
        1.0
    } else {
        (1.0 - r_len as f64 / c_len as f64).exp()
    };
    bp * product.powf(1.0 / max_n as f64)
}

/// Random rating matrix: 1..=6 items, 2..=4 raters, 1..=5 categories.
pub fn random_matrix(rng: &mut KeyedRng) -> Vec<Vec<u32>> {
    let items = 1 + rng.below(6) as usize;
    let raters = 2 + rng.below(3) as u32;
    let categories = 1 + rng.below(5) as usize;
    (0..items)
        .map(|_| {
            let mut row = vec![0u32; categories];
            for _ in 0..raters {
                row[rng.below(categories as u64) as usize] += 1;
            }
            row
        })
        .collect()
}

/// Random toy corpus over a small vocabulary so n-grams collide.
pub fn random_corpus(rng: &mut KeyedRng) -> (Vec<String>, Vec<String>) {
    const VOCAB: [&str; 8] = ["the", "cat", "sat", "on", "a", "mat", "dog", "ran"];
    let sentence = |rng: &mut KeyedRng| -> String {
        let len = 4 + rng.below(8) as usize;
        (0..len)
            .map(|_| VOCAB[rng.below(VOCAB.len() as u64) as usize])
            .collect::<Vec<_>>()
            .join(" ")
    };
    let n = 1 + rng.below(5) as usize;
    let cands = (0..n).map(|_| sentence(rng)).collect();
    let refs = (0..n).map(|_| sentence(rng)).collect();
    (cands, refs)
}

/// Random vector of `n` values in `[lo, hi)`.
pub fn random_vec(rng: &mut KeyedRng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| lo + (hi - lo) * rng.unit_f64()).collect()
}

/// Coefficient of determination of the least-squares line of `y` on `x`,
/// computed from residuals: `1 - SS_res / SS_tot`.
pub fn ols_r2(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let ss_tot: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    1.0 - ss_res / ss_tot
}
