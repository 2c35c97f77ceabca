//! Brute-force reference implementations and random instance generators
//! shared by the integration tests and the acceptance harness. Written
//! without reference to the library code paths they check.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Binary nominal alpha by explicit enumeration of ordered value pairs.
/// `None` when fewer than two values are pairable.
pub fn alpha_oracle(rows: &[Vec<Option<bool>>]) -> Option<f64> {
    let mut observed_dis = 0.0;
    let mut pairable: Vec<bool> = Vec::new();
    for row in rows {
        let vals: Vec<bool> = row.iter().filter_map(|v| *v).collect();
        if vals.len() < 2 {
            continue;
        }
        let w = 1.0 / (vals.len() - 1) as f64;
        for i in 0..vals.len() {
            for j in 0..vals.len() {
                if i != j && vals[i] != vals[j] {
                    observed_dis += w;
                }
            }
        }
        pairable.extend(vals);
    }
    let n = pairable.len();
    if n < 2 {
        return None;
    }
    let d_o = observed_dis / n as f64;
    let mut expected_dis = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j && pairable[i] != pairable[j] {
                expected_dis += 1.0;
            }
        }
    }
    let d_e = expected_dis / (n * (n - 1)) as f64;
    if d_e == 0.0 {
        return Some(1.0);
    }
    Some(1.0 - d_o / d_e)
}

/// (mean, min, max) raw agreement over annotator pairs sharing a unit.
pub fn pairwise_oracle(rows: &[Vec<Option<bool>>]) -> Option<(f64, f64, f64)> {
    let k = rows.first().map_or(0, Vec::len);
    let mut rates = Vec::new();
    for a in 0..k {
        for b in 0..k {
            if a >= b {
                continue;
            }
            let both: Vec<(bool, bool)> =
                rows.iter().filter_map(|r| Some((r[a]?, r[b]?))).collect();
            if !both.is_empty() {
                rates.push(both.iter().filter(|(x, y)| x == y).count() as f64 / both.len() as f64);
            }
        }
    }
    if rates.is_empty() {
        return None;
    }
    let mean = rates.iter().sum::<f64>() / rates.len() as f64;
    let min = rates.iter().cloned().fold(f64::MAX, f64::min);
    let max = rates.iter().cloned().fold(f64::MIN, f64::max);
    Some((mean, min, max))
}

fn tokens(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    for raw in s.split(|c: char| c.is_whitespace()) {
        let chars: Vec<char> = raw.chars().collect();
        let start = chars.iter().position(|c| c.is_alphanumeric());
        let end = chars.iter().rposition(|c| c.is_alphanumeric());
        if let (Some(s), Some(e)) = (start, end) {
            out.push(chars[s..=e].iter().collect::<String>().to_lowercase());
        }
    }
    out
}

fn is_subsequence(needle: &[&String], hay: &[String]) -> bool {
    let mut it = hay.iter();
    needle.iter().all(|n| it.any(|h| h == *n))
}

/// ROUGE-L F1 with the LCS found by enumerating every subsequence of the
/// shorter side.
pub fn rouge_l_oracle(a: &str, b: &str) -> f64 {
    let (ta, tb) = (tokens(a), tokens(b));
    if ta.is_empty() || tb.is_empty() {
        return 0.0;
    }
    let (short, long) = if ta.len() <= tb.len() {
        (&ta, &tb)
    } else {
        (&tb, &ta)
    };
    assert!(short.len() <= 16, "oracle is exponential");
    let mut lcs = 0;
    for mask in 0u32..(1 << short.len()) {
        let pick: Vec<&String> = (0..short.len())
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| &short[i])
            .collect();
        if pick.len() > lcs && is_subsequence(&pick, long) {
            lcs = pick.len();
        }
    }
    if lcs == 0 {
        return 0.0;
    }
    let p = lcs as f64 / tb.len() as f64;
    let r = lcs as f64 / ta.len() as f64;
    1.0 / (0.5 / p + 0.5 / r)
}

/// Harmonic mean by the reciprocal form.
pub fn f1_oracle(p: f64, r: f64) -> f64 {
    if p == 0.0 || r == 0.0 {
        0.0
    } else {
        2.0 / (1.0 / p + 1.0 / r)
    }
}

/// Macro precision and recall over a dense `articles × frames` table.
pub fn macro_pr_oracle(pred: &[[bool; 5]], gold: &[[bool; 5]]) -> (f64, f64) {
    let mut ps = 0.0;
    let mut rs = 0.0;
    for f in 0..5 {
        let predicted = pred.iter().filter(|p| p[f]).count();
        let actual = gold.iter().filter(|g| g[f]).count();
        let hits = pred.iter().zip(gold).filter(|(p, g)| p[f] && g[f]).count();
        ps += if predicted == 0 {
            0.0
        } else {
            hits as f64 / predicted as f64
        };
        rs += if actual == 0 {
            0.0
        } else {
            hits as f64 / actual as f64
        };
    }
    (ps / 5.0, rs / 5.0)
}

pub fn exact_match_oracle(pred: &[[bool; 5]], gold: &[[bool; 5]]) -> f64 {
    pred.iter().zip(gold).filter(|(p, g)| p == g).count() as f64 / pred.len() as f64
}

pub fn random_matrix(rng: &mut ChaCha8Rng) -> Vec<Vec<Option<bool>>> {
    let annotators = rng.random_range(2..=5);
    let units = rng.random_range(1..=20);
    let missing = rng.random_range(0.0..0.4);
    let bias = rng.random_range(0.1..0.9);
    (0..units)
        .map(|_| {
            (0..annotators)
                .map(|_| (!rng.random_bool(missing)).then(|| rng.random_bool(bias)))
                .collect()
        })
        .collect()
}

const WORDS: &[&str] = &[
    "the",
    "EPA",
    "city",
    "Council",
    "of",
    "new",
    "york",
    "climate",
    "activists",
    "oil",
];

pub fn random_entity(rng: &mut ChaCha8Rng) -> String {
    let n = rng.random_range(0..=6);
    (0..n)
        .map(|_| {
            let w = WORDS[rng.random_range(0..WORDS.len())];
            match rng.random_range(0..4) {
                0 => format!("{w},"),
                1 => w.to_uppercase(),
                2 => format!("\"{w}\""),
                _ => w.to_string(),
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn random_label_table(rng: &mut ChaCha8Rng, n: usize) -> Vec<[bool; 5]> {
    (0..n)
        .map(|_| {
            let mut row = [false; 5];
            row.iter_mut().for_each(|v| *v = rng.random_bool(0.4));
            row
        })
        .collect()
}
