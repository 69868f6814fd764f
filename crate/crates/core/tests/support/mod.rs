//! Independent reference implementations for tests. Nothing here calls into
//! the algorithm under test beyond plain data accessors.
#![allow(dead_code)]

use std::collections::HashMap;
use std::path::PathBuf;

use hrmf_core::Matrix;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data")
}

/// Small deterministic generator, unrelated to the crate's own PRNG.
pub struct Lcg(pub u64);

impl Lcg {
    pub fn next(&mut self) -> f64 {
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next()
    }

    pub fn int(&mut self, lo: usize, hi: usize) -> usize {
        lo + (self.next() * (hi - lo + 1) as f64) as usize
    }

    pub fn vec(&mut self, len: usize, scale: f64) -> Vec<f64> {
        (0..len).map(|_| self.uniform(-scale, scale)).collect()
    }

    pub fn matrix(&mut self, rows: usize, cols: usize, scale: f64) -> Matrix {
        Matrix::new(rows, cols, self.vec(rows * cols, scale)).unwrap()
    }
}

pub fn to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|r| m.row(r).to_vec()).collect()
}

pub fn naive_matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let m = b.first().map_or(0, Vec::len);
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..n {
        for j in 0..m {
            let mut acc = 0.0;
            for k in 0..b.len() {
                acc += a[i][k] * b[k][j];
            }
            out[i][j] = acc;
        }
    }
    out
}

pub fn naive_cosine(u: &[f64], v: &[f64]) -> f64 {
    let mut uv = 0.0;
    let mut uu = 0.0;
    let mut vv = 0.0;
    for i in 0..u.len() {
        uv += u[i] * v[i];
        uu += u[i] * u[i];
        vv += v[i] * v[i];
    }
    if uu.sqrt() < 1e-12 || vv.sqrt() < 1e-12 {
        0.0
    } else {
        uv / (uu.sqrt() * vv.sqrt())
    }
}

/// Straight-line `tanh(x W1 + b1) W2 + b2`.
pub fn naive_project(x: &[f64], w1: &Matrix, b1: &[f64], w2: &Matrix, b2: &[f64]) -> Vec<f64> {
    let d_h = w1.cols();
    let mut hidden = vec![0.0; d_h];
    for j in 0..d_h {
        let mut acc = b1[j];
        for (i, xi) in x.iter().enumerate() {
            acc += xi * w1.get(i, j);
        }
        hidden[j] = acc.tanh();
    }
    (0..d_h)
        .map(|j| b2[j] + (0..d_h).map(|i| hidden[i] * w2.get(i, j)).sum::<f64>())
        .collect()
}

/// Single-head attention written element by element; `visible[j] == false`
/// removes key `j`.
pub fn naive_attention(
    h: &[Vec<f64>],
    wq: &[Vec<f64>],
    wk: &[Vec<f64>],
    wv: &[Vec<f64>],
    visible: Option<&[bool]>,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let n = h.len();
    let d = h[0].len();
    let q = naive_matmul(h, wq);
    let k = naive_matmul(h, wk);
    let v = naive_matmul(h, wv);
    let mut probs = vec![vec![0.0; n]; n];
    let mut out = vec![vec![0.0; d]; n];
    for i in 0..n {
        let mut logits = Vec::with_capacity(n);
        for j in 0..n {
            let open = visible.is_none_or(|vis| vis[j]);
            let mut s = 0.0;
            for c in 0..d {
                s += q[i][c] * k[j][c];
            }
            logits.push(open.then_some(s / (d as f64).sqrt()));
        }
        let top = logits
            .iter()
            .flatten()
            .fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let e: Vec<f64> = logits
            .iter()
            .map(|l| l.map_or(0.0, |x| (x - top).exp()))
            .collect();
        let z: f64 = e.iter().sum();
        for j in 0..n {
            probs[i][j] = e[j] / z;
        }
        for c in 0..d {
            out[i][c] = (0..n).map(|j| probs[i][j] * v[j][c]).sum();
        }
    }
    (probs, out)
}

/// All ways to cut `s` into non-empty words.
pub fn all_tokenizations(s: &str) -> Vec<Vec<String>> {
    let chars: Vec<char> = s.chars().collect();
    if chars.is_empty() {
        return vec![vec![]];
    }
    let n = chars.len();
    (0..1u32 << (n - 1))
        .map(|mask| {
            let mut words = Vec::new();
            let mut cur = String::new();
            for (i, c) in chars.iter().enumerate() {
                cur.push(*c);
                if i + 1 == n || mask & (1 << i) != 0 {
                    words.push(std::mem::take(&mut cur));
                }
            }
            words
        })
        .collect()
}

/// Majority/granularity voting over word strings and byte offsets.
pub fn brute_force_vote(sentence: &str, tokenizations: &[Vec<String>]) -> Vec<String> {
    // map byte offset -> word for each tokenizer
    let starts: Vec<HashMap<usize, &str>> = tokenizations
        .iter()
        .map(|words| {
            let mut off = 0;
            words
                .iter()
                .map(|w| {
                    let at = off;
                    off += w.len();
                    (at, w.as_str())
                })
                .collect()
        })
        .collect();
    let mut out = Vec::new();
    let mut off = 0;
    while off < sentence.len() {
        let mut tally: Vec<(&str, usize)> = Vec::new();
        for m in &starts {
            if let Some(w) = m.get(&off) {
                match tally.iter_mut().find(|(x, _)| x == w) {
                    Some(entry) => entry.1 += 1,
                    None => tally.push((w, 1)),
                }
            }
        }
        tally.sort_by(|a, b| {
            b.1.cmp(&a.1)
                .then(b.0.chars().count().cmp(&a.0.chars().count()))
        });
        if tally.len() > 1 {
            let (a, b) = (tally[0], tally[1]);
            assert!(
                !(a.1 == b.1 && a.0.chars().count() == b.0.chars().count()),
                "unresolvable tie at offset {off}"
            );
        }
        let word = match tally.first() {
            Some((w, _)) => w.to_string(),
            None => sentence[off..].chars().next().unwrap().to_string(),
        };
        off += word.len();
        out.push(word);
    }
    out
}

/// Every sentence over `alphabet` of length `1..=max_len`.
pub fn all_sentences(alphabet: &[char], max_len: usize) -> Vec<String> {
    let mut all = Vec::new();
    let mut layer = vec![String::new()];
    for _ in 0..max_len {
        layer = layer
            .iter()
            .flat_map(|s| {
                alphabet.iter().map(move |c| {
                    let mut t = s.clone();
                    t.push(*c);
                    t
                })
            })
            .collect();
        all.extend(layer.iter().cloned());
    }
    all
}
