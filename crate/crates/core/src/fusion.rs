//! Character–word fusion: similarity scoring, weighted injection of the
//! projected word vector, key-character selection and intra-word mixing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lexicon::{project, EmbeddingTable, ProjectionWeights};
use crate::numerics::{cosine, Matrix};
use crate::segvote::{CharSequence, Segmentation, WordSpan};

/// Hyper-parameters of the layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionConfig {
    /// Retention ratio of the key character.
    pub lambda: f64,
    /// Weight of the plain attention branch in the final mix.
    pub mu: f64,
    /// Word embedding width; inferred from the embedding table when unset.
    pub d_w: Option<usize>,
    /// Hidden width; inferred from the hidden states when unset.
    pub d_h: Option<usize>,
    pub heads: usize,
    pub seed: u64,
    /// Below this magnitude the score sum falls back to uniform weights.
    pub eps_denom: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            lambda: 0.9,
            mu: 0.5,
            d_w: None,
            d_h: None,
            heads: 1,
            seed: 42,
            eps_denom: 1e-6,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, x) in [("lambda", self.lambda), ("mu", self.mu)] {
            if !(0.0..=1.0).contains(&x) {
                return Err(Error::Config(format!("{name} = {x} is outside [0, 1]")));
            }
        }
        if self.heads == 0 {
            return Err(Error::Config("heads must be at least 1".into()));
        }
        if let Some(d_h) = self.d_h {
            if d_h == 0 || d_h % self.heads != 0 {
                return Err(Error::Config(format!(
                    "d_h = {d_h} is not a positive multiple of heads = {}",
                    self.heads
                )));
            }
        }
        if self.d_w == Some(0) {
            return Err(Error::Config("d_w must be at least 1".into()));
        }
        if !(self.eps_denom.is_finite() && self.eps_denom >= 0.0) {
            return Err(Error::Config(format!(
                "eps_denom = {} must be finite and non-negative",
                self.eps_denom
            )));
        }
        Ok(())
    }
}

/// Per-word quantities computed during fusion.
#[derive(Debug, Clone, PartialEq)]
pub struct WordAnalysis {
    pub span: WordSpan,
    /// Projected word vector.
    pub v: Vec<f64>,
    /// Cosine score of each character in the span, in order.
    pub scores: Vec<f64>,
    /// Absolute row index of the key character.
    pub key: usize,
}

impl WordAnalysis {
    pub fn new(h: &Matrix, span: WordSpan, v: Vec<f64>) -> Result<Self> {
        let scores = score_word(h, span, &v)?;
        let key = span.start + select_key(&scores);
        Ok(WordAnalysis {
            span,
            v,
            scores,
            key,
        })
    }
}

fn check_span(h: &Matrix, span: WordSpan) -> Result<()> {
    if span.end >= h.rows() || span.start > span.end {
        return Err(Error::shape("span", h.shape(), (span.start, span.end)));
    }
    Ok(())
}

/// Cosine similarity of each row `k` in `span` with `v`.
pub fn score_word(h: &Matrix, span: WordSpan, v: &[f64]) -> Result<Vec<f64>> {
    check_span(h, span)?;
    if v.len() != h.cols() {
        return Err(Error::shape("score_word", h.shape(), (1, v.len())));
    }
    span.indices().map(|k| cosine(h.row(k), v)).collect()
}

/// Index of the first maximum.
pub fn select_key(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate().skip(1) {
        if *s > scores[best] {
            best = i;
        }
    }
    best
}

/// Normalized injection weights `score_k / sum(score)`, or uniform weights
/// when `|sum| < eps_denom`.
pub fn injection_weights(scores: &[f64], eps_denom: f64) -> Vec<f64> {
    let denom: f64 = scores.iter().sum();
    if denom.abs() < eps_denom {
        vec![1.0 / scores.len() as f64; scores.len()]
    } else {
        scores.iter().map(|s| s / denom).collect()
    }
}

fn inject_in_place(h: &mut Matrix, wa: &WordAnalysis, eps_denom: f64) {
    let weights = injection_weights(&wa.scores, eps_denom);
    for (k, w) in wa.span.indices().zip(weights) {
        for (x, v) in h.row_mut(k).iter_mut().zip(&wa.v) {
            *x += w * v;
        }
    }
}

/// Adds each character's weighted share of the word vector. Rows outside
/// the span are untouched.
pub fn inject_word(h: &Matrix, wa: &WordAnalysis, eps_denom: f64) -> Result<Matrix> {
    check_span(h, wa.span)?;
    if wa.v.len() != h.cols() || wa.scores.len() != wa.span.len() {
        return Err(Error::shape(
            "inject_word",
            h.shape(),
            (wa.scores.len(), wa.v.len()),
        ));
    }
    let mut out = h.clone();
    inject_in_place(&mut out, wa, eps_denom);
    Ok(out)
}

/// `(f, g)` with `f = exp(lambda - 1)` and `g = (1 - f) / (len - 1)`.
/// Only meaningful for words of two or more characters.
pub fn mixing_coefficients(lambda: f64, len: usize) -> (f64, f64) {
    let f = (lambda - 1.0).exp();
    let g = (1.0 - f) / (len - 1) as f64;
    (f, g)
}

fn mix_in_place(h: &mut Matrix, span: WordSpan, key: usize, lambda: f64) {
    if span.len() == 1 {
        return;
    }
    let (f, g) = mixing_coefficients(lambda, span.len());
    let key_row = h.row(key).to_vec();
    let mut others_sum = vec![0.0; h.cols()];
    for k in span.indices().filter(|&k| k != key) {
        for (acc, x) in others_sum.iter_mut().zip(h.row(k)) {
            *acc += x;
        }
    }
    for k in span.indices().filter(|&k| k != key) {
        for (x, p) in h.row_mut(k).iter_mut().zip(&key_row) {
            *x = g * p + (1.0 - g) * *x;
        }
    }
    for ((x, p), s) in h.row_mut(key).iter_mut().zip(&key_row).zip(&others_sum) {
        *x = f * p + g * s;
    }
}

/// Exchanges information between the key character and the rest of its
/// word. Single-character spans are returned unchanged.
pub fn mix_word(h_w: &Matrix, span: WordSpan, key: usize, lambda: f64) -> Result<Matrix> {
    check_span(h_w, span)?;
    if !span.contains(key) {
        return Err(Error::Config(format!(
            "key {key} outside span {}..={}",
            span.start, span.end
        )));
    }
    let mut out = h_w.clone();
    mix_in_place(&mut out, span, key, lambda);
    Ok(out)
}

/// Result of running injection and mixing over a whole sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedSequence {
    /// Mixed hidden states, one row per character.
    pub mixed: Matrix,
    /// Key-character index of every word, ascending.
    pub omega: Vec<usize>,
    /// Per-word analyses in processing order.
    pub words: Vec<WordAnalysis>,
}

/// Runs lookup, projection, scoring, injection, key selection and mixing
/// for every word of `seg`, left to right.
pub fn fuse_sequence(
    h: &Matrix,
    sentence: &CharSequence,
    seg: &Segmentation,
    table: &EmbeddingTable,
    weights: &ProjectionWeights,
    cfg: &FusionConfig,
) -> Result<FusedSequence> {
    if seg.char_len() != sentence.len() {
        return Err(Error::Length {
            op: "segmentation vs sentence",
            left: seg.char_len(),
            right: sentence.len(),
        });
    }
    fuse_spans(h, sentence, seg.spans(), table, weights, cfg)
}

/// Like [`fuse_sequence`] but accepts disjoint spans in any order.
pub fn fuse_spans(
    h: &Matrix,
    sentence: &CharSequence,
    spans: &[WordSpan],
    table: &EmbeddingTable,
    weights: &ProjectionWeights,
    cfg: &FusionConfig,
) -> Result<FusedSequence> {
    cfg.validate()?;
    if h.rows() != sentence.len() {
        return Err(Error::Length {
            op: "hidden rows vs sentence",
            left: h.rows(),
            right: sentence.len(),
        });
    }
    if h.cols() != weights.d_h() || cfg.d_h.is_some_and(|d| d != h.cols()) {
        return Err(Error::Config(format!(
            "hidden width {} does not match projection width {}{}",
            h.cols(),
            weights.d_h(),
            cfg.d_h
                .map_or(String::new(), |d| format!(" / configured d_h {d}"))
        )));
    }
    if table.dim() != weights.d_w() || cfg.d_w.is_some_and(|d| d != table.dim()) {
        return Err(Error::Config(format!(
            "embedding width {} does not match projection input {}{}",
            table.dim(),
            weights.d_w(),
            cfg.d_w
                .map_or(String::new(), |d| format!(" / configured d_w {d}"))
        )));
    }
    h.ensure_finite()?;

    let mut claimed = vec![false; h.rows()];
    let mut out = h.clone();
    let mut words = Vec::with_capacity(spans.len());
    for &span in spans {
        check_span(h, span)?;
        for k in span.indices() {
            if std::mem::replace(&mut claimed[k], true) {
                return Err(Error::Coverage { index: k });
            }
        }
        let x = table.lookup(&sentence.slice(span));
        let v = project(x, weights)?;
        let wa = WordAnalysis::new(h, span, v)?;
        inject_in_place(&mut out, &wa, cfg.eps_denom);
        mix_in_place(&mut out, span, wa.key, cfg.lambda);
        words.push(wa);
    }
    let mut omega: Vec<usize> = words.iter().map(|w| w.key).collect();
    omega.sort_unstable();
    Ok(FusedSequence {
        mixed: out,
        omega,
        words,
    })
}
