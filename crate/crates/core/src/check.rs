//! Randomized invariant suite run by the `check` subcommand.
//!
//! Every property is exercised on freshly generated instances from a fixed
//! seed, so a report is reproducible run to run.

use std::fmt::{self, Write as _};

use crate::attention::{
    attend, attention_weights, fuse_heads_output, masked_attention_weights, HeadProjections,
    MaskSpec,
};
use crate::fusion::{
    fuse_spans, inject_word, mix_word, score_word, select_key, FusionConfig, WordAnalysis,
};
use crate::lexicon::{project, EmbeddingTable, ProjectionWeights, WeightBundle};
use crate::numerics::{cosine, init_matrix, matmul, softmax_rows, Matrix, Rng};
use crate::pipeline::hrmf_forward;
use crate::segvote::{vote, CharSequence, Segmentation, Tokenization, WordSpan};

type SoftmaxFn = fn(&Matrix) -> crate::Result<Matrix>;
type CaseResult = Result<(), String>;

#[derive(Debug, Clone)]
pub struct CheckOptions {
    /// Cases per property (some properties run more).
    pub cases: usize,
    pub seed: u64,
    /// Softmax under test; swapped out by negative-control tests.
    pub softmax: SoftmaxFn,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            cases: 100,
            seed: 0x5EED,
            softmax: softmax_rows,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyOutcome {
    pub module: &'static str,
    pub name: &'static str,
    pub cases: usize,
    pub failures: usize,
    pub first_failure: Option<String>,
}

impl PropertyOutcome {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub outcomes: Vec<PropertyOutcome>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.outcomes.iter().all(PropertyOutcome::passed)
    }

    pub fn failed(&self) -> impl Iterator<Item = &PropertyOutcome> {
        self.outcomes.iter().filter(|o| !o.passed())
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self
            .outcomes
            .iter()
            .map(|o| o.name.len())
            .max()
            .unwrap_or(8);
        writeln!(
            f,
            "{:<10} {:<width$} {:>6} {:>8}  result",
            "module", "property", "cases", "failures"
        )?;
        for o in &self.outcomes {
            let mut line = format!(
                "{:<10} {:<width$} {:>6} {:>8}  {}",
                o.module,
                o.name,
                o.cases,
                o.failures,
                if o.passed() { "pass" } else { "FAIL" }
            );
            if let Some(msg) = &o.first_failure {
                write!(line, "  ({msg})")?;
            }
            writeln!(f, "{line}")?;
        }
        let failed = self.failed().count();
        write!(
            f,
            "{} properties, {} passed, {} failed",
            self.outcomes.len(),
            self.outcomes.len() - failed,
            failed
        )
    }
}

struct Property {
    module: &'static str,
    name: &'static str,
    min_cases: usize,
    run: fn(&mut Rng, &CheckOptions) -> CaseResult,
}

const fn prop(
    module: &'static str,
    name: &'static str,
    run: fn(&mut Rng, &CheckOptions) -> CaseResult,
) -> Property {
    Property {
        module,
        name,
        min_cases: 0,
        run,
    }
}

const PROPERTIES: &[Property] = &[
    prop(
        "numerics",
        "softmax rows are stochastic",
        softmax_stochastic,
    ),
    prop("numerics", "matmul equals naive oracle", matmul_oracle),
    prop("numerics", "cosine is scale invariant", cosine_scale),
    prop(
        "numerics",
        "init_matrix is deterministic and bounded",
        init_deterministic,
    ),
    prop("segvote", "vote yields a partition", vote_partition),
    prop(
        "segvote",
        "vote is unanimous on identical input",
        vote_unanimity,
    ),
    prop("segvote", "vote is deterministic", vote_determinism),
    prop("segvote", "vote keeps a single tokenization", vote_single),
    prop(
        "segvote",
        "majority-then-longest is a total order",
        vote_tie_totality,
    ),
    prop(
        "lexicon",
        "projection is finite and layer-1 bounded",
        project_bounded,
    ),
    prop(
        "lexicon",
        "projection is reproducible",
        project_reproducible,
    ),
    prop(
        "lexicon",
        "embedding write-back is idempotent",
        embeddings_idempotent,
    ),
    prop(
        "fusion",
        "injection adds exactly the word vector",
        injection_sum,
    ),
    prop(
        "fusion",
        "mixing conserves the word sum",
        mixing_conservation,
    ),
    prop(
        "fusion",
        "mixing is translation equivariant",
        mixing_translation,
    ),
    prop("fusion", "scores and key ignore row scale", score_scale),
    prop(
        "fusion",
        "key row converges as lambda -> 1",
        lambda_monotone,
    ),
    prop("fusion", "omega has one key per word", omega_count),
    prop("fusion", "word order does not matter", word_order),
    prop(
        "attention",
        "attention rows are stochastic",
        attention_stochastic,
    ),
    prop("attention", "masked columns are exactly zero", mask_exact),
    prop(
        "attention",
        "vacuous mask equals plain branch",
        vacuous_mask,
    ),
    Property {
        module: "attention",
        name: "single head equals loop oracle",
        min_cases: 200,
        run: attention_oracle,
    },
    prop(
        "attention",
        "output is the mu-mix of both branches",
        fusion_linear,
    ),
    prop(
        "pipeline",
        "forward pass is deterministic",
        forward_deterministic,
    ),
];

/// Runs every property and collects a report.
pub fn run_checks(opts: &CheckOptions) -> CheckReport {
    let outcomes = PROPERTIES
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let cases = opts.cases.max(p.min_cases);
            let mut rng = Rng::new(opts.seed ^ (i as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let mut failures = 0;
            let mut first_failure = None;
            for case in 0..cases {
                if let Err(msg) = (p.run)(&mut rng, opts) {
                    failures += 1;
                    first_failure.get_or_insert_with(|| format!("case {case}: {msg}"));
                }
            }
            PropertyOutcome {
                module: p.module,
                name: p.name,
                cases,
                failures,
                first_failure,
            }
        })
        .collect();
    CheckReport { outcomes }
}

// negated so that NaN fails the check
macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn err(e: crate::Error) -> String {
    e.to_string()
}

fn random_matrix(rng: &mut Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    let data = (0..rows * cols)
        .map(|_| rng.uniform(-scale, scale))
        .collect();
    Matrix::new(rows, cols, data).unwrap()
}

fn random_vec(rng: &mut Rng, len: usize, scale: f64) -> Vec<f64> {
    (0..len).map(|_| rng.uniform(-scale, scale)).collect()
}

fn random_projection(rng: &mut Rng, d_w: usize, d_h: usize) -> ProjectionWeights {
    ProjectionWeights::new(
        random_matrix(rng, d_w, d_h, 1.0),
        random_matrix(rng, 1, d_h, 0.5),
        random_matrix(rng, d_h, d_h, 1.0),
        random_matrix(rng, 1, d_h, 0.5),
    )
    .unwrap()
}

fn random_heads(rng: &mut Rng, d: usize) -> HeadProjections {
    HeadProjections::new(
        random_matrix(rng, d, d, 1.0),
        random_matrix(rng, d, d, 1.0),
        random_matrix(rng, d, d, 1.0),
    )
    .unwrap()
}

/// Width and a head count that divides it.
fn random_width(rng: &mut Rng, max: usize) -> (usize, usize) {
    let d = rng.range_inclusive(1, max);
    let divisors: Vec<usize> = (1..=d).filter(|h| d.is_multiple_of(*h)).collect();
    (d, divisors[rng.below(divisors.len())])
}

fn random_segmentation(rng: &mut Rng, n: usize) -> Segmentation {
    let mut spans = Vec::new();
    let mut start = 0;
    while start < n {
        let len = rng.range_inclusive(1, (n - start).min(5));
        spans.push(WordSpan::new(start, start + len - 1));
        start += len;
    }
    Segmentation::from_spans(spans, n).unwrap()
}

const ALPHABET: &[char] = &['重', '庆', '人', '和', '中', '学', 'a', 'b'];

fn random_sentence(rng: &mut Rng, max: usize) -> CharSequence {
    let n = rng.range_inclusive(1, max);
    let s: String = (0..n)
        .map(|_| ALPHABET[rng.below(ALPHABET.len())])
        .collect();
    CharSequence::new(&s)
}

fn random_tokenization(rng: &mut Rng, s: &CharSequence) -> Tokenization {
    random_segmentation(rng, s.len()).words(s)
}

fn is_partition(seg: &Segmentation, n: usize) -> bool {
    Segmentation::from_spans(seg.spans().to_vec(), n).is_ok()
}

fn softmax_stochastic(rng: &mut Rng, opts: &CheckOptions) -> CaseResult {
    let rows = rng.range_inclusive(1, 8);
    let cols = rng.range_inclusive(1, 12);
    let mut m = random_matrix(rng, rows, cols, 30.0);
    for r in 0..rows {
        let keep = rng.below(cols);
        for c in 0..cols {
            if c != keep && rng.below(3) == 0 {
                m.set(r, c, f64::NEG_INFINITY);
            }
        }
    }
    let s = (opts.softmax)(&m).map_err(err)?;
    for r in 0..rows {
        let sum: f64 = s.row(r).iter().sum();
        ensure!((sum - 1.0).abs() <= 1e-12, "row {r} sums to {sum}");
        for c in 0..cols {
            let x = s.get(r, c);
            ensure!((0.0..=1.0).contains(&x), "entry ({r},{c}) = {x}");
            if m.get(r, c) == f64::NEG_INFINITY {
                ensure!(x == 0.0, "masked entry ({r},{c}) = {x}");
            }
        }
    }
    Ok(())
}

fn matmul_oracle(rng: &mut Rng, _: &CheckOptions) -> CaseResult {
    let (n, k, m) = (
        rng.range_inclusive(1, 6),
        rng.range_inclusive(1, 6),
        rng.range_inclusive(1, 6),
    );
    let a = random_matrix(rng, n, k, 3.0);
    let b = random_matrix(rng, k, m, 3.0);
    let c = matmul(&a, &b).map_err(err)?;
    for i in 0..n {
        for j in 0..m {
            let mut acc = 0.0;
            for t in 0..k {
                acc += a.get(i, t) * b.get(t, j);
            }
            ensure!(
                c.get(i, j).to_bits() == acc.to_bits(),
                "({i},{j}) {} vs {acc}",
                c.get(i, j)
            );
        }
    }
    Ok(())
}

fn cosine_scale(rng: &mut Rng, _: &CheckOptions) -> CaseResult {
    let d = rng.range_inclusive(1, 16);
    let u = random_vec(rng, d, 2.0);
    let v = random_vec(rng, d, 2.0);
    let alpha = 10f64.powf(rng.uniform(-2.0, 2.0));
    let scaled: Vec<f64> = u.iter().map(|x| alpha * x).collect();
    let a = cosine(&u, &v).map_err(err)?;
    let b = cosine(&scaled, &v).map_err(err)?;
    ensure!(
        a.signum() == b.signum() || a == 0.0 && b == 0.0,
        "sign {a} vs {b}"
    );
    ensure!((a - b).abs() <= 1e-12, "{a} vs {b}");
    Ok(())
}

fn init_deterministic(rng: &mut Rng, _: &CheckOptions) -> CaseResult {
    let seed = rng.next_u64();
    let (r, c) = (rng.range_inclusive(1, 8), rng.range_inclusive(1, 8));
    let a = init_matrix(&mut Rng::new(seed), r, c);
    let b = init_matrix(&mut Rng::new(seed), r, c);
    ensure!(a == b, "seed {seed} not reproducible");
    let bound = 1.0 / (c as f64).sqrt();
    ensure!(
        a.data().iter().all(|x| x.abs() <= bound),
        "entry beyond {bound}"
    );
    Ok(())
}

fn vote_partition(rng: &mut Rng, _: &CheckOptions) -> CaseResult {
    let s = random_sentence(rng, 12);
    let k = rng.range_inclusive(1, 5);
    let toks: Vec<_> = (0..k).map(|_| random_tokenization(rng, &s)).collect();
    let seg = vote(&s, &toks).map_err(err)?;
    ensure!(is_partition(&seg, s.len()), "not a partition: {seg:?}");
    Ok(())
}

fn vote_unanimity(rng: &mut Rng, _: &CheckOptions) -> CaseResult {
    let s = random_sentence(rng, 12);
    let t = random_tokenization(rng, &s);
    let k = rng.range_inclusive(1, 5);
    let seg = vote(&s, &vec![t.clone(); k]).map_err(err)?;
    ensure!(seg.words(&s) == t, "{:?} vs {t:?}", seg.words(&s));
    Ok(())
}

fn vote_determinism(rng: &mut Rng, _: &CheckOptions) -> CaseResult {
    let s = random_sentence(rng, 12);
    let toks: Vec<_> = (0..3).map(|_| random_tokenization(rng, &s)).collect();
    ensure!(
        vote(&s, &toks).map_err(err)? == vote(&s, &toks).map_err(err)?,
        "repeated vote differs"
    );
    Ok(())
}

fn vote_single(rng: &mut Rng, _: &CheckOptions) -> CaseResult {
    let s = random_sentence(rng, 12);
    let t = random_tokenization(rng, &s);
    let seg = vote(&s, std::slice::from_ref(&t)).map_err(err)?;
    ensure!(seg.words(&s) == t, "{:?} vs {t:?}", seg.words(&s));
    Ok(())
}

fn vote_tie_totality(rng: &mut Rng, _: &CheckOptions) -> CaseResult {
    let s = random_sentence(rng, 10);
    let segs: Vec<_> = (0..4).map(|_| random_segmentation(rng, s.len())).collect();
    for cursor in 0..s.len() {
        let words: Vec<String> = segs
            .iter()
            .filter_map(|g| g.spans().iter().find(|sp| sp.start == cursor))
            .map(|&sp| s.slice(sp))
            .collect();
        for a in &words {
            for b in &words {
                ensure!(
                    a == b || a.chars().count() != b.chars().count(),
                    "distinct candidates {a} and {b} share start {cursor} and length"
                );
            }
        }
    }
    Ok(())
}

fn project_bounded(rng: &mut Rng, _: &CheckOptions) -> CaseResult {
    let (d_w, d_h) = (rng.range_inclusive(1, 12), rng.range_inclusive(1, 16));
    let w = random_projection(rng, d_w, d_h);
    let x = random_vec(rng, d_w, 1e3);
    let out = project(&x, &w).map_err(err)?;
    ensure!(out.iter().all(|v| v.is_finite()), "non-finite output");
    let pre = Matrix::row_vector(&x).matmul(w.w1()).map_err(err)?;
    for (a, b) in pre.data().iter().zip(w.b1().data()) {
        let act = (a + b).tanh();
        ensure!(act.abs() <= 1.0, "activation {act}");
    }
    Ok(())
}

fn project_reproducible(rng: &mut Rng, _: &CheckOptions) -> CaseResult {
    let (d_w, d_h) = (rng.range_inclusive(1, 12), rng.range_inclusive(1, 16));
    let w = random_projection(rng, d_w, d_h);
    let x = random_vec(rng, d_w, 2.0);
    let a = project(&x, &w).map_err(err)?;
    let b = project(&x, &w.clone()).map_err(err)?;
    ensure!(
        a.iter().zip(&b).all(|(p, q)| p.to_bits() == q.to_bits()),
        "outputs differ"
    );
    Ok(())
}

fn embeddings_idempotent(rng: &mut Rng, _: &CheckOptions) -> CaseResult {
    let dim = rng.range_inclusive(1, 6);
    let count = rng.range_inclusive(0, 10);
    let entries: Vec<(String, Vec<f64>)> = (0..count)
        .map(|_| {
            let word = random_sentence(rng, 4).to_string();
            (word, random_vec(rng, dim, 5.0))
        })
        .collect();
    let table = EmbeddingTable::from_entries(dim, entries).map_err(err)?;
    let mut buf = Vec::new();
    table.write_to(&mut buf).map_err(err)?;
    let once = EmbeddingTable::from_reader(buf.as_slice()).map_err(err)?;
    let mut again = Vec::new();
    once.write_to(&mut again).map_err(err)?;
    ensure!(buf == again, "second write-back differs");
    let sorted = |t: &EmbeddingTable| {
        let mut v: Vec<(String, Vec<f64>)> =
            t.iter().map(|(w, v)| (w.to_string(), v.to_vec())).collect();
        v.sort_by(|a, b| a.0.cmp(&b.0));
        v
    };
    ensure!(sorted(&once) == sorted(&table), "entry set changed");
    Ok(())
}

fn random_word_case(rng: &mut Rng) -> (Matrix, WordSpan, Vec<f64>) {
    let d_h = rng.range_inclusive(1, 32);
    let len = rng.range_inclusive(1, 6);
    let n = len + rng.range_inclusive(0, 4);
    let start = rng.range_inclusive(0, n - len);
    let h = random_matrix(rng, n, d_h, 2.0);
    let v = random_vec(rng, d_h, 2.0);
    (h, WordSpan::new(start, start + len - 1), v)
}

fn injection_sum(rng: &mut Rng, _: &CheckOptions) -> CaseResult {
    let eps = FusionConfig::default().eps_denom;
    let (h, span, v) = random_word_case(rng);
    let wa = WordAnalysis::new(&h, span, v).map_err(err)?;
    let out = inject_word(&h, &wa, eps).map_err(err)?;
    for r in (0..h.rows()).filter(|r| !span.contains(*r)) {
        ensure!(out.row(r) == h.row(r), "row {r} outside the span changed");
    }
    if wa.scores.iter().sum::<f64>().abs() < eps {
        return Ok(());
    }
    for c in 0..h.cols() {
        let delta: f64 = span.indices().map(|k| out.get(k, c) - h.get(k, c)).sum();
        ensure!(
            (delta - wa.v[c]).abs() <= 1e-9,
            "component {c}: {delta} vs {}",
            wa.v[c]
        );
    }
    Ok(())
}

fn mixing_conservation(rng: &mut Rng, _: &CheckOptions) -> CaseResult {
    let (h, span, _) = random_word_case(rng);
    let key = rng.range_inclusive(span.start, span.end);
    let lambda = rng.next_f64();
    let out = mix_word(&h, span, key, lambda).map_err(err)?;
    for c in 0..h.cols() {
        let before: f64 = span.indices().map(|k| h.get(k, c)).sum();
        let after: f64 = span.indices().map(|k| out.get(k, c)).sum();
        ensure!(
            (before - after).abs() <= 1e-9,
            "component {c}: {before} vs {after}"
        );
    }
    Ok(())
}

fn mixing_translation(rng: &mut Rng, _: &CheckOptions) -> CaseResult {
    let (h, span, shift) = random_word_case(rng);
    let key = rng.range_inclusive(span.start, span.end);
    let lambda = rng.next_f64();
    let mut moved = h.clone();
    for k in span.indices() {
        for (x, c) in moved.row_mut(k).iter_mut().zip(&shift) {
            *x += c;
        }
    }
    let a = mix_word(&h, span, key, lambda).map_err(err)?;
    let b = mix_word(&moved, span, key, lambda).map_err(err)?;
    for k in span.indices() {
        for c in 0..h.cols() {
            let d = b.get(k, c) - a.get(k, c) - shift[c];
            ensure!(d.abs() <= 1e-9, "row {k} component {c} off by {d}");
        }
    }
    Ok(())
}

fn score_scale(rng: &mut Rng, _: &CheckOptions) -> CaseResult {
    let (h, span, v) = random_word_case(rng);
    let k = rng.range_inclusive(span.start, span.end);
    let alpha = 10f64.powf(rng.uniform(-2.0, 2.0));
    let mut scaled = h.clone();
    scaled.row_mut(k).iter_mut().for_each(|x| *x *= alpha);
    let a = score_word(&h, span, &v).map_err(err)?;
    let b = score_word(&scaled, span, &v).map_err(err)?;
    for (i, (p, q)) in a.iter().zip(&b).enumerate() {
        ensure!((p - q).abs() <= 1e-12, "score {i}: {p} vs {q}");
    }
    // only meaningful when the maximum is not a near tie
    let mut sorted = a.clone();
    sorted.sort_by(|x, y| y.total_cmp(x));
    if sorted.len() < 2 || sorted[0] - sorted[1] > 1e-9 {
        ensure!(select_key(&a) == select_key(&b), "key moved");
    }
    Ok(())
}

fn lambda_monotone(rng: &mut Rng, _: &CheckOptions) -> CaseResult {
    let (h, span, _) = random_word_case(rng);
    let key = rng.range_inclusive(span.start, span.end);
    let mut prev = f64::INFINITY;
    for step in 0..=20 {
        let lambda = step as f64 / 20.0;
        let out = mix_word(&h, span, key, lambda).map_err(err)?;
        let dist: f64 = out
            .row(key)
            .iter()
            .zip(h.row(key))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        ensure!(
            dist <= prev + 1e-12,
            "distance rose to {dist} at lambda {lambda}"
        );
        prev = dist;
    }
    ensure!(prev == 0.0, "key row moved at lambda 1");
    Ok(())
}

struct Scene {
    sentence: CharSequence,
    seg: Segmentation,
    h: Matrix,
    table: EmbeddingTable,
    bundle: WeightBundle,
    cfg: FusionConfig,
}

fn random_scene(rng: &mut Rng) -> Scene {
    let sentence = random_sentence(rng, 10);
    let seg = random_segmentation(rng, sentence.len());
    let (d_h, heads) = random_width(rng, 12);
    let d_w = rng.range_inclusive(1, 6);
    let mut words = seg.words(&sentence);
    words.truncate(words.len() / 2 + 1);
    let table = EmbeddingTable::from_entries(
        d_w,
        words
            .into_iter()
            .map(|w| (w, random_vec(rng, d_w, 1.0)))
            .collect::<Vec<_>>(),
    )
    .unwrap();
    let bundle = WeightBundle {
        projection: random_projection(rng, d_w, d_h),
        attention: crate::attention::AttentionWeights::new(
            random_heads(rng, d_h),
            random_heads(rng, d_h),
        )
        .unwrap(),
    };
    let cfg = FusionConfig {
        lambda: rng.next_f64(),
        mu: rng.next_f64(),
        heads,
        ..FusionConfig::default()
    };
    Scene {
        h: random_matrix(rng, sentence.len(), d_h, 1.0),
        sentence,
        seg,
        table,
        bundle,
        cfg,
    }
}

fn omega_count(rng: &mut Rng, _: &CheckOptions) -> CaseResult {
    let s = random_scene(rng);
    let fused = fuse_spans(
        &s.h,
        &s.sentence,
        s.seg.spans(),
        &s.table,
        &s.bundle.projection,
        &s.cfg,
    )
    .map_err(err)?;
    ensure!(!fused.omega.is_empty(), "omega empty");
    ensure!(
        fused.omega.len() == s.seg.len(),
        "{} keys for {} words",
        fused.omega.len(),
        s.seg.len()
    );
    for wa in &fused.words {
        ensure!(wa.span.contains(wa.key), "key {} outside its word", wa.key);
    }
    Ok(())
}

fn word_order(rng: &mut Rng, _: &CheckOptions) -> CaseResult {
    let s = random_scene(rng);
    let mut spans = s.seg.spans().to_vec();
    for i in (1..spans.len()).rev() {
        spans.swap(i, rng.below(i + 1));
    }
    let a = fuse_spans(
        &s.h,
        &s.sentence,
        s.seg.spans(),
        &s.table,
        &s.bundle.projection,
        &s.cfg,
    )
    .map_err(err)?;
    let b = fuse_spans(
        &s.h,
        &s.sentence,
        &spans,
        &s.table,
        &s.bundle.projection,
        &s.cfg,
    )
    .map_err(err)?;
    ensure!(a.mixed == b.mixed, "mixed states depend on word order");
    ensure!(a.omega == b.omega, "omega depends on word order");
    Ok(())
}

fn random_attention_case(rng: &mut Rng) -> (Matrix, HeadProjections, usize, MaskSpec) {
    let n = rng.range_inclusive(1, 16);
    let (d, heads) = random_width(rng, 32);
    let h = random_matrix(rng, n, d, 1.5);
    let w = random_heads(rng, d);
    let mut omega: Vec<usize> = (0..n).filter(|_| rng.below(2) == 0).collect();
    if omega.is_empty() {
        omega.push(rng.below(n));
    }
    (h, w, heads, MaskSpec::new(n, omega).unwrap())
}

fn attention_stochastic(rng: &mut Rng, _: &CheckOptions) -> CaseResult {
    let (h, w, heads, mask) = random_attention_case(rng);
    for m in [None, Some(&mask)] {
        for p in attention_weights(&h, &w.wq, &w.wk, heads, m).map_err(err)? {
            for r in 0..p.rows() {
                let sum: f64 = p.row(r).iter().sum();
                ensure!((sum - 1.0).abs() <= 1e-12, "row {r} sums to {sum}");
                ensure!(
                    p.row(r).iter().all(|&x| x >= 0.0),
                    "negative weight in row {r}"
                );
            }
        }
    }
    Ok(())
}

fn mask_exact(rng: &mut Rng, _: &CheckOptions) -> CaseResult {
    let (h, w, heads, mask) = random_attention_case(rng);
    let visible = mask.visible();
    for p in masked_attention_weights(&h, &w.wq, &w.wk, heads, &mask).map_err(err)? {
        for r in 0..p.rows() {
            for (c, &x) in p.row(r).iter().enumerate() {
                ensure!(visible[c] || x == 0.0, "masked weight ({r},{c}) = {x}");
            }
        }
    }
    Ok(())
}

fn vacuous_mask(rng: &mut Rng, _: &CheckOptions) -> CaseResult {
    let (h, w, heads, _) = random_attention_case(rng);
    let full = MaskSpec::full(h.rows()).map_err(err)?;
    let a = attend(&h, &w, heads, None).map_err(err)?;
    let b = attend(&h, &w, heads, Some(&full)).map_err(err)?;
    ensure!(
        a.data()
            .iter()
            .zip(b.data())
            .all(|(x, y)| x.to_bits() == y.to_bits()),
        "vacuous mask changed the output"
    );
    Ok(())
}

/// Loop-by-loop single-head attention, independent of the matrix helpers.
fn naive_attention(h: &Matrix, w: &HeadProjections, visible: Option<&[bool]>) -> Matrix {
    let (n, d) = h.shape();
    let proj = |m: &Matrix| {
        let mut out = vec![vec![0.0; d]; n];
        for i in 0..n {
            for j in 0..d {
                for t in 0..d {
                    out[i][j] += h.get(i, t) * m.get(t, j);
                }
            }
        }
        out
    };
    let (q, k, v) = (proj(&w.wq), proj(&w.wk), proj(&w.wv));
    let mut out = Matrix::zeros(n, d);
    for i in 0..n {
        let mut logits = vec![f64::NEG_INFINITY; n];
        for j in 0..n {
            if visible.is_none_or(|vis| vis[j]) {
                logits[j] = (0..d).map(|t| q[i][t] * k[j][t]).sum::<f64>() / (d as f64).sqrt();
            }
        }
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = logits
            .iter()
            .map(|&l| if l.is_finite() { (l - max).exp() } else { 0.0 })
            .collect();
        let z: f64 = weights.iter().sum();
        for c in 0..d {
            out.set(i, c, (0..n).map(|j| weights[j] / z * v[j][c]).sum());
        }
    }
    out
}

fn attention_oracle(rng: &mut Rng, _: &CheckOptions) -> CaseResult {
    let n = rng.range_inclusive(1, 16);
    let d = rng.range_inclusive(1, 32);
    let h = random_matrix(rng, n, d, 1.5);
    let w = random_heads(rng, d);
    let mut omega: Vec<usize> = (0..n).filter(|_| rng.below(2) == 0).collect();
    if omega.is_empty() {
        omega.push(rng.below(n));
    }
    let mask = MaskSpec::new(n, omega).map_err(err)?;
    let visible = mask.visible();
    for (m, vis) in [(None, None), (Some(&mask), Some(visible.as_slice()))] {
        let got = attend(&h, &w, 1, m).map_err(err)?;
        let want = naive_attention(&h, &w, vis);
        let diff = got.max_abs_diff(&want).unwrap_or(f64::INFINITY);
        ensure!(
            diff <= 1e-12,
            "max deviation {diff:e} (masked: {})",
            m.is_some()
        );
    }
    Ok(())
}

fn fusion_linear(rng: &mut Rng, _: &CheckOptions) -> CaseResult {
    let s = random_scene(rng);
    let out = hrmf_forward(&s.h, &s.sentence, &s.seg, &s.table, &s.bundle, &s.cfg).map_err(err)?;
    let mu = s.cfg.mu;
    for ((o, a), b) in out
        .output
        .data()
        .iter()
        .zip(out.h1.data())
        .zip(out.h2.data())
    {
        let want = mu * a + (1.0 - mu) * b;
        ensure!((o - want).abs() <= 1e-15, "{o} vs {want}");
    }
    let again = fuse_heads_output(&out.h1, &out.h2, mu).map_err(err)?;
    ensure!(
        again == out.output,
        "refusing the branches changed the output"
    );
    Ok(())
}

fn forward_deterministic(rng: &mut Rng, _: &CheckOptions) -> CaseResult {
    let s = random_scene(rng);
    let a = hrmf_forward(&s.h, &s.sentence, &s.seg, &s.table, &s.bundle, &s.cfg).map_err(err)?;
    let b = hrmf_forward(&s.h, &s.sentence, &s.seg, &s.table, &s.bundle, &s.cfg).map_err(err)?;
    ensure!(
        a.output
            .data()
            .iter()
            .zip(b.output.data())
            .all(|(x, y)| x.to_bits() == y.to_bits()),
        "outputs differ between runs"
    );
    Ok(())
}
