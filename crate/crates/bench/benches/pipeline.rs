use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use hrmf_core::{
    attend, hrmf_forward, init_matrix, softmax_rows, vote, CharSequence, EmbeddingTable,
    FusionConfig, HeadProjections, MaskSpec, Rng, Segmentation, WeightBundle, WordSpan,
};

fn bench_softmax(c: &mut Criterion) {
    let mut g = c.benchmark_group("softmax_rows");
    for n in [16, 64, 256] {
        let m = init_matrix(&mut Rng::new(1), n, n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &m, |b, m| {
            b.iter(|| softmax_rows(black_box(m)).unwrap())
        });
    }
    g.finish();
}

fn bench_attend(c: &mut Criterion) {
    let mut g = c.benchmark_group("attend");
    let d = 64;
    let mut rng = Rng::new(2);
    let w = HeadProjections::new(
        init_matrix(&mut rng, d, d),
        init_matrix(&mut rng, d, d),
        init_matrix(&mut rng, d, d),
    )
    .unwrap();
    for n in [16, 64, 128] {
        let h = init_matrix(&mut rng, n, d);
        let mask = MaskSpec::new(n, (0..n).step_by(3).collect()).unwrap();
        g.bench_with_input(BenchmarkId::new("plain", n), &h, |b, h| {
            b.iter(|| attend(black_box(h), &w, 4, None).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("masked", n), &h, |b, h| {
            b.iter(|| attend(black_box(h), &w, 4, Some(&mask)).unwrap())
        });
    }
    g.finish();
}

fn chunked(s: &str, sizes: &[usize]) -> Vec<String> {
    let chars: Vec<char> = s.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < chars.len() {
        let len = sizes[j % sizes.len()].min(chars.len() - i);
        out.push(chars[i..i + len].iter().collect());
        i += len;
        j += 1;
    }
    out
}

fn bench_vote(c: &mut Criterion) {
    let sentence: String = "重庆人和中学的学生在操场上踢足球".repeat(8);
    let cs = CharSequence::new(&sentence);
    let toks = vec![
        chunked(&sentence, &[2, 4]),
        chunked(&sentence, &[2, 2, 2]),
        chunked(&sentence, &[3, 1, 2]),
    ];
    c.bench_function("vote_128_chars", |b| {
        b.iter(|| vote(black_box(&cs), black_box(&toks)).unwrap())
    });
}

fn bench_forward(c: &mut Criterion) {
    let n = 64;
    let (d_w, d_h) = (32, 64);
    let sentence = CharSequence::new(
        &"重庆人和中学".repeat(n / 6 + 1)[..]
            .chars()
            .take(n)
            .collect::<String>(),
    );
    let spans: Vec<WordSpan> = (0..n)
        .step_by(2)
        .map(|s| WordSpan::new(s, (s + 1).min(n - 1)))
        .collect();
    let seg = Segmentation::from_spans(spans, n).unwrap();
    let mut rng = Rng::new(3);
    let words = seg.words(&sentence);
    let table = EmbeddingTable::from_entries(
        d_w,
        words
            .into_iter()
            .map(|w| (w, init_matrix(&mut rng, 1, d_w).into_data())),
    )
    .unwrap();
    let bundle = WeightBundle::init(42, d_w, d_h).unwrap();
    let h = init_matrix(&mut rng, n, d_h);
    let cfg = FusionConfig {
        heads: 4,
        ..FusionConfig::default()
    };
    c.bench_function("hrmf_forward_64x64", |b| {
        b.iter(|| hrmf_forward(black_box(&h), &sentence, &seg, &table, &bundle, &cfg).unwrap())
    });
}

criterion_group!(
    benches,
    bench_softmax,
    bench_attend,
    bench_vote,
    bench_forward
);
criterion_main!(benches);
