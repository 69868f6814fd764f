mod args;
mod config;

use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::Parser;
use hrmf_core::check::{run_checks, CheckOptions};
use hrmf_core::{
    hrmf_forward, load_bundle, read_matrix, write_matrix, EmbeddingTable, Error, Matrix,
    SegmentationRecord, VoteRecord, WeightBundle,
};

use args::{CheckArgs, Cli, Command, FuseArgs, InitArgs, VoteArgs};
use config::RunConfig;

const EXIT_USER: u8 = 1;
const EXIT_INTERNAL: u8 = 2;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USER)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Vote(a) => cmd_vote(&a),
        Command::InitWeights(a) => cmd_init(&a),
        Command::Fuse(a) => cmd_fuse(&a),
        Command::Check(a) => cmd_check(&a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("hrmf: {e:#}");
            ExitCode::from(if is_internal(&e) {
                EXIT_INTERNAL
            } else {
                EXIT_USER
            })
        }
    }
}

/// Failures that valid inputs should never produce.
fn is_internal(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        matches!(
            c.downcast_ref::<Error>(),
            Some(Error::NonFinite { .. } | Error::FullyMaskedRow { .. })
        )
    })
}

fn read_input(path: &Path) -> anyhow::Result<String> {
    let mut text = String::new();
    if path == Path::new("-") {
        io::stdin()
            .read_to_string(&mut text)
            .context("reading stdin")?;
    } else {
        text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    }
    Ok(text)
}

fn write_output(path: Option<&Path>, bytes: &[u8]) -> anyhow::Result<()> {
    match path {
        Some(p) => fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(bytes)?;
            Ok(out.flush()?)
        }
    }
}

fn cmd_vote(a: &VoteArgs) -> anyhow::Result<u8> {
    let text = read_input(&a.input)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let merged = serde_json::from_str::<VoteRecord>(line)
            .map_err(anyhow::Error::from)
            .and_then(|rec| Ok(rec.vote()?))
            .with_context(|| format!("{} line {}", a.input.display(), i + 1))?;
        serde_json::to_writer(&mut out, &merged)?;
        out.push(b'\n');
    }
    write_output(a.output.as_deref(), &out)?;
    Ok(0)
}

fn cmd_init(a: &InitArgs) -> anyhow::Result<u8> {
    if a.heads == 0 {
        bail!("--heads must be at least 1");
    }
    if !a.d_h.is_multiple_of(a.heads) {
        bail!("--d-h {} is not divisible by --heads {}", a.d_h, a.heads);
    }
    let bundle = WeightBundle::init(a.seed, a.d_w, a.d_h)?;
    write_output(Some(&a.output), bundle.to_json()?.as_bytes())?;
    Ok(0)
}

fn load_segmentation(path: &Path) -> anyhow::Result<SegmentationRecord> {
    let reader = BufReader::new(File::open(path)?);
    let mut found = None;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if found.is_some() {
            bail!("line {}: expected exactly one record", i + 1);
        }
        let rec: SegmentationRecord =
            serde_json::from_str(&line).with_context(|| format!("line {}", i + 1))?;
        found = Some(rec);
    }
    found.context("no record")
}

fn cmd_fuse(a: &FuseArgs) -> anyhow::Result<u8> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.apply(a);
    let run = cfg.resolve()?;

    let table = EmbeddingTable::load(&run.embeddings)
        .with_context(|| format!("embeddings {}", run.embeddings.display()))?;
    if table.duplicates() > 0 {
        eprintln!(
            "hrmf: warning: {} duplicate words in {}, last entry kept",
            table.duplicates(),
            run.embeddings.display()
        );
    }
    let bundle =
        load_bundle(&run.weights).with_context(|| format!("weights {}", run.weights.display()))?;
    let h = read_matrix(&run.hidden).with_context(|| format!("hidden {}", run.hidden.display()))?;
    let rec = load_segmentation(&run.segmentation)
        .with_context(|| format!("segmentation {}", run.segmentation.display()))?;
    let (sentence, seg) = rec
        .to_segmentation()
        .with_context(|| format!("segmentation {}", run.segmentation.display()))?;

    let out = hrmf_forward(&h, &sentence, &seg, &table, &bundle, &run.fusion)?;
    let save = |path: &Path, m: &Matrix| -> anyhow::Result<()> { Ok(write_matrix(m, path)?) };
    save(&run.output, &out.output)?;
    if run.debug_intermediates {
        save(&run.sibling("mixed", "txt"), &out.fused.mixed)?;
        let omega = run.sibling("omega", "json");
        fs::write(&omega, serde_json::to_string(&out.fused.omega)? + "\n")
            .with_context(|| format!("writing {}", omega.display()))?;
        save(&run.sibling("h1", "txt"), &out.h1)?;
        save(&run.sibling("h2", "txt"), &out.h2)?;
    }
    Ok(0)
}

fn broken_softmax(m: &Matrix) -> hrmf_core::Result<Matrix> {
    let s = hrmf_core::softmax_rows(m)?;
    let data = s.data().iter().map(|x| x * 1.01).collect();
    Matrix::new(s.rows(), s.cols(), data)
}

fn cmd_check(a: &CheckArgs) -> anyhow::Result<u8> {
    if a.cases == 0 {
        bail!("--cases must be at least 1");
    }
    let opts = CheckOptions {
        cases: a.cases,
        seed: a.seed,
        softmax: if a.corrupt_softmax {
            broken_softmax
        } else {
            hrmf_core::softmax_rows
        },
    };
    let report = run_checks(&opts);
    let mut out = BufWriter::new(io::stdout().lock());
    writeln!(out, "{report}")?;
    out.flush()?;
    Ok(if report.passed() { 0 } else { EXIT_USER })
}
