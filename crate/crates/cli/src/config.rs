use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use hrmf_core::FusionConfig;
use serde::{Deserialize, Serialize};

use crate::args::FuseArgs;

/// Serializable description of one `fuse` run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub embeddings: Option<PathBuf>,
    pub weights: Option<PathBuf>,
    pub hidden: Option<PathBuf>,
    pub segmentation: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub debug_intermediates: bool,
    #[serde(flatten)]
    pub fusion: FusionConfig,
}

/// Paths checked for existence, ready to run.
#[derive(Debug, Clone)]
pub struct ResolvedRun {
    pub embeddings: PathBuf,
    pub weights: PathBuf,
    pub hidden: PathBuf,
    pub segmentation: PathBuf,
    pub output: PathBuf,
    pub debug_intermediates: bool,
    pub fusion: FusionConfig,
}

impl RunConfig {
    /// Reads a config file; relative paths inside it are taken relative to the file.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text =
            fs::read_to_string(path).with_context(|| format!("config {}", path.display()))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).with_context(|| format!("config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.embeddings,
            &mut cfg.weights,
            &mut cfg.hidden,
            &mut cfg.segmentation,
            &mut cfg.output,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn apply(&mut self, args: &FuseArgs) {
        let paths = [
            (&mut self.embeddings, &args.embeddings),
            (&mut self.weights, &args.weights),
            (&mut self.hidden, &args.hidden),
            (&mut self.segmentation, &args.segmentation),
            (&mut self.output, &args.output),
        ];
        for (slot, flag) in paths {
            if let Some(p) = flag {
                *slot = Some(p.clone());
            }
        }
        if let Some(x) = args.lambda {
            self.fusion.lambda = x;
        }
        if let Some(x) = args.mu {
            self.fusion.mu = x;
        }
        if let Some(x) = args.heads {
            self.fusion.heads = x;
        }
        if let Some(x) = args.seed {
            self.fusion.seed = x;
        }
        self.debug_intermediates |= args.debug_intermediates;
    }

    pub fn resolve(self) -> anyhow::Result<ResolvedRun> {
        self.fusion.validate()?;
        let input = |name: &str, p: Option<PathBuf>| -> anyhow::Result<PathBuf> {
            let Some(p) = p else {
                bail!("missing --{name}");
            };
            if !p.is_file() {
                bail!("{name} file {} does not exist", p.display());
            }
            Ok(p)
        };
        let run = ResolvedRun {
            embeddings: input("embeddings", self.embeddings)?,
            weights: input("weights", self.weights)?,
            hidden: input("hidden", self.hidden)?,
            segmentation: input("segmentation", self.segmentation)?,
            output: self.output.context("missing --output")?,
            debug_intermediates: self.debug_intermediates,
            fusion: self.fusion,
        };
        for p in run.outputs() {
            for i in [
                &run.embeddings,
                &run.weights,
                &run.hidden,
                &run.segmentation,
            ] {
                if same_file(&p, i) {
                    bail!(
                        "output {} would overwrite input {}",
                        p.display(),
                        i.display()
                    );
                }
            }
        }
        Ok(run)
    }
}

fn same_file(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(a), Ok(b)) => a == b,
        _ => a == b,
    }
}

impl ResolvedRun {
    /// `out.txt` -> `out.<tag>.<ext>` next to it.
    pub fn sibling(&self, tag: &str, ext: &str) -> PathBuf {
        let stem = self
            .output
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "output".into());
        self.output.with_file_name(format!("{stem}.{tag}.{ext}"))
    }

    pub fn outputs(&self) -> Vec<PathBuf> {
        let mut v = vec![self.output.clone()];
        if self.debug_intermediates {
            v.extend([
                self.sibling("mixed", "txt"),
                self.sibling("omega", "json"),
                self.sibling("h1", "txt"),
                self.sibling("h2", "txt"),
            ]);
        }
        v
    }
}
