//! The full forward pass: fusion, both attention branches, and the final mix.

use crate::attention::{attend, fuse_heads_output, MaskSpec};
use crate::error::{Error, Result};
use crate::fusion::{fuse_sequence, FusedSequence, FusionConfig};
use crate::lexicon::{EmbeddingTable, WeightBundle};
use crate::numerics::Matrix;
use crate::segvote::{CharSequence, Segmentation};

/// Every intermediate of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    pub fused: FusedSequence,
    /// Plain attention over the mixed states.
    pub h1: Matrix,
    /// Attention restricted to key characters.
    pub h2: Matrix,
    pub output: Matrix,
}

/// Enriches the character states `h` of `sentence` with word semantics.
pub fn hrmf_forward(
    h: &Matrix,
    sentence: &CharSequence,
    seg: &Segmentation,
    table: &EmbeddingTable,
    bundle: &WeightBundle,
    cfg: &FusionConfig,
) -> Result<ForwardOutput> {
    cfg.validate()?;
    if !h.cols().is_multiple_of(cfg.heads) {
        return Err(Error::Config(format!(
            "hidden width {} is not divisible by {} heads",
            h.cols(),
            cfg.heads
        )));
    }
    let fused = fuse_sequence(h, sentence, seg, table, &bundle.projection, cfg)?;
    let n = h.rows();
    if n == 0 {
        let empty = Matrix::zeros(0, h.cols());
        return Ok(ForwardOutput {
            fused,
            h1: empty.clone(),
            h2: empty.clone(),
            output: empty,
        });
    }
    let mask = MaskSpec::new(n, fused.omega.clone())?;
    let h1 = attend(&fused.mixed, &bundle.attention.plain, cfg.heads, None)?;
    let h2 = attend(
        &fused.mixed,
        &bundle.attention.masked,
        cfg.heads,
        Some(&mask),
    )?;
    let output = fuse_heads_output(&h1, &h2, cfg.mu)?;
    output.ensure_finite()?;
    Ok(ForwardOutput {
        fused,
        h1,
        h2,
        output,
    })
}
