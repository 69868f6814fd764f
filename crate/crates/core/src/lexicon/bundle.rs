//! JSON bundle holding every trainable tensor of the layer.
//!
//! Each key maps either to an inline `{"rows", "cols", "data"}` object or to
//! the path of a text-format matrix, resolved relative to the bundle file.

use std::fs;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::ProjectionWeights;
use crate::attention::{AttentionWeights, HeadProjections};
use crate::error::{Error, Result};
use crate::numerics::{init_matrix, read_matrix, Matrix, Rng};

/// Bundle keys in serialization order.
pub const TENSOR_NAMES: [&str; 10] = [
    "W1", "b1", "W2", "b2", "Wq1", "Wk1", "Wv1", "Wq2", "Wk2", "Wv2",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TensorSource {
    Inline(Matrix),
    Path(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightBundle {
    pub projection: ProjectionWeights,
    pub attention: AttentionWeights,
}

impl WeightBundle {
    /// Seeded bundle. Matrices are drawn from one generator in the order
    /// W1, W2, Wq1, Wk1, Wv1, Wq2, Wk2, Wv2; biases are zero.
    pub fn init(seed: u64, d_w: usize, d_h: usize) -> Result<Self> {
        if d_w == 0 || d_h == 0 {
            return Err(Error::Config(format!(
                "dimensions must be at least 1 (d_w={d_w}, d_h={d_h})"
            )));
        }
        let mut rng = Rng::new(seed);
        let w1 = init_matrix(&mut rng, d_w, d_h);
        let w2 = init_matrix(&mut rng, d_h, d_h);
        let mut next = || init_matrix(&mut rng, d_h, d_h);
        let plain = HeadProjections::new(next(), next(), next())?;
        let masked = HeadProjections::new(next(), next(), next())?;
        Ok(WeightBundle {
            projection: ProjectionWeights::new(
                w1,
                Matrix::zeros(1, d_h),
                w2,
                Matrix::zeros(1, d_h),
            )?,
            attention: AttentionWeights::new(plain, masked)?,
        })
    }

    pub fn d_w(&self) -> usize {
        self.projection.d_w()
    }

    pub fn d_h(&self) -> usize {
        self.projection.d_h()
    }

    fn tensors(&self) -> [&Matrix; 10] {
        let p = &self.projection;
        let a = &self.attention;
        [
            p.w1(),
            p.b1(),
            p.w2(),
            p.b2(),
            &a.plain.wq,
            &a.plain.wk,
            &a.plain.wv,
            &a.masked.wq,
            &a.masked.wk,
            &a.masked.wv,
        ]
    }

    /// Builds the bundle from resolved tensors, checking every shape.
    pub fn from_tensors(mut named: IndexMap<String, Matrix>) -> Result<Self> {
        let mut take = |name: &str| {
            named
                .shift_remove(name)
                .ok_or_else(|| Error::Bundle(format!("missing tensor {name:?}")))
        };
        let projection =
            ProjectionWeights::new(take("W1")?, take("b1")?, take("W2")?, take("b2")?)?;
        let plain = HeadProjections::new(take("Wq1")?, take("Wk1")?, take("Wv1")?)?;
        let masked = HeadProjections::new(take("Wq2")?, take("Wk2")?, take("Wv2")?)?;
        if let Some(extra) = named.keys().next() {
            return Err(Error::Bundle(format!("unknown tensor {extra:?}")));
        }
        let attention = AttentionWeights::new(plain, masked)?;
        if attention.d_h() != projection.d_h() {
            return Err(Error::Bundle(format!(
                "attention width {} differs from projection width {}",
                attention.d_h(),
                projection.d_h()
            )));
        }
        Ok(WeightBundle {
            projection,
            attention,
        })
    }

    /// Parses bundle JSON; path-valued tensors are resolved against `base`.
    pub fn from_json(text: &str, base: &Path) -> Result<Self> {
        let raw: IndexMap<String, TensorSource> = serde_json::from_str(text)?;
        let named = raw
            .into_iter()
            .map(|(name, src)| {
                let m = match src {
                    TensorSource::Inline(m) => m,
                    TensorSource::Path(p) => read_matrix(base.join(p))?,
                };
                m.ensure_finite()
                    .map_err(|e| Error::Bundle(format!("{name}: {e}")))?;
                Ok((name, m))
            })
            .collect::<Result<IndexMap<_, _>>>()?;
        Self::from_tensors(named)
    }

    /// Compact JSON with every tensor inline, keys in [`TENSOR_NAMES`] order.
    pub fn to_json(&self) -> Result<String> {
        let map: IndexMap<&str, &Matrix> = TENSOR_NAMES.into_iter().zip(self.tensors()).collect();
        let mut s = serde_json::to_string(&map)?;
        s.push('\n');
        Ok(s)
    }
}

pub fn load_bundle(path: impl AsRef<Path>) -> Result<WeightBundle> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))?;
    let base = path.parent().unwrap_or(Path::new("."));
    WeightBundle::from_json(&text, base).map_err(|e| e.in_file(path))
}
