//! Word embedding lookup and the two-layer projection into the character
//! hidden space.

mod bundle;

pub use bundle::{load_bundle, TensorSource, WeightBundle, TENSOR_NAMES};

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use indexmap::IndexMap;
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Token whose vector stands in for out-of-vocabulary words.
pub const UNK: &str = "<unk>";

fn normalize(word: &str) -> String {
    word.nfc().collect()
}

/// Frozen word vectors keyed by NFC-normalized word.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    entries: IndexMap<String, Vec<f64>>,
    unk: Vec<f64>,
    duplicates: usize,
}

impl EmbeddingTable {
    /// Builds a table from `(word, vector)` pairs; later duplicates win.
    pub fn from_entries<I, S>(dim: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: AsRef<str>,
    {
        let mut table = EmbeddingTable {
            dim,
            entries: IndexMap::new(),
            unk: vec![0.0; dim],
            duplicates: 0,
        };
        for (word, v) in entries {
            if v.len() != dim {
                return Err(Error::Length {
                    op: "embedding",
                    left: dim,
                    right: v.len(),
                });
            }
            table.insert(normalize(word.as_ref()), v);
        }
        Ok(table)
    }

    fn insert(&mut self, word: String, v: Vec<f64>) {
        if word == UNK {
            self.unk.clone_from(&v);
        }
        if self.entries.insert(word, v).is_some() {
            self.duplicates += 1;
        }
    }

    /// Reads the word2vec text format: a `V d_w` header, then `V` lines of
    /// `word f1 ... f_dw`.
    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines.next().transpose()?.ok_or_else(|| Error::Parse {
            line: 1,
            msg: "missing header".into(),
        })?;
        let dims: Vec<&str> = header.split_ascii_whitespace().collect();
        let (count, dim) = match dims.as_slice() {
            [v, d] => match (v.parse::<usize>(), d.parse::<usize>()) {
                (Ok(v), Ok(d)) => (v, d),
                _ => {
                    return Err(Error::Parse {
                        line: 1,
                        msg: format!("malformed header {header:?}"),
                    })
                }
            },
            _ => {
                return Err(Error::Parse {
                    line: 1,
                    msg: format!("malformed header {header:?}, expected \"V d_w\""),
                })
            }
        };

        let mut table = EmbeddingTable::from_entries::<_, &str>(dim, [])?;
        let mut read = 0;
        for (i, line) in lines.enumerate() {
            let line_no = i + 2;
            let line = line?;
            let mut toks = line.split_ascii_whitespace();
            let Some(word) = toks.next() else {
                continue;
            };
            if read == count {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("more than the {count} entries declared"),
                });
            }
            let v = toks
                .map(|t| match t.parse::<f64>() {
                    Ok(x) if x.is_finite() => Ok(x),
                    _ => Err(Error::Parse {
                        line: line_no,
                        msg: format!("bad vector component {t:?}"),
                    }),
                })
                .collect::<Result<Vec<_>>>()?;
            if v.len() != dim {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("vector has {} components, expected {dim}", v.len()),
                });
            }
            table.insert(normalize(word), v);
            read += 1;
        }
        if read != count {
            return Err(Error::Parse {
                line: read + 2,
                msg: format!("expected {count} entries, found {read}"),
            });
        }
        Ok(table)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::from(e).in_file(path))?;
        Self::from_reader(BufReader::new(file)).map_err(|e| e.in_file(path))
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {}", self.entries.len(), self.dim)?;
        for (word, v) in &self.entries {
            write!(w, "{word}")?;
            for x in v {
                write!(w, " {x:?}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Stored vector for `word`, or the fallback vector.
    pub fn lookup(&self, word: &str) -> &[f64] {
        self.get(word).unwrap_or(&self.unk)
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.entries.get(&normalize(word)).map(Vec::as_slice)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.get(word).is_some()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `<unk>` vector if one was registered, zeros otherwise.
    pub fn unk(&self) -> &[f64] {
        &self.unk
    }

    /// How many entries were overwritten by a later line with the same word.
    pub fn duplicates(&self) -> usize {
        self.duplicates
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.entries.iter().map(|(w, v)| (w.as_str(), v.as_slice()))
    }
}

/// Parameters of `tanh(x W1 + b1) W2 + b2`. Biases are `1 x d_h` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionWeights {
    w1: Matrix,
    b1: Matrix,
    w2: Matrix,
    b2: Matrix,
}

impl ProjectionWeights {
    pub fn new(w1: Matrix, b1: Matrix, w2: Matrix, b2: Matrix) -> Result<Self> {
        let d_h = w1.cols();
        for (name, m, want) in [
            ("b1", &b1, (1, d_h)),
            ("W2", &w2, (d_h, d_h)),
            ("b2", &b2, (1, d_h)),
        ] {
            if m.shape() != want {
                return Err(Error::Bundle(format!(
                    "{name} is {}x{}, expected {}x{}",
                    m.rows(),
                    m.cols(),
                    want.0,
                    want.1
                )));
            }
        }
        for m in [&w1, &b1, &w2, &b2] {
            m.ensure_finite()?;
        }
        Ok(ProjectionWeights { w1, b1, w2, b2 })
    }

    pub fn d_w(&self) -> usize {
        self.w1.rows()
    }

    pub fn d_h(&self) -> usize {
        self.w1.cols()
    }

    pub fn w1(&self) -> &Matrix {
        &self.w1
    }

    pub fn b1(&self) -> &Matrix {
        &self.b1
    }

    pub fn w2(&self) -> &Matrix {
        &self.w2
    }

    pub fn b2(&self) -> &Matrix {
        &self.b2
    }
}

/// Maps a word vector into the hidden space: `tanh(x W1 + b1) W2 + b2`.
pub fn project(x: &[f64], w: &ProjectionWeights) -> Result<Vec<f64>> {
    if x.len() != w.d_w() {
        return Err(Error::shape("project", (1, x.len()), w.w1.shape()));
    }
    let mut hidden = Matrix::row_vector(x).matmul(&w.w1)?;
    for (h, b) in hidden.row_mut(0).iter_mut().zip(w.b1.data()) {
        *h = (*h + b).tanh();
    }
    let mut out = hidden.matmul(&w.w2)?.into_data();
    for (o, b) in out.iter_mut().zip(w.b2.data()) {
        *o += b;
    }
    Ok(out)
}
