//! Plain and masked multi-head self-attention and the convex fusion of the
//! two branches.
//!
//! Heads are column slices of single `d_h x d_h` projections. Scores are
//! divided by `sqrt(d_h)` (the full width, whatever the head count) and no
//! output projection follows the concatenation of head outputs.

use crate::error::{Error, Result};
use crate::numerics::{softmax_rows, Matrix};

/// Query, key and value projections of one attention branch.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadProjections {
    pub wq: Matrix,
    pub wk: Matrix,
    pub wv: Matrix,
}

impl HeadProjections {
    pub fn new(wq: Matrix, wk: Matrix, wv: Matrix) -> Result<Self> {
        let d = wq.rows();
        for m in [&wq, &wk, &wv] {
            if m.shape() != (d, d) {
                return Err(Error::shape("attention projection", (d, d), m.shape()));
            }
            m.ensure_finite()?;
        }
        Ok(HeadProjections { wq, wk, wv })
    }

    pub fn d_h(&self) -> usize {
        self.wq.rows()
    }
}

/// Projections of the plain branch and the masked branch.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionWeights {
    pub plain: HeadProjections,
    pub masked: HeadProjections,
}

impl AttentionWeights {
    pub fn new(plain: HeadProjections, masked: HeadProjections) -> Result<Self> {
        if plain.d_h() != masked.d_h() {
            return Err(Error::shape(
                "attention branches",
                (plain.d_h(), plain.d_h()),
                (masked.d_h(), masked.d_h()),
            ));
        }
        Ok(AttentionWeights { plain, masked })
    }

    pub fn d_h(&self) -> usize {
        self.plain.d_h()
    }
}

/// Key positions left visible to every query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskSpec {
    n: usize,
    omega: Vec<usize>,
}

impl MaskSpec {
    /// `omega` is sorted and deduplicated; it must be non-empty and lie in `0..n`.
    pub fn new(n: usize, mut omega: Vec<usize>) -> Result<Self> {
        omega.sort_unstable();
        omega.dedup();
        if omega.is_empty() {
            return Err(Error::Mask("omega is empty".into()));
        }
        if let Some(&bad) = omega.iter().find(|&&j| j >= n) {
            return Err(Error::Mask(format!("index {bad} outside 0..{n}")));
        }
        Ok(MaskSpec { n, omega })
    }

    /// Nothing masked.
    pub fn full(n: usize) -> Result<Self> {
        Self::new(n, (0..n).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn omega(&self) -> &[usize] {
        &self.omega
    }

    pub fn visible(&self) -> Vec<bool> {
        let mut v = vec![false; self.n];
        for &j in &self.omega {
            v[j] = true;
        }
        v
    }
}

fn check_inputs(h: &Matrix, w: &Matrix, heads: usize, mask: Option<&MaskSpec>) -> Result<()> {
    if h.cols() != w.rows() {
        return Err(Error::shape("attend", h.shape(), w.shape()));
    }
    if heads == 0 || !h.cols().is_multiple_of(heads) {
        return Err(Error::Config(format!(
            "hidden width {} is not divisible by {heads} heads",
            h.cols()
        )));
    }
    if let Some(m) = mask {
        if m.n() != h.rows() {
            return Err(Error::Length {
                op: "mask vs sequence",
                left: m.n(),
                right: h.rows(),
            });
        }
    }
    Ok(())
}

fn head_probabilities(
    q: &Matrix,
    k: &Matrix,
    scale: f64,
    visible: Option<&[bool]>,
) -> Result<Matrix> {
    let mut scores = q.matmul(&k.transpose())?;
    for i in 0..scores.rows() {
        for (j, s) in scores.row_mut(i).iter_mut().enumerate() {
            *s = match visible {
                Some(vis) if !vis[j] => f64::NEG_INFINITY,
                _ => *s / scale,
            };
        }
    }
    softmax_rows(&scores)
}

/// Post-softmax attention weights, one `n x n` matrix per head.
pub fn attention_weights(
    h: &Matrix,
    wq: &Matrix,
    wk: &Matrix,
    heads: usize,
    mask: Option<&MaskSpec>,
) -> Result<Vec<Matrix>> {
    check_inputs(h, wq, heads, mask)?;
    let q = h.matmul(wq)?;
    let k = h.matmul(wk)?;
    let width = h.cols() / heads;
    let scale = (h.cols() as f64).sqrt();
    let visible = mask.map(MaskSpec::visible);
    (0..heads)
        .map(|i| {
            head_probabilities(
                &q.column_block(i * width, width)?,
                &k.column_block(i * width, width)?,
                scale,
                visible.as_deref(),
            )
        })
        .collect()
}

/// Weights of the masked branch: columns outside `mask` are exactly zero.
pub fn masked_attention_weights(
    h: &Matrix,
    wq: &Matrix,
    wk: &Matrix,
    heads: usize,
    mask: &MaskSpec,
) -> Result<Vec<Matrix>> {
    attention_weights(h, wq, wk, heads, Some(mask))
}

/// Multi-head self-attention of `h` with itself; head outputs are
/// concatenated in head order.
pub fn attend(
    h: &Matrix,
    w: &HeadProjections,
    heads: usize,
    mask: Option<&MaskSpec>,
) -> Result<Matrix> {
    let probs = attention_weights(h, &w.wq, &w.wk, heads, mask)?;
    let v = h.matmul(&w.wv)?;
    let width = h.cols() / heads;
    let outputs = probs
        .iter()
        .enumerate()
        .map(|(i, p)| p.matmul(&v.column_block(i * width, width)?))
        .collect::<Result<Vec<_>>>()?;
    Matrix::hconcat(&outputs)
}

/// `mu * h1 + (1 - mu) * h2`.
pub fn fuse_heads_output(h1: &Matrix, h2: &Matrix, mu: f64) -> Result<Matrix> {
    if h1.shape() != h2.shape() {
        return Err(Error::shape("fuse_heads_output", h1.shape(), h2.shape()));
    }
    if !(0.0..=1.0).contains(&mu) {
        return Err(Error::Config(format!("mu = {mu} is outside [0, 1]")));
    }
    let data = h1
        .data()
        .iter()
        .zip(h2.data())
        .map(|(a, b)| mu * a + (1.0 - mu) * b)
        .collect();
    Matrix::new(h1.rows(), h1.cols(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{init_matrix, Rng};

    fn random_projections(rng: &mut Rng, d: usize) -> HeadProjections {
        HeadProjections::new(
            init_matrix(rng, d, d),
            init_matrix(rng, d, d),
            init_matrix(rng, d, d),
        )
        .unwrap()
    }

    #[test]
    fn single_position_returns_value_projection() {
        let mut rng = Rng::new(11);
        let h = init_matrix(&mut rng, 1, 4);
        let w = random_projections(&mut rng, 4);
        let out = attend(&h, &w, 1, None).unwrap();
        assert_eq!(out, h.matmul(&w.wv).unwrap());
    }

    #[test]
    fn vacuous_mask_is_bit_identical() {
        let mut rng = Rng::new(12);
        let h = init_matrix(&mut rng, 5, 6);
        let w = random_projections(&mut rng, 6);
        for heads in [1, 2, 3] {
            let plain = attend(&h, &w, heads, None).unwrap();
            let masked = attend(&h, &w, heads, Some(&MaskSpec::full(5).unwrap())).unwrap();
            assert_eq!(plain, masked);
        }
    }

    #[test]
    fn single_visible_column_takes_all_weight() {
        let mut rng = Rng::new(13);
        let h = init_matrix(&mut rng, 4, 4);
        let w = random_projections(&mut rng, 4);
        let mask = MaskSpec::new(4, vec![0]).unwrap();
        for p in masked_attention_weights(&h, &w.wq, &w.wk, 2, &mask).unwrap() {
            for i in 0..4 {
                assert_eq!(p.row(i), &[1.0, 0.0, 0.0, 0.0]);
            }
        }
    }

    #[test]
    fn full_mask_weights_are_positive() {
        let mut rng = Rng::new(14);
        let h = init_matrix(&mut rng, 3, 4);
        let w = random_projections(&mut rng, 4);
        let mask = MaskSpec::full(3).unwrap();
        for p in masked_attention_weights(&h, &w.wq, &w.wk, 1, &mask).unwrap() {
            assert!(p.data().iter().all(|&x| x > 0.0));
        }
    }

    #[test]
    fn mask_validation() {
        assert!(MaskSpec::new(3, vec![]).is_err());
        assert!(MaskSpec::new(3, vec![3]).is_err());
        assert_eq!(MaskSpec::new(3, vec![2, 0, 2]).unwrap().omega(), &[0, 2]);
    }

    #[test]
    fn shape_errors() {
        let mut rng = Rng::new(15);
        let w = random_projections(&mut rng, 4);
        assert!(attend(&Matrix::zeros(2, 3), &w, 1, None).is_err());
        assert!(attend(&Matrix::zeros(2, 4), &w, 3, None).is_err());
        let mask = MaskSpec::full(3).unwrap();
        assert!(attend(&Matrix::zeros(2, 4), &w, 1, Some(&mask)).is_err());
        assert!(HeadProjections::new(
            Matrix::zeros(2, 2),
            Matrix::zeros(2, 3),
            Matrix::zeros(2, 2)
        )
        .is_err());
    }

    #[test]
    fn fusion_endpoints() {
        let mut rng = Rng::new(16);
        let h1 = init_matrix(&mut rng, 3, 4);
        let h2 = init_matrix(&mut rng, 3, 4);
        assert_eq!(fuse_heads_output(&h1, &h2, 1.0).unwrap(), h1);
        assert_eq!(fuse_heads_output(&h1, &h2, 0.0).unwrap(), h2);
        let neg = Matrix::new(3, 4, h1.data().iter().map(|x| -x).collect()).unwrap();
        let zero = fuse_heads_output(&h1, &neg, 0.5).unwrap();
        assert!(zero.data().iter().all(|&x| x == 0.0));
        assert!(fuse_heads_output(&h1, &Matrix::zeros(2, 4), 0.5).is_err());
        assert!(fuse_heads_output(&h1, &h2, 1.5).is_err());
    }
}
