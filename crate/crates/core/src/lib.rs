//! Enriching per-character hidden states with word-level semantics.
//!
//! The pipeline takes the hidden states an encoder produced for each
//! character of a sentence, plus a word segmentation, and
//!
//! 1. merges several tokenizers' segmentations by vote ([`segvote`]),
//! 2. projects each word's embedding into the hidden space and adds it to the
//!    word's characters in proportion to their cosine similarity ([`lexicon`],
//!    [`fusion`]),
//! 3. mixes each word's characters around its key character ([`fusion`]),
//! 4. runs plain and key-character-masked self-attention and blends the two
//!    ([`attention`], [`pipeline`]).
//!
//! ```
//! use hrmf_core::{hrmf_forward, vote, CharSequence, EmbeddingTable, FusionConfig, Matrix, WeightBundle};
//!
//! let sentence = CharSequence::new("重庆人和中学");
//! let tokenizations = vec![
//!     vec!["重庆".to_string(), "人和".into(), "中学".into()],
//!     vec!["重庆".to_string(), "人和中学".into()],
//!     vec!["重庆人".to_string(), "和".into(), "中学".into()],
//! ];
//! let seg = vote(&sentence, &tokenizations).unwrap();
//! assert_eq!(seg.words(&sentence), ["重庆", "人和中学"]);
//!
//! let bundle = WeightBundle::init(42, 4, 8).unwrap();
//! let table = EmbeddingTable::from_entries(4, [("重庆", vec![0.1, 0.2, 0.3, 0.4])]).unwrap();
//! let h = Matrix::zeros(6, 8);
//! let out = hrmf_forward(&h, &sentence, &seg, &table, &bundle, &FusionConfig::default()).unwrap();
//! assert_eq!(out.output.shape(), (6, 8));
//! assert_eq!(out.fused.omega.len(), 2);
//! ```

pub mod attention;
pub mod check;
mod error;
pub mod fusion;
pub mod lexicon;
pub mod numerics;
pub mod pipeline;
pub mod segvote;

pub use attention::{
    attend, attention_weights, fuse_heads_output, masked_attention_weights, AttentionWeights,
    HeadProjections, MaskSpec,
};
pub use error::{Error, Result};
pub use fusion::{
    fuse_sequence, inject_word, mix_word, score_word, select_key, FusedSequence, FusionConfig,
    WordAnalysis,
};
pub use lexicon::{load_bundle, project, EmbeddingTable, ProjectionWeights, WeightBundle};
pub use numerics::{
    cosine, init_matrix, matmul, read_matrix, softmax_rows, write_matrix, Matrix, Rng,
};
pub use pipeline::{hrmf_forward, ForwardOutput};
pub use segvote::{
    agreement_stats, validate_tokenization, vote, CharSequence, Segmentation, SegmentationRecord,
    Tokenization, VoteRecord, WordSpan,
};
