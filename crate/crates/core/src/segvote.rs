//! Ensemble word segmentation.
//!
//! Several tokenizers' outputs for one sentence are merged greedily from left
//! to right. At each cursor the candidate words are those that start exactly
//! there; the most frequent candidate wins and frequency ties go to the longer
//! word. Tokenizations in which the cursor falls mid-word stay silent.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A sentence indexed by Unicode scalar value.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CharSequence(Vec<char>);

impl CharSequence {
    pub fn new(s: &str) -> Self {
        CharSequence(s.chars().collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn chars(&self) -> &[char] {
        &self.0
    }

    /// Text of the characters covered by `span`.
    pub fn slice(&self, span: WordSpan) -> String {
        self.0[span.start..=span.end].iter().collect()
    }
}

impl From<&str> for CharSequence {
    fn from(s: &str) -> Self {
        CharSequence::new(s)
    }
}

impl std::fmt::Display for CharSequence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.iter().try_for_each(|c| write!(f, "{c}"))
    }
}

/// One tokenizer's word list for a sentence.
pub type Tokenization = Vec<String>;

/// Inclusive character range `start..=end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WordSpan {
    pub start: usize,
    pub end: usize,
}

impl WordSpan {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        WordSpan { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, k: usize) -> bool {
        self.start <= k && k <= self.end
    }

    pub fn indices(&self) -> std::ops::RangeInclusive<usize> {
        self.start..=self.end
    }
}

/// Contiguous spans covering `0..n` exactly.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Segmentation {
    spans: Vec<WordSpan>,
}

impl Segmentation {
    /// Checks that `spans` partition `0..n`.
    pub fn from_spans(spans: Vec<WordSpan>, n: usize) -> Result<Self> {
        let mut cursor = 0;
        for s in &spans {
            if s.start != cursor || s.end < s.start || s.end >= n {
                return Err(Error::Coverage { index: cursor });
            }
            cursor = s.end + 1;
        }
        if cursor != n {
            return Err(Error::Coverage { index: cursor });
        }
        Ok(Segmentation { spans })
    }

    /// Every character its own word.
    pub fn singletons(n: usize) -> Self {
        Segmentation {
            spans: (0..n).map(|i| WordSpan::new(i, i)).collect(),
        }
    }

    pub fn spans(&self) -> &[WordSpan] {
        &self.spans
    }

    pub fn len(&self) -> usize {
        self.spans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }

    /// Number of characters covered.
    pub fn char_len(&self) -> usize {
        self.spans.last().map_or(0, |s| s.end + 1)
    }

    pub fn words(&self, sentence: &CharSequence) -> Vec<String> {
        self.spans.iter().map(|&s| sentence.slice(s)).collect()
    }

    /// Start index of every word.
    pub fn boundaries(&self) -> BTreeSet<usize> {
        self.spans.iter().map(|s| s.start).collect()
    }
}

/// Converts a word list into spans, failing at the first character where the
/// concatenated words diverge from the sentence.
pub fn validate_tokenization(sentence: &CharSequence, words: &[String]) -> Result<Segmentation> {
    let chars = sentence.chars();
    let mut spans = Vec::with_capacity(words.len());
    let mut cursor = 0;
    for (position, word) in words.iter().enumerate() {
        if word.is_empty() {
            return Err(Error::EmptyWord { position });
        }
        let start = cursor;
        for c in word.chars() {
            if chars.get(cursor) != Some(&c) {
                return Err(Error::Coverage { index: cursor });
            }
            cursor += 1;
        }
        spans.push(WordSpan::new(start, cursor - 1));
    }
    if cursor != chars.len() {
        return Err(Error::Coverage { index: cursor });
    }
    Ok(Segmentation { spans })
}

/// Merges segmentations of one `n`-character sentence by majority, breaking
/// ties toward the longer word.
pub fn vote_segmentations(n: usize, segs: &[Segmentation]) -> Result<Segmentation> {
    if segs.is_empty() {
        return Err(Error::NoTokenizations);
    }
    // word_len_at[t][s] = length of the word tokenization t starts at s
    let word_len_at: Vec<Vec<Option<usize>>> = segs
        .iter()
        .map(|seg| {
            let mut starts = vec![None; n];
            for s in seg.spans() {
                starts[s.start] = Some(s.len());
            }
            starts
        })
        .collect();

    let mut spans = Vec::new();
    let mut cursor = 0;
    while cursor < n {
        // Same start and same length means the same word, so the
        // candidate is identified by its length alone.
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for starts in &word_len_at {
            if let Some(len) = starts[cursor] {
                *counts.entry(len).or_default() += 1;
            }
        }
        let len = counts
            .into_iter()
            .max_by_key(|&(len, count)| (count, len))
            .map_or(1, |(len, _)| len);
        spans.push(WordSpan::new(cursor, cursor + len - 1));
        cursor += len;
    }
    Ok(Segmentation { spans })
}

/// Validates each tokenization against `sentence`, then votes.
pub fn vote(sentence: &CharSequence, tokenizations: &[Tokenization]) -> Result<Segmentation> {
    if tokenizations.is_empty() {
        return Err(Error::NoTokenizations);
    }
    let segs = tokenizations
        .iter()
        .enumerate()
        .map(|(which, t)| {
            validate_tokenization(sentence, t).map_err(|e| Error::InvalidTokenization {
                which,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    vote_segmentations(sentence.len(), &segs)
}

/// Word-start agreement between tokenizations of one sentence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementReport {
    /// Word starts proposed by each tokenization, in input order.
    pub boundaries: Vec<BTreeSet<usize>>,
    /// For each start index, how many tokenizations place a word there.
    pub boundary_counts: BTreeMap<usize, usize>,
    /// Starts shared by every tokenization.
    pub shared: BTreeSet<usize>,
    /// Starts proposed by at least one tokenization.
    pub union: BTreeSet<usize>,
}

impl AgreementReport {
    /// `|shared| / |union|`, or 1 when nothing was proposed.
    pub fn agreement(&self) -> f64 {
        if self.union.is_empty() {
            1.0
        } else {
            self.shared.len() as f64 / self.union.len() as f64
        }
    }
}

/// Boundary agreement diagnostics. Meant for two or more segmentations.
pub fn agreement_stats(segs: &[Segmentation]) -> AgreementReport {
    let boundaries: Vec<BTreeSet<usize>> = segs.iter().map(Segmentation::boundaries).collect();
    let mut boundary_counts = BTreeMap::new();
    for b in &boundaries {
        for &s in b {
            *boundary_counts.entry(s).or_default() += 1;
        }
    }
    let union = boundary_counts.keys().copied().collect();
    let shared = boundary_counts
        .iter()
        .filter(|&(_, &c)| c == segs.len())
        .map(|(&s, _)| s)
        .collect();
    AgreementReport {
        boundaries,
        boundary_counts,
        shared,
        union,
    }
}

/// One input line of the voting corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteRecord {
    pub sentence: String,
    pub tokenizations: Vec<Tokenization>,
}

/// One output line: the merged words and their inclusive spans.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationRecord {
    pub sentence: String,
    pub words: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spans: Option<Vec<[usize; 2]>>,
}

impl SegmentationRecord {
    pub fn new(sentence: &CharSequence, seg: &Segmentation) -> Self {
        SegmentationRecord {
            sentence: sentence.to_string(),
            words: seg.words(sentence),
            spans: Some(seg.spans().iter().map(|s| [s.start, s.end]).collect()),
        }
    }

    /// Recovers the segmentation, checking words and spans (when present)
    /// against the sentence.
    pub fn to_segmentation(&self) -> Result<(CharSequence, Segmentation)> {
        let sentence = CharSequence::new(&self.sentence);
        let seg = validate_tokenization(&sentence, &self.words)?;
        if let Some(spans) = &self.spans {
            let given: Vec<WordSpan> = spans
                .iter()
                .map(|&[s, e]| WordSpan { start: s, end: e })
                .collect();
            if let Some((i, s)) = seg
                .spans()
                .iter()
                .zip(&given)
                .enumerate()
                .find(|(_, (a, b))| a != b)
                .map(|(i, (a, _))| (i, *a))
            {
                return Err(Error::Config(format!(
                    "span {i} disagrees with words (expected [{}, {}])",
                    s.start, s.end
                )));
            }
            if given.len() != seg.len() {
                return Err(Error::Config(format!(
                    "{} spans for {} words",
                    given.len(),
                    seg.len()
                )));
            }
        }
        Ok((sentence, seg))
    }
}

impl VoteRecord {
    pub fn vote(&self) -> Result<SegmentationRecord> {
        let sentence = CharSequence::new(&self.sentence);
        let seg = vote(&sentence, &self.tokenizations)?;
        Ok(SegmentationRecord::new(&sentence, &seg))
    }
}
