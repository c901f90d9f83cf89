use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::RewriteRecord;
use crate::model::tokenizer::{Encoding, Tokenizer};

/// Position correspondence between original and counterfactual tokens.
///
/// `pairs` is strictly increasing in both coordinates; every original index
/// is in exactly one of `pairs` and `unmatched_original`, and likewise for
/// counterfactual indices.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TokenAlignment {
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_original: Vec<usize>,
    pub unmatched_counterfactual: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AlignError {
    #[error("invalid rewrite record: {0}")]
    InvalidRecord(String),
}

/// Tokenized texts of a record plus their alignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignedPair {
    pub original: Encoding,
    pub counterfactual: Encoding,
    pub alignment: TokenAlignment,
}

/// Region index of each token: `2j + 1` for tokens touching span `j`,
/// `2j` for tokens in the gap before span `j` (and `2n` after the last).
fn regions(offsets: &[Range<usize>], spans: &[(usize, usize)]) -> Vec<usize> {
    let mut out = Vec::with_capacity(offsets.len());
    let mut j = 0;
    for r in offsets {
        while j < spans.len() && spans[j].1 <= r.start {
            j += 1;
        }
        let touches = j < spans.len() && r.start < spans[j].1 && r.end > spans[j].0;
        out.push(if touches { 2 * j + 1 } else { 2 * j });
    }
    out
}

/// Aligns token positions of a record's two texts.
///
/// Tokens outside substituted spans pair up in order. Within each span the
/// first `min(len_orig, len_cf)` tokens pair in order; the rest are unmatched.
pub fn align_tokens(record: &RewriteRecord, tokenizer: &Tokenizer) -> Result<AlignedPair, AlignError> {
    record.validate().map_err(AlignError::InvalidRecord)?;
    let original = tokenizer.encode(&record.original);
    let counterfactual = tokenizer.encode(&record.counterfactual);
    let orig_spans: Vec<_> = record.substitutions.iter().map(|s| s.original_span).collect();
    let cf_spans: Vec<_> = record.substitutions.iter().map(|s| s.counterfactual_span).collect();
    let ro = regions(&original.offsets, &orig_spans);
    let rc = regions(&counterfactual.offsets, &cf_spans);
    let alignment = align_regions(&ro, &rc);
    Ok(AlignedPair {
        original,
        counterfactual,
        alignment,
    })
}

/// Pairs tokens region by region; both inputs are non-decreasing region ids.
pub(crate) fn align_regions(ro: &[usize], rc: &[usize]) -> TokenAlignment {
    let mut a = TokenAlignment::default();
    let (mut i, mut k) = (0, 0);
    while i < ro.len() || k < rc.len() {
        let region = match (ro.get(i), rc.get(k)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        let i_end = i + ro[i..].iter().take_while(|&&r| r == region).count();
        let k_end = k + rc[k..].iter().take_while(|&&r| r == region).count();
        let shared = (i_end - i).min(k_end - k);
        a.pairs.extend((0..shared).map(|n| (i + n, k + n)));
        a.unmatched_original.extend(i + shared..i_end);
        a.unmatched_counterfactual.extend(k + shared..k_end);
        i = i_end;
        k = k_end;
    }
    a
}

impl TokenAlignment {
    /// Checks monotonicity and the partition property for sequences of the
    /// given lengths.
    pub fn check(&self, len_original: usize, len_counterfactual: usize) -> Result<(), String> {
        for w in self.pairs.windows(2) {
            if !(w[0].0 < w[1].0 && w[0].1 < w[1].1) {
                return Err(format!("pairs not strictly increasing at {:?}", w));
            }
        }
        let mut seen_o = vec![0u8; len_original];
        let mut seen_c = vec![0u8; len_counterfactual];
        let mark = |seen: &mut [u8], i: usize| -> Result<(), String> {
            let slot = seen.get_mut(i).ok_or_else(|| format!("index {i} out of range"))?;
            *slot += 1;
            Ok(())
        };
        for &(t, s) in &self.pairs {
            mark(&mut seen_o, t)?;
            mark(&mut seen_c, s)?;
        }
        for &t in &self.unmatched_original {
            mark(&mut seen_o, t)?;
        }
        for &s in &self.unmatched_counterfactual {
            mark(&mut seen_c, s)?;
        }
        if seen_o.iter().chain(&seen_c).any(|&n| n != 1) {
            return Err("indices are not partitioned".into());
        }
        Ok(())
    }

    /// Counterfactual position paired with original position `t`.
    pub fn counterpart(&self, t: usize) -> Option<usize> {
        self.pairs
            .binary_search_by_key(&t, |p| p.0)
            .ok()
            .map(|i| self.pairs[i].1)
    }
}
