use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::lm::ReferenceLM;
use super::tokenizer::Tokenizer;
use super::ModelError;

/// Default evaluation window.
pub const DEFAULT_CHUNK: usize = 64;
/// Default window advance.
pub const DEFAULT_STRIDE: usize = 32;

/// Sum of negative log-likelihoods under strided-window evaluation.
///
/// Windows of `chunk` tokens start every `stride` tokens. Each token is
/// scored exactly once, in the first window that reaches it, conditioned
/// only on the tokens of that window that precede it (BOS-padded).
pub fn strided_nll(
    model: &ReferenceLM,
    tokens: &[u32],
    chunk: usize,
    stride: usize,
) -> Result<f64, ModelError> {
    if tokens.is_empty() {
        return Err(ModelError::EmptySequence);
    }
    if stride == 0 || chunk == 0 || stride > chunk {
        return Err(ModelError::InvalidConfig(format!(
            "need 0 < stride <= chunk, got stride {stride} chunk {chunk}"
        )));
    }
    let n = tokens.len();
    let mut nll = 0.0;
    let mut scored_until = 0;
    let mut begin = 0;
    while scored_until < n {
        let end = (begin + chunk).min(n);
        for t in scored_until.max(begin)..end {
            let window = model.context_window(&tokens[begin..t]);
            nll -= model.log_probs_for_window(&window)[tokens[t] as usize];
        }
        scored_until = end;
        begin += stride;
    }
    Ok(nll)
}

/// `exp(mean NLL)` over the sequence.
pub fn perplexity(
    model: &ReferenceLM,
    tokens: &[u32],
    chunk: usize,
    stride: usize,
) -> Result<f64, ModelError> {
    let nll = strided_nll(model, tokens, chunk, stride)?;
    Ok((nll / tokens.len() as f64).exp())
}

/// Perplexity pooled over several sequences (token-weighted).
pub fn corpus_perplexity(
    model: &ReferenceLM,
    sequences: &[Vec<u32>],
    chunk: usize,
    stride: usize,
) -> Result<f64, ModelError> {
    let mut nll = 0.0;
    let mut count = 0usize;
    for seq in sequences.iter().filter(|s| !s.is_empty()) {
        nll += strided_nll(model, seq, chunk, stride)?;
        count += seq.len();
    }
    if count == 0 {
        return Err(ModelError::EmptySequence);
    }
    Ok((nll / count as f64).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluencyReport {
    /// Mean per-text perplexity of each group.
    pub per_group: BTreeMap<String, f64>,
    /// Unweighted mean over groups.
    pub macro_average: f64,
    /// Groups left out because they had no scorable text.
    pub excluded_groups: Vec<String>,
    /// Texts that tokenized to nothing and were skipped.
    pub skipped_texts: usize,
}

/// Fluency of generated text: perplexity under a scorer model with
/// non-overlapping windows (`stride = chunk`), averaged per group and then
/// macro-averaged across groups.
pub fn fluency(
    scorer: &ReferenceLM,
    tokenizer: &Tokenizer,
    groups: &BTreeMap<String, Vec<String>>,
    chunk: usize,
) -> Result<FluencyReport, ModelError> {
    let mut per_group = BTreeMap::new();
    let mut excluded_groups = Vec::new();
    let mut skipped_texts = 0;
    for (group, texts) in groups {
        let mut ppls = Vec::new();
        for text in texts {
            let tokens = tokenizer.tokenize(text);
            if tokens.is_empty() {
                skipped_texts += 1;
                continue;
            }
            ppls.push(perplexity(scorer, &tokens, chunk, chunk)?);
        }
        if ppls.is_empty() {
            log::warn!("fluency: group {group:?} has no scorable text and is excluded");
            excluded_groups.push(group.clone());
            continue;
        }
        per_group.insert(group.clone(), ppls.iter().sum::<f64>() / ppls.len() as f64);
    }
    if per_group.is_empty() {
        return Err(ModelError::EmptySequence);
    }
    let macro_average = per_group.values().sum::<f64>() / per_group.len() as f64;
    Ok(FluencyReport {
        per_group,
        macro_average,
        excluded_groups,
        skipped_texts,
    })
}
