//! Role-reversed rewriting of texts, substitution bookkeeping and the
//! original/counterfactual token alignment used by distillation.

pub mod align;
pub mod augment;
pub mod rewrite;

use serde::{Deserialize, Serialize};

pub use align::{align_tokens, TokenAlignment};
pub use augment::{augment_corpus, augment_records, AugmentMode, AugmentStats, CorpusRecord};
pub use rewrite::{record_seed, rewrite_gender, rewrite_race, Rewriter};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Gender,
    Race,
}

impl std::str::FromStr for Domain {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gender" => Ok(Domain::Gender),
            "race" => Ok(Domain::Race),
            other => Err(format!("unknown domain {other:?} (expected gender or race)")),
        }
    }
}

/// One replaced word. Spans are byte ranges `[start, end)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanSubstitution {
    pub original_span: (usize, usize),
    pub counterfactual_span: (usize, usize),
    pub original: String,
    pub replacement: String,
}

/// A text and its counterfactual. Exists only when at least one word was swapped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewriteRecord {
    pub original: String,
    pub counterfactual: String,
    pub substitutions: Vec<SpanSubstitution>,
    pub domain: Domain,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl RewriteRecord {
    /// Builds a record by splicing `subs` (original spans and replacement
    /// words, sorted and disjoint) into `original`.
    pub(crate) fn splice(
        original: &str,
        subs: Vec<((usize, usize), String)>,
        domain: Domain,
        seed: Option<u64>,
    ) -> Option<Self> {
        if subs.is_empty() {
            return None;
        }
        let mut out = String::with_capacity(original.len());
        let mut substitutions = Vec::with_capacity(subs.len());
        let mut cursor = 0;
        for ((start, end), replacement) in subs {
            out.push_str(&original[cursor..start]);
            let cf_start = out.len();
            out.push_str(&replacement);
            substitutions.push(SpanSubstitution {
                original_span: (start, end),
                counterfactual_span: (cf_start, out.len()),
                original: original[start..end].to_string(),
                replacement,
            });
            cursor = end;
        }
        out.push_str(&original[cursor..]);
        Some(Self {
            original: original.to_string(),
            counterfactual: out,
            substitutions,
            domain,
            seed,
        })
    }

    /// Checks the record invariants: spans in bounds, increasing, holding
    /// the recorded words, with identical text between them.
    pub fn validate(&self) -> Result<(), String> {
        if self.substitutions.is_empty() {
            return Err("record has no substitutions".into());
        }
        let (o, c) = (self.original.as_str(), self.counterfactual.as_str());
        let (mut po, mut pc) = (0, 0);
        for (i, s) in self.substitutions.iter().enumerate() {
            let (os, oe) = s.original_span;
            let (cs, ce) = s.counterfactual_span;
            if os < po || oe < os || cs < pc || ce < cs {
                return Err(format!("substitution {i}: spans overlap or are out of order"));
            }
            let (Some(ow), Some(cw)) = (o.get(os..oe), c.get(cs..ce)) else {
                return Err(format!("substitution {i}: span out of bounds"));
            };
            if ow != s.original || cw != s.replacement {
                return Err(format!("substitution {i}: span text differs from recorded word"));
            }
            if o[po..os] != c[pc..cs] {
                return Err(format!("text before substitution {i} differs"));
            }
            po = oe;
            pc = ce;
        }
        if o[po..] != c[pc..] {
            return Err("trailing text differs".into());
        }
        Ok(())
    }
}
