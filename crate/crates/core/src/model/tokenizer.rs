use std::collections::HashMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::ModelError;

pub const BOS: &str = "<bos>";
pub const EOS: &str = "<eos>";
pub const UNK: &str = "<unk>";

/// Text rendered in place of unknown tokens on detokenization.
pub const UNK_TEXT: &str = "\u{FFFD}";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TokenizerMode {
    /// One token per pre-tokenized piece.
    #[default]
    Word,
    /// Greedy longest match inside each piece; single characters are always in the vocabulary.
    Subword,
}

impl std::str::FromStr for TokenizerMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "word" => Ok(Self::Word),
            "subword" | "subword-greedy" => Ok(Self::Subword),
            other => Err(format!("unknown tokenizer mode {other:?}")),
        }
    }
}

/// Dense token inventory; the three special tokens occupy indices 0..3.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocab {
    pub const BOS_ID: u32 = 0;
    pub const EOS_ID: u32 = 1;
    pub const UNK_ID: u32 = 2;

    /// Builds a vocabulary from regular tokens; specials are prepended.
    pub fn from_tokens<I: IntoIterator<Item = String>>(tokens: I) -> Result<Self, ModelError> {
        let mut all = vec![BOS.to_string(), EOS.to_string(), UNK.to_string()];
        all.extend(tokens);
        let mut index = HashMap::with_capacity(all.len());
        for (i, t) in all.iter().enumerate() {
            if t.is_empty() {
                return Err(ModelError::InvalidVocab("empty token".into()));
            }
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(ModelError::InvalidVocab(format!("duplicate token {t:?}")));
            }
        }
        Ok(Self { tokens: all, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    /// Regular (non-special) tokens in index order.
    pub fn regular_tokens(&self) -> &[String] {
        &self.tokens[3..]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric()
}

/// Splits text into pieces: an optional single leading space followed by a
/// word (letters/digits with internal apostrophes) or one punctuation
/// character, or a run of whitespace.
pub fn pre_tokenize(text: &str) -> Vec<Range<usize>> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let end_of = |i: usize| chars.get(i).map_or(text.len(), |(b, _)| *b);
    let mut pieces = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let start = i;
        let mut c = chars[i].1;
        if c == ' ' && chars.get(i + 1).is_some_and(|(_, n)| !n.is_whitespace()) {
            i += 1;
            c = chars[i].1;
        }
        if is_word_char(c) {
            i += 1;
            while i < chars.len() {
                let ch = chars[i].1;
                if is_word_char(ch) {
                    i += 1;
                } else if ch == '\''
                    && chars.get(i + 1).is_some_and(|(_, n)| is_word_char(*n))
                {
                    i += 2;
                } else {
                    break;
                }
            }
        } else if c.is_whitespace() {
            i += 1;
            while i < chars.len() && chars[i].1.is_whitespace() {
                // Leave a final space attached to the following piece.
                let last_space = chars[i].1 == ' '
                    && chars.get(i + 1).is_some_and(|(_, n)| !n.is_whitespace());
                if last_space {
                    break;
                }
                i += 1;
            }
        } else {
            i += 1;
        }
        pieces.push(chars[start].0..end_of(i));
    }
    pieces
}

/// Token ids with byte offsets into the source text.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Encoding {
    pub ids: Vec<u32>,
    pub offsets: Vec<Range<usize>>,
    /// Number of unknown-token substitutions.
    pub unknown: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tokenizer {
    vocab: Vocab,
    mode: TokenizerMode,
    max_token_len: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizerSpec {
    pub mode: TokenizerMode,
    /// Regular tokens in index order (specials excluded).
    pub tokens: Vec<String>,
}

impl Tokenizer {
    pub fn new(vocab: Vocab, mode: TokenizerMode) -> Self {
        let max_token_len = vocab.regular_tokens().iter().map(String::len).max().unwrap_or(0);
        Self {
            vocab,
            mode,
            max_token_len,
        }
    }

    /// Builds the vocabulary from a corpus and wraps it in a tokenizer.
    ///
    /// Tokens are ranked by frequency with lexicographic tie-breaks. In
    /// word mode `max_size` caps the regular tokens; in subword mode every
    /// single character of the corpus is kept and `max_size` caps the
    /// multi-character tokens.
    pub fn build<S: AsRef<str>>(
        corpus: &[S],
        max_size: usize,
        mode: TokenizerMode,
    ) -> Result<Self, ModelError> {
        if corpus.iter().all(|t| t.as_ref().is_empty()) {
            return Err(ModelError::EmptyCorpus);
        }
        let mut counts: HashMap<&str, usize> = HashMap::new();
        let mut chars = std::collections::BTreeSet::new();
        for text in corpus {
            let text = text.as_ref();
            for piece in pre_tokenize(text) {
                *counts.entry(&text[piece]).or_default() += 1;
            }
            chars.extend(text.chars());
        }
        let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
        if mode == TokenizerMode::Subword {
            ranked.retain(|(t, _)| t.chars().count() > 1);
        }
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        ranked.truncate(max_size);

        let mut tokens: Vec<String> = Vec::new();
        if mode == TokenizerMode::Subword {
            tokens.extend(chars.into_iter().map(String::from));
        }
        tokens.extend(ranked.into_iter().map(|(t, _)| t.to_string()));
        Ok(Self::new(Vocab::from_tokens(tokens)?, mode))
    }

    pub fn from_spec(spec: TokenizerSpec) -> Result<Self, ModelError> {
        Ok(Self::new(Vocab::from_tokens(spec.tokens)?, spec.mode))
    }

    pub fn spec(&self) -> TokenizerSpec {
        TokenizerSpec {
            mode: self.mode,
            tokens: self.vocab.regular_tokens().to_vec(),
        }
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn mode(&self) -> TokenizerMode {
        self.mode
    }

    pub fn encode(&self, text: &str) -> Encoding {
        let mut enc = Encoding::default();
        for piece in pre_tokenize(text) {
            match self.mode {
                TokenizerMode::Word => {
                    let id = self.vocab.id(&text[piece.clone()]).unwrap_or_else(|| {
                        enc.unknown += 1;
                        Vocab::UNK_ID
                    });
                    enc.ids.push(id);
                    enc.offsets.push(piece);
                }
                TokenizerMode::Subword => self.encode_greedy(text, piece, &mut enc),
            }
        }
        enc
    }

    fn encode_greedy(&self, text: &str, piece: Range<usize>, enc: &mut Encoding) {
        let mut pos = piece.start;
        while pos < piece.end {
            let limit = (pos + self.max_token_len).min(piece.end);
            let mut matched = None;
            for end in (pos + 1..=limit).rev() {
                if !text.is_char_boundary(end) {
                    continue;
                }
                if let Some(id) = self.vocab.id(&text[pos..end]) {
                    matched = Some((id, end));
                    break;
                }
            }
            let (id, end) = matched.unwrap_or_else(|| {
                enc.unknown += 1;
                let width = text[pos..].chars().next().map_or(1, char::len_utf8);
                (Vocab::UNK_ID, pos + width)
            });
            enc.ids.push(id);
            enc.offsets.push(pos..end);
            pos = end;
        }
    }

    pub fn tokenize(&self, text: &str) -> Vec<u32> {
        self.encode(text).ids
    }

    pub fn detokenize(&self, ids: &[u32]) -> String {
        ids.iter()
            .filter(|&&id| id != Vocab::BOS_ID && id != Vocab::EOS_ID)
            .map(|&id| match id {
                Vocab::UNK_ID => UNK_TEXT,
                _ => self.vocab.token(id).unwrap_or(UNK_TEXT),
            })
            .collect()
    }
}
