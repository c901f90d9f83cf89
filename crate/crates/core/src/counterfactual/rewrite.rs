use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Domain, RewriteRecord};
use crate::lexicon::{GroupLexicon, SwapLexicon};

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric()
}

/// Left-to-right, longest-match-first scan for compiled surface forms.
///
/// A match must not be glued to a word character on either side. Matches
/// never overlap; after a match the scan resumes at its end.
pub(crate) fn scan_matches<'t, E>(
    text: &'t str,
    lengths: &[usize],
    mut lookup: impl FnMut(&str) -> Option<E>,
) -> Vec<(usize, usize, E)> {
    let mut out = Vec::new();
    let mut prev: Option<char> = None;
    let mut i = 0;
    while i < text.len() {
        let mut matched = false;
        if !prev.is_some_and(is_word_char) {
            for &len in lengths {
                let j = i + len;
                if j > text.len() || !text.is_char_boundary(j) {
                    continue;
                }
                if text[j..].chars().next().is_some_and(is_word_char) {
                    continue;
                }
                if let Some(e) = lookup(&text[i..j]) {
                    prev = text[..j].chars().next_back();
                    out.push((i, j, e));
                    i = j;
                    matched = true;
                    break;
                }
            }
        }
        if !matched {
            let c = text[i..].chars().next().expect("i is on a char boundary");
            prev = Some(c);
            i += c.len_utf8();
        }
    }
    out
}

/// Swaps every gendered word for its counterpart. `None` when the text has
/// no gendered word.
///
/// Surrounding quotes and punctuation matched as part of a variant are left
/// in place; only the word itself is recorded as substituted.
pub fn rewrite_gender(text: &str, lexicon: &SwapLexicon) -> Option<RewriteRecord> {
    let matches = scan_matches(text, lexicon.form_lengths(), |form| lexicon.entry(form));
    let subs = matches
        .into_iter()
        .map(|(start, end, e)| {
            let span = (start + e.prefix_len, end - e.suffix_len);
            let repl = &e.replacement[e.prefix_len..e.replacement.len() - e.suffix_len];
            (span, repl.to_string())
        })
        .collect();
    RewriteRecord::splice(text, subs, Domain::Gender, None)
}

/// Replaces every group word with a uniformly drawn word from the other
/// groups of its category, rendered in the matched word's surface form.
/// Draws come from a generator seeded with `seed`, in match order.
pub fn rewrite_race(text: &str, lexicon: &GroupLexicon, seed: u64) -> Option<RewriteRecord> {
    let matches = scan_matches(text, lexicon.form_lengths(), |form| lexicon.entry(form).copied());
    if matches.is_empty() {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let subs = matches
        .into_iter()
        .map(|(start, end, e)| {
            let pool = lexicon.replacement_pool(e.category, e.group);
            let (_, word) = pool[rng.gen_range(0..pool.len())];
            ((start, end), e.rule.render(word))
        })
        .collect();
    RewriteRecord::splice(text, subs, Domain::Race, Some(seed))
}

/// Derives a per-record seed from a corpus seed and the record's position.
pub fn record_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer over the combined value.
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A configured rewriting function for one domain.
#[derive(Debug, Clone, Copy)]
pub enum Rewriter<'a> {
    Gender(&'a SwapLexicon),
    Race { lexicon: &'a GroupLexicon, seed: u64 },
}

impl Rewriter<'_> {
    pub fn domain(&self) -> Domain {
        match self {
            Rewriter::Gender(_) => Domain::Gender,
            Rewriter::Race { .. } => Domain::Race,
        }
    }

    /// Rewrites the `index`-th record of a stream.
    pub fn rewrite(&self, text: &str, index: u64) -> Option<RewriteRecord> {
        match *self {
            Rewriter::Gender(lex) => rewrite_gender(text, lex),
            Rewriter::Race { lexicon, seed } => rewrite_race(text, lexicon, record_seed(seed, index)),
        }
    }
}
