//! Word-substitution dictionaries used to build counterfactual texts.
//!
//! Two dictionaries are supported:
//!
//! * [`SwapLexicon`]: a one-to-one female/male word mapping read from a
//!   two-column TSV file. Every word is expanded into a fixed set of surface
//!   variants (capitalization, leading quotes or space, trailing punctuation)
//!   and each variant maps to the variant of its counterpart produced by the
//!   same rule, so case and punctuation survive a swap.
//! * [`GroupLexicon`]: a many-to-many mapping between demographic groups,
//!   organised by category (countries, first names, last names, ...), read
//!   from JSON.
//!
//! Both are immutable once compiled.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("failed to read lexicon {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: word {word:?} is paired with itself")]
    SelfPair { line: usize, word: String },
    #[error("line {line}: word {word:?} already appears in the pair on line {first_line}")]
    DuplicateWord {
        line: usize,
        first_line: usize,
        word: String,
    },
    #[error("invalid race lexicon JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("category {category:?}: {message}")]
    InvalidCategory { category: String, message: String },
    #[error("surface form {form:?} ({first}) overlaps with {second}")]
    Overlap {
        form: String,
        first: String,
        second: String,
    },
}

/// Normalizes typographic apostrophes and quotes to their ASCII forms and trims whitespace.
pub fn normalize_word(word: &str) -> String {
    word.trim()
        .chars()
        .map(|c| match c {
            '\u{2019}' | '\u{2018}' | '\u{02BC}' => '\'',
            other => other,
        })
        .collect()
}

/// Uppercases the first character, leaving the rest untouched.
pub fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Uppercases the first character of every space- or hyphen-separated part.
fn title_case(phrase: &str) -> String {
    let mut out = String::with_capacity(phrase.len());
    let mut at_start = true;
    for c in phrase.chars() {
        if at_start {
            out.extend(c.to_uppercase());
        } else {
            out.push(c);
        }
        at_start = c == ' ' || c == '-';
    }
    out
}

// ---------------------------------------------------------------------------
// Surface variants
// ---------------------------------------------------------------------------

const VARIANT_PREFIXES: [&str; 6] = ["", " ", "'", "\"", "`", "``"];
const VARIANT_SUFFIXES: [&str; 5] = ["", ",", ".", "'", "''"];

/// One rule of the fixed variant set: optional capitalization, an opening
/// prefix and a closing suffix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct VariantRule {
    pub capitalize: bool,
    pub prefix: &'static str,
    pub suffix: &'static str,
}

impl VariantRule {
    /// All rules in their canonical order; the bare form comes first.
    pub fn all() -> impl Iterator<Item = VariantRule> {
        [false, true].into_iter().flat_map(|capitalize| {
            VARIANT_PREFIXES.into_iter().flat_map(move |prefix| {
                VARIANT_SUFFIXES.into_iter().map(move |suffix| VariantRule {
                    capitalize,
                    prefix,
                    suffix,
                })
            })
        })
    }

    pub fn apply(&self, word: &str) -> String {
        let core = if self.capitalize {
            capitalize(word)
        } else {
            word.to_string()
        };
        format!("{}{}{}", self.prefix, core, self.suffix)
    }
}

/// A word together with every surface form it is matched under.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SurfaceVariant {
    pub base: String,
    pub variants: Vec<String>,
}

impl SurfaceVariant {
    pub fn contains(&self, form: &str) -> bool {
        self.variants.iter().any(|v| v == form)
    }
}

fn variant_forms(word: &str) -> Vec<(VariantRule, String)> {
    let mut seen = std::collections::HashSet::new();
    VariantRule::all()
        .map(|rule| (rule, rule.apply(word)))
        .filter(|(_, form)| seen.insert(form.clone()))
        .collect()
}

/// Expands a word into its fixed set of surface variants.
///
/// Only the boundaries vary: internal characters (including apostrophes in
/// contractions such as `she'll`) are kept as they are.
pub fn expand_variants(word: &str) -> SurfaceVariant {
    let base = normalize_word(word);
    let variants = variant_forms(&base).into_iter().map(|(_, f)| f).collect();
    SurfaceVariant { base, variants }
}

// ---------------------------------------------------------------------------
// Gender swap lexicon
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Female,
    Male,
}

impl Gender {
    pub fn opposite(self) -> Self {
        match self {
            Gender::Female => Gender::Male,
            Gender::Male => Gender::Female,
        }
    }
}

/// A compiled surface form and what it is swapped for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwapEntry {
    /// Surface form of the counterpart word under the same variant rule.
    pub replacement: String,
    pub source: Gender,
    /// Byte length of the rule prefix shared by both forms.
    pub prefix_len: usize,
    /// Byte length of the rule suffix shared by both forms.
    pub suffix_len: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SwapLexicon {
    pairs: Vec<(String, String)>,
    compiled: HashMap<String, SwapEntry>,
    /// Distinct byte lengths of compiled forms, longest first.
    lengths: Vec<usize>,
}

/// Shipped gender word pairs (female, male), one pair per line.
pub const BUILTIN_GENDER_PAIRS: &str = include_str!("../data/gender_pairs.tsv");
/// Shipped race/ethnicity word groups.
pub const BUILTIN_RACE_WORDS: &str = include_str!("../data/race_words.json");

impl SwapLexicon {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_GENDER_PAIRS).expect("shipped gender lexicon is valid")
    }

    /// Reads a TSV file of `female<TAB>male` pairs.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, LexiconError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| LexiconError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Parses TSV content. Blank lines and lines starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let mut pairs = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            if raw.trim().is_empty() || raw.trim_start().starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = raw.split('\t').collect();
            if fields.len() != 2 {
                return Err(LexiconError::Parse {
                    line,
                    message: format!("expected 2 tab-separated fields, found {}", fields.len()),
                });
            }
            let female = normalize_word(fields[0]);
            let male = normalize_word(fields[1]);
            if female.is_empty() || male.is_empty() {
                return Err(LexiconError::Parse {
                    line,
                    message: "empty word".into(),
                });
            }
            pairs.push((line, female, male));
        }
        Self::compile(pairs)
    }

    /// Builds a lexicon from `(female, male)` pairs.
    pub fn from_pairs<I, A, B>(pairs: I) -> Result<Self, LexiconError>
    where
        I: IntoIterator<Item = (A, B)>,
        A: AsRef<str>,
        B: AsRef<str>,
    {
        let numbered = pairs
            .into_iter()
            .enumerate()
            .map(|(i, (f, m))| (i + 1, normalize_word(f.as_ref()), normalize_word(m.as_ref())))
            .collect();
        Self::compile(numbered)
    }

    fn compile(numbered: Vec<(usize, String, String)>) -> Result<Self, LexiconError> {
        // word -> (line, partner)
        let mut owner: HashMap<String, (usize, String)> = HashMap::new();
        let mut pairs = Vec::new();
        for (line, female, male) in numbered {
            if female == male {
                return Err(LexiconError::SelfPair { line, word: female });
            }
            // The same unordered pair listed twice (e.g. reversed) is not a conflict.
            if owner.get(&female).is_some_and(|(_, p)| *p == male)
                && owner.get(&male).is_some_and(|(_, p)| *p == female)
            {
                log::debug!("line {line}: pair {female}/{male} already present, skipped");
                continue;
            }
            for word in [&female, &male] {
                if let Some((first_line, _)) = owner.get(word) {
                    return Err(LexiconError::DuplicateWord {
                        line,
                        first_line: *first_line,
                        word: word.clone(),
                    });
                }
            }
            owner.insert(female.clone(), (line, male.clone()));
            owner.insert(male.clone(), (line, female.clone()));
            pairs.push((line, female, male));
        }

        let mut compiled: HashMap<String, SwapEntry> = HashMap::new();
        let mut form_owner: HashMap<String, usize> = HashMap::new();
        for (line, female, male) in &pairs {
            for (word, other, source) in [
                (female, male, Gender::Female),
                (male, female, Gender::Male),
            ] {
                for (rule, form) in variant_forms(word) {
                    if let Some(first_line) = form_owner.get(&form) {
                        if first_line != line {
                            return Err(LexiconError::DuplicateWord {
                                line: *line,
                                first_line: *first_line,
                                word: form,
                            });
                        }
                        continue;
                    }
                    form_owner.insert(form.clone(), *line);
                    compiled.insert(
                        form,
                        SwapEntry {
                            replacement: rule.apply(other),
                            source,
                            prefix_len: rule.prefix.len(),
                            suffix_len: rule.suffix.len(),
                        },
                    );
                }
            }
        }

        let mut lengths: Vec<usize> = compiled.keys().map(String::len).collect();
        lengths.sort_unstable_by(|a, b| b.cmp(a));
        lengths.dedup();
        Ok(Self {
            pairs: pairs.into_iter().map(|(_, f, m)| (f, m)).collect(),
            compiled,
            lengths,
        })
    }

    /// `(female, male)` pairs in file order.
    pub fn pairs(&self) -> &[(String, String)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Counterpart of a surface form, if the form is in the lexicon.
    pub fn lookup(&self, form: &str) -> Option<&str> {
        self.compiled.get(form).map(|e| e.replacement.as_str())
    }

    pub fn entry(&self, form: &str) -> Option<&SwapEntry> {
        self.compiled.get(form)
    }

    /// Gender of the word a surface form was derived from.
    pub fn gender_of(&self, form: &str) -> Option<Gender> {
        self.compiled.get(form).map(|e| e.source)
    }

    pub fn compiled(&self) -> &HashMap<String, SwapEntry> {
        &self.compiled
    }

    /// Distinct byte lengths of compiled forms, longest first.
    pub fn form_lengths(&self) -> &[usize] {
        &self.lengths
    }
}

// ---------------------------------------------------------------------------
// Group lexicon (race)
// ---------------------------------------------------------------------------

/// How words of a category are expanded into surface forms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CategoryKind {
    /// Country and race terms: lower/title case, with ` American` and
    /// `-American` (and their lowercase) suffixed forms.
    Demonym,
    /// Lower/title case, singular and plural.
    Color,
    /// Capitalized form only.
    Name,
    /// As written plus capitalized.
    #[default]
    Plain,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CategorySpec {
    pub name: String,
    #[serde(default)]
    pub kind: CategoryKind,
    pub groups: BTreeMap<String, Vec<String>>,
}

/// Words that are replaced with words of another category but never used as
/// replacements themselves.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OneDirectionalSpec {
    pub group: String,
    pub words: Vec<String>,
    pub replace_from: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupLexiconSpec {
    pub categories: Vec<CategorySpec>,
    #[serde(default)]
    pub one_directional: Vec<OneDirectionalSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DemonymSuffix {
    None,
    SpaceAmerican,
    HyphenAmerican,
    SpaceLowerAmerican,
    HyphenLowerAmerican,
}

impl DemonymSuffix {
    const ALL: [DemonymSuffix; 5] = [
        DemonymSuffix::None,
        DemonymSuffix::SpaceAmerican,
        DemonymSuffix::HyphenAmerican,
        DemonymSuffix::SpaceLowerAmerican,
        DemonymSuffix::HyphenLowerAmerican,
    ];

    fn text(self) -> &'static str {
        match self {
            DemonymSuffix::None => "",
            DemonymSuffix::SpaceAmerican => " American",
            DemonymSuffix::HyphenAmerican => "-American",
            DemonymSuffix::SpaceLowerAmerican => " american",
            DemonymSuffix::HyphenLowerAmerican => "-american",
        }
    }
}

/// The rule that produced a group-lexicon surface form; replacements are
/// rendered with the same rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GroupRule {
    Demonym { title: bool, suffix: DemonymSuffix },
    Color { title: bool, plural: bool },
    Name,
    Plain { title: bool },
}

impl GroupRule {
    pub fn render(&self, word: &str) -> String {
        match *self {
            GroupRule::Demonym { title, suffix } => {
                let core = if title {
                    title_case(word)
                } else {
                    word.to_string()
                };
                format!("{core}{}", suffix.text())
            }
            GroupRule::Color { title, plural } => {
                let core = if title {
                    capitalize(word)
                } else {
                    word.to_string()
                };
                if plural {
                    format!("{core}s")
                } else {
                    core
                }
            }
            GroupRule::Name => capitalize(word),
            GroupRule::Plain { title } => {
                if title {
                    capitalize(word)
                } else {
                    word.to_string()
                }
            }
        }
    }

    fn rules_for(kind: CategoryKind) -> Vec<GroupRule> {
        match kind {
            CategoryKind::Demonym => [false, true]
                .into_iter()
                .flat_map(|title| {
                    DemonymSuffix::ALL
                        .into_iter()
                        .map(move |suffix| GroupRule::Demonym { title, suffix })
                })
                .collect(),
            CategoryKind::Color => [false, true]
                .into_iter()
                .flat_map(|title| {
                    [false, true]
                        .into_iter()
                        .map(move |plural| GroupRule::Color { title, plural })
                })
                .collect(),
            CategoryKind::Name => vec![GroupRule::Name],
            CategoryKind::Plain => vec![
                GroupRule::Plain { title: false },
                GroupRule::Plain { title: true },
            ],
        }
    }
}

#[derive(Debug, Clone)]
pub struct Category {
    pub name: String,
    pub kind: CategoryKind,
    pub group_names: Vec<String>,
    /// Base words per group, parallel to `group_names`.
    pub words: Vec<Vec<String>>,
}

/// A compiled surface form of the group lexicon.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroupEntry {
    /// Category whose other groups supply replacements.
    pub category: usize,
    /// Index of the matched word's group in `Category::group_names` of the
    /// replacement category.
    pub group: usize,
    pub rule: GroupRule,
}

/// Result of looking up a surface form in a [`GroupLexicon`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroupMatch<'a> {
    pub category: &'a str,
    pub group: &'a str,
}

impl fmt::Display for GroupMatch<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.category, self.group)
    }
}

#[derive(Debug, Clone)]
pub struct GroupLexicon {
    categories: Vec<Category>,
    compiled: HashMap<String, GroupEntry>,
    lengths: Vec<usize>,
}

impl GroupLexicon {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_RACE_WORDS).expect("shipped race lexicon is valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LexiconError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| LexiconError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(json: &str) -> Result<Self, LexiconError> {
        let spec: GroupLexiconSpec = serde_json::from_str(json)?;
        Self::from_spec(spec)
    }

    pub fn from_spec(spec: GroupLexiconSpec) -> Result<Self, LexiconError> {
        let mut categories = Vec::with_capacity(spec.categories.len());
        for cat in spec.categories {
            let mut group_names = Vec::new();
            let mut words = Vec::new();
            for (group, list) in cat.groups {
                let mut normalized: Vec<String> = Vec::new();
                for w in list {
                    let w = normalize_word(&w);
                    if !w.is_empty() && !normalized.contains(&w) {
                        normalized.push(w);
                    }
                }
                if !normalized.is_empty() {
                    group_names.push(group);
                    words.push(normalized);
                }
            }
            if group_names.len() < 2 {
                return Err(LexiconError::InvalidCategory {
                    category: cat.name,
                    message: "needs at least two non-empty groups".into(),
                });
            }
            categories.push(Category {
                name: cat.name,
                kind: cat.kind,
                group_names,
                words,
            });
        }

        let mut compiled: HashMap<String, GroupEntry> = HashMap::new();
        let mut origin: HashMap<String, (String, String)> = HashMap::new();
        let mut insert = |form: String,
                          entry: GroupEntry,
                          label: (String, String),
                          word: &str|
         -> Result<(), LexiconError> {
            if let Some(prev) = origin.get(&form) {
                // Same group listing a word twice, or across categories, is harmless.
                if prev.1 == label.1 {
                    return Ok(());
                }
                return Err(LexiconError::Overlap {
                    form: form.clone(),
                    first: format!("{}/{}", prev.0, prev.1),
                    second: format!("{}/{} via {word:?}", label.0, label.1),
                });
            }
            origin.insert(form.clone(), label);
            compiled.insert(form, entry);
            Ok(())
        };

        for (ci, cat) in categories.iter().enumerate() {
            let rules = GroupRule::rules_for(cat.kind);
            for (gi, group) in cat.group_names.iter().enumerate() {
                for word in &cat.words[gi] {
                    for rule in &rules {
                        insert(
                            rule.render(word),
                            GroupEntry {
                                category: ci,
                                group: gi,
                                rule: *rule,
                            },
                            (cat.name.clone(), group.clone()),
                            word,
                        )?;
                    }
                }
            }
        }

        for od in &spec.one_directional {
            let ci = categories
                .iter()
                .position(|c| c.name == od.replace_from)
                .ok_or_else(|| LexiconError::InvalidCategory {
                    category: od.replace_from.clone(),
                    message: "referenced by one_directional but not defined".into(),
                })?;
            let gi = categories[ci]
                .group_names
                .iter()
                .position(|g| *g == od.group)
                .ok_or_else(|| LexiconError::InvalidCategory {
                    category: od.replace_from.clone(),
                    message: format!("has no group {:?}", od.group),
                })?;
            for word in &od.words {
                let word = normalize_word(word);
                for title in [false, true] {
                    let rule = GroupRule::Plain { title };
                    insert(
                        rule.render(&word),
                        GroupEntry {
                            category: ci,
                            group: gi,
                            rule,
                        },
                        (format!("{}(one-directional)", od.replace_from), od.group.clone()),
                        &word,
                    )?;
                }
            }
        }

        let mut lengths: Vec<usize> = compiled.keys().map(String::len).collect();
        lengths.sort_unstable_by(|a, b| b.cmp(a));
        lengths.dedup();
        Ok(Self {
            categories,
            compiled,
            lengths,
        })
    }

    pub fn categories(&self) -> &[Category] {
        &self.categories
    }

    pub fn entry(&self, form: &str) -> Option<&GroupEntry> {
        self.compiled.get(form)
    }

    pub fn lookup(&self, form: &str) -> Option<GroupMatch<'_>> {
        self.compiled.get(form).map(|e| {
            let cat = &self.categories[e.category];
            GroupMatch {
                category: &cat.name,
                group: &cat.group_names[e.group],
            }
        })
    }

    pub fn compiled(&self) -> &HashMap<String, GroupEntry> {
        &self.compiled
    }

    pub fn form_lengths(&self) -> &[usize] {
        &self.lengths
    }

    /// Base words of all groups other than `group` in `category`, in a fixed order.
    pub fn replacement_pool(&self, category: usize, group: usize) -> Vec<(usize, &str)> {
        let cat = &self.categories[category];
        cat.words
            .iter()
            .enumerate()
            .filter(|(gi, _)| *gi != group)
            .flat_map(|(gi, ws)| ws.iter().map(move |w| (gi, w.as_str())))
            .collect()
    }
}
