//! Text normalization, label-leakage filtering, and the label-overlap
//! statistic.
//!
//! "Punctuation/symbols" means Unicode categories P* and S*; "numbers" means
//! Nd. Keywords are lowercased and lose punctuation, digits, and the stop
//! words "and"/"the". Titles only lose punctuation/symbol characters: case,
//! digits, stop words, and word order are preserved.

mod embed;

pub use embed::{embed_tokens, load_embeddings, EmbeddingTable};

use unicode_properties::{GeneralCategory, GeneralCategoryGroup, UnicodeGeneralCategory};

use crate::data::{Dataset, LabelVocabulary};
use crate::error::{Error, Result};

/// Which token sequence of a record a model consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TextSource {
    Keywords,
    Titles,
}

impl TextSource {
    pub fn tokens_of<'a>(&self, rec: &'a crate::data::VideoRecord) -> &'a [String] {
        match self {
            TextSource::Keywords => &rec.keyword_tokens,
            TextSource::Titles => &rec.title_tokens,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "keywords" => Ok(TextSource::Keywords),
            "titles" => Ok(TextSource::Titles),
            _ => Err(Error::invalid(format!(
                "unknown text source `{s}` (expected keywords|titles)"
            ))),
        }
    }
}

fn is_punct_or_symbol(c: char) -> bool {
    matches!(
        c.general_category_group(),
        GeneralCategoryGroup::Punctuation | GeneralCategoryGroup::Symbol
    )
}

fn is_decimal_digit(c: char) -> bool {
    c.general_category() == GeneralCategory::DecimalNumber
}

const KEYWORD_STOP_WORDS: [&str; 2] = ["and", "the"];

/// Keyword normalization: lowercase, strip punctuation/symbols and digits,
/// drop the stop words and any token that becomes empty.
pub fn normalize_keywords<S: AsRef<str>>(raw: &[S]) -> Vec<String> {
    let mut out = Vec::with_capacity(raw.len());
    for token in raw {
        let cleaned: String = token
            .as_ref()
            .to_lowercase()
            .chars()
            .filter(|&c| !is_punct_or_symbol(c) && !is_decimal_digit(c))
            .collect();
        if cleaned.is_empty() || KEYWORD_STOP_WORDS.contains(&cleaned.as_str()) {
            continue;
        }
        out.push(cleaned);
    }
    out
}

/// Title normalization: whitespace-tokenize, strip punctuation/symbol
/// characters in place, keep case/digits/stop words, drop emptied tokens.
pub fn normalize_title(raw: &str) -> Vec<String> {
    raw.split_whitespace()
        .filter_map(|token| {
            let cleaned: String = token.chars().filter(|&c| !is_punct_or_symbol(c)).collect();
            if cleaned.is_empty() {
                None
            } else {
                Some(cleaned)
            }
        })
        .collect()
}

/// Removes tokens that case-insensitively equal any word of any of the
/// video's label names. Survivor order is preserved.
pub fn filter_label_leakage(
    tokens: &[String],
    labels: &[usize],
    vocab: &LabelVocabulary,
) -> Vec<String> {
    let label_words: Vec<String> = labels
        .iter()
        .filter_map(|&l| vocab.name(l))
        .flat_map(|name| name.split_whitespace().map(|w| w.to_lowercase()))
        .collect();
    if label_words.is_empty() {
        return tokens.to_vec();
    }
    tokens
        .iter()
        .filter(|t| !label_words.iter().any(|w| *w == t.to_lowercase()))
        .cloned()
        .collect()
}

/// Mean over videos of the fraction of tokens that match a word of that
/// video's own labels. Videos with no tokens contribute 0.
pub fn label_overlap_ratio(ds: &Dataset, source: TextSource) -> Result<f64> {
    if ds.is_empty() {
        return Err(Error::invalid("label_overlap_ratio: empty dataset"));
    }
    let mut sum = 0.0;
    for rec in &ds.records {
        let tokens = source.tokens_of(rec);
        if tokens.is_empty() {
            continue;
        }
        let kept = filter_label_leakage(tokens, &rec.labels, &ds.vocab);
        let matched = tokens.len() - kept.len();
        sum += matched as f64 / tokens.len() as f64;
    }
    Ok(sum / ds.len() as f64)
}
