//! Tokenizer, surface features, rule-based POS counts and lexicon sentiment.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const BUNDLED_STOPWORDS: &str = include_str!("../data/stopwords.txt");
const BUNDLED_SENTIMENT: &str = include_str!("../data/sentiment.csv");
const BUNDLED_POS_LEXICON: &str = include_str!("../data/pos_lexicon.tsv");

pub const WH_WORDS: [&str; 9] = [
    "who", "what", "when", "where", "why", "which", "whom", "whose", "how",
];

pub const ALLURING_PHRASES: [&str; 6] = [
    "click here",
    "exclusive",
    "won't believe",
    "happens next",
    "don't want",
    "you know",
];

/// Penn Treebank tag set without punctuation tags.
pub const PENN_TAGS: [&str; 36] = [
    "CC", "CD", "DT", "EX", "FW", "IN", "JJ", "JJR", "JJS", "LS", "MD", "NN", "NNS", "NNP",
    "NNPS", "PDT", "POS", "PRP", "PRP$", "RB", "RBR", "RBS", "RP", "SYM", "TO", "UH", "VB",
    "VBD", "VBG", "VBN", "VBP", "VBZ", "WDT", "WP", "WP$", "WRB",
];

const NEGATORS: [&str; 3] = ["not", "no", "never"];

/// ASCII punctuation plus the typographic quotes, dashes and ellipsis common in
/// news copy.
pub fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '\u{2018}' | '\u{2019}' | '\u{201C}' | '\u{201D}' | '\u{2026}' | '\u{2013}' | '\u{2014}'
                | '\u{00AB}' | '\u{00BB}'
        )
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    /// Lowercased form, used for every lexicon lookup.
    pub text: String,
    /// Surface form as it appeared in the input.
    pub original: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenSeq {
    tokens: Vec<Token>,
}

impl TokenSeq {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Token> {
        self.tokens.iter()
    }

    /// Lowercased token texts.
    pub fn texts(&self) -> impl Iterator<Item = &str> + '_ {
        self.tokens.iter().map(|t| t.text.as_str())
    }

    pub fn to_strings(&self) -> Vec<String> {
        self.texts().map(str::to_string).collect()
    }
}

impl<'a> IntoIterator for &'a TokenSeq {
    type Item = &'a Token;
    type IntoIter = std::slice::Iter<'a, Token>;

    fn into_iter(self) -> Self::IntoIter {
        self.tokens.iter()
    }
}

impl<S: AsRef<str>> FromIterator<S> for TokenSeq {
    /// Builds a sequence from already-split tokens (no punctuation splitting).
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        let tokens = iter
            .into_iter()
            .filter(|s| !s.as_ref().is_empty())
            .map(|s| {
                let s = s.as_ref();
                Token {
                    text: s.to_lowercase(),
                    original: s.to_string(),
                }
            })
            .collect();
        TokenSeq { tokens }
    }
}

/// Whitespace split, then leading and trailing punctuation peeled off into
/// single-character tokens. A `#` or `@` directly followed by a
/// non-punctuation character stays attached (hashtags, mentions).
pub fn tokenize(text: &str) -> TokenSeq {
    let mut tokens = Vec::new();
    let mut push = |s: &str| {
        tokens.push(Token {
            text: s.to_lowercase(),
            original: s.to_string(),
        })
    };

    for chunk in text.split_whitespace() {
        let chars: Vec<(usize, char)> = chunk.char_indices().collect();
        let mut lo = 0;
        while lo < chars.len() && is_punct(chars[lo].1) {
            let c = chars[lo].1;
            let prefix = (c == '#' || c == '@')
                && chars.get(lo + 1).is_some_and(|&(_, n)| !is_punct(n));
            if prefix {
                break;
            }
            push(&c.to_string());
            lo += 1;
        }
        let mut hi = chars.len();
        while hi > lo && is_punct(chars[hi - 1].1) {
            hi -= 1;
        }
        if hi > lo {
            let start = chars[lo].0;
            let end = chars.get(hi).map_or(chunk.len(), |&(b, _)| b);
            push(&chunk[start..end]);
        }
        for &(_, c) in &chars[hi..] {
            push(&c.to_string());
        }
    }
    TokenSeq { tokens }
}

#[derive(Debug, Clone)]
pub struct StopWords(HashSet<String>);

impl StopWords {
    pub fn bundled() -> Self {
        Self::from_text(BUNDLED_STOPWORDS)
    }

    /// Newline-delimited word list.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::from_text(&text))
    }

    pub fn from_text(text: &str) -> Self {
        StopWords(
            text.lines()
                .map(|l| l.trim().to_lowercase())
                .filter(|l| !l.is_empty())
                .collect(),
        )
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SurfaceFeatures {
    pub stopword_count: usize,
    pub unique_punctuation_count: usize,
    pub has_digits: u8,
    pub has_wh_word: u8,
    pub has_alluring_phrase: u8,
}

/// `tokens` must be `tokenize(text)`.
pub fn surface_features(text: &str, tokens: &TokenSeq, stopwords: &StopWords) -> SurfaceFeatures {
    let stopword_count = tokens.texts().filter(|t| stopwords.contains(t)).count();
    let unique_punctuation_count = text
        .chars()
        .filter(|&c| is_punct(c))
        .collect::<HashSet<_>>()
        .len();
    let has_digits = text.chars().any(|c| c.is_ascii_digit());
    let has_wh_word = tokens.texts().any(|t| WH_WORDS.contains(&t));
    let lowered = text.to_lowercase().replace('\u{2019}', "'");
    let has_alluring_phrase = ALLURING_PHRASES.iter().any(|p| lowered.contains(p));
    SurfaceFeatures {
        stopword_count,
        unique_punctuation_count,
        has_digits: has_digits as u8,
        has_wh_word: has_wh_word as u8,
        has_alluring_phrase: has_alluring_phrase as u8,
    }
}

/// Lexicon lookup with suffix and shape fallbacks.
///
/// Tags are counts-only features, so a tagger that is right on closed-class
/// words and common inflections is enough; it is not a trained model.
#[derive(Debug, Clone)]
pub struct PosTagger {
    lexicon: HashMap<String, usize>,
    tagset: Vec<String>,
    fallback: FallbackTags,
}

#[derive(Debug, Clone, Copy)]
struct FallbackTags {
    cd: usize,
    vbg: usize,
    rb: usize,
    vbd: usize,
    nns: usize,
    nnp: usize,
    nn: usize,
}

impl PosTagger {
    /// Penn-36 tag set with the bundled lexicon.
    pub fn bundled() -> Self {
        Self::from_tsv(BUNDLED_POS_LEXICON, &PENN_TAGS).expect("bundled POS lexicon is valid")
    }

    pub fn load(path: impl AsRef<Path>, tagset: &[&str]) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_tsv(&text, tagset)
    }

    /// `word<TAB>tag` lines. Every tag used, including the fallback tags,
    /// must be in `tagset`.
    pub fn from_tsv(text: &str, tagset: &[&str]) -> Result<Self> {
        let index: HashMap<&str, usize> = tagset.iter().enumerate().map(|(i, t)| (*t, i)).collect();
        if index.len() != tagset.len() {
            return Err(Error::invalid("tag set has duplicate tags"));
        }
        let tag = |t: &str| {
            index
                .get(t)
                .copied()
                .ok_or_else(|| Error::invalid(format!("tag {t:?} is not in the tag set")))
        };
        let fallback = FallbackTags {
            cd: tag("CD")?,
            vbg: tag("VBG")?,
            rb: tag("RB")?,
            vbd: tag("VBD")?,
            nns: tag("NNS")?,
            nnp: tag("NNP")?,
            nn: tag("NN")?,
        };
        let mut lexicon = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (word, t) = line.split_once('\t').ok_or_else(|| Error::Parse {
                path: "<pos lexicon>".into(),
                line: i + 1,
                message: "expected word<TAB>tag".into(),
            })?;
            lexicon.insert(word.to_lowercase(), tag(t.trim())?);
        }
        Ok(PosTagger {
            lexicon,
            tagset: tagset.iter().map(|t| t.to_string()).collect(),
            fallback,
        })
    }

    pub fn tagset(&self) -> &[String] {
        &self.tagset
    }

    fn tag_index(&self, tok: &Token) -> usize {
        if let Some(&t) = self.lexicon.get(&tok.text) {
            return t;
        }
        let w = tok.text.as_str();
        let f = &self.fallback;
        if w.chars().all(|c| c.is_ascii_digit()) {
            f.cd
        } else if w.ends_with("ing") {
            f.vbg
        } else if w.ends_with("ly") {
            f.rb
        } else if w.ends_with("ed") {
            f.vbd
        } else if w.ends_with('s') && w.chars().count() > 3 {
            f.nns
        } else if tok.original.chars().next().is_some_and(char::is_uppercase) {
            f.nnp
        } else {
            f.nn
        }
    }

    pub fn tag<'a>(&'a self, tok: &Token) -> &'a str {
        &self.tagset[self.tag_index(tok)]
    }

    /// Per-tag counts in tag-set order; sums to `tokens.len()`.
    pub fn pos_counts(&self, tokens: &TokenSeq) -> PosCounts {
        let mut counts = vec![0usize; self.tagset.len()];
        for tok in tokens {
            counts[self.tag_index(tok)] += 1;
        }
        PosCounts { counts }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PosCounts {
    pub counts: Vec<usize>,
}

impl PosCounts {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn get(&self, tagger: &PosTagger, tag: &str) -> Option<usize> {
        tagger
            .tagset()
            .iter()
            .position(|t| t == tag)
            .map(|i| self.counts[i])
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SentimentScore {
    pub polarity: f64,
    pub subjectivity: f64,
}

#[derive(Debug, Clone, Default)]
pub struct SentimentLexicon {
    entries: HashMap<String, (f64, f64)>,
}

impl SentimentLexicon {
    pub fn bundled() -> Self {
        Self::from_csv(BUNDLED_SENTIMENT).expect("bundled sentiment lexicon is valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text)
    }

    /// `word,polarity,subjectivity` rows; a header row with that text is skipped.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut entries = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (i == 0 && line.starts_with("word,")) {
                continue;
            }
            let bad = |message: String| Error::Parse {
                path: "<sentiment lexicon>".into(),
                line: i + 1,
                message,
            };
            let mut parts = line.split(',');
            let (Some(word), Some(p), Some(s), None) =
                (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(bad("expected word,polarity,subjectivity".into()));
            };
            let p: f64 = p.trim().parse().map_err(|e| bad(format!("polarity: {e}")))?;
            let s: f64 = s.trim().parse().map_err(|e| bad(format!("subjectivity: {e}")))?;
            if !(-1.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&s) {
                return Err(bad(format!("scores out of range: {p}, {s}")));
            }
            entries.insert(word.trim().to_lowercase(), (p, s));
        }
        Ok(SentimentLexicon { entries })
    }

    pub fn insert(&mut self, word: &str, polarity: f64, subjectivity: f64) {
        self.entries.insert(word.to_lowercase(), (polarity, subjectivity));
    }

    pub fn get(&self, word: &str) -> Option<(f64, f64)> {
        self.entries.get(word).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn is_negator(word: &str) -> bool {
    NEGATORS.contains(&word) || word.ends_with("n't")
}

/// Mean polarity and subjectivity over lexicon hits. A negator in the two
/// preceding tokens scales that hit's polarity by -0.5.
pub fn sentiment(tokens: &TokenSeq, lexicon: &SentimentLexicon) -> SentimentScore {
    let words: Vec<&str> = tokens.texts().collect();
    let mut pol = 0.0;
    let mut subj = 0.0;
    let mut hits = 0usize;
    for (i, w) in words.iter().enumerate() {
        let Some((mut p, s)) = lexicon.get(w) else {
            continue;
        };
        if words[i.saturating_sub(2)..i].iter().any(|w| is_negator(w)) {
            p = (p * -0.5).clamp(-1.0, 1.0);
        }
        pol += p;
        subj += s;
        hits += 1;
    }
    if hits == 0 {
        return SentimentScore::default();
    }
    SentimentScore {
        polarity: (pol / hits as f64).clamp(-1.0, 1.0),
        subjectivity: (subj / hits as f64).clamp(0.0, 1.0),
    }
}

/// Everything the text features need besides embeddings.
#[derive(Debug, Clone)]
pub struct NlpResources {
    pub stopwords: StopWords,
    pub tagger: PosTagger,
    pub lexicon: SentimentLexicon,
}

impl NlpResources {
    pub fn bundled() -> Self {
        NlpResources {
            stopwords: StopWords::bundled(),
            tagger: PosTagger::bundled(),
            lexicon: SentimentLexicon::bundled(),
        }
    }
}
