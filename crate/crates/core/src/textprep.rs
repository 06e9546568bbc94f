//! Text preprocessing: noise stripping, Arabic-aware normalization,
//! tokenization, stopword removal, light stemming and n-gram generation.
//!
//! The full chain is `strip_noise -> normalize -> tokenize ->
//! remove_stopwords -> stem -> ngrams`. N-grams are built over the surviving
//! (stopword-filtered, stemmed) stream, so a bigram may join two tokens that
//! were separated by a stopword in the raw text.

use std::collections::{BTreeMap, HashSet};
use std::ops::RangeInclusive;
use std::sync::OnceLock;

use regex::Regex;
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

#[derive(Debug, Error)]
pub enum TextprepError {
    #[error("fold table line {line}: expected source<TAB>replacement")]
    BadFoldLine { line: usize },
    #[error("fold table is not idempotent: {source_text:?} maps to {replacement:?}, which folds again")]
    FoldNotIdempotent {
        source_text: String,
        replacement: String,
    },
}

/// Emoji codepoints removed by [`strip_noise`]: Emoticons, Miscellaneous
/// Symbols and Pictographs, Supplemental Symbols and Pictographs, Transport
/// and Map Symbols, regional indicators, VS16 and the zero-width joiner.
pub const EMOJI_RANGES: &[RangeInclusive<char>] = &[
    '\u{1F300}'..='\u{1F5FF}',
    '\u{1F600}'..='\u{1F64F}',
    '\u{1F680}'..='\u{1F6FF}',
    '\u{1F900}'..='\u{1F9FF}',
    '\u{1F1E6}'..='\u{1F1FF}',
    '\u{FE0F}'..='\u{FE0F}',
    '\u{200D}'..='\u{200D}',
];

/// Arabic harakat and related marks, plus tatweel.
pub const ARABIC_DIACRITICS: &[RangeInclusive<char>] =
    &['\u{064B}'..='\u{065F}', '\u{0640}'..='\u{0640}'];

pub const DEFAULT_FOLDS: &[(&str, &str)] = &[
    ("\u{0623}", "\u{0627}"),
    ("\u{0625}", "\u{0627}"),
    ("\u{0622}", "\u{0627}"),
    ("\u{0671}", "\u{0627}"),
    ("\u{0649}", "\u{064A}"),
    ("\u{0629}", "\u{0647}"),
];

pub fn is_emoji(c: char) -> bool {
    EMOJI_RANGES.iter().any(|r| r.contains(&c))
}

pub fn is_arabic_char(c: char) -> bool {
    matches!(c,
        '\u{0600}'..='\u{06FF}'
        | '\u{0750}'..='\u{077F}'
        | '\u{08A0}'..='\u{08FF}'
        | '\u{FB50}'..='\u{FDFF}'
        | '\u{FE70}'..='\u{FEFF}')
}

#[derive(Debug, Clone)]
pub struct NormalizationConfig {
    pub strip_urls: bool,
    pub strip_emoji: bool,
    pub strip_mentions: bool,
    fold_table: BTreeMap<String, String>,
    max_fold_len: usize,
    pub diacritic_ranges: Vec<RangeInclusive<char>>,
}

impl Default for NormalizationConfig {
    fn default() -> Self {
        let table = DEFAULT_FOLDS
            .iter()
            .map(|(s, r)| (s.to_string(), r.to_string()))
            .collect();
        Self::with_fold_table(table).expect("default fold table is idempotent")
    }
}

impl NormalizationConfig {
    pub fn with_fold_table(table: BTreeMap<String, String>) -> Result<Self, TextprepError> {
        let max_fold_len = table.keys().map(|k| k.chars().count()).max().unwrap_or(0);
        let cfg = Self {
            strip_urls: true,
            strip_emoji: true,
            strip_mentions: true,
            fold_table: table.into_iter().filter(|(k, _)| !k.is_empty()).collect(),
            max_fold_len,
            diacritic_ranges: ARABIC_DIACRITICS.to_vec(),
        };
        for replacement in cfg.fold_table.values() {
            if cfg.fold(replacement) != *replacement {
                let source_text = cfg
                    .fold_table
                    .iter()
                    .find(|(_, r)| *r == replacement)
                    .map(|(s, _)| s.clone())
                    .unwrap_or_default();
                return Err(TextprepError::FoldNotIdempotent {
                    source_text,
                    replacement: replacement.clone(),
                });
            }
        }
        Ok(cfg)
    }

    /// Parses a `source<TAB>replacement` table; `#` starts a comment line.
    pub fn parse_fold_table(text: &str) -> Result<BTreeMap<String, String>, TextprepError> {
        let mut table = BTreeMap::new();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (src, dst) = line
                .split_once('\t')
                .ok_or(TextprepError::BadFoldLine { line: idx + 1 })?;
            if src.is_empty() {
                return Err(TextprepError::BadFoldLine { line: idx + 1 });
            }
            table.insert(src.to_string(), dst.to_string());
        }
        Ok(table)
    }

    pub fn fold_table(&self) -> &BTreeMap<String, String> {
        &self.fold_table
    }

    fn is_diacritic(&self, c: char) -> bool {
        self.diacritic_ranges.iter().any(|r| r.contains(&c))
    }

    /// Longest-match replacement scan over the fold table.
    fn fold(&self, text: &str) -> String {
        if self.fold_table.is_empty() {
            return text.to_string();
        }
        let chars: Vec<char> = text.chars().collect();
        let mut out = String::with_capacity(text.len());
        let mut i = 0;
        let mut key = String::new();
        'outer: while i < chars.len() {
            let longest = self.max_fold_len.min(chars.len() - i);
            for len in (1..=longest).rev() {
                key.clear();
                key.extend(&chars[i..i + len]);
                if let Some(rep) = self.fold_table.get(&key) {
                    out.push_str(rep);
                    i += len;
                    continue 'outer;
                }
            }
            out.push(chars[i]);
            i += 1;
        }
        out
    }
}

fn url_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)(?:\b[a-z][a-z0-9+.\-]*://|\bwww\.)\S*").unwrap())
}

fn mention_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"@\w+").unwrap())
}

fn token_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"[\p{L}\p{N}\p{M}]+").unwrap())
}

pub fn collapse_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Removes URLs, emoji and @-mentions, then collapses whitespace runs to a
/// single space and trims.
pub fn strip_noise(text: &str, cfg: &NormalizationConfig) -> String {
    let mut out = std::borrow::Cow::Borrowed(text);
    if cfg.strip_urls {
        out = url_re().replace_all(&out, " ").into_owned().into();
    }
    if cfg.strip_mentions {
        out = mention_re().replace_all(&out, " ").into_owned().into();
    }
    if cfg.strip_emoji {
        out = out.chars().filter(|c| !is_emoji(*c)).collect::<String>().into();
    }
    collapse_whitespace(&out)
}

/// Canonical composition, lowercase, diacritic and tatweel removal, then the
/// fold table. Composition is re-applied after each stage that can expose
/// new composable sequences.
pub fn normalize(text: &str, cfg: &NormalizationConfig) -> String {
    let composed: String = text.nfc().collect();
    let lowered: String = composed.to_lowercase().nfc().collect();
    let stripped: String = lowered
        .chars()
        .filter(|c| !cfg.is_diacritic(*c))
        .nfc()
        .collect();
    cfg.fold(&stripped)
}

/// The text-level stages: noise stripping followed by normalization.
pub fn clean_text(text: &str, cfg: &NormalizationConfig) -> String {
    let normalized = normalize(&strip_noise(text, cfg), cfg);
    // normalization can expose new noise (case-folded URL schemes, joined
    // whitespace), so strip again
    strip_noise(&normalized, cfg)
}

/// Splits on everything that is not a letter, digit or combining mark.
pub fn tokenize(text: &str) -> Vec<String> {
    token_re()
        .find_iter(text)
        .map(|m| m.as_str().to_string())
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct StopwordSet(HashSet<String>);

impl StopwordSet {
    /// One entry per line, `#` comment lines ignored; entries are normalized
    /// with `cfg` so they match normalized tokens.
    pub fn parse(text: &str, cfg: &NormalizationConfig) -> Self {
        Self(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(|l| normalize(l, cfg))
                .filter(|l| !l.is_empty())
                .collect(),
        )
    }

    pub fn default_arabic(cfg: &NormalizationConfig) -> Self {
        Self::parse(include_str!("../data/stopwords_ar.txt"), cfg)
    }

    pub fn default_english(cfg: &NormalizationConfig) -> Self {
        Self::parse(include_str!("../data/stopwords_en.txt"), cfg)
    }

    pub fn union(mut self, other: StopwordSet) -> Self {
        self.0.extend(other.0);
        self
    }

    pub fn contains(&self, token: &str) -> bool {
        self.0.contains(token)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<S: Into<String>> FromIterator<S> for StopwordSet {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Self(iter.into_iter().map(Into::into).collect())
    }
}

pub fn remove_stopwords(tokens: Vec<String>, stopwords: &StopwordSet) -> Vec<String> {
    tokens
        .into_iter()
        .filter(|t| !stopwords.contains(t))
        .collect()
}

// Longest candidates first.
const PREFIXES: &[&str] = &["وال", "فال", "بال", "كال", "ال", "لل", "و"];
const SUFFIXES: &[&str] = &["ها", "ان", "ات", "ون", "ين", "يه", "ية", "ه", "ي"];
const MIN_STEM: usize = 2;

/// Arabic light stemmer: one prefix, then one suffix, each only if at least
/// two letters remain. Tokens without Arabic letters pass through.
pub fn stem_token(token: &str) -> String {
    if !token.chars().any(is_arabic_char) {
        return token.to_string();
    }
    let mut stem = token;
    if let Some(rest) = PREFIXES.iter().find_map(|p| stem.strip_prefix(p)) {
        if rest.chars().count() >= MIN_STEM {
            stem = rest;
        }
    }
    if let Some(rest) = SUFFIXES.iter().find_map(|s| stem.strip_suffix(s)) {
        if rest.chars().count() >= MIN_STEM {
            stem = rest;
        }
    }
    stem.to_string()
}

pub fn stem(tokens: Vec<String>) -> Vec<String> {
    tokens.into_iter().map(|t| stem_token(&t)).collect()
}

/// Consecutive windows of each order joined with '_', lower orders first.
pub fn ngrams(tokens: &[String], orders: &[usize]) -> Vec<String> {
    let mut out = Vec::new();
    for &n in orders {
        if n < 2 || tokens.len() < n {
            continue;
        }
        out.extend(tokens.windows(n).map(|w| w.join("_")));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Language {
    Arabic,
    Other,
}

/// Trusts `lang_hint` when present, otherwise majority vote of Arabic-block
/// letters against other letters.
pub fn detect_language(text: &str, lang_hint: Option<&str>) -> Language {
    if let Some(hint) = lang_hint {
        return if hint.eq_ignore_ascii_case("ar") || hint.to_lowercase().starts_with("ar-") {
            Language::Arabic
        } else {
            Language::Other
        };
    }
    let (arabic, other) = text
        .chars()
        .filter(|c| c.is_alphabetic())
        .fold((0usize, 0usize), |(a, o), c| {
            if is_arabic_char(c) {
                (a + 1, o)
            } else {
                (a, o + 1)
            }
        });
    if arabic > other {
        Language::Arabic
    } else {
        Language::Other
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenStream {
    pub source_id: String,
    pub unigrams: Vec<String>,
    pub ngrams: Vec<String>,
}

impl TokenStream {
    /// Unigrams followed by n-grams.
    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.unigrams
            .iter()
            .chain(self.ngrams.iter())
            .map(String::as_str)
    }
}

/// Owns the shared, immutable inputs of the preprocessing chain.
#[derive(Debug, Clone)]
pub struct Preprocessor {
    pub normalization: NormalizationConfig,
    pub stopwords: StopwordSet,
    pub ngram_orders: Vec<usize>,
}

impl Default for Preprocessor {
    fn default() -> Self {
        let normalization = NormalizationConfig::default();
        let stopwords = StopwordSet::default_arabic(&normalization)
            .union(StopwordSet::default_english(&normalization));
        Self {
            normalization,
            stopwords,
            ngram_orders: vec![2, 3],
        }
    }
}

impl Preprocessor {
    /// Normalized tokens before stopword removal and stemming.
    pub fn surface_tokens(&self, text: &str) -> Vec<String> {
        tokenize(&clean_text(text, &self.normalization))
    }

    pub fn process(&self, source_id: &str, text: &str, lang_hint: Option<&str>) -> TokenStream {
        let cleaned = clean_text(text, &self.normalization);
        let tokens = remove_stopwords(tokenize(&cleaned), &self.stopwords);
        let unigrams = match detect_language(&cleaned, lang_hint) {
            Language::Arabic => stem(tokens),
            Language::Other => tokens,
        };
        let ngrams = ngrams(&unigrams, &self.ngram_orders);
        TokenStream {
            source_id: source_id.to_string(),
            unigrams,
            ngrams,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> NormalizationConfig {
        NormalizationConfig::default()
    }

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn strip_noise_examples() {
        assert_eq!(strip_noise("زيارة الرياض 😀 https://t.co/xyz", &cfg()), "زيارة الرياض");
        assert_eq!(strip_noise("no noise here", &cfg()), "no noise here");
        assert_eq!(strip_noise("see www.example.com now", &cfg()), "see now");
        assert_eq!(strip_noise("hi @user_1 there", &cfg()), "hi there");
        assert_eq!(strip_noise("flag 🇸🇦 family 👨\u{200D}👩\u{200D}👧 ok", &cfg()), "flag family ok");
    }

    #[test]
    fn strip_noise_flags_are_respected() {
        let mut keep = cfg();
        keep.strip_urls = false;
        keep.strip_mentions = false;
        keep.strip_emoji = false;
        assert_eq!(strip_noise("a  @b http://c 😀", &keep), "a @b http://c 😀");
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize("أَحْمَد", &cfg()), "احمد");
        assert_eq!(normalize("Riyadh", &cfg()), "riyadh");
        assert_eq!(normalize("مدرسة", &cfg()), "مدرسه");
        assert_eq!(normalize("على", &cfg()), "علي");
        assert_eq!(normalize("إسلام آمن ٱلله", &cfg()), "اسلام امن الله");
        assert_eq!(normalize("جمـــيل", &cfg()), "جميل");
    }

    #[test]
    fn normalize_composes_decomposed_alef_madda() {
        // alef + combining madda composes to U+0622, then folds
        assert_eq!(normalize("\u{0627}\u{0653}", &cfg()), "\u{0627}");
        assert_eq!(normalize("e\u{0301}", &cfg()), "\u{00E9}");
    }

    #[test]
    fn tatweel_between_base_and_mark_recomposes() {
        let once = normalize("E\u{0640}\u{0301}", &cfg());
        assert_eq!(once, "\u{00E9}");
        assert_eq!(normalize(&once, &cfg()), once);
    }

    #[test]
    fn fold_table_parsing_and_idempotence_check() {
        let table = NormalizationConfig::parse_fold_table("# c\nx\ty\n").unwrap();
        assert!(NormalizationConfig::with_fold_table(table).is_ok());

        let table = NormalizationConfig::parse_fold_table("a\tb\nb\tc\n").unwrap();
        assert!(matches!(
            NormalizationConfig::with_fold_table(table),
            Err(TextprepError::FoldNotIdempotent { .. })
        ));
        assert!(NormalizationConfig::parse_fold_table("nodelimiter").is_err());
    }

    #[test]
    fn multi_codepoint_folds_use_longest_match() {
        let mut table = BTreeMap::new();
        table.insert("ab".to_string(), "x".to_string());
        table.insert("a".to_string(), "y".to_string());
        let cfg = NormalizationConfig::with_fold_table(table).unwrap();
        assert_eq!(normalize("aab", &cfg), "yx");
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("زيارة الرياض"), toks(&["زيارة", "الرياض"]));
        assert_eq!(tokenize("#saudi vision2030!"), toks(&["saudi", "vision2030"]));
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("2030 ... a_b"), toks(&["2030", "a", "b"]));
    }

    #[test]
    fn stopword_examples() {
        let c = cfg();
        let ar = StopwordSet::default_arabic(&c);
        let en = StopwordSet::default_english(&c);
        assert!(ar.len() >= 180, "{}", ar.len());
        assert!(en.len() >= 140, "{}", en.len());
        assert!(ar.contains("في"));
        assert_eq!(remove_stopwords(toks(&["في", "الرياض"]), &ar), toks(&["الرياض"]));
        assert_eq!(
            remove_stopwords(toks(&["riyadh"]), &StopwordSet::default()),
            toks(&["riyadh"])
        );
        assert!(remove_stopwords(toks(&["the", "the", "the"]), &en).is_empty());
    }

    #[test]
    fn stopword_entries_are_normalized() {
        let set = StopwordSet::parse("إلى\n", &cfg());
        assert!(set.contains("الي"));
    }

    #[test]
    fn stem_examples() {
        assert_eq!(stem_token("الرياض"), "رياض");
        assert_eq!(stem_token("riyadh"), "riyadh");
        assert_eq!(stem_token("ال"), "ال");
        assert_eq!(stem_token("والمدارس"), "مدارس");
        assert_eq!(stem_token("المعلمات"), "معلم");
        assert_eq!(stem_token("كتابها"), "كتاب");
        // suffix guard: stripping "ه" would leave one letter
        assert_eq!(stem_token("له"), "له");
    }

    #[test]
    fn ngram_examples() {
        let abc = toks(&["a", "b", "c"]);
        assert_eq!(ngrams(&abc, &[2]), toks(&["a_b", "b_c"]));
        assert_eq!(ngrams(&abc, &[3]), toks(&["a_b_c"]));
        assert!(ngrams(&toks(&["a"]), &[2, 3]).is_empty());
        assert_eq!(ngrams(&abc, &[2, 3]), toks(&["a_b", "b_c", "a_b_c"]));
    }

    #[test]
    fn language_detection() {
        assert_eq!(detect_language("زيارة الرياض today", None), Language::Arabic);
        assert_eq!(detect_language("visit riyadh الرياض", None), Language::Other);
        assert_eq!(detect_language("visit riyadh", Some("ar")), Language::Arabic);
        assert_eq!(detect_language("زيارة", Some("en")), Language::Other);
    }

    #[test]
    fn full_chain() {
        let pre = Preprocessor::default();
        let stream = pre.process("p1", "زيارة إلى الرياض 😀 #Saudi https://t.co/x", None);
        assert_eq!(stream.unigrams, toks(&["زيار", "رياض", "saudi"]));
        assert_eq!(
            stream.ngrams,
            toks(&["زيار_رياض", "رياض_saudi", "زيار_رياض_saudi"])
        );
        assert_eq!(stream.terms().count(), 6);
    }

    #[test]
    fn uppercase_url_scheme_is_stripped_by_the_chain() {
        assert_eq!(clean_text("HTTPS://EXAMPLE.COM/x Hello", &cfg()), "hello");
    }
}
