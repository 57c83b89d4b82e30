//! Mixed Mandarin/English lyrics to the shared stress-free CMU phone set.
//!
//! English words are looked up in CMUdict. Han characters are read as
//! toneless Pinyin, split into initial and final, and each half is mapped
//! to CMU phones. Every phone carries a language token (`1` Mandarin,
//! `0` English).

use std::collections::{HashMap, HashSet};
use std::io::BufRead;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The 39 stress-free CMU phones.
pub const CMU_PHONES: [&str; 39] = [
    "AA", "AE", "AH", "AO", "AW", "AY", "B", "CH", "D", "DH", "EH", "ER", "EY", "F", "G", "HH",
    "IH", "IY", "JH", "K", "L", "M", "N", "NG", "OW", "OY", "P", "R", "S", "SH", "T", "TH", "UH",
    "UW", "V", "W", "Y", "Z", "ZH",
];

const CMU_VOWELS: [&str; 15] = [
    "AA", "AE", "AH", "AO", "AW", "AY", "EH", "ER", "EY", "IH", "IY", "OW", "OY", "UH", "UW",
];

/// Pinyin initials, two-letter ones first so the first prefix hit is the longest.
pub const PINYIN_INITIALS: [&str; 23] = [
    "zh", "ch", "sh", "b", "p", "m", "f", "d", "t", "n", "l", "g", "k", "h", "j", "q", "x", "r",
    "z", "c", "s", "y", "w",
];

const BUNDLED_CMUDICT: &str = include_str!("../data/cmudict.dict");
const BUNDLED_PINYIN_MAP: &str = include_str!("../data/pinyin2cmu.txt");
const BUNDLED_HANZI: &str = include_str!("../data/hanzi_pinyin.txt");

pub fn is_cmu_phone(phone: &str) -> bool {
    CMU_PHONES.contains(&phone)
}

pub fn is_cmu_vowel(phone: &str) -> bool {
    CMU_VOWELS.contains(&phone)
}

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: `{phone}` is not a CMU phone")]
    UnknownPhone { line: usize, phone: String },
    #[error("unsupported character {ch:?} (U+{code:04X}) in lyrics", code = *.ch as u32)]
    UnsupportedChar { ch: char },
    #[error("invalid pinyin syllable `{0}`")]
    InvalidSyllable(String),
    #[error("out-of-vocabulary {language:?} token `{token}`")]
    Oov { token: String, language: Language },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, LexiconError>;

/// Language of a lyric unit. The discriminant is the language token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Language {
    English = 0,
    Mandarin = 1,
}

impl Language {
    pub fn token(self) -> u8 {
        self as u8
    }

    pub fn from_token(token: u8) -> Option<Self> {
        match token {
            0 => Some(Language::English),
            1 => Some(Language::Mandarin),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LyricToken {
    pub surface: String,
    pub language: Language,
}

impl LyricToken {
    pub fn english(word: &str) -> Self {
        LyricToken { surface: word.to_string(), language: Language::English }
    }

    pub fn mandarin(ch: char) -> Self {
        LyricToken { surface: ch.to_string(), language: Language::Mandarin }
    }
}

/// Parallel phone and language-token sequences.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhonemeSeq {
    pub phonemes: Vec<String>,
    pub language_tokens: Vec<u8>,
}

impl PhonemeSeq {
    pub fn len(&self) -> usize {
        self.phonemes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phonemes.is_empty()
    }

    fn push_all(&mut self, phones: &[String], language: Language) {
        for p in phones {
            self.phonemes.push(p.clone());
            self.language_tokens.push(language.token());
        }
    }

    pub fn extend(&mut self, other: PhonemeSeq) {
        self.phonemes.extend(other.phonemes);
        self.language_tokens.extend(other.language_tokens);
    }
}

#[derive(Debug, Clone)]
pub struct Lexicon {
    english_entries: HashMap<String, Vec<String>>,
    pinyin_entries: HashMap<String, Vec<String>>,
    hanzi_readings: HashMap<char, String>,
    initials_table: Vec<String>,
}

impl Default for Lexicon {
    fn default() -> Self {
        Lexicon {
            english_entries: HashMap::new(),
            pinyin_entries: HashMap::new(),
            hanzi_readings: HashMap::new(),
            initials_table: PINYIN_INITIALS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

fn strip_stress(phone: &str) -> &str {
    phone.trim_end_matches(|c: char| c.is_ascii_digit())
}

fn checked_phones<'a>(
    line_no: usize,
    fields: impl Iterator<Item = &'a str>,
) -> Result<Vec<String>> {
    fields
        .map(|raw| {
            let phone = strip_stress(raw).to_ascii_uppercase();
            if is_cmu_phone(&phone) {
                Ok(phone)
            } else {
                Err(LexiconError::UnknownPhone { line: line_no, phone: raw.to_string() })
            }
        })
        .collect()
}

impl Lexicon {
    /// An empty lexicon with the standard Pinyin initials table.
    pub fn new() -> Self {
        Self::default()
    }

    /// Lexicon built from the bundled CMUdict, Pinyin map and Hanzi readings.
    pub fn bundled() -> &'static Lexicon {
        static BUNDLED: OnceLock<Lexicon> = OnceLock::new();
        BUNDLED.get_or_init(|| {
            let mut lex = Lexicon::load_cmu_dict(BUNDLED_CMUDICT.as_bytes())
                .expect("bundled cmudict parses");
            lex.merge(
                Lexicon::load_pinyin_map(BUNDLED_PINYIN_MAP.as_bytes())
                    .expect("bundled pinyin map parses"),
            );
            lex.merge(
                Lexicon::load_hanzi_table(BUNDLED_HANZI.as_bytes())
                    .expect("bundled hanzi table parses"),
            );
            lex
        })
    }

    /// Parse CMUdict text (`WORD  PH1 PH2 ...`, `;;;` comments).
    ///
    /// Stress digits are dropped and only the first pronunciation of a word
    /// is kept; `WORD(2)` variants are skipped.
    pub fn load_cmu_dict<R: BufRead>(source: R) -> Result<Lexicon> {
        let mut lex = Lexicon::new();
        for (idx, line) in source.lines().enumerate() {
            let line = line?;
            let line_no = idx + 1;
            // the newer cmudict.dict format carries trailing `# ...` notes
            let body = line.split(" #").next().unwrap_or("").trim();
            if body.is_empty() || body.starts_with(";;;") {
                continue;
            }
            let mut fields = body.split_whitespace();
            let word = fields.next().unwrap_or_default();
            let phones = checked_phones(line_no, fields)?;
            if phones.is_empty() {
                return Err(LexiconError::Parse {
                    line: line_no,
                    message: format!("entry `{word}` has no phonemes"),
                });
            }
            if word.ends_with(')') && word.contains('(') {
                continue;
            }
            lex.english_entries.entry(word.to_uppercase()).or_insert(phones);
        }
        Ok(lex)
    }

    /// Parse a two-column `pinyin PH1 PH2 ...` table. Lines starting with
    /// `#` are comments. A repeated key replaces the earlier entry.
    pub fn load_pinyin_map<R: BufRead>(source: R) -> Result<Lexicon> {
        let mut lex = Lexicon::new();
        for (idx, line) in source.lines().enumerate() {
            let line = line?;
            let line_no = idx + 1;
            let body = line.trim();
            if body.is_empty() || body.starts_with('#') {
                continue;
            }
            let mut fields = body.split_whitespace();
            let key = fields.next().unwrap_or_default().to_lowercase();
            let phones = checked_phones(line_no, fields)?;
            if phones.is_empty() {
                return Err(LexiconError::Parse {
                    line: line_no,
                    message: format!("pinyin `{key}` has an empty phoneme column"),
                });
            }
            if lex.pinyin_entries.insert(key.clone(), phones).is_some() {
                log::warn!("pinyin map line {line_no}: duplicate key `{key}`, keeping the last entry");
            }
        }
        Ok(lex)
    }

    /// Parse a `character pinyin` table. Tone digits on the reading are dropped.
    pub fn load_hanzi_table<R: BufRead>(source: R) -> Result<Lexicon> {
        let mut lex = Lexicon::new();
        for (idx, line) in source.lines().enumerate() {
            let line = line?;
            let line_no = idx + 1;
            let body = line.trim_start_matches('\u{feff}').trim();
            if body.is_empty() || body.starts_with('#') {
                continue;
            }
            let mut fields = body.split_whitespace();
            let (Some(hanzi), Some(reading)) = (fields.next(), fields.next()) else {
                return Err(LexiconError::Parse {
                    line: line_no,
                    message: "expected `character pinyin`".into(),
                });
            };
            let mut chars = hanzi.chars();
            let (Some(ch), None) = (chars.next(), chars.next()) else {
                return Err(LexiconError::Parse {
                    line: line_no,
                    message: format!("`{hanzi}` is not a single character"),
                });
            };
            let reading = reading.trim_end_matches(|c: char| c.is_ascii_digit()).to_lowercase();
            lex.hanzi_readings.insert(ch, reading);
        }
        Ok(lex)
    }

    /// Fold another fragment into this one; entries from `other` win.
    pub fn merge(&mut self, other: Lexicon) {
        self.english_entries.extend(other.english_entries);
        self.pinyin_entries.extend(other.pinyin_entries);
        self.hanzi_readings.extend(other.hanzi_readings);
    }

    pub fn english(&self, word: &str) -> Option<&[String]> {
        self.english_entries.get(&word.to_uppercase()).map(Vec::as_slice)
    }

    /// CMU expansion of a Pinyin unit (an initial, a final, or a whole syllable).
    pub fn pinyin_unit(&self, unit: &str) -> Option<&[String]> {
        self.pinyin_entries.get(unit).map(Vec::as_slice)
    }

    pub fn reading(&self, ch: char) -> Option<&str> {
        self.hanzi_readings.get(&ch).map(String::as_str)
    }

    pub fn is_initial(&self, unit: &str) -> bool {
        self.initials_table.iter().any(|i| i == unit)
    }

    pub fn initials_table(&self) -> &[String] {
        &self.initials_table
    }

    pub fn english_len(&self) -> usize {
        self.english_entries.len()
    }

    /// Distinct readings of the Hanzi table, sorted.
    pub fn syllable_inventory(&self) -> Vec<String> {
        let set: HashSet<&String> = self.hanzi_readings.values().collect();
        let mut out: Vec<String> = set.into_iter().cloned().collect();
        out.sort();
        out
    }

    /// Phones reachable from the Pinyin map; the Mandarin phone inventory.
    pub fn mandarin_inventory(&self) -> HashSet<String> {
        self.pinyin_entries.values().flatten().cloned().collect()
    }

    /// Split a toneless syllable at its longest initial.
    pub fn split_pinyin(&self, syllable: &str) -> Result<(String, String)> {
        split_with(&self.initials_table, syllable)
    }

    /// Initial (if any) and final units of a syllable, with the final in the
    /// table's spelling: `u` after j/q/x/y is written `v` (`yuan` → y + van).
    pub fn syllable_units(&self, syllable: &str) -> Result<Vec<String>> {
        let (initial, fin) = self.split_pinyin(syllable)?;
        let fin = match initial.as_str() {
            "j" | "q" | "x" | "y" if fin.starts_with('u') => format!("v{}", &fin[1..]),
            _ => fin,
        };
        let mut units = Vec::with_capacity(2);
        if !initial.is_empty() {
            units.push(initial);
        }
        units.push(fin);
        Ok(units)
    }

    /// CMU phones of a toneless syllable. A whole-syllable entry in the
    /// Pinyin map takes precedence over initial + final composition.
    pub fn syllable_phones(&self, syllable: &str) -> Result<Vec<String>> {
        if let Some(phones) = self.pinyin_entries.get(syllable) {
            return Ok(phones.clone());
        }
        let oov = || LexiconError::Oov { token: syllable.to_string(), language: Language::Mandarin };
        let units = self.syllable_units(syllable).map_err(|_| oov())?;
        let mut phones = Vec::new();
        for unit in &units {
            phones.extend_from_slice(self.pinyin_entries.get(unit).ok_or_else(oov)?);
        }
        Ok(phones)
    }

    /// CMU phones of one lyric token.
    pub fn token_phones(&self, token: &LyricToken) -> Result<Vec<String>> {
        let oov = || LexiconError::Oov { token: token.surface.clone(), language: token.language };
        match token.language {
            Language::English => self.english(&token.surface).map(<[String]>::to_vec).ok_or_else(oov),
            Language::Mandarin => {
                let mut chars = token.surface.chars();
                let (Some(ch), None) = (chars.next(), chars.next()) else {
                    return Err(oov());
                };
                let reading = self.reading(ch).ok_or_else(oov)?;
                self.syllable_phones(reading).map_err(|_| oov())
            }
        }
    }
}

fn split_with(initials: &[String], syllable: &str) -> Result<(String, String)> {
    let syl = syllable.trim().to_lowercase();
    if syl.is_empty() || !syl.chars().all(|c| c.is_ascii_lowercase()) {
        return Err(LexiconError::InvalidSyllable(syllable.to_string()));
    }
    let initial = initials
        .iter()
        .filter(|i| syl.starts_with(i.as_str()))
        .max_by_key(|i| i.len())
        .cloned()
        .unwrap_or_default();
    let fin = syl[initial.len()..].to_string();
    if fin.is_empty() {
        return Err(LexiconError::InvalidSyllable(syllable.to_string()));
    }
    Ok((initial, fin))
}

pub fn is_han(ch: char) -> bool {
    matches!(ch as u32,
        0x4E00..=0x9FFF | 0x3400..=0x4DBF | 0xF900..=0xFAFF | 0x20000..=0x2A6DF | 0x2A700..=0x2EBEF)
}

fn is_latin_letter(ch: char) -> bool {
    ch.is_alphabetic() && (ch as u32) <= 0x024F
}

fn is_punctuation(ch: char) -> bool {
    ch.is_ascii_punctuation()
        || matches!(ch as u32, 0x2000..=0x206F | 0x3000..=0x303F | 0xFF00..=0xFF65 | 0x00A1..=0x00BF)
}

/// Split mixed lyrics into one token per Han character and one per Latin
/// word. Whitespace, punctuation and digits separate tokens and are dropped;
/// an apostrophe between letters stays inside the word (`don't`).
pub fn segment_lyrics(text: &str) -> Result<Vec<LyricToken>> {
    let mut tokens = Vec::new();
    let mut word = String::new();
    let chars: Vec<char> = text.chars().collect();
    let flush = |word: &mut String, tokens: &mut Vec<LyricToken>| {
        if !word.is_empty() {
            tokens.push(LyricToken::english(word));
            word.clear();
        }
    };
    for (i, &ch) in chars.iter().enumerate() {
        if is_latin_letter(ch) {
            word.push(ch);
        } else if ch == '\''
            && !word.is_empty()
            && chars.get(i + 1).is_some_and(|&n| is_latin_letter(n))
        {
            word.push(ch);
        } else if is_han(ch) {
            flush(&mut word, &mut tokens);
            tokens.push(LyricToken::mandarin(ch));
        } else if ch.is_whitespace() || is_punctuation(ch) {
            flush(&mut word, &mut tokens);
        } else if ch.is_numeric() {
            log::warn!("dropping digit {ch:?} from lyrics; numerals are not normalized");
            flush(&mut word, &mut tokens);
        } else {
            return Err(LexiconError::UnsupportedChar { ch });
        }
    }
    flush(&mut word, &mut tokens);
    Ok(tokens)
}

/// Phone and language-token sequences for a token list.
pub fn g2p(tokens: &[LyricToken], lexicon: &Lexicon) -> Result<PhonemeSeq> {
    let mut seq = PhonemeSeq::default();
    for token in tokens {
        let phones = lexicon.token_phones(token)?;
        seq.push_all(&phones, token.language);
    }
    Ok(seq)
}

/// Segment and transcode in one step.
pub fn g2p_text(text: &str, lexicon: &Lexicon) -> Result<PhonemeSeq> {
    g2p(&segment_lyrics(text)?, lexicon)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn phones(list: &str) -> Vec<String> {
        list.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn cmu_entries_lose_stress() {
        let lex = Lexicon::load_cmu_dict("CAT  K AE1 T\nTOTAL  T OW1 T AH0 L\n".as_bytes()).unwrap();
        assert_eq!(lex.english("cat").unwrap(), phones("K AE T"));
        assert_eq!(lex.english("TOTAL").unwrap(), phones("T OW T AH L"));
    }

    #[test]
    fn cmu_comments_variants_and_empty() {
        let src = ";;; comment\nREAD  R IY1 D\nREAD(2)  R EH1 D\n";
        let lex = Lexicon::load_cmu_dict(src.as_bytes()).unwrap();
        assert_eq!(lex.english("read").unwrap(), phones("R IY D"));
        assert_eq!(Lexicon::load_cmu_dict("".as_bytes()).unwrap().english_len(), 0);
    }

    #[test]
    fn cmu_line_without_phones_reports_line() {
        let err = Lexicon::load_cmu_dict("CAT  K AE1 T\nDOG\n".as_bytes()).unwrap_err();
        assert!(matches!(err, LexiconError::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn pinyin_map_entries() {
        let src = "rang R AE NG\nzhui JH UW IY\nnuan N UW AE N\n";
        let lex = Lexicon::load_pinyin_map(src.as_bytes()).unwrap();
        assert_eq!(lex.pinyin_unit("rang").unwrap(), phones("R AE NG"));
        assert_eq!(lex.pinyin_unit("zhui").unwrap(), phones("JH UW IY"));
        assert_eq!(lex.pinyin_unit("nuan").unwrap(), phones("N UW AE N"));
    }

    #[test]
    fn pinyin_map_duplicate_last_wins_and_empty_column_fails() {
        let lex = Lexicon::load_pinyin_map("a AA\na AH\n".as_bytes()).unwrap();
        assert_eq!(lex.pinyin_unit("a").unwrap(), phones("AH"));
        let err = Lexicon::load_pinyin_map("a AA\nbad\n".as_bytes()).unwrap_err();
        assert!(matches!(err, LexiconError::Parse { line: 2, .. }));
    }

    #[test]
    fn segment_mixed_lyrics() {
        let toks = segment_lyrics("我和你 from one world").unwrap();
        let got: Vec<(&str, Language)> = toks.iter().map(|t| (t.surface.as_str(), t.language)).collect();
        use Language::*;
        assert_eq!(
            got,
            vec![
                ("我", Mandarin),
                ("和", Mandarin),
                ("你", Mandarin),
                ("from", English),
                ("one", English),
                ("world", English)
            ]
        );
        assert!(segment_lyrics("").unwrap().is_empty());
        assert_eq!(segment_lyrics("hello").unwrap(), vec![LyricToken::english("hello")]);
    }

    #[test]
    fn segment_keeps_contractions_and_drops_punctuation() {
        let toks = segment_lyrics("Don't，走!").unwrap();
        assert_eq!(toks, vec![LyricToken::english("Don't"), LyricToken::mandarin('走')]);
    }

    #[test]
    fn segment_rejects_other_scripts() {
        let err = segment_lyrics("hi ひ").unwrap_err();
        assert!(matches!(err, LexiconError::UnsupportedChar { ch: 'ひ' }));
    }

    #[test]
    fn split_pinyin_examples() {
        let lex = Lexicon::new();
        assert_eq!(lex.split_pinyin("zhui").unwrap(), ("zh".into(), "ui".into()));
        assert_eq!(lex.split_pinyin("an").unwrap(), ("".into(), "an".into()));
        assert_eq!(lex.split_pinyin("cun").unwrap(), ("c".into(), "un".into()));
        assert_eq!(lex.split_pinyin("shuang").unwrap(), ("sh".into(), "uang".into()));
        assert!(matches!(lex.split_pinyin("zh"), Err(LexiconError::InvalidSyllable(_))));
        assert!(lex.split_pinyin("").is_err());
    }

    #[test]
    fn umlaut_finals_after_jqxy() {
        let lex = Lexicon::new();
        assert_eq!(lex.syllable_units("yuan").unwrap(), vec!["y", "van"]);
        assert_eq!(lex.syllable_units("xue").unwrap(), vec!["x", "ve"]);
        assert_eq!(lex.syllable_units("lu").unwrap(), vec!["l", "u"]);
    }

    #[test]
    fn g2p_wo() {
        let lex = Lexicon::bundled();
        let seq = g2p(&[LyricToken::mandarin('我')], lex).unwrap();
        assert_eq!(seq.phonemes, phones("W AO"));
        assert_eq!(seq.language_tokens, vec![1, 1]);
        assert!(g2p(&[], lex).unwrap().is_empty());
    }

    #[test]
    fn g2p_oov_is_an_error() {
        let lex = Lexicon::bundled();
        let err = g2p(&[LyricToken::english("zzzq")], lex).unwrap_err();
        match err {
            LexiconError::Oov { token, language } => {
                assert_eq!(token, "zzzq");
                assert_eq!(language, Language::English);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn bundled_tables_stay_inside_cmu_set() {
        let lex = Lexicon::bundled();
        assert!(lex.english_len() > 100_000);
        for phones in lex.english_entries.values().chain(lex.pinyin_entries.values()) {
            assert!(!phones.is_empty());
            assert!(phones.iter().all(|p| is_cmu_phone(p)), "{phones:?}");
        }
    }

    #[test]
    fn every_bundled_syllable_resolves_and_round_trips() {
        let lex = Lexicon::bundled();
        let inventory = lex.syllable_inventory();
        assert!(inventory.len() > 350);
        for syl in &inventory {
            let phones = lex.syllable_phones(syl).unwrap();
            assert!(!phones.is_empty(), "{syl}");
            if let Ok((initial, fin)) = lex.split_pinyin(syl) {
                assert_eq!(format!("{initial}{fin}"), *syl);
                assert_eq!(lex.split_pinyin(&format!("{initial}{fin}")).unwrap(), (initial, fin));
            } else {
                // bare nasal readings such as 嗯 → n resolve as whole-syllable entries
                assert!(lex.pinyin_unit(syl).is_some(), "{syl}");
            }
        }
    }
}
