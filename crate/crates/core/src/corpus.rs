//! Documents, text fragments and tokens.
//!
//! Every position in this crate is a Unicode scalar index into a
//! [`Document`]'s text, never a byte offset. Fragments are closed intervals
//! `[b, e]`, so a fragment always holds at least one symbol.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CorpusError {
    #[error("invalid UTF-8 at byte offset {offset}")]
    InvalidUtf8 { offset: usize },
    #[error("fragment [{b}, {e}] is outside document of length {len}")]
    OutOfBounds { b: usize, e: usize, len: usize },
    #[error("fragments belong to different documents ({left} vs {right})")]
    DocumentMismatch { left: DocId, right: DocId },
}

/// Opaque document identifier. Cheap to clone.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DocId(Arc<str>);

impl DocId {
    pub fn new(id: impl AsRef<str>) -> Self {
        DocId(Arc::from(id.as_ref()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for DocId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for DocId {
    fn from(s: &str) -> Self {
        DocId::new(s)
    }
}

/// An occurrence of a symbol string in a document: the closed interval
/// `[b, e]` of scalar positions.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TextFragment {
    pub doc: DocId,
    pub b: usize,
    pub e: usize,
}

impl TextFragment {
    /// Number of symbols, `1 + e - b`.
    pub fn len(&self) -> usize {
        1 + self.e - self.b
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, other: &TextFragment) -> bool {
        self.b <= other.b && other.e <= self.e
    }

    pub fn overlaps(&self, other: &TextFragment) -> bool {
        self.b <= other.e && other.b <= self.e
    }

    /// True iff `self` ends strictly before `other` starts.
    pub fn before(&self, other: &TextFragment) -> Result<bool, CorpusError> {
        self.same_doc(other)?;
        Ok(self.e < other.b)
    }

    /// Size of the overlap of the two intervals, 0 when disjoint.
    pub fn intersection_length(&self, other: &TextFragment) -> usize {
        interval_overlap((self.b, self.e), (other.b, other.e))
    }

    fn same_doc(&self, other: &TextFragment) -> Result<(), CorpusError> {
        if self.doc == other.doc {
            Ok(())
        } else {
            Err(CorpusError::DocumentMismatch {
                left: self.doc.clone(),
                right: other.doc.clone(),
            })
        }
    }
}

impl fmt::Display for TextFragment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}, {}]", self.doc, self.b, self.e)
    }
}

/// Overlap of two closed intervals.
pub fn interval_overlap(a: (usize, usize), b: (usize, usize)) -> usize {
    let lo = a.0.max(b.0);
    let hi = a.1.min(b.1);
    if lo > hi {
        0
    } else {
        hi - lo + 1
    }
}

/// A maximal run of non-delimiter symbols.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub fragment: TextFragment,
    pub index: usize,
}

impl Token {
    pub fn b(&self) -> usize {
        self.fragment.b
    }

    pub fn e(&self) -> usize {
        self.fragment.e
    }
}

/// Symbols that separate tokens besides Unicode whitespace.
pub const DELIMITER_PUNCTUATION: &[char] = &[
    '.', ',', ';', ':', '!', '?', '(', ')', '[', ']', '{', '}', '"', '\'', '«', '»', '—', '/', '\\', '|', '<', '>',
    '=', '+', '*', '&', '^', '%', '$', '#', '@', '~', '`',
];

pub fn is_delimiter(c: char) -> bool {
    c.is_whitespace() || DELIMITER_PUNCTUATION.contains(&c)
}

/// An immutable loaded text with its token index.
#[derive(Debug, Clone)]
pub struct Document {
    id: DocId,
    text: Vec<char>,
    source_path: Option<String>,
    tokens: Vec<Token>,
}

impl Document {
    /// Builds a document from already-decoded text. Line endings are
    /// normalized to LF.
    pub fn from_text(id: impl Into<DocId>, text: &str) -> Self {
        let id = id.into();
        let text = normalize_line_endings(text);
        let tokens = tokenize_symbols(&id, &text);
        Document {
            id,
            text,
            source_path: None,
            tokens,
        }
    }

    pub fn with_source_path(mut self, path: impl Into<String>) -> Self {
        self.source_path = Some(path.into());
        self
    }

    pub fn id(&self) -> &DocId {
        &self.id
    }

    pub fn source_path(&self) -> Option<&str> {
        self.source_path.as_deref()
    }

    pub fn symbols(&self) -> &[char] {
        &self.text
    }

    /// Number of Unicode scalars.
    pub fn len(&self) -> usize {
        self.text.len()
    }

    pub fn is_empty(&self) -> bool {
        self.text.is_empty()
    }

    pub fn text(&self) -> String {
        self.text.iter().collect()
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn fragment(&self, b: usize, e: usize) -> Result<TextFragment, CorpusError> {
        if b > e || e >= self.text.len() {
            return Err(CorpusError::OutOfBounds {
                b,
                e,
                len: self.text.len(),
            });
        }
        Ok(TextFragment {
            doc: self.id.clone(),
            b,
            e,
        })
    }

    /// Fragment covering the whole document, `None` when empty.
    pub fn whole(&self) -> Option<TextFragment> {
        self.fragment(0, self.len().checked_sub(1)?).ok()
    }

    pub fn slice(&self, fragment: &TextFragment) -> &[char] {
        &self.text[fragment.b..=fragment.e]
    }

    pub fn str_of(&self, fragment: &TextFragment) -> String {
        self.slice(fragment).iter().collect()
    }

    /// Index of the token containing position `pos`, if any.
    pub fn token_at(&self, pos: usize) -> Option<usize> {
        let idx = self.tokens.partition_point(|t| t.e() < pos);
        self.tokens.get(idx).filter(|t| t.b() <= pos).map(|t| t.index)
    }

    /// Widens `[b, e]` so neither end cuts through a token.
    pub fn extend_to_tokens(&self, b: usize, e: usize) -> (usize, usize) {
        let nb = self.token_at(b).map_or(b, |i| self.tokens[i].b());
        let ne = self.token_at(e).map_or(e, |i| self.tokens[i].e());
        (nb, ne)
    }

    /// Serializable view of a fragment of this document.
    pub fn fragment_json(&self, fragment: &TextFragment) -> FragmentJson {
        FragmentJson {
            doc: fragment.doc.clone(),
            b: fragment.b,
            e: fragment.e,
            text: self.str_of(fragment),
        }
    }
}

/// Wire form shared by every export: `{"doc", "b", "e", "text"}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FragmentJson {
    pub doc: DocId,
    pub b: usize,
    pub e: usize,
    pub text: String,
}

impl FragmentJson {
    pub fn fragment(&self) -> TextFragment {
        TextFragment {
            doc: self.doc.clone(),
            b: self.b,
            e: self.e,
        }
    }
}

/// Decodes UTF-8 bytes into a [`Document`].
pub fn load_document(bytes: &[u8], id: impl Into<DocId>) -> Result<Document, CorpusError> {
    let text = std::str::from_utf8(bytes).map_err(|err| CorpusError::InvalidUtf8 {
        offset: err.valid_up_to(),
    })?;
    Ok(Document::from_text(id, text))
}

/// Returns the document's tokens in order.
pub fn tokenize(doc: &Document) -> &[Token] {
    doc.tokens()
}

fn normalize_line_endings(text: &str) -> Vec<char> {
    let mut out = Vec::with_capacity(text.len());
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        if c == '\r' {
            if chars.peek() == Some(&'\n') {
                chars.next();
            }
            out.push('\n');
        } else {
            out.push(c);
        }
    }
    out
}

fn tokenize_symbols(id: &DocId, text: &[char]) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut start = None;
    for (i, &c) in text.iter().enumerate() {
        match (is_delimiter(c), start) {
            (false, None) => start = Some(i),
            (true, Some(b)) => {
                push_token(&mut tokens, id, b, i - 1);
                start = None;
            }
            _ => {}
        }
    }
    if let Some(b) = start {
        push_token(&mut tokens, id, b, text.len() - 1);
    }
    tokens
}

fn push_token(tokens: &mut Vec<Token>, id: &DocId, b: usize, e: usize) {
    let index = tokens.len();
    tokens.push(Token {
        fragment: TextFragment { doc: id.clone(), b, e },
        index,
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn doc(text: &str) -> Document {
        Document::from_text("t", text)
    }

    fn token_strings(d: &Document) -> Vec<String> {
        d.tokens().iter().map(|t| d.str_of(&t.fragment)).collect()
    }

    #[test]
    fn load_counts_scalars() {
        assert_eq!(load_document(b"", "a").unwrap().len(), 0);
        assert_eq!(load_document(b"ab cd", "a").unwrap().len(), 5);
        let ru = "привет мир";
        // independent count: UTF-8 lead bytes are the ones not of the form 10xxxxxx
        let lead_bytes = ru.bytes().filter(|b| b & 0xC0 != 0x80).count();
        assert_eq!(lead_bytes, 10);
        assert_eq!(load_document(ru.as_bytes(), "a").unwrap().len(), lead_bytes);
    }

    #[test]
    fn load_rejects_invalid_utf8_with_offset() {
        let err = load_document(b"abc\xffdef", "a").unwrap_err();
        assert_eq!(err, CorpusError::InvalidUtf8 { offset: 3 });
    }

    #[test]
    fn load_normalizes_line_endings() {
        let d = load_document(b"a\r\nb\rc\n", "a").unwrap();
        assert_eq!(d.text(), "a\nb\nc\n");
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(token_strings(&doc("FM registers")), ["FM", "registers"]);
        assert!(doc("").tokens().is_empty());
        assert_eq!(token_strings(&doc("a,b.(c)")), ["a", "b", "c"]);
        assert_eq!(token_strings(&doc("«Привет», мир — да")), ["Привет", "мир", "да"]);
    }

    #[test]
    fn before_examples() {
        let d = doc(&"x".repeat(20));
        let f = |b, e| d.fragment(b, e).unwrap();
        assert!(f(0, 3).before(&f(5, 9)).unwrap());
        assert!(!f(0, 5).before(&f(5, 9)).unwrap());
        assert!(!f(0, 5).before(&f(3, 9)).unwrap());
    }

    #[test]
    fn before_rejects_foreign_fragments() {
        let a = Document::from_text("a", "hello").whole().unwrap();
        let b = Document::from_text("b", "hello").whole().unwrap();
        assert!(matches!(a.before(&b), Err(CorpusError::DocumentMismatch { .. })));
    }

    #[test]
    fn intersection_examples() {
        let d = doc(&"x".repeat(40));
        let f = |b, e| d.fragment(b, e).unwrap();
        assert_eq!(f(0, 9).intersection_length(&f(5, 14)), 5);
        assert_eq!(f(0, 9).intersection_length(&f(20, 29)), 0);
        assert_eq!(f(3, 7).intersection_length(&f(0, 9)), 5);
    }

    #[test]
    fn fragment_bounds_are_checked() {
        let d = doc("abc");
        assert!(d.fragment(0, 2).is_ok());
        assert!(d.fragment(0, 3).is_err());
        assert!(d.fragment(2, 1).is_err());
        assert!(doc("").whole().is_none());
    }

    #[test]
    fn extend_to_tokens_widens_partial_words() {
        let d = doc("alpha beta gamma");
        assert_eq!(d.extend_to_tokens(2, 7), (0, 9));
        assert_eq!(d.extend_to_tokens(5, 5), (5, 5));
        assert_eq!(d.token_at(5), None);
        assert_eq!(d.token_at(6), Some(1));
    }

    fn text_strategy() -> impl Strategy<Value = String> {
        prop::collection::vec(
            prop::sample::select(vec!['a', 'b', 'я', ' ', ',', '.', '\n', '(', ')', '—', 'ж']),
            0..80,
        )
        .prop_map(|v| v.into_iter().collect())
    }

    proptest! {
        #[test]
        fn fragment_length_matches_str(text in "[a-zа-я ]{1,60}", x in 0usize..60, y in 0usize..60) {
            let d = doc(&text);
            let (b, e) = (x.min(y) % d.len(), x.max(y) % d.len());
            prop_assume!(b <= e);
            let f = d.fragment(b, e).unwrap();
            prop_assert_eq!(f.len(), 1 + e - b);
            prop_assert_eq!(d.str_of(&f).chars().count(), f.len());
        }

        #[test]
        fn tokens_plus_gaps_reconstruct_text(text in text_strategy()) {
            let d = doc(&text);
            let mut rebuilt = String::new();
            let mut pos = 0;
            for t in d.tokens() {
                let gap: String = d.symbols()[pos..t.b()].iter().collect();
                prop_assert!(gap.chars().all(is_delimiter));
                rebuilt.push_str(&gap);
                let s = d.str_of(&t.fragment);
                prop_assert!(!s.chars().any(is_delimiter));
                rebuilt.push_str(&s);
                pos = t.e() + 1;
            }
            let tail: String = d.symbols()[pos..].iter().collect();
            prop_assert!(tail.chars().all(is_delimiter));
            rebuilt.push_str(&tail);
            prop_assert_eq!(rebuilt, d.text());
            for (i, w) in d.tokens().windows(2).enumerate() {
                prop_assert_eq!(w[0].index, i);
                prop_assert!(w[0].e() + 1 < w[1].b());
            }
        }

        #[test]
        fn before_is_a_strict_order(spans in prop::collection::vec((0usize..50, 0usize..10), 3)) {
            let d = doc(&"z".repeat(60));
            let f: Vec<_> = spans.iter().map(|&(b, l)| d.fragment(b, b + l).unwrap()).collect();
            let before = |i: usize, j: usize| f[i].before(&f[j]).unwrap();
            for i in 0..3 {
                prop_assert!(!before(i, i));
                for j in 0..3 {
                    prop_assert!(!(before(i, j) && before(j, i)));
                    for k in 0..3 {
                        if before(i, j) && before(j, k) {
                            prop_assert!(before(i, k));
                        }
                    }
                }
            }
        }
    }
}
