//! Normalization, tokenization, n-gram vocabularies and sparse featurization.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::Report;
use crate::error::{Error, Result};

pub const UNK: &str = "<UNK>";
pub const DEFAULT_MIN_COUNT: usize = 2;
pub const MAX_NGRAM: usize = 4;

const DELETED: [char; 5] = [',', '\\', ';', '~', '.'];
const SPACED: [char; 6] = [':', '/', '(', ')', '+', '='];

/// Lowercase, drop `, \ ; ~ .`, pad `: / ( ) + =` with spaces and remove the
/// word "null". Whitespace is collapsed to single spaces.
pub fn normalize(raw: &str) -> String {
    let mut padded = String::with_capacity(raw.len() + 8);
    for c in raw.chars().flat_map(char::to_lowercase) {
        if DELETED.contains(&c) {
            continue;
        }
        if SPACED.contains(&c) {
            padded.push(' ');
            padded.push(c);
            padded.push(' ');
        } else {
            padded.push(c);
        }
    }
    padded
        .split_whitespace()
        .filter(|w| *w != "null")
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn tokenize(raw: &str) -> Vec<String> {
    normalize(raw)
        .split(' ')
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TokenLine {
    pub tokens: Vec<String>,
    pub source_line_index: usize,
}

/// One token line per physical report line; blank lines stay as empty entries.
pub fn tokenize_lines(report: &Report) -> Vec<TokenLine> {
    report
        .lines
        .iter()
        .enumerate()
        .map(|(i, l)| TokenLine {
            tokens: tokenize(l),
            source_line_index: i,
        })
        .collect()
}

/// Sparse vector with strictly increasing indices and no stored zeros.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    indices: Vec<usize>,
    values: Vec<f64>,
    dim: usize,
}

impl SparseVector {
    pub fn zeros(dim: usize) -> Self {
        SparseVector {
            indices: Vec::new(),
            values: Vec::new(),
            dim,
        }
    }

    /// Build from unordered pairs; duplicate indices are summed and zeros dropped.
    pub fn from_pairs(dim: usize, pairs: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
        for (i, v) in pairs {
            if i >= dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: i + 1,
                });
            }
            *acc.entry(i).or_insert(0.0) += v;
        }
        let (indices, values) = acc.into_iter().filter(|(_, v)| *v != 0.0).unzip();
        Ok(SparseVector {
            indices,
            values,
            dim,
        })
    }

    /// Binary indicator vector over a set of indices.
    pub fn indicator(dim: usize, set: &BTreeSet<usize>) -> Self {
        debug_assert!(set.iter().all(|&i| i < dim));
        SparseVector {
            indices: set.iter().copied().collect(),
            values: vec![1.0; set.len()],
            dim,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices
            .iter()
            .copied()
            .zip(self.values.iter().copied())
    }

    pub fn get(&self, index: usize) -> f64 {
        match self.indices.binary_search(&index) {
            Ok(p) => self.values[p],
            Err(_) => 0.0,
        }
    }

    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.iter().map(|(i, v)| v * dense[i]).sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        if factor == 0.0 {
            return Self::zeros(self.dim);
        }
        SparseVector {
            indices: self.indices.clone(),
            values: self.values.iter().map(|v| v * factor).collect(),
            dim: self.dim,
        }
    }

    pub fn add(&self, other: &SparseVector) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        Self::from_pairs(self.dim, self.iter().chain(other.iter()))
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.dim];
        for (i, v) in self.iter() {
            d[i] = v;
        }
        d
    }
}

pub const VOCAB_VERSION: u32 = 1;

/// N-gram feature space fit on training lines. Unigrams seen fewer than
/// `min_count` times are folded into [`UNK`] before n-grams are enumerated.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    ngram_to_index: HashMap<String, usize>,
    max_n: usize,
    min_count: usize,
}

#[derive(Serialize, Deserialize)]
struct VocabularyRepr {
    version: u32,
    max_n: usize,
    min_count: usize,
    ngrams: Vec<(String, usize)>,
}

impl Serialize for Vocabulary {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        VocabularyRepr {
            version: VOCAB_VERSION,
            max_n: self.max_n,
            min_count: self.min_count,
            ngrams: self
                .entries()
                .into_iter()
                .map(|(g, i)| (g.to_string(), i))
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Vocabulary {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = VocabularyRepr::deserialize(d)?;
        if repr.version != VOCAB_VERSION {
            return Err(D::Error::custom(format!(
                "unsupported vocabulary version {}",
                repr.version
            )));
        }
        let n = repr.ngrams.len();
        let mut seen = vec![false; n];
        for (_, i) in &repr.ngrams {
            if *i >= n || std::mem::replace(&mut seen[*i], true) {
                return Err(D::Error::custom(
                    "vocabulary indices must be 0..len without gaps",
                ));
            }
        }
        Ok(Vocabulary {
            ngram_to_index: repr.ngrams.into_iter().collect(),
            max_n: repr.max_n,
            min_count: repr.min_count,
        })
    }
}

fn for_each_ngram(tokens: &[&str], max_n: usize, mut f: impl FnMut(String)) {
    for n in 1..=max_n.min(tokens.len()) {
        for w in tokens.windows(n) {
            f(w.join(" "));
        }
    }
}

impl Vocabulary {
    /// Fit on token streams; each stream is one unit that n-grams may not cross.
    pub fn build<'a, I>(streams: I, max_n: usize, min_count: usize) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [String]> + Clone,
    {
        Self::build_with_extra(streams.clone(), streams, max_n, min_count)
    }

    /// Like [`Vocabulary::build`], but unigram counts come from `count_streams`
    /// while n-grams are enumerated over `ngram_streams`.
    pub fn build_with_extra<'a, C, G>(
        count_streams: C,
        ngram_streams: G,
        max_n: usize,
        min_count: usize,
    ) -> Result<Self>
    where
        C: IntoIterator<Item = &'a [String]>,
        G: IntoIterator<Item = &'a [String]>,
    {
        if !(1..=MAX_NGRAM).contains(&max_n) {
            return Err(Error::invalid(format!(
                "n-gram size {max_n} not in 1..={MAX_NGRAM}"
            )));
        }
        let mut counts: HashMap<&str, usize> = HashMap::new();
        let mut any = false;
        for stream in count_streams {
            any = true;
            for t in stream {
                *counts.entry(t.as_str()).or_default() += 1;
            }
        }
        if !any {
            return Err(Error::invalid(
                "cannot build a vocabulary from an empty training set",
            ));
        }
        let mut grams: BTreeSet<String> = BTreeSet::new();
        for stream in ngram_streams {
            let mapped: Vec<&str> = stream
                .iter()
                .map(|t| {
                    if counts.get(t.as_str()).copied().unwrap_or(0) >= min_count {
                        t.as_str()
                    } else {
                        UNK
                    }
                })
                .collect();
            for_each_ngram(&mapped, max_n, |g| {
                grams.insert(g);
            });
        }
        Ok(Vocabulary {
            ngram_to_index: grams.into_iter().enumerate().map(|(i, g)| (g, i)).collect(),
            max_n,
            min_count,
        })
    }

    pub fn from_lines(lines: &[TokenLine], max_n: usize, min_count: usize) -> Result<Self> {
        Self::build(lines.iter().map(|l| l.tokens.as_slice()), max_n, min_count)
    }

    pub fn len(&self) -> usize {
        self.ngram_to_index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ngram_to_index.is_empty()
    }

    pub fn max_n(&self) -> usize {
        self.max_n
    }

    pub fn min_count(&self) -> usize {
        self.min_count
    }

    pub fn index_of(&self, ngram: &str) -> Option<usize> {
        self.ngram_to_index.get(ngram).copied()
    }

    /// (n-gram, index) pairs in index order.
    pub fn entries(&self) -> Vec<(&str, usize)> {
        let mut e: Vec<(&str, usize)> = self
            .ngram_to_index
            .iter()
            .map(|(g, &i)| (g.as_str(), i))
            .collect();
        e.sort_by_key(|&(_, i)| i);
        e
    }

    fn map_token<'a>(&self, t: &'a str) -> &'a str {
        if t != UNK && self.ngram_to_index.contains_key(t) {
            t
        } else {
            UNK
        }
    }

    /// Feature indices present in `tokens` (set semantics).
    pub fn feature_set(&self, tokens: &[String]) -> BTreeSet<usize> {
        let mapped: Vec<&str> = tokens.iter().map(|t| self.map_token(t)).collect();
        let mut set = BTreeSet::new();
        for_each_ngram(&mapped, self.max_n, |g| {
            if let Some(&i) = self.ngram_to_index.get(&g) {
                set.insert(i);
            }
        });
        set
    }

    /// Binary presence vector of the in-vocabulary n-grams of `tokens`.
    pub fn vectorize(&self, tokens: &[String]) -> SparseVector {
        SparseVector::indicator(self.len(), &self.feature_set(tokens))
    }

    /// Union of within-line n-gram features over all lines of a document.
    pub fn vectorize_document(&self, lines: &[TokenLine]) -> SparseVector {
        let mut set = BTreeSet::new();
        for l in lines {
            set.extend(self.feature_set(&l.tokens));
        }
        SparseVector::indicator(self.len(), &set)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Cancer;
    use proptest::prelude::*;

    fn toks(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn normalization_rules() {
        assert_eq!(
            tokenize("Grade: 2, (low)"),
            toks(&["grade", ":", "2", "(", "low", ")"])
        );
        assert_eq!(tokenize("null histology."), toks(&["histology"]));
        assert_eq!(tokenize("a/b"), toks(&["a", "/", "b"]));
        assert_eq!(
            tokenize("x+y=z ~w\\v;u"),
            toks(&["x", "+", "y", "=", "z", "wvu"])
        );
        assert_eq!(tokenize("NULL nullify"), toks(&["nullify"]));
    }

    #[test]
    fn token_lines_stay_aligned() {
        let report = Report {
            id: "r".into(),
            cancer: Cancer::Kidney,
            lines: vec!["grade: 2".into(), "   ".into(), "end".into()],
        };
        let lines = tokenize_lines(&report);
        assert_eq!(lines.len(), 3);
        assert_eq!(
            lines
                .iter()
                .map(|l| l.source_line_index)
                .collect::<Vec<_>>(),
            [0, 1, 2]
        );
        assert!(lines[1].tokens.is_empty());
        assert_eq!(lines[0].tokens, toks(&["grade", ":", "2"]));
    }

    #[test]
    fn unk_threshold() {
        let line = toks(&["a", "a", "a", "b", "c", "c"]);
        let v = Vocabulary::build([line.as_slice()], 1, 2).unwrap();
        let grams: Vec<&str> = v.entries().into_iter().map(|(g, _)| g).collect();
        assert_eq!(grams, ["<UNK>", "a", "c"]);
        assert_eq!(
            v.vectorize(&toks(&["b"])).indices(),
            [v.index_of(UNK).unwrap()]
        );
    }

    #[test]
    fn bigram_enumeration() {
        let line = toks(&["tumor", "grade", "2"]);
        let v = Vocabulary::build([line.as_slice(), line.as_slice()], 2, 2).unwrap();
        let mut grams: Vec<&str> = v.entries().into_iter().map(|(g, _)| g).collect();
        grams.sort();
        assert_eq!(grams, ["2", "grade", "grade 2", "tumor", "tumor grade"]);
    }

    #[test]
    fn short_lines_cap_ngram_order() {
        let line = toks(&["a", "b"]);
        let v = Vocabulary::build([line.as_slice(), line.as_slice()], 4, 2).unwrap();
        assert_eq!(v.len(), 3);
    }

    #[test]
    fn ngrams_do_not_cross_lines() {
        let a = toks(&["x", "y"]);
        let b = toks(&["z", "x"]);
        let v = Vocabulary::build(
            [a.as_slice(), b.as_slice(), a.as_slice(), b.as_slice()],
            2,
            1,
        )
        .unwrap();
        assert!(v.index_of("y z").is_none());
        assert!(v.index_of("x y").is_some());
    }

    #[test]
    fn vectorize_is_binary() {
        let line = toks(&["grade", "2", "2"]);
        let v = Vocabulary::build([line.as_slice(), line.as_slice()], 2, 2).unwrap();
        let x = v.vectorize(&toks(&["grade", "2"]));
        assert_eq!(x.nnz(), 3);
        assert!(x.values().iter().all(|&w| w == 1.0));
        let rep = v.vectorize(&toks(&["2", "2"]));
        assert_eq!(rep.get(v.index_of("2").unwrap()), 1.0);
        assert_eq!(v.vectorize(&[]).nnz(), 0);
        assert_eq!(v.vectorize(&[]).dim(), v.len());
    }

    #[test]
    fn rejects_bad_inputs() {
        let empty: [&[String]; 0] = [];
        assert!(Vocabulary::build(empty, 2, 2).is_err());
        let l = toks(&["a"]);
        assert!(Vocabulary::build([l.as_slice()], 5, 2).is_err());
        assert!(Vocabulary::build([l.as_slice()], 0, 2).is_err());
    }

    #[test]
    fn sparse_vector_arithmetic() {
        let a = SparseVector::from_pairs(5, [(3, 1.0), (1, 2.0), (3, 0.5)]).unwrap();
        assert_eq!(a.indices(), [1, 3]);
        assert_eq!(a.values(), [2.0, 1.5]);
        let b = SparseVector::from_pairs(5, [(1, -2.0), (4, 1.0)]).unwrap();
        let c = a.add(&b).unwrap();
        assert_eq!(c.indices(), [3, 4]);
        assert!(SparseVector::from_pairs(2, [(2, 1.0)]).is_err());
        assert_eq!(a.scaled(0.0).nnz(), 0);
    }

    #[test]
    fn vocabulary_serde_round_trip() {
        let line = toks(&["tumor", "grade", "2", "tumor"]);
        let v = Vocabulary::build([line.as_slice(), line.as_slice()], 3, 2).unwrap();
        let json = serde_json::to_string(&v).unwrap();
        let back: Vocabulary = serde_json::from_str(&json).unwrap();
        assert_eq!(v, back);
    }

    fn arb_text() -> impl Strategy<Value = String> {
        proptest::collection::vec(
            prop_oneof![
                Just("Grade".to_string()),
                Just("null".to_string()),
                Just(":".to_string()),
                Just("a/b".to_string()),
                Just(" ".to_string()),
                Just("(x)".to_string()),
                Just("3.5,".to_string()),
                Just("~;\\".to_string()),
                Just("+=".to_string()),
                "[a-zA-Z0-9 ]{0,6}",
            ],
            0..12,
        )
        .prop_map(|v| v.concat())
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(s in arb_text()) {
            let once = normalize(&s);
            prop_assert_eq!(normalize(&once), once);
        }

        #[test]
        fn document_support_is_union_of_lines(lines in proptest::collection::vec(arb_text(), 1..6), n in 1usize..=4) {
            let report = Report { id: "p".into(), cancer: Cancer::Colon, lines };
            let tl = tokenize_lines(&report);
            let v = Vocabulary::from_lines(&tl, n, 1);
            prop_assume!(v.is_ok());
            let v = v.unwrap();
            let doc = v.vectorize_document(&tl);
            let mut union = BTreeSet::new();
            for l in &tl {
                union.extend(v.vectorize(&l.tokens).indices().iter().copied());
            }
            prop_assert_eq!(doc.indices().iter().copied().collect::<BTreeSet<_>>(), union);
            prop_assert_eq!(doc.dim(), v.len());
        }

        #[test]
        fn vocabulary_is_deterministic(lines in proptest::collection::vec(arb_text(), 1..6)) {
            let report = Report { id: "p".into(), cancer: Cancer::Colon, lines };
            let tl = tokenize_lines(&report);
            let a = Vocabulary::from_lines(&tl, 2, 2);
            let b = Vocabulary::from_lines(&tl, 2, 2);
            prop_assert_eq!(a.ok(), b.ok());
        }
    }
}
