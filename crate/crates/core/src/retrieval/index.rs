use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tokenize::tokenize;
use super::RetrievalError;
use crate::taskgraph::TaskGraph;

// bm25_tf_factor hard-codes these as 6/5 and 3/4
pub const BM25_K1: f64 = 1.2;
pub const BM25_B: f64 = 0.75;

/// A searchable document: a weighted title and a body.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchDoc {
    pub id: String,
    pub title: String,
    pub body: String,
}

impl SearchDoc {
    pub fn new(id: impl Into<String>, title: impl Into<String>, body: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            title: title.into(),
            body: body.into(),
        }
    }

    /// Title, then tags, requirement names and step texts as body.
    pub fn from_task(graph: &TaskGraph) -> Self {
        let mut body: Vec<&str> = graph.tags.iter().map(String::as_str).collect();
        body.extend(graph.requirements.iter().map(|r| r.name.as_str()));
        body.extend(graph.steps.iter().map(|s| s.text.as_str()));
        Self::new(graph.id.clone(), graph.title.clone(), body.join("\n"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldWeights {
    pub title: u32,
    pub body: u32,
}

impl Default for FieldWeights {
    fn default() -> Self {
        Self { title: 2, body: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    pub doc_id: String,
    pub term_frequency: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub doc_id: String,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvertedIndex {
    /// Postings per term, sorted by doc id.
    pub postings: BTreeMap<String, Vec<Posting>>,
    /// Weighted token count per document.
    pub doc_lengths: BTreeMap<String, u32>,
    pub doc_count: usize,
    pub avg_doc_length: f64,
    pub field_weights: FieldWeights,
}

impl Default for InvertedIndex {
    fn default() -> Self {
        Self {
            postings: BTreeMap::new(),
            doc_lengths: BTreeMap::new(),
            doc_count: 0,
            avg_doc_length: 0.0,
            field_weights: FieldWeights::default(),
        }
    }
}

/// Weighted term counts for one document: title tokens count `title`
/// times, body tokens `body` times.
pub(crate) fn weighted_terms(doc: &SearchDoc, weights: FieldWeights) -> BTreeMap<String, u32> {
    let mut counts = BTreeMap::new();
    for token in tokenize(&doc.title) {
        *counts.entry(token).or_insert(0) += weights.title;
    }
    for token in tokenize(&doc.body) {
        *counts.entry(token).or_insert(0) += weights.body;
    }
    counts
}

pub fn build_index<'a>(corpus: impl IntoIterator<Item = &'a TaskGraph>) -> Result<InvertedIndex, RetrievalError> {
    InvertedIndex::from_documents(corpus.into_iter().map(SearchDoc::from_task))
}

impl InvertedIndex {
    pub fn from_documents(docs: impl IntoIterator<Item = SearchDoc>) -> Result<Self, RetrievalError> {
        let mut index = InvertedIndex::default();
        let weights = index.field_weights;
        for doc in docs {
            if index.doc_lengths.contains_key(&doc.id) {
                return Err(RetrievalError::DuplicateDocument(doc.id));
            }
            let terms = weighted_terms(&doc, weights);
            index.doc_lengths.insert(doc.id.clone(), terms.values().sum());
            for (term, tf) in terms {
                index.postings.entry(term).or_default().push(Posting {
                    doc_id: doc.id.clone(),
                    term_frequency: tf,
                });
            }
        }
        for list in index.postings.values_mut() {
            list.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
        }
        index.doc_count = index.doc_lengths.len();
        index.avg_doc_length = if index.doc_count == 0 {
            0.0
        } else {
            index.doc_lengths.values().map(|&l| f64::from(l)).sum::<f64>() / index.doc_count as f64
        };
        Ok(index)
    }

    pub fn document_frequency(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    pub fn idf(&self, term: &str) -> f64 {
        bm25_idf(self.doc_count, self.document_frequency(term))
    }

    /// BM25 top-k. Each distinct query term contributes once; ties go to
    /// the smaller doc id; zero-score documents never appear.
    pub fn search(&self, query: &str, k: usize) -> Vec<Hit> {
        if k == 0 || self.doc_count == 0 {
            return Vec::new();
        }
        let terms: BTreeSet<String> = tokenize(query).into_iter().collect();
        let total_len: u64 = self.doc_lengths.values().map(|&l| u64::from(l)).sum();
        let mut contributions: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        for term in &terms {
            let Some(postings) = self.postings.get(term) else {
                continue;
            };
            let idf = bm25_idf(self.doc_count, postings.len());
            for posting in postings {
                let dl = self.doc_lengths[&posting.doc_id];
                contributions
                    .entry(&posting.doc_id)
                    .or_default()
                    .push(idf * bm25_tf_factor(posting.term_frequency, dl, self.doc_count, total_len));
            }
        }
        let mut hits: Vec<Hit> = contributions
            .into_iter()
            .map(|(id, parts)| Hit {
                doc_id: id.to_string(),
                score: canonical_sum(parts),
            })
            .filter(|h| h.score > 0.0)
            .collect();
        rank(&mut hits);
        hits.truncate(k);
        hits
    }

    pub fn save(&self, path: &Path) -> Result<(), RetrievalError> {
        let json = serde_json::to_vec(self).map_err(RetrievalError::from_json)?;
        fs::write(path, json).map_err(|e| RetrievalError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, RetrievalError> {
        let bytes = fs::read(path).map_err(|e| RetrievalError::io(path, e))?;
        serde_json::from_slice(&bytes).map_err(RetrievalError::from_json)
    }
}

pub(crate) fn bm25_idf(doc_count: usize, df: usize) -> f64 {
    let n = doc_count as f64;
    let df = df as f64;
    (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
}

/// `tf (k1 + 1) / (tf + k1 (1 - b + b dl / avgdl))` as a reduced integer
/// fraction. With k1 = 6/5 and b = 3/4 this is
/// `22 tf S / (10 tf S + 3 S + 9 dl N)` for total length S over N
/// documents, so equal factors are bit-identical floats.
pub(crate) fn bm25_tf_factor(tf: u32, doc_len: u32, doc_count: usize, total_len: u64) -> f64 {
    let (tf, dl, n, s) = (
        u128::from(tf),
        u128::from(doc_len),
        doc_count as u128,
        u128::from(total_len),
    );
    let num = 22 * tf * s;
    let den = 10 * tf * s + 3 * s + 9 * dl * n;
    let g = gcd(num, den);
    (num / g) as f64 / (den / g) as f64
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.max(1)
}

/// Adds per-term scores smallest first, so documents whose contributions
/// are the same up to term order get bit-identical totals and fall through
/// to the doc-id tie-break.
pub(crate) fn canonical_sum(mut parts: Vec<f64>) -> f64 {
    parts.sort_by(f64::total_cmp);
    parts.into_iter().sum()
}

/// Descending score, ascending doc id.
pub(crate) fn rank(hits: &mut [Hit]) {
    hits.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.doc_id.cmp(&b.doc_id)));
}

#[cfg(test)]
mod tests {
    use super::*;

    fn docs(items: &[(&str, &str, &str)]) -> InvertedIndex {
        InvertedIndex::from_documents(items.iter().map(|(i, t, b)| SearchDoc::new(*i, *t, *b))).unwrap()
    }

    #[test]
    fn empty_corpus() {
        let idx = docs(&[]);
        assert_eq!(idx.doc_count, 0);
        assert!(idx.search("lasagna", 5).is_empty());
    }

    #[test]
    fn single_doc_average_is_its_length() {
        let idx = docs(&[("d1", "Vegan Lasagna", "layer pasta sauce")]);
        // 2 title tokens x2 + 3 body tokens
        assert_eq!(idx.doc_lengths["d1"], 7);
        assert_eq!(idx.avg_doc_length, 7.0);
        let hits = idx.search("Vegan Lasagna", 3);
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].doc_id, "d1");
    }

    #[test]
    fn unknown_terms_score_nothing() {
        let idx = docs(&[("d1", "Lasagna", "pasta")]);
        assert!(idx.search("spaceship", 3).is_empty());
        assert!(idx.search("the of", 3).is_empty());
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let err = InvertedIndex::from_documents([SearchDoc::new("x", "a b", ""), SearchDoc::new("x", "c d", "")])
            .unwrap_err();
        assert!(matches!(err, RetrievalError::DuplicateDocument(id) if id == "x"));
    }

    #[test]
    fn ties_break_on_doc_id() {
        let idx = docs(&[("b", "soup", ""), ("a", "soup", ""), ("c", "soup", "")]);
        let ids: Vec<_> = idx.search("soup", 10).into_iter().map(|h| h.doc_id).collect();
        assert_eq!(ids, ["a", "b", "c"]);
        assert_eq!(idx.search("soup", 2).len(), 2);
    }

    #[test]
    fn idf_is_positive_even_for_ubiquitous_terms() {
        assert!(bm25_idf(3, 3) > 0.0);
        assert!((bm25_idf(1, 1) - (1.0f64 + 0.5 / 1.5).ln()).abs() < 1e-12);
    }

    #[test]
    fn tf_factor_matches_float_formula_and_ties_exactly() {
        let float =
            |tf: f64, dl: f64, avg: f64| tf * (BM25_K1 + 1.0) / (tf + BM25_K1 * (1.0 - BM25_B + BM25_B * dl / avg));
        for (tf, dl, n, s) in [(1, 7, 3, 21), (2, 10, 4, 33), (5, 40, 50, 900)] {
            let exact = bm25_tf_factor(tf, dl, n, s);
            let approx = float(f64::from(tf), f64::from(dl), s as f64 / n as f64);
            assert!((exact - approx).abs() < 1e-12, "{exact} vs {approx}");
        }
        // tf 2 at length 3 and tf 4 at length 7 with average length 3
        assert_eq!(
            bm25_tf_factor(2, 3, 2, 6).to_bits(),
            bm25_tf_factor(4, 7, 2, 6).to_bits()
        );
    }

    #[test]
    fn persists_as_json() {
        let idx = docs(&[("d1", "Vegan Lasagna", "layer pasta"), ("d2", "Curry", "chicken")]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("index.json");
        idx.save(&path).unwrap();
        assert_eq!(InvertedIndex::load(&path).unwrap(), idx);
    }
}
