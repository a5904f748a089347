//! Tokenization, TF-IDF weighting and the message similarity graph.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ingest::Message;

const BUILTIN_STOPWORDS: &str = include_str!("../data/stopwords-v1.txt");

/// Set of terms removed during tokenization.
#[derive(Debug, Clone, Default)]
pub struct StopWords(HashSet<String>);

impl StopWords {
    /// The list shipped with the crate (`data/stopwords-v1.txt`).
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_STOPWORDS)
    }

    /// One lowercase term per line; `#` starts a comment line.
    pub fn parse(text: &str) -> Self {
        StopWords(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_lowercase)
                .collect(),
        )
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        Ok(Self::parse(&std::fs::read_to_string(path)?))
    }

    pub fn contains(&self, term: &str) -> bool {
        self.0.contains(term)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub(crate) fn strip_edge_punctuation(s: &str) -> &str {
    s.trim_matches(|c: char| !c.is_alphanumeric())
}

/// Splits text into normalized terms, preserving order.
pub fn tokenize(text: &str, stop: &StopWords) -> Vec<String> {
    text.split_whitespace()
        .filter_map(|raw| {
            let lower = raw.to_lowercase();
            if lower.starts_with("http://") || lower.starts_with("https://") || lower.starts_with('@')
            {
                return None;
            }
            let term = strip_edge_punctuation(&lower);
            if term.chars().count() < 2 || stop.contains(term) {
                return None;
            }
            Some(term.to_string())
        })
        .collect()
}

/// Fills `tokens` for every message.
pub fn tokenize_all(messages: &mut [Message], stop: &StopWords) {
    for m in messages {
        m.tokens = tokenize(&m.text, stop);
    }
}

/// Sparse TF-IDF vector. Only positive weights are stored.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TermVector {
    weights: BTreeMap<String, f64>,
    norm: f64,
}

impl TermVector {
    pub fn from_weights(weights: impl IntoIterator<Item = (String, f64)>) -> Self {
        let weights: BTreeMap<String, f64> =
            weights.into_iter().filter(|(_, w)| *w > 0.0).collect();
        let norm = weights.values().map(|w| w * w).sum::<f64>().sqrt();
        TermVector { weights, norm }
    }

    pub fn weights(&self) -> &BTreeMap<String, f64> {
        &self.weights
    }

    pub fn weight(&self, term: &str) -> f64 {
        self.weights.get(term).copied().unwrap_or(0.0)
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// TF-IDF over a set of tokenized messages.
///
/// `tf` is the raw count, `idf(t) = ln((1 + N) / (1 + df(t))) + 1`.
pub fn tfidf(messages: &[Message]) -> BTreeMap<String, TermVector> {
    let n = messages.len() as f64;
    let mut df: HashMap<&str, usize> = HashMap::new();
    for m in messages {
        let unique: HashSet<&str> = m.tokens.iter().map(String::as_str).collect();
        for t in unique {
            *df.entry(t).or_default() += 1;
        }
    }
    messages
        .iter()
        .map(|m| {
            let mut tf: BTreeMap<&str, usize> = BTreeMap::new();
            for t in &m.tokens {
                *tf.entry(t.as_str()).or_default() += 1;
            }
            let weights = tf.into_iter().map(|(t, count)| {
                let idf = ((1.0 + n) / (1.0 + df[t] as f64)).ln() + 1.0;
                (t.to_string(), count as f64 * idf)
            });
            (m.id.clone(), TermVector::from_weights(weights))
        })
        .collect()
}

/// Cosine similarity, 0 when either vector is empty.
///
/// The dot product walks both supports in term order, so the result is
/// bitwise symmetric in its arguments.
pub fn cosine(u: &TermVector, v: &TermVector) -> f64 {
    if u.norm == 0.0 || v.norm == 0.0 {
        return 0.0;
    }
    let mut a = u.weights.iter().peekable();
    let mut b = v.weights.iter().peekable();
    let mut dot = 0.0;
    while let (Some((ta, wa)), Some((tb, wb))) = (a.peek(), b.peek()) {
        match ta.cmp(tb) {
            Ordering::Less => {
                a.next();
            }
            Ordering::Greater => {
                b.next();
            }
            Ordering::Equal => {
                dot += *wa * *wb;
                a.next();
                b.next();
            }
        }
    }
    (dot / (u.norm * v.norm)).clamp(0.0, 1.0)
}

/// Undirected weighted edge between node indices `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

/// Similarity graph over message ids. Nodes are sorted by id; edges are
/// sorted by `(a, b)` and never duplicated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityGraph {
    nodes: Vec<String>,
    edges: Vec<Edge>,
    pub threshold: f64,
    pub k: usize,
}

impl SimilarityGraph {
    /// Builds a graph from id-labeled edges. Node order is canonicalized;
    /// self-loops are dropped and duplicate pairs keep their first weight.
    pub fn from_edges<S: AsRef<str>>(
        nodes: &[S],
        edges: &[(S, S, f64)],
        threshold: f64,
        k: usize,
    ) -> Self {
        let mut ids: Vec<String> = nodes.iter().map(|s| s.as_ref().to_string()).collect();
        ids.sort();
        ids.dedup();
        let index: HashMap<&str, usize> =
            ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for (x, y, w) in edges {
            let (i, j) = (index[x.as_ref()], index[y.as_ref()]);
            if i == j {
                continue;
            }
            let (a, b) = (i.min(j), i.max(j));
            if seen.insert((a, b)) {
                out.push(Edge { a, b, weight: *w });
            }
        }
        out.sort_by_key(|e| (e.a, e.b));
        SimilarityGraph {
            nodes: ids,
            edges: out,
            threshold,
            k,
        }
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.nodes.binary_search_by(|n| n.as_str().cmp(id)).ok()
    }

    /// Adjacency lists `(neighbor, weight)`, neighbors ascending.
    pub fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            adj[e.a].push((e.b, e.weight));
            adj[e.b].push((e.a, e.weight));
        }
        for list in &mut adj {
            list.sort_by_key(|&(n, _)| n);
        }
        adj
    }

    /// Induced subgraph on the given ids (unknown ids are ignored).
    pub fn subgraph<S: AsRef<str>>(&self, ids: &[S]) -> SimilarityGraph {
        let keep: HashMap<usize, &str> = ids
            .iter()
            .filter_map(|s| self.index_of(s.as_ref()).map(|i| (i, s.as_ref())))
            .collect();
        let nodes: Vec<&str> = keep.values().copied().collect();
        let edges: Vec<(&str, &str, f64)> = self
            .edges
            .iter()
            .filter(|e| keep.contains_key(&e.a) && keep.contains_key(&e.b))
            .map(|e| (self.nodes[e.a].as_str(), self.nodes[e.b].as_str(), e.weight))
            .collect();
        SimilarityGraph::from_edges(&nodes, &edges, self.threshold, self.k)
    }
}

/// Union k-NN graph thresholded at `threshold`.
///
/// An edge `(i, j)` exists iff `cosine(i, j) >= threshold` and `j` is among
/// the `k` most similar nodes to `i` or vice versa. Neighbor ranking sorts by
/// similarity descending, then id ascending.
pub fn build_graph(vectors: &BTreeMap<String, TermVector>, threshold: f64, k: usize) -> SimilarityGraph {
    let ids: Vec<&String> = vectors.keys().collect();
    let vecs: Vec<&TermVector> = vectors.values().collect();
    let n = ids.len();

    // candidate lists per node: (neighbor, similarity), already thresholded
    let ranked: Vec<Vec<(usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut cands: Vec<(usize, f64)> = (0..n)
                .filter(|&j| j != i)
                .filter_map(|j| {
                    let s = cosine(vecs[i], vecs[j]);
                    (s > 0.0 && s >= threshold).then_some((j, s))
                })
                .collect();
            // ids are sorted, so index order is id order
            cands.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
            cands.truncate(k);
            cands
        })
        .collect();

    let mut edges: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (i, list) in ranked.iter().enumerate() {
        for &(j, s) in list {
            edges.insert((i.min(j), i.max(j)), s);
        }
    }
    SimilarityGraph {
        nodes: ids.into_iter().cloned().collect(),
        edges: edges
            .into_iter()
            .map(|((a, b), weight)| Edge { a, b, weight })
            .collect(),
        threshold,
        k,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn stop() -> StopWords {
        StopWords::builtin()
    }

    fn message(id: &str, text: &str) -> Message {
        let mut m = Message::new(id, 0, text);
        m.tokens = tokenize(text, &stop());
        m
    }

    fn vector(pairs: &[(&str, f64)]) -> TermVector {
        TermVector::from_weights(pairs.iter().map(|(t, w)| (t.to_string(), *w)))
    }

    #[test]
    fn tokenize_rules() {
        assert!(tokenize("", &stop()).is_empty());
        assert_eq!(tokenize("Hello, WORLD!", &stop()), ["hello", "world"]);
        // rt is on the built-in stop list
        assert_eq!(
            tokenize("RT @bob check https://x.io/a GRAPHS graphs", &stop()),
            ["check", "graphs", "graphs"]
        );
        assert_eq!(
            tokenize("a I x #maps (layout) the", &stop()),
            ["maps", "layout"]
        );
        assert_eq!(tokenize("HTTP://X.IO ok", &StopWords::default()), ["ok"]);
    }

    #[test]
    fn stopword_file_format() {
        let s = StopWords::parse("# comment\nfoo\n\n  Bar \n");
        assert_eq!(s.len(), 2);
        assert!(s.contains("foo") && s.contains("bar"));
        assert!(!s.contains("# comment"));
        assert!(stop().contains("the"));
    }

    #[test]
    fn tfidf_single_message() {
        let mut m = Message::new("m", 0, "");
        m.tokens = vec!["ab".into(), "cd".into()];
        let v = &tfidf(&[m])["m"];
        assert_eq!(v.weight("ab"), 1.0);
        assert_eq!(v.weight("cd"), 1.0);
        assert!((v.norm() - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn tfidf_empty_tokens_and_identical_messages() {
        let msgs = [message("a", ""), message("b", "graphs maps"), message("c", "graphs maps")];
        let v = tfidf(&msgs);
        assert!(v["a"].is_empty());
        assert_eq!(v["a"].norm(), 0.0);
        assert_eq!(v["b"], v["c"]);
    }

    #[test]
    fn cosine_cases() {
        let x = vector(&[("ab", 0.3), ("cd", 2.0)]);
        assert!((cosine(&x, &x) - 1.0).abs() < 1e-9);
        assert_eq!(cosine(&vector(&[("ab", 1.0)]), &vector(&[("cd", 1.0)])), 0.0);
        let u = vector(&[("ab", 1.0), ("cd", 1.0)]);
        let v = vector(&[("ab", 1.0)]);
        assert!((cosine(&u, &v) - 1.0 / 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(cosine(&TermVector::default(), &u), 0.0);
    }

    #[test]
    fn zero_weights_are_not_stored() {
        let v = vector(&[("ab", 0.0), ("cd", 3.0)]);
        assert_eq!(v.weights().len(), 1);
        assert_eq!(v.norm(), 3.0);
    }

    #[test]
    fn graph_below_threshold_has_no_edges() {
        let msgs = [message("a", "alpha beta"), message("b", "gamma delta")];
        let g = build_graph(&tfidf(&msgs), 0.3, 10);
        assert_eq!(g.len(), 2);
        assert!(g.edges().is_empty());
    }

    #[test]
    fn identical_messages_get_unit_edge() {
        let msgs = [message("a", "graph layout"), message("b", "graph layout")];
        let g = build_graph(&tfidf(&msgs), 0.5, 10);
        assert_eq!(g.edges().len(), 1);
        assert!((g.edges()[0].weight - 1.0).abs() < 1e-12);
    }

    #[test]
    fn subgraph_keeps_induced_edges() {
        let g = SimilarityGraph::from_edges(
            &["a", "b", "c"],
            &[("a", "b", 0.5), ("b", "c", 0.7)],
            0.3,
            10,
        );
        let s = g.subgraph(&["c", "b"]);
        assert_eq!(s.nodes(), ["b", "c"]);
        assert_eq!(s.edges(), [Edge { a: 0, b: 1, weight: 0.7 }]);
    }

    proptest! {
        #[test]
        fn cosine_is_symmetric(
            a in proptest::collection::btree_map("[a-f]{2}", 0.0f64..5.0, 0..6),
            b in proptest::collection::btree_map("[a-f]{2}", 0.0f64..5.0, 0..6),
        ) {
            let u = TermVector::from_weights(a);
            let v = TermVector::from_weights(b);
            let (x, y) = (cosine(&u, &v), cosine(&v, &u));
            prop_assert_eq!(x.to_bits(), y.to_bits());
            prop_assert!((0.0..=1.0).contains(&x));
            let recomputed = u.weights().values().map(|w| w * w).sum::<f64>().sqrt();
            prop_assert!((u.norm() - recomputed).abs() <= 1e-9);
        }

        #[test]
        fn build_graph_ignores_input_order(
            texts in proptest::collection::vec("(ab|cd|ef|gh|ij) (ab|cd|ef|gh|ij)( kl)?", 1..10),
            seed in any::<u64>(),
        ) {
            let msgs: Vec<Message> = texts
                .iter()
                .enumerate()
                .map(|(i, t)| message(&format!("m{i:02}"), t))
                .collect();
            let mut shuffled = msgs.clone();
            let n = shuffled.len();
            for i in 0..n {
                let j = (seed.wrapping_mul(i as u64 + 7) % n as u64) as usize;
                shuffled.swap(i, j);
            }
            let g1 = build_graph(&tfidf(&msgs), 0.3, 2);
            let g2 = build_graph(&tfidf(&shuffled), 0.3, 2);
            prop_assert_eq!(g1, g2);
        }
    }
}
