//! Corpus encoding, vocabulary construction, and the per-epoch training
//! stream (out-of-vocabulary removal and frequent-word subsampling).

use indexmap::IndexMap;
use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;

use crate::error::{Error, Result};
use crate::matcher::{MatchAutomaton, TermOccurrence};
use crate::terminology::{normalize, EntityId, Terminology};

/// Exponent applied to unigram counts for negative sampling.
pub const NEGATIVE_POWER: f64 = 0.75;

/// Normalized, interned documents.
#[derive(Clone, Debug, Default)]
pub struct Corpus {
    /// Token → corpus frequency; the index is the token id.
    tokens: IndexMap<String, u64>,
    docs: Vec<Vec<u32>>,
}

impl Corpus {
    /// Normalize and intern raw documents (one per item).
    pub fn from_documents<I, S>(docs: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut corpus = Corpus::default();
        for doc in docs {
            let ids = normalize(doc.as_ref())
                .into_iter()
                .map(|tok| {
                    let entry = corpus.tokens.entry(tok);
                    let id = entry.index() as u32;
                    *entry.or_insert(0) += 1;
                    id
                })
                .collect();
            corpus.docs.push(ids);
        }
        corpus
    }

    pub fn n_docs(&self) -> usize {
        self.docs.len()
    }

    pub fn n_tokens(&self) -> u64 {
        self.tokens.values().sum()
    }

    pub fn token(&self, id: u32) -> &str {
        self.tokens.get_index(id as usize).unwrap().0
    }

    pub fn doc(&self, idx: usize) -> &[u32] {
        &self.docs[idx]
    }

    pub fn doc_tokens(&self, idx: usize) -> Vec<&str> {
        self.docs[idx].iter().map(|&t| self.token(t)).collect()
    }

    /// Run the matcher over every document.
    pub fn annotate(&self, automaton: &MatchAutomaton) -> Vec<Vec<TermOccurrence>> {
        let symbols: Vec<Option<u32>> = self
            .tokens
            .keys()
            .map(|tok| automaton.symbol(tok))
            .collect();
        self.docs
            .iter()
            .map(|doc| automaton.scan_symbols(doc.iter().map(|&t| symbols[t as usize])))
            .collect()
    }
}

/// Keep probability for a word with relative frequency `freq / total`:
/// `min(1, sqrt(coeff / r))`.
pub fn keep_probability(freq: u64, total: u64, coeff: f64) -> f64 {
    let r = freq as f64 / total as f64;
    (coeff / r).sqrt().min(1.0)
}

/// Frequency-filtered words, terms and entities with sampling tables.
#[derive(Clone, Debug)]
pub struct Vocabulary {
    words: IndexMap<String, u64>,
    /// Retained terms: terminology index and frequency.
    terms: Vec<(usize, u64)>,
    term_keys: Vec<Vec<String>>,
    /// Terminology term index → vocabulary term index.
    term_lookup: Vec<Option<u32>>,
    entities: Vec<EntityId>,
    /// Terminology entity index → vocabulary entity index.
    entity_lookup: Vec<Option<u32>>,
    /// Vocabulary term index → vocabulary entity indices (E_t).
    term_entities: Vec<Vec<u32>>,
    min_count: u64,
    total_word_tokens: u64,
    subsample_coeff: f64,
    keep_prob: Vec<f64>,
    negative_probs: Vec<f64>,
    negative_sampler: WeightedAliasIndex<f64>,
}

impl Vocabulary {
    /// Count words and matched terms, then drop everything below
    /// `min_count`. An entity is kept iff at least one of its terms is.
    pub fn build(
        corpus: &Corpus,
        annotations: &[Vec<TermOccurrence>],
        terminology: &Terminology,
        min_count: u64,
        subsample_coeff: f64,
    ) -> Result<Self> {
        if min_count == 0 {
            return Err(Error::InvalidConfig("min_count must be at least 1".into()));
        }
        if subsample_coeff.is_nan() || subsample_coeff <= 0.0 {
            return Err(Error::InvalidConfig(
                "subsampling coefficient must be positive".into(),
            ));
        }
        let total_word_tokens = corpus.n_tokens();
        if total_word_tokens == 0 {
            return Err(Error::EmptyCorpus);
        }

        let mut words: Vec<(&String, u64)> = corpus
            .tokens
            .iter()
            .filter(|(_, &f)| f >= min_count)
            .map(|(w, &f)| (w, f))
            .collect();
        words.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        let words: IndexMap<String, u64> = words.into_iter().map(|(w, f)| (w.clone(), f)).collect();
        if words.is_empty() {
            return Err(Error::EmptyVocabulary(min_count));
        }

        let mut term_freqs = vec![0u64; terminology.n_terms()];
        for occ in annotations.iter().flatten() {
            term_freqs[occ.term as usize] += 1;
        }

        let mut terms = Vec::new();
        let mut term_lookup = vec![None; terminology.n_terms()];
        let mut entity_lookup = vec![None; terminology.n_entities()];
        let mut entity_order = Vec::new();
        for (t, &f) in term_freqs.iter().enumerate() {
            if f >= min_count {
                term_lookup[t] = Some(terms.len() as u32);
                terms.push((t, f));
                for &e in terminology.entities_of(t) {
                    entity_order.push(e as usize);
                }
            }
        }
        entity_order.sort_unstable();
        entity_order.dedup();
        for (v, &e) in entity_order.iter().enumerate() {
            entity_lookup[e] = Some(v as u32);
        }
        let entities = entity_order
            .iter()
            .map(|&e| terminology.entity(e).clone())
            .collect();
        let term_keys = terms
            .iter()
            .map(|&(t, _)| terminology.term(t).to_vec())
            .collect();
        let term_entities = terms
            .iter()
            .map(|&(t, _)| {
                terminology
                    .entities_of(t)
                    .iter()
                    .map(|&e| entity_lookup[e as usize].unwrap())
                    .collect()
            })
            .collect();

        let keep_prob = words
            .values()
            .map(|&f| keep_probability(f, total_word_tokens, subsample_coeff))
            .collect();

        let weights: Vec<f64> = words
            .values()
            .map(|&f| (f as f64).powf(NEGATIVE_POWER))
            .collect();
        let mass: f64 = weights.iter().sum();
        let negative_probs = weights.iter().map(|w| w / mass).collect();
        let negative_sampler = WeightedAliasIndex::new(weights)
            .map_err(|e| Error::InvalidConfig(format!("negative sampling table: {e}")))?;

        Ok(Vocabulary {
            words,
            terms,
            term_keys,
            term_lookup,
            entities,
            entity_lookup,
            term_entities,
            min_count,
            total_word_tokens,
            subsample_coeff,
            keep_prob,
            negative_probs,
            negative_sampler,
        })
    }

    pub fn n_words(&self) -> usize {
        self.words.len()
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn n_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn word(&self, idx: usize) -> &str {
        self.words.get_index(idx).unwrap().0
    }

    pub fn word_index(&self, word: &str) -> Option<usize> {
        self.words.get_index_of(word)
    }

    pub fn word_frequency(&self, idx: usize) -> u64 {
        self.words[idx]
    }

    pub fn words(&self) -> impl Iterator<Item = (&str, u64)> {
        self.words.iter().map(|(w, &f)| (w.as_str(), f))
    }

    pub fn term_tokens(&self, idx: usize) -> &[String] {
        &self.term_keys[idx]
    }

    pub fn term_frequency(&self, idx: usize) -> u64 {
        self.terms[idx].1
    }

    /// Vocabulary index of a terminology term, if retained.
    pub fn term_for(&self, terminology_term: usize) -> Option<usize> {
        self.term_lookup
            .get(terminology_term)
            .copied()
            .flatten()
            .map(|t| t as usize)
    }

    pub fn entity(&self, idx: usize) -> &EntityId {
        &self.entities[idx]
    }

    /// Vocabulary index of a terminology entity, if retained.
    pub fn entity_for(&self, terminology_entity: usize) -> Option<usize> {
        self.entity_lookup
            .get(terminology_entity)
            .copied()
            .flatten()
            .map(|e| e as usize)
    }

    /// Retained entities a retained term can refer to.
    pub fn term_entities(&self, term: usize) -> &[u32] {
        &self.term_entities[term]
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    pub fn subsample_coeff(&self) -> f64 {
        self.subsample_coeff
    }

    /// All corpus tokens, retained or not.
    pub fn total_word_tokens(&self) -> u64 {
        self.total_word_tokens
    }

    /// Corpus tokens belonging to retained words.
    pub fn retained_word_tokens(&self) -> u64 {
        self.words.values().sum()
    }

    pub fn keep_prob(&self, word: usize) -> f64 {
        self.keep_prob[word]
    }

    /// Exact negative-sampling probability of a word.
    pub fn negative_probability(&self, word: usize) -> f64 {
        self.negative_probs[word]
    }

    /// Draw a word index from the unigram^0.75 distribution.
    pub fn negative_sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.negative_sampler.sample(rng)
    }

    /// Map a document onto vocabulary ids and retained term occurrences.
    pub fn encode_document(
        &self,
        corpus: &Corpus,
        doc: usize,
        occurrences: &[TermOccurrence],
    ) -> EncodedDocument {
        let tokens = corpus
            .doc(doc)
            .iter()
            .map(|&t| self.word_index(corpus.token(t)).map(|w| w as u32))
            .collect();
        let occurrences = occurrences
            .iter()
            .filter_map(|occ| {
                self.term_for(occ.term as usize).map(|t| TermOccurrence {
                    term: t as u32,
                    ..*occ
                })
            })
            .collect();
        EncodedDocument {
            tokens,
            occurrences,
        }
    }

    pub fn encode(&self, corpus: &Corpus, annotations: &[Vec<TermOccurrence>]) -> Vec<EncodedDocument> {
        (0..corpus.n_docs())
            .map(|d| self.encode_document(corpus, d, &annotations[d]))
            .collect()
    }

    /// Tab-separated `kind key frequency` lines for words, then terms.
    pub fn write_tsv<W: std::io::Write>(&self, mut writer: W) -> Result<()> {
        for (w, f) in self.words() {
            writeln!(writer, "word\t{w}\t{f}")?;
        }
        for (key, &(_, f)) in self.term_keys.iter().zip(&self.terms) {
            writeln!(writer, "term\t{}\t{f}", key.join(" "))?;
        }
        Ok(())
    }
}

/// A document before subsampling: vocabulary ids (`None` for
/// out-of-vocabulary tokens) and retained term occurrences, whose term
/// field is a vocabulary term index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedDocument {
    pub tokens: Vec<Option<u32>>,
    pub occurrences: Vec<TermOccurrence>,
}

impl EncodedDocument {
    /// Number of in-vocabulary tokens.
    pub fn n_known(&self) -> usize {
        self.tokens.iter().filter(|t| t.is_some()).count()
    }
}

/// A document as seen by one training epoch.
///
/// `words[i]` sits at original position `positions[i]`; term occurrences
/// keep their original spans.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StreamDocument {
    pub words: Vec<u32>,
    pub positions: Vec<u32>,
    pub occurrences: Vec<TermOccurrence>,
    /// Length of the original token sequence.
    pub len: u32,
}

impl StreamDocument {
    /// Drop out-of-vocabulary tokens and subsample frequent words.
    pub fn prepare<R: Rng + ?Sized>(doc: &EncodedDocument, vocab: &Vocabulary, rng: &mut R) -> Self {
        let mut words = Vec::with_capacity(doc.tokens.len());
        let mut positions = Vec::with_capacity(doc.tokens.len());
        for (pos, tok) in doc.tokens.iter().enumerate() {
            let Some(w) = *tok else { continue };
            let keep = vocab.keep_prob(w as usize);
            if keep >= 1.0 || rng.random::<f64>() < keep {
                words.push(w);
                positions.push(pos as u32);
            }
        }
        StreamDocument {
            words,
            positions,
            occurrences: doc.occurrences.clone(),
            len: doc.tokens.len() as u32,
        }
    }
}

/// One epoch's view of the whole corpus.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TrainingStream {
    pub docs: Vec<StreamDocument>,
}

impl TrainingStream {
    pub fn prepare<R: Rng + ?Sized>(docs: &[EncodedDocument], vocab: &Vocabulary, rng: &mut R) -> Self {
        TrainingStream {
            docs: docs.iter().map(|d| StreamDocument::prepare(d, vocab, rng)).collect(),
        }
    }
}

/// Encode and subsample a corpus in one go.
pub fn prepare_stream<R: Rng + ?Sized>(
    corpus: &Corpus,
    vocab: &Vocabulary,
    automaton: &MatchAutomaton,
    rng: &mut R,
) -> TrainingStream {
    let annotations = corpus.annotate(automaton);
    TrainingStream::prepare(&vocab.encode(corpus, &annotations), vocab, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn eid(s: &str) -> EntityId {
        EntityId::new(s).unwrap()
    }

    fn setup(docs: &[&str], pairs: &[(&str, &str)], min_count: u64, coeff: f64) -> (Corpus, Terminology, MatchAutomaton, Vocabulary) {
        let corpus = Corpus::from_documents(docs);
        let t = Terminology::from_pairs("t", pairs.iter().map(|&(s, e)| (s, eid(e)))).unwrap();
        let a = MatchAutomaton::build(&t).unwrap();
        let ann = corpus.annotate(&a);
        let v = Vocabulary::build(&corpus, &ann, &t, min_count, coeff).unwrap();
        (corpus, t, a, v)
    }

    #[test]
    fn counts_words() {
        let (_, _, _, v) = setup(&["a b a"], &[("zzz", "E")], 1, 1e-5);
        assert_eq!(v.n_words(), 2);
        assert_eq!(v.word(0), "a");
        assert_eq!(v.word_frequency(0), 2);
        assert_eq!(v.word_frequency(v.word_index("b").unwrap()), 1);
    }

    #[test]
    fn min_count_filters_words_and_terms() {
        let mut docs = vec!["rare"; 9];
        docs.extend(vec!["common"; 10]);
        docs.extend(vec!["flu shot"; 12]);
        docs.extend(vec!["head cold"; 3]);
        let (_, t, _, v) = setup(
            &docs,
            &[("flu shot", "E1"), ("head cold", "E2"), ("head cold", "E3")],
            10,
            1e-5,
        );
        assert!(v.word_index("rare").is_none());
        assert!(v.word_index("common").is_some());
        assert_eq!(v.n_terms(), 1);
        assert_eq!(v.term_tokens(0), ["flu", "shot"]);
        assert_eq!(v.term_frequency(0), 12);
        let head_cold = t.term_index(&normalize("head cold")).unwrap();
        assert!(v.term_for(head_cold).is_none());
        // entities reachable only through a dropped term are dropped too
        assert_eq!(v.n_entities(), 1);
        assert_eq!(v.entity(0), &eid("E1"));
        assert!(v.entity_for(t.entity_index(&eid("E2")).unwrap()).is_none());
    }

    #[test]
    fn empty_inputs_rejected() {
        let t = Terminology::from_pairs("t", [("x", eid("E"))]).unwrap();
        let corpus = Corpus::from_documents(["", "!!"]);
        let err = Vocabulary::build(&corpus, &[vec![], vec![]], &t, 1, 1e-5).unwrap_err();
        assert!(matches!(err, Error::EmptyCorpus));

        let corpus = Corpus::from_documents(["a b c"]);
        let err = Vocabulary::build(&corpus, &[vec![]], &t, 2, 1e-5).unwrap_err();
        assert!(matches!(err, Error::EmptyVocabulary(2)));

        assert!(Vocabulary::build(&corpus, &[vec![]], &t, 0, 1e-5).is_err());
        assert!(Vocabulary::build(&corpus, &[vec![]], &t, 1, 0.0).is_err());
    }

    #[test]
    fn keep_probability_examples() {
        let total = 1_000_000;
        let coeff = 1e-5;
        assert_eq!(keep_probability(10, total, coeff), 1.0);
        assert!((keep_probability(40, total, coeff) - 0.5).abs() < 1e-12);
        assert_eq!(keep_probability(1, total, coeff), 1.0);
        assert_eq!(keep_probability(total, total, 1.0), 1.0);
    }

    #[test]
    fn negative_distribution() {
        let mut docs = vec!["b"; 16];
        docs.push("a");
        let (_, _, _, v) = setup(&docs, &[("zzz", "E")], 1, 1.0);
        let a = v.word_index("a").unwrap();
        let b = v.word_index("b").unwrap();
        assert!((v.negative_probability(a) - 1.0 / 9.0).abs() < 1e-12);
        assert!((v.negative_probability(b) - 8.0 / 9.0).abs() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 1_000_000;
        let hits = (0..n).filter(|_| v.negative_sample(&mut rng) == a).count();
        assert!((hits as f64 / n as f64 - 1.0 / 9.0).abs() < 0.01);
    }

    #[test]
    fn single_word_vocabulary_always_sampled() {
        let (_, _, _, v) = setup(&["only only"], &[("zzz", "E")], 1, 1e-5);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!((0..100).all(|_| v.negative_sample(&mut rng) == 0));
    }

    #[test]
    fn negative_probabilities_match_power_law() {
        let docs = ["a a a a b b c d d d d d d d d d"];
        let (_, _, _, v) = setup(&docs, &[("zzz", "E")], 1, 1.0);
        let mass: f64 = v.words().map(|(_, f)| (f as f64).powf(0.75)).sum();
        let total: f64 = (0..v.n_words()).map(|w| v.negative_probability(w)).sum();
        assert!((total - 1.0).abs() < 1e-9);
        for (i, (_, f)) in v.words().enumerate() {
            assert!((v.negative_probability(i) - (f as f64).powf(0.75) / mass).abs() < 1e-12);
        }
    }

    #[test]
    fn stream_without_terms_is_plain_skipgram_input() {
        let (c, _, a, v) = setup(&["x y z x"], &[("qqq", "E")], 1, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = prepare_stream(&c, &v, &a, &mut rng);
        assert_eq!(s.docs.len(), 1);
        assert!(s.docs[0].occurrences.is_empty());
        assert_eq!(s.docs[0].positions, vec![0, 1, 2, 3]);
        let words: Vec<&str> = s.docs[0].words.iter().map(|&w| v.word(w as usize)).collect();
        assert_eq!(words, ["x", "y", "z", "x"]);
    }

    #[test]
    fn term_only_document() {
        let (c, _, a, v) = setup(&["flu shot"], &[("flu shot", "E")], 1, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = prepare_stream(&c, &v, &a, &mut rng);
        let doc = &s.docs[0];
        assert_eq!(doc.occurrences.len(), 1);
        assert_eq!((doc.occurrences[0].start, doc.occurrences[0].end), (0, 2));
    }

    #[test]
    fn subsampling_keeps_term_spans_and_is_seeded() {
        let text = "the the the the flu shot the the the the".repeat(20);
        let (c, _, a, v) = setup(&[text.as_str()], &[("flu shot", "E")], 1, 1e-3);
        let ann = c.annotate(&a);
        let encoded = v.encode(&c, &ann);
        let s1 = TrainingStream::prepare(&encoded, &v, &mut ChaCha8Rng::seed_from_u64(9));
        let s2 = TrainingStream::prepare(&encoded, &v, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(s1, s2);
        let doc = &s1.docs[0];
        assert!(doc.words.len() < encoded[0].n_known());
        assert_eq!(doc.occurrences, encoded[0].occurrences);
        assert!(doc.positions.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn large_coefficient_never_drops() {
        let (c, _, a, v) = setup(&["a a a a b"], &[("zzz", "E")], 1, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let s = prepare_stream(&c, &v, &a, &mut rng);
            assert_eq!(s.docs[0].words.len(), 5);
        }
    }

    #[test]
    fn frequency_conservation() {
        let (c, _, _, v) = setup(&["a a a b b c d e f f"], &[("zzz", "E")], 2, 1e-5);
        let retained = v.retained_word_tokens();
        let dropped: u64 = c
            .tokens
            .values()
            .filter(|&&f| f < v.min_count())
            .sum();
        assert_eq!(retained + dropped, v.total_word_tokens());
        assert_eq!(v.total_word_tokens(), 10);
    }

    #[test]
    fn vocabulary_dump() {
        let (_, _, _, v) = setup(&["b a a", "flu"], &[("flu", "E")], 1, 1.0);
        let mut out = Vec::new();
        v.write_tsv(&mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "word\ta\t2\nword\tb\t1\nword\tflu\t1\nterm\tflu\t1\n"
        );
    }
}
