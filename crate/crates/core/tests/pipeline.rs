mod common;

use std::collections::HashMap;

use jet::corpus::Vocabulary;
use jet::trainer::{train, train_with, TrainConfig};
use jet::{EmbeddingSet, MatchAutomaton, PointKind, Terminology};

fn small_config() -> TrainConfig {
    TrainConfig {
        dim: 12,
        epochs: 3,
        min_count: 5,
        subsample_coeff: 1e-3,
        ..TrainConfig::default()
    }
}

#[test]
fn terminology_load_reports_bad_lines() {
    let tsv = "common cold\tC1\nno tab here\n!!\tC9\ncold\tC1\ncold\tC2\ncold\tC2\nx\tbad id\n";
    let (t, report) = Terminology::load("fixture", tsv.as_bytes()).unwrap();
    assert_eq!(report.dropped_empty, 1);
    assert_eq!(report.errors.len(), 2);
    assert_eq!(t.n_terms(), 2);
    assert_eq!(t.polysemy(&["cold".to_string()]), 2);

    let mut out = Vec::new();
    t.write_tsv(&mut out).unwrap();
    let (again, _) = Terminology::load("fixture", out.as_slice()).unwrap();
    assert_eq!(again.terms().collect::<Vec<_>>(), t.terms().collect::<Vec<_>>());
}

#[test]
fn vocabulary_counts_match_annotations() {
    let corpus = common::corpus(20_000, 4);
    let terminology = common::terminology();
    let aut = MatchAutomaton::build(&terminology).unwrap();
    let annotations = corpus.annotate(&aut);
    let vocab = Vocabulary::build(&corpus, &annotations, &terminology, 5, 1e-3).unwrap();

    let mut by_term: HashMap<Vec<String>, u64> = HashMap::new();
    for occ in annotations.iter().flatten() {
        *by_term.entry(terminology.term(occ.term as usize).to_vec()).or_default() += 1;
    }
    for t in 0..vocab.n_terms() {
        assert_eq!(vocab.term_frequency(t), by_term[vocab.term_tokens(t)]);
    }
    let word_total: u64 = vocab.words().map(|(_, f)| f).sum();
    assert_eq!(word_total, vocab.retained_word_tokens());
    assert_eq!(vocab.total_word_tokens(), corpus.n_tokens());
    // every synthetic entity keeps at least its unique term
    assert_eq!(vocab.n_entities(), 20);
}

#[test]
fn same_seed_same_model() {
    let corpus = common::corpus(20_000, 5);
    let terminology = common::terminology();
    let a = train(&corpus, &terminology, &small_config()).unwrap();
    let b = train(&corpus, &terminology, &small_config()).unwrap();
    assert_eq!(a.params, b.params);
    let c = train(&corpus, &terminology, &TrainConfig { seed: 2, ..small_config() }).unwrap();
    assert_ne!(a.params, c.params);
}

#[test]
fn parallel_training_stays_finite() {
    let corpus = common::corpus(30_000, 6);
    let terminology = common::terminology();
    let cfg = TrainConfig {
        workers: 3,
        ..small_config()
    };
    let mut seen = Vec::new();
    let model = train_with(&corpus, &terminology, &cfg, |stats, _, params| {
        assert!(params.is_finite());
        seen.push(stats.epoch);
        Ok(())
    })
    .unwrap();
    assert_eq!(seen, [0, 1, 2]);
    assert!(model.params.is_finite());
    let last = model.epochs.last().unwrap();
    assert!(last.word_updates > 0 && last.term_updates > 0);
    assert!(last.entity_updates >= last.term_updates);
}

#[test]
fn model_to_embeddings_keeps_every_point() {
    let corpus = common::corpus(20_000, 7);
    let terminology = common::terminology();
    let model = train(&corpus, &terminology, &small_config()).unwrap();
    let set = EmbeddingSet::from_model(&model.vocab, &model.params).unwrap();
    assert_eq!(set.len(PointKind::Word), model.vocab.n_words());
    assert_eq!(set.len(PointKind::Term), model.vocab.n_terms());
    assert_eq!(set.len(PointKind::Entity), model.vocab.n_entities());
    assert!(set.lookup("term:amb3_disease").is_ok());
    assert!(set.lookup("ent:B7").is_ok());
    let v = set.term_or_backoff("amb3 disease").unwrap();
    assert_eq!(v, set.vector(PointKind::Term, "amb3_disease").unwrap());
}
