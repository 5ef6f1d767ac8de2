//! Synthetic two-topic corpus shared by the integration tests.
//!
//! Topic A has entities A0..A9, topic B has B0..B9. Entity `Xi` is named by
//! its own term `uxi` and by the ambiguous term `ambi disease`, which it
//! shares with the entity of the same index in the other topic. Documents
//! draw context words from their topic's word pool and from a pool of
//! topic-neutral filler words.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use jet::eval::{Definitions, WsdInstance};
use jet::{normalize, EntityId};

pub const TOPICS: [char; 2] = ['a', 'b'];
pub const ENTITIES_PER_TOPIC: usize = 10;
const TOPIC_WORDS: usize = 40;
const FILLER_WORDS: usize = 20;
const DOC_LEN: usize = 20;

pub fn entity(topic: usize, i: usize) -> EntityId {
    EntityId::new(format!("{}{i}", TOPICS[topic].to_ascii_uppercase())).unwrap()
}

pub fn topic_of(e: &str) -> usize {
    match e.as_bytes()[0] {
        b'A' => 0,
        b'B' => 1,
        _ => panic!("not a synthetic entity: {e}"),
    }
}

pub fn unique_term(topic: usize, i: usize) -> String {
    format!("u{}{i}", TOPICS[topic])
}

pub fn ambiguous_term(i: usize) -> String {
    format!("amb{i} disease")
}

fn topic_word<R: Rng>(topic: usize, rng: &mut R) -> String {
    format!("{}w{}", TOPICS[topic], rng.random_range(0..TOPIC_WORDS))
}

fn filler<R: Rng>(rng: &mut R) -> String {
    format!("f{}", rng.random_range(0..FILLER_WORDS))
}

fn context_word<R: Rng>(topic: usize, rng: &mut R) -> String {
    if rng.random_bool(0.65) {
        topic_word(topic, rng)
    } else {
        filler(rng)
    }
}

/// (surface, entity) records of the terminology.
pub fn terminology_pairs() -> Vec<(String, EntityId)> {
    let mut pairs = Vec::new();
    for topic in 0..2 {
        for i in 0..ENTITIES_PER_TOPIC {
            pairs.push((unique_term(topic, i), entity(topic, i)));
            pairs.push((ambiguous_term(i), entity(topic, i)));
        }
    }
    pairs
}

pub fn terminology() -> jet::Terminology {
    jet::Terminology::from_pairs("synthetic", terminology_pairs()).unwrap()
}

/// Documents totalling at least `n_tokens` tokens.
pub fn corpus_lines(n_tokens: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut docs = Vec::new();
    let mut total = 0;
    while total < n_tokens {
        let topic = rng.random_range(0..2);
        let mut toks: Vec<String> = Vec::with_capacity(DOC_LEN + 2);
        while toks.len() < DOC_LEN {
            if rng.random_bool(0.12) {
                let i = rng.random_range(0..ENTITIES_PER_TOPIC);
                if rng.random_bool(0.7) {
                    toks.push(unique_term(topic, i));
                } else {
                    toks.extend(ambiguous_term(i).split(' ').map(str::to_owned));
                }
            } else {
                toks.push(context_word(topic, &mut rng));
            }
        }
        total += toks.len();
        docs.push(toks.join(" "));
    }
    docs
}

pub fn corpus(n_tokens: usize, seed: u64) -> jet::Corpus {
    jet::Corpus::from_documents(corpus_lines(n_tokens, seed))
}

/// Balanced disambiguation instances for the ambiguous terms: the gold
/// sense decides which topic the context words come from.
pub fn wsd_instances(n: usize, context_len: usize, seed: u64) -> Vec<WsdInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|k| {
            let topic = k % 2;
            let i = rng.random_range(0..ENTITIES_PER_TOPIC);
            let context: Vec<String> = (0..context_len).map(|_| context_word(topic, &mut rng)).collect();
            WsdInstance {
                mention: ambiguous_term(i),
                context: normalize(&context.join(" ")),
                candidates: vec![entity(0, i), entity(1, i)],
                gold: entity(topic, i),
            }
        })
        .collect()
}

/// One short definition per entity, written in its topic's words.
pub fn definitions(seed: u64) -> Definitions {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut defs = Definitions::new();
    for topic in 0..2 {
        for i in 0..ENTITIES_PER_TOPIC {
            let words: Vec<String> = (0..6).map(|_| topic_word(topic, &mut rng)).collect();
            defs.insert(entity(topic, i), vec![words.join(" ")]);
        }
    }
    defs
}
