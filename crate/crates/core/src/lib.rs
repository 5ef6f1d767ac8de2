//! Joint embeddings of words, terms and entities learned with distant
//! supervision from a term→entity terminology.

pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod matcher;
pub mod output;
pub mod terminology;
pub mod trainer;

pub use corpus::{Corpus, Vocabulary};
pub use embeddings::{cosine, EmbeddingSet, Format, Neighbor, PointKind};
pub use error::{Error, Result};
pub use matcher::{MatchAutomaton, TermOccurrence};
pub use terminology::{normalize, EntityId, Terminology};
pub use trainer::{train, train_with, ModelParams, TrainConfig, TrainedModel, Trainer};
