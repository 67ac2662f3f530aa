pub mod bench;
pub mod datasets;
pub mod error;
pub mod evaluator;
pub mod intervals;
pub mod kg;
pub mod sampling;
pub mod special;

pub use error::{Error, Result};
pub use kg::KnowledgeGraph;
pub use special::BetaParams;
