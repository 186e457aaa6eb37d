pub mod advtrain;
pub mod attacks;
pub mod error;
pub mod graph;
pub mod harness;
pub mod models;
pub mod rng;
pub mod tensor;

pub use attacks::{AttackOutcome, Budget, FrozenModel, Goal};
pub use error::{Error, Result};
pub use graph::{load_bundle, save_bundle, Distance, FeatureKind, Graph, GraphParts, Subgraph};
pub use models::{Architecture, ModelParams, ModelSpec, TrainConfig, TrainedModel};
pub use tensor::{CsrMatrix, DenseMatrix, Gradients, SparseWeightedAdj, Tape, Var};
