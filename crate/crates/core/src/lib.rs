pub mod error;
pub mod numeric;
pub mod quality;
pub mod game;
pub mod geometry;
pub mod lattice;
pub mod transference;

pub use error::{Error, Result};
pub use game::{BobStrategy, CurveKind, CurveSpec, GameConfig, GameTranscript, Interval};
pub use geometry::{AffineSubspace, LinearSubspace, SubspaceContext};
pub use lattice::{LambdaSequence, LatticePoint};
pub use numeric::{Precision, RealScalar, Weights};
pub use quality::{BadnessCertificate, QualityKind, SystemMatrix};
pub use transference::TransferenceReport;
