//! Fixtures shared by the benchmarks.

use twistbad_core::game::{CurveSpec, GameConfig};
use twistbad_core::geometry::{AffineSubspace, LinearSubspace};
use twistbad_core::lattice::{build_lambda, LambdaOptions, LambdaSequence};
use twistbad_core::quality::lower_estimate;
use twistbad_core::{Precision, QualityKind, SystemMatrix, Weights};

pub struct Planar {
    pub prec: Precision,
    pub theta: SystemMatrix,
    pub k: Weights,
    pub line: AffineSubspace,
}

/// `Theta = (sqrt 2, sqrt 3)^T`, `k = (2/3, 1/3)`, the line through `(3, 2)`.
pub fn planar() -> Planar {
    let prec = Precision::default();
    let theta = SystemMatrix::parse("sqrt(2);sqrt(3)", &prec).expect("literal matrix");
    let k = Weights::parse(&["2/3", "1/3"], 1, &prec).expect("literal weights");
    let dir = LinearSubspace::from_literals(2, &[vec!["3", "2"]], &prec).expect("literal line");
    let line = AffineSubspace::through_origin(dir, &prec);
    Planar { prec, theta, k, line }
}

pub struct Golden {
    pub prec: Precision,
    pub theta: SystemMatrix,
    pub k: Weights,
    pub curve: CurveSpec,
    pub game: GameConfig,
    pub sequence: LambdaSequence,
}

/// The golden ratio with the identity curve, `beta = 1/2` and a five-term
/// sequence.
pub fn golden() -> Golden {
    let prec = Precision::default();
    let theta = SystemMatrix::parse("phi", &prec).expect("literal matrix");
    let k = Weights::parse(&["1"], 1, &prec).expect("literal weights");
    let curve = CurveSpec::from_name("identity", &prec).expect("builtin curve");
    let cert = lower_estimate(QualityKind::Homogeneous, &theta, &k, None, 2 * 8u64.pow(4), &prec).expect("certificate");
    let game = GameConfig::new(&curve, &k, prec.float(0.5), &cert, None, None, &prec).expect("game config");
    let dir = LinearSubspace::new(1, vec![vec![prec.float(1)]], &prec).expect("line");
    let dual = lower_estimate(QualityKind::Dual, &theta, &k, None, 50, &prec).expect("dual certificate");
    let sequence = build_lambda(
        &theta,
        &k,
        &AffineSubspace::through_origin(dir, &prec),
        &dual,
        5,
        &LambdaOptions::default(),
        &prec,
    )
    .expect("sequence");
    Golden { prec, theta, k, curve, game, sequence }
}
