use rug::Float;
use twistbad_core::geometry::{AffineSubspace, LinearSubspace, SubspaceCase};
use twistbad_core::lattice::{build_lambda, LambdaOptions};
use twistbad_core::numeric::{Precision, Weights};
use twistbad_core::quality::{lower_estimate, QualityKind, SystemMatrix};

fn instance(r_max: usize, prec: &Precision) -> twistbad_core::lattice::LambdaSequence {
    let theta = SystemMatrix::parse("sqrt(2);sqrt(3)", prec).unwrap();
    let k = Weights::parse(&["2/3", "1/3"], 1, prec).unwrap();
    let line = LinearSubspace::from_literals(2, &[vec!["3", "2"]], prec).unwrap();
    let a = AffineSubspace::through_origin(line, prec);
    let cert = lower_estimate(QualityKind::Dual, &theta, &k, None, 1000, prec).unwrap();
    build_lambda(&theta, &k, &a, &cert, r_max, &LambdaOptions::default(), prec).unwrap()
}

#[test]
fn generic_line_three_scales() {
    let prec = Precision::default();
    let seq = instance(3, &prec);
    assert_eq!(seq.context.t, 1);
    assert_eq!(seq.context.case, SubspaceCase::Case2);
    assert_eq!(seq.r_max(), 3);
    assert!(seq.failed_checks().is_empty(), "{:?}", seq.failed_checks());
    // coordinates before the lead slot carry (2.1''); here there are none
    let lead = seq.context.lead;
    let per_entry = ["2uy", "2uz", "2.2''", "2uu", "P1", "P2", "angle"];
    for e in &seq.entries {
        for tag in per_entry {
            assert!(e.checks.iter().any(|c| c.tag == tag), "entry {} lacks {tag}", e.r);
        }
        assert_eq!(e.checks.iter().filter(|c| c.tag == "2.1''").count(), lead);
    }
    for tag in ["lacunarity", "psi-decreasing", "jj"] {
        assert!(seq.sequence_checks.iter().any(|c| c.tag == tag), "missing {tag}");
    }
    let psi = seq.psi();
    let r2 = Float::with_val(prec.bits(), seq.r_lambda.square_ref());
    for pair in psi.windows(2) {
        assert!(pair[1] < pair[0]);
        assert!(Float::with_val(prec.bits(), &pair[0] / &pair[1]) <= r2);
    }
    for pair in seq.entries.windows(2) {
        let ratio = Float::with_val(prec.bits(), &pair[1].u_tilde_norm / &pair[0].u_tilde_norm);
        assert!(ratio >= seq.ratio_target);
        let ratio = Float::with_val(prec.bits(), &pair[1].u_proj_norm / &pair[0].u_proj_norm);
        assert!(ratio >= 2);
    }
}

#[test]
fn rebuild_is_byte_identical() {
    let prec = Precision::default();
    let a = serde_json::to_string(&instance(2, &prec)).unwrap();
    let b = serde_json::to_string(&instance(2, &prec)).unwrap();
    assert_eq!(a, b);
}
