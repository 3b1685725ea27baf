//! From a uniform lower bound `c(x) = min_r ||u_r . x||` over the sequence to
//! an explicit twisted badness constant for `x`, checked `q` by `q`.

use rayon::prelude::*;
use rug::ops::Pow;
use rug::{Assign, Float, Rational};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::SubspaceContext;
use crate::lattice::{n_lambda_membership, CheckRecord, LambdaSequence, Relation};
use crate::numeric::{dist_nearest_int, fmt_real, serialize_float, Precision, Weights};
use crate::quality::{theta_dual_apply, theta_row_apply, twisted_quality, SystemMatrix};

/// Default cap on the number of `q` checked by [`verify_fact_a`].
pub const DEFAULT_Q_BUDGET: u128 = 20_000_000;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PsiReport {
    pub checks: Vec<CheckRecord>,
    /// `R^2 / (psi_{r-1} / psi_r)` for `r = 1..`.
    #[serde(serialize_with = "crate::numeric::serialize_floats")]
    pub ratio_slack: Vec<Float>,
}

/// Strict decrease of `psi` and `psi_{r-1} / psi_r <= R^2`.
pub fn psi_checks(seq: &LambdaSequence, prec: &Precision) -> Result<PsiReport> {
    if seq.entries.len() < 2 {
        return Err(Error::Precondition("need at least two entries".into()));
    }
    let bits = prec.bits();
    let tol = prec.tolerance();
    let r2 = Float::with_val(bits, seq.r_lambda.square_ref());
    let mut checks = Vec::new();
    let mut ratio_slack = Vec::new();
    for pair in seq.entries.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let dec = CheckRecord::new("psi-decreasing", Some(b.r), b.psi.clone(), Relation::Lt, a.psi.clone(), &tol);
        let ratio = Float::with_val(bits, &a.psi / &b.psi);
        ratio_slack.push(Float::with_val(bits, &r2 / &ratio));
        let jj = CheckRecord::new("jj", Some(b.r), ratio, Relation::Le, r2.clone(), &tol);
        for c in [dec, jj] {
            checks.push(c.into_result()?);
        }
    }
    Ok(PsiReport { checks, ratio_slack })
}

/// The `r` (0-based into `psi`, at least 1) with
/// `psi[r-1] >= c / (2 m |q|) > psi[r]`.
pub fn choose_r(c_x: &Float, q_norm: u64, m: usize, psi: &[Float]) -> Result<usize> {
    let th = threshold(c_x, q_norm, m)?;
    bracket_check(&th, c_x, m, psi)?;
    let r = (1..psi.len())
        .find(|&r| psi[r - 1] >= th && th > psi[r])
        .expect("bracket exists after the range checks");
    Ok(r)
}

/// Same as [`choose_r`] by bisection.
pub fn choose_r_bisect(c_x: &Float, q_norm: u64, m: usize, psi: &[Float]) -> Result<usize> {
    let th = threshold(c_x, q_norm, m)?;
    bracket_check(&th, c_x, m, psi)?;
    // invariant: psi[lo] >= th > psi[hi]
    let (mut lo, mut hi) = (0, psi.len() - 1);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if psi[mid] >= th {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

fn threshold(c_x: &Float, q_norm: u64, m: usize) -> Result<Float> {
    if q_norm == 0 {
        return Err(Error::Domain("|q| must be positive".into()));
    }
    if *c_x <= 0 {
        return Err(Error::Domain("c(x) must be positive".into()));
    }
    let den = Float::with_val(c_x.prec(), 2 * m as u64) * q_norm;
    Ok(Float::with_val(c_x.prec(), c_x / den))
}

fn bracket_check(th: &Float, c_x: &Float, m: usize, psi: &[Float]) -> Result<()> {
    let (first, last) = match (psi.first(), psi.last()) {
        (Some(f), Some(l)) if psi.len() >= 2 => (f, l),
        _ => return Err(Error::Precondition("need at least two values of psi".into())),
    };
    if th > first {
        return Err(Error::Precondition(format!(
            "threshold {} lies above psi_1 = {}",
            fmt_real(th),
            fmt_real(first)
        )));
    }
    if th <= last {
        return Err(Error::RangeExhausted {
            max_admissible_q: max_admissible_q(c_x, m, last),
        });
    }
    Ok(())
}

/// Largest `q` with `c / (2 m q) > psi_last`, i.e. `ceil(c / (2 m psi_last)) - 1`.
pub fn max_admissible_q(c_x: &Float, m: usize, psi_last: &Float) -> u64 {
    let bits = c_x.prec();
    let x = Float::with_val(bits, c_x / Float::with_val(bits, psi_last * (2 * m as u64)));
    let ceil = x.ceil().to_integer().and_then(|v| v.to_u64()).unwrap_or(u64::MAX);
    ceil.saturating_sub(1)
}

/// Smallest `q` with `c / (2 m q) <= psi_first`.
pub fn min_chain_q(c_x: &Float, m: usize, psi_first: &Float) -> u64 {
    let bits = c_x.prec();
    let x = Float::with_val(bits, c_x / Float::with_val(bits, psi_first * (2 * m as u64)));
    x.ceil().to_integer().and_then(|v| v.to_u64()).unwrap_or(u64::MAX).max(1)
}

/// `(c / (2n)) min_i lambda^(-t) gamma^(-m (k_i - 1)) (c / (2 m R^2))^(m k_i)`.
pub fn kappa_bound(
    c_x: &Float,
    ctx: &SubspaceContext,
    gamma: &Float,
    r_lambda: &Float,
    k: &[Float],
    m: usize,
) -> Result<Float> {
    if *c_x <= 0 {
        return Err(Error::Domain(format!("c(x) = {} is not positive", fmt_real(c_x))));
    }
    let bits = c_x.prec();
    let n = k.len();
    let lam = Float::with_val(bits, (&ctx.lambda).pow(-(ctx.t as i32)));
    let den = Float::with_val(bits, r_lambda.square_ref()) * (2 * m as u64);
    let base = Float::with_val(bits, c_x / &den);
    let mut best: Option<Float> = None;
    for ki in k {
        let mk = Float::with_val(bits, ki * m as u64);
        let g = Float::with_val(bits, gamma.pow(Float::with_val(bits, 1 - ki) * m as u64));
        let v = Float::with_val(bits, &lam * &g) * Float::with_val(bits, (&base).pow(&mk));
        if best.as_ref().is_none_or(|b| v < *b) {
            best = Some(v);
        }
    }
    let min = best.ok_or_else(|| Error::Validation("no weights".into()))?;
    Ok(Float::with_val(bits, c_x / (2 * n as u64)) * min)
}

/// Both sides of `u . x = sum_j q_j Theta*_j(u) - sum_i (Theta_i(q) - x_i) u_i`
/// in exact rational arithmetic.
pub fn identity_sides_exact(theta: &[Vec<Rational>], u: &[i64], q: &[i64], x: &[Rational]) -> (Rational, Rational) {
    let mut lhs = Rational::new();
    for (xi, &ui) in x.iter().zip(u) {
        lhs += Rational::from(xi * ui);
    }
    let mut rhs = Rational::new();
    for (j, &qj) in q.iter().enumerate() {
        let mut dual = Rational::new();
        for (i, &ui) in u.iter().enumerate() {
            dual += Rational::from(&theta[i][j] * ui);
        }
        rhs += dual * qj;
    }
    for (i, &ui) in u.iter().enumerate() {
        let mut row = Rational::new();
        for (j, &qj) in q.iter().enumerate() {
            row += Rational::from(&theta[i][j] * qj);
        }
        rhs -= (row - &x[i]) * ui;
    }
    (lhs, rhs)
}

/// `|lhs - rhs|` of the same identity in floating point.
pub fn identity_residual(theta: &SystemMatrix, u: &[i64], q: &[i64], x: &[Float]) -> Result<Float> {
    let bits = theta.bits();
    let mut lhs = Float::new(bits);
    for (xi, &ui) in x.iter().zip(u) {
        lhs += Float::with_val(bits, xi * ui);
    }
    let mut rhs = Float::new(bits);
    for (j, &qj) in q.iter().enumerate() {
        rhs += theta_dual_apply(theta, j, u)? * qj;
    }
    for (i, &ui) in u.iter().enumerate() {
        let row = theta_row_apply(theta, i, q)?;
        rhs -= Float::with_val(bits, row - &x[i]) * ui;
    }
    Ok(Float::with_val(bits, lhs - rhs).abs())
}

/// The `q` interval handled by one element of the sequence.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RChoice {
    pub q_from: u64,
    pub q_to: u64,
    pub r: usize,
    #[serde(serialize_with = "serialize_float")]
    pub psi_prev: Float,
    #[serde(serialize_with = "serialize_float")]
    pub psi_r: Float,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Counterexample {
    pub q: Vec<i64>,
    pub check: String,
    pub lhs: String,
    pub rhs: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransferenceReport {
    #[serde(serialize_with = "serialize_float")]
    pub c_x: Float,
    /// Index `r` (1-based) where `c(x)` is attained.
    pub c_x_r: usize,
    /// Closed-form constant derived from the chain, not an observed value.
    #[serde(serialize_with = "serialize_float")]
    pub kappa_transfer: Float,
    #[serde(rename = "Q_checked")]
    pub q_checked: u64,
    #[serde(rename = "Q_admissible")]
    pub q_admissible: u64,
    /// `q` below this norm sit before the sequence and are checked directly.
    pub chain_from_q: u64,
    pub points_checked: u64,
    pub worst_q: Vec<i64>,
    #[serde(serialize_with = "serialize_float")]
    pub worst_value: Float,
    pub per_q_r_choices: Vec<RChoice>,
    pub counterexamples: Vec<Counterexample>,
    pub psi: Option<PsiReport>,
    pub passed: bool,
}

/// q index `idx` in lexicographic order over `[-Q, Q]^m`, with zero skipped.
fn q_at(mut idx: u128, q_max: u64, m: usize) -> Vec<i64> {
    let side = 2 * q_max as u128 + 1;
    let zero = (side.pow(m as u32) - 1) / 2;
    if idx >= zero {
        idx += 1;
    }
    let mut q = vec![0i64; m];
    for slot in q.iter_mut().rev() {
        *slot = (idx % side) as i64 - q_max as i64;
        idx /= side;
    }
    q
}

struct Verifier<'a> {
    theta: &'a SystemMatrix,
    k: &'a Weights,
    x: &'a [Float],
    seq: &'a LambdaSequence,
    psi: &'a [Float],
    c_x: &'a Float,
    kappa: &'a Float,
    chain_from_q: u64,
    tol: &'a Float,
}

impl Verifier<'_> {
    /// Twisted quality at `q` and every failed inequality. The identity is
    /// checked against the chosen element (the first one for small `q`, the
    /// last one past the admissible range); the chain bound only where `r`
    /// brackets the threshold.
    fn check(&self, q: &[i64]) -> Result<(Float, Vec<Counterexample>)> {
        let bits = self.theta.bits();
        let (n, m) = (self.theta.n(), self.theta.m());
        let norm = q.iter().map(|v| v.unsigned_abs()).max().unwrap_or(0);
        let value = twisted_quality(self.theta, self.k, self.x, q)?;
        let r = if norm >= self.chain_from_q {
            match choose_r(self.c_x, norm, m, self.psi) {
                Ok(r) => Some(r),
                Err(Error::RangeExhausted { .. }) => None,
                Err(e) => return Err(e),
            }
        } else {
            None
        };
        let fallback = if norm >= self.chain_from_q { self.psi.len() - 1 } else { 0 };
        let u = &self.seq.entries[r.unwrap_or(fallback)].w.u;
        let mut failures = Vec::new();
        let mut fail = |check: &str, lhs: &Float, rhs: &Float| {
            failures.push(Counterexample {
                q: q.to_vec(),
                check: check.to_string(),
                lhs: fmt_real(lhs),
                rhs: fmt_real(rhs),
            })
        };
        let resid = identity_residual(self.theta, u, q, self.x)?;
        if resid > *self.tol {
            fail("identity", &resid, self.tol);
        }
        if let Some(r) = r {
            let mut worst_term = Float::new(bits);
            for i in 0..n {
                let row = theta_row_apply(self.theta, i, q)?;
                let d = dist_nearest_int(&Float::with_val(bits, row - &self.x[i]));
                let term = d * u[i].unsigned_abs();
                if term > worst_term {
                    worst_term.assign(&term);
                }
            }
            let rhs = Float::with_val(bits, &self.psi[r] * m as u64) * norm + worst_term * n as u64;
            if Float::with_val(bits, &rhs + self.tol) < *self.c_x {
                fail("chain", self.c_x, &rhs);
            }
        }
        if Float::with_val(bits, &value + self.tol) < *self.kappa {
            fail("kappa", &value, self.kappa);
        }
        Ok((value, failures))
    }
}

/// Result of evaluating the chain at one `q`, admissible or not.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QCheck {
    pub q: Vec<i64>,
    #[serde(serialize_with = "serialize_float")]
    pub c_x: Float,
    #[serde(serialize_with = "serialize_float")]
    pub kappa_transfer: Float,
    #[serde(serialize_with = "serialize_float")]
    pub value: Float,
    pub admissible: bool,
    pub failures: Vec<Counterexample>,
}

/// Evaluates the identity, the chain bound and the `kappa` bound at a
/// single `q`, including `q` outside the admissible range.
pub fn check_q(
    x: &[Float],
    seq: &LambdaSequence,
    theta: &SystemMatrix,
    k: &Weights,
    q: &[i64],
    prec: &Precision,
) -> Result<QCheck> {
    if q.len() != theta.m() || q.iter().all(|&v| v == 0) {
        return Err(Error::Validation("q must be a nonzero m-vector".into()));
    }
    let tol = prec.tolerance();
    let (c_x, _) = n_lambda_membership(x, seq)?;
    let kappa = kappa_bound(&c_x, &seq.context, &seq.gamma, &seq.r_lambda, &seq.weights_sorted, theta.m())?;
    let psi = seq.psi();
    let chain_from_q = if psi.len() < 2 { u64::MAX } else { min_chain_q(&c_x, theta.m(), &psi[0]) };
    let q_admissible = if psi.len() < 2 { 0 } else { max_admissible_q(&c_x, theta.m(), psi.last().expect("nonempty")) };
    let verifier = Verifier {
        theta,
        k,
        x,
        seq,
        psi: &psi,
        c_x: &c_x,
        kappa: &kappa,
        chain_from_q,
        tol: &tol,
    };
    let (value, failures) = verifier.check(q)?;
    let norm = q.iter().map(|v| v.unsigned_abs()).max().unwrap_or(0);
    Ok(QCheck {
        q: q.to_vec(),
        c_x,
        kappa_transfer: kappa,
        value,
        admissible: norm <= q_admissible,
        failures,
    })
}

struct Partial {
    worst: Option<(Float, Vec<i64>)>,
    counterexamples: Vec<Counterexample>,
}

/// Checks the transference chain for every nonzero `|q| <= Q`.
///
/// `q_max = None` uses the largest admissible `Q`. A larger explicit value
/// fails with [`Error::RangeExhausted`].
#[allow(clippy::too_many_arguments)]
pub fn verify_fact_a(
    x: &[Float],
    seq: &LambdaSequence,
    theta: &SystemMatrix,
    k: &Weights,
    q_max: Option<u64>,
    budget: u128,
    prec: &Precision,
) -> Result<TransferenceReport> {
    let n = theta.n();
    let m = theta.m();
    if k.n() != n || k.m() != m || x.len() != n {
        return Err(Error::Validation("dimensions of x, matrix and weights disagree".into()));
    }
    let tol = prec.tolerance();
    let (c_x, c_x_r) = n_lambda_membership(x, seq)?;
    if c_x <= tol {
        return Err(Error::Precondition(format!(
            "c(x) = {} is not positive; x is not in N(Lambda)",
            fmt_real(&c_x)
        )));
    }
    let kappa = kappa_bound(&c_x, &seq.context, &seq.gamma, &seq.r_lambda, &seq.weights_sorted, m)?;
    let psi = seq.psi();
    let psi_last = psi.last().expect("sequence is nonempty");
    // one element leaves no bracket for any q
    let q_admissible = if psi.len() < 2 { 0 } else { max_admissible_q(&c_x, m, psi_last) };
    let q_checked = match q_max {
        Some(q) if q > q_admissible => {
            return Err(Error::RangeExhausted {
                max_admissible_q: q_admissible,
            })
        }
        Some(q) => q,
        None => q_admissible,
    };
    let chain_from_q = if psi.len() < 2 { u64::MAX } else { min_chain_q(&c_x, m, &psi[0]) };
    let total = (2 * q_checked as u128 + 1)
        .checked_pow(m as u32)
        .map(|s| s - 1)
        .unwrap_or(u128::MAX);
    if total > budget {
        return Err(Error::BudgetExceeded {
            context: "transference q range".into(),
            needed: total,
            budget,
        });
    }

    let mut per_q_r_choices = Vec::new();
    for r in 1..psi.len() {
        let from = min_chain_q(&c_x, m, &psi[r - 1]);
        let to = max_admissible_q(&c_x, m, &psi[r]).min(q_checked);
        if from <= to {
            per_q_r_choices.push(RChoice {
                q_from: from,
                q_to: to,
                r,
                psi_prev: psi[r - 1].clone(),
                psi_r: psi[r].clone(),
            });
        }
    }

    let verifier = Verifier {
        theta,
        k,
        x,
        seq,
        psi: &psi,
        c_x: &c_x,
        kappa: &kappa,
        chain_from_q,
        tol: &tol,
    };
    let check_one = |q: &[i64], part: &mut Partial| -> Result<()> {
        let (value, failures) = verifier.check(q)?;
        part.counterexamples.extend(failures);
        if part.worst.as_ref().is_none_or(|(w, _)| value < *w) {
            part.worst = Some((value, q.to_vec()));
        }
        Ok(())
    };

    const CHUNK: u128 = 4096;
    let chunks = total.div_ceil(CHUNK);
    let parts: Vec<Result<Partial>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut part = Partial {
                worst: None,
                counterexamples: Vec::new(),
            };
            for idx in c * CHUNK..((c + 1) * CHUNK).min(total) {
                check_one(&q_at(idx, q_checked, m), &mut part)?;
            }
            Ok(part)
        })
        .collect();
    let mut worst: Option<(Float, Vec<i64>)> = None;
    let mut counterexamples = Vec::new();
    for part in parts {
        let part = part?;
        if let Some((v, q)) = part.worst {
            if worst.as_ref().is_none_or(|(w, _)| v < *w) {
                worst = Some((v, q));
            }
        }
        counterexamples.extend(part.counterexamples);
    }
    let (worst_value, worst_q) = worst.unwrap_or_else(|| (prec.zero(), vec![0; m]));
    let psi_report = if seq.entries.len() >= 2 { Some(psi_checks(seq, prec)?) } else { None };
    let passed = counterexamples.is_empty() && total > 0;
    Ok(TransferenceReport {
        c_x,
        c_x_r,
        kappa_transfer: kappa,
        q_checked,
        q_admissible,
        chain_from_q,
        points_checked: total as u64,
        worst_q,
        worst_value,
        per_q_r_choices,
        counterexamples,
        psi: psi_report,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{AffineSubspace, LinearSubspace, SubspaceCase};
    use crate::lattice::{build_lambda, LambdaOptions};
    use crate::quality::{lower_estimate, QualityKind};
    use proptest::prelude::*;

    fn p() -> Precision {
        Precision::default()
    }

    fn f(s: &str) -> Float {
        Float::with_val(p().bits(), Float::parse(s).unwrap())
    }

    fn golden(r_max: usize) -> (SystemMatrix, Weights, LambdaSequence) {
        let prec = p();
        let theta = SystemMatrix::parse("phi", &prec).unwrap();
        let k = Weights::parse(&["1"], 1, &prec).unwrap();
        let line = LinearSubspace::new(1, vec![vec![prec.float(1)]], &prec).unwrap();
        let a = AffineSubspace::through_origin(line, &prec);
        let cert = lower_estimate(QualityKind::Dual, &theta, &k, None, 50, &prec).unwrap();
        let seq = build_lambda(&theta, &k, &a, &cert, r_max, &LambdaOptions::default(), &prec).unwrap();
        (theta, k, seq)
    }

    #[test]
    fn boundary_threshold_picks_that_r() {
        let psi = vec![f("0.5"), f("0.25"), f("0.125")];
        // c / (2 q) = 0.25 exactly with c = 1, q = 2
        assert_eq!(choose_r(&f("1"), 2, 1, &psi).unwrap(), 2);
        assert_eq!(choose_r(&f("1"), 1, 1, &psi).unwrap(), 1);
        assert!(matches!(choose_r(&f("2"), 1, 1, &psi), Err(Error::Precondition(_))));
        assert!(matches!(
            choose_r(&f("1"), 4, 1, &psi),
            Err(Error::RangeExhausted { max_admissible_q: 3 })
        ));
    }

    proptest! {
        #[test]
        fn bisection_agrees_with_scan(
            mut raw in prop::collection::vec(1u32..1_000_000, 2..12),
            c in 1u32..1000,
            q in 1u64..10_000,
            m in 1usize..3,
        ) {
            raw.sort_unstable_by(|a, b| b.cmp(a));
            raw.dedup();
            prop_assume!(raw.len() >= 2);
            let psi: Vec<Float> = raw.iter().map(|&v| Float::with_val(200, v) / 1_000_000u32).collect();
            let c = Float::with_val(200, c) / 1000u32;
            let a = choose_r(&c, q, m, &psi);
            let b = choose_r_bisect(&c, q, m, &psi);
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn kappa_one_dimensional_closed_form() {
        let prec = p();
        let ctx = SubspaceContext::from_angle(1, 0, SubspaceCase::Case1, prec.zero(), &prec).unwrap();
        let c = f("0.3");
        let r = f("7.5");
        let kappa = kappa_bound(&c, &ctx, &f("0.4"), &r, &[prec.float(1)], 1).unwrap();
        let expect = Float::with_val(prec.bits(), c.square_ref()) / (Float::with_val(prec.bits(), r.square_ref()) * 4u32);
        assert!(Float::with_val(prec.bits(), &kappa - &expect).abs() < 1e-45);
    }

    #[test]
    fn kappa_spot_value_two_paths() {
        let prec = p();
        let bits = prec.bits();
        let mut ctx = SubspaceContext::from_angle(2, 1, SubspaceCase::Case2, f("0.5"), &prec).unwrap();
        ctx.lambda = f("3.732");
        let (c, gamma, r) = (f("0.1"), f("0.3"), f("9241"));
        let k = [Float::with_val(bits, 2) / 3u32, Float::with_val(bits, 1) / 3u32];
        let kappa = kappa_bound(&c, &ctx, &gamma, &r, &k, 1).unwrap();
        // step by step: the cap on |u_i| per unit |q|^(m k_i), then c / (2n) over the largest cap
        let r2 = Float::with_val(bits, r.square_ref());
        let caps: Vec<Float> = k
            .iter()
            .map(|ki| {
                let lam = ctx.lambda.clone();
                let g = Float::with_val(bits, (&gamma).pow(Float::with_val(bits, ki - 1u32)));
                let s = Float::with_val(bits, Float::with_val(bits, &r2 * 2u32) / &c);
                lam * g * Float::with_val(bits, s.pow(ki))
            })
            .collect();
        let biggest = caps.iter().cloned().fold(prec.zero(), |a, b| if b > a { b } else { a });
        let other = Float::with_val(bits, &c / 4u32) / biggest;
        let rel = Float::with_val(bits, Float::with_val(bits, &kappa - &other) / &other).abs();
        assert!(rel < 1e-45, "{} vs {}", fmt_real(&kappa), fmt_real(&other));
        assert!(kappa > 0);
        let bigger = kappa_bound(&f("0.2"), &ctx, &gamma, &r, &k, 1).unwrap();
        assert!(bigger > kappa);
    }

    #[test]
    fn kappa_rejects_nonpositive() {
        let prec = p();
        let ctx = SubspaceContext::from_angle(1, 0, SubspaceCase::Case1, prec.zero(), &prec).unwrap();
        assert!(matches!(
            kappa_bound(&prec.zero(), &ctx, &f("0.3"), &f("2"), &[prec.float(1)], 1),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn exact_identity_on_small_example() {
        let theta = vec![vec![Rational::from((1, 3)), Rational::from((2, 7))], vec![Rational::from((5, 4)), Rational::from((-1, 9))]];
        let x = vec![Rational::from((3, 11)), Rational::from((-2, 5))];
        let (l, r) = identity_sides_exact(&theta, &[4, -9], &[2, 13], &x);
        assert_eq!(l, r);
    }

    #[test]
    fn swapped_entries_are_flagged() {
        let prec = p();
        let (_, _, mut seq) = golden(3);
        assert!(psi_checks(&seq, &prec).is_ok());
        seq.entries.swap(0, 1);
        match psi_checks(&seq, &prec) {
            Err(Error::Invariant { tag, .. }) => assert_eq!(tag, "psi-decreasing"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn golden_target_verifies() {
        let prec = p();
        let (theta, k, seq) = golden(5);
        let x = vec![f("0.31415926535897932384626433832795028841971693993751")];
        let rep = verify_fact_a(&x, &seq, &theta, &k, None, DEFAULT_Q_BUDGET, &prec).unwrap();
        assert!(rep.passed, "{}", serde_json::to_string_pretty(&rep).unwrap());
        assert!(rep.worst_value >= rep.kappa_transfer);
        assert!(rep.q_admissible >= rep.chain_from_q);
    }

    #[test]
    fn orbit_point_fails_at_its_q() {
        let prec = p();
        let (theta, k, seq) = golden(5);
        // x = 3 phi mod 1
        let x0 = Float::with_val(prec.bits(), theta.entry(0, 0) * 3u32);
        let x = vec![Float::with_val(prec.bits(), &x0 - Float::with_val(prec.bits(), x0.floor_ref()))];
        // ||u_r . x|| <= |q0| psi_r, so c(x) forces Q_admissible below |q0|
        let rep = verify_fact_a(&x, &seq, &theta, &k, None, DEFAULT_Q_BUDGET, &prec).unwrap();
        assert!(rep.q_admissible < 3);
        let at = check_q(&x, &seq, &theta, &k, &[3], &prec).unwrap();
        assert!(!at.admissible);
        assert!(at.value < 1e-40);
        assert!(at.failures.iter().any(|c| c.check == "kappa"));
        assert!(check_q(&x, &seq, &theta, &k, &[2], &prec).unwrap().failures.is_empty());
    }

    #[test]
    fn single_entry_has_empty_range() {
        let prec = p();
        let (theta, k, seq) = golden(1);
        let rep = verify_fact_a(&[f("0.4")], &seq, &theta, &k, None, DEFAULT_Q_BUDGET, &prec).unwrap();
        assert_eq!(rep.q_admissible, 0);
        assert!(!rep.passed);
    }
}
