//! Approximation quality functionals and exhaustive lower estimates.

use rayon::prelude::*;
use rug::ops::Pow;
use rug::{Assign, Float};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{
    dist_nearest_int_into, fmt_real, serialize_float, sup_norm, Precision, RealScalar, Weights,
};

/// An `n x m` real matrix. Row forms `Theta_i(q)` take `q` in `Z^m`, column
/// (dual) forms `Theta*_j(q)` take `q` in `Z^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemMatrix {
    rows: Vec<Vec<RealScalar>>,
    m: usize,
}

impl SystemMatrix {
    pub fn new(rows: Vec<Vec<RealScalar>>) -> Result<Self> {
        let m = rows.first().map(Vec::len).unwrap_or(0);
        if rows.is_empty() || m == 0 {
            return Err(Error::Validation("matrix must be at least 1x1".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(Error::Validation(format!(
                    "row {} has {} entries, expected {m}",
                    i + 1,
                    row.len()
                )));
            }
            if let Some(bad) = row.iter().find(|e| !e.value().is_finite()) {
                return Err(Error::Validation(format!("non-finite entry {bad}")));
            }
        }
        Ok(SystemMatrix { rows, m })
    }

    /// Rows separated by `;`, entries by `,`: `"sqrt(2);sqrt(3)"` is 2x1.
    pub fn parse(text: &str, prec: &Precision) -> Result<Self> {
        let rows = text
            .split(';')
            .map(|row| {
                row.split(',')
                    .map(|e| RealScalar::parse(e, prec))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(rows)
    }

    pub fn from_literals<S: AsRef<str>>(rows: &[Vec<S>], prec: &Precision) -> Result<Self> {
        let rows = rows
            .iter()
            .map(|r| r.iter().map(|e| RealScalar::parse(e.as_ref(), prec)).collect())
            .collect::<Result<Vec<_>>>()?;
        Self::new(rows)
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn entry(&self, i: usize, j: usize) -> &Float {
        self.rows[i][j].value()
    }

    pub fn scalar(&self, i: usize, j: usize) -> &RealScalar {
        &self.rows[i][j]
    }

    pub fn bits(&self) -> u32 {
        self.entry(0, 0).prec()
    }

    pub fn at_precision(&self, prec: &Precision) -> Self {
        SystemMatrix {
            rows: self
                .rows
                .iter()
                .map(|r| r.iter().map(|e| e.at_precision(prec)).collect())
                .collect(),
            m: self.m,
        }
    }

    /// Matrix with rows reordered so that `out[i] = self[perm[i]]`.
    pub fn permuted_rows(&self, perm: &[usize]) -> Self {
        SystemMatrix {
            rows: perm.iter().map(|&p| self.rows[p].clone()).collect(),
            m: self.m,
        }
    }

    pub fn literals(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| r.iter().map(RealScalar::literal).collect())
            .collect()
    }

    /// `;`/`,` form accepted by [`SystemMatrix::parse`].
    pub fn to_text(&self) -> String {
        self.literals()
            .iter()
            .map(|r| r.join(","))
            .collect::<Vec<_>>()
            .join(";")
    }
}

/// `Theta_i(q) = sum_j q_j Theta_ij` (0-based row index).
pub fn theta_row_apply(theta: &SystemMatrix, i: usize, q: &[i64]) -> Result<Float> {
    if i >= theta.n() {
        return Err(Error::IndexOutOfRange { index: i, size: theta.n() });
    }
    check_len(q, theta.m(), "q")?;
    let mut acc = Float::new(theta.bits());
    row_into(&mut acc, &mut Float::new(theta.bits()), theta, i, q);
    Ok(acc)
}

/// `Theta*_j(q) = sum_i q_i Theta_ij` (0-based column index).
pub fn theta_dual_apply(theta: &SystemMatrix, j: usize, q: &[i64]) -> Result<Float> {
    if j >= theta.m() {
        return Err(Error::IndexOutOfRange { index: j, size: theta.m() });
    }
    check_len(q, theta.n(), "q")?;
    let mut acc = Float::new(theta.bits());
    col_into(&mut acc, &mut Float::new(theta.bits()), theta, j, q);
    Ok(acc)
}

fn check_len(q: &[i64], expected: usize, name: &str) -> Result<()> {
    if q.len() != expected {
        return Err(Error::Validation(format!(
            "{name} has length {}, expected {expected}",
            q.len()
        )));
    }
    Ok(())
}

fn check_nonzero(q: &[i64]) -> Result<()> {
    if q.iter().all(|&v| v == 0) {
        return Err(Error::Domain("quality undefined at q = 0".into()));
    }
    Ok(())
}

fn row_into(acc: &mut Float, tmp: &mut Float, theta: &SystemMatrix, i: usize, q: &[i64]) {
    acc.assign(0);
    for (j, &qj) in q.iter().enumerate() {
        if qj != 0 {
            tmp.assign(theta.entry(i, j) * qj);
            *acc += &*tmp;
        }
    }
}

fn col_into(acc: &mut Float, tmp: &mut Float, theta: &SystemMatrix, j: usize, q: &[i64]) {
    acc.assign(0);
    for (i, &qi) in q.iter().enumerate() {
        if qi != 0 {
            tmp.assign(theta.entry(i, j) * qi);
            *acc += &*tmp;
        }
    }
}

/// `max_i |q|^(m k_i) ||Theta_i(q)||`.
pub fn homogeneous_quality(theta: &SystemMatrix, k: &Weights, q: &[i64]) -> Result<Float> {
    twisted_quality_opt(theta, k, None, q)
}

/// `max_i |q_i|^(1/(m k_i)) * max_j ||Theta*_j(q)||` with `0^e = 0`.
pub fn dual_quality(theta: &SystemMatrix, k: &Weights, q: &[i64]) -> Result<Float> {
    check_dims(theta, k)?;
    check_len(q, theta.n(), "q")?;
    check_nonzero(q)?;
    let bits = theta.bits();
    let mut scale = Float::new(bits);
    for (i, &qi) in q.iter().enumerate() {
        if qi != 0 {
            let p = Float::with_val(bits, Float::with_val(bits, qi.unsigned_abs()).pow(&k.dual_exponent(i)));
            if p > scale {
                scale = p;
            }
        }
    }
    let (mut acc, mut tmp, mut d) = (Float::new(bits), Float::new(bits), Float::new(bits));
    let mut dist = Float::new(bits);
    for j in 0..theta.m() {
        col_into(&mut acc, &mut tmp, theta, j, q);
        dist_nearest_int_into(&mut d, &acc);
        if d > dist {
            dist.assign(&d);
        }
    }
    Ok(scale * dist)
}

/// `max_i |q|^(m k_i) ||Theta_i(q) - x_i||`.
pub fn twisted_quality(theta: &SystemMatrix, k: &Weights, x: &[Float], q: &[i64]) -> Result<Float> {
    twisted_quality_opt(theta, k, Some(x), q)
}

fn twisted_quality_opt(
    theta: &SystemMatrix,
    k: &Weights,
    x: Option<&[Float]>,
    q: &[i64],
) -> Result<Float> {
    check_dims(theta, k)?;
    check_len(q, theta.m(), "q")?;
    check_nonzero(q)?;
    if let Some(x) = x {
        if x.len() != theta.n() {
            return Err(Error::Validation(format!(
                "target has length {}, expected {}",
                x.len(),
                theta.n()
            )));
        }
    }
    let bits = theta.bits();
    let norm = Float::with_val(bits, sup_norm(q));
    let (mut acc, mut tmp, mut d) = (Float::new(bits), Float::new(bits), Float::new(bits));
    let mut best = Float::new(bits);
    for i in 0..theta.n() {
        row_into(&mut acc, &mut tmp, theta, i, q);
        if let Some(x) = x {
            acc -= &x[i];
        }
        dist_nearest_int_into(&mut d, &acc);
        d *= Float::with_val(bits, (&norm).pow(&k.exponent(i)));
        if d > best {
            best.assign(&d);
        }
    }
    Ok(best)
}

fn check_dims(theta: &SystemMatrix, k: &Weights) -> Result<()> {
    if k.n() != theta.n() || k.m() != theta.m() {
        return Err(Error::Validation(format!(
            "weights are for {}x{}, matrix is {}x{}",
            k.n(),
            k.m(),
            theta.n(),
            theta.m()
        )));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QualityKind {
    Homogeneous,
    Dual,
    Twisted,
}

impl std::str::FromStr for QualityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "homogeneous" => Ok(QualityKind::Homogeneous),
            "dual" => Ok(QualityKind::Dual),
            "twisted" => Ok(QualityKind::Twisted),
            _ => Err(Error::parse(s, "expected homogeneous, dual or twisted")),
        }
    }
}

/// Minimum of a quality functional over `0 < |q| <= q_range`.
///
/// This is an empirical constant: the true infimum over all `q` may be
/// smaller, so every consumer must carry `q_range` along.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BadnessCertificate {
    pub kind: QualityKind,
    #[serde(serialize_with = "serialize_float")]
    pub gamma: Float,
    #[serde(rename = "Q")]
    pub q_range: u64,
    pub argmin_q: Vec<i64>,
    pub precision_digits: u32,
}

impl BadnessCertificate {
    pub fn is_positive(&self) -> bool {
        self.gamma > 0
    }

    /// A dual constant must lie in `(0, 1)` to be used for lattice boxes.
    pub fn require_dual_constant(&self) -> Result<&Float> {
        if self.kind != QualityKind::Dual {
            return Err(Error::Precondition(format!("expected a dual certificate, got {:?}", self.kind)));
        }
        if !self.is_positive() || self.gamma >= 1 {
            return Err(Error::Precondition(format!(
                "dual constant {} is not in (0, 1)",
                fmt_real(&self.gamma)
            )));
        }
        Ok(&self.gamma)
    }
}

/// Per-thread scratch for the exhaustive scan.
struct Scanner<'a> {
    theta: &'a SystemMatrix,
    kind: QualityKind,
    x: Option<&'a [Float]>,
    /// `powers[i][s] = s^(exponent_i)` for `s = 0..=Q`.
    powers: &'a [Vec<Float>],
    acc: Float,
    tmp: Float,
    d: Float,
    cand: Float,
}

impl<'a> Scanner<'a> {
    fn new(
        theta: &'a SystemMatrix,
        kind: QualityKind,
        x: Option<&'a [Float]>,
        powers: &'a [Vec<Float>],
    ) -> Self {
        let bits = theta.bits();
        Scanner {
            theta,
            kind,
            x,
            powers,
            acc: Float::new(bits),
            tmp: Float::new(bits),
            d: Float::new(bits),
            cand: Float::new(bits),
        }
    }

    /// Leaves the quality of `q` in `self.cand`.
    fn eval(&mut self, q: &[i64]) {
        self.cand.assign(0);
        match self.kind {
            QualityKind::Homogeneous | QualityKind::Twisted => {
                let s = sup_norm(q) as usize;
                for i in 0..self.theta.n() {
                    row_into(&mut self.acc, &mut self.tmp, self.theta, i, q);
                    if let Some(x) = self.x {
                        self.acc -= &x[i];
                    }
                    dist_nearest_int_into(&mut self.d, &self.acc);
                    self.d *= &self.powers[i][s];
                    if self.d > self.cand {
                        self.cand.assign(&self.d);
                    }
                }
            }
            QualityKind::Dual => {
                for j in 0..self.theta.m() {
                    col_into(&mut self.acc, &mut self.tmp, self.theta, j, q);
                    dist_nearest_int_into(&mut self.d, &self.acc);
                    if self.d > self.cand {
                        self.cand.assign(&self.d);
                    }
                }
                let mut scale: Option<&Float> = None;
                for (i, &qi) in q.iter().enumerate() {
                    let p = &self.powers[i][qi.unsigned_abs() as usize];
                    if qi != 0 && scale.is_none_or(|s| p > s) {
                        scale = Some(p);
                    }
                }
                self.cand *= scale.expect("q is nonzero");
            }
        }
    }
}

/// Exhaustive minimum of the chosen quality over `0 < |q| <= q_range`.
///
/// Points are visited in lexicographic order over `[-Q, Q]^dim`; for the
/// even functionals (homogeneous and dual) a point whose first nonzero
/// coordinate is negative is skipped. Ties keep the first point visited.
/// Work is split by the first coordinate and merged in order, so the
/// result does not depend on the thread count.
pub fn lower_estimate(
    kind: QualityKind,
    theta: &SystemMatrix,
    k: &Weights,
    x: Option<&[Float]>,
    q_range: u64,
    prec: &Precision,
) -> Result<BadnessCertificate> {
    check_dims(theta, k)?;
    if q_range == 0 {
        return Err(Error::Validation("Q must be at least 1".into()));
    }
    match (kind, x) {
        (QualityKind::Twisted, None) => {
            return Err(Error::Validation("twisted estimate needs a target x".into()))
        }
        (QualityKind::Twisted, Some(x)) if x.len() != theta.n() => {
            return Err(Error::Validation("target x has the wrong length".into()))
        }
        (QualityKind::Homogeneous | QualityKind::Dual, Some(_)) => {
            return Err(Error::Validation("target x is only used by the twisted estimate".into()))
        }
        _ => {}
    }
    if q_range > i64::MAX as u64 / 4 || q_range > usize::MAX as u64 / 2 {
        return Err(Error::Validation(format!("Q = {q_range} is too large")));
    }
    let dim = if kind == QualityKind::Dual { theta.n() } else { theta.m() };
    let bits = theta.bits();
    let powers: Vec<Vec<Float>> = (0..k.n())
        .map(|i| {
            let e = if kind == QualityKind::Dual { k.dual_exponent(i) } else { k.exponent(i) };
            let e = Float::with_val(bits, e);
            (0..=q_range)
                .into_par_iter()
                .map(|s| Float::with_val(bits, Float::with_val(bits, s).pow(&e)))
                .collect()
        })
        .collect();

    let qr = q_range as i64;
    let symmetric = kind != QualityKind::Twisted;
    let first_lo = if symmetric { 0 } else { -qr };
    let best = (first_lo..=qr)
        .into_par_iter()
        .map(|first| {
            let mut sc = Scanner::new(theta, kind, x, &powers);
            let mut q = vec![-qr; dim];
            q[0] = first;
            // with first == 0 under symmetry, the rest starts at the next
            // sign-normalized point
            let mut best: Option<(Float, Vec<i64>)> = None;
            loop {
                let skip = q.iter().all(|&v| v == 0)
                    || (symmetric && q.iter().find(|&&v| v != 0).is_some_and(|&v| v < 0));
                if !skip {
                    sc.eval(&q);
                    if best.as_ref().is_none_or(|(b, _)| sc.cand < *b) {
                        best = Some((sc.cand.clone(), q.clone()));
                    }
                }
                if !advance(&mut q[1..], qr) {
                    break;
                }
            }
            best
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .fold(None::<(Float, Vec<i64>)>, |acc, (v, q)| match acc {
            Some((b, bq)) if b <= v => Some((b, bq)),
            _ => Some((v, q)),
        })
        .expect("box contains a nonzero point");
    Ok(BadnessCertificate {
        kind,
        gamma: best.0,
        q_range,
        argmin_q: best.1,
        precision_digits: prec.digits(),
    })
}

/// Lexicographic successor within `[-r, r]^len`; false after the last point.
fn advance(q: &mut [i64], r: i64) -> bool {
    for v in q.iter_mut().rev() {
        if *v < r {
            *v += 1;
            return true;
        }
        *v = -r;
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p() -> Precision {
        Precision::default()
    }

    fn mat(text: &str) -> SystemMatrix {
        SystemMatrix::parse(text, &p()).unwrap()
    }

    fn w(k: &[&str], m: usize) -> Weights {
        Weights::parse(k, m, &p()).unwrap()
    }

    fn dec(s: &str) -> Float {
        p().float(Float::parse(s).unwrap())
    }

    fn close(a: &Float, b: &Float, tol: f64) -> bool {
        Float::with_val(a.prec(), a - b).abs() < tol
    }

    #[test]
    fn row_and_column_forms() {
        assert_eq!(theta_row_apply(&mat("1/2"), 0, &[2]).unwrap(), 1);
        let r2 = theta_row_apply(&mat("sqrt(2);sqrt(3)"), 0, &[1]).unwrap();
        assert!(close(&r2, &dec("1.4142135623730950488016887242096980785696718753769"), 1e-45));
        let v = theta_row_apply(&mat("0.3,0.7"), 0, &[2, -1]).unwrap();
        assert!(close(&v, &dec("-0.1"), 1e-60));
        let t = mat("0.3,0.7");
        assert!(close(&theta_dual_apply(&t, 1, &[3]).unwrap(), &dec("2.1"), 1e-60));
        let ab = mat("0.25;0.125");
        assert_eq!(theta_dual_apply(&ab, 0, &[1, 1]).unwrap(), 0.375);
        assert_eq!(theta_dual_apply(&ab, 0, &[0, 0]).unwrap(), 0);
        assert!(matches!(
            theta_row_apply(&t, 1, &[1, 1]),
            Err(Error::IndexOutOfRange { index: 1, size: 1 })
        ));
        assert!(theta_dual_apply(&t, 2, &[1]).is_err());
    }

    #[test]
    fn quality_examples() {
        let phi = mat("phi");
        let one = w(&["1"], 1);
        let q1 = homogeneous_quality(&phi, &one, &[1]).unwrap();
        assert!(close(&q1, &dec("0.38196601125010515179541316563436188227969082019424"), 1e-45));
        assert_eq!(homogeneous_quality(&mat("3/7"), &one, &[7]).unwrap(), 0);
        let sq = mat("sqrt(2);sqrt(3)");
        let half = w(&["1/2", "1/2"], 1);
        let h = homogeneous_quality(&sq, &half, &[1]).unwrap();
        assert!(close(&h, &dec("0.41421356237309504880168872420969807856967187537694"), 1e-45));
        let d = dual_quality(&sq, &half, &[1, 0]).unwrap();
        assert!(close(&d, &h, 1e-45));
        assert_eq!(dual_quality(&mat("1/3;2/3"), &half, &[3, 0]).unwrap(), 0);
        let d2 = dual_quality(&phi, &one, &[2]).unwrap();
        assert!(close(&d2, &dec("0.47213595499957939282"), 1e-19));
        let x = [dec("0.5")];
        let t1 = twisted_quality(&phi, &one, &x, &[1]).unwrap();
        assert!(close(&t1, &dec("0.11803398874989484820"), 1e-19));
        let t2 = twisted_quality(&phi, &one, &x, &[2]).unwrap();
        assert!(close(&t2, &dec("0.52786404500042060718"), 1e-19));
        assert!(matches!(homogeneous_quality(&phi, &one, &[0]), Err(Error::Domain(_))));
        assert!(matches!(dual_quality(&phi, &one, &[0]), Err(Error::Domain(_))));
        assert!(matches!(twisted_quality(&phi, &one, &x, &[0]), Err(Error::Domain(_))));
    }

    #[test]
    fn twisted_zero_at_exact_hit() {
        let t = mat("sqrt(2),sqrt(5);sqrt(3),1/3");
        let k = w(&["1/2", "1/2"], 2);
        let q = [3, -2];
        let x: Vec<Float> = (0..2)
            .map(|i| {
                let v = theta_row_apply(&t, i, &q).unwrap();
                let fl = v.clone().floor();
                v - fl
            })
            .collect();
        let val = twisted_quality(&t, &k, &x, &q).unwrap();
        assert!(val < 1e-70);
    }

    #[test]
    fn lower_estimate_examples() {
        let prec = p();
        let phi = mat("phi");
        let one = w(&["1"], 1);
        let c = lower_estimate(QualityKind::Homogeneous, &phi, &one, None, 10, &prec).unwrap();
        assert_eq!(c.argmin_q, vec![1]);
        assert!(close(&c.gamma, &dec("0.3819660112501051517954131656343618822797"), 1e-38));
        // brute force over q = 1..10
        let mut best = p().float(10);
        for q in 1..=10i64 {
            let x = Float::with_val(prec.bits(), phi.entry(0, 0) * q);
            let r = x.clone().round();
            let d = Float::with_val(prec.bits(), (x - r).abs() * q);
            if d < best {
                best = d;
            }
        }
        assert_eq!(best, c.gamma);

        let c = lower_estimate(QualityKind::Homogeneous, &mat("1/2"), &one, None, 2, &prec).unwrap();
        assert_eq!(c.gamma, 0);
        assert_eq!(c.argmin_q, vec![2]);
        assert!(!c.is_positive());

        let sq = mat("sqrt(2);sqrt(3)");
        let half = w(&["1/2", "1/2"], 1);
        let c = lower_estimate(QualityKind::Homogeneous, &sq, &half, None, 100, &prec).unwrap();
        assert!(c.gamma > 0 && c.gamma < 1);
        assert!(c.argmin_q[0] > 0);
    }

    #[test]
    fn lower_estimate_rejects_bad_arguments() {
        let prec = p();
        let phi = mat("phi");
        let one = w(&["1"], 1);
        assert!(lower_estimate(QualityKind::Homogeneous, &phi, &one, None, 0, &prec).is_err());
        assert!(lower_estimate(QualityKind::Twisted, &phi, &one, None, 5, &prec).is_err());
        let x = [dec("0.1")];
        assert!(lower_estimate(QualityKind::Dual, &phi, &one, Some(&x), 5, &prec).is_err());
        assert!(lower_estimate(QualityKind::Homogeneous, &phi, &w(&["1/2", "1/2"], 1), None, 5, &prec).is_err());
    }

    #[test]
    fn dual_scan_visits_sign_normalized_points() {
        // every nonzero point of [-1,1]^2 with a positive leading coordinate
        let mut seen = Vec::new();
        let q_r = 1;
        for first in 0..=q_r {
            let mut q = vec![first, -q_r];
            loop {
                let lead = q.iter().find(|&&v| v != 0).copied();
                if lead.is_some_and(|v| v > 0) {
                    seen.push(q.clone());
                }
                if !advance(&mut q[1..], q_r) {
                    break;
                }
            }
        }
        assert_eq!(seen, vec![vec![0, 1], vec![1, -1], vec![1, 0], vec![1, 1]]);
    }

    #[test]
    fn certificate_json_has_sorted_keys() {
        let prec = p();
        let c = lower_estimate(QualityKind::Dual, &mat("phi"), &w(&["1"], 1), None, 3, &prec).unwrap();
        let v = serde_json::to_value(&c).unwrap();
        let keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        assert_eq!(keys, vec!["Q", "argmin_q", "gamma", "kind", "precision_digits"]);
        assert_eq!(v["kind"], "dual");
    }

    proptest! {
        #[test]
        fn homogeneous_is_even(q1 in -500i64..500, q2 in -500i64..500) {
            prop_assume!(q1 != 0 || q2 != 0);
            let t = mat("sqrt(2),sqrt(7);sqrt(3),1/5");
            let k = w(&["2/3", "1/3"], 2);
            let a = homogeneous_quality(&t, &k, &[q1, q2]).unwrap();
            let b = homogeneous_quality(&t, &k, &[-q1, -q2]).unwrap();
            prop_assert!(close(&a, &b, 1e-40));
        }

        #[test]
        fn dual_matches_homogeneous_in_one_dimension(q in 1i64..100_000, a in 1i64..1000, c in 1i64..1000, d in 2i64..50) {
            let prec = p();
            let theta = SystemMatrix::new(vec![vec![RealScalar::parse(&format!("({a}+1*sqrt({d}))/{c}"), &prec).unwrap()]]).unwrap();
            let k = w(&["1"], 1);
            let h = homogeneous_quality(&theta, &k, &[q]).unwrap();
            let du = dual_quality(&theta, &k, &[q]).unwrap();
            prop_assert!(close(&h, &du, 1e-40));
        }

        #[test]
        fn twisted_at_zero_is_homogeneous(q1 in -300i64..300, q2 in -300i64..300) {
            prop_assume!(q1 != 0 || q2 != 0);
            let t = mat("sqrt(5),phi;sqrt(11),0.123");
            let k = w(&["0.7", "0.3"], 2);
            let zero = vec![p().zero(), p().zero()];
            prop_assert_eq!(
                twisted_quality(&t, &k, &zero, &[q1, q2]).unwrap(),
                homogeneous_quality(&t, &k, &[q1, q2]).unwrap()
            );
        }

        #[test]
        fn estimate_is_antitone_in_range(q_small in 1u64..40, extra in 0u64..40) {
            let prec = p();
            let t = mat("sqrt(2);sqrt(3)");
            let k = w(&["2/3", "1/3"], 1);
            for kind in [QualityKind::Homogeneous, QualityKind::Dual] {
                let a = lower_estimate(kind, &t, &k, None, q_small, &prec).unwrap();
                let b = lower_estimate(kind, &t, &k, None, q_small + extra, &prec).unwrap();
                prop_assert!(b.gamma <= a.gamma);
            }
        }
    }
}
