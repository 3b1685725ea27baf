//! Subspaces, the coordinate filtration, and the angle constants that drive
//! the lattice construction.

use rug::ops::Pow;
use rug::{Assign, Float};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{fmt_real, serialize_float, Precision, RealScalar, Weights};

/// A linear subspace of `R^n` held as an orthonormal basis.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearSubspace {
    ambient_dim: usize,
    basis: Vec<Vec<Float>>,
    original: Vec<Vec<Float>>,
}

pub fn dot(a: &[Float], b: &[Float]) -> Float {
    let bits = a.first().map_or(64, Float::prec);
    let mut acc = Float::new(bits);
    for (x, y) in a.iter().zip(b) {
        acc += Float::with_val(bits, x * y);
    }
    acc
}

pub fn euclid_norm(a: &[Float]) -> Float {
    dot(a, a).sqrt()
}

impl LinearSubspace {
    /// Orthonormalizes `vectors` (two passes of modified Gram-Schmidt).
    /// Vectors that are dependent within tolerance are rejected.
    pub fn new(ambient_dim: usize, vectors: Vec<Vec<Float>>, prec: &Precision) -> Result<Self> {
        if ambient_dim == 0 || vectors.is_empty() {
            return Err(Error::Validation("subspace needs n >= 1 and at least one vector".into()));
        }
        if vectors.len() > ambient_dim {
            return Err(Error::Validation(format!(
                "{} vectors cannot be independent in R^{ambient_dim}",
                vectors.len()
            )));
        }
        let tol = prec.tolerance();
        let bits = prec.bits();
        let mut basis: Vec<Vec<Float>> = Vec::with_capacity(vectors.len());
        for (idx, v) in vectors.iter().enumerate() {
            if v.len() != ambient_dim {
                return Err(Error::Validation(format!(
                    "basis vector {} has length {}, expected {ambient_dim}",
                    idx + 1,
                    v.len()
                )));
            }
            let mut w: Vec<Float> = v.iter().map(|x| Float::with_val(bits, x)).collect();
            let scale = euclid_norm(&w);
            for _ in 0..2 {
                for b in &basis {
                    let c = dot(&w, b);
                    for (wi, bi) in w.iter_mut().zip(b) {
                        *wi -= Float::with_val(bits, bi * &c);
                    }
                }
            }
            let norm = euclid_norm(&w);
            if norm <= Float::with_val(bits, &tol * &scale) || scale.is_zero() {
                return Err(Error::Validation(format!(
                    "basis vector {} is linearly dependent on the previous ones",
                    idx + 1
                )));
            }
            for wi in w.iter_mut() {
                *wi /= &norm;
            }
            basis.push(w);
        }
        Ok(LinearSubspace {
            ambient_dim,
            basis,
            original: vectors,
        })
    }

    /// Parses every coordinate with [`RealScalar::parse`].
    pub fn from_literals<S: AsRef<str>>(ambient_dim: usize, vectors: &[Vec<S>], prec: &Precision) -> Result<Self> {
        let vs = vectors
            .iter()
            .map(|v| {
                v.iter()
                    .map(|e| RealScalar::parse(e.as_ref(), prec).map(|s| s.value().clone()))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(ambient_dim, vs, prec)
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Vec<Float>] {
        &self.basis
    }

    pub fn original(&self) -> &[Vec<Float>] {
        &self.original
    }

    /// Orthogonal projection of `v` onto the subspace.
    pub fn project(&self, v: &[Float]) -> Vec<Float> {
        let bits = v.first().map_or(64, Float::prec);
        let mut out = vec![Float::new(bits); self.ambient_dim];
        for b in &self.basis {
            let c = dot(v, b);
            for (o, bi) in out.iter_mut().zip(b) {
                *o += Float::with_val(bits, bi * &c);
            }
        }
        out
    }

    /// `|P_L v|_e`, computed from the coefficients in the orthonormal basis.
    pub fn projection_norm(&self, v: &[Float]) -> Float {
        let bits = v.first().map_or(64, Float::prec);
        let mut acc = Float::new(bits);
        for b in &self.basis {
            acc += dot(v, b).square();
        }
        acc.sqrt()
    }

    /// Same subspace with coordinates reordered: `out[i] = self[perm[i]]`.
    pub fn permuted(&self, perm: &[usize], prec: &Precision) -> Result<Self> {
        let vs = self
            .original
            .iter()
            .map(|v| perm.iter().map(|&p| v[p].clone()).collect())
            .collect();
        Self::new(self.ambient_dim, vs, prec)
    }
}

/// `offset + L`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineSubspace {
    pub direction: LinearSubspace,
    pub offset: Vec<Float>,
}

impl AffineSubspace {
    pub fn new(direction: LinearSubspace, offset: Vec<Float>) -> Result<Self> {
        if offset.len() != direction.ambient_dim() {
            return Err(Error::Validation("offset length differs from the ambient dimension".into()));
        }
        Ok(AffineSubspace { direction, offset })
    }

    pub fn through_origin(direction: LinearSubspace, prec: &Precision) -> Self {
        let offset = vec![prec.zero(); direction.ambient_dim()];
        AffineSubspace { direction, offset }
    }

    /// Loads `{"ambient_dim": n, "basis": [[...], ...], "offset": [...]}`.
    /// Entries may be JSON numbers or scalar literals such as `"sqrt(2)"`.
    pub fn from_json(value: &serde_json::Value, prec: &Precision) -> Result<Self> {
        let n = value
            .get("ambient_dim")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| Error::Validation("subspace JSON needs integer ambient_dim".into()))?
            as usize;
        let basis = value
            .get("basis")
            .and_then(serde_json::Value::as_array)
            .ok_or_else(|| Error::Validation("subspace JSON needs a basis array".into()))?;
        let vectors = basis
            .iter()
            .map(|v| json_vector(v, prec))
            .collect::<Result<Vec<_>>>()?;
        let direction = LinearSubspace::new(n, vectors, prec)?;
        match value.get("offset") {
            None | Some(serde_json::Value::Null) => Ok(Self::through_origin(direction, prec)),
            Some(o) => Self::new(direction, json_vector(o, prec)?),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let enc = |v: &[Float]| v.iter().map(fmt_real).collect::<Vec<_>>();
        serde_json::json!({
            "ambient_dim": self.direction.ambient_dim(),
            "basis": self.direction.original().iter().map(|v| enc(v)).collect::<Vec<_>>(),
            "offset": enc(&self.offset),
        })
    }
}

fn json_vector(v: &serde_json::Value, prec: &Precision) -> Result<Vec<Float>> {
    let arr = v
        .as_array()
        .ok_or_else(|| Error::Validation(format!("expected an array, got {v}")))?;
    arr.iter()
        .map(|e| {
            let text = match e {
                serde_json::Value::String(s) => s.clone(),
                serde_json::Value::Number(x) => x.to_string(),
                other => return Err(Error::Validation(format!("bad coordinate {other}"))),
            };
            RealScalar::parse(&text, prec).map(|s| s.value().clone())
        })
        .collect()
}

/// Index (0-based) of the first coordinate that is nonzero on `L`, i.e. the
/// largest `i` with `L` inside `{x_1 = ... = x_i = 0}`.
pub fn leading_coordinate(l: &LinearSubspace, prec: &Precision) -> usize {
    let tol = prec.tolerance();
    (0..l.ambient_dim())
        .find(|&i| l.basis().iter().any(|b| Float::with_val(b[i].prec(), b[i].abs_ref()) > tol))
        .expect("a nontrivial subspace has a nonzero coordinate")
}

/// The filtration index `t`: `L` lies in `Gamma_{n-(t+1)}` but not in
/// `Gamma_{n-t}`.
pub fn compute_t(l: &LinearSubspace, prec: &Precision) -> usize {
    l.ambient_dim() - 1 - leading_coordinate(l, prec)
}

/// `arccos |P_L l|_e` for a unit vector `l`.
pub fn angle_line_to_subspace(line: &[Float], l: &LinearSubspace) -> Float {
    let mut c = l.projection_norm(line);
    if c > 1 {
        c.assign(1);
    }
    c.acos()
}

/// Angle between two nonzero vectors read as lines, in `[0, pi/2]`.
pub fn angle_between_lines(a: &[Float], b: &[Float]) -> Float {
    let mut c = dot(a, b).abs() / (euclid_norm(a) * euclid_norm(b));
    if c > 1 {
        c.assign(1);
    }
    c.acos()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SubspaceCase {
    /// `L` is the whole coordinate subspace `Gamma_{n-(t+1)}`.
    Case1,
    Case2,
}

/// Everything the lattice construction needs to know about `L`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SubspaceContext {
    pub ambient_dim: usize,
    pub t: usize,
    /// 0-based index of the coordinate line `l_{n-t}`.
    pub lead: usize,
    pub case: SubspaceCase,
    #[serde(serialize_with = "serialize_float")]
    pub omega: Float,
    #[serde(serialize_with = "serialize_float")]
    pub sigma: Float,
    #[serde(serialize_with = "serialize_float")]
    pub lambda: Float,
    /// `omega` vanished and `sigma` fell back to `pi/8`.
    pub degenerate_omega: bool,
    #[serde(skip)]
    pub subspace: Option<LinearSubspace>,
}

impl SubspaceContext {
    /// Context built from given constants, with `sigma` and `lambda`
    /// derived from `omega` exactly as in [`make_context`].
    pub fn from_angle(ambient_dim: usize, t: usize, case: SubspaceCase, omega: Float, prec: &Precision) -> Result<Self> {
        if t >= ambient_dim {
            return Err(Error::Validation(format!("t = {t} must be below n = {ambient_dim}")));
        }
        let half_pi = prec.pi() / 2u32;
        if omega < 0 || omega >= half_pi {
            return Err(Error::Validation(format!("omega = {} outside [0, pi/2)", fmt_real(&omega))));
        }
        let (sigma, degenerate) = sigma_from_omega(&omega, prec);
        let lambda = lambda_from_sigma(t, &sigma, prec)?;
        Ok(SubspaceContext {
            ambient_dim,
            t,
            lead: ambient_dim - 1 - t,
            case,
            omega,
            sigma,
            lambda,
            degenerate_omega: degenerate,
            subspace: None,
        })
    }

    /// Unit vector along the coordinate line `l_{n-t}`.
    pub fn lead_line(&self, bits: u32) -> Vec<Float> {
        let mut e = vec![Float::new(bits); self.ambient_dim];
        e[self.lead].assign(1);
        e
    }
}

fn sigma_from_omega(omega: &Float, prec: &Precision) -> (Float, bool) {
    let bits = prec.bits();
    if *omega <= prec.tolerance() {
        return (prec.pi() / 8u32, true);
    }
    let half = Float::with_val(bits, omega / 2u32);
    let other = Float::with_val(bits, prec.pi() / 4u32 - &half);
    (if half <= other { half } else { other }, false)
}

fn lambda_from_sigma(t: usize, sigma: &Float, prec: &Precision) -> Result<Float> {
    if t == 0 {
        return Ok(prec.float(1));
    }
    let root = prec.float(t as u32).sqrt();
    let lambda = root / Float::with_val(prec.bits(), sigma.tan_ref());
    if lambda <= 1 {
        return Err(Error::invariant(
            "lamed",
            format!("lambda = {} is not above 1", fmt_real(&lambda)),
        ));
    }
    Ok(lambda)
}

/// Computes `t`, the case split, `omega`, `sigma` and `lambda` for `L`.
///
/// When `omega = 0` the half-angle rule would give `sigma = 0`; `sigma` is
/// set to `pi/8` instead. For `t = 0` the scale `lambda` is the sentinel 1.
pub fn make_context(l: &LinearSubspace, prec: &Precision) -> Result<SubspaceContext> {
    let t = compute_t(l, prec);
    let n = l.ambient_dim();
    let case = if l.dim() == t + 1 { SubspaceCase::Case1 } else { SubspaceCase::Case2 };
    let mut ctx = SubspaceContext::from_angle(n, t, case, prec.zero(), prec)?;
    let omega = angle_line_to_subspace(&ctx.lead_line(prec.bits()), l);
    let omega = if case == SubspaceCase::Case1 { prec.zero() } else { omega };
    let (sigma, degenerate) = sigma_from_omega(&omega, prec);
    ctx.lambda = lambda_from_sigma(t, &sigma, prec)?;
    ctx.omega = omega;
    ctx.sigma = sigma;
    ctx.degenerate_omega = degenerate;
    ctx.subspace = Some(l.clone());
    Ok(ctx)
}

/// Required growth ratio of the projected norms `|u~_{r+1}| / |u~_r|`.
///
/// Case 1 needs 2. Case 2 needs `2 cos(max(omega - sigma, 0)) / cos(omega + sigma)`;
/// the clamp only matters when `omega = 0`.
pub fn lambda_ratio_target(ctx: &SubspaceContext) -> Float {
    let bits = ctx.omega.prec();
    match ctx.case {
        SubspaceCase::Case1 => Float::with_val(bits, 2),
        SubspaceCase::Case2 => {
            let mut lo = Float::with_val(bits, &ctx.omega - &ctx.sigma);
            if lo < 0 {
                lo.assign(0);
            }
            let hi = Float::with_val(bits, &ctx.omega + &ctx.sigma);
            lo.cos() * 2u32 / hi.cos()
        }
    }
}

/// `(sqrt(t+1) * lambda^t * gamma^(-m) * target)^(1/(m k_lead))`.
pub fn scale_ratio(
    t: usize,
    lambda: &Float,
    gamma: &Float,
    m: usize,
    k_lead: &Float,
    target: &Float,
) -> Result<Float> {
    let bits = gamma.prec().max(lambda.prec());
    if *gamma <= 0 || *gamma >= 1 {
        return Err(Error::Precondition(format!("gamma = {} must lie in (0, 1)", fmt_real(gamma))));
    }
    let mk = Float::with_val(bits, k_lead * m as u32);
    let lam_t = Float::with_val(bits, lambda.pow(t as u32));
    let gam_m = Float::with_val(bits, gamma.pow(m as u32));
    let base = Float::with_val(bits, t as u32 + 1).sqrt() * &lam_t / &gam_m * target;
    let r = Float::with_val(bits, (&base).pow(Float::with_val(bits, mk.recip_ref())));
    // R must beat gamma^(-1/k) lambda^(t/(mk)) for psi to decrease
    let lower = {
        let a = Float::with_val(bits, gamma.pow(Float::with_val(bits, -Float::with_val(bits, k_lead.recip_ref()))));
        let b = Float::with_val(bits, lambda.pow(Float::with_val(bits, t as u32) / &mk));
        a * b
    };
    if r <= lower {
        return Err(Error::invariant(
            "P20",
            format!("R = {} is not above {}", fmt_real(&r), fmt_real(&lower)),
        ));
    }
    Ok(r)
}

/// Scale ratio `R` with `T_r = R^r` for the context and dual constant.
pub fn lambda_scale_ratio(ctx: &SubspaceContext, gamma: &Float, k: &Weights) -> Result<Float> {
    if !k.is_sorted_desc() {
        return Err(Error::Precondition("weights must be sorted in descending order".into()));
    }
    if k.n() != ctx.ambient_dim {
        return Err(Error::Validation("weights and subspace disagree on n".into()));
    }
    scale_ratio(ctx.t, &ctx.lambda, gamma, k.m(), k.k(ctx.lead), &lambda_ratio_target(ctx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn p() -> Precision {
        Precision::default()
    }

    fn sub(n: usize, vs: &[&[f64]]) -> LinearSubspace {
        let prec = p();
        LinearSubspace::new(n, vs.iter().map(|v| v.iter().map(|&x| prec.float(x)).collect()).collect(), &prec)
            .unwrap()
    }

    fn close(a: &Float, b: &Float, tol: f64) -> bool {
        Float::with_val(a.prec(), a - b).abs() < tol
    }

    fn pi_frac(num: u32, den: u32) -> Float {
        p().pi() * num / den
    }

    #[test]
    fn t_examples() {
        let prec = p();
        assert_eq!(compute_t(&sub(3, &[&[0.0, 0.0, 1.0]]), &prec), 0);
        assert_eq!(compute_t(&sub(3, &[&[1.0, 0.0, 0.0]]), &prec), 2);
        assert_eq!(compute_t(&sub(3, &[&[0.0, 1.0, 1.0]]), &prec), 1);
    }

    #[test]
    fn angle_examples() {
        let prec = p();
        let l = sub(3, &[&[1.0, 1.0, 0.0]]);
        let e1 = vec![prec.float(1), prec.zero(), prec.zero()];
        assert!(close(&angle_line_to_subspace(&e1, &l), &pi_frac(1, 4), 1e-45));
        let inside = l.basis()[0].clone();
        assert!(angle_line_to_subspace(&inside, &l) < 1e-20);
        let e3 = vec![prec.zero(), prec.zero(), prec.float(1)];
        assert!(close(&angle_line_to_subspace(&e3, &l), &pi_frac(1, 2), 1e-45));
    }

    #[test]
    fn context_examples() {
        let prec = p();
        let ctx = SubspaceContext::from_angle(2, 1, SubspaceCase::Case2, pi_frac(1, 3), &prec).unwrap();
        assert!(close(&ctx.sigma, &pi_frac(1, 12), 1e-45));
        // 1 / tan(pi/12) = 1 / (2 - sqrt 3) = 2 + sqrt 3
        let oracle = prec.float(3).sqrt() + 2u32;
        assert!(close(&ctx.lambda, &oracle, 1e-45));

        let ctx = SubspaceContext::from_angle(5, 4, SubspaceCase::Case2, pi_frac(1, 4), &prec).unwrap();
        assert!(close(&ctx.sigma, &pi_frac(1, 8), 1e-45));
        // 2 / tan(pi/8) = 2 / (sqrt 2 - 1) = 2 sqrt 2 + 2
        let oracle = prec.float(2).sqrt() * 2u32 + 2u32;
        assert!(close(&ctx.lambda, &oracle, 1e-45));

        // whole coordinate subspace: Case 1
        let l = sub(3, &[&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
        let ctx = make_context(&l, &prec).unwrap();
        assert_eq!(ctx.case, SubspaceCase::Case1);
        assert_eq!(ctx.t, 1);
        assert_eq!(lambda_ratio_target(&ctx), 2);
    }

    #[test]
    fn generic_line_in_the_plane() {
        let prec = p();
        let l = sub(2, &[&[3.0, 2.0]]);
        let ctx = make_context(&l, &prec).unwrap();
        assert_eq!((ctx.t, ctx.lead, ctx.case), (1, 0, SubspaceCase::Case2));
        // angle between (3,2) and e_1 is atan(2/3)
        let oracle = prec.float(2) / 3u32;
        assert!(close(&ctx.omega, &oracle.atan(), 1e-45));
        assert!(!ctx.degenerate_omega);
        assert!(ctx.lambda > 1);
    }

    #[test]
    fn degenerate_angle_falls_back() {
        let prec = p();
        // L contains e_2 but is not all of Gamma_1 in R^3
        let l = sub(3, &[&[0.0, 1.0, 0.0]]);
        let ctx = make_context(&l, &prec).unwrap();
        assert_eq!(ctx.case, SubspaceCase::Case2);
        assert!(ctx.degenerate_omega);
        assert!(close(&ctx.sigma, &pi_frac(1, 8), 1e-45));
        let target = lambda_ratio_target(&ctx);
        // 2 / cos(pi/8): the projected norms still grow by 2
        let oracle = prec.float(2) / pi_frac(1, 8).cos();
        assert!(close(&target, &oracle, 1e-45));
    }

    #[test]
    fn ratio_target_examples() {
        let prec = p();
        let ctx = SubspaceContext::from_angle(2, 1, SubspaceCase::Case2, pi_frac(1, 3), &prec).unwrap();
        let target = lambda_ratio_target(&ctx);
        // 2 cos(pi/4) / cos(5 pi/12) = 2 (sqrt 2 / 2) / ((sqrt 6 - sqrt 2)/4)
        let s2 = prec.float(2).sqrt();
        let s6 = prec.float(6).sqrt();
        let oracle = s2.clone() / ((s6 - s2) / 4u32);
        assert!(close(&target, &oracle, 1e-45));
        assert!(close(&target, &Float::with_val(prec.bits(), Float::parse("5.464101615137754587").unwrap()), 1e-17));
    }

    #[test]
    fn scale_ratio_examples() {
        let prec = p();
        // Case 1 style: target 2, t = 1, lambda = 2, gamma = 1/2, m = 1, k = 1
        let r = scale_ratio(1, &prec.float(2), &prec.float(0.5), 1, &prec.float(1), &prec.float(2)).unwrap();
        let oracle = prec.float(2).sqrt() * 8u32;
        assert!(close(&r, &oracle, 1e-45));

        let ctx = SubspaceContext::from_angle(2, 1, SubspaceCase::Case2, pi_frac(1, 3), &prec).unwrap();
        let gamma = Float::with_val(prec.bits(), Float::parse("0.3").unwrap());
        let half = prec.float(0.5);
        let target = lambda_ratio_target(&ctx);
        let r = scale_ratio(1, &ctx.lambda, &gamma, 1, &half, &target).unwrap();
        let step = prec.float(2).sqrt() * &ctx.lambda / &gamma * &target;
        let oracle = step.square();
        assert!(close(&r, &oracle, 1e-40));
        assert!(r > 9200 && r < 9300);

        assert!(scale_ratio(1, &ctx.lambda, &prec.float(1), 1, &half, &target).is_err());
        assert!(scale_ratio(1, &ctx.lambda, &prec.zero(), 1, &half, &target).is_err());
    }

    #[test]
    fn subspace_json_roundtrip() {
        let prec = p();
        let v = serde_json::json!({"ambient_dim": 2, "basis": [["3", 2]], "offset": ["0.5", "sqrt(2)"]});
        let a = AffineSubspace::from_json(&v, &prec).unwrap();
        assert_eq!(a.direction.dim(), 1);
        let back = AffineSubspace::from_json(&a.to_json(), &prec).unwrap();
        assert_eq!(back, a);
        let bad = serde_json::json!({"ambient_dim": 2, "basis": [[1, 0], [2, 0]]});
        assert!(AffineSubspace::from_json(&bad, &prec).is_err());
    }

    fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.1 {
                return v.into_iter().map(|x| x / norm).collect();
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn t_is_basis_invariant(seed in 0u64..10_000, zeros in 0usize..3, angle in 0.0f64..std::f64::consts::TAU) {
            let prec = p();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 4;
            let mk = |rng: &mut ChaCha8Rng| {
                let mut v = random_unit(rng, n);
                for x in v.iter_mut().take(zeros) {
                    *x = 0.0;
                }
                v
            };
            let a = mk(&mut rng);
            let b = mk(&mut rng);
            let l1 = sub(n, &[&a, &b]);
            let (c, s) = (angle.cos(), angle.sin());
            let ra: Vec<f64> = a.iter().zip(&b).map(|(x, y)| c * x + s * y).collect();
            let rb: Vec<f64> = a.iter().zip(&b).map(|(x, y)| -s * x + c * y).collect();
            let l2 = sub(n, &[&ra, &rb]);
            prop_assert_eq!(compute_t(&l1, &prec), compute_t(&l2, &prec));
            prop_assert_eq!(compute_t(&l1, &prec), n - 1 - zeros);
        }

        #[test]
        fn min_angle_matches_projection(seed in 0u64..10_000) {
            let prec = p();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 3;
            let a = random_unit(&mut rng, n);
            let b = random_unit(&mut rng, n);
            let line = random_unit(&mut rng, n);
            let l = sub(n, &[&a, &b]);
            let line_f: Vec<Float> = line.iter().map(|&x| prec.float(x)).collect();
            let exact = angle_line_to_subspace(&line_f, &l).to_f64();
            let ob: Vec<Vec<f64>> = l.basis().iter().map(|v| v.iter().map(Float::to_f64).collect()).collect();
            let mut best = f64::MAX;
            for _ in 0..10_000 {
                let th: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                let dir: Vec<f64> = (0..n).map(|i| th.cos() * ob[0][i] + th.sin() * ob[1][i]).collect();
                let c: f64 = dir.iter().zip(&line).map(|(x, y)| x * y).sum::<f64>().abs().min(1.0);
                best = best.min(c.acos());
            }
            prop_assert!(best >= exact - 1e-9);
            prop_assert!(best - exact < 1e-3);
        }

        #[test]
        fn angle_extremes(seed in 0u64..10_000) {
            let prec = p();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_unit(&mut rng, 3);
            let l = sub(3, &[&a]);
            let inside = l.basis()[0].clone();
            prop_assert!(angle_line_to_subspace(&inside, &l) < 1e-20);
            // a vector orthogonal to a
            let b = random_unit(&mut rng, 3);
            let bf: Vec<Float> = b.iter().map(|&x| prec.float(x)).collect();
            let proj = l.project(&bf);
            let perp: Vec<Float> = bf.iter().zip(&proj).map(|(x, y)| Float::with_val(prec.bits(), x - y)).collect();
            let norm = euclid_norm(&perp);
            let unit: Vec<Float> = perp.into_iter().map(|x| x / &norm).collect();
            prop_assert!(l.projection_norm(&unit) < 1e-40);
            prop_assert!(close(&angle_line_to_subspace(&unit, &l), &pi_frac(1, 2), 1e-40));
        }

        #[test]
        fn sigma_and_lambda_ranges(omega in 0.001f64..1.57, t in 1usize..6) {
            let prec = p();
            let ctx = SubspaceContext::from_angle(t + 1, t, SubspaceCase::Case2, prec.float(omega), &prec).unwrap();
            prop_assert!(ctx.sigma > 0 && ctx.sigma < pi_frac(1, 4));
            prop_assert!(ctx.lambda > 1);
            prop_assert!(lambda_ratio_target(&ctx) >= 2);
        }

        #[test]
        fn angle_sandwich(seed in 0u64..10_000) {
            let prec = p();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 3;
            let a = random_unit(&mut rng, n);
            let l = sub(n, &[&a]);
            let ctx = make_context(&l, &prec).unwrap();
            prop_assume!(ctx.case == SubspaceCase::Case2);
            let sigma = ctx.sigma.to_f64();
            // random direction within sigma of the coordinate line
            let mut dir = random_unit(&mut rng, n);
            dir[ctx.lead] = 0.0;
            let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
            let tilt: f64 = rng.gen_range(0.0..sigma);
            let mut u = vec![0.0; n];
            for i in 0..n {
                u[i] = if i == ctx.lead { tilt.cos() } else { tilt.sin() * dir[i] / norm };
            }
            let uf: Vec<Float> = u.iter().map(|&x| prec.float(x)).collect();
            let to_lead = angle_between_lines(&uf, &ctx.lead_line(prec.bits()));
            prop_assert!(to_lead.to_f64() <= sigma + 1e-12);
            let ang = angle_line_to_subspace(&uf, &l).to_f64();
            let omega = ctx.omega.to_f64();
            prop_assert!(ang >= omega - sigma - 1e-12);
            prop_assert!(ang <= omega + sigma + 1e-12);
        }
    }
}
