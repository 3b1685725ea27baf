//! Weighted parallelepipeds in `Z^(n+m)`, the choice of one integer vector
//! per scale, and the lacunary sequence built from those choices.

mod enumerate;

use std::fmt;

use rug::ops::Pow;
use rug::{Assign, Float};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    angle_between_lines, lambda_ratio_target, lambda_scale_ratio, make_context, AffineSubspace,
    SubspaceCase, SubspaceContext,
};
use crate::numeric::{
    dist_nearest_int, fmt_real, serialize_float, serialize_floats, Precision, Weights,
};
use crate::quality::{theta_dual_apply, BadnessCertificate, SystemMatrix};

/// Default cap on candidate checks for one box.
pub const DEFAULT_BUDGET: u128 = 200_000_000;

/// An integer point `w = (u, v)` with `u` in `Z^n`, `v` in `Z^m`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticePoint {
    pub u: Vec<i64>,
    pub v: Vec<i64>,
}

impl LatticePoint {
    pub fn is_zero(&self) -> bool {
        self.u.iter().chain(&self.v).all(|&x| x == 0)
    }

    pub fn negated(&self) -> Self {
        LatticePoint {
            u: self.u.iter().map(|x| -x).collect(),
            v: self.v.iter().map(|x| -x).collect(),
        }
    }
}

/// `{ |x_i| <= beta_i T^(m k_i), max_j |Theta*_j(x) - y_j| <= beta_{n+1} / T }`.
#[derive(Clone, Debug)]
pub struct ParallelepipedSpec<'a> {
    pub theta: &'a SystemMatrix,
    pub k: &'a Weights,
    pub scale: Float,
    pub betas: Vec<Float>,
}

impl<'a> ParallelepipedSpec<'a> {
    pub fn new(theta: &'a SystemMatrix, k: &'a Weights, scale: Float, betas: Vec<Float>) -> Result<Self> {
        if scale < 1 {
            return Err(Error::Validation(format!("scale T = {} is below 1", fmt_real(&scale))));
        }
        if betas.len() != theta.n() + 1 {
            return Err(Error::Validation(format!(
                "need {} betas, got {}",
                theta.n() + 1,
                betas.len()
            )));
        }
        if betas.iter().any(|b| *b <= 0) {
            return Err(Error::Validation("betas must be positive".into()));
        }
        if k.n() != theta.n() || k.m() != theta.m() {
            return Err(Error::Validation("weights do not match the matrix".into()));
        }
        Ok(ParallelepipedSpec { theta, k, scale, betas })
    }

    /// `beta_i T^(m k_i)`.
    pub fn side(&self, i: usize) -> Float {
        let bits = self.scale.prec();
        let p = Float::with_val(bits, (&self.scale).pow(&self.k.exponent(i)));
        p * &self.betas[i]
    }

    /// `beta_{n+1} / T`.
    pub fn slab(&self) -> Float {
        Float::with_val(self.scale.prec(), &self.betas[self.theta.n()] / &self.scale)
    }

    fn integer_bounds(&self, tol: &Float) -> Result<Vec<i64>> {
        (0..self.theta.n())
            .map(|i| {
                let s = Float::with_val(self.scale.prec(), self.side(i) + tol).floor();
                s.to_integer()
                    .and_then(|v| v.to_i64())
                    .filter(|&v| v < i64::MAX / 4)
                    .ok_or_else(|| Error::BudgetExceeded {
                        context: "parallelepiped side".into(),
                        needed: u128::MAX,
                        budget: i64::MAX as u128,
                    })
            })
            .collect()
    }

    pub fn contains(&self, w: &LatticePoint, tol: &Float) -> bool {
        let bits = self.scale.prec();
        for (i, &ui) in w.u.iter().enumerate() {
            if Float::with_val(bits, ui.unsigned_abs()) > Float::with_val(bits, self.side(i) + tol) {
                return false;
            }
        }
        let bound = Float::with_val(bits, self.slab() + tol);
        (0..self.theta.m()).all(|j| {
            let val = theta_dual_apply(self.theta, j, &w.u).expect("dimensions checked");
            Float::with_val(bits, val - w.v[j]).abs() <= bound
        })
    }
}

/// Every nonzero integer point of the box, sorted lexicographically by
/// `(u, v)`. Errors when the estimated work exceeds `budget`.
pub fn enumerate_pi(spec: &ParallelepipedSpec<'_>, prec: &Precision, budget: u128) -> Result<Vec<LatticePoint>> {
    let tol = prec.tolerance();
    let bounds = spec.integer_bounds(&tol)?;
    let delta = Float::with_val(prec.bits(), spec.slab() + &tol);
    enumerate::search_box(spec.theta, bounds, delta, budget, "parallelepiped enumeration")
}

/// Work estimate for [`enumerate_pi`] in candidate checks.
pub fn enumeration_work(spec: &ParallelepipedSpec<'_>, prec: &Precision) -> Result<u128> {
    let tol = prec.tolerance();
    let bounds = spec.integer_bounds(&tol)?;
    let delta = Float::with_val(prec.bits(), spec.slab() + &tol);
    Ok(enumerate::BoxSearch::new(spec.theta, bounds, delta).work())
}

/// `max_j |Theta*_j(u) - v_j|`.
pub fn psi_of(theta: &SystemMatrix, w: &LatticePoint) -> Float {
    let mut best = Float::new(theta.bits());
    for j in 0..theta.m() {
        let val = theta_dual_apply(theta, j, &w.u).expect("dimensions checked");
        let d = Float::with_val(theta.bits(), val - w.v[j]).abs();
        if d > best {
            best = d;
        }
    }
    best
}

/// Betas of the Minkowski box: `1` before the lead slot, `gamma^(-m) lambda^t`
/// at it, `1/lambda` after it, and `gamma` for the slab.
pub fn big_box_betas(ctx: &SubspaceContext, gamma: &Float, m: usize) -> Vec<Float> {
    let bits = gamma.prec();
    let lam_inv = Float::with_val(bits, ctx.lambda.recip_ref());
    let mut betas = Vec::with_capacity(ctx.ambient_dim + 1);
    for i in 0..ctx.ambient_dim {
        betas.push(if i < ctx.lead {
            Float::with_val(bits, 1)
        } else if i == ctx.lead {
            let g = Float::with_val(bits, gamma.pow(m as u32));
            Float::with_val(bits, (&ctx.lambda).pow(ctx.t as u32)) / g
        } else {
            lam_inv.clone()
        });
    }
    betas.push(gamma.clone());
    betas
}

/// Betas of the box that must be free of nonzero integer points.
pub fn small_box_betas(ctx: &SubspaceContext, gamma: &Float) -> Vec<Float> {
    let bits = gamma.prec();
    let lam_inv = Float::with_val(bits, ctx.lambda.recip_ref());
    let mut betas: Vec<Float> = (0..ctx.ambient_dim)
        .map(|i| if i <= ctx.lead { Float::with_val(bits, 1) } else { lam_inv.clone() })
        .collect();
    betas.push(gamma.clone());
    betas
}

/// The chosen vector at one scale.
#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    pub point: LatticePoint,
    pub psi: Float,
    /// Nonzero points found in the Minkowski box.
    pub big_box_points: usize,
}

/// Picks `w(T)` in the Minkowski box minus the small box: smallest
/// `|u_lead|`, then smallest `psi`, then `u_lead > 0`, then lexicographic.
///
/// Fails with [`Error::GammaTooLarge`] when the small box holds a nonzero
/// integer point. Weights must be sorted in descending order.
pub fn select_w(
    theta: &SystemMatrix,
    k: &Weights,
    ctx: &SubspaceContext,
    gamma: &Float,
    scale: &Float,
    prec: &Precision,
    budget: u128,
) -> Result<Selection> {
    if !k.is_sorted_desc() {
        return Err(Error::Precondition("weights must be sorted in descending order".into()));
    }
    let tol = prec.tolerance();
    let big = ParallelepipedSpec::new(theta, k, scale.clone(), big_box_betas(ctx, gamma, k.m()))?;
    let points = enumerate_pi(&big, prec, budget)?;
    let lead_side = Float::with_val(prec.bits(), Float::with_val(prec.bits(), scale.pow(&k.exponent(ctx.lead))) + &tol);
    let mut best: Option<(u64, Float, LatticePoint)> = None;
    for w in &points {
        let a = w.u[ctx.lead].unsigned_abs();
        if Float::with_val(prec.bits(), a) <= lead_side {
            return Err(Error::GammaTooLarge {
                u: w.u.clone(),
                v: w.v.clone(),
                scale: fmt_real(scale),
            });
        }
        let psi = psi_of(theta, w);
        let better = match &best {
            None => true,
            Some((ba, bpsi, bw)) => {
                (a, &psi) < (*ba, bpsi)
                    || (a == *ba && psi == *bpsi && {
                        let pos = w.u[ctx.lead] > 0;
                        let bpos = bw.u[ctx.lead] > 0;
                        (pos && !bpos) || (pos == bpos && w < bw)
                    })
            }
        };
        if better {
            best = Some((a, psi, w.clone()));
        }
    }
    let (_, psi, point) = best.ok_or_else(|| {
        Error::invariant(
            "Minkowski",
            format!("no nonzero integer point in the box at T = {}", fmt_real(scale)),
        )
    })?;
    Ok(Selection {
        point,
        psi,
        big_box_points: points.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = ">")]
    Gt,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Lt => "<",
            Relation::Ge => ">=",
            Relation::Gt => ">",
        })
    }
}

/// One evaluated inequality `lhs REL rhs`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckRecord {
    pub tag: String,
    pub index: Option<usize>,
    #[serde(serialize_with = "serialize_float")]
    pub lhs: Float,
    pub relation: Relation,
    #[serde(serialize_with = "serialize_float")]
    pub rhs: Float,
    /// Distance to the boundary, positive when the inequality holds.
    #[serde(serialize_with = "serialize_float")]
    pub slack: Float,
    pub holds: bool,
}

impl CheckRecord {
    /// Non-strict relations accept a violation up to `tol`; strict ones
    /// require a margin above `tol`.
    pub fn new(tag: &str, index: Option<usize>, lhs: Float, relation: Relation, rhs: Float, tol: &Float) -> Self {
        let bits = lhs.prec().max(rhs.prec());
        let slack = match relation {
            Relation::Le | Relation::Lt => Float::with_val(bits, &rhs - &lhs),
            Relation::Ge | Relation::Gt => Float::with_val(bits, &lhs - &rhs),
        };
        let holds = match relation {
            Relation::Le | Relation::Ge => slack >= -tol.clone(),
            Relation::Lt | Relation::Gt => slack > *tol,
        };
        CheckRecord {
            tag: tag.to_string(),
            index,
            lhs,
            relation,
            rhs,
            slack,
            holds,
        }
    }

    pub fn into_result(self) -> Result<Self> {
        if self.holds {
            Ok(self)
        } else {
            Err(self.to_error())
        }
    }

    pub fn to_error(&self) -> Error {
        let at = self.index.map(|i| format!(" at index {i}")).unwrap_or_default();
        Error::invariant(
            self.tag.clone(),
            format!("{} {} {} fails{at}", fmt_real(&self.lhs), self.relation, fmt_real(&self.rhs)),
        )
    }
}

/// Evaluates every per-vector inequality for a selection at scale `T`.
/// Coordinates are the sorted ones.
pub fn selection_checks(
    k: &Weights,
    ctx: &SubspaceContext,
    gamma: &Float,
    scale: &Float,
    sel: &Selection,
    prec: &Precision,
) -> Vec<CheckRecord> {
    let bits = prec.bits();
    let tol = prec.tolerance();
    let m = k.m();
    let lead = ctx.lead;
    let t = ctx.t;
    let u = &sel.point.u;
    let abs = |i: usize| Float::with_val(bits, u[i].unsigned_abs());
    let tpow = |i: usize| Float::with_val(bits, scale.pow(&k.exponent(i)));
    let lam_t = Float::with_val(bits, (&ctx.lambda).pow(t as u32));
    let gam_m = Float::with_val(bits, gamma.pow(m as u32));
    let lam_inv = Float::with_val(bits, ctx.lambda.recip_ref());
    let mut out = Vec::new();
    for i in 0..lead {
        out.push(CheckRecord::new("2.1''", Some(i), abs(i), Relation::Le, tpow(i), &tol));
    }
    let lead_cap = Float::with_val(bits, &lam_t / &gam_m) * tpow(lead);
    out.push(CheckRecord::new("2uy", Some(lead), abs(lead), Relation::Le, lead_cap.clone(), &tol));
    for i in lead + 1..k.n() {
        out.push(CheckRecord::new("2uz", Some(i), abs(i), Relation::Le, Float::with_val(bits, &lam_inv * tpow(i)), &tol));
    }
    let t_inv = Float::with_val(bits, scale.recip_ref());
    out.push(CheckRecord::new("2.2''", None, sel.psi.clone(), Relation::Le, Float::with_val(bits, gamma * &t_inv), &tol));
    out.push(CheckRecord::new("2uu", Some(lead), abs(lead), Relation::Gt, tpow(lead), &tol));

    // P1: the lead coordinate attains max_i |u_i|^(1/(m k_i))
    let root = |i: usize| {
        if u[i] == 0 {
            Float::new(bits)
        } else {
            Float::with_val(bits, abs(i).pow(&k.dual_exponent(i)))
        }
    };
    let lead_root = root(lead);
    for i in (0..k.n()).filter(|&i| i != lead) {
        out.push(CheckRecord::new("P1", Some(i), root(i), Relation::Le, lead_root.clone(), &tol));
    }
    // P2: psi >= gamma / max_i |u_i|^(1/(m k_i)) >= lambda^(-t/(m k)) gamma^(1+1/k) / T
    let max_root = (0..k.n()).map(root).fold(Float::new(bits), |a, b| if b > a { b } else { a });
    out.push(CheckRecord::new("P2", None, sel.psi.clone(), Relation::Ge, Float::with_val(bits, gamma / &max_root), &tol));
    let k_lead = k.k(lead);
    let mk = k.exponent(lead);
    let lam_part = Float::with_val(bits, (&ctx.lambda).pow(Float::with_val(bits, -(t as i32)) / &mk));
    let gam_part = Float::with_val(bits, gamma.pow(Float::with_val(bits, k_lead.recip_ref()) + 1u32));
    let p2_floor = lam_part * gam_part * &t_inv;
    out.push(CheckRecord::new("P2", None, sel.psi.clone(), Relation::Ge, p2_floor, &tol));

    // ou: the tail (u_lead, ..., u_n) lies in the projected big box but not
    // the projected small box
    let tail_ok_small = (lead + 1..k.n()).all(|i| abs(i) <= Float::with_val(bits, &lam_inv * tpow(i)) + &tol);
    let outside_small = abs(lead) > Float::with_val(bits, tpow(lead) + &tol);
    let inside_big = abs(lead) <= Float::with_val(bits, &lead_cap + &tol) && tail_ok_small;
    let ou = if inside_big && outside_small { 1 } else { 0 };
    out.push(CheckRecord::new("ou", None, Float::with_val(bits, ou), Relation::Ge, Float::with_val(bits, 1), &tol));

    if t >= 1 {
        let tilde: Vec<Float> = u[lead..].iter().map(|&x| Float::with_val(bits, x)).collect();
        let mut axis = vec![Float::new(bits); t + 1];
        axis[0].assign(1);
        let ang = angle_between_lines(&tilde, &axis);
        out.push(CheckRecord::new("angle", None, ang, Relation::Le, ctx.sigma.clone(), &tol));
    }
    out
}

/// Permutation sorting the weights in descending order (stable).
/// `sorted[i] = original[perm[i]]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CoordinateOrder {
    pub perm: Vec<usize>,
}

impl CoordinateOrder {
    pub fn for_weights(k: &Weights) -> Self {
        let mut perm: Vec<usize> = (0..k.n()).collect();
        perm.sort_by(|&a, &b| k.k(b).partial_cmp(k.k(a)).expect("finite weights"));
        CoordinateOrder { perm }
    }

    pub fn is_identity(&self) -> bool {
        self.perm.iter().enumerate().all(|(i, &p)| i == p)
    }

    pub fn to_sorted<T: Clone>(&self, original: &[T]) -> Vec<T> {
        self.perm.iter().map(|&p| original[p].clone()).collect()
    }

    pub fn to_original<T: Clone>(&self, sorted: &[T]) -> Vec<T> {
        let mut out = sorted.to_vec();
        for (i, &p) in self.perm.iter().enumerate() {
            out[p] = sorted[i].clone();
        }
        out
    }
}

/// One element `w_r` of the sequence.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LambdaEntry {
    pub r: usize,
    #[serde(rename = "T", serialize_with = "serialize_float")]
    pub scale: Float,
    /// `(u, v)` in the caller's coordinate order.
    pub w: LatticePoint,
    #[serde(serialize_with = "serialize_float")]
    pub psi: Float,
    /// Last `t + 1` coordinates of `u` in sorted order.
    pub u_tilde: Vec<i64>,
    #[serde(serialize_with = "serialize_float")]
    pub u_tilde_norm: Float,
    #[serde(serialize_with = "serialize_float")]
    pub u_proj_norm: Float,
    pub big_box_points: usize,
    pub checks: Vec<CheckRecord>,
}

/// The finite sequence `w_1, ..., w_{r_max}` at scales `T_r = R^r`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LambdaSequence {
    /// Context in sorted coordinates.
    pub context: SubspaceContext,
    pub order: CoordinateOrder,
    /// Dual constant actually used (after any halving).
    #[serde(serialize_with = "serialize_float")]
    pub gamma: Float,
    #[serde(serialize_with = "serialize_float")]
    pub gamma_certified: Float,
    pub gamma_q: u64,
    pub gamma_halvings: u32,
    #[serde(serialize_with = "serialize_float")]
    pub r_lambda: Float,
    #[serde(serialize_with = "serialize_float")]
    pub ratio_target: Float,
    pub m: usize,
    #[serde(serialize_with = "serialize_floats")]
    pub weights_sorted: Vec<Float>,
    pub entries: Vec<LambdaEntry>,
    pub sequence_checks: Vec<CheckRecord>,
    pub precision_digits: u32,
}

impl LambdaSequence {
    pub fn r_max(&self) -> usize {
        self.entries.len()
    }

    pub fn psi(&self) -> Vec<Float> {
        self.entries.iter().map(|e| e.psi.clone()).collect()
    }

    pub fn all_checks(&self) -> impl Iterator<Item = &CheckRecord> {
        self.entries
            .iter()
            .flat_map(|e| e.checks.iter())
            .chain(&self.sequence_checks)
    }

    pub fn failed_checks(&self) -> Vec<&CheckRecord> {
        self.all_checks().filter(|c| !c.holds).collect()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct LambdaOptions {
    pub budget: u128,
    pub max_halvings: u32,
}

impl Default for LambdaOptions {
    fn default() -> Self {
        LambdaOptions {
            budget: DEFAULT_BUDGET,
            max_halvings: 40,
        }
    }
}

/// Projected work for each scale `T_1..T_{r_max}` with the given constant.
pub fn projected_work(
    theta: &SystemMatrix,
    k: &Weights,
    subspace: &AffineSubspace,
    gamma: &Float,
    r_max: usize,
    prec: &Precision,
) -> Result<Vec<u128>> {
    let order = CoordinateOrder::for_weights(k);
    let ks = k.permuted(&order.perm);
    let ts = theta.permuted_rows(&order.perm);
    let ctx = make_context(&subspace.direction.permuted(&order.perm, prec)?, prec)?;
    let r = lambda_scale_ratio(&ctx, gamma, &ks)?;
    (1..=r_max)
        .map(|i| {
            let scale = Float::with_val(prec.bits(), (&r).pow(i as u32));
            let spec = ParallelepipedSpec::new(&ts, &ks, scale, big_box_betas(&ctx, gamma, ks.m()))?;
            enumeration_work(&spec, prec)
        })
        .collect()
}

/// Builds `w_1, ..., w_{r_max}` and checks every inequality.
///
/// The dual constant starts at the certificate value. Whenever the small
/// box turns out to hold a nonzero point, or the lower bound on `psi`
/// fails, the constant is halved and the sequence rebuilt.
pub fn build_lambda(
    theta: &SystemMatrix,
    k: &Weights,
    subspace: &AffineSubspace,
    certificate: &BadnessCertificate,
    r_max: usize,
    opts: &LambdaOptions,
    prec: &Precision,
) -> Result<LambdaSequence> {
    let gamma0 = certificate.require_dual_constant()?.clone();
    if r_max == 0 {
        return Err(Error::Validation("r_max must be at least 1".into()));
    }
    if subspace.direction.ambient_dim() != theta.n() || k.n() != theta.n() || k.m() != theta.m() {
        return Err(Error::Validation("matrix, weights and subspace dimensions disagree".into()));
    }
    let order = CoordinateOrder::for_weights(k);
    let ks = k.permuted(&order.perm);
    let ts = theta.permuted_rows(&order.perm);
    let lin = subspace.direction.permuted(&order.perm, prec)?;
    let ctx = make_context(&lin, prec)?;
    let tol = prec.tolerance();
    let bits = prec.bits();

    let mut gamma = Float::with_val(bits, &gamma0);
    let mut halvings = 0u32;
    let (entries, seq_checks, r_lambda, target) = 'attempt: loop {
        let r_lambda = lambda_scale_ratio(&ctx, &gamma, &ks)?;
        let mut entries = Vec::with_capacity(r_max);
        for r in 1..=r_max {
            let scale = Float::with_val(bits, (&r_lambda).pow(r as u32));
            let sel = match select_w(&ts, &ks, &ctx, &gamma, &scale, prec, opts.budget) {
                Ok(sel) => sel,
                Err(Error::GammaTooLarge { .. }) if halvings < opts.max_halvings => {
                    gamma /= 2u32;
                    halvings += 1;
                    continue 'attempt;
                }
                Err(e) => return Err(e),
            };
            let checks = selection_checks(&ks, &ctx, &gamma, &scale, &sel, prec);
            if checks.iter().any(|c| c.tag == "P2" && !c.holds) {
                if halvings < opts.max_halvings {
                    gamma /= 2u32;
                    halvings += 1;
                    continue 'attempt;
                }
                let bad = checks.iter().find(|c| c.tag == "P2" && !c.holds).expect("found above");
                return Err(bad.to_error());
            }
            if let Some(bad) = checks.iter().find(|c| !c.holds) {
                return Err(bad.to_error());
            }
            entries.push(make_entry(r, scale, sel, checks, &ctx, &ks, &lin, &order, prec));
        }
        let target = lambda_ratio_target(&ctx);
        let mut seq_checks = Vec::new();
        let mk = ks.exponent(ctx.lead);
        let lam_t = Float::with_val(bits, (&ctx.lambda).pow(ctx.t as u32));
        let gam_m = Float::with_val(bits, (&gamma).pow(ks.m() as u32));
        let upper_factor = Float::with_val(bits, ctx.t as u32 + 1).sqrt() * lam_t / gam_m;
        for (idx, e) in entries.iter().enumerate() {
            let tp = Float::with_val(bits, (&e.scale).pow(&mk));
            seq_checks.push(CheckRecord::new("lemma-lower", Some(idx + 1), e.u_tilde_norm.clone(), Relation::Ge, tp.clone(), &tol));
            seq_checks.push(CheckRecord::new("lemma-upper", Some(idx + 1), e.u_tilde_norm.clone(), Relation::Le, Float::with_val(bits, &upper_factor * &tp), &tol));
        }
        for pair in entries.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            let ratio = Float::with_val(bits, &b.u_tilde_norm / &a.u_tilde_norm);
            seq_checks.push(CheckRecord::new("lasa", Some(a.r), ratio, Relation::Ge, target.clone(), &tol));
            let ratio = Float::with_val(bits, &b.u_proj_norm / &a.u_proj_norm);
            seq_checks.push(CheckRecord::new("lacunarity", Some(a.r), ratio, Relation::Ge, Float::with_val(bits, 2), &tol));
            seq_checks.push(CheckRecord::new("psi-decreasing", Some(a.r), b.psi.clone(), Relation::Lt, a.psi.clone(), &tol));
            let ratio = Float::with_val(bits, &a.psi / &b.psi);
            seq_checks.push(CheckRecord::new("jj", Some(b.r), ratio, Relation::Le, Float::with_val(bits, r_lambda.square_ref()), &tol));
        }
        if let Some(bad) = seq_checks.iter().find(|c| !c.holds) {
            return Err(bad.to_error());
        }
        break (entries, seq_checks, r_lambda, target);
    };
    Ok(LambdaSequence {
            context: ctx,
            order,
            gamma,
            gamma_certified: gamma0,
            gamma_q: certificate.q_range,
            gamma_halvings: halvings,
            r_lambda,
            ratio_target: target,
            m: ks.m(),
            weights_sorted: (0..ks.n()).map(|i| ks.k(i).clone()).collect(),
            entries,
            sequence_checks: seq_checks,
        precision_digits: prec.digits(),
    })
}

#[allow(clippy::too_many_arguments)]
fn make_entry(
    r: usize,
    scale: Float,
    sel: Selection,
    checks: Vec<CheckRecord>,
    ctx: &SubspaceContext,
    ks: &Weights,
    lin: &crate::geometry::LinearSubspace,
    order: &CoordinateOrder,
    prec: &Precision,
) -> LambdaEntry {
    let bits = prec.bits();
    let u_sorted = &sel.point.u;
    let u_tilde: Vec<i64> = u_sorted[ctx.lead..].to_vec();
    let tilde_f: Vec<Float> = u_tilde.iter().map(|&x| Float::with_val(bits, x)).collect();
    let u_tilde_norm = crate::geometry::euclid_norm(&tilde_f);
    let full: Vec<Float> = u_sorted.iter().map(|&x| Float::with_val(bits, x)).collect();
    let u_proj_norm = if ctx.case == SubspaceCase::Case1 {
        u_tilde_norm.clone()
    } else {
        lin.projection_norm(&full)
    };
    debug_assert_eq!(ks.n(), u_sorted.len());
    LambdaEntry {
        r,
        scale,
        w: LatticePoint {
            u: order.to_original(u_sorted),
            v: sel.point.v.clone(),
        },
        psi: sel.psi,
        u_tilde,
        u_tilde_norm,
        u_proj_norm,
        big_box_points: sel.big_box_points,
        checks,
    }
}

/// `min_r ||x . u_r||` over the finite sequence, with the minimizing `r`
/// (first on ties). `x` is in the caller's coordinate order.
pub fn n_lambda_membership(x: &[Float], seq: &LambdaSequence) -> Result<(Float, usize)> {
    let first = seq
        .entries
        .first()
        .ok_or_else(|| Error::Precondition("empty sequence".into()))?;
    if x.len() != first.w.u.len() {
        return Err(Error::Validation("x has the wrong length".into()));
    }
    let bits = x[0].prec();
    let mut best: Option<(Float, usize)> = None;
    for e in &seq.entries {
        let mut acc = Float::new(bits);
        for (xi, &ui) in x.iter().zip(&e.w.u) {
            acc += Float::with_val(bits, xi * ui);
        }
        let d = dist_nearest_int(&acc);
        if best.as_ref().is_none_or(|(b, _)| d < *b) {
            best = Some((d, e.r));
        }
    }
    Ok(best.expect("nonempty"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::LinearSubspace;
    use crate::numeric::RealScalar;
    use crate::quality::{lower_estimate, QualityKind};

    fn p() -> Precision {
        Precision::default()
    }

    fn mat(text: &str) -> SystemMatrix {
        SystemMatrix::parse(text, &p()).unwrap()
    }

    fn w(k: &[&str], m: usize) -> Weights {
        Weights::parse(k, m, &p()).unwrap()
    }

    #[test]
    fn zero_matrix_box() {
        let prec = p();
        let theta = mat("0");
        let k = w(&["1"], 1);
        let spec = ParallelepipedSpec::new(&theta, &k, prec.float(2), vec![prec.float(1), prec.float(1)]).unwrap();
        let pts = enumerate_pi(&spec, &prec, DEFAULT_BUDGET).unwrap();
        let us: Vec<i64> = pts.iter().map(|p| p.u[0]).collect();
        assert_eq!(us, vec![-2, -1, 1, 2]);
        assert!(pts.iter().all(|p| p.v == vec![0]));
    }

    #[test]
    fn wide_slab_yields_several_v() {
        let prec = p();
        let theta = mat("0.5");
        let k = w(&["1"], 1);
        // |u| <= 1, |u/2 - v| <= 1
        let spec = ParallelepipedSpec::new(&theta, &k, prec.float(1), vec![prec.float(1), prec.float(1)]).unwrap();
        let pts = enumerate_pi(&spec, &prec, DEFAULT_BUDGET).unwrap();
        let expect: Vec<LatticePoint> = [(-1, -1), (-1, 0), (0, -1), (0, 1), (1, 0), (1, 1)]
            .iter()
            .map(|&(u, v)| LatticePoint { u: vec![u], v: vec![v] })
            .collect();
        assert_eq!(pts, expect);
    }

    #[test]
    fn budget_is_enforced() {
        let prec = p();
        let theta = mat("sqrt(2);sqrt(3)");
        let k = w(&["2/3", "1/3"], 1);
        let spec = ParallelepipedSpec::new(&theta, &k, prec.float(1000), vec![prec.float(1), prec.float(1), prec.float(1)]).unwrap();
        assert!(matches!(enumerate_pi(&spec, &prec, 10), Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn coordinate_order_roundtrip() {
        let k = w(&["0.2", "0.5", "0.3"], 1);
        let order = CoordinateOrder::for_weights(&k);
        assert_eq!(order.perm, vec![1, 2, 0]);
        let v = vec![10, 20, 30];
        let s = order.to_sorted(&v);
        assert_eq!(s, vec![20, 30, 10]);
        assert_eq!(order.to_original(&s), v);
        assert!(k.permuted(&order.perm).is_sorted_desc());
    }

    fn golden_sequence(r_max: usize) -> LambdaSequence {
        let prec = p();
        let theta = mat("phi");
        let k = w(&["1"], 1);
        let line = LinearSubspace::new(1, vec![vec![prec.float(1)]], &prec).unwrap();
        let a = AffineSubspace::through_origin(line, &prec);
        let cert = lower_estimate(QualityKind::Dual, &theta, &k, None, 50, &prec).unwrap();
        build_lambda(&theta, &k, &a, &cert, r_max, &LambdaOptions::default(), &prec).unwrap()
    }

    #[test]
    fn golden_ratio_selects_fibonacci_numbers() {
        let seq = golden_sequence(5);
        assert_eq!(seq.context.t, 0);
        assert_eq!(seq.context.case, SubspaceCase::Case1);
        assert!(seq.failed_checks().is_empty());
        // ||F_j phi|| = phi^(-j), and Fibonacci numbers are the best approximations
        let prec = p();
        let bits = prec.bits();
        let phi = RealScalar::parse("phi", &prec).unwrap().value().clone();
        let mut fib = vec![0u64, 1];
        while fib.len() < 90 {
            let l = fib.len();
            fib.push(fib[l - 1] + fib[l - 2]);
        }
        for e in &seq.entries {
            let bound = Float::with_val(bits, &seq.gamma / &e.scale);
            let by_fib = (2..fib.len())
                .find(|&j| {
                    let dist = Float::with_val(bits, (&phi).pow(-(j as i32)));
                    Float::with_val(bits, fib[j]) > e.scale && dist <= bound
                })
                .map(|j| fib[j] as i64)
                .unwrap();
            let by_scan = (1i64..)
                .filter(|&u| Float::with_val(bits, u) > e.scale)
                .find(|&u| dist_nearest_int(&Float::with_val(bits, &phi * u)) <= bound)
                .unwrap();
            assert_eq!(by_fib, by_scan);
            assert_eq!(e.w.u, vec![by_scan], "r = {}", e.r);
        }
    }

    #[test]
    fn planted_point_is_selected() {
        let prec = p();
        // theta = 3/101 + 1e-9: u = 101 gives ||u theta|| ~ 1e-7
        let theta = SystemMatrix::new(vec![vec![RealScalar::parse("0.029702970307", &prec).unwrap()]]).unwrap();
        let k = w(&["1"], 1);
        let ctx = SubspaceContext::from_angle(1, 0, SubspaceCase::Case1, prec.zero(), &prec).unwrap();
        let gamma = Float::with_val(prec.bits(), Float::parse("0.05").unwrap());
        let sel = select_w(&theta, &k, &ctx, &gamma, &prec.float(100), &prec, DEFAULT_BUDGET).unwrap();
        assert_eq!(sel.point, LatticePoint { u: vec![101], v: vec![3] });
    }

    #[test]
    fn sign_symmetric_output() {
        let prec = p();
        let theta = mat("sqrt(2);sqrt(3)");
        let k = w(&["2/3", "1/3"], 1);
        let spec = ParallelepipedSpec::new(&theta, &k, prec.float(300), vec![prec.float(3), prec.float(1), prec.float(1)]).unwrap();
        let pts = enumerate_pi(&spec, &prec, DEFAULT_BUDGET).unwrap();
        assert!(!pts.is_empty());
        for p in &pts {
            assert!(pts.binary_search(&p.negated()).is_ok());
            assert!(spec.contains(p, &prec.tolerance()));
        }
    }

    #[test]
    fn membership_examples() {
        let prec = p();
        let seq = golden_sequence(3);
        let (c, _) = n_lambda_membership(&[prec.zero()], &seq).unwrap();
        assert_eq!(c, 0);
        let x = [Float::with_val(prec.bits(), Float::parse("0.3141").unwrap())];
        let (c, r) = n_lambda_membership(&x, &seq).unwrap();
        let direct = seq
            .entries
            .iter()
            .map(|e| dist_nearest_int(&Float::with_val(prec.bits(), &x[0] * e.w.u[0])))
            .fold(prec.float(1), |a, b| if b < a { b } else { a });
        assert_eq!(c, direct);
        assert!((1..=3).contains(&r));
    }
}
