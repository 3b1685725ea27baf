//! The (1/4, beta) game on `f_1(I)` with Alice avoiding every dangerous
//! interval `Delta(p, q)` of the current stage.

mod curve;

pub use curve::{CurveKind, CurveSpec, Polynomial, MAX_BISECTION_STEPS};

use std::fmt;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rug::ops::Pow;
use rug::{Assign, Float};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{fmt_real, serialize_float, sup_norm, Precision, Weights};
use crate::quality::{lower_estimate, theta_row_apply, twisted_quality, BadnessCertificate, QualityKind, SystemMatrix};

/// Default cap on `q` values scanned over a whole run.
pub const DEFAULT_GAME_BUDGET: u128 = 100_000_000;

/// Closed interval `[lo, hi]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Interval {
    #[serde(serialize_with = "serialize_float")]
    pub lo: Float,
    #[serde(serialize_with = "serialize_float")]
    pub hi: Float,
}

impl Interval {
    pub fn new(lo: Float, hi: Float) -> Result<Self> {
        if lo > hi {
            return Err(Error::Validation(format!("interval [{}, {}] is reversed", fmt_real(&lo), fmt_real(&hi))));
        }
        Ok(Interval { lo, hi })
    }

    pub fn len(&self) -> Float {
        Float::with_val(self.lo.prec(), &self.hi - &self.lo)
    }

    pub fn center(&self) -> Float {
        Float::with_val(self.lo.prec(), &self.lo + &self.hi) / 2u32
    }

    pub fn contains_interval(&self, other: &Interval, tol: &Float) -> bool {
        Float::with_val(tol.prec(), &other.lo + tol) >= self.lo && Float::with_val(tol.prec(), &other.hi - tol) <= self.hi
    }

    /// Whether the open interior of `self` meets the closed `other`.
    pub fn open_meets(&self, other: &Interval) -> bool {
        self.lo < other.hi && self.hi > other.lo
    }

    fn with_len_at(lo: Float, len: &Float) -> Interval {
        let hi = Float::with_val(lo.prec(), &lo + len);
        Interval { lo, hi }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", fmt_real(&self.lo), fmt_real(&self.hi))
    }
}

/// Parameters of one game. `alpha` is fixed at 1/4.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GameConfig {
    #[serde(serialize_with = "serialize_float")]
    pub alpha: Float,
    #[serde(serialize_with = "serialize_float")]
    pub beta: Float,
    pub b0: Interval,
    #[serde(serialize_with = "serialize_float")]
    pub c_hom: Float,
    /// `Q` of the certificate behind `c_hom`.
    pub certificate_q: u64,
    #[serde(serialize_with = "serialize_float")]
    pub epsilon: Float,
    #[serde(rename = "R_game", serialize_with = "serialize_float")]
    pub r_game: Float,
    #[serde(serialize_with = "serialize_float")]
    pub kappa_curve: Float,
    /// `false` when `epsilon` was set past its admissible bound.
    pub epsilon_checked: bool,
}

impl GameConfig {
    /// `R = (4 / beta)^(1 / (m k_1))`.
    pub fn game_ratio(beta: &Float, k: &Weights) -> Float {
        let bits = beta.prec();
        let four = Float::with_val(bits, 4u32) / beta;
        four.pow(k.dual_exponent(0))
    }

    /// Validated configuration. Missing `b0` is centred in `f_1(I)` with
    /// length `0.9 c / (2 kappa)`; missing `epsilon` is `0.9` of its bound.
    pub fn new(
        curve: &CurveSpec,
        k: &Weights,
        beta: Float,
        certificate: &BadnessCertificate,
        b0: Option<Interval>,
        epsilon: Option<Float>,
        prec: &Precision,
    ) -> Result<Self> {
        let bits = prec.bits();
        if beta <= 0 || beta >= 1 {
            return Err(Error::Validation(format!("beta = {} is not in (0, 1)", fmt_real(&beta))));
        }
        if certificate.kind != QualityKind::Homogeneous {
            return Err(Error::Precondition("the game needs a homogeneous certificate".into()));
        }
        let c = certificate.gamma.clone();
        if c <= 0 || c >= 1 {
            return Err(Error::Precondition(format!("constant c = {} is not in (0, 1)", fmt_real(&c))));
        }
        if curve.n() != k.n() {
            return Err(Error::Validation("curve and weights disagree on n".into()));
        }
        if k.argmax() != 0 && k.k(k.argmax()) > k.k(0) {
            return Err(Error::Validation("k_1 must be the largest weight".into()));
        }
        let kappa = curve.kappa().clone();
        let b0_cap = Float::with_val(bits, &c / Float::with_val(bits, &kappa * 2u32));
        let (img_lo, img_hi) = curve.image_of_first();
        let b0 = match b0 {
            Some(b) => b,
            None => {
                let img = Interval::new(img_lo.clone(), img_hi.clone())?;
                let len = Float::with_val(bits, &b0_cap * 0.9f64).min(&img.len());
                let half = Float::with_val(bits, &len / 2u32);
                let lo = Float::with_val(bits, img.center() - &half);
                Interval::with_len_at(lo, &len)
            }
        };
        let tol = prec.tolerance();
        if !Interval::new(img_lo, img_hi)?.contains_interval(&b0, &tol) {
            return Err(Error::Validation(format!("B0 = {b0} is not inside f_1(I)")));
        }
        if b0.len() >= b0_cap || b0.len() <= 0 {
            return Err(Error::Validation(format!(
                "|B0| = {} must be in (0, c / (2 kappa)) = (0, {})",
                fmt_real(&b0.len()),
                fmt_real(&b0_cap)
            )));
        }
        let r_game = GameConfig::game_ratio(&beta, k);
        let eps_cap = eps_bound(&b0, &r_game, k);
        let epsilon = match epsilon {
            Some(e) => e,
            None => Float::with_val(bits, &eps_cap * 0.9f64),
        };
        if epsilon <= 0 || epsilon >= eps_cap {
            return Err(Error::Validation(format!(
                "epsilon = {} must be in (0, {})",
                fmt_real(&epsilon),
                fmt_real(&eps_cap)
            )));
        }
        Ok(GameConfig {
            alpha: Float::with_val(bits, 0.25f64),
            beta,
            b0,
            c_hom: c,
            certificate_q: certificate.q_range,
            epsilon,
            r_game,
            kappa_curve: kappa,
            epsilon_checked: true,
        })
    }

    /// Replaces `epsilon` without checking its bound.
    pub fn with_epsilon_unchecked(mut self, epsilon: Float, k: &Weights) -> Self {
        self.epsilon_checked = epsilon > 0 && epsilon < eps_bound(&self.b0, &self.r_game, k);
        self.epsilon = epsilon;
        self
    }

    /// `|B_s| = R^(-s m k_1) |B_0|`.
    pub fn stage_len(&self, s: u32, k: &Weights) -> Float {
        let bits = self.beta.prec();
        let shrink = Float::with_val(bits, (&self.r_game).pow(k.exponent(0) * s));
        Float::with_val(bits, self.b0.len() / shrink)
    }

    /// `(floor(R^(s-1)), floor(R^s)]` with tolerance.
    pub fn stage_q_range(&self, s: u32, prec: &Precision) -> (u64, u64) {
        let tol = prec.tolerance();
        let f = |e: i32| {
            let v = Float::with_val(prec.bits(), (&self.r_game).pow(e)) + &tol;
            v.floor().to_integer().and_then(|i| i.to_u64()).unwrap_or(u64::MAX)
        };
        (f(s as i32 - 1), f(s as i32))
    }
}

fn eps_bound(b0: &Interval, r_game: &Float, k: &Weights) -> Float {
    let bits = r_game.prec();
    let rk = Float::with_val(bits, r_game.pow(k.exponent(0)));
    Float::with_val(bits, b0.len() / Float::with_val(bits, rk * 4u32))
}

/// The unique pair of a stage whose `Delta` meets `B_s`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Dangerous {
    pub p: Vec<i64>,
    pub q: Vec<i64>,
    pub delta: Interval,
}

/// Hull of `Delta(p, q) = { f_1(x) : max_i |q|^(m k_i) |Theta_i(q) - f_i(x) - p_i| < eps }`.
///
/// Each slab is solved on monotone pieces of `f_i`; the pieces surviving
/// every slab form a finite union of intervals whose hull is returned.
pub fn delta_interval(
    curve: &CurveSpec,
    theta: &SystemMatrix,
    k: &Weights,
    epsilon: &Float,
    p: &[i64],
    q: &[i64],
) -> Result<Option<Interval>> {
    if q.iter().all(|&v| v == 0) {
        return Err(Error::Domain("Delta needs q != 0".into()));
    }
    if p.len() != theta.n() || curve.n() != theta.n() {
        return Err(Error::Validation("p, curve and matrix disagree on n".into()));
    }
    let bits = theta.bits();
    let norm = Float::with_val(bits, sup_norm(q));
    let (a, b) = curve.domain();
    let mut pieces = vec![(a.clone(), b.clone())];
    for i in 0..theta.n() {
        let center = Float::with_val(bits, theta_row_apply(theta, i, q)? - p[i]);
        let radius = Float::with_val(bits, epsilon / Float::with_val(bits, (&norm).pow(&k.exponent(i))));
        let lo = Float::with_val(bits, &center - &radius);
        let hi = Float::with_val(bits, &center + &radius);
        pieces = slab_pieces(curve.component(i), &pieces, &lo, &hi);
        if pieces.is_empty() {
            return Ok(None);
        }
    }
    let f1 = curve.component(0);
    let first = f1.eval(&pieces[0].0);
    let last = f1.eval(&pieces[pieces.len() - 1].1);
    let (lo, hi) = if first <= last { (first, last) } else { (last, first) };
    Ok(Some(Interval { lo, hi }))
}

/// Sub-intervals of `pieces` where `lo < f(x) < hi`.
fn slab_pieces(f: &Polynomial, pieces: &[(Float, Float)], lo: &Float, hi: &Float) -> Vec<(Float, Float)> {
    let mut out: Vec<(Float, Float)> = Vec::new();
    for (l, r) in pieces {
        let mut marks = vec![l.clone()];
        marks.extend(f.shifted(lo).roots_in(l, r));
        marks.extend(f.shifted(hi).roots_in(l, r));
        marks.push(r.clone());
        marks.sort_by(|x, y| x.partial_cmp(y).expect("finite"));
        for w in marks.windows(2) {
            if w[1] <= w[0] {
                continue;
            }
            let mid = Float::with_val(w[0].prec(), &w[0] + &w[1]) / 2u32;
            let v = f.eval(&mid);
            if v > *lo && v < *hi {
                match out.last_mut() {
                    Some(prev) if prev.1 == w[0] => prev.1.assign(&w[1]),
                    _ => out.push((w[0].clone(), w[1].clone())),
                }
            }
        }
    }
    out
}

/// Every nonzero `q in Z^m` with `lo < |q| <= hi`, lexicographic.
fn shell(lo: u64, hi: u64, m: usize) -> impl Iterator<Item = Vec<i64>> {
    let hi = hi as i64;
    let side = (2 * hi + 1) as u64;
    let total = side.checked_pow(m as u32).unwrap_or(0);
    (0..total).filter_map(move |mut idx| {
        let mut q = vec![0i64; m];
        for slot in q.iter_mut().rev() {
            *slot = (idx % side) as i64 - hi;
            idx /= side;
        }
        (sup_norm(&q) > lo).then_some(q)
    })
}

fn shell_size(lo: u64, hi: u64, m: usize) -> u128 {
    let count = |h: u64| (2 * h as u128 + 1).checked_pow(m as u32).unwrap_or(u128::MAX);
    if hi <= lo {
        0
    } else {
        count(hi).saturating_sub(count(lo))
    }
}

/// Per-stage context shared by the scans.
struct StageScan<'a> {
    curve: &'a CurveSpec,
    theta: &'a SystemMatrix,
    k: &'a Weights,
    epsilon: &'a Float,
    window: &'a Interval,
    /// `min f_i` and `max f_i` over `f_1^(-1)(window)`.
    ranges: Vec<(Float, Float)>,
}

impl<'a> StageScan<'a> {
    fn new(curve: &'a CurveSpec, theta: &'a SystemMatrix, k: &'a Weights, epsilon: &'a Float, window: &'a Interval) -> Result<Self> {
        let x0 = curve.invert_first(&window.lo)?;
        let x1 = curve.invert_first(&window.hi)?;
        let (l, r) = if x0 <= x1 { (x0, x1) } else { (x1, x0) };
        let ranges = (0..curve.n()).map(|i| curve.range_on(i, &l, &r)).collect();
        Ok(StageScan {
            curve,
            theta,
            k,
            epsilon,
            window,
            ranges,
        })
    }

    /// Every `(p, q)` for this `q` whose `Delta` hull meets the window.
    fn hits_for(&self, q: &[i64]) -> Result<Vec<Dangerous>> {
        let bits = self.theta.bits();
        let norm = Float::with_val(bits, sup_norm(q));
        let mut choices: Vec<Vec<i64>> = Vec::with_capacity(self.theta.n());
        for i in 0..self.theta.n() {
            let row = theta_row_apply(self.theta, i, q)?;
            let radius = Float::with_val(bits, self.epsilon / Float::with_val(bits, (&norm).pow(&self.k.exponent(i))));
            let (fmin, fmax) = &self.ranges[i];
            // |row - p - f| < radius for some f in [fmin, fmax]
            let lo = Float::with_val(bits, &row - fmax) - &radius;
            let hi = Float::with_val(bits, &row - fmin) + &radius;
            let first = lo.floor().to_integer().and_then(|v| v.to_i64()).unwrap_or(i64::MIN) + 1;
            let last = hi.ceil().to_integer().and_then(|v| v.to_i64()).unwrap_or(i64::MAX) - 1;
            if first > last {
                return Ok(Vec::new());
            }
            choices.push((first..=last).collect());
        }
        let mut hits = Vec::new();
        let mut idx = vec![0usize; choices.len()];
        loop {
            let p: Vec<i64> = idx.iter().zip(&choices).map(|(&j, c)| c[j]).collect();
            if let Some(delta) = delta_interval(self.curve, self.theta, self.k, self.epsilon, &p, q)? {
                if delta.open_meets(self.window) {
                    hits.push(Dangerous { p, q: q.to_vec(), delta });
                }
            }
            let mut pos = 0;
            while pos < idx.len() {
                idx[pos] += 1;
                if idx[pos] < choices[pos].len() {
                    break;
                }
                idx[pos] = 0;
                pos += 1;
            }
            if pos == idx.len() {
                break;
            }
        }
        Ok(hits)
    }

    fn scan(&self, lo: u64, hi: u64) -> Result<Vec<Dangerous>> {
        let qs: Vec<Vec<i64>> = shell(lo, hi, self.theta.m()).collect();
        let found: Vec<Result<Vec<Dangerous>>> = qs.par_iter().map(|q| self.hits_for(q)).collect();
        let mut hits = Vec::new();
        for f in found {
            hits.extend(f?);
        }
        Ok(hits)
    }
}

/// The pair of stage `s` whose `Delta` meets `B_s`, if any.
///
/// Fails with [`Error::Fact2Violation`] on two distinct hits and with
/// [`Error::Fact1Violation`] when a hit is too long.
pub fn find_dangerous(
    s: u32,
    b_s: &Interval,
    curve: &CurveSpec,
    theta: &SystemMatrix,
    k: &Weights,
    cfg: &GameConfig,
    prec: &Precision,
) -> Result<Option<Dangerous>> {
    let (lo, hi) = cfg.stage_q_range(s, prec);
    let scan = StageScan::new(curve, theta, k, &cfg.epsilon, b_s)?;
    let mut hits = scan.scan(lo, hi)?;
    if hits.len() > 1 {
        return Err(Error::Fact2Violation {
            stage: s as usize,
            hits: hits.into_iter().map(|h| (h.p, h.q)).collect(),
        });
    }
    let hit = hits.pop();
    if let Some(h) = &hit {
        check_fact1(s, h, b_s, cfg, k, prec)?;
    }
    Ok(hit)
}

fn check_fact1(s: u32, h: &Dangerous, b_s: &Interval, cfg: &GameConfig, k: &Weights, prec: &Precision) -> Result<()> {
    let bits = prec.bits();
    let tol = prec.tolerance();
    let len = h.delta.len();
    let norm = Float::with_val(bits, sup_norm(&h.q));
    let cap = Float::with_val(bits, &cfg.epsilon * 2u32) / Float::with_val(bits, norm.pow(k.exponent(0)));
    let half = Float::with_val(bits, b_s.len() / 2u32);
    if len > Float::with_val(bits, &cap + &tol) || len >= half {
        return Err(Error::Fact1Violation {
            stage: s as usize,
            length: fmt_real(&len),
            half_ball: fmt_real(&half),
        });
    }
    Ok(())
}

/// Alice's reply: the leftmost quarter of `B_s`, or of the larger gap left
/// by the dangerous interval (left on ties). Fails only when neither gap
/// holds a quarter; the length bound itself is checked by [`find_dangerous`].
pub fn alice_move(b_s: &Interval, dangerous: Option<&Interval>) -> Result<Interval> {
    let bits = b_s.lo.prec();
    let quarter = Float::with_val(bits, b_s.len() / 4u32);
    let Some(d) = dangerous else {
        return Ok(Interval::with_len_at(b_s.lo.clone(), &quarter));
    };
    let left_end = Float::with_val(bits, d.lo.clamp_ref(&b_s.lo, &b_s.hi));
    let right_start = Float::with_val(bits, d.hi.clamp_ref(&b_s.lo, &b_s.hi));
    let left = Float::with_val(bits, &left_end - &b_s.lo);
    let right = Float::with_val(bits, &b_s.hi - &right_start);
    if left < quarter && right < quarter {
        return Err(Error::Fact1Violation {
            stage: usize::MAX,
            length: fmt_real(&d.len()),
            half_ball: fmt_real(&Float::with_val(bits, b_s.len() / 2u32)),
        });
    }
    let start = if left >= right { b_s.lo.clone() } else { right_start };
    Ok(Interval::with_len_at(start, &quarter))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BobStrategy {
    Center,
    SeededRandom,
    Adversary,
}

impl FromStr for BobStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "center" => Ok(BobStrategy::Center),
            "seeded_random" | "random" => Ok(BobStrategy::SeededRandom),
            "adversary" => Ok(BobStrategy::Adversary),
            _ => Err(Error::parse(s, "expected center, seeded_random or adversary")),
        }
    }
}

/// State Bob may consult.
pub struct BobContext<'a> {
    pub rng: &'a mut ChaCha8Rng,
    /// Centre of the next stage's danger he is aiming at, if any.
    pub target: Option<Float>,
}

/// Bob's reply: a sub-interval of `A_s` of length `beta |A_s|`.
pub fn bob_move(strategy: BobStrategy, a_s: &Interval, beta: &Float, ctx: &mut BobContext<'_>) -> Interval {
    let bits = a_s.lo.prec();
    let len = Float::with_val(bits, a_s.len() * beta);
    let slack = Float::with_val(bits, a_s.len() - &len);
    let offset = match strategy {
        BobStrategy::Center => Float::with_val(bits, &slack / 2u32),
        BobStrategy::SeededRandom => {
            let u = Float::with_val(bits, ctx.rng.next_u64()) / Float::with_val(bits, Float::u_exp(1, 64));
            slack * u
        }
        BobStrategy::Adversary => match &ctx.target {
            Some(t) => {
                let want = Float::with_val(bits, t - &a_s.lo) - Float::with_val(bits, &len / 2u32);
                want.clamp(&Float::new(bits), &slack)
            }
            None => Float::with_val(bits, &slack / 2u32),
        },
    };
    let lo = Float::with_val(bits, &a_s.lo + &offset);
    Interval::with_len_at(lo, &len)
}

/// One round `B_s -> A_s -> B_{s+1}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StageRecord {
    pub s: u32,
    pub b_s: Interval,
    /// `(lo, hi]` bounds on `|q|` for this stage.
    pub q_range: (u64, u64),
    pub q_scanned: u128,
    pub dangerous: Option<Dangerous>,
    pub a_s: Interval,
    pub bob_choice: Interval,
}

/// Twisted quality of the witness, both where it is guaranteed and beyond.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WitnessCheck {
    /// `|q|` up to which every stage was played.
    pub guaranteed_q: u64,
    #[serde(serialize_with = "serialize_float")]
    pub guaranteed_min: Float,
    pub guaranteed_argmin: Vec<i64>,
    /// Twisted lower estimate over `|q| <= R^S`.
    pub estimate: BadnessCertificate,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GameTranscript {
    pub config: GameConfig,
    pub bob: BobStrategy,
    pub seed: u64,
    pub depth_requested: u32,
    pub depth_reached: u32,
    pub completed: bool,
    pub stop_reason: Option<String>,
    pub stages: Vec<StageRecord>,
    pub final_interval: Interval,
    /// Centre of the last `B_S`, within `|B_S| / 2` of the limit point.
    #[serde(serialize_with = "serialize_float")]
    pub witness: Float,
    #[serde(serialize_with = "serialize_float")]
    pub witness_parameter: Float,
    #[serde(serialize_with = "crate::numeric::serialize_floats")]
    pub witness_point: Vec<Float>,
    #[serde(rename = "certificate_Q")]
    pub certificate_q: u64,
    /// Whether the certificate covers every difference `q - q'` of the run.
    pub certificate_covers_run: bool,
    pub witness_check: Option<WitnessCheck>,
}

impl GameTranscript {
    /// One JSON object per stage, then a summary line; keys sorted.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for st in &self.stages {
            let v = serde_json::to_value(st).expect("serializable");
            out.push_str(&serde_json::to_string(&v).expect("serializable"));
            out.push('\n');
        }
        let mut summary = serde_json::to_value(self).expect("serializable");
        if let Some(obj) = summary.as_object_mut() {
            obj.remove("stages");
        }
        out.push_str(&serde_json::to_string(&summary).expect("serializable"));
        out.push('\n');
        out
    }
}

#[derive(Clone, Copy, Debug)]
pub struct GameOptions {
    pub budget: u128,
    pub seed: u64,
    pub witness_check: bool,
}

impl Default for GameOptions {
    fn default() -> Self {
        GameOptions {
            budget: DEFAULT_GAME_BUDGET,
            seed: 0,
            witness_check: true,
        }
    }
}

/// Plays `depth` rounds. Runs past the budget stop early with
/// `completed = false`.
#[allow(clippy::too_many_arguments)]
pub fn run_game(
    curve: &CurveSpec,
    theta: &SystemMatrix,
    k: &Weights,
    cfg: &GameConfig,
    bob: BobStrategy,
    depth: u32,
    opts: &GameOptions,
    prec: &Precision,
) -> Result<GameTranscript> {
    if k.n() != theta.n() || k.m() != theta.m() || curve.n() != theta.n() {
        return Err(Error::Validation("curve, matrix and weights disagree".into()));
    }
    let bits = prec.bits();
    let tol = prec.tolerance();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut stages = Vec::new();
    let mut b_s = cfg.b0.clone();
    let mut spent: u128 = 0;
    let mut stop_reason = None;
    for s in 0..depth {
        let (lo, hi) = cfg.stage_q_range(s, prec);
        let mut cost = shell_size(lo, hi, theta.m());
        if bob == BobStrategy::Adversary && s + 1 < depth {
            let (nlo, nhi) = cfg.stage_q_range(s + 1, prec);
            cost += shell_size(nlo, nhi, theta.m());
        }
        if spent + cost > opts.budget {
            stop_reason = Some(format!(
                "stage {s} needs {cost} more q checks, {} of {} already used",
                spent, opts.budget
            ));
            break;
        }
        spent += cost;
        let expected = cfg.stage_len(s, k);
        if Float::with_val(bits, b_s.len() - &expected).abs() > Float::with_val(bits, &tol * &expected) {
            return Err(Error::invariant("Bk", format!("|B_{s}| = {} but expected {}", fmt_real(&b_s.len()), fmt_real(&expected))));
        }
        let dangerous = find_dangerous(s, &b_s, curve, theta, k, cfg, prec)?;
        let a_s = alice_move(&b_s, dangerous.as_ref().map(|d| &d.delta)).map_err(|e| match e {
            Error::Fact1Violation { length, half_ball, .. } => Error::Fact1Violation { stage: s as usize, length, half_ball },
            other => other,
        })?;
        if let Some(d) = &dangerous {
            if d.delta.open_meets(&a_s) {
                return Err(Error::invariant("k", format!("A_{s} = {a_s} meets Delta = {}", d.delta)));
            }
        }
        let target = if bob == BobStrategy::Adversary && s + 1 < depth {
            let (nlo, nhi) = cfg.stage_q_range(s + 1, prec);
            let scan = StageScan::new(curve, theta, k, &cfg.epsilon, &a_s)?;
            let centre = a_s.center();
            scan.scan(nlo, nhi)?
                .into_iter()
                .map(|h| h.delta.center())
                .min_by(|x, y| {
                    let dx = Float::with_val(bits, x - &centre).abs();
                    let dy = Float::with_val(bits, y - &centre).abs();
                    dx.partial_cmp(&dy).expect("finite")
                })
        } else {
            None
        };
        let mut bctx = BobContext { rng: &mut rng, target };
        let next = bob_move(bob, &a_s, &cfg.beta, &mut bctx);
        if !b_s.contains_interval(&a_s, &tol) || !a_s.contains_interval(&next, &tol) {
            return Err(Error::invariant("nesting", format!("B_{s} = {b_s}, A_{s} = {a_s}, B_{} = {next}", s + 1)));
        }
        stages.push(StageRecord {
            s,
            b_s: b_s.clone(),
            q_range: (lo, hi),
            q_scanned: shell_size(lo, hi, theta.m()),
            dangerous,
            a_s,
            bob_choice: next.clone(),
        });
        b_s = next;
    }
    let depth_reached = stages.len() as u32;
    let witness = b_s.center();
    let witness_parameter = curve.invert_first(&witness)?;
    let witness_point = curve.eval(&witness_parameter);
    let r_game = &cfg.r_game;
    let cover = Float::with_val(bits, r_game.pow(depth_reached as i32 - 1)) * 2u32;
    let certificate_covers_run = depth_reached == 0 || Float::with_val(bits, cfg.certificate_q) >= cover;
    let completed = depth_reached == depth;
    let witness_check = if completed && opts.witness_check {
        Some(check_witness(&witness_point, depth_reached, cfg, theta, k, prec)?)
    } else {
        None
    };
    Ok(GameTranscript {
        config: cfg.clone(),
        bob,
        seed: opts.seed,
        depth_requested: depth,
        depth_reached,
        completed,
        stop_reason,
        stages,
        final_interval: b_s,
        witness,
        witness_parameter,
        witness_point,
        certificate_q: cfg.certificate_q,
        certificate_covers_run,
        witness_check,
    })
}

fn check_witness(point: &[Float], depth: u32, cfg: &GameConfig, theta: &SystemMatrix, k: &Weights, prec: &Precision) -> Result<WitnessCheck> {
    let guaranteed_q = if depth == 0 { 0 } else { cfg.stage_q_range(depth - 1, prec).1 };
    let mut guaranteed_min = prec.float(f64::INFINITY);
    let mut guaranteed_argmin = vec![0; theta.m()];
    for q in shell(0, guaranteed_q, theta.m()) {
        let v = twisted_quality(theta, k, point, &q)?;
        if v < guaranteed_min {
            guaranteed_min = v;
            guaranteed_argmin = q;
        }
    }
    let q_est = cfg.stage_q_range(depth, prec).1.max(1);
    let estimate = lower_estimate(QualityKind::Twisted, theta, k, Some(point), q_est, prec)?;
    Ok(WitnessCheck {
        guaranteed_q,
        guaranteed_min,
        guaranteed_argmin,
        estimate,
    })
}

/// Re-enumerates every stage and checks that `A_s` misses every `Delta`
/// of that stage, and that the witness keeps twisted quality at least
/// `epsilon` wherever the stages guarantee it.
pub fn verify_avoidance(
    transcript: &GameTranscript,
    curve: &CurveSpec,
    theta: &SystemMatrix,
    k: &Weights,
) -> Result<()> {
    let cfg = &transcript.config;
    for st in &transcript.stages {
        let scan = StageScan::new(curve, theta, k, &cfg.epsilon, &st.a_s)?;
        for q in shell(st.q_range.0, st.q_range.1, theta.m()) {
            if let Some(h) = scan.hits_for(&q)?.into_iter().next() {
                return Err(Error::invariant(
                    "k",
                    format!("A_{} = {} meets Delta{:?} = {}", st.s, st.a_s, (h.p, h.q), h.delta),
                ));
            }
        }
    }
    if let Some(w) = &transcript.witness_check {
        if w.guaranteed_q > 0 && w.guaranteed_min < cfg.epsilon {
            return Err(Error::invariant(
                "k",
                format!(
                    "witness quality {} at q = {:?} is below epsilon",
                    fmt_real(&w.guaranteed_min),
                    w.guaranteed_argmin
                ),
            ));
        }
    }
    Ok(())
}
