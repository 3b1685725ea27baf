//! Exhaustive enumeration of integer points `(u, v)` with `|u_i| <= B_i` and
//! `max_j |Theta*_j(u) - v_j| <= delta`.
//!
//! Column fractions are held as 64-bit fixed point, so `Theta*_j(u) mod 1`
//! becomes a wrapping dot product. The fixed-point value is within
//! `sum |u_i| + 2` units of the true one, which gives a window that provably
//! contains every solution. One coordinate is not iterated: the next value
//! landing in the window is found with a Euclid-style jump. Every hit is
//! then confirmed in full precision.

use rayon::prelude::*;
use rug::{Assign, Float, Integer};

use super::LatticePoint;
use crate::error::{Error, Result};
use crate::quality::SystemMatrix;

const MODULUS: u128 = 1 << 64;

/// Smallest `x >= 0` with `lo <= (a * x) mod m <= hi`, for `0 <= lo <= hi < m`.
pub(crate) fn min_multiple_in_range(a: u128, m: u128, lo: u128, hi: u128) -> Option<u128> {
    debug_assert!(lo <= hi && hi < m);
    if lo == 0 {
        return Some(0);
    }
    let a = a % m;
    if a == 0 {
        return None;
    }
    let x = lo.div_ceil(a);
    if a * x <= hi {
        return Some(x);
    }
    // no multiple of a in [lo, hi]; find the first wrap count y that
    // puts one in [lo + m y, hi + m y]
    let y = min_multiple_in_range(m % a, a, a - hi % a, a - lo % a)?;
    Some((lo + m * y).div_ceil(a))
}

/// Smallest `x >= 0` with `(s + a x) mod 2^64` inside the circular window
/// `[-w, w]`, for `w < 2^63`.
fn next_in_window(a: u128, s: u128, w: u128) -> Option<u128> {
    let lo = (MODULUS + MODULUS - w - s) % MODULUS;
    let hi = lo + 2 * w;
    if hi < MODULUS {
        min_multiple_in_range(a, MODULUS, lo, hi)
    } else {
        let first = min_multiple_in_range(a, MODULUS, lo, MODULUS - 1);
        let second = min_multiple_in_range(a, MODULUS, 0, hi - MODULUS);
        match (first, second) {
            (Some(x), Some(y)) => Some(x.min(y)),
            (x, y) => x.or(y),
        }
    }
}

/// `floor(frac(x) * 2^64)`.
fn fixed_fraction(x: &Float) -> u64 {
    let bits = x.prec();
    let mut f = Float::with_val(bits, x.floor_ref());
    f = Float::with_val(bits, x - &f);
    f <<= 64;
    f.floor_mut();
    let i: Integer = f.to_integer().expect("finite");
    i.to_u64().unwrap_or(u64::MAX)
}

/// Prepared search over one box.
pub(crate) struct BoxSearch<'a> {
    theta: &'a SystemMatrix,
    bounds: Vec<i64>,
    delta_tol: Float,
    /// `fixed[j][i]` for column `j`, row `i`.
    fixed: Vec<Vec<u64>>,
    window: Option<u128>,
    jump: usize,
}

impl<'a> BoxSearch<'a> {
    /// `delta_tol` is the slab half-width with the comparison tolerance
    /// already added.
    pub(crate) fn new(theta: &'a SystemMatrix, bounds: Vec<i64>, delta_tol: Float) -> Self {
        let fixed = (0..theta.m())
            .map(|j| (0..theta.n()).map(|i| fixed_fraction(theta.entry(i, j))).collect())
            .collect();
        let margin: u128 = bounds.iter().map(|&b| b as u128).sum::<u128>() + 2;
        let mut scaled = Float::with_val(delta_tol.prec(), &delta_tol << 64);
        scaled.ceil_mut();
        let window = scaled
            .to_integer()
            .and_then(|i| i.to_u128())
            .map(|d| d + margin)
            .filter(|&w| w < MODULUS / 2);
        let jump = (0..bounds.len())
            .max_by_key(|&i| (bounds[i], std::cmp::Reverse(i)))
            .unwrap_or(0);
        BoxSearch {
            theta,
            bounds,
            delta_tol,
            fixed,
            window,
            jump,
        }
    }

    fn range(&self, i: usize) -> u128 {
        2 * self.bounds[i] as u128 + 1
    }

    /// Work estimate in candidate checks.
    pub(crate) fn work(&self) -> u128 {
        let all: u128 = (0..self.bounds.len())
            .map(|i| self.range(i))
            .fold(1u128, |acc, r| acc.saturating_mul(r));
        match self.window {
            None => all.saturating_mul(self.v_choices()),
            Some(w) => {
                let outer = all / self.range(self.jump);
                // expected window hits per outer point, plus the jump cost
                let hits = (self.range(self.jump) * (2 * w + 1)) / MODULUS + 1;
                outer.saturating_mul(hits + 4)
            }
        }
    }

    fn v_choices(&self) -> u128 {
        let width = Float::with_val(self.delta_tol.prec(), &self.delta_tol * 2u32);
        let per = width.to_f64().floor() as u128 + 1;
        per.saturating_pow(self.theta.m() as u32)
    }

    pub(crate) fn run(&self) -> Vec<LatticePoint> {
        let n = self.bounds.len();
        let outer: Vec<usize> = match self.window {
            Some(_) => (0..n).filter(|&i| i != self.jump).collect(),
            None => (0..n).collect(),
        };
        let mut points: Vec<LatticePoint> = if outer.is_empty() {
            let mut u = vec![0i64; n];
            let mut out = Vec::new();
            self.visit(&mut u, &mut out);
            out
        } else {
            let first = outer[0];
            let b = self.bounds[first];
            (-b..=b)
                .into_par_iter()
                .map(|head| {
                    let mut u = vec![0i64; n];
                    for &i in &outer {
                        u[i] = -self.bounds[i];
                    }
                    u[first] = head;
                    let mut out = Vec::new();
                    loop {
                        self.visit(&mut u, &mut out);
                        if !advance_coords(&mut u, &outer[1..], &self.bounds) {
                            break;
                        }
                    }
                    out
                })
                .flatten()
                .collect()
        };
        points.sort();
        points
    }

    /// Handles one assignment of the outer coordinates.
    fn visit(&self, u: &mut [i64], out: &mut Vec<LatticePoint>) {
        let mut scratch = Scratch::new(self.theta.bits());
        match self.window {
            None => self.confirm(u, out, &mut scratch),
            Some(w) => {
                let c = self.jump;
                let bc = self.bounds[c];
                let a = self.fixed[0][c] as u128;
                let mut base: u64 = 0;
                for (i, &ui) in u.iter().enumerate() {
                    if i != c {
                        base = base.wrapping_add(self.fixed[0][i].wrapping_mul(ui as u64));
                    }
                }
                let s = base.wrapping_sub(self.fixed[0][c].wrapping_mul(bc as u64)) as u128;
                let top = 2 * bc as u128;
                let mut x0: u128 = 0;
                while x0 <= top {
                    let shift = (s + a * (x0 % MODULUS)) % MODULUS;
                    let Some(y) = next_in_window(a, shift, w) else { break };
                    let x = x0 + y;
                    if x > top {
                        break;
                    }
                    u[c] = x as i64 - bc;
                    if self.other_columns_pass(u, w) {
                        self.confirm(u, out, &mut scratch);
                    }
                    x0 = x + 1;
                }
            }
        }
    }

    fn other_columns_pass(&self, u: &[i64], w: u128) -> bool {
        self.fixed.iter().skip(1).all(|col| {
            let mut acc: u64 = 0;
            for (f, &ui) in col.iter().zip(u) {
                acc = acc.wrapping_add(f.wrapping_mul(ui as u64));
            }
            let acc = acc as u128;
            acc <= w || MODULUS - acc <= w
        })
    }

    /// Full-precision test of `u`; pushes every admissible `v`.
    fn confirm(&self, u: &[i64], out: &mut Vec<LatticePoint>, sc: &mut Scratch) {
        let m = self.theta.m();
        let mut ranges = Vec::with_capacity(m);
        for j in 0..m {
            sc.acc.assign(0);
            for (i, &ui) in u.iter().enumerate() {
                if ui != 0 {
                    sc.tmp.assign(self.theta.entry(i, j) * ui);
                    sc.acc += &sc.tmp;
                }
            }
            sc.tmp.assign(&sc.acc - &self.delta_tol);
            sc.tmp.ceil_mut();
            let lo = sc.tmp.to_integer().and_then(|i| i.to_i64());
            sc.tmp.assign(&sc.acc + &self.delta_tol);
            sc.tmp.floor_mut();
            let hi = sc.tmp.to_integer().and_then(|i| i.to_i64());
            match (lo, hi) {
                (Some(lo), Some(hi)) if lo <= hi => ranges.push((lo, hi)),
                _ => return,
            }
        }
        let mut v: Vec<i64> = ranges.iter().map(|r| r.0).collect();
        loop {
            if u.iter().any(|&x| x != 0) || v.iter().any(|&x| x != 0) {
                out.push(LatticePoint {
                    u: u.to_vec(),
                    v: v.clone(),
                });
            }
            let mut j = m;
            loop {
                if j == 0 {
                    return;
                }
                j -= 1;
                if v[j] < ranges[j].1 {
                    v[j] += 1;
                    break;
                }
                v[j] = ranges[j].0;
            }
        }
    }
}

struct Scratch {
    acc: Float,
    tmp: Float,
}

impl Scratch {
    fn new(bits: u32) -> Self {
        Scratch {
            acc: Float::new(bits),
            tmp: Float::new(bits),
        }
    }
}

/// Lexicographic successor over the listed coordinates.
fn advance_coords(u: &mut [i64], coords: &[usize], bounds: &[i64]) -> bool {
    for &i in coords.iter().rev() {
        if u[i] < bounds[i] {
            u[i] += 1;
            return true;
        }
        u[i] = -bounds[i];
    }
    false
}

/// Runs the search after checking the work estimate against `budget`.
pub(crate) fn search_box(
    theta: &SystemMatrix,
    bounds: Vec<i64>,
    delta_tol: Float,
    budget: u128,
    context: &str,
) -> Result<Vec<LatticePoint>> {
    let search = BoxSearch::new(theta, bounds, delta_tol);
    let work = search.work();
    if work > budget {
        return Err(Error::BudgetExceeded {
            context: context.to_string(),
            needed: work,
            budget,
        });
    }
    Ok(search.run())
}
