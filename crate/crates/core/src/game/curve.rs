//! Polynomial curves `x -> (f_1(x), ..., f_n(x))` on a compact interval.

use std::str::FromStr;

use rug::{Assign, Float};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{fmt_real, serialize_float, Precision, RealScalar};

/// Bisection steps for monotone root finding.
pub const MAX_BISECTION_STEPS: u32 = 200;

/// Dense polynomial, coefficients in increasing degree.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<Float>,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<Float>) -> Self {
        while coeffs.len() > 1 && coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        Polynomial { coeffs }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn coeffs(&self) -> &[Float] {
        &self.coeffs
    }

    pub fn eval(&self, x: &Float) -> Float {
        let mut acc = Float::new(x.prec());
        for c in self.coeffs.iter().rev() {
            acc *= x;
            acc += c;
        }
        acc
    }

    pub fn derivative(&self) -> Polynomial {
        if self.coeffs.len() <= 1 {
            return Polynomial::new(vec![Float::new(self.coeffs.first().map_or(64, |c| c.prec()))]);
        }
        Polynomial::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(d, c)| Float::with_val(c.prec(), c * d as u32))
                .collect(),
        )
    }

    pub fn shifted(&self, by: &Float) -> Polynomial {
        let mut c = self.coeffs.clone();
        c[0] -= by;
        Polynomial::new(c)
    }

    /// Real roots in `[a, b]`, ascending. Critical points are found
    /// recursively; between two of them the polynomial is monotone and a
    /// sign change is bisected.
    pub fn roots_in(&self, a: &Float, b: &Float) -> Vec<Float> {
        if self.degree() == 0 || a > b {
            return Vec::new();
        }
        let mut marks = vec![a.clone()];
        marks.extend(self.derivative().roots_in(a, b));
        marks.push(b.clone());
        let mut roots: Vec<Float> = Vec::new();
        let push = |r: Float, roots: &mut Vec<Float>| {
            if roots.last().is_none_or(|l| *l < r) {
                roots.push(r);
            }
        };
        for w in marks.windows(2) {
            let (l, r) = (&w[0], &w[1]);
            let (fl, fr) = (self.eval(l), self.eval(r));
            if fl.is_zero() {
                push(l.clone(), &mut roots);
            }
            if (fl.is_sign_negative() && fr.is_sign_positive() && !fr.is_zero())
                || (fl.is_sign_positive() && !fl.is_zero() && fr.is_sign_negative() && !fr.is_zero())
            {
                push(bisect(|x| self.eval(x), l, r, fl.is_sign_negative()), &mut roots);
            }
        }
        let fb = self.eval(b);
        if fb.is_zero() {
            push(b.clone(), &mut roots);
        }
        roots
    }
}

/// Root of a function that changes sign on `[l, r]`, `rising` when it goes
/// from negative to positive.
fn bisect(f: impl Fn(&Float) -> Float, l: &Float, r: &Float, rising: bool) -> Float {
    let bits = l.prec();
    let (mut lo, mut hi) = (l.clone(), r.clone());
    let mut mid = Float::new(bits);
    for _ in 0..MAX_BISECTION_STEPS {
        mid.assign(&lo + &hi);
        mid /= 2u32;
        if mid <= lo || mid >= hi {
            break;
        }
        let v = f(&mid);
        if v.is_zero() {
            return mid;
        }
        if v.is_sign_negative() == rising {
            lo.assign(&mid);
        } else {
            hi.assign(&mid);
        }
    }
    Float::with_val(bits, &lo + &hi) / 2u32
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveKind {
    Identity,
    Parabola,
    Cubic,
    Polynomial,
}

impl FromStr for CurveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(CurveKind::Identity),
            "parabola" => Ok(CurveKind::Parabola),
            "cubic" => Ok(CurveKind::Cubic),
            "polynomial" => Ok(CurveKind::Polynomial),
            _ => Err(Error::parse(s, "expected identity, parabola, cubic or polynomial")),
        }
    }
}

/// A curve with strictly monotone first coordinate on `[a, b]` and a
/// constant `kappa` with `|f_i(x) - f_i(x')| <= kappa |f_1(x) - f_1(x')|`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurveSpec {
    pub kind: CurveKind,
    #[serde(skip)]
    components: Vec<Polynomial>,
    #[serde(serialize_with = "serialize_float")]
    a: Float,
    #[serde(serialize_with = "serialize_float")]
    b: Float,
    #[serde(serialize_with = "serialize_float")]
    kappa: Float,
    #[serde(skip)]
    increasing: bool,
    coefficients: Vec<Vec<String>>,
}

impl CurveSpec {
    /// Builds a curve and estimates `kappa` unless given.
    pub fn new(
        kind: CurveKind,
        components: Vec<Polynomial>,
        a: Float,
        b: Float,
        kappa: Option<Float>,
        prec: &Precision,
    ) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::CurveSpec("a curve needs at least one component".into()));
        }
        if a >= b {
            return Err(Error::CurveSpec(format!("empty interval [{}, {}]", fmt_real(&a), fmt_real(&b))));
        }
        let f1 = &components[0];
        // strictly monotone iff values at the ends and at every critical
        // point are strictly ordered
        let mut marks = vec![a.clone()];
        marks.extend(f1.derivative().roots_in(&a, &b));
        marks.push(b.clone());
        let values: Vec<Float> = marks.iter().map(|x| f1.eval(x)).collect();
        let increasing = values[values.len() - 1] > values[0];
        let monotone = values.windows(2).all(|w| if increasing { w[1] > w[0] } else { w[1] < w[0] });
        if !monotone {
            return Err(Error::CurveSpec("first coordinate is not strictly monotone on the interval".into()));
        }
        let coefficients = components
            .iter()
            .map(|p| p.coeffs().iter().map(fmt_real).collect())
            .collect();
        let mut curve = CurveSpec {
            kind,
            components,
            a,
            b,
            kappa: prec.float(1),
            increasing,
            coefficients,
        };
        curve.kappa = match kappa {
            Some(k) if k >= 1 => k,
            Some(k) => return Err(Error::CurveSpec(format!("kappa {} is below 1", fmt_real(&k)))),
            None => curve.estimate_kappa(10_000, prec),
        };
        Ok(curve)
    }

    pub fn builtin(kind: CurveKind, interval: Option<(Float, Float)>, kappa: Option<Float>, prec: &Precision) -> Result<Self> {
        let (a, b) = interval.unwrap_or((prec.zero(), prec.float(1)));
        let power = |d: usize| {
            let mut c = vec![prec.zero(); d + 1];
            c[d] = prec.float(1);
            Polynomial::new(c)
        };
        let n = match kind {
            CurveKind::Identity => 1,
            CurveKind::Parabola => 2,
            CurveKind::Cubic => 3,
            CurveKind::Polynomial => {
                return Err(Error::CurveSpec("polynomial curves need coefficients".into()))
            }
        };
        CurveSpec::new(kind, (1..=n).map(power).collect(), a, b, kappa, prec)
    }

    /// `{"kind": "parabola", "interval": [a, b], "kappa": k}` or
    /// `{"kind": "polynomial", "coefficients": [[c0, c1, ...], ...], ...}`.
    /// Numbers may be JSON numbers or real literals.
    pub fn from_json(value: &serde_json::Value, prec: &Precision) -> Result<Self> {
        let scalar = |v: &serde_json::Value| -> Result<Float> {
            let text = match v {
                serde_json::Value::String(s) => s.clone(),
                serde_json::Value::Number(n) => n.to_string(),
                other => return Err(Error::parse(other.to_string(), "expected a number")),
            };
            Ok(RealScalar::parse(&text, prec)?.value().clone())
        };
        let kind: CurveKind = value
            .get("kind")
            .and_then(|k| k.as_str())
            .ok_or_else(|| Error::CurveSpec("missing curve kind".into()))?
            .parse()?;
        let interval = match value.get("interval") {
            Some(serde_json::Value::Array(v)) if v.len() == 2 => Some((scalar(&v[0])?, scalar(&v[1])?)),
            Some(_) => return Err(Error::CurveSpec("interval must be [a, b]".into())),
            None => None,
        };
        let kappa = value.get("kappa").map(scalar).transpose()?;
        if kind != CurveKind::Polynomial {
            return CurveSpec::builtin(kind, interval, kappa, prec);
        }
        let rows = value
            .get("coefficients")
            .and_then(|c| c.as_array())
            .ok_or_else(|| Error::CurveSpec("polynomial curve needs coefficients".into()))?;
        let comps = rows
            .iter()
            .map(|row| {
                row.as_array()
                    .ok_or_else(|| Error::CurveSpec("coefficient rows must be arrays".into()))?
                    .iter()
                    .map(scalar)
                    .collect::<Result<Vec<_>>>()
                    .map(Polynomial::new)
            })
            .collect::<Result<Vec<_>>>()?;
        let (a, b) = interval.unwrap_or((prec.zero(), prec.float(1)));
        CurveSpec::new(kind, comps, a, b, kappa, prec)
    }

    pub fn from_name(name: &str, prec: &Precision) -> Result<Self> {
        CurveSpec::builtin(name.parse()?, None, None, prec)
    }

    pub fn n(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, i: usize) -> &Polynomial {
        &self.components[i]
    }

    pub fn domain(&self) -> (&Float, &Float) {
        (&self.a, &self.b)
    }

    pub fn kappa(&self) -> &Float {
        &self.kappa
    }

    pub fn eval(&self, x: &Float) -> Vec<Float> {
        self.components.iter().map(|p| p.eval(x)).collect()
    }

    /// `f_1(I)` as an ordered pair.
    pub fn image_of_first(&self) -> (Float, Float) {
        let (fa, fb) = (self.components[0].eval(&self.a), self.components[0].eval(&self.b));
        if self.increasing {
            (fa, fb)
        } else {
            (fb, fa)
        }
    }

    /// `f_1^(-1)(y)` by bisection; `y` must lie in `f_1(I)`.
    pub fn invert_first(&self, y: &Float) -> Result<Float> {
        let (lo, hi) = self.image_of_first();
        let tol = Float::with_val(y.prec(), 1e-30);
        if *y < Float::with_val(y.prec(), &lo - &tol) || *y > Float::with_val(y.prec(), &hi + &tol) {
            return Err(Error::CurveSpec(format!("{} is outside f_1(I)", fmt_real(y))));
        }
        if *y <= lo {
            return Ok(if self.increasing { self.a.clone() } else { self.b.clone() });
        }
        if *y >= hi {
            return Ok(if self.increasing { self.b.clone() } else { self.a.clone() });
        }
        let f1 = &self.components[0];
        Ok(bisect(|x| Float::with_val(x.prec(), f1.eval(x) - y), &self.a, &self.b, self.increasing))
    }

    /// `sup |f_i'| / |f_1'|` on a uniform grid, inflated by 10%, at least 1.
    pub fn estimate_kappa(&self, points: u32, prec: &Precision) -> Float {
        let bits = prec.bits();
        let derivs: Vec<Polynomial> = self.components.iter().map(|p| p.derivative()).collect();
        let width = Float::with_val(bits, &self.b - &self.a);
        let mut best = prec.float(1);
        for j in 0..=points {
            let x = Float::with_val(bits, &width * j) / points + &self.a;
            let d1 = Float::with_val(bits, derivs[0].eval(&x).abs_ref());
            if d1.is_zero() {
                continue;
            }
            for d in &derivs[1..] {
                let ratio = Float::with_val(bits, d.eval(&x).abs_ref()) / &d1;
                if ratio > best {
                    best = ratio;
                }
            }
        }
        if best > 1 {
            best * Float::with_val(bits, 1.1)
        } else {
            best
        }
    }

    /// Minimum and maximum of `f_i` over `[l, r]`.
    pub fn range_on(&self, i: usize, l: &Float, r: &Float) -> (Float, Float) {
        let p = &self.components[i];
        let mut lo = p.eval(l);
        let mut hi = lo.clone();
        let mut marks = p.derivative().roots_in(l, r);
        marks.push(r.clone());
        for x in marks {
            let v = p.eval(&x);
            if v < lo {
                lo = v.clone();
            }
            if v > hi {
                hi = v;
            }
        }
        (lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> Precision {
        Precision::default()
    }

    fn poly(c: &[i32]) -> Polynomial {
        Polynomial::new(c.iter().map(|&v| p().float(v)).collect())
    }

    #[test]
    fn roots_of_cubic() {
        // (x - 1)(x - 2)(x - 3)
        let q = poly(&[-6, 11, -6, 1]);
        let r = q.roots_in(&p().float(0), &p().float(4));
        assert_eq!(r.len(), 3);
        for (got, want) in r.iter().zip([1, 2, 3]) {
            assert!(Float::with_val(p().bits(), got - want).abs() < 1e-40);
        }
        assert!(q.roots_in(&p().float(4), &p().float(5)).is_empty());
    }

    #[test]
    fn double_root_is_found() {
        let q = poly(&[1, -2, 1]);
        let r = q.roots_in(&p().float(0), &p().float(3));
        assert_eq!(r.len(), 1);
        assert!(Float::with_val(p().bits(), &r[0] - 1u32).abs() < 1e-40);
    }

    #[test]
    fn parabola_kappa_and_inverse() {
        let prec = p();
        let c = CurveSpec::builtin(CurveKind::Parabola, None, None, &prec).unwrap();
        assert!(Float::with_val(prec.bits(), c.kappa() - 2.2f64).abs() < 1e-10);
        let x = c.invert_first(&Float::with_val(prec.bits(), 0.3)).unwrap();
        assert!(Float::with_val(prec.bits(), &x - 0.3f64).abs() < 1e-40);
    }

    #[test]
    fn decreasing_first_coordinate_inverts() {
        let prec = p();
        let c = CurveSpec::new(CurveKind::Polynomial, vec![poly(&[1, -1]), poly(&[0, 0, 1])], prec.zero(), prec.float(1), None, &prec).unwrap();
        let x = c.invert_first(&Float::with_val(prec.bits(), 0.25)).unwrap();
        assert!(Float::with_val(prec.bits(), &x - 0.75f64).abs() < 1e-40);
    }

    #[test]
    fn non_monotone_first_coordinate_is_rejected() {
        let prec = p();
        let e = CurveSpec::new(CurveKind::Polynomial, vec![poly(&[0, -1, 1])], prec.zero(), prec.float(1), None, &prec);
        assert!(matches!(e, Err(Error::CurveSpec(_))));
    }

    #[test]
    fn polynomial_from_json() {
        let prec = p();
        let v = serde_json::json!({"kind": "polynomial", "coefficients": [[0, 2], [1, 0, "1/2"]], "interval": [0, 1]});
        let c = CurveSpec::from_json(&v, &prec).unwrap();
        assert_eq!(c.n(), 2);
        let y = c.eval(&prec.float(1));
        assert_eq!(y[0], 2);
        assert_eq!(y[1], 1.5);
    }
}
