//! Polynomials in the level index and their ratios, used for closed-form
//! tail certificates of series.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::linalg::Rat;

/// Coefficients from the constant term upward, no trailing zeros.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Poly(Vec<BigInt>);

impl Poly {
    pub fn new(mut coeffs: Vec<BigInt>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        Poly(coeffs)
    }

    pub fn zero() -> Self {
        Poly(Vec::new())
    }

    pub fn constant(c: impl Into<BigInt>) -> Self {
        Poly::new(vec![c.into()])
    }

    pub fn n() -> Self {
        Poly::new(vec![BigInt::zero(), BigInt::one()])
    }

    /// The polynomial `n + c`.
    pub fn n_plus(c: i64) -> Self {
        Poly::new(vec![BigInt::from(c), BigInt::one()])
    }

    pub fn coeffs(&self) -> &[BigInt] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> Option<usize> {
        self.0.len().checked_sub(1)
    }

    pub fn leading(&self) -> BigInt {
        self.0.last().cloned().unwrap_or_default()
    }

    pub fn eval(&self, n: u64) -> BigInt {
        let x = BigInt::from(n);
        self.0
            .iter()
            .rev()
            .fold(BigInt::zero(), |acc, c| acc * &x + c)
    }

    pub fn pow(&self, k: u32) -> Poly {
        (0..k).fold(Poly::constant(1), |acc, _| &acc * self)
    }

    /// Sign of the polynomial for all sufficiently large n.
    pub fn eventual_sign(&self) -> Ordering {
        self.leading().cmp(&BigInt::zero())
    }

    /// An integer `n0 >= 1` past which the polynomial has no roots
    /// (Cauchy's bound), so its sign is the eventual sign for `n >= n0`.
    pub fn root_free_from(&self) -> u64 {
        let Some(d) = self.degree() else { return 1 };
        if d == 0 {
            return 1;
        }
        let lead = self.leading().abs();
        let mut best = Rat::zero();
        for c in &self.0[..d] {
            let r = Rat::new(c.abs(), lead.clone());
            if r > best {
                best = r;
            }
        }
        let bound = Rat::one() + best;
        let ceil = bound.ceil().to_integer();
        ceil.to_u64().unwrap_or(u64::MAX).max(1) + 1
    }
}

impl Add for Poly {
    type Output = Poly;
    fn add(self, o: Poly) -> Poly {
        let len = self.0.len().max(o.0.len());
        let c = (0..len)
            .map(|i| {
                self.0.get(i).cloned().unwrap_or_default() + o.0.get(i).cloned().unwrap_or_default()
            })
            .collect();
        Poly::new(c)
    }
}

impl Neg for Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        Poly(self.0.into_iter().map(|c| -c).collect())
    }
}

impl Sub for Poly {
    type Output = Poly;
    fn sub(self, o: Poly) -> Poly {
        self + (-o)
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, o: &Poly) -> Poly {
        if self.is_zero() || o.is_zero() {
            return Poly::zero();
        }
        let mut c = vec![BigInt::zero(); self.0.len() + o.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in o.0.iter().enumerate() {
                c[i + j] += a * b;
            }
        }
        Poly::new(c)
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (i, c) in self.0.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            let neg = c.is_negative();
            let a = c.abs();
            if first {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, "{}", if neg { " - " } else { " + " })?;
            }
            first = false;
            match (i, a.is_one()) {
                (0, _) => write!(f, "{a}")?,
                (1, true) => write!(f, "n")?,
                (1, false) => write!(f, "{a}n")?,
                (_, true) => write!(f, "n^{i}")?,
                (_, false) => write!(f, "{a}n^{i}")?,
            }
        }
        Ok(())
    }
}

/// A ratio of polynomials in n, with a denominator eventually positive.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RatFn {
    pub num: Poly,
    pub den: Poly,
}

impl RatFn {
    pub fn new(num: Poly, den: Poly) -> Self {
        assert!(!den.is_zero(), "zero denominator");
        let (num, den) = if den.eventual_sign() == Ordering::Less {
            (-num, -den)
        } else {
            (num, den)
        };
        RatFn { num, den }.reduced()
    }

    pub fn constant(c: Rat) -> Self {
        RatFn::new(
            Poly::constant(c.numer().clone()),
            Poly::constant(c.denom().clone()),
        )
    }

    pub fn zero() -> Self {
        RatFn::new(Poly::zero(), Poly::constant(1))
    }

    pub fn one() -> Self {
        RatFn::new(Poly::constant(1), Poly::constant(1))
    }

    fn reduced(self) -> Self {
        if self.num.is_zero() {
            return RatFn {
                num: Poly::zero(),
                den: Poly::constant(1),
            };
        }
        let g = self
            .num
            .coeffs()
            .iter()
            .chain(self.den.coeffs())
            .fold(BigInt::zero(), |acc, c| acc.gcd(c));
        if g.is_zero() || g.is_one() {
            return self;
        }
        let div = |p: &Poly| Poly::new(p.coeffs().iter().map(|c| c / &g).collect());
        RatFn {
            num: div(&self.num),
            den: div(&self.den),
        }
    }

    pub fn eval(&self, n: u64) -> Option<Rat> {
        let d = self.den.eval(n);
        if d.is_zero() {
            return None;
        }
        Some(Rat::new(self.num.eval(n), d))
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    /// Order of decay: `deg den - deg num` (None for the zero function).
    pub fn decay(&self) -> Option<i64> {
        let dn = self.num.degree()? as i64;
        let dd = self.den.degree().unwrap_or(0) as i64;
        Some(dd - dn)
    }

    /// Compares `self` and `other` for all sufficiently large n.
    pub fn eventual_cmp(&self, other: &RatFn) -> Ordering {
        let diff = &self.num * &other.den - &other.num * &self.den;
        diff.eventual_sign()
    }

    pub fn eventual_max(items: &[RatFn]) -> Option<RatFn> {
        items
            .iter()
            .cloned()
            .reduce(|a, b| if b.eventual_cmp(&a) == Ordering::Greater { b } else { a })
    }

    pub fn eventual_min(items: &[RatFn]) -> Option<RatFn> {
        items
            .iter()
            .cloned()
            .reduce(|a, b| if b.eventual_cmp(&a) == Ordering::Less { b } else { a })
    }

    /// Bound `self(n) <= K / n^g` (upper) or `self(n) >= K / n^g` (lower)
    /// for every `n >= from`, where g is the decay order.
    pub fn comparison(&self, upper: bool) -> Option<Comparison> {
        let g = self.decay()?;
        let lp = self.num.leading();
        let lq = self.den.leading();
        if !lp.is_positive() || !lq.is_positive() {
            return None;
        }
        let ratio = Rat::new(lp, lq);
        let k = if upper {
            ratio * Rat::from_integer(BigInt::from(2))
        } else {
            ratio / Rat::from_integer(BigInt::from(2))
        };
        // upper: K q(n) - n^g p(n) >= 0 ; lower: n^g p(n) - K q(n) >= 0,
        // written with g possibly negative by moving n^|g| to the other side.
        let kn = Poly::constant(k.numer().clone());
        let kd = Poly::constant(k.denom().clone());
        let ng = Poly::n().pow(g.unsigned_abs() as u32);
        let (lhs, rhs) = if g >= 0 {
            (&kn * &self.den, &(&ng * &self.num) * &kd)
        } else {
            (&(&kn * &self.den) * &ng, &self.num * &kd)
        };
        let r = if upper { lhs - rhs } else { rhs - lhs };
        if r.eventual_sign() != Ordering::Greater {
            return None;
        }
        let from = r.root_free_from().max(self.den.root_free_from());
        Some(Comparison {
            upper,
            constant: k,
            exponent: g,
            from,
        })
    }
}

impl fmt::Display for RatFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == Poly::constant(1) {
            write!(f, "{}", self.num)
        } else {
            write!(f, "({})/({})", self.num, self.den)
        }
    }
}

impl Add for RatFn {
    type Output = RatFn;
    fn add(self, o: RatFn) -> RatFn {
        if self.den == o.den {
            return RatFn::new(self.num + o.num, self.den);
        }
        RatFn::new(&self.num * &o.den + &o.num * &self.den, &self.den * &o.den)
    }
}

impl Sub for RatFn {
    type Output = RatFn;
    fn sub(self, o: RatFn) -> RatFn {
        self + RatFn {
            num: -o.num,
            den: o.den,
        }
    }
}

/// `t(n) <= K n^{-g}` or `t(n) >= K n^{-g}` for all `n >= from`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Comparison {
    pub upper: bool,
    pub constant: Rat,
    pub exponent: i64,
    pub from: u64,
}

impl Comparison {
    pub fn proves_convergence(&self) -> bool {
        self.upper && self.exponent >= 2
    }

    pub fn proves_divergence(&self) -> bool {
        !self.upper && self.exponent <= 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::rat;

    fn p(c: &[i64]) -> Poly {
        Poly::new(c.iter().map(|&x| BigInt::from(x)).collect())
    }

    #[test]
    fn arithmetic_and_eval() {
        let a = p(&[2, 0, 0, 1]);
        assert_eq!(a.eval(3), BigInt::from(29));
        assert_eq!((a.clone() - a.clone()), Poly::zero());
        assert_eq!(format!("{a}"), "n^3 + 2");
    }

    #[test]
    fn comparison_bounds_hold_past_threshold() {
        // n / (n^3 + n + 2)
        let t = RatFn::new(p(&[0, 1]), p(&[2, 1, 0, 1]));
        let c = t.comparison(true).unwrap();
        assert!(c.proves_convergence());
        for n in c.from..c.from + 200 {
            let v = t.eval(n).unwrap();
            let bound = &c.constant / Rat::from_integer(BigInt::from(n).pow(2));
            assert!(v <= bound);
        }
        // 1/(n+1) lower bound
        let h = RatFn::new(p(&[1]), p(&[1, 1]));
        let c = h.comparison(false).unwrap();
        assert!(c.proves_divergence());
        for n in c.from..c.from + 200 {
            let bound = &c.constant / Rat::from_integer(BigInt::from(n));
            assert!(h.eval(n).unwrap() >= bound);
        }
    }

    #[test]
    fn eventual_order() {
        let a = RatFn::new(p(&[0, 1]), p(&[1, 1]));
        let b = RatFn::constant(rat(1, 2));
        assert_eq!(a.eventual_cmp(&b), Ordering::Greater);
        assert_eq!(RatFn::eventual_min(&[a.clone(), b.clone()]).unwrap(), b);
        let one_minus = RatFn::one() - a;
        assert_eq!(one_minus, RatFn::new(p(&[1]), p(&[1, 1])));
    }
}
