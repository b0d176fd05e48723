//! Coefficient scalars: exact Gaussian rationals and complex doubles.
//!
//! Everything downstream (jets, forms, endomorphism-valued forms) is generic
//! over [`Scalar`]. The two modes never mix: `Jet<Exact>` and `Jet<Numeric>`
//! are distinct types, so "mixing modes" is a compile error rather than a
//! runtime one.

use std::fmt;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Ring operations needed by the jet/form tower.
///
/// `conj` is complex conjugation; `inv` returns `None` for non-units.
pub trait Scalar: Clone + PartialEq + fmt::Debug + fmt::Display + Send + Sync + 'static {
    /// True for the exact (Gaussian rational) mode.
    const EXACT: bool;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_i64(n: i64) -> Self;
    /// Real rational `p/q`. Panics if `q == 0`.
    fn from_ratio(p: i64, q: i64) -> Self;
    fn imaginary_unit() -> Self;

    fn add(&self, other: &Self) -> Self;
    fn sub(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn neg(&self) -> Self;
    fn conj(&self) -> Self;
    fn inv(&self) -> Option<Self>;

    fn is_zero(&self) -> bool;
    /// (re, im) as doubles, for positivity checks and numeric reporting.
    fn to_complex64(&self) -> Complex64;
    /// |re| + |im| as a double; used only for defect summaries.
    fn magnitude(&self) -> f64 {
        let c = self.to_complex64();
        c.re.abs() + c.im.abs()
    }
    /// Integer power with negative exponents allowed for units.
    fn powi(&self, k: i32) -> Option<Self> {
        let base = if k < 0 { self.inv()? } else { self.clone() };
        let mut acc = Self::one();
        for _ in 0..k.unsigned_abs() {
            acc = acc.mul(&base);
        }
        Some(acc)
    }
}

/// Exact scalar: `re + im·i` with `re, im ∈ ℚ`, always in lowest terms.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Exact {
    pub re: BigRational,
    pub im: BigRational,
}

impl Exact {
    pub fn new(re: BigRational, im: BigRational) -> Self {
        Exact { re, im }
    }

    pub fn from_int(n: i64) -> Self {
        Exact {
            re: BigRational::from_integer(BigInt::from(n)),
            im: BigRational::zero(),
        }
    }

    pub fn ratio(p: i64, q: i64) -> Self {
        assert!(q != 0, "zero denominator");
        Exact {
            re: BigRational::new(BigInt::from(p), BigInt::from(q)),
            im: BigRational::zero(),
        }
    }

    /// |re|² + |im|², the Gaussian-rational norm.
    pub fn norm_sq(&self) -> BigRational {
        &self.re * &self.re + &self.im * &self.im
    }
}

impl fmt::Debug for Exact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

fn fmt_rational(r: &BigRational) -> String {
    if r.denom().is_one() {
        format!("{}", r.numer())
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

impl fmt::Display for Exact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.im.is_zero() {
            write!(f, "{}", fmt_rational(&self.re))
        } else if self.re.is_zero() {
            write!(f, "{}i", fmt_rational(&self.im))
        } else if self.im.is_negative() {
            write!(f, "{}{}i", fmt_rational(&self.re), fmt_rational(&self.im))
        } else {
            write!(f, "{}+{}i", fmt_rational(&self.re), fmt_rational(&self.im))
        }
    }
}

impl Scalar for Exact {
    const EXACT: bool = true;

    fn zero() -> Self {
        Exact::from_int(0)
    }
    fn one() -> Self {
        Exact::from_int(1)
    }
    fn from_i64(n: i64) -> Self {
        Exact::from_int(n)
    }
    fn from_ratio(p: i64, q: i64) -> Self {
        Exact::ratio(p, q)
    }
    fn imaginary_unit() -> Self {
        Exact {
            re: BigRational::zero(),
            im: BigRational::one(),
        }
    }

    fn add(&self, other: &Self) -> Self {
        Exact {
            re: &self.re + &other.re,
            im: &self.im + &other.im,
        }
    }
    fn sub(&self, other: &Self) -> Self {
        Exact {
            re: &self.re - &other.re,
            im: &self.im - &other.im,
        }
    }
    fn mul(&self, other: &Self) -> Self {
        Exact {
            re: &self.re * &other.re - &self.im * &other.im,
            im: &self.re * &other.im + &self.im * &other.re,
        }
    }
    fn neg(&self) -> Self {
        Exact {
            re: -self.re.clone(),
            im: -self.im.clone(),
        }
    }
    fn conj(&self) -> Self {
        Exact {
            re: self.re.clone(),
            im: -self.im.clone(),
        }
    }
    fn inv(&self) -> Option<Self> {
        let n = self.norm_sq();
        if n.is_zero() {
            return None;
        }
        Some(Exact {
            re: &self.re / &n,
            im: -&self.im / &n,
        })
    }
    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }
    fn to_complex64(&self) -> Complex64 {
        Complex64::new(
            self.re.to_f64().unwrap_or(f64::NAN),
            self.im.to_f64().unwrap_or(f64::NAN),
        )
    }
}

/// Numeric scalar: complex double precision.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct Numeric(pub Complex64);

impl Numeric {
    pub fn new(re: f64, im: f64) -> Self {
        Numeric(Complex64::new(re, im))
    }
}

impl fmt::Display for Numeric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.im == 0.0 {
            write!(f, "{}", self.0.re)
        } else {
            write!(f, "{}{:+}i", self.0.re, self.0.im)
        }
    }
}

impl Scalar for Numeric {
    const EXACT: bool = false;

    fn zero() -> Self {
        Numeric::new(0.0, 0.0)
    }
    fn one() -> Self {
        Numeric::new(1.0, 0.0)
    }
    fn from_i64(n: i64) -> Self {
        Numeric::new(n as f64, 0.0)
    }
    fn from_ratio(p: i64, q: i64) -> Self {
        assert!(q != 0, "zero denominator");
        Numeric::new(p as f64 / q as f64, 0.0)
    }
    fn imaginary_unit() -> Self {
        Numeric::new(0.0, 1.0)
    }

    fn add(&self, other: &Self) -> Self {
        Numeric(self.0 + other.0)
    }
    fn sub(&self, other: &Self) -> Self {
        Numeric(self.0 - other.0)
    }
    fn mul(&self, other: &Self) -> Self {
        Numeric(self.0 * other.0)
    }
    fn neg(&self) -> Self {
        Numeric(-self.0)
    }
    fn conj(&self) -> Self {
        Numeric(self.0.conj())
    }
    fn inv(&self) -> Option<Self> {
        if self.0.norm_sqr() == 0.0 {
            None
        } else {
            Some(Numeric(self.0.inv()))
        }
    }
    fn is_zero(&self) -> bool {
        self.0.re == 0.0 && self.0.im == 0.0
    }
    fn to_complex64(&self) -> Complex64 {
        self.0
    }
}

/// Parses `"a/b"`, `"a"`, `"a/b+c/d i"`, `"c/d i"` (whitespace tolerated)
/// into an exact scalar. This is the wire format for scenario files.
pub fn parse_exact(input: &str) -> Result<Exact, String> {
    let s: String = input.chars().filter(|c| !c.is_whitespace()).collect();
    if s.is_empty() {
        return Err("empty scalar".into());
    }
    // Split into real and imaginary summands at a `+`/`-` that is not leading.
    let mut parts: Vec<(bool, String)> = Vec::new();
    let mut cur = String::new();
    let mut neg = false;
    for (i, c) in s.chars().enumerate() {
        if (c == '+' || c == '-') && i > 0 {
            parts.push((neg, std::mem::take(&mut cur)));
            neg = c == '-';
        } else if c == '-' && i == 0 {
            neg = true;
        } else if c == '+' && i == 0 {
        } else {
            cur.push(c);
        }
    }
    parts.push((neg, cur));
    if parts.len() > 2 {
        return Err(format!("malformed scalar `{input}`"));
    }
    let mut re = BigRational::zero();
    let mut im = BigRational::zero();
    for (neg, term) in parts {
        let (is_im, body) = match term.strip_suffix('i') {
            Some(b) => (true, if b.is_empty() { "1" } else { b }),
            None => (false, term.as_str()),
        };
        let r = parse_rational(body)?;
        let r = if neg { -r } else { r };
        if is_im {
            im += r;
        } else {
            re += r;
        }
    }
    Ok(Exact { re, im })
}

fn parse_rational(s: &str) -> Result<BigRational, String> {
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n, d),
        None => (s, "1"),
    };
    let n: BigInt = num.parse().map_err(|_| format!("bad integer `{num}`"))?;
    let d: BigInt = den.parse().map_err(|_| format!("bad integer `{den}`"))?;
    if d.is_zero() {
        return Err("zero denominator".into());
    }
    Ok(BigRational::new(n, d))
}

/// Serialization form of an exact scalar, `"a/b+c/d i"` without spaces.
pub fn format_exact(x: &Exact) -> String {
    if x.im.is_zero() {
        fmt_rational(&x.re)
    } else if x.re.is_zero() {
        format!("{}i", fmt_rational(&x.im))
    } else if x.im.is_negative() {
        format!("{}{}i", fmt_rational(&x.re), fmt_rational(&x.im))
    } else {
        format!("{}+{}i", fmt_rational(&x.re), fmt_rational(&x.im))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_field_ops() {
        let a = Exact::ratio(3, 4);
        let i = Exact::imaginary_unit();
        let x = a.add(&i.mul(&Exact::ratio(-1, 2)));
        let y = x.mul(&x.inv().unwrap());
        assert_eq!(y, Exact::one());
        assert_eq!(x.conj().conj(), x);
    }

    #[test]
    fn parse_roundtrip() {
        for s in ["3/4", "-2", "1/2+1/3i", "-5/7-2i", "i", "-i", "0"] {
            let v = parse_exact(s).unwrap();
            let v2 = parse_exact(&format_exact(&v)).unwrap();
            assert_eq!(v, v2, "roundtrip {s}");
        }
    }

    #[test]
    fn zero_has_no_inverse() {
        assert!(Exact::zero().inv().is_none());
        assert!(Numeric::zero().inv().is_none());
    }

    #[test]
    fn gaussian_conjugation_is_multiplicative() {
        let a = parse_exact("2/3+5i").unwrap();
        let b = parse_exact("-1/7+1/2i").unwrap();
        assert_eq!(a.mul(&b).conj(), a.conj().mul(&b.conj()));
    }
}
