//! Truncated jets: polynomials in chart variables `z_1..z_n`, `z̄_1..z̄_n`
//! and named family parameters, truncated at a total chart-degree cap.
//!
//! Jets stand in for germs of smooth functions at a basepoint. The chart
//! cap makes every positive Hermitian matrix invertible (its non-constant
//! part is nilpotent), which is what lets the downstream identities be
//! checked exactly rather than numerically.
//!
//! Parameters are exact polynomial directions: no truncation unless a
//! `cap` is set, and optionally Laurent (bounded negative powers) for the
//! rescaling flow. `valid_order` tracks precision loss under chart
//! derivatives: differentiating an order-`D` jet leaves an order-`D−1` jet.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{CalcError, Result};
use crate::scalar::Scalar;

/// One family parameter: Laurent floor ≤ 0 (0 = ordinary polynomial) and an
/// optional truncation cap used by the family samplers.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub laurent_floor: i32,
    pub cap: Option<u32>,
}

impl ParamSpec {
    pub fn polynomial(name: &str) -> Self {
        ParamSpec {
            name: name.to_string(),
            laurent_floor: 0,
            cap: None,
        }
    }

    pub fn laurent(name: &str, floor: i32) -> Self {
        assert!(floor <= 0, "laurent_floor must be ≤ 0");
        ParamSpec {
            name: name.to_string(),
            laurent_floor: floor,
            cap: None,
        }
    }

    pub fn nilpotent(name: &str, cap: u32) -> Self {
        ParamSpec {
            name: name.to_string(),
            laurent_floor: 0,
            cap: Some(cap),
        }
    }
}

/// Ring descriptor: `n` holomorphic chart variables (each with a conjugate),
/// the parameter list, and the chart-degree cap.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct JetRing {
    pub n: usize,
    pub order: u32,
    pub params: Vec<ParamSpec>,
}

impl JetRing {
    pub fn new(n: usize, order: u32) -> Arc<Self> {
        Arc::new(JetRing {
            n,
            order,
            params: Vec::new(),
        })
    }

    pub fn with_params(n: usize, order: u32, params: Vec<ParamSpec>) -> Arc<Self> {
        assert!(n <= 16 && params.len() <= 16, "at most 16 generators each");
        Arc::new(JetRing { n, order, params })
    }

    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }
}

/// Exponent vector. Chart exponents are non-negative; parameter exponents
/// may dip to the declared Laurent floor.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub struct Mono {
    pub z: Vec<u8>,
    pub zb: Vec<u8>,
    pub par: Vec<i16>,
}

impl Mono {
    pub fn unit(ring: &JetRing) -> Self {
        Mono {
            z: vec![0; ring.n],
            zb: vec![0; ring.n],
            par: vec![0; ring.params.len()],
        }
    }

    pub fn chart_degree(&self) -> u32 {
        self.z.iter().map(|&e| e as u32).sum::<u32>() + self.zb.iter().map(|&e| e as u32).sum::<u32>()
    }

    pub fn is_unit(&self) -> bool {
        self.z.iter().all(|&e| e == 0)
            && self.zb.iter().all(|&e| e == 0)
            && self.par.iter().all(|&e| e == 0)
    }

    fn conj(&self) -> Self {
        Mono {
            z: self.zb.clone(),
            zb: self.z.clone(),
            par: self.par.clone(),
        }
    }
}

/// A variable of the ring, for derivatives.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Var {
    /// `z_i`
    Z(usize),
    /// `z̄_i`
    Zb(usize),
    /// parameter by index
    Param(usize),
}

/// Sparse truncated polynomial over `S`, canonically represented: no zero
/// coefficients, monomials within the cap, sorted term map.
#[derive(Clone, Debug)]
pub struct Jet<S: Scalar> {
    pub ring: Arc<JetRing>,
    pub valid_order: u32,
    terms: BTreeMap<Mono, S>,
}

// Equality is on the canonical term map; `valid_order` is precision
// metadata, not data. Identity checks guard against vacuously-true
// comparisons by inspecting `valid_order` separately.
impl<S: Scalar> PartialEq for Jet<S> {
    fn eq(&self, other: &Self) -> bool {
        *self.ring == *other.ring && self.terms == other.terms
    }
}

impl<S: Scalar> Jet<S> {
    pub fn zero(ring: &Arc<JetRing>) -> Self {
        Jet {
            ring: ring.clone(),
            valid_order: ring.order,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(ring: &Arc<JetRing>, c: S) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(Mono::unit(ring), c);
        }
        Jet {
            ring: ring.clone(),
            valid_order: ring.order,
            terms,
        }
    }

    pub fn one(ring: &Arc<JetRing>) -> Self {
        Self::constant(ring, S::one())
    }

    pub fn from_i64(ring: &Arc<JetRing>, n: i64) -> Self {
        Self::constant(ring, S::from_i64(n))
    }

    /// The jet of a single variable (exponent 1).
    pub fn var(ring: &Arc<JetRing>, v: Var) -> Self {
        let mut m = Mono::unit(ring);
        match v {
            Var::Z(i) => m.z[i] = 1,
            Var::Zb(i) => m.zb[i] = 1,
            Var::Param(j) => m.par[j] = 1,
        }
        Self::monomial(ring, m, S::one())
    }

    pub fn monomial(ring: &Arc<JetRing>, m: Mono, c: S) -> Self {
        let mut j = Self::zero(ring);
        j.insert(m, c);
        j
    }

    fn insert(&mut self, m: Mono, c: S) {
        if c.is_zero() {
            return;
        }
        if m.chart_degree() > self.valid_order {
            return;
        }
        for (j, &e) in m.par.iter().enumerate() {
            let spec = &self.ring.params[j];
            assert!(
                e as i32 >= spec.laurent_floor,
                "Laurent underflow: parameter `{}` exponent {} below floor {}",
                spec.name,
                e,
                spec.laurent_floor
            );
            if let Some(cap) = spec.cap {
                if e as i64 > cap as i64 {
                    return;
                }
            }
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let s = o.get().add(&c);
                if s.is_zero() {
                    o.remove();
                } else {
                    o.insert(s);
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Mono, &S)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, m: &Mono) -> S {
        self.terms.get(m).cloned().unwrap_or_else(S::zero)
    }

    /// Coefficient of the unit monomial.
    pub fn constant_term(&self) -> S {
        self.coeff(&Mono::unit(&self.ring))
    }

    /// Largest coefficient magnitude, for defect summaries.
    pub fn max_magnitude(&self) -> f64 {
        self.terms
            .values()
            .map(|c| c.magnitude())
            .fold(0.0, f64::max)
    }

    pub fn same_ring(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.ring, &other.ring) || *self.ring == *other.ring
    }

    fn assert_ring(&self, other: &Self) {
        assert!(
            self.same_ring(other),
            "jet ring mismatch: {:?} vs {:?}",
            self.ring,
            other.ring
        );
    }

    /// Drops terms above `order`; `valid_order` becomes `min(self, order)`.
    pub fn truncated(&self, order: u32) -> Self {
        let vo = self.valid_order.min(order);
        let mut out = Jet {
            ring: self.ring.clone(),
            valid_order: vo,
            terms: BTreeMap::new(),
        };
        for (m, c) in &self.terms {
            if m.chart_degree() <= vo {
                out.terms.insert(m.clone(), c.clone());
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        self.assert_ring(other);
        let vo = self.valid_order.min(other.valid_order);
        let mut out = Jet {
            ring: self.ring.clone(),
            valid_order: vo,
            terms: BTreeMap::new(),
        };
        for (m, c) in self.terms.iter().chain(other.terms.iter()) {
            if m.chart_degree() <= vo {
                out.insert(m.clone(), c.clone());
            }
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c = c.neg();
        }
        out
    }

    pub fn scale(&self, c: &S) -> Self {
        let mut out = Jet {
            ring: self.ring.clone(),
            valid_order: self.valid_order,
            terms: BTreeMap::new(),
        };
        for (m, a) in &self.terms {
            out.insert(m.clone(), a.mul(c));
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.assert_ring(other);
        let vo = self.valid_order.min(other.valid_order);
        let mut out = Jet {
            ring: self.ring.clone(),
            valid_order: vo,
            terms: BTreeMap::new(),
        };
        for (ma, ca) in &self.terms {
            if ma.chart_degree() > vo {
                continue;
            }
            for (mb, cb) in &other.terms {
                if ma.chart_degree() + mb.chart_degree() > vo {
                    continue;
                }
                let mut m = ma.clone();
                for i in 0..m.z.len() {
                    m.z[i] += mb.z[i];
                    m.zb[i] += mb.zb[i];
                }
                for j in 0..m.par.len() {
                    m.par[j] += mb.par[j];
                }
                out.insert(m, ca.mul(cb));
            }
        }
        out
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut acc = Self::one(&self.ring).truncated(self.valid_order);
        for _ in 0..k {
            acc = acc.mul(self);
        }
        acc
    }

    /// Conjugation: coefficients conjugated, `z_i ↔ z̄_i`; parameters are
    /// real directions and pass through.
    pub fn conj(&self) -> Self {
        let mut out = Jet {
            ring: self.ring.clone(),
            valid_order: self.valid_order,
            terms: BTreeMap::new(),
        };
        for (m, c) in &self.terms {
            out.insert(m.conj(), c.conj());
        }
        out
    }

    /// True when every non-unit monomial is nilpotent in this ring
    /// (involves a chart variable or a capped parameter).
    fn non_constant_part_nilpotent(&self) -> bool {
        self.terms.iter().all(|(m, _)| {
            if m.is_unit() {
                return true;
            }
            if m.chart_degree() > 0 {
                return true;
            }
            m.par
                .iter()
                .enumerate()
                .any(|(j, &e)| e != 0 && self.ring.params[j].cap.is_some())
        })
    }

    /// Multiplicative inverse by geometric series on the nilpotent part.
    ///
    /// Requires an invertible unit coefficient and a nilpotent remainder;
    /// pure (uncapped) parameter dependence at chart degree 0 is rejected
    /// because `(1+t)⁻¹` is not a polynomial in `t`.
    pub fn invert(&self) -> Result<Self> {
        let c0 = self.constant_term();
        let c0_inv = c0.inv().ok_or_else(|| {
            CalcError::NotInvertible("constant term of jet is not a unit".into())
        })?;
        if !self.non_constant_part_nilpotent() {
            return Err(CalcError::NotInvertible(
                "jet has non-nilpotent pure-parameter terms; sample the parameter instead".into(),
            ));
        }
        // x = 1 − a/c0 is nilpotent; a⁻¹ = c0⁻¹ (1 + x + x² + …).
        let one = Self::one(&self.ring).truncated(self.valid_order);
        let x = one.sub(&self.scale(&c0_inv));
        let mut acc = one.clone();
        let mut p = x.clone();
        let mut guard = 0u32;
        while !p.is_zero() {
            acc = acc.add(&p);
            p = p.mul(&x);
            guard += 1;
            let cap_budget: u32 = self
                .ring
                .params
                .iter()
                .map(|ps| ps.cap.unwrap_or(0))
                .sum();
            assert!(
                guard <= self.ring.order + cap_budget + 4,
                "geometric series failed to terminate; non-nilpotent remainder"
            );
        }
        Ok(acc.scale(&c0_inv))
    }

    /// Formal partial derivative. Chart derivatives consume one order of
    /// validity; parameter derivatives are exact (Laurent powers follow
    /// `d/dt t^k = k t^{k−1}` and must stay above the floor).
    pub fn derivative(&self, v: Var) -> Result<Self> {
        match v {
            Var::Z(_) | Var::Zb(_) => {
                if self.valid_order == 0 {
                    return Err(CalcError::OrderExhausted(
                        "chart derivative of an order-0 jet".into(),
                    ));
                }
            }
            Var::Param(_) => {}
        }
        let vo = match v {
            Var::Z(_) | Var::Zb(_) => self.valid_order - 1,
            Var::Param(_) => self.valid_order,
        };
        let mut out = Jet {
            ring: self.ring.clone(),
            valid_order: vo,
            terms: BTreeMap::new(),
        };
        for (m, c) in &self.terms {
            match v {
                Var::Z(i) => {
                    let e = m.z[i];
                    if e == 0 {
                        continue;
                    }
                    let mut m2 = m.clone();
                    m2.z[i] = e - 1;
                    out.insert(m2, c.mul(&S::from_i64(e as i64)));
                }
                Var::Zb(i) => {
                    let e = m.zb[i];
                    if e == 0 {
                        continue;
                    }
                    let mut m2 = m.clone();
                    m2.zb[i] = e - 1;
                    out.insert(m2, c.mul(&S::from_i64(e as i64)));
                }
                Var::Param(j) => {
                    let e = m.par[j];
                    if e == 0 {
                        continue;
                    }
                    let floor = self.ring.params[j].laurent_floor;
                    if ((e - 1) as i32) < floor {
                        return Err(CalcError::Precondition(format!(
                            "derivative pushes `{}` below its Laurent floor {}",
                            self.ring.params[j].name, floor
                        )));
                    }
                    let mut m2 = m.clone();
                    m2.par[j] = e - 1;
                    out.insert(m2, c.mul(&S::from_i64(e as i64)));
                }
            }
        }
        Ok(out)
    }

    /// Exact definite integral in a parameter; the result no longer depends
    /// on it. Errors on Laurent dependence.
    pub fn integrate_param(&self, j: usize, lo: &S, hi: &S) -> Result<Self> {
        let mut out = Jet {
            ring: self.ring.clone(),
            valid_order: self.valid_order,
            terms: BTreeMap::new(),
        };
        for (m, c) in &self.terms {
            let e = m.par[j];
            if e < 0 {
                return Err(CalcError::LaurentIntegration(
                    self.ring.params[j].name.clone(),
                ));
            }
            let k1 = e as i64 + 1;
            let hi_p = hi.powi(k1 as i32).expect("bound power");
            let lo_p = lo.powi(k1 as i32).expect("bound power");
            let w = hi_p.sub(&lo_p).mul(&S::from_ratio(1, k1));
            let mut m2 = m.clone();
            m2.par[j] = 0;
            out.insert(m2, c.mul(&w));
        }
        Ok(out)
    }

    /// Indefinite integral in a parameter (exponent `k ↦ k+1` with the
    /// `1/(k+1)` factor); Laurent dependence is rejected.
    pub fn antiderivative_param(&self, j: usize) -> Result<Self> {
        let mut out = Jet {
            ring: self.ring.clone(),
            valid_order: self.valid_order,
            terms: BTreeMap::new(),
        };
        for (m, c) in &self.terms {
            let e = m.par[j];
            if e < 0 {
                return Err(CalcError::LaurentIntegration(
                    self.ring.params[j].name.clone(),
                ));
            }
            let mut m2 = m.clone();
            m2.par[j] = e + 1;
            out.insert(m2, c.mul(&S::from_ratio(1, e as i64 + 1)));
        }
        Ok(out)
    }

    /// Substitutes parameter `j := a + b·(parameter k)`. With `b = 0` this
    /// evaluates the parameter at a point. Negative exponents require an
    /// invertible `a` and `b = 0`.
    pub fn subst_param_affine(&self, j: usize, a: &S, b: Option<(&S, usize)>) -> Result<Self> {
        let mut out = Jet {
            ring: self.ring.clone(),
            valid_order: self.valid_order,
            terms: BTreeMap::new(),
        };
        for (m, c) in &self.terms {
            let e = m.par[j];
            let mut base = m.clone();
            base.par[j] = 0;
            if e == 0 {
                out.insert(base, c.clone());
                continue;
            }
            if e < 0 {
                if b.is_some() {
                    return Err(CalcError::Precondition(
                        "affine substitution into a Laurent exponent".into(),
                    ));
                }
                let v = a.powi(e as i32).ok_or_else(|| {
                    CalcError::NotInvertible("substituting 0 into a negative power".into())
                })?;
                out.insert(base, c.mul(&v));
                continue;
            }
            match b {
                None => {
                    let v = a.powi(e as i32).expect("nonneg power");
                    out.insert(base, c.mul(&v));
                }
                Some((bc, k)) => {
                    // (a + b u)^e expanded binomially.
                    let e = e as u32;
                    let mut binom = S::one();
                    for i in 0..=e {
                        // binom = C(e, i) computed incrementally.
                        if i > 0 {
                            binom = binom
                                .mul(&S::from_i64((e - i + 1) as i64))
                                .mul(&S::from_ratio(1, i as i64));
                        }
                        let coeff = binom
                            .mul(&a.powi((e - i) as i32).expect("pow"))
                            .mul(&bc.powi(i as i32).expect("pow"));
                        let mut m2 = base.clone();
                        m2.par[k] += i as i16;
                        out.insert(m2, c.mul(&coeff));
                    }
                }
            }
        }
        Ok(out)
    }

    /// Re-expresses the jet in another ring with identical chart block. The
    /// parameter lists may differ; monomials are transported by name, and a
    /// missing target parameter is only allowed when unused.
    pub fn transport(&self, target: &Arc<JetRing>) -> Result<Self> {
        assert_eq!(self.ring.n, target.n, "chart size mismatch");
        let map: Vec<Option<usize>> = self
            .ring
            .params
            .iter()
            .map(|p| target.param_index(&p.name))
            .collect();
        let mut out = Jet {
            ring: target.clone(),
            valid_order: self.valid_order.min(target.order),
            terms: BTreeMap::new(),
        };
        for (m, c) in &self.terms {
            let mut m2 = Mono::unit(target);
            m2.z = m.z.clone();
            m2.zb = m.zb.clone();
            for (j, &e) in m.par.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                match map[j] {
                    Some(t) => m2.par[t] = e,
                    None => {
                        return Err(CalcError::UnknownVariable(format!(
                            "parameter `{}` absent from target ring",
                            self.ring.params[j].name
                        )))
                    }
                }
            }
            out.insert(m2, c.clone());
        }
        Ok(out)
    }

    /// Converts coefficients through a scalar map (e.g. exact → numeric).
    pub fn map_scalars<T: Scalar>(&self, ring: &Arc<JetRing>, f: impl Fn(&S) -> T) -> Jet<T> {
        let mut out = Jet::zero(ring);
        out.valid_order = self.valid_order.min(ring.order);
        for (m, c) in &self.terms {
            out.insert(m.clone(), f(c));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Exact;

    type J = Jet<Exact>;

    fn ring(order: u32) -> Arc<JetRing> {
        JetRing::new(1, order)
    }

    fn ring_t(order: u32, floor: i32) -> Arc<JetRing> {
        JetRing::with_params(1, order, vec![ParamSpec::laurent("t", floor)])
    }

    #[test]
    fn monomial_product_tracks_order() {
        let r = ring(4);
        let z = J::var(&r, Var::Z(0));
        let zb = J::var(&r, Var::Zb(0));
        let p = z.mul(&zb);
        let mut m = Mono::unit(&r);
        m.z[0] = 1;
        m.zb[0] = 1;
        assert_eq!(p.coeff(&m), Exact::from_int(1));
        assert_eq!(p.valid_order, 4);
    }

    #[test]
    fn truncation_at_cap() {
        let r = ring(1);
        let one = J::one(&r);
        let z = J::var(&r, Var::Z(0));
        let a = one.add(&z);
        let b = one.sub(&z);
        // (1+z)(1−z) = 1 − z², and z² is beyond the cap.
        assert_eq!(a.mul(&b), J::one(&r));
    }

    #[test]
    fn laurent_cancellation() {
        let r = ring_t(2, -2);
        let mut m = Mono::unit(&r);
        m.par[0] = -1;
        let t_inv = J::monomial(&r, m, Exact::from_int(1));
        let t = J::var(&r, Var::Param(0));
        assert_eq!(t_inv.mul(&t), J::one(&r));
    }

    #[test]
    fn geometric_series_inverse() {
        let r = ring(4);
        let z = J::var(&r, Var::Z(0));
        let zb = J::var(&r, Var::Zb(0));
        let a = J::one(&r).add(&z.mul(&zb));
        let inv = a.invert().unwrap();
        // 1 − zz̄ + z²z̄²
        let zz = z.mul(&zb);
        let expect = J::one(&r).sub(&zz).add(&zz.mul(&zz));
        assert_eq!(inv, expect);
        assert_eq!(a.mul(&inv), J::one(&r));
    }

    #[test]
    fn invert_identity_and_failures() {
        let r = ring(3);
        assert_eq!(J::one(&r).invert().unwrap(), J::one(&r));
        assert!(J::var(&r, Var::Z(0)).invert().is_err());
        // Pure polynomial parameter dependence is not invertible.
        let rt = ring_t(3, 0);
        let a = J::one(&rt).add(&J::var(&rt, Var::Param(0)));
        assert!(a.invert().is_err());
        // Capped parameters are nilpotent, hence fine.
        let re = JetRing::with_params(1, 3, vec![ParamSpec::nilpotent("e", 2)]);
        let b = Jet::<Exact>::one(&re).add(&Jet::var(&re, Var::Param(0)));
        let binv = b.invert().unwrap();
        assert_eq!(b.mul(&binv), Jet::one(&re));
    }

    #[test]
    fn derivative_rules() {
        let r = ring(4);
        let z = J::var(&r, Var::Z(0));
        let zb = J::var(&r, Var::Zb(0));
        // ∂/∂z̄ (z z̄²) = 2 z z̄
        let a = z.mul(&zb).mul(&zb);
        let d = a.derivative(Var::Zb(0)).unwrap();
        assert_eq!(d, z.mul(&zb).scale(&Exact::from_int(2)).truncated(3));
        assert_eq!(d.valid_order, 3);
        // constants die
        assert!(J::from_i64(&r, 5).derivative(Var::Z(0)).unwrap().is_zero());
        // exhausted order errors
        let flat = J::var(&r, Var::Z(0)).truncated(0);
        assert!(flat.derivative(Var::Z(0)).is_err());
    }

    #[test]
    fn laurent_derivative() {
        let r = ring_t(2, -2);
        let mut m = Mono::unit(&r);
        m.par[0] = -1;
        let t_inv = J::monomial(&r, m.clone(), Exact::from_int(1));
        let d = t_inv.derivative(Var::Param(0)).unwrap();
        let mut m2 = Mono::unit(&r);
        m2.par[0] = -2;
        assert_eq!(d, J::monomial(&r, m2, Exact::from_int(-1)));
        // floor −2: one more derivative underflows
        assert!(d.derivative(Var::Param(0)).is_err());
    }

    #[test]
    fn conjugation_is_an_involution_fixing_params() {
        let r = ring_t(3, 0);
        let i = Exact::imaginary_unit();
        let z = J::var(&r, Var::Z(0));
        let a = z.scale(&i);
        let c = a.conj();
        let zb = J::var(&r, Var::Zb(0));
        assert_eq!(c, zb.scale(&i.neg()));
        assert_eq!(c.conj(), a);
        let t = J::var(&r, Var::Param(0));
        let b = t.mul(&z).mul(&zb);
        assert_eq!(b.conj(), b);
    }

    #[test]
    fn definite_param_integrals() {
        let rt = ring_t(3, 0);
        let t = J::var(&rt, Var::Param(0));
        let lo = Exact::from_int(0);
        let hi = Exact::from_int(1);
        // ∫₀¹ t² dt = 1/3
        let v = t.mul(&t).integrate_param(0, &lo, &hi).unwrap();
        assert_eq!(v, J::constant(&rt, Exact::ratio(1, 3)));
        // ∫₀¹ (z + t z̄) dt = z + z̄/2
        let z = J::var(&rt, Var::Z(0));
        let zb = J::var(&rt, Var::Zb(0));
        let a = z.add(&t.mul(&zb));
        let v = a.integrate_param(0, &lo, &hi).unwrap();
        assert_eq!(v, z.add(&zb.scale(&Exact::ratio(1, 2))));
        // Laurent dependence is rejected.
        let rl = ring_t(3, -1);
        let mut m = Mono::unit(&rl);
        m.par[0] = -1;
        let tinv = J::monomial(&rl, m, Exact::from_int(1));
        assert!(tinv.integrate_param(0, &lo, &hi).is_err());
    }

    #[test]
    fn affine_substitution() {
        let rt = JetRing::with_params(
            1,
            3,
            vec![ParamSpec::polynomial("s"), ParamSpec::polynomial("u")],
        );
        let s = J::var(&rt, Var::Param(0));
        let u = J::var(&rt, Var::Param(1));
        // s ↦ 1 − u in s²:  (1−u)² = 1 − 2u + u²
        let sq = s.mul(&s);
        let got = sq
            .subst_param_affine(0, &Exact::from_int(1), Some((&Exact::from_int(-1), 1)))
            .unwrap();
        let expect = J::one(&rt)
            .sub(&u.scale(&Exact::from_int(2)))
            .add(&u.mul(&u));
        assert_eq!(got, expect);
        // point evaluation
        let got = sq
            .subst_param_affine(0, &Exact::ratio(1, 2), None)
            .unwrap();
        assert_eq!(got, J::constant(&rt, Exact::ratio(1, 4)));
    }
}

impl<S: Scalar> fmt::Display for Jet<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({})", c)?;
            for (i, &e) in m.z.iter().enumerate() {
                if e > 0 {
                    write!(f, "·z{}^{}", i + 1, e)?;
                }
            }
            for (i, &e) in m.zb.iter().enumerate() {
                if e > 0 {
                    write!(f, "·z̄{}^{}", i + 1, e)?;
                }
            }
            for (j, &e) in m.par.iter().enumerate() {
                if e != 0 {
                    write!(f, "·{}^{}", self.ring.params[j].name, e)?;
                }
            }
        }
        Ok(())
    }
}
