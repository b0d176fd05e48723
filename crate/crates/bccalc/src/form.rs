//! Bigraded differential forms on the chart, with parameter directions.
//!
//! A form monomial is `dz_I ∧ dz̄_J ∧ dπ_K` in the canonical generator
//! order (all `dz` before all `dz̄` before all `dπ`, each ascending);
//! any other order is normalized with the Koszul sign absorbed into the
//! jet coefficient. Total degree is `p+q+m` — parameter one-forms count
//! as odd, so the parameter differential anticommutes with `∂` and `∂̄`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::Result;
use crate::jet::{Jet, JetRing, Var};
use crate::scalar::Scalar;

/// Basis form monomial as generator bitmasks.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug, Default)]
pub struct FormMono {
    pub z: u16,
    pub zb: u16,
    pub par: u16,
}

impl FormMono {
    pub const SCALAR: FormMono = FormMono { z: 0, zb: 0, par: 0 };

    pub fn p(&self) -> u32 {
        self.z.count_ones()
    }
    pub fn q(&self) -> u32 {
        self.zb.count_ones()
    }
    pub fn m(&self) -> u32 {
        self.par.count_ones()
    }
    /// Total form degree `p+q+m`.
    pub fn degree(&self) -> u32 {
        self.p() + self.q() + self.m()
    }
    /// Exotic degree `−p+q` of the underlying scalar form.
    pub fn exotic(&self) -> i32 {
        self.q() as i32 - self.p() as i32
    }

    /// Combined occupancy with global generator positions:
    /// `dz_i ↦ i`, `dz̄_i ↦ 16+i`, `dπ_j ↦ 32+j`.
    fn bits(&self) -> u64 {
        (self.z as u64) | ((self.zb as u64) << 16) | ((self.par as u64) << 32)
    }

    fn from_bits(bits: u64) -> Self {
        FormMono {
            z: (bits & 0xffff) as u16,
            zb: ((bits >> 16) & 0xffff) as u16,
            par: ((bits >> 32) & 0xffff) as u16,
        }
    }

    /// Wedge of two monomials: `None` on a repeated generator, else the
    /// union with the reordering sign.
    pub fn wedge(&self, other: &FormMono) -> Option<(FormMono, i32)> {
        let a = self.bits();
        let b = other.bits();
        if a & b != 0 {
            return None;
        }
        // Sign: for each generator of `b`, count generators of `a` that sit
        // after it in the canonical order.
        let mut sign = 0u32;
        let mut rem = b;
        while rem != 0 {
            let pos = rem.trailing_zeros();
            let above = a >> (pos + 1).min(63);
            sign ^= (above.count_ones() as u32) & 1;
            rem &= rem - 1;
        }
        Some((FormMono::from_bits(a | b), if sign & 1 == 0 { 1 } else { -1 }))
    }
}

/// Which exterior differential.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Diff {
    /// `∂`: raises `p`.
    Del,
    /// `∂̄`: raises `q`.
    Delbar,
    /// `d^M`: all parameter directions.
    DParam,
    /// `∂ + ∂̄`.
    DX,
    /// `∂ + ∂̄ + d^M`.
    DTotal,
}

/// Sparse form: canonical map from monomial to jet coefficient.
#[derive(Clone, Debug)]
pub struct Form<S: Scalar> {
    pub ring: Arc<JetRing>,
    terms: BTreeMap<FormMono, Jet<S>>,
}

impl<S: Scalar> PartialEq for Form<S> {
    fn eq(&self, other: &Self) -> bool {
        *self.ring == *other.ring && self.terms == other.terms
    }
}

impl<S: Scalar> Form<S> {
    pub fn zero(ring: &Arc<JetRing>) -> Self {
        Form {
            ring: ring.clone(),
            terms: BTreeMap::new(),
        }
    }

    pub fn from_jet(jet: Jet<S>) -> Self {
        let mut f = Form::zero(&jet.ring.clone());
        f.insert(FormMono::SCALAR, jet);
        f
    }

    pub fn one(ring: &Arc<JetRing>) -> Self {
        Form::from_jet(Jet::one(ring))
    }

    pub fn generator(ring: &Arc<JetRing>, mono: FormMono) -> Self {
        let mut f = Form::zero(ring);
        f.insert(mono, Jet::one(ring));
        f
    }

    /// `dz_i`
    pub fn dz(ring: &Arc<JetRing>, i: usize) -> Self {
        Form::generator(ring, FormMono { z: 1 << i, zb: 0, par: 0 })
    }

    /// `dz̄_i`
    pub fn dzb(ring: &Arc<JetRing>, i: usize) -> Self {
        Form::generator(ring, FormMono { z: 0, zb: 1 << i, par: 0 })
    }

    /// `dπ_j`
    pub fn dparam(ring: &Arc<JetRing>, j: usize) -> Self {
        Form::generator(ring, FormMono { z: 0, zb: 0, par: 1 << j })
    }

    pub fn insert(&mut self, mono: FormMono, jet: Jet<S>) {
        if jet.is_zero() {
            return;
        }
        match self.terms.entry(mono) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(jet);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let s = o.get().add(&jet);
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

    pub fn terms(&self) -> impl Iterator<Item = (&FormMono, &Jet<S>)> {
        self.terms.iter()
    }

    pub fn coeff(&self, mono: &FormMono) -> Jet<S> {
        self.terms
            .get(mono)
            .cloned()
            .unwrap_or_else(|| Jet::zero(&self.ring))
    }

    pub fn max_magnitude(&self) -> f64 {
        self.terms
            .values()
            .map(|j| j.max_magnitude())
            .fold(0.0, f64::max)
    }

    /// Smallest `valid_order` among coefficients; `None` for the zero form.
    pub fn min_valid_order(&self) -> Option<u32> {
        self.terms.values().map(|j| j.valid_order).min()
    }

    /// Worst offending coefficient: (monomial, jet-monomial, magnitude).
    pub fn worst_term(&self) -> Option<(FormMono, String, f64)> {
        let mut best: Option<(FormMono, String, f64)> = None;
        for (m, j) in &self.terms {
            for (jm, c) in j.terms() {
                let mag = c.magnitude();
                if best.as_ref().map_or(true, |(_, _, b)| mag > *b) {
                    best = Some((*m, format!("{:?}", jm), mag));
                }
            }
        }
        best
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (m, j) in &other.terms {
            out.insert(*m, j.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        let mut out = Form::zero(&self.ring);
        for (m, j) in &self.terms {
            out.insert(*m, j.neg());
        }
        out
    }

    pub fn scale(&self, c: &S) -> Self {
        let mut out = Form::zero(&self.ring);
        for (m, j) in &self.terms {
            out.insert(*m, j.scale(c));
        }
        out
    }

    pub fn scale_jet(&self, jet: &Jet<S>) -> Self {
        let mut out = Form::zero(&self.ring);
        for (m, j) in &self.terms {
            out.insert(*m, j.mul(jet));
        }
        out
    }

    pub fn wedge(&self, other: &Self) -> Self {
        let mut out = Form::zero(&self.ring);
        for (ma, ja) in &self.terms {
            for (mb, jb) in &other.terms {
                if let Some((m, s)) = ma.wedge(mb) {
                    let mut j = ja.mul(jb);
                    if s < 0 {
                        j = j.neg();
                    }
                    out.insert(m, j);
                }
            }
        }
        out
    }

    /// Exterior derivative. New generators wedge on the left of each term.
    pub fn d(&self, which: Diff) -> Result<Self> {
        let mut out = Form::zero(&self.ring);
        let n = self.ring.n;
        let np = self.ring.params.len();
        for (mono, jet) in &self.terms {
            let push = |gen: FormMono, var: Var, out: &mut Form<S>| -> Result<()> {
                let dj = jet.derivative(var)?;
                if dj.is_zero() {
                    return Ok(());
                }
                if let Some((m, s)) = gen.wedge(mono) {
                    out.insert(m, if s < 0 { dj.neg() } else { dj });
                }
                Ok(())
            };
            if matches!(which, Diff::Del | Diff::DX | Diff::DTotal) {
                for i in 0..n {
                    push(
                        FormMono { z: 1 << i, zb: 0, par: 0 },
                        Var::Z(i),
                        &mut out,
                    )?;
                }
            }
            if matches!(which, Diff::Delbar | Diff::DX | Diff::DTotal) {
                for i in 0..n {
                    push(
                        FormMono { z: 0, zb: 1 << i, par: 0 },
                        Var::Zb(i),
                        &mut out,
                    )?;
                }
            }
            if matches!(which, Diff::DParam | Diff::DTotal) {
                for j in 0..np {
                    push(
                        FormMono { z: 0, zb: 0, par: 1 << j },
                        Var::Param(j),
                        &mut out,
                    )?;
                }
            }
        }
        Ok(out)
    }

    /// The conjugate-linear star involution: on an X-degree-`k` term the
    /// coefficient is conjugated, `dz ↔ dz̄` are swapped and the sign is
    /// `(−1)^{k(k+1)/2}`; parameter generators pass through unchanged.
    pub fn star(&self) -> Self {
        let mut out = Form::zero(&self.ring);
        for (mono, jet) in &self.terms {
            let p = mono.p();
            let q = mono.q();
            let k = p + q;
            let sign = (k * (k + 1) / 2 + p * q) % 2;
            let swapped = FormMono {
                z: mono.zb,
                zb: mono.z,
                par: mono.par,
            };
            let j = jet.conj();
            out.insert(swapped, if sign == 1 { j.neg() } else { j });
        }
        out
    }

    /// Splits by exotic degree `−p+q`.
    pub fn exotic_decompose(&self) -> BTreeMap<i32, Form<S>> {
        let mut map: BTreeMap<i32, Form<S>> = BTreeMap::new();
        for (m, j) in &self.terms {
            map.entry(m.exotic())
                .or_insert_with(|| Form::zero(&self.ring))
                .insert(*m, j.clone());
        }
        map
    }

    /// The component of given form tri-degree.
    pub fn component(&self, p: u32, q: u32, m: u32) -> Self {
        let mut out = Form::zero(&self.ring);
        for (mono, j) in &self.terms {
            if mono.p() == p && mono.q() == q && mono.m() == m {
                out.insert(*mono, j.clone());
            }
        }
        out
    }

    /// Splits into (even, odd) total-degree parts.
    pub fn parity_split(&self) -> (Self, Self) {
        let mut even = Form::zero(&self.ring);
        let mut odd = Form::zero(&self.ring);
        for (m, j) in &self.terms {
            if m.degree() % 2 == 0 {
                even.insert(*m, j.clone());
            } else {
                odd.insert(*m, j.clone());
            }
        }
        (even, odd)
    }

    /// Interior product with the parameter vector field `∂/∂π_j`:
    /// keeps only terms containing `dπ_j`, removes the generator, and
    /// applies the sign for moving the contraction past earlier generators.
    pub fn contract_param(&self, j: usize) -> Self {
        let bit = 1u16 << j;
        let pos = 32 + j as u32;
        let mut out = Form::zero(&self.ring);
        for (mono, jet) in &self.terms {
            if mono.par & bit == 0 {
                continue;
            }
            let before = mono.bits() & ((1u64 << pos) - 1);
            let sign = before.count_ones() % 2;
            let m2 = FormMono {
                z: mono.z,
                zb: mono.zb,
                par: mono.par & !bit,
            };
            out.insert(m2, if sign == 1 { jet.neg() } else { jet.clone() });
        }
        out
    }

    /// Truncates every coefficient to `order`.
    pub fn truncated(&self, order: u32) -> Self {
        let mut out = Form::zero(&self.ring);
        for (m, j) in &self.terms {
            out.insert(*m, j.truncated(order));
        }
        out
    }

    pub fn map_jets(&self, f: impl Fn(&Jet<S>) -> Jet<S>) -> Self {
        let mut out = Form::zero(&self.ring);
        for (m, j) in &self.terms {
            out.insert(*m, f(j));
        }
        out
    }

    pub fn try_map_jets(&self, f: impl Fn(&Jet<S>) -> Result<Jet<S>>) -> Result<Self> {
        let mut out = Form::zero(&self.ring);
        for (m, j) in &self.terms {
            out.insert(*m, f(j)?);
        }
        Ok(out)
    }

    pub fn map_scalars<T: Scalar>(
        &self,
        ring: &Arc<JetRing>,
        f: &impl Fn(&S) -> T,
    ) -> Form<T> {
        let mut out = Form::zero(ring);
        for (m, j) in &self.terms {
            out.insert(*m, j.map_scalars(ring, f));
        }
        out
    }

    /// Re-expresses coefficients in another ring (see [`Jet::transport`]).
    /// Parameter *form* generators must be transportable by name as well.
    pub fn transport(&self, target: &Arc<JetRing>) -> Result<Self> {
        let mut out = Form::zero(target);
        for (m, j) in &self.terms {
            let mut par = 0u16;
            for b in 0..16u16 {
                if m.par & (1 << b) != 0 {
                    let name = &self.ring.params[b as usize].name;
                    let idx = target.param_index(name).ok_or_else(|| {
                        crate::error::CalcError::UnknownVariable(name.clone())
                    })?;
                    par |= 1 << idx;
                }
            }
            out.insert(
                FormMono { z: m.z, zb: m.zb, par },
                j.transport(target)?,
            );
        }
        Ok(out)
    }
}

impl<S: Scalar> fmt::Display for Form<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, j) in &self.terms {
            if !first {
                write!(f, "  +  ")?;
            }
            first = false;
            write!(f, "[{}]", j)?;
            for i in 0..16 {
                if m.z & (1 << i) != 0 {
                    write!(f, "∧dz{}", i + 1)?;
                }
            }
            for i in 0..16 {
                if m.zb & (1 << i) != 0 {
                    write!(f, "∧dz̄{}", i + 1)?;
                }
            }
            for i in 0..16 {
                if m.par & (1 << i) != 0 {
                    write!(f, "∧d{}", self.ring.params.get(i).map(|p| p.name.as_str()).unwrap_or("π"))?;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::ParamSpec;
    use crate::scalar::Exact;

    type F = Form<Exact>;

    fn ring() -> Arc<JetRing> {
        JetRing::with_params(1, 4, vec![ParamSpec::polynomial("t")])
    }

    fn zjet(r: &Arc<JetRing>) -> Jet<Exact> {
        Jet::var(r, Var::Z(0))
    }
    fn zbjet(r: &Arc<JetRing>) -> Jet<Exact> {
        Jet::var(r, Var::Zb(0))
    }

    #[test]
    fn wedge_basics() {
        let r = ring();
        let dz = F::dz(&r, 0);
        let dzb = F::dzb(&r, 0);
        assert!(dz.wedge(&dz).is_zero());
        assert_eq!(dz.wedge(&dzb), dzb.wedge(&dz).neg());
        let a = dz.scale_jet(&zjet(&r));
        let b = dzb.scale_jet(&zbjet(&r));
        let ab = a.wedge(&b);
        let expect = dz.wedge(&dzb).scale_jet(&zjet(&r).mul(&zbjet(&r)));
        assert_eq!(ab, expect);
    }

    #[test]
    fn derivative_raises_the_right_degree() {
        let r = ring();
        let zb = F::from_jet(zbjet(&r));
        assert_eq!(zb.d(Diff::Delbar).unwrap(), F::dzb(&r, 0));
        // d^M(t·dz) = dt∧dz
        let t = Jet::var(&r, Var::Param(0));
        let tdz = F::dz(&r, 0).scale_jet(&t);
        let dt_dz = F::dparam(&r, 0).wedge(&F::dz(&r, 0));
        assert_eq!(tdz.d(Diff::DParam).unwrap(), dt_dz);
    }

    #[test]
    fn differentials_square_to_zero_and_anticommute() {
        let r = ring();
        // a messy form: (z²z̄ + t·z) dz̄ + zz̄ + i·z̄² dz∧dt
        let i = Exact::imaginary_unit();
        let z = zjet(&r);
        let zb = zbjet(&r);
        let t = Jet::var(&r, Var::Param(0));
        let a = F::dzb(&r, 0)
            .scale_jet(&z.pow(2).mul(&zb).add(&t.mul(&z)))
            .add(&F::from_jet(z.mul(&zb)))
            .add(&F::dz(&r, 0).wedge(&F::dparam(&r, 0)).scale_jet(&zb.pow(2).scale(&i)));
        let dd = |w1: Diff, w2: Diff| a.d(w1).unwrap().d(w2).unwrap();
        assert!(dd(Diff::Del, Diff::Del).is_zero());
        assert!(dd(Diff::Delbar, Diff::Delbar).is_zero());
        assert!(dd(Diff::DParam, Diff::DParam).is_zero());
        assert!(dd(Diff::Del, Diff::Delbar).add(&dd(Diff::Delbar, Diff::Del)).is_zero());
        assert!(dd(Diff::Del, Diff::DParam).add(&dd(Diff::DParam, Diff::Del)).is_zero());
        assert!(dd(Diff::Delbar, Diff::DParam).add(&dd(Diff::DParam, Diff::Delbar)).is_zero());
    }

    #[test]
    fn del_delbar_anticommutation_on_zzb() {
        let r = ring();
        let a = F::from_jet(zjet(&r).mul(&zbjet(&r)));
        // ∂̄(zz̄) = z dz̄, then ∂ gives dz∧dz̄; the anticommutator vanishes.
        let fwd = a.d(Diff::Delbar).unwrap().d(Diff::Del).unwrap();
        assert_eq!(fwd, F::dz(&r, 0).wedge(&F::dzb(&r, 0)));
        let bwd = a.d(Diff::Del).unwrap().d(Diff::Delbar).unwrap();
        assert!(fwd.add(&bwd).is_zero());
    }

    #[test]
    fn star_on_generators() {
        let r = ring();
        // star(dz) = −dz̄
        assert_eq!(F::dz(&r, 0).star(), F::dzb(&r, 0).neg());
        // star of a function is its conjugate
        let i = Exact::imaginary_unit();
        let f = F::from_jet(zjet(&r).scale(&i));
        assert_eq!(f.star(), F::from_jet(zbjet(&r).scale(&i.neg())));
        // star(dz∧dz̄) = dz∧dz̄
        let vol = F::dz(&r, 0).wedge(&F::dzb(&r, 0));
        assert_eq!(vol.star(), vol);
        // parameter generators pass through
        let dt = F::dparam(&r, 0);
        assert_eq!(dt.star(), dt);
    }

    #[test]
    fn star_reverses_products_of_chart_forms() {
        let r = ring();
        let i = Exact::imaginary_unit();
        let a = F::dz(&r, 0)
            .scale_jet(&zjet(&r).scale(&i))
            .add(&F::from_jet(zbjet(&r)));
        let b = F::dzb(&r, 0).scale_jet(&zjet(&r).mul(&zjet(&r))).add(&F::dz(&r, 0));
        let lhs = a.wedge(&b).star();
        let rhs = b.star().wedge(&a.star());
        assert_eq!(lhs, rhs);
        // star is an involution
        assert_eq!(a.star().star(), a);
    }

    #[test]
    fn exotic_decomposition() {
        let r = ring();
        let vol = F::dz(&r, 0).wedge(&F::dzb(&r, 0));
        let parts = vol.exotic_decompose();
        assert_eq!(parts.len(), 1);
        assert!(parts.contains_key(&0));
        let mixed = F::dz(&r, 0).add(&F::dzb(&r, 0));
        let parts = mixed.exotic_decompose();
        assert_eq!(parts[&(-1)], F::dz(&r, 0));
        assert_eq!(parts[&1], F::dzb(&r, 0));
        // star maps component k to −k
        let sp = mixed.star().exotic_decompose();
        assert_eq!(sp[&1], parts[&(-1)].star());
    }

    #[test]
    fn contraction_extracts_dparam_coefficient() {
        let r = ring();
        let w = F::dz(&r, 0)
            .wedge(&F::dparam(&r, 0))
            .scale_jet(&zjet(&r))
            .add(&F::dzb(&r, 0));
        let c = w.contract_param(0);
        // dz∧dt ↦ −dz (the dt moves past dz), coefficient z
        assert_eq!(c, F::dz(&r, 0).scale_jet(&zjet(&r)).neg());
    }

    #[test]
    fn leibniz_for_each_differential() {
        let r = ring();
        let t = Jet::var(&r, Var::Param(0));
        let a = F::dz(&r, 0).scale_jet(&zbjet(&r).mul(&t)); // odd total degree
        let b = F::dzb(&r, 0).scale_jet(&zjet(&r)).add(&F::from_jet(t.clone()));
        for which in [Diff::Del, Diff::Delbar, Diff::DParam] {
            let lhs = a.wedge(&b).d(which).unwrap();
            let rhs = a
                .d(which)
                .unwrap()
                .wedge(&b)
                .add(&a.wedge(&b.d(which).unwrap()).neg()); // ‖a‖ = 1 ⇒ sign −1
            assert_eq!(lhs, rhs, "Leibniz failed for {:?}", which);
        }
    }
}
