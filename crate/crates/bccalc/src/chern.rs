//! Chern superconnections and Chern-Weil characteristic forms.
//!
//! Given a Hermitian cohesive module, the unique unitary completion has
//! ∂-tail `Ω + Σ_{k≠1} (A″_k)*`: the connection (1,0)-form per degree-`d`
//! block is
//!
//! ```text
//! Ω_d = (−1)^d H_d⁻¹ ∂H_d + H_d⁻¹ Θ_d^☆ H_d
//! ```
//!
//! the `(−1)^d` being the right-module degree twist (the same twist that
//! makes the base differential act as `(−1)^{‖e‖} e⊗dω`); the operator
//! oracle and the unitarity equation pin it in the tests.

use std::sync::Arc;

use crate::bundle::{
    metric_pairing, series_eval, EndForm, GradedBundle, HermitianMetric, Poly, SectionForm,
};
use crate::error::Result;
use crate::form::{Diff, Form};
use crate::jet::{JetRing, ParamSpec, Var};
use crate::scalar::Scalar;
use crate::superconn::{component_q, CohesiveModule, Superconnection, Base};

/// A Hermitian cohesive module with its Chern superconnection assembled.
#[derive(Clone, Debug)]
pub struct ChernPair<S: Scalar> {
    pub module: CohesiveModule<S>,
    pub metric: HermitianMetric<S>,
    /// ∂̄-tail (the cohesive structure).
    pub a_dblprime: EndForm<S>,
    /// ∂-tail (connection form and term-wise adjoints).
    pub a_prime: EndForm<S>,
}

impl<S: Scalar> ChernPair<S> {
    pub fn new(module: &CohesiveModule<S>, metric: &HermitianMetric<S>) -> Result<Self> {
        assert!(module.bundle == metric.bundle, "bundle mismatch");
        let a_dblprime = module.tail().clone();
        let theta = component_q(&a_dblprime, 1);
        let omega = connection_one_form(&theta, metric)?;
        let linear_terms = a_dblprime.sub(&theta);
        let a_prime = omega.add(&linear_terms.adjoint(metric)?);
        Ok(ChernPair {
            module: module.clone(),
            metric: metric.clone(),
            a_dblprime,
            a_prime,
        })
    }

    pub fn ring(&self) -> &Arc<JetRing> {
        self.module.ring()
    }

    pub fn bundle(&self) -> &GradedBundle {
        &self.module.bundle
    }

    /// The ∂-superconnection `E′`.
    pub fn prime(&self) -> Superconnection<S> {
        Superconnection {
            base: Base::Del,
            tail: self.a_prime.clone(),
        }
    }

    /// The full Chern superconnection `𝔼 = E′ + E″` as a total-degree
    /// operator.
    pub fn full(&self) -> Superconnection<S> {
        Superconnection {
            base: Base::Total,
            tail: self.full_tail(),
        }
    }

    pub fn full_tail(&self) -> EndForm<S> {
        self.a_prime.add(&self.a_dblprime)
    }

    /// Tail of the ordinary unitary connection `∇ = E″₁ + E′₁` (the
    /// `Θ + Ω` part alone).
    pub fn nabla_tail(&self) -> EndForm<S> {
        component_q(&self.a_dblprime, 1).add(&crate::superconn::component_p(&self.a_prime, 1))
    }

    /// Curvature `R = 𝔼²` in coefficients: `[D, C] + C²` for the full tail.
    pub fn curvature(&self) -> Result<EndForm<S>> {
        let c = self.full_tail();
        Ok(c.d_comm(Diff::DX)?.add(&c.mul(&c)))
    }

    /// Curvature of the ordinary connection `∇`.
    pub fn nabla_curvature(&self) -> Result<EndForm<S>> {
        let c = self.nabla_tail();
        Ok(c.d_comm(Diff::DX)?.add(&c.mul(&c)))
    }

    /// `[𝔼, M]` in coefficients, for any endomorphism-valued form.
    pub fn bracket_full(&self, m: &EndForm<S>) -> Result<EndForm<S>> {
        Ok(m.d_comm(Diff::DX)?.add(&self.full_tail().supercommutator(m)))
    }

    /// `[E′, M]` in coefficients.
    pub fn bracket_prime(&self, m: &EndForm<S>) -> Result<EndForm<S>> {
        Ok(m.d_comm(Diff::Del)?.add(&self.a_prime.supercommutator(m)))
    }

    /// `[E″, M]` in coefficients.
    pub fn bracket_dblprime(&self, m: &EndForm<S>) -> Result<EndForm<S>> {
        Ok(m.d_comm(Diff::Delbar)?
            .add(&self.a_dblprime.supercommutator(m)))
    }

    /// Bott-Chern characteristic form `str f(R)`.
    pub fn char_form(&self, f: &Poly<S>) -> Result<Form<S>> {
        Ok(series_eval(f, &self.curvature()?).supertrace())
    }

    /// Defect of the unitarity equation
    /// `(−1)^{‖s‖} dʰ(s,t) = −h(𝔼s,t) + h(s,𝔼t)`
    /// for one pair of sections. Zero for the Chern superconnection.
    pub fn unitarity_defect(
        &self,
        s: &SectionForm<S>,
        t: &SectionForm<S>,
    ) -> Result<Form<S>> {
        let full = self.full();
        let es = full.apply(s)?;
        let et = full.apply(t)?;
        let mut defect = Form::zero(self.ring());
        let (s_even, s_odd) = section_parity_split(s);
        for (part, sign_is_minus) in [(s_even, false), (s_odd, true)] {
            if part.is_zero() {
                continue;
            }
            let pairing = metric_pairing(&part, t, &self.metric);
            let mut d = pairing.d(Diff::DX)?;
            if sign_is_minus {
                d = d.neg();
            }
            defect = defect.add(&d);
        }
        defect = defect.add(&metric_pairing(&es, t, &self.metric));
        defect = defect.sub(&metric_pairing(s, &et, &self.metric));
        Ok(defect)
    }
}

/// Solves the unitarity equation for the connection (1,0)-form block by
/// block: `Ω_d = (−1)^d H_d⁻¹ ∂H_d + H_d⁻¹ Θ_d^☆ H_d`.
pub fn connection_one_form<S: Scalar>(
    theta: &EndForm<S>,
    h: &HermitianMetric<S>,
) -> Result<EndForm<S>> {
    let ring = &h.ring;
    let theta_star = theta.star_transpose();
    let mut omega = EndForm::zero_end(ring, &h.bundle);
    for d in h.bundle.degrees() {
        let hd = h.block(d);
        let hd_inv = h.inverse_block(d)?;
        let dh = hd.try_map(|f| f.d(Diff::Del))?;
        let mut first = hd_inv.mul(&dh, ring);
        if d.rem_euclid(2) == 1 {
            first = first.map(|f| f.neg());
        }
        let second = hd_inv.mul(&theta_star.block(d, d), ring).mul(hd, ring);
        omega.set_block(d, d, first.add(&second));
    }
    Ok(omega)
}

/// Splits a section by total parity (bundle degree + form degree).
pub fn section_parity_split<S: Scalar>(
    s: &SectionForm<S>,
) -> (SectionForm<S>, SectionForm<S>) {
    let mut even = SectionForm::zero(&s.ring, &s.bundle);
    let mut odd = SectionForm::zero(&s.ring, &s.bundle);
    for (d, i, f) in s.components() {
        let (fe, fo) = f.parity_split();
        if d.rem_euclid(2) == 0 {
            even.set(d, i, fe);
            odd.set(d, i, fo);
        } else {
            even.set(d, i, fo);
            odd.set(d, i, fe);
        }
    }
    (even, odd)
}

/// Extends a ring with extra parameters (fresh names required).
pub fn extend_ring(ring: &Arc<JetRing>, extra: &[ParamSpec]) -> Arc<JetRing> {
    let mut params = ring.params.clone();
    for p in extra {
        assert!(
            ring.param_index(&p.name).is_none(),
            "parameter `{}` already exists",
            p.name
        );
        params.push(p.clone());
    }
    JetRing::with_params(ring.n, ring.order, params)
}

/// Result of the linear transgression from `𝔼` to `∇`.
pub struct LinearTransgression<S: Scalar> {
    /// `∫₀¹ str{A · f′(R_t)} dt`
    pub potential: Form<S>,
    /// `str f(R_𝔼) − str f(R_∇) − dˣ(potential)`
    pub defect: Form<S>,
    pub valid_order: Option<u32>,
}

/// Deforms `𝔼_t = ∇ + tA` with `A = Σ_{k≠1} 𝔼_k`, computes `R_t` exactly
/// as a polynomial in `t`, and integrates `str{A·f′(R_t)}` over `[0,1]`.
pub fn linear_transgression<S: Scalar>(
    pair: &ChernPair<S>,
    f: &Poly<S>,
) -> Result<LinearTransgression<S>> {
    let ring_t = extend_ring(pair.ring(), &[ParamSpec::polynomial("__lt_t")]);
    let t_idx = ring_t.param_index("__lt_t").unwrap();
    let nabla = pair.nabla_tail().transport(&ring_t)?;
    let a = pair.full_tail().sub(&pair.nabla_tail()).transport(&ring_t)?;
    let t_jet = crate::jet::Jet::var(&ring_t, Var::Param(t_idx));
    let tail_t = nabla.add(&a.scale_jet(&t_jet));
    let r_t = tail_t.d_comm(Diff::DX)?.add(&tail_t.mul(&tail_t));
    let fp = f.derivative();
    let integrand = a.mul(&series_eval(&fp, &r_t)).supertrace();
    let zero = S::zero();
    let one = S::one();
    let potential_t = integrand.try_map_jets(|j| j.integrate_param(t_idx, &zero, &one))?;
    let potential = potential_t.transport(pair.ring())?;

    let r_full = pair.curvature()?;
    let r_nabla = pair.nabla_curvature()?;
    let lhs = series_eval(f, &r_full)
        .supertrace()
        .sub(&series_eval(f, &r_nabla).supertrace());
    let defect = lhs.sub(&potential.d(Diff::DX)?);
    let valid_order = defect.min_valid_order().or(potential.min_valid_order());
    Ok(LinearTransgression {
        potential,
        defect,
        valid_order,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::MatF;
    use crate::form::FormMono;
    use crate::jet::Jet;
    use crate::randgen::Rng;
    use crate::scalar::Exact;
    use crate::superconn::basis_dressings;

    fn ring() -> Arc<JetRing> {
        JetRing::new(1, 4)
    }

    /// Rank-1 bundle in degree 0 with the Fubini-Study-like metric 1 + zz̄.
    fn fs_pair(r: &Arc<JetRing>) -> ChernPair<Exact> {
        let bundle = GradedBundle::new([(0, 1)]);
        let module =
            CohesiveModule::new(bundle.clone(), EndForm::zero_end(r, &bundle)).unwrap();
        let mut blk = MatF::zeros(r, 1, 1);
        blk[(0, 0)] = Form::from_jet(
            Jet::one(r).add(&Jet::var(r, Var::Z(0)).mul(&Jet::var(r, Var::Zb(0)))),
        );
        let mut blocks = std::collections::BTreeMap::new();
        blocks.insert(0, blk);
        let h = HermitianMetric::new(r, &bundle, blocks).unwrap();
        ChernPair::new(&module, &h).unwrap()
    }

    fn koszul_pair(r: &Arc<JetRing>) -> ChernPair<Exact> {
        let m = crate::corpus::koszul_module(r, 0);
        let h = HermitianMetric::identity(r, &m.bundle);
        ChernPair::new(&m, &h).unwrap()
    }

    #[test]
    fn fubini_study_connection_form() {
        let r = ring();
        let pair = fs_pair(&r);
        // Ω = H⁻¹∂H = (z̄ − zz̄²)dz at D = 4
        let z = Jet::var(&r, Var::Z(0));
        let zb = Jet::var(&r, Var::Zb(0));
        let expect = Form::dz(&r, 0).scale_jet(&zb.sub(&z.mul(&zb).mul(&zb)));
        assert_eq!(pair.a_prime.block(0, 0)[(0, 0)], expect);
        // R = (1 − 2zz̄ + …)·dz̄∧dz, sign pinned by the operator oracle below
        let rcurv = pair.curvature().unwrap();
        let vol = Form::dzb(&r, 0).wedge(&Form::dz(&r, 0));
        let c = rcurv.block(0, 0)[(0, 0)].clone();
        let two = Exact::from_int(2);
        let expect_c = vol.scale_jet(
            &Jet::one(&r)
                .sub(&z.mul(&zb).scale(&two))
                .add(&z.pow(2).mul(&zb.pow(2)).scale(&Exact::from_int(3))),
        );
        assert_eq!(c.truncated(2), expect_c.truncated(2));
    }

    #[test]
    fn identity_metric_gives_conjugate_transpose_tail() {
        let r = ring();
        // H = Id, Θ = 0, tail A₀ only ⇒ Ω = 0 and E′₀ = (A₀)^☆
        let pair = koszul_pair(&r);
        assert!(pair.nabla_tail().is_zero());
        let a0 = pair.a_dblprime.clone();
        assert_eq!(pair.a_prime, a0.star_transpose());
    }

    #[test]
    fn operator_oracle_pins_curvature() {
        let r = ring();
        for pair in [fs_pair(&r), koszul_pair(&r)] {
            let full = pair.full();
            let rcurv = pair.curvature().unwrap();
            for (d, i, mono) in basis_dressings(&r, pair.bundle(), 2) {
                let s = SectionForm::frame(&r, pair.bundle(), d, i, Form::generator(&r, mono));
                let lhs = full.apply(&full.apply(&s).unwrap()).unwrap();
                let rhs = s.apply_map(&rcurv);
                assert_eq!(lhs, rhs, "E² ≠ R at degree {d}, frame {i}");
            }
        }
    }

    #[test]
    fn koszul_curvature_blocks() {
        let r = ring();
        let pair = koszul_pair(&r);
        let rcurv = pair.curvature().unwrap();
        let z = Jet::var(&r, Var::Z(0));
        let zb = Jet::var(&r, Var::Zb(0));
        let zz = Form::from_jet(z.mul(&zb));
        assert_eq!(rcurv.block(0, 0)[(0, 0)], zz);
        assert_eq!(rcurv.block(-1, -1)[(0, 0)], zz);
        assert_eq!(rcurv.block(0, -1)[(0, 0)], Form::dz(&r, 0));
        assert_eq!(rcurv.block(-1, 0)[(0, 0)], Form::dzb(&r, 0).neg());
    }

    #[test]
    fn curvature_lemma_properties_hold_on_random_flat_modules() {
        let r = ring();
        for seed in 0..12 {
            let (module, h) = crate::corpus::random_flat_pair(&r, seed);
            let pair = ChernPair::new(&module, &h).unwrap();
            let rcurv = pair.curvature().unwrap();
            // (E′)² = 0
            let prime_sq = pair
                .a_prime
                .d_comm(Diff::Del)
                .unwrap()
                .add(&pair.a_prime.mul(&pair.a_prime));
            assert!(prime_sq.is_zero(), "(E′)² ≠ 0 at seed {seed}");
            // R* = R
            assert_eq!(
                rcurv.adjoint(&pair.metric).unwrap(),
                rcurv,
                "R not self-adjoint at seed {seed}"
            );
            // R = [E′, E″] in coefficients
            let bracket = pair
                .a_dblprime
                .d_comm(Diff::Del)
                .unwrap()
                .add(&pair.a_prime.d_comm(Diff::Delbar).unwrap())
                .add(&pair.a_prime.supercommutator(&pair.a_dblprime));
            assert_eq!(rcurv, bracket, "R ≠ [E′,E″] at seed {seed}");
            // exotic degree 0
            for (&k, comp) in &rcurv.exotic_decompose() {
                assert!(comp.is_zero() || k == 0, "R leaks exotic degree {k}");
            }
            // Bianchi
            assert!(
                pair.bracket_full(&rcurv).unwrap().is_zero(),
                "Bianchi failed at seed {seed}"
            );
        }
    }

    #[test]
    fn unitarity_holds_and_pins_omega() {
        let r = ring();
        for seed in 0..6 {
            let (module, h) = crate::corpus::random_flat_pair(&r, 100 + seed);
            let pair = ChernPair::new(&module, &h).unwrap();
            let mut rng = Rng::new(900 + seed);
            for _ in 0..4 {
                let mut s = SectionForm::zero(&r, pair.bundle());
                let mut t = SectionForm::zero(&r, pair.bundle());
                for d in pair.bundle().degrees() {
                    s.set(d, rng.below(pair.bundle().rank(d) as u64) as usize, rng.form(&r, 2));
                    t.set(d, rng.below(pair.bundle().rank(d) as u64) as usize, rng.form(&r, 2));
                }
                let defect = pair.unitarity_defect(&s, &t).unwrap();
                assert!(defect.is_zero(), "unitarity defect at seed {seed}");
            }
            // uniqueness: perturbing Ω breaks the equation
            let mut perturbed = pair.clone();
            let eps = EndForm::identity(&r, pair.bundle())
                .scale_form(&Form::dz(&r, 0))
                .scale(&Exact::ratio(1, 7));
            perturbed.a_prime = perturbed.a_prime.add(&eps);
            let e = SectionForm::frame(&r, pair.bundle(), 0, 0, Form::one(&r));
            let defect = perturbed.unitarity_defect(&e, &e).unwrap();
            assert!(!defect.is_zero(), "perturbed Ω still unitary?");
        }
    }

    #[test]
    fn characteristic_forms_are_closed_exotic_zero_and_real() {
        let r = Arc::new(JetRing {
            n: 1,
            order: 5,
            params: vec![],
        });
        let f2 = Poly::<Exact>::monomial(2);
        let f3 = Poly::<Exact>::monomial(3);
        for seed in 0..8 {
            let (module, h) = crate::corpus::random_flat_pair(&r, 200 + seed);
            let pair = ChernPair::new(&module, &h).unwrap();
            for f in [&f2, &f3] {
                let ch = pair.char_form(f).unwrap();
                assert!(ch.d(Diff::DX).unwrap().is_zero(), "char form not closed");
                for (m, _) in ch.terms() {
                    assert_eq!(m.p(), m.q(), "char form outside (p,p)");
                }
                assert_eq!(ch.star(), ch, "char form not Bott-Chern real");
            }
        }
        // f = 1 gives the Euler characteristic
        let (module, h) = crate::corpus::random_flat_pair(&r, 7);
        let pair = ChernPair::new(&module, &h).unwrap();
        let one = Poly::<Exact>::constant(Exact::from_int(1));
        let ch = pair.char_form(&one).unwrap();
        assert_eq!(
            ch,
            Form::from_jet(Jet::from_i64(&r, module.bundle.euler()))
        );
    }

    #[test]
    fn koszul_chern_character_components() {
        let r = ring();
        let pair = koszul_pair(&r);
        // f = T: the (0,0)-part cancels (|z|² − |z|²) and nothing else survives
        let f1 = Poly::<Exact>::monomial(1);
        assert!(pair.char_form(&f1).unwrap().is_zero());
        // f = T²: str R² = −2 dz∧dz̄
        let f2 = Poly::<Exact>::monomial(2);
        let vol = Form::dz(&r, 0).wedge(&Form::dzb(&r, 0));
        assert_eq!(pair.char_form(&f2).unwrap(), vol.scale(&Exact::from_int(-2)));
    }

    #[test]
    fn linear_transgression_is_exact() {
        let r6 = Arc::new(JetRing {
            n: 1,
            order: 6,
            params: vec![],
        });
        // A = 0: trivial
        let pair = fs_pair(&ring());
        let f2 = Poly::<Exact>::monomial(2);
        let lt = linear_transgression(&pair, &f2).unwrap();
        assert!(lt.potential.is_zero() && lt.defect.is_zero());
        // Koszul at D = 6 with H = Id and random flat modules
        let pair = koszul_pair(&r6);
        let lt = linear_transgression(&pair, &f2).unwrap();
        assert!(lt.defect.is_zero(), "Koszul linear transgression defect");
        assert!(!lt.potential.is_zero());
        for seed in 0..4 {
            let (module, h) = crate::corpus::random_flat_pair(&r6, 300 + seed);
            let pair = ChernPair::new(&module, &h).unwrap();
            let lt = linear_transgression(&pair, &f2).unwrap();
            assert!(lt.defect.is_zero(), "defect at seed {seed}");
        }
    }
}
