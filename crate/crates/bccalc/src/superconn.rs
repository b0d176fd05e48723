//! Superconnections and cohesive modules.
//!
//! A superconnection is stored as a base differential plus its coefficient
//! tail; every operator identity is re-expressed in coefficients (flatness
//! of `D + A` becomes `[D,A] + A² = 0`). The operator oracle below applies
//! superconnections to basis sections directly and is the ground truth for
//! those coefficient formulas.

use std::sync::Arc;

use crate::bundle::{BlockMap, EndForm, GradedBundle, SectionForm};
use crate::error::{CalcError, Result};
use crate::form::{Diff, Form, FormMono};
use crate::jet::JetRing;
use crate::scalar::Scalar;

/// Which trivial base differential the coefficient tail rides on.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Base {
    Delbar,
    Del,
    Total,
}

impl Base {
    pub fn diff(self) -> Diff {
        match self {
            Base::Delbar => Diff::Delbar,
            Base::Del => Diff::Del,
            Base::Total => Diff::DX,
        }
    }
}

/// `D + A`: the base differential acting with the right-module sign
/// `D(e⊗ω) = (−1)^{‖e‖} e⊗dω`, plus an endomorphism-valued tail acting by
/// evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct Superconnection<S: Scalar> {
    pub base: Base,
    pub tail: EndForm<S>,
}

impl<S: Scalar> Superconnection<S> {
    pub fn new(base: Base, tail: EndForm<S>) -> Result<Self> {
        check_tail_pattern(base, &tail)?;
        Ok(Superconnection { base, tail })
    }

    pub fn ring(&self) -> &Arc<JetRing> {
        &self.tail.ring
    }

    pub fn bundle(&self) -> &GradedBundle {
        &self.tail.source
    }

    /// Operator action on a form-valued section.
    pub fn apply(&self, s: &SectionForm<S>) -> Result<SectionForm<S>> {
        let mut out = s.apply_map(&self.tail);
        for (d, i, f) in s.components() {
            if f.is_zero() {
                continue;
            }
            let mut df = f.d(self.base.diff())?;
            if d.rem_euclid(2) == 1 {
                df = df.neg();
            }
            let cur = out.get(d, i);
            out.set(d, i, cur.add(&df));
        }
        Ok(out)
    }

    /// Coefficient-level flatness defect `[D,A] + A²`; the superconnection
    /// squares to zero iff this vanishes.
    pub fn flatness_defect(&self) -> Result<EndForm<S>> {
        let d = self.tail.d_comm(self.base.diff())?;
        Ok(d.add(&self.tail.mul(&self.tail)))
    }

    pub fn is_flat(&self) -> Result<(bool, EndForm<S>)> {
        let defect = self.flatness_defect()?;
        Ok((defect.is_zero(), defect))
    }
}

/// Tail components of a ∂̄-superconnection live in `A^{0,k}(End^{1−k})`;
/// mirrored for ∂; a total superconnection is the union of both patterns.
fn check_tail_pattern<S: Scalar>(base: Base, tail: &EndForm<S>) -> Result<()> {
    for (&(a, b), blk) in tail.nonzero_blocks() {
        let end_deg = a - b;
        for i in 0..blk.rows {
            for j in 0..blk.cols {
                for (mono, _) in blk[(i, j)].terms() {
                    if mono.m() != 0 {
                        return Err(CalcError::DegreePattern(
                            "superconnection tails carry no parameter form directions".into(),
                        ));
                    }
                    let ok = match base {
                        Base::Delbar => {
                            mono.p() == 0 && end_deg == 1 - mono.q() as i32
                        }
                        Base::Del => mono.q() == 0 && end_deg == 1 - mono.p() as i32,
                        Base::Total => {
                            (mono.p() == 0 && end_deg == 1 - mono.q() as i32)
                                || (mono.q() == 0 && end_deg == 1 - mono.p() as i32)
                        }
                    };
                    if !ok {
                        return Err(CalcError::DegreePattern(format!(
                            "tail term of bidegree ({},{}) in End-degree {} block",
                            mono.p(),
                            mono.q(),
                            end_deg
                        )));
                    }
                }
            }
        }
    }
    Ok(())
}

/// A graded bundle with a flat ∂̄-superconnection.
#[derive(Clone, Debug, PartialEq)]
pub struct CohesiveModule<S: Scalar> {
    pub bundle: GradedBundle,
    pub dbar: Superconnection<S>,
}

impl<S: Scalar> CohesiveModule<S> {
    pub fn new(bundle: GradedBundle, tail: EndForm<S>) -> Result<Self> {
        let dbar = Superconnection::new(Base::Delbar, tail)?;
        let (flat, defect) = dbar.is_flat()?;
        if !flat {
            let (mag, loc) = describe_defect(&defect);
            return Err(CalcError::NotFlat(format!(
                "flatness defect {mag:.3e} at {loc}"
            )));
        }
        Ok(CohesiveModule { bundle, dbar })
    }

    /// Builds without the flatness check (for exhibiting defects in tests
    /// and validation reports).
    pub fn new_unchecked(bundle: GradedBundle, tail: EndForm<S>) -> Result<Self> {
        let dbar = Superconnection::new(Base::Delbar, tail)?;
        Ok(CohesiveModule { bundle, dbar })
    }

    pub fn ring(&self) -> &Arc<JetRing> {
        self.dbar.ring()
    }

    pub fn tail(&self) -> &EndForm<S> {
        &self.dbar.tail
    }

    /// The `A^{0,k}` component of the tail for a fixed `k`.
    pub fn tail_component(&self, k: u32) -> EndForm<S> {
        component_q(&self.dbar.tail, k)
    }

    /// Shift: degrees move down by one and the whole superconnection is
    /// negated; flatness is preserved.
    pub fn shifted(&self) -> Self {
        let bundle = self.bundle.shifted();
        let mut tail = EndForm::zero_end(self.ring(), &bundle);
        for (&(a, b), blk) in self.dbar.tail.nonzero_blocks() {
            tail.set_block(a - 1, b - 1, blk.map(|f| f.neg()));
        }
        CohesiveModule {
            bundle,
            dbar: Superconnection {
                base: Base::Delbar,
                tail,
            },
        }
    }
}

/// Picks the form-bidegree-`(0,q)` part of every entry.
pub fn component_q<S: Scalar>(m: &EndForm<S>, q: u32) -> EndForm<S> {
    m.map_entries(|f| f.component(0, q, 0))
}

/// Picks the form-bidegree-`(p,0)` part of every entry.
pub fn component_p<S: Scalar>(m: &EndForm<S>, p: u32) -> EndForm<S> {
    m.map_entries(|f| f.component(p, 0, 0))
}

pub fn describe_defect<S: Scalar>(defect: &BlockMap<S>) -> (f64, String) {
    let mut mag = 0.0f64;
    let mut loc = String::from("—");
    for (&(a, b), blk) in defect.nonzero_blocks() {
        for i in 0..blk.rows {
            for j in 0..blk.cols {
                if let Some((mono, jm, m)) = blk[(i, j)].worst_term() {
                    if m > mag {
                        mag = m;
                        loc = format!(
                            "block ({a},{b}) entry ({i},{j}) form ({},{},{}) jet {jm}",
                            mono.p(),
                            mono.q(),
                            mono.m()
                        );
                    }
                }
            }
        }
    }
    (mag, loc)
}

/// Gauge transformation of a ∂̄-tail: `A^f = f⁻¹·[D,f] + f⁻¹·A·f`,
/// the coefficient form of `f⁻¹ ∘ E″ ∘ f`. Preserves flatness.
pub fn gauge_transform_tail<S: Scalar>(
    tail: &EndForm<S>,
    f: &EndForm<S>,
) -> Result<EndForm<S>> {
    let f_inv = f.invert_gauge()?;
    let df = f.d_comm(Diff::Delbar)?;
    Ok(f_inv.mul(&df).add(&f_inv.mul(tail).mul(f)))
}

/// Operator oracle: checks that the square of the superconnection, applied
/// section-wise, equals evaluation of the coefficient defect — for every
/// frame section dressed with every form monomial up to the given degree.
///
/// This pins the right-module sign conventions independently of the
/// coefficient formulas.
pub fn oracle_square_matches_defect<S: Scalar>(
    sc: &Superconnection<S>,
    max_form_degree: u32,
) -> Result<bool> {
    let ring = sc.ring().clone();
    let defect = sc.flatness_defect()?;
    for (d, i, mono) in basis_dressings(&ring, sc.bundle(), max_form_degree) {
        let s = SectionForm::frame(&ring, sc.bundle(), d, i, Form::generator(&ring, mono));
        let lhs = sc.apply(&sc.apply(&s)?)?;
        let rhs = s.apply_map(&defect);
        if lhs != rhs {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Frame sections dressed with low-degree form monomials.
pub fn basis_dressings<'a>(
    ring: &'a Arc<JetRing>,
    bundle: &'a GradedBundle,
    max_form_degree: u32,
) -> impl Iterator<Item = (i32, usize, FormMono)> + 'a {
    let n = ring.n as u32;
    let mut monos = vec![FormMono::SCALAR];
    for z in 0u16..(1 << n) {
        for zb in 0u16..(1 << n) {
            let m = FormMono { z, zb, par: 0 };
            if m.degree() > 0 && m.degree() <= max_form_degree {
                monos.push(m);
            }
        }
    }
    bundle
        .ranks()
        .clone()
        .into_iter()
        .flat_map(move |(d, r)| {
            let monos = monos.clone();
            (0..r).flat_map(move |i| monos.clone().into_iter().map(move |m| (d, i, m)))
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::{Jet, Var};
    use crate::randgen::Rng;
    use crate::scalar::Exact;

    fn ring() -> Arc<JetRing> {
        JetRing::new(1, 4)
    }

    /// Two-term Koszul module: multiplication by the coordinate `z + z0`,
    /// `E^{−1} → E^0`, flat because the entry is holomorphic.
    pub fn koszul(r: &Arc<JetRing>, z0: i64) -> CohesiveModule<Exact> {
        let bundle = GradedBundle::new([(-1, 1), (0, 1)]);
        let mut tail = EndForm::zero_end(r, &bundle);
        let entry = Form::from_jet(
            Jet::var(r, Var::Z(0)).add(&Jet::from_i64(r, z0)),
        );
        tail.set_entry(0, -1, 0, 0, entry);
        CohesiveModule::new(bundle, tail).unwrap()
    }

    #[test]
    fn koszul_is_flat_antiholomorphic_is_not() {
        let r = ring();
        let _ = koszul(&r, 0);
        let bundle = GradedBundle::new([(-1, 1), (0, 1)]);
        let mut tail = EndForm::<Exact>::zero_end(&r, &bundle);
        tail.set_entry(0, -1, 0, 0, Form::from_jet(Jet::var(&r, Var::Zb(0))));
        let sc = Superconnection::new(Base::Delbar, tail).unwrap();
        let (flat, defect) = sc.is_flat().unwrap();
        assert!(!flat);
        // the defect is exactly the dz̄-term ∂̄(z̄) in block (0,−1)
        let blk = defect.block(0, -1);
        assert_eq!(blk[(0, 0)], Form::dzb(&r, 0));
    }

    #[test]
    fn zero_tail_is_flat() {
        let r = ring();
        let bundle = GradedBundle::new([(0, 2)]);
        let sc = Superconnection::new(Base::Delbar, EndForm::<Exact>::zero_end(&r, &bundle)).unwrap();
        assert!(sc.is_flat().unwrap().0);
    }

    #[test]
    fn leibniz_rule_for_apply() {
        let r = ring();
        let m = koszul(&r, 1);
        let mut rng = Rng::new(17);
        for _ in 0..6 {
            let f0 = rng.form(&r, 2);
            let w = rng.form_pq(&r, 0, 1, 2).add(&rng.form_pq(&r, 0, 0, 2));
            let s = SectionForm::frame(&r, &m.bundle, -1, 0, f0.clone());
            // apply(D, s∧ω) = apply(D,s)∧ω + (−1)^{‖s‖} s⊗ d(ω), with
            // ‖s‖ read off homogeneous parts — use even/odd split of f0.
            let (fe, fo) = f0.parity_split();
            for (part, sign) in [(fe, -1), (fo, 1)] {
                // bundle degree −1 is odd, so section parity flips the form's
                if part.is_zero() {
                    continue;
                }
                let sp = SectionForm::frame(&r, &m.bundle, -1, 0, part.clone());
                let lhs = m.dbar.apply(&sp.wedge_right(&w)).unwrap();
                let mut rhs = m.dbar.apply(&sp).unwrap().wedge_right(&w);
                let dw = w.d(Diff::Delbar).unwrap();
                let extra = sp.wedge_right(&dw);
                rhs = if sign < 0 { rhs.sub(&extra) } else { rhs.add(&extra) };
                assert_eq!(lhs, rhs);
            }
            let _ = s;
        }
    }

    #[test]
    fn tail_evaluation_example() {
        // tail Θ = z̄·Id·dz̄ on a rank-1 bundle applied to the frame
        let r = ring();
        let bundle = GradedBundle::new([(0, 1)]);
        let mut tail = EndForm::<Exact>::zero_end(&r, &bundle);
        tail.set_entry(
            0,
            0,
            0,
            0,
            Form::dzb(&r, 0).scale_jet(&Jet::var(&r, Var::Zb(0))),
        );
        let sc = Superconnection::new(Base::Delbar, tail).unwrap();
        let e = SectionForm::frame(&r, &bundle, 0, 0, Form::one(&r));
        let out = sc.apply(&e).unwrap();
        assert_eq!(
            out.get(0, 0),
            Form::dzb(&r, 0).scale_jet(&Jet::var(&r, Var::Zb(0)))
        );
    }

    #[test]
    fn oracle_validates_coefficient_flatness() {
        let r = ring();
        // flat module
        let m = koszul(&r, 1);
        assert!(oracle_square_matches_defect(&m.dbar, 2).unwrap());
        // non-flat superconnection: oracle still matches its defect
        let bundle = GradedBundle::new([(-1, 1), (0, 1)]);
        let mut tail = EndForm::<Exact>::zero_end(&r, &bundle);
        tail.set_entry(0, -1, 0, 0, Form::from_jet(Jet::var(&r, Var::Zb(0))));
        let mut rng = Rng::new(23);
        tail = tail.add(&rng.endform_pq(&r, &bundle, 0, 0, 1, 2));
        let sc = Superconnection::new(Base::Delbar, tail).unwrap();
        assert!(oracle_square_matches_defect(&sc, 2).unwrap());
    }

    #[test]
    fn shift_flips_supertrace_and_preserves_flatness() {
        let r = ring();
        let m = koszul(&r, 0);
        let sh = m.shifted();
        assert!(sh.dbar.is_flat().unwrap().0);
        let sh2 = sh.shifted();
        assert!(sh2.dbar.is_flat().unwrap().0);
        // double shift restores the tail, two degrees down
        assert_eq!(
            sh2.tail().block(-2, -3)[(0, 0)],
            m.tail().block(0, -1)[(0, 0)]
        );
        // supertrace flips sign under shift for any endomorphism transported
        let mut rng = Rng::new(41);
        let a = rng.endform_pq(&r, &m.bundle, 0, 1, 1, 2);
        let mut a_sh = EndForm::zero_end(&r, &sh.bundle);
        for (&(x, y), blk) in a.nonzero_blocks() {
            a_sh.set_block(x - 1, y - 1, blk.clone());
        }
        assert_eq!(a.supertrace(), a_sh.supertrace().neg());
    }
}
