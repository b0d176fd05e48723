//! Canned modules and randomized flat corpora for suites and tests.
//!
//! Random flat cohesive structures are produced by gauge-acting on simple
//! flat seeds (holomorphic degree-raising chains with vanishing square);
//! gauge transformations provably preserve flatness, so the corpus stays
//! exact while exercising every tail degree.

use std::sync::Arc;

use crate::bundle::{EndForm, GradedBundle, HermitianMetric, MatF};
use crate::form::Form;
use crate::jet::{Jet, JetRing, Var};
use crate::randgen::Rng;
use crate::scalar::Exact;
use crate::superconn::{gauge_transform_tail, CohesiveModule};

/// Two-term Koszul module: multiplication by `z + z₀` from degree −1 to 0.
pub fn koszul_module(ring: &Arc<JetRing>, z0: i64) -> CohesiveModule<Exact> {
    let bundle = GradedBundle::new([(-1, 1), (0, 1)]);
    let mut tail = EndForm::zero_end(ring, &bundle);
    tail.set_entry(
        0,
        -1,
        0,
        0,
        Form::from_jet(Jet::var(ring, Var::Z(0)).add(&Jet::from_i64(ring, z0))),
    );
    CohesiveModule::new(bundle, tail).expect("Koszul tail is flat")
}

/// Fubini-Study-like metric `1 + zz̄` on a rank-1 piece in degree `d`.
pub fn fs_metric(ring: &Arc<JetRing>, d: i32) -> HermitianMetric<Exact> {
    let bundle = GradedBundle::new([(d, 1)]);
    let mut blk = MatF::zeros(ring, 1, 1);
    blk[(0, 0)] = Form::from_jet(
        Jet::one(ring).add(&Jet::var(ring, Var::Z(0)).mul(&Jet::var(ring, Var::Zb(0)))),
    );
    let mut blocks = std::collections::BTreeMap::new();
    blocks.insert(d, blk);
    HermitianMetric::new(ring, &bundle, blocks).unwrap()
}

/// Random holomorphic jet (no `z̄` dependence).
fn holomorphic_jet(rng: &mut Rng, ring: &Arc<JetRing>, max_deg: u32) -> Jet<Exact> {
    let mut out = Jet::zero(ring);
    for _ in 0..2 {
        let mut m = crate::jet::Mono::unit(ring);
        m.z[0] = rng.below((max_deg + 1) as u64) as u8;
        out = out.add(&Jet::monomial(ring, m, rng.scalar()));
    }
    out
}

/// A flat seed: a holomorphic degree-raising chain with vanishing square.
fn flat_seed(rng: &mut Rng, ring: &Arc<JetRing>) -> CohesiveModule<Exact> {
    match rng.below(3) {
        0 => {
            // two-term, ranks up to 2
            let r0 = 1 + rng.below(2) as usize;
            let r1 = 1 + rng.below(2) as usize;
            let bundle = GradedBundle::new([(-1, r1), (0, r0)]);
            let mut tail = EndForm::zero_end(ring, &bundle);
            let mut blk = MatF::zeros(ring, r0, r1);
            for i in 0..r0 {
                for j in 0..r1 {
                    blk[(i, j)] = Form::from_jet(holomorphic_jet(rng, ring, 2));
                }
            }
            tail.set_block(0, -1, blk);
            CohesiveModule::new(bundle, tail).unwrap()
        }
        1 => {
            // three-term with composable square zero: u = (p,q)ᵀ, v = (−qg, pg)
            let bundle = GradedBundle::new([(-2, 1), (-1, 2), (0, 1)]);
            let p = holomorphic_jet(rng, ring, 1);
            let q = holomorphic_jet(rng, ring, 1);
            let g = holomorphic_jet(rng, ring, 1);
            let mut tail = EndForm::zero_end(ring, &bundle);
            let mut up = MatF::zeros(ring, 2, 1);
            up[(0, 0)] = Form::from_jet(p.clone());
            up[(1, 0)] = Form::from_jet(q.clone());
            tail.set_block(-1, -2, up);
            let mut down = MatF::zeros(ring, 1, 2);
            down[(0, 0)] = Form::from_jet(q.mul(&g).neg());
            down[(0, 1)] = Form::from_jet(p.mul(&g));
            tail.set_block(0, -1, down);
            CohesiveModule::new(bundle, tail).unwrap()
        }
        _ => koszul_module(ring, rng.below(3) as i64 - 1),
    }
}

/// Random gauge element `f = f₀ + f₁ + f₂` with `f_k ∈ A^{0,k}(End^{−k})`
/// and invertible `f₀`.
pub fn random_gauge(rng: &mut Rng, ring: &Arc<JetRing>, bundle: &GradedBundle) -> EndForm<Exact> {
    let mut f = EndForm::identity(ring, bundle);
    // f₀: identity plus chart-nilpotent block-diagonal noise
    for d in bundle.degrees() {
        let r = bundle.rank(d);
        let mut blk = f.block(d, d);
        for i in 0..r {
            for j in 0..r {
                let mut jet = rng.jet(ring, 2);
                let c0 = jet.constant_term();
                jet = jet.sub(&Jet::constant(ring, c0));
                blk[(i, j)] = blk[(i, j)].add(&Form::from_jet(jet));
            }
        }
        f.set_block(d, d, blk);
    }
    // f₁, f₂ in the allowed pattern
    f = f.add(&rng.endform_pq(ring, bundle, -1, 0, 1, 2));
    if ring.n >= 2 {
        f = f.add(&rng.endform_pq(ring, bundle, -2, 0, 2, 2));
    }
    f
}

/// Random flat Hermitian cohesive module: gauge-act on a flat seed, then
/// pick an independent random metric.
pub fn random_flat_pair(
    ring: &Arc<JetRing>,
    seed: u64,
) -> (CohesiveModule<Exact>, HermitianMetric<Exact>) {
    let mut rng = Rng::new(0xC0FFEE ^ seed.wrapping_mul(0x9e3779b97f4a7c15));
    let base = flat_seed(&mut rng, ring);
    let f = random_gauge(&mut rng, ring, &base.bundle);
    let tail = gauge_transform_tail(base.tail(), &f).expect("gauge transform");
    let module = CohesiveModule::new(base.bundle.clone(), tail).expect("gauge preserves flatness");
    let h = rng.metric(ring, &module.bundle);
    (module, h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_and_gauge_orbits_are_flat() {
        let ring = JetRing::new(1, 4);
        for seed in 0..20 {
            let (m, h) = random_flat_pair(&ring, seed);
            assert!(m.dbar.is_flat().unwrap().0);
            let _ = h;
        }
    }

    #[test]
    fn gauge_by_identity_and_scalars_fixes_the_tail() {
        let ring = JetRing::new(1, 4);
        let m = koszul_module(&ring, 1);
        let id = EndForm::identity(&ring, &m.bundle);
        assert_eq!(gauge_transform_tail(m.tail(), &id).unwrap(), *m.tail());
        let c = id.scale(&Exact::ratio(3, 2));
        assert_eq!(gauge_transform_tail(m.tail(), &c).unwrap(), *m.tail());
    }

    #[test]
    fn nontrivial_gauge_changes_the_tail_but_stays_flat() {
        let ring = JetRing::new(1, 4);
        let m = koszul_module(&ring, 0);
        let mut rng = Rng::new(77);
        let f = random_gauge(&mut rng, &ring, &m.bundle);
        let tail = gauge_transform_tail(m.tail(), &f).unwrap();
        let m2 = CohesiveModule::new(m.bundle.clone(), tail).unwrap();
        assert_ne!(m2.tail(), m.tail());
    }
}
