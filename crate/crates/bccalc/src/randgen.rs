//! Deterministic pseudo-random inputs for tests and randomized suites.
//!
//! SplitMix64 keeps the corpora reproducible across runs and platforms;
//! coefficients are small Gaussian rationals so exact arithmetic stays fast.

use std::sync::Arc;

use crate::bundle::{EndForm, GradedBundle, HermitianMetric, MatF};
use crate::form::{Form, FormMono};
use crate::jet::{Jet, JetRing, Mono};
use crate::scalar::{Exact, Scalar};

#[derive(Clone)]
pub struct Rng(u64);

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng(seed.wrapping_add(0x9e3779b97f4a7c15))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    pub fn below(&mut self, n: u64) -> u64 {
        self.next_u64() % n.max(1)
    }

    pub fn chance(&mut self, num: u64, den: u64) -> bool {
        self.below(den) < num
    }

    /// Small nonzero Gaussian rational: numerators in ±3, denominators in 1..=2.
    pub fn scalar(&mut self) -> Exact {
        loop {
            let re = self.below(7) as i64 - 3;
            let im = if self.chance(1, 3) {
                self.below(5) as i64 - 2
            } else {
                0
            };
            let den = 1 + self.below(2) as i64;
            if re != 0 || im != 0 {
                let re_part = Exact::ratio(re, den);
                let im_part = Exact::ratio(im, den).mul(&Exact::imaginary_unit());
                return re_part.add(&im_part);
            }
        }
    }

    /// Random jet with chart degree ≤ `max_deg` and a handful of terms.
    pub fn jet(&mut self, ring: &Arc<JetRing>, max_deg: u32) -> Jet<Exact> {
        let mut out = Jet::zero(ring);
        let terms = 1 + self.below(3);
        for _ in 0..terms {
            let mut m = Mono::unit(ring);
            let mut budget = max_deg.min(ring.order);
            for i in 0..ring.n {
                let e = self.below((budget + 1) as u64) as u8;
                m.z[i] = e;
                budget -= e as u32;
                let e = self.below((budget + 1) as u64) as u8;
                m.zb[i] = e;
                budget -= e as u32;
            }
            out = out.add(&Jet::monomial(ring, m, self.scalar()));
        }
        out
    }

    /// Random chart form (no parameter generators) with terms of the given
    /// bidegree.
    pub fn form_pq(&mut self, ring: &Arc<JetRing>, p: u32, q: u32, max_deg: u32) -> Form<Exact> {
        let mut out = Form::zero(ring);
        for z in 0u16..(1 << ring.n) {
            for zb in 0u16..(1 << ring.n) {
                if z.count_ones() == p && zb.count_ones() == q && self.chance(2, 3) {
                    out.insert(
                        FormMono { z, zb, par: 0 },
                        self.jet(ring, max_deg),
                    );
                }
            }
        }
        out
    }

    /// Random mixed-degree chart form.
    pub fn form(&mut self, ring: &Arc<JetRing>, max_deg: u32) -> Form<Exact> {
        let mut out = Form::zero(ring);
        let n = ring.n as u32;
        for _ in 0..3 {
            let p = self.below((n + 1) as u64) as u32;
            let q = self.below((n + 1) as u64) as u32;
            out = out.add(&self.form_pq(ring, p, q, max_deg));
        }
        out
    }

    /// Random endomorphism-valued form with entries of bidegree `(p,q)` in
    /// the blocks allowed by `end_deg`.
    pub fn endform_pq(
        &mut self,
        ring: &Arc<JetRing>,
        bundle: &GradedBundle,
        end_deg: i32,
        p: u32,
        q: u32,
        max_deg: u32,
    ) -> EndForm<Exact> {
        let mut out = EndForm::zero_end(ring, bundle);
        let degs: Vec<i32> = bundle.degrees().collect();
        for &b in &degs {
            let a = b + end_deg;
            if bundle.rank(a) == 0 {
                continue;
            }
            let mut blk = MatF::zeros(ring, bundle.rank(a), bundle.rank(b));
            for i in 0..blk.rows {
                for j in 0..blk.cols {
                    if self.chance(2, 3) {
                        blk[(i, j)] = self.form_pq(ring, p, q, max_deg);
                    }
                }
            }
            out.set_block(a, b, blk);
        }
        out
    }

    /// Random endomorphism-valued form over a few (end degree, p, q) slots.
    pub fn endform(&mut self, ring: &Arc<JetRing>, bundle: &GradedBundle) -> EndForm<Exact> {
        let degs: Vec<i32> = bundle.degrees().collect();
        let span = degs.iter().max().unwrap() - degs.iter().min().unwrap();
        let mut out = EndForm::zero_end(ring, bundle);
        for _ in 0..3 {
            let end_deg = self.below((2 * span + 1).max(1) as u64) as i32 - span;
            let p = self.below((ring.n + 1) as u64) as u32;
            let q = self.below((ring.n + 1) as u64) as u32;
            out = out.add(&self.endform_pq(ring, bundle, end_deg, p, q, 2));
        }
        out
    }

    /// Random Hermitian metric, positive at the basepoint: `c·I + N + N^☆`
    /// with `N` random and `c` large enough.
    pub fn metric(&mut self, ring: &Arc<JetRing>, bundle: &GradedBundle) -> HermitianMetric<Exact> {
        let mut blocks = std::collections::BTreeMap::new();
        for d in bundle.degrees() {
            let r = bundle.rank(d);
            let mut n = MatF::zeros(ring, r, r);
            for i in 0..r {
                for j in 0..r {
                    // keep the constant term small so c·I dominates
                    let mut jet = self.jet(ring, 2);
                    let c0 = jet.constant_term();
                    jet = jet.sub(&Jet::constant(ring, c0));
                    let small = self.scalar().mul(&Exact::ratio(1, 4));
                    jet = jet.add(&Jet::constant(ring, small));
                    n[(i, j)] = Form::from_jet(jet);
                }
            }
            let mut blk = MatF::zeros(ring, r, r);
            for i in 0..r {
                for j in 0..r {
                    let sym = n[(i, j)].add(&n[(j, i)].map_jets(|x| x.conj()));
                    blk[(i, j)] = sym;
                    if i == j {
                        blk[(i, j)] = blk[(i, j)]
                            .add(&Form::from_jet(Jet::from_i64(ring, 8 + self.below(4) as i64)));
                    }
                }
            }
            blocks.insert(d, blk);
        }
        HermitianMetric::new(ring, bundle, blocks).expect("constructed metric is Hermitian positive")
    }
}
