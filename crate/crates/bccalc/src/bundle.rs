//! Z-graded bundles and endomorphism-valued forms.
//!
//! Operators are stored in the right-module matrix representation: an
//! operator sends a frame section `e_j` to `Σ_i e_i ⊗ M_{ij}` and acts on
//! form-valued sections by right `A^{0,•}(X)`-linearity, so composition is
//! the plain block-matrix product with wedge on entries — no Koszul signs.
//! The signs then surface in exactly three places, each implemented once:
//!
//! * [`BlockMap::d_comm`] — the supercommutator of the base differential
//!   with a matrix twists entries by the parity of the *target* degree;
//! * [`EndForm::supertrace`] — diagonal blocks of odd form degree enter
//!   with weight `+1` instead of `(−1)^d` (the tensor/matrix conversion);
//! * [`EndForm::dress_param`] — attaching `dπ` to an operator-valued
//!   parameter one-form twists by the parity of the *source* degree.
//!
//! The operator oracle in `superconn` validates all three against direct
//! operator composition on basis sections.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{CalcError, Result};
use crate::form::{Diff, Form, FormMono};
use crate::jet::{Jet, JetRing};
use crate::scalar::Scalar;

/// Finitely supported degree → rank map, total rank ≥ 1.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct GradedBundle {
    ranks: BTreeMap<i32, usize>,
}

impl GradedBundle {
    pub fn new(ranks: impl IntoIterator<Item = (i32, usize)>) -> Self {
        let ranks: BTreeMap<i32, usize> = ranks.into_iter().filter(|&(_, r)| r > 0).collect();
        assert!(!ranks.is_empty(), "bundle must have positive total rank");
        GradedBundle { ranks }
    }

    pub fn rank(&self, d: i32) -> usize {
        self.ranks.get(&d).copied().unwrap_or(0)
    }

    pub fn degrees(&self) -> impl Iterator<Item = i32> + '_ {
        self.ranks.keys().copied()
    }

    pub fn ranks(&self) -> &BTreeMap<i32, usize> {
        &self.ranks
    }

    pub fn total_rank(&self) -> usize {
        self.ranks.values().sum()
    }

    /// Degrees shifted down by one: degree `d` content moves to slot `d−1`.
    pub fn shifted(&self) -> Self {
        GradedBundle {
            ranks: self.ranks.iter().map(|(&d, &r)| (d - 1, r)).collect(),
        }
    }

    /// Euler characteristic `Σ (−1)^d rank_d`.
    pub fn euler(&self) -> i64 {
        self.ranks
            .iter()
            .map(|(&d, &r)| if d.rem_euclid(2) == 0 { r as i64 } else { -(r as i64) })
            .sum()
    }
}

/// Dense matrix of forms.
#[derive(Clone, PartialEq, Debug)]
pub struct MatF<S: Scalar> {
    pub rows: usize,
    pub cols: usize,
    data: Vec<Form<S>>,
}

impl<S: Scalar> MatF<S> {
    pub fn zeros(ring: &Arc<JetRing>, rows: usize, cols: usize) -> Self {
        MatF {
            rows,
            cols,
            data: vec![Form::zero(ring); rows * cols],
        }
    }

    pub fn identity(ring: &Arc<JetRing>, n: usize) -> Self {
        let mut m = Self::zeros(ring, n, n);
        for i in 0..n {
            m[(i, i)] = Form::one(ring);
        }
        m
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|f| f.is_zero())
    }

    pub fn map(&self, f: impl Fn(&Form<S>) -> Form<S>) -> Self {
        MatF {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn try_map(&self, f: impl Fn(&Form<S>) -> Result<Form<S>>) -> Result<Self> {
        let mut data = Vec::with_capacity(self.data.len());
        for x in &self.data {
            data.push(f(x)?);
        }
        Ok(MatF {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        MatF {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a.add(b))
                .collect(),
        }
    }

    pub fn mul(&self, other: &Self, ring: &Arc<JetRing>) -> Self {
        assert_eq!(self.cols, other.rows, "matrix dimension mismatch");
        let mut out = Self::zeros(ring, self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = &other[(k, j)];
                    if b.is_zero() {
                        continue;
                    }
                    let p = a.wedge(b);
                    out[(i, j)] = out[(i, j)].add(&p);
                }
            }
        }
        out
    }
}

impl<S: Scalar> std::ops::Index<(usize, usize)> for MatF<S> {
    type Output = Form<S>;
    fn index(&self, (i, j): (usize, usize)) -> &Form<S> {
        &self.data[i * self.cols + j]
    }
}

impl<S: Scalar> std::ops::IndexMut<(usize, usize)> for MatF<S> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Form<S> {
        &mut self.data[i * self.cols + j]
    }
}

/// Block matrix of forms between graded bundles; `(target_degree,
/// source_degree)` indexes the stored (nonzero) blocks.
#[derive(Clone, Debug)]
pub struct BlockMap<S: Scalar> {
    pub ring: Arc<JetRing>,
    pub source: GradedBundle,
    pub target: GradedBundle,
    blocks: BTreeMap<(i32, i32), MatF<S>>,
}

/// Endomorphism-valued form: a block map from a bundle to itself.
pub type EndForm<S> = BlockMap<S>;

impl<S: Scalar> PartialEq for BlockMap<S> {
    fn eq(&self, other: &Self) -> bool {
        if self.source != other.source || self.target != other.target {
            return false;
        }
        let keys: std::collections::BTreeSet<_> = self
            .blocks
            .keys()
            .chain(other.blocks.keys())
            .copied()
            .collect();
        keys.into_iter().all(|k| {
            match (self.blocks.get(&k), other.blocks.get(&k)) {
                (Some(a), Some(b)) => a == b,
                (Some(a), None) => a.is_zero(),
                (None, Some(b)) => b.is_zero(),
                (None, None) => true,
            }
        })
    }
}

impl<S: Scalar> BlockMap<S> {
    pub fn zero(ring: &Arc<JetRing>, source: &GradedBundle, target: &GradedBundle) -> Self {
        BlockMap {
            ring: ring.clone(),
            source: source.clone(),
            target: target.clone(),
            blocks: BTreeMap::new(),
        }
    }

    pub fn zero_end(ring: &Arc<JetRing>, bundle: &GradedBundle) -> Self {
        Self::zero(ring, bundle, bundle)
    }

    pub fn identity(ring: &Arc<JetRing>, bundle: &GradedBundle) -> Self {
        let mut m = Self::zero_end(ring, bundle);
        for d in bundle.degrees() {
            m.blocks
                .insert((d, d), MatF::identity(ring, bundle.rank(d)));
        }
        m
    }

    /// Diagonal operator multiplying degree-`d` sections by `d`.
    pub fn grading_operator(ring: &Arc<JetRing>, bundle: &GradedBundle) -> Self {
        let mut m = Self::zero_end(ring, bundle);
        for d in bundle.degrees() {
            if d == 0 {
                continue;
            }
            let blk = MatF::identity(ring, bundle.rank(d))
                .map(|f| f.scale(&S::from_i64(d as i64)));
            m.blocks.insert((d, d), blk);
        }
        m
    }

    pub fn block(&self, target: i32, source: i32) -> MatF<S> {
        self.blocks.get(&(target, source)).cloned().unwrap_or_else(|| {
            MatF::zeros(&self.ring, self.target.rank(target), self.source.rank(source))
        })
    }

    pub fn set_block(&mut self, target: i32, source: i32, blk: MatF<S>) {
        assert_eq!(blk.rows, self.target.rank(target), "block row mismatch");
        assert_eq!(blk.cols, self.source.rank(source), "block col mismatch");
        if blk.is_zero() {
            self.blocks.remove(&(target, source));
        } else {
            self.blocks.insert((target, source), blk);
        }
    }

    pub fn set_entry(&mut self, target: i32, source: i32, i: usize, j: usize, f: Form<S>) {
        let mut blk = self.block(target, source);
        blk[(i, j)] = f;
        self.set_block(target, source, blk);
    }

    pub fn entry(&self, target: i32, source: i32, i: usize, j: usize) -> Form<S> {
        self.block(target, source)[(i, j)].clone()
    }

    pub fn nonzero_blocks(&self) -> impl Iterator<Item = (&(i32, i32), &MatF<S>)> {
        self.blocks.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.blocks.values().all(|b| b.is_zero())
    }

    pub fn max_magnitude(&self) -> f64 {
        self.blocks
            .values()
            .flat_map(|b| b.data.iter())
            .map(|f| f.max_magnitude())
            .fold(0.0, f64::max)
    }

    pub fn min_valid_order(&self) -> Option<u32> {
        self.blocks
            .values()
            .flat_map(|b| b.data.iter())
            .filter_map(|f| f.min_valid_order())
            .min()
    }

    fn normalized(mut self) -> Self {
        self.blocks.retain(|_, b| !b.is_zero());
        self
    }

    pub fn add(&self, other: &Self) -> Self {
        assert!(
            self.source == other.source && self.target == other.target,
            "bundle mismatch in block map addition"
        );
        let mut out = self.clone();
        for (&k, b) in &other.blocks {
            let cur = out.block(k.0, k.1);
            out.set_block(k.0, k.1, cur.add(b));
        }
        out.normalized()
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        self.map_entries(|f| f.neg())
    }

    pub fn scale(&self, c: &S) -> Self {
        self.map_entries(|f| f.scale(c))
    }

    pub fn scale_jet(&self, j: &Jet<S>) -> Self {
        self.map_entries(|f| f.scale_jet(j))
    }

    /// Left wedge by a scalar form on every entry.
    pub fn scale_form(&self, w: &Form<S>) -> Self {
        self.map_entries(|f| w.wedge(f))
    }

    pub fn map_entries(&self, f: impl Fn(&Form<S>) -> Form<S>) -> Self {
        BlockMap {
            ring: self.ring.clone(),
            source: self.source.clone(),
            target: self.target.clone(),
            blocks: self
                .blocks
                .iter()
                .map(|(&k, b)| (k, b.map(&f)))
                .collect(),
        }
        .normalized()
    }

    pub fn try_map_entries(&self, f: impl Fn(&Form<S>) -> Result<Form<S>>) -> Result<Self> {
        let mut blocks = BTreeMap::new();
        for (&k, b) in &self.blocks {
            blocks.insert(k, b.try_map(&f)?);
        }
        Ok(BlockMap {
            ring: self.ring.clone(),
            source: self.source.clone(),
            target: self.target.clone(),
            blocks,
        }
        .normalized())
    }

    /// Composition: plain block-matrix product with wedge on entries.
    pub fn mul(&self, other: &Self) -> Self {
        assert!(
            self.source == other.target,
            "bundle mismatch in block map composition"
        );
        let mut out = Self::zero(&self.ring, &other.source, &self.target);
        for (&(a, b), lhs) in &self.blocks {
            for (&(b2, c), rhs) in &other.blocks {
                if b != b2 {
                    continue;
                }
                let prod = lhs.mul(rhs, &self.ring);
                if prod.is_zero() {
                    continue;
                }
                let cur = out.block(a, c);
                out.set_block(a, c, cur.add(&prod));
            }
        }
        out
    }

    pub fn pow(&self, k: u32) -> Self {
        assert!(self.source == self.target, "powers need an endomorphism");
        let mut acc = Self::identity(&self.ring, &self.source);
        for _ in 0..k {
            acc = acc.mul(self);
        }
        acc
    }

    /// Splits into (even, odd) total-degree parts; total degree of a term in
    /// block `(a,b)` is its form degree plus the endomorphism degree `a−b`.
    pub fn parity_split(&self) -> (Self, Self) {
        let mut even = Self::zero(&self.ring, &self.source, &self.target);
        let mut odd = Self::zero(&self.ring, &self.source, &self.target);
        for (&(a, b), blk) in &self.blocks {
            let end_parity = (a - b).rem_euclid(2) as u32;
            let mut e = MatF::zeros(&self.ring, blk.rows, blk.cols);
            let mut o = MatF::zeros(&self.ring, blk.rows, blk.cols);
            for i in 0..blk.rows {
                for j in 0..blk.cols {
                    let (fe, fo) = blk[(i, j)].parity_split();
                    // form-even + end-even, or form-odd + end-odd ⇒ total even
                    if end_parity == 0 {
                        e[(i, j)] = fe;
                        o[(i, j)] = fo;
                    } else {
                        e[(i, j)] = fo;
                        o[(i, j)] = fe;
                    }
                }
            }
            even.set_block(a, b, e);
            odd.set_block(a, b, o);
        }
        (even.normalized(), odd.normalized())
    }

    /// Supercommutator `[A,B] = AB − (−1)^{‖A‖‖B‖}BA`, extended bilinearly
    /// over total-degree-homogeneous parts.
    pub fn supercommutator(&self, other: &Self) -> Self {
        let (ae, ao) = self.parity_split();
        let (be, bo) = other.parity_split();
        let mut out = self.mul(other);
        // (−1)^{‖A‖‖B‖} BA: sign −1 only for odd·odd
        out = out.sub(&be.mul(&ae));
        out = out.sub(&be.mul(&ao));
        out = out.sub(&bo.mul(&ae));
        out = out.add(&bo.mul(&ao));
        out
    }

    /// The supercommutator of the base differential with this operator,
    /// in coefficients: entries differentiate with a sign from the parity
    /// of the target degree.
    pub fn d_comm(&self, which: Diff) -> Result<Self> {
        let mut blocks = BTreeMap::new();
        for (&(a, b), blk) in &self.blocks {
            let flip = a.rem_euclid(2) == 1;
            let nb = blk.try_map(|f| {
                let df = f.d(which)?;
                Ok(if flip { df.neg() } else { df })
            })?;
            blocks.insert((a, b), nb);
        }
        Ok(BlockMap {
            ring: self.ring.clone(),
            source: self.source.clone(),
            target: self.target.clone(),
            blocks,
        }
        .normalized())
    }

    /// Plain entry-wise parameter derivative (no form attached, no twist):
    /// `d/dt` of a `t`-family of operators.
    pub fn param_derivative(&self, j: usize) -> Result<Self> {
        self.try_map_entries(|f| f.try_map_jets(|jet| jet.derivative(crate::jet::Var::Param(j))))
    }

    /// Attaches `dπ_j` to an operator-valued parameter one-form: entries of
    /// source degree `b` pick up `(−1)^b`, the tensor→matrix conversion.
    pub fn dress_param(&self, j: usize) -> Self {
        let dpi = Form::dparam(&self.ring, j);
        let mut blocks = BTreeMap::new();
        for (&(a, b), blk) in &self.blocks {
            let flip = b.rem_euclid(2) == 1;
            let nb = blk.map(|f| {
                let w = f.wedge(&dpi);
                if flip {
                    w.neg()
                } else {
                    w
                }
            });
            blocks.insert((a, b), nb);
        }
        BlockMap {
            ring: self.ring.clone(),
            source: self.source.clone(),
            target: self.target.clone(),
            blocks,
        }
        .normalized()
    }

    /// Inverse of a gauge-type element: an invertible function part on the
    /// diagonal blocks plus a remainder of strictly positive form degree
    /// (which is nilpotent), inverted by a finite Neumann series.
    pub fn invert_gauge(&self) -> Result<Self> {
        assert!(self.source == self.target, "inverse needs an endomorphism");
        let mut m0 = Self::zero_end(&self.ring, &self.source);
        for d in self.source.degrees() {
            let blk = self.block(d, d);
            let funcs = blk.map(|f| {
                Form::from_jet(f.coeff(&FormMono::SCALAR))
            });
            m0.set_block(d, d, funcs);
        }
        let n = self.sub(&m0);
        for (_, blk) in n.nonzero_blocks() {
            for e in blk.data.iter() {
                if e.terms().any(|(m, _)| m.degree() == 0) {
                    return Err(CalcError::NotInvertible(
                        "gauge element has off-pattern form-degree-0 terms".into(),
                    ));
                }
            }
        }
        let mut m0_inv = Self::zero_end(&self.ring, &self.source);
        for d in self.source.degrees() {
            m0_inv.set_block(d, d, invert_function_matrix(&m0.block(d, d), &self.ring)?);
        }
        // (M₀ + N)⁻¹ = Σ (−M₀⁻¹N)^k · M₀⁻¹, a finite sum
        let step = m0_inv.mul(&n).neg();
        let mut acc = Self::identity(&self.ring, &self.source);
        let mut p = step.clone();
        let mut guard = 0;
        while !p.is_zero() {
            acc = acc.add(&p);
            p = p.mul(&step);
            guard += 1;
            assert!(guard <= 2 * self.ring.n + self.ring.params.len() + 2,
                "gauge remainder not nilpotent");
        }
        Ok(acc.mul(&m0_inv))
    }

    /// Star-transpose `M^☆`: block transpose with [`Form::star`] entries.
    /// This is the adjoint with respect to the identity metric.
    pub fn star_transpose(&self) -> Self {
        let mut out = Self::zero(&self.ring, &self.target, &self.source);
        for (&(a, b), blk) in &self.blocks {
            let mut nb = MatF::zeros(&self.ring, blk.cols, blk.rows);
            for i in 0..blk.rows {
                for j in 0..blk.cols {
                    nb[(j, i)] = blk[(i, j)].star();
                }
            }
            out.set_block(b, a, nb);
        }
        out
    }

    /// Splits by exotic degree `−p+q+d` (`d` the endomorphism degree).
    pub fn exotic_decompose(&self) -> BTreeMap<i32, Self> {
        let mut map: BTreeMap<i32, Self> = BTreeMap::new();
        for (&(a, b), blk) in &self.blocks {
            let end_deg = a - b;
            for i in 0..blk.rows {
                for j in 0..blk.cols {
                    for (mono, jet) in blk[(i, j)].terms() {
                        let ex = mono.exotic() + end_deg;
                        let target = map.entry(ex).or_insert_with(|| {
                            Self::zero(&self.ring, &self.source, &self.target)
                        });
                        let mut f = Form::zero(&self.ring);
                        f.insert(*mono, jet.clone());
                        let cur = target.entry(a, b, i, j).add(&f);
                        target.set_entry(a, b, i, j, cur);
                    }
                }
            }
        }
        map
    }

    pub fn map_scalars<T: Scalar>(
        &self,
        ring: &Arc<JetRing>,
        f: &impl Fn(&S) -> T,
    ) -> BlockMap<T> {
        let mut out = BlockMap::zero(ring, &self.source, &self.target);
        for (&(a, b), blk) in &self.blocks {
            out.set_block(a, b, MatF {
                rows: blk.rows,
                cols: blk.cols,
                data: blk.data.iter().map(|x| x.map_scalars(ring, f)).collect(),
            });
        }
        out
    }

    /// Re-expresses all entries in another ring by parameter name.
    pub fn transport(&self, ring: &Arc<JetRing>) -> Result<Self> {
        let mut out = Self::zero(ring, &self.source, &self.target);
        for (&(a, b), blk) in &self.blocks {
            out.set_block(a, b, blk.try_map(|f| f.transport(ring))?);
        }
        Ok(out)
    }
}

impl<S: Scalar> EndForm<S> {
    /// Quillen supertrace. Diagonal blocks contribute with weight
    /// `(−1)^{d(k+1)}` on their form-degree-`k` part: the classical
    /// `(−1)^d` on even form degrees, unsigned on odd ones.
    pub fn supertrace(&self) -> Form<S> {
        let mut out = Form::zero(&self.ring);
        for (&(a, b), blk) in &self.blocks {
            if a != b {
                continue;
            }
            let d_odd = a.rem_euclid(2) == 1;
            for i in 0..blk.rows.min(blk.cols) {
                let (even, odd) = blk[(i, i)].parity_split();
                out = out.add(&odd);
                out = out.add(&if d_odd { even.neg() } else { even });
            }
        }
        out
    }

    /// Metric adjoint `A* = H⁻¹ · A^☆ · H`; a conjugate-linear involution
    /// satisfying the pairing identity `h(As,t) = h(s,A*t)`.
    pub fn adjoint(&self, h: &HermitianMetric<S>) -> Result<Self> {
        assert!(self.source == h.bundle, "bundle mismatch in adjoint");
        let st = self.star_transpose();
        Ok(h.inverse_end()?.mul(&st).mul(&h.as_end()))
    }
}

/// Hermitian metric: block-diagonal, conjugate-transpose-symmetric matrices
/// of jets, positive at the basepoint.
#[derive(Debug)]
pub struct HermitianMetric<S: Scalar> {
    pub ring: Arc<JetRing>,
    pub bundle: GradedBundle,
    blocks: BTreeMap<i32, MatF<S>>,
    inverse: std::sync::OnceLock<BTreeMap<i32, MatF<S>>>,
}

impl<S: Scalar> Clone for HermitianMetric<S> {
    fn clone(&self) -> Self {
        let inverse = std::sync::OnceLock::new();
        if let Some(v) = self.inverse.get() {
            let _ = inverse.set(v.clone());
        }
        HermitianMetric {
            ring: self.ring.clone(),
            bundle: self.bundle.clone(),
            blocks: self.blocks.clone(),
            inverse,
        }
    }
}

impl<S: Scalar> HermitianMetric<S> {
    /// Builds and validates a metric from per-degree matrices of jets
    /// (given as degree-0 forms).
    pub fn new(
        ring: &Arc<JetRing>,
        bundle: &GradedBundle,
        blocks: BTreeMap<i32, MatF<S>>,
    ) -> Result<Self> {
        for d in bundle.degrees() {
            let blk = blocks
                .get(&d)
                .ok_or_else(|| CalcError::NotHermitian(format!("missing block for degree {d}")))?;
            if blk.rows != bundle.rank(d) || blk.cols != bundle.rank(d) {
                return Err(CalcError::NotHermitian(format!(
                    "block for degree {d} has wrong shape"
                )));
            }
            for i in 0..blk.rows {
                for j in 0..blk.cols {
                    let f = &blk[(i, j)];
                    if f.terms().any(|(m, _)| *m != FormMono::SCALAR) {
                        return Err(CalcError::NotHermitian(format!(
                            "degree {d} entry ({i},{j}) is not a function"
                        )));
                    }
                    let a = f.coeff(&FormMono::SCALAR);
                    let b = blk[(j, i)].coeff(&FormMono::SCALAR).conj();
                    if a != b {
                        return Err(CalcError::NotHermitian(format!(
                            "degree {d} entry ({i},{j}) ≠ conj of ({j},{i})"
                        )));
                    }
                }
            }
            check_positive_definite(blk, d)?;
        }
        Ok(HermitianMetric {
            ring: ring.clone(),
            bundle: bundle.clone(),
            blocks,
            inverse: std::sync::OnceLock::new(),
        })
    }

    pub fn identity(ring: &Arc<JetRing>, bundle: &GradedBundle) -> Self {
        let blocks = bundle
            .degrees()
            .map(|d| (d, MatF::identity(ring, bundle.rank(d))))
            .collect();
        HermitianMetric {
            ring: ring.clone(),
            bundle: bundle.clone(),
            blocks,
            inverse: std::sync::OnceLock::new(),
        }
    }

    pub fn block(&self, d: i32) -> &MatF<S> {
        &self.blocks[&d]
    }

    pub fn blocks(&self) -> &BTreeMap<i32, MatF<S>> {
        &self.blocks
    }

    /// The metric as a block-diagonal endomorphism-valued 0-form.
    pub fn as_end(&self) -> EndForm<S> {
        let mut m = EndForm::zero_end(&self.ring, &self.bundle);
        for (&d, blk) in &self.blocks {
            m.set_block(d, d, blk.clone());
        }
        m
    }

    fn inverse_blocks(&self) -> Result<&BTreeMap<i32, MatF<S>>> {
        if let Some(v) = self.inverse.get() {
            return Ok(v);
        }
        let mut inv = BTreeMap::new();
        for (&d, blk) in &self.blocks {
            inv.insert(d, invert_function_matrix(blk, &self.ring)?);
        }
        let _ = self.inverse.set(inv);
        Ok(self.inverse.get().unwrap())
    }

    /// `H⁻¹` as a block-diagonal endomorphism-valued 0-form.
    pub fn inverse_end(&self) -> Result<EndForm<S>> {
        let mut m = EndForm::zero_end(&self.ring, &self.bundle);
        for (&d, blk) in self.inverse_blocks()? {
            m.set_block(d, d, blk.clone());
        }
        Ok(m)
    }

    pub fn inverse_block(&self, d: i32) -> Result<MatF<S>> {
        Ok(self.inverse_blocks()?[&d].clone())
    }

    /// Direct sum with another metric over a combined bundle.
    pub fn direct_sum(&self, other: &Self, bundle: &GradedBundle) -> Result<Self> {
        let mut blocks = BTreeMap::new();
        for d in bundle.degrees() {
            let r1 = self.bundle.rank(d);
            let r2 = other.bundle.rank(d);
            assert_eq!(r1 + r2, bundle.rank(d), "direct sum rank mismatch");
            let mut blk = MatF::zeros(&self.ring, r1 + r2, r1 + r2);
            if r1 > 0 {
                let b1 = self.block(d);
                for i in 0..r1 {
                    for j in 0..r1 {
                        blk[(i, j)] = b1[(i, j)].clone();
                    }
                }
            }
            if r2 > 0 {
                let b2 = other.block(d);
                for i in 0..r2 {
                    for j in 0..r2 {
                        blk[(r1 + i, r1 + j)] = b2[(i, j)].clone();
                    }
                }
            }
            blocks.insert(d, blk);
        }
        HermitianMetric::new(&self.ring, bundle, blocks)
    }

    /// Metric transported to the shifted bundle.
    pub fn shifted(&self) -> Self {
        HermitianMetric {
            ring: self.ring.clone(),
            bundle: self.bundle.shifted(),
            blocks: self.blocks.iter().map(|(&d, b)| (d - 1, b.clone())).collect(),
            inverse: std::sync::OnceLock::new(),
        }
    }

    pub fn map_jets(&self, f: impl Fn(&Jet<S>) -> Jet<S>) -> Result<Self> {
        let blocks = self
            .blocks
            .iter()
            .map(|(&d, b)| {
                (
                    d,
                    b.map(|form| {
                        Form::from_jet(f(&form.coeff(&FormMono::SCALAR)))
                    }),
                )
            })
            .collect();
        HermitianMetric::new(&self.ring, &self.bundle, blocks)
    }

    pub fn transport(&self, ring: &Arc<JetRing>) -> Result<Self> {
        let mut blocks = BTreeMap::new();
        for (&d, b) in &self.blocks {
            blocks.insert(d, b.try_map(|f| f.transport(ring))?);
        }
        HermitianMetric::new(ring, &self.bundle, blocks)
    }
}

/// Positive-definiteness of the constant term, checked in floating point by
/// pivoted LDL†: every pivot must exceed `1e-12` times the block magnitude.
fn check_positive_definite<S: Scalar>(blk: &MatF<S>, degree: i32) -> Result<()> {
    let n = blk.rows;
    if n == 0 {
        return Ok(());
    }
    let mut a = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    let mut scale: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let c = blk[(i, j)].coeff(&FormMono::SCALAR).constant_term().to_complex64();
            a[i][j] = c;
            scale = scale.max(c.norm());
        }
    }
    let tol = 1e-12 * scale.max(1.0);
    for k in 0..n {
        let pivot = a[k][k].re;
        if a[k][k].im.abs() > tol || pivot <= tol {
            return Err(CalcError::NotPositive(format!(
                "degree {degree} block: pivot {k} is {pivot:.3e}"
            )));
        }
        for i in (k + 1)..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                let akj = a[k][j];
                a[i][j] -= f * akj;
            }
        }
    }
    Ok(())
}

/// Inverse of a square matrix of functions (degree-0 forms) over the jet
/// ring, by Gauss-Jordan with pivoting on unit constant terms.
pub fn invert_function_matrix<S: Scalar>(m: &MatF<S>, ring: &Arc<JetRing>) -> Result<MatF<S>> {
    assert_eq!(m.rows, m.cols);
    let n = m.rows;
    let mut a: Vec<Vec<Jet<S>>> = (0..n)
        .map(|i| (0..n).map(|j| m[(i, j)].coeff(&FormMono::SCALAR)).collect())
        .collect();
    let mut inv: Vec<Vec<Jet<S>>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        Jet::one(ring)
                    } else {
                        Jet::zero(ring)
                    }
                })
                .collect()
        })
        .collect();
    for col in 0..n {
        // pivot: a row with invertible entry in this column
        let pivot = (col..n)
            .find(|&r| a[r][col].invert().is_ok())
            .ok_or_else(|| CalcError::NotInvertible(format!("matrix pivot in column {col}")))?;
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let piv_inv = a[col][col].invert()?;
        for j in 0..n {
            a[col][j] = a[col][j].mul(&piv_inv);
            inv[col][j] = inv[col][j].mul(&piv_inv);
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = a[r][col].clone();
            if f.is_zero() {
                continue;
            }
            for j in 0..n {
                a[r][j] = a[r][j].sub(&f.mul(&a[col][j]));
                inv[r][j] = inv[r][j].sub(&f.mul(&inv[col][j]));
            }
        }
    }
    let mut out = MatF::zeros(ring, n, n);
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] = Form::from_jet(inv[i][j].clone());
        }
    }
    Ok(out)
}

/// Form-valued section of a graded bundle: a column of forms per degree.
#[derive(Clone, Debug)]
pub struct SectionForm<S: Scalar> {
    pub ring: Arc<JetRing>,
    pub bundle: GradedBundle,
    comps: BTreeMap<i32, Vec<Form<S>>>,
}

impl<S: Scalar> PartialEq for SectionForm<S> {
    fn eq(&self, other: &Self) -> bool {
        self.bundle == other.bundle && self.sub(other).is_zero()
    }
}

impl<S: Scalar> SectionForm<S> {
    pub fn zero(ring: &Arc<JetRing>, bundle: &GradedBundle) -> Self {
        SectionForm {
            ring: ring.clone(),
            bundle: bundle.clone(),
            comps: BTreeMap::new(),
        }
    }

    /// Frame section `e_i` in degree `d`, with coefficient form `w`.
    pub fn frame(ring: &Arc<JetRing>, bundle: &GradedBundle, d: i32, i: usize, w: Form<S>) -> Self {
        let mut s = Self::zero(ring, bundle);
        s.set(d, i, w);
        s
    }

    pub fn set(&mut self, d: i32, i: usize, w: Form<S>) {
        let col = self
            .comps
            .entry(d)
            .or_insert_with(|| vec![Form::zero(&self.ring); self.bundle.rank(d)]);
        col[i] = w;
    }

    pub fn get(&self, d: i32, i: usize) -> Form<S> {
        self.comps
            .get(&d)
            .map(|c| c[i].clone())
            .unwrap_or_else(|| Form::zero(&self.ring))
    }

    pub fn components(&self) -> impl Iterator<Item = (i32, usize, &Form<S>)> {
        self.comps
            .iter()
            .flat_map(|(&d, col)| col.iter().enumerate().map(move |(i, f)| (d, i, f)))
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (d, i, f) in other.components() {
            let cur = out.get(d, i);
            out.set(d, i, cur.add(f));
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        let mut out = Self::zero(&self.ring, &self.bundle);
        for (d, i, f) in self.components() {
            out.set(d, i, f.neg());
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.components().all(|(_, _, f)| f.is_zero())
    }

    /// Right multiplication by a form: `s ∧ w` component-wise.
    pub fn wedge_right(&self, w: &Form<S>) -> Self {
        let mut out = Self::zero(&self.ring, &self.bundle);
        for (d, i, f) in self.components() {
            out.set(d, i, f.wedge(w));
        }
        out
    }

    /// Applies a block map by evaluation.
    pub fn apply_map(&self, m: &BlockMap<S>) -> Self {
        assert!(m.source == self.bundle, "bundle mismatch in evaluation");
        let mut out = Self::zero(&self.ring, &m.target);
        for (&(a, b), blk) in m.nonzero_blocks() {
            if let Some(col) = self.comps.get(&b) {
                for i in 0..blk.rows {
                    let mut acc = out.get(a, i);
                    for j in 0..blk.cols {
                        if !col[j].is_zero() && !blk[(i, j)].is_zero() {
                            acc = acc.add(&blk[(i, j)].wedge(&col[j]));
                        }
                    }
                    out.set(a, i, acc);
                }
            }
        }
        out
    }
}

/// Sesquilinear pairing `h(e⊗ω, f⊗η) = ω* ∧ h(e,f) ∧ η`, summed over
/// degrees (distinct degrees are orthogonal).
pub fn metric_pairing<S: Scalar>(
    s: &SectionForm<S>,
    t: &SectionForm<S>,
    h: &HermitianMetric<S>,
) -> Form<S> {
    assert!(s.bundle == h.bundle && t.bundle == h.bundle, "bundle mismatch");
    let mut out = Form::zero(&s.ring);
    for d in h.bundle.degrees() {
        let blk = h.block(d);
        for i in 0..blk.rows {
            let si = s.get(d, i);
            if si.is_zero() {
                continue;
            }
            let si_star = si.star();
            for j in 0..blk.cols {
                let tj = t.get(d, j);
                if tj.is_zero() || blk[(i, j)].is_zero() {
                    continue;
                }
                out = out.add(&si_star.wedge(&blk[(i, j)]).wedge(&tj));
            }
        }
    }
    out
}

/// Polynomial in one variable with scalar coefficients, `c₀ + c₁T + …`.
#[derive(Clone, Debug, PartialEq)]
pub struct Poly<S: Scalar>(pub Vec<S>);

impl<S: Scalar> Poly<S> {
    pub fn monomial(deg: usize) -> Self {
        let mut c = vec![S::zero(); deg + 1];
        c[deg] = S::one();
        Poly(c)
    }

    pub fn constant(c: S) -> Self {
        Poly(vec![c])
    }

    pub fn degree(&self) -> usize {
        self.0
            .iter()
            .rposition(|c| !c.is_zero())
            .unwrap_or(0)
    }

    /// Formal derivative.
    pub fn derivative(&self) -> Self {
        if self.0.len() <= 1 {
            return Poly(vec![S::zero()]);
        }
        Poly(
            self.0[1..]
                .iter()
                .enumerate()
                .map(|(k, c)| c.mul(&S::from_i64(k as i64 + 1)))
                .collect(),
        )
    }

    pub fn is_real(&self) -> bool {
        self.0.iter().all(|c| c.conj() == *c)
    }
}

/// `f(A) = Σ c_k A^k` by Horner evaluation.
pub fn series_eval<S: Scalar>(f: &Poly<S>, a: &EndForm<S>) -> EndForm<S> {
    let id = EndForm::identity(&a.ring, &a.source);
    let mut acc = EndForm::zero_end(&a.ring, &a.source);
    for c in f.0.iter().rev() {
        acc = a.mul(&acc).add(&id.scale(c));
    }
    acc
}

/// `g(A;B) = Σ_n c_n Σ_{i=1}^{n} A^{i−1} B A^{n−i}`, the derivative of
/// `g(A + tB)` at `t = 0` collected monomial-wise.
pub fn directional_eval<S: Scalar>(g: &Poly<S>, a: &EndForm<S>, b: &EndForm<S>) -> EndForm<S> {
    let deg = g.degree();
    let mut powers = Vec::with_capacity(deg.max(1));
    powers.push(EndForm::identity(&a.ring, &a.source));
    for k in 1..deg {
        let prev = powers[k - 1].clone();
        powers.push(prev.mul(a));
    }
    let mut out = EndForm::zero_end(&a.ring, &a.source);
    for (n, c) in g.0.iter().enumerate() {
        if n == 0 || c.is_zero() {
            continue;
        }
        for i in 1..=n {
            let term = powers[i - 1].mul(b).mul(&powers[n - i]);
            out = out.add(&term.scale(c));
        }
    }
    out
}

impl<S: Scalar> fmt::Display for BlockMap<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        for (&(a, b), blk) in &self.blocks {
            writeln!(f, "block ({a},{b}):")?;
            for i in 0..blk.rows {
                for j in 0..blk.cols {
                    if !blk[(i, j)].is_zero() {
                        writeln!(f, "  [{i},{j}] = {}", blk[(i, j)])?;
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randgen::Rng;
    use crate::scalar::Exact;

    type EF = EndForm<Exact>;

    fn ring() -> Arc<JetRing> {
        JetRing::new(1, 4)
    }

    fn two_term() -> GradedBundle {
        GradedBundle::new([(-1, 1), (0, 1)])
    }

    #[test]
    fn identity_is_neutral_and_grading_squares() {
        let r = ring();
        let b = GradedBundle::new([(0, 1), (1, 1)]);
        let mut rng = Rng::new(7);
        let a = rng.endform(&r, &b);
        let id = EF::identity(&r, &b);
        assert_eq!(id.mul(&a), a);
        assert_eq!(a.mul(&id), a);
        let n = EF::grading_operator(&r, &b);
        // N² on ranks {0:1, 1:1} is diag(0, 1)
        assert_eq!(n.mul(&n), n);
        // ranks {−1:2}: N = −Id₂
        let b2 = GradedBundle::new([(-1, 2)]);
        let n2 = EF::grading_operator(&r, &b2);
        assert_eq!(n2, EF::identity(&r, &b2).neg());
    }

    #[test]
    fn strict_upper_end_degree_is_nilpotent() {
        let r = ring();
        let b = GradedBundle::new([(-2, 1), (-1, 2), (0, 1)]);
        let mut rng = Rng::new(3);
        let a = rng
            .endform_pq(&r, &b, 1, 0, 0, 2)
            .add(&rng.endform_pq(&r, &b, 2, 0, 1, 2));
        // degree spread is 2, so A³ = 0
        assert!(a.pow(3).is_zero());
    }

    #[test]
    fn supercommutator_identities() {
        let r = ring();
        let b = two_term();
        let mut rng = Rng::new(11);
        // odd A: [A,A] = 2A²
        let a = rng
            .endform_pq(&r, &b, 1, 0, 0, 2)
            .add(&rng.endform_pq(&r, &b, 0, 0, 1, 2));
        assert_eq!(
            a.supercommutator(&a),
            a.mul(&a).scale(&Exact::from_int(2))
        );
        let id = EF::identity(&r, &b);
        let any = rng.endform(&r, &b);
        assert!(id.supercommutator(&any).is_zero());
    }

    #[test]
    fn graded_jacobi() {
        let r = ring();
        let b = two_term();
        for seed in 0..6 {
            let mut rng = Rng::new(100 + seed);
            // homogeneous total degrees so the signs are scalar
            let da = rng.below(2) as u32;
            let db = rng.below(2) as u32;
            let a = rng.endform_pq(&r, &b, 1, 0, da, 2);
            let bb = rng.endform_pq(&r, &b, -1, db, 0, 2);
            let c = rng.endform_pq(&r, &b, 0, 1, 1, 2);
            let na = (1 + da) % 2; // total degree parity of a
            let nb = (1 + db) % 2;
            let lhs = a.supercommutator(&bb.supercommutator(&c));
            let mut rhs = a.supercommutator(&bb).supercommutator(&c);
            let cross = bb.supercommutator(&a.supercommutator(&c));
            rhs = if na * nb % 2 == 1 {
                rhs.sub(&cross)
            } else {
                rhs.add(&cross)
            };
            assert_eq!(lhs, rhs, "Jacobi failed at seed {seed}");
        }
    }

    #[test]
    fn supertrace_examples() {
        let r = ring();
        let b = GradedBundle::new([(0, 2), (1, 1)]);
        let id = EF::identity(&r, &b);
        assert_eq!(id.supertrace(), Form::one(&r));
        let b2 = GradedBundle::new([(0, 1), (1, 1)]);
        let n = EF::grading_operator(&r, &b2);
        assert_eq!(
            n.supertrace(),
            Form::from_jet(Jet::from_i64(&r, -1))
        );
    }

    #[test]
    fn supertrace_kills_supercommutators() {
        let r = ring();
        let b = GradedBundle::new([(-1, 2), (0, 1), (1, 1)]);
        for seed in 0..25 {
            let mut rng = Rng::new(2000 + seed);
            let a = rng.endform(&r, &b);
            let c = rng.endform(&r, &b);
            let br = a.supercommutator(&c);
            assert!(
                br.supertrace().is_zero(),
                "supertrace of a bracket survived at seed {seed}"
            );
        }
    }

    #[test]
    fn exotic_grading_is_multiplicative() {
        let r = ring();
        let b = two_term();
        let mut rng = Rng::new(5);
        for _ in 0..10 {
            let a = rng.endform(&r, &b);
            let c = rng.endform(&r, &b);
            let pa = a.exotic_decompose();
            let pc = c.exotic_decompose();
            for (&i, ai) in &pa {
                for (&j, cj) in &pc {
                    let prod = ai.mul(cj);
                    for (&k, comp) in &prod.exotic_decompose() {
                        assert!(
                            comp.is_zero() || k == i + j,
                            "exotic degree leak: {i}+{j} → {k}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn adjoint_is_an_involution_and_reverses_products() {
        let r = ring();
        let b = two_term();
        for seed in 0..10 {
            let mut rng = Rng::new(300 + seed);
            let h = rng.metric(&r, &b);
            let a = rng.endform(&r, &b);
            let c = rng.endform(&r, &b);
            let ad = |x: &EF| x.adjoint(&h).unwrap();
            assert_eq!(ad(&ad(&a)), a, "involution failed at seed {seed}");
            assert_eq!(
                ad(&a.mul(&c)),
                ad(&c).mul(&ad(&a)),
                "product reversal failed at seed {seed}"
            );
            assert_eq!(ad(&EF::identity(&r, &b)), EF::identity(&r, &b));
        }
    }

    #[test]
    fn adjoint_pairing_identity() {
        let r = ring();
        let b = two_term();
        for seed in 0..10 {
            let mut rng = Rng::new(400 + seed);
            let h = rng.metric(&r, &b);
            let a = rng.endform(&r, &b);
            let mut s = SectionForm::zero(&r, &b);
            let mut t = SectionForm::zero(&r, &b);
            for d in b.degrees() {
                s.set(d, 0, rng.form(&r, 2));
                t.set(d, 0, rng.form(&r, 2));
            }
            let lhs = metric_pairing(&s.apply_map(&a), &t, &h);
            let rhs = metric_pairing(&s, &t.apply_map(&a.adjoint(&h).unwrap()), &h);
            assert_eq!(lhs, rhs, "pairing identity failed at seed {seed}");
        }
    }

    #[test]
    fn pairing_examples() {
        let r = ring();
        let b = GradedBundle::new([(0, 1)]);
        let h = HermitianMetric::identity(&r, &b);
        let e = SectionForm::frame(&r, &b, 0, 0, Form::one(&r));
        assert_eq!(metric_pairing(&e, &e, &h), Form::one(&r));
        // h(e⊗dz, f) = (dz)* h(e,f) = −dz̄
        let edz = SectionForm::frame(&r, &b, 0, 0, Form::dz(&r, 0));
        assert_eq!(metric_pairing(&edz, &e, &h), Form::dzb(&r, 0).neg());
        // sesquilinearity over forms: h(s∧ω, t) = ω* ∧ h(s,t)
        let mut rng = Rng::new(9);
        let w = rng.form(&r, 2);
        let s = SectionForm::frame(&r, &b, 0, 0, rng.form(&r, 2));
        let t = SectionForm::frame(&r, &b, 0, 0, rng.form(&r, 2));
        assert_eq!(
            metric_pairing(&s.wedge_right(&w), &t, &h),
            w.star().wedge(&metric_pairing(&s, &t, &h))
        );
        assert_eq!(
            metric_pairing(&s, &t.wedge_right(&w), &h),
            metric_pairing(&s, &t, &h).wedge(&w)
        );
    }

    #[test]
    fn pairing_conjugate_symmetry() {
        let r = ring();
        let b = two_term();
        for seed in 0..6 {
            let mut rng = Rng::new(500 + seed);
            let h = rng.metric(&r, &b);
            let mut s = SectionForm::zero(&r, &b);
            let mut t = SectionForm::zero(&r, &b);
            for d in b.degrees() {
                s.set(d, 0, rng.form(&r, 2));
                t.set(d, 0, rng.form(&r, 2));
            }
            assert_eq!(
                metric_pairing(&s, &t, &h),
                metric_pairing(&t, &s, &h).star()
            );
        }
    }

    #[test]
    fn series_and_directional_evaluation() {
        let r = ring();
        let b = two_term();
        let mut rng = Rng::new(21);
        let a = rng.endform(&r, &b);
        let c = rng.endform(&r, &b);
        let t2 = Poly::<Exact>::monomial(2);
        assert_eq!(series_eval(&t2, &a), a.mul(&a));
        assert_eq!(
            directional_eval(&t2, &a, &c),
            a.mul(&c).add(&c.mul(&a))
        );
        let t3 = Poly::<Exact>::monomial(3);
        let expect = a.mul(&a).mul(&c).add(&a.mul(&c).mul(&a)).add(&c.mul(&a).mul(&a));
        assert_eq!(directional_eval(&t3, &a, &c), expect);
    }

    #[test]
    fn grading_commutator_reads_end_degree() {
        let r = ring();
        let b = GradedBundle::new([(-1, 1), (0, 2), (1, 1)]);
        let n = EF::grading_operator(&r, &b);
        let mut rng = Rng::new(31);
        for d in [-2i32, -1, 0, 1, 2] {
            let a = rng.endform_pq(&r, &b, d, 0, 1, 2);
            let br = n.supercommutator(&a);
            assert_eq!(br, a.scale(&Exact::from_int(d as i64)), "end degree {d}");
        }
    }

    #[test]
    fn metric_validation_and_inverse() {
        let r = ring();
        let b = GradedBundle::new([(0, 2)]);
        // non-Hermitian is rejected
        let mut blk = MatF::<Exact>::identity(&r, 2);
        blk[(0, 1)] = Form::from_jet(Jet::var(&r, crate::jet::Var::Z(0)));
        let mut blocks = BTreeMap::new();
        blocks.insert(0, blk.clone());
        assert!(HermitianMetric::new(&r, &b, blocks).is_err());
        // Hermitian completion is accepted and inverts
        blk[(1, 0)] = Form::from_jet(Jet::var(&r, crate::jet::Var::Zb(0)));
        let mut blocks = BTreeMap::new();
        blocks.insert(0, blk);
        let h = HermitianMetric::new(&r, &b, blocks).unwrap();
        let prod = h.as_end().mul(&h.inverse_end().unwrap());
        assert_eq!(prod, EndForm::identity(&r, &b));
        // non-positive is rejected
        let mut blk = MatF::<Exact>::identity(&r, 2);
        blk[(1, 1)] = Form::from_jet(Jet::from_i64(&r, -1));
        let mut blocks = BTreeMap::new();
        blocks.insert(0, blk);
        assert!(matches!(
            HermitianMetric::new(&r, &b, blocks),
            Err(CalcError::NotPositive(_))
        ));
    }
}
