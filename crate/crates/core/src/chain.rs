//! Periodic brickwork chain of `2L` sites.
//!
//! The U layer acts on bonds `(2x, 2x+1)` and the V layer on bonds
//! `(2x+1, 2x+2 mod 2L)`, with the gate's first factor on the odd site. One
//! Floquet period conjugates by the U layer first and the V layer second,
//! which is the same operator as `Π V^{⊗L} Π^{-1} U^{⊗L}`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};
use crate::gates::{Gate, DEFAULT_GATE_TOL};
use crate::limits::Limits;
use crate::tensor::{conjugate_two_site, ipow, left_two_site, upow, EmbeddedOperator, LocalOperator, ONE, ZERO};

/// Coefficients below this magnitude are treated as absent when reading off
/// supports.
pub const SUPPORT_TOL: f64 = 1e-10;

/// `Π_l |i_0 i_1 … i_{l-1}⟩ = |i_1 … i_{l-1} i_0⟩`.
pub fn translation_op(l: usize, d: usize) -> Result<DMatrix<C64>> {
    if l < 2 {
        return contract(format!("translation needs at least 2 sites, got {l}"));
    }
    Limits::default().check_chain("translation operator", ipow(d, l))?;
    let n = upow(d, l);
    let high = upow(d, l - 1);
    let mut m = DMatrix::zeros(n, n);
    for input in 0..n {
        let out = (input % high) * d + input / high;
        m[(out, input)] = ONE;
    }
    Ok(m)
}

/// One Floquet period `𝕌` of the brickwork circuit on `2L` sites.
#[derive(Debug)]
pub struct FloquetOperator {
    u: Gate,
    v: Gate,
    half_len: usize,
    limits: Limits,
    matrix: OnceLock<DMatrix<C64>>,
}

pub fn floquet(u: &Gate, v: &Gate, half_len: usize) -> Result<FloquetOperator> {
    FloquetOperator::new(u, v, half_len)
}

impl FloquetOperator {
    pub fn new(u: &Gate, v: &Gate, half_len: usize) -> Result<Self> {
        Self::with_limits(u, v, half_len, Limits::default())
    }

    pub fn with_limits(u: &Gate, v: &Gate, half_len: usize, limits: Limits) -> Result<Self> {
        if half_len < 2 {
            return contract(format!("chain half-length must be at least 2, got {half_len}"));
        }
        if u.d() != v.d() {
            return contract("U and V act on different qudit dimensions");
        }
        for (g, name) in [(u, "U"), (v, "V")] {
            if !g.is_unitary(DEFAULT_GATE_TOL) {
                return contract(format!("{name} is not unitary (residual {:.3e})", g.unitarity_residual()));
            }
        }
        limits.check_chain("Floquet operator", ipow(u.d(), 2 * half_len))?;
        Ok(Self { u: u.clone(), v: v.clone(), half_len, limits, matrix: OnceLock::new() })
    }

    pub fn d(&self) -> usize {
        self.u.d()
    }

    pub fn half_len(&self) -> usize {
        self.half_len
    }

    pub fn chain_len(&self) -> usize {
        2 * self.half_len
    }

    pub fn gates(&self) -> (&Gate, &Gate) {
        (&self.u, &self.v)
    }

    pub fn limits(&self) -> &Limits {
        &self.limits
    }

    /// Dense `d^{2L} × d^{2L}` matrix, built on first use.
    pub fn matrix(&self) -> &DMatrix<C64> {
        self.matrix.get_or_init(|| {
            let n = self.chain_len();
            let d = self.d();
            let dim = upow(d, n);
            let mut m = DMatrix::identity(dim, dim);
            for k in 0..self.half_len {
                left_two_site(&mut m, d, n, 2 * k, 2 * k + 1, self.u.matrix());
            }
            // Π V^{⊗L} Π^{-1} is V on bonds (2k-1, 2k)
            for k in 0..self.half_len {
                left_two_site(&mut m, d, n, (2 * k + n - 1) % n, 2 * k, self.v.matrix());
            }
            m
        })
    }

    /// Bonds `(p, q)` of one layer on the full chain.
    fn layer_bonds(&self, second: bool) -> Vec<(usize, usize)> {
        let n = self.chain_len();
        (0..self.half_len).map(|k| if second { (2 * k + 1, (2 * k + 2) % n) } else { (2 * k, 2 * k + 1) }).collect()
    }

    /// `𝕌 A 𝕌†` for a full-chain operator, applied bond by bond.
    pub fn conjugate_full(&self, a: &LocalOperator) -> Result<LocalOperator> {
        let n = self.chain_len();
        if a.width() != n || a.d() != self.d() {
            return contract(format!("operator of width {} is not a chain operator", a.width()));
        }
        let mut m = a.matrix().clone();
        for (p, q) in self.layer_bonds(false) {
            conjugate_two_site(&mut m, self.d(), n, p, q, self.u.matrix());
        }
        for (p, q) in self.layer_bonds(true) {
            conjugate_two_site(&mut m, self.d(), n, p, q, self.v.matrix());
        }
        LocalOperator::new(self.d(), n, m)
    }

    /// One period applied to a windowed operator.
    pub fn step(&self, w: &ChainWindow) -> Result<ChainWindow> {
        let n = self.chain_len();
        let d = self.d();
        if w.chain_len != n || w.op.d() != d {
            return contract("window does not belong to this chain");
        }
        let mut cur = w.widened(2, &self.limits)?;
        if cur.is_full() {
            let op = self.conjugate_full(&cur.op)?;
            return Ok(ChainWindow { start: 0, op, chain_len: n });
        }
        let width = cur.op.width();
        for (layer, gate) in [(0usize, &self.u), (1, &self.v)] {
            let m = cur.op.matrix_mut();
            for k in 0..width.saturating_sub(1) {
                if (cur.start + k) % 2 == layer {
                    conjugate_two_site(m, d, width, k, k + 1, gate.matrix());
                }
            }
        }
        Ok(cur)
    }

    /// `t` periods, trimming identity edges after each one.
    pub fn evolve(&self, w: &ChainWindow, t: usize) -> Result<ChainWindow> {
        let mut cur = w.clone();
        for _ in 0..t {
            cur = self.step(&cur)?.trimmed();
        }
        Ok(cur)
    }
}

/// `𝕌^t A (𝕌†)^t` as a full-chain operator.
pub fn heisenberg(f: &FloquetOperator, op: &EmbeddedOperator, t: usize) -> Result<LocalOperator> {
    if op.chain_len != f.chain_len() {
        return contract("embedded operator lives on a different chain");
    }
    let w = ChainWindow::from_embedded(op);
    f.evolve(&w, t)?.materialize(f.limits())
}

/// A chain operator stored on the smallest window that contains its
/// support; the window covers the full chain (with `start = 0`) once it
/// would wrap onto itself.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainWindow {
    pub start: usize,
    pub op: LocalOperator,
    pub chain_len: usize,
}

impl ChainWindow {
    pub fn from_embedded(e: &EmbeddedOperator) -> Self {
        Self { start: e.x, op: e.inner.clone(), chain_len: e.chain_len }
    }

    pub fn new(op: LocalOperator, start: usize, chain_len: usize) -> Result<Self> {
        Ok(Self::from_embedded(&EmbeddedOperator::new(op, start, chain_len)?))
    }

    pub fn is_full(&self) -> bool {
        self.op.width() == self.chain_len
    }

    pub fn width(&self) -> usize {
        self.op.width()
    }

    pub fn materialize(&self, limits: &Limits) -> Result<LocalOperator> {
        if self.is_full() && self.start == 0 {
            return Ok(self.op.clone());
        }
        EmbeddedOperator::new(self.op.clone(), self.start, self.chain_len)?.materialize_with(limits)
    }

    /// Pads `k` identity sites on each side, switching to the full chain
    /// when the window would reach around.
    fn widened(&self, k: usize, limits: &Limits) -> Result<ChainWindow> {
        let n = self.chain_len;
        if self.is_full() {
            return Ok(ChainWindow { start: 0, op: self.materialize(limits)?, chain_len: n });
        }
        if self.width() + 2 * k >= n {
            let op = self.materialize(limits)?;
            return Ok(ChainWindow { start: 0, op, chain_len: n });
        }
        let pad = LocalOperator::identity(self.op.d(), k);
        let op = pad.kron(&self.op).kron(&pad);
        Ok(ChainWindow { start: (self.start + n - k) % n, op, chain_len: n })
    }

    /// Drops edge sites on which every string is the identity.
    pub fn trimmed(&self) -> ChainWindow {
        if self.is_full() {
            return self.clone();
        }
        let d = self.op.d();
        let w = self.width();
        let coeffs = self.op.string_coefficients();
        let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let cut = scale * 1e-14;
        let d2 = d * d;
        let mut active = vec![false; w];
        for (idx, c) in coeffs.iter().enumerate() {
            if c.norm() > cut {
                let mut rem = idx;
                for k in (0..w).rev() {
                    if rem % d2 != 0 {
                        active[k] = true;
                    }
                    rem /= d2;
                }
            }
        }
        let (lo, hi) = match (active.iter().position(|&a| a), active.iter().rposition(|&a| a)) {
            (Some(lo), Some(hi)) => (lo, hi),
            _ => (0, 0),
        };
        if lo == 0 && hi == w - 1 {
            return self.clone();
        }
        let keep = hi - lo + 1;
        let mut sub = vec![ZERO; upow(d2, keep)];
        let lead = upow(d2, w - 1 - hi);
        for (idx, c) in coeffs.iter().enumerate() {
            if c.norm() <= cut {
                continue;
            }
            // drop letters outside [lo, hi]; they are identity for kept strings
            let inner = (idx / lead) % upow(d2, keep);
            sub[inner] += *c;
        }
        let op = LocalOperator::from_string_coefficients(d, keep, &sub);
        ChainWindow { start: (self.start + lo) % self.chain_len, op, chain_len: self.chain_len }
    }

    /// String expansion on chain coordinates, keeping `|c| > cut`.
    pub fn strings(&self, cut: f64) -> ChainStrings {
        let d = self.op.d();
        let d2 = d * d;
        let n = self.chain_len;
        let w = self.width();
        let coeffs = self.op.string_coefficients();
        let site_weight: Vec<u64> = (0..w).map(|k| (d2 as u64).pow((n - 1 - (self.start + k) % n) as u32)).collect();
        let mut map = BTreeMap::new();
        for (idx, c) in coeffs.into_iter().enumerate() {
            if c.norm() <= cut {
                continue;
            }
            let mut rem = idx;
            let mut key = 0u64;
            for k in (0..w).rev() {
                key += (rem % d2) as u64 * site_weight[k];
                rem /= d2;
            }
            map.insert(key, c);
        }
        ChainStrings { d, chain_len: n, coeffs: map }
    }
}

/// Sparse string expansion of a chain operator. Keys encode the per-site
/// letters with site 0 as the most significant base-`d²` digit.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainStrings {
    pub d: usize,
    pub chain_len: usize,
    pub coeffs: BTreeMap<u64, C64>,
}

impl ChainStrings {
    pub fn new(d: usize, chain_len: usize) -> Self {
        Self { d, chain_len, coeffs: BTreeMap::new() }
    }

    pub fn letters(&self, key: u64) -> Vec<usize> {
        string_key_letters(self.d, self.chain_len, key)
    }

    pub fn key(&self, letters: &[usize]) -> u64 {
        string_key(self.d, letters)
    }

    pub fn add_scaled(&mut self, other: &ChainStrings, c: C64) {
        for (k, v) in &other.coeffs {
            *self.coeffs.entry(*k).or_insert(ZERO) += v * c;
        }
    }

    /// Euclidean norm of the coefficient vector.
    pub fn norm(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn get(&self, key: u64) -> C64 {
        self.coeffs.get(&key).cloned().unwrap_or(ZERO)
    }

    pub fn minus(&self, other: &ChainStrings) -> ChainStrings {
        let mut out = self.clone();
        out.add_scaled(other, -ONE);
        out
    }

    /// Groups strings by their minimal covering interval.
    pub fn by_interval(&self) -> BTreeMap<Support, ChainStrings> {
        let mut out: BTreeMap<Support, ChainStrings> = BTreeMap::new();
        for (&k, &c) in &self.coeffs {
            let active: Vec<bool> = self.letters(k).iter().map(|&l| l != 0).collect();
            let s = cyclic_support(&active);
            out.entry(s).or_insert_with(|| ChainStrings::new(self.d, self.chain_len)).coeffs.insert(k, c);
        }
        out
    }
}

pub fn string_key(d: usize, letters: &[usize]) -> u64 {
    let d2 = (d * d) as u64;
    letters.iter().fold(0u64, |acc, &l| acc * d2 + l as u64)
}

pub fn string_key_letters(d: usize, n: usize, key: u64) -> Vec<usize> {
    let d2 = (d * d) as u64;
    let mut out = vec![0; n];
    let mut rem = key;
    for k in (0..n).rev() {
        out[k] = (rem % d2) as usize;
        rem /= d2;
    }
    out
}

/// Minimal cyclic interval covering a set of sites.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Support {
    Empty,
    Interval {
        x: usize,
        w: usize,
    },
    /// Several minimal intervals of equal width.
    Ambiguous {
        w: usize,
        starts: Vec<usize>,
    },
}

impl Support {
    pub fn interval(&self) -> Option<(usize, usize)> {
        match self {
            Support::Interval { x, w } => Some((*x, *w)),
            _ => None,
        }
    }
}

pub fn cyclic_support(active: &[bool]) -> Support {
    let n = active.len();
    let sites: Vec<usize> = (0..n).filter(|&s| active[s]).collect();
    if sites.is_empty() {
        return Support::Empty;
    }
    let m = sites.len();
    // gap following sites[i], and the start of the interval it implies
    let gaps: Vec<(usize, usize)> = (0..m)
        .map(|i| {
            let next = sites[(i + 1) % m];
            let gap = (next + n - sites[i] - 1) % n;
            let gap = if m == 1 { n - 1 } else { gap };
            (gap, next)
        })
        .collect();
    let best = gaps.iter().map(|g| g.0).max().unwrap();
    let mut starts: Vec<usize> = gaps.iter().filter(|g| g.0 == best).map(|g| g.1).collect();
    starts.sort_unstable();
    starts.dedup();
    let w = n - best;
    if starts.len() == 1 {
        Support::Interval { x: starts[0], w }
    } else {
        Support::Ambiguous { w, starts }
    }
}

/// Start-site parity and width parity of an interval-supported operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ParityClass {
    #[serde(rename = "B_ee")]
    Bee,
    #[serde(rename = "B_eo")]
    Beo,
    #[serde(rename = "B_oe")]
    Boe,
    #[serde(rename = "B_oo")]
    Boo,
}

impl ParityClass {
    pub fn of(x: usize, w: usize) -> ParityClass {
        match (x % 2, w % 2) {
            (0, 0) => ParityClass::Bee,
            (0, _) => ParityClass::Beo,
            (_, 0) => ParityClass::Boe,
            _ => ParityClass::Boo,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ParityClass::Bee => "B_ee",
            ParityClass::Beo => "B_eo",
            ParityClass::Boe => "B_oe",
            ParityClass::Boo => "B_oo",
        }
    }
}

impl fmt::Display for ParityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiteFlag {
    IdentityOnly,
    Mixed,
    StrictlyNonIdentity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportProfile {
    /// `(x, w)` of the minimal cyclic interval, absent for the identity or
    /// an ambiguous support.
    pub interval: Option<(usize, usize)>,
    pub flags: Vec<SiteFlag>,
    /// Assigned only for unambiguous intervals with `w ≤ L`.
    pub parity_class: Option<ParityClass>,
    pub diagnostic: Option<String>,
}

pub fn support_profile(op: &LocalOperator) -> Result<SupportProfile> {
    let n = op.width();
    if n < 4 || !n.is_multiple_of(2) {
        return contract(format!("support profile needs a chain operator, got width {n}"));
    }
    Ok(support_profile_strings(&ChainWindow { start: 0, op: op.clone(), chain_len: n }.strings(SUPPORT_TOL)))
}

pub fn support_profile_window(w: &ChainWindow) -> SupportProfile {
    support_profile_strings(&w.strings(SUPPORT_TOL))
}

fn support_profile_strings(s: &ChainStrings) -> SupportProfile {
    let n = s.chain_len;
    let mut any = vec![false; n];
    let mut all = vec![true; n];
    for &k in s.coeffs.keys() {
        for (site, &l) in s.letters(k).iter().enumerate() {
            any[site] |= l != 0;
            all[site] &= l != 0;
        }
    }
    let empty = s.coeffs.is_empty();
    let flags = (0..n)
        .map(|i| {
            if empty || !any[i] {
                SiteFlag::IdentityOnly
            } else if all[i] {
                SiteFlag::StrictlyNonIdentity
            } else {
                SiteFlag::Mixed
            }
        })
        .collect();
    let support = cyclic_support(&any);
    let (interval, parity_class, diagnostic) = match &support {
        Support::Empty => (None, None, None),
        Support::Ambiguous { w, starts } => {
            (None, None, Some(format!("width-{w} support has several minimal intervals starting at {starts:?}")))
        }
        Support::Interval { x, w } => {
            if *w <= n / 2 {
                (Some((*x, *w)), Some(ParityClass::of(*x, *w)), None)
            } else {
                (Some((*x, *w)), None, Some(format!("width {w} exceeds half the chain")))
            }
        }
    };
    SupportProfile { interval, flags, parity_class, diagnostic }
}

/// Follows the interval endpoints through one layer whose bonds start on
/// sites of parity `left_parity`.
fn propagate_layer(intervals: &BTreeSet<(i64, i64)>, left_parity: i64) -> BTreeSet<(i64, i64)> {
    let mut out = BTreeSet::new();
    for &(l, r) in intervals {
        let ls: Vec<i64> = if l.rem_euclid(2) == left_parity { vec![l, l + 1] } else { vec![l - 1] };
        let rs: Vec<i64> = if r.rem_euclid(2) == left_parity { vec![r + 1] } else { vec![r - 1, r] };
        for &a in &ls {
            for &b in &rs {
                if a <= b {
                    out.insert((a, b));
                }
            }
        }
    }
    out
}

/// Intervals `(start mod 2L, width)` that one period can map an operator
/// supported exactly on `[x, x+w−1]` onto, for dual-unitary gates.
pub fn allowed_targets(x: usize, w: usize, chain_len: usize) -> BTreeSet<(usize, usize)> {
    let start: BTreeSet<(i64, i64)> = [(x as i64, (x + w) as i64 - 1)].into_iter().collect();
    let after = propagate_layer(&propagate_layer(&start, 0), 1);
    let n = chain_len as i64;
    after.into_iter().map(|(l, r)| (l.rem_euclid(n) as usize, (r - l + 1) as usize)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionInput {
    pub class: ParityClass,
    pub x: usize,
    pub w: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionComponent {
    /// `[first, last]` chain sites.
    pub interval: [usize; 2],
    pub width: usize,
    pub class: Option<ParityClass>,
    /// Norm relative to the input.
    pub norm: f64,
    pub allowed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionReport {
    pub input: TransitionInput,
    pub components: Vec<TransitionComponent>,
    pub forbidden_norm: f64,
}

/// Decomposes `𝕌 A 𝕌†` by interval and measures the weight outside the
/// allowed target set.
pub fn digraph_transition_check(f: &FloquetOperator, op: &EmbeddedOperator) -> Result<TransitionReport> {
    let n = f.chain_len();
    if op.chain_len != n {
        return contract("embedded operator lives on a different chain");
    }
    let (x, w) = (op.x, op.width());
    if w + 4 > f.half_len() {
        return contract(format!("width {w} exceeds L - 4 = {}", f.half_len() as i64 - 4));
    }
    let window = ChainWindow::from_embedded(op);
    let input = window.strings(0.0);
    let in_norm = input.norm();
    if in_norm == 0.0 {
        return contract("zero operator has no parity class");
    }
    for (support, part) in input.by_interval() {
        if support != (Support::Interval { x, w }) && part.norm() > SUPPORT_TOL * in_norm {
            return contract(format!("operator is not supported exactly on [{x}, {}]", x + w - 1));
        }
    }
    let allowed = allowed_targets(x, w, n);
    let out = f.step(&window)?.strings(0.0);
    let mut components = Vec::new();
    let mut forbidden_sq = 0.0;
    for (support, part) in out.by_interval() {
        let norm = part.norm() / in_norm;
        let (ix, iw, ok) = match &support {
            Support::Interval { x, w } => (*x, *w, allowed.contains(&(*x, *w))),
            Support::Empty => (0, 0, false),
            Support::Ambiguous { w, starts } => (starts[0], *w, false),
        };
        if !ok {
            forbidden_sq += norm * norm;
        }
        if norm <= SUPPORT_TOL {
            continue;
        }
        components.push(TransitionComponent {
            interval: [ix, (ix + iw.max(1) - 1) % n],
            width: iw,
            class: if iw > 0 && iw <= n / 2 { Some(ParityClass::of(ix, iw)) } else { None },
            norm,
            allowed: ok,
        });
    }
    Ok(TransitionReport {
        input: TransitionInput { class: ParityClass::of(x, w), x, w },
        components,
        forbidden_norm: forbidden_sq.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{qubit, random_boundary_traceless};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn literal_floquet(u: &Gate, v: &Gate, l: usize) -> DMatrix<C64> {
        let mut uu = u.matrix().clone();
        let mut vv = v.matrix().clone();
        for _ in 1..l {
            uu = uu.kronecker(u.matrix());
            vv = vv.kronecker(v.matrix());
        }
        let pi = translation_op(2 * l, u.d()).unwrap();
        &pi * vv * pi.adjoint() * uu
    }

    #[test]
    fn translation_examples() {
        let p = translation_op(4, 2).unwrap();
        assert_eq!(p[(0b1000, 0b0100)], ONE);
        let mut p4 = DMatrix::identity(16, 16);
        for _ in 0..4 {
            p4 = &p * p4;
        }
        assert_eq!(p4, DMatrix::identity(16, 16));
        let z1 = qubit::z().embed(1, 4).unwrap().materialize().unwrap();
        let z0 = qubit::z().embed(0, 4).unwrap().materialize().unwrap();
        let moved = &p * z1.matrix() * p.adjoint();
        assert!((moved - z0.matrix()).norm() < 1e-15);
    }

    #[test]
    fn matrix_matches_literal_formula() {
        for l in [2, 3] {
            let u = Gate::random_dual_unitary_qubit(1, 0.3);
            let v = Gate::random_dual_unitary_qubit(2, 0.8);
            let f = floquet(&u, &v, l).unwrap();
            let lit = literal_floquet(&u, &v, l);
            assert!((f.matrix() - &lit).norm() < 1e-12);
            let n = lit.nrows();
            assert!((f.matrix() * f.matrix().adjoint() - DMatrix::<C64>::identity(n, n)).norm() < 1e-12);
            let p = translation_op(2 * l, 2).unwrap();
            let p2 = &p * &p;
            assert!((&p2 * f.matrix() * p2.adjoint() - f.matrix()).norm() < 1e-12);
        }
    }

    #[test]
    fn layered_conjugation_matches_matrix() {
        let u = Gate::random_dual_unitary_qubit(5, 0.1);
        let v = Gate::random_dual_unitary_qubit(6, 0.2);
        let f = floquet(&u, &v, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = random_boundary_traceless(2, 2, &mut rng);
        let e = a.embed(5, 6).unwrap();
        let dense = f.matrix() * e.materialize().unwrap().matrix() * f.matrix().adjoint();
        let layered = heisenberg(&f, &e, 1).unwrap();
        assert!((layered.matrix() - dense).norm() < 1e-12);
        let two = heisenberg(&f, &e, 2).unwrap();
        let dense2 = f.matrix() * layered.matrix() * f.matrix().adjoint();
        assert!((two.matrix() - dense2).norm() < 1e-11);
    }

    #[test]
    fn swap_circuit_is_a_two_site_translation() {
        let s = Gate::swap(2);
        let f = floquet(&s, &s, 2).unwrap();
        let p = translation_op(4, 2).unwrap();
        assert!((f.matrix() - &p * &p).norm() < 1e-15);
    }

    #[test]
    fn swap_circuit_counter_propagates_sublattices() {
        let s = Gate::swap(2);
        for l in 2..=5 {
            let n = 2 * l;
            let f = floquet(&s, &s, l).unwrap();
            for x in 0..n {
                let to = if x % 2 == 0 { (x + 2) % n } else { (x + n - 2) % n };
                let out = heisenberg(&f, &qubit::y().embed(x, n).unwrap(), 1).unwrap();
                let want = qubit::y().embed(to, n).unwrap().materialize().unwrap();
                assert!(out.max_abs_diff(&want) < 1e-14, "L = {l}, x = {x}");
            }
        }
    }

    #[test]
    fn fswap_moves_sigma_z() {
        let f = floquet(&Gate::fswap(), &Gate::fswap(), 2).unwrap();
        let out = heisenberg(&f, &qubit::z().embed(0, 4).unwrap(), 1).unwrap();
        let want = qubit::z().embed(2, 4).unwrap().materialize().unwrap();
        assert!(out.max_abs_diff(&want) < 1e-14);
        let f = floquet(&Gate::fswap(), &Gate::fswap(), 3).unwrap();
        let out = heisenberg(&f, &qubit::z().embed(1, 6).unwrap(), 1).unwrap();
        let want = qubit::z().embed(5, 6).unwrap().materialize().unwrap();
        assert!(out.max_abs_diff(&want) < 1e-14);
        let e = qubit::x().embed(3, 6).unwrap();
        assert_eq!(heisenberg(&f, &e, 0).unwrap(), e.materialize().unwrap());
    }

    #[test]
    fn support_examples() {
        let a = qubit::x().kron(&qubit::y()).embed(1, 8).unwrap().materialize().unwrap();
        let p = support_profile(&a).unwrap();
        assert_eq!(p.interval, Some((1, 2)));
        assert_eq!(p.parity_class, Some(ParityClass::Boe));
        let p = support_profile(&qubit::x().embed(0, 8).unwrap().materialize().unwrap()).unwrap();
        assert_eq!(p.parity_class, Some(ParityClass::Beo));
        let p = support_profile(&LocalOperator::identity(2, 8)).unwrap();
        assert_eq!(p.interval, None);
        assert_eq!(p.parity_class, None);
        assert!(p.flags.iter().all(|f| *f == SiteFlag::IdentityOnly));
    }

    #[test]
    fn antipodal_support_is_ambiguous() {
        let mut active = vec![false; 8];
        active[0] = true;
        active[4] = true;
        assert!(matches!(cyclic_support(&active), Support::Ambiguous { w: 5, .. }));
        let mut active = vec![false; 8];
        active[7] = true;
        active[1] = true;
        assert_eq!(cyclic_support(&active), Support::Interval { x: 7, w: 3 });
    }

    #[test]
    fn allowed_target_tables() {
        let n = 40;
        let x = 10;
        let set = |v: &[(usize, usize)]| v.iter().cloned().collect::<BTreeSet<_>>();
        // even start, width 1
        assert_eq!(allowed_targets(x, 1, n), set(&[(x + 2, 1), (x + 1, 2), (x - 1, 4)]));
        // odd start, width 1
        assert_eq!(allowed_targets(x + 1, 1, n), set(&[(x - 1, 1), (x - 1, 2), (x - 1, 4)]));
        // even start, width 2: nothing at [x+2, x+3]
        let ee = allowed_targets(x, 2, n);
        assert!(!ee.contains(&(x + 2, 2)));
        assert_eq!(ee, set(&[(x - 1, 1), (x - 1, 2), (x - 1, 4), (x + 1, 2), (x + 2, 1)]));
    }

    #[test]
    fn windowed_step_handles_wrap() {
        let u = Gate::random_dual_unitary_qubit(7, 0.5);
        let v = Gate::random_dual_unitary_qubit(8, 0.6);
        let f = floquet(&u, &v, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_boundary_traceless(2, 2, &mut rng);
        let e = a.embed(7, 8).unwrap();
        let windowed = heisenberg(&f, &e, 1).unwrap();
        let dense = f.matrix() * e.materialize().unwrap().matrix() * f.matrix().adjoint();
        assert!((windowed.matrix() - dense).norm() < 1e-11);
    }

    #[test]
    fn digraph_eo_example() {
        let u = Gate::random_dual_unitary_qubit(11, 0.7);
        let v = Gate::random_dual_unitary_qubit(12, 0.1);
        let f = floquet(&u, &v, 6).unwrap();
        let r = digraph_transition_check(&f, &qubit::x().embed(4, 12).unwrap()).unwrap();
        assert!(r.forbidden_norm < 1e-9);
        let widths: BTreeSet<usize> = r.components.iter().map(|c| c.width).collect();
        assert!(widths.is_subset(&[1, 2, 4].into_iter().collect()));
        assert!(digraph_transition_check(&f, &qubit::x().kron(&qubit::x()).kron(&qubit::x()).embed(0, 12).unwrap())
            .is_err());
    }
}
