//! Conserved charges: construction from solitons, conservation checks, the
//! brute-force conserved-space oracle and the decomposition of conserved
//! densities into soliton charges.

use std::collections::{BTreeMap, HashMap};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::chain::{ChainStrings, ChainWindow, FloquetOperator, Support};
use crate::error::{contract, Error, Result};
use crate::gates::{Gate, DEFAULT_GATE_TOL};
use crate::lightcone::{find_solitons, Direction, SolitonRecord, UNIMODULAR_TOL};
use crate::linalg::{max_principal_sine, null_space, orthonormal_span, principal_angle_sines};
use crate::tensor::{basis_string, string_letters, upow, LocalOperator, ONE, ZERO};

/// Relative residual below which a charge counts as conserved.
pub const CONSERVED_TOL: f64 = 1e-9;
/// Bound on `|λ^L − 1|` for building a charge from a soliton.
pub const PHASE_TOL: f64 = 1e-8;
/// Singular-value threshold for the oracle's null space.
pub const NULLSPACE_TOL: f64 = 1e-8;
/// Minimum ratio between kept and discarded singular values.
pub const MIN_GAP_RATIO: f64 = 1e3;
/// Reconstruction residual allowed in [`decompose_into_soliton_charges`].
pub const DECOMPOSITION_TOL: f64 = 1e-8;
/// Principal-angle bound for span comparisons.
pub const SPAN_TOL: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    FromSoliton { direction: Direction, w: usize, lambda: [f64; 2] },
    Composite { direction: Direction, lambda: [f64; 2] },
    BruteForce,
    User,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChargeTerm {
    pub coeff: C64,
    pub x: usize,
    pub op: LocalOperator,
}

/// `Σ c_i · op_i` with each `op_i` embedded at site `x_i` of a `2L` chain.
#[derive(Clone, Debug, PartialEq)]
pub struct ChargeRecord {
    pub chain_len: usize,
    pub terms: Vec<ChargeTerm>,
    pub provenance: Provenance,
}

impl ChargeRecord {
    pub fn new(chain_len: usize, terms: Vec<ChargeTerm>, provenance: Provenance) -> Result<Self> {
        if chain_len < 4 || !chain_len.is_multiple_of(2) {
            return contract(format!("chain length must be even and at least 4, got {chain_len}"));
        }
        let d = terms.first().map(|t| t.op.d());
        for (i, t) in terms.iter().enumerate() {
            if Some(t.op.d()) != d {
                return contract("charge terms have different qudit dimensions");
            }
            if t.x >= chain_len || t.op.width() == 0 || t.op.width() > chain_len {
                return contract(format!("term {i} at x={} with w={} does not fit the chain", t.x, t.op.width()));
            }
            if !t.op.is_boundary_traceless(1e-10) {
                return contract(format!("term {i} is not traceless at both boundary sites"));
            }
        }
        Ok(Self { chain_len, terms, provenance })
    }

    pub fn d(&self) -> Option<usize> {
        self.terms.first().map(|t| t.op.d())
    }

    pub fn half_len(&self) -> usize {
        self.chain_len / 2
    }

    /// String expansion of the whole sum.
    pub fn strings(&self) -> ChainStrings {
        let d = self.d().unwrap_or(2);
        let mut out = ChainStrings::new(d, self.chain_len);
        for t in &self.terms {
            let w = ChainWindow { start: t.x, op: t.op.clone(), chain_len: self.chain_len };
            out.add_scaled(&w.strings(0.0), t.coeff);
        }
        out.coeffs.retain(|_, c| *c != ZERO);
        out
    }

    /// Dense chain operator.
    pub fn materialize(&self, f: &FloquetOperator) -> Result<LocalOperator> {
        let d = self.d().ok_or_else(|| Error::Contract("empty charge".into()))?;
        let mut acc = LocalOperator::zeros(d, self.chain_len);
        for t in &self.terms {
            let w = ChainWindow { start: t.x, op: t.op.clone(), chain_len: self.chain_len };
            acc = &acc + &w.materialize(f.limits())?.scale(t.coeff);
        }
        Ok(acc)
    }

    /// Builds a charge from a string expansion, one term per interval.
    pub fn from_strings(s: &ChainStrings, provenance: Provenance) -> Result<Self> {
        let mut terms = Vec::new();
        for (support, part) in s.by_interval() {
            let (x, w) = support
                .interval()
                .ok_or_else(|| Error::Contract("string without a unique covering interval".into()))?;
            let mut local = vec![ZERO; upow(s.d * s.d, w)];
            for (&k, &c) in &part.coeffs {
                let letters = s.letters(k);
                let idx = (0..w).fold(0usize, |acc, j| acc * s.d * s.d + letters[(x + j) % s.chain_len]);
                local[idx] += c;
            }
            let op = LocalOperator::from_string_coefficients(s.d, w, &local);
            terms.push(ChargeTerm { coeff: ONE, x, op });
        }
        ChargeRecord::new(s.chain_len, terms, provenance)
    }
}

fn lambda_pair(z: C64) -> [f64; 2] {
    [z.re, z.im]
}

/// `Q⁺ = Σ_{x even} λ^{x/2} a_x` or `Q⁻ = Σ_{x odd} λ^{−(x−1)/2} b_x`.
pub fn charge_from_soliton(s: &SolitonRecord, half_len: usize) -> Result<ChargeRecord> {
    let n = 2 * half_len;
    if s.width > n {
        return contract(format!("soliton of width {} does not fit a chain of {n} sites", s.width));
    }
    let defect = (s.lambda.powu(half_len as u32) - ONE).norm();
    if defect >= PHASE_TOL {
        return Err(Error::PhaseIncompatible { lambda: s.lambda, half_len, defect });
    }
    let terms = (0..half_len)
        .map(|k| {
            let (x, coeff) = match s.direction {
                Direction::Plus => (2 * k, s.lambda.powi(k as i32)),
                Direction::Minus => (2 * k + 1, s.lambda.powi(-(k as i32))),
            };
            ChargeTerm { coeff, x, op: s.op.clone() }
        })
        .collect();
    ChargeRecord::new(
        n,
        terms,
        Provenance::FromSoliton { direction: s.direction, w: s.width, lambda: lambda_pair(s.lambda) },
    )
}

/// Image of a string expansion under one period.
fn step_strings(f: &FloquetOperator, q: &ChargeRecord) -> Result<ChainStrings> {
    let d = q.d().unwrap_or(f.d());
    let mut out = ChainStrings::new(d, q.chain_len);
    for t in &q.terms {
        let w = ChainWindow { start: t.x, op: t.op.clone(), chain_len: q.chain_len };
        let stepped = f.step(&w)?;
        let cut = 1e-16 * t.op.hs_norm();
        out.add_scaled(&stepped.strings(cut), t.coeff);
    }
    Ok(out)
}

/// `‖𝕌 Q 𝕌† − Q‖ / ‖Q‖` in the Hilbert-Schmidt norm.
pub fn verify_conserved(f: &FloquetOperator, q: &ChargeRecord) -> Result<f64> {
    if q.chain_len != f.chain_len() {
        return contract(format!("charge lives on {} sites, circuit on {}", q.chain_len, f.chain_len()));
    }
    if q.d().is_some_and(|d| d != f.d()) {
        return contract("charge and circuit have different qudit dimensions");
    }
    let before = q.strings();
    let norm = before.norm();
    if norm == 0.0 {
        return contract("cannot verify conservation of the zero charge");
    }
    let after = step_strings(f, q)?;
    Ok(after.minus(&before).norm() / norm)
}

/// Strings whose minimal interval has width `1..=w_max`, ordered by
/// `(x, w, letters)`.
fn interval_basis(d: usize, chain_len: usize, w_max: usize) -> Vec<(usize, Vec<usize>)> {
    let d2 = d * d;
    let mut out = Vec::new();
    for x in 0..chain_len {
        for w in 1..=w_max {
            for idx in 0..upow(d2, w) {
                let letters = string_letters(d, w, idx);
                if letters[0] != 0 && letters[w - 1] != 0 {
                    out.push((x, letters));
                }
            }
        }
    }
    out
}

fn chain_key(d: usize, chain_len: usize, x: usize, letters: &[usize]) -> u64 {
    let mut full = vec![0usize; chain_len];
    for (k, &l) in letters.iter().enumerate() {
        full[(x + k) % chain_len] = l;
    }
    crate::chain::string_key(d, &full)
}

/// Orthonormal basis of all conserved densities with terms of width at most
/// `w_max`, in coordinates of the interval string basis.
#[derive(Clone, Debug)]
pub struct ConservedSpace {
    pub d: usize,
    pub chain_len: usize,
    pub w_max: usize,
    /// Chain string keys of the basis, defining the coordinate order.
    pub keys: Vec<u64>,
    /// `keys.len() × dim` matrix with orthonormal columns.
    pub coords: DMatrix<C64>,
    pub basis: Vec<ChargeRecord>,
    /// Singular values of `T − 1`, ascending.
    pub singular_values: Vec<f64>,
    pub gap_ratio: f64,
    /// Largest conservation residual among the basis vectors.
    pub max_residual: f64,
    /// Whether `w_max ≤ L − 4`, the regime in which intervals never meet
    /// across the wrap within one period.
    pub theorem_regime: bool,
}

impl ConservedSpace {
    pub fn dim(&self) -> usize {
        self.coords.ncols()
    }

    /// Coordinates of a charge in this basis' string coordinates, together
    /// with the norm of its part outside them.
    pub fn coordinates(&self, q: &ChargeRecord) -> (DVector<C64>, f64) {
        let s = q.strings();
        let index: HashMap<u64, usize> = self.keys.iter().enumerate().map(|(i, &k)| (k, i)).collect();
        let mut v = DVector::zeros(self.keys.len());
        let mut outside = 0.0;
        for (k, c) in &s.coeffs {
            match index.get(k) {
                Some(&i) => v[i] += c,
                None => outside += c.norm_sqr(),
            }
        }
        (v, outside.sqrt())
    }
}

pub fn brute_force_conserved_space(u: &Gate, v: &Gate, half_len: usize, w_max: usize) -> Result<ConservedSpace> {
    let f = FloquetOperator::new(u, v, half_len)?;
    brute_force_with(&f, w_max)
}

pub fn brute_force_with(f: &FloquetOperator, w_max: usize) -> Result<ConservedSpace> {
    let n = f.chain_len();
    let d = f.d();
    if w_max == 0 || w_max > f.half_len() {
        return contract(format!("w_max must lie in [1, L] = [1, {}], got {w_max}", f.half_len()));
    }
    let basis = interval_basis(d, n, w_max);
    let keys: Vec<u64> = basis.iter().map(|(x, l)| chain_key(d, n, *x, l)).collect();
    let m = keys.len();
    let mut t_minus_id = DMatrix::<C64>::zeros(m, m);
    let d2 = d * d;
    for (j, (x, letters)) in basis.iter().enumerate() {
        let w = ChainWindow { start: *x, op: basis_string(d, letters), chain_len: n };
        let img = f.step(&w)?;
        let width = img.width();
        let coeffs = img.op.string_coefficients();
        'rows: for (i, (y, l)) in basis.iter().enumerate() {
            let mut local = 0;
            for (p, &a) in l.iter().enumerate() {
                let q = (y + p + n - img.start) % n;
                if q >= width {
                    continue 'rows;
                }
                local += a * upow(d2, width - 1 - q);
            }
            t_minus_id[(i, j)] += coeffs[local];
        }
        t_minus_id[(j, j)] -= ONE;
    }
    let ns = null_space(&t_minus_id, NULLSPACE_TOL)?;
    let gap = ns.gap_ratio();
    if ns.basis.ncols() > 0 && gap < MIN_GAP_RATIO {
        return Err(Error::Inconclusive(format!(
            "null-space gap ratio {gap:.3e} below {MIN_GAP_RATIO:.0e} (kept {:?}, dropped {:?})",
            ns.smallest_kept, ns.largest_dropped
        )));
    }
    let svd_values: Vec<f64> = ns.values.iter().rev().cloned().collect();
    let mut records = Vec::with_capacity(ns.basis.ncols());
    let mut max_residual: f64 = 0.0;
    for c in 0..ns.basis.ncols() {
        let mut s = ChainStrings::new(d, n);
        for (i, &k) in keys.iter().enumerate() {
            let val = ns.basis[(i, c)];
            if val != ZERO {
                s.coeffs.insert(k, val);
            }
        }
        let q = ChargeRecord::from_strings(&s, Provenance::BruteForce)?;
        let res = verify_conserved(f, &q)?;
        if res >= CONSERVED_TOL {
            return Err(Error::Inconclusive(format!(
                "null vector {c} fails the full conservation check (residual {res:.3e})"
            )));
        }
        max_residual = max_residual.max(res);
        records.push(q);
    }
    Ok(ConservedSpace {
        d,
        chain_len: n,
        w_max,
        keys,
        coords: ns.basis.clone(),
        basis: records,
        singular_values: svd_values,
        gap_ratio: gap,
        max_residual,
        theorem_regime: w_max + 4 <= f.half_len(),
    })
}

/// Solitons of both directions for every odd width up to `w_max`.
#[derive(Clone, Debug)]
pub struct SolitonCatalog {
    pub w_max: usize,
    pub plus: BTreeMap<usize, Vec<SolitonRecord>>,
    pub minus: BTreeMap<usize, Vec<SolitonRecord>>,
}

impl SolitonCatalog {
    pub fn build(u: &Gate, v: &Gate, w_max: usize, tol: f64) -> Result<Self> {
        let mut plus = BTreeMap::new();
        let mut minus = BTreeMap::new();
        for w in (1..=w_max).step_by(2) {
            plus.insert(w, find_solitons(u, v, w, Direction::Plus, tol)?);
            minus.insert(w, find_solitons(u, v, w, Direction::Minus, tol)?);
        }
        Ok(Self { w_max, plus, minus })
    }

    pub fn get(&self, direction: Direction, w: usize) -> &[SolitonRecord] {
        let map = match direction {
            Direction::Plus => &self.plus,
            Direction::Minus => &self.minus,
        };
        map.get(&w).map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn count(&self) -> usize {
        self.plus.values().chain(self.minus.values()).map(|v| v.len()).sum()
    }

    pub fn all(&self) -> impl Iterator<Item = &SolitonRecord> {
        self.plus.values().chain(self.minus.values()).flatten()
    }

    /// Charges of every soliton with `λ^L = 1`, plus the number skipped.
    pub fn charges(&self, half_len: usize) -> Result<(Vec<ChargeRecord>, usize)> {
        let mut out = Vec::new();
        let mut skipped = 0;
        for s in self.all() {
            match charge_from_soliton(s, half_len) {
                Ok(q) => out.push(q),
                Err(Error::PhaseIncompatible { .. }) => skipped += 1,
                Err(e) => return Err(e),
            }
        }
        Ok((out, skipped))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolitonCoefficient {
    pub direction: Direction,
    pub w: usize,
    pub index: usize,
    pub lambda: [f64; 2],
    pub value: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    /// Right-moving coefficients `α_{k,w}`.
    pub alpha: Vec<SolitonCoefficient>,
    /// Left-moving coefficients `β_{l,w}`.
    pub beta: Vec<SolitonCoefficient>,
    pub residual: f64,
    pub theorem_regime: bool,
}

/// Local string coefficients of the part of `s` supported exactly on
/// `[x, x+w−1]`.
fn content_at(s: &BTreeMap<Support, ChainStrings>, x: usize, w: usize) -> Option<Vec<C64>> {
    let part = s.get(&Support::Interval { x, w })?;
    let d2 = part.d * part.d;
    let mut local = vec![ZERO; upow(d2, w)];
    for (&k, &c) in &part.coeffs {
        let letters = part.letters(k);
        let idx = (0..w).fold(0usize, |acc, j| acc * d2 + letters[(x + j) % part.chain_len]);
        local[idx] += c;
    }
    Some(local)
}

/// Least-squares coefficients of `target` in the span of `cols`.
fn project_onto(cols: &[Vec<C64>], target: &[C64]) -> Result<Vec<C64>> {
    if cols.is_empty() {
        return Ok(vec![]);
    }
    let a = DMatrix::from_fn(target.len(), cols.len(), |r, c| cols[c][r]);
    let b = DVector::from_column_slice(target);
    let svd = a.svd(true, true);
    let x = svd.solve(&b, 1e-12).map_err(|e| Error::Numeric(format!("least squares failed: {e}")))?;
    Ok(x.iter().cloned().collect())
}

pub fn decompose_into_soliton_charges(
    f: &FloquetOperator,
    q: &ChargeRecord,
    catalog: &SolitonCatalog,
) -> Result<Decomposition> {
    let res = verify_conserved(f, q)?;
    if res >= CONSERVED_TOL {
        return contract(format!("charge is not conserved (residual {res:.3e})"));
    }
    let half = f.half_len();
    let strings = q.strings();
    let norm = strings.norm();
    let parts = strings.by_interval();
    for (support, part) in &parts {
        if part.norm() <= SUPPORT_TOL_REL * norm {
            continue;
        }
        match support {
            Support::Interval { w, .. } if w % 2 == 1 && *w <= catalog.w_max && *w <= half => {}
            Support::Interval { x, w } => {
                return contract(format!(
                    "charge has weight {:.3e} on [{x}, {}] (width {w}); decomposition needs odd widths up to {}",
                    part.norm() / norm,
                    x + w - 1,
                    catalog.w_max.min(half)
                ))
            }
            _ => return contract("charge has a term without a unique covering interval"),
        }
    }

    let mut recon = ChainStrings::new(strings.d, strings.chain_len);
    let mut tables = [Vec::new(), Vec::new()];
    for (slot, direction, x0) in [(0usize, Direction::Plus, 0usize), (1, Direction::Minus, 1)] {
        for w in (1..=catalog.w_max).step_by(2) {
            let usable: Vec<(usize, &SolitonRecord, ChargeRecord)> = catalog
                .get(direction, w)
                .iter()
                .enumerate()
                .filter_map(|(i, s)| charge_from_soliton(s, half).ok().map(|c| (i, s, c)))
                .collect();
            let Some(target) = content_at(&parts, x0, w) else { continue };
            let cols: Vec<Vec<C64>> = usable.iter().map(|(_, s, _)| s.op.string_coefficients()).collect();
            let coeffs = project_onto(&cols, &target)?;
            for ((i, s, charge), c) in usable.iter().zip(coeffs) {
                recon.add_scaled(&charge.strings(), c);
                tables[slot].push(SolitonCoefficient {
                    direction,
                    w,
                    index: *i,
                    lambda: lambda_pair(s.lambda),
                    value: [c.re, c.im],
                });
            }
        }
    }
    let residual = strings.minus(&recon).norm() / norm;
    if residual >= DECOMPOSITION_TOL {
        return Err(Error::TheoremViolation { residual });
    }
    let [alpha, beta] = tables;
    Ok(Decomposition { alpha, beta, residual, theorem_regime: catalog.w_max + 4 <= half })
}

const SUPPORT_TOL_REL: f64 = 1e-10;

/// Oracle-versus-soliton comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub half_len: usize,
    pub w_max: usize,
    pub oracle_dim: usize,
    pub soliton_dim: usize,
    pub soliton_count: usize,
    pub phase_incompatible: usize,
    pub principal_sines: Vec<f64>,
    pub max_principal_sine: Option<f64>,
    pub max_decomposition_residual: f64,
    pub oracle_gap_ratio: f64,
    pub theorem_regime: bool,
    pub matched: bool,
}

pub fn theorem1_equivalence(u: &Gate, v: &Gate, half_len: usize, w_max: usize, tol: f64) -> Result<TheoremReport> {
    for (g, name) in [(u, "U"), (v, "V")] {
        if !g.is_dual_unitary(DEFAULT_GATE_TOL) {
            return contract(format!("{name} is not dual-unitary"));
        }
    }
    let f = FloquetOperator::new(u, v, half_len)?;
    let oracle = brute_force_with(&f, w_max)?;
    let catalog = SolitonCatalog::build(u, v, w_max, tol)?;
    let (charges, skipped) = catalog.charges(half_len)?;
    let mut cols = Vec::with_capacity(charges.len());
    for q in &charges {
        let (c, outside) = oracle.coordinates(q);
        if outside > 1e-10 * c.norm().max(1e-300) {
            return Err(Error::Numeric("soliton charge leaves the oracle's string basis".into()));
        }
        cols.push(c.unscale(c.norm()));
    }
    let soliton_span = if cols.is_empty() {
        DMatrix::zeros(oracle.keys.len(), 0)
    } else {
        orthonormal_span(&DMatrix::from_columns(&cols), 1e-10)?
    };
    let sines = principal_angle_sines(&oracle.coords, &soliton_span).unwrap_or_default();
    let max_sine = max_principal_sine(&oracle.coords, &soliton_span);
    let mut max_res: f64 = 0.0;
    for q in &oracle.basis {
        let d = decompose_into_soliton_charges(&f, q, &catalog)?;
        max_res = max_res.max(d.residual);
    }
    let matched = max_sine.is_some_and(|s| s < SPAN_TOL) && max_res < DECOMPOSITION_TOL;
    Ok(TheoremReport {
        half_len,
        w_max,
        oracle_dim: oracle.dim(),
        soliton_dim: soliton_span.ncols(),
        soliton_count: catalog.count(),
        phase_incompatible: skipped,
        principal_sines: sines,
        max_principal_sine: max_sine,
        max_decomposition_residual: max_res,
        oracle_gap_ratio: oracle.gap_ratio,
        theorem_regime: oracle.theorem_regime,
        matched,
    })
}

/// Product of same-direction solitons placed on disjoint intervals.
#[derive(Clone, Debug)]
pub struct CompositeSoliton {
    /// Product operator on its covering interval, with the combined phase.
    pub record: SolitonRecord,
    /// Start of the covering interval.
    pub x: usize,
    /// `(site, width)` of every factor.
    pub parts: Vec<(usize, usize)>,
}

pub fn composite_soliton(parts: &[(SolitonRecord, usize)]) -> Result<CompositeSoliton> {
    let Some((first, _)) = parts.first() else {
        return contract("composite needs at least one part");
    };
    let direction = first.direction;
    let d = first.op.d();
    for (s, x) in parts {
        if s.direction != direction {
            return contract("composite parts move in different directions");
        }
        if s.op.d() != d {
            return contract("composite parts have different qudit dimensions");
        }
        if x % 2 != direction.start_parity() {
            return contract(format!("{direction}-moving part placed on site {x} of the wrong parity"));
        }
    }
    let mut order: Vec<usize> = (0..parts.len()).collect();
    order.sort_by_key(|&i| parts[i].1);
    for pair in order.windows(2) {
        let (a, xa) = &parts[pair[0]];
        let xb = parts[pair[1]].1;
        if xa + a.width > xb {
            return contract(format!("composite parts at sites {xa} and {xb} overlap"));
        }
    }
    let start = parts[order[0]].1;
    let mut op: Option<LocalOperator> = None;
    let mut cursor = start;
    let mut lambda = ONE;
    for &i in &order {
        let (s, x) = &parts[i];
        let gap = x - cursor;
        let mut piece = s.op.clone();
        if gap > 0 {
            piece = LocalOperator::identity(d, gap).kron(&piece);
        }
        op = Some(match op {
            None => piece,
            Some(acc) => acc.kron(&piece),
        });
        cursor = x + s.width;
        lambda *= s.lambda;
    }
    let op = op.expect("non-empty");
    let width = op.width();
    Ok(CompositeSoliton {
        record: SolitonRecord { op, direction, width, lambda },
        x: start,
        parts: order.iter().map(|&i| (parts[i].1, parts[i].0.width)).collect(),
    })
}

/// `a` at `x` times `a†` at `x2`; the phases cancel.
pub fn conjugate_pair(a: &SolitonRecord, x: usize, x2: usize) -> Result<CompositeSoliton> {
    composite_soliton(&[(a.clone(), x), (a.dagger(), x2)])
}

impl CompositeSoliton {
    /// `‖𝕌 A 𝕌† − λ A_{±2}‖ / ‖A‖` on the chain of `f`.
    pub fn translation_residual(&self, f: &FloquetOperator) -> Result<f64> {
        let n = f.chain_len();
        let w = ChainWindow::new(self.record.op.clone(), self.x, n)?;
        let moved = (self.x as i64 + self.record.direction.shift()).rem_euclid(n as i64) as usize;
        let target = ChainWindow::new(self.record.op.clone(), moved, n)?;
        let after = f.step(&w)?.strings(0.0);
        let mut want = ChainStrings::new(f.d(), n);
        want.add_scaled(&target.strings(0.0), self.record.lambda);
        Ok(after.minus(&want).norm() / want.norm())
    }

    /// Charge `Σ_x λ^{±…} A_x` built from the product.
    pub fn charge(&self, half_len: usize) -> Result<ChargeRecord> {
        let mut q = charge_from_soliton(&self.record, half_len)?;
        q.provenance =
            Provenance::Composite { direction: self.record.direction, lambda: lambda_pair(self.record.lambda) };
        Ok(q)
    }
}

/// Convenience: solitons of the gates at the default tolerance.
pub fn default_catalog(u: &Gate, v: &Gate, w_max: usize) -> Result<SolitonCatalog> {
    SolitonCatalog::build(u, v, w_max, UNIMODULAR_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::qubit;

    fn sum_over(ops: &LocalOperator, sites: impl Iterator<Item = usize>, n: usize) -> ChargeRecord {
        let terms = sites.map(|x| ChargeTerm { coeff: ONE, x, op: ops.clone() }).collect();
        ChargeRecord::new(n, terms, Provenance::User).unwrap()
    }

    #[test]
    fn fswap_charges_are_conserved() {
        let g = Gate::fswap();
        let f = FloquetOperator::new(&g, &g, 4).unwrap();
        let even_z = sum_over(&qubit::z(), (0..8).step_by(2), 8);
        assert!(verify_conserved(&f, &even_z).unwrap() < 1e-12);
        let sm = qubit::sigma_minus();
        let pair = qubit::string(&[sm.clone(), qubit::z(), sm]);
        assert!(verify_conserved(&f, &sum_over(&pair, 0..8, 8)).unwrap() < 1e-12);
        let r = Gate::random_dual_unitary_qubit(3, 0.3);
        let fr = FloquetOperator::new(&r, &r, 4).unwrap();
        assert!(verify_conserved(&fr, &even_z).unwrap() > 0.1);
    }

    #[test]
    fn charge_from_fswap_soliton() {
        let g = Gate::fswap();
        let s = find_solitons(&g, &g, 1, Direction::Plus, UNIMODULAR_TOL).unwrap();
        let q = charge_from_soliton(&s[0], 4).unwrap();
        assert_eq!(q.terms.iter().map(|t| t.x).collect::<Vec<_>>(), vec![0, 2, 4, 6]);
        let f = FloquetOperator::new(&g, &g, 4).unwrap();
        assert!(verify_conserved(&f, &q).unwrap() < 1e-12);
    }

    #[test]
    fn phase_incompatible_soliton() {
        let g = Gate::phased_swap(1.0);
        let s = find_solitons(&g, &g, 1, Direction::Plus, UNIMODULAR_TOL).unwrap();
        let want = C64::from_polar(1.0, 2.0);
        let sm = s.iter().find(|r| (r.lambda - want).norm() < 1e-10).unwrap();
        assert!(matches!(charge_from_soliton(sm, 4), Err(Error::PhaseIncompatible { .. })));
    }

    #[test]
    fn oracle_width_one() {
        let g = Gate::fswap();
        let space = brute_force_conserved_space(&g, &g, 4, 1).unwrap();
        assert_eq!(space.dim(), 2);
    }

    #[test]
    fn composite_rules() {
        let g = Gate::fswap();
        let z = find_solitons(&g, &g, 1, Direction::Plus, UNIMODULAR_TOL).unwrap().remove(0);
        let c = composite_soliton(&[(z.clone(), 0), (z.clone(), 4)]).unwrap();
        assert_eq!(c.record.width, 5);
        let f = FloquetOperator::new(&g, &g, 4).unwrap();
        assert!(c.translation_residual(&f).unwrap() < 1e-12);
        assert!(composite_soliton(&[(z.clone(), 0), (z.clone(), 0)]).is_err());
        assert!(composite_soliton(&[(z.clone(), 1)]).is_err());
    }

    #[test]
    fn decomposition_of_single_charge() {
        let g = Gate::fswap();
        let f = FloquetOperator::new(&g, &g, 4).unwrap();
        let cat = default_catalog(&g, &g, 3).unwrap();
        let q = sum_over(&qubit::z(), (0..8).step_by(2), 8);
        let d = decompose_into_soliton_charges(&f, &q, &cat).unwrap();
        assert!(d.residual < 1e-12);
        let a = d.alpha.iter().find(|c| c.w == 1).unwrap();
        assert!((C64::new(a.value[0], a.value[1]) - 1.0).norm() < 1e-12);
        assert!(d.beta.iter().chain(d.alpha.iter().filter(|c| c.w == 3)).all(|c| c.value[0].hypot(c.value[1]) < 1e-12));
    }
}
