//! Exact Pauli-string algebra on the integer lattice, Clifford brickwork
//! propagation and Jordan-Wigner fermions.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::chain::{string_key, ChainStrings, ChainWindow};
use crate::error::{contract, Error, Result};
use crate::gates::Gate;
use crate::tensor::{basis_string, LocalOperator, I, ONE, ZERO};

/// Coefficients below this magnitude are dropped by [`PauliSum::canonical`].
pub const DROP_TOL: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Pauli {
    /// Index in the `[I, X, Y, Z]` string basis.
    pub fn index(self) -> usize {
        match self {
            Pauli::X => 1,
            Pauli::Y => 2,
            Pauli::Z => 3,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            1 => Some(Pauli::X),
            2 => Some(Pauli::Y),
            3 => Some(Pauli::Z),
            _ => None,
        }
    }

    pub fn letter(self) -> char {
        match self {
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// `a · b = phase · c` for possibly-identity letters, encoded as indices.
fn mul_letters(a: usize, b: usize) -> (C64, usize) {
    match (a, b) {
        (0, b) => (ONE, b),
        (a, 0) => (ONE, a),
        (a, b) if a == b => (ONE, 0),
        _ => {
            let c = 6 - a - b;
            // cyclic X→Y→Z gives +i
            let cyclic = (a % 3) + 1 == b;
            (if cyclic { I } else { -I }, c)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PauliTerm {
    pub coeff: C64,
    pub letters: BTreeMap<i64, Pauli>,
    /// Implicit `Z` on every site `< s`.
    pub left_string: Option<i64>,
}

impl PauliTerm {
    pub fn new(coeff: C64, letters: impl IntoIterator<Item = (i64, Pauli)>, left_string: Option<i64>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (s, p) in letters {
            if map.insert(s, p).is_some() {
                return contract(format!("site {s} appears twice"));
            }
        }
        if let (Some(s), Some((&lo, _))) = (left_string, map.iter().next()) {
            if lo < s {
                return contract(format!("explicit letter at site {lo} inside the tail ending at {s}"));
            }
        }
        Ok(Self { coeff, letters: map, left_string }.absorbed())
    }

    /// Letter at `site`, including the tail (0 is identity).
    pub fn letter_at(&self, site: i64) -> usize {
        if let Some(p) = self.letters.get(&site) {
            return p.index();
        }
        match self.left_string {
            Some(s) if site < s => 3,
            _ => 0,
        }
    }

    /// Pulls explicit `Z`s adjacent to the tail into it.
    fn absorbed(mut self) -> Self {
        if let Some(mut s) = self.left_string {
            while self.letters.get(&s) == Some(&Pauli::Z) {
                self.letters.remove(&s);
                s += 1;
            }
            self.left_string = Some(s);
        }
        self
    }

    /// Moves the tail start down to `s0`, writing the freed `Z`s explicitly.
    fn lowered(&self, s0: i64) -> Self {
        let mut out = self.clone();
        if let Some(s) = self.left_string {
            if s0 < s {
                for site in s0..s {
                    out.letters.insert(site, Pauli::Z);
                }
                out.left_string = Some(s0);
            }
        }
        out
    }

    fn min_site(&self) -> Option<i64> {
        self.letters.keys().next().copied()
    }

    /// Exact operator product `self · other`.
    pub fn product(&self, other: &PauliTerm) -> PauliTerm {
        let (a, b, tail) = match (self.left_string, other.left_string) {
            (Some(s), Some(t)) => {
                let m = s.min(t);
                (self.lowered(m), other.lowered(m), None)
            }
            (Some(s), None) => {
                let m = other.min_site().map_or(s, |x| x.min(s));
                (self.lowered(m), other.clone(), Some(m))
            }
            (None, Some(t)) => {
                let m = self.min_site().map_or(t, |x| x.min(t));
                (self.clone(), other.lowered(m), Some(m))
            }
            (None, None) => (self.clone(), other.clone(), None),
        };
        let mut coeff = a.coeff * b.coeff;
        let mut letters = BTreeMap::new();
        let sites: std::collections::BTreeSet<i64> = a.letters.keys().chain(b.letters.keys()).copied().collect();
        for site in sites {
            let la = a.letters.get(&site).map_or(0, |p| p.index());
            let lb = b.letters.get(&site).map_or(0, |p| p.index());
            let (ph, c) = mul_letters(la, lb);
            coeff *= ph;
            if let Some(p) = Pauli::from_index(c) {
                letters.insert(site, p);
            }
        }
        PauliTerm { coeff, letters, left_string: tail }.absorbed()
    }

    fn key(&self) -> TermKey {
        TermKey {
            min_site: if self.left_string.is_some() { i64::MIN } else { self.min_site().unwrap_or(i64::MAX) },
            letters: self.letters.iter().map(|(&s, &p)| (s, p)).collect(),
            left_string: self.left_string,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct TermKey {
    min_site: i64,
    letters: Vec<(i64, Pauli)>,
    left_string: Option<i64>,
}

/// Sum of Pauli terms in canonical order with merged equal strings.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct PauliSum {
    terms: Vec<PauliTerm>,
}

impl PauliSum {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Merges equal strings and drops terms with `|c| < DROP_TOL`.
    pub fn canonical(terms: impl IntoIterator<Item = PauliTerm>) -> Self {
        Self::merge(terms, |c| c.norm() >= DROP_TOL)
    }

    /// Merges equal strings, dropping only coefficients that are exactly zero.
    pub fn merge_exact(terms: impl IntoIterator<Item = PauliTerm>) -> Self {
        Self::merge(terms, |c| c != ZERO)
    }

    fn merge(terms: impl IntoIterator<Item = PauliTerm>, keep: impl Fn(C64) -> bool) -> Self {
        let mut acc: BTreeMap<TermKey, PauliTerm> = BTreeMap::new();
        for t in terms {
            let t = t.absorbed();
            acc.entry(t.key()).and_modify(|e| e.coeff += t.coeff).or_insert(t);
        }
        Self { terms: acc.into_values().filter(|t| keep(t.coeff)).collect() }
    }

    pub fn terms(&self) -> &[PauliTerm] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn has_tails(&self) -> bool {
        self.terms.iter().any(|t| t.left_string.is_some())
    }

    pub fn scale(&self, c: C64) -> Self {
        Self::merge_exact(self.terms.iter().map(|t| PauliTerm { coeff: t.coeff * c, ..t.clone() }))
    }

    pub fn add(&self, other: &PauliSum) -> Self {
        Self::merge_exact(self.terms.iter().chain(other.terms.iter()).cloned())
    }

    pub fn sub(&self, other: &PauliSum) -> Self {
        self.add(&other.scale(-ONE))
    }

    pub fn product(&self, other: &PauliSum) -> Self {
        Self::merge_exact(self.terms.iter().flat_map(|a| other.terms.iter().map(move |b| a.product(b))))
    }

    pub fn max_abs_diff(&self, other: &PauliSum) -> f64 {
        self.sub(other).terms.iter().map(|t| t.coeff.norm()).fold(0.0, f64::max)
    }

    /// Shifts every site by `delta`.
    pub fn translated(&self, delta: i64) -> Self {
        Self::merge_exact(self.terms.iter().map(|t| PauliTerm {
            coeff: t.coeff,
            letters: t.letters.iter().map(|(&s, &p)| (s + delta, p)).collect(),
            left_string: t.left_string.map(|s| s + delta),
        }))
    }

    /// Site range `[lo, hi]` of the explicit letters, requiring no tails.
    pub fn finite_support(&self) -> Result<Option<(i64, i64)>> {
        if self.has_tails() {
            return contract("sum has semi-infinite tails");
        }
        let lo = self.terms.iter().filter_map(|t| t.letters.keys().next()).min().copied();
        let hi = self.terms.iter().filter_map(|t| t.letters.keys().next_back()).max().copied();
        Ok(lo.zip(hi))
    }

    /// Dense operator on `[lo, hi]`.
    pub fn to_local(&self) -> Result<(i64, LocalOperator)> {
        let Some((lo, hi)) = self.finite_support()? else {
            let id = self.terms.iter().map(|t| t.coeff).sum::<C64>();
            return Ok((0, LocalOperator::identity(2, 1).scale(id)));
        };
        let w = (hi - lo + 1) as usize;
        let mut acc = LocalOperator::zeros(2, w);
        for t in &self.terms {
            let letters: Vec<usize> = (lo..=hi).map(|s| t.letter_at(s)).collect();
            acc = &acc + &basis_string(2, &letters).scale(t.coeff);
        }
        Ok((lo, acc))
    }

    /// Window on a periodic chain with lattice site `s` placed at `(s + offset) mod n`.
    pub fn to_window(&self, chain_len: usize, offset: i64) -> Result<ChainWindow> {
        let (lo, op) = self.to_local()?;
        if op.width() > chain_len {
            return contract(format!("support of width {} exceeds the chain", op.width()));
        }
        let start = (lo + offset).rem_euclid(chain_len as i64) as usize;
        ChainWindow::new(op, start, chain_len)
    }

    /// String expansion on a periodic chain, folding sites mod `n`.
    pub fn to_chain_strings(&self, chain_len: usize, offset: i64) -> Result<ChainStrings> {
        if self.has_tails() {
            return contract("sum has semi-infinite tails");
        }
        let mut out = ChainStrings::new(2, chain_len);
        for t in &self.terms {
            let mut full = vec![0usize; chain_len];
            for (&s, &p) in &t.letters {
                let site = (s + offset).rem_euclid(chain_len as i64) as usize;
                if full[site] != 0 {
                    return contract("support wraps onto itself");
                }
                full[site] = p.index();
            }
            *out.coeffs.entry(string_key(2, &full)).or_insert(ZERO) += t.coeff;
        }
        Ok(out)
    }
}

pub fn commutator(p: &PauliSum, q: &PauliSum) -> PauliSum {
    p.product(q).sub(&q.product(p))
}

pub fn anticommutator(p: &PauliSum, q: &PauliSum) -> PauliSum {
    p.product(q).add(&q.product(p))
}

impl fmt::Display for PauliTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.coeff.re, self.coeff.im)?;
        for (s, p) in &self.letters {
            write!(f, " {s}:{}", p.letter())?;
        }
        if let Some(s) = self.left_string {
            write!(f, " tail:{s}")?;
        }
        Ok(())
    }
}

impl fmt::Display for PauliSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in &self.terms {
            writeln!(f, "{t}")?;
        }
        Ok(())
    }
}

impl FromStr for PauliTerm {
    type Err = Error;

    fn from_str(line: &str) -> Result<Self> {
        let bad = |m: String| Error::Parse(format!("{m} in term `{line}`"));
        let mut tok = line.split_whitespace();
        let mut num = |what: &str| -> Result<f64> {
            tok.next()
                .ok_or_else(|| bad(format!("missing {what}")))?
                .parse::<f64>()
                .map_err(|e| bad(format!("bad {what}: {e}")))
        };
        let coeff = C64::new(num("real part")?, num("imaginary part")?);
        let mut letters = Vec::new();
        let mut tail = None;
        for t in tok {
            let (a, b) = t.split_once(':').ok_or_else(|| bad(format!("token `{t}` is not site:letter")))?;
            if a == "tail" {
                tail = Some(b.parse::<i64>().map_err(|e| bad(format!("bad tail: {e}")))?);
                continue;
            }
            let site = a.parse::<i64>().map_err(|e| bad(format!("bad site `{a}`: {e}")))?;
            let p = match b {
                "X" => Pauli::X,
                "Y" => Pauli::Y,
                "Z" => Pauli::Z,
                _ => return Err(bad(format!("unknown letter `{b}`"))),
            };
            letters.push((site, p));
        }
        PauliTerm::new(coeff, letters, tail).map_err(|e| bad(e.to_string()))
    }
}

impl FromStr for PauliSum {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let terms = s
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::parse)
            .collect::<Result<Vec<PauliTerm>>>()?;
        Ok(PauliSum::merge_exact(terms))
    }
}

/// Signed two-site Pauli `sign · (a ⊗ b)`, letters as basis indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignedPair {
    pub sign: i8,
    pub a: usize,
    pub b: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CliffordTableau {
    pub x1: SignedPair,
    pub z1: SignedPair,
    pub x2: SignedPair,
    pub z2: SignedPair,
    pub z_string_stable: bool,
    table: Vec<SignedPair>,
}

fn pauli_pair(a: usize, b: usize) -> LocalOperator {
    basis_string(2, &[a, b])
}

fn image_of(g: &Gate, a: usize, b: usize) -> Option<SignedPair> {
    let img = g.conjugate(&pauli_pair(a, b)).ok()?;
    let coeffs = img.string_coefficients();
    let (k, c) = coeffs.iter().enumerate().max_by(|x, y| x.1.norm().total_cmp(&y.1.norm()))?;
    let sign = if (c - ONE).norm() < 1e-10 {
        1
    } else if (c + ONE).norm() < 1e-10 {
        -1
    } else {
        return None;
    };
    let others = coeffs.iter().enumerate().filter(|(j, _)| *j != k).map(|(_, z)| z.norm()).fold(0.0, f64::max);
    if others >= 1e-10 {
        return None;
    }
    let exact = pauli_pair(k / 4, k % 4).scale(C64::from(sign as f64));
    if exact.max_abs_diff(&img) >= 1e-10 {
        return None;
    }
    Some(SignedPair { sign, a: k / 4, b: k % 4 })
}

pub fn tableau_from_gate(g: &Gate) -> Result<CliffordTableau> {
    if g.d() != 2 {
        return contract(format!("Clifford tableaus need qubits, got d = {}", g.d()));
    }
    if !g.is_unitary(1e-10) {
        return contract("gate is not unitary");
    }
    let gens = [("X⊗1", 1, 0), ("Z⊗1", 3, 0), ("1⊗X", 0, 1), ("1⊗Z", 0, 3)];
    let mut imgs = Vec::new();
    for (name, a, b) in gens {
        imgs.push(image_of(g, a, b).ok_or(Error::NonClifford { generator: name })?);
    }
    let mut table = Vec::with_capacity(16);
    for k in 0..16 {
        table.push(image_of(g, k / 4, k % 4).ok_or(Error::NonClifford { generator: "product of generators" })?);
    }
    let zz = table[15];
    Ok(CliffordTableau {
        x1: imgs[0],
        z1: imgs[1],
        x2: imgs[2],
        z2: imgs[3],
        z_string_stable: zz == SignedPair { sign: 1, a: 3, b: 3 },
        table,
    })
}

impl CliffordTableau {
    /// Image of `a ⊗ b`.
    pub fn image(&self, a: usize, b: usize) -> SignedPair {
        self.table[4 * a + b]
    }
}

/// Applies one layer whose bonds are `(p, p+1)` with `p ≡ parity (mod 2)`.
fn apply_layer(tab: &CliffordTableau, parity: i64, t: &PauliTerm) -> PauliTerm {
    let left_of = |s: i64| s - (s - parity).rem_euclid(2);
    let mut term = match t.left_string {
        Some(s) => t.lowered(left_of(s)),
        None => t.clone(),
    };
    let bonds: std::collections::BTreeSet<i64> = term.letters.keys().map(|&s| left_of(s)).collect();
    let mut coeff = term.coeff;
    let mut letters = BTreeMap::new();
    for p in bonds {
        let a = term.letters.get(&p).map_or(0, |x| x.index());
        let b = term.letters.get(&(p + 1)).map_or(0, |x| x.index());
        let img = tab.image(a, b);
        if img.sign < 0 {
            coeff = -coeff;
        }
        if let Some(x) = Pauli::from_index(img.a) {
            letters.insert(p, x);
        }
        if let Some(x) = Pauli::from_index(img.b) {
            letters.insert(p + 1, x);
        }
    }
    term.coeff = coeff;
    term.letters = letters;
    term.absorbed()
}

/// `t` Floquet periods on the infinite lattice: `U` on bonds `(2k, 2k+1)`,
/// then `V` on bonds `(2k+1, 2k+2)`.
pub fn brickwork_step(tu: &CliffordTableau, tv: &CliffordTableau, p: &PauliSum, t: usize) -> Result<PauliSum> {
    if p.has_tails() && !(tu.z_string_stable && tv.z_string_stable) {
        return contract("semi-infinite Z tails need tableaus that fix Z⊗Z");
    }
    let mut terms = p.terms.clone();
    for _ in 0..t {
        terms = terms.iter().map(|x| apply_layer(tv, 1, &apply_layer(tu, 0, x))).collect();
    }
    Ok(PauliSum::merge_exact(terms))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JwMode {
    SemiInfinite,
    FiniteFrom0,
}

/// `σ⁻ = (X − iY)/2` at `j` attached to a Jordan-Wigner string.
pub fn jw_fermion(j: i64, mode: JwMode) -> Result<PauliSum> {
    let (zs, tail): (Vec<i64>, Option<i64>) = match mode {
        JwMode::SemiInfinite => (vec![], Some(j)),
        JwMode::FiniteFrom0 => {
            if j < 0 {
                return contract(format!("finite strings start at 0, got j = {j}"));
            }
            ((0..j).collect(), None)
        }
    };
    let mk = |c: C64, p: Pauli| {
        let letters = zs.iter().map(|&s| (s, Pauli::Z)).chain(std::iter::once((j, p)));
        PauliTerm { coeff: c, letters: letters.collect(), left_string: tail }
    };
    Ok(PauliSum::merge_exact([mk(C64::new(0.5, 0.0), Pauli::X), mk(C64::new(0.0, -0.5), Pauli::Y)]))
}

/// `F_{j,l} = f_j f_{j+l+1}`.
pub fn fermion_pair(j: i64, l: i64) -> Result<PauliSum> {
    if l < 0 {
        return contract(format!("gap must be non-negative, got {l}"));
    }
    Ok(jw_fermion(j, JwMode::SemiInfinite)?.product(&jw_fermion(j + l + 1, JwMode::SemiInfinite)?))
}
