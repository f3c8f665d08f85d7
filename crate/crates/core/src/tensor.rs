//! Dense qudit operator algebra.
//!
//! A [`LocalOperator`] is a `d^w × d^w` complex matrix on `w` consecutive
//! sites. Basis states are ordered `|i_0⟩⊗…⊗|i_{w-1}⟩` with `i_0` the most
//! significant digit, so site 0 is the slowest-varying index.
//!
//! Operators are expanded in a string basis built from `d²` single-site
//! operators, with index 0 always the identity. For qubits these are the
//! Pauli matrices `1, X, Y, Z`; for `d ≥ 3` the clock/shift products
//! `X^a Z^b` indexed by `a·d + b`. Every single-site element is a monomial
//! matrix with `tr(B_s† B_t) = d·δ_st`, so a width-`w` string has squared
//! Hilbert-Schmidt norm `d^w` and the expansion coefficient of `A` along
//! `B_s` is `tr(B_s† A) / d^w`.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{contract, Result};
use crate::limits::Limits;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
pub(crate) const I: C64 = C64::new(0.0, 1.0);

/// `base^exp` with an overflow-safe `u128` result.
pub(crate) fn ipow(base: usize, exp: usize) -> u128 {
    (base as u128).saturating_pow(exp as u32)
}

/// `base^exp` as `usize`; callers guarantee the value fits.
pub(crate) fn upow(base: usize, exp: usize) -> usize {
    base.pow(exp as u32)
}

/// Dense operator on `width` sites of local dimension `d`.
///
/// Width 0 is used only for the scalar left over after tracing out every
/// site.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalOperator {
    d: usize,
    width: usize,
    matrix: DMatrix<C64>,
}

impl LocalOperator {
    pub fn new(d: usize, width: usize, matrix: DMatrix<C64>) -> Result<Self> {
        if d < 2 {
            return contract(format!("qudit dimension must be at least 2, got {d}"));
        }
        let dim = ipow(d, width);
        if matrix.nrows() as u128 != dim || matrix.ncols() as u128 != dim {
            return contract(format!(
                "matrix shape {}x{} does not match d={d}, w={width}",
                matrix.nrows(),
                matrix.ncols()
            ));
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return contract("operator entries must be finite");
        }
        Ok(Self { d, width, matrix })
    }

    /// Builds from a matrix whose shape is already known to be right.
    pub(crate) fn from_parts(d: usize, width: usize, matrix: DMatrix<C64>) -> Self {
        debug_assert_eq!(matrix.nrows(), upow(d, width));
        Self { d, width, matrix }
    }

    pub fn identity(d: usize, width: usize) -> Self {
        let n = upow(d, width);
        Self::from_parts(d, width, DMatrix::identity(n, n))
    }

    pub fn zeros(d: usize, width: usize) -> Self {
        let n = upow(d, width);
        Self::from_parts(d, width, DMatrix::zeros(n, n))
    }

    /// Single-site operator from a `d × d` matrix.
    pub fn single_site(matrix: DMatrix<C64>) -> Result<Self> {
        let d = matrix.nrows();
        Self::new(d, 1, matrix)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Hilbert-space dimension `d^w`.
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub(crate) fn matrix_mut(&mut self) -> &mut DMatrix<C64> {
        &mut self.matrix
    }

    /// Tensor product with `other` placed to the right.
    pub fn kron(&self, other: &LocalOperator) -> LocalOperator {
        assert_eq!(self.d, other.d, "kron of operators with different d");
        LocalOperator::from_parts(self.d, self.width + other.width, self.matrix.kronecker(&other.matrix))
    }

    pub fn dagger(&self) -> LocalOperator {
        LocalOperator::from_parts(self.d, self.width, self.matrix.adjoint())
    }

    pub fn scale(&self, c: C64) -> LocalOperator {
        LocalOperator::from_parts(self.d, self.width, &self.matrix * c)
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    /// Operator product `self · other`.
    pub fn compose(&self, other: &LocalOperator) -> LocalOperator {
        assert!(self.same_shape(other), "compose of operators with different shapes");
        LocalOperator::from_parts(self.d, self.width, &self.matrix * &other.matrix)
    }

    pub fn same_shape(&self, other: &LocalOperator) -> bool {
        self.d == other.d && self.width == other.width
    }

    /// Largest entry magnitude of `self - other`.
    pub fn max_abs_diff(&self, other: &LocalOperator) -> f64 {
        assert!(self.same_shape(other), "comparing operators with different shapes");
        self.matrix.iter().zip(other.matrix.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn hs_norm(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Traces out `sites`, returning an operator on the remaining sites in
    /// their original order.
    pub fn partial_trace(&self, sites: &[usize]) -> Result<LocalOperator> {
        let w = self.width;
        let mut traced = vec![false; w];
        for &s in sites {
            if s >= w {
                return contract(format!("partial trace site {s} outside width {w}"));
            }
            traced[s] = true;
        }
        let kept: Vec<usize> = (0..w).filter(|&s| !traced[s]).collect();
        let gone: Vec<usize> = (0..w).filter(|&s| traced[s]).collect();
        let d = self.d;
        let kdim = upow(d, kept.len());
        let gdim = upow(d, gone.len());
        let strides: Vec<usize> = (0..w).map(|s| upow(d, w - 1 - s)).collect();
        let offset = |digits_of: usize, positions: &[usize]| -> usize {
            let mut rem = digits_of;
            let mut off = 0;
            for &p in positions.iter().rev() {
                off += (rem % d) * strides[p];
                rem /= d;
            }
            off
        };
        let kept_off: Vec<usize> = (0..kdim).map(|k| offset(k, &kept)).collect();
        let gone_off: Vec<usize> = (0..gdim).map(|g| offset(g, &gone)).collect();
        let mut out = DMatrix::zeros(kdim, kdim);
        for c in 0..kdim {
            for r in 0..kdim {
                let mut acc = ZERO;
                for &g in &gone_off {
                    acc += self.matrix[(kept_off[r] + g, kept_off[c] + g)];
                }
                out[(r, c)] = acc;
            }
        }
        Ok(LocalOperator::from_parts(d, kept.len(), out))
    }

    /// Component whose string expansion is non-identity at both boundary
    /// sites, i.e. the orthogonal projection onto the boundary-traceless
    /// subspace.
    pub fn boundary_traceless_project(&self) -> LocalOperator {
        if self.width == 0 {
            return LocalOperator::from_parts(self.d, 0, DMatrix::zeros(1, 1));
        }
        let mut coeffs = self.string_coefficients();
        let w = self.width;
        let d2 = self.d * self.d;
        let lead = upow(d2, w - 1);
        for (idx, c) in coeffs.iter_mut().enumerate() {
            let first = idx / lead;
            let last = idx % d2;
            if first == 0 || last == 0 {
                *c = ZERO;
            }
        }
        LocalOperator::from_string_coefficients(self.d, w, &coeffs)
    }

    /// `true` when the operator is a fixed point of
    /// [`boundary_traceless_project`](Self::boundary_traceless_project)
    /// up to `tol` in relative Hilbert-Schmidt norm.
    pub fn is_boundary_traceless(&self, tol: f64) -> bool {
        let p = self.boundary_traceless_project();
        (self - &p).hs_norm() <= tol * self.hs_norm().max(f64::MIN_POSITIVE)
    }

    /// Column-stacking vectorization. The Hilbert-Schmidt inner product of
    /// two operators equals the plain complex dot product of their vectors.
    pub fn vectorize(&self) -> DVector<C64> {
        DVector::from_column_slice(self.matrix.as_slice())
    }

    pub fn devectorize(d: usize, width: usize, v: &DVector<C64>) -> Result<LocalOperator> {
        let n = upow(d, width);
        if v.len() != n * n {
            return contract(format!("vector of length {} cannot hold a {n}x{n} operator", v.len()));
        }
        LocalOperator::new(d, width, DMatrix::from_column_slice(n, n, v.as_slice()))
    }

    /// Expansion coefficients `tr(B_s† A) / d^w` over all `d^{2w}` strings,
    /// indexed with site 0 most significant.
    pub fn string_coefficients(&self) -> Vec<C64> {
        let d = self.d;
        let w = self.width;
        let n = self.dim();
        let d2 = d * d;
        let (spread_row, spread_col) = spreads(d, w);
        let mut x = vec![ZERO; n * n];
        for c in 0..n {
            for r in 0..n {
                x[spread_row[r] + spread_col[c]] = self.matrix[(r, c)];
            }
        }
        let basis = SiteBasis::new(d);
        // forward[s][p] = conj(B_s[i, j]) / d with p = i·d + j
        let mut forward = vec![ZERO; d2 * d2];
        for s in 0..d2 {
            for i in 0..d {
                for j in 0..d {
                    forward[s * d2 + i * d + j] = basis.matrices[s][(i, j)].conj() / d as f64;
                }
            }
        }
        for site in 0..w {
            transform_axis(&mut x, d2, w, site, &forward);
        }
        x
    }

    /// Inverse of [`string_coefficients`](Self::string_coefficients).
    pub fn from_string_coefficients(d: usize, width: usize, coeffs: &[C64]) -> LocalOperator {
        let d2 = d * d;
        assert_eq!(coeffs.len(), upow(d2, width), "coefficient vector has wrong length");
        let basis = SiteBasis::new(d);
        let mut backward = vec![ZERO; d2 * d2];
        for s in 0..d2 {
            for i in 0..d {
                for j in 0..d {
                    backward[(i * d + j) * d2 + s] = basis.matrices[s][(i, j)];
                }
            }
        }
        let mut x = coeffs.to_vec();
        for site in 0..width {
            transform_axis(&mut x, d2, width, site, &backward);
        }
        let n = upow(d, width);
        let (spread_row, spread_col) = spreads(d, width);
        let m = DMatrix::from_fn(n, n, |r, c| x[spread_row[r] + spread_col[c]]);
        LocalOperator::from_parts(d, width, m)
    }

    /// Embeds into a periodic chain of `chain_len` sites starting at `x`.
    pub fn embed(&self, x: usize, chain_len: usize) -> Result<EmbeddedOperator> {
        EmbeddedOperator::new(self.clone(), x, chain_len)
    }
}

fn spreads(d: usize, w: usize) -> (Vec<usize>, Vec<usize>) {
    let n = upow(d, w);
    let d2 = d * d;
    let mut row = vec![0; n];
    let mut col = vec![0; n];
    for idx in 0..n {
        let mut rem = idx;
        let mut r = 0;
        let mut c = 0;
        for k in 0..w {
            let digit = rem % d;
            rem /= d;
            let place = upow(d2, k);
            r += digit * d * place;
            c += digit * place;
        }
        row[idx] = r;
        col[idx] = c;
    }
    (row, col)
}

/// Applies the `d2 × d2` matrix `m` (row-major) along axis `site` of the
/// `width`-axis tensor `x`, each axis of extent `d2`, axis 0 slowest.
fn transform_axis(x: &mut [C64], d2: usize, width: usize, site: usize, m: &[C64]) {
    let stride = upow(d2, width - 1 - site);
    let block = stride * d2;
    let mut tmp = vec![ZERO; d2];
    for base in (0..x.len()).step_by(block) {
        for inner in 0..stride {
            let start = base + inner;
            for (p, t) in tmp.iter_mut().enumerate() {
                *t = x[start + p * stride];
            }
            for s in 0..d2 {
                let row = &m[s * d2..(s + 1) * d2];
                let mut acc = ZERO;
                for (a, b) in row.iter().zip(tmp.iter()) {
                    acc += a * b;
                }
                x[start + s * stride] = acc;
            }
        }
    }
}

impl Add for &LocalOperator {
    type Output = LocalOperator;
    fn add(self, rhs: &LocalOperator) -> LocalOperator {
        assert!(self.same_shape(rhs), "adding operators with different shapes");
        LocalOperator::from_parts(self.d, self.width, &self.matrix + &rhs.matrix)
    }
}

impl Sub for &LocalOperator {
    type Output = LocalOperator;
    fn sub(self, rhs: &LocalOperator) -> LocalOperator {
        assert!(self.same_shape(rhs), "subtracting operators with different shapes");
        LocalOperator::from_parts(self.d, self.width, &self.matrix - &rhs.matrix)
    }
}

impl Neg for &LocalOperator {
    type Output = LocalOperator;
    fn neg(self) -> LocalOperator {
        self.scale(-ONE)
    }
}

impl Mul<C64> for &LocalOperator {
    type Output = LocalOperator;
    fn mul(self, rhs: C64) -> LocalOperator {
        self.scale(rhs)
    }
}

struct BondLayout {
    d2: usize,
    offsets: Vec<usize>,
    bases: Vec<usize>,
    gate: Vec<C64>,
}

impl BondLayout {
    fn new(n: usize, d: usize, n_sites: usize, p: usize, q: usize, g: &DMatrix<C64>) -> Self {
        let d2 = d * d;
        let sp = upow(d, n_sites - 1 - p);
        let sq = upow(d, n_sites - 1 - q);
        let offsets = (0..d2).map(|ab| (ab / d) * sp + (ab % d) * sq).collect();
        let bases = (0..n).filter(|&i| (i / sp).is_multiple_of(d) && (i / sq).is_multiple_of(d)).collect();
        let gate = (0..d2 * d2).map(|k| g[(k / d2, k % d2)]).collect();
        Self { d2, offsets, bases, gate }
    }
}

/// `m ← G m` where `G` is the two-site gate `g` with its first factor on
/// site `p` and second on site `q` of an `n_sites`-site register.
pub(crate) fn left_two_site(m: &mut DMatrix<C64>, d: usize, n_sites: usize, p: usize, q: usize, g: &DMatrix<C64>) {
    let n = m.nrows();
    let lay = BondLayout::new(n, d, n_sites, p, q, g);
    let d2 = lay.d2;
    let mut x = vec![ZERO; d2];
    for col in m.as_mut_slice().chunks_mut(n) {
        for &b in &lay.bases {
            for (t, &o) in x.iter_mut().zip(&lay.offsets) {
                *t = col[b + o];
            }
            for (r, &o) in lay.offsets.iter().enumerate() {
                let row = &lay.gate[r * d2..(r + 1) * d2];
                col[b + o] = row.iter().zip(&x).map(|(a, v)| a * v).sum();
            }
        }
    }
}

/// `m ← m G†`, with `G` placed as in [`left_two_site`].
pub(crate) fn right_two_site_adjoint(
    m: &mut DMatrix<C64>,
    d: usize,
    n_sites: usize,
    p: usize,
    q: usize,
    g: &DMatrix<C64>,
) {
    let n = m.nrows();
    let lay = BondLayout::new(n, d, n_sites, p, q, g);
    let d2 = lay.d2;
    let slice = m.as_mut_slice();
    let mut x = vec![ZERO; d2];
    for &b in &lay.bases {
        for r in 0..n {
            for (t, &o) in x.iter_mut().zip(&lay.offsets) {
                *t = slice[r + (b + o) * n];
            }
            for (c, &o) in lay.offsets.iter().enumerate() {
                let row = &lay.gate[c * d2..(c + 1) * d2];
                slice[r + (b + o) * n] = row.iter().zip(&x).map(|(a, v)| a.conj() * v).sum();
            }
        }
    }
}

/// `m ← G m G†`, with `G` placed as in [`left_two_site`].
pub(crate) fn conjugate_two_site(m: &mut DMatrix<C64>, d: usize, n_sites: usize, p: usize, q: usize, g: &DMatrix<C64>) {
    left_two_site(m, d, n_sites, p, q, g);
    right_two_site_adjoint(m, d, n_sites, p, q, g);
}

/// `tr(a† b)`.
pub fn hs_inner(a: &LocalOperator, b: &LocalOperator) -> Result<C64> {
    if !a.same_shape(b) {
        return contract(format!("hs_inner of (d={}, w={}) and (d={}, w={})", a.d, a.width, b.d, b.width));
    }
    Ok(a.matrix.iter().zip(b.matrix.iter()).map(|(x, y)| x.conj() * y).sum())
}

pub fn hs_norm(a: &LocalOperator) -> f64 {
    a.hs_norm()
}

/// The `d²` single-site operators underlying the string basis.
#[derive(Clone, Debug)]
pub struct SiteBasis {
    pub d: usize,
    pub matrices: Vec<DMatrix<C64>>,
}

impl SiteBasis {
    pub fn new(d: usize) -> Self {
        let matrices = if d == 2 {
            pauli_matrices().to_vec()
        } else {
            let omega = C64::from_polar(1.0, 2.0 * PI / d as f64);
            let mut out = Vec::with_capacity(d * d);
            for a in 0..d {
                for b in 0..d {
                    // X^a Z^b |j⟩ = ω^{bj} |j + a⟩
                    let mut m = DMatrix::zeros(d, d);
                    for j in 0..d {
                        m[((j + a) % d, j)] = omega.powu((b * j) as u32);
                    }
                    out.push(m);
                }
            }
            out
        };
        Self { d, matrices }
    }
}

/// `[1, σx, σy, σz]`.
pub fn pauli_matrices() -> [DMatrix<C64>; 4] {
    let id = DMatrix::identity(2, 2);
    let x = DMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]);
    let y = DMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]);
    let z = DMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]);
    [id, x, y, z]
}

/// Named single-qubit operators.
pub mod qubit {
    use super::*;

    pub fn id() -> LocalOperator {
        LocalOperator::identity(2, 1)
    }
    pub fn x() -> LocalOperator {
        LocalOperator::from_parts(2, 1, pauli_matrices()[1].clone())
    }
    pub fn y() -> LocalOperator {
        LocalOperator::from_parts(2, 1, pauli_matrices()[2].clone())
    }
    pub fn z() -> LocalOperator {
        LocalOperator::from_parts(2, 1, pauli_matrices()[3].clone())
    }
    /// `σ− = |1⟩⟨0| = (σx − iσy)/2`.
    pub fn sigma_minus() -> LocalOperator {
        LocalOperator::from_parts(2, 1, DMatrix::from_row_slice(2, 2, &[ZERO, ZERO, ONE, ZERO]))
    }
    /// `σ+ = σ−†`.
    pub fn sigma_plus() -> LocalOperator {
        sigma_minus().dagger()
    }
    /// Tensor product of single-site operators, left to right.
    pub fn string(parts: &[LocalOperator]) -> LocalOperator {
        let mut it = parts.iter();
        let first = it.next().expect("empty operator string").clone();
        it.fold(first, |acc, p| acc.kron(p))
    }
}

/// Basis string with the given per-site indices.
pub fn basis_string(d: usize, letters: &[usize]) -> LocalOperator {
    let basis = SiteBasis::new(d);
    let mut m = DMatrix::identity(1, 1);
    for &s in letters {
        m = m.kronecker(&basis.matrices[s]);
    }
    LocalOperator::from_parts(d, letters.len(), m)
}

/// Per-site letters of string index `idx` (site 0 first).
pub fn string_letters(d: usize, width: usize, idx: usize) -> Vec<usize> {
    let d2 = d * d;
    let mut out = vec![0; width];
    let mut rem = idx;
    for k in (0..width).rev() {
        out[k] = rem % d2;
        rem /= d2;
    }
    out
}

/// All `d^{2w}` basis strings, identity first.
pub fn operator_basis(d: usize, width: usize) -> Result<Vec<LocalOperator>> {
    operator_basis_with(d, width, &Limits::default())
}

pub fn operator_basis_with(d: usize, width: usize, limits: &Limits) -> Result<Vec<LocalOperator>> {
    if d < 2 || width == 0 {
        return contract(format!("operator basis needs d >= 2 and w >= 1, got d={d}, w={width}"));
    }
    limits.check_superop("operator basis", ipow(d, 2 * width))?;
    let count = upow(d * d, width);
    Ok((0..count).map(|idx| basis_string(d, &string_letters(d, width, idx))).collect())
}

/// A local operator placed on a periodic chain.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddedOperator {
    pub inner: LocalOperator,
    pub x: usize,
    pub chain_len: usize,
}

impl EmbeddedOperator {
    pub fn new(inner: LocalOperator, x: usize, chain_len: usize) -> Result<Self> {
        if !chain_len.is_multiple_of(2) || chain_len < 4 {
            return contract(format!("chain length must be even and at least 4, got {chain_len}"));
        }
        if inner.width() > chain_len || inner.width() == 0 {
            return contract(format!("operator width {} does not fit a chain of {chain_len} sites", inner.width()));
        }
        if x >= chain_len {
            return contract(format!("start site {x} outside chain of {chain_len} sites"));
        }
        Ok(Self { inner, x, chain_len })
    }

    pub fn width(&self) -> usize {
        self.inner.width()
    }

    /// Chain sites covered, in operator order.
    pub fn sites(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.width()).map(move |k| (self.x + k) % self.chain_len)
    }

    /// Full `d^{2L} × d^{2L}` matrix, identity outside the region.
    pub fn materialize(&self) -> Result<LocalOperator> {
        self.materialize_with(&Limits::default())
    }

    pub fn materialize_with(&self, limits: &Limits) -> Result<LocalOperator> {
        let d = self.inner.d();
        let n = self.chain_len;
        limits.check_chain("materialized chain operator", ipow(d, n))?;
        let w = self.width();
        let dim = upow(d, n);
        let strides: Vec<usize> = self.sites().map(|s| upow(d, n - 1 - s)).collect();
        let region_dim = upow(d, w);
        // offset of each region index (op ordering) inside a chain index
        let region_off: Vec<usize> = (0..region_dim)
            .map(|ri| {
                let mut rem = ri;
                let mut off = 0;
                for k in (0..w).rev() {
                    off += (rem % d) * strides[k];
                    rem /= d;
                }
                off
            })
            .collect();
        let mut m = DMatrix::zeros(dim, dim);
        for row in 0..dim {
            // decompose row into region digits and the outside remainder
            let mut region_row = 0;
            let mut outside = row;
            for (k, &st) in strides.iter().enumerate() {
                let digit = (row / st) % d;
                region_row += digit * upow(d, w - 1 - k);
                outside -= digit * st;
            }
            for (region_col, &off) in region_off.iter().enumerate() {
                let v = self.inner.matrix[(region_row, region_col)];
                if v != ZERO {
                    m[(row, outside + off)] = v;
                }
            }
        }
        Ok(LocalOperator::from_parts(d, n, m))
    }
}

pub fn embed(op: &LocalOperator, x: usize, chain_len: usize) -> Result<EmbeddedOperator> {
    op.embed(x, chain_len)
}

/// Random operator with i.i.d. standard complex Gaussian entries.
pub fn random_operator<R: rand::Rng + ?Sized>(d: usize, width: usize, rng: &mut R) -> LocalOperator {
    use rand_distr::{Distribution, StandardNormal};
    let n = upow(d, width);
    let m = DMatrix::from_fn(n, n, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re, im)
    });
    LocalOperator::from_parts(d, width, m)
}

/// Random element of the boundary-traceless subspace.
pub fn random_boundary_traceless<R: rand::Rng + ?Sized>(d: usize, width: usize, rng: &mut R) -> LocalOperator {
    random_operator(d, width, rng).boundary_traceless_project()
}
