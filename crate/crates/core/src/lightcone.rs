//! Light-cone window maps and their unimodular spectra.
//!
//! `M+,w` acts on a width-`w` operator starting on an even site: it pads one
//! identity site on the right, applies the U layer, traces out the leftmost
//! site, pads again, applies the V layer and traces the leftmost site once
//! more (each trace carries a `1/d`). The result sits two sites to the right
//! of the input. `M−,w` mirrors this with padding on the left and traces of
//! the rightmost site, following an odd-start operator two sites to the left.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::gates::{Gate, DEFAULT_GATE_TOL};
use crate::limits::Limits;
use crate::linalg::{null_space, MAX_ITER};
use crate::tensor::{conjugate_two_site, ipow, random_operator, LocalOperator, ZERO};

/// Default tolerance on `||λ| − 1|`.
pub const UNIMODULAR_TOL: f64 = 1e-8;
/// Eigen-residual bound every returned eigenpair must satisfy.
pub const RESIDUAL_TOL: f64 = 1e-9;
/// Singular-value threshold for subspace rank decisions.
pub const SUBSPACE_TOL: f64 = 1e-8;
const CLUSTER_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Plus,
    Minus,
}

impl Direction {
    pub fn name(self) -> &'static str {
        match self {
            Direction::Plus => "plus",
            Direction::Minus => "minus",
        }
    }

    /// Sites moved per Floquet period.
    pub fn shift(self) -> i64 {
        match self {
            Direction::Plus => 2,
            Direction::Minus => -2,
        }
    }

    /// Parity of the start sites this direction lives on.
    pub fn start_parity(self) -> usize {
        match self {
            Direction::Plus => 0,
            Direction::Minus => 1,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Direction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plus" | "+" => Ok(Direction::Plus),
            "minus" | "-" => Ok(Direction::Minus),
            other => Err(Error::Parse(format!("direction must be plus or minus, got {other:?}"))),
        }
    }
}

/// Dense linear map on vectorized width-`w` operators.
#[derive(Debug)]
pub struct Superoperator {
    d: usize,
    w: usize,
    direction: Direction,
    u: Gate,
    v: Gate,
    matrix: DMatrix<C64>,
    gram: SymmetricEigen<C64, nalgebra::Dyn>,
    spectrum: OnceLock<Vec<C64>>,
}

impl Superoperator {
    fn build(
        u: &Gate,
        v: &Gate,
        w: usize,
        direction: Direction,
        limits: &Limits,
        map: impl Fn(&LocalOperator) -> LocalOperator,
    ) -> Result<Self> {
        let d = u.d();
        limits.check_superop("window superoperator", ipow(d, 2 * w))?;
        let n = d.pow(w as u32);
        let mut matrix = DMatrix::zeros(n * n, n * n);
        let mut unit = LocalOperator::zeros(d, w);
        for c in 0..n {
            for r in 0..n {
                unit.matrix_mut()[(r, c)] = C64::new(1.0, 0.0);
                let img = map(&unit);
                matrix.column_mut(r + c * n).copy_from_slice(img.matrix().as_slice());
                unit.matrix_mut()[(r, c)] = ZERO;
            }
        }
        let gram = SymmetricEigen::try_new(matrix.adjoint() * &matrix, f64::EPSILON, MAX_ITER)
            .ok_or_else(|| Error::Numeric("eigendecomposition of M†M did not converge".into()))?;
        let s = Self { d, w, direction, u: u.clone(), v: v.clone(), matrix, gram, spectrum: OnceLock::new() };
        s.check_invariants()?;
        Ok(s)
    }

    fn check_invariants(&self) -> Result<()> {
        let id = LocalOperator::identity(self.d, self.w);
        let unital = self.apply(&id).max_abs_diff(&id);
        if unital > 1e-12 {
            return Err(Error::Numeric(format!("window map is not unital (defect {unital:.3e})")));
        }
        let n = self.d.pow(self.w as u32);
        // tr(M(E_rc)) must equal δ_rc
        let mut tp: f64 = 0.0;
        for c in 0..n {
            for r in 0..n {
                let col = self.matrix.column(r + c * n);
                let tr: C64 = (0..n).map(|k| col[k + k * n]).sum();
                let target = if r == c { 1.0 } else { 0.0 };
                tp = tp.max((tr - target).norm());
            }
        }
        if tp > 1e-12 {
            return Err(Error::Numeric(format!("window map is not trace preserving (defect {tp:.3e})")));
        }
        let norm = self.operator_norm();
        if norm > 1.0 + 1e-10 {
            return Err(Error::Numeric(format!("window map has operator norm {norm} > 1")));
        }
        Ok(())
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn width(&self) -> usize {
        self.w
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    /// The gates `(U, V)` the map was built from.
    pub fn gates(&self) -> (&Gate, &Gate) {
        (&self.u, &self.v)
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    /// Largest singular value; bounds the spectral radius.
    pub fn operator_norm(&self) -> f64 {
        self.gram.eigenvalues.iter().cloned().fold(0.0, f64::max).max(0.0).sqrt()
    }

    pub fn apply(&self, op: &LocalOperator) -> LocalOperator {
        assert!(op.d() == self.d && op.width() == self.w, "operator shape does not match superoperator");
        let v = &self.matrix * op.vectorize();
        LocalOperator::devectorize(self.d, self.w, &v).expect("shape checked")
    }

    pub fn apply_vec(&self, v: &DVector<C64>) -> DVector<C64> {
        &self.matrix * v
    }

    /// All eigenvalues, computed on first use.
    pub fn spectrum(&self) -> Result<&[C64]> {
        if let Some(s) = self.spectrum.get() {
            return Ok(s);
        }
        let schur = nalgebra::linalg::Schur::try_new(self.matrix.clone(), f64::EPSILON, MAX_ITER)
            .ok_or_else(|| Error::Numeric("Schur decomposition did not converge".into()))?;
        let (_, t) = schur.unpack();
        let mut ev: Vec<C64> = (0..t.nrows()).map(|i| t[(i, i)]).collect();
        ev.sort_by(|a, b| b.norm().total_cmp(&a.norm()).then(a.arg().total_cmp(&b.arg())));
        Ok(self.spectrum.get_or_init(|| ev))
    }

    /// Eigenvalues of `M†M` (ascending).
    pub(crate) fn gram_eigen(&self) -> (&DVector<f64>, &DMatrix<C64>) {
        (&self.gram.eigenvalues, &self.gram.eigenvectors)
    }
}

fn require_unitary(g: &Gate, name: &str) -> Result<()> {
    if !g.is_unitary(DEFAULT_GATE_TOL) {
        return contract(format!("{name} is not unitary (residual {:.3e})", g.unitarity_residual()));
    }
    Ok(())
}

fn scaled_trace(op: &LocalOperator, site: usize) -> LocalOperator {
    let r = op.partial_trace(&[site]).expect("site in range");
    r.scale(C64::new(1.0 / op.d() as f64, 0.0))
}

/// `M+(a) = (1/d)·tr_0[U (a⊗1) U†]`.
pub fn m_plus(u: &Gate) -> Result<Superoperator> {
    require_unitary(u, "U")?;
    Superoperator::build(u, u, 1, Direction::Plus, &Limits::default(), |a| {
        let padded = a.kron(&LocalOperator::identity(a.d(), 1));
        scaled_trace(&u.conjugate(&padded).expect("two-site"), 0)
    })
}

/// `M−(a) = (1/d)·tr_1[U (1⊗a) U†]`.
pub fn m_minus(u: &Gate) -> Result<Superoperator> {
    require_unitary(u, "U")?;
    Superoperator::build(u, u, 1, Direction::Minus, &Limits::default(), |a| {
        let padded = LocalOperator::identity(a.d(), 1).kron(a);
        scaled_trace(&u.conjugate(&padded).expect("two-site"), 1)
    })
}

/// One layer of the window map: pad, conjugate by `g` on bonds
/// `(0,1), (2,3), …`, trace out the far edge.
fn window_layer(a: &LocalOperator, g: &Gate, direction: Direction) -> LocalOperator {
    let d = a.d();
    let w = a.width();
    let one = LocalOperator::identity(d, 1);
    let padded = match direction {
        Direction::Plus => a.kron(&one),
        Direction::Minus => one.kron(a),
    };
    let mut m = padded.into_matrix();
    for k in (0..w).step_by(2) {
        conjugate_two_site(&mut m, d, w + 1, k, k + 1, g.matrix());
    }
    let evolved = LocalOperator::new(d, w + 1, m).expect("shape preserved");
    match direction {
        Direction::Plus => scaled_trace(&evolved, 0),
        Direction::Minus => scaled_trace(&evolved, w),
    }
}

/// Applies the two-layer window map to `a` without building the matrix.
pub fn apply_window(u: &Gate, v: &Gate, direction: Direction, a: &LocalOperator) -> LocalOperator {
    let half = window_layer(a, u, direction);
    window_layer(&half, v, direction)
}

/// `M±,w` for odd `w`.
pub fn m_w(u: &Gate, v: &Gate, w: usize, direction: Direction) -> Result<Superoperator> {
    m_w_with(u, v, w, direction, &Limits::default())
}

pub fn m_w_with(u: &Gate, v: &Gate, w: usize, direction: Direction, limits: &Limits) -> Result<Superoperator> {
    if w.is_multiple_of(2) || w == 0 {
        return contract(format!("window width must be odd, got {w}"));
    }
    if u.d() != v.d() {
        return contract("U and V act on different qudit dimensions");
    }
    require_unitary(u, "U")?;
    require_unitary(v, "V")?;
    Superoperator::build(u, v, w, direction, limits, |a| apply_window(u, v, direction, a))
}

/// Eigenpair on the unit circle; `op` has unit Hilbert-Schmidt norm.
#[derive(Clone, Debug)]
pub struct UnimodularPair {
    pub lambda: C64,
    pub op: LocalOperator,
    /// Index of the eigenvalue cluster this vector belongs to.
    pub cluster: usize,
}

fn angle_key(z: C64) -> f64 {
    let a = z.arg();
    if a <= -PI + 1e-9 {
        PI
    } else {
        a
    }
}

/// Orthonormal basis (columns) of the largest `M`-invariant subspace on which
/// `M` is norm preserving.
fn unitary_part(s: &Superoperator, tol: f64) -> Result<DMatrix<C64>> {
    let (vals, vecs) = s.gram_eigen();
    let keep: Vec<usize> = (0..vals.len()).filter(|&i| 1.0 - vals[i] < tol).collect();
    let mut basis = DMatrix::from_fn(vecs.nrows(), keep.len(), |r, c| vecs[(r, keep[c])]);
    loop {
        let k = basis.ncols();
        if k == 0 {
            return Ok(basis);
        }
        let image = &s.matrix * &basis;
        let leak = &image - &basis * (basis.adjoint() * &image);
        // the Frobenius norm bounds every singular value
        if leak.norm() < SUBSPACE_TOL {
            return Ok(basis);
        }
        let ns = null_space(&leak, SUBSPACE_TOL)?;
        if ns.basis.ncols() == k {
            return Ok(basis);
        }
        basis = &basis * &ns.basis;
    }
}

/// Eigenvectors and eigenvalues of a normal matrix `R = H + iK`, from the
/// Hermitian pencil `H + cK` at an irrational `c`.
fn normal_eigen(r: &DMatrix<C64>) -> (DMatrix<C64>, Vec<C64>) {
    const PENCIL: f64 = 0.754_877_666_246_692_7;
    let ra = r.adjoint();
    let h = (r + &ra).scale(0.5);
    let kk = (r - &ra) * C64::new(0.0, -0.5);
    let mut a = h + kk.scale(PENCIL);
    a = (&a + a.adjoint()).scale(0.5);
    let eig =
        nalgebra::linalg::SymmetricEigen::try_new(a, f64::EPSILON, MAX_ITER).expect("Hermitian eigensolver converges");
    let q = eig.eigenvectors;
    let ev = (0..q.ncols())
        .map(|i| {
            let v = q.column(i);
            (v.adjoint() * r * v)[(0, 0)]
        })
        .collect();
    (q, ev)
}

/// All eigenpairs with `||λ| − 1| < tol`, orthonormal within each cluster,
/// ordered by eigenvalue angle.
pub fn unimodular_eigenspace(s: &Superoperator, tol: f64) -> Result<Vec<UnimodularPair>> {
    if !(tol > 0.0 && tol < 1e-4) {
        return contract(format!("unimodularity tolerance must lie in (0, 1e-4), got {tol}"));
    }
    let basis = unitary_part(s, tol)?;
    let k = basis.ncols();
    if k == 0 {
        return Ok(vec![]);
    }
    let restricted = basis.adjoint() * &s.matrix * &basis;
    let (q, ev) = normal_eigen(&restricted);
    let vectors = &basis * &q;
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| angle_key(ev[a]).total_cmp(&angle_key(ev[b])));

    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for &i in &order {
        match clusters.last_mut() {
            Some(cl) if (ev[i] - ev[cl[0]]).norm() < CLUSTER_TOL => cl.push(i),
            _ => clusters.push(vec![i]),
        }
    }
    // wrap-around merge of the first and last cluster (angles near ±π)
    if clusters.len() > 1 {
        let first = clusters[0][0];
        let last = *clusters.last().unwrap().first().unwrap();
        if (ev[first] - ev[last]).norm() < CLUSTER_TOL {
            let tail = clusters.pop().unwrap();
            clusters[0].extend(tail);
        }
    }

    let (d, w) = (s.d, s.w);
    let mut out = Vec::with_capacity(k);
    for (ci, cl) in clusters.iter().enumerate() {
        let mean: C64 = cl.iter().map(|&i| ev[i]).sum::<C64>() / cl.len() as f64;
        if (mean.norm() - 1.0).abs() >= tol {
            continue;
        }
        let lambda = mean / mean.norm();
        let mut pairs: Vec<UnimodularPair> = Vec::with_capacity(cl.len());
        for &i in cl {
            let v = vectors.column(i).into_owned();
            let res = (s.apply_vec(&v) - &v * lambda).norm();
            if res >= RESIDUAL_TOL {
                return Err(Error::Numeric(format!("unimodular eigenvector at λ = {lambda} has residual {res:.3e}")));
            }
            let op = LocalOperator::devectorize(d, w, &v)?;
            pairs.push(UnimodularPair { lambda, op, cluster: ci });
        }
        pairs.sort_by_key(|a| leading_key(&a.op));
        out.extend(pairs);
    }
    Ok(out)
}

/// Index of the first string coefficient within 1e-9 of the largest one.
fn leading_index(coeffs: &[C64]) -> usize {
    let top = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    coeffs.iter().position(|c| c.norm() >= top - 1e-9).unwrap_or(0)
}

fn leading_key(op: &LocalOperator) -> usize {
    leading_index(&op.string_coefficients())
}

/// Width-`w` soliton: boundary-traceless eigenvector of `M±,w` with a
/// unimodular eigenvalue, normalized to Hilbert-Schmidt norm `√(d^w)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SolitonRecord {
    pub op: LocalOperator,
    pub direction: Direction,
    pub width: usize,
    pub lambda: C64,
}

impl SolitonRecord {
    /// Hilbert-Schmidt norm every record is scaled to.
    pub fn target_norm(d: usize, w: usize) -> f64 {
        (d as f64).powi(w as i32).sqrt()
    }

    /// `(λ*, a†)`, which is again a soliton.
    pub fn dagger(&self) -> SolitonRecord {
        SolitonRecord { op: self.op.dagger(), direction: self.direction, width: self.width, lambda: self.lambda.conj() }
    }

    /// `‖S(a) − λa‖ / ‖a‖`.
    pub fn residual(&self, s: &Superoperator) -> f64 {
        let img = s.apply(&self.op);
        (&img - &self.op.scale(self.lambda)).hs_norm() / self.op.hs_norm()
    }
}

/// Solitons of `M±,w(U, V)`.
pub fn find_solitons(u: &Gate, v: &Gate, w: usize, direction: Direction, tol: f64) -> Result<Vec<SolitonRecord>> {
    for (g, name) in [(u, "U"), (v, "V")] {
        if !g.is_dual_unitary(DEFAULT_GATE_TOL) {
            return contract(format!(
                "{name} is not dual-unitary (unitarity {:.3e}, duality {:.3e})",
                g.unitarity_residual(),
                g.duality_residual()
            ));
        }
    }
    let s = m_w(u, v, w, direction)?;
    solitons_of(&s, tol)
}

/// Solitons of an already-built window map.
pub fn solitons_of(s: &Superoperator, tol: f64) -> Result<Vec<SolitonRecord>> {
    let pairs = unimodular_eigenspace(s, tol)?;
    let (d, w) = (s.d, s.w);
    let mut records = Vec::new();
    let mut start = 0;
    while start < pairs.len() {
        let cluster = pairs[start].cluster;
        let end = pairs[start..].iter().position(|p| p.cluster != cluster).map_or(pairs.len(), |o| start + o);
        let group = &pairs[start..end];
        start = end;
        let lambda = group[0].lambda;
        let cols: Vec<DVector<C64>> = group.iter().map(|p| p.op.vectorize()).collect();
        let b = DMatrix::from_columns(&cols);
        let rejected_cols: Vec<DVector<C64>> =
            group.iter().map(|p| (&p.op - &p.op.boundary_traceless_project()).vectorize()).collect();
        let rejected = DMatrix::from_columns(&rejected_cols);
        let ns = null_space(&rejected, SUBSPACE_TOL)?;
        let combos = &b * &ns.basis;
        let mut found = Vec::new();
        for c in 0..combos.ncols() {
            let v = combos.column(c).into_owned();
            let raw = LocalOperator::devectorize(d, w, &v)?.boundary_traceless_project();
            let coeffs = raw.string_coefficients();
            let lead = coeffs[leading_index(&coeffs)];
            let phase = if lead.norm() > 0.0 { lead.conj() / lead.norm() } else { C64::new(1.0, 0.0) };
            let op = raw.scale(phase * (SolitonRecord::target_norm(d, w) / raw.hs_norm()));
            let rec = SolitonRecord { op, direction: s.direction, width: w, lambda };
            let res = rec.residual(s);
            if res >= RESIDUAL_TOL {
                return Err(Error::Numeric(format!("soliton at λ = {lambda} has residual {res:.3e}")));
            }
            found.push(rec);
        }
        found.sort_by_key(|a| leading_key(&a.op));
        records.extend(found);
    }
    Ok(records)
}

/// Norm-preservation diagnostics for the soliton subspace.
#[derive(Clone, Debug, Serialize)]
pub struct UnitarySubspaceReport {
    pub t_max: usize,
    /// `‖S^t(a)‖/‖a‖` for each record and `t = 1..=t_max`.
    pub norm_ratios: Vec<Vec<f64>>,
    pub max_norm_defect: f64,
    /// Largest `|⟨S^t a, S^t b⟩ − ⟨a, b⟩|` over record pairs and times,
    /// relative to `‖a‖‖b‖`.
    pub max_gram_defect: f64,
    /// `‖S^t(r)‖` for `t = 0..=t_max` of random operators orthogonal to the
    /// whole unimodular eigenspace.
    pub complement_norms: Vec<Vec<f64>>,
    pub complement_non_increasing: bool,
}

pub fn unitary_subspace_diagnostics(
    s: &Superoperator,
    records: &[SolitonRecord],
    t_max: usize,
    samples: usize,
    seed: u64,
) -> Result<UnitarySubspaceReport> {
    let mut norm_ratios = Vec::with_capacity(records.len());
    let mut max_norm_defect: f64 = 0.0;
    let mut trajectories: Vec<Vec<DVector<C64>>> = Vec::with_capacity(records.len());
    for rec in records {
        let v0 = rec.op.vectorize();
        let n0 = v0.norm();
        let mut traj = vec![v0.clone()];
        let mut ratios = Vec::with_capacity(t_max);
        let mut v = v0;
        for _ in 0..t_max {
            v = s.apply_vec(&v);
            let r = v.norm() / n0;
            max_norm_defect = max_norm_defect.max((r - 1.0).abs());
            ratios.push(r);
            traj.push(v.clone());
        }
        norm_ratios.push(ratios);
        trajectories.push(traj);
    }
    let mut max_gram_defect: f64 = 0.0;
    for i in 0..trajectories.len() {
        for j in i..trajectories.len() {
            let scale = trajectories[i][0].norm() * trajectories[j][0].norm();
            let g0 = trajectories[i][0].dotc(&trajectories[j][0]);
            for (a, b) in trajectories[i].iter().zip(&trajectories[j]).skip(1) {
                max_gram_defect = max_gram_defect.max((a.dotc(b) - g0).norm() / scale);
            }
        }
    }

    let span = unimodular_eigenspace(s, UNIMODULAR_TOL)?;
    let span_cols: Vec<DVector<C64>> = span.iter().map(|p| p.op.vectorize()).collect();
    let q = if span_cols.is_empty() { None } else { Some(DMatrix::from_columns(&span_cols)) };
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut complement_norms = Vec::with_capacity(samples);
    let mut monotone = true;
    for _ in 0..samples {
        let mut v = random_operator(s.d, s.w, &mut rng).vectorize();
        if let Some(q) = &q {
            v -= q * (q.adjoint() * &v);
        }
        let mut norms = vec![v.norm()];
        for _ in 0..t_max {
            v = s.apply_vec(&v);
            let n = v.norm();
            if n > norms.last().unwrap() * (1.0 + 1e-12) + 1e-15 {
                monotone = false;
            }
            norms.push(n);
        }
        complement_norms.push(norms);
    }
    Ok(UnitarySubspaceReport {
        t_max,
        norm_ratios,
        max_norm_defect,
        max_gram_defect,
        complement_norms,
        complement_non_increasing: monotone,
    })
}

/// Spectrum of a map as `(λ, |λ|)` rows, largest modulus first.
pub fn spectrum_rows(s: &Superoperator) -> Result<Vec<(C64, f64)>> {
    Ok(s.spectrum()?.iter().map(|&z| (z, z.norm())).collect())
}

/// Spectral radius of `M` restricted to traceless operators.
pub fn traceless_spectral_radius(s: &Superoperator) -> Result<f64> {
    let n = s.d.pow(s.w as u32);
    let id = LocalOperator::identity(s.d, s.w).vectorize().unscale((n as f64).sqrt());
    let proj = DMatrix::identity(n * n, n * n) - &id * id.adjoint();
    let block = &proj * &s.matrix * &proj;
    let schur = nalgebra::linalg::Schur::try_new(block, f64::EPSILON, MAX_ITER)
        .ok_or_else(|| Error::Numeric("Schur decomposition did not converge".into()))?;
    let (_, t) = schur.unpack();
    Ok((0..t.nrows()).map(|i| t[(i, i)].norm()).fold(0.0, f64::max))
}
