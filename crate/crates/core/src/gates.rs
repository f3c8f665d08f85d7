//! Two-qudit gates and the dual (space-time) reshuffle.

use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::tensor::{conjugate_two_site, LocalOperator, I, ONE, ZERO};

/// Default max-norm tolerance for unitarity checks.
pub const DEFAULT_GATE_TOL: f64 = 1e-10;

/// Dense `d² × d²` two-qudit gate in the basis `|i⟩⊗|j⟩`, `i` slowest.
#[derive(Clone, Debug, PartialEq)]
pub struct Gate {
    d: usize,
    matrix: DMatrix<C64>,
}

impl Gate {
    pub fn new(d: usize, matrix: DMatrix<C64>) -> Result<Self> {
        if d < 2 {
            return contract(format!("qudit dimension must be at least 2, got {d}"));
        }
        let n = d * d;
        if matrix.nrows() != n || matrix.ncols() != n {
            return contract(format!(
                "gate matrix is {}x{}, expected {n}x{n} for d={d}",
                matrix.nrows(),
                matrix.ncols()
            ));
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return contract("gate entries must be finite");
        }
        Ok(Self { d, matrix })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    /// `Ũ_{(ij),(kl)} = U_{(lj),(ki)}`.
    pub fn dual(&self) -> Gate {
        let d = self.d;
        let m = DMatrix::from_fn(d * d, d * d, |r, c| {
            let (i, j) = (r / d, r % d);
            let (k, l) = (c / d, c % d);
            self.matrix[(l * d + j, k * d + i)]
        });
        Gate { d, matrix: m }
    }

    /// Max-norm of `U U† − 1`.
    pub fn unitarity_residual(&self) -> f64 {
        unitarity_defect(&self.matrix)
    }

    /// Max-norm of `Ũ Ũ† − 1`.
    pub fn duality_residual(&self) -> f64 {
        unitarity_defect(&self.dual().matrix)
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_residual() < tol
    }

    pub fn is_dual_unitary(&self, tol: f64) -> bool {
        self.is_unitary(tol) && self.duality_residual() < tol
    }

    /// `U A U†` for a two-site operator `A`.
    pub fn conjugate(&self, op: &LocalOperator) -> Result<LocalOperator> {
        if op.d() != self.d || op.width() != 2 {
            return contract(format!(
                "gate with d={} cannot conjugate an operator with d={}, w={}",
                self.d,
                op.d(),
                op.width()
            ));
        }
        let mut m = op.matrix().clone();
        conjugate_two_site(&mut m, self.d, 2, 0, 1, &self.matrix);
        LocalOperator::new(self.d, 2, m)
    }

    /// `(a ⊗ b) U (c ⊗ e)` for single-site matrices.
    pub fn dressed(&self, a: &DMatrix<C64>, b: &DMatrix<C64>, c: &DMatrix<C64>, e: &DMatrix<C64>) -> Gate {
        let m = a.kronecker(b) * &self.matrix * c.kronecker(e);
        Gate { d: self.d, matrix: m }
    }

    pub fn identity(d: usize) -> Gate {
        Gate { d, matrix: DMatrix::identity(d * d, d * d) }
    }

    pub fn swap(d: usize) -> Gate {
        let m = DMatrix::from_fn(d * d, d * d, |r, c| if r == (c % d) * d + c / d { ONE } else { ZERO });
        Gate { d, matrix: m }
    }

    /// Fermionic swap: SWAP with a sign on `|11⟩`.
    pub fn fswap() -> Gate {
        let mut g = Gate::swap(2);
        g.matrix[(3, 3)] = -ONE;
        g
    }

    /// `SWAP · (u ⊗ u)` with `u = diag(1, e^{iθ})`.
    pub fn phased_swap(theta: f64) -> Gate {
        let u = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![ONE, C64::from_polar(1.0, theta)]));
        let id = DMatrix::identity(2, 2);
        Gate::swap(2).dressed(&id, &id, &u, &u)
    }

    pub fn cz() -> Gate {
        let mut m = DMatrix::identity(4, 4);
        m[(3, 3)] = -ONE;
        Gate { d: 2, matrix: m }
    }

    /// `exp[i(π/4·XX + π/4·YY + J·ZZ)]`.
    pub fn canonical_dual_unitary(j: f64) -> Gate {
        let diag = C64::from_polar(1.0, j);
        let off = I * C64::from_polar(1.0, -j);
        let mut m = DMatrix::zeros(4, 4);
        m[(0, 0)] = diag;
        m[(3, 3)] = diag;
        m[(1, 2)] = off;
        m[(2, 1)] = off;
        Gate { d: 2, matrix: m }
    }

    /// `(u₁⊗u₂) · exp[i(π/4·XX + π/4·YY + J·ZZ)] · (u₃⊗u₄)` with Haar-random
    /// single-qubit `u`s drawn from a generator seeded with `seed`.
    pub fn random_dual_unitary_qubit(seed: u64, j: f64) -> Gate {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let u: Vec<DMatrix<C64>> = (0..4).map(|_| haar_unitary(2, &mut rng)).collect();
        Gate::canonical_dual_unitary(j).dressed(&u[0], &u[1], &u[2], &u[3])
    }

    pub fn to_file_format(&self) -> GateFile {
        GateFile { d: self.d, matrix: matrix_to_rows(&self.matrix) }
    }

    pub fn from_file_format(f: &GateFile) -> Result<Gate> {
        let m = rows_to_matrix(&f.matrix)?;
        Gate::new(f.d, m).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file_format()).expect("gate serialization")
    }

    pub fn from_json(s: &str) -> Result<Gate> {
        let f: GateFile = serde_json::from_str(s).map_err(|e| Error::Parse(format!("gate file: {e}")))?;
        Gate::from_file_format(&f)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Gate> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path)?;
        Gate::from_json(&s).map_err(|e| match e {
            Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}

fn unitarity_defect(m: &DMatrix<C64>) -> f64 {
    let n = m.nrows();
    let p = m * m.adjoint();
    let mut worst: f64 = 0.0;
    for c in 0..n {
        for r in 0..n {
            let target = if r == c { ONE } else { ZERO };
            worst = worst.max((p[(r, c)] - target).norm());
        }
    }
    worst
}

/// Haar-distributed `d × d` unitary (QR of a complex Ginibre matrix with the
/// phases of `R`'s diagonal divided out).
pub fn haar_unitary<R: rand::Rng + ?Sized>(d: usize, rng: &mut R) -> DMatrix<C64> {
    let z = DMatrix::from_fn(d, d, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re, im) / std::f64::consts::SQRT_2
    });
    let qr = z.qr();
    let (mut q, r) = qr.unpack();
    for k in 0..d {
        let rkk = r[(k, k)];
        let phase = if rkk.norm() > 0.0 { rkk / rkk.norm() } else { ONE };
        let mut col = q.column_mut(k);
        col *= phase;
    }
    q
}

/// On-disk gate description: row-major `[re, im]` pairs.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct GateFile {
    pub d: usize,
    pub matrix: Vec<Vec<[f64; 2]>>,
}

pub(crate) fn matrix_to_rows(m: &DMatrix<C64>) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows()).map(|r| (0..m.ncols()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect()).collect()
}

pub(crate) fn rows_to_matrix(rows: &[Vec<[f64; 2]>]) -> Result<DMatrix<C64>> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::Parse("matrix has no rows".into()));
    }
    if let Some((r, row)) = rows.iter().enumerate().find(|(_, row)| row.len() != n) {
        return Err(Error::Parse(format!("row {r} has {} entries, expected {n}", row.len())));
    }
    Ok(DMatrix::from_fn(n, n, |r, c| C64::new(rows[r][c][0], rows[r][c][1])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{qubit, random_boundary_traceless};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dual_of_swap_and_fswap() {
        assert_eq!(Gate::swap(2).dual(), Gate::swap(2));
        assert_eq!(Gate::fswap().dual(), Gate::fswap());
        assert_eq!(Gate::swap(3).dual(), Gate::swap(3));
    }

    #[test]
    fn dual_is_involutive_and_norm_preserving() {
        let g = Gate::random_dual_unitary_qubit(17, 0.3);
        let h = Gate::new(2, g.matrix() * C64::new(0.5, 0.2) + DMatrix::identity(4, 4)).unwrap();
        let back = h.dual().dual();
        assert!((back.matrix() - h.matrix()).norm() < 1e-14);
        assert!((h.dual().matrix().norm() - h.matrix().norm()).abs() < 1e-12);
    }

    #[test]
    fn validation_examples() {
        assert!(Gate::fswap().is_dual_unitary(DEFAULT_GATE_TOL));
        assert!(Gate::swap(2).is_dual_unitary(DEFAULT_GATE_TOL));
        assert!(!Gate::cz().is_dual_unitary(DEFAULT_GATE_TOL));
        assert!(Gate::cz().is_unitary(DEFAULT_GATE_TOL));
        let id = Gate::identity(2);
        assert!(id.is_unitary(DEFAULT_GATE_TOL));
        assert!(!id.is_dual_unitary(DEFAULT_GATE_TOL));
        // the reshuffled CZ has zero rows
        let dual = Gate::cz().dual();
        let zero_rows = (0..4).filter(|&r| dual.matrix().row(r).norm() == 0.0).count();
        assert!(zero_rows > 0);
    }

    #[test]
    fn fswap_action_on_basis_states() {
        let f = Gate::fswap();
        // columns are images of basis states
        assert_eq!(f.matrix()[(2, 1)], ONE);
        assert_eq!(f.matrix()[(3, 3)], -ONE);
    }

    #[test]
    fn phased_swap_examples() {
        assert_eq!(Gate::phased_swap(0.0), Gate::swap(2));
        let theta = 0.7;
        let g = Gate::phased_swap(theta);
        assert!(g.is_dual_unitary(DEFAULT_GATE_TOL));
        let img = g.conjugate(&qubit::sigma_minus().kron(&qubit::id())).unwrap();
        let expect = qubit::id().kron(&qubit::sigma_minus()).scale(C64::from_polar(1.0, theta));
        assert!(img.max_abs_diff(&expect) < 1e-15);
    }

    #[test]
    fn random_gates_are_dual_unitary_and_deterministic() {
        for seed in 0..20 {
            let g = Gate::random_dual_unitary_qubit(seed, 0.1 * seed as f64);
            assert!(g.is_dual_unitary(DEFAULT_GATE_TOL), "seed {seed}");
        }
        assert_eq!(Gate::random_dual_unitary_qubit(5, 0.2), Gate::random_dual_unitary_qubit(5, 0.2));
    }

    #[test]
    fn canonical_family_endpoints() {
        // J = π/4 is SWAP up to a global phase
        let g = Gate::canonical_dual_unitary(std::f64::consts::FRAC_PI_4);
        let phase = C64::from_polar(1.0, std::f64::consts::FRAC_PI_4);
        assert!((g.matrix() - Gate::swap(2).matrix() * phase).norm() < 1e-15);
        // J = 0 is FSWAP dressed by S = diag(1, i) on both outputs
        let s_dag = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![ONE, -I]));
        let id = DMatrix::identity(2, 2);
        let dressed = Gate::canonical_dual_unitary(0.0).dressed(&s_dag, &s_dag, &id, &id);
        assert!((dressed.matrix() - Gate::fswap().matrix()).norm() < 1e-15);
    }

    #[test]
    fn single_site_traceless_ops_stay_traceless_on_partner() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for seed in 0..30 {
            let g = Gate::random_dual_unitary_qubit(seed, 0.37 * seed as f64);
            let a = random_boundary_traceless(2, 1, &mut rng);
            let img = g.conjugate(&a.kron(&qubit::id())).unwrap();
            assert!(img.partial_trace(&[1]).unwrap().hs_norm() < 1e-10);
            let img = g.conjugate(&qubit::id().kron(&a)).unwrap();
            assert!(img.partial_trace(&[0]).unwrap().hs_norm() < 1e-10);
        }
    }

    #[test]
    fn gate_json_round_trip_is_exact() {
        let g = Gate::random_dual_unitary_qubit(99, 1.234);
        let back = Gate::from_json(&g.to_json()).unwrap();
        assert_eq!(back, g);
        assert!(Gate::from_json("{\"d\": 2, \"matrix\": [[").is_err());
        assert!(matches!(Gate::from_json("{\"d\": 2, \"matrix\": [[[1,0]]]}"), Err(Error::Parse(_))));
    }
}
