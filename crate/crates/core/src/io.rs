//! File formats for solitons, spectra and charges.

use std::path::Path;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::charges::{ChargeRecord, ChargeTerm, Provenance};
use crate::error::{Error, Result};
use crate::gates::{matrix_to_rows, rows_to_matrix};
use crate::lightcone::{Direction, SolitonRecord, Superoperator};
use crate::tensor::LocalOperator;

type Rows = Vec<Vec<[f64; 2]>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolitonEntry {
    pub d: usize,
    pub direction: Direction,
    pub width: usize,
    pub lambda: [f64; 2],
    pub hs_norm: f64,
    pub op: Rows,
}

impl From<&SolitonRecord> for SolitonEntry {
    fn from(s: &SolitonRecord) -> Self {
        SolitonEntry {
            d: s.op.d(),
            direction: s.direction,
            width: s.width,
            lambda: [s.lambda.re, s.lambda.im],
            hs_norm: s.op.hs_norm(),
            op: matrix_to_rows(s.op.matrix()),
        }
    }
}

impl SolitonEntry {
    pub fn to_record(&self) -> Result<SolitonRecord> {
        let op = LocalOperator::new(self.d, self.width, rows_to_matrix(&self.op)?)
            .map_err(|e| Error::Parse(format!("soliton operator: {e}")))?;
        Ok(SolitonRecord {
            op,
            direction: self.direction,
            width: self.width,
            lambda: C64::new(self.lambda[0], self.lambda[1]),
        })
    }
}

pub fn solitons_to_json(records: &[SolitonRecord]) -> String {
    let entries: Vec<SolitonEntry> = records.iter().map(SolitonEntry::from).collect();
    serde_json::to_string_pretty(&entries).expect("soliton serialization")
}

pub fn solitons_from_json(s: &str) -> Result<Vec<SolitonRecord>> {
    let entries: Vec<SolitonEntry> = serde_json::from_str(s).map_err(|e| Error::Parse(format!("soliton file: {e}")))?;
    entries.iter().map(SolitonEntry::to_record).collect()
}

pub const SPECTRUM_HEADER: &str = "re,im,abs,width,direction";

/// Full spectrum of `M±,w` as CSV with a header row.
pub fn spectrum_csv(s: &Superoperator) -> Result<String> {
    let mut out = String::from(SPECTRUM_HEADER);
    out.push('\n');
    for z in s.spectrum()? {
        out.push_str(&format!("{:.16e},{:.16e},{:.16e},{},{}\n", z.re, z.im, z.norm(), s.width(), s.direction()));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChargeTermEntry {
    pub coeff: [f64; 2],
    pub x: usize,
    pub w: usize,
    pub op: Rows,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChargeFile {
    pub chain_len: usize,
    pub terms: Vec<ChargeTermEntry>,
    pub provenance: Provenance,
}

/// `d` with `d^w = dim`.
fn infer_d(dim: usize, w: usize) -> Result<usize> {
    if w == 0 {
        return Err(Error::Parse("term width must be positive".into()));
    }
    let guess = (dim as f64).powf(1.0 / w as f64).round() as usize;
    if guess >= 2 && guess.checked_pow(w as u32) == Some(dim) {
        Ok(guess)
    } else {
        Err(Error::Parse(format!("matrix dimension {dim} is not d^{w} for any d ≥ 2")))
    }
}

impl From<&ChargeRecord> for ChargeFile {
    fn from(q: &ChargeRecord) -> Self {
        ChargeFile {
            chain_len: q.chain_len,
            terms: q
                .terms
                .iter()
                .map(|t| ChargeTermEntry {
                    coeff: [t.coeff.re, t.coeff.im],
                    x: t.x,
                    w: t.op.width(),
                    op: matrix_to_rows(t.op.matrix()),
                })
                .collect(),
            provenance: q.provenance.clone(),
        }
    }
}

impl ChargeFile {
    pub fn to_record(&self) -> Result<ChargeRecord> {
        let mut terms = Vec::with_capacity(self.terms.len());
        for (i, t) in self.terms.iter().enumerate() {
            let m = rows_to_matrix(&t.op)?;
            let d = infer_d(m.nrows(), t.w)?;
            let op = LocalOperator::new(d, t.w, m).map_err(|e| Error::Parse(format!("term {i}: {e}")))?;
            terms.push(ChargeTerm { coeff: C64::new(t.coeff[0], t.coeff[1]), x: t.x, op });
        }
        ChargeRecord::new(self.chain_len, terms, self.provenance.clone())
            .map_err(|e| Error::Parse(format!("charge file: {e}")))
    }
}

pub fn charge_to_json(q: &ChargeRecord) -> String {
    serde_json::to_string_pretty(&ChargeFile::from(q)).expect("charge serialization")
}

pub fn charge_from_json(s: &str) -> Result<ChargeRecord> {
    let f: ChargeFile = serde_json::from_str(s).map_err(|e| Error::Parse(format!("charge file: {e}")))?;
    f.to_record()
}

pub fn read_charge(path: impl AsRef<Path>) -> Result<ChargeRecord> {
    charge_from_json(&std::fs::read_to_string(path)?)
}

pub fn write_charge(path: impl AsRef<Path>, q: &ChargeRecord) -> Result<()> {
    std::fs::write(path, charge_to_json(q))?;
    Ok(())
}

/// Pretty JSON for any report type.
pub fn report_json<T: Serialize>(r: &T) -> String {
    serde_json::to_string_pretty(r).expect("report serialization")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charges::charge_from_soliton;
    use crate::gates::Gate;
    use crate::lightcone::{find_solitons, m_w, UNIMODULAR_TOL};

    #[test]
    fn soliton_round_trip() {
        let g = Gate::fswap();
        let s = find_solitons(&g, &g, 3, Direction::Minus, UNIMODULAR_TOL).unwrap();
        let back = solitons_from_json(&solitons_to_json(&s)).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn charge_round_trip() {
        let g = Gate::phased_swap(0.3);
        let s = find_solitons(&g, &g, 1, Direction::Plus, UNIMODULAR_TOL).unwrap();
        let z = s.iter().find(|r| (r.lambda - 1.0).norm() < 1e-9).unwrap();
        let mut q = charge_from_soliton(z, 4).unwrap();
        q.terms[1].coeff = C64::new(0.1, -1.0 / 3.0);
        assert_eq!(charge_from_json(&charge_to_json(&q)).unwrap(), q);
        assert!(matches!(charge_from_json("{\"chain_len\": 8"), Err(Error::Parse(_))));
    }

    #[test]
    fn spectrum_has_header_and_rows() {
        let g = Gate::fswap();
        let m = m_w(&g, &g, 1, Direction::Plus).unwrap();
        let csv = spectrum_csv(&m).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], SPECTRUM_HEADER);
        assert_eq!(lines.len(), 5);
        assert!(lines[1].ends_with(",1,plus"));
    }

    #[test]
    fn dimension_inference() {
        assert_eq!(infer_d(8, 3).unwrap(), 2);
        assert_eq!(infer_d(9, 2).unwrap(), 3);
        assert!(infer_d(6, 2).is_err());
    }
}
