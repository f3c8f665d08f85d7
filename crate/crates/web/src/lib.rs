//! Browser bindings: window-map spectra, soliton census and operator
//! spreading on a periodic chain. Every export returns a JSON string.

use ducharge::chain::{support_profile_window, ChainWindow, SiteFlag};
use ducharge::lightcone::{m_w, solitons_of, UNIMODULAR_TOL};
use ducharge::tensor::{embed, qubit, string_letters};
use ducharge::{Direction, Error, FloquetOperator, Gate, Result};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Largest window the page may request; `M` is `4^w × 4^w`.
pub const MAX_W: usize = 3;
pub const MAX_HALF_LEN: usize = 5;
pub const MAX_STEPS: usize = 12;

pub fn preset(name: &str, param: f64) -> Result<Gate> {
    Ok(match name {
        "fswap" => Gate::fswap(),
        "swap" => Gate::swap(2),
        "phased-swap" => Gate::phased_swap(param),
        "canonical" => Gate::canonical_dual_unitary(param),
        "random" => Gate::random_dual_unitary_qubit(7, param),
        "cz" => Gate::cz(),
        other => return Err(Error::Parse(format!("unknown gate `{other}`"))),
    })
}

fn direction(name: &str) -> Result<Direction> {
    match name {
        "plus" => Ok(Direction::Plus),
        "minus" => Ok(Direction::Minus),
        other => Err(Error::Parse(format!("unknown direction `{other}`"))),
    }
}

fn window(w: usize) -> Result<usize> {
    if w % 2 == 1 && w <= MAX_W {
        Ok(w)
    } else {
        Err(Error::Contract(format!("window width must be odd and at most {MAX_W}, got {w}")))
    }
}

fn dual_unitary(g: Gate) -> Result<Gate> {
    if g.is_dual_unitary(ducharge::gates::DEFAULT_GATE_TOL) {
        Ok(g)
    } else {
        Err(Error::Contract(format!("gate is not dual-unitary (duality residual {:.3e})", g.duality_residual())))
    }
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("serializable")
}

#[derive(Serialize)]
struct Spectrum {
    gate_dual_unitary: bool,
    duality_residual: f64,
    eigenvalues: Vec<[f64; 2]>,
}

pub fn spectrum_json(gate: &str, param: f64, w: usize, dir: &str) -> Result<String> {
    let g = preset(gate, param)?;
    let m = m_w(&g, &g, window(w)?, direction(dir)?)?;
    let eigenvalues = m.spectrum()?.iter().map(|z| [z.re, z.im]).collect();
    Ok(json(&Spectrum {
        gate_dual_unitary: g.is_dual_unitary(ducharge::gates::DEFAULT_GATE_TOL),
        duality_residual: g.duality_residual(),
        eigenvalues,
    }))
}

#[derive(Serialize)]
struct Term {
    string: String,
    coeff: [f64; 2],
}

#[derive(Serialize)]
struct Soliton {
    lambda: [f64; 2],
    terms: Vec<Term>,
}

/// Strings with `|c| ≥ 1e-9`, largest first.
fn terms(op: &ducharge::LocalOperator) -> Vec<Term> {
    let letters = ['I', 'X', 'Y', 'Z'];
    let mut out: Vec<Term> = op
        .string_coefficients()
        .iter()
        .enumerate()
        .filter(|(_, c)| c.norm() >= 1e-9)
        .map(|(i, c)| Term {
            string: string_letters(2, op.width(), i).iter().map(|&l| letters[l]).collect(),
            coeff: [c.re, c.im],
        })
        .collect();
    out.sort_by(|a, b| {
        let n = |t: &Term| t.coeff[0].hypot(t.coeff[1]);
        n(b).total_cmp(&n(a)).then_with(|| a.string.cmp(&b.string))
    });
    out
}

pub fn solitons_json(gate: &str, param: f64, w: usize, dir: &str) -> Result<String> {
    let g = dual_unitary(preset(gate, param)?)?;
    let m = m_w(&g, &g, window(w)?, direction(dir)?)?;
    let list: Vec<Soliton> = solitons_of(&m, UNIMODULAR_TOL)?
        .iter()
        .map(|s| Soliton { lambda: [s.lambda.re, s.lambda.im], terms: terms(&s.op) })
        .collect();
    Ok(json(&list))
}

fn flag_code(f: SiteFlag) -> u8 {
    match f {
        SiteFlag::IdentityOnly => 0,
        SiteFlag::Mixed => 1,
        SiteFlag::StrictlyNonIdentity => 2,
    }
}

/// Site flags of a single-site Pauli after `0..=steps` Floquet periods:
/// 0 identity, 1 mixed, 2 strictly non-identity.
pub fn spreading_json(
    gate: &str,
    param: f64,
    half_len: usize,
    steps: usize,
    site: usize,
    letter: &str,
) -> Result<String> {
    if !(2..=MAX_HALF_LEN).contains(&half_len) || steps > MAX_STEPS {
        return Err(Error::Contract(format!("need 2 ≤ L ≤ {MAX_HALF_LEN} and at most {MAX_STEPS} steps")));
    }
    let n = 2 * half_len;
    if site >= n {
        return Err(Error::Contract(format!("site {site} is outside the chain of {n} sites")));
    }
    let op = match letter {
        "x" => qubit::x(),
        "y" => qubit::y(),
        "z" => qubit::z(),
        other => return Err(Error::Parse(format!("unknown Pauli `{other}`"))),
    };
    let g = preset(gate, param)?;
    let f = FloquetOperator::new(&g, &g, half_len)?;
    let mut cur = ChainWindow::from_embedded(&embed(&op, site, n)?);
    let mut rows = Vec::with_capacity(steps + 1);
    for t in 0..=steps {
        if t > 0 {
            cur = f.step(&cur)?.trimmed();
        }
        rows.push(support_profile_window(&cur).flags.into_iter().map(flag_code).collect::<Vec<_>>());
    }
    Ok(json(&rows))
}

fn js(r: Result<String>) -> std::result::Result<String, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

/// Eigenvalues of the width-`w` window map.
#[wasm_bindgen]
pub fn spectrum(gate: &str, param: f64, w: usize, dir: &str) -> std::result::Result<String, JsError> {
    js(spectrum_json(gate, param, w, dir))
}

#[wasm_bindgen]
pub fn solitons(gate: &str, param: f64, w: usize, dir: &str) -> std::result::Result<String, JsError> {
    js(solitons_json(gate, param, w, dir))
}

#[wasm_bindgen]
pub fn spreading(
    gate: &str,
    param: f64,
    half_len: usize,
    steps: usize,
    site: usize,
    letter: &str,
) -> std::result::Result<String, JsError> {
    js(spreading_json(gate, param, half_len, steps, site, letter))
}
