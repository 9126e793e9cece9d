//! Gate-set configuration: named discrete tokens built from fixed primitives.

use std::collections::HashMap;
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, PI};
use std::fmt::Write as _;

use num_complex::Complex64;
use sha2::{Digest, Sha256};

use crate::circuit::{Token, MAX_ARITY};
use crate::error::{Error, Result};
use crate::unitary::{phase_distance, Unitary};

/// Numeric threshold for gate-level identities (commutation, inverse pairs).
pub const GATE_EPS: f64 = 1e-9;

/// The primitive a token is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Primitive {
    H,
    X,
    Y,
    Z,
    S,
    Sdg,
    T,
    Tdg,
    Rx,
    Ry,
    Rz,
    Rxx,
    Cx,
    Cz,
    Swap,
}

impl Primitive {
    pub fn parse(name: &str) -> Option<Self> {
        use Primitive::*;
        Some(match name {
            "h" => H,
            "x" => X,
            "y" => Y,
            "z" => Z,
            "s" => S,
            "sdg" => Sdg,
            "t" => T,
            "tdg" => Tdg,
            "rx" => Rx,
            "ry" => Ry,
            "rz" => Rz,
            "rxx" => Rxx,
            "cx" => Cx,
            "cz" => Cz,
            "swap" => Swap,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        use Primitive::*;
        match self {
            H => "h",
            X => "x",
            Y => "y",
            Z => "z",
            S => "s",
            Sdg => "sdg",
            T => "t",
            Tdg => "tdg",
            Rx => "rx",
            Ry => "ry",
            Rz => "rz",
            Rxx => "rxx",
            Cx => "cx",
            Cz => "cz",
            Swap => "swap",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Primitive::Rxx | Primitive::Cx | Primitive::Cz | Primitive::Swap => 2,
            _ => 1,
        }
    }

    pub fn takes_angle(self) -> bool {
        matches!(self, Primitive::Rx | Primitive::Ry | Primitive::Rz | Primitive::Rxx)
    }

    /// Rotations are `exp(-i theta P / 2)` for the Pauli (product) `P`.
    pub fn matrix(self, angle: Option<f64>) -> Unitary {
        use Primitive::*;
        let c = |re: f64, im: f64| Complex64::new(re, im);
        let th = angle.unwrap_or(0.0) / 2.0;
        let (co, si) = (th.cos(), th.sin());
        let s2 = FRAC_1_SQRT_2;
        let o = c(0.0, 0.0);
        let one = c(1.0, 0.0);
        let data = match self {
            H => vec![c(s2, 0.0), c(s2, 0.0), c(s2, 0.0), c(-s2, 0.0)],
            X => vec![o, one, one, o],
            Y => vec![o, c(0.0, -1.0), c(0.0, 1.0), o],
            Z => vec![one, o, o, c(-1.0, 0.0)],
            S => vec![one, o, o, c(0.0, 1.0)],
            Sdg => vec![one, o, o, c(0.0, -1.0)],
            T => vec![one, o, o, Complex64::from_polar(1.0, FRAC_PI_4)],
            Tdg => vec![one, o, o, Complex64::from_polar(1.0, -FRAC_PI_4)],
            Rx => vec![c(co, 0.0), c(0.0, -si), c(0.0, -si), c(co, 0.0)],
            Ry => vec![c(co, 0.0), c(-si, 0.0), c(si, 0.0), c(co, 0.0)],
            Rz => vec![c(co, -si), o, o, c(co, si)],
            Rxx => {
                let (d, a) = (c(co, 0.0), c(0.0, -si));
                vec![d, o, o, a, o, d, a, o, o, a, d, o, a, o, o, d]
            }
            Cx => vec![one, o, o, o, o, one, o, o, o, o, o, one, o, o, one, o],
            Cz => vec![one, o, o, o, o, one, o, o, o, o, one, o, o, o, o, c(-1.0, 0.0)],
            Swap => vec![one, o, o, o, o, o, one, o, o, one, o, o, o, o, o, one],
        };
        Unitary::from_raw(1 << self.arity(), data)
    }
}

/// One named token of the alphabet.
#[derive(Debug, Clone)]
pub struct TokenDef {
    pub name: String,
    pub primitive: Primitive,
    pub angle: Option<f64>,
    pub matrix: Unitary,
}

impl TokenDef {
    pub fn arity(&self) -> usize {
        self.primitive.arity()
    }
}

/// Relation between two tokens placed on overlapping supports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PairRelation {
    pub commutes: bool,
    /// Applying the first then the second gives the identity up to phase.
    pub inverse: bool,
}

/// Second operand's qubits in joint coordinates: the first operand occupies
/// `0..arity`, fresh qubits are numbered after it in order of appearance.
type Layout = [u8; MAX_ARITY];

/// An immutable, validated gate set.
#[derive(Debug, Clone)]
pub struct GateSet {
    defs: Vec<TokenDef>,
    by_name: HashMap<String, usize>,
    relations: HashMap<(usize, usize, Layout), PairRelation>,
    fingerprint: u64,
}

const PRESET_IONTRAP: &[(&str, Primitive, f64)] = &[
    ("rx_p2", Primitive::Rx, FRAC_PI_2),
    ("rx_m2", Primitive::Rx, -FRAC_PI_2),
    ("rx_p4", Primitive::Rx, FRAC_PI_4),
    ("rx_m4", Primitive::Rx, -FRAC_PI_4),
    ("rx_pi", Primitive::Rx, PI),
    ("ry_p2", Primitive::Ry, FRAC_PI_2),
    ("ry_m2", Primitive::Ry, -FRAC_PI_2),
    ("ry_p4", Primitive::Ry, FRAC_PI_4),
    ("ry_m4", Primitive::Ry, -FRAC_PI_4),
    ("ry_pi", Primitive::Ry, PI),
    ("rz_p2", Primitive::Rz, FRAC_PI_2),
    ("rz_m2", Primitive::Rz, -FRAC_PI_2),
    ("rz_p4", Primitive::Rz, FRAC_PI_4),
    ("rz_m4", Primitive::Rz, -FRAC_PI_4),
    ("rz_pi", Primitive::Rz, PI),
    ("rxx_p2", Primitive::Rxx, FRAC_PI_2),
];

const PRESET_NISQ: &[(&str, Primitive, f64)] = &[
    ("rx_p2", Primitive::Rx, FRAC_PI_2),
    ("rx_m2", Primitive::Rx, -FRAC_PI_2),
    ("rx_pi", Primitive::Rx, PI),
    ("rz_p2", Primitive::Rz, FRAC_PI_2),
    ("rz_m2", Primitive::Rz, -FRAC_PI_2),
    ("rz_p4", Primitive::Rz, FRAC_PI_4),
    ("rz_m4", Primitive::Rz, -FRAC_PI_4),
    ("rz_pi", Primitive::Rz, PI),
];

const PRESET_CLIFFORD_T: &[Primitive] = &[
    Primitive::H,
    Primitive::S,
    Primitive::Sdg,
    Primitive::T,
    Primitive::Tdg,
    Primitive::X,
    Primitive::Cx,
];

/// Names accepted after `preset:`.
pub const PRESETS: &[&str] = &["iontrap", "nisq", "clifford_t"];

fn preset_defs(name: &str) -> Option<Vec<(String, Primitive, Option<f64>)>> {
    let rot = |list: &[(&str, Primitive, f64)]| {
        list.iter()
            .map(|&(n, p, a)| (n.to_string(), p, Some(a)))
            .collect::<Vec<_>>()
    };
    match name {
        "iontrap" => Some(rot(PRESET_IONTRAP)),
        "nisq" => {
            let mut v = rot(PRESET_NISQ);
            v.push(("cz".into(), Primitive::Cz, None));
            Some(v)
        }
        "clifford_t" => Some(
            PRESET_CLIFFORD_T
                .iter()
                .map(|&p| (p.name().to_string(), p, None))
                .collect(),
        ),
        _ => None,
    }
}

/// Parses a gate-set config.
///
/// One token per line: `<name> <primitive> [<angle>] arity <k>`. A line
/// `preset:<name>` pulls in a built-in bundle. Blank lines and `#` comments
/// are skipped. Angles are radians, either a float or `[-][a*]pi[/b]`.
pub fn parse_gate_set(config_text: &str) -> Result<GateSet> {
    let mut raw = Vec::new();
    for (idx, line) in config_text.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| Error::GateSetConfig { line: lineno, msg };
        if let Some(preset) = line.strip_prefix("preset:") {
            let defs = preset_defs(preset.trim()).ok_or_else(|| err(format!("unknown preset `{}`", preset.trim())))?;
            raw.extend(defs.into_iter().map(|d| (lineno, d)));
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let (name, prim_name, rest) = match fields.as_slice() {
            [n, p, rest @ ..] => (*n, *p, rest),
            _ => return Err(err("expected `<name> <primitive> [<angle>] arity <k>`".into())),
        };
        let prim = Primitive::parse(prim_name).ok_or_else(|| err(format!("unknown primitive `{prim_name}`")))?;
        let (angle, arity_fields) = if prim.takes_angle() {
            match rest.split_first() {
                Some((a, tail)) => (
                    Some(parse_angle(a).ok_or_else(|| err(format!("malformed angle `{a}`")))?),
                    tail,
                ),
                None => return Err(err(format!("primitive `{prim_name}` needs an angle"))),
            }
        } else {
            (None, rest)
        };
        match arity_fields {
            ["arity", k] => {
                let k: usize = k.parse().map_err(|_| err(format!("malformed arity `{k}`")))?;
                if k != prim.arity() {
                    return Err(err(format!(
                        "primitive `{prim_name}` acts on {} qubit(s), config says {k}",
                        prim.arity()
                    )));
                }
            }
            _ => return Err(err("expected trailing `arity <k>`".into())),
        }
        raw.push((lineno, (name.to_string(), prim, angle)));
    }

    let mut defs = Vec::with_capacity(raw.len());
    for (lineno, (name, primitive, angle)) in raw {
        let err = |msg: String| Error::GateSetConfig { line: lineno, msg };
        if defs.iter().any(|d: &TokenDef| d.name == name) {
            return Err(err(format!("duplicate token name `{name}`")));
        }
        let matrix = primitive.matrix(angle);
        let id = Unitary::identity(matrix.dim());
        if phase_distance(&matrix, &id)? <= GATE_EPS {
            return Err(err(format!("token `{name}` is the identity")));
        }
        defs.push(TokenDef {
            name,
            primitive,
            angle,
            matrix,
        });
    }
    GateSet::from_defs(defs)
}

fn parse_angle(text: &str) -> Option<f64> {
    if let Ok(v) = text.parse::<f64>() {
        return v.is_finite().then_some(v);
    }
    let (sign, body) = match text.strip_prefix('-') {
        Some(b) => (-1.0, b),
        None => (1.0, text),
    };
    let (num, body) = match body.split_once('*') {
        Some((n, b)) => (n.parse::<f64>().ok()?, b),
        None => (1.0, body),
    };
    let (pi, den) = match body.split_once('/') {
        Some((p, d)) => (p, d.parse::<f64>().ok()?),
        None => (body, 1.0),
    };
    if pi != "pi" || den == 0.0 {
        return None;
    }
    Some(sign * num * PI / den)
}

impl GateSet {
    fn from_defs(defs: Vec<TokenDef>) -> Result<Self> {
        if defs.is_empty() {
            return Err(Error::GateSetConfig {
                line: 0,
                msg: "gate set is empty".into(),
            });
        }
        let by_name = defs.iter().enumerate().map(|(i, d)| (d.name.clone(), i)).collect();
        let mut gs = Self {
            defs,
            by_name,
            relations: HashMap::new(),
            fingerprint: 0,
        };
        gs.fingerprint = fingerprint_of(&gs.canonical_text());
        gs.relations = gs.compute_relations()?;
        Ok(gs)
    }

    pub fn preset(name: &str) -> Result<Self> {
        parse_gate_set(&format!("preset:{name}"))
    }

    pub fn defs(&self) -> &[TokenDef] {
        &self.defs
    }

    pub fn len(&self) -> usize {
        self.defs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.defs.is_empty()
    }

    pub fn def(&self, index: usize) -> &TokenDef {
        &self.defs[index]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.by_name.get(name).copied()
    }

    pub fn max_arity(&self) -> usize {
        self.defs.iter().map(TokenDef::arity).max().unwrap_or(0)
    }

    /// One line per def, angles at 17 significant digits. Two configs that
    /// define the same tokens (e.g. a preset and its expansion) render equal.
    pub fn canonical_text(&self) -> String {
        let mut out = String::new();
        for d in &self.defs {
            match d.angle {
                Some(a) => writeln!(out, "{} {} {:.16e} arity {}", d.name, d.primitive.name(), a, d.arity()),
                None => writeln!(out, "{} {} arity {}", d.name, d.primitive.name(), d.arity()),
            }
            .expect("writing to a String");
        }
        out
    }

    /// Hash of [`GateSet::canonical_text`], stored in database and model files.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// Every (def, ordered distinct qubit tuple) pair on an `n_qubits`
    /// register, defs in gate-set order and tuples lexicographic.
    pub fn instantiations(&self, n_qubits: usize) -> Vec<Token> {
        let mut out = Vec::new();
        for (def, d) in self.defs.iter().enumerate() {
            match d.arity() {
                1 => out.extend((0..n_qubits).map(|q| Token::new(def, &[q]))),
                2 => {
                    for a in 0..n_qubits {
                        for b in (0..n_qubits).filter(|&b| b != a) {
                            out.push(Token::new(def, &[a, b]));
                        }
                    }
                }
                k => unreachable!("primitives have arity <= {MAX_ARITY}, got {k}"),
            }
        }
        out
    }

    /// Relation of `first` followed by `second`; `None` when their supports
    /// are disjoint.
    pub fn relation(&self, first: &Token, second: &Token) -> Option<PairRelation> {
        let qa = first.qubits();
        let mut fresh = qa.len() as u8;
        let mut layout: Layout = [u8::MAX; MAX_ARITY];
        let mut overlap = false;
        for (slot, &q) in second.qubits().iter().enumerate() {
            if let Some(pos) = qa.iter().position(|&p| p == q) {
                layout[slot] = pos as u8;
                overlap = true;
            } else {
                layout[slot] = fresh;
                fresh += 1;
            }
        }
        if !overlap {
            return None;
        }
        self.relations.get(&(first.def(), second.def(), layout)).copied()
    }

    fn compute_relations(&self) -> Result<HashMap<(usize, usize, Layout), PairRelation>> {
        let mut rel = HashMap::new();
        for (ia, a) in self.defs.iter().enumerate() {
            for (ib, b) in self.defs.iter().enumerate() {
                let (ka, kb) = (a.arity(), b.arity());
                for layout in joint_layouts(ka, kb) {
                    let joint = layout[..kb].iter().map(|&x| x as usize + 1).max().unwrap().max(ka);
                    let qa: Vec<usize> = (0..ka).collect();
                    let qb: Vec<usize> = layout[..kb].iter().map(|&x| x as usize).collect();
                    let ea = crate::unitary::embed(&a.matrix, &qa, joint)?;
                    let eb = crate::unitary::embed(&b.matrix, &qb, joint)?;
                    let ab = ea.matmul(&eb)?;
                    let ba = eb.matmul(&ea)?;
                    let commutes = ab.frobenius_distance(&ba)? <= GATE_EPS;
                    let inverse = phase_distance(&ba, &Unitary::identity(ba.dim()))? <= GATE_EPS;
                    rel.insert((ia, ib, layout), PairRelation { commutes, inverse });
                }
            }
        }
        Ok(rel)
    }
}

/// Placements of a `kb`-qubit operand relative to a `ka`-qubit one that
/// share at least one qubit, with fresh qubits numbered in order.
fn joint_layouts(ka: usize, kb: usize) -> Vec<Layout> {
    let mut out = Vec::new();
    let mut cur = [u8::MAX; MAX_ARITY];
    fn rec(slot: usize, kb: usize, ka: usize, fresh: u8, cur: &mut Layout, out: &mut Vec<Layout>) {
        if slot == kb {
            if cur[..kb].iter().any(|&x| (x as usize) < ka) {
                out.push(*cur);
            }
            return;
        }
        for old in 0..ka as u8 {
            if !cur[..slot].contains(&old) {
                cur[slot] = old;
                rec(slot + 1, kb, ka, fresh, cur, out);
            }
        }
        cur[slot] = fresh;
        rec(slot + 1, kb, ka, fresh + 1, cur, out);
        cur[slot] = u8::MAX;
    }
    rec(0, kb, ka, ka as u8, &mut cur, &mut out);
    out
}

fn fingerprint_of(text: &str) -> u64 {
    let digest = Sha256::digest(text.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 has 32 bytes"))
}
