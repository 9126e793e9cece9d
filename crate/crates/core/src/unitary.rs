//! Dense complex unitaries and their phase-invariant comparison.
//!
//! Basis-state convention: for an `N`-qubit register, qubit 0 is the most
//! significant bit of the basis-state index. `|q0 q1 ... q(N-1)>` has index
//! `q0 * 2^(N-1) + ... + q(N-1)`. The same convention applies inside a
//! multi-qubit gate matrix: the first listed operand qubit is the most
//! significant bit of the gate's local index.

use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Frobenius bound on `U^dag U - I` accepted by [`Unitary::new`].
pub const UNITARITY_TOL: f64 = 1e-9;

/// Default rounding resolution for [`canonical_key`].
pub const DEFAULT_KEY_GRID: f64 = 1e-3;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// A `dim x dim` unitary stored row-major.
#[derive(Clone, PartialEq)]
pub struct Unitary {
    dim: usize,
    data: Vec<Complex64>,
}

impl Unitary {
    /// Validating constructor: `dim` must be a power of two and the entries
    /// must form a unitary within [`UNITARITY_TOL`].
    pub fn new(dim: usize, data: Vec<Complex64>) -> Result<Self> {
        if dim == 0 || !dim.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(dim));
        }
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: data.len(),
            });
        }
        let u = Self { dim, data };
        let deviation = u.unitarity_deviation();
        if deviation.is_nan() || deviation > UNITARITY_TOL {
            return Err(Error::NotUnitary { deviation });
        }
        Ok(u)
    }

    /// Builds from `(re, im)` pairs in row-major order.
    pub fn from_pairs(dim: usize, pairs: &[(f64, f64)]) -> Result<Self> {
        Self::new(dim, pairs.iter().map(|&(re, im)| Complex64::new(re, im)).collect())
    }

    /// Internal constructor for values that are unitary by construction
    /// (products and embeddings of unitaries).
    pub(crate) fn from_raw(dim: usize, data: Vec<Complex64>) -> Self {
        debug_assert_eq!(data.len(), dim * dim);
        Self { dim, data }
    }

    pub fn identity(dim: usize) -> Self {
        let mut data = vec![ZERO; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = ONE;
        }
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `log2(dim)`.
    pub fn n_qubits(&self) -> usize {
        self.dim.trailing_zeros() as usize
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.data
    }

    pub(crate) fn entries_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.dim + col]
    }

    pub fn adjoint(&self) -> Self {
        let d = self.dim;
        let mut data = vec![ZERO; d * d];
        for r in 0..d {
            for c in 0..d {
                data[c * d + r] = self.data[r * d + c].conj();
            }
        }
        Self { dim: d, data }
    }

    /// Matrix product `self * rhs`.
    pub fn matmul(&self, rhs: &Unitary) -> Result<Unitary> {
        check_dims(self, rhs)?;
        Ok(Self::from_raw(self.dim, matmul_raw(&self.data, &rhs.data, self.dim)))
    }

    /// `e^{i theta} * self`.
    pub fn with_global_phase(&self, theta: f64) -> Self {
        let phase = Complex64::from_polar(1.0, theta);
        Self {
            dim: self.dim,
            data: self.data.iter().map(|z| z * phase).collect(),
        }
    }

    /// `||U^dag U - I||_F`.
    pub fn unitarity_deviation(&self) -> f64 {
        let d = self.dim;
        let mut acc = 0.0;
        for i in 0..d {
            for j in 0..d {
                let mut s = ZERO;
                for k in 0..d {
                    s += self.data[k * d + i].conj() * self.data[k * d + j];
                }
                if i == j {
                    s -= ONE;
                }
                acc += s.norm_sqr();
            }
        }
        acc.sqrt()
    }

    /// Frobenius distance `||self - other||_F` without phase compensation.
    pub fn frobenius_distance(&self, other: &Unitary) -> Result<f64> {
        check_dims(self, other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt())
    }

    /// Left-multiplies by `gate` acting on `qubits` of an `n_qubits` register,
    /// i.e. `self <- embed(gate, qubits) * self`, without materializing the
    /// embedded matrix.
    pub fn apply_gate(&mut self, gate: &Unitary, qubits: &[usize]) -> Result<()> {
        let n = self.n_qubits();
        validate_operands(gate, qubits, n)?;
        let d = self.dim;
        apply_gate_rows(&mut self.data, d, gate, qubits, n);
        Ok(())
    }
}

impl fmt::Debug for Unitary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Unitary({}x{}) [", self.dim, self.dim)?;
        for r in 0..self.dim {
            write!(f, " ")?;
            for c in 0..self.dim {
                let z = self.get(r, c);
                write!(f, " {:+.4}{:+.4}i", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Comparison tolerance for [`equal_up_to_phase`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseTolerance(f64);

impl PhaseTolerance {
    pub fn new(tol: f64) -> Result<Self> {
        if tol > 0.0 && tol.is_finite() {
            Ok(Self(tol))
        } else {
            Err(Error::InvalidArgument(format!(
                "phase tolerance must be positive, got {tol}"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Default for PhaseTolerance {
    fn default() -> Self {
        Self(1e-5)
    }
}

/// Bucketing key of a unitary, invariant under global phase.
///
/// Two phase-equivalent unitaries normally share a key, but keys are never a
/// proof of equality: callers verify with [`equal_up_to_phase`].
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CanonicalKey {
    bytes: Vec<u8>,
}

impl CanonicalKey {
    pub fn from_bytes(bytes: Vec<u8>) -> Self {
        Self { bytes }
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }
}

impl fmt::Debug for CanonicalKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CanonicalKey({} bytes, ", self.bytes.len())?;
        for b in self.bytes.iter().take(8) {
            write!(f, "{b:02x}")?;
        }
        write!(f, "..)")
    }
}

/// Returns the `2^N` unitary acting as `gate` on `qubits` (in operand order)
/// and as identity on every other qubit.
pub fn embed(gate: &Unitary, qubits: &[usize], n_qubits: usize) -> Result<Unitary> {
    validate_operands(gate, qubits, n_qubits)?;
    let mut out = Unitary::identity(1 << n_qubits);
    let d = out.dim;
    apply_gate_rows(&mut out.data, d, gate, qubits, n_qubits);
    Ok(out)
}

/// `ops[L-1] * ... * ops[0]`: the first operator is applied first.
/// An empty list has no dimension to infer and yields the 1x1 identity;
/// use [`compose_dim`] when the dimension must be fixed.
pub fn compose(ops: &[Unitary]) -> Result<Unitary> {
    let dim = ops.first().map_or(1, Unitary::dim);
    compose_dim(ops, dim)
}

/// Like [`compose`], returning the `dim`-dimensional identity for an empty list.
pub fn compose_dim(ops: &[Unitary], dim: usize) -> Result<Unitary> {
    let mut acc = Unitary::identity(dim);
    for op in ops {
        if op.dim != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: op.dim,
            });
        }
        acc = Unitary::from_raw(dim, matmul_raw(&op.data, &acc.data, dim));
    }
    Ok(acc)
}

/// `tr(U^dag V)`.
pub fn overlap(u: &Unitary, v: &Unitary) -> Result<Complex64> {
    check_dims(u, v)?;
    Ok(u.data.iter().zip(&v.data).map(|(a, b)| a.conj() * b).sum())
}

/// `1 - |tr(U^dag V)| / d`, zero exactly when `V = e^{i theta} U`.
pub fn phase_distance(u: &Unitary, v: &Unitary) -> Result<f64> {
    let tr = overlap(u, v)?;
    Ok((1.0 - tr.norm() / u.dim as f64).max(0.0))
}

pub fn equal_up_to_phase(u: &Unitary, v: &Unitary, tol: PhaseTolerance) -> Result<bool> {
    Ok(phase_distance(u, v)? <= tol.value())
}

/// Phase-fixed, grid-rounded serialization of `u`.
///
/// The pivot is the first row-major entry whose magnitude reaches
/// `0.5 / sqrt(dim)`, with both sides of the comparison taken at grid
/// resolution so the choice does not flicker on floating-point noise when a
/// magnitude sits exactly on the threshold. The unitary is rotated so the
/// pivot is real and positive, every component is rounded to the nearest
/// multiple of `grid`, and the integers are written as little-endian `i64`
/// (real then imaginary, row-major).
pub fn canonical_key(u: &Unitary, grid: f64) -> CanonicalKey {
    assert!(grid > 0.0, "key grid must be positive");
    let threshold = ((0.5 / (u.dim as f64).sqrt()) / grid).round();
    let pivot = u
        .data
        .iter()
        .copied()
        .find(|z| (z.norm() / grid).round() >= threshold)
        .expect("every column of a unitary has an entry of magnitude >= 1/sqrt(dim)");
    let fix = pivot.conj() / pivot.norm();
    let mut bytes = Vec::with_capacity(u.data.len() * 16);
    for z in &u.data {
        let w = z * fix;
        bytes.extend_from_slice(&grid_round(w.re, grid).to_le_bytes());
        bytes.extend_from_slice(&grid_round(w.im, grid).to_le_bytes());
    }
    CanonicalKey { bytes }
}

fn grid_round(x: f64, grid: f64) -> i64 {
    // `as` maps -0.0 to 0, so signed zeros share a bucket.
    (x / grid).round() as i64
}

fn check_dims(a: &Unitary, b: &Unitary) -> Result<()> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch {
            expected: a.dim,
            got: b.dim,
        });
    }
    Ok(())
}

pub(crate) fn validate_operands(gate: &Unitary, qubits: &[usize], n_qubits: usize) -> Result<()> {
    if gate.dim != 1 << qubits.len() {
        return Err(Error::DimensionMismatch {
            expected: 1 << qubits.len(),
            got: gate.dim,
        });
    }
    for (i, &q) in qubits.iter().enumerate() {
        if q >= n_qubits {
            return Err(Error::QubitOutOfRange { index: q, n_qubits });
        }
        if qubits[..i].contains(&q) {
            return Err(Error::RepeatedQubit(q));
        }
    }
    Ok(())
}

fn matmul_raw(a: &[Complex64], b: &[Complex64], d: usize) -> Vec<Complex64> {
    let mut out = vec![ZERO; d * d];
    for r in 0..d {
        let row = &mut out[r * d..(r + 1) * d];
        for k in 0..d {
            let a_rk = a[r * d + k];
            if a_rk == ZERO {
                continue;
            }
            let b_row = &b[k * d..(k + 1) * d];
            for (o, b_kc) in row.iter_mut().zip(b_row) {
                *o += a_rk * b_kc;
            }
        }
    }
    out
}

/// Applies `gate` on `qubits` to the rows of a row-major `2^n x n_cols`
/// block (a matrix when `n_cols = 2^n`, a state vector when `n_cols = 1`).
/// Operands must already be validated.
pub(crate) fn apply_gate_rows(
    data: &mut [Complex64],
    n_cols: usize,
    gate: &Unitary,
    qubits: &[usize],
    n_qubits: usize,
) {
    let k = qubits.len();
    let local = 1usize << k;
    let mut offsets = vec![0usize; local];
    for (l, off) in offsets.iter_mut().enumerate() {
        for (j, &q) in qubits.iter().enumerate() {
            if (l >> (k - 1 - j)) & 1 == 1 {
                *off |= 1 << (n_qubits - 1 - q);
            }
        }
    }
    let mask = offsets[local - 1];
    let g = &gate.data;
    match k {
        1 => {
            let (g00, g01, g10, g11) = (g[0], g[1], g[2], g[3]);
            let o1 = offsets[1];
            for base in (0..1usize << n_qubits).filter(|b| b & mask == 0) {
                for c in 0..n_cols {
                    let i0 = base * n_cols + c;
                    let i1 = (base + o1) * n_cols + c;
                    let (a, b) = (data[i0], data[i1]);
                    data[i0] = g00 * a + g01 * b;
                    data[i1] = g10 * a + g11 * b;
                }
            }
        }
        _ => {
            let mut buf = vec![ZERO; local];
            for base in (0..1usize << n_qubits).filter(|b| b & mask == 0) {
                for c in 0..n_cols {
                    for (l, v) in buf.iter_mut().enumerate() {
                        *v = data[(base + offsets[l]) * n_cols + c];
                    }
                    for (m, &off) in offsets.iter().enumerate() {
                        let row = &g[m * local..(m + 1) * local];
                        data[(base + off) * n_cols + c] = row.iter().zip(&buf).map(|(x, y)| x * y).sum();
                    }
                }
            }
        }
    }
}
