//! Shortest-factorization database extracted from a compute graph.
//!
//! # File format
//!
//! All integers little-endian.
//!
//! ```text
//! "QCRDB1"            6 bytes magic
//! qubit_count         u32
//! depth_bound         u32
//! fingerprint         u64   gate-set fingerprint
//! entry_count         u64
//! entry_count x {
//!     key_len         u32
//!     key             key_len bytes (canonical key: i64 grid multiples, re then im, row-major)
//!     fact_len        u32
//!     fact_len x {
//!         name_len    u16
//!         name        name_len bytes (UTF-8)
//!         arity       u8
//!         qubits      arity x u8
//!     }
//!     unitary         dim*dim x (f64 re, f64 im), row-major
//! }
//! crc32               u32   CRC-32 (IEEE) of every preceding byte
//! ```

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use num_complex::Complex64;

use crate::circuit::{tokens_unitary, Token};
use crate::error::{Error, Result};
use crate::gates::GateSet;
use crate::graph::ComputeGraph;
use crate::unitary::{canonical_key, equal_up_to_phase, CanonicalKey, PhaseTolerance, Unitary, DEFAULT_KEY_GRID};

const MAGIC: &[u8; 6] = b"QCRDB1";

#[derive(Debug, Clone, PartialEq)]
pub struct DbEntry {
    pub key: CanonicalKey,
    pub unitary: Unitary,
    pub factorization: Vec<Token>,
}

/// Immutable map from phase-canonical key to shortest known factorization.
#[derive(Debug, Clone)]
pub struct FactorDatabase {
    qubit_count: usize,
    depth_bound: usize,
    fingerprint: u64,
    entries: Vec<DbEntry>,
    index: HashMap<CanonicalKey, Vec<u32>>,
}

impl PartialEq for FactorDatabase {
    fn eq(&self, other: &Self) -> bool {
        self.qubit_count == other.qubit_count
            && self.depth_bound == other.depth_bound
            && self.fingerprint == other.fingerprint
            && self.entries == other.entries
    }
}

/// One entry per graph node, in BFS order.
pub fn extract_database(g: &ComputeGraph) -> FactorDatabase {
    let entries = (0..g.node_count())
        .map(|id| {
            let unitary = g.node_unitary(id);
            DbEntry {
                key: canonical_key(&unitary, DEFAULT_KEY_GRID),
                unitary,
                factorization: g.factorization(id),
            }
        })
        .collect();
    FactorDatabase::from_entries(g.n_qubits(), g.depth_bound(), g.fingerprint(), entries)
}

impl FactorDatabase {
    fn from_entries(qubit_count: usize, depth_bound: usize, fingerprint: u64, entries: Vec<DbEntry>) -> Self {
        let mut index: HashMap<CanonicalKey, Vec<u32>> = HashMap::with_capacity(entries.len());
        for (i, e) in entries.iter().enumerate() {
            index.entry(e.key.clone()).or_default().push(i as u32);
        }
        Self {
            qubit_count,
            depth_bound,
            fingerprint,
            entries,
            index,
        }
    }

    pub fn qubit_count(&self) -> usize {
        self.qubit_count
    }

    pub fn depth_bound(&self) -> usize {
        self.depth_bound
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[DbEntry] {
        &self.entries
    }

    /// Shortest stored factorization of `u`, only if it verifies against the
    /// stored unitary at the default tolerance.
    pub fn lookup(&self, u: &Unitary) -> Result<Option<&[Token]>> {
        Ok(self.lookup_entry(u)?.map(|e| e.factorization.as_slice()))
    }

    pub fn lookup_entry(&self, u: &Unitary) -> Result<Option<&DbEntry>> {
        if u.dim() != 1 << self.qubit_count {
            return Err(Error::DimensionMismatch {
                expected: 1 << self.qubit_count,
                got: u.dim(),
            });
        }
        let key = canonical_key(u, DEFAULT_KEY_GRID);
        let Some(bucket) = self.index.get(&key) else {
            return Ok(None);
        };
        let tol = PhaseTolerance::default();
        for &i in bucket {
            let e = &self.entries[i as usize];
            if equal_up_to_phase(&e.unitary, u, tol)? {
                return Ok(Some(e));
            }
        }
        Ok(None)
    }

    pub fn check_gate_set(&self, gs: &GateSet) -> Result<()> {
        if gs.fingerprint() != self.fingerprint {
            return Err(Error::FingerprintMismatch {
                expected: gs.fingerprint(),
                found: self.fingerprint,
            });
        }
        Ok(())
    }

    pub fn to_bytes(&self, gs: &GateSet) -> Result<Vec<u8>> {
        self.check_gate_set(gs)?;
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.qubit_count as u32).to_le_bytes());
        out.extend_from_slice(&(self.depth_bound as u32).to_le_bytes());
        out.extend_from_slice(&self.fingerprint.to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u64).to_le_bytes());
        for e in &self.entries {
            let key = e.key.as_bytes();
            out.extend_from_slice(&(key.len() as u32).to_le_bytes());
            out.extend_from_slice(key);
            out.extend_from_slice(&(e.factorization.len() as u32).to_le_bytes());
            for t in &e.factorization {
                let name = gs.def(t.def()).name.as_bytes();
                out.extend_from_slice(&(name.len() as u16).to_le_bytes());
                out.extend_from_slice(name);
                out.push(t.qubits().len() as u8);
                out.extend(t.qubits().iter().map(|&q| q as u8));
            }
            for z in e.unitary.entries() {
                out.extend_from_slice(&z.re.to_le_bytes());
                out.extend_from_slice(&z.im.to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        Ok(out)
    }

    /// Parses and fully validates a database image; nothing partial is
    /// returned on error.
    pub fn from_bytes(bytes: &[u8], gs: &GateSet) -> Result<Self> {
        let fmt = |m: &str| Error::DatabaseFormat(m.to_string());
        if bytes.len() < MAGIC.len() + 4 || &bytes[..MAGIC.len()] != MAGIC {
            return Err(fmt("bad magic or version"));
        }
        let (body, crc) = bytes.split_at(bytes.len() - 4);
        if crc32fast::hash(body) != u32::from_le_bytes(crc.try_into().expect("4 bytes")) {
            return Err(fmt("checksum mismatch (truncated or corrupt file)"));
        }
        let mut r = Reader {
            buf: body,
            pos: MAGIC.len(),
        };
        let qubit_count = r.u32()? as usize;
        let depth_bound = r.u32()? as usize;
        let fingerprint = r.u64()?;
        if fingerprint != gs.fingerprint() {
            return Err(Error::FingerprintMismatch {
                expected: gs.fingerprint(),
                found: fingerprint,
            });
        }
        if !(1..=8).contains(&qubit_count) {
            return Err(fmt("qubit count out of range"));
        }
        let count = r.u64()? as usize;
        let dim = 1usize << qubit_count;
        let tol = PhaseTolerance::default();
        let mut entries = Vec::with_capacity(count.min(body.len()));
        for _ in 0..count {
            let key_len = r.u32()? as usize;
            let key = CanonicalKey::from_bytes(r.take(key_len)?.to_vec());
            let fact_len = r.u32()? as usize;
            let mut factorization = Vec::with_capacity(fact_len.min(256));
            for _ in 0..fact_len {
                let name_len = r.u16()? as usize;
                let name = std::str::from_utf8(r.take(name_len)?).map_err(|_| fmt("token name is not UTF-8"))?;
                let def = gs
                    .index_of(name)
                    .ok_or_else(|| Error::DatabaseFormat(format!("unknown token `{name}`")))?;
                let arity = r.take(1)?[0] as usize;
                if arity != gs.def(def).arity() {
                    return Err(fmt("token arity mismatch"));
                }
                let qubits: Vec<usize> = r.take(arity)?.iter().map(|&q| q as usize).collect();
                if qubits.iter().any(|&q| q >= qubit_count) {
                    return Err(fmt("token qubit out of range"));
                }
                factorization.push(Token::new(def, &qubits));
            }
            let mut data = Vec::with_capacity(dim * dim);
            for _ in 0..dim * dim {
                let re = f64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes"));
                let im = f64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes"));
                data.push(Complex64::new(re, im));
            }
            let unitary = Unitary::new(dim, data)?;
            if !equal_up_to_phase(&tokens_unitary(&factorization, gs, qubit_count), &unitary, tol)? {
                return Err(fmt("stored factorization does not reproduce its unitary"));
            }
            entries.push(DbEntry {
                key,
                unitary,
                factorization,
            });
        }
        if r.pos != body.len() {
            return Err(fmt("trailing bytes after last entry"));
        }
        Ok(Self::from_entries(qubit_count, depth_bound, fingerprint, entries))
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::DatabaseFormat("unexpected end of data".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn save_database(db: &FactorDatabase, gs: &GateSet, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, db.to_bytes(gs)?)?;
    Ok(())
}

pub fn load_database(path: impl AsRef<Path>, gs: &GateSet) -> Result<FactorDatabase> {
    FactorDatabase::from_bytes(&fs::read(path)?, gs)
}
