//! Binary field files used for checkpoints, damping grids and initial data.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic  b"DWCK"
//! version u32 (= 1)
//! d       u32
//! n       d × u32
//! bc      u8   (0 Dirichlet sine, 1 periodic Fourier)
//! t       f64
//! nfields u32
//! data    nfields × Π n  f64, row-major grid values
//! ```

use std::io::{Read, Write};

use ndarray::Array3;

use crate::diagnostics::WaveState;
use crate::domain::{BoundaryCondition, GridField, SpectralDomain};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"DWCK";
pub const VERSION: u32 = 1;
const MAX_POINTS_PER_AXIS: usize = 1024;
const MAX_FIELDS: usize = 16;

/// Grid fields sharing one header.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldFile {
    pub d: usize,
    pub n: Vec<usize>,
    pub bc: BoundaryCondition,
    pub t: f64,
    pub fields: Vec<GridField>,
}

fn shape_of(n: &[usize]) -> [usize; 3] {
    let mut s = [1; 3];
    s[..n.len()].copy_from_slice(n);
    s
}

impl FieldFile {
    pub fn new(dom: &SpectralDomain, t: f64, fields: Vec<GridField>) -> Result<Self> {
        for f in &fields {
            if f.shape() != dom.shape() {
                return Err(Error::ShapeMismatch {
                    expected: dom.shape(),
                    actual: f.shape(),
                });
            }
        }
        Ok(Self {
            d: dom.d(),
            n: dom.n().to_vec(),
            bc: dom.bc(),
            t,
            fields,
        })
    }

    pub fn from_state(dom: &SpectralDomain, state: &WaveState) -> Result<Self> {
        Self::new(dom, state.t, vec![state.u_grid(dom)?, state.v_grid(dom)?])
    }

    /// Checks that the header describes `dom`.
    pub fn require_compatible(&self, dom: &SpectralDomain) -> Result<()> {
        if self.d != dom.d() || self.n != dom.n() || self.bc != dom.bc() {
            return Err(Error::FieldFormat(format!(
                "file describes d={} n={:?} bc={:?}, domain is d={} n={:?} bc={:?}",
                self.d,
                self.n,
                self.bc,
                dom.d(),
                dom.n(),
                dom.bc()
            )));
        }
        Ok(())
    }

    /// Interprets a two-field file as `(u, ∂ₜu)`.
    pub fn to_state(&self, dom: &SpectralDomain) -> Result<WaveState> {
        self.require_compatible(dom)?;
        if self.fields.len() != 2 {
            return Err(Error::FieldFormat(format!(
                "a state needs 2 fields, file has {}",
                self.fields.len()
            )));
        }
        WaveState::from_grid(dom, self.t, &self.fields[0], &self.fields[1])
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.d as u32).to_le_bytes())?;
        for &n in &self.n {
            w.write_all(&(n as u32).to_le_bytes())?;
        }
        w.write_all(&[self.bc.code()])?;
        w.write_all(&self.t.to_le_bytes())?;
        w.write_all(&(self.fields.len() as u32).to_le_bytes())?;
        let mut buf = Vec::new();
        for f in &self.fields {
            buf.clear();
            // Standard layout iteration is row-major.
            for &x in f.values().iter() {
                buf.extend_from_slice(&x.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(4)? != MAGIC {
            return Err(Error::FieldFormat("bad magic".into()));
        }
        let version = cur.u32()?;
        if version != VERSION {
            return Err(Error::FieldFormat(format!("unsupported version {version}")));
        }
        let d = cur.u32()? as usize;
        if !(1..=3).contains(&d) {
            return Err(Error::FieldFormat(format!("dimension {d} not in 1..=3")));
        }
        let mut n = Vec::with_capacity(d);
        for _ in 0..d {
            let k = cur.u32()? as usize;
            if k == 0 || k > MAX_POINTS_PER_AXIS {
                return Err(Error::FieldFormat(format!(
                    "axis size {k} not in 1..={MAX_POINTS_PER_AXIS}"
                )));
            }
            n.push(k);
        }
        let code = cur.take(1)?[0];
        let bc = BoundaryCondition::from_code(code)
            .ok_or_else(|| Error::FieldFormat(format!("unknown boundary code {code}")))?;
        let t = cur.f64()?;
        let nfields = cur.u32()? as usize;
        if nfields > MAX_FIELDS {
            return Err(Error::FieldFormat(format!(
                "{nfields} fields exceeds the limit {MAX_FIELDS}"
            )));
        }
        let shape = shape_of(&n);
        let points: usize = shape.iter().product();
        let expected = points
            .checked_mul(8 * nfields)
            .ok_or_else(|| Error::FieldFormat("size overflow".into()))?;
        if cur.remaining() != expected {
            return Err(Error::FieldFormat(format!(
                "expected {expected} data bytes, found {}",
                cur.remaining()
            )));
        }
        let mut fields = Vec::with_capacity(nfields);
        for _ in 0..nfields {
            let mut vals = Vec::with_capacity(points);
            for _ in 0..points {
                vals.push(cur.f64()?);
            }
            let arr = Array3::from_shape_vec(shape, vals).expect("length checked");
            fields.push(GridField::new(arr));
        }
        Ok(Self {
            d,
            n,
            bc,
            t,
            fields,
        })
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, k: usize) -> Result<&'a [u8]> {
        if self.remaining() < k {
            return Err(Error::FieldFormat("truncated file".into()));
        }
        let s = &self.bytes[self.pos..self.pos + k];
        self.pos += k;
        Ok(s)
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
