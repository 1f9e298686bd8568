//! Binary checkpoints of the full hierarchy state.
//!
//! Layout (little endian):
//! `b"SBHEOMCK"`, `u32` format version, `u64` header length, JSON header,
//! `u64` ADO count, then per ADO the entries `(0,0) (0,1) (1,0) (1,1)` as
//! `(re, im)` pairs of `f64`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{CouplingConvention, HierarchyError, HierarchyState, SystemSpec};
use crate::bath::BathDecomposition;
use crate::linalg::{c, Op};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"SBHEOMCK";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub system: SystemSpec,
    pub decomposition: BathDecomposition,
    pub l_max: usize,
    pub convention: CouplingConvention,
    pub time: f64,
    pub n_ados: usize,
}

pub fn write_checkpoint<W: Write>(
    mut w: W,
    header: &Checkpoint,
    state: &HierarchyState,
) -> Result<(), HierarchyError> {
    if header.n_ados != state.ados.len() {
        return Err(HierarchyError::ShapeMismatch {
            got: state.ados.len(),
            expected: header.n_ados,
        });
    }
    let json = serde_json::to_vec(header).map_err(|e| HierarchyError::Checkpoint(e.to_string()))?;
    w.write_all(MAGIC)?;
    w.write_all(&header.version.to_le_bytes())?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    w.write_all(&(state.ados.len() as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(state.ados.len() * 64);
    for ado in &state.ados {
        for (r, col) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            let v = ado[(r, col)];
            buf.extend_from_slice(&v.re.to_le_bytes());
            buf.extend_from_slice(&v.im.to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64, HierarchyError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<(Checkpoint, HierarchyState), HierarchyError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(HierarchyError::Checkpoint("not a hierarchy checkpoint".into()));
    }
    let mut vb = [0u8; 4];
    r.read_exact(&mut vb)?;
    let version = u32::from_le_bytes(vb);
    if version != CHECKPOINT_VERSION {
        return Err(HierarchyError::Checkpoint(format!(
            "unsupported format version {version} (expected {CHECKPOINT_VERSION})"
        )));
    }
    let len = read_u64(&mut r)? as usize;
    let mut json = vec![0u8; len];
    r.read_exact(&mut json)?;
    let header: Checkpoint =
        serde_json::from_slice(&json).map_err(|e| HierarchyError::Checkpoint(e.to_string()))?;
    let n = read_u64(&mut r)? as usize;
    if n != header.n_ados {
        return Err(HierarchyError::Checkpoint(format!(
            "header declares {} ADOs, payload has {n}",
            header.n_ados
        )));
    }
    let mut payload = vec![0u8; n * 64];
    r.read_exact(&mut payload)?;
    let f = |i: usize| f64::from_le_bytes(payload[8 * i..8 * i + 8].try_into().expect("8 bytes"));
    let ados = (0..n)
        .map(|a| {
            let b = 8 * a;
            Op::new(
                c(f(b), f(b + 1)),
                c(f(b + 2), f(b + 3)),
                c(f(b + 4), f(b + 5)),
                c(f(b + 6), f(b + 7)),
            )
        })
        .collect();
    let time = header.time;
    Ok((header, HierarchyState { ados, time }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::{pade_decomposition, BathSpec};
    use crate::hierarchy::HierarchyTable;

    #[test]
    fn round_trip_is_exact() {
        let decomposition = pade_decomposition(&BathSpec::new(0.3, 1.0, 25.0).unwrap(), 2).unwrap();
        let table = HierarchyTable::build(&decomposition, 2).unwrap();
        let mut state = HierarchyState::initial(&table, Op::identity() * c(0.5, 0.0));
        for (i, a) in state.ados.iter_mut().enumerate() {
            *a += Op::from_fn(|r, col| c(i as f64 * 0.1 + r as f64, -(col as f64) / 3.0));
        }
        state.time = 1.25;
        let header = Checkpoint {
            version: CHECKPOINT_VERSION,
            system: SystemSpec::new(0.1, 0.2),
            decomposition,
            l_max: 2,
            convention: CouplingConvention::Standard,
            time: state.time,
            n_ados: state.ados.len(),
        };
        let mut bytes = Vec::new();
        write_checkpoint(&mut bytes, &header, &state).unwrap();
        let (h2, s2) = read_checkpoint(bytes.as_slice()).unwrap();
        assert_eq!(h2, header);
        assert_eq!(s2, state);
    }

    #[test]
    fn rejects_foreign_data() {
        let err = read_checkpoint(&b"NOTACKPT\x01\0\0\0"[..]).unwrap_err();
        assert!(matches!(err, HierarchyError::Checkpoint(_)));
    }
}
