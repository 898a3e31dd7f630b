//! Binary checkpoints.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic      4 bytes  "KWNR"
//! version    u32      1
//! domain     u8       0 = torus, 1 = channel
//! dim        u32      lattice dimension
//! k_max      i64      lattice truncation
//! n_x1       u64      channel cells (0 on the torus)
//! n_velocity u64
//! step       u64
//! time       f64
//! count      u64      number of complex values, then count x (re f64, im f64)
//!                     ordered mode-major, then x_1 cell, then velocity node
//! n_aux      u64      auxiliary arrays, each u64 length then f64 values
//! ```

use std::io::{Read, Write};
use std::path::Path;

use crate::channel::ChannelState;
use crate::error::{KineticError, Result};
use crate::grid::C64;
use crate::lattice::{ModeLattice, SpectralField};

pub const MAGIC: &[u8; 4] = b"KWNR";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum CheckpointState {
    Torus(SpectralField),
    Channel(ChannelState),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub step: u64,
    pub time: f64,
    pub state: CheckpointState,
    /// Accumulator arrays needed to continue a run exactly.
    pub aux: Vec<Vec<f64>>,
}

fn bad(msg: impl Into<String>) -> KineticError {
    KineticError::Checkpoint(msg.into())
}

pub fn write_checkpoint(path: &Path, cp: &Checkpoint) -> Result<()> {
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    let (domain, lattice, n_x1, n_velocity) = match &cp.state {
        CheckpointState::Torus(f) => (0u8, f.lattice, 0u64, f.n_velocity),
        CheckpointState::Channel(c) => (1u8, c.lattice, c.n_x1 as u64, c.n_velocity),
    };
    buf.push(domain);
    buf.extend_from_slice(&(lattice.dim as u32).to_le_bytes());
    buf.extend_from_slice(&lattice.k_max.to_le_bytes());
    buf.extend_from_slice(&n_x1.to_le_bytes());
    buf.extend_from_slice(&(n_velocity as u64).to_le_bytes());
    buf.extend_from_slice(&cp.step.to_le_bytes());
    buf.extend_from_slice(&cp.time.to_le_bytes());
    let values: Vec<&C64> = match &cp.state {
        CheckpointState::Torus(f) => f.modes.iter().flatten().collect(),
        CheckpointState::Channel(c) => c.modes.iter().flatten().flatten().collect(),
    };
    buf.extend_from_slice(&(values.len() as u64).to_le_bytes());
    for z in values {
        buf.extend_from_slice(&z.re.to_le_bytes());
        buf.extend_from_slice(&z.im.to_le_bytes());
    }
    buf.extend_from_slice(&(cp.aux.len() as u64).to_le_bytes());
    for a in &cp.aux {
        buf.extend_from_slice(&(a.len() as u64).to_le_bytes());
        for x in a {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    let tmp = path.with_extension("tmp");
    std::fs::File::create(&tmp)?.write_all(&buf)?;
    std::fs::rename(tmp, path)?;
    Ok(())
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.pos + N;
        let s = self.data.get(self.pos..end).ok_or_else(|| bad("truncated file"))?;
        self.pos = end;
        Ok(s.try_into().expect("slice length"))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let mut data = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut data)?;
    let mut r = Reader { data: &data, pos: 0 };
    if &r.take::<4>()? != MAGIC {
        return Err(bad("bad magic; not a checkpoint"));
    }
    let version = u32::from_le_bytes(r.take()?);
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let domain = r.take::<1>()?[0];
    let dim = u32::from_le_bytes(r.take()?) as usize;
    let k_max = i64::from_le_bytes(r.take()?);
    let n_x1 = r.u64()? as usize;
    let n_velocity = r.u64()? as usize;
    let step = r.u64()?;
    let time = r.f64()?;
    let lattice = ModeLattice::new(dim, k_max).map_err(|e| bad(e.to_string()))?;
    let count = r.u64()? as usize;
    let cells = if domain == 1 { n_x1 } else { 1 };
    if count != lattice.len() * cells * n_velocity {
        return Err(bad(format!("value count {count} does not match the header")));
    }
    let mut values = Vec::with_capacity(count);
    for _ in 0..count {
        let re = r.f64()?;
        let im = r.f64()?;
        values.push(C64::new(re, im));
    }
    let n_aux = r.u64()? as usize;
    let mut aux = Vec::with_capacity(n_aux);
    for _ in 0..n_aux {
        let len = r.u64()? as usize;
        aux.push((0..len).map(|_| r.f64()).collect::<Result<Vec<f64>>>()?);
    }
    if r.pos != data.len() {
        return Err(bad("trailing bytes"));
    }
    let state = match domain {
        0 => CheckpointState::Torus(SpectralField {
            lattice,
            n_velocity,
            modes: values.chunks(n_velocity).map(|c| c.to_vec()).collect(),
        }),
        1 => CheckpointState::Channel(ChannelState {
            n_x1,
            lattice,
            n_velocity,
            time,
            modes: values.chunks(n_x1 * n_velocity).map(|m| m.chunks(n_velocity).map(|c| c.to_vec()).collect()).collect(),
        }),
        d => return Err(bad(format!("unknown domain tag {d}"))),
    };
    Ok(Checkpoint { step, time, state, aux })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{channel_init, ChannelPreset};
    use crate::grid::VelocityGrid;
    use crate::torus::{init_field, Preset};

    #[test]
    fn round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let grid = VelocityGrid::new(8, 4.0).unwrap();
        let f = init_field(Preset::RandomMicro, 0.1, ModeLattice::new(3, 1).unwrap(), &grid, 9).unwrap();
        let cp = Checkpoint { step: 17, time: 0.17, state: CheckpointState::Torus(f), aux: vec![vec![1.0, 2.5], vec![]] };
        let p = dir.path().join("a.bin");
        write_checkpoint(&p, &cp).unwrap();
        assert_eq!(read_checkpoint(&p).unwrap(), cp);
        let mut c = channel_init(ChannelPreset::SymmetricBump, 0.1, 4, 1, &grid).unwrap();
        c.time = 0.5;
        let cp = Checkpoint { step: 5, time: 0.5, state: CheckpointState::Channel(c), aux: vec![] };
        write_checkpoint(&p, &cp).unwrap();
        assert_eq!(read_checkpoint(&p).unwrap(), cp);
        std::fs::write(&p, b"nope").unwrap();
        assert!(read_checkpoint(&p).is_err());
    }
}
