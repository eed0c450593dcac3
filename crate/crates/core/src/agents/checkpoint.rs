//! Parameter checkpoints.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic        8 bytes  "SAILQF\0\0"
//! version      u32      1
//! repr tag     u32      0 tabular, 1 linear, 2 mlp
//! n_states     u64
//! n_actions    u64
//! hidden       u64
//! n_params     u64
//! params       n_params x f64
//! ```

use std::io::{Read, Write};
use std::path::Path;

use crate::agents::{QFunction, Representation};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"SAILQF\0\0";
const VERSION: u32 = 1;

pub fn write_checkpoint(qf: &QFunction, out: &mut impl Write) -> std::io::Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&qf.representation().tag().to_le_bytes())?;
    for dim in [qf.n_states(), qf.n_actions(), qf.hidden(), qf.params().len()] {
        out.write_all(&(dim as u64).to_le_bytes())?;
    }
    for p in qf.params() {
        out.write_all(&p.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_checkpoint(input: &mut impl Read) -> Result<QFunction> {
    let bad = |msg: &str| Error::Config(format!("invalid checkpoint: {msg}"));
    let io = |e: std::io::Error| Error::Config(format!("invalid checkpoint: {e}"));
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic).map_err(io)?;
    if &magic != MAGIC {
        return Err(bad("bad magic"));
    }
    let mut word = [0u8; 4];
    input.read_exact(&mut word).map_err(io)?;
    let version = u32::from_le_bytes(word);
    if version != VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    input.read_exact(&mut word).map_err(io)?;
    let repr = Representation::from_tag(u32::from_le_bytes(word)).ok_or_else(|| bad("unknown representation"))?;
    let mut dims = [0usize; 4];
    let mut long = [0u8; 8];
    for d in &mut dims {
        input.read_exact(&mut long).map_err(io)?;
        *d = usize::try_from(u64::from_le_bytes(long)).map_err(|_| bad("dimension overflow"))?;
    }
    let [n_states, n_actions, hidden, n_params] = dims;
    if n_params != QFunction::parameter_count(repr, n_states, n_actions, hidden) {
        return Err(bad("parameter count does not match the shapes"));
    }
    let mut params = Vec::with_capacity(n_params);
    for _ in 0..n_params {
        input.read_exact(&mut long).map_err(io)?;
        params.push(f64::from_le_bytes(long));
    }
    QFunction::from_params(repr, n_states, n_actions, hidden, params)
}

pub fn save(qf: &QFunction, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    write_checkpoint(qf, &mut out).and_then(|_| out.flush()).map_err(|e| Error::io(path, e))
}

pub fn load(path: impl AsRef<Path>) -> Result<QFunction> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(&mut std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn round_trip_all_representations() {
        for repr in Representation::ALL {
            let qf = QFunction::init(repr, 7, 3, 5, &mut rng::stream(2, "ckpt")).unwrap();
            let mut bytes = Vec::new();
            write_checkpoint(&qf, &mut bytes).unwrap();
            assert_eq!(bytes.len(), 8 + 4 + 4 + 32 + 8 * qf.params().len());
            assert_eq!(read_checkpoint(&mut bytes.as_slice()).unwrap(), qf);
        }
    }

    #[test]
    fn header_layout_is_little_endian() {
        let qf = QFunction::zeros(Representation::Linear, 2, 3, 0);
        let mut bytes = Vec::new();
        write_checkpoint(&qf, &mut bytes).unwrap();
        assert_eq!(&bytes[..8], MAGIC);
        assert_eq!(&bytes[8..12], &[1, 0, 0, 0]);
        assert_eq!(&bytes[12..16], &[1, 0, 0, 0]);
        assert_eq!(&bytes[16..24], &[2, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(&bytes[40..48], &[9, 0, 0, 0, 0, 0, 0, 0]);
    }

    #[test]
    fn corrupt_input_is_rejected() {
        let qf = QFunction::zeros(Representation::Tabular, 2, 2, 0);
        let mut bytes = Vec::new();
        write_checkpoint(&qf, &mut bytes).unwrap();
        assert!(read_checkpoint(&mut &bytes[..bytes.len() - 1]).is_err());
        let mut wrong = bytes.clone();
        wrong[0] = b'X';
        assert!(read_checkpoint(&mut wrong.as_slice()).is_err());
        let mut version = bytes;
        version[8] = 2;
        assert!(read_checkpoint(&mut version.as_slice()).is_err());
    }
}
