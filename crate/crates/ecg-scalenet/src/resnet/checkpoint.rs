//! Model checkpoint format.
//!
//! Layout: magic `ECGSCNET`, u32 version, u64 JSON length, the
//! [`NetworkSpec`] as JSON, then the raw little-endian f64 arrays of every
//! learnable tensor followed by every BN running-stat buffer, both in
//! canonical visitation order.

use crate::error::{Error, Result};
use crate::resnet::model::ResNet1d;
use crate::resnet::NetworkSpec;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &[u8; 8] = b"ECGSCNET";
const VERSION: u32 = 1;

pub fn save_checkpoint(model: &ResNet1d, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    let spec_json = serde_json::to_vec(model.spec())?;
    w.write_all(&(spec_json.len() as u64).to_le_bytes())?;
    w.write_all(&spec_json)?;

    let mut io_err: Option<std::io::Error> = None;
    model.visit_params(&mut |_, _, t| {
        if io_err.is_none() {
            for v in t.data() {
                if let Err(e) = w.write_all(&v.to_le_bytes()) {
                    io_err = Some(e);
                    break;
                }
            }
        }
    });
    model.visit_buffers(&mut |_, t| {
        if io_err.is_none() {
            for v in t.data() {
                if let Err(e) = w.write_all(&v.to_le_bytes()) {
                    io_err = Some(e);
                    break;
                }
            }
        }
    });
    if let Some(e) = io_err {
        return Err(e.into());
    }
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<ResNet1d> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|_| Error::Parse("checkpoint truncated at magic".into()))?;
    if &magic != MAGIC {
        return Err(Error::Parse("not a checkpoint file (bad magic)".into()));
    }
    let mut buf4 = [0u8; 4];
    r.read_exact(&mut buf4).map_err(|_| Error::Parse("checkpoint truncated at version".into()))?;
    let version = u32::from_le_bytes(buf4);
    if version != VERSION {
        return Err(Error::Parse(format!("unsupported checkpoint version {version}")));
    }
    let mut buf8 = [0u8; 8];
    r.read_exact(&mut buf8).map_err(|_| Error::Parse("checkpoint truncated at header".into()))?;
    let json_len = u64::from_le_bytes(buf8) as usize;
    let mut json = vec![0u8; json_len];
    r.read_exact(&mut json).map_err(|_| Error::Parse("checkpoint truncated in spec".into()))?;
    let spec: NetworkSpec = serde_json::from_slice(&json)?;

    let mut model = ResNet1d::from_spec(spec, 0)?;
    let mut read_err: Option<Error> = None;
    model.visit_params_mut(&mut |name, _, t| {
        if read_err.is_some() {
            return;
        }
        for v in t.data_mut() {
            let mut b = [0u8; 8];
            if r.read_exact(&mut b).is_err() {
                read_err = Some(Error::Parse(format!("checkpoint truncated in tensor {name}")));
                return;
            }
            *v = f64::from_le_bytes(b);
        }
    });
    model.visit_buffers_mut(&mut |name, t| {
        if read_err.is_some() {
            return;
        }
        for v in t.data_mut() {
            let mut b = [0u8; 8];
            if r.read_exact(&mut b).is_err() {
                read_err = Some(Error::Parse(format!("checkpoint truncated in buffer {name}")));
                return;
            }
            *v = f64::from_le_bytes(b);
        }
    });
    if let Some(e) = read_err {
        return Err(e);
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::Parse("checkpoint has trailing bytes".into()));
    }
    Ok(model)
}
