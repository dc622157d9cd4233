//! Binary checkpoint container.
//!
//! Layout (all integers and reals little-endian):
//!
//! ```text
//! bytes 0..8    ASCII magic "DPCCKPT\0"
//! bytes 8..16   u64 header length H
//! next H bytes  UTF-8 JSON header:
//!               { "magic": "dpc-checkpoint", "version": 1,
//!                 "shapes":   [ { "name": str, "dims": [usize] } ],
//!                 "sections": [ { "name": str, "len": usize } ],
//!                 "metadata": any JSON }
//! then          for each section in header order, `len` f64 values
//! ```
//!
//! `shapes` is the manifest of parameter tensors in flattening order; the
//! first section, `params`, holds exactly their concatenation.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"DPCCKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;
const HEADER_MAGIC: &str = "dpc-checkpoint";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorShape {
    pub name: String,
    pub dims: Vec<usize>,
}

impl TensorShape {
    pub fn new(name: impl Into<String>, dims: Vec<usize>) -> Self {
        Self {
            name: name.into(),
            dims,
        }
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Section {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub shapes: Vec<TensorShape>,
    pub sections: Vec<Section>,
    pub metadata: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
struct Header {
    magic: String,
    version: u32,
    shapes: Vec<TensorShape>,
    sections: Vec<SectionHeader>,
    metadata: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
struct SectionHeader {
    name: String,
    len: usize,
}

impl Checkpoint {
    pub fn section(&self, name: &str) -> Option<&[f64]> {
        self.sections
            .iter()
            .find(|s| s.name == name)
            .map(|s| s.values.as_slice())
    }

    pub fn validate(&self) -> Result<()> {
        let expected: usize = self.shapes.iter().map(TensorShape::len).sum();
        match self.sections.first() {
            Some(s) if s.name == "params" && s.values.len() == expected => Ok(()),
            Some(s) if s.name == "params" => Err(Error::Checkpoint(format!(
                "shape manifest describes {expected} parameters but params holds {}",
                s.values.len()
            ))),
            _ => Err(Error::Checkpoint("first section must be `params`".into())),
        }
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        self.validate()?;
        let header = Header {
            magic: HEADER_MAGIC.into(),
            version: CHECKPOINT_VERSION,
            shapes: self.shapes.clone(),
            sections: self
                .sections
                .iter()
                .map(|s| SectionHeader {
                    name: s.name.clone(),
                    len: s.values.len(),
                })
                .collect(),
            metadata: self.metadata.clone(),
        };
        let json = serde_json::to_vec(&header)?;
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&(json.len() as u64).to_le_bytes())?;
        w.write_all(&json)?;
        for s in &self.sections {
            for v in &s.values {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint("bad magic bytes".into()));
        }
        let mut len = [0u8; 8];
        r.read_exact(&mut len)?;
        let len = u64::from_le_bytes(len) as usize;
        let mut json = vec![0u8; len];
        r.read_exact(&mut json)?;
        let header: Header = serde_json::from_slice(&json)?;
        if header.magic != HEADER_MAGIC {
            return Err(Error::Checkpoint(format!("unexpected magic {:?}", header.magic)));
        }
        if header.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported version {}",
                header.version
            )));
        }
        let mut sections = Vec::with_capacity(header.sections.len());
        let mut buf = [0u8; 8];
        for sh in header.sections {
            let mut values = Vec::with_capacity(sh.len);
            for _ in 0..sh.len {
                r.read_exact(&mut buf)?;
                values.push(f64::from_le_bytes(buf));
            }
            sections.push(Section {
                name: sh.name,
                values,
            });
        }
        let ckpt = Checkpoint {
            shapes: header.shapes,
            sections,
            metadata: header.metadata,
        };
        ckpt.validate()?;
        Ok(ckpt)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = File::create(path)?;
        self.write_to(BufWriter::new(file))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = File::open(path)?;
        Self::read_from(BufReader::new(file))
    }
}
