//! Raw I/Q sample sidecar: 16-bit signed integers as produced by a
//! converter of the recorded bit width.
//!
//! | offset | size | field |
//! |---|---|---|
//! | 0 | 4 | magic `MMWR` |
//! | 4 | 2 | version (1) |
//! | 6 | 2 | converter bits |
//! | 8 | 4 | sample count `S` |
//! | 12 | 4S | S × (I i16, Q i16) |
//! | 12+4S | 4 | CRC-32 of every preceding byte |

use std::path::Path;

use super::{write_atomic, FormatError, Region, VERSION};
use crate::Result;

pub const RAW_MAGIC: [u8; 4] = *b"MMWR";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawSamples {
    pub bits: u16,
    pub samples: Vec<[i16; 2]>,
}

impl RawSamples {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 4 * self.samples.len());
        out.extend_from_slice(&RAW_MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.bits.to_le_bytes());
        out.extend_from_slice(&(self.samples.len() as u32).to_le_bytes());
        for [i, q] in &self.samples {
            out.extend_from_slice(&i.to_le_bytes());
            out.extend_from_slice(&q.to_le_bytes());
        }
        let c = crc32fast::hash(&out);
        out.extend_from_slice(&c.to_le_bytes());
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let short = |needed: usize| FormatError::Truncated {
            offset: bytes.len() as u64,
            needed: (needed - bytes.len()) as u64,
        };
        if bytes.len() < 4 || bytes[..4] != RAW_MAGIC {
            let mut found = [0; 4];
            found[..bytes.len().min(4)].copy_from_slice(&bytes[..bytes.len().min(4)]);
            return Err(FormatError::BadMagic { found }.into());
        }
        if bytes.len() < 16 {
            return Err(short(16).into());
        }
        let count = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
        let total = 16 + 4 * count;
        if bytes.len() < total {
            return Err(short(total).into());
        }
        if bytes.len() > total {
            return Err(FormatError::TrailingBytes {
                offset: total as u64,
                count: (bytes.len() - total) as u64,
            }
            .into());
        }
        let stored = u32::from_le_bytes(bytes[total - 4..].try_into().expect("4 bytes"));
        let computed = crc32fast::hash(&bytes[..total - 4]);
        if stored != computed {
            return Err(FormatError::Crc {
                region: Region::File,
                offset: 0,
                stored,
                computed,
            }
            .into());
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != VERSION {
            return Err(FormatError::UnsupportedVersion {
                found: version,
                supported: VERSION,
            }
            .into());
        }
        let s16 = |o: usize| i16::from_le_bytes([bytes[o], bytes[o + 1]]);
        Ok(Self {
            bits: u16::from_le_bytes([bytes[6], bytes[7]]),
            samples: (0..count)
                .map(|k| [s16(12 + 4 * k), s16(14 + 4 * k)])
                .collect(),
        })
    }
}

pub fn write_raw_samples(raw: &RawSamples, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path, &raw.encode())
}

pub fn read_raw_samples(path: impl AsRef<Path>) -> Result<RawSamples> {
    RawSamples::decode(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sidecar_round_trip_and_corruption() {
        let raw = RawSamples {
            bits: 10,
            samples: vec![[511, -512], [0, 3], [-1, 1]],
        };
        let bytes = raw.encode();
        assert_eq!(bytes.len(), 16 + 12);
        assert_eq!(RawSamples::decode(&bytes).unwrap(), raw);
        for i in 0..bytes.len() {
            let mut b = bytes.clone();
            b[i] ^= 0x20;
            assert!(RawSamples::decode(&b).is_err(), "byte {i}");
        }
        assert!(RawSamples::decode(&bytes[..20]).is_err());
    }
}
