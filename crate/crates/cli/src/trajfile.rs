//! Binary trajectory files.
//!
//! Layout, all little-endian:
//!
//! | offset | size | field                                   |
//! |--------|------|-----------------------------------------|
//! | 0      | 4    | magic `MSDE`                            |
//! | 4      | 4    | version `u32` = 1                       |
//! | 8      | 4    | ambient dimension `p` (`u32`)           |
//! | 12     | 8    | number of points `N` (`u64`)            |
//! | 20     | 8    | `delta` (`f64`)                         |
//! | 28     | 8    | seed (`u64`)                            |
//! | 36     | 4    | manifold id (`u32`)                     |
//! | 40     | 40   | manifold parameter block, 5 × `f64`     |
//! | 80     | 8·N·p| points, point-major `f64`               |
//!
//! Manifold ids: 1 ellipsoid with parameters `(a, b, c, scale, scheme)`;
//! 2 standard Klein bottle and 3 sine-radial Klein bottle with parameters
//! `(a, r, 0, 0, scheme)`. The scheme code is 0 external, 1 plane Euler,
//! 2 sphere retraction with χ radius, 3 sphere retraction with χ² radius.

use std::path::Path;

use msde_core::{KleinEmbedding, ManifoldSpec, RadiusLaw, Scheme, Trajectory};
use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"MSDE";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 80;

#[derive(Debug, Error)]
pub enum TrajFileError {
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated file: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("file length mismatch: expected {expected} bytes, found {found}")]
    TrailingBytes { expected: usize, found: usize },
    #[error("invalid header: {0}")]
    InvalidHeader(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

fn scheme_code(s: Scheme) -> f64 {
    match s {
        Scheme::External => 0.0,
        Scheme::PlaneEuler => 1.0,
        Scheme::SphereRetraction {
            radius_law: RadiusLaw::Chi,
        } => 2.0,
        Scheme::SphereRetraction {
            radius_law: RadiusLaw::Chi2,
        } => 3.0,
    }
}

fn scheme_from_code(c: f64) -> Result<Scheme, TrajFileError> {
    Ok(match c {
        x if x == 0.0 => Scheme::External,
        x if x == 1.0 => Scheme::PlaneEuler,
        x if x == 2.0 => Scheme::SphereRetraction {
            radius_law: RadiusLaw::Chi,
        },
        x if x == 3.0 => Scheme::SphereRetraction {
            radius_law: RadiusLaw::Chi2,
        },
        other => return Err(TrajFileError::InvalidHeader(format!("unknown scheme code {other}"))),
    })
}

fn manifold_block(m: &ManifoldSpec, scheme: Scheme) -> (u32, [f64; 5]) {
    let code = scheme_code(scheme);
    match *m {
        ManifoldSpec::Ellipsoid { a, b, c, scale } => (1, [a, b, c, scale, code]),
        ManifoldSpec::KleinBottle { a, r, embedding } => {
            let id = match embedding {
                KleinEmbedding::Standard => 2,
                KleinEmbedding::SineRadial => 3,
            };
            (id, [a, r, 0.0, 0.0, code])
        }
    }
}

fn manifold_from_block(id: u32, p: [f64; 5]) -> Result<(ManifoldSpec, Scheme), TrajFileError> {
    let m = match id {
        1 => ManifoldSpec::Ellipsoid {
            a: p[0],
            b: p[1],
            c: p[2],
            scale: p[3],
        },
        2 | 3 => ManifoldSpec::KleinBottle {
            a: p[0],
            r: p[1],
            embedding: if id == 2 {
                KleinEmbedding::Standard
            } else {
                KleinEmbedding::SineRadial
            },
        },
        other => return Err(TrajFileError::InvalidHeader(format!("unknown manifold id {other}"))),
    };
    m.validate().map_err(|e| TrajFileError::InvalidHeader(e.to_string()))?;
    Ok((m, scheme_from_code(p[4])?))
}

/// Serializes a trajectory into the file layout.
pub fn encode(t: &Trajectory) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * t.as_slice().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(t.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(t.len() as u64).to_le_bytes());
    out.extend_from_slice(&t.delta().to_le_bytes());
    out.extend_from_slice(&t.seed().to_le_bytes());
    let (id, params) = manifold_block(t.manifold(), t.scheme());
    out.extend_from_slice(&id.to_le_bytes());
    for v in params {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in t.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().unwrap())
}

fn u64_at(b: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(b[at..at + 8].try_into().unwrap())
}

fn f64_at(b: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(b[at..at + 8].try_into().unwrap())
}

/// Parses and validates the file layout.
pub fn decode(bytes: &[u8]) -> Result<Trajectory, TrajFileError> {
    let found = bytes.len();
    if found < MAGIC.len() {
        return Err(TrajFileError::Truncated {
            expected: HEADER_LEN,
            found,
        });
    }
    if &bytes[..4] != MAGIC {
        return Err(TrajFileError::BadMagic);
    }
    if found < HEADER_LEN {
        return Err(TrajFileError::Truncated {
            expected: HEADER_LEN,
            found,
        });
    }
    let version = u32_at(bytes, 4);
    if version != VERSION {
        return Err(TrajFileError::UnsupportedVersion(version));
    }
    let p = u32_at(bytes, 8) as usize;
    let n = u64_at(bytes, 12);
    let delta = f64_at(bytes, 20);
    let seed = u64_at(bytes, 28);
    let id = u32_at(bytes, 36);
    let mut params = [0.0; 5];
    for (i, slot) in params.iter_mut().enumerate() {
        *slot = f64_at(bytes, 40 + 8 * i);
    }
    let expected = usize::try_from(n)
        .ok()
        .and_then(|n| n.checked_mul(p))
        .and_then(|v| v.checked_mul(8))
        .and_then(|v| v.checked_add(HEADER_LEN))
        .ok_or_else(|| TrajFileError::InvalidHeader(format!("{n} points of dimension {p} overflow")))?;
    if found < expected {
        return Err(TrajFileError::Truncated { expected, found });
    }
    if found > expected {
        return Err(TrajFileError::TrailingBytes { expected, found });
    }
    let (manifold, scheme) = manifold_from_block(id, params)?;
    let points = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Trajectory::new(points, p, delta, manifold, seed, scheme).map_err(|e| TrajFileError::InvalidHeader(e.to_string()))
}

pub fn write_trajectory(t: &Trajectory, path: &Path) -> Result<(), TrajFileError> {
    std::fs::write(path, encode(t))?;
    Ok(())
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory, TrajFileError> {
    decode(&std::fs::read(path)?)
}
