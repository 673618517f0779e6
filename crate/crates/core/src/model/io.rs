//! Binary model file.
//!
//! ```text
//! magic    "HARN"
//! version  u16 LE
//! n_hidden u16 LE
//! n_act    u16 LE
//! theta_in (117+1) × n_hidden f32 LE, row-major
//! theta    (n_hidden+1) × n_act f32 LE, row-major
//! scaler   117 × (mean f32 LE, std f32 LE)
//! ```

use std::fs;
use std::path::Path;

use super::{FeatureScaler, NetworkParams};
use crate::activity::N_ACTIVITIES;
use crate::error::{ModelFormatError, Result};
use crate::features::N_FEATURES;

pub const MAGIC: [u8; 4] = *b"HARN";
pub const VERSION: u16 = 1;
const HEADER_BYTES: usize = 10;

pub fn write_model(params: &NetworkParams) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_BYTES + params.weight_count() * 4 + N_FEATURES * 8);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(params.n_hidden() as u16).to_le_bytes());
    out.extend_from_slice(&(N_ACTIVITIES as u16).to_le_bytes());
    for &w in params.theta_in.iter().chain(&params.theta) {
        out.extend_from_slice(&(w as f32).to_le_bytes());
    }
    for (&m, &s) in params.scaler.mean.iter().zip(&params.scaler.std) {
        out.extend_from_slice(&(m as f32).to_le_bytes());
        out.extend_from_slice(&(s as f32).to_le_bytes());
    }
    out
}

pub fn read_model(bytes: &[u8]) -> Result<NetworkParams> {
    if bytes.len() < HEADER_BYTES {
        return Err(ModelFormatError::Truncated {
            need: HEADER_BYTES,
            have: bytes.len(),
        }
        .into());
    }
    let magic: [u8; 4] = bytes[..4].try_into().expect("4 bytes");
    if magic != MAGIC {
        return Err(ModelFormatError::BadMagic(magic).into());
    }
    let u16_at = |o: usize| u16::from_le_bytes([bytes[o], bytes[o + 1]]);
    let version = u16_at(4);
    if version != VERSION {
        return Err(ModelFormatError::Version(version).into());
    }
    let n_hidden = u16_at(6) as usize;
    let n_act = u16_at(8) as usize;
    if n_act != N_ACTIVITIES {
        return Err(ModelFormatError::Header(format!("expected {N_ACTIVITIES} activities, found {n_act}")).into());
    }
    if n_hidden == 0 {
        return Err(ModelFormatError::Header("zero hidden units".into()).into());
    }

    let n_in = (N_FEATURES + 1) * n_hidden;
    let n_out = (n_hidden + 1) * N_ACTIVITIES;
    let need = HEADER_BYTES + (n_in + n_out) * 4 + N_FEATURES * 8;
    if bytes.len() < need {
        return Err(ModelFormatError::Truncated {
            need,
            have: bytes.len(),
        }
        .into());
    }
    if bytes.len() > need {
        return Err(ModelFormatError::Trailing(bytes.len() - need).into());
    }

    let mut floats = bytes[HEADER_BYTES..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64);
    let theta_in: Vec<f64> = floats.by_ref().take(n_in).collect();
    let theta: Vec<f64> = floats.by_ref().take(n_out).collect();
    let mut mean = Vec::with_capacity(N_FEATURES);
    let mut std = Vec::with_capacity(N_FEATURES);
    for _ in 0..N_FEATURES {
        mean.push(floats.next().expect("length checked"));
        std.push(floats.next().expect("length checked"));
    }
    NetworkParams::from_parts(n_hidden, theta_in, theta, FeatureScaler { mean, std })
}

pub fn save_model(params: &NetworkParams, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, write_model(params))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<NetworkParams> {
    read_model(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    fn sample_params() -> NetworkParams {
        let mut p = NetworkParams::init(4, 42).unwrap();
        for (i, (m, s)) in p.scaler.mean.iter_mut().zip(p.scaler.std.iter_mut()).enumerate() {
            *m = i as f64 * 0.1;
            *s = 1.0 + i as f64 * 0.01;
        }
        p
    }

    #[test]
    fn file_size_follows_layout() {
        let bytes = write_model(&sample_params());
        assert_eq!(bytes.len(), 10 + 507 * 4 + 117 * 8);
        assert_eq!(&bytes[..4], b"HARN");
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.harn");
        let params = sample_params();
        save_model(&params, &path).unwrap();
        let first = fs::read(&path).unwrap();
        let loaded = load_model(&path).unwrap();
        save_model(&loaded, &path).unwrap();
        assert_eq!(fs::read(&path).unwrap(), first);
        for (a, b) in params.theta.iter().zip(&loaded.theta) {
            assert!((a - b).abs() <= 1e-6 * a.abs().max(1e-3));
        }
    }

    #[test]
    fn corrupt_files_give_typed_errors() {
        let good = write_model(&sample_params());
        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(
            read_model(&bad),
            Err(Error::ModelFormat(ModelFormatError::BadMagic(_)))
        ));
        assert!(matches!(
            read_model(&good[..good.len() - 3]),
            Err(Error::ModelFormat(ModelFormatError::Truncated { .. }))
        ));
        assert!(matches!(
            read_model(&good[..6]),
            Err(Error::ModelFormat(ModelFormatError::Truncated { .. }))
        ));
        let mut bad = good.clone();
        bad[8] = 6;
        assert!(matches!(
            read_model(&bad),
            Err(Error::ModelFormat(ModelFormatError::Header(_)))
        ));
        let mut bad = good.clone();
        bad[4] = 9;
        assert!(matches!(
            read_model(&bad),
            Err(Error::ModelFormat(ModelFormatError::Version(9)))
        ));
        let mut long = good;
        long.push(0);
        assert!(matches!(
            read_model(&long),
            Err(Error::ModelFormat(ModelFormatError::Trailing(1)))
        ));
    }
}
