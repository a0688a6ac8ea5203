//! Raw I/Q dumps: interleaved little-endian `f64` pairs plus a JSON sidecar.

use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use lora_dts_core::{BasebandSignal, Complex64};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IqSidecar {
    pub sample_rate_hz: f64,
    pub t0_s: f64,
    pub samples: usize,
    pub format: String,
}

pub const IQ_FORMAT: &str = "interleaved f64 little-endian I/Q";

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".json");
    PathBuf::from(p)
}

pub fn write_iq(path: &Path, signal: &BasebandSignal) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for s in &signal.samples {
        w.write_all(&s.re.to_le_bytes())?;
        w.write_all(&s.im.to_le_bytes())?;
    }
    w.flush()?;
    let meta = IqSidecar {
        sample_rate_hz: signal.sample_rate_hz,
        t0_s: signal.t0_s,
        samples: signal.samples.len(),
        format: IQ_FORMAT.into(),
    };
    fs::write(sidecar_path(path), serde_json::to_vec_pretty(&meta)?)
}

pub fn read_iq(path: &Path) -> std::io::Result<BasebandSignal> {
    let meta: IqSidecar = serde_json::from_slice(&fs::read(sidecar_path(path))?)?;
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() != meta.samples * 16 {
        return Err(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            format!("expected {} samples, file holds {} bytes", meta.samples, bytes.len()),
        ));
    }
    let samples = bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            Complex64::new(re, im)
        })
        .collect();
    Ok(BasebandSignal::new(samples, meta.sample_rate_hz, meta.t0_s))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("frame.iq");
        let sig = BasebandSignal::new(
            (0..100).map(|k| Complex64::new(k as f64, -0.5 * k as f64)).collect(),
            125e3,
            -366.0,
        );
        write_iq(&path, &sig).unwrap();
        assert_eq!(fs::metadata(&path).unwrap().len(), 1600);
        assert_eq!(read_iq(&path).unwrap(), sig);
        let meta: serde_json::Value = serde_json::from_slice(&fs::read(sidecar_path(&path)).unwrap()).unwrap();
        assert_eq!(meta["sample_rate_hz"], 125e3);
        assert_eq!(meta["t0_s"], -366.0);
    }
}
