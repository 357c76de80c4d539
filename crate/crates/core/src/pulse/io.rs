//! Binary photocurrent records and truth sidecars.
//!
//! Layout (little-endian): `b"PTRN"`, version `u32`, config JSON length `u32`,
//! config JSON bytes, then `duration_pulses × samples_per_pulse` `f64` samples.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use super::config::PulseTrainConfig;
use super::synth::{PulseTrainRecord, PulseTruth};
use crate::error::{Error, Result};

pub const RECORD_MAGIC: &[u8; 4] = b"PTRN";
pub const RECORD_VERSION: u32 = 1;

const MAX_HEADER_BYTES: u32 = 1 << 20;

fn format_err(e: impl std::fmt::Display) -> Error {
    Error::Format(e.to_string())
}

pub fn write_record_to<W: Write>(mut w: W, record: &PulseTrainRecord) -> Result<()> {
    let expected = record.config.n_samples();
    if record.samples.len() != expected {
        return Err(Error::InvalidParameter(format!(
            "record holds {} samples, config implies {expected}",
            record.samples.len()
        )));
    }
    let header = serde_json::to_vec(&record.config).map_err(format_err)?;
    let io = |e: std::io::Error| Error::Format(e.to_string());
    w.write_all(RECORD_MAGIC).map_err(io)?;
    w.write_u32::<LittleEndian>(RECORD_VERSION).map_err(io)?;
    w.write_u32::<LittleEndian>(header.len() as u32)
        .map_err(io)?;
    w.write_all(&header).map_err(io)?;
    for &s in &record.samples {
        w.write_f64::<LittleEndian>(s).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Reads the samples back; the truth is not part of the binary file and is
/// left empty.
pub fn read_record_from<R: Read>(mut r: R) -> Result<PulseTrainRecord> {
    let io = |e: std::io::Error| Error::Format(format!("truncated record: {e}"));
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != RECORD_MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }
    let version = r.read_u32::<LittleEndian>().map_err(io)?;
    if version != RECORD_VERSION {
        return Err(Error::Format(format!(
            "unsupported record version {version}"
        )));
    }
    let len = r.read_u32::<LittleEndian>().map_err(io)?;
    if len > MAX_HEADER_BYTES {
        return Err(Error::Format(format!(
            "header of {len} bytes is implausible"
        )));
    }
    let mut header = vec![0u8; len as usize];
    r.read_exact(&mut header).map_err(io)?;
    let config: PulseTrainConfig = serde_json::from_slice(&header).map_err(format_err)?;
    config.validate()?;
    let n = config.n_samples();
    let mut samples = vec![0.0; n];
    r.read_f64_into::<LittleEndian>(&mut samples).map_err(io)?;
    let mut rest = [0u8; 1];
    if r.read(&mut rest).map_err(io)? != 0 {
        return Err(Error::Format("trailing bytes after the last sample".into()));
    }
    Ok(PulseTrainRecord {
        config,
        samples,
        truth: Vec::new(),
    })
}

pub fn write_record(path: &Path, record: &PulseTrainRecord) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_record_to(BufWriter::new(f), record)
}

pub fn read_record(path: &Path) -> Result<PulseTrainRecord> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_record_from(BufReader::new(f))
}

#[derive(Debug, Serialize, Deserialize)]
struct TruthRow {
    pulse_index: usize,
    theta: f64,
    x_m: f64,
}

pub fn write_truth_csv<W: Write>(w: W, truth: &[PulseTruth]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for (i, t) in truth.iter().enumerate() {
        wtr.serialize(TruthRow {
            pulse_index: i,
            theta: t.theta,
            x_m: t.x,
        })
        .map_err(format_err)?;
    }
    wtr.flush().map_err(|e| Error::Format(e.to_string()))
}

pub fn read_truth_csv<R: Read>(r: R) -> Result<Vec<PulseTruth>> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for (k, row) in rdr.deserialize::<TruthRow>().enumerate() {
        let row = row.map_err(format_err)?;
        if row.pulse_index != k {
            return Err(Error::Format(format!(
                "truth row {k} has pulse_index {}",
                row.pulse_index
            )));
        }
        out.push(PulseTruth {
            theta: row.theta,
            x: row.x_m,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulse::synth::{squeezed_variance, synthesize_train};

    fn record() -> PulseTrainRecord {
        let cfg = PulseTrainConfig {
            duration_pulses: 300,
            vacuum_pulses: 100,
            samples_per_pulse: 8,
            ..Default::default()
        };
        synthesize_train(squeezed_variance(-1.0, 1.5), &cfg).unwrap()
    }

    #[test]
    fn binary_round_trip() {
        let r = record();
        let mut buf = Vec::new();
        write_record_to(&mut buf, &r).unwrap();
        assert_eq!(&buf[..4], b"PTRN");
        let back = read_record_from(buf.as_slice()).unwrap();
        assert_eq!(back.config, r.config);
        assert_eq!(back.samples, r.samples);
    }

    #[test]
    fn rejects_corruption() {
        let r = record();
        let mut buf = Vec::new();
        write_record_to(&mut buf, &r).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(
            read_record_from(bad.as_slice()),
            Err(Error::Format(_))
        ));
        assert!(read_record_from(&buf[..buf.len() - 3]).is_err());
        let mut long = buf.clone();
        long.push(0);
        assert!(read_record_from(long.as_slice()).is_err());
    }

    #[test]
    fn truth_round_trip() {
        let r = record();
        let mut buf = Vec::new();
        write_truth_csv(&mut buf, &r.truth).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("pulse_index,theta,x_m\n"));
        assert_eq!(read_truth_csv(buf.as_slice()).unwrap(), r.truth);
    }
}
