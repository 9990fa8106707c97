//! Binary map container.
//!
//! Layout: the magic line `WTMAP1\n`, one line of JSON ([`MapHeader`])
//! terminated by `\n`, then `n_freq * n_time` little-endian f64 values in
//! row-major order with one row per drive frequency.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::IoError;
use crate::model::SystemSpec;
use crate::protocol::{MapGrid, OmegaTMap, PulseBCalibration};

pub const MAP_MAGIC: &[u8] = b"WTMAP1\n";
pub const MAP_FORMAT_VERSION: u32 = 1;

/// How a dataset map was drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorInfo {
    pub prng: String,
    pub seed: u64,
    pub index: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapHeader {
    pub format_version: u32,
    pub n_freq: usize,
    pub n_time: usize,
    /// Row axis (Hz).
    pub frequencies: Vec<f64>,
    /// Column axis (s).
    pub durations: Vec<f64>,
    pub dt: f64,
    pub spec: SystemSpec,
    pub calibration: PulseBCalibration,
    pub pump_amplitude: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorInfo>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapFile {
    pub map: OmegaTMap,
    pub generator: Option<GeneratorInfo>,
}

impl MapFile {
    pub fn new(map: OmegaTMap) -> Self {
        Self { map, generator: None }
    }

    pub fn header(&self) -> MapHeader {
        let m = &self.map;
        MapHeader {
            format_version: MAP_FORMAT_VERSION,
            n_freq: m.grid.n_freq(),
            n_time: m.grid.n_time(),
            frequencies: m.grid.frequencies.clone(),
            durations: m.grid.durations.clone(),
            dt: m.grid.dt,
            spec: m.spec.clone(),
            calibration: m.calibration,
            pump_amplitude: m.pump_amplitude,
            generator: self.generator.clone(),
        }
    }

    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(MAP_MAGIC)?;
        serde_json::to_writer(&mut *w, &self.header())?;
        w.write_all(b"\n")?;
        for v in self.map.values.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Parses a container; `origin` labels error messages.
    pub fn read_from(r: &mut impl BufRead, origin: &Path) -> Result<Self, IoError> {
        let format = |reason: String| IoError::Format {
            path: origin.to_path_buf(),
            reason,
        };
        let io = |e: std::io::Error| IoError::file(origin, e);

        let mut magic = [0u8; 7];
        r.read_exact(&mut magic)
            .map_err(|_| format("shorter than the magic line".into()))?;
        if magic != MAP_MAGIC {
            return Err(format("bad magic".into()));
        }
        let mut line = Vec::new();
        r.read_until(b'\n', &mut line).map_err(io)?;
        if line.pop() != Some(b'\n') {
            return Err(format("unterminated header".into()));
        }
        let header: MapHeader =
            serde_json::from_slice(&line).map_err(|e| format(format!("invalid header: {e}")))?;
        if header.format_version != MAP_FORMAT_VERSION {
            return Err(format(format!("unsupported format version {}", header.format_version)));
        }
        if header.frequencies.len() != header.n_freq || header.durations.len() != header.n_time {
            return Err(format("axis lengths disagree with the declared dimensions".into()));
        }
        let cells = header
            .n_freq
            .checked_mul(header.n_time)
            .ok_or_else(|| format("dimensions overflow".into()))?;

        let mut payload = Vec::new();
        r.read_to_end(&mut payload).map_err(io)?;
        if payload.len() != 8 * cells {
            return Err(format(format!(
                "payload has {} bytes, expected {} for {}×{}",
                payload.len(),
                8 * cells,
                header.n_freq,
                header.n_time
            )));
        }
        let data = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        let values = Array2::from_shape_vec((header.n_freq, header.n_time), data).expect("length checked above");
        let grid = MapGrid::new(header.frequencies, header.durations, header.dt)
            .map_err(|e| format(format!("invalid axes: {e}")))?;
        Ok(Self {
            map: OmegaTMap {
                values,
                grid,
                spec: header.spec,
                calibration: header.calibration,
                pump_amplitude: header.pump_amplitude,
            },
            generator: header.generator,
        })
    }
}

pub fn write_map(path: &Path, file: &MapFile) -> Result<(), IoError> {
    let io = |e| IoError::file(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    file.write_to(&mut w).map_err(io)?;
    w.flush().map_err(io)
}

pub fn read_map(path: &Path) -> Result<MapFile, IoError> {
    let f = File::open(path).map_err(|e| IoError::file(path, e))?;
    MapFile::read_from(&mut BufReader::new(f), path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{TlsParams, TransmonParams};
    use proptest::prelude::*;

    fn sample(values: Vec<f64>, n_freq: usize, n_time: usize) -> MapFile {
        let spec = SystemSpec::new(
            TransmonParams::new(7e9, 180e6).with_times(10e-6, 1e-6),
            vec![TlsParams::new(7.08e9, 30e6)],
        );
        MapFile::new(OmegaTMap {
            values: Array2::from_shape_vec((n_freq, n_time), values).unwrap(),
            grid: MapGrid::uniform(6.8e9, 2e6, n_freq, 10e-9, n_time, false).unwrap(),
            spec,
            calibration: PulseBCalibration {
                frequency: 6.990041e9,
                duration: 100e-9,
                amplitude: 5e6,
                population: 0.89,
            },
            pump_amplitude: 1.0 / 60e-9,
        })
    }

    fn bytes(f: &MapFile) -> Vec<u8> {
        let mut out = Vec::new();
        f.write_to(&mut out).unwrap();
        out
    }

    fn parse(b: &[u8]) -> Result<MapFile, IoError> {
        MapFile::read_from(&mut &b[..], Path::new("mem"))
    }

    proptest! {
        #[test]
        fn roundtrip_is_bitwise(
            n_freq in 1usize..6,
            n_time in 1usize..6,
            seed in proptest::collection::vec(any::<u64>(), 36),
        ) {
            let values: Vec<f64> = seed.iter().take(n_freq * n_time).map(|&b| f64::from_bits(b)).collect();
            let f = sample(values.clone(), n_freq, n_time);
            let back = parse(&bytes(&f)).unwrap();
            let got: Vec<u64> = back.map.values.iter().map(|v| v.to_bits()).collect();
            let want: Vec<u64> = values.iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(got, want);
            prop_assert_eq!(&back.map.grid, &f.map.grid);
            prop_assert_eq!(&back.map.spec, &f.map.spec);
            prop_assert_eq!(back.map.calibration, f.map.calibration);
            prop_assert_eq!(back.map.pump_amplitude.to_bits(), f.map.pump_amplitude.to_bits());
        }
    }

    #[test]
    fn layout_is_magic_header_payload() {
        let f = sample((0..6).map(f64::from).collect(), 2, 3);
        let b = bytes(&f);
        assert!(b.starts_with(b"WTMAP1\n"));
        let header_end = 7 + b[7..].iter().position(|&c| c == b'\n').unwrap() + 1;
        let header: serde_json::Value = serde_json::from_slice(&b[7..header_end - 1]).unwrap();
        assert_eq!(header["n_freq"], 2);
        assert_eq!(header["n_time"], 3);
        assert_eq!(header["format_version"], 1);
        let payload = &b[header_end..];
        assert_eq!(payload.len(), 48);
        // second row, first column
        assert_eq!(f64::from_le_bytes(payload[24..32].try_into().unwrap()), 3.0);
    }

    #[test]
    fn payload_length_mismatch_is_rejected() {
        let b = bytes(&sample(vec![0.5; 6], 2, 3));
        for cut in [b.len() - 1, b.len() - 8] {
            assert!(matches!(parse(&b[..cut]), Err(IoError::Format { .. })));
        }
        let mut extra = b.clone();
        extra.extend_from_slice(&[0; 8]);
        assert!(matches!(parse(&extra), Err(IoError::Format { .. })));
    }

    #[test]
    fn wrong_magic_and_garbled_header_are_rejected() {
        let mut b = bytes(&sample(vec![0.5; 4], 2, 2));
        b[0] = b'X';
        assert!(matches!(parse(&b), Err(IoError::Format { .. })));
        assert!(matches!(parse(b"WTMAP1\n{not json}\n"), Err(IoError::Format { .. })));
        assert!(matches!(parse(b"WTM"), Err(IoError::Format { .. })));
    }

    #[test]
    fn writes_and_reads_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.wtmap");
        let mut f = sample(vec![0.25; 4], 2, 2);
        f.generator = Some(GeneratorInfo {
            prng: "test".into(),
            seed: 3,
            index: 1,
        });
        write_map(&path, &f).unwrap();
        assert_eq!(read_map(&path).unwrap(), f);
        let missing = read_map(&dir.path().join("none")).unwrap_err();
        assert_eq!(missing.exit_code(), 2);
    }
}
