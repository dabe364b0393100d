//! Native on-disk scan format (bit-exact, little-endian):
//!
//! 64-byte header: magic "FS2DSCAN" (8 bytes), format version u16,
//! azimuth_count u16, range_bin_count u32, range_resolution f64 (meters),
//! timestamp f64 (seconds), 32 bytes reserved (zero). Then azimuth_count f64
//! azimuth angles, then row-major f32 intensities.

use crate::error::{Error, Result};
use crate::grid::PolarScan;
use crate::scalar::Scalar;
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

pub const FORMAT_MAGIC: &[u8; 8] = b"FS2DSCAN";
pub const FORMAT_VERSION: u16 = 1;

const HEADER_LEN: u64 = 64;

pub fn save_polar_scan<T: Scalar>(scan: &PolarScan<T>, path: &Path) -> Result<()> {
    scan.validate()?;
    if scan.azimuth_count > u16::MAX as usize {
        return Err(Error::InvalidInput("azimuth_count exceeds u16".into()));
    }
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    w.write_all(FORMAT_MAGIC)?;
    w.write_u16::<LittleEndian>(FORMAT_VERSION)?;
    w.write_u16::<LittleEndian>(scan.azimuth_count as u16)?;
    w.write_u32::<LittleEndian>(scan.range_bin_count as u32)?;
    w.write_f64::<LittleEndian>(scan.range_resolution.as_f64())?;
    w.write_f64::<LittleEndian>(scan.timestamp)?;
    w.write_all(&[0u8; 32])?;
    for a in &scan.azimuth_angles {
        w.write_f64::<LittleEndian>(a.as_f64())?;
    }
    for v in &scan.intensities {
        w.write_f32::<LittleEndian>(v.as_f64() as f32)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_polar_scan<T: Scalar>(path: &Path) -> Result<PolarScan<T>> {
    let file = File::open(path)?;
    let total = file.metadata()?.len();
    let mut r = BufReader::new(file);

    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|_| Error::Parse {
        offset: 0,
        message: "file shorter than the 8-byte magic".into(),
    })?;
    if &magic != FORMAT_MAGIC {
        return Err(Error::Parse {
            offset: 0,
            message: format!("bad magic {:?}, expected \"FS2DSCAN\"", magic),
        });
    }
    let version = r.read_u16::<LittleEndian>()?;
    if version != FORMAT_VERSION {
        return Err(Error::Parse {
            offset: 8,
            message: format!("unsupported format version {version}"),
        });
    }
    let azimuth_count = r.read_u16::<LittleEndian>()? as usize;
    let range_bin_count = r.read_u32::<LittleEndian>()? as usize;
    let range_resolution = r.read_f64::<LittleEndian>()?;
    let timestamp = r.read_f64::<LittleEndian>()?;
    let mut reserved = [0u8; 32];
    r.read_exact(&mut reserved).map_err(|_| Error::Parse {
        offset: 32,
        message: "truncated header".into(),
    })?;

    if azimuth_count == 0 || range_bin_count == 0 {
        return Err(Error::Parse {
            offset: 10,
            message: format!("empty dimensions {azimuth_count}x{range_bin_count}"),
        });
    }
    let expected = HEADER_LEN + 8 * azimuth_count as u64
        + 4 * (azimuth_count * range_bin_count) as u64;
    if total != expected {
        return Err(Error::Parse {
            offset: total.min(expected),
            message: format!("expected {expected} bytes for {azimuth_count}x{range_bin_count}, file has {total}"),
        });
    }

    let mut azimuth_angles = Vec::with_capacity(azimuth_count);
    for i in 0..azimuth_count {
        let a = r.read_f64::<LittleEndian>()?;
        if i > 0 && a <= azimuth_angles[i - 1] {
            return Err(Error::Parse {
                offset: HEADER_LEN + 8 * i as u64,
                message: format!("azimuth angles not strictly ascending at index {i}"),
            });
        }
        azimuth_angles.push(a);
    }
    let mut intensities = Vec::with_capacity(azimuth_count * range_bin_count);
    for _ in 0..azimuth_count * range_bin_count {
        intensities.push(r.read_f32::<LittleEndian>()?);
    }

    let scan = PolarScan {
        azimuth_count,
        range_bin_count,
        range_resolution: T::cast(range_resolution),
        azimuth_angles: azimuth_angles.into_iter().map(T::cast).collect(),
        intensities: intensities.into_iter().map(|v| T::cast(v as f64)).collect(),
        timestamp,
    };
    scan.validate().map_err(|e| Error::Parse {
        offset: HEADER_LEN,
        message: e.to_string(),
    })?;
    Ok(scan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use tempfile::tempdir;

    fn fixture_scan() -> PolarScan<f64> {
        PolarScan {
            azimuth_count: 2,
            range_bin_count: 4,
            range_resolution: 0.5,
            azimuth_angles: vec![0.0, std::f64::consts::PI],
            intensities: vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0],
            timestamp: 12.5,
        }
    }

    #[test]
    fn minimal_fixture_round_trip_field_by_field() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("s.f2s");
        let scan = fixture_scan();
        save_polar_scan(&scan, &path).unwrap();
        let loaded: PolarScan<f64> = load_polar_scan(&path).unwrap();
        assert_eq!(loaded.azimuth_count, 2);
        assert_eq!(loaded.range_bin_count, 4);
        assert_eq!(loaded.range_resolution, 0.5);
        assert_eq!(loaded.azimuth_angles, scan.azimuth_angles);
        assert_eq!(loaded.intensities, scan.intensities);
        assert_eq!(loaded.timestamp, 12.5);
    }

    #[test]
    fn truncated_payload_names_byte_counts() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("s.f2s");
        save_polar_scan(&fixture_scan(), &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
        match load_polar_scan::<f64>(&path) {
            Err(Error::Parse { message, .. }) => {
                assert!(message.contains("expected") && message.contains("bytes"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn bad_magic_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("s.f2s");
        save_polar_scan(&fixture_scan(), &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'X';
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load_polar_scan::<f64>(&path),
            Err(Error::Parse { offset: 0, .. })
        ));
    }

    #[test]
    fn non_ascending_azimuths_rejected_with_offset() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("s.f2s");
        save_polar_scan(&fixture_scan(), &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        // overwrite the second azimuth with 0.0 (equal to the first)
        for (k, b) in 0.0f64.to_le_bytes().iter().enumerate() {
            bytes[64 + 8 + k] = *b;
        }
        std::fs::write(&path, &bytes).unwrap();
        match load_polar_scan::<f64>(&path) {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 72),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(32))]
        #[test]
        fn prop_round_trip_identity(seed in 0u64..1_000_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let azimuths = rng.gen_range(2usize..32);
            let bins = rng.gen_range(1usize..32);
            let step = std::f64::consts::TAU / azimuths as f64;
            let scan = PolarScan::<f64> {
                azimuth_count: azimuths,
                range_bin_count: bins,
                range_resolution: rng.gen_range(0.01..2.0),
                azimuth_angles: (0..azimuths)
                    .map(|i| i as f64 * step + rng.gen_range(0.0..step * 0.4))
                    .collect(),
                // f32 payload: use values that survive the f32 round trip
                intensities: (0..azimuths * bins)
                    .map(|_| rng.gen::<f32>() as f64)
                    .collect(),
                timestamp: rng.gen_range(0.0..1e6),
            };
            let dir = tempdir().unwrap();
            let path = dir.path().join("rt.f2s");
            save_polar_scan(&scan, &path).unwrap();
            let loaded: PolarScan<f64> = load_polar_scan(&path).unwrap();
            proptest::prop_assert_eq!(loaded.intensities, scan.intensities);
            proptest::prop_assert_eq!(loaded.azimuth_angles, scan.azimuth_angles);
            proptest::prop_assert_eq!(loaded.timestamp, scan.timestamp);
        }
    }
}
