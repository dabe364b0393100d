//! Ground-truth pose CSV: header `timestamp,x,y,heading`, one record per
//! line, meters and radians, timestamps strictly increasing.

use crate::error::{Error, Result};
use crate::odometry::Pose2D;
use crate::scalar::Scalar;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruthRecord<T> {
    pub timestamp: f64,
    pub pose: Pose2D<T>,
}

pub fn save_ground_truth<T: Scalar>(records: &[GroundTruthRecord<T>], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "timestamp,x,y,heading")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{}",
            r.timestamp,
            r.pose.x.as_f64(),
            r.pose.y.as_f64(),
            r.pose.heading.as_f64()
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_ground_truth<T: Scalar>(path: &Path) -> Result<Vec<GroundTruthRecord<T>>> {
    let reader = BufReader::new(File::open(path)?);
    let mut records = Vec::new();
    for (line_no, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = line_no + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if line_no == 1 {
            if trimmed != "timestamp,x,y,heading" {
                return Err(Error::ParseLine {
                    line: 1,
                    message: format!("bad header {trimmed:?}"),
                });
            }
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::ParseLine {
                line: line_no,
                message: format!("expected 4 fields, got {}", fields.len()),
            });
        }
        let parse = |s: &str, name: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|_| Error::ParseLine {
                line: line_no,
                message: format!("bad {name} value {s:?}"),
            })
        };
        let timestamp = parse(fields[0], "timestamp")?;
        let x = parse(fields[1], "x")?;
        let y = parse(fields[2], "y")?;
        let heading = parse(fields[3], "heading")?;
        if let Some(prev) = records.last() {
            let prev: &GroundTruthRecord<T> = prev;
            if timestamp <= prev.timestamp {
                return Err(Error::ParseLine {
                    line: line_no,
                    message: format!(
                        "timestamps not strictly increasing: {} after {}",
                        timestamp, prev.timestamp
                    ),
                });
            }
        }
        records.push(GroundTruthRecord {
            timestamp,
            pose: Pose2D {
                x: T::cast(x),
                y: T::cast(y),
                heading: T::cast(heading),
                timestamp,
            },
        });
    }
    Ok(records)
}
