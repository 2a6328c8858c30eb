//! CSV ingestion for voltage traces, OCV tables, radio calibrations and
//! burst plans. Every file starts with a fixed header row; errors carry the
//! 1-based line number.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::harvest::{OcvTable, VoltageSample};
use crate::profile::PacketPlan;
use crate::radio::CalibrationPoint;
use crate::units::MILLI;

pub const TRACE_HEADER: [&str; 2] = ["t_s", "v_v"];
pub const OCV_HEADER: [&str; 2] = ["p_dbm", "v_oc_v"];
pub const CALIBRATION_HEADER: [&str; 2] = ["c_c_ma", "p_t_dbm"];
pub const PLAN_HEADER: [&str; 3] = ["msdu_octets", "p_t_dbm", "r_d_bps"];

struct Row {
    line: u64,
    fields: Vec<String>,
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_error(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn read_rows<R: Read>(reader: R, origin: &Path, header: &[&str]) -> Result<Vec<Row>> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows = Vec::new();
    let mut seen_header = false;
    for record in csv.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_error(origin, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        if !seen_header {
            let found: Vec<&str> = record.iter().collect();
            if found != header {
                return Err(parse_error(
                    origin,
                    line,
                    format!(
                        "expected header `{}`, found `{}`",
                        header.join(","),
                        found.join(",")
                    ),
                ));
            }
            seen_header = true;
            continue;
        }
        if record.len() != header.len() {
            return Err(parse_error(
                origin,
                line,
                format!("expected {} columns, found {}", header.len(), record.len()),
            ));
        }
        rows.push(Row {
            line,
            fields: record.iter().map(str::to_owned).collect(),
        });
    }
    if !seen_header {
        return Err(parse_error(
            origin,
            1,
            format!("missing header `{}`", header.join(",")),
        ));
    }
    Ok(rows)
}

fn number(origin: &Path, row: &Row, col: usize, name: &str) -> Result<f64> {
    let raw = &row.fields[col];
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(parse_error(
            origin,
            row.line,
            format!("{name}: `{raw}` is not a finite number"),
        )),
    }
}

pub fn read_voltage_trace<R: Read>(reader: R, origin: &Path) -> Result<Vec<VoltageSample>> {
    let rows = read_rows(reader, origin, &TRACE_HEADER)?;
    let mut samples: Vec<VoltageSample> = Vec::with_capacity(rows.len());
    for row in &rows {
        let t = number(origin, row, 0, "t_s")?;
        let v = number(origin, row, 1, "v_v")?;
        let sample =
            VoltageSample::new(t, v).map_err(|e| parse_error(origin, row.line, e.to_string()))?;
        if let Some(prev) = samples.last() {
            if sample.t < prev.t {
                return Err(parse_error(
                    origin,
                    row.line,
                    format!("non-monotone time: {} s after {} s", sample.t, prev.t),
                ));
            }
        }
        samples.push(sample);
    }
    Ok(samples)
}

/// Loads a `t_s,v_v` trace. Time must be non-decreasing.
pub fn load_voltage_trace(path: &Path) -> Result<Vec<VoltageSample>> {
    read_voltage_trace(open(path)?, path)
}

pub fn read_ocv_table<R: Read>(reader: R, origin: &Path) -> Result<OcvTable> {
    let rows = read_rows(reader, origin, &OCV_HEADER)?;
    let points = rows
        .iter()
        .map(|row| {
            Ok((
                number(origin, row, 0, "p_dbm")?,
                number(origin, row, 1, "v_oc_v")?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    OcvTable::new(points)
        .map_err(|e| parse_error(origin, rows.last().map_or(1, |r| r.line), e.to_string()))
}

pub fn load_ocv_table(path: &Path) -> Result<OcvTable> {
    read_ocv_table(open(path)?, path)
}

pub fn read_calibration<R: Read>(reader: R, origin: &Path) -> Result<Vec<CalibrationPoint>> {
    read_rows(reader, origin, &CALIBRATION_HEADER)?
        .iter()
        .map(|row| {
            let c_ma = number(origin, row, 0, "c_c_ma")?;
            if !(c_ma > 0.0) {
                return Err(parse_error(
                    origin,
                    row.line,
                    format!("c_c_ma must be positive, got {c_ma}"),
                ));
            }
            Ok(CalibrationPoint {
                supply_current: c_ma * MILLI,
                tx_power_dbm: number(origin, row, 1, "p_t_dbm")?,
            })
        })
        .collect()
}

pub fn load_calibration(path: &Path) -> Result<Vec<CalibrationPoint>> {
    read_calibration(open(path)?, path)
}

pub fn read_burst_plan<R: Read>(reader: R, origin: &Path) -> Result<Vec<PacketPlan>> {
    read_rows(reader, origin, &PLAN_HEADER)?
        .iter()
        .map(|row| {
            let raw = &row.fields[0];
            let msdu_octets = raw.parse::<u32>().map_err(|_| {
                parse_error(
                    origin,
                    row.line,
                    format!("msdu_octets: `{raw}` is not a non-negative integer"),
                )
            })?;
            let rate = number(origin, row, 2, "r_d_bps")?;
            if !(rate > 0.0) {
                return Err(parse_error(
                    origin,
                    row.line,
                    format!("r_d_bps must be positive, got {rate}"),
                ));
            }
            Ok(PacketPlan {
                msdu_octets,
                tx_power_dbm: number(origin, row, 1, "p_t_dbm")?,
                data_rate_bps: rate,
            })
        })
        .collect()
}

pub fn load_burst_plan(path: &Path) -> Result<Vec<PacketPlan>> {
    read_burst_plan(open(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(text: &str) -> Result<Vec<VoltageSample>> {
        read_voltage_trace(text.as_bytes(), Path::new("trace.csv"))
    }

    #[test]
    fn trace_three_rows() {
        let s = trace("t_s,v_v\n0.0,0.0\n0.5,1.1\n1.0,1.6\n").unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s[2].v, 1.6);
    }

    #[test]
    fn trace_header_only() {
        assert!(trace("t_s,v_v\n").unwrap().is_empty());
    }

    #[test]
    fn trace_negative_time_names_line() {
        let err = trace("t_s,v_v\n0.0,0.1\n-1.0,0.2\n").unwrap_err();
        match &err {
            Error::Parse { line, .. } => assert_eq!(*line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(err.to_string().contains("trace.csv:3"));
    }

    #[test]
    fn trace_rejects_time_going_backwards() {
        let err = trace("t_s,v_v\n0.5,0.1\n0.2,0.2\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
        assert!(err.to_string().contains("non-monotone"));
    }

    #[test]
    fn trace_rejects_wrong_header_and_garbage() {
        assert!(matches!(
            trace("time,volts\n0,0\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            trace("t_s,v_v\n0,abc\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            trace("t_s,v_v\n0,1,2\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(trace(""), Err(Error::Parse { .. })));
    }

    #[test]
    fn ocv_and_calibration() {
        let table = read_ocv_table(
            "p_dbm,v_oc_v\n-14,0.4\n-11.3,0.9\n".as_bytes(),
            Path::new("t"),
        )
        .unwrap();
        assert_eq!(table.points().len(), 2);
        assert!(read_ocv_table(
            "p_dbm,v_oc_v\n-14,0.9\n-11.3,0.4\n".as_bytes(),
            Path::new("t")
        )
        .is_err());
        let cal = read_calibration(
            "c_c_ma,p_t_dbm\n10,-20\n16.24,3.5\n".as_bytes(),
            Path::new("c"),
        )
        .unwrap();
        assert!((cal[1].supply_current - 16.24e-3).abs() < 1e-15);
    }

    #[test]
    fn plan_rows() {
        let plan = read_burst_plan(
            "msdu_octets,p_t_dbm,r_d_bps\n106,3.5,250000\n\n1,-5,1000000\n".as_bytes(),
            Path::new("p"),
        )
        .unwrap();
        assert_eq!(plan.len(), 2);
        assert_eq!(plan[1].msdu_octets, 1);
        assert!(read_burst_plan(
            "msdu_octets,p_t_dbm,r_d_bps\n-3,3.5,250000\n".as_bytes(),
            Path::new("p")
        )
        .is_err());
        assert!(
            read_burst_plan("msdu_octets,p_t_dbm,r_d_bps\n".as_bytes(), Path::new("p"))
                .unwrap()
                .is_empty()
        );
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            load_voltage_trace(Path::new("/nonexistent/trace.csv")),
            Err(Error::Io { .. })
        ));
    }
}
