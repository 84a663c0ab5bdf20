//! CSV event logs: one row per event, grouped into traces by case id.

use std::collections::HashMap;

use chrono::{DateTime, NaiveDate, NaiveDateTime};

use super::{EventLog, LogError, Trace};

/// Column names to read. `time` is optional; without it events keep row order.
#[derive(Clone, Debug)]
pub struct CsvColumns {
    pub case: String,
    pub activity: String,
    pub time: Option<String>,
}

impl Default for CsvColumns {
    fn default() -> Self {
        CsvColumns { case: "case".into(), activity: "activity".into(), time: None }
    }
}

/// ISO-8601 timestamps (with or without offset, `T` or space separated,
/// date only) as nanoseconds since the epoch. Plain numbers are accepted too.
fn parse_timestamp(raw: &str) -> Option<i128> {
    let s = raw.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp_nanos_opt()? as i128);
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt.and_utc().timestamp_nanos_opt()? as i128);
        }
    }
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Some(d.and_hms_opt(0, 0, 0)?.and_utc().timestamp_nanos_opt()? as i128);
    }
    s.parse::<f64>().ok().filter(|v| v.is_finite()).map(|v| (v * 1e9) as i128)
}

pub fn parse_csv(bytes: &[u8], columns: &CsvColumns) -> Result<EventLog, LogError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
    let headers = reader.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| LogError::MissingColumn(name.to_string()))
    };
    let case_col = find(&columns.case)?;
    let activity_col = find(&columns.activity)?;
    let time_col = columns.time.as_deref().map(find).transpose()?;

    // case id -> (timestamp, row, activity)
    let mut cases: HashMap<String, Vec<(i128, usize, String)>> = HashMap::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let field = |i: usize| record.get(i).unwrap_or("");
        let time = match time_col {
            Some(c) => parse_timestamp(field(c))
                .ok_or_else(|| LogError::UnparseableTimestamp { row: row + 1, value: field(c).to_string() })?,
            None => 0,
        };
        cases
            .entry(field(case_col).to_string())
            .or_default()
            .push((time, row, field(activity_col).to_string()));
    }
    let mut log = EventLog::new();
    for (_, mut events) in cases {
        events.sort_by_key(|(time, row, _)| (*time, *row));
        log.add(events.into_iter().map(|(_, _, a)| a).collect::<Trace>(), 1);
    }
    Ok(log)
}

/// Writes `case,activity` rows. Empty traces have no events and are lost.
pub fn write_csv(log: &EventLog) -> Result<Vec<u8>, LogError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["case", "activity"])?;
    let mut case = 0;
    for (trace, &freq) in log.entries() {
        for _ in 0..freq {
            case += 1;
            let id = format!("case{case}");
            for a in trace.events() {
                writer.write_record([id.as_str(), a.as_str()])?;
            }
        }
    }
    writer.into_inner().map_err(|e| LogError::Csv(e.into_error().into()))
}
