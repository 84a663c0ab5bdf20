//! Reading nets and logs, and writing outputs.

use std::path::Path;

use anyhow::{bail, Context, Result};
use swn_core::eventlog::{parse_csv, parse_xes, write_csv, write_xes, CsvColumns, EventLog};
use swn_core::net::pnml::{parse_pnml, PnmlNet};
use swn_core::net::{validate_workflow, NetError, StochasticWorkflowNet};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Pnml,
    Xes,
    Csv,
}

pub fn format_of(path: &Path) -> Result<Format> {
    let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some("pnml") => Ok(Format::Pnml),
        Some("xes") => Ok(Format::Xes),
        Some("csv") => Ok(Format::Csv),
        _ => bail!("unsupported file type: {} (expected .pnml, .xes or .csv)", path.display()),
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).with_context(|| format!("reading {}", path.display()))
}

pub fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

pub fn read_pnml(path: &Path) -> Result<PnmlNet> {
    if format_of(path)? != Format::Pnml {
        bail!("{} is not a PNML file", path.display());
    }
    parse_pnml(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

/// Reads a PNML net and checks the workflow-net conditions. Missing weights
/// default to 1.
pub fn read_swn(path: &Path) -> Result<StochasticWorkflowNet> {
    let parsed = read_pnml(path)?;
    if parsed.unweighted {
        log::info!("{}: transitions without a weight default to 1", path.display());
    }
    let weights = parsed.weights_or_default();
    let (source, sink) = match (parsed.source, parsed.sink) {
        (Some(s), Some(t)) => (s, t),
        _ => {
            let (s, t) = parsed.net.infer_source_sink();
            let s = s.map_err(NetError::NotAWorkflowNet);
            let t = t.map_err(NetError::NotAWorkflowNet);
            match (s, t) {
                (Ok(s), Ok(t)) => (s, t),
                (Err(e), _) | (_, Err(e)) => return Err(e).with_context(|| format!("validating {}", path.display())),
            }
        }
    };
    let wn = validate_workflow(parsed.net, source, sink).with_context(|| format!("validating {}", path.display()))?;
    StochasticWorkflowNet::new(wn, weights).with_context(|| format!("weights in {}", path.display()))
}

pub fn read_log(path: &Path, columns: &CsvColumns) -> Result<EventLog> {
    let bytes = read(path)?;
    let log = match format_of(path)? {
        Format::Xes => parse_xes(&bytes),
        Format::Csv => parse_csv(&bytes, columns),
        Format::Pnml => bail!("{} is a net, not an event log", path.display()),
    };
    log.with_context(|| format!("parsing {}", path.display()))
}

pub fn encode_log(log: &EventLog, format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Xes => Ok(write_xes(log)),
        Format::Csv => Ok(write_csv(log)?),
        Format::Pnml => bail!("cannot write an event log as PNML"),
    }
}
