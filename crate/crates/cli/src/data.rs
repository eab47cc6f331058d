//! Spike CSV files and their metadata sidecar.
//!
//! The CSV has a header `trial,bin_0,...,bin_{B-1}` and one row per trial
//! with 1-based trial ids and 0/1 values. Metadata that does not fit the
//! table lives next to it in `<file>.meta.json`.

use std::fs::File;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use qcd::simulate::{Response, SpikeTrialSet, TrialExperiment, TrialMeta};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub meta: TrialMeta,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<TrialExperiment>,
}

pub fn sidecar_path(csv: &Path) -> PathBuf {
    let mut s = csv.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

pub fn write_spikes<W: Write>(set: &SpikeTrialSet, out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["trial".to_string()];
    header.extend((0..set.bins()).map(|b| format!("bin_{b}")));
    w.write_record(&header).map_err(data_err)?;
    for (i, row) in set.rows().enumerate() {
        let mut rec = vec![(i + 1).to_string()];
        rec.extend(row.iter().map(|s| s.to_string()));
        w.write_record(&rec).map_err(data_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sidecar(path: &Path, sidecar: &Sidecar) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(sidecar).expect("sidecar serializes");
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn data_err(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

/// Parses a spike table. `meta` applies to the parsed set; when `None` the
/// set gets neutral metadata (no known change, cue at bin 0).
pub fn read_spikes<R: Read>(input: R, meta: Option<TrialMeta>) -> Result<SpikeTrialSet, CliError> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = r.headers().map_err(|e| CliError::Data(format!("line 1: {e}")))?.clone();
    if header.get(0) != Some("trial") {
        return Err(CliError::Data("line 1: first column must be `trial`".into()));
    }
    let bins = header.len() - 1;
    if bins == 0 {
        return Err(CliError::Data("line 1: no bin columns".into()));
    }
    for (b, name) in header.iter().skip(1).enumerate() {
        if name != format!("bin_{b}") {
            return Err(CliError::Data(format!("line 1: column {} is `{name}`, expected `bin_{b}`", b + 2)));
        }
    }

    let mut spikes = Vec::new();
    let mut trials = 0;
    for rec in r.records() {
        let rec = rec.map_err(|e| match e.position() {
            Some(p) => CliError::Data(format!("line {}: {e}", p.line())),
            None => data_err(e),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let id = &rec[0];
        if id.parse::<usize>().ok() != Some(trials + 1) {
            return Err(CliError::Data(format!("line {line}: trial id `{id}`, expected {}", trials + 1)));
        }
        for (b, v) in rec.iter().skip(1).enumerate() {
            spikes.push(match v {
                "0" => 0,
                "1" => 1,
                _ => return Err(CliError::Data(format!("line {line}: bin_{b} is `{v}`, expected 0 or 1"))),
            });
        }
        trials += 1;
    }
    if trials == 0 {
        return Err(CliError::Data("no trial rows".into()));
    }
    let meta = meta.unwrap_or(TrialMeta {
        bin_width: TrialExperiment::default().bin_width,
        change_trial: trials + 1,
        cue_bin: 0,
        response: Response::Immediate,
    });
    SpikeTrialSet::new(trials, bins, spikes, meta).map_err(data_err)
}

/// Reads `path` and its sidecar if one exists.
pub fn load_spikes(path: &Path) -> Result<SpikeTrialSet, CliError> {
    let side = sidecar_path(path);
    let meta = if side.exists() {
        let text = std::fs::read_to_string(&side).map_err(|e| CliError::Data(format!("{}: {e}", side.display())))?;
        let s: Sidecar =
            serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", side.display())))?;
        Some(s.meta)
    } else {
        None
    };
    let file = File::open(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    read_spikes(io::BufReader::new(file), meta).map_err(|e| match e {
        CliError::Data(m) => CliError::Data(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// `path` or standard output.
pub fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(
            File::create(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

pub fn write_rows<T: Serialize>(rows: &[T], out: Box<dyn Write>) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row).map_err(data_err)?;
    }
    w.flush()?;
    Ok(())
}
