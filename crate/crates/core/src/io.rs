//! CSV and JSON artifacts.
//!
//! Floats are written with Rust's shortest round-trip formatting so that
//! files are byte-identical across runs and read back exactly.

use std::io::{Read, Write};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::eigen::{StateSource, TruncEntry, TruncatedState};
use crate::error::{Error, Result};
use crate::lattice::{Bitstring, ModelParams};
use crate::observables::{Method, SpectrumResult, SweepResult, TimeSeries};

fn time_label(n: usize, dt: f64) -> f64 {
    (n as f64 * dt * 1e9).round() / 1e9
}

#[derive(Debug, Deserialize)]
struct TruncRow {
    #[serde(default)]
    #[allow(dead_code)]
    rank: Option<usize>,
    bitstring: String,
    amplitude: f64,
}

/// `rank,bitstring,amplitude` with rank starting at 1.
pub fn write_truncated_csv<W: Write>(state: &TruncatedState, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["rank", "bitstring", "amplitude"])?;
    for (i, e) in state.entries().iter().enumerate() {
        out.write_record([(i + 1).to_string(), e.bitstring.to_string(), e.amplitude.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

/// Read a truncated state; the `rank` column is optional and the rows are
/// re-ranked by magnitude.
pub fn read_truncated_csv<R: Read>(r: R) -> Result<TruncatedState> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let mut entries = Vec::new();
    for row in rdr.deserialize::<TruncRow>() {
        let row = row?;
        entries.push(TruncEntry {
            bitstring: row.bitstring.parse::<Bitstring>()?,
            amplitude: row.amplitude,
        });
    }
    TruncatedState::from_entries(entries)
}

/// JSON form of a truncated state with its quality figures and provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncatedJson {
    pub entries: Vec<TruncEntry>,
    pub m: usize,
    pub overlap: f64,
    pub defect: f64,
    pub one_norm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clamped_from: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<ModelParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sector: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy: Option<f64>,
}

impl From<&TruncatedState> for TruncatedJson {
    fn from(t: &TruncatedState) -> Self {
        Self {
            entries: t.entries().to_vec(),
            m: t.len(),
            overlap: t.overlap(),
            defect: t.defect(),
            one_norm: t.one_norm(),
            clamped_from: t.clamped_from,
            params: t.source.map(|s| s.params),
            sector: t.source.map(|s| s.sector),
            energy: t.source.map(|s| s.energy),
        }
    }
}

pub fn truncated_to_json(state: &TruncatedState) -> Result<String> {
    Ok(serde_json::to_string_pretty(&TruncatedJson::from(state))?)
}

pub fn truncated_from_json(s: &str) -> Result<TruncatedState> {
    let j: TruncatedJson = serde_json::from_str(s)?;
    let mut t = TruncatedState::from_entries(j.entries)?;
    t.clamped_from = j.clamped_from;
    if let (Some(params), Some(sector), Some(energy)) = (j.params, j.sector, j.energy) {
        t.source = Some(StateSource { params, sector, energy });
    }
    Ok(t)
}

#[derive(Debug, Deserialize)]
struct SeriesRow {
    t: f64,
    re: f64,
    im: f64,
    stderr_re: f64,
    stderr_im: f64,
}

/// `t,re,im,stderr_re,stderr_im`; standard errors are 0 for noiseless methods.
pub fn write_time_series_csv<W: Write>(series: &TimeSeries, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["t", "re", "im", "stderr_re", "stderr_im"])?;
    for (n, v) in series.values.iter().enumerate() {
        let (sr, si) = series.stderr.as_ref().map(|e| e[n]).unwrap_or((0.0, 0.0));
        out.write_record([
            time_label(n, series.dt).to_string(),
            v.re.to_string(),
            v.im.to_string(),
            sr.to_string(),
            si.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_time_series_csv<R: Read>(r: R, label: &str, method: Method) -> Result<TimeSeries> {
    let mut rdr = csv::Reader::from_reader(r);
    let rows: Vec<SeriesRow> = rdr.deserialize().collect::<std::result::Result<_, _>>()?;
    if rows.len() < 2 {
        return Err(Error::Parse("time series needs at least two rows".into()));
    }
    let dt = rows[1].t - rows[0].t;
    let mut ts = TimeSeries::new(dt, rows.iter().map(|r| C64::new(r.re, r.im)).collect(), label, method)?;
    if rows.iter().any(|r| r.stderr_re != 0.0 || r.stderr_im != 0.0) {
        ts.stderr = Some(rows.iter().map(|r| (r.stderr_re, r.stderr_im)).collect());
    }
    Ok(ts)
}

/// `freq,magnitude`.
pub fn write_spectrum_csv<W: Write>(s: &SpectrumResult, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["freq", "magnitude"])?;
    for (f, m) in s.frequencies.iter().zip(&s.magnitudes) {
        out.write_record([f.to_string(), m.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

/// `g,m0,M_min,epsilon_achieved,found`. Entries that missed the target keep
/// their row with an empty `M_min` and `found = false`.
pub fn write_sweep_csv<W: Write>(s: &SweepResult, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["g", "m0", "M_min", "epsilon_achieved", "found"])?;
    for e in &s.entries {
        out.write_record([
            e.coupling.to_string(),
            e.bare_mass.to_string(),
            e.m_min.map(|m| m.to_string()).unwrap_or_default(),
            e.epsilon_achieved.to_string(),
            e.m_min.is_some().to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// `t,abs_re_diff,abs_diff,cumulative_error` for an approximation against a
/// reference on the same grid.
pub fn write_difference_csv<W: Write>(exact: &TimeSeries, approx: &TimeSeries, w: W) -> Result<()> {
    let cum = crate::observables::cumulative_error(exact, approx)?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["t", "abs_re_diff", "abs_diff", "cumulative_error"])?;
    for (n, (a, b)) in exact.values.iter().zip(&approx.values).enumerate() {
        let d = a - b;
        let c = if n == 0 { 0.0 } else { cum[n - 1] };
        out.write_record([
            time_label(n, exact.dt).to_string(),
            d.re.abs().to_string(),
            d.norm().to_string(),
            c.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
