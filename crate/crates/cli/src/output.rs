use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use spinrelay::experiments::SweepRecord;
use spinrelay::fidelity::FidelityTrace;

pub const TRACE_HEADER: [&str; 5] = ["t", "kind", "f_exc", "f_coh", "f_av"];
pub const SWEEP_HEADER: [&str; 13] = [
    "swept_name",
    "swept_value",
    "n",
    "j_boundary",
    "gamma",
    "tau",
    "f_exc_m",
    "f_coh_m",
    "f_av_m",
    "t_m",
    "p_suc",
    "n_measurements",
    "status",
];
pub const MEASUREMENT_HEADER: [&str; 4] = ["k", "t", "p_k", "p_cumulative"];

/// Twelve significant digits, fixed or exponent notation like C's `%.12g`.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    let s = if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        // rounding may have added a digit (9.99… → 10.0…); both forms are 12 digits or fewer
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        let s = format!("{x:.11e}");
        let (mantissa, exponent) = s.split_once('e').expect("exponent notation");
        let mantissa = if mantissa.contains('.') {
            mantissa.trim_end_matches('0').trim_end_matches('.')
        } else {
            mantissa
        };
        format!("{mantissa}e{exponent}")
    };
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

fn opt_num(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

pub fn write_trace<W: Write>(out: W, trace: &FidelityTrace) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for i in 0..trace.len() {
        w.write_record([
            fmt_num(trace.times[i]),
            trace.kinds[i].as_str().to_string(),
            fmt_num(trace.f_exc[i]),
            fmt_num(trace.f_coh[i]),
            fmt_num(trace.f_av[i]),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep<W: Write>(out: W, records: &[SweepRecord]) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(SWEEP_HEADER)?;
    for r in records {
        w.write_record([
            r.swept_name.as_str().to_string(),
            fmt_num(r.swept_value),
            r.n.to_string(),
            fmt_num(r.j_boundary),
            fmt_num(r.gamma),
            fmt_num(r.tau),
            opt_num(r.f_exc_m),
            opt_num(r.f_coh_m),
            opt_num(r.f_av_m),
            opt_num(r.t_m),
            opt_num(r.p_suc),
            r.n_measurements.map(|n| n.to_string()).unwrap_or_default(),
            r.status.as_str().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Measurement times and success probabilities of one protocol run.
pub fn write_measurements<W: Write>(out: W, times: &[f64], p_k: &[f64]) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(MEASUREMENT_HEADER)?;
    let mut cumulative = 1.0;
    for (k, (t, p)) in times.iter().zip(p_k).enumerate() {
        cumulative *= p;
        w.write_record([
            (k + 1).to_string(),
            fmt_num(*t),
            fmt_num(*p),
            fmt_num(cumulative),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: BTreeMap<String, Value>,
    pub artifact_version: String,
    pub timestamp: String,
    pub seed: u64,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64) -> Self {
        RunManifest {
            command: command.to_string(),
            parameters: BTreeMap::new(),
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            seed,
        }
    }

    pub fn param(&mut self, key: &str, value: impl Into<Value>) -> &mut Self {
        self.parameters.insert(key.to_string(), value.into());
        self
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        text.push('\n');
        fs::write(path, text)
    }
}

/// `results.csv` → `results.csv.manifest.json`.
pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    output.with_file_name(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(-0.0), "0");
        assert_eq!(fmt_num(0.5), "0.5");
        assert_eq!(fmt_num(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_num(628.3185307179586), "628.318530718");
        assert_eq!(fmt_num(2.0), "2");
        assert_eq!(fmt_num(1.5e-7), "1.5e-7");
        assert_eq!(fmt_num(123456789012345.0), "1.23456789012e14");
        assert_eq!(fmt_num(-0.0025), "-0.0025");
        assert_eq!(fmt_num(0.99999999999999), "1");
        for x in [0.1234567890123456, 98765.4321098765, 3.0e-9, 7.25e20] {
            let y: f64 = fmt_num(x).parse().unwrap();
            assert!(((y - x) / x).abs() < 5e-12, "{x} {y}");
        }
    }

    #[test]
    fn manifest_sidecar_name() {
        assert_eq!(
            manifest_path(Path::new("out/a.csv")),
            PathBuf::from("out/a.csv.manifest.json")
        );
    }
}
