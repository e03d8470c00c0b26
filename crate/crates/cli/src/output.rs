//! Output files: `#` comment header, then CSV or JSON body.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::CliError;

/// `%.17g`: 17 significant digits, trailing zeros dropped, so every
/// double survives a text round trip.
pub fn g17(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if !(-5..17).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        return format!("{mantissa}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs());
    }
    let decimals = (16 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

/// Writes the comment header: command, resolved config, seed, timestamp.
/// Only the timestamp line differs between identical runs.
pub fn write_header(w: &mut impl Write, command: &str, config: &impl Serialize, seed: &str) -> Result<(), CliError> {
    let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    writeln!(w, "# moment-match {} {command}", env!("CARGO_PKG_VERSION"))?;
    writeln!(w, "# config: {}", serde_json::to_string(config)?)?;
    writeln!(w, "# seed: {seed}")?;
    writeln!(w, "# timestamp_unix: {stamp}")?;
    Ok(())
}

pub fn csv_writer(w: impl Write) -> csv::Writer<impl Write> {
    csv::WriterBuilder::new().has_headers(false).from_writer(w)
}
