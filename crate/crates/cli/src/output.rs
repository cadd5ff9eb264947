//! Output formatting: significant-digit numbers, CSV tables with comment
//! headers, and JSON reports.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use serde_json::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug)]
pub struct OutputOpts {
    pub format: Format,
    pub digits: usize,
    pub timestamp: bool,
    pub out: Option<PathBuf>,
}

/// Round to `digits` significant digits; plain decimal in a readable
/// range, scientific outside it. Non-finite values render as `inf`.
pub fn fmt_sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let digits = digits.max(1);
    let mag = x.abs().log10().floor() as i32;
    if mag < -4 || mag >= digits as i32 {
        format!("{:.*e}", digits - 1, x)
    } else {
        let decimals = (digits as i32 - 1 - mag).max(0) as usize;
        format!("{:.*}", decimals, x)
    }
}

/// A CSV table plus `# key: value` comment lines, mirrored into JSON.
pub struct Report {
    pub comments: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub json: Value,
}

impl Report {
    pub fn to_csv(&self, timestamp: bool) -> String {
        let mut text = String::new();
        if timestamp {
            let now = std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0);
            text.push_str(&format!("# generated_unix: {now}\n"));
        }
        for (key, value) in &self.comments {
            text.push_str(&format!("# {key}: {value}\n"));
        }
        text.push_str(&self.header.join(","));
        text.push('\n');
        for row in &self.rows {
            text.push_str(&row.join(","));
            text.push('\n');
        }
        text
    }
}

pub fn emit(report: &Report, opts: &OutputOpts) -> std::io::Result<()> {
    let text = match opts.format {
        Format::Csv => report.to_csv(opts.timestamp),
        Format::Json => format!("{:#}\n", report.json),
    };
    match &opts.out {
        Some(path) => fs::write(path, text),
        None => std::io::stdout().write_all(text.as_bytes()),
    }
}
