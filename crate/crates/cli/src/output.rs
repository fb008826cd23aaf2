use std::fs;
use std::io::{self, Write};
use std::path::Path;

use clap::ValueEnum;
use serde::Serialize;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// `%g`-style rendering with 6 significant digits.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        return format!("{}e{exp}", trim_zeros(mantissa));
    }
    let decimals = (5 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn csv_string<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| CliError::invalid(format!("CSV encoding: {e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::invalid(format!("CSV encoding: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

pub fn json_string<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output serializes");
    s.push('\n');
    s
}

/// Writes `text` to `path`, or to stdout when `path` is `None`.
pub fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| CliError::io(p, e)),
        None => io::stdout().write_all(text.as_bytes()).map_err(|e| CliError::io("<stdout>", e)),
    }
}

/// Renders one record as human text, a one-row CSV or a JSON object.
pub fn emit<T: Serialize>(record: &T, human: &str, format: Option<Format>) -> Result<()> {
    let text = match format {
        None => format!("{human}\n"),
        Some(Format::Csv) => csv_string(std::slice::from_ref(record))?,
        Some(Format::Json) => json_string(record),
    };
    write_out(None, &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(302.508), "302.508");
        assert_eq!(sig6(84.22336), "84.2234");
        assert_eq!(sig6(100.8), "100.8");
        assert_eq!(sig6(21.3544), "21.3544");
        assert_eq!(sig6(0.4), "0.4");
        assert_eq!(sig6(1234567.0), "1.23457e6");
        assert_eq!(sig6(0.0000123), "1.23e-5");
        assert_eq!(sig6(999999.7), "1e6");
        assert_eq!(sig6(-2.5), "-2.5");
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(30.791812460476248), "30.7918");
    }

    #[test]
    fn csv_rows_keep_full_precision() {
        #[derive(Serialize)]
        struct Row {
            x: f64,
            tag: Option<&'static str>,
        }
        let s = csv_string(&[Row { x: 84.22336, tag: None }, Row { x: 0.1 + 0.2, tag: Some("a") }]).unwrap();
        assert_eq!(s, "x,tag\n84.22336,\n0.30000000000000004,a\n");
    }
}
