//! Number formatting, ledger CSV, and atomic file writes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nnpart::arena::LossLedger;

use crate::CliError;

pub const LEDGER_HEADER: &str = "round,guess,truth,loss,loss_bound,mistake,robust_mistake,scale_index,cum_loss";

/// `x` with 12 significant digits, in the style of C's `%.12g`.
pub fn fmt_sig(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}"))
    } else {
        format!("{}e{}{:02}", trim_zeros(mantissa), if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

/// The per-round ledger as CSV. Labels are written 1-based.
pub fn ledger_csv(ledger: &LossLedger) -> String {
    let mut out = String::with_capacity(64 * (ledger.records.len() + 1));
    out.push_str(LEDGER_HEADER);
    out.push('\n');
    for r in &ledger.records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.round,
            r.guess + 1,
            r.truth + 1,
            fmt_sig(r.loss),
            fmt_sig(r.loss_bound),
            u8::from(r.mistake),
            u8::from(r.robust_mistake),
            r.scale_index.map(|i| i.to_string()).unwrap_or_default(),
            fmt_sig(r.cum_loss),
        );
    }
    out
}

/// Writes through a sibling temporary file and a rename, so readers never
/// see a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let io = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, contents).map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(2.0), "2");
        assert_eq!(fmt_sig(-0.5), "-0.5");
        assert_eq!(fmt_sig(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_sig(2.0f64.sqrt() * 1000.0), "1414.21356237");
        assert_eq!(fmt_sig(1.5e-7), "1.5e-07");
        assert_eq!(fmt_sig(123456789012345.0), "1.23456789012e+14");
        assert_eq!(fmt_sig(0.03125), "0.03125");
        assert_eq!(fmt_sig(f64::INFINITY), "inf");
    }

    #[test]
    fn empty_ledger_is_header_only() {
        assert_eq!(ledger_csv(&LossLedger::new()), format!("{LEDGER_HEADER}\n"));
    }
}
