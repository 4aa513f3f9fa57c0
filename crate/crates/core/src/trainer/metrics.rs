use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const HEADER: &str =
    "step,eval_mean_return,eval_std_return,L_dis,L_unsup,L_csup,critic_loss,actor_loss,alpha,steps_per_second";

/// One evaluation row. Losses are means over the updates since the
/// previous row; NaN marks a value that was not computed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    pub step: u64,
    pub eval_mean_return: f64,
    pub eval_std_return: f64,
    pub l_dis: f64,
    pub l_unsup: f64,
    pub l_csup: f64,
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub alpha: f64,
    pub steps_per_second: f64,
}

impl MetricsRow {
    pub fn to_csv(&self) -> String {
        let floats = [
            self.eval_mean_return,
            self.eval_std_return,
            self.l_dis,
            self.l_unsup,
            self.l_csup,
            self.critic_loss,
            self.actor_loss,
            self.alpha,
            self.steps_per_second,
        ];
        let mut out = self.step.to_string();
        for v in floats {
            out.push(',');
            out.push_str(&format_g6(v));
        }
        out
    }
}

/// C's `%.6g`: six significant digits, trailing zeros removed, scientific
/// notation when the exponent is below −4 or at least 6.
pub fn format_g6(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (5 - exp) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Appends rows to `metrics.csv`, flushing after each so partial runs
/// leave usable files.
pub struct MetricsWriter {
    out: BufWriter<File>,
    path: std::path::PathBuf,
}

impl MetricsWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = Self {
            out: BufWriter::new(file),
            path: path.to_path_buf(),
        };
        w.line(HEADER)?;
        Ok(w)
    }

    fn line(&mut self, s: &str) -> Result<()> {
        writeln!(self.out, "{s}")
            .and_then(|_| self.out.flush())
            .map_err(|e| Error::io(&self.path, e))
    }

    pub fn write(&mut self, row: &MetricsRow) -> Result<()> {
        self.line(&row.to_csv())
    }
}

/// Reads `(step, eval_mean_return, eval_std_return)` from a metrics file.
pub fn read_returns(path: &Path) -> Result<Vec<(u64, String, String)>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::corrupt(path, format!("{other:?}")),
    })?;
    let headers = reader
        .headers()
        .map_err(|e| Error::corrupt(path, e.to_string()))?
        .clone();
    if headers.iter().collect::<Vec<_>>().join(",") != HEADER {
        return Err(Error::corrupt(path, "unexpected metrics header"));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::corrupt(path, e.to_string()))?;
        let step = record[0]
            .parse()
            .map_err(|_| Error::corrupt(path, format!("bad step '{}'", &record[0])))?;
        rows.push((step, record[1].to_string(), record[2].to_string()));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g6_matches_c_printf() {
        let cases = [
            (0.0, "0"),
            (1.0, "1"),
            (-2.5, "-2.5"),
            (123456.0, "123456"),
            (1234567.0, "1.23457e+06"),
            (0.0001, "0.0001"),
            (0.00001234, "1.234e-05"),
            (std::f64::consts::PI, "3.14159"),
            (186.04999999, "186.05"),
            (999999.5, "1e+06"),
            (0.30000000000000004, "0.3"),
            (1e100, "1e+100"),
            (f64::NAN, "nan"),
        ];
        for (x, want) in cases {
            assert_eq!(format_g6(x), want, "{x}");
        }
    }

    #[test]
    fn header_and_row_layout() {
        let row = MetricsRow {
            step: 2000,
            eval_mean_return: 12.5,
            eval_std_return: 0.0,
            l_dis: 1.386294,
            l_unsup: f64::NAN,
            l_csup: f64::NAN,
            critic_loss: 0.01,
            actor_loss: -3.0,
            alpha: 0.3,
            steps_per_second: f64::NAN,
        };
        assert_eq!(row.to_csv(), "2000,12.5,0,1.38629,nan,nan,0.01,-3,0.3,nan");
        assert_eq!(HEADER.split(',').count(), row.to_csv().split(',').count());
    }
}
