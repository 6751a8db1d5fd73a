//! Payload rendering and writing. Payloads never carry timestamps; those go
//! to a `.meta.json` sidecar next to the output file.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::error::CliError;

/// Reals with 17 significant digits.
pub fn real(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

/// A CSV table whose cells are already rendered.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: Vec<&'static str>) -> Self {
        Self { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for row in &self.rows {
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }
}

pub fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("payload serializes");
    s.push('\n');
    s
}

/// Writes `payload` to `path`, or to stdout when no path is given.
pub fn emit(payload: &str, path: Option<&Path>, meta: &serde_json::Value) -> Result<(), CliError> {
    match path {
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(payload.as_bytes()).map_err(|e| CliError::io(Path::new("<stdout>"), e))?;
            out.flush().map_err(|e| CliError::io(Path::new("<stdout>"), e))
        }
        Some(p) => {
            std::fs::write(p, payload).map_err(|e| CliError::io(p, e))?;
            let sidecar = sidecar_path(p);
            let mut meta = meta.clone();
            let now = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
            meta["timestamp_unix"] = now.into();
            meta["version"] = env!("CARGO_PKG_VERSION").into();
            std::fs::write(&sidecar, json(&meta)).map_err(|e| CliError::io(&sidecar, e))
        }
    }
}

/// `out.csv` → `out.csv.meta.json`.
pub fn sidecar_path(p: &Path) -> PathBuf {
    let mut s = p.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_keep_seventeen_digits() {
        assert_eq!(real(0.1), "1.0000000000000001e-1");
        assert_eq!(real(1.0), "1.0000000000000000e0");
        assert_eq!(real(f64::NAN), "NaN");
        for x in [0.1, 1.0 / 3.0, 2.5e-300, -7.25] {
            assert_eq!(real(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn table_render() {
        let mut t = Table::new(vec!["a", "b"]);
        t.push(vec!["1".into(), "x".into()]);
        assert_eq!(t.render(), "a,b\n1,x\n");
    }

    #[test]
    fn sidecar_name() {
        assert_eq!(sidecar_path(Path::new("/tmp/o.csv")), PathBuf::from("/tmp/o.csv.meta.json"));
    }
}
