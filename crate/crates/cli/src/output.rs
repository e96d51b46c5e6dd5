use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV table built row by row.
pub struct Table {
    text: String,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { text: format!("{}\n", header.join(",")) }
    }

    pub fn row(&mut self, cells: &[String]) {
        let _ = writeln!(self.text, "{}", cells.join(","));
    }

    pub fn finish(self) -> String {
        self.text
    }
}

/// `<out>/<command>-<first 16 hex digits of sha256(command, config)>`.
pub fn run_dir(out: &Path, command: &str, config: &impl Serialize) -> PathBuf {
    let json = serde_json::to_string(config).expect("config serializes");
    let mut hasher = Sha256::new();
    hasher.update(command.as_bytes());
    hasher.update(b"\n");
    hasher.update(json.as_bytes());
    let digest = hasher.finalize();
    let hex: String = digest.iter().take(8).map(|b| format!("{b:02x}")).collect();
    out.join(format!("{command}-{hex}"))
}

pub fn write_files(dir: &Path, files: &[(String, String)]) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, contents) in files {
        std::fs::write(dir.join(name), contents)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, std::f64::consts::PI] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn run_dir_depends_on_command_and_config() {
        let out = Path::new("runs");
        let a = run_dir(out, "curve", &serde_json::json!({"x": 1}));
        assert_eq!(a, run_dir(out, "curve", &serde_json::json!({"x": 1})));
        assert_ne!(a, run_dir(out, "sweep", &serde_json::json!({"x": 1})));
        assert_ne!(a, run_dir(out, "curve", &serde_json::json!({"x": 2})));
        assert!(a.file_name().unwrap().to_str().unwrap().starts_with("curve-"));
    }
}
