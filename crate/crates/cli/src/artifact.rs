//! Provenance headers and artifact writers.

use std::fs;
use std::path::{Path, PathBuf};

use ergograph::geometry::{DiagnosticReport, Verdict};
use ergograph::{Error, Result};
use serde::Serialize;
use serde_json::{Map, Value};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Who produced an artifact: version, config hash and master seed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub command: String,
}

impl Provenance {
    /// `# ergograph <version> config=<hash> seed=<seed>` without the `# `.
    pub fn header_line(&self) -> String {
        format!("ergograph {VERSION} config={} seed={}", self.config_hash, self.seed)
    }

    /// The header line plus the command, for CSV and PGM comments.
    pub fn header(&self) -> String {
        format!("{}\ncommand={}", self.header_line(), self.command)
    }
}

/// Worst verdict of a batch of reports, PASS for none.
pub fn overall(reports: &[DiagnosticReport]) -> Verdict {
    reports.iter().fold(Verdict::Pass, |v, r| v.combine(r.verdict))
}

pub fn exit_code(v: Verdict) -> i32 {
    match v {
        Verdict::Pass => 0,
        Verdict::Fail => 1,
        Verdict::Inconclusive => 2,
    }
}

/// Writes artifacts under one directory, creating it on first use.
pub struct Artifacts {
    pub dir: PathBuf,
    pub prov: Provenance,
    pub written: Vec<PathBuf>,
}

impl Artifacts {
    pub fn new(dir: PathBuf, prov: Provenance) -> Self {
        Artifacts { dir, prov, written: Vec::new() }
    }

    fn path(&mut self, name: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.dir).map_err(|e| Error::Io(format!("{}: {e}", self.dir.display())))?;
        let p = self.dir.join(name);
        self.written.push(p.clone());
        Ok(p)
    }

    pub fn bytes(&mut self, name: &str, data: &[u8]) -> Result<PathBuf> {
        let p = self.path(name)?;
        write(&p, data)?;
        Ok(p)
    }

    pub fn text(&mut self, name: &str, text: &str) -> Result<PathBuf> {
        self.bytes(name, text.as_bytes())
    }

    /// `{ergograph, config_hash, seed, command, verdict, reports, …extra}`.
    pub fn report_json(
        &mut self,
        name: &str,
        reports: &[DiagnosticReport],
        extra: Map<String, Value>,
    ) -> Result<PathBuf> {
        let mut obj = Map::new();
        obj.insert("ergograph".into(), VERSION.into());
        obj.insert("config_hash".into(), self.prov.config_hash.clone().into());
        obj.insert("seed".into(), self.prov.seed.into());
        obj.insert("command".into(), self.prov.command.clone().into());
        obj.insert("verdict".into(), to_value(&overall(reports))?);
        obj.insert("reports".into(), to_value(reports)?);
        obj.extend(extra);
        let mut text = serde_json::to_string_pretty(&Value::Object(obj)).map_err(|e| Error::Io(e.to_string()))?;
        text.push('\n');
        self.text(name, &text)
    }
}

pub fn to_value<T: Serialize + ?Sized>(v: &T) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::Io(e.to_string()))
}

pub fn write(path: &Path, data: &[u8]) -> Result<()> {
    fs::write(path, data).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_format() {
        let p = Provenance { config_hash: "00ff".into(), seed: 7, command: "sync".into() };
        assert_eq!(p.header_line(), format!("ergograph {VERSION} config=00ff seed=7"));
        assert!(p.header().ends_with("\ncommand=sync"));
    }

    #[test]
    fn exit_codes() {
        let pass = DiagnosticReport::new("a", Verdict::Pass, 1, 0);
        let inc = DiagnosticReport::new("b", Verdict::Inconclusive, 1, 0);
        let fail = DiagnosticReport::new("c", Verdict::Fail, 1, 0);
        assert_eq!(exit_code(overall(&[])), 0);
        assert_eq!(exit_code(overall(&[pass.clone(), inc.clone()])), 2);
        assert_eq!(exit_code(overall(&[inc, fail, pass])), 1);
    }
}
