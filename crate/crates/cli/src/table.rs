//! CSV result tables with a provenance header.

use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub struct ResultTable {
    pub name: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl ResultTable {
    pub fn new(name: &str, columns: &[&'static str]) -> ResultTable {
        ResultTable { name: name.into(), columns: columns.to_vec(), rows: vec![] }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self, provenance: &Provenance) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# akprop {} experiment={} table={} config_sha256={}", provenance.version, provenance.experiment, self.name, provenance.config_hash);
        s.push_str(&self.columns.join(","));
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

pub struct Provenance {
    pub version: &'static str,
    pub experiment: &'static str,
    pub config_hash: String,
}

impl Provenance {
    pub fn new(experiment: &'static str, canonical_config: &str) -> Provenance {
        let digest = Sha256::digest(canonical_config.as_bytes());
        let config_hash = digest.iter().map(|b| format!("{b:02x}")).collect();
        Provenance { version: env!("CARGO_PKG_VERSION"), experiment, config_hash }
    }
}

pub fn num(v: f64) -> String {
    format!("{v}")
}

pub fn point(p: &[f64]) -> String {
    p.iter().map(|v| num(*v)).collect::<Vec<_>>().join(";")
}

pub fn write_all(dir: &Path, prefix: &str, tables: &[ResultTable], summary: &serde_json::Value, prov: &Provenance) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut out = vec![];
    for t in tables {
        let p = dir.join(format!("{prefix}_{}.csv", t.name));
        std::fs::write(&p, t.render(prov))?;
        out.push(p);
    }
    let doc = serde_json::json!({
        "akprop_version": prov.version,
        "experiment": prov.experiment,
        "config_sha256": prov.config_hash,
        "summary": summary,
    });
    let p = dir.join(format!("{prefix}_summary.json"));
    std::fs::write(&p, serde_json::to_string_pretty(&doc).expect("summary is valid JSON") + "\n")?;
    out.push(p);
    Ok(out)
}
