use std::fmt::Write as _;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Result, StageExt};
use crate::experiments::run::{Bundle, PlotData};

/// Subdirectory of the bundle holding plot data.
pub const PLOT_DIR: &str = "plot";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub columns: Vec<String>,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub kind: Option<String>,
    pub entries: Vec<ManifestEntry>,
}

/// Whitespace-separated columns under a `#` header line.
pub fn plot_text(p: &PlotData) -> String {
    let mut s = format!("# {}\n", p.columns.join(" "));
    for r in &p.rows {
        let cells: Vec<String> = r.iter().map(|v| format!("{v:e}")).collect();
        let _ = writeln!(s, "{}", cells.join(" "));
    }
    s
}

/// Writes `plot/<name>.dat` for every plot series of the bundle and
/// `plot/manifest.json` listing them. Returns the manifest path.
pub fn export_report(bundle: &Bundle) -> Result<PathBuf> {
    let dir = bundle.dir.join(PLOT_DIR);
    std::fs::create_dir_all(&dir).stage("export")?;
    let mut entries = Vec::with_capacity(bundle.plots.len());
    for p in &bundle.plots {
        let file = format!("{}.dat", p.name);
        std::fs::write(dir.join(&file), plot_text(p)).stage("export")?;
        entries.push(ManifestEntry { file, columns: p.columns.clone(), rows: p.rows.len() });
    }
    let manifest = Manifest { kind: bundle.kind.map(|k| k.to_string()), entries };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).stage("export")?;
    std::fs::write(&path, text + "\n").stage("export")?;
    Ok(path)
}
