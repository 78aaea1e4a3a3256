use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::CliError;
use crate::GlobalArgs;

/// Output directory plus the record of everything written to it.
pub struct Run {
    dir: PathBuf,
    command: &'static str,
    outputs: Vec<String>,
}

impl Run {
    pub fn start(g: &GlobalArgs, command: &'static str) -> Result<Self, CliError> {
        fs::create_dir_all(&g.out).map_err(|e| CliError::input(&g.out, e))?;
        Ok(Self {
            dir: g.out.clone(),
            command,
            outputs: Vec::new(),
        })
    }

    /// Path for an output file, recorded in the manifest.
    pub fn path(&mut self, name: &str) -> Result<PathBuf, CliError> {
        let p = self.dir.join(name);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::input(parent, e))?;
        }
        self.outputs.push(name.to_string());
        Ok(p)
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        let p = self.path(name)?;
        fs::write(&p, text).map_err(|e| CliError::input(&p, e))
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        let text =
            serde_json::to_string_pretty(value).map_err(|e| CliError::Config(e.to_string()))?;
        self.write_text(name, &(text + "\n"))
    }

    /// Manifest with the resolved config and inputs; no timestamps, so reruns
    /// produce identical files.
    pub fn finish(
        mut self,
        g: &GlobalArgs,
        config: &impl Serialize,
        inputs: &[&Path],
    ) -> Result<(), CliError> {
        let manifest = json!({
            "tool": "elastic-shape",
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "config": serde_json::to_value(config).map_err(|e| CliError::Config(e.to_string()))?,
            "seed": g.seed,
            "threads": g.threads,
            "grid": g.grid.map(|(u, v)| format!("{u}x{v}")),
            "inputs": inputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
            "outputs": Value::from(self.outputs.clone()),
        });
        self.write_json("manifest.json", &manifest)
    }
}

/// Load a JSON config, or the defaults when no file is given.
pub fn load_config<T: serde::de::DeserializeOwned + Default>(
    g: &GlobalArgs,
) -> Result<T, CliError> {
    let Some(path) = &g.config else {
        return Ok(T::default());
    };
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// CSV text from a header and rows of already formatted cells.
pub fn csv(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}

/// Round-trip float formatting.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}
