//! Run manifests and the JSON-lines event log.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use spadscan::profile::Profile;

use crate::args::Command;
use crate::failure::{Failure, Outcome};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const LOG_FILE: &str = "log.jsonl";

/// Everything needed to re-run a command: tool version, the fully resolved
/// profile and the command with absolute input paths.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub profile: Profile,
    pub command: Command,
}

impl Manifest {
    pub fn new(profile: &Profile, command: &Command) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            profile: profile.clone(),
            command: command.clone(),
        }
    }

    pub fn save(&self, dir: &Path) -> Outcome {
        let path = dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(self)
            .map_err(|e| Failure::validation(format!("manifest: {e}")))?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| Failure::io(&path, e))
    }

    pub fn load(path: &Path) -> Outcome<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Failure::validation(format!("{}: {e}", path.display())))
    }
}

/// Event log: one JSON object per line in the output directory, mirrored
/// as `event: key=value ...` progress text on stderr.
pub struct Log {
    file: Option<(PathBuf, BufWriter<File>)>,
    quiet: bool,
}

impl Log {
    pub fn stderr_only(quiet: bool) -> Self {
        Self { file: None, quiet }
    }

    pub fn in_dir(dir: &Path, quiet: bool) -> Outcome<Self> {
        let path = dir.join(LOG_FILE);
        let file = File::create(&path).map_err(|e| Failure::io(&path, e))?;
        Ok(Self {
            file: Some((path, BufWriter::new(file))),
            quiet,
        })
    }

    pub fn event(&mut self, event: &str, fields: Value) -> Outcome {
        let mut obj = Map::new();
        obj.insert("event".into(), Value::String(event.into()));
        if let Value::Object(f) = fields {
            obj.extend(f);
        }
        if !self.quiet {
            let detail: Vec<String> = obj
                .iter()
                .filter(|(k, _)| k.as_str() != "event")
                .map(|(k, v)| match v {
                    Value::String(s) => format!("{k}={s}"),
                    other => format!("{k}={other}"),
                })
                .collect();
            eprintln!("{event}: {}", detail.join(" "));
        }
        let line = Value::Object(obj).to_string();
        if let Some((path, w)) = &mut self.file {
            writeln!(w, "{line}").map_err(|e| Failure::io(path, e))?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Outcome {
        if let Some((path, w)) = &mut self.file {
            w.flush().map_err(|e| Failure::io(path, e))?;
        }
        Ok(())
    }
}
