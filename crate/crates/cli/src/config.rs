//! Profile resolution: built-in base, then the TOML file, then flags.

use std::path::Path;

use serde::Deserialize;
use spadscan::profile::Profile;
use toml::{Table, Value};

use crate::args::ScanArgs;
use crate::failure::{Failure, Outcome};

fn merge(base: &mut Table, over: Table) {
    for (key, value) in over {
        match (base.get_mut(&key), value) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

/// Merges `text` over the built-in profile named by its `base` key, or by
/// `default_base` when the key is absent.
pub fn profile_from_toml(text: &str, default_base: &str) -> Outcome<Profile> {
    let mut over: Table = text
        .parse()
        .map_err(|e| Failure::validation(format!("config: {e}")))?;
    let base_name = match over.remove("base") {
        Some(Value::String(s)) => s,
        Some(_) => return Err(Failure::validation("config: `base` must be a string")),
        None => default_base.to_string(),
    };
    let base = Profile::builtin(&base_name)?;
    let mut table = Table::try_from(&base).map_err(|e| Failure::validation(format!("config: {e}")))?;
    merge(&mut table, over);
    Profile::deserialize(Value::Table(table)).map_err(|e| Failure::validation(format!("config: {e}")))
}

pub fn resolve_profile(config: Option<&Path>, base: &str) -> Outcome<Profile> {
    let profile = match config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
            profile_from_toml(&text, base)?
        }
        None => Profile::builtin(base)?,
    };
    profile.validate()?;
    Ok(profile)
}

pub fn apply_scan(profile: &mut Profile, scan: &ScanArgs) {
    if let Some(w) = scan.window {
        profile.illumination.window = w;
    }
    if let Some(e) = scan.epsilon {
        profile.illumination.epsilon = e;
    }
}
