//! Layering of a JSON config file under command-line flags.
//!
//! A config file is a flat JSON object keyed by flag name (`gamma1_ghz` or
//! `gamma1-ghz`). Flags given on the command line win over the file.

use std::collections::BTreeSet;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{CliError, CliResult};

/// Merges `cli` over the contents of `config_path`. `known` lists the flag
/// ids of the command; any other key in the file is rejected.
pub fn layered<T>(cli: &T, config_path: Option<&Path>, known: &BTreeSet<String>) -> CliResult<T>
where
    T: Serialize + DeserializeOwned,
{
    let mut merged = match config_path {
        Some(path) => read_object(path, known)?,
        None => Map::new(),
    };
    let flags = serde_json::to_value(cli).map_err(|e| CliError::input(e.to_string()))?;
    if let Value::Object(flags) = flags {
        for (k, v) in flags {
            if !v.is_null() {
                merged.insert(k, v);
            }
        }
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::input(format!("config: {e}")))
}

fn read_object(path: &Path, known: &BTreeSet<String>) -> CliResult<Map<String, Value>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(&path.display().to_string(), e))?;
    let value: Value =
        serde_json::from_str(&text).map_err(|e| CliError::input(format!("config {}: {e}", path.display())))?;
    let Value::Object(raw) = value else {
        return Err(CliError::input(format!("config {}: expected a JSON object", path.display())));
    };
    let mut out = Map::new();
    for (key, v) in raw {
        let key = key.replace('-', "_");
        if !known.contains(&key) || key == "config" {
            return Err(CliError::input(format!("config {}: unknown key {key:?}", path.display())));
        }
        out.insert(key, v);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;
    use std::io::Write;

    #[derive(Debug, Serialize, Deserialize, PartialEq, Default)]
    struct Flags {
        a: Option<f64>,
        b: Option<u64>,
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        c: bool,
    }

    fn known() -> BTreeSet<String> {
        ["a", "b", "c"].iter().map(|s| s.to_string()).collect()
    }

    fn file(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn flags_override_file_values() {
        let f = file(r#"{"a": 1.5, "b": 7, "c": true}"#);
        let cli = Flags {
            a: Some(2.0),
            ..Default::default()
        };
        let merged = layered(&cli, Some(f.path()), &known()).unwrap();
        assert_eq!(
            merged,
            Flags {
                a: Some(2.0),
                b: Some(7),
                c: true
            }
        );
    }

    #[test]
    fn dashed_keys_are_accepted_and_unknown_keys_rejected() {
        let f = file(r#"{"b": 3}"#);
        assert_eq!(layered(&Flags::default(), Some(f.path()), &known()).unwrap().b, Some(3));
        let bad = file(r#"{"d": 1}"#);
        assert!(layered(&Flags::default(), Some(bad.path()), &known()).is_err());
    }

    #[test]
    fn wrong_types_are_input_errors() {
        let f = file(r#"{"b": "seven"}"#);
        let e = layered(&Flags::default(), Some(f.path()), &known()).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }
}
