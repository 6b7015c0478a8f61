//! Scenario files: JSON parsing, rendering and dotted-key overrides.

use std::fs;
use std::path::Path;

use crowdkin_core::scenario::Scenario;
use serde_json::Value;

/// Errors raised while loading or adjusting a scenario.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

impl ConfigError {
    fn invalid(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Invalid {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Field path of the offending value, if known.
    pub fn path(&self) -> Option<&str> {
        match self {
            ConfigError::Invalid { path, .. } => Some(path),
            ConfigError::Read { .. } => None,
        }
    }
}

impl From<crowdkin_core::Error> for ConfigError {
    fn from(e: crowdkin_core::Error) -> Self {
        match e {
            crowdkin_core::Error::Validation { path, message } => {
                ConfigError::Invalid { path, message }
            }
            other => ConfigError::invalid("", other.to_string()),
        }
    }
}

/// Parses a scenario document without validating it.
pub fn parse(text: &str) -> Result<Scenario, ConfigError> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| ConfigError::invalid("", e.to_string()))?;
    from_value(value)
}

fn from_value(value: Value) -> Result<Scenario, ConfigError> {
    serde_json::from_value(value).map_err(|e| ConfigError::invalid("", e.to_string()))
}

/// Pretty-printed JSON form of `scenario`.
pub fn render(scenario: &Scenario) -> String {
    serde_json::to_string_pretty(scenario).expect("scenario serialises")
}

pub fn load(path: &Path) -> Result<Scenario, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.display().to_string(),
        source,
    })?;
    parse(&text)
}

#[derive(Debug, Clone, PartialEq)]
enum Segment {
    Key(String),
    Index(usize),
}

fn split_path(key: &str) -> Result<Vec<Segment>, ConfigError> {
    let bad = || ConfigError::invalid(key, "malformed override key");
    let mut out = Vec::new();
    for part in key.split('.') {
        let (name, mut rest) = match part.find('[') {
            Some(i) => (&part[..i], &part[i..]),
            None => (part, ""),
        };
        if name.is_empty() {
            return Err(bad());
        }
        out.push(Segment::Key(name.to_string()));
        while !rest.is_empty() {
            let close = rest.find(']').ok_or_else(bad)?;
            if !rest.starts_with('[') {
                return Err(bad());
            }
            let index = rest[1..close].parse().map_err(|_| bad())?;
            out.push(Segment::Index(index));
            rest = &rest[close + 1..];
        }
    }
    Ok(out)
}

/// Sets `key` (e.g. `groups[0].alpha`) to `value` inside a JSON tree.
/// The value is read as JSON when possible and as a string otherwise.
pub fn set_path(root: &mut Value, key: &str, value: &str) -> Result<(), ConfigError> {
    let segments = split_path(key)?;
    let parsed = serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.to_string()));
    let missing = || ConfigError::invalid(key, "no such field");
    let mut node = root;
    for (n, seg) in segments.iter().enumerate() {
        let last = n + 1 == segments.len();
        node = match seg {
            Segment::Key(k) => {
                let obj = node.as_object_mut().ok_or_else(missing)?;
                if last {
                    obj.insert(k.clone(), parsed);
                    return Ok(());
                }
                obj.get_mut(k).ok_or_else(missing)?
            }
            Segment::Index(i) => {
                let slot = node
                    .as_array_mut()
                    .and_then(|a| a.get_mut(*i))
                    .ok_or_else(missing)?;
                if last {
                    *slot = parsed;
                    return Ok(());
                }
                slot
            }
        };
    }
    Err(missing())
}

/// Applies `key=value` overrides to `scenario`.
pub fn apply_overrides<S: AsRef<str>>(
    scenario: &Scenario,
    overrides: &[S],
) -> Result<Scenario, ConfigError> {
    if overrides.is_empty() {
        return Ok(scenario.clone());
    }
    let mut value = serde_json::to_value(scenario).expect("scenario serialises");
    for o in overrides {
        let o = o.as_ref();
        let (key, val) = o
            .split_once('=')
            .ok_or_else(|| ConfigError::invalid(o, "override must have the form key=value"))?;
        set_path(&mut value, key.trim(), val.trim())?;
    }
    from_value(value)
}

/// Validates `scenario`, mapping failures to [`ConfigError::Invalid`].
pub fn validate(scenario: &Scenario) -> Result<(), ConfigError> {
    scenario.validate().map_err(ConfigError::from)
}
