//! Target registry: a local text file, one `locator type name` triple per
//! line. The name may contain spaces; `#` starts a comment.

use thiserror::Error;

use crate::transport::TransportType;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TargetEntry {
    pub locator: String,
    pub transport: TransportType,
    pub name: String,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RegistryError {
    #[error("line {0}: expected `locator type name`")]
    Malformed(usize),
    #[error("line {line}: unknown transport type `{word}`")]
    UnknownTransport { line: usize, word: String },
    #[error("line {line}: duplicate locator `{locator}`")]
    DuplicateLocator { line: usize, locator: String },
}

pub fn parse_registry(text: &str) -> Result<Vec<TargetEntry>, RegistryError> {
    let mut entries: Vec<TargetEntry> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut parts = content.splitn(3, char::is_whitespace);
        let locator = parts.next().filter(|s| !s.is_empty());
        let transport = parts.next().filter(|s| !s.is_empty());
        let name = parts.next().map(str::trim).filter(|s| !s.is_empty());
        let (Some(locator), Some(transport), Some(name)) = (locator, transport, name) else {
            return Err(RegistryError::Malformed(line));
        };
        let transport = TransportType::from_str_ci(transport).ok_or_else(|| {
            RegistryError::UnknownTransport { line, word: transport.to_string() }
        })?;
        if entries.iter().any(|e| e.locator == locator) {
            return Err(RegistryError::DuplicateLocator { line, locator: locator.to_string() });
        }
        entries.push(TargetEntry {
            locator: locator.to_string(),
            transport,
            name: name.to_string(),
        });
    }
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_triples_with_spaced_names() {
        let entries = parse_registry(
            "# fleet\n127.0.0.1:7701 tcp Portenta H7\nsim-a loopback Portenta H7\n",
        )
        .unwrap();
        assert_eq!(entries.len(), 2);
        assert_eq!(entries[0].name, "Portenta H7");
        assert_eq!(entries[0].transport, TransportType::Tcp);
        assert_eq!(entries[1].transport, TransportType::Loopback);
    }

    #[test]
    fn duplicate_locator_rejected() {
        let err = parse_registry("a tcp one\na tcp two\n").unwrap_err();
        assert_eq!(err, RegistryError::DuplicateLocator { line: 2, locator: "a".into() });
    }

    #[test]
    fn empty_registry_is_ok() {
        assert!(parse_registry("").unwrap().is_empty());
    }
}
