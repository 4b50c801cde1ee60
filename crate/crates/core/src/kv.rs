//! Flat `key=value` text, used for instance metadata, reports and CLI config.

use std::collections::BTreeMap;

/// Parses `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_flat(text: &str) -> Result<BTreeMap<String, String>, String> {
    let mut map = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let body = line.trim();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        let (k, v) = body.split_once('=').ok_or_else(|| format!("line {}: expected key=value", idx + 1))?;
        let key = k.trim();
        if key.is_empty() {
            return Err(format!("line {}: empty key", idx + 1));
        }
        map.insert(key.to_string(), v.trim().to_string());
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn skips_comments_and_blanks() {
        let m = parse_flat("# header\n\na = 1\nb=two words\n").unwrap();
        assert_eq!(m["a"], "1");
        assert_eq!(m["b"], "two words");
        assert!(parse_flat("novalue\n").is_err());
    }
}
