//! Flat `key=value` text files: one key per line, `#` comments, blank lines ignored.

use std::str::FromStr;

use crate::error::{Result, TensorError};

/// Splits `text` into `(key, value)` pairs, rejecting malformed and duplicate keys.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| TensorError::Config(format!("line {}: expected key=value, got `{line}`", n + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(TensorError::Config(format!("line {}: empty key", n + 1)));
        }
        if out.iter().any(|(k, _)| k == key) {
            return Err(TensorError::Config(format!("line {}: duplicate key `{key}`", n + 1)));
        }
        out.push((key.to_string(), value.to_string()));
    }
    Ok(out)
}

pub fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| TensorError::Config(format!("invalid value `{value}` for `{key}`")))
}

/// Comma-separated list such as `30,30,30`.
pub fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(|s| parse_value(key, s.trim()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_pairs_and_comments() {
        let kv = parse_key_values("# header\n a = 1 \n\nb=x,y\n").unwrap();
        assert_eq!(kv, vec![("a".into(), "1".into()), ("b".into(), "x,y".into())]);
        assert_eq!(parse_list::<usize>("shape", "3, 4,5").unwrap(), vec![3, 4, 5]);
    }

    #[test]
    fn rejects_malformed() {
        assert!(parse_key_values("novalue").is_err());
        assert!(parse_key_values("=3").is_err());
        assert!(parse_key_values("a=1\na=2").is_err());
        assert!(parse_value::<f64>("p", "abc").is_err());
        assert!(parse_list::<usize>("shape", "3,,4").is_err());
    }
}
