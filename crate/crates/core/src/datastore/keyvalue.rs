use crate::error::{Error, Result};

/// Parses `key=value` lines. Blank lines and `#` comments are ignored;
/// duplicate keys are an error.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::Format(format!("line {}: expected key=value, got {line:?}", no + 1))
        })?;
        let k = k.trim().to_string();
        if out.iter().any(|(existing, _)| *existing == k) {
            return Err(Error::Format(format!("line {}: duplicate key {k:?}", no + 1)));
        }
        out.push((k, v.trim().to_string()));
    }
    Ok(out)
}

pub fn write_key_values<'a>(pairs: impl IntoIterator<Item = (&'a str, String)>) -> String {
    let mut s = String::new();
    for (k, v) in pairs {
        s.push_str(k);
        s.push('=');
        s.push_str(&v);
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_rejects() {
        let kv = parse_key_values("# c\na = 1\n\nb=two\n").unwrap();
        assert_eq!(kv, vec![("a".into(), "1".into()), ("b".into(), "two".into())]);
        assert!(parse_key_values("novalue\n").is_err());
        assert!(parse_key_values("a=1\na=2\n").is_err());
    }
}
