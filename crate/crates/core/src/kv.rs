//! Flat `key = value` text, one entry per line, `#` starts a comment.

use std::collections::BTreeMap;

pub fn parse(text: &str) -> Result<BTreeMap<String, String>, String> {
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected key = value", lineno + 1))?;
        let key = k.trim();
        if key.is_empty() {
            return Err(format!("line {}: empty key", lineno + 1));
        }
        if out.insert(key.to_string(), v.trim().to_string()).is_some() {
            return Err(format!("line {}: duplicate key {key}", lineno + 1));
        }
    }
    Ok(out)
}

pub fn render(entries: &BTreeMap<String, String>) -> String {
    entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

pub fn list<T: std::str::FromStr>(value: &str) -> Result<Vec<T>, String> {
    value
        .split(',')
        .map(|s| s.trim().parse::<T>().map_err(|_| format!("bad list entry {s:?}")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_errors() {
        let m = parse("a = 1\n# note\n b=two # trailing\n").unwrap();
        assert_eq!(m["a"], "1");
        assert_eq!(m["b"], "two");
        assert_eq!(parse(&render(&m)).unwrap(), m);
        assert!(parse("a = 1\na = 2").is_err());
        assert!(parse("nonsense").is_err());
        assert_eq!(list::<f64>("1, 2.5").unwrap(), vec![1.0, 2.5]);
    }
}
