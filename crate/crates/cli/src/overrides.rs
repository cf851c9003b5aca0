//! `--set key=value` overrides applied to JSON documents before they are parsed.

use serde_json::Value;

#[derive(Debug, Clone, PartialEq)]
pub struct Override {
    pub path: Vec<String>,
    pub value: Value,
}

impl std::str::FromStr for Override {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (key, raw) = s.split_once('=').ok_or_else(|| format!("expected key=value, got `{s}`"))?;
        let path: Vec<String> = key.split('.').map(str::to_owned).collect();
        if path.iter().any(|p| p.is_empty()) {
            return Err(format!("empty path segment in `{key}`"));
        }
        // Bare words are strings; everything else is JSON.
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_owned()));
        Ok(Override { path, value })
    }
}

impl Override {
    /// `detector.` keys target the detector settings instead of the scenario.
    pub fn detector(&self) -> Option<&[String]> {
        (self.path[0] == "detector").then(|| &self.path[1..])
    }
}

/// Writes `value` at a dotted path. Numeric segments index arrays; missing
/// object keys are created, so typos surface as unknown-field errors later.
pub fn apply(doc: &mut Value, path: &[String], value: Value) -> Result<(), String> {
    let Some((last, parents)) = path.split_last() else {
        return Err("empty override key".into());
    };
    let mut node = doc;
    for (depth, seg) in parents.iter().enumerate() {
        node = child(node, seg, &path[..=depth])?;
    }
    match node {
        Value::Object(map) => {
            map.insert(last.clone(), value);
        }
        Value::Array(items) => {
            let slot = index(items, last, path)?;
            *slot = value;
        }
        _ => return Err(format!("`{}` is not an object or array", path[..path.len() - 1].join("."))),
    }
    Ok(())
}

fn child<'a>(node: &'a mut Value, seg: &str, at: &[String]) -> Result<&'a mut Value, String> {
    match node {
        Value::Object(map) => Ok(map
            .entry(seg.to_owned())
            .or_insert_with(|| Value::Object(Default::default()))),
        Value::Array(items) => index(items, seg, at),
        _ => Err(format!("`{}` is not an object or array", at[..at.len() - 1].join("."))),
    }
}

fn index<'a>(items: &'a mut [Value], seg: &str, at: &[String]) -> Result<&'a mut Value, String> {
    let len = items.len();
    let i: usize = seg
        .parse()
        .map_err(|_| format!("`{}` indexes an array; expected a number", at.join(".")))?;
    items
        .get_mut(i)
        .ok_or_else(|| format!("`{}` is out of range (length {len})", at.join(".")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn nested_and_indexed() {
        let mut doc = json!({"params": {"r12": 1500.0}, "faults": [{"magnitude": 1.0}]});
        let o: Override = "params.r12=900".parse().unwrap();
        apply(&mut doc, &o.path, o.value).unwrap();
        let o: Override = "faults.0.magnitude=2.5".parse().unwrap();
        apply(&mut doc, &o.path, o.value).unwrap();
        let o: Override = "faults.0.target=De2".parse().unwrap();
        apply(&mut doc, &o.path, o.value).unwrap();
        assert_eq!(doc, json!({"params": {"r12": 900}, "faults": [{"magnitude": 2.5, "target": "De2"}]}));
        let o: Override = "faults.3.onset=1".parse().unwrap();
        assert!(apply(&mut doc, &o.path, o.value).is_err());
        assert!("novalue".parse::<Override>().is_err());
        let o: Override = "detector.k=1".parse().unwrap();
        assert_eq!(o.detector().unwrap(), ["k".to_string()]);
    }
}
