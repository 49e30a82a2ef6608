//! Result records printed as `key=value` lines or as one JSON object.

use serde_json::{Map, Number, Value};

#[derive(Debug, Default)]
pub struct Output {
    fields: Vec<(String, Value)>,
    /// Shown only in JSON mode.
    extra: Vec<(String, Value)>,
}

/// JSON value for a float; non-finite values become strings.
pub fn num(v: f64) -> Value {
    Number::from_f64(v).map_or_else(|| Value::String(fmt_f64(v)), Value::Number)
}

pub fn fmt_f64(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

impl Output {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn float(&mut self, key: impl Into<String>, v: f64) -> &mut Self {
        self.fields.push((key.into(), num(v)));
        self
    }

    pub fn int(&mut self, key: impl Into<String>, v: usize) -> &mut Self {
        self.fields.push((key.into(), Value::from(v)));
        self
    }

    pub fn text(&mut self, key: impl Into<String>, v: impl Into<String>) -> &mut Self {
        self.fields.push((key.into(), Value::String(v.into())));
        self
    }

    pub fn flag(&mut self, key: impl Into<String>, v: bool) -> &mut Self {
        self.fields.push((key.into(), Value::Bool(v)));
        self
    }

    pub fn json_only(&mut self, key: impl Into<String>, v: Value) -> &mut Self {
        self.extra.push((key.into(), v));
        self
    }

    pub fn render(&self, json: bool) -> String {
        if json {
            let mut map = Map::new();
            for (k, v) in self.fields.iter().chain(&self.extra) {
                map.insert(k.clone(), v.clone());
            }
            let mut s = Value::Object(map).to_string();
            s.push('\n');
            s
        } else {
            let mut s = String::new();
            for (k, v) in &self.fields {
                s.push_str(k);
                s.push('=');
                s.push_str(&plain(v));
                s.push('\n');
            }
            s
        }
    }
}

fn plain(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Number(n) => match (n.as_u64(), n.as_i64(), n.as_f64()) {
            (Some(u), _, _) => u.to_string(),
            (None, Some(i), _) => i.to_string(),
            (None, None, Some(f)) => fmt_f64(f),
            _ => n.to_string(),
        },
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_and_json() {
        let mut o = Output::new();
        o.float("distance", 0.0)
            .int("n", 3)
            .float("big", f64::INFINITY)
            .text("label", "a b");
        assert_eq!(o.render(false), "distance=0\nn=3\nbig=inf\nlabel=a b\n");
        let v: Value = serde_json::from_str(&o.render(true)).unwrap();
        assert_eq!(v["distance"], 0.0);
        assert_eq!(v["big"], "inf");
        assert_eq!(v["label"], "a b");
    }
}
