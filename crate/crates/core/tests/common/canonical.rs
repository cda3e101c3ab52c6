//! A second canonical writer: sorted keys, integers only, no whitespace,
//! escapes limited to quote, backslash and control characters.

use serde_json::Value;

pub fn write(v: &Value) -> Option<String> {
    Some(match v {
        Value::Null => "null".to_owned(),
        Value::Bool(b) => b.to_string(),
        Value::Number(n) => {
            if n.is_f64() {
                return None;
            }
            n.to_string()
        }
        Value::String(s) => string(s),
        Value::Array(a) => {
            let parts: Option<Vec<String>> = a.iter().map(write).collect();
            format!("[{}]", parts?.join(","))
        }
        Value::Object(o) => {
            let mut keys: Vec<&String> = o.keys().collect();
            keys.sort_by_key(|k| k.chars().map(u32::from).collect::<Vec<_>>());
            let mut parts = Vec::new();
            for k in keys {
                parts.push(format!("{}:{}", string(k), write(&o[k])?));
            }
            format!("{{{}}}", parts.join(","))
        }
    })
}

fn string(s: &str) -> String {
    let mut out = String::from("\"");
    for c in s.chars() {
        let code = u32::from(c);
        match c {
            '"' | '\\' => {
                out.push('\\');
                out.push(c);
            }
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            _ if code < 0x20 => out.push_str(&format!("\\u{code:04x}")),
            _ => out.push(c),
        }
    }
    out.push('"');
    out
}
