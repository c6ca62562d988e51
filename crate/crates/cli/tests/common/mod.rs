//! Helpers shared by the binary-level test targets.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

pub fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_nrchain"));
    cmd.env_remove("NRCHAIN_OUT").env("RUST_LOG", "warn");
    cmd
}

/// Runs `nrchain --out <out> <args>` and returns the raw output.
pub fn run(out: &Path, args: &[&str]) -> Output {
    bin().arg("--out").arg(out).args(args).output().expect("spawn nrchain")
}

/// Like [`run`] but panics with stderr on a non-zero exit.
pub fn run_ok(out: &Path, args: &[&str]) -> Output {
    let o = run(out, args);
    assert!(o.status.success(), "nrchain {args:?} failed:\n{}", String::from_utf8_lossy(&o.stderr));
    o
}

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn read_json(path: &Path) -> Value {
    let text = std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    serde_json::from_str(&text).unwrap()
}

pub fn write_csv(path: &Path, rows: &[&str]) {
    let mut text = String::from("x,y,timestamp,category\n");
    for r in rows {
        text.push_str(r);
        text.push('\n');
    }
    std::fs::write(path, text).unwrap();
}

pub fn report_schema() -> Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schema/report.schema.json");
    read_json(&path)
}

/// Checks `value` against the JSON-schema keywords the report schema
/// uses; returns one message per failure.
pub fn schema_errors(value: &Value, schema: &Value) -> Vec<String> {
    let mut errors = Vec::new();
    check(value, schema, schema, "$", &mut errors);
    errors
}

fn type_matches(value: &Value, ty: &str) -> bool {
    match ty {
        "object" => value.is_object(),
        "array" => value.is_array(),
        "string" => value.is_string(),
        "boolean" => value.is_boolean(),
        "null" => value.is_null(),
        "number" => value.is_number(),
        "integer" => value.as_f64().is_some_and(|f| f.fract() == 0.0),
        other => panic!("unknown schema type {other}"),
    }
}

fn check(value: &Value, schema: &Value, root: &Value, at: &str, errors: &mut Vec<String>) {
    let Some(s) = schema.as_object() else {
        if schema == &Value::Bool(false) {
            errors.push(format!("{at}: not allowed"));
        }
        return;
    };
    for key in s.keys() {
        let known = [
            "$schema", "$id", "$defs", "$ref", "title", "description", "type", "required", "properties",
            "additionalProperties", "items", "minimum", "maximum", "exclusiveMinimum", "const", "enum", "minLength",
            "minProperties", "oneOf", "propertyNames",
        ];
        assert!(known.contains(&key.as_str()), "schema keyword {key} not supported by the test checker");
    }
    if let Some(r) = s.get("$ref").and_then(Value::as_str) {
        let target = r
            .strip_prefix("#/")
            .expect("local ref")
            .split('/')
            .fold(root, |node, part| &node[part]);
        check(value, target, root, at, errors);
    }
    if let Some(ty) = s.get("type") {
        let ok = match ty {
            Value::String(t) => type_matches(value, t),
            Value::Array(ts) => ts.iter().any(|t| type_matches(value, t.as_str().unwrap())),
            _ => panic!("bad type keyword"),
        };
        if !ok {
            errors.push(format!("{at}: expected type {ty}, got {value}"));
            return;
        }
    }
    if let Some(c) = s.get("const") {
        if value != c {
            errors.push(format!("{at}: expected {c}"));
        }
    }
    if let Some(Value::Array(options)) = s.get("enum") {
        if !options.contains(value) {
            errors.push(format!("{at}: {value} not in enum"));
        }
    }
    if let Some(x) = value.as_f64() {
        if let Some(m) = s.get("minimum").and_then(Value::as_f64) {
            if x < m {
                errors.push(format!("{at}: {x} < {m}"));
            }
        }
        if let Some(m) = s.get("maximum").and_then(Value::as_f64) {
            if x > m {
                errors.push(format!("{at}: {x} > {m}"));
            }
        }
        if let Some(m) = s.get("exclusiveMinimum").and_then(Value::as_f64) {
            if x <= m {
                errors.push(format!("{at}: {x} <= {m}"));
            }
        }
    }
    if let (Some(text), Some(m)) = (value.as_str(), s.get("minLength").and_then(Value::as_u64)) {
        if (text.chars().count() as u64) < m {
            errors.push(format!("{at}: shorter than {m}"));
        }
    }
    if let Some(Value::Array(options)) = s.get("oneOf") {
        let matching = options
            .iter()
            .filter(|o| {
                let mut e = Vec::new();
                check(value, o, root, at, &mut e);
                e.is_empty()
            })
            .count();
        if matching != 1 {
            errors.push(format!("{at}: matches {matching} oneOf branches"));
        }
    }
    if let (Some(items), Some(arr)) = (s.get("items"), value.as_array()) {
        for (i, v) in arr.iter().enumerate() {
            check(v, items, root, &format!("{at}[{i}]"), errors);
        }
    }
    let Some(obj) = value.as_object() else { return };
    if let Some(Value::Array(req)) = s.get("required") {
        for r in req {
            let r = r.as_str().unwrap();
            if !obj.contains_key(r) {
                errors.push(format!("{at}: missing {r}"));
            }
        }
    }
    if let Some(m) = s.get("minProperties").and_then(Value::as_u64) {
        if (obj.len() as u64) < m {
            errors.push(format!("{at}: fewer than {m} properties"));
        }
    }
    let props = s.get("properties").and_then(Value::as_object);
    for (k, v) in obj {
        let path = format!("{at}.{k}");
        if let Some(names) = s.get("propertyNames") {
            check(&Value::String(k.clone()), names, root, &path, errors);
        }
        match props.and_then(|p| p.get(k)) {
            Some(sub) => check(v, sub, root, &path, errors),
            None => {
                if let Some(extra) = s.get("additionalProperties") {
                    check(v, extra, root, &path, errors);
                }
            }
        }
    }
}
