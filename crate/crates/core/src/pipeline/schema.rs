//! Validation against the subset of JSON Schema (draft-07) used by the
//! report schema: `type`, `required`, `properties`, `items`, `enum`,
//! `oneOf`, local `$ref`, numeric bounds, `minItems`/`maxItems` and
//! `format: date`.

use serde_json::Value;

/// Returns every violation as `pointer: message`. Empty means valid.
pub fn validate(schema: &Value, instance: &Value) -> Vec<String> {
    let mut errors = Vec::new();
    check(schema, schema, instance, "", &mut errors);
    errors
}

fn resolve<'a>(root: &'a Value, reference: &str) -> Option<&'a Value> {
    root.pointer(reference.strip_prefix('#')?)
}

fn type_matches(name: &str, v: &Value) -> bool {
    match name {
        "null" => v.is_null(),
        "boolean" => v.is_boolean(),
        "object" => v.is_object(),
        "array" => v.is_array(),
        "string" => v.is_string(),
        "number" => v.is_number(),
        "integer" => v.is_i64() || v.is_u64(),
        _ => false,
    }
}

fn check(root: &Value, schema: &Value, v: &Value, at: &str, errors: &mut Vec<String>) {
    let Some(obj) = schema.as_object() else {
        return;
    };
    if let Some(r) = obj.get("$ref").and_then(Value::as_str) {
        match resolve(root, r) {
            Some(target) => check(root, target, v, at, errors),
            None => errors.push(format!("{at}: unresolvable $ref {r}")),
        }
        return;
    }
    if let Some(t) = obj.get("type") {
        let ok = match t {
            Value::String(name) => type_matches(name, v),
            Value::Array(names) => names
                .iter()
                .filter_map(Value::as_str)
                .any(|n| type_matches(n, v)),
            _ => true,
        };
        if !ok {
            errors.push(format!("{at}: expected type {t}, got {v}"));
            return;
        }
    }
    if let Some(options) = obj.get("enum").and_then(Value::as_array) {
        if !options.contains(v) {
            errors.push(format!(
                "{at}: {v} not one of {}",
                Value::Array(options.clone())
            ));
        }
    }
    if let Some(branches) = obj.get("oneOf").and_then(Value::as_array) {
        let passing = branches
            .iter()
            .filter(|b| {
                let mut sink = Vec::new();
                check(root, b, v, at, &mut sink);
                sink.is_empty()
            })
            .count();
        if passing != 1 {
            errors.push(format!(
                "{at}: matches {passing} oneOf branches, expected 1"
            ));
        }
    }
    if let Some(n) = v.as_f64() {
        let bound = |k: &str| obj.get(k).and_then(Value::as_f64);
        if bound("minimum").is_some_and(|m| n < m) {
            errors.push(format!("{at}: {n} below minimum"));
        }
        if bound("maximum").is_some_and(|m| n > m) {
            errors.push(format!("{at}: {n} above maximum"));
        }
        if bound("exclusiveMinimum").is_some_and(|m| n <= m) {
            errors.push(format!("{at}: {n} not above exclusive minimum"));
        }
    }
    if let (Some("date"), Some(s)) = (obj.get("format").and_then(Value::as_str), v.as_str()) {
        if chrono::NaiveDate::parse_from_str(s, "%Y-%m-%d").is_err() {
            errors.push(format!("{at}: '{s}' is not a YYYY-MM-DD date"));
        }
    }
    if let Some(map) = v.as_object() {
        if let Some(req) = obj.get("required").and_then(Value::as_array) {
            for key in req.iter().filter_map(Value::as_str) {
                if !map.contains_key(key) {
                    errors.push(format!("{at}: missing required key '{key}'"));
                }
            }
        }
        if let Some(props) = obj.get("properties").and_then(Value::as_object) {
            for (key, sub) in props {
                if let Some(child) = map.get(key) {
                    check(root, sub, child, &format!("{at}/{key}"), errors);
                }
            }
        }
    }
    if let Some(items) = v.as_array() {
        let len = items.len() as u64;
        if obj
            .get("minItems")
            .and_then(Value::as_u64)
            .is_some_and(|m| len < m)
        {
            errors.push(format!("{at}: fewer than minItems"));
        }
        if obj
            .get("maxItems")
            .and_then(Value::as_u64)
            .is_some_and(|m| len > m)
        {
            errors.push(format!("{at}: more than maxItems"));
        }
        if let Some(item_schema) = obj.get("items") {
            for (i, item) in items.iter().enumerate() {
                check(root, item_schema, item, &format!("{at}/{i}"), errors);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn checks_types_required_and_bounds() {
        let schema = json!({
            "type": "object",
            "required": ["a", "b"],
            "properties": {
                "a": {"type": ["number", "null"], "minimum": 0, "maximum": 1},
                "b": {"$ref": "#/definitions/pair"},
                "c": {"type": "string", "enum": ["x", "y"]},
                "d": {"type": "string", "format": "date"},
                "e": {"oneOf": [{"type": "null"}, {"type": "integer", "exclusiveMinimum": 0}]}
            },
            "definitions": {"pair": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}}
        });
        assert!(validate(
            &schema,
            &json!({"a": 0.5, "b": [1, 2], "c": "x", "d": "2007-10-13", "e": 3})
        )
        .is_empty());
        assert!(validate(&schema, &json!({"a": null, "b": [1.5, -2], "e": null})).is_empty());
        let bad = [
            json!({"b": [1, 2]}),
            json!({"a": 2, "b": [1, 2]}),
            json!({"a": "0.5", "b": [1, 2]}),
            json!({"a": 0, "b": [1]}),
            json!({"a": 0, "b": [1, "2"]}),
            json!({"a": 0, "b": [1, 2], "c": "z"}),
            json!({"a": 0, "b": [1, 2], "d": "13/10/2007"}),
            json!({"a": 0, "b": [1, 2], "e": 0}),
            json!([]),
        ];
        for inst in bad {
            assert!(!validate(&schema, &inst).is_empty(), "{inst}");
        }
    }
}
