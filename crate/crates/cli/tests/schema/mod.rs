//! Validator for the JSON Schema keywords used by `report.schema.json`.
//! Unknown keywords panic so the schema cannot silently outgrow it.

use serde_json::Value;

pub struct Validator {
    root: Value,
}

impl Validator {
    pub fn new(root: Value) -> Self {
        Self { root }
    }

    pub fn errors(&self, instance: &Value) -> Vec<String> {
        let mut out = Vec::new();
        self.check(&self.root, instance, "$", &mut out);
        out
    }

    fn resolve(&self, reference: &str) -> &Value {
        let path = reference.strip_prefix("#/").unwrap_or_else(|| panic!("only local refs supported: {reference}"));
        path.split('/').fold(&self.root, |v, key| &v[key])
    }

    fn valid(&self, schema: &Value, instance: &Value) -> bool {
        let mut errs = Vec::new();
        self.check(schema, instance, "$", &mut errs);
        errs.is_empty()
    }

    fn check(&self, schema: &Value, inst: &Value, at: &str, out: &mut Vec<String>) {
        let Some(obj) = schema.as_object() else {
            panic!("schema at {at} is not an object");
        };
        for (key, sub) in obj {
            match key.as_str() {
                "$schema" | "title" | "$defs" | "then" | "else" => {}
                "$ref" => self.check(self.resolve(sub.as_str().unwrap()), inst, at, out),
                "type" => {
                    let types: Vec<&str> = match sub {
                        Value::String(s) => vec![s.as_str()],
                        Value::Array(a) => a.iter().map(|t| t.as_str().unwrap()).collect(),
                        _ => panic!("bad type keyword"),
                    };
                    if !types.iter().any(|t| type_matches(t, inst)) {
                        out.push(format!("{at}: expected type {types:?}, got {inst}"));
                    }
                }
                "enum" => {
                    if !sub.as_array().unwrap().contains(inst) {
                        out.push(format!("{at}: {inst} not in {sub}"));
                    }
                }
                "const" => {
                    if sub != inst {
                        out.push(format!("{at}: {inst} != {sub}"));
                    }
                }
                "required" => {
                    if let Some(o) = inst.as_object() {
                        for r in sub.as_array().unwrap() {
                            if !o.contains_key(r.as_str().unwrap()) {
                                out.push(format!("{at}: missing {r}"));
                            }
                        }
                    }
                }
                "properties" => {
                    if let Some(o) = inst.as_object() {
                        for (name, s) in sub.as_object().unwrap() {
                            if let Some(v) = o.get(name) {
                                self.check(s, v, &format!("{at}.{name}"), out);
                            }
                        }
                    }
                }
                "additionalProperties" => {
                    if let Some(o) = inst.as_object() {
                        let known = obj.get("properties").and_then(Value::as_object);
                        for (name, v) in o {
                            if known.is_some_and(|k| k.contains_key(name)) {
                                continue;
                            }
                            match sub {
                                Value::Bool(false) => out.push(format!("{at}: unexpected property {name}")),
                                Value::Bool(true) => {}
                                s => self.check(s, v, &format!("{at}.{name}"), out),
                            }
                        }
                    }
                }
                "items" => {
                    if let Some(a) = inst.as_array() {
                        for (i, v) in a.iter().enumerate() {
                            self.check(sub, v, &format!("{at}[{i}]"), out);
                        }
                    }
                }
                "minItems" | "maxItems" => {
                    if let Some(a) = inst.as_array() {
                        let bound = sub.as_u64().unwrap() as usize;
                        let ok = if key == "minItems" { a.len() >= bound } else { a.len() <= bound };
                        if !ok {
                            out.push(format!("{at}: {key} {bound} violated by length {}", a.len()));
                        }
                    }
                }
                "minimum" | "maximum" | "exclusiveMinimum" | "exclusiveMaximum" => {
                    if let Some(x) = inst.as_f64() {
                        let b = sub.as_f64().unwrap();
                        let ok = match key.as_str() {
                            "minimum" => x >= b,
                            "maximum" => x <= b,
                            "exclusiveMinimum" => x > b,
                            _ => x < b,
                        };
                        if !ok {
                            out.push(format!("{at}: {x} violates {key} {b}"));
                        }
                    }
                }
                "allOf" => {
                    for s in sub.as_array().unwrap() {
                        self.check(s, inst, at, out);
                    }
                }
                "not" => {
                    if self.valid(sub, inst) {
                        out.push(format!("{at}: matches a forbidden schema {sub}"));
                    }
                }
                "if" => {
                    let branch = if self.valid(sub, inst) { obj.get("then") } else { obj.get("else") };
                    if let Some(b) = branch {
                        self.check(b, inst, at, out);
                    }
                }
                other => panic!("unsupported schema keyword {other:?} at {at}"),
            }
        }
    }
}

fn type_matches(t: &str, v: &Value) -> bool {
    match t {
        "object" => v.is_object(),
        "array" => v.is_array(),
        "string" => v.is_string(),
        "number" => v.is_number(),
        "integer" => v.is_u64() || v.is_i64(),
        "boolean" => v.is_boolean(),
        "null" => v.is_null(),
        other => panic!("unknown type {other}"),
    }
}
