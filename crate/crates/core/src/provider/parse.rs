use serde::{Deserialize, Serialize};
use serde_json::Value;

/// One element of a completion's JSON answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawSuggestion {
    pub function_name: String,
    pub line_start: i64,
    pub line_end: i64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedCompletion {
    pub suggestions: Vec<RawSuggestion>,
    pub diagnostics: Vec<String>,
}

/// Pull suggestions out of free-form completion text.
///
/// The first JSON array anywhere in the text is used, so code fences and
/// chatter around it are ignored. Elements that lack a string name or
/// integer line bounds are reported and skipped. Never fails.
pub fn parse_completion(text: &str) -> ParsedCompletion {
    let mut out = ParsedCompletion::default();
    let Some(array) = first_array(text) else {
        out.diagnostics.push("no JSON array found in completion".into());
        return out;
    };
    for (i, elem) in array.into_iter().enumerate() {
        match element(&elem) {
            Ok(s) => out.suggestions.push(s),
            Err(why) => out.diagnostics.push(format!("element {i}: {why}")),
        }
    }
    out
}

fn first_array(text: &str) -> Option<Vec<Value>> {
    text.char_indices().filter(|(_, c)| *c == '[').find_map(|(i, _)| {
        let mut stream = serde_json::Deserializer::from_str(&text[i..]).into_iter::<Value>();
        match stream.next() {
            Some(Ok(Value::Array(items))) => Some(items),
            _ => None,
        }
    })
}

fn element(v: &Value) -> Result<RawSuggestion, String> {
    let obj = v.as_object().ok_or_else(|| format!("expected an object, got {v}"))?;
    let name = obj
        .get("function_name")
        .and_then(Value::as_str)
        .ok_or("missing string field function_name")?;
    let line = |key: &str| -> Result<i64, String> {
        let field = obj.get(key).ok_or_else(|| format!("missing field {key}"))?;
        field
            .as_i64()
            .or_else(|| field.as_f64().filter(|f| f.fract() == 0.0 && f.abs() < 1e15).map(|f| f as i64))
            .ok_or_else(|| format!("{key} is not an integer: {field}"))
    };
    Ok(RawSuggestion {
        function_name: name.to_owned(),
        line_start: line("line_start")?,
        line_end: line("line_end")?,
    })
}
