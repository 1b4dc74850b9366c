//! Turn hand-written completions into replay fixtures.
//!
//! Usage: build_fixtures <completions.json> <fixture-dir>
//!
//! The completions file is a JSON list of `{file, method, completions}`;
//! `file` is relative to the completions file. Fixtures are keyed by the
//! digest of the bundled prompt under the default provider settings.

use std::path::PathBuf;
use std::sync::Arc;

use emx_core::provider::{Fixture, PromptTemplate, ProviderConfig};
use emx_core::source::{locate_method, parse_unit, MethodLocator};
use serde::Deserialize;

#[derive(Deserialize)]
struct Item {
    file: PathBuf,
    method: String,
    completions: Vec<String>,
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let [spec, out] = args.as_slice() else {
        eprintln!("usage: build_fixtures <completions.json> <fixture-dir>");
        std::process::exit(2);
    };
    let spec = PathBuf::from(spec);
    let base = spec.parent().unwrap().to_owned();
    let items: Vec<Item> = serde_json::from_str(&std::fs::read_to_string(&spec).unwrap()).unwrap();
    let template = PromptTemplate::default();
    let config = ProviderConfig::default();
    for item in items {
        let path = base.join(&item.file);
        let text = std::fs::read_to_string(&path).unwrap();
        let unit = Arc::new(parse_unit(&text, &path).unwrap());
        let locator: MethodLocator = item.method.parse().unwrap();
        let model = locate_method(&unit, &locator).unwrap();
        let prompt = template.build(&model).unwrap();
        let fixture = Fixture::for_prompt(&prompt, &config, item.completions);
        let written = fixture.save(std::path::Path::new(out)).unwrap();
        println!("{} {} -> {}", item.file.display(), item.method, written.display());
    }
}
