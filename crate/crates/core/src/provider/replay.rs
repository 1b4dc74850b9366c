use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::{CompletionRequest, PromptSpec, Provider, ProviderConfig, ProviderError};

/// Recorded completions for one request, stored as `<digest>.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fixture {
    pub digest: String,
    pub prompt_text: String,
    pub completions: Vec<String>,
}

impl Fixture {
    /// Fixture answering `prompt` under `config` with the given texts.
    pub fn for_prompt(prompt: &PromptSpec, config: &ProviderConfig, completions: Vec<String>) -> Self {
        let request = CompletionRequest::new(prompt, config);
        Fixture { digest: request.digest, prompt_text: request.prompt_text, completions }
    }

    pub fn path_in(dir: &Path, digest: &str) -> PathBuf {
        dir.join(format!("{digest}.json"))
    }

    pub fn load(dir: &Path, digest: &str) -> Result<Option<Fixture>, ProviderError> {
        let path = Self::path_in(dir, digest);
        match std::fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text)
                .map(Some)
                .map_err(|e| ProviderError::Io(format!("{}: {e}", path.display()))),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(ProviderError::Io(format!("{}: {e}", path.display()))),
        }
    }

    pub fn save(&self, dir: &Path) -> Result<PathBuf, ProviderError> {
        std::fs::create_dir_all(dir).map_err(|e| ProviderError::Io(e.to_string()))?;
        let path = Self::path_in(dir, &self.digest);
        let text = serde_json::to_string_pretty(self).expect("serializable") + "\n";
        std::fs::write(&path, text).map_err(|e| ProviderError::Io(format!("{}: {e}", path.display())))?;
        Ok(path)
    }
}

/// Serves completions from fixture files; iteration `i` gets completion `i`.
pub struct ReplayProvider {
    dir: PathBuf,
    cache: Mutex<HashMap<String, Arc<Fixture>>>,
}

impl ReplayProvider {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        ReplayProvider { dir: dir.into(), cache: Mutex::new(HashMap::new()) }
    }

    fn fixture(&self, digest: &str) -> Result<Arc<Fixture>, ProviderError> {
        if let Some(f) = self.cache.lock().unwrap().get(digest) {
            return Ok(Arc::clone(f));
        }
        let f = Fixture::load(&self.dir, digest)?.ok_or_else(|| ProviderError::MissingFixture(digest.to_owned()))?;
        let f = Arc::new(f);
        self.cache.lock().unwrap().insert(digest.to_owned(), Arc::clone(&f));
        Ok(f)
    }
}

impl Provider for ReplayProvider {
    fn id(&self) -> &str {
        "replay"
    }

    fn complete(&self, request: &CompletionRequest, iteration: u32) -> Result<String, ProviderError> {
        let f = self.fixture(&request.digest)?;
        f.completions
            .get(iteration as usize)
            .cloned()
            .ok_or_else(|| ProviderError::FixtureExhausted { digest: request.digest.clone(), iteration })
    }
}

/// Model name and completions by iteration, per request digest.
type Recorded = BTreeMap<String, (String, BTreeMap<u32, String>)>;

/// Forwards to another provider and keeps every successful completion so it
/// can be written out as replay fixtures.
pub struct RecordingProvider<P> {
    inner: P,
    id: String,
    seen: Mutex<Recorded>,
}

impl<P: Provider> RecordingProvider<P> {
    pub fn new(inner: P) -> Self {
        let id = format!("recording:{}", inner.id());
        RecordingProvider { inner, id, seen: Mutex::new(BTreeMap::new()) }
    }

    /// Write one fixture per request. Failed iterations are left out, so the
    /// stored completions are the successful ones in iteration order.
    pub fn persist(&self, dir: &Path) -> Result<Vec<PathBuf>, ProviderError> {
        let seen = self.seen.lock().unwrap();
        seen.iter()
            .map(|(digest, (prompt_text, texts))| {
                Fixture {
                    digest: digest.clone(),
                    prompt_text: prompt_text.clone(),
                    completions: texts.values().cloned().collect(),
                }
                .save(dir)
            })
            .collect()
    }
}

impl<P: Provider> Provider for RecordingProvider<P> {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, request: &CompletionRequest, iteration: u32) -> Result<String, ProviderError> {
        let text = self.inner.complete(request, iteration)?;
        let mut seen = self.seen.lock().unwrap();
        let entry = seen
            .entry(request.digest.clone())
            .or_insert_with(|| (request.prompt_text.clone(), BTreeMap::new()));
        entry.1.insert(iteration, text.clone());
        Ok(text)
    }
}
