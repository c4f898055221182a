use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use erkang_core::consult::{Inquiry, QuestionTemplates, SlotLexicon};
use erkang_core::engine::{Engine, EngineConfig};
use erkang_core::format::HighlightLexicon;
use erkang_core::knowledge::{load_kb, KnowledgeStore};
use erkang_core::rag::{
    BackendProfile, GenerationBackend, HttpChatBackend, HttpChatConfig, MockBackend,
};
use erkang_core::safety::{EmergencyDirectory, SafetyFilter};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parsing config {path}: {source}")]
    Parse {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error("{what} {path} does not exist")]
    MissingPath { what: &'static str, path: PathBuf },
    #[error("loading {what}: {message}")]
    Load { what: &'static str, message: String },
    #[error("backend profile http_chat_completion needs backend.url")]
    MissingBackendUrl,
    #[error("starting engine: {0}")]
    Engine(#[from] erkang_core::engine::EngineError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendSettings {
    pub profile: BackendProfile,
    pub url: String,
    pub model: String,
    pub api_key: Option<String>,
    pub timeout_ms: u64,
}

impl Default for BackendSettings {
    fn default() -> Self {
        let http = HttpChatConfig::default();
        Self {
            profile: BackendProfile::Mock,
            url: http.url,
            model: http.model,
            api_key: None,
            timeout_ms: http.timeout_ms,
        }
    }
}

/// Service settings, read from a TOML file and then environment overrides.
/// Fixture paths left unset fall back to the data embedded in erkang-core.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub bind: SocketAddr,
    pub data_dir: Option<PathBuf>,
    pub kb_path: Option<PathBuf>,
    pub slot_lexicon_path: Option<PathBuf>,
    pub question_templates_path: Option<PathBuf>,
    pub safety_lexicon_path: Option<PathBuf>,
    pub highlight_lexicon_path: Option<PathBuf>,
    pub directory_path: Option<PathBuf>,
    pub backend: BackendSettings,
    pub engine: EngineConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: SocketAddr::from(([127, 0, 0, 1], 8080)),
            data_dir: Some(PathBuf::from("data")),
            kb_path: None,
            slot_lexicon_path: None,
            question_templates_path: None,
            safety_lexicon_path: None,
            highlight_lexicon_path: None,
            directory_path: None,
            backend: BackendSettings::default(),
            engine: EngineConfig::default(),
        }
    }
}

fn existing<'a>(
    what: &'static str,
    path: &'a Option<PathBuf>,
) -> Result<Option<&'a Path>, ConfigError> {
    match path {
        Some(p) if !p.exists() => Err(ConfigError::MissingPath {
            what,
            path: p.clone(),
        }),
        Some(p) => Ok(Some(p.as_path())),
        None => Ok(None),
    }
}

fn load_err(what: &'static str) -> impl FnOnce(String) -> ConfigError {
    move |message| ConfigError::Load { what, message }
}

impl ServiceConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Reads `path` if given, otherwise starts from defaults; then applies the
    /// process environment.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut config = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Read {
                    path: p.to_path_buf(),
                    source,
                })?;
                Self::from_toml(&text, p)?
            }
            None => Self::default(),
        };
        config.apply_env(|k| std::env::var(k).ok());
        Ok(config)
    }

    /// `ERKANG_DATA_DIR`, `ERKANG_BACKEND_URL` and `ERKANG_BACKEND_KEY`. A
    /// backend URL switches the profile to HTTP chat completion.
    pub fn apply_env(&mut self, var: impl Fn(&str) -> Option<String>) {
        let var = |k: &str| var(k).filter(|v| !v.trim().is_empty());
        if let Some(dir) = var("ERKANG_DATA_DIR") {
            self.data_dir = Some(PathBuf::from(dir));
        }
        if let Some(url) = var("ERKANG_BACKEND_URL") {
            self.backend.url = url;
            self.backend.profile = BackendProfile::HttpChatCompletion;
        }
        if let Some(key) = var("ERKANG_BACKEND_KEY") {
            self.backend.api_key = Some(key);
        }
    }

    fn generation_backend(&self) -> Result<Arc<dyn GenerationBackend>, ConfigError> {
        let b = &self.backend;
        match b.profile {
            BackendProfile::Mock => Ok(Arc::new(MockBackend::new())),
            BackendProfile::HttpChatCompletion => {
                if b.url.trim().is_empty() {
                    return Err(ConfigError::MissingBackendUrl);
                }
                let config = HttpChatConfig {
                    url: b.url.clone(),
                    model: b.model.clone(),
                    api_key: b.api_key.clone(),
                    timeout_ms: b.timeout_ms,
                };
                Ok(Arc::new(HttpChatBackend::new(config)))
            }
        }
    }

    /// Loads every configured fixture and opens the engine. Missing paths and
    /// an unwritable data directory fail here.
    pub fn build_engine(&self) -> Result<Engine, ConfigError> {
        let mut builder = Engine::builder()
            .config(self.engine.clone())
            .backend(self.generation_backend()?);

        if let Some(p) = existing("knowledge base", &self.kb_path)? {
            let mut store = KnowledgeStore::default();
            let stats =
                load_kb(&mut store, p).map_err(|e| load_err("knowledge base")(e.to_string()))?;
            log::info!(
                "knowledge base {}: {} chunks, {} diseases",
                p.display(),
                stats.chunks_loaded,
                stats.diseases
            );
            builder = builder.knowledge(store);
        }
        let lexicon = existing("slot lexicon", &self.slot_lexicon_path)?;
        let templates = existing("question templates", &self.question_templates_path)?;
        if lexicon.is_some() || templates.is_some() {
            let lexicon = match lexicon {
                Some(p) => SlotLexicon::from_path(p)
                    .map_err(|e| load_err("slot lexicon")(e.to_string()))?,
                None => SlotLexicon::shipped(),
            };
            let templates = match templates {
                Some(p) => QuestionTemplates::from_path(p)
                    .map_err(|e| load_err("question templates")(e.to_string()))?,
                None => QuestionTemplates::shipped(),
            };
            builder = builder.inquiry(Inquiry::new(lexicon, templates));
        }
        if let Some(p) = existing("safety lexicon", &self.safety_lexicon_path)? {
            builder = builder.safety(
                SafetyFilter::from_path(p)
                    .map_err(|e| load_err("safety lexicon")(e.to_string()))?,
            );
        }
        if let Some(p) = existing("highlight lexicon", &self.highlight_lexicon_path)? {
            let lex = HighlightLexicon::from_path(p)
                .map_err(|e| load_err("highlight lexicon")(e.to_string()))?;
            builder = builder.highlights(lex);
        }
        if let Some(p) = existing("emergency directory", &self.directory_path)? {
            let dir = EmergencyDirectory::from_path(p)
                .map_err(|e| load_err("emergency directory")(e.to_string()))?;
            builder = builder.directory(dir);
        }
        if let Some(dir) = &self.data_dir {
            builder = builder.data_dir(dir);
        }
        Ok(builder.build()?)
    }
}
