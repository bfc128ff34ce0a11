use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    validate, BoosterSettings, ClosedQAPolicy, DialogPolicy, PersonaDef, ProjectConfig,
    ThresholdConfig, Violation, SCHEMA_VERSION,
};
use crate::llm::ProviderConfig;

pub const MANIFEST: &str = "manifest.yaml";

/// Every file that makes up a project, manifest first. `staging.yaml` is
/// owned by the review workflow and not part of the config.
pub const FILES: [&str; 8] = [
    MANIFEST,
    "intents.yaml",
    "entities.yaml",
    "forms.yaml",
    "templates.yaml",
    "persona.yaml",
    "closed_qa.yaml",
    "prompts.yaml",
];

#[derive(Debug, Error)]
pub enum ProjectError {
    #[error("missing project file {0}")]
    MissingFile(PathBuf),
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },
    #[error("project has {} violation(s):\n{}", .0.len(), join_violations(.0))]
    Validation(Vec<Violation>),
    #[error("io error on {}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|v| format!("  - {v}"))
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    schema_version: u32,
    name: String,
    #[serde(default)]
    domain: String,
    locales: Vec<String>,
    #[serde(default)]
    thresholds: ThresholdConfig,
    #[serde(default)]
    dialog: DialogPolicy,
    #[serde(default)]
    boosters: BoosterSettings,
    #[serde(default)]
    llm: ProviderConfig,
}

/// Raw file contents keyed by file name (see [`FILES`]).
#[derive(Debug, Clone, Default)]
pub struct ProjectSources {
    pub files: BTreeMap<String, String>,
}

impl ProjectSources {
    pub fn read_dir(dir: &Path) -> Result<Self, ProjectError> {
        let manifest = dir.join(MANIFEST);
        if !manifest.is_file() {
            return Err(ProjectError::MissingFile(manifest));
        }
        let mut files = BTreeMap::new();
        for name in FILES {
            let path = dir.join(name);
            match fs::read_to_string(&path) {
                Ok(s) => {
                    files.insert(name.to_string(), s);
                }
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
                Err(source) => return Err(ProjectError::Io { path, source }),
            }
        }
        Ok(Self { files })
    }

    pub fn with(mut self, name: &str, content: impl Into<String>) -> Self {
        self.files.insert(name.to_string(), content.into());
        self
    }

    fn parse_file<T: DeserializeOwned>(&self, name: &str) -> Result<Option<T>, ProjectError> {
        let Some(text) = self.files.get(name) else {
            return Ok(None);
        };
        if text.trim().is_empty() {
            return Ok(None);
        }
        serde_yaml::from_str(text).map(Some).map_err(|e| {
            let location = match e.location() {
                Some(l) => format!("{name}:{}:{}", l.line(), l.column()),
                None => name.to_string(),
            };
            ProjectError::Parse {
                location,
                message: e.to_string(),
            }
        })
    }
}

/// Parses and validates a project from in-memory sources.
pub fn parse_project(sources: &ProjectSources) -> Result<ProjectConfig, ProjectError> {
    let manifest: Manifest = sources
        .parse_file(MANIFEST)?
        .ok_or_else(|| ProjectError::MissingFile(PathBuf::from(MANIFEST)))?;
    if manifest.schema_version != SCHEMA_VERSION {
        return Err(ProjectError::Parse {
            location: MANIFEST.to_string(),
            message: format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                manifest.schema_version
            ),
        });
    }
    let config = ProjectConfig {
        name: manifest.name,
        domain: manifest.domain,
        locales: manifest.locales,
        intents: sources.parse_file("intents.yaml")?.unwrap_or_default(),
        entities: sources.parse_file("entities.yaml")?.unwrap_or_default(),
        forms: sources.parse_file("forms.yaml")?.unwrap_or_default(),
        templates: sources.parse_file("templates.yaml")?.unwrap_or_default(),
        persona: sources
            .parse_file::<PersonaDef>("persona.yaml")?
            .unwrap_or_default(),
        closed_qa: sources
            .parse_file("closed_qa.yaml")?
            .unwrap_or(ClosedQAPolicy {
                answers: Vec::new(),
                default_answer: String::new(),
                prompt_template: "closed_qa".into(),
            }),
        thresholds: manifest.thresholds,
        dialog: manifest.dialog,
        boosters: manifest.boosters,
        llm: manifest.llm,
        prompts: sources.parse_file("prompts.yaml")?.unwrap_or_default(),
    };
    let violations = validate(&config);
    if violations.is_empty() {
        Ok(config)
    } else {
        Err(ProjectError::Validation(violations))
    }
}

/// Loads and fully validates the project rooted at `dir`.
pub fn load_project(dir: impl AsRef<Path>) -> Result<ProjectConfig, ProjectError> {
    parse_project(&ProjectSources::read_dir(dir.as_ref())?)
}

fn to_yaml<T: Serialize>(value: &T) -> String {
    // Serializing plain data structures to YAML cannot fail.
    serde_yaml::to_string(value).expect("project types serialize")
}

pub(crate) fn write_atomic(path: &Path, contents: &str) -> Result<(), ProjectError> {
    let io = |source| ProjectError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file_name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = path.with_file_name(format!(".{file_name}.tmp"));
    fs::write(&tmp, contents).map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

/// Creates `dir` and writes each `(file name, contents)` pair atomically.
pub fn write_atomic_files<'a>(
    dir: &Path,
    files: impl IntoIterator<Item = (&'a str, &'a str)>,
) -> Result<(), ProjectError> {
    fs::create_dir_all(dir).map_err(|source| ProjectError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    for (name, contents) in files {
        write_atomic(&dir.join(name), contents)?;
    }
    Ok(())
}

/// Writes every project file under `dir` (write-temp-then-rename per file).
pub fn save_project(config: &ProjectConfig, dir: impl AsRef<Path>) -> Result<(), ProjectError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|source| ProjectError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        name: config.name.clone(),
        domain: config.domain.clone(),
        locales: config.locales.clone(),
        thresholds: config.thresholds,
        dialog: config.dialog.clone(),
        boosters: config.boosters,
        llm: config.llm.clone(),
    };
    let files = [
        (MANIFEST, to_yaml(&manifest)),
        ("intents.yaml", to_yaml(&config.intents)),
        ("entities.yaml", to_yaml(&config.entities)),
        ("forms.yaml", to_yaml(&config.forms)),
        ("templates.yaml", to_yaml(&config.templates)),
        ("persona.yaml", to_yaml(&config.persona)),
        ("closed_qa.yaml", to_yaml(&config.closed_qa)),
        ("prompts.yaml", to_yaml(&config.prompts)),
    ];
    for (name, contents) in files {
        write_atomic(&dir.join(name), &contents)?;
    }
    Ok(())
}
