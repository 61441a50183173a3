//! `rune build`: compile a Runefile and its model files into a `.rune`
//! bundle on disk.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use rune_core::bundle::{encode_bundle, BundleError, Manifest};
use rune_core::compile::{compile, CompileError};
use rune_core::model::DenseModel;
use rune_core::runefile::{analyze, parse, AnalyzeError, CapabilityKind, ParseError};

#[derive(Debug)]
pub struct BuildReport {
    pub bundle_path: PathBuf,
    pub bundle_size_bytes: u64,
    pub manifest: Manifest,
    pub warnings: Vec<String>,
}

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{file}:{line}: {source}")]
    Parse { file: PathBuf, line: u32, source: ParseError },
    #[error("{file}:{line}: {source}")]
    Analyze { file: PathBuf, line: u32, source: AnalyzeError },
    #[error("model `{name}` not found at {path}")]
    ModelNotFound { name: String, path: PathBuf },
    #[error("model `{name}` ({path}): {message}")]
    ModelFormat { name: String, path: PathBuf, message: String },
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Encode(#[from] BundleError),
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
}

impl BuildError {
    /// 1 for user errors, 2 for internal errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            BuildError::Compile(_) | BuildError::Encode(_) => 2,
            _ => 1,
        }
    }
}

fn known_flags(kind: CapabilityKind) -> &'static [&'static str] {
    match kind {
        CapabilityKind::Audio => &["hz", "samples"],
        CapabilityKind::Rand => &["samples"],
    }
}

/// Default output path: `<runefile-dir>/<stem>.rune`.
pub fn default_output_path(runefile_path: &Path) -> PathBuf {
    let stem = runefile_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".to_string());
    runefile_path.with_file_name(format!("{stem}.rune"))
}

pub fn build(runefile_path: &Path, output_path: Option<&Path>) -> Result<BuildReport, BuildError> {
    let text = fs::read_to_string(runefile_path).map_err(|source| BuildError::Read {
        path: runefile_path.to_path_buf(),
        source,
    })?;
    let ast = parse(&text).map_err(|source| BuildError::Parse {
        file: runefile_path.to_path_buf(),
        line: source.line(),
        source,
    })?;
    let graph = analyze(&ast).map_err(|source| {
        let line = match &source {
            AnalyzeError::UnresolvedName { line, .. }
            | AnalyzeError::ShapeMismatch { line, .. }
            | AnalyzeError::NoCapabilitySource { line }
            | AnalyzeError::MisplacedCapability { line, .. } => *line,
        };
        BuildError::Analyze { file: runefile_path.to_path_buf(), line, source }
    })?;

    let mut warnings = Vec::new();
    for cap in &ast.capabilities {
        for (key, _) in &cap.params {
            if !known_flags(cap.kind).contains(&key.as_str()) {
                warnings.push(format!(
                    "capability `{}`: flag `--{key}` is not interpreted at build time; \
                     it is passed through to the device provider",
                    cap.name
                ));
            }
        }
    }

    let base_dir = runefile_path.parent().unwrap_or(Path::new("."));
    let mut blobs: HashMap<String, Vec<u8>> = HashMap::new();
    for decl in &ast.models {
        let model_path = base_dir.join(&decl.path);
        let bytes = match fs::read(&model_path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(BuildError::ModelNotFound {
                    name: decl.name.clone(),
                    path: model_path,
                })
            }
            Err(source) => return Err(BuildError::Read { path: model_path, source }),
        };
        let model = DenseModel::from_bytes(&bytes).map_err(|e| BuildError::ModelFormat {
            name: decl.name.clone(),
            path: model_path.clone(),
            message: e.to_string(),
        })?;
        let declared_in: usize = decl.input_shape.iter().map(|&d| d as usize).product();
        let declared_out: usize = decl.output_shape.iter().map(|&d| d as usize).product();
        if declared_in != model.input_dim() || declared_out != model.output_dim() {
            return Err(BuildError::ModelFormat {
                name: decl.name.clone(),
                path: model_path,
                message: format!(
                    "declared shapes {:?} -> {:?} do not match model dims {} -> {}",
                    decl.input_shape,
                    decl.output_shape,
                    model.input_dim(),
                    model.output_dim()
                ),
            });
        }
        blobs.insert(decl.name.clone(), bytes);
    }

    let (manifest, bytecode, ordered_blobs) = compile(&ast, &graph, &blobs)?;
    let bytes = encode_bundle(&manifest, &bytecode, &ordered_blobs)?;

    let bundle_path = output_path
        .map(Path::to_path_buf)
        .unwrap_or_else(|| default_output_path(runefile_path));
    fs::write(&bundle_path, &bytes)
        .map_err(|source| BuildError::Write { path: bundle_path.clone(), source })?;

    Ok(BuildReport {
        bundle_path,
        bundle_size_bytes: bytes.len() as u64,
        manifest,
        warnings,
    })
}

fn json_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out
}

impl BuildReport {
    pub fn to_json(&self) -> String {
        let warnings: Vec<String> =
            self.warnings.iter().map(|w| format!("\"{}\"", json_escape(w))).collect();
        format!(
            "{{\"bundle_path\":\"{}\",\"bundle_size_bytes\":{},\"capabilities\":{},\"models\":{},\"warnings\":[{}]}}",
            json_escape(&self.bundle_path.to_string_lossy()),
            self.bundle_size_bytes,
            self.manifest.capabilities.len(),
            self.manifest.models.len(),
            warnings.join(",")
        )
    }

    pub fn summary(&self) -> String {
        format!(
            "wrote {} ({} bytes): {} capability request(s), {} model(s), out={}",
            self.bundle_path.display(),
            self.bundle_size_bytes,
            self.manifest.capabilities.len(),
            self.manifest.models.len(),
            self.manifest.out
        )
    }
}
