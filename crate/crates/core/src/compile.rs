//! Lowers a parsed, analyzed Runefile into a manifest and pipeline bytecode.

use std::collections::HashMap;

use thiserror::Error;

use crate::bundle::{CapabilityRequest, Instr, Manifest, ModelInfo};
use crate::crc32::crc32;
use crate::runefile::{PipelineGraph, RunefileAst, StageKind};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CompileError {
    #[error("no blob supplied for model `{0}`")]
    MissingModelBlob(String),
    #[error("pipeline uses more than 256 models")]
    TooManyModels,
}

/// Produces the manifest, the bytecode mirroring the RUN chain, and the model
/// blobs in manifest order. `blobs` maps model names to `.rmodel` bytes.
pub fn compile(
    ast: &RunefileAst,
    graph: &PipelineGraph,
    blobs: &HashMap<String, Vec<u8>>,
) -> Result<(Manifest, Vec<Instr>, Vec<Vec<u8>>), CompileError> {
    if ast.models.len() > 256 {
        return Err(CompileError::TooManyModels);
    }
    let mut ordered_blobs = Vec::with_capacity(ast.models.len());
    let mut models = Vec::with_capacity(ast.models.len());
    for decl in &ast.models {
        let blob = blobs
            .get(&decl.name)
            .ok_or_else(|| CompileError::MissingModelBlob(decl.name.clone()))?;
        models.push(ModelInfo {
            name: decl.name.clone(),
            input_shape: decl.input_shape.clone(),
            output_shape: decl.output_shape.clone(),
            digest: crc32(blob),
        });
        ordered_blobs.push(blob.clone());
    }

    let manifest = Manifest {
        capabilities: ast
            .capabilities
            .iter()
            .map(|c| CapabilityRequest { kind: c.kind, params: c.params.clone() })
            .collect(),
        out: ast.out,
        models,
    };

    let mut bytecode = Vec::with_capacity(graph.stages.len() + 1);
    for stage in &graph.stages {
        bytecode.push(match stage.kind {
            StageKind::Capability(kind) => Instr::ReadCap(kind),
            StageKind::ProcBlock(block) => Instr::Proc(block),
            StageKind::Model => {
                let idx = ast
                    .models
                    .iter()
                    .position(|m| m.name == stage.id)
                    .expect("analyzed graph stage resolves to a declared model");
                Instr::Infer(idx as u8)
            }
        });
    }
    bytecode.push(Instr::WriteOut);

    Ok((manifest, bytecode, ordered_blobs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::runefile::{analyze, parse, CapabilityKind};

    #[test]
    fn sine_pipeline_compiles() {
        let ast = parse(fixtures::SINE_RUNEFILE).unwrap();
        let graph = analyze(&ast).unwrap();
        let mut blobs = HashMap::new();
        blobs.insert("sine".to_string(), fixtures::sine_model_bytes().to_vec());
        let (manifest, bytecode, ordered) = compile(&ast, &graph, &blobs).unwrap();
        assert_eq!(manifest.capabilities.len(), 1);
        assert_eq!(manifest.capabilities[0].kind, CapabilityKind::Rand);
        assert_eq!(bytecode.len(), 3);
        assert_eq!(ordered.len(), 1);
    }

    #[test]
    fn missing_blob_is_an_error() {
        let ast = parse(fixtures::SINE_RUNEFILE).unwrap();
        let graph = analyze(&ast).unwrap();
        let err = compile(&ast, &graph, &HashMap::new()).unwrap_err();
        assert_eq!(err, CompileError::MissingModelBlob("sine".into()));
    }
}
