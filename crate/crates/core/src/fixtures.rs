//! Shared fixtures: the bundled sine-approximator model and the standard
//! pipeline built around it. Used by the benchmark, the simulator defaults,
//! and tests across the workspace.

use std::collections::HashMap;

use crate::bundle::encode_bundle;
use crate::compile::compile;
use crate::model::DenseModel;
use crate::runefile::{analyze, parse, PipelineGraph};

/// Trained offline; approximates `sin(x)` on [-pi, pi] to within ~0.005.
pub const SINE_RMODEL: &[u8] = include_bytes!("../assets/sine.rmodel");

/// One random scalar in, one sine estimate out.
pub const SINE_RUNEFILE: &str = "\
FROM runicos/base
CAPABILITY RAND input --samples 1
MODEL ./sine.rmodel sine --input [1,1] --output [1]
RUN input sine
OUT serial
";

pub fn sine_model_bytes() -> &'static [u8] {
    SINE_RMODEL
}

pub fn sine_model() -> DenseModel {
    DenseModel::from_bytes(SINE_RMODEL).expect("bundled fixture is valid")
}

/// The sine pipeline as an encoded `.rune` bundle.
pub fn sine_bundle() -> Vec<u8> {
    let ast = parse(SINE_RUNEFILE).expect("fixture parses");
    let graph = analyze(&ast).expect("fixture analyzes");
    let mut blobs = HashMap::new();
    blobs.insert("sine".to_string(), SINE_RMODEL.to_vec());
    let (manifest, bytecode, ordered) = compile(&ast, &graph, &blobs).expect("fixture compiles");
    encode_bundle(&manifest, &bytecode, &ordered).expect("fixture encodes")
}

/// The sine pipeline in the form [`crate::runicos::run_native`] consumes.
pub fn sine_graph_and_models() -> (PipelineGraph, HashMap<String, DenseModel>) {
    let ast = parse(SINE_RUNEFILE).expect("fixture parses");
    let graph = analyze(&ast).expect("fixture analyzes");
    let mut models = HashMap::new();
    models.insert("sine".to_string(), sine_model());
    (graph, models)
}
