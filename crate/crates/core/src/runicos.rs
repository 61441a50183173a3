//! The host virtual machine: boots a bundle through the two-phase
//! manifest/call protocol, enforces capability grants, and executes pipeline
//! bytecode with every stage boundary passing through a tensor codec.
//!
//! Stage functions only ever see codec-round-tripped bytes; the native
//! executor ([`run_native`]) runs the identical stage sequence with no
//! serialization and is the baseline for overhead measurement.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::bundle::{decode_bundle, BundleError, Instr, Manifest, RuneBundle};
use crate::model::{DenseModel, ModelError};
use crate::pipeline::{fft_magnitude, infer, normalize, StageError};
use crate::runefile::{BlockId, CapabilityKind, PipelineGraph, StageKind};
use crate::tensor::{decode_tensor, encode_tensor, Codec, Tensor, TensorError};

#[derive(Debug, Clone, PartialEq)]
pub enum ProviderBinding {
    /// Seeded pseudorandom samples, uniform in [-1, 1].
    Seeded(u64),
    /// Every sample is the given constant.
    Constant(f32),
    /// Raw little-endian f32 stream, read sequentially with wrap-around.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceProfile {
    pub name: String,
    pub capabilities: Vec<(CapabilityKind, ProviderBinding)>,
    pub memory_budget: usize,
}

impl DeviceProfile {
    pub fn new(
        name: impl Into<String>,
        capabilities: Vec<(CapabilityKind, ProviderBinding)>,
        memory_budget: usize,
    ) -> Result<DeviceProfile, RuntimeError> {
        let mut seen = HashSet::new();
        for (kind, _) in &capabilities {
            if !seen.insert(*kind) {
                return Err(RuntimeError::InvalidProfile(format!(
                    "duplicate capability kind {kind}"
                )));
            }
        }
        Ok(DeviceProfile { name: name.into(), capabilities, memory_budget })
    }

    pub fn has(&self, kind: CapabilityKind) -> bool {
        self.capabilities.iter().any(|(k, _)| *k == kind)
    }
}

#[derive(Debug, Error)]
pub enum RuntimeError {
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error("model blob {index}: {source}")]
    Model { index: usize, source: ModelError },
    #[error("invalid device profile: {0}")]
    InvalidProfile(String),
    #[error("instance is in state {0:?}; expected {1:?}")]
    InvalidState(InstanceState, InstanceState),
    #[error("capability {0} denied: not provided by device")]
    CapabilityDenied(CapabilityKind),
    #[error("insufficient memory: bundle needs {required} bytes, device budget is {budget}")]
    InsufficientMemory { required: usize, budget: usize },
    #[error("call before manifest")]
    NotManifested,
    #[error("instance is faulted")]
    Faulted,
    #[error("permission violation: capability {0} was not granted")]
    PermissionViolation(CapabilityKind),
    #[error("pipeline has no stages")]
    EmptyPipeline,
    #[error("no provider bound for capability {0}")]
    MissingProvider(CapabilityKind),
    #[error("provider io error: {0}")]
    ProviderIo(String),
    #[error(transparent)]
    Stage(#[from] StageError),
    #[error("boundary codec error: {0}")]
    Codec(#[from] TensorError),
    #[error("model stage references unknown model `{0}`")]
    UnknownModel(String),
    #[error("sink io error: {0}")]
    SinkIo(String),
}

pub trait CapabilityProvider: Send {
    fn kind(&self) -> CapabilityKind;
    /// Returns a `[samples, 1]` f32 tensor.
    fn read(&mut self, samples: u32) -> Result<Tensor, RuntimeError>;
}

struct SeededProvider {
    kind: CapabilityKind,
    rng: ChaCha8Rng,
}

impl CapabilityProvider for SeededProvider {
    fn kind(&self) -> CapabilityKind {
        self.kind
    }

    fn read(&mut self, samples: u32) -> Result<Tensor, RuntimeError> {
        let values: Vec<f32> =
            (0..samples).map(|_| self.rng.gen::<f32>() * 2.0 - 1.0).collect();
        Ok(Tensor::from_f32(vec![samples, 1], &values).expect("valid shape"))
    }
}

struct ConstantProvider {
    kind: CapabilityKind,
    value: f32,
}

impl CapabilityProvider for ConstantProvider {
    fn kind(&self) -> CapabilityKind {
        self.kind
    }

    fn read(&mut self, samples: u32) -> Result<Tensor, RuntimeError> {
        Ok(Tensor::from_f32(vec![samples, 1], &vec![self.value; samples as usize])
            .expect("valid shape"))
    }
}

struct FileProvider {
    kind: CapabilityKind,
    samples: Vec<f32>,
    cursor: usize,
}

impl FileProvider {
    fn open(kind: CapabilityKind, path: &PathBuf) -> Result<FileProvider, RuntimeError> {
        let bytes = fs::read(path).map_err(|e| RuntimeError::ProviderIo(e.to_string()))?;
        if bytes.is_empty() || bytes.len() % 4 != 0 {
            return Err(RuntimeError::ProviderIo(format!(
                "{} is not a non-empty f32 stream",
                path.display()
            )));
        }
        let samples = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(FileProvider { kind, samples, cursor: 0 })
    }
}

impl CapabilityProvider for FileProvider {
    fn kind(&self) -> CapabilityKind {
        self.kind
    }

    fn read(&mut self, samples: u32) -> Result<Tensor, RuntimeError> {
        let mut values = Vec::with_capacity(samples as usize);
        for _ in 0..samples {
            values.push(self.samples[self.cursor]);
            self.cursor = (self.cursor + 1) % self.samples.len();
        }
        Ok(Tensor::from_f32(vec![samples, 1], &values).expect("valid shape"))
    }
}

fn make_provider(
    kind: CapabilityKind,
    binding: &ProviderBinding,
) -> Result<Box<dyn CapabilityProvider>, RuntimeError> {
    Ok(match binding {
        ProviderBinding::Seeded(seed) => {
            Box::new(SeededProvider { kind, rng: ChaCha8Rng::seed_from_u64(*seed) })
        }
        ProviderBinding::Constant(v) => Box::new(ConstantProvider { kind, value: *v }),
        ProviderBinding::File(path) => Box::new(FileProvider::open(kind, path)?),
    })
}

/// The device's bound providers, with an instrumented read counter per kind.
pub struct ProviderSet {
    bindings: Vec<(CapabilityKind, ProviderBinding)>,
    providers: HashMap<CapabilityKind, Box<dyn CapabilityProvider>>,
    reads: HashMap<CapabilityKind, u64>,
}

impl ProviderSet {
    pub fn from_profile(profile: &DeviceProfile) -> Result<ProviderSet, RuntimeError> {
        let mut providers = HashMap::new();
        for (kind, binding) in &profile.capabilities {
            providers.insert(*kind, make_provider(*kind, binding)?);
        }
        Ok(ProviderSet {
            bindings: profile.capabilities.clone(),
            providers,
            reads: HashMap::new(),
        })
    }

    /// Recreates seeded providers from `seed` and rewinds file providers, so
    /// the next execution sees a deterministic stream.
    pub fn reseed(&mut self, seed: u64) -> Result<(), RuntimeError> {
        for (kind, binding) in &self.bindings {
            let binding = match binding {
                ProviderBinding::Seeded(_) => ProviderBinding::Seeded(seed),
                other => other.clone(),
            };
            self.providers.insert(*kind, make_provider(*kind, &binding)?);
        }
        Ok(())
    }

    pub fn read(&mut self, kind: CapabilityKind, samples: u32) -> Result<Tensor, RuntimeError> {
        let provider =
            self.providers.get_mut(&kind).ok_or(RuntimeError::MissingProvider(kind))?;
        *self.reads.entry(kind).or_insert(0) += 1;
        provider.read(samples)
    }

    pub fn reads(&self, kind: CapabilityKind) -> u64 {
        self.reads.get(&kind).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InstanceState {
    Loaded,
    Manifested,
    Ready,
    Faulted,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SagaMetrics {
    pub invocations: u64,
    pub total_exec_nanos: u64,
    pub last_error: Option<String>,
    /// Nanoseconds since the Unix epoch at load time.
    pub boot_time_nanos: u64,
}

/// Shared byte buffer usable as a serial sink in tests.
#[derive(Debug, Clone, Default)]
pub struct SharedSink(pub Arc<Mutex<Vec<u8>>>);

impl SharedSink {
    pub fn contents(&self) -> String {
        String::from_utf8_lossy(&self.0.lock().unwrap()).into_owned()
    }
}

impl Write for SharedSink {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.0.lock().unwrap().write(buf)
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

fn write_serial_line(sink: &mut dyn Write, t: &Tensor) -> Result<(), RuntimeError> {
    let mut line = String::new();
    for (i, v) in t.as_f32().iter().enumerate() {
        if i > 0 {
            line.push(' ');
        }
        line.push_str(&format!("{v}"));
    }
    line.push('\n');
    sink.write_all(line.as_bytes()).map_err(|e| RuntimeError::SinkIo(e.to_string()))
}

pub struct RuneInstance {
    bundle: RuneBundle,
    bundle_size: usize,
    models: Vec<DenseModel>,
    device: DeviceProfile,
    providers: Option<ProviderSet>,
    granted: HashSet<CapabilityKind>,
    state: InstanceState,
    saga: SagaMetrics,
    executed_instructions: u64,
    sink: Box<dyn Write + Send>,
}

pub fn load(bundle_bytes: &[u8], device: DeviceProfile) -> Result<RuneInstance, RuntimeError> {
    let bundle = decode_bundle(bundle_bytes)?;
    let mut models = Vec::with_capacity(bundle.model_blobs.len());
    for (index, (_, blob)) in bundle.model_blobs.iter().enumerate() {
        models.push(
            DenseModel::from_bytes(blob).map_err(|source| RuntimeError::Model { index, source })?,
        );
    }
    let boot_time_nanos = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_nanos() as u64)
        .unwrap_or(0);
    Ok(RuneInstance {
        bundle,
        bundle_size: bundle_bytes.len(),
        models,
        device,
        providers: None,
        granted: HashSet::new(),
        state: InstanceState::Loaded,
        saga: SagaMetrics {
            invocations: 0,
            total_exec_nanos: 0,
            last_error: None,
            boot_time_nanos,
        },
        executed_instructions: 0,
        sink: Box::new(io::sink()),
    })
}

impl RuneInstance {
    pub fn set_sink(&mut self, sink: Box<dyn Write + Send>) {
        self.sink = sink;
    }

    pub fn state(&self) -> InstanceState {
        self.state
    }

    pub fn manifest_ref(&self) -> &Manifest {
        &self.bundle.manifest
    }

    pub fn executed_instructions(&self) -> u64 {
        self.executed_instructions
    }

    pub fn provider_reads(&self, kind: CapabilityKind) -> u64 {
        self.providers.as_ref().map(|p| p.reads(kind)).unwrap_or(0)
    }

    pub fn health(&self) -> SagaMetrics {
        self.saga.clone()
    }

    pub fn reseed(&mut self, seed: u64) -> Result<(), RuntimeError> {
        if let Some(providers) = &mut self.providers {
            providers.reseed(seed)?;
        }
        Ok(())
    }

    fn fault(&mut self, err: RuntimeError) -> RuntimeError {
        self.state = InstanceState::Faulted;
        self.saga.last_error = Some(err.to_string());
        err
    }

    /// Worst-case working set: the byte size of every tensor the bytecode
    /// produces, summed.
    fn working_set_bytes(&self) -> usize {
        let manifest = &self.bundle.manifest;
        let mut total = 0usize;
        let mut current = 0usize;
        for instr in &self.bundle.bytecode {
            match *instr {
                Instr::ReadCap(kind) => {
                    let samples = manifest
                        .capabilities
                        .iter()
                        .find(|c| c.kind == kind)
                        .and_then(|c| c.param("samples"))
                        .unwrap_or(1) as usize;
                    current = samples * 4;
                    total += current;
                }
                Instr::Proc(_) => total += current,
                Instr::Infer(idx) => {
                    let elems: usize = manifest.models[idx as usize]
                        .output_shape
                        .iter()
                        .map(|&d| d as usize)
                        .product();
                    current = elems * 4;
                    total += current;
                }
                Instr::WriteOut => {}
            }
        }
        total
    }

    /// Phase one: verify capability and memory requirements against the
    /// device before any bytecode runs.
    pub fn manifest(&mut self) -> Result<Manifest, RuntimeError> {
        if self.state != InstanceState::Loaded {
            return Err(RuntimeError::InvalidState(self.state, InstanceState::Loaded));
        }
        for request in &self.bundle.manifest.capabilities {
            if !self.device.has(request.kind) {
                return Err(self.fault(RuntimeError::CapabilityDenied(request.kind)));
            }
        }
        let required = self.bundle_size + self.working_set_bytes();
        if required > self.device.memory_budget {
            return Err(self.fault(RuntimeError::InsufficientMemory {
                required,
                budget: self.device.memory_budget,
            }));
        }
        self.state = InstanceState::Manifested;
        let providers = ProviderSet::from_profile(&self.device)?;
        self.granted = self.bundle.manifest.capabilities.iter().map(|c| c.kind).collect();
        self.providers = Some(providers);
        self.state = InstanceState::Ready;
        Ok(self.bundle.manifest.clone())
    }

    /// Phase two: one inference pass. Every tensor produced by a stage is
    /// encoded and decoded with `codec` before the next stage sees it.
    pub fn call(&mut self, codec: Codec) -> Result<Tensor, RuntimeError> {
        match self.state {
            InstanceState::Ready => {}
            InstanceState::Faulted => return Err(RuntimeError::Faulted),
            _ => return Err(RuntimeError::NotManifested),
        }
        if self.bundle.bytecode.is_empty() {
            return Err(self.fault(RuntimeError::EmptyPipeline));
        }
        self.saga.invocations += 1;
        let start = Instant::now();
        let result = self.execute(codec);
        self.saga.total_exec_nanos += start.elapsed().as_nanos() as u64;
        match result {
            Ok(t) => Ok(t),
            Err(e) => Err(self.fault(e)),
        }
    }

    fn execute(&mut self, codec: Codec) -> Result<Tensor, RuntimeError> {
        let providers = self.providers.as_mut().expect("READY implies providers");
        let manifest = &self.bundle.manifest;
        let mut current: Option<Tensor> = None;
        let mut written: Option<Tensor> = None;

        for instr in &self.bundle.bytecode {
            self.executed_instructions += 1;
            let produced = match *instr {
                Instr::ReadCap(kind) => {
                    if !self.granted.contains(&kind) {
                        return Err(RuntimeError::PermissionViolation(kind));
                    }
                    let samples = manifest
                        .capabilities
                        .iter()
                        .find(|c| c.kind == kind)
                        .and_then(|c| c.param("samples"))
                        .unwrap_or(1);
                    Some(providers.read(kind, samples)?)
                }
                Instr::Proc(block) => {
                    let input = current.take().ok_or(RuntimeError::EmptyPipeline)?;
                    Some(match block {
                        BlockId::Fft => fft_magnitude(&input)?,
                        BlockId::Normalize => normalize(&input)?,
                    })
                }
                Instr::Infer(idx) => {
                    let input = current.take().ok_or(RuntimeError::EmptyPipeline)?;
                    let info = &manifest.models[idx as usize];
                    Some(infer(&self.models[idx as usize], &input, &info.output_shape)?)
                }
                Instr::WriteOut => {
                    let output = current.clone().ok_or(RuntimeError::EmptyPipeline)?;
                    write_serial_line(self.sink.as_mut(), &output)?;
                    written = Some(output);
                    None
                }
            };
            if let Some(t) = produced {
                // The host-guest boundary: stages only ever receive
                // codec-round-tripped bytes.
                current = Some(decode_tensor(&encode_tensor(&t, codec), codec)?);
            }
        }

        written.ok_or(RuntimeError::EmptyPipeline)
    }
}

/// Executes the identical stage sequence with no boundary serialization: the
/// native baseline for the overhead measurement.
pub fn run_native(
    graph: &PipelineGraph,
    models: &HashMap<String, DenseModel>,
    providers: &mut ProviderSet,
    sink: &mut dyn Write,
) -> Result<Tensor, RuntimeError> {
    if graph.stages.is_empty() {
        return Err(RuntimeError::EmptyPipeline);
    }
    let mut current: Option<Tensor> = None;
    for stage in &graph.stages {
        let t = match stage.kind {
            StageKind::Capability(kind) => providers.read(kind, stage.output_shape[0])?,
            StageKind::ProcBlock(block) => {
                let input = current.take().ok_or(RuntimeError::EmptyPipeline)?;
                match block {
                    BlockId::Fft => fft_magnitude(&input)?,
                    BlockId::Normalize => normalize(&input)?,
                }
            }
            StageKind::Model => {
                let input = current.take().ok_or(RuntimeError::EmptyPipeline)?;
                let model = models
                    .get(&stage.id)
                    .ok_or_else(|| RuntimeError::UnknownModel(stage.id.clone()))?;
                infer(model, &input, &stage.output_shape)?
            }
        };
        current = Some(t);
    }
    let output = current.expect("non-empty pipeline produced a tensor");
    write_serial_line(sink, &output)?;
    Ok(output)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::{encode_bundle_raw, CapabilityRequest, ModelInfo};
    use crate::crc32::crc32;
    use crate::fixtures;
    use crate::runefile::OutputKind;

    fn rand_device(seed: u64) -> DeviceProfile {
        DeviceProfile::new(
            "sim",
            vec![(CapabilityKind::Rand, ProviderBinding::Seeded(seed))],
            1 << 20,
        )
        .unwrap()
    }

    #[test]
    fn load_leaves_instance_loaded() {
        let instance = load(&fixtures::sine_bundle(), rand_device(1)).unwrap();
        assert_eq!(instance.state(), InstanceState::Loaded);
        assert_eq!(instance.health().invocations, 0);
    }

    #[test]
    fn corrupted_bundle_fails_to_load() {
        let mut bytes = fixtures::sine_bundle();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x10;
        assert!(matches!(
            load(&bytes, rand_device(1)),
            Err(RuntimeError::Bundle(BundleError::DigestMismatch))
        ));
    }

    #[test]
    fn load_succeeds_on_capability_less_device() {
        // Checks are deferred to the manifest phase.
        let device = DeviceProfile::new("bare", vec![], 1 << 20).unwrap();
        let instance = load(&fixtures::sine_bundle(), device).unwrap();
        assert_eq!(instance.state(), InstanceState::Loaded);
    }

    #[test]
    fn manifest_denies_missing_capability() {
        let device = DeviceProfile::new(
            "audio-only",
            vec![(CapabilityKind::Audio, ProviderBinding::Constant(0.0))],
            1 << 20,
        )
        .unwrap();
        let mut instance = load(&fixtures::sine_bundle(), device).unwrap();
        let err = instance.manifest().unwrap_err();
        assert!(matches!(err, RuntimeError::CapabilityDenied(CapabilityKind::Rand)));
        assert_eq!(instance.state(), InstanceState::Faulted);
        assert_eq!(instance.executed_instructions(), 0);
        assert!(matches!(instance.call(Codec::Fixed), Err(RuntimeError::Faulted)));
        assert_eq!(instance.executed_instructions(), 0);
    }

    #[test]
    fn manifest_enforces_memory_budget() {
        let mut device = rand_device(1);
        device.memory_budget = 16;
        let mut instance = load(&fixtures::sine_bundle(), device).unwrap();
        assert!(matches!(
            instance.manifest().unwrap_err(),
            RuntimeError::InsufficientMemory { .. }
        ));
    }

    #[test]
    fn call_before_manifest_is_rejected() {
        let mut instance = load(&fixtures::sine_bundle(), rand_device(1)).unwrap();
        assert!(matches!(instance.call(Codec::Fixed), Err(RuntimeError::NotManifested)));
        assert_eq!(instance.health().invocations, 0);
    }

    #[test]
    fn sine_pipeline_with_zero_input() {
        let device = DeviceProfile::new(
            "const",
            vec![(CapabilityKind::Rand, ProviderBinding::Constant(0.0))],
            1 << 20,
        )
        .unwrap();
        let mut instance = load(&fixtures::sine_bundle(), device).unwrap();
        instance.manifest().unwrap();
        let out = instance.call(Codec::Fixed).unwrap();
        assert!(out.as_f32()[0].abs() < 0.15); // sin(0) = 0
        assert_eq!(instance.health().invocations, 1);
    }

    #[test]
    fn permission_violation_on_ungranted_read() {
        // Hand-built bundle bytes: manifest requests RAND only, but the
        // bytecode reads AUDIO. encode_bundle refuses this, so splice the
        // bytecode section manually.
        let blob = fixtures::sine_model().to_bytes();
        let manifest = Manifest {
            capabilities: vec![CapabilityRequest {
                kind: CapabilityKind::Rand,
                params: vec![("samples".into(), 1)],
            }],
            out: OutputKind::Serial,
            models: vec![ModelInfo {
                name: "m".into(),
                input_shape: vec![1, 1],
                output_shape: vec![1],
                digest: crc32(&blob),
            }],
        };
        let bytes = encode_bundle_raw(
            &manifest,
            &[Instr::ReadCap(CapabilityKind::Audio), Instr::Infer(0), Instr::WriteOut],
            &[blob],
        );
        let device = DeviceProfile::new(
            "sim",
            vec![
                (CapabilityKind::Rand, ProviderBinding::Seeded(1)),
                (CapabilityKind::Audio, ProviderBinding::Seeded(1)),
            ],
            1 << 20,
        )
        .unwrap();
        let mut instance = load(&bytes, device).unwrap();
        instance.manifest().unwrap();
        let err = instance.call(Codec::Fixed).unwrap_err();
        assert!(matches!(err, RuntimeError::PermissionViolation(CapabilityKind::Audio)));
        assert_eq!(instance.state(), InstanceState::Faulted);
        assert_eq!(instance.provider_reads(CapabilityKind::Audio), 0);
        assert!(instance.health().last_error.is_some());
    }

    #[test]
    fn saga_counters_after_three_calls() {
        let mut instance = load(&fixtures::sine_bundle(), rand_device(9)).unwrap();
        instance.manifest().unwrap();
        for _ in 0..3 {
            instance.call(Codec::Varint).unwrap();
        }
        let saga = instance.health();
        assert_eq!(saga.invocations, 3);
        assert!(saga.total_exec_nanos > 0);
        assert!(saga.last_error.is_none());
    }

    #[test]
    fn native_and_containerized_agree() {
        let (graph, models) = fixtures::sine_graph_and_models();
        for seed in 0..20u64 {
            let profile = rand_device(seed);
            let mut providers = ProviderSet::from_profile(&profile).unwrap();
            let native =
                run_native(&graph, &models, &mut providers, &mut io::sink()).unwrap();

            for codec in [Codec::Fixed, Codec::Varint] {
                let mut instance = load(&fixtures::sine_bundle(), rand_device(seed)).unwrap();
                instance.manifest().unwrap();
                let out = instance.call(codec).unwrap();
                assert_eq!(out.payload(), native.payload(), "seed {seed} codec {codec:?}");
            }
        }
    }

    #[test]
    fn empty_graph_is_rejected() {
        let graph = PipelineGraph { stages: vec![], sink: OutputKind::Serial };
        let mut providers = ProviderSet::from_profile(&rand_device(0)).unwrap();
        assert!(matches!(
            run_native(&graph, &HashMap::new(), &mut providers, &mut io::sink()),
            Err(RuntimeError::EmptyPipeline)
        ));
    }

    #[test]
    fn constant_audio_through_fft_is_dc_only() {
        let text = "FROM runicos/base\nCAPABILITY AUDIO a --hz 16000 --samples 8\nPROC_BLOCK runicos/fft fft\nRUN a fft\nOUT serial";
        let graph = crate::runefile::analyze(&crate::runefile::parse(text).unwrap()).unwrap();
        let profile = DeviceProfile::new(
            "const",
            vec![(CapabilityKind::Audio, ProviderBinding::Constant(1.0))],
            1 << 20,
        )
        .unwrap();
        let mut providers = ProviderSet::from_profile(&profile).unwrap();
        let out =
            run_native(&graph, &HashMap::new(), &mut providers, &mut io::sink()).unwrap();
        let mags = out.as_f32();
        assert!((mags[0] - 8.0).abs() < 1e-5);
        assert!(mags[1..].iter().all(|&m| m.abs() < 1e-5));
    }

    #[test]
    fn serial_sink_lines() {
        let sink = SharedSink::default();
        let device = DeviceProfile::new(
            "const",
            vec![(CapabilityKind::Rand, ProviderBinding::Constant(0.0))],
            1 << 20,
        )
        .unwrap();
        let mut instance = load(&fixtures::sine_bundle(), device).unwrap();
        instance.set_sink(Box::new(sink.clone()));
        instance.manifest().unwrap();
        instance.call(Codec::Fixed).unwrap();
        instance.call(Codec::Fixed).unwrap();
        let text = sink.contents();
        assert_eq!(text.lines().count(), 2);
        for line in text.lines() {
            line.split(' ').for_each(|tok| {
                tok.parse::<f32>().expect("serial output is decimal floats");
            });
        }
    }
}
