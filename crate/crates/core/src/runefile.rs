//! Runefile front end: a line-oriented instruction grammar
//! (FROM / CAPABILITY / PROC_BLOCK / MODEL / RUN / OUT), parsed into a
//! [`RunefileAst`] and shape-checked into a [`PipelineGraph`].
//!
//! One instruction per line, tokens whitespace-separated, flags as
//! `--key value`, shape literals as `[d1,d2,...]` with no internal spaces.
//! `#` starts a comment; blank lines are ignored.

use std::fmt;

use thiserror::Error;

pub const BASE_IMAGE: &str = "runicos/base";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OutputKind {
    Serial,
}

impl fmt::Display for OutputKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OutputKind::Serial => f.write_str("serial"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CapabilityKind {
    Audio,
    Rand,
}

impl CapabilityKind {
    pub fn keyword(self) -> &'static str {
        match self {
            CapabilityKind::Audio => "AUDIO",
            CapabilityKind::Rand => "RAND",
        }
    }

    pub fn from_keyword(s: &str) -> Option<CapabilityKind> {
        match s {
            "AUDIO" => Some(CapabilityKind::Audio),
            "RAND" => Some(CapabilityKind::Rand),
            _ => None,
        }
    }
}

impl fmt::Display for CapabilityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

/// Built-in processing blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlockId {
    Fft,
    Normalize,
}

impl BlockId {
    pub fn source(self) -> &'static str {
        match self {
            BlockId::Fft => "runicos/fft",
            BlockId::Normalize => "runicos/normalize",
        }
    }

    pub fn from_source(s: &str) -> Option<BlockId> {
        match s {
            "runicos/fft" => Some(BlockId::Fft),
            "runicos/normalize" => Some(BlockId::Normalize),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CapabilityDecl {
    pub kind: CapabilityKind,
    pub name: String,
    /// Declaration-ordered `--flag value` pairs. Unknown flags are kept
    /// verbatim; the capability provider interprets them.
    pub params: Vec<(String, u32)>,
    pub line: u32,
}

impl CapabilityDecl {
    pub fn param(&self, key: &str) -> Option<u32> {
        self.params.iter().find(|(k, _)| k == key).map(|&(_, v)| v)
    }
}

#[derive(Debug, Clone)]
pub struct ProcBlockDecl {
    pub block: BlockId,
    pub name: String,
    pub line: u32,
}

#[derive(Debug, Clone)]
pub struct ModelDecl {
    pub path: String,
    pub name: String,
    pub input_shape: Vec<u32>,
    pub output_shape: Vec<u32>,
    pub line: u32,
}

#[derive(Debug, Clone)]
pub struct RunefileAst {
    pub base: String,
    pub capabilities: Vec<CapabilityDecl>,
    pub proc_blocks: Vec<ProcBlockDecl>,
    pub models: Vec<ModelDecl>,
    pub run: Vec<String>,
    pub out: OutputKind,
    pub run_line: u32,
}

// Line numbers are diagnostics, not structure; equality ignores them so that
// parse(render(ast)) == ast holds regardless of original layout.
impl PartialEq for CapabilityDecl {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.name == other.name && self.params == other.params
    }
}

impl PartialEq for ProcBlockDecl {
    fn eq(&self, other: &Self) -> bool {
        self.block == other.block && self.name == other.name
    }
}

impl PartialEq for ModelDecl {
    fn eq(&self, other: &Self) -> bool {
        self.path == other.path
            && self.name == other.name
            && self.input_shape == other.input_shape
            && self.output_shape == other.output_shape
    }
}

impl PartialEq for RunefileAst {
    fn eq(&self, other: &Self) -> bool {
        self.base == other.base
            && self.capabilities == other.capabilities
            && self.proc_blocks == other.proc_blocks
            && self.models == other.models
            && self.run == other.run
            && self.out == other.out
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("line {line}:{col}: {message}")]
    Syntax { line: u32, col: u32, message: String },
    #[error("line {line}: Runefile must start with a FROM instruction")]
    MissingBase { line: u32 },
    #[error("line {line}: duplicate {instruction} instruction")]
    DuplicateInstruction { line: u32, instruction: &'static str },
    #[error("line {line}: unknown instruction `{word}`")]
    UnknownInstruction { line: u32, word: String },
    #[error("line {line}: name `{name}` is already bound")]
    DuplicateName { line: u32, name: String },
    #[error("line {line}: missing {instruction} instruction")]
    MissingInstruction { line: u32, instruction: &'static str },
}

impl ParseError {
    pub fn line(&self) -> u32 {
        match self {
            ParseError::Syntax { line, .. }
            | ParseError::MissingBase { line }
            | ParseError::DuplicateInstruction { line, .. }
            | ParseError::UnknownInstruction { line, .. }
            | ParseError::DuplicateName { line, .. }
            | ParseError::MissingInstruction { line, .. } => *line,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AnalyzeError {
    #[error("line {line}: `{name}` does not resolve to a declared stage")]
    UnresolvedName { line: u32, name: String },
    #[error(
        "line {line}: shape mismatch between `{from_stage}` {from_shape:?} and `{to_stage}` {to_shape:?}"
    )]
    ShapeMismatch {
        line: u32,
        from_stage: String,
        to_stage: String,
        from_shape: Vec<u32>,
        to_shape: Vec<u32>,
    },
    #[error("line {line}: RUN must start with a capability source")]
    NoCapabilitySource { line: u32 },
    #[error("line {line}: capability `{name}` may only appear first in RUN")]
    MisplacedCapability { line: u32, name: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageKind {
    Capability(CapabilityKind),
    ProcBlock(BlockId),
    Model,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage {
    pub id: String,
    pub kind: StageKind,
    /// None for the capability source, which has no upstream.
    pub input_shape: Option<Vec<u32>>,
    pub output_shape: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineGraph {
    pub stages: Vec<Stage>,
    pub sink: OutputKind,
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

/// Tokens with their 1-based starting column.
fn tokenize(line: &str) -> Vec<(u32, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in line.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = start.take() {
                out.push((s as u32 + 1, &line[s..i]));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((s as u32 + 1, &line[s..]));
    }
    out
}

fn syntax(line: u32, col: u32, message: impl Into<String>) -> ParseError {
    ParseError::Syntax { line, col, message: message.into() }
}

/// Parses a shape literal: `[d1,d2,...]` or a bare positive integer
/// (normalized to `[n]`).
fn parse_shape(tok: &str, line: u32, col: u32) -> Result<Vec<u32>, ParseError> {
    let inner = if let Some(stripped) = tok.strip_prefix('[') {
        stripped
            .strip_suffix(']')
            .ok_or_else(|| syntax(line, col, "unterminated shape literal"))?
    } else {
        tok
    };
    let mut dims = Vec::new();
    for part in inner.split(',') {
        let d: u32 = part
            .parse()
            .map_err(|_| syntax(line, col, format!("invalid shape dimension `{part}`")))?;
        if d == 0 {
            return Err(syntax(line, col, "shape dimensions must be >= 1"));
        }
        dims.push(d);
    }
    if dims.is_empty() {
        return Err(syntax(line, col, "shape must not be empty"));
    }
    Ok(dims)
}

/// Parses trailing `--key value` flags, preserving order.
fn parse_flags(
    toks: &[(u32, &str)],
    line: u32,
) -> Result<Vec<(String, String, u32)>, ParseError> {
    let mut flags = Vec::new();
    let mut i = 0;
    while i < toks.len() {
        let (col, tok) = toks[i];
        let key = tok
            .strip_prefix("--")
            .ok_or_else(|| syntax(line, col, format!("expected `--flag`, found `{tok}`")))?;
        if key.is_empty() {
            return Err(syntax(line, col, "empty flag name"));
        }
        let (vcol, value) = *toks
            .get(i + 1)
            .ok_or_else(|| syntax(line, col, format!("flag `--{key}` is missing a value")))?;
        if flags.iter().any(|(k, _, _)| k == key) {
            return Err(syntax(line, col, format!("duplicate flag `--{key}`")));
        }
        flags.push((key.to_string(), value.to_string(), vcol));
        i += 2;
    }
    Ok(flags)
}

pub fn parse(text: &str) -> Result<RunefileAst, ParseError> {
    let mut base: Option<String> = None;
    let mut capabilities: Vec<CapabilityDecl> = Vec::new();
    let mut proc_blocks: Vec<ProcBlockDecl> = Vec::new();
    let mut models: Vec<ModelDecl> = Vec::new();
    let mut run: Option<(Vec<String>, u32)> = None;
    let mut out: Option<OutputKind> = None;
    let mut last_line = 1u32;

    let name_taken = |name: &str,
                      caps: &[CapabilityDecl],
                      blocks: &[ProcBlockDecl],
                      models: &[ModelDecl]| {
        caps.iter().any(|c| c.name == name)
            || blocks.iter().any(|b| b.name == name)
            || models.iter().any(|m| m.name == name)
    };

    for (idx, raw) in text.lines().enumerate() {
        let line = idx as u32 + 1;
        last_line = line;
        let content = raw.split('#').next().unwrap_or("");
        let toks = tokenize(content);
        if toks.is_empty() {
            continue;
        }
        let (col0, instr) = toks[0];
        let args = &toks[1..];

        if base.is_none() && instr != "FROM" {
            return Err(ParseError::MissingBase { line });
        }

        match instr {
            "FROM" => {
                if base.is_some() {
                    return Err(ParseError::DuplicateInstruction { line, instruction: "FROM" });
                }
                let (acol, image) = *args
                    .first()
                    .ok_or_else(|| syntax(line, col0, "FROM requires a base image"))?;
                if args.len() > 1 {
                    return Err(syntax(line, args[1].0, "FROM takes exactly one argument"));
                }
                if image != BASE_IMAGE {
                    return Err(syntax(
                        line,
                        acol,
                        format!("unsupported base `{image}`; only `{BASE_IMAGE}` is available"),
                    ));
                }
                base = Some(image.to_string());
            }
            "CAPABILITY" => {
                let (kcol, kw) = *args
                    .first()
                    .ok_or_else(|| syntax(line, col0, "CAPABILITY requires a kind and a name"))?;
                let kind = CapabilityKind::from_keyword(kw)
                    .ok_or_else(|| syntax(line, kcol, format!("unknown capability kind `{kw}`")))?;
                let (ncol, name) = *args
                    .get(1)
                    .ok_or_else(|| syntax(line, kcol, "CAPABILITY requires a name"))?;
                if !is_identifier(name) {
                    return Err(syntax(line, ncol, format!("invalid identifier `{name}`")));
                }
                if name_taken(name, &capabilities, &proc_blocks, &models) {
                    return Err(ParseError::DuplicateName { line, name: name.to_string() });
                }
                let mut params = Vec::new();
                for (key, value, vcol) in parse_flags(&args[2..], line)? {
                    let v: u32 = value.parse().map_err(|_| {
                        syntax(line, vcol, format!("flag `--{key}` expects an integer"))
                    })?;
                    if v == 0 {
                        return Err(syntax(
                            line,
                            vcol,
                            format!("flag `--{key}` must be strictly positive"),
                        ));
                    }
                    params.push((key, v));
                }
                if kind == CapabilityKind::Audio {
                    for required in ["hz", "samples"] {
                        if !params.iter().any(|(k, _)| k == required) {
                            return Err(syntax(
                                line,
                                col0,
                                format!("AUDIO capability requires `--{required}`"),
                            ));
                        }
                    }
                }
                capabilities.push(CapabilityDecl { kind, name: name.to_string(), params, line });
            }
            "PROC_BLOCK" => {
                let (scol, source) = *args
                    .first()
                    .ok_or_else(|| syntax(line, col0, "PROC_BLOCK requires a source and a name"))?;
                let block = BlockId::from_source(source).ok_or_else(|| {
                    syntax(line, scol, format!("unknown proc block `{source}`"))
                })?;
                let (ncol, name) = *args
                    .get(1)
                    .ok_or_else(|| syntax(line, scol, "PROC_BLOCK requires a name"))?;
                if !is_identifier(name) {
                    return Err(syntax(line, ncol, format!("invalid identifier `{name}`")));
                }
                if let Some(&(ecol, extra)) = args.get(2) {
                    return Err(syntax(line, ecol, format!("unexpected token `{extra}`")));
                }
                if name_taken(name, &capabilities, &proc_blocks, &models) {
                    return Err(ParseError::DuplicateName { line, name: name.to_string() });
                }
                proc_blocks.push(ProcBlockDecl { block, name: name.to_string(), line });
            }
            "MODEL" => {
                let (pcol, path) = *args
                    .first()
                    .ok_or_else(|| syntax(line, col0, "MODEL requires a path and a name"))?;
                let (ncol, name) = *args
                    .get(1)
                    .ok_or_else(|| syntax(line, pcol, "MODEL requires a name"))?;
                if !is_identifier(name) {
                    return Err(syntax(line, ncol, format!("invalid identifier `{name}`")));
                }
                if name_taken(name, &capabilities, &proc_blocks, &models) {
                    return Err(ParseError::DuplicateName { line, name: name.to_string() });
                }
                let mut input_shape = None;
                let mut output_shape = None;
                for (key, value, vcol) in parse_flags(&args[2..], line)? {
                    match key.as_str() {
                        "input" => input_shape = Some(parse_shape(&value, line, vcol)?),
                        "output" => output_shape = Some(parse_shape(&value, line, vcol)?),
                        other => {
                            return Err(syntax(
                                line,
                                vcol,
                                format!("unknown MODEL flag `--{other}`"),
                            ))
                        }
                    }
                }
                let input_shape = input_shape
                    .ok_or_else(|| syntax(line, col0, "MODEL requires `--input`"))?;
                let output_shape = output_shape
                    .ok_or_else(|| syntax(line, col0, "MODEL requires `--output`"))?;
                models.push(ModelDecl {
                    path: path.to_string(),
                    name: name.to_string(),
                    input_shape,
                    output_shape,
                    line,
                });
            }
            "RUN" => {
                if run.is_some() {
                    return Err(ParseError::DuplicateInstruction { line, instruction: "RUN" });
                }
                if args.is_empty() {
                    return Err(syntax(line, col0, "RUN requires at least one stage name"));
                }
                let mut names = Vec::new();
                for &(ncol, name) in args {
                    if !is_identifier(name) {
                        return Err(syntax(line, ncol, format!("invalid identifier `{name}`")));
                    }
                    names.push(name.to_string());
                }
                run = Some((names, line));
            }
            "OUT" => {
                if out.is_some() {
                    return Err(ParseError::DuplicateInstruction { line, instruction: "OUT" });
                }
                let (ocol, sink) = *args
                    .first()
                    .ok_or_else(|| syntax(line, col0, "OUT requires an output kind"))?;
                if args.len() > 1 {
                    return Err(syntax(line, args[1].0, "OUT takes exactly one argument"));
                }
                if !sink.eq_ignore_ascii_case("serial") {
                    return Err(syntax(line, ocol, format!("unknown output kind `{sink}`")));
                }
                out = Some(OutputKind::Serial);
            }
            other => {
                return Err(ParseError::UnknownInstruction { line, word: other.to_string() })
            }
        }
    }

    let base = base.ok_or(ParseError::MissingBase { line: last_line })?;
    let (run, run_line) = run.ok_or(ParseError::MissingInstruction {
        line: last_line,
        instruction: "RUN",
    })?;
    let out = out.ok_or(ParseError::MissingInstruction { line: last_line, instruction: "OUT" })?;

    Ok(RunefileAst { base, capabilities, proc_blocks, models, run, out, run_line })
}

/// Canonical pretty-printer, one instruction per line. `parse(render(ast))`
/// reproduces `ast` for any valid AST.
pub fn render(ast: &RunefileAst) -> String {
    let mut out = String::new();
    out.push_str(&format!("FROM {}\n", ast.base));
    for cap in &ast.capabilities {
        out.push_str(&format!("CAPABILITY {} {}", cap.kind.keyword(), cap.name));
        for (k, v) in &cap.params {
            out.push_str(&format!(" --{k} {v}"));
        }
        out.push('\n');
    }
    for block in &ast.proc_blocks {
        out.push_str(&format!("PROC_BLOCK {} {}\n", block.block.source(), block.name));
    }
    for model in &ast.models {
        out.push_str(&format!(
            "MODEL {} {} --input {} --output {}\n",
            model.path,
            model.name,
            render_shape(&model.input_shape),
            render_shape(&model.output_shape)
        ));
    }
    out.push_str(&format!("RUN {}\n", ast.run.join(" ")));
    out.push_str(&format!("OUT {}\n", ast.out));
    out
}

fn render_shape(dims: &[u32]) -> String {
    let parts: Vec<String> = dims.iter().map(|d| d.to_string()).collect();
    format!("[{}]", parts.join(","))
}

/// Output shape of a capability source: `[samples, 1]` f32.
pub fn capability_output_shape(decl: &CapabilityDecl) -> Vec<u32> {
    vec![decl.param("samples").unwrap_or(1), 1]
}

pub fn analyze(ast: &RunefileAst) -> Result<PipelineGraph, AnalyzeError> {
    let line = ast.run_line;
    let mut stages: Vec<Stage> = Vec::new();
    let mut current_shape: Option<Vec<u32>> = None;

    for (pos, name) in ast.run.iter().enumerate() {
        let (kind, out_shape, declared_input) = if let Some(cap) =
            ast.capabilities.iter().find(|c| &c.name == name)
        {
            if pos != 0 {
                return Err(AnalyzeError::MisplacedCapability { line, name: name.clone() });
            }
            (StageKind::Capability(cap.kind), capability_output_shape(cap), None)
        } else if let Some(block) = ast.proc_blocks.iter().find(|b| &b.name == name) {
            // Built-in blocks are shape-preserving.
            let shape = current_shape.clone().ok_or(AnalyzeError::NoCapabilitySource { line })?;
            (StageKind::ProcBlock(block.block), shape.clone(), Some(shape))
        } else if let Some(model) = ast.models.iter().find(|m| &m.name == name) {
            if current_shape.is_none() {
                return Err(AnalyzeError::NoCapabilitySource { line });
            }
            (StageKind::Model, model.output_shape.clone(), Some(model.input_shape.clone()))
        } else {
            return Err(AnalyzeError::UnresolvedName { line, name: name.clone() });
        };

        if let (Some(upstream), Some(expected)) = (&current_shape, &declared_input) {
            if upstream != expected {
                let prev = stages.last().expect("non-first stage has a predecessor");
                return Err(AnalyzeError::ShapeMismatch {
                    line,
                    from_stage: prev.id.clone(),
                    to_stage: name.clone(),
                    from_shape: upstream.clone(),
                    to_shape: expected.clone(),
                });
            }
        }

        current_shape = Some(out_shape.clone());
        stages.push(Stage {
            id: name.clone(),
            kind,
            input_shape: declared_input,
            output_shape: out_shape,
        });
    }

    if stages.is_empty()
        || !matches!(stages[0].kind, StageKind::Capability(_))
    {
        return Err(AnalyzeError::NoCapabilitySource { line });
    }

    Ok(PipelineGraph { stages, sink: ast.out })
}

#[cfg(test)]
mod tests {
    use super::*;

    const AUDIO_PIPELINE: &str = "\
FROM runicos/base
CAPABILITY AUDIO audio --hz 16000 --samples 150 --sample-size 1500
PROC_BLOCK runicos/fft fft
MODEL ./example.rmodel model --input [150,1] --output 1
RUN audio fft model
OUT serial
";

    #[test]
    fn parses_audio_pipeline_example() {
        let ast = parse(AUDIO_PIPELINE).unwrap();
        assert_eq!(ast.base, "runicos/base");
        assert_eq!(ast.capabilities.len(), 1);
        let cap = &ast.capabilities[0];
        assert_eq!(cap.kind, CapabilityKind::Audio);
        assert_eq!(cap.name, "audio");
        assert_eq!(cap.param("hz"), Some(16000));
        assert_eq!(cap.param("samples"), Some(150));
        assert_eq!(cap.param("sample-size"), Some(1500));
        assert_eq!(ast.proc_blocks.len(), 1);
        assert_eq!(ast.proc_blocks[0].block, BlockId::Fft);
        assert_eq!(ast.models.len(), 1);
        assert_eq!(ast.models[0].input_shape, vec![150, 1]);
        assert_eq!(ast.models[0].output_shape, vec![1]); // `--output 1` normalized
        assert_eq!(ast.run, vec!["audio", "fft", "model"]);
        assert_eq!(ast.out, OutputKind::Serial);
    }

    #[test]
    fn parses_minimal_program() {
        let text = "FROM runicos/base\nCAPABILITY RAND r --samples 1\nMODEL ./m.rmodel m --input [1] --output [1]\nRUN r m\nOUT serial";
        let ast = parse(text).unwrap();
        assert!(ast.proc_blocks.is_empty());
        assert_eq!(ast.capabilities[0].kind, CapabilityKind::Rand);
        assert_eq!(ast.run, vec!["r", "m"]);
    }

    #[test]
    fn missing_base_when_first_instruction_is_not_from() {
        let err = parse("CAPABILITY AUDIO a --hz 16000 --samples 2\n").unwrap_err();
        assert_eq!(err, ParseError::MissingBase { line: 1 });
    }

    #[test]
    fn duplicate_run_rejected() {
        let text = format!("{AUDIO_PIPELINE}RUN audio model\n");
        let err = parse(&text).unwrap_err();
        assert_eq!(err, ParseError::DuplicateInstruction { line: 7, instruction: "RUN" });
    }

    #[test]
    fn unknown_instruction_rejected() {
        let err = parse("FROM runicos/base\nCOPY a b\n").unwrap_err();
        assert_eq!(err, ParseError::UnknownInstruction { line: 2, word: "COPY".into() });
    }

    #[test]
    fn duplicate_name_across_kinds_rejected() {
        let text = "FROM runicos/base\nCAPABILITY RAND x --samples 1\nPROC_BLOCK runicos/fft x\nRUN x\nOUT serial";
        let err = parse(text).unwrap_err();
        assert_eq!(err, ParseError::DuplicateName { line: 3, name: "x".into() });
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let text = "# header\nFROM runicos/base # base layer\n\nCAPABILITY RAND r --samples 1\nMODEL ./m.rmodel m --input 1 --output 1\nRUN r m\nOUT serial\n";
        assert!(parse(text).is_ok());
    }

    #[test]
    fn audio_requires_hz_and_samples() {
        let err = parse("FROM runicos/base\nCAPABILITY AUDIO a --hz 16000\nRUN a\nOUT serial").unwrap_err();
        assert!(matches!(err, ParseError::Syntax { line: 2, .. }));
    }

    #[test]
    fn zero_param_rejected() {
        let err = parse("FROM runicos/base\nCAPABILITY RAND r --samples 0\nRUN r\nOUT serial").unwrap_err();
        assert!(matches!(err, ParseError::Syntax { line: 2, .. }));
    }

    #[test]
    fn analyze_audio_pipeline_shapes() {
        let graph = analyze(&parse(AUDIO_PIPELINE).unwrap()).unwrap();
        assert_eq!(graph.stages.len(), 3);
        assert_eq!(graph.stages[0].output_shape, vec![150, 1]);
        assert_eq!(graph.stages[1].input_shape, Some(vec![150, 1]));
        assert_eq!(graph.stages[1].output_shape, vec![150, 1]);
        assert_eq!(graph.stages[2].input_shape, Some(vec![150, 1]));
        assert_eq!(graph.stages[2].output_shape, vec![1]);
        assert_eq!(graph.sink, OutputKind::Serial);
    }

    #[test]
    fn analyze_shape_mismatch() {
        let text = "FROM runicos/base\nCAPABILITY AUDIO audio --hz 16000 --samples 150\nMODEL ./m.rmodel model --input [75,1] --output 1\nRUN audio model\nOUT serial";
        let err = analyze(&parse(text).unwrap()).unwrap_err();
        assert!(matches!(err, AnalyzeError::ShapeMismatch { .. }));
    }

    #[test]
    fn analyze_requires_capability_first() {
        let text = "FROM runicos/base\nCAPABILITY AUDIO audio --hz 16000 --samples 8\nPROC_BLOCK runicos/fft fft\nMODEL ./m.rmodel model --input [8,1] --output 1\nRUN fft model\nOUT serial";
        let err = analyze(&parse(text).unwrap()).unwrap_err();
        assert!(matches!(err, AnalyzeError::NoCapabilitySource { .. }));
    }

    #[test]
    fn analyze_unresolved_name() {
        let text = "FROM runicos/base\nCAPABILITY RAND r --samples 1\nRUN r ghost\nOUT serial";
        let err = analyze(&parse(text).unwrap()).unwrap_err();
        assert_eq!(err, AnalyzeError::UnresolvedName { line: 3, name: "ghost".into() });
    }

    #[test]
    fn render_round_trips_audio_pipeline() {
        let ast = parse(AUDIO_PIPELINE).unwrap();
        assert_eq!(parse(&render(&ast)).unwrap(), ast);
    }
}
