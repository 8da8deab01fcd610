//! Line-based sectioned text format for model specs, data-generating models
//! and experiments. The grammar is documented in `docs/config-format.md`.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::estimation::{FitConfig, InitStrategy};
use crate::presets;
use crate::quasi_lik::TruncationRule;
use crate::sem::{Block, Cell, CheckedSpec, EntryMap, StructuralSpec};
use crate::simulator::{self, JumpSpec, LatentSdeSpec, TrueModelSpec};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{file}:{line}: {message}")]
    Syntax {
        file: String,
        line: usize,
        message: String,
    },
    #[error("{file}: {message}")]
    Invalid { file: String, message: String },
    #[error("{file}: {source}")]
    Io {
        file: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub name: String,
    pub line: usize,
    pub entries: Vec<Entry>,
    /// Lines without `=`, split on whitespace and commas.
    pub rows: Vec<(Vec<String>, usize)>,
}

impl Section {
    pub fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.key == key)
    }

    pub fn get_all<'a>(&'a self, key: &'a str) -> impl Iterator<Item = &'a Entry> + 'a {
        self.entries.iter().filter(move |e| e.key == key)
    }
}

/// A parsed file: sections in order of appearance. Section names may repeat.
#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub file: String,
    pub sections: Vec<Section>,
}

fn tokens(s: &str) -> Vec<String> {
    s.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

impl Document {
    pub fn parse(text: &str, file: &str) -> Result<Document, ConfigError> {
        let mut sections: Vec<Section> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let syntax = |message: String| ConfigError::Syntax {
                file: file.to_string(),
                line: line_no,
                message,
            };
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| syntax("unterminated section header".into()))?
                    .trim();
                if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                    return Err(syntax(format!("invalid section name '{name}'")));
                }
                sections.push(Section {
                    name: name.to_string(),
                    line: line_no,
                    entries: Vec::new(),
                    rows: Vec::new(),
                });
                continue;
            }
            let section = sections
                .last_mut()
                .ok_or_else(|| syntax("content before the first section header".into()))?;
            if let Some((key, value)) = line.split_once('=') {
                let key = key.trim();
                if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                    return Err(syntax(format!("invalid key '{key}'")));
                }
                section.entries.push(Entry {
                    key: key.to_string(),
                    value: value.trim().to_string(),
                    line: line_no,
                });
            } else {
                section.rows.push((tokens(line), line_no));
            }
        }
        Ok(Document {
            file: file.to_string(),
            sections,
        })
    }

    pub fn read(path: &Path) -> Result<Document, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            file: path.display().to_string(),
            source,
        })?;
        Document::parse(&text, &path.display().to_string())
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }

    pub fn sections_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Section> + 'a {
        self.sections.iter().filter(move |s| s.name == name)
    }

    fn syntax(&self, line: usize, message: impl Into<String>) -> ConfigError {
        ConfigError::Syntax {
            file: self.file.clone(),
            line,
            message: message.into(),
        }
    }

    fn invalid(&self, message: impl Into<String>) -> ConfigError {
        ConfigError::Invalid {
            file: self.file.clone(),
            message: message.into(),
        }
    }

    fn require<'a>(&'a self, section: &'a Section, key: &str) -> Result<&'a Entry, ConfigError> {
        section
            .get(key)
            .ok_or_else(|| self.syntax(section.line, format!("[{}] is missing '{key}'", section.name)))
    }

    fn parse_num<T: std::str::FromStr>(&self, entry: &Entry) -> Result<T, ConfigError> {
        entry
            .value
            .parse()
            .map_err(|_| self.syntax(entry.line, format!("'{}' is not a valid value for {}", entry.value, entry.key)))
    }

    fn parse_list(&self, entry: &Entry) -> Result<Vec<f64>, ConfigError> {
        tokens(&entry.value)
            .iter()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| self.syntax(entry.line, format!("'{t}' is not a number")))
            })
            .collect()
    }
}

fn parse_cell(tok: &str) -> Option<Cell> {
    if let Some(idx) = tok.strip_prefix('t') {
        let k: usize = idx.parse().ok()?;
        return (k >= 1).then(|| Cell::Free(k - 1));
    }
    tok.parse::<f64>().ok().filter(|v| v.is_finite()).map(Cell::Fixed)
}

/// Reads a matrix section into an entry map of the given shape.
///
/// Accepted bodies: one `diag c1 .. cn` line (square blocks), or `rows` lines
/// of `cols` cells. Symmetric blocks also accept lower-triangle rows where
/// row `i` has `i + 1` cells.
fn parse_entry_map(
    doc: &Document,
    section: &Section,
    rows: usize,
    cols: usize,
    symmetric: bool,
) -> Result<EntryMap, ConfigError> {
    let cell = |tok: &String, line: usize| {
        parse_cell(tok).ok_or_else(|| doc.syntax(line, format!("'{tok}' is neither a number nor a parameter tN")))
    };
    if let Some(e) = section.entries.first() {
        return Err(doc.syntax(e.line, format!("[{}] takes matrix rows, not key = value", section.name)));
    }
    let mut map = EntryMap::zeros(rows, cols);
    if let [(first, line)] = section.rows.as_slice() {
        if first.first().map(String::as_str) == Some("diag") {
            if rows != cols {
                return Err(doc.syntax(*line, format!("diag is only valid for square blocks ([{}] is {rows}x{cols})", section.name)));
            }
            if first.len() - 1 != rows {
                return Err(doc.syntax(*line, format!("diag needs {rows} cells, found {}", first.len() - 1)));
            }
            for (i, tok) in first[1..].iter().enumerate() {
                map.set(i, i, cell(tok, *line)?);
            }
            return Ok(map);
        }
    }
    if section.rows.len() != rows {
        return Err(doc.syntax(
            section.line,
            format!("[{}] needs {rows} rows, found {}", section.name, section.rows.len()),
        ));
    }
    for (i, (toks, line)) in section.rows.iter().enumerate() {
        let lower = symmetric && toks.len() == i + 1 && i + 1 != cols;
        if toks.len() != cols && !lower {
            return Err(doc.syntax(*line, format!("row {} of [{}] needs {cols} cells, found {}", i + 1, section.name, toks.len())));
        }
        for (j, tok) in toks.iter().enumerate() {
            map.set(i, j, cell(tok, *line)?);
        }
    }
    Ok(map)
}

fn parse_dims(doc: &Document) -> Result<(usize, usize, usize, usize, Option<String>), ConfigError> {
    let model = doc
        .section("model")
        .ok_or_else(|| doc.invalid("missing [model] section"))?;
    let p1 = doc.parse_num(doc.require(model, "p1")?)?;
    let p2 = doc.parse_num(doc.require(model, "p2")?)?;
    let k1 = doc.parse_num(doc.require(model, "k1")?)?;
    let k2 = doc.parse_num(doc.require(model, "k2")?)?;
    Ok((p1, p2, k1, k2, model.get("name").map(|e| e.value.clone())))
}

/// A candidate model read from a spec file.
#[derive(Debug, Clone)]
pub struct ModelFile {
    pub name: Option<String>,
    pub spec: CheckedSpec,
    /// Values of the `[init]` section, if present.
    pub init: Option<Vec<f64>>,
}

pub fn parse_model(doc: &Document) -> Result<ModelFile, ConfigError> {
    let (p1, p2, k1, k2, name) = parse_dims(doc)?;
    let mut spec = StructuralSpec::zeros(p1, p2, k1, k2);
    for block in Block::ALL {
        if let Some(section) = doc.section(block.name()) {
            let (r, c) = spec.expected_shape(block);
            *spec.block_mut(block) = parse_entry_map(doc, section, r, c, block.is_symmetric())?;
        }
    }
    for s in &doc.sections {
        if !matches!(s.name.as_str(), "model" | "init") && Block::from_name(&s.name).is_none() {
            return Err(doc.syntax(s.line, format!("unknown section [{}]", s.name)));
        }
    }
    let spec = spec.validate().map_err(|e| doc.invalid(e.to_string()))?;
    let init = match doc.section("init") {
        Some(s) => {
            let values = doc.parse_list(doc.require(s, "values")?)?;
            if values.len() != spec.q() {
                return Err(doc.invalid(format!("[init] has {} values, model has q = {}", values.len(), spec.q())));
            }
            Some(values)
        }
        None => None,
    };
    Ok(ModelFile { name, spec, init })
}

/// Loads a model spec from a file, or a preset (`model1`, `model2`, `model3`).
pub fn load_model(path_or_preset: &str) -> Result<ModelFile, ConfigError> {
    if let Some((spec, theta)) = presets::by_name(path_or_preset) {
        return Ok(ModelFile {
            name: Some(path_or_preset.to_string()),
            spec,
            init: Some(theta),
        });
    }
    parse_model(&Document::read(Path::new(path_or_preset))?)
}

fn parse_latent(doc: &Document, section: &Section, dim: usize) -> Result<LatentSdeSpec, ConfigError> {
    let vec_of = |key: &str, default: f64| -> Result<Vec<f64>, ConfigError> {
        match section.get(key) {
            Some(e) => {
                let v = doc.parse_list(e)?;
                if v.len() != dim {
                    return Err(doc.syntax(e.line, format!("{key} needs {dim} values, found {}", v.len())));
                }
                Ok(v)
            }
            None => Ok(vec![default; dim]),
        }
    };
    let matrix_rows = |key: &str| -> Result<Option<DMatrix<f64>>, ConfigError> {
        let rows: Vec<(Vec<f64>, usize)> = section
            .get_all(key)
            .map(|e| doc.parse_list(e).map(|v| (v, e.line)))
            .collect::<Result<_, _>>()?;
        if rows.is_empty() {
            return Ok(None);
        }
        if rows.len() != dim {
            return Err(doc.syntax(section.line, format!("[{}] needs {dim} '{key}' lines", section.name)));
        }
        let cols = rows[0].0.len();
        if let Some((_, line)) = rows.iter().find(|(r, _)| r.len() != cols || cols == 0) {
            return Err(doc.syntax(*line, format!("'{key}' rows must all have the same non-zero length")));
        }
        Ok(Some(DMatrix::from_fn(dim, cols, |i, j| rows[i].0[j])))
    };
    if let Some(e) = section.entries.iter().find(|e| {
        !matches!(
            e.key.as_str(),
            "drift_rate" | "drift_row" | "mean" | "diffusion" | "diffusion_row" | "jump_intensity" | "jump_variance" | "x0"
        )
    }) {
        return Err(doc.syntax(e.line, format!("unknown key '{}' in [{}]", e.key, section.name)));
    }
    let drift = match matrix_rows("drift_row")? {
        Some(m) if m.ncols() == dim => m,
        Some(_) => return Err(doc.syntax(section.line, format!("drift_row lines need {dim} values"))),
        None => DMatrix::from_diagonal(&DVector::from_vec(vec_of("drift_rate", 0.0)?)),
    };
    let diffusion = match matrix_rows("diffusion_row")? {
        Some(m) => m,
        None => DMatrix::from_diagonal(&DVector::from_vec(vec_of("diffusion", 0.0)?)),
    };
    let intensity = vec_of("jump_intensity", 0.0)?;
    let variance = vec_of("jump_variance", 0.0)?;
    let sde = LatentSdeSpec {
        drift,
        mean: DVector::from_vec(vec_of("mean", 0.0)?),
        diffusion,
        jumps: intensity
            .into_iter()
            .zip(variance)
            .map(|(intensity, variance)| JumpSpec { intensity, variance })
            .collect(),
        x0: DVector::from_vec(vec_of("x0", 0.0)?),
    };
    sde.validate().map_err(|e| doc.syntax(section.line, e.to_string()))?;
    Ok(sde)
}

fn fixed_matrix(doc: &Document, name: &str, rows: usize, cols: usize) -> Result<DMatrix<f64>, ConfigError> {
    let Some(section) = doc.section(name) else {
        return Ok(DMatrix::zeros(rows, cols));
    };
    let map = parse_entry_map(doc, section, rows, cols, false)?;
    let mut m = DMatrix::zeros(rows, cols);
    for (i, j, c) in map.cells() {
        match c {
            Cell::Fixed(v) => m[(i, j)] = v,
            Cell::Free(_) => {
                return Err(doc.syntax(section.line, format!("[{name}] of a data-generating model must be numeric")))
            }
        }
    }
    Ok(m)
}

/// Parses a data-generating model: `[model]` dims, numeric `[lambda1]`,
/// `[lambda2]`, `[b]`, `[gamma]`, and latent sections `[xi]`, `[delta]`,
/// `[eps]`, `[zeta]`.
pub fn parse_true_model(doc: &Document) -> Result<TrueModelSpec, ConfigError> {
    let (p1, p2, k1, k2, _) = parse_dims(doc)?;
    let latent = |name: &str, dim: usize| -> Result<LatentSdeSpec, ConfigError> {
        match doc.section(name) {
            Some(s) => parse_latent(doc, s, dim),
            None => Ok(LatentSdeSpec::diagonal(&vec![0.0; dim], &vec![0.0; dim], &vec![0.0; dim], &vec![JumpSpec::NONE; dim], &vec![0.0; dim])),
        }
    };
    for s in &doc.sections {
        if !matches!(s.name.as_str(), "model" | "lambda1" | "lambda2" | "b" | "gamma" | "xi" | "delta" | "eps" | "zeta") {
            return Err(doc.syntax(s.line, format!("unknown section [{}]", s.name)));
        }
    }
    let model = TrueModelSpec {
        lambda1: fixed_matrix(doc, "lambda1", p1, k1)?,
        lambda2: fixed_matrix(doc, "lambda2", p2, k2)?,
        b: fixed_matrix(doc, "b", k2, k2)?,
        gamma: fixed_matrix(doc, "gamma", k2, k1)?,
        sde_xi: latent("xi", k1)?,
        sde_delta: latent("delta", p1)?,
        sde_eps: latent("eps", p2)?,
        sde_zeta: latent("zeta", k2)?,
    };
    model.validate().map_err(|e| doc.invalid(e.to_string()))?;
    Ok(model)
}

/// `paper` or a path to a data-generating model file.
pub fn load_true_model(path_or_preset: &str) -> Result<TrueModelSpec, ConfigError> {
    if path_or_preset == "paper" {
        return Ok(simulator::paper_true_model());
    }
    parse_true_model(&Document::read(Path::new(path_or_preset))?)
}

/// One candidate of an experiment.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub name: String,
    pub spec: CheckedSpec,
    pub init: InitStrategy,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub true_model: TrueModelSpec,
    pub candidates: Vec<Candidate>,
    pub replications: usize,
    pub n_grid: Vec<usize>,
    pub t_end: f64,
    pub rule: TruncationRule,
    /// Optimizer settings; the init strategy comes from each candidate.
    pub fit: FitConfig,
    pub master_seed: u64,
}

impl ExperimentConfig {
    /// The reference study at desk scale: Models 1-3 initialized at their
    /// true values, `D = 10`, `rho = 0.4`, `T = 1`, 200 replications,
    /// `n` in `{5e4, 1e5}`.
    pub fn paper_default() -> Self {
        let candidates = ["model1", "model2", "model3"]
            .iter()
            .map(|name| {
                let (spec, theta) = presets::by_name(name).expect("preset");
                Candidate {
                    name: (*name).to_string(),
                    spec,
                    init: InitStrategy::GivenPoint(theta),
                }
            })
            .collect();
        ExperimentConfig {
            true_model: simulator::paper_true_model(),
            candidates,
            replications: 200,
            n_grid: vec![50_000, 100_000],
            t_end: 1.0,
            rule: TruncationRule::default(),
            fit: FitConfig::default(),
            master_seed: 20_240_501,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.replications < 1 {
            return Err("replications must be at least 1".into());
        }
        if self.n_grid.is_empty() || self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err("n_grid must be non-empty and strictly ascending".into());
        }
        if self.n_grid[0] < 2 {
            return Err("sample sizes must be at least 2".into());
        }
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return Err("t_end must be positive".into());
        }
        if self.candidates.is_empty() {
            return Err("at least one candidate is required".into());
        }
        let p = self.true_model.p();
        if let Some(c) = self.candidates.iter().find(|c| c.spec.p() != p) {
            return Err(format!("candidate '{}' has p = {}, data have p = {p}", c.name, c.spec.p()));
        }
        self.fit.validate().map_err(|e| e.to_string())
    }
}

fn resolve(base: &Path, value: &str) -> String {
    if presets::by_name(value).is_some() || value == "paper" {
        return value.to_string();
    }
    let p = PathBuf::from(value);
    if p.is_absolute() {
        value.to_string()
    } else {
        base.join(p).display().to_string()
    }
}

fn parse_bool(doc: &Document, e: &Entry) -> Result<bool, ConfigError> {
    match e.value.as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(doc.syntax(e.line, format!("'{}' is not a boolean", e.value))),
    }
}

/// Parses an experiment file. Relative paths are resolved against `base`.
pub fn parse_experiment(doc: &Document, base: &Path) -> Result<ExperimentConfig, ConfigError> {
    let defaults = ExperimentConfig::paper_default();
    let exp = doc
        .section("experiment")
        .ok_or_else(|| doc.invalid("missing [experiment] section"))?;
    for s in &doc.sections {
        if !matches!(s.name.as_str(), "experiment" | "candidate") {
            return Err(doc.syntax(s.line, format!("unknown section [{}]", s.name)));
        }
    }
    let known = [
        "true_model", "replications", "n_grid", "t_end", "d", "rho", "master_seed", "max_iters", "grad_tol",
        "step_tol", "reparameterize",
    ];
    if let Some(e) = exp.entries.iter().find(|e| !known.contains(&e.key.as_str())) {
        return Err(doc.syntax(e.line, format!("unknown key '{}' in [experiment]", e.key)));
    }
    let true_model = match exp.get("true_model") {
        Some(e) => load_true_model(&resolve(base, &e.value))?,
        None => defaults.true_model.clone(),
    };
    let replications = exp.get("replications").map(|e| doc.parse_num(e)).transpose()?.unwrap_or(defaults.replications);
    let n_grid = match exp.get("n_grid") {
        Some(e) => tokens(&e.value)
            .iter()
            .map(|t| {
                t.parse::<f64>()
                    .ok()
                    .filter(|v| *v >= 1.0 && v.fract() == 0.0)
                    .map(|v| v as usize)
                    .ok_or_else(|| doc.syntax(e.line, format!("'{t}' is not a positive integer")))
            })
            .collect::<Result<Vec<_>, _>>()?,
        None => defaults.n_grid.clone(),
    };
    let t_end = exp.get("t_end").map(|e| doc.parse_num(e)).transpose()?.unwrap_or(defaults.t_end);
    let d = exp.get("d").map(|e| doc.parse_num(e)).transpose()?.unwrap_or(defaults.rule.d());
    let rho = exp.get("rho").map(|e| doc.parse_num(e)).transpose()?.unwrap_or(defaults.rule.rho());
    let rule = TruncationRule::new(d, rho).map_err(|e| doc.invalid(e.to_string()))?;
    let master_seed = exp.get("master_seed").map(|e| doc.parse_num(e)).transpose()?.unwrap_or(defaults.master_seed);
    let mut fit = FitConfig::default();
    if let Some(e) = exp.get("max_iters") {
        fit.max_iters = doc.parse_num(e)?;
    }
    if let Some(e) = exp.get("grad_tol") {
        fit.grad_tol = doc.parse_num(e)?;
    }
    if let Some(e) = exp.get("step_tol") {
        fit.step_tol = doc.parse_num(e)?;
    }
    if let Some(e) = exp.get("reparameterize") {
        fit.reparameterize_positives = parse_bool(doc, e)?;
    }

    let mut candidates = Vec::new();
    for (idx, s) in doc.sections_named("candidate").enumerate() {
        let spec_entry = doc.require(s, "spec")?;
        let model = load_model(&resolve(base, &spec_entry.value))?;
        let name = s
            .get("name")
            .map(|e| e.value.clone())
            .or(model.name.clone())
            .unwrap_or_else(|| format!("model{}", idx + 1));
        let init = match s.get("init") {
            None => match &model.init {
                Some(t) => InitStrategy::GivenPoint(t.clone()),
                None => InitStrategy::MultiStart { count: 1, seed: master_seed },
            },
            Some(e) => {
                let toks = tokens(&e.value);
                match toks.first().map(String::as_str) {
                    Some("truth") | Some("given") => InitStrategy::GivenPoint(model.init.clone().ok_or_else(|| {
                        doc.syntax(e.line, format!("candidate '{name}' has no [init] values to start from"))
                    })?),
                    Some("default") => InitStrategy::MultiStart { count: 1, seed: master_seed },
                    Some("multi_start") | Some("multi-start") => {
                        let count = toks.get(1).and_then(|t| t.parse().ok()).ok_or_else(|| {
                            doc.syntax(e.line, "multi_start needs a start count")
                        })?;
                        let seed = match toks.get(2) {
                            Some(t) => t.parse().map_err(|_| doc.syntax(e.line, format!("'{t}' is not a seed")))?,
                            None => master_seed,
                        };
                        InitStrategy::MultiStart { count, seed }
                    }
                    _ => {
                        let values = doc.parse_list(e)?;
                        if values.len() != model.spec.q() {
                            return Err(doc.syntax(e.line, format!("init has {} values, model has q = {}", values.len(), model.spec.q())));
                        }
                        InitStrategy::GivenPoint(values)
                    }
                }
            }
        };
        candidates.push(Candidate {
            name,
            spec: model.spec,
            init,
        });
    }
    if candidates.is_empty() {
        candidates = defaults.candidates;
    }
    let cfg = ExperimentConfig {
        true_model,
        candidates,
        replications,
        n_grid,
        t_end,
        rule,
        fit,
        master_seed,
    };
    cfg.validate().map_err(|m| doc.invalid(m))?;
    Ok(cfg)
}

pub fn load_experiment(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let doc = Document::read(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_experiment(&doc, base)
}

/// Reads a parameter vector: numbers separated by commas, whitespace or
/// newlines; `#` comments and a non-numeric header line are ignored.
pub fn parse_theta(text: &str, file: &str) -> Result<Vec<f64>, ConfigError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let toks = tokens(line);
        let parsed: Result<Vec<f64>, _> = toks.iter().map(|t| t.parse::<f64>()).collect();
        match parsed {
            Ok(v) => out.extend(v),
            Err(_) if out.is_empty() && idx == 0 => continue,
            Err(_) => {
                return Err(ConfigError::Syntax {
                    file: file.to_string(),
                    line: idx + 1,
                    message: format!("'{line}' is not a list of numbers"),
                })
            }
        }
    }
    Ok(out)
}
