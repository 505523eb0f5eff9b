//! Flat key-value run configuration with `[section]` headers.
//!
//! Every parse failure is anchored to its line; unknown sections and keys
//! are rejected so typos cannot silently fall back to defaults.

use groundstate::field::Grid;
use groundstate::functionals::ProblemSpec;
use groundstate::nonlinearity::Nonlinearity;
use groundstate::solver::{InitKind, SolverConfig};
use groundstate::verify::Thresholds;
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

#[derive(Debug)]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn err(line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError {
        line,
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    Csv,
    Both,
}

#[derive(Debug, Clone)]
pub struct OracleConfig {
    pub u0_lo: f64,
    pub u0_hi: f64,
    pub r_max: f64,
    pub dr: f64,
    pub tol: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            u0_lo: 1.5,
            u0_hi: 10.0,
            r_max: 20.0,
            dr: 2e-3,
            tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub spec: ProblemSpec,
    pub grid: Grid,
    pub solver: SolverConfig,
    pub thresholds: Thresholds,
    pub oracle: OracleConfig,
    pub output_dir: PathBuf,
    pub format: OutputFormat,
}

struct Entry {
    line: usize,
    value: String,
    used: std::cell::Cell<bool>,
}

struct Section {
    line: usize,
    entries: BTreeMap<String, Entry>,
}

fn parse_sections(text: &str) -> Result<BTreeMap<String, Section>, ConfigError> {
    let mut sections: BTreeMap<String, Section> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| err(line_no, "unterminated section header"))?
                .trim()
                .to_string();
            if sections.contains_key(&name) {
                return Err(err(line_no, format!("duplicate section [{name}]")));
            }
            sections.insert(
                name.clone(),
                Section {
                    line: line_no,
                    entries: BTreeMap::new(),
                },
            );
            current = Some(name);
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(line_no, format!("expected key = value, got '{line}'")))?;
        let section = current
            .as_ref()
            .ok_or_else(|| err(line_no, "key before any [section]"))?;
        let entries = &mut sections.get_mut(section).unwrap().entries;
        let key = key.trim().to_string();
        if entries.contains_key(&key) {
            return Err(err(line_no, format!("duplicate key '{key}'")));
        }
        entries.insert(
            key,
            Entry {
                line: line_no,
                value: value.trim().to_string(),
                used: std::cell::Cell::new(false),
            },
        );
    }
    Ok(sections)
}

struct SectionReader<'a> {
    section: Option<&'a Section>,
}

impl<'a> SectionReader<'a> {
    fn raw(&self, key: &str) -> Option<&'a Entry> {
        self.section.and_then(|s| {
            s.entries.get(key).inspect(|e| {
                e.used.set(true);
            })
        })
    }

    fn f64(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.raw(key) {
            None => Ok(default),
            Some(e) => e
                .value
                .parse::<f64>()
                .map_err(|_| err(e.line, format!("'{key}' is not a number: '{}'", e.value))),
        }
    }

    fn usize(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.raw(key) {
            None => Ok(default),
            Some(e) => e
                .value
                .parse::<usize>()
                .map_err(|_| err(e.line, format!("'{key}' is not an integer: '{}'", e.value))),
        }
    }

    fn u64(&self, key: &str, default: u64) -> Result<u64, ConfigError> {
        match self.raw(key) {
            None => Ok(default),
            Some(e) => e
                .value
                .parse::<u64>()
                .map_err(|_| err(e.line, format!("'{key}' is not an integer: '{}'", e.value))),
        }
    }

    fn string(&self, key: &str, default: &str) -> String {
        self.raw(key)
            .map_or_else(|| default.to_string(), |e| e.value.clone())
    }

    fn required_line(&self, key: &str, fallback: usize) -> usize {
        self.section
            .map_or(fallback, |s| s.entries.get(key).map_or(s.line, |e| e.line))
    }
}

pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| err(0, format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
    let sections = parse_sections(text)?;
    for name in sections.keys() {
        if !["problem", "grid", "solver", "verify", "oracle", "output"].contains(&name.as_str()) {
            return Err(err(sections[name].line, format!("unknown section [{name}]")));
        }
    }
    let get = |name: &str| SectionReader {
        section: sections.get(name),
    };

    // [problem]
    let problem = get("problem");
    if problem.section.is_none() {
        return Err(err(0, "missing [problem] section"));
    }
    let dim = problem.usize("dimension", 0)?;
    let p = problem.f64("p", 0.0)?;
    let nl_name = problem.string("nonlinearity", "");
    if nl_name.is_empty() {
        return Err(err(
            problem.required_line("nonlinearity", 0),
            "missing 'nonlinearity' in [problem]",
        ));
    }
    let mut params = Vec::new();
    for key in ["q", "r"] {
        if let Some(e) = problem.raw(key) {
            let value = e
                .value
                .parse::<f64>()
                .map_err(|_| err(e.line, format!("'{key}' is not a number")))?;
            params.push((key.to_string(), value));
        }
    }
    let nonlinearity = Nonlinearity::by_name(&nl_name, &params)
        .map_err(|e| err(problem.required_line("nonlinearity", 0), e.to_string()))?;
    if let Some(e) = problem.raw("m") {
        let m: usize = e
            .value
            .parse()
            .map_err(|_| err(e.line, "'m' is not an integer".to_string()))?;
        if m != nonlinearity.m() {
            return Err(err(
                e.line,
                format!(
                    "m = {m} conflicts with nonlinearity '{}' (m = {})",
                    nl_name,
                    nonlinearity.m()
                ),
            ));
        }
    }
    let spec = ProblemSpec::new(dim, p, nonlinearity).map_err(|e| {
        err(
            problem.required_line("p", 0),
            format!("{e}; the exponent must satisfy 1 < p <= N"),
        )
    })?;

    // [grid]
    let grid_section = get("grid");
    if grid_section.section.is_none() {
        return Err(err(0, "missing [grid] section"));
    }
    let half_extent = grid_section.f64("half_extent", 0.0)?;
    let cells = grid_section.usize("cells_per_dim", 0)?;
    let grid = Grid::new(dim, half_extent, cells)
        .map_err(|e| err(grid_section.required_line("cells_per_dim", 0), e.to_string()))?;

    // [solver]
    let solver_section = get("solver");
    let defaults = SolverConfig::default();
    let init_kind = solver_section.string("init", "gaussian_bump");
    let init = match init_kind.as_str() {
        "gaussian_bump" => {
            let amplitude = solver_section.f64("init_amplitude", 2.0)?;
            let width = solver_section.f64("init_width", 1.5)?;
            let center = match solver_section.raw("init_center") {
                None => None,
                Some(e) => {
                    let parts: Result<Vec<f64>, _> =
                        e.value.split(',').map(|t| t.trim().parse::<f64>()).collect();
                    let parts = parts
                        .map_err(|_| err(e.line, "init_center must be comma-separated numbers"))?;
                    if parts.len() != dim {
                        return Err(err(e.line, format!("init_center needs {dim} coordinates")));
                    }
                    Some(parts)
                }
            };
            InitKind::Gaussian {
                amplitude,
                width,
                center,
            }
        }
        "from_file" => {
            let file = solver_section.string("init_file", "");
            if file.is_empty() {
                return Err(err(
                    solver_section.required_line("init", 0),
                    "init = from_file requires init_file",
                ));
            }
            let field = groundstate::io::read_field_csv(Path::new(&file)).map_err(|e| {
                err(
                    solver_section.required_line("init", 0),
                    format!("cannot load init_file: {e}"),
                )
            })?;
            InitKind::FromField(field)
        }
        other => {
            return Err(err(
                solver_section.required_line("init", 0),
                format!("unknown init '{other}' (gaussian_bump | from_file)"),
            ))
        }
    };
    let solver = SolverConfig {
        max_iterations: solver_section.usize("max_iterations", defaults.max_iterations)?,
        step_init: solver_section.f64("step_init", defaults.step_init)?,
        armijo_c: solver_section.f64("armijo_c", defaults.armijo_c)?,
        grad_regularization: solver_section
            .f64("grad_regularization", defaults.grad_regularization)?,
        tol_rel_j: solver_section.f64("tol_rel_j", defaults.tol_rel_j)?,
        seed: solver_section.u64("seed", defaults.seed)?,
        init,
        restarts: solver_section.usize("restarts", defaults.restarts)?,
        consistency_guard: solver_section.f64("consistency_guard", defaults.consistency_guard)?,
        precond_beta: solver_section.f64("precond_beta", defaults.precond_beta)?,
        precond_iters: solver_section.usize("precond_iters", defaults.precond_iters)?,
        reproject_band: solver_section.f64("reproject_band", defaults.reproject_band)?,
        norm_floor_rel: solver_section.f64("norm_floor_rel", defaults.norm_floor_rel)?,
        threads: solver_section.usize("threads", defaults.threads)?,
    };
    if solver.armijo_c <= 0.0 || solver.armijo_c >= 1.0 {
        return Err(err(0, format!("armijo_c = {} outside (0, 1)", solver.armijo_c)));
    }
    if solver.step_init <= 0.0 || solver.tol_rel_j <= 0.0 {
        return Err(err(0, "step_init and tol_rel_j must be positive".to_string()));
    }

    // [verify]
    let verify_section = get("verify");
    let d = Thresholds::default();
    let thresholds = Thresholds {
        symmetry: verify_section.f64("symmetry", d.symmetry)?,
        sign: verify_section.f64("sign", d.sign)?,
        monotonicity: verify_section.f64("monotonicity", d.monotonicity)?,
        variational: verify_section.f64("variational", d.variational)?,
        halving: verify_section.f64("halving", d.halving)?,
        sum_rule: verify_section.f64("sum_rule", d.sum_rule)?,
        sum_rule_critical: verify_section.f64("sum_rule_critical", d.sum_rule_critical)?,
        pohozaev: verify_section.f64("pohozaev", d.pohozaev)?,
        pohozaev_critical: verify_section.f64("pohozaev_critical", d.pohozaev_critical)?,
        domain_truncation: verify_section.f64("domain_truncation", d.domain_truncation)?,
    };

    // [oracle]
    let oracle_section = get("oracle");
    let od = OracleConfig::default();
    let oracle = OracleConfig {
        u0_lo: oracle_section.f64("u0_lo", od.u0_lo)?,
        u0_hi: oracle_section.f64("u0_hi", od.u0_hi)?,
        r_max: oracle_section.f64("r_max", od.r_max)?,
        dr: oracle_section.f64("dr", od.dr)?,
        tol: oracle_section.f64("tol", od.tol)?,
    };

    // [output]
    let output_section = get("output");
    let output_dir = PathBuf::from(output_section.string("dir", "out"));
    let format = match output_section.string("format", "json").as_str() {
        "json" => OutputFormat::Json,
        "csv" => OutputFormat::Csv,
        "both" => OutputFormat::Both,
        other => {
            return Err(err(
                output_section.required_line("format", 0),
                format!("unknown format '{other}' (json | csv | both)"),
            ))
        }
    };

    // reject unused keys so misspellings are loud
    for (name, section) in &sections {
        for (key, entry) in &section.entries {
            if !entry.used.get() {
                return Err(err(
                    entry.line,
                    format!("unknown key '{key}' in section [{name}]"),
                ));
            }
        }
    }

    Ok(RunConfig {
        spec,
        grid,
        solver,
        thresholds,
        oracle,
        output_dir,
        format,
    })
}
