//! Command implementations behind the `trifactor` binary.
//!
//! Every command returns an [`Output`] (exit code, stdout, stderr) instead
//! of printing, so tests can drive them directly. JSON goes to stdout and
//! diagnostics to stderr.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use trifactor::spectral::{analyze, DEFAULT_EIGEN_CAP, DEFAULT_EPSILON};
use trifactor::{check_triangle_factor, triangle_factor, Error, GenSpec, Graph, PipelineConfig, TriangleFactor};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_RESOURCE: i32 = 3;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Output {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Output {
    fn ok(stdout: String) -> Self {
        Output {
            code: EXIT_OK,
            stdout,
            stderr: String::new(),
        }
    }

    fn fail(code: i32, msg: impl Into<String>) -> Self {
        let mut stderr = msg.into();
        stderr.push('\n');
        Output {
            code,
            stdout: String::new(),
            stderr,
        }
    }
}

/// The command a manifest replays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum ManifestCommand {
    Generate {
        spec: GenSpec,
    },
    Analyze {
        input: PathBuf,
        epsilon: f64,
        eigen_cap: usize,
        seed: u64,
    },
    Solve {
        input: PathBuf,
        config: PipelineConfig,
    },
}

/// Everything needed to rerun a command with the same seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    #[serde(flatten)]
    pub command: ManifestCommand,
    pub version: String,
    pub wall_millis: f64,
}

#[derive(Parser, Debug)]
#[command(name = "trifactor", version, about = "Triangle factors in pseudorandom graphs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a seeded instance as an edge list.
    Generate {
        #[command(subcommand)]
        family: Family,
        #[arg(long, default_value_t = 0, global = true)]
        seed: u64,
        /// Edge-list destination; stdout when absent.
        #[arg(long, global = true)]
        out: Option<PathBuf>,
        #[arg(long, global = true)]
        manifest: Option<PathBuf>,
    },
    /// Spectrum, bijumbledness parameters and threshold verdicts as JSON.
    Analyze {
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        epsilon: f64,
        #[arg(long, default_value_t = DEFAULT_EIGEN_CAP)]
        eigen_cap: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Search for a triangle factor.
    Solve {
        input: PathBuf,
        #[command(flatten)]
        flags: SolveFlags,
        /// Run k independently seeded solves in parallel and report counts.
        #[arg(long)]
        trials: Option<usize>,
        /// Also write the factor JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Check a factor against a graph.
    Verify { graph: PathBuf, factor: PathBuf },
    /// Rerun a saved manifest.
    Replay { manifest: PathBuf },
}

#[derive(Subcommand, Debug, Clone)]
pub enum Family {
    Gnp { n: usize, p: f64 },
    RandomRegular { n: usize, d: usize },
    Paley { q: usize },
    Complete { n: usize },
    Cycle { n: usize },
    /// Part sizes, e.g. `multipartite 5 5 5`.
    Multipartite { parts: Vec<usize> },
}

impl Family {
    pub fn to_spec(&self, seed: u64) -> GenSpec {
        match self.clone() {
            Family::Gnp { n, p } => GenSpec::Gnp { n, p, seed },
            Family::RandomRegular { n, d } => GenSpec::RandomRegular { n, d, seed },
            Family::Paley { q } => GenSpec::Paley { q },
            Family::Complete { n } => GenSpec::Complete { n },
            Family::Cycle { n } => GenSpec::Cycle { n },
            Family::Multipartite { parts } => GenSpec::CompleteMultipartite { parts },
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct SolveFlags {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,
    /// Number of top-level chains; fitted to the graph when absent.
    #[arg(long)]
    pub level_scale: Option<f64>,
    #[arg(long)]
    pub q: Option<usize>,
    #[arg(long, default_value_t = 200)]
    pub max_restarts: usize,
    #[arg(long, default_value_t = trifactor::oracle::DEFAULT_ORACLE_CAP)]
    pub oracle_cap: usize,
}

impl SolveFlags {
    pub fn to_config(&self) -> PipelineConfig {
        PipelineConfig {
            seed: self.seed,
            epsilon: self.epsilon,
            level_scale: self.level_scale,
            q_override: self.q,
            max_restarts: self.max_restarts,
            oracle_cap: self.oracle_cap,
            ..PipelineConfig::default()
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> Output
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            return if code == EXIT_OK {
                Output::ok(text)
            } else {
                Output::fail(code, text.trim_end())
            };
        }
    };
    let start = Instant::now();
    let (command, manifest_path, mut out) = match cli.command {
        Command::Generate {
            family,
            seed,
            out,
            manifest,
        } => {
            let spec = family.to_spec(seed);
            let o = cmd_generate(&spec, out.as_deref());
            (ManifestCommand::Generate { spec }, manifest, o)
        }
        Command::Analyze {
            input,
            epsilon,
            eigen_cap,
            seed,
            manifest,
        } => {
            let input = fs::canonicalize(&input).unwrap_or(input);
            let o = cmd_analyze(&input, epsilon, eigen_cap, seed);
            (
                ManifestCommand::Analyze {
                    input,
                    epsilon,
                    eigen_cap,
                    seed,
                },
                manifest,
                o,
            )
        }
        Command::Solve {
            input,
            flags,
            trials,
            out,
            manifest,
        } => {
            let config = flags.to_config();
            let input = fs::canonicalize(&input).unwrap_or(input);
            let o = match trials {
                Some(k) => cmd_solve_trials(&input, &config, k),
                None => cmd_solve(&input, &config, out.as_deref()),
            };
            (ManifestCommand::Solve { input, config }, manifest, o)
        }
        Command::Verify { graph, factor } => return cmd_verify(&graph, &factor),
        Command::Replay { manifest } => return cmd_replay(&manifest),
    };
    if let Some(path) = manifest_path {
        let m = RunManifest {
            command,
            version: env!("CARGO_PKG_VERSION").to_string(),
            wall_millis: start.elapsed().as_secs_f64() * 1e3,
        };
        let text = serde_json::to_string_pretty(&m).expect("manifest serializes");
        if let Err(e) = fs::write(&path, text) {
            out.stderr.push_str(&format!("cannot write manifest {}: {e}\n", path.display()));
            if out.code == EXIT_OK {
                out.code = EXIT_INPUT;
            }
        }
    }
    out
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("value serializes");
    s.push('\n');
    s
}

fn read_graph(path: &Path) -> Result<Graph, Output> {
    let text = fs::read_to_string(path).map_err(|e| Output::fail(EXIT_INPUT, format!("cannot read {}: {e}", path.display())))?;
    Graph::parse_edge_list(&text).map_err(|e| Output::fail(EXIT_INPUT, format!("{}: {e}", path.display())))
}

fn error_code(e: &Error) -> i32 {
    match e {
        Error::Resource(_) => EXIT_RESOURCE,
        _ => EXIT_INPUT,
    }
}

/// Builds the instance and writes its edge list (to `out` or stdout). With
/// `out`, stdout carries a JSON summary `{family, n, m}`; without it the
/// summary goes to stderr.
pub fn cmd_generate(spec: &GenSpec, out: Option<&Path>) -> Output {
    let g = match spec.build() {
        Ok(g) => g,
        Err(e) => return Output::fail(EXIT_INPUT, format!("invalid instance: {e}")),
    };
    let summary = json!({ "family": spec.family(), "n": g.n(), "m": g.edge_count() });
    let edges = g.to_edge_list();
    match out {
        Some(path) => match fs::write(path, &edges) {
            Ok(()) => Output::ok(to_json(&summary)),
            Err(e) => Output::fail(EXIT_INPUT, format!("cannot write {}: {e}", path.display())),
        },
        None => Output {
            code: EXIT_OK,
            stdout: edges,
            stderr: format!("{summary}\n"),
        },
    }
}

/// Exit 2 on unreadable input, 3 when the eigensolve exceeds `eigen_cap`.
pub fn cmd_analyze(input: &Path, epsilon: f64, eigen_cap: usize, seed: u64) -> Output {
    let g = match read_graph(input) {
        Ok(g) => g,
        Err(o) => return o,
    };
    match analyze(&g, epsilon, eigen_cap, seed) {
        Ok(report) => Output::ok(to_json(&report)),
        Err(e) => Output::fail(error_code(&e), e.to_string()),
    }
}

/// Exit 0 with a verified factor, 1 when every attempt failed, 2 on input
/// errors. Stdout is `{"triangles": [...], "report": {...}}`.
pub fn cmd_solve(input: &Path, config: &PipelineConfig, out: Option<&Path>) -> Output {
    let g = match read_graph(input) {
        Ok(g) => g,
        Err(o) => return o,
    };
    let outcome = match triangle_factor(&g, config) {
        Ok(o) => o,
        Err(e) => return Output::fail(error_code(&e), e.to_string()),
    };
    let doc = json!({ "triangles": outcome.report.triangles, "report": outcome.report });
    let mut o = Output::ok(to_json(&doc));
    match &outcome.factor {
        Some(f) => {
            if let Some(path) = out {
                if let Err(e) = fs::write(path, to_json(f)) {
                    return Output::fail(EXIT_INPUT, format!("cannot write {}: {e}", path.display()));
                }
            }
        }
        None => {
            o.code = EXIT_FAILURE;
            let last = outcome.report.attempts.last().and_then(|a| a.failure.as_ref());
            o.stderr = match last {
                Some(f) => format!(
                    "no factor after {} attempts; last failure at {:?}: {}\n",
                    outcome.report.attempts.len(),
                    f.stage,
                    f.reason
                ),
                None => "no triangle factor exists\n".to_string(),
            };
        }
    }
    o
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub seed: u64,
    pub success: bool,
    pub attempts: usize,
    pub millis: f64,
}

/// Runs `k` solves with seeds `config.seed + i` in parallel. Exit 0 only if
/// all succeed.
pub fn cmd_solve_trials(input: &Path, config: &PipelineConfig, k: usize) -> Output {
    let g = match read_graph(input) {
        Ok(g) => g,
        Err(o) => return o,
    };
    let runs: Result<Vec<TrialSummary>, Error> = (0..k as u64)
        .into_par_iter()
        .map(|i| {
            let cfg = PipelineConfig {
                seed: config.seed.wrapping_add(i),
                ..config.clone()
            };
            let outcome = triangle_factor(&g, &cfg)?;
            Ok(TrialSummary {
                seed: cfg.seed,
                success: outcome.is_success(),
                attempts: outcome.report.attempts.len(),
                millis: outcome.report.total_millis,
            })
        })
        .collect();
    let runs = match runs {
        Ok(r) => r,
        Err(e) => return Output::fail(error_code(&e), e.to_string()),
    };
    let successes = runs.iter().filter(|r| r.success).count();
    let mut o = Output::ok(to_json(&json!({ "trials": k, "successes": successes, "runs": runs })));
    if successes < k {
        o.code = EXIT_FAILURE;
    }
    o
}

/// Exit 0 iff the factor covers every vertex of the graph with disjoint
/// host triangles; otherwise 1 and the first violation on stderr.
pub fn cmd_verify(graph: &Path, factor: &Path) -> Output {
    let g = match read_graph(graph) {
        Ok(g) => g,
        Err(o) => return o,
    };
    let text = match fs::read_to_string(factor) {
        Ok(t) => t,
        Err(e) => return Output::fail(EXIT_INPUT, format!("cannot read {}: {e}", factor.display())),
    };
    let f: TriangleFactor = match serde_json::from_str(&text) {
        Ok(f) => f,
        Err(e) => return Output::fail(EXIT_INPUT, format!("{}: {e}", factor.display())),
    };
    match check_triangle_factor(&g, &f, &g.vertex_set()) {
        Ok(()) => Output::ok(to_json(&json!({ "valid": true, "triangles": f.len() }))),
        Err(v) => Output {
            code: EXIT_FAILURE,
            stdout: to_json(&json!({ "valid": false, "violation": v.to_string() })),
            stderr: format!("{v}\n"),
        },
    }
}

pub fn cmd_replay(manifest: &Path) -> Output {
    let text = match fs::read_to_string(manifest) {
        Ok(t) => t,
        Err(e) => return Output::fail(EXIT_INPUT, format!("cannot read {}: {e}", manifest.display())),
    };
    let m: RunManifest = match serde_json::from_str(&text) {
        Ok(m) => m,
        Err(e) => return Output::fail(EXIT_INPUT, format!("{}: {e}", manifest.display())),
    };
    match &m.command {
        ManifestCommand::Generate { spec } => cmd_generate(spec, None),
        ManifestCommand::Analyze {
            input,
            epsilon,
            eigen_cap,
            seed,
        } => cmd_analyze(input, *epsilon, *eigen_cap, *seed),
        ManifestCommand::Solve { input, config } => cmd_solve(input, config, None),
    }
}
