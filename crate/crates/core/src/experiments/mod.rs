//! Command implementations behind the `sill` binary.
//!
//! Each command reads a JSON config, validates it in full, computes, and
//! writes its artifacts plus a `run_manifest.json` into the output directory.
//! All files are written atomically and depend only on the config and seed.

pub mod config;

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::bench::{example1_residual, make_snapshots, BuiltinField, Example1Table};
use crate::closure::{closure_experiment, theorem1_decay, GridSpec, SpannedField};
use crate::dictionary::{ConjLogistic, OrderCheckResult, SillDictionary};
use crate::error::{Result, SillError};
use crate::io::{read_json, read_snapshots, to_json_pretty, write_atomic, CsvTable};
use crate::regression::{fit_edmd, fit_generator, predict_ct, residual, KoopmanModel, Mode};
use crate::stats::{expected_conjunctive, expected_error_rates, figure2_sweep, RNG_ALGORITHM};

pub use config::{
    ClosureConfig, CompleteDictionaryConfig, DictionarySource, Example1Config, FieldConfig, FitConfig,
    PredictConfig, SillComparison, StatsConfig, Theorem1Config,
};

pub const MANIFEST_FILE: &str = "run_manifest.json";
pub const DEFAULT_SEED: u64 = 0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Fit,
    Edmd,
    Predict,
    Closure,
    Theorem1,
    Stats,
    Example1,
    CompleteDictionary,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Fit => "fit",
            Command::Edmd => "edmd",
            Command::Predict => "predict",
            Command::Closure => "closure",
            Command::Theorem1 => "theorem1",
            Command::Stats => "stats",
            Command::Example1 => "example1",
            Command::CompleteDictionary => "complete-dictionary",
        }
    }
}

/// Where a command reads relative paths from and writes its outputs to.
#[derive(Clone, Debug)]
pub struct RunContext {
    /// Directory that relative paths in the config resolve against.
    pub base_dir: PathBuf,
    pub out_dir: PathBuf,
    /// Overrides any seed in the config.
    pub seed: Option<u64>,
}

/// Provenance record written next to every command's outputs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config_sha256: String,
    pub seed: u64,
    pub rng: String,
    pub outputs: Vec<String>,
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

fn parse<T: for<'de> serde::Deserialize<'de>>(text: &str) -> Result<T> {
    Ok(serde_json::from_str(text)?)
}

/// Collects output files and writes them atomically in order.
struct Outputs<'a> {
    dir: &'a Path,
    names: Vec<String>,
}

impl<'a> Outputs<'a> {
    fn new(dir: &'a Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir, names: Vec::new() })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        write_atomic(&self.dir.join(name), contents.as_bytes())?;
        self.names.push(name.to_string());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        self.write(name, &to_json_pretty(value)?)
    }
}

/// Runs `cmd` with the JSON `config_text`. Returns the manifest that was written.
pub fn run(cmd: Command, config_text: &str, ctx: &RunContext) -> Result<RunManifest> {
    let seed = match cmd {
        Command::Stats => ctx
            .seed
            .or(parse::<StatsConfig>(config_text).ok().and_then(|c| c.seed))
            .unwrap_or(DEFAULT_SEED),
        _ => ctx.seed.unwrap_or(DEFAULT_SEED),
    };
    let base = ctx.base_dir.as_path();
    let mut out = Outputs::new(&ctx.out_dir)?;
    let outcome = match cmd {
        Command::Fit | Command::Edmd => {
            let c: FitConfig = parse(config_text)?;
            c.validate(base)?;
            cmd_fit(&c, cmd == Command::Edmd, base, &mut out)
        }
        Command::Predict => {
            let c: PredictConfig = parse(config_text)?;
            c.validate(base)?;
            cmd_predict(&c, base, &mut out)
        }
        Command::Closure => {
            let c: ClosureConfig = parse(config_text)?;
            c.validate(base)?;
            cmd_closure(&c, base, &mut out)
        }
        Command::Theorem1 => {
            let c: Theorem1Config = parse(config_text)?;
            c.validate()?;
            cmd_theorem1(&c, &mut out)
        }
        Command::Stats => {
            let c: StatsConfig = parse(config_text)?;
            c.validate()?;
            cmd_stats(&c, seed, &mut out)
        }
        Command::Example1 => {
            let c: Example1Config = parse(config_text)?;
            c.validate()?;
            cmd_example1(&c, &mut out)
        }
        Command::CompleteDictionary => {
            let c: CompleteDictionaryConfig = parse(config_text)?;
            c.validate(base)?;
            cmd_complete_dictionary(&c, base, &mut out)
        }
    };
    // Outputs written before a numerical failure are still described by a manifest.
    if let Err(e) = &outcome {
        if !e.is_numerical() {
            return Err(outcome.unwrap_err());
        }
    }
    let manifest = RunManifest {
        command: cmd.name().to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_sha256: hex::encode(Sha256::digest(config_text.as_bytes())),
        seed,
        rng: RNG_ALGORITHM.to_string(),
        outputs: out.names.clone(),
    };
    write_atomic(&ctx.out_dir.join(MANIFEST_FILE), to_json_pretty(&manifest)?.as_bytes())?;
    outcome.map(|()| manifest)
}

#[derive(Serialize)]
struct ResidualSummary {
    mode: Mode,
    ridge: f64,
    snapshots: usize,
    dictionary_size: usize,
    max_abs: f64,
    mean_inf_norm: f64,
    max_row_norm: f64,
    mean_row_norm: f64,
    per_function_max_abs: Vec<f64>,
}

fn cmd_fit(c: &FitConfig, edmd: bool, base: &Path, out: &mut Outputs) -> Result<()> {
    let snaps = read_snapshots(&config::resolve(base, &c.snapshots), &config::resolve(base, &c.manifest))?;
    let dict = c.dictionary.load(base)?;
    let model = if edmd {
        fit_edmd(&snaps, &dict, c.ridge)?
    } else {
        fit_generator(&snaps, &dict, c.ridge)?
    };
    let res = residual(&model, &snaps)?;
    out.json("model.json", &model)?;
    out.json(
        "residual_summary.json",
        &ResidualSummary {
            mode: model.mode(),
            ridge: model.ridge(),
            snapshots: snaps.len(),
            dictionary_size: dict.len(),
            max_abs: res.max_abs,
            mean_inf_norm: res.mean_inf_norm,
            max_row_norm: res.max_row_norm,
            mean_row_norm: res.mean_row_norm,
            per_function_max_abs: res.per_function_max_abs,
        },
    )
}

#[derive(Serialize)]
struct PredictSummary {
    trajectory: usize,
    steps: usize,
    diverged: bool,
}

fn cmd_predict(c: &PredictConfig, base: &Path, out: &mut Outputs) -> Result<()> {
    let model: KoopmanModel = read_json(&config::resolve(base, &c.model))?;
    let trajs = c
        .initial_conditions
        .par_iter()
        .map(|y0| predict_ct(&model, y0, c.horizon, c.dt))
        .collect::<Result<Vec<_>>>()?;
    let m = model.dictionary().m();
    let mut table = CsvTable::new(
        ["trajectory", "step", "t"]
            .into_iter()
            .map(String::from)
            .chain((1..=m).map(|i| format!("y{i}"))),
    );
    let mut summary = Vec::with_capacity(trajs.len());
    for (k, tr) in trajs.iter().enumerate() {
        for (step, y) in tr.states.iter().enumerate() {
            let mut row = vec![k.to_string(), step.to_string(), num(step as f64 * tr.dt)];
            row.extend(y.iter().map(|&v| num(v)));
            table.push(row);
        }
        summary.push(PredictSummary {
            trajectory: k,
            steps: tr.states.len().saturating_sub(1),
            diverged: tr.diverged,
        });
    }
    out.write("trajectories.csv", &table.render())?;
    out.json("predict_summary.json", &summary)?;
    let count = summary.iter().filter(|s| s.diverged).count();
    if count > 0 {
        return Err(SillError::Diverged { count });
    }
    Ok(())
}

fn load_field(f: &FieldConfig, base: &Path) -> Result<SpannedField> {
    SpannedField::from_rows(f.dictionary.load(base)?, &f.weights)
}

fn cmd_closure(c: &ClosureConfig, base: &Path, out: &mut Outputs) -> Result<()> {
    let sf = load_field(&c.field, base)?;
    let reports = closure_experiment(&sf, &c.grid, &c.alpha_scales, c.ridge, c.a)?;
    let mut table = CsvTable::new(["scale", "residual_max", "B"]);
    for r in &reports {
        table.push(vec![num(r.alpha_scale), num(r.residual_max), num(r.b)]);
    }
    out.json("closure_reports.json", &reports)?;
    out.write("closure.csv", &table.render())
}

#[derive(Serialize)]
struct Theorem1Summary {
    slope: f64,
    intercept: f64,
    grid_points: usize,
    delta: f64,
}

fn cmd_theorem1(c: &Theorem1Config, out: &mut Outputs) -> Result<()> {
    if !(c.f.dominates(&c.g)? || c.g.dominates(&c.f)?) {
        return Err(SillError::Incomparable);
    }
    let pts = c.grid.separated_points([&c.f, &c.g]);
    if pts.is_empty() {
        return Err(SillError::InvalidParameter(format!(
            "no grid point is {} away from the center hyperplanes",
            c.grid.delta
        )));
    }
    let fit = theorem1_decay(&c.f, &c.g, &pts, &c.scales, c.grid.delta)?;
    let mut table = CsvTable::new(["scale", "max_error"]);
    for (s, e) in fit.alphas.iter().zip(&fit.max_errors) {
        table.push(vec![num(*s), num(*e)]);
    }
    out.write("theorem1.csv", &table.render())?;
    out.json(
        "theorem1.json",
        &Theorem1Summary {
            slope: fit.slope,
            intercept: fit.intercept,
            grid_points: pts.len(),
            delta: c.grid.delta,
        },
    )
}

fn cmd_stats(c: &StatsConfig, seed: u64, out: &mut Outputs) -> Result<()> {
    let moments = figure2_sweep(&c.a_values, c.quad_points, c.samples, seed)?;
    let mut mt = CsvTable::new(["a", "expectation", "variance", "mc_expectation", "mc_stderr", "samples", "seed"]);
    for r in &moments {
        mt.push(vec![
            num(r.a),
            num(r.expectation),
            num(r.variance),
            num(r.mc_expectation),
            num(r.mc_stderr),
            r.samples.to_string(),
            r.seed.to_string(),
        ]);
    }
    let rates = expected_error_rates(&c.m_values, c.a, c.samples, seed)?;
    let mut rt = CsvTable::new(["m", "rate_linear", "rate_bilinear", "mc_linear", "mc_bilinear"]);
    for r in &rates {
        rt.push(vec![
            r.m.to_string(),
            num(r.rate_linear),
            num(r.rate_bilinear),
            num(r.mc_linear),
            num(r.mc_bilinear),
        ]);
    }
    let mut ct = CsvTable::new(["m", "mc_expectation", "mc_stderr", "bound", "samples", "seed"]);
    for &m in &c.m_values {
        let e = expected_conjunctive(m, c.a, c.samples, seed)?;
        ct.push(vec![
            m.to_string(),
            num(e.mean),
            num(e.stderr),
            num(0.5f64.powi(m as i32)),
            e.samples.to_string(),
            e.seed.to_string(),
        ]);
    }
    out.write("moments.csv", &mt.render())?;
    out.write("error_rates.csv", &rt.render())?;
    out.write("conjunctive.csv", &ct.render())
}

#[derive(Serialize)]
struct SillFitSummary {
    interval: [f64; 2],
    n_logistics: usize,
    alpha: f64,
    training_points: usize,
    heldout_points: usize,
    residual_max: f64,
    residual_mean: f64,
    polynomial_residual_max: f64,
}

#[derive(Serialize)]
struct Example1Summary {
    polynomial: Example1Table,
    sill: SillFitSummary,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

/// Fits `ẏ = y²` with a SILL dictionary on a bounded interval and, for
/// contrast, the degree-`n` polynomial basis on the same points.
fn sill_comparison(n: usize, s: &SillComparison) -> Result<SillFitSummary> {
    let [lo, hi] = s.interval;
    let h = (hi - lo) / s.n_logistics as f64;
    let logistics = (0..s.n_logistics)
        .map(|k| ConjLogistic::new(vec![lo + (k as f64 + 0.5) * h], vec![s.alpha]))
        .collect::<Result<Vec<_>>>()?;
    let dict = SillDictionary::new(1, logistics)?;
    let grid = GridSpec {
        lo: vec![lo],
        hi: vec![hi],
        points_per_dim: s.points,
        delta: 1e-3,
    };
    let train = grid.training_points();
    let held = grid.heldout_points();
    let field = BuiltinField::Quadratic;
    let model = fit_generator(&make_snapshots(&field, &train)?, &dict, s.ridge)?;
    let res = residual(&model, &make_snapshots(&field, &held)?)?;
    let fit_y: Vec<f64> = train.iter().map(|p| p[0]).collect();
    let held_y: Vec<f64> = held.iter().map(|p| p[0]).collect();
    let poly = example1_residual(n, &fit_y, &held_y)?;
    Ok(SillFitSummary {
        interval: s.interval,
        n_logistics: s.n_logistics,
        alpha: s.alpha,
        training_points: train.len(),
        heldout_points: held.len(),
        residual_max: res.max_abs,
        residual_mean: res.mean_inf_norm,
        polynomial_residual_max: poly.rows.iter().map(|r| r.residual.abs()).fold(0.0, f64::max),
    })
}

fn cmd_example1(c: &Example1Config, out: &mut Outputs) -> Result<()> {
    let [lo, hi] = c.fit_interval;
    let table = example1_residual(c.n, &linspace(lo, hi, c.fit_points), &c.eval_y)?;
    let sill = sill_comparison(c.n, &c.sill)?;
    let mut csv = CsvTable::new(["y", "residual", "ratio"]);
    for r in &table.rows {
        csv.push(vec![num(r.y), num(r.residual), num(r.ratio)]);
    }
    out.write("example1_polynomial.csv", &csv.render())?;
    out.json(
        "example1.json",
        &Example1Summary {
            polynomial: table,
            sill,
        },
    )
}

#[derive(Serialize)]
struct CompletionSummary {
    original_logistics: usize,
    completed_logistics: usize,
    original_order: OrderCheckResult,
    completed_order: OrderCheckResult,
}

fn cmd_complete_dictionary(c: &CompleteDictionaryConfig, base: &Path, out: &mut Outputs) -> Result<()> {
    let dict = c.dictionary.load(base)?;
    let done = dict.join_completion();
    out.json("completed_dictionary.json", &done)?;
    out.json(
        "order_check.json",
        &CompletionSummary {
            original_logistics: dict.n_logistics(),
            completed_logistics: done.n_logistics(),
            original_order: dict.check_total_order(),
            completed_order: done.check_total_order(),
        },
    )
}

/// Exit status for a command result: 0 success, 2 bad input, 3 numerical failure.
pub fn exit_code(result: &Result<RunManifest>) -> i32 {
    match result {
        Ok(_) => 0,
        Err(e) if e.is_numerical() => 3,
        Err(_) => 2,
    }
}

/// Stable machine-readable kind for an error.
pub fn error_kind(e: &SillError) -> &'static str {
    match e {
        SillError::DimensionMismatch { .. } => "dimension_mismatch",
        SillError::ModeMismatch { .. } => "mode_mismatch",
        SillError::InvalidParameter(_) => "invalid_parameter",
        SillError::EmptySnapshots => "empty_snapshots",
        SillError::NonFinite(_) => "non_finite",
        SillError::IndexOutOfRange { .. } => "index_out_of_range",
        SillError::Incomparable => "total_order_violated",
        SillError::OnHyperplane { .. } => "on_hyperplane",
        SillError::SingularPoint => "singular_point",
        SillError::QuadratureNonConvergence { .. } => "quadrature_non_convergence",
        SillError::Diverged { .. } => "diverged",
        SillError::Solve(_) => "solve_failed",
        SillError::Parse { .. } => "parse",
        SillError::Io(_) => "io",
        SillError::Json(_) => "config",
        SillError::Csv(_) => "csv",
    }
}

/// One-line error report: `error kind=<kind> exit=<code> message="<text>"`.
pub fn error_line(e: &SillError) -> String {
    let code = if e.is_numerical() { 3 } else { 2 };
    let msg = e.to_string().replace('\\', "\\\\").replace('"', "\\\"").replace('\n', " ");
    format!("error kind={} exit={code} message=\"{msg}\"", error_kind(e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(dir: &Path) -> RunContext {
        RunContext {
            base_dir: dir.to_path_buf(),
            out_dir: dir.join("out"),
            seed: Some(7),
        }
    }

    #[test]
    fn error_line_is_single_line() {
        let line = error_line(&SillError::Parse {
            line: 3,
            message: "bad \"x\"\nmore".into(),
        });
        assert!(!line.contains('\n'));
        assert!(line.starts_with("error kind=parse exit=2 "));
        assert!(line.contains("line 3"));
    }

    #[test]
    fn theorem1_incomparable_fails() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = r#"{"f":{"mu":[0.0,1.0],"alpha":[2,2]},"g":{"mu":[1.0,0.0],"alpha":[2,2]},
                      "grid":{"lo":[-2,-2],"hi":[2,2],"points_per_dim":8,"delta":0.1}}"#;
        let r = run(Command::Theorem1, cfg, &ctx(dir.path()));
        assert!(matches!(r, Err(SillError::Incomparable)));
        assert_eq!(exit_code(&r), 2);
        assert!(error_line(r.as_ref().unwrap_err()).contains("total-order"));
    }

    #[test]
    fn closure_zero_weights_give_zero_bounds() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = r#"{"field":{"dictionary":{"m":2,"logistics":[{"mu":[-0.375,0.625],"alpha":[12,12]},
                        {"mu":[0.625,-0.375],"alpha":[12,12]}]},"weights":[[0,0],[0,0]]},
                      "grid":{"lo":[-2,-2],"hi":[2,2],"points_per_dim":8,"delta":0.1}}"#;
        run(Command::Closure, cfg, &ctx(dir.path())).unwrap();
        let reports: Vec<crate::ClosureReport> = read_json(&dir.path().join("out/closure_reports.json")).unwrap();
        assert_eq!(reports.len(), 4);
        for r in reports {
            assert_eq!((r.bar_b1, r.bar_b2, r.tilde_b1, r.tilde_b2, r.b), (0.0, 0.0, 0.0, 0.0, 0.0));
            assert!(r.residual_max < 1e-9);
        }
    }

    #[test]
    fn default_closure_field_is_monotone() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = r#"{"grid":{"lo":[-2,-2],"hi":[2,2],"points_per_dim":8,"delta":0.1}}"#;
        run(Command::Closure, cfg, &ctx(dir.path())).unwrap();
        let reports: Vec<crate::ClosureReport> = read_json(&dir.path().join("out/closure_reports.json")).unwrap();
        assert!(reports.windows(2).all(|w| w[1].residual_max <= w[0].residual_max), "{reports:?}");
        let csv = fs::read_to_string(dir.path().join("out/closure.csv")).unwrap();
        assert!(csv.starts_with("scale,residual_max,B\n"));
    }

    #[test]
    fn stats_defaults_have_half_expectation() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = r#"{"samples": 20000}"#;
        let m = run(Command::Stats, cfg, &ctx(dir.path())).unwrap();
        assert_eq!(m.seed, 7);
        let text = fs::read_to_string(dir.path().join("out/moments.csv")).unwrap();
        let rows: Vec<&str> = text.lines().skip(1).collect();
        assert_eq!(rows.len(), 4);
        for r in rows {
            let e: f64 = r.split(',').nth(1).unwrap().parse().unwrap();
            assert!((e - 0.5).abs() < 1e-3);
        }
        let rates = fs::read_to_string(dir.path().join("out/error_rates.csv")).unwrap();
        let second: Vec<&str> = rates.lines().nth(2).unwrap().split(',').collect();
        assert_eq!(second[0], "2");
        assert_eq!(second[1].parse::<f64>().unwrap(), 0.125);
        assert_eq!(second[2].parse::<f64>().unwrap(), 0.03125);
    }

    #[test]
    fn example1_records_slope_and_sill_residual() {
        let dir = tempfile::tempdir().unwrap();
        run(Command::Example1, r#"{"n":3}"#, &ctx(dir.path())).unwrap();
        let v: serde_json::Value = read_json(&dir.path().join("out/example1.json")).unwrap();
        let slope = v["polynomial"]["growth_exponent"].as_f64().unwrap();
        assert!((slope - 4.0).abs() < 0.05, "{slope}");
        let sill = v["sill"]["residual_max"].as_f64().unwrap();
        assert!(sill.is_finite());
        assert!(run(Command::Example1, "{}", &ctx(dir.path())).is_err());
    }

    #[test]
    fn complete_dictionary_appends_join() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = r#"{"dictionary":{"m":2,"logistics":[{"mu":[0,1],"alpha":[1,1]},{"mu":[1,0],"alpha":[2,2]}]}}"#;
        run(Command::CompleteDictionary, cfg, &ctx(dir.path())).unwrap();
        let d: SillDictionary = read_json(&dir.path().join("out/completed_dictionary.json")).unwrap();
        assert_eq!(d.n_logistics(), 3);
        assert_eq!(d.logistics()[2].mu(), &[1.0, 1.0]);
    }
}
