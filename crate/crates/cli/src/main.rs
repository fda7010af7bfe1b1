//! Command-line front end: data ingestion, moment/cumulant computation,
//! critical values, validation runs and machine-readable JSON reports.

mod data;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_rational::BigRational;
use serde_json::{json, Map, Value};
use twostage_mw_core::cumulants::{mixed_cumulants, paper_aggregates, Weighting};
use twostage_mw_core::moments::{moment_key, moments_general, moments_null, MomentMode, MomentSet, MOMENT_ORDERS};
use twostage_mw_core::oracle::{simulate_joint, validate_formulas, ValidationMode, Verdict, DEFAULT_BUDGET};
use twostage_mw_core::pi::{null_pi_vector, pi_monte_carlo, pi_plugin_from_data, Pi, PiVector};
use twostage_mw_core::quantile::{
    critical_values_cf, critical_values_exact, overall_size_exact, CfOptions,
};
use twostage_mw_core::ustat::{two_stage_decision, two_stage_statistics, Outcome};
use twostage_mw_core::oracle::design_grid;
use twostage_mw_core::{Error as CoreError, Sampler, SampleDesign};

#[derive(Parser)]
#[command(name = "twostage-mw", version, about = "Two-stage Mann-Whitney moments, cumulants and critical values")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    /// Omit the timestamp so identical runs produce identical bytes.
    #[arg(long, global = true)]
    no_timestamp: bool,

    /// Render exact rationals as floating-point numbers.
    #[arg(long, global = true)]
    float: bool,

    /// Worker threads for simulation (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Args, Clone)]
struct DesignArgs {
    /// Stage-1 controls.
    #[arg(short = 'm', long = "m1")]
    m: u64,
    /// Stage-1 treated.
    #[arg(short = 'n', long = "n1")]
    n: u64,
    /// Total controls.
    #[arg(short = 'M', long = "m-total")]
    big_m: u64,
    /// Total treated.
    #[arg(short = 'N', long = "n-total")]
    big_n: u64,
}

impl DesignArgs {
    fn design(&self) -> Result<SampleDesign, CoreError> {
        SampleDesign::new(self.m, self.n, self.big_m, self.big_n)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PiSource {
    /// Exact null constants.
    NullTable,
    /// JSON file with the thirteen probabilities.
    File,
    /// Plug-in estimates from a trial data file.
    PluginFromData,
    /// Seeded Monte Carlo under the named distributions.
    MonteCarlo,
}

#[derive(Args, Clone)]
struct PiArgs {
    /// Where the comparison probabilities come from in general mode.
    #[arg(long, value_enum, default_value = "null-table")]
    pi_source: PiSource,

    /// JSON file for --pi-source file.
    #[arg(long)]
    pi_file: Option<PathBuf>,

    /// Control-arm sampling distribution, e.g. uniform(0,1) or normal(0,1).
    #[arg(long, default_value = "uniform(0,1)")]
    dist_x: String,

    /// Treated-arm sampling distribution.
    #[arg(long, default_value = "uniform(0,1)")]
    dist_y: String,

    /// Replicates for --pi-source monte-carlo.
    #[arg(long, default_value_t = 1_000_000)]
    pi_replications: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Joint raw moments of (U1, U2) up to total order 4.
    Moments {
        #[command(flatten)]
        design: DesignArgs,
        /// Exact null-hypothesis mode (rational output).
        #[arg(long, conflicts_with = "general")]
        null: bool,
        /// General mode driven by comparison probabilities.
        #[arg(long)]
        general: bool,
        #[command(flatten)]
        pi: PiArgs,
        /// Trial data file (for --pi-source plugin-from-data).
        #[arg(long)]
        data: Option<PathBuf>,
        /// Seed for --pi-source monte-carlo.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Mixed cumulants and the order-wise aggregates k1..k4.
    Cumulants {
        #[command(flatten)]
        design: Option<DesignArgs>,
        #[arg(long, conflicts_with = "general")]
        null: bool,
        #[arg(long)]
        general: bool,
        #[command(flatten)]
        pi: PiArgs,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Read the moments from a report produced by `moments` instead of
        /// recomputing them.
        #[arg(long)]
        from_report: Option<PathBuf>,
        /// Aggregate weighting: unit coefficients or binomial.
        #[arg(long, value_enum, default_value = "paper")]
        weighting: WeightingArg,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Two-stage critical values (c1, c2).
    CriticalValues {
        #[command(flatten)]
        design: DesignArgs,
        #[arg(long, value_enum, default_value = "exact")]
        method: MethodArg,
        #[arg(long)]
        alpha1: f64,
        /// Overall size target.
        #[arg(long = "alpha")]
        alpha_overall: f64,
        /// Disable the half-unit continuity correction in the CF method.
        #[arg(long)]
        no_continuity_correction: bool,
        #[command(flatten)]
        pi: PiArgs,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Check the closed-form moments against the enumeration oracle or
    /// against seeded simulation; exits 1 on any mismatch.
    Validate {
        /// Exact null comparison over the design grid.
        #[arg(long, group = "vmode")]
        null: bool,
        /// General formulas at the null vector over the grid.
        #[arg(long, group = "vmode")]
        reduction: bool,
        /// General formulas at Monte Carlo estimates vs simulation.
        #[arg(long, group = "vmode")]
        monte_carlo: bool,
        /// Grid bound: all designs with M + N <= this.
        #[arg(long, default_value_t = 8)]
        max_total: u64,
        /// Tolerance in combined standard errors (monte-carlo mode).
        #[arg(long, default_value_t = 5.0)]
        tolerance: f64,
        #[command(flatten)]
        design: Option<DesignArgs>,
        #[command(flatten)]
        pi: PiArgs,
        /// Joint-simulation replicates (monte-carlo mode).
        #[arg(long, default_value_t = 1_000_000)]
        replications: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Seeded simulation of the joint moments under named distributions.
    Simulate {
        #[command(flatten)]
        design: DesignArgs,
        #[arg(long, default_value = "uniform(0,1)")]
        dist_x: String,
        #[arg(long, default_value = "uniform(0,1)")]
        dist_y: String,
        #[arg(long, default_value_t = 100_000)]
        replications: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Run the two-stage decision on a trial data file.
    Test {
        /// Stage-1 critical value.
        #[arg(long)]
        c1: u64,
        /// Stage-2 critical value.
        #[arg(long)]
        c2: u64,
        /// Trial data (CSV with header group,stage,value).
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum WeightingArg {
    Paper,
    Binomial,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Exact,
    Cf,
}

enum CliError {
    Input(String),
    Mismatch,
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<data::DataError> for CliError {
    fn from(e: data::DataError) -> Self {
        CliError::Input(e.to_string())
    }
}

fn budget_from_env() -> u128 {
    std::env::var("TWOSTAGE_MW_BUDGET")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(DEFAULT_BUDGET)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Mismatch) => ExitCode::from(1),
        Err(CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn setup_threads(common: &CommonOpts) {
    if let Some(t) = common.threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
}

fn emit(common: &CommonOpts, map: Map<String, Value>) -> Result<(), CliError> {
    let text = report::render(map);
    match &common.output {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display()))),
    }
}

/// Resolve the probability vector for general mode. Exact (rational) when
/// the source is the null table or plug-in estimation; floating otherwise.
enum ResolvedPi {
    Exact(PiVector<BigRational>),
    Float(PiVector<f64>, Option<Value>),
}

fn resolve_pi(
    pi: &PiArgs,
    data: &Option<PathBuf>,
    seed: u64,
) -> Result<ResolvedPi, CliError> {
    match pi.pi_source {
        PiSource::NullTable => Ok(ResolvedPi::Exact(null_pi_vector())),
        PiSource::File => {
            let path = pi
                .pi_file
                .as_ref()
                .ok_or_else(|| CliError::Input("--pi-source file needs --pi-file".into()))?;
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
            let value: Value = serde_json::from_str(&text)
                .map_err(|e| CliError::Input(format!("bad pi file: {e}")))?;
            let mut out = PiVector::constant(0.0f64);
            for p in Pi::ALL {
                let v = value
                    .get(p.name())
                    .ok_or_else(|| CliError::Input(format!("pi file missing {}", p.name())))?;
                out[p] = parse_number(v)
                    .ok_or_else(|| CliError::Input(format!("bad entry for {}", p.name())))?;
            }
            Ok(ResolvedPi::Float(out, None))
        }
        PiSource::PluginFromData => {
            let path = data
                .as_ref()
                .ok_or_else(|| CliError::Input("--pi-source plugin-from-data needs --data".into()))?;
            let trial = data::parse_trial_csv(path)?;
            let xs: Vec<f64> =
                trial.x_stage1.iter().chain(&trial.x_stage2).copied().collect();
            let ys: Vec<f64> =
                trial.y_stage1.iter().chain(&trial.y_stage2).copied().collect();
            Ok(ResolvedPi::Exact(pi_plugin_from_data(&xs, &ys)?))
        }
        PiSource::MonteCarlo => {
            let sx = Sampler::from_str(&pi.dist_x)?;
            let sy = Sampler::from_str(&pi.dist_y)?;
            let est = pi_monte_carlo(sx, sy, pi.pi_replications, seed)?;
            let mut se = Map::new();
            for p in Pi::ALL {
                se.insert(p.name().into(), json!(est.standard_error[p]));
            }
            Ok(ResolvedPi::Float(est.value, Some(Value::Object(se))))
        }
    }
}

fn parse_number(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => {
            if let Some((num, den)) = s.split_once('/') {
                let num: f64 = num.trim().parse().ok()?;
                let den: f64 = den.trim().parse().ok()?;
                Some(num / den)
            } else {
                s.trim().parse().ok()
            }
        }
        _ => None,
    }
}

fn parse_rational(v: &Value) -> Option<BigRational> {
    match v {
        Value::String(s) => {
            if let Some((num, den)) = s.split_once('/') {
                Some(BigRational::new(num.trim().parse().ok()?, den.trim().parse().ok()?))
            } else {
                Some(BigRational::from_integer(s.trim().parse().ok()?))
            }
        }
        _ => None,
    }
}

fn pi_values_json(pis: &PiVector<f64>) -> Value {
    let mut map = Map::new();
    for p in Pi::ALL {
        map.insert(p.name().into(), json!(pis[p]));
    }
    Value::Object(map)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Moments { design, null: _, general, pi, data, seed, common } => {
            setup_threads(&common);
            let d = design.design()?;
            let mut map = report::base_report("moments", !common.no_timestamp);
            map.insert("design".into(), report::design_value(&d));
            if general {
                match resolve_pi(&pi, &data, seed)? {
                    ResolvedPi::Exact(pis) => {
                        let mom = moments_general(&d, &pis)?;
                        map.insert("mode".into(), json!("general"));
                        map.insert("pi".into(), pi_values_json(&pis.to_f64()));
                        map.insert("moments".into(), report::exact_moments_value(&mom, common.float));
                    }
                    ResolvedPi::Float(pis, se) => {
                        let mom = moments_general(&d, &pis)?;
                        map.insert("mode".into(), json!("general"));
                        map.insert("pi".into(), pi_values_json(&pis));
                        if let Some(se) = se {
                            map.insert("pi_standard_errors".into(), se);
                        }
                        map.insert("moments".into(), report::float_moments_value(&mom));
                    }
                }
            } else {
                let mom = moments_null(&d);
                map.insert("mode".into(), json!("null"));
                map.insert("moments".into(), report::exact_moments_value(&mom, common.float));
            }
            emit(&common, map)
        }
        Command::Cumulants {
            design,
            null,
            general,
            pi,
            data,
            seed,
            from_report,
            weighting,
            common,
        } => {
            setup_threads(&common);
            let _ = null;
            let w = match weighting {
                WeightingArg::Paper => Weighting::Paper,
                WeightingArg::Binomial => Weighting::Binomial,
            };
            let mut map = report::base_report("cumulants", !common.no_timestamp);
            if let Some(path) = from_report {
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
                let value: Value = serde_json::from_str(&text)
                    .map_err(|e| CliError::Input(format!("bad report: {e}")))?;
                let moments = value
                    .get("moments")
                    .ok_or_else(|| CliError::Input("report has no moments object".into()))?;
                // exact when every entry is a rational string, floating otherwise
                let mut exact = Vec::new();
                let mut float = Vec::new();
                for (a, b) in MOMENT_ORDERS {
                    let v = moments.get(moment_key(a, b)).ok_or_else(|| {
                        CliError::Input(format!("report missing {}", moment_key(a, b)))
                    })?;
                    if let Some(r) = parse_rational(v) {
                        exact.push(r);
                    }
                    if let Some(f) = parse_number(v) {
                        float.push(f);
                    }
                }
                if exact.len() == MOMENT_ORDERS.len() {
                    let mut it = exact.into_iter();
                    let mom = MomentSet::from_fn(MomentMode::NullExact, |_, _| it.next().unwrap());
                    insert_exact_cumulants(&mut map, &mom, w, common.float);
                } else if float.len() == MOMENT_ORDERS.len() {
                    let mut it = float.into_iter();
                    let mom = MomentSet::from_fn(MomentMode::General, |_, _| it.next().unwrap());
                    insert_float_cumulants(&mut map, &mom, w);
                } else {
                    return Err(CliError::Input("report moments are not parseable".into()));
                }
                map.insert("source_report".into(), json!(path.display().to_string()));
            } else {
                let d = design
                    .as_ref()
                    .ok_or_else(|| {
                        CliError::Input("need a design (-m -n -M -N) or --from-report".into())
                    })?
                    .design()?;
                map.insert("design".into(), report::design_value(&d));
                if general {
                    match resolve_pi(&pi, &data, seed)? {
                        ResolvedPi::Exact(pis) => {
                            let mom = moments_general(&d, &pis)?;
                            insert_exact_cumulants(&mut map, &mom, w, common.float);
                        }
                        ResolvedPi::Float(pis, _) => {
                            let mom = moments_general(&d, &pis)?;
                            insert_float_cumulants(&mut map, &mom, w);
                        }
                    }
                } else {
                    let mom = moments_null(&d);
                    insert_exact_cumulants(&mut map, &mom, w, common.float);
                }
            }
            emit(&common, map)
        }
        Command::CriticalValues {
            design,
            method,
            alpha1,
            alpha_overall,
            no_continuity_correction,
            pi,
            data,
            seed,
            common,
        } => {
            setup_threads(&common);
            let d = design.design()?;
            let mut map = report::base_report("critical-values", !common.no_timestamp);
            map.insert("design".into(), report::design_value(&d));
            map.insert("alpha1".into(), json!(alpha1));
            map.insert("alpha_overall".into(), json!(alpha_overall));
            let pair = match method {
                MethodArg::Exact => {
                    critical_values_exact(&d, alpha1, alpha_overall, budget_from_env())?
                }
                MethodArg::Cf => {
                    let opts =
                        CfOptions { continuity_correction: !no_continuity_correction };
                    let pis = match pi.pi_source {
                        PiSource::NullTable => None,
                        _ => Some(match resolve_pi(&pi, &data, seed)? {
                            ResolvedPi::Exact(p) => p.to_f64(),
                            ResolvedPi::Float(p, _) => p,
                        }),
                    };
                    critical_values_cf(&d, alpha1, alpha_overall, pis.as_ref(), opts)?
                }
            };
            map.insert("method".into(), json!(match method {
                MethodArg::Exact => "exact-enumeration",
                MethodArg::Cf => "cornish-fisher",
            }));
            map.insert("c1".into(), json!(pair.c1));
            map.insert("c2".into(), json!(pair.c2));
            if let Some(size) = &pair.achieved_size {
                map.insert("achieved_size".into(), report::rational_value(size, common.float));
            } else if let Ok(size) = overall_size_exact(&d, &pair, budget_from_env()) {
                map.insert(
                    "achieved_size".into(),
                    report::rational_value(&size, common.float),
                );
            }
            emit(&common, map)
        }
        Command::Validate {
            null,
            reduction,
            monte_carlo,
            max_total,
            tolerance,
            design,
            pi,
            replications,
            seed,
            common,
        } => {
            setup_threads(&common);
            let budget = budget_from_env();
            let (mode, designs, tol) = if monte_carlo {
                let d = design
                    .as_ref()
                    .ok_or_else(|| CliError::Input("monte-carlo validation needs a design".into()))?
                    .design()?;
                let sx = Sampler::from_str(&pi.dist_x)?;
                let sy = Sampler::from_str(&pi.dist_y)?;
                (
                    ValidationMode::GeneralMonteCarlo {
                        sampler_x: sx,
                        sampler_y: sy,
                        pi_replications: pi.pi_replications,
                        joint_replications: replications,
                        seed,
                    },
                    vec![d],
                    tolerance,
                )
            } else if reduction {
                (ValidationMode::GeneralReduction, design_grid(max_total), 0.0)
            } else if null {
                (ValidationMode::NullExact, design_grid(max_total), 0.0)
            } else {
                return Err(CliError::Input(
                    "choose one of --null, --reduction, --monte-carlo".into(),
                ));
            };
            let rep = validate_formulas(&designs, mode, tol, budget)?;
            let mut map = report::base_report("validate", !common.no_timestamp);
            map.insert("mode".into(), json!(rep.mode));
            map.insert("tolerance".into(), json!(rep.tolerance));
            let exact = rep.checks.iter().filter(|c| c.verdict == Verdict::Exact).count();
            let within =
                rep.checks.iter().filter(|c| c.verdict == Verdict::WithinTolerance).count();
            map.insert(
                "summary".into(),
                json!({
                    "checks": rep.checks.len(),
                    "exact": exact,
                    "within_tolerance": within,
                    "mismatches": rep.mismatches(),
                }),
            );
            let checks: Vec<Value> = rep
                .checks
                .iter()
                .map(|c| {
                    json!({
                        "formula": c.formula,
                        "design": report::design_value(&c.design),
                        "engine": c.engine_value,
                        "oracle": c.oracle_value,
                        "abs_deviation": c.abs_deviation,
                        "verdict": match c.verdict {
                            Verdict::Exact => "Exact",
                            Verdict::WithinTolerance => "WithinTolerance",
                            Verdict::Mismatch => "Mismatch",
                        },
                    })
                })
                .collect();
            map.insert("checks".into(), Value::Array(checks));
            let ok = rep.all_ok();
            emit(&common, map)?;
            if ok {
                Ok(())
            } else {
                Err(CliError::Mismatch)
            }
        }
        Command::Simulate { design, dist_x, dist_y, replications, seed, common } => {
            setup_threads(&common);
            let d = design.design()?;
            let sx = Sampler::from_str(&dist_x)?;
            let sy = Sampler::from_str(&dist_y)?;
            let est = simulate_joint(&d, sx, sy, replications, seed)?;
            let mut map = report::base_report("simulate", !common.no_timestamp);
            map.insert("design".into(), report::design_value(&d));
            map.insert("dist_x".into(), json!(dist_x));
            map.insert("dist_y".into(), json!(dist_y));
            map.insert("estimates".into(), report::estimates_value(&est));
            emit(&common, map)
        }
        Command::Test { c1, c2, data, common } => {
            setup_threads(&common);
            let trial = data::parse_trial_csv(&data)?;
            let design = trial.design()?;
            if c1 > design.u1_max() + 1 || c2 > design.u2_max() + 1 || c1 == 0 || c2 == 0 {
                return Err(CliError::Input(format!(
                    "critical values out of range for the design: c1 in 1..={}, c2 in 1..={}",
                    design.u1_max() + 1,
                    design.u2_max() + 1
                )));
            }
            let u1 = twostage_mw_core::mann_whitney_u(&trial.x_stage1, &trial.y_stage1)?;
            let decision = two_stage_decision(
                u1,
                || two_stage_statistics(&trial).map(|(_, u2)| u2),
                c1,
                c2,
            )?;
            let mut map = report::base_report("test", !common.no_timestamp);
            map.insert("design".into(), report::design_value(&design));
            map.insert("c1".into(), json!(c1));
            map.insert("c2".into(), json!(c2));
            map.insert("u1".into(), json!(decision.u1));
            map.insert("u2".into(), match decision.u2 {
                Some(u2) => json!(u2),
                None => Value::Null,
            });
            map.insert(
                "decision".into(),
                json!(match decision.outcome {
                    Outcome::RejectAtStage1 => "RejectAtStage1",
                    Outcome::RejectAtStage2 => "RejectAtStage2",
                    Outcome::FailToReject => "FailToReject",
                }),
            );
            emit(&common, map)
        }
    }
}

fn insert_exact_cumulants(
    map: &mut Map<String, Value>,
    mom: &MomentSet<BigRational>,
    w: Weighting,
    as_float: bool,
) {
    let c = mixed_cumulants(mom);
    let agg = paper_aggregates(&c, w);
    map.insert("moments".into(), report::exact_moments_value(mom, as_float));
    map.insert("cumulants".into(), report::exact_cumulants_value(&c, as_float));
    map.insert("aggregates".into(), report::exact_aggregates_value(&agg, as_float));
}

fn insert_float_cumulants(map: &mut Map<String, Value>, mom: &MomentSet<f64>, w: Weighting) {
    let c = mixed_cumulants(mom);
    let agg = paper_aggregates(&c, w);
    map.insert("moments".into(), report::float_moments_value(mom));
    map.insert("cumulants".into(), report::float_cumulants_value(&c));
    map.insert("aggregates".into(), report::float_aggregates_value(&agg));
}
