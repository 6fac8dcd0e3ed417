use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use htl::config::{default_preset_for, preset, ExperimentConfig, PRESETS};
use htl::counting::{Averaging, CountingSpec};
use htl::distributions::DistributionSpec;
use htl::experiment::{read_report, run, RunReport, SeriesSummary};
use htl::limits::{lt_limit, CaseId, StatisticKind};
use htl::montecarlo::LaplaceGrid;
use htl::normalizers::NormalizerTable;
use htl::verify::{run_suite, SuiteOptions, CRITERIA};
use htl::{Error, Result};

#[derive(Parser)]
#[command(name = "htl", version, about = "Limit laws of T = ΣX²/(ΣX)² for random sums of heavy-tailed claims")]
struct Cli {
    /// Worker threads for the simulation (defaults to the number of CPUs).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its CSV files and summary.json.
    Simulate(RunArgs),
    /// Tabulate the limiting joint Laplace transform on an (r, s) grid.
    Limits {
        #[command(flatten)]
        run: RunArgs,
        /// Tail index of an exact Pareto claim law (used when no config or preset is given).
        #[arg(long)]
        alpha: Option<f64>,
        /// `default`, or `R1,R2,.../S1,S2,...`.
        #[arg(long, default_value = "default")]
        grid: String,
    },
    /// Print the normalising sequences along the t-ladder.
    Normalizers {
        #[command(flatten)]
        run: RunArgs,
        /// Tail index of an exact Pareto claim law (used when no config or preset is given).
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Run the acceptance suite (`--all`), or the preset experiment of one case.
    Verify {
        #[command(flatten)]
        run: RunArgs,
        /// Run criteria A1–A10.
        #[arg(long, conflicts_with_all = ["case", "preset", "config"])]
        all: bool,
        /// Comma-separated subset of criteria, e.g. `A1,A4`.
        #[arg(long, value_delimiter = ',', conflicts_with_all = ["case", "preset", "config"])]
        criteria: Vec<String>,
        /// Multiplier on every replication count of the suite.
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
    },
    /// Re-summarize the outputs of an earlier run.
    Report {
        /// Directory holding summary.json and the statistics CSV files.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Args, Clone)]
struct RunArgs {
    /// JSON experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named configuration, e.g. `pareto07-poisson`.
    #[arg(long)]
    preset: Option<String>,
    /// Case id: 1, 2, 3a, 3b, 4a, 4b, 5 or 6.
    #[arg(long)]
    case: Option<CaseId>,
    /// Comma-separated times, e.g. `100,1000,10000`.
    #[arg(long, value_delimiter = ',')]
    t_ladder: Option<Vec<f64>>,
    /// Replications per time.
    #[arg(long)]
    reps: Option<u64>,
    #[arg(long, env = "HTL_SEED")]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    /// Config file, else preset, else the fallback; then flag overrides.
    fn resolve(&self, fallback: impl FnOnce(Option<CaseId>) -> Result<ExperimentConfig>) -> Result<ExperimentConfig> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(_), Some(_)) => return Err(Error::InvalidParameter("give --config or --preset, not both".into())),
            (Some(path), None) => ExperimentConfig::load(path)?,
            (None, Some(name)) => preset(name)?,
            (None, None) => fallback(self.case)?,
        };
        if let Some(case) = self.case {
            cfg.case = case;
        }
        if let Some(ladder) = &self.t_ladder {
            cfg.t_ladder = ladder.clone();
        }
        if let Some(reps) = self.reps {
            cfg.replications = reps;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        Ok(cfg)
    }
}

fn from_alpha(alpha: Option<f64>, case: Option<CaseId>) -> Result<ExperimentConfig> {
    let (Some(alpha), Some(case)) = (alpha, case) else {
        return Err(Error::InvalidParameter(
            "give --config, --preset, or both --alpha and --case".into(),
        ));
    };
    let counting = match case {
        CaseId::C5 => CountingSpec::poisson(1.0).with_averaging(Averaging::Probability),
        _ => CountingSpec::poisson(1.0),
    };
    Ok(ExperimentConfig::new(DistributionSpec::exact_pareto(alpha), counting, case))
}

fn parse_grid(text: &str, case: CaseId) -> Result<LaplaceGrid> {
    if text == "default" {
        return Ok(LaplaceGrid::default_for(case));
    }
    let list = |part: &str| -> Result<Vec<f64>> {
        part.split(',')
            .map(|x| {
                x.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidParameter(format!("grid value `{x}`: {e}")))
            })
            .collect()
    };
    match text.split_once('/') {
        Some((r, s)) => Ok(LaplaceGrid { r: list(r)?, s: list(s)? }),
        None => Err(Error::InvalidParameter(format!(
            "grid `{text}` is neither `default` nor `R1,R2/S1,S2`"
        ))),
    }
}

fn print_gates(report: &RunReport) {
    for g in &report.gates {
        let value = g.value.map_or("n/a".to_string(), |v| format!("{v:.5}"));
        let verdict = if g.passed { "PASS" } else { "FAIL" };
        println!("{verdict}  {:<28} {value:>10} (threshold {}): {}", g.name, g.threshold, g.rule);
    }
    for a in &report.assumptions {
        println!("note  {a}");
    }
}

fn simulate(cfg: &ExperimentConfig) -> Result<bool> {
    let output = run(cfg)?;
    let files = output.write(&cfg.out_dir)?;
    for f in files {
        eprintln!("wrote {}", f.display());
    }
    print_gates(&output.report);
    Ok(output.report.passed)
}

fn limits(cfg: &ExperimentConfig, grid: &str, out: Option<&Path>) -> Result<bool> {
    let spec = cfg.validate()?;
    let grid = parse_grid(grid, cfg.case)?;
    let mut rows = Vec::new();
    for (r, s) in grid.points() {
        rows.push((r, s, lt_limit(&spec, r, s)?));
    }
    let sink: Box<dyn Write> = match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let path = dir.join(format!("limits_{}.csv", cfg.case));
            eprintln!("wrote {}", path.display());
            Box::new(std::fs::File::create(path)?)
        }
        None => Box::new(std::io::stdout()),
    };
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["case_id", "r", "s", "lt_theoretical"])?;
    for (r, s, v) in rows {
        w.write_record([cfg.case.to_string(), r.to_string(), s.to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(true)
}

fn normalizers(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<bool> {
    cfg.validate()?;
    let model = cfg.distribution.build()?;
    let sink: Box<dyn Write> = match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let path = dir.join(format!("normalizers_{}.csv", cfg.case));
            eprintln!("wrote {}", path.display());
            Box::new(std::fs::File::create(path)?)
        }
        None => Box::new(std::io::stdout()),
    };
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["case_id", "t", "a_t", "a_prime_t", "c_t", "ell_star_t", "b_t", "max_residual"])?;
    let opt = |x: Option<f64>| x.map_or(String::new(), |v| v.to_string());
    for &t in &cfg.t_ladder {
        let n = NormalizerTable::for_case(&model, cfg.case, t)?;
        let resid = n.residuals(&model).into_iter().map(|(_, r)| r).fold(0.0, f64::max);
        w.write_record([
            cfg.case.to_string(),
            t.to_string(),
            n.a_t.to_string(),
            opt(n.a_prime_t),
            opt(n.c_t),
            opt(n.ell_star_t),
            opt(n.b_t),
            resid.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(true)
}

fn verify_suite(ids: &[&str], opts: &SuiteOptions, out: &Path) -> Result<bool> {
    let report = run_suite(ids, opts)?;
    for c in &report.criteria {
        println!("{}", c.line());
    }
    std::fs::create_dir_all(out)?;
    let path = out.join("verify_report.json");
    std::fs::write(&path, serde_json::to_string_pretty(&report)? + "\n")?;
    eprintln!("wrote {}", path.display());
    Ok(report.passed)
}

fn report(dir: &Path) -> Result<bool> {
    let report = read_report(dir)?;
    let case = report.config.case;
    println!("htl {} | case {case} | seed {} | {} replications", report.version, report.config.seed, report.config.replications);
    for rung in &report.ladder {
        let path = dir.join(format!("statistics_{case}_{}.csv", rung.t));
        let mut columns: Vec<Vec<f64>> = vec![Vec::new(); StatisticKind::ALL.len()];
        let mut reader = csv::Reader::from_path(&path)?;
        for record in reader.deserialize::<Vec<f64>>() {
            for (col, v) in columns.iter_mut().zip(record?) {
                col.push(v);
            }
        }
        println!("t = {} ({} skipped)", rung.t, rung.skipped);
        for (kind, values) in StatisticKind::ALL.iter().zip(&columns) {
            let s = SeriesSummary::of(*kind, values);
            let f = |x: Option<f64>| x.map_or("n/a".to_string(), |v| format!("{v:.6}"));
            println!(
                "  {:<10} n={:<7} mean={:<12} median={:<12} iqr={}",
                kind.as_str(),
                s.count,
                f(s.mean),
                f(s.median),
                f(s.iqr)
            );
        }
        if let Some(l) = rung.laplace {
            println!(
                "  laplace    max |emp − theo| = {:.5} ({:.2} SE)",
                l.max_abs_deviation, l.max_deviation_in_se
            );
        }
    }
    print_gates(&report);
    Ok(report.passed)
}

fn dispatch(cli: Cli) -> Result<bool> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidParameter(format!("--threads: {e}")))?;
    }
    let need_source = |case: Option<CaseId>| -> Result<ExperimentConfig> {
        match case {
            Some(c) => preset(default_preset_for(c)),
            None => Err(Error::InvalidParameter(format!(
                "give --config, --preset or --case; presets: {}",
                PRESETS.join(", ")
            ))),
        }
    };
    match cli.command {
        Command::Simulate(args) => simulate(&args.resolve(need_source)?),
        Command::Limits { run, alpha, grid } => {
            let cfg = run.resolve(|case| from_alpha(alpha, case))?;
            limits(&cfg, &grid, run.out.as_deref())
        }
        Command::Normalizers { run, alpha } => {
            let cfg = run.resolve(|case| from_alpha(alpha, case))?;
            normalizers(&cfg, run.out.as_deref())
        }
        Command::Verify {
            run,
            all,
            criteria,
            scale,
        } => {
            if all || !criteria.is_empty() {
                let ids: Vec<&str> = if all {
                    CRITERIA.to_vec()
                } else {
                    criteria.iter().map(String::as_str).collect()
                };
                let opts = SuiteOptions {
                    seed: run.seed.unwrap_or(SuiteOptions::default().seed),
                    scale,
                };
                verify_suite(&ids, &opts, run.out.as_deref().unwrap_or(Path::new("out")))
            } else {
                simulate(&run.resolve(need_source)?)
            }
        }
        Command::Report { out } => report(&out),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
