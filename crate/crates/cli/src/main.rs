mod config;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use config::{ConfigError, ExperimentConfig, SymbolKind};
use kpairs::cover::CoverData;
use kpairs::example::{ball_pair, convergence_experiment, direct_image_check, output_chern, pipeline_kclass};
use kpairs::group::{ball, GroupSpec};
use kpairs::maps::{defect_report, DefectReport};
use kpairs::truncation::{truncate_pair, write_rows, TruncationRow};
use kpairs::verify::{self, Outcome};

#[derive(Parser, Debug)]
#[command(name = "kpairs", version, about = "Truncated Fredholm pairs and the almost projections they define")]
struct Cli {
    /// TOML experiment configuration; defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Random seed, overriding `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Cap on truncated dimensions, overriding `max_dim`.
    #[arg(long, global = true)]
    max_dim: Option<usize>,
    /// Suppress progress lines on stdout.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Defect numbers of the configured pair at every radius.
    Defects,
    /// Truncation curve as CSV.
    Truncate,
    /// Checks of the almost-projection constructions on relation pairs.
    Projections,
    /// Rank field and Chern numbers of the pushed-forward projections.
    Kclass,
    /// Convergence of the pushed-forward projections in the radius.
    Example,
    /// The full acceptance suite.
    VerifyAll,
}

enum Failure {
    Config(ConfigError),
    Check(String),
    Resource(String),
    Run(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Self::Check(_) | Self::Run(_) => 1,
            Self::Config(_) => 2,
            Self::Resource(_) => 3,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Self::Config(e)
    }
}

impl From<kpairs::Error> for Failure {
    fn from(e: kpairs::Error) -> Self {
        match e {
            kpairs::Error::Resource { .. } => Self::Resource(e.to_string()),
            other => Self::Run(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::Run(e.to_string())
    }
}

struct Context {
    cfg: ExperimentConfig,
    out: PathBuf,
    quiet: bool,
}

impl Context {
    fn say(&self, line: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", line.as_ref());
        }
    }

    fn path(&self, name: &str) -> Result<PathBuf, Failure> {
        fs::create_dir_all(&self.out)?;
        Ok(self.out.join(name))
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), Failure> {
        let path = self.path(name)?;
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::Run(e.to_string()))?;
        text.push('\n');
        fs::write(&path, text)?;
        self.say(format!("wrote {}", path.display()));
        Ok(())
    }

    fn write_csv<T: Serialize>(&self, name: &str, rows: &[T]) -> Result<(), Failure> {
        let path = self.path(name)?;
        write_rows(BufWriter::new(File::create(&path)?), rows)?;
        self.say(format!("wrote {}", path.display()));
        Ok(())
    }

    fn torus_group(&self) -> Result<GroupSpec, Failure> {
        let g = self.cfg.group.spec();
        if g != GroupSpec::FreeAbelian(2) {
            return Err(ConfigError::Field {
                field: "group".into(),
                message: "the torus pipeline needs kind `free_abelian` with rank 2".into(),
            }
            .into());
        }
        Ok(g)
    }
}

#[derive(Serialize)]
struct RadiusReport {
    #[serde(rename = "R")]
    radius: usize,
    dim: usize,
    report: DefectReport,
}

fn defects(ctx: &Context) -> Result<(), Failure> {
    let cfg = &ctx.cfg;
    let group = cfg.group.spec();
    let symbols = cfg.symbols.build(group);
    let f = cfg.truncation.f_radius;
    let set = ball(group, f, None)?;
    let mut out = Vec::new();
    for &r in &cfg.truncation.radii {
        let (_, plus, minus) = ball_pair(&symbols, r, 2 * f, cfg.max_dim)?;
        let report = defect_report(&plus, &minus, set.elements(), Some(f))?;
        ctx.say(format!(
            "R = {r}: eps1 {:.6e}, eps2 {:.6e}, eps2prime {:.6e}",
            report.eps1, report.eps2, report.eps2prime
        ));
        out.push(RadiusReport {
            radius: r,
            dim: plus.dim(),
            report,
        });
    }
    ctx.write_json("defects.json", &out)
}

fn truncate(ctx: &Context) -> Result<(), Failure> {
    let cfg = &ctx.cfg;
    let group = cfg.group.spec();
    let (ps, ms) = cfg.symbols.build(group).map_specs();
    let f = cfg.truncation.f_radius;
    let fam = truncate_pair(&ps, &ms, &cfg.truncation.radii, 2 * f, cfg.max_dim)?;
    let rows: Vec<TruncationRow> = fam.reports(&ball(group, f, None)?)?.into_iter().map(|(r, _)| r).collect();
    for r in &rows {
        ctx.say(format!(
            "R = {}: dim {}, eps1 {:.6e}, eps2 {:.6e}, eps2prime {:.6e}",
            r.radius, r.dim, r.eps1, r.eps2, r.eps2prime
        ));
    }
    ctx.write_csv("truncation.csv", &rows)
}

fn report_outcomes(ctx: &Context, name: &str, outcomes: &[Outcome]) -> Result<(), Failure> {
    for o in outcomes {
        ctx.say(o.to_string());
    }
    ctx.write_json(name, &outcomes)?;
    let failed: Vec<String> = outcomes.iter().filter(|o| !o.passed).map(|o| o.id.to_string()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Check(format!("failed checks: {}", failed.join(", "))))
    }
}

fn projections(ctx: &Context) -> Result<(), Failure> {
    let seed = ctx.cfg.seed;
    let outcomes = [
        verify::perturbation_bound(seed),
        verify::rotation_agreement(),
        verify::cutting_homotopy(seed),
        verify::formula_equivalence(seed),
    ];
    report_outcomes(ctx, "projections.json", &outcomes)
}

#[derive(Serialize)]
struct KClassSummary {
    radius: usize,
    grids: Vec<usize>,
    class: kpairs::kclass::KClassReport,
    chern_input: i64,
    chern_output_by_grid: Vec<i64>,
    agree: bool,
}

fn kclass(ctx: &Context) -> Result<(), Failure> {
    let group = ctx.torus_group()?;
    let kc = &ctx.cfg.kclass;
    let symbols = kc.symbols.build(group);
    let class = pipeline_kclass(&symbols, kc.radius, kc.grids[0])?;
    let (chern_input, outputs, agree) = match kc.symbols.kind {
        SymbolKind::Bott => {
            let rep = direct_image_check(&kc.symbols.profile(), kc.radius, &kc.grids)?;
            let outs = rep.output_by_grid.iter().map(|c| c.chern).collect();
            (rep.chern_input, outs, rep.agree)
        }
        SymbolKind::Equal => {
            let outs: Vec<i64> = kc
                .grids
                .iter()
                .map(|&n| output_chern(&symbols, kc.radius, n, true).map(|c| c.chern))
                .collect::<kpairs::Result<_>>()?;
            let agree = outs.iter().all(|&c| c == 0);
            (0, outs, agree)
        }
    };
    ctx.say(format!(
        "R = {}: class rank {}, locally constant {}, Chern input {chern_input}, output {outputs:?}",
        kc.radius, class.class_rank, class.locally_constant
    ));
    let ok = class.locally_constant && agree;
    ctx.write_json(
        "kclass.json",
        &KClassSummary {
            radius: kc.radius,
            grids: kc.grids.clone(),
            class,
            chern_input,
            chern_output_by_grid: outputs,
            agree,
        },
    )?;
    if ok {
        Ok(())
    } else {
        Err(Failure::Check("rank field or Chern numbers disagree".into()))
    }
}

fn example(ctx: &Context) -> Result<(), Failure> {
    let cfg = &ctx.cfg;
    let group = ctx.torus_group()?;
    let symbols = cfg.symbols.build(group);
    let cover = CoverData::torus(cfg.cover.grid, cfg.cover.grid);
    let t = &cfg.truncation;
    let rep = convergence_experiment(&symbols, &cover, &t.radii, t.reference_radius, t.f_radius, cfg.max_dim)?;
    for r in &rep.rows {
        ctx.say(format!("R = {}: dim {}, sup gap {:.6e}", r.radius, r.dim, r.sup_norm_gap));
    }
    ctx.write_csv("convergence.csv", &rep.rows)?;
    ctx.write_json("example.json", &rep)?;
    let gaps: Vec<f64> = rep.rows.iter().map(|r| r.sup_norm_gap).collect();
    let last = gaps[gaps.len() - 1];
    if gaps.windows(2).any(|w| w[1] > w[0]) {
        return Err(Failure::Check("convergence curve increases".into()));
    }
    if last >= cfg.tolerances.convergence {
        return Err(Failure::Check(format!(
            "final gap {last:.3e} is not below {}",
            cfg.tolerances.convergence
        )));
    }
    Ok(())
}

fn verify_all(ctx: &Context) -> Result<(), Failure> {
    report_outcomes(ctx, "verify.json", &verify::run_all(ctx.cfg.seed))
}

fn load(cli: &Cli) -> Result<Context, Failure> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if cli.max_dim.is_some() {
        cfg.max_dim = cli.max_dim;
    }
    cfg.validate()?;
    let out = cli.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    Ok(Context {
        cfg,
        out,
        quiet: cli.quiet,
    })
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let ctx = load(cli)?;
    match cli.command {
        Command::Defects => defects(&ctx),
        Command::Truncate => truncate(&ctx),
        Command::Projections => projections(&ctx),
        Command::Kclass => kclass(&ctx),
        Command::Example => example(&ctx),
        Command::VerifyAll => verify_all(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let label = match &f {
                Failure::Config(_) => "config error",
                Failure::Check(_) => "check failed",
                Failure::Resource(_) => "resource cap",
                Failure::Run(_) => "error",
            };
            let msg = match &f {
                Failure::Config(e) => e.to_string(),
                Failure::Check(m) | Failure::Resource(m) | Failure::Run(m) => m.clone(),
            };
            eprintln!("kpairs: {label}: {msg}");
            ExitCode::from(f.code())
        }
    }
}
