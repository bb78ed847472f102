use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mfsobol::campaign::{report, store, Campaign, CampaignConfig, QoiPlan};
use mfsobol::Result;

/// Multifidelity Sobol' sensitivity analysis of the carotid-artery models.
#[derive(Parser, Debug)]
#[command(name = "mfsobol", version)]
struct Cli {
    /// Campaign file (TOML); the built-in 1D/0D carotid study if omitted.
    #[arg(long, global = true, env = "MFSOBOL_CONFIG")]
    config: Option<PathBuf>,

    /// Output directory of the campaign.
    #[arg(long, global = true, env = "MFSOBOL_OUT", default_value = "mfsobol-out")]
    out: PathBuf,

    /// Worker threads for model evaluations (0 = all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Restrict the study to these QoIs (repeatable).
    #[arg(long, global = true)]
    qoi: Vec<String>,

    /// Perturbation factor of perturbed low-fidelity models.
    #[arg(long, global = true)]
    phi: Option<f64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate every model on the pilot points and compute correlations.
    Pilot,
    /// Print the optimal allocation for each budget.
    Allocate {
        #[arg(long)]
        budget: Vec<f64>,
    },
    /// Multifidelity estimates for each budget.
    RunMfmc {
        #[arg(long)]
        budget: Vec<f64>,
    },
    /// Single-fidelity estimates of the highest fidelity for each budget.
    RunMc {
        #[arg(long)]
        budget: Vec<f64>,
    },
    /// Polynomial chaos reference estimates.
    RunPc {
        #[arg(long)]
        order: Option<u32>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Repeated MC and MFMC estimates on independent samples.
    Replicate {
        #[arg(long)]
        budget: Vec<f64>,
        #[arg(long)]
        replicates: Option<usize>,
    },
    /// Trace-level error metrics between the hemodynamic models.
    Validate,
    /// Render the tables of every stage found in the output directory.
    Report,
}

fn load_config(cli: &Cli) -> Result<CampaignConfig> {
    let mut cfg = match &cli.config {
        Some(path) => CampaignConfig::from_file(path)?,
        None => CampaignConfig::carotid_bifidelity(),
    };
    if let Some(j) = cli.jobs {
        cfg.jobs = j;
    }
    if !cli.qoi.is_empty() {
        cfg.qois = cli.qoi.clone();
    }
    if let Some(phi) = cli.phi {
        cfg.phi = phi;
    }
    if let Command::Replicate { replicates: Some(r), .. } = cli.command {
        cfg.replicates = r;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn budgets(given: &[f64], default: &[f64]) -> Vec<f64> {
    if given.is_empty() {
        default.to_vec()
    } else {
        given.to_vec()
    }
}

fn open(cfg: CampaignConfig, out: &Path) -> Result<Campaign> {
    let cache = out.join("cache");
    std::fs::create_dir_all(&cache)?;
    Campaign::new(cfg, Some(&cache))
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    let out = &cli.out;
    let space = cfg.space.clone();
    let model_ids: Vec<String> = cfg.models.iter().map(|m| m.id.clone()).collect();
    match &cli.command {
        Command::Pilot => {
            let mut c = open(cfg, out)?;
            let (pilot, raw) = c.run_pilot()?;
            store::save_pilot(out, &space, &pilot, &raw)?;
            print!("{}", report::pilot_table(&pilot));
        }
        Command::Allocate { budget } => {
            let pilot = store::load_pilot(out)?;
            let c = Campaign::new(cfg.clone(), None)?;
            let mut plans: Vec<(f64, Vec<QoiPlan>)> = Vec::new();
            let mut skipped = Vec::new();
            for b in budgets(budget, &cfg.budgets) {
                let (p, s) = c.allocate(&pilot, b)?;
                plans.push((b, p));
                skipped.extend(s);
            }
            store::write_allocations(&out.join("allocations.csv"), &model_ids, &plans)?;
            print!("{}", report::allocation_table(&model_ids, &plans, &skipped));
        }
        Command::RunMfmc { budget } => {
            let pilot = store::load_pilot(out)?;
            let all = budgets(budget, &cfg.budgets);
            let mut c = open(cfg, out)?;
            for b in all {
                let (r, raw) = c.run_mfmc(&pilot, b)?;
                store::save_mfmc(out, &space, &model_ids, &r, &raw)?;
                print!("{}", report::mfmc_table(&space, &r));
            }
        }
        Command::RunMc { budget } => {
            let all = budgets(budget, &cfg.budgets);
            let mut c = open(cfg, out)?;
            for b in all {
                let (r, raw) = c.run_mc(b)?;
                store::save_mc(out, &space, &r, &raw)?;
                print!("{}", report::mc_table(&space, &r));
            }
        }
        Command::RunPc { order, samples } => {
            let order = order.unwrap_or(cfg.pc_order);
            let samples = samples.unwrap_or(cfg.pc_samples);
            let mut c = open(cfg, out)?;
            let (r, raw) = c.run_pc(order, samples)?;
            store::save_pc(out, &space, &r, &raw)?;
            print!("{}", report::pc_table(&space, &r));
        }
        Command::Replicate { budget, .. } => {
            let pilot = store::load_pilot(out)?;
            let all = budgets(budget, cfg.replicate_budgets());
            let total = cfg.replicates;
            let mut c = open(cfg, out)?;
            let study = c.run_replicates_with(&pilot, &all, |r| {
                eprint!("\rreplicate {}/{total}", r + 1);
            })?;
            eprintln!();
            store::save_replicates(out, &space, &study)?;
            print!("{}", report::replicate_table(&study));
            print!("{}", report::mse_table(&space, &study));
        }
        Command::Validate => {
            let c = Campaign::new(cfg, None)?;
            let v = c.validate()?;
            store::save_validation(out, &v)?;
            print!("{}", report::validation_table(&v));
        }
        Command::Report => {
            if !out.is_dir() {
                return Err(mfsobol::Error::Ordering(format!(
                    "{} does not exist; run a stage first",
                    out.display()
                )));
            }
            print!("{}", report::render(out, &cfg)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
