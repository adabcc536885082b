//! Command-line driver: compute levels, compare with the bundled tables, scan scales.
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use molion::algebra::ExchangeSector;
use molion::config::RunConfig;
use molion::eigensolver::convergence_scan;
use molion::refdata::{self, Status};
use molion::run::{hamiltonian, run};
use molion::sturmian::ScaleParams;
use molion::systems::{self, reduced_masses, Species, SystemSpec};

#[derive(Parser)]
#[command(version, about, long_about = None)]
struct Cli {
    /// Print the mass ratios and dissociation limits, then exit
    #[arg(long)]
    print_constants: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Compute bound levels of one (species, J) symmetry
    Compute {
        /// key = value configuration file; flags override it
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        system: Option<Species>,
        #[arg(long = "J")]
        j: Option<u32>,
        #[arg(long = "N")]
        n: Option<u32>,
        #[arg(long = "Nx")]
        n_x: Option<u32>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        /// Solve in shifted mode around this energy
        #[arg(long)]
        shift: Option<f64>,
        #[arg(long)]
        levels: Option<usize>,
        #[arg(long)]
        sensitivities: bool,
        /// Re-solve each level with a shift placed just below it
        #[arg(long)]
        refine: bool,
        /// Extra key=value settings
        #[arg(long = "set")]
        set: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare a results file with a reference table
    Compare {
        #[arg(long)]
        results: PathBuf,
        /// Reference CSV; the bundled table when omitted
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-10)]
        tolerance: f64,
    },
    /// Scan N and a log grid of (alpha, beta)
    Scan {
        #[arg(long)]
        system: Species,
        #[arg(long = "J")]
        j: u32,
        /// Comma-separated N values
        #[arg(long = "N-list", value_delimiter = ',')]
        n_list: Vec<u32>,
        #[arg(long = "Nx", default_value_t = 10)]
        n_x: u32,
        /// alpha_min:alpha_max:beta_min:beta_max:points, log-spaced
        #[arg(long, default_value = "1:2.5:6:16:5")]
        grid: String,
        #[arg(long, default_value_t = 10)]
        levels: usize,
    },
}

fn print_constants() {
    println!("mp_over_me {}", systems::MP_OVER_ME);
    println!("md_over_me {}", systems::MD_OVER_ME);
    println!("hartree_in_cm1 {}", systems::HARTREE_IN_CM1);
    for s in Species::ALL {
        let spec = SystemSpec::codata2002(s);
        let m = reduced_masses(&spec);
        println!(
            "{s} mu12 {:.10} inv_mu0 {:.6e} threshold {:.14}",
            m.mu12,
            m.inv_mu0,
            spec.dissociation_threshold()
        );
    }
}

fn log_space(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    if k <= 1 {
        return vec![lo];
    }
    (0..k)
        .map(|i| lo * (hi / lo).powf(i as f64 / (k - 1) as f64))
        .collect()
}

fn parse_grid(text: &str) -> anyhow::Result<Vec<ScaleParams>> {
    let f: Vec<&str> = text.split(':').collect();
    if f.len() != 5 {
        bail!("grid must be alpha_min:alpha_max:beta_min:beta_max:points");
    }
    let num = |s: &str| {
        s.parse::<f64>()
            .with_context(|| format!("bad grid value '{s}'"))
    };
    let k: usize = f[4].parse().context("bad grid point count")?;
    let mut out = Vec::new();
    for a in log_space(num(f[0])?, num(f[1])?, k) {
        for b in log_space(num(f[2])?, num(f[3])?, k) {
            out.push(ScaleParams::new(a, b)?);
        }
    }
    Ok(out)
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    if cli.print_constants {
        print_constants();
        return Ok(());
    }
    match cli.command {
        None => bail!("no command given; see --help"),
        Some(Command::Compute {
            config,
            system,
            j,
            n,
            n_x,
            alpha,
            beta,
            shift,
            levels,
            sensitivities,
            refine,
            set,
            out,
        }) => {
            let text = match &config {
                Some(p) => std::fs::read_to_string(p)
                    .with_context(|| format!("reading {}", p.display()))?,
                None => String::new(),
            };
            let mut overrides = Vec::new();
            let mut push = |k: &str, v: Option<String>| {
                if let Some(v) = v {
                    overrides.push(format!("{k}={v}"));
                }
            };
            push("species", system.map(|s| s.to_string()));
            push("J", j.map(|v| v.to_string()));
            push("N", n.map(|v| v.to_string()));
            push("N_x", n_x.map(|v| v.to_string()));
            push("alpha", alpha.map(|v| v.to_string()));
            push("beta", beta.map(|v| v.to_string()));
            push("shift", shift.map(|v| v.to_string()));
            push("levels", levels.map(|v| v.to_string()));
            push("sensitivities", sensitivities.then(|| "true".into()));
            push("refine", refine.then(|| "true".into()));
            push("output", out.map(|p| p.display().to_string()));
            overrides.extend(set);
            let cfg = RunConfig::parse(&text, &overrides)?;
            let result = run(&cfg)?;
            let csv = result.to_csv();
            match &cfg.output {
                Some(p) => {
                    std::fs::write(p, &csv).with_context(|| format!("writing {}", p.display()))?;
                    eprintln!("wrote {} levels to {}", result.rows.len(), p.display());
                }
                None => print!("{csv}"),
            }
        }
        Some(Command::Compare {
            results,
            reference,
            tolerance,
        }) => {
            let rows = refdata::parse_results(
                &std::fs::read_to_string(&results)
                    .with_context(|| format!("reading {}", results.display()))?,
            )?;
            let table = match &reference {
                Some(p) => refdata::ingest_reference(p)?,
                None => refdata::bundled()?,
            };
            println!("species,J,v,computed,reference,delta,matched_digits,tolerance,status");
            let mut failures = 0;
            for d in refdata::compare(&rows, &table, tolerance) {
                let opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.14}"));
                let status = match d.status {
                    Status::Pass => "pass",
                    Status::Fail => "fail",
                    Status::Uncovered => "uncovered",
                    Status::SpuriousBound => "spurious_bound",
                };
                if matches!(d.status, Status::Fail | Status::SpuriousBound) {
                    failures += 1;
                }
                println!(
                    "{},{},{},{:.14},{},{},{},{:.1e},{}",
                    d.species,
                    d.j,
                    d.v,
                    d.computed,
                    opt(d.reference),
                    d.delta.map_or(String::new(), |v| format!("{v:.3e}")),
                    d.matched_digits.map_or(String::new(), |v| v.to_string()),
                    d.tolerance,
                    status
                );
            }
            if failures > 0 {
                bail!("{failures} level(s) failed the comparison");
            }
        }
        Some(Command::Scan {
            system,
            j,
            n_list,
            n_x,
            grid,
            levels,
        }) => {
            if n_list.is_empty() {
                bail!("--N-list needs at least one value");
            }
            let grid = parse_grid(&grid)?;
            let cfg = RunConfig::new(system, j, *n_list.iter().max().unwrap());
            let ham = hamiltonian(&cfg, ExchangeSector::natural(system, j))?;
            let masses = reduced_masses(&SystemSpec::codata2002(system));
            let ns: Vec<(u32, u32)> = n_list.iter().map(|&n| (n, n_x.min(n))).collect();
            let table = convergence_scan(&ham, system.label(), &masses, &ns, &grid, levels)?;
            println!("N,N_x,alpha,beta,v,energy_au");
            for r in &table.rows {
                for (v, e) in r.energies.iter().enumerate() {
                    println!(
                        "{},{},{},{},{v},{e:.14}",
                        r.n, r.n_x, r.scales.alpha, r.scales.beta
                    );
                }
            }
            println!("# best alpha={} beta={}", table.best.alpha, table.best.beta);
            for (v, d) in table.digits.iter().enumerate() {
                println!("# v={v} stable_digits={d}");
            }
        }
    }
    Ok(())
}
