use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use semistatic_hedge::experiments::*;
use semistatic_hedge::numfmt::g12;
use semistatic_hedge::HedgeError;

#[derive(Parser)]
#[command(name = "semistatic-hedge", version, about = "Semi-static variance swap hedging under Heston")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute (or load) A, B, C and report conditioning
    Abc(Common),
    /// Hedging error against portfolio size for each selection method
    SweepD(Common),
    /// Optimal weights by strike
    Portfolio {
        #[command(flatten)]
        common: Common,
        /// portfolio sizes, comma separated
        #[arg(long, value_delimiter = ',')]
        d: Option<Vec<usize>>,
    },
    /// Hedging error across correlation values
    SweepRho(Common),
    /// Monte-Carlo check of the moments
    McCheck {
        #[command(flatten)]
        common: Common,
        /// multiply the analytic A before comparing
        #[arg(long, default_value_t = 1.0)]
        scale_a: f64,
    },
}

#[derive(Args, Clone)]
struct Common {
    /// experiment config (JSON); flags override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    claims: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    cache: Option<PathBuf>,
    /// comma list: leaps_and_bounds, brute_force, greedy_forward, greedy_backward, lasso
    #[arg(long)]
    methods: Option<String>,
    #[arg(long)]
    d_max: Option<usize>,
    #[arg(long)]
    nonneg: bool,
    /// `a,b,c` or `start:stop:count`
    #[arg(long, allow_hyphen_values = true)]
    rho_grid: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig, HedgeError> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::from_json_file(p)?,
            None => ExperimentConfig::default(),
        };
        if self.params.is_some() {
            cfg.params = self.params.clone();
        }
        if self.claims.is_some() {
            cfg.claims = self.claims.clone();
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        if self.cache.is_some() {
            cfg.cache = self.cache.clone();
        }
        if let Some(m) = &self.methods {
            cfg.methods = Method::parse_list(m)?;
        }
        if self.d_max.is_some() {
            cfg.d_max = self.d_max;
        }
        cfg.nonneg |= self.nonneg;
        if let Some(r) = &self.rho_grid {
            cfg.rho_grid = parse_rho_grid(r)?;
        }
        if let Some(s) = self.seed {
            cfg.mc.seed = s;
        }
        if let Some(n) = self.paths {
            cfg.mc.n_paths = n;
        }
        if let Some(n) = self.steps {
            cfg.mc.n_steps = n;
        }
        Ok(cfg)
    }
}

fn pct(x: f64) -> String {
    format!("{:.4}%", 100.0 * x)
}

fn run(cli: Cli) -> Result<i32, HedgeError> {
    match cli.command {
        Command::Abc(c) => {
            let s = cmd_abc(&c.resolve()?)?;
            println!("A          {}", g12(s.a));
            println!("k*         {}", g12(s.k_star));
            println!("rcond(C)   {}", g12(s.rcond));
            println!("err A      {}", g12(s.a_err));
            println!("err B max  {}", g12(s.max_b_err));
            println!("err C max  {}", g12(s.max_c_err));
            println!("C asym     {}", g12(s.c_asymmetry));
            println!("cache hit  {}", s.cache_hit);
            println!("wrote {} ({:.2}s)", s.output.display(), s.seconds);
        }
        Command::SweepD(c) => {
            let s = cmd_sweep_d(&c.resolve()?)?;
            for p in &s.paths {
                let head: Vec<String> = [0usize, 3, 6, 21]
                    .iter()
                    .filter_map(|&d| p.entry(d).map(|e| format!("d={d} {}", pct(e.rel_err))))
                    .collect();
                println!("{:<18} {}", p.method, head.join("  "));
            }
            println!("wrote {}", s.output.display());
        }
        Command::Portfolio { common, d } => {
            let mut cfg = common.resolve()?;
            if let Some(d) = d {
                cfg.portfolio_d = d;
            }
            for s in cmd_portfolio(&cfg)? {
                println!(
                    "{:<18} d={:<3} rel_err {}  slope {}  put dominance {}",
                    s.method,
                    s.d,
                    pct(s.rel_err),
                    s.slope.map(|x| format!("{x:.3}")).unwrap_or_else(|| "-".into()),
                    s.put_dominance.map(|b| b.to_string()).unwrap_or_else(|| "-".into())
                );
            }
        }
        Command::SweepRho(c) => {
            let r = cmd_sweep_rho(&c.resolve()?)?;
            for (d, cd, dev) in r.fits.iter().filter(|f| [0, 3, 6, 12].contains(&f.0)) {
                println!("d={d:<3} c_d {}  max rel dev {}", g12(*cd), pct(*dev));
            }
        }
        Command::McCheck { common, scale_a } => {
            let r = cmd_mc_check(&common.resolve()?, scale_a)?;
            println!("A     analytic {}  mc {}  z {:.2}", g12(r.analytic_a), g12(r.estimates.a), r.z_a);
            for (i, zb) in r.z_b.iter().enumerate() {
                println!("B[{i}]  analytic {}  mc {}  z {:.2}", g12(r.analytic_b[i]), g12(r.estimates.b[i]), zb);
            }
            for x in &r.realized {
                println!("eps2 {:<8} analytic {}  mc {}  z {:.2}", x.label, g12(x.analytic_eps2), g12(x.mc.eps2), x.z);
            }
            println!("max |z| {:.2} ({:.1}s)", r.max_abs_z, r.seconds);
            if !r.passed {
                eprintln!("Monte-Carlo disagreement: max |z| {:.2} > {}", r.max_abs_z, r.threshold);
                return Ok(MC_EXIT);
            }
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
