use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::Context;
use clap::{Parser, ValueEnum};

use cellfree_core::campaign::{run_campaign_with, write_outputs, CampaignOptions};
use cellfree_core::accounting::median;
use cellfree_core::config::{parse_list, SimConfig};
use cellfree_core::network::generate_setup;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Preset {
    /// L=100, N=4, K=40, 400 setups, 1000 trials
    Full,
    /// L=25, N=4, K=10, 50 setups, 200 trials
    Desk,
}

/// Uplink SE campaigns for cell-free massive MIMO with LSFD and max-min power control.
#[derive(Debug, Parser)]
#[command(name = "cellfree", version)]
struct Args {
    /// Base parameters before any overrides
    #[arg(long, value_enum, default_value_t = Preset::Desk)]
    preset: Preset,

    /// `key = value` configuration file applied on top of the preset
    #[arg(long)]
    config: Option<PathBuf>,

    #[arg(long)]
    seed: Option<u64>,

    #[arg(long)]
    setups: Option<usize>,

    /// Monte-Carlo trials per setup
    #[arg(long)]
    trials: Option<usize>,

    /// Comma-separated LSFD modes: level2, level3-opt, level3-nopt, original-opt
    #[arg(long)]
    mode: Option<String>,

    /// Comma-separated power rules: full, maxmin
    #[arg(long)]
    power: Option<String>,

    /// Interference-set size of the nearly optimal mode
    #[arg(long = "R")]
    r_design: Option<usize>,

    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// Also write the per-iteration fixed-point trace
    #[arg(long)]
    trace_convergence: bool,

    /// Reuse statistics cached in this directory
    #[arg(long)]
    stats_cache: Option<PathBuf>,

    /// Write AP/UE positions of every setup under `<out>/positions/`
    #[arg(long)]
    export_positions: bool,

    /// Worker threads (defaults to all cores; results do not depend on it)
    #[arg(long)]
    threads: Option<usize>,

    /// Print the effective configuration and exit
    #[arg(long)]
    dry_run: bool,
}

fn build_config(args: &Args) -> anyhow::Result<SimConfig> {
    let mut cfg = match args.preset {
        Preset::Full => SimConfig::default(),
        Preset::Desk => SimConfig::desk_scale(),
    };
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        cfg.apply(&text).with_context(|| path.display().to_string())?;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.setups {
        cfg.n_setups = v;
    }
    if let Some(v) = args.trials {
        cfg.mc_trials = v;
    }
    if let Some(v) = &args.mode {
        cfg.lsfd_modes = parse_list(v)?;
    }
    if let Some(v) = &args.power {
        cfg.power_modes = parse_list(v)?;
    }
    if let Some(v) = args.r_design {
        cfg.r_design = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(args: Args) -> anyhow::Result<()> {
    let cfg = build_config(&args)?;
    if args.dry_run {
        print!("{}", cfg.to_key_values());
        return Ok(());
    }
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }

    let started = Instant::now();
    let options = CampaignOptions { stats_cache: args.stats_cache.clone() };
    let result = run_campaign_with(&cfg, &options)?;
    let manifest = write_outputs(&result, &args.out, args.trace_convergence)?;

    if args.export_positions {
        let dir = args.out.join("positions");
        fs::create_dir_all(&dir)?;
        for s in &result.setups {
            let setup = generate_setup(&cfg, s.setup);
            fs::write(dir.join(format!("setup_{:04}.csv", s.setup)), setup.positions_csv())?;
        }
    }

    for (setup, err) in &result.failures {
        eprintln!("setup {setup} skipped: {err}");
    }
    println!(
        "{} setups in {:.1} s, outputs in {}",
        manifest.setups_completed,
        started.elapsed().as_secs_f64(),
        args.out.display()
    );
    for &mode in &cfg.lsfd_modes {
        for &power in &cfg.power_modes {
            if let Some(median) = median(&result.se_samples(mode, power)) {
                println!("  {mode:<12} {power:<6} median SE {median:.4} bit/s/Hz");
            }
        }
    }
    if manifest.fixed_point_unconverged > 0 {
        eprintln!("warning: {} power-control runs hit max_iters", manifest.fixed_point_unconverged);
    }
    Ok(())
}

fn main() {
    if let Err(e) = run(Args::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
