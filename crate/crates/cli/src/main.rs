use clap::Parser;
use isac_cli::args::Args;
use isac_cli::{exit_code, run, RunSummary};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not configure {n} threads: {e}");
        }
    }
    match run(&args) {
        Ok(RunSummary::Single { dir, objective }) => {
            println!("average sum rate {objective:.6} bit/s/Hz; artifacts in {}", dir.display());
        }
        Ok(RunSummary::Sweep { points }) => {
            for p in &points {
                match p.average_sum_rate {
                    Some(r) => println!("{:>9.3} dBW  {r:.6} bit/s/Hz", p.gamma_dbw),
                    None => println!("{:>9.3} dBW  infeasible", p.gamma_dbw),
                }
            }
            println!("artifacts in {}", args.out.display());
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(exit_code(&e));
        }
    }
}
