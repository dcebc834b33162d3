use clap::Parser;
use mulprobe_cli::{run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = cli.global.load().and_then(|cfg| run(&cfg, &cli.command));
    match result {
        Ok(out) => {
            for n in &out.notes {
                println!("{n}");
            }
            for f in &out.files {
                log::info!("wrote {}", f.display());
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
