use std::panic;
use std::process::ExitCode;

use clap::Parser;
use xmodal_cli::{diagnostic, exit_code, run, Cli};

fn configure_threads() -> anyhow::Result<()> {
    let Ok(value) = std::env::var("XMODAL_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .parse()
        .map_err(|_| anyhow::anyhow!("XMODAL_THREADS must be a positive integer, got {value:?}"))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let rendered = e.render().to_string();
            let first = rendered.lines().next().unwrap_or("invalid arguments");
            eprintln!("xmodal: {first}");
            return ExitCode::from(1);
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("xmodal: {}", diagnostic(&e));
        return ExitCode::from(1);
    }
    panic::set_hook(Box::new(|info| {
        eprintln!("xmodal: error[Internal]: {info}");
    }));
    match panic::catch_unwind(|| run(&cli.command)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("xmodal: {}", diagnostic(&e));
            exit_code(&e)
        }
        Err(_) => ExitCode::from(2),
    }
}
