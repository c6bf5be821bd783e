use clap::Parser;
use wgap_harness::cli::{exit_code, run, Cli};

fn main() {
    // clap routes --help/--version to stdout with exit 0 and argument errors
    // to stderr with exit 2.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(exit_code(&e));
    }
}
