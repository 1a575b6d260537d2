use clap::Parser;
use vlevel::cli::{out_dir_hint, run, write_error_record, Cli};

fn main() {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) => {
            println!(
                "{}",
                serde_json::json!({ "status": report.status, "out": report.out_dir, "summary": report.summary })
            );
        }
        Err(e) => {
            eprintln!("error: {e}");
            let dir = out_dir_hint(&cli);
            if let Err(io) = write_error_record(&dir, &e) {
                eprintln!("could not write error record in {}: {io}", dir.display());
            }
            std::process::exit(e.exit_code());
        }
    }
}
