use std::process::ExitCode;

use esc_energy_cli::CliError;

fn main() -> ExitCode {
    let result = esc_energy_cli::run(std::env::args_os()).and_then(|output| {
        for w in &output.warnings {
            eprintln!("warning: {w}");
        }
        esc_energy_cli::emit(&output, &mut std::io::stdout().lock())
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Usage(usage) => {
                    let _ = usage.print();
                }
                other => eprintln!("error: {other}"),
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
