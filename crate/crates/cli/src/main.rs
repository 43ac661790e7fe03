use std::process::ExitCode;

fn main() -> ExitCode {
    match bitext_cli::run_cli(std::env::args().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bitext: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
