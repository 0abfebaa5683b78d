use std::io::BufWriter;
use std::process::ExitCode;

fn main() -> ExitCode {
    let mut stdout = BufWriter::new(std::io::stdout().lock());
    let status = feedback_stop::cli::run(std::env::args_os(), &mut stdout, &mut std::io::stderr());
    ExitCode::from(status.code())
}
