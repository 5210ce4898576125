/// `println!` that ignores a closed stdout (e.g. output piped into `head`).
macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

mod args;
mod commands;
mod report;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};
use commands::Ctx;
use report::{classify, error_json};

fn run(cli: Cli) -> anyhow::Result<()> {
    let ctx = Ctx { workdir: cli.workdir };
    match &cli.command {
        Command::Generate(a) => commands::generate(&ctx, a),
        Command::Train(a) => commands::train_cmd(&ctx, a),
        Command::Predict(a) => commands::predict(&ctx, a),
        Command::Evaluate(a) => commands::evaluate_cmd(&ctx, a),
        Command::EndToEnd(a) => commands::end_to_end_cmd(&ctx, a),
        Command::ConvertFrames(a) => commands::convert_frames(&ctx, a),
        Command::CostReport(a) => commands::cost(&ctx, a),
        Command::GradCheck(a) => commands::grad_check(&ctx, a),
        Command::Stats(a) => commands::stats(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", error_json("usage", 2, e.render().to_string().trim_end().to_string()));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (code, kind) = classify(&e);
            eprintln!("{}", error_json(kind, code, format!("{e:#}")));
            ExitCode::from(code as u8)
        }
    }
}
