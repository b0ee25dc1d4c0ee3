use std::path::Path;
use std::process::ExitCode;

use clap::{Arg, ArgMatches, Command};

mod commands;
mod config;
mod output;

use config::{flag, keys_for, Config, UsageError};

fn cli() -> Command {
    let mut root = Command::new("dirac-front")
        .about("Concentration fronts in a consumer-nutrient system as the diffusion vanishes")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .arg_required_else_help(true)
        .after_help(format!(
            "Each run writes into a fresh directory under ${} (default ./runs).",
            output::OUTPUT_ROOT_VAR
        ));
    for (name, about) in commands::COMMANDS {
        let mut sub = Command::new(*name).about(*about).allow_negative_numbers(true).arg(
            Arg::new("config")
                .long("config")
                .short('c')
                .value_name("FILE")
                .help("INI file with [section] key = value entries; flags override it"),
        );
        for spec in keys_for(name) {
            let default = if spec.default.is_empty() { "unset" } else { spec.default };
            sub = sub.arg(
                Arg::new(spec.key)
                    .long(flag(spec.key))
                    .value_name("VALUE")
                    .help(format!("{} [default: {default}]", spec.help))
                    .help_heading(spec.section),
            );
        }
        root = root.subcommand(sub);
    }
    root
}

fn resolve(name: &str, sub: &ArgMatches) -> anyhow::Result<Config> {
    let overrides: Vec<(String, String)> = keys_for(name)
        .filter_map(|s| sub.get_one::<String>(s.key).map(|v| (s.key.to_string(), v.clone())))
        .collect();
    Config::resolve(name, sub.get_one::<String>("config").map(Path::new), &overrides)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let matches = match cli().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let Some((name, sub)) = matches.subcommand() else {
        return ExitCode::from(2);
    };
    let cfg = match resolve(name, sub) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let mut run = match output::RunDir::create(&output::output_root(), name) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    let dir = run.dir.clone();
    match commands::run(&cfg, &mut run).and_then(|lines| run.finish(&cfg).map(|d| (lines, d))) {
        Ok((lines, dir)) => {
            for l in lines {
                println!("{l}");
            }
            println!("output: {}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            // a failed run leaves nothing behind
            let _ = std::fs::remove_dir_all(&dir);
            eprintln!("error: {e:#}");
            if e.chain().any(|c| c.is::<UsageError>()) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
