use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "vortexkin", version, about = "Point-vortex kinetic-theory workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a TOML config
    Run { config: PathBuf },
    /// Run a verification suite (fast | full)
    Verify { suite: String },
    /// Compute effective coefficients for the configured kernel
    Coeffs { config: PathBuf },
    /// Summarize a previous run directory
    Report { dir: PathBuf },
}

fn init_threads() {
    if let Ok(v) = std::env::var("VORTEXKIN_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn main() -> ExitCode {
    init_threads();
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config } => match vortexkin::cli::run_experiment(&config) {
            Ok(m) => {
                println!("run complete: {} stages, all green: {}", m.stages.len(), m.all_green());
                for s in &m.stages {
                    println!("  stage {}: {:.2}s [{}]", s.name, s.seconds, s.status);
                }
                if m.all_green() {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(3)
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(vortexkin::cli::exit_code_for(&e) as u8)
            }
        },
        Command::Verify { suite } => {
            let effort = match suite.as_str() {
                "fast" => vortexkin::cli::Effort::Fast,
                "full" => vortexkin::cli::Effort::Full,
                other => {
                    eprintln!("error: unknown suite \"{other}\" (fast|full)");
                    return ExitCode::from(2);
                }
            };
            match vortexkin::cli::run_suite(effort) {
                Ok(res) => {
                    let all = res.iter().all(|c| c.pass);
                    println!(
                        "verify {}: {}/{} criteria passed",
                        suite,
                        res.iter().filter(|c| c.pass).count(),
                        res.len()
                    );
                    if all {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(3)
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(vortexkin::cli::exit_code_for(&e) as u8)
                }
            }
        }
        Command::Coeffs { config } => {
            // coeffs is a restricted run: force the coeffs_only scenario
            let text = match std::fs::read_to_string(&config) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            let rewritten = match text.contains("scenario") {
                true => text,
                false => format!("scenario = \"coeffs_only\"\n{text}"),
            };
            let tmp = std::env::temp_dir().join(format!("vortexkin-coeffs-{}.toml", std::process::id()));
            if std::fs::write(&tmp, rewritten).is_err() {
                return ExitCode::from(3);
            }
            let out = match vortexkin::cli::run_experiment(&tmp) {
                Ok(m) => {
                    for a in &m.artifacts {
                        println!("{a}");
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(vortexkin::cli::exit_code_for(&e) as u8)
                }
            };
            let _ = std::fs::remove_file(&tmp);
            out
        }
        Command::Report { dir } => {
            let path = dir.join("manifest.json");
            match std::fs::read_to_string(&path) {
                Ok(text) => {
                    match serde_json::from_str::<serde_json::Value>(&text) {
                        Ok(v) => {
                            println!("config hash: {}", v["config_hash"].as_str().unwrap_or("?"));
                            println!("version:     {}", v["artifact_version"].as_str().unwrap_or("?"));
                            println!("wall clock:  {}s", v["wall_clock_seconds"]);
                            if let Some(stages) = v["stages"].as_array() {
                                for s in stages {
                                    println!(
                                        "  stage {}: {:.2}s [{}]",
                                        s["name"].as_str().unwrap_or("?"),
                                        s["seconds"].as_f64().unwrap_or(0.0),
                                        s["status"].as_str().unwrap_or("?")
                                    );
                                }
                            }
                            if let Some(acc) = v["acceptance"].as_array() {
                                for c in acc {
                                    println!(
                                        "  check {}: measured {} target {} ± {} [{}]",
                                        c["name"].as_str().unwrap_or("?"),
                                        c["measured"],
                                        c["target"],
                                        c["tolerance"],
                                        if c["pass"].as_bool().unwrap_or(false) { "ok" } else { "FAIL" }
                                    );
                                }
                            }
                            ExitCode::SUCCESS
                        }
                        Err(e) => {
                            eprintln!("error: malformed manifest: {e}");
                            ExitCode::from(3)
                        }
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            }
        }
    }
}
