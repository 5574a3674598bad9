use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use brlab_cli::output::{to_json, write_atomic};
use brlab_cli::{default_seed, init_threads, portrait, report, sweep, verify, Failure};
use brlab_core::bifurcation::Window;
use brlab_core::flow::skeleton::TraceConfig;

#[derive(Parser)]
#[command(name = "brlab", version, about = "Phase portraits and bifurcations of x' = x(1-y), y' = b y^2 + (1-c) y + x")]
struct Cli {
    /// seed for region sampling and representative orbits
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Full analysis report at one parameter point
    #[command(allow_negative_numbers = true)]
    Classify {
        #[arg(long)]
        b: f64,
        #[arg(long)]
        c: f64,
        /// also write the report to this file
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Phase portrait on the Poincare disc as SVG
    #[command(allow_negative_numbers = true)]
    Portrait {
        #[arg(long)]
        b: f64,
        #[arg(long)]
        c: f64,
        #[arg(long)]
        out: PathBuf,
        /// random samples per portrait used to find region representatives
        #[arg(long)]
        seeds: Option<usize>,
        /// integrator tolerance for separatrices
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Bifurcation diagram SVG and class census JSON over a window
    #[command(allow_negative_numbers = true)]
    Sweep {
        #[arg(long, default_value_t = 0.0)]
        c_min: f64,
        #[arg(long, default_value_t = 8.0)]
        c_max: f64,
        #[arg(long, default_value_t = -1.0)]
        b_min: f64,
        #[arg(long, default_value_t = 4.0)]
        b_max: f64,
        /// shading resolution per axis
        #[arg(long, default_value_t = 200)]
        grid: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check the invariant-curve and combination identities
    VerifyDarboux {
        /// exact rational arithmetic, zero tolerance
        #[arg(long)]
        exact: bool,
        /// add 1 to one curve's cofactor (self-test of the checker)
        #[arg(long, hide = true)]
        tamper: Option<String>,
    },
}

fn trace_config(seed: Option<u64>) -> TraceConfig {
    TraceConfig { seed: seed.unwrap_or_else(default_seed), ..TraceConfig::default() }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut cfg = trace_config(cli.seed);
    match cli.cmd {
        Cmd::Classify { b, c, json } => {
            let p = report::params(b, c)?;
            let doc = report::build(&p, &cfg);
            let text = to_json(&doc);
            match json {
                Some(path) => {
                    write_atomic(&path, text.as_bytes())?;
                    println!("{} S={:?} R={:?}", doc.cell_id.as_deref().unwrap_or("?"), doc.s, doc.r);
                }
                None => print!("{text}"),
            }
            if let Some(d) = doc.diagnostic {
                return Err(Failure::Analysis(d));
            }
        }
        Cmd::Portrait { b, c, out, seeds, tol } => {
            let p = report::params(b, c)?;
            if let Some(n) = seeds {
                cfg.samples = n;
            }
            if let Some(t) = tol {
                if !(t > 0.0 && t < 1.0) {
                    return Err(Failure::Usage("--tol must lie in (0, 1)".into()));
                }
                cfg.flow.tol = t;
            }
            let pic = portrait::render(&p, &cfg);
            write_atomic(&out, pic.svg.as_bytes())?;
            if let Some(w) = pic.warning {
                return Err(Failure::Analysis(format!("partial portrait written: {w}")));
            }
        }
        Cmd::Sweep { c_min, c_max, b_min, b_max, grid, out } => {
            let w = Window { c_min, c_max, b_min, b_max };
            let s = sweep::run(&w, grid, &cfg)?;
            std::fs::create_dir_all(&out)?;
            write_atomic(&out.join("bifurcation.svg"), s.svg.as_bytes())?;
            write_atomic(&out.join("census.json"), to_json(&s.census).as_bytes())?;
            println!("{} cells, {} classes (expected {})", s.census.cells, s.census.classes.len(), s.census.expected_classes);
            for l in &s.census.diff {
                eprintln!("{l}");
            }
        }
        Cmd::VerifyDarboux { exact, tamper } => {
            let tamper = match tamper {
                Some(t) => Some(verify::parse_curve(&t).ok_or_else(|| Failure::Usage(format!("unknown curve {t}")))?),
                None => None,
            };
            let rows = verify::rows(&verify::Options { exact, tamper });
            print!("{}", verify::table(&rows));
            if rows.iter().any(|r| !r.pass) {
                return Err(Failure::Analysis("identity check failed".into()));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    init_threads();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("brlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
