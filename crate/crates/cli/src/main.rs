//! Command-line front end: verification suites, point evaluation, pairwise
//! classification, and witness lookup.
//!
//! Exit codes: 0 all-pass, 1 check failure, 2 hypothesis or guard violation,
//! 3 configuration error.

mod config;
mod report;
mod suite;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use polydisc_kernels::kernels::kernel_canonical;
use polydisc_kernels::matrix::C64;
use polydisc_kernels::multiindex::MultiIndex;

use config::{load_config, Overrides};
use report::{report_csv, report_json};
use suite::{classify_verdict_line, is_guard_error, run_suite, witness_line, Suite};

#[derive(Parser)]
#[command(
    name = "pdkernels",
    version,
    about = "Verification toolkit for matrix-valued kernels on the polydisc"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a verification suite and emit a deterministic report.
    Verify {
        /// Path to the JSON run configuration.
        #[arg(long)]
        config: PathBuf,
        /// Suite name; see the suite list in the README.
        #[arg(long, default_value = "all")]
        suite: String,
        /// Write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the CSV summary here.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config sample count.
        #[arg(long)]
        samples: Option<usize>,
        /// Record wall times per check. Off by default so that reports are
        /// byte-identical across runs.
        #[arg(long)]
        timings: bool,
    },
    /// Evaluate the kernel at one point pair and print the matrix.
    Eval {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated complex coordinates, e.g. "0.3+0.2i,-0.1-0.4i".
        #[arg(long)]
        z: String,
        #[arg(long)]
        w: String,
    },
    /// Compare two parameter sets by their invariants.
    Classify {
        #[arg(long)]
        config1: PathBuf,
        #[arg(long)]
        config2: PathBuf,
    },
    /// Print the inequivalence witness triple for a multi-index.
    Witness {
        /// Comma-separated entries, e.g. "2,0".
        #[arg(long)]
        alpha: String,
    },
}

/// Parse one complex scalar written as "a", "bi", or "a±bi".
fn parse_complex(text: &str) -> Result<C64, String> {
    let s = text.trim();
    if s.is_empty() {
        return Err("empty complex literal".into());
    }
    if let Ok(re) = s.parse::<f64>() {
        return Ok(C64::new(re, 0.0));
    }
    let Some(body) = s.strip_suffix(['i', 'I']) else {
        return Err(format!("cannot parse `{s}` as a complex number"));
    };
    // Split at the last sign that is not a leading sign or an exponent sign.
    let bytes = body.as_bytes();
    let mut split = None;
    for (k, &b) in bytes.iter().enumerate().skip(1) {
        if (b == b'+' || b == b'-') && !matches!(bytes[k - 1], b'e' | b'E') {
            split = Some(k);
        }
    }
    match split {
        Some(k) => {
            let re: f64 = body[..k]
                .parse()
                .map_err(|_| format!("bad real part in `{s}`"))?;
            let im: f64 = body[k..]
                .parse()
                .map_err(|_| format!("bad imaginary part in `{s}`"))?;
            Ok(C64::new(re, im))
        }
        None => {
            let im: f64 = body
                .parse()
                .map_err(|_| format!("bad imaginary part in `{s}`"))?;
            Ok(C64::new(0.0, im))
        }
    }
}

fn parse_point(text: &str, n: usize) -> Result<Vec<C64>, String> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != n {
        return Err(format!("expected {n} coordinates, got {}", parts.len()));
    }
    parts.into_iter().map(parse_complex).collect()
}

fn parse_alpha(text: &str) -> Result<MultiIndex, String> {
    let entries = text
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| format!("bad multi-index entry `{p}`"))
        })
        .collect::<Result<Vec<usize>, String>>()?;
    if entries.is_empty() {
        return Err("empty multi-index".into());
    }
    Ok(MultiIndex::new(entries))
}

fn format_complex(v: C64) -> String {
    format!("{:+.12e}{:+.12e}i", v.re, v.im)
}

fn run_verify(
    config_path: &PathBuf,
    suite_name: &str,
    out: Option<&PathBuf>,
    csv: Option<&PathBuf>,
    overrides: Overrides,
    timings: bool,
) -> u8 {
    let cfg = match load_config(config_path, overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return 3;
        }
    };
    let suite: Suite = match suite_name.parse() {
        Ok(s) => s,
        Err(e) => {
            eprintln!("config error at `--suite`: {e}");
            return 3;
        }
    };
    let report = run_suite(&cfg, suite, timings);
    print!("{}", report_csv(&report));
    println!(
        "overall: {}",
        if report.overall_pass() { "pass" } else { "fail" }
    );
    if let Some(path) = out {
        if let Err(e) = std::fs::write(path, report_json(&report, &cfg)) {
            eprintln!("config error at `--out`: cannot write {}: {e}", path.display());
            return 3;
        }
    }
    if let Some(path) = csv {
        if let Err(e) = std::fs::write(path, report_csv(&report)) {
            eprintln!("config error at `--csv`: cannot write {}: {e}", path.display());
            return 3;
        }
    }
    report.exit_code() as u8
}

fn run_eval(config_path: &PathBuf, z_text: &str, w_text: &str) -> u8 {
    let cfg = match load_config(config_path, Overrides::default()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return 3;
        }
    };
    let n = cfg.params.n();
    let (z, w) = match (parse_point(z_text, n), parse_point(w_text, n)) {
        (Ok(z), Ok(w)) => (z, w),
        (Err(e), _) | (_, Err(e)) => {
            eprintln!("config error at `--z/--w`: {e}");
            return 3;
        }
    };
    match kernel_canonical(&cfg.params, &z, &w) {
        Ok(k) => {
            for row in 0..k.nrows() {
                let cells: Vec<String> =
                    (0..k.ncols()).map(|col| format_complex(k[(row, col)])).collect();
                println!("{}", cells.join("  "));
            }
            0
        }
        Err(e) => {
            eprintln!("{e}");
            if is_guard_error(&e) {
                2
            } else {
                3
            }
        }
    }
}

fn run_classify(path1: &PathBuf, path2: &PathBuf) -> u8 {
    let (c1, c2) = match (
        load_config(path1, Overrides::default()),
        load_config(path2, Overrides::default()),
    ) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => {
            eprintln!("{e}");
            return 3;
        }
    };
    match classify_verdict_line(&c1.params, &c2.params) {
        Ok((_, line)) => {
            println!("{line}");
            0
        }
        Err(e) => {
            eprintln!("{e}");
            if is_guard_error(&e) {
                2
            } else {
                3
            }
        }
    }
}

fn run_witness(alpha_text: &str) -> u8 {
    let alpha = match parse_alpha(alpha_text) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("config error at `--alpha`: {e}");
            return 3;
        }
    };
    match witness_line(&alpha) {
        Ok(line) => {
            println!("{line}");
            0
        }
        Err(e) => {
            eprintln!("{e}");
            if is_guard_error(&e) {
                2
            } else {
                3
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version are not errors; anything else is a bad
            // invocation, which is a configuration problem.
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 3,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let code = match &cli.command {
        Command::Verify {
            config,
            suite,
            out,
            csv,
            seed,
            samples,
            timings,
        } => run_verify(
            config,
            suite,
            out.as_ref(),
            csv.as_ref(),
            Overrides {
                seed: *seed,
                samples: *samples,
            },
            *timings,
        ),
        Command::Eval { config, z, w } => run_eval(config, z, w),
        Command::Classify { config1, config2 } => run_classify(config1, config2),
        Command::Witness { alpha } => run_witness(alpha),
    };
    ExitCode::from(code)
}
