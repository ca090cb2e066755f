// `!(x > 0.0)` in argument guards also rejects NaN, unlike `x <= 0.0`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Command-line orchestration: load systems and packets, run propagations
//! and verification suites, emit CSV/JSON tables.
//!
//! Exit codes: 0 on success (and for `check`: hypoelliptic), 2 for a
//! negative decision (`check` on a degenerate system, `verify` with
//! failures), 1 on any error. Floats are printed with 17 significant
//! digits so identical configurations produce byte-identical output.

use clap::{Parser, Subcommand, ValueEnum};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use hypoprop::analysis::{decay_exponent_fit, dispersive_ratio, hardy_product, LpExponent};
use hypoprop::gridprop::{
    grid_propagate, grid_sample, grid_sample_packet, kernel_propagate, suggest_geometry,
    GridField, Interpolation, PropagationSettings,
};
use hypoprop::matcore::{self, SystemPair};
use hypoprop::packets::GaussianPacket;

mod verify;

#[derive(Parser)]
#[command(
    name = "hypoprop",
    about = "Propagators and sharp-estimate checks for degenerate Schrödinger equations with drift",
    version
)]
struct Cli {
    /// Seed for the random verification batteries.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Backend {
    /// Closed-form Gaussian packet propagation sampled on the grid.
    Exact,
    /// FFT propagator (drift removal + Fourier multiplier + resampling).
    Grid,
    /// Direct oscillatory-kernel quadrature (m <= 2).
    Kernel,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InterpArg {
    FourierZeropad,
    Cubic,
}

#[derive(Subcommand)]
enum Command {
    /// Decide hypoellipticity; exit 0 when positive, 2 when degenerate.
    Check {
        /// System JSON file {"m":…, "Q":[[…]], "B":[[…]]}.
        #[arg(long)]
        system: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        t_probe: f64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Covariance sweep: CSV of t, det Q(t), lambda_min and the Q(t) entries.
    Covariance {
        #[arg(long)]
        system: PathBuf,
        /// Linear range "start:stop:count".
        #[arg(long)]
        t_range: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Propagate an initial packet (or sampled field) and dump the field CSV.
    Propagate {
        #[arg(long)]
        system: PathBuf,
        /// Packet JSON file; defaults to the isotropic Gaussian e^{-|x|^2}.
        #[arg(long)]
        packet: Option<PathBuf>,
        /// Field CSV input (grid backend only); requires --field-meta.
        #[arg(long, requires = "field_meta", conflicts_with = "packet")]
        field: Option<PathBuf>,
        /// Metadata JSON for --field.
        #[arg(long)]
        field_meta: Option<PathBuf>,
        #[arg(long)]
        t: f64,
        #[arg(long, value_enum, default_value = "exact")]
        backend: Backend,
        /// Box half-widths, comma separated per axis (default: automatic).
        #[arg(long)]
        grid_l: Option<String>,
        /// Samples per axis, power of two (default: automatic).
        #[arg(long)]
        grid_n: Option<usize>,
        #[arg(long, value_enum, default_value = "fourier-zeropad")]
        interpolation: InterpArg,
        /// Evaluation-box shrinkage factor (default: ceil of the flow norm).
        #[arg(long)]
        margin: Option<f64>,
        /// Disable the chirp-resolution guard.
        #[arg(long)]
        no_guard: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Where to write the grid metadata JSON.
        #[arg(long)]
        meta_out: Option<PathBuf>,
    },
    /// Run a verification suite: covariance | norm | semigroup | commutation | fresnel | all.
    Verify {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        suite: String,
    },
    /// Dispersive-estimate sweep over a geometric time range, plus the
    /// fitted decay slope of the bound.
    Dispersion {
        #[arg(long)]
        system: PathBuf,
        /// Exponent p in [1, 2].
        #[arg(long)]
        p: f64,
        /// Geometric range "start:stop:count".
        #[arg(long)]
        t_range: String,
        /// Decay rate of the isotropic Gaussian input.
        #[arg(long, default_value_t = 1.0)]
        a: f64,
        /// Packet JSON input overriding --a.
        #[arg(long)]
        packet: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Hardy uncertainty product sweep over s.
    Hardy {
        #[arg(long)]
        system: PathBuf,
        /// Decay rate of the isotropic Gaussian input.
        #[arg(long, default_value_t = 1.0)]
        a: f64,
        /// Linear range "start:stop:count".
        #[arg(long)]
        s_range: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("HYPOPROP_THREADS") {
        if let Ok(k) = threads.trim().parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
        }
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap would exit with 2; the interface contract wants 1 on error
            // (help/version remain successful)
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> hypoprop::Result<u8> {
    match cli.command {
        Command::Check { system, t_probe, tol } => cmd_check(&system, t_probe, tol),
        Command::Covariance { system, t_range, out } => cmd_covariance(&system, &t_range, out.as_deref()),
        Command::Propagate {
            system,
            packet,
            field,
            field_meta,
            t,
            backend,
            grid_l,
            grid_n,
            interpolation,
            margin,
            no_guard,
            out,
            meta_out,
        } => cmd_propagate(PropagateArgs {
            system,
            packet,
            field,
            field_meta,
            t,
            backend,
            grid_l,
            grid_n,
            interpolation,
            margin,
            no_guard,
            out,
            meta_out,
        }),
        Command::Verify { system, suite } => verify::cmd_verify(&system, &suite, cli.seed),
        Command::Dispersion {
            system,
            p,
            t_range,
            a,
            packet,
            out,
        } => cmd_dispersion(&system, p, &t_range, a, packet.as_deref(), out.as_deref()),
        Command::Hardy {
            system,
            a,
            s_range,
            out,
        } => cmd_hardy(&system, a, &s_range, out.as_deref()),
    }
}

pub(crate) fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn read_to_string(path: &Path) -> hypoprop::Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| hypoprop::Error::Parse(format!("{}: {e}", path.display())))
}

pub(crate) fn load_system(path: &Path) -> hypoprop::Result<SystemPair> {
    SystemPair::from_json_str(&read_to_string(path)?)
}

fn load_packet(path: &Path) -> hypoprop::Result<GaussianPacket> {
    GaussianPacket::from_json_str(&read_to_string(path)?)
}

fn emit(text: &str, out: Option<&Path>) -> hypoprop::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| hypoprop::Error::Parse(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Parses "start:stop:count"; count = 1 yields just the start point.
fn parse_range(spec: &str, geometric: bool) -> hypoprop::Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(hypoprop::Error::Parse(format!(
            "range must be start:stop:count, got {spec:?}"
        )));
    }
    let start: f64 = parts[0]
        .parse()
        .map_err(|e| hypoprop::Error::Parse(format!("range start: {e}")))?;
    let stop: f64 = parts[1]
        .parse()
        .map_err(|e| hypoprop::Error::Parse(format!("range stop: {e}")))?;
    let count: usize = parts[2]
        .parse()
        .map_err(|e| hypoprop::Error::Parse(format!("range count: {e}")))?;
    if count == 0 {
        return Err(hypoprop::Error::Parse("range count must be positive".into()));
    }
    if count == 1 {
        return Ok(vec![start]);
    }
    if geometric && !(start > 0.0 && stop > 0.0) {
        return Err(hypoprop::Error::Parse(
            "geometric range requires positive endpoints".into(),
        ));
    }
    Ok((0..count)
        .map(|k| {
            let frac = k as f64 / (count - 1) as f64;
            if geometric {
                start * (stop / start).powf(frac)
            } else {
                start + (stop - start) * frac
            }
        })
        .collect())
}

fn cmd_check(system: &Path, t_probe: f64, tol: f64) -> hypoprop::Result<u8> {
    let sys = load_system(system)?;
    let report = matcore::hypoelliptic(&sys, t_probe, tol)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&report).expect("report serializes")
    );
    Ok(if report.hypoelliptic { 0 } else { 2 })
}

fn cmd_covariance(system: &Path, t_range: &str, out: Option<&Path>) -> hypoprop::Result<u8> {
    let sys = load_system(system)?;
    let times = parse_range(t_range, false)?;
    let m = sys.dim();
    let mut csv = String::from("t,det,lambda_min");
    for i in 1..=m {
        for j in 1..=m {
            let _ = write!(csv, ",q_{i}_{j}");
        }
    }
    csv.push('\n');
    for &t in &times {
        let cov = matcore::covariance(&sys, t)?;
        let _ = write!(csv, "{},{},{}", fmt(t), fmt(cov.det()), fmt(cov.lambda_min()));
        for i in 0..m {
            for j in 0..m {
                let _ = write!(csv, ",{}", fmt(cov.value()[(i, j)]));
            }
        }
        csv.push('\n');
    }
    emit(&csv, out)?;
    Ok(0)
}

struct PropagateArgs {
    system: PathBuf,
    packet: Option<PathBuf>,
    field: Option<PathBuf>,
    field_meta: Option<PathBuf>,
    t: f64,
    backend: Backend,
    grid_l: Option<String>,
    grid_n: Option<usize>,
    interpolation: InterpArg,
    margin: Option<f64>,
    no_guard: bool,
    out: Option<PathBuf>,
    meta_out: Option<PathBuf>,
}

fn parse_half_widths(spec: &str, m: usize) -> hypoprop::Result<Vec<f64>> {
    let vals: Vec<f64> = spec
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| hypoprop::Error::Parse(format!("--grid-l: {e}")))?;
    match vals.len() {
        1 => Ok(vec![vals[0]; m]),
        k if k == m => Ok(vals),
        k => Err(hypoprop::Error::Parse(format!(
            "--grid-l needs 1 or {m} values, got {k}"
        ))),
    }
}

fn cmd_propagate(args: PropagateArgs) -> hypoprop::Result<u8> {
    let sys = load_system(&args.system)?;
    let m = sys.dim();
    if args.t < 0.0 {
        return Err(hypoprop::Error::Domain("t must be nonnegative".into()));
    }

    let settings = PropagationSettings {
        interpolation: match args.interpolation {
            InterpArg::FourierZeropad => Interpolation::FourierZeroPad,
            InterpArg::Cubic => Interpolation::Cubic,
        },
        margin_factor: args.margin,
        chirp_resolution_guard: !args.no_guard,
    };

    // field input: grid backend only
    if let (Some(field_path), Some(meta_path)) = (&args.field, &args.field_meta) {
        if args.backend != Backend::Grid {
            return Err(hypoprop::Error::InvalidInput(
                "field input supports only --backend grid".into(),
            ));
        }
        let field = GridField::from_csv_str(
            &read_to_string(field_path)?,
            &read_to_string(meta_path)?,
        )?;
        let result = if args.t == 0.0 {
            field
        } else {
            grid_propagate(&field, &sys, args.t, &settings)?
        };
        emit(&result.to_csv_string(), args.out.as_deref())?;
        if let Some(meta_out) = &args.meta_out {
            emit(&result.metadata_json(), Some(meta_out))?;
        }
        return Ok(0);
    }

    let packet = match &args.packet {
        Some(path) => load_packet(path)?,
        None => GaussianPacket::isotropic(m, 1.0),
    };
    if packet.dim() != m {
        return Err(hypoprop::Error::InvalidInput(
            "packet and system dimensions differ".into(),
        ));
    }

    // grid geometry: explicit or suggested for the evolved packet
    let (l_auto, n_auto, _) = suggest_geometry(&packet, &sys, args.t.max(1e-6), 5.0, 2.0)?;
    let l = match &args.grid_l {
        Some(spec) => parse_half_widths(spec, m)?,
        None => l_auto,
    };
    let n = args.grid_n.unwrap_or(n_auto);

    let result = match args.backend {
        Backend::Exact => {
            let evolved = packet.propagate(&sys, args.t)?;
            grid_sample_packet(&evolved, &l, n)?
        }
        Backend::Grid => {
            let field = grid_sample_packet(&packet, &l, n)?;
            if args.t == 0.0 {
                field
            } else {
                grid_propagate(&field, &sys, args.t, &settings)?
            }
        }
        Backend::Kernel => {
            if args.t == 0.0 {
                grid_sample_packet(&packet, &l, n)?
            } else {
                let flow = matcore::mat_exp(sys.b(), args.t)?;
                let margin = args.margin.unwrap_or_else(|| {
                    matcore::spectral_norm(&flow).ceil().max(1.0)
                });
                let out_l: Vec<f64> = l.iter().map(|x| x / margin).collect();
                let guard = !args.no_guard;
                // the guard is tightest at the corner; surface its error once
                let corner: Vec<f64> = out_l.iter().map(|x| -x).collect();
                kernel_propagate(|y| packet.eval(y), &sys, args.t, &corner, &l, n, guard)?;
                grid_sample(
                    |x| {
                        kernel_propagate(|y| packet.eval(y), &sys, args.t, x, &l, n, guard)
                            .expect("interior points pass once the corner does")
                    },
                    &out_l,
                    n,
                    m,
                )?
            }
        }
    };
    emit(&result.to_csv_string(), args.out.as_deref())?;
    if let Some(meta_out) = &args.meta_out {
        emit(&result.metadata_json(), Some(meta_out))?;
    }
    Ok(0)
}

fn cmd_dispersion(
    system: &Path,
    p: f64,
    t_range: &str,
    a: f64,
    packet: Option<&Path>,
    out: Option<&Path>,
) -> hypoprop::Result<u8> {
    let sys = load_system(system)?;
    let exponent = LpExponent::new(p)?;
    let times = parse_range(t_range, true)?;
    let input = match packet {
        Some(path) => load_packet(path)?,
        None => {
            if !(a > 0.0) {
                return Err(hypoprop::Error::Domain("--a must be positive".into()));
            }
            GaussianPacket::isotropic(sys.dim(), a)
        }
    };
    let mut csv = String::from("t,p,p_conj,lhs,bound,ratio\n");
    for &t in &times {
        let report = dispersive_ratio(&input, &sys, t, &exponent)?;
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            fmt(t),
            fmt(exponent.p()),
            fmt(exponent.conjugate()),
            fmt(report.lhs),
            fmt(report.bound),
            fmt(report.ratio)
        );
    }
    let slope = if times.len() >= 2 {
        Some(decay_exponent_fit(&sys, &exponent, &times)?)
    } else {
        None
    };
    match out {
        Some(path) => {
            emit(&csv, Some(path))?;
            if let Some(s) = slope {
                println!("slope,{}", fmt(s));
            }
        }
        None => {
            print!("{csv}");
            if let Some(s) = slope {
                println!("# slope = {}", fmt(s));
            }
        }
    }
    Ok(0)
}

fn cmd_hardy(system: &Path, a: f64, s_range: &str, out: Option<&Path>) -> hypoprop::Result<u8> {
    let sys = load_system(system)?;
    if !(a > 0.0) {
        return Err(hypoprop::Error::Domain("--a must be positive".into()));
    }
    let packet = GaussianPacket::isotropic(sys.dim(), a);
    let svals = parse_range(s_range, false)?;
    let pi_sq = std::f64::consts::PI * std::f64::consts::PI;
    let mut csv = String::from("s,a,b,product,pi_sq_ratio\n");
    for &s in &svals {
        let report = hardy_product(&packet, &sys, s)?;
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            fmt(s),
            fmt(report.a),
            fmt(report.b),
            fmt(report.product),
            fmt(report.product / pi_sq)
        );
    }
    emit(&csv, out)?;
    Ok(0)
}

