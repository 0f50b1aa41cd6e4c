//! Command-line front end: net construction, proximity counts, grid
//! operators, sharpness scans, bound certification and experiment sweeps.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use dirmax::certifier::{certify_m, certify_mixed, certify_t, RecursionConfig};
use dirmax::cone_counts::{bracket_all, build_cap_cover, weighted_el_sum};
use dirmax::experiment::{run_experiment, ExperimentConfig, ExperimentKind};
use dirmax::field_ops::{
    directional_average, directional_singular, read_field, write_field, BumpPhi, GridField,
    MultiplierSpec,
};
use dirmax::maximal_ops::{
    maximal_average, maximal_singular, nikodym_maximal, sharpness_scan, single_scale_maximal,
    QuadratureSpec, ScaleGrid,
};
use dirmax::sphere_nets::{build_maximal_net, read_tsv, write_tsv, Direction};
use dirmax::{DirmaxError, Result};

#[derive(Parser)]
#[command(
    name = "dirmax",
    version,
    about = "Directional maximal operators: nets, proximity counts, grid transforms, bound certificates"
)]
struct Cli {
    /// Worker threads (reserved; current operators run single-threaded).
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Root seed for all randomized constructions.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Directory for artifacts.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Artifact format for tabular outputs.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum MaxopKind {
    Avg,
    Sing,
    Hilbert,
    Single,
    Nikodym,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum CertifyKind {
    M,
    T,
    Mixed,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum GenKind {
    Ball,
    Random,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build a maximal separated direction net and write it as TSV.
    Net {
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Bracket the hyperplane proximity counts of a net.
    El {
        #[arg(long)]
        net: PathBuf,
        /// Cover scale as a multiple of the net separation.
        #[arg(long, default_value_t = 4.0)]
        cover: f64,
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        #[arg(long, default_value_t = 8)]
        lmax: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Apply a single directional operator to a field file.
    Apply {
        /// Direction as comma-separated coordinates.
        #[arg(long)]
        direction: String,
        #[arg(long, value_enum)]
        kind: MaxopKind,
        /// Averaging scale for kind=avg.
        #[arg(long, default_value_t = 0.5)]
        h: f64,
        #[arg(long)]
        field: Option<PathBuf>,
        #[arg(long, value_enum)]
        gen: Option<GenKind>,
        #[arg(long, default_value_t = 32)]
        grid: usize,
        #[arg(long, default_value_t = 3)]
        dim: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a maximal operator over a net and report the L2 ratio.
    Maxop {
        #[arg(long, value_enum)]
        kind: MaxopKind,
        #[arg(long)]
        net: PathBuf,
        #[arg(long)]
        field: Option<PathBuf>,
        #[arg(long, value_enum)]
        gen: Option<GenKind>,
        #[arg(long, default_value_t = 32)]
        grid: usize,
        /// Eccentricity for kind=nikodym.
        #[arg(long, default_value_t = 0.25)]
        delta: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Oracle-based sharpness scan across net scales.
    Sharpness {
        #[arg(long)]
        dim: usize,
        /// Comma-separated decreasing list.
        #[arg(long)]
        deltas: String,
        #[arg(long, default_value = "0")]
        seeds: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the almost-orthogonality recursion on a net.
    Certify {
        #[arg(long, value_enum)]
        kind: CertifyKind,
        #[arg(long)]
        net: PathBuf,
        #[arg(long, default_value_t = 4.0)]
        cover: f64,
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        #[arg(long, default_value_t = 12)]
        lmax: u32,
        /// Per-cap bound for kind=mixed.
        #[arg(long, default_value_t = 1.0)]
        cap_bound: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a named experiment from a config file (flags override keys).
    Experiment {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        kind: Option<String>,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        deltas: Option<String>,
        #[arg(long)]
        seeds: Option<String>,
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        target: Option<f64>,
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Fast internal consistency battery.
    Selftest,
}

fn parse_f64_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| DirmaxError::Config(format!("bad number '{x}'")))
        })
        .collect()
}

fn parse_u64_list(s: &str) -> Result<Vec<u64>> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<u64>()
                .map_err(|_| DirmaxError::Config(format!("bad seed '{x}'")))
        })
        .collect()
}

fn load_or_gen_field(
    field: &Option<PathBuf>,
    gen: &Option<GenKind>,
    dim: usize,
    grid: usize,
    seed: u64,
) -> Result<GridField> {
    match (field, gen) {
        (Some(path), None) => read_field(path),
        (None, Some(GenKind::Ball)) => {
            GridField::smoothed_ball(dim, grid, 2.0 * std::f64::consts::PI, 0.5)
        }
        (None, Some(GenKind::Random)) => {
            GridField::random_bandlimited(dim, grid, 2.0 * std::f64::consts::PI, grid as i64 / 8, seed)
        }
        _ => Err(DirmaxError::Config(
            "provide exactly one of --field or --gen".into(),
        )),
    }
}

fn run(cli: &Cli) -> Result<i32> {
    match &cli.cmd {
        Cmd::Net { dim, delta, out } => {
            let net = build_maximal_net(*dim, *delta, cli.seed)?;
            write_tsv(&net, out)?;
            println!("net: dim={} delta={} count={}", dim, delta, net.len());
            Ok(0)
        }
        Cmd::El {
            net,
            cover,
            c,
            lmax,
            out,
        } => {
            let omega = read_tsv(net)?;
            let scale = cover * omega.separation;
            let cap_cover = build_cap_cover(&omega, scale, *c)?;
            let brackets = bracket_all(&cap_cover, *lmax, scale / 6.0)?;
            let (lo, up) = weighted_el_sum(&brackets);
            if cli.format == Format::Json {
                let json = serde_json::to_string_pretty(&brackets)
                    .map_err(|e| DirmaxError::Numeric(e.to_string()))?;
                std::fs::write(out, json)?;
            } else {
                let mut text = String::from("l,lower,upper,resolution\n");
                for b in &brackets {
                    text.push_str(&format!(
                        "{},{},{},{:.12e}\n",
                        b.l, b.lower, b.upper, b.sample_resolution
                    ));
                }
                std::fs::write(out, text)?;
            }
            println!(
                "el: caps={} e0=[{},{}] weighted_sum=[{:.6},{:.6}]",
                cap_cover.n_caps(),
                brackets[0].lower,
                brackets[0].upper,
                lo,
                up
            );
            Ok(0)
        }
        Cmd::Apply {
            direction,
            kind,
            h,
            field,
            gen,
            grid,
            dim,
            out,
        } => {
            let v = Direction::new(parse_f64_list(direction)?)?;
            let f = load_or_gen_field(field, gen, v.dim().max(*dim), *grid, cli.seed)?;
            let result = match kind {
                MaxopKind::Avg => {
                    let phi = BumpPhi::standard();
                    directional_average(&f, &v, *h, &phi)?
                }
                MaxopKind::Hilbert => directional_singular(&f, &v, &MultiplierSpec::hilbert())?,
                MaxopKind::Sing => {
                    directional_singular(&f, &v, &MultiplierSpec::unimodular_log())?
                }
                _ => {
                    return Err(DirmaxError::Config(
                        "apply supports kinds avg, sing and hilbert".into(),
                    ))
                }
            };
            write_field(&result, out)?;
            println!("apply: wrote {} (l2 {:.6})", out.display(), result.l2_norm());
            Ok(0)
        }
        Cmd::Maxop {
            kind,
            net,
            field,
            gen,
            grid,
            delta,
            out,
        } => {
            let omega = read_tsv(net)?;
            let f = load_or_gen_field(field, gen, omega.dim, *grid, cli.seed)?;
            let (id, ratio) = match kind {
                MaxopKind::Avg => {
                    let phi = BumpPhi::standard();
                    let scales = ScaleGrid::dyadic(&f);
                    let rep = maximal_average(&f, &omega, &scales, &phi)?;
                    (rep.operator_id, rep.l2_ratio)
                }
                MaxopKind::Sing => {
                    let rep = maximal_singular(&f, &omega, &MultiplierSpec::unimodular_log())?;
                    (rep.operator_id, rep.l2_ratio)
                }
                MaxopKind::Hilbert => {
                    let rep = maximal_singular(&f, &omega, &MultiplierSpec::hilbert())?;
                    ("maximal_hilbert".to_string(), rep.l2_ratio)
                }
                MaxopKind::Single => {
                    let rep = single_scale_maximal(&f, &omega)?;
                    (rep.operator_id, rep.l2_ratio)
                }
                MaxopKind::Nikodym => {
                    let scales = ScaleGrid::dyadic(&f);
                    let v = Direction::axis(omega.dim, omega.dim - 1);
                    let out_field = nikodym_maximal(&f, &v, *delta, &scales)?;
                    let denom = f.l2_norm();
                    (
                        "nikodym_maximal".to_string(),
                        if denom > 0.0 { out_field.l2_norm() / denom } else { 0.0 },
                    )
                }
            };
            let report = serde_json::json!({
                "operator_id": id,
                "directions": omega.len(),
                "l2_ratio": ratio,
            });
            std::fs::write(out, serde_json::to_string_pretty(&report).expect("static json"))?;
            println!("maxop: {id} l2_ratio={ratio:.6}");
            Ok(0)
        }
        Cmd::Sharpness {
            dim,
            deltas,
            seeds,
            out,
        } => {
            let deltas = parse_f64_list(deltas)?;
            let seeds = parse_u64_list(seeds)?;
            let rep = sharpness_scan(*dim, &deltas, &seeds, &QuadratureSpec::default())?;
            let mut text = String::from("delta,seed,count,l2_ratio,l2_ratio_hilbert\n");
            for r in &rep.rows {
                text.push_str(&format!(
                    "{:.12e},{},{},{:.12e},{:.12e}\n",
                    r.delta, r.seed, r.count, r.ratio_average, r.ratio_hilbert
                ));
            }
            std::fs::write(out, text)?;
            println!(
                "sharpness: slope_avg={:.4} slope_hilbert={:.4}",
                rep.slope_average, rep.slope_hilbert
            );
            Ok(0)
        }
        Cmd::Certify {
            kind,
            net,
            cover,
            c,
            lmax,
            cap_bound,
            out,
        } => {
            let omega = read_tsv(net)?;
            let cfg = RecursionConfig {
                cover_scale: *cover,
                slack_c: *c,
                l_max: *lmax,
                base_threshold: (2.0 * cover).max(4.0),
                ..RecursionConfig::default()
            };
            let trace = match kind {
                CertifyKind::M => certify_m(&omega, &cfg)?,
                CertifyKind::T => certify_t(&omega, &cfg)?,
                CertifyKind::Mixed => {
                    let scale = cfg.cover_scale * omega.separation;
                    let cap_cover = build_cap_cover(&omega, scale, cfg.slack_c)?;
                    let bounds = vec![*cap_bound; cap_cover.n_caps()];
                    certify_mixed(&omega, &cap_cover, &bounds, &cfg, true)?
                }
            };
            if trace.kind != "mixed" {
                trace.audit()?;
            }
            let json = serde_json::to_string_pretty(&trace)
                .map_err(|e| DirmaxError::Numeric(e.to_string()))?;
            std::fs::write(out, json)?;
            println!(
                "certify: kind={} bound={:.6} depth={}",
                trace.kind, trace.bound, trace.depth
            );
            Ok(0)
        }
        Cmd::Experiment {
            config,
            kind,
            dim,
            deltas,
            seeds,
            grid,
            target,
            tolerance,
        } => {
            let mut cfg = match config {
                Some(path) => ExperimentConfig::parse(&std::fs::read_to_string(path)?)?,
                None => ExperimentConfig {
                    kind: ExperimentKind::NetScaling,
                    dim: 3,
                    deltas: vec![0.4, 0.2, 0.1],
                    seeds: vec![cli.seed],
                    grid: 32,
                    target: None,
                    tolerance: None,
                    out_dir: cli.out_dir.clone(),
                },
            };
            if let Some(k) = kind {
                cfg.kind = k.parse()?;
            }
            if let Some(d) = dim {
                cfg.dim = *d;
            }
            if let Some(d) = deltas {
                cfg.deltas = parse_f64_list(d)?;
            }
            if let Some(s) = seeds {
                cfg.seeds = parse_u64_list(s)?;
            }
            if let Some(g) = grid {
                cfg.grid = *g;
            }
            if target.is_some() {
                cfg.target = *target;
            }
            if tolerance.is_some() {
                cfg.tolerance = *tolerance;
            }
            cfg.out_dir = cli.out_dir.clone();
            cfg.validate()?;
            let rep = run_experiment(&cfg)?;
            println!(
                "experiment: kind={} slope={:.4} target={:.4} pass={}",
                cfg.kind.as_str(),
                rep.slope,
                rep.target,
                rep.pass
            );
            Ok(if rep.pass { 0 } else { 1 })
        }
        Cmd::Selftest => {
            let phi = BumpPhi::standard();
            if !((phi.hat(0.0) - 1.0).abs() < 1e-12 && phi.lower_bound_const > 0.0) {
                return Err(DirmaxError::Numeric("averaging profile defect".into()));
            }
            println!("selftest: averaging profile ok");
            let f = GridField::random_bandlimited(2, 16, 4.0, 2, cli.seed)?;
            let g = directional_average(&f, &Direction::axis(2, 0), 0.5, &phi)?;
            if g.l2_norm() > f.l2_norm() * (1.0 + 1e-9) {
                return Err(DirmaxError::Numeric("average is not an L2 contraction".into()));
            }
            println!("selftest: grid operators ok");
            let net = build_maximal_net(3, 0.4, cli.seed)?;
            net.validate()?;
            let cover = build_cap_cover(&net, 1.6, 1.0)?;
            let brackets = bracket_all(&cover, 2, 0.2)?;
            if brackets.iter().any(|b| b.lower > b.upper) {
                return Err(DirmaxError::Numeric("count bracket inverted".into()));
            }
            println!("selftest: nets and counts ok");
            let tr = certify_m(&net, &RecursionConfig::default())?;
            tr.audit()?;
            println!("selftest: certifier ok (bound {:.4})", tr.bound);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
