//! Experiment orchestration: flat-file configs, scaling sweeps, log-log
//! slope fits and deterministic CSV/JSON artifacts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::certifier::{certify_m, RecursionConfig};
use crate::cone_counts::{bracket_all, build_cap_cover, weighted_el_sum};
use crate::field_ops::{kernel_decay_check, multiplier_difference_max, ConeSpec, GridField, MultiplierSpec};
use crate::maximal_ops::{maximal_average, sharpness_scan, QuadratureSpec, ScaleGrid};
use crate::sphere_nets::{build_maximal_net, Direction};
use crate::{DirmaxError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExperimentKind {
    NetScaling,
    ElScaling,
    Sharpness,
    GridMaximal,
    CertifyScaling,
    MultiplierDecay,
    KernelDecay,
    MixedCorollary,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::NetScaling => "net-scaling",
            ExperimentKind::ElScaling => "el-scaling",
            ExperimentKind::Sharpness => "sharpness",
            ExperimentKind::GridMaximal => "grid-maximal",
            ExperimentKind::CertifyScaling => "certify-scaling",
            ExperimentKind::MultiplierDecay => "multiplier-decay",
            ExperimentKind::KernelDecay => "kernel-decay",
            ExperimentKind::MixedCorollary => "mixed-corollary",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = DirmaxError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "net-scaling" => ExperimentKind::NetScaling,
            "el-scaling" => ExperimentKind::ElScaling,
            "sharpness" => ExperimentKind::Sharpness,
            "grid-maximal" => ExperimentKind::GridMaximal,
            "certify-scaling" => ExperimentKind::CertifyScaling,
            "multiplier-decay" => ExperimentKind::MultiplierDecay,
            "kernel-decay" => ExperimentKind::KernelDecay,
            "mixed-corollary" => ExperimentKind::MixedCorollary,
            other => {
                return Err(DirmaxError::Config(format!(
                    "unknown experiment kind '{other}'"
                )))
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub dim: usize,
    pub deltas: Vec<f64>,
    pub seeds: Vec<u64>,
    pub grid: usize,
    pub target: Option<f64>,
    pub tolerance: Option<f64>,
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.deltas.is_empty() {
            return Err(DirmaxError::Config("delta list must be nonempty".into()));
        }
        for w in self.deltas.windows(2) {
            if w[1] >= w[0] {
                return Err(DirmaxError::Config(
                    "delta values must be strictly decreasing".into(),
                ));
            }
        }
        if self.deltas.iter().any(|&d| !(d > 0.0 && d < 1.0)) {
            return Err(DirmaxError::Config("delta values must lie in (0, 1)".into()));
        }
        if self.seeds.is_empty() {
            return Err(DirmaxError::Config("seed list must be nonempty".into()));
        }
        if !self.grid.is_power_of_two() || self.grid < 2 {
            return Err(DirmaxError::Config("grid size must be a power of two".into()));
        }
        if self.dim < 2 {
            return Err(DirmaxError::Config("dimension must be >= 2".into()));
        }
        Ok(())
    }

    /// Flat key=value form, keys sorted, one per line.
    pub fn emit(&self) -> String {
        let deltas = self
            .deltas
            .iter()
            .map(|d| format!("{d}"))
            .collect::<Vec<_>>()
            .join(",");
        let seeds = self
            .seeds
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join(",");
        let mut out = String::new();
        let _ = writeln!(out, "deltas={deltas}");
        let _ = writeln!(out, "dim={}", self.dim);
        let _ = writeln!(out, "grid={}", self.grid);
        let _ = writeln!(out, "kind={}", self.kind.as_str());
        let _ = writeln!(out, "out_dir={}", self.out_dir.display());
        let _ = writeln!(out, "seeds={seeds}");
        if let Some(t) = self.target {
            let _ = writeln!(out, "target={t}");
        }
        if let Some(t) = self.tolerance {
            let _ = writeln!(out, "tolerance={t}");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut kind = None;
        let mut dim = None;
        let mut deltas = None;
        let mut seeds = None;
        let mut grid = None;
        let mut target = None;
        let mut tolerance = None;
        let mut out_dir = None;
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                DirmaxError::Config(format!("line {}: expected key=value", ln + 1))
            })?;
            let bad = |what: &str| DirmaxError::Config(format!("line {}: bad {what}", ln + 1));
            match key.trim() {
                "kind" => kind = Some(value.trim().parse::<ExperimentKind>()?),
                "dim" => dim = Some(value.trim().parse().map_err(|_| bad("dim"))?),
                "grid" => grid = Some(value.trim().parse().map_err(|_| bad("grid"))?),
                "target" => target = Some(value.trim().parse().map_err(|_| bad("target"))?),
                "tolerance" => {
                    tolerance = Some(value.trim().parse().map_err(|_| bad("tolerance"))?)
                }
                "out_dir" => out_dir = Some(PathBuf::from(value.trim())),
                "deltas" => {
                    deltas = Some(
                        value
                            .split(',')
                            .map(|x| x.trim().parse::<f64>().map_err(|_| bad("deltas")))
                            .collect::<Result<Vec<_>>>()?,
                    )
                }
                "seeds" => {
                    seeds = Some(
                        value
                            .split(',')
                            .map(|x| x.trim().parse::<u64>().map_err(|_| bad("seeds")))
                            .collect::<Result<Vec<_>>>()?,
                    )
                }
                other => {
                    return Err(DirmaxError::Config(format!(
                        "line {}: unknown key '{other}'",
                        ln + 1
                    )))
                }
            }
        }
        let cfg = ExperimentConfig {
            kind: kind.ok_or_else(|| DirmaxError::Config("missing key 'kind'".into()))?,
            dim: dim.ok_or_else(|| DirmaxError::Config("missing key 'dim'".into()))?,
            deltas: deltas.ok_or_else(|| DirmaxError::Config("missing key 'deltas'".into()))?,
            seeds: seeds.unwrap_or_else(|| vec![0]),
            grid: grid.unwrap_or(32),
            target,
            tolerance,
            out_dir: out_dir.unwrap_or_else(|| PathBuf::from(".")),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Least-squares fit on logarithmic axes.
#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub residual_rms: f64,
    pub target: f64,
    pub tolerance: f64,
    pub pass: bool,
}

pub fn fit_loglog(xs: &[f64], ys: &[f64], target: f64, tolerance: f64) -> Result<FitReport> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(DirmaxError::InvalidParameter(
            "log-log fit needs at least 3 matched points".into(),
        ));
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(DirmaxError::Numeric(
            "log-log fit needs positive finite data".into(),
        ));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let (slope, intercept, _r2) = linear_fit(&lx, &ly)?;
    let rms = (lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| {
            let e = y - (slope * x + intercept);
            e * e
        })
        .sum::<f64>()
        / lx.len() as f64)
        .sqrt();
    let pass = (slope - target).abs() <= tolerance;
    Ok(FitReport {
        xs: xs.to_vec(),
        ys: ys.to_vec(),
        slope,
        intercept,
        residual_rms: rms,
        target,
        tolerance,
        pass,
    })
}

/// Plain least squares, returning (slope, intercept, R^2).
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    let n = xs.len() as f64;
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(DirmaxError::InvalidParameter("fit needs >= 2 points".into()));
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx <= 1e-300 {
        return Err(DirmaxError::InvalidParameter(
            "fit abscissae are degenerate".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { (sxy * sxy) / (sxx * syy) } else { 1.0 };
    Ok((slope, intercept, r2))
}

fn write_csv(path: &Path, header: &str, rows: &[Vec<f64>]) -> Result<()> {
    let mut out = String::new();
    out.push_str(header);
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.12e}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn finish(cfg: &ExperimentConfig, report: &FitReport) -> Result<()> {
    std::fs::create_dir_all(&cfg.out_dir)?;
    let json = serde_json::to_string_pretty(report)
        .map_err(|e| DirmaxError::Numeric(format!("fit serialization failed: {e}")))?;
    std::fs::write(
        cfg.out_dir.join(format!("{}_fit.json", cfg.kind.as_str())),
        json,
    )?;
    Ok(())
}

/// Runs one experiment, writes its artifacts into the output directory, and
/// returns the fit.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<FitReport> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    let csv_path = cfg.out_dir.join(format!("{}.csv", cfg.kind.as_str()));
    let report = match cfg.kind {
        ExperimentKind::NetScaling => {
            let mut rows = Vec::new();
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for &delta in &cfg.deltas {
                for &seed in &cfg.seeds {
                    let net = build_maximal_net(cfg.dim, delta, seed)?;
                    rows.push(vec![delta, seed as f64, net.len() as f64]);
                    xs.push(1.0 / delta);
                    ys.push(net.len() as f64);
                }
            }
            write_csv(&csv_path, "delta,seed,count", &rows)?;
            fit_loglog(
                &xs,
                &ys,
                cfg.target.unwrap_or((cfg.dim - 1) as f64),
                cfg.tolerance.unwrap_or(0.2),
            )?
        }
        ExperimentKind::ElScaling => {
            let rec = RecursionConfig::default();
            let mut rows = Vec::new();
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for &delta in &cfg.deltas {
                for &seed in &cfg.seeds {
                    let net = build_maximal_net(cfg.dim, delta, seed)?;
                    let scale = rec.cover_scale * delta;
                    let cover = build_cap_cover(&net, scale, rec.slack_c)?;
                    let brackets = bracket_all(&cover, 8, scale / rec.rho_divisor)?;
                    let (el_lo, el_up) = weighted_el_sum(&brackets);
                    rows.push(vec![
                        delta,
                        seed as f64,
                        brackets[0].lower as f64,
                        brackets[0].upper as f64,
                        el_lo,
                        el_up,
                    ]);
                    xs.push(1.0 / delta);
                    ys.push(brackets[0].lower as f64);
                }
            }
            write_csv(&csv_path, "delta,seed,e0_lower,e0_upper,el_sum_lower,el_sum_upper", &rows)?;
            fit_loglog(
                &xs,
                &ys,
                cfg.target.unwrap_or((cfg.dim - 2) as f64),
                cfg.tolerance.unwrap_or(0.25),
            )?
        }
        ExperimentKind::Sharpness => {
            let quad = QuadratureSpec::default();
            let scan = sharpness_scan(cfg.dim, &cfg.deltas, &cfg.seeds, &quad)?;
            let rows: Vec<Vec<f64>> = scan
                .rows
                .iter()
                .map(|r| {
                    vec![
                        r.delta,
                        r.seed as f64,
                        r.count as f64,
                        r.ratio_average,
                        r.ratio_hilbert,
                    ]
                })
                .collect();
            write_csv(&csv_path, "delta,seed,count,l2_ratio,l2_ratio_hilbert", &rows)?;
            let xs: Vec<f64> = scan.rows.iter().map(|r| r.count as f64).collect();
            let ys: Vec<f64> = scan.rows.iter().map(|r| r.ratio_average).collect();
            let target = cfg
                .target
                .unwrap_or((cfg.dim as f64 - 2.0) / (2.0 * (cfg.dim as f64 - 1.0)));
            fit_loglog(&xs, &ys, target, cfg.tolerance.unwrap_or(0.07))?
        }
        ExperimentKind::GridMaximal => {
            let phi = crate::field_ops::BumpPhi::standard();
            let l = 2.0 * std::f64::consts::PI;
            let ball = GridField::smoothed_ball(cfg.dim, cfg.grid, l, 0.5)?;
            let scales = ScaleGrid::dyadic(&ball);
            let mut rows = Vec::new();
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for &delta in &cfg.deltas {
                for &seed in &cfg.seeds {
                    let net = build_maximal_net(cfg.dim, delta, seed)?;
                    let rep = maximal_average(&ball, &net, &scales, &phi)?;
                    rows.push(vec![delta, seed as f64, net.len() as f64, rep.l2_ratio]);
                    xs.push(net.len() as f64);
                    ys.push(rep.l2_ratio);
                }
            }
            write_csv(&csv_path, "delta,seed,count,l2_ratio", &rows)?;
            let target = cfg
                .target
                .unwrap_or((cfg.dim as f64 - 2.0) / (2.0 * (cfg.dim as f64 - 1.0)));
            fit_loglog(&xs, &ys, target, cfg.tolerance.unwrap_or(0.25))?
        }
        ExperimentKind::CertifyScaling => {
            let rec = RecursionConfig::default();
            let mut rows = Vec::new();
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for &delta in &cfg.deltas {
                for &seed in &cfg.seeds {
                    let net = build_maximal_net(cfg.dim, delta, seed)?;
                    let tr = certify_m(&net, &rec)?;
                    rows.push(vec![delta, seed as f64, net.len() as f64, tr.bound]);
                    xs.push(1.0 / delta);
                    ys.push(tr.bound);
                }
            }
            write_csv(&csv_path, "delta,seed,count,bound", &rows)?;
            fit_loglog(
                &xs,
                &ys,
                cfg.target.unwrap_or((cfg.dim as f64 - 2.0) / 2.0),
                cfg.tolerance.unwrap_or(0.15),
            )?
        }
        ExperimentKind::MultiplierDecay => {
            let m = MultiplierSpec::unimodular_log();
            let mut rows = Vec::new();
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            let delta_j = cfg.deltas[0];
            let radii: Vec<f64> = (0..12).map(|i| 2f64.powi(i - 4)).collect();
            for &seed in &cfg.seeds {
                let (v, v_j) = perturbed_pair(cfg.dim, delta_j, seed)?;
                for l in 1..=6u32 {
                    // Stop once the dyadic shell leaves the unit frequency ball.
                    if 2.0 * delta_j * 2f64.powi(l as i32 - 1) >= 1.0 {
                        break;
                    }
                    let cone = ConeSpec {
                        center: v_j.clone(),
                        delta: delta_j,
                        c: 1.0,
                        l,
                    };
                    let d = multiplier_difference_max(&v, &v_j, &m, &cone, &radii)?;
                    rows.push(vec![seed as f64, l as f64, d]);
                    xs.push(2f64.powi(-(l as i32)));
                    ys.push(d.max(1e-300));
                }
            }
            write_csv(&csv_path, "seed,l,max_difference", &rows)?;
            // The bound is one-sided (difference <= C 2^{-l}); the realized
            // decay is a bit steeper at small l, so the window is asymmetric.
            fit_loglog(&xs, &ys, cfg.target.unwrap_or(1.2), cfg.tolerance.unwrap_or(0.5))?
        }
        ExperimentKind::KernelDecay => {
            let m = MultiplierSpec::unimodular_log();
            let delta_j = cfg.deltas[0];
            let dim = cfg.dim;
            let v = tilted_axis(dim, 0.75 * delta_j)?;
            let mut rows = Vec::new();
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for l in 1..=4u32 {
                let cone = ConeSpec {
                    center: Direction::axis(dim, dim - 1),
                    delta: delta_j,
                    c: 1.0,
                    l,
                };
                let rep = kernel_decay_check(&v, &m, &cone, 3, cfg.grid, 2.0 * std::f64::consts::PI)?;
                rows.push(vec![l as f64, rep.envelope_ratio, rep.max_abs_kernel]);
                xs.push(l as f64);
                ys.push(rep.envelope_ratio.max(1e-300));
            }
            write_csv(&csv_path, "l,envelope_ratio,max_abs_kernel", &rows)?;
            // Stability, not scaling: the fitted slope of the normalized
            // ratio across l should be near zero.
            fit_loglog(&xs, &ys, cfg.target.unwrap_or(0.0), cfg.tolerance.unwrap_or(2.0))?
        }
        ExperimentKind::MixedCorollary => {
            let rec = RecursionConfig::default();
            let mut rows = Vec::new();
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for &delta in &cfg.deltas {
                for &seed in &cfg.seeds {
                    let template = crate::sphere_nets::LacunarySpec {
                        cap_center: Direction::axis(cfg.dim, cfg.dim - 1),
                        tangent: Direction::axis(cfg.dim, 0),
                        ratio: 0.5,
                        count: 16,
                        cap_radius: 0.4 * delta,
                    };
                    let (omega, cover) =
                        crate::sphere_nets::build_mixed_set(cfg.dim, delta, &template, seed)?;
                    let caps = vec![(16f64.ln()).sqrt(); cover.n_caps()];
                    let tr = crate::certifier::certify_mixed(&omega, &cover, &caps, &rec, true)?;
                    rows.push(vec![delta, seed as f64, omega.len() as f64, tr.bound]);
                    xs.push(1.0 / delta);
                    ys.push(tr.bound);
                }
            }
            write_csv(&csv_path, "delta,seed,count,bound", &rows)?;
            fit_loglog(
                &xs,
                &ys,
                cfg.target.unwrap_or((cfg.dim as f64 - 2.0) / 2.0),
                cfg.tolerance.unwrap_or(0.25),
            )?
        }
    };
    finish(cfg, &report)?;
    Ok(report)
}

/// Deterministic (v, v_j) pair with |v - v_j| <= delta_j.
fn perturbed_pair(dim: usize, delta_j: f64, seed: u64) -> Result<(Direction, Direction)> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9).wrapping_add(7));
    let v_j = Direction::new((0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())?;
    let tilt: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let d = crate::sphere_nets::dot(&tilt, v_j.coords());
    let mut t: Vec<f64> = tilt
        .iter()
        .zip(v_j.coords())
        .map(|(x, c)| x - d * c)
        .collect();
    let norm = t.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm < 1e-9 {
        t = vec![0.0; dim];
        t[(seed as usize + 1) % dim] = 1.0;
    } else {
        for x in t.iter_mut() {
            *x /= norm;
        }
    }
    let eps = 0.7 * delta_j;
    let v = Direction::new(
        v_j.coords()
            .iter()
            .zip(&t)
            .map(|(c, e)| c + eps * e)
            .collect(),
    )?;
    Ok((v, v_j))
}

fn tilted_axis(dim: usize, eps: f64) -> Result<Direction> {
    let mut c = vec![0.0; dim];
    c[dim - 1] = 1.0;
    c[0] = eps;
    Direction::new(c)
}
