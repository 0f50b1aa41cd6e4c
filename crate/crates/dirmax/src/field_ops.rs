//! Periodic-grid Fourier machinery: directional averages, Mikhlin
//! multiplier transforms, cone restrictions, Littlewood-Paley pieces and a
//! kernel-decay probe.
//!
//! Fields live on a periodic N^n grid with physical box length L; all
//! frequency statements are tested on the lattice (2 pi / L) Z^n truncated
//! to the Nyquist cube.

use std::io::{Read as _, Write as _};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;
use sha2::{Digest, Sha256};

use crate::sphere_nets::Direction;
use crate::{DirmaxError, Result};

/// Complex scalar field on a periodic N^n grid, row-major with axis 0
/// slowest.
#[derive(Debug, Clone)]
pub struct GridField {
    pub dim: usize,
    pub points_per_axis: usize,
    pub box_length: f64,
    pub values: Vec<Complex64>,
}

impl GridField {
    pub fn zeros(dim: usize, points_per_axis: usize, box_length: f64) -> Result<Self> {
        if dim < 1 || points_per_axis < 2 || !points_per_axis.is_power_of_two() {
            return Err(DirmaxError::InvalidParameter(
                "grid needs a power-of-two axis size >= 2".into(),
            ));
        }
        if !(box_length > 0.0) {
            return Err(DirmaxError::InvalidParameter("box length must be > 0".into()));
        }
        let len = points_per_axis.pow(dim as u32);
        Ok(GridField {
            dim,
            points_per_axis,
            box_length,
            values: vec![Complex64::new(0.0, 0.0); len],
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Grid spacing L / N.
    pub fn spacing(&self) -> f64 {
        self.box_length / self.points_per_axis as f64
    }

    /// Physical L2 norm: sqrt(sum |f|^2 (L/N)^n).
    pub fn l2_norm(&self) -> f64 {
        let cell = self.spacing().powi(self.dim as i32);
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * cell).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Signed integer frequency index along one axis for flat position `i`.
    pub fn freq_index(&self, i: usize) -> i64 {
        let n = self.points_per_axis;
        if i < n / 2 {
            i as i64
        } else {
            i as i64 - n as i64
        }
    }

    /// Physical coordinate in [-L/2, L/2) for grid index `i`.
    pub fn coord(&self, i: usize) -> f64 {
        let n = self.points_per_axis;
        let i = (i + n / 2) % n;
        (i as f64 - (n / 2) as f64) * self.spacing()
    }

    fn strides(&self) -> Vec<usize> {
        let mut s = vec![1usize; self.dim];
        for a in (0..self.dim - 1).rev() {
            s[a] = s[a + 1] * self.points_per_axis;
        }
        s
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        let strides = self.strides();
        idx.iter().zip(&strides).map(|(i, s)| i * s).sum()
    }

    /// Adds the single Fourier mode exp(i (2 pi / L) k . x).
    pub fn add_mode(&mut self, k: &[i64], amplitude: Complex64) {
        let n = self.points_per_axis;
        let l = self.box_length;
        let spacing = self.spacing();
        let mut idx = vec![0usize; self.dim];
        for flat in 0..self.values.len() {
            let mut phase = 0.0;
            for (a, &i) in idx.iter().enumerate() {
                phase += 2.0 * std::f64::consts::PI * k[a] as f64 / l * (i as f64 * spacing);
            }
            self.values[flat] += amplitude * Complex64::new(phase.cos(), phase.sin());
            bump_index(&mut idx, n);
            let _ = flat;
        }
    }

    /// Random real band-limited field: Hermitian-symmetric random spectrum
    /// supported on |k|_inf <= k_max.
    pub fn random_bandlimited(
        dim: usize,
        points_per_axis: usize,
        box_length: f64,
        k_max: i64,
        seed: u64,
    ) -> Result<Self> {
        let mut f = GridField::zeros(dim, points_per_axis, box_length)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut k = vec![-k_max; dim];
        loop {
            let amp = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            // Add the mode and its conjugate pair so the field stays real.
            f.add_mode(&k, amp);
            let neg: Vec<i64> = k.iter().map(|x| -x).collect();
            f.add_mode(&neg, amp.conj());
            let mut a = 0;
            loop {
                k[a] += 1;
                if k[a] <= k_max {
                    break;
                }
                k[a] = -k_max;
                a += 1;
                if a == dim {
                    return Ok(f);
                }
            }
        }
    }

    /// Smoothed indicator of the ball of radius `radius` centered at the box
    /// center, mollified over about two grid cells.
    pub fn smoothed_ball(
        dim: usize,
        points_per_axis: usize,
        box_length: f64,
        radius: f64,
    ) -> Result<Self> {
        let mut f = GridField::zeros(dim, points_per_axis, box_length)?;
        let width = 2.0 * f.spacing();
        let n = points_per_axis;
        let mut idx = vec![0usize; dim];
        for flat in 0..f.values.len() {
            let r2: f64 = idx.iter().map(|&i| f.coord(i).powi(2)).sum();
            let r = r2.sqrt();
            let v = 0.5 * (1.0 - ((r - radius) / width).tanh());
            f.values[flat] = Complex64::new(v, 0.0);
            bump_index(&mut idx, n);
        }
        Ok(f)
    }
}

pub(crate) fn bump_index(idx: &mut [usize], n: usize) {
    for a in (0..idx.len()).rev() {
        idx[a] += 1;
        if idx[a] < n {
            return;
        }
        idx[a] = 0;
    }
}

/// In-place n-dimensional DFT. Forward is unnormalized; inverse carries the
/// 1/N^n factor so forward-then-inverse is the identity.
pub fn fft_nd(field: &mut GridField, inverse: bool) {
    let n = field.points_per_axis;
    let dim = field.dim;
    let mut planner = FftPlanner::<f64>::new();
    let fft = if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    };
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    let total = field.values.len();
    for axis in 0..dim {
        let stride = n.pow((dim - 1 - axis) as u32);
        let lines = total / n;
        for li in 0..lines {
            // Decompose the line index into (outer, inner) blocks around the axis.
            let inner = li % stride;
            let outer = li / stride;
            let base = outer * stride * n + inner;
            for (t, x) in line.iter_mut().enumerate() {
                *x = field.values[base + t * stride];
            }
            fft.process(&mut line);
            for (t, x) in line.iter().enumerate() {
                field.values[base + t * stride] = *x;
            }
        }
    }
    if inverse {
        let scale = 1.0 / total as f64;
        for v in field.values.iter_mut() {
            *v *= scale;
        }
    }
}

/// Applies a per-frequency symbol: forward DFT, pointwise multiply at the
/// physical frequencies (2 pi / L) k, inverse DFT.
pub fn apply_multiplier<F>(f: &GridField, symbol: F) -> Result<GridField>
where
    F: Fn(&[f64]) -> Complex64,
{
    let mut g = f.clone();
    fft_nd(&mut g, false);
    let n = g.points_per_axis;
    let two_pi_over_l = 2.0 * std::f64::consts::PI / g.box_length;
    let mut idx = vec![0usize; g.dim];
    let mut xi = vec![0.0; g.dim];
    for flat in 0..g.values.len() {
        for (a, &i) in idx.iter().enumerate() {
            xi[a] = two_pi_over_l * g.freq_index(i) as f64;
        }
        let s = symbol(&xi);
        if !s.re.is_finite() || !s.im.is_finite() {
            return Err(DirmaxError::Numeric(format!(
                "symbol returned a non-finite value at frequency {xi:?}"
            )));
        }
        g.values[flat] *= s;
        bump_index(&mut idx, n);
    }
    fft_nd(&mut g, true);
    Ok(g)
}

// ---------------------------------------------------------------------------
// Bump profiles
// ---------------------------------------------------------------------------

fn mollifier(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

/// Smooth transition: 1 for x <= 0, 0 for x >= 1.
pub fn smooth_step_down(x: f64) -> f64 {
    let a = mollifier(1.0 - x);
    let b = mollifier(x);
    if a + b == 0.0 {
        if x <= 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        a / (a + b)
    }
}

/// Radial low-pass profile: 1 for r <= 1, 0 for r >= 2.
pub fn radial_lowpass(r: f64) -> f64 {
    smooth_step_down(r.abs() - 1.0)
}

/// Littlewood-Paley annulus profile supported on [1/2, 2] with
/// sum_k chi(2^{-k} r) = 1 for r != 0 and chi(1) = 1.
pub fn lp_profile(r: f64) -> f64 {
    radial_lowpass(r) - radial_lowpass(2.0 * r)
}

/// Shell plateau: 1 on (1+c)/2 <= |t| <= 1+c, supported on
/// [1/2 + c/4, 1 + 5c/4].
pub fn shell_plateau(t: f64, c: f64) -> f64 {
    let t = t.abs();
    let a0 = 0.5 + c / 4.0;
    let a1 = (1.0 + c) / 2.0;
    let b0 = 1.0 + c;
    let b1 = 1.0 + 1.25 * c;
    let rise = smooth_step_down((a1 - t) / (a1 - a0));
    let fall = smooth_step_down((t - b0) / (b1 - b0));
    rise * fall
}

/// Smooth averaging profile phi with compactly supported Fourier transform.
///
/// Built as phi = (2 pi / Z) p^2 where p is the inverse transform of a
/// smooth bump b supported on [-1/2, 1/2]; then phi-hat = (b*b)/Z is
/// supported on [-1, 1], phi > 0 everywhere, and the normalization makes
/// phi-hat(0) = integral of phi = 1.
#[derive(Debug, Clone)]
pub struct BumpPhi {
    /// phi-hat sampled on [0, 1] (even extension), linear interpolation.
    table: Arc<Vec<f64>>,
    /// min of phi over [-1, 1].
    pub lower_bound_const: f64,
    /// (b*b)(0) before normalization; kept for phi evaluation.
    norm_z: f64,
    /// Quadrature grid for b.
    b_grid: Arc<Vec<(f64, f64)>>,
}

const PHI_TABLE: usize = 4096;

impl BumpPhi {
    pub fn standard() -> Self {
        let m = 2048usize;
        // b on [-1/2, 1/2].
        let b = |x: f64| {
            let u = 2.0 * x;
            if u.abs() >= 1.0 {
                0.0
            } else {
                (-1.0 / (1.0 - u * u)).exp()
            }
        };
        let h = 1.0 / m as f64;
        let b_grid: Vec<(f64, f64)> = (0..=m)
            .map(|i| {
                let x = -0.5 + i as f64 * h;
                (x, b(x))
            })
            .collect();
        // Self-convolution on [0, 1] by trapezoid.
        let conv_at = |s: f64| -> f64 {
            let mut acc = 0.0;
            for w in b_grid.windows(2) {
                let f0 = w[0].1 * interp_b(&b_grid, s - w[0].0);
                let f1 = w[1].1 * interp_b(&b_grid, s - w[1].0);
                acc += 0.5 * (f0 + f1) * h;
            }
            acc
        };
        let norm_z = conv_at(0.0);
        let table: Vec<f64> = (0..=PHI_TABLE)
            .map(|i| conv_at(i as f64 / PHI_TABLE as f64) / norm_z)
            .collect();
        let mut phi = BumpPhi {
            table: Arc::new(table),
            lower_bound_const: 0.0,
            norm_z,
            b_grid: Arc::new(b_grid),
        };
        let mut min = f64::INFINITY;
        for i in 0..=800 {
            let t = -1.0 + 2.0 * i as f64 / 800.0;
            min = min.min(phi.eval(t));
        }
        phi.lower_bound_const = min;
        phi
    }

    /// phi-hat(xi), exactly zero outside [-1, 1]; phi-hat(0) = 1.
    pub fn hat(&self, xi: f64) -> f64 {
        let x = xi.abs();
        if x >= 1.0 {
            return 0.0;
        }
        let pos = x * PHI_TABLE as f64;
        let i = pos.floor() as usize;
        let frac = pos - i as f64;
        let t = &self.table;
        if i + 1 >= t.len() {
            t[t.len() - 1]
        } else {
            t[i] * (1.0 - frac) + t[i + 1] * frac
        }
    }

    /// phi(t) by direct quadrature of p(t)^2.
    pub fn eval(&self, t: f64) -> f64 {
        let mut p = 0.0;
        let grid = &self.b_grid;
        for w in grid.windows(2) {
            let f0 = w[0].1 * (w[0].0 * t).cos();
            let f1 = w[1].1 * (w[1].0 * t).cos();
            p += 0.5 * (f0 + f1) * (w[1].0 - w[0].0);
        }
        // p here is 2*pi*pfun(t); phi = 2*pi*pfun^2 / Z = p^2 / (2*pi*Z).
        p * p / (2.0 * std::f64::consts::PI * self.norm_z)
    }
}

fn interp_b(grid: &[(f64, f64)], x: f64) -> f64 {
    if x < -0.5 || x > 0.5 {
        return 0.0;
    }
    let h = grid[1].0 - grid[0].0;
    let pos = (x + 0.5) / h;
    let i = (pos.floor() as usize).min(grid.len() - 2);
    let frac = pos - i as f64;
    grid[i].1 * (1.0 - frac) + grid[i + 1].1 * frac
}

// ---------------------------------------------------------------------------
// Multiplier specs and cones
// ---------------------------------------------------------------------------

/// One-dimensional symbol with Mikhlin-bound metadata.
#[derive(Clone)]
pub struct MultiplierSpec {
    symbol: Arc<dyn Fn(f64) -> Complex64 + Send + Sync>,
    /// ||m||_inf.
    pub sup_norm: f64,
    /// Declared first-derivative Mikhlin constant: |xi| |m'(xi)| <= c1.
    pub c1: f64,
    pub mikhlin_order: usize,
    /// Value used when the symbol is evaluated at exactly 0 (midpoint for
    /// jump symbols, declared limit otherwise).
    pub zero_value: Complex64,
}

impl std::fmt::Debug for MultiplierSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MultiplierSpec")
            .field("sup_norm", &self.sup_norm)
            .field("c1", &self.c1)
            .finish()
    }
}

impl MultiplierSpec {
    pub fn new<F>(symbol: F, sup_norm: f64, c1: f64, zero_value: Complex64) -> Self
    where
        F: Fn(f64) -> Complex64 + Send + Sync + 'static,
    {
        MultiplierSpec {
            symbol: Arc::new(symbol),
            sup_norm,
            c1,
            mikhlin_order: 1,
            zero_value,
        }
    }

    /// m = 1.
    pub fn identity() -> Self {
        MultiplierSpec::new(|_| Complex64::new(1.0, 0.0), 1.0, 0.0, Complex64::new(1.0, 0.0))
    }

    /// m = -i sgn: the directional Hilbert transform symbol. The jump at 0
    /// takes the symmetric midpoint 0.
    pub fn hilbert() -> Self {
        MultiplierSpec::new(
            |xi| {
                if xi == 0.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(0.0, -xi.signum())
                }
            },
            1.0,
            0.0,
            Complex64::new(0.0, 0.0),
        )
    }

    /// m(xi) = |xi|^i, a unimodular Mikhlin symbol with genuine variation.
    pub fn unimodular_log() -> Self {
        MultiplierSpec::new(
            |xi| {
                if xi == 0.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    let a = xi.abs().ln();
                    Complex64::new(a.cos(), a.sin())
                }
            },
            1.0,
            1.0,
            Complex64::new(0.0, 0.0),
        )
    }

    pub fn eval(&self, xi: f64) -> Complex64 {
        if xi == 0.0 {
            self.zero_value
        } else {
            (self.symbol)(xi)
        }
    }

    /// Sampled sup-norm and finite-difference Mikhlin checks over a
    /// log-spaced grid.
    pub fn validate_sampled(&self) -> Result<()> {
        let tol = 0.15;
        for i in 0..200 {
            let xi = 10f64.powf(-4.0 + 8.0 * i as f64 / 199.0);
            for s in [-1.0, 1.0] {
                let x = s * xi;
                let m = self.eval(x);
                if m.norm() > self.sup_norm * (1.0 + 1e-9) {
                    return Err(DirmaxError::Numeric(format!(
                        "sup-norm bound violated at {x}"
                    )));
                }
                let h = xi * 1e-6;
                let dm = (self.eval(x + h) - self.eval(x - h)) / (2.0 * h);
                if xi * dm.norm() > self.c1 * (1.0 + tol) + 1e-9 {
                    return Err(DirmaxError::Numeric(format!(
                        "Mikhlin derivative bound violated at {x}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Conic frequency region around a center direction: the cone
/// |v . xi| <= (1+c) delta |xi| for l = 0, or the dyadic shell between
/// consecutive cones for l >= 1.
#[derive(Debug, Clone)]
pub struct ConeSpec {
    pub center: Direction,
    pub delta: f64,
    pub c: f64,
    pub l: u32,
}

impl ConeSpec {
    pub fn contains(&self, xi: &[f64]) -> bool {
        let r = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
        let a = self.center.dot_slice(xi).abs();
        let tau = (1.0 + self.c) * self.delta;
        if self.l == 0 {
            a <= tau * r
        } else {
            let lo = tau * 2f64.powi(self.l as i32 - 1) * r;
            let hi = tau * 2f64.powi(self.l as i32) * r;
            a > lo && a <= hi
        }
    }

    /// Smallest l with (1+c) 2^l delta >= 1; shells are empty beyond it.
    pub fn saturation_level(&self) -> u32 {
        let mut l = 0u32;
        while (1.0 + self.c) * 2f64.powi(l as i32) * self.delta < 1.0 {
            l += 1;
            if l > 64 {
                break;
            }
        }
        l
    }
}

// ---------------------------------------------------------------------------
// Operators
// ---------------------------------------------------------------------------

/// Averaging operator along `v` at scale `h`: Fourier symbol
/// phi-hat(h (v . xi)).
pub fn directional_average(f: &GridField, v: &Direction, h: f64, phi: &BumpPhi) -> Result<GridField> {
    if !(h > 0.0) {
        return Err(DirmaxError::InvalidParameter("h must be > 0".into()));
    }
    apply_multiplier(f, |xi| Complex64::new(phi.hat(h * v.dot_slice(xi)), 0.0))
}

/// Directional singular integral: symbol m(v . xi).
pub fn directional_singular(f: &GridField, v: &Direction, m: &MultiplierSpec) -> Result<GridField> {
    apply_multiplier(f, |xi| m.eval(v.dot_slice(xi)))
}

/// Sharp frequency restriction to a cone or dyadic shell.
pub fn cone_restrict(f: &GridField, cone: &ConeSpec) -> Result<GridField> {
    apply_multiplier(f, |xi| {
        if cone.contains(xi) {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// Littlewood-Paley piece: smooth radial cutoff to the annulus |xi| ~ 2^k.
pub fn littlewood_paley(f: &GridField, k: i32) -> Result<GridField> {
    apply_multiplier(f, |xi| {
        let r = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
        Complex64::new(lp_profile(r * 2f64.powi(-k)), 0.0)
    })
}

/// Range of k for which the annulus [2^{k-1}, 2^{k+1}] meets the grid
/// frequency lattice.
pub fn lp_range(f: &GridField) -> (i32, i32) {
    let two_pi_over_l = 2.0 * std::f64::consts::PI / f.box_length;
    let min_r = two_pi_over_l;
    let max_r = two_pi_over_l * (f.points_per_axis as f64 / 2.0) * (f.dim as f64).sqrt();
    let k_min = (min_r.log2().floor() as i32) - 1;
    let k_max = (max_r.log2().ceil() as i32) + 1;
    (k_min, k_max)
}

/// Max over sampled shell frequencies of |m(v . xi) - m(v_j . xi)|.
pub fn multiplier_difference_max(
    v: &Direction,
    v_j: &Direction,
    m: &MultiplierSpec,
    cone: &ConeSpec,
    radii: &[f64],
) -> Result<f64> {
    let tau = (1.0 + cone.c) * cone.delta;
    let (t_lo, t_hi) = if cone.l == 0 {
        (0.0, tau)
    } else {
        (
            tau * 2f64.powi(cone.l as i32 - 1),
            tau * 2f64.powi(cone.l as i32),
        )
    };
    if t_lo >= 1.0 || radii.is_empty() {
        return Err(DirmaxError::InvalidParameter(
            "shell does not intersect the unit sphere of directions".into(),
        ));
    }
    let t_hi = t_hi.min(1.0);
    let dim = v_j.dim();
    // Orthonormal tangent frame at v_j.
    let mut frame: Vec<Vec<f64>> = Vec::new();
    for kdx in 0..dim {
        let mut cand = Direction::axis(dim, kdx).coords().to_vec();
        let d0 = crate::sphere_nets::dot(&cand, v_j.coords());
        for (x, c) in cand.iter_mut().zip(v_j.coords()) {
            *x -= d0 * c;
        }
        for fv in &frame {
            let d = crate::sphere_nets::dot(&cand, fv);
            for (x, y) in cand.iter_mut().zip(fv) {
                *x -= d * y;
            }
        }
        let norm = cand.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            frame.push(cand.into_iter().map(|x| x / norm).collect());
        }
        if frame.len() == dim - 1 {
            break;
        }
    }
    let n_frac = 24;
    let n_ang = if dim == 2 { 1 } else { 16 };
    let mut max = 0.0f64;
    let mut sampled = false;
    for fi in 0..n_frac {
        let t = t_lo + (t_hi - t_lo) * (fi as f64 + 0.5) / n_frac as f64;
        if cone.l > 0 && t <= t_lo {
            continue;
        }
        let s = (1.0 - t * t).max(0.0).sqrt();
        for ai in 0..n_ang {
            // Tangent direction: rotate through the frame.
            let ang = 2.0 * std::f64::consts::PI * ai as f64 / n_ang as f64;
            let mut tang = vec![0.0; dim];
            for (q, fv) in frame.iter().enumerate() {
                let w = if frame.len() == 1 {
                    1.0
                } else if q == 0 {
                    ang.cos()
                } else if q == 1 {
                    ang.sin()
                } else {
                    0.0
                };
                for (x, y) in tang.iter_mut().zip(fv) {
                    *x += w * y;
                }
            }
            for sign in [-1.0, 1.0] {
                let u: Vec<f64> = v_j
                    .coords()
                    .iter()
                    .zip(&tang)
                    .map(|(c, e)| sign * t * c + s * e)
                    .collect();
                for &r in radii {
                    let xi: Vec<f64> = u.iter().map(|x| r * x).collect();
                    let a = m.eval(v.dot_slice(&xi));
                    let b = m.eval(v_j.dot_slice(&xi));
                    max = max.max((a - b).norm());
                    sampled = true;
                }
            }
        }
    }
    if !sampled {
        return Err(DirmaxError::Numeric("empty sample intersection with the shell".into()));
    }
    Ok(max)
}

/// Output of the kernel-decay probe.
#[derive(Debug, Clone, serde::Serialize)]
pub struct KernelReport {
    pub l: u32,
    pub k: i32,
    pub grid_n: usize,
    /// max over grid x of |K(x)| divided by the decay envelope.
    pub envelope_ratio: f64,
    pub max_abs_kernel: f64,
}

/// Computes the convolution kernel of the symbol
/// (m(v.xi) - m(e_n.xi)) psi((2^l delta)^{-1} (e_n.xi)/|xi|) chi(2^{-k} xi)
/// on the grid and reports its max against the product decay envelope.
pub fn kernel_decay_check(
    v: &Direction,
    m: &MultiplierSpec,
    cone: &ConeSpec,
    k: i32,
    grid_n: usize,
    box_length: f64,
) -> Result<KernelReport> {
    let dim = v.dim();
    let e_n = Direction::axis(dim, dim - 1);
    if cone.center.dist(&e_n) > 1e-12 {
        return Err(DirmaxError::InvalidParameter(
            "kernel probe requires the cap center in the axis frame e_n".into(),
        ));
    }
    if v.dist(&e_n) > cone.delta * (1.0 + 1e-9) {
        return Err(DirmaxError::InvalidParameter(
            "|v - e_n| must not exceed delta_j".into(),
        ));
    }
    let two_pi_over_l = 2.0 * std::f64::consts::PI / box_length;
    let annulus_max = 2f64.powi(k + 1);
    if annulus_max > two_pi_over_l * grid_n as f64 / 2.0 {
        return Err(DirmaxError::InvalidParameter(format!(
            "grid N={grid_n} too coarse to resolve the 2^{k} annulus"
        )));
    }
    let scale = 2f64.powi(cone.l as i32) * cone.delta;
    let mut spec = GridField::zeros(dim, grid_n, box_length)?;
    let n = grid_n;
    let mut idx = vec![0usize; dim];
    let mut xi = vec![0.0; dim];
    for flat in 0..spec.values.len() {
        for (a, &i) in idx.iter().enumerate() {
            xi[a] = two_pi_over_l * spec.freq_index(i) as f64;
        }
        let r = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
        let val = if r == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            let diff = m.eval(v.dot_slice(&xi)) - m.eval(xi[dim - 1]);
            let shell = shell_plateau(xi[dim - 1] / r / scale, cone.c);
            let ann = lp_profile(r * 2f64.powi(-k));
            diff * shell * ann
        };
        spec.values[flat] = val;
        bump_index(&mut idx, n);
    }
    // Continuum normalization: K(x) = L^{-n} sum_xi S(xi) e^{i x.xi}.
    fft_nd(&mut spec, true);
    let factor = (grid_n as f64 / box_length).powi(dim as i32);
    let two_k = 2f64.powi(k);
    let mut max_ratio = 0.0f64;
    let mut max_abs = 0.0f64;
    let mut idx = vec![0usize; dim];
    for flat in 0..spec.values.len() {
        let kv = spec.values[flat].norm() * factor;
        let mut env = 2f64.powi(-(cone.l as i32)) * two_k.powi(dim as i32) * scale;
        for (a, &i) in idx.iter().enumerate() {
            let x = spec.coord(i).abs();
            let w = if a == dim - 1 { two_k * scale } else { two_k };
            env /= (1.0 + w * x).powi(2);
        }
        max_ratio = max_ratio.max(kv / env);
        max_abs = max_abs.max(kv);
        bump_index(&mut idx, n);
    }
    Ok(KernelReport {
        l: cone.l,
        k,
        grid_n,
        envelope_ratio: max_ratio,
        max_abs_kernel: max_abs,
    })
}

// ---------------------------------------------------------------------------
// Field file I/O
// ---------------------------------------------------------------------------

/// Writes the binary field format: 8 ASCII header lines followed by raw
/// little-endian (re, im) f64 pairs.
pub fn write_field(f: &GridField, path: &Path) -> Result<()> {
    let mut payload = Vec::with_capacity(f.values.len() * 16);
    for v in &f.values {
        payload.extend_from_slice(&v.re.to_le_bytes());
        payload.extend_from_slice(&v.im.to_le_bytes());
    }
    let checksum = hex_digest(&payload);
    let header = format!(
        "dirmax-field\nversion 1\ndim {}\naxis {}\nlength {:.17e}\ncount {}\nchecksum {}\nend\n",
        f.dim,
        f.points_per_axis,
        f.box_length,
        f.values.len(),
        checksum
    );
    let mut out = std::fs::File::create(path)?;
    out.write_all(header.as_bytes())?;
    out.write_all(&payload)?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<GridField> {
    let mut file = std::fs::File::open(path)?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes)?;
    // Header is the first 8 newline-terminated lines.
    let mut pos = 0usize;
    let mut lines = Vec::new();
    for _ in 0..8 {
        let nl = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| DirmaxError::Parse("truncated field header".into()))?;
        lines.push(String::from_utf8_lossy(&bytes[pos..pos + nl]).to_string());
        pos += nl + 1;
    }
    if lines[0] != "dirmax-field" {
        return Err(DirmaxError::Parse("bad field magic".into()));
    }
    let get = |i: usize, key: &str| -> Result<String> {
        lines[i]
            .strip_prefix(key)
            .map(|s| s.trim().to_string())
            .ok_or_else(|| DirmaxError::Parse(format!("header line {i} should start with {key}")))
    };
    let dim: usize = get(2, "dim")?.parse().map_err(|_| DirmaxError::Parse("bad dim".into()))?;
    let axis: usize = get(3, "axis")?.parse().map_err(|_| DirmaxError::Parse("bad axis".into()))?;
    let length: f64 = get(4, "length")?.parse().map_err(|_| DirmaxError::Parse("bad length".into()))?;
    let count: usize = get(5, "count")?.parse().map_err(|_| DirmaxError::Parse("bad count".into()))?;
    let checksum = get(6, "checksum")?;
    let payload = &bytes[pos..];
    if payload.len() != count * 16 {
        return Err(DirmaxError::Parse("payload size mismatch".into()));
    }
    if hex_digest(payload) != checksum {
        return Err(DirmaxError::Parse("field checksum mismatch".into()));
    }
    let mut values = Vec::with_capacity(count);
    for chunk in payload.chunks_exact(16) {
        let re = f64::from_le_bytes(chunk[0..8].try_into().expect("8 bytes"));
        let im = f64::from_le_bytes(chunk[8..16].try_into().expect("8 bytes"));
        values.push(Complex64::new(re, im));
    }
    let mut f = GridField::zeros(dim, axis, length)?;
    if f.values.len() != values.len() {
        return Err(DirmaxError::Parse("count inconsistent with dim/axis".into()));
    }
    f.values = values;
    Ok(f)
}

fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let out = hasher.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_field() -> GridField {
        GridField::random_bandlimited(2, 32, 2.0 * std::f64::consts::PI, 4, 17).unwrap()
    }

    #[test]
    fn fft_round_trip_and_parseval() {
        let f = test_field();
        let mut g = f.clone();
        fft_nd(&mut g, false);
        // Parseval with the unnormalized forward transform.
        let total = f.values.len() as f64;
        let a: f64 = f.values.iter().map(|v| v.norm_sqr()).sum();
        let b: f64 = g.values.iter().map(|v| v.norm_sqr()).sum::<f64>() / total;
        assert!((a - b).abs() <= 1e-10 * a);
        fft_nd(&mut g, true);
        let err: f64 = f
            .values
            .iter()
            .zip(&g.values)
            .map(|(x, y)| (x - y).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(err <= 1e-10 * f.l2_norm());
    }

    #[test]
    fn multiplier_identity_zero_and_mode() {
        let f = test_field();
        let id = apply_multiplier(&f, |_| Complex64::new(1.0, 0.0)).unwrap();
        let diff: f64 = f
            .values
            .iter()
            .zip(&id.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(diff < 1e-10);
        let z = apply_multiplier(&f, |_| Complex64::new(0.0, 0.0)).unwrap();
        assert!(z.max_abs() < 1e-12);

        // Single mode is an eigenfunction of any multiplier.
        let mut mode = GridField::zeros(2, 32, 2.0 * std::f64::consts::PI, ).unwrap();
        mode.add_mode(&[3, -2], Complex64::new(1.0, 0.0));
        let sym = |xi: &[f64]| Complex64::new(xi[0] * 0.25, xi[1] * 0.5);
        let out = apply_multiplier(&mode, sym).unwrap();
        let expect = sym(&[3.0, -2.0]);
        for (o, i) in out.values.iter().zip(&mode.values) {
            assert!((o - i * expect).norm() < 1e-9);
        }
    }

    #[test]
    fn non_finite_symbol_rejected() {
        let f = test_field();
        assert!(apply_multiplier(&f, |xi| Complex64::new(1.0 / (xi[0].abs() - xi[0].abs()), 0.0)).is_err());
    }

    #[test]
    fn bump_phi_properties() {
        let phi = BumpPhi::standard();
        assert!((phi.hat(0.0) - 1.0).abs() < 1e-12);
        assert_eq!(phi.hat(1.0), 0.0);
        assert_eq!(phi.hat(-1.3), 0.0);
        assert!(phi.lower_bound_const > 0.0);
        for i in 0..=40 {
            let t = -1.0 + 2.0 * i as f64 / 40.0;
            assert!(phi.eval(t) >= phi.lower_bound_const * (1.0 - 1e-9));
        }
        // Integral of phi equals phi-hat(0) = 1, checked by quadrature.
        let mut acc = 0.0;
        let m = 4000;
        for i in 0..m {
            let t = -40.0 + 80.0 * (i as f64 + 0.5) / m as f64;
            acc += phi.eval(t) * 80.0 / m as f64;
        }
        assert!((acc - 1.0).abs() < 1e-3, "integral {acc}");
    }

    #[test]
    fn directional_average_basics() {
        let phi = BumpPhi::standard();
        let l = 2.0 * std::f64::consts::PI;
        let mut ones = GridField::zeros(2, 32, l).unwrap();
        for v in ones.values.iter_mut() {
            *v = Complex64::new(1.0, 0.0);
        }
        let v = Direction::axis(2, 0);
        let out = directional_average(&ones, &v, 0.5, &phi).unwrap();
        for x in &out.values {
            assert!((x.re - 1.0).abs() < 1e-10 && x.im.abs() < 1e-12);
        }
        // Mode orthogonal to v passes with weight phi-hat(0) = 1.
        let mut mode = GridField::zeros(2, 32, l).unwrap();
        mode.add_mode(&[0, 5], Complex64::new(1.0, 0.0));
        let out = directional_average(&mode, &v, 0.7, &phi).unwrap();
        for (o, i) in out.values.iter().zip(&mode.values) {
            assert!((o - i).norm() < 1e-10);
        }
        // Huge h kills every nonzero mode: only the mean survives.
        let f = test_field();
        // Pick a slope so no nonzero lattice mode is orthogonal to v.
        let big = directional_average(&f, &Direction::new(vec![1.0, 0.37]).unwrap(), 1e4, &phi).unwrap();
        let mean: Complex64 = f.values.iter().sum::<Complex64>() / f.values.len() as f64;
        for x in &big.values {
            assert!((x - mean).norm() < 1e-8);
        }
    }

    #[test]
    fn hilbert_symbol_algebra() {
        let f = test_field();
        let v = Direction::new(vec![0.6, 0.8]).unwrap();
        let m = MultiplierSpec::hilbert();
        let h = directional_singular(&f, &v, &m).unwrap();
        // Realness preservation for the conjugate-symmetric symbol.
        let max_im = h.values.iter().map(|x| x.im.abs()).fold(0.0, f64::max);
        assert!(max_im < 1e-10, "imaginary residue {max_im}");
        // Applying twice is -1 on modes with v.xi != 0.
        let hh = directional_singular(&h, &v, &m).unwrap();
        let proj = apply_multiplier(&f, |xi| {
            if v.dot_slice(xi) != 0.0 {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .unwrap();
        for (a, b) in hh.values.iter().zip(&proj.values) {
            assert!((a + b).norm() < 1e-9);
        }
        let id = directional_singular(&f, &v, &MultiplierSpec::identity()).unwrap();
        for (a, b) in id.values.iter().zip(&f.values) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn multiplier_spec_validation() {
        MultiplierSpec::hilbert().validate_sampled().unwrap();
        MultiplierSpec::unimodular_log().validate_sampled().unwrap();
        MultiplierSpec::identity().validate_sampled().unwrap();
    }

    #[test]
    fn cone_projection_algebra() {
        let f = test_field();
        let cone = ConeSpec {
            center: Direction::axis(2, 1),
            delta: 0.1,
            c: 1.0,
            l: 0,
        };
        let once = cone_restrict(&f, &cone).unwrap();
        let twice = cone_restrict(&once, &cone).unwrap();
        for (a, b) in once.values.iter().zip(&twice.values) {
            assert!((a - b).norm() < 1e-10);
        }
        // Disjoint shells compose to zero.
        let shell2 = ConeSpec { l: 2, ..cone.clone() };
        let z = cone_restrict(&once, &shell2).unwrap();
        assert!(z.max_abs() < 1e-10);
        // Mode on the hyperplane lies in the l=0 cone.
        assert!(cone.contains(&[1.0, 0.0]));
    }

    #[test]
    fn shell_partition_reconstructs() {
        let f = test_field();
        let cone = ConeSpec {
            center: Direction::axis(2, 1),
            delta: 0.1,
            c: 1.0,
            l: 0,
        };
        let l_sat = cone.saturation_level();
        let mut acc = GridField::zeros(2, 32, f.box_length).unwrap();
        for l in 0..=l_sat {
            let piece = cone_restrict(&f, &ConeSpec { l, ..cone.clone() }).unwrap();
            for (a, p) in acc.values.iter_mut().zip(&piece.values) {
                *a += p;
            }
        }
        let err: f64 = f
            .values
            .iter()
            .zip(&acc.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-10, "partition defect {err}");
    }

    #[test]
    fn littlewood_paley_reconstruction() {
        let f = test_field();
        let (k_min, k_max) = lp_range(&f);
        let mut acc = GridField::zeros(2, 32, f.box_length).unwrap();
        for k in k_min..=k_max {
            let piece = littlewood_paley(&f, k).unwrap();
            assert!(piece.l2_norm() <= f.l2_norm() * (1.0 + 1e-9));
            for (a, p) in acc.values.iter_mut().zip(&piece.values) {
                *a += p;
            }
        }
        let mean: Complex64 = f.values.iter().sum::<Complex64>() / f.values.len() as f64;
        let err: f64 = f
            .values
            .iter()
            .zip(&acc.values)
            .map(|(x, a)| (x - mean - a).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-8, "reconstruction defect {err}");
        // Mode with |xi| = 2^k passes with weight chi(1) = 1.
        let mut mode = GridField::zeros(2, 32, f.box_length).unwrap();
        mode.add_mode(&[4, 0], Complex64::new(1.0, 0.0));
        let out = littlewood_paley(&mode, 2).unwrap();
        for (o, i) in out.values.iter().zip(&mode.values) {
            assert!((o - i).norm() < 1e-9);
        }
    }

    #[test]
    fn plancherel_contraction_with_equality_mode() {
        let f = test_field();
        let phi = BumpPhi::standard();
        let v = Direction::new(vec![0.6, 0.8]).unwrap();
        let out = directional_average(&f, &v, 0.9, &phi).unwrap();
        assert!(out.l2_norm() <= f.l2_norm() * (1.0 + 1e-10));
        // Single mode achieves its symbol value exactly.
        let mut mode = GridField::zeros(2, 32, f.box_length).unwrap();
        mode.add_mode(&[1, 0], Complex64::new(1.0, 0.0));
        let s = phi.hat(0.9 * v.dot_slice(&[1.0, 0.0]));
        let got = directional_average(&mode, &v, 0.9, &phi).unwrap();
        assert!((got.l2_norm() - s.abs() * mode.l2_norm()).abs() < 1e-9);
    }

    #[test]
    fn sign_symbol_difference_vanishes_off_cone() {
        let v_j = Direction::axis(3, 2);
        let v = Direction::new(vec![0.03, 0.0, 1.0]).unwrap();
        let m = MultiplierSpec::hilbert();
        for l in 1..=4 {
            let cone = ConeSpec {
                center: v_j.clone(),
                delta: 0.05,
                c: 1.0,
                l,
            };
            let d = multiplier_difference_max(&v, &v_j, &m, &cone, &[1.0, 4.0, 16.0]).unwrap();
            assert_eq!(d, 0.0, "l={l}");
        }
        // l = 0 is bounded by 2 sup|m|.
        let cone0 = ConeSpec {
            center: v_j.clone(),
            delta: 0.05,
            c: 1.0,
            l: 0,
        };
        let d0 = multiplier_difference_max(&v, &v_j, &m, &cone0, &[1.0, 8.0]).unwrap();
        assert!(d0 <= 2.0 * m.sup_norm + 1e-12);
    }

    #[test]
    fn unimodular_difference_decays() {
        let v_j = Direction::axis(3, 2);
        let v = Direction::new(vec![0.007, 0.0, 1.0]).unwrap();
        let m = MultiplierSpec::unimodular_log();
        let radii: Vec<f64> = (0..10).map(|i| 2f64.powi(i - 3)).collect();
        let mut d1 = 0.0;
        for l in 1..=6u32 {
            let cone = ConeSpec {
                center: v_j.clone(),
                delta: 0.01,
                c: 1.0,
                l,
            };
            let d = multiplier_difference_max(&v, &v_j, &m, &cone, &radii).unwrap();
            if l == 1 {
                d1 = d;
                assert!(d1 > 0.0);
            } else {
                let bound = d1 * 2f64.powi(1 - l as i32) * 1.05;
                assert!(d <= bound, "l={l}: {d} > {bound}");
            }
        }
    }

    #[test]
    fn support_identity() {
        // A_{v,h}(I - phi_r(h delta D)) f equals the same after cone
        // restriction to any W containing the delta-cone.
        let f = test_field();
        let phi = BumpPhi::standard();
        let v = Direction::new(vec![0.0, 1.0]).unwrap();
        let delta = 0.2;
        let h = 0.8;
        let high = apply_multiplier(&f, |xi| {
            let r = (xi[0] * xi[0] + xi[1] * xi[1]).sqrt();
            Complex64::new(1.0 - radial_lowpass(h * delta * r), 0.0)
        })
        .unwrap();
        let lhs = directional_average(&high, &v, h, &phi).unwrap();
        let cone = ConeSpec {
            center: v.clone(),
            delta,
            c: 1.0,
            l: 0,
        };
        let restricted = cone_restrict(&high, &cone).unwrap();
        let rhs = directional_average(&restricted, &v, h, &phi).unwrap();
        let err: f64 = lhs
            .values
            .iter()
            .zip(&rhs.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-10, "support identity defect {err}");
    }

    #[test]
    fn kernel_sign_symbol_vanishes() {
        let cone = ConeSpec {
            center: Direction::axis(3, 2),
            delta: 0.02,
            c: 1.0,
            l: 2,
        };
        let v = Direction::new(vec![0.015, 0.0, 1.0]).unwrap();
        let rep = kernel_decay_check(&v, &MultiplierSpec::hilbert(), &cone, 3, 32, 2.0 * std::f64::consts::PI)
            .unwrap();
        assert!(rep.envelope_ratio < 1e-10, "ratio {}", rep.envelope_ratio);
    }

    #[test]
    fn field_io_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.field");
        let f = test_field();
        write_field(&f, &path).unwrap();
        let g = read_field(&path).unwrap();
        assert_eq!(f.values, g.values);
        assert_eq!(f.points_per_axis, g.points_per_axis);
    }
}
