//! Nonlinear maximal operators on periodic grids, closed-form ball oracles,
//! and the sharpness scan that fits operator-growth slopes against net
//! cardinality.

use num_complex::Complex64;

use crate::experiment::fit_loglog;
use crate::field_ops::{fft_nd, radial_lowpass, BumpPhi, GridField, MultiplierSpec};
use crate::sphere_nets::{build_maximal_net, Direction, DirectionSet, SphereHash};
use crate::{DirmaxError, Result};

/// Geometric grid of averaging scales h, ratio 2 by default.
#[derive(Debug, Clone)]
pub struct ScaleGrid {
    pub h_values: Vec<f64>,
}

impl ScaleGrid {
    pub fn from_ratio(h_min: f64, h_max: f64, ratio: f64) -> Result<Self> {
        if !(h_min > 0.0 && h_max >= h_min && ratio > 1.0) {
            return Err(DirmaxError::InvalidParameter(
                "scale grid needs 0 < h_min <= h_max and ratio > 1".into(),
            ));
        }
        let mut h_values = Vec::new();
        let mut h = h_min;
        while h <= h_max * (1.0 + 1e-12) {
            h_values.push(h);
            h *= ratio;
        }
        let grid = ScaleGrid { h_values };
        grid.validate()?;
        Ok(grid)
    }

    /// Dyadic scales spanning [L/N, L].
    pub fn dyadic(f: &GridField) -> Self {
        ScaleGrid::from_ratio(f.spacing(), f.box_length, 2.0).expect("valid dyadic grid")
    }

    /// Same span at ratio sqrt(2), for quantifying discretization error.
    pub fn refined(f: &GridField) -> Self {
        ScaleGrid::from_ratio(f.spacing(), f.box_length, std::f64::consts::SQRT_2)
            .expect("valid refined grid")
    }

    pub fn validate(&self) -> Result<()> {
        if self.h_values.is_empty() {
            return Err(DirmaxError::InvalidParameter("empty scale grid".into()));
        }
        if self.h_values.len() >= 2 {
            let r0 = self.h_values[1] / self.h_values[0];
            for w in self.h_values.windows(2) {
                if w[1] <= w[0] || ((w[1] / w[0]) / r0 - 1.0).abs() > 1e-12 {
                    return Err(DirmaxError::InvalidParameter(
                        "scale grid must be geometric and increasing".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Result of a pointwise-sup operator run.
#[derive(Debug, Clone)]
pub struct MaximalReport {
    pub operator_id: String,
    pub output: GridField,
    pub l2_ratio: f64,
    /// Per-point (direction index, scale index) achieving the sup; ties go
    /// to the smaller pair.
    pub argmax: Vec<(u32, u32)>,
}

fn sup_reduce(
    operator_id: &str,
    f: &GridField,
    fields: impl Iterator<Item = Result<((u32, u32), GridField)>>,
) -> Result<MaximalReport> {
    let mut output = GridField::zeros(f.dim, f.points_per_axis, f.box_length)?;
    let mut argmax = vec![(0u32, 0u32); f.len()];
    let mut any = false;
    for item in fields {
        let ((vi, hi), g) = item?;
        any = true;
        for (p, (out, val)) in output.values.iter_mut().zip(&g.values).enumerate() {
            let a = val.norm();
            if a > out.re {
                *out = Complex64::new(a, 0.0);
                argmax[p] = (vi, hi);
            }
        }
    }
    if !any {
        return Err(DirmaxError::InvalidParameter(
            "empty direction set for a maximal operator".into(),
        ));
    }
    let denom = f.l2_norm();
    let l2_ratio = if denom > 0.0 { output.l2_norm() / denom } else { 0.0 };
    Ok(MaximalReport {
        operator_id: operator_id.to_string(),
        output,
        l2_ratio,
        argmax,
    })
}

/// Precomputed forward spectrum, so per-direction symbols cost one inverse
/// transform each.
fn spectrum_of(f: &GridField) -> GridField {
    let mut s = f.clone();
    fft_nd(&mut s, false);
    s
}

fn apply_to_spectrum<F>(spec: &GridField, symbol: F) -> Result<GridField>
where
    F: Fn(&[f64]) -> Complex64,
{
    let mut g = spec.clone();
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
            return Err(DirmaxError::Numeric("non-finite symbol value".into()));
        }
        g.values[flat] *= s;
        crate::field_ops::bump_index(&mut idx, n);
    }
    fft_nd(&mut g, true);
    Ok(g)
}

/// Full maximal average: pointwise sup over directions and scales of
/// |A_{v,h} f|.
pub fn maximal_average(
    f: &GridField,
    omega: &DirectionSet,
    scales: &ScaleGrid,
    phi: &BumpPhi,
) -> Result<MaximalReport> {
    scales.validate()?;
    if omega.is_empty() {
        return Err(DirmaxError::InvalidParameter("empty direction set".into()));
    }
    let spec = spectrum_of(f);
    let iter = omega.points.iter().enumerate().flat_map(|(vi, v)| {
        let spec = &spec;
        scales.h_values.iter().enumerate().map(move |(hi, &h)| {
            let g = apply_to_spectrum(spec, |xi| {
                Complex64::new(phi.hat(h * v.dot_slice(xi)), 0.0)
            })?;
            Ok(((vi as u32, hi as u32), g))
        })
    });
    sup_reduce("maximal_average", f, iter)
}

/// Maximal singular integral: pointwise sup over directions of |T_v f|,
/// with the square-root cardinality guard enforced on every run.
pub fn maximal_singular(
    f: &GridField,
    omega: &DirectionSet,
    m: &MultiplierSpec,
) -> Result<MaximalReport> {
    if omega.is_empty() {
        return Err(DirmaxError::InvalidParameter("empty direction set".into()));
    }
    let spec = spectrum_of(f);
    let iter = omega.points.iter().enumerate().map(|(vi, v)| {
        let g = apply_to_spectrum(&spec, |xi| m.eval(v.dot_slice(xi)))?;
        Ok(((vi as u32, 0u32), g))
    });
    let report = sup_reduce("maximal_singular", f, iter)?;
    let guard = (omega.len() as f64).sqrt() * m.sup_norm;
    if report.l2_ratio > guard * (1.0 + 1e-9) {
        return Err(DirmaxError::Numeric(format!(
            "square-root cardinality bound violated: ratio {} > {}",
            report.l2_ratio, guard
        )));
    }
    Ok(report)
}

/// Single-scale maximal function: sup over directions of the sharp-window
/// average of |f| over the unit segment, by trapezoid along rays.
pub fn single_scale_maximal(f: &GridField, omega: &DirectionSet) -> Result<MaximalReport> {
    if omega.is_empty() {
        return Err(DirmaxError::InvalidParameter("empty direction set".into()));
    }
    if f.box_length < 1.0 {
        return Err(DirmaxError::InvalidParameter(
            "single-scale window needs box length >= 1".into(),
        ));
    }
    let abs: Vec<f64> = f.values.iter().map(|v| v.norm()).collect();
    let n = f.points_per_axis;
    let spacing = f.spacing();
    let steps = (1.0 / spacing).ceil() as usize + 1;
    let dt = 1.0 / steps as f64;
    let mut output = GridField::zeros(f.dim, f.points_per_axis, f.box_length)?;
    let mut argmax = vec![(0u32, 0u32); f.len()];
    let mut idx = vec![0usize; f.dim];
    let mut x = vec![0.0; f.dim];
    let mut pt = vec![0.0; f.dim];
    for flat in 0..f.len() {
        for (a, &i) in idx.iter().enumerate() {
            x[a] = i as f64 * spacing;
        }
        let mut best = 0.0f64;
        let mut best_v = 0u32;
        for (vi, v) in omega.points.iter().enumerate() {
            let mut acc = 0.0;
            for s in 0..=steps {
                let t = -0.5 + s as f64 * dt;
                for (a, (xa, va)) in x.iter().zip(v.coords()).enumerate() {
                    pt[a] = xa - va * t;
                }
                let w = if s == 0 || s == steps { 0.5 } else { 1.0 };
                acc += w * interp_periodic(&abs, f.dim, n, spacing, &pt);
            }
            let val = acc * dt;
            if val > best {
                best = val;
                best_v = vi as u32;
            }
        }
        output.values[flat] = Complex64::new(best, 0.0);
        argmax[flat] = (best_v, 0);
        crate::field_ops::bump_index(&mut idx, n);
    }
    let denom = f.l2_norm();
    let l2_ratio = if denom > 0.0 { output.l2_norm() / denom } else { 0.0 };
    Ok(MaximalReport {
        operator_id: "single_scale_maximal".into(),
        output,
        l2_ratio,
        argmax,
    })
}

/// Periodic multilinear interpolation of a real grid array at a physical
/// point (grid positions i * spacing mod L).
fn interp_periodic(vals: &[f64], dim: usize, n: usize, spacing: f64, point: &[f64]) -> f64 {
    let mut base = [0usize; 8];
    let mut frac = [0.0f64; 8];
    for a in 0..dim {
        let u = point[a] / spacing;
        let fl = u.floor();
        base[a] = (fl.rem_euclid(n as f64)) as usize % n;
        frac[a] = u - fl;
    }
    let mut strides = [0usize; 8];
    let mut s = 1usize;
    for a in (0..dim).rev() {
        strides[a] = s;
        s *= n;
    }
    let mut acc = 0.0;
    for corner in 0..(1usize << dim) {
        let mut w = 1.0;
        let mut off = 0usize;
        for a in 0..dim {
            if corner >> a & 1 == 1 {
                w *= frac[a];
                off += ((base[a] + 1) % n) * strides[a];
            } else {
                w *= 1.0 - frac[a];
                off += base[a] * strides[a];
            }
        }
        acc += w * vals[off];
    }
    acc
}

// ---------------------------------------------------------------------------
// Box averages: Nikodym, Hardy-Littlewood, strong maximal
// ---------------------------------------------------------------------------

/// Centered periodic moving mean with window (2*half + 1) cells along one
/// axis, in place on a real array.
fn axis_moving_mean(vals: &mut Vec<f64>, dim: usize, n: usize, axis: usize, half: usize) {
    let half = half.min(n / 2);
    if half == 0 {
        return;
    }
    let stride = n.pow((dim - 1 - axis) as u32);
    let lines = vals.len() / n;
    let window = 2 * half + 1;
    let mut line = vec![0.0f64; n];
    let mut out = vec![0.0f64; n];
    for li in 0..lines {
        let inner = li % stride;
        let outer = li / stride;
        let base = outer * stride * n + inner;
        for (t, x) in line.iter_mut().enumerate() {
            *x = vals[base + t * stride];
        }
        let mut acc: f64 = (0..window).map(|t| line[(t + n - half) % n]).sum();
        for t in 0..n {
            out[t] = acc / window as f64;
            let leave = (t + n - half) % n;
            let enter = (t + half + 1) % n;
            acc += line[enter] - line[leave];
        }
        for (t, &x) in out.iter().enumerate() {
            vals[base + t * stride] = x;
        }
    }
}

fn box_mean_field(abs: &[f64], f: &GridField, half_cells: &[usize]) -> Vec<f64> {
    let mut vals = abs.to_vec();
    for (axis, &half) in half_cells.iter().enumerate() {
        axis_moving_mean(&mut vals, f.dim, f.points_per_axis, axis, half);
    }
    vals
}

fn real_field_from(f: &GridField, vals: Vec<f64>) -> GridField {
    let mut out = f.clone();
    for (o, v) in out.values.iter_mut().zip(vals) {
        *o = Complex64::new(v, 0.0);
    }
    out
}

/// Nikodym maximal function in the axis frame: sup over the scale grid of
/// means over boxes with extent h along the last axis and h * delta along
/// the others. Only v = e_n is representable on the lattice.
pub fn nikodym_maximal(
    f: &GridField,
    v: &Direction,
    delta: f64,
    scales: &ScaleGrid,
) -> Result<GridField> {
    scales.validate()?;
    let e_n = Direction::axis(f.dim, f.dim - 1);
    if v.dist(&e_n) > 0.01 {
        return Err(DirmaxError::InvalidParameter(
            "Nikodym direction must lie within 1/100 of the last axis".into(),
        ));
    }
    if v.dist(&e_n) > 1e-9 {
        return Err(DirmaxError::InvalidParameter(
            "off-axis Nikodym rectangles are not representable on the lattice".into(),
        ));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(DirmaxError::InvalidParameter("delta must lie in (0, 1]".into()));
    }
    let abs: Vec<f64> = f.values.iter().map(|v| v.norm()).collect();
    let spacing = f.spacing();
    let mut sup = vec![0.0f64; f.len()];
    for &h in &scales.h_values {
        let mut half = vec![0usize; f.dim];
        for a in 0..f.dim - 1 {
            half[a] = (h * delta / (2.0 * spacing)).round() as usize;
        }
        half[f.dim - 1] = ((h / (2.0 * spacing)).round() as usize).max(1);
        let mean = box_mean_field(&abs, f, &half);
        for (s, m) in sup.iter_mut().zip(mean) {
            *s = s.max(m);
        }
    }
    Ok(real_field_from(f, sup))
}

/// Hardy-Littlewood maximal function over dyadic boxes spanning exactly the
/// given axes; all axes gives the cube maximal function.
pub fn hardy_littlewood(f: &GridField, axes: &[usize]) -> Result<GridField> {
    if axes.is_empty() || axes.iter().any(|&a| a >= f.dim) {
        return Err(DirmaxError::InvalidParameter(
            "axis subset must be nonempty and in range".into(),
        ));
    }
    let abs: Vec<f64> = f.values.iter().map(|v| v.norm()).collect();
    let mut sup = abs.clone();
    let mut half = 1usize;
    while half <= f.points_per_axis / 2 {
        let mut hc = vec![0usize; f.dim];
        for &a in axes {
            hc[a] = half;
        }
        let mean = box_mean_field(&abs, f, &hc);
        for (s, m) in sup.iter_mut().zip(mean) {
            *s = s.max(m);
        }
        half *= 2;
    }
    Ok(real_field_from(f, sup))
}

/// Strong maximal function: iterated one-axis maximal functions.
pub fn strong_maximal(f: &GridField) -> Result<GridField> {
    let mut cur = f.clone();
    for a in 0..f.dim {
        cur = hardy_littlewood(&cur, &[a])?;
    }
    Ok(cur)
}

/// Sup over scales of |A_{v,h} applied after the radial cutoff at h*delta|:
/// low-pass when `complement` is false, the high-frequency remainder when
/// true.
pub fn maximal_average_lowpass(
    f: &GridField,
    v: &Direction,
    delta: f64,
    scales: &ScaleGrid,
    phi: &BumpPhi,
    complement: bool,
) -> Result<GridField> {
    scales.validate()?;
    let spec = spectrum_of(f);
    let mut sup = vec![0.0f64; f.len()];
    for &h in &scales.h_values {
        let g = apply_to_spectrum(&spec, |xi| {
            let r = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
            let cut = radial_lowpass(h * delta * r);
            let cut = if complement { 1.0 - cut } else { cut };
            Complex64::new(phi.hat(h * v.dot_slice(xi)) * cut, 0.0)
        })?;
        for (s, val) in sup.iter_mut().zip(&g.values) {
            *s = s.max(val.norm());
        }
    }
    Ok(real_field_from(f, sup))
}

/// Max over grid points of num/den, skipping points where num is below
/// `floor`.
pub fn pointwise_max_ratio(num: &GridField, den: &GridField, floor: f64) -> f64 {
    let mut max = 0.0f64;
    for (a, b) in num.values.iter().zip(&den.values) {
        let a = a.norm();
        if a <= floor {
            continue;
        }
        let b = b.norm();
        max = max.max(a / b.max(1e-300));
    }
    max
}

// ---------------------------------------------------------------------------
// Ball oracles
// ---------------------------------------------------------------------------

/// Closed-form M_v applied to the unit-ball indicator at a point x, reduced
/// to (|x|, cos angle) form.
fn oracle_average_cm(rho: f64, m: f64) -> f64 {
    if rho < 1.0 {
        return 1.0;
    }
    let c = rho * m.abs();
    let disc = c * c - rho * rho + 1.0;
    if disc <= 0.0 {
        return 0.0;
    }
    let root = disc.sqrt();
    let t_plus = c + root;
    if t_plus <= 0.0 {
        return 0.0;
    }
    // Optimal window ends at the far chord endpoint.
    root / t_plus
}

/// Closed-form directional Hilbert transform of the unit-ball indicator,
/// magnitude only (sign flips with v -> -v).
fn oracle_hilbert_cm(rho: f64, m: f64) -> f64 {
    let c = rho * m.abs();
    let disc = c * c - rho * rho + 1.0;
    if disc <= 0.0 {
        return 0.0;
    }
    let root = disc.sqrt();
    let t_plus = c + root;
    let t_minus = c - root;
    if rho < 1.0 {
        // 0 sits inside the chord: principal value of the two signed parts.
        (t_plus / t_minus.abs()).ln().abs() / std::f64::consts::PI
    } else {
        if t_minus <= 0.0 {
            return 0.0;
        }
        (t_plus / t_minus).ln() / std::f64::consts::PI
    }
}

pub fn ball_oracle_average(x: &[f64], v: &Direction) -> f64 {
    let rho = x.iter().map(|a| a * a).sum::<f64>().sqrt();
    if rho == 0.0 {
        return 1.0;
    }
    oracle_average_cm(rho, v.dot_slice(x) / rho)
}

pub fn ball_oracle_hilbert(x: &[f64], v: &Direction) -> f64 {
    let rho = x.iter().map(|a| a * a).sum::<f64>().sqrt();
    if rho == 0.0 {
        return 0.0;
    }
    oracle_hilbert_cm(rho, v.dot_slice(x) / rho)
}

// ---------------------------------------------------------------------------
// Sharpness scan
// ---------------------------------------------------------------------------

/// Quadrature controls for the sharpness scan.
#[derive(Debug, Clone)]
pub struct QuadratureSpec {
    pub radial_nodes: usize,
    /// Angular sample spacing as a fraction of delta.
    pub angular_factor: f64,
    pub inner_radius: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            radial_nodes: 96,
            angular_factor: 0.25,
            inner_radius: 1.02,
        }
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct SharpnessRow {
    pub delta: f64,
    pub seed: u64,
    pub count: usize,
    pub ratio_average: f64,
    pub ratio_hilbert: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct SharpnessReport {
    pub dim: usize,
    pub rows: Vec<SharpnessRow>,
    pub slope_average: f64,
    pub slope_hilbert: f64,
}

fn unit_ball_volume(dim: usize) -> f64 {
    let mut v = if dim % 2 == 0 { 1.0 } else { 2.0 };
    let mut n = if dim % 2 == 0 { 2 } else { 3 };
    while n <= dim {
        v *= 2.0 * std::f64::consts::PI / n as f64;
        n += 2;
    }
    v
}

/// Angular quadrature nodes (direction, surface weight) covering the whole
/// sphere at chord spacing about `res`.
fn angular_nodes(dim: usize, res: f64) -> Result<Vec<(Vec<f64>, f64)>> {
    if dim == 3 {
        let count = ((16.0 / (res * res)).ceil() as usize).max(256);
        let golden = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
        let w = 4.0 * std::f64::consts::PI / count as f64;
        Ok((0..count)
            .map(|i| {
                let z = 1.0 - (2.0 * i as f64 + 1.0) / count as f64;
                let r = (1.0 - z * z).max(0.0).sqrt();
                let a = golden * i as f64;
                (vec![r * a.cos(), r * a.sin(), z], w)
            })
            .collect())
    } else {
        // Cube-face grids projected to the sphere; per-node weight is the
        // face cell area over |p|^dim (the radial-projection Jacobian).
        let h = (1.2 * res).min(0.5);
        let per_axis = (2.0 / h).ceil() as usize;
        let hh = 2.0 / per_axis as f64;
        let face_dim = dim - 1;
        let total = 2 * dim * per_axis.pow(face_dim as u32);
        if total > 40_000_000 {
            return Err(DirmaxError::InvalidParameter(
                "angular resolution exceeds the memory guard".into(),
            ));
        }
        let mut nodes = Vec::with_capacity(total);
        let cell = hh.powi(face_dim as i32);
        for axis in 0..dim {
            for side in [-1.0f64, 1.0] {
                let mut idx = vec![0usize; face_dim];
                loop {
                    let mut p = vec![0.0; dim];
                    p[axis] = side;
                    let mut a = 0;
                    for d in 0..dim {
                        if d != axis {
                            p[d] = -1.0 + (idx[a] as f64 + 0.5) * hh;
                            a += 1;
                        }
                    }
                    let norm = p.iter().map(|x| x * x).sum::<f64>().sqrt();
                    let w = cell / norm.powi(dim as i32);
                    nodes.push((p.iter().map(|x| x / norm).collect(), w));
                    let mut carry = face_dim;
                    for d in (0..face_dim).rev() {
                        idx[d] += 1;
                        if idx[d] < per_axis {
                            carry = d;
                            break;
                        }
                        idx[d] = 0;
                    }
                    if carry == face_dim {
                        break;
                    }
                }
            }
        }
        Ok(nodes)
    }
}

/// Scans explicit direction sets: L2 norms of the sup-oracle over the ball
/// |x| < 1/delta (interior plus the growth shell), divided by the unit
/// ball's L2 norm.
pub fn sharpness_scan_sets(
    dim: usize,
    sets: &[(f64, u64, DirectionSet)],
    quad: &QuadratureSpec,
) -> Result<SharpnessReport> {
    if dim < 3 {
        return Err(DirmaxError::InvalidParameter(
            "sharpness scan needs dimension >= 3".into(),
        ));
    }
    if sets.is_empty() {
        return Err(DirmaxError::InvalidParameter("no direction sets supplied".into()));
    }
    let ball_norm = unit_ball_volume(dim).sqrt();
    let mut rows = Vec::new();
    for (delta, seed, omega) in sets {
        if omega.dim != dim {
            return Err(DirmaxError::InvalidParameter("dimension mismatch".into()));
        }
        let nodes = angular_nodes(dim, quad.angular_factor * delta)?;
        // Spatial hash over the net for nearest-direction queries.
        let mut hash = SphereHash::new(dim, (omega.separation / 2.0).max(1e-3));
        for p in &omega.points {
            hash.insert(p.clone());
        }
        // Radial trapezoid on a log grid over (inner, 1/delta).
        let r_lo = quad.inner_radius;
        let r_hi = 1.0 / delta;
        if r_hi <= r_lo {
            return Err(DirmaxError::InvalidParameter(
                "shell is empty: 1/delta must exceed the inner radius".into(),
            ));
        }
        let nr = quad.radial_nodes.max(8);
        let radii: Vec<f64> = (0..=nr)
            .map(|i| r_lo * (r_hi / r_lo).powf(i as f64 / nr as f64))
            .collect();
        // Linear grid covering the ball interior up to the shell's inner
        // radius, so the full-space norm is captured: the oracles are 1
        // (average) and log-bounded (Hilbert) inside the ball, and beyond
        // 1/delta their contribution is lower order.
        let ni = (nr / 2).max(24);
        let inner: Vec<f64> = (0..=ni).map(|i| r_lo * i as f64 / ni as f64).collect();
        let mut q2_avg = 0.0;
        let mut q2_hil = 0.0;
        for (u, w) in &nodes {
            let u_dir = Direction::new(u.clone())?;
            let neg_dir = Direction::new(u.iter().map(|x| -x).collect())?;
            let d1 = hash.nearest(&u_dir).map(|(_, d)| d).unwrap_or(2.0);
            let d2 = hash.nearest(&neg_dir).map(|(_, d)| d).unwrap_or(2.0);
            let d = d1.min(d2);
            // Chord distance to cosine of the angle to the best direction.
            let m = (1.0 - d * d / 2.0).clamp(-1.0, 1.0);
            let mut acc_a = 0.0;
            let mut acc_h = 0.0;
            for win in inner.windows(2).chain(radii.windows(2)) {
                let dr = win[1] - win[0];
                for (r, wt) in [(win[0], 0.5), (win[1], 0.5)] {
                    let jac = r.powi(dim as i32 - 1) * dr * wt;
                    let fa = oracle_average_cm(r, m);
                    let fh = oracle_hilbert_cm(r, m);
                    if fa.is_finite() {
                        acc_a += jac * fa * fa;
                    }
                    if fh.is_finite() {
                        acc_h += jac * fh * fh;
                    }
                }
            }
            q2_avg += w * acc_a;
            q2_hil += w * acc_h;
        }
        rows.push(SharpnessRow {
            delta: *delta,
            seed: *seed,
            count: omega.len(),
            ratio_average: q2_avg.sqrt() / ball_norm,
            ratio_hilbert: q2_hil.sqrt() / ball_norm,
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.count as f64).collect();
    let slope = |pick: &dyn Fn(&SharpnessRow) -> f64| -> Result<f64> {
        let ys: Vec<f64> = rows.iter().map(|r| pick(r)).collect();
        if rows.len() >= 3 {
            // Degenerate abscissae (every set has the same cardinality) carry
            // no slope information; report NaN rather than failing the scan.
            Ok(fit_loglog(&xs, &ys, 0.0, f64::INFINITY)
                .map(|r| r.slope)
                .unwrap_or(f64::NAN))
        } else {
            Ok(f64::NAN)
        }
    };
    let slope_average = slope(&|r| r.ratio_average)?;
    let slope_hilbert = slope(&|r| r.ratio_hilbert)?;
    Ok(SharpnessReport {
        dim,
        rows,
        slope_average,
        slope_hilbert,
    })
}

/// Builds equidistributed nets per (delta, seed) and scans them.
pub fn sharpness_scan(
    dim: usize,
    deltas: &[f64],
    seeds: &[u64],
    quad: &QuadratureSpec,
) -> Result<SharpnessReport> {
    let mut sets = Vec::new();
    for &delta in deltas {
        for &seed in seeds {
            let net = build_maximal_net(dim, delta, seed)?;
            sets.push((delta, seed, net));
        }
    }
    sharpness_scan_sets(dim, &sets, quad)
}
