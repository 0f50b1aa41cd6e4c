//! Hyperplane-proximity counts over cap covers.
//!
//! The central quantity is the sup over unit normals w of the number of cap
//! centers v_j with |v_j . w| below a dyadically growing threshold. The sup
//! is bracketed: a sampled maximum (with local refinement) gives a realized
//! lower bound, and a slackened-threshold maximum gives a rigorous upper
//! bound because |v . w| is 1-Lipschitz in w and the deterministic sample
//! covers the sphere at the stated resolution.

use serde::{Deserialize, Serialize};

use crate::sphere_nets::{dot, Direction, DirectionSet};
use crate::{DirmaxError, Result};

/// A cover of a direction set by caps with chosen representatives.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CapCover {
    /// Representative v_j of each cap; elements of the covered set.
    pub centers: Vec<Direction>,
    /// Cap diameter delta_j per cap.
    pub diameters: Vec<f64>,
    /// Cap index assigned to each covered point.
    pub membership: Vec<usize>,
    /// Slack constant c in (0, 1].
    pub slack_c: f64,
}

impl CapCover {
    pub fn n_caps(&self) -> usize {
        self.centers.len()
    }

    /// Threshold (1+c) 2^l delta_j.
    pub fn threshold(&self, j: usize, l: u32) -> f64 {
        (1.0 + self.slack_c) * 2f64.powi(l as i32) * self.diameters[j]
    }

    /// Number of points assigned to each cap.
    pub fn cap_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.centers.len()];
        for &j in &self.membership {
            sizes[j] += 1;
        }
        sizes
    }

    pub fn validate(&self, covered: &DirectionSet) -> Result<()> {
        if self.centers.len() != self.diameters.len() {
            return Err(DirmaxError::Geometry("centers/diameters length mismatch".into()));
        }
        if self.membership.len() != covered.len() {
            return Err(DirmaxError::Geometry("membership/covered length mismatch".into()));
        }
        if !(self.slack_c > 0.0 && self.slack_c <= 1.0) {
            return Err(DirmaxError::InvalidParameter("slack c must lie in (0, 1]".into()));
        }
        for (i, p) in covered.points.iter().enumerate() {
            let j = self.membership[i];
            if j >= self.centers.len() {
                return Err(DirmaxError::Geometry("membership index out of range".into()));
            }
            if p.dist(&self.centers[j]) > self.diameters[j] + 1e-9 {
                return Err(DirmaxError::Geometry(format!(
                    "point {i} outside cap {j}"
                )));
            }
        }
        Ok(())
    }
}

/// Bracket on E_l with a realized lower bound and a rigorous sampled upper
/// bound.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ElBracket {
    pub l: u32,
    pub lower: usize,
    pub upper: usize,
    pub witness_w: Direction,
    pub sample_resolution: f64,
}

/// Distance from a unit vector to the hyperplane through the origin normal
/// to `w`: |v . w|.
pub fn dist_to_hyperplane(v: &Direction, w: &Direction) -> f64 {
    v.dot(w).abs()
}

/// Exact count of caps j with |v_j . w| <= (1+c) 2^l delta_j.
pub fn count_at(w: &Direction, cover: &CapCover, l: u32) -> usize {
    cover
        .centers
        .iter()
        .enumerate()
        .filter(|(j, v)| v.dot(w).abs() <= cover.threshold(*j, l))
        .count()
}

/// Greedy cap cover of `omega` at the given scale: centers are a maximal
/// scale-separated subset (in point order), every point is assigned to the
/// nearest center, ties broken by lowest center index.
pub fn build_cap_cover(omega: &DirectionSet, scale: f64, c: f64) -> Result<CapCover> {
    if scale < omega.separation {
        return Err(DirmaxError::InvalidParameter(format!(
            "cover scale {scale} below set separation {}",
            omega.separation
        )));
    }
    if omega.is_empty() {
        return Err(DirmaxError::Geometry("cannot cover an empty set".into()));
    }
    let mut hash = crate::sphere_nets::SphereHash::new(omega.dim, scale.min(2.0));
    let mut centers: Vec<usize> = Vec::new();
    for (i, p) in omega.points.iter().enumerate() {
        if !hash.has_closer(p, scale * (1.0 - 1e-12)) {
            hash.insert(p.clone());
            centers.push(i);
        }
    }
    let mut membership = vec![usize::MAX; omega.len()];
    for (i, p) in omega.points.iter().enumerate() {
        let (jj, d) = hash.nearest(p).expect("nonempty centers");
        if d > scale * (1.0 + 1e-9) {
            return Err(DirmaxError::Geometry(format!(
                "point {i} has no center within the cover scale; greedy maximality broken"
            )));
        }
        membership[i] = jj;
    }
    let cover = CapCover {
        centers: centers.iter().map(|&i| omega.points[i].clone()).collect(),
        diameters: vec![scale; centers.len()],
        membership,
        slack_c: c,
    };
    cover.validate(omega)?;
    Ok(cover)
}

/// Default bracket resolution: an order below the smallest cap diameter.
pub fn default_resolution(cover: &CapCover) -> f64 {
    cover
        .diameters
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
        / 16.0
}

/// Deterministic sphere sample with covering radius <= `rho`: grids on the
/// faces of the unit cube projected to the sphere. Projection from the cube
/// surface is non-expanding, so the face-grid diagonal bounds the covering
/// radius.
pub(crate) fn sphere_sample(dim: usize, rho: f64) -> Result<Vec<Direction>> {
    let h = 1.9 * rho / ((dim - 1) as f64).sqrt();
    let per_axis = (2.0 / h).ceil() as usize + 1;
    let total = 2 * dim * per_axis.pow((dim - 1) as u32);
    if total > 80_000_000 {
        return Err(DirmaxError::InvalidParameter(format!(
            "sample resolution {rho} in dimension {dim} exceeds the memory guard"
        )));
    }
    let mut out = Vec::with_capacity(total);
    for axis in 0..dim {
        for sign in [-1.0, 1.0] {
            let mut idx = vec![0usize; dim - 1];
            loop {
                let mut coords = vec![0.0; dim];
                coords[axis] = sign;
                let mut k = 0;
                for a in 0..dim {
                    if a != axis {
                        coords[a] = -1.0 + 2.0 * idx[k] as f64 / (per_axis - 1) as f64;
                        k += 1;
                    }
                }
                out.push(Direction::new(coords)?);
                let mut carry = 0;
                loop {
                    idx[carry] += 1;
                    if idx[carry] < per_axis {
                        break;
                    }
                    idx[carry] = 0;
                    carry += 1;
                    if carry == dim - 1 {
                        break;
                    }
                }
                if carry == dim - 1 {
                    break;
                }
            }
        }
    }
    Ok(out)
}

/// Brackets E_l for every l in 0..=l_max in one pass over a rho-dense
/// w-sample.
pub fn bracket_all(cover: &CapCover, l_max: u32, rho: f64) -> Result<Vec<ElBracket>> {
    if !(rho > 0.0) {
        return Err(DirmaxError::InvalidParameter("resolution must be > 0".into()));
    }
    let dim = cover.centers[0].dim();
    if dim == 2 {
        return bracket_circle_exact(cover, l_max, rho);
    }
    if dim == 3 {
        return bracket_cube_bands(cover, l_max, rho);
    }
    bracket_sample_major(cover, l_max, rho)
}

/// Cap-major counting over the same cube-face grid as `sphere_sample`, for
/// the 2-sphere. Only samples inside the band |v_j . w| <= top threshold can
/// count a cap below its saturation level, and on each grid row that band is
/// a contiguous index interval; saturated levels are credited once globally.
/// Equivalent to the sample-major pass but skips the empty bulk.
fn bracket_cube_bands(cover: &CapCover, l_max: u32, rho: f64) -> Result<Vec<ElBracket>> {
    let n_l = (l_max + 1) as usize;
    let h = 1.9 * rho / 2f64.sqrt();
    let p = (2.0 / h).ceil() as usize + 1;
    let total = 6 * p * p;
    if total > 80_000_000 || total.saturating_mul(n_l) > 600_000_000 {
        return Err(DirmaxError::InvalidParameter(format!(
            "sample resolution {rho} with {n_l} levels exceeds the memory guard"
        )));
    }
    let us: Vec<f64> = (0..p).map(|i| -1.0 + 2.0 * i as f64 / (p - 1) as f64).collect();
    let mut inv_norm = vec![0.0f64; p * p];
    for i1 in 0..p {
        for i2 in 0..p {
            inv_norm[i1 * p + i2] = 1.0 / (1.0 + us[i1] * us[i1] + us[i2] * us[i2]).sqrt();
        }
    }

    let mut cnt_lo = vec![0i32; total * n_l];
    let mut cnt_up = vec![0i32; total * n_l];
    // Caps whose threshold at level l already exceeds max |v . w| = 1 count
    // at every sample; they are tallied once here instead of per sample.
    let mut full = vec![0i64; n_l];

    for j in 0..cover.n_caps() {
        let base = (1.0 + cover.slack_c) * cover.diameters[j];
        let v = cover.centers[j].coords();
        let mut l_full = 0usize;
        while l_full < n_l && 2f64.powi(l_full as i32) * base < 1.0 {
            l_full += 1;
        }
        let has_full = l_full < n_l;
        if l_full == 0 {
            full[0] += 1;
            continue;
        }
        // Outside this band a sample lands exactly at l_full (or overflows),
        // which the global tally already covers.
        let t = 2f64.powi(l_full as i32 - 1) * base + rho;
        for face in 0..6usize {
            let axis = face / 2;
            let sign = if face % 2 == 0 { -1.0 } else { 1.0 };
            let b1 = if axis == 0 { 1 } else { 0 };
            let b2 = if axis == 2 { 1 } else { 2 };
            let va = v[axis] * sign;
            let vb = v[b1];
            let vc = v[b2];
            for i1 in 0..p {
                let aa = va + vb * us[i1];
                // |x| <= sqrt(2 + u1^2) on the row, so this interval is a
                // superset of the band; exact levels are taken per sample.
                // Small inflation keeps boundary samples inside despite
                // rounding; the exact level test below decides anyway.
                let t_row = t * (2.0 + us[i1] * us[i1]).sqrt() + 1e-9;
                let (lo_i, hi_i) = if vc.abs() < 1e-12 {
                    if aa.abs() <= t_row + vc.abs() {
                        (0, p - 1)
                    } else {
                        continue;
                    }
                } else {
                    let (mut u_lo, mut u_hi) = ((-t_row - aa) / vc, (t_row - aa) / vc);
                    if u_lo > u_hi {
                        std::mem::swap(&mut u_lo, &mut u_hi);
                    }
                    if u_hi < -1.0 || u_lo > 1.0 {
                        continue;
                    }
                    let lo = ((u_lo.max(-1.0) + 1.0) * 0.5 * (p - 1) as f64 - 1e-9).ceil() as usize;
                    let hi = ((u_hi.min(1.0) + 1.0) * 0.5 * (p - 1) as f64 + 1e-9).floor() as usize;
                    if lo > hi || lo >= p {
                        continue;
                    }
                    (lo, hi.min(p - 1))
                };
                let row = (face * p + i1) * p;
                for i2 in lo_i..=hi_i {
                    let a = (aa + vc * us[i2]).abs() * inv_norm[i1 * p + i2];
                    let s = row + i2;
                    let lv = min_level(a, base, n_l);
                    if lv < l_full {
                        cnt_lo[s * n_l + lv] += 1;
                        if has_full {
                            cnt_lo[s * n_l + l_full] -= 1;
                        }
                    }
                    let lu = min_level((a - rho).max(0.0), base, n_l);
                    if lu < l_full {
                        cnt_up[s * n_l + lu] += 1;
                        if has_full {
                            cnt_up[s * n_l + l_full] -= 1;
                        }
                    }
                }
            }
        }
        if has_full {
            full[l_full] += 1;
        }
    }

    let mut full_cum = vec![0i64; n_l];
    let mut acc = 0i64;
    for l in 0..n_l {
        acc += full[l];
        full_cum[l] = acc;
    }
    let mut lower = vec![0i64; n_l];
    let mut upper = vec![0i64; n_l];
    let mut wit_s = vec![0usize; n_l];
    for s in 0..total {
        let mut acc_lo = 0i64;
        let mut acc_up = 0i64;
        for l in 0..n_l {
            acc_lo += i64::from(cnt_lo[s * n_l + l]);
            acc_up += i64::from(cnt_up[s * n_l + l]);
            if acc_lo + full_cum[l] > lower[l] {
                lower[l] = acc_lo + full_cum[l];
                wit_s[l] = s;
            }
            if acc_up + full_cum[l] > upper[l] {
                upper[l] = acc_up + full_cum[l];
            }
        }
    }

    let sample_dir = |s: usize| -> Result<Direction> {
        let face = s / (p * p);
        let i1 = (s / p) % p;
        let i2 = s % p;
        let axis = face / 2;
        let b1 = if axis == 0 { 1 } else { 0 };
        let b2 = if axis == 2 { 1 } else { 2 };
        let mut coords = vec![0.0; 3];
        coords[axis] = if face % 2 == 0 { -1.0 } else { 1.0 };
        coords[b1] = us[i1];
        coords[b2] = us[i2];
        Direction::new(coords)
    };
    let mut out = Vec::with_capacity(n_l);
    for l in 0..n_l {
        let w = sample_dir(wit_s[l])?;
        let (refined, w_star) = refine_lower(cover, l as u32, &w, rho);
        let lo = refined.max(lower[l] as usize);
        out.push(ElBracket {
            l: l as u32,
            lower: lo,
            upper: (upper[l] as usize).max(lo),
            witness_w: w_star,
            sample_resolution: rho,
        });
    }
    Ok(out)
}

/// Reference pass: per sample, level-bucket every cap. Used for dimensions
/// above 3 and as the cross-check oracle for the banded path.
pub(crate) fn bracket_sample_major(cover: &CapCover, l_max: u32, rho: f64) -> Result<Vec<ElBracket>> {
    let dim = cover.centers[0].dim();
    let samples = sphere_sample(dim, rho)?;
    let n_l = (l_max + 1) as usize;

    // Only w near-orthogonal to the bounding cap of the centers can count
    // anything; everything else is skipped.
    let mut mean = vec![0.0; dim];
    for v in &cover.centers {
        for (m, x) in mean.iter_mut().zip(v.coords()) {
            *m += x;
        }
    }
    let band = if let Ok(u) = Direction::new(mean) {
        let eta = cover
            .centers
            .iter()
            .map(|v| v.dist(&u))
            .fold(0.0f64, f64::max);
        let tau_max = (0..cover.n_caps())
            .map(|j| cover.threshold(j, l_max).min(1.0))
            .fold(0.0f64, f64::max);
        Some((u, eta + tau_max + rho + 1e-9))
    } else {
        None
    };

    let flat: Vec<f64> = cover
        .centers
        .iter()
        .flat_map(|v| v.coords().iter().cloned())
        .collect();
    let base: Vec<f64> = (0..cover.n_caps())
        .map(|j| (1.0 + cover.slack_c) * cover.diameters[j])
        .collect();

    let mut lower = vec![0usize; n_l];
    let mut upper = vec![0usize; n_l];
    let mut witness: Vec<Direction> = vec![samples[0].clone(); n_l];

    let mut hist_lo = vec![0usize; n_l + 1];
    let mut hist_up = vec![0usize; n_l + 1];
    for w in &samples {
        if let Some((u, limit)) = &band {
            if w.dot(u).abs() > *limit {
                continue;
            }
        }
        hist_lo.iter_mut().for_each(|x| *x = 0);
        hist_up.iter_mut().for_each(|x| *x = 0);
        let wc = w.coords();
        for j in 0..cover.n_caps() {
            let a = dot(&flat[j * dim..(j + 1) * dim], wc).abs();
            hist_lo[min_level(a, base[j], n_l)] += 1;
            hist_up[min_level((a - rho).max(0.0), base[j], n_l)] += 1;
        }
        let mut acc_lo = 0usize;
        let mut acc_up = 0usize;
        for l in 0..n_l {
            acc_lo += hist_lo[l];
            acc_up += hist_up[l];
            if acc_lo > lower[l] {
                lower[l] = acc_lo;
                witness[l] = w.clone();
            }
            upper[l] = upper[l].max(acc_up);
        }
    }

    // Local refinement of the lower bound in the 2-plane spanned by the
    // witness and the counted center closest to the witness hyperplane.
    let mut out = Vec::with_capacity(n_l);
    for l in 0..n_l {
        let (refined, w_star) = refine_lower(cover, l as u32, &witness[l], rho);
        let lo = refined.max(lower[l]);
        out.push(ElBracket {
            l: l as u32,
            lower: lo,
            upper: upper[l].max(lo),
            witness_w: w_star,
            sample_resolution: rho,
        });
    }
    Ok(out)
}

/// Exact sup on the circle. Each cap's admissible normals form arcs of
/// half-width asin(tau) around the two perpendiculars of its center, so the
/// maximum stabbing count comes from an endpoint sweep over [0, pi).
fn bracket_circle_exact(cover: &CapCover, l_max: u32, rho: f64) -> Result<Vec<ElBracket>> {
    use std::f64::consts::{FRAC_PI_2, PI};
    let n_l = (l_max + 1) as usize;
    let mut out = Vec::with_capacity(n_l);
    for l in 0..n_l {
        let mut events: Vec<(f64, i32)> = Vec::new();
        let mut always = 0usize;
        for (j, v) in cover.centers.iter().enumerate() {
            let tau = cover.threshold(j, l as u32);
            if tau >= 1.0 {
                always += 1;
                continue;
            }
            let s = tau.asin();
            let alpha = v.coords()[1].atan2(v.coords()[0]);
            let start = (alpha + FRAC_PI_2 - s).rem_euclid(PI);
            let end = start + 2.0 * s;
            events.push((start, 1));
            if end <= PI {
                events.push((end, -1));
            } else {
                events.push((PI, -1));
                events.push((0.0, 1));
                events.push((end - PI, -1));
            }
        }
        // Closed intervals: at equal angles, openings precede closings.
        events.sort_by(|a, b| {
            a.0.partial_cmp(&b.0).expect("finite angles").then(b.1.cmp(&a.1))
        });
        let mut cur = 0i64;
        let mut best = 0i64;
        let mut best_beta = 0.0f64;
        for (pos, delta) in &events {
            cur += i64::from(*delta);
            if cur > best {
                best = cur;
                best_beta = *pos;
            }
        }
        let sweep = best as usize + always;
        let w = Direction::new(vec![best_beta.cos(), best_beta.sin()])?;
        let realized = count_at(&w, cover, l as u32);
        out.push(ElBracket {
            l: l as u32,
            lower: realized,
            upper: sweep.max(realized),
            witness_w: w,
            sample_resolution: rho,
        });
    }
    Ok(out)
}

/// Smallest l with a <= (1+c) 2^l delta_j; `n_l` acts as the overflow bin.
fn min_level(a: f64, base: f64, n_l: usize) -> usize {
    if a <= base {
        return 0;
    }
    let l = (a / base).log2().ceil() as i64;
    if l < 0 {
        0
    } else if (l as usize) < n_l {
        l as usize
    } else {
        n_l
    }
}

fn refine_lower(cover: &CapCover, l: u32, w0: &Direction, rho: f64) -> (usize, Direction) {
    let mut best_count = count_at(w0, cover, l);
    let mut best_w = w0.clone();
    // Nearest counted center in the hyperplane-distance sense.
    let near = cover
        .centers
        .iter()
        .enumerate()
        .filter(|(j, v)| v.dot(w0).abs() <= cover.threshold(*j, l))
        .min_by(|(_, a), (_, b)| {
            a.dot(w0).abs().partial_cmp(&b.dot(w0).abs()).expect("finite dots")
        });
    let Some((_, v_near)) = near else {
        return (best_count, best_w);
    };
    // Orthonormal companion of w0 in span{w0, v_near}.
    let d = v_near.dot(w0);
    let tang: Vec<f64> = v_near
        .coords()
        .iter()
        .zip(w0.coords())
        .map(|(x, w)| x - d * w)
        .collect();
    let norm = tang.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm < 1e-12 {
        return (best_count, best_w);
    }
    let tang: Vec<f64> = tang.into_iter().map(|x| x / norm).collect();
    let span = 8.0 * rho;
    for step in -32i32..=32 {
        let t = span * step as f64 / 32.0;
        let coords: Vec<f64> = w0
            .coords()
            .iter()
            .zip(&tang)
            .map(|(w, e)| t.cos() * w + t.sin() * e)
            .collect();
        if let Ok(w) = Direction::new(coords) {
            let c = count_at(&w, cover, l);
            if c > best_count {
                best_count = c;
                best_w = w;
            }
        }
    }
    (best_count, best_w)
}

/// Brackets a single E_l.
pub fn bracket_el(cover: &CapCover, l: u32, rho: f64) -> Result<ElBracket> {
    let mut all = bracket_all(cover, l, rho)?;
    Ok(all.remove(l as usize))
}

/// Sum_{l=0..l_max} 2^{-l} sqrt(E_l) for the lower and upper bracket sides.
pub fn weighted_el_sum(brackets: &[ElBracket]) -> (f64, f64) {
    let mut lo = 0.0;
    let mut up = 0.0;
    for b in brackets {
        let w = 2f64.powi(-(b.l as i32));
        lo += w * (b.lower as f64).sqrt();
        up += w * (b.upper as f64).sqrt();
    }
    (lo, up)
}
