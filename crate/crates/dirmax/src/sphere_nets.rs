//! Direction sets on the unit sphere: maximal separated nets, lacunary
//! sequences inside caps, and mixed sets built from one lacunary sequence
//! per cap of a net.
//!
//! Nets are built by greedy insertion over a seeded quasi-uniform candidate
//! stream (angular grid for n=2, generalized spiral for n=3, rejection
//! sampling for n>=4). Maximality is certified a posteriori by a sampled
//! covering check at resolution delta/8.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cone_counts::CapCover;
use crate::{DirmaxError, Result};

const UNIT_TOL: f64 = 1e-12;

/// A unit vector in R^n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    coords: Vec<f64>,
}

impl Direction {
    /// Normalizes `coords` onto the unit sphere.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(DirmaxError::InvalidParameter(
                "direction needs dimension >= 2".into(),
            ));
        }
        let norm = coords.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !norm.is_finite() || norm < 1e-14 {
            return Err(DirmaxError::InvalidParameter(
                "cannot normalize a (near-)zero vector".into(),
            ));
        }
        let coords = coords.into_iter().map(|x| x / norm).collect();
        Ok(Direction { coords })
    }

    /// k-th standard basis vector in dimension `dim`.
    pub fn axis(dim: usize, k: usize) -> Self {
        let mut coords = vec![0.0; dim];
        coords[k] = 1.0;
        Direction { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dot(&self, other: &Direction) -> f64 {
        dot(&self.coords, other.coords())
    }

    pub fn dot_slice(&self, xs: &[f64]) -> f64 {
        dot(&self.coords, xs)
    }

    /// Euclidean (chord) distance.
    pub fn dist(&self, other: &Direction) -> f64 {
        self.coords
            .iter()
            .zip(other.coords())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn unit_defect(&self) -> f64 {
        (self.coords.iter().map(|x| x * x).sum::<f64>().sqrt() - 1.0).abs()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A finite set of directions with separation and diameter metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DirectionSet {
    pub dim: usize,
    pub points: Vec<Direction>,
    /// Guaranteed minimum pairwise chord distance.
    pub separation: f64,
    /// Maximum pairwise chord distance, `None` for full-sphere sets.
    pub diameter_bound: Option<f64>,
}

impl DirectionSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Exact all-pairs separation check.
    pub fn min_pairwise_distance(&self) -> f64 {
        let mut min = f64::INFINITY;
        for i in 0..self.points.len() {
            for j in (i + 1)..self.points.len() {
                min = min.min(self.points[i].dist(&self.points[j]));
            }
        }
        min
    }

    pub fn max_pairwise_distance(&self) -> f64 {
        let mut max: f64 = 0.0;
        for i in 0..self.points.len() {
            for j in (i + 1)..self.points.len() {
                max = max.max(self.points[i].dist(&self.points[j]));
            }
        }
        max
    }

    /// Validates the declared invariants; small slack absorbs float rounding.
    /// True if some pair is strictly farther apart than `threshold`. Early
    /// exit keeps this near-linear on spread sets; sets where no pair
    /// exceeds are diameter-bounded and hence small at fixed separation.
    pub fn exceeds_distance(&self, threshold: f64) -> bool {
        for i in 0..self.points.len() {
            for j in (i + 1)..self.points.len() {
                if self.points[i].dist(&self.points[j]) > threshold {
                    return true;
                }
            }
        }
        false
    }

    /// Double-sweep diameter estimate: exact within a factor 2, linear time.
    pub fn diameter_estimate(&self) -> f64 {
        let mut best = 0.0f64;
        let Some(mut anchor) = self.points.first() else {
            return 0.0;
        };
        for _ in 0..2 {
            let mut far = anchor;
            for p in &self.points {
                let d = anchor.dist(p);
                if d > best {
                    best = d;
                    far = p;
                }
            }
            anchor = far;
        }
        best
    }

    pub fn validate(&self) -> Result<()> {
        for p in &self.points {
            if p.dim() != self.dim {
                return Err(DirmaxError::Geometry("dimension mismatch".into()));
            }
            if p.unit_defect() > UNIT_TOL {
                return Err(DirmaxError::Geometry("non-unit direction".into()));
            }
        }
        if self.points.len() > 1 {
            let min = if self.points.len() > 256 {
                let mut hash = SphereHash::new(self.dim, self.separation.max(1e-6));
                for p in &self.points {
                    hash.insert(p.clone());
                }
                hash.closest_pair_below(self.separation - 1e-9)
                    .unwrap_or(self.separation)
            } else {
                self.min_pairwise_distance()
            };
            if min < self.separation - 1e-9 {
                return Err(DirmaxError::Geometry(format!(
                    "separation violated: {min} < {}",
                    self.separation
                )));
            }
            if let Some(eta) = self.diameter_bound {
                let max = self.max_pairwise_distance();
                if max > eta + 1e-9 {
                    return Err(DirmaxError::Geometry(format!(
                        "diameter violated: {max} > {eta}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Spatial hash over unit vectors for O(1) radius and nearest queries.
pub(crate) struct SphereHash {
    cell: f64,
    dim: usize,
    buckets: HashMap<Vec<i64>, Vec<usize>>,
    points: Vec<Direction>,
}

impl SphereHash {
    pub fn new(dim: usize, cell: f64) -> Self {
        SphereHash {
            cell: cell.max(1e-6),
            dim,
            buckets: HashMap::new(),
            points: Vec::new(),
        }
    }

    fn key(&self, p: &Direction) -> Vec<i64> {
        p.coords()
            .iter()
            .map(|&x| (x / self.cell).floor() as i64)
            .collect()
    }

    pub fn insert(&mut self, p: Direction) -> usize {
        let idx = self.points.len();
        let key = self.key(&p);
        self.buckets.entry(key).or_default().push(idx);
        self.points.push(p);
        idx
    }

    pub fn into_points(self) -> Vec<Direction> {
        self.points
    }

    fn for_cells_in_ring<F: FnMut(&[i64])>(&self, center: &[i64], ring: i64, f: &mut F) {
        // Walk the surface of the cube [-ring, ring]^dim around `center`.
        let dim = self.dim;
        let mut offs = vec![-ring; dim];
        loop {
            if offs.iter().any(|o| o.abs() == ring) || ring == 0 {
                let cell: Vec<i64> = center.iter().zip(&offs).map(|(c, o)| c + o).collect();
                f(&cell);
            }
            let mut axis = 0;
            loop {
                offs[axis] += 1;
                if offs[axis] <= ring {
                    break;
                }
                offs[axis] = -ring;
                axis += 1;
                if axis == dim {
                    return;
                }
            }
            if ring == 0 {
                return;
            }
        }
    }

    /// True if some stored point is strictly closer than `radius` to `p`.
    pub fn has_closer(&self, p: &Direction, radius: f64) -> bool {
        let center = self.key(p);
        let max_ring = (radius / self.cell).ceil() as i64 + 1;
        for ring in 0..=max_ring {
            let mut found = false;
            self.for_cells_in_ring(&center, ring, &mut |cell| {
                if found {
                    return;
                }
                if let Some(ids) = self.buckets.get(cell) {
                    for &i in ids {
                        if self.points[i].dist(p) < radius {
                            found = true;
                            return;
                        }
                    }
                }
            });
            if found {
                return true;
            }
        }
        false
    }

    /// Distance of the closest stored pair below `radius`, if any. Distinct
    /// indices only, so a point never matches itself.
    pub fn closest_pair_below(&self, radius: f64) -> Option<f64> {
        let max_ring = (radius / self.cell).ceil() as i64 + 1;
        let mut best: Option<f64> = None;
        for (i, p) in self.points.iter().enumerate() {
            let center = self.key(p);
            for ring in 0..=max_ring {
                self.for_cells_in_ring(&center, ring, &mut |cell| {
                    if let Some(ids) = self.buckets.get(cell) {
                        for &j in ids {
                            if j == i {
                                continue;
                            }
                            let d = self.points[j].dist(p);
                            if d < radius && best.map_or(true, |b| d < b) {
                                best = Some(d);
                            }
                        }
                    }
                });
            }
        }
        best
    }

    /// True if some stored point is within `radius` of `p`.
    pub fn has_within(&self, p: &Direction, radius: f64) -> bool {
        let center = self.key(p);
        let max_ring = (radius / self.cell).ceil() as i64 + 1;
        for ring in 0..=max_ring {
            let mut found = false;
            self.for_cells_in_ring(&center, ring, &mut |cell| {
                if found {
                    return;
                }
                if let Some(ids) = self.buckets.get(cell) {
                    for &i in ids {
                        if self.points[i].dist(p) <= radius {
                            found = true;
                            return;
                        }
                    }
                }
            });
            if found {
                return true;
            }
        }
        false
    }

    /// Index and distance of the nearest stored point, if any.
    pub fn nearest(&self, p: &Direction) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let center = self.key(p);
        let mut best: Option<(usize, f64)> = None;
        let mut ring = 0i64;
        // Expand rings until the best candidate provably beats unseen cells,
        // then fall back to brute force for pathological cell counts.
        let max_ring = (2.2 / self.cell).ceil() as i64 + 2;
        loop {
            self.for_cells_in_ring(&center, ring, &mut |cell| {
                if let Some(ids) = self.buckets.get(cell) {
                    for &i in ids {
                        let d = self.points[i].dist(p);
                        if best.map_or(true, |(bi, bd)| d < bd || (d == bd && i < bi)) {
                            best = Some((i, d));
                        }
                    }
                }
            });
            if let Some((_, bd)) = best {
                // Cells at ring r are at least (r-1)*cell away.
                if bd <= (ring as f64 - 1.0) * self.cell {
                    return best;
                }
            }
            ring += 1;
            if ring > max_ring {
                return best.or_else(|| {
                    let mut fb: Option<(usize, f64)> = None;
                    for (i, q) in self.points.iter().enumerate() {
                        let d = q.dist(p);
                        if fb.map_or(true, |(_, bd)| d < bd) {
                            fb = Some((i, d));
                        }
                    }
                    fb
                });
            }
        }
    }
}

/// Seeded random rotation (orthogonal matrix, rows orthonormal).
pub(crate) fn random_rotation(dim: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    loop {
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(dim);
        let mut ok = true;
        for _ in 0..dim {
            let mut v: Vec<f64> = (0..dim).map(|_| gaussian(rng)).collect();
            for r in &rows {
                let d = dot(&v, r);
                for (x, y) in v.iter_mut().zip(r) {
                    *x -= d * y;
                }
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-8 {
                ok = false;
                break;
            }
            for x in v.iter_mut() {
                *x /= norm;
            }
            rows.push(v);
        }
        if ok {
            return rows;
        }
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller.
    let u1: f64 = rng.gen_range(1e-12..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

fn rotate(rot: &[Vec<f64>], p: &[f64]) -> Vec<f64> {
    rot.iter().map(|row| dot(row, p)).collect()
}

/// Angular grid on S^1 with chord spacing <= `res`.
fn circle_stream(res: f64) -> Vec<Vec<f64>> {
    let step = 2.0 * (res / 2.0).min(1.0).asin();
    // Round the sample count up to a multiple of 12 so that nets whose optimal
    // spacing divides the circle evenly (e.g. delta = 1) close up exactly.
    let count = ((2.0 * PI / step).ceil() as usize).div_ceil(12) * 12;
    (0..count)
        .map(|i| {
            let a = 2.0 * PI * i as f64 / count as f64;
            vec![a.cos(), a.sin()]
        })
        .collect()
}

/// Generalized-spiral points on S^2 with chord spacing roughly <= `res`.
fn spiral_stream(res: f64) -> Vec<Vec<f64>> {
    let count = ((16.0 / (res * res)).ceil() as usize).max(8);
    let golden = PI * (3.0 - 5.0f64.sqrt());
    (0..count)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / count as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let a = golden * i as f64;
            vec![r * a.cos(), r * a.sin(), z]
        })
        .collect()
}

/// Uniform random points on S^{n-1}, enough to reach resolution `res`
/// with high probability.
fn random_stream(dim: usize, res: f64, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>> {
    let per_cell = (2.2 / res).powi(dim as i32 - 1) * 4.0;
    if per_cell > 4e7 {
        return Err(DirmaxError::InvalidParameter(format!(
            "sample resolution {res} in dimension {dim} exceeds the memory guard"
        )));
    }
    let count = per_cell as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let v: Vec<f64> = (0..dim).map(|_| gaussian(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            out.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    Ok(out)
}

/// Candidate streams for net construction: a coarse pass keeps the net
/// cardinality near the covering optimum, the fine pass (resolution
/// delta/8) certifies sampled maximality.
fn net_streams(dim: usize, delta: f64, seed: u64) -> Result<(Vec<Direction>, Vec<Direction>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rot = random_rotation(dim, &mut rng);
    let fine_res = delta / 8.0;
    let (coarse_raw, fine_raw) = match dim {
        2 => (Vec::new(), circle_stream(fine_res)),
        3 => (spiral_stream(1.6 * delta), spiral_stream(fine_res)),
        _ => (Vec::new(), random_stream(dim, fine_res, &mut rng)?),
    };
    let to_dirs = |raw: Vec<Vec<f64>>| -> Result<Vec<Direction>> {
        raw.into_iter().map(|p| Direction::new(rotate(&rot, &p))).collect()
    };
    Ok((to_dirs(coarse_raw)?, to_dirs(fine_raw)?))
}

/// Builds a maximal delta-separated net on S^{n-1}.
///
/// Greedy insertion guarantees separation; maximality holds in the sampled
/// sense against the delta/8 candidate stream (see [`covering_radius_sampled`]).
pub fn build_maximal_net(dim: usize, delta: f64, seed: u64) -> Result<DirectionSet> {
    if dim < 2 {
        return Err(DirmaxError::InvalidParameter("dim must be >= 2".into()));
    }
    if !(delta > 0.0 && delta < 2.0) {
        return Err(DirmaxError::InvalidParameter(format!(
            "delta must lie in (0, 2), got {delta}"
        )));
    }
    let (coarse, fine) = net_streams(dim, delta, seed)?;
    let accept_thresh = delta * (1.0 - 1e-12);
    let mut hash = SphereHash::new(dim, delta);
    for p in coarse.into_iter().chain(fine) {
        if !hash.has_within(&p, accept_thresh) {
            hash.insert(p);
        }
    }
    let set = DirectionSet {
        dim,
        points: hash.into_points(),
        separation: delta,
        diameter_bound: None,
    };
    set.validate()?;
    Ok(set)
}

/// Sampled covering radius of a net: max over the delta/8 test stream of the
/// distance to the nearest net point. A maximal net reports <= delta.
pub fn covering_radius_sampled(net: &DirectionSet, seed: u64) -> Result<f64> {
    let (_, fine) = net_streams(net.dim, net.separation, seed)?;
    let mut hash = SphereHash::new(net.dim, net.separation);
    for p in &net.points {
        hash.insert(p.clone());
    }
    let mut max = 0.0f64;
    for p in &fine {
        let (_, d) = hash
            .nearest(p)
            .ok_or_else(|| DirmaxError::Geometry("empty net".into()))?;
        max = max.max(d);
    }
    Ok(max)
}

/// Specification of an order-1 lacunary sequence inside a cap.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LacunarySpec {
    pub cap_center: Direction,
    /// Unit vector orthogonal to `cap_center`.
    pub tangent: Direction,
    /// Geometric ratio in (0, 1).
    pub ratio: f64,
    pub count: usize,
    pub cap_radius: f64,
}

impl LacunarySpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return Err(DirmaxError::InvalidParameter(format!(
                "lacunary ratio must lie in (0, 1), got {}",
                self.ratio
            )));
        }
        if self.count == 0 {
            return Err(DirmaxError::InvalidParameter("count must be >= 1".into()));
        }
        if !(self.cap_radius > 0.0) {
            return Err(DirmaxError::InvalidParameter("cap_radius must be > 0".into()));
        }
        if self.cap_center.dot(&self.tangent).abs() > UNIT_TOL {
            return Err(DirmaxError::InvalidParameter(
                "tangent must be orthogonal to cap_center".into(),
            ));
        }
        Ok(())
    }
}

/// Builds the sequence normalize(center + ratio^k * cap_radius * tangent),
/// k = 0..count-1.
pub fn build_lacunary(spec: &LacunarySpec) -> Result<DirectionSet> {
    spec.validate()?;
    let dim = spec.cap_center.dim();
    let mut points = Vec::with_capacity(spec.count);
    for k in 0..spec.count {
        let t = spec.ratio.powi(k as i32) * spec.cap_radius;
        let coords: Vec<f64> = spec
            .cap_center
            .coords()
            .iter()
            .zip(spec.tangent.coords())
            .map(|(c, u)| c + t * u)
            .collect();
        points.push(Direction::new(coords)?);
    }
    let set = DirectionSet {
        dim,
        separation: min_pairwise(&points),
        diameter_bound: Some(2.0 * spec.cap_radius),
        points,
    };
    set.validate()?;
    Ok(set)
}

fn min_pairwise(points: &[Direction]) -> f64 {
    let mut min = f64::INFINITY;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            min = min.min(points[i].dist(&points[j]));
        }
    }
    if min.is_finite() {
        min
    } else {
        1.0
    }
}

/// Builds a delta-net of cap centers and one lacunary sequence per cap.
///
/// The template supplies ratio, count and cap radius; the tangent is
/// re-orthogonalized against each cap center. Cap radii are clipped below
/// delta/2 so caps stay disjoint.
pub fn build_mixed_set(
    dim: usize,
    delta: f64,
    template: &LacunarySpec,
    seed: u64,
) -> Result<(DirectionSet, CapCover)> {
    let centers = build_maximal_net(dim, delta, seed)?;
    let radius = template.cap_radius.min(0.45 * delta);
    let mut points = Vec::new();
    let mut rep_centers = Vec::new();
    let mut membership = Vec::new();
    for (j, center) in centers.points.iter().enumerate() {
        let tangent = orthogonal_tangent(center, &template.tangent)?;
        let spec = LacunarySpec {
            cap_center: center.clone(),
            tangent,
            ratio: template.ratio,
            count: template.count,
            cap_radius: radius,
        };
        let seq = build_lacunary(&spec)?;
        rep_centers.push(seq.points[0].clone());
        for p in seq.points {
            points.push(p);
            membership.push(j);
        }
    }
    let omega = DirectionSet {
        dim,
        separation: min_pairwise(&points),
        diameter_bound: None,
        points,
    };
    omega.validate()?;
    let cover = CapCover {
        centers: rep_centers,
        diameters: vec![delta; centers.points.len()],
        membership,
        slack_c: 1.0,
    };
    cover.validate(&omega)?;
    Ok((omega, cover))
}

/// Projects `hint` onto the tangent space at `center`; falls back to a
/// coordinate axis when the hint is near-parallel.
fn orthogonal_tangent(center: &Direction, hint: &Direction) -> Result<Direction> {
    let dim = center.dim();
    let mut candidates: Vec<Vec<f64>> = vec![hint.coords().to_vec()];
    for k in 0..dim {
        candidates.push(Direction::axis(dim, k).coords().to_vec());
    }
    for cand in candidates {
        let d = dot(&cand, center.coords());
        let v: Vec<f64> = cand
            .iter()
            .zip(center.coords())
            .map(|(x, c)| x - d * c)
            .collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            return Direction::new(v);
        }
    }
    Err(DirmaxError::Geometry("no tangent direction found".into()))
}

/// Writes the TSV direction-set format: a `# dim=.. delta=.. eta=..` header
/// line followed by one row of tab-separated coordinates per direction.
pub fn write_tsv(set: &DirectionSet, path: &Path) -> Result<()> {
    let mut out = String::new();
    let eta = match set.diameter_bound {
        Some(e) => format!("{e:.17e}"),
        None => "inf".to_string(),
    };
    writeln!(out, "# dim={} delta={:.17e} eta={}", set.dim, set.separation, eta)
        .expect("string write");
    for p in &set.points {
        let row: Vec<String> = p.coords().iter().map(|x| format!("{x:.17e}")).collect();
        writeln!(out, "{}", row.join("\t")).expect("string write");
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_tsv(path: &Path) -> Result<DirectionSet> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| DirmaxError::Parse("empty direction-set file".into()))?;
    let header = header
        .strip_prefix('#')
        .ok_or_else(|| DirmaxError::Parse("missing # header".into()))?;
    let mut dim = None;
    let mut delta = None;
    let mut eta = None;
    for field in header.split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| DirmaxError::Parse(format!("bad header field {field}")))?;
        match key {
            "dim" => dim = Some(value.parse::<usize>().map_err(|e| DirmaxError::Parse(e.to_string()))?),
            "delta" => delta = Some(value.parse::<f64>().map_err(|e| DirmaxError::Parse(e.to_string()))?),
            "eta" => {
                eta = Some(if value == "inf" {
                    None
                } else {
                    Some(value.parse::<f64>().map_err(|e| DirmaxError::Parse(e.to_string()))?)
                })
            }
            _ => return Err(DirmaxError::Parse(format!("unknown header key {key}"))),
        }
    }
    let dim = dim.ok_or_else(|| DirmaxError::Parse("header missing dim".into()))?;
    let delta = delta.ok_or_else(|| DirmaxError::Parse("header missing delta".into()))?;
    let eta = eta.ok_or_else(|| DirmaxError::Parse("header missing eta".into()))?;
    let mut points = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let coords: std::result::Result<Vec<f64>, _> =
            line.split('\t').map(|t| t.trim().parse::<f64>()).collect();
        let coords = coords.map_err(|e| DirmaxError::Parse(e.to_string()))?;
        if coords.len() != dim {
            return Err(DirmaxError::Parse("row dimension mismatch".into()));
        }
        points.push(Direction::new(coords)?);
    }
    let set = DirectionSet {
        dim,
        points,
        separation: delta,
        diameter_bound: eta,
    };
    set.validate()?;
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_delta() {
        assert!(build_maximal_net(3, 0.0, 1).is_err());
        assert!(build_maximal_net(3, -0.5, 1).is_err());
        assert!(build_maximal_net(3, 2.0, 1).is_err());
    }

    #[test]
    fn hexagon_net_on_circle() {
        let net = build_maximal_net(2, 1.0, 7).unwrap();
        assert_eq!(net.len(), 6);
        assert!(net.min_pairwise_distance() >= 1.0 - 1e-9);
        let cov = covering_radius_sampled(&net, 7).unwrap();
        assert!(cov <= 1.0, "covering radius {cov}");
    }

    #[test]
    fn sphere_net_cardinality_and_separation() {
        let net = build_maximal_net(3, 0.2, 11).unwrap();
        let n = net.len() as f64;
        assert!(n >= 12.5 && n <= 200.0, "count {n}");
        assert!(net.min_pairwise_distance() >= 0.2 - 1e-9);
        let cov = covering_radius_sampled(&net, 11).unwrap();
        assert!(cov <= 0.2, "covering radius {cov}");
    }

    #[test]
    fn net_self_check_multiple_deltas() {
        for &delta in &[0.8, 0.4, 0.15] {
            let net = build_maximal_net(2, delta, 3).unwrap();
            net.validate().unwrap();
            assert!(covering_radius_sampled(&net, 3).unwrap() <= delta);
        }
    }

    #[test]
    fn net_determinism() {
        let a = build_maximal_net(3, 0.3, 42).unwrap();
        let b = build_maximal_net(3, 0.3, 42).unwrap();
        assert_eq!(a.len(), b.len());
        for (p, q) in a.points.iter().zip(&b.points) {
            assert_eq!(p.coords(), q.coords());
        }
    }

    #[test]
    fn cardinality_scaling_slope() {
        for dim in [2usize, 3] {
            let deltas = [0.4, 0.3, 0.2, 0.15, 0.1];
            let xs: Vec<f64> = deltas.iter().map(|d| (1.0f64 / d).ln()).collect();
            let ys: Vec<f64> = deltas
                .iter()
                .map(|&d| (build_maximal_net(dim, d, 5).unwrap().len() as f64).ln())
                .collect();
            let n = xs.len() as f64;
            let mx = xs.iter().sum::<f64>() / n;
            let my = ys.iter().sum::<f64>() / n;
            let slope = xs
                .iter()
                .zip(&ys)
                .map(|(x, y)| (x - mx) * (y - my))
                .sum::<f64>()
                / xs.iter().map(|x| (x - mx) * (x - mx)).sum::<f64>();
            let target = (dim - 1) as f64;
            assert!(
                (slope - target).abs() <= 0.15,
                "dim {dim}: slope {slope} vs {target}"
            );
        }
    }

    #[test]
    fn lacunary_single_and_ratios() {
        let e3 = Direction::axis(3, 2);
        let e1 = Direction::axis(3, 0);
        let spec = LacunarySpec {
            cap_center: e3.clone(),
            tangent: e1.clone(),
            ratio: 0.5,
            count: 1,
            cap_radius: 0.1,
        };
        let single = build_lacunary(&spec).unwrap();
        assert_eq!(single.len(), 1);
        let expected = Direction::new(vec![0.1, 0.0, 1.0]).unwrap();
        assert!(single.points[0].dist(&expected) < 1e-12);

        let spec3 = LacunarySpec { count: 3, ..spec };
        let set = build_lacunary(&spec3).unwrap();
        // First-coordinate ratios 1 : 1/2 : 1/4 before normalization; the
        // independent scalar check evaluates the formula directly.
        for (k, p) in set.points.iter().enumerate() {
            let t = 0.1 * 0.5f64.powi(k as i32);
            let norm = (1.0 + t * t).sqrt();
            assert!((p.coords()[0] - t / norm).abs() < 1e-12);
            assert!(p.dist(&e3) <= 0.1 * (1.0 + 1e-6));
        }
        // Consecutive angular gaps shrink geometrically with ratio 1/2.
        let g0 = set.points[0].dist(&set.points[1]);
        let g1 = set.points[1].dist(&set.points[2]);
        assert!((g1 / g0 - 0.5).abs() / 0.5 < 0.1);
    }

    #[test]
    fn lacunary_rejects_bad_ratio() {
        let spec = LacunarySpec {
            cap_center: Direction::axis(3, 2),
            tangent: Direction::axis(3, 0),
            ratio: 1.0,
            count: 2,
            cap_radius: 0.1,
        };
        assert!(build_lacunary(&spec).is_err());
    }

    #[test]
    fn mixed_set_counts_and_containment() {
        let template = LacunarySpec {
            cap_center: Direction::axis(3, 2),
            tangent: Direction::axis(3, 0),
            ratio: 0.5,
            count: 8,
            cap_radius: 0.2,
        };
        let (omega, cover) = build_mixed_set(3, 0.3, &template, 9).unwrap();
        let centers = build_maximal_net(3, 0.3, 9).unwrap();
        assert_eq!(omega.len(), 8 * centers.len());
        assert_eq!(cover.centers.len(), centers.len());
        for (i, p) in omega.points.iter().enumerate() {
            let j = cover.membership[i];
            assert!(p.dist(&cover.centers[j]) <= cover.diameters[j] + 1e-9);
        }

        let single = LacunarySpec { count: 1, ..template };
        let (omega1, _) = build_mixed_set(3, 0.3, &single, 9).unwrap();
        assert_eq!(omega1.len(), centers.len());
    }

    #[test]
    fn tsv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.tsv");
        let net = build_maximal_net(3, 0.4, 1).unwrap();
        write_tsv(&net, &path).unwrap();
        let back = read_tsv(&path).unwrap();
        assert_eq!(back.len(), net.len());
        for (p, q) in net.points.iter().zip(&back.points) {
            assert!(p.dist(q) < 1e-15);
        }
    }
}
