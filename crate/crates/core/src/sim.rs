//! Synthetic meshes, lead fields, propagating sources, noise and dataset
//! persistence.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::graph::io::{read_mesh, write_mesh};
use crate::graph::{GraphError, MeshGraph};
use crate::linalg::io::{read_dmat, write_dmat, FormatError};
use crate::linalg::{DenseMatrix, TemporalField};

pub const FORMAT_VERSION: u32 = 1;
const KNN: usize = 6;
const KNN_RETRIES: usize = 3;
const SENSOR_RADIUS: f64 = 1.2;
const KERNEL_EPS: f64 = 0.01;
const MIN_SINGULAR: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("random geometric graph still disconnected with k = {k}")]
    Disconnected { k: usize },
    #[error("lead field is rank deficient (smallest singular value {sigma_min:e})")]
    RankDeficient { sigma_min: f64 },
    #[error("relative noise is undefined for an all-zero signal")]
    ZeroSignal,
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Format(#[from] FormatError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshKind {
    Grid2d,
    Icosphere,
    RandomGeometric,
}

impl MeshKind {
    pub fn name(self) -> &'static str {
        match self {
            MeshKind::Grid2d => "grid2d",
            MeshKind::Icosphere => "icosphere",
            MeshKind::RandomGeometric => "random_geometric",
        }
    }
}

impl fmt::Display for MeshKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MeshKind {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "grid2d" => Ok(MeshKind::Grid2d),
            "icosphere" => Ok(MeshKind::Icosphere),
            "random_geometric" => Ok(MeshKind::RandomGeometric),
            other => Err(SimError::InvalidParameter(format!("unknown mesh kind {other:?}"))),
        }
    }
}

/// Independent stream per generator stage so changing one stage does not
/// shift the others.
fn stage_rng(seed: u64, stage: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stage);
    r
}

pub fn make_mesh(kind: MeshKind, n_target: usize, seed: u64) -> Result<MeshGraph, SimError> {
    if n_target < 4 {
        return Err(SimError::InvalidParameter(format!(
            "mesh needs at least 4 nodes, asked for {n_target}"
        )));
    }
    match kind {
        MeshKind::Grid2d => {
            let a = (n_target as f64).sqrt().round().max(2.0) as usize;
            let b = ((n_target as f64) / a as f64).round().max(2.0) as usize;
            grid2d(a, b)
        }
        MeshKind::Icosphere => {
            let k = (((n_target as f64 - 2.0) / 10.0).sqrt().round() as usize).max(1);
            icosphere(k)
        }
        MeshKind::RandomGeometric => random_geometric(n_target, seed),
    }
}

/// `rows x cols` lattice on the unit square with 4-neighbour edges.
pub fn grid2d(rows: usize, cols: usize) -> Result<MeshGraph, SimError> {
    if rows < 1 || cols < 1 {
        return Err(SimError::InvalidParameter("empty grid".into()));
    }
    let scale = |k: usize, len: usize| if len > 1 { k as f64 / (len - 1) as f64 } else { 0.0 };
    let id = |r: usize, c: usize| r * cols + c;
    let mut coords = Vec::with_capacity(rows * cols);
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            coords.push([scale(c, cols), scale(r, rows), 0.0]);
            if c + 1 < cols {
                edges.push((id(r, c), id(r, c + 1)));
            }
            if r + 1 < rows {
                edges.push((id(r, c), id(r + 1, c)));
            }
        }
    }
    Ok(MeshGraph::new(coords, &edges, None)?)
}

fn icosahedron() -> (Vec<[f64; 3]>, Vec<[usize; 3]>) {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let mut v = Vec::new();
    for s1 in [-1.0, 1.0] {
        for s2 in [-1.0, 1.0] {
            v.push([0.0, s1, s2 * phi]);
            v.push([s1, s2 * phi, 0.0]);
            v.push([s2 * phi, 0.0, s1]);
        }
    }
    let d2 = |a: [f64; 3], b: [f64; 3]| (0..3).map(|i| (a[i] - b[i]).powi(2)).sum::<f64>();
    // Faces are the triangles whose sides all have the edge length 2.
    let mut faces = Vec::new();
    for a in 0..12 {
        for b in a + 1..12 {
            for c in b + 1..12 {
                if [d2(v[a], v[b]), d2(v[b], v[c]), d2(v[a], v[c])]
                    .iter()
                    .all(|&x| (x - 4.0).abs() < 1e-9)
                {
                    faces.push([a, b, c]);
                }
            }
        }
    }
    (v, faces)
}

/// Geodesic sphere: each icosahedron face split into `freq^2` triangles and
/// projected to the unit sphere. `10 freq^2 + 2` nodes, `30 freq^2` edges.
pub fn icosphere(freq: usize) -> Result<MeshGraph, SimError> {
    if freq == 0 {
        return Err(SimError::InvalidParameter("icosphere frequency must be >= 1".into()));
    }
    let (base, faces) = icosahedron();
    let k = freq;
    // Points are keyed by their exact barycentric weights on the global
    // vertices, so shared edges and corners merge without tolerances.
    let mut index: HashMap<Vec<(usize, usize)>, usize> = HashMap::new();
    let mut coords = Vec::new();
    let mut edges = HashSet::new();
    for f in &faces {
        let mut local = vec![vec![0usize; k + 1]; k + 1];
        for i in 0..=k {
            for j in 0..=k - i {
                let w = [(f[0], k - i - j), (f[1], i), (f[2], j)];
                let mut key: Vec<(usize, usize)> = w.iter().copied().filter(|e| e.1 > 0).collect();
                key.sort_unstable();
                let id = *index.entry(key).or_insert_with(|| {
                    let mut p = [0.0; 3];
                    for (vi, wi) in w {
                        for (d, pd) in p.iter_mut().enumerate() {
                            *pd += base[vi][d] * wi as f64 / k as f64;
                        }
                    }
                    let r = p.iter().map(|x| x * x).sum::<f64>().sqrt();
                    coords.push([p[0] / r, p[1] / r, p[2] / r]);
                    coords.len() - 1
                });
                local[i][j] = id;
            }
        }
        for i in 0..k {
            for j in 0..k - i {
                let (a, b, c) = (local[i][j], local[i + 1][j], local[i][j + 1]);
                for (x, y) in [(a, b), (a, c), (b, c)] {
                    edges.insert((x.min(y), x.max(y)));
                }
            }
        }
    }
    let mut edges: Vec<(usize, usize)> = edges.into_iter().collect();
    edges.sort_unstable();
    Ok(MeshGraph::new(coords, &edges, None)?)
}

/// `n` uniform points in the unit ball joined to their `k` nearest
/// neighbours (symmetrized); `k` grows until the graph is connected.
pub fn random_geometric(n: usize, seed: u64) -> Result<MeshGraph, SimError> {
    let mut rng = stage_rng(seed, 1);
    let mut coords = Vec::with_capacity(n);
    while coords.len() < n {
        let p: [f64; 3] = [
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ];
        if p.iter().map(|x| x * x).sum::<f64>() <= 1.0 {
            coords.push(p);
        }
    }
    let d2 = |a: &[f64; 3], b: &[f64; 3]| (0..3).map(|i| (a[i] - b[i]).powi(2)).sum::<f64>();
    let mut order: Vec<Vec<usize>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut o: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        o.sort_by(|&a, &b| d2(&coords[i], &coords[a]).total_cmp(&d2(&coords[i], &coords[b])));
        order.push(o);
    }
    let mut k = KNN;
    for attempt in 0..=KNN_RETRIES {
        let mut set = HashSet::new();
        for (i, o) in order.iter().enumerate() {
            for &j in o.iter().take(k) {
                set.insert((i.min(j), i.max(j)));
            }
        }
        let mut edges: Vec<(usize, usize)> = set.into_iter().collect();
        edges.sort_unstable();
        let g = MeshGraph::new(coords.clone(), &edges, None)?;
        if g.is_connected() {
            return Ok(g);
        }
        if attempt < KNN_RETRIES {
            log::warn!("random_geometric: disconnected with k = {k}, retrying");
            k += 2;
        }
    }
    Err(SimError::Disconnected { k })
}

/// Default sensor count for an `n`-node mesh.
pub fn default_sensors(n: usize) -> usize {
    ((0.115 * n as f64).round() as usize).clamp(1, 231).min(n.saturating_sub(1).max(1))
}

fn fibonacci_sphere(p: usize) -> Vec<[f64; 3]> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..p)
        .map(|i| {
            let z = if p == 1 { 1.0 } else { 1.0 - 2.0 * (i as f64 + 0.5) / p as f64 };
            let r = (1.0 - z * z).max(0.0).sqrt();
            let th = golden * i as f64;
            [r * th.cos(), r * th.sin(), z]
        })
        .collect()
}

/// Random rotation from a normalized Gaussian quaternion.
fn random_rotation(rng: &mut ChaCha8Rng) -> [[f64; 3]; 3] {
    let q: Vec<f64> = (0..4).map(|_| rng.sample(StandardNormal)).collect();
    let n = q.iter().map(|x| x * x).sum::<f64>().sqrt();
    let (w, x, y, z) = (q[0] / n, q[1] / n, q[2] / n, q[3] / n);
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - z * w), 2.0 * (x * z + y * w)],
        [2.0 * (x * y + z * w), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - x * w)],
        [2.0 * (x * z - y * w), 2.0 * (y * z + x * w), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

/// Smallest singular value of a wide matrix via the eigenvalues of `L L^T`.
pub fn min_singular_value(l: &DenseMatrix) -> f64 {
    let g = l.matmul_t(l).expect("shapes agree");
    let g = DMatrix::from_fn(g.rows(), g.cols(), |i, j| g[(i, j)]);
    let eig = SymmetricEigen::new(g);
    eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min).max(0.0).sqrt()
}

fn centroid_and_radius(mesh: &MeshGraph) -> ([f64; 3], f64) {
    let coords = mesh.coords();
    let n = coords.len() as f64;
    let mut center = [0.0; 3];
    for c in coords {
        for d in 0..3 {
            center[d] += c[d] / n;
        }
    }
    let radius = coords
        .iter()
        .map(|c| (0..3).map(|d| (c[d] - center[d]).powi(2)).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
        .max(1e-12);
    (center, radius)
}

/// `p` sensors on a randomly rotated Fibonacci sphere of radius `1.2 R`
/// around the mesh centroid, `R` being the mesh radius. `attempt` selects a
/// fresh rotation for the same seed.
pub fn sensor_positions(mesh: &MeshGraph, p: usize, seed: u64, attempt: usize) -> Vec<[f64; 3]> {
    let (center, radius) = centroid_and_radius(mesh);
    let mut rng = stage_rng(seed, 2);
    let mut rot = random_rotation(&mut rng);
    for _ in 0..attempt {
        rot = random_rotation(&mut rng);
    }
    fibonacci_sphere(p)
        .iter()
        .map(|s| {
            let mut out = center;
            for (d, o) in out.iter_mut().enumerate() {
                let r: f64 = (0..3).map(|e| rot[d][e] * s[e]).sum();
                *o += SENSOR_RADIUS * radius * r;
            }
            out
        })
        .collect()
}

/// `L[i, j] = 1 / (|s_i - v_j|^2 + 0.01)` with rows scaled to unit norm.
pub fn leadfield_from_sensors(mesh: &MeshGraph, sensors: &[[f64; 3]]) -> DenseMatrix {
    let coords = mesh.coords();
    let mut l = DenseMatrix::from_fn(sensors.len(), coords.len(), |i, j| {
        let d2: f64 = (0..3).map(|d| (sensors[i][d] - coords[j][d]).powi(2)).sum();
        1.0 / (d2 + KERNEL_EPS)
    });
    for i in 0..sensors.len() {
        let row = l.row_mut(i);
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        row.iter_mut().for_each(|x| *x /= norm);
    }
    l
}

/// Synthetic lead field from `sensor_positions`, checked for full row rank
/// (one reseed on failure).
pub fn make_leadfield(mesh: &MeshGraph, p: usize, seed: u64) -> Result<DenseMatrix, SimError> {
    let n = mesh.num_nodes();
    if p == 0 || p >= n {
        return Err(SimError::InvalidParameter(format!(
            "need 1 <= p < n, got p = {p}, n = {n}"
        )));
    }
    let mut sigma_min = 0.0;
    for attempt in 0..2 {
        let l = leadfield_from_sensors(mesh, &sensor_positions(mesh, p, seed, attempt));
        sigma_min = min_singular_value(&l);
        if sigma_min > MIN_SINGULAR {
            return Ok(l);
        }
        log::warn!("make_leadfield: smallest singular value {sigma_min:e}, reseeding");
    }
    Err(SimError::RankDeficient { sigma_min })
}

/// Propagating source model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceSpec {
    pub num_sources: usize,
    pub amplitude: f64,
    /// Hops per time step.
    pub propagation_speed: f64,
    pub decay: f64,
}

impl Default for SourceSpec {
    fn default() -> Self {
        Self {
            num_sources: 2,
            amplitude: 1.0,
            propagation_speed: 0.5,
            decay: 0.5,
        }
    }
}

impl SourceSpec {
    fn validate(&self) -> Result<(), SimError> {
        if self.num_sources == 0 {
            return Err(SimError::InvalidParameter("need at least one source".into()));
        }
        if !(self.amplitude > 0.0 && self.amplitude.is_finite()) {
            return Err(SimError::InvalidParameter(format!("amplitude {}", self.amplitude)));
        }
        if !(self.propagation_speed >= 0.0 && self.propagation_speed.is_finite()) {
            return Err(SimError::InvalidParameter(format!(
                "propagation speed {}",
                self.propagation_speed
            )));
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return Err(SimError::InvalidParameter(format!("decay {} not in (0, 1]", self.decay)));
        }
        Ok(())
    }
}

/// Seed nodes drawn for `spec` under `seed`, in source order.
pub fn source_seeds(mesh: &MeshGraph, spec: &SourceSpec, seed: u64) -> Vec<usize> {
    let mut rng = stage_rng(seed, 3);
    (0..spec.num_sources)
        .map(|_| rng.random_range(0..mesh.num_nodes()))
        .collect()
}

/// Column `t - 1` holds time `t = 1..T`: node `v` gets
/// `amplitude * decay^max(0, d - speed t)` from each source at hop distance
/// `d <= ceil(speed t) + 2`.
pub fn simulate_sources(
    mesh: &MeshGraph,
    spec: &SourceSpec,
    t: usize,
    seed: u64,
) -> Result<TemporalField, SimError> {
    spec.validate()?;
    if t == 0 {
        return Err(SimError::InvalidParameter("T must be positive".into()));
    }
    let n = mesh.num_nodes();
    let mut x = DenseMatrix::zeros(n, t);
    for s in source_seeds(mesh, spec, seed) {
        let dist = mesh.hop_distances(s);
        for col in 0..t {
            let reach = spec.propagation_speed * (col + 1) as f64;
            let cutoff = reach.ceil() + 2.0;
            for (v, &d) in dist.iter().enumerate() {
                if d == usize::MAX || d as f64 > cutoff {
                    continue;
                }
                x[(v, col)] += spec.amplitude * spec.decay.powf((d as f64 - reach).max(0.0));
            }
        }
    }
    Ok(x)
}

/// `clean + E` with Gaussian `E` scaled to `||E|| = level ||clean||`.
pub fn add_noise(clean: &TemporalField, level: f64, seed: u64) -> Result<TemporalField, SimError> {
    if !(level >= 0.0 && level.is_finite()) {
        return Err(SimError::InvalidParameter(format!("noise level {level}")));
    }
    if level == 0.0 {
        return Ok(clean.clone());
    }
    let norm = clean.norm();
    if norm == 0.0 {
        return Err(SimError::ZeroSignal);
    }
    let mut rng = stage_rng(seed, 4);
    let mut e = DenseMatrix::from_fn(clean.rows(), clean.cols(), |_, _| rng.sample(StandardNormal));
    let en = e.norm();
    e.scale_mut(level * norm / en);
    Ok(clean.add(&e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub mesh: MeshGraph,
    pub leadfield: DenseMatrix,
    pub x_true: TemporalField,
    pub b: TemporalField,
    pub noise_level: f64,
    pub seed: u64,
    pub generator: String,
}

/// Parameters for `simulate`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub kind: MeshKind,
    pub n: usize,
    pub t: usize,
    /// Sensor count; `None` picks `default_sensors(n)`.
    pub p: Option<usize>,
    pub sources: SourceSpec,
    pub noise: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            kind: MeshKind::Icosphere,
            n: 200,
            t: 20,
            p: None,
            sources: SourceSpec::default(),
            noise: 0.1,
            seed: 0,
        }
    }
}

pub fn simulate(cfg: &SimConfig) -> Result<Dataset, SimError> {
    let mesh = make_mesh(cfg.kind, cfg.n, cfg.seed)?;
    let p = cfg.p.unwrap_or_else(|| default_sensors(mesh.num_nodes()));
    let leadfield = make_leadfield(&mesh, p, cfg.seed)?;
    let x_true = simulate_sources(&mesh, &cfg.sources, cfg.t, cfg.seed)?;
    let clean = leadfield.matmul(&x_true).map_err(|e| SimError::InvalidParameter(e.to_string()))?;
    let b = add_noise(&clean, cfg.noise, cfg.seed)?;
    let s = &cfg.sources;
    Ok(Dataset {
        generator: format!(
            "{} n={} T={} p={} sources={} amplitude={} speed={} decay={}",
            cfg.kind, cfg.n, cfg.t, p, s.num_sources, s.amplitude, s.propagation_speed, s.decay
        ),
        mesh,
        leadfield,
        x_true,
        b,
        noise_level: cfg.noise,
        seed: cfg.seed,
    })
}

fn meta_err(msg: impl Into<String>) -> SimError {
    SimError::Format(FormatError::Parse {
        line: 0,
        msg: msg.into(),
    })
}

/// Writes `mesh.txt`, `L.dmat`, `Xtrue.dmat`, `B.dmat` and `meta.txt`.
pub fn save_dataset(ds: &Dataset, dir: impl AsRef<Path>) -> Result<(), SimError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(FormatError::from)?;
    write_mesh(dir.join("mesh.txt"), &ds.mesh)?;
    write_dmat(dir.join("L.dmat"), &ds.leadfield)?;
    write_dmat(dir.join("Xtrue.dmat"), &ds.x_true)?;
    write_dmat(dir.join("B.dmat"), &ds.b)?;
    let meta = format!(
        "format_version={FORMAT_VERSION}\nseed={}\nnoise_level={}\ngenerator={}\n",
        ds.seed, ds.noise_level, ds.generator
    );
    fs::write(dir.join("meta.txt"), meta).map_err(FormatError::from)?;
    Ok(())
}

pub fn load_dataset(dir: impl AsRef<Path>) -> Result<Dataset, SimError> {
    let dir = dir.as_ref();
    let text = fs::read_to_string(dir.join("meta.txt")).map_err(FormatError::from)?;
    let mut meta = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            SimError::Format(FormatError::Parse {
                line: i + 1,
                msg: format!("expected key=value, found {line:?}"),
            })
        })?;
        meta.insert(k.trim().to_string(), v.to_string());
    }
    let get = |k: &'static str| meta.get(k).ok_or_else(|| SimError::Format(FormatError::MissingField(k.to_string())));
    let version: u32 = get("format_version")?
        .trim()
        .parse()
        .map_err(|_| meta_err("format_version is not an integer"))?;
    if version != FORMAT_VERSION {
        return Err(SimError::Format(FormatError::Version {
            found: version.to_string(),
            expected: FORMAT_VERSION.to_string(),
        }));
    }
    let seed = get("seed")?.trim().parse().map_err(|_| meta_err("bad seed"))?;
    let noise_level = get("noise_level")?
        .trim()
        .parse()
        .map_err(|_| meta_err("bad noise_level"))?;
    let generator = get("generator")?.clone();

    let ds = Dataset {
        mesh: read_mesh(dir.join("mesh.txt"))?,
        leadfield: read_dmat(dir.join("L.dmat"))?,
        x_true: read_dmat(dir.join("Xtrue.dmat"))?,
        b: read_dmat(dir.join("B.dmat"))?,
        noise_level,
        seed,
        generator,
    };
    let (n, p) = (ds.mesh.num_nodes(), ds.leadfield.rows());
    if ds.leadfield.cols() != n || ds.x_true.rows() != n || ds.b.rows() != p || ds.b.cols() != ds.x_true.cols() {
        return Err(SimError::Format(FormatError::Inconsistent(format!(
            "mesh n = {n}, L {:?}, Xtrue {:?}, B {:?}",
            ds.leadfield.shape(),
            ds.x_true.shape(),
            ds.b.shape()
        ))));
    }
    Ok(ds)
}
