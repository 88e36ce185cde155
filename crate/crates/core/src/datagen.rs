//! CSV/label-file I/O and seeded synthetic datasets.
//!
//! CSV layout: one row per point, numeric feature columns, and optionally a
//! header row. When the header names the final column `label`, that column
//! holds integer class ids.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fission_core::Partition;
use crate::metricspace::Dataset;
use crate::rng::SeededRng;

/// Write `bytes` to a sibling temporary file, then rename it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::Invalid(format!("{} is not a file path", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(format!(".{}.tmp", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    let result = fs::File::create(&tmp)
        .and_then(|mut f| {
            f.write_all(bytes)?;
            f.sync_all()
        })
        .and_then(|()| fs::rename(&tmp, path));
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

fn parse_cell(cell: &str, row: usize, column: usize) -> Result<f64> {
    let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
        row,
        column,
        message: format!("{cell:?} is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            row,
            column,
            message: format!("{cell:?} is not finite"),
        });
    }
    Ok(v)
}

/// Parse a dataset from CSV text. Rows and columns in errors are 1-based.
pub fn parse_csv(name: &str, text: &str) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut records = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            row: i + 1,
            column: 0,
            message: e.to_string(),
        })?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        records.push((rec.position().map_or(i as u64 + 1, |p| p.line()) as usize, rec));
    }
    let Some((_, first)) = records.first() else {
        return Err(Error::Invalid(format!("{name}: no data rows")));
    };
    let has_header = first.iter().any(|c| c.parse::<f64>().is_err());
    let has_label = has_header && first.iter().last() == Some("label");
    let width = first.len();
    let body = if has_header { &records[1..] } else { &records[..] };
    if body.is_empty() {
        return Err(Error::Invalid(format!("{name}: no data rows")));
    }
    let dim = if has_label { width - 1 } else { width };
    if dim == 0 {
        return Err(Error::Invalid(format!("{name}: no feature columns")));
    }

    let mut coords = Vec::with_capacity(body.len() * dim);
    let mut raw_labels = Vec::new();
    for (line, rec) in body {
        if rec.len() != width {
            return Err(Error::Parse {
                row: *line,
                column: rec.len().min(width) + 1,
                message: format!("expected {width} columns, found {}", rec.len()),
            });
        }
        for (c, cell) in rec.iter().take(dim).enumerate() {
            coords.push(parse_cell(cell, *line, c + 1)?);
        }
        if has_label {
            let cell = &rec[dim];
            let label: i64 = cell.parse().map_err(|_| Error::Parse {
                row: *line,
                column: width,
                message: format!("label {cell:?} is not an integer"),
            })?;
            raw_labels.push(label);
        }
    }
    let ds = Dataset::from_flat(name, dim, coords)?;
    if has_label {
        ds.with_labels(compact_labels(&raw_labels))
    } else {
        Ok(ds)
    }
}

/// Map arbitrary integer ids onto `0..c`, preserving their order.
fn compact_labels(raw: &[i64]) -> Vec<usize> {
    let ids: BTreeMap<i64, usize> = {
        let mut distinct: Vec<i64> = raw.to_vec();
        distinct.sort_unstable();
        distinct.dedup();
        distinct.into_iter().enumerate().map(|(i, v)| (v, i)).collect()
    };
    raw.iter().map(|v| ids[v]).collect()
}

pub fn load_csv(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map_or_else(|| "dataset".to_string(), |s| s.to_string_lossy().into_owned());
    parse_csv(&name, &text)
}

/// CSV text for a dataset. Values use the shortest decimal form that parses
/// back to the same double.
pub fn to_csv(ds: &Dataset) -> String {
    let mut out = String::new();
    let mut header: Vec<String> = (0..ds.dim()).map(|c| format!("x{c}")).collect();
    if ds.labels().is_some() {
        header.push("label".into());
    }
    out.push_str(&header.join(","));
    out.push('\n');
    for (i, p) in ds.points().enumerate() {
        let mut cells: Vec<String> = p.iter().map(|v| format!("{v:?}")).collect();
        if let Some(labels) = ds.labels() {
            cells.push(labels[i].to_string());
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn save_csv(ds: &Dataset, path: &Path) -> Result<()> {
    write_atomic(path, to_csv(ds).as_bytes())
}

/// One label per line, in point order.
pub fn labels_text(part: &Partition) -> Result<String> {
    if part.is_empty() {
        return Err(Error::Invalid("cannot save an empty partition".into()));
    }
    let mut out = String::with_capacity(part.len() * 3);
    for l in &part.labels {
        out.push_str(&l.to_string());
        out.push('\n');
    }
    Ok(out)
}

pub fn save_labels(part: &Partition, path: &Path) -> Result<()> {
    write_atomic(path, labels_text(part)?.as_bytes())
}

/// Read a label file (one integer per line) as a partition.
pub fn load_labels(path: &Path) -> Result<Partition> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut labels = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v: i64 = line.parse().map_err(|_| Error::Parse {
            row: i + 1,
            column: 1,
            message: format!("{line:?} is not an integer label"),
        })?;
        labels.push(v);
    }
    if labels.is_empty() {
        return Err(Error::Invalid(format!("{}: no labels", path.display())));
    }
    Partition::from_labels(compact_labels(&labels))
}

fn default_seed() -> u64 {
    1
}

/// A Gaussian component: `count` points around `center` with standard
/// deviation `spread` per coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Blob {
    pub center: Vec<f64>,
    pub count: usize,
    pub spread: f64,
}

impl Blob {
    fn new(center: &[f64], count: usize, spread: f64) -> Self {
        Self {
            center: center.to_vec(),
            count,
            spread,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.count == 0 || self.center.is_empty() {
            return Err(Error::Invalid("blob needs count >= 1 and a center".into()));
        }
        positive("blob spread", self.spread)
    }

    fn sample(&self, rng: &mut SeededRng, out: &mut Vec<Vec<f64>>) {
        for _ in 0..self.count {
            out.push(gaussian_point(rng, &self.center, self.spread));
        }
    }
}

fn positive(what: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Invalid(format!("{what} must be > 0, got {v}")))
    }
}

fn gaussian_point(rng: &mut SeededRng, center: &[f64], spread: f64) -> Vec<f64> {
    let mut p = Vec::with_capacity(center.len());
    while p.len() < center.len() {
        let (a, b) = rng.normal_pair();
        for z in [a, b] {
            if p.len() < center.len() {
                p.push(center[p.len()] + spread * z);
            }
        }
    }
    p
}

/// Synthetic dataset recipe. Every field except `kind` has a default, so
/// `{"kind": "imbalance", "seed": 3}` is a complete document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GenSpec {
    /// `k` Gaussian blobs with centres on a circle, adjacent centres
    /// `separation` apart (or at explicit `centers`).
    Blobs {
        #[serde(default = "default_seed")]
        seed: u64,
        #[serde(default = "blobs_k")]
        k: usize,
        #[serde(default = "blobs_count")]
        points_per_cluster: usize,
        #[serde(default = "one")]
        spread: f64,
        #[serde(default = "blobs_separation")]
        separation: f64,
        #[serde(default = "two")]
        dim: usize,
        #[serde(default)]
        centers: Option<Vec<Vec<f64>>>,
    },
    /// A small tight cluster next to a wide sparse one.
    Imbalance {
        #[serde(default = "default_seed")]
        seed: u64,
        #[serde(default = "imbalance_dense")]
        dense: Blob,
        #[serde(default = "imbalance_sparse")]
        sparse: Blob,
    },
    /// A uniform annulus plus Gaussian blobs, one inside the ring.
    AnnulusBlobs {
        #[serde(default = "default_seed")]
        seed: u64,
        #[serde(default = "annulus_count")]
        annulus_count: usize,
        #[serde(default = "annulus_center")]
        center: Vec<f64>,
        #[serde(default = "annulus_inner")]
        inner_radius: f64,
        #[serde(default = "annulus_outer")]
        outer_radius: f64,
        #[serde(default = "annulus_blobs")]
        blobs: Vec<Blob>,
    },
    /// A `rows x cols` lattice with the given spacing; a single class.
    GridLine {
        #[serde(default = "default_seed")]
        seed: u64,
        #[serde(default = "one_usize")]
        rows: usize,
        #[serde(default = "grid_cols")]
        cols: usize,
        #[serde(default = "one")]
        spacing: f64,
    },
    /// Dense families joined or separated by a sparser bridge: two isolated
    /// blobs plus two blobs connected by a jittered line of points. Bridge
    /// points take the class of the nearer bridged blob.
    BridgeFamilies {
        #[serde(default = "default_seed")]
        seed: u64,
        #[serde(default = "bridge_isolated")]
        isolated: Vec<Blob>,
        #[serde(default = "bridge_left")]
        left: Blob,
        #[serde(default = "bridge_right")]
        right: Blob,
        #[serde(default = "bridge_count")]
        bridge_count: usize,
        #[serde(default = "bridge_jitter")]
        bridge_jitter: f64,
    },
}

fn one() -> f64 {
    1.0
}
fn two() -> usize {
    2
}
fn one_usize() -> usize {
    1
}
fn blobs_k() -> usize {
    5
}
fn blobs_count() -> usize {
    100
}
fn blobs_separation() -> f64 {
    20.0
}
fn imbalance_dense() -> Blob {
    Blob::new(&[0.0, 0.0], 31, 0.5)
}
fn imbalance_sparse() -> Blob {
    Blob::new(&[40.0, 40.0], 70, 5.0)
}
fn annulus_count() -> usize {
    1661
}
fn annulus_center() -> Vec<f64> {
    vec![0.0, 0.0]
}
fn annulus_inner() -> f64 {
    8.0
}
fn annulus_outer() -> f64 {
    10.0
}
fn annulus_blobs() -> Vec<Blob> {
    vec![
        Blob::new(&[0.0, 0.0], 267, 1.5),
        Blob::new(&[22.0, 0.0], 267, 1.5),
        Blob::new(&[0.0, 22.0], 266, 1.5),
    ]
}
fn grid_cols() -> usize {
    10
}
fn bridge_isolated() -> Vec<Blob> {
    vec![
        Blob::new(&[7.0, 5.0], 100, 0.4),
        Blob::new(&[7.0, -5.0], 100, 0.4),
    ]
}
fn bridge_left() -> Blob {
    Blob::new(&[0.0, 0.0], 200, 1.4)
}
fn bridge_right() -> Blob {
    Blob::new(&[14.0, 0.0], 200, 1.4)
}
fn bridge_count() -> usize {
    140
}
fn bridge_jitter() -> f64 {
    0.05
}

impl GenSpec {
    pub fn seed(&self) -> u64 {
        match *self {
            GenSpec::Blobs { seed, .. }
            | GenSpec::Imbalance { seed, .. }
            | GenSpec::AnnulusBlobs { seed, .. }
            | GenSpec::GridLine { seed, .. }
            | GenSpec::BridgeFamilies { seed, .. } => seed,
        }
    }

    pub fn with_seed(mut self, new_seed: u64) -> Self {
        match &mut self {
            GenSpec::Blobs { seed, .. }
            | GenSpec::Imbalance { seed, .. }
            | GenSpec::AnnulusBlobs { seed, .. }
            | GenSpec::GridLine { seed, .. }
            | GenSpec::BridgeFamilies { seed, .. } => *seed = new_seed,
        }
        self
    }

    pub fn kind(&self) -> &'static str {
        match self {
            GenSpec::Blobs { .. } => "blobs",
            GenSpec::Imbalance { .. } => "imbalance",
            GenSpec::AnnulusBlobs { .. } => "annulus_blobs",
            GenSpec::GridLine { .. } => "grid_line",
            GenSpec::BridgeFamilies { .. } => "bridge_families",
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            row: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Default recipe of the given kind.
    pub fn default_of(kind: &str, seed: u64) -> Result<Self> {
        Self::from_json(&format!(r#"{{"kind": "{kind}", "seed": {seed}}}"#))
    }
}

/// Build the labelled dataset a recipe describes. Identical recipes give
/// identical datasets.
pub fn generate(spec: &GenSpec) -> Result<Dataset> {
    let mut rng = SeededRng::new(spec.seed());
    let mut points: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    fn push_blob(
        blob: &Blob,
        class: usize,
        rng: &mut SeededRng,
        points: &mut Vec<Vec<f64>>,
        labels: &mut Vec<usize>,
    ) {
        blob.sample(rng, points);
        labels.extend(std::iter::repeat_n(class, blob.count));
    }

    match spec {
        GenSpec::Blobs {
            k,
            points_per_cluster,
            spread,
            separation,
            dim,
            centers,
            ..
        } => {
            let centers = match centers {
                Some(c) => {
                    if c.is_empty() || c.iter().any(|p| p.len() != c[0].len() || p.is_empty()) {
                        return Err(Error::Invalid("blob centers must share a nonzero dimension".into()));
                    }
                    c.clone()
                }
                None => {
                    if *k == 0 || *dim < 2 {
                        return Err(Error::Invalid("blobs need k >= 1 and dim >= 2".into()));
                    }
                    positive("separation", *separation)?;
                    circle_centers(*k, *separation, *dim)
                }
            };
            for (class, c) in centers.iter().enumerate() {
                let blob = Blob::new(c, *points_per_cluster, *spread);
                blob.validate()?;
                push_blob(&blob, class, &mut rng, &mut points, &mut labels);
            }
        }
        GenSpec::Imbalance { dense, sparse, .. } => {
            dense.validate()?;
            sparse.validate()?;
            push_blob(dense, 0, &mut rng, &mut points, &mut labels);
            push_blob(sparse, 1, &mut rng, &mut points, &mut labels);
        }
        GenSpec::AnnulusBlobs {
            annulus_count,
            center,
            inner_radius,
            outer_radius,
            blobs,
            ..
        } => {
            if *annulus_count == 0 || center.len() != 2 {
                return Err(Error::Invalid("annulus needs count >= 1 and a 2-D center".into()));
            }
            positive("outer_radius", *outer_radius)?;
            if !(*inner_radius >= 0.0 && inner_radius < outer_radius) {
                return Err(Error::Invalid(format!(
                    "need 0 <= inner_radius < outer_radius, got {inner_radius} and {outer_radius}"
                )));
            }
            let (r2_lo, r2_hi) = (inner_radius * inner_radius, outer_radius * outer_radius);
            for _ in 0..*annulus_count {
                // Inverse CDF of the radius for uniform density over the ring.
                let radius = (r2_lo + rng.uniform() * (r2_hi - r2_lo)).sqrt();
                let angle = rng.range(0.0, 2.0 * std::f64::consts::PI);
                points.push(vec![
                    center[0] + radius * angle.cos(),
                    center[1] + radius * angle.sin(),
                ]);
            }
            labels.extend(std::iter::repeat_n(0, *annulus_count));
            for (i, blob) in blobs.iter().enumerate() {
                blob.validate()?;
                if blob.center.len() != 2 {
                    return Err(Error::Invalid("annulus blobs must be 2-D".into()));
                }
                push_blob(blob, i + 1, &mut rng, &mut points, &mut labels);
            }
        }
        GenSpec::GridLine {
            rows,
            cols,
            spacing,
            ..
        } => {
            if *rows == 0 || *cols == 0 {
                return Err(Error::Invalid("grid needs rows, cols >= 1".into()));
            }
            positive("spacing", *spacing)?;
            for r in 0..*rows {
                for c in 0..*cols {
                    points.push(vec![c as f64 * spacing, r as f64 * spacing]);
                }
            }
            labels.extend(std::iter::repeat_n(0, rows * cols));
        }
        GenSpec::BridgeFamilies {
            isolated,
            left,
            right,
            bridge_count,
            bridge_jitter,
            ..
        } => {
            for blob in isolated.iter().chain([left, right]) {
                blob.validate()?;
                if blob.center.len() != 2 {
                    return Err(Error::Invalid("bridge families are 2-D".into()));
                }
            }
            if *bridge_jitter < 0.0 {
                return Err(Error::Invalid("bridge_jitter must be >= 0".into()));
            }
            for (i, blob) in isolated.iter().enumerate() {
                push_blob(blob, i, &mut rng, &mut points, &mut labels);
            }
            let (lc, rc) = (isolated.len(), isolated.len() + 1);
            push_blob(left, lc, &mut rng, &mut points, &mut labels);
            push_blob(right, rc, &mut rng, &mut points, &mut labels);
            // Evenly spaced along the open segment between the two centres.
            for i in 0..*bridge_count {
                let s = (i as f64 + 1.0) / (*bridge_count as f64 + 1.0);
                let (jx, jy) = rng.normal_pair();
                points.push(vec![
                    left.center[0] + s * (right.center[0] - left.center[0]) + bridge_jitter * jx,
                    left.center[1] + s * (right.center[1] - left.center[1]) + bridge_jitter * jy,
                ]);
                labels.push(if s < 0.5 { lc } else { rc });
            }
        }
    }

    Dataset::new(spec.kind(), points)?.with_labels(labels)
}

/// `k` centres on a circle in the first two coordinates, adjacent centres
/// `separation` apart.
fn circle_centers(k: usize, separation: f64, dim: usize) -> Vec<Vec<f64>> {
    if k == 1 {
        return vec![vec![0.0; dim]];
    }
    let radius = separation / (2.0 * (std::f64::consts::PI / k as f64).sin());
    (0..k)
        .map(|i| {
            let angle = 2.0 * std::f64::consts::PI * i as f64 / k as f64;
            let mut c = vec![0.0; dim];
            c[0] = radius * angle.cos();
            c[1] = radius * angle.sin();
            c
        })
        .collect()
}
