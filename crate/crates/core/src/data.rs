//! Dataset ingestion and synthetic generators.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::primitives::Dataset;
use crate::rng::SeedStream;

pub const DEFAULT_BLOB_CENTERS: usize = 4;
pub const DEFAULT_CENTER_SPREAD: f64 = 10.0;

/// Where a dataset comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSource {
    Csv {
        path: PathBuf,
        #[serde(default)]
        has_header: bool,
        /// Zero-based column dropped before parsing coordinates.
        #[serde(default)]
        label_column: Option<usize>,
    },
    GaussianBlobs {
        n: usize,
        d: usize,
        /// Explicit centers. When empty, `n_centers` centers are drawn
        /// uniformly from `[-center_spread, center_spread]^d`.
        #[serde(default)]
        centers: Vec<Vec<f64>>,
        #[serde(default = "default_centers")]
        n_centers: usize,
        #[serde(default = "default_spread")]
        center_spread: f64,
        sigma: f64,
        seed: u64,
    },
    ConcentricRings {
        n: usize,
        radii: Vec<f64>,
        noise_sigma: f64,
        seed: u64,
    },
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SpecRepr {
    Line(String),
    Table {
        #[serde(flatten)]
        source: DatasetSource,
        #[serde(default)]
        standardize: bool,
    },
}

impl TryFrom<SpecRepr> for DatasetSpec {
    type Error = Error;

    fn try_from(repr: SpecRepr) -> Result<Self> {
        match repr {
            SpecRepr::Line(line) => line.parse(),
            SpecRepr::Table {
                source,
                standardize,
            } => Ok(Self {
                source,
                standardize,
            }),
        }
    }
}

fn default_centers() -> usize {
    DEFAULT_BLOB_CENTERS
}

fn default_spread() -> f64 {
    DEFAULT_CENTER_SPREAD
}

/// Accepts either the one-line string form (see the `FromStr` impl) or a
/// table with a `kind` key.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecRepr")]
pub struct DatasetSpec {
    #[serde(flatten)]
    pub source: DatasetSource,
    /// Z-score every feature after loading.
    #[serde(default)]
    pub standardize: bool,
}

impl DatasetSpec {
    pub fn csv(path: impl Into<PathBuf>) -> Self {
        Self {
            source: DatasetSource::Csv {
                path: path.into(),
                has_header: false,
                label_column: None,
            },
            standardize: false,
        }
    }

    pub fn blobs(n: usize, d: usize, n_centers: usize, sigma: f64, seed: u64) -> Self {
        Self {
            source: DatasetSource::GaussianBlobs {
                n,
                d,
                centers: Vec::new(),
                n_centers,
                center_spread: DEFAULT_CENTER_SPREAD,
                sigma,
                seed,
            },
            standardize: false,
        }
    }

    pub fn rings(n: usize, radii: Vec<f64>, noise_sigma: f64, seed: u64) -> Self {
        Self {
            source: DatasetSource::ConcentricRings {
                n,
                radii,
                noise_sigma,
                seed,
            },
            standardize: false,
        }
    }

    pub fn load(&self) -> Result<Dataset> {
        let data = match &self.source {
            DatasetSource::Csv {
                path,
                has_header,
                label_column,
            } => load_csv(path, *has_header, *label_column)?,
            DatasetSource::GaussianBlobs {
                n,
                d,
                centers,
                n_centers,
                center_spread,
                sigma,
                seed,
            } => {
                let centers = if centers.is_empty() {
                    random_centers(*n_centers, *d, *center_spread, *seed)?
                } else {
                    centers.clone()
                };
                gen_gaussian_blobs(*n, *d, &centers, *sigma, *seed)?
            }
            DatasetSource::ConcentricRings {
                n,
                radii,
                noise_sigma,
                seed,
            } => gen_concentric_rings(*n, radii, *noise_sigma, *seed)?,
        };
        if self.standardize {
            standardize(&data)
        } else {
            Ok(data)
        }
    }
}

/// Compact one-line form used by the `--dataset` flag:
///
/// * `path/to/file.csv[?header][&label=4][&standardize]`
/// * `blobs:n=1000,d=2,centers=4,sigma=1,seed=7[,spread=10][,standardize]`
/// * `rings:n=600,radii=1;5,noise=0.05,seed=1[,standardize]`
impl FromStr for DatasetSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(rest) = s.strip_prefix("blobs:") {
            let kv = KeyValues::parse(rest)?;
            let spec = DatasetSpec {
                source: DatasetSource::GaussianBlobs {
                    n: kv.get("n")?,
                    d: kv.get_or("d", 2)?,
                    centers: Vec::new(),
                    n_centers: kv.get_or("centers", DEFAULT_BLOB_CENTERS)?,
                    center_spread: kv.get_or("spread", DEFAULT_CENTER_SPREAD)?,
                    sigma: kv.get_or("sigma", 1.0)?,
                    seed: kv.get_or("seed", 0)?,
                },
                standardize: kv.flag("standardize"),
            };
            kv.finish()?;
            return Ok(spec);
        }
        if let Some(rest) = s.strip_prefix("rings:") {
            let kv = KeyValues::parse(rest)?;
            let radii = kv
                .raw("radii")
                .ok_or_else(|| Error::invalid("rings need radii=r1;r2;..."))?
                .split(';')
                .map(|r| r.trim().parse::<f64>().map_err(|e| Error::invalid(format!("radius {r:?}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            let spec = DatasetSpec {
                source: DatasetSource::ConcentricRings {
                    n: kv.get("n")?,
                    radii,
                    noise_sigma: kv.get_or("noise", 0.0)?,
                    seed: kv.get_or("seed", 0)?,
                },
                standardize: kv.flag("standardize"),
            };
            kv.finish()?;
            return Ok(spec);
        }
        let (path, query) = s.split_once('?').unwrap_or((s, ""));
        if path.is_empty() {
            return Err(Error::invalid("empty dataset path"));
        }
        let mut has_header = false;
        let mut label_column = None;
        let mut standardize = false;
        for opt in query.split('&').filter(|o| !o.is_empty()) {
            match opt.split_once('=') {
                None if opt == "header" => has_header = true,
                None if opt == "standardize" => standardize = true,
                Some(("label", v)) => {
                    label_column = Some(v.parse().map_err(|e| Error::invalid(format!("label column {v:?}: {e}")))?)
                }
                _ => return Err(Error::invalid(format!("unknown csv option {opt:?}"))),
            }
        }
        Ok(DatasetSpec {
            source: DatasetSource::Csv {
                path: PathBuf::from(path),
                has_header,
                label_column,
            },
            standardize,
        })
    }
}

impl fmt::Display for DatasetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.source {
            DatasetSource::Csv { path, .. } => write!(f, "{}", path.display()),
            DatasetSource::GaussianBlobs { n, d, sigma, seed, .. } => {
                write!(f, "blobs(n={n}, d={d}, sigma={sigma}, seed={seed})")
            }
            DatasetSource::ConcentricRings { n, radii, seed, .. } => {
                write!(f, "rings(n={n}, radii={radii:?}, seed={seed})")
            }
        }
    }
}

struct KeyValues<'a> {
    pairs: Vec<(&'a str, &'a str)>,
    used: std::cell::RefCell<Vec<bool>>,
}

impl<'a> KeyValues<'a> {
    fn parse(s: &'a str) -> Result<Self> {
        let pairs: Vec<(&str, &str)> = s
            .split(',')
            .filter(|p| !p.trim().is_empty())
            .map(|p| {
                let p = p.trim();
                p.split_once('=').unwrap_or((p, ""))
            })
            .collect();
        let used = std::cell::RefCell::new(vec![false; pairs.len()]);
        Ok(Self { pairs, used })
    }

    fn raw(&self, key: &str) -> Option<&'a str> {
        let i = self.pairs.iter().position(|(k, _)| *k == key)?;
        self.used.borrow_mut()[i] = true;
        Some(self.pairs[i].1)
    }

    fn flag(&self, key: &str) -> bool {
        self.raw(key).is_some()
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        let raw = self
            .raw(key)
            .ok_or_else(|| Error::invalid(format!("missing {key}=")))?;
        raw.parse()
            .map_err(|e| Error::invalid(format!("{key}={raw}: {e}")))
    }

    fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        match self.raw(key) {
            None => Ok(default),
            Some(_) => self.get(key),
        }
    }

    fn finish(&self) -> Result<()> {
        let used = self.used.borrow();
        match self.pairs.iter().zip(used.iter()).find(|(_, &u)| !u) {
            Some(((k, _), _)) => Err(Error::invalid(format!("unknown dataset option {k:?}"))),
            None => Ok(()),
        }
    }
}

/// Reads a comma-separated numeric matrix. Rows become points in file
/// order; `label_column` (zero-based) is dropped.
pub fn load_csv(path: impl AsRef<Path>, has_header: bool, label_column: Option<usize>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, has_header, label_column)
}

pub fn read_csv(reader: impl std::io::Read, has_header: bool, label_column: Option<usize>) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut flat = Vec::new();
    let mut width: Option<usize> = None;
    let mut rows = 0usize;
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Format(e.to_string()))?;
        let line = record.position().map_or(rows + 1, |p| p.line() as usize);
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(Error::Format(format!(
                    "line {line} has {} columns, expected {w}",
                    record.len()
                )))
            }
            Some(_) => {}
        }
        if let Some(label) = label_column {
            if label >= record.len() {
                return Err(Error::Format(format!(
                    "label column {label} out of range for {} columns",
                    record.len()
                )));
            }
        }
        for (col, cell) in record.iter().enumerate() {
            if Some(col) == label_column {
                continue;
            }
            let value: f64 = cell.parse().map_err(|_| Error::Parse {
                row: line,
                column: col + 1,
                message: format!("{cell:?} is not a number"),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    row: line,
                    column: col + 1,
                    message: format!("{cell:?} is not finite"),
                });
            }
            flat.push(value);
        }
        rows += 1;
    }
    let dim = width.unwrap_or(0) - usize::from(label_column.is_some());
    if rows == 0 || dim == 0 {
        return Err(Error::Format("no numeric data".into()));
    }
    Dataset::from_flat(flat, rows, dim)
}

/// Writes `data` as headerless CSV, full precision.
pub fn write_csv(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e.into()))?;
    for row in data.rows() {
        w.write_record(row.iter().map(|v| v.to_string()))
            .map_err(|e| Error::io(path, e.into()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Per-feature z-scores: mean 0 and sample standard deviation 1. Constant
/// features are centered only.
pub fn standardize(data: &Dataset) -> Result<Dataset> {
    let (n, dim) = (data.len(), data.dim());
    if n < 2 {
        return Err(Error::invalid("standardizing needs at least 2 rows"));
    }
    let mut flat = data.as_flat().to_vec();
    for j in 0..dim {
        let mean = data.rows().map(|r| r[j]).sum::<f64>() / n as f64;
        let ss: f64 = data.rows().map(|r| (r[j] - mean).powi(2)).sum();
        let sd = (ss / (n - 1) as f64).sqrt();
        for i in 0..n {
            let v = flat[i * dim + j] - mean;
            flat[i * dim + j] = if sd > 0.0 { v / sd } else { v };
        }
    }
    Dataset::from_flat(flat, n, dim)
}

/// Centers drawn uniformly from `[-spread, spread]^d`, from a stream
/// separate from the one that draws the points.
pub fn random_centers(count: usize, d: usize, spread: f64, seed: u64) -> Result<Vec<Vec<f64>>> {
    if count == 0 || d == 0 || !(spread.is_finite() && spread > 0.0) {
        return Err(Error::invalid("centers need count >= 1, d >= 1 and a positive spread"));
    }
    let mut rng = SeedStream::new(seed).child(u64::MAX).rng();
    Ok((0..count)
        .map(|_| (0..d).map(|_| rng.random_range(-spread..=spread)).collect())
        .collect())
}

/// `n` points assigned round-robin to `centers`, each displaced by
/// isotropic Gaussian noise of standard deviation `sigma`.
pub fn gen_gaussian_blobs(n: usize, d: usize, centers: &[Vec<f64>], sigma: f64, seed: u64) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::invalid("generated datasets need n >= 2"));
    }
    if centers.is_empty() || centers.iter().any(|c| c.len() != d) {
        return Err(Error::invalid(format!("need at least one center of dimension {d}")));
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::invalid("sigma must be positive"));
    }
    let mut rng = SeedStream::new(seed).rng();
    let mut flat = Vec::with_capacity(n * d);
    for i in 0..n {
        for &c in &centers[i % centers.len()] {
            flat.push(c + sigma * rng.sample::<f64, _>(StandardNormal));
        }
    }
    Dataset::from_flat(flat, n, d)
}

/// 2-d points assigned round-robin to rings of the given radii, at uniform
/// random angles, with Gaussian radial noise.
pub fn gen_concentric_rings(n: usize, radii: &[f64], noise_sigma: f64, seed: u64) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::invalid("generated datasets need n >= 2"));
    }
    if radii.is_empty() || radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(Error::invalid("radii must be positive"));
    }
    let mut sorted = radii.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::invalid("radii must be distinct"));
    }
    if !(noise_sigma.is_finite() && noise_sigma >= 0.0) {
        return Err(Error::invalid("noise sigma must be non-negative"));
    }
    let mut rng = SeedStream::new(seed).rng();
    let mut flat = Vec::with_capacity(2 * n);
    for i in 0..n {
        let theta = rng.random_range(0.0..std::f64::consts::TAU);
        let noise: f64 = rng.sample(StandardNormal);
        let r = radii[i % radii.len()] + noise_sigma * noise;
        flat.push(r * theta.cos());
        flat.push(r * theta.sin());
    }
    Dataset::from_flat(flat, n, 2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn parses_a_small_matrix() {
        let f = write_tmp("1,2\n3,4\n");
        let data = load_csv(f.path(), false, None).unwrap();
        assert_eq!((data.len(), data.dim()), (2, 2));
        assert_eq!(data.as_flat(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn standardized_columns() {
        let f = write_tmp("1,2\n3,4\n");
        let spec: DatasetSpec = format!("{}?standardize", f.path().display()).parse().unwrap();
        let data = spec.load().unwrap();
        let big = write_tmp(&(0..50).map(|i| format!("{},{}\n", i * i, 3 * i + 7)).collect::<String>());
        let big = standardize(&load_csv(big.path(), false, None).unwrap()).unwrap();
        for ds in [data, big] {
            for j in 0..ds.dim() {
                let col: Vec<f64> = ds.rows().map(|r| r[j]).collect();
                let mean = col.iter().sum::<f64>() / col.len() as f64;
                let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (col.len() - 1) as f64).sqrt();
                assert!(mean.abs() < 1e-9 && (sd - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn drops_the_label_column() {
        let body: String = (0..150)
            .map(|i| format!("{}.1,{}.2,{}.3,{}.4,class{}\n", i, i, i, i, i % 3))
            .collect();
        let f = write_tmp(&format!("a,b,c,d,label\n{body}"));
        let data = load_csv(f.path(), true, Some(4)).unwrap();
        assert_eq!((data.len(), data.dim()), (150, 4));
        assert_eq!(data.point(2), &[2.1, 2.2, 2.3, 2.4]);
    }

    #[test]
    fn reports_bad_cells_and_ragged_rows() {
        let f = write_tmp("1,2\n3,x\n");
        match load_csv(f.path(), false, None) {
            Err(Error::Parse { row, column, .. }) => assert_eq!((row, column), (2, 2)),
            other => panic!("{other:?}"),
        }
        let f = write_tmp("1,2\n3\n");
        assert!(matches!(load_csv(f.path(), false, None), Err(Error::Format(_))));
        let f = write_tmp("1,nan\n");
        assert!(matches!(load_csv(f.path(), false, None), Err(Error::Parse { .. })));
        assert!(matches!(load_csv("/nonexistent/x.csv", false, None), Err(Error::Io { .. })));
        let f = write_tmp("");
        assert!(load_csv(f.path(), false, None).is_err());
    }

    #[test]
    fn blob_mean_is_near_the_center() {
        let n = 10_000;
        let data = gen_gaussian_blobs(n, 3, &[vec![0.0; 3]], 1.0, 42).unwrap();
        for j in 0..3 {
            let mean = data.rows().map(|r| r[j]).sum::<f64>() / n as f64;
            assert!(mean.abs() < 3.0 / (n as f64).sqrt(), "coordinate {j} mean {mean}");
        }
    }

    #[test]
    fn blobs_are_sized_and_seeded() {
        let centers = [vec![0.0, 0.0], vec![5.0, 5.0]];
        assert_eq!(gen_gaussian_blobs(2, 2, &centers, 1.0, 0).unwrap().len(), 2);
        let a = gen_gaussian_blobs(100, 2, &centers, 0.5, 9).unwrap();
        let b = gen_gaussian_blobs(100, 2, &centers, 0.5, 9).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, gen_gaussian_blobs(100, 2, &centers, 0.5, 10).unwrap());
        assert!(gen_gaussian_blobs(1, 2, &centers, 1.0, 0).is_err());
        assert!(gen_gaussian_blobs(10, 2, &[], 1.0, 0).is_err());
        assert!(gen_gaussian_blobs(10, 2, &centers, 0.0, 0).is_err());
        assert!(gen_gaussian_blobs(10, 3, &centers, 1.0, 0).is_err());
    }

    #[test]
    fn noiseless_ring_is_a_circle() {
        let data = gen_concentric_rings(500, &[1.0], 0.0, 3).unwrap();
        for p in data.rows() {
            assert!(((p[0] * p[0] + p[1] * p[1]).sqrt() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn two_rings_form_separate_bands() {
        let data = gen_concentric_rings(1000, &[1.0, 5.0], 0.05, 4).unwrap();
        let mut radii: Vec<f64> = data.rows().map(|p| p[0].hypot(p[1])).collect();
        radii.sort_by(f64::total_cmp);
        let (gap_at, gap) = radii
            .windows(2)
            .enumerate()
            .map(|(i, w)| (i, w[1] - w[0]))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        assert!(gap > 3.0, "largest gap {gap}");
        assert_eq!(gap_at + 1, 500);
        assert_eq!(data, gen_concentric_rings(1000, &[1.0, 5.0], 0.05, 4).unwrap());
        assert!(gen_concentric_rings(10, &[1.0, 1.0], 0.0, 0).is_err());
        assert!(gen_concentric_rings(10, &[-1.0], 0.0, 0).is_err());
    }

    #[test]
    fn spec_strings() {
        let spec: DatasetSpec = "blobs:n=1000,d=2,centers=4,sigma=1,seed=7".parse().unwrap();
        let data = spec.load().unwrap();
        assert_eq!((data.len(), data.dim()), (1000, 2));
        let rings: DatasetSpec = "rings:n=60,radii=1;3,noise=0.1,seed=2".parse().unwrap();
        assert_eq!(rings.load().unwrap().len(), 60);
        let csv: DatasetSpec = "data/iris.csv?header&label=4".parse().unwrap();
        assert_eq!(
            csv.source,
            DatasetSource::Csv {
                path: "data/iris.csv".into(),
                has_header: true,
                label_column: Some(4)
            }
        );
        assert!("blobs:n=10,bogus=1".parse::<DatasetSpec>().is_err());
        assert!("blobs:d=2".parse::<DatasetSpec>().is_err());
        assert!("x.csv?what".parse::<DatasetSpec>().is_err());
    }

    #[test]
    fn written_datasets_reload_exactly() {
        let data = gen_gaussian_blobs(50, 3, &[vec![1.0, 2.0, 3.0]], 0.7, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("blobs.csv");
        write_csv(&data, &path).unwrap();
        assert_eq!(load_csv(&path, false, None).unwrap(), data);
    }
}
