//! Synthetic regression datasets, noise samplers and target corruption.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use num_traits::Float;
use rand::distr::{Distribution, Open01, Uniform};
use rand::seq::index;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Copy> Matrix<T> {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::usage(format!(
                "matrix of {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::usage("ragged rows"));
        }
        let data = rows.iter().flatten().copied().collect();
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[T]> {
        // chunks_exact(0) panics, so zero-width matrices yield empty rows
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        self.iter_rows().map(|r| r[j]).collect()
    }

    /// New matrix holding the given rows in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }
}

/// Corruption applied to the training targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Noise {
    #[default]
    None,
    /// Additive `N(0, σ²)`.
    Gaussian { sigma: f64 },
    /// Additive `Cauchy(x0, τ)`.
    Cauchy {
        #[serde(default)]
        x0: f64,
        tau: f64,
    },
    /// Replace a proportion of targets with uniform draws over an interval
    /// `range_multiplier` times wider than the target range.
    UniformOutlier {
        proportion: f64,
        #[serde(default = "default_range_multiplier")]
        range_multiplier: f64,
    },
}

fn default_range_multiplier() -> f64 {
    500.0
}

impl Noise {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Noise::None => Ok(()),
            Noise::Gaussian { sigma } => check_positive("sigma", sigma),
            Noise::Cauchy { x0, tau } => {
                if !x0.is_finite() {
                    return Err(Error::usage("Cauchy location must be finite"));
                }
                check_positive("tau", tau)
            }
            Noise::UniformOutlier {
                proportion,
                range_multiplier,
            } => {
                if !(0.0..=1.0).contains(&proportion) {
                    return Err(Error::usage(format!(
                        "outlier proportion must lie in [0, 1], got {proportion}"
                    )));
                }
                check_positive("range_multiplier", range_multiplier)
            }
        }
    }

    /// The swept parameter of this noise family, `0` for no noise.
    pub fn level(&self) -> f64 {
        match *self {
            Noise::None => 0.0,
            Noise::Gaussian { sigma } => sigma,
            Noise::Cauchy { tau, .. } => tau,
            Noise::UniformOutlier { proportion, .. } => proportion,
        }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            Noise::None => "none",
            Noise::Gaussian { .. } => "gaussian",
            Noise::Cauchy { .. } => "cauchy",
            Noise::UniformOutlier { .. } => "uniform_outlier",
        }
    }

    /// Returns a corrupted copy of `data`; the input is never modified.
    pub fn apply<T: Float>(&self, data: &Dataset<T>, seed: u64) -> Result<Dataset<T>> {
        match *self {
            Noise::None => Ok(data.clone()),
            Noise::Gaussian { .. } | Noise::Cauchy { .. } => inject_additive(data, self, seed),
            Noise::UniformOutlier {
                proportion,
                range_multiplier,
            } => inject_outliers(data, proportion, range_multiplier, seed),
        }
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::usage(format!("{name} must be positive and finite, got {v}")))
    }
}

/// One corruption step recorded on a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseRecord {
    pub noise: Noise,
    pub seed: u64,
    /// Number of targets that were changed.
    pub corrupted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Provenance {
    /// Generator id or source file.
    pub source: String,
    pub seed: Option<u64>,
    pub noise: Vec<NoiseRecord>,
}

/// Feature matrix, target vector and where they came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset<T> {
    pub x: Matrix<T>,
    pub y: Vec<T>,
    pub feature_names: Vec<String>,
    pub target_name: String,
    pub meta: Provenance,
}

impl<T: Float> Dataset<T> {
    pub fn new(x: Matrix<T>, y: Vec<T>, feature_names: Vec<String>, target_name: String) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::usage(format!(
                "{} feature rows but {} targets",
                x.rows(),
                y.len()
            )));
        }
        if feature_names.len() != x.cols() {
            return Err(Error::usage("feature name count does not match column count"));
        }
        if x.as_slice().iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::domain("dataset entries must be finite"));
        }
        Ok(Dataset {
            x,
            y,
            feature_names,
            target_name,
            meta: Provenance::default(),
        })
    }

    pub fn with_meta(mut self, meta: Provenance) -> Self {
        self.meta = meta;
        self
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    /// Rows at `indices`, in that order. Provenance is carried over.
    pub fn select(&self, indices: &[usize]) -> Self {
        Dataset {
            x: self.x.select_rows(indices),
            y: indices.iter().map(|&i| self.y[i]).collect(),
            feature_names: self.feature_names.clone(),
            target_name: self.target_name.clone(),
            meta: self.meta.clone(),
        }
    }

    /// Writes a header row (features, then target) followed by one row per
    /// sample. Values use the shortest representation that parses back to the
    /// same number.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = self.feature_names.clone();
        header.push(self.target_name.clone());
        out.write_record(&header)?;
        let mut record = Vec::with_capacity(header.len());
        for (row, y) in self.x.iter_rows().zip(&self.y) {
            record.clear();
            record.extend(row.iter().chain(std::iter::once(y)).map(|v| fmt_value(*v)));
            out.write_record(&record)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// Reads an all-numeric CSV whose last column is the target.
    pub fn read_csv<R: Read>(r: R, source: &str) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let Some((target_name, feature_names)) = header.split_last() else {
            return Err(Error::usage("CSV has no columns"));
        };
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != header.len() {
                return Err(Error::usage(format!("row {} has {} fields", i + 1, rec.len())));
            }
            for (j, cell) in rec.iter().enumerate() {
                let v: f64 = cell.trim().parse().map_err(|_| Error::BadCell {
                    row: i + 1,
                    column: header[j].clone(),
                    message: format!("cannot parse \"{cell}\" as a number"),
                })?;
                let v = T::from(v).unwrap();
                if j + 1 == header.len() {
                    y.push(v);
                } else {
                    x.push(v);
                }
            }
        }
        let x = Matrix::from_vec(y.len(), feature_names.len(), x)?;
        let ds = Dataset::new(x, y, feature_names.to_vec(), target_name.clone())?;
        Ok(ds.with_meta(Provenance {
            source: source.to_string(),
            ..Provenance::default()
        }))
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(file), &path.display().to_string())
    }
}

fn fmt_value<T: Float>(v: T) -> String {
    format!("{}", v.to_f64().unwrap())
}

/// Uniform inputs on `[lo, hi]` per column, one row per sample.
pub fn sample_inputs<T: Float>(ranges: &[(f64, f64)], n: usize, seed: u64) -> Result<Matrix<T>> {
    if n == 0 {
        return Err(Error::usage("sample count must be positive"));
    }
    let dists = ranges
        .iter()
        .map(|&(lo, hi)| {
            if lo.is_finite() && hi.is_finite() && lo < hi {
                Uniform::new_inclusive(lo, hi).map_err(|e| Error::usage(e.to_string()))
            } else {
                Err(Error::usage(format!("invalid range [{lo}, {hi}]")))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rng = seed::rng(seed);
    let mut data = Vec::with_capacity(n * ranges.len());
    for _ in 0..n {
        for d in &dists {
            data.push(T::from(d.sample(&mut rng)).unwrap());
        }
    }
    Matrix::from_vec(n, ranges.len(), data)
}

/// `e^{x1} − sin x2`.
pub fn target_y1<T: Float>(x1: T, x2: T) -> T {
    x1.exp() - x2.sin()
}

/// `0.03 (sin²x1 (x2−2)(x3−8)(x4−11) + cos²x5 (x6−6)(x7−6)(x8+5)²)`.
pub fn target_y2<T: Float>(x: &[T; 8]) -> T {
    let k = |v: f64| T::from(v).unwrap();
    let s = x[0].sin();
    let c = x[4].cos();
    let x8 = x[7] + k(5.0);
    k(0.03)
        * (s * s * (x[1] - k(2.0)) * (x[2] - k(8.0)) * (x[3] - k(11.0))
            + c * c * (x[5] - k(6.0)) * (x[6] - k(6.0)) * x8 * x8)
}

/// The two handcrafted regression problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Synthetic {
    /// Two inputs, smooth exponential trend plus a sine.
    #[serde(rename = "hc2")]
    Hc2,
    /// Eight inputs, quickly oscillating products.
    #[serde(rename = "hc8")]
    Hc8,
}

const HC2_RANGES: [(f64, f64); 2] = [(-6.0, 2.0), (-3.0, 9.0)];
const HC8_RANGES: [(f64, f64); 8] = [
    (-6.0, 17.0),
    (-7.0, 20.0),
    (-2.0, 17.0),
    (-6.0, 10.0),
    (-10.0, 16.0),
    (-5.0, 10.0),
    (-15.0, 9.0),
    (-1.0, 14.0),
];

impl Synthetic {
    pub fn name(self) -> &'static str {
        match self {
            Synthetic::Hc2 => "hc2",
            Synthetic::Hc8 => "hc8",
        }
    }

    pub fn ranges(self) -> &'static [(f64, f64)] {
        match self {
            Synthetic::Hc2 => &HC2_RANGES,
            Synthetic::Hc8 => &HC8_RANGES,
        }
    }

    pub fn evaluate<T: Float>(self, row: &[T]) -> T {
        match self {
            Synthetic::Hc2 => target_y1(row[0], row[1]),
            Synthetic::Hc8 => target_y2(row.try_into().expect("hc8 rows have 8 inputs")),
        }
    }

    /// `n` clean samples drawn uniformly from the input box.
    pub fn generate<T: Float>(self, n: usize, seed: u64) -> Result<Dataset<T>> {
        let x: Matrix<T> = sample_inputs(self.ranges(), n, seed)?;
        let y = x.iter_rows().map(|r| self.evaluate(r)).collect();
        let names = (1..=x.cols()).map(|i| format!("x{i}")).collect();
        let ds = Dataset::new(x, y, names, "y".to_string())?;
        Ok(ds.with_meta(Provenance {
            source: self.name().to_string(),
            seed: Some(seed),
            noise: Vec::new(),
        }))
    }
}

pub fn gaussian_noise(sigma: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    check_positive("sigma", sigma)?;
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::usage(e.to_string()))?;
    let mut rng = seed::rng(seed);
    Ok((0..n).map(|_| normal.sample(&mut rng)).collect())
}

/// `tan(π t)` for `t ∈ (−½, ½)`, exact at `t = 0, ±¼`.
fn tan_pi(t: f64) -> f64 {
    if t == 0.25 {
        1.0
    } else if t == -0.25 {
        -1.0
    } else {
        (PI * t).tan()
    }
}

/// Cauchy quantile function `x0 + τ tan(π(u − ½))`.
pub fn cauchy_quantile(x0: f64, tau: f64, u: f64) -> f64 {
    x0 + tau * tan_pi(u - 0.5)
}

/// Cauchy draws by inversion; uniforms that map to a non-finite value are
/// redrawn.
pub fn cauchy_noise(x0: f64, tau: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    check_positive("tau", tau)?;
    if !x0.is_finite() {
        return Err(Error::usage("Cauchy location must be finite"));
    }
    let mut rng = seed::rng(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let u: f64 = Open01.sample(&mut rng);
        let v = cauchy_quantile(x0, tau, u);
        if v.is_finite() {
            out.push(v);
        }
    }
    Ok(out)
}

/// `y ← y + ε` with Gaussian or Cauchy `ε`; `X` is left untouched.
pub fn inject_additive<T: Float>(data: &Dataset<T>, noise: &Noise, seed: u64) -> Result<Dataset<T>> {
    noise.validate()?;
    let n = data.len();
    let eps = match *noise {
        Noise::Gaussian { sigma } => gaussian_noise(sigma, n, seed)?,
        Noise::Cauchy { x0, tau } => cauchy_noise(x0, tau, n, seed)?,
        _ => {
            return Err(Error::usage(format!(
                "additive injection needs Gaussian or Cauchy noise, got {}",
                noise.family_name()
            )))
        }
    };
    let mut out = data.clone();
    let mut changed = 0;
    for (y, e) in out.y.iter_mut().zip(eps) {
        let v = *y + T::from(e).unwrap();
        if !v.is_finite() {
            return Err(Error::domain("noisy target overflowed the scalar type"));
        }
        changed += usize::from(v != *y);
        *y = v;
    }
    out.meta.noise.push(NoiseRecord {
        noise: *noise,
        seed,
        corrupted: changed,
    });
    Ok(out)
}

/// Replaces `round(N · proportion)` distinct targets with uniform draws over
/// an interval of width `range_multiplier · (max y − min y)` centred on the
/// midpoint of the target range.
pub fn inject_outliers<T: Float>(
    data: &Dataset<T>,
    proportion: f64,
    range_multiplier: f64,
    seed: u64,
) -> Result<Dataset<T>> {
    let noise = Noise::UniformOutlier {
        proportion,
        range_multiplier,
    };
    noise.validate()?;
    let n = data.len();
    let count = (n as f64 * proportion).round() as usize;
    let mut out = data.clone();
    if count > 0 {
        let (lo, hi) = outlier_interval(&data.y, range_multiplier)?;
        let dist = Uniform::new_inclusive(lo, hi).map_err(|e| Error::usage(e.to_string()))?;
        let mut rng = seed::rng(seed);
        let picked = index::sample(&mut rng, n, count);
        for i in picked {
            out.y[i] = T::from(dist.sample(&mut rng)).unwrap();
        }
    }
    out.meta.noise.push(NoiseRecord {
        noise,
        seed,
        corrupted: count,
    });
    Ok(out)
}

/// The interval outliers are drawn from.
pub fn outlier_interval<T: Float>(y: &[T], range_multiplier: f64) -> Result<(f64, f64)> {
    let (min, max) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        let v = v.to_f64().unwrap();
        (lo.min(v), hi.max(v))
    });
    if max <= min {
        return Err(Error::usage("cannot simulate outliers on constant targets"));
    }
    let mid = 0.5 * (max + min);
    let half = 0.5 * range_multiplier * (max - min);
    Ok((mid - half, mid + half))
}
