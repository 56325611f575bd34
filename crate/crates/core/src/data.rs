//! Regression tables and gray-level images.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{seeded, uniform};

/// Mean and population standard deviation used to standardise a column.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: f64,
    pub std: f64,
}

impl Standardization {
    fn fit(values: impl Iterator<Item = f64> + Clone) -> Option<Self> {
        let n = values.clone().count() as f64;
        let mean = values.clone().sum::<f64>() / n;
        let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        (std > 0.0 && std.is_finite()).then_some(Self { mean, std })
    }

    pub fn apply(&self, v: f64) -> f64 {
        (v - self.mean) / self.std
    }
}

/// A design matrix and response, standardised with training-split statistics.
#[derive(Clone, Debug)]
pub struct RegressionDataset {
    names: Vec<String>,
    response_name: String,
    x: DMatrix<f64>,
    y: Vec<f64>,
    train: Vec<usize>,
    test: Vec<usize>,
    column_stats: Vec<Standardization>,
    response_stats: Standardization,
    split_seed: u64,
}

impl RegressionDataset {
    /// Splits rows by a seeded shuffle into `n_train` training rows and the
    /// rest for testing, then standardises every column and the response
    /// with training statistics.
    pub fn from_raw(
        names: Vec<String>,
        response_name: String,
        raw_x: DMatrix<f64>,
        raw_y: Vec<f64>,
        n_train: usize,
        split_seed: u64,
    ) -> Result<Self> {
        let n = raw_x.nrows();
        if raw_y.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: raw_y.len() });
        }
        if names.len() != raw_x.ncols() {
            return Err(Error::DimensionMismatch {
                expected: raw_x.ncols(),
                found: names.len(),
            });
        }
        if n_train < 2 || n_train >= n {
            return Err(Error::invalid("split", format!("training size must be in 2..{n}, got {n_train}")));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut seeded(split_seed));
        let mut train = order[..n_train].to_vec();
        let mut test = order[n_train..].to_vec();
        train.sort_unstable();
        test.sort_unstable();

        let constant = |name: &str| Error::invalid("dataset", format!("column {name} is constant on the training split"));
        let column_stats = (0..raw_x.ncols())
            .map(|j| Standardization::fit(train.iter().map(|&i| raw_x[(i, j)])).ok_or_else(|| constant(&names[j])))
            .collect::<Result<Vec<_>>>()?;
        let response_stats =
            Standardization::fit(train.iter().map(|&i| raw_y[i])).ok_or_else(|| constant(&response_name))?;
        let x = DMatrix::from_fn(n, raw_x.ncols(), |i, j| column_stats[j].apply(raw_x[(i, j)]));
        let y = raw_y.iter().map(|&v| response_stats.apply(v)).collect();
        Ok(Self {
            names,
            response_name,
            x,
            y,
            train,
            test,
            column_stats,
            response_stats,
            split_seed,
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn response_name(&self) -> &str {
        &self.response_name
    }

    pub fn n_rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    pub fn split_seed(&self) -> u64 {
        self.split_seed
    }

    pub fn train_indices(&self) -> &[usize] {
        &self.train
    }

    pub fn test_indices(&self) -> &[usize] {
        &self.test
    }

    pub fn column_stats(&self) -> &[Standardization] {
        &self.column_stats
    }

    pub fn response_stats(&self) -> Standardization {
        self.response_stats
    }

    fn rows(&self, idx: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(idx.len(), self.x.ncols(), |i, j| self.x[(idx[i], j)])
    }

    pub fn train_x(&self) -> DMatrix<f64> {
        self.rows(&self.train)
    }

    pub fn train_y(&self) -> Vec<f64> {
        self.train.iter().map(|&i| self.y[i]).collect()
    }

    pub fn test_x(&self) -> DMatrix<f64> {
        self.rows(&self.test)
    }

    pub fn test_y(&self) -> Vec<f64> {
        self.test.iter().map(|&i| self.y[i]).collect()
    }
}

/// Number of attribute columns in the diabetes table (the response is an 11th column).
pub const DIABETES_FEATURES: usize = 10;
pub const DIABETES_TRAIN_ROWS: usize = 300;

/// A whitespace- or tab-delimited table with a header row.
pub struct DelimitedTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn read_delimited(path: &Path) -> Result<DelimitedTable> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header_line) = lines.next().ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        line: 1,
        reason: "file is empty".into(),
    })?;
    let header: Vec<String> = header_line.split_whitespace().map(str::to_owned).collect();
    let mut rows = Vec::new();
    for (i, line) in lines {
        let parse_err = |reason: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            reason,
        };
        let row = line
            .split_whitespace()
            .map(|f| f.parse::<f64>().map_err(|_| parse_err(format!("not a number: {f:?}"))))
            .collect::<Result<Vec<_>>>()?;
        if row.len() != header.len() {
            return Err(parse_err(format!("expected {} columns, found {}", header.len(), row.len())));
        }
        rows.push(row);
    }
    Ok(DelimitedTable { header, rows })
}

/// Loads the diabetes table: a header row, then one row per patient with ten
/// attributes followed by the response.
pub fn load_diabetes(path: &Path, split_seed: u64) -> Result<RegressionDataset> {
    let table = read_delimited(path)?;
    if table.header.len() != DIABETES_FEATURES + 1 {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            reason: format!(
                "expected {} columns (10 attributes and the response), found {}",
                DIABETES_FEATURES + 1,
                table.header.len()
            ),
        });
    }
    let n = table.rows.len();
    if n <= DIABETES_TRAIN_ROWS {
        return Err(Error::invalid("dataset", format!("need more than {DIABETES_TRAIN_ROWS} rows, found {n}")));
    }
    let raw_x = DMatrix::from_fn(n, DIABETES_FEATURES, |i, j| table.rows[i][j]);
    let raw_y = table.rows.iter().map(|r| r[DIABETES_FEATURES]).collect();
    let mut header = table.header;
    let response = header.pop().unwrap();
    RegressionDataset::from_raw(header, response, raw_x, raw_y, DIABETES_TRAIN_ROWS, split_seed)
}

/// Gray levels in `[0, 1]`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ImageMatrix {
    /// Clamps every entry to `[0, 1]`; NaN is rejected.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid("image", "needs at least one pixel"));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        if data.iter().any(|v| v.is_nan()) {
            return Err(Error::invalid("image", "NaN pixel"));
        }
        Ok(Self {
            rows,
            cols,
            data: data.into_iter().map(|v| v.clamp(0.0, 1.0)).collect(),
        })
    }

    pub fn from_matrix(m: &DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = m.shape();
        Self::new(rows, cols, (0..rows).flat_map(|i| (0..cols).map(move |j| (i, j))).map(|ij| m[ij]).collect())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn pixels(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    /// Reads a PGM (`P2` or `P5`) or a comma-separated matrix, by extension.
    pub fn load(path: &Path) -> Result<Self> {
        let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
        if is_csv {
            Self::read_csv(path)
        } else {
            Self::read_pgm(path)
        }
    }

    pub fn read_pgm(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        parse_pgm(&bytes).map_err(|reason| Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            reason,
        })
    }

    /// Plain (`P2`) PGM with maxval 255.
    pub fn to_pgm(&self) -> String {
        let mut out = format!("P2\n{} {}\n255\n", self.cols, self.rows);
        for row in self.data.chunks(self.cols) {
            let line: Vec<String> = row.iter().map(|v| ((v * 255.0).round() as u32).to_string()).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_pgm()).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut data = Vec::new();
        let mut cols = None;
        let mut rows = 0;
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let err = |reason: String| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                reason,
            };
            let row = line
                .split(',')
                .map(|f| f.trim().parse::<f64>().map_err(|_| err(format!("not a number: {f:?}"))))
                .collect::<Result<Vec<_>>>()?;
            match cols {
                None => cols = Some(row.len()),
                Some(c) if c != row.len() => return Err(err(format!("expected {c} columns, found {}", row.len()))),
                _ => {}
            }
            data.extend(row);
            rows += 1;
        }
        Self::new(rows, cols.unwrap_or(0), data)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.data.chunks(self.cols) {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

fn parse_pgm(bytes: &[u8]) -> std::result::Result<ImageMatrix, String> {
    // header tokens: magic, width, height, maxval; '#' starts a comment
    let mut pos = 0;
    let next_token = |pos: &mut usize| -> std::result::Result<String, String> {
        loop {
            while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            if *pos < bytes.len() && bytes[*pos] == b'#' {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
                continue;
            }
            break;
        }
        let start = *pos;
        while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if start == *pos {
            return Err("unexpected end of file".into());
        }
        Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
    };
    let magic = next_token(&mut pos)?;
    let number = |s: String, what: &str| s.parse::<usize>().map_err(|_| format!("bad {what}: {s:?}"));
    let cols = number(next_token(&mut pos)?, "width")?;
    let rows = number(next_token(&mut pos)?, "height")?;
    let maxval = number(next_token(&mut pos)?, "maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(format!("maxval must be in 1..=65535, got {maxval}"));
    }
    let n = rows * cols;
    let scale = maxval as f64;
    let data: Vec<f64> = match magic.as_str() {
        "P2" => (0..n)
            .map(|_| next_token(&mut pos).and_then(|t| number(t, "pixel")).map(|v| v as f64 / scale))
            .collect::<std::result::Result<_, _>>()?,
        "P5" => {
            // exactly one whitespace byte separates maxval from the raster
            let start = pos + 1;
            let width = if maxval < 256 { 1 } else { 2 };
            let raster = bytes.get(start..start + n * width).ok_or("raster is truncated")?;
            if width == 1 {
                raster.iter().map(|&b| b as f64 / scale).collect()
            } else {
                raster.chunks(2).map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 / scale).collect()
            }
        }
        other => return Err(format!("unsupported magic {other:?}, expected P2 or P5")),
    };
    ImageMatrix::new(rows, cols, data).map_err(|e| e.to_string())
}

/// Salt-and-pepper corruption: each pixel is, with probability `density`,
/// replaced by 0 or 1 with equal odds.
pub fn corrupt_image<R: Rng + ?Sized>(img: &ImageMatrix, density: f64, rng: &mut R) -> Result<ImageMatrix> {
    if !(0.0..=1.0).contains(&density) {
        return Err(Error::invalid("density", format!("must lie in [0, 1], got {density}")));
    }
    let data = img
        .data
        .iter()
        .map(|&v| {
            if uniform(rng) < density {
                if uniform(rng) < 0.5 {
                    0.0
                } else {
                    1.0
                }
            } else {
                v
            }
        })
        .collect();
    Ok(ImageMatrix {
        rows: img.rows,
        cols: img.cols,
        data,
    })
}
