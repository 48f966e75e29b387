use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, TrpError};
use crate::transfer::{Dataset, TransferProblem};

/// Reads a CSV with a header row whose first column is `y`; the remaining
/// columns are covariates.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let input_err = |message: String| TrpError::Input {
        path: path.to_path_buf(),
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| input_err(e.to_string()))?;
    let header = rdr.headers().map_err(|e| input_err(e.to_string()))?.clone();
    if header.get(0) != Some("y") {
        return Err(input_err("first column must be named `y`".into()));
    }
    let p = header.len() - 1;
    if p == 0 {
        return Err(input_err("no covariate columns".into()));
    }
    let mut ys = Vec::new();
    let mut xs = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| TrpError::Parse {
            path: path.to_path_buf(),
            row,
            column: 0,
            message: e.to_string(),
        })?;
        if rec.len() != p + 1 {
            return Err(TrpError::Parse {
                path: path.to_path_buf(),
                row,
                column: rec.len().min(p + 1),
                message: format!("expected {} fields, found {}", p + 1, rec.len()),
            });
        }
        for (j, cell) in rec.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| TrpError::Parse {
                path: path.to_path_buf(),
                row,
                column: j + 1,
                message: format!("not a number: {cell:?}"),
            })?;
            if !v.is_finite() {
                return Err(TrpError::Parse {
                    path: path.to_path_buf(),
                    row,
                    column: j + 1,
                    message: format!("non-finite value {cell:?}"),
                });
            }
            if j == 0 {
                ys.push(v);
            } else {
                xs.push(v);
            }
        }
    }
    let n = ys.len();
    if n == 0 {
        return Err(input_err("no data rows".into()));
    }
    let x = DMatrix::from_row_slice(n, p, &xs);
    Dataset::new(x, DVector::from_vec(ys)).map_err(|e| input_err(e.to_string()))
}

pub fn write_dataset(path: &Path, d: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["y".to_string()];
    header.extend((1..=d.p()).map(|j| format!("x{j}")));
    w.write_record(&header)?;
    for i in 0..d.n() {
        let mut rec = vec![d.y()[i].to_string()];
        rec.extend(d.x().row(i).iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// `{ "target": str, "sources": [str], "standardize": bool, "seed": int }`.
/// Relative paths resolve against the manifest's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(rename = "target")]
    pub target_path: PathBuf,
    #[serde(rename = "sources")]
    pub source_paths: Vec<PathBuf>,
    #[serde(default)]
    pub standardize: bool,
    #[serde(default)]
    pub seed: u64,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| TrpError::Input {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let mut m: Manifest = serde_json::from_str(&text).map_err(|e| TrpError::Input {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let resolve = |p: &PathBuf| {
            if p.is_absolute() {
                p.clone()
            } else {
                base.join(p)
            }
        };
        m.target_path = resolve(&m.target_path);
        m.source_paths = m.source_paths.iter().map(resolve).collect();
        Ok(m)
    }

    pub fn load_target(&self) -> Result<Dataset> {
        load_dataset(&self.target_path)
    }

    /// All sources; every file must match the target's column count.
    pub fn load_sources(&self, p: usize) -> Result<Vec<Dataset>> {
        if self.source_paths.is_empty() {
            return Err(TrpError::InvalidInput("manifest lists no sources".into()));
        }
        self.source_paths
            .iter()
            .map(|sp| {
                let d = load_dataset(sp)?;
                if d.p() != p {
                    return Err(TrpError::Input {
                        path: sp.clone(),
                        message: format!("{} covariates, target has {p}", d.p()),
                    });
                }
                Ok(d)
            })
            .collect()
    }

    pub fn load_problem(&self) -> Result<TransferProblem> {
        let target = self.load_target()?;
        let sources = self.load_sources(target.p())?;
        TransferProblem::new(target, sources)
    }
}

/// One row of the results table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub method: String,
    #[serde(rename = "K")]
    pub k: usize,
    pub rep: usize,
    /// Empty when the method failed on this repetition.
    pub mse: Option<f64>,
    pub seconds: f64,
}

pub fn write_results(path: &Path, rows: &[BenchResult]) -> Result<()> {
    let f = BufWriter::new(File::create(path)?);
    let mut w = csv::Writer::from_writer(f);
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record(["method", "K", "rep", "mse", "seconds"])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results(path: &Path) -> Result<Vec<BenchResult>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let rows = rdr
        .deserialize()
        .collect::<std::result::Result<Vec<BenchResult>, _>>()?;
    Ok(rows)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}
