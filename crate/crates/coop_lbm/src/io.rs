//! File formats: CSV incidence matrices, fit documents and simulation truth
//! sidecars.
//!
//! The incidence CSV carries column names in the first row and row names in
//! the first column; every body cell is a non-negative integer. Fit results
//! and truth sidecars are JSON documents with fixed field names. Block
//! labels are written 1-based.

use crate::clustering::Clustering;
use crate::error::{Error, Result};
use crate::matrix::{BinaryMatrix, CountMatrix};
use crate::params::{CoopParams, FitResult, LbmParams, ModelParams};
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

/// Read a count matrix from an incidence CSV.
pub fn read_count_matrix(path: &Path) -> Result<CountMatrix> {
    let file = File::open(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(BufReader::new(file));

    let mut records = reader.records();
    let header = match records.next() {
        Some(rec) => rec?,
        None => return Err(Error::Parse { row: 1, col: 1, msg: "file is empty".into() }),
    };
    if header.len() < 2 {
        return Err(Error::Parse {
            row: 1,
            col: 1,
            msg: "header must hold at least one column name after the corner cell".into(),
        });
    }
    let col_names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let n_cols = col_names.len();

    let mut row_names = Vec::new();
    let mut counts: Vec<Vec<u64>> = Vec::new();
    for (line_idx, rec) in records.enumerate() {
        let rec = rec?;
        let data_row = line_idx + 1; // 1-based, body rows
        if rec.len() != n_cols + 1 {
            return Err(Error::Parse {
                row: data_row,
                col: rec.len(),
                msg: format!("expected {} cells, found {}", n_cols + 1, rec.len()),
            });
        }
        row_names.push(rec[0].to_string());
        let mut row = Vec::with_capacity(n_cols);
        for (j, cell) in rec.iter().skip(1).enumerate() {
            let value = cell.trim().parse::<u64>().map_err(|_| Error::Parse {
                row: data_row,
                col: j + 1,
                msg: format!("cell '{cell}' is not a non-negative integer"),
            })?;
            row.push(value);
        }
        counts.push(row);
    }
    if counts.is_empty() {
        return Err(Error::Parse { row: 2, col: 1, msg: "no data rows".into() });
    }
    CountMatrix::new(counts, row_names, col_names)
}

/// Write a count matrix as an incidence CSV.
pub fn write_count_matrix(r: &CountMatrix, path: &Path) -> Result<()> {
    let file = File::create(path)?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let mut header = vec![String::new()];
    header.extend(r.col_names().iter().cloned());
    w.write_record(&header)?;
    for i in 0..r.n_rows() {
        let mut rec = vec![r.row_names()[i].clone()];
        rec.extend((0..r.n_cols()).map(|j| r.get(i, j).to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Write a binary support matrix as an incidence CSV with the given names.
pub fn write_binary_matrix(
    b: &BinaryMatrix,
    row_names: &[String],
    col_names: &[String],
    path: &Path,
) -> Result<()> {
    let counts: Vec<Vec<u64>> = (0..b.n_rows())
        .map(|i| (0..b.n_cols()).map(|j| u64::from(b.get(i, j))).collect())
        .collect();
    let as_counts = CountMatrix::new(counts, row_names.to_vec(), col_names.to_vec())?;
    write_count_matrix(&as_counts, path)
}

#[derive(Serialize, Deserialize)]
struct FitDocument {
    model: String,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    pi: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mu: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    g: Option<f64>,
    row_labels: Vec<usize>,
    col_labels: Vec<usize>,
    icl: f64,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    missing_prob: Option<Vec<Vec<f64>>>,
}

/// Serialize a fit result. The baseline model omits the `lambda`, `mu` and
/// `g` fields.
pub fn write_fit(result: &FitResult, path: &Path) -> Result<()> {
    let (lambda, mu, g) = match &result.params {
        ModelParams::Coop(p) => (Some(p.lambda.clone()), Some(p.mu.clone()), Some(p.g)),
        ModelParams::Lbm(_) => (None, None, None),
    };
    let doc = FitDocument {
        model: result.kind().to_string(),
        alpha: result.params.alpha().to_vec(),
        beta: result.params.beta().to_vec(),
        pi: result.params.pi().to_vec(),
        lambda,
        mu,
        g,
        row_labels: result.row_clustering.labels().iter().map(|&l| l + 1).collect(),
        col_labels: result.col_clustering.labels().iter().map(|&l| l + 1).collect(),
        icl: result.icl,
        seed: result.seed,
        missing_prob: result.missing_prob.clone(),
    };
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, &doc)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Parse a fit document back. The iteration trace and imputed support are
/// not part of the document and come back empty.
pub fn read_fit(path: &Path) -> Result<FitResult> {
    let file = File::open(path)?;
    let doc: FitDocument = serde_json::from_reader(BufReader::new(file))?;
    let q1 = doc.alpha.len();
    let q2 = doc.beta.len();
    let params = match doc.model.as_str() {
        "coop" => {
            let lambda = doc.lambda.ok_or_else(|| missing_field("lambda"))?;
            let mu = doc.mu.ok_or_else(|| missing_field("mu"))?;
            let g = doc.g.ok_or_else(|| missing_field("g"))?;
            ModelParams::Coop(CoopParams { alpha: doc.alpha, beta: doc.beta, pi: doc.pi, lambda, mu, g })
        }
        "lbm" => ModelParams::Lbm(LbmParams { alpha: doc.alpha, beta: doc.beta, pi: doc.pi }),
        other => {
            return Err(Error::InvalidArgument(format!("unknown model '{other}' in fit document")))
        }
    };
    let to_labels = |labels: Vec<usize>, q: usize| -> Result<Clustering> {
        let zero_based: Vec<usize> = labels
            .iter()
            .map(|&l| {
                l.checked_sub(1)
                    .ok_or_else(|| Error::InvalidArgument("labels in a fit document are 1-based".into()))
            })
            .collect::<Result<_>>()?;
        Clustering::new(zero_based, q)
    };
    Ok(FitResult {
        row_clustering: to_labels(doc.row_labels, q1)?,
        col_clustering: to_labels(doc.col_labels, q2)?,
        params,
        icl: doc.icl,
        trace: Vec::new(),
        missing_prob: doc.missing_prob,
        seed: doc.seed,
        m_tilde: None,
        warnings: Vec::new(),
    })
}

fn missing_field(name: &str) -> Error {
    Error::InvalidArgument(format!("fit document lacks the '{name}' field"))
}

/// Ground truth emitted next to a simulated matrix.
#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct TruthDocument {
    /// Latent support on the kept grid.
    pub m: Vec<Vec<u8>>,
    /// 1-based row block labels.
    pub z1: Vec<usize>,
    /// 1-based column block labels.
    pub z2: Vec<usize>,
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    pub g: f64,
    pub seed: u64,
    /// 1-based original indices of kept rows.
    pub kept_rows: Vec<usize>,
    /// 1-based original indices of kept columns.
    pub kept_cols: Vec<usize>,
}

impl TruthDocument {
    pub fn support(&self) -> Result<BinaryMatrix> {
        BinaryMatrix::from_rows(self.m.clone())
    }

    pub fn row_clustering(&self) -> Result<Clustering> {
        let labels: Vec<usize> = self.z1.iter().map(|&l| l - 1).collect();
        let q = labels.iter().max().map_or(1, |&m| m + 1);
        Clustering::new(labels, q)
    }

    pub fn col_clustering(&self) -> Result<Clustering> {
        let labels: Vec<usize> = self.z2.iter().map(|&l| l - 1).collect();
        let q = labels.iter().max().map_or(1, |&m| m + 1);
        Clustering::new(labels, q)
    }
}

pub fn write_truth(truth: &TruthDocument, path: &Path) -> Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, truth)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_truth(path: &Path) -> Result<TruthDocument> {
    let file = File::open(path)?;
    Ok(serde_json::from_reader(BufReader::new(file))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn write_raw(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn parse_two_by_two() {
        let dir = tempdir().unwrap();
        let p = write_raw(dir.path(), "m.csv", ",cA,cB\nrA,0,3\nrB,1,0\n");
        let m = read_count_matrix(&p).unwrap();
        assert_eq!(m.n_rows(), 2);
        assert_eq!(m.n_cols(), 2);
        assert_eq!(m.get(0, 1), 3);
        assert_eq!(m.get(1, 0), 1);
        assert_eq!(m.row_names(), &["rA".to_string(), "rB".to_string()]);
        assert_eq!(m.col_names(), &["cA".to_string(), "cB".to_string()]);
    }

    #[test]
    fn negative_cell_rejected_with_position() {
        let dir = tempdir().unwrap();
        let p = write_raw(dir.path(), "m.csv", ",c1\nr1,5\nr2,-1\n");
        match read_count_matrix(&p) {
            Err(Error::Parse { row, col, .. }) => {
                assert_eq!((row, col), (2, 1));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn fractional_cell_rejected_with_position() {
        let dir = tempdir().unwrap();
        let p = write_raw(dir.path(), "m.csv", ",c1,c2\nr1,2.5,0\n");
        match read_count_matrix(&p) {
            Err(Error::Parse { row, col, .. }) => assert_eq!((row, col), (1, 1)),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn ragged_row_rejected() {
        let dir = tempdir().unwrap();
        let p = write_raw(dir.path(), "m.csv", ",c1,c2\nr1,1\n");
        assert!(read_count_matrix(&p).is_err());
    }

    #[test]
    fn matrix_csv_round_trip() {
        let dir = tempdir().unwrap();
        let m = CountMatrix::new(
            vec![vec![0, 12], vec![7, 3]],
            vec!["plant a".into(), "plant b".into()],
            vec!["bee".into(), "fly".into()],
        )
        .unwrap();
        let p = dir.path().join("m.csv");
        write_count_matrix(&m, &p).unwrap();
        assert_eq!(read_count_matrix(&p).unwrap(), m);
    }

    fn sample_coop_fit() -> FitResult {
        FitResult {
            params: ModelParams::Coop(CoopParams {
                alpha: vec![0.25, 0.75],
                beta: vec![1.0],
                pi: vec![vec![0.123456789012345], vec![0.9]],
                lambda: vec![1.0, 1.0 / 3.0],
                mu: vec![1.0],
                g: 17.5,
            }),
            row_clustering: Clustering::new(vec![0, 1], 2).unwrap(),
            col_clustering: Clustering::trivial(1),
            icl: -42.125,
            trace: Vec::new(),
            missing_prob: Some(vec![vec![1.0], vec![0.037]]),
            seed: 99,
            m_tilde: None,
            warnings: Vec::new(),
        }
    }

    #[test]
    fn fit_document_round_trip() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("fit.json");
        let fit = sample_coop_fit();
        write_fit(&fit, &p).unwrap();
        let back = read_fit(&p).unwrap();
        // serde_json prints shortest round-trip decimals, so numeric fields
        // come back bit-exact (stronger than the 12 significant digits asked)
        assert_eq!(back.params, fit.params);
        assert_eq!(back.row_clustering, fit.row_clustering);
        assert_eq!(back.col_clustering, fit.col_clustering);
        assert_eq!(back.icl, fit.icl);
        assert_eq!(back.seed, fit.seed);
        assert_eq!(back.missing_prob, fit.missing_prob);
    }

    #[test]
    fn lbm_document_omits_effort_fields() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("fit.json");
        let fit = FitResult {
            params: ModelParams::Lbm(LbmParams {
                alpha: vec![1.0],
                beta: vec![1.0],
                pi: vec![vec![0.5]],
            }),
            row_clustering: Clustering::trivial(2),
            col_clustering: Clustering::trivial(2),
            icl: 0.0,
            trace: Vec::new(),
            missing_prob: None,
            seed: 1,
            m_tilde: None,
            warnings: Vec::new(),
        };
        write_fit(&fit, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(!text.contains("\"lambda\""));
        assert!(!text.contains("\"mu\""));
        assert!(!text.contains("\"g\""));
        assert!(read_fit(&p).unwrap().params.as_lbm().is_some());
    }

    #[test]
    fn unwritable_path_errors() {
        let fit = sample_coop_fit();
        let err = write_fit(&fit, Path::new("/nonexistent-dir/fit.json"));
        assert!(err.is_err());
    }
}
