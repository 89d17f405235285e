//! Observational data: covariates, outcomes, binary treatments, and CSV I/O.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::DataError;
use crate::scalar::Scalar;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self, DataError> {
        if data.len() != rows * cols {
            return Err(DataError::ShapeMismatch(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self, DataError> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(DataError::ShapeMismatch(format!(
                    "row {} has {} values, expected {cols}",
                    i + 1,
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    /// Single-column matrix.
    pub fn column_vector(values: Vec<T>) -> Self {
        Self {
            rows: values.len(),
            cols: 1,
            data: values,
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[T]> + '_ {
        (0..self.rows).map(move |i| self.row(i))
    }

    /// Rows at `indices`, in that order.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Which tail of the CATE distribution is the worst case.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectDirection {
    /// Large effects are harmful; the worst subpopulation is the upper tail.
    #[default]
    AdverseHigh,
    /// Large effects are desirable; the worst subpopulation is the lower tail.
    DesiredHigh,
}

impl EffectDirection {
    /// Sign applied to CATE-scale quantities so that the worst case is always the upper tail.
    pub fn orientation<T: Scalar>(self) -> T {
        match self {
            EffectDirection::AdverseHigh => T::one(),
            EffectDirection::DesiredHigh => -T::one(),
        }
    }
}

/// An i.i.d. sample of `(X, Y, Z)`. Immutable once constructed.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet<T> {
    covariates: Matrix<T>,
    outcomes: Vec<T>,
    treatments: Vec<u8>,
    column_names: Option<Vec<String>>,
}

impl<T: Scalar> ObservationSet<T> {
    /// Builds and validates a sample. Both arms are not required here; see [`validate`].
    pub fn new(
        covariates: Matrix<T>,
        outcomes: Vec<T>,
        treatments: Vec<u8>,
        column_names: Option<Vec<String>>,
    ) -> Result<Self, DataError> {
        let set = Self {
            covariates,
            outcomes,
            treatments,
            column_names,
        };
        validate(&set, false)?;
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.covariates.cols()
    }

    pub fn covariates(&self) -> &Matrix<T> {
        &self.covariates
    }

    pub fn outcomes(&self) -> &[T] {
        &self.outcomes
    }

    pub fn treatments(&self) -> &[u8] {
        &self.treatments
    }

    pub fn column_names(&self) -> Option<&[String]> {
        self.column_names.as_deref()
    }

    pub fn treated_count(&self) -> usize {
        self.treatments.iter().filter(|&&z| z == 1).count()
    }

    /// Sub-sample at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            covariates: self.covariates.select_rows(indices),
            outcomes: indices.iter().map(|&i| self.outcomes[i]).collect(),
            treatments: indices.iter().map(|&i| self.treatments[i]).collect(),
            column_names: self.column_names.clone(),
        }
    }

    /// Same covariates and treatments with outcomes negated.
    pub fn with_negated_outcomes(&self) -> Self {
        Self {
            outcomes: self.outcomes.iter().map(|&y| -y).collect(),
            ..self.clone()
        }
    }
}

/// Checks every invariant of an [`ObservationSet`], returning the first violation.
pub fn validate<T: Scalar>(data: &ObservationSet<T>, require_both_arms: bool) -> Result<(), DataError> {
    let n = data.outcomes.len();
    if n == 0 {
        return Err(DataError::EmptyFile);
    }
    if data.covariates.rows() != n || data.treatments.len() != n {
        return Err(DataError::ShapeMismatch(format!(
            "{} covariate rows, {} outcomes, {} treatments",
            data.covariates.rows(),
            n,
            data.treatments.len()
        )));
    }
    if let Some(names) = &data.column_names {
        if names.len() != data.covariates.cols() {
            return Err(DataError::ShapeMismatch(format!(
                "{} column names for {} covariates",
                names.len(),
                data.covariates.cols()
            )));
        }
    }
    let col_name = |j: usize| -> String {
        data.column_names
            .as_ref()
            .map_or_else(|| format!("x{}", j + 1), |names| names[j].clone())
    };
    for i in 0..n {
        for (j, v) in data.covariates.row(i).iter().enumerate() {
            if !v.is_finite() {
                return Err(DataError::NaNValue { row: i + 1, col: col_name(j) });
            }
        }
        if !data.outcomes[i].is_finite() {
            return Err(DataError::NaNValue { row: i + 1, col: "outcome".into() });
        }
        if data.treatments[i] > 1 {
            return Err(DataError::NonBinaryTreatment(i + 1));
        }
    }
    if require_both_arms {
        let treated = data.treated_count();
        if treated == 0 || treated == n {
            return Err(DataError::BothArmsRequired);
        }
    }
    Ok(())
}

/// Covariate-only draws used to estimate the CATE quantile.
#[derive(Debug, Clone, PartialEq)]
pub struct UnlabeledCovariates<T> {
    covariates: Matrix<T>,
}

impl<T: Scalar> UnlabeledCovariates<T> {
    pub fn new(covariates: Matrix<T>) -> Result<Self, DataError> {
        if covariates.rows() == 0 {
            return Err(DataError::EmptyFile);
        }
        for i in 0..covariates.rows() {
            for (j, v) in covariates.row(i).iter().enumerate() {
                if !v.is_finite() {
                    return Err(DataError::NaNValue { row: i + 1, col: format!("x{}", j + 1) });
                }
            }
        }
        Ok(Self { covariates })
    }

    /// Checks the pool against the labeled sample's covariate dimension.
    pub fn check_dim(&self, d: usize) -> Result<(), DataError> {
        if self.covariates.cols() != d {
            return Err(DataError::ShapeMismatch(format!(
                "unlabeled pool has {} columns, sample has {d}",
                self.covariates.cols()
            )));
        }
        Ok(())
    }

    pub fn covariates(&self) -> &Matrix<T> {
        &self.covariates
    }
}

fn parse_cell(raw: &str, row: usize, col: &str) -> Result<f64, DataError> {
    let v: f64 = raw
        .trim()
        .parse()
        .map_err(|_| DataError::NonNumericCell { row, col: col.to_string() })?;
    if !v.is_finite() {
        return Err(DataError::NaNValue { row, col: col.to_string() });
    }
    Ok(v)
}

fn csv_error(e: csv::Error) -> DataError {
    match e.kind() {
        csv::ErrorKind::UnequalLengths { pos, .. } => DataError::ShapeMismatch(format!(
            "ragged row at line {}",
            pos.as_ref().map_or(0, |p| p.line())
        )),
        _ => DataError::Io(e.to_string()),
    }
}

/// Reads a headed CSV table. Covariates are every column except the outcome,
/// the treatment and `drop_cols`, in file order.
pub fn read_dataset<T: Scalar, R: Read>(
    reader: R,
    outcome_col: &str,
    treatment_col: &str,
    drop_cols: &[String],
) -> Result<ObservationSet<T>, DataError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(csv_error)?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(DataError::EmptyFile);
    }
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::MissingColumn(name.to_string()))
    };
    let y_idx = find(outcome_col)?;
    let z_idx = find(treatment_col)?;
    for d in drop_cols {
        find(d)?;
    }
    let cov_idx: Vec<usize> = (0..headers.len())
        .filter(|&j| j != y_idx && j != z_idx && !drop_cols.contains(&headers[j]))
        .collect();
    let names: Vec<String> = cov_idx.iter().map(|&j| headers[j].clone()).collect();

    let mut cov = Vec::new();
    let mut outcomes = Vec::new();
    let mut treatments = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record.map_err(csv_error)?;
        let row = r + 1;
        // Cells are checked in file order so the first bad cell is reported.
        let mut parsed = vec![0.0_f64; headers.len()];
        for (j, raw) in record.iter().enumerate() {
            if drop_cols.contains(&headers[j]) {
                continue;
            }
            parsed[j] = parse_cell(raw, row, &headers[j])?;
        }
        let z = parsed[z_idx];
        if z != 0.0 && z != 1.0 {
            return Err(DataError::NonBinaryTreatment(row));
        }
        treatments.push(z as u8);
        outcomes.push(T::of(parsed[y_idx]));
        cov.extend(cov_idx.iter().map(|&j| T::of(parsed[j])));
    }
    if outcomes.is_empty() {
        return Err(DataError::EmptyFile);
    }
    let n = outcomes.len();
    ObservationSet::new(Matrix::new(n, cov_idx.len(), cov)?, outcomes, treatments, Some(names))
}

/// [`read_dataset`] from a file path.
pub fn load_dataset<T: Scalar>(
    path: impl AsRef<Path>,
    outcome_col: &str,
    treatment_col: &str,
    drop_cols: &[String],
) -> Result<ObservationSet<T>, DataError> {
    let file = std::fs::File::open(path.as_ref())
        .map_err(|e| DataError::Io(format!("{}: {e}", path.as_ref().display())))?;
    read_dataset(std::io::BufReader::new(file), outcome_col, treatment_col, drop_cols)
}

/// Reads a headed, all-numeric covariate table (the unlabeled pool).
pub fn load_unlabeled<T: Scalar>(
    path: impl AsRef<Path>,
    drop_cols: &[String],
) -> Result<UnlabeledCovariates<T>, DataError> {
    let file = std::fs::File::open(path.as_ref())
        .map_err(|e| DataError::Io(format!("{}: {e}", path.as_ref().display())))?;
    let mut rdr = csv::Reader::from_reader(std::io::BufReader::new(file));
    let headers: Vec<String> = rdr.headers().map_err(csv_error)?.iter().map(|h| h.trim().to_string()).collect();
    let keep: Vec<usize> = (0..headers.len()).filter(|&j| !drop_cols.contains(&headers[j])).collect();
    let mut data = Vec::new();
    let mut rows = 0;
    for (r, record) in rdr.records().enumerate() {
        let record = record.map_err(csv_error)?;
        for &j in &keep {
            let raw = record.get(j).unwrap_or("");
            data.push(T::of(parse_cell(raw, r + 1, &headers[j])?));
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(DataError::EmptyFile);
    }
    UnlabeledCovariates::new(Matrix::new(rows, keep.len(), data)?)
}

/// Writes the sample as CSV with 17 significant digits, which reloads bit-exactly.
pub fn write_dataset<T: Scalar, W: Write>(
    data: &ObservationSet<T>,
    writer: W,
    outcome_col: &str,
    treatment_col: &str,
) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = match data.column_names() {
        Some(names) => names.to_vec(),
        None => (1..=data.dim()).map(|j| format!("x{j}")).collect(),
    };
    header.push(outcome_col.to_string());
    header.push(treatment_col.to_string());
    w.write_record(&header).map_err(csv_error)?;
    for i in 0..data.len() {
        let mut rec: Vec<String> = data
            .covariates()
            .row(i)
            .iter()
            .map(|v| format!("{:.16e}", v.as_f64()))
            .collect();
        rec.push(format!("{:.16e}", data.outcomes()[i].as_f64()));
        rec.push(data.treatments()[i].to_string());
        w.write_record(&rec).map_err(csv_error)?;
    }
    w.flush().map_err(|e| DataError::Io(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(text: &str) -> Result<ObservationSet<f64>, DataError> {
        read_dataset(text.as_bytes(), "y", "z", &[])
    }

    #[test]
    fn parses_small_table() {
        let set = read("x1,x2,y,z\n1,2,3,0\n4,5,6,1\n7,8,9,1\n0.5,0.25,1.5,0\n").unwrap();
        assert_eq!(set.len(), 4);
        assert_eq!(set.dim(), 2);
        assert_eq!(set.covariates().row(1), &[4.0, 5.0]);
        assert_eq!(set.outcomes()[3], 1.5);
        assert_eq!(set.treatments(), &[0, 1, 1, 0]);
        assert_eq!(set.column_names().unwrap(), &["x1".to_string(), "x2".to_string()]);
    }

    #[test]
    fn covariate_order_skips_outcome_treatment_and_dropped() {
        let set: ObservationSet<f64> =
            read_dataset("id,y,a,z,b\n1,2,3,1,4\n2,5,6,0,7\n".as_bytes(), "y", "z", &["id".to_string()])
                .unwrap();
        assert_eq!(set.column_names().unwrap(), &["a".to_string(), "b".to_string()]);
        assert_eq!(set.covariates().row(0), &[3.0, 4.0]);
    }

    #[test]
    fn rejects_nonbinary_treatment() {
        let err = read("x1,x2,y,z\n1,2,3,0\n4,5,6,1\n7,8,9,2\n0,0,1,0\n").unwrap_err();
        assert_eq!(err, DataError::NonBinaryTreatment(3));
    }

    #[test]
    fn accepts_float_encoded_treatment() {
        let set = read("x,y,z\n1,2,0.0\n3,4,1.0\n").unwrap();
        assert_eq!(set.treatments(), &[0, 1]);
        assert_eq!(read("x,y,z\n1,2,0.5\n").unwrap_err(), DataError::NonBinaryTreatment(1));
    }

    #[test]
    fn empty_cell_is_non_numeric() {
        let err = read("x1,x2,y,z\n1,,3,0\n").unwrap_err();
        assert_eq!(err, DataError::NonNumericCell { row: 1, col: "x2".into() });
    }

    #[test]
    fn nan_cell_is_rejected() {
        let err = read("x1,y,z\n1,3,0\nNaN,2,1\n").unwrap_err();
        assert_eq!(err, DataError::NaNValue { row: 2, col: "x1".into() });
    }

    #[test]
    fn missing_column_and_empty_file() {
        assert_eq!(read("x1,y\n1,2\n").unwrap_err(), DataError::MissingColumn("z".into()));
        assert_eq!(read("x1,y,z\n").unwrap_err(), DataError::EmptyFile);
        assert_eq!(read("").unwrap_err(), DataError::EmptyFile);
    }

    #[test]
    fn validate_flags_single_arm_when_requested() {
        let set = read("x,y,z\n1,2,1\n3,4,1\n").unwrap();
        assert!(validate(&set, false).is_ok());
        assert_eq!(validate(&set, true).unwrap_err(), DataError::BothArmsRequired);
    }

    #[test]
    fn constructor_rejects_nan_covariate() {
        let x = Matrix::new(2, 1, vec![1.0, f64::NAN]).unwrap();
        let err = ObservationSet::new(x, vec![0.0, 1.0], vec![0, 1], None).unwrap_err();
        assert_eq!(err, DataError::NaNValue { row: 2, col: "x1".into() });
    }

    #[test]
    fn constructor_rejects_shape_mismatch() {
        let x = Matrix::new(2, 1, vec![1.0, 2.0]).unwrap();
        assert!(matches!(
            ObservationSet::new(x, vec![0.0], vec![0, 1], None),
            Err(DataError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn unlabeled_pool_dimension_check() {
        let pool = UnlabeledCovariates::new(Matrix::new(2, 2, vec![1.0_f64, 2.0, 3.0, 4.0]).unwrap()).unwrap();
        assert!(pool.check_dim(2).is_ok());
        assert!(pool.check_dim(3).is_err());
        assert!(UnlabeledCovariates::new(Matrix::<f64>::zeros(0, 2)).is_err());
    }

    #[test]
    fn loading_is_deterministic() {
        let text = "x1,x2,y,z\n0.1,0.2,0.3,0\n1e-3,-2.5,7,1\n";
        assert_eq!(read(text).unwrap(), read(text).unwrap());
    }
}
