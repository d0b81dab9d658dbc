use std::io::Read;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Regression data: design matrix `x` (n x d, rows are observations) and
/// response `y` (length n).
#[derive(Debug, Clone)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
    column_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        Self::with_names(x, y, None)
    }

    pub fn with_names(
        x: DMatrix<f64>,
        y: DVector<f64>,
        column_names: Option<Vec<String>>,
    ) -> Result<Self> {
        let (n, d) = x.shape();
        if n < 2 {
            return Err(Error::InvalidDataset(format!("need n >= 2 rows, got {n}")));
        }
        if d < 1 {
            return Err(Error::InvalidDataset("need at least one predictor".into()));
        }
        if y.len() != n {
            return Err(Error::InvalidDataset(format!(
                "response has {} entries but design has {n} rows",
                y.len()
            )));
        }
        if !x.iter().chain(y.iter()).all(|v| v.is_finite()) {
            return Err(Error::InvalidDataset("non-finite entry".into()));
        }
        if let Some(names) = &column_names {
            if names.len() != d {
                return Err(Error::InvalidDataset(format!(
                    "{} column names for {d} predictors",
                    names.len()
                )));
            }
        }
        Ok(Self {
            x,
            y,
            column_names,
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn column_names(&self) -> Option<&[String]> {
        self.column_names.as_deref()
    }

    /// `Y'Y`.
    pub fn yty(&self) -> f64 {
        self.y.dot(&self.y)
    }

    /// Columns of `x` selected by `cols`, in order.
    pub fn submatrix(&self, cols: &[usize]) -> DMatrix<f64> {
        self.x.select_columns(cols)
    }

    /// Read a CSV with `d + 1` numeric columns, the last being the response.
    pub fn from_csv_reader<R: Read>(reader: R, has_header: bool) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(has_header)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let names = if has_header {
            let h = rdr.headers()?;
            let cols: Vec<String> = h.iter().map(str::to_owned).collect();
            if cols.len() < 2 {
                return Err(Error::InvalidDataset("need at least two columns".into()));
            }
            Some(cols[..cols.len() - 1].to_vec())
        } else {
            None
        };
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|f| {
                    f.parse::<f64>().map_err(|e| {
                        Error::Parse(format!("row {}: cannot parse {f:?}: {e}", i + 1))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            if let Some(first) = rows.first() {
                if row.len() != first.len() {
                    return Err(Error::InvalidDataset(format!(
                        "row {} has {} fields, expected {}",
                        i + 1,
                        row.len(),
                        first.len()
                    )));
                }
            }
            rows.push(row);
        }
        let n = rows.len();
        let width = rows.first().map_or(0, Vec::len);
        if width < 2 {
            return Err(Error::InvalidDataset("need at least two columns".into()));
        }
        let d = width - 1;
        let x = DMatrix::from_fn(n, d, |i, j| rows[i][j]);
        let y = DVector::from_fn(n, |i, _| rows[i][d]);
        Self::with_names(x, y, names)
    }

    pub fn from_csv_path(path: impl AsRef<Path>, has_header: bool) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::from_csv_reader(std::io::BufReader::new(f), has_header)
    }

    pub fn to_csv_writer<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header: Vec<String> = match &self.column_names {
            Some(names) => names.clone(),
            None => (1..=self.d()).map(|j| format!("x{j}")).collect(),
        };
        header.push("y".into());
        wtr.write_record(&header)?;
        for i in 0..self.n() {
            let mut rec: Vec<String> = (0..self.d()).map(|j| self.x[(i, j)].to_string()).collect();
            rec.push(self.y[i].to_string());
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_with_and_without_header() {
        let text = "a,b,y\n1,2,3\n4,5,6\n7,8,9\n";
        let ds = Dataset::from_csv_reader(text.as_bytes(), true).unwrap();
        assert_eq!((ds.n(), ds.d()), (3, 2));
        assert_eq!(ds.column_names().unwrap(), &["a".to_string(), "b".to_string()]);
        assert_eq!(ds.y()[2], 9.0);
        assert_eq!(ds.x()[(1, 1)], 5.0);

        let raw = "1,2,3\n4,5,6\n";
        let ds = Dataset::from_csv_reader(raw.as_bytes(), false).unwrap();
        assert_eq!((ds.n(), ds.d()), (2, 2));
        assert!(ds.column_names().is_none());
    }

    #[test]
    fn csv_round_trip() {
        let text = "a,b,y\n1.5,2,3\n4,-5e-3,6\n";
        let ds = Dataset::from_csv_reader(text.as_bytes(), true).unwrap();
        let mut out = Vec::new();
        ds.to_csv_writer(&mut out).unwrap();
        let back = Dataset::from_csv_reader(out.as_slice(), true).unwrap();
        assert_eq!(back.x(), ds.x());
        assert_eq!(back.y(), ds.y());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Dataset::from_csv_reader("1,2,3\n".as_bytes(), false).is_err());
        assert!(Dataset::from_csv_reader("1,2,3\n4,5\n".as_bytes(), false).is_err());
        assert!(Dataset::from_csv_reader("1,x,3\n4,5,6\n".as_bytes(), false).is_err());
        let x = DMatrix::from_element(3, 2, f64::NAN);
        assert!(Dataset::new(x, DVector::zeros(3)).is_err());
        assert!(Dataset::new(DMatrix::zeros(3, 2), DVector::zeros(4)).is_err());
    }
}
