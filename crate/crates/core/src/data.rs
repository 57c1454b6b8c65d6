//! Observation table `(x, a, y[, e])` and its CSV form.
//!
//! The CSV header is `x1,...,xd,a,y` with an optional trailing `e` column that
//! carries a known propensity score. `a` and `y` must be exactly 0 or 1.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Treatment arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Arm {
    Control,
    Treated,
}

impl Arm {
    pub const BOTH: [Arm; 2] = [Arm::Control, Arm::Treated];

    pub fn index(self) -> usize {
        match self {
            Arm::Control => 0,
            Arm::Treated => 1,
        }
    }

    pub fn as_f64(self) -> f64 {
        self.index() as f64
    }

    pub fn from_bit(bit: u8) -> Option<Arm> {
        match bit {
            0 => Some(Arm::Control),
            1 => Some(Arm::Treated),
            _ => None,
        }
    }
}

/// Coarsened data: covariates, assigned arm, factual binary outcome and an
/// optional known propensity.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationTable {
    dim: usize,
    x: Vec<f64>,
    a: Vec<Arm>,
    y: Vec<u8>,
    e_known: Option<Vec<f64>>,
}

impl ObservationTable {
    /// Builds a table from row-major covariates. Validates every invariant.
    pub fn new(
        dim: usize,
        x: Vec<f64>,
        a: Vec<Arm>,
        y: Vec<u8>,
        e_known: Option<Vec<f64>>,
    ) -> Result<Self> {
        let n = a.len();
        if n == 0 {
            return Err(Error::InvalidInput("table must have at least one row".into()));
        }
        if dim == 0 {
            return Err(Error::InvalidInput("covariate dimension must be at least 1".into()));
        }
        if x.len() != n * dim {
            return Err(Error::InvalidInput(format!(
                "expected {} covariate values for {n} rows of dimension {dim}, got {}",
                n * dim,
                x.len()
            )));
        }
        if y.len() != n {
            return Err(Error::InvalidInput("outcome and arm columns differ in length".into()));
        }
        if let Some(i) = y.iter().position(|&v| v > 1) {
            return Err(Error::Data { row: i + 1, message: "outcome must be 0 or 1".into() });
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data { row: i / dim + 1, message: "covariate is not finite".into() });
        }
        if let Some(e) = &e_known {
            if e.len() != n {
                return Err(Error::InvalidInput("propensity column length mismatch".into()));
            }
            if let Some(i) = e.iter().position(|&p| !(p > 0.0 && p < 1.0)) {
                return Err(Error::Data {
                    row: i + 1,
                    message: format!("known propensity {} is not strictly inside (0,1)", e[i]),
                });
            }
        }
        Ok(Self { dim, x, a, y, e_known })
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    pub fn covariates(&self) -> &[f64] {
        &self.x
    }

    pub fn arm(&self, i: usize) -> Arm {
        self.a[i]
    }

    pub fn arms(&self) -> &[Arm] {
        &self.a
    }

    pub fn outcome(&self, i: usize) -> u8 {
        self.y[i]
    }

    pub fn outcomes(&self) -> &[u8] {
        &self.y
    }

    pub fn known_propensity(&self, i: usize) -> Option<f64> {
        self.e_known.as_ref().map(|e| e[i])
    }

    pub fn has_known_propensity(&self) -> bool {
        self.e_known.is_some()
    }

    /// Rows at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut x = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            x.extend_from_slice(self.x(i));
        }
        let a = indices.iter().map(|&i| self.a[i]).collect();
        let y = indices.iter().map(|&i| self.y[i]).collect();
        let e = self.e_known.as_ref().map(|e| indices.iter().map(|&i| e[i]).collect());
        Self::new(self.dim, x, a, y, e)
    }

    /// Indices of the rows assigned to `arm`.
    pub fn arm_indices(&self, arm: Arm) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.a[i] == arm).collect()
    }

    /// Drops the known-propensity column.
    pub fn without_known_propensity(mut self) -> Self {
        self.e_known = None;
        self
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let header = rdr.headers()?.clone();
        let names: Vec<&str> = header.iter().collect();
        let (dim, has_e) = parse_header(&names)?;
        let width = names.len();

        let mut x = Vec::new();
        let mut a = Vec::new();
        let mut y = Vec::new();
        let mut e = Vec::new();
        for (idx, record) in rdr.records().enumerate() {
            let row = idx + 1;
            let record = record.map_err(|err| Error::Data { row, message: err.to_string() })?;
            if record.len() != width {
                return Err(Error::Data {
                    row,
                    message: format!("expected {width} fields, found {}", record.len()),
                });
            }
            for j in 0..dim {
                x.push(parse_real(&record[j], row, names[j])?);
            }
            a.push(match parse_bit(&record[dim], row, "a")? {
                0 => Arm::Control,
                _ => Arm::Treated,
            });
            y.push(parse_bit(&record[dim + 1], row, "y")?);
            if has_e {
                let p = parse_real(&record[dim + 2], row, "e")?;
                if !(p > 0.0 && p < 1.0) {
                    return Err(Error::Data {
                        row,
                        message: format!("known propensity {p} is not strictly inside (0,1)"),
                    });
                }
                e.push(p);
            }
        }
        if a.is_empty() {
            return Err(Error::InvalidInput("CSV contains no data rows".into()));
        }
        Self::new(dim, x, a, y, has_e.then_some(e))
    }

    pub fn read_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(file))
    }

    /// Writes the canonical CSV. Reals use the shortest representation that
    /// round-trips, so reading the file back reproduces the table exactly.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (1..=self.dim).map(|j| format!("x{j}")).collect();
        header.push("a".into());
        header.push("y".into());
        if self.e_known.is_some() {
            header.push("e".into());
        }
        wtr.write_record(&header)?;
        let mut record: Vec<String> = Vec::with_capacity(header.len());
        for i in 0..self.len() {
            record.clear();
            record.extend(self.x(i).iter().map(|v| v.to_string()));
            record.push(self.a[i].index().to_string());
            record.push(self.y[i].to_string());
            if let Some(e) = &self.e_known {
                record.push(e[i].to_string());
            }
            wtr.write_record(&record)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn parse_header(names: &[&str]) -> Result<(usize, bool)> {
    let has_e = names.last() == Some(&"e");
    let core = if has_e { &names[..names.len() - 1] } else { names };
    if core.len() < 3 || core[core.len() - 2] != "a" || core[core.len() - 1] != "y" {
        return Err(Error::Data {
            row: 0,
            message: "header must be x1,...,xd,a,y with an optional trailing e".into(),
        });
    }
    let dim = core.len() - 2;
    for (j, name) in core[..dim].iter().enumerate() {
        if *name != format!("x{}", j + 1) {
            return Err(Error::Data {
                row: 0,
                message: format!("expected header column x{}, found {name:?}", j + 1),
            });
        }
    }
    Ok((dim, has_e))
}

fn parse_real(field: &str, row: usize, column: &str) -> Result<f64> {
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Data { row, message: format!("column {column}: cannot parse {field:?} as a finite number") }),
    }
}

fn parse_bit(field: &str, row: usize, column: &str) -> Result<u8> {
    match field.parse::<f64>() {
        Ok(0.0) => Ok(0),
        Ok(1.0) => Ok(1),
        _ => Err(Error::Data { row, message: format!("column {column}: expected 0 or 1, found {field:?}") }),
    }
}
