//! Trial and historical datasets, CSV I/O, and design-matrix construction.
//!
//! CSV layout: header row mandatory, columns `y`, `a`, `w1..wp`. Augmented
//! simulation exports add `u,y0,y1,m0,m1`. Historical files carry `y` and
//! `w1..wp` (an `a` column, if present, must be all zero).

use std::io::{Read, Write};
use std::path::Path;

use crate::numerics::Matrix;

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("row {row}, column `{column}`: cannot parse `{value}` as a number")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}: treatment must be 0 or 1, found `{value}`")]
    InvalidTreatment { row: usize, value: String },
    #[error("length mismatch for {what}: expected {expected}, found {found}")]
    Length {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("invalid dataset: {0}")]
    Invalid(String),
    #[error("design references covariate column {index} but only {available} exist")]
    ColumnIndex { index: usize, available: usize },
    #[error("covariate dimension mismatch: trial has {trial}, historical has {historical}")]
    DimensionMismatch { trial: usize, historical: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Arm of a two-arm trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Arm {
    Control,
    Treated,
}

impl Arm {
    pub fn indicator(self) -> u8 {
        match self {
            Arm::Control => 0,
            Arm::Treated => 1,
        }
    }

    pub fn from_indicator(a: u8) -> Self {
        if a == 1 {
            Arm::Treated
        } else {
            Arm::Control
        }
    }

    /// ±1 coding.
    pub fn signed(self) -> f64 {
        match self {
            Arm::Control => -1.0,
            Arm::Treated => 1.0,
        }
    }
}

/// `n` rows of (W, A, Y) with the known randomization probability of A = 1.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialDataset {
    w: Matrix,
    a: Vec<u8>,
    y: Vec<f64>,
    pi1: f64,
}

impl TrialDataset {
    pub fn new(w: Matrix, a: Vec<u8>, y: Vec<f64>, pi1: f64) -> Result<Self, DataError> {
        let n = y.len();
        if a.len() != n {
            return Err(DataError::Length {
                what: "treatment",
                expected: n,
                found: a.len(),
            });
        }
        if w.rows() != n {
            return Err(DataError::Length {
                what: "covariates",
                expected: n,
                found: w.rows(),
            });
        }
        if let Some(i) = a.iter().position(|&v| v > 1) {
            return Err(DataError::InvalidTreatment {
                row: i + 1,
                value: a[i].to_string(),
            });
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(DataError::Invalid(format!("outcome in row {} is not finite", i + 1)));
        }
        if !(pi1 > 0.0 && pi1 < 1.0) {
            return Err(DataError::Invalid(format!("pi1 must lie in (0, 1), got {pi1}")));
        }
        if n < 4 {
            return Err(DataError::Invalid(format!("need at least 4 rows, got {n}")));
        }
        let n1 = a.iter().filter(|&&v| v == 1).count();
        if n1 == 0 || n1 == n {
            return Err(DataError::Invalid("both arms must be nonempty".into()));
        }
        Ok(Self { w, a, y, pi1 })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.w.cols()
    }

    pub fn w(&self) -> &Matrix {
        &self.w
    }

    pub fn a(&self) -> &[u8] {
        &self.a
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn pi1(&self) -> f64 {
        self.pi1
    }

    pub fn arm(&self, i: usize) -> Arm {
        Arm::from_indicator(self.a[i])
    }

    /// `π_a` for the given arm.
    pub fn pi(&self, arm: Arm) -> f64 {
        match arm {
            Arm::Treated => self.pi1,
            Arm::Control => 1.0 - self.pi1,
        }
    }

    /// (n₁, n₀).
    pub fn arm_sizes(&self) -> (usize, usize) {
        let n1 = self.a.iter().filter(|&&v| v == 1).count();
        (n1, self.n() - n1)
    }

    /// Arm-specific outcome means (treated, control).
    pub fn arm_means(&self) -> (f64, f64) {
        let (mut s1, mut s0) = (0.0, 0.0);
        for (&a, &y) in self.a.iter().zip(&self.y) {
            if a == 1 {
                s1 += y;
            } else {
                s0 += y;
            }
        }
        let (n1, n0) = self.arm_sizes();
        (s1 / n1 as f64, s0 / n0 as f64)
    }

    pub fn with_pi1(mut self, pi1: f64) -> Result<Self, DataError> {
        if !(pi1 > 0.0 && pi1 < 1.0) {
            return Err(DataError::Invalid(format!("pi1 must lie in (0, 1), got {pi1}")));
        }
        self.pi1 = pi1;
        Ok(self)
    }

    /// Same rows with a different outcome vector.
    pub fn with_outcome(&self, y: Vec<f64>) -> Result<Self, DataError> {
        Self::new(self.w.clone(), self.a.clone(), y, self.pi1)
    }

    /// Same (A, Y) with a different covariate matrix.
    pub fn with_covariates(&self, w: Matrix) -> Result<Self, DataError> {
        Self::new(w, self.a.clone(), self.y.clone(), self.pi1)
    }

    /// Learner features: `[a, w1..wp]` per row.
    pub fn arm_features(&self) -> Matrix {
        let p = self.p();
        let mut values = Vec::with_capacity(self.n() * (p + 1));
        for i in 0..self.n() {
            values.push(self.a[i] as f64);
            values.extend_from_slice(self.w.row(i));
        }
        Matrix::new(self.n(), p + 1, values).expect("finite by construction")
    }
}

/// Control-only external data (D = 0).
#[derive(Debug, Clone, PartialEq)]
pub struct HistoricalDataset {
    w: Matrix,
    y: Vec<f64>,
}

impl HistoricalDataset {
    pub fn new(w: Matrix, y: Vec<f64>) -> Result<Self, DataError> {
        if w.rows() != y.len() {
            return Err(DataError::Length {
                what: "covariates",
                expected: y.len(),
                found: w.rows(),
            });
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(DataError::Invalid(format!("outcome in row {} is not finite", i + 1)));
        }
        Ok(Self { w, y })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.w.cols()
    }

    pub fn w(&self) -> &Matrix {
        &self.w
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }
}

/// Simulated trial with its latent truth.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedTrialDataset {
    pub trial: TrialDataset,
    pub u: Vec<f64>,
    pub y0: Vec<f64>,
    pub y1: Vec<f64>,
    pub m0: Vec<f64>,
    pub m1: Vec<f64>,
}

impl AugmentedTrialDataset {
    pub fn new(
        trial: TrialDataset,
        u: Vec<f64>,
        y0: Vec<f64>,
        y1: Vec<f64>,
        m0: Vec<f64>,
        m1: Vec<f64>,
    ) -> Result<Self, DataError> {
        let n = trial.n();
        for (what, v) in [("u", &u), ("y0", &y0), ("y1", &y1), ("m0", &m0), ("m1", &m1)] {
            if v.len() != n {
                return Err(DataError::Length {
                    what,
                    expected: n,
                    found: v.len(),
                });
            }
        }
        for i in 0..n {
            let expected = if trial.a()[i] == 1 { y1[i] } else { y0[i] };
            if trial.y()[i] != expected {
                return Err(DataError::Invalid(format!(
                    "row {}: observed outcome is not the realized potential outcome",
                    i + 1
                )));
            }
        }
        Ok(Self {
            trial,
            u,
            y0,
            y1,
            m0,
            m1,
        })
    }
}

// ---------------------------------------------------------------------------
// CSV

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn read<R: Read>(reader: R) -> Result<Self, DataError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            rows.push(rec?.iter().map(|s| s.trim().to_string()).collect());
        }
        Ok(Self { header, rows })
    }

    fn index(&self, name: &str) -> Result<usize, DataError> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::MissingColumn(name.to_string()))
    }

    fn numeric(&self, name: &str) -> Result<Vec<f64>, DataError> {
        let j = self.index(name)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let cell = row.get(j).map(String::as_str).unwrap_or("");
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| DataError::Parse {
                        row: i + 1,
                        column: name.to_string(),
                        value: cell.to_string(),
                    })
            })
            .collect()
    }

    fn treatment(&self) -> Result<Vec<u8>, DataError> {
        let j = self.index("a")?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let cell = row.get(j).map(String::as_str).unwrap_or("");
                match cell.parse::<f64>() {
                    Ok(0.0) => Ok(0),
                    Ok(1.0) => Ok(1),
                    Ok(_) => Err(DataError::InvalidTreatment {
                        row: i + 1,
                        value: cell.to_string(),
                    }),
                    Err(_) => Err(DataError::Parse {
                        row: i + 1,
                        column: "a".into(),
                        value: cell.to_string(),
                    }),
                }
            })
            .collect()
    }

    /// Covariate columns `w<k>` in header order.
    fn covariates(&self) -> Result<Matrix, DataError> {
        let names: Vec<String> = self
            .header
            .iter()
            .filter(|h| {
                h.len() > 1 && h.starts_with('w') && h[1..].chars().all(|c| c.is_ascii_digit())
            })
            .cloned()
            .collect();
        let cols = names
            .iter()
            .map(|name| self.numeric(name))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Matrix::from_columns(self.rows.len(), &cols).expect("parsed values are finite"))
    }
}

pub fn read_trial<R: Read>(reader: R) -> Result<TrialDataset, DataError> {
    let table = Table::read(reader)?;
    let y = table.numeric("y")?;
    let a = table.treatment()?;
    let w = table.covariates()?;
    TrialDataset::new(w, a, y, 0.5)
}

/// Reads a trial CSV (π₁ = 0.5).
pub fn read_trial_csv(path: impl AsRef<Path>) -> Result<TrialDataset, DataError> {
    read_trial(std::fs::File::open(path)?)
}

pub fn read_augmented_csv(path: impl AsRef<Path>) -> Result<AugmentedTrialDataset, DataError> {
    let table = Table::read(std::fs::File::open(path)?)?;
    let trial = TrialDataset::new(table.covariates()?, table.treatment()?, table.numeric("y")?, 0.5)?;
    AugmentedTrialDataset::new(
        trial,
        table.numeric("u")?,
        table.numeric("y0")?,
        table.numeric("y1")?,
        table.numeric("m0")?,
        table.numeric("m1")?,
    )
}

pub fn read_historical_csv(path: impl AsRef<Path>) -> Result<HistoricalDataset, DataError> {
    let table = Table::read(std::fs::File::open(path)?)?;
    if table.index("a").is_ok() {
        let a = table.treatment()?;
        if let Some(i) = a.iter().position(|&v| v != 0) {
            return Err(DataError::InvalidTreatment {
                row: i + 1,
                value: "1 (historical data are control-only)".into(),
            });
        }
    }
    HistoricalDataset::new(table.covariates()?, table.numeric("y")?)
}

fn covariate_header(p: usize) -> impl Iterator<Item = String> {
    (1..=p).map(|k| format!("w{k}"))
}

fn num(v: f64) -> String {
    v.to_string()
}

pub fn write_trial<W: Write>(data: &TrialDataset, out: W) -> Result<(), DataError> {
    let mut wtr = csv::Writer::from_writer(out);
    let mut header = vec!["y".to_string(), "a".to_string()];
    header.extend(covariate_header(data.p()));
    wtr.write_record(&header)?;
    for i in 0..data.n() {
        let mut rec = vec![num(data.y()[i]), data.a()[i].to_string()];
        rec.extend(data.w().row(i).iter().map(|&v| num(v)));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_trial_csv(data: &TrialDataset, path: impl AsRef<Path>) -> Result<(), DataError> {
    write_trial(data, std::fs::File::create(path)?)
}

pub fn write_augmented<W: Write>(data: &AugmentedTrialDataset, out: W) -> Result<(), DataError> {
    let t = &data.trial;
    let mut wtr = csv::Writer::from_writer(out);
    let mut header = vec!["y".to_string(), "a".to_string()];
    header.extend(covariate_header(t.p()));
    header.extend(["u", "y0", "y1", "m0", "m1"].map(String::from));
    wtr.write_record(&header)?;
    for i in 0..t.n() {
        let mut rec = vec![num(t.y()[i]), t.a()[i].to_string()];
        rec.extend(t.w().row(i).iter().map(|&v| num(v)));
        rec.extend(
            [data.u[i], data.y0[i], data.y1[i], data.m0[i], data.m1[i]]
                .iter()
                .map(|&v| num(v)),
        );
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_augmented_csv(
    data: &AugmentedTrialDataset,
    path: impl AsRef<Path>,
) -> Result<(), DataError> {
    write_augmented(data, std::fs::File::create(path)?)
}

pub fn write_historical_csv(
    data: &HistoricalDataset,
    path: impl AsRef<Path>,
) -> Result<(), DataError> {
    let mut wtr = csv::Writer::from_path(path)?;
    let mut header = vec!["y".to_string()];
    header.extend(covariate_header(data.p()));
    wtr.write_record(&header)?;
    for i in 0..data.n() {
        let mut rec = vec![num(data.y()[i])];
        rec.extend(data.w().row(i).iter().map(|&v| num(v)));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Design matrices

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TreatmentCoding {
    /// A ∈ {0, 1}
    ZeroOne,
    /// A± = 2A − 1
    PlusMinus,
}

impl TreatmentCoding {
    pub fn code(self, arm: Arm) -> f64 {
        match self {
            TreatmentCoding::ZeroOne => arm.indicator() as f64,
            TreatmentCoding::PlusMinus => arm.signed(),
        }
    }
}

/// An appended adjustment column.
#[derive(Debug, Clone, PartialEq)]
pub enum ScoreColumn {
    /// Does not depend on treatment (e.g. a historical prognostic score).
    Fixed(Vec<f64>),
    /// A function of (a, w): the observed design uses the row's own arm,
    /// counterfactual designs the forced arm.
    ByArm { treated: Vec<f64>, control: Vec<f64> },
}

impl ScoreColumn {
    fn len(&self) -> usize {
        match self {
            ScoreColumn::Fixed(v) => v.len(),
            ScoreColumn::ByArm { treated, .. } => treated.len(),
        }
    }

    fn value(&self, i: usize, arm: Arm) -> f64 {
        match self {
            ScoreColumn::Fixed(v) => v[i],
            ScoreColumn::ByArm { treated, control } => match arm {
                Arm::Treated => treated[i],
                Arm::Control => control[i],
            },
        }
    }
}

/// Recipe for the linear working model's design matrix.
///
/// Column order: `[intercept?, treatment, covariates…, score?, interactions…]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSpec {
    pub include_intercept: bool,
    pub treatment_coding: TreatmentCoding,
    pub covariate_columns: Vec<usize>,
    pub center_covariates: bool,
    pub score: Option<ScoreColumn>,
    /// Treatment × covariate products.
    pub interactions: bool,
}

impl DesignSpec {
    /// Intercept and treatment only.
    pub fn unadjusted() -> Self {
        Self {
            include_intercept: true,
            treatment_coding: TreatmentCoding::ZeroOne,
            covariate_columns: Vec::new(),
            center_covariates: false,
            score: None,
            interactions: false,
        }
    }

    /// Intercept, treatment and the first `p` covariates as main effects.
    pub fn main_effects(p: usize) -> Self {
        Self {
            covariate_columns: (0..p).collect(),
            ..Self::unadjusted()
        }
    }

    pub fn with_score(mut self, score: ScoreColumn) -> Self {
        self.score = Some(score);
        self
    }

    pub fn with_coding(mut self, coding: TreatmentCoding) -> Self {
        self.treatment_coding = coding;
        self
    }

    pub fn treatment_column(&self) -> usize {
        usize::from(self.include_intercept)
    }

    pub fn n_columns(&self) -> usize {
        let k = self.covariate_columns.len();
        self.treatment_column()
            + 1
            + k
            + usize::from(self.score.is_some())
            + if self.interactions { k } else { 0 }
    }

    /// True when the treatment coefficient equals the plug-in effect (up to
    /// the coding scale): no interactions, or interactions on centered covariates.
    pub fn coefficient_is_effect(&self) -> bool {
        !self.interactions || self.center_covariates
    }

    pub fn validate(&self, data: &TrialDataset) -> Result<(), DataError> {
        for &j in &self.covariate_columns {
            if j >= data.p() {
                return Err(DataError::ColumnIndex {
                    index: j,
                    available: data.p(),
                });
            }
        }
        if let Some(score) = &self.score {
            let found = score.len();
            let mismatch = match score {
                ScoreColumn::Fixed(_) => found != data.n(),
                ScoreColumn::ByArm { treated, control } => {
                    treated.len() != data.n() || control.len() != data.n()
                }
            };
            if mismatch {
                return Err(DataError::Length {
                    what: "score column",
                    expected: data.n(),
                    found,
                });
            }
        }
        Ok(())
    }
}

fn covariate_block(data: &TrialDataset, spec: &DesignSpec) -> Vec<Vec<f64>> {
    spec.covariate_columns
        .iter()
        .map(|&j| {
            let mut col = data.w().column(j);
            if spec.center_covariates {
                let mean = col.iter().sum::<f64>() / col.len() as f64;
                col.iter_mut().for_each(|v| *v -= mean);
            }
            col
        })
        .collect()
}

fn assemble(
    data: &TrialDataset,
    spec: &DesignSpec,
    covs: &[Vec<f64>],
    forced: Option<Arm>,
) -> Result<Matrix, DataError> {
    let n = data.n();
    let k = spec.n_columns();
    let mut values = Vec::with_capacity(n * k);
    for i in 0..n {
        let arm = forced.unwrap_or_else(|| data.arm(i));
        let t = spec.treatment_coding.code(arm);
        if spec.include_intercept {
            values.push(1.0);
        }
        values.push(t);
        values.extend(covs.iter().map(|c| c[i]));
        if let Some(score) = &spec.score {
            values.push(score.value(i, arm));
        }
        if spec.interactions {
            values.extend(covs.iter().map(|c| t * c[i]));
        }
    }
    Matrix::new(n, k, values).map_err(|e| DataError::Invalid(format!("design: {e}")))
}

/// Observed-data design matrix.
pub fn build_design(data: &TrialDataset, spec: &DesignSpec) -> Result<Matrix, DataError> {
    spec.validate(data)?;
    let covs = covariate_block(data, spec);
    assemble(data, spec, &covs, None)
}

/// Designs with every row's treatment forced to 1 and to 0, in that order.
/// Centering constants are those of the observed sample.
pub fn counterfactual_designs(
    data: &TrialDataset,
    spec: &DesignSpec,
) -> Result<(Matrix, Matrix), DataError> {
    spec.validate(data)?;
    let covs = covariate_block(data, spec);
    Ok((
        assemble(data, spec, &covs, Some(Arm::Treated))?,
        assemble(data, spec, &covs, Some(Arm::Control))?,
    ))
}
