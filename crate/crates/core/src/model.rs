//! Observed data, preprocessing, and the joint outcome/treatment design.
//!
//! The outcome equation is linear,
//!
//! ```text
//! Y_i = T_i β_T + X_i β + β_0 + ε_i,     ε_i ~ N(0, σ²)
//! ```
//!
//! and treatment assignment follows a probit law `P(T_i = 1 | X_i) = Φ(X_i γ + γ_0)`,
//! written through a latent utility `T*_i = X_i γ + γ_0 + u_i`, `T_i = 1(T*_i > 0)`.
//! Stacking `W = (Y, T*)` gives a single Gaussian regression `W ~ N(Z ν, Σ)`
//! with block-diagonal design `Z = diag(X_O, X_T)` and `Σ = diag(σ² I_n, I_n)`.

use std::io::Read;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal;

/// Observed outcomes, treatment indicators and predictors.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub y: DVector<f64>,
    pub t: Vec<bool>,
    pub x: DMatrix<f64>,
    pub names: Vec<String>,
}

impl Dataset {
    pub fn new(y: DVector<f64>, t: Vec<bool>, x: DMatrix<f64>, names: Vec<String>) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(Error::InvalidData("dataset has no rows".into()));
        }
        if x.ncols() == 0 {
            return Err(Error::InvalidData("dataset has no predictors".into()));
        }
        if t.len() != n || x.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "y has {n} rows, t has {}, x has {}",
                t.len(),
                x.nrows()
            )));
        }
        if names.len() != x.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "{} predictor names for {} columns",
                names.len(),
                x.ncols()
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("y".into()));
        }
        if let Some(idx) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput(format!("x column {}", idx / n + 1)));
        }
        Ok(Self { y, t, x, names })
    }

    /// Builds a dataset with predictors named `x1..xp`.
    pub fn from_parts(y: DVector<f64>, t: Vec<bool>, x: DMatrix<f64>) -> Result<Self> {
        let names = (1..=x.ncols()).map(|j| format!("x{j}")).collect();
        Self::new(y, t, x, names)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn t_as_f64(&self) -> DVector<f64> {
        DVector::from_iterator(self.t.len(), self.t.iter().map(|&b| f64::from(u8::from(b))))
    }

    /// Reads a CSV file with header `y,t,<predictors...>`.
    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref())?;
        Self::from_csv_reader(file)
    }

    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = rdr.headers()?.clone();
        if header.len() < 3 || &header[0] != "y" || &header[1] != "t" {
            return Err(Error::InvalidData(
                "header must start with `y,t` followed by at least one predictor".into(),
            ));
        }
        let names: Vec<String> = header.iter().skip(2).map(str::to_owned).collect();
        let p = names.len();
        let mut y = Vec::new();
        let mut t = Vec::new();
        let mut x = Vec::new();
        for (row, record) in rdr.records().enumerate() {
            let record = record?;
            let line = row + 2;
            if record.len() != p + 2 {
                return Err(Error::InvalidData(format!(
                    "line {line}: expected {} fields, found {}",
                    p + 2,
                    record.len()
                )));
            }
            let parse = |k: usize| -> Result<f64> {
                let field = &record[k];
                if field.is_empty() || field.eq_ignore_ascii_case("na") {
                    return Err(Error::InvalidData(format!(
                        "line {line}: missing value in column `{}`",
                        &header[k]
                    )));
                }
                field.parse::<f64>().map_err(|_| {
                    Error::InvalidData(format!("line {line}: cannot parse `{field}` as a number"))
                })
            };
            y.push(parse(0)?);
            let tv = parse(1)?;
            t.push(match tv {
                v if v == 0.0 => false,
                v if v == 1.0 => true,
                other => {
                    return Err(Error::InvalidData(format!(
                        "line {line}: treatment must be 0 or 1, found {other}"
                    )))
                }
            });
            for k in 0..p {
                x.push(parse(k + 2)?);
            }
        }
        let n = y.len();
        let x = DMatrix::from_row_slice(n, p, &x);
        Self::new(DVector::from_vec(y), t, x, names)
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec!["y".to_string(), "t".to_string()];
        header.extend(self.names.iter().cloned());
        wtr.write_record(&header)?;
        for i in 0..self.n() {
            let mut rec = vec![self.y[i].to_string(), u8::from(self.t[i]).to_string()];
            rec.extend((0..self.p()).map(|j| self.x[(i, j)].to_string()));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Which intercepts enter the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Intercepts {
    pub outcome: bool,
    pub treatment: bool,
}

/// Preprocessing switches.
///
/// The default centres and scales every predictor, centres the outcome,
/// and centres the treatment column inside the outcome equation, so the
/// outcome intercept `β_0` can be dropped. The probit equation always sees
/// the raw 0/1 treatment and keeps its own intercept `γ_0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StandardizeOptions {
    pub center_y: bool,
    pub center_x: bool,
    pub scale_x: bool,
    pub center_treatment: bool,
    pub intercepts: Intercepts,
}

impl Default for StandardizeOptions {
    fn default() -> Self {
        Self {
            center_y: true,
            center_x: true,
            scale_x: true,
            center_treatment: true,
            intercepts: Intercepts { outcome: false, treatment: true },
        }
    }
}

impl StandardizeOptions {
    /// No transformation at all; both intercepts kept.
    pub fn raw() -> Self {
        Self {
            center_y: false,
            center_x: false,
            scale_x: false,
            center_treatment: false,
            intercepts: Intercepts { outcome: true, treatment: true },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedDataset {
    pub inner: Dataset,
    pub y_center: f64,
    pub x_centers: Vec<f64>,
    pub x_scales: Vec<f64>,
    /// Value subtracted from the 0/1 treatment in the outcome equation.
    pub t_center: f64,
    pub intercepts: Intercepts,
    pub options: StandardizeOptions,
}

fn mean(v: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = v.clone().count() as f64;
    v.sum::<f64>() / n
}

/// Centres/scales the data as requested by `opts`.
pub fn standardize(data: &Dataset, opts: StandardizeOptions) -> Result<StandardizedDataset> {
    let n = data.n();
    let p = data.p();
    let mut x = data.x.clone();
    let mut centers = vec![0.0; p];
    let mut scales = vec![1.0; p];
    for j in 0..p {
        let col = data.x.column(j);
        let m = mean(col.iter().copied());
        if opts.scale_x {
            let ss: f64 = col.iter().map(|v| (v - m) * (v - m)).sum();
            let sd = if n > 1 { (ss / (n as f64 - 1.0)).sqrt() } else { 0.0 };
            if !(sd > 1e-12 * (1.0 + m.abs())) {
                return Err(Error::ConstantColumn(j + 1));
            }
            scales[j] = sd;
        }
        if opts.center_x {
            centers[j] = m;
        }
        for i in 0..n {
            x[(i, j)] = (data.x[(i, j)] - centers[j]) / scales[j];
        }
    }
    let y_center = if opts.center_y { mean(data.y.iter().copied()) } else { 0.0 };
    let y = data.y.map(|v| v - y_center);
    let t_center = if opts.center_treatment {
        data.t.iter().filter(|&&b| b).count() as f64 / n as f64
    } else {
        0.0
    };
    if opts.intercepts.outcome && opts.center_y && opts.center_treatment && opts.center_x {
        log::debug!("outcome intercept kept although the outcome equation is fully centred");
    }
    let inner = Dataset::new(y, data.t.clone(), x, data.names.clone())?;
    Ok(StandardizedDataset {
        inner,
        y_center,
        x_centers: centers,
        x_scales: scales,
        t_center,
        intercepts: opts.intercepts,
        options: opts,
    })
}

impl StandardizedDataset {
    pub fn n(&self) -> usize {
        self.inner.n()
    }

    pub fn p(&self) -> usize {
        self.inner.p()
    }

    pub fn layout(&self) -> Layout {
        Layout::new(self.p(), self.intercepts)
    }

    /// Treatment column as it enters the outcome equation.
    pub fn outcome_treatment_column(&self) -> DVector<f64> {
        self.inner.t_as_f64().map(|v| v - self.t_center)
    }

    /// Inverts the transformation.
    pub fn unstandardize(&self) -> Dataset {
        let mut x = self.inner.x.clone();
        for j in 0..self.p() {
            for i in 0..self.n() {
                x[(i, j)] = x[(i, j)] * self.x_scales[j] + self.x_centers[j];
            }
        }
        Dataset {
            y: self.inner.y.map(|v| v + self.y_center),
            t: self.inner.t.clone(),
            x,
            names: self.inner.names.clone(),
        }
    }
}

/// Positions of the coefficients inside `ν = (β_T, β_1..β_p, β_0, γ_1..γ_p, γ_0)`.
/// Absent intercepts are skipped, so `dim()` is `2p + 1 + #intercepts`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub p: usize,
    pub intercepts: Intercepts,
}

impl Layout {
    pub fn new(p: usize, intercepts: Intercepts) -> Self {
        Self { p, intercepts }
    }

    pub const fn beta_t(&self) -> usize {
        0
    }

    pub fn beta(&self, j: usize) -> usize {
        debug_assert!(j < self.p);
        1 + j
    }

    pub fn beta0(&self) -> Option<usize> {
        self.intercepts.outcome.then_some(1 + self.p)
    }

    fn gamma_start(&self) -> usize {
        1 + self.p + usize::from(self.intercepts.outcome)
    }

    pub fn gamma(&self, j: usize) -> usize {
        debug_assert!(j < self.p);
        self.gamma_start() + j
    }

    pub fn gamma0(&self) -> Option<usize> {
        self.intercepts.treatment.then_some(self.gamma_start() + self.p)
    }

    /// Number of outcome-equation columns.
    pub fn outcome_dim(&self) -> usize {
        self.gamma_start()
    }

    pub fn dim(&self) -> usize {
        self.gamma_start() + self.p + usize::from(self.intercepts.treatment)
    }

    /// Column labels matching the draw-dump CSV.
    pub fn labels(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.dim());
        out.push("beta_T".to_string());
        out.extend((1..=self.p).map(|j| format!("beta_{j}")));
        if self.intercepts.outcome {
            out.push("beta_0".into());
        }
        out.extend((1..=self.p).map(|j| format!("gamma_{j}")));
        if self.intercepts.treatment {
            out.push("gamma_0".into());
        }
        out
    }
}

/// Stacked response `W = (Y, T*)` and block design `Z`.
#[derive(Debug, Clone)]
pub struct JointDesign {
    pub layout: Layout,
    /// `2n` slots; the latent `T*` half is zero until a sampler fills it.
    pub w: DVector<f64>,
    /// `true` for the observed `Y` slots, `false` for latent `T*`.
    pub observed: Vec<bool>,
    pub z: DMatrix<f64>,
}

impl JointDesign {
    pub fn n(&self) -> usize {
        self.w.len() / 2
    }

    /// `X_O = [T, X, 1]` (columns present per layout).
    pub fn outcome_block(&self) -> DMatrix<f64> {
        let n = self.n();
        self.z.view((0, 0), (n, self.layout.outcome_dim())).into_owned()
    }

    /// `X_T = [X, 1]`.
    pub fn treatment_block(&self) -> DMatrix<f64> {
        let n = self.n();
        let start = self.layout.outcome_dim();
        self.z.view((n, start), (n, self.layout.dim() - start)).into_owned()
    }
}

pub fn build_design(data: &StandardizedDataset) -> JointDesign {
    let n = data.n();
    let p = data.p();
    let layout = data.layout();
    let d = layout.dim();
    let mut z = DMatrix::zeros(2 * n, d);
    let tcol = data.outcome_treatment_column();
    for i in 0..n {
        z[(i, layout.beta_t())] = tcol[i];
        for j in 0..p {
            z[(i, layout.beta(j))] = data.inner.x[(i, j)];
            z[(n + i, layout.gamma(j))] = data.inner.x[(i, j)];
        }
        if let Some(k) = layout.beta0() {
            z[(i, k)] = 1.0;
        }
        if let Some(k) = layout.gamma0() {
            z[(n + i, k)] = 1.0;
        }
    }
    let mut w = DVector::zeros(2 * n);
    w.rows_mut(0, n).copy_from(&data.inner.y);
    let observed = (0..2 * n).map(|k| k < n).collect();
    JointDesign { layout, w, observed, z }
}

/// `P(T = 1 | x) = Φ(x·γ + γ_0)`.
pub fn probit_prob(x_row: &[f64], gamma: &[f64], gamma0: f64) -> f64 {
    assert_eq!(x_row.len(), gamma.len(), "predictor/coefficient length mismatch");
    let eta: f64 = x_row.iter().zip(gamma).map(|(a, b)| a * b).sum::<f64>() + gamma0;
    normal::cdf(eta)
}

/// Hyperparameters of one precise hierarchical prior.
///
/// `(β_j, γ_j)` is a two-component mixture with covariances
/// `τ²·diag(σ², 1)`, `τ ∈ {τ0, τ1}`; `1/σ² ~ Gamma(a, b)` (shape/rate);
/// `π_j ~ Beta(s q_j, s (1 − q_j))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchicalPrior {
    pub tau0: f64,
    pub tau1: f64,
    pub a: f64,
    pub b: f64,
    pub s: f64,
    pub q: Vec<f64>,
}

impl HierarchicalPrior {
    pub const DEFAULT_TAU0: f64 = 1e-6;
    pub const DEFAULT_TAU1: f64 = 1.0;
    pub const DEFAULT_A: f64 = 50.0;
    pub const DEFAULT_B: f64 = 1.0;
    pub const DEFAULT_S: f64 = 1.0;

    pub fn new(tau0: f64, tau1: f64, a: f64, b: f64, s: f64, q: Vec<f64>) -> Result<Self> {
        let prior = Self { tau0, tau1, a, b, s, q };
        prior.validate()?;
        Ok(prior)
    }

    /// Default hyperparameters with a common prior inclusion mean `q`.
    pub fn with_common_q(p: usize, q: f64) -> Result<Self> {
        Self::new(
            Self::DEFAULT_TAU0,
            Self::DEFAULT_TAU1,
            Self::DEFAULT_A,
            Self::DEFAULT_B,
            Self::DEFAULT_S,
            vec![q; p],
        )
    }

    /// Same hyperparameters, every `q_j` replaced by `q`.
    pub fn at_common_q(&self, q: f64) -> Result<Self> {
        let mut out = self.clone();
        out.q.iter_mut().for_each(|v| *v = q);
        out.validate()?;
        Ok(out)
    }

    pub fn p(&self) -> usize {
        self.q.len()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [("tau0", self.tau0), ("tau1", self.tau1), ("a", self.a), ("b", self.b), ("s", self.s)];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if self.tau0 > self.tau1 {
            return Err(Error::InvalidConfig(format!(
                "spike sd tau0={} exceeds slab sd tau1={}",
                self.tau0, self.tau1
            )));
        }
        if let Some(q) = self.q.iter().find(|q| !(**q > 0.0 && **q < 1.0)) {
            return Err(Error::InvalidConfig(format!("prior inclusion mean {q} outside (0, 1)")));
        }
        Ok(())
    }
}
