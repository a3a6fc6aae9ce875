//! Least-squares fitting of the six model forms (linear and power-law, one
//! or two predictors) with standard errors, t/F tests, and residual
//! diagnostics (Durbin-Watson, skewness/kurtosis, Jarque-Bera).
//!
//! The solver is a Householder QR decomposition of the design matrix; the
//! predictors differ by orders of magnitude, so the normal equations are
//! avoided in the production path (they do appear as an independent oracle
//! in the test suites).

use serde::{Deserialize, Serialize};
use std::io::Read;
use thiserror::Error;

use crate::parallel;
use crate::special;

/// Transform applied to the response and, uniformly, to the predictors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    Identity,
    Log,
}

/// Which predictors enter the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictorSet {
    Qa,
    Ech,
    Both,
}

impl PredictorSet {
    pub fn count(self) -> usize {
        match self {
            PredictorSet::Qa | PredictorSet::Ech => 1,
            PredictorSet::Both => 2,
        }
    }
}

/// One of the six model forms: identity or log transform paired with a
/// nonempty predictor subset. The transform applies to the response and
/// the predictors together.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub transform: Transform,
    pub predictors: PredictorSet,
}

impl ModelSpec {
    pub const ALL: [ModelSpec; 6] = [
        ModelSpec { transform: Transform::Identity, predictors: PredictorSet::Qa },
        ModelSpec { transform: Transform::Identity, predictors: PredictorSet::Ech },
        ModelSpec { transform: Transform::Identity, predictors: PredictorSet::Both },
        ModelSpec { transform: Transform::Log, predictors: PredictorSet::Qa },
        ModelSpec { transform: Transform::Log, predictors: PredictorSet::Ech },
        ModelSpec { transform: Transform::Log, predictors: PredictorSet::Both },
    ];

    /// Short code used on the command line: l_qa, l_ech, l_both, p_qa, p_ech, p_both.
    pub fn code(&self) -> &'static str {
        match (self.transform, self.predictors) {
            (Transform::Identity, PredictorSet::Qa) => "l_qa",
            (Transform::Identity, PredictorSet::Ech) => "l_ech",
            (Transform::Identity, PredictorSet::Both) => "l_both",
            (Transform::Log, PredictorSet::Qa) => "p_qa",
            (Transform::Log, PredictorSet::Ech) => "p_ech",
            (Transform::Log, PredictorSet::Both) => "p_both",
        }
    }

    pub fn from_code(code: &str) -> Option<ModelSpec> {
        ModelSpec::ALL.iter().copied().find(|m| m.code() == code)
    }
}

/// One aligned observation: production volume (GWh), grid carbon intensity
/// (g CO2 per kWh), and the mass-specific response (kg CO2-eq per kg).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearRow {
    pub year: i32,
    pub qa: f64,
    pub ech: f64,
    pub gwp: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionInput {
    pub rows: Vec<YearRow>,
}

pub const REGRESSION_CSV_HEADER: [&str; 4] =
    ["year", "qa_gwh", "ech_gco2_per_kwh", "gwp_kg_per_kg"];

#[derive(Debug, Error)]
pub enum RegressError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("expected header {expected:?}, found {found:?}")]
    Header { expected: Vec<String>, found: Vec<String> },
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("insufficient data: n = {n} rows cannot support {k} predictor(s); need n >= k + 2")]
    InsufficientData { n: usize, k: usize },
    #[error("design matrix is rank deficient at column '{column}'")]
    RankDeficient { column: String },
    #[error("log transform requires positive values: {column} is {value} in year {year}")]
    NonPositiveUnderLog { column: String, value: f64, year: i32 },
    #[error("response is constant; coefficient of determination is undefined")]
    DegenerateResponse,
    #[error("degrees of freedom must be at least 1, got {0}")]
    InvalidDf(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("residual vector too short: need at least {need}, got {got}")]
    TooFewResiduals { need: usize, got: usize },
    #[error("residuals are degenerate (zero variance)")]
    DegenerateResiduals,
}

impl RegressionInput {
    pub fn from_reader<R: Read>(reader: R) -> Result<Self, RegressError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers: Vec<String> =
            rdr.headers()?.iter().map(|s| s.to_string()).collect();
        if headers != REGRESSION_CSV_HEADER {
            return Err(RegressError::Header {
                expected: REGRESSION_CSV_HEADER.iter().map(|s| s.to_string()).collect(),
                found: headers,
            });
        }
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row_no = i + 2; // 1-based, after header
            let field = |idx: usize| -> Result<f64, RegressError> {
                rec.get(idx)
                    .ok_or_else(|| RegressError::Row {
                        row: row_no,
                        message: "missing field".into(),
                    })?
                    .parse::<f64>()
                    .map_err(|e| RegressError::Row { row: row_no, message: e.to_string() })
            };
            let year: i32 = rec
                .get(0)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| RegressError::Row { row: row_no, message: "bad year".into() })?;
            let (qa, ech, gwp) = (field(1)?, field(2)?, field(3)?);
            for (name, v) in [("qa_gwh", qa), ("ech_gco2_per_kwh", ech), ("gwp_kg_per_kg", gwp)] {
                if !v.is_finite() {
                    return Err(RegressError::Row {
                        row: row_no,
                        message: format!("{name} is not finite"),
                    });
                }
            }
            rows.push(YearRow { year, qa, ech, gwp });
        }
        Ok(RegressionInput { rows })
    }
}

/// One fitted coefficient with its inferential statistics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    pub value: f64,
    pub std_error: f64,
    pub t_stat: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub model: String,
    pub coefficients: Vec<Coefficient>,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    pub f_stat: f64,
    pub f_p_value: f64,
    pub residuals: Vec<f64>,
    pub df_resid: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidualDiagnostics {
    pub durbin_watson: f64,
    pub skewness: f64,
    pub kurtosis: f64,
    pub jb_stat: f64,
    pub jb_p: f64,
}

/// Two-sided t-distribution tail probability.
pub fn t_p_value(t: f64, df: usize) -> Result<f64, RegressError> {
    if df < 1 {
        return Err(RegressError::InvalidDf(df));
    }
    Ok(special::student_t_two_sided(t, df))
}

/// Upper-tail F-distribution probability.
pub fn f_p_value(f: f64, df1: usize, df2: usize) -> Result<f64, RegressError> {
    if df1 < 1 {
        return Err(RegressError::InvalidDf(df1));
    }
    if df2 < 1 {
        return Err(RegressError::InvalidDf(df2));
    }
    if f < 0.0 || f.is_nan() {
        return Err(RegressError::InvalidArgument(format!(
            "F statistic must be nonnegative, got {f}"
        )));
    }
    Ok(special::f_upper_tail(f, df1, df2))
}

/// Durbin-Watson statistic: sum of squared first differences over the
/// residual sum of squares. Lies in [0, 4]; 2 means no first-order
/// autocorrelation.
pub fn durbin_watson(residuals: &[f64]) -> Result<f64, RegressError> {
    if residuals.len() < 2 {
        return Err(RegressError::TooFewResiduals { need: 2, got: residuals.len() });
    }
    let ss: f64 = residuals.iter().map(|e| e * e).sum();
    if ss == 0.0 {
        return Err(RegressError::DegenerateResiduals);
    }
    let diff: f64 = residuals.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    Ok(diff / ss)
}

/// Sample skewness and kurtosis from biased central-moment estimators.
/// Kurtosis is non-excess (a normal sample tends to 3).
pub fn moments(residuals: &[f64]) -> Result<(f64, f64), RegressError> {
    let n = residuals.len();
    if n < 3 {
        return Err(RegressError::TooFewResiduals { need: 3, got: n });
    }
    let nf = n as f64;
    let mean = residuals.iter().sum::<f64>() / nf;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for e in residuals {
        let d = e - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;
    if m2 <= 0.0 {
        return Err(RegressError::DegenerateResiduals);
    }
    Ok((m3 / m2.powf(1.5), m4 / (m2 * m2)))
}

/// Jarque-Bera statistic JB = (n/6)(g1^2 + (g2 - 3)^2 / 4) and its p-value
/// from the chi-squared distribution with 2 degrees of freedom.
pub fn jarque_bera(skewness: f64, kurtosis: f64, n: usize) -> (f64, f64) {
    let jb = n as f64 / 6.0 * (skewness * skewness + (kurtosis - 3.0).powi(2) / 4.0);
    (jb, special::chi_squared_upper_tail(jb, 2))
}

/// Full residual diagnostics for a fitted model.
pub fn diagnostics(residuals: &[f64]) -> Result<ResidualDiagnostics, RegressError> {
    let dw = durbin_watson(residuals)?;
    let (skew, kurt) = moments(residuals)?;
    let (jb_stat, jb_p) = jarque_bera(skew, kurt, residuals.len());
    Ok(ResidualDiagnostics { durbin_watson: dw, skewness: skew, kurtosis: kurt, jb_stat, jb_p })
}

fn predictor_columns(spec: &ModelSpec) -> Vec<&'static str> {
    match spec.predictors {
        PredictorSet::Qa => vec!["Qa"],
        PredictorSet::Ech => vec!["Ech"],
        PredictorSet::Both => vec!["Qa", "Ech"],
    }
}

/// Fit `spec` to `data` by ordinary least squares.
///
/// For log models the transform is applied to the response and predictors
/// before fitting and the coefficients are reported in log space. Standard
/// errors come from s^2 (X^T X)^-1 with s^2 = SSR / df_resid; p-values are
/// two-sided from the t distribution with df_resid degrees of freedom.
pub fn fit(spec: &ModelSpec, data: &RegressionInput) -> Result<FitResult, RegressError> {
    let n = data.rows.len();
    let k = spec.predictors.count();
    if n < k + 2 {
        return Err(RegressError::InsufficientData { n, k });
    }
    let cols = predictor_columns(spec);
    let m = k + 1;

    let mut design = vec![0.0; n * m];
    let mut y = vec![0.0; n];
    for (i, row) in data.rows.iter().enumerate() {
        let mut raw = Vec::with_capacity(k + 1);
        for &c in &cols {
            raw.push((c, if c == "Qa" { row.qa } else { row.ech }));
        }
        raw.push(("response", row.gwp));
        if spec.transform == Transform::Log {
            for (name, v) in &raw {
                if *v <= 0.0 {
                    return Err(RegressError::NonPositiveUnderLog {
                        column: name.to_string(),
                        value: *v,
                        year: row.year,
                    });
                }
            }
        }
        let tf = |v: f64| match spec.transform {
            Transform::Identity => v,
            Transform::Log => v.ln(),
        };
        design[i * m] = 1.0;
        for (j, &c) in cols.iter().enumerate() {
            design[i * m + j + 1] = tf(if c == "Qa" { row.qa } else { row.ech });
        }
        y[i] = tf(row.gwp);
    }

    let names: Vec<String> = std::iter::once("beta_0".to_string())
        .chain(cols.iter().map(|c| format!("beta_{c}")))
        .collect();

    let x_orig = design.clone();
    let y_orig = y.clone();
    let r = householder_qr(&mut design, &mut y, n, m);

    // rank check on the R diagonal
    let r_max = (0..m).map(|j| r[j * m + j].abs()).fold(0.0_f64, f64::max);
    let tol = f64::EPSILON * (n as f64) * r_max.max(1.0);
    for j in 0..m {
        if r[j * m + j].abs() <= tol {
            return Err(RegressError::RankDeficient { column: names[j].clone() });
        }
    }

    // back-substitute R beta = (Q^T y)[..m]
    let mut beta = vec![0.0; m];
    for j in (0..m).rev() {
        let mut acc = y[j];
        for l in (j + 1)..m {
            acc -= r[j * m + l] * beta[l];
        }
        beta[j] = acc / r[j * m + j];
    }

    // residuals against the untransformed design copy
    let mut residuals = vec![0.0; n];
    for i in 0..n {
        let mut pred = 0.0;
        for j in 0..m {
            pred += x_orig[i * m + j] * beta[j];
        }
        residuals[i] = y_orig[i] - pred;
    }

    let ssr: f64 = residuals.iter().map(|e| e * e).sum();
    let y_mean = y_orig.iter().sum::<f64>() / n as f64;
    let sst: f64 = y_orig.iter().map(|v| (v - y_mean).powi(2)).sum();
    if sst == 0.0 {
        return Err(RegressError::DegenerateResponse);
    }
    let df_resid = n - m;
    let r_squared = 1.0 - ssr / sst;
    let adj_r_squared = 1.0 - (1.0 - r_squared) * (n as f64 - 1.0) / df_resid as f64;
    let s2 = ssr / df_resid as f64;

    // diag of (X^T X)^-1 = diag(R^-1 R^-T): row norms of R^-1
    let rinv = invert_upper_triangular(&r, m);
    let mut coefficients = Vec::with_capacity(m);
    for j in 0..m {
        let c_jj: f64 = (j..m).map(|l| rinv[j * m + l] * rinv[j * m + l]).sum();
        let std_error = (s2 * c_jj).sqrt();
        let t_stat = if std_error > 0.0 { beta[j] / std_error } else { f64::INFINITY };
        let p_value = special::student_t_two_sided(t_stat, df_resid);
        coefficients.push(Coefficient {
            name: names[j].clone(),
            value: beta[j],
            std_error,
            t_stat,
            p_value,
        });
    }

    let f_stat = if (1.0 - r_squared).abs() < f64::EPSILON {
        f64::INFINITY
    } else {
        (r_squared / k as f64) / ((1.0 - r_squared) / df_resid as f64)
    };
    let f_p_value = special::f_upper_tail(f_stat, k, df_resid);

    Ok(FitResult {
        model: spec.code().to_string(),
        coefficients,
        r_squared,
        adj_r_squared,
        f_stat,
        f_p_value,
        residuals,
        df_resid,
    })
}

/// In-place Householder QR of the n x m row-major matrix `a`, applying the
/// same reflections to `y`. Returns R packed into the upper triangle of an
/// m x m row-major matrix; on return `y` holds Q^T y.
fn householder_qr(a: &mut [f64], y: &mut [f64], n: usize, m: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    for col in 0..m {
        let sigma: f64 = (col..n).map(|i| a[i * m + col] * a[i * m + col]).sum();
        let norm = sigma.sqrt();
        if norm == 0.0 {
            continue; // column already zero; rank check happens on R
        }
        let alpha = if a[col * m + col] > 0.0 { -norm } else { norm };
        for i in col..n {
            v[i] = a[i * m + col];
        }
        v[col] -= alpha;
        let vtv = -2.0 * alpha * v[col]; // |x|^2 - 2 alpha x_k + alpha^2
        if vtv == 0.0 {
            continue;
        }
        for j in col..m {
            let w: f64 = (col..n).map(|i| v[i] * a[i * m + j]).sum();
            let tau = 2.0 * w / vtv;
            for i in col..n {
                a[i * m + j] -= tau * v[i];
            }
        }
        let w: f64 = (col..n).map(|i| v[i] * y[i]).sum();
        let tau = 2.0 * w / vtv;
        for i in col..n {
            y[i] -= tau * v[i];
        }
    }
    let mut r = vec![0.0; m * m];
    for j in 0..m {
        for l in j..m {
            r[j * m + l] = a[j * m + l];
        }
    }
    r
}

/// Inverse of an upper-triangular m x m row-major matrix.
fn invert_upper_triangular(r: &[f64], m: usize) -> Vec<f64> {
    let mut inv = vec![0.0; m * m];
    for j in (0..m).rev() {
        inv[j * m + j] = 1.0 / r[j * m + j];
        for l in (j + 1)..m {
            let mut acc = 0.0;
            for p in (j + 1)..=l {
                acc += r[j * m + p] * inv[p * m + l];
            }
            inv[j * m + l] = -acc / r[j * m + j];
        }
    }
    inv
}

/// Assessment of one model form within the selection report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelAssessment {
    pub model: String,
    pub r_squared: Option<f64>,
    pub f_p_value: Option<f64>,
    pub coefficient_p_values: Option<Vec<f64>>,
    pub flagged: bool,
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionReport {
    pub alpha: f64,
    pub models: Vec<ModelAssessment>,
}

/// Fit all six model forms and rank them by overall F p-value, flagging
/// models whose every coefficient p-value falls below `alpha`. Log forms
/// that cannot be fitted (nonpositive data) are listed last with a note.
pub fn model_selection_report(
    data: &RegressionInput,
    alpha: f64,
) -> Result<SelectionReport, RegressError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(RegressError::InvalidArgument(format!(
            "alpha must be in (0, 1), got {alpha}"
        )));
    }
    let fits = parallel::map_ordered(&ModelSpec::ALL, |spec| (spec.code(), fit(spec, data)));
    let mut models = Vec::with_capacity(fits.len());
    for (code, outcome) in fits {
        match outcome {
            Ok(res) => {
                let ps: Vec<f64> = res.coefficients.iter().map(|c| c.p_value).collect();
                let flagged = ps.iter().all(|p| *p < alpha);
                models.push(ModelAssessment {
                    model: code.to_string(),
                    r_squared: Some(res.r_squared),
                    f_p_value: Some(res.f_p_value),
                    coefficient_p_values: Some(ps),
                    flagged,
                    note: None,
                });
            }
            Err(RegressError::NonPositiveUnderLog { column, value, year }) => {
                models.push(ModelAssessment {
                    model: code.to_string(),
                    r_squared: None,
                    f_p_value: None,
                    coefficient_p_values: None,
                    flagged: false,
                    note: Some(format!(
                        "skipped: log transform needs positive values ({column} = {value} in {year})"
                    )),
                });
            }
            Err(e) => return Err(e),
        }
    }
    // ties (exact fits give f_p = 0 for every nesting) break toward the
    // smaller model, then by code
    let predictor_count =
        |m: &ModelAssessment| ModelSpec::from_code(&m.model).map_or(9, |s| s.predictors.count());
    models.sort_by(|a, b| match (a.f_p_value, b.f_p_value) {
        (Some(x), Some(y)) => x
            .total_cmp(&y)
            .then_with(|| predictor_count(a).cmp(&predictor_count(b)))
            .then_with(|| a.model.cmp(&b.model)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.model.cmp(&b.model),
    });
    Ok(SelectionReport { alpha, models })
}
