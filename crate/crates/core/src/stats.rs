//! Study-level dataset handling: CSV ingestion with per-row validation,
//! harmonization of heterogeneous functional units to a mass basis, and
//! descriptive statistics with optional outlier exclusion and per-unit
//! grouping.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::str::FromStr;
use thiserror::Error;

/// Functional unit a study reports against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FunctionalUnit {
    #[serde(rename = "km")]
    Km,
    #[serde(rename = "kWh")]
    KWh,
    #[serde(rename = "kg")]
    Kg,
}

impl fmt::Display for FunctionalUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FunctionalUnit::Km => "km",
            FunctionalUnit::KWh => "kWh",
            FunctionalUnit::Kg => "kg",
        })
    }
}

impl FromStr for FunctionalUnit {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "km" => Ok(FunctionalUnit::Km),
            "kwh" => Ok(FunctionalUnit::KWh),
            "kg" => Ok(FunctionalUnit::Kg),
            other => Err(format!("unknown functional unit '{other}' (expected km, kWh, or kg)")),
        }
    }
}

/// System boundary of a study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    CradleToGate,
    CradleToGrave,
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Boundary::CradleToGate => "cradle_to_gate",
            Boundary::CradleToGrave => "cradle_to_grave",
        })
    }
}

impl FromStr for Boundary {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cradle_to_gate" => Ok(Boundary::CradleToGate),
            "cradle_to_grave" => Ok(Boundary::CradleToGrave),
            other => Err(format!(
                "unknown boundary '{other}' (expected cradle_to_gate or cradle_to_grave)"
            )),
        }
    }
}

/// One meta-analysis data point. `mass_conversion` is the battery mass per
/// functional unit (1 for kg-basis records), so the mass-specific value is
/// `gwp_native / mass_conversion`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRecord {
    pub study_id: String,
    pub year: i32,
    pub chemistry: String,
    pub functional_unit: FunctionalUnit,
    pub boundary: Boundary,
    pub region: String,
    pub gwp_native: f64,
    pub mass_conversion: f64,
    pub outlier: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comment: Option<String>,
}

/// Mass-specific emissions of one record, kg CO2-eq per kg of battery.
pub fn to_mass_basis(record: &StudyRecord) -> f64 {
    record.gwp_native / record.mass_conversion
}

pub const DATASET_CSV_HEADER: [&str; 9] = [
    "study_id",
    "year",
    "chemistry",
    "functional_unit",
    "boundary",
    "region",
    "gwp_native",
    "mass_conversion",
    "outlier",
];

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("expected header {expected:?} (optionally followed by 'comment'), found {found:?}")]
    Header { expected: Vec<String>, found: Vec<String> },
    #[error("dataset rejected: {}", format_row_errors(.0))]
    InvalidRows(Vec<RowError>),
    #[error("no records match filter '{filter}'")]
    EmptySubset { filter: String },
}

#[derive(Debug)]
pub struct RowError {
    pub row: usize,
    pub message: String,
}

fn format_row_errors(errors: &[RowError]) -> String {
    errors
        .iter()
        .map(|e| format!("row {}: {}", e.row, e.message))
        .collect::<Vec<_>>()
        .join("; ")
}

/// Parse and validate the dataset CSV. A file containing any invalid row is
/// rejected as a whole; the error reports every offending row.
pub fn ingest_dataset<R: Read>(reader: R) -> Result<Vec<StudyRecord>, StatsError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(|s| s.to_string()).collect();
    let base_ok = headers.len() >= DATASET_CSV_HEADER.len()
        && headers[..DATASET_CSV_HEADER.len()] == DATASET_CSV_HEADER;
    let has_comment = headers.len() == DATASET_CSV_HEADER.len() + 1
        && headers.last().map(String::as_str) == Some("comment");
    if !(base_ok && (headers.len() == DATASET_CSV_HEADER.len() || has_comment)) {
        return Err(StatsError::Header {
            expected: DATASET_CSV_HEADER.iter().map(|s| s.to_string()).collect(),
            found: headers,
        });
    }

    let mut records = Vec::new();
    let mut errors = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                errors.push(RowError { row, message: e.to_string() });
                continue;
            }
        };
        match parse_record(&rec, has_comment) {
            Ok(r) => records.push(r),
            Err(message) => errors.push(RowError { row, message }),
        }
    }
    if !errors.is_empty() {
        return Err(StatsError::InvalidRows(errors));
    }
    Ok(records)
}

fn parse_record(rec: &csv::StringRecord, has_comment: bool) -> Result<StudyRecord, String> {
    let get = |i: usize, name: &str| -> Result<&str, String> {
        rec.get(i).ok_or_else(|| format!("missing column '{name}'"))
    };
    let study_id = get(0, "study_id")?.to_string();
    if study_id.is_empty() {
        return Err("study_id is empty".into());
    }
    let year: i32 = get(1, "year")?.parse().map_err(|e| format!("year: {e}"))?;
    let chemistry = get(2, "chemistry")?.to_string();
    let functional_unit: FunctionalUnit = get(3, "functional_unit")?.parse()?;
    let boundary: Boundary = get(4, "boundary")?.parse()?;
    let region = get(5, "region")?.to_string();
    let gwp_native: f64 =
        get(6, "gwp_native")?.parse().map_err(|e| format!("gwp_native: {e}"))?;
    let mass_conversion: f64 = get(7, "mass_conversion")?
        .parse()
        .map_err(|e| format!("mass_conversion: {e}"))?;
    let outlier: bool = get(8, "outlier")?.parse().map_err(|e| format!("outlier: {e}"))?;
    let comment = if has_comment {
        rec.get(9).filter(|s| !s.is_empty()).map(str::to_string)
    } else {
        None
    };

    if !gwp_native.is_finite() {
        return Err(format!("gwp_native {gwp_native} is not finite"));
    }
    if !(mass_conversion.is_finite() && mass_conversion > 0.0) {
        return Err(format!("mass_conversion must be positive and finite, got {mass_conversion}"));
    }
    let mass_value = gwp_native / mass_conversion;
    if !(mass_value.is_finite() && mass_value > 0.0) {
        return Err(format!(
            "mass-specific value {mass_value} (gwp_native / mass_conversion) must be positive"
        ));
    }
    Ok(StudyRecord {
        study_id,
        year,
        chemistry,
        functional_unit,
        boundary,
        region,
        gwp_native,
        mass_conversion,
        outlier,
        comment,
    })
}

/// Descriptive statistics of a record subset on the mass basis.
/// `std_dev` uses the sample (n - 1) denominator; `median` is the midpoint
/// average for even n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptiveStats {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub std_dev: f64,
    pub variance: f64,
    pub range: f64,
}

fn mass_values(
    records: &[StudyRecord],
    group: Option<FunctionalUnit>,
    exclude_outliers: bool,
) -> Vec<f64> {
    records
        .iter()
        .filter(|r| group.is_none_or(|g| r.functional_unit == g))
        .filter(|r| !(exclude_outliers && r.outlier))
        .map(to_mass_basis)
        .collect()
}

fn filter_label(group: Option<FunctionalUnit>, exclude_outliers: bool) -> String {
    let g = group.map_or_else(|| "all units".to_string(), |g| g.to_string());
    if exclude_outliers {
        format!("{g}, outliers excluded")
    } else {
        g
    }
}

/// Descriptive statistics over the mass-basis values of the selected subset.
pub fn describe(
    records: &[StudyRecord],
    group: Option<FunctionalUnit>,
    exclude_outliers: bool,
) -> Result<DescriptiveStats, StatsError> {
    let mut values = mass_values(records, group, exclude_outliers);
    if values.is_empty() {
        return Err(StatsError::EmptySubset { filter: filter_label(group, exclude_outliers) });
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let median = if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    };
    let variance = if n > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    Ok(DescriptiveStats {
        n,
        mean,
        median,
        std_dev: variance.sqrt(),
        variance,
        range: values[n - 1] - values[0],
    })
}

/// Mean mass-basis value per distinct year, ascending by year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearlyAverage {
    pub year: i32,
    pub mean_gwp: f64,
    pub n: usize,
}

pub fn yearly_averages(records: &[StudyRecord], exclude_outliers: bool) -> Vec<YearlyAverage> {
    let mut by_year: BTreeMap<i32, (f64, usize)> = BTreeMap::new();
    for r in records {
        if exclude_outliers && r.outlier {
            continue;
        }
        let slot = by_year.entry(r.year).or_insert((0.0, 0));
        slot.0 += to_mass_basis(r);
        slot.1 += 1;
    }
    by_year
        .into_iter()
        .map(|(year, (sum, n))| YearlyAverage { year, mean_gwp: sum / n as f64, n })
        .collect()
}

/// Records whose mass-basis value exceeds Q3 + 1.5 IQR of the whole set.
/// Quartiles use linear interpolation between order statistics. This is a
/// diagnostic for comparison against the explicit per-record flags, not a
/// replacement for them.
pub fn iqr_outlier_candidates(records: &[StudyRecord]) -> Vec<&StudyRecord> {
    if records.len() < 4 {
        return Vec::new();
    }
    let mut values: Vec<f64> = records.iter().map(to_mass_basis).collect();
    values.sort_by(f64::total_cmp);
    let quantile = |q: f64| -> f64 {
        let pos = q * (values.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        values[lo] + (values[hi] - values[lo]) * (pos - lo as f64)
    };
    let q1 = quantile(0.25);
    let q3 = quantile(0.75);
    let cutoff = q3 + 1.5 * (q3 - q1);
    records.iter().filter(|r| to_mass_basis(r) > cutoff).collect()
}
