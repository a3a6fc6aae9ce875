//! Output rendering. JSON is schema-stable serde output, CSV uses RFC
//! quoting via the csv crate, and text uses locked column widths so golden
//! tests can compare bytes. GWP values are printed to 4 decimal places in
//! text and tabular outputs; JSON carries full precision.

use cellgate_core::engine::{RankedContribution, ScoreBreakdown};
use cellgate_core::regress::{FitResult, RegressionInput, ResidualDiagnostics, SelectionReport};
use cellgate_core::stats::{DescriptiveStats, StudyRecord, YearlyAverage};

use crate::{Failure, Format};

fn csv_string(build: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> Result<(), csv::Error>) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    build(&mut writer).expect("csv rendering cannot fail");
    let bytes = writer.into_inner().expect("csv buffer");
    let mut s = String::from_utf8(bytes).expect("csv output is utf-8");
    while s.ends_with('\n') {
        s.pop();
    }
    s
}

fn json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("json rendering cannot fail")
}

pub fn breakdown_json(b: &ScoreBreakdown) -> String {
    json(b)
}

pub fn sankey_csv(b: &ScoreBreakdown, depth: Option<usize>) -> String {
    let edges = cellgate_core::sankey_edges(b, depth);
    csv_string(|w| {
        w.write_record(["source", "target", "value"])?;
        for e in &edges {
            w.write_record([e.source.as_str(), e.target.as_str(), &format!("{}", e.value)])?;
        }
        Ok(())
    })
}

pub fn breakdown_text(b: &ScoreBreakdown, depth: Option<usize>) -> String {
    let rows = cellgate_core::contribution_ranking(b, depth.unwrap_or(usize::MAX));
    let mut out = String::new();
    out.push_str(&format!(
        "process: {}  scenario: {}  total: {:.4} kg CO2-eq/kg\n",
        b.process_id, b.scenario, b.total
    ));
    if b.has_negative {
        out.push_str("note: negative contributions present; shares use absolute scores\n");
    }
    out.push_str(&format!("{:<64} {:>12} {:>8}\n", "contribution", "score", "share"));
    for r in &rows {
        out.push_str(&format!(
            "{:<64} {:>12.4} {:>8.4}\n",
            r.path.join(" / "),
            r.score,
            r.share
        ));
    }
    out.pop();
    out
}

pub fn compare(results: &[ScoreBreakdown], format: Format) -> String {
    match format {
        Format::Json => {
            let rows: Vec<serde_json::Value> = results
                .iter()
                .map(|b| {
                    serde_json::json!({
                        "scenario": b.scenario,
                        "process_id": b.process_id,
                        "total": b.total,
                    })
                })
                .collect();
            json(&rows)
        }
        Format::Csv => csv_string(|w| {
            w.write_record(["scenario", "process_id", "total"])?;
            for b in results {
                w.write_record([
                    b.scenario.as_str(),
                    b.process_id.as_str(),
                    &format!("{:.4}", b.total),
                ])?;
            }
            Ok(())
        }),
        Format::Text => {
            let mut out = format!("{:<12} {:<24} {:>10}\n", "scenario", "process", "total");
            for b in results {
                out.push_str(&format!(
                    "{:<12} {:<24} {:>10.4}\n",
                    b.scenario, b.process_id, b.total
                ));
            }
            out.pop();
            out
        }
    }
}

pub fn conversion(value: f64, specific_energy: f64, converted: f64, format: Format) -> String {
    match format {
        Format::Json => json(&serde_json::json!({
            "value_kg_per_kg": value,
            "specific_energy_kwh_per_kg": specific_energy,
            "value_kg_per_kwh": converted,
        })),
        Format::Csv => csv_string(|w| {
            w.write_record(["value_kg_per_kg", "specific_energy_kwh_per_kg", "value_kg_per_kwh"])?;
            w.write_record([
                &format!("{value}"),
                &format!("{specific_energy}"),
                &format!("{converted:.4}"),
            ])?;
            Ok(())
        }),
        Format::Text => format!("{converted:.4}"),
    }
}

pub fn describe_one(d: &DescriptiveStats, format: Format) -> String {
    match format {
        Format::Json => json(d),
        Format::Csv => describe_groups(&[("all".to_string(), d.clone())], Format::Csv),
        Format::Text => describe_groups(&[("all".to_string(), d.clone())], Format::Text),
    }
}

pub fn describe_groups(rows: &[(String, DescriptiveStats)], format: Format) -> String {
    match format {
        Format::Json => {
            let objs: Vec<serde_json::Value> = rows
                .iter()
                .map(|(g, d)| {
                    let mut v = serde_json::to_value(d).expect("stats serialize");
                    v.as_object_mut()
                        .expect("stats is an object")
                        .insert("group".to_string(), serde_json::json!(g));
                    v
                })
                .collect();
            if objs.len() == 1 && rows[0].0 != "all" {
                json(&objs[0])
            } else {
                json(&objs)
            }
        }
        Format::Csv => csv_string(|w| {
            w.write_record(["group", "n", "mean", "median", "std_dev", "variance", "range"])?;
            for (g, d) in rows {
                w.write_record([
                    g.as_str(),
                    &d.n.to_string(),
                    &format!("{:.4}", d.mean),
                    &format!("{:.4}", d.median),
                    &format!("{:.4}", d.std_dev),
                    &format!("{:.4}", d.variance),
                    &format!("{:.4}", d.range),
                ])?;
            }
            Ok(())
        }),
        Format::Text => {
            let mut out = format!(
                "{:<6} {:>4} {:>9} {:>9} {:>9} {:>10} {:>9}\n",
                "group", "n", "mean", "median", "std_dev", "variance", "range"
            );
            for (g, d) in rows {
                out.push_str(&format!(
                    "{:<6} {:>4} {:>9.4} {:>9.4} {:>9.4} {:>10.4} {:>9.4}\n",
                    g, d.n, d.mean, d.median, d.std_dev, d.variance, d.range
                ));
            }
            out.pop();
            out
        }
    }
}

pub fn yearly(rows: &[YearlyAverage], format: Format) -> String {
    match format {
        Format::Json => json(&rows),
        Format::Csv => csv_string(|w| {
            w.write_record(["year", "mean_gwp", "n"])?;
            for r in rows {
                w.write_record([
                    &r.year.to_string(),
                    &format!("{:.4}", r.mean_gwp),
                    &r.n.to_string(),
                ])?;
            }
            Ok(())
        }),
        Format::Text => {
            let mut out = format!("{:<6} {:>10} {:>4}\n", "year", "mean_gwp", "n");
            for r in rows {
                out.push_str(&format!("{:<6} {:>10.4} {:>4}\n", r.year, r.mean_gwp, r.n));
            }
            out.pop();
            out
        }
    }
}

pub fn iqr_flags(flagged: &[&StudyRecord], format: Format) -> String {
    let rows: Vec<serde_json::Value> = flagged
        .iter()
        .map(|r| {
            serde_json::json!({
                "study_id": r.study_id,
                "mass_basis": cellgate_core::to_mass_basis(r),
                "flagged_in_dataset": r.outlier,
            })
        })
        .collect();
    match format {
        Format::Json => json(&rows),
        Format::Csv => csv_string(|w| {
            w.write_record(["study_id", "mass_basis", "flagged_in_dataset"])?;
            for r in flagged {
                w.write_record([
                    r.study_id.as_str(),
                    &format!("{:.4}", cellgate_core::to_mass_basis(r)),
                    &r.outlier.to_string(),
                ])?;
            }
            Ok(())
        }),
        Format::Text => {
            let mut out = format!("{:<12} {:>10} {:>8}\n", "study_id", "mass", "flagged");
            for r in flagged {
                out.push_str(&format!(
                    "{:<12} {:>10.4} {:>8}\n",
                    r.study_id,
                    cellgate_core::to_mass_basis(r),
                    r.outlier
                ));
            }
            out.pop();
            out
        }
    }
}

pub fn fits(
    input: &RegressionInput,
    fits: &[(FitResult, ResidualDiagnostics)],
    format: Format,
) -> String {
    match format {
        Format::Json => {
            let objs: Vec<serde_json::Value> = fits
                .iter()
                .map(|(fit, diag)| {
                    let mut v = serde_json::to_value(fit).expect("fit serialize");
                    v.as_object_mut().expect("fit is an object").insert(
                        "diagnostics".to_string(),
                        serde_json::to_value(diag).expect("diag serialize"),
                    );
                    v
                })
                .collect();
            if objs.len() == 1 {
                json(&objs[0])
            } else {
                json(&objs)
            }
        }
        Format::Csv => csv_string(|w| {
            w.write_record([
                "model",
                "year",
                "qa_gwh",
                "ech_gco2_per_kwh",
                "response",
                "fitted",
                "residual",
            ])?;
            for (fit, _) in fits {
                let log = fit.model.starts_with("p_");
                for (row, e) in input.rows.iter().zip(&fit.residuals) {
                    let response = if log { row.gwp.ln() } else { row.gwp };
                    w.write_record([
                        fit.model.as_str(),
                        &row.year.to_string(),
                        &format!("{}", row.qa),
                        &format!("{}", row.ech),
                        &format!("{response:.6}"),
                        &format!("{:.6}", response - e),
                        &format!("{e:.6}"),
                    ])?;
                }
            }
            Ok(())
        }),
        Format::Text => {
            let mut out = String::new();
            for (fit, diag) in fits {
                out.push_str(&format!(
                    "model: {}   R2 {:.4}  adj {:.4}  F {:.4}  p(F) {:.5}  df {}\n",
                    fit.model,
                    fit.r_squared,
                    fit.adj_r_squared,
                    fit.f_stat,
                    fit.f_p_value,
                    fit.df_resid
                ));
                out.push_str(&format!(
                    "{:<10} {:>12} {:>11} {:>10} {:>10}\n",
                    "coeff", "value", "std_error", "t", "p"
                ));
                for c in &fit.coefficients {
                    out.push_str(&format!(
                        "{:<10} {:>12.5} {:>11.5} {:>10.4} {:>10.5}\n",
                        c.name, c.value, c.std_error, c.t_stat, c.p_value
                    ));
                }
                out.push_str(&format!(
                    "durbin_watson {:.4}  skewness {:.4}  kurtosis {:.4}  jb {:.4}  p(jb) {:.4}\n\n",
                    diag.durbin_watson, diag.skewness, diag.kurtosis, diag.jb_stat, diag.jb_p
                ));
            }
            while out.ends_with('\n') {
                out.pop();
            }
            out
        }
    }
}

pub fn selection(report: &SelectionReport, format: Format) -> String {
    match format {
        Format::Json => json(report),
        Format::Csv => csv_string(|w| {
            w.write_record(["model", "r_squared", "f_p_value", "coefficient_p_values", "flagged", "note"])?;
            for m in &report.models {
                w.write_record([
                    m.model.as_str(),
                    &m.r_squared.map_or(String::new(), |v| format!("{v:.6}")),
                    &m.f_p_value.map_or(String::new(), |v| format!("{v:.6}")),
                    &m.coefficient_p_values.as_ref().map_or(String::new(), |ps| {
                        ps.iter().map(|p| format!("{p:.6}")).collect::<Vec<_>>().join(";")
                    }),
                    &m.flagged.to_string(),
                    m.note.as_deref().unwrap_or(""),
                ])?;
            }
            Ok(())
        }),
        Format::Text => {
            let mut out = format!("alpha = {}\n", report.alpha);
            out.push_str(&format!(
                "{:<8} {:>9} {:>10} {:>8}  {}\n",
                "model", "R2", "p(F)", "flagged", "note"
            ));
            for m in &report.models {
                out.push_str(&format!(
                    "{:<8} {:>9} {:>10} {:>8}  {}\n",
                    m.model,
                    m.r_squared.map_or("-".to_string(), |v| format!("{v:.4}")),
                    m.f_p_value.map_or("-".to_string(), |v| format!("{v:.4}")),
                    m.flagged,
                    m.note.as_deref().unwrap_or("")
                ));
            }
            out.pop();
            out
        }
    }
}

pub fn cross_scenario(
    names: &[String],
    rankings: &[Vec<RankedContribution>],
    format: Format,
) -> Result<String, Failure> {
    // row order: union of paths in first-seen order across scenarios
    let mut paths: Vec<Vec<String>> = Vec::new();
    for ranking in rankings {
        for r in ranking {
            if !paths.contains(&r.path) {
                paths.push(r.path.clone());
            }
        }
    }
    let score_of = |ranking: &[RankedContribution], path: &[String]| -> Option<f64> {
        ranking.iter().find(|r| r.path == path).map(|r| r.score)
    };
    match format {
        Format::Json => {
            let rows: Vec<serde_json::Value> = paths
                .iter()
                .map(|path| {
                    let mut scores = serde_json::Map::new();
                    for (name, ranking) in names.iter().zip(rankings) {
                        scores.insert(
                            name.clone(),
                            score_of(ranking, path)
                                .map_or(serde_json::Value::Null, |s| serde_json::json!(s)),
                        );
                    }
                    serde_json::json!({ "path": path, "scores": scores })
                })
                .collect();
            Ok(json(&rows))
        }
        Format::Csv => Ok(csv_string(|w| {
            let mut header = vec!["path".to_string()];
            header.extend(names.iter().cloned());
            w.write_record(&header)?;
            for path in &paths {
                let mut rec = vec![path.join(" / ")];
                for ranking in rankings {
                    rec.push(
                        score_of(ranking, path).map_or(String::new(), |s| format!("{s:.4}")),
                    );
                }
                w.write_record(&rec)?;
            }
            Ok(())
        })),
        Format::Text => {
            let mut out = format!("{:<64}", "contribution");
            for name in names {
                out.push_str(&format!(" {name:>10}"));
            }
            out.push('\n');
            for path in &paths {
                out.push_str(&format!("{:<64}", path.join(" / ")));
                for ranking in rankings {
                    match score_of(ranking, path) {
                        Some(s) => out.push_str(&format!(" {s:>10.4}")),
                        None => out.push_str(&format!(" {:>10}", "-")),
                    }
                }
                out.push('\n');
            }
            out.pop();
            Ok(out)
        }
    }
}
