//! Fixed-width text and per-table CSV rendering of an [`EvaluationReport`].

use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};

use crate::evaluation::{
    Coefficient, EvaluationReport, QuartileTable, QUARTILE_LABELS, REGRESSORS,
};
use crate::recruitment::Scenario;

fn cell(v: Option<f64>, scale: f64, decimals: usize) -> String {
    match v {
        Some(x) => format!("{:.*}", decimals, x * scale),
        None => "n/a".to_string(),
    }
}

fn coef_cell(c: Option<Coefficient>) -> String {
    match c {
        Some(c) => format!("{:.3} ±{:.3}", c.estimate, c.std_error),
        None => "n/a".to_string(),
    }
}

fn quartile_block(
    out: &mut String,
    title: &str,
    pick: impl Fn(Scenario) -> QuartileTable,
    scale: f64,
    decimals: usize,
) {
    let _ = writeln!(out, "{title}");
    let _ = write!(out, "{:<10}", "gamma");
    for s in Scenario::ALL {
        let _ = write!(out, "{:>10}", s.label());
    }
    out.push('\n');
    let rows: Vec<(&str, usize)> = QUARTILE_LABELS
        .iter()
        .copied()
        .zip(0..)
        .chain([("All", 4)])
        .collect();
    for (label, idx) in rows {
        let _ = write!(out, "{label:<10}");
        for s in Scenario::ALL {
            let t = pick(s);
            let v = if idx < 4 { t.quartiles()[idx] } else { t.all };
            let _ = write!(out, "{:>10}", cell(v, scale, decimals));
        }
        out.push('\n');
    }
    out.push('\n');
}

/// Renders the regression, quartile and bias tables as plain text.
pub fn render_text(report: &EvaluationReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "runs: {}", report.runs);
    let _ = writeln!(
        out,
        "share of runs with phi_k > phi_y: {}\n",
        cell(report.phi_k_exceeds_phi_y, 1.0, 3)
    );

    let _ = writeln!(out, "Standardized bivariate coefficients on |y - y_hat|");
    let _ = write!(out, "{:<8}{:<15}", "", "");
    for s in Scenario::ALL {
        let _ = write!(out, "{:>16}", s.label());
    }
    out.push('\n');
    for (i, (name, concept)) in REGRESSORS.iter().enumerate() {
        let _ = write!(out, "{name:<8}{concept:<15}");
        for s in Scenario::ALL {
            let c = report
                .scenario(s)
                .regressions
                .get(i)
                .and_then(|r| r.coefficient);
            let _ = write!(out, "{:>16}", coef_cell(c));
        }
        out.push('\n');
    }
    out.push('\n');

    quartile_block(
        &mut out,
        "Mean relative improvement (%) by homophily quartile",
        |s| report.scenario(s).mean_delta,
        100.0,
        2,
    );
    quartile_block(
        &mut out,
        "Share of runs where the hybrid design wins (zeta)",
        |s| report.scenario(s).zeta,
        1.0,
        3,
    );

    let _ = writeln!(out, "Bias and variance reduction");
    let _ = write!(out, "{:<10}", "");
    for s in Scenario::ALL {
        let _ = write!(out, "{:>10}", s.label());
    }
    out.push('\n');
    for (label, pick) in [
        (
            "bias",
            (|r: &crate::evaluation::ScenarioReport| r.bias) as fn(&_) -> _,
        ),
        ("psi", |r| r.psi),
    ] {
        let _ = write!(out, "{label:<10}");
        for s in Scenario::ALL {
            let _ = write!(out, "{:>10}", cell(pick(report.scenario(s)), 1.0, 4));
        }
        out.push('\n');
    }
    out.push('\n');

    quartile_block(
        &mut out,
        "De-biased zeta by homophily quartile",
        |s| report.scenario(s).zeta_debiased,
        1.0,
        3,
    );

    let _ = writeln!(out, "Multiple regression of Delta (standardized)");
    for s in Scenario::ALL {
        let r = report.scenario(s);
        match (&r.multivariate, &r.multivariate_diagnostic) {
            (Some(m), _) => {
                let _ = writeln!(
                    out,
                    "{:<4} snowball {:>16}  gamma {:>16}  attrition {:>16}",
                    s.label(),
                    coef_cell(Some(m.snowball_size)),
                    coef_cell(Some(m.gamma)),
                    coef_cell(Some(m.attrition))
                );
            }
            (None, diag) => {
                let _ = writeln!(
                    out,
                    "{:<4} undefined ({})",
                    s.label(),
                    diag.as_deref().unwrap_or("no data")
                );
            }
        }
    }
    out
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn quartile_csv(path: &Path, pick: impl Fn(Scenario) -> QuartileTable) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(["scenario", "low", "mid_low", "mid_high", "high", "all"])?;
    for s in Scenario::ALL {
        let t = pick(s);
        let mut row = vec![s.label().to_string()];
        row.extend(t.quartiles().iter().map(|v| opt(*v)));
        row.push(opt(t.all));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes one CSV per table into `dir` and returns the paths written.
pub fn write_table_csvs(report: &EvaluationReport, dir: &Path) -> csv::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(csv::Error::from)?;
    let mut written = Vec::new();

    let path = dir.join("regressions.csv");
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(&path)?));
    w.write_record(["scenario", "regressor", "concept", "estimate", "std_error"])?;
    for s in Scenario::ALL {
        for row in &report.scenario(s).regressions {
            w.write_record([
                s.label().to_string(),
                row.regressor.clone(),
                row.concept.clone(),
                opt(row.coefficient.map(|c| c.estimate)),
                opt(row.coefficient.map(|c| c.std_error)),
            ])?;
        }
    }
    w.flush()?;
    written.push(path);

    for (name, pick) in [
        (
            "mean_delta.csv",
            (|r: &crate::evaluation::ScenarioReport| r.mean_delta) as fn(&_) -> _,
        ),
        ("zeta.csv", |r| r.zeta),
        ("zeta_debiased.csv", |r| r.zeta_debiased),
    ] {
        let path = dir.join(name);
        quartile_csv(&path, |s| pick(report.scenario(s)))?;
        written.push(path);
    }

    let path = dir.join("bias_psi.csv");
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(&path)?));
    w.write_record(["scenario", "valid_runs", "bias", "psi"])?;
    for s in Scenario::ALL {
        let r = report.scenario(s);
        w.write_record([
            s.label().to_string(),
            r.valid_runs.to_string(),
            opt(r.bias),
            opt(r.psi),
        ])?;
    }
    w.flush()?;
    written.push(path);
    Ok(written)
}

/// Convenience wrapper mapping CSV errors onto `io::Error`.
pub fn write_tables(report: &EvaluationReport, dir: &Path) -> io::Result<Vec<PathBuf>> {
    write_table_csvs(report, dir).map_err(io::Error::other)
}
