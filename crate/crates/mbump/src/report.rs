//! JSON, CSV and plot output.

use anyhow::Result;
use mbump_core::constants::{ConstantReport, Method};
use mbump_core::verify::{NormEstimate, Relation, SuiteReport};
use serde::{Deserialize, Serialize};

use crate::svg::{Plot, Style};

/// Pretty JSON with object keys sorted, so equal values give equal bytes.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value)?;
    Ok(serde_json::to_string_pretty(&v)? + "\n")
}

/// One CSV row of the constants schema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub name: String,
    pub p: f64,
    pub q: f64,
    pub alpha: f64,
    pub phi: String,
    pub psi: String,
    pub value: f64,
    pub cube: String,
    pub method: Method,
}

impl From<&ConstantReport> for Row {
    fn from(r: &ConstantReport) -> Self {
        Row {
            name: r.name.clone(),
            p: r.params.p,
            q: r.params.q,
            alpha: r.params.alpha,
            phi: r.params.phi.clone().unwrap_or_default(),
            psi: r.params.psi.clone().unwrap_or_default(),
            value: r.value,
            cube: r.cube.clone(),
            method: r.method,
        }
    }
}

impl Row {
    pub fn from_estimate(e: &NormEstimate, alpha: f64) -> Self {
        Row {
            name: if e.weak { format!("weak {}", e.operator) } else { e.operator.clone() },
            p: e.p,
            q: e.q,
            alpha,
            phi: String::new(),
            psi: String::new(),
            value: e.value,
            cube: e.attained_by.clone(),
            method: Method::Estimated,
        }
    }
}

pub fn rows_csv(rows: &[Row]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

/// One line per suite check.
#[derive(Clone, Debug, Serialize)]
pub struct CheckRow<'a> {
    pub suite: &'a str,
    pub check: &'a str,
    pub relation: Relation,
    pub measured: f64,
    pub bound: Option<f64>,
    pub pass: bool,
    pub method: Method,
}

pub fn checks_csv(reports: &[SuiteReport]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in reports {
        for c in &r.checks {
            w.serialize(CheckRow {
                suite: &r.suite,
                check: &c.name,
                relation: c.relation,
                measured: c.measured,
                bound: c.bound,
                pass: c.pass,
                method: Method::Estimated,
            })?;
        }
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

/// Human-readable lines for a suite report.
pub fn summary(r: &SuiteReport) -> String {
    let mut s = format!("{} {} ({} checks)\n", r.suite, if r.pass { "PASS" } else { "FAIL" }, r.checks.len());
    for c in &r.checks {
        let rel = match (c.relation, c.bound) {
            (Relation::AtMost, Some(b)) => format!("<= {b:.6}"),
            (Relation::AtLeast, Some(b)) => format!(">= {b:.6}"),
            _ => "recorded".into(),
        };
        s += &format!("  [{}] {}: {:.6} {rel}\n", if c.pass { "ok" } else { "FAIL" }, c.name, c.measured);
    }
    if let Some(rep) = &r.reproducer {
        s += &format!("  reproduce: {rep}\n");
    }
    s
}

/// Plots for the series a suite attached: a scatter of norm against
/// constant for the scaling study, convergence curves otherwise.
pub fn plots(r: &SuiteReport) -> Vec<(String, String)> {
    if r.series.is_empty() {
        return Vec::new();
    }
    let style = if r.suite == "sharpconst" { Style::Points } else { Style::Lines };
    let first = &r.series[0];
    let plot = Plot {
        title: r.suite.clone(),
        x_label: first.x_label.clone(),
        y_label: first.y_label.clone(),
        style,
        series: r.series.iter().map(|s| (s.name.clone(), s.points.clone())).collect(),
    };
    vec![(format!("{}.svg", r.suite), plot.render())]
}

#[cfg(test)]
mod tests {
    use super::*;
    use mbump_core::constants::Params;
    use mbump_core::dyadic::Census;

    #[test]
    fn constant_rows_follow_the_schema() {
        let r = ConstantReport {
            name: "matrix_ap".into(),
            value: 1.5625,
            cube: "D0[0]".into(),
            method: Method::Definitional,
            params: Params { p: 2.0, q: 2.0, alpha: 0.0, phi: None, psi: None },
            census: Census::Dyadic,
            lower_bound: false,
            warnings: vec![],
        };
        let csv = rows_csv(&[Row::from(&r)]).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("name,p,q,alpha,phi,psi,value,cube,method"));
        assert_eq!(lines.next(), Some("matrix_ap,2.0,2.0,0.0,,,1.5625,D0[0],definitional"));
    }

    #[test]
    fn canonical_json_sorts_keys() {
        #[derive(Serialize)]
        struct S {
            b: u8,
            a: u8,
        }
        let s = canonical_json(&S { b: 1, a: 2 }).unwrap();
        assert!(s.find("\"a\"").unwrap() < s.find("\"b\"").unwrap());
    }
}
