//! Table rendering in the posterior-table layout: a label column followed by
//! "Posterior Mean", "S.D.", "HPD", "(+)", "(-)".

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::significance::SummaryRow;
use crate::error::{Error, Result};

pub const REPORT_COLUMNS: [&str; 5] = ["Posterior Mean", "S.D.", "HPD", "(+)", "(-)"];

pub const MARKET_RESPONSE_TITLE: &str = "Market Response Parameter";
pub const HIERARCHICAL_TITLE: &str = "Hierarchical Model Estimation Results";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReportFormat {
    Text,
    Csv,
    Json,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            Self::Text => "txt",
            Self::Csv => "csv",
            Self::Json => "json",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "text" | "txt" => Ok(Self::Text),
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(Error::InvalidArgument(format!(
                "unknown report format '{other}'"
            ))),
        }
    }
}

#[derive(Serialize)]
struct JsonReport<'a> {
    title: Option<&'a str>,
    columns: [&'a str; 5],
    rows: &'a [SummaryRow],
}

fn fmt3(x: f64) -> String {
    let s = format!("{x:.3}");
    // avoid "-0.000"
    if s.trim_start_matches('-')
        .chars()
        .all(|c| c == '0' || c == '.')
    {
        s.trim_start_matches('-').to_string()
    } else {
        s
    }
}

pub fn render_report(title: Option<&str>, rows: &[SummaryRow], format: ReportFormat) -> String {
    match format {
        ReportFormat::Text => render_text(title, rows),
        ReportFormat::Csv => render_csv(rows),
        ReportFormat::Json => {
            let doc = JsonReport {
                title,
                columns: REPORT_COLUMNS,
                rows,
            };
            let mut s = serde_json::to_string_pretty(&doc).expect("report serializes");
            s.push('\n');
            s
        }
    }
}

fn render_text(title: Option<&str>, rows: &[SummaryRow]) -> String {
    let label_w = rows
        .iter()
        .map(|r| r.label.chars().count())
        .max()
        .unwrap_or(0)
        .max(10);
    let mut out = String::new();
    if let Some(t) = title {
        let _ = writeln!(out, "{t}");
    }
    let _ = writeln!(
        out,
        "{:<label_w$}  {:>14}  {:>8}  {:>5}  {:>5}  {:>5}",
        "",
        REPORT_COLUMNS[0],
        REPORT_COLUMNS[1],
        REPORT_COLUMNS[2],
        REPORT_COLUMNS[3],
        REPORT_COLUMNS[4]
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<label_w$}  {:>14}  {:>8}  {:>5}  {:>5}  {:>5}",
            r.label,
            fmt3(r.posterior_mean),
            fmt3(r.sd),
            r.hpd_count,
            r.pos_count,
            r.neg_count
        );
    }
    out
}

fn render_csv(rows: &[SummaryRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["Parameter"];
    header.extend(REPORT_COLUMNS);
    w.write_record(&header).expect("in-memory write");
    for r in rows {
        w.write_record([
            r.label.clone(),
            fmt3(r.posterior_mean),
            fmt3(r.sd),
            r.hpd_count.to_string(),
            r.pos_count.to_string(),
            r.neg_count.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn price() -> SummaryRow {
        SummaryRow {
            label: "Price".into(),
            posterior_mean: -4.331,
            sd: 0.639,
            hpd_count: 98,
            pos_count: 0,
            neg_count: 98,
        }
    }

    #[test]
    fn empty_rows_give_header_only() {
        let t = render_report(None, &[], ReportFormat::Text);
        assert_eq!(t.lines().count(), 1);
        for c in REPORT_COLUMNS {
            assert!(t.contains(c));
        }
        let c = render_report(None, &[], ReportFormat::Csv);
        assert_eq!(c, "Parameter,Posterior Mean,S.D.,HPD,(+),(-)\n");
    }

    #[test]
    fn price_row_text() {
        let t = render_report(Some(MARKET_RESPONSE_TITLE), &[price()], ReportFormat::Text);
        let line = t.lines().nth(2).unwrap();
        let fields: Vec<&str> = line.split_whitespace().collect();
        assert_eq!(fields, ["Price", "-4.331", "0.639", "98", "0", "98"]);
    }

    #[test]
    fn header_column_order() {
        let t = render_report(None, &[price()], ReportFormat::Text);
        let header = t.lines().next().unwrap();
        let pos: Vec<usize> = REPORT_COLUMNS
            .iter()
            .map(|c| header.find(c).unwrap())
            .collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn csv_and_text_agree() {
        let rows = vec![
            price(),
            SummaryRow {
                label: "net-w".into(),
                posterior_mean: 1.1954,
                sd: 10.311,
                hpd_count: 95,
                pos_count: 57,
                neg_count: 38,
            },
        ];
        let text = render_report(None, &rows, ReportFormat::Text);
        let csv = render_report(None, &rows, ReportFormat::Csv);
        for (tl, cl) in text.lines().skip(1).zip(csv.lines().skip(1)) {
            let t: Vec<&str> = tl.split_whitespace().collect();
            let c: Vec<&str> = cl.split(',').collect();
            assert_eq!(t, c);
        }
        let json: serde_json::Value =
            serde_json::from_str(&render_report(None, &rows, ReportFormat::Json)).unwrap();
        assert_eq!(json["rows"][1]["hpd_count"], 95);
        assert_eq!(json["columns"][4], "(-)");
    }

    #[test]
    fn negative_zero_is_not_printed() {
        let mut r = price();
        r.posterior_mean = -0.0001;
        assert!(render_report(None, &[r], ReportFormat::Csv).contains(",0.000,"));
    }

    #[test]
    fn format_parsing() {
        assert_eq!("TEXT".parse::<ReportFormat>().unwrap(), ReportFormat::Text);
        assert_eq!("csv".parse::<ReportFormat>().unwrap(), ReportFormat::Csv);
        assert!("xml".parse::<ReportFormat>().is_err());
    }
}
