//! Report serialization. JSON keeps full precision; the ablation CSV
//! rounds to two decimals.

use std::fmt::Write as _;

use serde::Serialize;

use super::{AblationRow, MetricsReport, RocCurve};
use crate::corpus::SeverityLabel;

pub fn to_json_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serialization cannot fail");
    s.push('\n');
    s
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn csv_string(write: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    write(&mut w).expect("in-memory CSV write");
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("UTF-8 fields")
}

/// `experiment,method,TA,UI,SU,avg_prec,avg_rec,f1`; failed rows leave the
/// metric cells empty.
pub fn ablation_csv(rows: &[AblationRow]) -> String {
    csv_string(|w| {
        w.write_record(["experiment", "method", "TA", "UI", "SU", "avg_prec", "avg_rec", "f1"])?;
        for r in rows {
            let metric = |f: fn(&MetricsReport<SeverityLabel>) -> f64| {
                r.metrics.as_ref().map(|m| format!("{:.2}", f(m))).unwrap_or_default()
            };
            w.write_record([
                r.experiment_id.clone(),
                r.method.to_string(),
                yes_no(r.flags.include_throwaway).into(),
                yes_no(r.flags.include_uninformative).into(),
                yes_no(r.flags.include_supportive).into(),
                metric(|m| m.macro_avg.avg_precision),
                metric(|m| m.macro_avg.avg_recall),
                metric(|m| m.macro_avg.f1),
            ])?;
        }
        Ok(())
    })
}

/// `class,precision,recall,f1,support` rows in severity order.
pub fn category_csv(metrics: &MetricsReport<SeverityLabel>) -> String {
    csv_string(|w| {
        w.write_record(["class", "precision", "recall", "f1", "support"])?;
        for (label, m) in &metrics.per_class {
            w.write_record([
                label.to_string(),
                format!("{:.2}", m.precision),
                format!("{:.2}", m.recall),
                format!("{:.2}", m.f1),
                m.support.to_string(),
            ])?;
        }
        Ok(())
    })
}

/// `series,class,fpr,tpr` with one row per curve point.
pub fn roc_csv(series: &[(String, Vec<RocCurve<SeverityLabel>>)]) -> String {
    csv_string(|w| {
        w.write_record(["series", "class", "fpr", "tpr"])?;
        for (name, curves) in series {
            for c in curves {
                for (fpr, tpr) in &c.points {
                    w.write_record([
                        name.clone(),
                        c.positive_class.to_string(),
                        fpr.to_string(),
                        tpr.to_string(),
                    ])?;
                }
            }
        }
        Ok(())
    })
}

const PLOT: f64 = 360.0;
const MARGIN: f64 = 50.0;
const COLORS: [&str; 4] = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a"];

/// Standalone SVG with one polyline per class and the chance diagonal.
pub fn roc_svg(title: &str, curves: &[RocCurve<SeverityLabel>]) -> String {
    let size = PLOT + 2.0 * MARGIN;
    let x = |v: f64| MARGIN + v * PLOT;
    let y = |v: f64| MARGIN + (1.0 - v) * PLOT;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{size}" height="{size}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        size / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{PLOT}" height="{PLOT}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#999" stroke-dasharray="4 4"/>"##,
        x(0.0),
        y(0.0),
        x(1.0),
        y(1.0)
    );
    for tick in 0..=4 {
        let v = tick as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{v:.2}</text>"#,
            x(v),
            y(0.0) + 16.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{v:.2}</text>"#,
            x(0.0) - 6.0,
            y(v) + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">False positive rate</text>"#,
        size / 2.0,
        size - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">True positive rate</text>"#,
        size / 2.0,
        size / 2.0
    );
    for (i, c) in curves.iter().enumerate() {
        let color = COLORS[c.positive_class.index() % COLORS.len()];
        let pts: Vec<String> = c
            .points
            .iter()
            .map(|(f, t)| format!("{:.4},{:.4}", x(*f), y(*t)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            pts.join(" ")
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{color}">{} (AUC {:.2})</text>"#,
            x(0.55),
            y(0.25) + 16.0 * i as f64,
            c.positive_class,
            c.auc
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
