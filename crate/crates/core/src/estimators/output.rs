//! Plot-ready CSV tables.

use std::fmt::Write;

use super::{CovDecayReport, OverlapSeries, SweepReport};

pub fn overlap_csv(series: &OverlapSeries) -> String {
    let mut out = String::from(
        "depth,m,plan_size,matched,matched_stderr,mismatched,mismatched_stderr,gap,gap_stderr\n",
    );
    for p in &series.points {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            series.depth,
            p.m,
            p.plan_size,
            p.matched,
            p.matched_stderr,
            p.mismatched,
            p.mismatched_stderr,
            p.gap,
            p.gap_stderr
        );
    }
    out
}

pub fn cov_csv(report: &CovDecayReport) -> String {
    let mut out = String::from("distance,pairs,cov,stderr\n");
    for p in &report.points {
        let _ = writeln!(out, "{},{},{},{}", p.distance, p.pairs, p.cov, p.stderr);
    }
    out
}

pub fn sweep_csv(sweep: &SweepReport) -> String {
    let mut out = String::from("name,depth,estimate,stderr\n");
    for (r, p) in sweep.reports.iter().zip(&sweep.series) {
        let _ = writeln!(out, "{},{},{},{}", r.name, p.depth, p.estimate, p.stderr);
    }
    out
}
