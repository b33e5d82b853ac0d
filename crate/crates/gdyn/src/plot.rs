//! Plain-text gnuplot scripts for emitted CSV files.

use std::path::{Path, PathBuf};

use crate::error::CliResult;
use crate::io::write_atomic;

fn preamble(png: &str, title: &str) -> String {
    format!(
        "set datafile separator ','\nset terminal pngcairo size 900,800\nset output '{png}'\nset title '{title}'\n"
    )
}

fn stem(csv: &Path) -> String {
    csv.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "plot".into())
}

fn file_name(csv: &Path) -> String {
    csv.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn write_script(csv: &Path, body: String) -> CliResult<PathBuf> {
    let path = csv.with_extension("gp");
    write_atomic(&path, body.as_bytes())?;
    Ok(path)
}

/// Heat map of a `re,im,value,stderr` field.
pub fn field_script(csv: &Path, title: &str) -> CliResult<PathBuf> {
    let body = format!(
        "{}set view map\nset size ratio -1\nset xlabel 'Re z'\nset ylabel 'Im z'\nsplot '{}' skip 1 using 1:2:3 with image notitle\n",
        preamble(&format!("{}.png", stem(csv)), title),
        file_name(csv)
    );
    write_script(csv, body)
}

/// Eigenvalue positions from a snapshot CSV, faded by step.
pub fn snapshot_script(csv: &Path, title: &str) -> CliResult<PathBuf> {
    let body = format!(
        "{}set size ratio -1\nset xlabel 'Re λ'\nset ylabel 'Im λ'\nset palette gray negative\nunset colorbox\nplot '{}' skip 1 using 4:5:1 with points pt 7 ps 0.4 palette notitle\n",
        preamble(&format!("{}.png", stem(csv)), title),
        file_name(csv)
    );
    write_script(csv, body)
}

/// Histogram in column 2 with a reference curve in column 3.
pub fn histogram_script(csv: &Path, title: &str) -> CliResult<PathBuf> {
    let body = format!(
        "{}set style fill solid 0.4\nset xlabel 'Re λ'\nplot '{f}' skip 1 using 1:2 with boxes title 'histogram', '{f}' skip 1 using 1:3 with lines lw 2 title 'semicircle'\n",
        preamble(&format!("{}.png", stem(csv)), title),
        f = file_name(csv)
    );
    write_script(csv, body)
}

/// Column 2 against column 1.
pub fn curve_script(csv: &Path, title: &str, xlabel: &str) -> CliResult<PathBuf> {
    let body = format!(
        "{}set xlabel '{xlabel}'\nplot '{}' skip 1 using 1:2 with lines lw 2 notitle\n",
        preamble(&format!("{}.png", stem(csv)), title),
        file_name(csv)
    );
    write_script(csv, body)
}
