//! Series files and report writers.
//!
//! Series are CSV with a required header: `t,c1..cG` for sphere points and
//! compositions, `t,bin1..binG` for per-period histogram counts. Numbers are
//! written with 12 significant digits.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embed::{comp_to_sphere, density_to_sphere, histogram_to_density, sphere_to_comp, sphere_to_density, unit_edges, Composition};
use crate::error::{Error, Result};
use crate::sphere::{AmbientSpace, SpherePoint};
use crate::stpd::{IcPoint, SeriesDecomposition, SphereSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeriesKind {
    Sphere,
    Composition,
    Histogram,
}

impl std::str::FromStr for SeriesKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sphere" => Ok(SeriesKind::Sphere),
            "composition" => Ok(SeriesKind::Composition),
            "histogram" | "histogram-density" => Ok(SeriesKind::Histogram),
            other => Err(Error::invalid(format!("unknown series kind '{other}'"))),
        }
    }
}

/// Formats like C's `%.12g`.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.11e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..12).contains(&exp) {
        let m = trim_zeros(mantissa);
        return format!("{m}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs());
    }
    let decimals = (11 - exp).max(0) as usize;
    trim_zeros(&format!("{:.*}", decimals, x)).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn row_err(row: usize, msg: impl std::fmt::Display) -> Error {
    Error::Row {
        row,
        msg: msg.to_string(),
    }
}

/// Parses series CSV text. Row numbers in errors count data rows from 1.
pub fn parse_series(text: &str, kind: SeriesKind) -> Result<SphereSeries> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = rdr
        .headers()
        .map_err(|e| Error::invalid(format!("bad header: {e}")))?
        .clone();
    if header.len() < 3 || header.get(0) != Some("t") {
        return Err(Error::invalid("header must be `t` followed by at least two columns"));
    }
    let width = header.len() - 1;
    let mut points = Vec::new();
    let mut ambient: Option<AmbientSpace> = None;
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| row_err(row, e))?;
        if rec.len() != width + 1 {
            return Err(row_err(row, format!("expected {} fields, got {}", width + 1, rec.len())));
        }
        let fields = rec.iter().skip(1).map(str::trim);
        let p = match kind {
            SeriesKind::Sphere | SeriesKind::Composition => {
                let vals = fields
                    .map(|f| f.parse::<f64>().map_err(|e| row_err(row, format!("'{f}': {e}"))))
                    .collect::<Result<Vec<_>>>()?;
                if kind == SeriesKind::Sphere {
                    SpherePoint::new(vals).map_err(|e| row_err(row, e))?
                } else {
                    let c = Composition::new(vals).map_err(|e| row_err(row, e))?;
                    comp_to_sphere(&c).map_err(|e| row_err(row, e))?
                }
            }
            SeriesKind::Histogram => {
                let counts = fields
                    .map(|f| f.parse::<u64>().map_err(|e| row_err(row, format!("count '{f}': {e}"))))
                    .collect::<Result<Vec<_>>>()?;
                let d = histogram_to_density(&counts, &unit_edges(width)).map_err(|e| row_err(row, e))?;
                ambient.get_or_insert_with(|| d.ambient());
                density_to_sphere(&d).map_err(|e| row_err(row, e))?
            }
        };
        points.push(p);
    }
    let ambient = match ambient {
        Some(a) => a,
        None => AmbientSpace::euclidean(width)?,
    };
    SphereSeries::new(points, ambient)
}

pub fn load_series(path: &Path, kind: SeriesKind) -> Result<SphereSeries> {
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    parse_series(&text, kind)
}

/// Writes `t,<prefix>1..<prefix>G` rows with `t` starting at `first_t`.
pub fn write_rows_csv<W: Write>(mut w: W, prefix: &str, first_t: usize, rows: &[Vec<f64>]) -> Result<()> {
    let g = rows.first().map_or(0, Vec::len);
    let mut header = String::from("t");
    for i in 1..=g {
        header.push_str(&format!(",{prefix}{i}"));
    }
    writeln!(w, "{header}")?;
    for (i, r) in rows.iter().enumerate() {
        let mut line = (first_t + i).to_string();
        for x in r {
            line.push(',');
            line.push_str(&fmt_sig(*x));
        }
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_points_csv<W: Write>(w: W, first_t: usize, points: &[SpherePoint]) -> Result<()> {
    let rows: Vec<Vec<f64>> = points.iter().map(|p| p.coords().to_vec()).collect();
    write_rows_csv(w, "c", first_t, &rows)
}

/// How forecast points are written back out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackMap {
    Sphere,
    Composition,
    /// Density values on the ambient space's equal-width unit grid.
    Density,
}

impl std::str::FromStr for BackMap {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sphere" => Ok(BackMap::Sphere),
            "composition" => Ok(BackMap::Composition),
            "density" => Ok(BackMap::Density),
            other => Err(Error::invalid(format!("unknown back-mapping '{other}'"))),
        }
    }
}

pub fn back_map(points: &[SpherePoint], how: BackMap) -> Result<Vec<Vec<f64>>> {
    points
        .iter()
        .map(|p| match how {
            BackMap::Sphere => Ok(p.coords().to_vec()),
            BackMap::Composition => Ok(sphere_to_comp(p).shares().to_vec()),
            BackMap::Density => {
                let g = p.dim();
                let q = vec![1.0 / g as f64; g];
                let grid: Vec<f64> = (0..g).map(|i| (i as f64 + 0.5) / g as f64).collect();
                Ok(sphere_to_density(p, &grid, &q)?.values().to_vec())
            }
        })
        .collect()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_csv_file(path: &Path, f: impl FnOnce(BufWriter<File>) -> Result<()>) -> Result<()> {
    f(BufWriter::new(File::create(path)?))
}

/// Plot-ready CSVs for a decomposition: trend, cycle, residuals, RSS and IC curves.
pub fn write_decomposition_csvs(dir: &Path, d: &SeriesDecomposition) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_csv_file(&dir.join("trend.csv"), |w| write_points_csv(w, 1, &d.trend.values))?;
    write_csv_file(&dir.join("cycle.csv"), |w| write_points_csv(w, 1, &d.cycle))?;
    write_csv_file(&dir.join("detrended.csv"), |w| write_points_csv(w, 1, d.detrended.points()))?;
    write_csv_file(&dir.join("residuals.csv"), |w| write_points_csv(w, 1, d.residuals.points()))?;
    write_csv_file(&dir.join("rss.csv"), |mut w| {
        writeln!(w, "theta,rss")?;
        for (i, r) in d.rss_curve.iter().enumerate() {
            writeln!(w, "{},{}", i + 1, fmt_sig(*r))?;
        }
        w.flush()?;
        Ok(())
    })?;
    write_csv_file(&dir.join("ic.csv"), |mut w| {
        writeln!(w, "lambda,theta,ic")?;
        for IcPoint { lambda, theta, ic } in &d.ic_curve {
            writeln!(w, "{},{},{}", fmt_sig(*lambda), theta, fmt_sig(*ic))?;
        }
        w.flush()?;
        Ok(())
    })
}
