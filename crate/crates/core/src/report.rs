//! Text and CSV renderings of results: "mean (std)" tables, pairwise test
//! listings, influence curves and plot series over a noise sweep.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::datagen::Noise;
use crate::error::{Error, Result};
use crate::harness::{Comparison, ExperimentResults, Metric, ScoreTable};
use crate::losses::{influence, LossSpec};

/// Marks the lowest mean in a table column.
pub const MIN_FLAG: char = '*';

/// Formats as `0.476 (0.012)`.
pub fn mean_std_cell(mean: f64, std: f64) -> String {
    format!("{mean:.3} ({std:.3})")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Text,
    Csv,
}

fn argmin(values: &[f64]) -> Option<usize> {
    values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
}

/// One row per model with a "mean (std)" cell per metric; the lowest mean of
/// each column carries [`MIN_FLAG`].
pub fn render_table(table: &ScoreTable, metrics: &[Metric], format: TableFormat) -> String {
    let mut header = vec!["Model".to_string()];
    header.extend(metrics.iter().map(|m| m.name().to_string()));
    let mut rows: Vec<Vec<String>> = table.models.iter().map(|m| vec![m.label.clone()]).collect();
    for &metric in metrics {
        let means: Vec<f64> = table.models.iter().map(|m| m.summary(metric).mean).collect();
        let best = argmin(&means);
        for (i, m) in table.models.iter().enumerate() {
            let s = m.summary(metric);
            let mut cell = mean_std_cell(s.mean, s.std);
            if Some(i) == best {
                cell.push(MIN_FLAG);
            }
            rows[i].push(cell);
        }
    }

    let mut out = String::new();
    match format {
        TableFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(&header).unwrap();
            for r in &rows {
                w.write_record(r).unwrap();
            }
            out = String::from_utf8(w.into_inner().unwrap()).unwrap();
        }
        TableFormat::Text => {
            let widths: Vec<usize> = (0..header.len())
                .map(|j| rows.iter().map(|r| r[j].len()).chain([header[j].len()]).max().unwrap())
                .collect();
            let line = |cells: &[String]| {
                cells
                    .iter()
                    .zip(&widths)
                    .enumerate()
                    .map(|(j, (c, w))| if j == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
                    .collect::<Vec<_>>()
                    .join("  ")
            };
            writeln!(out, "{}", line(&header)).unwrap();
            for r in &rows {
                writeln!(out, "{}", line(r)).unwrap();
            }
        }
    }
    out
}

/// Parsed row of a rendered table: label and `(mean, std, flagged)` per
/// metric column.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedRow {
    pub label: String,
    pub cells: Vec<(f64, f64, bool)>,
}

fn parse_cell(cell: &str) -> Result<(f64, f64, bool)> {
    let cell = cell.trim();
    let flagged = cell.ends_with(MIN_FLAG);
    let cell = cell.trim_end_matches(MIN_FLAG);
    let bad = || Error::usage(format!("malformed table cell \"{cell}\""));
    let (mean, rest) = cell.split_once('(').ok_or_else(bad)?;
    let std = rest.trim_end().strip_suffix(')').ok_or_else(bad)?;
    Ok((
        mean.trim().parse().map_err(|_| bad())?,
        std.trim().parse().map_err(|_| bad())?,
        flagged,
    ))
}

/// Inverse of [`render_table`] for the text format.
pub fn parse_text_table(text: &str) -> Result<Vec<ParsedRow>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::usage("empty table"))?;
    let columns = header.split_whitespace().count();
    lines
        .map(|line| {
            // cells are separated by two or more spaces; labels have none
            let parts: Vec<&str> = line.split("  ").map(str::trim).filter(|s| !s.is_empty()).collect();
            if parts.len() != columns {
                return Err(Error::usage(format!("row \"{line}\" has {} cells", parts.len())));
            }
            Ok(ParsedRow {
                label: parts[0].to_string(),
                cells: parts[1..].iter().map(|c| parse_cell(c)).collect::<Result<_>>()?,
            })
        })
        .collect()
}

/// Kruskal-Wallis line followed by every pairwise rank-sum result.
pub fn render_comparison(c: &Comparison) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "{} Kruskal-Wallis: H = {:.4}, p = {:.4} ({:?}, groups {:?})",
        c.metric.name(),
        c.omnibus.statistic,
        c.omnibus.p_value,
        c.omnibus.method,
        c.omnibus.n_per_group
    )
    .unwrap();
    let width = c.pairwise.iter().map(|p| p.a.len() + p.b.len() + 4).max().unwrap_or(0);
    for p in &c.pairwise {
        let pair = format!("{} vs {}", p.a, p.b);
        writeln!(
            out,
            "  {pair:<width$}  U = {:>6.1}  p = {:.4}  {:?}",
            p.result.statistic, p.result.p_value, p.result.method
        )
        .unwrap();
    }
    out
}

/// Residual grid `0, 1/steps, 2/steps, …` up to `r_max`.
pub fn residual_grid(r_max: f64, steps_per_unit: usize) -> Result<Vec<f64>> {
    if !(r_max.is_finite() && r_max >= 0.0) {
        return Err(Error::usage("rmax must be a nonnegative number"));
    }
    if steps_per_unit == 0 {
        return Err(Error::usage("steps must be positive"));
    }
    let count = (r_max * steps_per_unit as f64 + 1e-9).floor() as usize;
    Ok((0..=count).map(|i| i as f64 / steps_per_unit as f64).collect())
}

/// CSV with a residual column and one influence column per loss.
pub fn influence_csv(losses: &[LossSpec<f64>], grid: &[f64]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["r".to_string()];
    header.extend(losses.iter().map(LossSpec::label));
    w.write_record(&header)?;
    for &r in grid {
        let mut rec = vec![format!("{r}")];
        for l in losses {
            rec.push(format!("{}", influence(r, l)?));
        }
        w.write_record(&rec)?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| Error::usage(e.to_string()))?).expect("ascii"))
}

/// One model's mean score along a noise sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSeries {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub y_err: Option<Vec<f64>>,
}

/// One series per model across results that vary a single noise family.
/// Noise-free results join any sweep at `x = 0`.
pub fn emit_plot_series(results: &[ExperimentResults], metric: Metric) -> Result<Vec<PlotSeries>> {
    let first = results.first().ok_or_else(|| Error::usage("no results to plot"))?;
    let mut family: Option<&'static str> = None;
    for r in results {
        if !matches!(r.config.noise, Noise::None) {
            let f = r.config.noise.family_name();
            match family {
                Some(prev) if prev != f => {
                    return Err(Error::usage(format!("results mix {prev} and {f} noise sweeps")));
                }
                _ => family = Some(f),
            }
        }
    }
    let labels: Vec<String> = first.table.models.iter().map(|m| m.label.clone()).collect();
    for r in results {
        let l: Vec<&String> = r.table.models.iter().map(|m| &m.label).collect();
        if l.len() != labels.len() || l.iter().zip(&labels).any(|(a, b)| *a != b) {
            return Err(Error::usage("results compare different model sets"));
        }
    }
    let mut order: Vec<&ExperimentResults> = results.iter().collect();
    order.sort_by(|a, b| a.config.noise.level().total_cmp(&b.config.noise.level()));
    Ok(labels
        .iter()
        .enumerate()
        .map(|(m, label)| PlotSeries {
            label: label.clone(),
            x: order.iter().map(|r| r.config.noise.level()).collect(),
            y: order.iter().map(|r| r.table.models[m].summary(metric).mean).collect(),
            y_err: Some(order.iter().map(|r| r.table.models[m].summary(metric).std).collect()),
        })
        .collect())
}

/// Long-format CSV: `series,x,y,y_err`.
pub fn series_csv(series: &[PlotSeries]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["series", "x", "y", "y_err"])?;
    for s in series {
        for i in 0..s.x.len() {
            let err = s.y_err.as_ref().map(|e| format!("{}", e[i])).unwrap_or_default();
            w.write_record([s.label.clone(), format!("{}", s.x[i]), format!("{}", s.y[i]), err])?;
        }
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| Error::usage(e.to_string()))?).expect("ascii"))
}
