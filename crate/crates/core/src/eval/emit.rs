use std::fs::File;
use std::ops::Range;
use std::path::Path;

use plotters::prelude::*;

use super::{LossCurve, ParamCurve, ParamPoint, ReconstructionCurve, ReconstructionPoint, SaturationCurve};
use crate::binio::write_file;
use crate::error::{Error, Result};
use crate::polar_mnist::SaturationPoint;

/// A result that can be written as CSV and drawn as a line chart.
pub trait Tabular: Sized {
    const HEADER: &'static [&'static str];

    fn records(&self) -> Vec<Vec<String>>;

    fn from_records(records: &[Vec<String>]) -> Result<Self>;

    fn chart(&self) -> Chart;
}

/// What a line chart shows: one series on the left axis and optionally a
/// second one against its own right axis.
pub struct Chart {
    pub title: &'static str,
    pub x_label: &'static str,
    pub xs: Vec<f64>,
    pub left: Series,
    pub right: Option<Series>,
}

pub struct Series {
    pub label: &'static str,
    pub ys: Vec<f64>,
}

/// Header row plus one record per point.
pub fn emit_csv<T: Tabular>(result: &T, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(T::HEADER)?;
    for r in result.records() {
        w.write_record(&r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a file written by [`emit_csv`]; the header must match exactly.
pub fn parse_csv<T: Tabular>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
    if header != T::HEADER {
        return Err(Error::param(format!(
            "{}: header {header:?}, expected {:?}",
            path.display(),
            T::HEADER
        )));
    }
    let records = r
        .records()
        .map(|rec| Ok(rec?.iter().map(String::from).collect()))
        .collect::<Result<Vec<Vec<String>>>>()?;
    T::from_records(&records)
}

/// Writes an SVG line chart. An empty result writes nothing and returns
/// `false`.
pub fn emit_plot<T: Tabular>(result: &T, path: &Path) -> Result<bool> {
    let chart = result.chart();
    if chart.xs.is_empty() {
        return Ok(false);
    }
    let mut svg = String::new();
    draw(&chart, &mut svg).map_err(Error::Plot)?;
    write_file(path, svg.as_bytes())?;
    Ok(true)
}

fn span(values: &[f64]) -> Range<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pad = if hi > lo { 0.05 * (hi - lo) } else { lo.abs().max(1.0) * 0.05 };
    (lo - pad)..(hi + pad)
}

fn draw(c: &Chart, out: &mut String) -> std::result::Result<(), String> {
    let err = |e: &dyn std::fmt::Display| e.to_string();
    let root = SVGBackend::with_string(out, (900, 540)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| err(&e))?;
    let x_range = span(&c.xs);
    let mut chart = ChartBuilder::on(&root)
        .caption(c.title, ("sans-serif", 22))
        .margin(16)
        .x_label_area_size(44)
        .y_label_area_size(72)
        .right_y_label_area_size(if c.right.is_some() { 72 } else { 0 })
        .build_cartesian_2d(x_range.clone(), span(&c.left.ys))
        .map_err(|e| err(&e))?;
    chart
        .configure_mesh()
        .x_desc(c.x_label)
        .y_desc(c.left.label)
        .draw()
        .map_err(|e| err(&e))?;
    let left: Vec<(f64, f64)> = c.xs.iter().copied().zip(c.left.ys.iter().copied()).collect();
    chart
        .draw_series(LineSeries::new(left.clone(), BLUE.stroke_width(2)))
        .map_err(|e| err(&e))?
        .label(c.left.label)
        .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], BLUE));
    chart
        .draw_series(left.iter().map(|&p| Circle::new(p, 3, BLUE.filled())))
        .map_err(|e| err(&e))?;

    if let Some(right) = &c.right {
        let mut chart = chart.set_secondary_coord(x_range, span(&right.ys));
        chart
            .configure_secondary_axes()
            .y_desc(right.label)
            .draw()
            .map_err(|e| err(&e))?;
        let pts: Vec<(f64, f64)> = c.xs.iter().copied().zip(right.ys.iter().copied()).collect();
        chart
            .draw_secondary_series(LineSeries::new(pts.clone(), RED.stroke_width(2)))
            .map_err(|e| err(&e))?
            .label(right.label)
            .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], RED));
        chart
            .draw_secondary_series(pts.iter().map(|&p| Circle::new(p, 3, RED.filled())))
            .map_err(|e| err(&e))?;
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .draw()
            .map_err(|e| err(&e))?;
    } else {
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .draw()
            .map_err(|e| err(&e))?;
    }
    root.present().map_err(|e| err(&e))
}

fn field<T: std::str::FromStr>(rec: &[String], i: usize, row: usize, name: &str) -> Result<T> {
    rec.get(i)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::param(format!("row {}: bad {name} {:?}", row + 1, rec.get(i))))
}

impl Tabular for ReconstructionCurve {
    const HEADER: &'static [&'static str] = &["k", "match_rate"];

    fn records(&self) -> Vec<Vec<String>> {
        self.points
            .iter()
            .map(|p| vec![p.k.to_string(), p.match_rate.to_string()])
            .collect()
    }

    fn from_records(records: &[Vec<String>]) -> Result<Self> {
        let points = records
            .iter()
            .enumerate()
            .map(|(i, r)| {
                Ok(ReconstructionPoint {
                    k: field(r, 0, i, "k")?,
                    match_rate: field(r, 1, i, "match_rate")?,
                })
            })
            .collect::<Result<_>>()?;
        let curve = ReconstructionCurve { points };
        curve.validate()?;
        Ok(curve)
    }

    fn chart(&self) -> Chart {
        Chart {
            title: "Token reconstruction vs PCA rank",
            x_label: "PCA components k",
            xs: self.points.iter().map(|p| p.k as f64).collect(),
            left: Series {
                label: "match rate",
                ys: self.points.iter().map(|p| p.match_rate).collect(),
            },
            right: None,
        }
    }
}

impl Tabular for ParamCurve {
    const HEADER: &'static [&'static str] = &["depth", "params_compressed", "params_full"];

    fn records(&self) -> Vec<Vec<String>> {
        self.points
            .iter()
            .map(|p| {
                vec![
                    p.depth.to_string(),
                    p.params_compressed.to_string(),
                    p.params_full.to_string(),
                ]
            })
            .collect()
    }

    fn from_records(records: &[Vec<String>]) -> Result<Self> {
        let points = records
            .iter()
            .enumerate()
            .map(|(i, r)| {
                Ok(ParamPoint {
                    depth: field(r, 0, i, "depth")?,
                    params_compressed: field(r, 1, i, "params_compressed")?,
                    params_full: field(r, 2, i, "params_full")?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(ParamCurve { points })
    }

    fn chart(&self) -> Chart {
        Chart {
            title: "Decoder parameters vs depth",
            x_label: "decoder layers",
            xs: self.points.iter().map(|p| p.depth as f64).collect(),
            left: Series {
                label: "compressed input parameters",
                ys: self.points.iter().map(|p| p.params_compressed as f64).collect(),
            },
            right: Some(Series {
                label: "full input parameters",
                ys: self.points.iter().map(|p| p.params_full as f64).collect(),
            }),
        }
    }
}

impl Tabular for SaturationCurve {
    const HEADER: &'static [&'static str] = &["n_samples", "accuracy", "train_seconds"];

    fn records(&self) -> Vec<Vec<String>> {
        self.points
            .iter()
            .map(|p| {
                vec![
                    p.n_samples.to_string(),
                    p.accuracy.to_string(),
                    p.train_seconds.to_string(),
                ]
            })
            .collect()
    }

    fn from_records(records: &[Vec<String>]) -> Result<Self> {
        let points = records
            .iter()
            .enumerate()
            .map(|(i, r)| {
                Ok(SaturationPoint {
                    n_samples: field(r, 0, i, "n_samples")?,
                    accuracy: field(r, 1, i, "accuracy")?,
                    train_seconds: field(r, 2, i, "train_seconds")?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(SaturationCurve { points })
    }

    fn chart(&self) -> Chart {
        Chart {
            title: "Accuracy and training time vs training samples",
            x_label: "training samples",
            xs: self.points.iter().map(|p| p.n_samples as f64).collect(),
            left: Series {
                label: "test accuracy",
                ys: self.points.iter().map(|p| p.accuracy).collect(),
            },
            right: Some(Series {
                label: "training seconds",
                ys: self.points.iter().map(|p| p.train_seconds).collect(),
            }),
        }
    }
}

impl Tabular for LossCurve {
    const HEADER: &'static [&'static str] = &["epoch", "loss"];

    fn records(&self) -> Vec<Vec<String>> {
        self.losses
            .iter()
            .enumerate()
            .map(|(i, l)| vec![(i + 1).to_string(), l.to_string()])
            .collect()
    }

    fn from_records(records: &[Vec<String>]) -> Result<Self> {
        let losses = records
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let epoch: usize = field(r, 0, i, "epoch")?;
                if epoch != i + 1 {
                    return Err(Error::param(format!("row {}: epoch {epoch} out of order", i + 1)));
                }
                field(r, 1, i, "loss")
            })
            .collect::<Result<_>>()?;
        Ok(LossCurve { losses })
    }

    fn chart(&self) -> Chart {
        Chart {
            title: "Training loss",
            x_label: "epoch",
            xs: (1..=self.losses.len()).map(|e| e as f64).collect(),
            left: Series {
                label: "mean cross-entropy",
                ys: self.losses.clone(),
            },
            right: None,
        }
    }
}
