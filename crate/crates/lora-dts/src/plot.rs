//! Static SVG figures: SER curves and Doppler profiles.
//!
//! Plots are drawn from the same rows that go into the CSV, so they never
//! carry numbers the tables do not.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use lora_dts_core::sim::awgn_ser_oracle;
use plotters::prelude::*;
use thiserror::Error;

use crate::output::ResultRow;

#[derive(Debug, Error)]
#[error("plotting failed: {0}")]
pub struct PlotError(String);

fn perr<E: std::fmt::Display>(e: E) -> PlotError {
    PlotError(e.to_string())
}

const PALETTE: [RGBColor; 8] = [
    RGBColor(31, 119, 180),
    RGBColor(255, 127, 14),
    RGBColor(44, 160, 44),
    RGBColor(214, 39, 40),
    RGBColor(148, 103, 189),
    RGBColor(140, 86, 75),
    RGBColor(227, 119, 194),
    RGBColor(127, 127, 127),
];

/// Lowest SER shown; zero-error cells are drawn on this floor.
const SER_FLOOR: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum XAxis {
    EsN0,
    PayloadBytes,
    PassTime,
    MidambleSpacing,
}

impl XAxis {
    fn label(self) -> &'static str {
        match self {
            Self::EsN0 => "Es/N0 [dB]",
            Self::PayloadBytes => "payload [bytes]",
            Self::PassTime => "pass time [s]",
            Self::MidambleSpacing => "n_int [chirps]",
        }
    }

    fn value(self, r: &ResultRow) -> Option<f64> {
        match self {
            Self::EsN0 => r.esn0_db,
            Self::PayloadBytes => Some(r.payload_bits as f64 / 8.0),
            Self::PassTime => Some(r.t_start_s),
            Self::MidambleSpacing => Some(r.n_int as f64),
        }
    }

    fn slug(self) -> &'static str {
        match self {
            Self::EsN0 => "esn0",
            Self::PayloadBytes => "payload",
            Self::PassTime => "position",
            Self::MidambleSpacing => "nint",
        }
    }
}

fn distinct(rows: &[&ResultRow], f: impl Fn(&ResultRow) -> Option<f64>) -> usize {
    let mut v: Vec<u64> = rows.iter().filter_map(|r| f(r)).map(f64::to_bits).collect();
    v.sort_unstable();
    v.dedup();
    v.len()
}

/// The swept axis with the most distinct values; Es/N0 wins ties.
pub fn choose_x_axis(rows: &[ResultRow]) -> XAxis {
    let refs: Vec<&ResultRow> = rows.iter().collect();
    let midamble: Vec<&ResultRow> = rows.iter().filter(|r| r.estimator.uses_midambles()).collect();
    let counts = [
        (XAxis::EsN0, distinct(&refs, |r| XAxis::EsN0.value(r))),
        (XAxis::PayloadBytes, distinct(&refs, |r| XAxis::PayloadBytes.value(r))),
        (XAxis::PassTime, distinct(&refs, |r| XAxis::PassTime.value(r))),
        (XAxis::MidambleSpacing, distinct(&midamble, |r| XAxis::MidambleSpacing.value(r))),
    ];
    counts
        .iter()
        .fold((XAxis::EsN0, 0), |best, &(a, n)| if n > best.1 { (a, n) } else { best })
        .0
}

/// Axes that split figures (everything but the x axis, SF and the curve key).
fn figure_key(r: &ResultRow, x: XAxis) -> String {
    let mut parts = vec![format!("ldro{}", if r.ldro { "on" } else { "off" })];
    if x != XAxis::PassTime {
        parts.push(format!("t{}", r.t_start_s));
    }
    if x != XAxis::EsN0 {
        parts.push(match r.esn0_db {
            Some(e) => format!("esn0_{e}"),
            None => "noiseless".into(),
        });
    }
    if x != XAxis::PayloadBytes {
        parts.push(format!("{}B", r.payload_bits / 8));
    }
    parts.join("_")
}

fn curve_key(r: &ResultRow, x: XAxis, spread_n_int: bool) -> String {
    if x != XAxis::MidambleSpacing && spread_n_int && r.estimator.uses_midambles() {
        format!("{} n_int={}", r.estimator, r.n_int)
    } else {
        r.estimator.to_string()
    }
}

/// Writes one SVG per figure group into `dir`, one panel per SF. Returns
/// the files written.
pub fn plot_ser(dir: &Path, stem: &str, rows: &[ResultRow]) -> Result<Vec<PathBuf>, PlotError> {
    let x = choose_x_axis(rows);
    let ok: Vec<&ResultRow> = rows.iter().filter(|r| r.ser.is_some() && x.value(r).is_some()).collect();

    let mut figures: BTreeMap<String, Vec<&ResultRow>> = BTreeMap::new();
    for r in &ok {
        figures.entry(figure_key(r, x)).or_default().push(r);
    }
    let mut written = Vec::new();
    for (key, fig_rows) in figures {
        let path = dir.join(format!("{stem}_{}_{key}.svg", x.slug()));
        draw_ser_figure(&path, x, &fig_rows, &key)?;
        written.push(path);
    }
    Ok(written)
}

type Curve = Vec<(f64, f64)>;

fn draw_ser_figure(path: &Path, x: XAxis, rows: &[&ResultRow], title: &str) -> Result<(), PlotError> {
    let mut panels: BTreeMap<u8, BTreeMap<String, Curve>> = BTreeMap::new();
    for r in rows {
        // Label curves by n_int only when the panel holds several spacings.
        let spread_n_int = distinct(
            &rows
                .iter()
                .copied()
                .filter(|o| o.sf == r.sf && o.estimator == r.estimator)
                .collect::<Vec<_>>(),
            |o| Some(o.n_int as f64),
        ) > 1;
        let (Some(xv), Some(ser)) = (x.value(r), r.ser) else { continue };
        panels
            .entry(r.sf)
            .or_default()
            .entry(curve_key(r, x, spread_n_int))
            .or_default()
            .push((xv, ser.max(SER_FLOOR)));
    }
    let ldro = rows.first().is_some_and(|r| r.ldro);
    let width = 480 * panels.len().max(1) as u32;
    let root = SVGBackend::new(path, (width, 420)).into_drawing_area();
    root.fill(&WHITE).map_err(perr)?;
    let root = root.titled(title, ("sans-serif", 16)).map_err(perr)?;
    let areas = root.split_evenly((1, panels.len().max(1)));
    for (area, (sf, curves)) in areas.iter().zip(panels) {
        let xs = curves.values().flatten().map(|p| p.0);
        let (lo, hi) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        let (lo, hi) = if lo < hi { (lo, hi) } else { (lo - 1.0, hi + 1.0) };
        let mut chart = ChartBuilder::on(area)
            .caption(format!("SF {sf}"), ("sans-serif", 18))
            .margin(10)
            .x_label_area_size(40)
            .y_label_area_size(60)
            .build_cartesian_2d(lo..hi, (SER_FLOOR..1.0).log_scale())
            .map_err(perr)?;
        chart
            .configure_mesh()
            .x_desc(x.label())
            .y_desc("SER")
            .draw()
            .map_err(perr)?;

        if x == XAxis::EsN0 && !ldro {
            let m = 1usize << sf;
            let steps = 60;
            let reference: Curve = (0..=steps)
                .filter_map(|i| {
                    let e = lo + (hi - lo) * i as f64 / steps as f64;
                    awgn_ser_oracle(m, 10f64.powf(e / 10.0)).ok().map(|p| (e, p.max(SER_FLOOR)))
                })
                .collect();
            chart
                .draw_series(LineSeries::new(reference, BLACK.stroke_width(1)))
                .map_err(perr)?
                .label("AWGN, no Doppler")
                .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], BLACK));
        }

        for (i, (name, mut pts)) in curves.into_iter().enumerate() {
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            let color = PALETTE[i % PALETTE.len()];
            chart
                .draw_series(LineSeries::new(pts.clone(), color.stroke_width(2)))
                .map_err(perr)?
                .label(name)
                .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], color.stroke_width(2)));
            chart
                .draw_series(pts.into_iter().map(|p| Circle::new(p, 3, color.filled())))
                .map_err(perr)?;
        }
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .draw()
            .map_err(perr)?;
    }
    root.present().map_err(perr)?;
    Ok(())
}

/// Doppler shift (left axis, kHz) and rate (right axis, Hz/s) over a pass.
pub fn plot_doppler(path: &Path, t: &[f64], shift_hz: &[f64], rate_hz_s: &[f64], title: &str) -> Result<(), PlotError> {
    let range = |v: &[f64]| {
        let (a, b) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        let pad = 0.05 * (b - a).max(1e-9);
        (a - pad)..(b + pad)
    };
    let khz: Vec<f64> = shift_hz.iter().map(|f| f / 1e3).collect();
    let root = SVGBackend::new(path, (720, 420)).into_drawing_area();
    root.fill(&WHITE).map_err(perr)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 18))
        .margin(10)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .right_y_label_area_size(60)
        .build_cartesian_2d(range(t), range(&khz))
        .map_err(perr)?
        .set_secondary_coord(range(t), range(rate_hz_s));
    chart
        .configure_mesh()
        .x_desc("time from zenith [s]")
        .y_desc("Doppler shift [kHz]")
        .draw()
        .map_err(perr)?;
    chart
        .configure_secondary_axes()
        .y_desc("Doppler rate [Hz/s]")
        .draw()
        .map_err(perr)?;
    chart
        .draw_series(LineSeries::new(t.iter().copied().zip(khz), PALETTE[0].stroke_width(2)))
        .map_err(perr)?
        .label("shift")
        .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], PALETTE[0]));
    chart
        .draw_secondary_series(LineSeries::new(
            t.iter().copied().zip(rate_hz_s.iter().copied()),
            PALETTE[3].stroke_width(2),
        ))
        .map_err(perr)?
        .label("rate")
        .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], PALETTE[3]));
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(perr)?;
    root.present().map_err(perr)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sweep::CellResult;
    use lora_dts_core::sim::{NoiseSpec, SerPoint};
    use lora_dts_core::{EstimatorKind, ScenarioConfig};

    fn row(sf: u8, est: EstimatorKind, esn0: f64, errors: u64) -> ResultRow {
        let mut sc = ScenarioConfig::reference(sf, false, est, 0.0).unwrap();
        sc.noise = NoiseSpec::EsN0Db(esn0);
        ResultRow::from_cell(&CellResult {
            scenario: sc,
            result: Ok(SerPoint::from_counts(errors, 1000)),
        })
    }

    #[test]
    fn axis_choice() {
        let rows: Vec<ResultRow> = [8.0, 11.0, 14.0]
            .iter()
            .map(|&e| row(7, EstimatorKind::Point, e, 10))
            .collect();
        assert_eq!(choose_x_axis(&rows), XAxis::EsN0);
        let mut payload = vec![row(7, EstimatorKind::Point, 14.0, 1), row(7, EstimatorKind::Point, 14.0, 2)];
        payload[1].payload_bits = 408;
        assert_eq!(choose_x_axis(&payload), XAxis::PayloadBytes);
    }

    #[test]
    fn ser_figure_has_one_curve_per_estimator() {
        let dir = tempfile::tempdir().unwrap();
        let mut rows = Vec::new();
        for sf in [7u8, 10] {
            for est in EstimatorKind::ALL {
                for e in [8.0, 11.0, 14.0] {
                    rows.push(row(sf, est, e, 5));
                }
            }
        }
        let files = plot_ser(dir.path(), "ser", &rows).unwrap();
        assert_eq!(files.len(), 1);
        let svg = std::fs::read_to_string(&files[0]).unwrap();
        assert!(svg.starts_with("<svg"));
        for est in EstimatorKind::ALL {
            // One legend entry per panel.
            assert_eq!(svg.lines().filter(|l| l.trim() == est.name()).count(), 2, "{est}");
        }
        assert!(svg.lines().any(|l| l.trim() == "SF 10"));
    }

    #[test]
    fn doppler_figure_renders() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.svg");
        let t = [-1.0, 0.0, 1.0];
        plot_doppler(&path, &t, &[300.0, 0.0, -300.0], &[-300.0, -304.0, -300.0], "pass").unwrap();
        let svg = std::fs::read_to_string(&path).unwrap();
        assert!(svg.contains("Doppler rate"));
    }
}
