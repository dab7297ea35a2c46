//! Post-hoc analysis: metric-over-parameter curves, patch color statistics
//! and figure rendering.
//!
//! Figures are written as hand-rolled SVG (deterministic, byte-stable, no
//! timestamps unless asked) with the underlying curve data exported as CSV
//! alongside every figure.

use crate::sweeps::{Heatmap, SweepRecord, SweepValue};
use crate::transforms::{rgb_to_hsv, Image};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("records from mixed sweep specs: '{0}' and '{1}'")]
    MixedSpecs(String, String),
    #[error("no records to analyze")]
    EmptyData,
    #[error("io failure: {0}")]
    IoFailure(#[from] std::io::Error),
}

/// Which metric a curve plots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum YMetric {
    Map,
    Confidence,
}

/// One labeled curve: x sorted ascending, y in `[0, 1]`, with sample
/// standard deviation per point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveSeries {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub y_metric: YMetric,
    pub stddev: Vec<f64>,
}

fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    (mean, std)
}

/// X coordinate of a sweep value: scalars map to themselves, positions to
/// their first-appearance ordinal.
fn x_of(value: &SweepValue, ordinals: &mut BTreeMap<String, f64>) -> f64 {
    match value {
        SweepValue::Scalar(v) => *v,
        SweepValue::Position(p) => {
            let key = format!("{:?}", p);
            let next = ordinals.len() as f64;
            *ordinals.entry(key).or_insert(next)
        }
    }
}

/// Aggregates sweep records into curves: one mAP series per variant
/// (patched/clean) plus one confidence series per tracked object and
/// variant. Values are averaged over repeats; failed points are skipped.
pub fn curves_from_records(records: &[SweepRecord]) -> Result<Vec<CurveSeries>, AnalysisError> {
    if records.is_empty() {
        return Err(AnalysisError::EmptyData);
    }
    let spec_id = &records[0].spec_id;
    for r in records {
        if &r.spec_id != spec_id {
            return Err(AnalysisError::MixedSpecs(spec_id.clone(), r.spec_id.clone()));
        }
    }
    let mut ordinals = BTreeMap::new();
    // (patched, x) -> maps; (patched, object, x) -> confidences.
    let mut map_groups: BTreeMap<(bool, u64), (f64, Vec<f64>)> = BTreeMap::new();
    let mut conf_groups: BTreeMap<(bool, String, u64), (f64, Vec<f64>)> = BTreeMap::new();
    for r in records {
        if r.failed.is_some() {
            continue;
        }
        let x = x_of(&r.value, &mut ordinals);
        let key = x.to_bits();
        if let Some(map) = r.map {
            map_groups.entry((r.patched, key)).or_insert((x, Vec::new())).1.push(map);
        }
        for (name, &conf) in &r.per_object_confidence {
            conf_groups
                .entry((r.patched, name.clone(), key))
                .or_insert((x, Vec::new()))
                .1
                .push(conf);
        }
    }

    let variant = |patched: bool| if patched { "patched" } else { "clean" };
    let mut out = Vec::new();
    for patched in [true, false] {
        let mut pts: Vec<(f64, f64, f64)> = map_groups
            .iter()
            .filter(|((p, _), _)| *p == patched)
            .map(|(_, (x, ys))| {
                let (m, s) = mean_and_std(ys);
                (*x, m, s)
            })
            .collect();
        pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        if !pts.is_empty() {
            out.push(CurveSeries {
                label: format!("map ({})", variant(patched)),
                points: pts.iter().map(|(x, y, _)| (*x, *y)).collect(),
                y_metric: YMetric::Map,
                stddev: pts.iter().map(|(_, _, s)| *s).collect(),
            });
        }
    }
    let object_names: BTreeSet<String> =
        conf_groups.keys().map(|(_, name, _)| name.clone()).collect();
    for name in object_names {
        for patched in [true, false] {
            let mut pts: Vec<(f64, f64, f64)> = conf_groups
                .iter()
                .filter(|((p, n, _), _)| *p == patched && n == &name)
                .map(|(_, (x, ys))| {
                    let (m, s) = mean_and_std(ys);
                    (*x, m, s)
                })
                .collect();
            pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            if !pts.is_empty() {
                out.push(CurveSeries {
                    label: format!("confidence/{} ({})", name, variant(patched)),
                    points: pts.iter().map(|(x, y, _)| (*x, *y)).collect(),
                    y_metric: YMetric::Confidence,
                    stddev: pts.iter().map(|(_, _, s)| *s).collect(),
                });
            }
        }
    }
    Ok(out)
}

/// Exact HSV and RGB histograms plus the distinct-color count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColorStats {
    /// 360 integer-degree bins; gray pixels (zero saturation) land in bin 0.
    pub hue_hist: Vec<u64>,
    /// 256 bins over the 8-bit encoding.
    pub saturation_hist: Vec<u64>,
    pub value_hist: Vec<u64>,
    /// `[r, g, b]`, each 256 bins.
    pub rgb_hist: [Vec<u64>; 3],
    pub distinct_color_count: usize,
}

/// Histograms over a patch (or any image) in HSV and RGB space.
pub fn patch_color_stats(image: &Image) -> ColorStats {
    let mut hue = vec![0u64; 360];
    let mut sat = vec![0u64; 256];
    let mut val = vec![0u64; 256];
    let mut rgb = [vec![0u64; 256], vec![0u64; 256], vec![0u64; 256]];
    let mut distinct: BTreeSet<[u64; 3]> = BTreeSet::new();
    let bin8 = |v: f64| ((v * 255.0).round() as usize).min(255);
    for y in 0..image.height() {
        for x in 0..image.width() {
            let p = image.get(y, x);
            let hsv = rgb_to_hsv(p);
            hue[(hsv[0].floor() as usize).min(359)] += 1;
            sat[bin8(hsv[1])] += 1;
            val[bin8(hsv[2])] += 1;
            for c in 0..3 {
                rgb[c][bin8(p[c])] += 1;
            }
            distinct.insert([p[0].to_bits(), p[1].to_bits(), p[2].to_bits()]);
        }
    }
    ColorStats {
        hue_hist: hue,
        saturation_hist: sat,
        value_hist: val,
        rgb_hist: rgb,
        distinct_color_count: distinct.len(),
    }
}

/// Figure input: curves or a position heatmap.
pub enum FigureData<'a> {
    Curves(&'a [CurveSeries]),
    Heatmap(&'a Heatmap),
}

/// Rendering style. Timestamps are off by default so output bytes are
/// stable for identical data.
#[derive(Debug, Clone)]
pub struct FigureStyle {
    pub width: u32,
    pub height: u32,
    pub title: String,
    pub timestamps: bool,
}

impl Default for FigureStyle {
    fn default() -> Self {
        Self { width: 640, height: 420, title: String::new(), timestamps: false }
    }
}

const SERIES_COLORS: [&str; 8] =
    ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf", "#7f7f7f"];

fn fmt(v: f64) -> String {
    let s = format!("{v:.6}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Renders an SVG figure at `out_path` and the matching data CSV alongside
/// (same stem, `.csv` extension). Deterministic layout given the style.
pub fn render_figure(
    data: &FigureData,
    style: &FigureStyle,
    out_path: &Path,
) -> Result<(), AnalysisError> {
    let svg = match data {
        FigureData::Curves(series) => {
            if series.is_empty() || series.iter().all(|s| s.points.is_empty()) {
                return Err(AnalysisError::EmptyData);
            }
            curves_svg(series, style)
        }
        FigureData::Heatmap(hm) => {
            if hm.rows() == 0 || hm.cols() == 0 {
                return Err(AnalysisError::EmptyData);
            }
            heatmap_svg(hm, style)
        }
    };
    std::fs::write(out_path, svg)?;
    let csv_path = out_path.with_extension("csv");
    let csv = match data {
        FigureData::Curves(series) => {
            let mut s = String::from("series,x,y,stddev\n");
            for cs in series.iter() {
                for (i, (x, y)) in cs.points.iter().enumerate() {
                    let sd = cs.stddev.get(i).copied().unwrap_or(0.0);
                    let _ = writeln!(s, "{},{},{},{}", csv_quote(&cs.label), fmt(*x), fmt(*y), fmt(sd));
                }
            }
            s
        }
        FigureData::Heatmap(hm) => {
            let mut s = String::from("row,col,confidence\n");
            for (r, row) in hm.grid.iter().enumerate() {
                for (c, v) in row.iter().enumerate() {
                    let _ = writeln!(s, "{r},{c},{}", fmt(*v));
                }
            }
            s
        }
    };
    std::fs::write(csv_path, csv)?;
    Ok(())
}

fn csv_quote(s: &str) -> String {
    if s.contains(',') || s.contains('"') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn svg_header(style: &FigureStyle) -> String {
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n",
        w = style.width,
        h = style.height
    );
    if style.timestamps {
        let now = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let _ = writeln!(s, "<!-- generated at unix {now} -->");
    }
    s.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    if !style.title.is_empty() {
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"18\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">{}</text>",
            style.width / 2,
            xml_escape(&style.title)
        );
    }
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn curves_svg(series: &[CurveSeries], style: &FigureStyle) -> String {
    let (w, h) = (style.width as f64, style.height as f64);
    let (ml, mr, mt, mb) = (56.0, 16.0, 30.0, 44.0);
    let (pw, ph) = (w - ml - mr, h - mt - mb);
    let xs: Vec<f64> = series.iter().flat_map(|s| s.points.iter().map(|p| p.0)).collect();
    let x_min = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let x_max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = if (x_max - x_min).abs() < 1e-12 { 1.0 } else { x_max - x_min };
    let sx = |x: f64| ml + (x - x_min) / span * pw;
    let sy = |y: f64| mt + (1.0 - y.clamp(0.0, 1.0)) * ph;

    let mut s = svg_header(style);
    let _ = writeln!(
        s,
        "<rect x=\"{ml}\" y=\"{mt}\" width=\"{pw}\" height=\"{ph}\" fill=\"none\" stroke=\"#444\"/>"
    );
    // Ticks: 5 on each axis.
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let yv = t;
        let yy = sy(yv);
        let _ = writeln!(
            s,
            "<line x1=\"{x0}\" y1=\"{yy}\" x2=\"{x1}\" y2=\"{yy}\" stroke=\"#ccc\" stroke-width=\"0.5\"/><text x=\"{tx}\" y=\"{ty}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">{label}</text>",
            x0 = ml,
            x1 = ml + pw,
            tx = ml - 6.0,
            ty = yy + 3.0,
            label = fmt(yv)
        );
        let xv = x_min + t * span;
        let xx = sx(xv);
        let _ = writeln!(
            s,
            "<text x=\"{xx}\" y=\"{ty}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"middle\">{label}</text>",
            ty = mt + ph + 14.0,
            label = fmt(xv)
        );
    }
    for (si, cs) in series.iter().enumerate() {
        let color = SERIES_COLORS[si % SERIES_COLORS.len()];
        let path: Vec<String> = cs
            .points
            .iter()
            .map(|(x, y)| format!("{},{}", fmt(sx(*x)), fmt(sy(*y))))
            .collect();
        let _ = writeln!(
            s,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
            path.join(" ")
        );
        for (i, (x, y)) in cs.points.iter().enumerate() {
            let sd = cs.stddev.get(i).copied().unwrap_or(0.0);
            if sd > 0.0 {
                let _ = writeln!(
                    s,
                    "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"{color}\" stroke-width=\"1\"/>",
                    x0 = fmt(sx(*x)),
                    y0 = fmt(sy(*y - sd)),
                    y1 = fmt(sy(*y + sd))
                );
            }
            let _ = writeln!(
                s,
                "<circle cx=\"{}\" cy=\"{}\" r=\"2\" fill=\"{color}\"/>",
                fmt(sx(*x)),
                fmt(sy(*y))
            );
        }
        // Legend entry.
        let ly = mt + 12.0 + si as f64 * 14.0;
        let _ = writeln!(
            s,
            "<rect x=\"{lx}\" y=\"{ry}\" width=\"10\" height=\"3\" fill=\"{color}\"/><text x=\"{tx}\" y=\"{ty}\" font-family=\"sans-serif\" font-size=\"10\">{label}</text>",
            lx = ml + 8.0,
            ry = ly - 3.0,
            tx = ml + 22.0,
            ty = ly,
            label = xml_escape(&cs.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Two-stop color ramp from dark blue (0) to yellow (1).
fn ramp(v: f64) -> String {
    let v = v.clamp(0.0, 1.0);
    let r = (20.0 + 235.0 * v) as u8;
    let g = (30.0 + 200.0 * v) as u8;
    let b = (90.0 + (40.0 - 90.0) * v).max(0.0) as u8;
    format!("#{r:02x}{g:02x}{b:02x}")
}

fn heatmap_svg(hm: &Heatmap, style: &FigureStyle) -> String {
    let (w, h) = (style.width as f64, style.height as f64);
    let (ml, mr, mt, mb) = (56.0, 16.0, 30.0, 44.0);
    let (pw, ph) = (w - ml - mr, h - mt - mb);
    let (rows, cols) = (hm.rows(), hm.cols());
    let cw = pw / cols as f64;
    let ch = ph / rows as f64;
    let mut s = svg_header(style);
    for (r, row) in hm.grid.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            let _ = writeln!(
                s,
                "<rect x=\"{x}\" y=\"{y}\" width=\"{cw}\" height=\"{ch}\" fill=\"{fill}\"/>",
                x = fmt(ml + c as f64 * cw),
                y = fmt(mt + r as f64 * ch),
                cw = fmt(cw + 0.5),
                ch = fmt(ch + 0.5),
                fill = ramp(*v)
            );
        }
    }
    // Axis labels carry the grid extents in pixels.
    let _ = writeln!(
        s,
        "<text x=\"{x}\" y=\"{y}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"middle\">x: 0..{xmax} px ({cols} cells)</text>",
        x = ml + pw / 2.0,
        y = mt + ph + 16.0,
        xmax = hm.frame.1
    );
    let _ = writeln!(
        s,
        "<text x=\"14\" y=\"{y}\" font-family=\"sans-serif\" font-size=\"10\" transform=\"rotate(-90 14 {y})\" text-anchor=\"middle\">y: 0..{ymax} px ({rows} cells)</text>",
        y = mt + ph / 2.0,
        ymax = hm.frame.0
    );
    let _ = writeln!(
        s,
        "<rect x=\"{ml}\" y=\"{mt}\" width=\"{pw}\" height=\"{ph}\" fill=\"none\" stroke=\"#444\"/>"
    );
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sweeps::SweepDimension;
    use approx::assert_abs_diff_eq;
    use std::collections::BTreeMap;

    fn record(value: f64, repeat: u32, patched: bool, map: f64) -> SweepRecord {
        SweepRecord {
            schema_version: 1,
            spec_id: "s".into(),
            dimension: SweepDimension::Scale,
            value: SweepValue::Scalar(value),
            repeat_index: repeat,
            patched,
            map: Some(map),
            per_class_ap: BTreeMap::new(),
            per_object_confidence: BTreeMap::from([("cup".to_string(), map / 2.0)]),
            failed: None,
            wall_time: 0.0,
        }
    }

    #[test]
    fn single_repeat_passes_values_through() {
        let records = vec![record(0.1, 0, true, 0.8), record(0.2, 0, true, 0.6)];
        let curves = curves_from_records(&records).unwrap();
        let map_curve = curves.iter().find(|c| c.label == "map (patched)").unwrap();
        assert_eq!(map_curve.points, vec![(0.1, 0.8), (0.2, 0.6)]);
        assert_eq!(map_curve.stddev, vec![0.0, 0.0]);
    }

    #[test]
    fn identical_records_have_zero_stddev() {
        let records = vec![record(0.1, 0, true, 0.5), record(0.1, 1, true, 0.5), record(0.1, 2, true, 0.5)];
        let curves = curves_from_records(&records).unwrap();
        let map_curve = curves.iter().find(|c| c.label == "map (patched)").unwrap();
        assert_eq!(map_curve.stddev, vec![0.0]);
    }

    #[test]
    fn mean_and_std_match_direct_arithmetic() {
        // Hand-built 3-record set vs a direct calculation.
        let records = vec![record(0.3, 0, true, 0.2), record(0.3, 1, true, 0.5), record(0.3, 2, true, 0.8)];
        let curves = curves_from_records(&records).unwrap();
        let map_curve = curves.iter().find(|c| c.label == "map (patched)").unwrap();
        let mean = (0.2 + 0.5 + 0.8) / 3.0;
        let var = ((0.2f64 - mean).powi(2) + (0.5 - mean).powi(2) + (0.8 - mean).powi(2)) / 2.0;
        assert_abs_diff_eq!(map_curve.points[0].1, mean, epsilon = 1e-12);
        assert_abs_diff_eq!(map_curve.stddev[0], var.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn mixed_specs_are_rejected() {
        let mut b = record(0.1, 0, true, 0.5);
        b.spec_id = "other".into();
        let err = curves_from_records(&[record(0.1, 0, true, 0.5), b]);
        assert!(matches!(err, Err(AnalysisError::MixedSpecs(..))));
    }

    #[test]
    fn permutation_invariance() {
        let mut records =
            vec![record(0.1, 0, true, 0.9), record(0.2, 0, true, 0.7), record(0.3, 0, true, 0.5), record(0.1, 0, false, 1.0)];
        let a = curves_from_records(&records).unwrap();
        records.reverse();
        let b = curves_from_records(&records).unwrap();
        for (ca, cb) in a.iter().zip(&b) {
            assert_eq!(ca.label, cb.label);
            assert_eq!(ca.points, cb.points);
        }
    }

    #[test]
    fn histograms_conserve_mass() {
        let img = Image::from_fn(13, 17, |y, x| {
            [((y * 31 + x) % 11) as f64 / 10.0, ((x * 7) % 5) as f64 / 4.0, 0.42]
        });
        let stats = patch_color_stats(&img);
        let n = (13 * 17) as u64;
        assert_eq!(stats.hue_hist.iter().sum::<u64>(), n);
        assert_eq!(stats.saturation_hist.iter().sum::<u64>(), n);
        assert_eq!(stats.value_hist.iter().sum::<u64>(), n);
        for c in 0..3 {
            assert_eq!(stats.rgb_hist[c].iter().sum::<u64>(), n);
        }
    }

    #[test]
    fn single_color_concentrates_in_one_bin() {
        let img = Image::constant(8, 8, [0.5, 0.25, 0.25]);
        let stats = patch_color_stats(&img);
        assert_eq!(stats.distinct_color_count, 1);
        assert_eq!(stats.hue_hist.iter().filter(|&&v| v > 0).count(), 1);
        assert_eq!(stats.rgb_hist[0].iter().filter(|&&v| v > 0).count(), 1);
        // Two-color checkerboard: two equal-mass bins.
        let board = Image::from_fn(8, 8, |y, x| {
            if (y + x) % 2 == 0 {
                [1.0, 0.0, 0.0]
            } else {
                [0.0, 1.0, 0.0]
            }
        });
        let stats = patch_color_stats(&board);
        assert_eq!(stats.distinct_color_count, 2);
        let nonzero: Vec<u64> = stats.hue_hist.iter().copied().filter(|&v| v > 0).collect();
        assert_eq!(nonzero, vec![32, 32]);
    }

    #[test]
    fn distinct_count_matches_set_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let img = Image::from_fn(64, 64, |_, _| {
            [rng.random_range(0..4) as f64 / 3.0, rng.random_range(0..4) as f64 / 3.0, rng.random_range(0..4) as f64 / 3.0]
        });
        let stats = patch_color_stats(&img);
        let mut set = std::collections::BTreeSet::new();
        for y in 0..64 {
            for x in 0..64 {
                let p = img.get(y, x);
                set.insert([p[0].to_bits(), p[1].to_bits(), p[2].to_bits()]);
            }
        }
        assert_eq!(stats.distinct_color_count, set.len());
    }

    #[test]
    fn figures_are_byte_stable_and_reject_empty() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fig.svg");
        let series = vec![CurveSeries {
            label: "map (patched)".into(),
            points: vec![(0.1, 0.9), (0.2, 0.4)],
            y_metric: YMetric::Map,
            stddev: vec![0.0, 0.05],
        }];
        render_figure(&FigureData::Curves(&series), &FigureStyle::default(), &path).unwrap();
        let first = std::fs::read(&path).unwrap();
        let csv_first = std::fs::read(path.with_extension("csv")).unwrap();
        render_figure(&FigureData::Curves(&series), &FigureStyle::default(), &path).unwrap();
        assert_eq!(first, std::fs::read(&path).unwrap());
        assert_eq!(csv_first, std::fs::read(path.with_extension("csv")).unwrap());

        let empty: Vec<CurveSeries> = vec![];
        assert!(matches!(
            render_figure(&FigureData::Curves(&empty), &FigureStyle::default(), &path),
            Err(AnalysisError::EmptyData)
        ));
    }

    #[test]
    fn heatmap_figure_labels_extents() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("hm.svg");
        let hm = Heatmap {
            grid: vec![vec![0.2, 0.8, 0.5], vec![0.9, 0.1, 0.4]],
            grid_step: 32,
            frame: (64, 96),
            scale: 0.25,
            baseline_confidence: 0.9,
        };
        render_figure(&FigureData::Heatmap(&hm), &FigureStyle::default(), &path).unwrap();
        let svg = std::fs::read_to_string(&path).unwrap();
        assert!(svg.contains("3 cells"), "x extent label missing");
        assert!(svg.contains("2 cells"), "y extent label missing");
        assert!(svg.contains("0..96"), "x pixel extent missing");
        assert!(svg.contains("0..64"), "y pixel extent missing");
    }
}
