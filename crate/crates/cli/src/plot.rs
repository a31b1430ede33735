//! SVG funnel and state plots straight from a trajectory CSV, plus an
//! equivalent gnuplot script.

use std::fmt::Write as _;
use std::fs;
use std::ops::Range;
use std::path::Path;

use anyhow::{anyhow, Result};
use clap::Args;
use plotters::coord::types::RangedCoordf64;
use plotters::coord::Shift;
use plotters::prelude::*;

use stlfunnel_core::sim::CsvTable;

const SIZE: (u32, u32) = (800, 500);
/// Longer series are thinned to about this many points.
const MAX_POINTS: usize = 2000;

#[derive(Args, Debug, Clone, Default)]
pub struct Selection {
    /// Subsystems to plot (default: the first `--max-plots`).
    #[arg(long, value_delimiter = ',')]
    pub ids: Vec<String>,
    #[arg(long, default_value_t = 6)]
    pub max_plots: usize,
}

struct Series<'a> {
    id: &'a str,
    /// Column names `<id>.x<k>` in order.
    states: Vec<String>,
}

fn subsystems(table: &CsvTable) -> Vec<Series<'_>> {
    table
        .headers()
        .iter()
        .filter_map(|h| h.strip_suffix(".rho"))
        .map(|id| {
            let states = (0..)
                .map(|k| format!("{id}.x{k}"))
                .take_while(|c| table.column(c).is_some())
                .collect();
            Series { id, states }
        })
        .collect()
}

fn select<'a>(all: Vec<Series<'a>>, sel: &Selection) -> Vec<Series<'a>> {
    if sel.ids.is_empty() {
        all.into_iter().take(sel.max_plots).collect()
    } else {
        all.into_iter().filter(|s| sel.ids.iter().any(|i| i == s.id)).collect()
    }
}

fn thinned(table: &CsvTable, col: &str) -> Vec<f64> {
    let v = table.column(col).unwrap_or(&[]);
    let stride = v.len().div_ceil(MAX_POINTS).max(1);
    let mut out: Vec<f64> = v.iter().step_by(stride).copied().collect();
    if let Some(&last) = v.last() {
        if !(v.len() - 1).is_multiple_of(stride) {
            out.push(last);
        }
    }
    out
}

fn range<'a>(values: impl IntoIterator<Item = &'a f64>) -> Range<f64> {
    let (lo, hi) = values
        .into_iter()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return 0.0..1.0;
    }
    let pad = ((hi - lo) * 0.05).max(1e-9);
    lo - pad..hi + pad
}

type Plot<'a, 'b> = ChartContext<'a, SVGBackend<'b>, Cartesian2d<RangedCoordf64, RangedCoordf64>>;

fn chart<'a, 'b>(
    root: &'a DrawingArea<SVGBackend<'b>, Shift>,
    caption: &str,
    x: Range<f64>,
    y: Range<f64>,
    x_desc: &str,
    y_desc: &str,
) -> Result<Plot<'a, 'b>> {
    root.fill(&WHITE).map_err(|e| anyhow!("{e}"))?;
    let mut c = ChartBuilder::on(root)
        .caption(caption, ("sans-serif", 18))
        .margin(12)
        .x_label_area_size(36)
        .y_label_area_size(60)
        .build_cartesian_2d(x, y)
        .map_err(|e| anyhow!("{e}"))?;
    c.configure_mesh()
        .x_desc(x_desc)
        .y_desc(y_desc)
        .light_line_style(WHITE)
        .draw()
        .map_err(|e| anyhow!("{e}"))?;
    Ok(c)
}

fn funnel_plot(table: &CsvTable, s: &Series, path: &Path) -> Result<()> {
    let t = thinned(table, "t");
    let rho = thinned(table, &format!("{}.rho", s.id));
    let lower = thinned(table, &format!("{}.lower", s.id));
    let upper = thinned(table, &format!("{}.upper", s.id));
    let root = SVGBackend::new(path, SIZE).into_drawing_area();
    let mut c = chart(
        &root,
        &format!("subsystem {}: robustness and funnel", s.id),
        range(&t),
        range(rho.iter().chain(&lower).chain(&upper)),
        "t [s]",
        "rho",
    )?;
    let err = |e| anyhow!("{e}");
    c.draw_series(LineSeries::new(t.iter().copied().zip(rho.iter().copied()), BLUE.stroke_width(2)))
        .map_err(err)?
        .label("rho")
        .legend(|(x, y)| PathElement::new([(x, y), (x + 16, y)], BLUE));
    for (bound, name) in [(&lower, "lower"), (&upper, "upper")] {
        c.draw_series(DashedLineSeries::new(
            t.iter().copied().zip(bound.iter().copied()),
            6,
            4,
            RED.into(),
        ))
        .map_err(err)?
        .label(name)
        .legend(|(x, y)| PathElement::new([(x, y), (x + 16, y)], RED));
    }
    c.configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(err)?;
    root.present().map_err(err)?;
    Ok(())
}

/// Planar subsystems get an `x0`-`x1` plane plot; scalar ones `x0` over time.
fn state_plot(table: &CsvTable, series: &[Series], path: &Path) -> Result<()> {
    let planar = series.iter().all(|s| s.states.len() >= 2);
    let t = thinned(table, "t");
    let curves: Vec<(Vec<f64>, Vec<f64>)> = series
        .iter()
        .map(|s| {
            let x0 = thinned(table, &s.states[0]);
            if planar {
                (x0, thinned(table, &s.states[1]))
            } else {
                (t.clone(), x0)
            }
        })
        .collect();
    let root = SVGBackend::new(path, SIZE).into_drawing_area();
    let (xd, yd) = if planar { ("x0", "x1") } else { ("t [s]", "x0") };
    let mut c = chart(
        &root,
        "state trajectories",
        range(curves.iter().flat_map(|c| &c.0)),
        range(curves.iter().flat_map(|c| &c.1)),
        xd,
        yd,
    )?;
    let err = |e| anyhow!("{e}");
    for (k, (s, (xs, ys))) in series.iter().zip(&curves).enumerate() {
        let color = Palette99::pick(k).to_rgba();
        c.draw_series(LineSeries::new(xs.iter().copied().zip(ys.iter().copied()), color.stroke_width(2)))
            .map_err(err)?
            .label(s.id.to_string())
            .legend(move |(x, y)| PathElement::new([(x, y), (x + 16, y)], color));
        if planar {
            if let (Some(&x), Some(&y)) = (xs.first(), ys.first()) {
                c.draw_series([Circle::new((x, y), 4, color.filled())]).map_err(err)?;
            }
            if let (Some(&x), Some(&y)) = (xs.last(), ys.last()) {
                c.draw_series([Cross::new((x, y), 5, color.stroke_width(2))]).map_err(err)?;
            }
        }
    }
    c.configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(err)?;
    root.present().map_err(err)?;
    Ok(())
}

fn gnuplot_script(table: &CsvTable, csv: &Path, series: &[Series]) -> String {
    let col = |name: &str| table.headers().iter().position(|h| h == name).map_or(0, |k| k + 1);
    let csv = csv.display();
    let mut s = String::new();
    let _ = writeln!(s, "# gnuplot plot.gp");
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set terminal svg size {},{}", SIZE.0, SIZE.1);
    let _ = writeln!(s, "set key outside");
    for sub in series {
        let id = sub.id;
        let _ = writeln!(s, "\nset output 'funnel_{id}.gp.svg'");
        let _ = writeln!(s, "set xlabel 't [s]'; set ylabel 'rho'");
        let _ = writeln!(
            s,
            "plot '{csv}' skip 1 using 1:{} with lines lw 2 title 'rho', \\\n     '' skip 1 using 1:{} with lines dt 2 lc 'red' title 'lower', \\\n     '' skip 1 using 1:{} with lines dt 2 lc 'red' title 'upper'",
            col(&format!("{id}.rho")),
            col(&format!("{id}.lower")),
            col(&format!("{id}.upper"))
        );
    }
    if !series.is_empty() {
        let planar = series.iter().all(|s| s.states.len() >= 2);
        let _ = writeln!(s, "\nset output 'states.gp.svg'");
        let parts: Vec<String> = series
            .iter()
            .map(|sub| {
                let (x, y) = if planar {
                    (col(&sub.states[0]), col(&sub.states[1]))
                } else {
                    (1, col(&sub.states[0]))
                };
                format!("'{csv}' skip 1 using {x}:{y} with lines lw 2 title '{}'", sub.id)
            })
            .collect();
        let (xl, yl) = if planar { ("x0", "x1") } else { ("t [s]", "x0") };
        let _ = writeln!(s, "set xlabel '{xl}'; set ylabel '{yl}'");
        let _ = writeln!(s, "plot {}", parts.join(", \\\n     "));
    }
    s
}

/// Writes `funnel_<id>.svg`, `states.svg` and `plot.gp`; returns the file count.
pub fn write_all(table: &CsvTable, csv: &Path, out: &Path, sel: &Selection) -> Result<usize> {
    if table.rows() == 0 {
        log::warn!("{} has no rows; plots will be empty", csv.display());
    }
    let series = select(subsystems(table), sel);
    if series.is_empty() {
        log::warn!("no subsystem columns selected in {}", csv.display());
    }
    let mut written = 0;
    for s in &series {
        funnel_plot(table, s, &out.join(format!("funnel_{}.svg", s.id)))?;
        written += 1;
    }
    let with_states: Vec<Series> = series.into_iter().filter(|s| !s.states.is_empty()).collect();
    state_plot(table, &with_states, &out.join("states.svg"))?;
    let script = gnuplot_script(table, &csv.canonicalize().unwrap_or(csv.to_path_buf()), &with_states);
    fs::write(out.join("plot.gp"), script)?;
    Ok(written + 2)
}
