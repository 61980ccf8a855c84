//! Plot data and static SVG line charts for a finished run.
//!
//! Three chart families, each with a tidy CSV next to it:
//! loss curves, identified-parameter evolution inside the bound band, and
//! predicted against true force per muscle.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::dynamics::Trial;
use crate::error::{Error, Result};
use crate::network::{self, Checkpoint};
use crate::train::{self, EpochRecord, Split};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const MARGIN: [f64; 4] = [60.0, 20.0, 40.0, 70.0]; // top, right, bottom, left
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub dashed: bool,
}

/// A shaded horizontal band, drawn behind the series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LineChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_y: bool,
    pub series: Vec<Series>,
    pub band: Option<Band>,
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let r = raw / mag;
    let k = if r < 1.5 {
        1.0
    } else if r < 3.0 {
        2.0
    } else if r < 7.0 {
        5.0
    } else {
        10.0
    };
    k * mag
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if !(1e-3..1e5).contains(&a) {
        format!("{v:.0e}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl LineChart {
    fn ranges(&self) -> Option<([f64; 2], [f64; 2])> {
        let tr = |y: f64| if self.log_y { y.log10() } else { y };
        let mut xr = [f64::INFINITY, f64::NEG_INFINITY];
        let mut yr = xr;
        for s in &self.series {
            for (&x, &y) in s.x.iter().zip(&s.y) {
                let y = tr(y);
                if x.is_finite() && y.is_finite() {
                    xr = [xr[0].min(x), xr[1].max(x)];
                    yr = [yr[0].min(y), yr[1].max(y)];
                }
            }
        }
        if let Some(b) = self.band {
            yr = [yr[0].min(tr(b.lo)), yr[1].max(tr(b.hi))];
        }
        if !xr[0].is_finite() || !yr[0].is_finite() {
            return None;
        }
        for r in [&mut xr, &mut yr] {
            if r[1] - r[0] <= f64::EPSILON * r[0].abs().max(1.0) {
                r[0] -= 0.5;
                r[1] += 0.5;
            }
        }
        let pad = 0.05 * (yr[1] - yr[0]);
        Some((xr, [yr[0] - pad, yr[1] + pad]))
    }

    pub fn to_svg(&self) -> String {
        let mut out = String::new();
        let [top, right, bottom, left] = MARGIN;
        let (pw, ph) = (WIDTH - left - right, HEIGHT - top - bottom);
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
            WIDTH / 2.0,
            escape(&self.title)
        );
        let Some((xr, yr)) = self.ranges() else {
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{}" text-anchor="middle">no data</text></svg>"#,
                WIDTH / 2.0,
                HEIGHT / 2.0
            );
            return out;
        };
        let tr = |y: f64| if self.log_y { y.log10() } else { y };
        let px = |x: f64| left + (x - xr[0]) / (xr[1] - xr[0]) * pw;
        let py = |y: f64| top + (1.0 - (y - yr[0]) / (yr[1] - yr[0])) * ph;

        if let Some(b) = self.band {
            let (y0, y1) = (py(tr(b.hi)), py(tr(b.lo)));
            let _ = writeln!(
                out,
                r##"<rect x="{left:.2}" y="{y0:.2}" width="{pw:.2}" height="{:.2}" fill="#dddddd" fill-opacity="0.6"/>"##,
                y1 - y0
            );
        }

        // Axes and ticks.
        let _ = writeln!(
            out,
            r#"<rect x="{left:.2}" y="{top:.2}" width="{pw:.2}" height="{ph:.2}" fill="none" stroke="black"/>"#
        );
        let xs = nice_step(xr[1] - xr[0]);
        let mut t = (xr[0] / xs).ceil() * xs;
        while t <= xr[1] + 1e-9 * xs {
            let x = px(t);
            let _ = writeln!(
                out,
                r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                top + ph,
                top + ph + 5.0,
                top + ph + 18.0,
                fmt_tick(t)
            );
            t += xs;
        }
        let ys = if self.log_y {
            (yr[1] - yr[0]).div_euclid(5.0).max(1.0)
        } else {
            nice_step(yr[1] - yr[0])
        };
        let mut t = (yr[0] / ys).ceil() * ys;
        while t <= yr[1] + 1e-9 * ys {
            let y = py(t);
            let label = if self.log_y {
                fmt_tick(10f64.powf(t))
            } else {
                fmt_tick(t)
            };
            let _ = writeln!(
                out,
                r##"<line x1="{:.2}" y1="{y:.2}" x2="{left:.2}" y2="{y:.2}" stroke="black"/><line x1="{left:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#eeeeee"/><text x="{:.2}" y="{:.2}" text-anchor="end">{label}</text>"##,
                left - 5.0,
                left + pw,
                left - 8.0,
                y + 4.0
            );
            t += ys;
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            left + pw / 2.0,
            HEIGHT - 6.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            out,
            r#"<text transform="translate(16 {:.2}) rotate(-90)" text-anchor="middle">{}</text>"#,
            top + ph / 2.0,
            escape(&self.y_label)
        );

        for (i, s) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let mut d = String::new();
            let mut pen_up = true;
            for (&x, &y) in s.x.iter().zip(&s.y) {
                let y = tr(y);
                if !(x.is_finite() && y.is_finite()) {
                    pen_up = true;
                    continue;
                }
                let _ = write!(d, "{}{:.2} {:.2} ", if pen_up { "M" } else { "L" }, px(x), py(y));
                pen_up = false;
            }
            let dash = if s.dashed { r#" stroke-dasharray="6 4""# } else { "" };
            let _ = writeln!(
                out,
                r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#,
                d.trim_end()
            );
            let ly = top + 14.0 + 16.0 * i as f64;
            let lx = left + pw - 150.0;
            let _ = writeln!(
                out,
                r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"{dash}/><text x="{:.2}" y="{:.2}">{}</text>"#,
                lx + 24.0,
                lx + 30.0,
                ly + 4.0,
                escape(&s.name)
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

/// Files written by [`render_run`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PlotFiles {
    pub csv: Vec<PathBuf>,
    pub svg: Vec<PathBuf>,
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn require(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::MissingArtifact(path.to_path_buf()))
    }
}

/// Loss components per epoch; the log axis skips nonpositive values.
pub fn loss_chart(log: &[EpochRecord]) -> LineChart {
    let x: Vec<f64> = log.iter().map(|r| r.epoch as f64).collect();
    let pick = |f: fn(&EpochRecord) -> f64| log.iter().map(f).collect::<Vec<_>>();
    let series = [
        ("L_total", pick(|r| r.losses.l_total)),
        ("L_q", pick(|r| r.losses.l_q)),
        ("L_fd", pick(|r| r.losses.l_fd)),
        ("L_F", pick(|r| r.losses.l_f)),
    ]
    .into_iter()
    .map(|(name, y)| Series {
        name: name.into(),
        x: x.clone(),
        y: y.into_iter().map(|v| if v > 0.0 { v } else { f64::NAN }).collect(),
        dashed: false,
    })
    .collect();
    LineChart {
        title: "Training loss".into(),
        x_label: "epoch".into(),
        y_label: "loss (weighted)".into(),
        log_y: true,
        series,
        band: None,
    }
}

/// Bound band, initial value and estimate of one identified parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamTrack {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub truth: Option<f64>,
}

pub fn param_chart(log: &[EpochRecord], idx: usize, track: &ParamTrack) -> LineChart {
    let x: Vec<f64> = log.iter().map(|r| r.epoch as f64).collect();
    let mut series = vec![Series {
        name: "estimate".into(),
        x: x.clone(),
        y: log.iter().map(|r| r.params[idx]).collect(),
        dashed: false,
    }];
    if let Some(t) = track.truth {
        series.push(Series {
            name: "truth".into(),
            y: vec![t; x.len()],
            x,
            dashed: true,
        });
    }
    LineChart {
        title: format!("{} (bounds shaded)", track.name),
        x_label: "epoch".into(),
        y_label: track.name.clone(),
        log_y: false,
        series,
        band: Some(Band {
            lo: track.lower,
            hi: track.upper,
        }),
    }
}

pub(crate) fn read_tracks(path: &Path) -> Result<Vec<ParamTrack>> {
    require(path)?;
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.deserialize::<IdentifiedRow>() {
        let rec = rec?;
        out.push(ParamTrack {
            name: rec.param,
            lower: rec.lower,
            upper: rec.upper,
            truth: rec.truth,
        });
    }
    Ok(out)
}

#[derive(serde::Deserialize)]
struct IdentifiedRow {
    param: String,
    lower: f64,
    upper: f64,
    truth: Option<f64>,
}

/// Predicted and true force time series of one trial, tagged by split set.
pub struct ForceTrace {
    pub trial: String,
    pub time: Vec<f64>,
    pub set: Vec<&'static str>,
    pub predicted: Vec<Vec<f64>>,
    pub truth: Option<Vec<Vec<f64>>>,
}

pub fn force_trace(ck: &Checkpoint, trial: &Trial, trial_idx: usize, split: &Split) -> Result<ForceTrace> {
    let n = trial.len();
    let span = trial.duration().max(f64::MIN_POSITIVE);
    let mut x = Vec::with_capacity(n * (trial.n_muscles() + 1));
    for k in 0..n {
        x.extend(trial.emg.iter().map(|c| c[k]));
        x.push((trial.time[k] - trial.time[0]) / span);
    }
    let x = crate::autodiff::Array::new(n, trial.n_muscles() + 1, x);
    let (_, predicted) = network::predict(&ck.params, &x)?;
    let mut set = vec![""; n];
    for (label, segs) in [("train", &split.train), ("test", &split.test)] {
        for s in segs.iter().filter(|s| s.trial == trial_idx) {
            for v in &mut set[s.start..s.end.min(n)] {
                *v = label;
            }
        }
    }
    Ok(ForceTrace {
        trial: trial.meta.get("name").cloned().unwrap_or_else(|| format!("trial{trial_idx}")),
        time: trial.time.clone(),
        set,
        predicted,
        truth: trial.forces.clone(),
    })
}

pub fn force_chart(trace: &ForceTrace, muscle: usize, name: &str) -> LineChart {
    let mut series = vec![Series {
        name: "predicted".into(),
        x: trace.time.clone(),
        y: trace.predicted[muscle].clone(),
        dashed: false,
    }];
    if let Some(t) = &trace.truth {
        series.push(Series {
            name: "truth".into(),
            x: trace.time.clone(),
            y: t[muscle].clone(),
            dashed: true,
        });
    }
    LineChart {
        title: format!("{name} force, trial {}", trace.trial),
        x_label: "time (s)".into(),
        y_label: "force (N)".into(),
        log_y: false,
        series,
        band: None,
    }
}

/// Renders all three chart families for a run directory into
/// `<run>/plots`. `trials` are the run's trials, in split order.
pub fn render_run(run_dir: &Path, trials: &[Trial]) -> Result<PlotFiles> {
    let art = train::RunArtifacts::in_dir(run_dir);
    for p in [&art.training_log, &art.identified, &art.checkpoint, &art.split] {
        require(p)?;
    }
    let (param_names, log) = train::read_training_log(&art.training_log)?;
    let tracks = read_tracks(&art.identified)?;
    if tracks.iter().map(|t| &t.name).ne(param_names.iter()) {
        return Err(Error::schema(
            art.identified.display().to_string(),
            "parameters do not match the training log columns",
        ));
    }
    let ck = Checkpoint::load(&art.checkpoint)?;
    let split = train::load_split(&art.split)?;
    let dir = run_dir.join("plots");
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut files = PlotFiles::default();

    // Loss curves.
    let mut csv = String::from("epoch,series,value\n");
    for r in &log {
        for (name, v) in [
            ("l_q", r.losses.l_q),
            ("l_fd", r.losses.l_fd),
            ("l_f", r.losses.l_f),
            ("l_total", r.losses.l_total),
        ] {
            let _ = writeln!(csv, "{},{name},{v}", r.epoch);
        }
    }
    let p = dir.join("loss_curves.csv");
    write(&p, &csv)?;
    files.csv.push(p);
    let p = dir.join("loss_curves.svg");
    write(&p, &loss_chart(&log).to_svg())?;
    files.svg.push(p);

    // Parameter evolution.
    let mut csv = String::from("epoch,param,value,lower,upper,truth\n");
    for r in &log {
        for (t, v) in tracks.iter().zip(&r.params) {
            let truth = t.truth.map(|x| x.to_string()).unwrap_or_default();
            let _ = writeln!(csv, "{},{},{v},{},{},{truth}", r.epoch, t.name, t.lower, t.upper);
        }
    }
    let p = dir.join("param_evolution.csv");
    write(&p, &csv)?;
    files.csv.push(p);
    for (i, t) in tracks.iter().enumerate() {
        let p = dir.join(format!("param_{}.svg", t.name));
        write(&p, &param_chart(&log, i, t).to_svg())?;
        files.svg.push(p);
    }

    // Force overlays, one trial at a time.
    let names = &ck.info.muscle_names;
    let mut csv = String::from("trial,t,set,muscle,predicted,truth\n");
    for (ti, trial) in trials.iter().enumerate() {
        if trial.n_muscles() != names.len() {
            return Err(Error::Shape {
                op: "plot forces",
                lhs: (trial.n_muscles(), 1),
                rhs: (names.len(), 1),
            });
        }
        let trace = force_trace(&ck, trial, ti, &split)?;
        for (m, name) in names.iter().enumerate() {
            for k in 0..trace.time.len() {
                let truth = trace
                    .truth
                    .as_ref()
                    .map(|f| f[m][k].to_string())
                    .unwrap_or_default();
                let _ = writeln!(
                    csv,
                    "{},{},{},{name},{},{truth}",
                    trace.trial, trace.time[k], trace.set[k], trace.predicted[m][k]
                );
            }
            let p = dir.join(format!("force_{}_{name}.svg", trace.trial));
            write(&p, &force_chart(&trace, m, name).to_svg())?;
            files.svg.push(p);
        }
    }
    let p = dir.join("force_overlay.csv");
    write(&p, &csv)?;
    files.csv.push(p);
    Ok(files)
}
