//! Number formatting, tables and atomic file output.

use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use roving::analysis::{WaitClass, WaitReport};
use roving::sim::{Comparison, SimEstimate, SimStat};
use roving::transforms::Moments;
use serde_json::Value;

const DIGITS: usize = 12;

/// Rounds to 12 significant digits.
pub fn round(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", DIGITS - 1, x).parse().unwrap_or(x)
}

/// Formats with at most 12 significant digits, switching to scientific
/// notation for very small or large magnitudes.
pub fn fmt(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let r = round(x);
    if r == 0.0 {
        return "0".into();
    }
    let exp = r.abs().log10().floor() as i32;
    if (-5..15).contains(&exp) {
        format!("{r}")
    } else {
        let s = format!("{:.*e}", DIGITS - 1, r);
        let (mantissa, e) = s.split_once('e').expect("scientific format");
        let mantissa = mantissa.trim_end_matches('0').trim_end_matches('.');
        format!("{mantissa}e{e}")
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt).unwrap_or_default()
}

/// Rounds every float in `v` to 12 significant digits, except inside the
/// `model` section, which must survive a round trip exactly.
pub fn round_json(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(x) = n.as_f64().and_then(|x| serde_json::Number::from_f64(round(x))) {
                *n = x;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_json),
        Value::Object(map) => {
            for (k, item) in map.iter_mut() {
                if k != "model" {
                    round_json(item);
                }
            }
        }
        _ => {}
    }
}

/// Writes through a temporary file in the target directory and renames it
/// into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("cannot create a temporary file in {}", dir.display()))?;
    tmp.write_all(contents)?;
    tmp.flush()?;
    tmp.persist(path)
        .with_context(|| format!("cannot write {}", path.display()))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

pub fn write_json(path: &Path, mut v: Value) -> Result<()> {
    round_json(&mut v);
    let mut text = serde_json::to_string_pretty(&v)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn csv(header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn moments_row(queue: usize, class: &str, m: &Moments) -> Vec<String> {
    vec![
        queue.to_string(),
        class.to_string(),
        fmt(m.mean()),
        opt(m.sd),
        opt(m.get(2)),
        opt(m.get(3)),
    ]
}

const CLASSES: [WaitClass; 3] = [WaitClass::Internal, WaitClass::External, WaitClass::Arbitrary];

pub fn moments_csv(report: &WaitReport) -> String {
    let mut rows = Vec::new();
    for q in &report.queues {
        for class in CLASSES {
            if let Some(m) = q.class(class) {
                rows.push(moments_row(q.queue, class.name(), m));
            }
        }
        rows.push(moments_row(q.queue, "cycle", &q.cycle));
    }
    csv(&["queue", "class", "mean", "sd", "m2", "m3"], rows)
}

pub fn lst_csv(report: &WaitReport) -> String {
    let rows = report
        .queues
        .iter()
        .flat_map(|q| {
            q.lst.iter().map(move |s| {
                vec![
                    q.queue.to_string(),
                    fmt(s.omega),
                    opt(s.internal),
                    opt(s.external),
                    opt(s.arbitrary),
                    fmt(s.cycle),
                    opt(s.cycle_little),
                ]
            })
        })
        .collect();
    csv(
        &["queue", "omega", "internal", "external", "arbitrary", "cycle", "cycle_little"],
        rows,
    )
}

/// One block of mean and sd rows per load, for load sweeps.
pub fn sweep_csv(points: &[(f64, WaitReport)]) -> String {
    let mut rows = Vec::new();
    for (rho, report) in points {
        for q in &report.queues {
            let classes = CLASSES
                .iter()
                .filter_map(|c| q.class(*c).map(|m| (c.name(), m)))
                .chain(std::iter::once(("cycle", &q.cycle)));
            for (name, m) in classes {
                rows.push(vec![fmt(*rho), q.queue.to_string(), name.to_string(), fmt(m.mean()), opt(m.sd)]);
            }
        }
    }
    csv(&["rho", "queue", "class", "mean", "sd"], rows)
}

pub fn simulation_csv(est: &SimEstimate) -> String {
    let mut rows = Vec::new();
    for q in &est.queues {
        let stats: [(&str, Option<&SimStat>); 6] = [
            ("internal", q.internal.as_ref()),
            ("external", q.external.as_ref()),
            ("arbitrary", q.arbitrary.as_ref()),
            ("cycle", q.cycle.as_ref()),
            ("queue_length", q.queue_length.as_ref()),
            ("service_rate", q.service_rate.as_ref()),
        ];
        for (name, s) in stats {
            if let Some(s) = s {
                rows.push(vec![
                    q.queue.to_string(),
                    name.to_string(),
                    fmt(s.mean),
                    opt(s.sd),
                    fmt(s.ci_half),
                    opt(s.sd_ci_half),
                    s.observations.to_string(),
                ]);
            }
        }
    }
    csv(
        &["queue", "class", "mean", "sd", "ci_half", "sd_ci_half", "count"],
        rows,
    )
}

pub fn comparison_csv(cmp: &Comparison) -> String {
    let rows = cmp
        .rows
        .iter()
        .map(|r| {
            vec![
                r.queue.to_string(),
                r.class.name().to_string(),
                fmt(r.mean),
                opt(r.sd),
                opt(r.m2),
                opt(r.m3),
                fmt(r.sim_mean),
                fmt(r.ci_half),
                fmt(r.z),
                opt(r.sim_sd),
                opt(r.sd_ci_half),
                opt(r.z_sd),
            ]
        })
        .collect();
    csv(
        &[
            "queue", "class", "mean", "sd", "m2", "m3", "sim_mean", "ci_half", "z", "sim_sd",
            "sd_ci_half", "z_sd",
        ],
        rows,
    )
}
