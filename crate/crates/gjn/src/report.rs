//! Report emission: aligned text tables, CSV files, SVG histograms, and the
//! full-precision persistence of raw simulation estimates.
//!
//! Report CSVs use 6 significant digits. The raw-estimate file keeps full
//! precision (shortest round-tripping decimal per value), so reloading it
//! and re-rendering the reports is byte-identical to rendering them from
//! the original in-memory estimate.

use std::fmt::Write as _;
use std::path::Path;

use crate::approx::{ApproxModel, PmfConvention};
use crate::sim::{SimConfig, SimEstimate, StationEstimate};
use crate::{Error, Result};

/// Format with 6 significant digits, the report-CSV convention.
pub fn sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

/// means.csv: one row per station with the analysis constants and, when a
/// simulation ran, the batch-means estimate.
pub fn write_means_csv(
    path: &Path,
    label: &str,
    model: &ApproxModel,
    estimate: Option<&SimEstimate>,
) -> Result<()> {
    let mut out = String::new();
    out.push_str("case,station,lambda,rho,sigma2,d,exp_mean,sim_mean,sim_ci95\n");
    for j in 0..model.num_stations() {
        let (sim_mean, sim_ci) = match estimate {
            Some(est) => (
                sig6(est.stations[j].mean),
                sig6(est.stations[j].ci_halfwidth),
            ),
            None => (String::new(), String::new()),
        };
        writeln!(
            out,
            "{label},{},{},{},{},{},{},{sim_mean},{sim_ci}",
            j + 1,
            sig6(model.traffic.lambda[j]),
            sig6(model.traffic.rho[j]),
            sig6(model.sigma2[j]),
            sig6(model.d[j]),
            sig6(model.mean_queue(j)),
        )
        .unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// quantiles.csv: one row per (station, level).
pub fn write_quantiles_csv(
    path: &Path,
    label: &str,
    model: &ApproxModel,
    estimate: Option<&SimEstimate>,
    levels: &[f64],
) -> Result<()> {
    let mut out = String::new();
    out.push_str("case,station,level,exp_quantile,sim_quantile\n");
    for j in 0..model.num_stations() {
        for &q in levels {
            let sim = match estimate {
                Some(est) => est.empirical_quantile(j, q).to_string(),
                None => String::new(),
            };
            writeln!(
                out,
                "{label},{},{},{},{sim}",
                j + 1,
                sig6(q),
                sig6(model.quantile(j, q)),
            )
            .unwrap();
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// pmf.csv: approximation pmf next to the simulated time fractions.
pub fn write_pmf_csv(
    path: &Path,
    label: &str,
    model: &ApproxModel,
    estimate: Option<&SimEstimate>,
    convention: PmfConvention,
    k_max: usize,
) -> Result<()> {
    let mut out = String::new();
    out.push_str("case,station,k,exp_pmf,sim_pmf,sim_se\n");
    for j in 0..model.num_stations() {
        for k in 0..=k_max {
            let (sim, se) = match estimate {
                Some(est) if k < est.stations[j].pmf.len() => (
                    sig6(est.stations[j].pmf[k]),
                    sig6(est.pmf_std_err(j, k)),
                ),
                _ => (String::new(), String::new()),
            };
            writeln!(
                out,
                "{label},{},{k},{},{sim},{se}",
                j + 1,
                sig6(model.pmf(j, k as u64, convention)),
            )
            .unwrap();
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// joint.csv: time-weighted product-vs-joint occupancy comparison.
pub fn write_joint_csv(path: &Path, cells: &[Vec<crate::stats::JointCell>]) -> Result<()> {
    let mut out = String::new();
    out.push_str("k1,k2,product,joint\n");
    for (k0, row) in cells.iter().enumerate() {
        for (k1, cell) in row.iter().enumerate() {
            writeln!(out, "{k0},{k1},{},{}", sig6(cell.product), sig6(cell.joint)).unwrap();
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// The aligned text report for one case.
pub fn render_report(
    label: &str,
    model: &ApproxModel,
    estimate: Option<&SimEstimate>,
    levels: &[f64],
) -> String {
    let n = model.num_stations();
    let mut out = String::new();
    writeln!(out, "case {label}").unwrap();
    writeln!(out, "{}", "-".repeat(60)).unwrap();
    writeln!(out, "station   lambda      rho       sigma^2   d").unwrap();
    for j in 0..n {
        writeln!(
            out,
            "{:<9} {:<11} {:<9} {:<9} {:.6}",
            j + 1,
            format!("{:.6}", model.traffic.lambda[j]),
            format!("{:.4}", model.traffic.rho[j]),
            format!("{:.5}", model.sigma2[j]),
            model.d[j],
        )
        .unwrap();
    }
    writeln!(out).unwrap();
    writeln!(out, "w matrix:").unwrap();
    for row in &model.w.w {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
        writeln!(out, "  [{}]", cells.join(", ")).unwrap();
    }
    writeln!(out).unwrap();
    match estimate {
        Some(est) => {
            writeln!(out, "means (Sim +- CI95 / Exp):").unwrap();
            for j in 0..n {
                writeln!(
                    out,
                    "  station {}: {:.2} +- {:.2}  /  {:.2}",
                    j + 1,
                    est.stations[j].mean,
                    est.stations[j].ci_halfwidth,
                    model.mean_queue(j),
                )
                .unwrap();
            }
        }
        None => {
            writeln!(out, "means (Exp):").unwrap();
            for j in 0..n {
                writeln!(out, "  station {}: {:.2}", j + 1, model.mean_queue(j)).unwrap();
            }
        }
    }
    writeln!(out).unwrap();
    writeln!(out, "quantiles, Sim(Exp):").unwrap();
    let header: Vec<String> = levels.iter().map(|q| format!("{:.0}%", q * 100.0)).collect();
    writeln!(out, "  station   {}", header.join("        ")).unwrap();
    for j in 0..n {
        let cells: Vec<String> = levels
            .iter()
            .map(|&q| {
                let exp = model.quantile(j, q);
                match estimate {
                    Some(est) => format!("{}({exp:.2})", est.empirical_quantile(j, q)),
                    None => format!("-({exp:.2})"),
                }
            })
            .collect();
        writeln!(out, "  {:<9} {}", j + 1, cells.join("  ")).unwrap();
    }
    out
}

/// Histogram overlay: simulated time fractions as bars with 95% batch-CI
/// whiskers, approximation pmf as a dot-and-stem series.
pub fn histogram_svg(
    station_label: &str,
    st: &StationEstimate,
    est: &SimEstimate,
    station: usize,
    approx_pmf: &[f64],
    k_show: usize,
) -> String {
    let width = 900.0;
    let height = 480.0;
    let (ml, mr, mt, mb) = (70.0, 20.0, 40.0, 50.0);
    let plot_w = width - ml - mr;
    let plot_h = height - mt - mb;
    let k_show = k_show.min(st.pmf.len() - 1);
    let t_mult = crate::special::student_t_quantile(0.975, (st.batch_pmfs.len() - 1) as f64);

    let mut ymax = 0.0f64;
    for k in 0..=k_show {
        ymax = ymax.max(st.pmf[k] + t_mult * est.pmf_std_err(station, k));
        ymax = ymax.max(approx_pmf.get(k).copied().unwrap_or(0.0));
    }
    ymax = (ymax * 1.08).max(1e-12);

    let x = |k: f64| ml + plot_w * (k + 0.5) / (k_show as f64 + 1.0);
    let y = |p: f64| mt + plot_h * (1.0 - (p / ymax).min(1.0));
    let bar_w = (plot_w / (k_show as f64 + 1.0) * 0.8).max(1.0);

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    )
    .unwrap();
    writeln!(svg, r#"<rect width="{width}" height="{height}" fill="white"/>"#).unwrap();
    writeln!(
        svg,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{station_label}</text>"#,
        width / 2.0
    )
    .unwrap();
    // axes
    writeln!(
        svg,
        r#"<line x1="{ml}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        mt + plot_h,
        ml + plot_w,
        mt + plot_h
    )
    .unwrap();
    writeln!(
        svg,
        r#"<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{}" stroke="black"/>"#,
        mt + plot_h
    )
    .unwrap();
    // y ticks
    for i in 0..=4 {
        let p = ymax * i as f64 / 4.0;
        let yy = y(p);
        writeln!(
            svg,
            r#"<line x1="{}" y1="{yy}" x2="{ml}" y2="{yy}" stroke="black"/>"#,
            ml - 5.0
        )
        .unwrap();
        writeln!(
            svg,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>"#,
            ml - 8.0,
            yy + 4.0,
            sig6(p)
        )
        .unwrap();
    }
    // x ticks (about 10 labels)
    let step = (k_show / 10).max(1);
    for k in (0..=k_show).step_by(step) {
        let xx = x(k as f64);
        writeln!(
            svg,
            r#"<line x1="{xx}" y1="{}" x2="{xx}" y2="{}" stroke="black"/>"#,
            mt + plot_h,
            mt + plot_h + 5.0
        )
        .unwrap();
        writeln!(
            svg,
            r#"<text x="{xx}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{k}</text>"#,
            mt + plot_h + 18.0
        )
        .unwrap();
    }
    writeln!(
        svg,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="13" text-anchor="middle">queue length</text>"#,
        ml + plot_w / 2.0,
        height - 12.0
    )
    .unwrap();
    // bars + whiskers
    for k in 0..=k_show {
        let p = st.pmf[k];
        let xx = x(k as f64);
        writeln!(
            svg,
            r##"<rect x="{}" y="{}" width="{bar_w}" height="{}" fill="#9ecae1" stroke="#4292c6" stroke-width="0.5"/>"##,
            xx - bar_w / 2.0,
            y(p),
            (mt + plot_h - y(p)).max(0.0)
        )
        .unwrap();
        let se = est.pmf_std_err(station, k);
        let (lo, hi) = (p - t_mult * se, p + t_mult * se);
        writeln!(
            svg,
            r##"<line x1="{xx}" y1="{}" x2="{xx}" y2="{}" stroke="#08306b" stroke-width="1.2"/>"##,
            y(hi),
            y(lo.max(0.0))
        )
        .unwrap();
    }
    // approximation series
    for (k, &p) in approx_pmf.iter().take(k_show + 1).enumerate() {
        let xx = x(k as f64);
        writeln!(
            svg,
            r##"<circle cx="{xx}" cy="{}" r="2.5" fill="#d62728"/>"##,
            y(p)
        )
        .unwrap();
    }
    // legend
    writeln!(
        svg,
        r##"<rect x="{}" y="{mt}" width="12" height="12" fill="#9ecae1" stroke="#4292c6"/>"##,
        ml + plot_w - 150.0
    )
    .unwrap();
    writeln!(
        svg,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12">Sim (95% CI)</text>"#,
        ml + plot_w - 133.0,
        mt + 10.0
    )
    .unwrap();
    writeln!(
        svg,
        r##"<circle cx="{}" cy="{}" r="2.5" fill="#d62728"/>"##,
        ml + plot_w - 144.0,
        mt + 26.0
    )
    .unwrap();
    writeln!(
        svg,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12">Exp</text>"#,
        ml + plot_w - 133.0,
        mt + 30.0
    )
    .unwrap();
    svg.push_str("</svg>\n");
    svg
}

/// Approximation-only histogram (no simulation series).
pub fn approx_histogram_svg(title: &str, approx_pmf: &[f64]) -> String {
    let width = 900.0;
    let height = 480.0;
    let (ml, mr, mt, mb) = (70.0, 20.0, 40.0, 50.0);
    let plot_w = width - ml - mr;
    let plot_h = height - mt - mb;
    let k_show = approx_pmf.len().saturating_sub(1);
    let ymax = (approx_pmf.iter().copied().fold(0.0f64, f64::max) * 1.08).max(1e-12);
    let x = |k: f64| ml + plot_w * (k + 0.5) / (k_show as f64 + 1.0);
    let y = |p: f64| mt + plot_h * (1.0 - (p / ymax).min(1.0));
    let bar_w = (plot_w / (k_show as f64 + 1.0) * 0.8).max(1.0);

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    )
    .unwrap();
    writeln!(svg, r#"<rect width="{width}" height="{height}" fill="white"/>"#).unwrap();
    writeln!(
        svg,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{title}</text>"#,
        width / 2.0
    )
    .unwrap();
    writeln!(
        svg,
        r#"<line x1="{ml}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        mt + plot_h,
        ml + plot_w,
        mt + plot_h
    )
    .unwrap();
    writeln!(
        svg,
        r#"<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{}" stroke="black"/>"#,
        mt + plot_h
    )
    .unwrap();
    let step = (k_show / 10).max(1);
    for k in (0..=k_show).step_by(step) {
        writeln!(
            svg,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{k}</text>"#,
            x(k as f64),
            mt + plot_h + 18.0
        )
        .unwrap();
    }
    for (k, &p) in approx_pmf.iter().enumerate() {
        writeln!(
            svg,
            r##"<rect x="{}" y="{}" width="{bar_w}" height="{}" fill="#fcae91" stroke="#d62728" stroke-width="0.5"/>"##,
            x(k as f64) - bar_w / 2.0,
            y(p),
            (mt + plot_h - y(p)).max(0.0)
        )
        .unwrap();
    }
    svg.push_str("</svg>\n");
    svg
}

// ---------------------------------------------------------------------------
// Raw-estimate persistence
// ---------------------------------------------------------------------------

/// Serialize a full `SimEstimate` to a CSV of `(record, i, j, value)` rows
/// at full precision.
pub fn save_estimate(path: &Path, est: &SimEstimate) -> Result<()> {
    let mut out = String::new();
    out.push_str("record,i,j,value\n");
    let cfg = &est.config;
    writeln!(out, "horizon,,,{}", cfg.horizon).unwrap();
    writeln!(out, "warmup_fraction,,,{}", cfg.warmup_fraction).unwrap();
    writeln!(out, "num_batches,,,{}", cfg.num_batches).unwrap();
    writeln!(out, "seed,,,{}", cfg.seed).unwrap();
    writeln!(out, "pmf_cap,,,{}", cfg.pmf_cap).unwrap();
    if let Some(iv) = cfg.joint_interval {
        writeln!(out, "joint_interval,,,{iv}").unwrap();
    }
    writeln!(out, "window,,,{}", est.window).unwrap();
    writeln!(out, "num_stations,,,{}", est.stations.len()).unwrap();
    for (j, st) in est.stations.iter().enumerate() {
        writeln!(out, "mean,{j},,{}", st.mean).unwrap();
        writeln!(out, "ci_halfwidth,{j},,{}", st.ci_halfwidth).unwrap();
        writeln!(out, "overflow,{j},,{}", st.overflow).unwrap();
        writeln!(out, "overflow_mean_contrib,{j},,{}", st.overflow_mean_contrib).unwrap();
        for (k, v) in st.pmf.iter().enumerate() {
            writeln!(out, "pmf,{j},{k},{v}").unwrap();
        }
        for (b, v) in st.batch_means.iter().enumerate() {
            writeln!(out, "batch_mean,{j},{b},{v}").unwrap();
        }
        for (b, row) in st.batch_pmfs.iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                writeln!(out, "batch_pmf_{b},{j},{k},{v}").unwrap();
            }
        }
    }
    if let Some(joint) = &est.joint_time {
        for (a, row) in joint.iter().enumerate() {
            for (b, v) in row.iter().enumerate() {
                if *v != 0.0 {
                    writeln!(out, "joint_time,{a},{b},{v}").unwrap();
                }
            }
        }
    }
    for (i, point) in est.representative_points.iter().enumerate() {
        for (j, z) in point.iter().enumerate() {
            writeln!(out, "rep_point,{i},{j},{z}").unwrap();
        }
    }
    for (b, e) in est.batch_exits.iter().enumerate() {
        writeln!(out, "batch_exits,{b},,{e}").unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Reload a `SimEstimate` saved by [`save_estimate`]. Values round-trip
/// bit-exactly.
pub fn load_estimate(path: &Path) -> Result<SimEstimate> {
    let text = std::fs::read_to_string(path)?;
    let bad = |line: &str| Error::Config(format!("malformed estimate row: {line}"));

    let mut cfg = SimConfig {
        horizon: 0.0,
        warmup_fraction: 0.0,
        num_batches: 0,
        seed: 0,
        pmf_cap: 0,
        joint_interval: None,
    };
    let mut window = 0.0;
    let mut num_stations = 0usize;
    let mut rows: Vec<(String, Option<usize>, Option<usize>, String)> = Vec::new();
    for line in text.lines().skip(1) {
        if line.is_empty() {
            continue;
        }
        let mut parts = line.splitn(4, ',');
        let record = parts.next().ok_or_else(|| bad(line))?.to_string();
        let i = parts.next().ok_or_else(|| bad(line))?;
        let j = parts.next().ok_or_else(|| bad(line))?;
        let value = parts.next().ok_or_else(|| bad(line))?.to_string();
        let i = if i.is_empty() { None } else { Some(i.parse().map_err(|_| bad(line))?) };
        let j = if j.is_empty() { None } else { Some(j.parse().map_err(|_| bad(line))?) };
        match record.as_str() {
            "horizon" => cfg.horizon = value.parse().map_err(|_| bad(line))?,
            "warmup_fraction" => cfg.warmup_fraction = value.parse().map_err(|_| bad(line))?,
            "num_batches" => cfg.num_batches = value.parse().map_err(|_| bad(line))?,
            "seed" => cfg.seed = value.parse().map_err(|_| bad(line))?,
            "pmf_cap" => cfg.pmf_cap = value.parse().map_err(|_| bad(line))?,
            "joint_interval" => cfg.joint_interval = Some(value.parse().map_err(|_| bad(line))?),
            "window" => window = value.parse().map_err(|_| bad(line))?,
            "num_stations" => num_stations = value.parse().map_err(|_| bad(line))?,
            _ => rows.push((record, i, j, value)),
        }
    }
    if num_stations == 0 {
        return Err(Error::Config("estimate file lists no stations".into()));
    }

    let mut stations: Vec<StationEstimate> = (0..num_stations)
        .map(|_| StationEstimate {
            mean: 0.0,
            ci_halfwidth: 0.0,
            pmf: vec![0.0; cfg.pmf_cap + 1],
            overflow: 0.0,
            overflow_mean_contrib: 0.0,
            batch_means: vec![0.0; cfg.num_batches],
            batch_pmfs: vec![vec![0.0; cfg.pmf_cap + 1]; cfg.num_batches],
        })
        .collect();
    let mut joint_time = if num_stations >= 2 {
        Some(vec![vec![0.0; cfg.pmf_cap + 1]; cfg.pmf_cap + 1])
    } else {
        None
    };
    let mut rep_points: Vec<Vec<u32>> = Vec::new();
    let mut batch_exits = vec![0u64; cfg.num_batches];

    for (record, i, j, value) in rows {
        let parse_f = || -> Result<f64> {
            value.parse().map_err(|_| Error::Config(format!("bad float {value}")))
        };
        match record.as_str() {
            "mean" => stations[i.unwrap()].mean = parse_f()?,
            "ci_halfwidth" => stations[i.unwrap()].ci_halfwidth = parse_f()?,
            "overflow" => stations[i.unwrap()].overflow = parse_f()?,
            "overflow_mean_contrib" => stations[i.unwrap()].overflow_mean_contrib = parse_f()?,
            "pmf" => stations[i.unwrap()].pmf[j.unwrap()] = parse_f()?,
            "batch_mean" => stations[i.unwrap()].batch_means[j.unwrap()] = parse_f()?,
            "joint_time" => {
                if let Some(jt) = joint_time.as_mut() {
                    jt[i.unwrap()][j.unwrap()] = parse_f()?;
                }
            }
            "rep_point" => {
                let idx = i.unwrap();
                if rep_points.len() <= idx {
                    rep_points.resize(idx + 1, vec![0; num_stations]);
                }
                rep_points[idx][j.unwrap()] =
                    value.parse().map_err(|_| Error::Config(format!("bad count {value}")))?;
            }
            "batch_exits" => {
                batch_exits[i.unwrap()] =
                    value.parse().map_err(|_| Error::Config(format!("bad count {value}")))?;
            }
            other if other.starts_with("batch_pmf_") => {
                let b: usize = other["batch_pmf_".len()..]
                    .parse()
                    .map_err(|_| Error::Config(format!("bad record {other}")))?;
                stations[i.unwrap()].batch_pmfs[b][j.unwrap()] = parse_f()?;
            }
            other => return Err(Error::Config(format!("unknown record `{other}`"))),
        }
    }

    Ok(SimEstimate {
        config: cfg,
        stations,
        joint_time,
        representative_points: rep_points,
        batch_exits,
        window,
    })
}
