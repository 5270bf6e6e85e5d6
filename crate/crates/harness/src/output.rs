//! CSV tables, design dumps, the plotting script and run metadata.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::json;

use txbeam::design::{model_beampattern, uniform_grid};
use txbeam::{BeamspaceMatrix, TransmitModel, UlaGeometry};

use crate::config::ExperimentConfig;
use crate::sweep::{CellStatus, SweepResult};

/// Nine significant digits.
pub fn fmt_f(x: f64) -> String {
    format!("{x:.8e}")
}

pub const SWEEP_HEADER: &str =
    "method,snr_db,rmse_all_deg,rmse_resolved_deg,prob_resolution,crb_sto_deg,crb_det_deg,runs,seed,status";

pub fn write_sweep_csv<W: Write>(r: &SweepResult, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{SWEEP_HEADER}")?;
    for c in &r.cells {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            c.method,
            fmt_f(c.snr_db),
            fmt_f(c.rmse_all_deg),
            fmt_f(c.rmse_resolved_deg),
            fmt_f(c.prob_resolution),
            fmt_f(c.crb_sto_deg),
            fmt_f(c.crb_det_deg),
            c.runs,
            r.config.seed,
            c.status.label()
        )?;
    }
    Ok(())
}

pub fn write_crb_csv<W: Write>(r: &SweepResult, mut out: W) -> std::io::Result<()> {
    writeln!(out, "snr_db,method,target_index,crb_deg,crb_deg2,variant")?;
    for rec in &r.crbs {
        for bound in [&rec.stochastic, &rec.deterministic].into_iter().flatten() {
            for (i, v) in bound.per_target_deg2().into_iter().enumerate() {
                writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    fmt_f(rec.snr_db),
                    rec.method,
                    i,
                    fmt_f(v.sqrt()),
                    fmt_f(v),
                    bound.variant.as_str()
                )?;
            }
        }
    }
    Ok(())
}

pub fn write_trials_csv<W: Write>(r: &SweepResult, mut out: W) -> std::io::Result<()> {
    writeln!(out, "method,snr_db,trial,stream,resolved,flagged,estimates_deg,error")?;
    for t in &r.trials {
        let est: Vec<String> = t.estimates.iter().map(|&e| fmt_f(e)).collect();
        let err = t.error.as_deref().unwrap_or("").replace([',', '\n'], " ");
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            t.method,
            fmt_f(t.snr_db),
            t.trial,
            t.stream,
            u8::from(t.resolved),
            u8::from(t.flagged),
            est.join(";"),
            err
        )?;
    }
    Ok(())
}

/// One row per transmit element, a `re,im` column pair per beam.
pub fn write_design_csv<W: Write>(c: &BeamspaceMatrix, mut out: W) -> std::io::Result<()> {
    let mut header = vec!["element".to_string()];
    for k in 1..=c.num_beams() {
        header.push(format!("c{k}_re"));
        header.push(format!("c{k}_im"));
    }
    writeln!(out, "{}", header.join(","))?;
    for m in 0..c.num_antennas() {
        let mut row = vec![m.to_string()];
        for k in 0..c.num_beams() {
            let z = c.entries()[(m, k)];
            row.push(fmt_f(z.re));
            row.push(fmt_f(z.im));
        }
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// `theta_deg, p1, …, pK, total` from −90° to 90°.
pub fn write_beampattern_csv<W: Write>(
    model: &TransmitModel,
    tx: &UlaGeometry,
    step_deg: f64,
    mut out: W,
) -> Result<()> {
    let grid = uniform_grid(-90.0, 90.0, step_deg)?;
    let p = model_beampattern(model, tx, &grid)?;
    let k = model.num_beams();
    let mut header = vec!["theta_deg".to_string()];
    header.extend((1..=k).map(|i| format!("p{i}")));
    header.push("total".into());
    writeln!(out, "{}", header.join(","))?;
    for (i, theta) in grid.iter().enumerate() {
        let mut row = vec![fmt_f(theta.degrees())];
        row.extend(p.per_beam.row(i).iter().map(|&v| fmt_f(v)));
        row.push(fmt_f(p.total[i]));
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

pub const PLOT_SCRIPT: &str = r#"#!/usr/bin/env python3
"""Plots the CSV tables written next to this script."""
import csv
import glob
import math
import os
import sys

import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))


def read(name):
    with open(os.path.join(here, name)) as f:
        return list(csv.DictReader(f))


rows = [r for r in read("sweep.csv") if r["status"] == "ok"]
methods = sorted({r["method"] for r in rows})

fig, (ax_p, ax_r) = plt.subplots(1, 2, figsize=(11, 4))
for m in methods:
    cells = [r for r in rows if r["method"] == m]
    snr = [float(r["snr_db"]) for r in cells]
    ax_p.plot(snr, [float(r["prob_resolution"]) for r in cells], marker="o", label=m)
    line, = ax_r.semilogy(snr, [float(r["rmse_all_deg"]) for r in cells], marker="o", label=m)
    ax_r.semilogy(snr, [float(r["crb_sto_deg"]) for r in cells], "--", color=line.get_color())
ax_p.set_xlabel("SNR (dB)")
ax_p.set_ylabel("probability of resolution")
ax_r.set_xlabel("SNR (dB)")
ax_r.set_ylabel("RMSE (deg); dashed: stochastic CRB")
ax_p.legend()
fig.tight_layout()
fig.savefig(os.path.join(here, "sweep.png"), dpi=150)

fig, ax = plt.subplots(figsize=(7, 4))
for path in sorted(glob.glob(os.path.join(here, "beampattern_*.csv"))):
    with open(path) as f:
        data = list(csv.DictReader(f))
    theta = [float(r["theta_deg"]) for r in data]
    total = [float(r["total"]) for r in data]
    peak = max(total)
    ax.plot(theta, [10 * math.log10(max(t / peak, 1e-12)) for t in total],
            label=os.path.basename(path)[len("beampattern_"):-4])
ax.set_xlabel("angle (deg)")
ax.set_ylabel("transmit power (dB, normalised)")
ax.set_ylim(-60, 3)
ax.legend()
fig.tight_layout()
fig.savefig(os.path.join(here, "beampatterns.png"), dpi=150)

if "--show" in sys.argv:
    plt.show()
"#;

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn finish(mut w: BufWriter<File>, dir: &Path, name: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    w.flush().with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

/// Writes `config.toml` and `config.sha256`.
pub fn write_config_echo(cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for (name, text) in [
        ("config.toml", cfg.to_toml()),
        ("config.sha256", format!("{}\n", cfg.hash())),
    ] {
        let path = dir.join(name);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        paths.push(path);
    }
    Ok(paths)
}

/// Writes every artifact of a sweep into `dir` and returns the paths.
pub fn emit_outputs(r: &SweepResult, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut paths = Vec::new();

    let mut w = create(dir, "sweep.csv")?;
    write_sweep_csv(r, &mut w).with_context(|| format!("writing {}", dir.join("sweep.csv").display()))?;
    paths.push(finish(w, dir, "sweep.csv")?);

    let mut w = create(dir, "crb.csv")?;
    write_crb_csv(r, &mut w).with_context(|| format!("writing {}", dir.join("crb.csv").display()))?;
    paths.push(finish(w, dir, "crb.csv")?);

    if r.config.trial_log {
        let mut w = create(dir, "trials.csv")?;
        write_trials_csv(r, &mut w).with_context(|| format!("writing {}", dir.join("trials.csv").display()))?;
        paths.push(finish(w, dir, "trials.csv")?);
    }

    for (method, setup) in &r.setups {
        let Ok(setup) = setup else { continue };
        if let Some(c) = setup.matrix() {
            let name = format!("design_{method}.csv");
            let mut w = create(dir, &name)?;
            write_design_csv(c, &mut w).with_context(|| format!("writing {}", dir.join(&name).display()))?;
            paths.push(finish(w, dir, &name)?);
        }
        let name = format!("beampattern_{method}.csv");
        let mut w = create(dir, &name)?;
        write_beampattern_csv(&setup.model, &setup.tx, 0.1, &mut w)
            .with_context(|| format!("writing {}", dir.join(&name).display()))?;
        paths.push(finish(w, dir, &name)?);
    }

    let plot = dir.join("plot_sweep.py");
    fs::write(&plot, PLOT_SCRIPT).with_context(|| format!("writing {}", plot.display()))?;
    paths.push(plot);

    paths.extend(write_config_echo(&r.config, dir)?);

    let methods: Vec<serde_json::Value> = r
        .setups
        .iter()
        .map(|(m, s)| match s {
            Ok(s) => json!({"method": m.name(), "status": "ok", "notes": s.notes}),
            Err(e) => json!({"method": m.name(), "status": "failed", "reason": e}),
        })
        .collect();
    let cells: Vec<serde_json::Value> = r
        .cells
        .iter()
        .filter(|c| c.trial_failures > 0 || c.status != CellStatus::Ok)
        .map(|c| {
            let reason = match &c.status {
                CellStatus::Failed(e) => Some(e.clone()),
                CellStatus::Ok => None,
            };
            json!({"method": c.method.name(), "snr_db": c.snr_db, "trial_failures": c.trial_failures, "reason": reason})
        })
        .collect();
    let meta = json!({
        "seed": r.config.seed,
        "config_hash": r.config.hash(),
        "started_unix": r.started_unix,
        "elapsed_seconds": r.elapsed_seconds,
        "workers": r.workers,
        "estimator": r.config.estimator.name(),
        "rmse_all_deg": "includes unresolved trials; a truth with no estimate uses its nearest estimate, or the sector centre when none exist",
        "rmse_resolved_deg": "resolved trials only; NaN when none resolved",
        "crb_deg": "square root of the per-target bound averaged over targets",
        "methods": methods,
        "cell_issues": cells,
    });
    let path = dir.join("metadata.json");
    let text = serde_json::to_string_pretty(&meta).context("serialising metadata")?;
    fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    paths.push(path);
    Ok(paths)
}
