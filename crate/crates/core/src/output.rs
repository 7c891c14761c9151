//! On-disk artifacts. Numbers are written with shortest round-trip formatting,
//! so identical inputs give byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::comparison::EnvelopeTrajectory;
use crate::config::RunConfig;
use crate::diagnostics::DiagnosticsReport;
use crate::pde::Trajectory;

#[derive(Debug, thiserror::Error)]
#[error("{path}: {source}")]
pub struct OutputError {
    pub path: PathBuf,
    #[source]
    pub source: io::Error,
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), OutputError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|source| OutputError {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, contents).map_err(|source| OutputError {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), OutputError> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    write(path, text)
}

#[derive(Serialize)]
struct SnapshotEntry {
    index: usize,
    t: f64,
    u: String,
    v: String,
}

#[derive(Serialize)]
struct Metadata<'a> {
    config: &'a RunConfig,
    steps: usize,
    max_dt: f64,
    completed: bool,
    failure: &'a Option<String>,
    snapshots: Vec<SnapshotEntry>,
}

/// `t, mass, min_u, max_u, a_t, sup_dist_u_to_1, sup_dist_v_to_1` per snapshot.
pub fn scalars_csv(traj: &Trajectory) -> String {
    let mut out = String::from("t,mass,min_u,max_u,a_t,sup_dist_u_to_1,sup_dist_v_to_1\n");
    for s in &traj.snapshots {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            s.t,
            traj.grid.integrate_raw(s.u.values()),
            s.u.min(),
            s.u.max(),
            s.a,
            s.u.sup_dist_to(1.0),
            s.v.sup_dist_to(1.0)
        );
    }
    out
}

/// Writes `metadata.json`, `config.toml`, `scalars.csv` and one
/// `u_NNNNN.csv` / `v_NNNNN.csv` pair per snapshot into `dir`.
pub fn write_trajectory(dir: &Path, cfg: &RunConfig, traj: &Trajectory) -> Result<(), OutputError> {
    let mut entries = Vec::with_capacity(traj.snapshots.len());
    for (k, s) in traj.snapshots.iter().enumerate() {
        let (u_name, v_name) = (format!("u_{k:05}.csv"), format!("v_{k:05}.csv"));
        write(&dir.join(&u_name), s.u.to_csv("u"))?;
        write(&dir.join(&v_name), s.v.to_csv("v"))?;
        entries.push(SnapshotEntry {
            index: k,
            t: s.t,
            u: u_name,
            v: v_name,
        });
    }
    write(&dir.join("scalars.csv"), scalars_csv(traj))?;
    write_config(dir, cfg)?;
    write_json(
        &dir.join("metadata.json"),
        &Metadata {
            config: cfg,
            steps: traj.steps,
            max_dt: traj.max_dt,
            completed: traj.completed(),
            failure: &traj.failure,
            snapshots: entries,
        },
    )
}

/// The resolved configuration; running it again reproduces the directory.
pub fn write_config(dir: &Path, cfg: &RunConfig) -> Result<(), OutputError> {
    write(&dir.join("config.toml"), cfg.to_toml())
}

pub fn write_envelope(path: &Path, env: &EnvelopeTrajectory, mu0: Option<f64>) -> Result<(), OutputError> {
    write(path, env.to_csv(mu0))
}

pub fn write_report(dir: &Path, report: &DiagnosticsReport) -> Result<(), OutputError> {
    write(&dir.join("report.json"), report.to_json() + "\n")?;
    write(&dir.join("report.txt"), report.to_text())
}

const PLOT_SCRIPT: &str = r#"#!/usr/bin/env python3
"""Plots scalars.csv and envelope CSVs found next to this script."""
import csv
import pathlib
import sys

import matplotlib.pyplot as plt

here = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else pathlib.Path(__file__).parent)


def read(path):
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    return {k: [float(r[k]) if r[k] else float("nan") for r in rows] for k in rows[0]}


fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(11, 4))
scalars = here / "scalars.csv"
if scalars.exists():
    s = read(scalars)
    ax0.plot(s["t"], s["min_u"], label="min u")
    ax0.plot(s["t"], s["max_u"], label="max u")
    d = [a + b for a, b in zip(s["sup_dist_u_to_1"], s["sup_dist_v_to_1"])]
    ax1.semilogy(s["t"], d, label="|u-1| + |v-1|")
for env_path in sorted(here.glob("envelope*.csv")):
    e = read(env_path)
    ax0.plot(e["t"], e["u_lo"], "--", label=f"lower ({env_path.stem})")
    ax0.plot(e["t"], e["u_hi"], "--", label=f"upper ({env_path.stem})")
    ax1.semilogy(e["t"], e["log_gap"], "--", label=f"log gap ({env_path.stem})")
    if any(x == x for x in e["bound_conservative"]):
        ax1.semilogy(e["t"], e["bound_conservative"], ":", label="decay bound")
ax0.set_xlabel("t")
ax1.set_xlabel("t")
ax0.legend()
ax1.legend()
fig.tight_layout()
fig.savefig(here / "plot.png", dpi=120)
print(here / "plot.png")
"#;

pub fn write_plot_script(dir: &Path) -> Result<(), OutputError> {
    write(&dir.join("plot.py"), PLOT_SCRIPT)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::run;

    const CFG: &str = r#"
mu = 1.0
[grid]
extents = [1.0]
points = [11]
[motility]
family = "exponential"
alpha = 0.1
[u0]
kind = "cosine"
amplitude = 0.2
[scheme]
t_end = 0.05
output_stride = 100
"#;

    #[test]
    fn trajectory_directory_layout() {
        let cfg = RunConfig::parse(CFG).unwrap();
        let grid = cfg.build_grid().unwrap();
        let traj = run(&cfg.initial_density(&grid), &cfg.model(), &cfg.scheme).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_trajectory(dir.path(), &cfg, &traj).unwrap();
        let n = traj.snapshots.len();
        assert!(dir.path().join(format!("u_{:05}.csv", n - 1)).exists());
        let scalars = fs::read_to_string(dir.path().join("scalars.csv")).unwrap();
        assert_eq!(scalars.lines().count(), n + 1);
        let meta: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("metadata.json")).unwrap()).unwrap();
        assert_eq!(meta["config"]["mu"], 1.0);
        assert_eq!(meta["snapshots"].as_array().unwrap().len(), n);
        let echoed = RunConfig::parse(&fs::read_to_string(dir.path().join("config.toml")).unwrap()).unwrap();
        assert_eq!(echoed, cfg);
    }

    #[test]
    fn unwritable_path_reports_path() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let err = write_plot_script(&blocker.join("sub")).unwrap_err();
        assert!(err.to_string().contains("file"));
    }
}
