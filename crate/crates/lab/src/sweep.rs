//! Parameter sweeps over `(σ, C₀/ω, E₀)`.

use std::collections::HashSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{BranchArg, Coupling, Resolved, Settings};
use crate::output::{fmt_f64, RunDir, Table};
use crate::pipeline::{self, Outcome, Regime};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cell {
    pub sigma: f64,
    pub c0_over_omega: f64,
    pub e0: f64,
}

/// Cartesian product in input order, duplicates removed.
pub fn cells(sigmas: &[f64], c0s: &[f64], e0s: &[f64]) -> Vec<Cell> {
    // +0.0 and -0.0 are one grid point
    let key = |v: f64| (v + 0.0).to_bits();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for &sigma in sigmas {
        for &c0_over_omega in c0s {
            for &e0 in e0s {
                if seen.insert((key(sigma), key(c0_over_omega), key(e0))) {
                    out.push(Cell { sigma, c0_over_omega, e0 });
                }
            }
        }
    }
    out
}

fn cell_settings(base: &Settings, cell: Cell) -> Settings {
    let mut s = base.clone();
    s.sigma = Some(cell.sigma);
    s.c0 = Some(Coupling::Omega(cell.c0_over_omega));
    s.e0 = Some(cell.e0);
    // p follows σ so that every cell stays on α_p = α_σ
    s.p = None;
    if s.branch == Some(BranchArg::Balanced) {
        s.branch = Some(BranchArg::Plusminus);
    }
    s
}

fn side(k: f64) -> &'static str {
    if k < 1.0 {
        "below"
    } else if k > 1.0 {
        "above"
    } else {
        "at"
    }
}

const HEADER: [&str; 18] = [
    "sigma",
    "C0_over_omega",
    "E0",
    "p",
    "alpha",
    "omega",
    "beta00",
    "threshold",
    "regime",
    "status",
    "stop",
    "exponent",
    "exponent_se",
    "coefficient",
    "expected_exponent",
    "expected_coefficient",
    "lower_bound",
    "error",
];

fn name<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn row(cell: Cell, cfg: Option<&Resolved>, res: &Result<Outcome>) -> Vec<String> {
    let mut r = vec![fmt_f64(cell.sigma), fmt_f64(cell.c0_over_omega), fmt_f64(cell.e0)];
    r.push(opt(cfg.map(|c| c.p)));
    match res {
        Ok(o) => {
            let fit = o.fit.as_ref().ok();
            r.extend([
                opt(o.alpha),
                fmt_f64(o.omega),
                opt(o.beta00),
                side(cell.c0_over_omega).into(),
                name(&o.regime),
                "ok".into(),
                name(&o.run.stop),
                opt(fit.map(|f| f.exponent)),
                opt(fit.map(|f| f.exponent_se)),
                opt(fit.map(|f| f.coefficient)),
                opt(o.expected.map(|e| e.0)),
                opt(o.expected.map(|e| e.1)),
                opt(o.lower_bound.as_ref().map(|l| l.infimum)),
                match (&o.fit, o.regime) {
                    (Err(e), r) if r != Regime::Bounded => e.clone(),
                    _ => String::new(),
                },
            ]);
        }
        Err(e) => {
            r.extend(["", "", ""].map(String::from));
            r.push(side(cell.c0_over_omega).into());
            r.extend(["", "failed", "", "", "", "", "", "", ""].map(String::from));
            r.push(format!("{e:#}"));
        }
    }
    r
}

pub fn sweep(base: &Settings, cfg: &Resolved, threads: usize, dir: &mut RunDir) -> Result<Value> {
    let grid = cfg.sweep.as_ref().context("sweep grid is not resolved")?;
    let cells = cells(&grid.sigmas, &grid.c0_over_omega, &grid.e0s);
    let next = AtomicUsize::new(0);
    let rows: Mutex<Vec<Option<Vec<String>>>> = Mutex::new(vec![None; cells.len()]);
    let workers = threads.max(1).min(cells.len().max(1));
    thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&cell) = cells.get(i) else { break };
                let resolved = cell_settings(base, cell).resolve(false);
                let res = resolved.as_ref().map_err(|e| anyhow::anyhow!("{e:#}")).and_then(pipeline::simulate);
                let line = row(cell, resolved.as_ref().ok(), &res);
                rows.lock().expect("sweep rows lock")[i] = Some(line);
            });
        }
    });
    let mut table = Table::new(&HEADER);
    let mut failed = 0;
    for line in rows.into_inner().expect("sweep rows lock").into_iter().flatten() {
        failed += usize::from(line[9] == "failed");
        table.push(line);
    }
    dir.write_table("summary.csv", &table)?;
    Ok(json!({ "cells": cells.len(), "failed": failed }))
}
