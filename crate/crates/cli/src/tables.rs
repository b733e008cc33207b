//! Reading and writing the tabular outputs.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::Context;
use calc_core::sampler::PosteriorDraws;
use calc_core::summaries::ParameterSummary;

use crate::InputError;

pub fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

pub fn csv_writer(path: &Path) -> anyhow::Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(create(path)?))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Empty cell for missing values.
pub fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// Long format: one row per chain, iteration and parameter. Chains and
/// iterations are numbered from 1; values use the shortest exact representation.
pub fn write_draws(path: &Path, draws: &PosteriorDraws) -> anyhow::Result<()> {
    let mut w = create(path)?;
    writeln!(w, "chain,iter,param,value")?;
    for (c, chain) in draws.chains.iter().enumerate() {
        for (s, row) in chain.values.iter().enumerate() {
            for (name, v) in draws.names.iter().zip(row) {
                // Names contain brackets but never commas or quotes.
                writeln!(w, "{},{},{},{}", c + 1, s + 1, name, v)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_draws(path: &Path) -> anyhow::Result<PosteriorDraws> {
    let shown = path.display().to_string();
    let bad = |line: usize, msg: String| InputError(format!("{shown}:{line}: {msg}"));
    let mut rdr = csv::Reader::from_path(path).map_err(|e| InputError(format!("cannot read {shown}: {e}")))?;
    let headers = rdr.headers().map_err(|e| bad(1, e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["chain", "iter", "param", "value"] {
        return Err(bad(1, "expected header 'chain,iter,param,value'".into()).into());
    }
    let mut names: Vec<String> = Vec::new();
    let mut chains: Vec<Vec<Vec<f64>>> = Vec::new();
    // Parameter position within the current iteration.
    let mut slot = 0usize;
    for (k, rec) in rdr.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| bad(line, e.to_string()))?;
        let chain: usize = rec[0].parse().map_err(|_| bad(line, format!("invalid chain '{}'", &rec[0])))?;
        let iter: usize = rec[1].parse().map_err(|_| bad(line, format!("invalid iter '{}'", &rec[1])))?;
        let name = &rec[2];
        let value: f64 = rec[3].parse().map_err(|_| bad(line, format!("invalid value '{}'", &rec[3])))?;
        if chain == chains.len() + 1 {
            chains.push(Vec::new());
        } else if chain != chains.len() {
            return Err(bad(line, format!("chain {chain} out of order")).into());
        }
        let n_chains = chains.len();
        let rows = chains.last_mut().expect("chain pushed above");
        let before = rows.len();
        if iter == before + 1 {
            if !names.is_empty() && slot != names.len() {
                return Err(bad(line, "previous iteration is incomplete".into()).into());
            }
            rows.push(Vec::new());
            slot = 0;
        } else if iter != before {
            return Err(bad(line, format!("iteration {iter} out of order")).into());
        }
        let first_row = n_chains == 1 && rows.len() == 1;
        if first_row {
            names.push(name.to_string());
        } else if names.get(slot).map(String::as_str) != Some(name) {
            return Err(bad(line, format!("unexpected parameter '{name}'")).into());
        }
        rows.last_mut().expect("row pushed above").push(value);
        slot += 1;
    }
    if slot != names.len() {
        return Err(bad(0, "last iteration is incomplete".into()).into());
    }
    if chains.is_empty() {
        return Err(bad(1, "no draws".into()).into());
    }
    PosteriorDraws::from_values(names, chains).map_err(|e| InputError(format!("{shown}: {e}")).into())
}

pub fn write_summary(path: &Path, rows: &[ParameterSummary], ppi: &[Option<f64>]) -> anyhow::Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["param", "mean", "median", "sd", "q2.5", "q97.5", "rhat", "ess", "ppi"])?;
    for (r, p) in rows.iter().zip(ppi) {
        w.write_record([
            r.name.clone(),
            r.mean.to_string(),
            r.median.to_string(),
            r.sd.to_string(),
            r.lower.to_string(),
            r.upper.to_string(),
            r.rhat.to_string(),
            r.ess_bulk.to_string(),
            opt(*p),
        ])?;
    }
    w.flush()?;
    Ok(())
}
