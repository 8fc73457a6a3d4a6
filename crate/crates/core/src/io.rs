//! On-disk formats: run directories, trace CSVs, plot data and the states cache.
//!
//! A run directory holds
//!
//! ```text
//! config.toml          resolved configuration
//! manifest.json        seeds, hashes, resolved noise, SHA-256 of every data file
//! summary.json         analytics recomputable from the files below
//! traces/<label>.csv   one per minimizer
//! hamming.csv          pairwise H(k), long format
//! minima.csv           final weights and their noise-free errors
//! paths.csv            inverted-path errors (inverted-paths only)
//! plots/*.csv          figure data
//! ```
//!
//! Floats are written in shortest round-trip form, so reading a run back
//! reproduces the in-memory values exactly.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analytics::{histogram, DimensionCategory};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::experiments::{
    ExperimentConfig, ExperimentKind, ExperimentReport, MinimumRecord, NamedTrace, PairHamming, PathRecord, Summary,
};
use crate::learner::{BooleanWeights, DeltaCompare, EpochRecord, LearningTrace, SelectionMode};
use crate::reservoir::StateMatrix;
use crate::scalar::Real;
use crate::task::{Dataset, TimeSeries};

pub const TRACE_COLUMNS: [&str; 8] = ["k", "l", "eps", "r", "eps_min", "k_min", "hamming_to_ref", "eps_acc"];

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut hasher = Sha256::new();
    let mut f = File::open(path)?;
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

fn csv_writer(path: &Path, comments: &[(&str, String)]) -> Result<csv::Writer<BufWriter<File>>> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut out = BufWriter::new(File::create(path)?);
    for (k, v) in comments {
        writeln!(out, "# {k}: {v}")?;
    }
    Ok(csv::Writer::from_writer(out))
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidData(e.to_string())
}

/// Reads `# key: value` lines and the CSV body below them.
fn read_commented_csv(path: &Path) -> Result<(BTreeMap<String, String>, Vec<csv::StringRecord>, csv::StringRecord)> {
    let text = fs::read_to_string(path)?;
    let mut comments = BTreeMap::new();
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        if let Some((k, v)) = line[1..].split_once(':') {
            comments.insert(k.trim().to_string(), v.trim().to_string());
        }
    }
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(csv_err)?.clone();
    let rows = reader.records().collect::<std::result::Result<Vec<_>, _>>().map_err(csv_err)?;
    Ok((comments, rows, headers))
}

fn field<V: std::str::FromStr>(rec: &csv::StringRecord, i: usize, what: &str) -> Result<V> {
    rec.get(i)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::InvalidData(format!("bad or missing `{what}` in row {:?}", rec)))
}

fn comment<V: std::str::FromStr>(c: &BTreeMap<String, String>, key: &str) -> Result<V> {
    c.get(key)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::InvalidData(format!("missing or bad `# {key}` header")))
}

fn mode_from(s: &str) -> Result<SelectionMode> {
    serde_json::from_value(serde_json::Value::String(s.into())).map_err(|_| Error::InvalidData(format!("bad mode `{s}`")))
}

fn compare_from(s: &str) -> Result<DeltaCompare> {
    serde_json::from_value(serde_json::Value::String(s.into()))
        .map_err(|_| Error::InvalidData(format!("bad compare `{s}`")))
}

fn compare_name(c: DeltaCompare) -> &'static str {
    match c {
        DeltaCompare::Stored => "stored",
        DeltaCompare::Remeasure => "remeasure",
    }
}

/// Provenance stamped on every CSV of a run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stamp {
    pub config_hash: String,
    pub master_seed: u64,
}

impl Stamp {
    fn lines(&self) -> Vec<(&'static str, String)> {
        vec![("config_hash", self.config_hash.clone()), ("master_seed", self.master_seed.to_string())]
    }
}

pub fn write_trace_csv<T: Real>(path: &Path, named: &NamedTrace<T>, stamp: &Stamp) -> Result<()> {
    let t = &named.trace;
    let mut comments = stamp.lines();
    comments.extend([
        ("label", named.label.clone()),
        ("mode", t.mode.name().to_string()),
        ("compare", compare_name(t.compare).to_string()),
        ("selector_seed", t.selector_seed.to_string()),
        ("noise_seed", t.noise_seed.to_string()),
        ("eps0", t.eps0.as_f64().to_string()),
        ("initial", t.initial_weights.to_bitstring()),
    ]);
    let mut w = csv_writer(path, &comments)?;
    w.write_record(TRACE_COLUMNS).map_err(csv_err)?;
    for r in &t.records {
        w.write_record([
            r.k.to_string(),
            r.l.to_string(),
            r.eps.as_f64().to_string(),
            u8::from(r.r).to_string(),
            r.eps_min.as_f64().to_string(),
            r.k_min.to_string(),
            r.hamming_to_ref.map(|h| h.to_string()).unwrap_or_default(),
            r.eps_acc.as_f64().to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace_csv<T: Real>(path: &Path) -> Result<(NamedTrace<T>, Stamp)> {
    let (c, rows, headers) = read_commented_csv(path)?;
    if headers.iter().collect::<Vec<_>>() != TRACE_COLUMNS {
        return Err(Error::InvalidData(format!("{}: unexpected columns {:?}", path.display(), headers)));
    }
    let stamp = Stamp { config_hash: comment(&c, "config_hash")?, master_seed: comment(&c, "master_seed")? };
    let initial = BooleanWeights::parse_bitstring(&comment::<String>(&c, "initial")?)?;
    let eps0 = T::lit(comment::<f64>(&c, "eps0")?);
    let mut records = Vec::with_capacity(rows.len());
    let mut weights = initial.clone();
    for row in &rows {
        let rec = EpochRecord {
            k: field(row, 0, "k")?,
            l: field(row, 1, "l")?,
            eps: T::lit(field(row, 2, "eps")?),
            r: field::<u8>(row, 3, "r")? == 1,
            eps_min: T::lit(field(row, 4, "eps_min")?),
            k_min: field(row, 5, "k_min")?,
            hamming_to_ref: match row.get(6) {
                Some("") | None => None,
                Some(_) => Some(field(row, 6, "hamming_to_ref")?),
            },
            eps_acc: T::lit(field(row, 7, "eps_acc")?),
        };
        if rec.l >= weights.len() {
            return Err(Error::Index { index: rec.l, len: weights.len() });
        }
        if rec.r {
            weights.flip(rec.l);
        }
        records.push(rec);
    }
    let (eps_min, k_min) = records.last().map(|r| (r.eps_min, r.k_min)).unwrap_or((eps0, 0));
    let trace = LearningTrace {
        mode: mode_from(&comment::<String>(&c, "mode")?)?,
        compare: compare_from(&comment::<String>(&c, "compare")?)?,
        selector_seed: comment(&c, "selector_seed")?,
        noise_seed: comment(&c, "noise_seed")?,
        initial_weights: initial,
        eps0,
        records,
        eps_min,
        k_min,
        final_weights: weights,
    };
    Ok((NamedTrace { label: comment(&c, "label")?, trace }, stamp))
}

pub fn write_hamming_csv(path: &Path, pairs: &[PairHamming], stamp: &Stamp) -> Result<()> {
    let mut w = csv_writer(path, &stamp.lines())?;
    w.write_record(["run", "a", "b", "k", "h"]).map_err(csv_err)?;
    for p in pairs {
        for (i, h) in p.counts.iter().enumerate() {
            w.write_record([p.run.to_string(), p.a.clone(), p.b.clone(), (i + 1).to_string(), h.to_string()])
                .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_hamming_csv(path: &Path) -> Result<(Vec<PairHamming>, Stamp)> {
    let (c, rows, _) = read_commented_csv(path)?;
    let stamp = Stamp { config_hash: comment(&c, "config_hash")?, master_seed: comment(&c, "master_seed")? };
    let mut pairs: Vec<PairHamming> = Vec::new();
    for row in &rows {
        let run: usize = field(row, 0, "run")?;
        let (a, b): (String, String) = (field(row, 1, "a")?, field(row, 2, "b")?);
        let k: usize = field(row, 3, "k")?;
        let h: usize = field(row, 4, "h")?;
        match pairs.last_mut() {
            Some(p) if p.run == run && p.a == a && p.b == b => {
                if k != p.counts.len() + 1 {
                    return Err(Error::InvalidData(format!("hamming row out of order at k={k}")));
                }
                p.counts.push(h);
            }
            _ => {
                if k != 1 {
                    return Err(Error::InvalidData(format!("hamming pair must start at k=1, got {k}")));
                }
                pairs.push(PairHamming { run, a, b, counts: vec![h] });
            }
        }
    }
    Ok((pairs, stamp))
}

pub fn write_minima_csv(path: &Path, minima: &[MinimumRecord], stamp: &Stamp) -> Result<()> {
    let mut w = csv_writer(path, &stamp.lines())?;
    w.write_record(["label", "train_error", "test_error", "eps_min", "k_min", "weights"]).map_err(csv_err)?;
    for m in minima {
        w.write_record([
            m.label.clone(),
            m.train_error.to_string(),
            m.test_error.to_string(),
            m.eps_min.to_string(),
            m.k_min.to_string(),
            m.weights.to_bitstring(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_minima_csv(path: &Path) -> Result<Vec<MinimumRecord>> {
    let (_, rows, _) = read_commented_csv(path)?;
    rows.iter()
        .map(|r| {
            Ok(MinimumRecord {
                label: field(r, 0, "label")?,
                train_error: field(r, 1, "train_error")?,
                test_error: field(r, 2, "test_error")?,
                eps_min: field(r, 3, "eps_min")?,
                k_min: field(r, 4, "k_min")?,
                weights: BooleanWeights::parse_bitstring(&field::<String>(r, 5, "weights")?)?,
            })
        })
        .collect()
}

pub fn write_paths_csv(path: &Path, p: &PathRecord, stamp: &Stamp) -> Result<()> {
    let mut comments = stamp.lines();
    comments.push(("noise_scale", p.noise_scale.to_string()));
    comments.push(("endpoints_exact", p.endpoints_exact.to_string()));
    let mut w = csv_writer(path, &comments)?;
    w.write_record(["j", "l", "eps_a", "eps_b"]).map_err(csv_err)?;
    for j in 0..p.eps_a.len() {
        let l = if j == 0 { String::new() } else { p.order[j - 1].to_string() };
        w.write_record([j.to_string(), l, p.eps_a[j].to_string(), p.eps_b[j].to_string()]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_paths_csv(path: &Path) -> Result<PathRecord> {
    let (c, rows, _) = read_commented_csv(path)?;
    let mut p = PathRecord {
        order: Vec::new(),
        eps_a: Vec::new(),
        eps_b: Vec::new(),
        endpoints_exact: comment(&c, "endpoints_exact")?,
        noise_scale: comment(&c, "noise_scale")?,
    };
    for (j, r) in rows.iter().enumerate() {
        if j > 0 {
            p.order.push(field(r, 1, "l")?);
        }
        p.eps_a.push(field(r, 2, "eps_a")?);
        p.eps_b.push(field(r, 3, "eps_b")?);
    }
    Ok(p)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceSeeds {
    pub label: String,
    pub file: String,
    pub selector_seed: u64,
    pub noise_seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub generator: String,
    pub kind: ExperimentKind,
    pub config_hash: String,
    pub params_hash: String,
    pub master_seed: u64,
    pub series_seed: u64,
    pub reservoir_seed: u64,
    pub nodes: usize,
    /// Absolute output-noise std actually used.
    pub sigma_out: f64,
    pub states_checksum: BTreeMap<String, String>,
    pub experiment: ExperimentConfig,
    pub config: RunConfig,
    pub traces: Vec<TraceSeeds>,
    /// SHA-256 of every data file, keyed by path relative to the run directory.
    pub files: BTreeMap<String, String>,
}

impl Manifest {
    pub fn stamp(&self) -> Stamp {
        Stamp { config_hash: self.config_hash.clone(), master_seed: self.master_seed }
    }
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_json<D: serde::de::DeserializeOwned>(path: &Path) -> Result<D> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Everything needed to place a report on disk.
pub struct RunContext<'a> {
    pub config: &'a RunConfig,
    pub sigma_out: f64,
    pub states_checksum: BTreeMap<String, String>,
}

fn trace_file(label: &str) -> String {
    format!("traces/{label}.csv")
}

/// Writes a complete run directory and returns its manifest.
pub fn write_run<T: Real>(dir: &Path, report: &ExperimentReport<T>, ctx: &RunContext<'_>) -> Result<Manifest> {
    fs::create_dir_all(dir)?;
    let config = ctx.config;
    let stamp = Stamp { config_hash: config.hash(), master_seed: config.seed };
    fs::write(dir.join("config.toml"), config.to_toml_string()?)?;

    let mut data = Vec::new();
    let mut seeds = Vec::new();
    for t in &report.traces {
        let file = trace_file(&t.label);
        write_trace_csv(&dir.join(&file), t, &stamp)?;
        seeds.push(TraceSeeds {
            label: t.label.clone(),
            file: file.clone(),
            selector_seed: t.trace.selector_seed,
            noise_seed: t.trace.noise_seed,
        });
        data.push(file);
    }
    if !report.hamming.is_empty() {
        write_hamming_csv(&dir.join("hamming.csv"), &report.hamming, &stamp)?;
        data.push("hamming.csv".into());
    }
    if !report.minima.is_empty() {
        write_minima_csv(&dir.join("minima.csv"), &report.minima, &stamp)?;
        data.push("minima.csv".into());
    }
    if let Some(p) = &report.paths {
        write_paths_csv(&dir.join("paths.csv"), p, &stamp)?;
        data.push("paths.csv".into());
    }
    let files = data.into_iter().map(|f| Ok((f.clone(), sha256_file(&dir.join(&f))?))).collect::<Result<_>>()?;
    let manifest = Manifest {
        generator: format!("boolrc {}", env!("CARGO_PKG_VERSION")),
        kind: report.config.kind,
        config_hash: stamp.config_hash.clone(),
        params_hash: config.params_hash(),
        master_seed: config.seed,
        series_seed: config.series_seed(),
        reservoir_seed: config.resolved_reservoir().seed,
        nodes: report.nodes,
        sigma_out: ctx.sigma_out,
        states_checksum: ctx.states_checksum.clone(),
        experiment: report.config.clone(),
        config: config.clone(),
        traces: seeds,
        files,
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    write_json(&dir.join("summary.json"), &report.summary)?;
    write_plots(&dir.join("plots"), &report.summary, report.paths.as_ref())?;
    Ok(manifest)
}

/// Raw material of a run read back from disk.
pub struct LoadedRun<T> {
    pub manifest: Manifest,
    pub traces: Vec<NamedTrace<T>>,
    pub hamming: Vec<PairHamming>,
    pub minima: Vec<MinimumRecord>,
    pub paths: Option<PathRecord>,
}

/// Loads a run directory, verifying every file hash and stamp against the manifest.
pub fn load_run<T: Real>(dir: &Path) -> Result<LoadedRun<T>> {
    let manifest_path = dir.join("manifest.json");
    if !manifest_path.is_file() {
        return Err(Error::InvalidData(format!("{} has no manifest.json", dir.display())));
    }
    let manifest: Manifest = read_json(&manifest_path)?;
    if manifest.config.hash() != manifest.config_hash {
        return Err(Error::InvalidData(format!(
            "manifest config hash {} does not match its embedded config ({})",
            manifest.config_hash,
            manifest.config.hash()
        )));
    }
    for (file, expected) in &manifest.files {
        let path = dir.join(file);
        if !path.is_file() {
            return Err(Error::InvalidData(format!("run directory is missing {file}")));
        }
        let found = sha256_file(&path)?;
        if &found != expected {
            return Err(Error::InvalidData(format!("{file}: sha256 {found} differs from manifest {expected}")));
        }
    }
    let stamp = manifest.stamp();
    let check = |s: Stamp, file: &str| {
        if s != stamp {
            Err(Error::InvalidData(format!("{file}: stamp {} does not match manifest {}", s.config_hash, stamp.config_hash)))
        } else {
            Ok(())
        }
    };
    let mut traces = Vec::new();
    for t in &manifest.traces {
        let (trace, s) = read_trace_csv::<T>(&dir.join(&t.file))?;
        check(s, &t.file)?;
        traces.push(trace);
    }
    let hamming = if manifest.files.contains_key("hamming.csv") {
        let (h, s) = read_hamming_csv(&dir.join("hamming.csv"))?;
        check(s, "hamming.csv")?;
        h
    } else {
        Vec::new()
    };
    let minima =
        if manifest.files.contains_key("minima.csv") { read_minima_csv(&dir.join("minima.csv"))? } else { Vec::new() };
    let paths = if manifest.files.contains_key("paths.csv") { Some(read_paths_csv(&dir.join("paths.csv"))?) } else { None };
    Ok(LoadedRun { manifest, traces, hamming, minima, paths })
}

/// A named table of numeric columns destined for `plots/<name>.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct PlotTable {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl PlotTable {
    fn new(name: &str, columns: &[&str]) -> Self {
        Self { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv_writer(path, &[])?;
        w.write_record(&self.columns).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record(r.iter().map(|v| v.to_string())).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Figure data derived from a summary.
pub fn plot_tables(summary: &Summary, paths: Option<&PathRecord>) -> Vec<PlotTable> {
    let mut out = Vec::new();
    if let Some(l) = &summary.learning {
        let mut t = PlotTable::new("error_vs_epoch", &["k", "eps_mean", "eps_fit"]);
        for (k, &e) in l.mean_error.iter().enumerate() {
            t.rows.push(vec![k as f64, e, l.exponential.eps0 * (-l.exponential.rate * k as f64).exp()]);
        }
        out.push(t);
        if let Some(m) = &l.minima {
            let d: Vec<f64> = m.distances.iter().map(|&d| d as f64).collect();
            let lo = d.iter().copied().fold(f64::INFINITY, f64::min).floor();
            let hi = d.iter().copied().fold(f64::NEG_INFINITY, f64::max).ceil();
            let bins = 20;
            let hi = if hi > lo { hi } else { lo + 1.0 };
            let width = (hi - lo) / bins as f64;
            let mut t = PlotTable::new("minima_distances", &["bin_lo", "bin_hi", "count"]);
            for (start, count) in histogram(&d, lo, hi, bins) {
                t.rows.push(vec![start, start + width, count as f64]);
            }
            out.push(t);
        }
    }
    if let Some(d) = &summary.divergence {
        let mut t = PlotTable::new("hamming_vs_epoch", &["k", "h_mean", "h_predicted"]);
        for (i, (&o, &p)) in d.mean_hamming.iter().zip(&d.predicted).enumerate() {
            t.rows.push(vec![(i + 1) as f64, o, p]);
        }
        out.push(t);
    }
    if let (Some(s), Some(p)) = (&summary.inverted_paths, paths) {
        let mut t = PlotTable::new("path_errors", &["j", "eps_a", "eps_b"]);
        for j in 0..p.eps_a.len() {
            t.rows.push(vec![j as f64, p.eps_a[j], p.eps_b[j]]);
        }
        out.push(t);
        let mut t = PlotTable::new("gradient_pairs", &["l", "grad_a", "grad_b", "category"]);
        for (probe, &l) in s.classification.probes.iter().zip(&p.order) {
            let cat = match probe.category {
                DimensionCategory::BelowNoise => 0.0,
                DimensionCategory::PotentiallyIndependent => 1.0,
                DimensionCategory::Dependent => 2.0,
            };
            t.rows.push(vec![l as f64, probe.grad_a, probe.grad_b, cat]);
        }
        out.push(t);
    }
    out
}

pub fn write_plots(dir: &Path, summary: &Summary, paths: Option<&PathRecord>) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    plot_tables(summary, paths)
        .into_iter()
        .map(|t| {
            let p = dir.join(format!("{}.csv", t.name));
            t.write(&p)?;
            Ok(p)
        })
        .collect()
}

pub fn read_plot_table(path: &Path) -> Result<PlotTable> {
    let (_, rows, headers) = read_commented_csv(path)?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("plot").to_string();
    let rows = rows
        .iter()
        .map(|r| (0..headers.len()).map(|i| field(r, i, &headers[i])).collect::<Result<Vec<f64>>>())
        .collect::<Result<_>>()?;
    Ok(PlotTable { name, columns: headers.iter().map(String::from).collect(), rows })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSidecar {
    pub config_hash: String,
    pub master_seed: u64,
    pub series_seed: u64,
    pub length: usize,
    pub dt_effective: f64,
    pub washout: usize,
    pub train_len: usize,
    pub test_len: usize,
    pub csv_sha256: String,
    pub task: crate::task::TaskConfig,
}

/// Writes `dataset.csv` (`n,u,target`) and `dataset.json`.
pub fn write_dataset<T: Real>(
    dir: &Path,
    series: &TimeSeries<T>,
    dataset: &Dataset<T>,
    config: &RunConfig,
) -> Result<DatasetSidecar> {
    fs::create_dir_all(dir)?;
    let csv_path = dir.join("dataset.csv");
    let mut w = csv_writer(&csv_path, &[])?;
    w.write_record(["n", "u", "target"]).map_err(csv_err)?;
    for (n, (u, t)) in dataset.u.iter().zip(&dataset.target).enumerate() {
        w.write_record([n.to_string(), u.as_f64().to_string(), t.as_f64().to_string()]).map_err(csv_err)?;
    }
    w.flush()?;
    drop(w);
    let sidecar = DatasetSidecar {
        config_hash: config.hash(),
        master_seed: config.seed,
        series_seed: config.series_seed(),
        length: dataset.u.len(),
        dt_effective: series.dt_effective,
        washout: dataset.washout,
        train_len: dataset.train_len,
        test_len: dataset.test_len,
        csv_sha256: sha256_file(&csv_path)?,
        task: config.task,
    };
    write_json(&dir.join("dataset.json"), &sidecar)?;
    Ok(sidecar)
}

/// First line of a states cache file; the matrices follow as little-endian
/// f64, train then test, each column-major.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheHeader {
    pub format: String,
    pub params_hash: String,
    pub series_seed: u64,
    pub reservoir_seed: u64,
    pub cols: usize,
    pub train_rows: usize,
    pub test_rows: usize,
}

pub const CACHE_FORMAT: &str = "boolrc-states-v1";

pub fn cache_header(config: &RunConfig, train_rows: usize, test_rows: usize) -> CacheHeader {
    CacheHeader {
        format: CACHE_FORMAT.into(),
        params_hash: config.params_hash(),
        series_seed: config.series_seed(),
        reservoir_seed: config.resolved_reservoir().seed,
        cols: config.nodes(),
        train_rows,
        test_rows,
    }
}

pub fn write_states_cache<T: Real>(
    path: &Path,
    header: &CacheHeader,
    train: &StateMatrix<T>,
    test: &StateMatrix<T>,
) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut out, header)?;
    out.write_all(b"\n")?;
    for m in [train, test] {
        for v in m.as_column_major() {
            out.write_all(&v.as_f64().to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads a cache, refusing it unless its params hash equals `expected.params_hash`
/// and its shape matches.
pub fn read_states_cache<T: Real>(path: &Path, expected: &CacheHeader) -> Result<(StateMatrix<T>, StateMatrix<T>)> {
    let mut input = BufReader::new(File::open(path)?);
    let mut line = String::new();
    input.read_line(&mut line)?;
    let header: CacheHeader =
        serde_json::from_str(line.trim_end()).map_err(|e| Error::InvalidData(format!("states cache header: {e}")))?;
    if header.format != CACHE_FORMAT {
        return Err(Error::InvalidData(format!("states cache format `{}` is not {CACHE_FORMAT}", header.format)));
    }
    if header.params_hash != expected.params_hash {
        return Err(Error::CacheMismatch { expected: expected.params_hash.clone(), found: header.params_hash });
    }
    if (header.cols, header.train_rows, header.test_rows) != (expected.cols, expected.train_rows, expected.test_rows) {
        return Err(Error::InvalidData(format!(
            "states cache shape {}x({}+{}) differs from expected {}x({}+{})",
            header.cols, header.train_rows, header.test_rows, expected.cols, expected.train_rows, expected.test_rows
        )));
    }
    let mut read = |rows: usize| -> Result<StateMatrix<T>> {
        let mut bytes = vec![0u8; rows * header.cols * 8];
        input.read_exact(&mut bytes)?;
        let data = bytes.chunks_exact(8).map(|c| T::lit(f64::from_le_bytes(c.try_into().unwrap()))).collect();
        StateMatrix::from_columns(rows, header.cols, data)
    };
    let train = read(header.train_rows)?;
    let test = read(header.test_rows)?;
    let mut rest = Vec::new();
    input.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::InvalidData(format!("states cache has {} trailing bytes", rest.len())));
    }
    Ok((train, test))
}
