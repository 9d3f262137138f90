use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use nlsdecay_core::observe::{self, ObservableSeries, ScatterReport};
use nlsdecay_core::ratefit::{self, RateComparison, SeriesSet, SupWeighted};
use nlsdecay_core::{evolve, Trajectory};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{self, config_hash, norm_request, Prepared, RunConfig};
use crate::error::{CliError, Result};
use crate::output::{self, Table};
use crate::snapshot;

/// `config.json`: the normalized configuration and its hash.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub config_hash: String,
    pub config: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotEntry {
    pub file: String,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub run_id: String,
    pub snapshot_format_version: u32,
    pub steps: usize,
    pub start_time: f64,
    pub end_time: f64,
    pub mass_drift: f64,
    pub energy_drift: f64,
    pub mass_excursion: f64,
    pub energy_excursion: f64,
    pub snapshots: Vec<SnapshotEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScatterFile {
    pub config_hash: String,
    pub probe_times: [f64; 2],
    pub cauchy_gap: f64,
    pub truncation_horizon: f64,
    pub strichartz_constant: Option<f64>,
    pub u_plus: String,
    pub convergence: String,
    pub tail: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DuhamelFile {
    pub config_hash: String,
    pub t: f64,
    pub boundaries: Vec<f64>,
    pub solution_l2: f64,
    pub linear_l2: f64,
    pub pieces_l2: Vec<f64>,
    pub residual: f64,
    pub relative_residual: f64,
    pub max_h4_norm: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateReportFile {
    pub config_hash: String,
    pub all_pass: bool,
    pub entries: Vec<RateComparison>,
    /// `sup_{t>0} t^ε d(t)` over the convergence series, when present.
    pub sup_weighted: Option<SupWeighted>,
}

fn check_hash(path: &Path, expected: &str, found: &str, force: bool) -> Result<()> {
    if expected == found {
        return Ok(());
    }
    if force {
        warn!("{}: config hash mismatch overridden by --force", path.display());
        return Ok(());
    }
    Err(CliError::HashMismatch {
        path: path.to_path_buf(),
        expected: expected.to_owned(),
        found: found.to_owned(),
    })
}

fn observables_table(series: &ObservableSeries, hash: &str) -> Table {
    let mut header = vec!["t"];
    header.extend(series.columns.iter().map(String::as_str));
    let mut table = Table::new(hash, &header);
    table.rows = series
        .times
        .iter()
        .zip(&series.rows)
        .map(|(&t, row)| std::iter::once(t).chain(row.iter().copied()).collect())
        .collect();
    table
}

/// Output directory: `--out` if given, else the config's `output`.
pub fn resolve_output(prepared: &Prepared, out: Option<&Path>) -> Result<PathBuf> {
    out.map(Path::to_path_buf)
        .or_else(|| prepared.config.output.clone())
        .ok_or_else(|| CliError::Config("no output directory: pass --out or set `output`".into()))
}

pub fn simulate(prepared: &Prepared, dir: &Path) -> Result<Manifest> {
    let hash = &prepared.hash;
    let snap_dir = dir.join(output::SNAPSHOT_DIR);
    fs::create_dir_all(&snap_dir).map_err(CliError::io(&snap_dir))?;
    for entry in fs::read_dir(&snap_dir).map_err(CliError::io(&snap_dir))? {
        let path = entry.map_err(CliError::io(&snap_dir))?.path();
        if path.extension().is_some_and(|e| e == "nlsf") {
            fs::remove_file(&path).map_err(CliError::io(&path))?;
        }
    }

    info!("simulating {} steps into {}", prepared.config.solver.steps(), dir.display());
    let traj = evolve(&prepared.initial, &prepared.config.solver)?;

    let mut snapshots = Vec::with_capacity(traj.snapshots().len());
    for (i, field) in traj.snapshots().iter().enumerate() {
        let file = output::snapshot_name(i);
        snapshot::write(&snap_dir.join(&file), field)?;
        snapshots.push(SnapshotEntry {
            file,
            time: field.time(),
        });
    }

    let series = observe::measure(&traj, &prepared.norms)?;
    observables_table(&series, hash).write(&dir.join(output::OBSERVABLES_FILE))?;

    let mut cons = Table::new(hash, &["step", "t", "mass", "energy"]);
    cons.rows = traj
        .conservation()
        .iter()
        .map(|r| vec![r.step as f64, r.time, r.mass, r.energy])
        .collect();
    cons.write(&dir.join(output::CONSERVATION_FILE))?;

    output::write_json(
        &dir.join(output::CONFIG_FILE),
        &ConfigEcho {
            config_hash: hash.clone(),
            config: prepared.config.clone(),
        },
    )?;
    let manifest = Manifest {
        config_hash: hash.clone(),
        run_id: prepared.config.run_id.clone(),
        snapshot_format_version: snapshot::VERSION,
        steps: prepared.config.solver.steps(),
        start_time: traj.start_time(),
        end_time: traj.end_time(),
        mass_drift: traj.mass_drift(),
        energy_drift: traj.energy_drift(),
        mass_excursion: traj.mass_excursion(),
        energy_excursion: traj.energy_excursion(),
        snapshots,
    };
    output::write_json(&dir.join(output::MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

/// A completed run directory with consistent hashes.
pub struct RunDir {
    pub dir: PathBuf,
    pub manifest: Manifest,
    /// Configuration used for measuring and fitting.
    pub config: RunConfig,
    pub hash: String,
}

impl RunDir {
    /// Opens `dir`; with `config_path`, that file replaces the stored
    /// configuration, but its hash must still match unless `force`.
    pub fn open(dir: &Path, config_path: Option<&Path>, force: bool) -> Result<Self> {
        let echo_path = dir.join(output::CONFIG_FILE);
        let echo: ConfigEcho = output::read_json(&echo_path)?;
        let stored = config_hash(&echo.config);
        check_hash(&echo_path, &echo.config_hash, &stored, force)?;
        let manifest_path = dir.join(output::MANIFEST_FILE);
        let manifest: Manifest = output::read_json(&manifest_path)?;
        check_hash(&manifest_path, &stored, &manifest.config_hash, force)?;

        let (config, hash) = match config_path {
            Some(path) => {
                let prepared = config::load(path)?;
                check_hash(path, &stored, &prepared.hash, force)?;
                (prepared.config, prepared.hash)
            }
            None => (echo.config, stored),
        };
        Ok(RunDir {
            dir: dir.to_path_buf(),
            manifest,
            config,
            hash,
        })
    }

    pub fn trajectory(&self) -> Result<Trajectory> {
        let snap_dir = self.dir.join(output::SNAPSHOT_DIR);
        let fields = self
            .manifest
            .snapshots
            .iter()
            .map(|entry| {
                let path = snap_dir.join(&entry.file);
                let field = snapshot::read(&path)?;
                if field.time().to_bits() != entry.time.to_bits() {
                    return Err(CliError::format(
                        &path,
                        format!("time stamp {} differs from manifest time {}", field.time(), entry.time),
                    ));
                }
                Ok(field)
            })
            .collect::<Result<Vec<_>>>()?;
        if fields.is_empty() {
            return Err(CliError::format(&self.dir, "run directory holds no snapshots"));
        }
        Ok(Trajectory::from_snapshots(fields)?)
    }

    fn table(&self, name: &str, force: bool) -> Result<Table> {
        let path = self.dir.join(name);
        let table = Table::read(&path)?;
        check_hash(&path, &self.hash, &table.config_hash, force)?;
        Ok(table)
    }
}

/// Names of the files `measure` wrote.
pub fn measure(run: &RunDir) -> Result<Vec<String>> {
    let traj = run.trajectory()?;
    let obs = &run.config.observe;
    let hash = &run.hash;
    let dir = &run.dir;
    let mut written = Vec::new();

    let norms = norm_request(obs).map_err(|e| CliError::Config(format!("observe.norms: {e}")))?;
    let series = observe::measure(&traj, &norms)?;
    observables_table(&series, hash).write(&dir.join(output::OBSERVABLES_FILE))?;
    written.push(output::OBSERVABLES_FILE.to_owned());

    if let Some([t1, t2]) = obs.probe_times {
        let report = ScatterReport::build(&traj, t1, t2, &obs.tail_s)?;
        let mut conv = Table::new(hash, &["t", "distance", "at_floor"]);
        conv.rows = report
            .convergence
            .iter()
            .map(|p| vec![p.t, p.distance, f64::from(u8::from(p.at_floor))])
            .collect();
        conv.write(&dir.join(output::CONVERGENCE_FILE))?;
        let mut tail = Table::new(hash, &["s", "tail"]);
        tail.rows = report.tail.iter().map(|&(s, v)| vec![s, v]).collect();
        tail.write(&dir.join(output::TAIL_FILE))?;
        snapshot::write(&dir.join(output::U_PLUS_FILE), &report.final_state.u_plus)?;
        output::write_json(
            &dir.join(output::SCATTER_FILE),
            &ScatterFile {
                config_hash: hash.clone(),
                probe_times: [t1, t2],
                cauchy_gap: report.final_state.cauchy_gap,
                truncation_horizon: report.truncation_horizon,
                strichartz_constant: report.strichartz_constant(),
                u_plus: output::U_PLUS_FILE.into(),
                convergence: output::CONVERGENCE_FILE.into(),
                tail: output::TAIL_FILE.into(),
            },
        )?;
        written.extend(
            [output::CONVERGENCE_FILE, output::TAIL_FILE, output::U_PLUS_FILE, output::SCATTER_FILE]
                .map(String::from),
        );
    }

    if let Some(d) = &obs.duhamel {
        let boundaries = d
            .resolve(traj.start_time())
            .map_err(|m| CliError::Config(format!("observe.duhamel: {m}")))?;
        let report = observe::duhamel_decompose(&traj, d.t, &boundaries)?;
        let solution = traj.at(d.t).expect("evaluation time checked by decompose");
        output::write_json(
            &dir.join(output::DUHAMEL_FILE),
            &DuhamelFile {
                config_hash: hash.clone(),
                t: report.t,
                boundaries: report.boundaries.clone(),
                solution_l2: nlsdecay_core::fields::norm_lp(solution, 2.0)?,
                linear_l2: nlsdecay_core::fields::norm_lp(&report.linear, 2.0)?,
                pieces_l2: report.piece_norms(),
                residual: report.residual,
                relative_residual: report.relative_residual,
                max_h4_norm: observe::max_h4_norm(&traj),
            },
        )?;
        written.push(output::DUHAMEL_FILE.to_owned());
    }
    Ok(written)
}

pub fn fit(run: &RunDir, force: bool) -> Result<RateReportFile> {
    let mut set = SeriesSet::default();
    let obs = run.table(output::OBSERVABLES_FILE, force)?;
    for name in obs.header.iter().skip(1) {
        set.series.insert(name.clone(), obs.series(name).expect("header column"));
    }

    let scatter_path = run.dir.join(output::SCATTER_FILE);
    let mut sup = None;
    if scatter_path.exists() {
        let scatter: ScatterFile = output::read_json(&scatter_path)?;
        check_hash(&scatter_path, &run.hash, &scatter.config_hash, force)?;
        let conv = run.table(&scatter.convergence, force)?.series("distance").ok_or_else(|| {
            CliError::format(run.dir.join(&scatter.convergence), "missing `distance` column")
        })?;
        let positive: Vec<(f64, f64)> = conv.iter().copied().filter(|p| p.0 > 0.0).collect();
        if !positive.is_empty() {
            sup = Some(ratefit::sup_weighted(&positive, run.config.fit.epsilon)?);
        }
        set.insert_convergence(conv, scatter.cauchy_gap);
        let tail = run.table(&scatter.tail, force)?;
        if !tail.rows.is_empty() {
            set.series.insert(
                "tail".into(),
                tail.series("tail")
                    .ok_or_else(|| CliError::format(run.dir.join(&scatter.tail), "missing `tail` column"))?,
            );
        }
    }

    let fit_cfg = &run.config.fit;
    let targets = match &fit_cfg.targets {
        Some(t) => t.clone(),
        None => ratefit::default_targets((fit_cfg.window[0], fit_cfg.window[1]))
            .into_iter()
            .filter(|t| set.series.contains_key(&t.series))
            .collect(),
    };
    let report = ratefit::rate_report(&set, &targets)?;
    let file = RateReportFile {
        config_hash: run.hash.clone(),
        all_pass: report.all_pass(),
        entries: report.entries,
        sup_weighted: sup,
    };
    output::write_json(&run.dir.join(output::RATE_REPORT_FILE), &file)?;
    Ok(file)
}

/// Runs simulate, measure and fit for each config in parallel. Each run
/// writes to `out/<run_id>` (or its own `output` when `out` is absent).
pub fn sweep(configs: &[PathBuf], out: Option<&Path>) -> Vec<(PathBuf, Result<PathBuf>)> {
    let prepared: Vec<Result<(Prepared, PathBuf)>> = configs
        .iter()
        .map(|path| {
            let p = config::load(path)?;
            let dir = match out {
                Some(root) => {
                    let name = if p.config.run_id.is_empty() {
                        path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
                    } else {
                        p.config.run_id.clone()
                    };
                    root.join(name)
                }
                None => resolve_output(&p, None)?,
            };
            Ok((p, dir))
        })
        .collect();

    let mut seen = BTreeSet::new();
    let prepared: Vec<Result<(Prepared, PathBuf)>> = prepared
        .into_iter()
        .map(|r| {
            r.and_then(|(p, dir)| {
                if seen.insert(dir.clone()) {
                    Ok((p, dir))
                } else {
                    Err(CliError::Config(format!("two runs share the output directory {}", dir.display())))
                }
            })
        })
        .collect();

    let results: Vec<Result<PathBuf>> = prepared
        .into_par_iter()
        .map(|r| {
            let (p, dir) = r?;
            simulate(&p, &dir)?;
            let run = RunDir::open(&dir, None, false)?;
            measure(&run)?;
            fit(&run, false)?;
            Ok(dir)
        })
        .collect();
    configs.iter().cloned().zip(results).collect()
}
