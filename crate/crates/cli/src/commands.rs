//! The five subcommands.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use pathnas::oracle::FitnessLandscape;
use pathnas::search::{
    ea_search, path_priority_search, random_search, write_evaluation_log, EvalRecord, Evaluator,
    SearchMethod,
};
use pathnas::supernet::{Batch, SupernetEvaluator, ToyTask, TrainingRun};
use pathnas::{Architecture, Landscape, Supernet};
use sha2::{Digest, Sha256};

use crate::config::{EvaluatorKind, ExperimentConfig, LoadedConfig};
use crate::error::{CliError, CliResult};
use crate::report::{
    self, LeaderboardSnapshot, Optimum, SearchReport, SearchRun, TrainReport, TrainRun,
    TransferReport, TransferRun, REPORT_FORMAT, REPORT_VERSION,
};

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> CliResult<()> {
    fs::write(path, bytes)
        .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))
}

/// `<output_dir>/<command>-<hash prefix>`, created if missing.
fn run_dir(loaded: &LoadedConfig, command: &str, salt: &str) -> CliResult<PathBuf> {
    let hash = loaded.config.content_hash(&format!("{command}\n{salt}"));
    let dir = loaded
        .output_dir()
        .join(format!("{command}-{}", &hash[..16]));
    fs::create_dir_all(&dir)
        .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

/// Fitness source of one seed.
enum BuiltEvaluator {
    Oracle {
        landscape: Landscape,
        document: String,
    },
    Supernet {
        state: Box<Supernet>,
        val: Vec<Batch<f64>>,
        fingerprint: String,
    },
}

impl BuiltEvaluator {
    fn fingerprint(&self) -> String {
        match self {
            Self::Oracle { document, .. } => sha256_hex(document.as_bytes()),
            Self::Supernet { fingerprint, .. } => fingerprint.clone(),
        }
    }

    fn landscape(&self) -> Option<&Landscape> {
        match self {
            Self::Oracle { landscape, .. } => Some(landscape),
            Self::Supernet { .. } => None,
        }
    }
}

impl Evaluator<f64> for BuiltEvaluator {
    fn evaluate(&self, arch: &Architecture) -> pathnas::Result<f64> {
        match self {
            Self::Oracle { landscape, .. } => landscape.fitness(arch),
            Self::Supernet { state, val, .. } => SupernetEvaluator {
                state,
                batches: val,
            }
            .evaluate(arch),
        }
    }
}

fn build_landscape(loaded: &LoadedConfig, seed: u64) -> CliResult<Landscape> {
    let o = &loaded.config.evaluator.oracle;
    let mut landscape = match &o.file {
        Some(file) => {
            let path = loaded.resolve(file);
            let text = fs::read_to_string(&path).map_err(|e| {
                CliError::runtime(format!("missing landscape {}: {e}", path.display()))
            })?;
            FitnessLandscape::from_json(&text)
                .map_err(|e| CliError::runtime(format!("bad landscape {}: {e}", path.display())))?
        }
        None => FitnessLandscape::generate(
            &loaded.space,
            o.landscape,
            o.seed.unwrap_or(seed),
            &o.params(),
        )?,
    };
    if !landscape.matches_space(&loaded.space) {
        return Err(CliError::config(
            "landscape does not match the configured space",
        ));
    }
    if let Some(noise_seed) = o.noise_seed {
        let mut doc = landscape.to_document();
        doc.seed = noise_seed;
        landscape = FitnessLandscape::from_document(&doc)?;
    }
    Ok(landscape)
}

fn load_checkpoint(loaded: &LoadedConfig) -> CliResult<(TrainingRun<f64>, String)> {
    let path = loaded
        .config
        .evaluator
        .supernet
        .checkpoint
        .as_ref()
        .map(|p| loaded.resolve(p))
        .ok_or_else(|| CliError::config("evaluator.supernet.checkpoint is required"))?;
    let bytes = fs::read(&path)
        .map_err(|e| CliError::runtime(format!("missing checkpoint {}: {e}", path.display())))?;
    let run = TrainingRun::<f64>::from_bytes(&bytes)?;
    if run.state().space().shape() != loaded.space.shape() {
        return Err(CliError::config(
            "checkpoint does not match the configured space",
        ));
    }
    Ok((run, sha256_hex(&bytes)))
}

fn build_evaluator(loaded: &LoadedConfig, seed: u64) -> CliResult<BuiltEvaluator> {
    match loaded.config.evaluator.kind {
        EvaluatorKind::Oracle => {
            let landscape = build_landscape(loaded, seed)?;
            let document = landscape.to_json()?;
            Ok(BuiltEvaluator::Oracle {
                landscape,
                document,
            })
        }
        EvaluatorKind::Supernet => {
            let (run, fingerprint) = load_checkpoint(loaded)?;
            let task = ToyTask::<f64>::generate(run.task_config())?;
            Ok(BuiltEvaluator::Supernet {
                state: Box::new(run.into_state()),
                val: task.val().to_vec(),
                fingerprint,
            })
        }
    }
}

fn optimum(loaded: &LoadedConfig, evaluator: &BuiltEvaluator) -> CliResult<Option<Optimum>> {
    let cap = loaded.config.enumeration_cap;
    match evaluator.landscape() {
        Some(l) if loaded.space.space_size() <= cap.into() => {
            let (architecture, fitness) = l.brute_force_optimum(cap)?;
            Ok(Some(Optimum {
                architecture,
                fitness,
            }))
        }
        _ => Ok(None),
    }
}

fn evaluator_name(config: &ExperimentConfig) -> String {
    match config.evaluator.kind {
        EvaluatorKind::Oracle => format!("oracle:{}", config.evaluator.oracle.landscape),
        EvaluatorKind::Supernet => "supernet".to_string(),
    }
}

fn log_csv(records: &[EvalRecord<f64>]) -> CliResult<Vec<u8>> {
    let mut out = Vec::new();
    write_evaluation_log(&mut out, records)?;
    Ok(out)
}

pub fn search(config: &Path, seed: Option<u64>) -> CliResult<PathBuf> {
    let start = Instant::now();
    let loaded = LoadedConfig::load(config, seed)?;
    let cfg = &loaded.config;
    let space = &loaded.space;
    let dir = run_dir(&loaded, "search", "")?;
    let mut runs = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let evaluator = build_evaluator(&loaded, seed)?;
        let (best, best_fitness, log, fairness, leaderboard) = match cfg.method.name {
            SearchMethod::PathPriority => {
                let budget = cfg.search_budget(space)?;
                let out = path_priority_search(
                    space,
                    &evaluator,
                    budget,
                    seed,
                    &cfg.path_priority_options(),
                )?;
                let best = out.selection.architecture.clone();
                let fitness = evaluator.evaluate(&best)?;
                write_file(
                    &dir.join(format!("leaderboard-seed-{seed}.txt")),
                    out.leaderboard.to_text(space),
                )?;
                let snapshot = LeaderboardSnapshot {
                    cycles: out.leaderboard.cycles(),
                    scores: out.leaderboard.scores().to_vec(),
                    occurrences: out.leaderboard.occurrences().to_vec(),
                    tied_layers: out.selection.tied_layers.clone(),
                };
                (best, fitness, out.log, Some(out.fairness), Some(snapshot))
            }
            SearchMethod::Ea => {
                let out = ea_search(space, &evaluator, &cfg.ea_config(), seed)?;
                (out.best, out.best_fitness, out.log, None, None)
            }
            SearchMethod::Random => {
                let out = random_search(
                    space,
                    &evaluator,
                    cfg.method.random.evaluations,
                    seed,
                    cfg.parallelism,
                )?;
                (out.best, out.best_fitness, out.log, None, None)
            }
        };
        let log_name = format!("evaluations-seed-{seed}.csv");
        write_file(&dir.join(&log_name), log_csv(&log)?)?;
        let landscape = match &evaluator {
            BuiltEvaluator::Oracle { document, .. } => {
                let name = format!("landscape-seed-{seed}.json");
                write_file(&dir.join(&name), document)?;
                Some(name)
            }
            BuiltEvaluator::Supernet { .. } => None,
        };
        let optimum = optimum(&loaded, &evaluator)?;
        runs.push(SearchRun {
            seed,
            evaluator_fingerprint: evaluator.fingerprint(),
            found_optimum: optimum.as_ref().map(|o| best_fitness >= o.fitness),
            optimum,
            best_architecture: best,
            best_fitness,
            evaluations: log.len(),
            fairness,
            leaderboard,
            evaluation_log: log_name,
            landscape,
        });
    }
    let report = SearchReport {
        format: REPORT_FORMAT.into(),
        version: REPORT_VERSION,
        command: "search".into(),
        config: cfg.clone(),
        space_size: space.space_size().to_string(),
        evaluator: evaluator_name(cfg),
        method: cfg.method.name,
        budget: cfg.declared_budget(space)?,
        runs,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    };
    let path = dir.join("report.json");
    report::write(&path, &report)?;
    Ok(path)
}

/// Trains one supernet per seed up to `macro_steps`; returns checkpoint
/// paths. With `resume`, training continues from that checkpoint.
pub fn train_supernet(
    config: &Path,
    seed: Option<u64>,
    resume: Option<&Path>,
) -> CliResult<Vec<PathBuf>> {
    let start = Instant::now();
    let loaded = LoadedConfig::load(config, seed)?;
    let cfg = &loaded.config;
    if cfg.evaluator.kind != EvaluatorKind::Supernet {
        return Err(CliError::config(
            "train-supernet needs evaluator.kind = \"supernet\"",
        ));
    }
    if resume.is_some() && cfg.seeds.len() != 1 {
        return Err(CliError::config("--resume needs exactly one seed"));
    }
    let section = &cfg.evaluator.supernet;
    let task = ToyTask::<f64>::generate(&section.task)?;
    let dir = run_dir(&loaded, "train-supernet", "")?;
    let mut runs = Vec::new();
    let mut paths = Vec::new();
    let mut parameter_count = 0;
    for &seed in &cfg.seeds {
        let supernet_config = section.supernet_config(seed);
        let mut run = match resume {
            Some(path) => {
                let bytes = fs::read(path).map_err(|e| {
                    CliError::runtime(format!("missing checkpoint {}: {e}", path.display()))
                })?;
                let run = TrainingRun::<f64>::from_bytes(&bytes)?;
                let s = run.state();
                if s.space() != &loaded.space
                    || s.config() != supernet_config
                    || run.task_config() != &section.task
                {
                    return Err(CliError::config("checkpoint does not match the config"));
                }
                if s.macro_steps() > section.macro_steps {
                    return Err(CliError::config(format!(
                        "checkpoint already has {} macro-steps, config asks for {}",
                        s.macro_steps(),
                        section.macro_steps
                    )));
                }
                run
            }
            None => TrainingRun::new(&loaded.space, &section.task, &supernet_config)?,
        };
        let remaining = section.macro_steps - run.state().macro_steps();
        let summary = run.train(&task, remaining)?;
        parameter_count = run.state().parameter_count();
        let name = format!("checkpoint-seed-{seed}.bin");
        let path = dir.join(&name);
        write_file(&path, run.to_bytes()?)?;
        let fair = summary
            .update_counts
            .iter()
            .all(|row| row.iter().all(|&c| c == row[0]));
        runs.push(TrainRun {
            seed,
            checkpoint: name,
            macro_steps: summary.macro_steps,
            accumulation_window: summary.accumulation_window,
            update_counts: summary.update_counts,
            fair,
            fairness: summary.fairness,
            losses: summary.losses,
        });
        paths.push(path);
    }
    let report = TrainReport {
        format: REPORT_FORMAT.into(),
        version: REPORT_VERSION,
        command: "train-supernet".into(),
        config: cfg.clone(),
        parameter_count,
        runs,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    };
    report::write(&dir.join("report.json"), &report)?;
    Ok(paths)
}

/// Comparison table over search reports.
pub fn compare(reports: &[PathBuf]) -> CliResult<String> {
    if reports.len() < 2 {
        return Err(CliError::config("need at least two runs"));
    }
    let parsed: Vec<SearchReport> = reports
        .iter()
        .map(|p| report::read(p))
        .collect::<CliResult<_>>()?;
    let key = |r: &SearchReport| -> Vec<(u64, String)> {
        r.runs
            .iter()
            .map(|s| (s.seed, s.evaluator_fingerprint.clone()))
            .collect()
    };
    let reference = key(&parsed[0]);
    if parsed.iter().any(|r| key(r) != reference) {
        return Err(CliError::config("evaluator mismatch"));
    }
    let mut out = format!(
        "{:<14} {:>8} {:>12} {:>12} {:>9}\n",
        "method", "budget", "mean_best", "std_best", "win_rate"
    );
    for r in &parsed {
        let best: Vec<f64> = r.runs.iter().map(|s| s.best_fitness).collect();
        let (mean, std) = pathnas::stats::mean_std(&best);
        let wins: Option<Vec<bool>> = r.runs.iter().map(|s| s.found_optimum).collect();
        let win_rate = match wins {
            Some(w) if !w.is_empty() => {
                format!(
                    "{:.3}",
                    w.iter().filter(|&&b| b).count() as f64 / w.len() as f64
                )
            }
            _ => "n/a".to_string(),
        };
        out.push_str(&format!(
            "{:<14} {:>8} {:>12.6} {:>12.6} {:>9}\n",
            r.method.to_string(),
            r.budget,
            mean,
            std,
            win_rate
        ));
    }
    Ok(out)
}

/// Searches on the source landscape, scores the pick on the target and
/// contrasts it with a native search on the target.
pub fn transfer(source: &Path, target: &Path, seed: Option<u64>) -> CliResult<PathBuf> {
    let start = Instant::now();
    let src = LoadedConfig::load(source, seed)?;
    let tgt = LoadedConfig::load(target, seed)?;
    if src.config.evaluator.kind != EvaluatorKind::Oracle
        || tgt.config.evaluator.kind != EvaluatorKind::Oracle
    {
        return Err(CliError::config("transfer needs oracle evaluators"));
    }
    if src.space.shape() != tgt.space.shape() {
        return Err(CliError::config("space mismatch"));
    }
    let src_budget = src.config.search_budget(&src.space)?;
    let tgt_budget = tgt.config.search_budget(&tgt.space)?;
    let dir = run_dir(&src, "transfer", &tgt.config.content_hash("target"))?;
    let mut runs = Vec::new();
    for &seed in &src.config.seeds {
        let source_landscape = build_landscape(&src, seed)?;
        let target_landscape = build_landscape(&tgt, seed)?;
        write_file(
            &dir.join(format!("source-landscape-seed-{seed}.json")),
            source_landscape.to_json()?,
        )?;
        write_file(
            &dir.join(format!("target-landscape-seed-{seed}.json")),
            target_landscape.to_json()?,
        )?;
        let on_source = path_priority_search(
            &src.space,
            &source_landscape,
            src_budget,
            seed,
            &src.config.path_priority_options(),
        )?;
        let native = path_priority_search(
            &tgt.space,
            &target_landscape,
            tgt_budget,
            seed,
            &tgt.config.path_priority_options(),
        )?;
        let source_selection = on_source.selection.architecture;
        let native_selection = native.selection.architecture;
        let transfer_fitness = target_landscape.fitness(&source_selection)?;
        let native_fitness = target_landscape.fitness(&native_selection)?;
        let target_optimum = if tgt.space.space_size() <= tgt.config.enumeration_cap.into() {
            let (architecture, fitness) =
                target_landscape.brute_force_optimum(tgt.config.enumeration_cap)?;
            Some(Optimum {
                architecture,
                fitness,
            })
        } else {
            None
        };
        runs.push(TransferRun {
            seed,
            source_fitness: source_landscape.fitness(&source_selection)?,
            source_selection,
            transfer_fitness,
            native_selection,
            native_fitness,
            gap: native_fitness - transfer_fitness,
            target_optimum,
        });
    }
    let mean_gap = runs.iter().map(|r| r.gap).sum::<f64>() / runs.len() as f64;
    let report = TransferReport {
        format: REPORT_FORMAT.into(),
        version: REPORT_VERSION,
        command: "transfer".into(),
        source: src.config.clone(),
        target: tgt.config.clone(),
        runs,
        mean_gap,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    };
    let path = dir.join("report.json");
    report::write(&path, &report)?;
    Ok(path)
}

/// One JSON line per seed with the fitness of `arch`.
pub fn eval_arch(config: &Path, arch: &str, seed: Option<u64>) -> CliResult<Vec<String>> {
    let loaded = LoadedConfig::load(config, seed)?;
    let arch: Architecture = arch.parse()?;
    if !loaded.space.validate(&arch) {
        return Err(CliError::config(format!(
            "architecture {arch} does not fit the configured space"
        )));
    }
    loaded
        .config
        .seeds
        .iter()
        .map(|&seed| {
            let evaluator = build_evaluator(&loaded, seed)?;
            let fitness = evaluator.evaluate(&arch)?;
            Ok(serde_json::json!({
                "seed": seed,
                "architecture": arch.to_string(),
                "fitness": fitness,
                "evaluator_fingerprint": evaluator.fingerprint(),
            })
            .to_string())
        })
        .collect()
}
