use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::table::TextTable;
use super::{HarnessError, RunConfig};
use crate::baselines::{calibrate_idm_mae, idm_accel, IdmParams, IdmSample};
use crate::classifier::{tag_episode, StyleProfile, StyleStatistics};
use crate::container::Container;
use crate::env::rollout_csv;
use crate::regressor::{mae, split_dataset, train_regressor, Dataset, MlpModel, N_FEATURES};
use crate::sac::{self, ActionMode, AgentCheckpoint, EvalMetrics};
use crate::style::DrivingStyle;
use crate::trajectory::{
    extract_follow_episodes_with_tally, generate_synthetic_episode_with, parse_trace_file, EpisodeSource, EpisodeTrace,
    SchemaMap,
};

/// Pipeline stage that produces an artifact.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Ingest,
    Classify,
    TrainRegressor,
    CalibrateIdm,
    TrainAgent,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Ingest => "ingest",
            Stage::Classify => "classify",
            Stage::TrainRegressor => "train-regressor",
            Stage::CalibrateIdm => "calibrate-idm",
            Stage::TrainAgent => "train-agent",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutput {
    /// Files written, in write order.
    pub written: Vec<PathBuf>,
    pub summary: String,
}

#[derive(Serialize, Deserialize)]
struct Stamped<T> {
    config_hash: String,
    seed: u64,
    data: T,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ProfileRecord {
    file: String,
    driver_id: i64,
    source: String,
    profile: StyleProfile,
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    hash: String,
    out: PathBuf,
    models: PathBuf,
    written: Vec<PathBuf>,
}

impl<'a> Ctx<'a> {
    fn new(cfg: &'a RunConfig) -> Result<Self, HarnessError> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            hash: cfg.config_hash(),
            out: cfg.paths.output_dir.clone(),
            models: cfg.model_dir(),
            written: Vec::new(),
        })
    }

    fn header(&self) -> String {
        format!("config_hash={} seed={}", self.hash, self.cfg.seed)
    }

    fn preamble(&self) -> Vec<String> {
        vec![self.header()]
    }

    fn episodes_dir(&self) -> PathBuf {
        self.out.join("episodes")
    }

    fn styles_dir(&self) -> PathBuf {
        self.out.join("styles")
    }

    fn reports_dir(&self) -> PathBuf {
        self.out.join("reports")
    }

    fn write(&mut self, path: PathBuf, contents: &str) -> Result<(), HarnessError> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        }
        fs::write(&path, contents).map_err(|e| HarnessError::io(&path, e))?;
        self.written.push(path);
        Ok(())
    }

    /// Writes `body` under a `# config_hash=.. seed=..` line.
    fn write_stamped(&mut self, path: PathBuf, body: &str) -> Result<(), HarnessError> {
        let text = format!("# {}\n{body}", self.header());
        self.write(path, &text)
    }

    fn write_json<T: Serialize>(&mut self, path: PathBuf, data: &T) -> Result<(), HarnessError> {
        let s = Stamped {
            config_hash: self.hash.clone(),
            seed: self.cfg.seed,
            data,
        };
        let mut text = serde_json::to_string_pretty(&s).expect("serializable");
        text.push('\n');
        self.write(path, &text)
    }

    fn read_upstream(&self, path: &Path, stage: Stage) -> Result<String, HarnessError> {
        if !path.exists() {
            return Err(HarnessError::MissingUpstream {
                stage,
                path: path.to_path_buf(),
            });
        }
        fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))
    }

    fn read_json<T: DeserializeOwned>(&self, path: &Path, stage: Stage) -> Result<T, HarnessError> {
        let text = self.read_upstream(path, stage)?;
        let s: Stamped<T> = serde_json::from_str(&text).map_err(|e| HarnessError::data(path, e))?;
        Ok(s.data)
    }

    fn finish(self, summary: String) -> CommandOutput {
        CommandOutput {
            written: self.written,
            summary,
        }
    }

    fn regressor_path(&self, s: DrivingStyle) -> PathBuf {
        self.models.join(format!("regressor_{s}.aac"))
    }

    fn idm_path(&self, s: DrivingStyle) -> PathBuf {
        self.models.join(format!("idm_{s}.kv"))
    }

    fn agent_path(&self, s: DrivingStyle) -> PathBuf {
        self.models.join(format!("agent_{s}.aac"))
    }

    fn dataset_path(&self, s: DrivingStyle) -> PathBuf {
        self.styles_dir().join(format!("dataset_{s}.csv"))
    }

    fn load_store(&self) -> Result<Vec<(String, EpisodeTrace)>, HarnessError> {
        let manifest = self.episodes_dir().join("manifest.csv");
        let text = self.read_upstream(&manifest, Stage::Ingest)?;
        let mut out = Vec::new();
        for line in text.lines().filter(|l| !l.starts_with('#')).skip(1) {
            let file = line.split(',').nth(1).ok_or_else(|| HarnessError::data(&manifest, "malformed row"))?;
            let path = self.episodes_dir().join(file);
            let body = fs::read_to_string(&path).map_err(|e| HarnessError::io(&path, e))?;
            let ep = EpisodeTrace::from_csv(&body).map_err(|e| HarnessError::data(&path, e))?;
            out.push((file.to_string(), ep));
        }
        if out.is_empty() {
            return Err(HarnessError::EmptyStore(self.episodes_dir()));
        }
        Ok(out)
    }

    fn load_dataset(&self, s: DrivingStyle) -> Result<Dataset, HarnessError> {
        let path = self.dataset_path(s);
        let text = self.read_upstream(&path, Stage::Classify)?;
        Dataset::from_csv(&text).map_err(|e| HarnessError::data(&path, e))
    }

    fn load_regressor(&self, s: DrivingStyle) -> Result<MlpModel, HarnessError> {
        let path = self.regressor_path(s);
        let text = self.read_upstream(&path, Stage::TrainRegressor)?;
        let c = Container::parse(&text).map_err(|e| HarnessError::data(&path, e))?;
        MlpModel::from_container(&c).map_err(|e| HarnessError::data(&path, e))
    }

    fn load_idm(&self, s: DrivingStyle) -> Result<IdmParams, HarnessError> {
        let path = self.idm_path(s);
        let text = self.read_upstream(&path, Stage::CalibrateIdm)?;
        IdmParams::from_kv(&text, self.cfg.idm.reference).map_err(|e| HarnessError::data(&path, e))
    }

    fn load_agent(&self, s: DrivingStyle) -> Result<AgentCheckpoint, HarnessError> {
        let path = self.agent_path(s);
        let text = self.read_upstream(&path, Stage::TrainAgent)?;
        let c = Container::parse(&text).map_err(|e| HarnessError::data(&path, e))?;
        AgentCheckpoint::from_container(&c).map_err(|e| HarnessError::data(&path, e))
    }

    /// Episodes the classifier labelled `style`, split into training pool,
    /// checkpoint-selection and evaluation traces (in store order).
    fn agent_splits(&self, style: DrivingStyle) -> Result<[Vec<EpisodeTrace>; 3], HarnessError> {
        let profiles: Vec<ProfileRecord> = self.read_json(&self.styles_dir().join("profiles.json"), Stage::Classify)?;
        let store = self.load_store()?;
        let wanted: Vec<&str> = profiles.iter().filter(|p| p.profile.label == style).map(|p| p.file.as_str()).collect();
        let mut eps: Vec<EpisodeTrace> = store.into_iter().filter(|(f, _)| wanted.contains(&f.as_str())).map(|(_, e)| e).collect();
        let a = &self.cfg.agent;
        let need = a.pool_size + a.selection_size + a.eval_size;
        if eps.len() < need {
            return Err(HarnessError::NotEnoughEpisodes {
                style: style.to_string(),
                need,
                have: eps.len(),
            });
        }
        eps.truncate(need);
        let eval = eps.split_off(a.pool_size + a.selection_size);
        let selection = eps.split_off(a.pool_size);
        Ok([eps, selection, eval])
    }
}

fn csv_cell(s: &str) -> String {
    s.replace([',', '\n', '\r'], ";")
}

/// Seed of the `k`-th synthetic episode of `style` in a run.
fn synthetic_seed(run_seed: u64, style: DrivingStyle, k: usize) -> u64 {
    run_seed.wrapping_mul(1_000_000).wrapping_add(style.index() as u64 * 100_000).wrapping_add(k as u64)
}

/// Writes the episode store: synthetic episodes when `ingest.synthetic > 0`,
/// otherwise every `*.csv` trajectory file in the data directory.
pub fn cmd_ingest(cfg: &RunConfig) -> Result<CommandOutput, HarnessError> {
    let mut ctx = Ctx::new(cfg)?;
    let mut episodes: Vec<(String, EpisodeTrace)> = Vec::new();
    let mut recordings = String::from(
        "recording,status,episodes,no_leader,leader_missing,class,low_speed,non_positive_gap,too_short,invalid,error\n",
    );
    if cfg.ingest.synthetic > 0 {
        for style in cfg.style.styles() {
            for k in 0..cfg.ingest.synthetic {
                let seed = synthetic_seed(cfg.seed, style, k);
                let ep = generate_synthetic_episode_with(&cfg.ingest.generator, style, seed, cfg.ingest.synthetic_duration)
                    .map_err(|e| HarnessError::Config(e.to_string()))?;
                episodes.push((format!("synthetic:{style}"), ep));
            }
            recordings.push_str(&format!("synthetic:{style},ok,{},0,0,0,0,0,0,0,\n", cfg.ingest.synthetic));
        }
    } else {
        let dir = &cfg.paths.data_dir;
        let mut files: Vec<PathBuf> = match fs::read_dir(dir) {
            Ok(rd) => rd
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "csv"))
                .collect(),
            Err(_) => Vec::new(),
        };
        files.sort();
        if files.is_empty() {
            return Err(HarnessError::NoInput(format!(
                "no trajectory files in {} and no synthetic episodes requested",
                dir.display()
            )));
        }
        let schema = SchemaMap::highd();
        for f in &files {
            let name = f.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            let parsed = fs::read(f).map_err(|e| e.to_string()).and_then(|b| parse_trace_file(&b, &schema).map_err(|e| e.to_string()));
            match parsed {
                Ok(frames) => {
                    let (eps, t) = extract_follow_episodes_with_tally(&frames, &cfg.ingest.filter);
                    recordings.push_str(&format!(
                        "{},ok,{},{},{},{},{},{},{},{},\n",
                        csv_cell(&name),
                        eps.len(),
                        t.no_leader,
                        t.leader_missing,
                        t.class,
                        t.low_speed,
                        t.non_positive_gap,
                        t.too_short,
                        t.invalid
                    ));
                    episodes.extend(eps.into_iter().map(|e| (name.clone(), e)));
                }
                Err(msg) => recordings.push_str(&format!("{},error,0,0,0,0,0,0,0,0,{}\n", csv_cell(&name), csv_cell(&msg))),
            }
        }
    }

    let dir = ctx.episodes_dir();
    if dir.exists() {
        fs::remove_dir_all(&dir).map_err(|e| HarnessError::io(&dir, e))?;
    }
    let mut manifest = String::from("episode,file,recording,driver_id,source,steps,duration_s\n");
    for (i, (recording, ep)) in episodes.iter().enumerate() {
        let file = format!("ep_{i:05}.csv");
        let mut pre = ctx.preamble();
        pre.push(format!("recording={recording}"));
        ctx.write(dir.join(&file), &ep.to_csv(&pre))?;
        manifest.push_str(&format!(
            "{i},{file},{},{},{},{},{}\n",
            csv_cell(recording),
            ep.driver_id(),
            ep.source(),
            ep.len(),
            ep.duration()
        ));
    }
    ctx.write_stamped(dir.join("manifest.csv"), &manifest)?;
    ctx.write_stamped(dir.join("recordings.csv"), &recordings)?;
    let n = episodes.len();
    Ok(ctx.finish(format!("ingested {n} episodes into {}", dir.display())))
}

/// Labels every stored episode, writes per-style training datasets from the
/// per-step tags, and the style statistics.
pub fn cmd_classify(cfg: &RunConfig) -> Result<CommandOutput, HarnessError> {
    let mut ctx = Ctx::new(cfg)?;
    let store = ctx.load_store()?;
    let rules = &cfg.classify;
    let mut stats = StyleStatistics::default();
    let mut datasets: [Dataset; 3] = Default::default();
    let mut profiles = Vec::with_capacity(store.len());
    let (mut synthetic, mut agree) = (0usize, 0usize);
    for (file, ep) in &store {
        let profile = stats.add_episode(ep, rules);
        let tags = tag_episode(ep, rules);
        for (d, part) in datasets.iter_mut().zip(Dataset::partition_by_tags(ep, &tags)) {
            d.extend(&part);
        }
        if let EpisodeSource::Synthetic(s) = ep.source() {
            synthetic += 1;
            agree += (s == profile.label) as usize;
        }
        profiles.push(ProfileRecord {
            file: file.clone(),
            driver_id: ep.driver_id(),
            source: ep.source().to_string(),
            profile,
        });
    }
    let summary = stats.summary().map_err(|_| HarnessError::EmptyStore(ctx.episodes_dir()))?;
    let dir = ctx.styles_dir();
    ctx.write_json(dir.join("profiles.json"), &profiles)?;
    #[derive(Serialize)]
    struct Stats<'s> {
        summary: &'s crate::classifier::StatisticsSummary,
        synthetic_episodes: usize,
        label_agreement: Option<f64>,
        dataset_rows: [usize; 3],
    }
    let agreement = (synthetic > 0).then(|| agree as f64 / synthetic as f64);
    ctx.write_json(
        dir.join("statistics.json"),
        &Stats {
            summary: &summary,
            synthetic_episodes: synthetic,
            label_agreement: agreement,
            dataset_rows: [datasets[0].len(), datasets[1].len(), datasets[2].len()],
        },
    )?;
    ctx.write_stamped(dir.join("histograms.csv"), &stats.histograms_csv())?;
    for s in DrivingStyle::ALL {
        let body = datasets[s.index()].to_csv(&ctx.preamble());
        ctx.write(ctx.dataset_path(s), &body)?;
    }
    let labels: Vec<String> = DrivingStyle::ALL.iter().map(|s| format!("{s}={}", summary.driver_labels[s])).collect();
    Ok(ctx.finish(format!("classified {} episodes ({})", store.len(), labels.join(" "))))
}

pub fn cmd_train_regressor(cfg: &RunConfig) -> Result<CommandOutput, HarnessError> {
    let mut ctx = Ctx::new(cfg)?;
    let mut lines = Vec::new();
    for style in cfg.style.styles() {
        let data = ctx.load_dataset(style)?;
        let tc = cfg.regressor.resolve(style, cfg.seed);
        let (model, report) = train_regressor(&data, style, &tc).map_err(|e| HarnessError::data(&ctx.dataset_path(style), e))?;
        ctx.write(ctx.regressor_path(style), &model.to_container(&ctx.hash).render())?;
        let rep = ctx.reports_dir();
        ctx.write(rep.join(format!("regressor_{style}_epochs.csv")), &report.epochs_csv(&ctx.preamble()))?;
        ctx.write_json(rep.join(format!("regressor_{style}.json")), &report)?;
        lines.push(format!("{style}: test MAE {:.4} (best epoch {})", report.test_mae, report.best_epoch));
    }
    Ok(ctx.finish(lines.join("\n")))
}

fn idm_sample(f: &[f64; N_FEATURES], target: f64) -> IdmSample {
    let v = f[6];
    IdmSample {
        speed: v,
        approach_rate: v - f[5],
        gap: f[7] * v,
        target,
    }
}

fn idm_samples_of(d: &Dataset) -> Vec<IdmSample> {
    d.features.iter().zip(&d.targets).map(|(f, y)| idm_sample(f, *y)).collect()
}

fn idm_dataset_mae(p: &IdmParams, d: &Dataset) -> f64 {
    let pred: Vec<f64> = idm_samples_of(d)
        .iter()
        .map(|s| idm_accel(p, s.speed, s.approach_rate, s.gap).unwrap_or(-4.0))
        .collect();
    mae(&pred, &d.targets).unwrap_or(f64::NAN)
}

/// Fits IDM parameters on the training part of each style dataset.
pub fn cmd_calibrate_idm(cfg: &RunConfig) -> Result<CommandOutput, HarnessError> {
    let mut ctx = Ctx::new(cfg)?;
    let mut lines = Vec::new();
    for style in cfg.style.styles() {
        let data = ctx.load_dataset(style)?;
        let [train, _, test] = split_dataset(&data, &cfg.regressor.resolve(style, cfg.seed));
        let cal = calibrate_idm_mae(&idm_samples_of(&train), &cfg.idm.reference, &cfg.idm.bounds, &cfg.idm.calibration)
            .map_err(|e| HarnessError::data(&ctx.dataset_path(style), e))?;
        ctx.write_stamped(ctx.idm_path(style), &cal.params.to_kv())?;
        #[derive(Serialize)]
        struct IdmReport {
            style: DrivingStyle,
            params: IdmParams,
            train_mae: f64,
            start_mae: f64,
            test_mae: f64,
            reference_test_mae: f64,
            n_evals: usize,
        }
        let r = IdmReport {
            style,
            params: cal.params,
            train_mae: cal.mae,
            start_mae: cal.start_mae,
            test_mae: idm_dataset_mae(&cal.params, &test),
            reference_test_mae: idm_dataset_mae(&cfg.idm.reference, &test),
            n_evals: cal.n_evals,
        };
        lines.push(format!("{style}: calibrated IDM test MAE {:.4}", r.test_mae));
        ctx.write_json(ctx.reports_dir().join(format!("idm_{style}.json")), &r)?;
    }
    Ok(ctx.finish(lines.join("\n")))
}

pub fn cmd_train_agent(cfg: &RunConfig) -> Result<CommandOutput, HarnessError> {
    let mut ctx = Ctx::new(cfg)?;
    let mut lines = Vec::new();
    for style in cfg.style.styles() {
        let model = ctx.load_regressor(style)?;
        let [pool, selection, _] = ctx.agent_splits(style)?;
        let out = sac::train(&cfg.agent_hyperparams(), &cfg.agent.curriculum, &cfg.env, &model, &pool, &selection)
            .map_err(|e| HarnessError::Stage(format!("train-agent {style}: {e}")))?;
        ctx.write(ctx.agent_path(style), &out.best_checkpoint.to_container(&ctx.hash).render())?;
        let rep = ctx.reports_dir();
        let pre = ctx.preamble();
        ctx.write(rep.join(format!("agent_{style}_episodes.csv")), &out.log.episodes_csv(&pre))?;
        ctx.write(rep.join(format!("agent_{style}_evals.csv")), &out.log.evals_csv(&pre))?;
        let mut lam = String::from("episode,lambda\n");
        for (e, l) in out.log.lambda_trace() {
            lam.push_str(&format!("{e},{l}\n"));
        }
        ctx.write_stamped(rep.join(format!("agent_{style}_lambda.csv")), &lam)?;
        match &out.best_eval {
            Some(e) => lines.push(format!(
                "{style}: best checkpoint at episode {} (violation rate {:.3}, reward {:.1})",
                e.episode + 1,
                e.metrics.violation_rate,
                e.metrics.mean_reward
            )),
            None => lines.push(format!("{style}: no evaluation ran; kept the final agent")),
        }
    }
    Ok(ctx.finish(lines.join("\n")))
}

fn evaluate_style(
    ctx: &mut Ctx<'_>,
    style: DrivingStyle,
    agent: &AgentCheckpoint,
    model: &MlpModel,
) -> Result<EvalMetrics, HarnessError> {
    let [_, _, eval] = ctx.agent_splits(style)?;
    let env_cfg = ctx.cfg.env.with_rate_limit(true);
    let stage_err = |e: sac::SacError| HarnessError::Stage(format!("evaluate {style}: {e}"));
    let metrics = sac::evaluate(&agent.agent, &env_cfg, model, &eval).map_err(stage_err)?;
    let mut env = crate::env::CarFollowingEnv::new(env_cfg, model).map_err(|e| stage_err(e.into()))?;
    let dir = ctx.reports_dir().join("rollouts");
    for (k, tr) in eval.iter().enumerate() {
        let (rows, _) = sac::run_episode(&agent.agent, &mut env, tr, ActionMode::Deterministic, None).map_err(stage_err)?;
        let mut pre = ctx.preamble();
        pre.push(format!("style={style} trace={k} driver_id={}", tr.driver_id()));
        ctx.write(dir.join(format!("{style}_{k:02}.csv")), &rollout_csv(&rows, &pre))?;
    }
    Ok(metrics)
}

/// Deterministic evaluation of each trained agent on its held-out traces.
pub fn cmd_evaluate(cfg: &RunConfig) -> Result<CommandOutput, HarnessError> {
    let mut ctx = Ctx::new(cfg)?;
    let mut lines = Vec::new();
    for style in cfg.style.styles() {
        let agent = ctx.load_agent(style)?;
        let model = ctx.load_regressor(style)?;
        let m = evaluate_style(&mut ctx, style, &agent, &model)?;
        ctx.write_json(ctx.reports_dir().join(format!("evaluation_{style}.json")), &m)?;
        lines.push(format!(
            "{style}: RMSE {:.4}, violation rate {:.3}, min headway {:.3} s",
            m.rmse_vs_predictor, m.violation_rate, m.min_headway
        ));
    }
    Ok(ctx.finish(lines.join("\n")))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "absent".to_string(), |x| format!("{x:.4}"))
}

/// Comparison tables, rollouts and λ trajectories for whatever artifacts
/// exist.
pub fn cmd_report(cfg: &RunConfig) -> Result<CommandOutput, HarnessError> {
    let mut ctx = Ctx::new(cfg)?;
    let styles = cfg.style.styles();
    let mut mae_t = TextTable::new(&["style", "n_test", "dnn", "idm_mae", "idm"]);
    let mut rmse_t = TextTable::new(&["style", "rmse", "violation_rate", "min_headway", "mean_reward", "collisions"]);
    let mut lambda = String::from("style,episode,lambda\n");
    let mut found = false;
    for &style in &styles {
        let regressor = ctx.regressor_path(style).exists().then(|| ctx.load_regressor(style)).transpose()?;
        let idm = ctx.idm_path(style).exists().then(|| ctx.load_idm(style)).transpose()?;
        let agent = ctx.agent_path(style).exists().then(|| ctx.load_agent(style)).transpose()?;
        found |= regressor.is_some() || idm.is_some() || agent.is_some();
        if let Ok(data) = ctx.load_dataset(style) {
            let [_, _, test] = split_dataset(&data, &cfg.regressor.resolve(style, cfg.seed));
            if !test.is_empty() {
                let dnn = regressor.as_ref().map(|m| mae(&m.predict_batch(&test.features), &test.targets).unwrap_or(f64::NAN));
                let cal = idm.map(|p| idm_dataset_mae(&p, &test));
                let reference = idm_dataset_mae(&cfg.idm.reference, &test);
                mae_t.push(vec![style.to_string(), test.len().to_string(), fmt_opt(dnn), fmt_opt(cal), fmt_opt(Some(reference))]);
            }
        }
        match (&agent, &regressor) {
            (Some(a), Some(m)) => {
                let r = evaluate_style(&mut ctx, style, a, m)?;
                rmse_t.push(vec![
                    style.to_string(),
                    format!("{:.4}", r.rmse_vs_predictor),
                    format!("{:.4}", r.violation_rate),
                    format!("{:.3}", r.min_headway),
                    format!("{:.2}", r.mean_reward),
                    r.collisions.to_string(),
                ]);
            }
            _ => rmse_t.push(vec![style.to_string(), "absent".into(), "absent".into(), "absent".into(), "absent".into(), "absent".into()]),
        }
        let lam_path = ctx.reports_dir().join(format!("agent_{style}_lambda.csv"));
        if let Ok(text) = fs::read_to_string(&lam_path) {
            for row in text.lines().filter(|l| !l.starts_with('#')).skip(1) {
                lambda.push_str(&format!("{style},{row}\n"));
            }
        }
    }
    if !found {
        return Err(HarnessError::NothingToReport);
    }
    let rep = ctx.reports_dir();
    ctx.write_stamped(rep.join("mae_table.csv"), &mae_t.render_csv())?;
    ctx.write_stamped(rep.join("mae_table.txt"), &mae_t.render_text())?;
    ctx.write_stamped(rep.join("rmse_table.csv"), &rmse_t.render_csv())?;
    ctx.write_stamped(rep.join("rmse_table.txt"), &rmse_t.render_text())?;
    ctx.write_stamped(rep.join("lambda.csv"), &lambda)?;
    let text = format!(
        "Acceleration prediction MAE (m/s^2)\n{}\nAgent against regressor\n{}",
        mae_t.render_text(),
        rmse_t.render_text()
    );
    Ok(ctx.finish(text))
}
