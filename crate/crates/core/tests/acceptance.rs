//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use adaptive_autopilot::baselines::{calibrate_idm_mae, idm_samples, CalibrationConfig, IdmBounds, IdmParams};
use adaptive_autopilot::classifier::{classify_driver, ClassifierObservation, RuleConfig};
use adaptive_autopilot::container::Container;
use adaptive_autopilot::env::{reward_comfort, reward_human, CarFollowingEnv, ComfortShape, EnvConfig};
use adaptive_autopilot::harness::{self, RunConfig, StyleSelection};
use adaptive_autopilot::kinematics::{step_motion, VehiclePoint};
use adaptive_autopilot::nn::{max_relative_error, numeric_gradient, Mlp};
use adaptive_autopilot::predictor::FollowWindow;
use adaptive_autopilot::regressor::{gradient_check, MlpModel, Scaler, N_FEATURES};
use adaptive_autopilot::sac::{
    evaluate, run_episode, train, ActionMode, AgentHyperparams, CmdpTransition, CurriculumPhase, CurriculumSchedule,
    LagrangeVariable, SacAgent, TrainOutcome,
};
use adaptive_autopilot::trajectory::{
    generate_synthetic_episode, generate_synthetic_episode_with, EpisodeSource, EpisodeTrace, SyntheticConfig,
    TraceStep,
};
use adaptive_autopilot::DrivingStyle;
use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const RATE_LIMIT: f64 = 0.24 + 1e-9;
const COST_LIMIT: f64 = 0.1;
/// Fine enough to place the aggressive mode relative to the 1 s mark.
const HEADWAY_BIN: f64 = 0.01;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

struct Suite {
    failures: usize,
}

impl Suite {
    fn run(&mut self, id: &str, budget: Option<Duration>, f: impl FnOnce() -> Check) {
        let t0 = Instant::now();
        let mut result = f();
        let elapsed = t0.elapsed();
        if let (Ok(detail), Some(b)) = (&result, budget) {
            if elapsed > b {
                result = Err(format!("{detail}; over the {:.0} s budget", b.as_secs_f64()));
            }
        }
        let (tag, detail) = match &result {
            Ok(d) => ("PASS", d),
            Err(d) => {
                self.failures += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} {id} [{:.1} s] {detail}", elapsed.as_secs_f64());
    }
}

fn c1_kinematics() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let rel = |got: f64, want: f64| (got - want).abs() / want.abs().max(1.0);
    let (mut worst, mut worst_half, mut stops) = (0.0f64, 0.0f64, 0usize);
    for _ in 0..1_000_000 {
        let p = VehiclePoint::new(rng.random_range(-1e3..1e3), rng.random_range(0.0..40.0), 0.0);
        let a: f64 = rng.random_range(-4.0..4.0);
        let dt: f64 = rng.random_range(1e-3..0.5);
        // Closed form, with the stop time when the speed would turn negative.
        let t = if a < 0.0 { dt.min(p.speed / -a) } else { dt };
        if t < dt {
            stops += 1;
        }
        let want_pos = p.pos + t * (p.speed + 0.5 * a * t);
        let want_speed = (p.speed + a * t).max(0.0);
        let q = step_motion(p, a, dt);
        worst = worst.max(rel(q.pos, want_pos)).max(rel(q.speed, want_speed));
        let h = step_motion(step_motion(p, a, dt / 2.0), a, dt / 2.0);
        worst_half = worst_half.max(rel(h.pos, q.pos)).max(rel(h.speed, q.speed));
    }
    ensure(worst <= 1e-12, || format!("closed-form relative error {worst:e}"))?;
    ensure(worst_half <= 1e-12, || format!("half-step relative error {worst_half:e}"))?;
    Ok(format!("10^6 steps ({stops} stopping), max rel err {worst:.1e}, half-step {worst_half:.1e}"))
}

fn c2_rewards() -> Check {
    ensure(reward_human(0.7, 0.7) == 1.0, || "r_h(0) != 1".into())?;
    let grid: Vec<f64> = (0..1000).map(|i| 4.0 * i as f64 / 999.0).collect();
    let rh: Vec<f64> = grid.iter().map(|x| reward_human(*x, 0.0)).collect();
    ensure(rh.windows(2).all(|w| w[1] < w[0]), || "r_h not strictly decreasing".into())?;
    let tail = -1.0 + 2.0 * (1.0 - 8.0f64.tanh());
    ensure((reward_human(4.0, 0.0) - tail).abs() <= 1e-6, || "r_h(4) outside band".into())?;
    let shape = ComfortShape::default();
    ensure(reward_comfort(0.0, &shape) == 0.0, || "r_c(0) != 0".into())?;
    ensure((reward_comfort(shape.c, &shape) + 0.5).abs() <= 1e-9, || "r_c(c) != -0.5".into())?;
    ensure((reward_comfort(-shape.c, &shape) + 0.5).abs() <= 1e-9, || "r_c(-c) != -0.5".into())?;
    let rc: Vec<f64> = (0..1000).map(|i| reward_comfort(i as f64 * 0.02, &shape)).collect();
    ensure(rc.windows(2).all(|w| w[1] < w[0]), || "r_c not strictly decreasing in |jerk|".into())?;

    // Breakdown invariants along a random-action rollout.
    let trace = generate_synthetic_episode(DrivingStyle::Normal, 7, 20.0).map_err(|e| e.to_string())?;
    let predictor = |_: &FollowWindow| 0.3;
    let mut env = CarFollowingEnv::new(EnvConfig::default(), &predictor).map_err(|e| e.to_string())?;
    env.reset(&trace).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut n = 0;
    while !env.is_done() {
        let r = env.step(rng.random_range(-4.0..4.0)).map_err(|e| e.to_string())?;
        let b = r.reward;
        ensure((-1.0..=1.0).contains(&b.r_h) && (-1.0..=0.0).contains(&b.r_c) && b.total == b.r_h + b.r_c, || {
            format!("breakdown out of bounds: {b:?}")
        })?;
        n += 1;
    }
    Ok(format!("grids monotone, r_h(4) = {:.9}, breakdown bounds hold over {n} env steps", reward_human(4.0, 0.0)))
}

fn random_batch(n: usize, rng: &mut ChaCha8Rng) -> Vec<CmdpTransition> {
    let st = |rng: &mut ChaCha8Rng| {
        [
            rng.random_range(-1.0..1.0),
            rng.random_range(0.5..2.0),
            rng.random_range(10.0..30.0),
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
            if rng.random::<bool>() { 1.0 } else { 0.0 },
        ]
    };
    (0..n)
        .map(|_| CmdpTransition {
            state: st(rng),
            action: rng.random_range(-3.9..3.9),
            reward: rng.random_range(-2.0..1.0),
            cost: if rng.random::<bool>() { 1.0 } else { 0.0 },
            next_state: st(rng),
            // Non-terminal: absorbing collision targets are ~1/(1-gamma) and
            // push the finite-difference rounding above the tolerance.
            done: false,
        })
        .collect()
}

fn normal_noise(n: usize, rng: &mut ChaCha8Rng) -> Array1<f64> {
    Array1::from_shape_simple_fn(n, || StandardNormal.sample(rng))
}

fn c3_gradients() -> Check {
    let mut worst: BTreeMap<&str, f64> = BTreeMap::new();
    let mut record = |k: &'static str, e: f64| {
        let w = worst.entry(k).or_insert(0.0);
        *w = w.max(e);
    };
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let net = Mlp::new(&[N_FEATURES, 12, 8, 1], &mut rng);
        let model = MlpModel::new(DrivingStyle::Normal, net, vec![], Scaler::identity(N_FEATURES), seed);
        let f: Vec<f64> = (0..N_FEATURES).map(|_| rng.random_range(-2.0..2.0)).collect();
        record("regressor", gradient_check(&model, &f, rng.random_range(-1.0..1.0)).map_err(|e| e.to_string())?);

        let hp = AgentHyperparams {
            actor_hidden: vec![8, 8],
            critic_hidden: vec![8, 8],
            seed,
            ..AgentHyperparams::default()
        };
        let scaler = Scaler {
            mean: vec![0.0, 1.2, 20.0, 0.0, 0.0, 0.0],
            std: vec![0.5, 0.3, 5.0, 1.0, 1.0, 1.0],
        };
        let agent = SacAgent::new(hp, scaler).map_err(|e| e.to_string())?;
        let batch = random_batch(16, &mut rng);
        let (yr, yc) = agent.targets(&batch, normal_noise(16, &mut rng));
        for (name, net, y) in [("critic q1", &agent.q1, &yr), ("critic q2", &agent.q2, &yr), ("cost critic", &agent.qc, &yc)] {
            let (_, g) = agent.critic_loss_and_grads(net, &batch, y);
            let num = numeric_gradient(&net.flat_params(), 1e-5, |p| {
                let mut m = net.clone();
                m.set_flat_params(p);
                agent.critic_loss_and_grads(&m, &batch, y).0
            });
            record(name, max_relative_error(&g.flat(), &num));
        }
        let states: Vec<_> = batch.iter().map(|t| t.state).collect();
        let noise = normal_noise(16, &mut rng);
        for lambda in [0.0, 0.4, 1.0] {
            let (_, g, _) = agent.actor_loss_and_grads(&states, noise.clone(), lambda);
            let mut probe = agent.clone();
            let num = numeric_gradient(&agent.actor.flat_params(), 1e-5, |p| {
                probe.actor.set_flat_params(p);
                probe.actor_loss_and_grads(&states, noise.clone(), lambda).0
            });
            record("actor", max_relative_error(&g.flat(), &num));
        }
        // Squashed log-density against the change-of-variables formula.
        let out = agent.actor.forward(ndarray::Array2::from_shape_fn((16, 6), |(i, j)| states[i][j] / 10.0).view());
        let s = SacAgent::sample_from_outputs(&out, noise.clone());
        for i in 0..16 {
            let sigma = s.log_std[i].exp();
            let u = s.mean[i] + sigma * noise[i];
            let gauss = (-0.5 * noise[i].powi(2)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt());
            let jac = 4.0 * (1.0 - u.tanh().powi(2));
            record("tanh log-prob", (s.log_prob[i] - (gauss / jac).ln()).abs());
        }
    }
    let detail = worst.iter().map(|(k, v)| format!("{k} {v:.1e}")).collect::<Vec<_>>().join(", ");
    let bad: Vec<_> = worst.iter().filter(|(_, v)| !(**v < 1e-4)).collect();
    ensure(bad.is_empty(), || format!("max rel err >= 1e-4: {detail}"))?;
    Ok(format!("10 seeds, max rel err: {detail}"))
}

fn read_table(path: &Path) -> Result<Vec<BTreeMap<String, String>>, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<String> = lines.next().ok_or("empty table")?.split(',').map(String::from).collect();
    Ok(lines
        .map(|l| header.iter().cloned().zip(l.split(',').map(String::from)).collect())
        .collect())
}

fn c4_regressor(out: &Path) -> Check {
    let mut cfg = RunConfig::default();
    cfg.seed = 1;
    cfg.style = StyleSelection::All;
    cfg.paths.output_dir = out.to_path_buf();
    cfg.paths.data_dir = out.join("no-data");
    cfg.ingest.synthetic = 200;
    cfg.ingest.synthetic_duration = 20.0;
    cfg.regressor.max_epochs = Some(25);
    let fail = |e: harness::HarnessError| e.to_string();
    harness::cmd_ingest(&cfg).map_err(fail)?;
    harness::cmd_classify(&cfg).map_err(fail)?;
    harness::cmd_train_regressor(&cfg).map_err(fail)?;
    harness::cmd_calibrate_idm(&cfg).map_err(fail)?;
    harness::cmd_report(&cfg).map_err(fail)?;
    let rows = read_table(&out.join("reports/mae_table.csv"))?;
    ensure(rows.len() == 3, || format!("{} MAE rows", rows.len()))?;
    let mut parts = Vec::new();
    for r in &rows {
        let num = |k: &str| r[k].parse::<f64>().map_err(|_| format!("{k} = {}", r[k]));
        let (dnn, cal, idm) = (num("dnn")?, num("idm_mae")?, num("idm")?);
        let style = &r["style"];
        parts.push(format!("{style}: dnn {dnn:.4} idm_mae {cal:.4} idm {idm:.4}"));
        ensure(dnn <= 0.10, || format!("{style} dnn MAE {dnn:.4} > 0.10"))?;
        ensure(dnn < cal && cal < idm, || format!("ordering broken: {}", parts.join("; ")))?;
    }
    Ok(parts.join("; "))
}

fn c5_idm_calibration() -> Check {
    let cfg = SyntheticConfig {
        noise_std: 0.0,
        ..SyntheticConfig::default()
    };
    let mut parts = Vec::new();
    for style in DrivingStyle::ALL {
        let mut samples = Vec::new();
        for k in 0..10 {
            let ep = generate_synthetic_episode_with(&cfg, style, 700 + k, 20.0).map_err(|e| e.to_string())?;
            samples.extend(idm_samples(&ep));
        }
        let cal = calibrate_idm_mae(&samples, &IdmParams::default(), &IdmBounds::default(), &CalibrationConfig::default())
            .map_err(|e| e.to_string())?;
        ensure(cal.mae <= 1e-2, || format!("{style}: calibrated MAE {:.2e}", cal.mae))?;
        parts.push(format!("{style} {:.1e} (T {:.3})", cal.mae, cal.params.time_gap));
    }
    Ok(format!("calibrated MAE: {}", parts.join(", ")))
}

fn histogram_mode(hist: &BTreeMap<i64, usize>) -> Result<f64, String> {
    let max = *hist.values().max().ok_or("empty histogram")?;
    let k = *hist.iter().find(|(_, c)| **c == max).expect("max exists").0;
    Ok((k as f64 + 0.5) * HEADWAY_BIN)
}

fn c6_classifier() -> Check {
    let rules = RuleConfig::default();
    let (mut agree, mut total) = (0usize, 0usize);
    // Headway histograms grouped by generating style and by driver label.
    let mut by_truth: [BTreeMap<i64, usize>; 3] = Default::default();
    let mut by_label: [BTreeMap<i64, usize>; 3] = Default::default();
    for style in DrivingStyle::ALL {
        for k in 0..100 {
            let ep = generate_synthetic_episode(style, 9000 + k, 20.0).map_err(|e| e.to_string())?;
            let label = classify_driver(&ep, &rules).label;
            total += 1;
            agree += usize::from(label == style);
            for obs in ep.steps().iter().filter_map(ClassifierObservation::from_step) {
                let bin = (obs.headway / HEADWAY_BIN).floor() as i64;
                *by_truth[style.index()].entry(bin).or_default() += 1;
                *by_label[label.index()].entry(bin).or_default() += 1;
            }
        }
    }
    let truth = by_truth.iter().map(histogram_mode).collect::<Result<Vec<_>, _>>()?;
    let labelled = by_label.iter().map(histogram_mode).collect::<Result<Vec<_>, _>>()?;
    let rate = agree as f64 / total as f64;
    ensure(rate >= 0.9, || format!("driver-label agreement {rate:.3}"))?;
    for (name, m) in [("generating style", &truth), ("driver label", &labelled)] {
        ensure(m[0] < m[1] && m[1] < m[2], || format!("headway modes by {name} not ordered: {m:?}"))?;
        ensure(m[0] < 1.0, || format!("aggressive mode by {name} {:.3} s not below 1 s", m[0]))?;
    }
    Ok(format!(
        "agreement {agree}/{total}; headway modes by generating style {:.3} < {:.3} < {:.3} s, by driver label {:.3} < {:.3} < {:.3} s",
        truth[0], truth[1], truth[2], labelled[0], labelled[1], labelled[2]
    ))
}

fn wide_gap_trace() -> EpisodeTrace {
    let steps = (0..150)
        .map(|i| {
            let x = 20.0 * 0.08 * i as f64;
            TraceStep {
                lead_pos: x + 400.0,
                lead_speed: 20.0,
                lead_accel: 0.0,
                ego_pos: x,
                ego_speed: 20.0,
                ego_accel: 0.0,
            }
        })
        .collect();
    EpisodeTrace::new(0.08, steps, 1, EpisodeSource::Recorded).expect("valid trace")
}

fn c7_lagrange() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let lr = AgentHyperparams::default().lagrange_lr;
    for _ in 0..1000 {
        let lv = LagrangeVariable::new(rng.random_range(-5.0..5.0));
        let b = rng.random_range(0.01..0.5);
        let hi = lv.update(rng.random_range(b..1.0), b, lr);
        let lo = lv.update(rng.random_range(0.0..b), b, lr);
        ensure(hi.lambda() > lv.lambda() && lo.lambda() < lv.lambda(), || {
            format!("direction violated at kappa {} b {b}", lv.kappa)
        })?;
    }
    let mut lv = LagrangeVariable::new(0.0);
    let mut k_iter = 0;
    while lv.lambda() >= 0.05 && k_iter < 200 {
        lv = lv.update(0.0, COST_LIMIT, lr);
        k_iter += 1;
    }
    ensure(lv.lambda() < 0.05, || "lambda did not decay with zero cost".into())?;

    // Same dynamics through the training loop on a cost-free pool.
    let hp = AgentHyperparams {
        actor_hidden: vec![8, 8],
        critic_hidden: vec![8, 8],
        batch_size: 32,
        replay_capacity: 50_000,
        random_episodes: 2,
        seed: 3,
        ..AgentHyperparams::default()
    };
    let sched = CurriculumSchedule {
        episodes: hp.random_episodes + 200,
        switch_episode: 100,
        eval_every: 0,
    };
    let predictor = |_: &FollowWindow| 0.0;
    let out = train(&hp, &sched, &EnvConfig::default(), &predictor, &[wide_gap_trace()], &[]).map_err(|e| e.to_string())?;
    ensure(out.log.episodes.iter().all(|e| e.mean_cost == 0.0), || "toy pool produced cost".into())?;
    let trace = out.log.lambda_trace();
    let first = trace.iter().position(|(_, l)| *l < 0.05).ok_or("training lambda never below 0.05")?;
    let updates = first + 1 - hp.random_episodes;
    ensure(updates <= 200, || format!("{updates} updates"))?;
    Ok(format!("1000 pairs monotone; lambda < 0.05 after {k_iter} updates, {updates} in training"))
}

struct C8Runs {
    constrained: TrainOutcome,
    ablation: TrainOutcome,
    predictor: MlpModel,
    test: Vec<EpisodeTrace>,
}

fn c8_constraint(c4_out: &Path, runs: &mut Option<C8Runs>) -> Check {
    let path = c4_out.join("models/regressor_aggressive.aac");
    let text = fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    let predictor = Container::parse(&text)
        .map_err(|e| e.to_string())
        .and_then(|c| MlpModel::from_container(&c).map_err(|e| e.to_string()))?;
    let style = DrivingStyle::Aggressive;
    let gen = |start: u64| -> Result<Vec<EpisodeTrace>, String> {
        (start..start + 10).map(|s| generate_synthetic_episode(style, s, 20.0).map_err(|e| e.to_string())).collect()
    };
    let (pool, selection, test) = (gen(1000)?, gen(2000)?, gen(3000)?);
    let env = EnvConfig::default();
    let sched = CurriculumSchedule::default();
    let run = |cost_enabled: bool| {
        let hp = AgentHyperparams {
            actor_hidden: vec![32, 32],
            critic_hidden: vec![32, 32],
            cost_enabled,
            // Aim the multiplier below the budget: per-trace violations are
            // all-or-nothing, so a policy tuned to exactly b misses it on
            // held-out traces about half the time.
            cost_margin: 0.05,
            seed: 1,
            ..AgentHyperparams::default()
        };
        train(&hp, &sched, &env, &predictor, &pool, &selection).map_err(|e| e.to_string())
    };
    let constrained = run(true)?;
    let ablation = run(false)?;
    let m = evaluate(&constrained.best_checkpoint.agent, &env, &predictor, &test).map_err(|e| e.to_string())?;
    let a = evaluate(&ablation.best_checkpoint.agent, &env, &predictor, &test).map_err(|e| e.to_string())?;
    let detail = format!(
        "{} episodes; held-out violation {:.3}, min headway {:.3} s, reward {:.1}; ablation violation {:.3}, min headway {:.3} s, collisions {}",
        sched.episodes, m.violation_rate, m.min_headway, m.mean_reward, a.violation_rate, a.min_headway, a.collisions
    );
    *runs = Some(C8Runs {
        constrained,
        ablation,
        predictor,
        test,
    });
    ensure(m.violation_rate <= COST_LIMIT, || format!("violation above b: {detail}"))?;
    ensure(m.min_headway >= 0.95, || format!("min headway below 0.95 s: {detail}"))?;
    ensure(a.violation_rate > m.violation_rate, || format!("ablation not worse: {detail}"))?;
    Ok(detail)
}

fn c9_rate_limit(runs: &Option<C8Runs>) -> Check {
    let runs = runs.as_ref().ok_or("no trained agents from C8")?;
    let env = EnvConfig::default().with_rate_limit(true);
    let (mut episodes, mut rollouts, mut worst) = (0usize, 0usize, 0.0f64);
    for out in [&runs.constrained, &runs.ablation] {
        for e in out.log.episodes.iter().filter(|e| e.phase == CurriculumPhase::RateLimited) {
            episodes += 1;
            worst = worst.max(e.max_action_delta);
        }
        for e in &out.log.evals {
            worst = worst.max(e.metrics.max_action_delta);
        }
        let mut sim = CarFollowingEnv::new(env.clone(), &runs.predictor).map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trace in &runs.test {
            for mode in [ActionMode::Deterministic, ActionMode::Stochastic] {
                let (rows, _) =
                    run_episode(&out.best_checkpoint.agent, &mut sim, trace, mode, Some(&mut rng)).map_err(|e| e.to_string())?;
                rollouts += 1;
                for w in rows.windows(2) {
                    worst = worst.max((w[1].ego_accel_applied - w[0].ego_accel_applied).abs());
                }
            }
        }
    }
    ensure(episodes > 0, || "no rate-limited episodes logged".into())?;
    ensure(worst <= RATE_LIMIT, || format!("max consecutive action change {worst}"))?;
    Ok(format!("{episodes} training episodes, {rollouts} held-out rollouts, max change {worst:.6} m/s^2"))
}

fn small_pipeline(out: &Path) -> RunConfig {
    let mut c = RunConfig::default();
    c.seed = 11;
    c.paths.output_dir = out.to_path_buf();
    c.paths.data_dir = out.join("no-data");
    c.ingest.synthetic = 8;
    c.ingest.synthetic_duration = 12.0;
    c.regressor.max_epochs = Some(3);
    c.regressor.hidden = Some(vec![16, 16]);
    c.idm.calibration.grid_points = 2;
    c.idm.calibration.simplex_iterations = 20;
    let hp = &mut c.agent.hyperparams;
    hp.actor_hidden = vec![8, 8];
    hp.critic_hidden = vec![8, 8];
    hp.batch_size = 32;
    hp.replay_capacity = 10_000;
    hp.random_episodes = 2;
    c.agent.curriculum.episodes = 6;
    c.agent.curriculum.switch_episode = 3;
    c.agent.curriculum.eval_every = 3;
    c.agent.pool_size = 2;
    c.agent.selection_size = 1;
    c.agent.eval_size = 2;
    c
}

fn files_under(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).into_iter().flatten().flatten() {
            let p = e.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(dir).expect("under dir").to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn c10_determinism() -> Check {
    let dirs = [tempfile::tempdir().map_err(|e| e.to_string())?, tempfile::tempdir().map_err(|e| e.to_string())?];
    for d in &dirs {
        let cfg = small_pipeline(d.path());
        let steps: [fn(&RunConfig) -> Result<harness::CommandOutput, harness::HarnessError>; 7] = [
            harness::cmd_ingest,
            harness::cmd_classify,
            harness::cmd_train_regressor,
            harness::cmd_calibrate_idm,
            harness::cmd_train_agent,
            harness::cmd_evaluate,
            harness::cmd_report,
        ];
        for step in steps {
            step(&cfg).map_err(|e| e.to_string())?;
        }
    }
    let (a, b) = (files_under(dirs[0].path()), files_under(dirs[1].path()));
    ensure(!a.is_empty() && a == b, || "different file sets".into())?;
    for f in &a {
        let x = fs::read(dirs[0].path().join(f)).map_err(|e| e.to_string())?;
        let y = fs::read(dirs[1].path().join(f)).map_err(|e| e.to_string())?;
        ensure(x == y, || format!("{} differs", f.display()))?;
    }
    Ok(format!("{} files byte-identical across two full pipeline runs", a.len()))
}

fn main() {
    let mut suite = Suite { failures: 0 };
    let secs = Duration::from_secs;
    suite.run("C1 kinematics exactness", Some(secs(5)), c1_kinematics);
    suite.run("C2 reward shapes", Some(secs(1)), c2_rewards);
    suite.run("C3 gradient oracle", Some(secs(30)), c3_gradients);
    let c4_dir = tempfile::tempdir().expect("temp dir");
    suite.run("C4 regressor oracle", Some(secs(600)), || c4_regressor(c4_dir.path()));
    suite.run("C5 IDM-MAE calibration", Some(secs(120)), c5_idm_calibration);
    suite.run("C6 classifier oracle", Some(secs(120)), c6_classifier);
    suite.run("C7 Lagrange dynamics", None, c7_lagrange);
    let mut runs = None;
    suite.run("C8 constraint satisfaction", Some(secs(1800)), || c8_constraint(c4_dir.path(), &mut runs));
    suite.run("C9 rate-limit invariant", None, || c9_rate_limit(&runs));
    suite.run("C10 determinism", None, c10_determinism);
    if suite.failures > 0 {
        println!("{} criterion(s) failed", suite.failures);
        std::process::exit(1);
    }
}
