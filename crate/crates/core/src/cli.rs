//! Command-line front end.
//!
//! Every command writes its data files plus a `config.json` holding the fully
//! resolved parameters and the tool version. The worker count is deliberately
//! left out of the config: results do not depend on it.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use anyhow::{bail, ensure, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::correlations::{
    gamma_indistinguishable, gamma_partial, two_particle_oracle, BiphotonInput, ORACLE_MAX_STEPS,
};
use crate::disorder::{average_over_disorder, enumerate_phase_maps, realization_rng, sample_with, sweep_csv, sweep_p};
use crate::emulation::{reproduce_experiment, ExperimentPreset};
use crate::lattice::Mode;
use crate::search::{
    evaluate, exhaustive_search_with, hill_climb, random_search_with_progress, trend_csv, Objective, SearchResult,
    TrendRecord,
};
use crate::violation::violation_matrix;
use crate::walk::{build_unitary, CoinSpec, PhaseMap};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser, Debug)]
#[command(
    name = "qwalk",
    version,
    about = "Two-photon quantum walks with binary phase disorder"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Directory receiving the output files.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,

    /// Worker threads; defaults to one per core.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Coincidence and violation matrices for one phase map.
    Simulate {
        #[arg(long)]
        steps: usize,
        #[command(flatten)]
        source: MapSource,
        #[command(flatten)]
        physics: PhysicsArgs,
    },
    /// Random or exhaustive search for correlation-enhancing phase maps.
    Search {
        #[arg(long)]
        steps: usize,
        #[arg(long, default_value_t = 10_000)]
        maps: u64,
        #[arg(long, required_unless_present = "exhaustive")]
        seed: Option<u64>,
        /// Evaluate every gauge class instead of sampling.
        #[arg(long)]
        exhaustive: bool,
        /// Polish the best-MAV map by single-site hill climbing.
        #[arg(long)]
        refine: bool,
        #[command(flatten)]
        physics: PhysicsArgs,
    },
    /// Disorder-averaged Total Violation over a grid of disorder levels.
    SweepP {
        #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.25, 0.5, 0.75, 1.0])]
        p: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = [6])]
        steps: Vec<usize>,
        /// Realizations per disorder level.
        #[arg(long, default_value_t = 10_000)]
        maps: u64,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        physics: PhysicsArgs,
    },
    /// Data behind one of the standard figures.
    Reproduce {
        figure: Figure,
        #[arg(long)]
        seed: u64,
        /// Full sample sizes and step ranges instead of the quick defaults.
        #[arg(long)]
        paper_scale: bool,
        /// Overrides the figure's map or realization count.
        #[arg(long)]
        maps: Option<u64>,
        /// Overrides the emulated coincidence budget.
        #[arg(long)]
        counts: Option<u64>,
        #[command(flatten)]
        physics: PhysicsArgs,
    },
    /// Cross-checks the closed-form coincidences against direct two-photon evolution.
    OracleCheck {
        #[arg(long, default_value_t = 6)]
        steps: usize,
        #[arg(long, default_value_t = 50)]
        maps: u64,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        physics: PhysicsArgs,
    },
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
pub struct MapSource {
    /// Phase map JSON file.
    #[arg(long)]
    pub map: Option<PathBuf>,
    /// Use the all-zero phase map.
    #[arg(long)]
    pub ordered: bool,
}

#[derive(Args, Debug, Clone)]
pub struct PhysicsArgs {
    /// Coin transmissivity T.
    #[arg(long = "coin-t")]
    pub coin_t: Option<f64>,
    /// Distinguishability q of the photon pair.
    #[arg(long)]
    pub q: Option<f64>,
    /// Input modes, e.g. `0_L,0_R`.
    #[arg(long, default_value = "0_L,0_R", value_parser = parse_inputs)]
    pub inputs: (Mode, Mode),
}

fn parse_inputs(s: &str) -> Result<(Mode, Mode), String> {
    let (a, b) = s.split_once(',').ok_or("expected two comma-separated modes")?;
    let a = a.trim().parse::<Mode>().map_err(|e| e.to_string())?;
    let b = b.trim().parse::<Mode>().map_err(|e| e.to_string())?;
    Ok((a, b))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    /// MAV and maximum Total Violation against step, ordered vs searched.
    #[value(name = "fig2")]
    Fig2,
    /// Theoretical and emulated violation matrices of the step-6 enhancing map.
    #[value(name = "fig4")]
    Fig4,
    /// Step trends under the laboratory parameters with emulated measurements.
    #[value(name = "fig5")]
    Fig5,
    /// Step-15 coincidence and violation matrices, ordered vs fully disordered.
    #[value(name = "sm_step15")]
    SmStep15,
    /// Normalized mean Total Violation against disorder level.
    #[value(name = "sm_totviol")]
    SmTotviol,
    /// Best violation per mode pair at step 9.
    #[value(name = "sm_landscape9")]
    SmLandscape9,
}

impl Figure {
    fn id(self) -> &'static str {
        match self {
            Figure::Fig2 => "fig2",
            Figure::Fig4 => "fig4",
            Figure::Fig5 => "fig5",
            Figure::SmStep15 => "sm_step15",
            Figure::SmTotviol => "sm_totviol",
            Figure::SmLandscape9 => "sm_landscape9",
        }
    }
}

struct Physics {
    coin: CoinSpec,
    input: BiphotonInput,
}

impl PhysicsArgs {
    fn resolve(&self, default_t: f64, default_q: f64) -> anyhow::Result<Physics> {
        let coin = CoinSpec::new(self.coin_t.unwrap_or(default_t))?;
        let (a, b) = self.inputs;
        let input = BiphotonInput::new(a, b, self.q.unwrap_or(default_q))?;
        Ok(Physics { coin, input })
    }
}

impl Physics {
    fn config(&self) -> Value {
        json!({
            "coin_t": self.coin.transmissivity(),
            "q": self.input.q(),
            "inputs": [self.input.mode_a, self.input.mode_b],
        })
    }
}

/// The enhancing step-6 map used in the laboratory run.
pub fn enhancing_step6_map() -> PhaseMap {
    let mut map = PhaseMap::zeros(6);
    map.set(4, Mode::left(-2), true).expect("site in range");
    map.set(4, Mode::right(2), true).expect("site in range");
    map
}

struct Output<'a> {
    dir: &'a Path,
}

impl Output<'_> {
    fn write(&self, name: &str, contents: &str) -> anyhow::Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
    }

    fn json(&self, name: &str, value: &Value) -> anyhow::Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, &text)
    }

    fn config(&self, command: &str, mut fields: Value) -> anyhow::Result<()> {
        let obj = fields.as_object_mut().expect("config is an object");
        obj.insert("tool".into(), json!("qwalk"));
        obj.insert("tool_version".into(), json!(TOOL_VERSION));
        obj.insert("command".into(), json!(command));
        self.json("config.json", &fields)
    }
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    fs::create_dir_all(&cli.out_dir).with_context(|| format!("creating {}", cli.out_dir.display()))?;
    let out = Output { dir: &cli.out_dir };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        ensure!(n > 0, "--threads must be positive");
        pool = pool.num_threads(n);
    }
    pool.build()?.install(|| dispatch(&cli.command, &out))
}

fn dispatch(command: &Command, out: &Output) -> anyhow::Result<()> {
    match command {
        Command::Simulate { steps, source, physics } => simulate(*steps, source, physics, out),
        Command::Search {
            steps,
            maps,
            seed,
            exhaustive,
            refine,
            physics,
        } => search(*steps, *maps, *seed, *exhaustive, *refine, physics, out),
        Command::SweepP {
            p,
            steps,
            maps,
            seed,
            physics,
        } => sweep(p, steps, *maps, *seed, physics, out),
        Command::Reproduce {
            figure,
            seed,
            paper_scale,
            maps,
            counts,
            physics,
        } => reproduce(*figure, *seed, *paper_scale, *maps, *counts, physics, out),
        Command::OracleCheck {
            steps,
            maps,
            seed,
            physics,
        } => oracle_check(*steps, *maps, *seed, physics, out),
    }
}

fn load_map(path: &Path) -> anyhow::Result<PhaseMap> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    PhaseMap::from_json(&text).with_context(|| format!("invalid phase map {}", path.display()))
}

fn simulate(t: usize, source: &MapSource, physics: &PhysicsArgs, out: &Output) -> anyhow::Result<()> {
    let ph = physics.resolve(0.5, 0.0)?;
    let map = match &source.map {
        Some(path) => load_map(path)?,
        None => PhaseMap::zeros(t),
    };
    ensure!(
        t <= map.t_max(),
        "phase map covers {} steps, {t} requested",
        map.t_max()
    );
    let u = build_unitary(t, &map, &ph.coin, &[ph.input.mode_a, ph.input.mode_b])?;
    let gamma = gamma_partial(&u, &ph.input)?;
    let v = violation_matrix(&gamma)?;

    out.write("gamma.csv", &gamma.to_csv())?;
    out.write("violation.csv", &v.to_csv())?;
    out.json(
        "summary.json",
        &json!({
            "step": t,
            "mav": v.mav,
            "mav_pair": v.mav_pair,
            "total_violation": v.total_violation,
            "gamma_total": gamma.total(),
            "pi_sites": map.with_depth(t).pi_count(),
        }),
    )?;
    out.config(
        "simulate",
        json!({
            "steps": t,
            "map_source": source.map.as_ref().map_or_else(|| "ordered".to_owned(), |p| p.display().to_string()),
            "physics": ph.config(),
        }),
    )
}

/// Prints a stderr line each time another tenth of `total` is done.
fn progress_reporter(label: &'static str, total: u64) -> impl Fn(u64, f64) + Sync {
    let printed = AtomicU64::new(0);
    move |done, best| {
        let tenth = done * 10 / total.max(1);
        if printed.fetch_max(tenth, Ordering::Relaxed) < tenth {
            eprintln!("{label}: {done}/{total} evaluated, best MAV so far {best:.6}");
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn search(
    t: usize,
    maps: u64,
    seed: Option<u64>,
    exhaustive: bool,
    refine: bool,
    physics: &PhysicsArgs,
    out: &Output,
) -> anyhow::Result<()> {
    let ph = physics.resolve(0.5, 0.0)?;
    let result = if exhaustive {
        let report = progress_reporter("exhaustive", enumerate_phase_maps(t, true)?.len());
        exhaustive_search_with(t, true, &ph.coin, &ph.input, Some(&report))?
    } else {
        let seed = seed.expect("clap enforces --seed");
        let report = progress_reporter("search", maps);
        random_search_with_progress(t, maps, seed, &ph.coin, &ph.input, Some(&report))?
    };
    let ordered = evaluate(t, &PhaseMap::zeros(t), &ph.coin, &ph.input)?;

    let mut summary = result.to_json_value();
    let obj = summary.as_object_mut().expect("object");
    obj.insert("ordered_mav".into(), json!(ordered.mav));
    obj.insert("ordered_total_violation".into(), json!(ordered.total_violation));
    if refine {
        let r = hill_climb(t, &result.best_mav_map, Objective::Mav, &ph.coin, &ph.input)?;
        let v = evaluate(t, &r.map, &ph.coin, &ph.input)?;
        obj.insert(
            "refined".into(),
            json!({ "mav": r.score, "mav_pair": v.mav_pair, "evaluations": r.evaluations, "map": r.map }),
        );
        out.write("refined_map.json", &(r.map.to_json() + "\n"))?;
    }
    out.json("search_result.json", &summary)?;
    out.write("best_map.json", &(result.best_mav_map.to_json() + "\n"))?;
    out.write("landscape.csv", &result.per_pair_best.to_csv())?;
    out.config(
        "search",
        json!({
            "steps": t,
            "mode": if exhaustive { "exhaustive" } else { "random" },
            "maps": if exhaustive { Value::Null } else { json!(maps) },
            "seed": if exhaustive { Value::Null } else { json!(seed) },
            "gauge_fixed": exhaustive,
            "refine": refine,
            "physics": ph.config(),
        }),
    )
}

fn sweep(ps: &[f64], steps: &[usize], n: u64, seed: u64, physics: &PhysicsArgs, out: &Output) -> anyhow::Result<()> {
    let ph = physics.resolve(0.5, 0.0)?;
    let rows = sweep_p(ps, steps, n, seed, &ph.coin, &ph.input)?;
    out.write("p_sweep.csv", &sweep_csv(&rows))?;
    out.config(
        "sweep-p",
        json!({ "p": ps, "steps": steps, "realizations": n, "seed": seed, "physics": ph.config() }),
    )
}

fn trend(
    steps: std::ops::RangeInclusive<usize>,
    n: u64,
    seed: u64,
    ph: &Physics,
) -> anyhow::Result<(Vec<TrendRecord>, Vec<SearchResult>)> {
    let mut records = Vec::new();
    let mut results = Vec::new();
    for t in steps {
        let ordered = evaluate(t, &PhaseMap::zeros(t), &ph.coin, &ph.input)?;
        let found = random_search_with_progress(t, n, seed, &ph.coin, &ph.input, None)?;
        eprintln!("step {t}: ordered {:.6}, best {:.6}", ordered.mav, found.best_mav);
        records.push(TrendRecord {
            step: t,
            ordered_mav: ordered.mav,
            ordered_total: ordered.total_violation,
            best_mav: found.best_mav,
            best_total: found.best_total,
            best_mav_pair: found.best_mav_pair,
        });
        results.push(found);
    }
    Ok((records, results))
}

#[allow(clippy::too_many_arguments)]
fn reproduce(
    figure: Figure,
    seed: u64,
    paper_scale: bool,
    maps: Option<u64>,
    counts: Option<u64>,
    physics: &PhysicsArgs,
    out: &Output,
) -> anyhow::Result<()> {
    let scale = if paper_scale { "full" } else { "desk" };
    let lab = ExperimentPreset::laboratory();
    let mut config = json!({ "figure": figure.id(), "seed": seed, "scale": scale });
    let cfg = config.as_object_mut().expect("object");

    match figure {
        Figure::Fig2 => {
            let ph = physics.resolve(0.5, 0.0)?;
            let max_t = if paper_scale { 30 } else { 10 };
            let n = maps.unwrap_or(10_000);
            let (records, results) = trend(1..=max_t, n, seed, &ph)?;
            out.write("fig2_trend.csv", &trend_csv(&records))?;
            let best: Vec<Value> = results
                .iter()
                .map(|r| json!({ "step": r.step, "best_mav_index": r.best_mav_index, "best_mav_map": r.best_mav_map }))
                .collect();
            out.json("fig2_best_maps.json", &Value::Array(best))?;
            cfg.insert("steps".into(), json!([1, max_t]));
            cfg.insert("maps_per_step".into(), json!(n));
            cfg.insert("physics".into(), ph.config());
        }
        Figure::Fig4 => {
            let ph = physics.resolve(lab.coin.transmissivity(), lab.q)?;
            let preset = ExperimentPreset {
                coin: ph.coin,
                q: ph.input.q(),
                total_counts: counts.unwrap_or(lab.total_counts),
            };
            ensure!(
                ph.input.mode_a == Mode::left(0) && ph.input.mode_b == Mode::right(0),
                "fig4 uses the inputs 0_L,0_R"
            );
            let map = enhancing_step6_map();
            let run = reproduce_experiment(&preset, 6, &map, seed)?;
            out.write("fig4_theory_violation.csv", &run.violation_theory.to_csv())?;
            out.write("fig4_measured_violation.csv", &run.measured.violation.to_csv())?;
            out.write("fig4_measured_sigma.csv", &run.measured.sigma_csv())?;
            out.write("fig4_counts.csv", &run.counts.to_csv())?;
            out.json("fig4_run.json", &run.to_json_value())?;
            out.write("fig4_map.json", &(map.to_json() + "\n"))?;
            cfg.insert("preset".into(), serde_json::to_value(preset)?);
        }
        Figure::Fig5 => {
            let ph = physics.resolve(lab.coin.transmissivity(), lab.q)?;
            let total = counts.unwrap_or(lab.total_counts);
            let n = maps.unwrap_or(10_000);
            let max_t = 10;
            let measured_up_to = 6;
            let (records, results) = trend(1..=max_t, n, seed, &ph)?;
            let preset = ExperimentPreset {
                coin: ph.coin,
                q: ph.input.q(),
                total_counts: total,
            };
            let mut csv = String::from(
                "step,ordered_mav,ordered_total,enhanced_mav,enhanced_total,measured_mav,measured_mav_sigma,measured_total\n",
            );
            for (rec, res) in records.iter().zip(&results) {
                let mut line = format!(
                    "{},{},{},{},{}",
                    rec.step,
                    sig(rec.ordered_mav),
                    sig(rec.ordered_total),
                    sig(rec.best_mav),
                    sig(rec.best_total)
                );
                if rec.step <= measured_up_to {
                    let run =
                        reproduce_experiment(&preset, rec.step, &res.best_mav_map, seed.wrapping_add(rec.step as u64))?;
                    let v = &run.measured.violation;
                    let (a, b) = v.mav_pair;
                    line.push_str(&format!(
                        ",{},{},{}",
                        sig(v.mav),
                        sig(run.measured.sigma_at(a, b)?),
                        sig(v.total_violation)
                    ));
                } else {
                    line.push_str(",,,");
                }
                csv.push_str(&line);
                csv.push('\n');
            }
            out.write("fig5_trend.csv", &csv)?;
            cfg.insert("steps".into(), json!([1, max_t]));
            cfg.insert("measured_steps".into(), json!([1, measured_up_to]));
            cfg.insert("maps_per_step".into(), json!(n));
            cfg.insert("counts_seed".into(), json!("seed + step"));
            cfg.insert("preset".into(), serde_json::to_value(preset)?);
            cfg.insert("inputs".into(), json!([ph.input.mode_a, ph.input.mode_b]));
        }
        Figure::SmStep15 => {
            let ph = physics.resolve(0.5, 0.0)?;
            let t = 15;
            let n = maps.unwrap_or(10_000);
            let ordered = average_over_disorder(0.0, t, 1, seed, &ph.coin, &ph.input)?;
            let disordered = average_over_disorder(1.0, t, n, seed, &ph.coin, &ph.input)?;
            out.write("sm_step15_gamma_ordered.csv", &ordered.mean_gamma.to_csv())?;
            out.write("sm_step15_gamma_disordered.csv", &disordered.mean_gamma.to_csv())?;
            out.write("sm_step15_violation_ordered.csv", &ordered.mean_violation.to_csv())?;
            out.write(
                "sm_step15_violation_disordered.csv",
                &disordered.mean_violation.to_csv(),
            )?;
            cfg.insert("step".into(), json!(t));
            cfg.insert("p".into(), json!([0.0, 1.0]));
            cfg.insert("realizations".into(), json!(n));
            cfg.insert("physics".into(), ph.config());
        }
        Figure::SmTotviol => {
            let ph = physics.resolve(0.5, 0.0)?;
            let n = maps.unwrap_or(if paper_scale { 10_000 } else { 1_000 });
            let ps: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
            let steps = [6, 10, 15];
            let rows = sweep_p(&ps, &steps, n, seed, &ph.coin, &ph.input)?;
            out.write("sm_totviol.csv", &sweep_csv(&rows))?;
            cfg.insert("p".into(), json!(ps));
            cfg.insert("steps".into(), json!(steps));
            cfg.insert("realizations".into(), json!(n));
            cfg.insert("physics".into(), ph.config());
        }
        Figure::SmLandscape9 => {
            let ph = physics.resolve(0.5, 0.0)?;
            let n = maps.unwrap_or(if paper_scale { 1_000_000 } else { 100_000 });
            let report = progress_reporter("landscape", n);
            let r = random_search_with_progress(9, n, seed, &ph.coin, &ph.input, Some(&report))?;
            out.write("sm_landscape9.csv", &r.per_pair_best.to_csv())?;
            out.write("sm_landscape9_best_map.json", &(r.best_mav_map.to_json() + "\n"))?;
            cfg.insert("step".into(), json!(9));
            cfg.insert("maps".into(), json!(n));
            cfg.insert("physics".into(), ph.config());
        }
    }
    out.config("reproduce", config)
}

fn sig(v: f64) -> String {
    crate::numeric::sig12(v)
}

fn oracle_check(t_max: usize, n: u64, seed: u64, physics: &PhysicsArgs, out: &Output) -> anyhow::Result<()> {
    if t_max > ORACLE_MAX_STEPS {
        bail!("oracle-check supports at most {ORACLE_MAX_STEPS} steps");
    }
    let ph = physics.resolve(0.5, 0.0)?;
    let input = ph.input.with_q(0.0)?;
    let mut per_step = Vec::new();
    let mut worst = 0.0f64;
    for t in 1..=t_max {
        let mut max_delta = 0.0f64;
        for k in 0..n {
            let map = sample_with(&mut realization_rng(seed, k), 0.5, t);
            let u = build_unitary(t, &map, &ph.coin, &[input.mode_a, input.mode_b])?;
            let closed = gamma_indistinguishable(&u, &input)?;
            let brute = two_particle_oracle(t, &map, &ph.coin, &input)?;
            let d = closed
                .gamma()
                .iter()
                .zip(brute.gamma())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            max_delta = max_delta.max(d);
        }
        per_step.push(json!({ "step": t, "maps": n, "max_abs_delta": max_delta }));
        worst = worst.max(max_delta);
    }
    let tolerance = 1e-10;
    out.json(
        "oracle_check.json",
        &json!({ "tolerance": tolerance, "max_abs_delta": worst, "passed": worst < tolerance, "steps": per_step }),
    )?;
    out.config(
        "oracle-check",
        json!({ "steps": t_max, "maps": n, "seed": seed, "physics": ph.config() }),
    )?;
    ensure!(worst < tolerance, "closed form and oracle differ by {worst:e}");
    Ok(())
}
