//! Experiment dispatch and persistence for the command line.
//!
//! Every run writes into its own directory `<experiment>-<unix time>-seed<seed>`:
//! `config.json` (the resolved configuration minus the worker count), `result.json`, `outputs.csv`, one
//! or more data tables, and `timing.json`. Everything except `timing.json` (timestamp,
//! wall clock, workers) and the directory name is a deterministic function of the configuration.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde_json::json;

use crate::config::{Experiment, RunConfig};
use crate::dynamics::{flow_to_times, gauge_transform, Equation, FlowConfig};
use crate::energies::{e1, e3, mass, momentum};
use crate::ensemble::ensemble_map;
use crate::error::{Error, Result};
use crate::invariance::{
    conservation_suite, convergence_study, invariance_delta, ConservationSpec, ConvergenceSpec,
    ExperimentResult, InitialData, InvarianceSpec, TestSet, CONSERVATION_HEADER,
};
use crate::measures::{
    density_moment, density_weight, gagliardo_nirenberg, gaussians, sample_field, tail_probability,
    EnsembleSpec, FieldNorm,
};
use crate::pairing::{
    e3star_l2_exact, e3star_l2_mc, enumerate_in, im_sum, lemma_sum, tilde_cancellation, Lemma,
    MatchingMethod, Subset,
};
use crate::spectral_field::NormSpec;
use crate::stats::{linear_fit, mann_kendall, Estimate};

/// Relative slack of the Gagliardo–Nirenberg check (quadrature round-off).
pub const GN_SLACK: f64 = 1e-12;
/// Allowed `E_1` drift in units of the integrator tolerance.
pub const E1_DRIFT_FACTOR: f64 = 10.0;
/// Allowed mismatch between the `E_3` change and the integrated drift,
/// relative to `int |E*_3|`.
pub const E3_AGREEMENT: f64 = 1e-3;
/// Gauge map residual allowed at the default tolerance.
pub const GAUGE_TOLERANCE: f64 = 1e-6;
/// Number of standard errors for consistency checks.
pub const SE_BAND: f64 = 3.0;
/// Significance of the Mann–Kendall trend check.
pub const TREND_LEVEL: f64 = 0.1;
/// Largest allowed slope of the log-log `E*_3` decay fit.
pub const DECAY_SLOPE_MAX: f64 = -0.3;
/// Bound on `max / min` of the rescaled lemma sums.
pub const LEMMA_SPREAD: f64 = 10.0;
/// Relative residual allowed in the pairwise cancellation.
pub const CANCELLATION_TOLERANCE: f64 = 1e-12;

/// A data table written next to the result.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub file: String,
    pub content: String,
}

impl Table {
    fn new(file: &str, header: &str) -> Self {
        Table {
            file: file.to_string(),
            content: format!("{header}\n"),
        }
    }

    fn row(&mut self, line: String) {
        self.content.push_str(&line);
        self.content.push('\n');
    }
}

/// Result of an experiment before persistence.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub result: ExperimentResult,
    pub tables: Vec<Table>,
}

/// A finished, persisted run.
#[derive(Debug, Clone)]
pub struct Run {
    pub dir: PathBuf,
    pub outcome: Outcome,
    pub wall_clock: f64,
}

fn flow_config(cfg: &RunConfig, n: usize) -> FlowConfig {
    FlowConfig {
        n,
        sign: cfg.sign,
        equation: cfg.equation,
        dt: cfg.dt,
        tol: cfg.tol,
        t_final: cfg.t,
    }
}

fn ensemble(cfg: &RunConfig, n: usize) -> EnsembleSpec {
    EnsembleSpec {
        n,
        master_seed: cfg.seed,
        count: cfg.samples,
        sign: cfg.sign,
        r: cfg.r,
    }
}

fn grid_or(cfg: &RunConfig, default: &[usize]) -> Vec<usize> {
    cfg.n_grid.clone().unwrap_or_else(|| default.to_vec())
}

fn parameters(cfg: &RunConfig) -> serde_json::Value {
    let mut v = serde_json::to_value(cfg).expect("config serializes");
    if let Some(map) = v.as_object_mut() {
        map.remove("output_dir");
        map.remove("workers");
    }
    v
}

fn fmt_se(e: &Estimate) -> String {
    format!("{:e},{:e}", e.value, e.stderr)
}

/// Runs the configured experiment without touching the file system.
pub fn execute(cfg: &RunConfig) -> Result<Outcome> {
    cfg.validate()?;
    match cfg.experiment {
        Experiment::Sample => sample(cfg),
        Experiment::Evolve => evolve_experiment(cfg),
        Experiment::Conservation => conservation(cfg),
        Experiment::E3starDecay => e3star_decay(cfg),
        Experiment::Invariance => invariance(cfg),
        Experiment::PairingLemmas => pairing_lemmas(cfg),
        Experiment::Convergence => convergence(cfg),
        Experiment::Tails => tails(cfg),
        Experiment::DensityMoments => density_moments(cfg),
        Experiment::GaugeCheck => gauge_check(cfg),
    }
}

/// Runs the experiment and writes its outputs under `root`.
pub fn run(cfg: &RunConfig, root: &Path) -> Result<Run> {
    let started = Instant::now();
    let outcome = execute(cfg)?;
    let wall_clock = started.elapsed().as_secs_f64();
    let stamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    fs::create_dir_all(root)?;
    let base = format!("{}-{}-seed{}", cfg.experiment, stamp, cfg.seed);
    let mut dir = root.join(&base);
    let mut k = 1;
    while dir.exists() {
        dir = root.join(format!("{base}-{k}"));
        k += 1;
    }
    fs::create_dir(&dir)?;
    let mut echo = serde_json::to_value(cfg)?;
    if let Some(map) = echo.as_object_mut() {
        map.remove("workers");
    }
    fs::write(dir.join("config.json"), serde_json::to_string_pretty(&echo)? + "\n")?;
    fs::write(
        dir.join("result.json"),
        serde_json::to_string_pretty(&outcome.result)? + "\n",
    )?;
    fs::write(dir.join("outputs.csv"), outcome.result.outputs_csv())?;
    for t in &outcome.tables {
        fs::write(dir.join(&t.file), &t.content)?;
    }
    let timing = json!({
        "timestamp": stamp,
        "wall_clock_s": wall_clock,
        "workers": cfg.workers,
        "passed": outcome.result.passed(),
    });
    fs::write(dir.join("timing.json"), serde_json::to_string_pretty(&timing)? + "\n")?;
    Ok(Run {
        dir,
        outcome,
        wall_clock,
    })
}

fn sample(cfg: &RunConfig) -> Result<Outcome> {
    let ens = ensemble(cfg, cfg.n);
    let norm = NormSpec::new(cfg.s, cfg.p)?;
    let out = ensemble_map(cfg.samples, cfg.workers, |i| {
        let u = sample_field(&ens, i)?;
        let w = density_weight(&u, cfg.r, cfg.n, cfg.sign);
        let gn = gagliardo_nirenberg(&u);
        Ok((w, e3(&u, cfg.sign), u.fl_norm(&norm), gn))
    })?;
    let mut table = Table::new("samples.csv", "index,e1,l4_fourth,e3,chi,weight,fl_norm,gn_lhs,gn_rhs");
    let mut e1s = Vec::new();
    let mut gn_ok = true;
    for (i, r) in out.successes() {
        let (w, e3v, fl, gn) = r;
        table.row(format!(
            "{i},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            w.e1, w.l4_fourth, e3v, w.chi, w.weight, fl, gn.lhs, gn.rhs
        ));
        e1s.push(w.e1);
        gn_ok &= gn.holds(GN_SLACK);
    }
    let mean_e1 = crate::stats::mean_se(&e1s);
    let ni = cfg.n as i64;
    let exact: f64 = (-ni..=ni).map(|j| 1.0 / (1.0 + (j * j) as f64)).sum();
    let mut result = ExperimentResult::new("sample", parameters(cfg));
    result.estimate("mean_e1", &mean_e1);
    result.exact("expected_e1", exact);
    result.exact("failures", out.failures.len() as f64);
    result.check("no_failures", out.failures.is_empty(), format!("{} failed samples", out.failures.len()));
    result.check(
        "mean_e1",
        (mean_e1.value - exact).abs() <= 4.0 * mean_e1.stderr || cfg.samples < 2,
        format!("{:.6} vs {:.6} (se {:.2e})", mean_e1.value, exact, mean_e1.stderr),
    );
    result.check("gagliardo_nirenberg", gn_ok, "inequality holds on every sample");
    Ok(Outcome {
        result,
        tables: vec![table],
    })
}

fn evolve_experiment(cfg: &RunConfig) -> Result<Outcome> {
    let ens = ensemble(cfg, cfg.n);
    let flow = flow_config(cfg, cfg.n);
    let norm = NormSpec::new(0.5, 4.0)?;
    let times: Vec<f64> = (0..=cfg.steps)
        .map(|k| cfg.t.abs() * k as f64 / cfg.steps as f64)
        .collect();
    let out = ensemble_map(cfg.samples, cfg.workers, |i| {
        let u0 = sample_field(&ens, i)?;
        let traj = flow_to_times(&u0, &flow, &times)?;
        let growth = traj
            .times()
            .iter()
            .zip(traj.states())
            .map(|(t, u)| u.fl_norm(&norm).powi(2) / (2.0 + t).ln())
            .fold(0.0, f64::max);
        Ok((u0, traj.last().1.clone(), growth))
    })?;
    let mut table = Table::new(
        "evolve.csv",
        "index,e1_initial,e1_final,e1_drift,e3_initial,e3_final,mass_drift,momentum_drift,growth_ratio",
    );
    let mut states = Table::new("final_states.csv", "index,k,re,im");
    let mut worst = 0.0f64;
    let mut growth_max = 0.0f64;
    for (i, (u0, u1, growth)) in out.successes() {
        let (a, b) = (e1(u0), e1(u1));
        let drift = if a > 0.0 { ((b - a) / a).abs() } else { b.abs() };
        worst = worst.max(drift);
        growth_max = growth_max.max(*growth);
        table.row(format!(
            "{i},{a:e},{b:e},{drift:e},{:e},{:e},{:e},{:e},{growth:e}",
            e3(u0, cfg.sign),
            e3(u1, cfg.sign),
            (mass(u1) - mass(u0)).abs(),
            (momentum(u1) - momentum(u0)).abs()
        ));
        for (k, c) in u1.modes() {
            states.row(format!("{i},{k},{:e},{:e}", c.re, c.im));
        }
    }
    let mut result = ExperimentResult::new("evolve", parameters(cfg));
    result.exact("max_e1_drift", worst);
    result.exact("max_growth_ratio", growth_max);
    result.check("no_failures", out.failures.is_empty(), format!("{} failed samples", out.failures.len()));
    result.check(
        "e1_conservation",
        worst <= E1_DRIFT_FACTOR * cfg.tol,
        format!("worst relative drift {worst:.3e}"),
    );
    Ok(Outcome {
        result,
        tables: vec![table, states],
    })
}

fn conservation(cfg: &RunConfig) -> Result<Outcome> {
    let spec = ConservationSpec {
        flow: flow_config(cfg, cfg.n),
        data: InitialData::Gaussian,
        count: cfg.samples,
        master_seed: cfg.seed,
    };
    let rows = conservation_suite(&spec, cfg.workers)?;
    let mut table = Table::new("conservation.csv", CONSERVATION_HEADER);
    for r in &rows {
        table.row(r.csv_row());
    }
    let worst_e1 = rows.iter().map(|r| r.e1_drift).fold(0.0, f64::max);
    let worst_e3 = rows.iter().map(|r| r.e3_mismatch).fold(0.0, f64::max);
    let worst_p = rows.iter().map(|r| r.momentum_drift).fold(0.0, f64::max);
    let mut result = ExperimentResult::new("conservation", parameters(cfg));
    result.exact("max_e1_drift", worst_e1);
    result.exact("max_momentum_drift", worst_p);
    result.exact("max_e3_mismatch", worst_e3);
    result.check(
        "e1_conservation",
        worst_e1 <= E1_DRIFT_FACTOR * cfg.tol,
        format!("worst relative drift {worst_e1:.3e}"),
    );
    result.check(
        "e3_drift_integral",
        worst_e3 <= E3_AGREEMENT,
        format!("worst relative mismatch {worst_e3:.3e}"),
    );
    Ok(Outcome {
        result,
        tables: vec![table],
    })
}

fn e3star_decay(cfg: &RunConfig) -> Result<Outcome> {
    let grid = grid_or(cfg, &[8, 16, 32, 64]);
    let mut table = Table::new(
        "e3star.csv",
        "experiment,N,R,chi_on,estimate,stderr,samples,seed,exact",
    );
    let mut result = ExperimentResult::new("e3star-decay", parameters(cfg));
    let mut estimates = Vec::new();
    for &n in &grid {
        let est = e3star_l2_mc(&ensemble(cfg, n), cfg.chi_on, cfg.workers)?;
        let exact = if !cfg.chi_on && n <= cfg.caps.wick {
            Some(e3star_l2_exact(n, MatchingMethod::Recursive)?)
        } else {
            None
        };
        table.row(format!(
            "e3star,{n},{},{},{},{},{},{}",
            cfg.r,
            cfg.chi_on,
            fmt_se(&est),
            est.samples,
            cfg.seed,
            exact.map(|x| format!("{x:e}")).unwrap_or_default()
        ));
        result.estimate(format!("e3star_N{n}"), &est);
        if let Some(x) = exact {
            result.exact(format!("e3star_exact_N{n}"), x);
            result.check(
                format!("wick_agreement_N{n}"),
                est.consistent_with(x, SE_BAND),
                format!("mc {:.6e} ± {:.2e} vs exact {x:.6e}", est.value, est.stderr),
            );
        }
        estimates.push((n, est));
    }
    if estimates.len() >= 2 {
        let decreasing = estimates.windows(2).all(|w| w[1].1.value < w[0].1.value);
        result.check("strictly_decreasing", decreasing, "estimates in increasing N");
    }
    if estimates.len() >= 3 && estimates.iter().all(|(_, e)| e.value > 0.0) {
        let x: Vec<f64> = estimates.iter().map(|(n, _)| (*n as f64).ln()).collect();
        let y: Vec<f64> = estimates.iter().map(|(_, e)| e.value.ln()).collect();
        let s: Vec<f64> = estimates.iter().map(|(_, e)| e.stderr / e.value).collect();
        let fit = linear_fit(&x, &y, Some(&s))?;
        result.exact("loglog_slope", fit.slope);
        result.exact("loglog_slope_ci_low", fit.slope_ci.0);
        result.exact("loglog_slope_ci_high", fit.slope_ci.1);
        result.check(
            "decay_slope",
            fit.slope <= DECAY_SLOPE_MAX && fit.slope_ci.1 < 0.0,
            format!("slope {:.3} (95% CI {:.3}..{:.3})", fit.slope, fit.slope_ci.0, fit.slope_ci.1),
        );
    }
    Ok(Outcome {
        result,
        tables: vec![table],
    })
}

fn invariance(cfg: &RunConfig) -> Result<Outcome> {
    let grid = grid_or(cfg, &[8, 12, 16, 32]);
    let sets = cfg
        .test_sets
        .clone()
        .unwrap_or_else(|| vec![TestSet::WholeSpace, TestSet::E1Ball { r: cfg.r }]);
    let mut table = Table::new(
        "invariance.csv",
        "N,set,estimate,stderr,samples,excluded,evolved",
    );
    let mut result = ExperimentResult::new("invariance", parameters(cfg));
    let mut per_set: Vec<Vec<f64>> = vec![Vec::new(); sets.len()];
    for &n in &grid {
        let spec = InvarianceSpec {
            flow: flow_config(cfg, n),
            r: cfg.r,
            t: cfg.t,
            count: cfg.samples,
            master_seed: cfg.seed,
        };
        let rep = invariance_delta(&spec, &sets, cfg.workers)?;
        for (k, d) in rep.deltas.iter().enumerate() {
            table.row(format!(
                "{n},{},{},{},{},{}",
                d.set.label(),
                fmt_se(&d.delta),
                d.delta.samples,
                rep.excluded,
                rep.evolved
            ));
            result.estimate(format!("delta_{}_N{n}", d.set.label()), &d.delta);
            per_set[k].push(d.delta.value.abs());
            if d.set == TestSet::WholeSpace {
                result.check(
                    format!("whole_space_zero_N{n}"),
                    d.delta.consistent_with(0.0, SE_BAND),
                    format!("{:.3e} ± {:.3e}", d.delta.value, d.delta.stderr),
                );
            }
        }
    }
    for (set, values) in sets.iter().zip(&per_set) {
        if matches!(set, TestSet::E1Ball { .. }) && values.len() >= 2 {
            let mk = mann_kendall(values);
            result.exact(format!("mann_kendall_p_{}", set.label()), mk.p_decreasing);
            result.check(
                format!("decreasing_trend_{}", set.label()),
                mk.p_decreasing <= TREND_LEVEL,
                format!("S = {}, one-sided p = {:.4}", mk.s, mk.p_decreasing),
            );
        }
    }
    Ok(Outcome {
        result,
        tables: vec![table],
    })
}

fn pairing_lemmas(cfg: &RunConfig) -> Result<Outcome> {
    let grid = grid_or(cfg, &[16, 32, 64, 128, 256, 512]);
    let mut result = ExperimentResult::new("pairing-lemmas", parameters(cfg));
    let mut sums = Table::new("lemma_sums.csv", "lemma,N,value,value_scaled");
    for lemma in Lemma::ALL {
        let mut scaled = Vec::new();
        let mut values = Vec::new();
        for &n in &grid {
            let v = lemma_sum(lemma, n)?;
            let sc = v / lemma.scale(n);
            sums.row(format!("{},{n},{v:e},{sc:e}", lemma.name()));
            values.push(v);
            scaled.push(sc);
        }
        let max = scaled.iter().cloned().fold(f64::MIN, f64::max);
        let min = scaled.iter().cloned().fold(f64::MAX, f64::min);
        result.exact(format!("{}_spread", lemma.name()), max / min);
        result.check(
            format!("{}_bounded", lemma.name()),
            min > 0.0 && max / min < LEMMA_SPREAD,
            format!("max/min of rescaled sum = {:.3}", max / min),
        );
        let monotone = values.iter().all(|v| *v >= 0.0)
            && grid
                .iter()
                .zip(values.windows(2))
                .all(|(&n, w)| n < 16 || w[1] < w[0]);
        result.check(format!("{}_decreasing", lemma.name()), monotone, "nonnegative, decreasing for N >= 16");
    }
    // same-triplet subsets
    let mut triplet = Table::new("same_triplet.csv", "N,k,l,count,im_sum");
    let mut all_empty = true;
    let g_seed = cfg.seed;
    let mut n = 1;
    while n <= cfg.caps.enumeration {
        let g = gaussians(g_seed, 0, n);
        for (k, l) in [(5, 6), (4, 5), (2, 3), (1, 2)] {
            let subset = Subset::Equal { k, l };
            let count = enumerate_in(n, subset)?.count();
            let im = im_sum(n, subset, &g)?;
            all_empty &= count == 0 || im == 0.0;
            triplet.row(format!("{n},{k},{l},{count},{im:e}"));
        }
        n *= 2;
    }
    result.check("same_triplet_vanish", all_empty, "every same-triplet subset is empty or sums to zero");
    // pairwise cancellation of the five-distinct 1-pairings
    let nt = cfg.caps.enumeration.min(8);
    let mut tilde = Table::new("tilde.csv", "draw,pair,tuples,residual,scale");
    let mut worst = 0.0f64;
    for draw in 0..cfg.samples {
        let g = gaussians(cfg.seed, draw as u64, nt);
        for pair in [(3, 4), (3, 6)] {
            let c = tilde_cancellation(nt, &g, pair)?;
            let rel = if c.scale > 0.0 { c.residual / c.scale } else { 0.0 };
            worst = worst.max(rel);
            tilde.row(format!(
                "{draw},{}{},{},{:e},{:e}",
                pair.0, pair.1, c.tuples, c.residual, c.scale
            ));
        }
    }
    result.exact("worst_cancellation_residual", worst);
    result.check(
        "tilde_cancellation",
        worst < CANCELLATION_TOLERANCE,
        format!("worst relative residual {worst:.3e} at N = {nt}"),
    );
    Ok(Outcome {
        result,
        tables: vec![sums, triplet, tilde],
    })
}

fn convergence(cfg: &RunConfig) -> Result<Outcome> {
    if cfg.s <= cfg.s_measure {
        return Err(Error::Config(format!(
            "convergence needs s > s_measure (got {} and {})",
            cfg.s, cfg.s_measure
        )));
    }
    let spec = ConvergenceSpec {
        n_grid: grid_or(cfg, &[8, 16, 32, 64]),
        s_data: cfg.s,
        s_measure: cfg.s_measure,
        p: cfg.p,
        t_final: cfg.t,
        steps: cfg.steps,
        master_seed: cfg.seed,
        flow: flow_config(cfg, 1),
    };
    let rep = convergence_study(&spec, cfg.workers)?;
    let mut table = Table::new("convergence.csv", "N,sup_difference");
    for (n, d) in &rep.rows {
        table.row(format!("{n},{d:e}"));
    }
    let gap = cfg.s - cfg.s_measure;
    let mut result = ExperimentResult::new("convergence", parameters(cfg));
    result.exact("exponent", rep.exponent);
    result.exact("exponent_se", rep.fit.slope_se);
    result.exact("target", gap);
    result.check(
        "rate",
        rep.exponent >= 0.5 * gap && rep.exponent <= 1.5 * gap,
        format!("fitted exponent {:.3} against [{:.2}, {:.2}]", rep.exponent, 0.5 * gap, 1.5 * gap),
    );
    Ok(Outcome {
        result,
        tables: vec![table],
    })
}

fn tails(cfg: &RunConfig) -> Result<Outcome> {
    let norm = cfg.norm.unwrap_or(FieldNorm::Sobolev { s: 0.0 });
    let lambdas = cfg.lambdas.clone().unwrap_or_else(|| vec![1.5, 2.0, 2.5, 3.0, 3.5]);
    let ens = ensemble(cfg, cfg.n);
    let mut table = Table::new("tails.csv", "lambda,probability,stderr,samples");
    let mut pts = Vec::new();
    for &lambda in &lambdas {
        let p = tail_probability(&ens, &norm, lambda, cfg.workers)?;
        table.row(format!("{lambda},{},{}", fmt_se(&p), p.samples));
        if p.value > 0.0 {
            pts.push((lambda * lambda, p));
        }
    }
    let mut result = ExperimentResult::new("tails", parameters(cfg));
    if pts.len() >= 2 {
        let x: Vec<f64> = pts.iter().map(|(l2, _)| *l2).collect();
        let y: Vec<f64> = pts.iter().map(|(_, p)| p.value.ln()).collect();
        let s: Vec<f64> = pts.iter().map(|(_, p)| (p.stderr / p.value).max(1e-12)).collect();
        let fit = linear_fit(&x, &y, Some(&s))?;
        result.exact("log_tail_slope", fit.slope);
        result.exact("log_tail_slope_se", fit.slope_se);
        result.check(
            "sub_gaussian",
            fit.slope < 0.0,
            format!("slope of log P against lambda^2 = {:.4}", fit.slope),
        );
    } else {
        result.check("sub_gaussian", false, "fewer than two thresholds with nonzero probability");
    }
    Ok(Outcome {
        result,
        tables: vec![table],
    })
}

fn density_moments(cfg: &RunConfig) -> Result<Outcome> {
    let grid = grid_or(cfg, &[8, 16, 32]);
    let mut table = Table::new("density_moments.csv", "N,q,sign,estimate,stderr,max_share");
    let mut result = ExperimentResult::new("density-moments", parameters(cfg));
    let mut ests = Vec::new();
    for &n in &grid {
        let m = density_moment(&ensemble(cfg, n), cfg.q, cfg.workers)?;
        table.row(format!(
            "{n},{},{},{},{:e}",
            cfg.q,
            cfg.sign,
            fmt_se(&m.estimate),
            m.max_share
        ));
        result.estimate(format!("moment_N{n}"), &m.estimate);
        ests.push(m.estimate);
    }
    let finite = ests.iter().all(|e| e.value.is_finite() && e.stderr.is_finite());
    result.check("finite", finite, "moments and errors are finite");
    let mut stable = true;
    for i in 0..ests.len() {
        for j in i + 1..ests.len() {
            stable &= ests[i].agrees_with(&ests[j], SE_BAND);
        }
    }
    result.check("stable_in_n", stable, "pairwise agreement within 3 SE");
    Ok(Outcome {
        result,
        tables: vec![table],
    })
}

fn gauge_check(cfg: &RunConfig) -> Result<Outcome> {
    let ens = ensemble(cfg, cfg.n);
    let times: Vec<f64> = (0..=cfg.steps)
        .map(|k| cfg.t.abs() * k as f64 / cfg.steps as f64)
        .collect();
    let base = flow_config(cfg, cfg.n);
    let cubic = FlowConfig {
        equation: Equation::Mkdv,
        ..base
    };
    let renormalized = FlowConfig {
        equation: Equation::Mkdv2,
        ..base
    };
    let out = ensemble_map(cfg.samples, cfg.workers, |i| {
        let u0 = sample_field(&ens, i)?;
        let gauged = gauge_transform(&flow_to_times(&u0, &cubic, &times)?, cfg.sign)?;
        let direct = flow_to_times(&u0, &renormalized, &times)?;
        let scale = u0.l2_coeff_norm().max(f64::MIN_POSITIVE);
        Ok(gauged
            .states()
            .iter()
            .zip(direct.states())
            .map(|(a, b)| a.l2_distance(b) / scale)
            .fold(0.0, f64::max))
    })?;
    let mut table = Table::new("gauge.csv", "index,max_relative_error");
    let mut worst = 0.0f64;
    for (i, e) in out.successes() {
        worst = worst.max(*e);
        table.row(format!("{i},{e:e}"));
    }
    let mut result = ExperimentResult::new("gauge-check", parameters(cfg));
    result.exact("max_relative_error", worst);
    result.check("no_failures", out.failures.is_empty(), format!("{} failed samples", out.failures.len()));
    result.check(
        "gauge_equivalence",
        worst <= GAUGE_TOLERANCE,
        format!("worst relative error {worst:.3e}"),
    );
    Ok(Outcome {
        result,
        tables: vec![table],
    })
}
