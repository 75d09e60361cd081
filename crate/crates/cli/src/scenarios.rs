//! Scenario execution: bind a validated config to the core operations, write
//! the JSON report (and any CSV plot data), and say whether the run passed.
//!
//! Reports are emitted single-threaded with sorted keys, so identical configs
//! produce byte-identical files. Verification failures still write their
//! report; only config errors abort before any output.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use grandlab_core::embeddings::{
    local_integrability_check, maximal_boundedness_probe, sobolev_embedding_check,
    upper_embedding_check,
};
use grandlab_core::grid::{Ball, BoxDomain, CatalogId, GridFunction, TestFunctionSpec};
use grandlab_core::hajlasz::{
    hajlasz_gradient, hedberg_check, poincare_pointwise_check, verify_pointwise, PairSample,
    PairStrategy,
};
use grandlab_core::maximal::{maximal_at, maximal_field, MaximalConfig, WindowShape};
use grandlab_core::norms::{grand_norm_on_grid, lq_norm, sobolev_norm, EpsilonGrid};
use grandlab_core::weights::{aq_constant, CubeFamily};
use serde_json::{json, Value};

use crate::config::{require, Scenario, ScenarioConfig};

/// Execute the configured scenario. `Ok(true)` means every checked property
/// held; `Ok(false)` means a verification failed (report already written);
/// `Err` means the config was unusable and nothing was written.
pub fn run(cfg: &ScenarioConfig) -> Result<bool> {
    let out_dir = cfg.output_dir();
    let (passed, report) = match cfg.scenario {
        Scenario::Norm => run_norm(cfg)?,
        Scenario::GrandNorm => run_grand_norm(cfg, &out_dir)?,
        Scenario::Maximal => run_maximal(cfg)?,
        Scenario::Aq => run_aq(cfg)?,
        Scenario::HajlaszVerify => run_hajlasz_verify(cfg, &out_dir)?,
        Scenario::Hedberg => run_hedberg(cfg)?,
        Scenario::Poincare => run_poincare(cfg)?,
        Scenario::Embed => run_embed(cfg)?,
        Scenario::Probe => run_probe(cfg)?,
        Scenario::Bench => run_bench(cfg, &out_dir)?,
    };
    fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating output dir {}", out_dir.display()))?;
    let path = out_dir.join("report.json");
    let mut bytes = serde_json::to_vec_pretty(&report)?;
    bytes.push(b'\n');
    fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
    use std::io::Write;
    let status = format!(
        "{}: {} ({})\n",
        cfg.scenario.name(),
        if passed { "pass" } else { "FAIL" },
        path.display()
    );
    let _ = std::io::stdout().write_all(status.as_bytes());
    Ok(passed)
}

fn write_csv(dir: &Path, name: &str, header: &str, rows: &[String]) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating output dir {}", dir.display()))?;
    let path = dir.join(name);
    let mut text = String::with_capacity(rows.len() * 32 + header.len() + 1);
    text.push_str(header);
    text.push('\n');
    for row in rows {
        text.push_str(row);
        text.push('\n');
    }
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn run_norm(cfg: &ScenarioConfig) -> Result<(bool, Value)> {
    let domain = cfg.domain()?;
    let q = cfg.q()?;
    let f = cfg.function()?.sample(&domain)?;
    let w = match &cfg.weight {
        Some(wc) => Some(wc.build("weight")?.sample(&domain)?),
        None => None,
    };
    let lq = lq_norm(&f, q, w.as_ref())?;
    let sobolev = sobolev_norm(&f, q, w.as_ref())?;
    let passed = lq.is_finite() && sobolev.is_finite();
    Ok((
        passed,
        json!({
            "scenario": "norm",
            "function": cfg.function()?.describe(),
            "q": q,
            "lq_norm": lq,
            "sobolev_norm": sobolev,
            "passed": passed,
        }),
    ))
}

fn run_grand_norm(cfg: &ScenarioConfig, out_dir: &Path) -> Result<(bool, Value)> {
    let domain = cfg.domain()?;
    let q = cfg.q()?;
    let f = cfg.function()?.sample(&domain)?;
    let w = cfg.weight_spec("weight")?.sample(&domain)?;
    let a = cfg.weight_spec("grandizer")?.sample(&domain)?;
    let grid = match cfg.epsilon_count {
        Some(n) => EpsilonGrid::uniform(q, n)?,
        None => EpsilonGrid::standard(q)?,
    };
    let result = grand_norm_on_grid(&f, q, &w, &a, &grid)?;
    let rows: Vec<String> = result
        .profile
        .iter()
        .map(|(eps, v)| format!("{eps},{v}"))
        .collect();
    let profile_path = write_csv(out_dir, "profile.csv", "epsilon,norm", &rows)?;
    let attained = result
        .profile
        .iter()
        .fold((0.0f64, 0.0f64), |best, &(e, v)| {
            if v > best.1 {
                (e, v)
            } else {
                best
            }
        });
    let passed = result.value.is_finite();
    Ok((
        passed,
        json!({
            "scenario": "grand-norm",
            "function": cfg.function()?.describe(),
            "q": q,
            "value": result.value,
            "attained_at_epsilon": attained.0,
            "epsilon_count": result.profile.len(),
            "profile_csv": profile_path.file_name().unwrap().to_str(),
            "passed": passed,
        }),
    ))
}

fn run_maximal(cfg: &ScenarioConfig) -> Result<(bool, Value)> {
    let domain = cfg.domain()?;
    let f = cfg.function()?.sample(&domain)?;
    let mcfg = cfg.maximal_config()?;
    let field = maximal_field(&f, &mcfg)?;
    let values = field.values();
    let (argmax, max) = values
        .iter()
        .enumerate()
        .fold((0usize, f64::NEG_INFINITY), |best, (i, &v)| {
            if v > best.1 {
                (i, v)
            } else {
                best
            }
        });
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let passed = max.is_finite();
    Ok((
        passed,
        json!({
            "scenario": "maximal",
            "function": cfg.function()?.describe(),
            "max": max,
            "argmax_cell": argmax,
            "argmax_point": domain.center(argmax),
            "mean": mean,
            "passed": passed,
        }),
    ))
}

fn run_aq(cfg: &ScenarioConfig) -> Result<(bool, Value)> {
    let domain = cfg.domain()?;
    let q = cfg.q()?;
    let w = require(&cfg.weight, "weight")?.build("weight")?;
    let estimate = aq_constant(&w, q, &domain, &CubeFamily::standard())?;
    let passed = !estimate.divergent && estimate.value.is_finite();
    Ok((
        passed,
        json!({
            "scenario": "aq",
            "weight": w.describe(),
            "q": q,
            "value": estimate.value,
            "estimate": estimate,
            "passed": passed,
        }),
    ))
}

fn run_hajlasz_verify(cfg: &ScenarioConfig, out_dir: &Path) -> Result<(bool, Value)> {
    let domain = cfg.domain()?;
    let f = cfg.function()?.sample(&domain)?;
    let g = match &cfg.gradient {
        Some(spec) => spec.sample(&domain)?,
        None => {
            let c = *require(&cfg.constant, "constant (or an explicit `gradient`)")?;
            hajlasz_gradient(&f, c, &cfg.maximal_config()?)?
        }
    };
    let strategy = cfg.pair_strategy.clone().unwrap_or(PairStrategy::Combined {
        count: cfg.sample_count.unwrap_or(2000),
        seed: 0,
    });
    let sample = PairSample::build(&domain, strategy)?;
    let report = verify_pointwise(&f, &g, &sample, cfg.c_bound)?;
    let rows: Vec<String> = sample
        .pairs()
        .iter()
        .zip(sample.admissible())
        .map(|(&(i, j), &adm)| {
            let join = |p: Vec<f64>| {
                p.iter()
                    .map(|c| c.to_string())
                    .collect::<Vec<_>>()
                    .join(" ")
            };
            format!("{},{},{adm}", join(domain.center(i)), join(domain.center(j)))
        })
        .collect();
    let pairs_path = write_csv(out_dir, "pairs.csv", "x,y,admissible", &rows)?;
    let passed = cfg.c_bound.is_none() || report.violations.is_empty();
    Ok((
        passed,
        json!({
            "scenario": "hajlasz-verify",
            "function": cfg.function()?.describe(),
            "c_bound": cfg.c_bound,
            "report": report,
            "pairs_csv": pairs_path.file_name().unwrap().to_str(),
            "passed": passed,
        }),
    ))
}

fn run_hedberg(cfg: &ScenarioConfig) -> Result<(bool, Value)> {
    let domain = cfg.domain()?;
    let f = cfg.function()?.sample(&domain)?;
    let x = require(&cfg.point, "point")?;
    let t = *require(&cfg.t, "t")?;
    let report = hedberg_check(&f, x, t)?;
    let passed = report.passed;
    Ok((
        passed,
        json!({
            "scenario": "hedberg",
            "function": cfg.function()?.describe(),
            "point": x,
            "t": t,
            "report": report,
            "passed": passed,
        }),
    ))
}

fn run_poincare(cfg: &ScenarioConfig) -> Result<(bool, Value)> {
    let domain = cfg.domain()?;
    let f = cfg.function()?.sample(&domain)?;
    let ball = match (&cfg.ball_center, cfg.ball_radius) {
        (Some(c), Some(r)) => Ball::new(c.clone(), r)?,
        (None, None) => domain.inscribed_ball(),
        _ => bail!("fields `ball_center` and `ball_radius` must be given together"),
    };
    let samples = cfg.sample_count.unwrap_or(200);
    let constant = poincare_pointwise_check(&f, &ball, samples)?;
    let passed = constant.is_finite();
    Ok((
        passed,
        json!({
            "scenario": "poincare",
            "function": cfg.function()?.describe(),
            "ball_center": ball.center,
            "ball_radius": ball.radius,
            "sample_count": samples,
            "constant": constant,
            "passed": passed,
        }),
    ))
}

fn run_embed(cfg: &ScenarioConfig) -> Result<(bool, Value)> {
    let domain = cfg.domain()?;
    let q = cfg.q()?;
    let f = cfg.function()?.sample(&domain)?;
    let kind = require(&cfg.embedding, "embedding")?;
    let report = match kind.as_str() {
        "upper" => {
            let w = cfg.weight_spec("weight")?.sample(&domain)?;
            let a = cfg.weight_spec("grandizer")?.sample(&domain)?;
            upper_embedding_check(&f, q, &w, &a)?
        }
        "sobolev" => {
            let w = cfg.weight_spec("weight")?.sample(&domain)?;
            let a = cfg.weight_spec("grandizer")?.sample(&domain)?;
            sobolev_embedding_check(&f, q, &w, &a)?
        }
        "local" => {
            let region = require(&cfg.region, "region")?;
            let delta = *require(&cfg.delta, "delta")?;
            let w = cfg.weight_spec("weight")?;
            let a = cfg.weight_spec("grandizer")?;
            local_integrability_check(&f, region, q, &w, &a, delta)?
        }
        other => bail!("field `embedding`: expected upper, sobolev, or local, got `{other}`"),
    };
    let passed = report.passed;
    Ok((
        passed,
        json!({
            "scenario": "embed",
            "embedding": kind,
            "function": cfg.function()?.describe(),
            "q": q,
            "report": report,
            "passed": passed,
        }),
    ))
}

fn run_probe(cfg: &ScenarioConfig) -> Result<(bool, Value)> {
    let domain = cfg.domain()?;
    let q = cfg.q()?;
    let specs = require(&cfg.family, "family")?;
    let family: Vec<GridFunction> = specs
        .iter()
        .map(|s| s.sample(&domain))
        .collect::<grandlab_core::Result<_>>()?;
    let w = cfg.weight_spec("weight")?.sample(&domain)?;
    let a = cfg.weight_spec("grandizer")?.sample(&domain)?;
    let report = maximal_boundedness_probe(&family, q, &w, &a, &cfg.maximal_config()?)?;
    let passed = report.passed;
    Ok((
        passed,
        json!({
            "scenario": "probe",
            "family": specs.iter().map(|s| s.describe()).collect::<Vec<_>>(),
            "q": q,
            "report": report,
            "passed": passed,
        }),
    ))
}

/// Time the brute per-point sweep against the shared-prefix fast path on a
/// bump profile, and hold the fast path to the brute-force answer: exact in
/// 1D, within the ball-cube comparability bounds in 2D.
pub fn run_bench(cfg: &ScenarioConfig, out_dir: &Path) -> Result<(bool, Value)> {
    if let Some(radii) = &cfg.radii {
        if radii.is_empty() {
            bail!("field `radii`: radius grid must be nonempty");
        }
    }
    let resolutions = cfg
        .resolutions
        .clone()
        .unwrap_or_else(|| vec![256, 512, 1024]);
    if resolutions.is_empty() {
        bail!("field `resolutions`: need at least one resolution");
    }
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for dim in [1usize, 2] {
        for &res in &resolutions {
            let domain = match dim {
                1 => BoxDomain::line(-1.0, 1.0, res)?,
                _ => BoxDomain::square(-1.0, 1.0, res)?,
            };
            let params = if dim == 1 {
                vec![1.0, 0.6, 0.1]
            } else {
                vec![1.0, 0.6, 0.1, -0.1]
            };
            let f = TestFunctionSpec::catalog(CatalogId::Bump, params).sample(&domain)?;
            let mcfg = cfg.maximal_config()?;

            let t0 = Instant::now();
            let fast = maximal_field(&f, &mcfg)?;
            let fast_ms = t0.elapsed().as_secs_f64() * 1e3;

            let n = domain.n_cells();
            let stride = if dim == 1 { 1.max(n / 256) } else { 1.max(n / 64) };
            let sampled: Vec<usize> = (0..n).step_by(stride).collect();
            let t0 = Instant::now();
            let brute: Vec<f64> = sampled
                .iter()
                .map(|&i| maximal_at(&f, &domain.center(i), &mcfg))
                .collect::<grandlab_core::Result<_>>()?;
            let brute_ms = t0.elapsed().as_secs_f64() * 1e3;

            // Per-cell speedup: the brute sweep only visits the sampled
            // cells, so raw wall times are not directly comparable.
            let speedup =
                (brute_ms / sampled.len() as f64) / (fast_ms / n as f64).max(f64::MIN_POSITIVE);
            rows.push(format!("brute,{dim},{res},{},{brute_ms:.3},", sampled.len()));
            rows.push(format!("fast,{dim},{res},{n},{fast_ms:.3},{speedup:.1}"));

            if dim == 1 {
                for (&i, &b) in sampled.iter().zip(&brute) {
                    if (fast.value(i) - b).abs() > 1e-12 * b.abs().max(1.0) {
                        failures.push(format!(
                            "1d res {res} cell {i}: fast {} vs brute {b}",
                            fast.value(i)
                        ));
                        break;
                    }
                }
            } else {
                failures.extend(comparability_failures(
                    &f, &fast, &mcfg, &domain, &sampled, res,
                )?);
            }
        }
    }
    let csv_path = write_csv(
        out_dir,
        "bench.csv",
        "path,dim,resolution,cells,wall_ms,speedup",
        &rows,
    )?;
    let passed = failures.is_empty();
    Ok((
        passed,
        json!({
            "scenario": "bench",
            "resolutions": resolutions,
            "bench_csv": csv_path.file_name().unwrap().to_str(),
            "comparability_failures": failures,
            "passed": passed,
        }),
    ))
}

/// At sampled cells, brute ball averages must stay under (4/pi) x the fast
/// cube value, and the fast cube value under (pi/2) x the brute average over
/// balls scaled by sqrt(2).
fn comparability_failures(
    f: &GridFunction,
    fast_cube: &GridFunction,
    mcfg: &MaximalConfig,
    domain: &BoxDomain,
    sampled: &[usize],
    res: usize,
) -> Result<Vec<String>> {
    let radii = mcfg.radius_grid(domain)?;
    let scale = 2f64.sqrt() * (1.0 + 1e-12);
    let ball_cfg = mcfg.clone().with_shape(WindowShape::Ball).with_radii(radii.clone());
    let scaled_cfg = mcfg
        .clone()
        .with_shape(WindowShape::Ball)
        .with_radii(radii.iter().map(|r| r * scale).collect());
    let c_ball_by_cube = 4.0 / std::f64::consts::PI;
    let c_cube_by_ball = std::f64::consts::PI / 2.0;
    let mut failures = Vec::new();
    for &i in sampled {
        let x = domain.center(i);
        let ball = maximal_at(f, &x, &ball_cfg)?;
        let scaled = maximal_at(f, &x, &scaled_cfg)?;
        if ball > c_ball_by_cube * fast_cube.value(i) * (1.0 + 1e-9) {
            failures.push(format!(
                "2d res {res} cell {i}: ball {ball} above cube bound {}",
                c_ball_by_cube * fast_cube.value(i)
            ));
        }
        if fast_cube.value(i) > c_cube_by_ball * scaled * (1.0 + 1e-9) {
            failures.push(format!(
                "2d res {res} cell {i}: cube {} above scaled ball bound {}",
                fast_cube.value(i),
                c_cube_by_ball * scaled
            ));
        }
        if failures.len() > 8 {
            break;
        }
    }
    Ok(failures)
}

/// `bench` subcommand entry: same runner, but insists the config says bench.
pub fn bench_entry(cfg: &ScenarioConfig) -> Result<bool> {
    if cfg.scenario != Scenario::Bench {
        return Err(anyhow!(
            "field `scenario`: the bench command needs scenario = \"bench\", got \"{}\"",
            cfg.scenario.name()
        ));
    }
    run(cfg)
}
