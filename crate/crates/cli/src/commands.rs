use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clines_core::genetics::FitnessParams;
use clines_core::pde::{
    gametes_from_pq, simulate_gametes, simulate_pqd, simulate_reduced, tanh_front, Boundary, DiffusionScheme, Grid1D,
    Quantity, ReducedParams, SimConfig, Splitting, Trajectory,
};
use clines_core::speed::{
    bvp_coefficient_extrapolated, c1_exact, c1_series, c1_star, c_eps_from_profile, compare_speeds,
    single_cline_coefficient, write_plot_data, write_reports_csv, zero_recombination_coefficient, BvpOptions,
    CompareConfig, SpeedCase, C1_QUAD_TOL,
};
use clines_core::stability::{
    assemble_l, relaxation_shift, solvability_quotient, stability_report, write_spectrum_csv,
};
use clines_core::standing::{
    barrier_condition_holds, decay_rate, default_x_max, left_decay_rate, profile_from_quadrature,
    profile_from_shooting, WaveProfile,
};
use serde_json::{json, Value as Json};

use crate::config::{Command, RunConfig};
use crate::output::{CliError, CliResult, OutDir};
use crate::svg::{line_plot, Series};

/// Runs one resolved command into `dir` and returns the manifest path.
pub fn run(cfg: &RunConfig, dir: PathBuf, threads: usize) -> CliResult<PathBuf> {
    let mut out = OutDir::create(dir)?;
    let report = match cfg.command {
        Command::Simulate => simulate(cfg, &mut out, threads)?,
        Command::Standing => standing(cfg, &mut out)?,
        Command::Speed => speed(cfg, &mut out, threads)?,
        Command::Stability => stability(cfg, &mut out)?,
        Command::Compare => compare(cfg, &mut out)?,
        Command::Sweep => unreachable!("sweep is dispatched by run_sweep"),
    };
    out.finish(cfg, threads, report)
}

fn f(x: f64) -> String {
    format!("{x:.16e}")
}

// --- simulate -------------------------------------------------------------

fn sim_config(cfg: &RunConfig) -> SimConfig {
    SimConfig {
        dt: cfg.num("dt"),
        t_end: cfg.num("t_end"),
        record_every: cfg.int("record_every"),
        boundary: match cfg.word("boundary").as_str() {
            "pinned" => Boundary::Pinned,
            _ => Boundary::NoFlux,
        },
        diffusion: match cfg.word("diffusion").as_str() {
            "explicit" => DiffusionScheme::Explicit,
            _ => DiffusionScheme::CrankNicolson,
        },
        splitting: match cfg.word("splitting").as_str() {
            "lie" => Splitting::Lie,
            _ => Splitting::Strang,
        },
    }
}

/// Long-format CSV `t,x,<fields>` with every `stride`-th node.
fn fields_csv(traj: &Trajectory, fields: &[Quantity], stride: usize) -> CliResult<String> {
    let cols: Vec<usize> = fields
        .iter()
        .map(|q| {
            traj.quantities
                .iter()
                .position(|x| x == q)
                .ok_or_else(|| CliError::Config(format!("field {} missing", q.name())))
        })
        .collect::<CliResult<_>>()?;
    let mut s = String::from("t,x");
    for q in fields {
        s.push(',');
        s.push_str(q.name());
    }
    s.push('\n');
    for (t, snap) in traj.times.iter().zip(&traj.snapshots) {
        for i in (0..traj.grid.n).step_by(stride.max(1)) {
            let _ = write!(s, "{},{}", f(*t), f(traj.grid.x(i)));
            for &j in &cols {
                let _ = write!(s, ",{}", f(snap[j].values[i]));
            }
            s.push('\n');
        }
    }
    Ok(s)
}

fn fronts_svg(traj: &Trajectory, title: &str) -> String {
    let series: Vec<Series> = traj
        .quantities
        .iter()
        .enumerate()
        .filter(|(_, q)| q.has_level_front())
        .map(|(j, q)| {
            let ys: Vec<f64> = traj.fronts.iter().map(|row| row[j]).collect();
            Series::new(q.name(), &traj.times, &ys)
        })
        .collect();
    line_plot(title, "t", "front position", &series)
}

fn final_svg(traj: &Trajectory, title: &str) -> String {
    let xs = traj.grid.nodes();
    let last = traj.snapshots.last().expect("initial snapshot");
    let series: Vec<Series> = last
        .iter()
        .map(|fl| Series::new(fl.quantity.name(), &xs, &fl.values))
        .collect();
    line_plot(title, "x", "value", &series)
}

/// First recorded time at which the two fronts are within one cell.
fn stacked_time(traj: &Trajectory, a: usize, b: usize) -> Option<f64> {
    traj.times
        .iter()
        .zip(&traj.fronts)
        .find(|(_, row)| (row[a] - row[b]).abs() < traj.grid.dx())
        .map(|(t, _)| *t)
}

fn trajectory_summary(traj: &Trajectory) -> Json {
    let last = traj.fronts.last().expect("initial snapshot");
    let fronts: serde_json::Map<String, Json> = traj
        .quantities
        .iter()
        .zip(last)
        .filter(|(q, _)| q.has_level_front())
        .map(|(q, v)| (q.name().to_string(), if v.is_finite() { json!(v) } else { Json::Null }))
        .collect();
    let range_excess = traj
        .snapshots
        .iter()
        .flat_map(|s| s.iter().map(|fl| fl.range_excess()))
        .fold(0.0, f64::max);
    json!({
        "t_final": traj.times.last(),
        "snapshots": traj.times.len(),
        "final_fronts": fronts,
        "max_range_excess": range_excess,
    })
}

fn simulate(cfg: &RunConfig, out: &mut OutDir, threads: usize) -> CliResult<Json> {
    let (s_cost, r, s, sigma2) = (cfg.num("S"), cfg.num("r"), cfg.num("s"), cfg.num("sigma2"));
    let model = cfg.word("model");
    let reduced = model == "reduced";
    let scale = if reduced { 1.0 } else { (0.5 * sigma2).sqrt() };
    let offset = if reduced { 0.0 } else { cfg.num("offset") };
    let half_width = cfg
        .num_or_auto("half_width")
        .unwrap_or(default_x_max(s_cost.max(1e-12)) * scale + 0.5 * offset);
    let grid = Grid1D::symmetric(half_width, cfg.num("dx"))?;
    let sim = sim_config(cfg);
    let stride = cfg.int("x_stride");

    let k = s_cost.sqrt() / scale;
    let shape: Box<dyn Fn(f64) -> f64> = match cfg.word("init").as_str() {
        "profile" => {
            let u0 = profile_from_quadrature(s_cost, r, half_width / scale + offset + 1.0, 0.05)?;
            Box::new(move |x| u0.value_at(x / scale))
        }
        // a unit-width ramp; a bare jump overshoots [0, 1] in the first
        // reaction stage
        "step" => Box::new(|x: f64| (0.5 - x).clamp(0.0, 1.0)),
        _ => Box::new(move |x| tanh_front(x, 0.0, k)),
    };
    let p = grid.sample(|x| shape(x + 0.5 * offset));
    let q = grid.sample(|x| shape(x - 0.5 * offset));

    let mut report = serde_json::Map::new();
    let svg = cfg.flag("svg");
    if reduced {
        let params = ReducedParams::new(s_cost, cfg.num("eps"), Some(r))?;
        let traj = simulate_reduced(p, &params, &grid, &sim)?;
        out.write(
            "u_reduced.csv",
            fields_csv(&traj, &[Quantity::UReduced], stride)?.as_bytes(),
        )?;
        out.write_with("fronts.csv", |b| traj.write_fronts_csv(b))?;
        if svg {
            out.write("fronts.svg", fronts_svg(&traj, "front position").as_bytes())?;
            out.write("final.svg", final_svg(&traj, "final state").as_bytes())?;
        }
        let mut summary = trajectory_summary(&traj);
        let t_end = sim.t_end;
        if let Ok(fit) = traj.speed(Quantity::UReduced, (0.5 * t_end, t_end)) {
            summary["fitted_speed"] = json!(fit.fitted);
        }
        report.insert("reduced".into(), summary);
        return Ok(Json::Object(report));
    }

    let fp = FitnessParams::symmetric(s, s_cost, r, sigma2)?;
    let want_pqd = model == "pqd" || model == "both";
    let want_gam = model == "gametes" || model == "both";
    let (pqd, gam) = std::thread::scope(|scope| {
        let run_pqd = || want_pqd.then(|| simulate_pqd([p.clone(), q.clone(), vec![0.0; grid.n]], &fp, &grid, &sim));
        let run_gam = || want_gam.then(|| simulate_gametes(gametes_from_pq(&p, &q), &fp, &grid, &sim));
        if threads > 1 && want_pqd && want_gam {
            let h = scope.spawn(run_gam);
            let a = run_pqd();
            (a, h.join().expect("gamete worker panicked"))
        } else {
            (run_pqd(), run_gam())
        }
    });

    if let Some(traj) = pqd {
        let traj = traj?;
        for q in [Quantity::P, Quantity::Q, Quantity::D] {
            out.write(
                &format!("{}.csv", q.name()),
                fields_csv(&traj, &[q], stride)?.as_bytes(),
            )?;
        }
        out.write_with("fronts_pqd.csv", |b| traj.write_fronts_csv(b))?;
        if svg {
            out.write("fronts_pqd.svg", fronts_svg(&traj, "allele fronts").as_bytes())?;
            out.write("final_pqd.svg", final_svg(&traj, "final p, q, D").as_bytes())?;
        }
        let mut summary = trajectory_summary(&traj);
        summary["stacked_at"] = json!(stacked_time(&traj, 0, 1));
        let max_d = traj
            .snapshots
            .iter()
            .map(|s| s[2].values.iter().fold(0.0f64, |m, v| m.max(v.abs())))
            .fold(0.0, f64::max);
        summary["max_abs_D"] = json!(max_d);
        report.insert("pqd".into(), summary);
    }
    if let Some(traj) = gam {
        let traj = traj?;
        let panels: Vec<(&str, Vec<Quantity>)> = if model == "both" {
            // v and w share a panel: they are mirror images in the symmetric case
            vec![
                ("u", vec![Quantity::U]),
                ("v_w", vec![Quantity::V, Quantity::W]),
                ("z", vec![Quantity::Z]),
            ]
        } else {
            [Quantity::U, Quantity::V, Quantity::W, Quantity::Z]
                .iter()
                .map(|&q| (q.name(), vec![q]))
                .collect()
        };
        for (name, fields) in panels {
            out.write(&format!("{name}.csv"), fields_csv(&traj, &fields, stride)?.as_bytes())?;
        }
        out.write_with("fronts_gametes.csv", |b| traj.write_fronts_csv(b))?;
        if svg {
            out.write("final_gametes.svg", final_svg(&traj, "final u, v, w, z").as_bytes())?;
        }
        let sum_err = traj
            .snapshots
            .iter()
            .flat_map(|snap| {
                (0..traj.grid.n).map(move |i| (snap.iter().map(|fl| fl.values[i]).sum::<f64>() - 1.0).abs())
            })
            .fold(0.0, f64::max);
        let mut summary = trajectory_summary(&traj);
        summary["gamete_sum_error"] = json!(sum_err);
        report.insert("gametes".into(), summary);
    }
    Ok(Json::Object(report))
}

// --- standing -------------------------------------------------------------

fn profile_report(p: &WaveProfile) -> Json {
    json!({
        "nodes": p.len(),
        "symmetry_defect": p.symmetry_defect(),
        "ode_residual": p.ode_residual(),
        "slope_law_defect": p.slope_law_defect(),
        "decay_rate_right": decay_rate(p).ok(),
        "decay_rate_left": left_decay_rate(p).ok(),
        "expected_decay_rate": -p.s_cost.sqrt(),
    })
}

fn standing(cfg: &RunConfig, out: &mut OutDir) -> CliResult<Json> {
    let (s_cost, r, dx) = (cfg.num("S"), cfg.num("r"), cfg.num("dx"));
    let x_max = cfg
        .num_or_auto("x_max")
        .unwrap_or_else(|| default_x_max(s_cost.max(1e-12)));
    let method = cfg.word("method");
    let shooting = method == "shooting";

    let (profile, crossing) = if shooting {
        let o = profile_from_shooting(s_cost, r, x_max, dx)?;
        (o.profile, Some(o.crossing_slope))
    } else {
        (profile_from_quadrature(s_cost, r, x_max, dx)?, None)
    };
    // cross-check against the other construction; its failure is reported,
    // not fatal
    let other = if shooting {
        profile_from_quadrature(s_cost, r, x_max, dx)
    } else {
        profile_from_shooting(s_cost, r, x_max, dx).map(|o| o.profile)
    };
    let cross = match other {
        Ok(o) => {
            let d = profile
                .u
                .iter()
                .zip(&o.u)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            json!({ "method": if shooting { "quadrature" } else { "shooting" }, "sup_difference": d })
        }
        Err(e) => json!({ "error": e.to_string() }),
    };

    out.write_with("profile.csv", |b| profile.write_csv(b))?;
    if cfg.flag("svg") {
        let ys: Vec<f64> = profile.x.iter().map(|_| 0.5).collect();
        out.write(
            "profile.svg",
            line_plot(
                "standing wave",
                "x",
                "u",
                &[
                    Series::new("u0", &profile.x, &profile.u),
                    Series::new("1/2", &profile.x, &ys),
                ],
            )
            .as_bytes(),
        )?;
        let line: Vec<f64> = profile.u.iter().map(|u| s_cost.sqrt() * (u - 1.0)).collect();
        out.write(
            "phase.svg",
            line_plot(
                "phase plane",
                "u",
                "u'",
                &[
                    Series::new("orbit", &profile.u, &profile.du),
                    Series::new("linear unstable manifold", &profile.u, &line),
                ],
            )
            .as_bytes(),
        )?;
    }
    let mut report = profile_report(&profile);
    report["method"] = json!(method);
    report["barrier_condition"] = json!(barrier_condition_holds(s_cost, r));
    report["crossing_slope"] = json!(crossing);
    report["cross_check"] = cross;
    report["c1_exact"] = json!(c1_exact(s_cost, r, C1_QUAD_TOL).ok());
    out.write_json("report.json", &report)?;
    Ok(report)
}

// --- speed ----------------------------------------------------------------

fn speed(cfg: &RunConfig, out: &mut OutDir, threads: usize) -> CliResult<Json> {
    let (s_cost, s, sigma2) = (cfg.num("S"), cfg.num("s"), cfg.num("sigma2"));
    let cases: Vec<SpeedCase> = cfg
        .list("r_grid")
        .into_iter()
        .map(|r| SpeedCase { s_cost, r, s, sigma2 })
        .collect();
    // validate every case before any simulation starts
    for c in &cases {
        FitnessParams::symmetric(c.s, c.s_cost, c.r, c.sigma2)?;
    }
    let cc = CompareConfig {
        width_factor: cfg.num("width_factor"),
        dx: cfg.num("dx"),
        dt: cfg.num("dt"),
        t_end: cfg.num("t_end"),
        transient: cfg.num("transient"),
        record_every: cfg.int("record_every"),
    };
    let reports = compare_speeds(&cases, &cc, threads)?;
    out.write_with("speed.csv", |b| write_reports_csv(&reports, b))?;
    out.write_with("plot.csv", |b| write_plot_data(&reports, b))?;
    if cfg.flag("svg") {
        let mut sorted = reports.clone();
        sorted.sort_by(|a, b| a.case.r.total_cmp(&b.case.r));
        let rs: Vec<f64> = sorted.iter().map(|x| x.case.r).collect();
        let col = |g: fn(&clines_core::speed::SpeedReport) -> f64| sorted.iter().map(g).collect::<Vec<f64>>();
        out.write(
            "speed.svg",
            line_plot(
                "front speed",
                "r",
                "speed",
                &[
                    Series::new("measured", &rs, &col(|x| x.measured_speed)),
                    Series::new("s c1*", &rs, &col(|x| x.predicted_star)),
                    Series::new("s c1", &rs, &col(|x| x.predicted_exact)),
                ],
            )
            .as_bytes(),
        )?;
    }
    let gaps: Vec<Json> = reports
        .iter()
        .map(|x| json!({ "r": x.case.r, "relative_gap": x.relative_gap }))
        .collect();
    Ok(json!({ "cases": reports.len(), "gaps": gaps }))
}

// --- stability ------------------------------------------------------------

fn stability(cfg: &RunConfig, out: &mut OutDir) -> CliResult<Json> {
    let (s_cost, r, dx) = (cfg.num("S"), cfg.num("r"), cfg.num("dx"));
    let x_max = cfg
        .num_or_auto("x_max")
        .unwrap_or_else(|| default_x_max(s_cost.max(1e-12)));
    let u0 = profile_from_quadrature(s_cost, r, x_max, dx)?;
    let k = cfg.int("k").max(1);
    let (rep, spec) = stability_report(&u0, k)?;
    let op = assemble_l(&u0)?;
    out.write_with("spectrum.csv", |b| write_spectrum_csv(&op, &spec, b))?;
    if cfg.flag("svg") {
        let series: Vec<Series> = spec
            .vectors
            .iter()
            .zip(&spec.values)
            .map(|(v, l)| Series::new(&format!("lambda = {l:.3e}"), &op.x, v))
            .collect();
        out.write(
            "eigenvectors.svg",
            line_plot("leading eigenvectors of L", "x", "v", &series).as_bytes(),
        )?;
    }
    let mut report = serde_json::to_value(&rep).expect("report serialises");
    let eps_amp = cfg.num("eps_amp");
    if eps_amp != 0.0 {
        let h: Vec<f64> = match cfg.word("perturbation").as_str() {
            "odd" => u0.x.iter().map(|x| x * (-x * x).exp()).collect(),
            _ => u0.x.iter().map(|x| (-x * x).exp()).collect(),
        };
        let rel = relaxation_shift(&u0, &h, eps_amp, cfg.num("dt"), cfg.num("horizon"))?;
        report["relaxation"] = serde_json::to_value(rel).expect("report serialises");
    }
    out.write_json("report.json", &report)?;
    Ok(report)
}

// --- compare --------------------------------------------------------------

fn compare(cfg: &RunConfig, out: &mut OutDir) -> CliResult<Json> {
    let (s_cost, dx) = (cfg.num("S"), cfg.num("dx"));
    let pair = cfg.list("eps_pair");
    if pair.len() != 2 {
        return Err(CliError::Config(format!(
            "`eps_pair` needs two values, got {}",
            pair.len()
        )));
    }
    let rs = cfg.list("r_grid");
    let x_max = default_x_max(s_cost.max(1e-12));
    let opts = BvpOptions {
        dx,
        ..BvpOptions::new(s_cost)
    };
    let mut csv = String::from(
        "r,S_over_r,c1_exact,c1_series,c1_star,c_eps_profile,solvability,bvp_extrapolated,single_cline,zero_recombination\n",
    );
    let mut rows = Vec::new();
    for &r in &rs {
        let exact = c1_exact(s_cost, r, C1_QUAD_TOL)?;
        let u0 = profile_from_quadrature(s_cost, r, x_max, dx)?;
        let row = [
            r,
            s_cost / r,
            exact,
            c1_series(s_cost, r, 2),
            c1_star(s_cost, r),
            c_eps_from_profile(&u0)?,
            solvability_quotient(&u0)?,
            bvp_coefficient_extrapolated(s_cost, r, (pair[0], pair[1]), &opts)?,
            single_cline_coefficient(s_cost),
            zero_recombination_coefficient(s_cost),
        ];
        csv.push_str(&row.iter().map(|&v| f(v)).collect::<Vec<_>>().join(","));
        csv.push('\n');
        rows.push(row);
    }
    out.write("compare.csv", csv.as_bytes())?;
    if cfg.flag("svg") {
        let names = [
            "c1 exact",
            "series",
            "c1*",
            "profile",
            "solvability",
            "BVP",
            "single cline",
            "r = 0",
        ];
        let mut order: Vec<usize> = (0..rows.len()).collect();
        order.sort_by(|&a, &b| rows[a][0].total_cmp(&rows[b][0]));
        let xs: Vec<f64> = order.iter().map(|&i| rows[i][0]).collect();
        let series: Vec<Series> = names
            .iter()
            .enumerate()
            .map(|(j, n)| Series::new(n, &xs, &order.iter().map(|&i| rows[i][j + 2]).collect::<Vec<_>>()))
            .collect();
        out.write(
            "compare.svg",
            line_plot("speed coefficient", "r", "c1", &series).as_bytes(),
        )?;
    }
    let worst = rows
        .iter()
        .map(|row| {
            [row[5], row[6], row[7]]
                .iter()
                .map(|v| ((v - row[2]) / row[2]).abs())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    Ok(json!({ "rows": rows.len(), "max_relative_disagreement": worst }))
}

// --- sweep ----------------------------------------------------------------

/// Runs `base` once per value of the swept key, each into its own
/// subdirectory `run-NNN`, on a pool of `threads` workers.
pub fn run_sweep(sweep: &RunConfig, base: &RunConfig, dir: PathBuf, threads: usize) -> CliResult<(PathBuf, i32)> {
    let key = sweep.word("vary");
    let values = sweep.list("values");
    let runs: Vec<RunConfig> = values
        .iter()
        .map(|&v| base.with_swept(&key, v))
        .collect::<Result<_, _>>()?;
    let mut out = OutDir::create(dir)?;
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<PathBuf, CliError>>>> = Mutex::new((0..runs.len()).map(|_| None).collect());
    let workers = threads.clamp(1, runs.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= runs.len() {
                    break;
                }
                let sub = out.path.join(format!("run-{i:03}"));
                let res = run(&runs[i], sub, 1);
                results.lock().expect("no poisoned lock")[i] = Some(res);
            });
        }
    });
    let results = results.into_inner().expect("no poisoned lock");
    let mut csv = format!("run,{key},status,exit_code,run_id,message\n");
    let mut worst = 0;
    let mut rows = Vec::new();
    for (i, (res, cfg)) in results.into_iter().zip(&runs).enumerate() {
        let res = res.expect("every run executed");
        let (status, code, msg) = match &res {
            Ok(_) => ("ok", 0, String::new()),
            Err(e) => (
                "failed",
                e.code(),
                e.to_json(Some(cfg.command.name()))["error"]["message"].to_string(),
            ),
        };
        if let Err(e) = &res {
            out.write_json(&format!("run-{i:03}-error.json"), &e.to_json(Some(cfg.command.name())))?;
        }
        worst = worst.max(code);
        let _ = writeln!(
            csv,
            "{i},{},{status},{code},{},{}",
            values[i],
            cfg.run_id(),
            msg.replace(',', ";")
        );
        rows.push(json!({ "run": i, "value": values[i], "status": status, "exit_code": code }));
    }
    out.write("sweep.csv", csv.as_bytes())?;
    let mut merged = sweep.clone();
    for (k, e) in &base.entries {
        if *k != key {
            merged.entries.insert(format!("{}.{k}", base.command.name()), e.clone());
        }
    }
    let path = out.finish(&merged, threads, json!({ "runs": rows }))?;
    Ok((path, worst))
}
