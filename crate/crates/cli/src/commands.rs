use std::path::Path;

use anyhow::{bail, Context, Result};
use dirac_front::estimates::{fit_sweep, run_estimates, EstimateContext, EstimateReport};
use dirac_front::io::{fmt_f64, load_record, save_record, write_limit_profile, write_trajectory, CsvTable};
use dirac_front::limit::{epsilon_sweep, Analysis, ReferenceChoice, SweepConfig};
use dirac_front::model::{validate_initial_data, InitialData, ModelParams, ValidationThresholds};
use dirac_front::ode::{integrate_point_with, limit_profile, PointInit, PointParams};
use dirac_front::pde::{invariant_drift_report, SolutionRecord};
use dirac_front::scenario::Scenario;
use dirac_front::wave::{
    dispersion_roots, eikonal_wave_phi, empirical_front_speed, far_fields, front_position, minimal_speed,
    solve_profile_bvp, speed_scan, write_speed_scan, write_wave_profile, DispersionRoots, EikonalConvention, WaveSetup,
};
use log::info;

use crate::config::{Config, UsageError};
use crate::output::RunDir;

pub const COMMANDS: &[(&str, &str)] = &[
    ("validate", "Measure the assumptions on the initial data"),
    (
        "ode",
        "Integrate the diffusion-free dynamics at single points and write the limit profile",
    ),
    ("pde", "Simulate the full system and save the record"),
    (
        "estimates",
        "Evaluate the a-priori estimates on a saved or fresh record",
    ),
    (
        "sweep",
        "Run a scenario over several eps and measure convergence to the limit",
    ),
    (
        "wave",
        "Solve the traveling-wave profile problem and measure front speeds",
    ),
    ("figure1", "Write density and nutrient profiles of a step-datum front"),
];

pub fn run(cfg: &Config, run: &mut RunDir) -> Result<Vec<String>> {
    if let Some(f) = &cfg.file {
        run.input(f);
    }
    match cfg.command.as_str() {
        "validate" => validate(cfg, run),
        "ode" => ode(cfg, run),
        "pde" => pde(cfg, run),
        "estimates" => estimates(cfg, run),
        "sweep" => sweep(cfg, run),
        "wave" => wave(cfg, run),
        "figure1" => figure1(cfg, run),
        other => bail!("unknown subcommand '{other}'"),
    }
}

fn comments(cfg: &Config) -> Vec<String> {
    vec![format!("command={} config_hash={}", cfg.command, cfg.hash())]
}

fn scenario_inputs(sc: &Scenario, run: &mut RunDir) {
    for p in [&sc.v0_csv, &sc.u0_csv].into_iter().flatten() {
        run.input(p);
    }
}

fn setup(cfg: &Config, run: &mut RunDir) -> Result<(Scenario, ModelParams, InitialData)> {
    let sc = cfg.scenario()?;
    scenario_inputs(&sc, run);
    let eps: f64 = cfg.get("eps")?;
    let params = sc.params(eps).context("core_model: parameters")?;
    let init = sc.initial_data(&params).context("core_model: initial data")?;
    Ok((sc, params, init))
}

fn validate(cfg: &Config, run: &mut RunDir) -> Result<Vec<String>> {
    let (_, params, init) = setup(cfg, run)?;
    let report = validate_initial_data(&init, &params, &ValidationThresholds::default());
    let mut t = CsvTable::create(
        &run.file("validation.csv"),
        &comments(cfg),
        &["name", "value", "threshold", "pass", "description"],
    )?;
    for e in &report.entries {
        t.row(&[
            e.name.clone(),
            fmt_f64(e.value),
            e.threshold.map_or(String::new(), fmt_f64),
            e.pass.to_string(),
            e.description.clone(),
        ])?;
    }
    t.finish()?;
    write_initial(&run.file("initial.csv"), &init, &comments(cfg))?;
    let mut out = vec![format!(
        "{} checks, {} failed",
        report.entries.len(),
        report.failures().count()
    )];
    out.extend(
        report
            .failures()
            .map(|e| format!("  {} = {} exceeds {:?}", e.name, e.value, e.threshold)),
    );
    Ok(out)
}

fn write_initial(path: &Path, init: &InitialData, comments: &[String]) -> Result<()> {
    let mut t = CsvTable::create(path, comments, &["x", "u0", "v0", "phi0", "w0"])?;
    for (i, x) in init.v0.grid().nodes().enumerate() {
        t.floats(&[
            x,
            init.u0.values()[i],
            init.v0.values()[i],
            init.phi0.values()[i],
            init.w0.values()[i],
        ])?;
    }
    Ok(t.finish()?)
}

fn ode(cfg: &Config, run: &mut RunDir) -> Result<Vec<String>> {
    let (_, params, init) = setup(cfg, run)?;
    let method = cfg.raw("ode_method").to_string();
    let rel_tol: f64 = cfg.get("rel_tol")?;
    let xs: Vec<f64> = cfg.list("x_points")?;
    let profile = limit_profile(&init, params.mu).context("ode_solver: limit profile")?;
    write_limit_profile(&run.file("limit_profile.csv"), &profile, &comments(cfg))?;

    let grid = params.grid();
    let mut t = CsvTable::create(
        &run.file("points.csv"),
        &comments(cfg),
        &[
            "x",
            "phi0",
            "v0",
            "tau_limit",
            "crossing_time",
            "time_integral_u",
            "weight",
            "final_v",
            "max_invariant_drift",
        ],
    )?;
    let mut out = Vec::new();
    for (k, &x) in xs.iter().enumerate() {
        let i = grid.nearest(x);
        let pi = PointInit::from_log_density(init.phi0.values()[i], init.v0.values()[i]);
        let traj = integrate_point_with(&method, PointParams::from(&params), pi, params.t_end, rel_tol)
            .with_context(|| format!("ode_solver: {method} at x = {x}"))?;
        let mut c = comments(cfg);
        c.push(format!("x={}", fmt_f64(grid.node(i))));
        write_trajectory(&run.file(&format!("trajectory_{k}.csv")), &traj, &c)?;
        let crossing = traj.crossing_time(params.mu);
        t.row(&[
            fmt_f64(grid.node(i)),
            fmt_f64(pi.phi0),
            fmt_f64(pi.v0),
            profile.tau[i].to_string(),
            crossing.map_or("inf".into(), fmt_f64),
            fmt_f64(traj.time_integral_u()),
            fmt_f64(profile.weight.values()[i]),
            fmt_f64(traj.final_v()),
            fmt_f64(traj.max_invariant_drift()),
        ])?;
        out.push(format!(
            "x = {:.4}: tau = {}, crossing = {}, int u dt = {:.6}, weight = {:.6}",
            grid.node(i),
            profile.tau[i].finite().map_or("inf".into(), |t| format!("{t:.6}")),
            crossing.map_or("none".into(), |c| format!("{c:.6}")),
            traj.time_integral_u(),
            profile.weight.values()[i]
        ));
    }
    t.finish()?;
    Ok(out)
}

fn pde(cfg: &Config, run: &mut RunDir) -> Result<Vec<String>> {
    let (sc, params, init) = setup(cfg, run)?;
    info!("simulating {} nodes to t = {}", params.grid().len(), params.t_end);
    let record = dirac_front::pde::simulate(&params, &init, &sc.scheme())
        .with_context(|| format!("pde_solver: simulation at eps = {}", params.eps))?;
    let files = save_record(&run.subdir("record")?, &record, &init)?;
    run.adopt(files);
    let drift = invariant_drift_report(&record, &init, &params);
    let mut t = CsvTable::create(&run.file("drift.csv"), &comments(cfg), &["t", "interior", "boundary"])?;
    for i in 0..drift.times.len() {
        t.floats(&[drift.times[i], drift.interior[i], drift.boundary[i]])?;
    }
    t.finish()?;
    Ok(vec![
        format!("{} steps, {} snapshots", record.step_log.len(), record.snapshots.len()),
        format!("max interior invariant drift {:.3e}", drift.max_interior()),
        format!("max u at t_end {:.6e}", record.last().u.max()),
    ])
}

fn write_reports(path: &Path, reports: &[EstimateReport], comments: &[String]) -> Result<()> {
    let mut t = CsvTable::create(
        path,
        comments,
        &[
            "name",
            "eps",
            "value",
            "bound_form",
            "eps_power",
            "fitted_constant",
            "pass",
        ],
    )?;
    for r in reports {
        t.row(&[
            r.name.clone(),
            fmt_f64(r.eps),
            fmt_f64(r.value),
            r.bound_form.clone(),
            fmt_f64(r.eps_power),
            fmt_f64(r.fitted_constant),
            r.pass.to_string(),
        ])?;
    }
    Ok(t.finish()?)
}

fn estimates(cfg: &Config, run: &mut RunDir) -> Result<Vec<String>> {
    let (record, init): (SolutionRecord, InitialData) = match cfg.path("record") {
        Some(dir) => {
            run.input(&dir);
            load_record(&dir).with_context(|| format!("io: loading record {}", dir.display()))?
        }
        None => {
            let (sc, params, init) = setup(cfg, run)?;
            let record = dirac_front::pde::simulate(&params, &init, &sc.scheme())
                .with_context(|| format!("pde_solver: simulation at eps = {}", params.eps))?;
            (record, init)
        }
    };
    let params = record.params;
    let names: Vec<String> = cfg.list("estimate_names")?;
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    let ctx = EstimateContext {
        record: &record,
        init: &init,
        params: &params,
        config: cfg.estimate_config()?,
    };
    let reports = run_estimates(&ctx, &names).context("estimates")?;
    write_reports(&run.file("estimates.csv"), &reports, &comments(cfg))?;
    Ok(reports
        .iter()
        .map(|r| {
            format!(
                "{:<28} {:>12.5e}  C = {:>10.4e}  {}",
                r.name,
                r.value,
                r.fitted_constant,
                if r.pass { "ok" } else { "FAIL" }
            )
        })
        .collect())
}

fn sweep_config(cfg: &Config) -> Result<SweepConfig> {
    let reference = match cfg.raw("reference") {
        "fine_run" => cfg.opt::<f64>("reference_eps")?.map(ReferenceChoice::FineRun),
        "no_diffusion" => Some(ReferenceChoice::NoDiffusion),
        other => bail!(UsageError(format!(
            "invalid value '{other}' for reference (fine_run or no_diffusion)"
        ))),
    };
    Ok(SweepConfig {
        eps_list: cfg.list("eps_list")?,
        analyses: cfg.list::<Analysis>("analyses")?,
        reference,
        radius: cfg.get("radius")?,
        lp_time: cfg.opt("lp_time")?,
        theta: cfg.get("theta")?,
        estimate_config: cfg.estimate_config()?,
        parallel: cfg.get("parallel")?,
    })
}

fn sweep(cfg: &Config, run: &mut RunDir) -> Result<Vec<String>> {
    let sc = cfg.scenario()?;
    scenario_inputs(&sc, run);
    let sweep_cfg = sweep_config(cfg)?;
    let table = epsilon_sweep(&sc, &sweep_cfg).context("limit_analysis: eps sweep")?;
    table.write_csv(&run.file("convergence.csv"))?;
    let mut out = vec![format!(
        "{:>8} {:>12} {:>12} {:>12} {:>12} {:>12}",
        "eps", "jump_time", "l1", "l2", "weak_mass", "sobolev"
    )];
    let cell = |x: Option<f64>| x.map_or("-".to_string(), |x| format!("{x:.4e}"));
    for r in &table.rows {
        out.push(format!(
            "{:>8} {:>12} {:>12} {:>12} {:>12} {:>12}",
            r.eps,
            cell(r.jump_time_error),
            cell(r.l1_error),
            cell(r.l2_error),
            cell(r.weak_mass_error),
            cell(r.sobolev_value)
        ));
    }
    if sweep_cfg.analyses.contains(&Analysis::Estimates) {
        table.write_estimates_csv(&run.file("estimates.csv"))?;
        let runs: Vec<Vec<EstimateReport>> = table.rows.iter().map(|r| r.estimates.clone()).collect();
        let fits = fit_sweep(&runs);
        let mut t = CsvTable::create(
            &run.file("estimate_fits.csv"),
            &comments(cfg),
            &["name", "eps_power", "constant", "spread"],
        )?;
        for f in &fits {
            t.row(&[
                f.name.clone(),
                fmt_f64(f.eps_power),
                fmt_f64(f.constant),
                fmt_f64(f.spread),
            ])?;
            out.push(format!(
                "{:<28} C = {:>10.4e}  spread {:.3}",
                f.name, f.constant, f.spread
            ));
        }
        t.finish()?;
    }
    Ok(out)
}

fn roots_text(r: &DispersionRoots) -> String {
    match r {
        DispersionRoots::Real(a, b) => format!("real {} {}", fmt_f64(*a), fmt_f64(*b)),
        DispersionRoots::Double(l) => format!("double {}", fmt_f64(*l)),
        DispersionRoots::Complex { re, im } => format!("complex {} {}", fmt_f64(*re), fmt_f64(*im)),
    }
}

fn wave(cfg: &Config, run: &mut RunDir) -> Result<Vec<String>> {
    let mu: f64 = cfg.get("mu")?;
    let eps: f64 = cfg.get("eps")?;
    let v_plus: f64 = cfg.get("v_plus")?;
    let convention: EikonalConvention = cfg.get("eikonal_convention")?;
    let pair = far_fields(mu, v_plus).context("traveling_wave: far fields")?;
    let s_min = minimal_speed(pair.w_plus, mu).context("traveling_wave: minimal speed")?;
    let sigma = cfg.opt::<f64>("sigma")?.unwrap_or(s_min);

    let mut setup = WaveSetup::new(mu, v_plus, sigma, eps).context("traveling_wave: setup")?;
    setup.cells_per_eps = cfg.get("bvp_cells_per_eps")?;
    let profile = solve_profile_bvp(&setup).context("traveling_wave: profile problem")?;
    write_wave_profile(&run.file("profile.csv"), &profile)?;
    let scan = speed_scan(&setup, &cfg.list::<f64>("sigma_list")?);
    write_speed_scan(&run.file("speed_scan.csv"), &scan)?;
    let ahead = dispersion_roots(sigma, pair.w_plus, mu);
    let behind = dispersion_roots(sigma, pair.w_minus, mu);
    let slopes = eikonal_wave_phi(sigma, pair.v_minus(), v_plus, mu, convention).ok();

    let mut rows: Vec<(String, String)> = vec![
        ("mu".into(), fmt_f64(mu)),
        ("eps".into(), fmt_f64(eps)),
        ("v_plus".into(), fmt_f64(v_plus)),
        ("v_minus_far_field".into(), fmt_f64(pair.v_minus())),
        ("minimal_speed".into(), fmt_f64(s_min)),
        ("sigma".into(), fmt_f64(sigma)),
        ("roots_ahead".into(), roots_text(&ahead)),
        ("roots_behind".into(), roots_text(&behind)),
        ("eikonal_convention".into(), convention.name().into()),
        ("p_minus".into(), slopes.map_or("nan".into(), |s| fmt_f64(s.p_minus))),
        ("p_plus".into(), slopes.map_or("nan".into(), |s| fmt_f64(s.p_plus))),
        ("bvp_residual".into(), fmt_f64(profile.residual_norm)),
        ("bvp_truncation".into(), fmt_f64(profile.truncation_norm())),
        ("bvp_monotone".into(), profile.monotone.to_string()),
        (
            "bvp_decay_rate".into(),
            profile.decay_rate(0.25).map_or("nan".into(), fmt_f64),
        ),
    ];
    let mut out = vec![
        format!("minimal speed {s_min}"),
        format!(
            "profile at sigma = {sigma}: residual {:.2e}, monotone {}, decay rate {:?}",
            profile.residual_norm,
            profile.monotone,
            profile.decay_rate(0.25)
        ),
    ];

    if cfg.get::<bool>("front_run")? {
        let t_end: f64 = cfg.get("wave_t_end")?;
        let window: Vec<f64> = cfg.list("wave_window")?;
        if window.len() != 2 {
            bail!(UsageError("wave-window takes two times, e.g. 4,8".into()));
        }
        let sc = Scenario {
            name: "wave".into(),
            mu,
            x_min: cfg.get("wave_x_min")?,
            x_max: cfg.get("wave_x_max")?,
            cells_per_eps: cfg.get("wave_cells_per_eps")?,
            t_end,
            snapshots: (10.0 * t_end).ceil() as usize,
            preset: "step".into(),
            preset_options: dirac_front::presets::PresetOptions {
                v_left: cfg.get("v_left")?,
                v_right: v_plus,
                phi_slope: cfg.get("phi_slope")?,
                ..Default::default()
            },
            v0_csv: None,
            u0_csv: None,
            scheme: cfg.scheme()?,
        };
        info!("front-speed run on [{}, {}] to t = {t_end}", sc.x_min, sc.x_max);
        let res = sc
            .run(eps)
            .with_context(|| format!("pde_solver: front-speed run at eps = {eps}"))?;
        let fs = empirical_front_speed(&res.record, mu, (window[0], window[1]))
            .context("traveling_wave: empirical front speed")?;
        let mut t = CsvTable::create(&run.file("front.csv"), &comments(cfg), &["t", "x_front"])?;
        for (tt, x) in &fs.positions {
            t.floats(&[*tt, *x])?;
        }
        t.finish()?;
        let rel = (fs.speed - s_min).abs() / s_min;
        rows.push(("empirical_speed".into(), fmt_f64(fs.speed)));
        rows.push(("relative_error".into(), fmt_f64(rel)));
        rows.push(("fit_residual".into(), fmt_f64(fs.residual)));
        rows.push(("front_dx".into(), fmt_f64(res.params.grid().dx())));
        out.push(format!(
            "empirical speed {:.6} (relative error {:.2e}, fit residual {:.2e})",
            fs.speed, rel, fs.residual
        ));
    }
    let mut t = CsvTable::create(&run.file("speed.csv"), &comments(cfg), &["key", "value"])?;
    for (k, v) in rows {
        t.row(&[k, v])?;
    }
    t.finish()?;
    Ok(out)
}

fn figure1(cfg: &Config, run: &mut RunDir) -> Result<Vec<String>> {
    let eps: f64 = cfg.get("eps")?;
    let t_end: f64 = cfg.get("figure_t_end")?;
    let sc = Scenario {
        name: "figure1".into(),
        mu: cfg.get("mu")?,
        x_min: cfg.get("figure_x_min")?,
        x_max: cfg.get("figure_x_max")?,
        cells_per_eps: 8.0,
        t_end,
        snapshots: cfg.get("figure_snapshots")?,
        preset: "step".into(),
        preset_options: cfg.preset_options()?,
        v0_csv: None,
        u0_csv: None,
        scheme: cfg.scheme()?,
    };
    let res = sc
        .run(eps)
        .with_context(|| format!("pde_solver: figure run at eps = {eps}"))?;
    let snaps = &res.record.snapshots;
    let mut header = vec!["x".to_string()];
    header.extend(snaps.iter().map(|s| format!("t={}", s.t)));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    for (name, pick) in [("figure1_u.csv", 0usize), ("figure1_v.csv", 1)] {
        let mut t = CsvTable::create(&run.file(name), &comments(cfg), &header)?;
        for (i, x) in res.params.grid().nodes().enumerate() {
            let mut row = vec![x];
            row.extend(
                snaps
                    .iter()
                    .map(|s| if pick == 0 { s.u.values()[i] } else { s.v.values()[i] }),
            );
            t.floats(&row)?;
        }
        t.finish()?;
    }
    let xs: Vec<f64> = res.params.grid().nodes().collect();
    Ok(snaps
        .iter()
        .map(|s| {
            let u = s.u.values();
            let peak = (0..u.len()).max_by(|&a, &b| u[a].total_cmp(&u[b])).unwrap_or(0);
            format!(
                "t = {:.3}: u peak {:.4e} at x = {:.3}, front at x = {}",
                s.t,
                u[peak],
                xs[peak],
                front_position(&xs, s.v.values(), res.params.mu).map_or("-".into(), |x| format!("{x:.3}"))
            )
        })
        .collect())
}
