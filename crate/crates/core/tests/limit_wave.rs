use dirac_front::limit::{
    epsilon_sweep, extract_jump_times, limit_v_profile, Analysis, ReferenceChoice, SweepConfig, TauReference,
};
use dirac_front::model::{Field, ModelParams};
use dirac_front::ode::JumpTime;
use dirac_front::pde::{simulate, Snapshot, SolutionRecord};
use dirac_front::presets::{build_preset, PresetOptions};
use dirac_front::scenario::Scenario;
use dirac_front::wave::{
    dispersion_roots, empirical_front_speed, minimal_speed, solve_profile_bvp, speed_scan, WaveSetup,
};

fn ramp_record(speed: f64) -> SolutionRecord {
    let p = ModelParams::new(0.1, 1.0, -4.0, 4.0, 801, 1.0).unwrap();
    let g = p.grid();
    let snapshots = (0..=20)
        .map(|k| {
            let t = k as f64 * 0.05;
            // linear near v = mu, so interpolation recovers the level set exactly
            let v = Field::from_fn(g, |x| (1.0 + 0.5 * (x + 1.0 - speed * t)).clamp(0.4, 2.0)).unwrap();
            Snapshot {
                t,
                u: Field::constant(g, 0.0).unwrap(),
                w: v.map(f64::ln).unwrap(),
                phi: Field::constant(g, -1.0).unwrap(),
                v,
            }
        })
        .collect();
    SolutionRecord {
        params: p,
        scheme: Default::default(),
        snapshots,
        step_log: Vec::new(),
    }
}

#[test]
fn exact_translation_has_its_speed() {
    let rec = ramp_record(2.0);
    let fs = empirical_front_speed(&rec, 1.0, (0.2, 1.0)).unwrap();
    assert!((fs.speed - 2.0).abs() < 1e-10, "{}", fs.speed);
    assert!(fs.residual < 1e-10);
    assert!(empirical_front_speed(&rec, 1.0, (0.5, 0.5)).is_err());
    assert!(empirical_front_speed(&rec, 5.0, (0.2, 1.0)).is_err());
}

#[test]
fn minimal_speed_profile_decays_at_the_double_root() {
    let sigma = minimal_speed(2f64.ln(), 1.0).unwrap();
    let setup = WaveSetup::new(1.0, 2.0, sigma, 0.05).unwrap();
    let p = solve_profile_bvp(&setup).unwrap();
    assert!(p.monotone && p.residual_norm <= 1e-9);
    let root = match dispersion_roots(sigma, setup.w_plus, 1.0) {
        dirac_front::wave::DispersionRoots::Double(l) => l,
        r => panic!("{r:?}"),
    };
    let rate = p.decay_rate(0.25).unwrap();
    assert!((rate / root - 1.0).abs() < 0.05, "{rate} vs {root}");
    assert!((p.w_values[0] - setup.w_minus).abs() < 1e-6);
    assert!((p.w_values.last().unwrap() - setup.w_plus).abs() < 1e-6);
}

#[test]
fn profile_is_second_order_and_domain_independent() {
    let base = WaveSetup::new(1.0, 2.0, 2.5, 0.05).unwrap();
    let coarse = solve_profile_bvp(&WaveSetup {
        cells_per_eps: 10.0,
        ..base
    })
    .unwrap();
    let fine = solve_profile_bvp(&WaveSetup {
        cells_per_eps: 20.0,
        ..base
    })
    .unwrap();
    let ratio = coarse.truncation_norm() / fine.truncation_norm();
    assert!(ratio >= 3.5, "{ratio}");

    let long = solve_profile_bvp(&WaveSetup {
        half_length: 2.0 * base.half_length,
        ..base
    })
    .unwrap();
    let short = solve_profile_bvp(&base).unwrap();
    let offset = (long.y_nodes.len() - short.y_nodes.len()) / 2;
    let gap = short
        .w_values
        .iter()
        .zip(&long.w_values[offset..])
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(gap < 1e-8, "{gap:e}");
}

#[test]
fn fast_waves_are_wide_and_monotone_slow_ones_are_not() {
    let base = WaveSetup::new(1.0, 2.0, 20.0, 0.05).unwrap();
    let wide = solve_profile_bvp(&base).unwrap();
    assert!(wide.monotone && wide.residual_norm <= 1e-9);
    let scan = speed_scan(&WaveSetup::new(1.0, 2.0, 2.0, 0.05).unwrap(), &[1.2, 2.0, 3.0]);
    assert!(!scan[0].monotone);
    assert!(scan[1].monotone && scan[2].monotone);
}

#[test]
fn extracted_jump_times_follow_a_simulated_front() {
    let eps = 0.05;
    let n = ModelParams::nodes_for_resolution(-3.0, 6.0, eps, 4.0);
    let p = ModelParams::new(eps, 1.0, -3.0, 6.0, n, 2.0).unwrap();
    let init = build_preset("step", &p, &PresetOptions::default()).unwrap();
    let rec = simulate(
        &p,
        &init,
        &dirac_front::pde::SchemeConfig::with_uniform_snapshots(2.0, 80),
    )
    .unwrap();
    let tau = extract_jump_times(&rec, 1.0);
    let g = p.grid();
    let t: Vec<f64> = [1.0, 2.0, 3.0]
        .iter()
        .map(|x| tau[g.nearest(*x)].finite().unwrap())
        .collect();
    // past a start-up lag the diffusive front travels at speed close to 2
    for w in t.windows(2) {
        assert!((w[1] - w[0] - 0.5).abs() < 0.05, "{t:?}");
    }
    assert_eq!(tau[g.nearest(-1.0)], JumpTime::Infinite);
    // the limit nutrient switches branch once tau is passed
    let limit = limit_v_profile(&init, 1.0, 1.0, &TauReference::Given(tau.clone())).unwrap();
    assert!(limit.values()[g.nearest(1.0)] < 1.0);
    assert!((limit.values()[g.nearest(3.0)] - 2.0).abs() < 1e-12);
}

fn small_scenario() -> Scenario {
    Scenario {
        x_min: -4.0,
        x_max: 6.0,
        t_end: 1.0,
        snapshots: 20,
        ..Default::default()
    }
}

#[test]
fn sweep_has_a_row_per_eps_and_is_deterministic() {
    let sc = small_scenario();
    let cfg = SweepConfig {
        eps_list: vec![0.1, 0.05, 0.2],
        reference: Some(ReferenceChoice::FineRun(0.05)),
        analyses: vec![Analysis::JumpTimes, Analysis::Lp, Analysis::WeakMass, Analysis::Sobolev],
        radius: 3.0,
        ..Default::default()
    };
    let a = epsilon_sweep(&sc, &cfg).unwrap();
    assert_eq!(a.rows.len(), 3);
    assert!(a.rows.windows(2).all(|w| w[0].eps > w[1].eps));
    assert!(a.rows.iter().all(|r| r.estimates.is_empty() && r.l1_error.is_some()));
    let b = epsilon_sweep(&sc, &SweepConfig { parallel: true, ..cfg }).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (pa, pb) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    a.write_csv(&pa).unwrap();
    b.write_csv(&pb).unwrap();
    assert_eq!(std::fs::read(&pa).unwrap(), std::fs::read(&pb).unwrap());
    let text = std::fs::read_to_string(&pa).unwrap();
    assert!(text.contains(&sc.hash()));
}
