use dirac_front::io::{load_record, save_record};
use dirac_front::model::{Field, InitialData, ModelParams};
use dirac_front::ode::{integrate_point, PointInit, PointParams};
use dirac_front::pde::{invariant_drift_report, simulate, SchemeConfig, VariableSet};
use dirac_front::presets::{build_preset, PresetOptions};
use dirac_front::wave::front_position;

fn fixed(dt: f64, t_end: f64, snaps: usize) -> SchemeConfig {
    SchemeConfig {
        adaptive_dt: false,
        dt_initial: dt,
        ..SchemeConfig::with_uniform_snapshots(t_end, snaps)
    }
}

#[test]
fn without_cells_the_nutrient_stays_put() {
    let p = ModelParams::new(0.1, 1.0, -2.0, 2.0, 161, 1.0).unwrap();
    let g = p.grid();
    let v0 = Field::from_fn(g, |x| 1.25 + 0.75 * x.tanh()).unwrap();
    let phi0 = Field::constant(g, -60.0 * p.eps).unwrap();
    let init = InitialData::from_log_density(&p, phi0, v0.clone()).unwrap();
    for vs in [VariableSet::HopfCole, VariableSet::Direct] {
        let sc = SchemeConfig {
            variable_set: vs,
            ..SchemeConfig::with_uniform_snapshots(1.0, 4)
        };
        let rec = simulate(&p, &init, &sc).unwrap();
        for s in &rec.snapshots {
            let change =
                s.v.values()
                    .iter()
                    .zip(v0.values())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
            assert!(change < 1e-12, "{vs:?} t {}: {change:e}", s.t);
        }
    }
}

#[test]
fn flat_data_follow_the_point_dynamics() {
    let eps = 0.1;
    let p = ModelParams::new(eps, 1.0, -1.0, 1.0, 41, 5.0).unwrap();
    let opts = PresetOptions {
        u_const: 0.5,
        ..Default::default()
    };
    let init = build_preset("constant", &p, &opts).unwrap();
    let point = integrate_point(
        PointParams { eps, mu: 1.0 },
        PointInit::from_density(eps, 0.5, 2.0).unwrap(),
        5.0,
        1e-12,
    )
    .unwrap();
    for vs in [VariableSet::HopfCole, VariableSet::Direct] {
        let sc = SchemeConfig {
            variable_set: vs,
            ..fixed(1e-3, 5.0, 10)
        };
        let rec = simulate(&p, &init, &sc).unwrap();
        let err = rec
            .last()
            .v
            .values()
            .iter()
            .map(|v| (v - point.final_v()).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-6, "{vs:?}: {err:e}");
    }
}

#[test]
fn step_datum_gives_a_single_spike_on_a_monotone_front() {
    let eps = 0.05;
    let n = ModelParams::nodes_for_resolution(-5.0, 10.0, eps, 4.0);
    let p = ModelParams::new(eps, 1.0, -5.0, 10.0, n, 2.0).unwrap();
    let init = build_preset("step", &p, &PresetOptions::default()).unwrap();
    let rec = simulate(&p, &init, &SchemeConfig::with_uniform_snapshots(2.0, 4)).unwrap();
    let s = rec.last();
    let u = s.u.values();
    let v = s.v.values();
    let peak = (0..u.len()).max_by(|&a, &b| u[a].total_cmp(&u[b])).unwrap();
    assert!(peak > 0 && peak < u.len() - 1);
    let level = 1e-3 * u[peak];
    let maxima = (1..u.len() - 1)
        .filter(|&i| u[i] > level && u[i] >= u[i - 1] && u[i] > u[i + 1])
        .count();
    assert_eq!(maxima, 1);
    // nutrient rises through the spike: consumed behind, untouched ahead
    let x = p.grid().node(peak);
    let span = p.grid().indices_within(f64::INFINITY);
    let window: Vec<usize> = span.filter(|&i| (p.grid().node(i) - x).abs() < 1.0).collect();
    assert!(window.windows(2).all(|w| v[w[1]] >= v[w[0]] - 1e-12));
    assert!(v[window[0]] < 1.0 && v[*window.last().unwrap()] > 1.0);
    // the spike sits near the level set v = mu, which moves right
    let xs: Vec<f64> = p.grid().nodes().collect();
    let front = front_position(&xs, v, 1.0).unwrap();
    assert!((front - x).abs() < 0.2, "front {front} spike {x}");
    assert!(front > 3.0);
}

#[test]
fn both_variable_sets_place_the_front_alike() {
    let eps = 0.1;
    let n = ModelParams::nodes_for_resolution(-4.0, 6.0, eps, 4.0);
    let p = ModelParams::new(eps, 1.0, -4.0, 6.0, n, 1.5).unwrap();
    let init = build_preset("smooth", &p, &PresetOptions::default()).unwrap();
    let xs: Vec<f64> = p.grid().nodes().collect();
    let dx = p.grid().dx();
    let mut fronts = Vec::new();
    let mut finals = Vec::new();
    for vs in [VariableSet::HopfCole, VariableSet::Direct] {
        let sc = SchemeConfig {
            variable_set: vs,
            ..SchemeConfig::with_uniform_snapshots(1.5, 3)
        };
        let rec = simulate(&p, &init, &sc).unwrap();
        fronts.push(front_position(&xs, rec.last().v.values(), 1.0).unwrap());
        finals.push(rec.last().v.clone());
    }
    assert!((fronts[0] - fronts[1]).abs() < 5.0 * dx, "{fronts:?}");
    let l1 = dirac_front::limit::lp_distance(&finals[0], &finals[1], 1.0, f64::INFINITY).unwrap();
    assert!(l1 < 5.0 * dx * 2.0, "{l1}");
}

#[test]
fn invariant_drift_falls_with_resolution() {
    let eps = 0.1;
    let mut drifts = Vec::new();
    for k in [1.0, 2.0] {
        let n = ModelParams::nodes_for_resolution(-4.0, 4.0, eps, 4.0 * k);
        let p = ModelParams::new(eps, 1.0, -4.0, 4.0, n, 0.5).unwrap();
        let init = build_preset("step", &p, &PresetOptions::default()).unwrap();
        let rec = simulate(&p, &init, &fixed(0.2 * p.grid().dx(), 0.5, 5)).unwrap();
        drifts.push(invariant_drift_report(&rec, &init, &p).max_interior());
    }
    assert!(drifts[0] / drifts[1] >= 3.0, "{drifts:?}");
}

#[test]
fn runs_are_reproducible_and_survive_a_round_trip() {
    let p = ModelParams::new(0.1, 1.0, -3.0, 3.0, 121, 0.5).unwrap();
    let init = build_preset("step", &p, &PresetOptions::default()).unwrap();
    let sc = SchemeConfig::with_uniform_snapshots(0.5, 5);
    let a = simulate(&p, &init, &sc).unwrap();
    let b = simulate(&p, &init, &sc).unwrap();
    assert_eq!(a, b);
    let dir = tempfile::tempdir().unwrap();
    save_record(dir.path(), &a, &init).unwrap();
    let (back, init_back) = load_record(dir.path()).unwrap();
    assert_eq!(back, a);
    assert_eq!(init_back.v0, init.v0);
}
