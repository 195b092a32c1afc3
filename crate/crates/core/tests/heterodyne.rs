use rydweak::detector::DetectorParams;
use rydweak::heterodyne::{
    analyze_beat, coupling_sweep, find_operating_point, laboratory_detector, run_beat_experiment,
    scheme_comparison, thermal_medium, HeterodyneConfig, ReadoutModel,
};

fn short() -> HeterodyneConfig {
    HeterodyneConfig {
        e_signal: vec![3e-4, 1e-3, 3e-3],
        ..Default::default()
    }
}

#[test]
fn noiseless_beat_sits_on_the_offset_frequency() {
    let cfg = HeterodyneConfig::default();
    let ts = run_beat_experiment(
        &cfg,
        &thermal_medium(),
        &DetectorParams::noiseless(),
        1e-3,
        0,
    )
    .unwrap();
    let b = analyze_beat(&ts, cfg.delta_f, cfg.segment_length).unwrap();
    assert!((b.peak_freq - 150e3).abs() <= b.psd.bin_width());
    assert!(b.above_floor());
}

#[test]
fn no_signal_leaves_only_the_floor() {
    let cfg = HeterodyneConfig::default();
    let ts = run_beat_experiment(&cfg, &thermal_medium(), &laboratory_detector(), 0.0, 8).unwrap();
    let b = analyze_beat(&ts, cfg.delta_f, cfg.segment_length).unwrap();
    assert!(!b.above_floor());
    assert!(b.floor_density > 0.0);
}

#[test]
fn operating_point_is_a_slope_maximum() {
    let cfg = HeterodyneConfig::default();
    let medium = thermal_medium();
    let op = find_operating_point(&cfg, &medium).unwrap();
    let step = medium.gamma_2 / 20.0;
    for dp in [op.delta_p - step, op.delta_p + step] {
        let s = ReadoutModel::new(&cfg, &medium, dp)
            .unwrap()
            .slope(cfg.omega_local)
            .unwrap();
        assert!(s.abs() <= op.slope.abs() * 1.01, "{s} vs {}", op.slope);
    }
}

#[test]
fn snr_falls_as_nep_rises() {
    let cfg = HeterodyneConfig::default();
    let medium = thermal_medium();
    let mut last = f64::INFINITY;
    for nep in [7.2e-15, 1e-12, 3e-12, 1e-11, 3e-11] {
        let det = DetectorParams {
            nep,
            ..laboratory_detector()
        };
        let ts = run_beat_experiment(&cfg, &medium, &det, 1e-2, 4).unwrap();
        let b = analyze_beat(&ts, cfg.delta_f, cfg.segment_length).unwrap();
        assert!(b.above_floor(), "nep {nep}");
        let snr = b.snr();
        assert!(snr <= last, "nep {nep}: {snr} > {last}");
        last = snr;
    }
}

#[test]
fn a_scheme_compared_with_itself_gains_nothing() {
    let cfg = short();
    let r = scheme_comparison(&cfg, &cfg, &thermal_medium(), &laboratory_detector(), 1).unwrap();
    assert_eq!(r.comparison.delta_sensitivity_db, Some(0.0));
    if let Some(ratio) = r.comparison.e_min_ratio {
        assert_eq!(ratio, 1.0);
    }
}

#[test]
fn coupling_advantage_grows_then_reverses() {
    let cfg = HeterodyneConfig::default();
    let pts = coupling_sweep(
        &cfg,
        &thermal_medium(),
        &laboratory_detector(),
        &[300.0, 75.0, 20.0, 5.0, 1.5],
        1e-2,
        2024,
    )
    .unwrap();
    let adv: Vec<f64> = pts.iter().map(|p| p.advantage_db.unwrap()).collect();
    assert!(adv[..4].windows(2).all(|w| w[1] > w[0]), "{adv:?}");
    assert!(adv[4] < adv[3], "{adv:?}");
    // Post-selected power keeps falling as the coupling weakens.
    assert!(pts
        .windows(2)
        .all(|w| w[1].detected_power < w[0].detected_power));
}
