use rydweak::constants::{HBAR, TWO_PI};
use rydweak::eit::{
    at_splitting, default_grid, susceptibility_spectrum, uniform_grid, LadderSystemParams,
};
use rydweak::heterodyne::{calibration_curve, DEFAULT_MW_DIPOLE};
use rydweak::Error;

#[test]
fn calibration_is_linear_in_root_power() {
    let fit = calibration_curve(
        &[0.0, 1e-4, 3e-4, 1e-3, 3e-3],
        25.0,
        DEFAULT_MW_DIPOLE,
        &LadderSystemParams::default(),
    )
    .unwrap();
    assert!(fit.r_squared > 0.999, "{}", fit.r_squared);
    assert!((fit.slope / 25.0 - 1.0).abs() < 0.05, "{}", fit.slope);
    assert!(fit.points[0].unresolved && fit.points[0].e_recovered.is_none());
    assert!(fit.points[1..].iter().all(|p| !p.unresolved));
    for p in &fit.points[1..] {
        assert!((p.e_applied - 25.0 * p.power_w.sqrt()).abs() < 1e-12);
    }
}

#[test]
fn calibration_rejects_bad_power_lists() {
    let m = LadderSystemParams::default();
    assert!(matches!(
        calibration_curve(&[1e-4, 2e-4], 25.0, DEFAULT_MW_DIPOLE, &m),
        Err(Error::InvalidArgument(_))
    ));
    assert!(calibration_curve(&[-1e-4, 1e-3], 25.0, DEFAULT_MW_DIPOLE, &m).is_err());
}

#[test]
fn splitting_is_converged_in_the_grid() {
    let e = 1.0;
    let p = LadderSystemParams::default().with_omega_mw(DEFAULT_MW_DIPOLE * e / HBAR);
    let g = default_grid(&p).unwrap();
    let coarse = at_splitting(&susceptibility_spectrum(&p, &g).unwrap()).unwrap();
    let fine_grid = uniform_grid(g[0], g[g.len() - 1], 4 * g.len()).unwrap();
    let fine = at_splitting(&susceptibility_spectrum(&p, &fine_grid).unwrap()).unwrap();
    assert!((coarse / fine - 1.0).abs() < 0.01, "{coarse} {fine}");
    assert!(fine > 0.9 * p.omega_mw / TWO_PI);
}
