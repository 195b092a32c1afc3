//! Weak-measurement pointer: a polarization qubit pre-selected by the medium,
//! coupled to a Gaussian transverse pointer through a momentum kick
//! `U = exp(−i k x A)` with `A = |H⟩⟨H| − |V⟩⟨V|`, then post-selected.
//!
//! The pointer amplitude is `φ(x) = (2πw²)^(−1/4) exp(−x²/(4w²))`, so `w` is
//! the RMS width of `|φ|²`. All readouts are exact in the two-term
//! superposition; only the `*_approx` functions linearize.
//!
//! Sign convention: `η = (P(x<0) − P(x>0)) / (P(x<0) + P(x>0))`, i.e. η > 0
//! when the left half carries more power. With this convention a small
//! positive phase gives a negative centroid and a positive η.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use log::warn;
use num_complex::Complex64;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::quadrature::{integrate_with_breaks, Tolerance};
use crate::special::erfi;

/// Post-selected power below this fraction of the input is orthogonal.
pub const ORTHOGONALITY_FLOOR: f64 = 1e-30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct PreSelection {
    pub delta_phi: f64,
    #[serde(default)]
    pub delta_beta: f64,
}

impl PreSelection {
    pub fn new(delta_phi: f64, delta_beta: f64) -> Self {
        PreSelection {
            delta_phi,
            delta_beta,
        }
    }

    fn validate(&self) -> Result<()> {
        ensure_finite("delta_phi", self.delta_phi)?;
        ensure_finite("delta_beta", self.delta_beta)
    }

    /// Normalized (H, V) amplitudes.
    pub fn amplitudes(&self) -> (Complex64, Complex64) {
        let z = Complex64::new(self.delta_beta, self.delta_phi / 2.0);
        let norm = (2.0 * (2.0 * self.delta_beta).cosh()).sqrt();
        (z.exp() / norm, (-z).exp() / norm)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct PostSelection {
    /// Projection onto `cos(angle)|H⟩ − sin(angle)|V⟩`.
    pub angle: f64,
}

impl Default for PostSelection {
    fn default() -> Self {
        PostSelection { angle: FRAC_PI_4 }
    }
}

impl PostSelection {
    fn validate(&self) -> Result<()> {
        ensure_finite("angle", self.angle)?;
        if self.angle <= 0.0 || self.angle >= FRAC_PI_2 {
            return Err(Error::param(
                "angle",
                format!("must lie in (0, π/2), got {}", self.angle),
            ));
        }
        Ok(())
    }

    fn cs(&self) -> (f64, f64) {
        let (s, c) = self.angle.sin_cos();
        (c, s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct WeakCoupling {
    /// Transverse momentum kick, rad/m.
    pub k: f64,
}

/// Gaussian pointer with its sampling grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamPointer {
    /// RMS width of the intensity profile, m.
    pub w: f64,
    pub grid: Vec<f64>,
}

/// Default profile sampling: ±8w with this many points.
pub const DEFAULT_GRID_POINTS: usize = 2049;

impl BeamPointer {
    /// Pointer of width `w` sampled on a uniform grid spanning ±8w.
    pub fn new(w: f64) -> Result<Self> {
        Self::with_span(w, 8.0, DEFAULT_GRID_POINTS)
    }

    /// Uniform grid over ±`half_span_in_w`·w with `points` samples.
    pub fn with_span(w: f64, half_span_in_w: f64, points: usize) -> Result<Self> {
        if !(w.is_finite() && w > 0.0) {
            return Err(Error::param("w", format!("must be > 0, got {w}")));
        }
        if points < 3 {
            return Err(Error::InvalidArgument(
                "pointer grid needs at least 3 points".into(),
            ));
        }
        let half = half_span_in_w * w;
        let step = 2.0 * half / (points - 1) as f64;
        let grid = (0..points)
            .map(|i| {
                // Mirror the two halves so the grid is exactly symmetric.
                let j = i.min(points - 1 - i);
                let x = -half + step * j as f64;
                if i > points - 1 - i {
                    -x
                } else {
                    x
                }
            })
            .collect();
        Self::with_grid(w, grid)
    }

    pub fn with_grid(w: f64, grid: Vec<f64>) -> Result<Self> {
        let b = BeamPointer { w, grid };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.w.is_finite() && self.w > 0.0) {
            return Err(Error::param("w", format!("must be > 0, got {}", self.w)));
        }
        let n = self.grid.len();
        if n < 3 {
            return Err(Error::param("grid", "needs at least 3 points"));
        }
        for i in 0..n {
            let x = self.grid[i];
            if !x.is_finite() {
                return Err(Error::param("grid", "must be finite"));
            }
            if i > 0 && x <= self.grid[i - 1] {
                return Err(Error::param("grid", "must be strictly increasing"));
            }
            if x != -self.grid[n - 1 - i] {
                return Err(Error::param("grid", "must be symmetric about x = 0"));
            }
        }
        if self.grid[n - 1] - self.grid[0] < 8.0 * self.w * (1.0 - 1e-12) {
            return Err(Error::param("grid", "must span at least 8w"));
        }
        Ok(())
    }

    /// Normalized Gaussian amplitude φ(x).
    pub fn amplitude(&self, x: f64) -> f64 {
        gaussian_amplitude(self.w, x)
    }
}

fn gaussian_amplitude(w: f64, x: f64) -> f64 {
    (2.0 * PI * w * w).powf(-0.25) * (-x * x / (4.0 * w * w)).exp()
}

/// Readout of the post-selected pointer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointerReadout {
    /// Intensity-weighted mean position, m.
    pub centroid: f64,
    pub eta: f64,
    /// Post-selected power over input power.
    pub p_post: f64,
    /// `|Φ(x)|²` on the pointer grid, normalized to unit input power.
    pub profile: Vec<f64>,
}

/// Flat summary of a readout for JSON emission.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ReadoutRecord {
    pub delta_phi: f64,
    pub delta_beta: f64,
    pub k: f64,
    pub w: f64,
    pub centroid_m: f64,
    pub eta: f64,
    pub p_post: f64,
}

impl ReadoutRecord {
    pub fn new(pre: &PreSelection, coupling: &WeakCoupling, w: f64, r: &PointerReadout) -> Self {
        ReadoutRecord {
            delta_phi: pre.delta_phi,
            delta_beta: pre.delta_beta,
            k: coupling.k,
            w,
            centroid_m: r.centroid,
            eta: r.eta,
            p_post: r.p_post,
        }
    }
}

fn regime_warnings(delta_phi: f64, k: f64, w: f64) {
    if delta_phi.abs() > 0.1 {
        warn!(
            "|delta_phi| = {:.3e} is not << 1; linearized pointer formulas are inaccurate",
            delta_phi.abs()
        );
    }
    let kw = (k * w).abs();
    if kw > 0.3 {
        warn!("k*w = {kw:.3e} is not << 1; linearized pointer formulas are inaccurate");
    }
}

/// `⟨ψf|A|ψi⟩ / ⟨ψf|ψi⟩`.
pub fn weak_value(pre: &PreSelection, post: &PostSelection) -> Result<Complex64> {
    pre.validate()?;
    post.validate()?;
    let (a, b) = pre.amplitudes();
    let (c, s) = post.cs();
    let overlap = a * c - b * s;
    if overlap.norm_sqr() < ORTHOGONALITY_FLOOR {
        return Err(Error::OrthogonalPostselection {
            overlap: overlap.norm(),
        });
    }
    Ok((a * c + b * s) / overlap)
}

/// Post-selected pointer amplitude `⟨ψf|U|Ψ⟩` on the beam grid.
pub fn final_wavefunction(
    pre: &PreSelection,
    post: &PostSelection,
    coupling: &WeakCoupling,
    beam: &BeamPointer,
) -> Result<Vec<Complex64>> {
    pre.validate()?;
    post.validate()?;
    ensure_finite("k", coupling.k)?;
    beam.validate()?;
    let f = amplitude_fn(pre, post, coupling.k, beam.w);
    Ok(beam.grid.iter().map(|&x| f(x)).collect())
}

fn amplitude_fn(
    pre: &PreSelection,
    post: &PostSelection,
    k: f64,
    w: f64,
) -> impl Fn(f64) -> Complex64 {
    let (a, b) = pre.amplitudes();
    let (c, s) = post.cs();
    let (ca, sb) = (a * c, b * s);
    move |x: f64| {
        let kick = Complex64::from_polar(1.0, -k * x);
        (ca * kick - sb * kick.conj()) * gaussian_amplitude(w, x)
    }
}

/// Closed-form readout for arbitrary pre-selection and post-selection angle.
///
/// With `c = cos θ`, `s = sin θ`, `K = k²w²`:
/// `D = (c e^{Δβ} − s e^{−Δβ})² e^{2K} + 2cs (e^{2K} − cos Δφ)`,
/// `⟨x⟩ = −4cs k w² sin Δφ / D`, `η = 2cs sin Δφ erfi(√2 k w) / D`,
/// `p_post = D e^{−2K} / (2 cosh 2Δβ)`.
/// `e^{2K} − cos Δφ` is evaluated as `expm1(2K) + 2 sin²(Δφ/2)` so nothing
/// cancels when both K and Δφ are small.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormReadout {
    pub centroid: f64,
    pub eta: f64,
    pub p_post: f64,
}

pub fn closed_form_readout(
    pre: &PreSelection,
    post: &PostSelection,
    coupling: &WeakCoupling,
    w: f64,
) -> Result<ClosedFormReadout> {
    pre.validate()?;
    post.validate()?;
    ensure_finite("k", coupling.k)?;
    if !(w.is_finite() && w > 0.0) {
        return Err(Error::param("w", format!("must be > 0, got {w}")));
    }
    let (c, s) = post.cs();
    let k = coupling.k;
    let kk = k * k * w * w;
    let (dphi, dbeta) = (pre.delta_phi, pre.delta_beta);
    let mismatch = c * dbeta.exp() - s * (-dbeta).exp();
    let half = (dphi / 2.0).sin();
    let d = mismatch * mismatch * (2.0 * kk).exp()
        + 2.0 * c * s * ((2.0 * kk).exp_m1() + 2.0 * half * half);
    let p_post = d * (-2.0 * kk).exp() / (2.0 * (2.0 * dbeta).cosh());
    if !(p_post >= ORTHOGONALITY_FLOOR) {
        return Err(Error::OrthogonalPostselection {
            overlap: p_post.max(0.0).sqrt(),
        });
    }
    let e = erfi(std::f64::consts::SQRT_2 * k * w)?;
    Ok(ClosedFormReadout {
        centroid: -4.0 * c * s * k * w * w * dphi.sin() / d,
        eta: 2.0 * c * s * dphi.sin() * e / d,
        p_post,
    })
}

/// Exact centroid. Uses the closed form when `Δβ = 0`; any other Δβ is
/// evaluated by quadrature.
pub fn centroid_exact(
    pre: &PreSelection,
    post: &PostSelection,
    coupling: &WeakCoupling,
    beam: &BeamPointer,
) -> Result<f64> {
    if pre.delta_beta == 0.0 {
        closed_form_readout(pre, post, coupling, beam.w).map(|r| r.centroid)
    } else {
        quadrature_oracle(pre, post, coupling, beam).map(|r| r.centroid)
    }
}

/// Exact intensity-contrast ratio, routed like [`centroid_exact`].
pub fn icr_exact(
    pre: &PreSelection,
    post: &PostSelection,
    coupling: &WeakCoupling,
    beam: &BeamPointer,
) -> Result<f64> {
    if pre.delta_beta == 0.0 {
        closed_form_readout(pre, post, coupling, beam.w).map(|r| r.eta)
    } else {
        quadrature_oracle(pre, post, coupling, beam).map(|r| r.eta)
    }
}

/// Weak-regime centroid `−Δφ / k`.
pub fn centroid_approx(delta_phi: f64, coupling: &WeakCoupling) -> Result<f64> {
    ensure_finite("delta_phi", delta_phi)?;
    ensure_finite("k", coupling.k)?;
    if coupling.k == 0.0 {
        return Err(Error::InvalidArgument("k must be nonzero".into()));
    }
    if delta_phi.abs() > 0.1 {
        warn!("|delta_phi| = {:.3e} is not << 1", delta_phi.abs());
    }
    Ok(-delta_phi / coupling.k)
}

/// Weak-regime contrast ratio `√(2/π) Δφ / (k w)`.
pub fn icr_approx(delta_phi: f64, coupling: &WeakCoupling, beam: &BeamPointer) -> Result<f64> {
    ensure_finite("delta_phi", delta_phi)?;
    ensure_finite("k", coupling.k)?;
    if coupling.k == 0.0 || beam.w == 0.0 {
        return Err(Error::InvalidArgument("k and w must be nonzero".into()));
    }
    regime_warnings(delta_phi, coupling.k, beam.w);
    Ok((2.0 / PI).sqrt() * delta_phi / (coupling.k * beam.w))
}

/// Half-width of the integration range in units of w; |φ|² ~ e^{−128} there.
const ORACLE_HALF_SPAN: f64 = 16.0;

/// Brute-force readout: adaptive quadrature of `|Φ(x)|²` for any Δβ and
/// post-selection angle.
///
/// The integrals are folded onto `x ≥ 0` so the left/right difference and
/// the first moment are integrated directly instead of as differences of
/// large totals.
pub fn quadrature_oracle(
    pre: &PreSelection,
    post: &PostSelection,
    coupling: &WeakCoupling,
    beam: &BeamPointer,
) -> Result<PointerReadout> {
    pre.validate()?;
    post.validate()?;
    ensure_finite("k", coupling.k)?;
    beam.validate()?;
    let w = beam.w;
    let amp = amplitude_fn(pre, post, coupling.k, w);
    let intensity = |x: f64| amp(x).norm_sqr();

    // Start from one interval per w so oscillations at large kw are sampled.
    let breaks: Vec<f64> = (0..=ORACLE_HALF_SPAN as usize)
        .map(|i| i as f64 * w)
        .collect();
    let tol = |scale: f64| Tolerance {
        abs: 1e-15 * scale,
        rel: 1e-13,
        max_intervals: 4000,
    };
    let run = |f: &dyn Fn(f64) -> f64, scale: f64, what: &str| {
        integrate_with_breaks(f, &breaks, tol(scale))
            .map(|r| r.value)
            .map_err(|e| match e {
                Error::Accuracy { estimate, .. } => Error::Accuracy {
                    what: format!("pointer oracle ({what})"),
                    estimate,
                },
                other => other,
            })
    };

    let total = run(&|x| intensity(x) + intensity(-x), 1.0, "total power")?;
    if !(total >= ORTHOGONALITY_FLOOR) {
        return Err(Error::OrthogonalPostselection {
            overlap: total.max(0.0).sqrt(),
        });
    }
    let left_minus_right = run(&|x| intensity(-x) - intensity(x), total, "contrast")?;
    let moment = run(
        &|x| x * (intensity(x) - intensity(-x)),
        total * w,
        "centroid",
    )?;

    let profile = beam.grid.iter().map(|&x| intensity(x)).collect();
    Ok(PointerReadout {
        centroid: moment / total,
        eta: (left_minus_right / total).clamp(-1.0, 1.0),
        p_post: total.min(1.0),
        profile,
    })
}

/// Mach–Zehnder output `a cos Δφ`, for comparison with the pointer readout.
pub fn mzi_intensity(a: f64, delta_phi: f64) -> Result<f64> {
    ensure_finite("delta_phi", delta_phi)?;
    if !(0.0..=1.0).contains(&a) {
        return Err(Error::InvalidArgument(format!(
            "a must lie in [0, 1], got {a}"
        )));
    }
    Ok(a * delta_phi.cos())
}

fn feedback_cot(phi_f: f64) -> Result<f64> {
    ensure_finite("phi_f", phi_f)?;
    let (s, c) = phi_f.sin_cos();
    if s.abs() < 1e-15 {
        return Err(Error::OrthogonalPostselection { overlap: s.abs() });
    }
    Ok(c / s)
}

/// Weak value of the which-path feedback arrangement, `−i cot Φ_F`.
pub fn feedback_weak_value(phi_f: f64) -> Result<Complex64> {
    Ok(Complex64::new(0.0, -feedback_cot(phi_f)?))
}

/// Pointer displacement of the feedback arrangement, `2 k w² |cot Φ_F|`.
pub fn feedback_centroid(phi_f: f64, coupling: &WeakCoupling, beam: &BeamPointer) -> Result<f64> {
    ensure_finite("k", coupling.k)?;
    Ok(2.0 * coupling.k * beam.w * beam.w * feedback_cot(phi_f)?.abs())
}

/// Centroid shift caused by a nonzero Δβ, measured against Δβ = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct DeltaBetaDependence {
    pub delta_phi: f64,
    pub delta_beta: f64,
    pub kw: f64,
    pub centroid_at_zero: f64,
    pub centroid_at_beta: f64,
    /// `|⟨x⟩_β − ⟨x⟩_0| / |⟨x⟩_0|` from quadrature.
    pub relative_deviation: f64,
    /// Upper bound `2 sinh²Δβ e^{2K} / D₀`, which exceeds the deviation
    /// (`bound / (1 + bound)`) at every Δβ.
    pub bound: f64,
    /// Leading small-Δβ term of the bound, `Δβ² / (K + sin²(Δφ/2))`.
    pub leading_order: f64,
    /// Power of Δβ in the leading term.
    pub order: u32,
}

/// Quantifies how the centroid depends on Δβ at the π/4 post-selection.
/// The shift grows as Δβ², relative to `(k w)² + (Δφ/2)²`, so it is only
/// negligible when Δβ is small compared with k w.
pub fn delta_beta_dependence(
    delta_phi: f64,
    delta_beta: f64,
    coupling: &WeakCoupling,
    beam: &BeamPointer,
) -> Result<DeltaBetaDependence> {
    let post = PostSelection::default();
    let zero = quadrature_oracle(&PreSelection::new(delta_phi, 0.0), &post, coupling, beam)?;
    let with = quadrature_oracle(
        &PreSelection::new(delta_phi, delta_beta),
        &post,
        coupling,
        beam,
    )?;
    let kk = (coupling.k * beam.w).powi(2);
    let half = (delta_phi / 2.0).sin();
    let d0 = (2.0 * kk).exp_m1() + 2.0 * half * half;
    let bound = 2.0 * delta_beta.sinh().powi(2) * (2.0 * kk).exp() / d0;
    Ok(DeltaBetaDependence {
        delta_phi,
        delta_beta,
        kw: coupling.k * beam.w,
        centroid_at_zero: zero.centroid,
        centroid_at_beta: with.centroid,
        relative_deviation: ((with.centroid - zero.centroid) / zero.centroid).abs(),
        bound,
        leading_order: delta_beta * delta_beta / (kk + half * half),
        order: 2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pre(dphi: f64) -> PreSelection {
        PreSelection::new(dphi, 0.0)
    }

    #[test]
    fn weak_value_special_points() {
        let post = PostSelection::default();
        let v = weak_value(&pre(FRAC_PI_2), &post).unwrap();
        assert!((v - Complex64::new(0.0, -1.0)).norm() < 1e-15);
        let v = weak_value(&pre(PI), &post).unwrap();
        assert!(v.norm() < 1e-15);
        assert!(matches!(
            weak_value(&pre(0.0), &post),
            Err(Error::OrthogonalPostselection { .. })
        ));
    }

    #[test]
    fn weak_value_is_coth() {
        // Direct inner products on explicit two-component vectors.
        let (db, dp) = (0.1, 0.01);
        let p = PreSelection::new(dp, db);
        let v = weak_value(&p, &PostSelection::default()).unwrap();
        let z = Complex64::new(db, dp / 2.0);
        let coth = z.cosh() / z.sinh();
        assert!((v - coth).norm() / coth.norm() < 1e-13);
        assert!(v.re > 9.0 && v.re < 11.0);
    }

    #[test]
    fn closed_form_matches_contrast_expression() {
        // ⟨x⟩ = 4 k w² e^{iΔφ} sin Δφ / (1 − 2 e^{2k²w² + iΔφ} + e^{2iΔφ}),
        // in a regime where the literal complex form has no cancellation.
        let (k, w, dphi): (f64, f64, f64) = (300.0, 1e-3, 0.3);
        let kk = k * k * w * w;
        let i = Complex64::i();
        let num = 4.0 * k * w * w * (i * dphi).exp() * dphi.sin();
        let den = 1.0 - 2.0 * (kk * 2.0 + i * dphi).exp() + (2.0 * i * dphi).exp();
        let literal = num / den;
        let ours = closed_form_readout(
            &pre(dphi),
            &PostSelection::default(),
            &WeakCoupling { k },
            w,
        )
        .unwrap();
        assert!(literal.im.abs() < 1e-12 * literal.re.abs());
        assert!(((ours.centroid - literal.re) / literal.re).abs() < 1e-12);

        // The contrast expression as printed has the opposite sign to
        // (P_left − P_right) / total.
        let erfi_v = erfi(std::f64::consts::SQRT_2 * k * w).unwrap();
        let eta_literal = 2.0 * (i * dphi).exp() * erfi_v * dphi.sin() / den;
        assert!(((ours.eta + eta_literal.re) / ours.eta).abs() < 1e-12);
    }

    #[test]
    fn oracle_agrees_with_closed_form_general() {
        let cases = [
            (1e-3, 0.0, FRAC_PI_4, 10.0, 1e-3),
            (2e-2, 0.03, FRAC_PI_4, 50.0, 1e-3),
            (0.3, -0.2, 0.6, 200.0, 2e-3),
            (-0.05, 0.1, 1.1, 800.0, 1e-3),
        ];
        for (dphi, dbeta, angle, k, w) in cases {
            let p = PreSelection::new(dphi, dbeta);
            let post = PostSelection { angle };
            let c = WeakCoupling { k };
            let beam = BeamPointer::new(w).unwrap();
            let o = quadrature_oracle(&p, &post, &c, &beam).unwrap();
            let f = closed_form_readout(&p, &post, &c, w).unwrap();
            let rel = |a: f64, b: f64| ((a - b) / b).abs();
            assert!(
                rel(o.centroid, f.centroid) < 1e-9
                    && rel(o.eta, f.eta) < 1e-9
                    && rel(o.p_post, f.p_post) < 1e-9,
                "{dphi} {dbeta} {angle}: {o:?} vs {f:?}"
            );
        }
    }

    #[test]
    fn centroid_and_eta_have_consistent_signs() {
        let beam = BeamPointer::new(1e-3).unwrap();
        let c = WeakCoupling { k: 10.0 };
        let r = quadrature_oracle(&pre(1e-3), &PostSelection::default(), &c, &beam).unwrap();
        assert!(r.centroid < 0.0);
        assert!(r.eta > 0.0);
        assert!((r.centroid / centroid_approx(1e-3, &c).unwrap() - 1.0).abs() < 0.01);
        assert!((r.eta / icr_approx(1e-3, &c, &beam).unwrap() - 1.0).abs() < 0.01);
    }

    #[test]
    fn nulled_profile_at_zero_phase() {
        let beam = BeamPointer::with_span(1e-3, 8.0, 401).unwrap();
        let c = WeakCoupling { k: 100.0 };
        let psi = final_wavefunction(&pre(0.0), &PostSelection::default(), &c, &beam).unwrap();
        for (x, amp) in beam.grid.iter().zip(&psi) {
            let want = beam.amplitude(*x).powi(2) * (c.k * x).sin().powi(2);
            assert!((amp.norm_sqr() - want).abs() <= 1e-15 * beam.amplitude(0.0).powi(2));
        }
        assert!(psi[200].norm_sqr() < 1e-25);
    }

    #[test]
    fn zero_kick_is_symmetric() {
        let beam = BeamPointer::new(1e-3).unwrap();
        let r = quadrature_oracle(
            &PreSelection::new(0.2, 0.05),
            &PostSelection::default(),
            &WeakCoupling { k: 0.0 },
            &beam,
        )
        .unwrap();
        assert_eq!(r.centroid, 0.0);
        assert_eq!(r.eta, 0.0);
        let (a, b) = PreSelection::new(0.2, 0.05).amplitudes();
        let overlap = (a - b) * std::f64::consts::FRAC_1_SQRT_2;
        assert!((r.p_post - overlap.norm_sqr()).abs() < 1e-13);
    }

    #[test]
    fn approximations_validate_inputs() {
        assert!(matches!(
            centroid_approx(1e-3, &WeakCoupling { k: 0.0 }),
            Err(Error::InvalidArgument(_))
        ));
        let beam = BeamPointer::new(1e-3).unwrap();
        assert_eq!(
            icr_approx(0.0, &WeakCoupling { k: 1.0 }, &beam).unwrap(),
            0.0
        );
        let wide = BeamPointer::new(2e-3).unwrap();
        let c = WeakCoupling { k: 10.0 };
        let r = icr_approx(1e-3, &c, &beam).unwrap() / icr_approx(1e-3, &c, &wide).unwrap();
        assert!((r - 2.0).abs() < 1e-14);
    }

    #[test]
    fn icr_reference_value() {
        let beam = BeamPointer::new(1e-3).unwrap();
        let c = WeakCoupling { k: 10.0 };
        let eta = icr_exact(&pre(1e-3), &PostSelection::default(), &c, &beam).unwrap();
        assert!((eta - (2.0 / PI).sqrt() * 0.1).abs() < 1e-2 * eta);
        let neg = icr_exact(&pre(-1e-3), &PostSelection::default(), &c, &beam).unwrap();
        assert_eq!(neg, -eta);
    }

    #[test]
    fn erfi_domain_propagates() {
        let beam = BeamPointer::new(1e-3).unwrap();
        let c = WeakCoupling { k: 1e4 };
        assert!(matches!(
            icr_exact(&pre(0.1), &PostSelection::default(), &c, &beam),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn mzi_and_feedback() {
        assert!(mzi_intensity(0.7, FRAC_PI_2).unwrap().abs() < 1e-16);
        assert_eq!(mzi_intensity(0.5, 0.0).unwrap(), 0.5);
        assert!(mzi_intensity(1.5, 0.0).is_err());
        let v = feedback_weak_value(FRAC_PI_4).unwrap();
        assert!((v - Complex64::new(0.0, -1.0)).norm() < 1e-15);
        let beam = BeamPointer::new(1e-3).unwrap();
        let c = WeakCoupling { k: 3.0 };
        let x = feedback_centroid(FRAC_PI_4, &c, &beam).unwrap();
        assert!((x - 2.0 * 3.0 * 1e-6).abs() < 1e-18);
        assert!(feedback_centroid(FRAC_PI_2, &c, &beam).unwrap().abs() < 1e-20);
        assert!(matches!(
            feedback_weak_value(0.0),
            Err(Error::OrthogonalPostselection { .. })
        ));
    }

    #[test]
    fn delta_beta_shift_is_quadratic() {
        let beam = BeamPointer::new(1e-3).unwrap();
        let c = WeakCoupling { k: 10.0 };
        let a = delta_beta_dependence(1e-3, 1e-4, &c, &beam).unwrap();
        let b = delta_beta_dependence(1e-3, 2e-4, &c, &beam).unwrap();
        let ratio = b.relative_deviation / a.relative_deviation;
        assert!((ratio - 4.0).abs() < 0.05, "ratio {ratio}");
        for d in [a, b, delta_beta_dependence(1e-3, 0.05, &c, &beam).unwrap()] {
            assert!(d.relative_deviation <= d.bound);
            let exact = d.bound / (1.0 + d.bound);
            assert!((d.relative_deviation - exact).abs() < 1e-8 * exact);
        }
    }

    #[test]
    fn beam_grid_validation() {
        let b = BeamPointer::new(1e-3).unwrap();
        assert_eq!(b.grid[0], -b.grid[b.grid.len() - 1]);
        assert!(BeamPointer::with_span(1e-3, 3.0, 101).is_err());
        assert!(BeamPointer::with_grid(1e-3, vec![-5e-3, 0.0, 4e-3]).is_err());
        assert!(BeamPointer::new(0.0).is_err());
    }
}
