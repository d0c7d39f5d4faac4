//! Spin-1 Ramsey interferometry of two ballistic atom clouds.
//!
//! States are stored in the `(m = −1, 0, +1)` basis. Rotation pulses use the
//! exact spin-1 representation `exp(−iθ n·F) = 1 − i sinθ (n·F) + (cosθ − 1)(n·F)²`,
//! free evolution applies `exp(−iδ F_z)`. Starting from `m = −1`, a π/2 pulse at
//! azimuth 0, free evolution δ, and a π/2 pulse at azimuth ϕ give `⟨F_z⟩ = cos(δ − ϕ)`.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

use nalgebra::{Complex, Vector3};
use rand::Rng;
use rand_distr::{Binomial, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::constants::GAMMA;
use crate::error::{Error, Result};
use crate::fieldmodel::FieldScene;
use crate::quadrature;

type C64 = Complex<f64>;

/// Absolute tolerance of the Larmor phase integral, radians.
pub const PHASE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinState {
    /// Amplitudes of m = −1, 0, +1.
    pub amplitudes: [C64; 3],
}

impl SpinState {
    pub fn new(amplitudes: [C64; 3]) -> Result<Self> {
        let state = Self { amplitudes };
        if (state.norm_squared() - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "spin state is not normalized (Σ|c|² = {})",
                state.norm_squared()
            )));
        }
        Ok(state)
    }

    pub fn basis(m: i32) -> Self {
        let mut amplitudes = [C64::new(0.0, 0.0); 3];
        amplitudes[(m + 1) as usize] = C64::new(1.0, 0.0);
        Self { amplitudes }
    }

    pub fn norm_squared(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Populations |c_m|² ordered m = −1, 0, +1.
    pub fn populations(&self) -> [f64; 3] {
        self.amplitudes.map(|c| c.norm_sqr())
    }

    /// ⟨F_z⟩ for a normalized state.
    pub fn fz(&self) -> f64 {
        let p = self.populations();
        p[2] - p[0]
    }

    /// Free precession by angle δ about z.
    pub fn precess(&self, delta: f64) -> Self {
        let delta = delta.rem_euclid(2.0 * PI);
        let mut out = *self;
        for (k, c) in out.amplitudes.iter_mut().enumerate() {
            let m = k as f64 - 1.0;
            *c *= C64::from_polar(1.0, -m * delta);
        }
        out
    }

    /// Overlap |⟨self|other⟩|.
    pub fn overlap(&self, other: &Self) -> f64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum::<C64>()
            .norm()
    }
}

/// (n·F) for n = (cos ϕ, sin ϕ, 0), as a dense 3×3 matrix.
fn equatorial_spin_operator(axis_phase: f64) -> [[C64; 3]; 3] {
    let down = C64::from_polar(1.0 / SQRT_2, -axis_phase);
    let up = down.conj();
    let zero = C64::new(0.0, 0.0);
    [[zero, up, zero], [down, zero, up], [zero, down, zero]]
}

fn matmul(a: &[[C64; 3]; 3], b: &[[C64; 3]; 3]) -> [[C64; 3]; 3] {
    let mut out = [[C64::new(0.0, 0.0); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

/// Rotation by `angle` about the equatorial axis at azimuth `axis_phase`.
pub fn pulse(state: &SpinState, axis_phase: f64, angle: f64) -> SpinState {
    let n = equatorial_spin_operator(axis_phase);
    let n2 = matmul(&n, &n);
    let (s, c) = angle.sin_cos();
    let mut u = [[C64::new(0.0, 0.0); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let identity = if i == j { 1.0 } else { 0.0 };
            u[i][j] = C64::new(identity, 0.0) - C64::new(0.0, s) * n[i][j] + n2[i][j] * (c - 1.0);
        }
    }
    let mut amplitudes = [C64::new(0.0, 0.0); 3];
    for (i, out) in amplitudes.iter_mut().enumerate() {
        *out = (0..3).map(|j| u[i][j] * state.amplitudes[j]).sum();
    }
    SpinState { amplitudes }
}

/// Ballistic trajectory r(t) = r0 + v0 t + g t²/2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CloudTrajectory {
    pub r0: Vector3<f64>,
    pub v0: Vector3<f64>,
    pub g: Vector3<f64>,
}

impl CloudTrajectory {
    pub fn at_rest(r0: Vector3<f64>, g: Vector3<f64>) -> Self {
        Self {
            r0,
            v0: Vector3::zeros(),
            g,
        }
    }

    pub fn position(&self, t: f64) -> Vector3<f64> {
        self.r0 + self.v0 * t + self.g * (0.5 * t * t)
    }

    /// The same trajectory with its time origin moved to `dt`.
    pub fn advanced(&self, dt: f64) -> Self {
        Self {
            r0: self.position(dt),
            v0: self.v0 + self.g * dt,
            g: self.g,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Atoms per cloud.
    pub n_atoms: u64,
    pub projection_noise: bool,
    /// Total F_z noise relative to the projection-noise limit 1/√(2N).
    pub kappa: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn noiseless(n_atoms: u64) -> Self {
        Self {
            n_atoms,
            projection_noise: false,
            kappa: 1.0,
            seed: 0,
        }
    }

    pub fn projection(n_atoms: u64, kappa: f64, seed: u64) -> Self {
        Self {
            n_atoms,
            projection_noise: true,
            kappa,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_atoms < 1 {
            return Err(Error::invalid("noise model needs at least one atom"));
        }
        if self.projection_noise && !(self.kappa >= 1.0) {
            return Err(Error::invalid(format!(
                "detection noise factor must be ≥ 1, got {}",
                self.kappa
            )));
        }
        Ok(())
    }

    /// Projection-noise limit on F_z for an equatorial state, 1/√(2N).
    pub fn sql_fz(&self) -> f64 {
        1.0 / (2.0 * self.n_atoms as f64).sqrt()
    }

    /// Expected F_z noise at the equator, κ/√(2N), or zero when noise is off.
    pub fn fz_noise_floor(&self) -> f64 {
        if self.projection_noise {
            self.kappa * self.sql_fz()
        } else {
            0.0
        }
    }
}

/// Atom counts (m = −1, 0, +1) read out from `state`.
///
/// With projection noise on, counts are a multinomial draw of N atoms followed by
/// a Gaussian transfer between m = ±1 that inflates the F_z variance of the
/// state by κ², giving κ/√(2N) at the equator. Counts are clipped at zero.
pub fn measure_populations<R: Rng + ?Sized>(
    state: &SpinState,
    noise: &NoiseModel,
    rng: &mut R,
) -> [f64; 3] {
    let n = noise.n_atoms as f64;
    let p = state.populations();
    let total: f64 = p.iter().sum();
    let p = p.map(|x| (x / total).clamp(0.0, 1.0));
    if !noise.projection_noise {
        return p.map(|x| x * n);
    }

    let n_minus = Binomial::new(noise.n_atoms, p[0]).map_or(0, |d| d.sample(rng));
    let rest = noise.n_atoms - n_minus;
    let p_zero = if p[0] < 1.0 {
        (p[1] / (1.0 - p[0])).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let n_zero = Binomial::new(rest, p_zero).map_or(0, |d| d.sample(rng));
    let mut counts = [n_minus as f64, n_zero as f64, (rest - n_zero) as f64];

    let excess = noise.kappa * noise.kappa - 1.0;
    if excess > 0.0 {
        // Projection variance of F_z times N; 1/2 at the equator.
        let v = (p[0] + p[2] - (p[2] - p[0]).powi(2)).max(0.0);
        let sigma = (excess * n * v / 4.0).sqrt();
        let transfer = Normal::new(0.0, sigma).expect("finite sigma").sample(rng);
        counts[2] = (counts[2] + transfer).max(0.0);
        counts[0] = (counts[0] - transfer).max(0.0);
    }
    counts
}

/// Normalized spin projection Σ m N_m / Σ N_m.
pub fn normalized_projection(counts: &[f64; 3]) -> f64 {
    let total: f64 = counts.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    ((counts[2] - counts[0]) / total).clamp(-1.0, 1.0)
}

/// γ ∫₀ᵀ (|B(r(t))| + common_draw) dt.
pub fn larmor_phase(
    scene: &FieldScene,
    traj: &CloudTrajectory,
    t: f64,
    common_draw: f64,
) -> Result<f64> {
    if t < 0.0 {
        return Err(Error::invalid("interrogation time must be non-negative"));
    }
    let tol = PHASE_TOLERANCE / GAMMA;
    let integral = quadrature::integrate(|s| scene.magnitude_at(&traj.position(s)), 0.0, t, tol)?;
    Ok(GAMMA * (integral + common_draw * t))
}

/// One realization of both interferometers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shot {
    /// Interrogation time, s.
    pub t: f64,
    /// Azimuth of the second pulse, rad.
    pub phi: f64,
    /// Atom counts (m = −1, 0, +1) per cloud.
    pub populations: [[f64; 3]; 2],
    pub fz: [f64; 2],
    /// Common-mode field offset applied to both clouds, tesla.
    pub common_noise_draw: f64,
}

/// Two clouds in a field scene, interrogated by shared pulses.
#[derive(Debug, Clone)]
pub struct RamseySetup {
    pub scene: FieldScene,
    pub clouds: [CloudTrajectory; 2],
    /// Rotating-frame reference frequency, rad/s.
    pub omega_ref: f64,
    /// Fractional pulse-area error; 0 gives perfect π/2 pulses.
    pub pulse_area_error: f64,
}

impl RamseySetup {
    /// Reference frequency defaults to γ|B| at the initial midpoint of the clouds.
    pub fn new(scene: FieldScene, clouds: [CloudTrajectory; 2]) -> Result<Self> {
        let mid = 0.5 * (clouds[0].r0 + clouds[1].r0);
        let omega_ref = GAMMA * scene.magnitude_at(&mid)?;
        Ok(Self {
            scene,
            clouds,
            omega_ref,
            pulse_area_error: 0.0,
        })
    }

    /// Relative phases δ_α = γ∫|B| − ω_ref T accrued without common-mode noise.
    pub fn accrued_phases(&self, t: f64) -> Result<[f64; 2]> {
        let reference = self.omega_ref * t;
        Ok([
            larmor_phase(&self.scene, &self.clouds[0], t, 0.0)? - reference,
            larmor_phase(&self.scene, &self.clouds[1], t, 0.0)? - reference,
        ])
    }

    /// Final spin state of one interferometer for a given accrued phase.
    pub fn evolve(&self, delta: f64, phi: f64) -> SpinState {
        let angle = FRAC_PI_2 * (1.0 + self.pulse_area_error);
        let s = pulse(&SpinState::basis(-1), 0.0, angle);
        let s = s.precess(delta);
        pulse(&s, phi, angle)
    }

    /// Generates a shot from precomputed accrued phases, drawing the common-mode
    /// offset and the readout noise from `rng`.
    pub fn shot_from_phases<R: Rng + ?Sized>(
        &self,
        t: f64,
        phi: f64,
        phases: [f64; 2],
        noise: &NoiseModel,
        rng: &mut R,
    ) -> Shot {
        let draw = if self.scene.common_noise > 0.0 {
            Normal::new(0.0, self.scene.common_noise)
                .expect("finite sigma")
                .sample(rng)
        } else {
            0.0
        };
        let common = GAMMA * draw * t;
        let mut populations = [[0.0; 3]; 2];
        let mut fz = [0.0; 2];
        for a in 0..2 {
            let state = self.evolve(phases[a] + common, phi);
            populations[a] = measure_populations(&state, noise, rng);
            fz[a] = normalized_projection(&populations[a]);
        }
        Shot {
            t,
            phi,
            populations,
            fz,
            common_noise_draw: draw,
        }
    }

    pub fn ramsey_shot<R: Rng + ?Sized>(
        &self,
        t: f64,
        phi: f64,
        noise: &NoiseModel,
        rng: &mut R,
    ) -> Result<Shot> {
        noise.validate()?;
        let phases = self.accrued_phases(t)?;
        Ok(self.shot_from_phases(t, phi, phases, noise, rng))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::{MICROTESLA, STANDARD_GRAVITY};
    use crate::fieldmodel::FieldSource;
    use crate::rng::rng_for;

    fn uniform_setup(b: f64) -> RamseySetup {
        let scene = FieldScene::new(vec![FieldSource::uniform(Vector3::new(0.0, b, 0.0))]);
        let g = Vector3::new(0.0, -STANDARD_GRAVITY, 0.0);
        let clouds = [
            CloudTrajectory::at_rest(Vector3::new(0.0, 0.0, 4e-4), g),
            CloudTrajectory::at_rest(Vector3::new(0.0, 0.0, -4e-4), g),
        ];
        RamseySetup::new(scene, clouds).unwrap()
    }

    #[test]
    fn pi_pulse_inverts() {
        let s = pulse(&SpinState::basis(-1), 0.0, PI);
        assert!((s.populations()[2] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn half_pi_pulse_populations() {
        for phase in [0.0, 0.7, -2.0] {
            let p = pulse(&SpinState::basis(-1), phase, FRAC_PI_2).populations();
            assert!((p[0] - 0.25).abs() < 1e-15);
            assert!((p[1] - 0.5).abs() < 1e-15);
            assert!((p[2] - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn full_rotation_is_identity_up_to_phase() {
        let s = pulse(&SpinState::basis(-1), 0.3, 1.1).precess(0.4);
        let back = pulse(&s, 1.9, 2.0 * PI);
        assert!((back.overlap(&s) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn ramsey_fringe_is_cos_of_phase_difference() {
        let setup = uniform_setup(50.0 * MICROTESLA);
        for (delta, phi) in [(0.0, 0.0), (1.0, 0.2), (PI + 0.3, 0.3), (5.0, -1.0)] {
            let fz = setup.evolve(delta, phi).fz();
            assert!((fz - (delta - phi).cos()).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_time_gives_full_inversion() {
        let setup = uniform_setup(50.0 * MICROTESLA);
        let mut rng = rng_for(1, &[]);
        let shot = setup
            .ramsey_shot(0.0, 0.0, &NoiseModel::noiseless(1000), &mut rng)
            .unwrap();
        assert!((shot.fz[0] - 1.0).abs() < 1e-12);
        assert!((shot.fz[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_field_larmor_phase() {
        let setup = uniform_setup(50.0 * MICROTESLA);
        let phase = larmor_phase(&setup.scene, &setup.clouds[0], 1e-3, 0.0).unwrap();
        let expected = 2.0 * PI * 349.8;
        assert!((phase - expected).abs() < 1e-9);
        let empty = FieldScene::default();
        assert_eq!(
            larmor_phase(&empty, &setup.clouds[0], 1e-3, 0.0).unwrap(),
            0.0
        );
    }

    #[test]
    fn vertical_gradient_phase_has_cubic_term() {
        let b0 = 50.0 * MICROTESLA;
        let beta = 1e-4;
        let scene = FieldScene::new(vec![FieldSource::unchecked_linear_gradient(
            Vector3::new(0.0, b0, 0.0),
            nalgebra::Matrix3::new(0.0, 0.0, 0.0, 0.0, beta, 0.0, 0.0, 0.0, 0.0),
            Vector3::zeros(),
        )]);
        let traj =
            CloudTrajectory::at_rest(Vector3::zeros(), Vector3::new(0.0, -STANDARD_GRAVITY, 0.0));
        let t: f64 = 3e-3;
        let phase = larmor_phase(&scene, &traj, t, 0.0).unwrap();
        let expected = GAMMA * (b0 * t - beta * STANDARD_GRAVITY * t.powi(3) / 6.0);
        assert!((phase - expected).abs() < 1e-9 * expected);
    }

    #[test]
    fn common_draw_cancels_in_the_difference() {
        let mut setup = uniform_setup(50.0 * MICROTESLA);
        setup.scene.common_noise = 30e-9;
        let phases = [0.4, -0.6];
        let mut rng = rng_for(5, &[]);
        for _ in 0..20 {
            let shot =
                setup.shot_from_phases(3e-3, 0.0, phases, &NoiseModel::noiseless(1), &mut rng);
            let common = GAMMA * shot.common_noise_draw * 3e-3;
            let d0 = phases[0] + common;
            let d1 = phases[1] + common;
            assert!((shot.fz[0] - d0.cos()).abs() < 1e-9);
            assert!((shot.fz[1] - d1.cos()).abs() < 1e-9);
            assert!((d0 - d1 - (phases[0] - phases[1])).abs() < 1e-12);
        }
    }

    #[test]
    fn noiseless_counts() {
        let noise = NoiseModel::noiseless(1000);
        let mut rng = rng_for(0, &[]);
        assert_eq!(
            measure_populations(&SpinState::basis(-1), &noise, &mut rng),
            [1000.0, 0.0, 0.0]
        );
        let eq = pulse(&SpinState::basis(-1), 0.0, FRAC_PI_2);
        let c = measure_populations(&eq, &noise, &mut rng);
        assert!(
            (c[0] - 250.0).abs() < 1e-9
                && (c[1] - 500.0).abs() < 1e-9
                && (c[2] - 250.0).abs() < 1e-9
        );
    }

    fn fz_spread(noise: NoiseModel, repeats: usize) -> f64 {
        let eq = pulse(&SpinState::basis(-1), 0.0, FRAC_PI_2);
        let mut rng = rng_for(noise.seed, &[]);
        let samples: Vec<f64> = (0..repeats)
            .map(|_| normalized_projection(&measure_populations(&eq, &noise, &mut rng)))
            .collect();
        let mean = samples.iter().sum::<f64>() / repeats as f64;
        (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (repeats - 1) as f64).sqrt()
    }

    #[test]
    fn projection_noise_reaches_standard_quantum_limit() {
        let noise = NoiseModel::projection(5000, 1.0, 11);
        let sd = fz_spread(noise, 10_000);
        assert!((sd / noise.sql_fz() - 1.0).abs() < 0.05, "sd = {sd}");
    }

    #[test]
    fn detection_noise_scales_with_kappa() {
        let noise = NoiseModel::projection(5000, 3.0, 12);
        let sd = fz_spread(noise, 10_000);
        assert!(
            (sd / (3.0 * noise.sql_fz()) - 1.0).abs() < 0.05,
            "sd = {sd}"
        );
    }

    #[test]
    fn invalid_noise_models() {
        assert!(NoiseModel::projection(100, 0.5, 0).validate().is_err());
        assert!(NoiseModel::noiseless(0).validate().is_err());
        assert!(SpinState::new([C64::new(1.0, 0.0); 3]).is_err());
    }
}
