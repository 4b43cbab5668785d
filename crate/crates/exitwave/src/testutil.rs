//! Shared fixtures for the unit tests.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::field::{ComplexField, GridSpec, RealField, SpaceTag};
use crate::forward::{
    make_synthetic_wave, simulate_series, Atom, FocusSeries, SyntheticWaveSpec,
};
use crate::tcc::{build_factorized_kernel, FactorizedKernel, OpticalParams};

/// Lens constants of the reference setup (300 kV, Cs = -70 nm, 125 mrad).
pub fn reference_params() -> OpticalParams {
    OpticalParams::coherent(0.00196875, -70.0, 0.125)
}

/// Grid with the aperture radius at roughly n/5 lattice steps, so the 2A
/// band still fits inside Nyquist.
pub fn scaled_spec(n: usize, p: &OpticalParams) -> GridSpec {
    GridSpec::new(n, n as f64 / (5.0 * p.aperture_radius())).unwrap()
}

pub fn random_masked(spec: &GridSpec, mask: &RealField, seed: u64, scale: f64) -> ComplexField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ComplexField::from_fn(*spec, SpaceTag::Fourier, |_, _| {
        Complex64::new(rng.gen_range(-scale..scale), rng.gen_range(-scale..scale))
    })
    .unwrap()
    .mul_real(mask)
    .unwrap()
}

fn tiny_wave_spec() -> SyntheticWaveSpec {
    SyntheticWaveSpec {
        background_amp: 1.0,
        atoms: vec![
            Atom { pos_nm: [-0.025, -0.012], phase_amp: 0.9, amp_amp: -0.10, width_nm: 0.012 },
            Atom { pos_nm: [0.018, -0.020], phase_amp: 0.7, amp_amp: 0.06, width_nm: 0.010 },
            Atom { pos_nm: [0.012, 0.024], phase_amp: 1.1, amp_amp: -0.08, width_nm: 0.013 },
        ],
    }
}

/// Desk problem on a 32² grid: periodic specimen simulated oversized with
/// a known sub-pixel drift, plus matching kernels and the cropped truth.
pub fn desk_problem(
    n_images: usize,
    seed: u64,
) -> (FocusSeries, Vec<FactorizedKernel>, ComplexField, Vec<[f64; 2]>) {
    let p = reference_params();
    let small = scaled_spec(32, &p);
    let large = GridSpec::new(64, 2.0 * small.extent_nm()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut wave_spec = tiny_wave_spec();
    // Scale atom geometry to this field of view and vary it per seed.
    let scale = small.extent_nm() / 0.1;
    for atom in &mut wave_spec.atoms {
        atom.pos_nm[0] *= scale;
        atom.pos_nm[1] *= scale;
        atom.width_nm *= scale;
        atom.phase_amp *= rng.gen_range(0.8..1.2);
    }
    let psi_large = make_synthetic_wave(&large, &wave_spec.tiled_for_oversize(&small), &p).unwrap();
    let foci: Vec<f64> = (0..n_images).map(|j| -4.0 + 2.5 * j as f64).collect();
    let step = [0.7 * small.pixel_size(), -0.4 * small.pixel_size()];
    let truth: Vec<[f64; 2]> = (0..n_images)
        .map(|j| [j as f64 * step[0], j as f64 * step[1]])
        .collect();
    let series = simulate_series(&psi_large, &foci, &truth, &p, 1).unwrap();
    let kernels: Vec<FactorizedKernel> = foci
        .iter()
        .map(|&z| build_factorized_kernel(&small, z, &p, 1).unwrap())
        .collect();
    let psi_truth = make_synthetic_wave(&small, &wave_spec, &p).unwrap();
    (series, kernels, psi_truth, truth)
}
