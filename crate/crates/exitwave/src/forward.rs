//! Forward simulation: TEM images from an exit wave, and synthetic focal
//! series with drift and oversize-crop wrap-around control.
//!
//! A Fourier-space image is the kernel-weighted autocorrelation of the
//! wave, `G = Ψ ⋆_T Ψ`, evaluated through the factorized kernel. Series
//! generation runs on a doubled grid, applies per-image drift as a
//! Fourier modulation (sub-pixel exact), transforms to real space and
//! crops the centered window, which keeps the periodic wrap-around of the
//! correlation tails away from the data used for reconstruction.

use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{
    io as field_io, modulate, spectral_inverse, spectral_transform, ComplexField, GridSpec,
    RealField, SpaceTag,
};
use crate::tcc::{build_factorized_kernel, FactorizedKernel, OpticalParams};
use crate::wcc::wcc_factorized;

/// A focal series: real-space images with focus values and per-image
/// rigid translations (ground truth when simulated, estimates when
/// reconstructed).
#[derive(Debug, Clone)]
pub struct FocusSeries {
    pub spec: GridSpec,
    pub params: OpticalParams,
    pub images: Vec<RealField>,
    pub foci_nm: Vec<f64>,
    pub translations_nm: Vec<[f64; 2]>,
}

impl FocusSeries {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.images.len();
        if n == 0 {
            return Err(Error::InvalidArgument("series must hold at least one image".into()));
        }
        if self.foci_nm.len() != n || self.translations_nm.len() != n {
            return Err(Error::Mismatch(format!(
                "series lists disagree: {} images, {} foci, {} translations",
                n,
                self.foci_nm.len(),
                self.translations_nm.len()
            )));
        }
        self.params.validate()?;
        for (j, img) in self.images.iter().enumerate() {
            if *img.spec() != self.spec {
                return Err(Error::Mismatch(format!("image {j} on a different grid")));
            }
            let max = img.max();
            if img.min() < -1e-12 * max.max(f64::MIN_POSITIVE) {
                return Err(Error::InvalidArgument(format!(
                    "image {j} has negative intensities ({:e})",
                    img.min()
                )));
            }
        }
        for t in &self.translations_nm {
            if !(t[0].is_finite() && t[1].is_finite()) {
                return Err(Error::NonFinite("translation is not finite".into()));
            }
        }
        Ok(())
    }

    /// Mean intensity over all pixels of all images.
    pub fn mean_intensity(&self) -> f64 {
        let total: f64 = self
            .images
            .iter()
            .map(|img| img.values().iter().sum::<f64>())
            .sum();
        total / (self.images.len() * self.spec.len()) as f64
    }
}

/// Drift magnitude expressed in pixels of the series grid.
pub fn drift_in_pixels(spec: &GridSpec, drift_nm: [f64; 2]) -> f64 {
    (drift_nm[0].powi(2) + drift_nm[1].powi(2)).sqrt() / spec.pixel_size()
}

/// Simulate one Fourier-space image `G = Ψ ⋆_T Ψ` from a Fourier-space
/// wave and a factorized kernel. The kernel factors carry the aperture,
/// so out-of-aperture wave content never reaches the output.
pub fn simulate_image(psi: &ComplexField, kernel: &FactorizedKernel) -> Result<ComplexField> {
    if psi.tag() != SpaceTag::Fourier {
        return Err(Error::Mismatch("wave must be a fourier-space field".into()));
    }
    if Some(psi.spec()) != kernel.factors().spec() {
        return Err(Error::Mismatch("wave and kernel on different grids".into()));
    }
    wcc_factorized(psi, psi, kernel.factors())
}

/// Simulate a drifted focal series on the doubled grid and crop each
/// image to the centered window of `target` size.
///
/// `translations_nm` are cumulative per image with the first entry zero;
/// image `j` shows the specimen displaced by its translation, applied as
/// a modulation of the simulated Fourier image before cropping. The
/// inverse transform must come out real (tiny imaginary residue is
/// discarded after the check); a violation signals a broken kernel.
pub fn simulate_series(
    psi_large: &ComplexField,
    foci_nm: &[f64],
    translations_nm: &[[f64; 2]],
    params: &OpticalParams,
    n_focal: usize,
) -> Result<FocusSeries> {
    if foci_nm.is_empty() {
        return Err(Error::InvalidArgument("at least one focus value required".into()));
    }
    if foci_nm.len() != translations_nm.len() {
        return Err(Error::Mismatch(format!(
            "{} foci but {} translations",
            foci_nm.len(),
            translations_nm.len()
        )));
    }
    if let Some(first) = translations_nm.first() {
        if first != &[0.0, 0.0] {
            return Err(Error::InvalidArgument(
                "first translation must be (0, 0); it is the registration reference".into(),
            ));
        }
    }
    let large = *psi_large.spec();
    let n_small = large.n() / 2;
    let spec = GridSpec::new(n_small, large.extent_nm() / 2.0)?;

    let images: Result<Vec<RealField>> = foci_nm
        .par_iter()
        .zip(translations_nm.par_iter())
        .map(|(&z, &t)| {
            let kernel = build_factorized_kernel(&large, z, params, n_focal)?;
            let image = simulate_image(psi_large, &kernel)?;
            // g_j(x) = I(x - t_j): modulate by -t_j.
            let drifted = modulate(&image, [-t[0], -t[1]])?;
            let real = spectral_inverse(&drifted)?;
            crop_real_part(&real, &spec)
        })
        .collect();

    let series = FocusSeries {
        spec,
        params: *params,
        images: images?,
        foci_nm: foci_nm.to_vec(),
        translations_nm: translations_nm.to_vec(),
    };
    series.validate()?;
    Ok(series)
}

/// Take the real part of the centered `target` window, verifying the
/// imaginary residue is negligible first.
fn crop_real_part(field: &ComplexField, target: &GridSpec) -> Result<RealField> {
    let large = field.spec();
    let n = target.n();
    let offset = (large.n() - n) / 2;
    let max_re = field.values().iter().map(|v| v.re.abs()).fold(0.0, f64::max);
    let max_im = field.values().iter().map(|v| v.im.abs()).fold(0.0, f64::max);
    if max_im > 1e-12 * max_re.max(f64::MIN_POSITIVE) {
        return Err(Error::Numerical(format!(
            "simulated image is not real: max |Im| = {max_im:e} vs max |Re| = {max_re:e} \
             (asymmetric kernel?)"
        )));
    }
    RealField::from_fn(*target, |ix, iy| field.at(ix + offset, iy + offset).re)
}

/// Synthetic specimen: Gaussian bumps in phase and amplitude around a
/// constant background, standing in for a physical exit wave.
#[derive(Debug, Clone)]
pub struct SyntheticWaveSpec {
    pub background_amp: f64,
    pub atoms: Vec<Atom>,
}

#[derive(Debug, Clone, Copy)]
pub struct Atom {
    pub pos_nm: [f64; 2],
    pub phase_amp: f64,
    pub amp_amp: f64,
    pub width_nm: f64,
}

impl SyntheticWaveSpec {
    pub fn validate(&self, spec: &GridSpec) -> Result<()> {
        if !(self.background_amp > 0.0 && self.background_amp.is_finite()) {
            return Err(Error::InvalidArgument("background amplitude must be positive".into()));
        }
        let half = spec.extent_nm() / 2.0;
        for (i, atom) in self.atoms.iter().enumerate() {
            if !(atom.width_nm > 0.0) {
                return Err(Error::InvalidArgument(format!("atom {i} width must be positive")));
            }
            if atom.pos_nm[0].abs() > half || atom.pos_nm[1].abs() > half {
                return Err(Error::InvalidArgument(format!(
                    "atom {i} at ({}, {}) lies outside the field of view",
                    atom.pos_nm[0], atom.pos_nm[1]
                )));
            }
        }
        Ok(())
    }

    /// The same atoms replicated 2×2 onto the doubled field of view, so
    /// the oversized specimen is exactly periodic with the target window.
    pub fn tiled_for_oversize(&self, spec_small: &GridSpec) -> SyntheticWaveSpec {
        let l = spec_small.extent_nm();
        let mut atoms = Vec::with_capacity(self.atoms.len() * 4);
        for atom in &self.atoms {
            for dy in [-0.5, 0.5] {
                for dx in [-0.5, 0.5] {
                    let mut a = *atom;
                    a.pos_nm = [atom.pos_nm[0] + dx * l, atom.pos_nm[1] + dy * l];
                    atoms.push(a);
                }
            }
        }
        SyntheticWaveSpec {
            background_amp: self.background_amp,
            atoms,
        }
    }
}

/// Build the Fourier-space wave of a synthetic specimen: real-space
/// amplitude·exp(i·phase) with periodically wrapped Gaussian bumps,
/// transformed and aperture-masked.
pub fn make_synthetic_wave(
    spec: &GridSpec,
    s: &SyntheticWaveSpec,
    params: &OpticalParams,
) -> Result<ComplexField> {
    s.validate(spec)?;
    params.validate()?;
    let l = spec.extent_nm();
    let real = ComplexField::from_fn(*spec, SpaceTag::Real, |ix, iy| {
        let x = spec.coord(ix);
        let y = spec.coord(iy);
        let mut phase = 0.0;
        let mut amp = s.background_amp;
        for atom in &s.atoms {
            // Sum over the 3x3 periodic images so bumps stay smooth
            // across the periodic boundary.
            let mut bump = 0.0;
            for py in [-l, 0.0, l] {
                for px in [-l, 0.0, l] {
                    let dx = x - atom.pos_nm[0] - px;
                    let dy = y - atom.pos_nm[1] - py;
                    bump += (-(dx * dx + dy * dy) / (2.0 * atom.width_nm * atom.width_nm)).exp();
                }
            }
            phase += atom.phase_amp * bump;
            amp += atom.amp_amp * bump;
        }
        Complex64::from_polar(amp, phase)
    })?;
    let mask = params.aperture_mask(spec)?;
    spectral_transform(&real)?.mul_real(&mask)
}

/// Series directory layout: `manifest.txt` plus `image_###.{meta,raw}`.
pub fn save_series(dir: &Path, series: &FocusSeries) -> Result<()> {
    series.validate()?;
    std::fs::create_dir_all(dir)?;
    let p = &series.params;
    let mut manifest = String::new();
    manifest.push_str("[grid]\n");
    manifest.push_str(&format!("n = {}\nextent_nm = {}\n", series.spec.n(), series.spec.extent_nm()));
    manifest.push_str("[optics]\n");
    manifest.push_str(&format!(
        "lambda_nm = {}\ncs_nm = {}\nalpha_max_rad = {}\ndelta_nm = {}\nalpha_conv_rad = {}\n",
        p.lambda_nm, p.cs_nm, p.alpha_max_rad, p.delta_nm, p.alpha_conv_rad
    ));
    manifest.push_str("[series]\n");
    manifest.push_str(&format!("image_count = {}\n", series.len()));
    for (j, (z, t)) in series.foci_nm.iter().zip(&series.translations_nm).enumerate() {
        manifest.push_str(&format!("focus_nm_{j} = {z}\n"));
        manifest.push_str(&format!("translation_nm_{j} = {} {}\n", t[0], t[1]));
    }
    std::fs::write(dir.join("manifest.txt"), manifest)?;
    for (j, img) in series.images.iter().enumerate() {
        field_io::write_real(&dir.join(format!("image_{j:03}")), img, SpaceTag::Real)?;
    }
    Ok(())
}

pub fn load_series(dir: &Path) -> Result<FocusSeries> {
    let path = dir.join("manifest.txt");
    let text = std::fs::read_to_string(&path)?;
    let kv = crate::config::parse_flat(&text).map_err(|reason| Error::Format {
        path: path.display().to_string(),
        reason,
    })?;
    let bad = |reason: String| Error::Format {
        path: path.display().to_string(),
        reason,
    };
    let get = |key: &str| {
        kv.get(key)
            .map(|s| s.to_string())
            .ok_or_else(|| bad(format!("missing key {key:?}")))
    };
    let parse_f64 = |key: &str| -> Result<f64> {
        get(key)?.parse::<f64>().map_err(|e| bad(format!("{key}: {e}")))
    };
    let n: usize = get("grid.n")?.parse().map_err(|e| bad(format!("n: {e}")))?;
    let spec = GridSpec::new(n, parse_f64("grid.extent_nm")?)?;
    let params = OpticalParams {
        lambda_nm: parse_f64("optics.lambda_nm")?,
        cs_nm: parse_f64("optics.cs_nm")?,
        alpha_max_rad: parse_f64("optics.alpha_max_rad")?,
        delta_nm: parse_f64("optics.delta_nm")?,
        alpha_conv_rad: parse_f64("optics.alpha_conv_rad")?,
    };
    let count: usize = get("series.image_count")?
        .parse()
        .map_err(|e| bad(format!("image_count: {e}")))?;
    let mut foci = Vec::with_capacity(count);
    let mut translations = Vec::with_capacity(count);
    let mut images = Vec::with_capacity(count);
    for j in 0..count {
        foci.push(parse_f64(&format!("series.focus_nm_{j}"))?);
        let t_raw = get(&format!("series.translation_nm_{j}"))?;
        let parts: Vec<&str> = t_raw.split_whitespace().collect();
        if parts.len() != 2 {
            return Err(bad(format!("translation_nm_{j} must hold two numbers")));
        }
        translations.push([
            parts[0].parse().map_err(|e| bad(format!("translation_nm_{j}: {e}")))?,
            parts[1].parse().map_err(|e| bad(format!("translation_nm_{j}: {e}")))?,
        ]);
        let (img, _) = field_io::read_real(&dir.join(format!("image_{j:03}")))?;
        images.push(img);
    }
    let series = FocusSeries {
        spec,
        params,
        images,
        foci_nm: foci,
        translations_nm: translations,
    };
    series.validate()?;
    Ok(series)
}
