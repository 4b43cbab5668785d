//! The joint reconstruction/registration functional and its derivatives.
//!
//! For a series of images g_j with focus values Z_j, modulated spectra
//! `G_j(t) = μ_t F(g_j)` and kernels T_j, the data term is
//!
//! ```text
//! E[Ψ, t] = (1/N) Σ_j ‖ Ψ ⋆_{T_j} Ψ − μ_{t_j} F(g_j) ‖²
//! ```
//!
//! and the regularized functional adds `α ‖Ψ − Ψ_M‖²`. Restricted to a
//! line `Ψ + s·Φ` the data term is a quartic polynomial in `s` whose
//! coefficients [`Objective::line_coefficients`] computes in closed form;
//! the first coefficient yields the wave differential and the gradient is
//! its Riesz representer under the real inner product `Re⟨·,·⟩` on the
//! aperture band. The translation differential pairs the residual with
//! `ν(x) = 2πi x·t̃` times the modulated spectrum.
//!
//! Input spectra are low-pass filtered to the `2A` band once at
//! construction; frequencies beyond twice the aperture radius cannot be
//! produced by the forward model, so this loses nothing.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{
    band_mask, inner_product, l2_norm, modulate, spectral_inverse, spectral_transform,
    ComplexField, GridSpec, RealField, SpaceTag,
};
use crate::forward::FocusSeries;
use crate::tcc::FactorizedKernel;
use crate::wcc::wcc_factorized;

/// Current estimate of the unknowns: aperture-band wave plus per-image
/// translations with the first entry pinned to the origin.
#[derive(Debug, Clone)]
pub struct ReconstructionVariables {
    pub psi: ComplexField,
    pub translations_nm: Vec<[f64; 2]>,
}

/// Tikhonov term `α ‖Ψ − Ψ_M‖²`; `psi_m = None` means Ψ_M = 0.
pub struct RegularizerSpec {
    pub alpha: f64,
    pub psi_m: Option<ComplexField>,
}

impl RegularizerSpec {
    pub fn none() -> Self {
        Self {
            alpha: 0.0,
            psi_m: None,
        }
    }

    pub fn plain(alpha: f64) -> Self {
        Self { alpha, psi_m: None }
    }
}

/// Energy value split into its parts.
#[derive(Debug, Clone)]
pub struct EnergyBreakdown {
    pub total: f64,
    pub data_term: f64,
    pub regularizer: f64,
    /// Squared residual norm of each image.
    pub per_image: Vec<f64>,
}

/// Everything fixed during a reconstruction: prefiltered data spectra,
/// kernels, the aperture and the regularizer.
pub struct Objective {
    spec: GridSpec,
    kernels: Vec<FactorizedKernel>,
    /// 2A-prefiltered Fourier transforms of the input images.
    g_hat: Vec<ComplexField>,
    /// Real-space L¹ norms of the (nonnegative) input images.
    g_l1: Vec<f64>,
    aperture: RealField,
    aperture_radius: f64,
    reg: RegularizerSpec,
}

impl Objective {
    pub fn new(
        series: &FocusSeries,
        kernels: Vec<FactorizedKernel>,
        reg: RegularizerSpec,
    ) -> Result<Self> {
        series.validate()?;
        if kernels.len() != series.len() {
            return Err(Error::Mismatch(format!(
                "{} kernels for {} images",
                kernels.len(),
                series.len()
            )));
        }
        for (j, (k, &z)) in kernels.iter().zip(&series.foci_nm).enumerate() {
            if (k.focus_nm() - z).abs() > 1e-12 * z.abs().max(1.0) {
                return Err(Error::Mismatch(format!(
                    "kernel {j} built for focus {} but image has focus {z}",
                    k.focus_nm()
                )));
            }
            if k.factors().spec() != Some(&series.spec) {
                return Err(Error::Mismatch(format!("kernel {j} on a different grid")));
            }
        }
        if !(reg.alpha >= 0.0 && reg.alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "regularization weight must be nonnegative, got {}",
                reg.alpha
            )));
        }
        if let Some(psi_m) = &reg.psi_m {
            if *psi_m.spec() != series.spec || psi_m.tag() != SpaceTag::Fourier {
                return Err(Error::Mismatch("reference wave on a different grid".into()));
            }
        }
        let aperture = series.params.aperture_mask(&series.spec)?;
        let band_2a = band_mask(&series.spec, 2.0 * series.params.aperture_radius())?;
        let h2 = series.spec.pixel_size() * series.spec.pixel_size();
        let mut g_hat = Vec::with_capacity(series.len());
        let mut g_l1 = Vec::with_capacity(series.len());
        for img in &series.images {
            let spectrum = spectral_transform(&img.to_complex(SpaceTag::Real))?;
            g_hat.push(spectrum.mul_real(&band_2a)?);
            g_l1.push(img.values().iter().map(|v| v.abs()).sum::<f64>() * h2);
        }
        Ok(Self {
            spec: series.spec,
            kernels,
            g_hat,
            g_l1,
            aperture,
            aperture_radius: series.params.aperture_radius(),
            reg,
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    /// Aperture radius r_a of the underlying optics in nm⁻¹.
    pub fn aperture_radius(&self) -> f64 {
        self.aperture_radius
    }

    pub fn image_count(&self) -> usize {
        self.g_hat.len()
    }

    pub fn aperture(&self) -> &RealField {
        &self.aperture
    }

    pub fn kernels(&self) -> &[FactorizedKernel] {
        &self.kernels
    }

    pub fn regularizer(&self) -> &RegularizerSpec {
        &self.reg
    }

    fn check_vars(&self, vars: &ReconstructionVariables) -> Result<()> {
        if *vars.psi.spec() != self.spec || vars.psi.tag() != SpaceTag::Fourier {
            return Err(Error::Mismatch("wave estimate on a different grid".into()));
        }
        if vars.translations_nm.len() != self.g_hat.len() {
            return Err(Error::Mismatch(format!(
                "{} translations for {} images",
                vars.translations_nm.len(),
                self.g_hat.len()
            )));
        }
        Ok(())
    }

    /// Per-image residual `Ψ ⋆_T Ψ − μ_t F(g_j)`.
    fn residual(&self, psi: &ComplexField, j: usize, t: [f64; 2]) -> Result<ComplexField> {
        let sim = wcc_factorized(psi, psi, self.kernels[j].factors())?;
        sim.sub(&modulate(&self.g_hat[j], t)?)
    }

    fn regularizer_value(&self, psi: &ComplexField) -> Result<f64> {
        if self.reg.alpha == 0.0 {
            return Ok(0.0);
        }
        let diff = match &self.reg.psi_m {
            Some(m) => psi.sub(m)?,
            None => psi.clone(),
        };
        Ok(self.reg.alpha * l2_norm(&diff).powi(2))
    }

    /// Evaluate the regularized energy at `(Ψ, t)`.
    pub fn energy(&self, vars: &ReconstructionVariables) -> Result<EnergyBreakdown> {
        self.check_vars(vars)?;
        let psi = vars.psi.mul_real(&self.aperture)?;
        let per_image: Result<Vec<f64>> = (0..self.g_hat.len())
            .into_par_iter()
            .map(|j| {
                let r = self.residual(&psi, j, vars.translations_nm[j])?;
                Ok(l2_norm(&r).powi(2))
            })
            .collect();
        let per_image = per_image?;
        let data_term = per_image.iter().sum::<f64>() / per_image.len() as f64;
        let regularizer = self.regularizer_value(&vars.psi)?;
        Ok(EnergyBreakdown {
            total: data_term + regularizer,
            data_term,
            regularizer,
            per_image,
        })
    }

    /// Riesz representer of the wave differential on the aperture band:
    /// `Re⟨grad, Φ⟩` is the derivative of the energy along `Φ` for every
    /// aperture-band direction `Φ`.
    pub fn gradient_wave(&self, vars: &ReconstructionVariables) -> Result<ComplexField> {
        self.check_vars(vars)?;
        let psi = vars.psi.mul_real(&self.aperture)?;
        let n = self.g_hat.len() as f64;
        let contributions: Result<Vec<ComplexField>> = (0..self.g_hat.len())
            .into_par_iter()
            .map(|j| {
                // Adjoint of Φ ↦ Ψ ⋆_T Φ applied to the residual R:
                // Σ_k conj(t_k) · F( F⁻¹(Ψ t_k) · F⁻¹(R) ).
                let r = self.residual(&psi, j, vars.translations_nm[j])?;
                let rho = spectral_inverse(&r)?;
                let mut acc = ComplexField::zeros(self.spec, SpaceTag::Fourier);
                for t_k in self.kernels[j].factors().factors() {
                    let p_k = spectral_inverse(&psi.mul(t_k)?)?;
                    let back = spectral_transform(&p_k.mul(&rho)?)?;
                    acc = acc.add(&back.mul(&t_k.conj())?)?;
                }
                Ok(acc)
            })
            .collect();
        let mut grad = ComplexField::zeros(self.spec, SpaceTag::Fourier);
        for c in contributions? {
            grad = grad.add(&c)?;
        }
        grad = grad.scale(Complex64::new(4.0 / n, 0.0));
        if self.reg.alpha > 0.0 {
            let diff = match &self.reg.psi_m {
                Some(m) => vars.psi.sub(m)?,
                None => vars.psi.clone(),
            };
            grad = grad.add(&diff.scale(Complex64::new(2.0 * self.reg.alpha, 0.0)))?;
        }
        grad.mul_real(&self.aperture)
    }

    /// Per-image translation gradient: component `c` of image `j` is
    /// `−(2/N) Re⟨R_j, ν_c μ_{t_j} F(g_j)⟩` with `ν_c(x) = 2πi x_c`.
    ///
    /// The first image's gradient is reported as computed; the gauge pin
    /// is the caller's business.
    pub fn gradient_translation(&self, vars: &ReconstructionVariables) -> Result<Vec<[f64; 2]>> {
        self.check_vars(vars)?;
        let psi = vars.psi.mul_real(&self.aperture)?;
        let n = self.g_hat.len() as f64;
        (0..self.g_hat.len())
            .into_par_iter()
            .map(|j| {
                let t = vars.translations_nm[j];
                let sim = wcc_factorized(&psi, &psi, self.kernels[j].factors())?;
                let moved = modulate(&self.g_hat[j], t)?;
                let r = sim.sub(&moved)?;
                let mut grad = [0.0; 2];
                for (c, g) in grad.iter_mut().enumerate() {
                    let nu_m = ComplexField::from_fn(self.spec, SpaceTag::Fourier, |ix, iy| {
                        let x = if c == 0 { self.spec.freq(ix) } else { self.spec.freq(iy) };
                        moved.at(ix, iy) * Complex64::new(0.0, 2.0 * std::f64::consts::PI * x)
                    })?;
                    *g = -2.0 / n * inner_product(&r, &nu_m)?.re;
                }
                Ok(grad)
            })
            .collect()
    }

    /// Coefficients C⁰…C⁴ of the quartic `s ↦ E[Ψ + s·Φ, t]` (data term
    /// only, the regularizer is not part of the line restriction).
    ///
    /// `Φ` is masked to the aperture band internally and must not vanish
    /// there.
    pub fn line_coefficients(
        &self,
        psi: &ComplexField,
        phi: &ComplexField,
        translations_nm: &[[f64; 2]],
    ) -> Result<[f64; 5]> {
        if translations_nm.len() != self.g_hat.len() {
            return Err(Error::Mismatch("translation count mismatch".into()));
        }
        let psi = psi.mul_real(&self.aperture)?;
        let phi = phi.mul_real(&self.aperture)?;
        if l2_norm(&phi) == 0.0 {
            return Err(Error::InvalidArgument(
                "direction vanishes on the aperture band".into(),
            ));
        }
        let n = self.g_hat.len() as f64;
        let mut c = [0.0; 5];
        for j in 0..self.g_hat.len() {
            let factors = self.kernels[j].factors();
            let s = wcc_factorized(&psi, &psi, factors)?
                .sub(&modulate(&self.g_hat[j], translations_nm[j])?)?;
            let u = wcc_factorized(&psi, &phi, factors)?;
            let v = wcc_factorized(&phi, &psi, factors)?;
            let w = wcc_factorized(&phi, &phi, factors)?;
            let uv = u.add(&v)?;
            c[0] += l2_norm(&s).powi(2);
            c[1] += 2.0 * inner_product(&s, &uv)?.re;
            c[2] += l2_norm(&uv).powi(2) + 2.0 * inner_product(&s, &w)?.re;
            c[3] += 2.0 * inner_product(&uv, &w)?.re;
            c[4] += l2_norm(&w).powi(2);
        }
        for v in &mut c {
            *v /= n;
        }
        Ok(c)
    }

    /// Second-order line coefficient at Ψ = 0 along a normalized
    /// low-frequency bump direction; the probe for (non-)convexity.
    ///
    /// The direction is a Gaussian bump of the given width centered at
    /// zero frequency, scaled so its simulated image has unit mean. For a
    /// series with at least one nonzero image the coefficient comes out
    /// negative and, as the width shrinks, approaches
    /// `−(2/N) Σ_j ‖g_j‖_{L¹}`; for the all-zero series the line
    /// restriction is the convex `C⁴ s⁴ + C⁰` and the probe reports that.
    pub fn convexity_probe(&self, width_invnm: f64) -> Result<ConvexityProbe> {
        if !(width_invnm > 0.0 && width_invnm.is_finite()) {
            return Err(Error::InvalidArgument("probe width must be positive".into()));
        }
        let all_zero = self.g_l1.iter().all(|&v| v == 0.0);
        let raw = ComplexField::from_fn(self.spec, SpaceTag::Fourier, |ix, iy| {
            let v2 = self.spec.freq(ix).powi(2) + self.spec.freq(iy).powi(2);
            Complex64::new((-v2 / (2.0 * width_invnm * width_invnm)).exp(), 0.0)
        })?
        .mul_real(&self.aperture)?;
        // Normalize so the mean of the simulated image is one: the image
        // mean is (Φ ⋆ Φ)(0) / L², and zero-lag scales with ‖Φ‖².
        let n = self.g_hat.len() as f64;
        let mut zero_lag = 0.0;
        for kernel in &self.kernels {
            let sim = wcc_factorized(&raw, &raw, kernel.factors())?;
            let half = self.spec.n() / 2;
            zero_lag += sim.at(half, half).re;
        }
        zero_lag /= n;
        if zero_lag <= 0.0 {
            return Err(Error::Numerical("probe direction simulates to nothing".into()));
        }
        let l2 = self.spec.extent_nm() * self.spec.extent_nm();
        let phi = raw.scale(Complex64::new((l2 / zero_lag).sqrt(), 0.0));

        let mut c2 = 0.0;
        for (j, kernel) in self.kernels.iter().enumerate() {
            let w = wcc_factorized(&phi, &phi, kernel.factors())?;
            c2 += -2.0 / n * inner_product(&self.g_hat[j], &w)?.re;
        }
        let l1_limit = -2.0 / n * self.g_l1.iter().sum::<f64>();
        Ok(ConvexityProbe {
            c2,
            l1_limit,
            convex_case: all_zero,
        })
    }

    /// `−(2/N) Σ_j ‖g_j‖_{L¹}`, the limit the probe approaches.
    pub fn convexity_l1_limit(&self) -> f64 {
        -2.0 / self.g_hat.len() as f64 * self.g_l1.iter().sum::<f64>()
    }
}

/// Result of the convexity probe.
#[derive(Debug, Clone, Copy)]
pub struct ConvexityProbe {
    /// C² along the normalized bump direction at Ψ = 0.
    pub c2: f64,
    /// The limiting value `−(2/N) Σ_j ‖g_j‖_{L¹}`.
    pub l1_limit: f64,
    /// True when every input image is zero (the convex case).
    pub convex_case: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tcc::build_factorized_kernel;
    use crate::testutil::{desk_problem, random_masked};
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn energy_vanishes_at_the_generating_truth() {
        let (series, kernels, psi_truth, truth) = desk_problem(3, 1);
        let obj = Objective::new(&series, kernels, RegularizerSpec::none()).unwrap();
        let vars = ReconstructionVariables {
            psi: psi_truth,
            translations_nm: truth,
        };
        let e = obj.energy(&vars).unwrap();
        // Scale: mean squared image norm.
        let scale = e.per_image.len() as f64;
        assert!(e.data_term <= 1e-18 * scale, "data term {:e}", e.data_term);
        assert_eq!(e.regularizer, 0.0);
        assert!((e.total - e.data_term - e.regularizer).abs() <= 1e-18);
    }

    #[test]
    fn zero_wave_energy_is_mean_squared_image_norm() {
        let (series, kernels, _, truth) = desk_problem(3, 2);
        let obj = Objective::new(&series, kernels, RegularizerSpec::none()).unwrap();
        let vars = ReconstructionVariables {
            psi: ComplexField::zeros(series.spec, SpaceTag::Fourier),
            translations_nm: truth,
        };
        let e = obj.energy(&vars).unwrap();
        // ‖μ_t F(g_j)‖² = ‖g_j‖² (modulation is unimodular, transform unitary).
        let h2 = series.spec.pixel_size() * series.spec.pixel_size();
        let expect: f64 = series
            .images
            .iter()
            .map(|g| g.values().iter().map(|v| v * v).sum::<f64>() * h2)
            .sum::<f64>()
            / series.len() as f64;
        assert!((e.data_term - expect).abs() <= 1e-10 * expect);
    }

    #[test]
    fn global_phase_leaves_energy_unchanged() {
        let (series, kernels, psi_truth, truth) = desk_problem(2, 3);
        let obj = Objective::new(&series, kernels, RegularizerSpec::plain(1e-5)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let vars = ReconstructionVariables {
            psi: psi_truth.scale(Complex64::new(1.1, 0.0)),
            translations_nm: truth.clone(),
        };
        let base = obj.energy(&vars).unwrap().total;
        for _ in 0..5 {
            let c = rng.gen_range(0.0..std::f64::consts::TAU);
            let rotated = ReconstructionVariables {
                psi: vars.psi.scale(Complex64::from_polar(1.0, c)),
                translations_nm: truth.clone(),
            };
            let e = obj.energy(&rotated).unwrap().total;
            assert!((e - base).abs() <= 1e-10 * base);
        }
    }

    #[test]
    fn modulation_translation_equivalence() {
        // Energy with modulated data equals energy with the demodulated
        // wave against raw data.
        let (series, kernels, psi_truth, _) = desk_problem(2, 5);
        let obj = Objective::new(&series, kernels, RegularizerSpec::none()).unwrap();
        let t = vec![[0.0, 0.0], [0.011, -0.007]];
        let zero_t = vec![[0.0, 0.0]; 2];
        let lhs = obj
            .energy(&ReconstructionVariables {
                psi: psi_truth.clone(),
                translations_nm: t.clone(),
            })
            .unwrap()
            .total;
        // Demodulating per image only works when all images share the
        // translation; use a common shift here.
        let s = [0.013, 0.009];
        let common = vec![s; 2];
        let lhs_common = obj
            .energy(&ReconstructionVariables {
                psi: psi_truth.clone(),
                translations_nm: common,
            })
            .unwrap()
            .total;
        let rhs = obj
            .energy(&ReconstructionVariables {
                psi: modulate(&psi_truth, [-s[0], -s[1]]).unwrap(),
                translations_nm: zero_t,
            })
            .unwrap()
            .total;
        assert!((lhs_common - rhs).abs() <= 1e-10 * rhs.max(lhs_common));
        let _ = lhs;
    }

    #[test]
    fn wave_gradient_matches_line_coefficient_and_finite_differences() {
        let (series, kernels, _psi, truth) = desk_problem(2, 6);
        let spec = series.spec;
        for (case, alpha) in [(0usize, 0.0), (1, 1e-5)] {
            let obj = Objective::new(
                &series,
                truth_kernels(&series),
                RegularizerSpec::plain(alpha),
            )
            .unwrap();
            let mask = obj.aperture().clone();
            let psi = random_masked(&spec, &mask, 60 + case as u64, 0.1);
            let phi = random_masked(&spec, &mask, 70 + case as u64, 1.0);
            let vars = ReconstructionVariables {
                psi: psi.clone(),
                translations_nm: truth.clone(),
            };
            let grad = obj.gradient_wave(&vars).unwrap();
            let directional = inner_product(&grad, &phi).unwrap().re;

            // Two independent routes: the line coefficient and central FD.
            let c = obj.line_coefficients(&psi, &phi, &truth).unwrap();
            let reg_slope = if alpha > 0.0 {
                2.0 * alpha * inner_product(&psi, &phi).unwrap().re
            } else {
                0.0
            };
            assert!(
                (directional - (c[1] + reg_slope)).abs() <= 1e-10 * directional.abs().max(c[0]),
                "adjoint vs line coefficient: {directional} vs {}",
                c[1] + reg_slope
            );

            let h = f64::EPSILON.cbrt();
            let ep = obj
                .energy(&ReconstructionVariables {
                    psi: psi.scaled_add(h, &phi).unwrap(),
                    translations_nm: truth.clone(),
                })
                .unwrap()
                .total;
            let em = obj
                .energy(&ReconstructionVariables {
                    psi: psi.scaled_add(-h, &phi).unwrap(),
                    translations_nm: truth.clone(),
                })
                .unwrap()
                .total;
            let fd = (ep - em) / (2.0 * h);
            assert!(
                (fd - directional).abs() <= 1e-6 * directional.abs().max(1e-12),
                "fd {fd} vs adjoint {directional}"
            );
        }
        let _ = kernels;
    }

    fn truth_kernels(series: &FocusSeries) -> Vec<FactorizedKernel> {
        series
            .foci_nm
            .iter()
            .map(|&z| build_factorized_kernel(&series.spec, z, &series.params, 1).unwrap())
            .collect()
    }

    #[test]
    fn translation_gradient_matches_finite_differences() {
        let (series, kernels, _psi, truth) = desk_problem(3, 8);
        let obj = Objective::new(&series, kernels, RegularizerSpec::none()).unwrap();
        let mask = obj.aperture().clone();
        let psi = random_masked(&series.spec, &mask, 80, 0.2);
        let t: Vec<[f64; 2]> = truth
            .iter()
            .map(|v| [v[0] + 0.004, v[1] - 0.002])
            .collect();
        let vars = ReconstructionVariables {
            psi: psi.clone(),
            translations_nm: t.clone(),
        };
        let grad = obj.gradient_translation(&vars).unwrap();
        let h = f64::EPSILON.cbrt();
        for j in 0..t.len() {
            for c in 0..2 {
                let mut tp = t.clone();
                let mut tm = t.clone();
                tp[j][c] += h;
                tm[j][c] -= h;
                let ep = obj
                    .energy(&ReconstructionVariables { psi: psi.clone(), translations_nm: tp })
                    .unwrap()
                    .total;
                let em = obj
                    .energy(&ReconstructionVariables { psi: psi.clone(), translations_nm: tm })
                    .unwrap()
                    .total;
                let fd = (ep - em) / (2.0 * h);
                let an = grad[j][c];
                assert!(
                    (fd - an).abs() <= 1e-6 * an.abs().max(1e-10),
                    "image {j} comp {c}: fd {fd} vs {an}"
                );
            }
        }
    }

    #[test]
    fn gradients_vanish_at_exact_data() {
        let (series, kernels, psi_truth, truth) = desk_problem(3, 9);
        let obj = Objective::new(&series, kernels, RegularizerSpec::none()).unwrap();
        let vars = ReconstructionVariables {
            psi: psi_truth.clone(),
            translations_nm: truth,
        };
        let g = obj.gradient_wave(&vars).unwrap();
        let scale = l2_norm(&vars.psi);
        assert!(l2_norm(&g) <= 1e-10 * scale.max(1.0));
        for t in obj.gradient_translation(&vars).unwrap() {
            assert!(t[0].abs() <= 1e-10 && t[1].abs() <= 1e-10);
        }
    }

    #[test]
    fn translation_gradient_is_per_image_separable() {
        // Shifting image j's data and translation together leaves other
        // images' gradients untouched.
        let (series, kernels, _psi, truth) = desk_problem(3, 10);
        let obj = Objective::new(&series, kernels, RegularizerSpec::none()).unwrap();
        let mask = obj.aperture().clone();
        let psi = random_masked(&series.spec, &mask, 90, 0.2);
        let base = obj
            .gradient_translation(&ReconstructionVariables {
                psi: psi.clone(),
                translations_nm: truth.clone(),
            })
            .unwrap();
        let mut moved = truth.clone();
        moved[1] = [moved[1][0] + 0.015, moved[1][1] - 0.01];
        let shifted = obj
            .gradient_translation(&ReconstructionVariables {
                psi,
                translations_nm: moved,
            })
            .unwrap();
        for j in [0usize, 2] {
            for c in 0..2 {
                assert!((base[j][c] - shifted[j][c]).abs() <= 1e-12 * base[j][c].abs().max(1.0));
            }
        }
    }

    #[test]
    fn line_restriction_is_exactly_quartic() {
        let (series, kernels, _psi, truth) = desk_problem(2, 11);
        let obj = Objective::new(&series, kernels, RegularizerSpec::none()).unwrap();
        let mask = obj.aperture().clone();
        let psi = random_masked(&series.spec, &mask, 100, 0.3);
        let phi = random_masked(&series.spec, &mask, 101, 0.5);
        let c = obj.line_coefficients(&psi, &phi, &truth).unwrap();
        assert!(c[4] > 0.0);
        // C0 is the energy at s = 0.
        let e0 = obj
            .energy(&ReconstructionVariables {
                psi: psi.clone(),
                translations_nm: truth.clone(),
            })
            .unwrap()
            .data_term;
        assert!((c[0] - e0).abs() <= 1e-12 * e0);
        for s in [-1.3, -0.4, 0.25, 0.8, 1.7, 2.6] {
            let poly = c[0] + s * (c[1] + s * (c[2] + s * (c[3] + s * c[4])));
            let e = obj
                .energy(&ReconstructionVariables {
                    psi: psi.scaled_add(s, &phi).unwrap(),
                    translations_nm: truth.clone(),
                })
                .unwrap()
                .data_term;
            assert!(
                (poly - e).abs() <= 1e-8 * e.max(1e-30),
                "s = {s}: poly {poly} vs energy {e}"
            );
        }
    }

    #[test]
    fn odd_line_coefficients_vanish_at_zero_wave() {
        let (series, kernels, _psi, truth) = desk_problem(2, 12);
        let obj = Objective::new(&series, kernels, RegularizerSpec::none()).unwrap();
        let mask = obj.aperture().clone();
        let zero = ComplexField::zeros(series.spec, SpaceTag::Fourier);
        let phi = random_masked(&series.spec, &mask, 110, 0.7);
        let c = obj.line_coefficients(&zero, &phi, &truth).unwrap();
        assert_eq!(c[1], 0.0);
        assert_eq!(c[3], 0.0);
        assert!(c[4] > 0.0);
    }

    #[test]
    fn zero_direction_is_rejected() {
        let (series, kernels, psi, truth) = desk_problem(2, 13);
        let obj = Objective::new(&series, kernels, RegularizerSpec::none()).unwrap();
        let zero = ComplexField::zeros(series.spec, SpaceTag::Fourier);
        assert!(obj.line_coefficients(&psi, &zero, &truth).is_err());
    }

    #[test]
    fn convexity_probe_is_negative_and_converges_to_l1_limit() {
        let (series, kernels, _psi, _truth) = desk_problem(3, 14);
        let obj = Objective::new(&series, kernels, RegularizerSpec::none()).unwrap();
        let dv = series.spec.freq_step();
        let mut prev_gap = f64::INFINITY;
        for width in [6.0 * dv, 3.0 * dv, 1.0 * dv, 0.25 * dv] {
            let probe = obj.convexity_probe(width).unwrap();
            assert!(!probe.convex_case);
            assert!(probe.c2 < 0.0, "width {width}: c2 = {}", probe.c2);
            let gap = (probe.c2 - probe.l1_limit).abs() / probe.l1_limit.abs();
            assert!(gap <= prev_gap * 1.5, "gap did not trend down");
            prev_gap = gap;
        }
        let narrow = obj.convexity_probe(0.25 * dv).unwrap();
        let rel = (narrow.c2 - narrow.l1_limit).abs() / narrow.l1_limit.abs();
        assert!(rel <= 0.05, "relative gap {rel}");
    }

    #[test]
    fn convexity_probe_scales_linearly_with_the_data() {
        let (series, _kernels, _psi, _truth) = desk_problem(2, 15);
        let kernels = truth_kernels(&series);
        let obj = Objective::new(&series, kernels, RegularizerSpec::none()).unwrap();
        let mut doubled = series.clone();
        for img in &mut doubled.images {
            *img = RealField::from_values(
                *img.spec(),
                img.values().iter().map(|v| 2.0 * v).collect(),
            )
            .unwrap();
        }
        let obj2 = Objective::new(&doubled, truth_kernels(&doubled), RegularizerSpec::none()).unwrap();
        let w = 2.0 * series.spec.freq_step();
        let a = obj.convexity_probe(w).unwrap().c2;
        let b = obj2.convexity_probe(w).unwrap().c2;
        assert!((b - 2.0 * a).abs() <= 1e-10 * a.abs());
    }

    #[test]
    fn convexity_probe_reports_convex_case_for_zero_series() {
        let (series, _kernels, _psi, _truth) = desk_problem(2, 16);
        let mut zeroed = series.clone();
        for img in &mut zeroed.images {
            *img = RealField::zeros(*img.spec());
        }
        let obj = Objective::new(&zeroed, truth_kernels(&zeroed), RegularizerSpec::none()).unwrap();
        let probe = obj.convexity_probe(2.0 * zeroed.spec.freq_step()).unwrap();
        assert!(probe.convex_case);
        assert_eq!(probe.c2, 0.0);
    }

    #[test]
    fn empty_series_is_rejected() {
        let (series, kernels, _psi, _truth) = desk_problem(1, 17);
        let empty = FocusSeries {
            spec: series.spec,
            params: series.params,
            images: vec![],
            foci_nm: vec![],
            translations_nm: vec![],
        };
        assert!(Objective::new(&empty, vec![], RegularizerSpec::none()).is_err());
        drop(kernels);
    }

    #[test]
    fn kernel_focus_mismatch_is_rejected() {
        let (series, _kernels, _psi, _truth) = desk_problem(2, 18);
        let wrong: Vec<FactorizedKernel> = series
            .foci_nm
            .iter()
            .map(|&z| build_factorized_kernel(&series.spec, z + 1.0, &series.params, 1).unwrap())
            .collect();
        assert!(Objective::new(&series, wrong, RegularizerSpec::none()).is_err());
    }
}
