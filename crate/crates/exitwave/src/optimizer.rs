//! Joint minimization of the regularized functional over wave and
//! translations.
//!
//! The solver is a Fletcher-Reeves nonlinear conjugate gradient with
//! Armijo backtracking. The search space packs the wave (a real vector
//! space of twice the aperture-band dimension under `Re⟨·,·⟩`) together
//! with the free translation components; translations enter the packed
//! vector divided by the field extent so both blocks carry comparable
//! magnitudes. The first image's translation is pinned to the origin,
//! which fixes the joint modulation/shift gauge; the global phase gauge
//! needs no pinning since it is a flat direction the gradient never
//! points along. Translations are projected back onto the admissible
//! ball after every accepted step.

use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{
    band_mask, inner_product, l2_norm, modulate, spectral_inverse, spectral_transform,
    ComplexField, RealField, SpaceTag,
};
use crate::forward::FocusSeries;
use crate::objective::{
    EnergyBreakdown, Objective, ReconstructionVariables, RegularizerSpec,
};
use crate::tcc::FactorizedKernel;
use crate::wcc::xcorr_spectral;

/// Solver parameters.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Tikhonov weight used when the solver builds its own objective.
    pub alpha: f64,
    /// Stop when the energy decrease of an accepted step falls below this.
    pub epsilon_stop: f64,
    pub max_iters: usize,
    pub armijo_sigma: f64,
    pub armijo_backtrack: f64,
    /// First trial step; later iterations warm-start from the previous
    /// accepted step (one backtracking notch above it).
    pub armijo_initial_step: f64,
    /// Forced steepest-descent restart every this many iterations.
    pub restart_period: usize,
    /// Admissible translation radius; `None` means half the field of view.
    pub translation_bound_nm: Option<f64>,
    /// Keep translations at their initial values (wave-only descent).
    pub freeze_translations: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            alpha: 1e-5,
            epsilon_stop: 1e-10,
            max_iters: 1000,
            armijo_sigma: 1e-4,
            armijo_backtrack: 0.5,
            armijo_initial_step: 1.0,
            restart_period: 50,
            translation_bound_nm: None,
            freeze_translations: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidArgument("solver.alpha must be >= 0".into()));
        }
        if !(self.epsilon_stop > 0.0) {
            return Err(Error::InvalidArgument("solver.epsilon_stop must be > 0".into()));
        }
        if !(self.armijo_backtrack > 0.0 && self.armijo_backtrack < 1.0) {
            return Err(Error::InvalidArgument(
                "solver.armijo_backtrack must lie in (0, 1)".into(),
            ));
        }
        if !(self.armijo_sigma > 0.0 && self.armijo_sigma < 1.0) {
            return Err(Error::InvalidArgument(
                "solver.armijo_sigma must lie in (0, 1)".into(),
            ));
        }
        if !(self.armijo_initial_step > 0.0) {
            return Err(Error::InvalidArgument(
                "solver.armijo_initial_step must be > 0".into(),
            ));
        }
        if self.restart_period == 0 {
            return Err(Error::InvalidArgument("solver.restart_period must be >= 1".into()));
        }
        Ok(())
    }
}

/// One accepted iteration (index 0 records the initial point).
#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub iteration: usize,
    pub energy: EnergyBreakdown,
    pub step: f64,
    pub grad_norm_wave: f64,
    pub grad_norm_trans: f64,
    pub trans_err_sup_px: Option<f64>,
    pub trans_err_euc_px: Option<f64>,
    pub wave_err_sup: Option<f64>,
    pub wave_err_euc: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// Energy decrease fell below the stopping threshold.
    Converged,
    MaxIters,
    /// Projection onto the translation ball undid the step.
    BoundStall,
}

pub struct MinimizeOutcome {
    pub vars: ReconstructionVariables,
    pub records: Vec<IterationRecord>,
    pub stop: StopReason,
}

/// Known generating truth, for error columns in the iteration log.
pub struct GroundTruth {
    pub wave: ComplexField,
    pub translations_nm: Vec<[f64; 2]>,
}

/// Constant initial wave: the square root of the mean image intensity,
/// transformed and restricted to the aperture band.
pub fn init_wave(series: &FocusSeries) -> Result<ComplexField> {
    series.validate()?;
    let mean = series.mean_intensity();
    if mean < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "mean image intensity is negative ({mean:e}); corrupt data"
        )));
    }
    let c = mean.sqrt();
    let constant =
        ComplexField::from_fn(series.spec, SpaceTag::Real, |_, _| Complex64::new(c, 0.0))?;
    let mask = series.params.aperture_mask(&series.spec)?;
    spectral_transform(&constant)?.mul_real(&mask)
}

/// Rough registration: integer-pixel argmax of the cross-correlation of
/// consecutive images, accumulated into absolute shifts (first entry
/// zero). A flat correlation yields a zero shift with a warning.
pub fn init_translations(series: &FocusSeries) -> Result<Vec<[f64; 2]>> {
    series.validate()?;
    let spec = series.spec;
    let mut out = vec![[0.0, 0.0]; series.len()];
    for j in 1..series.len() {
        let prev = series.images[j - 1].to_complex(SpaceTag::Real);
        let cur = series.images[j].to_complex(SpaceTag::Real);
        let corr = xcorr_spectral(&prev, &cur)?;
        let mut best = (0usize, 0usize, f64::NEG_INFINITY);
        let mut worst = f64::INFINITY;
        for iy in 0..spec.n() {
            for ix in 0..spec.n() {
                let v = corr.at(ix, iy).re;
                worst = worst.min(v);
                if v > best.2 {
                    best = (ix, iy, v);
                }
            }
        }
        let rel = if best.2 - worst <= 1e-12 * best.2.abs().max(f64::MIN_POSITIVE) {
            log::warn!("flat correlation between images {} and {j}; assuming zero shift", j - 1);
            [0.0, 0.0]
        } else {
            [spec.coord(best.0), spec.coord(best.1)]
        };
        out[j] = [out[j - 1][0] + rel[0], out[j - 1][1] + rel[1]];
    }
    Ok(out)
}

/// Remove the global phase and modulation gauge from an estimate so it
/// can be compared against a reference: returns
/// `psi_est · e^{−ic} · μ_{−s}` with the shift taken from the
/// cross-correlation peak of the real-space waves (quadratically refined)
/// and the phase from `⟨psi_ref, psi_est·μ_{−s}⟩`.
pub fn gauge_align(psi_est: &ComplexField, psi_ref: &ComplexField) -> Result<ComplexField> {
    if psi_est.spec() != psi_ref.spec() || psi_est.tag() != SpaceTag::Fourier
        || psi_ref.tag() != SpaceTag::Fourier
    {
        return Err(Error::Mismatch("gauge alignment needs matching fourier-space fields".into()));
    }
    if l2_norm(psi_ref) == 0.0 {
        return Ok(psi_est.clone());
    }
    let spec = *psi_est.spec();
    let est_real = spectral_inverse(psi_est)?;
    let ref_real = spectral_inverse(psi_ref)?;
    let corr = xcorr_spectral(&ref_real, &est_real)?;
    let n = spec.n();
    let mut best = (0usize, 0usize, f64::NEG_INFINITY);
    for iy in 0..n {
        for ix in 0..n {
            let v = corr.at(ix, iy).norm();
            if v > best.2 {
                best = (ix, iy, v);
            }
        }
    }
    // Quadratic sub-pixel refinement per axis on the peak magnitude.
    let refine = |m: f64, c0: f64, p: f64| {
        let denom = m - 2.0 * c0 + p;
        if denom.abs() <= 1e-300 {
            0.0
        } else {
            ((m - p) / (2.0 * denom)).clamp(-0.5, 0.5)
        }
    };
    let (bx, by, _) = best;
    let mag = |ix: usize, iy: usize| corr.at(ix % n, iy % n).norm();
    let dx = refine(mag(bx + n - 1, by), mag(bx, by), mag(bx + 1, by));
    let dy = refine(mag(bx, by + n - 1), mag(bx, by), mag(bx, by + 1));
    let px = spec.pixel_size();
    // Peak at x ≈ −s.
    let s = [-(spec.coord(bx) + dx * px), -(spec.coord(by) + dy * px)];
    let unshifted = modulate(psi_est, [-s[0], -s[1]])?;
    let phase = inner_product(psi_ref, &unshifted)?.arg();
    Ok(unshifted.scale(Complex64::from_polar(1.0, -phase)))
}

/// Real-space wave errors after gauge alignment, restricted to the 2A
/// band: (sup, Euclidean, relative Euclidean).
pub fn wave_error(
    psi_est: &ComplexField,
    psi_truth: &ComplexField,
    band_2a: &RealField,
) -> Result<(f64, f64, f64)> {
    let est = psi_est.mul_real(band_2a)?;
    let truth = psi_truth.mul_real(band_2a)?;
    let aligned = gauge_align(&est, &truth)?;
    let diff = spectral_inverse(&aligned.sub(&truth)?)?;
    let sup = diff.sup_norm();
    let euc = l2_norm(&diff);
    let rel = euc / l2_norm(&spectral_inverse(&truth)?).max(f64::MIN_POSITIVE);
    Ok((sup, euc, rel))
}

struct Packed {
    wave: ComplexField,
    /// Translation block in units of the field extent.
    trans: Vec<[f64; 2]>,
}

fn packed_dot(a: &Packed, b: &Packed) -> f64 {
    let wave = inner_product(&a.wave, &b.wave).expect("packed fields share a grid").re;
    let trans: f64 = a
        .trans
        .iter()
        .zip(&b.trans)
        .map(|(x, y)| x[0] * y[0] + x[1] * y[1])
        .sum();
    wave + trans
}

/// Minimize with a self-built objective (`α` from the config, Ψ_M = 0).
pub fn minimize(
    vars0: ReconstructionVariables,
    series: &FocusSeries,
    kernels: Vec<FactorizedKernel>,
    cfg: &SolverConfig,
) -> Result<MinimizeOutcome> {
    let objective = Objective::new(series, kernels, RegularizerSpec::plain(cfg.alpha))?;
    minimize_objective(&objective, vars0, cfg, None)
}

/// Core solver loop. Ground truth, when given, only feeds the error
/// columns of the iteration log.
pub fn minimize_objective(
    obj: &Objective,
    vars0: ReconstructionVariables,
    cfg: &SolverConfig,
    truth: Option<&GroundTruth>,
) -> Result<MinimizeOutcome> {
    cfg.validate()?;
    let spec = *obj.spec();
    let extent = spec.extent_nm();
    let bound = cfg.translation_bound_nm.unwrap_or(extent / 2.0);
    let band_2a = match truth {
        Some(_) => Some(band_mask(&spec, 2.0 * obj.aperture_radius())?),
        None => None,
    };

    let mut psi = vars0.psi.mul_real(obj.aperture())?;
    let mut trans = vars0.translations_nm.clone();
    if trans.is_empty() {
        return Err(Error::InvalidArgument("no translations supplied".into()));
    }
    trans[0] = [0.0, 0.0];
    clamp_translations(&mut trans, bound);

    let vars = |psi: &ComplexField, trans: &[[f64; 2]]| ReconstructionVariables {
        psi: psi.clone(),
        translations_nm: trans.to_vec(),
    };

    let mut energy = obj.energy(&vars(&psi, &trans))?;
    let mut grad = packed_gradient(obj, &psi, &trans, extent, cfg.freeze_translations)?;
    let mut grad_norm2 = packed_dot(&grad, &grad);

    let mut records = Vec::with_capacity(cfg.max_iters + 1);
    records.push(make_record(0, &energy, 0.0, &grad, truth, band_2a.as_ref(), &psi, &trans, &spec)?);

    let mut direction = negate(&grad);
    let mut warm_step = cfg.armijo_initial_step;
    let mut stop = StopReason::MaxIters;

    for k in 1..=cfg.max_iters {
        let mut slope = packed_dot(&grad, &direction);
        if slope >= 0.0 {
            // Not a descent direction: restart with steepest descent.
            log::debug!("iteration {k}: non-descent direction, restarting");
            direction = negate(&grad);
            slope = -grad_norm2;
        }

        let mut attempt = line_search(obj, &psi, &trans, &direction, energy.total, slope, warm_step, cfg, extent)?;
        if attempt.is_none() && !is_steepest(&direction, &grad) {
            log::debug!("iteration {k}: line search failed, retrying along steepest descent");
            direction = negate(&grad);
            slope = -grad_norm2;
            attempt = line_search(obj, &psi, &trans, &direction, energy.total, slope, cfg.armijo_initial_step, cfg, extent)?;
        }
        let (step, cand_psi, cand_trans, cand_energy) = match attempt {
            Some(hit) => hit,
            None => {
                if slope.abs() < cfg.epsilon_stop {
                    // The predicted decrease is below the stopping
                    // threshold; nothing left to gain.
                    stop = StopReason::Converged;
                    break;
                }
                return Err(Error::Numerical(format!(
                    "line search failed at iteration {k} even along steepest descent \
                     (slope {slope:e}, energy {:e})",
                    energy.total
                )));
            }
        };

        let mut new_trans = cand_trans;
        new_trans[0] = [0.0, 0.0];
        let clamped = clamp_translations(&mut new_trans, bound);
        let new_energy = if clamped {
            let e = obj.energy(&vars(&cand_psi, &new_trans))?;
            if e.total > energy.total {
                stop = StopReason::BoundStall;
                break;
            }
            e
        } else {
            cand_energy
        };

        let decrease = energy.total - new_energy.total;
        psi = cand_psi;
        trans = new_trans;
        energy = new_energy;

        let new_grad = packed_gradient(obj, &psi, &trans, extent, cfg.freeze_translations)?;
        let new_norm2 = packed_dot(&new_grad, &new_grad);

        records.push(make_record(k, &energy, step, &new_grad, truth, band_2a.as_ref(), &psi, &trans, &spec)?);

        if decrease < cfg.epsilon_stop {
            stop = StopReason::Converged;
            break;
        }

        let beta = if clamped || k % cfg.restart_period == 0 || grad_norm2 == 0.0 {
            0.0 // periodic or projection-triggered restart
        } else {
            new_norm2 / grad_norm2
        };
        direction = Packed {
            wave: new_grad.wave.scale(Complex64::new(-1.0, 0.0)).scaled_add(beta, &direction.wave)?,
            trans: new_grad
                .trans
                .iter()
                .zip(&direction.trans)
                .map(|(g, d)| [-g[0] + beta * d[0], -g[1] + beta * d[1]])
                .collect(),
        };
        grad = new_grad;
        grad_norm2 = new_norm2;
        warm_step = step / cfg.armijo_backtrack;
    }

    Ok(MinimizeOutcome {
        vars: ReconstructionVariables {
            psi,
            translations_nm: trans,
        },
        records,
        stop,
    })
}

fn negate(p: &Packed) -> Packed {
    Packed {
        wave: p.wave.scale(Complex64::new(-1.0, 0.0)),
        trans: p.trans.iter().map(|t| [-t[0], -t[1]]).collect(),
    }
}

fn is_steepest(direction: &Packed, grad: &Packed) -> bool {
    let diff = direction
        .wave
        .add(&grad.wave)
        .map(|d| l2_norm(&d))
        .unwrap_or(f64::INFINITY);
    let tdiff: f64 = direction
        .trans
        .iter()
        .zip(&grad.trans)
        .map(|(d, g)| (d[0] + g[0]).abs() + (d[1] + g[1]).abs())
        .sum();
    diff == 0.0 && tdiff == 0.0
}

fn clamp_translations(trans: &mut [[f64; 2]], bound: f64) -> bool {
    let mut clamped = false;
    for t in trans.iter_mut() {
        let r = (t[0] * t[0] + t[1] * t[1]).sqrt();
        if r > bound {
            let scale = bound / r;
            t[0] *= scale;
            t[1] *= scale;
            clamped = true;
        }
    }
    clamped
}

fn packed_gradient(
    obj: &Objective,
    psi: &ComplexField,
    trans: &[[f64; 2]],
    extent: f64,
    freeze_translations: bool,
) -> Result<Packed> {
    let vars = ReconstructionVariables {
        psi: psi.clone(),
        translations_nm: trans.to_vec(),
    };
    let wave = obj.gradient_wave(&vars)?;
    let mut t = if freeze_translations {
        vec![[0.0, 0.0]; trans.len()]
    } else {
        obj.gradient_translation(&vars)?
            .iter()
            .map(|g| [g[0] * extent, g[1] * extent])
            .collect()
    };
    t[0] = [0.0, 0.0]; // gauge pin
    Ok(Packed { wave, trans: t })
}

type LineSearchHit = (f64, ComplexField, Vec<[f64; 2]>, EnergyBreakdown);

#[allow(clippy::too_many_arguments)]
fn line_search(
    obj: &Objective,
    psi: &ComplexField,
    trans: &[[f64; 2]],
    direction: &Packed,
    e0: f64,
    slope: f64,
    first_step: f64,
    cfg: &SolverConfig,
    extent: f64,
) -> Result<Option<LineSearchHit>> {
    let mut step = first_step;
    for _ in 0..60 {
        let cand_psi = psi.scaled_add(step, &direction.wave)?;
        let cand_trans: Vec<[f64; 2]> = trans
            .iter()
            .zip(&direction.trans)
            .map(|(t, d)| [t[0] + step * d[0] * extent, t[1] + step * d[1] * extent])
            .collect();
        let cand = obj.energy(&ReconstructionVariables {
            psi: cand_psi.clone(),
            translations_nm: cand_trans.clone(),
        })?;
        if cand.total <= e0 + cfg.armijo_sigma * step * slope {
            return Ok(Some((step, cand_psi, cand_trans, cand)));
        }
        step *= cfg.armijo_backtrack;
    }
    Ok(None)
}

#[allow(clippy::too_many_arguments)]
fn make_record(
    iteration: usize,
    energy: &EnergyBreakdown,
    step: f64,
    grad: &Packed,
    truth: Option<&GroundTruth>,
    band_2a: Option<&RealField>,
    psi: &ComplexField,
    trans: &[[f64; 2]],
    spec: &crate::field::GridSpec,
) -> Result<IterationRecord> {
    let mut rec = IterationRecord {
        iteration,
        energy: energy.clone(),
        step,
        grad_norm_wave: l2_norm(&grad.wave),
        grad_norm_trans: grad
            .trans
            .iter()
            .map(|t| t[0] * t[0] + t[1] * t[1])
            .sum::<f64>()
            .sqrt(),
        trans_err_sup_px: None,
        trans_err_euc_px: None,
        wave_err_sup: None,
        wave_err_euc: None,
    };
    if let Some(truth) = truth {
        let px = spec.pixel_size();
        let mut sup = 0.0f64;
        let mut euc2 = 0.0f64;
        for (est, tru) in trans.iter().zip(&truth.translations_nm) {
            let d = [est[0] - tru[0], est[1] - tru[1]];
            sup = sup.max(d[0].abs().max(d[1].abs()));
            euc2 += d[0] * d[0] + d[1] * d[1];
        }
        rec.trans_err_sup_px = Some(sup / px);
        rec.trans_err_euc_px = Some(euc2.sqrt() / px);
        if let Some(band) = band_2a {
            let (wsup, weuc, _) = wave_error(psi, &truth.wave, band)?;
            rec.wave_err_sup = Some(wsup);
            rec.wave_err_euc = Some(weuc);
        }
    }
    Ok(rec)
}

/// Render the iteration log as CSV (error columns blank without truth).
pub fn log_csv_string(records: &[IterationRecord]) -> String {
    let mut s = String::from(
        "iteration,total_energy,data_term,regularizer,step,grad_norm_wave,grad_norm_trans,\
         trans_err_sup_px,trans_err_euc_px,wave_err_sup,wave_err_euc\n",
    );
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in records {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.iteration,
            r.energy.total,
            r.energy.data_term,
            r.energy.regularizer,
            r.step,
            r.grad_norm_wave,
            r.grad_norm_trans,
            opt(r.trans_err_sup_px),
            opt(r.trans_err_euc_px),
            opt(r.wave_err_sup),
            opt(r.wave_err_euc),
        ));
    }
    s
}

pub fn write_log_csv(path: &Path, records: &[IterationRecord]) -> Result<()> {
    std::fs::write(path, log_csv_string(records))?;
    Ok(())
}
