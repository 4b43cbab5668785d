//! Transmission cross-coefficients.
//!
//! The pupil function `t_Z(v) = p_Z(v) a(v)` combines the unit-modulus
//! aberration factor `p_Z(v) = exp(−2πi χ_Z(v))` with the hard objective
//! aperture `a`. The wave aberration keeps the two dominant isotropic
//! terms,
//!
//! ```text
//! χ_Z(v) = ½ Z λ |v|² + ¼ C_s λ³ |v|⁴ ,
//! ```
//!
//! with focus `Z` and spherical aberration `C_s` in nm and frequencies in
//! nm⁻¹. Partial coherence enters through damping envelopes: the product
//! form
//!
//! ```text
//! T_Z(v, w) = p_Z(v) conj(p_Z(w)) a(v) a(w) E_s(v, w) E_t(v, w)
//! ```
//!
//! is evaluated pointwise by [`tcc_ishizuka_eval`]. The production
//! kernel [`build_factorized_kernel`] expresses the temporal envelope as
//! a quadrature over the Gaussian focus-spread density, yielding factor
//! fields `t_j(v) = √q_j · a(v) · E_s(v,0) · exp(−2πi χ_{Z+z_j}(v))`
//! whose sum of rank-1 products reconstructs the kernel; the spatial
//! envelope is folded in through its rank-1 approximation
//! `E_s(v,w) ≈ E_s(v,0) conj(E_s(w,0))`. A slow Riemann-sum evaluator of
//! the double integral over both coherence densities serves as an
//! independent oracle at tiny node counts.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{band_mask, io as field_io, ComplexField, GridSpec, RealField, SpaceTag};
use crate::wcc::FactorList;

/// Microscope constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpticalParams {
    /// Electron wavelength λ in nm.
    pub lambda_nm: f64,
    /// Spherical aberration C_s in nm (signed).
    pub cs_nm: f64,
    /// Objective aperture semiangle in rad.
    pub alpha_max_rad: f64,
    /// Focus spread Δ in nm (0 = temporally coherent).
    pub delta_nm: f64,
    /// Beam convergence semi-angle in rad (0 = spatially coherent).
    pub alpha_conv_rad: f64,
}

impl OpticalParams {
    /// Fully coherent setup with the given lens constants.
    pub fn coherent(lambda_nm: f64, cs_nm: f64, alpha_max_rad: f64) -> Self {
        Self {
            lambda_nm,
            cs_nm,
            alpha_max_rad,
            delta_nm: 0.0,
            alpha_conv_rad: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_nm > 0.0 && self.lambda_nm.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "wavelength must be positive, got {}",
                self.lambda_nm
            )));
        }
        if !self.cs_nm.is_finite() {
            return Err(Error::InvalidArgument("spherical aberration must be finite".into()));
        }
        if !(self.alpha_max_rad > 0.0 && self.alpha_max_rad.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "aperture semiangle must be positive, got {}",
                self.alpha_max_rad
            )));
        }
        if !(self.delta_nm >= 0.0 && self.delta_nm.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "focus spread must be nonnegative, got {}",
                self.delta_nm
            )));
        }
        if !(self.alpha_conv_rad >= 0.0 && self.alpha_conv_rad.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "beam convergence must be nonnegative, got {}",
                self.alpha_conv_rad
            )));
        }
        Ok(())
    }

    /// Aperture radius r_a = α_max / λ in nm⁻¹.
    pub fn aperture_radius(&self) -> f64 {
        self.alpha_max_rad / self.lambda_nm
    }

    /// Hard aperture indicator on frequencies ([`band_mask`] of radius r_a).
    pub fn aperture_mask(&self, spec: &GridSpec) -> Result<RealField> {
        band_mask(spec, self.aperture_radius())
    }
}

fn norm_sqr(v: [f64; 2]) -> f64 {
    v[0] * v[0] + v[1] * v[1]
}

/// Wave aberration χ_Z(v) in cycles.
pub fn chi(v: [f64; 2], focus_nm: f64, p: &OpticalParams) -> f64 {
    let v2 = norm_sqr(v);
    0.5 * focus_nm * p.lambda_nm * v2 + 0.25 * p.cs_nm * p.lambda_nm.powi(3) * v2 * v2
}

/// Analytic gradient ∇χ_Z(v) = (Zλ + C_s λ³ |v|²) · v.
pub fn chi_gradient(v: [f64; 2], focus_nm: f64, p: &OpticalParams) -> [f64; 2] {
    let s = focus_nm * p.lambda_nm + p.cs_nm * p.lambda_nm.powi(3) * norm_sqr(v);
    [s * v[0], s * v[1]]
}

/// Pure phase transfer p_Z(v) = exp(−2πi χ_Z(v)); unit modulus.
pub fn pupil(v: [f64; 2], focus_nm: f64, p: &OpticalParams) -> Complex64 {
    Complex64::from_polar(1.0, -2.0 * PI * chi(v, focus_nm, p))
}

/// Aperture indicator a(v): 1 iff λ|v| < α_max.
pub fn aperture(v: [f64; 2], p: &OpticalParams) -> f64 {
    if p.lambda_nm * norm_sqr(v).sqrt() < p.alpha_max_rad {
        1.0
    } else {
        0.0
    }
}

/// Spatial coherence envelope
/// E_s(v,w) = exp(−(π α/λ)² |∇χ_Z(v) − ∇χ_Z(w)|²).
pub fn env_spatial(v: [f64; 2], w: [f64; 2], focus_nm: f64, p: &OpticalParams) -> f64 {
    if p.alpha_conv_rad == 0.0 {
        return 1.0;
    }
    let gv = chi_gradient(v, focus_nm, p);
    let gw = chi_gradient(w, focus_nm, p);
    let d = [gv[0] - gw[0], gv[1] - gw[1]];
    (-(PI * p.alpha_conv_rad / p.lambda_nm).powi(2) * norm_sqr(d)).exp()
}

/// Temporal coherence envelope
/// E_t(v,w) = exp(−½ (π Δ λ)² (|v|² − |w|²)²).
pub fn env_temporal(v: [f64; 2], w: [f64; 2], p: &OpticalParams) -> f64 {
    if p.delta_nm == 0.0 {
        return 1.0;
    }
    let d = norm_sqr(v) - norm_sqr(w);
    (-0.5 * (PI * p.delta_nm * p.lambda_nm).powi(2) * d * d).exp()
}

/// Pointwise product-form TCC with both damping envelopes.
pub fn tcc_ishizuka_eval(v: [f64; 2], w: [f64; 2], focus_nm: f64, p: &OpticalParams) -> Complex64 {
    let gate = aperture(v, p) * aperture(w, p);
    if gate == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    pupil(v, focus_nm, p)
        * pupil(w, focus_nm, p).conj()
        * gate
        * env_spatial(v, w, focus_nm, p)
        * env_temporal(v, w, p)
}

/// Product-form TCC with the rank-1 spatial envelope
/// E_s(v,w) ≈ E_s(v,0)·E_s(w,0) substituted. This is the function the
/// factorized kernel converges to as the focal quadrature refines.
pub fn tcc_ishizuka_rank1_eval(
    v: [f64; 2],
    w: [f64; 2],
    focus_nm: f64,
    p: &OpticalParams,
) -> Complex64 {
    let gate = aperture(v, p) * aperture(w, p);
    if gate == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let zero = [0.0, 0.0];
    pupil(v, focus_nm, p)
        * pupil(w, focus_nm, p).conj()
        * gate
        * env_spatial(v, zero, focus_nm, p)
        * env_spatial(w, zero, focus_nm, p)
        * env_temporal(v, w, p)
}

/// Factorized kernel for one focus value: aperture-masked factor fields
/// `t_j` with `T(v, w) ≈ Σ_j t_j(v) conj(t_j(w))`.
pub struct FactorizedKernel {
    focus_nm: f64,
    factors: FactorList,
    nodes_nm: Vec<f64>,
    weights: Vec<f64>,
}

impl FactorizedKernel {
    pub fn focus_nm(&self) -> f64 {
        self.focus_nm
    }

    pub fn factors(&self) -> &FactorList {
        &self.factors
    }

    pub fn node_count(&self) -> usize {
        self.nodes_nm.len()
    }

    pub fn nodes_nm(&self) -> &[f64] {
        &self.nodes_nm
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn spec(&self) -> &GridSpec {
        self.factors.spec().expect("kernel has at least one factor")
    }

    /// Reconstructed TCC value at a pair of flat lattice indices.
    pub fn reconstruct(&self, a: usize, b: usize) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for f in self.factors.factors() {
            acc += f.values()[a] * f.values()[b].conj();
        }
        acc
    }

    /// Debug dump: one field file per factor plus a manifest listing the
    /// quadrature nodes and weights.
    pub fn dump(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut manifest = format!(
            "focus_nm = {}\nnode_count = {}\n",
            self.focus_nm,
            self.node_count()
        );
        for (j, (node, weight)) in self.nodes_nm.iter().zip(&self.weights).enumerate() {
            manifest.push_str(&format!("node_{j} = {node}\nweight_{j} = {weight}\n"));
        }
        std::fs::write(dir.join("kernel_manifest.txt"), manifest)?;
        for (j, f) in self.factors.factors().iter().enumerate() {
            field_io::write_complex(&dir.join(format!("factor_{j:03}")), f)?;
        }
        Ok(())
    }
}

/// Build the production kernel for one focus value.
///
/// The focus-spread density is a Gaussian of width Δ; it is sampled at
/// `n_focal` equispaced nodes on `[−4Δ, 4Δ]` with weights proportional to
/// the density, renormalized to sum to one, so every weight stays
/// nonnegative under the square root. With Δ = 0 the kernel degenerates
/// to the single coherent factor `t_Z = a · p_Z` regardless of `n_focal`.
pub fn build_factorized_kernel(
    spec: &GridSpec,
    focus_nm: f64,
    p: &OpticalParams,
    n_focal: usize,
) -> Result<FactorizedKernel> {
    p.validate()?;
    if n_focal < 1 || n_focal % 2 == 0 {
        return Err(Error::InvalidArgument(format!(
            "focal node count must be odd and >= 1, got {n_focal}"
        )));
    }
    let mask = p.aperture_mask(spec)?;

    let (nodes, weights): (Vec<f64>, Vec<f64>) = if p.delta_nm == 0.0 || n_focal == 1 {
        (vec![0.0], vec![1.0])
    } else {
        let span = 4.0 * p.delta_nm;
        let step = 2.0 * span / (n_focal - 1) as f64;
        let nodes: Vec<f64> = (0..n_focal).map(|j| -span + j as f64 * step).collect();
        let raw: Vec<f64> = nodes
            .iter()
            .map(|z| (-z * z / (2.0 * p.delta_nm * p.delta_nm)).exp())
            .collect();
        let total: f64 = raw.iter().sum();
        (nodes, raw.iter().map(|w| w / total).collect())
    };

    let mut factors = Vec::with_capacity(nodes.len());
    for (&z, &q) in nodes.iter().zip(&weights) {
        let amp = q.sqrt();
        let factor = ComplexField::from_fn(*spec, SpaceTag::Fourier, |ix, iy| {
            let m = mask.at(ix, iy);
            if m == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            let v = [spec.freq(ix), spec.freq(iy)];
            let es = env_spatial(v, [0.0, 0.0], focus_nm, p);
            pupil(v, focus_nm + z, p) * (amp * es)
        })?;
        factors.push(factor);
    }

    Ok(FactorizedKernel {
        focus_nm,
        factors: FactorList::new(factors)?,
        nodes_nm: nodes,
        weights,
    })
}

/// Largest half-width the Riemann-sum oracle accepts; the cost grows as
/// (2M+1)³.
pub const ORACLE_MAX_M: usize = 8;

/// Riemann-sum evaluation of the double coherence integral
///
/// ```text
/// T_Z(v,w) = a(v) a(w) ∬ s(u) f(Z') p_{Z+Z'}(v+u) conj(p_{Z+Z'}(w+u)) du dZ'
/// ```
///
/// with isotropic Gaussian densities of widths `s_width_invnm` (source,
/// 2-D) and `f_width_nm` (focus spread, 1-D), sampled on (2M+1)³ tensor
/// nodes covering ±4 standard deviations in each variable. Nonnegative
/// node weights `δ_f δ_s² s(u) f(Z')` sum to approximately one.
pub fn tcc_general_oracle(
    v: [f64; 2],
    w: [f64; 2],
    focus_nm: f64,
    p: &OpticalParams,
    m: usize,
    s_width_invnm: f64,
    f_width_nm: f64,
) -> Result<Complex64> {
    if m > ORACLE_MAX_M {
        return Err(Error::InvalidArgument(format!(
            "riemann oracle limited to M <= {ORACLE_MAX_M}, got {m}"
        )));
    }
    Ok(riemann_tcc(v, w, focus_nm, p, m, s_width_invnm, f_width_nm))
}

/// Uncapped Riemann sum; crate-internal so probes can build a finer
/// reference than the public oracle allows.
pub(crate) fn riemann_tcc(
    v: [f64; 2],
    w: [f64; 2],
    focus_nm: f64,
    p: &OpticalParams,
    m: usize,
    s_width_invnm: f64,
    f_width_nm: f64,
) -> Complex64 {
    let gate = aperture(v, p) * aperture(w, p);
    if gate == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let mm = m as i64;
    let delta_s = 4.0 * s_width_invnm / m as f64;
    let delta_f = 4.0 * f_width_nm / m as f64;
    let s_density = |u: [f64; 2]| {
        (-norm_sqr(u) / (2.0 * s_width_invnm * s_width_invnm)).exp()
            / (2.0 * PI * s_width_invnm * s_width_invnm)
    };
    let f_density = |z: f64| {
        (-z * z / (2.0 * f_width_nm * f_width_nm)).exp()
            / ((2.0 * PI).sqrt() * f_width_nm)
    };
    let mut acc = Complex64::new(0.0, 0.0);
    for alpha in -mm..=mm {
        let zp = alpha as f64 * delta_f;
        let fz = f_density(zp);
        for beta in -mm..=mm {
            for gamma in -mm..=mm {
                let u = [beta as f64 * delta_s, gamma as f64 * delta_s];
                let weight = delta_f * delta_s * delta_s * s_density(u) * fz;
                let pv = pupil([v[0] + u[0], v[1] + u[1]], focus_nm + zp, p);
                let pw = pupil([w[0] + u[0], w[1] + u[1]], focus_nm + zp, p);
                acc += weight * pv * pw.conj();
            }
        }
    }
    acc * gate
}

/// Total quadrature weight of the Riemann oracle (bounds |T|).
pub fn riemann_weight_sum(m: usize, s_width_invnm: f64, f_width_nm: f64) -> f64 {
    let mm = m as i64;
    let delta_s = 4.0 * s_width_invnm / m as f64;
    let delta_f = 4.0 * f_width_nm / m as f64;
    let mut total = 0.0;
    for alpha in -mm..=mm {
        let zp = alpha as f64 * delta_f;
        let fz = (-zp * zp / (2.0 * f_width_nm * f_width_nm)).exp()
            / ((2.0 * PI).sqrt() * f_width_nm);
        for beta in -mm..=mm {
            for gamma in -mm..=mm {
                let u2 = (beta * beta + gamma * gamma) as f64 * delta_s * delta_s;
                let su = (-u2 / (2.0 * s_width_invnm * s_width_invnm)).exp()
                    / (2.0 * PI * s_width_invnm * s_width_invnm);
                total += delta_f * delta_s * delta_s * su * fz;
            }
        }
    }
    total
}

/// The Riemann oracle's factor fields on a grid, one per tensor node.
pub fn riemann_factor_list(
    spec: &GridSpec,
    focus_nm: f64,
    p: &OpticalParams,
    m: usize,
    s_width_invnm: f64,
    f_width_nm: f64,
) -> Result<FactorList> {
    if m > ORACLE_MAX_M {
        return Err(Error::InvalidArgument(format!(
            "riemann oracle limited to M <= {ORACLE_MAX_M}, got {m}"
        )));
    }
    let mask = p.aperture_mask(spec)?;
    let mm = m as i64;
    let delta_s = 4.0 * s_width_invnm / m as f64;
    let delta_f = 4.0 * f_width_nm / m as f64;
    let mut factors = Vec::new();
    for alpha in -mm..=mm {
        let zp = alpha as f64 * delta_f;
        let fz = (-zp * zp / (2.0 * f_width_nm * f_width_nm)).exp()
            / ((2.0 * PI).sqrt() * f_width_nm);
        for beta in -mm..=mm {
            for gamma in -mm..=mm {
                let u = [beta as f64 * delta_s, gamma as f64 * delta_s];
                let su = (-norm_sqr(u) / (2.0 * s_width_invnm * s_width_invnm)).exp()
                    / (2.0 * PI * s_width_invnm * s_width_invnm);
                let amp = (delta_f * delta_s * delta_s * su * fz).sqrt();
                let factor = ComplexField::from_fn(*spec, SpaceTag::Fourier, |ix, iy| {
                    let gate = mask.at(ix, iy);
                    if gate == 0.0 {
                        return Complex64::new(0.0, 0.0);
                    }
                    let v = [spec.freq(ix) + u[0], spec.freq(iy) + u[1]];
                    pupil(v, focus_nm + zp, p) * amp
                })?;
                factors.push(factor);
            }
        }
    }
    FactorList::new(factors)
}
