//! Sampled 2-D fields with physical units and their spectral transforms.
//!
//! Fields live on a square grid of `n × n` samples covering a physical
//! square of side `extent_nm` (real space) or, equivalently, on the
//! centered frequency lattice `v_k = k / extent_nm` for
//! `k ∈ {−n/2, …, n/2−1}` (Fourier space). Storage is row-major with
//! centered indexing: index `i` maps to `k = i − n/2`, so the origin sits
//! at index `n/2` in both axes and `values[iy * n + ix]` is the sample at
//! `(x_ix, y_iy)`.
//!
//! The transform pair approximates the continuous Fourier transform with
//! kernel `e^{−2πi x·v}`: the forward transform carries a `pixel_size²`
//! factor and the inverse a `Δv²` factor, so the round trip is the
//! identity and the discrete Parseval identity holds exactly between the
//! `pixel_size²`-weighted real-space pairing and the `Δv²`-weighted
//! Fourier-space pairing. Boundary semantics are periodic throughout.

mod fft;
pub mod io;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Geometry of a sampled field: sample count per side and physical extent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    n: usize,
    extent_nm: f64,
}

impl GridSpec {
    /// A grid of `n × n` samples over `extent_nm × extent_nm` nm².
    ///
    /// `n` must be even (the centered lattice needs a sample at the
    /// origin); powers of two keep the FFT fast.
    pub fn new(n: usize, extent_nm: f64) -> Result<Self> {
        if n < 2 || n % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "sample count must be even and >= 2, got {n}"
            )));
        }
        if !(extent_nm > 0.0 && extent_nm.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "extent must be positive and finite, got {extent_nm}"
            )));
        }
        Ok(Self { n, extent_nm })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn extent_nm(&self) -> f64 {
        self.extent_nm
    }

    /// Real-space sample spacing in nm.
    pub fn pixel_size(&self) -> f64 {
        self.extent_nm / self.n as f64
    }

    /// Frequency lattice spacing Δv = 1/L in nm⁻¹.
    pub fn freq_step(&self) -> f64 {
        1.0 / self.extent_nm
    }

    /// Highest representable frequency n/2 · Δv in nm⁻¹.
    pub fn nyquist(&self) -> f64 {
        self.n as f64 / 2.0 * self.freq_step()
    }

    /// Real-space coordinate of index `i` (centered).
    pub fn coord(&self, i: usize) -> f64 {
        (i as f64 - self.n as f64 / 2.0) * self.pixel_size()
    }

    /// Frequency of index `i` (centered).
    pub fn freq(&self, i: usize) -> f64 {
        (i as f64 - self.n as f64 / 2.0) * self.freq_step()
    }

    /// Number of samples.
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Flat index of `(ix, iy)`.
    pub fn idx(&self, ix: usize, iy: usize) -> usize {
        iy * self.n + ix
    }

    /// Centered lattice sum of two indices with periodic wrap-around,
    /// i.e. the index of `v_a + v_b` reduced to the lattice.
    pub fn wrap_add(&self, a: usize, b: usize) -> usize {
        (a + b + self.n / 2) % self.n
    }
}

/// Which lattice a complex field is sampled on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceTag {
    Real,
    Fourier,
}

impl SpaceTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            SpaceTag::Real => "real-space",
            SpaceTag::Fourier => "fourier-space",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "real-space" => Ok(SpaceTag::Real),
            "fourier-space" => Ok(SpaceTag::Fourier),
            other => Err(Error::InvalidArgument(format!("unknown space tag {other:?}"))),
        }
    }
}

/// Quadrature cell area of the lattice a field is sampled on.
pub fn cell_area(spec: &GridSpec, tag: SpaceTag) -> f64 {
    match tag {
        SpaceTag::Real => spec.pixel_size() * spec.pixel_size(),
        SpaceTag::Fourier => spec.freq_step() * spec.freq_step(),
    }
}

/// Complex-valued sampled field. Samples are finite by construction and
/// the space tag only changes through the spectral transform pair.
#[derive(Debug, Clone)]
pub struct ComplexField {
    spec: GridSpec,
    tag: SpaceTag,
    values: Vec<Complex64>,
}

/// Real-valued sampled field (images, masks).
#[derive(Debug, Clone)]
pub struct RealField {
    spec: GridSpec,
    values: Vec<f64>,
}

impl ComplexField {
    pub fn zeros(spec: GridSpec, tag: SpaceTag) -> Self {
        Self {
            spec,
            tag,
            values: vec![Complex64::new(0.0, 0.0); spec.len()],
        }
    }

    pub fn from_values(spec: GridSpec, tag: SpaceTag, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::Mismatch(format!(
                "expected {} samples, got {}",
                spec.len(),
                values.len()
            )));
        }
        let f = Self { spec, tag, values };
        f.check_finite()?;
        Ok(f)
    }

    pub fn from_fn(
        spec: GridSpec,
        tag: SpaceTag,
        mut f: impl FnMut(usize, usize) -> Complex64,
    ) -> Result<Self> {
        let n = spec.n();
        let mut values = Vec::with_capacity(spec.len());
        for iy in 0..n {
            for ix in 0..n {
                values.push(f(ix, iy));
            }
        }
        Self::from_values(spec, tag, values)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn tag(&self) -> SpaceTag {
        self.tag
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn at(&self, ix: usize, iy: usize) -> Complex64 {
        self.values[self.spec.idx(ix, iy)]
    }

    pub(crate) fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub(crate) fn check_finite(&self) -> Result<()> {
        for (i, v) in self.values.iter().enumerate() {
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(Error::NonFinite(format!(
                    "complex sample {i} = {v} is not finite"
                )));
            }
        }
        Ok(())
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.spec != other.spec || self.tag != other.tag {
            return Err(Error::Mismatch(format!(
                "fields disagree: {:?}/{:?} vs {:?}/{:?}",
                self.spec, self.tag, other.spec, other.tag
            )));
        }
        Ok(())
    }

    /// Elementwise product.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .collect();
        Ok(Self {
            spec: self.spec,
            tag: self.tag,
            values,
        })
    }

    /// Elementwise product with a real field on the same grid.
    pub fn mul_real(&self, other: &RealField) -> Result<Self> {
        if self.spec != other.spec {
            return Err(Error::Mismatch("real factor on a different grid".into()));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .collect();
        Ok(Self {
            spec: self.spec,
            tag: self.tag,
            values,
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Self {
            spec: self.spec,
            tag: self.tag,
            values,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Self {
            spec: self.spec,
            tag: self.tag,
            values,
        })
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            spec: self.spec,
            tag: self.tag,
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    pub fn conj(&self) -> Self {
        Self {
            spec: self.spec,
            tag: self.tag,
            values: self.values.iter().map(|v| v.conj()).collect(),
        }
    }

    /// `self + c · other`.
    pub fn scaled_add(&self, c: f64, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + c * b)
            .collect();
        Ok(Self {
            spec: self.spec,
            tag: self.tag,
            values,
        })
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

impl RealField {
    pub fn zeros(spec: GridSpec) -> Self {
        Self {
            spec,
            values: vec![0.0; spec.len()],
        }
    }

    pub fn from_values(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::Mismatch(format!(
                "expected {} samples, got {}",
                spec.len(),
                values.len()
            )));
        }
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("real sample {i} = {v} is not finite")));
            }
        }
        Ok(Self { spec, values })
    }

    pub fn from_fn(spec: GridSpec, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let n = spec.n();
        let mut values = Vec::with_capacity(spec.len());
        for iy in 0..n {
            for ix in 0..n {
                values.push(f(ix, iy));
            }
        }
        Self::from_values(spec, values)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.values[self.spec.idx(ix, iy)]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Promote to a complex field with the given tag.
    pub fn to_complex(&self, tag: SpaceTag) -> ComplexField {
        ComplexField {
            spec: self.spec,
            tag,
            values: self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }
}

/// Forward transform (real space -> Fourier space), scaled by `pixel_size²`.
pub fn spectral_transform(f: &ComplexField) -> Result<ComplexField> {
    if f.tag != SpaceTag::Real {
        return Err(Error::Mismatch(
            "spectral_transform expects a real-space field".into(),
        ));
    }
    f.check_finite()?;
    let mut values = f.values.clone();
    fft::centered_fft2(&mut values, f.spec.n(), false);
    let scale = f.spec.pixel_size() * f.spec.pixel_size();
    for v in &mut values {
        *v *= scale;
    }
    Ok(ComplexField {
        spec: f.spec,
        tag: SpaceTag::Fourier,
        values,
    })
}

/// Inverse transform (Fourier space -> real space), scaled by `Δv²`.
pub fn spectral_inverse(f: &ComplexField) -> Result<ComplexField> {
    if f.tag != SpaceTag::Fourier {
        return Err(Error::Mismatch(
            "spectral_inverse expects a fourier-space field".into(),
        ));
    }
    f.check_finite()?;
    let mut values = f.values.clone();
    fft::centered_fft2(&mut values, f.spec.n(), true);
    let scale = f.spec.freq_step() * f.spec.freq_step();
    for v in &mut values {
        *v *= scale;
    }
    Ok(ComplexField {
        spec: f.spec,
        tag: SpaceTag::Real,
        values,
    })
}

/// Multiply a Fourier-space field by the modulation `e^{2πi v·shift}`,
/// which translates the real-space counterpart by `shift` (sub-pixel exact).
pub fn modulate(f: &ComplexField, shift_nm: [f64; 2]) -> Result<ComplexField> {
    if f.tag != SpaceTag::Fourier {
        return Err(Error::Mismatch("modulate expects a fourier-space field".into()));
    }
    let n = f.spec.n();
    let phase_x: Vec<Complex64> = (0..n)
        .map(|i| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * f.spec.freq(i) * shift_nm[0]))
        .collect();
    let phase_y: Vec<Complex64> = (0..n)
        .map(|i| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * f.spec.freq(i) * shift_nm[1]))
        .collect();
    let mut values = Vec::with_capacity(f.values.len());
    for iy in 0..n {
        let py = phase_y[iy];
        for ix in 0..n {
            values.push(f.values[f.spec.idx(ix, iy)] * phase_x[ix] * py);
        }
    }
    Ok(ComplexField {
        spec: f.spec,
        tag: f.tag,
        values,
    })
}

/// Discrete L² pairing, conjugate-linear in the first argument, weighted
/// by the cell area of the common lattice.
pub fn inner_product(f: &ComplexField, g: &ComplexField) -> Result<Complex64> {
    f.check_compatible(g)?;
    let mut acc = Complex64::new(0.0, 0.0);
    for (a, b) in f.values.iter().zip(&g.values) {
        acc += a.conj() * b;
    }
    Ok(acc * cell_area(&f.spec, f.tag))
}

/// L² norm induced by [`inner_product`].
pub fn l2_norm(f: &ComplexField) -> f64 {
    let cell = cell_area(&f.spec, f.tag);
    let s: f64 = f.values.iter().map(|v| v.norm_sqr()).sum();
    (s * cell).sqrt()
}

pub fn l2_norm_real(f: &RealField) -> f64 {
    let cell = f.spec.pixel_size() * f.spec.pixel_size();
    let s: f64 = f.values.iter().map(|v| v * v).sum();
    (s * cell).sqrt()
}

/// Hard low-pass indicator on the frequency lattice: 1 iff `|v| < radius`.
///
/// Radii at or beyond Nyquist are allowed (the mask saturates) but logged.
pub fn band_mask(spec: &GridSpec, radius: f64) -> Result<RealField> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "band mask radius must be positive, got {radius}"
        )));
    }
    if radius >= spec.nyquist() {
        log::warn!(
            "band mask radius {radius} nm^-1 is at or beyond Nyquist {} nm^-1; mask saturates",
            spec.nyquist()
        );
    }
    RealField::from_fn(*spec, |ix, iy| {
        let v = (spec.freq(ix).powi(2) + spec.freq(iy).powi(2)).sqrt();
        if v < radius {
            1.0
        } else {
            0.0
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_field(spec: GridSpec, tag: SpaceTag, seed: u64) -> ComplexField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ComplexField::from_fn(spec, tag, |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        })
        .unwrap()
    }

    #[test]
    fn constant_transforms_to_delta() {
        let spec = GridSpec::new(16, 2.0).unwrap();
        let c = Complex64::new(0.7, -0.2);
        let f = ComplexField::from_fn(spec, SpaceTag::Real, |_, _| c).unwrap();
        let g = spectral_transform(&f).unwrap();
        let l2 = spec.extent_nm() * spec.extent_nm();
        for iy in 0..16 {
            for ix in 0..16 {
                let expect = if ix == 8 && iy == 8 { c * l2 } else { Complex64::new(0.0, 0.0) };
                assert!((g.at(ix, iy) - expect).norm() < 1e-12 * l2);
            }
        }
    }

    #[test]
    fn round_trip_is_identity() {
        for (n, seed) in [(8usize, 1u64), (32, 2), (64, 3), (256, 4)] {
            let spec = GridSpec::new(n, 3.2).unwrap();
            let f = random_field(spec, SpaceTag::Real, seed);
            let back = spectral_inverse(&spectral_transform(&f).unwrap()).unwrap();
            let scale = f.sup_norm();
            let err = f
                .values()
                .iter()
                .zip(back.values())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(err <= 1e-12 * scale, "n={n}: round trip error {err:e}");
        }
    }

    #[test]
    fn gaussian_matches_continuous_transform() {
        // exp(-pi |x|^2) is its own continuous transform under this kernel.
        let spec = GridSpec::new(64, 8.0).unwrap();
        let f = ComplexField::from_fn(spec, SpaceTag::Real, |ix, iy| {
            let r2 = spec.coord(ix).powi(2) + spec.coord(iy).powi(2);
            Complex64::new((-std::f64::consts::PI * r2).exp(), 0.0)
        })
        .unwrap();
        let g = spectral_transform(&f).unwrap();
        let mut worst = 0.0f64;
        for iy in 0..64 {
            for ix in 0..64 {
                let v2 = spec.freq(ix).powi(2) + spec.freq(iy).powi(2);
                let expect = (-std::f64::consts::PI * v2).exp();
                worst = worst.max((g.at(ix, iy) - expect).norm());
            }
        }
        assert!(worst < 1e-6, "worst deviation {worst:e}");
    }

    #[test]
    fn modulation_by_zero_is_identity() {
        let spec = GridSpec::new(16, 1.0).unwrap();
        let f = random_field(spec, SpaceTag::Fourier, 5);
        let g = modulate(&f, [0.0, 0.0]).unwrap();
        for (a, b) in f.values().iter().zip(g.values()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn integer_pixel_modulation_is_a_circular_shift() {
        let spec = GridSpec::new(16, 4.0).unwrap();
        let h = spec.pixel_size();
        let g = random_field(spec, SpaceTag::Real, 6);
        let (px, py) = (3usize, 11usize);
        let shifted = spectral_inverse(
            &modulate(&spectral_transform(&g).unwrap(), [px as f64 * h, py as f64 * h]).unwrap(),
        )
        .unwrap();
        let scale = g.sup_norm();
        for iy in 0..16 {
            for ix in 0..16 {
                // out(x) = g(x + s) with periodic indexing
                let expect = g.at((ix + px) % 16, (iy + py) % 16);
                assert!((shifted.at(ix, iy) - expect).norm() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn modulation_group_inverse() {
        let spec = GridSpec::new(32, 2.5).unwrap();
        let f = random_field(spec, SpaceTag::Fourier, 7);
        let s = [0.381, -0.777];
        let g = modulate(&modulate(&f, s).unwrap(), [-s[0], -s[1]]).unwrap();
        let scale = f.sup_norm();
        for (a, b) in f.values().iter().zip(g.values()) {
            assert!((a - b).norm() <= 1e-14 * scale);
        }
    }

    #[test]
    fn parseval_holds() {
        let spec = GridSpec::new(64, 3.2).unwrap();
        let f = random_field(spec, SpaceTag::Real, 8);
        let g = random_field(spec, SpaceTag::Real, 9);
        let real = inner_product(&f, &g).unwrap();
        let four =
            inner_product(&spectral_transform(&f).unwrap(), &spectral_transform(&g).unwrap())
                .unwrap();
        let bound = 1e-10 * l2_norm(&f) * l2_norm(&g);
        assert!((real - four).norm() <= bound, "parseval gap {:e}", (real - four).norm());
    }

    #[test]
    fn parseval_against_double_sum_oracle() {
        // Independent oracle: evaluate the Fourier pairing by direct DFT sums.
        let spec = GridSpec::new(8, 1.6).unwrap();
        let f = random_field(spec, SpaceTag::Real, 10);
        let g = random_field(spec, SpaceTag::Real, 11);
        let n = spec.n();
        let h2 = spec.pixel_size() * spec.pixel_size();
        let dv2 = spec.freq_step() * spec.freq_step();
        let dft = |field: &ComplexField, kx: usize, ky: usize| {
            let mut acc = Complex64::new(0.0, 0.0);
            for iy in 0..n {
                for ix in 0..n {
                    let phase = -2.0
                        * std::f64::consts::PI
                        * (spec.freq(kx) * spec.coord(ix) + spec.freq(ky) * spec.coord(iy));
                    acc += field.at(ix, iy) * Complex64::from_polar(1.0, phase);
                }
            }
            acc * h2
        };
        let mut four = Complex64::new(0.0, 0.0);
        for ky in 0..n {
            for kx in 0..n {
                four += dft(&f, kx, ky).conj() * dft(&g, kx, ky);
            }
        }
        four *= dv2;
        let real = inner_product(&f, &g).unwrap();
        assert!((real - four).norm() <= 1e-10 * l2_norm(&f) * l2_norm(&g));
    }

    #[test]
    fn inner_product_axioms() {
        let spec = GridSpec::new(16, 1.0).unwrap();
        let f = random_field(spec, SpaceTag::Fourier, 12);
        let z = ComplexField::zeros(spec, SpaceTag::Fourier);
        let ff = inner_product(&f, &f).unwrap();
        assert!(ff.im.abs() <= 1e-15 * ff.re);
        assert!(ff.re >= 0.0);
        assert!((ff.re - l2_norm(&f).powi(2)).abs() <= 1e-12 * ff.re);
        assert_eq!(inner_product(&f, &z).unwrap(), Complex64::new(0.0, 0.0));
        // conjugate-linear in the first argument
        let c = Complex64::new(0.3, 1.1);
        let g = random_field(spec, SpaceTag::Fourier, 13);
        let lhs = inner_product(&f.scale(c), &g).unwrap();
        let rhs = c.conj() * inner_product(&f, &g).unwrap();
        assert!((lhs - rhs).norm() <= 1e-12 * rhs.norm());
    }

    #[test]
    fn mismatched_specs_are_rejected() {
        let a = ComplexField::zeros(GridSpec::new(8, 1.0).unwrap(), SpaceTag::Real);
        let b = ComplexField::zeros(GridSpec::new(8, 2.0).unwrap(), SpaceTag::Real);
        assert!(inner_product(&a, &b).is_err());
        let c = ComplexField::zeros(GridSpec::new(8, 1.0).unwrap(), SpaceTag::Fourier);
        assert!(inner_product(&a, &c).is_err());
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let spec = GridSpec::new(8, 1.0).unwrap();
        let mut vals = vec![Complex64::new(0.0, 0.0); spec.len()];
        vals[3] = Complex64::new(f64::NAN, 0.0);
        assert!(ComplexField::from_values(spec, SpaceTag::Real, vals).is_err());
    }

    #[test]
    fn band_mask_values_and_idempotence() {
        // Paper-scale constants: aperture radius and 2A band on the 1024-sample grid.
        let r_a: f64 = 0.125 / 0.00196875;
        assert!((r_a - 63.4921).abs() < 1e-3);
        let spec = GridSpec::new(1024, 3.2).unwrap();
        assert!((spec.freq_step() - 0.3125).abs() < 1e-15);
        assert!(2.0 * r_a < spec.nyquist());
        assert!((spec.nyquist() - 160.0).abs() < 1e-12);

        let small = GridSpec::new(32, 0.1008).unwrap();
        let mask = band_mask(&small, r_a).unwrap();
        assert_eq!(mask.at(16, 16), 1.0); // v = 0 is always inside
        for (i, &m) in mask.values().iter().enumerate() {
            assert!(m == 0.0 || m == 1.0);
            assert_eq!(m * m, m, "idempotent at {i}");
        }
    }

    #[test]
    fn grid_rejects_odd_or_degenerate() {
        assert!(GridSpec::new(7, 1.0).is_err());
        assert!(GridSpec::new(0, 1.0).is_err());
        assert!(GridSpec::new(8, 0.0).is_err());
        assert!(GridSpec::new(8, -1.0).is_err());
    }
}
