//! Weighted cross-correlations.
//!
//! The weighted cross-correlation of two fields on a periodic lattice is
//!
//! ```text
//! (f ⋆_w g)(x) = Σ_y conj(f(y)) · g(x + y) · w(x + y, y) · cell
//! ```
//!
//! with `x + y` wrapped back onto the centered lattice and `cell` the
//! quadrature area of the lattice the fields live on. Three evaluators
//! are provided:
//!
//! - [`wcc_direct`]: the quadratic-time double sum against an explicit
//!   weight table. Deliberately restricted to tiny grids; it is the
//!   oracle the fast paths are tested against.
//! - [`xcorr_spectral`]: the ordinary correlation (`w ≡ 1`) through the
//!   convolution theorem.
//! - [`wcc_factorized`]: the fast path for weights of the form
//!   `w(x, y) = Σ_j v_j(x) conj(v_j(y))`, evaluated as a sum of ordinary
//!   correlations of the factor-multiplied fields.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{
    cell_area, spectral_inverse, spectral_transform, ComplexField, GridSpec, RealField, SpaceTag,
};

/// Largest grid side the dense weight table and direct evaluator accept.
pub const ORACLE_MAX_N: usize = 16;

/// Dense two-argument weight table over a tiny lattice.
///
/// Entries are indexed by flat lattice indices: `w(v_a, v_b)` sits at
/// `a * n² + b`. Only realized for grids up to [`ORACLE_MAX_N`] since the
/// table is O(n⁴).
pub struct WeightMatrix {
    spec: GridSpec,
    entries: Vec<Complex64>,
    hermitian: bool,
}

impl WeightMatrix {
    /// Build a table by evaluating `w` on all lattice frequency pairs.
    pub fn from_fn(spec: GridSpec, mut w: impl FnMut([f64; 2], [f64; 2]) -> Complex64) -> Result<Self> {
        if spec.n() > ORACLE_MAX_N {
            return Err(Error::InvalidArgument(format!(
                "weight table limited to n <= {ORACLE_MAX_N}, got {}",
                spec.n()
            )));
        }
        let n = spec.n();
        let len = spec.len();
        let mut entries = Vec::with_capacity(len * len);
        for ay in 0..n {
            for ax in 0..n {
                let va = [spec.freq(ax), spec.freq(ay)];
                for by in 0..n {
                    for bx in 0..n {
                        let vb = [spec.freq(bx), spec.freq(by)];
                        entries.push(w(va, vb));
                    }
                }
            }
        }
        for (i, v) in entries.iter().enumerate() {
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(Error::NonFinite(format!("weight entry {i} = {v} is not finite")));
            }
        }
        let mut table = Self {
            spec,
            entries,
            hermitian: false,
        };
        table.hermitian = table.check_hermitian(1e-12);
        Ok(table)
    }

    pub fn constant(spec: GridSpec, c: Complex64) -> Result<Self> {
        Self::from_fn(spec, |_, _| c)
    }

    /// Table of a factorized weight `w(x, y) = Σ_j v_j(x) conj(v_j(y))`.
    pub fn from_factors(factors: &FactorList) -> Result<Self> {
        let spec = *factors
            .spec()
            .ok_or_else(|| Error::InvalidArgument("factor list is empty".into()))?;
        if spec.n() > ORACLE_MAX_N {
            return Err(Error::InvalidArgument(format!(
                "weight table limited to n <= {ORACLE_MAX_N}, got {}",
                spec.n()
            )));
        }
        let len = spec.len();
        let mut entries = vec![Complex64::new(0.0, 0.0); len * len];
        for factor in factors.factors() {
            let vals = factor.values();
            for a in 0..len {
                for b in 0..len {
                    entries[a * len + b] += vals[a] * vals[b].conj();
                }
            }
        }
        let mut table = Self {
            spec,
            entries,
            hermitian: false,
        };
        table.hermitian = table.check_hermitian(1e-12);
        Ok(table)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    /// `w(v_a, v_b)` by flat lattice indices.
    pub fn at_flat(&self, a: usize, b: usize) -> Complex64 {
        self.entries[a * self.spec.len() + b]
    }

    pub fn sup(&self) -> f64 {
        self.entries.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Whether `conj(w(x, y)) = w(y, x)` held within `tol · sup|w|` at
    /// construction time.
    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    fn check_hermitian(&self, tol: f64) -> bool {
        let len = self.spec.len();
        let bound = tol * self.sup().max(f64::MIN_POSITIVE);
        for a in 0..len {
            for b in a..len {
                if (self.entries[a * len + b].conj() - self.entries[b * len + a]).norm() > bound {
                    return false;
                }
            }
        }
        true
    }
}

/// Factor fields `v_j` on the frequency lattice, representing the weight
/// `w(x, y) = Σ_j v_j(x) conj(v_j(y))`.
pub struct FactorList {
    factors: Vec<ComplexField>,
}

impl FactorList {
    /// All factors must share one grid and be Fourier-space fields.
    pub fn new(factors: Vec<ComplexField>) -> Result<Self> {
        for f in &factors {
            if f.tag() != SpaceTag::Fourier {
                return Err(Error::Mismatch("factors must be fourier-space fields".into()));
            }
        }
        if let Some(first) = factors.first() {
            let spec = *first.spec();
            for f in &factors[1..] {
                if *f.spec() != spec {
                    return Err(Error::Mismatch("factors sampled on different grids".into()));
                }
            }
        }
        Ok(Self { factors })
    }

    pub fn empty() -> Self {
        Self { factors: Vec::new() }
    }

    pub fn factors(&self) -> &[ComplexField] {
        &self.factors
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn spec(&self) -> Option<&GridSpec> {
        self.factors.first().map(|f| f.spec())
    }

    /// True when every factor vanishes wherever `mask` does.
    pub fn supported_inside(&self, mask: &RealField) -> bool {
        self.factors.iter().all(|f| {
            f.values()
                .iter()
                .zip(mask.values())
                .all(|(v, &m)| m != 0.0 || v.norm() == 0.0)
        })
    }
}

fn check_pair(f: &ComplexField, g: &ComplexField) -> Result<()> {
    if f.spec() != g.spec() || f.tag() != g.tag() {
        return Err(Error::Mismatch(
            "correlation operands must share grid and space".into(),
        ));
    }
    Ok(())
}

/// Direct O(n⁴) weighted cross-correlation against an explicit table.
///
/// Refuses grids larger than [`ORACLE_MAX_N`]; this path exists as an
/// oracle, not a production evaluator.
pub fn wcc_direct(f: &ComplexField, g: &ComplexField, w: &WeightMatrix) -> Result<ComplexField> {
    check_pair(f, g)?;
    if f.spec() != w.spec() {
        return Err(Error::Mismatch("weight table on a different grid".into()));
    }
    let spec = *f.spec();
    if spec.n() > ORACLE_MAX_N {
        return Err(Error::InvalidArgument(format!(
            "direct evaluator limited to n <= {ORACLE_MAX_N}, got {}",
            spec.n()
        )));
    }
    let n = spec.n();
    let len = spec.len();
    let cell = cell_area(&spec, f.tag());
    let fv = f.values();
    let gv = g.values();
    let mut out = vec![Complex64::new(0.0, 0.0); len];
    for xy in 0..n {
        for xx in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for yy in 0..n {
                let sy = spec.wrap_add(xy, yy);
                for yx in 0..n {
                    let sx = spec.wrap_add(xx, yx);
                    let y_flat = spec.idx(yx, yy);
                    let s_flat = spec.idx(sx, sy);
                    acc += fv[y_flat].conj() * gv[s_flat] * w.entries[s_flat * len + y_flat];
                }
            }
            out[spec.idx(xx, xy)] = acc * cell;
        }
    }
    ComplexField::from_values(spec, f.tag(), out)
}

/// Ordinary cross-correlation (`w ≡ 1`) via the convolution theorem.
pub fn xcorr_spectral(f: &ComplexField, g: &ComplexField) -> Result<ComplexField> {
    check_pair(f, g)?;
    match f.tag() {
        SpaceTag::Fourier => {
            let a = spectral_inverse(f)?;
            let b = spectral_inverse(g)?;
            spectral_transform(&a.conj().mul(&b)?)
        }
        SpaceTag::Real => {
            let a = spectral_transform(f)?;
            let b = spectral_transform(g)?;
            spectral_inverse(&a.conj().mul(&b)?)
        }
    }
}

/// Fast weighted cross-correlation for factorized weights:
/// `f ⋆_w g = Σ_j (f·v_j) ⋆ (g·v_j)`, O(J · n² log n).
///
/// An empty factor list represents the zero weight and yields the zero
/// field.
pub fn wcc_factorized(f: &ComplexField, g: &ComplexField, k: &FactorList) -> Result<ComplexField> {
    check_pair(f, g)?;
    if f.tag() != SpaceTag::Fourier {
        return Err(Error::Mismatch(
            "factorized correlation expects fourier-space fields".into(),
        ));
    }
    if k.is_empty() {
        return Ok(ComplexField::zeros(*f.spec(), SpaceTag::Fourier));
    }
    if k.spec() != Some(f.spec()) {
        return Err(Error::Mismatch("factors on a different grid".into()));
    }
    // Accumulate conj(F⁻¹(f·v_j)) · F⁻¹(g·v_j) and transform once at the end.
    let mut acc = ComplexField::zeros(*f.spec(), SpaceTag::Real);
    for v in k.factors() {
        let a = spectral_inverse(&f.mul(v)?)?;
        let b = spectral_inverse(&g.mul(v)?)?;
        let prod = a.conj().mul(&b)?;
        acc = acc.add(&prod)?;
    }
    spectral_transform(&acc)
}

/// Flat index of `-x` for the centered lattice point at flat index `i`.
pub fn negate_index(spec: &GridSpec, i: usize) -> usize {
    let n = spec.n();
    let (ix, iy) = (i % n, i / n);
    spec.idx((n - ix) % n, (n - iy) % n)
}
