//! Run configuration: a flat `key = value` text format with `[section]`
//! headers. Every key mirrors a field of the domain types one-to-one;
//! values given on the command line override file values, which override
//! the built-in desk-scale defaults.

use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::field::GridSpec;
use crate::forward::{Atom, SyntheticWaveSpec};
use crate::optimizer::SolverConfig;
use crate::tcc::OpticalParams;

/// Ordered `section.key` / value pairs from a flat config text.
#[derive(Debug, Default, Clone)]
pub struct FlatMap {
    pairs: Vec<(String, String)>,
}

impl FlatMap {
    pub fn pairs(&self) -> &[(String, String)] {
        &self.pairs
    }

    /// Last value wins for repeated keys.
    pub fn get(&self, key: &str) -> Option<&str> {
        self.pairs
            .iter()
            .rev()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn get_all(&self, key: &str) -> Vec<&str> {
        self.pairs
            .iter()
            .filter(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .collect()
    }
}

/// Parse `[section]` headers and `key = value` lines into
/// section-qualified pairs. `#` starts a comment.
pub fn parse_flat(text: &str) -> std::result::Result<FlatMap, String> {
    let mut section = String::new();
    let mut pairs = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.split_once('#') {
            Some((head, _)) => head.trim(),
            None => raw.trim(),
        };
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') {
            if !line.ends_with(']') {
                return Err(format!("line {}: unterminated section header", lineno + 1));
            }
            section = line[1..line.len() - 1].trim().to_string();
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected `key = value`", lineno + 1))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(format!("line {}: empty key", lineno + 1));
        }
        let qualified = if section.is_empty() {
            key.to_string()
        } else {
            format!("{section}.{key}")
        };
        pairs.push((qualified, value.trim().to_string()));
    }
    Ok(FlatMap { pairs })
}

/// Focus ramp and drift protocol of a simulated series.
#[derive(Debug, Clone)]
pub struct SeriesProtocol {
    pub focus_start_nm: f64,
    pub focus_step_nm: f64,
    pub image_count: usize,
    /// Explicit focus list; overrides the ramp when present.
    pub explicit_foci_nm: Option<Vec<f64>>,
    /// Constant inter-image drift; translations accumulate per image.
    pub drift_step_nm: [f64; 2],
    /// Focal quadrature nodes per kernel.
    pub n_focal: usize,
}

impl SeriesProtocol {
    pub fn foci(&self) -> Vec<f64> {
        match &self.explicit_foci_nm {
            Some(list) => list.clone(),
            None => (0..self.image_count)
                .map(|j| self.focus_start_nm + j as f64 * self.focus_step_nm)
                .collect(),
        }
    }

    /// Cumulative ground-truth translations, first entry zero.
    pub fn translations(&self) -> Vec<[f64; 2]> {
        (0..self.image_count)
            .map(|j| {
                [
                    j as f64 * self.drift_step_nm[0],
                    j as f64 * self.drift_step_nm[1],
                ]
            })
            .collect()
    }
}

/// Full configuration of a run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub grid_n: usize,
    pub extent_nm: f64,
    pub optics: OpticalParams,
    pub solver: SolverConfig,
    pub wave: SyntheticWaveSpec,
    pub series: SeriesProtocol,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub threads: Option<usize>,
    /// Zero out timestamps in manifests so outputs are byte-reproducible.
    pub zero_timestamps: bool,
}

impl Default for RunConfig {
    /// Desk-scale protocol: the reference pixel size (3.2 nm / 1024) on a
    /// 128² window, twelve images from −10 nm in 1.5 nm steps, and a
    /// diagonal drift of 0.017 nm (5.44 px) per step.
    fn default() -> Self {
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            grid_n: 128,
            extent_nm: 0.4,
            optics: OpticalParams::coherent(0.00196875, -70.0, 0.125),
            solver: SolverConfig::default(),
            wave: SyntheticWaveSpec {
                background_amp: 1.0,
                atoms: vec![
                    Atom { pos_nm: [-0.12, -0.07], phase_amp: 0.9, amp_amp: -0.10, width_nm: 0.045 },
                    Atom { pos_nm: [0.05, -0.13], phase_amp: 0.7, amp_amp: -0.06, width_nm: 0.040 },
                    Atom { pos_nm: [0.14, 0.06], phase_amp: 1.1, amp_amp: -0.12, width_nm: 0.050 },
                    Atom { pos_nm: [-0.04, 0.11], phase_amp: 0.6, amp_amp: 0.08, width_nm: 0.042 },
                    Atom { pos_nm: [0.02, 0.00], phase_amp: 0.8, amp_amp: -0.05, width_nm: 0.038 },
                ],
            },
            series: SeriesProtocol {
                focus_start_nm: -10.0,
                focus_step_nm: 1.5,
                image_count: 12,
                explicit_foci_nm: None,
                drift_step_nm: [0.017 * inv_sqrt2, 0.017 * inv_sqrt2],
                n_focal: 7,
            },
            seed: 2024,
            output_dir: PathBuf::from("out"),
            threads: None,
            zero_timestamps: true,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| Error::InvalidArgument(format!("{key}: {e}")))
}

fn parse_vec2(key: &str, value: &str) -> Result<[f64; 2]> {
    let parts: Vec<&str> = value.split_whitespace().collect();
    if parts.len() != 2 {
        return Err(Error::InvalidArgument(format!("{key}: expected two numbers")));
    }
    Ok([parse_num(key, parts[0])?, parse_num(key, parts[1])?])
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(Error::InvalidArgument(format!("{key}: not a boolean: {other:?}"))),
    }
}

impl RunConfig {
    /// Defaults overridden by the given text.
    pub fn from_text(text: &str) -> Result<Self> {
        let flat = parse_flat(text).map_err(Error::InvalidArgument)?;
        let mut cfg = Self::default();
        cfg.apply_pairs(flat.pairs())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text)
    }

    /// Apply `section.key = value` overrides in order. The first
    /// `wave.atom` in a batch clears the inherited atom list; later ones
    /// append.
    pub fn apply_pairs(&mut self, pairs: &[(String, String)]) -> Result<()> {
        let mut atoms_reset = false;
        for (key, value) in pairs {
            match key.as_str() {
                "grid.n" => self.grid_n = parse_num(key, value)?,
                "grid.extent_nm" => self.extent_nm = parse_num(key, value)?,
                "optics.lambda_nm" => self.optics.lambda_nm = parse_num(key, value)?,
                "optics.cs_nm" => self.optics.cs_nm = parse_num(key, value)?,
                "optics.alpha_max_rad" => self.optics.alpha_max_rad = parse_num(key, value)?,
                "optics.delta_nm" => self.optics.delta_nm = parse_num(key, value)?,
                "optics.alpha_conv_rad" => self.optics.alpha_conv_rad = parse_num(key, value)?,
                "solver.alpha" => self.solver.alpha = parse_num(key, value)?,
                "solver.epsilon_stop" => self.solver.epsilon_stop = parse_num(key, value)?,
                "solver.max_iters" => self.solver.max_iters = parse_num(key, value)?,
                "solver.armijo_sigma" => self.solver.armijo_sigma = parse_num(key, value)?,
                "solver.armijo_backtrack" => self.solver.armijo_backtrack = parse_num(key, value)?,
                "solver.armijo_initial_step" => {
                    self.solver.armijo_initial_step = parse_num(key, value)?
                }
                "solver.restart_period" => self.solver.restart_period = parse_num(key, value)?,
                "solver.translation_bound_nm" => {
                    self.solver.translation_bound_nm = Some(parse_num(key, value)?)
                }
                "solver.freeze_translations" => {
                    self.solver.freeze_translations = parse_bool(key, value)?
                }
                "wave.background_amp" => self.wave.background_amp = parse_num(key, value)?,
                "wave.atom" => {
                    if !atoms_reset {
                        self.wave.atoms.clear();
                        atoms_reset = true;
                    }
                    let parts: Vec<&str> = value.split_whitespace().collect();
                    if parts.len() != 5 {
                        return Err(Error::InvalidArgument(format!(
                            "{key}: expected `x y phase_amp amp_amp width_nm`"
                        )));
                    }
                    self.wave.atoms.push(Atom {
                        pos_nm: [parse_num(key, parts[0])?, parse_num(key, parts[1])?],
                        phase_amp: parse_num(key, parts[2])?,
                        amp_amp: parse_num(key, parts[3])?,
                        width_nm: parse_num(key, parts[4])?,
                    });
                }
                "series.focus_start_nm" => {
                    self.series.focus_start_nm = parse_num(key, value)?;
                    self.series.explicit_foci_nm = None;
                }
                "series.focus_step_nm" => {
                    self.series.focus_step_nm = parse_num(key, value)?;
                    self.series.explicit_foci_nm = None;
                }
                "series.image_count" => self.series.image_count = parse_num(key, value)?,
                "series.foci_nm" => {
                    let foci: Result<Vec<f64>> = value
                        .split_whitespace()
                        .map(|v| parse_num::<f64>(key, v))
                        .collect();
                    let foci = foci?;
                    self.series.image_count = foci.len();
                    self.series.explicit_foci_nm = Some(foci);
                }
                "series.drift_step_nm" => self.series.drift_step_nm = parse_vec2(key, value)?,
                "series.n_focal" => self.series.n_focal = parse_num(key, value)?,
                "run.seed" => self.seed = parse_num(key, value)?,
                "run.output_dir" => self.output_dir = PathBuf::from(value),
                "run.threads" => self.threads = Some(parse_num(key, value)?),
                "run.zero_timestamps" => self.zero_timestamps = parse_bool(key, value)?,
                other => {
                    return Err(Error::InvalidArgument(format!("unknown config key {other:?}")))
                }
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !self.grid_n.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "grid.n must be a power of two, got {}",
                self.grid_n
            )));
        }
        let spec = self.grid()?;
        self.optics.validate()?;
        self.solver.validate()?;
        self.wave.validate(&spec)?;
        if self.series.image_count == 0 {
            return Err(Error::InvalidArgument("series.image_count must be >= 1".into()));
        }
        if let Some(foci) = &self.series.explicit_foci_nm {
            if foci.len() != self.series.image_count {
                return Err(Error::InvalidArgument(format!(
                    "explicit foci list has {} entries but image_count = {}",
                    foci.len(),
                    self.series.image_count
                )));
            }
        }
        if self.series.n_focal % 2 == 0 || self.series.n_focal == 0 {
            return Err(Error::InvalidArgument(format!(
                "series.n_focal must be odd and >= 1, got {}",
                self.series.n_focal
            )));
        }
        if !(self.series.drift_step_nm[0].is_finite() && self.series.drift_step_nm[1].is_finite()) {
            return Err(Error::NonFinite("series.drift_step_nm".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.grid_n, self.extent_nm)
    }

    /// Doubled grid used for oversized simulation.
    pub fn grid_oversized(&self) -> Result<GridSpec> {
        GridSpec::new(2 * self.grid_n, 2.0 * self.extent_nm)
    }

    /// Serialize back to the flat format (atoms and foci written out
    /// explicitly).
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str("[grid]\n");
        s.push_str(&format!("n = {}\nextent_nm = {}\n", self.grid_n, self.extent_nm));
        s.push_str("[optics]\n");
        s.push_str(&format!(
            "lambda_nm = {}\ncs_nm = {}\nalpha_max_rad = {}\ndelta_nm = {}\nalpha_conv_rad = {}\n",
            self.optics.lambda_nm,
            self.optics.cs_nm,
            self.optics.alpha_max_rad,
            self.optics.delta_nm,
            self.optics.alpha_conv_rad
        ));
        s.push_str("[solver]\n");
        s.push_str(&format!(
            "alpha = {}\nepsilon_stop = {}\nmax_iters = {}\narmijo_sigma = {}\n\
             armijo_backtrack = {}\narmijo_initial_step = {}\nrestart_period = {}\n",
            self.solver.alpha,
            self.solver.epsilon_stop,
            self.solver.max_iters,
            self.solver.armijo_sigma,
            self.solver.armijo_backtrack,
            self.solver.armijo_initial_step,
            self.solver.restart_period
        ));
        if let Some(bound) = self.solver.translation_bound_nm {
            s.push_str(&format!("translation_bound_nm = {bound}\n"));
        }
        if self.solver.freeze_translations {
            s.push_str("freeze_translations = true\n");
        }
        s.push_str("[wave]\n");
        s.push_str(&format!("background_amp = {}\n", self.wave.background_amp));
        for a in &self.wave.atoms {
            s.push_str(&format!(
                "atom = {} {} {} {} {}\n",
                a.pos_nm[0], a.pos_nm[1], a.phase_amp, a.amp_amp, a.width_nm
            ));
        }
        s.push_str("[series]\n");
        let foci = self.series.foci();
        s.push_str(&format!(
            "foci_nm = {}\n",
            foci.iter().map(|z| z.to_string()).collect::<Vec<_>>().join(" ")
        ));
        s.push_str(&format!("image_count = {}\n", self.series.image_count));
        s.push_str(&format!(
            "drift_step_nm = {} {}\n",
            self.series.drift_step_nm[0], self.series.drift_step_nm[1]
        ));
        s.push_str(&format!("n_focal = {}\n", self.series.n_focal));
        s.push_str("[run]\n");
        s.push_str(&format!("seed = {}\n", self.seed));
        s.push_str(&format!("output_dir = {}\n", self.output_dir.display()));
        if let Some(t) = self.threads {
            s.push_str(&format!("threads = {t}\n"));
        }
        s.push_str(&format!("zero_timestamps = {}\n", self.zero_timestamps));
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_yields_desk_defaults() {
        let cfg = RunConfig::from_text("").unwrap();
        assert_eq!(cfg.grid_n, 128);
        assert_eq!(cfg.series.image_count, 12);
        assert_eq!(cfg.series.foci().len(), 12);
        assert!((cfg.series.foci()[0] + 10.0).abs() < 1e-12);
        assert!((cfg.solver.alpha - 1e-5).abs() < 1e-20);
        // drift magnitude is 0.017 nm = 5.44 px at the reference pixel size
        let d = cfg.series.drift_step_nm;
        assert!(((d[0].powi(2) + d[1].powi(2)).sqrt() - 0.017).abs() < 1e-12);
    }

    #[test]
    fn overrides_and_round_trip() {
        let text = "
[grid]
n = 64
extent_nm = 0.2
[series]
foci_nm = -3 0 3
[wave]
atom = 0.01 -0.02 0.5 0.0 0.02
atom = -0.03 0.04 0.7 -0.1 0.03
[solver]
alpha = 0
[run]
seed = 7
";
        let cfg = RunConfig::from_text(text).unwrap();
        assert_eq!(cfg.grid_n, 64);
        assert_eq!(cfg.series.image_count, 3);
        assert_eq!(cfg.wave.atoms.len(), 2);
        assert_eq!(cfg.solver.alpha, 0.0);
        assert_eq!(cfg.seed, 7);
        // Ramp keys still produce cumulative translations.
        let t = cfg.series.translations();
        assert_eq!(t[0], [0.0, 0.0]);
        assert!((t[2][0] - 2.0 * cfg.series.drift_step_nm[0]).abs() < 1e-15);

        let back = RunConfig::from_text(&cfg.to_text()).unwrap();
        assert_eq!(back.grid_n, cfg.grid_n);
        assert_eq!(back.wave.atoms.len(), cfg.wave.atoms.len());
        assert_eq!(back.series.foci(), cfg.series.foci());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(RunConfig::from_text("[grid]\nn = 100\n").is_err()); // not a power of two
        assert!(RunConfig::from_text("[series]\nimage_count = 0\n").is_err());
        assert!(RunConfig::from_text("[series]\nn_focal = 4\n").is_err());
        assert!(RunConfig::from_text("[solver]\narmijo_backtrack = 1.5\n").is_err());
        assert!(RunConfig::from_text("nonsense\n").is_err());
        assert!(RunConfig::from_text("[grid]\nunknown_key = 3\n").is_err());
        // foci list length must match an explicit image_count
        assert!(RunConfig::from_text("[series]\nfoci_nm = 1 2 3\nimage_count = 5\n").is_err());
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let cfg = RunConfig::from_text("# comment\n\n[grid] # trailing\nn = 32 # inline\n").unwrap();
        assert_eq!(cfg.grid_n, 32);
    }
}
