//! Field files: a text sidecar (`<base>.meta`) plus a raw payload
//! (`<base>.raw`).
//!
//! The sidecar holds `key = value` lines for `n`, `extent_nm`,
//! `space_tag` and `dtype`. The payload is little-endian IEEE-754
//! binary64, row-major; complex fields interleave (re, im) pairs and
//! real fields store plain reals (`dtype = float64`). Round trips are
//! bit-exact: the payload is copied verbatim and `extent_nm` is written
//! with the shortest representation that parses back to the same bits.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{ComplexField, GridSpec, RealField, SpaceTag};

const DTYPE_COMPLEX: &str = "complex128";
const DTYPE_REAL: &str = "float64";

fn meta_path(base: &Path) -> PathBuf {
    base.with_extension("meta")
}

fn raw_path(base: &Path) -> PathBuf {
    base.with_extension("raw")
}

fn write_meta(base: &Path, spec: &GridSpec, tag: SpaceTag, dtype: &str) -> Result<()> {
    let text = format!(
        "n = {}\nextent_nm = {}\nspace_tag = {}\ndtype = {}\n",
        spec.n(),
        spec.extent_nm(),
        tag.as_str(),
        dtype
    );
    fs::write(meta_path(base), text)?;
    Ok(())
}

struct Meta {
    spec: GridSpec,
    tag: SpaceTag,
    dtype: String,
}

fn read_meta(base: &Path) -> Result<Meta> {
    let path = meta_path(base);
    let text = fs::read_to_string(&path)?;
    let mut n = None;
    let mut extent = None;
    let mut tag = None;
    let mut dtype = None;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Format {
            path: path.display().to_string(),
            reason: format!("expected `key = value`, got {line:?}"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        let bad = |reason: String| Error::Format {
            path: path.display().to_string(),
            reason,
        };
        match key {
            "n" => n = Some(value.parse::<usize>().map_err(|e| bad(format!("n: {e}")))?),
            "extent_nm" => {
                extent = Some(value.parse::<f64>().map_err(|e| bad(format!("extent_nm: {e}")))?)
            }
            "space_tag" => tag = Some(SpaceTag::parse(value)?),
            "dtype" => dtype = Some(value.to_string()),
            other => return Err(bad(format!("unknown key {other:?}"))),
        }
    }
    let missing = |what: &str| Error::Format {
        path: path.display().to_string(),
        reason: format!("missing key {what:?}"),
    };
    let spec = GridSpec::new(n.ok_or_else(|| missing("n"))?, extent.ok_or_else(|| missing("extent_nm"))?)?;
    Ok(Meta {
        spec,
        tag: tag.ok_or_else(|| missing("space_tag"))?,
        dtype: dtype.ok_or_else(|| missing("dtype"))?,
    })
}

fn write_payload(base: &Path, doubles: impl Iterator<Item = f64>) -> Result<()> {
    let mut file = fs::File::create(raw_path(base))?;
    let mut buf = Vec::with_capacity(1 << 16);
    for v in doubles {
        buf.extend_from_slice(&v.to_le_bytes());
        if buf.len() >= 1 << 16 {
            file.write_all(&buf)?;
            buf.clear();
        }
    }
    file.write_all(&buf)?;
    Ok(())
}

fn read_payload(base: &Path, count: usize) -> Result<Vec<f64>> {
    let path = raw_path(base);
    let mut bytes = Vec::new();
    fs::File::open(&path)?.read_to_end(&mut bytes)?;
    if bytes.len() != count * 8 {
        return Err(Error::Format {
            path: path.display().to_string(),
            reason: format!("expected {} bytes, found {}", count * 8, bytes.len()),
        });
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

pub fn write_complex(base: &Path, f: &ComplexField) -> Result<()> {
    write_meta(base, f.spec(), f.tag(), DTYPE_COMPLEX)?;
    write_payload(base, f.values().iter().flat_map(|v| [v.re, v.im]))
}

pub fn read_complex(base: &Path) -> Result<ComplexField> {
    let meta = read_meta(base)?;
    if meta.dtype != DTYPE_COMPLEX {
        return Err(Error::Format {
            path: meta_path(base).display().to_string(),
            reason: format!("expected dtype {DTYPE_COMPLEX}, got {}", meta.dtype),
        });
    }
    let doubles = read_payload(base, 2 * meta.spec.len())?;
    let values = doubles
        .chunks_exact(2)
        .map(|c| Complex64::new(c[0], c[1]))
        .collect();
    ComplexField::from_values(meta.spec, meta.tag, values)
}

/// Real fields carry no tag in memory; the caller states which lattice
/// the samples live on (images: real space, masks: frequency lattice).
pub fn write_real(base: &Path, f: &RealField, tag: SpaceTag) -> Result<()> {
    write_meta(base, f.spec(), tag, DTYPE_REAL)?;
    write_payload(base, f.values().iter().copied())
}

pub fn read_real(base: &Path) -> Result<(RealField, SpaceTag)> {
    let meta = read_meta(base)?;
    if meta.dtype != DTYPE_REAL {
        return Err(Error::Format {
            path: meta_path(base).display().to_string(),
            reason: format!("expected dtype {DTYPE_REAL}, got {}", meta.dtype),
        });
    }
    let values = read_payload(base, meta.spec.len())?;
    Ok((RealField::from_values(meta.spec, values)?, meta.tag))
}
