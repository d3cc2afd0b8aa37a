use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Diffuse downwelling attenuation coefficient K_d(lambda) in 1/m, stored as
/// a sampled table and linearly interpolated between samples.
/// Deserialisation validates like [`AttenuationModel::from_table`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel")]
pub struct AttenuationModel {
    /// Strictly increasing sample wavelengths in nm.
    wavelengths: Vec<f64>,
    /// K_d at each sample, 1/m.
    kd: Vec<f64>,
}

#[derive(Deserialize)]
struct RawModel {
    wavelengths: Vec<f64>,
    kd: Vec<f64>,
}

impl TryFrom<RawModel> for AttenuationModel {
    type Error = Error;

    fn try_from(raw: RawModel) -> Result<Self> {
        if raw.wavelengths.len() != raw.kd.len() {
            return Err(Error::parameter(
                "kd_table",
                format!(
                    "{} wavelengths but {} coefficients",
                    raw.wavelengths.len(),
                    raw.kd.len()
                ),
            ));
        }
        Self::from_table(raw.wavelengths.into_iter().zip(raw.kd).collect())
    }
}

impl AttenuationModel {
    /// Builds a model from (nm, 1/m) sample pairs. Samples must be strictly
    /// increasing in wavelength with non-negative finite coefficients.
    pub fn from_table(pairs: Vec<(f64, f64)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::parameter("kd_table", "table must not be empty"));
        }
        for (i, &(l, k)) in pairs.iter().enumerate() {
            if !l.is_finite() || !k.is_finite() || k < 0.0 {
                return Err(Error::parameter(
                    "kd_table",
                    format!("entry {i} ({l} nm, {k} 1/m) invalid"),
                ));
            }
            if i > 0 && l <= pairs[i - 1].0 {
                return Err(Error::parameter(
                    "kd_table",
                    format!("wavelengths not strictly increasing at entry {i}"),
                ));
            }
        }
        let (wavelengths, kd) = pairs.into_iter().unzip();
        Ok(Self { wavelengths, kd })
    }

    /// Clear-ocean-like default: `K_d = 0.02 + 0.3 ((lambda - 475)/100)^2`,
    /// a transmission window near 475 nm rising steeply toward the red.
    /// Sampled at 1 nm from 200 to 1200 nm, which covers any realistic grid
    /// and is exact at integer band centres.
    pub fn oceanic_default() -> Self {
        let pairs = (200..=1200)
            .map(|nm| {
                let l = nm as f64;
                let d = (l - 475.0) / 100.0;
                (l, 0.02 + 0.3 * d * d)
            })
            .collect();
        Self::from_table(pairs).expect("default table is valid")
    }

    /// Loads a two-column text table (nm, 1/m). `#` starts a comment; blank
    /// lines are skipped.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut pairs = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut cols = line.split_whitespace();
            let parse = |s: Option<&str>| -> Result<f64> {
                s.ok_or_else(|| {
                    Error::parse(path, format!("line {}: expected two columns", lineno + 1))
                })?
                .parse()
                .map_err(|e| Error::parse(path, format!("line {}: {e}", lineno + 1)))
            };
            let l = parse(cols.next())?;
            let k = parse(cols.next())?;
            if cols.next().is_some() {
                return Err(Error::parse(
                    path,
                    format!("line {}: more than two columns", lineno + 1),
                ));
            }
            pairs.push((l, k));
        }
        Self::from_table(pairs)
    }

    /// K_d at an arbitrary wavelength, linearly interpolated. Wavelengths
    /// outside the sampled span are an error: the model must cover the full
    /// working grid.
    pub fn kd_at(&self, lambda: f64) -> Result<f64> {
        let first = self.wavelengths[0];
        let last = *self.wavelengths.last().expect("non-empty");
        if lambda < first || lambda > last {
            return Err(Error::parameter(
                "lambda",
                format!("{lambda} nm outside attenuation table span [{first}, {last}] nm"),
            ));
        }
        match self
            .wavelengths
            .binary_search_by(|w| w.total_cmp(&lambda))
        {
            Ok(i) => Ok(self.kd[i]),
            Err(i) => {
                let (l0, l1) = (self.wavelengths[i - 1], self.wavelengths[i]);
                let t = (lambda - l0) / (l1 - l0);
                Ok(self.kd[i - 1] + t * (self.kd[i] - self.kd[i - 1]))
            }
        }
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.wavelengths.iter().copied().zip(self.kd.iter().copied())
    }
}
