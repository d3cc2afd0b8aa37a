use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{HsiCube, SpectralGrid};

/// Spectral template for one scene class: a baseline plus Gaussian peaks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumTemplate {
    pub name: String,
    /// (centre nm, width nm, amplitude) triples.
    pub peaks: Vec<(f64, f64, f64)>,
    pub baseline: f64,
    /// Relative multiplicative noise amplitude in [0, 1).
    pub jitter: f64,
}

impl SpectrumTemplate {
    pub fn new(
        name: impl Into<String>,
        peaks: Vec<(f64, f64, f64)>,
        baseline: f64,
        jitter: f64,
    ) -> Result<Self> {
        let name = name.into();
        let template = Self {
            name,
            peaks,
            baseline,
            jitter,
        };
        template.validate()?;
        Ok(template)
    }

    /// Field checks, re-run by [`synth_scene`] so templates arriving through
    /// deserialisation are held to the same rules.
    pub fn validate(&self) -> Result<()> {
        if !(self.baseline >= 0.0) || !self.baseline.is_finite() {
            return Err(Error::parameter(
                "baseline",
                format!("{} must be >= 0", self.baseline),
            ));
        }
        if !(0.0..1.0).contains(&self.jitter) {
            return Err(Error::parameter(
                "jitter",
                format!("{} outside [0, 1)", self.jitter),
            ));
        }
        for &(centre, width, amplitude) in &self.peaks {
            if !(width > 0.0) || !width.is_finite() {
                return Err(Error::parameter(
                    "peaks",
                    format!("width {width} must be > 0"),
                ));
            }
            if !(amplitude >= 0.0) || !amplitude.is_finite() || !centre.is_finite() {
                return Err(Error::parameter(
                    "peaks",
                    format!("peak ({centre}, {width}, {amplitude}) invalid"),
                ));
            }
        }
        Ok(())
    }

    /// The noiseless class spectrum sampled at the grid's band centres.
    pub fn evaluate(&self, grid: &SpectralGrid) -> Vec<f64> {
        grid.wavelengths()
            .iter()
            .map(|&l| {
                let mut v = self.baseline;
                for &(centre, width, amplitude) in &self.peaks {
                    let d = (l - centre) / width;
                    v += amplitude * (-0.5 * d * d).exp();
                }
                v
            })
            .collect()
    }
}

/// How class labels are painted over the image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Layout {
    /// Horizontal bands of equal height, one per class in order.
    Stripes,
    /// Class-0 background with seeded discs of the remaining classes.
    Blobs { blob_count: usize },
    /// Leaf-like class-0 background strewn with small fruit discs of the
    /// remaining classes; `fruit_density` is the target foreground fraction.
    ScatteredFruit { fruit_density: f64 },
}

/// Full recipe for one synthetic scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub height: usize,
    pub width: usize,
    pub grid: SpectralGrid,
    pub classes: Vec<SpectrumTemplate>,
    pub layout: Layout,
    pub seed: u64,
}

impl SceneConfig {
    fn validate(&self) -> Result<()> {
        if self.height < 8 || self.width < 8 {
            return Err(Error::parameter(
                "dims",
                format!("{}x{} below minimum 8x8", self.height, self.width),
            ));
        }
        if self.classes.len() < 2 {
            return Err(Error::parameter(
                "classes",
                format!("need at least 2 classes, got {}", self.classes.len()),
            ));
        }
        if self.classes.len() > 256 {
            return Err(Error::parameter("classes", "at most 256 classes"));
        }
        for template in &self.classes {
            template.validate()?;
        }
        match self.layout {
            Layout::Blobs { blob_count } => {
                if blob_count == 0 {
                    return Err(Error::parameter("blob_count", "must be >= 1"));
                }
            }
            Layout::ScatteredFruit { fruit_density } => {
                if !(0.0 < fruit_density && fruit_density < 1.0) {
                    return Err(Error::parameter(
                        "fruit_density",
                        format!("{fruit_density} outside (0, 1)"),
                    ));
                }
            }
            Layout::Stripes => {}
        }
        Ok(())
    }
}

fn paint_discs(
    labels: &mut [u8],
    height: usize,
    width: usize,
    count: usize,
    num_classes: usize,
    rng: &mut ChaCha8Rng,
) {
    for blob in 0..count {
        // Cycling the class guarantees coverage when count >= classes - 1.
        let class = 1 + (blob % (num_classes - 1)) as u8;
        let radius = rng.random_range(2..=5) as i64;
        let cx = rng.random_range(0..width) as i64;
        let cy = rng.random_range(0..height) as i64;
        for y in (cy - radius).max(0)..=(cy + radius).min(height as i64 - 1) {
            for x in (cx - radius).max(0)..=(cx + radius).min(width as i64 - 1) {
                let dx = x - cx;
                let dy = y - cy;
                if dx * dx + dy * dy <= radius * radius {
                    labels[y as usize * width + x as usize] = class;
                }
            }
        }
    }
}

fn paint_labels(config: &SceneConfig, rng: &mut ChaCha8Rng) -> Vec<u8> {
    let (h, w, k) = (config.height, config.width, config.classes.len());
    let mut labels = vec![0u8; h * w];
    match config.layout {
        Layout::Stripes => {
            for y in 0..h {
                let class = (y * k / h) as u8;
                for x in 0..w {
                    labels[y * w + x] = class;
                }
            }
        }
        Layout::Blobs { blob_count } => {
            paint_discs(&mut labels, h, w, blob_count, k, rng);
        }
        Layout::ScatteredFruit { fruit_density } => {
            // Mean disc area for radius 2..=5 is ~38.5 px.
            let count = ((fruit_density * (h * w) as f64 / 38.5).round() as usize).max(1);
            paint_discs(&mut labels, h, w, count, k, rng);
        }
    }
    labels
}

/// Generates a labelled cube from a config. Deterministic in the seed: the
/// same config always yields a bit-identical cube.
pub fn synth_scene(config: &SceneConfig) -> Result<HsiCube> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let labels = paint_labels(config, &mut rng);

    for (class, template) in config.classes.iter().enumerate() {
        if !labels.iter().any(|&l| usize::from(l) == class) {
            return Err(Error::DegenerateLayout {
                class: template.name.clone(),
            });
        }
    }

    let n = config.grid.len();
    let base_spectra: Vec<Vec<f64>> = config
        .classes
        .iter()
        .map(|t| t.evaluate(&config.grid))
        .collect();

    let mut data = vec![0.0; config.height * config.width * n];
    for y in 0..config.height {
        for x in 0..config.width {
            let p = y * config.width + x;
            let class = usize::from(labels[p]);
            let jitter = config.classes[class].jitter;
            let spectrum = &base_spectra[class];
            for b in 0..n {
                let noise = if jitter > 0.0 {
                    1.0 + jitter * rng.random_range(-1.0..1.0)
                } else {
                    1.0
                };
                data[p * n + b] = spectrum[b] * noise;
            }
        }
    }

    HsiCube::new(
        config.height,
        config.width,
        config.grid.clone(),
        data,
        labels,
        config.classes.len(),
    )
}
