//! A small per-pixel differentiable classifier over opsin channels: the
//! stand-in for evolutionary task pressure.
//!
//! The head sees each pixel's raw channels plus a 3x3 box-mean of each
//! channel (a minimal slice of spatial context), pushes them through one
//! hidden ReLU layer, and scores per-pixel class logits. Everything here is
//! written so the reverse-mode gradients are exact and cheap to verify with
//! finite differences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::ChannelMap;

/// Dense-layer parameters of the per-pixel classifier.
///
/// `w1` is `c_in x hidden` (row-major by input), `w2` is `hidden x k_out`
/// (row-major by hidden unit).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerceptionHead {
    pub c_in: usize,
    pub hidden: usize,
    pub k_out: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

/// Default hidden width.
pub const DEFAULT_HIDDEN: usize = 16;

/// Initialises a head with parameters drawn uniformly from [-0.1, 0.1].
///
/// Draw order is w1, b1, w2, b2, so identical seeds give identical heads.
pub fn init_head(c_in: usize, hidden: usize, k_out: usize, seed: u64) -> Result<PerceptionHead> {
    if c_in == 0 || hidden == 0 || k_out == 0 {
        return Err(Error::parameter(
            "dims",
            format!("(c_in={c_in}, hidden={hidden}, k_out={k_out}) must all be positive"),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |n: usize| -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-0.1..0.1)).collect()
    };
    Ok(PerceptionHead {
        c_in,
        hidden,
        k_out,
        w1: draw(c_in * hidden),
        b1: draw(hidden),
        w2: draw(hidden * k_out),
        b2: draw(k_out),
    })
}

impl PerceptionHead {
    pub fn parameter_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }
}

/// Expanded per-pixel features: raw channels followed by their box-means.
#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    height: usize,
    width: usize,
    channels: usize,
    values: Vec<f64>,
}

impl Features {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        let start = (y * self.width + x) * self.channels;
        &self.values[start..start + self.channels]
    }
}

/// Expands a C-channel map to 2C features per pixel: the raw channels and a
/// 3x3 edge-clamped box-mean of each channel. Linear in the input.
pub fn featurize(map: &ChannelMap) -> Features {
    let (h, w, c) = (map.height(), map.width(), map.channels());
    let mut values = vec![0.0; h * w * 2 * c];
    for y in 0..h {
        for x in 0..w {
            let base = (y * w + x) * 2 * c;
            for ch in 0..c {
                values[base + ch] = map.value(x, y, ch);
            }
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let sy = (y as i64 + dy).clamp(0, h as i64 - 1) as usize;
                    let sx = (x as i64 + dx).clamp(0, w as i64 - 1) as usize;
                    for ch in 0..c {
                        values[base + c + ch] += map.value(sx, sy, ch) / 9.0;
                    }
                }
            }
        }
    }
    Features {
        height: h,
        width: w,
        channels: 2 * c,
        values,
    }
}

/// Adjoint of [`featurize`]: folds a gradient on the 2C features back onto
/// the C raw channels. Box-mean is linear, so this needs no forward values.
fn featurize_backward(grad_features: &[f64], h: usize, w: usize, c: usize) -> Vec<f64> {
    let mut grad_channels = vec![0.0; h * w * c];
    for y in 0..h {
        for x in 0..w {
            let base = (y * w + x) * 2 * c;
            for ch in 0..c {
                grad_channels[(y * w + x) * c + ch] += grad_features[base + ch];
            }
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let sy = (y as i64 + dy).clamp(0, h as i64 - 1) as usize;
                    let sx = (x as i64 + dx).clamp(0, w as i64 - 1) as usize;
                    for ch in 0..c {
                        grad_channels[(sy * w + sx) * c + ch] +=
                            grad_features[base + c + ch] / 9.0;
                    }
                }
            }
        }
    }
    grad_channels
}

/// Per-pixel logits and argmax labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    height: usize,
    width: usize,
    k_out: usize,
    logits: Vec<f64>,
    labels: Vec<u8>,
}

impl Prediction {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn k_out(&self) -> usize {
        self.k_out
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn logit(&self, x: usize, y: usize, class: usize) -> f64 {
        self.logits[(y * self.width + x) * self.k_out + class]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn label(&self, x: usize, y: usize) -> u8 {
        self.labels[y * self.width + x]
    }
}

/// Ties break toward the lower class index.
fn argmax(row: &[f64]) -> u8 {
    let mut best = 0;
    for (k, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = k;
        }
    }
    best as u8
}

fn pixel_forward(
    head: &PerceptionHead,
    features: &[f64],
    hidden_pre: &mut [f64],
    hidden: &mut [f64],
    logits: &mut [f64],
) {
    for j in 0..head.hidden {
        let mut acc = head.b1[j];
        for (i, &f) in features.iter().enumerate() {
            acc += f * head.w1[i * head.hidden + j];
        }
        hidden_pre[j] = acc;
        hidden[j] = acc.max(0.0);
    }
    for k in 0..head.k_out {
        let mut acc = head.b2[k];
        for (j, &h) in hidden.iter().enumerate() {
            acc += h * head.w2[j * head.k_out + k];
        }
        logits[k] = acc;
    }
}

/// Runs the head over every pixel. Deterministic; ties in the argmax go to
/// the lower class index.
pub fn forward(head: &PerceptionHead, features: &Features) -> Result<Prediction> {
    if features.channels != head.c_in {
        return Err(Error::dimension(format!(
            "feature width {} != head c_in {}",
            features.channels, head.c_in
        )));
    }
    let (h, w, k_out) = (features.height, features.width, head.k_out);
    let mut logits = vec![0.0; h * w * k_out];
    let mut labels = vec![0u8; h * w];
    let mut hid_pre = vec![0.0; head.hidden];
    let mut hid = vec![0.0; head.hidden];
    for p in 0..h * w {
        let f = &features.values[p * head.c_in..(p + 1) * head.c_in];
        let row = &mut logits[p * k_out..(p + 1) * k_out];
        pixel_forward(head, f, &mut hid_pre, &mut hid, row);
        labels[p] = argmax(row);
    }
    Ok(Prediction {
        height: h,
        width: w,
        k_out,
        logits,
        labels,
    })
}

/// Gradients of the mean cross-entropy with respect to every head parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadGradients {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl HeadGradients {
    pub(crate) fn zeros_like(head: &PerceptionHead) -> Self {
        Self {
            w1: vec![0.0; head.w1.len()],
            b1: vec![0.0; head.b1.len()],
            w2: vec![0.0; head.w2.len()],
            b2: vec![0.0; head.b2.len()],
        }
    }

    pub(crate) fn accumulate_scaled(&mut self, other: &HeadGradients, scale: f64) {
        for (a, b) in self.w1.iter_mut().zip(&other.w1) {
            *a += b * scale;
        }
        for (a, b) in self.b1.iter_mut().zip(&other.b1) {
            *a += b * scale;
        }
        for (a, b) in self.w2.iter_mut().zip(&other.w2) {
            *a += b * scale;
        }
        for (a, b) in self.b2.iter_mut().zip(&other.b2) {
            *a += b * scale;
        }
    }

    pub(crate) fn iter(&self) -> impl Iterator<Item = &f64> {
        self.w1
            .iter()
            .chain(&self.b1)
            .chain(&self.w2)
            .chain(&self.b2)
    }
}

/// Loss value plus exact reverse-mode gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    /// Mean cross-entropy over pixels.
    pub loss: f64,
    pub grad_head: HeadGradients,
    /// Gradient with respect to the raw C-channel map the features came
    /// from (chained back through [`featurize`]), pixel-major H*W*C.
    pub grad_channels: Vec<f64>,
}

/// Mean cross-entropy and its exact gradients for head parameters and for
/// the pre-expansion channel map.
pub fn loss_and_grads(
    head: &PerceptionHead,
    features: &Features,
    labels: &[u8],
) -> Result<LossReport> {
    if features.channels != head.c_in {
        return Err(Error::dimension(format!(
            "feature width {} != head c_in {}",
            features.channels, head.c_in
        )));
    }
    if head.c_in % 2 != 0 {
        return Err(Error::dimension(format!(
            "c_in {} is not twice a channel count",
            head.c_in
        )));
    }
    let (h, w) = (features.height, features.width);
    let pixels = h * w;
    if labels.len() != pixels {
        return Err(Error::dimension(format!(
            "labels length {} != pixel count {pixels}",
            labels.len()
        )));
    }
    for (p, &l) in labels.iter().enumerate() {
        if usize::from(l) >= head.k_out {
            return Err(Error::parameter(
                "labels",
                format!("pixel {p} has label {l} >= k_out {}", head.k_out),
            ));
        }
    }

    let inv_pixels = 1.0 / pixels as f64;
    let mut grads = HeadGradients::zeros_like(head);
    let mut grad_features = vec![0.0; features.values.len()];
    let mut loss = 0.0;

    let mut hid_pre = vec![0.0; head.hidden];
    let mut hid = vec![0.0; head.hidden];
    let mut logits = vec![0.0; head.k_out];
    let mut dlogits = vec![0.0; head.k_out];
    let mut dhidden = vec![0.0; head.hidden];

    for p in 0..pixels {
        let f = &features.values[p * head.c_in..(p + 1) * head.c_in];
        pixel_forward(head, f, &mut hid_pre, &mut hid, &mut logits);

        // stable log-softmax
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum_exp: f64 = logits.iter().map(|&v| (v - max).exp()).sum();
        let log_sum = max + sum_exp.ln();
        let label = usize::from(labels[p]);
        loss += (log_sum - logits[label]) * inv_pixels;

        for k in 0..head.k_out {
            let softmax = (logits[k] - log_sum).exp();
            dlogits[k] = (softmax - if k == label { 1.0 } else { 0.0 }) * inv_pixels;
        }

        for j in 0..head.hidden {
            let mut acc = 0.0;
            for k in 0..head.k_out {
                let d = dlogits[k];
                grads.w2[j * head.k_out + k] += hid[j] * d;
                acc += head.w2[j * head.k_out + k] * d;
            }
            // ReLU gate: zero slope at and below the kink
            dhidden[j] = if hid_pre[j] > 0.0 { acc } else { 0.0 };
        }
        for k in 0..head.k_out {
            grads.b2[k] += dlogits[k];
        }

        let gf = &mut grad_features[p * head.c_in..(p + 1) * head.c_in];
        for j in 0..head.hidden {
            let d = dhidden[j];
            if d == 0.0 {
                continue;
            }
            grads.b1[j] += d;
            for i in 0..head.c_in {
                grads.w1[i * head.hidden + j] += f[i] * d;
                gf[i] += head.w1[i * head.hidden + j] * d;
            }
        }
    }

    let grad_channels = featurize_backward(&grad_features, h, w, head.c_in / 2);
    Ok(LossReport {
        loss,
        grad_head: grads,
        grad_channels,
    })
}

/// Mean intersection-over-union between predicted and true labels.
///
/// Classes absent from both sides are skipped; the result is in [0, 1].
pub fn miou(pred: &Prediction, labels: &[u8]) -> Result<f64> {
    if labels.len() != pred.labels.len() {
        return Err(Error::dimension(format!(
            "labels length {} != prediction pixels {}",
            labels.len(),
            pred.labels.len()
        )));
    }
    let k = pred
        .k_out
        .max(labels.iter().map(|&l| usize::from(l) + 1).max().unwrap_or(0));
    let mut intersection = vec![0usize; k];
    let mut union = vec![0usize; k];
    for (&p, &l) in pred.labels.iter().zip(labels) {
        let (p, l) = (usize::from(p), usize::from(l));
        if p == l {
            intersection[p] += 1;
            union[p] += 1;
        } else {
            union[p] += 1;
            union[l] += 1;
        }
    }
    let mut total = 0.0;
    let mut counted = 0usize;
    for class in 0..k {
        if union[class] > 0 {
            total += intersection[class] as f64 / union[class] as f64;
            counted += 1;
        }
    }
    Ok(if counted == 0 { 0.0 } else { total / counted as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{render, HsiCube, OpsinBank, SpectralGrid};
    use approx::assert_relative_eq;

    /// Builds a map with the given channel values through the public render
    /// path, then swaps the values in.
    fn map_from(values: Vec<f64>, h: usize, w: usize, c: usize, labels: Vec<u8>) -> ChannelMap {
        let grid = SpectralGrid::default_visible();
        let n = grid.len();
        let k = labels.iter().copied().max().unwrap_or(0) as usize + 1;
        let cube = HsiCube::new(h, w, grid, vec![0.0; h * w * n], labels, k).unwrap();
        let bank = OpsinBank::from_peaks(&vec![550.0; c]).unwrap();
        let map = render(&cube, &bank).unwrap();
        map.map_values(|i, _| values[i])
    }

    #[test]
    fn init_is_deterministic_with_documented_count_and_range() {
        let a = init_head(6, 16, 3, 42).unwrap();
        let b = init_head(6, 16, 3, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.parameter_count(), 6 * 16 + 16 + 16 * 3 + 3);
        assert_eq!(a.parameter_count(), 163);
        for v in a.w1.iter().chain(&a.b1).chain(&a.w2).chain(&a.b2) {
            assert!((-0.1..=0.1).contains(v));
        }
        assert_ne!(init_head(6, 16, 3, 43).unwrap(), a);
        assert!(init_head(0, 16, 3, 1).is_err());
    }

    #[test]
    fn featurize_constant_map_duplicates_channels() {
        let map = map_from(vec![0.4; 3 * 4 * 2], 3, 4, 2, vec![0; 12]);
        let f = featurize(&map);
        assert_eq!(f.channels(), 4);
        for y in 0..3 {
            for x in 0..4 {
                let px = f.pixel(x, y);
                assert_relative_eq!(px[0], px[2], max_relative = 1e-14);
                assert_relative_eq!(px[1], px[3], max_relative = 1e-14);
            }
        }
    }

    #[test]
    fn featurize_single_pixel_box_mean_is_identity() {
        let map = map_from(vec![0.7], 1, 1, 1, vec![0]);
        let f = featurize(&map);
        assert_relative_eq!(f.pixel(0, 0)[1], 0.7, max_relative = 1e-14);
    }

    #[test]
    fn featurize_center_spike_smears_to_one_ninth() {
        let mut values = vec![0.0; 9];
        values[4] = 9.0; // centre of the 3x3 image
        let map = map_from(values, 3, 3, 1, vec![0; 9]);
        let f = featurize(&map);
        assert_relative_eq!(f.pixel(1, 1)[1], 1.0, max_relative = 1e-14);
        // the corner window clamps but still reaches the centre exactly once
        assert_relative_eq!(f.pixel(0, 0)[1], 1.0, max_relative = 1e-14);
    }

    fn zero_head(c_in: usize, hidden: usize, k_out: usize) -> PerceptionHead {
        PerceptionHead {
            c_in,
            hidden,
            k_out,
            w1: vec![0.0; c_in * hidden],
            b1: vec![0.0; hidden],
            w2: vec![0.0; hidden * k_out],
            b2: vec![0.0; k_out],
        }
    }

    #[test]
    fn zero_head_predicts_class_zero_by_tie_break() {
        let map = map_from(vec![0.3; 8], 2, 2, 2, vec![0; 4]);
        let pred = forward(&zero_head(4, 3, 3), &featurize(&map)).unwrap();
        assert!(pred.logits().iter().all(|&v| v == 0.0));
        assert!(pred.labels().iter().all(|&l| l == 0));
    }

    #[test]
    fn output_bias_forces_the_predicted_class() {
        let map = map_from(vec![0.3; 8], 2, 2, 2, vec![0; 4]);
        let mut head = zero_head(4, 3, 3);
        head.b2 = vec![0.0, 1.0, 0.0];
        let pred = forward(&head, &featurize(&map)).unwrap();
        assert!(pred.labels().iter().all(|&l| l == 1));
    }

    #[test]
    fn forward_matches_a_scalar_loop_oracle() {
        let values: Vec<f64> = (0..8).map(|i| 0.1 * i as f64 - 0.2).collect();
        let map = map_from(values, 2, 2, 2, vec![0; 4]);
        let f = featurize(&map);
        let head = init_head(4, 5, 3, 42).unwrap();
        let pred = forward(&head, &f).unwrap();

        // independent straight-line evaluation
        for y in 0..2 {
            for x in 0..2 {
                let px = f.pixel(x, y);
                for k in 0..3 {
                    let mut logit = head.b2[k];
                    for j in 0..5 {
                        let mut pre = head.b1[j];
                        for i in 0..4 {
                            pre += px[i] * head.w1[i * 5 + j];
                        }
                        let hval = if pre > 0.0 { pre } else { 0.0 };
                        logit += hval * head.w2[j * 3 + k];
                    }
                    assert_relative_eq!(pred.logit(x, y, k), logit, max_relative = 1e-12);
                }
            }
        }
    }

    #[test]
    fn uniform_logits_cost_ln_k() {
        let map = map_from(vec![0.3; 8], 2, 2, 2, vec![0, 1, 2, 0]);
        let report = loss_and_grads(&zero_head(4, 3, 3), &featurize(&map), &[0, 1, 2, 0]).unwrap();
        assert_relative_eq!(report.loss, 3.0f64.ln(), max_relative = 1e-14);
    }

    #[test]
    fn saturated_correct_logits_cost_nothing() {
        let map = map_from(vec![0.0; 4], 2, 2, 1, vec![1; 4]);
        let mut head = zero_head(2, 2, 3);
        head.b2 = vec![0.0, 100.0, 0.0];
        let report = loss_and_grads(&head, &featurize(&map), &[1; 4]).unwrap();
        assert!(report.loss < 1e-6, "loss {}", report.loss);
    }

    #[test]
    fn loss_is_finite_for_huge_logits() {
        let map = map_from(vec![0.0; 4], 2, 2, 1, vec![0; 4]);
        let mut head = zero_head(2, 2, 2);
        head.b2 = vec![1e3, -1e3];
        let report = loss_and_grads(&head, &featurize(&map), &[1; 4]).unwrap();
        assert!(report.loss.is_finite());
        assert_relative_eq!(report.loss, 2e3, max_relative = 1e-12);
    }

    #[test]
    fn label_out_of_range_is_rejected() {
        let map = map_from(vec![0.3; 8], 2, 2, 2, vec![0; 4]);
        let head = init_head(4, 3, 2, 1).unwrap();
        assert!(loss_and_grads(&head, &featurize(&map), &[0, 1, 2, 0]).is_err());
    }

    fn loss_of(head: &PerceptionHead, features: &Features, labels: &[u8]) -> f64 {
        loss_and_grads(head, features, labels).unwrap().loss
    }

    #[test]
    fn head_gradients_match_finite_differences() {
        let values: Vec<f64> = (0..32)
            .map(|i| 0.05 * ((i * 37 % 17) as f64) - 0.3)
            .collect();
        let labels: Vec<u8> = (0..16).map(|i| (i % 3) as u8).collect();
        let map = map_from(values, 4, 4, 2, labels.clone());
        let f = featurize(&map);
        let head = init_head(4, 4, 3, 7).unwrap();
        let report = loss_and_grads(&head, &f, &labels).unwrap();
        let h = 1e-5;

        let check = |get: &dyn Fn(&PerceptionHead) -> &Vec<f64>,
                         set: &dyn Fn(&mut PerceptionHead, usize, f64),
                         grad: &[f64],
                         name: &str| {
            for idx in 0..get(&head).len() {
                let orig = get(&head)[idx];
                let mut plus = head.clone();
                set(&mut plus, idx, orig + h);
                let mut minus = head.clone();
                set(&mut minus, idx, orig - h);
                let fd = (loss_of(&plus, &f, &labels) - loss_of(&minus, &f, &labels)) / (2.0 * h);
                let scale = fd.abs().max(grad[idx].abs()).max(1e-8);
                assert!(
                    (fd - grad[idx]).abs() / scale < 1e-4,
                    "{name}[{idx}]: analytic {} vs fd {fd}",
                    grad[idx]
                );
            }
        };
        check(&|h| &h.w1, &|h, i, v| h.w1[i] = v, &report.grad_head.w1, "w1");
        check(&|h| &h.b1, &|h, i, v| h.b1[i] = v, &report.grad_head.b1, "b1");
        check(&|h| &h.w2, &|h, i, v| h.w2[i] = v, &report.grad_head.w2, "w2");
        check(&|h| &h.b2, &|h, i, v| h.b2[i] = v, &report.grad_head.b2, "b2");
    }

    #[test]
    fn channel_gradients_match_finite_differences_through_featurize() {
        let values: Vec<f64> = (0..32)
            .map(|i| 0.05 * ((i * 29 % 13) as f64) - 0.2)
            .collect();
        let labels: Vec<u8> = (0..16).map(|i| ((i / 2) % 3) as u8).collect();
        let map = map_from(values.clone(), 4, 4, 2, labels.clone());
        let head = init_head(4, 4, 3, 11).unwrap();
        let report = loss_and_grads(&head, &featurize(&map), &labels).unwrap();
        let h = 1e-5;
        for idx in 0..values.len() {
            let plus = map.map_values(|i, v| if i == idx { v + h } else { v });
            let minus = map.map_values(|i, v| if i == idx { v - h } else { v });
            let fd = (loss_of(&head, &featurize(&plus), &labels)
                - loss_of(&head, &featurize(&minus), &labels))
                / (2.0 * h);
            let g = report.grad_channels[idx];
            let scale = fd.abs().max(g.abs()).max(1e-8);
            assert!(
                (fd - g).abs() / scale < 1e-4,
                "channel grad [{idx}]: analytic {g} vs fd {fd}"
            );
        }
    }

    /// Head that copies channel 0 to the class-1 logit: positive channel
    /// values predict class 1, negative predict class 0.
    fn sign_head() -> PerceptionHead {
        PerceptionHead {
            c_in: 2,
            hidden: 1,
            k_out: 2,
            w1: vec![1.0, 0.0],
            b1: vec![0.0],
            w2: vec![0.0, 1.0],
            b2: vec![0.0, 0.0],
        }
    }

    #[test]
    fn miou_perfect_and_complement_cases() {
        let map = map_from(vec![-1.0, 1.0, -1.0, 1.0], 2, 2, 1, vec![0, 1, 0, 1]);
        let pred = forward(&sign_head(), &featurize(&map)).unwrap();
        assert_eq!(pred.labels(), &[0, 1, 0, 1]);
        assert_eq!(miou(&pred, &[0, 1, 0, 1]).unwrap(), 1.0);
        // complement labelling: both IoUs are 0
        assert_eq!(miou(&pred, &[1, 0, 1, 0]).unwrap(), 0.0);
    }

    #[test]
    fn miou_hand_counted_mixed_case() {
        // pred [0,0,1,1] vs labels [0,1,1,1]:
        //   class 0: inter 1, union 2 -> 1/2
        //   class 1: inter 2, union 3 -> 2/3
        let map = map_from(vec![-1.0, -1.0, 1.0, 1.0], 2, 2, 1, vec![0, 1, 1, 1]);
        let pred = forward(&sign_head(), &featurize(&map)).unwrap();
        assert_eq!(pred.labels(), &[0, 0, 1, 1]);
        let expected: f64 = (0.5 + 2.0 / 3.0) / 2.0;
        assert!((expected - 0.5833).abs() < 1e-4);
        assert_relative_eq!(
            miou(&pred, &[0, 1, 1, 1]).unwrap(),
            expected,
            max_relative = 1e-15
        );
    }

    #[test]
    fn miou_skips_classes_absent_from_both_sides() {
        // k_out = 3 but class 2 never appears on either side
        let map = map_from(vec![-1.0, -1.0, 1.0, 1.0], 2, 2, 1, vec![0, 1, 1, 1]);
        let mut head = sign_head();
        head.k_out = 3;
        head.w2 = vec![0.0, 1.0, 0.0];
        head.b2 = vec![0.0; 3];
        let pred = forward(&head, &featurize(&map)).unwrap();
        let expected = (0.5 + 2.0 / 3.0) / 2.0;
        assert_relative_eq!(
            miou(&pred, &[0, 1, 1, 1]).unwrap(),
            expected,
            max_relative = 1e-15
        );
    }

    #[test]
    fn miou_is_invariant_under_consistent_class_permutation() {
        let map = map_from(vec![-1.0, -1.0, 1.0, 1.0], 2, 2, 1, vec![0, 1, 1, 1]);
        let pred = forward(&sign_head(), &featurize(&map)).unwrap();
        let base = miou(&pred, &[0, 1, 1, 1]).unwrap();
        // swap classes 0 and 1 in both pred and labels: gate on -channel
        // so formerly-negative pixels light the class-1 logit instead
        let mut swapped_head = sign_head();
        swapped_head.w1 = vec![-1.0, 0.0];
        let swapped_pred = forward(&swapped_head, &featurize(&map)).unwrap();
        assert_eq!(swapped_pred.labels(), &[1, 1, 0, 0]);
        let swapped = miou(&swapped_pred, &[1, 0, 0, 0]).unwrap();
        assert_eq!(base, swapped);
    }
}
