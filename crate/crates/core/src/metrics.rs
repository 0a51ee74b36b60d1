//! Evaluation metric and training objectives as pure functions.
//!
//! Every reduction goes through [`compensated_sum`] in input order, so the
//! results do not depend on how callers schedule work.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::depthio::{dequantize_level, quantize_value, DepthMap, QuantizedDepth};
use crate::geometry::ProjectedPoint;

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("shape error: {0}")]
    Shape(String),
}

/// Neumaier-compensated sum, accumulated strictly in iteration order.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for x in values {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn compensated_mean<I: IntoIterator<Item = f64>>(values: I, n: usize) -> f64 {
    compensated_sum(values) / n as f64
}

// ---------------------------------------------------------------------------
// grids

/// Read access shared by depth maps and image grids. Samples are row-major
/// with channels interleaved.
pub trait Grid {
    fn width(&self) -> usize;
    fn height(&self) -> usize;
    fn channels(&self) -> usize;
    fn samples(&self) -> &[f64];
}

impl Grid for DepthMap {
    fn width(&self) -> usize {
        DepthMap::width(self)
    }
    fn height(&self) -> usize {
        DepthMap::height(self)
    }
    fn channels(&self) -> usize {
        1
    }
    fn samples(&self) -> &[f64] {
        self.values()
    }
}

/// Image with one or three interleaved channels, samples in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    width: usize,
    height: usize,
    channels: usize,
    values: Vec<f64>,
}

impl ImageGrid {
    pub fn new(
        width: usize,
        height: usize,
        channels: usize,
        values: Vec<f64>,
    ) -> Result<Self, MetricsError> {
        if channels != 1 && channels != 3 {
            return Err(MetricsError::Shape(format!(
                "{channels} channels; expected 1 or 3"
            )));
        }
        if values.len() != width * height * channels {
            return Err(MetricsError::Shape(format!(
                "{} samples for {width}x{height}x{channels}",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(MetricsError::Domain(format!("sample {v} outside [0, 1]")));
        }
        Ok(Self {
            width,
            height,
            channels,
            values,
        })
    }

    pub fn filled(
        width: usize,
        height: usize,
        channels: usize,
        value: f64,
    ) -> Result<Self, MetricsError> {
        Self::new(
            width,
            height,
            channels,
            vec![value; width * height * channels],
        )
    }

    /// Single-channel grid holding `min(depth, max_range) / max_range`.
    pub fn from_depth(depth: &DepthMap, max_range: f64) -> Result<Self, MetricsError> {
        if !(max_range.is_finite() && max_range > 0.0) {
            return Err(MetricsError::Domain(format!(
                "max_range {max_range} must be positive"
            )));
        }
        let values = depth
            .values()
            .iter()
            .map(|v| v.min(max_range) / max_range)
            .collect();
        Self::new(depth.width(), depth.height(), 1, values)
    }

    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn channels(&self) -> usize {
        self.channels
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Pixel `(col, row)` as a slice of `channels` samples.
    pub fn pixel(&self, col: usize, row: usize) -> &[f64] {
        let i = (row * self.width + col) * self.channels;
        &self.values[i..i + self.channels]
    }
}

impl Grid for ImageGrid {
    fn width(&self) -> usize {
        self.width
    }
    fn height(&self) -> usize {
        self.height
    }
    fn channels(&self) -> usize {
        self.channels
    }
    fn samples(&self) -> &[f64] {
        &self.values
    }
}

fn check_same_shape<A: Grid + ?Sized, B: Grid + ?Sized>(a: &A, b: &B) -> Result<(), MetricsError> {
    let sa = (a.width(), a.height(), a.channels());
    let sb = (b.width(), b.height(), b.channels());
    if sa != sb {
        return Err(MetricsError::Shape(format!(
            "{}x{}x{} vs {}x{}x{}",
            sa.0, sa.1, sa.2, sb.0, sb.1, sb.2
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// relative distance error

/// Unit of a [`PairedDepthSamples`] set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleSpace {
    /// 8-bit levels, 0..=255.
    Grayscale,
    /// Meters.
    Metric,
}

impl fmt::Display for SampleSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SampleSpace::Grayscale => "grayscale",
            SampleSpace::Metric => "metric",
        })
    }
}

impl FromStr for SampleSpace {
    type Err = MetricsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "grayscale" => Ok(SampleSpace::Grayscale),
            "metric" => Ok(SampleSpace::Metric),
            other => Err(MetricsError::Domain(format!(
                "unknown comparison space {other:?}"
            ))),
        }
    }
}

/// `(reference, predicted)` pairs; references are strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedDepthSamples {
    pairs: Vec<(f64, f64)>,
    space: SampleSpace,
}

impl PairedDepthSamples {
    pub fn new(pairs: Vec<(f64, f64)>, space: SampleSpace) -> Result<Self, MetricsError> {
        for (i, &(r, p)) in pairs.iter().enumerate() {
            if !(r.is_finite() && r > 0.0) {
                return Err(MetricsError::Domain(format!(
                    "pair {i}: reference {r} must be > 0"
                )));
            }
            if !(p.is_finite() && p >= 0.0) {
                return Err(MetricsError::Domain(format!(
                    "pair {i}: prediction {p} must be >= 0"
                )));
            }
        }
        Ok(Self { pairs, space })
    }

    pub fn pairs(&self) -> &[(f64, f64)] {
        &self.pairs
    }

    pub fn space(&self) -> SampleSpace {
        self.space
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Mean of `|y - ŷ| / y` over all pairs.
pub fn rel_error(samples: &PairedDepthSamples) -> Result<f64, MetricsError> {
    if samples.is_empty() {
        return Err(MetricsError::Domain(
            "relative error of an empty sample set".into(),
        ));
    }
    Ok(compensated_mean(
        samples.pairs.iter().map(|&(y, yhat)| (y - yhat).abs() / y),
        samples.len(),
    ))
}

/// Pairs each projected LiDAR return with the prediction pixel it lands in
/// (floor of `u`, `v`). The LiDAR depth is truncated at `max_range`; in
/// grayscale space it is then quantized, in metric space the prediction is
/// dequantized instead. Pairs whose reference is zero are dropped.
pub fn pair_lidar_with_prediction(
    pred: &QuantizedDepth,
    projections: &[ProjectedPoint],
    max_range: f64,
    space: SampleSpace,
) -> Result<PairedDepthSamples, MetricsError> {
    if !(max_range.is_finite() && max_range > 0.0) {
        return Err(MetricsError::Domain(format!(
            "max_range {max_range} must be positive"
        )));
    }
    let mut pairs = Vec::with_capacity(projections.len());
    for p in projections {
        if !(p.u >= 0.0 && p.v >= 0.0) {
            return Err(MetricsError::Shape(format!(
                "projection ({}, {}) is off-image",
                p.u, p.v
            )));
        }
        let (col, row) = p.pixel();
        if col >= pred.width() || row >= pred.height() {
            return Err(MetricsError::Shape(format!(
                "projection ({}, {}) outside {}x{} prediction",
                p.u,
                p.v,
                pred.width(),
                pred.height()
            )));
        }
        let level = pred.level(col, row);
        let (reference, predicted) = match space {
            SampleSpace::Grayscale => (quantize_value(p.d, max_range) as f64, level as f64),
            SampleSpace::Metric => (
                p.d.min(max_range),
                dequantize_level(level, pred.max_range()),
            ),
        };
        if reference > 0.0 {
            pairs.push((reference, predicted));
        }
    }
    PairedDepthSamples::new(pairs, space)
}

// ---------------------------------------------------------------------------
// depth-estimation loss

/// Mean absolute per-sample difference.
pub fn l1_depth_loss<A: Grid + ?Sized, B: Grid + ?Sized>(
    y: &A,
    yhat: &B,
) -> Result<f64, MetricsError> {
    check_same_shape(y, yhat)?;
    let n = y.samples().len();
    if n == 0 {
        return Err(MetricsError::Shape("empty image".into()));
    }
    Ok(compensated_mean(
        y.samples()
            .iter()
            .zip(yhat.samples())
            .map(|(a, b)| (a - b).abs()),
        n,
    ))
}

/// Mean |∂x| + mean |∂y| of the forward differences of `y - ŷ`. The last
/// column has no x difference and the last row no y difference.
pub fn gradient_loss<A: Grid + ?Sized, B: Grid + ?Sized>(
    y: &A,
    yhat: &B,
) -> Result<f64, MetricsError> {
    check_same_shape(y, yhat)?;
    let (w, h, ch) = (y.width(), y.height(), y.channels());
    if w < 2 || h < 2 {
        return Err(MetricsError::Shape(format!(
            "gradient loss needs at least 2x2, got {w}x{h}"
        )));
    }
    let (a, b) = (y.samples(), yhat.samples());
    let diff = |col: usize, row: usize, k: usize| {
        let i = (row * w + col) * ch + k;
        a[i] - b[i]
    };
    let gx = (0..h).flat_map(|row| {
        (0..w - 1).flat_map(move |col| {
            (0..ch).map(move |k| (diff(col + 1, row, k) - diff(col, row, k)).abs())
        })
    });
    let gy = (0..h - 1).flat_map(|row| {
        (0..w).flat_map(move |col| {
            (0..ch).map(move |k| (diff(col, row + 1, k) - diff(col, row, k)).abs())
        })
    });
    Ok(compensated_mean(gx, h * (w - 1) * ch) + compensated_mean(gy, (h - 1) * w * ch))
}

/// Gaussian-window SSIM parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimConfig {
    pub window: usize,
    pub sigma: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Default for SsimConfig {
    fn default() -> Self {
        Self::for_dynamic_range(1.0)
    }
}

impl SsimConfig {
    /// 11-tap window, σ = 1.5, c1 = (0.01 L)², c2 = (0.03 L)².
    pub fn for_dynamic_range(range: f64) -> Self {
        Self {
            window: 11,
            sigma: 1.5,
            c1: (0.01 * range).powi(2),
            c2: (0.03 * range).powi(2),
        }
    }

    pub fn validate(&self) -> Result<(), MetricsError> {
        if self.window < 3 || self.window.is_multiple_of(2) {
            return Err(MetricsError::Domain(format!(
                "SSIM window {} must be odd and >= 3",
                self.window
            )));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(MetricsError::Domain(format!(
                "SSIM sigma {} must be positive",
                self.sigma
            )));
        }
        if !(self.c1 > 0.0 && self.c2 > 0.0 && self.c1.is_finite() && self.c2.is_finite()) {
            return Err(MetricsError::Domain(
                "SSIM constants must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Normalized 1-D Gaussian taps.
    pub fn kernel(&self) -> Vec<f64> {
        let r = (self.window / 2) as f64;
        let taps: Vec<f64> = (0..self.window)
            .map(|i| (-((i as f64 - r).powi(2)) / (2.0 * self.sigma * self.sigma)).exp())
            .collect();
        let total: f64 = taps.iter().sum();
        taps.into_iter().map(|t| t / total).collect()
    }
}

/// Separable "valid" filtering of one channel: output is
/// `(w - k + 1) x (h - k + 1)`.
fn filter_valid(src: &[f64], w: usize, h: usize, kernel: &[f64]) -> Vec<f64> {
    let k = kernel.len();
    let ow = w - k + 1;
    let oh = h - k + 1;
    let mut horiz = vec![0.0; ow * h];
    for row in 0..h {
        let line = &src[row * w..(row + 1) * w];
        for col in 0..ow {
            horiz[row * ow + col] = kernel
                .iter()
                .zip(&line[col..col + k])
                .map(|(t, v)| t * v)
                .sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for row in 0..oh {
        for col in 0..ow {
            out[row * ow + col] = kernel
                .iter()
                .enumerate()
                .map(|(j, t)| t * horiz[(row + j) * ow + col])
                .sum();
        }
    }
    out
}

/// Local SSIM values, one plane per channel, each
/// `(width - window + 1) x (height - window + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SsimMap {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    /// Channel-major: all of channel 0, then channel 1, ...
    pub values: Vec<f64>,
}

impl SsimMap {
    pub fn get(&self, col: usize, row: usize, channel: usize) -> f64 {
        self.values[(channel * self.height + row) * self.width + col]
    }

    pub fn mean(&self) -> f64 {
        compensated_mean(self.values.iter().copied(), self.values.len())
    }
}

pub fn ssim_map<A: Grid + ?Sized, B: Grid + ?Sized>(
    a: &A,
    b: &B,
    cfg: &SsimConfig,
) -> Result<SsimMap, MetricsError> {
    cfg.validate()?;
    check_same_shape(a, b)?;
    let (w, h, ch) = (a.width(), a.height(), a.channels());
    if w < cfg.window || h < cfg.window {
        return Err(MetricsError::Shape(format!(
            "{w}x{h} image is smaller than the {0}x{0} SSIM window",
            cfg.window
        )));
    }
    let kernel = cfg.kernel();
    let plane =
        |src: &[f64], k: usize| -> Vec<f64> { (0..w * h).map(|i| src[i * ch + k]).collect() };

    let mut values = Vec::with_capacity((w - cfg.window + 1) * (h - cfg.window + 1) * ch);
    for k in 0..ch {
        let x = plane(a.samples(), k);
        let y = plane(b.samples(), k);
        let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
        let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
        let xy: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p * q).collect();
        let mu_x = filter_valid(&x, w, h, &kernel);
        let mu_y = filter_valid(&y, w, h, &kernel);
        let e_xx = filter_valid(&xx, w, h, &kernel);
        let e_yy = filter_valid(&yy, w, h, &kernel);
        let e_xy = filter_valid(&xy, w, h, &kernel);
        for i in 0..mu_x.len() {
            let (mx, my) = (mu_x[i], mu_y[i]);
            let var_x = e_xx[i] - mx * mx;
            let var_y = e_yy[i] - my * my;
            let cov = e_xy[i] - mx * my;
            let num = (2.0 * mx * my + cfg.c1) * (2.0 * cov + cfg.c2);
            let den = (mx * mx + my * my + cfg.c1) * (var_x + var_y + cfg.c2);
            values.push(num / den);
        }
    }
    Ok(SsimMap {
        width: w - cfg.window + 1,
        height: h - cfg.window + 1,
        channels: ch,
        values,
    })
}

/// Mean local SSIM over all fully-contained window positions and channels.
pub fn ssim<A: Grid + ?Sized, B: Grid + ?Sized>(
    a: &A,
    b: &B,
    cfg: &SsimConfig,
) -> Result<f64, MetricsError> {
    Ok(ssim_map(a, b, cfg)?.mean())
}

/// `(1 - ssim) / 2`.
pub fn ssim_loss<A: Grid + ?Sized, B: Grid + ?Sized>(
    a: &A,
    b: &B,
    cfg: &SsimConfig,
) -> Result<f64, MetricsError> {
    Ok((1.0 - ssim(a, b, cfg)?) / 2.0)
}

/// Relative weights of the loss terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_depth: f64,
    pub lambda_cyc: f64,
    pub lambda_idt: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_depth: 0.1,
            lambda_cyc: 10.0,
            lambda_idt: 5.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<(), MetricsError> {
        for (name, v) in [
            ("lambda_depth", self.lambda_depth),
            ("lambda_cyc", self.lambda_cyc),
            ("lambda_idt", self.lambda_idt),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(MetricsError::Domain(format!(
                    "{name} = {v} must be finite and >= 0"
                )));
            }
        }
        Ok(())
    }
}

/// The three depth-loss terms and their weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DenseDepthLoss {
    pub l1: f64,
    pub grad: f64,
    pub ssim_loss: f64,
    pub composite: f64,
}

impl DenseDepthLoss {
    pub fn from_components(l1: f64, grad: f64, ssim_loss: f64, w: &LossWeights) -> Self {
        Self {
            l1,
            grad,
            ssim_loss,
            composite: w.lambda_depth * l1 + grad + ssim_loss,
        }
    }
}

pub fn densedepth_loss<A: Grid + ?Sized, B: Grid + ?Sized>(
    y: &A,
    yhat: &B,
    w: &LossWeights,
    cfg: &SsimConfig,
) -> Result<DenseDepthLoss, MetricsError> {
    w.validate()?;
    Ok(DenseDepthLoss::from_components(
        l1_depth_loss(y, yhat)?,
        gradient_loss(y, yhat)?,
        ssim_loss(y, yhat, cfg)?,
        w,
    ))
}

// ---------------------------------------------------------------------------
// CycleGAN objective

/// Discriminator outputs, each strictly inside (0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMap {
    values: Vec<f64>,
}

impl ScoreMap {
    pub fn new(values: Vec<f64>) -> Result<Self, MetricsError> {
        if let Some(v) = values.iter().find(|v| !(**v > 0.0 && **v < 1.0)) {
            return Err(MetricsError::Domain(format!("score {v} outside (0, 1)")));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// `mean(ln D(real)) + mean(ln(1 - D(fake)))`; never positive.
pub fn adversarial_loss(
    real_scores: &ScoreMap,
    fake_scores: &ScoreMap,
) -> Result<f64, MetricsError> {
    if real_scores.values.is_empty() || fake_scores.values.is_empty() {
        return Err(MetricsError::Domain(
            "adversarial loss of an empty score map".into(),
        ));
    }
    let real = compensated_mean(
        real_scores.values.iter().map(|s| s.ln()),
        real_scores.values.len(),
    );
    let fake = compensated_mean(
        fake_scores.values.iter().map(|s| (-s).ln_1p()),
        fake_scores.values.len(),
    );
    Ok(real + fake)
}

/// Per-pixel mean absolute difference over a whole batch.
fn batch_l1(a: &[ImageGrid], b: &[ImageGrid]) -> Result<f64, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::Shape(format!(
            "batch sizes {} and {} differ",
            a.len(),
            b.len()
        )));
    }
    for (x, y) in a.iter().zip(b) {
        check_same_shape(x, y)?;
    }
    let n: usize = a.iter().map(|g| g.values.len()).sum();
    if n == 0 {
        return Err(MetricsError::Shape("empty batch".into()));
    }
    let diffs = a
        .iter()
        .zip(b)
        .flat_map(|(x, y)| x.values.iter().zip(&y.values).map(|(p, q)| (p - q).abs()));
    Ok(compensated_mean(diffs, n))
}

/// Forward plus backward reconstruction error, `F(G(x))` vs `x` and
/// `G(F(y))` vs `y`.
pub fn cycle_loss(
    x: &[ImageGrid],
    x_reconstructed: &[ImageGrid],
    y: &[ImageGrid],
    y_reconstructed: &[ImageGrid],
) -> Result<f64, MetricsError> {
    Ok(batch_l1(x_reconstructed, x)? + batch_l1(y_reconstructed, y)?)
}

/// Penalty for each generator altering images already in its target domain.
pub fn identity_loss(
    y: &[ImageGrid],
    g_of_y: &[ImageGrid],
    x: &[ImageGrid],
    f_of_x: &[ImageGrid],
) -> Result<f64, MetricsError> {
    Ok(batch_l1(g_of_y, y)? + batch_l1(f_of_x, x)?)
}

pub fn cyclegan_objective(adv_g: f64, adv_f: f64, cyc: f64, idt: f64, w: &LossWeights) -> f64 {
    adv_g + adv_f + w.lambda_cyc * cyc + w.lambda_idt * idt
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn grid(w: usize, h: usize, v: Vec<f64>) -> ImageGrid {
        ImageGrid::new(w, h, 1, v).unwrap()
    }

    fn samples(p: &[(f64, f64)]) -> PairedDepthSamples {
        PairedDepthSamples::new(p.to_vec(), SampleSpace::Metric).unwrap()
    }

    #[test]
    fn compensated_sum_recovers_cancelled_terms() {
        assert_eq!(compensated_sum([1.0, 1e100, 1.0, -1e100]), 2.0);
        assert_eq!(compensated_sum(std::iter::empty()), 0.0);
    }

    #[test]
    fn rel_error_examples() {
        assert_eq!(rel_error(&samples(&[(3.0, 3.0), (1.0, 1.0)])).unwrap(), 0.0);
        assert_eq!(rel_error(&samples(&[(2.0, 1.0)])).unwrap(), 0.5);
        assert_eq!(
            rel_error(&samples(&[(2.0, 1.0), (4.0, 5.0)])).unwrap(),
            0.375
        );
        assert!(matches!(
            rel_error(&samples(&[])),
            Err(MetricsError::Domain(_))
        ));
    }

    #[test]
    fn samples_reject_invalid_pairs() {
        assert!(PairedDepthSamples::new(vec![(0.0, 1.0)], SampleSpace::Metric).is_err());
        assert!(PairedDepthSamples::new(vec![(1.0, -1.0)], SampleSpace::Metric).is_err());
        assert!(PairedDepthSamples::new(vec![(f64::NAN, 1.0)], SampleSpace::Metric).is_err());
    }

    #[test]
    fn pairing_uses_floor_pixel() {
        let mut levels = vec![0u8; 20 * 5];
        levels[3 * 20 + 10] = 77;
        let pred = QuantizedDepth::new(20, 5, levels, 10.0).unwrap();
        let pp = ProjectedPoint {
            u: 10.2,
            v: 3.9,
            d: 4.0,
        };
        let s = pair_lidar_with_prediction(&pred, &[pp], 10.0, SampleSpace::Grayscale).unwrap();
        assert_eq!(s.pairs(), &[(quantize_value(4.0, 10.0) as f64, 77.0)]);
    }

    #[test]
    fn pairing_truncates_and_drops_zero_references() {
        let pred = QuantizedDepth::new(2, 2, vec![255; 4], 10.0).unwrap();
        let far = ProjectedPoint {
            u: 0.5,
            v: 0.5,
            d: 12.0,
        };
        let tiny = ProjectedPoint {
            u: 1.5,
            v: 1.5,
            d: 0.001,
        };
        let s =
            pair_lidar_with_prediction(&pred, &[far, tiny], 10.0, SampleSpace::Grayscale).unwrap();
        assert_eq!(s.pairs(), &[(255.0, 255.0)]);
        assert_eq!(rel_error(&s).unwrap(), 0.0);
        let m = pair_lidar_with_prediction(&pred, &[far], 10.0, SampleSpace::Metric).unwrap();
        assert_eq!(m.pairs(), &[(10.0, 10.0)]);
        let off = ProjectedPoint {
            u: 2.0,
            v: 0.0,
            d: 1.0,
        };
        assert!(pair_lidar_with_prediction(&pred, &[off], 10.0, SampleSpace::Metric).is_err());
    }

    #[test]
    fn l1_examples() {
        let a = grid(2, 1, vec![0.0, 1.0]);
        let b = grid(2, 1, vec![1.0, 1.0]);
        assert_eq!(l1_depth_loss(&a, &a).unwrap(), 0.0);
        assert_eq!(l1_depth_loss(&a, &b).unwrap(), 0.5);
        assert!(matches!(
            l1_depth_loss(&a, &grid(1, 2, vec![0.0, 0.0])),
            Err(MetricsError::Shape(_))
        ));
    }

    #[test]
    fn gradient_loss_examples() {
        let c1 = grid(3, 3, vec![0.2; 9]);
        let c2 = grid(3, 3, vec![0.7; 9]);
        assert_eq!(gradient_loss(&c1, &c2).unwrap(), 0.0);
        // y - ŷ is a horizontal ramp with slope 0.1 -> |g_x| = 0.1 everywhere, g_y = 0
        let ramp: Vec<f64> = (0..4 * 3).map(|i| 0.1 * (i % 4) as f64).collect();
        let y = grid(4, 3, ramp);
        let zero = grid(4, 3, vec![0.0; 12]);
        assert_abs_diff_eq!(gradient_loss(&y, &zero).unwrap(), 0.1, epsilon = 1e-15);
        assert!(matches!(
            gradient_loss(&grid(1, 3, vec![0.0; 3]), &grid(1, 3, vec![0.0; 3])),
            Err(MetricsError::Shape(_))
        ));
    }

    #[test]
    fn ssim_constant_images() {
        let cfg = SsimConfig::default();
        let zeros = grid(11, 11, vec![0.0; 121]);
        let ones = grid(11, 11, vec![1.0; 121]);
        // means 0 and 1, zero variance: (c1 / (1 + c1)) · (c2 / c2)
        let expected = cfg.c1 / (1.0 + cfg.c1);
        assert_abs_diff_eq!(
            ssim(&zeros, &ones, &cfg).unwrap(),
            expected,
            epsilon = 1e-15
        );
        assert_eq!(ssim(&ones, &ones, &cfg).unwrap(), 1.0);
        assert_eq!(ssim_loss(&ones, &ones, &cfg).unwrap(), 0.0);
        assert!(matches!(
            ssim(&grid(5, 5, vec![0.0; 25]), &grid(5, 5, vec![0.0; 25]), &cfg),
            Err(MetricsError::Shape(_))
        ));
    }

    #[test]
    fn ssim_config_validation() {
        let even = SsimConfig {
            window: 4,
            ..SsimConfig::default()
        };
        assert!(even.validate().is_err());
        let no_c2 = SsimConfig {
            window: 7,
            c2: 0.0,
            ..SsimConfig::default()
        };
        assert!(no_c2.validate().is_err());
        let k = SsimConfig::default().kernel();
        assert_abs_diff_eq!(k.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        assert_eq!(k[0], k[10]);
    }

    #[test]
    fn densedepth_combination() {
        let w = LossWeights::default();
        let l = DenseDepthLoss::from_components(0.2, 0.1, 0.05, &w);
        assert_abs_diff_eq!(l.composite, 0.17, epsilon = 1e-12);
        let y = grid(11, 11, (0..121).map(|i| (i as f64) / 121.0).collect());
        let l = densedepth_loss(&y, &y, &w, &SsimConfig::default()).unwrap();
        assert_eq!(l.composite, 0.0);
    }

    #[test]
    fn adversarial_examples() {
        let half = ScoreMap::new(vec![0.5; 7]).unwrap();
        assert_abs_diff_eq!(
            adversarial_loss(&half, &half).unwrap(),
            -1.386294,
            epsilon = 1e-6
        );
        let real = ScoreMap::new(vec![1.0 - 1e-12]).unwrap();
        let fake = ScoreMap::new(vec![1e-12]).unwrap();
        let v = adversarial_loss(&real, &fake).unwrap();
        assert!(v < 0.0 && v > -1e-10);
        assert!(ScoreMap::new(vec![1.0]).is_err());
        assert!(ScoreMap::new(vec![0.0]).is_err());
        let empty = ScoreMap::new(vec![]).unwrap();
        assert!(matches!(
            adversarial_loss(&empty, &half),
            Err(MetricsError::Domain(_))
        ));
    }

    #[test]
    fn cycle_and_identity_examples() {
        let x = vec![grid(2, 2, vec![0.1, 0.2, 0.3, 0.4])];
        let x_shift = vec![grid(2, 2, vec![0.6, 0.7, 0.8, 0.9])];
        let y = vec![
            grid(2, 2, vec![0.0, 0.5, 0.5, 0.0]),
            grid(2, 2, vec![0.25; 4]),
        ];
        assert_eq!(cycle_loss(&x, &x, &y, &y).unwrap(), 0.0);
        assert_abs_diff_eq!(
            cycle_loss(&x, &x_shift, &y, &y).unwrap(),
            0.5,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            cycle_loss(&y, &y, &x, &x_shift).unwrap(),
            0.5,
            epsilon = 1e-15
        );

        let y_shift: Vec<ImageGrid> = y
            .iter()
            .map(|g| grid(2, 2, g.values().iter().map(|v| v + 0.25).collect()))
            .collect();
        assert_abs_diff_eq!(
            identity_loss(&y, &y_shift, &x, &x).unwrap(),
            0.25,
            epsilon = 1e-15
        );
        assert_eq!(
            identity_loss(&y, &y_shift, &x, &x).unwrap(),
            cycle_loss(&y, &y_shift, &x, &x).unwrap()
        );
        assert!(cycle_loss(&x, &y, &y, &y).is_err());
        assert!(cycle_loss(&[], &[], &y, &y).is_err());
    }

    #[test]
    fn cyclegan_objective_examples() {
        let w = LossWeights::default();
        assert_eq!(cyclegan_objective(0.0, 0.0, 0.0, 0.0, &w), 0.0);
        assert_abs_diff_eq!(
            cyclegan_objective(-1.0, -1.0, 0.2, 0.1, &w),
            0.5,
            epsilon = 1e-12
        );
        let doubled = LossWeights {
            lambda_cyc: 20.0,
            ..w
        };
        let base = cyclegan_objective(0.0, 0.0, 0.2, 0.0, &w);
        assert_eq!(cyclegan_objective(0.0, 0.0, 0.2, 0.0, &doubled), 2.0 * base);
    }

    #[test]
    fn image_grid_validation() {
        assert!(ImageGrid::new(1, 1, 2, vec![0.0, 0.0]).is_err());
        assert!(ImageGrid::new(1, 1, 1, vec![1.5]).is_err());
        assert!(ImageGrid::new(2, 1, 1, vec![0.5]).is_err());
        let d = DepthMap::new(2, 1, vec![5.0, 20.0]).unwrap();
        assert_eq!(
            ImageGrid::from_depth(&d, 10.0).unwrap().values(),
            &[0.5, 1.0]
        );
    }

    #[test]
    fn sample_space_parsing() {
        assert_eq!(
            "metric".parse::<SampleSpace>().unwrap(),
            SampleSpace::Metric
        );
        assert_eq!(SampleSpace::Grayscale.to_string(), "grayscale");
        assert!("meters".parse::<SampleSpace>().is_err());
    }
}
