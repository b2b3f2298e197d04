//! Statistical rejection of prompts naming objects absent from the image.
//!
//! For each object type, the mean predicted probability and the mean R, G, B
//! values inside the object region are modelled by four Beta distributions
//! fitted on valid training images. At test time each statistic of the
//! predicted region gets a one-sample K-S p-value against its Beta, and the
//! product of the four is compared with a cutoff.

mod beta;
mod ks;

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use beta::{beta_cdf, fit_beta, BetaParams, SAMPLE_CLAMP};
pub use ks::{kolmogorov_survival, ks_pvalue_against, ks_pvalue_from_statistic, ks_statistic};

use crate::error::{Error, Result};
use crate::grid::{binarize, masked_mean, same_shape, BinaryMask, ProbabilityMap, RgbImage};
use crate::io::json::{self, KeyOrder};

pub const DEFAULT_CUTOFF: f64 = 0.01;
pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// One-sample K-S p-value of `samples` against a Beta distribution.
pub fn ks_pvalue(samples: &[f64], params: &BetaParams) -> Result<f64> {
    ks_pvalue_against(samples, |x| beta_cdf(*params, x))
}

/// Region statistics of one image, all in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValiditySample {
    pub mean_prob: f64,
    pub mean_r: f64,
    pub mean_g: f64,
    pub mean_b: f64,
    /// The color statistics come from a single replicated gray channel.
    #[serde(default)]
    pub grayscale: bool,
}

fn region_statistics(map: &ProbabilityMap, image: &RgbImage, region: &BinaryMask) -> Result<Option<ValiditySample>> {
    same_shape(map.dims(), image.dims())?;
    same_shape(map.dims(), region.dims())?;
    if region.is_empty() {
        return Ok(None);
    }
    let [red, green, blue] = image.channels();
    let channel = |ch: &[u8]| masked_mean(region, |i| f64::from(ch[i]) / 255.0);
    Ok(Some(ValiditySample {
        mean_prob: masked_mean(region, |i| f64::from(map.values()[i]))?,
        mean_r: channel(red)?,
        mean_g: channel(green)?,
        mean_b: channel(blue)?,
        grayscale: image.is_grayscale(),
    }))
}

/// Statistics over the predicted region `map > threshold`.
///
/// Returns `Ok(None)` when nothing exceeds the threshold, i.e. no object was
/// predicted at all; [`validity_pvalue`] treats that as invalid.
pub fn extract_statistics(map: &ProbabilityMap, image: &RgbImage, threshold: f64) -> Result<Option<ValiditySample>> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::domain(format!("threshold {threshold} outside [0, 1]")));
    }
    region_statistics(map, image, &binarize(map, threshold))
}

/// The four fitted distributions of one object type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityModel {
    pub object_type: String,
    pub sample_count: usize,
    #[serde(rename = "prob")]
    pub prob_dist: BetaParams,
    #[serde(rename = "r")]
    pub r_dist: BetaParams,
    #[serde(rename = "g")]
    pub g_dist: BetaParams,
    #[serde(rename = "b")]
    pub b_dist: BetaParams,
}

impl ValidityModel {
    pub fn validate(&self) -> Result<()> {
        if self.sample_count < 2 {
            return Err(Error::domain(format!(
                "model for {:?} was fitted on {} samples, need at least 2",
                self.object_type, self.sample_count
            )));
        }
        for p in [self.prob_dist, self.r_dist, self.g_dist, self.b_dist] {
            BetaParams::new(p.alpha, p.beta)?;
        }
        Ok(())
    }

    /// JSON document with the fixed field order
    /// `object_type, sample_count, prob, r, g, b`.
    pub fn to_json(&self) -> Result<String> {
        Ok(json::render(&json::to_value(self)?, KeyOrder::AsIs))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(text).map_err(|e| Error::format("validity model", e.to_string()))?;
        model.validate()?;
        Ok(model)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Format { message, .. } => Error::format(path.display().to_string(), message),
            other => other,
        })
    }
}

/// Fits the four Beta distributions from per-image statistics.
pub fn fit_from_samples(object_type: &str, samples: &[ValiditySample]) -> Result<ValidityModel> {
    if samples.len() < 2 {
        return Err(Error::Fit(format!(
            "{object_type:?}: need at least 2 training images with objects, got {}",
            samples.len()
        )));
    }
    let fit = |name: &str, get: fn(&ValiditySample) -> f64| {
        let values: Vec<f64> = samples.iter().map(get).collect();
        fit_beta(&values).map_err(|e| Error::Fit(format!("{object_type:?} {name} channel: {e}")))
    };
    Ok(ValidityModel {
        object_type: object_type.to_string(),
        sample_count: samples.len(),
        prob_dist: fit("probability", |s| s.mean_prob)?,
        r_dist: fit("r", |s| s.mean_r)?,
        g_dist: fit("g", |s| s.mean_g)?,
        b_dist: fit("b", |s| s.mean_b)?,
    })
}

/// A training image: model output, pixels, and the gold object mask.
#[derive(Debug, Clone, Copy)]
pub struct TrainingImage<'a> {
    pub map: &'a ProbabilityMap,
    pub image: &'a RgbImage,
    pub gold: &'a BinaryMask,
}

/// Fits a model from training images, measuring each over its gold region.
/// Images whose gold mask is empty do not contain the object and are skipped.
pub fn fit_validity_model(training: &[TrainingImage<'_>], object_type: &str) -> Result<ValidityModel> {
    let stats: Vec<Option<ValiditySample>> = training
        .par_iter()
        .map(|t| region_statistics(t.map, t.image, t.gold))
        .collect::<Result<_>>()?;
    let samples: Vec<ValiditySample> = stats.into_iter().flatten().collect();
    fit_from_samples(object_type, &samples)
}

/// How grayscale images enter the color-channel tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GrayscalePolicy {
    /// Test the replicated gray value against all three channel models.
    #[default]
    Replicate,
    /// Skip the color tests (their p-values count as 1).
    SkipChannels,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidityOptions {
    pub cutoff: f64,
    pub grayscale: GrayscalePolicy,
}

impl Default for ValidityOptions {
    fn default() -> Self {
        Self {
            cutoff: DEFAULT_CUTOFF,
            grayscale: GrayscalePolicy::Replicate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValidityReport {
    pub p_prob: f64,
    pub p_r: f64,
    pub p_g: f64,
    pub p_b: f64,
    pub summary_p: f64,
    pub is_valid: bool,
    /// No pixel exceeded the threshold, so there was nothing to test.
    pub degenerate: bool,
}

impl ValidityReport {
    pub fn degenerate() -> Self {
        Self {
            p_prob: 0.0,
            p_r: 0.0,
            p_g: 0.0,
            p_b: 0.0,
            summary_p: 0.0,
            is_valid: false,
            degenerate: true,
        }
    }

    fn from_components(p: [f64; 4], cutoff: f64) -> Self {
        let summary_p = p.iter().product::<f64>();
        Self {
            p_prob: p[0],
            p_r: p[1],
            p_g: p[2],
            p_b: p[3],
            summary_p,
            is_valid: summary_p >= cutoff,
            degenerate: false,
        }
    }
}

/// Tests one image's statistics against a model; `None` means the
/// prediction was empty.
pub fn validity_pvalue(
    model: &ValidityModel,
    sample: Option<&ValiditySample>,
    options: &ValidityOptions,
) -> Result<ValidityReport> {
    model.validate()?;
    if !(0.0..=1.0).contains(&options.cutoff) {
        return Err(Error::domain(format!("cutoff {} outside [0, 1]", options.cutoff)));
    }
    let Some(sample) = sample else {
        return Ok(ValidityReport::degenerate());
    };
    let test = |x: f64, params: &BetaParams| ks_pvalue(&[x], params);
    let p_prob = test(sample.mean_prob, &model.prob_dist)?;
    let [p_r, p_g, p_b] = if sample.grayscale && options.grayscale == GrayscalePolicy::SkipChannels {
        [1.0; 3]
    } else {
        [
            test(sample.mean_r, &model.r_dist)?,
            test(sample.mean_g, &model.g_dist)?,
            test(sample.mean_b, &model.b_dist)?,
        ]
    };
    Ok(ValidityReport::from_components([p_prob, p_r, p_g, p_b], options.cutoff))
}

/// Extracts statistics from a test image and scores them in one step.
pub fn test_image(
    model: &ValidityModel,
    map: &ProbabilityMap,
    image: &RgbImage,
    threshold: f64,
    options: &ValidityOptions,
) -> Result<ValidityReport> {
    let sample = extract_statistics(map, image, threshold)?;
    validity_pvalue(model, sample.as_ref(), options)
}
