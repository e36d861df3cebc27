use std::fmt::Write;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::image::{display_map, mse, psnr, ssim_with, to_unit, SsimConfig};
use crate::error::{Error, Result};

/// Which reconstruction is being scored against ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Variant {
    Input,
    Classic,
    Network,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Input, Variant::Classic, Variant::Network];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Input => "input",
            Variant::Classic => "classic",
            Variant::Network => "network",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub sample: String,
    pub variant: Variant,
    pub psnr: f64,
    pub ssim: f64,
    pub mse: f64,
}

/// dB display window: the top `range_db` decibels below each image set's
/// maximum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DisplayWindow {
    pub range_db: f64,
    pub ssim: SsimConfig,
}

impl Default for DisplayWindow {
    fn default() -> Self {
        Self {
            range_db: 60.0,
            ssim: SsimConfig::default(),
        }
    }
}

impl DisplayWindow {
    /// Maps a set of dB images that share one window, anchored at their
    /// common maximum, to [0, 1].
    pub fn map_volume(&self, images: &[&Array2<f64>]) -> Result<Vec<Array2<f64>>> {
        let top = images
            .iter()
            .flat_map(|m| m.iter())
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        if !top.is_finite() {
            return Err(Error::Numeric("display window over empty or non-finite images".into()));
        }
        images
            .iter()
            .map(|m| Ok(to_unit(&display_map(m, top - self.range_db, top)?)))
            .collect()
    }
}

/// One frame's dB images. `network` may be absent before a model exists,
/// but [`evaluate_volume`] needs it.
#[derive(Debug, Clone)]
pub struct EvalSample {
    pub id: String,
    pub ground_truth: Array2<f64>,
    pub input: Array2<f64>,
    pub classic: Array2<f64>,
    pub network: Option<Array2<f64>>,
}

/// Scores every variant of every frame of one volume. Each variant, and
/// the ground truth, is display-mapped against its own maximum over the
/// volume. Records come out frame by frame in [`Variant::ALL`] order.
pub fn evaluate_volume(samples: &[EvalSample], window: &DisplayWindow) -> Result<Vec<MetricsRecord>> {
    if samples.is_empty() {
        return Err(Error::Usage("no samples to evaluate".into()));
    }
    let mut networks = Vec::with_capacity(samples.len());
    for s in samples {
        networks.push(
            s.network
                .as_ref()
                .ok_or_else(|| Error::Usage(format!("sample {} has no network output", s.id)))?,
        );
    }
    let gt = window.map_volume(&samples.iter().map(|s| &s.ground_truth).collect::<Vec<_>>())?;
    let input = window.map_volume(&samples.iter().map(|s| &s.input).collect::<Vec<_>>())?;
    let classic = window.map_volume(&samples.iter().map(|s| &s.classic).collect::<Vec<_>>())?;
    let network = window.map_volume(&networks)?;
    let mut out = Vec::with_capacity(3 * samples.len());
    for (i, s) in samples.iter().enumerate() {
        for (variant, img) in Variant::ALL.into_iter().zip([&input[i], &classic[i], &network[i]]) {
            out.push(MetricsRecord {
                sample: s.id.clone(),
                variant,
                psnr: psnr(&gt[i], img, 1.0)?,
                ssim: ssim_with(&gt[i], img, 1.0, &window.ssim)?,
                mse: mse(&gt[i], img)?,
            });
        }
    }
    Ok(out)
}

pub const CSV_HEADER: &str = "sample,variant,psnr_db,ssim,mse";

fn number(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else {
        format!("{v}")
    }
}

pub fn metrics_csv(records: &[MetricsRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.sample,
            r.variant.as_str(),
            number(r.psnr),
            number(r.ssim),
            number(r.mse)
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariantSummary {
    pub variant: Variant,
    pub count: usize,
    pub psnr: f64,
    pub ssim: f64,
    pub mse: f64,
}

/// Per-variant means, in [`Variant::ALL`] order, skipping absent variants.
pub fn mean_by_variant(records: &[MetricsRecord]) -> Vec<VariantSummary> {
    Variant::ALL
        .into_iter()
        .filter_map(|v| {
            let rs: Vec<_> = records.iter().filter(|r| r.variant == v).collect();
            let n = rs.len();
            (n > 0).then(|| VariantSummary {
                variant: v,
                count: n,
                psnr: rs.iter().map(|r| r.psnr).sum::<f64>() / n as f64,
                ssim: rs.iter().map(|r| r.ssim).sum::<f64>() / n as f64,
                mse: rs.iter().map(|r| r.mse).sum::<f64>() / n as f64,
            })
        })
        .collect()
}
