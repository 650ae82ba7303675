use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary trait class after median thresholding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "L")]
    Low,
    #[serde(rename = "H")]
    High,
}

impl Label {
    pub fn as_f64(self) -> f64 {
        match self {
            Label::Low => 0.0,
            Label::High => 1.0,
        }
    }

    /// `High` iff `score > 0.5`.
    pub fn from_score(score: f64) -> Label {
        if score > 0.5 {
            Label::High
        } else {
            Label::Low
        }
    }

    pub fn short(self) -> &'static str {
        match self {
            Label::Low => "L",
            Label::High => "H",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraitLabels {
    pub trait_name: String,
    pub scores: Vec<f64>,
    pub labels: Vec<Label>,
    pub median: f64,
}

pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyScores);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Ok(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// `High` iff score > threshold; scores equal to the threshold are `Low`.
pub fn binarize_with(scores: &[f64], threshold: f64) -> Vec<Label> {
    scores.iter().map(|&s| if s > threshold { Label::High } else { Label::Low }).collect()
}

/// Thresholds `scores` at their own median. Callers binarizing a test split
/// should reuse the training median through [`binarize_with`].
pub fn binarize_median(scores: &[f64], trait_name: &str) -> Result<TraitLabels> {
    if scores.is_empty() {
        return Err(Error::EmptyScores);
    }
    if scores.len() < 2 {
        return Err(Error::TooFewVideos { got: scores.len(), needed: 2 });
    }
    if let Some(s) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(Error::InvalidConfig(format!("trait score {s} outside [0, 1]")));
    }
    let m = median(scores)?;
    Ok(TraitLabels {
        trait_name: trait_name.to_string(),
        scores: scores.to_vec(),
        labels: binarize_with(scores, m),
        median: m,
    })
}
