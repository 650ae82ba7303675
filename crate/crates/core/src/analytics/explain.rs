//! Which kinemes and dominant AUs characterise the highest- and
//! lowest-scoring videos for a trait.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::labels::Label;
use crate::action_units::{AU_CODES, AU_COUNT};
use crate::error::{Error, Result};

pub const TOP_KINEMES: usize = 4;
pub const TOP_AUS: usize = 5;
pub const MIN_VIDEOS: usize = 10;

/// One encoded video: its kineme symbols (1-based), per-window AU dominance
/// flags and its score for the trait being explained.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplainVideo {
    pub video_id: String,
    pub score: f64,
    pub kinemes: Vec<usize>,
    pub aus: Vec<[u8; AU_COUNT]>,
}

/// Linear-interpolation sample quantile (Hyndman–Fan type 7).
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// One report row: a trait at one end of the score range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainRow {
    pub trait_name: String,
    pub label: Label,
    pub video_ids: Vec<String>,
    pub threshold: f64,
    /// `(kineme, count)` for every kineme, most frequent first.
    pub kineme_ranking: Vec<(usize, usize)>,
    /// `(AU code, windows where it is dominant)`, most frequent first.
    pub au_ranking: Vec<(u8, usize)>,
    pub total_windows: usize,
}

impl ExplainRow {
    pub fn top_kinemes(&self) -> Vec<usize> {
        self.kineme_ranking.iter().take(TOP_KINEMES).map(|&(s, _)| s).collect()
    }

    pub fn top_aus(&self) -> Vec<u8> {
        self.au_ranking.iter().take(TOP_AUS).map(|&(a, _)| a).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainReport {
    pub percentile: f64,
    pub rows: Vec<ExplainRow>,
}

fn rank<T: Copy>(counts: impl Iterator<Item = (T, usize)>) -> Vec<(T, usize)> {
    let mut v: Vec<(T, usize)> = counts.collect();
    // stable sort keeps the symbol order among equal counts
    v.sort_by_key(|e| std::cmp::Reverse(e.1));
    v
}

fn build_row(trait_name: &str, label: Label, threshold: f64, set: &[&ExplainVideo], k: usize) -> Result<ExplainRow> {
    let mut kin = vec![0usize; k];
    let mut au = [0usize; AU_COUNT];
    let mut total = 0;
    for v in set {
        for &s in &v.kinemes {
            if s == 0 || s > k {
                return Err(Error::SymbolOutOfRange { symbol: s, k });
            }
            kin[s - 1] += 1;
        }
        total += v.kinemes.len();
        for w in &v.aus {
            for (c, &d) in au.iter_mut().zip(w) {
                *c += d as usize;
            }
        }
    }
    Ok(ExplainRow {
        trait_name: trait_name.to_string(),
        label,
        video_ids: set.iter().map(|v| v.video_id.clone()).collect(),
        threshold,
        kineme_ranking: rank(kin.into_iter().enumerate().map(|(i, c)| (i + 1, c))),
        au_ranking: rank(AU_CODES.iter().copied().zip(au)),
        total_windows: total,
    })
}

/// Ranks kinemes and AUs within the top and bottom `p` percent of videos.
///
/// The high set holds videos scoring at or above the `1 − p/100` quantile,
/// the low set those at or below the `p/100` quantile. Returns the `High`
/// row followed by the `Low` row.
pub fn percentile_explain(videos: &[ExplainVideo], trait_name: &str, p: f64, k: usize) -> Result<[ExplainRow; 2]> {
    if videos.len() < MIN_VIDEOS {
        return Err(Error::TooFewVideos { got: videos.len(), needed: MIN_VIDEOS });
    }
    if !(p > 0.0 && p <= 50.0) {
        return Err(Error::InvalidConfig(format!("percentile must lie in (0, 50], got {p}")));
    }
    let mut sorted: Vec<f64> = videos.iter().map(|v| v.score).collect();
    sorted.sort_by(f64::total_cmp);
    let hi_t = quantile(&sorted, 1.0 - p / 100.0);
    let lo_t = quantile(&sorted, p / 100.0);
    let high: Vec<&ExplainVideo> = videos.iter().filter(|v| v.score >= hi_t).collect();
    let low: Vec<&ExplainVideo> = videos.iter().filter(|v| v.score <= lo_t).collect();
    Ok([build_row(trait_name, Label::High, hi_t, &high, k)?, build_row(trait_name, Label::Low, lo_t, &low, k)?])
}

impl ExplainReport {
    pub const CSV_HEADER: &'static str = "trait,label,kinemes,aus,videos,windows";

    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::CSV_HEADER);
        for r in &self.rows {
            let join = |v: Vec<String>| v.join(" ");
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.trait_name,
                r.label.short(),
                join(r.top_kinemes().iter().map(|s| s.to_string()).collect()),
                join(r.top_aus().iter().map(|s| s.to_string()).collect()),
                r.video_ids.len(),
                r.total_windows
            );
        }
        out
    }

    /// Text table: one line per trait and end, e.g. `A(H) | 3, 8, 10, 16 | 7, 12, 14, 25, 26`.
    pub fn to_text(&self) -> String {
        let mut out = format!("{:<8}| {:<22}| {}\n", "Trait", "Kinemes", "Action Units");
        for r in &self.rows {
            let kin: Vec<String> = r.top_kinemes().iter().map(|s| s.to_string()).collect();
            let aus: Vec<String> = r.top_aus().iter().map(|s| s.to_string()).collect();
            let name = format!("{}({})", r.trait_name, r.label.short());
            let _ = writeln!(out, "{:<8}| {:<22}| {}", name, kin.join(", "), aus.join(", "));
        }
        out
    }
}
