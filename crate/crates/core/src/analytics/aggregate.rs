use super::labels::Label;
use super::metrics::Task;
use crate::error::{Error, Result};

/// Collapses one video's chunk scores into a video-level prediction.
///
/// Regression: mean chunk score. Classification: majority label (returned as
/// 0/1); a tied vote goes to the label whose chunks are more confident on
/// average, and a tie in confidence too goes to `Low`.
pub fn aggregate_video(chunk_scores: &[f64], task: Task) -> Result<f64> {
    if chunk_scores.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = chunk_scores.len() as f64;
    match task {
        Task::Regression => Ok(chunk_scores.iter().sum::<f64>() / n),
        Task::Classification => {
            let (mut high, mut low) = (0usize, 0usize);
            let (mut conf_high, mut conf_low) = (0.0, 0.0);
            for &s in chunk_scores {
                match Label::from_score(s) {
                    Label::High => {
                        high += 1;
                        conf_high += s;
                    }
                    Label::Low => {
                        low += 1;
                        conf_low += 1.0 - s;
                    }
                }
            }
            let label = if high != low {
                if high > low { Label::High } else { Label::Low }
            } else if conf_high / high.max(1) as f64 > conf_low / low.max(1) as f64 {
                Label::High
            } else {
                Label::Low
            };
            Ok(label.as_f64())
        }
    }
}
