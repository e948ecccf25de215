use serde::{Deserialize, Serialize};

use super::ap::mean_average_precision;
use super::train::{prepare_scenes, ClipView};
use crate::error::Result;
use crate::model::Model;
use crate::synth::Dataset;
use crate::topology::ActionCatalog;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionAp {
    pub action: String,
    pub positives: usize,
    /// `None` when the action has no positives in the evaluated clips.
    pub ap: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Free-form label, usually the variant or ablation value.
    pub name: String,
    pub clips: usize,
    pub per_action: Vec<ActionAp>,
    /// Mean AP over actions with at least one positive.
    pub map: f64,
    /// Actions left out of the mean.
    pub excluded: Vec<String>,
}

impl EvalReport {
    pub fn from_scores(name: impl Into<String>, actions: &[String], scores: &[Vec<f64>], labels: &[Vec<u8>]) -> Self {
        let (per, map) = mean_average_precision(scores, labels, actions.len());
        let per_action: Vec<ActionAp> = per
            .iter()
            .enumerate()
            .map(|(a, &ap)| ActionAp {
                action: actions[a].clone(),
                positives: labels.iter().filter(|l| l[a] == 1).count(),
                ap,
            })
            .collect();
        let excluded = per_action.iter().filter(|r| r.ap.is_none()).map(|r| r.action.clone()).collect();
        Self { name: name.into(), clips: scores.len(), per_action, map, excluded }
    }

    /// `action,positives,ap` rows followed by a `mAP` row; undefined APs are empty.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("action,positives,ap\n");
        for r in &self.per_action {
            let ap = r.ap.map(|v| format!("{v:.6}")).unwrap_or_default();
            s.push_str(&format!("\"{}\",{},{ap}\n", r.action, r.positives));
        }
        s.push_str(&format!("mAP,,{:.6}\n", self.map));
        s
    }
}

/// One row per report and one column per action, mAP last; values in
/// percent, as used for plotting sweeps.
pub fn comparison_csv(reports: &[EvalReport]) -> String {
    let Some(first) = reports.first() else { return String::new() };
    let mut s = String::from("name");
    for r in &first.per_action {
        s.push_str(&format!(",\"{}\"", r.action));
    }
    s.push_str(",mAP\n");
    for rep in reports {
        s.push_str(&rep.name);
        for r in &rep.per_action {
            s.push(',');
            if let Some(ap) = r.ap {
                s.push_str(&format!("{:.2}", 100.0 * ap));
            }
        }
        s.push_str(&format!(",{:.2}\n", 100.0 * rep.map));
    }
    s
}

/// Scores `clips` of `data`. Scene inputs, gates included, are computed from
/// each clip's own scene annotation.
pub fn evaluate(name: &str, model: &Model<f32>, data: &Dataset, clips: &[usize]) -> Result<EvalReport> {
    let scenes = prepare_scenes(data, &model.config, &ActionCatalog::standard())?;
    let view = ClipView::new(data, &scenes)?;
    let mut scores = Vec::with_capacity(clips.len());
    let mut labels = Vec::with_capacity(clips.len());
    for &c in clips {
        scores.push(model.predict(&data.videos[c], &scenes[view.clip_scene[c]])?);
        labels.push(view.labels(c).to_vec());
    }
    Ok(EvalReport::from_scores(name, &data.manifest.actions, &scores, &labels))
}
