use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::eval::{evaluate, EvalReport};
use super::split::SplitSpec;
use super::train::{train, EpochRecord, TrainConfig};
use crate::error::{LivrError, Result};
use crate::layout::PlaceCategory;
use crate::model::{Aggregation, ModelConfig};
use crate::synth::Dataset;
use crate::topology::PlaceSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dimension {
    L,
    K,
    H,
    PlDt,
    Agg,
}

impl FromStr for Dimension {
    type Err = LivrError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l" => Ok(Dimension::L),
            "k" => Ok(Dimension::K),
            "h" => Ok(Dimension::H),
            "pl_dt" | "pl-dt" | "pldt" => Ok(Dimension::PlDt),
            "agg" => Ok(Dimension::Agg),
            _ => Err(LivrError::InvalidConfig(format!("unknown ablation dimension {s:?} (L, k, h, PL_DT, agg)"))),
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dimension::L => "L",
            Dimension::K => "k",
            Dimension::H => "h",
            Dimension::PlDt => "PL_DT",
            Dimension::Agg => "agg",
        })
    }
}

fn parse_usize(dim: Dimension, v: &str) -> Result<usize> {
    v.trim().parse().map_err(|_| LivrError::InvalidConfig(format!("{dim} value {v:?} is not a non-negative integer")))
}

/// Applies one ablation value to `base`.
///
/// `PL_DT` values list places joined by `+` (`walkway+driveway`), or `none`.
/// `agg` values are aggregation names; `topo` and `topo-test-only` take an
/// optional hop count suffix, as in `topo@2`.
pub fn apply(base: &ModelConfig, dim: Dimension, value: &str) -> Result<ModelConfig> {
    let mut cfg = base.clone();
    match dim {
        Dimension::L => cfg.l = parse_usize(dim, value)?,
        Dimension::K => cfg.k = parse_usize(dim, value)?,
        Dimension::H => cfg.h = parse_usize(dim, value)?,
        Dimension::PlDt => {
            let mut set = PlaceSet::EMPTY;
            if value.trim() != "none" {
                for p in value.split('+') {
                    set.insert(p.trim().parse::<PlaceCategory>()?);
                }
            }
            cfg.pl_dt = set;
        }
        Dimension::Agg => {
            let (name, hops) = match value.split_once('@') {
                Some((n, h)) => (n, Some(parse_usize(dim, h)?)),
                None => (value, None),
            };
            let agg: Aggregation = name.trim().parse()?;
            if hops.is_some() && !agg.gated_in_eval() {
                return Err(LivrError::InvalidConfig(format!("{agg} takes no hop count")));
            }
            cfg.aggregation = Some(agg);
            if let Some(h) = hops {
                cfg.h = h;
            }
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AblationRun {
    pub value: String,
    pub config: ModelConfig,
    pub best_epoch: usize,
    pub best_val_map: f64,
    pub curves: Vec<EpochRecord>,
    /// Evaluation on the unseen scenes.
    pub report: EvalReport,
}

/// Trains and evaluates one model per value, all from the same seed and split.
pub fn ablate(
    dim: Dimension,
    values: &[String],
    base: &TrainConfig,
    data: &Dataset,
    split: &SplitSpec,
    mut log: impl FnMut(&str, &EpochRecord),
) -> Result<Vec<AblationRun>> {
    let configs = values.iter().map(|v| apply(&base.model, dim, v)).collect::<Result<Vec<_>>>()?;
    let part = split.partition(&data.manifest)?;
    let mut runs = Vec::with_capacity(values.len());
    for (value, model) in values.iter().zip(configs) {
        let cfg = TrainConfig { model: model.clone(), ..base.clone() };
        let out = train(&cfg, data, split, |r| log(value, r))?;
        let report = evaluate(&format!("{dim}={value}"), &out.model, data, &part.unseen)?;
        runs.push(AblationRun {
            value: value.clone(),
            config: model,
            best_epoch: out.best_epoch,
            best_val_map: out.best_val_map,
            curves: out.curves,
            report,
        });
    }
    Ok(runs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Variant;

    #[test]
    fn values_map_onto_the_config() {
        let base = ModelConfig::desk(Variant::V4);
        assert_eq!(apply(&base, Dimension::K, "5").unwrap().k, 5);
        assert_eq!(apply(&base, Dimension::L, "0").unwrap().l, 0);
        assert!(apply(&base, Dimension::L, "6").is_err());
        assert!(apply(&base, Dimension::K, "0").is_err());
        let p = apply(&base, Dimension::PlDt, "walkway+driveway").unwrap().pl_dt;
        assert_eq!(p.len(), 2);
        assert!(p.contains(PlaceCategory::Driveway));
        assert!(apply(&base, Dimension::PlDt, "none").unwrap().pl_dt.is_empty());
        let a = apply(&base, Dimension::Agg, "topo@2").unwrap();
        assert_eq!((a.aggregation, a.h), (Some(Aggregation::Topo), 2));
        assert_eq!(apply(&base, Dimension::Agg, "topo-test-only").unwrap().aggregation, Some(Aggregation::TopoTestOnly));
        assert!(apply(&base, Dimension::Agg, "fc-2layer@1").is_err());
        assert!(apply(&ModelConfig::desk(Variant::BL1), Dimension::Agg, "topo").is_err());
    }

    #[test]
    fn dimension_names_roundtrip() {
        for d in [Dimension::L, Dimension::K, Dimension::H, Dimension::PlDt, Dimension::Agg] {
            assert_eq!(d.to_string().parse::<Dimension>().unwrap(), d);
        }
        assert!("x".parse::<Dimension>().is_err());
    }
}
