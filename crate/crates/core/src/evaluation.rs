//! Summary evaluation by maximum-weight bipartite matching.
//!
//! Every predicted shot is connected to every ground-truth shot with an edge
//! weighted by the IOU of their concept sets. Precision and recall divide
//! the weight of the best matching by the predicted and ground-truth shot
//! counts respectively.

use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::classes::normalize_name;
use crate::error::{Error, Result};
use crate::solver::SummaryManifest;

pub type ConceptSet = BTreeSet<String>;

/// `|a ∩ b| / |a ∪ b|`, and 0 when both sets are empty.
pub fn concept_iou(a: &ConceptSet, b: &ConceptSet) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct Matching {
    pub pairs: Vec<(usize, usize)>,
    pub total_weight: f64,
}

/// Maximum-weight matching on a rectangular nonnegative weight matrix
/// (Hungarian method with potentials, `O(r²c)` for `r <= c`). Pairs whose
/// weight is zero are left out of the result.
pub fn bipartite_match(weights: &[Vec<f64>]) -> Result<Matching> {
    let rows = weights.len();
    let cols = weights.first().map_or(0, Vec::len);
    if weights.iter().any(|r| r.len() != cols) {
        return Err(Error::Dimension(
            "weight matrix rows differ in length".into(),
        ));
    }
    if let Some(w) = weights
        .iter()
        .flatten()
        .find(|w| !(w.is_finite() && **w >= 0.0))
    {
        return Err(Error::Input(format!(
            "weights must be finite and nonnegative, got {w}"
        )));
    }
    if rows == 0 || cols == 0 {
        return Ok(Matching {
            pairs: Vec::new(),
            total_weight: 0.0,
        });
    }

    let transposed = rows > cols;
    let (r, c) = if transposed {
        (cols, rows)
    } else {
        (rows, cols)
    };
    let cost = |i: usize, j: usize| -> f64 {
        if transposed {
            -weights[j][i]
        } else {
            -weights[i][j]
        }
    };

    // 1-based potentials; column 0 is the virtual source.
    let mut u = vec![0.0f64; r + 1];
    let mut v = vec![0.0f64; c + 1];
    let mut owner = vec![0usize; c + 1];
    let mut way = vec![0usize; c + 1];
    for i in 1..=r {
        owner[0] = i;
        let mut j0 = 0;
        let mut min_to = vec![f64::INFINITY; c + 1];
        let mut used = vec![false; c + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=c {
                if used[j] {
                    continue;
                }
                let reduced = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if reduced < min_to[j] {
                    min_to[j] = reduced;
                    way[j] = j0;
                }
                if min_to[j] < delta {
                    delta = min_to[j];
                    j1 = j;
                }
            }
            for j in 0..=c {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_to[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut pairs: Vec<(usize, usize)> = (1..=c)
        .filter(|&j| owner[j] != 0)
        .map(|j| {
            let (a, b) = (owner[j] - 1, j - 1);
            if transposed {
                (b, a)
            } else {
                (a, b)
            }
        })
        .filter(|&(i, j)| weights[i][j] > 0.0)
        .collect();
    pairs.sort_unstable();
    let total_weight = pairs.iter().map(|&(i, j)| weights[i][j]).sum();
    Ok(Matching {
        pairs,
        total_weight,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricMode {
    /// Numerator is the summed IOU of matched pairs.
    #[default]
    WeightSum,
    /// Numerator is the number of matched pairs with nonzero IOU.
    PairCount,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthShot {
    pub shot_id: usize,
    pub concepts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub video_id: String,
    pub shots: Vec<GroundTruthShot>,
}

impl GroundTruth {
    pub fn from_json(json: &str) -> Result<Self> {
        let gt: GroundTruth =
            serde_json::from_str(json).map_err(|e| Error::Schema(e.to_string()))?;
        let mut seen = HashSet::new();
        for shot in &gt.shots {
            if !seen.insert(shot.shot_id) {
                return Err(Error::Schema(format!(
                    "duplicate ground-truth shot_id {}",
                    shot.shot_id
                )));
            }
        }
        Ok(gt)
    }

    pub fn concept_sets(&self) -> Vec<ConceptSet> {
        self.shots
            .iter()
            .map(|s| s.concepts.iter().map(|c| normalize_name(c)).collect())
            .collect()
    }
}

/// Maps detector class names to lexicon concepts. Names without an entry
/// map to themselves.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AliasTable(pub HashMap<String, String>);

impl AliasTable {
    pub fn from_json(json: &str) -> Result<Self> {
        let raw: HashMap<String, String> =
            serde_json::from_str(json).map_err(|e| Error::Schema(e.to_string()))?;
        Ok(Self(
            raw.into_iter()
                .map(|(k, v)| (normalize_name(&k), normalize_name(&v)))
                .collect(),
        ))
    }

    pub fn concept(&self, class_name: &str) -> String {
        let key = normalize_name(class_name);
        self.0.get(&key).cloned().unwrap_or(key)
    }

    pub fn concepts<'a>(&self, classes: impl IntoIterator<Item = &'a String>) -> ConceptSet {
        classes.into_iter().map(|c| self.concept(c)).collect()
    }
}

pub fn manifest_concepts(manifest: &SummaryManifest, aliases: &AliasTable) -> Vec<ConceptSet> {
    manifest
        .shots
        .iter()
        .map(|s| aliases.concepts(&s.classes))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub matching_weight: f64,
    pub s1: usize,
    pub s2: usize,
    pub process_time_s: Option<f64>,
    pub video_time_s: Option<f64>,
    pub speedup: Option<f64>,
}

impl EvalReport {
    pub fn with_timing(mut self, process_time_s: f64, video_time_s: f64) -> Result<Self> {
        self.speedup = Some(timing_report(process_time_s, video_time_s)?);
        self.process_time_s = Some(process_time_s);
        self.video_time_s = Some(video_time_s);
        Ok(self)
    }

    pub fn summary_line(&self) -> String {
        let speed = self
            .speedup
            .map_or_else(|| "n/a".to_string(), |s| format!("{s:.2}x"));
        format!(
            "P={:.4} R={:.4} F1={:.4} speedup={speed}",
            self.precision, self.recall, self.f1
        )
    }
}

pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

pub fn evaluate(pred: &[ConceptSet], gt: &[ConceptSet], mode: MetricMode) -> Result<EvalReport> {
    let (s1, s2) = (pred.len(), gt.len());
    let weights: Vec<Vec<f64>> = pred
        .iter()
        .map(|p| gt.iter().map(|g| concept_iou(p, g)).collect())
        .collect();
    let matching = bipartite_match(&weights)?;
    let numerator = match mode {
        MetricMode::WeightSum => matching.total_weight,
        MetricMode::PairCount => matching.pairs.len() as f64,
    };
    let (precision, recall) = if s1 == 0 || s2 == 0 {
        (0.0, 0.0)
    } else {
        (numerator / s1 as f64, numerator / s2 as f64)
    };
    Ok(EvalReport {
        precision,
        recall,
        f1: f1_score(precision, recall),
        matching_weight: matching.total_weight,
        s1,
        s2,
        process_time_s: None,
        video_time_s: None,
        speedup: None,
    })
}

/// How many times faster than real time the summary was produced.
pub fn timing_report(process_time_s: f64, video_duration_s: f64) -> Result<f64> {
    if !(process_time_s > 0.0 && process_time_s.is_finite()) {
        return Err(Error::Input(format!(
            "process time must be positive, got {process_time_s}"
        )));
    }
    if !(video_duration_s >= 0.0 && video_duration_s.is_finite()) {
        return Err(Error::Input(format!(
            "video duration must be nonnegative, got {video_duration_s}"
        )));
    }
    Ok(video_duration_s / process_time_s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn set(items: &[&str]) -> ConceptSet {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn iou_examples() {
        assert_eq!(concept_iou(&set(&["person"]), &set(&["person"])), 1.0);
        assert_eq!(
            concept_iou(&set(&["person"]), &set(&["person", "car"])),
            0.5
        );
        assert_eq!(concept_iou(&set(&[]), &set(&[])), 0.0);
    }

    #[test]
    fn match_examples() {
        let id = vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ];
        let m = bipartite_match(&id).unwrap();
        assert_eq!(m.total_weight, 3.0);
        assert_eq!(m.pairs, vec![(0, 0), (1, 1), (2, 2)]);

        let m = bipartite_match(&[vec![0.5, 0.9], vec![0.8, 0.2]]).unwrap();
        assert_abs_diff_eq!(m.total_weight, 1.7, epsilon = 1e-12);
        assert_eq!(m.pairs, vec![(0, 1), (1, 0)]);

        let m = bipartite_match(&vec![vec![0.0; 3]; 2]).unwrap();
        assert_eq!(m.total_weight, 0.0);
        assert!(m.pairs.is_empty());

        let m = bipartite_match(&[]).unwrap();
        assert_eq!(m.total_weight, 0.0);
    }

    #[test]
    fn match_rectangular_both_orientations() {
        let tall = vec![vec![0.1], vec![0.7], vec![0.3]];
        let m = bipartite_match(&tall).unwrap();
        assert_eq!(m.pairs, vec![(1, 0)]);
        let wide = vec![vec![0.1, 0.7, 0.3]];
        assert_eq!(bipartite_match(&wide).unwrap().pairs, vec![(0, 1)]);
    }

    #[test]
    fn match_rejects_bad_weights() {
        assert!(bipartite_match(&[vec![-0.1]]).is_err());
        assert!(bipartite_match(&[vec![0.1, 0.2], vec![0.3]]).is_err());
    }

    #[test]
    fn evaluate_examples() {
        let three = vec![set(&["person"]), set(&["car"]), set(&["dog", "person"])];
        let r = evaluate(&three, &three, MetricMode::WeightSum).unwrap();
        assert_eq!((r.precision, r.recall, r.f1), (1.0, 1.0, 1.0));

        let r = evaluate(
            &[set(&["person"])],
            &[set(&["person", "car"])],
            MetricMode::WeightSum,
        )
        .unwrap();
        assert_eq!(r.matching_weight, 0.5);
        assert_eq!((r.precision, r.recall, r.f1), (0.5, 0.5, 0.5));

        let r = evaluate(&[], &three, MetricMode::WeightSum).unwrap();
        assert_eq!((r.precision, r.recall, r.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn pair_count_mode() {
        let pred = vec![set(&["person"]), set(&["car"])];
        let gt = vec![set(&["person", "car"]), set(&["car"]), set(&["dog"])];
        let r = evaluate(&pred, &gt, MetricMode::PairCount).unwrap();
        assert_eq!(r.precision, 1.0);
        assert_abs_diff_eq!(r.recall, 2.0 / 3.0);
        let w = evaluate(&pred, &gt, MetricMode::WeightSum).unwrap();
        assert_eq!(w.matching_weight, 1.5);
    }

    #[test]
    fn timing_examples() {
        assert_abs_diff_eq!(timing_report(100.0, 781.0).unwrap(), 7.81, epsilon = 1e-12);
        assert_eq!(timing_report(50.0, 50.0).unwrap(), 1.0);
        assert_eq!(timing_report(120.0, 60.0).unwrap(), 0.5);
        assert!(matches!(timing_report(0.0, 60.0), Err(Error::Input(_))));
        assert!(matches!(timing_report(-1.0, 60.0), Err(Error::Input(_))));
    }

    #[test]
    fn alias_table_maps_and_falls_through() {
        let t = AliasTable::from_json(r#"{"car": "Vehicle", "truck": "vehicle"}"#).unwrap();
        assert_eq!(t.concept("car"), "vehicle");
        assert_eq!(t.concept("Truck"), "vehicle");
        assert_eq!(t.concept("person"), "person");
    }

    #[test]
    fn ground_truth_rejects_duplicates() {
        let json = r#"{"video_id":"v","shots":[{"shot_id":1,"concepts":[]},{"shot_id":1,"concepts":["a"]}]}"#;
        assert!(matches!(
            GroundTruth::from_json(json),
            Err(Error::Schema(_))
        ));
        let json = r#"{"video_id":"v","shots":[{"shot_id":1,"concepts":["Car"]}]}"#;
        assert_eq!(
            GroundTruth::from_json(json).unwrap().concept_sets()[0],
            set(&["car"])
        );
    }

    fn arb_sets() -> impl Strategy<Value = Vec<ConceptSet>> {
        proptest::collection::vec(
            proptest::collection::btree_set(
                prop_oneof![Just("a"), Just("b"), Just("c"), Just("d")].prop_map(String::from),
                0..4,
            ),
            0..6,
        )
    }

    proptest! {
        #[test]
        fn metrics_are_bounded(pred in arb_sets(), gt in arb_sets()) {
            let r = evaluate(&pred, &gt, MetricMode::WeightSum).unwrap();
            for v in [r.precision, r.recall, r.f1] {
                prop_assert!((0.0..=1.0 + 1e-12).contains(&v));
            }
            prop_assert_eq!(r.f1 == 0.0, r.matching_weight == 0.0 || pred.is_empty() || gt.is_empty());
            prop_assert_eq!(f1_score(r.precision, r.recall), f1_score(r.recall, r.precision));
        }

        #[test]
        fn iou_symmetric(a in arb_sets(), b in arb_sets()) {
            for x in &a {
                for y in &b {
                    prop_assert_eq!(concept_iou(x, y), concept_iou(y, x));
                    if !x.is_empty() {
                        prop_assert_eq!(concept_iou(x, y) == 1.0, x == y);
                    }
                }
            }
        }
    }
}
