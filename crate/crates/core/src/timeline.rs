//! Two-track shot timeline (predicted vs ground truth) for visual inspection.

use std::collections::BTreeSet;

use crate::evaluation::GroundTruth;
use crate::solver::SummaryManifest;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Timeline {
    pub predicted: Vec<bool>,
    pub ground_truth: Vec<bool>,
}

impl Timeline {
    /// Covers every shot of the manifest's video and every annotated shot.
    pub fn new(manifest: &SummaryManifest, gt: Option<&GroundTruth>) -> Self {
        let pred: BTreeSet<usize> = manifest.shots.iter().map(|s| s.shot_id).collect();
        let truth: BTreeSet<usize> = gt
            .map(|g| g.shots.iter().map(|s| s.shot_id).collect())
            .unwrap_or_default();
        let len = [
            manifest.total_shots,
            pred.last().map_or(0, |m| m + 1),
            truth.last().map_or(0, |m| m + 1),
        ]
        .into_iter()
        .max()
        .unwrap_or(0);
        Self {
            predicted: (0..len).map(|i| pred.contains(&i)).collect(),
            ground_truth: (0..len).map(|i| truth.contains(&i)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.predicted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predicted.is_empty()
    }

    /// Shots marked on both tracks.
    pub fn overlap(&self) -> usize {
        self.predicted
            .iter()
            .zip(&self.ground_truth)
            .filter(|(a, b)| **a && **b)
            .count()
    }

    /// One row per track, one column per shot.
    pub fn to_csv(&self) -> String {
        let header: Vec<String> = (0..self.len()).map(|i| i.to_string()).collect();
        let row = |name: &str, bits: &[bool]| {
            let mut cells = vec![name.to_string()];
            cells.extend(bits.iter().map(|&b| u8::from(b).to_string()));
            cells.join(",")
        };
        format!(
            "track,{}\n{}\n{}\n",
            header.join(","),
            row("ground_truth", &self.ground_truth),
            row("predicted", &self.predicted)
        )
    }

    pub fn to_svg(&self) -> String {
        const CELL: usize = 6;
        const ROW: usize = 24;
        const LABEL: usize = 96;
        let width = LABEL + CELL * self.len().max(1) + 8;
        let height = ROW * 2 + 28;
        let mut out = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
             font-family=\"sans-serif\" font-size=\"11\">\n"
        );
        let tracks = [
            ("ground truth", &self.ground_truth, "#1f5fbf", 4),
            ("predicted", &self.predicted, "#2e9e44", 4 + ROW),
        ];
        for (label, bits, color, y) in tracks {
            out.push_str(&format!(
                "  <text x=\"4\" y=\"{}\">{label}</text>\n",
                y + ROW / 2 + 4
            ));
            out.push_str(&format!(
                "  <line x1=\"{LABEL}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"#ccc\"/>\n",
                y + ROW / 2,
                width - 8
            ));
            for (i, _) in bits.iter().enumerate().filter(|(_, b)| **b) {
                out.push_str(&format!(
                    "  <rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{color}\"/>\n",
                    LABEL + i * CELL,
                    y + 2,
                    CELL - 1,
                    ROW - 4
                ));
            }
        }
        out.push_str(&format!(
            "  <text x=\"{LABEL}\" y=\"{}\">shot 0 .. {}</text>\n",
            height - 6,
            self.len().saturating_sub(1)
        ));
        out.push_str("</svg>\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::GroundTruthShot;
    use crate::solver::ManifestEntry;

    fn manifest(total: usize, ids: &[usize]) -> SummaryManifest {
        SummaryManifest {
            video_id: "v".into(),
            total_shots: total,
            shots: ids
                .iter()
                .map(|&i| ManifestEntry {
                    shot_id: i,
                    t_start: i as f64 * 5.0,
                    t_end: i as f64 * 5.0 + 5.0,
                    rep_frame: 0,
                    z_m: 1.0,
                    distance: 0.0,
                    relevance: 1.0,
                    classes: vec![],
                })
                .collect(),
            warnings: vec![],
            provenance: None,
        }
    }

    fn gt(ids: &[usize]) -> GroundTruth {
        GroundTruth {
            video_id: "v".into(),
            shots: ids
                .iter()
                .map(|&i| GroundTruthShot {
                    shot_id: i,
                    concepts: vec![],
                })
                .collect(),
        }
    }

    #[test]
    fn three_shot_tracks() {
        let t = Timeline::new(&manifest(3, &[0, 2]), Some(&gt(&[1, 2])));
        assert_eq!(t.len(), 3);
        assert_eq!(
            t.to_csv(),
            "track,0,1,2\nground_truth,0,1,1\npredicted,1,0,1\n"
        );
        assert_eq!(t.to_csv().lines().count(), 3);
    }

    #[test]
    fn disjoint_and_identical_tracks() {
        let t = Timeline::new(&manifest(4, &[0, 1]), Some(&gt(&[2, 3])));
        assert_eq!(t.overlap(), 0);
        let t = Timeline::new(&manifest(4, &[1, 3]), Some(&gt(&[1, 3])));
        assert_eq!(t.predicted, t.ground_truth);
    }

    #[test]
    fn svg_marks_selected_shots() {
        let t = Timeline::new(&manifest(3, &[1]), Some(&gt(&[0, 1])));
        let svg = t.to_svg();
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<rect").count(), 3);
    }
}
