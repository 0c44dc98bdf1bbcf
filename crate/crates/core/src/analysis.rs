//! Gold-vs-distractor gap trajectories and the condition × size Δ_dstr matrix.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::condition::ContextCondition;
use crate::error::AnalysisError;
use crate::metrics::ConditionAggregate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GapDirection {
    /// |gap| shrinks from the smallest to the largest model.
    Convergent,
    /// |gap| grows.
    Divergent,
    Flat,
    /// The gap changes sign between the endpoints.
    SignCrossing,
}

impl GapDirection {
    pub fn as_str(self) -> &'static str {
        match self {
            GapDirection::Convergent => "convergent",
            GapDirection::Divergent => "divergent",
            GapDirection::Flat => "flat",
            GapDirection::SignCrossing => "sign-crossing",
        }
    }
}

impl fmt::Display for GapDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapPoint {
    pub model: String,
    pub param_count: u64,
    pub delta_gold: f64,
    pub delta_dstr: f64,
    /// `delta_dstr - delta_gold`; positive favours the distractor.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapTrajectory {
    pub condition: ContextCondition,
    /// Ascending in parameter count.
    pub points: Vec<GapPoint>,
    /// gap(smallest) / gap(largest); absent on a sign crossing.
    pub ratio_first_to_last: Option<f64>,
    pub direction: GapDirection,
}

impl GapTrajectory {
    /// Endpoint change factor ≥ 1, e.g. 10.3 for a narrowing or 3.0 for a widening.
    pub fn change_factor(&self) -> Option<f64> {
        self.ratio_first_to_last
            .map(|r| if r.abs() >= 1.0 { r.abs() } else { 1.0 / r.abs() })
    }

    /// "narrows 10.3×", "widens 3.0×", "flat" or "crosses zero".
    pub fn describe(&self) -> String {
        match (self.direction, self.change_factor()) {
            (GapDirection::Convergent, Some(f)) => format!("narrows {f:.1}×"),
            (GapDirection::Divergent, Some(f)) => format!("widens {f:.1}×"),
            (GapDirection::SignCrossing, _) => "crosses zero".to_string(),
            _ => "flat".to_string(),
        }
    }
}

pub fn gap_trajectory(
    aggregates: &[ConditionAggregate],
    condition: ContextCondition,
) -> Result<GapTrajectory, AnalysisError> {
    let mut points: Vec<GapPoint> = aggregates
        .iter()
        .filter(|a| a.condition == condition)
        .map(|a| GapPoint {
            model: a.model.clone(),
            param_count: a.param_count,
            delta_gold: a.delta_gold,
            delta_dstr: a.delta_dstr,
            gap: a.delta_dstr - a.delta_gold,
        })
        .collect();
    points.sort_by(|a, b| a.param_count.cmp(&b.param_count).then_with(|| a.model.cmp(&b.model)));
    let sizes: BTreeSet<u64> = points.iter().map(|p| p.param_count).collect();
    if sizes.len() < 2 {
        return Err(AnalysisError::TooFewSizes {
            needed: 2,
            got: sizes.len(),
        });
    }
    if points.iter().any(|p| !p.gap.is_finite()) {
        return Err(AnalysisError::Invalid(format!("non-finite gap under `{condition}`")));
    }
    let first = points[0].gap;
    let last = points[points.len() - 1].gap;
    let crosses = (first > 0.0 && last < 0.0) || (first < 0.0 && last > 0.0) || (first == 0.0) != (last == 0.0);
    let (ratio, direction) = if crosses {
        (None, GapDirection::SignCrossing)
    } else if first == 0.0 {
        (None, GapDirection::Flat)
    } else {
        let direction = if last.abs() < first.abs() {
            GapDirection::Convergent
        } else if last.abs() > first.abs() {
            GapDirection::Divergent
        } else {
            GapDirection::Flat
        };
        (Some(first / last), direction)
    };
    Ok(GapTrajectory {
        condition,
        points,
        ratio_first_to_last: ratio,
        direction,
    })
}

/// Trajectories for every condition with at least two sizes.
pub fn gap_trajectories(aggregates: &[ConditionAggregate]) -> Vec<GapTrajectory> {
    ContextCondition::ALL
        .iter()
        .filter_map(|&c| gap_trajectory(aggregates, c).ok())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapColumn {
    pub model: String,
    pub param_count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapMatrix {
    pub rows: Vec<ContextCondition>,
    pub columns: Vec<HeatmapColumn>,
    /// `cells[row][column]`, mean Δ_dstr.
    pub cells: Vec<Vec<f64>>,
}

impl HeatmapMatrix {
    pub fn get(&self, condition: ContextCondition, model: &str) -> Option<f64> {
        let r = self.rows.iter().position(|&c| c == condition)?;
        let c = self.columns.iter().position(|col| col.model == model)?;
        Some(self.cells[r][c])
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "condition")?;
        for col in &self.columns {
            write!(w, ",{}", col.model)?;
        }
        writeln!(w)?;
        for (cond, row) in self.rows.iter().zip(&self.cells) {
            write!(w, "{cond}")?;
            for v in row {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

pub fn heatmap_matrix(aggregates: &[ConditionAggregate]) -> Result<HeatmapMatrix, AnalysisError> {
    if aggregates.is_empty() {
        return Err(AnalysisError::Invalid("no aggregates to tabulate".into()));
    }
    let mut columns: Vec<HeatmapColumn> = Vec::new();
    for a in aggregates {
        if !columns.iter().any(|c| c.model == a.model) {
            columns.push(HeatmapColumn {
                model: a.model.clone(),
                param_count: a.param_count,
            });
        }
    }
    columns.sort_by(|a, b| a.param_count.cmp(&b.param_count).then_with(|| a.model.cmp(&b.model)));

    let rows = ContextCondition::ALL.to_vec();
    let mut cells = Vec::with_capacity(rows.len());
    let mut missing = Vec::new();
    for &cond in &rows {
        let mut row = Vec::with_capacity(columns.len());
        for col in &columns {
            match aggregates.iter().find(|a| a.condition == cond && a.model == col.model) {
                Some(a) if a.delta_dstr.is_finite() => row.push(a.delta_dstr),
                Some(_) => {
                    return Err(AnalysisError::Invalid(format!(
                        "non-finite cell ({cond}, {})",
                        col.model
                    )));
                }
                None => {
                    missing.push(format!("({cond}, {})", col.model));
                    row.push(f64::NAN);
                }
            }
        }
        cells.push(row);
    }
    if !missing.is_empty() {
        return Err(AnalysisError::IncompleteGrid(missing));
    }
    Ok(HeatmapMatrix { rows, columns, cells })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn agg(model: &str, n: u64, condition: ContextCondition, gold: f64, dstr: f64) -> ConditionAggregate {
        ConditionAggregate {
            model: model.into(),
            param_count: n,
            condition,
            n: 1,
            dstr_no: 0.0,
            dstr_with: dstr,
            delta_dstr: dstr,
            gold_no: 0.0,
            gold_with: gold,
            delta_gold: gold,
            overall_no: 0.0,
            overall_with: gold - dstr,
            delta_overall: gold - dstr,
        }
    }

    #[test]
    fn narrowing_gap() {
        let aggs = vec![
            agg("big", 1000, ContextCondition::Related, 1.0, 1.55),
            agg("small", 10, ContextCondition::Related, 1.35, 7.06),
        ];
        let t = gap_trajectory(&aggs, ContextCondition::Related).unwrap();
        assert_eq!(t.points[0].model, "small");
        assert_eq!(t.direction, GapDirection::Convergent);
        assert!((t.ratio_first_to_last.unwrap() - 5.71 / 0.55).abs() < 1e-9);
        assert_eq!(t.describe(), "narrows 10.4×");
    }

    #[test]
    fn constant_gap_is_flat() {
        let aggs: Vec<_> = [10, 100, 1000]
            .iter()
            .map(|&n| agg(&format!("m{n}"), n, ContextCondition::Random, 0.0, 2.0))
            .collect();
        let t = gap_trajectory(&aggs, ContextCondition::Random).unwrap();
        assert_eq!(t.direction, GapDirection::Flat);
        assert_eq!(t.ratio_first_to_last, Some(1.0));
    }

    #[test]
    fn sign_crossing_omits_ratio() {
        let aggs = vec![
            agg("a", 10, ContextCondition::Related, 0.0, 1.0),
            agg("b", 100, ContextCondition::Related, 2.0, 1.0),
        ];
        let t = gap_trajectory(&aggs, ContextCondition::Related).unwrap();
        assert_eq!(t.direction, GapDirection::SignCrossing);
        assert_eq!(t.ratio_first_to_last, None);
    }

    #[test]
    fn one_size_is_too_few() {
        let aggs = vec![agg("a", 10, ContextCondition::Related, 0.0, 1.0)];
        assert_eq!(
            gap_trajectory(&aggs, ContextCondition::Related).unwrap_err(),
            AnalysisError::TooFewSizes { needed: 2, got: 1 }
        );
    }

    #[test]
    fn single_size_heatmap() {
        let aggs: Vec<_> = ContextCondition::ALL
            .iter()
            .map(|&c| agg("m", 10, c, 0.0, 1.0))
            .collect();
        let m = heatmap_matrix(&aggs).unwrap();
        assert_eq!(m.cells.len(), 4);
        assert_eq!(m.cells[0].len(), 1);
    }

    #[test]
    fn missing_cells_are_listed() {
        let aggs = vec![
            agg("a", 10, ContextCondition::Related, 0.0, 1.0),
            agg("b", 20, ContextCondition::Related, 0.0, 1.0),
            agg("a", 10, ContextCondition::Random, 0.0, 1.0),
        ];
        match heatmap_matrix(&aggs).unwrap_err() {
            AnalysisError::IncompleteGrid(cells) => {
                assert_eq!(cells.len(), 5);
                assert!(cells.contains(&"(random, b)".to_string()));
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn heatmap_csv_layout() {
        let aggs: Vec<_> = ContextCondition::ALL
            .iter()
            .flat_map(|&c| [agg("s", 1, c, 0.0, 0.5), agg("l", 2, c, 0.0, 1.5)])
            .collect();
        let mut out = Vec::new();
        heatmap_matrix(&aggs).unwrap().write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("condition,s,l"));
        assert_eq!(lines.next(), Some("related,0.5,1.5"));
        assert_eq!(text.lines().last(), Some("counterfactual,0.5,1.5"));
    }
}
