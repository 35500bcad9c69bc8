//! Results aggregation: RMSE/STDEV per (object, planner, side), shaped
//! like the usual top/bottom results table.
//!
//! Side mapping: "top" is the object pose relative to the left palm,
//! "bottom" relative to the right palm (an explicit labeling choice,
//! noted in the emitted table header).

use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Side {
    Top,
    Bottom,
}

impl Side {
    pub fn name(&self) -> &'static str {
        match self {
            Side::Top => "top",
            Side::Bottom => "bottom",
        }
    }
}

#[derive(Debug, Default, Clone)]
struct Samples {
    trans_mm: Vec<f64>,
    rot_deg: Vec<f64>,
}

/// Accumulates per-waypoint errors across sweep cells.
#[derive(Debug, Default)]
pub struct TableBuilder {
    samples: BTreeMap<(String, String, Side), Samples>,
    failures: BTreeMap<(String, String), usize>,
    cells: BTreeMap<(String, String), usize>,
}

/// One aggregated row.
#[derive(Debug, Clone)]
pub struct TableRow {
    pub object: String,
    pub planner: String,
    pub side: Side,
    pub rmse_mm: f64,
    pub stdev_mm: f64,
    pub rmse_deg: f64,
    pub stdev_deg: f64,
    pub samples: usize,
    pub cells: usize,
    pub failed_cells: usize,
}

#[derive(Debug, Clone)]
pub struct ResultsTable {
    pub rows: Vec<TableRow>,
}

fn rmse(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    (xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64).sqrt()
}

fn stdev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

impl TableBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record_cell(&mut self, object: &str, planner: &str, failed: bool) {
        let key = (object.to_string(), planner.to_string());
        *self.cells.entry(key.clone()).or_default() += 1;
        if failed {
            *self.failures.entry(key).or_default() += 1;
        }
    }

    pub fn add_sample(&mut self, object: &str, planner: &str, side: Side, trans_mm: f64, rot_deg: f64) {
        let entry = self
            .samples
            .entry((object.to_string(), planner.to_string(), side))
            .or_default();
        entry.trans_mm.push(trans_mm);
        entry.rot_deg.push(rot_deg);
    }

    pub fn finish(self) -> ResultsTable {
        let mut rows = Vec::new();
        for ((object, planner, side), s) in &self.samples {
            let key = (object.clone(), planner.clone());
            rows.push(TableRow {
                object: object.clone(),
                planner: planner.clone(),
                side: *side,
                rmse_mm: rmse(&s.trans_mm),
                stdev_mm: stdev(&s.trans_mm),
                rmse_deg: rmse(&s.rot_deg),
                stdev_deg: stdev(&s.rot_deg),
                samples: s.trans_mm.len(),
                cells: self.cells.get(&key).copied().unwrap_or(0),
                failed_cells: self.failures.get(&key).copied().unwrap_or(0),
            });
        }
        ResultsTable { rows }
    }
}

impl ResultsTable {
    pub fn get(&self, object: &str, planner: &str, side: Side) -> Option<&TableRow> {
        self.rows
            .iter()
            .find(|r| r.object == object && r.planner == planner && r.side == side)
    }

    /// CSV form, one row per (object, planner, side).
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "object,planner,side,rmse_mm,stdev_mm,rmse_deg,stdev_deg,samples,cells,failed_cells\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{:.6},{:.6},{:.6},{:.6},{},{},{}\n",
                r.object,
                r.planner,
                r.side.name(),
                r.rmse_mm,
                r.stdev_mm,
                r.rmse_deg,
                r.stdev_deg,
                r.samples,
                r.cells,
                r.failed_cells
            ));
        }
        out
    }

    /// Aligned text form with top/bottom column groups.
    pub fn aligned_text(&self) -> String {
        let mut out = String::new();
        out.push_str(
            "object top = pose w.r.t. left palm, object bottom = pose w.r.t. right palm\n\n",
        );
        out.push_str(&format!(
            "{:<22} {:>9} {:>10} {:>10} {:>11}   {:>9} {:>10} {:>10} {:>11}\n",
            "",
            "RMSE(mm)",
            "STDEV(mm)",
            "RMSE(deg)",
            "STDEV(deg)",
            "RMSE(mm)",
            "STDEV(mm)",
            "RMSE(deg)",
            "STDEV(deg)"
        ));
        out.push_str(&format!(
            "{:<22} {:-^43}   {:-^43}\n",
            "", " object top ", " object bottom "
        ));

        let mut keys: Vec<(String, String)> = self
            .rows
            .iter()
            .map(|r| (r.object.clone(), r.planner.clone()))
            .collect();
        keys.sort();
        keys.dedup();
        for (object, planner) in keys {
            let top = self.get(&object, &planner, Side::Top);
            let bottom = self.get(&object, &planner, Side::Bottom);
            let cell = |r: Option<&TableRow>| -> String {
                match r {
                    Some(r) => format!(
                        "{:>9.3} {:>10.3} {:>10.3} {:>11.3}",
                        r.rmse_mm, r.stdev_mm, r.rmse_deg, r.stdev_deg
                    ),
                    None => format!("{:>9} {:>10} {:>10} {:>11}", "-", "-", "-", "-"),
                }
            };
            out.push_str(&format!(
                "{:<22} {}   {}\n",
                format!("{object} ({planner})"),
                cell(top),
                cell(bottom)
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aggregates_rmse_and_stdev() {
        let mut b = TableBuilder::new();
        b.record_cell("circle", "ours", false);
        // 3-4-5: rmse of {3, 4} is sqrt(12.5).
        b.add_sample("circle", "ours", Side::Top, 3.0, 0.0);
        b.add_sample("circle", "ours", Side::Top, 4.0, 0.0);
        let t = b.finish();
        let row = t.get("circle", "ours", Side::Top).unwrap();
        assert!((row.rmse_mm - 12.5f64.sqrt()).abs() < 1e-12);
        assert!((row.stdev_mm - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert_eq!(row.samples, 2);
    }

    #[test]
    fn empty_table_renders() {
        let t = TableBuilder::new().finish();
        assert!(t.rows.is_empty());
        assert!(t.to_csv().starts_with("object,"));
        assert!(!t.aligned_text().is_empty());
    }
}
