use super::{EvalError, ScoreColumn, MEASURES};

/// Measures × models of EMD values (`None` = not available).
#[derive(Debug, Clone, PartialEq)]
pub struct MetricTable {
    pub measures: Vec<String>,
    pub models: Vec<String>,
    /// `cells[measure][model]`.
    pub cells: Vec<Vec<Option<f64>>>,
}

impl MetricTable {
    pub fn from_columns(columns: &[ScoreColumn]) -> Self {
        Self {
            measures: MEASURES.iter().map(|m| m.label().to_string()).collect(),
            models: columns.iter().map(|c| c.model.clone()).collect(),
            cells: (0..MEASURES.len()).map(|k| columns.iter().map(|c| c.values[k]).collect()).collect(),
        }
    }

    pub fn get(&self, measure: &str, model: &str) -> Option<f64> {
        let r = self.measures.iter().position(|m| m == measure)?;
        let c = self.models.iter().position(|m| m == model)?;
        self.cells[r][c]
    }

    /// Cell-wise mean and population spread over per-seed tables with the same layout.
    pub fn mean_over_seeds(tables: &[MetricTable]) -> Result<(MetricTable, MetricTable), EvalError> {
        let first = tables.first().ok_or(EvalError::Empty("no tables"))?;
        if tables.iter().any(|t| t.measures != first.measures || t.models != first.models) {
            return Err(EvalError::Layout("per-seed tables differ in layout".into()));
        }
        let stat = |f: &dyn Fn(&[f64]) -> f64| MetricTable {
            measures: first.measures.clone(),
            models: first.models.clone(),
            cells: (0..first.measures.len())
                .map(|r| {
                    (0..first.models.len())
                        .map(|c| {
                            let v: Option<Vec<f64>> = tables.iter().map(|t| t.cells[r][c]).collect();
                            v.map(|v| f(&v))
                        })
                        .collect()
                })
                .collect(),
        };
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let spread = |v: &[f64]| {
            let m = mean(v);
            (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
        };
        Ok((stat(&mean), stat(&spread)))
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("Measure");
        for m in &self.models {
            s.push(',');
            s.push_str(m);
        }
        s.push('\n');
        for (name, row) in self.measures.iter().zip(&self.cells) {
            s.push_str(name);
            for v in row {
                s.push(',');
                match v {
                    Some(v) => s.push_str(&format!("{v:.10e}")),
                    None => s.push_str("NA"),
                }
            }
            s.push('\n');
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self, EvalError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or(EvalError::Parse("empty table".into()))?;
        let models: Vec<String> = header.split(',').skip(1).map(|s| s.trim().to_string()).collect();
        let mut measures = Vec::new();
        let mut cells = Vec::new();
        for line in lines {
            let mut fields = line.split(',');
            measures.push(fields.next().unwrap_or_default().trim().to_string());
            let row: Vec<Option<f64>> = fields
                .map(|f| match f.trim() {
                    "NA" => Ok(None),
                    v => v.parse::<f64>().map(Some).map_err(|_| EvalError::Parse(format!("bad cell {v:?}"))),
                })
                .collect::<Result<_, _>>()?;
            if row.len() != models.len() {
                return Err(EvalError::Parse(format!("row {} has {} cells for {} models", measures.len(), row.len(), models.len())));
            }
            cells.push(row);
        }
        Ok(Self { measures, models, cells })
    }
}

/// 1-based ascending ranks; tied values share the mean of their ranks.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Mean rank per model over all measures of one table, for the models with
/// complete columns; models with a missing cell are returned separately.
pub fn dataset_ranks(table: &MetricTable) -> (Vec<(String, f64)>, Vec<String>) {
    let complete: Vec<usize> = (0..table.models.len())
        .filter(|&c| table.cells.iter().all(|row| row[c].is_some()))
        .collect();
    let excluded = (0..table.models.len())
        .filter(|c| !complete.contains(c))
        .map(|c| table.models[c].clone())
        .collect();
    let mut sums = vec![0.0; complete.len()];
    for row in &table.cells {
        let vals: Vec<f64> = complete.iter().map(|&c| row[c].expect("complete")).collect();
        for (s, r) in sums.iter_mut().zip(average_ranks(&vals)) {
            *s += r;
        }
    }
    let m = table.measures.len().max(1) as f64;
    (complete.iter().zip(sums).map(|(&c, s)| (table.models[c].clone(), s / m)).collect(), excluded)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankRow {
    pub model: String,
    pub per_dataset: Vec<f64>,
    pub combined: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankSummary {
    pub datasets: Vec<String>,
    /// Sorted by ascending combined rank.
    pub rows: Vec<RankRow>,
    /// Models dropped for missing cells in any table.
    pub excluded: Vec<String>,
}

impl RankSummary {
    pub fn get(&self, model: &str) -> Option<&RankRow> {
        self.rows.iter().find(|r| r.model == model)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("Model");
        for d in &self.datasets {
            s.push(',');
            s.push_str(d);
        }
        s.push_str(",Combined\n");
        for r in &self.rows {
            s.push_str(&r.model);
            for v in &r.per_dataset {
                s.push_str(&format!(",{v:.4}"));
            }
            s.push_str(&format!(",{:.4}\n", r.combined));
        }
        for m in &self.excluded {
            s.push_str(&format!("# excluded (missing cells): {m}\n"));
        }
        s
    }
}

/// Ranks models within each table over the shared model set, averages over
/// measures per table and then over tables.
pub fn combined_rank(tables: &[(String, MetricTable)]) -> Result<RankSummary, EvalError> {
    let (_, first) = tables.first().ok_or(EvalError::Empty("no tables"))?;
    let mut models = first.models.clone();
    models.sort();
    for (name, t) in tables {
        let mut m = t.models.clone();
        m.sort();
        if m != models {
            return Err(EvalError::Layout(format!("table {name} has a different model set")));
        }
    }
    let mut excluded: Vec<String> = Vec::new();
    for (_, t) in tables {
        for m in dataset_ranks(t).1 {
            if !excluded.contains(&m) {
                excluded.push(m);
            }
        }
    }
    // rank only models complete everywhere
    let restricted: Vec<MetricTable> = tables
        .iter()
        .map(|(_, t)| {
            let keep: Vec<usize> = (0..t.models.len()).filter(|&c| !excluded.contains(&t.models[c])).collect();
            MetricTable {
                measures: t.measures.clone(),
                models: keep.iter().map(|&c| t.models[c].clone()).collect(),
                cells: t.cells.iter().map(|row| keep.iter().map(|&c| row[c]).collect()).collect(),
            }
        })
        .collect();
    let per_table: Vec<Vec<(String, f64)>> = restricted.iter().map(|t| dataset_ranks(t).0).collect();
    let mut rows: Vec<RankRow> = first
        .models
        .iter()
        .filter(|m| !excluded.contains(m))
        .map(|m| {
            let per_dataset: Vec<f64> = per_table
                .iter()
                .map(|ranks| ranks.iter().find(|(n, _)| n == m).expect("shared model").1)
                .collect();
            let combined = per_dataset.iter().sum::<f64>() / per_dataset.len() as f64;
            RankRow { model: m.clone(), per_dataset, combined }
        })
        .collect();
    rows.sort_by(|a, b| a.combined.total_cmp(&b.combined));
    Ok(RankSummary { datasets: tables.iter().map(|(n, _)| n.clone()).collect(), rows, excluded })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(models: &[&str], cells: Vec<Vec<Option<f64>>>) -> MetricTable {
        MetricTable {
            measures: (0..cells.len()).map(|k| format!("m{k}")).collect(),
            models: models.iter().map(|s| s.to_string()).collect(),
            cells,
        }
    }

    #[test]
    fn ties_share_mean_rank() {
        assert_eq!(average_ranks(&[0.3, 0.1, 0.3, 0.2]), vec![3.5, 1.0, 3.5, 2.0]);
        assert_eq!(average_ranks(&[1.0; 4]), vec![2.5; 4]);
    }

    #[test]
    fn full_tie_gives_equal_ranks() {
        let t = table(&["a", "b", "c"], vec![vec![Some(1.0); 3]; 10]);
        let s = combined_rank(&[("x".into(), t)]).unwrap();
        assert!(s.rows.iter().all(|r| r.combined == 2.0));
    }

    #[test]
    fn monotone_transform_of_a_row_keeps_ranks() {
        let t = table(&["a", "b", "c"], vec![vec![Some(0.2), Some(0.1), Some(0.5)], vec![Some(3.0), Some(1.0), Some(2.0)]]);
        let mut u = t.clone();
        for v in u.cells[0].iter_mut() {
            *v = v.map(|x| (10.0 * x).exp());
        }
        assert_eq!(combined_rank(&[("x".into(), t)]).unwrap(), combined_rank(&[("x".into(), u)]).unwrap());
    }

    #[test]
    fn missing_cells_exclude_model() {
        let t = table(&["a", "b", "c"], vec![vec![Some(0.2), None, Some(0.5)]]);
        let s = combined_rank(&[("x".into(), t)]).unwrap();
        assert_eq!(s.excluded, vec!["b".to_string()]);
        assert_eq!(s.rows.len(), 2);
        assert_eq!(s.rows[0].model, "a");
    }

    #[test]
    fn csv_round_trip() {
        let t = table(&["a", "b"], vec![vec![Some(0.25), None], vec![Some(1e-7), Some(3.0)]]);
        assert_eq!(MetricTable::from_csv(&t.to_csv()).unwrap(), t);
        assert!(MetricTable::from_csv("Measure,a\nCorr,1,2\n").is_err());
    }

    #[test]
    fn seed_mean_and_spread() {
        let a = table(&["a"], vec![vec![Some(1.0)]]);
        let b = table(&["a"], vec![vec![Some(3.0)]]);
        let (m, s) = MetricTable::mean_over_seeds(&[a, b]).unwrap();
        assert_eq!(m.cells[0][0], Some(2.0));
        assert_eq!(s.cells[0][0], Some(1.0));
    }
}
