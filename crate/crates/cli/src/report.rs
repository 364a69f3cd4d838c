//! Report emission: averaged metric tables with per-seed dispersion, the
//! combined rank table, Jaccard curves, PnL grids and a plain-text summary.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use ftsbench_core::evaluation::{combined_rank, MetricTable, RankSummary};
use ftsbench_core::har::t_test;
use ftsbench_core::io::{fmt_f64, read_text, write_text};

use crate::config::ExperimentConfig;
use crate::manifest::{artifact_matches, CellStatus, RunManifest};
use crate::pipeline::{backtest_dir, jaccard_path, score_path};
use crate::CliError;

/// Best model(s) for one measure; ties share the win.
#[derive(Debug, Clone, PartialEq)]
pub struct Winner {
    pub measure: String,
    pub models: Vec<String>,
    pub value: f64,
}

pub fn winners(table: &MetricTable) -> Vec<Winner> {
    table
        .measures
        .iter()
        .zip(&table.cells)
        .filter_map(|(measure, row)| {
            let best = row.iter().flatten().copied().min_by(f64::total_cmp)?;
            let models = table.models.iter().zip(row).filter(|(_, v)| **v == Some(best)).map(|(m, _)| m.clone()).collect();
            Some(Winner { measure: measure.clone(), models, value: best })
        })
        .collect()
}

/// Mean Jaccard curves over replicates.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct JaccardSummary {
    pub percentiles: Vec<f64>,
    pub past: Vec<f64>,
    pub models: Vec<(String, Vec<f64>)>,
}

/// PnL grid averaged over replicates plus pooled daily series.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PnlSummary {
    pub forecasters: Vec<String>,
    pub sizes: Vec<usize>,
    /// `[basket side][forecaster][size]`, sides long/short, long-only, short-only.
    pub grids: [Vec<Vec<f64>>; 3],
    /// Daily long/short PnL pooled over replicates, keyed by (forecaster, size).
    pub daily: BTreeMap<(String, usize), Vec<f64>>,
    pub replicates: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetReport {
    pub name: String,
    pub tables: Vec<(u64, MetricTable)>,
    pub jaccard: Option<JaccardSummary>,
    pub pnl: Option<PnlSummary>,
}

const SIDES: [&str; 3] = ["long_short", "long_only", "short_only"];

/// Renders all report files as `(relative path, contents)`.
pub fn render(datasets: &[DatasetReport], failures: &[(String, String)]) -> Result<Vec<(String, String)>, CliError> {
    if datasets.is_empty() || datasets.iter().any(|d| d.tables.is_empty() || d.tables[0].1.models.is_empty()) {
        return Err(CliError::Report("nothing to report: empty roster or no evaluated replicates".into()));
    }
    let mut files = Vec::new();
    let mut summary = String::new();
    let mut means = Vec::new();
    for d in datasets {
        let tables: Vec<MetricTable> = d.tables.iter().map(|(_, t)| t.clone()).collect();
        let (mean, spread) = MetricTable::mean_over_seeds(&tables).map_err(|e| CliError::Report(e.to_string()))?;
        for (rep, t) in &d.tables {
            files.push((format!("report/{}/r{rep}.csv", d.name), t.to_csv()));
        }
        files.push((format!("report/{}/metrics.csv", d.name), mean.to_csv()));
        files.push((format!("report/{}/metrics_sd.csv", d.name), spread.to_csv()));
        files.push((format!("report/{}/table.txt", d.name), text_table(&mean, &spread, d.tables.len())));

        let _ = writeln!(summary, "Dataset {} ({} replicate(s))", d.name, d.tables.len());
        for w in winners(&mean) {
            let _ = writeln!(summary, "  best {:<7} {} ({})", w.measure, w.models.join(", "), short(w.value));
        }
        if let Some(j) = &d.jaccard {
            files.push((format!("report/{}/jaccard.csv", d.name), jaccard_csv(j)));
            let area = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
            let _ = writeln!(summary, "  mean Jaccard vs future: past {:.4}", area(&j.past));
            for (m, v) in &j.models {
                let _ = writeln!(summary, "  mean Jaccard vs future: {m} {:.4}", area(v));
            }
        }
        if let Some(p) = &d.pnl {
            for (side, grid) in SIDES.iter().zip(&p.grids) {
                files.push((format!("report/{}/pnl_{side}.csv", d.name), grid_csv(p, grid)));
            }
            files.push((format!("report/{}/pnl_tests.csv", d.name), tests_csv(p)));
            let _ = writeln!(summary, "  long/short PnL per day over {} replicate(s):", p.replicates);
            for (f, row) in p.forecasters.iter().zip(&p.grids[0]) {
                let cells: Vec<String> = p.sizes.iter().zip(row).map(|(n, v)| format!("n={n} {v:.4}")).collect();
                let _ = writeln!(summary, "    {f:<16} {}", cells.join("  "));
            }
        }
        means.push((d.name.clone(), mean));
    }
    let ranks = combined_rank(&means).map_err(|e| CliError::Report(e.to_string()))?;
    files.push(("report/ranks.csv".into(), ranks.to_csv()));
    summary.push_str(&rank_text(&ranks));
    if !failures.is_empty() {
        summary.push_str("Failed cells\n");
        for (id, e) in failures {
            let _ = writeln!(summary, "  {id}: {e}");
        }
    }
    files.push(("report/summary.txt".into(), summary));
    Ok(files)
}

fn short(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-3 || v.abs() >= 1e4) {
        format!("{v:.3e}")
    } else {
        format!("{v:.4}")
    }
}

fn text_table(mean: &MetricTable, spread: &MetricTable, replicates: usize) -> String {
    let cell = |r: usize, c: usize| match (mean.cells[r][c], spread.cells[r][c]) {
        (Some(m), Some(s)) if replicates > 1 => format!("{} ± {}", short(m), short(s)),
        (Some(m), _) => short(m),
        _ => "NA".to_string(),
    };
    let mut width = vec![7usize];
    width.extend(mean.models.iter().enumerate().map(|(c, m)| (0..mean.measures.len()).map(|r| cell(r, c).chars().count()).max().unwrap_or(0).max(m.len())));
    let mut s = format!("{:<w$}", "Measure", w = width[0]);
    for (m, w) in mean.models.iter().zip(&width[1..]) {
        let _ = write!(s, "  {m:>w$}");
    }
    s.push('\n');
    for (r, measure) in mean.measures.iter().enumerate() {
        let _ = write!(s, "{measure:<w$}", w = width[0]);
        for (c, w) in width[1..].iter().enumerate() {
            let _ = write!(s, "  {:>w$}", cell(r, c));
        }
        s.push('\n');
    }
    s
}

fn rank_text(r: &RankSummary) -> String {
    let mut s = format!("Average rank ({})\n", r.datasets.join(", "));
    for (k, row) in r.rows.iter().enumerate() {
        let per: Vec<String> = row.per_dataset.iter().map(|v| format!("{v:.2}")).collect();
        let _ = writeln!(s, "  {:>2}. {:<16} {:.2}  [{}]", k + 1, row.model, row.combined, per.join(", "));
    }
    for m in &r.excluded {
        let _ = writeln!(s, "  excluded (missing cells): {m}");
    }
    s
}

fn jaccard_csv(j: &JaccardSummary) -> String {
    let mut s = String::from("percentile,past");
    for (m, _) in &j.models {
        let _ = write!(s, ",{m}");
    }
    s.push('\n');
    for (k, p) in j.percentiles.iter().enumerate() {
        let _ = write!(s, "{p},{}", fmt_f64(j.past[k]));
        for (_, v) in &j.models {
            let _ = write!(s, ",{}", fmt_f64(v[k]));
        }
        s.push('\n');
    }
    s
}

fn grid_csv(p: &PnlSummary, grid: &[Vec<f64>]) -> String {
    let mut s = String::from("forecaster");
    for n in &p.sizes {
        let _ = write!(s, ",{n}");
    }
    s.push('\n');
    for (f, row) in p.forecasters.iter().zip(grid) {
        s.push_str(f);
        for v in row {
            let _ = write!(s, ",{}", fmt_f64(*v));
        }
        s.push('\n');
    }
    s
}

fn tests_csv(p: &PnlSummary) -> String {
    let mut s = String::from("forecaster,size,days,mean,t,p_value\n");
    for f in &p.forecasters {
        for &n in &p.sizes {
            let Some(series) = p.daily.get(&(f.clone(), n)) else { continue };
            match t_test(series) {
                Some(t) => {
                    let _ = writeln!(s, "{f},{n},{},{},{},{}", t.n, fmt_f64(t.mean), fmt_f64(t.t), fmt_f64(t.p_value));
                }
                None => {
                    let _ = writeln!(s, "{f},{n},{},NA,NA,NA", series.len());
                }
            }
        }
    }
    s
}

fn parse_err(path: &str, what: &str) -> CliError {
    CliError::Report(format!("{path}: {what}"))
}

fn parse_jaccard(path: &str, text: &str) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>), CliError> {
    let mut out = (Vec::new(), Vec::new(), Vec::new());
    for line in text.lines().skip(1).filter(|l| !l.trim().is_empty()) {
        let v: Vec<f64> = line.split(',').map(|f| f.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|_| parse_err(path, "bad number"))?;
        if v.len() != 3 {
            return Err(parse_err(path, "expected 3 columns"));
        }
        out.0.push(v[0]);
        out.1.push(v[1]);
        out.2.push(v[2]);
    }
    Ok(out)
}

fn parse_grid(path: &str, text: &str) -> Result<(Vec<String>, Vec<usize>, Vec<Vec<f64>>), CliError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| parse_err(path, "empty grid"))?;
    let sizes: Vec<usize> = header.split(',').skip(1).map(|f| f.trim().parse()).collect::<Result<_, _>>().map_err(|_| parse_err(path, "bad basket size"))?;
    let mut names = Vec::new();
    let mut rows = Vec::new();
    for line in lines {
        let mut f = line.split(',');
        names.push(f.next().unwrap_or_default().to_string());
        let row: Vec<f64> = f.map(|v| v.trim().parse()).collect::<Result<_, _>>().map_err(|_| parse_err(path, "bad number"))?;
        if row.len() != sizes.len() {
            return Err(parse_err(path, "ragged grid"));
        }
        rows.push(row);
    }
    Ok((names, sizes, rows))
}

/// Reads a listed artifact after checking its hash.
fn read_artifact(manifest: &RunManifest, out_dir: &Path, cell: &str, rel: &str) -> Result<Option<String>, CliError> {
    let Some(c) = manifest.cell(cell) else { return Ok(None) };
    if c.status != CellStatus::Ok {
        return Ok(None);
    }
    let a = c
        .artifacts
        .iter()
        .find(|a| a.path == rel)
        .ok_or_else(|| CliError::MissingArtifact(format!("{cell} does not list {rel}")))?;
    if !artifact_matches(out_dir, a) {
        return Err(CliError::MissingArtifact(format!("{rel} is missing or was modified after the run")));
    }
    read_text(&out_dir.join(rel)).map(Some).map_err(|e| CliError::Io(e.to_string()))
}

/// Collects evaluation and backtest artifacts named by `manifest` and writes
/// the report files; returns their relative paths.
pub fn emit_report(cfg: &ExperimentConfig, manifest: &RunManifest, out_dir: &Path) -> Result<Vec<String>, CliError> {
    if cfg.models.is_empty() {
        return Err(CliError::Report("empty roster".into()));
    }
    let mut datasets = Vec::new();
    for d in &cfg.datasets {
        let mut tables = Vec::new();
        let mut jaccard: BTreeMap<String, Vec<(Vec<f64>, Vec<f64>, Vec<f64>)>> = BTreeMap::new();
        let mut pnl = PnlSummary::default();
        let mut grids: [Vec<Vec<Vec<f64>>>; 3] = Default::default();
        for &r in &cfg.seeds {
            let mut table = MetricTable { measures: Vec::new(), models: Vec::new(), cells: Vec::new() };
            for m in &cfg.models {
                let cell = format!("evaluate/{}/r{r}/{}", d.name, m.name);
                let column = match read_artifact(manifest, out_dir, &cell, &score_path(&d.name, r, &m.name))? {
                    Some(text) => Some(MetricTable::from_csv(&text).map_err(|e| CliError::Report(e.to_string()))?),
                    None => None,
                };
                if let Some(col) = &column {
                    if table.measures.is_empty() {
                        table.measures = col.measures.clone();
                        table.cells = vec![Vec::new(); col.measures.len()];
                    }
                }
                table.models.push(m.name.clone());
                for (k, row) in table.cells.iter_mut().enumerate() {
                    row.push(column.as_ref().and_then(|c| c.cells[k][0]));
                }
                if cfg.evaluation.jaccard {
                    let rel = jaccard_path(&d.name, r, &m.name);
                    if let Some(text) = read_artifact(manifest, out_dir, &cell, &rel)? {
                        jaccard.entry(m.name.clone()).or_default().push(parse_jaccard(&rel, &text)?);
                    }
                }
            }
            if table.measures.is_empty() {
                continue;
            }
            // models listed before the first successful column
            for row in &mut table.cells {
                while row.len() < table.models.len() {
                    row.insert(0, None);
                }
            }
            tables.push((r, table));

            if cfg.backtest.is_some() {
                let cell = format!("backtest/{}/r{r}", d.name);
                let dir = backtest_dir(&d.name, r);
                for (k, side) in SIDES.iter().enumerate() {
                    let rel = format!("{dir}/{side}.csv");
                    if let Some(text) = read_artifact(manifest, out_dir, &cell, &rel)? {
                        let (names, sizes, rows) = parse_grid(&rel, &text)?;
                        pnl.forecasters = names;
                        pnl.sizes = sizes;
                        grids[k].push(rows);
                    }
                }
                let rel = format!("{dir}/daily.csv");
                if let Some(text) = read_artifact(manifest, out_dir, &cell, &rel)? {
                    pnl.replicates += 1;
                    for line in text.lines().skip(1) {
                        let f: Vec<&str> = line.split(',').collect();
                        if f.len() != 4 {
                            return Err(parse_err(&rel, "expected 4 columns"));
                        }
                        let size = f[1].parse().map_err(|_| parse_err(&rel, "bad size"))?;
                        let v = f[3].parse().map_err(|_| parse_err(&rel, "bad number"))?;
                        pnl.daily.entry((f[0].to_string(), size)).or_default().push(v);
                    }
                }
            }
        }
        let jaccard = (!jaccard.is_empty()).then(|| {
            let first = &jaccard.values().next().expect("nonempty")[0];
            let mean = |curves: &[&Vec<f64>]| (0..curves[0].len()).map(|k| curves.iter().map(|c| c[k]).sum::<f64>() / curves.len() as f64).collect::<Vec<_>>();
            JaccardSummary {
                percentiles: first.0.clone(),
                past: mean(&jaccard.values().next().expect("nonempty").iter().map(|c| &c.1).collect::<Vec<_>>()),
                models: jaccard.iter().map(|(m, cs)| (m.clone(), mean(&cs.iter().map(|c| &c.2).collect::<Vec<_>>()))).collect(),
            }
        });
        let pnl = (!grids[0].is_empty()).then(|| {
            for (k, reps) in grids.iter().enumerate() {
                pnl.grids[k] = (0..pnl.forecasters.len())
                    .map(|f| (0..pnl.sizes.len()).map(|s| reps.iter().map(|g| g[f][s]).sum::<f64>() / reps.len() as f64).collect())
                    .collect();
            }
            pnl
        });
        if !tables.is_empty() {
            datasets.push(DatasetReport { name: d.name.clone(), tables, jaccard, pnl });
        }
    }
    let failures: Vec<(String, String)> = manifest.failed().iter().map(|c| (c.id.clone(), c.error.clone().unwrap_or_default())).collect();
    let files = render(&datasets, &failures)?;
    for (rel, text) in &files {
        write_text(&out_dir.join(rel), text).map_err(|e| CliError::Io(e.to_string()))?;
    }
    Ok(files.into_iter().map(|(rel, _)| rel).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(values: &[[f64; 3]]) -> MetricTable {
        MetricTable {
            measures: (0..values.len()).map(|k| format!("m{k}")).collect(),
            models: vec!["a".into(), "b".into(), "c".into()],
            cells: values.iter().map(|r| r.iter().map(|&v| Some(v)).collect()).collect(),
        }
    }

    #[test]
    fn winners_include_ties() {
        let w = winners(&table(&[[0.1, 0.1, 0.3], [2.0, 1.0, 3.0]]));
        assert_eq!(w[0].models, vec!["a", "b"]);
        assert_eq!(w[1].models, vec!["b"]);
        assert_eq!(w[1].value, 1.0);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(render(&[], &[]).is_err());
    }

    #[test]
    fn two_replicates_get_dispersion() {
        let d = DatasetReport {
            name: "x".into(),
            tables: vec![(0, table(&[[1.0, 2.0, 3.0]])), (1, table(&[[3.0, 2.0, 1.0]]))],
            jaccard: None,
            pnl: None,
        };
        let files = render(&[d], &[]).unwrap();
        let get = |p: &str| files.iter().find(|(n, _)| n == p).map(|(_, t)| t.clone()).unwrap();
        let sd = MetricTable::from_csv(&get("report/x/metrics_sd.csv")).unwrap();
        assert_eq!(sd.get("m0", "a"), Some(1.0));
        assert_eq!(sd.get("m0", "b"), Some(0.0));
        assert!(get("report/x/table.txt").contains("2.0000 ± 1.0000"));
        assert!(get("report/summary.txt").contains("best m0"));
    }
}
