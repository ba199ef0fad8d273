//! Experiment reports: per-item metric rows, aggregates and file output.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path as FsPath;

use crate::error::Result;
use crate::readout::mean_std;

use super::config::Preset;

/// One measured value.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub group: String,
    pub seed: u64,
    pub item: String,
    pub metric: String,
    pub value: f64,
}

/// Count, mean and population std of one `(group, metric)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub group: String,
    pub metric: String,
    pub count: usize,
    pub mean: f64,
    pub std: f64,
}

/// Extra plot-ready table written as its own CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub preset: Preset,
    pub rows: Vec<MetricRow>,
    pub tables: Vec<Table>,
    /// Wall-clock seconds by label; never part of the deterministic output.
    pub timings: Vec<(String, f64)>,
    pub config_echo: String,
}

impl Report {
    pub fn new(preset: Preset, config_echo: String) -> Self {
        Self { preset, rows: Vec::new(), tables: Vec::new(), timings: Vec::new(), config_echo }
    }

    pub fn push(&mut self, group: impl Into<String>, seed: u64, item: impl Into<String>, metric: &str, value: f64) {
        self.rows.push(MetricRow { group: group.into(), seed, item: item.into(), metric: metric.to_string(), value });
    }

    pub fn time(&mut self, label: impl Into<String>, seconds: f64) {
        self.timings.push((label.into(), seconds));
    }

    /// Aggregates in first-appearance order of `(group, metric)`.
    pub fn aggregates(&self) -> Vec<Aggregate> {
        let mut order: Vec<(String, String)> = Vec::new();
        let mut values: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
        for r in &self.rows {
            let key = (r.group.clone(), r.metric.clone());
            values
                .entry(key.clone())
                .or_insert_with(|| {
                    order.push(key);
                    Vec::new()
                })
                .push(r.value);
        }
        order
            .into_iter()
            .map(|key| {
                let v = &values[&key];
                let (mean, std) = mean_std(v);
                Aggregate { group: key.0, metric: key.1, count: v.len(), mean, std }
            })
            .collect()
    }

    /// Values of `metric` in `group`, in insertion order.
    pub fn values(&self, group: &str, metric: &str) -> Vec<f64> {
        self.rows.iter().filter(|r| r.group == group && r.metric == metric).map(|r| r.value).collect()
    }

    /// Mean of `metric` in `group`, if present.
    pub fn mean(&self, group: &str, metric: &str) -> Option<f64> {
        let v = self.values(group, metric);
        (!v.is_empty()).then(|| mean_std(&v).0)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn metrics_csv(&self) -> String {
        let mut out = String::from("group,seed,item,metric,value\n");
        for r in &self.rows {
            out += &format!("{},{},{},{},{}\n", r.group, r.seed, r.item, r.metric, r.value);
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from("group,metric,count,mean,std\n");
        for a in self.aggregates() {
            out += &format!("{},{},{},{},{}\n", a.group, a.metric, a.count, a.mean, a.std);
        }
        out
    }

    pub fn summary_text(&self) -> String {
        let aggs = self.aggregates();
        let gw = aggs.iter().map(|a| a.group.len()).chain([5]).max().unwrap_or(5);
        let mw = aggs.iter().map(|a| a.metric.len()).chain([6]).max().unwrap_or(6);
        let mut out = format!("preset: {}\n\n", self.preset);
        out += &format!("{:<gw$}  {:<mw$}  {:>6}  {:>12}  {:>12}\n", "group", "metric", "count", "mean", "std");
        for a in aggs {
            out +=
                &format!("{:<gw$}  {:<mw$}  {:>6}  {:>12.4e}  {:>12.4e}\n", a.group, a.metric, a.count, a.mean, a.std);
        }
        out
    }

    pub fn timings_csv(&self) -> String {
        let mut out = String::from("label,seconds\n");
        for (l, s) in &self.timings {
            out += &format!("{l},{s}\n");
        }
        out
    }

    /// Writes `metrics.csv`, `summary.csv`, `summary.txt`, `timings.csv`,
    /// `config.toml` and one CSV per extra table into `dir`.
    pub fn write_to(&self, dir: &FsPath) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("metrics.csv"), self.metrics_csv())?;
        fs::write(dir.join("summary.csv"), self.summary_csv())?;
        fs::write(dir.join("summary.txt"), self.summary_text())?;
        fs::write(dir.join("timings.csv"), self.timings_csv())?;
        fs::write(dir.join("config.toml"), &self.config_echo)?;
        for t in &self.tables {
            let mut f = fs::File::create(dir.join(format!("{}.csv", t.name)))?;
            writeln!(f, "{}", t.header.join(","))?;
            for row in &t.rows {
                let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                writeln!(f, "{}", cells.join(","))?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aggregates_match_rows() {
        let mut r = Report::new(Preset::Custom, String::new());
        for (i, v) in [1.0, 2.0, 4.0].iter().enumerate() {
            r.push("a", 0, i.to_string(), "err", *v);
        }
        r.push("b", 1, "0", "err", 3.0);
        let aggs = r.aggregates();
        assert_eq!(aggs.len(), 2);
        assert_eq!(aggs[0].count, 3);
        assert!((aggs[0].mean - 7.0 / 3.0).abs() < 1e-15);
        assert_eq!(aggs[1].std, 0.0);
        assert_eq!(r.mean("a", "err"), Some(7.0 / 3.0));
        assert_eq!(r.mean("c", "err"), None);
    }

    #[test]
    fn writes_all_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = Report::new(Preset::Custom, "x = 1\n".into());
        r.push("a", 0, "0", "err", 0.5);
        r.time("fit", 1.0);
        r.tables.push(Table {
            name: "band".into(),
            header: vec!["t".into(), "mean".into()],
            rows: vec![vec![0.0, 1.0]],
        });
        r.write_to(dir.path()).unwrap();
        for f in ["metrics.csv", "summary.csv", "summary.txt", "timings.csv", "config.toml", "band.csv"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let m = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
        assert_eq!(m, "group,seed,item,metric,value\na,0,0,err,0.5\n");
    }
}
