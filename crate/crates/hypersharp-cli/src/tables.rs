//! Result tables: machine-readable CSV at full precision and markdown
//! summaries with per-image and average columns.

use std::fmt::Write as _;

/// Direction in which a metric improves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Better {
    Lower,
    Higher,
}

#[derive(Debug, Clone, Copy)]
pub struct MetricSpec {
    pub name: &'static str,
    pub better: Better,
}

/// Scores for every (scene, method) cell of a campaign at one scale.
/// Methods that failed on a scene simply leave their cell empty.
#[derive(Debug)]
pub struct ResultsGrid {
    scenes: Vec<String>,
    methods: Vec<String>,
    metrics: Vec<MetricSpec>,
    cells: Vec<Option<Vec<f64>>>,
}

impl ResultsGrid {
    pub fn new(scenes: Vec<String>, methods: Vec<String>, metrics: Vec<MetricSpec>) -> Self {
        let cells = vec![None; scenes.len() * methods.len()];
        ResultsGrid {
            scenes,
            methods,
            metrics,
            cells,
        }
    }

    pub fn scenes(&self) -> &[String] {
        &self.scenes
    }

    pub fn methods(&self) -> &[String] {
        &self.methods
    }

    /// Records the metric values of one (scene, method) cell, in the order
    /// the metrics were declared.
    pub fn set(&mut self, scene: usize, method: usize, values: Vec<f64>) {
        assert_eq!(values.len(), self.metrics.len(), "one value per metric");
        self.cells[scene * self.methods.len() + method] = Some(values);
    }

    pub fn get(&self, scene: usize, method: usize) -> Option<&[f64]> {
        self.cells[scene * self.methods.len() + method].as_deref()
    }

    /// Full-precision CSV: one row per populated (scene, method) cell.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("scene,method");
        for m in &self.metrics {
            write!(out, ",{}", m.name.to_ascii_lowercase()).expect("string write");
        }
        out.push('\n');
        for (s, scene) in self.scenes.iter().enumerate() {
            for (m, method) in self.methods.iter().enumerate() {
                if let Some(values) = self.get(s, m) {
                    write!(out, "{scene},{method}").expect("string write");
                    for v in values {
                        write!(out, ",{v:.15e}").expect("string write");
                    }
                    out.push('\n');
                }
            }
        }
        out
    }

    /// Markdown report: one table per metric with a column per scene plus
    /// an average column; the best entry of every column is bold.
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        for (k, metric) in self.metrics.iter().enumerate() {
            if k > 0 {
                out.push('\n');
            }
            writeln!(out, "## {}\n", metric.name).expect("string write");
            out.push_str("| Method |");
            for scene in &self.scenes {
                write!(out, " {scene} |").expect("string write");
            }
            out.push_str(" Avg. |\n|---|");
            for _ in 0..=self.scenes.len() {
                out.push_str("---|");
            }
            out.push('\n');

            // Column values: per scene, then the per-method averages.
            let mut columns: Vec<Vec<Option<f64>>> = Vec::new();
            for s in 0..self.scenes.len() {
                columns.push(
                    (0..self.methods.len())
                        .map(|m| self.get(s, m).map(|v| v[k]))
                        .collect(),
                );
            }
            let averages: Vec<Option<f64>> = (0..self.methods.len())
                .map(|m| {
                    let present: Vec<f64> = (0..self.scenes.len())
                        .filter_map(|s| self.get(s, m).map(|v| v[k]))
                        .collect();
                    if present.len() == self.scenes.len() {
                        Some(present.iter().sum::<f64>() / present.len() as f64)
                    } else {
                        None
                    }
                })
                .collect();
            columns.push(averages);

            let best: Vec<Option<f64>> = columns
                .iter()
                .map(|col| {
                    col.iter().flatten().copied().reduce(|a, b| match metric.better {
                        Better::Lower => a.min(b),
                        Better::Higher => a.max(b),
                    })
                })
                .collect();

            for (m, method) in self.methods.iter().enumerate() {
                write!(out, "| {method} |").expect("string write");
                for (col, &col_best) in columns.iter().zip(&best) {
                    match col[m] {
                        Some(v) => {
                            if Some(v) == col_best {
                                write!(out, " **{v:.4}** |").expect("string write");
                            } else {
                                write!(out, " {v:.4} |").expect("string write");
                            }
                        }
                        None => out.push_str(" — |"),
                    }
                }
                out.push('\n');
            }
        }
        out
    }
}

/// Median of a non-empty slice (mean of the middle pair for even lengths).
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty slice");
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite runtimes"));
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// CSV of median wall-clock runtimes per method.
pub fn timings_csv(rows: &[(String, f64)]) -> String {
    let mut out = String::from("method,median_runtime_s\n");
    for (method, seconds) in rows {
        writeln!(out, "{method},{seconds:.6}").expect("string write");
    }
    out
}
