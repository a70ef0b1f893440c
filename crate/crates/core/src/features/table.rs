//! CSV form of a feature matrix: a header of feature names followed by
//! a `label` column, one row per patch.

use std::fmt::Write as _;

use crate::error::{bail, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl FeatureTable {
    pub fn to_csv(&self) -> String {
        let mut s = self.names.join(",");
        s.push_str(",label\n");
        for (row, label) in self.rows.iter().zip(&self.labels) {
            for v in row {
                let _ = write!(s, "{v},");
            }
            let _ = writeln!(s, "{label}");
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let Some(header) = lines.next() else {
            bail!(Format, "feature CSV is empty");
        };
        let mut names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
        if names.last().map(String::as_str) != Some("label") {
            bail!(Format, "feature CSV header must end with a 'label' column");
        }
        names.pop();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (i, line) in lines.enumerate() {
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            if cells.len() != names.len() + 1 {
                bail!(
                    Length,
                    "feature CSV row {} has {} cells, header has {}",
                    i + 1,
                    cells.len(),
                    names.len() + 1
                );
            }
            let row = cells[..names.len()]
                .iter()
                .map(|c| {
                    c.parse::<f64>()
                        .map_err(|_| crate::Error::Format(format!("row {}: '{c}'", i + 1)))
                })
                .collect::<Result<Vec<f64>>>()?;
            let label = cells[names.len()]
                .parse::<usize>()
                .map_err(|_| crate::Error::Label(format!("row {}: bad label", i + 1)))?;
            rows.push(row);
            labels.push(label);
        }
        Ok(Self {
            names,
            rows,
            labels,
        })
    }

    pub fn width(&self) -> usize {
        self.names.len()
    }

    /// Column `j` across all rows.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }
}
