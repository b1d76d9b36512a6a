//! Statistical post-processing: batch-means confidence intervals, the
//! contingency table built from representative points, the G-test of
//! independence, and the time-weighted product-vs-joint comparison.

use crate::sim::SimEstimate;
use crate::special::{chi_square_tail, student_t_quantile};
use crate::{Error, Result};

/// Batch-means confidence interval: `mean +- t_{n-1,(1+level)/2} s/sqrt(n)`.
pub fn batch_ci(batch_values: &[f64], level: f64) -> Result<(f64, f64)> {
    let n = batch_values.len();
    if n < 2 {
        return Err(Error::TooFewBatches(n));
    }
    assert!(level > 0.0 && level < 1.0, "confidence level in (0,1)");
    let nf = n as f64;
    let mean = batch_values.iter().sum::<f64>() / nf;
    let var = batch_values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let t = student_t_quantile(0.5 * (1.0 + level), nf - 1.0);
    Ok((mean, t * (var / nf).sqrt()))
}

/// A trimmed contingency table: no all-zero row or column remains, and the
/// labels record which queue-length values each row/column stands for.
#[derive(Debug, Clone, PartialEq)]
pub struct ContingencyTable {
    pub counts: Vec<Vec<u64>>,
    pub row_values: Vec<u32>,
    pub col_values: Vec<u32>,
    pub total: u64,
}

impl ContingencyTable {
    /// Build from joint observations `(z_row, z_col)`; never-observed values
    /// are trimmed away before degrees of freedom are counted.
    pub fn from_observations(points: &[(u32, u32)]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::DegenerateTable("no observations".into()));
        }
        let rmax = points.iter().map(|p| p.0).max().unwrap() as usize;
        let cmax = points.iter().map(|p| p.1).max().unwrap() as usize;
        let mut raw = vec![vec![0u64; cmax + 1]; rmax + 1];
        for &(a, b) in points {
            raw[a as usize][b as usize] += 1;
        }
        let row_values: Vec<u32> = (0..=rmax as u32)
            .filter(|&r| raw[r as usize].iter().any(|&c| c > 0))
            .collect();
        let col_values: Vec<u32> = (0..=cmax as u32)
            .filter(|&c| raw.iter().any(|row| row[c as usize] > 0))
            .collect();
        let counts: Vec<Vec<u64>> = row_values
            .iter()
            .map(|&r| col_values.iter().map(|&c| raw[r as usize][c as usize]).collect())
            .collect();
        Ok(ContingencyTable {
            counts,
            row_values,
            col_values,
            total: points.len() as u64,
        })
    }

    /// Wrap explicit counts (already positive in every row and column sum).
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        if counts.is_empty() || counts[0].is_empty() {
            return Err(Error::DegenerateTable("empty table".into()));
        }
        let r = counts.len();
        let c = counts[0].len();
        if counts.iter().any(|row| row.len() != c) {
            return Err(Error::DegenerateTable("ragged rows".into()));
        }
        for (i, row) in counts.iter().enumerate() {
            if row.iter().all(|&x| x == 0) {
                return Err(Error::DegenerateTable(format!("all-zero row {i}")));
            }
        }
        for j in 0..c {
            if counts.iter().all(|row| row[j] == 0) {
                return Err(Error::DegenerateTable(format!("all-zero column {j}")));
            }
        }
        let total = counts.iter().flatten().sum();
        Ok(ContingencyTable {
            counts,
            row_values: (0..r as u32).collect(),
            col_values: (0..c as u32).collect(),
            total,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.counts.len(), self.counts[0].len())
    }
}

/// Result of the likelihood-ratio independence test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GTest {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

/// G-test of independence: `G = 2 sum O ln(O/E)` over the observed cells,
/// `E = row * col / total`, against chi-square with `(R-1)(C-1)` degrees of
/// freedom. Zero-count cells contribute nothing (the `x ln x -> 0` limit).
pub fn g_test(table: &ContingencyTable) -> Result<GTest> {
    let (r, c) = table.shape();
    if r < 2 || c < 2 {
        return Err(Error::DegenerateTable(format!(
            "{r}x{c} table has zero degrees of freedom"
        )));
    }
    if table.total == 0 {
        return Err(Error::DegenerateTable("zero total count".into()));
    }
    let row_sums: Vec<f64> = table
        .counts
        .iter()
        .map(|row| row.iter().sum::<u64>() as f64)
        .collect();
    let col_sums: Vec<f64> = (0..c)
        .map(|j| table.counts.iter().map(|row| row[j]).sum::<u64>() as f64)
        .collect();
    let total = table.total as f64;
    let mut g = 0.0;
    for i in 0..r {
        for j in 0..c {
            let o = table.counts[i][j] as f64;
            if o > 0.0 {
                let e = row_sums[i] * col_sums[j] / total;
                g += o * (o / e).ln();
            }
        }
    }
    g *= 2.0;
    let df = (r - 1) * (c - 1);
    Ok(GTest {
        statistic: g,
        df,
        p_value: chi_square_tail(g, df as f64),
    })
}

/// Build the contingency table of the first two stations from the
/// representative points of a simulation.
pub fn contingency_from_estimate(estimate: &SimEstimate) -> Result<ContingencyTable> {
    if estimate.representative_points.is_empty() {
        return Err(Error::JointUnavailable(
            "run the simulation with joint_interval set".into(),
        ));
    }
    if estimate.stations.len() < 2 {
        return Err(Error::JointUnavailable("need at least two stations".into()));
    }
    let points: Vec<(u32, u32)> = estimate
        .representative_points
        .iter()
        .map(|z| (z[0], z[1]))
        .collect();
    ContingencyTable::from_observations(&points)
}

/// One cell of the product-vs-joint comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointCell {
    /// `P(Z_0 = k0) * P(Z_1 = k1)`, time-weighted marginals.
    pub product: f64,
    /// `P(Z_0 = k0, Z_1 = k1)`, time-weighted.
    pub joint: f64,
}

/// Time-weighted product-vs-joint occupancy matrix for queue values up to
/// `k_max` at the first two stations, mirroring the joint-percentage table
/// layout.
pub fn joint_product_report(estimate: &SimEstimate, k_max: usize) -> Result<Vec<Vec<JointCell>>> {
    let joint = estimate
        .joint_time
        .as_ref()
        .ok_or_else(|| Error::JointUnavailable("network has fewer than two stations".into()))?;
    let cap = estimate.config.pmf_cap;
    let k_max = k_max.min(cap);
    let window = estimate.window;
    let mut out = Vec::with_capacity(k_max + 1);
    for k0 in 0..=k_max {
        let mut row = Vec::with_capacity(k_max + 1);
        for k1 in 0..=k_max {
            row.push(JointCell {
                product: estimate.stations[0].pmf[k0] * estimate.stations[1].pmf[k1],
                joint: joint[k0][k1] / window,
            });
        }
        out.push(row);
    }
    Ok(out)
}
