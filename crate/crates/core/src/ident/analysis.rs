use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::sensitivity::SensitivityMatrix;
use super::vector::ParamId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankedNorm {
    pub param: ParamId,
    pub norm: f64,
}

/// Column norms over the voltage rows and over all rows, each sorted descending.
#[derive(Debug, Clone, PartialEq)]
pub struct NormTable {
    pub voltage: Vec<RankedNorm>,
    pub multi: Vec<RankedNorm>,
}

impl NormTable {
    pub fn multi_norm(&self, p: ParamId) -> Option<f64> {
        self.multi.iter().find(|r| r.param == p).map(|r| r.norm)
    }

    pub fn voltage_norm(&self, p: ParamId) -> Option<f64> {
        self.voltage.iter().find(|r| r.param == p).map(|r| r.norm)
    }
}

fn ranked(s: &SensitivityMatrix, f: impl Fn(usize) -> f64) -> Vec<RankedNorm> {
    let mut v: Vec<RankedNorm> = (0..s.cols())
        .map(|j| RankedNorm {
            param: s.params()[j],
            norm: f(j),
        })
        .collect();
    // stable: ties keep column order
    v.sort_by(|a, b| b.norm.total_cmp(&a.norm));
    v
}

pub fn multi_vs_single_output_norms(s: &SensitivityMatrix) -> NormTable {
    NormTable {
        voltage: ranked(s, |j| s.voltage_norm(j)),
        multi: ranked(s, |j| s.norm(j)),
    }
}

/// Columns at or below this fraction of the largest norm count as zero.
pub const ZERO_NORM_REL: f64 = 1e-12;

/// Cosine similarity between sensitivity columns.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub params: Vec<ParamId>,
    pub values: DMatrix<f64>,
    /// Zero-norm columns left out, with the reason.
    pub excluded: Vec<(ParamId, String)>,
}

impl CorrelationMatrix {
    pub fn get(&self, a: ParamId, b: ParamId) -> Option<f64> {
        let i = self.params.iter().position(|p| *p == a)?;
        let j = self.params.iter().position(|p| *p == b)?;
        Some(self.values[(i, j)])
    }

    /// Full-precision dump, one row per line.
    pub fn to_text(&self) -> String {
        let mut out = String::from("#");
        for p in &self.params {
            out.push_str(&format!(" {p}"));
        }
        out.push('\n');
        for (i, p) in self.params.iter().enumerate() {
            out.push_str(p.name());
            for j in 0..self.params.len() {
                out.push_str(&format!(" {:e}", self.values[(i, j)]));
            }
            out.push('\n');
        }
        for (p, why) in &self.excluded {
            out.push_str(&format!("# excluded {p}: {why}\n"));
        }
        out
    }
}

pub fn correlation_matrix(s: &SensitivityMatrix) -> CorrelationMatrix {
    let max = (0..s.cols()).map(|j| s.norm(j)).fold(0.0, f64::max);
    let mut keep = Vec::new();
    let mut excluded = Vec::new();
    for j in 0..s.cols() {
        let n = s.norm(j);
        if n > ZERO_NORM_REL * max && n > 0.0 {
            keep.push(j);
        } else {
            excluded.push((s.params()[j], format!("zero-norm column (norm {n:e})")));
        }
    }
    let a = DMatrix::from_fn(s.rows(), keep.len(), |r, c| s.get(r, keep[c]));
    let gram = a.tr_mul(&a);
    let d: Vec<f64> = keep.iter().map(|j| s.norm(*j)).collect();
    let mut values = DMatrix::from_fn(keep.len(), keep.len(), |i, j| {
        if i == j {
            1.0
        } else {
            (gram[(i, j)] / (d[i] * d[j])).clamp(-1.0, 1.0)
        }
    });
    // exact symmetry regardless of summation order
    for i in 0..keep.len() {
        for j in 0..i {
            values[(i, j)] = values[(j, i)];
        }
    }
    CorrelationMatrix {
        params: keep.iter().map(|j| s.params()[*j]).collect(),
        values,
        excluded,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SubsetConfig {
    pub sens_threshold: f64,
    pub corr_threshold: f64,
}

impl Default for SubsetConfig {
    fn default() -> Self {
        Self {
            sens_threshold: 0.2,
            corr_threshold: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Exclusion {
    Insensitive { param: ParamId, norm: f64 },
    Correlated { param: ParamId, with: ParamId, corr: f64 },
    Uncorrelated { param: ParamId },
}

impl std::fmt::Display for Exclusion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Exclusion::Insensitive { param, norm } => write!(f, "{param}: norm {norm:.6e} at or below threshold"),
            Exclusion::Correlated { param, with, corr } => {
                write!(f, "{param}: |corr| with {with} is {:.6}", corr.abs())
            }
            Exclusion::Uncorrelated { param } => write!(f, "{param}: not in the correlation matrix"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Subset {
    pub selected: Vec<ParamId>,
    pub log: Vec<Exclusion>,
}

/// Greedy walk down `ranking`: a parameter joins if its norm exceeds the sensitivity
/// threshold and its |correlation| with every member so far stays below the
/// correlation threshold. The first blocking member is logged.
pub fn subset_select(ranking: &[RankedNorm], corr: &CorrelationMatrix, cfg: &SubsetConfig) -> Subset {
    let mut out = Subset::default();
    for r in ranking {
        if !(r.norm > cfg.sens_threshold) {
            out.log.push(Exclusion::Insensitive {
                param: r.param,
                norm: r.norm,
            });
            continue;
        }
        if corr.get(r.param, r.param).is_none() {
            out.log.push(Exclusion::Uncorrelated { param: r.param });
            continue;
        }
        let blocker = out.selected.iter().find_map(|s| {
            let c = corr.get(r.param, *s)?;
            (c.abs() >= cfg.corr_threshold).then_some((*s, c))
        });
        match blocker {
            Some((with, c)) => out.log.push(Exclusion::Correlated {
                param: r.param,
                with,
                corr: c,
            }),
            None => out.selected.push(r.param),
        }
    }
    out
}

/// Ranking, correlation and subset of one sensitivity matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub norms: NormTable,
    pub correlation: CorrelationMatrix,
    pub subset: Subset,
}

pub fn analyze(s: &SensitivityMatrix, cfg: &SubsetConfig) -> Analysis {
    let norms = multi_vs_single_output_norms(s);
    let correlation = correlation_matrix(s);
    let subset = subset_select(&norms.multi, &correlation, cfg);
    Analysis {
        norms,
        correlation,
        subset,
    }
}
