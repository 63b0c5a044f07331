//! Surrender regions, optimal boundaries and the sign-of-`L` section
//! classifier.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Result, VaError};
use crate::model::{ChargeSpec, Scenario};
use crate::surface::{Grid, RewardKind, ValueSurface};

/// Gap tolerance for deciding `v = obstacle`.
///
/// A node is in the surrender region when `v - obstacle <= abs + rel * obstacle`.
/// Both default to zero: the solvers compute the gap directly and project it
/// onto zero exactly where stopping is optimal, while genuine premiums can be
/// far smaller than any fixed threshold (deep in the money near maturity).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionTolerance {
    #[serde(default)]
    pub abs: f64,
    #[serde(default)]
    pub rel: f64,
}

impl Default for RegionTolerance {
    fn default() -> Self {
        RegionTolerance { abs: 0.0, rel: 0.0 }
    }
}

/// Per-node surrender flags on `[0, T)`; the maturity slice is always false.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionMask {
    pub grid: Grid,
    pub reward_kind: RewardKind,
    pub tolerance: RegionTolerance,
    flags: Vec<bool>,
}

impl RegionMask {
    /// Mask from explicit flags, one row per time node.
    pub fn from_rows(grid: Grid, reward_kind: RewardKind, rows: &[Vec<bool>]) -> Result<Self> {
        if rows.len() != grid.n_times() || rows.iter().any(|r| r.len() != grid.n_states()) {
            return Err(VaError::GridMismatch("mask rows do not match the grid".into()));
        }
        let mut flags: Vec<bool> = rows.concat();
        let m = grid.n_states();
        let last = grid.n_times() - 1;
        flags[last * m..].iter_mut().for_each(|f| *f = false);
        Ok(RegionMask {
            grid,
            reward_kind,
            tolerance: RegionTolerance::default(),
            flags,
        })
    }

    pub fn in_surrender(&self, n: usize, i: usize) -> bool {
        self.flags[n * self.grid.n_states() + i]
    }

    /// Membership of an off-grid state: the flag of the nearest node at or
    /// below `x`, so a threshold section `x_i >= b` extends to `x >= b`.
    pub fn contains(&self, n: usize, x: f64) -> bool {
        let xs = &self.grid.xnodes;
        let i = xs.partition_point(|&xi| xi <= x).saturating_sub(1);
        self.in_surrender(n, i)
    }

    pub fn section(&self, n: usize) -> &[bool] {
        let m = self.grid.n_states();
        &self.flags[n * m..(n + 1) * m]
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    pub fn count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }
}

/// Flags the nodes where the surface touches its obstacle.
pub fn extract_regions(surface: &ValueSurface, tolerance: RegionTolerance) -> RegionMask {
    let grid = surface.grid.clone();
    let (nt, m) = (grid.n_times(), grid.n_states());
    let mut flags = vec![false; nt * m];
    for n in 0..nt - 1 {
        for i in 0..m {
            let thr = tolerance.abs + tolerance.rel * surface.obstacle(n, i).abs();
            flags[n * m + i] = surface.gap(n, i) <= thr;
        }
    }
    RegionMask {
        grid,
        reward_kind: surface.reward_kind,
        tolerance,
        flags,
    }
}

/// A continuation node lying above the first surrender node of its slice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StructuralViolation {
    pub n: usize,
    pub t: f64,
    pub x: f64,
}

/// Optimal boundary `b(t) = inf S_t` per time slice on `[0, T)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Boundary {
    /// Time nodes `t_0 .. t_{N-1}`.
    pub tnodes: Vec<f64>,
    /// `None` marks an empty section.
    pub levels: Vec<Option<f64>>,
    /// Grid index of each finite level, when extracted from a mask.
    pub indices: Vec<Option<usize>>,
    pub violations: Vec<StructuralViolation>,
}

impl Boundary {
    /// Boundary from explicit levels on `tnodes` (maturity excluded).
    pub fn from_levels(tnodes: Vec<f64>, levels: Vec<Option<f64>>) -> Result<Self> {
        if tnodes.len() != levels.len() || tnodes.is_empty() {
            return Err(VaError::GridMismatch("boundary levels do not match the time nodes".into()));
        }
        let indices = vec![None; levels.len()];
        Ok(Boundary {
            tnodes,
            levels,
            indices,
            violations: Vec::new(),
        })
    }

    /// Every section empty.
    pub fn empty(tnodes: Vec<f64>) -> Self {
        let levels = vec![None; tnodes.len()];
        Boundary::from_levels(tnodes, levels).unwrap()
    }

    pub fn is_empty_at(&self, n: usize) -> bool {
        self.levels[n].is_none()
    }

    /// Level in force at time `s`: the value at the last node `t_n <= s`.
    pub fn level_at(&self, s: f64) -> Option<f64> {
        let k = self.tnodes.partition_point(|&t| t <= s * (1.0 + 1e-14) + 1e-14);
        if k == 0 {
            return self.levels[0];
        }
        self.levels[k - 1]
    }

    /// Writes `t,b_t,empty_flag`; empty sections print `inf`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "t,b_t,empty_flag")?;
        for (t, b) in self.tnodes.iter().zip(&self.levels) {
            match b {
                Some(b) => writeln!(out, "{t},{b},0")?,
                None => writeln!(out, "{t},inf,1")?,
            }
        }
        Ok(())
    }
}

/// Lowest surrender node of each slice, with a report of slices that are not
/// of threshold form.
pub fn extract_boundary(mask: &RegionMask) -> Boundary {
    let grid = &mask.grid;
    let nt = grid.n_times() - 1;
    let mut levels = Vec::with_capacity(nt);
    let mut indices = Vec::with_capacity(nt);
    let mut violations = Vec::new();
    for n in 0..nt {
        let sec = mask.section(n);
        match sec.iter().position(|&f| f) {
            Some(j) => {
                levels.push(Some(grid.xnodes[j]));
                indices.push(Some(j));
                for (i, &f) in sec.iter().enumerate().skip(j + 1) {
                    if !f {
                        violations.push(StructuralViolation {
                            n,
                            t: grid.tnodes[n],
                            x: grid.xnodes[i],
                        });
                    }
                }
            }
            None => {
                levels.push(None);
                indices.push(None);
            }
        }
    }
    Boundary {
        tnodes: grid.tnodes[..nt].to_vec(),
        levels,
        indices,
        violations,
    }
}

/// Predicted shape of a time section from the sign of `L(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SectionClass {
    /// `L(t) >= 0`: no surrender at `t`.
    Empty,
    /// `L(t) < 0`: surrender expected above some level (proven when `L < 0`
    /// on all of `[0, T)`, conjectured otherwise).
    NonemptyConjectured,
    /// `|L(t)|` is below the accuracy of a numerically differentiated charge.
    Undetermined,
}

/// Classifies each `t` in `tgrid` (all in `[0, T)`) by the sign of `L(t)`.
pub fn classify_sections(scn: &Scenario, tgrid: &[f64]) -> Result<Vec<SectionClass>> {
    if !scn.is_time_only() {
        return Err(VaError::Unsupported(
            "section classification needs a time-only fee and charge".into(),
        ));
    }
    let numeric = matches!(scn.charge, ChargeSpec::GeneralTime(_));
    tgrid
        .iter()
        .map(|&t| {
            if scn.is_maturity(t) {
                return Err(VaError::Domain(format!("sections are defined on [0, T); got t = {t}")));
            }
            scn.check_point(t, 1.0)?;
            let c = scn.fee.rate_unchecked(t, 1.0, scn.maturity());
            let (l, scale) = scn.l_with_fee(t, 1.0, c);
            let noise = if numeric { 1e-6 } else { 1e-12 } * scale;
            Ok(if numeric && l.abs() <= noise {
                SectionClass::Undetermined
            } else if l >= -noise {
                SectionClass::Empty
            } else {
                SectionClass::NonemptyConjectured
            })
        })
        .collect()
}

/// Node-wise comparison of two masks.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionComparison {
    pub equal: bool,
    /// `(n, i)` nodes flagged in exactly one mask.
    pub sym_diff: Vec<(usize, usize)>,
}

pub fn compare_regions(a: &RegionMask, b: &RegionMask) -> Result<RegionComparison> {
    if a.grid != b.grid {
        return Err(VaError::GridMismatch("masks live on different grids".into()));
    }
    let m = a.grid.n_states();
    let sym_diff: Vec<(usize, usize)> = a
        .flags
        .iter()
        .zip(&b.flags)
        .enumerate()
        .filter(|(_, (x, y))| x != y)
        .map(|(k, _)| (k / m, k % m))
        .collect();
    Ok(RegionComparison {
        equal: sym_diff.is_empty(),
        sym_diff,
    })
}
