//! Enumeration of benchmark test conditions.
//!
//! A condition is one cell of one of the four two-factor grids (SP→GA,
//! GA→SP, SP→RO, RO→SP), or the clean condition. Labels follow a small
//! grammar: `clean`, or a concatenation of `SP{d}`, `GA{v}`, `RL{deg}` and
//! `RR{deg}` components in application order, with identity components left
//! out.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::perturb::{PerturbError, PerturbationKind, PerturbationSpec};

pub const CLEAN_LABEL: &str = "clean";

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("{0} level list is empty")]
    EmptyLevels(&'static str),
    #[error("{0} levels must be strictly increasing")]
    UnorderedLevels(&'static str),
    #[error(transparent)]
    Level(#[from] PerturbError),
    #[error("cannot parse condition label {label:?}: {reason}")]
    BadLabel { label: String, reason: String },
}

/// `(grid, first kind, first levels, second kind, second levels)`.
type GridAxes<'a> = (Grid, PerturbationKind, &'a [f64], PerturbationKind, &'a [f64]);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub sp_levels: Vec<f64>,
    pub ga_levels: Vec<f64>,
    pub ro_levels: Vec<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            sp_levels: vec![0.0, 0.1, 0.15, 0.2],
            ga_levels: vec![0.0, 0.1, 0.15, 0.2],
            ro_levels: vec![-60.0, -30.0, 0.0, 30.0, 60.0],
        }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<(), GridError> {
        let lists = [
            ("salt & pepper", PerturbationKind::SaltPepper, &self.sp_levels),
            ("gaussian", PerturbationKind::Gaussian, &self.ga_levels),
            ("rotation", PerturbationKind::Rotation, &self.ro_levels),
        ];
        for (name, kind, levels) in lists {
            if levels.is_empty() {
                return Err(GridError::EmptyLevels(name));
            }
            if levels
                .windows(2)
                .any(|w| w[0].partial_cmp(&w[1]) != Some(Ordering::Less))
            {
                return Err(GridError::UnorderedLevels(name));
            }
            for &level in levels.iter() {
                PerturbationSpec::new(kind, level)?;
            }
        }
        Ok(())
    }

    /// The four two-factor grids in enumeration order.
    fn grids(&self) -> [GridAxes<'_>; 4] {
        use PerturbationKind::*;
        [
            (Grid::SpGa, SaltPepper, &self.sp_levels, Gaussian, &self.ga_levels),
            (Grid::GaSp, Gaussian, &self.ga_levels, SaltPepper, &self.sp_levels),
            (Grid::SpRo, SaltPepper, &self.sp_levels, Rotation, &self.ro_levels),
            (Grid::RoSp, Rotation, &self.ro_levels, SaltPepper, &self.sp_levels),
        ]
    }

    /// Number of conditions [`enumerate_conditions`] yields for this config.
    pub fn condition_count(&self) -> usize {
        let grids = self.grids();
        let cells: usize = grids.iter().map(|g| g.2.len() * g.4.len()).sum();
        let identity_cells = grids
            .iter()
            .filter(|g| g.2.contains(&0.0) && g.4.contains(&0.0))
            .count();
        cells - identity_cells + usize::from(identity_cells > 0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Grid {
    Clean,
    SpGa,
    GaSp,
    SpRo,
    RoSp,
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Grid::Clean => "CLEAN",
            Grid::SpGa => "SP_GA",
            Grid::GaSp => "GA_SP",
            Grid::SpRo => "SP_RO",
            Grid::RoSp => "RO_SP",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub ordinal: u32,
    pub grid: Grid,
    /// Severities in application order.
    pub cell: (f64, f64),
    /// Effective (non-identity) perturbations in application order.
    pub specs: Vec<PerturbationSpec>,
    pub canonical_label: String,
}

impl Condition {
    /// Output subdirectory, unique even when labels repeat across grids.
    pub fn directory(&self) -> String {
        format!("{}#{}", self.canonical_label, self.ordinal)
    }

    pub fn is_clean(&self) -> bool {
        self.specs.is_empty()
    }
}

fn component(spec: &PerturbationSpec) -> String {
    match spec.kind {
        PerturbationKind::Rotation if spec.severity < 0.0 => format!("RL{}", -spec.severity),
        PerturbationKind::Rotation => format!("RR{}", spec.severity),
        kind => format!("{}{}", kind.code(), spec.severity),
    }
}

/// Label for an ordered list of perturbations; identity steps are skipped.
pub fn label_for_specs(specs: &[PerturbationSpec]) -> String {
    let label: String = specs
        .iter()
        .filter(|s| !s.is_identity())
        .map(component)
        .collect();
    if label.is_empty() {
        CLEAN_LABEL.to_string()
    } else {
        label
    }
}

fn effective_specs(grid: Grid, cell: (f64, f64)) -> Vec<PerturbationSpec> {
    use PerturbationKind::*;
    let kinds = match grid {
        Grid::Clean => return Vec::new(),
        Grid::SpGa => (SaltPepper, Gaussian),
        Grid::GaSp => (Gaussian, SaltPepper),
        Grid::SpRo => (SaltPepper, Rotation),
        Grid::RoSp => (Rotation, SaltPepper),
    };
    [(kinds.0, cell.0), (kinds.1, cell.1)]
        .into_iter()
        .filter(|&(_, s)| s != 0.0)
        .map(|(kind, severity)| PerturbationSpec { kind, severity })
        .collect()
}

/// Canonical label of one grid cell.
pub fn canonical_label(grid: Grid, cell: (f64, f64)) -> String {
    label_for_specs(&effective_specs(grid, cell))
}

/// Every test condition for `config`: clean first (when any grid has an
/// all-identity cell), then the SP_GA, GA_SP, SP_RO and RO_SP grids in
/// row-major order with their all-identity cells removed. Ordinals start at 1.
pub fn enumerate_conditions(config: &GridConfig) -> Result<Vec<Condition>, GridError> {
    config.validate()?;
    let grids = config.grids();
    let mut conditions = Vec::with_capacity(config.condition_count());
    let mut push = |grid: Grid, cell: (f64, f64)| {
        let specs = effective_specs(grid, cell);
        conditions.push(Condition {
            ordinal: conditions.len() as u32 + 1,
            grid,
            cell,
            canonical_label: label_for_specs(&specs),
            specs,
        });
    };

    if grids.iter().any(|g| g.2.contains(&0.0) && g.4.contains(&0.0)) {
        push(Grid::Clean, (0.0, 0.0));
    }
    for (grid, _, first, _, second) in grids {
        for &a in first {
            for &b in second {
                if a == 0.0 && b == 0.0 {
                    continue;
                }
                push(grid, (a, b));
            }
        }
    }
    Ok(conditions)
}

/// Parses a canonical label back into its effective perturbation sequence.
pub fn parse_label(label: &str) -> Result<Vec<PerturbationSpec>, GridError> {
    let bad = |reason: &str| GridError::BadLabel {
        label: label.to_string(),
        reason: reason.to_string(),
    };
    if label == CLEAN_LABEL {
        return Ok(Vec::new());
    }
    if label.is_empty() {
        return Err(bad("empty label"));
    }

    let mut specs = Vec::new();
    let mut rest = label;
    while !rest.is_empty() {
        if rest.len() < 2 || !rest.is_char_boundary(2) {
            return Err(bad("truncated component"));
        }
        let (code, tail) = rest.split_at(2);
        let digits = tail
            .find(|c: char| !(c.is_ascii_digit() || c == '.'))
            .unwrap_or(tail.len());
        let (number, remainder) = tail.split_at(digits);
        let value: f64 = number
            .parse()
            .map_err(|_| bad(&format!("bad severity after {code}")))?;
        let spec = match code {
            "SP" => PerturbationSpec::salt_pepper(value),
            "GA" => PerturbationSpec::gaussian(value),
            "RL" => PerturbationSpec::rotation(-value),
            "RR" => PerturbationSpec::rotation(value),
            _ => return Err(bad(&format!("unknown component {code}"))),
        }
        .map_err(|e| bad(&e.to_string()))?;
        if spec.is_identity() {
            return Err(bad("identity components are not written in labels"));
        }
        specs.push(spec);
        rest = remainder;
    }
    Ok(specs)
}
