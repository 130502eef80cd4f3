//! Named right-hand sides of the experiment suite.

use longdomain_core::{CrossSectionGrid, CrossSectionShape};

use crate::BenchError;

/// Experiment family: planar cylinder (interval cross section) or the
/// three-dimensional domain with the L-shaped cross section.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Case {
    TwoD,
    ThreeD,
}

impl Case {
    pub fn shape(self) -> CrossSectionShape {
        match self {
            Case::TwoD => CrossSectionShape::Interval,
            Case::ThreeD => CrossSectionShape::LShape,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Case::TwoD => "2d",
            Case::ThreeD => "3d",
        }
    }

    pub fn parse(s: &str) -> Result<Self, BenchError> {
        match s {
            "2d" => Ok(Case::TwoD),
            "3d" => Ok(Case::ThreeD),
            other => Err(BenchError::Parse(format!("unknown case '{other}'"))),
        }
    }
}

/// Right-hand-side names available per case.
pub fn rhs_names(case: Case) -> &'static [&'static str] {
    match case {
        Case::TwoD => &["one", "sin", "tanh", "abs"],
        Case::ThreeD => &["one", "sinx2x3", "tanhx2x3"],
    }
}

fn eval(case: Case, name: &str, c: &[f64; 2]) -> Option<f64> {
    match case {
        Case::TwoD => match name {
            "one" => Some(1.0),
            "sin" => Some((2.0 * c[0] + 0.5).sin()),
            "tanh" => Some((4.0 * c[0] + 1.0).tanh()),
            // sampled pointwise at the nodes, no smoothing at the kink
            "abs" => Some(c[0].abs()),
            _ => None,
        },
        Case::ThreeD => match name {
            "one" => Some(1.0),
            "sinx2x3" => Some((c[0] + 0.5).sin() * c[1]),
            "tanhx2x3" => Some((c[0] * c[1]).tanh()),
            _ => None,
        },
    }
}

/// Sample a catalog right-hand side on a cross-section grid.
pub fn rhs_vector(case: Case, name: &str, gridcs: &CrossSectionGrid) -> Result<Vec<f64>, BenchError> {
    if gridcs.shape() != case.shape() {
        return Err(BenchError::Parse(format!(
            "cross-section shape does not match case {}",
            case.as_str()
        )));
    }
    gridcs
        .coords()
        .iter()
        .map(|c| {
            eval(case, name, c).ok_or_else(|| {
                BenchError::Parse(format!("unknown rhs '{name}' for case {}", case.as_str()))
            })
        })
        .collect()
}
