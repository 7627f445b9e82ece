//! Boundary-condition metadata per variable and per domain side.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One side of the rectangular domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    XMin,
    XMax,
    YMin,
    YMax,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::XMin, Side::XMax, Side::YMin, Side::YMax];

    pub fn index(self) -> usize {
        match self {
            Side::XMin => 0,
            Side::XMax => 1,
            Side::YMin => 2,
            Side::YMax => 3,
        }
    }

    pub fn axis(self) -> usize {
        match self {
            Side::XMin | Side::XMax => 0,
            Side::YMin | Side::YMax => 1,
        }
    }

    /// Component of the outward normal along the side's axis.
    pub fn outward_sign(self) -> f64 {
        match self {
            Side::XMin | Side::YMin => -1.0,
            Side::XMax | Side::YMax => 1.0,
        }
    }

    pub fn opposite(self) -> Side {
        match self {
            Side::XMin => Side::XMax,
            Side::XMax => Side::XMin,
            Side::YMin => Side::YMax,
            Side::YMax => Side::YMin,
        }
    }

    pub fn from_axis(axis: usize, upper: bool) -> Side {
        match (axis, upper) {
            (0, false) => Side::XMin,
            (0, true) => Side::XMax,
            (_, false) => Side::YMin,
            (_, true) => Side::YMax,
        }
    }
}

/// Boundary condition attached to one variable on one side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum Bc {
    /// Zero normal derivative. For the normal velocity this is a wall (`u·ν = 0`)
    /// with a zero-gradient tangential ghost.
    NeumannZero,
    Dirichlet(f64),
    Periodic,
    /// Zero-order extrapolation: ghost and boundary values copy the adjacent interior value.
    ExtrapolateZeroOrder,
    /// Wall with zero normal and zero tangential velocity.
    NoSlip,
}

/// Boundary conditions for density, velocity and potential, indexed by [`Side::index`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundarySpec {
    pub density: [Bc; 4],
    pub velocity: [Bc; 4],
    pub potential: [Bc; 4],
}

impl BoundarySpec {
    /// Homogeneous setting of the energy analysis: walls for the velocity and
    /// zero flux for density and potential.
    pub fn closed() -> Self {
        BoundarySpec {
            density: [Bc::NeumannZero; 4],
            velocity: [Bc::NoSlip; 4],
            potential: [Bc::NeumannZero; 4],
        }
    }

    pub fn density_at(&self, side: Side) -> Bc {
        self.density[side.index()]
    }

    pub fn velocity_at(&self, side: Side) -> Bc {
        self.velocity[side.index()]
    }

    pub fn potential_at(&self, side: Side) -> Bc {
        self.potential[side.index()]
    }

    /// Checks periodic pairing and the variables for which periodicity is supported.
    pub fn validate(&self, dim: usize) -> Result<()> {
        let sides: &[Side] = if dim == 1 {
            &Side::ALL[..2]
        } else {
            &Side::ALL[..]
        };
        for (name, bcs) in [
            ("density", &self.density),
            ("velocity", &self.velocity),
            ("potential", &self.potential),
        ] {
            for &side in sides {
                let here = bcs[side.index()];
                let there = bcs[side.opposite().index()];
                if matches!(here, Bc::Periodic) != matches!(there, Bc::Periodic) {
                    return Err(Error::Boundary(format!(
                        "{name}: periodic on {side:?} requires periodic on {:?}",
                        side.opposite()
                    )));
                }
                if matches!(here, Bc::Periodic) && name != "potential" {
                    return Err(Error::Boundary(format!(
                        "{name}: periodic boundaries are only supported for the potential"
                    )));
                }
            }
        }
        Ok(())
    }

    /// True when every velocity side is a wall, so no mass crosses the boundary.
    pub fn is_closed(&self, dim: usize) -> bool {
        self.velocity[..2 * dim]
            .iter()
            .all(|bc| matches!(bc, Bc::NoSlip | Bc::NeumannZero))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn periodic_must_pair() {
        let mut spec = BoundarySpec::closed();
        spec.potential[Side::XMin.index()] = Bc::Periodic;
        assert!(spec.validate(1).is_err());
        spec.potential[Side::XMax.index()] = Bc::Periodic;
        assert!(spec.validate(1).is_ok());
    }

    #[test]
    fn periodic_velocity_rejected() {
        let mut spec = BoundarySpec::closed();
        spec.velocity[0] = Bc::Periodic;
        spec.velocity[1] = Bc::Periodic;
        assert!(spec.validate(1).is_err());
    }

    #[test]
    fn bc_serde_shape() {
        let s = serde_json::to_string(&Bc::Dirichlet(-500.0)).unwrap();
        assert_eq!(s, r#"{"kind":"dirichlet","value":-500.0}"#);
        let back: Bc = serde_json::from_str(&s).unwrap();
        assert_eq!(back, Bc::Dirichlet(-500.0));
    }
}
