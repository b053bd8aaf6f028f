use std::fmt;

use serde::{Deserialize, Serialize};

/// Inclusive bounds and step of one integer design parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamBound {
    pub name: &'static str,
    pub min: i32,
    pub max: i32,
    pub step: i32,
}

impl ParamBound {
    /// Number of admissible grid values.
    pub fn cells(&self) -> usize {
        ((self.max - self.min) / self.step + 1) as usize
    }

    /// Nearest admissible grid value to `value`, clamped to the bounds.
    pub fn snap(&self, value: f64) -> i32 {
        let k = ((value - self.min as f64) / self.step as f64).round();
        let k = k.clamp(0.0, (self.cells() - 1) as f64) as i32;
        self.min + k * self.step
    }

    fn check(&self, value: i32, out: &mut Vec<ParamViolation>) {
        if value < self.min {
            out.push(ParamViolation::BelowMin { param: self.name, value, min: self.min });
        } else if value > self.max {
            out.push(ParamViolation::AboveMax { param: self.name, value, max: self.max });
        }
        if (value - self.min).rem_euclid(self.step) != 0 {
            out.push(ParamViolation::OffGrid { param: self.name, value, step: self.step });
        }
    }
}

pub const ANGLE: ParamBound = ParamBound { name: "angle", min: 1, max: 79, step: 1 };
pub const DISTANCE: ParamBound = ParamBound { name: "distance", min: 40, max: 100, step: 2 };
pub const OFFSET: ParamBound = ParamBound { name: "offset", min: 80, max: 120, step: 2 };
pub const LENGTH: ParamBound = ParamBound { name: "length", min: 50, max: 150, step: 2 };

/// Gene order used everywhere a design is flattened: angle, distance, offset, length.
pub const BOUNDS: [ParamBound; 4] = [ANGLE, DISTANCE, OFFSET, LENGTH];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParamViolation {
    BelowMin { param: &'static str, value: i32, min: i32 },
    AboveMax { param: &'static str, value: i32, max: i32 },
    OffGrid { param: &'static str, value: i32, step: i32 },
}

impl fmt::Display for ParamViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::BelowMin { param, value, min } => write!(f, "{param}={value} is below minimum {min}"),
            Self::AboveMax { param, value, max } => write!(f, "{param}={value} is above maximum {max}"),
            Self::OffGrid { param, value, step } => write!(f, "{param}={value} is off the step-{step} grid"),
        }
    }
}

/// The design vector: jet-seat tilt (degrees), standoff, lateral offset and
/// extrusion length (millimetres).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GeometryParams {
    pub angle: i32,
    pub distance: i32,
    pub offset: i32,
    pub length: i32,
}

impl GeometryParams {
    pub const fn new(angle: i32, distance: i32, offset: i32, length: i32) -> Self {
        Self { angle, distance, offset, length }
    }

    /// The flown reference design.
    pub const BASELINE: Self = Self::new(15, 42, 80, 108);

    pub fn as_array(&self) -> [i32; 4] {
        [self.angle, self.distance, self.offset, self.length]
    }

    pub fn from_array(v: [i32; 4]) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    /// Snaps a real-valued candidate onto the grid. The result always validates.
    pub fn snap(v: [f64; 4]) -> Self {
        Self::from_array([0, 1, 2, 3].map(|i| BOUNDS[i].snap(v[i])))
    }

    /// Lists every violated bound or step rule.
    pub fn validate(&self) -> Result<(), Vec<ParamViolation>> {
        let mut out = Vec::new();
        for (bound, value) in BOUNDS.iter().zip(self.as_array()) {
            bound.check(value, &mut out);
        }
        if out.is_empty() {
            Ok(())
        } else {
            Err(out)
        }
    }

    /// Bounds only, ignoring the step grid.
    pub fn validate_bounds(&self) -> Result<(), Vec<ParamViolation>> {
        match self.validate() {
            Ok(()) => Ok(()),
            Err(v) => {
                let v: Vec<_> = v.into_iter().filter(|e| !matches!(e, ParamViolation::OffGrid { .. })).collect();
                if v.is_empty() {
                    Ok(())
                } else {
                    Err(v)
                }
            }
        }
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_ok()
    }
}

impl fmt::Display for GeometryParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.angle, self.distance, self.offset, self.length)
    }
}

impl std::str::FromStr for GeometryParams {
    type Err = String;

    /// Parses `"15,42,80,108"` (parentheses and spaces tolerated).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let cleaned = s.trim().trim_start_matches('(').trim_end_matches(')');
        let parts: Vec<&str> = cleaned.split(',').map(str::trim).collect();
        if parts.len() != 4 {
            return Err(format!("expected 4 comma-separated integers, got {s:?}"));
        }
        let mut v = [0i32; 4];
        for (slot, p) in v.iter_mut().zip(&parts) {
            *slot = p.parse().map_err(|_| format!("not an integer: {p:?}"))?;
        }
        Ok(Self::from_array(v))
    }
}
