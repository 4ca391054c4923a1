use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed interval a control lives in; used for validation and for the affine
/// map onto `[0, 1]` the optimizers work in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamRange {
    pub lo: f64,
    pub hi: f64,
}

impl ParamRange {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn span(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }

    pub fn normalize(&self, v: f64) -> f64 {
        (v - self.lo) / self.span()
    }

    pub fn denormalize(&self, u: f64) -> f64 {
        self.lo + u * self.span()
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// Tongue position, in (continuous) segment index.
pub const TONGUE_POSITION: ParamRange = ParamRange::new(12.0, 29.0);
/// Tongue diameter in cm.
pub const TONGUE_DIAMETER: ParamRange = ParamRange::new(2.05, 3.5);
/// Constriction centre, in segment index.
pub const CONSTRICTION_POSITION: ParamRange = ParamRange::new(0.0, 43.0);
/// Constriction diameter in cm.
pub const CONSTRICTION_DIAMETER: ParamRange = ParamRange::new(0.3, 2.0);

pub const DEFAULT_MAX_CONSTRICTIONS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constriction {
    pub position: f64,
    pub diameter: f64,
}

impl Constriction {
    /// A constriction parked at the widest allowed diameter.
    pub fn open_at(position: f64) -> Self {
        Self {
            position,
            diameter: CONSTRICTION_DIAMETER.hi,
        }
    }
}

/// Articulatory controls of the vocal tract: the tongue plus optional constrictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TractControls {
    pub tongue_position: f64,
    pub tongue_diameter: f64,
    pub constrictions: Vec<Constriction>,
}

impl TractControls {
    pub fn new(
        tongue_position: f64,
        tongue_diameter: f64,
        constrictions: Vec<Constriction>,
    ) -> Result<Self> {
        Self::with_limit(
            tongue_position,
            tongue_diameter,
            constrictions,
            DEFAULT_MAX_CONSTRICTIONS,
        )
    }

    pub fn with_limit(
        tongue_position: f64,
        tongue_diameter: f64,
        constrictions: Vec<Constriction>,
        max_constrictions: usize,
    ) -> Result<Self> {
        let check = |name: &str, v: f64, r: ParamRange| {
            if r.contains(v) {
                Ok(())
            } else {
                Err(Error::InvalidInput(format!(
                    "{name} {v} outside [{}, {}]",
                    r.lo, r.hi
                )))
            }
        };
        check("tongue position", tongue_position, TONGUE_POSITION)?;
        check("tongue diameter", tongue_diameter, TONGUE_DIAMETER)?;
        if constrictions.len() > max_constrictions {
            return Err(Error::InvalidInput(format!(
                "{} constrictions exceed the maximum of {max_constrictions}",
                constrictions.len()
            )));
        }
        for c in &constrictions {
            check("constriction position", c.position, CONSTRICTION_POSITION)?;
            check("constriction diameter", c.diameter, CONSTRICTION_DIAMETER)?;
        }
        Ok(Self {
            tongue_position,
            tongue_diameter,
            constrictions,
        })
    }

    /// Tongue at the middle of its ranges with `n` open constrictions parked mid-tract.
    pub fn midpoint(n_constrictions: usize) -> Self {
        Self {
            tongue_position: TONGUE_POSITION.midpoint(),
            tongue_diameter: TONGUE_DIAMETER.midpoint(),
            constrictions: vec![
                Constriction::open_at(CONSTRICTION_POSITION.midpoint());
                n_constrictions
            ],
        }
    }

    /// Number of scalar parameters: two for the tongue, two per constriction.
    pub fn dim(&self) -> usize {
        2 + 2 * self.constrictions.len()
    }

    /// Range of each entry of the flat parameter vector.
    pub fn ranges(&self) -> Vec<ParamRange> {
        let mut r = vec![TONGUE_POSITION, TONGUE_DIAMETER];
        for _ in &self.constrictions {
            r.push(CONSTRICTION_POSITION);
            r.push(CONSTRICTION_DIAMETER);
        }
        r
    }

    /// Flat physical parameter vector `[tp, td, pos_1, diam_1, ...]`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![self.tongue_position, self.tongue_diameter];
        for c in &self.constrictions {
            v.push(c.position);
            v.push(c.diameter);
        }
        v
    }

    /// Inverse of [`Self::to_vec`]; the number of constrictions follows the length.
    pub fn from_vec(v: &[f64]) -> Self {
        assert!(
            v.len() >= 2 && v.len().is_multiple_of(2),
            "bad parameter vector length"
        );
        Self {
            tongue_position: v[0],
            tongue_diameter: v[1],
            constrictions: v[2..]
                .chunks(2)
                .map(|c| Constriction {
                    position: c[0],
                    diameter: c[1],
                })
                .collect(),
        }
    }

    pub fn to_normalized(&self) -> Vec<f64> {
        self.to_vec()
            .iter()
            .zip(self.ranges())
            .map(|(v, r)| r.normalize(*v))
            .collect()
    }

    /// Maps a normalized vector back, clipping into `[0, 1]` first.
    pub fn from_normalized(u: &[f64]) -> Self {
        let probe = Self::from_vec(&vec![0.0; u.len()]);
        let v: Vec<f64> = u
            .iter()
            .zip(probe.ranges())
            .map(|(x, r)| r.denormalize(x.clamp(0.0, 1.0)))
            .collect();
        Self::from_vec(&v)
    }

    /// Copy with every field clipped into its range.
    pub fn clamped(&self) -> Self {
        let v: Vec<f64> = self
            .to_vec()
            .iter()
            .zip(self.ranges())
            .map(|(x, r)| r.clamp(*x))
            .collect();
        Self::from_vec(&v)
    }

    pub fn is_valid(&self) -> bool {
        self.to_vec()
            .iter()
            .zip(self.ranges())
            .all(|(x, r)| r.contains(*x))
    }
}
