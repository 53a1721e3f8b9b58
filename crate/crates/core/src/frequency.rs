//! The oscillation parameter ω and its decomposition ω = 2πk + ε.

use std::f64::consts::TAU;
use std::fmt;

use crate::error::{Error, Result};

/// Relative distance to 2πk below which a plain real is treated as an exact multiple.
pub const PROMOTION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frequency {
    omega: f64,
    k: u64,
    epsilon: f64,
    exact_multiple: bool,
}

impl Frequency {
    /// ω = 2πk exactly; sin(2ω) and cos(2ω) are then taken as 0 and 1.
    pub fn two_pi_multiple(k: u64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("omega = 2pi*0 is not positive".into()));
        }
        Ok(Frequency {
            omega: TAU * k as f64,
            k,
            epsilon: 0.0,
            exact_multiple: true,
        })
    }

    /// Decompose an arbitrary positive ω. k is the nearest integer to ω/2π,
    /// with ties going to the smaller k. A value within [`PROMOTION_TOL`]
    /// (relative) of 2πk is promoted to the exact multiple.
    pub fn new(omega: f64) -> Result<Self> {
        if !omega.is_finite() {
            return Err(Error::InvalidParameter(format!("omega must be finite, got {omega}")));
        }
        if omega <= 0.0 {
            return Err(Error::InvalidParameter(format!("omega must be positive, got {omega}")));
        }
        let ratio = omega / TAU;
        let mut k = ratio.floor();
        if ratio - k > 0.5 {
            k += 1.0;
        }
        let k = k as u64;
        let epsilon = omega - TAU * k as f64;
        if k > 0 && epsilon.abs() <= PROMOTION_TOL * omega {
            if epsilon != 0.0 {
                log::info!("omega = {omega} promoted to exact 2pi*{k} (epsilon = {epsilon:e})");
            }
            return Self::two_pi_multiple(k);
        }
        Ok(Frequency {
            omega,
            k,
            epsilon,
            exact_multiple: false,
        })
    }

    /// ω = 2πk + ε from its parts. ε = 0 gives the exact multiple.
    pub fn from_parts(k: u64, epsilon: f64) -> Result<Self> {
        if !epsilon.is_finite() || epsilon.abs() > std::f64::consts::PI {
            return Err(Error::InvalidParameter(format!(
                "epsilon must satisfy |epsilon| <= pi, got {epsilon}"
            )));
        }
        if epsilon == 0.0 {
            return Self::two_pi_multiple(k);
        }
        let omega = TAU * k as f64 + epsilon;
        if omega <= 0.0 {
            return Err(Error::InvalidParameter(format!("omega must be positive, got {omega}")));
        }
        Ok(Frequency {
            omega,
            k,
            epsilon,
            exact_multiple: false,
        })
    }

    /// Rebuild from serialized fields, checking that they are consistent.
    pub fn from_stored(omega: f64, k: u64, epsilon: f64) -> Result<Self> {
        if epsilon == 0.0 {
            let f = Self::two_pi_multiple(k)?;
            if f.omega != omega {
                return Err(Error::Parse(format!(
                    "omega = {omega} is not 2pi*{k} although epsilon = 0"
                )));
            }
            return Ok(f);
        }
        if !omega.is_finite() || omega <= 0.0 {
            return Err(Error::InvalidParameter(format!("omega must be positive and finite, got {omega}")));
        }
        if !epsilon.is_finite() || epsilon.abs() > std::f64::consts::PI {
            return Err(Error::Parse(format!("epsilon = {epsilon} out of range")));
        }
        let rebuilt = TAU * k as f64 + epsilon;
        if (rebuilt - omega).abs() > PROMOTION_TOL * omega {
            return Err(Error::Parse(format!(
                "omega = {omega} does not equal 2pi*{k} + {epsilon}"
            )));
        }
        Ok(Frequency {
            omega,
            k,
            epsilon,
            exact_multiple: false,
        })
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn is_exact_multiple(&self) -> bool {
        self.exact_multiple
    }

    pub fn sin_2omega(&self) -> f64 {
        if self.exact_multiple {
            0.0
        } else {
            (2.0 * self.omega).sin()
        }
    }

    pub fn cos_2omega(&self) -> f64 {
        if self.exact_multiple {
            1.0
        } else {
            (2.0 * self.omega).cos()
        }
    }

    /// Warning for ω ≤ n, where the table recursion leaves its stable regime.
    pub fn stability_check(&self, n: usize) -> Option<StabilityWarning> {
        if self.omega <= n as f64 {
            let w = StabilityWarning {
                omega: self.omega,
                n,
            };
            log::warn!("{w}");
            Some(w)
        } else {
            None
        }
    }

    /// Same frequency up to `tol` relative.
    pub fn matches(&self, other: &Frequency, tol: f64) -> bool {
        (self.omega - other.omega).abs() <= tol * self.omega.max(other.omega)
    }
}

impl fmt::Display for Frequency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exact_multiple {
            write!(f, "2pi*{}", self.k)
        } else {
            write!(f, "{} (2pi*{} + {})", self.omega, self.k, self.epsilon)
        }
    }
}

/// Emitted when ω ≤ N: outside the regime where the table recursion is stable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityWarning {
    pub omega: f64,
    pub n: usize,
}

impl fmt::Display for StabilityWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "omega = {} <= N = {}: outside the stable regime omega > N, results may lose accuracy",
            self.omega, self.n
        )
    }
}
