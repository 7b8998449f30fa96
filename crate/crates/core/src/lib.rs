//! Numerical engine for Schrödinger propagators `e^{-itH}` of finite-rank and trace-class
//! perturbations `H = -Δ + Σ α_j ⟨·, φ_j⟩ φ_j`, synthesized from the Aronszajn–Krein
//! resolvent formula and Stone's formula, together with the tools needed to check
//! dispersive decay numerically.

pub mod analysis;
pub mod error;
pub mod kernels;
pub mod oracle;
pub mod oscillatory;
pub mod profiles;
pub mod propagator;
pub mod quadrature;
pub mod special;
pub mod spectral;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

/// Boundary value of the resolvent: `R_0(λ² + i0)` (plus) or `R_0(λ² − i0)` (minus).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }

    pub fn other(self) -> Branch {
        match self {
            Branch::Plus => Branch::Minus,
            Branch::Minus => Branch::Plus,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Branch::Plus => "plus",
            Branch::Minus => "minus",
        }
    }

    pub const BOTH: [Branch; 2] = [Branch::Plus, Branch::Minus];
}

impl std::str::FromStr for Branch {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plus" | "+" => Ok(Branch::Plus),
            "minus" | "-" => Ok(Branch::Minus),
            _ => Err(Error::Invalid(format!("unknown branch '{s}'"))),
        }
    }
}

pub(crate) const I: C64 = C64 { re: 0.0, im: 1.0 };

pub(crate) fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}
