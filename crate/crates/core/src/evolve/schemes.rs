use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::{dense_propagator, EvolveError, Propagator, TimeScheme};
use crate::assembly::SparseOperator;
use crate::linalg::BandedLu;

/// `(I - dt L) u_{n+1} = u_n`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ImplicitEuler;

/// `(I - dt/2 L) u_{n+1} = (I + dt/2 L) u_n`.
#[derive(Debug, Clone, Copy, Default)]
pub struct CrankNicolson;

/// `u_{n+1} = exp(dt L) u_n` with a dense exponential.
#[derive(Debug, Clone, Copy, Default)]
pub struct DenseExponential;

struct SolveStep {
    lu: BandedLu,
}

impl Propagator for SolveStep {
    fn step(&self, u: &mut Vec<f64>) -> Result<(), EvolveError> {
        self.lu.solve_in_place(u)?;
        Ok(())
    }
}

struct CnStep {
    lu: BandedLu,
    op: SparseOperator,
    half: f64,
}

impl Propagator for CnStep {
    fn step(&self, u: &mut Vec<f64>) -> Result<(), EvolveError> {
        let lu_ = self.op.matvec(u);
        for (x, l) in u.iter_mut().zip(lu_) {
            *x += self.half * l;
        }
        self.lu.solve_in_place(u)?;
        Ok(())
    }
}

struct DenseStep {
    p: DMatrix<f64>,
}

impl Propagator for DenseStep {
    fn step(&self, u: &mut Vec<f64>) -> Result<(), EvolveError> {
        let v = &self.p * DVector::from_column_slice(u);
        u.copy_from_slice(v.as_slice());
        Ok(())
    }
}

impl TimeScheme for ImplicitEuler {
    fn name(&self) -> &str {
        "implicit-euler"
    }

    fn order(&self) -> Option<f64> {
        Some(1.0)
    }

    fn prepare(&self, op: &SparseOperator, dt: f64) -> Result<Box<dyn Propagator>, EvolveError> {
        Ok(Box::new(SolveStep {
            lu: BandedLu::factor_shifted(op, 1.0, -dt)?,
        }))
    }
}

impl TimeScheme for CrankNicolson {
    fn name(&self) -> &str {
        "crank-nicolson"
    }

    fn order(&self) -> Option<f64> {
        Some(2.0)
    }

    fn prepare(&self, op: &SparseOperator, dt: f64) -> Result<Box<dyn Propagator>, EvolveError> {
        Ok(Box::new(CnStep {
            lu: BandedLu::factor_shifted(op, 1.0, -0.5 * dt)?,
            op: op.clone(),
            half: 0.5 * dt,
        }))
    }
}

impl TimeScheme for DenseExponential {
    fn name(&self) -> &str {
        "dense-exponential"
    }

    fn order(&self) -> Option<f64> {
        None
    }

    fn prepare(&self, op: &SparseOperator, dt: f64) -> Result<Box<dyn Propagator>, EvolveError> {
        Ok(Box::new(DenseStep {
            p: dense_propagator(op, dt)?,
        }))
    }
}

/// Time schemes keyed by name.
pub struct SchemeRegistry {
    entries: BTreeMap<String, Box<dyn TimeScheme>>,
}

impl SchemeRegistry {
    pub fn empty() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    pub fn standard() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(ImplicitEuler));
        r.register(Box::new(CrankNicolson));
        r.register(Box::new(DenseExponential));
        r
    }

    pub fn register(&mut self, scheme: Box<dyn TimeScheme>) {
        self.entries.insert(scheme.name().to_string(), scheme);
    }

    pub fn get(&self, name: &str) -> Result<&dyn TimeScheme, EvolveError> {
        self.entries
            .get(name)
            .map(|b| b.as_ref())
            .ok_or_else(|| EvolveError::UnknownScheme(name.to_string()))
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.keys().map(String::as_str).collect()
    }
}

impl Default for SchemeRegistry {
    fn default() -> Self {
        Self::standard()
    }
}
