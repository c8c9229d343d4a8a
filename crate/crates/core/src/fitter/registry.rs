use std::collections::BTreeMap;

use super::{FitProblem, FitResult, FlowOptimizer, GaussNewtonOptimizer, IterationRecord};
use crate::error::{Error, Result};

/// A strategy for minimizing the boundary gap.
///
/// `monitor` sees every accepted iterate (iteration 0 is the start).
pub trait Optimizer: Send + Sync {
    fn name(&self) -> &'static str;

    fn fit(
        &self,
        problem: &FitProblem<'_>,
        monitor: &mut dyn FnMut(&IterationRecord),
    ) -> Result<FitResult>;
}

pub struct OptimizerRegistry {
    entries: BTreeMap<&'static str, Box<dyn Optimizer>>,
}

impl OptimizerRegistry {
    pub fn empty() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    /// `gauss-newton` and `flow`.
    pub fn with_defaults() -> Self {
        let mut reg = Self::empty();
        reg.register(Box::new(GaussNewtonOptimizer));
        reg.register(Box::new(FlowOptimizer));
        reg
    }

    /// Replaces any optimizer already registered under the same name.
    pub fn register(&mut self, optimizer: Box<dyn Optimizer>) {
        self.entries.insert(optimizer.name(), optimizer);
    }

    pub fn get(&self, name: &str) -> Result<&dyn Optimizer> {
        self.entries
            .get(name)
            .map(|b| b.as_ref())
            .ok_or_else(|| Error::UnknownOptimizer(name.to_string()))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }
}

impl Default for OptimizerRegistry {
    fn default() -> Self {
        Self::with_defaults()
    }
}
