//! Evaluatable-objective contract shared by every level of a hierarchy,
//! plus the finite-difference oracle and dimension-weighted work accounting.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use nalgebra::DVector;

use crate::{NmmError, Result};

/// Anything the solver can minimize: a raw objective or a corrected
/// coarse-level model. `value` and `gradient` must be deterministic
/// functions of `x` and the fixed problem data.
pub trait Objective {
    fn dim(&self) -> usize;
    fn value(&self, x: &DVector<f64>) -> Result<f64>;
    fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>>;
}

impl<T: Objective + ?Sized> Objective for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, x: &DVector<f64>) -> Result<f64> {
        (**self).value(x)
    }
    fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        (**self).gradient(x)
    }
}

impl<T: Objective + ?Sized> Objective for Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, x: &DVector<f64>) -> Result<f64> {
        (**self).value(x)
    }
    fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        (**self).gradient(x)
    }
}

/// The underlying function of one level, without counting or checks.
/// Implementations may assume `x.len() == self.dim()`.
pub trait ObjectiveFn: Send + Sync {
    fn dim(&self) -> usize;
    fn eval_value(&self, x: &DVector<f64>) -> f64;
    fn eval_gradient(&self, x: &DVector<f64>) -> DVector<f64>;
}

/// A level objective together with its evaluation counters.
///
/// Counters increase by exactly one per `value`/`gradient` call and are
/// atomic, so a handle can be shared across threads; the solver itself
/// evaluates single-threaded.
pub struct ObjectiveHandle {
    inner: Box<dyn ObjectiveFn>,
    value_evals: AtomicU64,
    grad_evals: AtomicU64,
}

impl ObjectiveHandle {
    pub fn new(inner: impl ObjectiveFn + 'static) -> Self {
        ObjectiveHandle {
            inner: Box::new(inner),
            value_evals: AtomicU64::new(0),
            grad_evals: AtomicU64::new(0),
        }
    }

    /// Wraps a pair of closures; handy for ad-hoc objectives in tests.
    pub fn from_fns<V, G>(dim: usize, value: V, gradient: G) -> Self
    where
        V: Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
        G: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        ObjectiveHandle::new(FnObjective { dim, value, gradient })
    }

    pub fn value_evals(&self) -> u64 {
        self.value_evals.load(Ordering::Relaxed)
    }

    pub fn grad_evals(&self) -> u64 {
        self.grad_evals.load(Ordering::Relaxed)
    }

    fn check_dim(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.inner.dim() {
            return Err(NmmError::DimensionMismatch {
                expected: self.inner.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }
}

impl Objective for ObjectiveHandle {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn value(&self, x: &DVector<f64>) -> Result<f64> {
        self.check_dim(x)?;
        self.value_evals.fetch_add(1, Ordering::Relaxed);
        Ok(self.inner.eval_value(x))
    }

    fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(x)?;
        self.grad_evals.fetch_add(1, Ordering::Relaxed);
        let g = self.inner.eval_gradient(x);
        debug_assert_eq!(g.len(), self.inner.dim());
        Ok(g)
    }
}

struct FnObjective<V, G> {
    dim: usize,
    value: V,
    gradient: G,
}

impl<V, G> ObjectiveFn for FnObjective<V, G>
where
    V: Fn(&DVector<f64>) -> f64 + Send + Sync,
    G: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval_value(&self, x: &DVector<f64>) -> f64 {
        (self.value)(x)
    }
    fn eval_gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.gradient)(x)
    }
}

/// Central-difference gradient, `(f(x + h e_i) - f(x - h e_i)) / 2h` per
/// coordinate. The verification oracle for every analytic gradient in the
/// crate; works on raw objectives and corrected models alike.
pub fn fd_gradient(obj: &dyn Objective, x: &DVector<f64>, h: f64) -> Result<DVector<f64>> {
    assert!(h > 0.0, "finite-difference step must be positive");
    let n = obj.dim();
    if x.len() != n {
        return Err(NmmError::DimensionMismatch { expected: n, got: x.len() });
    }
    let mut g = DVector::zeros(n);
    let mut xp = x.clone();
    for i in 0..n {
        let xi = x[i];
        xp[i] = xi + h;
        let fp = obj.value(&xp)?;
        xp[i] = xi - h;
        let fm = obj.value(&xp)?;
        xp[i] = xi;
        g[i] = (fp - fm) / (2.0 * h);
    }
    Ok(g)
}

/// Dimension-weighted evaluation accounting over a level hierarchy.
///
/// One gradient evaluation at level `l` costs `dims[l] / dims[top]` work
/// units; one value evaluation costs half that. The ledger snapshots the
/// counters at construction, so `total_work` charges only evaluations made
/// after `start`.
pub struct WorkLedger {
    handles: Vec<Arc<ObjectiveHandle>>,
    dims: Vec<usize>,
    base: Vec<(u64, u64)>,
}

impl WorkLedger {
    pub fn start(handles: &[Arc<ObjectiveHandle>]) -> Self {
        assert!(!handles.is_empty());
        let dims = handles.iter().map(|h| h.dim()).collect();
        let base = handles
            .iter()
            .map(|h| (h.value_evals(), h.grad_evals()))
            .collect();
        WorkLedger { handles: handles.to_vec(), dims, base }
    }

    /// Per-level `(value_evals, grad_evals)` since the ledger started,
    /// coarsest level first.
    pub fn tallies(&self) -> Vec<(u64, u64)> {
        self.handles
            .iter()
            .zip(&self.base)
            .map(|(h, (v0, g0))| (h.value_evals() - v0, h.grad_evals() - g0))
            .collect()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn total_work(&self) -> f64 {
        let fine_dim = *self.dims.last().expect("non-empty hierarchy") as f64;
        self.tallies()
            .iter()
            .zip(&self.dims)
            .map(|((v, g), &n)| (*g as f64 + 0.5 * *v as f64) * n as f64 / fine_dim)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn half_norm_squared(dim: usize) -> ObjectiveHandle {
        ObjectiveHandle::from_fns(dim, |x| 0.5 * x.norm_squared(), |x| x.clone())
    }

    #[test]
    fn quadratic_value_at_zero_and_analytic_point() {
        let obj = half_norm_squared(2);
        assert_eq!(obj.value(&DVector::from_vec(vec![0.0, 0.0])).unwrap(), 0.0);
        assert_eq!(obj.value(&DVector::from_vec(vec![3.0, 4.0])).unwrap(), 12.5);
    }

    #[test]
    fn quadratic_gradient_analytic() {
        let obj = half_norm_squared(2);
        let g = obj.gradient(&DVector::from_vec(vec![3.0, 4.0])).unwrap();
        assert_eq!(g.as_slice(), &[3.0, 4.0]);
    }

    #[test]
    fn constant_objective_has_zero_gradient() {
        let obj = ObjectiveHandle::from_fns(3, |_| 7.5, |x| DVector::zeros(x.len()));
        let g = obj.gradient(&DVector::from_vec(vec![1.0, -2.0, 0.5])).unwrap();
        assert!(g.iter().all(|&gi| gi == 0.0));
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let obj = half_norm_squared(2);
        let err = obj.value(&DVector::from_vec(vec![1.0])).unwrap_err();
        assert!(matches!(err, NmmError::DimensionMismatch { expected: 2, got: 1 }));
        assert!(obj.gradient(&DVector::from_vec(vec![1.0, 2.0, 3.0])).is_err());
    }

    #[test]
    fn counters_increment_once_per_evaluation() {
        let obj = half_norm_squared(2);
        let x = DVector::from_vec(vec![1.0, 2.0]);
        assert_eq!((obj.value_evals(), obj.grad_evals()), (0, 0));
        obj.value(&x).unwrap();
        obj.value(&x).unwrap();
        obj.gradient(&x).unwrap();
        assert_eq!((obj.value_evals(), obj.grad_evals()), (2, 1));
        // failed calls do not count
        let _ = obj.value(&DVector::from_vec(vec![1.0]));
        assert_eq!(obj.value_evals(), 2);
    }

    #[test]
    fn fd_gradient_on_scalar_square() {
        // f(x) = x^2 at x = 1 with h = 1e-5: central difference is exact up
        // to rounding for symmetric perturbations.
        let obj = ObjectiveHandle::from_fns(
            1,
            |x| x[0] * x[0],
            |x| DVector::from_vec(vec![2.0 * x[0]]),
        );
        let g = fd_gradient(&obj, &DVector::from_vec(vec![1.0]), 1e-5).unwrap();
        assert_relative_eq!(g[0], 2.0, epsilon = 1e-8);
    }

    #[test]
    fn fd_gradient_linear_is_exact() {
        let a = DVector::from_vec(vec![2.0, -3.0, 0.5]);
        let a2 = a.clone();
        let obj = ObjectiveHandle::from_fns(3, move |x| a.dot(x), move |_| a2.clone());
        let x = DVector::from_vec(vec![0.3, -1.2, 4.0]);
        let g = fd_gradient(&obj, &x, 1e-5).unwrap();
        for (gi, ai) in g.iter().zip([2.0, -3.0, 0.5]) {
            assert_relative_eq!(*gi, ai, epsilon = 1e-9);
        }
    }

    #[test]
    fn evaluations_are_deterministic() {
        let obj = half_norm_squared(4);
        let x = DVector::from_vec(vec![0.1, -0.9, 2.3, 1.7]);
        let v1 = obj.value(&x).unwrap();
        let v2 = obj.value(&x).unwrap();
        assert_eq!(v1.to_bits(), v2.to_bits());
        let g1 = obj.gradient(&x).unwrap();
        let g2 = obj.gradient(&x).unwrap();
        assert_eq!(g1, g2);
    }

    #[test]
    fn work_ledger_weights_by_dimension() {
        let coarse = Arc::new(half_norm_squared(2));
        let fine = Arc::new(half_norm_squared(4));
        let ledger = WorkLedger::start(&[coarse.clone(), fine.clone()]);
        assert_eq!(ledger.total_work(), 0.0);

        let xc = DVector::from_vec(vec![1.0, 2.0]);
        let xf = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        coarse.gradient(&xc).unwrap(); // 0.5 units
        fine.gradient(&xf).unwrap(); // 1.0 units
        fine.value(&xf).unwrap(); // 0.5 units
        assert_relative_eq!(ledger.total_work(), 2.0);
        assert_eq!(ledger.tallies(), vec![(0, 1), (1, 1)]);

        // monotone: more evaluations never decrease the total
        let before = ledger.total_work();
        coarse.value(&xc).unwrap();
        assert!(ledger.total_work() > before);
    }
}
