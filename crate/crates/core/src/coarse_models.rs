//! Corrected coarse-level models.
//!
//! Each V-cycle descent corrects the coarse objective `f` so that its value
//! and gradient at the initial coarse iterate match the finer model at the
//! pre-smoothed iterate. The additive correction adds a linearized
//! discrepancy term (the tau-correction); the multiplicative correction
//! scales by a linearized value ratio; the hybrid model blends the two with
//! weights chosen by a fixed value, by matching a previously evaluated fine
//! value (MFV), or by Bayesian reweighting from a residual history.

use std::collections::VecDeque;
use std::sync::Arc;

use nalgebra::DVector;

use crate::objective::{Objective, ObjectiveHandle};
use crate::transfer::TransferOps;
use crate::{NmmError, Result};

/// Variance floor for the Bayesian likelihoods.
const SIGMA_SQ_MIN: f64 = 1e-300;
/// Bayesian weights are kept strictly inside (0, 1).
const WEIGHT_EPS: f64 = 1e-12;

/// Which correction a [`CoarseModel`] applies when evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Additive,
    Multiplicative,
    Hybrid,
}

/// Frozen fine-level data a coarse model is anchored at: the projected
/// iterate, the fine value and restricted fine gradient there, and the
/// coarse value/gradient at the projection.
#[derive(Debug, Clone)]
pub struct ModelAnchor {
    pub x0: DVector<f64>,
    pub fine_value: f64,
    pub restricted_fine_grad: DVector<f64>,
    pub coarse_value: f64,
    pub coarse_grad: DVector<f64>,
    pub kappa: f64,
}

/// Builds an anchor at the pre-smoothed fine iterate: projects it, and
/// evaluates the fine model (value + gradient, once each) there and the
/// coarse objective (value + gradient, once each) at the projection.
pub fn make_anchor(
    fine_model: &dyn Objective,
    x_fine: &DVector<f64>,
    coarse_obj: &dyn Objective,
    ops: &TransferOps,
    kappa: f64,
) -> Result<ModelAnchor> {
    if kappa <= 0.0 {
        return Err(NmmError::config("kappa must be positive"));
    }
    if fine_model.dim() != ops.n_fine() {
        return Err(NmmError::DimensionMismatch {
            expected: ops.n_fine(),
            got: fine_model.dim(),
        });
    }
    if coarse_obj.dim() != ops.n_coarse() {
        return Err(NmmError::DimensionMismatch {
            expected: ops.n_coarse(),
            got: coarse_obj.dim(),
        });
    }
    let x0 = ops.project(x_fine)?;
    let fine_value = fine_model.value(x_fine)?;
    let fine_grad = fine_model.gradient(x_fine)?;
    let restricted_fine_grad = ops.restrict(&fine_grad)?;
    let coarse_value = coarse_obj.value(&x0)?;
    let coarse_grad = coarse_obj.gradient(&x0)?;
    Ok(ModelAnchor {
        x0,
        fine_value,
        restricted_fine_grad,
        coarse_value,
        coarse_grad,
        kappa,
    })
}

/// Convex-combination weights of the hybrid model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridWeights {
    w_add: f64,
    w_mult: f64,
}

impl HybridWeights {
    pub fn new(w_add: f64) -> Result<HybridWeights> {
        if !(0.0..=1.0).contains(&w_add) {
            return Err(NmmError::config(format!(
                "hybrid weight w_add = {w_add} outside [0, 1]"
            )));
        }
        Ok(HybridWeights { w_add, w_mult: 1.0 - w_add })
    }

    /// The uninformed starting point, `w_add = w_mult = 0.5`.
    pub fn balanced() -> HybridWeights {
        HybridWeights { w_add: 0.5, w_mult: 0.5 }
    }

    pub fn w_add(&self) -> f64 {
        self.w_add
    }

    pub fn w_mult(&self) -> f64 {
        self.w_mult
    }
}

/// A corrected coarse-level model: the coarse objective plus the frozen
/// anchor data and cached correction gradients. Immutable once built.
#[derive(Clone)]
pub struct CoarseModel {
    kind: ModelKind,
    anchor: ModelAnchor,
    objective: Arc<ObjectiveHandle>,
    weights: HybridWeights,
    /// Gradient of the additive correction at the anchor
    /// (the tau-correction): restricted fine gradient minus coarse gradient.
    tau_grad: DVector<f64>,
    /// Gradient of the multiplicative ratio correction at the anchor.
    ratio_grad: DVector<f64>,
    /// Ratio of guarded values at the anchor.
    ratio0: f64,
}

impl CoarseModel {
    pub fn new(
        kind: ModelKind,
        anchor: ModelAnchor,
        objective: Arc<ObjectiveHandle>,
        weights: HybridWeights,
    ) -> Result<CoarseModel> {
        let n = objective.dim();
        for len in [anchor.x0.len(), anchor.restricted_fine_grad.len(), anchor.coarse_grad.len()]
        {
            if len != n {
                return Err(NmmError::DimensionMismatch { expected: n, got: len });
            }
        }
        if anchor.kappa <= 0.0 {
            return Err(NmmError::config("kappa must be positive"));
        }
        let tau_grad = &anchor.restricted_fine_grad - &anchor.coarse_grad;
        // kappa guards every denominator so the ratio stays defined as the
        // coarse value approaches zero
        let denom = anchor.coarse_value + anchor.kappa;
        let ratio0 = (anchor.fine_value + anchor.kappa) / denom;
        let ratio_grad = &anchor.restricted_fine_grad / denom
            - (anchor.fine_value + anchor.kappa) / (denom * denom) * &anchor.coarse_grad;
        Ok(CoarseModel { kind, anchor, objective, weights, tau_grad, ratio_grad, ratio0 })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn anchor(&self) -> &ModelAnchor {
        &self.anchor
    }

    pub fn weights(&self) -> HybridWeights {
        self.weights
    }

    fn check_dim(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.objective.dim() {
            return Err(NmmError::DimensionMismatch {
                expected: self.objective.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    fn additive_from(&self, f_val: f64, x: &DVector<f64>) -> f64 {
        let shift = x - &self.anchor.x0;
        f_val + (self.anchor.fine_value - self.anchor.coarse_value) + self.tau_grad.dot(&shift)
    }

    fn ratio_from(&self, x: &DVector<f64>) -> f64 {
        self.ratio0 + self.ratio_grad.dot(&(x - &self.anchor.x0))
    }

    /// Additive model value: `f(x)` plus the linearized discrepancy.
    pub fn additive_value(&self, x: &DVector<f64>) -> Result<f64> {
        let f_val = self.objective.value(x)?;
        Ok(self.additive_from(f_val, x))
    }

    /// Additive model gradient: `grad f(x)` plus the tau-correction.
    pub fn additive_gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.objective.gradient(x)? + &self.tau_grad)
    }

    /// The linearized ratio correction evaluated at `x`.
    pub fn ratio_correction(&self, x: &DVector<f64>) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.ratio_from(x))
    }

    /// Multiplicative model value: ratio correction times `f(x)`.
    pub fn mult_value(&self, x: &DVector<f64>) -> Result<f64> {
        let f_val = self.objective.value(x)?;
        Ok(self.ratio_from(x) * f_val)
    }

    /// Multiplicative model gradient, by the product rule.
    pub fn mult_gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let f_val = self.objective.value(x)?;
        let g = self.objective.gradient(x)?;
        Ok(self.ratio_from(x) * g + f_val * &self.ratio_grad)
    }

    /// Hybrid model value under the stored weights.
    pub fn hybrid_value(&self, x: &DVector<f64>) -> Result<f64> {
        let f_val = self.objective.value(x)?;
        Ok(self.weights.w_add * self.additive_from(f_val, x)
            + self.weights.w_mult * self.ratio_from(x) * f_val)
    }

    /// Hybrid model gradient under the stored weights.
    pub fn hybrid_gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let f_val = self.objective.value(x)?;
        let g = self.objective.gradient(x)?;
        let add_g = &g + &self.tau_grad;
        let mult_g = self.ratio_from(x) * g + f_val * &self.ratio_grad;
        Ok(self.weights.w_add * add_g + self.weights.w_mult * mult_g)
    }

    /// Additive and multiplicative values at `x` from a single coarse
    /// evaluation; feeds the MFV weights and the Bayesian history.
    pub fn correction_pair(&self, x: &DVector<f64>) -> Result<(f64, f64)> {
        let f_val = self.objective.value(x)?;
        Ok((self.additive_from(f_val, x), self.ratio_from(x) * f_val))
    }
}

impl Objective for CoarseModel {
    fn dim(&self) -> usize {
        self.objective.dim()
    }

    fn value(&self, x: &DVector<f64>) -> Result<f64> {
        match self.kind {
            ModelKind::Additive => self.additive_value(x),
            ModelKind::Multiplicative => self.mult_value(x),
            ModelKind::Hybrid => self.hybrid_value(x),
        }
    }

    fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        match self.kind {
            ModelKind::Additive => self.additive_gradient(x),
            ModelKind::Multiplicative => self.mult_gradient(x),
            ModelKind::Hybrid => self.hybrid_gradient(x),
        }
    }
}

/// Weights that make the hybrid model reproduce a known fine value at the
/// projected previous iterate, clamped to [0, 1]. Falls back to 0.5/0.5
/// when the additive and multiplicative values coincide there.
pub fn mfv_weights_from_values(
    prev_fine_value: f64,
    add_value: f64,
    mult_value: f64,
) -> HybridWeights {
    let denom = add_value - mult_value;
    if denom.abs() <= 1e-12 * (1.0 + prev_fine_value.abs()) {
        return HybridWeights::balanced();
    }
    let w_add = ((prev_fine_value - mult_value) / denom).clamp(0.0, 1.0);
    HybridWeights { w_add, w_mult: 1.0 - w_add }
}

/// MFV weights for `model`, matching the fine value observed at the
/// previous fine iterate against both corrections evaluated at its
/// projection.
pub fn mfv_weights(
    model: &CoarseModel,
    prev_fine_value: f64,
    projected_prev_iterate: &DVector<f64>,
) -> Result<HybridWeights> {
    let (add_value, mult_value) = model.correction_pair(projected_prev_iterate)?;
    Ok(mfv_weights_from_values(prev_fine_value, add_value, mult_value))
}

/// One history entry: the fine value observed at a transferred iterate and
/// the two model predictions for it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistorySample {
    pub fine_value: f64,
    pub add_value: f64,
    pub mult_value: f64,
}

/// Sliding window of the last `capacity` history samples
/// (`None` keeps every sample).
#[derive(Debug, Clone)]
pub struct HistoryBuffer {
    capacity: Option<usize>,
    samples: VecDeque<HistorySample>,
}

impl HistoryBuffer {
    pub fn new(capacity: Option<usize>) -> HistoryBuffer {
        if let Some(cap) = capacity {
            assert!(cap > 0, "history capacity must be positive");
        }
        HistoryBuffer { capacity, samples: VecDeque::new() }
    }

    pub fn record(&mut self, fine_value: f64, add_value: f64, mult_value: f64) {
        if let Some(cap) = self.capacity {
            while self.samples.len() >= cap {
                self.samples.pop_front();
            }
        }
        self.samples.push_back(HistorySample { fine_value, add_value, mult_value });
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> impl Iterator<Item = &HistorySample> {
        self.samples.iter()
    }
}

/// One Bayesian reweighting step from the residual history.
///
/// Each model's variance is estimated as the mean squared residual between
/// recorded fine values and its predictions (floored to keep the
/// likelihoods defined); the posterior update is computed in log-space so
/// the common likelihood factors cancel and large histories cannot
/// underflow. Returns the previous weights if the update is undefined or
/// the history is empty.
pub fn bayes_update_weights(w: &HybridWeights, buf: &HistoryBuffer) -> HybridWeights {
    let d = buf.len();
    if d == 0 {
        return *w;
    }
    let mut ss_add = 0.0;
    let mut ss_mult = 0.0;
    for s in buf.samples() {
        ss_add += (s.fine_value - s.add_value).powi(2);
        ss_mult += (s.fine_value - s.mult_value).powi(2);
    }
    let sigma_sq_add = (ss_add / d as f64).max(SIGMA_SQ_MIN);
    let sigma_sq_mult = (ss_mult / d as f64).max(SIGMA_SQ_MIN);

    // log of (w_add * psi_add) - log of (w_mult * psi_mult); the
    // (2*pi)^{-d/2} * exp(-d/2) factors cancel in the ratio
    let delta = w.w_add.ln() - w.w_mult.ln()
        - 0.5 * d as f64 * (sigma_sq_add.ln() - sigma_sq_mult.ln());
    if delta.is_nan() {
        return *w;
    }
    let w_add = (1.0 / (1.0 + (-delta).exp())).clamp(WEIGHT_EPS, 1.0 - WEIGHT_EPS);
    HybridWeights { w_add, w_mult: 1.0 - w_add }
}
