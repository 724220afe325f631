use super::EstimateError;
use crate::data::{Arm, TrialDataset};
use crate::learners::RegressionFn;

/// μ̂(1, Wᵢ) and μ̂(0, Wᵢ) for every row.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmPredictions {
    pub treated: Vec<f64>,
    pub control: Vec<f64>,
}

impl ArmPredictions {
    pub fn new(treated: Vec<f64>, control: Vec<f64>) -> Result<Self, EstimateError> {
        assert_eq!(treated.len(), control.len(), "arm prediction lengths");
        if let Some(row) = treated
            .iter()
            .zip(&control)
            .position(|(a, b)| !a.is_finite() || !b.is_finite())
        {
            return Err(EstimateError::NonFinite { row });
        }
        Ok(Self { treated, control })
    }

    /// Constant per-arm predictions.
    pub fn constant(n: usize, treated: f64, control: f64) -> Self {
        Self {
            treated: vec![treated; n],
            control: vec![control; n],
        }
    }

    pub fn from_fn(mu: &RegressionFn, data: &TrialDataset) -> Result<Self, EstimateError> {
        let treated = (0..data.n()).map(|i| mu.predict(Arm::Treated, data.w().row(i))).collect();
        let control = (0..data.n()).map(|i| mu.predict(Arm::Control, data.w().row(i))).collect();
        Self::new(treated, control)
    }

    pub fn at(&self, arm: Arm, i: usize) -> f64 {
        match arm {
            Arm::Treated => self.treated[i],
            Arm::Control => self.control[i],
        }
    }

    /// μ̂(Aᵢ, Wᵢ)
    pub fn observed(&self, data: &TrialDataset) -> Vec<f64> {
        (0..data.n()).map(|i| self.at(data.arm(i), i)).collect()
    }
}

/// Ψ̂₁, Ψ̂₀ and Ψ̂ = Ψ̂₁ − Ψ̂₀.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlugIn {
    pub psi1: f64,
    pub psi0: f64,
    pub psi: f64,
}

pub fn plugin_from_predictions(preds: &ArmPredictions) -> PlugIn {
    let n = preds.treated.len() as f64;
    let psi1 = preds.treated.iter().sum::<f64>() / n;
    let psi0 = preds.control.iter().sum::<f64>() / n;
    PlugIn {
        psi1,
        psi0,
        psi: psi1 - psi0,
    }
}

/// Averages μ̂(1, ·) and μ̂(0, ·) over all rows.
pub fn plugin_ate(mu: &RegressionFn, data: &TrialDataset) -> Result<PlugIn, EstimateError> {
    Ok(plugin_from_predictions(&ArmPredictions::from_fn(mu, data)?))
}

/// Per-row φ̂₁ − φ̂₀.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceCurve(pub Vec<f64>);

#[derive(Debug, Clone, PartialEq)]
pub struct IfVariance {
    pub sigma_inf_sq: f64,
    pub se: f64,
    pub curve: InfluenceCurve,
}

/// σ̂²∞ = (1/n) Σ (φ̂₁ᵢ − φ̂₀ᵢ)², se = σ̂∞/√n, using the known π₁ of `data`.
pub fn if_variance(preds: &ArmPredictions, data: &TrialDataset, psi1: f64, psi0: f64) -> IfVariance {
    let n = data.n();
    let (pi1, pi0) = (data.pi(Arm::Treated), data.pi(Arm::Control));
    let curve: Vec<f64> = (0..n)
        .map(|i| {
            let y = data.y()[i];
            let (m1, m0) = (preds.treated[i], preds.control[i]);
            let (ind1, ind0) = if data.a()[i] == 1 { (1.0, 0.0) } else { (0.0, 1.0) };
            let phi1 = ind1 / pi1 * (y - m1) + (m1 - psi1);
            let phi0 = ind0 / pi0 * (y - m0) + (m0 - psi0);
            phi1 - phi0
        })
        .collect();
    let sigma_inf_sq = curve.iter().map(|v| v * v).sum::<f64>() / n as f64;
    IfVariance {
        sigma_inf_sq,
        se: (sigma_inf_sq / n as f64).sqrt(),
        curve: InfluenceCurve(curve),
    }
}

/// (1/n) Σ A±ᵢ (Yᵢ − μ̂(Aᵢ, Wᵢ)).
pub fn empirical_score(preds: &ArmPredictions, data: &TrialDataset) -> f64 {
    let s: f64 = (0..data.n())
        .map(|i| {
            let arm = data.arm(i);
            arm.signed() * (data.y()[i] - preds.at(arm, i))
        })
        .sum();
    s / data.n() as f64
}
