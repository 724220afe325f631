//! Simulation model: seven covariates W, a latent U, 1:1 randomization, and
//! outcome surfaces m₀, m₁ with optional shifts in the historical controls.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::data::{AugmentedTrialDataset, DataError, HistoricalDataset, TrialDataset};
use crate::numerics::{Dist, Matrix, Rng, Sampler};

/// Average treatment effect of the homogeneous surface.
pub const ATE: f64 = 0.84;
/// Standard deviation of the outcome noise.
pub const NOISE_SD: f64 = 1.3;
/// Number of covariates.
pub const P: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Effect {
    Homogeneous,
    Heterogeneous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shift {
    None,
    ObsSmall,
    ObsLarge,
    UnobsSmall,
    UnobsLarge,
}

impl Effect {
    pub const ALL: [Effect; 2] = [Effect::Homogeneous, Effect::Heterogeneous];

    pub fn as_str(self) -> &'static str {
        match self {
            Effect::Homogeneous => "homogeneous",
            Effect::Heterogeneous => "heterogeneous",
        }
    }
}

impl Shift {
    pub const ALL: [Shift; 5] = [
        Shift::None,
        Shift::ObsSmall,
        Shift::ObsLarge,
        Shift::UnobsSmall,
        Shift::UnobsLarge,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Shift::None => "none",
            Shift::ObsSmall => "obs-small",
            Shift::ObsLarge => "obs-large",
            Shift::UnobsSmall => "unobs-small",
            Shift::UnobsLarge => "unobs-large",
        }
    }

    /// Historical marginal of W₁.
    fn w1(self) -> Dist {
        match self {
            Shift::ObsSmall => Dist::Uniform { low: -4.0, high: -1.0 },
            Shift::ObsLarge => Dist::Uniform { low: -7.0, high: -4.0 },
            _ => Dist::Uniform { low: -2.0, high: 1.0 },
        }
    }

    /// Historical marginal of U.
    fn u(self) -> Dist {
        match self {
            Shift::UnobsSmall => Dist::Uniform { low: 0.5, high: 1.5 },
            Shift::UnobsLarge => Dist::Uniform { low: 1.5, high: 2.5 },
            _ => Dist::Uniform { low: 0.0, high: 1.0 },
        }
    }
}

impl fmt::Display for Effect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for Shift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Effect {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Effect::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| format!("unknown effect '{s}' (homogeneous, heterogeneous)"))
    }
}

impl FromStr for Shift {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Shift::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| format!("unknown shift '{s}' (none, obs-small, obs-large, unobs-small, unobs-large)"))
    }
}

/// One simulated setting. `shift` only affects the historical sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub effect: Effect,
    pub shift: Shift,
    pub n: usize,
    pub n_hist: usize,
}

impl ScenarioConfig {
    pub fn new(effect: Effect, shift: Shift, n: usize, n_hist: usize) -> Self {
        Self {
            effect,
            shift,
            n,
            n_hist,
        }
    }

    pub fn label(&self) -> String {
        format!("{}/{}", self.effect, self.shift)
    }

    pub fn validate(&self) -> Result<(), DataError> {
        if self.n < 4 {
            return Err(DataError::Invalid(format!("trial size {} is below 4", self.n)));
        }
        Ok(())
    }
}

fn ind(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Terms shared by both surfaces that only fire under a historical shift.
fn shift_terms(w: &[f64], u: f64) -> f64 {
    let s2 = w[1].abs().sin();
    -4.1 * ind(w[0] < -4.1) * s2 - 4.1 * ind(w[0] < -6.1) * s2 - 4.1 * ind(u > 1.1) * s2
        - 4.1 * ind(u > 1.55) * s2
}

/// Control outcome mean m₀(w, u); `w` holds W₁..W₇.
pub fn m0(w: &[f64], u: f64) -> f64 {
    4.1 * w[1].abs().sin() + 1.5 * ind(w[3].abs() > 0.25) + 1.5 * w[4].abs().sin()
        + 1.4 * ind(w[2].abs() > 2.5)
        + shift_terms(w, u)
}

/// Treated outcome mean m₁(w, u).
pub fn m1(w: &[f64], u: f64, effect: Effect) -> f64 {
    match effect {
        Effect::Homogeneous => ATE + m0(w, u),
        Effect::Heterogeneous => {
            let s2 = w[1].abs().sin();
            4.3 * s2 * s2 + 1.3 * ind(w[3].abs() > 0.25) + 4.1 * ind(w[1] > 0.0) * w[4].abs().sin()
                + 1.6 * w[5].abs().sin()
                + 1.4 * ind(w[2].abs() > 2.5)
                + shift_terms(w, u)
        }
    }
}

struct Marginals {
    w: [Sampler; P],
    u: Sampler,
}

impl Marginals {
    fn new(shift: Shift) -> Self {
        let prep = |d: Dist| d.prepare().expect("valid marginal");
        let unit = Dist::Uniform { low: 1.0, high: 2.0 };
        Self {
            w: [
                prep(shift.w1()),
                prep(Dist::Uniform { low: -2.0, high: 1.0 }),
                prep(Dist::Normal { mean: 0.0, sd: 3.0 }),
                prep(Dist::Exponential { rate: 0.8 }),
                prep(Dist::Gamma { shape: 5.0, rate: 10.0 }),
                prep(unit),
                prep(unit),
            ],
            u: prep(shift.u()),
        }
    }

    fn draw(&self, rng: &mut Rng, w: &mut [f64; P]) -> f64 {
        for (x, s) in w.iter_mut().zip(&self.w) {
            *x = s.draw(rng);
        }
        self.u.draw(rng)
    }
}

fn noise() -> Sampler {
    Dist::Normal { mean: 0.0, sd: NOISE_SD }.prepare().expect("valid noise")
}

/// Draws a randomized trial of size `n` together with its latent columns.
pub fn sample_trial(n: usize, effect: Effect, rng: &mut Rng) -> Result<AugmentedTrialDataset, DataError> {
    let marg = Marginals::new(Shift::None);
    let arm = Dist::Bernoulli { p: 0.5 }.prepare().expect("valid");
    let eps = noise();
    let mut values = Vec::with_capacity(n * P);
    let (mut a, mut y, mut u, mut y0, mut y1, mut mu0, mut mu1) =
        (vec![], vec![], vec![], vec![], vec![], vec![], vec![]);
    let mut w = [0.0; P];
    for _ in 0..n {
        let ui = marg.draw(rng, &mut w);
        let ai = arm.draw(rng) as u8;
        let (c, t) = (m0(&w, ui), m1(&w, ui, effect));
        let (p0, p1) = (c + eps.draw(rng), t + eps.draw(rng));
        values.extend_from_slice(&w);
        a.push(ai);
        y.push(if ai == 1 { p1 } else { p0 });
        u.push(ui);
        y0.push(p0);
        y1.push(p1);
        mu0.push(c);
        mu1.push(t);
    }
    let w = Matrix::new(n, P, values).map_err(|e| DataError::Invalid(e.to_string()))?;
    let trial = TrialDataset::new(w, a, y, 0.5)?;
    AugmentedTrialDataset::new(trial, u, y0, y1, mu0, mu1)
}

/// Draws `n_hist` historical controls: Y = m₀(W, U) + fresh noise, with the
/// marginal of W₁ or U replaced according to `shift`.
pub fn sample_historical(n_hist: usize, shift: Shift, rng: &mut Rng) -> Result<HistoricalDataset, DataError> {
    let marg = Marginals::new(shift);
    let eps = noise();
    let mut values = Vec::with_capacity(n_hist * P);
    let mut y = Vec::with_capacity(n_hist);
    let mut w = [0.0; P];
    for _ in 0..n_hist {
        let u = marg.draw(rng, &mut w);
        values.extend_from_slice(&w);
        y.push(m0(&w, u) + eps.draw(rng));
    }
    let w = Matrix::new(n_hist, P, values).map_err(|e| DataError::Invalid(e.to_string()))?;
    HistoricalDataset::new(w, y)
}

/// Population ATE with its Monte Carlo standard error (0 when exact).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrueAte {
    pub value: f64,
    pub mc_se: f64,
    pub draws: usize,
}

/// Draws used for the heterogeneous effect.
pub const TRUE_ATE_DRAWS: usize = 10_000_000;
/// Seed of the heterogeneous effect integration.
pub const TRUE_ATE_SEED: u64 = 20_240_501;

/// E[m₁ − m₀] under the trial marginals estimated from `draws` samples.
pub fn true_ate_mc(effect: Effect, draws: usize, seed: u64) -> TrueAte {
    let marg = Marginals::new(Shift::None);
    let mut rng = Rng::new(seed);
    let mut w = [0.0; P];
    let (mut mean, mut m2) = (0.0, 0.0);
    for k in 0..draws {
        let u = marg.draw(&mut rng, &mut w);
        let d = m1(&w, u, effect) - m0(&w, u);
        let delta = d - mean;
        mean += delta / (k + 1) as f64;
        m2 += delta * (d - mean);
    }
    let var = if draws > 1 { m2 / (draws - 1) as f64 } else { 0.0 };
    TrueAte {
        value: mean,
        mc_se: (var / draws as f64).sqrt(),
        draws,
    }
}

/// Ground-truth ATE: exact for the homogeneous surface, a cached
/// 10⁷-draw integral for the heterogeneous one.
pub fn true_ate(effect: Effect) -> TrueAte {
    static HET: OnceLock<TrueAte> = OnceLock::new();
    match effect {
        Effect::Homogeneous => TrueAte {
            value: ATE,
            mc_se: 0.0,
            draws: 0,
        },
        Effect::Heterogeneous => *HET.get_or_init(|| true_ate_mc(effect, TRUE_ATE_DRAWS, TRUE_ATE_SEED)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn zero_point() {
        let w = [0.0, 0.0, 0.0, 0.0, 0.0, 1.5, 1.5];
        assert_eq!(m0(&w, 0.5), 0.0);
        assert_eq!(m1(&w, 0.5, Effect::Homogeneous), 0.84);
        assert!((m1(&w, 0.5, Effect::Heterogeneous) - 1.6 * 1.5f64.sin()).abs() < 1e-15);
        assert!((m1(&w, 0.5, Effect::Heterogeneous) - 1.595_99).abs() < 1e-5);
    }

    #[test]
    fn hand_evaluations() {
        let mut w = [0.0, -FRAC_PI_2, 3.0, 0.3, FRAC_PI_2, 1.5, 1.5];
        assert!((m0(&w, 0.5) - 8.5).abs() < 1e-12);
        let het = 4.3 + 1.3 + 1.6 * 1.5f64.sin() + 1.4;
        assert!((m1(&w, 0.5, Effect::Heterogeneous) - het).abs() < 1e-12);
        w[0] = -5.0;
        assert!((m0(&w, 0.5) - 4.4).abs() < 1e-12);
        w[0] = -7.0;
        assert!((m0(&w, 0.5) - 0.3).abs() < 1e-12);
        w[0] = 0.0;
        assert!((m0(&w, 1.2) - 4.4).abs() < 1e-12);
        assert!((m0(&w, 2.0) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn labels_round_trip() {
        for s in Shift::ALL {
            assert_eq!(s.as_str().parse::<Shift>().unwrap(), s);
        }
        for e in Effect::ALL {
            assert_eq!(e.to_string().parse::<Effect>().unwrap(), e);
        }
        assert!("tiny".parse::<Shift>().is_err());
        assert_eq!(
            ScenarioConfig::new(Effect::Heterogeneous, Shift::ObsLarge, 200, 2000).label(),
            "heterogeneous/obs-large"
        );
    }

    #[test]
    fn trial_is_consistent() {
        let d = sample_trial(500, Effect::Heterogeneous, &mut Rng::new(3)).unwrap();
        for i in 0..500 {
            let expect = if d.trial.a()[i] == 1 { d.y1[i] } else { d.y0[i] };
            assert_eq!(d.trial.y()[i], expect);
            assert_eq!(d.m0[i], m0(d.trial.w().row(i), d.u[i]));
        }
    }

    #[test]
    fn same_seed_same_trial() {
        let a = sample_trial(50, Effect::Homogeneous, &mut Rng::new(8)).unwrap();
        let b = sample_trial(50, Effect::Homogeneous, &mut Rng::new(8)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn homogeneous_truth_is_exact() {
        assert_eq!(true_ate(Effect::Homogeneous).value, 0.84);
        let t = true_ate_mc(Effect::Homogeneous, 1000, 1);
        assert!((t.value - 0.84).abs() < 1e-12);
    }
}
