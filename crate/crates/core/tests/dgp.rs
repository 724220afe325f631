use prognostic_tmle::dgp::{
    m0, m1, sample_historical, sample_trial, true_ate, true_ate_mc, Effect, Shift, ATE, P,
};
use prognostic_tmle::numerics::Rng;

const DRAWS: usize = 100_000;

fn column(x: &prognostic_tmle::numerics::Matrix, j: usize) -> Vec<f64> {
    (0..x.rows()).map(|i| x.row(i)[j]).collect()
}

#[test]
fn trial_marginals_respect_support() {
    let aug = sample_trial(DRAWS, Effect::Heterogeneous, &mut Rng::new(1)).unwrap();
    let w = aug.trial.w();
    let open = |v: f64, lo: f64, hi: f64| v > lo && v < hi;
    assert!(column(w, 0).iter().all(|&v| open(v, -2.0, 1.0)));
    assert!(column(w, 1).iter().all(|&v| open(v, -2.0, 1.0)));
    assert!(column(w, 3).iter().all(|&v| v >= 0.0));
    assert!(column(w, 4).iter().all(|&v| v >= 0.0));
    assert!(column(w, 5).iter().all(|&v| open(v, 1.0, 2.0)));
    assert!(column(w, 6).iter().all(|&v| open(v, 1.0, 2.0)));
    assert!(aug.u.iter().all(|&v| open(v, 0.0, 1.0)));
}

#[test]
fn shift_indicators_inert_in_trial() {
    let aug = sample_trial(DRAWS, Effect::Homogeneous, &mut Rng::new(2)).unwrap();
    for i in 0..DRAWS {
        let w1 = aug.trial.w().row(i)[0];
        let u = aug.u[i];
        assert!(!(w1 < -4.1 || w1 < -6.1 || u > 1.1 || u > 1.55));
    }
}

#[test]
fn homogeneous_difference_is_constant() {
    let mut rng = Rng::new(3);
    for _ in 0..1000 {
        let w: Vec<f64> = (0..P).map(|_| rng.uniform() * 20.0 - 10.0).collect();
        let u = rng.uniform() * 4.0 - 1.0;
        let base = m0(&w, u);
        assert!((m1(&w, u, Effect::Homogeneous) - base - ATE).abs() <= 4.0 * f64::EPSILON * (1.0 + base.abs()));
    }
}

#[test]
fn homogeneous_rows_average_exactly() {
    let aug = sample_trial(1_000_000, Effect::Homogeneous, &mut Rng::new(4)).unwrap();
    let n = aug.m0.len() as f64;
    let mean = aug.m1.iter().zip(&aug.m0).map(|(a, b)| a - b).sum::<f64>() / n;
    assert!((mean - ATE).abs() < 1e-9);
    assert_eq!(true_ate(Effect::Homogeneous).value, ATE);
}

#[test]
fn heterogeneous_rows_match_oracle() {
    let truth = true_ate(Effect::Heterogeneous);
    let aug = sample_trial(1_000_000, Effect::Heterogeneous, &mut Rng::new(5)).unwrap();
    let d: Vec<f64> = aug.m1.iter().zip(&aug.m0).map(|(a, b)| a - b).collect();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let sd = (d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let se = (sd * sd / n + truth.mc_se * truth.mc_se).sqrt();
    assert!((mean - truth.value).abs() < 4.0 * se, "{mean} vs {}", truth.value);
}

#[test]
fn oracle_is_reproducible() {
    let a = true_ate_mc(Effect::Heterogeneous, 10_000, 9);
    let b = true_ate_mc(Effect::Heterogeneous, 10_000, 9);
    assert_eq!(a, b);
    assert_eq!(true_ate(Effect::Heterogeneous), true_ate(Effect::Heterogeneous));
}

#[test]
fn historical_shift_supports() {
    let h = sample_historical(DRAWS, Shift::None, &mut Rng::new(6)).unwrap();
    assert!(column(h.w(), 0).iter().all(|&v| v > -2.0 && v < 1.0));
    let h = sample_historical(DRAWS, Shift::ObsLarge, &mut Rng::new(6)).unwrap();
    assert!(column(h.w(), 0).iter().all(|&v| v > -7.0 && v < -4.0));
    let h = sample_historical(DRAWS, Shift::ObsSmall, &mut Rng::new(6)).unwrap();
    assert!(column(h.w(), 0).iter().all(|&v| v > -4.0 && v < -1.0));
}

#[test]
fn unobservable_shift_fires_u_indicators() {
    // U is not stored. With u = 2 both U terms are on; rows with U in
    // (1.5, 1.55) only carry the first, leaving 4.1·sin|W₂| on average.
    let h = sample_historical(DRAWS, Shift::UnobsLarge, &mut Rng::new(7)).unwrap();
    let r: Vec<f64> = (0..h.n()).map(|i| h.y()[i] - m0(h.w().row(i), 2.0)).collect();
    let e_sin = (2.0 - 2f64.cos() - 1f64.cos()) / 3.0;
    let expected = 4.1 * e_sin * 0.05;
    let (mean, sd) = mean_sd(&r);
    assert!((mean - expected).abs() < 4.0 * sd / (DRAWS as f64).sqrt(), "{mean} vs {expected}");
    let h = sample_historical(DRAWS, Shift::UnobsSmall, &mut Rng::new(7)).unwrap();
    // U ~ U(0.5, 1.5): the first term is on above 1.1, the second never
    let r: Vec<f64> = (0..h.n()).map(|i| h.y()[i] - m0(h.w().row(i), 0.0)).collect();
    let expected = -4.1 * e_sin * 0.4;
    let (mean, sd) = mean_sd(&r);
    assert!((mean - expected).abs() < 4.0 * sd / (DRAWS as f64).sqrt(), "{mean} vs {expected}");
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}

#[test]
fn observable_shift_lowers_historical_outcomes() {
    let base = sample_historical(DRAWS, Shift::None, &mut Rng::new(8)).unwrap();
    let large = sample_historical(DRAWS, Shift::ObsLarge, &mut Rng::new(9)).unwrap();
    let (m_base, s_base) = mean_sd(base.y());
    let (m_large, s_large) = mean_sd(large.y());
    let diff = m_large - m_base;
    // E[sin|W₂|] for W₂ ~ U(−2, 1) in closed form
    let e_sin = (2.0 - 2f64.cos() - 1f64.cos()) / 3.0;
    let p41 = 2.9 / 3.0;
    let p61 = 0.9 / 3.0;
    let leading = -4.1 * e_sin * p41;
    let expected = leading - 4.1 * e_sin * p61;
    let se = (s_base * s_base / DRAWS as f64 + s_large * s_large / DRAWS as f64).sqrt();
    assert!(diff < leading, "{diff} should be below {leading}");
    assert!((diff - expected).abs() < 4.0 * se, "{diff} vs {expected}");
}
