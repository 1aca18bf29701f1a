use super::*;
use crate::bart::BartConfig;
use crate::diagnostics::{ks_one_sample, mean, variance};
use crate::matrix::{ColumnKind, Matrix};
use crate::pilot::logistic;
use crate::rng::derive_stream;

fn small_bart() -> BartConfig {
    BartConfig {
        num_trees: 20,
        num_draws: 200,
        burn_in: 100,
        ..BartConfig::default()
    }
}

fn normal_x(n: usize, p: usize, rng: &mut RngStream) -> Matrix {
    Matrix::new(n, p, (0..n * p).map(|_| rng.standard_normal()).collect()).unwrap()
}

#[test]
fn bootstrap_weights_examples() {
    let mut rng = derive_stream(1, 0);
    assert_eq!(bayesian_bootstrap_weights(1, &mut rng), vec![1.0]);
    let first: Vec<f64> = (0..100_000).map(|_| bayesian_bootstrap_weights(2, &mut rng)[0]).collect();
    assert!(ks_one_sample(&first, |u| u.clamp(0.0, 1.0)).p_value > 0.001);
    let n = 5;
    let reps = 100_000;
    let mut sums = vec![0.0; n];
    for _ in 0..reps {
        let w = bayesian_bootstrap_weights(n, &mut rng);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12 && w.iter().all(|&v| v > 0.0));
        sums.iter_mut().zip(&w).for_each(|(s, v)| *s += v);
    }
    // Var(W_i) = (n - 1) / (n^2 (n + 1)) for Dirichlet(1, ..., 1)
    let se = ((n - 1) as f64 / ((n * n * (n + 1)) as f64) / reps as f64).sqrt();
    for s in sums {
        assert!((s / reps as f64 - 0.2).abs() < 3.0 * se);
    }
}

#[test]
fn chi_draw_hand_example() {
    let w = [0.2, 0.3, 0.5];
    let r = [1.0, 0.0, 1.0];
    let y = [2.0, f64::NAN, 4.0];
    let m = [1.0, 1.0, 1.0];
    let gamma = [1.0 / 0.5, 0.0, 1.0 / 0.8];
    let v = chi_draw(&m, &gamma, &y, &r, &w).unwrap();
    assert!((v - 3.275).abs() < 1e-12);
    // pure plug-in and pure weighting
    assert!((chi_draw(&m, &[0.0; 3], &y, &[0.0; 3], &w).unwrap() - 1.0).abs() < 1e-12);
    let v = chi_draw(&[0.0; 3], &[1.0; 3], &[2.0, 3.0, 4.0], &[1.0; 3], &w).unwrap();
    assert!((v - (0.4 + 0.9 + 2.0)).abs() < 1e-12);
    assert!(chi_draw(&m, &gamma, &y, &r, &w[..2]).is_err());
}

#[test]
fn debias_term_hand_example() {
    let v = debias_term(&[0.0, 3.0], &[1.0, 1.0], &[2.0, 0.0]).unwrap();
    assert!((v - 1.5).abs() < 1e-12);
    assert_eq!(debias_term(&[0.3, 3.0], &[0.3, 3.0], &[2.0, 0.0]).unwrap(), 0.0);
    assert_eq!(debias_term(&[0.0, 3.0], &[1.0, 1.0], &[1.0, 1.0]).unwrap(), 0.0);
    let o = oracle_bias_term(&[1.0, 1.0], &[0.0, 3.0], &[2.0, 0.0]).unwrap();
    assert!((o - 1.5).abs() < 1e-12);
}

fn three_rows() -> MissingDataset {
    let x = Matrix::new(3, 1, vec![0.0, 1.0, 2.0]).unwrap();
    MissingDataset::new(x, vec![ColumnKind::Continuous], vec![Some(2.0), None, Some(4.0)], vec![1.0, 0.0, 1.0]).unwrap()
}

#[test]
fn aipw_examples() {
    let d = three_rows();
    let v = aipw_point_estimate(&d, &[0.5, 0.7, 0.8], &[1.0; 3]).unwrap();
    assert!((v - (3.0 + 1.0 + 4.75) / 3.0).abs() < 1e-12);
    let x = Matrix::zeros(3, 1);
    let full = MissingDataset::new(x, vec![ColumnKind::Continuous], vec![Some(1.0), Some(2.0), Some(6.0)], vec![1.0; 3]).unwrap();
    assert!((aipw_point_estimate(&full, &[1.0; 3], &[0.7, -2.0, 9.0]).unwrap() - 3.0).abs() < 1e-12);
}

#[test]
fn aipw_is_unbiased_with_the_true_regression() {
    let mut rng = derive_stream(2, 0);
    let (n, reps) = (200, 2000);
    let mut ests = Vec::with_capacity(reps);
    for _ in 0..reps {
        let x: Vec<f64> = (0..n).map(|_| rng.standard_normal()).collect();
        let m0: Vec<f64> = x.iter().map(|v| 1.0 + v).collect();
        let r: Vec<f64> = x.iter().map(|&v| f64::from(u8::from(rng.bernoulli(logistic(v))))).collect();
        let y: Vec<Option<f64>> = (0..n).map(|i| (r[i] == 1.0).then(|| m0[i] + rng.standard_normal())).collect();
        let data = MissingDataset::new(Matrix::new(n, 1, x).unwrap(), vec![ColumnKind::Continuous], y, r).unwrap();
        // a deliberately wrong but valid propensity
        ests.push(aipw_point_estimate(&data, &vec![0.6; n], &m0).unwrap());
    }
    let se = (variance(&ests) / reps as f64).sqrt();
    assert!((mean(&ests) - 1.0).abs() < 3.0 * se);
}

#[test]
fn credible_interval_examples() {
    let draws: Vec<f64> = (1..=100).map(f64::from).collect();
    let ci = credible_interval(&draws, 0.10).unwrap();
    assert!((ci.lo - 5.95).abs() < 1e-12 && (ci.hi - 95.05).abs() < 1e-12);
    assert!((ci.length - 89.1).abs() < 1e-12 && (ci.mean - 50.5).abs() < 1e-12);
    let ci = credible_interval(&[2.5; 10], 0.05).unwrap();
    assert_eq!((ci.mean, ci.lo, ci.hi, ci.length), (2.5, 2.5, 2.5, 0.0));
    let mut rng = derive_stream(3, 0);
    let z: Vec<f64> = (0..100_000).map(|_| rng.standard_normal()).collect();
    let ci = credible_interval(&z, 0.05).unwrap();
    assert!((ci.lo + 1.96).abs() < 0.02 && (ci.hi - 1.96).abs() < 0.02);
    assert!(credible_interval(&[1.0], 0.05).is_err());
    assert!(credible_interval(&[1.0, 2.0], 1.0).is_err());
}

#[test]
fn drawset_identity_and_csv() {
    let ds = DrawSet::from_components(Method::Robart, Estimand::Mean, vec![1.0, 2.5], vec![0.25, -0.5]);
    assert_eq!(ds.draws, vec![0.75, 3.0]);
    let mut buf = Vec::new();
    ds.write_csv(&mut buf).unwrap();
    assert_eq!(
        String::from_utf8(buf).unwrap(),
        "draw_index,chi,b_hat,chi_corrected\n0,1,0.25,0.75\n1,2.5,-0.5,3\n"
    );
    let s = ds.summary(0.05, 7).unwrap();
    let json = serde_json::to_string(&s).unwrap();
    assert!(json.contains("\"method\":\"robart\"") && json.contains("\"S\":2") && json.contains("\"seed\":7"));
}

#[test]
fn dataset_invariants() {
    let x = Matrix::zeros(2, 1);
    let k = vec![ColumnKind::Continuous];
    assert!(MissingDataset::new(x.clone(), k.clone(), vec![None, Some(1.0)], vec![1.0, 1.0]).is_err());
    assert!(MissingDataset::new(x.clone(), k.clone(), vec![Some(1.0), Some(1.0)], vec![1.0, 0.0]).is_err());
    assert!(MissingDataset::new(x.clone(), k.clone(), vec![None, None], vec![0.0, 0.0]).is_err());
    let d = three_rows();
    assert!(d.y_observed(1).is_err());
    assert!(TreatmentDataset::new(x.clone(), k.clone(), vec![1.0, 2.0], vec![1.0, 1.0]).is_err());
    assert!(TreatmentDataset::new(x, k, vec![1.0, 2.0], vec![1.0, 0.5]).is_err());
}

fn missing_data(n: usize, c: f64, rng: &mut RngStream) -> (MissingDataset, Vec<f64>) {
    let x = normal_x(n, 2, rng);
    let pi: Vec<f64> = x.rows().map(|r| logistic(0.3 * r[0])).collect();
    let r: Vec<f64> = pi.iter().map(|&p| f64::from(u8::from(rng.bernoulli(p)))).collect();
    let y = (0..n)
        .map(|i| (r[i] == 1.0).then(|| c + x.get(i, 0) + 0.5 * rng.standard_normal()))
        .collect();
    let data = MissingDataset::new(x, vec![ColumnKind::Continuous; 2], y, r).unwrap();
    (data, pi)
}

#[test]
fn constant_outcome_concentrates_at_the_constant() {
    let mut rng = derive_stream(4, 0);
    let n = 100;
    let x = normal_x(n, 2, &mut rng);
    let r: Vec<f64> = (0..n).map(|i| f64::from(u8::from(i % 3 != 0))).collect();
    let y = (0..n).map(|i| (r[i] == 1.0).then_some(4.0)).collect();
    let data = MissingDataset::new(x, vec![ColumnKind::Continuous; 2], y, r).unwrap();
    let setup = CorrectionSpec::new(BartConfig {
        jitter: 1e-9,
        ..small_bart()
    });
    let pilots = MeanPilots {
        pi: vec![2.0 / 3.0; n],
        m: vec![4.0; n],
    };
    for method in [Method::PluginBart, Method::Onestep, Method::Robart] {
        let ds = run_mean_response(&data, method, Some(&pilots), &setup, &mut derive_stream(5, 0)).unwrap();
        let sd = variance(&ds.draws).sqrt();
        assert!((mean(&ds.draws) - 4.0).abs() <= 3.0 * sd + 1e-6, "{method:?}");
        assert!(ds.draws.iter().all(|v| (v - 4.0).abs() < 1e-4), "{method:?}");
    }
}

#[test]
fn robart_equals_onestep_when_the_pilot_is_the_draw() {
    let mut rng = derive_stream(6, 0);
    let (data, pi) = missing_data(50, 0.0, &mut rng);
    let n = data.n();
    let m = Matrix::new(1, n, (0..n).map(|_| rng.standard_normal()).collect()).unwrap();
    let pi_m = Matrix::new(1, n, pi.clone()).unwrap();
    let one = mean_response_from_draws(&data, Method::Onestep, &m, Some(&pi_m), None, 1, 0.01, &mut derive_stream(7, 0)).unwrap();
    let pilots = MeanPilots { pi, m: m.row(0).to_vec() };
    let rob = mean_response_from_draws(&data, Method::Robart, &m, None, Some(&pilots), 1, 0.01, &mut derive_stream(7, 0)).unwrap();
    assert_eq!(one.draws, rob.draws);
    assert_eq!(rob.b_hat, vec![0.0]);
}

#[test]
fn location_equivariance_for_all_methods() {
    let mut rng = derive_stream(8, 0);
    let (data, pi) = missing_data(120, 0.0, &mut rng);
    let c = 5.0;
    let shifted = data.shifted(c);
    let setup = CorrectionSpec::new(small_bart());
    let m_hat: Vec<f64> = data.x().rows().map(|r| r[0]).collect();
    let p0 = MeanPilots { pi: pi.clone(), m: m_hat.clone() };
    let p1 = MeanPilots { pi, m: m_hat.iter().map(|v| v + c).collect() };
    for method in [Method::PluginBart, Method::Onestep, Method::Robart] {
        let a = run_mean_response(&data, method, Some(&p0), &setup, &mut derive_stream(9, 0)).unwrap();
        let b = run_mean_response(&shifted, method, Some(&p1), &setup, &mut derive_stream(9, 0)).unwrap();
        for (u, v) in a.draws.iter().zip(&b.draws) {
            assert!((v - u - c).abs() < 1e-9, "{method:?}: {u} {v}");
        }
    }
}

#[test]
fn requesting_too_many_draws_fails() {
    let mut rng = derive_stream(10, 0);
    let (data, _) = missing_data(30, 0.0, &mut rng);
    let setup = CorrectionSpec {
        num_draws: 500,
        ..CorrectionSpec::new(small_bart())
    };
    let err = run_mean_response(&data, Method::PluginBart, None, &setup, &mut rng).unwrap_err();
    assert!(matches!(err, Error::NotEnoughDraws { requested: 500, available: 200 }));
    let setup = CorrectionSpec::new(small_bart());
    assert!(run_mean_response(&data, Method::Robart, None, &setup, &mut rng).is_err());
}

fn treatment_data(n: usize, effect: f64, rng: &mut RngStream) -> TreatmentDataset {
    let x = normal_x(n, 2, rng);
    let d: Vec<f64> = (0..n).map(|_| f64::from(u8::from(rng.bernoulli(0.5)))).collect();
    let y = (0..n)
        .map(|i| effect * d[i] + 0.5 * x.get(i, 1) + 0.3 * rng.standard_normal())
        .collect();
    TreatmentDataset::new(x, vec![ColumnKind::Continuous; 2], y, d).unwrap()
}

fn treatment_pilots(data: &TreatmentDataset, effect: f64) -> TreatmentPilots {
    let base: Vec<f64> = data.x().rows().map(|r| 0.5 * r[1]).collect();
    TreatmentPilots {
        pi: vec![0.5; data.n()],
        m1: base.iter().map(|b| b + effect).collect(),
        m0: base,
    }
}

#[test]
fn ate_null_and_unit_effect() {
    let setup = CorrectionSpec::new(small_bart());
    for (effect, seed) in [(0.0, 11), (1.0, 12)] {
        let data = treatment_data(300, effect, &mut derive_stream(seed, 0));
        let pilots = treatment_pilots(&data, effect);
        for method in [Method::PluginBart, Method::Onestep, Method::Robart] {
            let ds = run_ate(&data, method, Some(&pilots), &setup, &mut derive_stream(seed, 1)).unwrap();
            let sd = variance(&ds.draws).sqrt();
            let m = mean(&ds.draws);
            assert!((m - effect).abs() < 3.0 * sd, "{method:?} effect {effect}: {m} ± {sd}");
            assert!(sd < 0.2);
        }
    }
}

#[test]
fn att_null_and_homogeneous_effect() {
    let setup = CorrectionSpec::new(small_bart());
    let data = treatment_data(300, 0.0, &mut derive_stream(13, 0));
    let pilots = treatment_pilots(&data, 0.0);
    for method in [Method::PluginBart, Method::Onestep, Method::Robart] {
        let ds = run_att(&data, method, Some(&pilots), &setup, &mut derive_stream(13, 1)).unwrap();
        let sd = variance(&ds.draws).sqrt();
        assert!(mean(&ds.draws).abs() < 3.0 * sd, "{method:?}");
    }
    let data = treatment_data(300, 1.0, &mut derive_stream(14, 0));
    let pilots = treatment_pilots(&data, 1.0);
    let att = run_att(&data, Method::Robart, Some(&pilots), &setup, &mut derive_stream(14, 1)).unwrap();
    let ate = run_ate(&data, Method::Robart, Some(&pilots), &setup, &mut derive_stream(14, 1)).unwrap();
    let joint_sd = (variance(&att.draws) + variance(&ate.draws)).sqrt();
    assert!((mean(&att.draws) - mean(&ate.draws)).abs() < 3.0 * joint_sd);
}

#[test]
fn att_two_row_hand_check() {
    let x = Matrix::zeros(2, 1);
    let data = TreatmentDataset::new(x, vec![ColumnKind::Continuous], vec![3.0, 1.0], vec![1.0, 0.0]).unwrap();
    let m0 = Matrix::new(1, 2, vec![1.5, 0.5]).unwrap();
    let pilots = TreatmentPilots {
        pi: vec![0.5, 0.5],
        m1: vec![0.0; 2],
        m0: vec![1.0, 1.0],
    };
    let ds = att_from_draws(&data, Method::Robart, &m0, None, Some(&pilots), 1, 0.01, &mut derive_stream(15, 0)).unwrap();
    let w = bayesian_bootstrap_weights(2, &mut derive_stream(15, 0));
    // pi_bar = 0.5: gamma = (1 / 0.5, -(1 / 0.5) * 0.5 / 0.5) = (2, -2)
    let chi = w[0] * 2.0 * (3.0 - 1.5) + w[1] * -2.0 * (1.0 - 0.5);
    let b = ((1.0 - 2.0) * (1.5 - 1.0) + (1.0 + 2.0) * (0.5 - 1.0)) / 2.0;
    assert!((ds.chi[0] - chi).abs() < 1e-12);
    assert!((ds.b_hat[0] - b).abs() < 1e-12);
}
