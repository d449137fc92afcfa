use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ynote_provenance::model::{fit_binary, train_ovr, Init, LogisticObjective};
use ynote_provenance::{ClassWeight, FeatureMatrix, SparseRow, TrainConfig};

fn random_matrix(rng: &mut ChaCha8Rng, n: usize, d: usize) -> FeatureMatrix {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            (0..d)
                .map(|_| if rng.random_bool(0.4) { 0.0 } else { rng.random_range(-2.0..2.0) })
                .collect()
        })
        .collect();
    FeatureMatrix::from_dense(&rows)
}

fn central_difference(obj: &LogisticObjective<'_>, p: &[f64], h: f64) -> Vec<f64> {
    (0..p.len())
        .map(|j| {
            let mut a = p.to_vec();
            let mut b = p.to_vec();
            a[j] += h;
            b[j] -= h;
            (obj.value(&a) - obj.value(&b)) / (2.0 * h)
        })
        .collect()
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..25 {
        let (n, d) = (rng.random_range(4..20), rng.random_range(1..7));
        let x = random_matrix(&mut rng, n, d);
        let pos: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..3.0)).collect();
        let obj = LogisticObjective::new(&x, pos, w, rng.random_range(0.1..10.0));
        let p: Vec<f64> = (0..obj.dim()).map(|_| rng.random_range(-1.5..1.5)).collect();
        let g = obj.gradient(&p);
        let fd = central_difference(&obj, &p, 1e-5);
        for (a, b) in g.iter().zip(&fd) {
            let rel = (a - b).abs() / a.abs().max(b.abs()).max(1e-12);
            assert!(rel <= 1e-4, "{a} vs {b}");
        }
    }
}

#[test]
fn zero_and_random_starts_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for trial in 0..5 {
        let x = random_matrix(&mut rng, 40, 6);
        let y: Vec<usize> = (0..40).map(|_| rng.random_range(0..3)).collect();
        let base = TrainConfig { seed: trial, ..Default::default() };
        let a = train_ovr(&x, &y, &base).unwrap();
        let b = train_ovr(&x, &y, &TrainConfig { init: Init::Random, ..base }).unwrap();
        for (ra, rb) in a.coef.iter().chain([&a.intercept]).zip(b.coef.iter().chain([&b.intercept])) {
            for (u, v) in ra.iter().zip(rb) {
                assert!((u - v).abs() <= 1e-6 * u.abs().max(1.0), "{u} vs {v}");
            }
        }
    }
}

#[test]
fn converged_fits_have_small_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let x = random_matrix(&mut rng, 60, 8);
    let pos: Vec<bool> = (0..60).map(|_| rng.random_bool(0.3)).collect();
    let obj = LogisticObjective::new(&x, pos, vec![1.0; 60], 1.0);
    let fit = fit_binary(&obj, vec![0.0; obj.dim()], 2000, 1e-6);
    assert!(fit.converged);
    let g = obj.gradient(&fit.params);
    assert!(g.iter().map(|v| v * v).sum::<f64>().sqrt() <= 1e-6);
}

#[test]
fn predict_is_argmax_of_probabilities() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let x = random_matrix(&mut rng, 50, 5);
    let y: Vec<usize> = (0..50).map(|i| i % 3).collect();
    let m = train_ovr(&x, &y, &TrainConfig::default()).unwrap();
    for _ in 0..100 {
        let v: Vec<f64> = (0..5).map(|_| rng.random_range(-3.0..3.0)).collect();
        let row = SparseRow::from_dense(&v);
        let p = m.predict_proba(&row).unwrap();
        assert!((p.0.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let best = (0..p.0.len()).fold(0, |b, i| if p.0[i] > p.0[b] { i } else { b });
        assert_eq!(m.predict(&row).unwrap(), m.classes[best]);
    }
}

#[test]
fn separable_toy_is_fit_exactly() {
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for c in 0..3 {
        for i in 0..10 {
            let mut v = vec![0.0; 3];
            v[c] = 1.0 + i as f64 * 0.1;
            rows.push(v);
            y.push(c);
        }
    }
    let x = FeatureMatrix::from_dense(&rows);
    let m = train_ovr(&x, &y, &TrainConfig::default()).unwrap();
    let hits = x.rows().iter().zip(&y).filter(|(r, &t)| m.predict(r).unwrap() == t).count();
    assert_eq!(hits, 30);
}

#[test]
fn badly_scaled_column_still_converges() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let rows: Vec<Vec<f64>> = (0..60)
        .map(|_| vec![rng.random_range(0.0..1.0), rng.random_range(0.0..1000.0), rng.random_range(0.0..0.001)])
        .collect();
    let y: Vec<usize> = rows.iter().map(|r| usize::from(r[1] > 500.0)).collect();
    let x = FeatureMatrix::from_dense(&rows);
    let m = train_ovr(&x, &y, &TrainConfig { class_weight: ClassWeight::Uniform, ..Default::default() }).unwrap();
    assert!(m.summaries.iter().all(|s| s.converged && s.gradient_norm.is_finite()));
    let acc = x.rows().iter().zip(&y).filter(|(r, &t)| m.predict(r).unwrap() == t).count();
    assert!(acc >= 55, "{acc}");
}
