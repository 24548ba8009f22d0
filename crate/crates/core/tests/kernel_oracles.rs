use ttlr_core::loss::binary_loss_at_margin;
use ttlr_core::{
    binary_grad, binary_loss, escort, exp_t, log_partition, log_t, partition_d1, partition_d2, regularized_objective,
    surrogate_grad, surrogate_loss, tempered_probs, tsallis_divergence, tsallis_entropy, Dataset, Example, Sign,
    SparseVector, Temperature, TemperaturePair, WeightMatrix,
};

fn t(v: f64) -> Temperature {
    Temperature::new(v).unwrap()
}

fn tp(t1: f64, t2: f64) -> TemperaturePair {
    TemperaturePair::new(t1, t2).unwrap()
}

fn close(a: f64, b: f64, tol: f64) {
    assert!((a - b).abs() <= tol, "{a} vs {b}");
}

const LN2: f64 = std::f64::consts::LN_2;

#[test]
fn tempered_log_and_exp() {
    for tv in [0.2, 0.5, 1.0, 1.5, 1.9] {
        assert_eq!(log_t(1.0, t(tv)).unwrap(), 0.0);
        assert_eq!(exp_t(0.0, t(tv)), 1.0);
    }
    close(log_t(4.0, t(0.5)).unwrap(), 2.0, 1e-14);
    close(log_t(std::f64::consts::E, t(1.0)).unwrap(), 1.0, 1e-15);
    close(log_t(std::f64::consts::E, t(1.0 + 1e-9)).unwrap(), 1.0, 1e-8);
    close(exp_t(-2.0, t(1.5)), 0.25, 1e-15);
    assert_eq!(exp_t(-3.0, t(0.5)), 0.0);
    assert!(log_t(-1.0, t(0.5)).is_err());
}

#[test]
fn tsallis_measures() {
    close(tsallis_entropy(&[1.0, 0.0], t(1.5)).unwrap(), 0.0, 1e-15);
    close(tsallis_entropy(&[0.5, 0.5], t(1.0)).unwrap(), LN2, 1e-15);
    let expected = 2.0 * 0.5 * log_t(2.0, t(1.5)).unwrap();
    close(tsallis_entropy(&[0.5, 0.5], t(1.5)).unwrap(), expected, 1e-14);

    let p = [0.2, 0.3, 0.5];
    close(tsallis_divergence(&p, &p, t(0.7)).unwrap(), 0.0, 1e-15);
    close(tsallis_divergence(&[1.0, 0.0], &[0.5, 0.5], t(1.0)).unwrap(), LN2, 1e-15);
    close(tsallis_divergence(&[1.0, 0.0], &[0.25, 0.75], t(0.5)).unwrap(), 1.0, 1e-14);
}

#[test]
fn log_partition_values() {
    close(log_partition(&[0.0, 0.0], t(1.0)).unwrap().value, LN2, 1e-13);
    close(
        log_partition(&[0.0, 0.0], t(1.5)).unwrap().value,
        2.0 * (2f64.sqrt() - 1.0),
        1e-12,
    );
    let g0 = log_partition(&[0.0, 0.0, 0.0], t(1.6)).unwrap().value;
    close(log_partition(&[5.0, 5.0, 5.0], t(1.6)).unwrap().value, 5.0 + g0, 1e-12);
}

#[test]
fn probabilities_and_escort() {
    for tv in [0.5, 1.0, 1.6] {
        let p = tempered_probs(&[0.0, 0.0], t(tv)).unwrap();
        close(p[0], 0.5, 1e-13);
        close(p[1], 0.5, 1e-13);
    }
    let p = tempered_probs(&[1.0, 0.0, -1.0], t(1.0)).unwrap();
    let z: f64 = [1f64, 0.0, -1.0].iter().map(|a| a.exp()).sum();
    for (pi, a) in p.iter().zip([1f64, 0.0, -1.0]) {
        close(*pi, a.exp() / z, 1e-13);
    }
    close(p[0], 0.6652, 1e-4);
    let sat = tempered_probs(&[300.0, -300.0], t(1.0)).unwrap();
    close(sat[0], 1.0, 1e-15);

    let p = [0.1, 0.6, 0.3];
    for (a, b) in escort(&p, t(1.0)).unwrap().iter().zip(p) {
        close(*a, b, 1e-15);
    }
    let q = escort(&[0.8, 0.2], t(1.999999999)).unwrap();
    close(q[0], 16.0 / 17.0, 1e-8);
    close(escort(&[0.5, 0.5], t(1.3)).unwrap()[0], 0.5, 1e-15);
}

#[test]
fn binary_partition_derivatives() {
    close(partition_d1(0.0, t(1.6)).unwrap(), 0.0, 1e-15);
    close(partition_d1(400.0, t(1.0)).unwrap(), 0.5, 1e-12);
    close(partition_d1(1.0, t(1.0)).unwrap(), 0.5 * (0.5f64).tanh(), 1e-12);
    close(partition_d2(0.0, t(1.0)).unwrap(), 0.25, 1e-12);
    assert_eq!(partition_d2(10.0, t(0.5)).unwrap(), 0.0);
    for tv in [0.5, 1.0, 1.6] {
        for a in [-3.0, -0.4, 0.0, 1.1, 6.0] {
            let h = 1e-5;
            let fd = (partition_d1(a + h, t(tv)).unwrap() - partition_d1(a - h, t(tv)).unwrap()) / (2.0 * h);
            close(partition_d2(a, t(tv)).unwrap(), fd, 1e-6);
        }
    }
}

fn example(values: &[f64], label: usize) -> Example {
    Example::new(SparseVector::from_dense(values), label)
}

#[test]
fn multiclass_loss_values() {
    let zeros = WeightMatrix::zeros(2, 2);
    close(surrogate_loss(&example(&[1.0, -2.0], 0), &zeros, tp(1.0, 1.0)).unwrap(), LN2, 1e-13);

    // confident correct prediction costs nothing; a hopeless one costs the cap
    let w = WeightMatrix::new(1, 2, vec![400.0, -400.0]).unwrap();
    close(surrogate_loss(&example(&[1.0], 0), &w, tp(0.6, 1.0)).unwrap(), 0.0, 1e-12);
    let far = WeightMatrix::new(1, 2, vec![-50.0, 50.0]).unwrap();
    close(surrogate_loss(&example(&[1.0], 0), &far, tp(0.6, 0.5)).unwrap(), 2.5, 1e-12);
    let g = surrogate_grad(&example(&[1.0], 0), &far, tp(0.6, 0.5)).unwrap();
    assert!(g.as_slice().iter().all(|&v| v == 0.0));
}

#[test]
fn binary_loss_values() {
    let x = SparseVector::from_dense(&[1.0]);
    close(binary_loss(&x, Sign::Pos, &[0.0], tp(1.0, 1.0)).unwrap(), LN2, 1e-13);
    close(binary_loss(&x, Sign::Pos, &[1e3], tp(0.6, 1.6)).unwrap(), 0.0, 1e-3);

    // logistic gradient and the symmetric point
    let x = SparseVector::from_dense(&[0.5, -1.0]);
    let w = [0.3, 0.7];
    let a = x.dot(&w);
    let g = binary_grad(&x, Sign::Pos, &w, tp(1.0, 1.0)).unwrap();
    let s = 1.0 / (1.0 + (-a).exp());
    for (gi, xi) in g.iter().zip(x.values()) {
        close(*gi, (s - 1.0) * xi, 1e-13);
    }
    let temps = tp(0.6, 1.6);
    let g = binary_grad(&x, Sign::Neg, &[0.0, 0.0], temps).unwrap();
    let factor = 0.5f64.powf(temps.gap());
    for (gi, xi) in g.iter().zip(x.values()) {
        close(*gi, 0.5 * xi * factor, 1e-13);
    }
}

#[test]
fn plateau_is_flat() {
    for (t1, t2) in [(0.6, 0.5), (0.8, 0.6), (0.5, 0.5)] {
        let edge = -1.0 / (1.0 - t2);
        let cap = 1.0 / (1.0 - t1);
        for k in 0..50 {
            let a = edge - 0.2 * k as f64;
            close(binary_loss_at_margin(a, Sign::Pos, tp(t1, t2)).unwrap(), cap, 1e-12);
        }
        assert!(binary_loss_at_margin(edge + 0.1, Sign::Pos, tp(t1, t2)).unwrap() < cap);
    }
}

#[test]
fn objective_values() {
    let ex = example(&[0.4, -1.2, 2.0], 2);
    let data = Dataset::new(vec![ex.clone()], 3, 3).unwrap();
    let w = WeightMatrix::new(3, 3, (0..9).map(|i| 0.1 * i as f64 - 0.3).collect()).unwrap();
    let temps = tp(0.7, 1.4);
    let (v, _) = regularized_objective(&data, &w, temps, 0.0).unwrap();
    close(v, surrogate_loss(&ex, &w, temps).unwrap(), 1e-15);

    let many = Dataset::new(
        (0..12).map(|i| example(&[i as f64, 1.0 - i as f64], i % 4)).collect(),
        2,
        4,
    )
    .unwrap();
    let (v, _) = regularized_objective(&many, &WeightMatrix::zeros(2, 4), tp(1.0, 1.0), 0.0).unwrap();
    close(v, 4f64.ln(), 1e-13);
}
