use ftsbench_numeric::{
    cholesky, cholesky_solve, minimize_bfgs, numeric_gradient, solve, AdamConfig, AdamState, BfgsOptions, DenseMatrix, FeedForwardNet,
    MlpShape, Tape,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| r.random_range(-1.0..1.0))
}

fn net(seed: u64) -> FeedForwardNet {
    FeedForwardNet::residual_mlp(&mut ChaCha8Rng::seed_from_u64(seed), MlpShape { input: 4, hidden: 6, residual_blocks: 2, output: 2 })
}

#[test]
fn taped_forward_matches_plain_forward() {
    let mut r = ChaCha8Rng::seed_from_u64(1);
    let n = net(2);
    let x = random(&mut r, 7, 4);
    let mut tape = Tape::new();
    let bound = n.bind(&mut tape);
    let xv = tape.leaf(x.clone());
    let out = bound.forward(&mut tape, xv).unwrap();
    let plain = n.forward_batch(&x).unwrap();
    assert!(tape.value(out).max_abs_diff(&plain).unwrap() < 1e-14);
    assert_eq!(n.forward(x.row(3)).unwrap(), plain.row(3).to_vec());
}

fn flatten(params: &[DenseMatrix]) -> Vec<f64> {
    params.iter().flat_map(|p| p.as_slice().to_vec()).collect()
}

fn unflatten(like: &[DenseMatrix], flat: &[f64]) -> Vec<DenseMatrix> {
    let mut at = 0;
    like.iter()
        .map(|p| {
            let m = DenseMatrix::from_vec(p.rows(), p.cols(), flat[at..at + p.len()].to_vec()).unwrap();
            at += p.len();
            m
        })
        .collect()
}

#[test]
fn network_gradient_matches_central_differences() {
    let mut r = ChaCha8Rng::seed_from_u64(3);
    let template = net(4);
    let x = random(&mut r, 5, 4);
    let y = random(&mut r, 5, 2);
    let loss = |n: &FeedForwardNet| {
        let out = n.forward_batch(&x).unwrap();
        out.zip_map(&y, |a, b| (a - b).powi(2)).unwrap().sum() / 5.0
    };

    let mut tape = Tape::new();
    let bound = template.bind(&mut tape);
    let xv = tape.leaf(x.clone());
    let out = bound.forward(&mut tape, xv).unwrap();
    let yv = tape.leaf(y.clone());
    let diff = tape.sub(out, yv).unwrap();
    let sq = tape.square(diff).unwrap();
    let total = tape.sum(sq).unwrap();
    let mean = tape.scale(total, 0.2).unwrap();
    let mut grads = tape.backward(mean).unwrap();
    let analytic: Vec<DenseMatrix> = bound.parameter_vars().iter().map(|&v| grads.take(v).unwrap()).collect();

    let params = template.parameters();
    let f = |flat: &[f64]| {
        let mut n = template.clone();
        n.set_parameters(&unflatten(&params, flat)).unwrap();
        loss(&n)
    };
    let numeric = numeric_gradient(&f, &flatten(&params));
    for (a, b) in flatten(&analytic).iter().zip(&numeric) {
        assert!((a - b).abs() <= 1e-6 * a.abs().max(b.abs()).max(1.0), "{a} vs {b}");
    }
}

#[test]
fn adam_fits_a_linear_map_through_the_tape() {
    let mut r = ChaCha8Rng::seed_from_u64(5);
    let x = random(&mut r, 64, 3);
    let truth = DenseMatrix::from_vec(3, 1, vec![0.5, -1.0, 2.0]).unwrap();
    let y = x.matmul(&truth).unwrap();
    let mut params = vec![DenseMatrix::zeros(3, 1)];
    let mut adam = AdamState::new(AdamConfig { learning_rate: 0.05, ..AdamConfig::default() }, &params);
    let mse = |w: &DenseMatrix| x.matmul(w).unwrap().zip_map(&y, |a, b| (a - b).powi(2)).unwrap().sum() / 64.0;
    let start = mse(&params[0]);
    for _ in 0..500 {
        let mut tape = Tape::new();
        let w = tape.leaf(params[0].clone());
        let xv = tape.leaf(x.clone());
        let pred = tape.matmul(xv, w).unwrap();
        let yv = tape.leaf(y.clone());
        let d = tape.sub(pred, yv).unwrap();
        let sq = tape.square(d).unwrap();
        let loss = tape.mean(sq).unwrap();
        let g = tape.backward(loss).unwrap().take(w).unwrap();
        adam.step(&mut params, &[g]).unwrap();
    }
    assert_eq!(adam.step_count(), 500);
    assert!(mse(&params[0]) < 1e-6 * start, "{}", mse(&params[0]));
    assert!(params[0].max_abs_diff(&truth).unwrap() < 1e-3);
}

#[test]
fn bfgs_finds_the_rosenbrock_minimum() {
    let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
    let res = minimize_bfgs(f, &[-1.2, 1.0], &BfgsOptions { max_iterations: 500, ..BfgsOptions::default() });
    assert!((res.x[0] - 1.0).abs() < 1e-4 && (res.x[1] - 1.0).abs() < 1e-4, "{:?}", res.x);
    assert!(res.value < 1e-8);
}

#[test]
fn cholesky_and_lu_solves_agree() {
    let mut r = ChaCha8Rng::seed_from_u64(9);
    for n in 1..8 {
        let a = random(&mut r, n, n);
        let spd = a.matmul_t(&a).unwrap().zip_map(&DenseMatrix::identity(n), |x, i| x + 0.5 * i).unwrap();
        let b: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
        let via_chol = cholesky_solve(&cholesky(&spd).unwrap(), &b).unwrap();
        let via_lu = solve(&spd, &b).unwrap();
        for (u, v) in via_chol.iter().zip(&via_lu) {
            assert!((u - v).abs() < 1e-10);
        }
        let back = spd.matmul(&DenseMatrix::from_vec(n, 1, via_lu).unwrap()).unwrap();
        for (u, v) in back.as_slice().iter().zip(&b) {
            assert!((u - v).abs() < 1e-10);
        }
    }
}
