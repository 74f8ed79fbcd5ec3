mod common;

use common::{fd_check, random_tensor, rel_err, rng};
use neural_points::autodiff::{Graph, OpKind, Tensor, Var};
use neural_points::Error;
use rand::Rng;

const H: f64 = 1e-5;
const TOL: f64 = 1e-4;
const INSTANCES: u64 = 100;

fn check_op<F>(name: &str, shapes: &[Vec<usize>], lo: f64, hi: f64, f: F)
where
    F: Fn(&mut Graph, &[Var]) -> neural_points::Result<Var> + Copy,
{
    for seed in 0..INSTANCES {
        let mut r = rng(seed * 7919 + 1);
        let inputs: Vec<Tensor> = shapes
            .iter()
            .map(|s| random_tensor(&mut r, s, lo, hi))
            .collect();
        let worst = fd_check(&inputs, f, H, seed);
        assert!(worst < TOL, "{name}: instance {seed} rel err {worst}");
    }
}

#[test]
fn forward_examples() {
    let mut g = Graph::new();
    let x = g.constant(Tensor::vector(vec![-1.0, 0.0, 2.0]));
    let y = g.forward_op(OpKind::Relu, &[x]).unwrap();
    assert_eq!(g.value(y).data(), &[0.0, 0.0, 2.0]);

    let a = g.constant(Tensor::from_points(&[[1.0, 0.0, 0.0]]));
    let b = g.constant(Tensor::from_points(&[[0.0, 1.0, 0.0]]));
    let c = g.forward_op(OpKind::Cross3, &[a, b]).unwrap();
    assert_eq!(g.value(c).data(), &[0.0, 0.0, 1.0]);

    let m = g.constant(Tensor::new(vec![2, 2], vec![1.0, 5.0, 3.0, 2.0]).unwrap());
    let mx = g.forward_op(OpKind::MaxReduce, &[m]).unwrap();
    assert_eq!(g.value(mx).data(), &[3.0, 5.0]);
}

#[test]
fn shape_mismatch_names_op() {
    let mut g = Graph::new();
    let a = g.constant(Tensor::zeros(&[2, 3]));
    let b = g.constant(Tensor::zeros(&[2, 3]));
    let err = g.matmul(a, b).unwrap_err();
    match err {
        Error::Shape { op, detail } => {
            assert_eq!(op, "matmul");
            assert!(detail.contains("[2, 3]"));
        }
        other => panic!("unexpected {other:?}"),
    }
    assert!(g.forward_op(OpKind::Add, &[a]).is_err());
}

#[test]
fn square_and_relu_gradients() {
    let mut g = Graph::new();
    let p = g.param("p", Tensor::scalar(3.0));
    let l = g.square(p);
    let grads = g.backward(l).unwrap();
    assert_eq!(grads["p"].item(), 6.0);

    let mut g = Graph::new();
    let p = g.param("p", Tensor::scalar(-1.0));
    let l = g.relu(p);
    assert_eq!(g.backward(l).unwrap()["p"].item(), 0.0);

    // subgradient convention at exactly zero
    let mut g = Graph::new();
    let p = g.param("p", Tensor::scalar(0.0));
    let l = g.relu(p);
    assert_eq!(g.backward(l).unwrap()["p"].item(), 0.0);
}

#[test]
fn non_scalar_loss_rejected() {
    let mut g = Graph::new();
    let p = g.param("p", Tensor::vector(vec![1.0, 2.0]));
    assert!(matches!(g.backward(p), Err(Error::Contract(_))));
}

#[test]
fn unreachable_parameter_gets_zero() {
    let mut g = Graph::new();
    let p = g.param("p", Tensor::scalar(2.0));
    let _q = g.param("q", Tensor::vector(vec![1.0, 1.0]));
    let l = g.square(p);
    let grads = g.backward(l).unwrap();
    assert_eq!(grads["q"].data(), &[0.0, 0.0]);
}

#[test]
fn max_reduce_ties_route_to_first() {
    let mut g = Graph::new();
    let p = g.param("p", Tensor::new(vec![3, 1], vec![2.0, 2.0, 1.0]).unwrap());
    let m = g.max_reduce(p, 0).unwrap();
    let s = g.sum_all(m);
    assert_eq!(g.backward(s).unwrap()["p"].data(), &[1.0, 0.0, 0.0]);
}

#[test]
fn binary_ops_match_finite_differences() {
    let s = vec![vec![4, 3], vec![4, 3]];
    check_op("add", &s, -1.0, 1.0, |g, v| g.forward_op(OpKind::Add, v));
    check_op("sub", &s, -1.0, 1.0, |g, v| g.forward_op(OpKind::Sub, v));
    check_op("mul", &s, -1.0, 1.0, |g, v| g.forward_op(OpKind::Mul, v));
    check_op("div", &s, 0.5, 2.0, |g, v| g.forward_op(OpKind::Div, v));
    check_op("cross3", &s, -1.0, 1.0, |g, v| g.forward_op(OpKind::Cross3, v));
    check_op("concat", &[vec![4, 3], vec![4, 2]], -1.0, 1.0, |g, v| {
        g.forward_op(OpKind::Concat, v)
    });
    check_op("matmul", &[vec![3, 4], vec![4, 2]], -1.0, 1.0, |g, v| {
        g.forward_op(OpKind::MatMul, v)
    });
    check_op("add_row", &[vec![4, 3], vec![3]], -1.0, 1.0, |g, v| g.add(v[0], v[1]));
    check_op("mul_col", &[vec![4, 3], vec![4]], -1.0, 1.0, |g, v| g.mul_col(v[0], v[1]));
    check_op("div_col", &[vec![4, 3], vec![4]], 0.5, 2.0, |g, v| g.div_col(v[0], v[1]));
}

#[test]
fn unary_ops_match_finite_differences() {
    let s = vec![vec![5, 3]];
    check_op("relu", &s, -1.0, 1.0, |g, v| g.forward_op(OpKind::Relu, v));
    check_op("exp", &s, -1.0, 1.0, |g, v| g.forward_op(OpKind::Exp, v));
    check_op("sin", &s, -3.0, 3.0, |g, v| g.forward_op(OpKind::Sin, v));
    check_op("cos", &s, -3.0, 3.0, |g, v| g.forward_op(OpKind::Cos, v));
    check_op("square", &s, -1.0, 1.0, |g, v| g.forward_op(OpKind::Square, v));
    check_op("l2norm", &s, -1.0, 1.0, |g, v| g.forward_op(OpKind::L2Norm, v));
    check_op("normalize3", &s, -1.0, 1.0, |g, v| g.forward_op(OpKind::Normalize3, v));
    check_op("max_reduce", &s, -1.0, 1.0, |g, v| g.forward_op(OpKind::MaxReduce, v));
    check_op("max_reduce_axis1", &[vec![2, 4, 3]], -1.0, 1.0, |g, v| g.max_reduce(v[0], 1));
    check_op("sum_reduce_axis1", &[vec![2, 4, 3]], -1.0, 1.0, |g, v| g.sum_reduce(v[0], 1));
    check_op("sum_all", &s, -1.0, 1.0, |g, v| g.forward_op(OpKind::SumReduce, v));
    check_op("scale", &s, -1.0, 1.0, |g, v| Ok(g.scale(v[0], -2.5)));
    check_op("gather", &s, -1.0, 1.0, |g, v| g.gather_rows(v[0], &[4, 0, 0, 2]));
    check_op("slice", &s, -1.0, 1.0, |g, v| g.slice_rows(v[0], 1, 4));
    check_op("reshape", &s, -1.0, 1.0, |g, v| g.reshape(v[0], &[3, 5]));
}

fn mlp(g: &mut Graph, v: &[Var]) -> neural_points::Result<Var> {
    let h = g.matmul(v[0], v[1])?;
    let h = g.add(h, v[2])?;
    let h = g.relu(h);
    let h = g.matmul(h, v[3])?;
    let h = g.add(h, v[4])?;
    let h = g.relu(h);
    let h = g.matmul(h, v[5])?;
    g.add(h, v[6])
}

#[test]
fn three_layer_mlp_matches_finite_differences() {
    for seed in 0..10 {
        let mut r = rng(100 + seed);
        let inputs = vec![
            random_tensor(&mut r, &[6, 8], -1.0, 1.0),
            random_tensor(&mut r, &[8, 16], -0.5, 0.5),
            random_tensor(&mut r, &[16], -0.1, 0.1),
            random_tensor(&mut r, &[16, 16], -0.5, 0.5),
            random_tensor(&mut r, &[16], -0.1, 0.1),
            random_tensor(&mut r, &[16, 3], -0.5, 0.5),
            random_tensor(&mut r, &[3], -0.1, 0.1),
        ];
        let worst = fd_check(&inputs, mlp, H, seed);
        assert!(worst < TOL, "mlp seed {seed}: {worst}");
    }
}

#[test]
fn gradients_are_linear_in_the_loss() {
    let mut r = rng(9);
    let w = random_tensor(&mut r, &[4, 3], -1.0, 1.0);
    let x = random_tensor(&mut r, &[5, 4], -1.0, 1.0);
    let build = |g: &mut Graph, which: u8| {
        let wv = g.param("w", w.clone());
        let xv = g.constant(x.clone());
        let y = g.matmul(xv, wv).unwrap();
        let a = g.relu(y);
        let a = g.sum_all(a);
        let b = g.square(y);
        let b = g.sum_all(b);
        match which {
            0 => a,
            1 => b,
            _ => g.add(a, b).unwrap(),
        }
    };
    let grad = |which| {
        let mut g = Graph::new();
        let l = build(&mut g, which);
        g.backward(l).unwrap()["w"].clone()
    };
    let (ga, gb, gs) = (grad(0), grad(1), grad(2));
    for i in 0..gs.numel() {
        let sum = ga.data()[i] + gb.data()[i];
        assert!((gs.data()[i] - sum).abs() <= 4.0 * f64::EPSILON * sum.abs().max(1.0));
    }
}

#[test]
fn forward_is_deterministic() {
    let mut r = rng(5);
    let inputs: Vec<Tensor> = (0..7)
        .map(|i| {
            let shape: &[usize] = match i {
                0 => &[6, 8],
                1 => &[8, 16],
                3 => &[16, 16],
                5 => &[16, 3],
                2 | 4 => &[16],
                _ => &[3],
            };
            random_tensor(&mut r, shape, -1.0, 1.0)
        })
        .collect();
    let run = || {
        let mut g = Graph::new();
        let v: Vec<Var> = inputs.iter().map(|t| g.constant(t.clone())).collect();
        let out = mlp(&mut g, &v).unwrap();
        g.value(out).clone()
    };
    assert_eq!(run(), run());
}

#[test]
fn rel_err_floor() {
    assert_eq!(rel_err(0.0, 0.0), 0.0);
    let mut r = rng(1);
    let x: f64 = r.gen_range(1.0..2.0);
    assert!(rel_err(x, x * (1.0 + 1e-9)) < 1e-8);
}
