#![allow(dead_code)]

pub mod oracle;

use neural_points::autodiff::{Graph, Tensor, Var};
use neural_points::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(lo..hi)).collect()).unwrap()
}

pub fn random_points(rng: &mut ChaCha8Rng, n: usize, half_width: f64) -> Vec<[f64; 3]> {
    (0..n)
        .map(|_| {
            [
                rng.gen_range(-half_width..half_width),
                rng.gen_range(-half_width..half_width),
                rng.gen_range(-half_width..half_width),
            ]
        })
        .collect()
}

pub fn random_unit(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let v = random_points(rng, 1, 1.0)[0];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 1e-3 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Compares reverse-mode gradients of `f` (reduced to a scalar by a fixed
/// random projection) against central finite differences with step `h`.
/// Returns the worst relative error over all input entries.
pub fn fd_check<F>(inputs: &[Tensor], f: F, h: f64, seed: u64) -> f64
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    let mut probe_rng = rng(seed ^ 0x5eed);
    let scalarize = |g: &mut Graph, out: Var, rng: &mut ChaCha8Rng| -> Var {
        let shape = g.shape(out).to_vec();
        let w = random_tensor(rng, &shape, -1.0, 1.0);
        let wv = g.constant(w);
        let prod = g.mul(out, wv).unwrap();
        g.sum_all(prod)
    };
    let eval = |vals: &[Tensor]| -> f64 {
        let mut g = Graph::inference();
        let vars: Vec<Var> = vals
            .iter()
            .enumerate()
            .map(|(i, t)| g.param(&format!("in{i}"), t.clone()))
            .collect();
        let out = f(&mut g, &vars).unwrap();
        let mut r = rng(seed ^ 0x5eed);
        let s = scalarize(&mut g, out, &mut r);
        g.value(s).item()
    };

    let mut g = Graph::new();
    let vars: Vec<Var> = inputs
        .iter()
        .enumerate()
        .map(|(i, t)| g.param(&format!("in{i}"), t.clone()))
        .collect();
    let out = f(&mut g, &vars).unwrap();
    let s = scalarize(&mut g, out, &mut probe_rng);
    let grads = g.backward(s).unwrap();

    let mut worst = 0.0f64;
    for (i, t) in inputs.iter().enumerate() {
        let ga = &grads[&format!("in{i}")];
        for e in 0..t.numel() {
            let mut plus = inputs.to_vec();
            plus[i].data_mut()[e] += h;
            let mut minus = inputs.to_vec();
            minus[i].data_mut()[e] -= h;
            let numeric = (eval(&plus) - eval(&minus)) / (2.0 * h);
            worst = worst.max(rel_err(ga.data()[e], numeric));
        }
    }
    worst
}
