//! Central-difference gradient checks for code built on [`Graph`].
//!
//! The function under test maps leaves to any tensor `y`. The check reduces
//! it to the scalar `Σ c ⊙ y` with fixed random weights `c`, so every output
//! element contributes with a different sign and scale.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Graph, Tensor, Var};

/// Standard normal entries from a fixed seed.
pub fn random_tensor(shape: Vec<usize>, seed: u64) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::randn(shape, 1.0, &mut rng)
}

/// Worst relative disagreement between analytic and central-difference
/// gradients over every element of every input. Each element's error is
/// `|a − n| / max(|a|, |n|, 1e-3·max|n|)`.
pub fn check_gradients<F>(inputs: &[Tensor<f64>], h: f64, build: F) -> f64
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Var,
{
    let all: Vec<(usize, usize)> = inputs
        .iter()
        .enumerate()
        .flat_map(|(i, t)| (0..t.numel()).map(move |k| (i, k)))
        .collect();
    compare(inputs, h, &all, &build)
}

/// Like [`check_gradients`] but probes only `count` elements chosen with
/// `seed`, for models too large to perturb exhaustively.
pub fn check_gradients_sampled<F>(inputs: &[Tensor<f64>], h: f64, count: usize, seed: u64, build: F) -> f64
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Var,
{
    let all: Vec<(usize, usize)> = inputs
        .iter()
        .enumerate()
        .flat_map(|(i, t)| (0..t.numel()).map(move |k| (i, k)))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked: Vec<(usize, usize)> = sample(&mut rng, all.len(), count.min(all.len()))
        .into_iter()
        .map(|j| all[j])
        .collect();
    compare(inputs, h, &picked, &build)
}

fn weighted_loss<F>(values: &[Tensor<f64>], grad: bool, build: &F) -> (Graph<f64>, Vec<Var>, Var)
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Var,
{
    let mut g = Graph::new();
    let vars: Vec<Var> = values.iter().map(|t| g.leaf(t.clone(), grad)).collect();
    let y = build(&mut g, &vars);
    let c = random_tensor(g.shape(y).to_vec(), 0xC0FFEE);
    let c = g.leaf(c, false);
    let p = g.mul(y, c).expect("same shape");
    let s = g.sum(p);
    (g, vars, s)
}

fn compare<F>(inputs: &[Tensor<f64>], h: f64, probes: &[(usize, usize)], build: &F) -> f64
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Var,
{
    let (mut g, vars, loss) = weighted_loss(inputs, true, build);
    g.backward(loss).expect("fresh graph");
    let analytic: Vec<f64> = probes
        .iter()
        .map(|&(i, k)| g.grad(vars[i]).map_or(0.0, |gr| gr[k]))
        .collect();

    let mut work = inputs.to_vec();
    let numeric: Vec<f64> = probes
        .iter()
        .map(|&(i, k)| {
            let orig = work[i].data()[k];
            work[i].data_mut()[k] = orig + h;
            let (g, _, s) = weighted_loss(&work, false, build);
            let plus = g.value(s).data()[0];
            work[i].data_mut()[k] = orig - h;
            let (g, _, s) = weighted_loss(&work, false, build);
            let minus = g.value(s).data()[0];
            work[i].data_mut()[k] = orig;
            (plus - minus) / (2.0 * h)
        })
        .collect();

    let scale = numeric.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = (1e-3 * scale).max(1e-12);
    analytic
        .iter()
        .zip(&numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}
