use super::graph::{slot, Node, Op};
use super::{Graph, Real, Tensor, Var};
use crate::error::{ensure, Result};

impl<T: Real> Graph<T> {
    pub fn relu(&mut self, x: Var) -> Var {
        let data = self.value(x).data().iter().map(|&v| v.max(T::zero())).collect();
        let value = Tensor::new(self.shape(x).to_vec(), data).expect("same shape");
        let rg = self.needs(&[x]);
        self.push(value, rg, Op::Relu(x))
    }

    /// Logistic function, evaluated without overflow for large `|x|`.
    pub fn sigmoid(&mut self, x: Var) -> Var {
        let data = self
            .value(x)
            .data()
            .iter()
            .map(|&v| {
                if v >= T::zero() {
                    T::one() / (T::one() + (-v).exp())
                } else {
                    let e = v.exp();
                    e / (T::one() + e)
                }
            })
            .collect();
        let value = Tensor::new(self.shape(x).to_vec(), data).expect("same shape");
        let rg = self.needs(&[x]);
        self.push(value, rg, Op::Sigmoid(x))
    }

    fn same_shape(&self, a: Var, b: Var, what: &str) -> Result<()> {
        ensure!(
            self.shape(a) == self.shape(b),
            Dimension,
            "{what}: shapes {:?} and {:?} differ",
            self.shape(a),
            self.shape(b)
        );
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "add")?;
        let data = self.zip(a, b, |x, y| x + y);
        let value = Tensor::new(self.shape(a).to_vec(), data)?;
        let rg = self.needs(&[a, b]);
        Ok(self.push(value, rg, Op::Add(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "mul")?;
        let data = self.zip(a, b, |x, y| x * y);
        let value = Tensor::new(self.shape(a).to_vec(), data)?;
        let rg = self.needs(&[a, b]);
        Ok(self.push(value, rg, Op::Mul(a, b)))
    }

    fn zip(&self, a: Var, b: Var, f: impl Fn(T, T) -> T) -> Vec<T> {
        self.value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| f(x, y))
            .collect()
    }

    /// Stacks `a` and `b` along the channel axis.
    pub fn concat_channels(&mut self, a: Var, b: Var) -> Result<Var> {
        let [ba, ca, ha, wa] = self.value(a).dims4()?;
        let [bb, cb, hb, wb] = self.value(b).dims4()?;
        ensure!(
            (ba, ha, wa) == (bb, hb, wb),
            Dimension,
            "cannot concatenate {:?} with {:?}",
            self.shape(a),
            self.shape(b)
        );
        let hw = ha * wa;
        let (av, bv) = (self.value(a).data(), self.value(b).data());
        let mut data = Vec::with_capacity(ba * (ca + cb) * hw);
        for i in 0..ba {
            data.extend_from_slice(&av[i * ca * hw..(i + 1) * ca * hw]);
            data.extend_from_slice(&bv[i * cb * hw..(i + 1) * cb * hw]);
        }
        let value = Tensor::new(vec![ba, ca + cb, ha, wa], data)?;
        let rg = self.needs(&[a, b]);
        Ok(self.push(value, rg, Op::Concat(a, b)))
    }

    /// Multiplies every channel of `x` by a single-channel map of the same
    /// batch and spatial extent.
    pub fn scale_by_map(&mut self, x: Var, map: Var) -> Result<Var> {
        let [b, c, h, w] = self.value(x).dims4()?;
        let ms = self.value(map).dims4()?;
        ensure!(
            ms == [b, 1, h, w],
            Dimension,
            "scale map must have shape {:?}, got {:?}",
            [b, 1, h, w],
            ms
        );
        let hw = h * w;
        let (xv, mv) = (self.value(x).data(), self.value(map).data());
        let data = (0..b * c * hw)
            .map(|k| {
                let (bi, p) = (k / (c * hw), k % hw);
                xv[k] * mv[bi * hw + p]
            })
            .collect();
        let value = Tensor::new(vec![b, c, h, w], data)?;
        let rg = self.needs(&[x, map]);
        Ok(self.push(value, rg, Op::ScaleByMap { x, map }))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().copied().sum::<T>();
        let rg = self.needs(&[x]);
        self.push(Tensor::full(vec![1], s), rg, Op::Sum(x))
    }

    /// Mean squared error over all elements.
    pub fn mse_loss(&mut self, pred: Var, target: Var) -> Result<Var> {
        self.same_shape(pred, target, "mse_loss")?;
        let n = self.value(pred).numel();
        ensure!(n > 0, Dimension, "mse_loss of an empty tensor");
        let s: f64 = self
            .value(pred)
            .data()
            .iter()
            .zip(self.value(target).data())
            .map(|(&p, &t)| (p - t).as_f64().powi(2))
            .sum();
        let rg = self.needs(&[pred, target]);
        Ok(self.push(
            Tensor::full(vec![1], T::of(s / n as f64)),
            rg,
            Op::Mse { pred, target },
        ))
    }
}

pub(crate) fn concat_backward<T: Real>(
    nodes: &[Node<T>],
    grads: &mut [Option<Vec<T>>],
    a: Var,
    b: Var,
    dy: &[T],
) {
    let [batch, ca, h, w] = nodes[a.0].value.dims4().expect("4-D");
    let cb = nodes[b.0].value.shape()[1];
    let hw = h * w;
    let stride = (ca + cb) * hw;
    if let Some(g) = slot(nodes, grads, a) {
        for i in 0..batch {
            let src = &dy[i * stride..i * stride + ca * hw];
            g[i * ca * hw..(i + 1) * ca * hw]
                .iter_mut()
                .zip(src)
                .for_each(|(g, d)| *g += *d);
        }
    }
    if let Some(g) = slot(nodes, grads, b) {
        for i in 0..batch {
            let src = &dy[i * stride + ca * hw..(i + 1) * stride];
            g[i * cb * hw..(i + 1) * cb * hw]
                .iter_mut()
                .zip(src)
                .for_each(|(g, d)| *g += *d);
        }
    }
}

pub(crate) fn scale_by_map_backward<T: Real>(
    nodes: &[Node<T>],
    grads: &mut [Option<Vec<T>>],
    x: Var,
    map: Var,
    dy: &[T],
) {
    let [b, c, h, w] = nodes[x.0].value.dims4().expect("4-D");
    let hw = h * w;
    let xv = nodes[x.0].value.data();
    let mv = nodes[map.0].value.data();
    if let Some(g) = slot(nodes, grads, x) {
        for (k, gk) in g.iter_mut().enumerate() {
            *gk += dy[k] * mv[(k / (c * hw)) * hw + k % hw];
        }
    }
    if let Some(g) = slot(nodes, grads, map) {
        for k in 0..b * c * hw {
            g[(k / (c * hw)) * hw + k % hw] += dy[k] * xv[k];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::gradcheck::{check_gradients, random_tensor};

    #[test]
    fn sigmoid_is_stable_at_extremes() {
        let mut g = Graph::<f64>::new();
        let x = g.leaf(Tensor::new(vec![3], vec![-1000.0, 0.0, 1000.0]).unwrap(), false);
        let y = g.sigmoid(x);
        assert_eq!(g.value(y).data(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn concat_layout() {
        let mut g = Graph::<f64>::new();
        let a = g.leaf(Tensor::new(vec![2, 1, 1, 1], vec![1.0, 2.0]).unwrap(), false);
        let b = g.leaf(Tensor::new(vec![2, 2, 1, 1], vec![3.0, 4.0, 5.0, 6.0]).unwrap(), false);
        let y = g.concat_channels(a, b).unwrap();
        assert_eq!(g.shape(y), &[2, 3, 1, 1]);
        assert_eq!(g.value(y).data(), &[1.0, 3.0, 4.0, 2.0, 5.0, 6.0]);
        let c = g.leaf(Tensor::zeros(vec![2, 1, 2, 1]), false);
        assert!(g.concat_channels(a, c).is_err());
    }

    #[test]
    fn mse_value() {
        let mut g = Graph::<f64>::new();
        let p = g.leaf(Tensor::new(vec![2], vec![1.0, 3.0]).unwrap(), false);
        let t = g.leaf(Tensor::new(vec![2], vec![0.0, 1.0]).unwrap(), false);
        let l = g.mse_loss(p, t).unwrap();
        assert_eq!(g.value(l).data(), &[2.5]);
    }

    #[test]
    fn scale_map_shape_is_checked() {
        let mut g = Graph::<f64>::new();
        let x = g.leaf(Tensor::zeros(vec![1, 3, 2, 2]), false);
        let m = g.leaf(Tensor::zeros(vec![1, 2, 2, 2]), false);
        assert!(g.scale_by_map(x, m).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..3 {
            let x = random_tensor(vec![2, 3, 3, 4], seed);
            let y = random_tensor(vec![2, 3, 3, 4], seed + 1);
            let z = random_tensor(vec![2, 2, 3, 4], seed + 2);
            let m = random_tensor(vec![2, 1, 3, 4], seed + 3);
            let pair = vec![x.clone(), y.clone()];
            let cases: Vec<(&str, f64)> = vec![
                ("relu", check_gradients(&[x.clone()], 1e-6, |g, v| g.relu(v[0]))),
                ("sigmoid", check_gradients(&[x.clone()], 1e-6, |g, v| g.sigmoid(v[0]))),
                ("add", check_gradients(&pair, 1e-6, |g, v| g.add(v[0], v[1]).unwrap())),
                ("mul", check_gradients(&pair, 1e-6, |g, v| g.mul(v[0], v[1]).unwrap())),
                ("mse", check_gradients(&pair, 1e-6, |g, v| g.mse_loss(v[0], v[1]).unwrap())),
                (
                    "concat",
                    check_gradients(&[x.clone(), z], 1e-6, |g, v| g.concat_channels(v[0], v[1]).unwrap()),
                ),
                (
                    "scale",
                    check_gradients(&[x.clone(), m], 1e-6, |g, v| g.scale_by_map(v[0], v[1]).unwrap()),
                ),
            ];
            for (name, err) in cases {
                assert!(err < 1e-5, "{name}: {err}");
            }
        }
    }
}
