use super::graph::{slot, Node, Op};
use super::{Graph, Real, Tensor, Var};
use crate::error::{ensure, Result};

impl<T: Real> Graph<T> {
    /// Max over `window × window` blocks taken every `stride` pixels. Ties go
    /// to the first element in row-major window order. Extents that do not
    /// tile exactly are rejected.
    pub fn max_pool2d(&mut self, x: Var, window: usize, stride: usize) -> Result<Var> {
        let [b, c, h, w] = self.value(x).dims4()?;
        ensure!(window >= 1 && stride >= 1, Dimension, "pool window and stride must be positive");
        ensure!(
            h >= window && w >= window && (h - window) % stride == 0 && (w - window) % stride == 0,
            Dimension,
            "{h}×{w} input does not tile with window {window} and stride {stride}"
        );
        let (oh, ow) = ((h - window) / stride + 1, (w - window) / stride + 1);
        let xv = self.value(x).data();
        let mut out = Vec::with_capacity(b * c * oh * ow);
        let mut argmax = Vec::with_capacity(b * c * oh * ow);
        for plane in 0..b * c {
            let base = plane * h * w;
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = base + oy * stride * w + ox * stride;
                    for dy in 0..window {
                        for dx in 0..window {
                            let k = base + (oy * stride + dy) * w + ox * stride + dx;
                            if xv[k] > xv[best] {
                                best = k;
                            }
                        }
                    }
                    out.push(xv[best]);
                    argmax.push(best);
                }
            }
        }
        let value = Tensor::new(vec![b, c, oh, ow], out)?;
        let rg = self.needs(&[x]);
        Ok(self.push(value, rg, Op::MaxPool { x, argmax }))
    }

    /// Nearest-neighbour upsampling: every pixel becomes a `factor × factor`
    /// block.
    pub fn upsample_nearest(&mut self, x: Var, factor: usize) -> Result<Var> {
        ensure!(factor >= 1, Dimension, "upsampling factor must be at least 1");
        let [b, c, h, w] = self.value(x).dims4()?;
        let (oh, ow) = (h * factor, w * factor);
        let xv = self.value(x).data();
        let mut out = Vec::with_capacity(b * c * oh * ow);
        for plane in 0..b * c {
            let base = plane * h * w;
            for oy in 0..oh {
                let row = &xv[base + (oy / factor) * w..base + (oy / factor + 1) * w];
                for ox in 0..ow {
                    out.push(row[ox / factor]);
                }
            }
        }
        let value = Tensor::new(vec![b, c, oh, ow], out)?;
        let rg = self.needs(&[x]);
        Ok(self.push(value, rg, Op::Upsample { x, factor }))
    }
}

pub(crate) fn upsample_backward<T: Real>(
    nodes: &[Node<T>],
    grads: &mut [Option<Vec<T>>],
    x: Var,
    factor: usize,
    out: &Tensor<T>,
    dy: &[T],
) {
    let [_, _, oh, ow] = out.dims4().expect("4-D output");
    let (h, w) = (oh / factor, ow / factor);
    if let Some(gx) = slot(nodes, grads, x) {
        for (plane, gp) in gx.chunks_mut(h * w).enumerate() {
            let base = plane * oh * ow;
            for oy in 0..oh {
                for ox in 0..ow {
                    gp[(oy / factor) * w + ox / factor] += dy[base + oy * ow + ox];
                }
            }
        }
    }
}
