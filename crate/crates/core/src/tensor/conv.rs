use super::graph::{slot, Node, Op};
use super::{Graph, Real, Tensor, Var};
use crate::error::{ensure, Result};

#[derive(Clone, Copy)]
struct Geometry {
    channels: usize,
    height: usize,
    width: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    padding: usize,
    out_h: usize,
    out_w: usize,
}

impl Geometry {
    fn is_pointwise(&self) -> bool {
        self.kh == 1 && self.kw == 1 && self.stride == 1 && self.padding == 0
    }

    fn patch_len(&self) -> usize {
        self.channels * self.kh * self.kw
    }

    fn out_len(&self) -> usize {
        self.out_h * self.out_w
    }
}

/// Unfolds one image (`channels × height × width`) into a
/// `(channels·kh·kw) × (out_h·out_w)` matrix of receptive fields.
fn im2col<T: Real>(x: &[T], g: &Geometry, cols: &mut [T]) {
    let l = g.out_len();
    for c in 0..g.channels {
        let plane = &x[c * g.height * g.width..(c + 1) * g.height * g.width];
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = ((c * g.kh + ki) * g.kw + kj) * l;
                for oy in 0..g.out_h {
                    let iy = (oy * g.stride + ki) as isize - g.padding as isize;
                    let dst = &mut cols[row + oy * g.out_w..row + (oy + 1) * g.out_w];
                    if iy < 0 || iy >= g.height as isize {
                        dst.fill(T::zero());
                        continue;
                    }
                    let src = &plane[iy as usize * g.width..(iy as usize + 1) * g.width];
                    for (ox, d) in dst.iter_mut().enumerate() {
                        let ix = (ox * g.stride + kj) as isize - g.padding as isize;
                        *d = if ix < 0 || ix >= g.width as isize {
                            T::zero()
                        } else {
                            src[ix as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters receptive-field gradients back onto the
/// image, accumulating overlaps.
fn col2im<T: Real>(cols: &[T], g: &Geometry, dx: &mut [T]) {
    let l = g.out_len();
    for c in 0..g.channels {
        let plane = &mut dx[c * g.height * g.width..(c + 1) * g.height * g.width];
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = ((c * g.kh + ki) * g.kw + kj) * l;
                for oy in 0..g.out_h {
                    let iy = (oy * g.stride + ki) as isize - g.padding as isize;
                    if iy < 0 || iy >= g.height as isize {
                        continue;
                    }
                    let src = &cols[row + oy * g.out_w..row + (oy + 1) * g.out_w];
                    let dst = &mut plane[iy as usize * g.width..(iy as usize + 1) * g.width];
                    for (ox, &s) in src.iter().enumerate() {
                        let ix = (ox * g.stride + kj) as isize - g.padding as isize;
                        if ix >= 0 && (ix as usize) < g.width {
                            dst[ix as usize] += s;
                        }
                    }
                }
            }
        }
    }
}

fn geometry(x: &[usize], w: &[usize], stride: usize, padding: usize) -> Result<Geometry> {
    ensure!(x.len() == 4, Dimension, "conv2d input must be 4-D, got {x:?}");
    ensure!(w.len() == 4, Dimension, "conv2d weight must be 4-D, got {w:?}");
    ensure!(stride >= 1, Dimension, "conv2d stride must be at least 1");
    ensure!(
        w[1] == x[1],
        Dimension,
        "conv2d weight expects {} input channels, input has {}",
        w[1],
        x[1]
    );
    let (h, wd, kh, kw) = (x[2], x[3], w[2], w[3]);
    ensure!(
        h + 2 * padding >= kh && wd + 2 * padding >= kw,
        Dimension,
        "kernel {kh}×{kw} larger than padded input {}×{}",
        h + 2 * padding,
        wd + 2 * padding
    );
    Ok(Geometry {
        channels: x[1],
        height: h,
        width: wd,
        kh,
        kw,
        stride,
        padding,
        out_h: (h + 2 * padding - kh) / stride + 1,
        out_w: (wd + 2 * padding - kw) / stride + 1,
    })
}

impl<T: Real> Graph<T> {
    /// 2-D cross-correlation (no kernel flip). Output extent per spatial axis
    /// is `(in + 2·padding − kernel) / stride + 1`.
    pub fn conv2d(
        &mut self,
        x: Var,
        weight: Var,
        bias: Option<Var>,
        stride: usize,
        padding: usize,
    ) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        let ws = self.shape(weight).to_vec();
        let g = geometry(&xs, &ws, stride, padding)?;
        let out_ch = ws[0];
        if let Some(b) = bias {
            ensure!(
                self.shape(b) == [out_ch],
                Dimension,
                "conv2d bias must have shape [{out_ch}], got {:?}",
                self.shape(b)
            );
        }
        let batch = xs[0];
        let (k, l) = (g.patch_len(), g.out_len());
        let xv = self.value(x).data();
        let wv = self.value(weight).data();
        let mut out = vec![T::zero(); batch * out_ch * l];
        let mut cols = if g.is_pointwise() { Vec::new() } else { vec![T::zero(); k * l] };
        let in_len = g.channels * g.height * g.width;
        for b in 0..batch {
            let xb = &xv[b * in_len..(b + 1) * in_len];
            let ob = &mut out[b * out_ch * l..(b + 1) * out_ch * l];
            let a: &[T] = if g.is_pointwise() {
                xb
            } else {
                im2col(xb, &g, &mut cols);
                &cols
            };
            T::gemm(out_ch, k, l, wv, false, a, false, ob, false);
            if let Some(bv) = bias {
                let bias_v = self.value(bv).data();
                for (o, row) in ob.chunks_mut(l).enumerate() {
                    row.iter_mut().for_each(|v| *v += bias_v[o]);
                }
            }
        }
        let value = Tensor::new(vec![batch, out_ch, g.out_h, g.out_w], out)?;
        let mut parents = vec![x, weight];
        parents.extend(bias);
        let rg = self.needs(&parents);
        Ok(self.push(
            value,
            rg,
            Op::Conv2d {
                x,
                weight,
                bias,
                stride,
                padding,
            },
        ))
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn conv2d_backward<T: Real>(
    nodes: &[Node<T>],
    grads: &mut [Option<Vec<T>>],
    x: Var,
    weight: Var,
    bias: Option<Var>,
    stride: usize,
    padding: usize,
    dy: &[T],
) {
    let xs = nodes[x.0].value.shape();
    let ws = nodes[weight.0].value.shape();
    let g = geometry(xs, ws, stride, padding).expect("shapes validated in forward");
    let (batch, out_ch) = (xs[0], ws[0]);
    let (k, l) = (g.patch_len(), g.out_len());
    let in_len = g.channels * g.height * g.width;
    let xv = nodes[x.0].value.data();
    let wv = nodes[weight.0].value.data();

    if let Some(b) = bias {
        if let Some(gb) = slot(nodes, grads, b) {
            for bi in 0..batch {
                let db = &dy[bi * out_ch * l..(bi + 1) * out_ch * l];
                for (o, row) in db.chunks(l).enumerate() {
                    gb[o] += row.iter().copied().sum::<T>();
                }
            }
        }
    }

    let mut cols = vec![T::zero(); k * l];
    if nodes[weight.0].requires_grad {
        let mut gw = grads[weight.0].take().unwrap_or_else(|| vec![T::zero(); out_ch * k]);
        for bi in 0..batch {
            let xb = &xv[bi * in_len..(bi + 1) * in_len];
            let a: &[T] = if g.is_pointwise() {
                xb
            } else {
                im2col(xb, &g, &mut cols);
                &cols
            };
            let db = &dy[bi * out_ch * l..(bi + 1) * out_ch * l];
            T::gemm(out_ch, l, k, db, false, a, true, &mut gw, true);
        }
        grads[weight.0] = Some(gw);
    }

    if let Some(gx) = slot(nodes, grads, x) {
        for bi in 0..batch {
            let db = &dy[bi * out_ch * l..(bi + 1) * out_ch * l];
            let dxb = &mut gx[bi * in_len..(bi + 1) * in_len];
            if g.is_pointwise() {
                T::gemm(k, out_ch, l, wv, true, db, false, dxb, true);
            } else {
                T::gemm(k, out_ch, l, wv, true, db, false, &mut cols, false);
                col2im(&cols, &g, dxb);
            }
        }
    }
}
