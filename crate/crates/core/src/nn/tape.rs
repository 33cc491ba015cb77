//! Reverse-mode differentiation over a linear record of batched operations.

use std::borrow::Cow;

use rand::Rng;

use super::kernels::{self, ConvGeom};
use super::layers::{DropoutLayer, Mode};
use super::params::{Gradients, ParamId, ParamStore};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Handle to a value recorded on a [`GradientTape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Input,
    Param(ParamId),
    Dense { x: Var, w: Var, b: Option<Var> },
    Conv1d { x: Var, k: Var, b: Var, geom: ConvGeom },
    GlobalAvgPool { x: Var },
    Relu { x: Var },
    Dropout { x: Var, mask: Vec<f64> },
    Narrow { x: Var, start: usize },
    Reshape { x: Var },
    Add { a: Var, b: Var },
    Mse { pred: Var, target: Vec<f64> },
}

struct Node<'p> {
    value: Cow<'p, Tensor>,
    op: Op,
    needs_grad: bool,
}

/// Records a forward computation so that [`GradientTape::backward`] can
/// produce the gradient of a scalar with respect to every parameter.
///
/// Parameters are borrowed from a [`ParamStore`]; the store cannot be
/// updated until the tape is dropped.
pub struct GradientTape<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node<'p>>,
}

fn dims2(t: &Tensor, what: &str) -> Result<(usize, usize)> {
    match *t.shape() {
        [a, b] => Ok((a, b)),
        ref s => Err(Error::ShapeMismatch(format!("{what} must be rank 2, got {s:?}"))),
    }
}

fn dims3(t: &Tensor, what: &str) -> Result<(usize, usize, usize)> {
    match *t.shape() {
        [a, b, c] => Ok((a, b, c)),
        ref s => Err(Error::ShapeMismatch(format!("{what} must be rank 3, got {s:?}"))),
    }
}

impl<'p> GradientTape<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Self {
            params,
            nodes: Vec::new(),
        }
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value: Cow::Owned(value),
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Which ReLU inputs on the tape are strictly positive, in recording order.
    pub fn relu_pattern(&self) -> Vec<bool> {
        let mut out = Vec::new();
        for node in &self.nodes {
            if let Op::Relu { x } = node.op {
                out.extend(self.value(x).data().iter().map(|&v| v > 0.0));
            }
        }
        out
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Constant input; no gradient flows into it.
    pub fn input(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Input, false)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        self.nodes.push(Node {
            value: Cow::Borrowed(self.params.get(id)),
            op: Op::Param(id),
            needs_grad: true,
        });
        Var(self.nodes.len() - 1)
    }

    /// `[B, in] × [out, in]ᵀ + [out] → [B, out]`.
    pub fn dense(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let (batch, inp) = dims2(self.value(x), "dense input")?;
        let (out, w_in) = dims2(self.value(w), "dense weights")?;
        if w_in != inp {
            return Err(Error::ShapeMismatch(format!(
                "dense layer expects {w_in} inputs, got {inp}"
            )));
        }
        if let Some(b) = b {
            if self.value(b).shape() != [out] {
                return Err(Error::ShapeMismatch(format!(
                    "dense bias must be [{out}], got {:?}",
                    self.value(b).shape()
                )));
            }
        }
        let mut y = vec![0.0; batch * out];
        kernels::dense_forward(
            self.value(x).data(),
            batch,
            inp,
            self.value(w).data(),
            out,
            b.map(|b| self.value(b).data()),
            &mut y,
        );
        let needs = self.needs(x) || self.needs(w) || b.is_some_and(|b| self.needs(b));
        Ok(self.push(Tensor::new(vec![batch, out], y)?, Op::Dense { x, w, b }, needs))
    }

    /// Valid stride-1 cross-correlation: `[B, C, L] ⋆ [F, C, K] + [F] → [B, F, L-K+1]`.
    pub fn conv1d(&mut self, x: Var, k: Var, b: Var) -> Result<Var> {
        let (batch, channels, len) = dims3(self.value(x), "conv input")?;
        let (filters, k_ch, kernel) = dims3(self.value(k), "conv kernels")?;
        if k_ch != channels {
            return Err(Error::ShapeMismatch(format!(
                "conv kernels expect {k_ch} channels, input has {channels}"
            )));
        }
        if len < kernel {
            return Err(Error::ShapeMismatch(format!(
                "input length {len} shorter than kernel length {kernel}"
            )));
        }
        if self.value(b).shape() != [filters] {
            return Err(Error::ShapeMismatch(format!("conv bias must be [{filters}]")));
        }
        let geom = ConvGeom {
            channels,
            len,
            filters,
            kernel,
        };
        let mut y = vec![0.0; batch * filters * geom.out_len()];
        kernels::conv_forward(
            geom,
            batch,
            self.value(x).data(),
            self.value(k).data(),
            self.value(b).data(),
            &mut y,
        );
        let needs = self.needs(x) || self.needs(k) || self.needs(b);
        let value = Tensor::new(vec![batch, filters, geom.out_len()], y)?;
        Ok(self.push(value, Op::Conv1d { x, k, b, geom }, needs))
    }

    /// `[B, F, P] → [B, F]`, mean over positions.
    pub fn global_avg_pool(&mut self, x: Var) -> Result<Var> {
        let (batch, filters, positions) = dims3(self.value(x), "pooling input")?;
        let mut y = vec![0.0; batch * filters];
        kernels::row_means(self.value(x).data(), positions, &mut y);
        let needs = self.needs(x);
        Ok(self.push(Tensor::new(vec![batch, filters], y)?, Op::GlobalAvgPool { x }, needs))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let src = self.value(x);
        let data = src.data().iter().map(|&v| v.max(0.0)).collect();
        let value = Tensor::new(src.shape().to_vec(), data).expect("same shape");
        let needs = self.needs(x);
        self.push(value, Op::Relu { x }, needs)
    }

    /// Inverted dropout. In [`Mode::Eval`] (or at rate 0) this records nothing
    /// and returns `x` itself.
    pub fn dropout(&mut self, x: Var, layer: &DropoutLayer, rng: &mut impl Rng) -> Var {
        if layer.mode() == Mode::Eval || layer.rate() == 0.0 {
            return x;
        }
        let mask = layer.sample_mask(self.value(x).len(), rng);
        let src = self.value(x);
        let data = src.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
        let value = Tensor::new(src.shape().to_vec(), data).expect("same shape");
        let needs = self.needs(x);
        self.push(value, Op::Dropout { x, mask }, needs)
    }

    /// Columns `start..start+len` of a `[B, n]` value.
    pub fn narrow(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let (batch, n) = dims2(self.value(x), "narrow input")?;
        if len == 0 || start + len > n {
            return Err(Error::ShapeMismatch(format!(
                "cannot take columns {start}..{} of {n}",
                start + len
            )));
        }
        let data = self
            .value(x)
            .data()
            .chunks_exact(n)
            .flat_map(|row| row[start..start + len].iter().copied())
            .collect();
        let needs = self.needs(x);
        Ok(self.push(Tensor::new(vec![batch, len], data)?, Op::Narrow { x, start }, needs))
    }

    pub fn reshape(&mut self, x: Var, shape: Vec<usize>) -> Result<Var> {
        let value = self.value(x).clone().reshape(shape)?;
        let needs = self.needs(x);
        Ok(self.push(value, Op::Reshape { x }, needs))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(Error::ShapeMismatch(format!(
                "cannot add {:?} and {:?}",
                va.shape(),
                vb.shape()
            )));
        }
        let data = va.data().iter().zip(vb.data()).map(|(x, y)| x + y).collect();
        let value = Tensor::new(va.shape().to_vec(), data)?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::Add { a, b }, needs))
    }

    /// Mean squared error between every element of `pred` and `target`, as a `[1]` value.
    pub fn mse(&mut self, pred: Var, target: &Tensor) -> Result<Var> {
        let p = self.value(pred);
        if p.len() != target.len() {
            return Err(Error::ShapeMismatch(format!(
                "prediction has {} elements, target {}",
                p.len(),
                target.len()
            )));
        }
        let loss = super::mse(p.data(), target.data());
        let needs = self.needs(pred);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::Mse {
                pred,
                target: target.data().to_vec(),
            },
            needs,
        ))
    }

    /// Gradient of the scalar `loss` with respect to every parameter of the store.
    /// Parameters that do not influence `loss` get zero gradients.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.value(loss).len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);
        let mut out = Gradients::zeros_for(self.params);

        for i in (0..=loss.0).rev() {
            let Some(dy) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            match &node.op {
                Op::Input => {}
                Op::Param(id) => {
                    let g = &mut out.as_mut_slice()[id.index()];
                    for (a, d) in g.data_mut().iter_mut().zip(&dy) {
                        *a += d;
                    }
                }
                &Op::Dense { x, w, b } => {
                    let (batch, inp) = dims2(self.value(x), "")?;
                    let out_dim = self.value(w).shape()[0];
                    let mut dx = self.needs(x).then(|| vec![0.0; batch * inp]);
                    let mut dw = self.needs(w).then(|| vec![0.0; out_dim * inp]);
                    let mut db = b.filter(|&b| self.needs(b)).map(|_| vec![0.0; out_dim]);
                    kernels::dense_backward(
                        &dy,
                        self.value(x).data(),
                        self.value(w).data(),
                        batch,
                        inp,
                        out_dim,
                        dx.as_deref_mut(),
                        dw.as_deref_mut(),
                        db.as_deref_mut(),
                    );
                    accumulate(&mut grads, x, dx);
                    accumulate(&mut grads, w, dw);
                    if let Some(b) = b {
                        accumulate(&mut grads, b, db);
                    }
                }
                &Op::Conv1d { x, k, b, geom } => {
                    let batch = self.value(x).shape()[0];
                    let mut dx = self.needs(x).then(|| vec![0.0; self.value(x).len()]);
                    let mut dk = self.needs(k).then(|| vec![0.0; self.value(k).len()]);
                    let mut db = self.needs(b).then(|| vec![0.0; geom.filters]);
                    kernels::conv_backward(
                        geom,
                        batch,
                        &dy,
                        self.value(x).data(),
                        self.value(k).data(),
                        dx.as_deref_mut(),
                        dk.as_deref_mut(),
                        db.as_deref_mut(),
                    );
                    accumulate(&mut grads, x, dx);
                    accumulate(&mut grads, k, dk);
                    accumulate(&mut grads, b, db);
                }
                &Op::GlobalAvgPool { x } => {
                    let positions = self.value(x).shape()[2];
                    let scale = 1.0 / positions as f64;
                    let dx = dy
                        .iter()
                        .flat_map(|&d| std::iter::repeat_n(d * scale, positions))
                        .collect();
                    accumulate(&mut grads, x, Some(dx));
                }
                &Op::Relu { x } => {
                    // Subgradient 0 at exactly 0.
                    let dx = dy
                        .iter()
                        .zip(self.value(x).data())
                        .map(|(d, &v)| if v > 0.0 { *d } else { 0.0 })
                        .collect();
                    accumulate(&mut grads, x, Some(dx));
                }
                Op::Dropout { x, mask } => {
                    let dx = dy.iter().zip(mask).map(|(d, m)| d * m).collect();
                    accumulate(&mut grads, *x, Some(dx));
                }
                &Op::Narrow { x, start } => {
                    let (batch, n) = dims2(self.value(x), "")?;
                    let len = node.value.shape()[1];
                    let mut dx = vec![0.0; batch * n];
                    for (row, d) in dx.chunks_exact_mut(n).zip(dy.chunks_exact(len)) {
                        row[start..start + len].copy_from_slice(d);
                    }
                    accumulate(&mut grads, x, Some(dx));
                }
                &Op::Reshape { x } => accumulate(&mut grads, x, Some(dy)),
                &Op::Add { a, b } => {
                    accumulate(&mut grads, a, Some(dy.clone()));
                    accumulate(&mut grads, b, Some(dy));
                }
                Op::Mse { pred, target } => {
                    let p = self.value(*pred).data();
                    let n = p.len() as f64;
                    let dx = p.iter().zip(target).map(|(p, t)| dy[0] * 2.0 * (p - t) / n).collect();
                    accumulate(&mut grads, *pred, Some(dx));
                }
            }
        }
        Ok(out)
    }
}

fn accumulate(grads: &mut [Option<Vec<f64>>], v: Var, delta: Option<Vec<f64>>) {
    let Some(delta) = delta else { return };
    match &mut grads[v.0] {
        Some(acc) => {
            for (a, d) in acc.iter_mut().zip(&delta) {
                *a += d;
            }
        }
        slot @ None => *slot = Some(delta),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_function_gradient() {
        let mut store = ParamStore::new();
        let w = store.push("w", Tensor::new(vec![1, 1], vec![0.5]).unwrap());
        let mut tape = GradientTape::new(&store);
        let x = tape.input(Tensor::new(vec![1, 1], vec![3.0]).unwrap());
        let wv = tape.param(w);
        let y = tape.dense(x, wv, None).unwrap();
        let y = tape.reshape(y, vec![1]).unwrap();
        let g = tape.backward(y).unwrap();
        assert_eq!(g.get(w).data(), &[3.0]);
    }

    #[test]
    fn backward_requires_scalar() {
        let mut store = ParamStore::new();
        let w = store.push("w", Tensor::from_vec(vec![1.0, 2.0]));
        let mut tape = GradientTape::new(&store);
        let v = tape.param(w);
        assert!(matches!(tape.backward(v), Err(Error::Contract(_))));
    }

    #[test]
    fn relu_at_zero_has_zero_subgradient() {
        let mut store = ParamStore::new();
        let b = store.push("b", Tensor::from_vec(vec![0.0]));
        let w = store.push("w", Tensor::new(vec![1, 1], vec![1.0]).unwrap());
        let mut tape = GradientTape::new(&store);
        let x = tape.input(Tensor::new(vec![1, 1], vec![0.0]).unwrap());
        let (wv, bv) = (tape.param(w), tape.param(b));
        let pre = tape.dense(x, wv, Some(bv)).unwrap();
        assert_eq!(tape.value(pre).data(), &[0.0]);
        let act = tape.relu(pre);
        let loss = tape.reshape(act, vec![1]).unwrap();
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.get(b).data(), &[0.0]);
    }

    #[test]
    fn reused_parameter_accumulates() {
        // f(w) = w·x + w·x, x = 2 → df/dw = 4
        let mut store = ParamStore::new();
        let w = store.push("w", Tensor::new(vec![1, 1], vec![1.5]).unwrap());
        let mut tape = GradientTape::new(&store);
        let x = tape.input(Tensor::new(vec![1, 1], vec![2.0]).unwrap());
        let w1 = tape.param(w);
        let w2 = tape.param(w);
        let a = tape.dense(x, w1, None).unwrap();
        let b = tape.dense(x, w2, None).unwrap();
        let s = tape.add(a, b).unwrap();
        let g = tape.backward(s).unwrap();
        assert_eq!(g.get(w).data(), &[4.0]);
    }

    #[test]
    fn mse_gradient_is_two_residual_over_n() {
        let mut store = ParamStore::new();
        let p = store.push("p", Tensor::from_vec(vec![3.0, 4.0]));
        let mut tape = GradientTape::new(&store);
        let pv = tape.param(p);
        let loss = tape.mse(pv, &Tensor::from_vec(vec![0.0, 0.0])).unwrap();
        assert_eq!(tape.value(loss).item(), Some(12.5));
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.get(p).data(), &[3.0, 4.0]);
    }
}
