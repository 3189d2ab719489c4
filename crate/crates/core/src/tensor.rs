//! Dense rank-4 tensors in (batch, channel, height, width) order and the
//! pointwise operations the networks need.

use serde::{Deserialize, Serialize};

use crate::error::{mismatch, Error, Result};

/// Shape of a [`Tensor4`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape4 {
    pub batch: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Shape4 {
    pub fn new(batch: usize, channels: usize, height: usize, width: usize) -> Self {
        Self {
            batch,
            channels,
            height,
            width,
        }
    }

    pub fn len(&self) -> usize {
        self.batch * self.channels * self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Pixels in one channel plane.
    pub fn plane(&self) -> usize {
        self.height * self.width
    }

    /// Elements in one batch item.
    pub fn item(&self) -> usize {
        self.channels * self.plane()
    }

    fn validate(&self) -> Result<()> {
        if self.batch == 0 || self.channels == 0 || self.height == 0 || self.width == 0 {
            return Err(Error::InvalidArgument(format!(
                "tensor dimensions must all be >= 1, got {self}"
            )));
        }
        Ok(())
    }
}

impl std::fmt::Display for Shape4 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}x{}x{}x{}",
            self.batch, self.channels, self.height, self.width
        )
    }
}

/// Row-major `f64` tensor of rank 4.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor4 {
    shape: Shape4,
    data: Vec<f64>,
}

impl Tensor4 {
    pub fn zeros(shape: Shape4) -> Self {
        Self::filled(shape, 0.0)
    }

    pub fn filled(shape: Shape4, value: f64) -> Self {
        assert!(
            shape.batch > 0 && shape.channels > 0 && shape.height > 0 && shape.width > 0,
            "tensor dimensions must all be >= 1, got {shape}"
        );
        Self {
            shape,
            data: vec![value; shape.len()],
        }
    }

    pub fn from_vec(shape: Shape4, data: Vec<f64>) -> Result<Self> {
        shape.validate()?;
        if data.len() != shape.len() {
            return Err(mismatch("Tensor4::from_vec", shape.len(), data.len()));
        }
        Ok(Self { shape, data })
    }

    /// Builds a tensor by evaluating `f(b, c, y, x)` at every index.
    pub fn from_fn(shape: Shape4, mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> Self {
        let mut t = Self::zeros(shape);
        let mut i = 0;
        for b in 0..shape.batch {
            for c in 0..shape.channels {
                for y in 0..shape.height {
                    for x in 0..shape.width {
                        t.data[i] = f(b, c, y, x);
                        i += 1;
                    }
                }
            }
        }
        t
    }

    pub fn shape(&self) -> Shape4 {
        self.shape
    }

    pub fn batch(&self) -> usize {
        self.shape.batch
    }

    pub fn channels(&self) -> usize {
        self.shape.channels
    }

    pub fn height(&self) -> usize {
        self.shape.height
    }

    pub fn width(&self) -> usize {
        self.shape.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn index(&self, b: usize, c: usize, y: usize, x: usize) -> usize {
        debug_assert!(b < self.shape.batch && c < self.shape.channels);
        debug_assert!(y < self.shape.height && x < self.shape.width);
        ((b * self.shape.channels + c) * self.shape.height + y) * self.shape.width + x
    }

    #[inline]
    pub fn get(&self, b: usize, c: usize, y: usize, x: usize) -> f64 {
        self.data[self.index(b, c, y, x)]
    }

    #[inline]
    pub fn set(&mut self, b: usize, c: usize, y: usize, x: usize, v: f64) {
        let i = self.index(b, c, y, x);
        self.data[i] = v;
    }

    /// Contiguous slice of batch item `b`.
    pub fn item(&self, b: usize) -> &[f64] {
        let n = self.shape.item();
        &self.data[b * n..(b + 1) * n]
    }

    pub fn item_mut(&mut self, b: usize) -> &mut [f64] {
        let n = self.shape.item();
        &mut self.data[b * n..(b + 1) * n]
    }

    /// Copies batch item `b` out as a single-item tensor.
    pub fn select(&self, b: usize) -> Tensor4 {
        let shape = Shape4 {
            batch: 1,
            ..self.shape
        };
        Tensor4 {
            shape,
            data: self.item(b).to_vec(),
        }
    }

    /// Stacks equally shaped tensors along the batch axis.
    pub fn stack(items: &[Tensor4]) -> Result<Tensor4> {
        let first = items
            .first()
            .ok_or_else(|| Error::InvalidArgument("stack of zero tensors".into()))?;
        let s = first.shape;
        let mut data = Vec::with_capacity(s.len() * items.len());
        let mut batch = 0;
        for t in items {
            if t.shape.channels != s.channels || t.shape.height != s.height || t.shape.width != s.width
            {
                return Err(mismatch("stack", s, t.shape));
            }
            data.extend_from_slice(&t.data);
            batch += t.shape.batch;
        }
        Tensor4::from_vec(Shape4 { batch, ..s }, data)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor4 {
        Tensor4 {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn max_abs_diff(&self, other: &Tensor4) -> Result<f64> {
        self.check_same(other, "max_abs_diff")?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    pub fn clamp(&self, lo: f64, hi: f64) -> Tensor4 {
        self.map(|v| v.clamp(lo, hi))
    }

    pub(crate) fn check_same(&self, other: &Tensor4, op: &'static str) -> Result<()> {
        if self.shape != other.shape {
            return Err(mismatch(op, self.shape, other.shape));
        }
        Ok(())
    }
}

pub fn relu(x: &Tensor4) -> Tensor4 {
    x.map(|v| if v > 0.0 { v } else { 0.0 })
}

/// Gradient of ReLU given the forward *output* (or input; the sign test is the same).
pub fn relu_backward(grad_out: &Tensor4, activated: &Tensor4) -> Result<Tensor4> {
    grad_out.check_same(activated, "relu_backward")?;
    let data = grad_out
        .data
        .iter()
        .zip(&activated.data)
        .map(|(&g, &a)| if a > 0.0 { g } else { 0.0 })
        .collect();
    Ok(Tensor4 {
        shape: grad_out.shape,
        data,
    })
}

pub fn add(a: &Tensor4, b: &Tensor4) -> Result<Tensor4> {
    a.check_same(b, "add")?;
    let data = a.data.iter().zip(&b.data).map(|(x, y)| x + y).collect();
    Ok(Tensor4 {
        shape: a.shape,
        data,
    })
}

pub fn add_assign(acc: &mut Tensor4, b: &Tensor4) -> Result<()> {
    acc.check_same(b, "add_assign")?;
    for (x, y) in acc.data.iter_mut().zip(&b.data) {
        *x += y;
    }
    Ok(())
}

pub fn sub(a: &Tensor4, b: &Tensor4) -> Result<Tensor4> {
    a.check_same(b, "sub")?;
    let data = a.data.iter().zip(&b.data).map(|(x, y)| x - y).collect();
    Ok(Tensor4 {
        shape: a.shape,
        data,
    })
}

/// Concatenates along the channel axis; batch, height and width must agree.
pub fn concat_channels(parts: &[&Tensor4]) -> Result<Tensor4> {
    let first = parts
        .first()
        .ok_or_else(|| Error::InvalidArgument("concat of zero tensors".into()))?;
    let s = first.shape;
    let mut channels = 0;
    for p in parts {
        if p.shape.batch != s.batch || p.shape.height != s.height || p.shape.width != s.width {
            return Err(mismatch("concat_channels", s, p.shape));
        }
        channels += p.shape.channels;
    }
    let out_shape = Shape4 { channels, ..s };
    let mut data = Vec::with_capacity(out_shape.len());
    for b in 0..s.batch {
        for p in parts {
            data.extend_from_slice(p.item(b));
        }
    }
    Ok(Tensor4 {
        shape: out_shape,
        data,
    })
}

/// Inverse of [`concat_channels`]: splits into consecutive channel groups.
pub fn split_channels(x: &Tensor4, sizes: &[usize]) -> Result<Vec<Tensor4>> {
    let total: usize = sizes.iter().sum();
    if total != x.shape.channels || sizes.contains(&0) {
        return Err(mismatch(
            "split_channels",
            x.shape.channels,
            format!("{sizes:?}"),
        ));
    }
    let plane = x.shape.plane();
    let mut outs: Vec<Tensor4> = sizes
        .iter()
        .map(|&c| Tensor4 {
            shape: Shape4 {
                channels: c,
                ..x.shape
            },
            data: Vec::with_capacity(x.shape.batch * c * plane),
        })
        .collect();
    for b in 0..x.shape.batch {
        let item = x.item(b);
        let mut offset = 0;
        for (out, &c) in outs.iter_mut().zip(sizes) {
            out.data
                .extend_from_slice(&item[offset * plane..(offset + c) * plane]);
            offset += c;
        }
    }
    Ok(outs)
}

/// Mean absolute error and its gradient with respect to `pred`.
pub fn l1_loss_and_grad(pred: &Tensor4, target: &Tensor4) -> Result<(f64, Tensor4)> {
    pred.check_same(target, "l1_loss")?;
    let n = pred.data.len() as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(pred.data.len());
    for (&p, &t) in pred.data.iter().zip(&target.data) {
        let d = p - t;
        loss += d.abs();
        let s = if d > 0.0 {
            1.0
        } else if d < 0.0 {
            -1.0
        } else {
            0.0
        };
        grad.push(s / n);
    }
    Ok((
        loss / n,
        Tensor4 {
            shape: pred.shape,
            data: grad,
        },
    ))
}
