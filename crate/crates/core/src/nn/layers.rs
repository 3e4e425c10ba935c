use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::Tensor;
use crate::pdc::{backward_channel, forward_channel, DilatedLocations};
use crate::{Error, Result};

/// A trainable array and its accumulated gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub value: Tensor,
    pub grad: Tensor,
}

impl Param {
    pub fn new(value: Tensor) -> Self {
        let grad = Tensor::zeros(value.shape());
        Param { value, grad }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}

/// A differentiable block.
///
/// `forward` caches what `backward` needs, so the two must alternate
/// one sample at a time. `backward` adds into the parameter gradients and
/// returns the gradient with respect to the input.
pub trait Layer: Send {
    fn forward(&mut self, x: &Tensor) -> Result<Tensor>;
    fn backward(&mut self, grad: &Tensor) -> Result<Tensor>;
    fn collect_params<'a>(&'a mut self, _prefix: &str, _out: &mut Vec<(String, &'a mut Param)>) {}
}

pub fn uniform(shape: &[usize], bound: f64, rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.gen_range(-bound..=bound)).collect())
        .expect("length matches shape")
}

/// Initial bias of dense and convolution layers. Slightly positive so no
/// unit starts exactly on the ReLU kink.
pub const INIT_BIAS: f64 = 0.01;

fn bias(n: usize) -> Tensor {
    let mut t = Tensor::zeros(&[n]);
    t.fill(INIT_BIAS);
    t
}

fn he_bound(fan_in: usize) -> f64 {
    (6.0 / fan_in.max(1) as f64).sqrt()
}

fn cached<'a>(cache: &'a Option<Tensor>, layer: &str) -> Result<&'a Tensor> {
    cache
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig(format!("{layer}: backward called before forward")))
}

/// `y = W x + b` on a 1-D input. With a mask the layer computes
/// `(W * mask) x + b`, so masked weights are structurally absent.
#[derive(Debug, Clone)]
pub struct Dense {
    pub weight: Param,
    pub bias: Param,
    mask: Option<Vec<bool>>,
    input: Option<Tensor>,
}

impl Dense {
    pub fn new(inputs: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Self {
        Dense {
            weight: Param::new(uniform(&[outputs, inputs], he_bound(inputs), rng)),
            bias: Param::new(bias(outputs)),
            mask: None,
            input: None,
        }
    }

    pub fn from_weights(weight: Tensor, bias: Tensor) -> Result<Self> {
        let [o, _] = *weight.shape() else {
            return Err(Error::shape("dense weight", &[0, 0], weight.shape()));
        };
        bias.expect_shape("dense bias", &[o])?;
        Ok(Dense {
            weight: Param::new(weight),
            bias: Param::new(bias),
            mask: None,
            input: None,
        })
    }

    /// Block-diagonal connectivity: output block `g` only sees input block `g`.
    pub fn block_diagonal(blocks: &[(usize, usize)], rng: &mut ChaCha8Rng) -> Self {
        let inputs: usize = blocks.iter().map(|b| b.0).sum();
        let outputs: usize = blocks.iter().map(|b| b.1).sum();
        let mut mask = vec![false; inputs * outputs];
        let (mut i0, mut o0) = (0, 0);
        for &(bi, bo) in blocks {
            for o in o0..o0 + bo {
                for i in i0..i0 + bi {
                    mask[o * inputs + i] = true;
                }
            }
            i0 += bi;
            o0 += bo;
        }
        let mut layer = Dense::new(inputs, outputs, rng);
        // Re-scale to the per-block fan-in.
        let fan = blocks.iter().map(|b| b.0).max().unwrap_or(1);
        let s = he_bound(fan) / he_bound(inputs);
        for (w, &keep) in layer.weight.value.data_mut().iter_mut().zip(&mask) {
            *w = if keep { *w * s } else { 0.0 };
        }
        layer.mask = Some(mask);
        layer
    }

    pub fn inputs(&self) -> usize {
        self.weight.value.shape()[1]
    }

    pub fn outputs(&self) -> usize {
        self.weight.value.shape()[0]
    }
}

impl Layer for Dense {
    fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let (o, i) = (self.outputs(), self.inputs());
        if x.len() != i || x.shape().len() != 1 {
            return Err(Error::shape("dense input", &[i], x.shape()));
        }
        let w = self.weight.value.data();
        let mut y = self.bias.value.data().to_vec();
        for (r, yr) in y.iter_mut().enumerate() {
            let row = &w[r * i..(r + 1) * i];
            *yr += match &self.mask {
                None => row.iter().zip(x.data()).map(|(a, b)| a * b).sum::<f64>(),
                Some(m) => row
                    .iter()
                    .zip(&m[r * i..(r + 1) * i])
                    .zip(x.data())
                    .map(|((a, &keep), b)| if keep { a * b } else { 0.0 })
                    .sum::<f64>(),
            };
        }
        debug_assert_eq!(y.len(), o);
        self.input = Some(x.clone());
        Ok(Tensor::vector(y))
    }

    fn backward(&mut self, grad: &Tensor) -> Result<Tensor> {
        let (o, i) = (self.outputs(), self.inputs());
        grad.expect_shape("dense upstream gradient", &[o])?;
        let x = cached(&self.input, "dense")?;
        let w = self.weight.value.data();
        let gw = self.weight.grad.data_mut();
        let mut gx = vec![0.0; i];
        for (r, &g) in grad.data().iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            let row = r * i..(r + 1) * i;
            match &self.mask {
                None => {
                    for ((gwv, &xv), (gxv, &wv)) in gw[row.clone()]
                        .iter_mut()
                        .zip(x.data())
                        .zip(gx.iter_mut().zip(&w[row]))
                    {
                        *gwv += g * xv;
                        *gxv += g * wv;
                    }
                }
                Some(m) => {
                    for (((gwv, &xv), (gxv, &wv)), &keep) in gw[row.clone()]
                        .iter_mut()
                        .zip(x.data())
                        .zip(gx.iter_mut().zip(&w[row.clone()]))
                        .zip(&m[row])
                    {
                        if keep {
                            *gwv += g * xv;
                            *gxv += g * wv;
                        }
                    }
                }
            }
        }
        self.bias.grad.add_assign(grad);
        Ok(Tensor::vector(gx))
    }

    fn collect_params<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Param)>) {
        out.push((format!("{prefix}.weight"), &mut self.weight));
        out.push((format!("{prefix}.bias"), &mut self.bias));
    }
}

/// 2-D cross-correlation over a `C x H x W` input.
#[derive(Debug, Clone)]
pub struct Conv2d {
    pub weight: Param,
    pub bias: Param,
    pub stride: (usize, usize),
    pub padding: (usize, usize),
    input: Option<Tensor>,
}

impl Conv2d {
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        kernel: (usize, usize),
        stride: (usize, usize),
        padding: (usize, usize),
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let fan_in = in_channels * kernel.0 * kernel.1;
        Conv2d {
            weight: Param::new(uniform(
                &[out_channels, in_channels, kernel.0, kernel.1],
                he_bound(fan_in),
                rng,
            )),
            bias: Param::new(bias(out_channels)),
            stride,
            padding,
            input: None,
        }
    }

    fn dims(&self) -> [usize; 4] {
        let s = self.weight.value.shape();
        [s[0], s[1], s[2], s[3]]
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<[usize; 3]> {
        let [o, c, kh, kw] = self.dims();
        let &[ic, h, w] = input else {
            return Err(Error::shape("conv2d input (C x H x W)", &[c, 0, 0], input));
        };
        let (ph, pw) = self.padding;
        if ic != c || h + 2 * ph < kh || w + 2 * pw < kw {
            return Err(Error::shape("conv2d input (C x H x W)", &[c, kh, kw], input));
        }
        Ok([o, (h + 2 * ph - kh) / self.stride.0 + 1, (w + 2 * pw - kw) / self.stride.1 + 1])
    }
}

impl Layer for Conv2d {
    fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let [o, oh, ow] = self.output_shape(x.shape())?;
        let [_, c, kh, kw] = self.dims();
        let (h, w) = (x.shape()[1], x.shape()[2]);
        let (sh, sw) = self.stride;
        let (ph, pw) = (self.padding.0 as isize, self.padding.1 as isize);
        let (wt, xd) = (self.weight.value.data(), x.data());
        let mut y = vec![0.0; o * oh * ow];
        for oc in 0..o {
            let b = self.bias.value.data()[oc];
            let plane = &mut y[oc * oh * ow..(oc + 1) * oh * ow];
            plane.iter_mut().for_each(|v| *v = b);
            for ic in 0..c {
                for ky in 0..kh {
                    for kx in 0..kw {
                        let wv = wt[((oc * c + ic) * kh + ky) * kw + kx];
                        for oy in 0..oh {
                            let iy = (oy * sh + ky) as isize - ph;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            let row = &xd[(ic * h + iy as usize) * w..(ic * h + iy as usize + 1) * w];
                            for ox in 0..ow {
                                let ix = (ox * sw + kx) as isize - pw;
                                if ix >= 0 && ix < w as isize {
                                    plane[oy * ow + ox] += wv * row[ix as usize];
                                }
                            }
                        }
                    }
                }
            }
        }
        self.input = Some(x.clone());
        Tensor::from_vec(&[o, oh, ow], y)
    }

    fn backward(&mut self, grad: &Tensor) -> Result<Tensor> {
        let x = cached(&self.input, "conv2d")?;
        let [o, oh, ow] = self.output_shape(x.shape())?;
        grad.expect_shape("conv2d upstream gradient", &[o, oh, ow])?;
        let [_, c, kh, kw] = self.dims();
        let (h, w) = (x.shape()[1], x.shape()[2]);
        let (sh, sw) = self.stride;
        let (ph, pw) = (self.padding.0 as isize, self.padding.1 as isize);
        let (wt, xd, gd) = (self.weight.value.data(), x.data(), grad.data());
        let gw = self.weight.grad.data_mut();
        let mut gx = vec![0.0; x.len()];
        for oc in 0..o {
            let g_plane = &gd[oc * oh * ow..(oc + 1) * oh * ow];
            self.bias.grad.data_mut()[oc] += g_plane.iter().sum::<f64>();
            for ic in 0..c {
                for ky in 0..kh {
                    for kx in 0..kw {
                        let wi = ((oc * c + ic) * kh + ky) * kw + kx;
                        let wv = wt[wi];
                        let mut acc = 0.0;
                        for oy in 0..oh {
                            let iy = (oy * sh + ky) as isize - ph;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            let base = (ic * h + iy as usize) * w;
                            for ox in 0..ow {
                                let ix = (ox * sw + kx) as isize - pw;
                                if ix >= 0 && ix < w as isize {
                                    let g = g_plane[oy * ow + ox];
                                    acc += g * xd[base + ix as usize];
                                    gx[base + ix as usize] += g * wv;
                                }
                            }
                        }
                        gw[wi] += acc;
                    }
                }
            }
        }
        Tensor::from_vec(x.shape(), gx)
    }

    fn collect_params<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Param)>) {
        out.push((format!("{prefix}.weight"), &mut self.weight));
        out.push((format!("{prefix}.bias"), &mut self.bias));
    }
}

#[derive(Debug, Clone, Default)]
pub struct Relu {
    input: Option<Tensor>,
}

impl Relu {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Layer for Relu {
    fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        self.input = Some(x.clone());
        let data = x.data().iter().map(|&v| v.max(0.0)).collect();
        Tensor::from_vec(x.shape(), data)
    }

    fn backward(&mut self, grad: &Tensor) -> Result<Tensor> {
        let x = cached(&self.input, "relu")?;
        grad.expect_shape("relu upstream gradient", x.shape())?;
        let data = x
            .data()
            .iter()
            .zip(grad.data())
            .map(|(&v, &g)| if v > 0.0 { g } else { 0.0 })
            .collect();
        Tensor::from_vec(x.shape(), data)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Tanh {
    output: Option<Tensor>,
}

impl Tanh {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Layer for Tanh {
    fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let y = Tensor::from_vec(x.shape(), x.data().iter().map(|v| v.tanh()).collect())?;
        self.output = Some(y.clone());
        Ok(y)
    }

    fn backward(&mut self, grad: &Tensor) -> Result<Tensor> {
        let y = cached(&self.output, "tanh")?;
        grad.expect_shape("tanh upstream gradient", y.shape())?;
        let data = y.data().iter().zip(grad.data()).map(|(&t, &g)| g * (1.0 - t * t)).collect();
        Tensor::from_vec(y.shape(), data)
    }
}

/// Any shape to a vector.
#[derive(Debug, Clone, Default)]
pub struct Flatten {
    shape: Vec<usize>,
}

impl Flatten {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Layer for Flatten {
    fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        self.shape = x.shape().to_vec();
        x.clone().reshape(&[x.len()])
    }

    fn backward(&mut self, grad: &Tensor) -> Result<Tensor> {
        grad.clone().reshape(&self.shape)
    }
}

/// Averages the last axis away and flattens: `C x K x T` to `C*K`.
#[derive(Debug, Clone, Default)]
pub struct MeanOverTime {
    shape: Vec<usize>,
}

impl MeanOverTime {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Layer for MeanOverTime {
    fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let t = *x.shape().last().filter(|&&t| t > 0).ok_or_else(|| {
            Error::shape("mean over time input", &[1], x.shape())
        })?;
        self.shape = x.shape().to_vec();
        let data = x.data().chunks(t).map(|row| row.iter().sum::<f64>() / t as f64).collect();
        Ok(Tensor::vector(data))
    }

    fn backward(&mut self, grad: &Tensor) -> Result<Tensor> {
        let t = *self.shape.last().unwrap_or(&1);
        let rows = self.shape.iter().product::<usize>() / t.max(1);
        grad.expect_shape("mean over time upstream gradient", &[rows])?;
        let data = grad
            .data()
            .iter()
            .flat_map(|&g| std::iter::repeat(g / t as f64).take(t))
            .collect();
        Tensor::from_vec(&self.shape, data)
    }
}

/// Elman cell `h_t = tanh(W x_t + U h_{t-1} + b)` over a `T x D` sequence,
/// emitting the final hidden state.
#[derive(Debug, Clone)]
pub struct Recurrent {
    pub w: Param,
    pub u: Param,
    pub b: Param,
    input: Option<Tensor>,
    states: Vec<Vec<f64>>,
}

impl Recurrent {
    pub fn new(inputs: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        Recurrent {
            w: Param::new(uniform(&[hidden, inputs], bound, rng)),
            u: Param::new(uniform(&[hidden, hidden], bound, rng)),
            b: Param::new(Tensor::zeros(&[hidden])),
            input: None,
            states: Vec::new(),
        }
    }

    pub fn hidden(&self) -> usize {
        self.w.value.shape()[0]
    }

    pub fn inputs(&self) -> usize {
        self.w.value.shape()[1]
    }
}

fn matvec_add(m: &[f64], cols: usize, x: &[f64], out: &mut [f64]) {
    for (r, o) in out.iter_mut().enumerate() {
        *o += m[r * cols..(r + 1) * cols].iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

impl Layer for Recurrent {
    fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let (h, d) = (self.hidden(), self.inputs());
        let &[t, xd] = x.shape() else {
            return Err(Error::shape("recurrent input (T x D)", &[0, d], x.shape()));
        };
        if xd != d || t == 0 {
            return Err(Error::shape("recurrent input (T x D)", &[t.max(1), d], x.shape()));
        }
        self.states = vec![vec![0.0; h]];
        for step in 0..t {
            let mut a = self.b.value.data().to_vec();
            matvec_add(self.w.value.data(), d, &x.data()[step * d..(step + 1) * d], &mut a);
            matvec_add(self.u.value.data(), h, &self.states[step], &mut a);
            a.iter_mut().for_each(|v| *v = v.tanh());
            self.states.push(a);
        }
        self.input = Some(x.clone());
        Ok(Tensor::vector(self.states[t].clone()))
    }

    fn backward(&mut self, grad: &Tensor) -> Result<Tensor> {
        let (h, d) = (self.hidden(), self.inputs());
        grad.expect_shape("recurrent upstream gradient", &[h])?;
        let x = cached(&self.input, "recurrent")?;
        let t = x.shape()[0];
        let (w, u) = (self.w.value.data(), self.u.value.data());
        let mut gx = vec![0.0; t * d];
        let mut dh = grad.data().to_vec();
        for step in (0..t).rev() {
            let hs = &self.states[step + 1];
            let prev = &self.states[step];
            let da: Vec<f64> = dh.iter().zip(hs).map(|(&g, &y)| g * (1.0 - y * y)).collect();
            let xs = &x.data()[step * d..(step + 1) * d];
            let gw = self.w.grad.data_mut();
            let gu = self.u.grad.data_mut();
            for (r, &a) in da.iter().enumerate() {
                for (gwv, &xv) in gw[r * d..(r + 1) * d].iter_mut().zip(xs) {
                    *gwv += a * xv;
                }
                for (guv, &pv) in gu[r * h..(r + 1) * h].iter_mut().zip(prev) {
                    *guv += a * pv;
                }
            }
            for (gb, &a) in self.b.grad.data_mut().iter_mut().zip(&da) {
                *gb += a;
            }
            let gxs = &mut gx[step * d..(step + 1) * d];
            let mut next = vec![0.0; h];
            for (r, &a) in da.iter().enumerate() {
                for (g, &wv) in gxs.iter_mut().zip(&w[r * d..(r + 1) * d]) {
                    *g += a * wv;
                }
                for (g, &uv) in next.iter_mut().zip(&u[r * h..(r + 1) * h]) {
                    *g += a * uv;
                }
            }
            dh = next;
        }
        Tensor::from_vec(&[t, d], gx)
    }

    fn collect_params<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Param)>) {
        out.push((format!("{prefix}.w"), &mut self.w));
        out.push((format!("{prefix}.u"), &mut self.u));
        out.push((format!("{prefix}.b"), &mut self.b));
    }
}

/// Trainable prime-dilated convolution on a `C x K x T` input whose `K`
/// axis has the locations' bins per octave. One filter is shared by all
/// channels unless built with [`PdcLayer::per_channel`].
#[derive(Debug, Clone)]
pub struct PdcLayer {
    pub v: Param,
    pub locations: DilatedLocations,
    per_channel: bool,
    input: Option<Tensor>,
}

impl PdcLayer {
    /// Starts as the identity plus a small random perturbation on the taps.
    pub fn new(locations: DilatedLocations, rng: &mut ChaCha8Rng) -> Self {
        Self::build(locations, 1, false, rng)
    }

    pub fn per_channel(locations: DilatedLocations, channels: usize, rng: &mut ChaCha8Rng) -> Self {
        Self::build(locations, channels, true, rng)
    }

    fn build(locations: DilatedLocations, channels: usize, per_channel: bool, rng: &mut ChaCha8Rng) -> Self {
        let n = locations.len();
        let mut v = uniform(&[channels, n], 0.1, rng);
        let zero = locations.locations.iter().position(|&k| k == 0).expect("k = 0 is always a tap");
        for c in 0..channels {
            v.data_mut()[c * n + zero] += 1.0;
        }
        PdcLayer {
            v: Param::new(v),
            locations,
            per_channel,
            input: None,
        }
    }

    fn filter_row(&self, ch: usize) -> usize {
        if self.per_channel {
            ch
        } else {
            0
        }
    }

    fn dims(&self, x: &Tensor) -> Result<(usize, usize, usize)> {
        let &[c, k, t] = x.shape() else {
            return Err(Error::shape("pdc layer input (C x K x T)", &[0, 0, 0], x.shape()));
        };
        if self.per_channel && c != self.v.value.shape()[0] {
            return Err(Error::shape("pdc layer channels", &[self.v.value.shape()[0], k, t], x.shape()));
        }
        Ok((c, k, t))
    }
}

impl Layer for PdcLayer {
    fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let (c, k, t) = self.dims(x)?;
        let n = self.locations.len();
        let mut out = Tensor::zeros(x.shape());
        for ch in 0..c {
            let row = self.filter_row(ch);
            let v = &self.v.value.data()[row * n..(row + 1) * n];
            forward_channel(x, v, &self.locations.locations, ch, k, t, out.data_mut());
        }
        self.input = Some(x.clone());
        Ok(out)
    }

    fn backward(&mut self, grad: &Tensor) -> Result<Tensor> {
        let x = cached(&self.input, "pdc layer")?;
        let (c, k, t) = self.dims(x)?;
        grad.expect_shape("pdc layer upstream gradient", x.shape())?;
        let n = self.locations.len();
        let mut gx = Tensor::zeros(x.shape());
        for ch in 0..c {
            let row = self.filter_row(ch);
            let v = &self.v.value.data()[row * n..(row + 1) * n];
            let gv = &mut self.v.grad.data_mut()[row * n..(row + 1) * n];
            backward_channel(x, grad, v, &self.locations.locations, ch, k, t, gx.data_mut(), gv);
        }
        Ok(gx)
    }

    fn collect_params<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Param)>) {
        out.push((format!("{prefix}.v"), &mut self.v));
    }
}

/// Layers applied in order.
#[derive(Default)]
pub struct Sequential {
    layers: Vec<Box<dyn Layer>>,
}

impl Sequential {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(mut self, layer: impl Layer + 'static) -> Self {
        self.layers.push(Box::new(layer));
        self
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }
}

impl Layer for Sequential {
    fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let mut h = x.clone();
        for layer in &mut self.layers {
            h = layer.forward(&h)?;
        }
        Ok(h)
    }

    fn backward(&mut self, grad: &Tensor) -> Result<Tensor> {
        let mut g = grad.clone();
        for layer in self.layers.iter_mut().rev() {
            g = layer.backward(&g)?;
        }
        Ok(g)
    }

    fn collect_params<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Param)>) {
        for (i, layer) in self.layers.iter_mut().enumerate() {
            layer.collect_params(&format!("{prefix}.{i}"), out);
        }
    }
}

/// Every parameter of `layer` under `prefix`, in a fixed order.
pub fn params_of<'a>(layer: &'a mut dyn Layer, prefix: &str) -> Vec<(String, &'a mut Param)> {
    let mut out = Vec::new();
    layer.collect_params(prefix, &mut out);
    out
}

pub fn parameter_count(layer: &mut dyn Layer) -> usize {
    params_of(layer, "").iter().map(|(_, p)| p.value.len()).sum()
}

pub fn zero_grads(layer: &mut dyn Layer) {
    for (_, p) in params_of(layer, "") {
        p.zero_grad();
    }
}
