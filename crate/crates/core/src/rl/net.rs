//! Fully-convolutional policy/value network with hand-written backprop.
//!
//! Layout: a shared trunk of four 3×3 convolutions (dilations 1, 2, 3, 4,
//! ReLU), then two heads that each apply a 3×3 convolution with ReLU followed
//! by a 1×1 projection, to 9 action logits and to 1 value respectively. All
//! convolutions zero-pad to keep the spatial size.
//!
//! Convolutions run as im2col + GEMM over fixed-size pixel chunks. Chunks may
//! be processed in parallel, but every reduction across chunks happens
//! sequentially in chunk order, so results do not depend on the thread count.

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::real::Real;
use crate::error::{Error, Result};
use crate::filters::NUM_ACTIONS;
use crate::image::Image;
use crate::mask::RainMask;
use crate::rng::seeded;

const CHUNK: usize = 512;
pub const TRUNK_DILATIONS: [usize; 4] = [1, 2, 3, 4];
pub const LAYER_NAMES: [&str; 8] = [
    "trunk.0", "trunk.1", "trunk.2", "trunk.3", "policy.0", "policy.1", "value.0", "value.1",
];
const POLICY_HIDDEN: usize = 4;
const POLICY_OUT: usize = 5;
const VALUE_HIDDEN: usize = 6;
const VALUE_OUT: usize = 7;

/// Channel-major activation map: `data[c·H·W + y·W + x]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Tensor {
            channels,
            height,
            width,
            data: vec![T::ZERO; channels * height * width],
        }
    }

    pub fn plane(&self, c: usize) -> &[T] {
        let hw = self.height * self.width;
        &self.data[c * hw..(c + 1) * hw]
    }

    fn relu(mut self) -> Self {
        for v in self.data.iter_mut() {
            if *v < T::ZERO {
                *v = T::ZERO;
            }
        }
        self
    }
}

/// Network input: image channels followed by a 0/1 mask channel.
pub fn input_tensor<T: Real>(state: &Image, mask: &RainMask) -> Result<Tensor<T>> {
    mask.ensure_matches(state)?;
    let (h, w, c) = state.dims();
    let hw = h * w;
    let mut t = Tensor::zeros(c + 1, h, w);
    for (p, px) in state.data().chunks_exact(c).enumerate() {
        for (ch, &v) in px.iter().enumerate() {
            t.data[ch * hw + p] = T::from_f64(v);
        }
        if mask.at(p) {
            t.data[c * hw + p] = T::ONE;
        }
    }
    Ok(t)
}

struct SyncPtr<T>(*mut T);
unsafe impl<T> Send for SyncPtr<T> {}
unsafe impl<T> Sync for SyncPtr<T> {}

/// One convolution layer. `weight` is `out × (in·k·k)` row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv<T> {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub dilation: usize,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvGrad<T> {
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> Conv<T> {
    pub fn zeros(in_channels: usize, out_channels: usize, kernel: usize, dilation: usize) -> Self {
        Conv {
            in_channels,
            out_channels,
            kernel,
            dilation,
            weight: vec![T::ZERO; out_channels * in_channels * kernel * kernel],
            bias: vec![T::ZERO; out_channels],
        }
    }

    fn cols_rows(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }

    fn chunks(hw: usize) -> Vec<(usize, usize)> {
        (0..hw)
            .step_by(CHUNK)
            .map(|p0| (p0, (hw - p0).min(CHUNK)))
            .collect()
    }

    /// Splits pixels `p0..p0+len` into row segments `(offset, y, x0, n)`.
    fn segments(width: usize, p0: usize, len: usize) -> impl Iterator<Item = (usize, usize, usize, usize)> {
        let mut p = p0;
        std::iter::from_fn(move || {
            if p >= p0 + len {
                return None;
            }
            let (y, x0) = (p / width, p % width);
            let n = (width - x0).min(p0 + len - p);
            let seg = (p - p0, y, x0, n);
            p += n;
            Some(seg)
        })
    }

    /// For a segment of row `y` starting at column `x0` with `n` pixels and a
    /// tap offset `(oy, ox)`, the in-bounds part as `(skip, count, src_start)`.
    fn tap_range(
        h: usize,
        w: usize,
        y: usize,
        x0: usize,
        n: usize,
        oy: isize,
        ox: isize,
    ) -> Option<(usize, usize, usize)> {
        let sy = y as isize + oy;
        if sy < 0 || sy >= h as isize {
            return None;
        }
        let lo = (x0 as isize).max(-ox);
        let hi = ((x0 + n) as isize).min(w as isize - ox);
        if lo >= hi {
            return None;
        }
        let skip = (lo - x0 as isize) as usize;
        let src = (sy * w as isize + lo + ox) as usize;
        Some((skip, (hi - lo) as usize, src))
    }

    /// Gathers the receptive fields of pixels `p0..p0+len` into a
    /// `(in·k·k) × len` matrix.
    fn im2col(&self, x: &Tensor<T>, p0: usize, len: usize, cols: &mut [T]) {
        let (h, w) = (x.height, x.width);
        let hw = h * w;
        let k = self.kernel;
        let r = (k / 2) as isize;
        let d = self.dilation as isize;
        for ci in 0..self.in_channels {
            let plane = &x.data[ci * hw..(ci + 1) * hw];
            for ky in 0..k {
                let oy = (ky as isize - r) * d;
                for kx in 0..k {
                    let ox = (kx as isize - r) * d;
                    let row = (ci * k + ky) * k + kx;
                    let dst = &mut cols[row * len..(row + 1) * len];
                    for (off, y, x0, n) in Self::segments(w, p0, len) {
                        let seg = &mut dst[off..off + n];
                        match Self::tap_range(h, w, y, x0, n, oy, ox) {
                            None => seg.fill(T::ZERO),
                            Some((skip, count, src)) => {
                                seg[..skip].fill(T::ZERO);
                                seg[skip..skip + count].copy_from_slice(&plane[src..src + count]);
                                seg[skip + count..].fill(T::ZERO);
                            }
                        }
                    }
                }
            }
        }
    }

    /// Scatter-adds a `(in·k·k) × len` column gradient back onto `dx`.
    fn col2im(&self, dcols: &[T], p0: usize, len: usize, dx: &mut Tensor<T>) {
        let (h, w) = (dx.height, dx.width);
        let hw = h * w;
        let k = self.kernel;
        let r = (k / 2) as isize;
        let d = self.dilation as isize;
        for ci in 0..self.in_channels {
            let plane = &mut dx.data[ci * hw..(ci + 1) * hw];
            for ky in 0..k {
                let oy = (ky as isize - r) * d;
                for kx in 0..k {
                    let ox = (kx as isize - r) * d;
                    let row = (ci * k + ky) * k + kx;
                    let src_row = &dcols[row * len..(row + 1) * len];
                    for (off, y, x0, n) in Self::segments(w, p0, len) {
                        if let Some((skip, count, dst)) = Self::tap_range(h, w, y, x0, n, oy, ox) {
                            let src = &src_row[off + skip..off + skip + count];
                            for (o, &v) in plane[dst..dst + count].iter_mut().zip(src) {
                                *o += v;
                            }
                        }
                    }
                }
            }
        }
    }

    pub fn forward(&self, x: &Tensor<T>) -> Tensor<T> {
        debug_assert_eq!(x.channels, self.in_channels);
        let hw = x.height * x.width;
        let mut out = Tensor::zeros(self.out_channels, x.height, x.width);
        for (o, row) in out.data.chunks_exact_mut(hw).enumerate() {
            row.fill(self.bias[o]);
        }
        let kk = self.cols_rows();
        if self.kernel == 1 {
            unsafe {
                T::gemm(
                    self.out_channels,
                    kk,
                    hw,
                    T::ONE,
                    self.weight.as_ptr(),
                    kk as isize,
                    1,
                    x.data.as_ptr(),
                    hw as isize,
                    1,
                    T::ONE,
                    out.data.as_mut_ptr(),
                    hw as isize,
                    1,
                );
            }
            return out;
        }
        let dst = SyncPtr(out.data.as_mut_ptr());
        let dst = &dst;
        Self::chunks(hw).into_par_iter().for_each_init(
            || vec![T::ZERO; kk * CHUNK],
            |cols, (p0, len)| {
                let cols = &mut cols[..kk * len];
                self.im2col(x, p0, len, cols);
                // Each chunk writes a disjoint column range of `out`.
                unsafe {
                    T::gemm(
                        self.out_channels,
                        kk,
                        len,
                        T::ONE,
                        self.weight.as_ptr(),
                        kk as isize,
                        1,
                        cols.as_ptr(),
                        len as isize,
                        1,
                        T::ONE,
                        dst.0.add(p0),
                        hw as isize,
                        1,
                    );
                }
            },
        );
        out
    }

    /// Accumulates parameter gradients into `grad` and returns `dL/dx` when
    /// `need_dx`.
    pub fn backward(
        &self,
        x: &Tensor<T>,
        dy: &[T],
        need_dx: bool,
        grad: &mut ConvGrad<T>,
    ) -> Option<Tensor<T>> {
        let hw = x.height * x.width;
        let kk = self.cols_rows();
        for (o, row) in dy.chunks_exact(hw).enumerate() {
            grad.bias[o] += row.iter().copied().sum::<T>();
        }
        if self.kernel == 1 {
            unsafe {
                T::gemm(
                    self.out_channels,
                    hw,
                    kk,
                    T::ONE,
                    dy.as_ptr(),
                    hw as isize,
                    1,
                    x.data.as_ptr(),
                    1,
                    hw as isize,
                    T::ONE,
                    grad.weight.as_mut_ptr(),
                    kk as isize,
                    1,
                );
            }
            if !need_dx {
                return None;
            }
            let mut dx = Tensor::zeros(self.in_channels, x.height, x.width);
            unsafe {
                T::gemm(
                    kk,
                    self.out_channels,
                    hw,
                    T::ONE,
                    self.weight.as_ptr(),
                    1,
                    kk as isize,
                    dy.as_ptr(),
                    hw as isize,
                    1,
                    T::ZERO,
                    dx.data.as_mut_ptr(),
                    hw as isize,
                    1,
                );
            }
            return Some(dx);
        }

        let mut dx = need_dx.then(|| Tensor::zeros(self.in_channels, x.height, x.width));
        let chunks = Self::chunks(hw);
        let group = rayon::current_num_threads().max(1);
        for batch in chunks.chunks(group) {
            let parts: Vec<(Vec<T>, Option<Vec<T>>)> = batch
                .par_iter()
                .map(|&(p0, len)| {
                    let mut cols = vec![T::ZERO; kk * len];
                    self.im2col(x, p0, len, &mut cols);
                    let mut dw = vec![T::ZERO; self.out_channels * kk];
                    unsafe {
                        T::gemm(
                            self.out_channels,
                            len,
                            kk,
                            T::ONE,
                            dy.as_ptr().add(p0),
                            hw as isize,
                            1,
                            cols.as_ptr(),
                            1,
                            len as isize,
                            T::ZERO,
                            dw.as_mut_ptr(),
                            kk as isize,
                            1,
                        );
                    }
                    let dcols = need_dx.then(|| {
                        // Reuse the column buffer for Wᵀ·dy.
                        unsafe {
                            T::gemm(
                                kk,
                                self.out_channels,
                                len,
                                T::ONE,
                                self.weight.as_ptr(),
                                1,
                                kk as isize,
                                dy.as_ptr().add(p0),
                                hw as isize,
                                1,
                                T::ZERO,
                                cols.as_mut_ptr(),
                                len as isize,
                                1,
                            );
                        }
                        cols
                    });
                    (dw, dcols)
                })
                .collect();
            for ((p0, len), (dw, dcols)) in batch.iter().zip(parts) {
                for (g, v) in grad.weight.iter_mut().zip(dw) {
                    *g += v;
                }
                if let (Some(dx), Some(dcols)) = (dx.as_mut(), dcols) {
                    self.col2im(&dcols, *p0, *len, dx);
                }
            }
        }
        dx
    }
}

/// Policy and value network parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Network<T> {
    /// Channels of the image part of the input (the mask adds one more).
    pub image_channels: usize,
    /// Feature width of every hidden layer.
    pub width: usize,
    pub layers: Vec<Conv<T>>,
}

/// Per-pixel network outputs in `f64`, pixel-major.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyOutput {
    pub height: usize,
    pub width: usize,
    /// `logits[p·9 + a]` for action `a + 1`.
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
    /// Empty when the value head was skipped.
    pub values: Vec<f64>,
}

/// Activations kept for backprop.
pub struct ForwardCache<T> {
    input: Tensor<T>,
    trunk: Vec<Tensor<T>>,
    policy_hidden: Tensor<T>,
    value_hidden: Tensor<T>,
    pub output: PolicyOutput,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gradients<T> {
    pub layers: Vec<ConvGrad<T>>,
}

impl<T: Real> Gradients<T> {
    pub fn zeros_like(net: &Network<T>) -> Self {
        Gradients {
            layers: net
                .layers
                .iter()
                .map(|l| ConvGrad {
                    weight: vec![T::ZERO; l.weight.len()],
                    bias: vec![T::ZERO; l.bias.len()],
                })
                .collect(),
        }
    }

    pub fn global_norm(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.weight.iter().chain(&l.bias))
            .map(|v| {
                let v = v.to_f64();
                v * v
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, s: f64) {
        let s = T::from_f64(s);
        for l in &mut self.layers {
            for v in l.weight.iter_mut().chain(l.bias.iter_mut()) {
                *v *= s;
            }
        }
    }

    /// Name of the first tensor holding a NaN or infinity.
    pub fn first_non_finite(&self) -> Option<String> {
        for (name, l) in LAYER_NAMES.iter().zip(&self.layers) {
            if !l.weight.iter().all(|v| v.is_finite()) {
                return Some(format!("{name}.weight"));
            }
            if !l.bias.iter().all(|v| v.is_finite()) {
                return Some(format!("{name}.bias"));
            }
        }
        None
    }
}

impl<T: Real> Network<T> {
    /// He-initialized network: weights ~ N(0, 2/fan_in), zero biases.
    pub fn init(image_channels: usize, width: usize, seed: u64) -> Self {
        let mut net = Self::zeros(image_channels, width);
        let mut rng = seeded(seed);
        for layer in &mut net.layers {
            let fan_in = layer.in_channels * layer.kernel * layer.kernel;
            let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).unwrap();
            for w in layer.weight.iter_mut() {
                *w = T::from_f64(normal.sample(&mut rng));
            }
        }
        net
    }

    pub fn zeros(image_channels: usize, width: usize) -> Self {
        let input = image_channels + 1;
        let mut layers = Vec::with_capacity(LAYER_NAMES.len());
        for (i, &d) in TRUNK_DILATIONS.iter().enumerate() {
            let cin = if i == 0 { input } else { width };
            layers.push(Conv::zeros(cin, width, 3, d));
        }
        layers.push(Conv::zeros(width, width, 3, 1));
        layers.push(Conv::zeros(width, NUM_ACTIONS, 1, 1));
        layers.push(Conv::zeros(width, width, 3, 1));
        layers.push(Conv::zeros(width, 1, 1, 1));
        Network {
            image_channels,
            width,
            layers,
        }
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().chain(&l.bias).all(|v| v.is_finite()))
    }

    fn check_input(&self, state: &Image) -> Result<()> {
        if state.channels() != self.image_channels {
            return Err(Error::DimensionMismatch(format!(
                "network expects {} image channels, got {}",
                self.image_channels,
                state.channels()
            )));
        }
        Ok(())
    }

    fn trunk(&self, input: &Tensor<T>) -> Vec<Tensor<T>> {
        let mut acts: Vec<Tensor<T>> = Vec::with_capacity(TRUNK_DILATIONS.len());
        for layer in &self.layers[..TRUNK_DILATIONS.len()] {
            let x = acts.last().unwrap_or(input);
            acts.push(layer.forward(x).relu());
        }
        acts
    }

    /// Policy (and optionally value) for every pixel.
    pub fn forward(&self, state: &Image, mask: &RainMask, with_value: bool) -> Result<PolicyOutput> {
        self.check_input(state)?;
        let input = input_tensor(state, mask)?;
        let trunk = self.trunk(&input);
        let features = trunk.last().unwrap();
        let logits = self.layers[POLICY_OUT].forward(&self.layers[POLICY_HIDDEN].forward(features).relu());
        let values = with_value.then(|| {
            self.layers[VALUE_OUT].forward(&self.layers[VALUE_HIDDEN].forward(features).relu())
        });
        Ok(assemble_output(&logits, values.as_ref()))
    }

    pub fn forward_cached(&self, state: &Image, mask: &RainMask) -> Result<ForwardCache<T>> {
        self.check_input(state)?;
        let input = input_tensor(state, mask)?;
        let trunk = self.trunk(&input);
        let features = trunk.last().unwrap();
        let policy_hidden = self.layers[POLICY_HIDDEN].forward(features).relu();
        let logits = self.layers[POLICY_OUT].forward(&policy_hidden);
        let value_hidden = self.layers[VALUE_HIDDEN].forward(features).relu();
        let values = self.layers[VALUE_OUT].forward(&value_hidden);
        let output = assemble_output(&logits, Some(&values));
        Ok(ForwardCache {
            input,
            trunk,
            policy_hidden,
            value_hidden,
            output,
        })
    }

    /// Backpropagates `dL/dlogits` (pixel-major, 9 per pixel) and `dL/dvalue`
    /// through the cached forward pass, accumulating into `grads`.
    pub fn backward(
        &self,
        cache: &ForwardCache<T>,
        dlogits: &[f64],
        dvalues: &[f64],
        grads: &mut Gradients<T>,
    ) {
        let hw = cache.input.height * cache.input.width;
        let mut dl = vec![T::ZERO; NUM_ACTIONS * hw];
        for p in 0..hw {
            for a in 0..NUM_ACTIONS {
                dl[a * hw + p] = T::from_f64(dlogits[p * NUM_ACTIONS + a]);
            }
        }
        let dv: Vec<T> = dvalues.iter().map(|&v| T::from_f64(v)).collect();
        let features = cache.trunk.last().unwrap();

        let mut dph = self.layers[POLICY_OUT]
            .backward(&cache.policy_hidden, &dl, true, &mut grads.layers[POLICY_OUT])
            .unwrap();
        relu_backward(&mut dph, &cache.policy_hidden);
        let mut dfeat = self.layers[POLICY_HIDDEN]
            .backward(features, &dph.data, true, &mut grads.layers[POLICY_HIDDEN])
            .unwrap();

        let mut dvh = self.layers[VALUE_OUT]
            .backward(&cache.value_hidden, &dv, true, &mut grads.layers[VALUE_OUT])
            .unwrap();
        relu_backward(&mut dvh, &cache.value_hidden);
        let dfeat_v = self.layers[VALUE_HIDDEN]
            .backward(features, &dvh.data, true, &mut grads.layers[VALUE_HIDDEN])
            .unwrap();
        for (a, b) in dfeat.data.iter_mut().zip(dfeat_v.data) {
            *a += b;
        }

        let mut dy = dfeat;
        for i in (0..TRUNK_DILATIONS.len()).rev() {
            relu_backward(&mut dy, &cache.trunk[i]);
            let x = if i == 0 { &cache.input } else { &cache.trunk[i - 1] };
            match self.layers[i].backward(x, &dy.data, i > 0, &mut grads.layers[i]) {
                Some(next) => dy = next,
                None => break,
            }
        }
    }
}

fn relu_backward<T: Real>(grad: &mut Tensor<T>, activation: &Tensor<T>) {
    for (g, &a) in grad.data.iter_mut().zip(&activation.data) {
        if !(a > T::ZERO) {
            *g = T::ZERO;
        }
    }
}

fn assemble_output<T: Real>(logits: &Tensor<T>, values: Option<&Tensor<T>>) -> PolicyOutput {
    let hw = logits.height * logits.width;
    let mut lg = vec![0.0; hw * NUM_ACTIONS];
    for a in 0..NUM_ACTIONS {
        for (p, &v) in logits.plane(a).iter().enumerate() {
            lg[p * NUM_ACTIONS + a] = v.to_f64();
        }
    }
    let mut probs = vec![0.0; hw * NUM_ACTIONS];
    for (z, pr) in lg.chunks_exact(NUM_ACTIONS).zip(probs.chunks_exact_mut(NUM_ACTIONS)) {
        softmax_into(z, pr);
    }
    PolicyOutput {
        height: logits.height,
        width: logits.width,
        logits: lg,
        probs,
        values: values.map_or_else(Vec::new, |v| v.data.iter().map(|x| x.to_f64()).collect()),
    }
}

pub fn softmax_into(z: &[f64], out: &mut [f64]) {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for (o, &v) in out.iter_mut().zip(z) {
        *o = (v - m).exp();
        s += *o;
    }
    out.iter_mut().for_each(|o| *o /= s);
}

/// `log softmax(z)[a]`.
pub fn log_softmax_at(z: &[f64], a: usize) -> f64 {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    z[a] - lse
}
