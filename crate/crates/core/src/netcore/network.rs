//! Layer stack with hand-written forward and backward passes.
//!
//! Samples are processed independently (there is no cross-batch state), so
//! a batch is a data-parallel map over rows. Parameter gradients are reduced
//! in sample order, which keeps results bit-identical regardless of the
//! thread count.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::SeedStreams;

use super::config::{EncoderConfig, HeadConfig};
use super::params::ParameterSet;
use super::tensor::{Scalar, Tensor};

const NORM_EPS: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq)]
struct Conv {
    in_c: usize,
    out_c: usize,
    kernel: usize,
    stride: usize,
    pad: usize,
    in_h: usize,
    in_w: usize,
    out_h: usize,
    out_w: usize,
    weight: usize,
    bias: usize,
}

impl Conv {
    fn patch_len(&self) -> usize {
        self.in_c * self.kernel * self.kernel
    }

    fn positions(&self) -> usize {
        self.out_h * self.out_w
    }

    fn im2col<T: Scalar>(&self, x: &[T]) -> Vec<T> {
        let p = self.positions();
        let mut col = vec![T::zero(); self.patch_len() * p];
        let k = self.kernel;
        for c in 0..self.in_c {
            let plane = &x[c * self.in_h * self.in_w..(c + 1) * self.in_h * self.in_w];
            for ki in 0..k {
                for kj in 0..k {
                    let row = &mut col[((c * k + ki) * k + kj) * p..][..p];
                    for oh in 0..self.out_h {
                        let ih = (oh * self.stride + ki) as isize - self.pad as isize;
                        if ih < 0 || ih >= self.in_h as isize {
                            continue;
                        }
                        let src = &plane[ih as usize * self.in_w..][..self.in_w];
                        for ow in 0..self.out_w {
                            let iw = (ow * self.stride + kj) as isize - self.pad as isize;
                            if iw >= 0 && iw < self.in_w as isize {
                                row[oh * self.out_w + ow] = src[iw as usize];
                            }
                        }
                    }
                }
            }
        }
        col
    }

    fn col2im<T: Scalar>(&self, col: &[T], dx: &mut [T]) {
        let p = self.positions();
        let k = self.kernel;
        for c in 0..self.in_c {
            let plane = &mut dx[c * self.in_h * self.in_w..(c + 1) * self.in_h * self.in_w];
            for ki in 0..k {
                for kj in 0..k {
                    let row = &col[((c * k + ki) * k + kj) * p..][..p];
                    for oh in 0..self.out_h {
                        let ih = (oh * self.stride + ki) as isize - self.pad as isize;
                        if ih < 0 || ih >= self.in_h as isize {
                            continue;
                        }
                        for ow in 0..self.out_w {
                            let iw = (ow * self.stride + kj) as isize - self.pad as isize;
                            if iw >= 0 && iw < self.in_w as isize {
                                let d = &mut plane[ih as usize * self.in_w + iw as usize];
                                *d = *d + row[oh * self.out_w + ow];
                            }
                        }
                    }
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Linear {
    inputs: usize,
    outputs: usize,
    weight: usize,
    bias: usize,
}

#[derive(Clone, Debug, PartialEq)]
enum Op {
    Conv(Conv),
    Linear(Linear),
    Relu,
    GlobalAvgPool { channels: usize, area: usize },
    SampleNorm,
}

#[derive(Clone, Debug, PartialEq)]
struct Layer {
    name: String,
    op: Op,
}

/// A concrete layer stack built from an encoder or head config.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    input_shape: Vec<usize>,
    output_width: usize,
    layers: Vec<Layer>,
    param_shapes: Vec<(String, Vec<usize>)>,
}

/// Per-sample intermediates retained for backward.
#[derive(Clone, Debug)]
struct SampleCache<T> {
    /// Input to each layer.
    inputs: Vec<Vec<T>>,
    /// im2col buffers for conv layers.
    cols: Vec<Option<Vec<T>>>,
}

/// Output of [`Network::forward`].
#[derive(Clone, Debug)]
pub struct Activations<T> {
    pub output: Tensor<T>,
    cache: Option<Vec<SampleCache<T>>>,
    detached: bool,
}

impl<T: Scalar> Activations<T> {
    /// Marks this branch as a stop-gradient: backward yields no parameter
    /// gradients and zero input gradients.
    pub fn detach(mut self) -> Self {
        self.cache = None;
        self.detached = true;
        self
    }

    pub fn is_detached(&self) -> bool {
        self.detached
    }

    pub fn has_cache(&self) -> bool {
        self.cache.is_some()
    }
}

#[derive(Clone, Debug)]
pub struct Gradients<T> {
    /// `None` on a stop-gradient branch.
    pub params: Option<ParameterSet<T>>,
    pub input: Tensor<T>,
}

impl Network {
    pub fn encoder(config: &EncoderConfig) -> Result<Self> {
        config.validate()?;
        let mut b = Builder::default();
        let (mut c, mut h, mut w) = (config.channels, config.height, config.width);
        for (i, s) in config.stages.iter().enumerate() {
            let pad = s.kernel / 2;
            let out_h = (h + 2 * pad - s.kernel) / s.stride + 1;
            let out_w = (w + 2 * pad - s.kernel) / s.stride + 1;
            let name = format!("conv{i}");
            let weight = b.param(format!("{name}.weight"), vec![s.filters, c, s.kernel, s.kernel]);
            let bias = b.param(format!("{name}.bias"), vec![s.filters]);
            b.layer(
                name,
                Op::Conv(Conv {
                    in_c: c,
                    out_c: s.filters,
                    kernel: s.kernel,
                    stride: s.stride,
                    pad,
                    in_h: h,
                    in_w: w,
                    out_h,
                    out_w,
                    weight,
                    bias,
                }),
            );
            b.layer(format!("relu{i}"), Op::Relu);
            c = s.filters;
            h = out_h;
            w = out_w;
        }
        b.layer(
            "pool".into(),
            Op::GlobalAvgPool {
                channels: c,
                area: h * w,
            },
        );
        if config.sample_norm {
            b.layer("norm".into(), Op::SampleNorm);
        }
        Ok(b.finish(vec![config.channels, config.height, config.width], c))
    }

    pub fn head(config: &HeadConfig, input_width: usize) -> Result<Self> {
        config.validate()?;
        if input_width == 0 {
            return Err(Error::NetworkConfig("head input width must be positive".into()));
        }
        let mut b = Builder::default();
        let mut width = input_width;
        let mut widths = config.hidden.clone();
        widths.push(config.output_width);
        let last = widths.len() - 1;
        for (i, &out) in widths.iter().enumerate() {
            let name = format!("fc{i}");
            let weight = b.param(format!("{name}.weight"), vec![out, width]);
            let bias = b.param(format!("{name}.bias"), vec![out]);
            b.layer(
                name,
                Op::Linear(Linear {
                    inputs: width,
                    outputs: out,
                    weight,
                    bias,
                }),
            );
            if i != last {
                b.layer(format!("relu{i}"), Op::Relu);
            }
            width = out;
        }
        Ok(b.finish(vec![input_width], config.output_width))
    }

    /// Per-sample input shape.
    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn input_len(&self) -> usize {
        self.input_shape.iter().product()
    }

    pub fn output_width(&self) -> usize {
        self.output_width
    }

    pub fn param_shapes(&self) -> &[(String, Vec<usize>)] {
        &self.param_shapes
    }

    /// Fan-in scaled uniform weights, zero biases. Each tensor draws from its
    /// own named stream.
    pub fn init_params<T: Scalar>(&self, seed: u64) -> ParameterSet<T> {
        let streams = SeedStreams::new(seed);
        let mut params = ParameterSet::new();
        for (name, shape) in &self.param_shapes {
            let n: usize = shape.iter().product();
            let tensor = if name.ends_with(".bias") {
                Tensor::zeros(shape)
            } else {
                let fan_in: usize = shape[1..].iter().product();
                let bound = (6.0 / fan_in as f64).sqrt();
                let mut rng = streams.rng(name, 0, 0);
                let data = (0..n)
                    .map(|_| T::of_f64(rng.random_range(-bound..bound)))
                    .collect();
                Tensor::from_vec(shape, data).expect("shape matches")
            };
            params.insert(name.clone(), tensor).expect("names unique");
        }
        params
    }

    /// Confirms names, order and shapes against this architecture.
    pub fn check_params<T: Scalar>(&self, params: &ParameterSet<T>) -> Result<()> {
        if params.len() != self.param_shapes.len() {
            return Err(Error::Shape(format!(
                "expected {} parameter tensors, got {}",
                self.param_shapes.len(),
                params.len()
            )));
        }
        for ((name, shape), (pn, t)) in self.param_shapes.iter().zip(params.iter()) {
            if name != pn || shape.as_slice() != t.shape() {
                return Err(Error::Shape(format!(
                    "parameter `{pn}` {:?} does not match `{name}` {shape:?}",
                    t.shape()
                )));
            }
        }
        Ok(())
    }

    fn check_batch<T: Scalar>(&self, batch: &Tensor<T>) -> Result<()> {
        if batch.shape().len() != self.input_shape.len() + 1
            || batch.shape()[1..] != self.input_shape[..]
        {
            return Err(Error::Shape(format!(
                "batch shape {:?} does not match input {:?}",
                batch.shape(),
                self.input_shape
            )));
        }
        Ok(())
    }

    fn forward_sample<T: Scalar>(
        &self,
        params: &ParameterSet<T>,
        x: &[T],
        keep: bool,
    ) -> Result<(Vec<T>, Option<SampleCache<T>>)> {
        let mut cache = keep.then(|| SampleCache {
            inputs: Vec::with_capacity(self.layers.len()),
            cols: Vec::with_capacity(self.layers.len()),
        });
        let mut cur = x.to_vec();
        for layer in &self.layers {
            let mut col_kept = None;
            let next = match &layer.op {
                Op::Conv(c) => {
                    let col = c.im2col(&cur);
                    let w = params.tensor(c.weight).data();
                    let b = params.tensor(c.bias).data();
                    let p = c.positions();
                    let kk = c.patch_len();
                    let mut out = vec![T::zero(); c.out_c * p];
                    for f in 0..c.out_c {
                        let orow = &mut out[f * p..(f + 1) * p];
                        orow.fill(b[f]);
                        for (k, &wv) in w[f * kk..(f + 1) * kk].iter().enumerate() {
                            for (o, &cv) in orow.iter_mut().zip(&col[k * p..(k + 1) * p]) {
                                *o = *o + wv * cv;
                            }
                        }
                    }
                    if keep {
                        col_kept = Some(col);
                    }
                    out
                }
                Op::Linear(l) => {
                    let w = params.tensor(l.weight).data();
                    let b = params.tensor(l.bias).data();
                    (0..l.outputs)
                        .map(|o| {
                            w[o * l.inputs..(o + 1) * l.inputs]
                                .iter()
                                .zip(&cur)
                                .fold(b[o], |acc, (&wv, &xv)| acc + wv * xv)
                        })
                        .collect()
                }
                Op::Relu => cur.iter().map(|&v| v.max(T::zero())).collect(),
                Op::GlobalAvgPool { channels, area } => {
                    let scale = T::of_f64(1.0 / *area as f64);
                    (0..*channels)
                        .map(|c| {
                            cur[c * area..(c + 1) * area]
                                .iter()
                                .fold(T::zero(), |a, &v| a + v)
                                * scale
                        })
                        .collect()
                }
                Op::SampleNorm => {
                    let (mean, inv_std) = moments(&cur);
                    cur.iter().map(|&v| (v - mean) * inv_std).collect()
                }
            };
            if next.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteActivation {
                    layer: layer.name.clone(),
                });
            }
            if let Some(c) = cache.as_mut() {
                c.inputs.push(cur);
                c.cols.push(col_kept);
            }
            cur = next;
        }
        Ok((cur, cache))
    }

    /// Forward pass retaining intermediates for [`backward`](Self::backward).
    pub fn forward<T: Scalar>(
        &self,
        params: &ParameterSet<T>,
        batch: &Tensor<T>,
    ) -> Result<Activations<T>> {
        self.run(params, batch, true)
    }

    /// Forward pass without a cache.
    pub fn infer<T: Scalar>(&self, params: &ParameterSet<T>, batch: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.run(params, batch, false)?.output)
    }

    fn run<T: Scalar>(
        &self,
        params: &ParameterSet<T>,
        batch: &Tensor<T>,
        keep: bool,
    ) -> Result<Activations<T>> {
        self.check_params(params)?;
        self.check_batch(batch)?;
        let results = (0..batch.rows())
            .into_par_iter()
            .map(|i| self.forward_sample(params, batch.row(i), keep))
            .collect::<Result<Vec<_>>>()?;
        let mut rows = Vec::with_capacity(results.len());
        let mut caches = Vec::with_capacity(results.len());
        for (out, cache) in results {
            rows.push(out);
            if let Some(c) = cache {
                caches.push(c);
            }
        }
        Ok(Activations {
            output: Tensor::stack(&[self.output_width], &rows)?,
            cache: keep.then_some(caches),
            detached: false,
        })
    }

    fn backward_sample<T: Scalar>(
        &self,
        params: &ParameterSet<T>,
        cache: &SampleCache<T>,
        upstream: &[T],
    ) -> (Vec<Vec<T>>, Vec<T>) {
        let mut grads: Vec<Vec<T>> = self
            .param_shapes
            .iter()
            .map(|(_, s)| vec![T::zero(); s.iter().product()])
            .collect();
        let mut dy = upstream.to_vec();
        for (li, layer) in self.layers.iter().enumerate().rev() {
            let x = &cache.inputs[li];
            dy = match &layer.op {
                Op::Conv(c) => {
                    let col = cache.cols[li].as_ref().expect("conv col cached");
                    let w = params.tensor(c.weight).data();
                    let p = c.positions();
                    let kk = c.patch_len();
                    {
                        let gw = &mut grads[c.weight];
                        for f in 0..c.out_c {
                            let drow = &dy[f * p..(f + 1) * p];
                            for k in 0..kk {
                                let s = drow
                                    .iter()
                                    .zip(&col[k * p..(k + 1) * p])
                                    .fold(T::zero(), |a, (&d, &v)| a + d * v);
                                gw[f * kk + k] = gw[f * kk + k] + s;
                            }
                        }
                    }
                    {
                        let gb = &mut grads[c.bias];
                        for f in 0..c.out_c {
                            gb[f] = gb[f] + dy[f * p..(f + 1) * p].iter().fold(T::zero(), |a, &d| a + d);
                        }
                    }
                    let mut dcol = vec![T::zero(); kk * p];
                    for f in 0..c.out_c {
                        let drow = &dy[f * p..(f + 1) * p];
                        for k in 0..kk {
                            let wv = w[f * kk + k];
                            for (dc, &d) in dcol[k * p..(k + 1) * p].iter_mut().zip(drow) {
                                *dc = *dc + wv * d;
                            }
                        }
                    }
                    let mut dx = vec![T::zero(); x.len()];
                    c.col2im(&dcol, &mut dx);
                    dx
                }
                Op::Linear(l) => {
                    let w = params.tensor(l.weight).data();
                    {
                        let gw = &mut grads[l.weight];
                        for o in 0..l.outputs {
                            let d = dy[o];
                            for (g, &xv) in gw[o * l.inputs..(o + 1) * l.inputs].iter_mut().zip(x) {
                                *g = *g + d * xv;
                            }
                        }
                    }
                    {
                        let gb = &mut grads[l.bias];
                        for o in 0..l.outputs {
                            gb[o] = gb[o] + dy[o];
                        }
                    }
                    let mut dx = vec![T::zero(); l.inputs];
                    for o in 0..l.outputs {
                        let d = dy[o];
                        for (dxv, &wv) in dx.iter_mut().zip(&w[o * l.inputs..(o + 1) * l.inputs]) {
                            *dxv = *dxv + d * wv;
                        }
                    }
                    dx
                }
                Op::Relu => x
                    .iter()
                    .zip(&dy)
                    .map(|(&v, &d)| if v > T::zero() { d } else { T::zero() })
                    .collect(),
                Op::GlobalAvgPool { channels, area } => {
                    let scale = T::of_f64(1.0 / *area as f64);
                    let mut dx = vec![T::zero(); channels * area];
                    for c in 0..*channels {
                        dx[c * area..(c + 1) * area].fill(dy[c] * scale);
                    }
                    dx
                }
                Op::SampleNorm => {
                    let (mean, inv_std) = moments(x);
                    let n = T::of_f64(x.len() as f64);
                    let y: Vec<T> = x.iter().map(|&v| (v - mean) * inv_std).collect();
                    let dy_mean = dy.iter().fold(T::zero(), |a, &d| a + d) / n;
                    let dyy_mean = dy.iter().zip(&y).fold(T::zero(), |a, (&d, &v)| a + d * v) / n;
                    dy.iter()
                        .zip(&y)
                        .map(|(&d, &v)| inv_std * (d - dy_mean - v * dyy_mean))
                        .collect()
                }
            };
        }
        (grads, dy)
    }

    /// Backpropagates `upstream` (∂loss/∂output) through the cached forward pass.
    pub fn backward<T: Scalar>(
        &self,
        params: &ParameterSet<T>,
        activations: &Activations<T>,
        upstream: &Tensor<T>,
    ) -> Result<Gradients<T>> {
        let rows = activations.output.rows();
        let mut input_shape = vec![rows];
        input_shape.extend_from_slice(&self.input_shape);
        if activations.detached {
            return Ok(Gradients {
                params: None,
                input: Tensor::zeros(&input_shape),
            });
        }
        let caches = activations.cache.as_ref().ok_or(Error::MissingCache)?;
        self.check_params(params)?;
        if upstream.shape() != activations.output.shape() {
            return Err(Error::Shape(format!(
                "upstream gradient {:?} does not match output {:?}",
                upstream.shape(),
                activations.output.shape()
            )));
        }
        let per_sample: Vec<_> = caches
            .par_iter()
            .enumerate()
            .map(|(i, c)| self.backward_sample(params, c, upstream.row(i)))
            .collect();

        let mut grads = params.zeros_like();
        let mut dx_rows = Vec::with_capacity(rows);
        for (g, dx) in per_sample {
            for (ti, gs) in g.iter().enumerate() {
                for (a, &b) in grads.tensor_mut(ti).data_mut().iter_mut().zip(gs) {
                    *a = *a + b;
                }
            }
            dx_rows.push(dx);
        }
        Ok(Gradients {
            params: Some(grads),
            input: Tensor::stack(&self.input_shape, &dx_rows)?,
        })
    }
}

fn moments<T: Scalar>(x: &[T]) -> (T, T) {
    let n = T::of_f64(x.len() as f64);
    let mean = x.iter().fold(T::zero(), |a, &v| a + v) / n;
    let var = x.iter().fold(T::zero(), |a, &v| a + (v - mean) * (v - mean)) / n;
    (mean, T::one() / (var + T::of_f64(NORM_EPS)).sqrt())
}

#[derive(Default)]
struct Builder {
    layers: Vec<Layer>,
    params: Vec<(String, Vec<usize>)>,
}

impl Builder {
    fn param(&mut self, name: String, shape: Vec<usize>) -> usize {
        self.params.push((name, shape));
        self.params.len() - 1
    }

    fn layer(&mut self, name: String, op: Op) {
        self.layers.push(Layer { name, op });
    }

    fn finish(self, input_shape: Vec<usize>, output_width: usize) -> Network {
        Network {
            input_shape,
            output_width,
            layers: self.layers,
            param_shapes: self.params,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netcore::config::{ConvStage, HeadKind};

    fn small_encoder() -> EncoderConfig {
        EncoderConfig {
            channels: 3,
            height: 8,
            width: 8,
            stages: vec![
                ConvStage { filters: 4, kernel: 3, stride: 2 },
                ConvStage { filters: 16, kernel: 3, stride: 2 },
            ],
            representation_width: 16,
            sample_norm: false,
        }
    }

    fn ramp_batch(rows: usize, shape: &[usize]) -> Tensor<f32> {
        let n: usize = shape.iter().product();
        let data = (0..rows * n).map(|i| ((i * 37) % 101) as f32 / 101.0).collect();
        let mut full = vec![rows];
        full.extend_from_slice(shape);
        Tensor::from_vec(&full, data).unwrap()
    }

    #[test]
    fn init_is_deterministic_with_zero_bias() {
        let net = Network::encoder(&small_encoder()).unwrap();
        let a: ParameterSet<f32> = net.init_params(3);
        let b: ParameterSet<f32> = net.init_params(3);
        let c: ParameterSet<f32> = net.init_params(4);
        assert_eq!(a, b);
        assert_ne!(a, c);
        for (name, t) in a.iter() {
            if name.ends_with(".bias") {
                assert!(t.data().iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn desk_encoder_output_shape() {
        let net = Network::encoder(&EncoderConfig::desk(64)).unwrap();
        let p: ParameterSet<f32> = net.init_params(0);
        let out = net.infer(&p, &ramp_batch(4, &[3, 64, 64])).unwrap();
        assert_eq!(out.shape(), &[4, 64]);
    }

    #[test]
    fn zero_weights_give_zero_representation() {
        let net = Network::encoder(&small_encoder()).unwrap();
        let p: ParameterSet<f32> = net.init_params::<f32>(0).zeros_like();
        let out = net.infer(&p, &ramp_batch(3, &[3, 8, 8])).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn duplicated_inputs_give_identical_rows() {
        let net = Network::encoder(&small_encoder()).unwrap();
        let p: ParameterSet<f32> = net.init_params(1);
        let one = ramp_batch(1, &[3, 8, 8]);
        let two = Tensor::stack(&[3, 8, 8], &[one.row(0).to_vec(), one.row(0).to_vec()]).unwrap();
        let out = net.infer(&p, &two).unwrap();
        assert_eq!(out.row(0), out.row(1));
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let net = Network::encoder(&small_encoder()).unwrap();
        let p: ParameterSet<f32> = net.init_params(1);
        assert!(matches!(
            net.infer(&p, &ramp_batch(2, &[3, 9, 8])),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn non_finite_activation_names_the_layer() {
        let net = Network::head(&HeadConfig::new(HeadKind::Projection, vec![4], 2), 3).unwrap();
        let mut p: ParameterSet<f32> = net.init_params(1);
        p.get_mut("fc0.weight").unwrap().data_mut()[0] = f32::INFINITY;
        let x = Tensor::from_vec(&[1, 3], vec![1.0, 1.0, 1.0]).unwrap();
        match net.infer(&p, &x) {
            Err(Error::NonFiniteActivation { layer }) => assert_eq!(layer, "fc0"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn backward_needs_cache_and_respects_detach() {
        let net = Network::head(&HeadConfig::new(HeadKind::Projection, vec![4], 2), 3).unwrap();
        let p: ParameterSet<f64> = net.init_params(1);
        let x = Tensor::from_vec(&[2, 3], vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]).unwrap();
        let up = Tensor::from_vec(&[2, 2], vec![1.0; 4]).unwrap();

        let no_cache = Activations {
            output: net.infer(&p, &x).unwrap(),
            cache: None,
            detached: false,
        };
        assert!(matches!(net.backward(&p, &no_cache, &up), Err(Error::MissingCache)));

        let detached = net.forward(&p, &x).unwrap().detach();
        let g = net.backward(&p, &detached, &up).unwrap();
        assert!(g.params.is_none());
        assert!(g.input.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let net = Network::encoder(&small_encoder()).unwrap();
        let p: ParameterSet<f64> = net.init_params(2);
        let x = ramp_batch(2, &[3, 8, 8]).cast::<f64>();
        let acts = net.forward(&p, &x).unwrap();
        let g = net
            .backward(&p, &acts, &Tensor::zeros(acts.output.shape()))
            .unwrap();
        for (_, t) in g.params.unwrap().iter() {
            assert!(t.data().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn config_validation() {
        let mut c = small_encoder();
        c.representation_width = 8;
        assert!(Network::encoder(&c).is_err());
        let mut c = small_encoder();
        c.stages[1].filters = 32;
        assert!(Network::encoder(&c).is_err());
        assert!(Network::head(&HeadConfig::new(HeadKind::Classifier, vec![], 2), 4).is_err());
    }
}
