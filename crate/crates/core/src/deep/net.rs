use serde::{Deserialize, Serialize};

use super::layers::{self, ConvCache, ConvGeom, PoolCache};
use super::tensor::{Real, Tensor4};
use crate::datasets::ImageShape;
use crate::error::{Error, Result};
use crate::numerics::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv { filters: usize, kernel: usize, stride: usize, pad: usize },
    Relu,
    MaxPool { size: usize, stride: usize },
    /// Linear projection onto one unit per bit.
    Hash { bits: usize },
    Sigmoid,
    /// Linear classifier producing the logits for the loss.
    Classifier { classes: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetSpec {
    pub input: ImageShape,
    pub layers: Vec<LayerSpec>,
}

impl NetSpec {
    /// Three 5x5 conv/ReLU/pool stages with 32, 32 and 64 filters, then the
    /// hash projection, the sigmoid and a classifier.
    pub fn standard(input: ImageShape, bits: usize, classes: usize) -> Self {
        let mut layers = Vec::new();
        for filters in [32, 32, 64] {
            layers.push(LayerSpec::Conv { filters, kernel: 5, stride: 1, pad: 2 });
            layers.push(LayerSpec::Relu);
            layers.push(LayerSpec::MaxPool { size: 2, stride: 2 });
        }
        layers.push(LayerSpec::Hash { bits });
        layers.push(LayerSpec::Sigmoid);
        layers.push(LayerSpec::Classifier { classes });
        NetSpec { input, layers }
    }

    /// Number of code bits, i.e. the width of the hash layer.
    pub fn bits(&self) -> Option<usize> {
        self.layers.iter().find_map(|l| match l {
            LayerSpec::Hash { bits } => Some(*bits),
            _ => None,
        })
    }

    pub fn classes(&self) -> Option<usize> {
        match self.layers.last() {
            Some(LayerSpec::Classifier { classes }) => Some(*classes),
            _ => None,
        }
    }

    fn sigmoid_index(&self) -> usize {
        self.layers.iter().position(|l| *l == LayerSpec::Sigmoid).expect("validated spec")
    }

    /// Checks the layer ordering and returns the activation dims
    /// `(channels, height, width)` after every layer.
    pub fn validate(&self) -> Result<Vec<[usize; 3]>> {
        let count = |f: fn(&LayerSpec) -> bool| self.layers.iter().filter(|l| f(l)).count();
        if count(|l| matches!(l, LayerSpec::Sigmoid)) != 1 || count(|l| matches!(l, LayerSpec::Hash { .. })) != 1 {
            return Err(Error::invalid("network needs exactly one hash layer and one sigmoid"));
        }
        let h = self.layers.iter().position(|l| matches!(l, LayerSpec::Hash { .. })).unwrap();
        if self.layers.get(h + 1) != Some(&LayerSpec::Sigmoid) {
            return Err(Error::invalid("the sigmoid must directly follow the hash layer"));
        }
        if count(|l| matches!(l, LayerSpec::Classifier { .. })) != 1 || self.classes().is_none() {
            return Err(Error::invalid("network must end with its only classifier layer"));
        }
        let ImageShape { channels, height, width } = self.input;
        let mut cur = [channels, height, width];
        let mut dims = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            cur = match *layer {
                LayerSpec::Conv { filters, kernel, stride, pad } => {
                    if i > h || filters == 0 {
                        return Err(Error::invalid("convolutions must precede the hash layer and have filters"));
                    }
                    let g = ConvGeom { in_channels: cur[0], filters, kernel, stride, pad };
                    let (oh, ow) = g.output_hw(cur[1], cur[2])?;
                    [filters, oh, ow]
                }
                LayerSpec::MaxPool { size, stride } => {
                    if size == 0 || stride == 0 || cur[1] < size || cur[2] < size {
                        return Err(Error::invalid(format!("pooling {size}/{stride} does not fit {}x{}", cur[1], cur[2])));
                    }
                    [cur[0], (cur[1] - size) / stride + 1, (cur[2] - size) / stride + 1]
                }
                LayerSpec::Relu | LayerSpec::Sigmoid => cur,
                LayerSpec::Hash { bits } => {
                    if bits == 0 || bits > crate::codes::MAX_BITS {
                        return Err(Error::invalid(format!("hash width {bits} outside 1..={}", crate::codes::MAX_BITS)));
                    }
                    [bits, 1, 1]
                }
                LayerSpec::Classifier { classes } => {
                    if classes < 2 {
                        return Err(Error::invalid("classifier needs at least two classes"));
                    }
                    [classes, 1, 1]
                }
            };
            dims.push(cur);
        }
        Ok(dims)
    }

    /// Names and lengths of the parameter blocks, in layer order.
    pub fn param_layout(&self) -> Result<Vec<(String, Vec<usize>)>> {
        let dims = self.validate()?;
        let mut out = Vec::new();
        let mut conv = 0;
        let mut prev = [self.input.channels, self.input.height, self.input.width];
        for (layer, d) in self.layers.iter().zip(&dims) {
            match *layer {
                LayerSpec::Conv { filters, kernel, .. } => {
                    conv += 1;
                    out.push((format!("conv{conv}.weight"), vec![filters, prev[0], kernel, kernel]));
                    out.push((format!("conv{conv}.bias"), vec![filters]));
                }
                LayerSpec::Hash { bits } => {
                    out.push(("hash.weight".into(), vec![bits, prev.iter().product()]));
                    out.push(("hash.bias".into(), vec![bits]));
                }
                LayerSpec::Classifier { classes } => {
                    out.push(("classifier.weight".into(), vec![classes, prev.iter().product()]));
                    out.push(("classifier.bias".into(), vec![classes]));
                }
                _ => {}
            }
            prev = *d;
        }
        Ok(out)
    }
}

/// Standard deviation of the initial weights.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightInit {
    /// `sqrt(2 / fan_in)` per layer.
    FanIn,
    Gaussian { std: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamBlock<T> {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: Vec<T>,
}

impl<T> ParamBlock<T> {
    pub fn is_weight(&self) -> bool {
        self.name.ends_with(".weight")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetParams<T> {
    pub blocks: Vec<ParamBlock<T>>,
}

impl<T: Real> NetParams<T> {
    pub fn zeros(spec: &NetSpec) -> Result<Self> {
        let blocks = spec
            .param_layout()?
            .into_iter()
            .map(|(name, dims)| {
                let len = dims.iter().product();
                ParamBlock { name, dims, data: vec![T::zero(); len] }
            })
            .collect();
        Ok(NetParams { blocks })
    }

    /// Gaussian weights per `init`, biases zero.
    pub fn init(spec: &NetSpec, init: WeightInit, rng: &mut Rng) -> Result<Self> {
        let mut p = Self::zeros(spec)?;
        for block in p.blocks.iter_mut().filter(|b| b.is_weight()) {
            let fan_in: usize = block.dims[1..].iter().product();
            let std = match init {
                WeightInit::FanIn => (2.0 / fan_in as f64).sqrt(),
                WeightInit::Gaussian { std } => std,
            };
            for v in &mut block.data {
                *v = T::of(std * rng.gaussian());
            }
        }
        Ok(p)
    }

    pub fn check_against(&self, spec: &NetSpec) -> Result<()> {
        let layout = spec.param_layout()?;
        if layout.len() != self.blocks.len() {
            return Err(Error::shape("NetParams", format!("{} blocks", self.blocks.len()), format!("{} blocks", layout.len())));
        }
        for ((name, dims), b) in layout.iter().zip(&self.blocks) {
            if *name != b.name || *dims != b.dims || b.data.len() != dims.iter().product::<usize>() {
                return Err(Error::shape("NetParams", format!("{} {:?}", b.name, b.dims), format!("{name} {dims:?}")));
            }
        }
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> NetParams<U> {
        NetParams {
            blocks: self
                .blocks
                .iter()
                .map(|b| ParamBlock {
                    name: b.name.clone(),
                    dims: b.dims.clone(),
                    data: b.data.iter().map(|v| U::of(v.f64())).collect(),
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.blocks.iter().map(|b| b.data.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_finite(&self) -> bool {
        self.blocks.iter().all(|b| b.data.iter().all(|v| v.is_finite()))
    }
}

enum Cache<T> {
    Conv(ConvCache<T>),
    Pool(PoolCache),
    /// Forward output, used by ReLU and sigmoid backward.
    Output(Tensor4<T>),
    /// Layer input, used by the linear layers.
    Input(Tensor4<T>),
}

/// A validated spec bound to its parameters.
pub struct Network<'a, T> {
    pub spec: &'a NetSpec,
    pub params: &'a NetParams<T>,
}

pub struct ForwardPass<T> {
    pub logits: Tensor4<T>,
    pub hash: Tensor4<T>,
    caches: Vec<Cache<T>>,
}

impl<T: Real> ForwardPass<T> {
    /// ReLU signs and pooling winners of this pass. Two passes with equal
    /// patterns lie on the same smooth piece of the network.
    pub fn kink_pattern(&self) -> Vec<u32> {
        let mut out = Vec::new();
        for c in &self.caches {
            match c {
                Cache::Pool(p) => out.extend_from_slice(p.argmax()),
                Cache::Output(y) => out.extend(y.data.iter().map(|&v| u32::from(v > T::zero()))),
                _ => {}
            }
        }
        out
    }
}

impl<'a, T: Real> Network<'a, T> {
    pub fn new(spec: &'a NetSpec, params: &'a NetParams<T>) -> Result<Self> {
        params.check_against(spec)?;
        Ok(Network { spec, params })
    }

    fn check_input(&self, x: &Tensor4<T>) -> Result<()> {
        let s = self.spec.input;
        if x.dims[1..] != [s.channels, s.height, s.width] {
            return Err(Error::shape("network input", format!("{:?}", &x.dims[1..]), format!("{:?}", [s.channels, s.height, s.width])));
        }
        Ok(())
    }

    /// Runs layers `0..stop`, recording caches when asked.
    fn run(&self, x: &Tensor4<T>, stop: usize, caches: Option<&mut Vec<Cache<T>>>) -> Result<(Tensor4<T>, Option<Tensor4<T>>)> {
        self.check_input(x)?;
        let mut caches = caches;
        let mut block = 0;
        let mut cur = x.clone();
        let mut hash = None;
        for layer in &self.spec.layers[..stop] {
            let next = match *layer {
                LayerSpec::Conv { filters, kernel, stride, pad } => {
                    let g = ConvGeom { in_channels: cur.dims[1], filters, kernel, stride, pad };
                    let (w, b) = (&self.params.blocks[block].data, &self.params.blocks[block + 1].data);
                    block += 2;
                    let (y, c) = layers::conv2d_forward(&cur, w, b, &g)?;
                    if let Some(cs) = caches.as_deref_mut() {
                        cs.push(Cache::Conv(c));
                    }
                    y
                }
                LayerSpec::MaxPool { size, stride } => {
                    let (y, c) = layers::maxpool_forward(&cur, size, stride)?;
                    if let Some(cs) = caches.as_deref_mut() {
                        cs.push(Cache::Pool(c));
                    }
                    y
                }
                LayerSpec::Relu | LayerSpec::Sigmoid => {
                    let y = if *layer == LayerSpec::Relu {
                        layers::relu_forward(&cur)
                    } else {
                        layers::sigmoid_forward(&cur)
                    };
                    if *layer == LayerSpec::Sigmoid {
                        hash = Some(y.clone());
                    }
                    if let Some(cs) = caches.as_deref_mut() {
                        cs.push(Cache::Output(y.clone()));
                    }
                    y
                }
                LayerSpec::Hash { bits: units } | LayerSpec::Classifier { classes: units } => {
                    let (w, b) = (&self.params.blocks[block].data, &self.params.blocks[block + 1].data);
                    block += 2;
                    let y = layers::fc_forward(&cur, w, b, units)?;
                    if let Some(cs) = caches.as_deref_mut() {
                        cs.push(Cache::Input(std::mem::replace(&mut cur, Tensor4::zeros([0, 0, 0, 0]))));
                    }
                    y
                }
            };
            cur = next;
        }
        Ok((cur, hash))
    }

    /// Sigmoid hash activations, shape `(batch, bits, 1, 1)`.
    pub fn hash_activations(&self, x: &Tensor4<T>) -> Result<Tensor4<T>> {
        let stop = self.spec.sigmoid_index() + 1;
        Ok(self.run(x, stop, None)?.0)
    }

    pub fn logits(&self, x: &Tensor4<T>) -> Result<Tensor4<T>> {
        Ok(self.run(x, self.spec.layers.len(), None)?.0)
    }

    pub fn forward(&self, x: &Tensor4<T>) -> Result<ForwardPass<T>> {
        let mut caches = Vec::with_capacity(self.spec.layers.len());
        let (logits, hash) = self.run(x, self.spec.layers.len(), Some(&mut caches))?;
        Ok(ForwardPass {
            logits,
            hash: hash.expect("validated spec has a sigmoid"),
            caches,
        })
    }

    /// Gradients of every parameter block given the gradient at the logits.
    pub fn backward(&self, pass: ForwardPass<T>, dlogits: Tensor4<T>) -> Result<Vec<Vec<T>>> {
        let mut grads: Vec<Vec<T>> = vec![Vec::new(); self.params.blocks.len()];
        let mut block = self.params.blocks.len();
        let mut d = dlogits;
        for (layer, cache) in self.spec.layers.iter().zip(pass.caches).rev() {
            d = match (*layer, cache) {
                (LayerSpec::Conv { filters, kernel, stride, pad }, Cache::Conv(c)) => {
                    block -= 2;
                    let w = &self.params.blocks[block].data;
                    let g = ConvGeom { in_channels: w.len() / (filters * kernel * kernel), filters, kernel, stride, pad };
                    let r = layers::conv2d_backward(&d, w, &c, &g)?;
                    grads[block] = r.weight;
                    grads[block + 1] = r.bias;
                    r.input
                }
                (LayerSpec::MaxPool { .. }, Cache::Pool(c)) => layers::maxpool_backward(&d, &c)?,
                (LayerSpec::Relu, Cache::Output(y)) => layers::relu_backward(&d, &y)?,
                (LayerSpec::Sigmoid, Cache::Output(y)) => layers::sigmoid_backward(&d, &y)?,
                (LayerSpec::Hash { bits: units } | LayerSpec::Classifier { classes: units }, Cache::Input(x)) => {
                    block -= 2;
                    let r = layers::fc_backward(&d, &x, &self.params.blocks[block].data, units)?;
                    grads[block] = r.weight;
                    grads[block + 1] = r.bias;
                    r.input.reshaped(x.dims)?
                }
                _ => unreachable!("cache kind follows layer kind"),
            };
        }
        Ok(grads)
    }

    /// Mean loss, parameter gradients and the batch's predicted classes.
    pub fn loss_and_grads(&self, x: &Tensor4<T>, labels: &[u8]) -> Result<(T, Vec<Vec<T>>, Vec<usize>)> {
        let pass = self.forward(x)?;
        let (loss, dlogits, predicted) = layers::softmax_xent(&pass.logits, labels)?;
        let grads = self.backward(pass, dlogits)?;
        Ok((loss, grads, predicted))
    }
}
