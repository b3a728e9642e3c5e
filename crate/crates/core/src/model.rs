//! Method dispatch, fitting, and the `HLMD` model container.
//!
//! Layout: `"HLMD"`, u8 version, u32 header length, UTF-8 JSON header,
//! u32 tensor count, then per tensor a u16-prefixed name, u8 rank, u64
//! dims, and the values as one feature-file block (rows = first dim).

use std::cell::OnceCell;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{itq_from_pca, lsh_fit, sh_from_pca, sklsh_fit, ItqModel, LshModel, PcaModel, ShMode, ShModel, SklshModel};
use crate::codes::{BinaryCodeSet, HashEncoder};
use crate::datasets::{decode_matrix, encode_matrix, FeatureKind, LabeledDataset, Preprocessor, FEATURE_VERSION_F32, FEATURE_VERSION_F64};
use crate::deep::{train_with, DeepHashModel, EpochLog, NetParams, NetSpec, ParamBlock, TrainConfig};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

pub const MODEL_MAGIC: &[u8; 4] = b"HLMD";
pub const MODEL_VERSION: u8 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Lsh,
    Pcah,
    Itq,
    Sh,
    Sklsh,
    Deep,
}

impl Method {
    pub const ALL: [Method; 6] = [Method::Lsh, Method::Pcah, Method::Itq, Method::Sh, Method::Sklsh, Method::Deep];

    pub fn name(self) -> &'static str {
        match self {
            Method::Lsh => "lsh",
            Method::Pcah => "pcah",
            Method::Itq => "itq",
            Method::Sh => "sh",
            Method::Sklsh => "sklsh",
            Method::Deep => "deep",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown method {s:?}; expected one of lsh, pcah, itq, sh, sklsh, deep")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum HashModel {
    Lsh(LshModel),
    Pcah(PcaModel),
    Itq(ItqModel),
    Sh(ShModel),
    Sklsh(SklshModel),
    Deep(DeepHashModel),
}

impl HashModel {
    pub fn method(&self) -> Method {
        match self {
            HashModel::Lsh(_) => Method::Lsh,
            HashModel::Pcah(_) => Method::Pcah,
            HashModel::Itq(_) => Method::Itq,
            HashModel::Sh(_) => Method::Sh,
            HashModel::Sklsh(_) => Method::Sklsh,
            HashModel::Deep(_) => Method::Deep,
        }
    }

    pub fn encoder(&self) -> &dyn HashEncoder {
        match self {
            HashModel::Lsh(m) => m,
            HashModel::Pcah(m) => m,
            HashModel::Itq(m) => m,
            HashModel::Sh(m) => m,
            HashModel::Sklsh(m) => m,
            HashModel::Deep(m) => m,
        }
    }
}

/// A fitted model plus the preprocessing its inputs need.
#[derive(Clone, Debug, PartialEq)]
pub struct StoredModel {
    pub seed: u64,
    pub preprocessor: Option<Preprocessor>,
    pub model: HashModel,
}

impl StoredModel {
    pub fn method(&self) -> Method {
        self.model.method()
    }

    pub fn bits(&self) -> usize {
        self.model.encoder().bits()
    }

    pub fn input_dim(&self) -> usize {
        self.model.encoder().input_dim()
    }

    /// Preprocesses raw rows and encodes them.
    pub fn encode(&self, x: &Matrix) -> Result<BinaryCodeSet> {
        let enc = self.model.encoder();
        if x.cols() != enc.input_dim() {
            return Err(Error::shape("encode", format!("model expects d={}", enc.input_dim()), format!("data has d={}", x.cols())));
        }
        match &self.preprocessor {
            Some(p) => enc.encode(&p.apply(x)?),
            None => enc.encode(x),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut tensors = TensorList::default();
        if let Some(mean) = self.preprocessor.as_ref().and_then(|p| p.mean.as_ref()) {
            tensors.vector("preprocess.mean", mean);
        }
        let mut header = Header {
            method: self.method(),
            bits: self.bits(),
            input_dim: self.input_dim(),
            seed: self.seed,
            preprocess: self.preprocessor.as_ref().map(|p| PreprocessHeader { center: p.mean.is_some(), unit_norm: p.unit_norm }),
            sh_modes: None,
            net: None,
        };
        match &self.model {
            HashModel::Lsh(m) => tensors.matrix("lsh.w", &m.w),
            HashModel::Pcah(p) => tensors.pca(p),
            HashModel::Itq(m) => {
                tensors.pca(&m.pca);
                tensors.matrix("itq.rotation", &m.rotation);
            }
            HashModel::Sh(m) => {
                tensors.pca(&m.pca);
                tensors.vector("sh.mins", &m.mins);
                tensors.vector("sh.maxs", &m.maxs);
                header.sh_modes = Some(m.modes.iter().map(|s| [s.direction, s.harmonic]).collect());
            }
            HashModel::Sklsh(m) => {
                tensors.matrix("sklsh.w", &m.w);
                tensors.vector("sklsh.b", &m.b);
                tensors.vector("sklsh.t", &m.t);
                tensors.vector("sklsh.bandwidth", &[m.bandwidth]);
            }
            HashModel::Deep(m) => {
                header.net = Some(m.spec.clone());
                for b in &m.params.blocks {
                    let data = b.data.iter().map(|&v| f64::from(v)).collect();
                    tensors.push(&b.name, b.dims.clone(), data, FEATURE_VERSION_F32);
                }
            }
        }
        let header = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::new();
        out.extend_from_slice(MODEL_MAGIC);
        out.push(MODEL_VERSION);
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&(tensors.0.len() as u32).to_le_bytes());
        for t in &tensors.0 {
            out.extend_from_slice(&(t.name.len() as u16).to_le_bytes());
            out.extend_from_slice(t.name.as_bytes());
            out.push(t.dims.len() as u8);
            for &d in &t.dims {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            out.extend_from_slice(&t.block);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let bad = |reason: String| Error::format("model", path, reason);
        let mut r = Reader { bytes, pos: 0, path };
        if r.take(4)? != MODEL_MAGIC {
            return Err(bad("missing HLMD header".into()));
        }
        let version = r.take(1)?[0];
        if version != MODEL_VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let hlen = r.u32()? as usize;
        let header: Header = serde_json::from_slice(r.take(hlen)?).map_err(|e| bad(format!("header: {e}")))?;
        let count = r.u32()? as usize;
        let mut tensors = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let nlen = r.u16()? as usize;
            let name = String::from_utf8(r.take(nlen)?.to_vec()).map_err(|_| bad("tensor name is not UTF-8".into()))?;
            let rank = r.take(1)?[0] as usize;
            let dims = (0..rank).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let (m, used) = decode_matrix(&bytes[r.pos..], path)?;
            r.pos += used;
            if dims.iter().product::<usize>() != m.as_slice().len() || dims.first().is_some_and(|&d| d != m.rows()) {
                return Err(bad(format!("tensor {name}: dims {dims:?} disagree with its {} block", m.shape_str())));
            }
            tensors.push((name, dims, m));
        }
        if r.pos != bytes.len() {
            return Err(bad(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        let model = Self::assemble(header, tensors).map_err(|e| match e {
            Error::Format { .. } => e,
            other => bad(other.to_string()),
        })?;
        Ok(model)
    }

    fn assemble(header: Header, tensors: Vec<(String, Vec<usize>, Matrix)>) -> Result<Self> {
        let mut t = Tensors(tensors);
        let preprocessor = match &header.preprocess {
            Some(p) => Some(Preprocessor {
                mean: if p.center { Some(t.vector("preprocess.mean")?) } else { None },
                unit_norm: p.unit_norm,
            }),
            None => None,
        };
        let model = match header.method {
            Method::Lsh => HashModel::Lsh(LshModel { w: t.matrix("lsh.w")? }),
            Method::Pcah => HashModel::Pcah(t.pca()?),
            Method::Itq => {
                let pca = t.pca()?;
                HashModel::Itq(ItqModel { pca, rotation: t.matrix("itq.rotation")? })
            }
            Method::Sh => {
                let pca = t.pca()?;
                let modes = header
                    .sh_modes
                    .clone()
                    .ok_or_else(|| Error::invalid("spectral model without modes"))?
                    .into_iter()
                    .map(|[direction, harmonic]| ShMode { direction, harmonic })
                    .collect();
                HashModel::Sh(ShModel { pca, mins: t.vector("sh.mins")?, maxs: t.vector("sh.maxs")?, modes })
            }
            Method::Sklsh => {
                let bw = t.vector("sklsh.bandwidth")?;
                HashModel::Sklsh(SklshModel {
                    w: t.matrix("sklsh.w")?,
                    b: t.vector("sklsh.b")?,
                    t: t.vector("sklsh.t")?,
                    bandwidth: *bw.first().ok_or_else(|| Error::invalid("empty bandwidth"))?,
                })
            }
            Method::Deep => {
                let spec = header.net.clone().ok_or_else(|| Error::invalid("network model without a spec"))?;
                let blocks = std::mem::take(&mut t.0)
                    .into_iter()
                    .map(|(name, dims, m)| ParamBlock { name, dims, data: m.as_slice().iter().map(|&v| v as f32).collect() })
                    .collect();
                HashModel::Deep(DeepHashModel::new(spec, NetParams { blocks })?)
            }
        };
        if !t.0.is_empty() {
            return Err(Error::invalid(format!("unexpected tensor {}", t.0[0].0)));
        }
        let stored = StoredModel { seed: header.seed, preprocessor, model };
        stored.check(&header)?;
        Ok(stored)
    }

    /// Cross-checks tensor shapes against each other and the header.
    fn check(&self, header: &Header) -> Result<()> {
        let (d, m) = (header.input_dim, header.bits);
        let pca_ok = |p: &PcaModel| p.mean.len() == d && p.components.rows() == d && p.eigenvalues.len() == p.components.cols();
        let ok = match &self.model {
            HashModel::Lsh(l) => l.w.shape() == (d, m),
            HashModel::Pcah(p) => pca_ok(p) && p.components.cols() == m,
            HashModel::Itq(i) => pca_ok(&i.pca) && i.pca.components.cols() == m && i.rotation.shape() == (m, m),
            HashModel::Sh(s) => {
                let k = s.pca.components.cols();
                pca_ok(&s.pca)
                    && s.mins.len() == k
                    && s.maxs.len() == k
                    && s.modes.len() == m
                    && s.modes.iter().all(|x| x.direction < k && x.harmonic >= 1)
            }
            HashModel::Sklsh(s) => s.w.shape() == (d, m) && s.b.len() == m && s.t.len() == m && s.bandwidth > 0.0,
            HashModel::Deep(n) => n.spec.input.len() == d && n.spec.bits() == Some(m),
        };
        let pre_ok = self.preprocessor.as_ref().and_then(|p| p.mean.as_ref()).is_none_or(|mean| mean.len() == d);
        if !ok || !pre_ok || m == 0 || m > crate::codes::MAX_BITS {
            return Err(Error::invalid(format!("tensor shapes disagree with a {d}-dimensional {m}-bit {} model", header.method)));
        }
        Ok(())
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    method: Method,
    bits: usize,
    input_dim: usize,
    seed: u64,
    preprocess: Option<PreprocessHeader>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sh_modes: Option<Vec<[usize; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    net: Option<NetSpec>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PreprocessHeader {
    center: bool,
    unit_norm: bool,
}

struct EncodedTensor {
    name: String,
    dims: Vec<usize>,
    block: Vec<u8>,
}

#[derive(Default)]
struct TensorList(Vec<EncodedTensor>);

impl TensorList {
    fn push(&mut self, name: &str, dims: Vec<usize>, data: Vec<f64>, version: u8) {
        let rows = dims.first().copied().unwrap_or(1);
        let cols = data.len().checked_div(rows).unwrap_or(0);
        let m = Matrix::new(rows, cols, data).expect("finite model parameters");
        self.0.push(EncodedTensor { name: name.into(), dims, block: encode_matrix(&m, version) });
    }

    fn matrix(&mut self, name: &str, m: &Matrix) {
        self.push(name, vec![m.rows(), m.cols()], m.as_slice().to_vec(), FEATURE_VERSION_F64);
    }

    fn vector(&mut self, name: &str, v: &[f64]) {
        self.push(name, vec![v.len()], v.to_vec(), FEATURE_VERSION_F64);
    }

    fn pca(&mut self, p: &PcaModel) {
        self.vector("pca.mean", &p.mean);
        self.matrix("pca.components", &p.components);
        self.vector("pca.eigenvalues", &p.eigenvalues);
    }
}

struct Tensors(Vec<(String, Vec<usize>, Matrix)>);

impl Tensors {
    fn take(&mut self, name: &str) -> Result<(Vec<usize>, Matrix)> {
        let i = self
            .0
            .iter()
            .position(|(n, _, _)| n == name)
            .ok_or_else(|| Error::invalid(format!("missing tensor {name}")))?;
        let (_, dims, m) = self.0.remove(i);
        Ok((dims, m))
    }

    fn matrix(&mut self, name: &str) -> Result<Matrix> {
        let (dims, m) = self.take(name)?;
        if dims.len() != 2 {
            return Err(Error::invalid(format!("tensor {name} should be 2-D, has dims {dims:?}")));
        }
        Ok(m)
    }

    fn vector(&mut self, name: &str) -> Result<Vec<f64>> {
        let (dims, m) = self.take(name)?;
        if dims.len() != 1 {
            return Err(Error::invalid(format!("tensor {name} should be 1-D, has dims {dims:?}")));
        }
        Ok(m.into_vec())
    }

    fn pca(&mut self) -> Result<PcaModel> {
        Ok(PcaModel {
            mean: self.vector("pca.mean")?,
            components: self.matrix("pca.components")?,
            eigenvalues: self.vector("pca.eigenvalues")?,
        })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::format("model", self.path, "truncated file"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitOptions {
    pub itq_iterations: usize,
    /// Center and unit-normalize features before the baselines.
    pub center: bool,
    pub unit_norm: bool,
    /// Classifier width for the network; defaults to one past the largest
    /// training label.
    pub classes: Option<usize>,
    pub train: TrainConfig,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            itq_iterations: crate::baselines::DEFAULT_ITQ_ITERS,
            center: true,
            unit_norm: true,
            classes: None,
            train: TrainConfig::default(),
        }
    }
}

/// Fits any method on one training set, reusing the preprocessed
/// features and the full PCA between calls.
pub struct Fitter<'a> {
    data: &'a LabeledDataset,
    opts: FitOptions,
    prepared: OnceCell<(Preprocessor, Matrix)>,
    pca: OnceCell<PcaModel>,
}

pub struct Fitted {
    pub model: StoredModel,
    /// Per-epoch log for the network; empty for the baselines.
    pub log: Vec<EpochLog>,
}

impl<'a> Fitter<'a> {
    pub fn new(data: &'a LabeledDataset, opts: FitOptions) -> Self {
        Fitter { data, opts, prepared: OnceCell::new(), pca: OnceCell::new() }
    }

    fn prepared(&self) -> Result<&(Preprocessor, Matrix)> {
        if let Some(p) = self.prepared.get() {
            return Ok(p);
        }
        let pre = Preprocessor::fit(&self.data.features, self.opts.center, self.opts.unit_norm);
        let x = pre.apply(&self.data.features)?;
        Ok(self.prepared.get_or_init(|| (pre, x)))
    }

    fn full_pca(&self) -> Result<&PcaModel> {
        if let Some(p) = self.pca.get() {
            return Ok(p);
        }
        let p = PcaModel::fit_full(&self.prepared()?.1)?;
        Ok(self.pca.get_or_init(|| p))
    }

    fn pca(&self, m: usize) -> Result<PcaModel> {
        let full = self.full_pca()?;
        if m > full.n_components() {
            return Err(Error::invalid(format!("{m} bits exceed the feature dimension {}", full.n_components())));
        }
        Ok(full.truncate(m))
    }

    pub fn fit(&self, method: Method, bits: usize, seed: u64) -> Result<Fitted> {
        self.fit_with(method, bits, seed, |_| {})
    }

    pub fn fit_with(&self, method: Method, bits: usize, seed: u64, on_epoch: impl FnMut(&EpochLog)) -> Result<Fitted> {
        if bits == 0 || bits > crate::codes::MAX_BITS {
            return Err(Error::invalid(format!("bits must lie in 1..={}, got {bits}", crate::codes::MAX_BITS)));
        }
        if self.data.is_empty() {
            return Err(Error::invalid("cannot fit on an empty dataset"));
        }
        let d = self.data.features.cols();
        if method == Method::Deep {
            return self.fit_deep(bits, seed, on_epoch);
        }
        let (pre, x) = self.prepared()?;
        let model = match method {
            Method::Lsh => HashModel::Lsh(lsh_fit(d, bits, seed)?),
            Method::Pcah => HashModel::Pcah(self.pca(bits)?),
            Method::Itq => HashModel::Itq(itq_from_pca(self.pca(bits)?, x, self.opts.itq_iterations, seed)?.0),
            Method::Sh => HashModel::Sh(sh_from_pca(self.pca(bits.min(d))?, x, bits)?),
            Method::Sklsh => HashModel::Sklsh(sklsh_fit(x, bits, seed)?),
            Method::Deep => unreachable!(),
        };
        Ok(Fitted {
            model: StoredModel { seed, preprocessor: Some(pre.clone()), model },
            log: Vec::new(),
        })
    }

    fn fit_deep(&self, bits: usize, seed: u64, on_epoch: impl FnMut(&EpochLog)) -> Result<Fitted> {
        let data = self.data;
        if data.kind != FeatureKind::RawPixels {
            return Err(Error::invalid("the network needs raw pixels; this dataset holds precomputed features"));
        }
        let shape = data
            .image_shape
            .ok_or_else(|| Error::invalid("the network needs the image geometry of the dataset"))?;
        let classes = match self.opts.classes {
            Some(c) => c,
            None => usize::from(*data.labels.iter().max().unwrap()) + 1,
        }
        .max(2);
        let spec = NetSpec::standard(shape, bits, classes);
        let cfg = TrainConfig { seed, ..self.opts.train.clone() };
        let trained = train_with(data, &spec, &cfg, on_epoch)?;
        Ok(Fitted {
            model: StoredModel { seed, preprocessor: None, model: HashModel::Deep(DeepHashModel::new(spec, trained.params)?) },
            log: trained.log,
        })
    }
}

/// Convenience wrapper around a single [`Fitter::fit`].
pub fn fit(method: Method, data: &LabeledDataset, bits: usize, seed: u64, opts: &FitOptions) -> Result<Fitted> {
    Fitter::new(data, opts.clone()).fit(method, bits, seed)
}
