//! The wide-and-deep regressor and its two baselines.
//!
//! * `Dwmrpm`: a deep path (dense 300 → 200 → 100, ReLU, dropout after each
//!   hidden layer) and a wide path (one 100-filter, width-5 valid convolution
//!   followed by global average pooling), joined by a linear head
//!   `k_cn·h_cn + k_d·h_d + bias` and trained jointly.
//! * `Mlp`: dense 300 → 200 → 100 with ReLU, then a single linear output.
//! * `Cnn1d`: two 100-filter width-5 convolutions with ReLU, global average
//!   pooling, then a single linear output.
//!
//! All three read the same input: the normalized monthly window followed by
//! latitude and longitude.

use std::fmt;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{NormalizationParams, WindowSample, DEFAULT_WINDOW_MONTHS};
use crate::error::{Error, Result};
use crate::nn::{he_init, DropoutLayer, GradientTape, Mode, ParamId, ParamStore, Var};
use crate::rng::derive_seed;
use crate::tensor::Tensor;

/// Samples per forward pass during inference.
const EVAL_BATCH: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Dwmrpm,
    Mlp,
    #[serde(rename = "cnn")]
    Cnn1d,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Dwmrpm, ModelKind::Mlp, ModelKind::Cnn1d];

    /// Column label used in reports.
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Dwmrpm => "DWMRPM",
            ModelKind::Mlp => "MLP",
            ModelKind::Cnn1d => "CNN",
        }
    }

    pub fn flag(self) -> &'static str {
        match self {
            ModelKind::Dwmrpm => "dwmrpm",
            ModelKind::Mlp => "mlp",
            ModelKind::Cnn1d => "cnn",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dwmrpm" => Ok(ModelKind::Dwmrpm),
            "mlp" => Ok(ModelKind::Mlp),
            "cnn" | "cnn1d" => Ok(ModelKind::Cnn1d),
            _ => Err(Error::Parse(format!("unknown model `{s}`"))),
        }
    }
}

/// Which inputs feed the wide (convolutional) path.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoordsWiring {
    /// Wide and deep paths both see the full window plus coordinates.
    Both,
    /// The wide path sees only the monthly window.
    DeepOnly,
}

impl std::str::FromStr for CoordsWiring {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "both" => Ok(CoordsWiring::Both),
            "deep-only" => Ok(CoordsWiring::DeepOnly),
            _ => Err(Error::Parse(format!("unknown coordinate wiring `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// Window months plus the two coordinates.
    pub input_len: usize,
    pub deep_widths: Vec<usize>,
    pub dropout_rate: f64,
    pub conv_filters: usize,
    pub kernel_len: usize,
    pub conv_layers: usize,
    pub coords_wiring: CoordsWiring,
    /// Scalar bias on the joint head; `false` gives the bare `k_cn·h_cn + k_d·h_d`.
    pub head_bias: bool,
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(kind: ModelKind) -> Self {
        Self {
            kind,
            input_len: DEFAULT_WINDOW_MONTHS + 2,
            deep_widths: vec![300, 200, 100],
            dropout_rate: match kind {
                ModelKind::Dwmrpm => 0.3,
                _ => 0.0,
            },
            conv_filters: 100,
            kernel_len: 5,
            conv_layers: match kind {
                ModelKind::Dwmrpm => 1,
                ModelKind::Mlp => 0,
                ModelKind::Cnn1d => 2,
            },
            coords_wiring: CoordsWiring::Both,
            head_bias: true,
            seed: 0,
        }
    }

    pub fn dwmrpm() -> Self {
        Self::new(ModelKind::Dwmrpm)
    }

    pub fn mlp() -> Self {
        Self::new(ModelKind::Mlp)
    }

    pub fn cnn1d() -> Self {
        Self::new(ModelKind::Cnn1d)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_window(mut self, window_months: usize) -> Self {
        self.input_len = window_months + 2;
        self
    }

    fn wide_input_len(&self) -> usize {
        match self.coords_wiring {
            CoordsWiring::Both => self.input_len,
            CoordsWiring::DeepOnly => self.input_len - 2,
        }
    }

    /// Lengths of the wide path after each convolution.
    pub fn conv_output_lengths(&self) -> Result<Vec<usize>> {
        let mut len = self.wide_input_len();
        let mut out = Vec::with_capacity(self.conv_layers);
        for layer in 0..self.conv_layers {
            if len < self.kernel_len {
                return Err(Error::ShapeMismatch(format!(
                    "convolution {} receives {len} positions, fewer than kernel length {}",
                    layer + 1,
                    self.kernel_len
                )));
            }
            len = len - self.kernel_len + 1;
            out.push(len);
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_len < 3 {
            return Err(Error::InvalidParameter("input must hold at least one month".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidParameter("dropout rate must lie in [0, 1)".into()));
        }
        let needs_deep = matches!(self.kind, ModelKind::Dwmrpm | ModelKind::Mlp);
        let needs_conv = matches!(self.kind, ModelKind::Dwmrpm | ModelKind::Cnn1d);
        if needs_deep && (self.deep_widths.is_empty() || self.deep_widths.contains(&0)) {
            return Err(Error::InvalidParameter("deep widths must be positive".into()));
        }
        if needs_conv {
            if self.conv_layers == 0 || self.conv_filters == 0 || self.kernel_len == 0 {
                return Err(Error::InvalidParameter(
                    "convolutional path needs at least one layer, filter and tap".into(),
                ));
            }
            self.conv_output_lengths()?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Linear {
    w: ParamId,
    b: Option<ParamId>,
}

#[derive(Clone, Debug, PartialEq)]
enum Layout {
    Dwmrpm {
        deep: Vec<Linear>,
        conv: Vec<Linear>,
        k_cn: ParamId,
        k_d: ParamId,
        bias: Option<ParamId>,
    },
    Mlp {
        hidden: Vec<Linear>,
        out: Linear,
    },
    Cnn {
        conv: Vec<Linear>,
        out: Linear,
    },
}

/// Weights of the combining layer `k_cn·h_cn + k_d·h_d + bias`.
#[derive(Clone, Debug, PartialEq)]
pub struct JointHead {
    pub k_cn: Tensor,
    pub k_d: Tensor,
    pub bias: f64,
}

/// Pooled wide-path and last deep-path activations, `(h_cn, h_d)`.
pub type PathFeatures = (Option<Vec<f64>>, Option<Vec<f64>>);

/// Values produced by one forward pass. `wide`/`deep` are the pooled
/// convolution features and last deep activations when the model has them.
#[derive(Clone, Copy, Debug)]
pub struct ForwardVars {
    pub output: Var,
    pub wide: Option<Var>,
    pub deep: Option<Var>,
}

/// An architecture with its parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    spec: ModelSpec,
    params: ParamStore,
    layout: Layout,
}

struct Builder {
    store: ParamStore,
    seed: u64,
}

impl Builder {
    fn he(&mut self, name: &str, shape: &[usize], fan_in: usize) -> Result<ParamId> {
        let seed = derive_seed(self.seed, &[self.store.len() as u64]);
        let t = he_init(shape, fan_in, seed)?;
        Ok(self.store.push(name, t))
    }

    fn zeros(&mut self, name: &str, shape: &[usize]) -> Result<ParamId> {
        Ok(self.store.push(name, Tensor::zeros(shape)?))
    }

    fn dense(&mut self, name: &str, inp: usize, out: usize, bias: bool) -> Result<Linear> {
        let w = self.he(&format!("{name}.weight"), &[out, inp], inp)?;
        let b = if bias {
            Some(self.zeros(&format!("{name}.bias"), &[out])?)
        } else {
            None
        };
        Ok(Linear { w, b })
    }

    fn convs(&mut self, prefix: &str, spec: &ModelSpec) -> Result<Vec<Linear>> {
        let mut channels = 1;
        (0..spec.conv_layers)
            .map(|i| {
                let name = format!("{prefix}.conv{i}");
                let shape = [spec.conv_filters, channels, spec.kernel_len];
                let w = self.he(&format!("{name}.kernel"), &shape, channels * spec.kernel_len)?;
                let b = self.zeros(&format!("{name}.bias"), &[spec.conv_filters])?;
                channels = spec.conv_filters;
                Ok(Linear { w, b: Some(b) })
            })
            .collect()
    }

    fn stack(&mut self, prefix: &str, inp: usize, widths: &[usize]) -> Result<Vec<Linear>> {
        let mut prev = inp;
        widths
            .iter()
            .enumerate()
            .map(|(i, &w)| {
                let l = self.dense(&format!("{prefix}.dense{i}"), prev, w, true);
                prev = w;
                l
            })
            .collect()
    }
}

/// Builds an untrained model: He-normal weights keyed by `spec.seed`, zero biases.
pub fn build_model(spec: &ModelSpec) -> Result<Model> {
    spec.validate()?;
    let mut b = Builder {
        store: ParamStore::new(),
        seed: spec.seed,
    };
    let last_deep = spec.deep_widths.last().copied().unwrap_or(0);
    let layout = match spec.kind {
        ModelKind::Dwmrpm => {
            let deep = b.stack("deep", spec.input_len, &spec.deep_widths)?;
            let conv = b.convs("wide", spec)?;
            let joint = spec.conv_filters + last_deep;
            let k_cn = b.he("head.k_cn", &[1, spec.conv_filters], joint)?;
            let k_d = b.he("head.k_d", &[1, last_deep], joint)?;
            let bias = if spec.head_bias {
                Some(b.zeros("head.bias", &[1])?)
            } else {
                None
            };
            Layout::Dwmrpm {
                deep,
                conv,
                k_cn,
                k_d,
                bias,
            }
        }
        ModelKind::Mlp => {
            let hidden = b.stack("mlp", spec.input_len, &spec.deep_widths)?;
            let out = b.dense("mlp.out", last_deep, 1, true)?;
            Layout::Mlp { hidden, out }
        }
        ModelKind::Cnn1d => {
            let conv = b.convs("cnn", spec)?;
            let out = b.dense("cnn.out", spec.conv_filters, 1, true)?;
            Layout::Cnn { conv, out }
        }
    };
    Ok(Model {
        spec: spec.clone(),
        params: b.store,
        layout,
    })
}

fn apply_linear(tape: &mut GradientTape<'_>, x: Var, l: &Linear) -> Result<Var> {
    let w = tape.param(l.w);
    let b = l.b.map(|b| tape.param(b));
    tape.dense(x, w, b)
}

fn apply_convs(tape: &mut GradientTape<'_>, x: Var, convs: &[Linear], relu: bool) -> Result<Var> {
    let mut h = x;
    for c in convs {
        let k = tape.param(c.w);
        let b = tape.param(c.b.expect("conv bias"));
        h = tape.conv1d(h, k, b)?;
        if relu {
            h = tape.relu(h);
        }
    }
    tape.global_avg_pool(h)
}

impl Model {
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn parameter_count(&self) -> usize {
        self.params.count()
    }

    pub fn tape(&self) -> GradientTape<'_> {
        GradientTape::new(&self.params)
    }

    pub fn joint_head(&self) -> Option<JointHead> {
        match &self.layout {
            Layout::Dwmrpm { k_cn, k_d, bias, .. } => Some(JointHead {
                k_cn: self.params.get(*k_cn).clone(),
                k_d: self.params.get(*k_d).clone(),
                bias: bias.map_or(0.0, |b| self.params.get(b).data()[0]),
            }),
            _ => None,
        }
    }

    fn wide_input(&self, tape: &mut GradientTape<'_>, x: Var) -> Result<Var> {
        let batch = tape.value(x).shape()[0];
        let len = self.spec.wide_input_len();
        let x = if len == self.spec.input_len {
            x
        } else {
            tape.narrow(x, 0, len)?
        };
        tape.reshape(x, vec![batch, 1, len])
    }

    fn deep_path(
        &self,
        tape: &mut GradientTape<'_>,
        x: Var,
        layers: &[Linear],
        dropout: Option<&DropoutLayer>,
        rng: &mut impl Rng,
    ) -> Result<Var> {
        let mut h = x;
        for l in layers {
            h = apply_linear(tape, h, l)?;
            h = tape.relu(h);
            if let Some(d) = dropout {
                h = tape.dropout(h, d, rng);
            }
        }
        Ok(h)
    }

    /// Records a forward pass of a `[batch, input_len]` input on `tape`.
    /// The output is `[batch, 1]`.
    pub fn forward(&self, tape: &mut GradientTape<'_>, x: Var, mode: Mode, rng: &mut impl Rng) -> Result<ForwardVars> {
        match *tape.value(x).shape() {
            [_, n] if n == self.spec.input_len => {}
            ref s => {
                return Err(Error::ShapeMismatch(format!(
                    "model expects [batch, {}], got {s:?}",
                    self.spec.input_len
                )))
            }
        }
        match &self.layout {
            Layout::Dwmrpm {
                deep,
                conv,
                k_cn,
                k_d,
                bias,
            } => {
                let dropout = DropoutLayer::new(self.spec.dropout_rate, mode)?;
                let h_d = self.deep_path(tape, x, deep, Some(&dropout), rng)?;
                let wide_in = self.wide_input(tape, x)?;
                let h_cn = apply_convs(tape, wide_in, conv, false)?;
                let kc = tape.param(*k_cn);
                let kd = tape.param(*k_d);
                let wide_term = tape.dense(h_cn, kc, None)?;
                let b = bias.map(|b| tape.param(b));
                let deep_term = tape.dense(h_d, kd, b)?;
                let output = tape.add(wide_term, deep_term)?;
                Ok(ForwardVars {
                    output,
                    wide: Some(h_cn),
                    deep: Some(h_d),
                })
            }
            Layout::Mlp { hidden, out } => {
                let dropout = DropoutLayer::new(self.spec.dropout_rate, mode)?;
                let h = self.deep_path(tape, x, hidden, Some(&dropout), rng)?;
                let output = apply_linear(tape, h, out)?;
                Ok(ForwardVars {
                    output,
                    wide: None,
                    deep: Some(h),
                })
            }
            Layout::Cnn { conv, out } => {
                let wide_in = self.wide_input(tape, x)?;
                let h = apply_convs(tape, wide_in, conv, true)?;
                let output = apply_linear(tape, h, out)?;
                Ok(ForwardVars {
                    output,
                    wide: Some(h),
                    deep: None,
                })
            }
        }
    }

    fn batch_tensor(&self, inputs: &[&[f64]]) -> Result<Tensor> {
        let n = self.spec.input_len;
        if let Some(bad) = inputs.iter().find(|r| r.len() != n) {
            return Err(Error::ShapeMismatch(format!(
                "sample has {} inputs, model expects {n}",
                bad.len()
            )));
        }
        let data = inputs.iter().flat_map(|r| r.iter().copied()).collect();
        Tensor::new(vec![inputs.len(), n], data)
    }

    /// Eval-mode predictions (normalized scale) for a list of input vectors.
    pub fn predict_inputs(&self, inputs: &[&[f64]]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(inputs.len());
        let mut rng = crate::rng::stream(0, &[]);
        for chunk in inputs.chunks(EVAL_BATCH) {
            let mut tape = self.tape();
            let x = tape.input(self.batch_tensor(chunk)?);
            let f = self.forward(&mut tape, x, Mode::Eval, &mut rng)?;
            out.extend_from_slice(tape.value(f.output).data());
        }
        Ok(out)
    }

    pub fn predict_samples(&self, samples: &[WindowSample]) -> Result<Vec<f64>> {
        let inputs: Vec<&[f64]> = samples.iter().map(|s| s.inputs.as_slice()).collect();
        self.predict_inputs(&inputs)
    }

    /// Eval-mode `(h_cn, h_d)` for a single input vector, recomputed through
    /// each path separately.
    pub fn sub_paths(&self, input: &[f64]) -> Result<PathFeatures> {
        let mut rng = crate::rng::stream(0, &[]);
        let mut tape = self.tape();
        let x = tape.input(self.batch_tensor(&[input])?);
        let (wide, deep) = match &self.layout {
            Layout::Dwmrpm { deep, conv, .. } => {
                let d = self.deep_path(&mut tape, x, deep, None, &mut rng)?;
                let w_in = self.wide_input(&mut tape, x)?;
                let w = apply_convs(&mut tape, w_in, conv, false)?;
                (Some(w), Some(d))
            }
            Layout::Mlp { hidden, .. } => (None, Some(self.deep_path(&mut tape, x, hidden, None, &mut rng)?)),
            Layout::Cnn { conv, .. } => {
                let w_in = self.wide_input(&mut tape, x)?;
                (Some(apply_convs(&mut tape, w_in, conv, true)?), None)
            }
        };
        let get = |v: Option<Var>| v.map(|v| tape.value(v).data().to_vec());
        Ok((get(wide), get(deep)))
    }
}

/// Provenance stored with a trained model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub seed: u64,
    pub epochs: usize,
    /// Epoch whose weights were kept, if any epoch ran.
    pub selected_epoch: Option<usize>,
    /// SHA-256 over the training samples.
    pub data_fingerprint: String,
}

/// Normalized and millimetre prediction for one sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prediction {
    pub normalized: f64,
    pub mm: f64,
}

/// A model bundled with the normalization it was trained under.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainedModel {
    model: Model,
    normalization: NormalizationParams,
    metadata: TrainingMetadata,
}

const FORMAT_TAG: &str = "monsoon-trained-model/1";

#[derive(Serialize, Deserialize)]
struct StoredTensor {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct StoredModel {
    format: String,
    spec: ModelSpec,
    normalization: NormalizationParams,
    metadata: TrainingMetadata,
    parameters: Vec<StoredTensor>,
}

impl TrainedModel {
    pub fn new(model: Model, normalization: NormalizationParams, metadata: TrainingMetadata) -> Self {
        Self {
            model,
            normalization,
            metadata,
        }
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.model.spec
    }

    pub fn normalization(&self) -> &NormalizationParams {
        &self.normalization
    }

    pub fn metadata(&self) -> &TrainingMetadata {
        &self.metadata
    }

    /// Eval-mode prediction, also mapped back to millimetres.
    pub fn predict(&self, sample: &WindowSample) -> Result<Prediction> {
        let normalized = self.model.predict_inputs(&[&sample.inputs])?[0];
        Ok(Prediction {
            normalized,
            mm: self.normalization.denormalize(normalized),
        })
    }

    pub fn predict_all(&self, samples: &[WindowSample]) -> Result<Vec<Prediction>> {
        Ok(self
            .model
            .predict_samples(samples)?
            .into_iter()
            .map(|normalized| Prediction {
                normalized,
                mm: self.normalization.denormalize(normalized),
            })
            .collect())
    }

    /// Self-describing JSON. Reals use shortest round-trip notation, so
    /// [`TrainedModel::from_json`] restores every parameter bit for bit.
    pub fn to_json(&self) -> Result<String> {
        let params = self.model.params();
        let stored = StoredModel {
            format: FORMAT_TAG.into(),
            spec: self.model.spec.clone(),
            normalization: self.normalization,
            metadata: self.metadata.clone(),
            parameters: params
                .ids()
                .map(|id| StoredTensor {
                    name: params.name(id).to_string(),
                    shape: params.get(id).shape().to_vec(),
                    data: params.get(id).data().to_vec(),
                })
                .collect(),
        };
        Ok(serde_json::to_string(&stored)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let stored: StoredModel = serde_json::from_str(text)?;
        if stored.format != FORMAT_TAG {
            return Err(Error::Parse(format!("unsupported model format `{}`", stored.format)));
        }
        let mut model = build_model(&stored.spec)?;
        let mut store = ParamStore::new();
        for t in stored.parameters {
            store.push(t.name, Tensor::new(t.shape, t.data)?);
        }
        model.params.copy_from(&store)?;
        NormalizationParams::new(stored.normalization.i_min(), stored.normalization.i_max())?;
        Ok(Self::new(model, stored.normalization, stored.metadata))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
