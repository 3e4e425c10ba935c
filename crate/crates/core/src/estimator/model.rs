use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::{FeatureConfig, Modality, ModelInput, RAW_STEPS_PER_TIME_STEP};
use crate::nn::{
    Conv2d, Dense, Differentiable, Flatten, Layer, MeanOverTime, NamedArrays, Param, PdcLayer,
    Recurrent, Relu, Sequential, Tensor,
};
use crate::pdc::dilated_locations;
use crate::synth::{ParamGroup, ParameterSpace};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PdcConfig {
    pub enabled: bool,
    pub bins_per_octave: usize,
    pub l: usize,
    pub symmetric: bool,
    pub per_channel: bool,
}

impl Default for PdcConfig {
    fn default() -> Self {
        PdcConfig {
            enabled: true,
            bins_per_octave: 12,
            l: 4,
            symmetric: true,
            per_channel: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub modalities: Vec<Modality>,
    /// Output width of each spectrogram backbone.
    pub conv_dim: usize,
    /// Output width of the recurrent, statistics and waveform encoders.
    pub aux_dim: usize,
    pub conv_channels: Vec<usize>,
    /// Width of the dense layer after concatenation.
    pub trunk_dim: usize,
    /// Local features per group.
    pub group_dim: usize,
    pub head_dim: usize,
    pub pdc: PdcConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            modalities: vec![Modality::Stft, Modality::Mel, Modality::Cqt, Modality::Mfcc, Modality::Stats],
            conv_dim: 64,
            aux_dim: 32,
            conv_channels: vec![4, 8, 8],
            trunk_dim: 256,
            group_dim: 64,
            head_dim: 64,
            pdc: PdcConfig::default(),
        }
    }
}

impl ModelConfig {
    /// Widths of the full-size estimator: 512-wide backbones, 128-wide
    /// auxiliary encoders, a 2048-wide global feature and 64 per group.
    pub fn full_size() -> Self {
        ModelConfig {
            conv_dim: 512,
            aux_dim: 128,
            conv_channels: vec![16, 32, 64],
            trunk_dim: 2048,
            group_dim: 64,
            head_dim: 64,
            ..Self::default()
        }
    }

    pub fn backbone_dim(&self, m: Modality) -> usize {
        match m {
            Modality::Stft | Modality::Mel | Modality::Cqt => self.conv_dim,
            Modality::Mfcc | Modality::Stats | Modality::Raw => self.aux_dim,
        }
    }

    /// Sum of backbone output widths.
    pub fn global_dim(&self) -> usize {
        self.modalities.iter().map(|&m| self.backbone_dim(m)).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(format!("model: {msg}")));
        if self.modalities.is_empty() {
            return bad("at least one modality must be enabled");
        }
        let mut sorted = self.modalities.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != self.modalities.len() {
            return bad("modalities repeat");
        }
        if self.conv_channels.is_empty() || self.conv_channels.contains(&0) {
            return bad("conv_channels must be non-empty and positive");
        }
        if [self.conv_dim, self.aux_dim, self.trunk_dim, self.group_dim, self.head_dim].contains(&0) {
            return bad("layer widths must be positive");
        }
        if self.modalities.contains(&Modality::Stats) && self.aux_dim % 4 != 0 {
            return bad("aux_dim must split evenly over the four statistics tracks");
        }
        if self.pdc.bins_per_octave == 0 || self.pdc.l == 0 {
            return bad("pdc needs B >= 1 and l >= 1");
        }
        Ok(())
    }
}

struct Head {
    descriptor: usize,
    group: usize,
    net: Sequential,
}

/// The multi-modal estimator.
///
/// Each enabled modality goes through its own encoder; the encodings are
/// concatenated into the global feature, passed through one dense layer,
/// then split into one block of local features per parameter group
/// (operator or global). A block-diagonal layer keeps groups apart, and
/// every free parameter reads only its own group through a small head.
pub struct EstimatorNet {
    config: ModelConfig,
    features: FeatureConfig,
    space: Arc<ParameterSpace>,
    groups: Vec<ParamGroup>,
    backbones: Vec<(Modality, Sequential)>,
    stats_tracks: Vec<Sequential>,
    trunk: Sequential,
    split: Sequential,
    local: Sequential,
    heads: Vec<Head>,
    /// Input widths recorded by the last forward pass.
    widths: Vec<usize>,
    local_out: Option<Tensor>,
}

fn conv_stack(
    cfg: &ModelConfig,
    input: [usize; 3],
    time_only: bool,
    pdc: bool,
    rng: &mut ChaCha8Rng,
) -> Result<Sequential> {
    let mut seq = Sequential::new();
    let mut shape = input;
    let mut c_in = input[0];
    let stride = if time_only { (1, 2) } else { (2, 2) };
    for &c in &cfg.conv_channels {
        let conv = Conv2d::new(c_in, c, (3, 3), stride, (1, 1), rng);
        shape = conv.output_shape(&shape)?;
        seq = seq.push(conv);
        if pdc {
            let locs = dilated_locations(cfg.pdc.bins_per_octave, cfg.pdc.l, cfg.pdc.symmetric);
            seq = if cfg.pdc.per_channel {
                seq.push(PdcLayer::per_channel(locs, c, rng))
            } else {
                seq.push(PdcLayer::new(locs, rng))
            };
        }
        seq = seq.push(Relu::new());
        c_in = c;
    }
    let flat = if time_only {
        seq = seq.push(MeanOverTime::new());
        shape[0] * shape[1]
    } else {
        seq = seq.push(Flatten::new());
        shape.iter().product()
    };
    Ok(seq.push(Dense::new(flat, cfg.conv_dim, rng)).push(Relu::new()))
}

impl EstimatorNet {
    pub fn new(
        config: ModelConfig,
        features: FeatureConfig,
        space: Arc<ParameterSpace>,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        features.validate()?;
        if config.pdc.enabled
            && config.modalities.contains(&Modality::Cqt)
            && config.pdc.bins_per_octave != features.cqt.bins_per_octave
        {
            return Err(Error::BinsPerOctaveMismatch {
                input: features.cqt.bins_per_octave,
                filter: config.pdc.bins_per_octave,
            });
        }
        if config.modalities.contains(&Modality::Raw) && features.raw_block.is_none() {
            return Err(Error::InvalidConfig("model: raw modality needs features.raw_block".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = features.time_steps;
        let mut backbones = Vec::new();
        let mut stats_tracks = Vec::new();
        for &m in &config.modalities {
            match m {
                Modality::Stft => backbones.push((m, conv_stack(&config, [1, features.stft_bins, t], false, false, &mut rng)?)),
                Modality::Mel => backbones.push((m, conv_stack(&config, [1, features.mel.n_mels, t], false, false, &mut rng)?)),
                Modality::Cqt => backbones.push((
                    m,
                    conv_stack(&config, [1, features.cqt.bins(), t], true, config.pdc.enabled, &mut rng)?,
                )),
                Modality::Mfcc => backbones.push((
                    m,
                    Sequential::new().push(Recurrent::new(features.n_mfcc, config.aux_dim, &mut rng)),
                )),
                Modality::Stats => {
                    let per = config.aux_dim / 4;
                    for _ in 0..4 {
                        stats_tracks.push(
                            Sequential::new()
                                .push(Dense::new(t, 2 * per, &mut rng))
                                .push(Relu::new())
                                .push(Dense::new(2 * per, per, &mut rng))
                                .push(Relu::new()),
                        );
                    }
                }
                Modality::Raw => backbones.push((
                    m,
                    Sequential::new()
                        .push(Dense::new(RAW_STEPS_PER_TIME_STEP * t, 2 * config.aux_dim, &mut rng))
                        .push(Relu::new())
                        .push(Dense::new(2 * config.aux_dim, config.aux_dim, &mut rng))
                        .push(Relu::new()),
                )),
            }
        }
        let groups = space.free_groups();
        let g = groups.len();
        if g == 0 {
            return Err(Error::InvalidConfig(format!("space `{}` has no free parameters", space.id())));
        }
        let trunk = Sequential::new().push(Dense::new(config.global_dim(), config.trunk_dim, &mut rng)).push(Relu::new());
        let split = Sequential::new()
            .push(Dense::new(config.trunk_dim, g * config.group_dim, &mut rng))
            .push(Relu::new());
        let blocks = vec![(config.group_dim, config.group_dim); g];
        let local = Sequential::new().push(Dense::block_diagonal(&blocks, &mut rng)).push(Relu::new());
        let heads = space
            .free_indices()
            .into_iter()
            .map(|i| {
                let d = &space.descriptors()[i];
                let group = groups.iter().position(|&x| x == d.group).expect("free groups cover free parameters");
                Head {
                    descriptor: i,
                    group,
                    net: Sequential::new()
                        .push(Dense::new(config.group_dim, config.head_dim, &mut rng))
                        .push(Relu::new())
                        .push(Dense::new(config.head_dim, d.class_count, &mut rng)),
                }
            })
            .collect();
        Ok(EstimatorNet {
            config,
            features,
            space,
            groups,
            backbones,
            stats_tracks,
            trunk,
            split,
            local,
            heads,
            widths: Vec::new(),
            local_out: None,
        })
    }


    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn feature_config(&self) -> &FeatureConfig {
        &self.features
    }

    pub fn space(&self) -> &Arc<ParameterSpace> {
        &self.space
    }

    pub fn groups(&self) -> &[ParamGroup] {
        &self.groups
    }

    /// Descriptor index of every head, in output order.
    pub fn head_descriptors(&self) -> Vec<usize> {
        self.heads.iter().map(|h| h.descriptor).collect()
    }

    /// Group index of every head, in output order.
    pub fn head_groups(&self) -> Vec<usize> {
        self.heads.iter().map(|h| h.group).collect()
    }

    /// One logit vector per free parameter, in free-descriptor order.
    pub fn forward(&mut self, input: &ModelInput) -> Result<Vec<Vec<f64>>> {
        let mut global = Vec::with_capacity(self.config.global_dim());
        self.widths.clear();
        let mut stats_done = false;
        let mut bb = self.backbones.iter_mut();
        for &m in &self.config.modalities {
            let out = if m == Modality::Stats {
                if stats_done {
                    continue;
                }
                stats_done = true;
                let t = input.stats.shape().get(1).copied().unwrap_or(0);
                let mut out = Vec::new();
                for (i, track) in self.stats_tracks.iter_mut().enumerate() {
                    let row = input.stats.data().get(i * t..(i + 1) * t).ok_or_else(|| {
                        Error::shape("stats input", &[4, self.features.time_steps], input.stats.shape())
                    })?;
                    out.extend(track.forward(&Tensor::vector(row.to_vec()))?.into_data());
                }
                out
            } else {
                let (_, net) = bb.next().expect("one backbone per non-stats modality");
                let x = input
                    .get(m)
                    .ok_or_else(|| Error::shape(format!("{} input", m.name()), &[1], &[]))?;
                net.forward(x)?.into_data()
            };
            self.widths.push(out.len());
            global.extend(out);
        }
        let h = self.trunk.forward(&Tensor::vector(global))?;
        let s = self.split.forward(&h)?;
        let l = self.local.forward(&s)?;
        self.local_out = Some(s);
        let gd = self.config.group_dim;
        self.heads
            .iter_mut()
            .map(|head| {
                let slice = l.data()[head.group * gd..(head.group + 1) * gd].to_vec();
                Ok(head.net.forward(&Tensor::vector(slice))?.into_data())
            })
            .collect()
    }

    /// Accumulate parameter gradients for the logit gradients of the last
    /// forward pass. Returns the gradient with respect to the local
    /// (per-group) features.
    pub fn backward(&mut self, grad_logits: &[Vec<f64>]) -> Result<Tensor> {
        if grad_logits.len() != self.heads.len() {
            return Err(Error::shape("logit gradients", &[self.heads.len()], &[grad_logits.len()]));
        }
        let gd = self.config.group_dim;
        let mut gl = vec![0.0; self.groups.len() * gd];
        for (head, g) in self.heads.iter_mut().zip(grad_logits) {
            let gx = head.net.backward(&Tensor::vector(g.clone()))?;
            for (a, b) in gl[head.group * gd..(head.group + 1) * gd].iter_mut().zip(gx.data()) {
                *a += b;
            }
        }
        let g_local = self.local.backward(&Tensor::vector(gl))?;
        let gh = self.split.backward(&g_local)?;
        let gglobal = self.trunk.backward(&gh)?;
        let mut offset = 0;
        let mut bb = self.backbones.iter_mut();
        let mut w = self.widths.iter();
        let mut stats_done = false;
        for &m in &self.config.modalities {
            if m == Modality::Stats && stats_done {
                continue;
            }
            let width = *w.next().ok_or_else(|| Error::InvalidConfig("backward before forward".into()))?;
            let g = &gglobal.data()[offset..offset + width];
            offset += width;
            if m == Modality::Stats {
                stats_done = true;
                let per = width / self.stats_tracks.len().max(1);
                for (i, track) in self.stats_tracks.iter_mut().enumerate() {
                    track.backward(&Tensor::vector(g[i * per..(i + 1) * per].to_vec()))?;
                }
            } else {
                let (_, net) = bb.next().expect("one backbone per non-stats modality");
                net.backward(&Tensor::vector(g.to_vec()))?;
            }
        }
        Ok(g_local)
    }

    /// Local features from the last forward pass.
    pub fn local_features(&self) -> Option<&Tensor> {
        self.local_out.as_ref()
    }

    pub fn parameters(&mut self) -> Vec<(String, &mut Param)> {
        let mut out = Vec::new();
        for (m, net) in self.backbones.iter_mut() {
            net.collect_params(m.name(), &mut out);
        }
        for (i, track) in self.stats_tracks.iter_mut().enumerate() {
            track.collect_params(&format!("stats.{i}"), &mut out);
        }
        self.trunk.collect_params("trunk", &mut out);
        self.split.collect_params("split", &mut out);
        self.local.collect_params("local", &mut out);
        let d = self.space.descriptors();
        for head in self.heads.iter_mut() {
            head.net.collect_params(&format!("head.{}", d[head.descriptor].name), &mut out);
        }
        out
    }

    pub fn parameter_count(&mut self) -> usize {
        self.parameters().iter().map(|(_, p)| p.value.len()).sum()
    }

    pub fn zero_grads(&mut self) {
        for (_, p) in self.parameters() {
            p.zero_grad();
        }
    }

    pub fn to_arrays(&mut self) -> NamedArrays {
        NamedArrays(self.parameters().into_iter().map(|(n, p)| (n, p.value.clone())).collect())
    }

    /// Overwrite parameters by name. Every parameter must be present with
    /// its exact shape; extra arrays are ignored.
    pub fn load_arrays(&mut self, arrays: &NamedArrays) -> Result<()> {
        for (name, p) in self.parameters() {
            let t = arrays
                .get(&name)
                .ok_or_else(|| Error::CorruptContainer(format!("missing parameter `{name}`")))?;
            t.expect_shape(&name, p.value.shape())?;
            p.value = t.clone();
        }
        Ok(())
    }
}

impl Differentiable for EstimatorNet {
    fn params(&mut self) -> Vec<(String, &mut Param)> {
        self.parameters()
    }
}

/// Everything in a [`Sequential`] as one [`Layer`] for the optimizer.
impl Layer for EstimatorNet {
    fn forward(&mut self, _x: &Tensor) -> Result<Tensor> {
        Err(Error::InvalidConfig("EstimatorNet takes a ModelInput; call EstimatorNet::forward".into()))
    }

    fn backward(&mut self, _grad: &Tensor) -> Result<Tensor> {
        Err(Error::InvalidConfig("EstimatorNet takes logit gradients; call EstimatorNet::backward".into()))
    }

    fn collect_params<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Param)>) {
        for (name, p) in self.parameters() {
            out.push((if prefix.is_empty() { name } else { format!("{prefix}.{name}") }, p));
        }
    }
}
