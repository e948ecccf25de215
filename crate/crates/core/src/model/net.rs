use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::{convs_in_block, pool_of_block, Aggregation, ModelConfig, NUM_BLOCKS, SPATIAL_BLOCKS};
use super::scene::SceneInputs;
use crate::error::{LivrError, Result};
use crate::layout::{BitMask, PlaceCategory, NUM_PLACES};
use crate::tensor::conv::{conv3d, conv3d_backward, TAPS};
use crate::tensor::ops::{
    concat_channels, decompose, decompose_backward, linear, linear_backward, relu, relu_backward, sgmp, sgmp_backward,
    sigmoid, split_channels,
};
use crate::tensor::params::{Grads, ParamId, ParamStore};
use crate::tensor::pool::{maxpool, maxpool_backward, PoolKind};
use crate::tensor::{Real, Shape4, Tensor4};
use crate::topology::{expand_gate, ActionCatalog};

#[derive(Clone, Debug)]
struct Conv {
    w: ParamId,
    b: ParamId,
    c_out: usize,
}

#[derive(Clone, Debug)]
struct Block {
    convs: Vec<Conv>,
    pool: PoolKind,
}

#[derive(Clone, Debug)]
struct Branch {
    parts: usize,
    /// One stack per part, or a single stack shared by all parts.
    part_stacks: Vec<Vec<Block>>,
    temporal: Vec<Block>,
}

impl Branch {
    fn stack(&self, part: usize) -> &[Block] {
        &self.part_stacks[part.min(self.part_stacks.len() - 1)]
    }
}

#[derive(Clone, Debug)]
struct Dense {
    w: ParamId,
    b: ParamId,
    n_out: usize,
}

/// Whether a forward pass runs in training or evaluation mode. The two only
/// differ for aggregation heads that gate at test time alone.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Train,
    Eval,
}

/// Activations of one block kept for the backward pass.
pub struct BlockCache<T> {
    conv_in: Vec<Tensor4<T>>,
    conv_out: Vec<Tensor4<T>>,
    pool_in: Shape4,
    argmax: Vec<usize>,
}

pub struct BranchCache<T> {
    masks: Vec<BitMask>,
    parts: Vec<Vec<BlockCache<T>>>,
    widths: Vec<usize>,
    temporal: Vec<BlockCache<T>>,
    sgmp_in: Shape4,
    sgmp_arg: Vec<usize>,
}

/// Intermediate values of one forward pass, consumed by [`Model::backward`].
pub struct ForwardPass<T> {
    trunk: Vec<BlockCache<T>>,
    trunk_out: Shape4,
    branches: Vec<BranchCache<T>>,
    sgmp_in: Shape4,
    sgmp_arg: Vec<usize>,
    /// Concatenated place descriptions (or the baseline's pooled feature).
    pub features: Vec<T>,
    hidden: Option<Vec<T>>,
    gate: Option<Vec<bool>>,
    pub logits: Vec<T>,
}

/// A baseline or layout-induced network bound to a [`ParamStore`].
#[derive(Clone, Debug)]
pub struct Model<T> {
    pub config: ModelConfig,
    pub params: ParamStore<T>,
    n_actions: usize,
    trunk: Vec<Block>,
    branches: Vec<Branch>,
    head: Vec<Dense>,
}

fn add_normal<T: Real>(
    store: &mut ParamStore<T>,
    rng: &mut ChaCha8Rng,
    name: String,
    shape: Vec<usize>,
    std: f64,
) -> ParamId {
    let n: usize = shape.iter().product();
    let normal = Normal::new(0.0, std).expect("finite std");
    let data = (0..n).map(|_| T::of(normal.sample(rng))).collect();
    store.add(name, shape, data)
}

fn add_zeros<T: Real>(store: &mut ParamStore<T>, name: String, n: usize) -> ParamId {
    store.add(name, vec![n], vec![T::zero(); n])
}

/// Mean number of in-bounds taps of a 3×3×3 window over an input of `s`.
/// Small late-block extents put most taps in the zero padding.
fn live_taps(s: Shape4) -> f64 {
    [s.t, s.h, s.w].iter().map(|&e| (3 * e - 2) as f64 / e as f64).product()
}

/// Input extent of block `n`.
fn block_input(config: &ModelConfig, n: usize) -> Shape4 {
    (1..n).fold(config.input_shape(), |s, m| pool_of_block(m).output_shape(s))
}

fn build_block<T: Real>(
    store: &mut ParamStore<T>,
    rng: &mut ChaCha8Rng,
    prefix: &str,
    (n, extent): (usize, Shape4),
    c_in: usize,
    f: usize,
) -> Block {
    let mut convs = Vec::new();
    let mut c = c_in;
    let taps = live_taps(extent);
    for j in 0..convs_in_block(n) {
        let name = format!("{prefix}.block{n}.conv{j}");
        let w = add_normal(store, rng, format!("{name}.w"), vec![TAPS, c, f], (2.0 / (taps * c as f64)).sqrt());
        let b = add_zeros(store, format!("{name}.b"), f);
        convs.push(Conv { w, b, c_out: f });
        c = f;
    }
    Block { convs, pool: pool_of_block(n) }
}

impl<T: Real> Model<T> {
    /// Builds the network for `config` with weights drawn from `seed`.
    pub fn new(config: ModelConfig, n_actions: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let f = config.filters;
        let baseline = config.variant.is_baseline();
        let trunk_end = if baseline { NUM_BLOCKS } else { config.l };

        let mut trunk = Vec::new();
        let mut c = config.input_channels();
        for n in 1..=trunk_end {
            trunk.push(build_block(&mut params, &mut rng, "trunk", (n, block_input(&config, n)), c, f));
            c = f;
        }

        let mut branches = Vec::new();
        if !baseline {
            for p in PlaceCategory::ALL {
                let parts = config.parts(p);
                let stacks = if config.share_part_weights { 1 } else { parts };
                let mut part_stacks = Vec::new();
                for i in 0..stacks {
                    let prefix = format!("branch.{p}.part{i}");
                    let mut cc = c;
                    let mut blocks = Vec::new();
                    for n in config.l + 1..=SPATIAL_BLOCKS {
                        blocks.push(build_block(&mut params, &mut rng, &prefix, (n, block_input(&config, n)), cc, f));
                        cc = f;
                    }
                    part_stacks.push(blocks);
                }
                let part_out = if config.l < SPATIAL_BLOCKS { f } else { c };
                let mut cc = parts * part_out;
                let mut temporal = Vec::new();
                for n in SPATIAL_BLOCKS + 1..=NUM_BLOCKS {
                    temporal.push(build_block(&mut params, &mut rng, &format!("branch.{p}"), (n, block_input(&config, n)), cc, f));
                    cc = f;
                }
                branches.push(Branch { parts, part_stacks, temporal });
            }
        }

        let n_feat = config.feature_len();
        let mut head = Vec::new();
        if config.aggregation() == Aggregation::Fc2 {
            let hidden = NUM_PLACES * f;
            let w = add_normal(&mut params, &mut rng, "head.fc0.w".into(), vec![hidden, n_feat], (2.0 / n_feat as f64).sqrt());
            let b = add_zeros(&mut params, "head.fc0.b".into(), hidden);
            head.push(Dense { w, b, n_out: hidden });
            let w = add_normal(&mut params, &mut rng, "head.fc1.w".into(), vec![n_actions, hidden], (1.0 / hidden as f64).sqrt());
            let b = add_zeros(&mut params, "head.fc1.b".into(), n_actions);
            head.push(Dense { w, b, n_out: n_actions });
        } else {
            let w = add_normal(&mut params, &mut rng, "head.fc0.w".into(), vec![n_actions, n_feat], (1.0 / n_feat as f64).sqrt());
            let b = add_zeros(&mut params, "head.fc0.b".into(), n_actions);
            head.push(Dense { w, b, n_out: n_actions });
        }
        Ok(Self { config, params, n_actions, trunk, branches, head })
    }

    pub fn with_catalog(config: ModelConfig, catalog: &ActionCatalog, seed: u64) -> Result<Self> {
        Self::new(config, catalog.len(), seed)
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    /// Parameter names and shapes in construction order.
    pub fn structure(&self) -> Vec<(String, Vec<usize>)> {
        self.params.entries().iter().map(|e| (e.name.clone(), e.shape.clone())).collect()
    }

    pub fn describe(&self) -> String {
        let c = &self.config;
        let mut s = format!(
            "{} L={} k={} h={} filters={} input={} aggregation={} parameters={}\n",
            c.variant,
            c.l,
            c.k,
            c.h,
            c.filters,
            c.input_shape(),
            c.aggregation(),
            self.params.num_scalars()
        );
        s.push_str(&format!("  trunk: {} blocks\n", self.trunk.len()));
        for (p, b) in PlaceCategory::ALL.iter().zip(&self.branches) {
            s.push_str(&format!(
                "  branch {p}: {} part(s), {} part stack(s), {} temporal blocks\n",
                b.parts,
                b.part_stacks.len(),
                b.temporal.len()
            ));
        }
        s
    }

    fn block_forward(&self, b: &Block, x: Tensor4<T>) -> Result<(Tensor4<T>, BlockCache<T>)> {
        let mut conv_in = Vec::with_capacity(b.convs.len());
        let mut conv_out = Vec::with_capacity(b.convs.len());
        let mut x = x;
        for cv in &b.convs {
            let y = relu(&conv3d(&x, self.params.get(cv.w), self.params.get(cv.b), cv.c_out)?);
            conv_in.push(x);
            conv_out.push(y.clone());
            x = y;
        }
        let pool_in = x.shape();
        let pooled = maxpool(&x, b.pool);
        Ok((pooled.output, BlockCache { conv_in, conv_out, pool_in, argmax: pooled.argmax }))
    }

    fn block_backward(
        &self,
        b: &Block,
        cache: &BlockCache<T>,
        gy: &Tensor4<T>,
        grads: &mut Grads<T>,
        need_input: bool,
    ) -> Result<Option<Tensor4<T>>> {
        let mut g = maxpool_backward(cache.pool_in, &cache.argmax, gy)?;
        for j in (0..b.convs.len()).rev() {
            let cv = &b.convs[j];
            let gz = relu_backward(&cache.conv_out[j], &g);
            let want_input = j > 0 || need_input;
            let cg = conv3d_backward(&cache.conv_in[j], self.params.get(cv.w), cv.c_out, &gz, want_input)?;
            grads.accumulate(cv.w, &cg.weight);
            grads.accumulate(cv.b, &cg.bias);
            match cg.input {
                Some(gi) => g = gi,
                None => return Ok(None),
            }
        }
        Ok(Some(g))
    }

    fn stack_forward(&self, blocks: &[Block], x: Tensor4<T>) -> Result<(Tensor4<T>, Vec<BlockCache<T>>)> {
        let mut caches = Vec::with_capacity(blocks.len());
        let mut x = x;
        for b in blocks {
            let (y, c) = self.block_forward(b, x)?;
            caches.push(c);
            x = y;
        }
        Ok((x, caches))
    }

    fn stack_backward(
        &self,
        blocks: &[Block],
        caches: &[BlockCache<T>],
        gy: Tensor4<T>,
        grads: &mut Grads<T>,
        need_input: bool,
    ) -> Result<Option<Tensor4<T>>> {
        let mut g = gy;
        for i in (0..blocks.len()).rev() {
            match self.block_backward(&blocks[i], &caches[i], &g, grads, i > 0 || need_input)? {
                Some(gi) => g = gi,
                None => return Ok(None),
            }
        }
        Ok(Some(g))
    }

    /// Network input for one clip: the frames, plus the place maps for `BL2`.
    pub fn input(&self, video: &Tensor4<T>, scene: &SceneInputs) -> Result<Tensor4<T>> {
        let s = video.shape();
        let want = self.config.input_shape().with_c(3);
        if s != want {
            return Err(LivrError::ShapeMismatch(format!("clip {s} but the model expects {want}")));
        }
        if self.config.input_channels() == 3 {
            return Ok(video.clone());
        }
        let maps = scene
            .input_maps
            .as_ref()
            .ok_or_else(|| LivrError::ShapeMismatch("scene inputs lack input-level place maps".into()))?;
        let mut extra = Tensor4::zeros(s.with_c(NUM_PLACES));
        for t in 0..s.t {
            for y in 0..s.h {
                for x in 0..s.w {
                    for (c, m) in maps.iter().enumerate() {
                        if m.get(x, y) {
                            extra.set(t, y, x, c, T::one());
                        }
                    }
                }
            }
        }
        concat_channels(&[video.clone(), extra])
    }

    /// Shared trunk (all nine blocks for the baselines).
    pub fn trunk_forward(&self, input: Tensor4<T>) -> Result<(Tensor4<T>, Vec<BlockCache<T>>)> {
        self.stack_forward(&self.trunk, input)
    }

    /// Decomposed inputs of every place branch: one tensor per part.
    pub fn branch_inputs(&self, trunk_out: &Tensor4<T>, scene: &SceneInputs) -> Result<Vec<Vec<Tensor4<T>>>> {
        let s = trunk_out.shape();
        if scene.layer_size() != (s.h, s.w) {
            return Err(LivrError::ShapeMismatch(format!(
                "scene maps are {}x{} but layer {} features are {}x{}",
                scene.layer_size().0,
                scene.layer_size().1,
                self.config.l,
                s.h,
                s.w
            )));
        }
        self.branches
            .iter()
            .enumerate()
            .map(|(pi, br)| {
                let masks = &scene.branch_masks[pi];
                if masks.len() != br.parts {
                    return Err(LivrError::ShapeMismatch(format!(
                        "branch {} has {} parts, scene supplies {}",
                        PlaceCategory::ALL[pi],
                        br.parts,
                        masks.len()
                    )));
                }
                masks.iter().map(|m| decompose(trunk_out, m)).collect()
            })
            .collect()
    }

    /// Runs the branch of place index `pi` on its part inputs and returns the
    /// place description.
    /// `masks` are the part masks that produced `parts`; they route the
    /// gradient back to the trunk.
    pub fn branch_forward(
        &self,
        pi: usize,
        parts: Vec<Tensor4<T>>,
        masks: &[BitMask],
    ) -> Result<(Vec<T>, BranchCache<T>)> {
        let br = &self.branches[pi];
        let mut outs = Vec::with_capacity(parts.len());
        let mut caches = Vec::with_capacity(parts.len());
        for (i, x) in parts.into_iter().enumerate() {
            let (y, c) = self.stack_forward(br.stack(i), x)?;
            outs.push(y);
            caches.push(c);
        }
        let widths = outs.iter().map(|t| t.shape().c).collect();
        let joined = if outs.len() == 1 { outs.pop().expect("one part") } else { concat_channels(&outs)? };
        let (y, temporal) = self.stack_forward(&br.temporal, joined)?;
        let (desc, sgmp_arg) = sgmp(&y)?;
        Ok((desc, BranchCache { masks: masks.to_vec(), parts: caches, widths, temporal, sgmp_in: y.shape(), sgmp_arg }))
    }

    fn gate_bits(&self, scene: &SceneInputs, phase: Phase) -> Result<Option<Vec<bool>>> {
        let agg = self.config.aggregation();
        let on = match phase {
            Phase::Train => agg.gated_in_training(),
            Phase::Eval => agg.gated_in_eval(),
        };
        if !on {
            return Ok(None);
        }
        if scene.gate.n_actions() != self.n_actions {
            return Err(LivrError::ShapeMismatch(format!(
                "gate has {} rows for {} actions",
                scene.gate.n_actions(),
                self.n_actions
            )));
        }
        Ok(Some(expand_gate(&scene.gate, self.config.filters)?.bits))
    }

    /// Classification head on the concatenated features; returns logits and
    /// the hidden activations of a two-layer head.
    pub fn head_forward(&self, features: &[T], gate: Option<&[bool]>) -> Result<(Vec<T>, Option<Vec<T>>)> {
        match self.head.as_slice() {
            [fc] => Ok((linear(self.params.get(fc.w), self.params.get(fc.b), gate, features)?, None)),
            [fc0, fc1] => {
                let mut hid = linear(self.params.get(fc0.w), self.params.get(fc0.b), None, features)?;
                for v in &mut hid {
                    *v = v.max(T::zero());
                }
                let y = linear(self.params.get(fc1.w), self.params.get(fc1.b), None, &hid)?;
                Ok((y, Some(hid)))
            }
            _ => unreachable!("heads have one or two layers"),
        }
    }

    pub fn forward(&self, video: &Tensor4<T>, scene: &SceneInputs, phase: Phase) -> Result<ForwardPass<T>> {
        let input = self.input(video, scene)?;
        let (trunk_out, trunk) = self.trunk_forward(input)?;
        let trunk_shape = trunk_out.shape();
        let mut branches = Vec::with_capacity(self.branches.len());
        let (features, sgmp_in, sgmp_arg) = if self.branches.is_empty() {
            let (f, arg) = sgmp(&trunk_out)?;
            (f, trunk_shape, arg)
        } else {
            let inputs = self.branch_inputs(&trunk_out, scene)?;
            drop(trunk_out);
            let mut features = Vec::with_capacity(self.config.feature_len());
            for (pi, parts) in inputs.into_iter().enumerate() {
                let (d, c) = self.branch_forward(pi, parts, &scene.branch_masks[pi])?;
                features.extend_from_slice(&d);
                branches.push(c);
            }
            (features, Shape4::new(0, 0, 0, 0), Vec::new())
        };
        let gate = self.gate_bits(scene, phase)?;
        let (logits, hidden) = self.head_forward(&features, gate.as_deref())?;
        Ok(ForwardPass { trunk, trunk_out: trunk_shape, branches, sgmp_in, sgmp_arg, features, hidden, gate, logits })
    }

    /// Action probabilities in evaluation mode.
    pub fn predict(&self, video: &Tensor4<T>, scene: &SceneInputs) -> Result<Vec<f64>> {
        let pass = self.forward(video, scene, Phase::Eval)?;
        Ok(pass.logits.iter().map(|&y| sigmoid(y).as_f64()).collect())
    }

    /// Gradient of the features given the gradient of the logits.
    fn head_backward(&self, pass: &ForwardPass<T>, gy: &[T], grads: &mut Grads<T>) -> Vec<T> {
        match self.head.as_slice() {
            [fc] => {
                let g = linear_backward(self.params.get(fc.w), pass.gate.as_deref(), &pass.features, gy);
                grads.accumulate(fc.w, &g.weight);
                grads.accumulate(fc.b, &g.bias);
                g.input
            }
            [fc0, fc1] => {
                let hid = pass.hidden.as_ref().expect("two-layer head caches its hidden layer");
                let g1 = linear_backward(self.params.get(fc1.w), None, hid, gy);
                grads.accumulate(fc1.w, &g1.weight);
                grads.accumulate(fc1.b, &g1.bias);
                let gh: Vec<T> = g1.input.iter().zip(hid).map(|(&g, &h)| if h > T::zero() { g } else { T::zero() }).collect();
                let g0 = linear_backward(self.params.get(fc0.w), None, &pass.features, &gh);
                grads.accumulate(fc0.w, &g0.weight);
                grads.accumulate(fc0.b, &g0.bias);
                debug_assert_eq!(fc0.n_out, gh.len());
                g0.input
            }
            _ => unreachable!("heads have one or two layers"),
        }
    }

    /// Accumulates parameter gradients of `Σ grad_logits · logits` into `grads`.
    pub fn backward(&self, pass: &ForwardPass<T>, grad_logits: &[T], grads: &mut Grads<T>) -> Result<()> {
        if grad_logits.len() != self.n_actions {
            return Err(LivrError::ShapeMismatch(format!("{} logit gradients", grad_logits.len())));
        }
        let gf = self.head_backward(pass, grad_logits, grads);
        let g_trunk = if self.branches.is_empty() {
            sgmp_backward(pass.sgmp_in, &pass.sgmp_arg, &gf)
        } else {
            let f = self.config.filters;
            let need_trunk = !self.trunk.is_empty();
            let mut g_trunk = Tensor4::zeros(pass.trunk_out);
            for (pi, (br, bc)) in self.branches.iter().zip(&pass.branches).enumerate() {
                let gd = &gf[pi * f..(pi + 1) * f];
                let g = sgmp_backward(bc.sgmp_in, &bc.sgmp_arg, gd);
                let g = self
                    .stack_backward(&br.temporal, &bc.temporal, g, grads, true)?
                    .expect("temporal blocks return input gradients");
                let gparts = if bc.widths.len() == 1 { vec![g] } else { split_channels(&g, &bc.widths) };
                for (i, gp) in gparts.into_iter().enumerate() {
                    let gi = self.stack_backward(br.stack(i), &bc.parts[i], gp, grads, need_trunk)?;
                    if let Some(gi) = gi {
                        g_trunk.add_assign(&decompose_backward(&gi, &bc.masks[i])?);
                    }
                }
            }
            if !need_trunk {
                return Ok(());
            }
            g_trunk
        };
        self.stack_backward(&self.trunk, &pass.trunk, g_trunk, grads, false)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::{Region, SceneAnnotation};
    use crate::model::config::Variant;
    use crate::tensor::ops::sigmoid_bce;
    use crate::topology::GateMatrix;
    use rand::Rng;

    fn rect(cat: PlaceCategory, x0: f64, y0: f64, x1: f64, y1: f64) -> Region {
        Region::new(cat, vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]])
    }

    pub(crate) fn annotation() -> SceneAnnotation {
        use PlaceCategory::*;
        SceneAnnotation {
            scene_id: "t".into(),
            image_width: 64,
            image_height: 64,
            regions: vec![
                rect(Street, 0.0, 0.0, 64.0, 12.0),
                rect(Sidewalk, 0.0, 12.0, 64.0, 24.0),
                rect(Lawn, 0.0, 24.0, 64.0, 64.0),
                rect(Walkway, 24.0, 24.0, 36.0, 48.0),
                rect(Driveway, 44.0, 12.0, 60.0, 64.0),
                rect(Porch, 12.0, 48.0, 44.0, 64.0),
            ],
            porch_line: None,
        }
    }

    fn tiny(variant: Variant) -> ModelConfig {
        ModelConfig { frames: 3, height: 8, width: 8, filters: 2, k: 2, ..ModelConfig::full(variant) }
    }

    fn video(cfg: &ModelConfig, seed: u64) -> Tensor4<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = cfg.input_shape().with_c(3);
        Tensor4::from_vec(s, (0..s.len()).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap()
    }

    fn scene(cfg: &ModelConfig) -> SceneInputs {
        SceneInputs::prepare(&annotation(), cfg, &ActionCatalog::standard()).unwrap()
    }

    fn loss(m: &Model<f64>, v: &Tensor4<f64>, s: &SceneInputs, labels: &[f64]) -> f64 {
        sigmoid_bce(&m.forward(v, s, Phase::Train).unwrap().logits, labels).unwrap().0
    }

    /// Compares backward against central differences on a sample of
    /// coordinates of every parameter array.
    fn check_model(cfg: ModelConfig) {
        let mut m = Model::<f64>::new(cfg.clone(), 15, 3).unwrap();
        // Nonzero biases keep pre-activations away from the ReLU kink at 0.
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for e in m.params.entries_mut().iter_mut().filter(|e| e.name.ends_with(".b")) {
            e.data.iter_mut().for_each(|v| *v = rng.random_range(0.05..0.3));
        }
        let v = video(&cfg, 4);
        let s = scene(&cfg);
        let labels: Vec<f64> = (0..15).map(|i| (i % 3 == 0) as u8 as f64).collect();
        let pass = m.forward(&v, &s, Phase::Train).unwrap();
        let (_, gl) = sigmoid_bce(&pass.logits, &labels).unwrap();
        let mut grads = m.params.zeros_like();
        m.backward(&pass, &gl, &mut grads).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let eps = 1e-5;
        for pid in 0..m.params.len() {
            let id = ParamId(pid);
            let n = m.params.get(id).len();
            for _ in 0..3 {
                let j = rng.random_range(0..n);
                let orig = m.params.get(id)[j];
                m.params.get_mut(id)[j] = orig + eps;
                let up = loss(&m, &v, &s, &labels);
                m.params.get_mut(id)[j] = orig - eps;
                let down = loss(&m, &v, &s, &labels);
                m.params.get_mut(id)[j] = orig;
                let num = (up - down) / (2.0 * eps);
                let ana = grads.get(id)[j];
                let err = (num - ana).abs() / num.abs().max(ana.abs()).max(1e-6);
                assert!(err < 1e-4, "{} [{j}]: analytic {ana} numeric {num}", m.params.entries()[pid].name);
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        for v in Variant::ALL {
            check_model(tiny(v));
        }
        check_model(ModelConfig { l: 0, ..tiny(Variant::V4) });
        check_model(ModelConfig { l: 1, ..tiny(Variant::V3) });
        check_model(ModelConfig { l: 5, ..tiny(Variant::V4) });
        check_model(ModelConfig { aggregation: Some(Aggregation::Fc2), ..tiny(Variant::V1) });
        check_model(ModelConfig { share_part_weights: true, ..tiny(Variant::V3) });
    }

    #[test]
    fn zero_weights_give_sigmoid_of_bias() {
        let cfg = tiny(Variant::V4);
        let mut m = Model::<f64>::new(cfg.clone(), 15, 1).unwrap();
        for e in m.params.entries_mut() {
            e.data.iter_mut().for_each(|v| *v = 0.0);
        }
        let bias: Vec<f64> = (0..15).map(|i| i as f64 * 0.1 - 0.7).collect();
        let id = m.params.find("head.fc0.b").unwrap();
        m.params.get_mut(id).copy_from_slice(&bias);
        let v = Tensor4::zeros(cfg.input_shape());
        let p = m.predict(&v, &scene(&cfg)).unwrap();
        for (a, b) in p.iter().zip(&bias) {
            assert!((a - sigmoid(*b)).abs() < 1e-15);
        }
    }

    #[test]
    fn all_ones_gate_matches_plain_head() {
        let c1 = tiny(Variant::V1);
        let c2 = tiny(Variant::V2);
        let m1 = Model::<f64>::new(c1.clone(), 15, 9).unwrap();
        let m2 = Model::<f64>::new(c2.clone(), 15, 9).unwrap();
        assert_eq!(m1.params, m2.params);
        let mut s = scene(&c2);
        s.gate = GateMatrix::all_ones(15);
        let v = video(&c1, 2);
        assert_eq!(m1.predict(&v, &scene(&c1)).unwrap(), m2.predict(&v, &s).unwrap());
    }

    #[test]
    fn single_part_discretization_has_plain_structure() {
        let a = Model::<f32>::new(ModelConfig { k: 1, ..ModelConfig::desk(Variant::V4) }, 15, 0).unwrap();
        let b = Model::<f32>::new(
            ModelConfig { pl_dt: crate::topology::PlaceSet::EMPTY, ..ModelConfig::desk(Variant::V3) },
            15,
            0,
        )
        .unwrap();
        assert_eq!(a.structure(), b.structure());
    }

    #[test]
    fn description_length_is_independent_of_k() {
        for k in 1..=5 {
            let cfg = ModelConfig { k, ..tiny(Variant::V3) };
            let m = Model::<f64>::new(cfg.clone(), 15, 0).unwrap();
            let pass = m.forward(&video(&cfg, 0), &scene(&cfg), Phase::Eval).unwrap();
            assert_eq!(pass.features.len(), 6 * cfg.filters);
        }
    }

    #[test]
    fn resolution_mismatch_is_an_error() {
        let cfg = tiny(Variant::V1);
        let m = Model::<f64>::new(cfg.clone(), 15, 0).unwrap();
        let other = ModelConfig { l: 1, ..cfg.clone() };
        assert!(m.forward(&video(&cfg, 0), &scene(&other), Phase::Eval).is_err());
    }

    #[test]
    fn forward_is_deterministic() {
        let cfg = tiny(Variant::V4);
        let a = Model::<f64>::new(cfg.clone(), 15, 11).unwrap();
        let b = Model::<f64>::new(cfg.clone(), 15, 11).unwrap();
        let v = video(&cfg, 1);
        assert_eq!(a.predict(&v, &scene(&cfg)).unwrap(), b.predict(&v, &scene(&cfg)).unwrap());
    }

    #[test]
    #[ignore]
    fn desk_scale_timing() {
        for variant in [Variant::BL1, Variant::V1, Variant::V3, Variant::V4] {
            let cfg = ModelConfig::desk(variant);
            let m = Model::<f32>::new(cfg.clone(), 15, 0).unwrap();
            let mut ann = annotation();
            ann.image_width = 256;
            ann.image_height = 144;
            for r in &mut ann.regions {
                for p in &mut r.polygon {
                    p[0] *= 4.0;
                    p[1] *= 2.25;
                }
            }
            let s = SceneInputs::prepare(&ann, &cfg, &ActionCatalog::standard()).unwrap();
            let v: Tensor4<f32> = Tensor4::filled(cfg.input_shape(), 0.5);
            let t0 = std::time::Instant::now();
            let n = 10;
            for _ in 0..n {
                let pass = m.forward(&v, &s, Phase::Train).unwrap();
                let mut g = m.params.zeros_like();
                m.backward(&pass, &[0.1; 15], &mut g).unwrap();
            }
            let t1 = t0.elapsed().as_secs_f64() / n as f64;
            let t0 = std::time::Instant::now();
            for _ in 0..n {
                m.predict(&v, &s).unwrap();
            }
            let t2 = t0.elapsed().as_secs_f64() / n as f64;
            println!("{variant}: train step {:.1} ms, predict {:.1} ms, params {}", t1 * 1e3, t2 * 1e3, m.params.num_scalars());
        }
    }
}
