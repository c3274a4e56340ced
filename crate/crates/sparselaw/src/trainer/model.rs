//! The miniature language model and its hand-rolled backprop.
//!
//! Architecture: a character embedding table feeding a window of `context`
//! embeddings into two tanh-activated affine layers and an output
//! projection. The three weight matrices are prunable and carry binary
//! masks; embeddings and biases are nonprunable. All math is f64.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::math;
use crate::schedule::ModelShape;

use super::TrainError;

/// Architecture hyperparameters; the vocabulary comes from the corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TinyLmSpec {
    /// Characters of context fed to the model.
    pub context: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
}

impl TinyLmSpec {
    /// Total parameter count of a model with this spec and `vocab` symbols.
    pub fn total_params(&self, vocab: usize) -> u64 {
        let v = vocab as u64;
        let c = self.context as u64;
        let e = self.embed_dim as u64;
        let h = self.hidden_dim as u64;
        v * e + (c * e) * h + h + h * h + h + h * v + v
    }

    /// Prunable parameter count (the three weight matrices).
    pub fn prunable_params(&self, vocab: usize) -> u64 {
        let v = vocab as u64;
        let c = self.context as u64;
        let e = self.embed_dim as u64;
        let h = self.hidden_dim as u64;
        (c * e) * h + h * h + h * v
    }
}

/// Picks the hidden width whose total parameter count is closest to
/// `target_total`, holding context, embedding width, and vocabulary fixed.
/// This is how a dense model is realized to match a sparse run's average
/// parameter count.
pub fn spec_matching_total(
    context: usize,
    embed_dim: usize,
    vocab: usize,
    target_total: u64,
) -> TinyLmSpec {
    let mut best = TinyLmSpec {
        context,
        embed_dim,
        hidden_dim: 1,
    };
    let mut best_err = u64::MAX;
    for hidden in 1..=8192 {
        let spec = TinyLmSpec {
            context,
            embed_dim,
            hidden_dim: hidden,
        };
        let total = spec.total_params(vocab);
        let err = total.abs_diff(target_total);
        if err < best_err {
            best_err = err;
            best = spec;
        }
        if total > target_total && err > best_err {
            break;
        }
    }
    best
}

/// A sample batch: `inputs` holds `len * context` token ids row-major,
/// `targets` one id per sample. One sample predicts one token.
#[derive(Debug, Clone)]
pub struct Batch {
    pub inputs: Vec<u32>,
    pub targets: Vec<u32>,
    pub context: usize,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

/// Identifies one of the three prunable weight matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layer {
    Hidden1,
    Hidden2,
    Output,
}

pub struct TinyLm {
    vocab: Vec<char>,
    context: usize,
    embed_dim: usize,
    hidden_dim: usize,
    embed: Vec<f64>,
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: Vec<f64>,
    w3: Vec<f64>,
    b3: Vec<f64>,
    m1: Vec<bool>,
    m2: Vec<bool>,
    m3: Vec<bool>,
    grads: Gradients,
}

#[derive(Default)]
struct Gradients {
    embed: Vec<f64>,
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: Vec<f64>,
    w3: Vec<f64>,
    b3: Vec<f64>,
}

fn uniform_init(rng: &mut ChaCha8Rng, len: usize, scale: f64) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-scale..scale)).collect()
}

impl TinyLm {
    /// Fresh model over a sorted character vocabulary. Initialization is
    /// Xavier-style uniform, deterministic in the RNG state.
    pub fn new(spec: TinyLmSpec, vocab: Vec<char>, rng: &mut ChaCha8Rng) -> Result<Self, TrainError> {
        if vocab.len() < 2 {
            return Err(TrainError::VocabTooSmall(vocab.len()));
        }
        if spec.context == 0 || spec.embed_dim == 0 || spec.hidden_dim == 0 {
            return Err(TrainError::DegenerateSpec);
        }
        let v = vocab.len();
        let input = spec.context * spec.embed_dim;
        let h = spec.hidden_dim;
        let s1 = math::sqrt(6.0 / (input + h) as f64);
        let s2 = math::sqrt(6.0 / (h + h) as f64);
        let s3 = math::sqrt(6.0 / (h + v) as f64);
        Ok(Self {
            context: spec.context,
            embed_dim: spec.embed_dim,
            hidden_dim: h,
            embed: uniform_init(rng, v * spec.embed_dim, 0.1),
            w1: uniform_init(rng, h * input, s1),
            b1: vec![0.0; h],
            w2: uniform_init(rng, h * h, s2),
            b2: vec![0.0; h],
            w3: uniform_init(rng, v * h, s3),
            b3: vec![0.0; v],
            m1: vec![true; h * input],
            m2: vec![true; h * h],
            m3: vec![true; v * h],
            vocab,
            grads: Gradients::default(),
        })
    }

    pub fn spec(&self) -> TinyLmSpec {
        TinyLmSpec {
            context: self.context,
            embed_dim: self.embed_dim,
            hidden_dim: self.hidden_dim,
        }
    }

    pub fn vocab(&self) -> &[char] {
        &self.vocab
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn context(&self) -> usize {
        self.context
    }

    /// Prunable / nonprunable split of this model.
    pub fn shape(&self) -> ModelShape {
        ModelShape {
            prunable_params: (self.w1.len() + self.w2.len() + self.w3.len()) as u64,
            nonprunable_params: (self.embed.len() + self.b1.len() + self.b2.len() + self.b3.len())
                as u64,
        }
    }

    /// Prunable weights whose mask bit is still set.
    pub fn active_prunable(&self) -> u64 {
        let count = |m: &[bool]| m.iter().filter(|&&b| b).count() as u64;
        count(&self.m1) + count(&self.m2) + count(&self.m3)
    }

    /// Active parameters including the nonprunable mass.
    pub fn active_params(&self) -> u64 {
        self.active_prunable() + self.shape().nonprunable_params
    }

    /// Sum of |weight| over masked positions; exactly zero when no pruned
    /// weight has leaked back.
    pub fn masked_abs_sum(&self) -> f64 {
        let leak = |w: &[f64], m: &[bool]| {
            w.iter()
                .zip(m)
                .filter(|(_, &keep)| !keep)
                .map(|(x, _)| math::abs(*x))
                .sum::<f64>()
        };
        leak(&self.w1, &self.m1) + leak(&self.w2, &self.m2) + leak(&self.w3, &self.m3)
    }

    pub fn weights(&self, layer: Layer) -> &[f64] {
        match layer {
            Layer::Hidden1 => &self.w1,
            Layer::Hidden2 => &self.w2,
            Layer::Output => &self.w3,
        }
    }

    pub fn mask(&self, layer: Layer) -> &[bool] {
        match layer {
            Layer::Hidden1 => &self.m1,
            Layer::Hidden2 => &self.m2,
            Layer::Output => &self.m3,
        }
    }

    pub fn embedding(&self) -> &[f64] {
        &self.embed
    }

    pub fn biases(&self) -> (&[f64], &[f64], &[f64]) {
        (&self.b1, &self.b2, &self.b3)
    }

    /// Raw parts for checkpoint serialization; the order is
    /// (embed, w1, b1, w2, b2, w3, b3) with masks (m1, m2, m3).
    #[allow(clippy::type_complexity)]
    pub fn raw_parts(&self) -> (Vec<&[f64]>, Vec<&[bool]>) {
        (
            vec![
                &self.embed, &self.w1, &self.b1, &self.w2, &self.b2, &self.w3, &self.b3,
            ],
            vec![&self.m1, &self.m2, &self.m3],
        )
    }

    /// Rebuilds a model from checkpoint data.
    #[allow(clippy::too_many_arguments)]
    pub fn from_raw_parts(
        spec: TinyLmSpec,
        vocab: Vec<char>,
        tensors: Vec<Vec<f64>>,
        masks: Vec<Vec<bool>>,
    ) -> Result<Self, TrainError> {
        if tensors.len() != 7 || masks.len() != 3 {
            return Err(TrainError::CheckpointShape);
        }
        let v = vocab.len();
        let input = spec.context * spec.embed_dim;
        let h = spec.hidden_dim;
        let mut it = tensors.into_iter();
        let embed = it.next().unwrap();
        let w1 = it.next().unwrap();
        let b1 = it.next().unwrap();
        let w2 = it.next().unwrap();
        let b2 = it.next().unwrap();
        let w3 = it.next().unwrap();
        let b3 = it.next().unwrap();
        let mut mi = masks.into_iter();
        let m1 = mi.next().unwrap();
        let m2 = mi.next().unwrap();
        let m3 = mi.next().unwrap();
        let ok = embed.len() == v * spec.embed_dim
            && w1.len() == h * input
            && b1.len() == h
            && w2.len() == h * h
            && b2.len() == h
            && w3.len() == v * h
            && b3.len() == v
            && m1.len() == w1.len()
            && m2.len() == w2.len()
            && m3.len() == w3.len();
        if !ok {
            return Err(TrainError::CheckpointShape);
        }
        Ok(Self {
            vocab,
            context: spec.context,
            embed_dim: spec.embed_dim,
            hidden_dim: spec.hidden_dim,
            embed,
            w1,
            b1,
            w2,
            b2,
            w3,
            b3,
            m1,
            m2,
            m3,
            grads: Gradients::default(),
        })
    }

    fn check_batch(&self, batch: &Batch) -> Result<(), TrainError> {
        if batch.context != self.context
            || batch.inputs.len() != batch.targets.len() * self.context
        {
            return Err(TrainError::BatchShapeMismatch {
                expected_context: self.context,
                got_context: batch.context,
            });
        }
        let v = self.vocab.len() as u32;
        if batch.inputs.iter().chain(batch.targets.iter()).any(|&t| t >= v) {
            return Err(TrainError::TokenOutOfRange);
        }
        Ok(())
    }

    /// Mean cross-entropy of the batch; `accumulate` additionally backprops
    /// into the gradient buffers (scaled by 1/len on update).
    fn forward_batch(&mut self, batch: &Batch, accumulate: bool) -> f64 {
        let v = self.vocab.len();
        let input = self.context * self.embed_dim;
        let h = self.hidden_dim;

        let mut x = vec![0.0; input];
        let mut h1 = vec![0.0; h];
        let mut h2 = vec![0.0; h];
        let mut logits = vec![0.0; v];
        let mut probs = vec![0.0; v];
        let mut dz2 = vec![0.0; h];
        let mut dz1 = vec![0.0; h];
        let mut dh = vec![0.0; h];

        if accumulate {
            let g = &mut self.grads;
            g.embed.clear();
            g.embed.resize(self.embed.len(), 0.0);
            g.w1.clear();
            g.w1.resize(self.w1.len(), 0.0);
            g.b1.clear();
            g.b1.resize(self.b1.len(), 0.0);
            g.w2.clear();
            g.w2.resize(self.w2.len(), 0.0);
            g.b2.clear();
            g.b2.resize(self.b2.len(), 0.0);
            g.w3.clear();
            g.w3.resize(self.w3.len(), 0.0);
            g.b3.clear();
            g.b3.resize(self.b3.len(), 0.0);
        }

        let mut loss_sum = 0.0;
        for (sample, &target) in batch.targets.iter().enumerate() {
            let ctx = &batch.inputs[sample * self.context..(sample + 1) * self.context];
            for (slot, &tok) in ctx.iter().enumerate() {
                let row = &self.embed[tok as usize * self.embed_dim..][..self.embed_dim];
                x[slot * self.embed_dim..(slot + 1) * self.embed_dim].copy_from_slice(row);
            }
            for i in 0..h {
                let row = &self.w1[i * input..(i + 1) * input];
                let mut z = self.b1[i];
                for (wj, xj) in row.iter().zip(&x) {
                    z += wj * xj;
                }
                h1[i] = math::tanh(z);
            }
            for i in 0..h {
                let row = &self.w2[i * h..(i + 1) * h];
                let mut z = self.b2[i];
                for (wj, hj) in row.iter().zip(&h1) {
                    z += wj * hj;
                }
                h2[i] = math::tanh(z);
            }
            let mut max_logit = f64::NEG_INFINITY;
            for i in 0..v {
                let row = &self.w3[i * h..(i + 1) * h];
                let mut z = self.b3[i];
                for (wj, hj) in row.iter().zip(&h2) {
                    z += wj * hj;
                }
                logits[i] = z;
                max_logit = math::fmax(max_logit, z);
            }
            let mut denom = 0.0;
            for i in 0..v {
                probs[i] = math::exp(logits[i] - max_logit);
                denom += probs[i];
            }
            for p in probs.iter_mut() {
                *p /= denom;
            }
            loss_sum += -math::ln(probs[target as usize]);

            if !accumulate {
                continue;
            }
            let g = &mut self.grads;
            // dlogits = probs, minus 1 at the target
            probs[target as usize] -= 1.0;
            for i in 0..v {
                let d = probs[i];
                g.b3[i] += d;
                let grow = &mut g.w3[i * h..(i + 1) * h];
                for (gw, hj) in grow.iter_mut().zip(&h2) {
                    *gw += d * hj;
                }
            }
            // dh2 = W3^T dlogits, dz2 = dh2 * (1 - h2^2)
            for dhi in dh.iter_mut() {
                *dhi = 0.0;
            }
            for i in 0..v {
                let d = probs[i];
                let row = &self.w3[i * h..(i + 1) * h];
                for (dhj, wj) in dh.iter_mut().zip(row) {
                    *dhj += d * wj;
                }
            }
            for i in 0..h {
                dz2[i] = dh[i] * (1.0 - h2[i] * h2[i]);
                g.b2[i] += dz2[i];
                let grow = &mut g.w2[i * h..(i + 1) * h];
                for (gw, hj) in grow.iter_mut().zip(&h1) {
                    *gw += dz2[i] * hj;
                }
            }
            for dhi in dh.iter_mut() {
                *dhi = 0.0;
            }
            for i in 0..h {
                let d = dz2[i];
                let row = &self.w2[i * h..(i + 1) * h];
                for (dhj, wj) in dh.iter_mut().zip(row) {
                    *dhj += d * wj;
                }
            }
            for i in 0..h {
                dz1[i] = dh[i] * (1.0 - h1[i] * h1[i]);
                g.b1[i] += dz1[i];
                let grow = &mut g.w1[i * input..(i + 1) * input];
                for (gw, xj) in grow.iter_mut().zip(&x) {
                    *gw += dz1[i] * xj;
                }
            }
            // dx = W1^T dz1, scattered into the context embedding rows
            for (slot, &tok) in ctx.iter().enumerate() {
                let erow =
                    &mut g.embed[tok as usize * self.embed_dim..][..self.embed_dim];
                for i in 0..h {
                    let d = dz1[i];
                    let wrow = &self.w1[i * input + slot * self.embed_dim..][..self.embed_dim];
                    for (ge, wj) in erow.iter_mut().zip(wrow) {
                        *ge += d * wj;
                    }
                }
            }
        }
        loss_sum / batch.len() as f64
    }

    /// Mean batch loss without touching parameters or gradients.
    pub fn batch_loss(&mut self, batch: &Batch) -> Result<f64, TrainError> {
        self.check_batch(batch)?;
        if batch.is_empty() {
            return Err(TrainError::EmptyBatch);
        }
        Ok(self.forward_batch(batch, false))
    }

    /// One masked gradient-descent step; returns the pre-update batch loss.
    /// Pruned weights receive no update and stay exactly zero.
    pub fn train_step(&mut self, batch: &Batch, learning_rate: f64) -> Result<f64, TrainError> {
        self.check_batch(batch)?;
        if batch.is_empty() {
            return Err(TrainError::EmptyBatch);
        }
        let loss = self.forward_batch(batch, true);
        let scale = learning_rate / batch.len() as f64;
        let g = &mut self.grads;
        for (w, gw) in self.embed.iter_mut().zip(&g.embed) {
            *w -= scale * gw;
        }
        for (w, gw) in self.b1.iter_mut().zip(&g.b1) {
            *w -= scale * gw;
        }
        for (w, gw) in self.b2.iter_mut().zip(&g.b2) {
            *w -= scale * gw;
        }
        for (w, gw) in self.b3.iter_mut().zip(&g.b3) {
            *w -= scale * gw;
        }
        for ((w, gw), &keep) in self.w1.iter_mut().zip(&g.w1).zip(&self.m1) {
            if keep {
                *w -= scale * gw;
            }
        }
        for ((w, gw), &keep) in self.w2.iter_mut().zip(&g.w2).zip(&self.m2) {
            if keep {
                *w -= scale * gw;
            }
        }
        for ((w, gw), &keep) in self.w3.iter_mut().zip(&g.w3).zip(&self.m3) {
            if keep {
                *w -= scale * gw;
            }
        }
        Ok(loss)
    }

    /// Mean analytic parameter gradient of the batch loss, flattened in
    /// checkpoint tensor order. Test support for finite-difference checks.
    pub fn batch_gradient(&mut self, batch: &Batch) -> Result<Vec<f64>, TrainError> {
        self.check_batch(batch)?;
        self.forward_batch(batch, true);
        let g = &self.grads;
        let n = batch.len() as f64;
        Ok(g
            .embed
            .iter()
            .chain(&g.w1)
            .chain(&g.b1)
            .chain(&g.w2)
            .chain(&g.b2)
            .chain(&g.w3)
            .chain(&g.b3)
            .map(|v| v / n)
            .collect())
    }

    /// Flat read/write access to all parameters in checkpoint tensor order.
    /// Test support for finite-difference checks.
    pub fn param_mut(&mut self, index: usize) -> &mut f64 {
        let sizes = [
            self.embed.len(),
            self.w1.len(),
            self.b1.len(),
            self.w2.len(),
            self.b2.len(),
            self.w3.len(),
            self.b3.len(),
        ];
        let mut idx = index;
        for (t, &len) in sizes.iter().enumerate() {
            if idx < len {
                return match t {
                    0 => &mut self.embed[idx],
                    1 => &mut self.w1[idx],
                    2 => &mut self.b1[idx],
                    3 => &mut self.w2[idx],
                    4 => &mut self.b2[idx],
                    5 => &mut self.w3[idx],
                    _ => &mut self.b3[idx],
                };
            }
            idx -= len;
        }
        panic!("parameter index out of range");
    }

    pub fn param_count(&self) -> usize {
        self.embed.len()
            + self.w1.len()
            + self.b1.len()
            + self.w2.len()
            + self.b2.len()
            + self.w3.len()
            + self.b3.len()
    }

    /// Zeroes the output projection so all logits are equal; the loss is then
    /// exactly ln(vocab). Test support.
    pub fn flatten_output(&mut self) {
        self.w3.iter_mut().for_each(|w| *w = 0.0);
        self.b3.iter_mut().for_each(|w| *w = 0.0);
    }

    /// Global magnitude pruning over all three weight matrices jointly:
    /// keeps exactly `target_remaining` active weights, the largest by
    /// absolute value; ties break toward the lower global index. Mask bits
    /// only ever clear, and pruned weights are set to exactly zero.
    pub fn global_magnitude_prune(&mut self, target_remaining: u64) -> Result<u64, TrainError> {
        let active = self.active_prunable();
        if target_remaining > active {
            return Err(TrainError::PruneTargetExceedsActive {
                target: target_remaining,
                active,
            });
        }
        if target_remaining == active {
            return Ok(0);
        }
        let mut ranked: Vec<(f64, u32)> = Vec::with_capacity(active as usize);
        let mut offset = 0u32;
        for (w, m) in [(&self.w1, &self.m1), (&self.w2, &self.m2), (&self.w3, &self.m3)] {
            for (i, (&weight, &keep)) in w.iter().zip(m.iter()).enumerate() {
                if keep {
                    ranked.push((math::abs(weight), offset + i as u32));
                }
            }
            offset += w.len() as u32;
        }
        ranked.sort_unstable_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let evicted = &ranked[target_remaining as usize..];
        let l1 = self.w1.len() as u32;
        let l2 = l1 + self.w2.len() as u32;
        for &(_, idx) in evicted {
            if idx < l1 {
                self.m1[idx as usize] = false;
                self.w1[idx as usize] = 0.0;
            } else if idx < l2 {
                self.m2[(idx - l1) as usize] = false;
                self.w2[(idx - l1) as usize] = 0.0;
            } else {
                self.m3[(idx - l2) as usize] = false;
                self.w3[(idx - l2) as usize] = 0.0;
            }
        }
        Ok(evicted.len() as u64)
    }
}
