//! Cross-entropy training of the decision network with hand-rolled backprop
//! and momentum gradient descent. Deterministic given the seed: batches are
//! shuffled with a seeded generator and gradients are reduced in a fixed
//! order.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dataset::LabeledSample;
use super::net::{
    matmul_a_bt_acc, matmul_at_b_acc, DecisionNet, Linear, N_DIRECTIONS, OBSTACLE_FEATURES,
    TARGET_FEATURES,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("cannot train on an empty dataset")]
    EmptyDataset,
    #[error("sample {0} has no obstacles")]
    EmptySample(usize),
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            lr: 1e-3,
            momentum: 0.9,
            batch_size: 256,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    /// Mean cross-entropy per epoch.
    pub loss_history: Vec<f64>,
    /// Label accuracy on the training set after the final epoch.
    pub final_accuracy: f64,
}

/// Gradients with the same shapes as the network's layers.
#[derive(Debug, Clone)]
pub struct NetGrads {
    pub layers: Vec<(Vec<f64>, Vec<f64>)>, // (dW, db) per layer
    /// Label rows that produced the gradient (for averaging across groups).
    pub rows: usize,
}

impl NetGrads {
    fn zeros_like(net: &DecisionNet) -> Self {
        let layers = net
            .layers()
            .iter()
            .map(|l| (vec![0.0; l.w.len()], vec![0.0; l.b.len()]))
            .collect();
        Self { layers, rows: 0 }
    }

    fn add_scaled(&mut self, other: &NetGrads, scale: f64) {
        for ((w, b), (ow, ob)) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in w.iter_mut().zip(ow) {
                *x += scale * y;
            }
            for (x, y) in b.iter_mut().zip(ob) {
                *x += scale * y;
            }
        }
    }
}

/// Group sample indices by obstacle count so each forward pass is
/// homogeneous; group order is the order of first appearance.
fn group_by_m(samples: &[LabeledSample], idx: &[usize]) -> Vec<(usize, Vec<usize>)> {
    let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
    for &i in idx {
        let m = samples[i].obstacles.len();
        match groups.iter_mut().find(|(gm, _)| *gm == m) {
            Some((_, v)) => v.push(i),
            None => groups.push((m, vec![i])),
        }
    }
    groups
}

fn pack_group(
    samples: &[LabeledSample],
    idx: &[usize],
    m: usize,
) -> (Vec<f64>, Vec<f64>, Vec<usize>) {
    let b = idx.len();
    let mut obs = Vec::with_capacity(b * m * OBSTACLE_FEATURES);
    let mut tgt = Vec::with_capacity(b * TARGET_FEATURES);
    let mut labels = Vec::with_capacity(b * m);
    for &i in idx {
        let s = &samples[i];
        for o in &s.obstacles {
            obs.extend_from_slice(o);
        }
        tgt.extend_from_slice(&s.target);
        labels.extend(s.labels.iter().map(|d| d.index()));
    }
    (obs, tgt, labels)
}

/// Mean cross-entropy and analytic gradients over the given samples
/// (all obstacle counts allowed; rows are weighted uniformly).
pub fn loss_and_grads(
    net: &DecisionNet,
    samples: &[LabeledSample],
    idx: &[usize],
) -> Result<(f64, NetGrads), TrainError> {
    if idx.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let mut total = NetGrads::zeros_like(net);
    let mut loss_sum = 0.0;
    let mut rows_total = 0usize;
    for (m, members) in group_by_m(samples, idx) {
        if m == 0 {
            return Err(TrainError::EmptySample(members[0]));
        }
        let (loss, grads, rows) = group_loss_and_grads(net, samples, &members, m);
        loss_sum += loss * rows as f64;
        rows_total += rows;
        total.add_scaled(&grads, rows as f64);
    }
    for (w, b) in total.layers.iter_mut() {
        for v in w.iter_mut() {
            *v /= rows_total as f64;
        }
        for v in b.iter_mut() {
            *v /= rows_total as f64;
        }
    }
    total.rows = rows_total;
    Ok((loss_sum / rows_total as f64, total))
}

fn group_loss_and_grads(
    net: &DecisionNet,
    samples: &[LabeledSample],
    idx: &[usize],
    m: usize,
) -> (f64, NetGrads, usize) {
    let h = net.hidden;
    let b = idx.len();
    let rows = b * m;
    let (obs, tgt, labels) = pack_group(samples, idx, m);
    let tr = net.forward_batch(obs, &tgt, b, m);

    // loss and dlogits (softmax + cross-entropy combined)
    let mut loss = 0.0;
    let mut dlogits = tr.probs.clone();
    for (r, &label) in labels.iter().enumerate() {
        let p = tr.probs[r * N_DIRECTIONS + label].max(1e-300);
        loss -= p.ln();
        dlogits[r * N_DIRECTIONS + label] -= 1.0;
    }
    loss /= rows as f64;
    for v in dlogits.iter_mut() {
        *v /= rows as f64;
    }

    let mut grads = NetGrads::zeros_like(net);

    // head2: logits = a3 . W4 + b4
    matmul_at_b_acc(&tr.a3, rows, h, &dlogits, N_DIRECTIONS, &mut grads.layers[4].0);
    col_sums(&dlogits, rows, N_DIRECTIONS, &mut grads.layers[4].1);
    let mut da3 = vec![0.0; rows * h];
    matmul_a_bt_acc(&dlogits, rows, N_DIRECTIONS, &net.head2.w, h, &mut da3);
    tanh_backward(&mut da3, &tr.a3);

    // head1: a3 = tanh(head_in . W3 + b3)
    let head_w = 2 * h + TARGET_FEATURES;
    matmul_at_b_acc(&tr.head_in, rows, head_w, &da3, h, &mut grads.layers[3].0);
    col_sums(&da3, rows, h, &mut grads.layers[3].1);
    let mut dhead_in = vec![0.0; rows * head_w];
    matmul_a_bt_acc(&da3, rows, h, &net.head1.w, head_w, &mut dhead_in);

    // split the head-input gradient: own encoding | pooled context | target
    let mut da2 = vec![0.0; rows * h];
    let mut dg = vec![0.0; b * h];
    for s in 0..b {
        for o in 0..m {
            let r = s * m + o;
            let src = &dhead_in[r * head_w..(r + 1) * head_w];
            for k in 0..h {
                da2[r * h + k] += src[k];
                dg[s * h + k] += src[h + k];
            }
        }
    }

    // global: g = tanh(pool . Wg + bg)
    tanh_backward(&mut dg, &tr.g);
    matmul_at_b_acc(&tr.pool, b, h, &dg, h, &mut grads.layers[2].0);
    col_sums(&dg, b, h, &mut grads.layers[2].1);
    let mut dpool = vec![0.0; b * h];
    matmul_a_bt_acc(&dg, b, h, &net.global.w, h, &mut dpool);

    // pooling: each obstacle row receives dpool / m
    for s in 0..b {
        for o in 0..m {
            let r = s * m + o;
            for k in 0..h {
                da2[r * h + k] += dpool[s * h + k] / m as f64;
            }
        }
    }

    // enc2: a2 = tanh(a1 . W2 + b2)
    tanh_backward(&mut da2, &tr.a2);
    matmul_at_b_acc(&tr.a1, rows, h, &da2, h, &mut grads.layers[1].0);
    col_sums(&da2, rows, h, &mut grads.layers[1].1);
    let mut da1 = vec![0.0; rows * h];
    matmul_a_bt_acc(&da2, rows, h, &net.enc2.w, h, &mut da1);

    // enc1: a1 = tanh(obs_x . W1 + b1)
    tanh_backward(&mut da1, &tr.a1);
    matmul_at_b_acc(&tr.obs_x, rows, OBSTACLE_FEATURES, &da1, h, &mut grads.layers[0].0);
    col_sums(&da1, rows, h, &mut grads.layers[0].1);

    grads.rows = rows;
    (loss, grads, rows)
}

fn tanh_backward(d: &mut [f64], activated: &[f64]) {
    for (g, a) in d.iter_mut().zip(activated) {
        *g *= 1.0 - a * a;
    }
}

fn col_sums(x: &[f64], rows: usize, cols: usize, out: &mut [f64]) {
    for r in 0..rows {
        for c in 0..cols {
            out[c] += x[r * cols + c];
        }
    }
}

/// Mean cross-entropy of the network on a sample set.
pub fn batch_loss(net: &DecisionNet, samples: &[LabeledSample]) -> f64 {
    let idx: Vec<usize> = (0..samples.len()).collect();
    loss_and_grads(net, samples, &idx).map(|(l, _)| l).unwrap_or(f64::NAN)
}

fn accuracy(net: &DecisionNet, samples: &[LabeledSample]) -> f64 {
    let mut hit = 0usize;
    let mut total = 0usize;
    for s in samples {
        let assignment = net.decide(&s.features());
        for (got, want) in assignment.0.iter().zip(&s.labels) {
            total += 1;
            if got == want {
                hit += 1;
            }
        }
    }
    if total == 0 {
        0.0
    } else {
        hit as f64 / total as f64
    }
}

/// Minibatch gradient descent with momentum.
pub fn train(
    net: &mut DecisionNet,
    samples: &[LabeledSample],
    cfg: &TrainConfig,
) -> Result<TrainReport, TrainError> {
    if samples.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    if let Some(i) = samples.iter().position(|s| s.obstacles.is_empty()) {
        return Err(TrainError::EmptySample(i));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut velocity: Vec<(Vec<f64>, Vec<f64>)> = net
        .layers()
        .iter()
        .map(|l| (vec![0.0; l.w.len()], vec![0.0; l.b.len()]))
        .collect();
    let mut history = Vec::with_capacity(cfg.epochs);

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut epoch_rows = 0usize;
        for chunk in order.chunks(cfg.batch_size.max(1)) {
            let (loss, grads) = loss_and_grads(net, samples, chunk)?;
            epoch_loss += loss * grads.rows as f64;
            epoch_rows += grads.rows;
            for ((layer, vel), (dw, db)) in net
                .layers_mut()
                .into_iter()
                .zip(velocity.iter_mut())
                .zip(grads.layers.iter())
            {
                update(&mut layer.w, &mut vel.0, dw, cfg);
                update(&mut layer.b, &mut vel.1, db, cfg);
            }
        }
        history.push(epoch_loss / epoch_rows.max(1) as f64);
    }

    let final_accuracy = accuracy(net, samples);
    Ok(TrainReport {
        loss_history: history,
        final_accuracy,
    })
}

fn update(w: &mut [f64], vel: &mut [f64], grad: &[f64], cfg: &TrainConfig) {
    for ((wi, vi), gi) in w.iter_mut().zip(vel.iter_mut()).zip(grad) {
        *vi = cfg.momentum * *vi - cfg.lr * gi;
        *wi += *vi;
    }
}

/// Allow tests to read/perturb parameters uniformly.
pub fn flat_params_mut(net: &mut DecisionNet) -> Vec<&mut f64> {
    let mut out = Vec::new();
    for layer in net.layers_mut() {
        let Linear { w, b, .. } = layer;
        out.extend(w.iter_mut());
        out.extend(b.iter_mut());
    }
    out
}

/// Gradients flattened in the same order as [`flat_params_mut`].
pub fn flat_grads(grads: &NetGrads) -> Vec<f64> {
    let mut out = Vec::new();
    for (w, b) in &grads.layers {
        out.extend_from_slice(w);
        out.extend_from_slice(b);
    }
    out
}
