//! The decision network itself: five dense blocks on flat `f64` buffers,
//! plus little-endian weight persistence.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::DecisionFeatures;

pub const OBSTACLE_FEATURES: usize = 5;
pub const TARGET_FEATURES: usize = 3;
pub const N_DIRECTIONS: usize = 3;
/// Default width of every hidden block.
pub const HIDDEN_WIDTH: usize = 64;

const WEIGHTS_MAGIC: &[u8; 8] = b"VOCBFDN1";

#[derive(Debug, thiserror::Error)]
pub enum NetIoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("not a decision-network weights file (bad magic)")]
    BadMagic,
    #[error("weights file layout mismatch: {0}")]
    BadLayout(String),
}

/// Dense layer `y = x W + b` with `w` stored row-major `(in_dim x out_dim)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub in_dim: usize,
    pub out_dim: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Linear {
    fn seeded(in_dim: usize, out_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let w = (0..in_dim * out_dim)
            .map(|_| rng.random_range(-limit..limit))
            .collect();
        Self {
            in_dim,
            out_dim,
            w,
            b: vec![0.0; out_dim],
        }
    }

    fn zeroed(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            w: vec![0.0; in_dim * out_dim],
            b: vec![0.0; out_dim],
        }
    }

    /// `y (rows x out) = x (rows x in) . w + b`, overwriting `y`.
    pub fn forward(&self, x: &[f64], rows: usize, y: &mut Vec<f64>) {
        y.clear();
        for _ in 0..rows {
            y.extend_from_slice(&self.b);
        }
        matmul_acc(x, rows, self.in_dim, &self.w, self.out_dim, y);
    }
}

/// `c += a (m x k) . b (k x n)`, all row-major.
pub(crate) fn matmul_acc(a: &[f64], m: usize, k: usize, b: &[f64], n: usize, c: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    if m == 0 || k == 0 || n == 0 {
        return;
    }
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            n as isize,
            1,
            1.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `c += a' (k x m)' . b (k x n)`, i.e. `a` is stored `(k x m)`.
pub(crate) fn matmul_at_b_acc(a: &[f64], k: usize, m: usize, b: &[f64], n: usize, c: &mut [f64]) {
    debug_assert_eq!(a.len(), k * m);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    if m == 0 || k == 0 || n == 0 {
        return;
    }
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            1,
            m as isize,
            b.as_ptr(),
            n as isize,
            1,
            1.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `c += a (m x k) . b' (n x k)'`.
pub(crate) fn matmul_a_bt_acc(a: &[f64], m: usize, k: usize, b: &[f64], n: usize, c: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(c.len(), m * n);
    if m == 0 || k == 0 || n == 0 {
        return;
    }
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            1,
            k as isize,
            1.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

pub(crate) fn tanh_inplace(x: &mut [f64]) {
    for v in x.iter_mut() {
        *v = v.tanh();
    }
}

/// Five-block decision network; all hidden blocks share one width.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionNet {
    pub hidden: usize,
    /// Per-obstacle encoder, first layer.
    pub enc1: Linear,
    /// Per-obstacle encoder, second layer.
    pub enc2: Linear,
    /// Pooled-context layer over the obstacle average.
    pub global: Linear,
    /// Scoring head on `[encoding, context, target]`.
    pub head1: Linear,
    pub head2: Linear,
}

/// Intermediate activations of one forward pass, kept for backprop.
#[derive(Debug, Clone, Default)]
pub(crate) struct ForwardTrace {
    pub obs_x: Vec<f64>,
    pub a1: Vec<f64>,
    pub a2: Vec<f64>,
    pub pool: Vec<f64>,
    pub g: Vec<f64>,
    pub head_in: Vec<f64>,
    pub a3: Vec<f64>,
    pub probs: Vec<f64>,
}

impl DecisionNet {
    pub fn with_hidden(hidden: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            hidden,
            enc1: Linear::seeded(OBSTACLE_FEATURES, hidden, &mut rng),
            enc2: Linear::seeded(hidden, hidden, &mut rng),
            global: Linear::seeded(hidden, hidden, &mut rng),
            head1: Linear::seeded(2 * hidden + TARGET_FEATURES, hidden, &mut rng),
            head2: Linear::seeded(hidden, N_DIRECTIONS, &mut rng),
        }
    }

    /// Default-width network with seeded initialization.
    pub fn seeded(seed: u64) -> Self {
        Self::with_hidden(HIDDEN_WIDTH, seed)
    }

    /// All-zero weights: outputs are uniform over the three directions.
    pub fn zeroed(hidden: usize) -> Self {
        Self {
            hidden,
            enc1: Linear::zeroed(OBSTACLE_FEATURES, hidden),
            enc2: Linear::zeroed(hidden, hidden),
            global: Linear::zeroed(hidden, hidden),
            head1: Linear::zeroed(2 * hidden + TARGET_FEATURES, hidden),
            head2: Linear::zeroed(hidden, N_DIRECTIONS),
        }
    }

    pub(crate) fn layers(&self) -> [&Linear; 5] {
        [&self.enc1, &self.enc2, &self.global, &self.head1, &self.head2]
    }

    pub(crate) fn layers_mut(&mut self) -> [&mut Linear; 5] {
        [
            &mut self.enc1,
            &mut self.enc2,
            &mut self.global,
            &mut self.head1,
            &mut self.head2,
        ]
    }

    /// Forward pass over a homogeneous batch (`samples` scenes, `m` obstacles
    /// each). Feature rows are ordered sample-major.
    pub(crate) fn forward_batch(
        &self,
        obs_x: Vec<f64>,
        targets: &[f64],
        samples: usize,
        m: usize,
    ) -> ForwardTrace {
        let h = self.hidden;
        let rows = samples * m;
        debug_assert_eq!(obs_x.len(), rows * OBSTACLE_FEATURES);
        debug_assert_eq!(targets.len(), samples * TARGET_FEATURES);

        let mut tr = ForwardTrace {
            obs_x,
            ..Default::default()
        };

        self.enc1.forward(&tr.obs_x, rows, &mut tr.a1);
        tanh_inplace(&mut tr.a1);
        self.enc2.forward(&tr.a1, rows, &mut tr.a2);
        tanh_inplace(&mut tr.a2);

        // average pooling over each sample's obstacles
        tr.pool = vec![0.0; samples * h];
        for s in 0..samples {
            for o in 0..m {
                let row = &tr.a2[(s * m + o) * h..(s * m + o + 1) * h];
                for (p, v) in tr.pool[s * h..(s + 1) * h].iter_mut().zip(row) {
                    *p += v / m as f64;
                }
            }
        }
        self.global.forward(&tr.pool, samples, &mut tr.g);
        tanh_inplace(&mut tr.g);

        // head input: [own encoding | pooled context | target]
        let head_w = 2 * h + TARGET_FEATURES;
        tr.head_in = vec![0.0; rows * head_w];
        for s in 0..samples {
            for o in 0..m {
                let r = s * m + o;
                let dst = &mut tr.head_in[r * head_w..(r + 1) * head_w];
                dst[..h].copy_from_slice(&tr.a2[r * h..(r + 1) * h]);
                dst[h..2 * h].copy_from_slice(&tr.g[s * h..(s + 1) * h]);
                dst[2 * h..].copy_from_slice(
                    &targets[s * TARGET_FEATURES..(s + 1) * TARGET_FEATURES],
                );
            }
        }
        self.head1.forward(&tr.head_in, rows, &mut tr.a3);
        tanh_inplace(&mut tr.a3);
        let mut logits = Vec::new();
        self.head2.forward(&tr.a3, rows, &mut logits);

        // row-wise softmax
        for row in logits.chunks_exact_mut(N_DIRECTIONS) {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                sum += *v;
            }
            for v in row.iter_mut() {
                *v /= sum;
            }
        }
        tr.probs = logits;
        tr
    }

    /// Per-obstacle probability triples for one scene.
    pub fn forward(&self, features: &DecisionFeatures) -> Vec<[f64; N_DIRECTIONS]> {
        let m = features.obstacles.len();
        if m == 0 {
            return Vec::new();
        }
        let mut obs_x = Vec::with_capacity(m * OBSTACLE_FEATURES);
        for o in &features.obstacles {
            obs_x.extend_from_slice(o);
        }
        let tr = self.forward_batch(obs_x, &features.target, 1, m);
        tr.probs
            .chunks_exact(N_DIRECTIONS)
            .map(|c| [c[0], c[1], c[2]])
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<(), NetIoError> {
        let mut buf: Vec<u8> = Vec::new();
        buf.extend_from_slice(WEIGHTS_MAGIC);
        for v in [
            self.hidden as u32,
            OBSTACLE_FEATURES as u32,
            TARGET_FEATURES as u32,
            5u32,
        ] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for layer in self.layers() {
            buf.extend_from_slice(&(layer.in_dim as u32).to_le_bytes());
            buf.extend_from_slice(&(layer.out_dim as u32).to_le_bytes());
            for v in layer.w.iter().chain(layer.b.iter()) {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        let mut f = std::fs::File::create(path)?;
        f.write_all(&buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, NetIoError> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        let mut pos = 0usize;
        let take = |pos: &mut usize, n: usize| -> Result<&[u8], NetIoError> {
            if *pos + n > bytes.len() {
                return Err(NetIoError::BadLayout("truncated file".into()));
            }
            let s = &bytes[*pos..*pos + n];
            *pos += n;
            Ok(s)
        };
        if take(&mut pos, 8)? != WEIGHTS_MAGIC {
            return Err(NetIoError::BadMagic);
        }
        let read_u32 = |pos: &mut usize| -> Result<u32, NetIoError> {
            let s = take(pos, 4)?;
            Ok(u32::from_le_bytes([s[0], s[1], s[2], s[3]]))
        };
        let hidden = read_u32(&mut pos)? as usize;
        let obs_feat = read_u32(&mut pos)? as usize;
        let tgt_feat = read_u32(&mut pos)? as usize;
        let n_layers = read_u32(&mut pos)? as usize;
        if obs_feat != OBSTACLE_FEATURES || tgt_feat != TARGET_FEATURES || n_layers != 5 {
            return Err(NetIoError::BadLayout(format!(
                "expected features {OBSTACLE_FEATURES}/{TARGET_FEATURES} with 5 layers, \
                 got {obs_feat}/{tgt_feat} with {n_layers}"
            )));
        }
        let expected_dims = [
            (OBSTACLE_FEATURES, hidden),
            (hidden, hidden),
            (hidden, hidden),
            (2 * hidden + TARGET_FEATURES, hidden),
            (hidden, N_DIRECTIONS),
        ];
        let mut net = DecisionNet::zeroed(hidden);
        for (layer, (ein, eout)) in net.layers_mut().into_iter().zip(expected_dims) {
            let in_dim = {
                let s = &bytes[pos..pos + 4];
                pos += 4;
                u32::from_le_bytes([s[0], s[1], s[2], s[3]]) as usize
            };
            let out_dim = {
                let s = &bytes[pos..pos + 4];
                pos += 4;
                u32::from_le_bytes([s[0], s[1], s[2], s[3]]) as usize
            };
            if in_dim != ein || out_dim != eout {
                return Err(NetIoError::BadLayout(format!(
                    "layer dims {in_dim}x{out_dim}, expected {ein}x{eout}"
                )));
            }
            let need = (in_dim * out_dim + out_dim) * 8;
            if pos + need > bytes.len() {
                return Err(NetIoError::BadLayout("truncated weights".into()));
            }
            let mut vals = bytes[pos..pos + need]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes([c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7]]));
            pos += need;
            layer.w = (0..in_dim * out_dim).map(|_| vals.next().unwrap()).collect();
            layer.b = (0..out_dim).map(|_| vals.next().unwrap()).collect();
        }
        if pos != bytes.len() {
            return Err(NetIoError::BadLayout("trailing bytes".into()));
        }
        Ok(net)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn save_load_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.bin");
        let net = DecisionNet::with_hidden(8, 3);
        net.save(&path).unwrap();
        let back = DecisionNet::load(&path).unwrap();
        assert_eq!(net, back);
    }

    #[test]
    fn load_rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.bin");
        std::fs::write(&path, b"not a net").unwrap();
        assert!(DecisionNet::load(&path).is_err());
    }

    #[test]
    fn matmul_small_case() {
        // [1 2; 3 4] * [5 6; 7 8] = [19 22; 43 50]
        let a = vec![1.0, 2.0, 3.0, 4.0];
        let b = vec![5.0, 6.0, 7.0, 8.0];
        let mut c = vec![0.0; 4];
        matmul_acc(&a, 2, 2, &b, 2, &mut c);
        assert_eq!(c, vec![19.0, 22.0, 43.0, 50.0]);

        let mut ct = vec![0.0; 4];
        matmul_at_b_acc(&a, 2, 2, &b, 2, &mut ct); // a' * b = [26 30; 38 44]
        assert_eq!(ct, vec![26.0, 30.0, 38.0, 44.0]);

        let mut cbt = vec![0.0; 4];
        matmul_a_bt_acc(&a, 2, 2, &b, 2, &mut cbt); // a * b' = [17 23; 39 53]
        assert_eq!(cbt, vec![17.0, 23.0, 39.0, 53.0]);
    }
}
