//! System dimensions, channel grids, the bounded CSI error model and the
//! transceiver container.
//!
//! Indices are zero-based in the API. The JSON document format uses the
//! same zero-based `k`/`j` block indices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{c, frob2, CMat};

/// Problem sizes and budgets for a K-pair interference channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemDims {
    pub users: usize,
    pub tx_antennas: usize,
    pub rx_antennas: usize,
    /// Stream count `L_k` per user.
    pub streams: Vec<usize>,
    /// Power budget `P_k` per user.
    pub power: Vec<f64>,
    pub noise: f64,
    /// Squared-Frobenius radius of the CSI error ball.
    pub eps: f64,
}

impl SystemDims {
    /// Homogeneous configuration: every user carries `streams` streams at power `power`.
    pub fn uniform(
        users: usize,
        tx_antennas: usize,
        rx_antennas: usize,
        streams: usize,
        power: f64,
        noise: f64,
        eps: f64,
    ) -> Result<Self> {
        let dims = SystemDims {
            users,
            tx_antennas,
            rx_antennas,
            streams: vec![streams; users],
            power: vec![power; users],
            noise,
            eps,
        };
        dims.validate()?;
        Ok(dims)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidDims(msg));
        if self.users == 0 {
            return bad("need at least one user".into());
        }
        if self.tx_antennas == 0 || self.rx_antennas == 0 {
            return bad("antenna counts must be positive".into());
        }
        if self.streams.len() != self.users || self.power.len() != self.users {
            return bad("per-user stream and power lists must have K entries".into());
        }
        let cap = self.tx_antennas.min(self.rx_antennas);
        if let Some(l) = self.streams.iter().find(|&&l| l == 0 || l > cap) {
            return bad(format!("stream count {l} outside [1, {cap}]"));
        }
        if self.power.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
            return bad("powers must be positive and finite".into());
        }
        if !(self.noise > 0.0 && self.noise.is_finite()) {
            return bad("noise variance must be positive".into());
        }
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return bad("error radius must be non-negative".into());
        }
        Ok(())
    }

    pub fn total_streams(&self) -> usize {
        self.streams.iter().sum()
    }

    /// `P̃ = min_k P_k`.
    pub fn min_power(&self) -> f64 {
        self.power.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Load-share factor `ρ_k = P_k / P̃`.
    pub fn rho(&self, k: usize) -> f64 {
        self.power[k] / self.min_power()
    }

    pub fn with_eps(&self, eps: f64) -> Self {
        SystemDims { eps, ..self.clone() }
    }
}

/// RNG purposes; each gets its own ChaCha stream family so that adding a
/// consumer never shifts the numbers drawn by another.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum RngPurpose {
    Channel = 1,
    Delta = 2,
    DeltaRadius = 3,
    Init = 4,
    Test = 5,
    /// Per-drop seed derivation in the experiment driver.
    Drop = 6,
    /// Instance generation in the acceptance suites.
    Validation = 7,
}

/// ChaCha20 generator for `(seed, purpose, index)`.
///
/// The stream id packs the purpose in the top bits and the block index in the
/// low bits, so every `(k, j)` block draws from an independent stream and the
/// order in which blocks are sampled is irrelevant.
pub fn stream_rng(seed: u64, purpose: RngPurpose, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 48) | (index & 0xFFFF_FFFF_FFFF));
    rng
}

/// Matrix of iid CN(0,1) entries.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMat::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        c(s * re, s * im)
    })
}

/// A K×K grid of N×M matrices; block `(k, j)` maps source `j` to destination `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    users: usize,
    tx_antennas: usize,
    rx_antennas: usize,
    blocks: Vec<CMat>,
}

impl ChannelSet {
    pub fn from_fn(
        users: usize,
        tx_antennas: usize,
        rx_antennas: usize,
        mut f: impl FnMut(usize, usize) -> CMat,
    ) -> Result<Self> {
        let mut blocks = Vec::with_capacity(users * users);
        for k in 0..users {
            for j in 0..users {
                let b = f(k, j);
                if b.nrows() != rx_antennas || b.ncols() != tx_antennas {
                    return Err(Error::DimensionMismatch(format!(
                        "block ({k},{j}) is {}x{}, expected {rx_antennas}x{tx_antennas}",
                        b.nrows(),
                        b.ncols()
                    )));
                }
                blocks.push(b);
            }
        }
        Ok(ChannelSet {
            users,
            tx_antennas,
            rx_antennas,
            blocks,
        })
    }

    pub fn zeros(users: usize, tx_antennas: usize, rx_antennas: usize) -> Self {
        ChannelSet {
            users,
            tx_antennas,
            rx_antennas,
            blocks: vec![CMat::zeros(rx_antennas, tx_antennas); users * users],
        }
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn tx_antennas(&self) -> usize {
        self.tx_antennas
    }

    pub fn rx_antennas(&self) -> usize {
        self.rx_antennas
    }

    /// Channel from source `j` to destination `k`.
    pub fn get(&self, k: usize, j: usize) -> &CMat {
        &self.blocks[k * self.users + j]
    }

    pub fn get_mut(&mut self, k: usize, j: usize) -> &mut CMat {
        &mut self.blocks[k * self.users + j]
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, &CMat)> {
        self.blocks
            .iter()
            .enumerate()
            .map(move |(i, b)| (i / self.users, i % self.users, b))
    }

    fn same_shape(&self, other: &ChannelSet) -> bool {
        self.users == other.users
            && self.tx_antennas == other.tx_antennas
            && self.rx_antennas == other.rx_antennas
    }

    pub fn matches(&self, dims: &SystemDims) -> bool {
        self.users == dims.users
            && self.tx_antennas == dims.tx_antennas
            && self.rx_antennas == dims.rx_antennas
    }

    /// Blockwise `self + other`.
    pub fn add(&self, other: &ChannelSet) -> Result<ChannelSet> {
        if !self.same_shape(other) {
            return Err(Error::DimensionMismatch("channel grids differ in shape".into()));
        }
        let blocks = self
            .blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| a + b)
            .collect();
        Ok(ChannelSet { blocks, ..self.clone_shape() })
    }

    fn clone_shape(&self) -> ChannelSet {
        ChannelSet {
            users: self.users,
            tx_antennas: self.tx_antennas,
            rx_antennas: self.rx_antennas,
            blocks: Vec::new(),
        }
    }

    /// Every block has full rank: smallest singular value above `1e-9`.
    pub fn check_full_rank(&self) -> Result<()> {
        for (k, j, b) in self.iter() {
            let sv = b.singular_values();
            let smallest = sv.iter().copied().fold(f64::INFINITY, f64::min);
            if smallest <= 1e-9 {
                return Err(Error::SingularChannel(k, j));
            }
        }
        Ok(())
    }

    /// Largest squared Frobenius norm over the blocks.
    pub fn max_block_frob2(&self) -> f64 {
        self.blocks.iter().map(frob2).fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(GridDoc::from_grid(self, None)).expect("grid serializes")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let doc: GridDoc =
            serde_json::from_value(v.clone()).map_err(|e| Error::Config(e.to_string()))?;
        doc.into_grid()
    }
}

/// Transmitter-side channel estimates `Ĥ = H − Δ` and the error radius.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiView {
    pub estimates: ChannelSet,
    pub eps: f64,
}

impl CsiView {
    /// Perfect CSI: the estimate is the channel and the error radius is zero.
    pub fn perfect(channels: &ChannelSet) -> Self {
        CsiView {
            estimates: channels.clone(),
            eps: 0.0,
        }
    }

    pub fn hat(&self, k: usize, j: usize) -> &CMat {
        self.estimates.get(k, j)
    }

    pub fn users(&self) -> usize {
        self.estimates.users()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(GridDoc::from_grid(&self.estimates, Some(self.eps)))
            .expect("grid serializes")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let doc: GridDoc =
            serde_json::from_value(v.clone()).map_err(|e| Error::Config(e.to_string()))?;
        let eps = doc
            .eps
            .ok_or_else(|| Error::Config("CSI document is missing \"eps\"".into()))?;
        Ok(CsiView {
            estimates: doc.into_grid()?,
            eps,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct BlockDoc {
    k: usize,
    j: usize,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct GridDoc {
    #[serde(rename = "K")]
    users: usize,
    #[serde(rename = "M")]
    tx_antennas: usize,
    #[serde(rename = "N")]
    rx_antennas: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    eps: Option<f64>,
    blocks: Vec<BlockDoc>,
}

impl GridDoc {
    fn from_grid(grid: &ChannelSet, eps: Option<f64>) -> Self {
        let blocks = grid
            .iter()
            .map(|(k, j, b)| BlockDoc {
                k,
                j,
                re: (0..b.nrows())
                    .map(|r| (0..b.ncols()).map(|c| b[(r, c)].re).collect())
                    .collect(),
                im: (0..b.nrows())
                    .map(|r| (0..b.ncols()).map(|c| b[(r, c)].im).collect())
                    .collect(),
            })
            .collect();
        GridDoc {
            users: grid.users,
            tx_antennas: grid.tx_antennas,
            rx_antennas: grid.rx_antennas,
            eps,
            blocks,
        }
    }

    fn into_grid(self) -> Result<ChannelSet> {
        let (kk, m, n) = (self.users, self.tx_antennas, self.rx_antennas);
        let mut grid = ChannelSet::zeros(kk, m, n);
        let mut seen = vec![false; kk * kk];
        for b in self.blocks {
            if b.k >= kk || b.j >= kk {
                return Err(Error::Config(format!("block index ({},{}) out of range", b.k, b.j)));
            }
            let shape_ok = b.re.len() == n
                && b.im.len() == n
                && b.re.iter().chain(&b.im).all(|row| row.len() == m);
            if !shape_ok {
                return Err(Error::Config(format!("block ({},{}) is not {n}x{m}", b.k, b.j)));
            }
            *grid.get_mut(b.k, b.j) = CMat::from_fn(n, m, |r, col| c(b.re[r][col], b.im[r][col]));
            seen[b.k * kk + b.j] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Config("channel document is missing blocks".into()));
        }
        Ok(grid)
    }
}

/// iid Rayleigh fading: every entry CN(0,1), one ChaCha stream per block.
pub fn generate_channels(dims: &SystemDims, seed: u64) -> ChannelSet {
    let kk = dims.users;
    ChannelSet::from_fn(kk, dims.tx_antennas, dims.rx_antennas, |k, j| {
        let mut rng = stream_rng(seed, RngPurpose::Channel, (k * kk + j) as u64);
        complex_gaussian(&mut rng, dims.rx_antennas, dims.tx_antennas)
    })
    .expect("generated blocks have the configured shape")
}

/// How CSI errors are drawn from the ball `‖Δ‖² ≤ ε`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeltaMode {
    /// Uniform in the Frobenius ball.
    Interior,
    /// On the sphere `‖Δ‖² = ε`.
    #[default]
    Boundary,
}

/// Draws an error grid. Each block is `√ε · r · G/‖G‖` with `G` Gaussian,
/// `r = 1` on the boundary and `r = u^{1/(2NM)}` in the interior.
pub fn sample_delta(dims: &SystemDims, seed: u64, mode: DeltaMode) -> ChannelSet {
    let kk = dims.users;
    let (m, n) = (dims.tx_antennas, dims.rx_antennas);
    if dims.eps == 0.0 {
        return ChannelSet::zeros(kk, m, n);
    }
    let real_dim = (2 * n * m) as f64;
    ChannelSet::from_fn(kk, m, n, |k, j| {
        let idx = (k * kk + j) as u64;
        let mut rng = stream_rng(seed, RngPurpose::Delta, idx);
        let g = complex_gaussian(&mut rng, n, m);
        let radius = match mode {
            DeltaMode::Boundary => 1.0,
            DeltaMode::Interior => {
                let mut r = stream_rng(seed, RngPurpose::DeltaRadius, idx);
                let u: f64 = r.random::<f64>();
                u.max(f64::MIN_POSITIVE).powf(1.0 / real_dim)
            }
        };
        g.scale(dims.eps.sqrt() * radius / frob2(&g).sqrt())
    })
    .expect("sampled blocks have the configured shape")
}

/// `Ĥ = H − Δ` blockwise.
pub fn derive_csi(channels: &ChannelSet, delta: &ChannelSet, eps: f64) -> Result<CsiView> {
    if !channels.same_shape(delta) {
        return Err(Error::DimensionMismatch("channel and error grids differ in shape".into()));
    }
    let blocks = channels
        .blocks
        .iter()
        .zip(&delta.blocks)
        .map(|(h, d)| h - d)
        .collect();
    Ok(CsiView {
        estimates: ChannelSet { blocks, ..channels.clone_shape() },
        eps,
    })
}

/// Per-user precoders `V^(k)` (M×L_k) and decorrelators `U^(k)` (N×L_k).
#[derive(Debug, Clone, PartialEq)]
pub struct TransceiverSet {
    pub precoders: Vec<CMat>,
    pub decorrelators: Vec<CMat>,
}

impl TransceiverSet {
    pub fn users(&self) -> usize {
        self.precoders.len()
    }

    pub fn precoder(&self, k: usize, l: usize) -> crate::numerics::CVec {
        self.precoders[k].column(l).into_owned()
    }

    pub fn decorrelator(&self, k: usize, l: usize) -> crate::numerics::CVec {
        self.decorrelators[k].column(l).into_owned()
    }

    /// Checks shapes against `dims`.
    pub fn check(&self, dims: &SystemDims) -> Result<()> {
        if self.precoders.len() != dims.users || self.decorrelators.len() != dims.users {
            return Err(Error::DimensionMismatch("transceiver count differs from K".into()));
        }
        for k in 0..dims.users {
            let (v, u) = (&self.precoders[k], &self.decorrelators[k]);
            if v.nrows() != dims.tx_antennas
                || u.nrows() != dims.rx_antennas
                || v.ncols() != dims.streams[k]
                || u.ncols() != dims.streams[k]
            {
                return Err(Error::DimensionMismatch(format!(
                    "user {k}: V is {}x{}, U is {}x{}",
                    v.nrows(),
                    v.ncols(),
                    u.nrows(),
                    u.ncols()
                )));
            }
        }
        Ok(())
    }

    /// Multiplies every precoder of every user by `factor`.
    pub fn scale_precoders(&mut self, factor: f64) {
        for v in &mut self.precoders {
            v.scale_mut(factor);
        }
    }
}

/// `Σ_l ‖v_l^(k)‖²`.
pub fn transmit_power(tx: &TransceiverSet, k: usize) -> f64 {
    frob2(&tx.precoders[k])
}
