//! Negacyclic NTT over `Z_q[x]/(x^n + 1)` in naive, four-step and three-step
//! form, plus the multi-exit physical pipeline used to split one large
//! transform circuit into several independent smaller ones.
//!
//! Forward transforms evaluate at the odd powers of a primitive `2n`-th root
//! `ψ`: output `k` of the natural ordering is `Σ_j a_j ψ^{j(2k+1)}`.

use crate::modarith::{butterfly_ct, butterfly_gs, primitive_root_of_unity, ArithError, Modulus};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NttError {
    #[error("expected {expected} coefficients, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("bad factorization: {0}")]
    BadFactorization(String),
    #[error("transform size {0} is not a power of two >= 2")]
    BadSize(usize),
    #[error("target 2^{target} does not fit a 2^{physical} pipeline")]
    TargetTooLarge { physical: u32, target: u32 },
    #[error("invalid pipeline window: {0}")]
    BadWindow(String),
    #[error(transparent)]
    Arith(#[from] ArithError),
}

/// How a plan splits its transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Factorization {
    Naive,
    /// `n = rows · cols`; `rows`-point transforms first, then `cols`-point.
    FourStep {
        rows: usize,
        cols: usize,
    },
    /// `n = t · rows · cols`.
    ThreeStep {
        t: usize,
        rows: usize,
        cols: usize,
    },
}

/// Immutable transform plan: size, modulus, root and twiddle tables.
#[derive(Debug, Clone)]
pub struct NttPlan {
    n: usize,
    modulus: Modulus,
    psi: u32,
    factorization: Factorization,
    psi_pows: Vec<u32>,
    psi_inv_pows: Vec<u32>,
    // ω^i for i < n with ω = ψ²
    omega_pows: Vec<u32>,
    omega_inv_pows: Vec<u32>,
    n_inv: u32,
}

pub fn bit_reverse(x: usize, bits: u32) -> usize {
    if bits == 0 {
        0
    } else {
        x.reverse_bits() >> (usize::BITS - bits)
    }
}

pub fn bit_reverse_permute<T>(data: &mut [T]) {
    let bits = data.len().trailing_zeros();
    for i in 0..data.len() {
        let j = bit_reverse(i, bits);
        if i < j {
            data.swap(i, j);
        }
    }
}

fn powers(m: &Modulus, base: u32, count: usize) -> Vec<u32> {
    let mut out = Vec::with_capacity(count);
    let mut acc = 1 % m.value();
    for _ in 0..count {
        out.push(acc);
        acc = m.mul(acc, base);
    }
    out
}

impl NttPlan {
    /// Naive plan using the canonical primitive `2n`-th root of `modulus`.
    pub fn new(n: usize, modulus: Modulus) -> Result<Self, NttError> {
        if n < 2 || !n.is_power_of_two() {
            return Err(NttError::BadSize(n));
        }
        let psi = primitive_root_of_unity(2 * n as u64, &modulus)?;
        Self::with_root(n, modulus, psi)
    }

    /// Naive plan with an explicit root; `psi^n` must equal `q − 1`.
    pub fn with_root(n: usize, modulus: Modulus, psi: u32) -> Result<Self, NttError> {
        if n < 2 || !n.is_power_of_two() {
            return Err(NttError::BadSize(n));
        }
        let q = modulus.value();
        if modulus.pow(psi, n as u64) != q - 1 {
            return Err(NttError::Arith(ArithError::NoSuchRoot { order: 2 * n as u64, q }));
        }
        let psi_inv = modulus.inv(psi)?;
        let omega = modulus.mul(psi, psi);
        let omega_inv = modulus.mul(psi_inv, psi_inv);
        Ok(Self {
            n,
            modulus,
            psi,
            factorization: Factorization::Naive,
            psi_pows: powers(&modulus, psi, n),
            psi_inv_pows: powers(&modulus, psi_inv, n),
            omega_pows: powers(&modulus, omega, n),
            omega_inv_pows: powers(&modulus, omega_inv, n),
            n_inv: modulus.inv(n as u32 % q)?,
        })
    }

    pub fn four_step(mut self, rows: usize, cols: usize) -> Result<Self, NttError> {
        if !rows.is_power_of_two() || !cols.is_power_of_two() || rows * cols != self.n {
            return Err(NttError::BadFactorization(format!(
                "{rows} x {cols} does not factor n = {}",
                self.n
            )));
        }
        self.factorization = Factorization::FourStep { rows, cols };
        Ok(self)
    }

    pub fn three_step(mut self, t: usize, rows: usize, cols: usize) -> Result<Self, NttError> {
        if !t.is_power_of_two() || !rows.is_power_of_two() || !cols.is_power_of_two() || t * rows * cols != self.n {
            return Err(NttError::BadFactorization(format!(
                "{t} x {rows} x {cols} does not factor n = {}",
                self.n
            )));
        }
        self.factorization = Factorization::ThreeStep { t, rows, cols };
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn modulus(&self) -> &Modulus {
        &self.modulus
    }

    pub fn root(&self) -> u32 {
        self.psi
    }

    pub fn factorization(&self) -> Factorization {
        self.factorization
    }

    fn check_len(&self, len: usize) -> Result<(), NttError> {
        if len != self.n {
            return Err(NttError::LengthMismatch {
                expected: self.n,
                got: len,
            });
        }
        Ok(())
    }

    // ω^(e mod n)
    #[inline]
    fn omega(&self, e: usize) -> u32 {
        self.omega_pows[e % self.n]
    }

    fn twisted(&self, coeffs: &[u32]) -> Vec<u32> {
        coeffs
            .iter()
            .zip(&self.psi_pows)
            .map(|(&a, &p)| self.modulus.mul(a, p))
            .collect()
    }

    /// In-place cyclic NTT of length `len` (dividing `n`), natural order in
    /// and out, with root `ω^(n/len)`. Radix-2 decimation in time.
    fn cyclic_in_place(&self, data: &mut [u32]) {
        let len = data.len();
        debug_assert!(len.is_power_of_two() && self.n.is_multiple_of(len));
        bit_reverse_permute(data);
        let stride = self.n / len;
        let mut half = 1;
        while half < len {
            let step = stride * (len / (2 * half));
            for start in (0..len).step_by(2 * half) {
                for j in 0..half {
                    let w = self.omega_pows[j * step];
                    let (x, y) = butterfly_ct(data[start + j], data[start + j + half], w, &self.modulus);
                    data[start + j] = x;
                    data[start + j + half] = y;
                }
            }
            half *= 2;
        }
    }

    /// Cyclic four-step transform of `x` (length `rows·cols`, root
    /// `ω^(n/len)`). Output is in column-major storage: position
    /// `k1·cols + k2` holds natural output `k1 + rows·k2`.
    fn cyclic_four_step(&self, x: &[u32], rows: usize, cols: usize) -> Vec<u32> {
        let len = rows * cols;
        let stride = self.n / len;
        let m = &self.modulus;
        // i. rows-point transforms over each strided column, giving a cols × rows matrix
        let mut a = vec![0u32; len];
        let mut col = vec![0u32; rows];
        for n2 in 0..cols {
            for n1 in 0..rows {
                col[n1] = x[cols * n1 + n2];
            }
            self.cyclic_in_place(&mut col);
            a[n2 * rows..(n2 + 1) * rows].copy_from_slice(&col);
        }
        // ii. twisting factors ω_len^(n2·k1)
        for n2 in 0..cols {
            for k1 in 0..rows {
                let idx = n2 * rows + k1;
                a[idx] = m.mul(a[idx], self.omega(stride * n2 * k1));
            }
        }
        // iii. transpose to rows × cols
        let mut out = vec![0u32; len];
        for n2 in 0..cols {
            for k1 in 0..rows {
                out[k1 * cols + n2] = a[n2 * rows + k1];
            }
        }
        // iv. cols-point transforms on each row; the final transpose is skipped
        for row in out.chunks_mut(cols) {
            self.cyclic_in_place(row);
        }
        out
    }

    /// Storage position → natural output index for this plan's layout.
    pub fn storage_to_natural(&self) -> Vec<usize> {
        match self.factorization {
            Factorization::Naive => (0..self.n).collect(),
            Factorization::FourStep { rows, cols } => (0..self.n).map(|s| (s / cols) + rows * (s % cols)).collect(),
            Factorization::ThreeStep { t, rows, cols } => {
                let inner = rows * cols;
                (0..self.n)
                    .map(|s| {
                        let (k1, pos) = (s / inner, s % inner);
                        let k_inner = (pos / cols) + rows * (pos % cols);
                        k1 + t * k_inner
                    })
                    .collect()
            }
        }
    }

    /// Rearranges a four-/three-step result into natural order.
    pub fn reorder_to_natural(&self, storage: &[u32]) -> Result<Vec<u32>, NttError> {
        self.check_len(storage.len())?;
        let mut out = vec![0u32; self.n];
        for (s, k) in self.storage_to_natural().into_iter().enumerate() {
            out[k] = storage[s];
        }
        Ok(out)
    }
}

/// Forward negacyclic NTT, natural order in and out.
pub fn ntt_forward(coeffs: &[u32], plan: &NttPlan) -> Result<Vec<u32>, NttError> {
    plan.check_len(coeffs.len())?;
    let mut data = plan.twisted(coeffs);
    plan.cyclic_in_place(&mut data);
    Ok(data)
}

/// Inverse of [`ntt_forward`]: Gentleman–Sande butterflies, decimation in
/// frequency.
pub fn ntt_inverse(values: &[u32], plan: &NttPlan) -> Result<Vec<u32>, NttError> {
    plan.check_len(values.len())?;
    let n = plan.n;
    let m = &plan.modulus;
    let mut data = values.to_vec();
    let mut len = n;
    while len >= 2 {
        let half = len / 2;
        let step = n / len;
        for start in (0..n).step_by(len) {
            for j in 0..half {
                let w = plan.omega_inv_pows[j * step];
                let (x, y) = butterfly_gs(data[start + j], data[start + j + half], w, m);
                data[start + j] = x;
                data[start + j + half] = y;
            }
        }
        len = half;
    }
    bit_reverse_permute(&mut data);
    Ok(data
        .iter()
        .zip(&plan.psi_inv_pows)
        .map(|(&v, &p)| m.mul(m.mul(v, plan.n_inv), p))
        .collect())
}

/// Four-step forward transform; output in column-major storage (see
/// [`NttPlan::reorder_to_natural`]).
pub fn ntt_four_step(coeffs: &[u32], plan: &NttPlan) -> Result<Vec<u32>, NttError> {
    plan.check_len(coeffs.len())?;
    let Factorization::FourStep { rows, cols } = plan.factorization else {
        return Err(NttError::BadFactorization("plan is not four-step".into()));
    };
    let x = plan.twisted(coeffs);
    Ok(plan.cyclic_four_step(&x, rows, cols))
}

/// Three-step forward transform: `t`-point stage, twisting, then a
/// `rows × cols` four-step transform per output lane.
pub fn ntt_three_step(coeffs: &[u32], plan: &NttPlan) -> Result<Vec<u32>, NttError> {
    plan.check_len(coeffs.len())?;
    let Factorization::ThreeStep { t, rows, cols } = plan.factorization else {
        return Err(NttError::BadFactorization("plan is not three-step".into()));
    };
    let m = &plan.modulus;
    let inner = rows * cols;
    let x = plan.twisted(coeffs);

    // first dimension: t-point transforms over stride-`inner` slices
    let mut stage = vec![0u32; plan.n];
    let mut col = vec![0u32; t];
    for pos in 0..inner {
        for n1 in 0..t {
            col[n1] = x[inner * n1 + pos];
        }
        plan.cyclic_in_place(&mut col);
        for k1 in 0..t {
            // first twisting boundary
            stage[k1 * inner + pos] = m.mul(col[k1], plan.omega(pos * k1));
        }
    }
    // second and third dimensions
    let mut out = Vec::with_capacity(plan.n);
    for lane in stage.chunks(inner) {
        out.extend(plan.cyclic_four_step(lane, rows, cols));
    }
    Ok(out)
}

/// Sub-range of a physical pipeline's stages carrying `lanes` independent
/// smaller transforms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PipelineWindow {
    pub total_log_n: u32,
    pub entry_stage: u32,
    pub exit_stage: u32,
    pub lanes: usize,
}

impl PipelineWindow {
    pub fn sub_log_n(&self) -> u32 {
        self.exit_stage - self.entry_stage
    }

    pub fn sub_size(&self) -> usize {
        1 << self.sub_log_n()
    }

    fn validate(&self) -> Result<(), NttError> {
        if self.entry_stage > self.exit_stage || self.exit_stage > self.total_log_n {
            return Err(NttError::BadWindow(format!(
                "stages {}..{} outside 0..={}",
                self.entry_stage, self.exit_stage, self.total_log_n
            )));
        }
        if self.lanes << self.sub_log_n() != 1 << self.total_log_n {
            return Err(NttError::BadWindow(format!(
                "{} lanes of 2^{} do not fill 2^{}",
                self.lanes,
                self.sub_log_n(),
                self.total_log_n
            )));
        }
        Ok(())
    }
}

/// Splits a `2^physical_log_n` pipeline into `2^(physical − target)` lanes
/// of `2^target`-point transforms by exiting early.
///
/// Lanes are interleaved: element `i` of lane `ℓ` sits at position
/// `i·lanes + ℓ`, so the first `target` stages only ever pair elements of the
/// same lane.
pub fn decompose_pipeline(physical_log_n: u32, target_log_n: u32) -> Result<PipelineWindow, NttError> {
    if target_log_n > physical_log_n {
        return Err(NttError::TargetTooLarge {
            physical: physical_log_n,
            target: target_log_n,
        });
    }
    Ok(PipelineWindow {
        total_log_n: physical_log_n,
        entry_stage: 0,
        exit_stage: target_log_n,
        lanes: 1 << (physical_log_n - target_log_n),
    })
}

/// The physical negacyclic butterfly pipeline: `log_n` stages of `n/2`
/// Cooley–Tukey butterflies with a fixed twiddle ROM. Natural order in,
/// bit-reversed order out.
#[derive(Debug, Clone)]
pub struct NttCircuit {
    log_n: u32,
    modulus: Modulus,
    psi: u32,
    // zetas[k] = ψ^bitrev(k)
    zetas: Vec<u32>,
}

impl NttCircuit {
    pub fn new(log_n: u32, modulus: Modulus) -> Result<Self, NttError> {
        let psi = primitive_root_of_unity(1u64 << (log_n + 1), &modulus)?;
        Self::with_root(log_n, modulus, psi)
    }

    pub fn with_root(log_n: u32, modulus: Modulus, psi: u32) -> Result<Self, NttError> {
        let n = 1usize << log_n;
        if modulus.pow(psi, n as u64) != modulus.value() - 1 {
            return Err(NttError::Arith(ArithError::NoSuchRoot {
                order: 2 * n as u64,
                q: modulus.value(),
            }));
        }
        let zetas = (0..n).map(|k| modulus.pow(psi, bit_reverse(k, log_n) as u64)).collect();
        Ok(Self {
            log_n,
            modulus,
            psi,
            zetas,
        })
    }

    pub fn log_n(&self) -> u32 {
        self.log_n
    }

    pub fn root(&self) -> u32 {
        self.psi
    }

    /// Root of the sub-transforms a window computes: `ψ^lanes`.
    pub fn lane_root(&self, window: &PipelineWindow) -> u32 {
        self.modulus.pow(self.psi, window.lanes as u64)
    }

    /// Runs stages `entry_stage..exit_stage` on `data`.
    pub fn run_window(&self, window: &PipelineWindow, data: &[u32]) -> Result<Vec<u32>, NttError> {
        window.validate()?;
        if window.total_log_n != self.log_n {
            return Err(NttError::BadWindow(format!(
                "window built for 2^{}, circuit is 2^{}",
                window.total_log_n, self.log_n
            )));
        }
        let n = 1usize << self.log_n;
        if data.len() != n {
            return Err(NttError::LengthMismatch {
                expected: n,
                got: data.len(),
            });
        }
        let mut x = data.to_vec();
        for stage in window.entry_stage..window.exit_stage {
            let len = n >> (stage + 1);
            let blocks = 1usize << stage;
            for b in 0..blocks {
                let zeta = self.zetas[blocks + b];
                let base = b * 2 * len;
                for j in base..base + len {
                    let (u, v) = butterfly_ct(x[j], x[j + len], zeta, &self.modulus);
                    x[j] = u;
                    x[j + len] = v;
                }
            }
        }
        Ok(x)
    }

    /// Full transform (all stages), bit-reversed output.
    pub fn run(&self, data: &[u32]) -> Result<Vec<u32>, NttError> {
        let window = decompose_pipeline(self.log_n, self.log_n)?;
        self.run_window(&window, data)
    }

    /// Interleaves `lanes` inputs, runs the window, and returns each lane's
    /// result in natural order.
    pub fn run_lanes(&self, window: &PipelineWindow, inputs: &[Vec<u32>]) -> Result<Vec<Vec<u32>>, NttError> {
        window.validate()?;
        if window.entry_stage != 0 {
            return Err(NttError::BadWindow("lane interleaving needs entry stage 0".into()));
        }
        if inputs.len() != window.lanes {
            return Err(NttError::BadWindow(format!(
                "{} lane inputs for {} lanes",
                inputs.len(),
                window.lanes
            )));
        }
        let size = window.sub_size();
        let mut data = vec![0u32; 1 << self.log_n];
        for (lane, input) in inputs.iter().enumerate() {
            if input.len() != size {
                return Err(NttError::LengthMismatch {
                    expected: size,
                    got: input.len(),
                });
            }
            for (i, &v) in input.iter().enumerate() {
                data[i * window.lanes + lane] = v;
            }
        }
        let out = self.run_window(window, &data)?;
        let bits = window.sub_log_n();
        Ok((0..window.lanes)
            .map(|lane| {
                let mut natural = vec![0u32; size];
                for i in 0..size {
                    natural[bit_reverse(i, bits)] = out[i * window.lanes + lane];
                }
                natural
            })
            .collect())
    }
}
