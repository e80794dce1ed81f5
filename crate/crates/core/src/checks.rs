//! Seeded self-check suites comparing the fast kernels against the slow
//! references in [`crate::oracle`]. Each suite reports per-property case
//! and failure counts; nothing is timed, so reports are byte-stable.

use crate::modarith::{default_modulus, Modulus};
use crate::ntt::{decompose_pipeline, ntt_forward, ntt_four_step, ntt_inverse, ntt_three_step, NttCircuit, NttPlan};
use crate::oracle::{bconv_overflow, negacyclic_convolution, negacyclic_dft};
use crate::rns::{crt_reconstruct, BasisConverter, Domain, RnsBasis, RnsPolynomial};
use crate::transpose::{distribute, l1_transpose, route_l2, route_l3, Mode, PortStream, L1_PORTS, L2_PORTS, L3_PORTS};
use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

pub const DEFAULT_NTT_SIZES: [usize; 5] = [4, 8, 16, 64, 256];
pub const DEFAULT_TILE_SIZES: [usize; 6] = [1, 2, 4, 8, 16, 32];
pub const BCONV_SOURCE: [u32; 4] = [97, 101, 103, 107];
pub const BCONV_TARGET: [u32; 3] = [109, 113, 127];
/// Physical circuit size the pipeline-window property splits.
pub const WINDOW_PHYSICAL_LOG_N: u32 = 8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertyResult {
    pub suite: String,
    pub property: String,
    pub size: usize,
    pub cases: u64,
    pub failures: u64,
    pub first_failure: Option<String>,
}

impl PropertyResult {
    fn new(suite: &str, property: &str, size: usize) -> Self {
        Self {
            suite: suite.into(),
            property: property.into(),
            size,
            cases: 0,
            failures: 0,
            first_failure: None,
        }
    }

    fn record(&mut self, ok: bool, detail: impl FnOnce() -> String) {
        self.cases += 1;
        if !ok {
            self.failures += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(detail());
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckReport {
    pub seed: u64,
    pub results: Vec<PropertyResult>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(|r| r.failures == 0)
    }

    pub fn total_cases(&self) -> u64 {
        self.results.iter().map(|r| r.cases).sum()
    }

    pub fn total_failures(&self) -> u64 {
        self.results.iter().map(|r| r.failures).sum()
    }

    pub fn failing(&self) -> impl Iterator<Item = &PropertyResult> {
        self.results.iter().filter(|r| r.failures > 0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NttCheckConfig {
    pub seed: u64,
    pub sizes: Vec<usize>,
    pub vectors: usize,
    pub bconv_inputs: usize,
    /// Corrupts one four-step output per size so the harness must report it.
    pub inject_fault: bool,
}

impl Default for NttCheckConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            sizes: DEFAULT_NTT_SIZES.to_vec(),
            vectors: 50,
            bconv_inputs: 10_000,
            inject_fault: false,
        }
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize, m: &Modulus) -> Vec<u32> {
    (0..n).map(|_| rng.gen_range(0..m.value())).collect()
}

fn split_two(n: usize) -> (usize, usize) {
    let k = n.trailing_zeros();
    let rows = 1 << k.div_ceil(2);
    (rows, n / rows)
}

fn split_three(n: usize) -> (usize, usize, usize) {
    let k = n.trailing_zeros();
    let t = 1 << k.div_ceil(3);
    let (r, c) = split_two(n / t);
    (t, r, c)
}

fn ntt_size_suite(n: usize, cfg: &NttCheckConfig) -> Result<Vec<PropertyResult>, String> {
    if n < 2 || !n.is_power_of_two() {
        return Err(format!("size {n} is not a power of two >= 2"));
    }
    let m = default_modulus();
    let naive = NttPlan::new(n, m).map_err(|e| e.to_string())?;
    let (rows, cols) = split_two(n);
    let four = naive.clone().four_step(rows, cols).map_err(|e| e.to_string())?;
    let (t, r, c) = split_three(n);
    let three = naive.clone().three_step(t, r, c).map_err(|e| e.to_string())?;
    let psi = naive.root();

    let mut rng = rng_for(cfg.seed, n as u64);
    let mut dft = PropertyResult::new("ntt", "naive_vs_dft", n);
    let mut fs = PropertyResult::new("ntt", "four_step_vs_naive", n);
    let mut ts = PropertyResult::new("ntt", "three_step_vs_naive", n);
    let mut inv = PropertyResult::new("ntt", "inverse_roundtrip", n);
    let mut conv = PropertyResult::new("ntt", "convolution_vs_schoolbook", n);
    let run = |r: Result<Vec<u32>, crate::ntt::NttError>| r.map_err(|e| e.to_string());

    for v in 0..cfg.vectors {
        let a = random_vec(&mut rng, n, &m);
        let b = random_vec(&mut rng, n, &m);
        let fa = run(ntt_forward(&a, &naive))?;
        dft.record(fa == negacyclic_dft(&a, psi, &m), || format!("vector {v}"));

        let mut four_out = run(ntt_four_step(&a, &four))?;
        if cfg.inject_fault && v == 0 {
            let i = rng.gen_range(0..n);
            four_out[i] = m.add(four_out[i], 1);
        }
        let four_nat = run(four.reorder_to_natural(&four_out))?;
        fs.record(four_nat == fa, || format!("vector {v} ({rows} x {cols})"));

        let three_nat = run(three.reorder_to_natural(&run(ntt_three_step(&a, &three))?))?;
        ts.record(three_nat == fa, || format!("vector {v} ({t} x {r} x {c})"));

        inv.record(run(ntt_inverse(&fa, &naive))? == a, || format!("vector {v}"));

        let fb = run(ntt_forward(&b, &naive))?;
        let prod: Vec<u32> = fa.iter().zip(&fb).map(|(&x, &y)| m.mul(x, y)).collect();
        conv.record(
            run(ntt_inverse(&prod, &naive))? == negacyclic_convolution(&a, &b, &m),
            || format!("vector {v}"),
        );
    }
    let mut out = vec![dft, fs, ts, inv, conv];

    let log_n = n.trailing_zeros();
    if log_n <= WINDOW_PHYSICAL_LOG_N {
        out.push(window_property(log_n, cfg, &m)?);
    }
    Ok(out)
}

/// Splits the 2^8-point circuit into `2^8 / n` lanes and checks each lane
/// against a direct transform with root `ψ^lanes`.
fn window_property(log_n: u32, cfg: &NttCheckConfig, m: &Modulus) -> Result<PropertyResult, String> {
    let circuit = NttCircuit::new(WINDOW_PHYSICAL_LOG_N, *m).map_err(|e| e.to_string())?;
    let window = decompose_pipeline(WINDOW_PHYSICAL_LOG_N, log_n).map_err(|e| e.to_string())?;
    let lane_root = circuit.lane_root(&window);
    let n = 1usize << log_n;
    let mut res = PropertyResult::new("ntt", "pipeline_window_lanes", n);
    let mut rng = rng_for(cfg.seed, 1 << 32 | n as u64);
    for v in 0..cfg.vectors {
        let inputs: Vec<Vec<u32>> = (0..window.lanes).map(|_| random_vec(&mut rng, n, m)).collect();
        let outs = circuit.run_lanes(&window, &inputs).map_err(|e| e.to_string())?;
        let ok = inputs
            .iter()
            .zip(&outs)
            .all(|(x, y)| *y == negacyclic_dft(x, lane_root, m));
        res.record(ok, || format!("vector {v}, {} lanes", window.lanes));
    }
    Ok(res)
}

/// BConv returns `x + e·Q` with `0 <= e < k` for every input.
pub fn bconv_suite(seed: u64, inputs: usize) -> Result<PropertyResult, String> {
    let src = RnsBasis::from_values(&BCONV_SOURCE).map_err(|e| e.to_string())?;
    let dst = RnsBasis::from_values(&BCONV_TARGET).map_err(|e| e.to_string())?;
    let conv = BasisConverter::new(&src, &dst);
    let mut rng = rng_for(seed, 2 << 32);
    let k = BCONV_SOURCE.len() as u64;
    let big_q = crate::oracle::product(&BCONV_SOURCE);
    let mut res = PropertyResult::new("rns", "bconv_overflow_bound", BCONV_SOURCE.len());
    // polynomials need power-of-two lengths: one batch per set bit
    let batches = (0..usize::BITS).rev().map(|b| inputs & (1 << b)).filter(|&len| len > 0);
    let mut index = 0usize;
    for len in batches {
        let rows: Vec<Vec<u32>> = BCONV_SOURCE
            .iter()
            .map(|&q| (0..len).map(|_| rng.gen_range(0..q)).collect())
            .collect();
        let poly = RnsPolynomial::new(src.clone(), rows.clone(), Domain::Coefficient).map_err(|e| e.to_string())?;
        let xs = crt_reconstruct(&poly).map_err(|e| e.to_string())?;
        let out = conv.convert(&poly).map_err(|e| e.to_string())?;
        for (i, x) in xs.iter().enumerate() {
            let residues: Vec<u32> = rows.iter().map(|r| r[i]).collect();
            let ok = match bconv_overflow(x, &residues, &BCONV_SOURCE) {
                Some(e) if e < k => {
                    let y = x + &big_q * e;
                    BCONV_TARGET
                        .iter()
                        .zip(out.rows())
                        .all(|(&p, row)| &y % p == BigUint::from(row[i]))
                }
                _ => false,
            };
            res.record(ok, || format!("input {} (x = {x})", index + i));
        }
        index += len;
    }
    Ok(res)
}

pub fn run_ntt_checks(cfg: &NttCheckConfig) -> Result<CheckReport, String> {
    let mut results = Vec::new();
    for &n in &cfg.sizes {
        results.extend(ntt_size_suite(n, cfg)?);
    }
    if cfg.bconv_inputs > 0 {
        results.push(bconv_suite(cfg.seed, cfg.bconv_inputs)?);
    }
    Ok(CheckReport {
        seed: cfg.seed,
        results,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransposeCheckConfig {
    pub seed: u64,
    pub tile_sizes: Vec<usize>,
    /// Tiles streamed back to back per run.
    pub tiles: usize,
    pub inject_fault: bool,
}

impl Default for TransposeCheckConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            tile_sizes: DEFAULT_TILE_SIZES.to_vec(),
            tiles: 3,
            inject_fault: false,
        }
    }
}

/// L1 tile-transpose bijection per tile size, static wiring formulas over
/// every port, and exact partitioning by the distributor.
pub fn run_transpose_checks(cfg: &TransposeCheckConfig) -> Result<CheckReport, String> {
    let mut results = Vec::new();
    let mut rng = rng_for(cfg.seed, 3 << 32);
    for &d in &cfg.tile_sizes {
        let mut res = PropertyResult::new("transpose", "l1_tile_bijection", d);
        let input = PortStream::matrix(0, d * cfg.tiles.max(1), L1_PORTS);
        let mut out = l1_transpose(&input, d).map_err(|e| e.to_string())?.stream;
        if cfg.inject_fault {
            let f = rng.gen_range(0..out.frames.len());
            out.frames[f].swap(0, L1_PORTS - 1);
        }
        let mut seen = HashSet::new();
        for (f, frame) in out.frames.iter().enumerate() {
            for (p, slot) in frame.iter().enumerate() {
                let want = input.frames[f - f % d + p % d][p - p % d + f % d];
                let unique = slot.is_some_and(|t| seen.insert(t));
                res.record(*slot == want && unique, || format!("frame {f} port {p}"));
            }
        }
        results.push(res);
    }

    let mut l2 = PropertyResult::new("transpose", "l2_wiring", L2_PORTS);
    let mut hit = vec![false; L2_PORTS];
    for j in 0..4 {
        for i in 0..L2_PORTS / 4 {
            let g = route_l2(i, j).map_err(|e| e.to_string())?;
            l2.record(g == 4 * i + j && !std::mem::replace(&mut hit[g], true), || {
                format!("({i}, {j})")
            });
        }
    }
    results.push(l2);
    let mut l3 = PropertyResult::new("transpose", "l3_wiring", L3_PORTS);
    let mut hit = vec![false; L3_PORTS];
    for j in 0..8 {
        for i in 0..L3_PORTS / 8 {
            let g = route_l3(i, j).map_err(|e| e.to_string())?;
            l3.record(g == 8 * i + j && !std::mem::replace(&mut hit[g], true), || {
                format!("({i}, {j})")
            });
        }
    }
    results.push(l3);

    for (mode, n_point) in [(Mode::Shallow, 1usize << 13), (Mode::Deep, 1 << 16)] {
        let mut res = PropertyResult::new("transpose", &format!("distribute_{mode:?}").to_lowercase(), n_point);
        let data = PortStream::matrix(0, n_point / mode.rows(), mode.rows());
        let parts = distribute(&data, mode, n_point).map_err(|e| e.to_string())?;
        let k = mode.clusters();
        let mut seen = HashSet::new();
        for (j, part) in parts.iter().enumerate() {
            for (slot, col) in part.frames.iter().enumerate() {
                let i = slot * k + j;
                res.record(*col == data.frames[i] && seen.insert(i), || {
                    format!("cluster {j} slot {slot}")
                });
            }
        }
        res.record(seen.len() == data.frames.len(), || "columns lost".into());
        results.push(res);
    }
    Ok(CheckReport {
        seed: cfg.seed,
        results,
    })
}
