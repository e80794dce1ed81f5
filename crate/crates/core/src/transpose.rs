//! Cycle-level simulation of the L1 transpose building block, the static
//! L2/L3 wirings and the data distributor.
//!
//! Elements are opaque tags carrying their logical matrix coordinate; the
//! simulator checks routing only.
//!
//! One L1 block has 32 ports. A `d × d` tile occupies `d` consecutive frames
//! on `d` adjacent ports. Inside the block, port `p` is first delayed
//! `p mod d` cycles, the skewed frame is mirrored within each tile, then
//! `log2 d` counter-driven stages rotate it (stage `j` by `2^j` when bit `j`
//! of the counter is set), and a de-skew delay realigns the frames. Exiting
//! after stage `j` yields `2^(j+1) × 2^(j+1)` tiles.

use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::io::Write;
use std::str::FromStr;
use thiserror::Error;

pub const L1_PORTS: usize = 32;
pub const L1_STAGES: u32 = 5;
/// Cycles spent in each switching stage.
pub const MUX_STAGE_CYCLES: u64 = 1;
/// Extra cycles the static L2/L3 wiring adds.
pub const STATIC_WIRING_CYCLES: u64 = 0;
pub const L2_PORTS: usize = 512;
pub const L3_PORTS: usize = 2048;

/// L1 block latency for `d × d` tiles: delay-line fill plus one pass per
/// switching stage.
pub const fn l1_latency(d: usize) -> u64 {
    (d as u64 - 1) + d.trailing_zeros() as u64 * MUX_STAGE_CYCLES
}

pub const L1_FULL_LATENCY: u64 = l1_latency(L1_PORTS);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransposeError {
    #[error("tile size {0} must be a power of two in 1..=32")]
    BadTileSize(usize),
    #[error("incomplete tile: {0}")]
    IncompleteTile(String),
    #[error("unknown mode {0:?} (expected shallow or deep)")]
    BadMode(String),
    #[error("port ({i}, {j}) outside the {mode:?} wiring")]
    PortOutOfRange { i: usize, j: usize, mode: Mode },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

/// Logical coordinate an element carries through the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Tag {
    pub matrix: u32,
    pub row: u32,
    pub col: u32,
}

pub type Frame = Vec<Option<Tag>>;

/// Time-ordered frames of `width` port slots.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortStream {
    pub width: usize,
    pub frames: Vec<Frame>,
}

impl PortStream {
    pub fn new(width: usize, frames: Vec<Frame>) -> Result<Self, TransposeError> {
        if let Some(f) = frames.iter().position(|f| f.len() != width) {
            return Err(TransposeError::ShapeMismatch(format!(
                "frame {f} has {} slots, stream width is {width}",
                frames[f].len()
            )));
        }
        Ok(Self { width, frames })
    }

    /// A `rows × width` matrix streamed row by row; element at frame `r`,
    /// port `c` is tagged `(matrix, r, c)`.
    pub fn matrix(matrix: u32, rows: usize, width: usize) -> Self {
        let frames = (0..rows)
            .map(|r| {
                (0..width)
                    .map(|c| {
                        Some(Tag {
                            matrix,
                            row: r as u32,
                            col: c as u32,
                        })
                    })
                    .collect()
            })
            .collect();
        Self { width, frames }
    }

    pub fn tags(&self) -> impl Iterator<Item = &Tag> {
        self.frames.iter().flatten().flatten()
    }

    pub fn element_count(&self) -> usize {
        self.tags().count()
    }
}

/// Result of one L1 run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct L1Output {
    pub stream: PortStream,
    /// Cycles from a frame entering to its transposed frame leaving.
    pub latency: u64,
    pub cycles: u64,
    pub frames_in: usize,
    pub frames_out: usize,
}

#[derive(Serialize)]
struct TraceRecord<'a> {
    cycle: u64,
    input: &'a Frame,
    output: &'a Frame,
}

fn check_tile(d: usize) -> Result<u32, TransposeError> {
    if d == 0 || d > L1_PORTS || !d.is_power_of_two() {
        return Err(TransposeError::BadTileSize(d));
    }
    Ok(d.trailing_zeros())
}

/// One 32-port L1 building block configured for `d × d` tiles.
#[derive(Debug, Clone)]
pub struct L1Block {
    d: usize,
    stages: u32,
    skew: Vec<VecDeque<Option<Tag>>>,
    // per stage: frame register and the counter value travelling with it
    regs: Vec<(Frame, u64)>,
    deskew: Vec<VecDeque<Option<Tag>>>,
    counter: u64,
}

impl L1Block {
    pub fn new(d: usize) -> Result<Self, TransposeError> {
        let stages = check_tile(d)?;
        let line = |len: usize| VecDeque::from(vec![None; len]);
        Ok(Self {
            d,
            stages,
            skew: (0..L1_PORTS).map(|p| line(p % d)).collect(),
            regs: vec![(vec![None; L1_PORTS], 0); stages as usize],
            deskew: (0..L1_PORTS).map(|p| line(d - 1 - p % d)).collect(),
            counter: 0,
        })
    }

    pub fn exit_stage(&self) -> Option<u32> {
        self.stages.checked_sub(1)
    }

    pub fn latency(&self) -> u64 {
        l1_latency(self.d)
    }

    fn delay(lines: &mut [VecDeque<Option<Tag>>], frame: Frame) -> Frame {
        lines
            .iter_mut()
            .zip(frame)
            .map(|(line, slot)| {
                line.push_back(slot);
                line.pop_front().expect("delay lines are never empty after push")
            })
            .collect()
    }

    fn rotate(&self, frame: &Frame, by: usize) -> Frame {
        let d = self.d;
        let mut out = vec![None; L1_PORTS];
        for (p, slot) in frame.iter().enumerate() {
            let (hi, lo) = (p / d, p % d);
            out[hi * d + (lo + by) % d] = *slot;
        }
        out
    }

    /// Advances one cycle.
    pub fn step(&mut self, input: Frame) -> Frame {
        assert_eq!(input.len(), L1_PORTS);
        let d = self.d;
        let skewed = Self::delay(&mut self.skew, input);
        // mirror within each tile: lo -> d-1-lo
        let mut mirrored = vec![None; L1_PORTS];
        for (p, slot) in skewed.into_iter().enumerate() {
            mirrored[(p / d) * d + (d - 1 - p % d)] = slot;
        }
        let cnt = self.counter + 1;
        self.counter += 1;

        // shift the switching pipeline from the last stage backwards
        let mut carry = (mirrored, cnt);
        for j in 0..self.stages as usize {
            let (frame, c) = carry;
            let switched = if (c >> j) & 1 == 1 {
                self.rotate(&frame, 1 << j)
            } else {
                frame
            };
            carry = std::mem::replace(&mut self.regs[j], (switched, c));
        }
        Self::delay(&mut self.deskew, carry.0)
    }
}

/// Transposes every `d × d` tile of a 32-port stream.
pub fn l1_transpose(stream: &PortStream, d: usize) -> Result<L1Output, TransposeError> {
    run_l1(stream, d, None)
}

/// As [`l1_transpose`], writing one JSON object per cycle to `trace`.
pub fn l1_transpose_traced(stream: &PortStream, d: usize, trace: &mut dyn Write) -> Result<L1Output, TransposeError> {
    run_l1(stream, d, Some(trace))
}

fn run_l1(stream: &PortStream, d: usize, mut trace: Option<&mut dyn Write>) -> Result<L1Output, TransposeError> {
    check_tile(d)?;
    if stream.width != L1_PORTS {
        return Err(TransposeError::ShapeMismatch(format!(
            "L1 block has {L1_PORTS} ports, stream is {} wide",
            stream.width
        )));
    }
    if !stream.frames.len().is_multiple_of(d) {
        return Err(TransposeError::IncompleteTile(format!(
            "{} frames is not a whole number of {d}-frame tiles",
            stream.frames.len()
        )));
    }
    let mut block = L1Block::new(d)?;
    let latency = block.latency();
    let frames_in = stream.frames.len();
    let total_cycles = frames_in as u64 + latency;
    let bubble: Frame = vec![None; L1_PORTS];
    let mut frames = Vec::with_capacity(frames_in);
    for cycle in 0..total_cycles {
        let input = stream
            .frames
            .get(cycle as usize)
            .cloned()
            .unwrap_or_else(|| bubble.clone());
        let output = block.step(input.clone());
        if let Some(w) = trace.as_deref_mut() {
            let rec = TraceRecord {
                cycle,
                input: &input,
                output: &output,
            };
            serde_json::to_writer(&mut *w, &rec)
                .map_err(|e| TransposeError::ShapeMismatch(format!("trace write failed: {e}")))?;
            writeln!(w).map_err(|e| TransposeError::ShapeMismatch(format!("trace write failed: {e}")))?;
        }
        if cycle >= latency {
            frames.push(output);
        } else {
            debug_assert!(output.iter().all(Option::is_none), "output before pipeline fill");
        }
    }
    let frames_out = frames.len();
    Ok(L1Output {
        stream: PortStream {
            width: L1_PORTS,
            frames,
        },
        latency,
        cycles: total_cycles,
        frames_in,
        frames_out,
    })
}

/// Transposes a stream wider than one block by splitting it across
/// `width / 32` side-by-side blocks.
pub fn l1_transpose_wide(stream: &PortStream, d: usize) -> Result<L1Output, TransposeError> {
    if stream.width == 0 || !stream.width.is_multiple_of(L1_PORTS) {
        return Err(TransposeError::ShapeMismatch(format!(
            "width {} is not a multiple of {L1_PORTS}",
            stream.width
        )));
    }
    let blocks = stream.width / L1_PORTS;
    let mut outputs = Vec::with_capacity(blocks);
    for b in 0..blocks {
        let part = PortStream {
            width: L1_PORTS,
            frames: stream
                .frames
                .iter()
                .map(|f| f[b * L1_PORTS..(b + 1) * L1_PORTS].to_vec())
                .collect(),
        };
        outputs.push(l1_transpose(&part, d)?);
    }
    let first = &outputs[0];
    let frames = (0..first.frames_out)
        .map(|t| outputs.iter().flat_map(|o| o.stream.frames[t].clone()).collect())
        .collect();
    Ok(L1Output {
        stream: PortStream {
            width: stream.width,
            frames,
        },
        latency: first.latency,
        cycles: first.cycles,
        frames_in: first.frames_in,
        frames_out: first.frames_out,
    })
}

/// Working mode of the multi-level transpose.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// One affiliation: four 2^7-point lanes joined through L2.
    Shallow,
    /// All eight bootstrappable clusters joined through L3.
    Deep,
}

impl Mode {
    pub fn clusters(self) -> usize {
        match self {
            Mode::Shallow => 4,
            Mode::Deep => 8,
        }
    }

    /// Rows of the matrix view: the NTT circuit size of one cluster lane.
    pub fn rows(self) -> usize {
        match self {
            Mode::Shallow => 128,
            Mode::Deep => 256,
        }
    }
}

impl FromStr for Mode {
    type Err = TransposeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "shallow" => Ok(Mode::Shallow),
            "deep" => Ok(Mode::Deep),
            other => Err(TransposeError::BadMode(other.to_string())),
        }
    }
}

/// Sends column `i` of an `n_point` polynomial's matrix view to cluster
/// `i mod clusters`. Each input frame is one column of `mode.rows()`
/// elements.
pub fn distribute(data: &PortStream, mode: Mode, n_point: usize) -> Result<Vec<PortStream>, TransposeError> {
    if data.width != mode.rows() {
        return Err(TransposeError::ShapeMismatch(format!(
            "{mode:?} columns have {} rows, stream is {} wide",
            mode.rows(),
            data.width
        )));
    }
    if data.width * data.frames.len() != n_point {
        return Err(TransposeError::ShapeMismatch(format!(
            "{} columns of {} do not make a {n_point}-point polynomial",
            data.frames.len(),
            data.width
        )));
    }
    let k = mode.clusters();
    let mut out: Vec<PortStream> = (0..k)
        .map(|_| PortStream {
            width: data.width,
            frames: Vec::new(),
        })
        .collect();
    for (i, col) in data.frames.iter().enumerate() {
        out[i % k].frames.push(col.clone());
    }
    Ok(out)
}

/// Static L1 → L2/L3 wiring.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MultiLevelWiring {
    pub mode: Mode,
}

impl MultiLevelWiring {
    pub fn new(mode: Mode) -> Self {
        Self { mode }
    }

    pub fn global_ports(&self) -> usize {
        match self.mode {
            Mode::Shallow => L2_PORTS,
            Mode::Deep => L3_PORTS,
        }
    }

    /// L1 ports per cluster.
    pub fn cluster_ports(&self) -> usize {
        self.global_ports() / self.mode.clusters()
    }

    pub fn route(&self, i: usize, j: usize) -> Result<usize, TransposeError> {
        match self.mode {
            Mode::Shallow => route_l2(i, j),
            Mode::Deep => route_l3(i, j),
        }
    }
}

/// Port `i` of cluster `j` → L2 port `4i + j`.
pub fn route_l2(i: usize, j: usize) -> Result<usize, TransposeError> {
    if j >= 4 || i >= L2_PORTS / 4 {
        return Err(TransposeError::PortOutOfRange {
            i,
            j,
            mode: Mode::Shallow,
        });
    }
    Ok(4 * i + j)
}

/// Port `i` of cluster `j` → L3 port `8i + j`.
pub fn route_l3(i: usize, j: usize) -> Result<usize, TransposeError> {
    if j >= 8 || i >= L3_PORTS / 8 {
        return Err(TransposeError::PortOutOfRange { i, j, mode: Mode::Deep });
    }
    Ok(8 * i + j)
}

/// Where one element ends up after distribute → L1 → L2/L3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Landing {
    pub frame: usize,
    pub global_port: usize,
}

/// Runs the full multi-level path for an `n_point` polynomial and returns
/// every element's landing slot.
pub fn route_polynomial(
    data: &PortStream,
    mode: Mode,
    n_point: usize,
    d: usize,
) -> Result<Vec<(Tag, Landing)>, TransposeError> {
    let wiring = MultiLevelWiring::new(mode);
    let mut landed = Vec::with_capacity(n_point);
    for (j, cluster) in distribute(data, mode, n_point)?.into_iter().enumerate() {
        if cluster.frames.is_empty() {
            continue;
        }
        // pad the cluster's column stream to whole tiles
        let mut padded = cluster.clone();
        while padded.frames.len() % d != 0 {
            padded.frames.push(vec![None; padded.width]);
        }
        let out = l1_transpose_wide(&padded, d)?;
        for (frame, slots) in out.stream.frames.iter().enumerate() {
            for (i, slot) in slots.iter().enumerate() {
                if let Some(tag) = slot {
                    landed.push((
                        *tag,
                        Landing {
                            frame,
                            global_port: wiring.route(i, j)?,
                        },
                    ));
                }
            }
        }
    }
    Ok(landed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::{HashMap, HashSet};

    /// Checks that `out` is `input` with every `d × d` tile transposed.
    fn assert_tiles_transposed(input: &PortStream, out: &PortStream, d: usize) {
        assert_eq!(input.frames.len(), out.frames.len());
        for (f, frame) in out.frames.iter().enumerate() {
            for (p, slot) in frame.iter().enumerate() {
                let (tile_f, tile_p) = (f - f % d, p - p % d);
                let src = input.frames[tile_f + p % d][tile_p + f % d];
                assert_eq!(*slot, src, "frame {f} port {p} d {d}");
            }
        }
    }

    #[test]
    fn latency_constants() {
        assert_eq!(l1_latency(1), 0);
        assert_eq!(l1_latency(2), 2);
        assert_eq!(L1_FULL_LATENCY, 31 + 5);
        assert_eq!(L1Block::new(4).unwrap().exit_stage(), Some(1));
        assert_eq!(L1Block::new(32).unwrap().exit_stage(), Some(4));
        assert_eq!(L1Block::new(1).unwrap().exit_stage(), None);
    }

    #[test]
    fn d1_is_identity() {
        let s = PortStream::matrix(0, 3, 32);
        let out = l1_transpose(&s, 1).unwrap();
        assert_eq!(out.stream, s);
    }

    #[test]
    fn two_by_two_tile() {
        let s = PortStream::matrix(0, 2, 32);
        let out = l1_transpose(&s, 2).unwrap();
        let t = |r, c| {
            Some(Tag {
                matrix: 0,
                row: r,
                col: c,
            })
        };
        // [[a, b], [c, d]] -> [[a, c], [b, d]]
        assert_eq!(&out.stream.frames[0][..2], &[t(0, 0), t(1, 0)]);
        assert_eq!(&out.stream.frames[1][..2], &[t(0, 1), t(1, 1)]);
    }

    #[test]
    fn full_32_tile_exhaustive() {
        let s = PortStream::matrix(0, 32, 32);
        let out = l1_transpose(&s, 32).unwrap();
        let mut seen = HashSet::new();
        for (f, frame) in out.stream.frames.iter().enumerate() {
            for (p, slot) in frame.iter().enumerate() {
                let tag = slot.expect("no holes");
                assert_eq!((tag.row as usize, tag.col as usize), (p, f));
                assert!(seen.insert(tag));
            }
        }
        assert_eq!(seen.len(), 1024);
    }

    #[test]
    fn all_tile_sizes_back_to_back() {
        for d in [1, 2, 4, 8, 16, 32] {
            // three tiles per port group, streamed back to back
            let s = PortStream::matrix(7, 3 * d, 32);
            let out = l1_transpose(&s, d).unwrap();
            assert_tiles_transposed(&s, &out.stream, d);
            assert_eq!(out.frames_out, out.frames_in);
            assert_eq!(out.cycles, out.frames_in as u64 + out.latency);
            let twice = l1_transpose(&out.stream, d).unwrap();
            assert_eq!(twice.stream, s);
        }
    }

    #[test]
    fn errors() {
        let s = PortStream::matrix(0, 3, 32);
        assert_eq!(l1_transpose(&s, 3).unwrap_err(), TransposeError::BadTileSize(3));
        assert_eq!(l1_transpose(&s, 64).unwrap_err(), TransposeError::BadTileSize(64));
        assert!(matches!(l1_transpose(&s, 2), Err(TransposeError::IncompleteTile(_))));
        let narrow = PortStream::matrix(0, 2, 16);
        assert!(matches!(
            l1_transpose(&narrow, 2),
            Err(TransposeError::ShapeMismatch(_))
        ));
        assert!(PortStream::new(4, vec![vec![None; 3]]).is_err());
    }

    #[test]
    fn trace_has_one_line_per_cycle() {
        let s = PortStream::matrix(0, 4, 32);
        let mut buf = Vec::new();
        let out = l1_transpose_traced(&s, 4, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count() as u64, out.cycles);
        let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(first["cycle"], 0);
    }

    #[test]
    fn routing_examples() {
        assert_eq!(route_l2(0, 3).unwrap(), 3);
        assert_eq!(route_l2(7, 2).unwrap(), 30);
        assert_eq!(route_l3(100, 5).unwrap(), 805);
        assert!(matches!(route_l2(0, 4), Err(TransposeError::PortOutOfRange { .. })));
        assert!(matches!(route_l3(256, 0), Err(TransposeError::PortOutOfRange { .. })));
    }

    #[test]
    fn wirings_are_bijections() {
        for mode in [Mode::Shallow, Mode::Deep] {
            let w = MultiLevelWiring::new(mode);
            let mut hit = vec![false; w.global_ports()];
            for j in 0..mode.clusters() {
                for i in 0..w.cluster_ports() {
                    let g = w.route(i, j).unwrap();
                    assert!(!hit[g]);
                    hit[g] = true;
                }
            }
            assert!(hit.iter().all(|&h| h));
        }
    }

    #[test]
    fn distribute_examples() {
        // 8192-point as 128 x 64: column 5 goes to cluster 1
        let cols = PortStream::matrix(0, 64, 128);
        let parts = distribute(&cols, Mode::Shallow, 8192).unwrap();
        assert_eq!(parts.len(), 4);
        assert!(parts[1].frames.contains(&cols.frames[5]));
        assert_eq!(parts[1].frames[1], cols.frames[5]);

        let four = PortStream::matrix(0, 4, 128);
        let parts = distribute(&four, Mode::Shallow, 512).unwrap();
        for (j, p) in parts.iter().enumerate() {
            assert_eq!(p.frames, vec![four.frames[j].clone()]);
        }

        let deep = PortStream::matrix(0, 64, 256);
        let parts = distribute(&deep, Mode::Deep, 64 * 256).unwrap();
        for (j, p) in parts.iter().enumerate() {
            let want: Vec<_> = (0..64).filter(|i| i % 8 == j).map(|i| deep.frames[i].clone()).collect();
            assert_eq!(p.frames, want);
        }

        assert!(matches!(
            distribute(&deep, Mode::Shallow, 64 * 256),
            Err(TransposeError::ShapeMismatch(_))
        ));
        assert_eq!(
            "sideways".parse::<Mode>(),
            Err(TransposeError::BadMode("sideways".into()))
        );
    }

    #[test]
    fn composed_routing_is_a_bijection() {
        for (mode, n_point) in [(Mode::Shallow, 8192), (Mode::Deep, 1 << 15)] {
            let cols = n_point / mode.rows();
            let data = PortStream::matrix(1, cols, mode.rows());
            for d in [1, 2, 4, 8, 16, 32] {
                let landed = route_polynomial(&data, mode, n_point, d).unwrap();
                assert_eq!(landed.len(), n_point);
                let mut by_slot = HashMap::new();
                let mut tags = HashSet::new();
                for (tag, slot) in &landed {
                    assert!(tags.insert(*tag));
                    assert!(by_slot.insert(*slot, *tag).is_none());
                }
            }
        }
    }
}
