//! Cost model of the heterogeneous accelerator: eight affiliations of one
//! bootstrappable (2^8-point NTT + BConv) and two swift (2^7-point NTT)
//! clusters, a two-level cache and HBM.
//!
//! A job is an op-count abstraction. Shallow jobs run on a single
//! affiliation whose bootstrappable circuit is split into 2^7-point lanes;
//! deep jobs run on all bootstrappable clusters through the Group closed
//! forms of [`crate::perfmodel`].

use crate::ntt::{decompose_pipeline, NttError};
use crate::perfmodel::{
    group_bconv_cost, group_ntt_cost, keyswitch_pipeline_cost, ArchSpec, CycleBreakdown, GroupArchSpec,
    LatencyConstants, ModelError,
};
use crate::transpose::{route_polynomial, Mode, PortStream, TransposeError, L1_PORTS, L2_PORTS};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

pub const BOOTSTRAPPABLE_LOG_N: u32 = 8;
pub const SWIFT_LOG_N: u32 = 7;
pub const SWIFT_PER_AFFILIATION: usize = 2;
pub const CLUSTERS_PER_AFFILIATION: usize = 1 + SWIFT_PER_AFFILIATION;
pub const MIN_LOG_N: u32 = 11;
pub const MAX_SHALLOW_LOG_N: u32 = 14;
pub const MIN_DEEP_LOG_N: u32 = 15;
pub const MAX_LOG_N: u32 = 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("UnsupportedDegree: N = {0}")]
    UnsupportedDegree(u64),
    #[error("DoesNotFitAffiliation: {0}")]
    DoesNotFitAffiliation(String),
    #[error("UnsupportedOp: {op} in a {class:?} workload")]
    UnsupportedOp { op: &'static str, class: WorkloadClass },
    #[error("InvariantViolation: {0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Transpose(#[from] TransposeError),
    #[error(transparent)]
    Ntt(#[from] NttError),
}

impl SimError {
    pub fn kind(&self) -> &'static str {
        match self {
            SimError::UnsupportedDegree(_) => "UnsupportedDegree",
            SimError::DoesNotFitAffiliation(_) => "DoesNotFitAffiliation",
            SimError::UnsupportedOp { .. } => "UnsupportedOp",
            SimError::Invalid(_) => "InvariantViolation",
            SimError::Model(e) => e.kind(),
            SimError::Transpose(_) => "TransposeError",
            SimError::Ntt(_) => "NttError",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlashArchSpec {
    pub affiliations: usize,
    /// Parallel modular multiplications in each bootstrappable BConv unit.
    pub bconv_l_sub: u64,
    /// One L1 cache per affiliation.
    pub l1_cache_bytes: u64,
    /// Total on-chip cache, L1s included.
    pub total_cache_bytes: u64,
    pub hbm_bandwidth_bytes_per_sec: u64,
    #[serde(skip)]
    pub latency: LatencyConstants,
}

impl Default for FlashArchSpec {
    fn default() -> Self {
        Self {
            affiliations: 8,
            bconv_l_sub: 60,
            l1_cache_bytes: 8 << 20,
            total_cache_bytes: 320 << 20,
            hbm_bandwidth_bytes_per_sec: 2 * 512_000_000_000,
            latency: LatencyConstants::default(),
        }
    }
}

impl FlashArchSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        self.latency.validate()?;
        if self.affiliations == 0 {
            return Err(SimError::Invalid("at least one affiliation".into()));
        }
        if self.bconv_l_sub == 0 {
            return Err(SimError::Invalid("bconv_l_sub must be positive".into()));
        }
        if self.l1_cache_bytes == 0 || self.total_cache_bytes == 0 {
            return Err(SimError::Invalid("cache sizes must be positive".into()));
        }
        if self.l1_cache_bytes > self.total_cache_bytes {
            return Err(SimError::Invalid("L1 larger than the total cache".into()));
        }
        if self.hbm_bandwidth_bytes_per_sec == 0 {
            return Err(SimError::Invalid("HBM bandwidth must be positive".into()));
        }
        Ok(())
    }

    /// 2^7-point lanes of one affiliation: the split bootstrappable circuit
    /// plus the swift clusters.
    pub fn shallow_lanes(&self) -> Result<u64, SimError> {
        let window = decompose_pipeline(BOOTSTRAPPABLE_LOG_N, SWIFT_LOG_N)?;
        Ok((window.lanes + SWIFT_PER_AFFILIATION) as u64)
    }

    /// Group-model parameters of one affiliation in shallow mode.
    pub fn shallow_group(&self, n: u64, max_level: u64, level: u64) -> Result<GroupArchSpec, SimError> {
        Ok(GroupArchSpec {
            n,
            max_level,
            level,
            groups: self.shallow_lanes()?,
            r: 1 << SWIFT_LOG_N,
            alpha: 1,
            use_current_level: true,
            latency: self.latency,
        })
    }

    /// Group-model parameters of all bootstrappable clusters together.
    pub fn deep_group(&self, n: u64, max_level: u64, level: u64) -> GroupArchSpec {
        GroupArchSpec {
            n,
            max_level,
            level,
            groups: self.affiliations as u64,
            r: 1 << BOOTSTRAPPABLE_LOG_N,
            alpha: self.bconv_l_sub,
            use_current_level: true,
            latency: self.latency,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WorkloadClass {
    Shallow,
    Deep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OpCounts {
    pub ntt: u64,
    pub intt: u64,
    pub bconv: u64,
    pub keyswitch: u64,
    pub mul: u64,
    pub add: u64,
}

impl OpCounts {
    pub fn get(&self, op: Op) -> u64 {
        match op {
            Op::Intt => self.intt,
            Op::Ntt => self.ntt,
            Op::Bconv => self.bconv,
            Op::Keyswitch => self.keyswitch,
            Op::Mul => self.mul,
            Op::Add => self.add,
        }
    }
}

/// Op kinds in the order a job issues them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Op {
    Intt,
    Ntt,
    Bconv,
    Keyswitch,
    Mul,
    Add,
}

impl Op {
    pub const ALL: [Op; 6] = [Op::Intt, Op::Ntt, Op::Bconv, Op::Keyswitch, Op::Mul, Op::Add];

    pub fn name(self) -> &'static str {
        match self {
            Op::Intt => "intt",
            Op::Ntt => "ntt",
            Op::Bconv => "bconv",
            Op::Keyswitch => "keyswitch",
            Op::Mul => "mul",
            Op::Add => "add",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadSpec {
    pub id: u32,
    #[serde(default)]
    pub name: String,
    #[serde(rename = "N")]
    pub n: u64,
    #[serde(rename = "L")]
    pub max_level: u64,
    /// Current level; defaults to `L`.
    #[serde(rename = "l", default)]
    pub level: Option<u64>,
    #[serde(default)]
    pub ops: OpCounts,
    #[serde(default)]
    pub working_set_bytes: u64,
    /// Larger runs first under priority scheduling.
    #[serde(default)]
    pub priority: i64,
    #[serde(default)]
    pub arrival: u64,
}

impl WorkloadSpec {
    pub fn new(id: u32, n: u64, max_level: u64) -> Self {
        Self {
            id,
            name: String::new(),
            n,
            max_level,
            level: None,
            ops: OpCounts::default(),
            working_set_bytes: 0,
            priority: 0,
            arrival: 0,
        }
    }

    pub fn level(&self) -> u64 {
        self.level.unwrap_or(self.max_level)
    }
}

pub fn classify(w: &WorkloadSpec) -> Result<WorkloadClass, SimError> {
    if !w.n.is_power_of_two() {
        return Err(SimError::UnsupportedDegree(w.n));
    }
    match w.n.trailing_zeros() {
        MIN_LOG_N..=MAX_SHALLOW_LOG_N => Ok(WorkloadClass::Shallow),
        MIN_DEEP_LOG_N..=MAX_LOG_N => Ok(WorkloadClass::Deep),
        _ => Err(SimError::UnsupportedDegree(w.n)),
    }
}

/// Cycles of one op of each kind, or `None` where the class cannot issue it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OpCosts {
    pub class: WorkloadClass,
    pub intt: u64,
    pub ntt: u64,
    pub bconv: Option<u64>,
    pub keyswitch: Option<u64>,
    pub mul: u64,
    pub add: u64,
    pub mul_count: u64,
}

impl OpCosts {
    pub fn get(&self, op: Op) -> Option<u64> {
        match op {
            Op::Intt => Some(self.intt),
            Op::Ntt => Some(self.ntt),
            Op::Bconv => self.bconv,
            Op::Keyswitch => self.keyswitch,
            Op::Mul => Some(self.mul),
            Op::Add => Some(self.add),
        }
    }
}

fn check_level(w: &WorkloadSpec) -> Result<(), SimError> {
    if w.level() == 0 || w.level() > w.max_level {
        return Err(SimError::Invalid(format!(
            "level {} outside 1..={}",
            w.level(),
            w.max_level
        )));
    }
    Ok(())
}

// element-wise ops stream N·l coefficients through G·R lanes
fn streaming_cycles(g: &GroupArchSpec) -> u64 {
    g.n * g.level / (g.groups * g.r)
}

pub fn op_costs(w: &WorkloadSpec, spec: &FlashArchSpec) -> Result<OpCosts, SimError> {
    spec.validate()?;
    check_level(w)?;
    match classify(w)? {
        WorkloadClass::Shallow => {
            let g = spec.shallow_group(w.n, w.max_level, w.level())?;
            let ntt = group_ntt_cost(&g)?;
            Ok(OpCosts {
                class: WorkloadClass::Shallow,
                intt: ntt.total_cycles,
                ntt: ntt.total_cycles,
                bconv: None,
                keyswitch: None,
                mul: streaming_cycles(&g),
                add: streaming_cycles(&g),
                mul_count: ntt.mul_count,
            })
        }
        WorkloadClass::Deep => {
            let g = spec.deep_group(w.n, w.max_level, w.level());
            let ntt = group_ntt_cost(&g)?;
            let ks = keyswitch_pipeline_cost(&ArchSpec::Group(g))?;
            Ok(OpCosts {
                class: WorkloadClass::Deep,
                intt: ntt.total_cycles,
                ntt: ntt.total_cycles,
                bconv: Some(group_bconv_cost(&g)?.0),
                keyswitch: Some(ks.total_cycles),
                mul: streaming_cycles(&g),
                add: streaming_cycles(&g),
                mul_count: ks.mul_count,
            })
        }
    }
}

fn op_sequence_cost(w: &WorkloadSpec, costs: &OpCosts, spec: &FlashArchSpec) -> Result<CycleBreakdown, SimError> {
    let mut phases = Vec::new();
    for op in Op::ALL {
        let count = w.ops.get(op);
        match costs.get(op) {
            Some(c) => phases.push((op.name(), count * c)),
            None if count == 0 => {}
            None => {
                return Err(SimError::UnsupportedOp {
                    op: op.name(),
                    class: costs.class,
                })
            }
        }
    }
    Ok(CycleBreakdown::new(phases, spec.latency.frequency_hz, costs.mul_count))
}

/// Cycles of a shallow job on one affiliation. BConv is bypassed, so
/// shallow jobs may not issue `bconv` or `keyswitch`.
pub fn shallow_cost(w: &WorkloadSpec, spec: &FlashArchSpec) -> Result<CycleBreakdown, SimError> {
    let class = classify(w)?;
    if class != WorkloadClass::Shallow {
        let lanes = spec.shallow_lanes()?;
        return Err(SimError::DoesNotFitAffiliation(format!(
            "N = {} exceeds the 2^{} points of {lanes} 2^{SWIFT_LOG_N}-point lanes",
            w.n,
            2 * SWIFT_LOG_N
        )));
    }
    let costs = op_costs(w, spec)?;
    op_sequence_cost(w, &costs, spec)
}

/// Cycles of a deep job on all bootstrappable clusters; swift clusters idle.
pub fn deep_cost(w: &WorkloadSpec, spec: &FlashArchSpec) -> Result<CycleBreakdown, SimError> {
    if classify(w)? != WorkloadClass::Deep {
        return Err(SimError::Invalid(format!("N = {} is a shallow degree", w.n)));
    }
    let costs = op_costs(w, spec)?;
    op_sequence_cost(w, &costs, spec)
}

pub fn workload_cost(w: &WorkloadSpec, spec: &FlashArchSpec) -> Result<CycleBreakdown, SimError> {
    match classify(w)? {
        WorkloadClass::Shallow => shallow_cost(w, spec),
        WorkloadClass::Deep => deep_cost(w, spec),
    }
}

/// Cycles to move `bytes` over HBM, rounded up.
pub fn transfer_cycles(bytes: u64, spec: &FlashArchSpec) -> u64 {
    let num = bytes as u128 * spec.latency.frequency_hz as u128;
    num.div_ceil(spec.hbm_bandwidth_bytes_per_sec as u128) as u64
}

/// Cache a job can use: its affiliation's L1 when shallow, all of it when deep.
pub fn available_cache(class: WorkloadClass, spec: &FlashArchSpec) -> u64 {
    match class {
        WorkloadClass::Shallow => spec.l1_cache_bytes,
        WorkloadClass::Deep => spec.total_cache_bytes,
    }
}

pub fn overflow_penalty(working_set: u64, cache: u64, spec: &FlashArchSpec) -> u64 {
    transfer_cycles(working_set.saturating_sub(cache), spec)
}

/// Extra cycles for streaming the part of the working set that does not
/// fit the cache.
pub fn memory_penalty(w: &WorkloadSpec, spec: &FlashArchSpec) -> Result<u64, SimError> {
    let cache = available_cache(classify(w)?, spec);
    Ok(overflow_penalty(w.working_set_bytes, cache, spec))
}

/// Ports, clusters and cache a shallow job on `affiliation` touched.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AffiliationAudit {
    pub affiliation: usize,
    pub chip_ports: BTreeSet<usize>,
    pub clusters: BTreeSet<usize>,
    pub l1_caches: BTreeSet<usize>,
}

impl AffiliationAudit {
    pub fn is_isolated(&self) -> bool {
        let lo = self.affiliation * L2_PORTS;
        let base = self.affiliation * CLUSTERS_PER_AFFILIATION;
        self.chip_ports.iter().all(|p| (lo..lo + L2_PORTS).contains(p))
            && self
                .clusters
                .iter()
                .all(|c| (base..base + CLUSTERS_PER_AFFILIATION).contains(c))
            && self.l1_caches.iter().all(|&c| c == self.affiliation)
    }
}

/// Routes one polynomial of a shallow job through distribute, L1 and L2 and
/// records every chip-wide resource it lands on.
pub fn audit_shallow_routing(
    w: &WorkloadSpec,
    spec: &FlashArchSpec,
    affiliation: usize,
) -> Result<AffiliationAudit, SimError> {
    if affiliation >= spec.affiliations {
        return Err(SimError::Invalid(format!("affiliation {affiliation} does not exist")));
    }
    if classify(w)? != WorkloadClass::Shallow {
        return Err(SimError::DoesNotFitAffiliation(format!("N = {}", w.n)));
    }
    let mode = Mode::Shallow;
    let n = w.n as usize;
    let data = PortStream::matrix(w.id, n / mode.rows(), mode.rows());
    let landed = route_polynomial(&data, mode, n, L1_PORTS)?;
    let mut audit = AffiliationAudit {
        affiliation,
        chip_ports: BTreeSet::new(),
        clusters: BTreeSet::new(),
        l1_caches: BTreeSet::from([affiliation]),
    };
    let lanes_per_cluster = mode.clusters();
    for (_, landing) in landed {
        audit.chip_ports.insert(affiliation * L2_PORTS + landing.global_port);
        // L2 port 4i + j came from lane j; lanes 0-1 are the split
        // bootstrappable cluster, 2 and 3 the swift clusters
        let lane = landing.global_port % lanes_per_cluster;
        let local = if lane < 2 { 0 } else { lane - 1 };
        audit.clusters.insert(affiliation * CLUSTERS_PER_AFFILIATION + local);
    }
    Ok(audit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perfmodel::keyswitch_pipeline_cost;
    use proptest::prelude::*;

    fn shallow(n: u64, l: u64) -> WorkloadSpec {
        let mut w = WorkloadSpec::new(0, n, l);
        w.level = Some(l);
        w
    }

    #[test]
    fn classification() {
        assert_eq!(classify(&shallow(1 << 13, 6)).unwrap(), WorkloadClass::Shallow);
        assert_eq!(classify(&shallow(1 << 11, 1)).unwrap(), WorkloadClass::Shallow);
        assert_eq!(classify(&shallow(1 << 14, 1)).unwrap(), WorkloadClass::Shallow);
        assert_eq!(classify(&shallow(1 << 15, 1)).unwrap(), WorkloadClass::Deep);
        assert_eq!(classify(&shallow(1 << 16, 57)).unwrap(), WorkloadClass::Deep);
        assert_eq!(classify(&shallow(1 << 10, 1)), Err(SimError::UnsupportedDegree(1024)));
        assert_eq!(
            classify(&shallow(1 << 17, 1)),
            Err(SimError::UnsupportedDegree(1 << 17))
        );
        assert_eq!(
            classify(&shallow(3 << 13, 1)),
            Err(SimError::UnsupportedDegree(3 << 13))
        );
    }

    #[test]
    fn lanes_come_from_one_halving() {
        assert_eq!(FlashArchSpec::default().shallow_lanes().unwrap(), 4);
    }

    #[test]
    fn shallow_examples() {
        let spec = FlashArchSpec::default();
        let mut w = shallow(1 << 13, 1);
        assert_eq!(shallow_cost(&w, &spec).unwrap().total_cycles, 0);

        w.ops.ntt = 1;
        // G = 4, R = 128, l = 1: load = 8192/512 = 16
        // d1 = 7·22 + 16, d2 = 6·22 + 16, plus twist 17 and transpose 36
        let one = shallow_cost(&w, &spec).unwrap();
        assert_eq!(one.total_cycles, 170 + 17 + 36 + 148);
        let lat = spec.latency;
        let hand = (7 * lat.t_butterfly + 16) + lat.t_twist + lat.t_transpose + (6 * lat.t_butterfly + 16);
        assert_eq!(one.total_cycles, hand);

        w.ops.ntt = 2;
        assert!(shallow_cost(&w, &spec).unwrap().total_cycles <= 2 * one.total_cycles);

        w.ops.keyswitch = 1;
        assert!(matches!(
            shallow_cost(&w, &spec),
            Err(SimError::UnsupportedOp { op: "keyswitch", .. })
        ));
        assert!(matches!(
            shallow_cost(&shallow(1 << 16, 16), &spec),
            Err(SimError::DoesNotFitAffiliation(_))
        ));
    }

    #[test]
    fn deep_keyswitch_delegates_to_group() {
        let spec = FlashArchSpec::default();
        let mut w = shallow(1 << 16, 16);
        assert_eq!(deep_cost(&w, &spec).unwrap().total_cycles, 0);
        w.ops.keyswitch = 1;
        let one = deep_cost(&w, &spec).unwrap();
        let group = GroupArchSpec {
            n: 1 << 16,
            max_level: 16,
            level: 16,
            groups: 8,
            r: 256,
            alpha: 60,
            use_current_level: true,
            latency: spec.latency,
        };
        let direct = keyswitch_pipeline_cost(&ArchSpec::Group(group)).unwrap();
        assert_eq!(one.total_cycles, direct.total_cycles);
        assert_eq!(one.mul_count, direct.mul_count);

        w.ops.keyswitch = 2;
        let two = deep_cost(&w, &spec).unwrap();
        assert_eq!(two.phase("keyswitch").unwrap(), 2 * one.phase("keyswitch").unwrap());
        assert!(matches!(
            deep_cost(&shallow(1 << 13, 2), &spec),
            Err(SimError::Invalid(_))
        ));
    }

    #[test]
    fn memory_examples() {
        let spec = FlashArchSpec::default();
        let mut w = shallow(1 << 16, 16);
        w.working_set_bytes = 100 << 20;
        assert_eq!(memory_penalty(&w, &spec).unwrap(), 0);
        w.working_set_bytes = spec.total_cache_bytes;
        assert_eq!(memory_penalty(&w, &spec).unwrap(), 0);
        // 1 GB over 1024 GB/s at 1 GHz
        assert_eq!(overflow_penalty(1_000_000_000 + 5, 5, &spec), 976_563);
        assert_eq!(transfer_cycles(0, &spec), 0);
    }

    #[test]
    fn shallow_routing_stays_inside_its_affiliation() {
        let spec = FlashArchSpec::default();
        for log_n in MIN_LOG_N..=MAX_SHALLOW_LOG_N {
            let w = shallow(1 << log_n, 1);
            for aff in [0, 3, 7] {
                let audit = audit_shallow_routing(&w, &spec, aff).unwrap();
                assert!(audit.is_isolated(), "N = 2^{log_n}, affiliation {aff}");
                if log_n == MAX_SHALLOW_LOG_N {
                    // 32 columns per lane fill every L1 tile
                    assert_eq!(audit.chip_ports.len(), 512);
                }
            }
        }
        let w = shallow(1 << 13, 1);
        assert!(audit_shallow_routing(&w, &spec, 8).is_err());
    }

    #[test]
    fn spec_validation() {
        let mut s = FlashArchSpec::default();
        assert!(s.validate().is_ok());
        s.l1_cache_bytes = 0;
        assert!(s.validate().is_err());
        let s = FlashArchSpec {
            affiliations: 0,
            ..Default::default()
        };
        assert!(s.validate().is_err());
    }

    proptest! {
        #[test]
        fn penalty_is_monotone(ws in 0u64..1 << 32, c1 in 1u64..1 << 31, c2 in 1u64..1 << 31, extra in 0u64..1 << 20) {
            let spec = FlashArchSpec::default();
            let (small, big) = (c1.min(c2), c1.max(c2));
            prop_assert!(overflow_penalty(ws, big, &spec) <= overflow_penalty(ws, small, &spec));
            prop_assert!(overflow_penalty(ws, small, &spec) <= overflow_penalty(ws + extra, small, &spec));
        }

        #[test]
        fn costs_are_linear_in_counts(ntt in 0u64..50, intt in 0u64..50, mul in 0u64..50, k in 1u64..5) {
            let spec = FlashArchSpec::default();
            let mut w = shallow(1 << 12, 3);
            w.ops = OpCounts { ntt, intt, mul, ..Default::default() };
            let base = shallow_cost(&w, &spec).unwrap();
            w.ops = OpCounts { ntt: k * ntt, intt: k * intt, mul: k * mul, ..Default::default() };
            prop_assert_eq!(shallow_cost(&w, &spec).unwrap().total_cycles, k * base.total_cycles);
        }
    }
}
