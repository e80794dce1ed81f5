//! Closed-form cycle and multiplier-count models for the naive, Group and
//! Grid NTT pipelines and the iNTT → BConv → NTT key-switching pipeline.
//!
//! Every printed term of a model is kept as a named [`Phase`] so that the
//! total is always the exact sum of its parts. Divisions must come out even;
//! a configuration that would need rounding is rejected.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("InvariantViolation: {0}")]
    InvariantViolation(String),
    #[error("BadSize: {0} is not a power of two >= 2")]
    BadSize(u64),
}

impl ModelError {
    pub fn kind(&self) -> &'static str {
        match self {
            ModelError::InvariantViolation(_) => "InvariantViolation",
            ModelError::BadSize(_) => "BadSize",
        }
    }
}

fn violation(msg: impl Into<String>) -> ModelError {
    ModelError::InvariantViolation(msg.into())
}

fn log2_exact(x: u64, what: &str) -> Result<u64, ModelError> {
    if x == 0 || !x.is_power_of_two() {
        return Err(violation(format!("{what} = {x} is not a power of two")));
    }
    Ok(x.trailing_zeros() as u64)
}

fn div_exact(num: u64, den: u64, what: &str) -> Result<u64, ModelError> {
    if den == 0 || !num.is_multiple_of(den) {
        return Err(violation(format!("{what}: {num} / {den} is not an integer")));
    }
    Ok(num / den)
}

/// Sequential-BConv pipeline base depth in cycles, as printed next to
/// `log l_sub` in the Grid formulas.
pub const SEQ_BCONV_BASE: u64 = 17;

/// Pipeline latencies in cycles, plus the clock used for throughput.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatencyConstants {
    pub t_butterfly: u64,
    pub t_twist: u64,
    pub t_bconv_pipe: u64,
    pub t_transpose: u64,
    pub t_vsync: u64,
    pub t_hsync: u64,
    pub frequency_hz: u64,
}

impl Default for LatencyConstants {
    fn default() -> Self {
        Self {
            t_butterfly: 22,
            t_twist: 17,
            t_bconv_pipe: 18,
            // latency of one L1 transpose block at 32 × 32
            t_transpose: crate::transpose::L1_FULL_LATENCY,
            t_vsync: 32,
            t_hsync: 32,
            frequency_hz: 1_000_000_000,
        }
    }
}

impl LatencyConstants {
    pub fn validate(&self) -> Result<(), ModelError> {
        let fields = [
            ("t_butterfly", self.t_butterfly),
            ("t_twist", self.t_twist),
            ("t_bconv_pipe", self.t_bconv_pipe),
            ("t_transpose", self.t_transpose),
            ("t_vsync", self.t_vsync),
            ("t_hsync", self.t_hsync),
            ("frequency_hz", self.frequency_hz),
        ];
        match fields.iter().find(|(_, v)| *v == 0) {
            Some((name, _)) => Err(violation(format!("{name} must be positive"))),
            None => Ok(()),
        }
    }
}

/// Group architecture: `G` engines, each an `R`-point NTT pipeline, with a
/// parallel BConv unit of `alpha` converters per engine lane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroupArchSpec {
    #[serde(rename = "N")]
    pub n: u64,
    #[serde(rename = "L")]
    pub max_level: u64,
    #[serde(rename = "l")]
    pub level: u64,
    #[serde(rename = "G")]
    pub groups: u64,
    #[serde(rename = "R")]
    pub r: u64,
    pub alpha: u64,
    /// Charge pipeline load with the current level `l` instead of `L`.
    pub use_current_level: bool,
    #[serde(skip)]
    pub latency: LatencyConstants,
}

impl Default for GroupArchSpec {
    fn default() -> Self {
        Self {
            n: 1 << 16,
            max_level: 16,
            level: 16,
            groups: 8,
            r: 256,
            alpha: 16,
            use_current_level: true,
            latency: LatencyConstants::default(),
        }
    }
}

impl GroupArchSpec {
    fn load_level(&self) -> u64 {
        if self.use_current_level {
            self.level
        } else {
            self.max_level
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.latency.validate()?;
        log2_exact(self.n, "N")?;
        log2_exact(self.r, "R")?;
        log2_exact(self.groups, "G")?;
        if self.n < 2 {
            return Err(violation("N must be at least 2"));
        }
        if self.r > self.n {
            return Err(violation(format!("R = {} exceeds N = {}", self.r, self.n)));
        }
        let cols = self.n / self.r;
        if self.r < cols || !self.r.is_multiple_of(cols) {
            return Err(violation(format!("R = {} must be a multiple of N/R = {cols}", self.r)));
        }
        if self.level > self.max_level {
            return Err(violation(format!("l = {} exceeds L = {}", self.level, self.max_level)));
        }
        if self.alpha == 0 {
            return Err(violation("alpha must be positive"));
        }
        div_exact(self.n * self.load_level(), self.r * self.groups, "N·l/(R·G)")?;
        Ok(())
    }

    // N·l/(R·G): one cycle per queued R-point transform
    fn load(&self) -> u64 {
        self.n * self.load_level() / (self.r * self.groups)
    }

    fn d1(&self) -> u64 {
        self.r.trailing_zeros() as u64 * self.latency.t_butterfly + self.load()
    }

    fn d2(&self) -> u64 {
        (self.n / self.r).trailing_zeros() as u64 * self.latency.t_butterfly + self.load()
    }
}

/// Sizing profile for [`GridArchSpec`]; `Flash` admits a non-power-of-two
/// `l_sub`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    #[default]
    Standard,
    Flash,
}

/// Grid architecture: an `R × C` array of 2-point NTT engines with one
/// sequential BConv unit of `l_sub` multipliers per engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridArchSpec {
    #[serde(rename = "N")]
    pub n: u64,
    #[serde(rename = "L")]
    pub max_level: u64,
    #[serde(rename = "l")]
    pub level: u64,
    #[serde(rename = "R")]
    pub r: u64,
    #[serde(rename = "C")]
    pub c: u64,
    pub l_sub: u64,
    pub use_current_level: bool,
    pub profile: Profile,
    #[serde(skip)]
    pub latency: LatencyConstants,
}

impl Default for GridArchSpec {
    fn default() -> Self {
        Self {
            n: 1 << 16,
            max_level: 16,
            level: 16,
            r: 32,
            c: 64,
            l_sub: 4,
            use_current_level: true,
            profile: Profile::Standard,
            latency: LatencyConstants::default(),
        }
    }
}

impl GridArchSpec {
    fn load_level(&self) -> u64 {
        if self.use_current_level {
            self.level
        } else {
            self.max_level
        }
    }

    fn engines(&self) -> u64 {
        self.r * self.c
    }

    fn log_l_sub(&self) -> u64 {
        match self.profile {
            Profile::Standard => self.l_sub.trailing_zeros() as u64,
            // ceil(log2) for the flash profile's non-power-of-two widths
            Profile::Flash => (u64::BITS - (self.l_sub - 1).leading_zeros()) as u64,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.latency.validate()?;
        log2_exact(self.n, "N")?;
        log2_exact(self.r, "R")?;
        log2_exact(self.c, "C")?;
        if self.l_sub == 0 {
            return Err(violation("l_sub must be positive"));
        }
        if self.profile == Profile::Standard {
            log2_exact(self.l_sub, "l_sub")?;
        }
        let t = div_exact(self.n, self.engines(), "N/(R·C)")?;
        if t < 2 {
            return Err(violation(format!("N/(R·C) = {t} must be at least 2")));
        }
        if self.level > self.max_level {
            return Err(violation(format!("l = {} exceeds L = {}", self.level, self.max_level)));
        }
        if self.profile == Profile::Standard {
            div_exact(
                self.bconv_load_numerator(),
                self.engines() * self.l_sub,
                "N·L·l/(C·R·l_sub)",
            )?;
        }
        Ok(())
    }

    fn t(&self) -> u64 {
        self.n / self.engines()
    }

    // 2-point transforms per engine per stage: N/(2·C·R)
    fn pairs(&self) -> u64 {
        self.n / (2 * self.engines())
    }

    fn t_stage(&self) -> u64 {
        self.latency.t_butterfly + self.load_level() * self.pairs()
    }

    fn d1(&self) -> u64 {
        self.t().trailing_zeros() as u64 * self.t_stage()
    }

    fn d2(&self) -> u64 {
        self.r.trailing_zeros() as u64 * self.t_stage()
    }

    fn d3(&self) -> u64 {
        self.c.trailing_zeros() as u64 * self.t_stage()
    }

    fn bconv_load_numerator(&self) -> u64 {
        self.n * self.load_level() * self.level
    }

    fn bconv_load(&self) -> u64 {
        let den = self.engines() * self.l_sub;
        self.bconv_load_numerator().div_ceil(den)
    }
}

/// Either architecture, for the operations that accept both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "arch", rename_all = "lowercase")]
pub enum ArchSpec {
    Group(GroupArchSpec),
    Grid(GridArchSpec),
}

impl ArchSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ArchSpec::Group(_) => "group",
            ArchSpec::Grid(_) => "grid",
        }
    }

    pub fn latency(&self) -> &LatencyConstants {
        match self {
            ArchSpec::Group(s) => &s.latency,
            ArchSpec::Grid(s) => &s.latency,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        match self {
            ArchSpec::Group(s) => s.validate(),
            ArchSpec::Grid(s) => s.validate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Phase {
    pub name: String,
    pub cycles: u64,
}

/// Per-phase cycles of one modeled pipeline run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleBreakdown {
    pub phases: Vec<Phase>,
    pub total_cycles: u64,
    pub frequency_hz: u64,
    pub mul_count: u64,
}

impl CycleBreakdown {
    pub fn new(phases: Vec<(&str, u64)>, frequency_hz: u64, mul_count: u64) -> Self {
        let phases: Vec<Phase> = phases
            .into_iter()
            .map(|(name, cycles)| Phase {
                name: name.to_string(),
                cycles,
            })
            .collect();
        let total_cycles = phases.iter().map(|p| p.cycles).sum();
        Self {
            phases,
            total_cycles,
            frequency_hz,
            mul_count,
        }
    }

    pub fn phase(&self, name: &str) -> Option<u64> {
        self.phases.iter().find(|p| p.name == name).map(|p| p.cycles)
    }

    /// Pipeline runs per second, `f / T`; `None` for an empty run.
    pub fn throughput_per_sec(&self) -> Option<f64> {
        (self.total_cycles > 0).then(|| self.frequency_hz as f64 / self.total_cycles as f64)
    }

    pub fn throughput_exact(&self) -> Option<Ratio<u64>> {
        (self.total_cycles > 0).then(|| Ratio::new(self.frequency_hz, self.total_cycles))
    }

    pub fn throughput_per_mul(&self) -> Option<f64> {
        match (self.throughput_per_sec(), self.mul_count) {
            (Some(thr), muls) if muls > 0 => Some(thr / muls as f64),
            _ => None,
        }
    }

    /// Renames every phase to `prefix_name`.
    pub fn prefixed(mut self, prefix: &str) -> Self {
        for p in &mut self.phases {
            p.name = format!("{prefix}_{}", p.name);
        }
        self
    }
}

/// Fully unrolled `N`-point pipeline: `log N` stages of `N/2` butterflies.
pub fn naive_ntt_cost(n: u64, latency: &LatencyConstants) -> Result<(u64, u64), ModelError> {
    if n < 2 || !n.is_power_of_two() {
        return Err(ModelError::BadSize(n));
    }
    let log_n = n.trailing_zeros() as u64;
    Ok((log_n * latency.t_butterfly, n / 2 * log_n))
}

/// `T = D1 + T_twist + T_transpose + D2`.
pub fn group_ntt_cost(spec: &GroupArchSpec) -> Result<CycleBreakdown, ModelError> {
    spec.validate()?;
    let lat = &spec.latency;
    let muls = spec.groups * spec.r * spec.r.trailing_zeros() as u64 / 2;
    Ok(CycleBreakdown::new(
        vec![
            ("d1", spec.d1()),
            ("twist1", lat.t_twist),
            ("transpose", lat.t_transpose),
            ("d2", spec.d2()),
        ],
        lat.frequency_hz,
        muls,
    ))
}

/// Parallel BConv: `N·l/(G·R) + t_bconv_pipe` cycles on `G·α·R` multipliers.
pub fn group_bconv_cost(spec: &GroupArchSpec) -> Result<(u64, u64), ModelError> {
    spec.validate()?;
    Ok((
        spec.load() + spec.latency.t_bconv_pipe,
        spec.groups * spec.alpha * spec.r,
    ))
}

/// `T = D1 + T_twist + T_vsync + D2 + T_twist + T_hsync + D3` with
/// `T_stage = t_butterfly + l·N/(2·C·R)` per butterfly stage.
pub fn grid_ntt_cost(spec: &GridArchSpec) -> Result<CycleBreakdown, ModelError> {
    spec.validate()?;
    let lat = &spec.latency;
    Ok(CycleBreakdown::new(
        vec![
            ("d1", spec.d1()),
            ("twist1", lat.t_twist),
            ("vsync", lat.t_vsync),
            ("d2", spec.d2()),
            ("twist2", lat.t_twist),
            ("hsync", lat.t_hsync),
            ("d3", spec.d3()),
        ],
        lat.frequency_hz,
        spec.engines(),
    ))
}

/// Standalone sequential BConv: `N·L² + 17 + log l_sub` cycles on
/// `R·C·l_sub` multipliers.
pub fn grid_bconv_cost(spec: &GridArchSpec) -> Result<(u64, u64), ModelError> {
    spec.validate()?;
    let cycles = spec.n * spec.max_level * spec.max_level + SEQ_BCONV_BASE + spec.log_l_sub();
    Ok((cycles, spec.engines() * spec.l_sub))
}

/// Total multipliers: `G·R·(α + log R / 2)` or `R·C·(1 + l_sub)`.
pub fn resource_totals(spec: &ArchSpec) -> Result<u64, ModelError> {
    spec.validate()?;
    Ok(match spec {
        ArchSpec::Group(s) => s.groups * s.r * s.alpha + s.groups * s.r * s.r.trailing_zeros() as u64 / 2,
        ArchSpec::Grid(s) => s.engines() * (1 + s.l_sub),
    })
}

/// Key-switching pipeline `T = T1 + T2`: `T1` is iNTT with BConv pipelined
/// into its last dimension, `T2` is one forward NTT.
pub fn keyswitch_pipeline_cost(spec: &ArchSpec) -> Result<CycleBreakdown, ModelError> {
    let muls = resource_totals(spec)?;
    let (t1, t2) = match spec {
        ArchSpec::Group(s) => {
            let lat = &s.latency;
            let t1 = vec![
                ("intt_d1", s.d1()),
                ("intt_twist1", lat.t_twist),
                ("intt_transpose", lat.t_transpose),
                ("intt_d2", s.d2()),
                ("bconv_pipe", lat.t_bconv_pipe),
            ];
            (t1, group_ntt_cost(s)?)
        }
        ArchSpec::Grid(s) => {
            let lat = &s.latency;
            let t1 = vec![
                ("intt_d1", s.d1()),
                ("intt_twist1", lat.t_twist),
                ("intt_vsync", lat.t_vsync),
                ("intt_d2", s.d2()),
                ("intt_twist2", lat.t_twist),
                ("intt_hsync", lat.t_hsync),
                ("bconv_load", s.bconv_load()),
                ("bconv_pipe", s.log_l_sub() + SEQ_BCONV_BASE),
                (
                    "intt_d3",
                    s.c.trailing_zeros() as u64 * (s.pairs() * s.l_sub + lat.t_butterfly),
                ),
            ];
            (t1, grid_ntt_cost(s)?)
        }
    };
    let mut phases: Vec<(String, u64)> = t1.into_iter().map(|(n, c)| (n.to_string(), c)).collect();
    phases.extend(t2.prefixed("ntt").phases.into_iter().map(|p| (p.name, p.cycles)));
    Ok(CycleBreakdown::new(
        phases.iter().map(|(n, c)| (n.as_str(), *c)).collect(),
        spec.latency().frequency_hz,
        muls,
    ))
}

/// Grid-over-Group ratios of key-switching cycles and throughput per
/// multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Comparison {
    pub group_cycles: u64,
    pub grid_cycles: u64,
    pub cycles_ratio: f64,
    pub thr_per_mul_ratio: f64,
}

pub fn compare(group: &GroupArchSpec, grid: &GridArchSpec) -> Result<Comparison, ModelError> {
    let g = keyswitch_pipeline_cost(&ArchSpec::Group(*group))?;
    let r = keyswitch_pipeline_cost(&ArchSpec::Grid(*grid))?;
    // (f/Tr/Mr) / (f/Tg/Mg) = Tg·Mg / (Tr·Mr)
    let thr_per_mul_ratio = (g.total_cycles as f64 * g.mul_count as f64) / (r.total_cycles as f64 * r.mul_count as f64);
    Ok(Comparison {
        group_cycles: g.total_cycles,
        grid_cycles: r.total_cycles,
        cycles_ratio: r.total_cycles as f64 / g.total_cycles as f64,
        thr_per_mul_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn printed_latency() -> LatencyConstants {
        LatencyConstants {
            t_transpose: 32,
            ..LatencyConstants::default()
        }
    }

    fn group(level: u64) -> GroupArchSpec {
        GroupArchSpec {
            level,
            alpha: 4,
            latency: printed_latency(),
            ..GroupArchSpec::default()
        }
    }

    fn grid(level: u64) -> GridArchSpec {
        GridArchSpec {
            level,
            l_sub: 8,
            latency: printed_latency(),
            ..GridArchSpec::default()
        }
    }

    #[test]
    fn naive_examples() {
        let lat = LatencyConstants::default();
        assert_eq!(naive_ntt_cost(8, &lat).unwrap(), (66, 12));
        assert_eq!(naive_ntt_cost(2, &lat).unwrap(), (22, 1));
        assert_eq!(naive_ntt_cost(65536, &lat).unwrap(), (352, 524_288));
        assert_eq!(naive_ntt_cost(6, &lat), Err(ModelError::BadSize(6)));
        assert_eq!(naive_ntt_cost(1, &lat), Err(ModelError::BadSize(1)));
    }

    #[test]
    fn group_examples() {
        let b = group_ntt_cost(&group(16)).unwrap();
        assert_eq!(b.phase("d1"), Some(688));
        assert_eq!(b.phase("d2"), Some(688));
        assert_eq!(b.total_cycles, 688 + 17 + 32 + 688);
        assert_eq!(b.mul_count, 8192);
        let b = group_ntt_cost(&group(0)).unwrap();
        assert_eq!(b.phase("d1"), Some(8 * 22));

        assert_eq!(group_bconv_cost(&group(16)).unwrap(), (530, 8192));
        assert_eq!(group_bconv_cost(&group(0)).unwrap().0, 18);
    }

    #[test]
    fn grid_examples() {
        let b = grid_ntt_cost(&grid(16)).unwrap();
        assert_eq!(b.phase("d1"), Some(1390));
        assert_eq!(b.phase("d2"), Some(1390));
        assert_eq!(b.phase("d3"), Some(1668));
        assert_eq!(b.mul_count, 2048);
        // N = 2·C·R: one stage in the first dimension
        let s = GridArchSpec {
            n: 2 * 32 * 64,
            ..grid(16)
        };
        let b = grid_ntt_cost(&s).unwrap();
        assert_eq!(b.phase("d1"), Some(22 + 16));

        assert_eq!(grid_bconv_cost(&grid(16)).unwrap(), ((1 << 16) * 256 + 17 + 3, 16384));
        let s = GridArchSpec {
            max_level: 0,
            level: 0,
            ..grid(0)
        };
        assert_eq!(grid_bconv_cost(&s).unwrap().0, 17 + 3);
    }

    #[test]
    fn keyswitch_group_example() {
        let b = keyswitch_pipeline_cost(&ArchSpec::Group(group(16))).unwrap();
        let t1: u64 = ["intt_d1", "intt_twist1", "intt_transpose", "intt_d2", "bconv_pipe"]
            .iter()
            .map(|n| b.phase(n).unwrap())
            .sum();
        assert_eq!(t1, 1443);
        assert_eq!(b.total_cycles, 1443 + 1425);
    }

    #[test]
    fn keyswitch_grid_terms() {
        let s = grid(16);
        let b = keyswitch_pipeline_cost(&ArchSpec::Grid(s)).unwrap();
        // N·l·l/(C·R·l_sub) = 2^16·256 / 16384
        assert_eq!(b.phase("bconv_load"), Some(1024));
        assert_eq!(b.phase("bconv_pipe"), Some(20));
        // log C · (N/(2CR)·l_sub + t_butterfly) = 6 · (16·8 + 22)
        assert_eq!(b.phase("intt_d3"), Some(900));
        assert_eq!(b.phase("ntt_d3"), Some(1668));
    }

    #[test]
    fn resource_examples() {
        assert_eq!(resource_totals(&ArchSpec::Group(group(16))).unwrap(), 16384);
        assert_eq!(resource_totals(&ArchSpec::Grid(grid(16))).unwrap(), 18432);
    }

    #[test]
    fn invalid_specs_rejected() {
        let bad_r = GroupArchSpec { r: 100, ..group(16) };
        assert!(matches!(group_ntt_cost(&bad_r), Err(ModelError::InvariantViolation(_))));
        // R < N/R
        let small_r = GroupArchSpec { r: 128, ..group(16) };
        assert!(group_ntt_cost(&small_r).is_err());
        let over = GroupArchSpec { level: 17, ..group(16) };
        assert!(group_ntt_cost(&over).is_err());
        // T = 1
        let flat = GridArchSpec { n: 2048, ..grid(1) };
        assert!(grid_ntt_cost(&flat).is_err());
        let odd = GridArchSpec { l_sub: 60, ..grid(16) };
        assert!(grid_ntt_cost(&odd).is_err());
        let zero = LatencyConstants {
            t_hsync: 0,
            ..printed_latency()
        };
        assert!(grid_ntt_cost(&GridArchSpec {
            latency: zero,
            ..grid(1)
        })
        .is_err());
    }

    #[test]
    fn flash_profile_admits_l_sub_60() {
        let s = GridArchSpec {
            l_sub: 60,
            profile: Profile::Flash,
            ..grid(16)
        };
        let (cycles, muls) = grid_bconv_cost(&s).unwrap();
        assert_eq!(cycles, (1 << 16) * 256 + 17 + 6);
        assert_eq!(muls, 2048 * 60);
        assert!(keyswitch_pipeline_cost(&ArchSpec::Grid(s)).is_ok());
    }

    #[test]
    fn current_level_flag_switches_load() {
        let s = GroupArchSpec {
            level: 1,
            use_current_level: false,
            ..group(1)
        };
        assert_eq!(group_ntt_cost(&s).unwrap().phase("d1"), Some(688));
        let s = GroupArchSpec { level: 1, ..group(1) };
        assert_eq!(group_ntt_cost(&s).unwrap().phase("d1"), Some(176 + 32));
    }

    #[test]
    fn default_comparison_lands_in_reported_bands() {
        let at16 = compare(&GroupArchSpec::default(), &GridArchSpec::default()).unwrap();
        assert!((2.5..=3.5).contains(&at16.cycles_ratio), "{at16:?}");
        let at1 = compare(
            &GroupArchSpec {
                level: 1,
                ..Default::default()
            },
            &GridArchSpec {
                level: 1,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((2.0..=3.2).contains(&at1.thr_per_mul_ratio), "{at1:?}");
    }

    fn valid_group() -> impl Strategy<Value = GroupArchSpec> {
        (4u32..=16, 0u64..=32, 0u32..=4, 1u64..=64).prop_flat_map(|(log_n, level, log_g, alpha)| {
            let min_log_r = log_n.div_ceil(2);
            (min_log_r..=log_n).prop_map(move |log_r| GroupArchSpec {
                n: 1 << log_n,
                max_level: 32,
                level,
                groups: 1 << log_g,
                r: 1 << log_r,
                alpha,
                use_current_level: true,
                latency: LatencyConstants::default(),
            })
        })
    }

    fn valid_grid() -> impl Strategy<Value = GridArchSpec> {
        (6u32..=17, 0u64..=32, 0u32..=6).prop_flat_map(|(log_n, level, log_l_sub)| {
            (0..=log_n - 1).prop_flat_map(move |log_r| {
                (0..=log_n - 1 - log_r).prop_map(move |log_c| GridArchSpec {
                    n: 1 << log_n,
                    max_level: 32,
                    level,
                    r: 1 << log_r,
                    c: 1 << log_c,
                    l_sub: 1 << log_l_sub,
                    use_current_level: true,
                    profile: Profile::Standard,
                    latency: LatencyConstants::default(),
                })
            })
        })
    }

    proptest! {
        #[test]
        fn group_resources_are_component_sums(s in valid_group()) {
            prop_assume!(s.validate().is_ok());
            let total = resource_totals(&ArchSpec::Group(s)).unwrap();
            let ntt = group_ntt_cost(&s).unwrap().mul_count;
            let bconv = group_bconv_cost(&s).unwrap().1;
            prop_assert_eq!(total, ntt + bconv);
        }

        #[test]
        fn grid_resources_are_component_sums(s in valid_grid()) {
            prop_assume!(s.validate().is_ok());
            let total = resource_totals(&ArchSpec::Grid(s)).unwrap();
            prop_assert_eq!(total, grid_ntt_cost(&s).unwrap().mul_count + grid_bconv_cost(&s).unwrap().1);
        }

        #[test]
        fn phases_sum_and_throughput_identity(s in valid_group(), g in valid_grid()) {
            for spec in [ArchSpec::Group(s), ArchSpec::Grid(g)] {
                if spec.validate().is_err() {
                    continue;
                }
                let b = keyswitch_pipeline_cost(&spec).unwrap();
                prop_assert_eq!(b.total_cycles, b.phases.iter().map(|p| p.cycles).sum::<u64>());
                let thr = b.throughput_exact().unwrap();
                prop_assert_eq!(thr * Ratio::from_integer(b.total_cycles), Ratio::from_integer(b.frequency_hz));
            }
        }

        #[test]
        fn cycles_monotone_in_level(s in valid_group(), g in valid_grid()) {
            let up = GroupArchSpec { level: s.level + 1, max_level: 33, ..s };
            if s.validate().is_ok() && up.validate().is_ok() {
                let a = keyswitch_pipeline_cost(&ArchSpec::Group(s)).unwrap().total_cycles;
                let b = keyswitch_pipeline_cost(&ArchSpec::Group(up)).unwrap().total_cycles;
                prop_assert!(a <= b);
            }
            let up = GridArchSpec { level: g.level + 1, max_level: 33, ..g };
            if g.validate().is_ok() && up.validate().is_ok() {
                let a = keyswitch_pipeline_cost(&ArchSpec::Grid(g)).unwrap().total_cycles;
                let b = keyswitch_pipeline_cost(&ArchSpec::Grid(up)).unwrap().total_cycles;
                prop_assert!(a <= b);
            }
        }

        #[test]
        fn cycles_monotone_in_n(s in valid_group(), g in valid_grid()) {
            let up = GroupArchSpec { n: s.n * 2, ..s };
            if s.validate().is_ok() && up.validate().is_ok() {
                let a = keyswitch_pipeline_cost(&ArchSpec::Group(s)).unwrap().total_cycles;
                let b = keyswitch_pipeline_cost(&ArchSpec::Group(up)).unwrap().total_cycles;
                prop_assert!(a <= b);
            }
            let up = GridArchSpec { n: g.n * 2, ..g };
            if g.validate().is_ok() && up.validate().is_ok() {
                let a = keyswitch_pipeline_cost(&ArchSpec::Grid(g)).unwrap().total_cycles;
                let b = keyswitch_pipeline_cost(&ArchSpec::Grid(up)).unwrap().total_cycles;
                prop_assert!(a <= b);
            }
        }
    }
}
