use crate::config::Config;
use crate::error::CliError;
use crate::report::{Cell, Report, Row};
use fhedse::checks::{run_ntt_checks, run_transpose_checks, CheckReport, NttCheckConfig, TransposeCheckConfig};
use fhedse::flashsim::{memory_penalty, workload_cost, FlashArchSpec};
use fhedse::perfmodel::{
    compare, grid_bconv_cost, grid_ntt_cost, group_bconv_cost, group_ntt_cost, keyswitch_pipeline_cost, ArchSpec,
    CycleBreakdown,
};
use fhedse::scheduler::{compare_sequential_baseline, schedule, Policy};
use fhedse::transpose::{l1_transpose_traced, PortStream, L1_PORTS};
use rayon::prelude::*;
use std::io::Write;
use std::path::Path;
use toml::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ArchKind {
    Group,
    Grid,
    Flash,
}

fn col(name: &str, cell: impl Into<Cell>) -> (String, Cell) {
    (name.to_string(), cell.into())
}

fn breakdown_row(arch: &str, kernel: &str, b: &CycleBreakdown) -> Row {
    let mut row = vec![
        col("arch", arch),
        col("kernel", kernel),
        col("total_cycles", b.total_cycles),
        col("mul_count", b.mul_count),
        col("throughput_per_sec", b.throughput_per_sec()),
        col("throughput_per_mul", b.throughput_per_mul()),
    ];
    row.extend(b.phases.iter().map(|p| col(&format!("phase_{}", p.name), p.cycles)));
    row
}

fn single_phase(name: &str, (cycles, muls): (u64, u64), freq: u64) -> CycleBreakdown {
    CycleBreakdown::new(vec![(name, cycles)], freq, muls)
}

const MODEL_COLUMNS: [&str; 6] = [
    "arch",
    "kernel",
    "total_cycles",
    "mul_count",
    "throughput_per_sec",
    "throughput_per_mul",
];

pub fn run_model(cfg: &Config, archs: &[ArchKind]) -> Result<Report, CliError> {
    let archs = if archs.is_empty() {
        vec![ArchKind::Group, ArchKind::Grid]
    } else {
        archs.to_vec()
    };
    let mut report = Report::new(&MODEL_COLUMNS);
    for arch in archs {
        match arch {
            ArchKind::Group => {
                let s = cfg.group()?;
                let f = s.latency.frequency_hz;
                report.push(breakdown_row("group", "ntt", &group_ntt_cost(&s)?));
                report.push(breakdown_row(
                    "group",
                    "bconv",
                    &single_phase("bconv", group_bconv_cost(&s)?, f),
                ));
                report.push(breakdown_row(
                    "group",
                    "keyswitch",
                    &keyswitch_pipeline_cost(&ArchSpec::Group(s))?,
                ));
            }
            ArchKind::Grid => {
                let s = cfg.grid()?;
                let f = s.latency.frequency_hz;
                report.push(breakdown_row("grid", "ntt", &grid_ntt_cost(&s)?));
                report.push(breakdown_row(
                    "grid",
                    "bconv",
                    &single_phase("bconv", grid_bconv_cost(&s)?, f),
                ));
                report.push(breakdown_row(
                    "grid",
                    "keyswitch",
                    &keyswitch_pipeline_cost(&ArchSpec::Grid(s))?,
                ));
            }
            ArchKind::Flash => {
                let spec = cfg.flash()?;
                for job in cfg.jobs()? {
                    let cost = workload_cost(&job, &spec)?;
                    let mut row = breakdown_row("flash", &format!("job{}", job.id), &cost);
                    row.insert(2, col("job_name", job.name.as_str()));
                    row.push(col("memory_penalty", memory_penalty(&job, &spec)?));
                    report.push(row);
                }
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRange {
    pub key: String,
    pub values: Vec<Value>,
}

fn parse_int_range(text: &str) -> Option<Vec<Value>> {
    let (a, b) = text.split_once("..")?;
    let (a, b) = (a.trim().parse::<i64>().ok()?, b.trim().parse::<i64>().ok()?);
    Some((a..=b).map(Value::Integer).collect())
}

/// `key=a..b` (inclusive), `key=a,b,c`, or `key=` for an empty range.
pub fn parse_range(spec: &str) -> Result<SweepRange, CliError> {
    let (key, text) = spec
        .split_once('=')
        .ok_or_else(|| CliError::config(format!("range {spec:?} is not key=values")))?;
    Ok(SweepRange {
        key: key.trim().to_string(),
        values: range_values(key, text.trim())?,
    })
}

fn range_values(key: &str, text: &str) -> Result<Vec<Value>, CliError> {
    if text.is_empty() {
        return Ok(Vec::new());
    }
    if text.contains("..") {
        return parse_int_range(text).ok_or_else(|| CliError::config(format!("bad range for {key}: {text:?}")));
    }
    Ok(text.split(',').map(|v| crate::config::parse_value(v.trim())).collect())
}

/// Ranges from a `[sweep]` table: arrays or range strings per key.
fn config_ranges(cfg: &Config) -> Result<Vec<SweepRange>, CliError> {
    let Some(v) = cfg.get("sweep") else {
        return Ok(Vec::new());
    };
    let table = v.as_table().ok_or_else(|| CliError::config("sweep must be a table"))?;
    table
        .iter()
        .map(|(key, v)| {
            let values = match v {
                Value::Array(a) => a.clone(),
                Value::String(s) => range_values(key, s)?,
                other => vec![other.clone()],
            };
            Ok(SweepRange {
                key: key.clone(),
                values,
            })
        })
        .collect()
}

fn value_cell(v: &Value) -> Cell {
    match v {
        Value::Integer(i) => Cell::Int((*i).into()),
        Value::Float(f) => (*f).into(),
        Value::Boolean(b) => Cell::Bool(*b),
        Value::String(s) => Cell::Str(s.clone()),
        other => Cell::Str(other.to_string()),
    }
}

fn grid_points(ranges: &[SweepRange]) -> Vec<Vec<Value>> {
    ranges.iter().fold(vec![Vec::new()], |acc, r| {
        acc.into_iter()
            .flat_map(|prefix| {
                r.values.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push(v.clone());
                    p
                })
            })
            .collect()
    })
}

fn sweep_point(base: &Config, ranges: &[SweepRange], point: &[Value]) -> Vec<Row> {
    let head = |arch: &str| {
        let mut row: Row = ranges
            .iter()
            .zip(point)
            .map(|(r, v)| (r.key.clone(), value_cell(v)))
            .collect();
        row.push(col("arch", arch));
        row
    };
    let eval = || -> Result<_, CliError> {
        let mut cfg = base.clone();
        for (r, v) in ranges.iter().zip(point) {
            cfg.set(&r.key, v.clone())?;
        }
        let (group, grid) = (cfg.group()?, cfg.grid()?);
        let g = keyswitch_pipeline_cost(&ArchSpec::Group(group))?;
        let r = keyswitch_pipeline_cost(&ArchSpec::Grid(grid))?;
        Ok((g, r, compare(&group, &grid)?))
    };
    match eval() {
        Ok((g, r, cmp)) => [("group", g), ("grid", r)]
            .into_iter()
            .map(|(arch, b)| {
                let mut row = head(arch);
                row.extend([
                    col("status", "ok"),
                    col("total_cycles", b.total_cycles),
                    col("mul_count", b.mul_count),
                    col("throughput_per_mul", b.throughput_per_mul()),
                    col("cycles_ratio", cmp.cycles_ratio),
                    col("thr_per_mul_ratio", cmp.thr_per_mul_ratio),
                    col("error", Cell::Null),
                ]);
                row
            })
            .collect(),
        Err(e) => ["group", "grid"]
            .into_iter()
            .map(|arch| {
                let mut row = head(arch);
                row.push(col("status", "error"));
                row.push(col("error", e.to_string()));
                row
            })
            .collect(),
    }
}

/// Grid/Group key-switching comparison at every point of the cartesian
/// product of `ranges`. Points evaluate in parallel; rows keep grid order.
pub fn run_sweep(cfg: &Config, cli_ranges: &[String]) -> Result<Report, CliError> {
    let mut ranges = config_ranges(cfg)?;
    for spec in cli_ranges {
        let r = parse_range(spec)?;
        ranges.retain(|x| x.key != r.key);
        ranges.push(r);
    }
    let keys: Vec<&str> = ranges.iter().map(|r| r.key.as_str()).collect();
    let mut columns = keys.clone();
    columns.extend([
        "arch",
        "status",
        "total_cycles",
        "mul_count",
        "throughput_per_mul",
        "cycles_ratio",
        "thr_per_mul_ratio",
        "error",
    ]);
    let mut report = Report::new(&columns);
    let points = if ranges.is_empty() {
        Vec::new()
    } else {
        grid_points(&ranges)
    };
    let rows: Vec<Vec<Row>> = points.par_iter().map(|p| sweep_point(cfg, &ranges, p)).collect();
    rows.into_iter().flatten().for_each(|r| report.push(r));
    Ok(report)
}

fn check_report(report: &CheckReport, command: &str) -> Result<Report, CliError> {
    let mut out = Report::new(&[
        "seed",
        "suite",
        "property",
        "size",
        "cases",
        "failures",
        "first_failure",
    ]);
    for r in &report.results {
        out.push(vec![
            col("seed", report.seed),
            col("suite", r.suite.as_str()),
            col("property", r.property.as_str()),
            col("size", r.size),
            col("cases", r.cases),
            col("failures", r.failures),
            col("first_failure", r.first_failure.clone()),
        ]);
    }
    eprintln!(
        "{command}: {} properties, {} cases, {} failures (seed {})",
        report.results.len(),
        report.total_cases(),
        report.total_failures(),
        report.seed
    );
    Ok(out)
}

/// Report plus the failure to return once the report is written.
pub type CheckOutcome = (Report, Option<CliError>);

fn outcome(report: &CheckReport, command: &str) -> Result<CheckOutcome, CliError> {
    let table = check_report(report, command)?;
    let failure = (!report.passed()).then(|| {
        let failing: Vec<String> = report
            .failing()
            .map(|r| format!("{}/{}@{}", r.suite, r.property, r.size))
            .collect();
        CliError::CheckFailed {
            message: format!("{} of {} properties failed", failing.len(), report.results.len()),
            failing,
        }
    });
    Ok((table, failure))
}

pub fn run_ntt_check(cfg: &NttCheckConfig) -> Result<CheckOutcome, CliError> {
    let report = run_ntt_checks(cfg).map_err(|e| CliError::invalid("InvalidArgument", e))?;
    outcome(&report, "ntt-check")
}

pub fn run_transpose_check(cfg: &TransposeCheckConfig, trace: Option<&Path>) -> Result<CheckOutcome, CliError> {
    let report = run_transpose_checks(cfg).map_err(|e| CliError::invalid("InvalidArgument", e))?;
    if let Some(path) = trace {
        let d = cfg.tile_sizes.iter().copied().max().unwrap_or(L1_PORTS);
        let stream = PortStream::matrix(0, d, L1_PORTS);
        let mut f = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
        l1_transpose_traced(&stream, d, &mut f).map_err(|e| CliError::invalid("TransposeError", e.to_string()))?;
        f.flush().map_err(|e| CliError::io(path, e))?;
    }
    outcome(&report, "transpose-check")
}

pub fn run_schedule(cfg: &Config, policy: Option<&str>, trace: Option<&Path>) -> Result<Report, CliError> {
    let policy: Policy = match policy.or(cfg.get_str("policy")?) {
        Some(p) => p.parse()?,
        None => Policy::default(),
    };
    let spec: FlashArchSpec = cfg.flash()?;
    let jobs = cfg.jobs()?;
    let trace_out = schedule(&jobs, &spec, policy)?;
    if let Err(e) = trace_out.check_invariants() {
        return Err(CliError::invalid("InvariantViolation", e));
    }
    if let Some(path) = trace {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| CliError::io(path, e))?);
        for ev in &trace_out.events {
            let line = serde_json::to_string(ev).expect("events serialize");
            writeln!(f, "{line}").map_err(|e| CliError::io(path, e))?;
        }
        f.flush().map_err(|e| CliError::io(path, e))?;
    }
    let baseline = compare_sequential_baseline(&jobs, &spec)?;

    let mut report = Report::new(&[
        "record",
        "id",
        "name",
        "class",
        "arrival",
        "first_start",
        "finish",
        "completion",
        "preemptions",
    ]);
    for j in &trace_out.jobs {
        report.push(vec![
            col("record", "job"),
            col("id", j.id),
            col("name", j.name.as_str()),
            col("class", format!("{:?}", j.class).to_lowercase()),
            col("arrival", j.arrival),
            col("first_start", j.first_start),
            col("finish", j.finish),
            col("completion", j.completion),
            col("preemptions", j.preemptions),
        ]);
    }
    let policy_name = match policy {
        Policy::Fifo => "fifo",
        Policy::PriorityPreemptive => "priority-preemptive",
    };
    report.push(vec![
        col("record", "summary"),
        col("policy", policy_name),
        col("makespan", trace_out.makespan),
        col("average_completion", trace_out.average_completion),
        col("sequential_makespan", baseline.sequential_makespan),
        col("sequential_average_completion", baseline.sequential_average_completion),
        col("makespan_speedup", baseline.makespan_speedup),
        col("average_completion_speedup", baseline.average_completion_speedup),
    ]);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_parse() {
        let r = parse_range("l=1..3").unwrap();
        assert_eq!(r.values, vec![Value::Integer(1), Value::Integer(2), Value::Integer(3)]);
        assert_eq!(parse_range("l=1,16").unwrap().values.len(), 2);
        assert!(parse_range("l=").unwrap().values.is_empty());
        assert!(parse_range("l=1..x").is_err());
        assert!(parse_range("l").is_err());
    }

    #[test]
    fn points_are_row_major() {
        let ranges = vec![parse_range("a=1,2").unwrap(), parse_range("b=5,6").unwrap()];
        let pts = grid_points(&ranges);
        assert_eq!(pts.len(), 4);
        assert_eq!(pts[1], vec![Value::Integer(1), Value::Integer(6)]);
    }

    #[test]
    fn failing_point_is_recorded() {
        let report = run_sweep(&Config::default(), &["group.R=256,100".into()]).unwrap();
        assert_eq!(report.len(), 4);
    }
}
