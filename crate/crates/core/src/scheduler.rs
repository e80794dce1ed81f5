//! Discrete-event scheduler for mixed shallow/deep jobs.
//!
//! A shallow job holds one whole affiliation. A deep job holds every
//! bootstrappable cluster, and since a shallow job also drives its
//! affiliation's bootstrappable cluster, the two kinds never overlap.
//! Jobs advance op by op; preemption takes effect at the next op boundary,
//! spills the victim's working set to HBM and reloads it on resume.

use crate::flashsim::{
    classify, memory_penalty, op_costs, transfer_cycles, workload_cost, FlashArchSpec, Op, SimError, WorkloadClass,
    WorkloadSpec, SWIFT_PER_AFFILIATION,
};
use serde::{Deserialize, Serialize};
use std::cmp::Reverse;
use std::collections::{BTreeMap, HashMap};
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    /// Arrival order, no preemption; later jobs backfill idle affiliations.
    Fifo,
    #[default]
    PriorityPreemptive,
}

impl FromStr for Policy {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fifo" => Ok(Policy::Fifo),
            "priority" | "priority-preemptive" => Ok(Policy::PriorityPreemptive),
            other => Err(SimError::Invalid(format!(
                "unknown policy {other:?} (expected fifo or priority-preemptive)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Start,
    Preempt,
    Spill,
    Resume,
    Load,
    Finish,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub time: u64,
    pub kind: EventKind,
    pub job: u32,
    pub resources: Vec<String>,
    /// Transfer length of a spill or load; zero otherwise.
    pub cycles: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobResult {
    pub id: u32,
    pub name: String,
    pub class: WorkloadClass,
    pub arrival: u64,
    pub first_start: u64,
    pub finish: u64,
    /// `finish - arrival`.
    pub completion: u64,
    pub preemptions: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleTrace {
    pub policy: Policy,
    pub events: Vec<TraceEvent>,
    /// Sorted by job id.
    pub jobs: Vec<JobResult>,
    pub makespan: u64,
    pub total_completion: u64,
    pub average_completion: f64,
}

fn cluster_names(hold: Hold) -> Vec<String> {
    match hold {
        Hold::Affiliation(a) => std::iter::once(format!("aff{a}.boot"))
            .chain((0..SWIFT_PER_AFFILIATION).map(|s| format!("aff{a}.swift{s}")))
            .collect(),
        Hold::AllBootstrappable(k) => (0..k).map(|a| format!("aff{a}.boot")).collect(),
    }
}

impl ScheduleTrace {
    pub fn job(&self, id: u32) -> Option<&JobResult> {
        self.jobs.iter().find(|j| j.id == id)
    }

    pub fn spill_load_cycles(&self) -> u64 {
        self.events
            .iter()
            .filter(|e| matches!(e.kind, EventKind::Spill | EventKind::Load))
            .map(|e| e.cycles)
            .sum()
    }

    /// Checks ordering, start/finish pairing, preempt→spill and
    /// resume→load adjacency, and that no cluster is held twice at once.
    pub fn check_invariants(&self) -> Result<(), String> {
        if let Some(w) = self.events.windows(2).find(|w| w[1].time < w[0].time) {
            return Err(format!("events out of order at {} -> {}", w[0].time, w[1].time));
        }
        let mut per_job: BTreeMap<u32, Vec<&TraceEvent>> = BTreeMap::new();
        for e in &self.events {
            per_job.entry(e.job).or_default().push(e);
        }
        for (id, evs) in &per_job {
            let count = |k| evs.iter().filter(|e| e.kind == k).count();
            if count(EventKind::Start) != 1 || count(EventKind::Finish) != 1 {
                return Err(format!("job {id} lacks exactly one start and one finish"));
            }
            if evs.first().map(|e| e.kind) != Some(EventKind::Start)
                || evs.last().map(|e| e.kind) != Some(EventKind::Finish)
            {
                return Err(format!("job {id} does not begin with start and end with finish"));
            }
            for w in evs.windows(2) {
                let want = match w[0].kind {
                    EventKind::Preempt => Some(EventKind::Spill),
                    EventKind::Resume => Some(EventKind::Load),
                    _ => None,
                };
                if want.is_some_and(|k| k != w[1].kind) {
                    return Err(format!("job {id}: {:?} not followed by {:?}", w[0].kind, want));
                }
            }
        }
        // cluster -> (holder, release time once known)
        let mut held: HashMap<&str, (u32, Option<u64>)> = HashMap::new();
        for e in &self.events {
            match e.kind {
                EventKind::Start | EventKind::Resume => {
                    for r in &e.resources {
                        if let Some(&(other, until)) = held.get(r.as_str()) {
                            if until.is_none_or(|u| u > e.time) {
                                return Err(format!(
                                    "{r} held by job {other} when job {} took it at {}",
                                    e.job, e.time
                                ));
                            }
                        }
                        held.insert(r, (e.job, None));
                    }
                }
                EventKind::Spill | EventKind::Finish => {
                    for r in &e.resources {
                        held.insert(r, (e.job, Some(e.time + e.cycles)));
                    }
                }
                EventKind::Preempt | EventKind::Load => {}
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Hold {
    Affiliation(usize),
    AllBootstrappable(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    NotArrived,
    Ready,
    Running { until: u64 },
    // between two ops, or done loading; the only point a job can be preempted
    Boundary,
    Spilling { until: u64 },
    Preempted,
    Loading { until: u64 },
    Done,
}

#[derive(Debug)]
struct Job<'a> {
    spec: &'a WorkloadSpec,
    class: WorkloadClass,
    // run-length op segments: (cycles per op, count)
    runs: Vec<(u64, u64)>,
    run: usize,
    done_in_run: u64,
    transfer: u64,
    phase: Phase,
    hold: Option<Hold>,
    first_start: Option<u64>,
    finish: Option<u64>,
    preemptions: u32,
}

impl Job<'_> {
    fn remaining(&self) -> bool {
        self.run < self.runs.len()
    }

    fn advance(&mut self) {
        self.done_in_run += 1;
        if self.done_in_run == self.runs[self.run].1 {
            self.run += 1;
            self.done_in_run = 0;
        }
    }

    fn next_op_cycles(&self) -> u64 {
        self.runs[self.run].0
    }

    fn holds_resources(&self) -> bool {
        matches!(
            self.phase,
            Phase::Running { .. } | Phase::Boundary | Phase::Spilling { .. } | Phase::Loading { .. }
        )
    }

    fn waiting(&self) -> bool {
        matches!(self.phase, Phase::Ready | Phase::Preempted)
    }
}

/// Op segments of a job in issue order, memory penalty first.
fn job_runs(w: &WorkloadSpec, spec: &FlashArchSpec) -> Result<Vec<(u64, u64)>, SimError> {
    // validates the op mix for the class
    workload_cost(w, spec)?;
    let costs = op_costs(w, spec)?;
    let mut runs = Vec::new();
    let penalty = memory_penalty(w, spec)?;
    if penalty > 0 {
        runs.push((penalty, 1));
    }
    for op in Op::ALL {
        let count = w.ops.get(op);
        if count > 0 {
            let c = costs.get(op).expect("validated by workload_cost");
            runs.push((c, count));
        }
    }
    Ok(runs)
}

/// Standalone run time of a job: op cycles plus memory penalty.
pub fn job_duration(w: &WorkloadSpec, spec: &FlashArchSpec) -> Result<u64, SimError> {
    Ok(workload_cost(w, spec)?.total_cycles + memory_penalty(w, spec)?)
}

struct Sim<'a> {
    spec: FlashArchSpec,
    policy: Policy,
    jobs: Vec<Job<'a>>,
    events: Vec<TraceEvent>,
}

impl<'a> Sim<'a> {
    fn emit(&mut self, time: u64, kind: EventKind, j: usize, cycles: u64) {
        let hold = self.jobs[j].hold.expect("events are emitted while holding");
        self.events.push(TraceEvent {
            time,
            kind,
            job: self.jobs[j].spec.id,
            resources: cluster_names(hold),
            cycles,
        });
    }

    fn order_key(&self, j: usize) -> (Reverse<i64>, u64, u32) {
        let s = self.jobs[j].spec;
        match self.policy {
            Policy::Fifo => (Reverse(0), s.arrival, s.id),
            Policy::PriorityPreemptive => (Reverse(s.priority), s.arrival, s.id),
        }
    }

    fn holder_of(&self, a: usize) -> Option<usize> {
        self.jobs.iter().position(|job| {
            job.holds_resources()
                && match job.hold {
                    Some(Hold::Affiliation(x)) => x == a,
                    Some(Hold::AllBootstrappable(_)) => true,
                    None => false,
                }
        })
    }

    /// Applies every state change due at `t`; returns whether anything moved.
    fn settle(&mut self, t: u64) -> bool {
        let mut changed = false;
        for j in 0..self.jobs.len() {
            let job = &mut self.jobs[j];
            match job.phase {
                Phase::NotArrived if job.spec.arrival <= t => {
                    job.phase = Phase::Ready;
                    changed = true;
                }
                Phase::Running { until } if until == t => {
                    job.advance();
                    job.phase = Phase::Boundary;
                    changed = true;
                }
                Phase::Spilling { until } if until == t => {
                    job.hold = None;
                    job.phase = Phase::Preempted;
                    changed = true;
                }
                Phase::Loading { until } if until == t => {
                    job.phase = Phase::Boundary;
                    changed = true;
                }
                _ => {}
            }
            if self.jobs[j].phase == Phase::Boundary && !self.jobs[j].remaining() {
                self.emit(t, EventKind::Finish, j, 0);
                let job = &mut self.jobs[j];
                job.phase = Phase::Done;
                job.finish = Some(t);
                job.hold = None;
                changed = true;
            }
        }
        changed
    }

    fn dispatch(&mut self, t: u64, j: usize, hold: Hold) {
        let job = &mut self.jobs[j];
        job.hold = Some(hold);
        if job.phase == Phase::Preempted {
            let load = job.transfer;
            job.phase = Phase::Loading { until: t + load };
            self.emit(t, EventKind::Resume, j, 0);
            self.emit(t, EventKind::Load, j, load);
        } else {
            job.first_start = Some(t);
            job.phase = Phase::Boundary;
            self.emit(t, EventKind::Start, j, 0);
        }
    }

    fn preempt_if_at_boundary(&mut self, t: u64, victim: usize) -> bool {
        if self.jobs[victim].phase != Phase::Boundary {
            return false;
        }
        let job = &mut self.jobs[victim];
        let spill = job.transfer;
        job.phase = Phase::Spilling { until: t + spill };
        job.preemptions += 1;
        self.emit(t, EventKind::Preempt, victim, 0);
        self.emit(t, EventKind::Spill, victim, spill);
        true
    }

    fn decide(&mut self, t: u64) -> bool {
        let k = self.spec.affiliations;
        let mut changed = false;
        let mut busy: Vec<bool> = (0..k).map(|a| self.holder_of(a).is_some()).collect();
        let mut claimed = vec![false; k];
        let mut waiting: Vec<usize> = (0..self.jobs.len()).filter(|&j| self.jobs[j].waiting()).collect();
        waiting.sort_by_key(|&j| self.order_key(j));
        let preemptive = self.policy == Policy::PriorityPreemptive;

        for j in waiting {
            let prio = self.jobs[j].spec.priority;
            match self.jobs[j].class {
                WorkloadClass::Shallow => {
                    if let Some(a) = (0..k).find(|&a| !busy[a] && !claimed[a]) {
                        busy[a] = true;
                        self.dispatch(t, j, Hold::Affiliation(a));
                        changed = true;
                        continue;
                    }
                    if !preemptive {
                        continue;
                    }
                    // victim: already spilling first, then lowest priority,
                    // latest arrival, highest id
                    let victim = (0..k)
                        .filter(|&a| !claimed[a])
                        .filter_map(|a| self.holder_of(a).map(|h| (a, h)))
                        .filter(|&(_, h)| self.jobs[h].spec.priority < prio)
                        .min_by_key(|&(a, h)| {
                            let v = &self.jobs[h];
                            (
                                !matches!(v.phase, Phase::Spilling { .. }),
                                v.spec.priority,
                                Reverse(v.spec.arrival),
                                Reverse(v.spec.id),
                                a,
                            )
                        });
                    if let Some((a, h)) = victim {
                        claimed[a] = true;
                        changed |= self.preempt_if_at_boundary(t, h);
                    }
                }
                WorkloadClass::Deep => {
                    if (0..k).all(|a| !busy[a] && !claimed[a]) {
                        busy.iter_mut().for_each(|b| *b = true);
                        self.dispatch(t, j, Hold::AllBootstrappable(k));
                        changed = true;
                        continue;
                    }
                    if !preemptive || claimed.iter().any(|&c| c) {
                        continue;
                    }
                    let mut holders: Vec<usize> = (0..k).filter_map(|a| self.holder_of(a)).collect();
                    holders.dedup();
                    if holders.iter().all(|&h| self.jobs[h].spec.priority < prio) {
                        claimed.iter_mut().for_each(|c| *c = true);
                        for h in holders {
                            changed |= self.preempt_if_at_boundary(t, h);
                        }
                    }
                }
            }
        }
        changed
    }

    /// Jobs left at an op boundary begin their next op.
    fn issue(&mut self, t: u64) {
        for job in &mut self.jobs {
            if job.phase == Phase::Boundary && job.remaining() {
                job.phase = Phase::Running {
                    until: t + job.next_op_cycles(),
                };
            }
        }
    }

    fn next_time(&self, t: u64) -> Option<u64> {
        self.jobs
            .iter()
            .filter_map(|job| match job.phase {
                Phase::NotArrived => Some(job.spec.arrival),
                Phase::Running { until } | Phase::Spilling { until } | Phase::Loading { until } => Some(until),
                _ => None,
            })
            .filter(|&x| x > t)
            .min()
    }

    fn run(mut self) -> Result<ScheduleTrace, SimError> {
        let mut t = self.jobs.iter().map(|j| j.spec.arrival).min().unwrap_or(0);
        loop {
            loop {
                let settled = self.settle(t);
                let decided = self.decide(t);
                // zero-length transfers resolve within the same instant
                let instant = self.jobs.iter().any(|j| {
                    matches!(j.phase, Phase::Spilling { until } | Phase::Loading { until } if until == t)
                        || (j.phase == Phase::Boundary && !j.remaining())
                });
                if !(settled || decided || instant) {
                    break;
                }
            }
            self.issue(t);
            if self.jobs.iter().all(|j| j.phase == Phase::Done) {
                break;
            }
            t = self
                .next_time(t)
                .ok_or_else(|| SimError::Invalid(format!("scheduler stalled at cycle {t} with unfinished jobs")))?;
        }
        Ok(self.finish())
    }

    fn finish(self) -> ScheduleTrace {
        let mut jobs: Vec<JobResult> = self
            .jobs
            .iter()
            .map(|j| {
                let finish = j.finish.expect("all jobs done");
                JobResult {
                    id: j.spec.id,
                    name: j.spec.name.clone(),
                    class: j.class,
                    arrival: j.spec.arrival,
                    first_start: j.first_start.expect("all jobs started"),
                    finish,
                    completion: finish - j.spec.arrival,
                    preemptions: j.preemptions,
                }
            })
            .collect();
        jobs.sort_by_key(|j| j.id);
        let makespan = jobs.iter().map(|j| j.finish).max().unwrap_or(0);
        let total_completion: u64 = jobs.iter().map(|j| j.completion).sum();
        let average_completion = if jobs.is_empty() {
            0.0
        } else {
            total_completion as f64 / jobs.len() as f64
        };
        ScheduleTrace {
            policy: self.policy,
            events: self.events,
            jobs,
            makespan,
            total_completion,
            average_completion,
        }
    }
}

fn check_ids(jobs: &[WorkloadSpec]) -> Result<(), SimError> {
    let mut ids: Vec<u32> = jobs.iter().map(|j| j.id).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(SimError::Invalid(format!("duplicate job id {}", w[0])));
    }
    Ok(())
}

pub fn schedule(jobs: &[WorkloadSpec], spec: &FlashArchSpec, policy: Policy) -> Result<ScheduleTrace, SimError> {
    spec.validate()?;
    check_ids(jobs)?;
    let mut states = Vec::with_capacity(jobs.len());
    for w in jobs {
        states.push(Job {
            spec: w,
            class: classify(w)?,
            runs: job_runs(w, spec)?,
            run: 0,
            done_in_run: 0,
            transfer: transfer_cycles(w.working_set_bytes, spec),
            phase: Phase::NotArrived,
            hold: None,
            first_start: None,
            finish: None,
            preemptions: 0,
        });
    }
    Sim {
        spec: *spec,
        policy,
        jobs: states,
        events: Vec::new(),
    }
    .run()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineComparison {
    pub sequential_makespan: u64,
    pub sequential_average_completion: f64,
    pub scheduled_makespan: u64,
    pub scheduled_average_completion: f64,
    /// Sequential over scheduled; above 1 means the scheduler is faster.
    pub makespan_speedup: f64,
    pub average_completion_speedup: f64,
}

/// Runs the jobs one at a time in arrival order, each for its standalone
/// duration, and compares with the priority-preemptive schedule.
pub fn compare_sequential_baseline(
    jobs: &[WorkloadSpec],
    spec: &FlashArchSpec,
) -> Result<BaselineComparison, SimError> {
    let scheduled = schedule(jobs, spec, Policy::PriorityPreemptive)?;
    let mut order: Vec<&WorkloadSpec> = jobs.iter().collect();
    order.sort_by_key(|w| (w.arrival, w.id));
    let (mut clock, mut total) = (0u64, 0u64);
    for w in order {
        clock = clock.max(w.arrival) + job_duration(w, spec)?;
        total += clock - w.arrival;
    }
    let n = jobs.len().max(1) as f64;
    let seq_avg = total as f64 / n;
    let ratio = |a: f64, b: f64| if b == 0.0 { 1.0 } else { a / b };
    Ok(BaselineComparison {
        sequential_makespan: clock,
        sequential_average_completion: seq_avg,
        scheduled_makespan: scheduled.makespan,
        scheduled_average_completion: scheduled.average_completion,
        makespan_speedup: ratio(clock as f64, scheduled.makespan as f64),
        average_completion_speedup: ratio(seq_avg, scheduled.average_completion),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flashsim::{shallow_cost, OpCounts};
    use proptest::prelude::*;

    fn shallow_job(id: u32) -> WorkloadSpec {
        let mut w = WorkloadSpec::new(id, 1 << 13, 6);
        w.ops = OpCounts {
            ntt: 4,
            intt: 4,
            mul: 8,
            add: 8,
            ..Default::default()
        };
        w.working_set_bytes = 1 << 20;
        w
    }

    fn deep_job(id: u32, keyswitch: u64) -> WorkloadSpec {
        let mut w = WorkloadSpec::new(id, 1 << 16, 16);
        w.ops.keyswitch = keyswitch;
        w.working_set_bytes = 64 << 20;
        w
    }

    fn kinds(trace: &ScheduleTrace) -> Vec<(u64, EventKind, u32, u64)> {
        trace.events.iter().map(|e| (e.time, e.kind, e.job, e.cycles)).collect()
    }

    #[test]
    fn single_shallow_job_matches_cost() {
        let spec = FlashArchSpec::default();
        let w = shallow_job(0);
        let trace = schedule(std::slice::from_ref(&w), &spec, Policy::PriorityPreemptive).unwrap();
        assert_eq!(trace.makespan, shallow_cost(&w, &spec).unwrap().total_cycles);
        assert_eq!(trace.events.len(), 2);
        trace.check_invariants().unwrap();
        let cmp = compare_sequential_baseline(&[w], &spec).unwrap();
        assert_eq!(cmp.makespan_speedup, 1.0);
        assert_eq!(cmp.average_completion_speedup, 1.0);
    }

    #[test]
    fn eight_shallow_jobs_run_side_by_side() {
        let spec = FlashArchSpec::default();
        let jobs: Vec<_> = (0..8).map(shallow_job).collect();
        let single = job_duration(&jobs[0], &spec).unwrap();
        let trace = schedule(&jobs, &spec, Policy::PriorityPreemptive).unwrap();
        assert_eq!(trace.makespan, single);
        trace.check_invariants().unwrap();
        let affs: std::collections::BTreeSet<_> = trace
            .events
            .iter()
            .filter(|e| e.kind == EventKind::Start)
            .map(|e| e.resources[0].clone())
            .collect();
        assert_eq!(affs.len(), 8);
        let cmp = compare_sequential_baseline(&jobs, &spec).unwrap();
        assert_eq!(cmp.makespan_speedup, 8.0);
        // sequential completions are 1..8 single-job times
        assert_eq!(cmp.average_completion_speedup, 4.5);
    }

    #[test]
    fn k_shallow_jobs_makespan_ratio_is_k() {
        let spec = FlashArchSpec::default();
        for k in 1..=8u32 {
            let jobs: Vec<_> = (0..k).map(shallow_job).collect();
            let cmp = compare_sequential_baseline(&jobs, &spec).unwrap();
            assert_eq!(cmp.makespan_speedup, k as f64);
        }
        // a ninth job waits for a free affiliation
        let jobs: Vec<_> = (0..9).map(shallow_job).collect();
        let single = job_duration(&jobs[0], &spec).unwrap();
        assert_eq!(schedule(&jobs, &spec, Policy::Fifo).unwrap().makespan, 2 * single);
    }

    #[test]
    fn hand_simulated_preemption() {
        let spec = FlashArchSpec::default();
        // deep: two key-switches of 2876 cycles each (1447 + 1429), 64 MiB
        // working set spills and reloads in 65536 cycles
        let deep = deep_job(0, 2);
        // shallow at l = 6: one NTT of 531 (250 + 17 + 36 + 228) and one
        // mul of 96 cycles
        let mut sh = WorkloadSpec::new(1, 1 << 13, 6);
        sh.ops.ntt = 1;
        sh.ops.mul = 1;
        sh.working_set_bytes = 1 << 20;
        sh.priority = 5;
        sh.arrival = 100;
        let trace = schedule(&[deep, sh], &spec, Policy::PriorityPreemptive).unwrap();
        use EventKind::*;
        assert_eq!(
            kinds(&trace),
            vec![
                (0, Start, 0, 0),
                (2876, Preempt, 0, 0),
                (2876, Spill, 0, 65536),
                (68412, Start, 1, 0),
                (69039, Finish, 1, 0),
                (69039, Resume, 0, 0),
                (69039, Load, 0, 65536),
                (137451, Finish, 0, 0),
            ]
        );
        assert_eq!(
            trace.events[3].resources,
            vec!["aff0.boot", "aff0.swift0", "aff0.swift1"]
        );
        assert_eq!(trace.job(1).unwrap().completion, 68939);
        assert_eq!(trace.makespan, 137451);
        assert_eq!(trace.job(0).unwrap().preemptions, 1);
        trace.check_invariants().unwrap();
    }

    #[test]
    fn fifo_never_preempts() {
        let spec = FlashArchSpec::default();
        let deep = deep_job(0, 2);
        let mut sh = shallow_job(1);
        sh.priority = 5;
        sh.arrival = 100;
        let trace = schedule(&[deep, sh], &spec, Policy::Fifo).unwrap();
        assert!(trace.events.iter().all(|e| e.kind != EventKind::Preempt));
        assert_eq!(trace.job(1).unwrap().first_start, 2 * 2876);
        trace.check_invariants().unwrap();
    }

    #[test]
    fn mixed_one_deep_three_shallow() {
        let spec = FlashArchSpec::default();
        let mut jobs = vec![deep_job(0, 3)];
        jobs.extend((1..4).map(shallow_job));
        let d = job_duration(&jobs[0], &spec).unwrap();
        let s = job_duration(&jobs[1], &spec).unwrap();
        let trace = schedule(&jobs, &spec, Policy::PriorityPreemptive).unwrap();
        trace.check_invariants().unwrap();
        // deep first on everything, then the three shallow jobs together
        assert_eq!(trace.job(0).unwrap().finish, d);
        for id in 1..4 {
            assert_eq!(trace.job(id).unwrap().first_start, d);
            assert_eq!(trace.job(id).unwrap().finish, d + s);
        }
        let cmp = compare_sequential_baseline(&jobs, &spec).unwrap();
        assert_eq!(cmp.sequential_makespan, d + 3 * s);
        assert_eq!(cmp.makespan_speedup, (d + 3 * s) as f64 / (d + s) as f64);
        let seq_total = d + (d + s) + (d + 2 * s) + (d + 3 * s);
        let sched_total = d + 3 * (d + s);
        assert_eq!(cmp.average_completion_speedup, seq_total as f64 / sched_total as f64);
    }

    #[test]
    fn high_priority_deep_preempts_every_shallow() {
        let spec = FlashArchSpec::default();
        let mut jobs: Vec<_> = (0..3).map(shallow_job).collect();
        let mut deep = deep_job(9, 1);
        deep.priority = 3;
        deep.arrival = 10;
        jobs.push(deep);
        let trace = schedule(&jobs, &spec, Policy::PriorityPreemptive).unwrap();
        trace.check_invariants().unwrap();
        let preempts = trace.events.iter().filter(|e| e.kind == EventKind::Preempt).count();
        assert_eq!(preempts, 3);
        let spill = transfer_cycles(1 << 20, &spec);
        assert_eq!(trace.spill_load_cycles(), 3 * 2 * spill);
        let deep_res = trace.job(9).unwrap();
        assert!(trace
            .jobs
            .iter()
            .filter(|j| j.id != 9)
            .all(|j| j.finish > deep_res.finish));
    }

    #[test]
    fn errors_propagate() {
        let spec = FlashArchSpec::default();
        let bad = WorkloadSpec::new(0, 1 << 10, 2);
        assert_eq!(
            schedule(&[bad], &spec, Policy::Fifo).unwrap_err(),
            SimError::UnsupportedDegree(1024)
        );
        let dup = [shallow_job(1), shallow_job(1)];
        assert!(matches!(schedule(&dup, &spec, Policy::Fifo), Err(SimError::Invalid(_))));
        assert_eq!("fifo".parse::<Policy>().unwrap(), Policy::Fifo);
        assert!("lottery".parse::<Policy>().is_err());
    }

    #[test]
    fn empty_and_zero_op_jobs() {
        let spec = FlashArchSpec::default();
        let trace = schedule(&[], &spec, Policy::Fifo).unwrap();
        assert_eq!(trace.makespan, 0);
        let idle = WorkloadSpec::new(3, 1 << 12, 1);
        let trace = schedule(&[idle], &spec, Policy::Fifo).unwrap();
        assert_eq!(
            kinds(&trace),
            vec![(0, EventKind::Start, 3, 0), (0, EventKind::Finish, 3, 0)]
        );
    }

    fn arb_job(id: u32) -> impl Strategy<Value = WorkloadSpec> {
        (
            prop_oneof![Just(1u64 << 12), Just(1 << 13), Just(1 << 15), Just(1 << 16)],
            1u64..4,
            0u64..3,
            0i64..3,
            0u64..20_000,
            0u64..(96 << 20),
        )
            .prop_map(move |(n, ops, ks, priority, arrival, ws)| {
                let mut w = WorkloadSpec::new(id, n, 8);
                w.ops.ntt = ops;
                w.ops.mul = ops;
                if n > 1 << 14 {
                    w.ops.keyswitch = ks;
                }
                w.priority = priority;
                w.arrival = arrival;
                w.working_set_bytes = ws;
                w
            })
    }

    fn arb_jobs() -> impl Strategy<Value = Vec<WorkloadSpec>> {
        (1usize..12).prop_flat_map(|k| (0..k as u32).map(arb_job).collect::<Vec<_>>())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn random_scenarios_keep_invariants(jobs in arb_jobs(), fifo in any::<bool>()) {
            let spec = FlashArchSpec::default();
            let policy = if fifo { Policy::Fifo } else { Policy::PriorityPreemptive };
            let a = schedule(&jobs, &spec, policy).unwrap();
            prop_assert!(a.check_invariants().is_ok(), "{:?}", a.check_invariants());
            let b = schedule(&jobs, &spec, policy).unwrap();
            prop_assert_eq!(&a, &b);
            // two transfers per preemption
            let expected: u64 = a.jobs.iter().map(|j| {
                let w = jobs.iter().find(|w| w.id == j.id).unwrap();
                2 * j.preemptions as u64 * transfer_cycles(w.working_set_bytes, &spec)
            }).sum();
            prop_assert_eq!(a.spill_load_cycles(), expected);
            for j in &a.jobs {
                let w = jobs.iter().find(|w| w.id == j.id).unwrap();
                prop_assert!(j.completion >= job_duration(w, &spec).unwrap());
            }
        }
    }
}
