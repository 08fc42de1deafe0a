//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.
//!
//! Run alone with `cargo test -p qospf --test acceptance`.

use std::cell::Cell;
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use num_rational::Ratio;
use num_traits::{One, Zero};
use proptest::prelude::*;
use proptest::test_runner::{Config as RunnerConfig, TestRunner};

use qospf::channel::ChannelVariation;
use qospf::harness::{self, ExperimentPlan};
use qospf::metrics::{jain_index, kpi, ALL_CLASSES};
use qospf::model::{
    self, ArrivalSpec, FlowState, Packet, QfiProfile, Scenario, StartOffsetPolicy, TtiClock,
};
use qospf::presets::{self, BALANCED, DELAY_TUNED, FAIRNESS_TUNED};
use qospf::scheduler::{update_ema, QosPf, QosPfParams, SchedulerInput};
use qospf::{ResourceGrid, SchedulerKind, Simulation};

type Q = Ratio<i128>;

const QOS: &str = "qos-pf";
const MAXCI: &str = "max-ci";
const SP: &str = "static-priority";

struct Outcome {
    id: &'static str,
    title: &'static str,
    pass: bool,
    detail: String,
}

fn outcome(id: &'static str, title: &'static str, pass: bool, detail: String) -> Outcome {
    Outcome {
        id,
        title,
        pass,
        detail,
    }
}

fn reference_plan() -> ExperimentPlan<f64> {
    let mut plan = ExperimentPlan::new(presets::reference_scenario());
    plan.runs = 20;
    plan.base_seed = 1;
    plan
}

fn get(agg: &qospf::AggregateReport, s: &str, c: &str, k: &str) -> f64 {
    agg.mean(s, c, k)
        .unwrap_or_else(|| panic!("missing KPI {s}/{c}/{k}"))
}

// ---------------------------------------------------------------- 1-3

fn reference_criteria() -> Vec<Outcome> {
    let started = Instant::now();
    let batch = harness::run_batch(&reference_plan()).expect("reference batch");
    let elapsed = started.elapsed().as_secs_f64();
    let agg = &batch.aggregate;

    let v = |s| get(agg, s, "control", kpi::VIOLATION_RATIO);
    let (vq, vm, vs) = (v(QOS), v(MAXCI), v(SP));
    let c1 = vq < 0.02 && vq < vs && vs < vm && vm > vq && vm >= 5.0 * vq;
    let d1 = format!(
        "control violation ratio qos-pf={vq:.4} static-priority={vs:.4} max-ci={vm:.4}; \
         need qos-pf<0.02, qos-pf<sp<max-ci, max-ci>=5x qos-pf \
         (sp<=~0.05: {}; batch of 60 runs took {elapsed:.1} s)",
        vs <= 0.05
    );

    let j = |s| get(agg, s, ALL_CLASSES, kpi::JAIN);
    let (jq, jm, js) = (j(QOS), j(MAXCI), j(SP));
    let c2 = jq > 0.9 && jm < jq && jm < js;
    let d2 = format!(
        "Jain qos-pf={jq:.4} static-priority={js:.4} max-ci={jm:.4}; need qos-pf>0.9, max-ci below both \
         (raw-throughput Jain qos-pf={:.4} sp={:.4} max-ci={:.4})",
        j_raw(agg, QOS),
        j_raw(agg, SP),
        j_raw(agg, MAXCI)
    );

    let g = |s| get(agg, s, "sensor", kpi::GBR_SATISFACTION);
    let (gq, gm, gs) = (g(QOS), g(MAXCI), g(SP));
    let c3 = gq >= 0.95 && gq >= gs && gq - gm >= 0.20;
    let d3 = format!(
        "sensor GBR satisfaction qos-pf={:.1}% static-priority={:.1}% max-ci={:.1}%; \
         need qos-pf>=95%, >=sp, >= max-ci+20pp",
        gq * 100.0,
        gs * 100.0,
        gm * 100.0
    );

    vec![
        outcome("1", "deadline compliance", c1, d1),
        outcome("2", "fairness", c2, d2),
        outcome("3", "GBR satisfaction", c3, d3),
    ]
}

fn j_raw(agg: &qospf::AggregateReport, s: &str) -> f64 {
    get(agg, s, ALL_CLASSES, kpi::JAIN_RAW)
}

// ---------------------------------------------------------------- 4

fn sensitivity_criterion() -> Vec<Outcome> {
    let results = harness::sensitivity_sweep(&reference_plan()).expect("sensitivity sweep");
    let by_name: BTreeMap<&str, &qospf::AggregateReport> = results
        .iter()
        .map(|r| (r.name.as_str(), &r.aggregate))
        .collect();
    let delay = |n: &str| get(by_name[n], QOS, "control", kpi::MEAN_DELAY);
    let jain = |n: &str| get(by_name[n], QOS, ALL_CLASSES, kpi::JAIN);
    let (db, dd) = (delay(BALANCED), delay(DELAY_TUNED));
    let (jb, jf) = (jain(BALANCED), jain(FAIRNESS_TUNED));
    vec![
        outcome(
            "4a",
            "delay-tuned lowers control delay",
            dd < db,
            format!(
                "control mean delay balanced={:.4} ms delay-tuned={:.4} ms ({:+.1}%)",
                db * 1e3,
                dd * 1e3,
                (dd / db - 1.0) * 100.0
            ),
        ),
        outcome(
            "4b",
            "fairness-tuned raises Jain",
            jf > jb,
            format!(
                "Jain balanced={jb:.6} fairness-tuned={jf:.6} ({:+.2}%)",
                (jf / jb - 1.0) * 100.0
            ),
        ),
    ]
}

// ---------------------------------------------------------------- 5

fn scalability_criterion() -> Vec<Outcome> {
    let mut plan = reference_plan();
    plan.ue_sweep = vec![5, 10, 20, 40];
    let points = harness::scalability_sweep(&plan).expect("scalability sweep");
    let at40 = points
        .iter()
        .find(|p| p.ues == 40)
        .expect("40 UE point")
        .mean_runtime;
    let exponent = harness::scaling_exponent(&points).unwrap_or(f64::INFINITY);
    let table = points
        .iter()
        .map(|p| format!("{}:{:.2}us", p.ues, p.mean_runtime * 1e6))
        .collect::<Vec<_>>()
        .join(" ");
    vec![outcome(
        "5",
        "scalability",
        at40 < 2e-3 && exponent < 1.5,
        format!(
            "mean call time {table}; 40 UEs {:.3} ms < 2 ms, fitted exponent {exponent:.3} < 1.5",
            at40 * 1e3
        ),
    )]
}

// ---------------------------------------------------------------- 6

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(RunnerConfig {
        cases,
        failure_persistence: None,
        ..RunnerConfig::default()
    })
}

fn report<E: std::fmt::Display>(r: Result<(), E>) -> (bool, String) {
    match r {
        Ok(()) => (true, String::new()),
        Err(e) => (false, format!(": {e}")),
    }
}

fn jain_property() -> Outcome {
    let strat = (prop::collection::vec(1e-6f64..1e9, 1..64), 1e-6f64..1e6);
    let r = runner(2000).run(&strat, |(xs, c)| {
        let j = jain_index(&xs).unwrap();
        let n = xs.len() as f64;
        prop_assert!(j >= 1.0 / n - 1e-12 && j <= 1.0 + 1e-12, "J={j} n={n}");
        let scaled: Vec<f64> = xs.iter().map(|x| x * c).collect();
        let js = jain_index(&scaled).unwrap();
        prop_assert!((js - j).abs() <= 1e-12, "J={j} J(cx)={js} c={c}");
        Ok(())
    });
    let (pass, err) = report(r);
    outcome(
        "6a",
        "Jain bounds and scale invariance",
        pass,
        format!("2000 random vectors, tolerance 1e-12{err}"),
    )
}

#[derive(Debug, Clone)]
struct Fuzz {
    ues: u32,
    kind: SchedulerKind,
    seed: u64,
    prbs: u32,
    buffer: usize,
    fading: bool,
    burst: (u32, u32),
    zero_offsets: bool,
}

fn fuzz_strategy() -> impl Strategy<Value = Fuzz> {
    (
        1u32..=8,
        prop::sample::select(SchedulerKind::ALL.to_vec()),
        any::<u64>(),
        5u32..=50,
        5usize..=500,
        any::<bool>(),
        (1u32..=10, 0u32..=40),
        any::<bool>(),
    )
        .prop_map(
            |(ues, kind, seed, prbs, buffer, fading, b, zero_offsets)| Fuzz {
                ues,
                kind,
                seed,
                prbs,
                buffer,
                fading,
                burst: (b.0, b.0 + b.1),
                zero_offsets,
            },
        )
}

fn fuzz_scenario(f: &Fuzz) -> Scenario<f64> {
    let mut s = presets::reference_scenario().with_num_ues(f.ues);
    s.num_prbs = f.prbs;
    s.buffer_capacity = f.buffer;
    s.seed = f.seed;
    s.channel = if f.fading {
        ChannelVariation::BlockFading {
            lo: 0.3,
            hi: 1.0,
            block_ttis: 7,
        }
    } else {
        ChannelVariation::StaticPerUe { lo: 0.6, hi: 1.0 }
    };
    s.start_offsets = if f.zero_offsets {
        StartOffsetPolicy::Zero
    } else {
        StartOffsetPolicy::Random
    };
    s.flows_per_ue[2] = presets::video_profile_as(f.burst.0, f.burst.1);
    s
}

fn grid_and_accounting_properties() -> Vec<Outcome> {
    let ttis = Cell::new(0u64);
    let identity_breaks = Cell::new(0u64);
    let flows_checked = Cell::new(0u64);
    let r = runner(24).run(&fuzz_strategy(), |f| {
        let s = fuzz_scenario(&f);
        prop_assert_eq!(s.num_ttis(), 10_000);
        let mut sim = Simulation::new(&s, &QosPfParams::default(), f.kind, f.seed).unwrap();
        while let Some(step) = sim.step().unwrap() {
            ttis.set(ttis.get() + 1);
            let a = step.allocation;
            prop_assert!(a.total_prbs() <= step.grid.num_prbs());
            prop_assert_eq!(
                a.total_prbs() + step.grid.unassigned(),
                step.grid.num_prbs()
            );
            let mut owned: BTreeMap<u32, u32> = BTreeMap::new();
            for prb in 0..step.grid.num_prbs() {
                if let Some(o) = step.grid.owner(prb) {
                    *owned.entry(o).or_default() += 1;
                }
            }
            for g in &a.grants {
                let q = step.queued_before[g.flow_id as usize];
                prop_assert!(q > 0, "tti {} grant to empty flow {}", step.tti, g.flow_id);
                prop_assert!(g.bytes <= q);
                prop_assert!(g.prbs > 0);
                prop_assert_eq!(owned.get(&g.flow_id).copied(), Some(g.prbs));
            }
            prop_assert_eq!(owned.len(), a.grants.len());
        }
        let report = sim.finish().unwrap();
        for fl in &report.per_flow {
            flows_checked.set(flows_checked.get() + 1);
            if fl.arrivals != fl.departures + fl.residual + fl.drops {
                identity_breaks.set(identity_breaks.get() + 1);
            }
        }
        Ok(())
    });
    let (pass, err) = report(r);
    let breaks = identity_breaks.get();
    vec![
        outcome(
            "6b",
            "PRB conservation, no grant without backlog",
            pass,
            format!("24 fuzzed 10,000-TTI runs, {} TTIs checked{err}", ttis.get()),
        ),
        outcome(
            "6e",
            "packet accounting identity",
            breaks == 0 && flows_checked.get() > 0,
            format!(
                "arrivals = departures + residual + drops: {breaks} breaks over {} flows of the fuzzed runs",
                flows_checked.get()
            ),
        ),
    ]
}

fn ema_property() -> Outcome {
    let strat = (1u32..=500, 1u64..=200_000, 1e-4f64..1e-2);
    let r = runner(500).run(&strat, |(tc, bits, dur)| {
        let p = QosPfParams::<f64> {
            ema_window_ttis: tc,
            ..QosPfParams::default()
        };
        let target = bits as f64 / dur;
        let mut avg = p.throughput_floor;
        for _ in 0..5 * tc {
            avg = update_ema(avg, bits, dur, &p);
        }
        prop_assert!(
            (avg - target).abs() <= 0.01 * target,
            "tc={tc} avg={avg} target={target}"
        );
        Ok(())
    });
    // The same on a live flow: one control flow alone in the cell.
    let mut s = presets::reference_scenario().with_num_ues(1);
    s.flows_per_ue.truncate(1);
    s.start_offsets = StartOffsetPolicy::Zero;
    let p = QosPfParams::default();
    s.sim_duration = 5.0 * p.ema_window_ttis as f64 * 1e-3;
    let mut sim = Simulation::new(&s, &p, SchedulerKind::QosPf, 1).unwrap();
    sim.run_to_end().unwrap();
    let live = sim.flows()[0].avg_throughput;
    let live_ok = (live - 512_000.0).abs() <= 0.01 * 512_000.0;
    let (pass, err) = report(r);
    outcome(
        "6c",
        "EMA convergence after 5 Tc",
        pass && live_ok,
        format!("500 random (Tc, rate) pairs within 1%; live control flow {live:.0} vs 512000 bit/s{err}"),
    )
}

fn pf_flow(id: u32, profile: QfiProfile<Q>, arrivals: &[u64], avg: Q) -> FlowState<Q> {
    let mut f = FlowState::new(id, id, 0, profile, 500, avg);
    f.enqueue(arrivals.iter().map(|&t| Packet::new(id, 100, t)));
    f
}

fn ordering_property() -> Outcome {
    let flow_strat = (
        0usize..3,
        prop::collection::vec(0u64..60, 0..4),
        1i128..5_000_000,
        (0i128..=10, 0i128..=10, 0i128..=10),
    );
    let strat = (
        prop::collection::vec(flow_strat, 2..10),
        1i128..1000,
        1i128..1000,
    );
    let r = runner(500).run(&strat, |(specs, cn, cd)| {
        let c = Q::new(cn, cd);
        let profiles = [
            presets::control_profile_as::<Q>(),
            presets::sensor_profile_as::<Q>(),
            presets::video_profile_as::<Q>(5, 25),
        ];
        let mut base = Vec::new();
        let mut scaled = Vec::new();
        for (i, (class, mut arr, avg, (a, b, g))) in specs.into_iter().enumerate() {
            arr.sort_unstable();
            let w = |x: i128| Q::new(x, 10);
            let prof = profiles[class].clone().with_weights(w(a), w(b), w(g));
            let mut prof_c = prof.clone();
            prof_c.alpha *= c;
            prof_c.beta *= c;
            prof_c.gamma *= c;
            base.push(pf_flow(i as u32, prof, &arr, Q::from_integer(avg)));
            scaled.push(pf_flow(i as u32, prof_c, &arr, Q::from_integer(avg)));
        }
        let grid = ResourceGrid::new(25, vec![800; base.len()]);
        let clock = TtiClock::at(60, 1_000_000);
        let pf = QosPf::new(QosPfParams::<Q>::default());
        let ra = pf.rank(&SchedulerInput {
            clock,
            flows: &base,
            grid: &grid,
        });
        let rb = pf.rank(&SchedulerInput {
            clock,
            flows: &scaled,
            grid: &grid,
        });
        let ia: Vec<usize> = ra.iter().map(|x| x.0).collect();
        let ib: Vec<usize> = rb.iter().map(|x| x.0).collect();
        prop_assert_eq!(ia, ib);
        for (x, y) in ra.iter().zip(&rb) {
            prop_assert_eq!(x.1 * c, y.1);
        }
        Ok(())
    });
    let (pass, err) = report(r);
    outcome(
        "6d",
        "QoS-PF ordering invariant under utility scaling",
        pass,
        format!("500 random flow sets, exact rationals{err}"),
    )
}

fn determinism_property() -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let run = |dir: &Path| {
        let plan = reference_plan().with_output(dir);
        harness::run_batch(&plan).expect("batch");
    };
    run(a.path());
    run(b.path());
    let mut compared = 0;
    let mut mismatch = Vec::new();
    for kind in SchedulerKind::ALL {
        for seed in reference_plan().seeds() {
            let rel = Path::new(kind.name())
                .join(seed.to_string())
                .join("flows.csv");
            let x = fs::read(a.path().join(&rel)).unwrap();
            let y = fs::read(b.path().join(&rel)).unwrap();
            compared += 1;
            if x != y {
                mismatch.push(rel.display().to_string());
            }
        }
    }
    let agg_same = fs::read(a.path().join("aggregate.csv")).unwrap()
        == fs::read(b.path().join("aggregate.csv")).unwrap();
    outcome(
        "6f",
        "determinism",
        mismatch.is_empty() && agg_same,
        format!(
            "{compared} flows.csv files byte-identical across two executions: {}; aggregate.csv identical: {agg_same}",
            mismatch.is_empty()
        ),
    )
}

// ---------------------------------------------------------------- 7

/// Desk-scale scenario: one UE with a control flow and a GBR flow sharing
/// three 100-byte PRBs. Offered load is slightly above capacity.
fn oracle_scenario() -> (Scenario<Q>, QosPfParams<Q>) {
    let ms = |n: i128| Q::new(n, 1000);
    let w = (Q::new(2, 5), Q::new(3, 10), Q::new(3, 10));
    let control = QfiProfile {
        role: "control".into(),
        qfi: 1,
        five_qi: 85,
        packet_size: 64,
        arrival: ArrivalSpec::Periodic { period: ms(1) },
        delay_bound: Some(ms(5)),
        gbr: None,
        priority_level: 1,
        priority_weight: None,
        alpha: w.0,
        beta: w.1,
        gamma: w.2,
        rate_cap: None,
    };
    let gbr = QfiProfile {
        role: "gbr".into(),
        qfi: 2,
        five_qi: 3,
        packet_size: 500,
        arrival: ArrivalSpec::Periodic { period: ms(2) },
        delay_bound: Some(ms(10)),
        gbr: Some(Q::from_integer(1_500_000)),
        priority_level: 2,
        priority_weight: None,
        alpha: w.0,
        beta: w.1,
        gamma: w.2,
        rate_cap: None,
    };
    let s = Scenario {
        num_ues: 1,
        flows_per_ue: vec![control, gbr],
        sim_duration: ms(20),
        tti_duration: ms(1),
        cell_capacity: Q::from_integer(2_400_000),
        num_prbs: 3,
        seed: 7,
        start_offsets: StartOffsetPolicy::Zero,
        buffer_capacity: 500,
        channel: ChannelVariation::None,
        gbr_window: ms(10),
    };
    let p = QosPfParams {
        ema_window_ttis: 4,
        ..QosPfParams::default()
    };
    (s, p)
}

/// Independent step evaluator: its own queues, metric and allocation loop.
struct Brute {
    // (arrival tti, remaining bytes)
    queues: Vec<Vec<(u64, u64)>>,
    avg: Vec<Q>,
}

#[derive(Debug, PartialEq, Eq)]
struct Step {
    grants: Vec<(u32, u32, u64)>,
}

impl Brute {
    fn new() -> Self {
        Self {
            queues: vec![Vec::new(), Vec::new()],
            avg: vec![Q::one(), Q::one()],
        }
    }

    fn step(&mut self, t: u64) -> Step {
        // control: 64 B every TTI; gbr flow: 500 B on even TTIs.
        self.queues[0].push((t, 64));
        if t.is_multiple_of(2) {
            self.queues[1].push((t, 500));
        }
        let bound = [Q::new(5, 1000), Q::new(10, 1000)];
        let gbr = [None, Some(Q::from_integer(1_500_000))];
        let level = [1i128, 2];
        let (alpha, beta, gamma) = (Q::new(2, 5), Q::new(3, 10), Q::new(3, 10));
        let cap = Q::from_integer(10);
        let eps = Q::new(1, 10_000);

        let mut cand: Vec<(Q, i128, u32)> = Vec::new();
        for f in 0..2 {
            let Some(&(arr, _)) = self.queues[f].first() else {
                continue;
            };
            let waited = Q::new((t - arr) as i128, 1000);
            let rem = if bound[f] - waited > eps {
                bound[f] - waited
            } else {
                eps
            };
            let ratio = bound[f] / rem;
            let d = if ratio < cap { ratio } else { cap } / cap;
            let g = match gbr[f] {
                Some(r) => {
                    let x = Q::one() - self.avg[f] / r;
                    if x > Q::zero() {
                        x
                    } else {
                        Q::zero()
                    }
                }
                None => Q::zero(),
            };
            let pr = Q::new(1, level[f]);
            let u = alpha * d + beta * g + gamma * pr;
            let denom = if self.avg[f] > Q::one() {
                self.avg[f]
            } else {
                Q::one()
            };
            cand.push((u / denom, level[f], f as u32));
        }
        // Repeated selection of the best remaining candidate.
        let mut order = Vec::new();
        while !cand.is_empty() {
            let mut best = 0;
            for i in 1..cand.len() {
                let (m, l, id) = cand[i];
                let (bm, bl, bid) = cand[best];
                if m > bm || (m == bm && (l < bl || (l == bl && id < bid))) {
                    best = i;
                }
            }
            order.push(cand.remove(best).2);
        }

        let bits_per_prb = 800u64;
        let mut left = 3u64;
        let mut served = [0u64; 2];
        let mut grants = Vec::new();
        for f in order {
            if left == 0 {
                break;
            }
            let queued: u64 = self.queues[f as usize].iter().map(|p| p.1).sum();
            let need = (queued * 8).div_ceil(bits_per_prb);
            let prbs = need.min(left);
            let bytes = queued.min(prbs * bits_per_prb / 8);
            left -= prbs;
            served[f as usize] = bytes;
            grants.push((f, prbs as u32, bytes));
            let mut budget = bytes;
            let q = &mut self.queues[f as usize];
            while budget > 0 {
                let take = budget.min(q[0].1);
                q[0].1 -= take;
                budget -= take;
                if q[0].1 == 0 {
                    q.remove(0);
                }
            }
        }
        for (avg, bytes) in self.avg.iter_mut().zip(served) {
            let inst = Q::from_integer(bytes as i128 * 8 * 1000);
            let next = Q::new(3, 4) * *avg + Q::new(1, 4) * inst;
            *avg = if next > Q::one() { next } else { Q::one() };
        }
        Step { grants }
    }
}

fn oracle_criterion() -> Outcome {
    let (s, p) = oracle_scenario();
    assert!(model::validate_scenario(&s).is_empty());
    let mut sim = Simulation::new(&s, &p, SchedulerKind::QosPf, 7).unwrap();
    let mut brute = Brute::new();
    let mut first_diff = None;
    let mut contended = 0;
    let mut ttis = 0;
    while let Some(step) = sim.step().unwrap() {
        let got = Step {
            grants: step
                .allocation
                .grants
                .iter()
                .map(|g| (g.flow_id, g.prbs, g.bytes))
                .collect(),
        };
        let tti = step.tti;
        let want = brute.step(tti);
        let avg_match = sim
            .flows()
            .iter()
            .map(|f| f.avg_throughput)
            .eq(brute.avg.iter().copied());
        if (got != want || !avg_match) && first_diff.is_none() {
            first_diff = Some(format!("tti {tti}: sim {got:?} oracle {want:?}"));
        }
        if brute.queues.iter().any(|q| !q.is_empty()) {
            contended += 1;
        }
        ttis += 1;
    }
    outcome(
        "7",
        "oracle equivalence",
        first_diff.is_none() && ttis == 20 && contended > 0,
        match first_diff {
            None => format!("{ttis} TTIs, grants and EMA state match exactly; backlog carried over in {contended} TTIs"),
            Some(d) => format!("first mismatch {d}"),
        },
    )
}

fn main() {
    let mut results = Vec::new();
    results.extend(reference_criteria());
    results.extend(sensitivity_criterion());
    results.extend(scalability_criterion());
    results.push(jain_property());
    results.extend(grid_and_accounting_properties());
    results.push(ema_property());
    results.push(ordering_property());
    results.push(determinism_property());
    results.push(oracle_criterion());
    results.sort_by(|a, b| a.id.cmp(b.id));

    println!();
    for r in &results {
        println!(
            "{} [{}] {}: {}",
            if r.pass { "PASS" } else { "FAIL" },
            r.id,
            r.title,
            r.detail
        );
    }
    let failed = results.iter().filter(|r| !r.pass).count();
    println!(
        "\nacceptance: {} passed, {failed} failed",
        results.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
