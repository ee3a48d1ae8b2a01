//! Reference-behaviour suite. Runs each criterion in turn, prints one
//! PASS/FAIL/SKIP line per criterion and exits nonzero if any failed.
//!
//! `MNIST_DIR` points at the IDX files (default `/root/data/mnist`); the
//! MNIST criterion is skipped when they are absent.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use crossbar_core::experiments::NoptConfig;
use crossbar_sim::checks::{self, Verdict};
use crossbar_sim::idx::mnist_available;
use crossbar_sim::runner::RayonRunner;

const SEED: u64 = 42;
const TRIALS: usize = 2000;
const RETRIEVAL_CONFIGS: usize = 10_000;
const ORACLE_SETS: usize = 50;

enum Outcome {
    Judged(Verdict),
    Skipped(u8, &'static str, String),
}

type Criterion<'a> = (Option<Duration>, Box<dyn FnOnce() -> Outcome + 'a>);

fn timed<'a>(budget: Option<Duration>, f: impl FnOnce() -> Outcome + 'a) -> Criterion<'a> {
    (budget, Box::new(f))
}

fn main() -> ExitCode {
    let runner = RayonRunner::new(0).expect("thread pool");
    let mnist_dir = std::env::var_os("MNIST_DIR").map_or_else(|| PathBuf::from("/root/data/mnist"), PathBuf::from);
    let secs = Duration::from_secs;
    let judged = |r: crossbar_sim::Result<Verdict>| Outcome::Judged(r.unwrap_or_else(|e| panic!("criterion errored: {e}")));

    let criteria: Vec<Criterion<'_>> = vec![
        timed(Some(secs(10)), || Outcome::Judged(checks::exact_retrieval(RETRIEVAL_CONFIGS, SEED))),
        timed(None, || judged(checks::run_xor(SEED).map(|(v, _)| v))),
        timed(None, || Outcome::Judged(checks::tile_arithmetic())),
        timed(Some(secs(15 * 60)), || {
            if mnist_available(&mnist_dir) {
                judged(checks::run_mnist(&mnist_dir, SEED).map(|(v, _)| v))
            } else {
                Outcome::Skipped(4, "MNIST bands", format!("no IDX files in {}", mnist_dir.display()))
            }
        }),
        timed(Some(secs(120)), || judged(checks::run_inverse_n(TRIALS, SEED, &runner).map(|(v, _)| v))),
        timed(None, || judged(checks::run_noise(TRIALS, SEED, &runner).map(|(v, _)| v))),
        timed(None, || judged(checks::run_scaling(TRIALS, SEED, &runner).map(|(v, _)| v))),
        timed(None, || judged(checks::run_nopt(&NoptConfig::default(), SEED, &runner).map(|(v, _)| v))),
        timed(None, || Outcome::Judged(checks::quantizer_oracle(ORACLE_SETS, SEED))),
        timed(None, || Outcome::Judged(checks::gradient_check(SEED))),
    ];

    let total = criteria.len();
    let mut failed = 0;
    for (budget, run) in criteria {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let over = budget.filter(|b| elapsed > *b);
        match outcome {
            Outcome::Judged(v) => {
                let passed = v.passed && over.is_none();
                failed += usize::from(!passed);
                let budget_note = over.map_or(String::new(), |b| format!("; over the {}s budget", b.as_secs()));
                println!(
                    "criterion {}: {} {} ({:.1}s): {}{budget_note}",
                    v.criterion,
                    if passed { "PASS" } else { "FAIL" },
                    v.name,
                    elapsed.as_secs_f64(),
                    v.detail
                );
            }
            Outcome::Skipped(c, name, why) => println!("criterion {c}: SKIP {name}: {why}"),
        }
    }
    println!("acceptance: {failed} of {total} criteria failed");
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
