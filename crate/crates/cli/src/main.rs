use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use swapsim_core::harness::{compare_baselines, emit_trace, enumerate_abort_points, run_scenario, Scenario, ScenarioTrace};
use swapsim_core::Amount;

/// Deterministic HTLC atomic-swap simulator.
#[derive(Parser)]
#[command(name = "swapsim", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one scenario with its configured adversary.
    Run(Common),
    /// Run every abort point, co-sign refusal, wrong digest and boundary delay.
    SweepAborts(Common),
    /// Run the baseline and the HTLC engine on the same offer, honest and denying.
    CompareBaselines(Common),
}

#[derive(Args)]
struct Common {
    scenario: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Trace file for `run`; directory for the other subcommands.
    #[arg(long)]
    trace_out: Option<PathBuf>,
    /// Overrides the per-transaction fee, base units.
    #[arg(long)]
    fee: Option<u64>,
}

impl Common {
    fn load(&self) -> Result<Scenario> {
        let mut sc = Scenario::load(&self.scenario).with_context(|| format!("loading {}", self.scenario.display()))?;
        if let Some(seed) = self.seed {
            sc.seed = seed;
        }
        if let Some(fee) = self.fee {
            sc.fee = Amount(fee);
        }
        Ok(sc)
    }

    fn out(&self, sc: &Scenario) -> Option<PathBuf> {
        self.trace_out.clone().or_else(|| sc.output.clone())
    }
}

fn summary(label: &str, t: &ScenarioTrace) -> String {
    let d = t.deltas();
    let deviator = t.deviator.map_or("-".to_string(), |p| format!("{p:?}").to_lowercase());
    format!(
        "{:<17} {:<28} {:<15} alice=({:+}, {:+}) bob=({:+}, {:+}) deviator={}",
        t.engine.name(),
        label,
        t.verdict.name(),
        d.alice_a,
        d.alice_b,
        d.bob_a,
        d.bob_b,
        deviator
    )
}

fn write_in(dir: &Path, name: &str, t: &ScenarioTrace) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(format!("{name}.jsonl"));
    emit_trace(t, &path).with_context(|| format!("writing {}", path.display()))
}

fn run(c: &Common) -> Result<bool> {
    let sc = c.load()?;
    let t = run_scenario(&sc)?;
    println!("{}", summary(&sc.adversary.label(), &t));
    if let Some(path) = c.out(&sc) {
        emit_trace(&t, &path).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(t.verdict.is_safe())
}

fn sweep(c: &Common) -> Result<bool> {
    let sc = c.load()?;
    let results = enumerate_abort_points(&sc)?;
    let out = c.out(&sc);
    let mut unsafe_count = 0;
    for (st, t) in &results {
        println!("{}", summary(&st.label(), t));
        if !t.verdict.is_safe() {
            unsafe_count += 1;
        }
        if let Some(dir) = &out {
            write_in(dir, &st.label(), t)?;
        }
    }
    println!("{} strategies, {} unsafe", results.len(), unsafe_count);
    Ok(unsafe_count == 0)
}

/// Succeeds when the HTLC engine is safe in every row; the baseline is
/// expected to fail under denial.
fn compare(c: &Common) -> Result<bool> {
    let sc = c.load()?;
    let rows = compare_baselines(&sc)?;
    let out = c.out(&sc);
    let mut htlc_safe = true;
    for t in &rows {
        println!("{}", summary(&t.strategy.label(), t));
        if t.engine == swapsim_core::harness::Engine::HtlcOnchain {
            htlc_safe &= t.verdict.is_safe();
        }
        if let Some(dir) = &out {
            write_in(dir, &format!("{}_{}", t.engine.name(), t.strategy.label()), t)?;
        }
    }
    Ok(htlc_safe)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.cmd {
        Cmd::Run(c) => run(c),
        Cmd::SweepAborts(c) => sweep(c),
        Cmd::CompareBaselines(c) => compare(c),
    };
    match res {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
