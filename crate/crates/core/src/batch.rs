//! Many independent runs.
//!
//! Runs share nothing but their read-only configs, so with the `parallel`
//! feature they fan out over rayon. Results always come back in input order,
//! and each run is seeded from its own config, so the output does not depend
//! on scheduling.

use crate::error::Result;
use crate::gait_controller::Strategy;
use crate::simulator::{run_scenario, MetricsSummary, Outcome, SimConfig};

/// Runs every config to completion without keeping step logs.
pub fn run_batch(cfgs: &[SimConfig]) -> Vec<Result<MetricsSummary>> {
    #[cfg(feature = "parallel")]
    {
        run_batch_parallel(cfgs)
    }
    #[cfg(not(feature = "parallel"))]
    {
        run_batch_sequential(cfgs)
    }
}

pub fn run_batch_sequential(cfgs: &[SimConfig]) -> Vec<Result<MetricsSummary>> {
    cfgs.iter().map(run_one).collect()
}

#[cfg(feature = "parallel")]
pub fn run_batch_parallel(cfgs: &[SimConfig]) -> Vec<Result<MetricsSummary>> {
    use rayon::prelude::*;
    cfgs.par_iter().map(run_one).collect()
}

fn run_one(cfg: &SimConfig) -> Result<MetricsSummary> {
    let mut cfg = cfg.clone();
    cfg.record_log = false;
    run_scenario(&cfg).map(|(_, m)| m)
}

/// One row of a strategy comparison: counts over trials, means of the rates.
#[derive(Clone, Debug, PartialEq)]
pub struct CompareRow {
    pub strategy: Strategy,
    pub trials: usize,
    pub successes: usize,
    pub obstacles_cleared: f64,
    pub obstacle_count: usize,
    pub p_f: f64,
    pub p_o: f64,
    pub v_f: f64,
    pub v_o: f64,
    pub stuck: usize,
    pub falls: usize,
}

impl CompareRow {
    pub fn from_runs(strategy: Strategy, runs: &[MetricsSummary]) -> Self {
        let n = runs.len().max(1) as f64;
        let mean = |f: fn(&MetricsSummary) -> f64| runs.iter().map(f).sum::<f64>() / n;
        Self {
            strategy,
            trials: runs.len(),
            successes: runs.iter().filter(|m| m.success).count(),
            obstacles_cleared: mean(|m| m.obstacles_cleared as f64),
            obstacle_count: runs.first().map_or(0, |m| m.obstacle_count),
            p_f: mean(|m| m.p_f),
            p_o: mean(|m| m.p_o),
            v_f: mean(|m| m.v_f),
            v_o: mean(|m| m.v_o),
            stuck: runs.iter().filter(|m| m.outcome == Outcome::Stuck).count(),
            falls: runs.iter().filter(|m| m.outcome == Outcome::Fall).count(),
        }
    }

    pub const CSV_HEADER: &'static str =
        "strategy,trials,successes,obstacles_cleared,obstacle_count,p_f,p_o,v_f,v_o,stuck,falls";

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.strategy,
            self.trials,
            self.successes,
            self.obstacles_cleared,
            self.obstacle_count,
            self.p_f,
            self.p_o,
            self.v_f,
            self.v_o,
            self.stuck,
            self.falls
        )
    }
}

/// Aligned text table with the columns of the baseline comparison.
pub fn format_table(rows: &[CompareRow]) -> String {
    let mut out = format!(
        "{:<16} {:>8} {:>9} {:>8} {:>8} {:>8} {:>8}\n",
        "strategy", "success", "cleared", "P_f (W)", "P_o (W)", "v_f", "v_o"
    );
    for r in rows {
        out.push_str(&format!(
            "{:<16} {:>8} {:>9} {:>8.1} {:>8.1} {:>8.3} {:>8.3}\n",
            r.strategy.name(),
            format!("{}/{}", r.successes, r.trials),
            format!("{:.2}/{}", r.obstacles_cleared, r.obstacle_count),
            r.p_f,
            r.p_o,
            r.v_f,
            r.v_o
        ));
    }
    out
}
