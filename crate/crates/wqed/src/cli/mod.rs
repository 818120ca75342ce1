//! Command-line front end: protocol analyses, parameter sweeps, merge
//! planning/simulation, detection curves, and figure-data emission.
//!
//! Configuration comes from an optional JSON file (`--config`) whose
//! per-command sections mirror the flags; explicit flags win. Stochastic
//! commands require a seed and reproduce byte-identical output up to the
//! timestamp header line.

pub mod output;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::merging::{self, MergeStrategy};
use crate::protocols::{self, PhysicalParams};
use crate::zeno;
use crate::{Error, Result};
use output::{Cell, Provenance, Table};

#[derive(Clone, Copy, Debug, Default, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
    Both,
}

#[derive(Parser, Debug)]
#[command(
    name = "wqed",
    about = "Heralded collective excitations in waveguide QED: protocol numbers, sweeps, merge schedulers, figure data"
)]
pub struct Cli {
    /// JSON config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file (default: <command>.csv under WQED_OUTPUT_DIR or cwd).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<OutputFormat>,
    /// RNG seed; mandatory for stochastic commands.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Weak-drive photon-heralded loading.
    Protocol1(Protocol1Args),
    /// Source-atom + detector-ensemble heralding (error-free post-selection).
    Protocol2(Protocol2Args),
    /// Stored-level heralding with a single detector atom.
    Protocol3(Protocol3Args),
    /// Single-step two-mode heralding.
    Protocol4(Protocol4Args),
    /// One Zeno transfer step: populations and jump budget.
    ZenoStep(ZenoStepArgs),
    /// Piecewise-constant drive optimization of the transfer step.
    PulseShape(PulseShapeArgs),
    /// Analytic merge-cost recursions per level.
    MergePlan(MergePlanArgs),
    /// Monte Carlo merge scheduler.
    MergeSim(MergeSimArgs),
    /// Photon-counting discrimination of stored excitation numbers.
    Detect(DetectArgs),
    /// Reachable excitation number against Purcell factor for fixed budgets.
    Fig3(Fig3Args),
    /// Heralding probability and infidelity curves, analytic vs numeric.
    Fig4(Fig4Args),
    /// Supplementary figure datasets.
    SmFigs(SmFigsArgs),
    /// Full-space (2–3 atom) oracle vs symmetric-subspace reduction.
    OracleCheck(OracleArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Protocol1(_) => "protocol1",
            Command::Protocol2(_) => "protocol2",
            Command::Protocol3(_) => "protocol3",
            Command::Protocol4(_) => "protocol4",
            Command::ZenoStep(_) => "zeno-step",
            Command::PulseShape(_) => "pulse-shape",
            Command::MergePlan(_) => "merge-plan",
            Command::MergeSim(_) => "merge-sim",
            Command::Detect(_) => "detect",
            Command::Fig3(_) => "fig3",
            Command::Fig4(_) => "fig4",
            Command::SmFigs(_) => "sm-figs",
            Command::OracleCheck(_) => "oracle-check",
        }
    }
}

macro_rules! merge_opt {
    ($a:expr, $b:expr; $($f:ident),+ $(,)?) => {
        $( if $a.$f.is_none() { $a.$f = $b.$f.clone(); } )+
    };
}

#[derive(Args, Debug, Default, Clone, Deserialize)]
#[serde(default)]
pub struct CommonParams {
    /// Target ensemble size N.
    #[arg(long)]
    pub n: Option<u32>,
    /// Detector ensemble size N_d.
    #[arg(long)]
    pub nd: Option<u32>,
    /// Purcell factor Γ_1d/Γ*.
    #[arg(long)]
    pub p1d: Option<f64>,
    /// Photon detector efficiency.
    #[arg(long)]
    pub eta: Option<f64>,
    /// Closed-transition leakage fraction (default 1/√P_1d).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Weak-drive amplitude x.
    #[arg(long)]
    pub x: Option<f64>,
    /// Excitations already stored.
    #[arg(long)]
    pub m: Option<u32>,
    /// Accumulation target.
    #[arg(long)]
    pub m_target: Option<u32>,
    /// Sweep one parameter: NAME=LO:HI:POINTS[:log|lin], e.g. p1d=10:1000:9:log.
    #[arg(long)]
    pub sweep: Option<String>,
}

impl CommonParams {
    fn merged(mut self, cfg: Self) -> Self {
        merge_opt!(self, cfg; n, nd, p1d, eta, alpha, x, m, m_target, sweep);
        self
    }

    fn params(&self) -> PhysicalParams {
        let n = self.n.unwrap_or(100);
        let p1d = self.p1d.unwrap_or(100.0);
        let mut p = PhysicalParams::new(n, p1d)
            .with_detectors(self.nd.unwrap_or(n))
            .with_stored(self.m.unwrap_or(0));
        if let Some(eta) = self.eta {
            p = p.with_eta(eta);
        }
        if let Some(alpha) = self.alpha {
            p = p.with_alpha(alpha);
        }
        if let Some(x) = self.x {
            p = p.with_x(x);
        }
        p
    }
}

#[derive(Args, Debug, Default, Clone, Deserialize)]
#[serde(default)]
pub struct Protocol1Args {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonParams,
    /// Accumulate directly in the destination level instead of merging.
    #[arg(long)]
    pub same_level: Option<bool>,
}

#[derive(Args, Debug, Default, Clone, Deserialize)]
#[serde(default)]
pub struct Protocol2Args {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonParams,
}

#[derive(Args, Debug, Default, Clone, Deserialize)]
#[serde(default)]
pub struct Protocol3Args {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonParams,
    /// Fast π-pulse retries per attempt.
    #[arg(long)]
    pub repeat_b: Option<u32>,
    /// Skip the master-equation columns.
    #[arg(long)]
    pub skip_numeric: Option<bool>,
}

#[derive(Args, Debug, Default, Clone, Deserialize)]
#[serde(default)]
pub struct Protocol4Args {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonParams,
    /// Decay-rate ratio Γ_1d^s/Γ_1d^g (default (N_m+1)/2).
    #[arg(long)]
    pub ratio: Option<f64>,
}

#[derive(Args, Debug, Default, Clone, Deserialize)]
#[serde(default)]
pub struct ZenoStepArgs {
    #[arg(long)]
    pub k: Option<u32>,
    #[arg(long)]
    pub nb: Option<u32>,
    #[arg(long)]
    pub p1d: Option<f64>,
    /// Drive override (default loss-balanced optimum).
    #[arg(long)]
    pub omega: Option<f64>,
    /// Pulse time override.
    #[arg(long)]
    pub time: Option<f64>,
    /// Time-grid points.
    #[arg(long)]
    pub points: Option<usize>,
}

#[derive(Args, Debug, Default, Clone, Deserialize)]
#[serde(default)]
pub struct PulseShapeArgs {
    #[arg(long)]
    pub nb: Option<u32>,
    #[arg(long)]
    pub k: Option<u32>,
    #[arg(long)]
    pub p1d: Option<f64>,
    #[arg(long)]
    pub segments: Option<usize>,
}

#[derive(Args, Debug, Default, Clone, Deserialize)]
#[serde(default)]
pub struct MergePlanArgs {
    #[arg(long, value_enum)]
    pub strategy: Option<MergeStrategy>,
    #[arg(long)]
    pub m: Option<u64>,
    /// Base heralding probability.
    #[arg(long)]
    pub p: Option<f64>,
}

#[derive(Args, Debug, Default, Clone, Deserialize)]
#[serde(default)]
pub struct MergeSimArgs {
    #[arg(long, value_enum)]
    pub strategy: Option<MergeStrategy>,
    #[arg(long)]
    pub m: Option<u64>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub trials: Option<u64>,
}

#[derive(Args, Debug, Default, Clone, Deserialize)]
#[serde(default)]
pub struct DetectArgs {
    /// Lower excitation number of the pair (m vs m+1).
    #[arg(long)]
    pub m: Option<u32>,
    /// Comma-separated Γ_1d·T values.
    #[arg(long)]
    pub gamma_t: Option<String>,
    /// Also write the counting distributions next to the output file.
    #[arg(long)]
    pub pmf: Option<bool>,
}

#[derive(Args, Debug, Default, Clone, Deserialize)]
#[serde(default)]
pub struct Fig3Args {
    /// Comma-separated repetition budgets, e.g. 1e2,1e4,1e6.
    #[arg(long)]
    pub r: Option<String>,
    /// P_1d grid LO:HI:POINTS[:log|lin].
    #[arg(long)]
    pub p1d_grid: Option<String>,
}

#[derive(Args, Debug, Default, Clone, Deserialize)]
#[serde(default)]
pub struct Fig4Args {
    #[arg(long)]
    pub n: Option<u32>,
    #[arg(long)]
    pub m: Option<u32>,
    #[arg(long)]
    pub repeat_b: Option<u32>,
    /// P_1d grid LO:HI:POINTS[:log|lin].
    #[arg(long)]
    pub p1d_grid: Option<String>,
}

#[derive(Args, Debug, Default, Clone, Deserialize)]
#[serde(default)]
pub struct SmFigsArgs {
    /// Which dataset: all, sm2, sm3, sm5, sm7, sm8, pulse, sm11, sm12.
    #[arg(long)]
    pub which: Option<String>,
}

#[derive(Args, Debug, Default, Clone, Deserialize)]
#[serde(default)]
pub struct OracleArgs {
    #[arg(long)]
    pub p1d: Option<f64>,
}

pub struct RunSummary {
    pub rows: usize,
    pub failed: usize,
    pub outputs: Vec<PathBuf>,
}

fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() < 3 {
        return Err(Error::Config(format!(
            "grid '{spec}' must be LO:HI:POINTS[:log|lin]"
        )));
    }
    let lo: f64 = parts[0]
        .parse()
        .map_err(|_| Error::Config(format!("bad grid start '{}'", parts[0])))?;
    let hi: f64 = parts[1]
        .parse()
        .map_err(|_| Error::Config(format!("bad grid end '{}'", parts[1])))?;
    let n: usize = parts[2]
        .parse()
        .map_err(|_| Error::Config(format!("bad grid size '{}'", parts[2])))?;
    let log = match parts.get(3) {
        None | Some(&"log") => true,
        Some(&"lin") => false,
        Some(other) => return Err(Error::Config(format!("bad grid scale '{other}'"))),
    };
    if n < 1 || hi <= lo || (log && lo <= 0.0) {
        return Err(Error::Config(format!("degenerate grid '{spec}'")));
    }
    Ok((0..n)
        .map(|i| {
            let f = if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
            if log {
                (lo.ln() + f * (hi / lo).ln()).exp()
            } else {
                lo + f * (hi - lo)
            }
        })
        .collect())
}

fn parse_list(spec: &str) -> Result<Vec<f64>> {
    spec.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad list entry '{s}'")))
        })
        .collect()
}

/// Sweep points: (parameter name, values); a single unnamed point when no
/// sweep was requested.
fn sweep_points(common: &CommonParams) -> Result<(String, Vec<f64>)> {
    match &common.sweep {
        None => Ok(("".into(), vec![0.0])),
        Some(spec) => {
            let (name, grid) = spec
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("sweep '{spec}' must be NAME=GRID")))?;
            let known = ["p1d", "n", "nd", "m", "eta", "x", "alpha"];
            if !known.contains(&name) {
                return Err(Error::Config(format!(
                    "unknown sweep parameter '{name}' (one of {known:?})"
                )));
            }
            let values = parse_grid(grid)?;
            if values.is_empty() {
                return Err(Error::Config("empty sweep grid".into()));
            }
            Ok((name.to_string(), values))
        }
    }
}

fn apply_sweep(p: &PhysicalParams, name: &str, v: f64) -> PhysicalParams {
    let mut p = *p;
    match name {
        "p1d" => {
            p.purcell = v;
            p.alpha = 1.0 / v.sqrt();
        }
        "n" => p.n = v.round() as u32,
        "nd" => p.n_d = v.round() as u32,
        "m" => p.stored = v.round() as u32,
        "eta" => p.eta = v,
        "x" => p.x = v,
        "alpha" => p.alpha = v,
        _ => {}
    }
    p
}

fn config_section<T: for<'de> Deserialize<'de> + Default>(
    config: &Option<serde_json::Value>,
    name: &str,
) -> Result<T> {
    match config {
        None => Ok(T::default()),
        Some(v) => match v.get(name) {
            None => Ok(T::default()),
            Some(section) => serde_json::from_value(section.clone())
                .map_err(|e| Error::Config(format!("config section '{name}': {e}"))),
        },
    }
}

struct RowBuilder {
    table: Table,
    failed: usize,
}

impl RowBuilder {
    fn new(columns: &[&str]) -> Self {
        let mut cols: Vec<&str> = columns.to_vec();
        cols.push("status");
        RowBuilder {
            table: Table::new(&cols),
            failed: 0,
        }
    }

    fn push(&mut self, row: Result<Vec<Cell>>) {
        match row {
            Ok(mut cells) => {
                cells.push("ok".into());
                self.table.push(cells);
            }
            Err(e) => {
                let n = self.table.columns.len() - 1;
                let mut cells: Vec<Cell> = (0..n).map(|_| Cell::Num(f64::NAN)).collect();
                cells.push(format!("failed: {e}").into());
                self.failed += 1;
                self.table.push(cells);
            }
        }
    }
}

fn protocol1_table(args: &Protocol1Args) -> Result<(Table, usize)> {
    let (axis, values) = sweep_points(&args.common)?;
    let base = args.common.params();
    let m_target = args.common.m_target.unwrap_or(1);
    let same_level = args.same_level.unwrap_or(false);
    let mut rb = RowBuilder::new(&[
        "p1d", "n", "m", "eta", "x", "p", "p_coll_undetected", "p_free_target", "p_repump",
        "eps_double", "eps_fail", "i_step", "m_target", "r_m", "i_m",
    ]);
    for &v in &values {
        let p = if axis.is_empty() {
            base
        } else {
            apply_sweep(&base, &axis, v)
        };
        rb.push((|| {
            let s = protocols::weak_drive::step(&p)?;
            let acc = protocols::weak_drive::accumulate(&p, m_target, same_level)?;
            Ok(vec![
                p.purcell.into(),
                p.n.into(),
                p.stored.into(),
                p.eta.into(),
                p.x.into(),
                s.p.into(),
                s.p_coll_undetected.into(),
                s.p_free_target.into(),
                s.p_repump.into(),
                s.eps_double.into(),
                s.eps_fail.into(),
                s.i_step.into(),
                m_target.into(),
                acc.r_m.into(),
                acc.i_m.into(),
            ])
        })());
    }
    let mut t = rb.table;
    t.meta("same_level", same_level);
    Ok((t, rb.failed))
}

fn protocol2_table(args: &Protocol2Args) -> Result<(Table, usize)> {
    let (axis, values) = sweep_points(&args.common)?;
    let base = args.common.params();
    let m_target = args.common.m_target.unwrap_or(1);
    let mut rb = RowBuilder::new(&["p1d", "n", "nd", "m", "p_a", "p_b", "p", "i_step", "m_target", "r_m"]);
    for &v in &values {
        let p = if axis.is_empty() {
            base
        } else {
            apply_sweep(&base, &axis, v)
        };
        rb.push((|| {
            let s = protocols::two_step::step(&p)?;
            let acc = protocols::two_step::accumulate(&p, m_target)?;
            Ok(vec![
                p.purcell.into(),
                p.n.into(),
                p.n_d.into(),
                p.stored.into(),
                s.p_a.into(),
                s.p_b.into(),
                s.p.into(),
                s.i_step.into(),
                m_target.into(),
                acc.r_m.into(),
            ])
        })());
    }
    Ok((rb.table, rb.failed))
}

fn protocol3_table(args: &Protocol3Args) -> Result<(Table, usize)> {
    let (axis, values) = sweep_points(&args.common)?;
    let base = args.common.params();
    let repeat_b = args.repeat_b.unwrap_or(1);
    let with_numeric = !args.skip_numeric.unwrap_or(false);
    let mut rb = RowBuilder::new(&[
        "p1d", "n", "m", "repeat_b", "p_a", "p_b", "p", "i_step", "p_num", "i_num",
    ]);
    for &v in &values {
        let p = if axis.is_empty() {
            base
        } else {
            apply_sweep(&base, &axis, v)
        };
        rb.push((|| {
            let s = protocols::fast_pi::step(&p, repeat_b)?;
            let (pn, inum) = if with_numeric {
                let n = protocols::fast_pi::numeric(&p, repeat_b)?;
                (n.p, n.i_step)
            } else {
                (f64::NAN, f64::NAN)
            };
            Ok(vec![
                p.purcell.into(),
                p.n.into(),
                p.stored.into(),
                repeat_b.into(),
                s.p_a.into(),
                s.p_b.into(),
                s.p.into(),
                s.i_step.into(),
                pn.into(),
                inum.into(),
            ])
        })());
    }
    Ok((rb.table, rb.failed))
}

fn protocol4_table(args: &Protocol4Args) -> Result<(Table, usize)> {
    let (axis, values) = sweep_points(&args.common)?;
    let base = args.common.params();
    let mut rb = RowBuilder::new(&[
        "p1d", "n", "m", "ratio", "p", "p_numeric", "p_free_target", "i_step",
    ]);
    for &v in &values {
        let p = if axis.is_empty() {
            base
        } else {
            apply_sweep(&base, &axis, v)
        };
        rb.push((|| {
            let n_m = p.n - p.stored;
            let ratio = args
                .ratio
                .unwrap_or_else(|| protocols::single_step::optimal_ratio(n_m));
            let s = protocols::single_step::step(&p)?;
            let omega = protocols::single_step::optimal_omega(n_m, p.purcell, 1.0);
            let t = protocols::single_step::optimal_time(p.purcell, 1.0);
            let pn = protocols::single_step::propagate(n_m, p.purcell, ratio, omega, t)?[3]
                .norm_sqr();
            Ok(vec![
                p.purcell.into(),
                p.n.into(),
                p.stored.into(),
                ratio.into(),
                s.p.into(),
                pn.into(),
                s.p_free_target.into(),
                s.i_step.into(),
            ])
        })());
    }
    Ok((rb.table, rb.failed))
}

fn zeno_step_table(args: &ZenoStepArgs) -> Result<(Table, usize)> {
    let k = args.k.unwrap_or(0);
    let nb = args.nb.unwrap_or(100);
    let p1d = args.p1d.unwrap_or(100.0);
    let mut zp = zeno::ZenoParams::optimal(k, nb, p1d, 1.0);
    if let Some(w) = args.omega {
        zp.omega = w;
    }
    if let Some(t) = args.time {
        zp.pulse_time = t;
    }
    let points = args.points.unwrap_or(101);
    let times: Vec<f64> = (0..points)
        .map(|i| zp.pulse_time * i as f64 / (points - 1).max(1) as f64)
        .collect();
    let pops = zeno::analytic_populations(&zp, &times);
    let mut table = Table::new(&[
        "t",
        "dark_analytic",
        "goal_analytic",
        "superradiant_analytic",
        "pop1_numeric",
        "pop2_numeric",
        "goal_numeric",
    ]);
    for (i, &t) in times.iter().enumerate() {
        let psi = zeno::propagate(&zp, t)?;
        table.push(vec![
            t.into(),
            pops.dark[i].into(),
            pops.goal[i].into(),
            pops.superradiant[i].into(),
            psi[0].norm_sqr().into(),
            psi[1].norm_sqr().into(),
            psi[2].norm_sqr().into(),
        ]);
    }
    let report = zeno::jump_probabilities(&zp)?;
    table.meta("k", k);
    table.meta("n_b", nb);
    table.meta("p1d", p1d);
    table.meta("omega", zp.omega);
    table.meta("pulse_time", zp.pulse_time);
    table.meta("p_success", report.success);
    table.meta("p_a1_star", report.a1);
    table.meta("p_a2_star", report.a2);
    table.meta("p_b1_star", report.b1);
    table.meta("p_b2_star", report.b2);
    table.meta("p_waveguide", report.waveguide());
    table.meta("closed_form_p", zeno::success_probability(k, nb, p1d));
    Ok((table, 0))
}

fn pulse_shape_table(args: &PulseShapeArgs) -> Result<(Table, usize)> {
    let nb = args.nb.unwrap_or(100);
    let k = args.k.unwrap_or(0);
    let p1d = args.p1d.unwrap_or(50.0);
    let segments = args.segments.unwrap_or(10);
    let zp = zeno::ZenoParams::optimal(k, nb, p1d, 1.0);
    let opt = zeno::optimize_pulse_shape(&zp, segments, zp.pulse_time)?;
    let mut table = Table::new(&["segment", "omega", "duration", "omega_over_constant"]);
    let (omega_c, _) = (zp.omega, ());
    for (i, &(w, d)) in opt.shape.segments.iter().enumerate() {
        table.push(vec![
            (i as i64).into(),
            w.into(),
            d.into(),
            (w / omega_c).into(),
        ]);
    }
    table.meta("n_b", nb);
    table.meta("k", k);
    table.meta("p1d", p1d);
    table.meta("p_pulse", opt.p_pulse);
    table.meta("p_constant", opt.p_constant);
    table.meta("ratio", opt.ratio);
    table.meta("converged", opt.converged);
    Ok((table, 0))
}

fn merge_plan_table(args: &MergePlanArgs) -> Result<(Table, usize)> {
    let strategy = args.strategy.unwrap_or(MergeStrategy::Doubling);
    let m = args.m.unwrap_or(16);
    let p = args.p.unwrap_or(0.5);
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Config(format!("p = {p} outside (0, 1]")));
    }
    let mut table = Table::new(&["level", "size", "step_success", "r_m"]);
    match strategy {
        MergeStrategy::OneByOne => {
            for size in 1..=m {
                let q = if size == 1 {
                    p
                } else {
                    merging::one_by_one_q_closed(size - 1)
                };
                table.push(vec![
                    ((size - 1) as i64).into(),
                    size.into(),
                    q.into(),
                    merging::one_by_one_rm(size, p).into(),
                ]);
            }
        }
        MergeStrategy::Doubling => {
            let mut size = 1u64;
            let mut level = 0i64;
            while size <= m.next_power_of_two() {
                let q = if size == 1 {
                    p
                } else {
                    merging::doubling_d(size / 2)
                };
                table.push(vec![
                    level.into(),
                    size.into(),
                    q.into(),
                    merging::doubling_rm(size, p).into(),
                ]);
                size *= 2;
                level += 1;
            }
        }
        _ => {
            // worst-case chain of sizes
            let mut chain = vec![m];
            let mut cur = m;
            while cur > 1 {
                cur = merging::combinatorics::number_resolved_input_size(cur);
                chain.push(cur);
            }
            chain.reverse();
            for (level, &size) in chain.iter().enumerate() {
                let s = if size == 1 {
                    p
                } else {
                    let k = merging::combinatorics::number_resolved_input_size(size);
                    merging::combinatorics::merge_success_below_half(k, k)
                };
                table.push(vec![
                    (level as i64).into(),
                    size.into(),
                    s.into(),
                    merging::number_resolved_rm(size, p).into(),
                ]);
            }
        }
    }
    table.meta("strategy", format!("{strategy:?}"));
    table.meta("target", m);
    table.meta("p", p);
    Ok((table, 0))
}

fn merge_sim_table(args: &MergeSimArgs, seed: Option<u64>) -> Result<(Table, usize)> {
    let seed = seed.ok_or_else(|| Error::Config("merge-sim needs --seed".into()))?;
    let strategy = args.strategy.unwrap_or(MergeStrategy::Doubling);
    let m = args.m.unwrap_or(8);
    let p = args.p.unwrap_or(0.5);
    let trials = args.trials.unwrap_or(10_000);
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Config(format!("p = {p} outside (0, 1]")));
    }
    let stats = merging::simulate(strategy, m, p, trials, seed);
    let analytic = match strategy {
        MergeStrategy::OneByOne => merging::one_by_one_rm(m, p),
        MergeStrategy::Doubling => merging::doubling_rm(m, p),
        _ => merging::number_resolved_rm(m, p),
    };
    let mut table = Table::new(&[
        "strategy",
        "target",
        "p",
        "trials",
        "mean_ops",
        "std_ops",
        "std_err",
        "analytic_r_m",
        "mean_trim_attempts",
        "mean_achieved",
        "levels",
    ]);
    table.push(vec![
        format!("{strategy:?}").into(),
        m.into(),
        p.into(),
        trials.into(),
        stats.mean_ops.into(),
        stats.std_ops.into(),
        stats.std_err.into(),
        analytic.into(),
        stats.mean_trim_attempts.into(),
        stats.mean_achieved.into(),
        stats.levels.into(),
    ]);
    Ok((table, 0))
}

fn detect_table(args: &DetectArgs, out: &Path, format: OutputFormat) -> Result<(Table, usize, Vec<PathBuf>)> {
    let m = args.m.unwrap_or(1);
    let grid = match &args.gamma_t {
        Some(s) => parse_list(s)?,
        None => vec![5.0, 10.0, 20.0, 30.0],
    };
    let mut table = Table::new(&["gamma_t", "lambda_low", "lambda_high", "error"]);
    for &gt in &grid {
        table.push(vec![
            gt.into(),
            (m as f64 * gt).into(),
            ((m + 1) as f64 * gt).into(),
            merging::discrimination_error(m, 1.0, gt).into(),
        ]);
    }
    table.meta("m", m);
    let mut extra = Vec::new();
    if args.pmf.unwrap_or(false) {
        let mut pmf_table = Table::new(&["gamma_t", "count", "p_low", "p_high"]);
        for &gt in &grid {
            let low = merging::CountingModel::new(1.0, gt, m).pmf();
            let high = merging::CountingModel::new(1.0, gt, m + 1).pmf();
            for n in 0..low.len().max(high.len()) {
                pmf_table.push(vec![
                    gt.into(),
                    (n as i64).into(),
                    low.get(n).copied().unwrap_or(0.0).into(),
                    high.get(n).copied().unwrap_or(0.0).into(),
                ]);
            }
        }
        let path = out.with_file_name(format!(
            "{}_pmf.csv",
            out.file_stem().and_then(|s| s.to_str()).unwrap_or("detect")
        ));
        output::write_table(
            &pmf_table,
            &Provenance {
                command: "detect-pmf".into(),
                seed: None,
                config_digest: "-".into(),
            },
            &path,
            format,
        )?;
        extra.push(path);
    }
    Ok((table, 0, extra))
}

fn fig3_table(args: &Fig3Args) -> Result<(Table, usize)> {
    let budgets = match &args.r {
        Some(s) => parse_list(s)?,
        None => vec![1e2, 1e4, 1e6],
    };
    let grid = match &args.p1d_grid {
        Some(s) => parse_grid(s)?,
        None => parse_grid("10:1000:25:log")?,
    };
    let mut cols: Vec<String> = vec!["p1d".into()];
    for r in &budgets {
        cols.push(format!("m_at_R_{r:e}"));
    }
    let col_refs: Vec<&str> = cols.iter().map(|s| s.as_str()).collect();
    let mut table = Table::new(&col_refs);
    for &p1d in &grid {
        let mut row: Vec<Cell> = vec![p1d.into()];
        for &r in &budgets {
            row.push(protocols::two_step::reachable_excitations(r, p1d).into());
        }
        table.push(row);
    }
    Ok((table, 0))
}

fn fig4_table(args: &Fig4Args) -> Result<(Table, usize)> {
    let n = args.n.unwrap_or(100);
    let m = args.m.unwrap_or(1);
    let repeat_b = args.repeat_b.unwrap_or(1);
    let grid = match &args.p1d_grid {
        Some(s) => parse_grid(s)?,
        None => parse_grid("10:1000:9:log")?,
    };
    let mut rb = RowBuilder::new(&["p1d", "p_analytic", "p_numeric", "i_analytic", "i_numeric"]);
    let rows: Vec<Result<Vec<Cell>>> = grid
        .iter()
        .map(|&p1d| {
            let params = PhysicalParams::new(n + m, p1d).with_stored(m);
            let a = protocols::fast_pi::step(&params, repeat_b)?;
            let nm = protocols::fast_pi::numeric(&params, repeat_b)?;
            Ok(vec![
                p1d.into(),
                a.p.into(),
                nm.p.into(),
                a.i_step.into(),
                nm.i_step.into(),
            ])
        })
        .collect();
    for row in rows {
        rb.push(row);
    }
    let mut t = rb.table;
    t.meta("n_m", n);
    t.meta("m", m);
    t.meta("repeat_b", repeat_b);
    Ok((t, rb.failed))
}

fn oracle_table(args: &OracleArgs) -> Result<(Table, usize)> {
    let p1d = args.p1d.unwrap_or(20.0);
    let mut table = Table::new(&["case", "conditional_distance", "lindblad_distance", "threshold", "pass"]);
    let wd = crate::fullspace::weak_drive_oracle(0.05, p1d, 3.0)?;
    table.push(vec![
        "weak-drive-heralded".into(),
        wd.conditional_distance.into(),
        wd.lindblad_distance.into(),
        1e-8.into(),
        (wd.conditional_distance < 1e-8 && wd.lindblad_distance < 1e-8)
            .to_string()
            .into(),
    ]);
    let z = crate::fullspace::zeno_step_oracle(p1d, false)?;
    table.push(vec![
        "zeno-step".into(),
        z.conditional_distance.into(),
        z.lindblad_distance.into(),
        1e-8.into(),
        (z.conditional_distance < 1e-8 && z.lindblad_distance < 1e-8)
            .to_string()
            .into(),
    ]);
    let broken = crate::fullspace::zeno_step_oracle(p1d, true)?;
    table.push(vec![
        "quarter-wave-misplaced".into(),
        broken.conditional_distance.into(),
        broken.lindblad_distance.into(),
        1e-3.into(),
        (broken.lindblad_distance > 1e-3).to_string().into(),
    ]);
    Ok((table, 0))
}

fn sm_figs(args: &SmFigsArgs, dir: &Path, format: OutputFormat) -> Result<(Table, usize, Vec<PathBuf>)> {
    let which = args.which.clone().unwrap_or_else(|| "all".into());
    let all = which == "all";
    let mut index = Table::new(&["figure", "path", "rows"]);
    let mut outputs = Vec::new();
    let emit = |name: &str, table: &Table| -> Result<PathBuf> {
        let path = dir.join(format!("{name}.csv"));
        output::write_table(
            table,
            &Provenance {
                command: format!("sm-figs/{name}"),
                seed: None,
                config_digest: "-".into(),
            },
            &path,
            format,
        )?;
        Ok(path)
    };

    if all || which == "sm2" {
        // transfer-step populations, analytic vs master equation
        let zp = zeno::ZenoParams::optimal(0, 100, 100.0, 1.0);
        let model = zeno::sink_model(&zp)?;
        let mut rho = crate::linalg::CMat::zeros(6, 6);
        rho[(0, 0)] = crate::linalg::c64(1.0, 0.0);
        let points = 60usize;
        let dt = zp.pulse_time / points as f64;
        let mut t = 0.0;
        let mut table = Table::new(&["t", "dark_analytic", "goal_analytic", "dark_numeric", "goal_numeric"]);
        let (cs, cd) = (
            (1.0f64 / 101.0).sqrt(),
            (100.0f64 / 101.0).sqrt(),
        );
        for i in 0..=points {
            let pops = zeno::analytic_populations(&zp, &[t]);
            let dark_num = {
                // ⟨ψ_d|ρ|ψ_d⟩ with ψ_d = c_d ψ1 − c_s ψ2
                let d00 = rho[(0, 0)].re;
                let d11 = rho[(1, 1)].re;
                let d01 = rho[(0, 1)];
                cd * cd * d00 + cs * cs * d11 - 2.0 * (cd * cs * d01.re)
            };
            table.push(vec![
                t.into(),
                pops.dark[0].into(),
                pops.goal[0].into(),
                dark_num.into(),
                rho[(2, 2)].re.into(),
            ]);
            if i < points {
                rho = crate::dynamics::integrate_lindblad(&model, &rho, dt, 1e-10)?;
                t += dt;
            }
        }
        let p = emit("sm2_populations", &table)?;
        index.push(vec!["sm2".into(), p.display().to_string().into(), (points as i64 + 1).into()]);
        outputs.push(p);
    }
    if all || which == "sm3" {
        // target-ensemble free-space jump scaling
        let mut table = Table::new(&["p1d", "n_m", "p_target_star", "bound"]);
        for &p1d in &[10.0, 31.6, 100.0, 316.0, 1000.0] {
            for &nm in &[50u32, 100, 200] {
                let zp = zeno::ZenoParams::optimal(0, nm, p1d, 1.0);
                let r = zeno::jump_probabilities(&zp)?;
                let bound = std::f64::consts::PI / (2.0 * nm as f64 * p1d.sqrt());
                table.push(vec![p1d.into(), nm.into(), r.b_star().into(), bound.into()]);
            }
        }
        let p = emit("sm3_target_jumps", &table)?;
        index.push(vec!["sm3".into(), p.display().to_string().into(), 15i64.into()]);
        outputs.push(p);
    }
    if all || which == "sm5" {
        let mut table = Table::new(&["p1d", "n", "i_analytic", "i_numeric"]);
        for &p1d in &[10.0, 31.6, 100.0, 316.0, 1000.0] {
            for &n in &[100u32, 300] {
                let params = PhysicalParams::new(n + 1, p1d).with_stored(1);
                let a = protocols::fast_pi::step(&params, 1)?;
                let nu = protocols::fast_pi::numeric(&params, 1)?;
                table.push(vec![p1d.into(), n.into(), a.i_step.into(), nu.i_step.into()]);
            }
        }
        let p = emit("sm5_infidelity", &table)?;
        index.push(vec!["sm5".into(), p.display().to_string().into(), 10i64.into()]);
        outputs.push(p);
    }
    if all || which == "sm7" {
        let n_m = 100u32;
        let p1d = 100.0;
        let omega = protocols::single_step::optimal_omega(n_m, p1d, 1.0);
        let t_end = protocols::single_step::optimal_time(p1d, 1.0);
        let ratio = protocols::single_step::optimal_ratio(n_m);
        let mut table = Table::new(&["t", "dark_analytic", "goal_analytic", "pop1", "pop2", "pop3", "goal_numeric"]);
        let points = 60;
        for i in 0..=points {
            let t = t_end * i as f64 / points as f64;
            let v = protocols::single_step::propagate(n_m, p1d, ratio, omega, t)?;
            let nm = n_m as f64;
            let env = (-t).exp() * nm / (nm + 2.0);
            let phase = (p1d / 3.0).sqrt() * t / 2.0;
            table.push(vec![
                t.into(),
                (env * phase.cos().powi(2)).into(),
                (env * phase.sin().powi(2)).into(),
                v[0].norm_sqr().into(),
                v[1].norm_sqr().into(),
                v[2].norm_sqr().into(),
                v[3].norm_sqr().into(),
            ]);
        }
        let p = emit("sm7_populations", &table)?;
        index.push(vec!["sm7".into(), p.display().to_string().into(), (points as i64 + 1).into()]);
        outputs.push(p);
    }
    if all || which == "sm8" {
        let mut table = Table::new(&["p1d", "n_m", "p_target_star", "estimate"]);
        for &p1d in &[10.0, 100.0, 1000.0] {
            for &nm in &[50u32, 100, 200] {
                let b = protocols::single_step::jump_budget(
                    nm,
                    p1d,
                    protocols::single_step::optimal_ratio(nm),
                    protocols::single_step::optimal_omega(nm, p1d, 1.0),
                    protocols::single_step::optimal_time(p1d, 1.0),
                )?;
                let est = 3f64.sqrt() * std::f64::consts::PI / (2.0 * nm as f64 * p1d.sqrt());
                table.push(vec![p1d.into(), nm.into(), b.free_space_target.into(), est.into()]);
            }
        }
        let p = emit("sm8_target_jumps", &table)?;
        index.push(vec!["sm8".into(), p.display().to_string().into(), 9i64.into()]);
        outputs.push(p);
    }
    if all || which == "pulse" {
        let mut table = Table::new(&["p1d", "ratio"]);
        for &p1d in &[10.0, 20.0, 50.0, 100.0, 300.0] {
            let zp = zeno::ZenoParams::optimal(0, 100, p1d, 1.0);
            let opt = zeno::optimize_pulse_shape(&zp, 10, zp.pulse_time)?;
            table.push(vec![p1d.into(), opt.ratio.into()]);
        }
        let p = emit("pulse_ratio", &table)?;
        index.push(vec!["pulse".into(), p.display().to_string().into(), 5i64.into()]);
        outputs.push(p);
    }
    if all || which == "sm11" {
        let mut table = Table::new(&["m", "n", "detected", "probability"]);
        for (m, n) in [(20u64, 20u64), (10, 30)] {
            for (p_det, prob) in merging::detection_distribution(m, n).iter().enumerate() {
                table.push(vec![m.into(), n.into(), (p_det as i64).into(), (*prob).into()]);
            }
        }
        let mut s_table = Table::new(&["m", "shift", "s"]);
        for m in (4..=64u64).step_by(4) {
            for &shift in &[0i64, 2, 4] {
                if m as i64 > shift {
                    s_table.push(vec![
                        m.into(),
                        shift.into(),
                        merging::number_resolved_success(m, shift).into(),
                    ]);
                }
            }
        }
        let p = emit("sm11_distributions", &table)?;
        let p2 = emit("sm11_below_half", &s_table)?;
        index.push(vec!["sm11".into(), p.display().to_string().into(), (table.rows.len() as i64).into()]);
        index.push(vec!["sm11b".into(), p2.display().to_string().into(), (s_table.rows.len() as i64).into()]);
        outputs.push(p);
        outputs.push(p2);
    }
    if all || which == "sm12" {
        let mut table = Table::new(&["gamma_t", "count", "p_m1", "p_m2"]);
        for &gt in &[10.0, 30.0] {
            let a = merging::CountingModel::new(1.0, gt, 1).pmf();
            let b = merging::CountingModel::new(1.0, gt, 2).pmf();
            for n in 0..a.len().max(b.len()) {
                table.push(vec![
                    gt.into(),
                    (n as i64).into(),
                    a.get(n).copied().unwrap_or(0.0).into(),
                    b.get(n).copied().unwrap_or(0.0).into(),
                ]);
            }
        }
        let p = emit("sm12_counting", &table)?;
        index.push(vec!["sm12".into(), p.display().to_string().into(), (table.rows.len() as i64).into()]);
        outputs.push(p);
    }
    Ok((index, 0, outputs))
}

fn default_out(command: &str) -> PathBuf {
    let dir = std::env::var("WQED_OUTPUT_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|_| PathBuf::from("."));
    dir.join(format!("{command}.csv"))
}

/// Execute a parsed invocation. Numerical failures at individual sweep
/// points flag the row and continue.
pub fn run(cli: Cli) -> Result<RunSummary> {
    let config: Option<serde_json::Value> = match &cli.config {
        None => None,
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            Some(serde_json::from_str(&text).map_err(|e| Error::Config(format!("config: {e}")))?)
        }
    };
    let config_json = config
        .as_ref()
        .map(|v| v.to_string())
        .unwrap_or_else(|| "{}".to_string());
    let digest = output::config_digest(&config_json);

    let name = cli.command.name().to_string();
    let seed = cli.seed.or_else(|| {
        config
            .as_ref()
            .and_then(|v| v.get("seed"))
            .and_then(|v| v.as_u64())
    });
    let format = cli.format.unwrap_or_default();
    let out = cli
        .out
        .clone()
        .or_else(|| {
            config
                .as_ref()
                .and_then(|v| v.get("out"))
                .and_then(|v| v.as_str())
                .map(PathBuf::from)
        })
        .unwrap_or_else(|| default_out(&name));

    let mut extra_outputs: Vec<PathBuf> = Vec::new();
    let (table, failed) = match &cli.command {
        Command::Protocol1(args) => {
            let merged = Protocol1Args {
                common: args.common.clone().merged(config_section::<Protocol1Args>(&config, &name)?.common),
                same_level: args
                    .same_level
                    .or(config_section::<Protocol1Args>(&config, &name)?.same_level),
            };
            protocol1_table(&merged)?
        }
        Command::Protocol2(args) => {
            let cfg: Protocol2Args = config_section(&config, &name)?;
            let merged = Protocol2Args {
                common: args.common.clone().merged(cfg.common),
            };
            protocol2_table(&merged)?
        }
        Command::Protocol3(args) => {
            let cfg: Protocol3Args = config_section(&config, &name)?;
            let merged = Protocol3Args {
                common: args.common.clone().merged(cfg.common),
                repeat_b: args.repeat_b.or(cfg.repeat_b),
                skip_numeric: args.skip_numeric.or(cfg.skip_numeric),
            };
            protocol3_table(&merged)?
        }
        Command::Protocol4(args) => {
            let cfg: Protocol4Args = config_section(&config, &name)?;
            let merged = Protocol4Args {
                common: args.common.clone().merged(cfg.common),
                ratio: args.ratio.or(cfg.ratio),
            };
            protocol4_table(&merged)?
        }
        Command::ZenoStep(args) => {
            let cfg: ZenoStepArgs = config_section(&config, &name)?;
            let mut merged = args.clone();
            merge_opt!(merged, cfg; k, nb, p1d, omega, time, points);
            zeno_step_table(&merged)?
        }
        Command::PulseShape(args) => {
            let cfg: PulseShapeArgs = config_section(&config, &name)?;
            let mut merged = args.clone();
            merge_opt!(merged, cfg; nb, k, p1d, segments);
            pulse_shape_table(&merged)?
        }
        Command::MergePlan(args) => {
            let cfg: MergePlanArgs = config_section(&config, &name)?;
            let mut merged = args.clone();
            merge_opt!(merged, cfg; strategy, m, p);
            merge_plan_table(&merged)?
        }
        Command::MergeSim(args) => {
            let cfg: MergeSimArgs = config_section(&config, &name)?;
            let mut merged = args.clone();
            merge_opt!(merged, cfg; strategy, m, p, trials);
            merge_sim_table(&merged, seed)?
        }
        Command::Detect(args) => {
            let cfg: DetectArgs = config_section(&config, &name)?;
            let mut merged = args.clone();
            merge_opt!(merged, cfg; m, gamma_t, pmf);
            let (t, f, extra) = detect_table(&merged, &out, format)?;
            extra_outputs.extend(extra);
            (t, f)
        }
        Command::Fig3(args) => {
            let cfg: Fig3Args = config_section(&config, &name)?;
            let mut merged = args.clone();
            merge_opt!(merged, cfg; r, p1d_grid);
            fig3_table(&merged)?
        }
        Command::Fig4(args) => {
            let cfg: Fig4Args = config_section(&config, &name)?;
            let mut merged = args.clone();
            merge_opt!(merged, cfg; n, m, repeat_b, p1d_grid);
            fig4_table(&merged)?
        }
        Command::SmFigs(args) => {
            let cfg: SmFigsArgs = config_section(&config, &name)?;
            let mut merged = args.clone();
            merge_opt!(merged, cfg; which);
            let dir = out
                .parent()
                .filter(|p| !p.as_os_str().is_empty())
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("."));
            let (t, f, extra) = sm_figs(&merged, &dir, format)?;
            extra_outputs.extend(extra);
            (t, f)
        }
        Command::OracleCheck(args) => {
            let cfg: OracleArgs = config_section(&config, &name)?;
            let mut merged = args.clone();
            merge_opt!(merged, cfg; p1d);
            oracle_table(&merged)?
        }
    };

    let prov = Provenance {
        command: name,
        seed,
        config_digest: digest,
    };
    output::write_table(&table, &prov, &out, format)?;
    let mut outputs = vec![out];
    outputs.extend(extra_outputs);
    Ok(RunSummary {
        rows: table.rows.len(),
        failed,
        outputs,
    })
}

/// Entry point used by the binary: parses, runs, and maps errors to exit
/// codes (0 success, 1 config error, 2 numerical failure at every sweep
/// point).
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap help/version are not errors
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(summary) => {
            for path in &summary.outputs {
                eprintln!("wrote {}", path.display());
            }
            if summary.rows > 0 && summary.failed == summary.rows {
                eprintln!("all {} sweep points failed", summary.rows);
                2
            } else {
                0
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::InvalidInput(_) | Error::Io(_) | Error::Json(_) => 1,
                _ => 2,
            }
        }
    }
}
