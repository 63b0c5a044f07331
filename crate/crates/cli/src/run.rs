//! Executes a resolved plan and writes the artifact bundle.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Map, Value};
use thiserror::Error;
use vastop_core::analytic::{maturity_benefit_value, never_surrender_check};
use vastop_core::decompose::decomposition_residuals;
use vastop_core::lattice::{american_extrapolate, bermudan_value, build_chain};
use vastop_core::mc::{
    mc_boundary_strategy_value, mc_maturity_benefit, mc_premium_integrals, simulate_paths, write_estimates_csv,
    Estimate,
};
use vastop_core::model::presets;
use vastop_core::pde::solve_variational_inequality;
use vastop_core::region::{classify_sections, extract_boundary, extract_regions, Boundary, RegionMask, SectionClass};
use vastop_core::surface::{RewardKind, ValueSurface};
use vastop_core::{Scenario, VaError};

use crate::config::{Config, Task};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("task {task}: {source}")]
    Solver { task: &'static str, source: VaError },
    #[error("writing {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

fn solver(task: &'static str) -> impl FnOnce(VaError) -> RunError {
    move |source| RunError::Solver { task, source }
}

/// Surfaces and regions produced so far.
#[derive(Default)]
struct State {
    lattice: Option<ValueSurface>,
    pde: Option<ValueSurface>,
    lattice_mask: Option<RegionMask>,
    pde_mask: Option<RegionMask>,
    boundary: Option<Boundary>,
}

impl State {
    /// The surface that feeds the boundary, decomposition and Monte Carlo
    /// tasks: the PDE one when present.
    fn primary(&self) -> Option<(&'static str, &ValueSurface, &RegionMask)> {
        if let (Some(s), Some(m)) = (&self.pde, &self.pde_mask) {
            return Some(("pde", s, m));
        }
        if let (Some(s), Some(m)) = (&self.lattice, &self.lattice_mask) {
            return Some(("lattice", s, m));
        }
        None
    }
}

struct Runner<'a> {
    cfg: &'a Config,
    out: &'a Path,
    state: State,
    results: Map<String, Value>,
}

/// Runs every task and writes `summary.json`. Returns the summary.
pub fn run(cfg: &Config) -> Result<Value, RunError> {
    let out = cfg.out_dir();
    fs::create_dir_all(out).map_err(|source| RunError::Io {
        path: out.to_path_buf(),
        source,
    })?;
    let mut runner = Runner {
        cfg,
        out,
        state: State::default(),
        results: Map::new(),
    };
    for &task in &cfg.tasks {
        let start = Instant::now();
        let (name, value) = runner.task(task)?;
        eprintln!("{name}: done in {:.2} s", start.elapsed().as_secs_f64());
        runner.results.insert(name.to_string(), value);
    }
    runner.write_surfaces()?;
    let summary = json!({
        "config": cfg,
        "results": Value::Object(std::mem::take(&mut runner.results)),
    });
    runner.write("summary.json", |w| {
        serde_json::to_writer_pretty(&mut *w, &summary)?;
        writeln!(w)
    })?;
    Ok(summary)
}

impl Runner<'_> {
    fn scn(&self) -> &Scenario {
        &self.cfg.scenario
    }

    fn write(&self, name: &str, body: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> Result<(), RunError> {
        let path = self.out.join(name);
        let io_err = |source| RunError::Io {
            path: path.clone(),
            source,
        };
        let mut w = BufWriter::new(File::create(&path).map_err(io_err)?);
        body(&mut w).map_err(io_err)?;
        w.flush().map_err(io_err)
    }

    fn task(&mut self, task: Task) -> Result<(&'static str, Value), RunError> {
        Ok(match task {
            Task::CheckL => ("check-L", self.check_l()?),
            Task::PriceLattice => ("price-lattice", self.price_lattice()?),
            Task::PricePde => ("price-pde", self.price_pde()?),
            Task::Regions => ("regions", self.regions()?),
            Task::Boundary => ("boundary", self.boundary()?),
            Task::Decompose => ("decompose", self.decompose()?),
            Task::McVerify => ("mc-verify", self.mc_verify()?),
            Task::PaperFig => ("paper-fig", self.paper_fig()?),
        })
    }

    fn check_l(&mut self) -> Result<Value, RunError> {
        let scn = self.scn();
        let g = &self.cfg.grid;
        let grid = vastop_core::surface::Grid::log_uniform(
            scn.maturity(),
            g.n_steps,
            scn.contract.initial_account,
            g.m_nodes,
            g.xmax_mult,
        )
        .map_err(solver("check-L"))?;
        let tgrid = &grid.tnodes[..g.n_steps];
        let report = never_surrender_check(scn, tgrid, &grid.xnodes).map_err(solver("check-L"))?;
        let classes = if scn.is_time_only() {
            Some(classify_sections(scn, tgrid).map_err(solver("check-L"))?)
        } else {
            None
        };
        let f0 = scn.contract.initial_account;
        let l_at_f0: Vec<f64> = tgrid
            .iter()
            .map(|&t| scn.l_value(t, f0))
            .collect::<Result<_, _>>()
            .map_err(solver("check-L"))?;
        self.write("check_l.csv", |w| {
            writeln!(w, "t,L_at_F0,section_class")?;
            for (n, t) in tgrid.iter().enumerate() {
                let class = classes.as_ref().map_or(String::new(), |c| class_name(c[n]));
                writeln!(w, "{t},{},{class}", l_at_f0[n])?;
            }
            Ok(())
        })?;
        let mut v = json!({
            "never_surrender": report.holds,
            "negative_l_nodes": report.violations.len(),
        });
        if let Some(c) = &classes {
            let empty: Vec<bool> = c.iter().map(|&k| k == SectionClass::Empty).collect();
            v["predicted_empty_slices"] = json!(runs(tgrid, &empty));
        }
        Ok(v)
    }

    fn price_lattice(&mut self) -> Result<Value, RunError> {
        let (scn, g) = (self.scn(), &self.cfg.grid);
        let reward = self.cfg.lattice.reward.unwrap_or(RewardKind::Discontinuous);
        let n_seq = self.cfg.lattice.n_seq.clone().unwrap_or_default();
        let ex = american_extrapolate(scn, &n_seq, g.m_nodes, g.xmax_mult).map_err(solver("price-lattice"))?;
        let reuse = n_seq.iter().position(|&n| n == g.n_steps);
        let surface = match (reward, reuse) {
            (RewardKind::Discontinuous, Some(k)) => ex.surfaces[k].clone(),
            _ => {
                let chain = build_chain(scn, g.n_steps, g.m_nodes, g.xmax_mult).map_err(solver("price-lattice"))?;
                bermudan_value(&chain, scn, reward).map_err(solver("price-lattice"))?
            }
        };
        let mut v = json!({
            "reward": reward,
            "v0": surface.value_at_start(scn.contract.initial_account),
            "extrapolation": ex,
        });
        if scn.is_time_only() {
            v["max_rel_v_minus_h"] = json!(max_rel_to_h(scn, &surface).map_err(solver("price-lattice"))?);
        }
        self.state.lattice = Some(surface);
        Ok(v)
    }

    fn price_pde(&mut self) -> Result<Value, RunError> {
        let scn = self.scn();
        let grid = self.cfg.pde_grid().map_err(solver("price-pde"))?;
        let surface = solve_variational_inequality(scn, &grid).map_err(solver("price-pde"))?;
        let mut v = json!({
            "v0": surface.value_at_start(scn.contract.initial_account),
            "heuristic": surface.heuristic,
        });
        if scn.is_time_only() {
            v["max_rel_v_minus_h"] = json!(max_rel_to_h(scn, &surface).map_err(solver("price-pde"))?);
        }
        self.state.pde = Some(surface);
        Ok(v)
    }

    fn regions(&mut self) -> Result<Value, RunError> {
        let tol = self.cfg.region;
        let mut v = Map::new();
        for (name, surface) in [("lattice", &self.state.lattice), ("pde", &self.state.pde)] {
            let Some(surface) = surface else { continue };
            let mask = extract_regions(surface, tol);
            self.write(&format!("regions_{name}.csv"), |w| write_mask(w, &mask))?;
            v.insert(name.to_string(), mask_summary(&mask));
            match name {
                "lattice" => self.state.lattice_mask = Some(mask),
                _ => self.state.pde_mask = Some(mask),
            }
        }
        Ok(Value::Object(v))
    }

    fn boundary(&mut self) -> Result<Value, RunError> {
        let (source, _, mask) = self.state.primary().expect("regions run first");
        let b = extract_boundary(mask);
        self.write("boundary.csv", |w| b.write_csv(w))?;
        let empty = b.levels.iter().filter(|l| l.is_none()).count();
        let v = json!({
            "source": source,
            "empty_sections": empty,
            "threshold_violations": b.violations.len(),
            "last_section_empty": b.levels.last().is_some_and(|l| l.is_none()),
        });
        self.state.boundary = Some(b);
        Ok(v)
    }

    fn decompose(&mut self) -> Result<Value, RunError> {
        let (source, surface, _) = self.state.primary().expect("regions run first");
        let boundary = self.state.boundary.as_ref().expect("boundary runs first");
        let tol = self.cfg.decompose.tolerance.unwrap_or(5e-3 * self.scn().guarantee());
        let report = decomposition_residuals(surface, self.scn(), boundary, tol).map_err(solver("decompose"))?;
        self.write("decomposition.csv", |w| report.write_csv(w))?;
        let mut v = serde_json::to_value(&report).expect("report serializes");
        v["source"] = json!(source);
        v["flagged"] = json!(report.flagged.len());
        Ok(v)
    }

    fn mc_verify(&mut self) -> Result<Value, RunError> {
        let scn = self.scn();
        let mc = &self.cfg.mc;
        let (source, surface, mask) = self.state.primary().expect("regions run first");
        let boundary = self.state.boundary.as_ref().expect("boundary runs first");
        let n_steps = self.cfg.grid.n_steps;
        let f0 = scn.contract.initial_account;
        let batch = simulate_paths(scn, mc.seed, mc.npaths, n_steps, mc.scheme).map_err(solver("mc-verify"))?;
        let benefit = mc_maturity_benefit(&batch);
        let strategy = mc_boundary_strategy_value(&batch, boundary).map_err(solver("mc-verify"))?;
        let v0 = surface.value_at_start(f0);
        let mut rows: Vec<(&str, Estimate)> = vec![("maturity_benefit", benefit), ("boundary_strategy", strategy)];
        let mut v = json!({
            "source": source,
            "seed": mc.seed,
            "scheme": mc.scheme,
            "maturity_benefit": benefit,
            "boundary_strategy": strategy,
            "solver_v0": v0,
            "strategy_below_v0": strategy.estimate <= v0 + 3.0 * strategy.std_error,
        });
        if scn.is_time_only() {
            let h = maturity_benefit_value(scn, 0.0, f0).map_err(solver("mc-verify"))?;
            let premiums = mc_premium_integrals(&batch, mask).map_err(solver("mc-verify"))?;
            rows.extend([
                ("surrender_premium", premiums.e),
                ("continuation_premium", premiums.f),
                ("premium_difference", premiums.e_minus_f),
            ]);
            v["analytic_h0"] = json!(h);
            v["benefit_within_3se"] = json!((benefit.estimate - h).abs() <= 3.0 * benefit.std_error);
            v["strategy_in_sandwich"] = json!(
                strategy.estimate >= h - 3.0 * strategy.std_error && strategy.estimate <= v0 + 3.0 * strategy.std_error
            );
            v["premiums"] = json!(premiums);
        }
        self.write("mc_estimates.csv", |w| write_estimates_csv(w, mc.seed, &rows))?;
        Ok(v)
    }

    /// Regions of both fee schedules under both rewards, on the lattice.
    fn paper_fig(&mut self) -> Result<Value, RunError> {
        let g = &self.cfg.grid;
        let mut v = Map::new();
        for (fee_name, fee) in [("c1", presets::fee_c1()), ("c2", presets::fee_c2())] {
            let mut scn = self.scn().clone();
            scn.fee = fee;
            let chain = build_chain(&scn, g.n_steps, g.m_nodes, g.xmax_mult).map_err(solver("paper-fig"))?;
            for (kind_name, kind) in [("disc", RewardKind::Discontinuous), ("cont", RewardKind::Continuous)] {
                let surface = bermudan_value(&chain, &scn, kind).map_err(solver("paper-fig"))?;
                let mask = extract_regions(&surface, self.cfg.region);
                let name = format!("paper_fig_{fee_name}_{kind_name}");
                self.write(&format!("{name}.csv"), |w| write_mask(w, &mask))?;
                v.insert(name, mask_summary(&mask));
            }
        }
        Ok(Value::Object(v))
    }

    fn write_surfaces(&self) -> Result<(), RunError> {
        let pairs = [
            ("lattice_surface.csv", &self.state.lattice, &self.state.lattice_mask),
            ("pde_surface.csv", &self.state.pde, &self.state.pde_mask),
        ];
        for (name, surface, mask) in pairs {
            let Some(s) = surface else { continue };
            let (nt, m) = (s.grid.n_times(), s.grid.n_states());
            let obstacle: Vec<f64> = (0..nt).flat_map(|n| (0..m).map(move |i| s.obstacle(n, i))).collect();
            let flags = mask.as_ref().map(|k| k.flags());
            self.write(name, |w| s.write_csv(w, &obstacle, flags))?;
        }
        Ok(())
    }
}

fn class_name(c: SectionClass) -> String {
    serde_json::to_value(c).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
}

fn max_rel_to_h(scn: &Scenario, s: &ValueSurface) -> Result<f64, VaError> {
    let mut worst: f64 = 0.0;
    for (n, &t) in s.grid.tnodes.iter().enumerate() {
        for (i, &x) in s.grid.xnodes.iter().enumerate() {
            let h = maturity_benefit_value(scn, t, x)?;
            worst = worst.max((s.value(n, i) - h).abs() / h);
        }
    }
    Ok(worst)
}

/// Maximal runs of consecutive flagged times as `[first, last]` pairs.
fn runs(times: &[f64], flags: &[bool]) -> Vec<[f64; 2]> {
    let mut out = Vec::new();
    let mut start = None;
    for (k, &f) in flags.iter().enumerate() {
        match (f, start) {
            (true, None) => start = Some(k),
            (false, Some(s)) => {
                out.push([times[s], times[k - 1]]);
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push([times[s], times[flags.len() - 1]]);
    }
    out
}

fn mask_summary(mask: &RegionMask) -> Value {
    let nt = mask.grid.n_times() - 1;
    let empty: Vec<bool> = (0..nt).map(|n| !mask.section(n).contains(&true)).collect();
    json!({
        "surrender_nodes": mask.count(),
        "empty": mask.is_empty(),
        "empty_slices": runs(&mask.grid.tnodes[..nt], &empty),
    })
}

fn write_mask<W: Write>(w: &mut W, mask: &RegionMask) -> io::Result<()> {
    writeln!(w, "t,x,in_surrender")?;
    for (n, t) in mask.grid.tnodes.iter().enumerate() {
        for (i, x) in mask.grid.xnodes.iter().enumerate() {
            writeln!(w, "{t},{x},{}", u8::from(mask.in_surrender(n, i)))?;
        }
    }
    Ok(())
}
