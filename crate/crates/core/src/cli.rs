//! Command-line front end.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::Rng;
use serde::Serialize;

use crate::acceptance::{self, AcceptanceReport};
use crate::config::{ExperimentConfig, SystemSpec};
use crate::error::{Error, Result};
use crate::horocycle::{
    build_conformal_candidate, conformality_residual, equidistribution_error, tv_distance,
    uniqueness_gap, CandidateParams, HoroFlow, Route, Seed, UniquenessReport,
};
use crate::io::{task_rng, write_csv, Artifact};
use crate::julienne::{
    density_ratio, julienne, julienne_measure, CellSet, JulienneKind, JulienneRegion, JulienneSpec,
};
use crate::leaf_measures::{quasi_invariance_residual, solve_leaf_state, LeafState};
use crate::pressure::{spanning_pressure, PressureEstimate};
use crate::product_states::{
    assemble_global, ConditionalReport, CoverSpec, GibbsReport, GlobalState, PlaquePartition,
    ProductKind, ProductModel,
};
use crate::torusdyn::{leaf_segment, LeafType, ModelSystem, TorusPoint};

#[derive(Debug, Parser)]
#[command(
    name = "eqlab",
    version,
    about = "Equilibrium states of center isometries on torus models"
)]
pub struct Cli {
    /// TOML experiment config; flags override its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// cat, skew or custom (custom needs a matrix in the config).
    #[arg(long, global = true)]
    pub system: Option<String>,
    /// zero, constant:<c>, srb, trig or trig:<k1 k2 a b; ...>.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub potential: Option<String>,
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    /// Leaf resolution exponent.
    #[arg(long, global = true)]
    pub k: Option<u32>,
    #[arg(long, global = true)]
    pub n_max: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Artifact directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Base point `x y` (or `x y θ` on the skew product).
    #[arg(long, global = true, num_args = 2..=3, value_names = ["X", "Y"], allow_hyphen_values = true)]
    pub point: Option<Vec<f64>>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Spanning-set pressure slope and the leaf transfer pressure.
    Pressure,
    /// Unstable and stable leaf states with their quasi-invariance residuals.
    Leafstate,
    /// Assembled equilibrium state on the coordinate grid.
    Equilibrium,
    /// Gibbs ratios along Bowen balls.
    Gibbs,
    /// Plaque-conditional densities against the leaf measure.
    Conditionals,
    /// Conformal measure candidates for the horocycle flow.
    Horocycle,
    /// Julienne masses and density ratios of a band set.
    Julienne,
    /// The full acceptance suite.
    VerifyAll,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Pressure => "pressure",
            Command::Leafstate => "leafstate",
            Command::Equilibrium => "equilibrium",
            Command::Gibbs => "gibbs",
            Command::Conditionals => "conditionals",
            Command::Horocycle => "horocycle",
            Command::Julienne => "julienne",
            Command::VerifyAll => "verify-all",
        }
    }
}

/// How a finished command ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Passed,
    ToleranceFailed,
}

impl Cli {
    /// The config file (or defaults) with flag overrides applied.
    pub fn resolve_config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = &self.system {
            cfg.system.kind = SystemSpec::parse_kind(s)?;
        }
        if let Some(p) = &self.potential {
            cfg.potential = p.clone();
        }
        if let Some(e) = self.epsilon {
            cfg.epsilon = e;
        }
        if let Some(k) = self.k {
            cfg.resolution.k = k;
        }
        if let Some(n) = self.n_max {
            cfg.resolution.n_max = n;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn point(&self, sys: &ModelSystem, default: [f64; 2]) -> Result<TorusPoint> {
        match &self.point {
            None if sys.dim() == 3 => Ok(TorusPoint::new3(default[0], default[1], 0.0)),
            None => Ok(TorusPoint::new2(default[0], default[1])),
            Some(c) if c.len() == 2 && sys.dim() == 3 => Ok(TorusPoint::new3(c[0], c[1], 0.0)),
            Some(c) if c.len() == sys.dim() => TorusPoint::from_coords(c),
            Some(c) => Err(Error::Config(format!(
                "--point has {} coordinates, system has {}",
                c.len(),
                sys.dim()
            ))),
        }
    }
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let cfg = match cli.resolve_config() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("eqlab: {e}");
            return 2;
        }
    };
    match execute(&cli, &cfg) {
        Ok(Outcome::Passed) => 0,
        Ok(Outcome::ToleranceFailed) => 1,
        Err(e @ (Error::Config(_) | Error::InvalidSystem(_))) => {
            eprintln!("eqlab: {e}");
            2
        }
        Err(e) => {
            eprintln!("eqlab: {e}");
            1
        }
    }
}

pub fn execute(cli: &Cli, cfg: &ExperimentConfig) -> Result<Outcome> {
    let out = cfg.out.as_path();
    match cli.command {
        Command::Pressure => pressure(cfg, out),
        Command::Leafstate => leafstate(cfg, out),
        Command::Equilibrium => equilibrium(cfg, out),
        Command::Gibbs => gibbs(cli, cfg, out),
        Command::Conditionals => conditionals(cli, cfg, out),
        Command::Horocycle => horocycle(cli, cfg, out),
        Command::Julienne => julienne_cmd(cli, cfg, out),
        Command::VerifyAll => verify_all(cfg, out),
    }
}

fn emit<T: Serialize + serde::de::DeserializeOwned>(
    cmd: Command,
    cfg: &ExperimentConfig,
    out: &Path,
    data: T,
) -> Result<()> {
    let path = Artifact::new(cmd.name(), cfg, data).write(out, &format!("{}.json", cmd.name()))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn verdict(ok: bool) -> Outcome {
    if ok {
        Outcome::Passed
    } else {
        Outcome::ToleranceFailed
    }
}

fn origin(sys: &ModelSystem) -> TorusPoint {
    if sys.dim() == 3 {
        TorusPoint::new3(0.0, 0.0, 0.0)
    } else {
        TorusPoint::new2(0.0, 0.0)
    }
}

fn fit_range(n_max: usize) -> Vec<usize> {
    (n_max.saturating_sub(8).max(2)..=n_max).collect()
}

fn build_state(cfg: &ExperimentConfig) -> Result<(ModelSystem, GlobalState)> {
    let sys = cfg.system()?;
    let phi = cfg.potential(&sys)?;
    let model = ProductModel::new(
        &sys,
        &phi,
        ProductKind::Equilibrium,
        cfg.resolution.k,
        1e-12,
    )?;
    let state = assemble_global(model.shared(), CoverSpec::default())?;
    Ok((sys, state))
}

#[derive(Debug, Serialize, serde::Deserialize)]
pub struct PressureData {
    pub spanning: PressureEstimate,
    pub leaf_pressure: f64,
}

fn pressure(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let sys = cfg.system()?;
    let phi = cfg.potential(&sys)?;
    let spanning = spanning_pressure(&sys, &phi, cfg.epsilon, &fit_range(cfg.resolution.n_max))?;
    let window = leaf_segment(&sys, &origin(&sys), LeafType::U, 0.5)?;
    let leaf_pressure = solve_leaf_state(
        &sys,
        &phi,
        &window,
        cfg.resolution.k.min(14),
        cfg.tolerance.leaf,
    )?
    .p_estimate;
    println!(
        "spanning slope {:.6}, leaf pressure {:.6}",
        spanning.slope, leaf_pressure
    );
    emit(
        Command::Pressure,
        cfg,
        out,
        PressureData {
            spanning,
            leaf_pressure,
        },
    )?;
    Ok(Outcome::Passed)
}

#[derive(Debug, Serialize, serde::Deserialize)]
pub struct LeafstateData {
    pub states: Vec<LeafState>,
    pub residuals: Vec<f64>,
}

fn leafstate(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let sys = cfg.system()?;
    let phi = cfg.potential(&sys)?;
    let mut data = LeafstateData {
        states: vec![],
        residuals: vec![],
    };
    for leaf in [LeafType::U, LeafType::S] {
        let window = leaf_segment(&sys, &origin(&sys), leaf, 0.5)?;
        let st = solve_leaf_state(
            &sys,
            &phi,
            &window,
            cfg.resolution.k,
            0.01 * cfg.tolerance.leaf,
        )?;
        let r = quasi_invariance_residual(&sys, &phi, &st)?;
        println!(
            "{}: P = {:.12}, residual {r:.3e}",
            leaf.name(),
            st.p_estimate
        );
        data.states.push(st);
        data.residuals.push(r);
    }
    let ok = data.residuals.iter().all(|&r| r <= cfg.tolerance.leaf);
    emit(Command::Leafstate, cfg, out, data)?;
    Ok(verdict(ok))
}

#[derive(Debug, Serialize, serde::Deserialize)]
pub struct EquilibriumData {
    pub state: GlobalState,
    pub invariance_residual: f64,
    pub lebesgue_tv: f64,
}

fn equilibrium(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let (_, state) = build_state(cfg)?;
    let invariance_residual = state.invariance_residual()?;
    let lebesgue_tv = state.lebesgue_tv();
    println!("P = {:.6}, invariance residual {invariance_residual:.3e}, TV to Lebesgue {lebesgue_tv:.3e}", state.pressure);
    let g = state.grid();
    let rows: Vec<(usize, usize, f64)> = (0..g)
        .flat_map(|j| (0..g).map(move |i| (i, j)))
        .map(|(i, j)| (i, j, state.cell_mass(i, j)))
        .collect();
    write_csv(out, "equilibrium.csv", &["i", "j", "mass"], &rows)?;
    let ok = invariance_residual <= cfg.tolerance.invariance;
    emit(
        Command::Equilibrium,
        cfg,
        out,
        EquilibriumData {
            state,
            invariance_residual,
            lebesgue_tv,
        },
    )?;
    Ok(verdict(ok))
}

fn gibbs(cli: &Cli, cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let (sys, state) = build_state(cfg)?;
    let points: Vec<TorusPoint> = if cli.point.is_some() {
        vec![cli.point(&sys, [0.0, 0.0])?]
    } else {
        let mut rng = task_rng(cfg.seed, "gibbs");
        (0..5)
            .map(|_| TorusPoint::new2(rng.gen(), rng.gen()))
            .collect()
    };
    let ns: Vec<usize> = (4..=cfg.resolution.n_max).collect();
    let reports = points
        .iter()
        .map(|p| state.gibbs_ratio(p, cfg.epsilon.min(0.1), &ns))
        .collect::<Result<Vec<GibbsReport>>>()?;
    let mut rows = Vec::new();
    for r in &reports {
        println!(
            "({:.4}, {:.4}): K̂ = {:.3e}, range {:.3e}, c(ε) {:.3e}",
            r.point[0], r.point[1], r.k_hat, r.range, r.c_epsilon
        );
        rows.extend(
            r.n_values
                .iter()
                .zip(&r.r)
                .map(|(&n, &v)| (r.point[0], r.point[1], n, v)),
        );
    }
    write_csv(out, "gibbs.csv", &["x", "y", "n", "r_n"], &rows)?;
    emit(Command::Gibbs, cfg, out, reports)?;
    Ok(Outcome::Passed)
}

fn conditionals(cli: &Cli, cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let (sys, state) = build_state(cfg)?;
    let c = cli.point(&sys, [0.3, 0.4])?.coords();
    let spec = PlaquePartition {
        center: [c[0], c[1]],
        u_radius: 0.1,
        cells: 16,
        b0: 0.01,
        thickness: 2e-3,
    };
    let r: ConditionalReport = state.conditional_density_compare(&spec)?;
    println!(
        "deviation {:.3e}, arc-length deviation {:.3e}",
        r.deviation, r.arc_length_deviation
    );
    let rows: Vec<(usize, f64, f64)> = r
        .conditional
        .iter()
        .zip(&r.reference)
        .enumerate()
        .map(|(i, (&a, &b))| (i, a, b))
        .collect();
    write_csv(
        out,
        "conditionals.csv",
        &["cell", "conditional", "reference"],
        &rows,
    )?;
    emit(Command::Conditionals, cfg, out, (spec, r))?;
    Ok(Outcome::Passed)
}

#[derive(Debug, Serialize, serde::Deserialize)]
pub struct HorocycleData {
    pub params: CandidateParams,
    pub conformality_residual: f64,
    pub cross_route_tv: f64,
    pub uniqueness: UniquenessReport,
    pub leaf_product: Vec<f64>,
    pub reweighted_average: Vec<f64>,
}

fn horocycle(cli: &Cli, cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let sys = cfg.system()?;
    let phi = cfg.potential(&sys)?;
    let hf = HoroFlow::new(&sys)?;
    let params = CandidateParams {
        grid: cfg.resolution.grid,
        k: cfg.resolution.k,
        horizon: cfg.resolution.horizon,
        ..CandidateParams::default()
    };
    let leaf = build_conformal_candidate(&hf, &phi, Route::LeafProduct, &params)?;
    let residual = conformality_residual(&leaf, &hf, &phi, &[0.1, -0.3], 4)?;
    let avg = build_conformal_candidate(&hf, &phi, Route::ReweightedAverage, &params)?;
    let cross = tv_distance(&leaf.grid_masses, &avg.grid_masses);
    let mut rng = task_rng(cfg.seed, "horocycle");
    let seeds = [
        params.seed.clone(),
        Seed::AtomCloud {
            center: [rng.gen(), rng.gen()],
            count: 16,
            spread: 0.01,
            rng_seed: rng.gen(),
        },
    ];
    let uniqueness = uniqueness_gap(&hf, &phi, &seeds, params.horizon, params.grid)?;
    println!(
        "conformality residual {residual:.3e}, cross-route TV {cross:.3e}, cross-seed TV {:.3e}",
        uniqueness.gap
    );

    let x = cli.point(&sys, [0.3, 0.7])?.coords();
    let mut rows = Vec::new();
    let mut t = 10.0;
    while t <= params.horizon * (1.0 + 1e-12) {
        rows.push((t, equidistribution_error(&hf, [x[0], x[1]], t)));
        t *= 10f64.sqrt();
    }
    write_csv(out, "horocycle.csv", &["T", "sup_error"], &rows)?;

    let ok = residual <= cfg.tolerance.conformality;
    let data = HorocycleData {
        params,
        conformality_residual: residual,
        cross_route_tv: cross,
        uniqueness,
        leaf_product: leaf.grid_masses,
        reweighted_average: avg.grid_masses,
    };
    emit(Command::Horocycle, cfg, out, data)?;
    Ok(verdict(ok))
}

#[derive(Debug, Serialize, serde::Deserialize)]
pub struct JulienneRow {
    pub n: usize,
    pub mass: f64,
    pub ratio: f64,
}

#[derive(Debug, Serialize, serde::Deserialize)]
pub struct JulienneData {
    pub spec: JulienneSpec,
    pub band: [f64; 2],
    pub regions: Vec<JulienneRegion>,
    pub rows: Vec<JulienneRow>,
}

fn julienne_cmd(cli: &Cli, cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let (sys, state) = build_state(cfg)?;
    let x = cli.point(&sys, [0.37, 0.61])?;
    let spec = JulienneSpec {
        epsilon: cfg.epsilon,
        sigma: cfg.sigma,
        ..JulienneSpec::new(x, 0)
    };
    spec.validate()?;
    let band = [0.0, 0.5];
    let set = CellSet::band(cfg.resolution.grid, band[0], band[1]);
    let mut regions = Vec::new();
    let mut rows = Vec::new();
    for n in 0..=cfg.resolution.n_max {
        let s = spec.with_n(n);
        regions.push(julienne(&sys, &s, JulienneKind::Scu)?);
        let row = JulienneRow {
            n,
            mass: julienne_measure(&state, &s)?,
            ratio: density_ratio(&state, &set, &s)?,
        };
        println!(
            "n = {:2}: mass {:.6e}, density ratio {:.4}",
            row.n, row.mass, row.ratio
        );
        rows.push(row);
    }
    write_csv(out, "julienne.csv", &["n", "mass", "ratio"], &rows)?;
    emit(
        Command::Julienne,
        cfg,
        out,
        JulienneData {
            spec,
            band,
            regions,
            rows,
        },
    )?;
    Ok(Outcome::Passed)
}

fn verify_all(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let report: AcceptanceReport = acceptance::run_with(cfg.seed, |r, elapsed| {
        println!("{}", r.line());
        eprintln!("    {:.1} s", elapsed.as_secs_f64());
    });
    let mut text = report.lines().join("\n");
    text.push('\n');
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("verify-all.txt"), text)?;
    let ok = report.passed();
    emit(Command::VerifyAll, cfg, out, report)?;
    Ok(verdict(ok))
}
