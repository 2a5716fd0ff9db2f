mod config;
mod output;

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{ConfigError, RunConfig};
use output::{line_chart, OutDir, Series};
use polyshape::shape::{material_trace, shape_derivative_boundary, taylor_remainder, PairingBasis};
use polyshape::transmission::{
    assemble_sources, check_compatibility, delta_csv, delta_terms, solve_transmission, trace_comparison_csv, vertex_values,
};
use polyshape::verify::{moved_vertex, reconstruct, run_verification_campaign, synthetic_data, LogRow};
use polyshape::{gamma_roots, BoundaryFunction, Contrast, Model, Polygon};

#[derive(Parser)]
#[command(name = "polyshape", version, about = "Polygonal inclusions: forward solves, shape derivatives, verification, reconstruction")]
struct Cli {
    /// TOML run configuration; built-in defaults when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default: `out` in the config, else `./out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides `mesh.hmax`.
    #[arg(long, global = true)]
    hmax: Option<f64>,
    /// Overrides `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for the sparse solvers; falls back to POLYSHAPE_THREADS.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Also write SVG plots.
    #[arg(long, global = true)]
    svg: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Corner exponents for one opening angle.
    Gamma {
        /// Interior angle in radians.
        #[arg(long)]
        alpha: f64,
        /// Finite contrast; takes precedence over --contrast.
        #[arg(long)]
        k: Option<f64>,
        /// `insulating`, `conducting` or `unity`.
        #[arg(long)]
        contrast: Option<String>,
        #[arg(long, default_value_t = 2)]
        count: usize,
    },
    /// Forward solve; writes the boundary trace for each current.
    Forward,
    /// Material-derivative and pairing routes for the configured perturbation.
    ShapeDerivative,
    /// Enriched transmission solve with the integrability and delta diagnostics.
    Transmission,
    /// Second-order remainder table.
    Taylor,
    /// Leading corner coefficient and exponent at every vertex.
    CornerFit,
    /// Full verification campaign; exits 1 when a check fails.
    Verify,
    /// Gauss-Newton reconstruction from synthetic data.
    Reconstruct,
    /// Runs the subcommand named by `experiment` in the config.
    Run,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("numerical failure: {0}")]
    Numerical(#[from] polyshape::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

enum Outcome {
    Success,
    ChecksFailed,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::ChecksFailed) => ExitCode::from(1),
        Err(e @ (CliError::Usage(_) | CliError::Config(_))) => {
            eprintln!("error: {e}");
            eprintln!("usage: polyshape [--config FILE] [--out DIR] <COMMAND>; see --help");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    let threads = match cli.threads {
        Some(n) => Some(n),
        None => match std::env::var("POLYSHAPE_THREADS") {
            Ok(v) => Some(v.parse().map_err(|_| CliError::Usage(format!("POLYSHAPE_THREADS = `{v}` is not a count")))?),
            Err(_) => None,
        },
    };
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        polyshape::set_threads(n);
    }

    if let Command::Gamma { alpha, k, contrast, count } = &cli.command {
        let csv = gamma_table(*alpha, *k, contrast.as_deref(), *count)?;
        print!("{csv}");
        if let Some(dir) = &cli.out {
            OutDir::create(dir)?.write("gamma.csv", &csv)?;
        }
        return Ok(Outcome::Success);
    }

    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(h) = cli.hmax {
        cfg.mesh.hmax = h;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let command = match cli.command {
        Command::Run => experiment(&cfg)?,
        c => c,
    };
    let dir = cli.out.clone().or_else(|| cfg.out.as_ref().map(|p| cfg.base.join(p))).unwrap_or_else(|| PathBuf::from("out"));
    let mut out = OutDir::create(&dir)?;
    let result = dispatch(&command, &cfg, &mut out, cli.svg);
    if let Err(CliError::Numerical(e)) = &result {
        out.write("error.txt", &format!("{e}\n"))?;
    }
    let outcome = result?;
    for p in out.written() {
        println!("wrote {}", p.display());
    }
    Ok(outcome)
}

fn experiment(cfg: &RunConfig) -> Result<Command, CliError> {
    let name = cfg.experiment.as_deref().ok_or_else(|| CliError::Usage("`run` needs `experiment` in the config".into()))?;
    Ok(match name {
        "forward" => Command::Forward,
        "shape-derivative" => Command::ShapeDerivative,
        "transmission" => Command::Transmission,
        "taylor" => Command::Taylor,
        "corner-fit" => Command::CornerFit,
        "verify" => Command::Verify,
        "reconstruct" => Command::Reconstruct,
        other => return Err(CliError::Usage(format!("unknown experiment `{other}`"))),
    })
}

fn dispatch(command: &Command, cfg: &RunConfig, out: &mut OutDir, svg: bool) -> Result<Outcome, CliError> {
    match command {
        Command::Forward => forward(cfg, out, svg),
        Command::ShapeDerivative => shape_derivative(cfg, out, svg),
        Command::Transmission => transmission(cfg, out, svg),
        Command::Taylor => taylor(cfg, out, svg),
        Command::CornerFit => corner_fit(cfg, out),
        Command::Verify => verify(cfg, out),
        Command::Reconstruct => reconstruct_cmd(cfg, out, svg),
        Command::Gamma { .. } | Command::Run => unreachable!("handled before dispatch"),
    }
}

fn gamma_table(alpha: f64, k: Option<f64>, contrast: Option<&str>, count: usize) -> Result<String, CliError> {
    let c = match (k, contrast) {
        (Some(k), _) => Contrast::finite(k).map_err(|e| CliError::Usage(e.to_string()))?,
        (None, Some("insulating")) => Contrast::Insulating,
        (None, Some("conducting")) => Contrast::Conducting,
        (None, Some("unity")) => Contrast::Unity,
        (None, Some(other)) => return Err(CliError::Usage(format!("unknown contrast `{other}`"))),
        (None, None) => return Err(CliError::Usage("gamma needs --k or --contrast".into())),
    };
    // The trivial exponent 0 comes first and is not reported.
    let roots = gamma_roots(alpha, c, count + 1).map_err(|e| CliError::Usage(e.to_string()))?;
    let k_col = match c {
        Contrast::Finite(k) => k.to_string(),
        Contrast::Insulating => "0".into(),
        Contrast::Conducting => "inf".into(),
        Contrast::Unity => "1".into(),
    };
    let mut s = String::from("alpha,k");
    for j in 1..=count {
        let _ = write!(s, ",gamma{j}");
    }
    let _ = write!(s, "\n{alpha},{k_col}");
    for g in &roots[1..] {
        let _ = write!(s, ",{g:.12}");
    }
    s.push('\n');
    Ok(s)
}

fn model(cfg: &RunConfig) -> Result<Model, CliError> {
    let poly = cfg.polygon()?;
    Ok(Model::new(&poly, &cfg.omega(), cfg.contrast()?, &cfg.mesh_options())?)
}

fn chart_of(bf: &BoundaryFunction) -> Vec<(f64, f64)> {
    let mut p: Vec<(f64, f64)> = bf.arc_lengths().iter().copied().zip(bf.values().iter().copied()).collect();
    p.sort_by(|a, b| a.0.total_cmp(&b.0));
    p
}

fn forward(cfg: &RunConfig, out: &mut OutDir, svg: bool) -> Result<Outcome, CliError> {
    let m = model(cfg)?;
    let currents = cfg.currents(&m)?;
    let fields = m.solver().solve_forward_many(&currents.iter().map(|c| c.1.clone()).collect::<Vec<_>>())?;
    let traces: Vec<BoundaryFunction> = fields.iter().map(|u| m.trace(u)).collect();
    for ((label, _), t) in currents.iter().zip(&traces) {
        out.write(&format!("trace_{label}.csv"), &t.to_csv())?;
    }
    if svg {
        let series: Vec<Series> = currents.iter().zip(&traces).map(|((l, _), t)| Series { label: l, points: chart_of(t) }).collect();
        out.write("traces.svg", &line_chart("Boundary traces", "arc length", "potential", &series, false))?;
    }
    Ok(Outcome::Success)
}

fn shape_derivative(cfg: &RunConfig, out: &mut OutDir, svg: bool) -> Result<Outcome, CliError> {
    let m = model(cfg)?;
    let h = cfg.perturbation(m.polygon())?;
    let basis = PairingBasis::new(&m, cfg.transmission.basis_modes)?;
    let mut summary = String::from("current,material_norm,pairing_norm,relative_distance\n");
    for (label, f) in cfg.currents(&m)? {
        let u = m.forward(&f)?;
        let material = material_trace(&m, &u, &h)?;
        let pairing = shape_derivative_boundary(&m, &h, &m.traces(&u)?, &basis)?;
        let mut s = String::from("arc_length,material,pairing\n");
        let (pm, pp) = (chart_of(&material), chart_of(&pairing.resampled_onto(&material, m.omega().boundary_length())));
        for (a, b) in pm.iter().zip(&pp) {
            let _ = writeln!(s, "{:.12e},{:.12e},{:.12e}", a.0, a.1, b.1);
        }
        out.write(&format!("derivative_{label}.csv"), &s)?;
        let _ = writeln!(summary, "{label},{:.12e},{:.12e},{:.6e}", material.norm(), pairing.norm(), material.relative_distance(&pairing));
        if svg {
            let series = [Series { label: "material", points: pm }, Series { label: "pairing", points: pp }];
            out.write(&format!("derivative_{label}.svg"), &line_chart("Boundary shape derivative", "arc length", "value", &series, false))?;
        }
    }
    out.write("derivative_summary.csv", &summary)?;
    Ok(Outcome::Success)
}

fn transmission(cfg: &RunConfig, out: &mut OutDir, svg: bool) -> Result<Outcome, CliError> {
    let m = model(cfg)?;
    if !matches!(m.contrast(), Contrast::Finite(_)) {
        return Err(CliError::Usage("transmission needs a finite contrast".into()));
    }
    let h = cfg.perturbation(m.polygon())?;
    let (label, f) = cfg.currents(&m)?.remove(0);
    let u = m.forward(&f)?;
    let betas = m.betas(&u)?;
    let sources = assemble_sources(&m, &u, &h, &betas)?;
    let w = solve_transmission(&m, &sources)?;
    let material = material_trace(&m, &u, &h)?;
    let basis = PairingBasis::new(&m, cfg.transmission.basis_modes)?;
    let pairing = shape_derivative_boundary(&m, &h, &m.traces(&u)?, &basis)?;
    out.write(&format!("trace_comparison_{label}.csv"), &trace_comparison_csv(&w.trace, &material, &pairing))?;

    let deltas = &cfg.transmission.deltas;
    let compat = check_compatibility(&m, &u, &h, &sources, &betas, deltas)?;
    let mut s = String::from("delta,edge_term,singular_term,residual\n");
    for r in &compat {
        let _ = writeln!(s, "{},{:.12e},{:.12e},{:.12e}", r.delta, r.edge_term, r.singular_term, r.residual());
    }
    out.write("compatibility.csv", &s)?;

    let (pm, ps) = config::parse_mode(&cfg.transmission.probe)?;
    let v = m.forward(&m.fourier(pm, ps))?;
    let rows = delta_terms(&sources.singular, &vertex_values(&m, &v)?, deltas);
    out.write("delta.csv", &delta_csv(&rows))?;
    if svg {
        let series = [
            Series { label: "|residual|", points: compat.iter().map(|r| (r.delta, r.residual().abs())).collect() },
            Series { label: "|edge term|", points: compat.iter().map(|r| (r.delta, r.edge_term.abs())).collect() },
        ];
        out.write("compatibility.svg", &line_chart("Integrability residual", "delta / R", "magnitude", &series, true))?;
    }
    Ok(Outcome::Success)
}

fn taylor(cfg: &RunConfig, out: &mut OutDir, svg: bool) -> Result<Outcome, CliError> {
    let m = model(cfg)?;
    let h = cfg.perturbation(m.polygon())?;
    let (label, f) = cfg.currents(&m)?.remove(0);
    let study = taylor_remainder(&m, &f, &h, &cfg.taylor.t)?;
    out.write(&format!("taylor_{label}.csv"), &study.to_csv())?;
    println!("slope {:.4}", study.slope);
    if svg {
        let pts = study.rows.iter().map(|r| (r.t, r.remainder)).collect();
        out.write("taylor.svg", &line_chart("Taylor remainder", "t", "remainder", &[Series { label: "remainder", points: pts }], true))?;
    }
    Ok(Outcome::Success)
}

fn corner_fit(cfg: &RunConfig, out: &mut OutDir) -> Result<Outcome, CliError> {
    let m = model(cfg)?;
    let (_, f) = cfg.currents(&m)?.remove(0);
    let u = m.forward(&f)?;
    let fits = m.corner_fits(&u)?;
    let mut s = String::from("vertex,alpha,gamma1,gamma_hat,beta_hat,beta_linear,residual,beta_spread\n");
    if let Some(spec) = m.spectrum() {
        for fit in &fits {
            let vs = spec.vertex(fit.vertex);
            let _ = writeln!(
                s,
                "{},{:.12},{:.12},{:.12},{:.12e},{:.12e},{:.6e},{:.6}",
                fit.vertex,
                m.polygon().angle(fit.vertex),
                vs.gamma[1],
                fit.gamma_hat,
                fit.beta_hat,
                fit.beta_linear,
                fit.residual,
                fit.beta_spread(vs.gamma[1])
            );
        }
    }
    out.write("corner_fit.csv", &s)?;
    Ok(Outcome::Success)
}

fn verify(cfg: &RunConfig, out: &mut OutDir) -> Result<Outcome, CliError> {
    let report = run_verification_campaign(&cfg.campaign()?)?;
    let text = report.to_text();
    out.write("report.txt", &text)?;
    print!("{text}");
    Ok(if report.passed() { Outcome::Success } else { Outcome::ChecksFailed })
}

fn reconstruct_cmd(cfg: &RunConfig, out: &mut OutDir, svg: bool) -> Result<Outcome, CliError> {
    let omega = cfg.omega();
    let contrast = cfg.contrast()?;
    let initial = cfg.polygon()?;
    let truth = cfg.truth().unwrap_or_else(|| moved_vertex(&initial, 0, 0.03));
    let truth_poly = Polygon::new(&truth, &omega)?;
    let modes = if cfg.current.file.is_some() {
        return Err(CliError::Usage("reconstruct uses Fourier currents; drop current.file".into()));
    } else {
        cfg.modes()
    };
    // Data on a mesh twice as fine with a different seed.
    let data_mesh = cfg.mesh_options();
    let data_mesh = polyshape::MeshOptions { hmax: data_mesh.hmax / 2.0, seed: cfg.seed + 1, ..data_mesh };
    let data = synthetic_data(&truth_poly, &omega, contrast, &modes, &data_mesh, cfg.reconstruct.noise, cfg.seed + 1)?;
    let state = reconstruct(&data, &initial, &omega, contrast, &cfg.recon_options())?;
    out.write("recon_log.csv", &state.log_csv())?;
    let mut s = String::from("vertex,x,y,truth_x,truth_y,initial_x,initial_y\n");
    for (i, ((p, t), q)) in state.vertices.iter().zip(&truth).zip(initial.vertices()).enumerate() {
        let _ = writeln!(s, "{i},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}", p.x, p.y, t.x, t.y, q.x, q.y);
    }
    out.write("recon_vertices.csv", &s)?;
    println!("stop {:?}, residual {:.6e}, max vertex error {:.6e}", state.stop, state.residual, state.max_vertex_error(&truth));
    if svg {
        let pts = state.log.iter().map(|r: &LogRow| (r.iter as f64 + 1.0, r.residual)).collect();
        out.write("recon_residual.svg", &line_chart("Reconstruction residual", "iteration + 1", "residual", &[Series { label: "residual", points: pts }], true))?;
    }
    Ok(Outcome::Success)
}
