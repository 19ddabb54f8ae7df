mod config;

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;

use kgwave::acceptance::{criteria, AcceptanceOptions};
use kgwave::curves::{gamma_curves, trace_phi1, CurvePolyline};
use kgwave::decay::{log_grid, verify_regions, write_region_csv};
use kgwave::propagator::{KernelEngine, Window};
use kgwave::quantum::{lr_verify, write_lr_csv, ComplexLatticeFunction};
use kgwave::singular::{find_astar, kstar_points};
use kgwave::velocity::{psi_curves, VelocityAtlas};
use kgwave::{Error, Params};

use config::{ConfigError, RunConfig};

#[derive(Parser)]
#[command(name = "kgwave", version, about = "Discrete Klein-Gordon propagators on the square lattice")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    #[arg(long, global = true)]
    omega: Option<f64>,
    #[arg(long, global = true)]
    lambda1: Option<f64>,
    #[arg(long, global = true)]
    lambda2: Option<f64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Flat key=value file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Largest quadrature grid side.
    #[arg(long, global = true)]
    max_grid: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Degenerate curves, special points and a velocity-region raster.
    Geometry {
        #[arg(long)]
        n_points: Option<usize>,
        /// Raster side in the velocity plane.
        #[arg(long)]
        raster: Option<usize>,
    },
    /// One propagator kernel on the square window |x|_inf <= radius.
    Kernels {
        #[arg(long)]
        t: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        m: Option<i32>,
        #[arg(long)]
        radius: Option<i64>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Decay fits for one velocity per region.
    Decay {
        #[arg(long, allow_hyphen_values = true)]
        m: Option<i32>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        t_min: Option<f64>,
        #[arg(long)]
        t_max: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Weyl commutator norms for f = delta_x and g = i delta_y.
    Quantum {
        #[arg(long, value_parser = parse_site, allow_hyphen_values = true, default_value = "0,0")]
        f_site: [i64; 2],
        #[arg(long, value_parser = parse_site, allow_hyphen_values = true, default_value = "0,0")]
        g_site: [i64; 2],
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        t_min: Option<f64>,
        #[arg(long)]
        t_max: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// The acceptance suite.
    Acceptance {
        /// Print the criteria without running them.
        #[arg(long)]
        list: bool,
        /// Run only these criteria.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u32>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Binary,
}

fn parse_site(s: &str) -> Result<[i64; 2], String> {
    let (a, b) = s.split_once(',').ok_or("expected x1,x2")?;
    let p = |v: &str| v.trim().parse::<i64>().map_err(|e| e.to_string());
    Ok([p(a)?, p(b)?])
}

enum Failure {
    Config(String),
    Numeric(Error),
    Other(String),
    Acceptance(usize),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParams(s) => Failure::Config(s),
            Error::Io(e) => Failure::Other(e.to_string()),
            e => Failure::Numeric(e),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Other(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(s)) => {
            eprintln!("config error: {s}");
            ExitCode::from(2)
        }
        Err(Failure::Numeric(e)) => {
            eprintln!("numeric error: {e}");
            ExitCode::from(3)
        }
        Err(Failure::Acceptance(n)) => {
            eprintln!("{n} criteria failed");
            ExitCode::from(4)
        }
        Err(Failure::Other(s)) => {
            eprintln!("error: {s}");
            ExitCode::from(1)
        }
    }
}

fn overrides(cli: &Cli) -> BTreeMap<&'static str, String> {
    let mut o = BTreeMap::new();
    let mut put = |k: &'static str, v: Option<String>| {
        if let Some(v) = v {
            o.insert(k, v);
        }
    };
    let c = &cli.common;
    put("omega", c.omega.map(|v| v.to_string()));
    put("lambda1", c.lambda1.map(|v| v.to_string()));
    put("lambda2", c.lambda2.map(|v| v.to_string()));
    put("out", c.out.as_ref().map(|v| v.display().to_string()));
    put("workers", c.workers.map(|v| v.to_string()));
    put("max_grid", c.max_grid.map(|v| v.to_string()));
    match &cli.command {
        Command::Geometry { n_points, raster } => {
            put("n_points", n_points.map(|v| v.to_string()));
            put("raster", raster.map(|v| v.to_string()));
        }
        Command::Kernels { t, m, radius, .. } => {
            put("t", t.map(|v| v.to_string()));
            put("m", m.map(|v| v.to_string()));
            put("radius", radius.map(|v| v.to_string()));
        }
        Command::Decay { m, delta, t_min, t_max, samples } => {
            put("m", m.map(|v| v.to_string()));
            put("delta", delta.map(|v| v.to_string()));
            put("t_min", t_min.map(|v| v.to_string()));
            put("t_max", t_max.map(|v| v.to_string()));
            put("samples", samples.map(|v| v.to_string()));
        }
        Command::Quantum { delta, t_min, t_max, samples, .. } => {
            put("delta", delta.map(|v| v.to_string()));
            put("t_min", t_min.map(|v| v.to_string()));
            put("t_max", t_max.map(|v| v.to_string()));
            put("samples", samples.map(|v| v.to_string()));
        }
        Command::Acceptance { .. } => {}
    }
    o
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.common.config {
        cfg.apply_file(path)?;
    }
    cfg.apply_overrides(&overrides(&cli))?;
    let params = cfg.validate()?;
    if let Some(n) = cfg.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Other(e.to_string()))?;
    }
    match cli.command {
        Command::Geometry { .. } => geometry(&cfg, &params),
        Command::Kernels { format, .. } => kernels(&cfg, &params, format),
        Command::Decay { .. } => decay(&cfg, &params),
        Command::Quantum { f_site, g_site, .. } => quantum(&cfg, &params, f_site, g_site),
        Command::Acceptance { list, only } => acceptance(&cfg, list, &only),
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, Failure> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn engine(cfg: &RunConfig, p: &Params) -> KernelEngine {
    KernelEngine::new(*p).with_max_grid(cfg.max_grid)
}

fn geometry(cfg: &RunConfig, p: &Params) -> Result<(), Failure> {
    let n = cfg.n_points;
    let mut curves: Vec<CurvePolyline> = gamma_curves(p, n)?;
    let (origin_loop, pi_loop) = trace_phi1(p, n)?;
    let (psi1, psi2) = psi_curves(p, n)?;
    curves.extend([origin_loop, pi_loop, psi1, psi2]);
    let mut w = create(&cfg.out, "curves.csv")?;
    writeln!(w, "label,index,c1,c2")?;
    for c in &curves {
        for (i, q) in c.points.iter().enumerate() {
            writeln!(w, "{},{i},{:.16e},{:.16e}", c.label, q[0], q[1])?;
        }
    }
    w.flush()?;

    let s = find_astar(p)?;
    let mut w = create(&cfg.out, "astar.csv")?;
    writeln!(w, "a,b\n{:.16e},{:.16e}", s.a, s.b)?;
    w.flush()?;

    let mut w = create(&cfg.out, "kstar.csv")?;
    writeln!(w, "k1,k2")?;
    for k in kstar_points(p)? {
        writeln!(w, "{:.16e},{:.16e}", k.k1, k.k2)?;
    }
    w.flush()?;

    let atlas = VelocityAtlas::new(p, n)?;
    let mut w = create(&cfg.out, "v3.csv")?;
    writeln!(w, "v1,v2")?;
    for v in atlas.v3 {
        writeln!(w, "{:.16e},{:.16e}", v[0], v[1])?;
    }
    w.flush()?;

    let r = 1.25 * atlas.max_speed;
    let side = cfg.raster;
    let mut w = create(&cfg.out, "regions.csv")?;
    writeln!(w, "v1,v2,region")?;
    for i in 0..side {
        let v1 = -r + 2.0 * r * i as f64 / (side - 1) as f64;
        for j in 0..side {
            let v2 = -r + 2.0 * r * j as f64 / (side - 1) as f64;
            writeln!(w, "{v1:.16e},{v2:.16e},{}", atlas.classify([v1, v2], cfg.delta).region.name())?;
        }
    }
    w.flush()?;
    println!("wrote {} curves, {} raster points to {}", curves.len(), side * side, cfg.out.display());
    Ok(())
}

fn kernels(cfg: &RunConfig, p: &Params, format: Format) -> Result<(), Failure> {
    let field = engine(cfg, p).field(cfg.m, cfg.t, Window::square(cfg.radius))?;
    let name = format!("kernel_m{}", cfg.m);
    match format {
        Format::Csv => {
            let mut w = create(&cfg.out, &format!("{name}.csv"))?;
            field.write_csv(&mut w)?;
            w.flush()?;
        }
        Format::Binary => {
            let mut w = create(&cfg.out, &format!("{name}.bin"))?;
            field.write_binary(&mut w)?;
            w.flush()?;
        }
    }
    println!("m = {}, t = {}: grid {}, max |H| = {:.6e}", cfg.m, cfg.t, field.grid_n, field.max_abs());
    Ok(())
}

fn decay(cfg: &RunConfig, p: &Params) -> Result<(), Failure> {
    let atlas = VelocityAtlas::new(p, cfg.n_points)?;
    let grid = log_grid(cfg.t_min, cfg.t_max, cfg.samples);
    let rows = verify_regions(&engine(cfg, p), &atlas, cfg.delta, &grid, cfg.m)?;
    let mut w = create(&cfg.out, "regions_fit.csv")?;
    write_region_csv(&rows, &mut w)?;
    w.flush()?;
    for r in &rows {
        println!(
            "{:<9} v = ({:+.4}, {:+.4}) {:<9} exponent {:+.4} +- {:.4} bound {}",
            r.label,
            r.velocity[0],
            r.velocity[1],
            r.region.name(),
            r.fit.exponent,
            r.fit.ci_halfwidth,
            if r.bound_satisfied { "holds" } else { "violated" }
        );
    }
    Ok(())
}

fn quantum(cfg: &RunConfig, p: &Params, f_site: [i64; 2], g_site: [i64; 2]) -> Result<(), Failure> {
    let atlas = VelocityAtlas::new(p, cfg.n_points)?;
    let f = ComplexLatticeFunction::delta(f_site, Complex64::new(1.0, 0.0));
    let g = ComplexLatticeFunction::delta(g_site, Complex64::new(0.0, 1.0));
    let grid = log_grid(cfg.t_min, cfg.t_max, cfg.samples);
    let report = lr_verify(&engine(cfg, p), &atlas, &f, &g, &grid, cfg.delta)?;
    let mut w = create(&cfg.out, "lr.csv")?;
    write_lr_csv(&report, &mut w)?;
    w.flush()?;
    match &report.fit {
        Some(fit) => println!("envelope exponent {:+.4} +- {:.4}", fit.exponent, fit.ci_halfwidth),
        None => println!("too few dyadic windows for an envelope fit"),
    }
    println!("bounds {}", if report.passed { "hold" } else { "violated" });
    Ok(())
}

fn acceptance(cfg: &RunConfig, list: bool, only: &[u32]) -> Result<(), Failure> {
    let all = criteria();
    if let Some(id) = only.iter().find(|id| !all.iter().any(|c| c.id == **id)) {
        return Err(Failure::Config(format!("no criterion {id}")));
    }
    let chosen: Vec<_> = all.iter().filter(|c| only.is_empty() || only.contains(&c.id)).collect();
    if list {
        for c in chosen {
            println!("{:>2} {} (budget {} s)", c.id, c.name, c.budget.as_secs());
        }
        return Ok(());
    }
    let opts = AcceptanceOptions { max_grid: cfg.max_grid };
    let mut failed = 0;
    for c in chosen {
        let r = c.run(&opts);
        println!("{r}");
        failed += usize::from(!r.passed);
    }
    if failed > 0 {
        return Err(Failure::Acceptance(failed));
    }
    Ok(())
}
