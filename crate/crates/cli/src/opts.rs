use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug)]
#[command(name = "kahler-tube", version, about = "Curvature and optimal-transport diagnostics for convex potentials on tube domains")]
pub struct Cli {
    #[command(flatten)]
    pub opts: Opts,
    #[command(subcommand)]
    pub group: Option<Group>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
pub enum Group {
    /// Radial potentials: coefficient profiles, (NOAB), completeness, flatness.
    Radial {
        #[command(subcommand)]
        cmd: RadialCmd,
    },
    /// Pointwise and sampled curvature.
    Curvature {
        #[command(subcommand)]
        cmd: CurvatureCmd,
    },
    /// Ψ-costs: MTW tensor, c-segments, c-convexity, QQConv.
    Transport {
        #[command(subcommand)]
        cmd: TransportCmd,
    },
    /// Geodesics and ball convexity.
    Geodesy {
        #[command(subcommand)]
        cmd: GeodesyCmd,
    },
    /// Closed-form examples.
    Verify {
        #[command(subcommand)]
        cmd: VerifyCmd,
    },
}

#[derive(Subcommand, Debug, Clone, Copy)]
pub enum RadialCmd {
    Analyze,
    Noab,
    Completeness,
    Flatness,
}

#[derive(Subcommand, Debug, Clone, Copy)]
pub enum CurvatureCmd {
    Tensor,
    SampleNab,
    Ricci,
    SyntheticRicci,
}

#[derive(Subcommand, Debug, Clone, Copy)]
pub enum TransportCmd {
    Mtw,
    Qqconv,
    Cseg,
    Cconvexity,
    Synthetic,
}

#[derive(Subcommand, Debug, Clone, Copy)]
pub enum GeodesyCmd {
    Shoot,
    Ball,
    DualBall,
    Scale,
}

#[derive(Subcommand, Debug, Clone, Copy)]
pub enum VerifyCmd {
    Example1,
    Example2,
    AppendixA,
}

impl Group {
    pub fn name(&self) -> &'static str {
        match self {
            Group::Radial { cmd } => match cmd {
                RadialCmd::Analyze => "radial analyze",
                RadialCmd::Noab => "radial noab",
                RadialCmd::Completeness => "radial completeness",
                RadialCmd::Flatness => "radial flatness",
            },
            Group::Curvature { cmd } => match cmd {
                CurvatureCmd::Tensor => "curvature tensor",
                CurvatureCmd::SampleNab => "curvature sample-nab",
                CurvatureCmd::Ricci => "curvature ricci",
                CurvatureCmd::SyntheticRicci => "curvature synthetic-ricci",
            },
            Group::Transport { cmd } => match cmd {
                TransportCmd::Mtw => "transport mtw",
                TransportCmd::Qqconv => "transport qqconv",
                TransportCmd::Cseg => "transport cseg",
                TransportCmd::Cconvexity => "transport cconvexity",
                TransportCmd::Synthetic => "transport synthetic",
            },
            Group::Geodesy { cmd } => match cmd {
                GeodesyCmd::Shoot => "geodesy shoot",
                GeodesyCmd::Ball => "geodesy ball",
                GeodesyCmd::DualBall => "geodesy dual-ball",
                GeodesyCmd::Scale => "geodesy scale",
            },
            Group::Verify { cmd } => match cmd {
                VerifyCmd::Example1 => "verify example1",
                VerifyCmd::Example2 => "verify example2",
                VerifyCmd::AppendixA => "verify appendix-a",
            },
        }
    }
}

/// Flags, also the schema of `--config` files. Flags override the file.
#[derive(Args, Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Opts {
    /// Potential spec, e.g. `ell-affine(1)`, `radial-power(4)`, `exp(x0) + x1^2@a=2`.
    #[arg(long, global = true)]
    pub potential: Option<String>,
    #[arg(long, global = true)]
    pub dim: Option<usize>,
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Number of radii in radial and example grids.
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// Largest radius of radial and example grids.
    #[arg(long, global = true)]
    #[serde(alias = "r-max")]
    pub r_max: Option<f64>,
    /// Half-width of the sampling region on unbounded domains.
    #[arg(long, global = true)]
    pub extent: Option<f64>,
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Write curve data (profiles, paths) as CSV.
    #[arg(long, global = true)]
    pub csv: Option<PathBuf>,
    /// Re-evaluate the witnesses of a saved report.
    #[arg(long, global = true)]
    pub replay: Option<PathBuf>,
    /// JSON file with any of these options.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub point: Option<Vec<f64>>,
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub u: Option<Vec<f64>>,
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub v: Option<Vec<f64>>,
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub y: Option<Vec<f64>>,
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub y0: Option<Vec<f64>>,
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub y1: Option<Vec<f64>>,
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub x1: Option<Vec<f64>>,

    #[arg(long, global = true)]
    pub eps: Option<f64>,
    /// Upper end of an ε search.
    #[arg(long, global = true)]
    #[serde(alias = "eps-max")]
    pub eps_max: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub kappa: Option<f64>,
    #[arg(long, global = true)]
    pub t: Option<f64>,
    #[arg(long, global = true)]
    pub length: Option<f64>,
    #[arg(long, global = true)]
    pub step: Option<f64>,
    #[arg(long, global = true)]
    pub r: Option<f64>,
    #[arg(long, global = true)]
    pub c: Option<f64>,
    /// `lower|upper` for Ricci bounds, `y|x` for c-segments.
    #[arg(long, global = true)]
    pub side: Option<String>,
    /// `nab|noab`.
    #[arg(long, global = true)]
    pub mode: Option<String>,
    #[arg(long, global = true)]
    pub points: Option<usize>,
    #[arg(long, global = true)]
    pub pairs: Option<usize>,
    #[arg(long, global = true)]
    pub samples: Option<usize>,
}

macro_rules! overlay {
    ($lo:expr, $hi:expr, $($f:ident),*) => {
        Opts { $($f: $hi.$f.or($lo.$f)),* }
    };
}

impl Opts {
    /// `self` over `base`.
    pub fn over(self, base: Opts) -> Opts {
        overlay!(
            base, self, potential, dim, tol, seed, grid, r_max, extent, out, csv, replay, config, point, u, v, y, y0, y1, x1, eps,
            eps_max, kappa, t, length, step, r, c, side, mode, points, pairs, samples
        )
    }
}

/// Fully resolved settings, echoed in every report and read back by `--replay`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub potential: Option<String>,
    pub dim: usize,
    pub tol: f64,
    pub seed: u64,
    pub grid: usize,
    pub r_max: f64,
    pub extent: f64,
    pub point: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub y: Vec<f64>,
    pub y0: Vec<f64>,
    pub y1: Vec<f64>,
    pub x1: Vec<f64>,
    pub eps: f64,
    pub eps_max: Option<f64>,
    pub kappa: Option<f64>,
    pub t: f64,
    pub length: f64,
    pub step: f64,
    pub r: f64,
    pub c: f64,
    pub side: String,
    pub mode: String,
    pub points: usize,
    pub pairs: usize,
    pub samples: usize,
}

fn axis(n: usize, i: usize, s: f64) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[i.min(n - 1)] = s;
    e
}

impl RunConfig {
    /// Fill defaults, some of which depend on the command.
    pub fn resolve(o: &Opts, command: &str) -> Result<RunConfig, String> {
        let n = o.dim.unwrap_or(3);
        if n == 0 {
            return Err("--dim must be positive".into());
        }
        let ball_test = matches!(command, "geodesy ball" | "geodesy dual-ball" | "transport cconvexity");
        let point = o.point.clone().unwrap_or_else(|| vec![0.5; n]);
        let plus = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p + q).collect::<Vec<f64>>();
        let side = o.side.clone().unwrap_or_else(|| if command == "transport cseg" { "y".into() } else { "lower".into() });
        let default_points = match command {
            "curvature synthetic-ricci" => 50,
            "geodesy scale" => 16,
            _ if ball_test => kahler_tube::geodesy::default_direction_count(n),
            _ => 256,
        };
        let cfg = RunConfig {
            potential: o.potential.clone(),
            dim: n,
            tol: o.tol.unwrap_or(if ball_test { 1e-6 } else { 1e-9 }),
            seed: o.seed.unwrap_or(0),
            grid: o.grid.unwrap_or(512),
            r_max: o.r_max.unwrap_or(1e3),
            extent: o.extent.unwrap_or(2.0),
            u: o.u.clone().unwrap_or_else(|| axis(n, 0, 1.0)),
            v: o.v.clone().unwrap_or_else(|| axis(n, 1, 1.0)),
            y: o.y.clone().unwrap_or_else(|| vec![0.0; n]),
            y0: o.y0.clone().unwrap_or_else(|| vec![0.0; n]),
            y1: o.y1.clone().unwrap_or_else(|| axis(n, 1, 0.1)),
            x1: o.x1.clone().unwrap_or_else(|| plus(&point, &axis(n, 1, 0.1))),
            point,
            eps: o.eps.unwrap_or(if command.starts_with("geodesy") { 0.05 } else { 0.1 }),
            eps_max: o.eps_max,
            kappa: o.kappa,
            t: o.t.unwrap_or(0.5),
            length: o.length.unwrap_or(1.0),
            step: o.step.unwrap_or(0.01),
            r: o.r.unwrap_or(0.1),
            c: o.c.unwrap_or(if command == "verify example1" { 1.0 } else { 3.0 }),
            side,
            mode: o.mode.clone().unwrap_or_else(|| "noab".into()),
            points: o.points.unwrap_or(default_points),
            pairs: o.pairs.unwrap_or(if command == "transport synthetic" { 16 } else { 64 }),
            samples: o.samples.unwrap_or(if command == "transport cconvexity" { 4 } else { 32 }),
        };
        for (name, vec) in [("point", &cfg.point), ("u", &cfg.u), ("v", &cfg.v), ("y", &cfg.y), ("y0", &cfg.y0), ("y1", &cfg.y1), ("x1", &cfg.x1)] {
            if vec.len() != n {
                return Err(format!("--{name} has {} entries, expected {n}", vec.len()));
            }
        }
        if !["lower", "upper", "x", "y"].contains(&cfg.side.as_str()) {
            return Err(format!("unknown --side {:?}", cfg.side));
        }
        if !["nab", "noab"].contains(&cfg.mode.as_str()) {
            return Err(format!("unknown --mode {:?}", cfg.mode));
        }
        Ok(cfg)
    }
}
