use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use otlab::emit::{write_csv, Format};
use otlab::{calibrate_constant, emit_reports, init_threads, read_reports, run_all, Scenario};
use otlab_core::analysis::{c1_modulus_eval, corollary_flat_bound, duality_gap_bound_check, gamma_lower_bound, main_bound_check, max_flat_diameter};
use otlab_core::appendix::{affine_flat_bound, fischer_pipeline_check, heinz_check_2d, varphi_profile, FischerQuery, GridFunction, HeinzQuery};
use otlab_core::hall::{check_hall, construct_plan, find_permutation, SupportGraph};
use otlab_core::integral::{displacement_integral, normalize_frame};
use otlab_core::io::{PlanJson, PwlJson};
use otlab_core::measures::WeightedPointCloud;
use otlab_core::rational::{parse_q, QS};
use otlab_core::report::{BoundParams, BoundReport, Verdict};
use otlab_core::transport::{extract_potential, solve_ot, verify_dual_side, verify_onesided};
use otlab_core::{Point2, PwlFunction, Rect};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "otlab", version, about = "Exact discrete transport and flatness checks")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Optimal plan and potential between two measures.
    Solve {
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        nu: PathBuf,
        #[arg(long)]
        plan: Option<PathBuf>,
        #[arg(long)]
        potential: Option<PathBuf>,
    },
    /// One-sided and dual-side mass inequalities for a potential.
    Verify {
        #[arg(long)]
        potential: PathBuf,
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        nu: PathBuf,
        /// `x0,x1,y0,y1`; the source bounding box by default.
        #[arg(long)]
        omega: Option<String>,
        /// `x0,x1,y0,y1`; the target bounding box by default.
        #[arg(long)]
        lambda: Option<String>,
    },
    /// Longest flat segment between hull samples.
    FlatScan {
        #[arg(long)]
        potential: PathBuf,
        #[arg(long)]
        region: Option<String>,
        #[arg(long, default_value_t = 0.0)]
        tol: f64,
    },
    /// Evaluates one inequality from a parameter file.
    BoundCheck {
        #[arg(long, value_enum)]
        inequality: Inequality,
        #[arg(long)]
        params: PathBuf,
        /// Potential for `duality`.
        #[arg(long)]
        potential: Option<PathBuf>,
    },
    /// Hall condition, permutation, or a plan on a support graph.
    Hall {
        /// Support graph JSON or a 0/1 matrix.
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long, conflicts_with = "check")]
        permute: bool,
        #[arg(long)]
        check: bool,
        /// With `--nu`, builds a plan with the given marginals.
        #[arg(long, requires = "nu")]
        mu: Option<PathBuf>,
        #[arg(long, requires = "mu")]
        nu: Option<PathBuf>,
    },
    /// Displacement integral of the segment `x`–`y`.
    Integral {
        #[arg(long)]
        potential: PathBuf,
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
        #[arg(long)]
        delta: String,
        #[arg(long)]
        gamma: f64,
    },
    /// Higher-dimensional and planar convexity oracles.
    Appendix {
        #[arg(long, value_enum)]
        check: AppendixCheck,
        #[arg(long)]
        params: PathBuf,
    },
    /// Runs scenarios end to end.
    Run {
        #[arg(long, required = true, num_args = 1..)]
        scenario: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Smallest constant making an inequality hold on the scenarios.
    Calibrate {
        #[arg(long, required = true, num_args = 1..)]
        scenario: Vec<PathBuf>,
        #[arg(long, value_enum)]
        inequality: Family,
    },
    /// Converts saved run reports.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Inequality {
    Main,
    Flat,
    GammaLower,
    C1,
    Duality,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Main,
    Flat,
    Upper,
    Lower,
}

impl Family {
    fn name(self) -> &'static str {
        match self {
            Family::Main => "main",
            Family::Flat => "flat",
            Family::Upper => "upper",
            Family::Lower => "lower",
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AppendixCheck {
    Heinz2d,
    Varphi,
    Affine,
    Fischer,
}

#[derive(Deserialize)]
struct BoundInput {
    #[serde(flatten)]
    params: BoundParams,
    #[serde(default)]
    dz: Option<f64>,
    #[serde(default)]
    x: Option<[QS; 2]>,
    #[serde(default)]
    x2: Option<[QS; 2]>,
    #[serde(default)]
    z: Option<[QS; 2]>,
    #[serde(default)]
    z2: Option<[QS; 2]>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum GraphInput {
    Graph(SupportGraph),
    Matrix(Vec<Vec<u8>>),
}

/// A grid function given explicitly or as `a|x|²/2` on `[−r, r]ⁿ`.
#[derive(Deserialize)]
#[serde(untagged)]
enum FunctionInput {
    Grid { grid: GridFunction },
    Quadratic { quadratic: f64, n: usize, m: usize, r: f64 },
}

impl FunctionInput {
    fn grid(&self) -> Result<GridFunction> {
        Ok(match self {
            FunctionInput::Grid { grid } => grid.clone(),
            FunctionInput::Quadratic { quadratic, n, m, r } => {
                let a = *quadratic;
                GridFunction::centered(*n, *m, *r, |x| a * x.iter().map(|v| v * v).sum::<f64>() / 2.0)?
            }
        })
    }
}

#[derive(Deserialize)]
struct HeinzInput {
    function: FunctionInput,
    query: HeinzQuery,
}

#[derive(Deserialize)]
struct FischerInput {
    function: FunctionInput,
    query: FischerQuery,
}

#[derive(Deserialize)]
struct VarphiInput {
    n: usize,
    d: usize,
    s: Vec<f64>,
}

#[derive(Deserialize)]
struct AffineInput {
    n: usize,
    d: usize,
    ell: f64,
    delta: f64,
    lambda: f64,
    grad_inf: f64,
    c: f64,
}

#[derive(Serialize)]
struct IntegralOutput {
    ell: QS,
    eps: QS,
    gamma: f64,
    integral: f64,
}

fn read_json<T: DeserializeOwned>(p: &Path) -> Result<T> {
    let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))
}

fn write_json<T: Serialize>(p: Option<&Path>, v: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(v)?;
    match p {
        Some(p) => std::fs::write(p, text + "\n").with_context(|| format!("writing {}", p.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn read_potential(p: &Path) -> Result<PwlFunction> {
    Ok(read_json::<PwlJson>(p)?.to_pwl()?)
}

fn parse_point(s: &str) -> Result<Point2> {
    let v: Vec<&str> = s.split(',').collect();
    if v.len() != 2 {
        bail!("expected x,y but got {s}");
    }
    Ok(Point2::new(parse_q(v[0].trim()).map_err(anyhow::Error::msg)?, parse_q(v[1].trim()).map_err(anyhow::Error::msg)?))
}

fn parse_box(s: &str) -> Result<Rect> {
    let v: Result<Vec<_>, _> = s.split(',').map(|t| parse_q(t.trim())).collect();
    let v = v.map_err(anyhow::Error::msg)?;
    if v.len() != 4 || v[0] > v[1] || v[2] > v[3] {
        bail!("expected x0,x1,y0,y1 but got {s}");
    }
    Ok(Rect::axis(v[0].clone(), v[1].clone(), v[2].clone(), v[3].clone()))
}

fn bbox(m: &WeightedPointCloud) -> Result<Rect> {
    let (x0, x1, y0, y1) = m.bbox().context("empty measure")?;
    Ok(Rect::axis(x0, x1, y0, y1))
}

fn qs_point(p: &Option<[QS; 2]>, name: &str) -> Result<Point2> {
    let [x, y] = p.as_ref().with_context(|| format!("missing {name}"))?;
    Ok(Point2::new(x.0.clone(), y.0.clone()))
}

fn verdict_code(reports: &[BoundReport]) -> u8 {
    reports.iter().any(|r| r.verdict == Verdict::Fails) as u8
}

fn run(cli: Cli) -> Result<u8> {
    match cli.cmd {
        Cmd::Solve { mu, nu, plan, potential } => {
            let (mu, nu): (WeightedPointCloud, WeightedPointCloud) = (read_json(&mu)?, read_json(&nu)?);
            let (p, duals) = solve_ot(&mu, &nu)?;
            let psi = extract_potential(&mu, &duals, &nu)?;
            eprintln!("cost {}  dual {}", p.cost(), duals.dual_value(&mu, &nu));
            write_json(plan.as_deref(), &PlanJson::from_plan(&p))?;
            if let Some(path) = potential {
                write_json(Some(&path), &PwlJson::from_pwl(&psi))?;
            }
            Ok(0)
        }
        Cmd::Verify { potential, mu, nu, omega, lambda } => {
            let psi = read_potential(&potential)?;
            let (mu, nu): (WeightedPointCloud, WeightedPointCloud) = (read_json(&mu)?, read_json(&nu)?);
            let omega = omega.map_or_else(|| bbox(&mu), |s| parse_box(&s))?;
            let lambda = lambda.map_or_else(|| bbox(&nu), |s| parse_box(&s))?;
            let reports = vec![verify_onesided(&psi, &mu, &nu, &omega), verify_dual_side(&psi, &mu, &nu, &lambda)];
            write_json(None, &reports)?;
            Ok(verdict_code(&reports))
        }
        Cmd::FlatScan { potential, region, tol } => {
            let psi = read_potential(&potential)?;
            let region = match region {
                Some(s) => parse_box(&s)?,
                None => {
                    let pts = psi.points();
                    let xs = pts.iter().map(|p| p.x.clone());
                    let ys = pts.iter().map(|p| p.y.clone());
                    let (x0, x1) = (xs.clone().min().unwrap(), xs.max().unwrap());
                    let (y0, y1) = (ys.clone().min().unwrap(), ys.max().unwrap());
                    Rect::axis(x0, x1, y0, y1)
                }
            };
            let scan = max_flat_diameter(&psi, &region, tol);
            let witness = scan.witness.map(|(a, b)| [[QS(a.x), QS(a.y)], [QS(b.x), QS(b.y)]]);
            write_json(None, &serde_json::json!({ "ell_max": scan.ell_max, "witness": witness, "pairs_checked": scan.pairs_checked }))?;
            Ok(0)
        }
        Cmd::BoundCheck { inequality, params, potential } => {
            let input: BoundInput = read_json(&params)?;
            let p = input.params;
            let report = match inequality {
                Inequality::Main => main_bound_check(&p),
                Inequality::Flat => corollary_flat_bound(&p),
                Inequality::GammaLower => {
                    let gamma = otlab_core::analysis::gamma_of(&p)?;
                    BoundReport::new("gamma-lower", gamma_lower_bound(&p), gamma, p)
                }
                Inequality::C1 => {
                    let dz = input.dz.context("c1 needs dz")?;
                    let v = c1_modulus_eval(&p, dz)?;
                    BoundReport::new("c1", v, p.diam, p)
                }
                Inequality::Duality => {
                    let psi = read_potential(potential.as_deref().context("duality needs --potential")?)?;
                    duality_gap_bound_check(
                        &psi,
                        &qs_point(&input.x, "x")?,
                        &qs_point(&input.x2, "x2")?,
                        &qs_point(&input.z, "z")?,
                        &qs_point(&input.z2, "z2")?,
                    )?
                }
            };
            write_json(None, &report)?;
            Ok(verdict_code(std::slice::from_ref(&report)))
        }
        Cmd::Hall { matrix, permute, check: _, mu, nu } => {
            let g = match read_json::<GraphInput>(&matrix)? {
                GraphInput::Graph(g) => g,
                GraphInput::Matrix(m) => SupportGraph::from_matrix(&m)?,
            };
            if let (Some(mu), Some(nu)) = (mu, nu) {
                let (mu, nu): (WeightedPointCloud, WeightedPointCloud) = (read_json(&mu)?, read_json(&nu)?);
                return match construct_plan(&mu, &nu, &g) {
                    Ok(p) => write_json(None, &PlanJson::from_plan(&p)).map(|_| 0),
                    Err(otlab_core::error::HallError::HallViolation { witness }) => {
                        write_json(None, &serde_json::json!({ "hall": false, "witness": witness }))?;
                        Ok(1)
                    }
                    Err(e) => Err(e.into()),
                };
            }
            if permute {
                match find_permutation(&g) {
                    Ok(s) => write_json(None, &serde_json::json!({ "hall": true, "permutation": s }))?,
                    Err(otlab_core::error::HallError::HallViolation { witness }) => {
                        write_json(None, &serde_json::json!({ "hall": false, "witness": witness }))?;
                        return Ok(1);
                    }
                    Err(e) => return Err(e.into()),
                }
                Ok(0)
            } else {
                let ok = check_hall(&g)?;
                write_json(None, &serde_json::json!({ "hall": ok }))?;
                Ok(!ok as u8)
            }
        }
        Cmd::Integral { potential, x, y, delta, gamma } => {
            let psi = read_potential(&potential)?;
            let delta = parse_q(&delta).map_err(anyhow::Error::msg)?;
            let (f, cfg) = normalize_frame(&psi, &parse_point(&x)?, &parse_point(&y)?, &delta)?;
            let cfg = cfg.with_gamma(gamma);
            let integral = displacement_integral(&f, &cfg)?;
            write_json(None, &IntegralOutput { ell: QS(cfg.ell.clone()), eps: QS(cfg.eps.clone()), gamma, integral })?;
            Ok(0)
        }
        Cmd::Appendix { check, params } => match check {
            AppendixCheck::Heinz2d => {
                let input: HeinzInput = read_json(&params)?;
                let r = heinz_check_2d(&input.function.grid()?, &input.query)?;
                write_json(None, &r)?;
                Ok(verdict_code(std::slice::from_ref(&r)))
            }
            AppendixCheck::Fischer => {
                let input: FischerInput = read_json(&params)?;
                let r = fischer_pipeline_check(&input.function.grid()?, &input.query)?;
                write_json(None, &r)?;
                Ok(verdict_code(std::slice::from_ref(&r)))
            }
            AppendixCheck::Varphi => {
                let input: VarphiInput = read_json(&params)?;
                let rows: Result<Vec<_>, _> =
                    input.s.iter().map(|&s| varphi_profile(s, input.n, input.d).map(|v| serde_json::json!({ "s": s, "varphi": v }))).collect();
                write_json(None, &rows?)?;
                Ok(0)
            }
            AppendixCheck::Affine => {
                let a: AffineInput = read_json(&params)?;
                let v = affine_flat_bound(a.n, a.d, a.ell, a.delta, a.lambda, a.grad_inf, a.c)?;
                write_json(None, &serde_json::json!({ "bound": v }))?;
                Ok(0)
            }
        },
        Cmd::Run { scenario, out, format } => {
            let scenarios: Result<Vec<Scenario>> = scenario.iter().map(|p| read_json(p)).collect();
            let results = run_all(&scenarios?);
            let mut reports = Vec::new();
            for r in results {
                reports.push(r?);
            }
            match out {
                Some(path) => emit_reports(&reports, format, &path)?,
                None => match format {
                    Format::Json => println!("{}", otlab::emit::to_json(&reports)?),
                    Format::Csv => write_csv(&reports, std::io::stdout().lock())?,
                },
            }
            Ok(!reports.iter().all(|r| r.all_hold()) as u8)
        }
        Cmd::Calibrate { scenario, inequality } => {
            let scenarios: Result<Vec<Scenario>> = scenario.iter().map(|p| read_json(p)).collect();
            let c = calibrate_constant(&scenarios?, inequality.name())?;
            println!("{c}");
            Ok(0)
        }
        Cmd::Report { input, format, out } => {
            let reports = read_reports(&input)?;
            match out {
                Some(path) => emit_reports(&reports, format, &path)?,
                None => match format {
                    Format::Json => println!("{}", otlab::emit::to_json(&reports)?),
                    Format::Csv => write_csv(&reports, std::io::stdout().lock())?,
                },
            }
            Ok(!reports.iter().all(|r| r.all_hold()) as u8)
        }
    }
}

fn main() -> ExitCode {
    init_threads();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
