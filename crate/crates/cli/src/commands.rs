use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use serde::Serialize;
use sextic_core::analysis::{
    condition_star_estimate, emit, exponent_fit, fluctuation_report, integrate_triple_density,
    ConditionStar, LimitLaw, TripleBox, TripleIntegral,
};
use sextic_core::cramer::{g_n_landscape, rescaled_limit_check, verify_expansion, GridSpec, LimitRow};
use sextic_core::interaction::{check_monotone_and_bounds, check_scaling_identity, MonotoneReport};
use sextic_core::measures::SupportClass;
use sextic_core::sampler::{
    enumerate_exact, read_csv, run_parallel, tv_distance, write_csv, SampleMetadata, GENERATOR,
};
use sextic_core::{Error, Measure, MomentSet, TriplePoint};

use crate::config::RunConfig;

/// Why a command did not succeed; each variant has its own exit code.
#[derive(Debug)]
pub enum Failure {
    /// A hypothesis or threshold was not met.
    Check(anyhow::Error),
    Config(anyhow::Error),
    Numeric(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Check(_) => 1,
            Failure::Config(_) => 2,
            Failure::Numeric(_) => 3,
        }
    }

    pub fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Check(e) | Failure::Config(e) | Failure::Numeric(e) => e,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NotAProbability(_)
            | Error::DiracAtZero
            | Error::Asymmetric(_)
            | Error::NonFinite(_)
            | Error::ZeroMass
            | Error::InvalidSupport(_)
            | Error::InvalidArgument(_)
            | Error::SchemaMismatch(_)
            | Error::IoFailure(_) => Failure::Config(e.into()),
            Error::InadmissibleMeasure(_) => Failure::Check(e.into()),
            _ => Failure::Numeric(e.into()),
        }
    }
}

pub type Outcome = std::result::Result<(), Failure>;

pub struct Session {
    pub config: RunConfig,
    pub out: PathBuf,
    pub force: bool,
    pub verbose: bool,
}

impl Session {
    fn log(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn measure(&self) -> Result<Measure, Failure> {
        Ok(self.config.measure.build()?)
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, Failure> {
        let path = self.out.join(name);
        let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Numeric(e.into()))?;
        fs::write(&path, text + "\n").map_err(|e| Failure::Config(anyhow!(e).context(format!("writing {}", path.display()))))?;
        self.log(format!("wrote {}", path.display()));
        Ok(path)
    }

    fn write_text(&self, name: &str, text: &str) -> Result<PathBuf, Failure> {
        let path = self.out.join(name);
        fs::write(&path, text).map_err(|e| Failure::Config(anyhow!(e).context(format!("writing {}", path.display()))))?;
        self.log(format!("wrote {}", path.display()));
        Ok(path)
    }

    pub fn prepare_output(&self) -> Outcome {
        fs::create_dir_all(&self.out)
            .with_context(|| format!("creating {}", self.out.display()))
            .map_err(Failure::Config)
    }
}

/// Quasi-random points of the moment cone from an additive recurrence, covering both
/// `x^2` far below `y` and `x^2` close to `y`.
fn theta_points(count: usize) -> Vec<TriplePoint> {
    // Generalised golden-ratio constants for three dimensions.
    let g = 1.220_744_084_605_759_5_f64;
    let alpha = [1.0 / g, 1.0 / (g * g), 1.0 / (g * g * g)];
    (0..count)
        .map(|k| {
            let r = alpha.map(|a| (0.5 + a * (k + 1) as f64).fract());
            let x = 6.0 * r[0] - 3.0;
            let gap = if k % 2 == 0 { 1.0 + 9.0 * r[1] } else { 1e-6 + 1e-2 * r[1] };
            let y = x * x + gap;
            TriplePoint::new(x, y, y * y + 20.0 * r[2])
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct Clause {
    name: &'static str,
    passed: bool,
    detail: String,
}

#[derive(Debug, Serialize)]
struct CheckReport {
    moments: MomentSet,
    support: SupportClass,
    covariance_invertible: bool,
    symmetric: bool,
    scaling_identity_max_rel_error: f64,
    monotone: MonotoneReport,
    clauses: Vec<Clause>,
    passed: bool,
}

fn check_report(m: &Measure) -> Result<CheckReport, Failure> {
    let ms = m.moments();
    let (support, invertible) = m.support_check();
    let symmetric = m.is_symmetric();
    let points = theta_points(1000);
    let mut scaling = 0.0f64;
    for n in [1.0, 7.0, 1e3, 1e6] {
        scaling = scaling.max(check_scaling_identity(n, &points)?);
    }
    let monotone = check_monotone_and_bounds(&points, 40)?;
    let clauses = vec![
        Clause {
            name: "symmetric",
            passed: symmetric,
            detail: "law invariant under x -> -x".into(),
        },
        Clause {
            name: "support>=5",
            passed: support == SupportClass::Ge5 && invertible,
            detail: format!("support {support:?}, covariance determinant a = {:.6e}", ms.a),
        },
        Clause {
            name: "criterion",
            passed: ms.is_admissible(),
            detail: format!("5 mu4^2 - 2 sigma^2 mu6 = {:.6}", ms.criterion),
        },
        Clause {
            name: "integrability",
            passed: m.integrability_check(1.0),
            detail: "E[exp(Z^4)] finite".into(),
        },
        Clause {
            name: "scaling identity",
            passed: scaling <= 1e-12,
            detail: format!("max relative error {scaling:.2e} over 1000 points, n in {{1, 7, 1e3, 1e6}}"),
        },
        Clause {
            name: "monotone and bounded",
            passed: monotone.passed(),
            detail: format!("{} violations in {} comparisons", monotone.violations.len(), monotone.comparisons),
        },
    ];
    let passed = clauses.iter().all(|c| c.passed);
    Ok(CheckReport {
        moments: ms,
        support,
        covariance_invertible: invertible,
        symmetric,
        scaling_identity_max_rel_error: scaling,
        monotone,
        clauses,
        passed,
    })
}

pub fn check(ctx: &Session) -> Outcome {
    let m = ctx.measure()?;
    let report = check_report(&m)?;
    ctx.prepare_output()?;
    ctx.write_json("check.json", &report)?;
    let ms = &report.moments;
    println!(
        "sigma2 = {:.8}  mu4 = {:.8}  mu6 = {:.8}  mu8 = {:.8}",
        ms.sigma2, ms.mu4, ms.mu6, ms.mu8
    );
    println!("criterion = {:.6}  a = {:.6e}", ms.criterion, ms.a);
    for c in &report.clauses {
        println!("[{}] {}: {}", if c.passed { "ok" } else { "FAILED" }, c.name, c.detail);
    }
    let failed: Vec<&str> = report.clauses.iter().filter(|c| !c.passed).map(|c| c.name).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Check(anyhow!("failing clause(s): {}", failed.join(", "))))
    }
}

#[derive(Debug, Serialize)]
struct LandscapeSummary {
    n: f64,
    grid: GridSpec,
    argmin: TriplePoint,
    min_value: f64,
    masked: usize,
    argmin_in_centre_cell: bool,
}

pub fn cramer(ctx: &Session) -> Outcome {
    let m = ctx.measure()?;
    let cfg = &ctx.config.cramer;
    ctx.prepare_output()?;
    ctx.log("verifying expansion coefficients");
    let report = verify_expansion(&m, &cfg.fd)?;
    ctx.write_json("expansion.json", &report)?;
    for r in &report.rows {
        println!(
            "[{}] {:<14} closed {:>14.6e}  fd {:>14.6e}  rel {:.2e} (tol {:.0e})",
            if r.passed { "ok" } else { "FAILED" },
            r.label,
            r.closed_form,
            r.finite_difference,
            r.rel_error,
            r.tolerance
        );
    }
    let ms = report.moments;
    let grid = cfg.grid.unwrap_or(GridSpec {
        lower: [-0.5, 0.75 * ms.sigma2, 0.85 * ms.mu4],
        upper: [0.5, 1.25 * ms.sigma2, 1.15 * ms.mu4],
        points: [21, 21, 21],
    });
    ctx.log("evaluating landscape");
    let landscape = g_n_landscape(&m, cfg.landscape_n, &grid)?;
    ctx.write_text("landscape.csv", &landscape.to_csv())?;
    let centre = TriplePoint::new(0.0, ms.sigma2, ms.mu4);
    let in_cell = grid.same_cell(landscape.argmin, centre);
    ctx.write_json(
        "landscape.json",
        &LandscapeSummary {
            n: landscape.n,
            grid,
            argmin: landscape.argmin,
            min_value: landscape.min_value,
            masked: landscape.masked,
            argmin_in_centre_cell: in_cell,
        },
    )?;
    println!(
        "landscape argmin ({:.4}, {:.4}, {:.4}), G_n = {:.3e}, centre cell: {in_cell}",
        landscape.argmin.x, landscape.argmin.y, landscape.argmin.z, landscape.min_value
    );
    let mut passed = report.passed && (in_cell || !ms.is_admissible());
    if ms.is_admissible() {
        let points: Vec<TriplePoint> = cfg.limit_points.iter().map(|p| TriplePoint::new(p[0], p[1], p[2])).collect();
        let rows = rescaled_limit_check(&m, &cfg.limit_n, &points)?;
        ctx.write_text("rescaled_limit.csv", &limit_csv(&rows))?;
        let k = cfg.limit_n.len().max(1);
        let decreasing = rows.chunks(k).all(|c| c.windows(2).all(|w| w[1].deviation <= w[0].deviation));
        println!("rescaled limit deviations decrease with n: {decreasing}");
        passed &= decreasing;
    } else {
        println!("measure is inadmissible; rescaled-limit table skipped");
    }
    if passed {
        Ok(())
    } else {
        Err(Failure::Check(anyhow!("expansion or landscape check failed")))
    }
}

fn limit_csv(rows: &[LimitRow]) -> String {
    let mut s = String::from("x,y,z,n,rescaled,limit,deviation\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{:.16e},{:.16e},{:.6e}\n",
            r.point.x, r.point.y, r.point.z, r.n, r.rescaled, r.limit, r.deviation
        ));
    }
    s
}

pub fn sample_stem(n: usize) -> String {
    format!("samples_n{n}")
}

pub fn sample(ctx: &Session) -> Outcome {
    let m = ctx.measure()?;
    if !ctx.force {
        let report = check_report(&m)?;
        if !report.passed {
            let failed: Vec<&str> = report.clauses.iter().filter(|c| !c.passed).map(|c| c.name).collect();
            return Err(Failure::Check(anyhow!(
                "measure fails {}; rerun with --force to sample anyway",
                failed.join(", ")
            )));
        }
    }
    let cfg = &ctx.config;
    let plan = cfg.plan();
    ctx.prepare_output()?;
    let measure_json = serde_json::to_value(&cfg.measure).map_err(|e| Failure::Config(e.into()))?;
    for &n in &cfg.n_list {
        ctx.log(format!("sampling n = {n}: {} chains x {} sweeps", cfg.chains, cfg.sweeps));
        let run = run_parallel(&m, n, cfg.chains, &plan, cfg.seed)?;
        let stem = sample_stem(n);
        let path = ctx.out.join(format!("{stem}.csv"));
        let file = File::create(&path).with_context(|| format!("creating {}", path.display())).map_err(Failure::Config)?;
        write_csv(&run.records, BufWriter::new(file))?;
        let meta = SampleMetadata {
            measure: measure_json.clone(),
            n,
            chains: cfg.chains,
            seeds: run.seeds.clone(),
            plan,
            records: run.records.len(),
            acceptance_rate: run.acceptance_rate(),
            generator: GENERATOR.into(),
        };
        ctx.write_json(&format!("{stem}.json"), &meta)?;
        println!(
            "n = {n}: {} records, acceptance {:.4} -> {}",
            run.records.len(),
            meta.acceptance_rate,
            path.display()
        );
    }
    Ok(())
}

fn load_samples(path: &Path) -> Result<(SampleMetadata, Vec<sextic_core::SampleRecord>), Failure> {
    let meta_path = path.with_extension("json");
    let meta_text = fs::read_to_string(&meta_path)
        .with_context(|| format!("reading metadata {}", meta_path.display()))
        .map_err(Failure::Config)?;
    let meta: SampleMetadata = serde_json::from_str(&meta_text)
        .map_err(|e| Failure::from(Error::SchemaMismatch(format!("{}: {e}", meta_path.display()))))?;
    let file = File::open(path).with_context(|| format!("opening {}", path.display())).map_err(Failure::Config)?;
    let records = read_csv(BufReader::new(file))?;
    if records.len() != meta.records {
        return Err(Error::SchemaMismatch(format!(
            "{} holds {} records but its metadata declares {}",
            path.display(),
            records.len(),
            meta.records
        ))
        .into());
    }
    if records.is_empty() {
        return Err(Error::SchemaMismatch(format!("{} holds no records", path.display())).into());
    }
    Ok((meta, records))
}

#[derive(Debug, Serialize)]
struct SlopeReport {
    pairs: Vec<(f64, f64)>,
    slope: f64,
    band: [f64; 2],
    passed: bool,
}

pub fn analyze(ctx: &Session, paths: &[PathBuf]) -> Outcome {
    let m = ctx.measure()?;
    let ms = m.moments();
    let cfg = &ctx.config.analysis;
    let paths: Vec<PathBuf> = if paths.is_empty() {
        ctx.config.n_list.iter().map(|&n| ctx.out.join(format!("{}.csv", sample_stem(n)))).collect()
    } else {
        paths.to_vec()
    };
    ctx.prepare_output()?;
    let law = LimitLaw::new();
    let mut passed = true;
    let mut pairs = Vec::new();
    for path in &paths {
        let (meta, records) = load_samples(path)?;
        let report = fluctuation_report(&records, &ms, meta.n, &law, &cfg.lln, &cfg.histogram)?;
        let files = emit(&report, &law, &ctx.out, &format!("fluctuations_n{}", meta.n))?;
        ctx.log(format!("wrote {}, {}, {}", files.csv.display(), files.json.display(), files.svg.display()));
        let ks_ok = report.ks_stat < cfg.ks_threshold;
        passed &= ks_ok && report.lln.passed;
        pairs.push((meta.n as f64, report.mean_abs_s));
        println!(
            "n = {}: {} records, KS {:.4} [{}], means ({:.3e}, {:.5}, {:.5}) [{}]",
            meta.n,
            report.records_used,
            report.ks_stat,
            if ks_ok { "ok" } else { "FAILED" },
            report.mean_triple[0],
            report.mean_triple[1],
            report.mean_triple[2],
            if report.lln.passed { "ok" } else { "FAILED" }
        );
    }
    let mut distinct: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    distinct.dedup();
    if distinct.len() >= 3 {
        let slope = exponent_fit(&pairs)?;
        let ok = slope >= cfg.slope_band[0] && slope <= cfg.slope_band[1];
        passed &= ok;
        println!("exponent fit slope {slope:.4} [{}]", if ok { "ok" } else { "FAILED" });
        ctx.write_json(
            "exponent_fit.json",
            &SlopeReport {
                pairs,
                slope,
                band: cfg.slope_band,
                passed: ok,
            },
        )?;
    }
    if passed {
        Ok(())
    } else {
        Err(Failure::Check(anyhow!("KS, law-of-large-numbers or exponent threshold not met")))
    }
}

#[derive(Debug, Serialize)]
struct Comparison {
    records: usize,
    tv_distance: f64,
    threshold: f64,
}

pub fn exact(ctx: &Session) -> Outcome {
    let m = ctx.measure()?;
    let cfg = &ctx.config;
    let n = cfg.exact.n;
    let law = enumerate_exact(&m, n, cfg.interaction)?;
    ctx.prepare_output()?;
    ctx.write_json(&format!("exact_n{n}.json"), &law)?;
    let mut csv = String::from("s,probability\n");
    for (s, p) in &law.s_marginal {
        csv.push_str(&format!("{s},{p:.17e}\n"));
    }
    ctx.write_text(&format!("exact_n{n}_s_marginal.csv"), &csv)?;
    println!("n = {n}: Z = {:.10}, {} states, P(T > 0) = {:.10}", law.z, law.states.len(), law.p_positive);
    if let Some(sweeps) = cfg.exact.compare_sweeps {
        let plan = sextic_core::ChainPlan {
            sweeps: sweeps + cfg.burn_in,
            ..cfg.plan()
        };
        let run = run_parallel(&m, n, cfg.chains, &plan, cfg.seed)?;
        let s: Vec<f64> = run.records.iter().map(|r| r.s).collect();
        let tv = tv_distance(&s, &law.s_marginal);
        let cmp = Comparison {
            records: s.len(),
            tv_distance: tv,
            threshold: cfg.exact.tv_threshold,
        };
        ctx.write_json(&format!("exact_n{n}_comparison.json"), &cmp)?;
        println!("sampler vs exact: TV {tv:.5} over {} records", s.len());
        if tv >= cfg.exact.tv_threshold {
            return Err(Failure::Check(anyhow!("TV distance {tv:.5} exceeds {}", cfg.exact.tv_threshold)));
        }
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct Density3Report {
    integral: TripleIntegral,
    tolerance: f64,
    condition: Vec<ConditionStar>,
    passed: bool,
}

pub fn density3(ctx: &Session) -> Outcome {
    let m = ctx.measure()?;
    let cfg = &ctx.config.density3;
    let Some((_, lower, upper)) = m.density_law() else {
        return Err(Failure::Config(anyhow!("density3 needs a density measure")));
    };
    let reach = lower.abs().max(upper.abs());
    ctx.log("integrating the triple density");
    let integral = integrate_triple_density(&m, &TripleBox::covering(reach), cfg.cells)?;
    let mut condition = Vec::new();
    for &p in &cfg.condition_p {
        condition.push(condition_star_estimate(&m, p, cfg.condition_samples, ctx.config.seed)?);
    }
    let passed = (integral.integral - 1.0).abs() <= cfg.tolerance;
    println!(
        "integral of the triple density {:.6} ({} evaluations, {} masked) [{}]",
        integral.integral,
        integral.evaluations,
        integral.masked,
        if passed { "ok" } else { "FAILED" }
    );
    for c in &condition {
        println!(
            "condition (*) at p = {}: estimate {:.6}, relative spread {:.3}, {:?}",
            c.p, c.estimate, c.relative_spread, c.verdict
        );
    }
    ctx.prepare_output()?;
    ctx.write_json(
        "density3.json",
        &Density3Report {
            integral,
            tolerance: cfg.tolerance,
            condition,
            passed,
        },
    )?;
    if passed {
        Ok(())
    } else {
        Err(Failure::Check(anyhow!("triple density does not integrate to 1")))
    }
}
