use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use asbound::absorbing::DecoderGraphDA;
use asbound::bound::{
    compute_failure_set, digest_hex, failure_set_key, fer_estimate, lambda_curve, AsDecoder, BoundCurve,
    EnumerationOptions, FailureSet,
};
use asbound::codes::{find_weight_w_codewords, ParityCheckMatrix};
use asbound::sim::{self, SimulationPlan};

use crate::config::{config_error, CodeSource, CompareSection, Multiplicity, RunConfig};
use crate::CliError;

pub const CACHE_ENV: &str = "ASBOUND_CACHE_DIR";

pub struct Context {
    pub config: Option<RunConfig>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl Context {
    fn config(&self) -> Result<&RunConfig, CliError> {
        self.config
            .as_ref()
            .ok_or_else(|| config_error("this command needs --config"))
    }

    fn seed(&self) -> u64 {
        self.seed
            .or_else(|| self.config.as_ref().and_then(|c| c.seed))
            .unwrap_or(0)
    }

    fn out_dir(&self) -> Result<PathBuf, CliError> {
        let dir = match &self.config {
            Some(c) => c.output_dir(self.out.as_deref()),
            None => self.out.clone().unwrap_or_else(|| PathBuf::from("out")),
        };
        fs::create_dir_all(&dir)?;
        Ok(dir)
    }
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn multiplicity(cfg: &RunConfig, code: Option<&ParityCheckMatrix>) -> Result<u64, CliError> {
    let m = cfg.absorbing_set.as_ref().and_then(|a| a.multiplicity.clone());
    Ok(match m {
        None => 1,
        Some(Multiplicity::Count(n)) => n,
        Some(Multiplicity::Codewords { codeword_weight }) => {
            let h = code.ok_or_else(|| config_error("a codeword-count multiplicity needs a [code] section"))?;
            find_weight_w_codewords(h, codeword_weight, None)?.len() as u64
        }
    })
}

fn failure_set(
    cfg: &RunConfig,
    decoder: &AsDecoder,
    rows: &[asbound::bound::RowMatrix],
) -> Result<FailureSet, CliError> {
    let key = failure_set_key(decoder, rows);
    let cache = std::env::var_os(CACHE_ENV).map(|d| PathBuf::from(d).join(format!("{key}.fs")));
    if let Some(path) = cache.as_ref().filter(|p| p.exists()) {
        match FailureSet::load(path) {
            Ok(fs) if fs.matches(decoder, rows) => {
                eprintln!("reusing cached failure set {}", path.display());
                return Ok(fs);
            }
            Ok(_) => eprintln!(
                "warning: cached failure set {} has a different digest, recomputing",
                path.display()
            ),
            Err(e) => eprintln!(
                "warning: cached failure set {} is unreadable ({e}), recomputing",
                path.display()
            ),
        }
    }
    let e = cfg.enumeration.as_ref();
    let options = EnumerationOptions {
        orbit_reduction: e.is_none_or(|e| e.orbit_reduction),
        guard: cfg.guard(),
        checkpoint: e.and_then(|e| e.checkpoint.as_ref()).map(|p| cfg.base_dir.join(p)),
        ..Default::default()
    };
    let start = Instant::now();
    let fs = compute_failure_set(decoder, rows, &options)?;
    eprintln!("failure set: {} vectors in {:.1?}", fs.total(), start.elapsed());
    if let Some(path) = cache {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs.store(&path)?;
    }
    Ok(fs)
}

pub fn bound(ctx: &Context) -> Result<(), CliError> {
    let cfg = ctx.config()?;
    let decoder_cfg = cfg.decoder_config()?;
    let (graph, section) = cfg.absorbing_set()?;
    let (set, h, p, overrun) = cfg.rows()?;
    let grid = cfg.grid()?;
    let code = cfg.code()?;
    let rate = cfg.rate(code.as_ref());
    let n = multiplicity(cfg, code.as_ref())?;
    let second_order = cfg.sweep.as_ref().is_some_and(|s| s.second_order);

    let da = DecoderGraphDA::build(graph, &section.aux)?;
    let decoder = AsDecoder::new(&da, &decoder_cfg, overrun)?;
    let rows = set.build(da.kappa(), h, p, decoder.kernel().quantizer())?;
    let fs = failure_set(cfg, &decoder, &rows)?;

    let start = Instant::now();
    let lambda = lambda_curve(&fs, &decoder_cfg.quantizer, &grid, rate)?;
    let curve = fer_estimate(&lambda, rate, n, second_order)?;
    eprintln!("analytic sweep in {:.1?}", start.elapsed());
    if !curve.is_nonincreasing() {
        eprintln!("warning: estimate is not monotone over the sweep");
    }

    let out = ctx.out_dir()?;
    let digest = cfg.digest(ctx.seed());
    write(&out.join("failure_set.txt"), &fs.to_text())?;
    write(&out.join("bound.csv"), &curve.to_csv(&digest))?;
    println!("rate {rate} multiplicity {n} failing vectors {}", fs.total());
    println!("{:>10} {:>14} {:>14}", "ebn0_db", "lambda_hat", "n_lambda_hat");
    for pt in &curve.points {
        println!("{:>10} {:>14.6e} {:>14.6e}", pt.ebn0_db, pt.lambda_hat, pt.fer_estimate);
    }
    Ok(())
}

pub fn simulate(ctx: &Context) -> Result<(), CliError> {
    let cfg = ctx.config()?;
    let h = cfg
        .code()?
        .ok_or_else(|| config_error("simulate needs a [code] section"))?;
    let graph = h.tanner_graph()?;
    let rate = cfg.rate(Some(&h));
    let mut plan = SimulationPlan::new(cfg.decoder_config()?, cfg.grid()?, rate, ctx.seed());
    if let Some(s) = &cfg.simulation {
        plan.min_frame_errors = s.min_frame_errors;
        plan.max_frames = s.max_frames;
        plan.batch_frames = s.batch_frames;
        plan.log_supports = s.log_supports;
    }
    let start = Instant::now();
    let points = sim::run(&graph, &plan)?;
    eprintln!("simulation in {:.1?}", start.elapsed());

    let out = ctx.out_dir()?;
    let digest = cfg.digest(ctx.seed());
    write(&out.join("simulation.csv"), &sim::fer_csv(&points, &digest))?;
    write(&out.join("supports.csv"), &sim::support_csv(&points, &digest))?;
    println!("{:>10} {:>12} {:>8} {:>12}", "ebn0_db", "frames", "errors", "fer");
    for p in &points {
        println!(
            "{:>10} {:>12} {:>8} {:>12.4e}",
            p.ebn0_db, p.frames, p.frame_errors, p.fer
        );
    }
    Ok(())
}

/// One aligned row of a comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct CompareRow {
    pub ebn0_db: f64,
    pub fer: f64,
    pub frame_errors: u64,
    pub estimate: f64,
    pub ratio: f64,
    pub in_window: bool,
}

pub fn compare_rows(bound_csv: &str, sim_csv: &str, window: &CompareSection) -> Result<Vec<CompareRow>, CliError> {
    let bound = BoundCurve::from_csv(bound_csv, "bound CSV")?;
    let sim = sim::parse_fer_csv(sim_csv, "simulation CSV")?;
    let rows: Vec<CompareRow> = sim
        .iter()
        .filter_map(|&(ebn0_db, _, frame_errors, fer)| {
            let b = bound.iter().find(|b| (b.ebn0_db - ebn0_db).abs() < 1e-9)?;
            Some(CompareRow {
                ebn0_db,
                fer,
                frame_errors,
                estimate: b.fer_estimate,
                ratio: fer / b.fer_estimate,
                in_window: frame_errors > 0 && fer < window.floor_threshold && fer >= window.floor_min,
            })
        })
        .collect();
    if rows.is_empty() {
        return Err(CliError::Core(asbound::Error::InvalidArgument(
            "bound and simulation grids share no Eb/N0 point".into(),
        )));
    }
    Ok(rows)
}

/// `PASS` when every window ratio is at least 1 and at most `max_ratio`.
pub fn compare_summary(rows: &[CompareRow], window: &CompareSection) -> String {
    let ratios: Vec<f64> = rows.iter().filter(|r| r.in_window).map(|r| r.ratio).collect();
    let mut s = String::new();
    writeln!(s, "points {}", rows.len()).unwrap();
    writeln!(s, "window_points {}", ratios.len()).unwrap();
    if ratios.is_empty() {
        writeln!(s, "verdict EMPTY").unwrap();
        return s;
    }
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let max = ratios.iter().copied().fold(0.0, f64::max);
    let lower = min >= 1.0;
    let upper = window.max_ratio.is_none_or(|m| max <= m);
    writeln!(s, "min_ratio {min:e}").unwrap();
    writeln!(s, "max_ratio {max:e}").unwrap();
    writeln!(s, "lower_bound_direction {}", if lower { "yes" } else { "no" }).unwrap();
    if let Some(m) = window.max_ratio {
        writeln!(s, "within_factor {m} {}", if upper { "yes" } else { "no" }).unwrap();
    }
    writeln!(s, "verdict {}", if lower && upper { "PASS" } else { "FAIL" }).unwrap();
    s
}

pub fn compare(ctx: &Context, bound_path: Option<&Path>, sim_path: Option<&Path>) -> Result<(), CliError> {
    let out = ctx.out_dir()?;
    let bound_path = bound_path.map_or_else(|| out.join("bound.csv"), Path::to_path_buf);
    let sim_path = sim_path.map_or_else(|| out.join("simulation.csv"), Path::to_path_buf);
    let read = |p: &Path| fs::read_to_string(p).map_err(|e| config_error(format!("cannot read {}: {e}", p.display())));
    let (bound_csv, sim_csv) = (read(&bound_path)?, read(&sim_path)?);
    let window = ctx.config.as_ref().and_then(|c| c.compare.clone()).unwrap_or_default();
    let rows = compare_rows(&bound_csv, &sim_csv, &window)?;

    let digest = digest_hex(
        format!(
            "{bound_csv}\n{sim_csv}\n{} {} {:?}",
            window.floor_threshold, window.floor_min, window.max_ratio
        )
        .as_bytes(),
    );
    let mut csv = String::new();
    writeln!(csv, "# config_digest={digest}").unwrap();
    writeln!(csv, "ebn0_db,fer,frame_errors,fer_estimate,ratio,in_window").unwrap();
    for r in &rows {
        writeln!(
            csv,
            "{},{:e},{},{:e},{:e},{}",
            r.ebn0_db, r.fer, r.frame_errors, r.estimate, r.ratio, r.in_window as u8
        )
        .unwrap();
    }
    let summary = compare_summary(&rows, &window);
    write(&out.join("compare.csv"), &csv)?;
    write(&out.join("compare_summary.txt"), &summary)?;
    print!("{summary}");
    Ok(())
}

pub fn codegen(ctx: &Context, code: Option<&CodeSource>) -> Result<(), CliError> {
    let (source, base) = match (code, &ctx.config) {
        (Some(c), _) => (c.clone(), PathBuf::new()),
        (None, Some(cfg)) => (
            cfg.code
                .clone()
                .ok_or_else(|| config_error("no [code] section and no --code"))?,
            cfg.base_dir.clone(),
        ),
        (None, None) => return Err(config_error("codegen needs --code or --config")),
    };
    let h = source.build(&base)?;
    let out = ctx.out_dir()?;
    write(&out.join("code.alist"), &h.to_alist())?;
    println!("n {} m {} rank {} rate {:.6}", h.n(), h.m(), h.rank(), h.rate());
    Ok(())
}

pub fn validate_as(ctx: &Context, file: Option<&Path>) -> Result<(), CliError> {
    let graph = match (file, &ctx.config) {
        (Some(f), _) => asbound::absorbing::AbsorbingSetGraph::load(f)?,
        (None, Some(cfg)) => cfg.absorbing_set()?.0,
        (None, None) => return Err(config_error("validate-as needs a file or --config")),
    };
    let c = graph.validate();
    let yes = |b: bool| if b { "yes" } else { "no" };
    let mut s = String::new();
    writeln!(s, "a {}", c.a).unwrap();
    writeln!(s, "b {}", c.b).unwrap();
    writeln!(s, "gamma {}", c.gamma).unwrap();
    match c.girth {
        Some(g) => writeln!(s, "girth {g}").unwrap(),
        None => writeln!(s, "girth none").unwrap(),
    }
    writeln!(s, "absorbing {}", yes(c.absorbing)).unwrap();
    writeln!(s, "elementary {}", yes(c.elementary)).unwrap();
    writeln!(s, "leafless {}", yes(c.leafless)).unwrap();
    match graph.automorphisms() {
        Ok(g) => writeln!(s, "automorphisms {}", g.len()).unwrap(),
        Err(_) => writeln!(s, "automorphisms skipped").unwrap(),
    }
    if let Some(cfg) = &ctx.config {
        let weight = match cfg.absorbing_set.as_ref().and_then(|a| a.multiplicity.clone()) {
            Some(Multiplicity::Codewords { codeword_weight }) => Some(codeword_weight),
            _ => None,
        };
        if let (Some(w), Some(h)) = (weight, cfg.code()?) {
            let supports = find_weight_w_codewords(&h, w, None)?;
            let mut same = 0;
            for sup in &supports {
                let k = h.induced_subgraph(sup)?.validate();
                if (k.a, k.b, k.absorbing) == (c.a, c.b, c.absorbing) {
                    same += 1;
                }
            }
            writeln!(s, "weight_{w}_codewords {}", supports.len()).unwrap();
            writeln!(s, "matching_supports {same}").unwrap();
        }
    }
    let out = ctx.out_dir()?;
    write(&out.join("validation.txt"), &s)?;
    print!("{s}");
    Ok(())
}
