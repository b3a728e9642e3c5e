use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use hashlab::codes::BinaryCodeSet;
use hashlab::datasets::{load_feature_file, load_label_file, write_feature_file, write_label_file, LabeledDataset};
use hashlab::deep::{write_train_log, EpochLog};
use hashlab::eval::{evaluate, mean_ap, write_report, EvalOptions};
use hashlab::model::{Fitter, Method, StoredModel};

use crate::config::{ExperimentConfig, Overrides};
use crate::error::{CliError, CliResult};

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))
}

fn describe(name: &str, d: &LabeledDataset) -> String {
    let hist = d.class_histogram().iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ");
    format!("{name}: n={} d={} classes=[{hist}]", d.len(), d.dim())
}

fn print_epoch(e: &EpochLog) {
    eprintln!("epoch {:>3}  loss {:.5}  train_accuracy {:.4}  lr {}", e.epoch, e.loss, e.train_accuracy, e.lr);
}

pub fn ingest(config: Option<&Path>, overrides: &Overrides) -> CliResult<()> {
    let cfg = ExperimentConfig::load(config, overrides)?;
    let (train, test) = cfg.load_splits()?;
    println!("{}", describe("train", &train));
    if let Some(t) = &test {
        println!("{}", describe("test", t));
    }
    let p = cfg.protocol()?;
    create_dir(&cfg.output)?;
    for (name, set) in [("database", &p.database), ("query", &p.queries)] {
        write_feature_file(cfg.output.join(format!("{name}.hlfm")), &set.features)?;
        write_label_file(cfg.output.join(format!("{name}.hllb")), &set.labels)?;
        println!("{name}: {} x {} -> {}", set.len(), set.dim(), cfg.output.join(format!("{name}.hlfm")).display());
    }
    Ok(())
}

pub fn train(config: Option<&Path>, overrides: &Overrides) -> CliResult<()> {
    let cfg = ExperimentConfig::load(config, overrides)?;
    let (method, bits) = cfg.single()?;
    let p = cfg.protocol()?;
    let start = Instant::now();
    let fitter = Fitter::new(&p.database, cfg.fit_options());
    let fitted = fitter.fit_with(method, bits, cfg.seed_for("model"), print_epoch)?;
    create_dir(&cfg.output)?;
    let model_path = cfg.output.join("model.hlmd");
    fitted.model.write(&model_path)?;
    if method == Method::Deep {
        write_train_log(&cfg.output.join("train_log.csv"), &fitted.log)?;
    }
    println!(
        "trained {method} with {bits} bits on {} items in {:.2}s -> {}",
        p.database.len(),
        start.elapsed().as_secs_f64(),
        model_path.display()
    );
    Ok(())
}

pub fn encode(model: &Path, input: &Path, out: &Path) -> CliResult<()> {
    let model = StoredModel::read(model)?;
    let x = load_feature_file(input)?;
    let start = Instant::now();
    let codes = model.encode(&x)?;
    let secs = start.elapsed().as_secs_f64();
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    codes.write(out)?;
    println!(
        "encoded {} items to {} bits in {secs:.3}s ({:.0} codes/sec) -> {}",
        codes.len(),
        codes.bits(),
        codes.len() as f64 / secs.max(1e-9),
        out.display()
    );
    Ok(())
}

pub struct EvalRequest {
    pub queries: PathBuf,
    pub database: PathBuf,
    pub query_labels: PathBuf,
    pub db_labels: PathBuf,
    pub config: Option<PathBuf>,
    pub radius_sweep: bool,
    pub ks: Option<Vec<usize>>,
    pub radii: Option<Vec<usize>>,
    pub method: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

pub fn eval(req: EvalRequest) -> CliResult<()> {
    let cfg = match &req.config {
        Some(p) => Some(ExperimentConfig::load(Some(p), &Overrides::default())?),
        None => None,
    };
    let mut ecfg = cfg.as_ref().map(|c| c.eval.clone()).unwrap_or_default();
    let queries = BinaryCodeSet::read(&req.queries)?;
    let db = BinaryCodeSet::read(&req.database)?;
    let query_labels = load_label_file(&req.query_labels)?;
    let db_labels = load_label_file(&req.db_labels)?;
    if queries.bits() != db.bits() {
        return Err(CliError::usage(format!(
            "query codes have {} bits but database codes have {}",
            queries.bits(),
            db.bits()
        )));
    }
    let explicit_ks = req.ks.is_some();
    if let Some(k) = req.ks {
        ecfg.ks = k;
    }
    if let Some(r) = req.radii {
        ecfg.radii = r;
    }
    let bits = db.bits();
    if req.radius_sweep || ecfg.radius_sweep {
        ecfg.radii = (0..=bits).collect();
    }
    if let Some(&k) = ecfg.ks.iter().find(|&&k| k == 0 || (explicit_ks && k > db.len())) {
        return Err(CliError::usage(format!("k = {k} outside 1..={}", db.len())));
    }
    ecfg.ks.retain(|&k| k <= db.len());
    if let Some(&r) = ecfg.radii.iter().find(|&&r| r > bits) {
        return Err(CliError::usage(format!("radius {r} exceeds the code length {bits}")));
    }
    let opts = EvalOptions {
        ks: ecfg.ks,
        radii: ecfg.radii,
        pr_curve: ecfg.pr_curve,
        diagnostics: ecfg.diagnostics,
    };
    let start = Instant::now();
    let report = evaluate(&queries, &db, &db_labels, &query_labels, &opts)?;
    let method = req
        .method
        .or_else(|| cfg.as_ref().and_then(|c| c.method.to_vec().first().map(|m| m.to_string())))
        .unwrap_or_else(|| "codes".into());
    let seed = req.seed.or(cfg.as_ref().map(|c| c.seed)).unwrap_or(0);
    let out = req
        .out
        .or_else(|| cfg.as_ref().map(|c| c.output.clone()))
        .unwrap_or_else(|| PathBuf::from("out"));
    write_report(&out, &report, &method, bits, seed)?;
    println!(
        "mAP {:.6} over {} queries against {} items ({bits} bits, {:.2}s) -> {}",
        report.map,
        report.n_query,
        report.n_db,
        start.elapsed().as_secs_f64(),
        out.display()
    );
    Ok(())
}

pub fn sweep(config: Option<&Path>, overrides: &Overrides) -> CliResult<()> {
    let cfg = ExperimentConfig::load(config, overrides)?;
    let p = cfg.protocol()?;
    let fitter = Fitter::new(&p.database, cfg.fit_options());
    let mut csv = String::from("method,bits,map\n");
    for method in cfg.method.to_vec() {
        for bits in cfg.bits.to_vec() {
            let start = Instant::now();
            let context = |e: hashlab::Error| {
                let inner = CliError::from(e);
                let msg = format!("{method} at {bits} bits: {inner}");
                match inner {
                    CliError::Usage(_) => CliError::Usage(msg),
                    CliError::Runtime(_) => CliError::Runtime(msg),
                }
            };
            let fitted = fitter.fit_with(method, bits, cfg.seed_for("model"), print_epoch).map_err(context)?;
            let db = fitted.model.encode(&p.database.features).map_err(context)?;
            let q = fitted.model.encode(&p.queries.features).map_err(context)?;
            let map = mean_ap(&q, &db, &p.database.labels, &p.queries.labels).map_err(context)?;
            writeln!(csv, "{method},{bits},{map}").unwrap();
            eprintln!("{method} {bits} bits: mAP {map:.4} ({:.1}s)", start.elapsed().as_secs_f64());
        }
    }
    create_dir(&cfg.output)?;
    let path = cfg.output.join("sweep.csv");
    fs::write(&path, &csv).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    print!("{csv}");
    Ok(())
}
