//! Acceptance run. Prints one PASS/FAIL line per criterion and exits
//! nonzero when a criterion fails on available data.
//!
//! `cargo test -p hashlab --test acceptance -- 5 6` runs a subset. The
//! full 60,000-image deep run only happens with `full` on the command line
//! or `HASHLAB_FULL=1`. Datasets are read from `$HASHLAB_DATA_DIR`, else
//! `<workspace>/data`.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use hashlab::baselines::*;
use hashlab::codes::{code_balance, code_correlation, max_off_diagonal, BinaryCodeSet, HashEncoder};
use hashlab::datasets::*;
use hashlab::deep::layers::*;
use hashlab::deep::*;
use hashlab::eval::{average_precision, mean_ap};
use hashlab::index::{rank_all, radius_search, RankedList};
use hashlab::numerics::{derive_seed, Rng};

enum Outcome {
    Pass(String),
    Fail(String),
    /// Inputs are missing; reported as FAIL without failing the run.
    Unavailable(String),
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn within(outcome: Outcome, elapsed: Duration, budget: Duration) -> Outcome {
    match outcome {
        Outcome::Pass(d) if elapsed > budget => Outcome::Fail(format!("{d}; took {elapsed:.1?}, budget {budget:?}")),
        Outcome::Pass(d) => Outcome::Pass(format!("{d}; {elapsed:.1?}")),
        other => other,
    }
}

fn data_root() -> PathBuf {
    std::env::var_os(DATA_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data"))
}

// ---------------------------------------------------------------------------
// 1. Hamming ranking against bit loops

fn naive_distance(codes: &BinaryCodeSet, i: usize, q: &BinaryCodeSet, j: usize) -> u32 {
    (0..codes.bits()).filter(|&k| codes.get(i, k) != q.get(j, k)).count() as u32
}

fn random_codes(n: usize, bits: usize, rng: &mut Rng) -> BinaryCodeSet {
    let rows: Vec<Vec<bool>> = (0..n).map(|_| (0..bits).map(|_| rng.uniform() < 0.5).collect()).collect();
    BinaryCodeSet::from_bools(bits, &rows).unwrap()
}

fn criterion_1() -> Outcome {
    let mut rng = Rng::new(1);
    let db = random_codes(1000, 64, &mut rng);
    let queries = random_codes(100, 64, &mut rng);
    let mut mismatches = 0;
    for j in 0..queries.len() {
        let dist: Vec<u32> = (0..db.len()).map(|i| naive_distance(&db, i, &queries, j)).collect();
        let mut order: Vec<usize> = (0..db.len()).collect();
        order.sort_by_key(|&i| (dist[i], i));
        let ranked = rank_all(queries.code_ref(j), &db).unwrap();
        if ranked.indices != order || ranked.distances != order.iter().map(|&i| dist[i]).collect::<Vec<_>>() {
            mismatches += 1;
        }
        for r in 0..=64 {
            let expect: Vec<usize> = (0..db.len()).filter(|&i| dist[i] as usize <= r).collect();
            if radius_search(queries.code_ref(j), &db, r).unwrap() != expect {
                mismatches += 1;
            }
        }
    }
    check(mismatches == 0, format!("{mismatches} mismatches over 100 rankings and 6500 radius queries"))
}

// ---------------------------------------------------------------------------
// 2. Average precision

fn identity_ranking(n: usize) -> RankedList {
    RankedList {
        indices: (0..n).collect(),
        distances: (0..n as u32).collect(),
    }
}

fn criterion_2() -> Outcome {
    let hand = average_precision(&identity_ranking(3), &[0, 2]).unwrap();
    let hand_err = (hand - 5.0 / 6.0).abs();

    // Every relevance subset of a 20-item ranking against an exact integer
    // computation scaled by lcm(1..=20).
    let n = 20u32;
    let lcm: u128 = 232_792_560;
    let ranking = identity_ranking(n as usize);
    let mut worst = 0.0f64;
    for mask in 1u32..(1 << n) {
        let relevant: Vec<usize> = (0..n as usize).filter(|&i| mask >> i & 1 == 1).collect();
        let mut hits = 0u128;
        let mut num = 0u128;
        for &i in &relevant {
            hits += 1;
            num += hits * lcm / (i as u128 + 1);
        }
        let exact = num as f64 / (lcm as f64 * relevant.len() as f64);
        let got = average_precision(&ranking, &relevant).unwrap();
        worst = worst.max((got - exact).abs());
    }
    check(
        hand_err < 1e-12 && worst < 1e-12,
        format!("hand fixture error {hand_err:.1e}, worst over 2^20 - 1 subsets {worst:.1e}"),
    )
}

// ---------------------------------------------------------------------------
// 3. ITQ monotonicity

fn criterion_3() -> Outcome {
    let mut worst_rise = 0.0f64;
    let mut worst_orth = 0.0f64;
    for seed in 0..3u64 {
        let x = Rng::new(derive_seed(seed, "acceptance-itq")).gaussian_matrix(500, 32);
        let (_, trace) = itq_fit_traced(&x, 32, 50, seed).unwrap();
        assert_eq!(trace.losses.len(), 50);
        for w in trace.losses.windows(2) {
            worst_rise = worst_rise.max(w[1] - w[0]);
        }
        worst_orth = trace.orthogonality.iter().copied().fold(worst_orth, f64::max);
    }
    check(
        worst_rise <= 0.0 && worst_orth <= 1e-8,
        format!("largest loss increase {worst_rise:.2e}, max ||R^T R - I|| {worst_orth:.2e}"),
    )
}

// ---------------------------------------------------------------------------
// 4. Gradients

fn fd_worst<T: Real>(v: &mut [T], analytic: &[T], eps: f64, f: &dyn Fn(&[T]) -> f64) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..v.len() {
        let orig = v[i];
        v[i] = T::of(orig.f64() + eps);
        let up = f(v);
        v[i] = T::of(orig.f64() - eps);
        let down = f(v);
        v[i] = orig;
        worst = worst.max(relative_error(analytic[i].f64(), (up - down) / (2.0 * eps)));
    }
    worst
}

fn dot<T: Real>(a: &[T], b: &[T]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.f64() * y.f64()).sum()
}

fn tensor<T: Real>(dims: [usize; 4], scale: f64, rng: &mut Rng) -> Tensor4<T> {
    let n = dims.iter().product();
    Tensor4::new(dims, (0..n).map(|_| T::of(scale * rng.gaussian())).collect()).unwrap()
}

/// Worst relative error over each layer's input and parameter gradients.
fn layer_errors<T: Real>(eps: f64, seed: u64) -> Vec<(&'static str, f64)> {
    let mut rng = Rng::new(seed);
    let mut out = Vec::new();

    let g = ConvGeom { in_channels: 2, filters: 3, kernel: 3, stride: 1, pad: 1 };
    let mut x = tensor::<T>([2, 2, 5, 5], 0.25, &mut rng);
    let mut w = tensor::<T>([1, 1, 1, g.weight_len()], 1.0, &mut rng).data;
    let mut b = tensor::<T>([1, 1, 1, 3], 1.0, &mut rng).data;
    let (y, cache) = conv2d_forward(&x, &w, &b, &g).unwrap();
    let r = tensor::<T>(y.dims, 1.0, &mut rng);
    let grads = conv2d_backward(&r, &w, &cache, &g).unwrap();
    let (x0, w0, b0) = (x.clone(), w.clone(), b.clone());
    let e = fd_worst(&mut x.data, &grads.input.data, eps, &|v| {
        dot(&conv2d_forward(&Tensor4::new(x0.dims, v.to_vec()).unwrap(), &w0, &b0, &g).unwrap().0.data, &r.data)
    })
    .max(fd_worst(&mut w, &grads.weight, eps, &|v| dot(&conv2d_forward(&x0, v, &b0, &g).unwrap().0.data, &r.data)))
    .max(fd_worst(&mut b, &grads.bias, eps, &|v| dot(&conv2d_forward(&x0, &w0, v, &g).unwrap().0.data, &r.data)));
    out.push(("conv", e));

    // Values far from zero so the probes never cross the hinge.
    let mut x = tensor::<T>([2, 3, 2, 2], 1.0, &mut rng);
    x.data.iter_mut().for_each(|v| *v = if v.f64() >= 0.0 { *v + T::of(0.1) } else { *v - T::of(0.1) });
    let y = relu_forward(&x);
    let r = tensor::<T>(y.dims, 1.0, &mut rng);
    let dx = relu_backward(&r, &y).unwrap();
    let dims = x.dims;
    out.push(("relu", fd_worst(&mut x.data, &dx.data, eps, &|v| dot(&relu_forward(&Tensor4::new(dims, v.to_vec()).unwrap()).data, &r.data))));

    // A shuffled grid with spacing 0.1 keeps every window's winner stable.
    let n = 2 * 2 * 5 * 5;
    let mut levels: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut levels);
    let mut x = Tensor4::new([2, 2, 5, 5], levels.iter().map(|&l| T::of(0.1 * l as f64)).collect()).unwrap();
    let (y, cache) = maxpool_forward(&x, 2, 2).unwrap();
    let r = tensor::<T>(y.dims, 1.0, &mut rng);
    let dx = maxpool_backward(&r, &cache).unwrap();
    let dims = x.dims;
    out.push((
        "maxpool",
        fd_worst(&mut x.data, &dx.data, eps, &|v| dot(&maxpool_forward(&Tensor4::new(dims, v.to_vec()).unwrap(), 2, 2).unwrap().0.data, &r.data)),
    ));

    let units = 4;
    let mut x = tensor::<T>([3, 2, 2, 2], 1.0, &mut rng);
    let mut w = tensor::<T>([1, 1, units, 8], 1.0, &mut rng).data;
    let mut b = tensor::<T>([1, 1, 1, units], 1.0, &mut rng).data;
    let y = fc_forward(&x, &w, &b, units).unwrap();
    let r = tensor::<T>(y.dims, 1.0, &mut rng);
    let grads = fc_backward(&r, &x, &w, units).unwrap();
    let (x0, w0, b0) = (x.clone(), w.clone(), b.clone());
    let e = fd_worst(&mut x.data, &grads.input.data, eps, &|v| {
        dot(&fc_forward(&Tensor4::new(x0.dims, v.to_vec()).unwrap(), &w0, &b0, units).unwrap().data, &r.data)
    })
    .max(fd_worst(&mut w, &grads.weight, eps, &|v| dot(&fc_forward(&x0, v, &b0, units).unwrap().data, &r.data)))
    .max(fd_worst(&mut b, &grads.bias, eps, &|v| dot(&fc_forward(&x0, &w0, v, units).unwrap().data, &r.data)));
    out.push(("fc", e));

    let mut x = tensor::<T>([2, 5, 1, 1], 1.0, &mut rng);
    let y = sigmoid_forward(&x);
    let r = tensor::<T>(y.dims, 1.0, &mut rng);
    let dx = sigmoid_backward(&r, &y).unwrap();
    let dims = x.dims;
    out.push(("sigmoid", fd_worst(&mut x.data, &dx.data, eps, &|v| dot(&sigmoid_forward(&Tensor4::new(dims, v.to_vec()).unwrap()).data, &r.data))));

    let mut z = tensor::<T>([3, 5, 1, 1], 1.0, &mut rng);
    let labels = [4u8, 0, 2];
    let (_, grad, _) = softmax_xent(&z, &labels).unwrap();
    out.push((
        "softmax",
        fd_worst(&mut z.data, &grad.data, eps, &|v| {
            let mut total = 0.0;
            for (row, &l) in v.chunks(5).zip(&labels) {
                let lse = row.iter().map(|x| x.f64().exp()).sum::<f64>().ln();
                total += lse - row[l as usize].f64();
            }
            total / 3.0
        }),
    ));
    out
}

fn toy_batch<T: Real>(n: usize, shape: ImageShape, seed: u64) -> (Tensor4<T>, Vec<u8>) {
    let mut rng = Rng::new(seed);
    let data = (0..n * shape.len()).map(|_| T::of(rng.uniform())).collect();
    let x = Tensor4::new([n, shape.channels, shape.height, shape.width], data).unwrap();
    (x, (0..n).map(|i| (i % 10) as u8).collect())
}

fn criterion_4() -> Outcome {
    let mut worst32 = layer_errors::<f32>(1e-3, 0);
    let mut worst64 = layer_errors::<f64>(1e-6, 0);
    let toy = ImageShape { channels: 1, height: 12, width: 12 };
    let spec = NetSpec::standard(toy, 6, 10);
    let params = NetParams::<f32>::init(&spec, WeightInit::FanIn, &mut Rng::new(3)).unwrap();
    let (x, labels) = toy_batch::<f32>(4, toy, 1);
    let (mut checked, mut skipped) = (0, 0);
    let mut stack32 = 0.0f64;
    for b in grad_check(&spec, &params, &x, &labels, default_eps::<f32>(), 40, 0).unwrap() {
        stack32 = stack32.max(b.max_rel_error);
        checked += b.checked;
        skipped += b.skipped;
    }
    let (x, labels) = toy_batch::<f64>(4, toy, 1);
    let mut stack64 = 0.0f64;
    for b in grad_check(&spec, &params.cast::<f64>(), &x, &labels, default_eps::<f64>(), 40, 0).unwrap() {
        stack64 = stack64.max(b.max_rel_error);
        checked += b.checked;
        skipped += b.skipped;
    }
    worst32.push(("stack", stack32));
    worst64.push(("stack", stack64));
    let fmt = |v: &[(&str, f64)]| v.iter().map(|(n, e)| format!("{n} {e:.1e}")).collect::<Vec<_>>().join(", ");
    let ok = worst32.iter().all(|(_, e)| *e < 1e-3) && worst64.iter().all(|(_, e)| *e < 1e-5) && checked >= 2 * skipped;
    check(
        ok,
        format!("32-bit [{}]; 64-bit [{}]; {checked} stack entries checked, {skipped} kink-skipped", fmt(&worst32), fmt(&worst64)),
    )
}

// ---------------------------------------------------------------------------
// MNIST desk-scale protocol shared by 5, 6, 7 and 9

struct Mnist {
    train: LabeledDataset,
    test: LabeledDataset,
}

fn load_mnist_splits() -> Result<Mnist, String> {
    let root = data_root();
    let load = |split| {
        let (img, lab) = mnist_paths(&root, split);
        if !img.exists() || !lab.exists() {
            return Err(format!("MNIST not found under {}", root.display()));
        }
        load_mnist(img, lab).map_err(|e| e.to_string())
    };
    Ok(Mnist { train: load(Split::Train)?, test: load(Split::Test)? })
}

/// 10,000 database images from the training split, 1,000 test queries.
fn desk_split(m: &Mnist, seed: u64) -> (LabeledDataset, LabeledDataset) {
    let db = split_query(m.train.len(), 10_000, derive_seed(seed, "database")).unwrap().query_indices;
    let q = split_query(m.test.len(), 1_000, derive_seed(seed, "query")).unwrap().query_indices;
    (m.train.subset(&db), m.test.subset(&q))
}

/// mAP per (seed, bits) for LSH, PCAH, ITQ and SH on centered, unit-norm
/// features fitted on the database.
struct BaselineTable {
    rows: Vec<(u64, usize, [f64; 4])>,
}

impl BaselineTable {
    fn mean(&self, bits: usize, method: usize) -> f64 {
        let v: Vec<f64> = self.rows.iter().filter(|r| r.1 == bits).map(|r| r.2[method]).collect();
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn baseline_table(m: &Mnist, bit_list: &[usize]) -> BaselineTable {
    let mut rows = Vec::new();
    for seed in 0..3u64 {
        let (db, q) = desk_split(m, seed);
        let pre = Preprocessor::fit(&db.features, true, true);
        let xd = pre.apply(&db.features).unwrap();
        let xq = pre.apply(&q.features).unwrap();
        let full = PcaModel::fit_full(&xd).unwrap();
        for &bits in bit_list {
            let lsh = lsh_fit(xd.cols(), bits, seed).unwrap();
            let pcah = full.truncate(bits);
            let (itq, _) = itq_from_pca(full.truncate(bits), &xd, DEFAULT_ITQ_ITERS, seed).unwrap();
            let sh = sh_from_pca(full.truncate(bits), &xd, bits).unwrap();
            let encoders: [&dyn HashEncoder; 4] = [&lsh, &pcah, &itq, &sh];
            let maps = encoders.map(|e| mean_ap(&e.encode(&xq).unwrap(), &e.encode(&xd).unwrap(), &db.labels, &q.labels).unwrap());
            rows.push((seed, bits, maps));
        }
    }
    BaselineTable { rows }
}

const LSH: usize = 0;
const PCAH: usize = 1;
const ITQ: usize = 2;
const SH: usize = 3;

fn criterion_5(table: &BaselineTable) -> Outcome {
    let (itq, sh, lsh) = (table.mean(32, ITQ), table.mean(32, SH), table.mean(32, LSH));
    check(itq > sh && sh > lsh, format!("32 bits: ITQ {itq:.4}, SH {sh:.4}, LSH {lsh:.4}"))
}

fn criterion_6(table: &BaselineTable) -> Outcome {
    let lsh: Vec<f64> = [16, 32, 48].iter().map(|&b| table.mean(b, LSH)).collect();
    let (p16, p48) = (table.mean(16, PCAH), table.mean(48, PCAH));
    check(
        lsh[0] < lsh[1] && lsh[1] < lsh[2] && p48 < p16,
        format!("LSH 16/32/48: {:.4}/{:.4}/{:.4}; PCAH 16 {p16:.4} vs 48 {p48:.4}", lsh[0], lsh[1], lsh[2]),
    )
}

/// Epochs for the 10,000-image run; see the README for the timing.
const DESK_EPOCHS: usize = 10;

fn deep_map(db: &LabeledDataset, q: &LabeledDataset, bits: usize, epochs: usize, seed: u64) -> Result<f64, String> {
    let spec = NetSpec::standard(db.image_shape.expect("raw pixels"), bits, NUM_CLASSES);
    let cfg = TrainConfig { epochs, seed, ..TrainConfig::default() };
    let start = Instant::now();
    let trained = train_with(db, &spec, &cfg, |e| {
        eprintln!("  epoch {:>2} loss {:.4} acc {:.4} ({:.0?})", e.epoch, e.loss, e.train_accuracy, start.elapsed())
    })
    .map_err(|e| e.to_string())?;
    let model = DeepHashModel::new(spec, trained.params).map_err(|e| e.to_string())?;
    let cd = model.encode(&db.features).map_err(|e| e.to_string())?;
    let cq = model.encode(&q.features).map_err(|e| e.to_string())?;
    mean_ap(&cq, &cd, &db.labels, &q.labels).map_err(|e| e.to_string())
}

fn criterion_7(m: &Mnist) -> Outcome {
    let (db, q) = desk_split(m, 0);
    match deep_map(&db, &q, 24, DESK_EPOCHS, 0) {
        Ok(map) => check(map >= 0.90, format!("24 bits, 10,000 images, {DESK_EPOCHS} epochs: mAP {map:.4} (target 0.90)")),
        Err(e) => Outcome::Fail(e),
    }
}

fn criterion_7_full(m: &Mnist) -> Outcome {
    let q = split_query(m.test.len(), 1_000, derive_seed(0, "query")).unwrap().query_indices;
    let q = m.test.subset(&q);
    let epochs = TrainConfig::default().epochs;
    match deep_map(&m.train, &q, 24, epochs, 0) {
        Ok(map) => check(map >= 0.95, format!("24 bits, 60,000 images, {epochs} epochs: mAP {map:.4} (target 0.95)")),
        Err(e) => Outcome::Fail(e),
    }
}

fn criterion_8() -> Outcome {
    let root = data_root();
    let train_paths = cifar10_paths(&root, Split::Train);
    let test_paths = cifar10_paths(&root, Split::Test);
    if let Some(p) = train_paths.iter().chain(&test_paths).find(|p| !p.exists()) {
        return Outcome::Unavailable(format!("CIFAR-10 binary batches not found ({} missing)", p.display()));
    }
    let train = load_cifar10(&train_paths).unwrap();
    let test = load_cifar10(&test_paths).unwrap();
    let db = train.subset(&split_query(train.len(), 2_000, derive_seed(0, "database")).unwrap().query_indices);
    let q = test.subset(&split_query(test.len(), 1_000, derive_seed(0, "query")).unwrap().query_indices);
    let mut rng = Rng::new(derive_seed(0, "random-codes"));
    let random = mean_ap(&random_codes(q.len(), 16, &mut rng), &random_codes(db.len(), 16, &mut rng), &db.labels, &q.labels).unwrap();
    match deep_map(&db, &q, 16, 5, 0) {
        Ok(map) => check(map.is_finite() && map >= random + 0.05, format!("16 bits, 5 epochs: mAP {map:.4} vs random codes {random:.4}")),
        Err(e) => Outcome::Fail(e),
    }
}

fn criterion_9(m: &Mnist) -> Outcome {
    let (db, _) = desk_split(m, 0);
    let xd = Preprocessor::fit(&db.features, true, false).apply(&db.features).unwrap();
    let itq = itq_fit(&xd, 32, DEFAULT_ITQ_ITERS, 0).unwrap();
    let codes = itq.encode(&xd).unwrap();
    let balance = code_balance(&codes).unwrap();
    let (lo, hi) = balance.iter().fold((1.0f64, 0.0f64), |(lo, hi), &b| (lo.min(b), hi.max(b)));
    let corr = max_off_diagonal(&code_correlation(&codes).unwrap());
    check(
        lo >= 0.25 && hi <= 0.75 && corr < 0.5,
        format!("32-bit ITQ: bit balance in [{lo:.3}, {hi:.3}], max |off-diagonal correlation| {corr:.3}"),
    )
}

// ---------------------------------------------------------------------------

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let full = args.iter().any(|a| a == "full") || std::env::var("HASHLAB_FULL").is_ok_and(|v| v == "1");
    let wanted = |n: &str| args.iter().all(|a| a == "full") || args.iter().any(|a| a == n);

    let mut failed = false;
    let mut report = |n: &str, outcome: Outcome| {
        let line = match outcome {
            Outcome::Pass(d) => format!("PASS criterion {n}: {d}"),
            Outcome::Fail(d) => {
                failed = true;
                format!("FAIL criterion {n}: {d}")
            }
            Outcome::Unavailable(d) => format!("FAIL criterion {n}: {d} (inputs unavailable, not counted against the run)"),
        };
        println!("{line}");
    };
    let timed = |f: &dyn Fn() -> Outcome, budget: u64| {
        let start = Instant::now();
        let o = f();
        within(o, start.elapsed(), Duration::from_secs(budget))
    };

    if wanted("1") {
        report("1", timed(&criterion_1, 5));
    }
    if wanted("2") {
        report("2", timed(&criterion_2, 60));
    }
    if wanted("3") {
        report("3", timed(&criterion_3, 30));
    }
    if wanted("4") {
        report("4", timed(&criterion_4, 120));
    }

    let needs_mnist = ["5", "6", "7", "9"].iter().any(|n| wanted(n)) || full;
    let mnist = if needs_mnist { Some(load_mnist_splits()) } else { None };
    match &mnist {
        Some(Ok(m)) => {
            if wanted("5") || wanted("6") {
                let start = Instant::now();
                let table = baseline_table(m, &[16, 32, 48]);
                let elapsed = start.elapsed();
                // The table is shared; its cost counts against both budgets.
                if wanted("5") {
                    report("5", within(criterion_5(&table), elapsed, Duration::from_secs(600)));
                }
                if wanted("6") {
                    report("6", within(criterion_6(&table), elapsed, Duration::from_secs(900)));
                }
            }
            if wanted("7") {
                report("7", timed(&|| criterion_7(m), 20 * 60));
            }
            if full {
                report("7 (full)", timed(&|| criterion_7_full(m), 2 * 3600));
            }
        }
        Some(Err(e)) => {
            for n in ["5", "6", "7", "9"].into_iter().filter(|n| wanted(n)) {
                report(n, Outcome::Unavailable(e.clone()));
            }
        }
        None => {}
    }
    if wanted("8") {
        report("8", timed(&criterion_8, 30 * 60));
    }
    if wanted("9") {
        if let Some(Ok(m)) = &mnist {
            report("9", criterion_9(m));
        }
    }

    if failed {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
