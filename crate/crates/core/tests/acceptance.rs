//! Acceptance criteria, one line each. Runs without the libtest harness so the
//! report is printed even when output capture is on.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::time::Instant;

use mindid::boost::{build_tree, BoostConfig, Node, RegressionTree};
use mindid::cli::{
    cmd_compare_patterns, cmd_correlate, cmd_pipeline, DatasetSource, Preset, RunConfig,
    REPORT_FILE,
};
use mindid::data::EdfSelection;
use mindid::nn::{gradients, loss, AttentionRnn, NetworkConfig};
use mindid::rng::substream;
use mindid::signal::{design_bandpass, Band, BandName};
use ndarray::Array2;
use rand::Rng;

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

// ---------------------------------------------------------------- criterion 1

/// Analytic magnitude of an order-`n` Butterworth band-pass after the bilinear
/// transform with prewarped edges.
fn butterworth_bandpass_gain(f: f64, lo: f64, hi: f64, fs: f64, n: usize) -> f64 {
    let warp = |f: f64| (PI * f / fs).tan();
    let (w, w1, w2) = (warp(f), warp(lo), warp(hi));
    let x = (w * w - w1 * w2) / (w * (w2 - w1));
    1.0 / (1.0 + x.powi(2 * n as i32)).sqrt()
}

/// Steady-state amplitude of the filtered unit sinusoid, by least squares on
/// the last `tail` samples.
fn measured_gain(
    design: &mindid::signal::FilterDesign,
    f: f64,
    fs: f64,
    len: usize,
    tail: usize,
) -> f64 {
    let x = ndarray::Array1::from_shape_fn(len, |i| (2.0 * PI * f * i as f64 / fs).sin());
    let y = design.filter_vec(x.view());
    let (mut ss, mut cc, mut sc, mut ys, mut yc) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (i, v) in y.iter().enumerate().skip(len - tail) {
        let t = 2.0 * PI * f * i as f64 / fs;
        let (s, c) = t.sin_cos();
        ss += s * s;
        cc += c * c;
        sc += s * c;
        ys += v * s;
        yc += v * c;
    }
    let det = ss * cc - sc * sc;
    let a = (ys * cc - yc * sc) / det;
    let b = (yc * ss - ys * sc) / det;
    a.hypot(b)
}

fn filter_fidelity() -> Outcome {
    let fs = 128.0;
    let band = Band::standard(BandName::Delta, fs);
    let design = match design_bandpass(band, fs, 3) {
        Ok(d) => d,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let (len, tail) = (128 * 600, 128 * 200);
    let g05 = measured_gain(&design, 0.5, fs, len, tail);
    let g4 = measured_gain(&design, 4.0, fs, len, tail);
    let g50 = measured_gain(&design, 50.0, fs, len, tail);
    let oracle_gap = [
        (0.5, g05),
        (4.0, g4),
        (50.0, g50),
        (2.0, measured_gain(&design, 2.0, fs, len, tail)),
    ]
    .iter()
    .map(|&(f, g)| (g - butterworth_bandpass_gain(f, 0.5, 4.0, fs, 3)).abs())
    .fold(0.0, f64::max);
    let detail = format!(
        "|H(0.5)|={g05:.4} |H(4)|={g4:.4} |H(50)|={g50:.2e}, max gap to analytic {oracle_gap:.1e}"
    );
    let edge = |g: f64| (g - std::f64::consts::FRAC_1_SQRT_2).abs() <= 0.02;
    if edge(g05) && edge(g4) && g50 < 1e-3 && oracle_gap < 1e-3 {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

// ---------------------------------------------------------------- criterion 2

fn objective(model: &AttentionRnn, x: &Array2<f64>, y: &[usize]) -> f64 {
    let k = model.config.output_dim;
    let mut logits = Array2::zeros((x.nrows(), k));
    for (i, row) in x.rows().into_iter().enumerate() {
        let out = model.forward(row.as_slice().unwrap()).unwrap();
        logits.row_mut(i).assign(&ndarray::Array1::from(out.logits));
    }
    loss(logits.view(), y, model, model.config.l2_lambda)
}

fn worst_gradient_error(seq_len: usize) -> (f64, usize) {
    let config = NetworkConfig {
        input_dim: 3,
        hidden_dim: 4,
        encoder_dense_layers: 2,
        lstm_cells: 4,
        decoder_hidden: 4,
        output_dim: 2,
        seq_len,
        l2_lambda: 0.01,
        init_scale: 0.5,
        seed: 17,
        ..NetworkConfig::default()
    };
    let model = AttentionRnn::new(config.clone()).unwrap();
    let x = Array2::from_shape_fn((5, config.sample_len()), |(i, j)| {
        ((i * 5 + j * 2) as f64 * 0.61).cos()
    });
    let y: Vec<usize> = (0..5).map(|i| i % 2).collect();
    let analytic = gradients(&model, x.view(), &y).unwrap();
    let h = 1e-5;
    let (mut worst, mut count): (f64, usize) = (0.0, 0);
    for k in 0..analytic.affines.len() {
        let a = &analytic.affines[k];
        let n_w = a.weights.len();
        for idx in 0..n_w + a.bias.len() {
            let bumped = |d: f64| {
                let mut m = model.clone();
                let t = &mut m.affines_mut()[k];
                if idx < n_w {
                    t.weights.as_slice_mut().unwrap()[idx] += d;
                } else {
                    t.bias[idx - n_w] += d;
                }
                objective(&m, &x, &y)
            };
            let numeric = (bumped(h) - bumped(-h)) / (2.0 * h);
            let exact = if idx < n_w {
                a.weights.as_slice().unwrap()[idx]
            } else {
                a.bias[idx - n_w]
            };
            worst = worst.max((exact - numeric).abs() / exact.abs().max(numeric.abs()).max(1e-6));
            count += 1;
        }
    }
    (worst, count)
}

fn gradient_correctness() -> Outcome {
    let (w1, n1) = worst_gradient_error(1);
    let (w3, n3) = worst_gradient_error(3);
    let detail = format!(
        "worst relative error {:.2e} over {} parameters (seq_len 1 and 3)",
        w1.max(w3),
        n1 + n3
    );
    if w1 < 1e-4 && w3 < 1e-4 {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

// ---------------------------------------------------------------- criterion 3

struct Instance {
    x: Array2<f64>,
    g: Vec<f64>,
    h: Vec<f64>,
    config: BoostConfig,
}

fn instance(i: u64) -> Instance {
    let mut rng = substream(i, "acceptance/boost");
    let n = rng.random_range(2..=50);
    let d = rng.random_range(1..=5);
    // Coarse columns force repeated values.
    let coarse: Vec<bool> = (0..d).map(|_| rng.random_bool(0.4)).collect();
    let x = Array2::from_shape_fn((n, d), |(_, j)| {
        let v: f64 = rng.random_range(-2.0..2.0);
        if coarse[j] {
            v.round()
        } else {
            v
        }
    });
    let g = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let h = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
    let config = BoostConfig {
        max_depth: rng.random_range(1..=4),
        reg_lambda: [0.0, 0.5, 1.0][rng.random_range(0..3)],
        gamma: [0.0, 0.0, 0.05][rng.random_range(0..3)],
        ..BoostConfig::default()
    };
    Instance { x, g, h, config }
}

fn gain(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64, gamma: f64) -> f64 {
    let score = |g: f64, h: f64| g * g / (h + lambda);
    0.5 * (score(gl, hl) + score(gr, hr) - score(gl + gr, hl + hr)) - gamma
}

/// Every (feature, distinct-value boundary), scored from scratch.
fn brute_force(inst: &Instance, rows: &[usize]) -> Vec<(usize, Vec<usize>, f64)> {
    let mut out = Vec::new();
    for j in 0..inst.x.ncols() {
        let mut values: Vec<f64> = rows.iter().map(|&r| inst.x[[r, j]]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for &v in &values[..values.len().saturating_sub(1)] {
            let left: Vec<usize> = rows
                .iter()
                .copied()
                .filter(|&r| inst.x[[r, j]] <= v)
                .collect();
            let sum = |set: &mut dyn Iterator<Item = usize>| {
                set.fold((0.0, 0.0), |(g, h), r| (g + inst.g[r], h + inst.h[r]))
            };
            let (gl, hl) = sum(&mut left.iter().copied());
            let (gr, hr) = sum(&mut rows.iter().copied().filter(|r| !left.contains(r)));
            out.push((
                j,
                left,
                gain(gl, hl, gr, hr, inst.config.reg_lambda, inst.config.gamma),
            ));
        }
    }
    out
}

/// Walks the tree, checking every node against the oracle on the rows that
/// reach it.
fn check_node(
    inst: &Instance,
    tree: &RegressionTree,
    idx: usize,
    rows: &[usize],
    depth: usize,
) -> Result<(), String> {
    let candidates = brute_force(inst, rows);
    let best = candidates
        .iter()
        .map(|c| c.2)
        .fold(f64::NEG_INFINITY, f64::max);
    match &tree.nodes[idx] {
        Node::Leaf { weight } => {
            if depth < inst.config.max_depth && best > 1e-9 {
                return Err(format!(
                    "leaf at depth {depth} although a split gains {best}"
                ));
            }
            let (g, h) = rows
                .iter()
                .fold((0.0, 0.0), |(g, h), &r| (g + inst.g[r], h + inst.h[r]));
            let expected = -g / (h + inst.config.reg_lambda);
            if (weight - expected).abs() > 1e-9 {
                return Err(format!("leaf weight {weight}, expected {expected}"));
            }
            Ok(())
        }
        &Node::Split {
            feature,
            threshold,
            gain: reported,
            left,
            right,
        } => {
            if depth >= inst.config.max_depth {
                return Err(format!("split below the depth limit at depth {depth}"));
            }
            let (l, r): (Vec<usize>, Vec<usize>) = rows
                .iter()
                .partition(|&&row| inst.x[[row, feature]] < threshold);
            let own = candidates
                .iter()
                .find(|c| c.0 == feature && c.1 == l)
                .ok_or_else(|| format!("split x{feature} < {threshold} is not a value boundary"))?;
            if (own.2 - best).abs() > 1e-9 || (reported - best).abs() > 1e-9 {
                return Err(format!(
                    "gain {reported} (recomputed {}) but the best is {best}",
                    own.2
                ));
            }
            check_node(inst, tree, left, &l, depth + 1)?;
            check_node(inst, tree, right, &r, depth + 1)
        }
    }
}

fn boosting_oracle() -> Outcome {
    let count = 60;
    let mut splits = 0;
    for i in 0..count {
        let inst = instance(i);
        let n = inst.x.nrows();
        let mask: Vec<bool> = if i % 3 == 0 {
            (0..n).map(|r| r % 4 != 1).collect()
        } else {
            vec![true; n]
        };
        let rows: Vec<usize> = (0..n).filter(|&r| mask[r]).collect();
        let tree = match build_tree(inst.x.view(), &inst.g, &inst.h, &inst.config, &mask) {
            Ok(t) => t,
            Err(e) => return Outcome::Fail(format!("instance {i}: {e}")),
        };
        if let Err(e) = check_node(&inst, &tree, 0, &rows, 0) {
            return Outcome::Fail(format!("instance {i} ({}x{}): {e}", n, inst.x.ncols()));
        }
        splits += tree.splits();
    }
    Outcome::Pass(format!(
        "{count} instances, {splits} split nodes match brute force within 1e-9"
    ))
}

// ---------------------------------------------------------- criteria 4, 5, 8

fn ci_config() -> RunConfig {
    RunConfig::preset(Preset::Ci).with_seed(0)
}

fn end_to_end() -> Outcome {
    let out = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let (table, _) = match cmd_compare_patterns(&ci_config(), out.path()) {
        Ok(t) => t,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let delta = table.row(BandName::Delta).map_or(0.0, |r| r.accuracy);
    let others: Vec<String> = table
        .rows
        .iter()
        .filter(|r| r.band != BandName::Delta)
        .map(|r| format!("{} {:.4}", r.band, r.accuracy))
        .collect();
    let detail = format!(
        "delta accuracy {delta:.4}; {}; {:.0} s",
        others.join(", "),
        start.elapsed().as_secs_f64()
    );
    if delta >= 0.95 && table.strictly_best(BandName::Delta) {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn correlation_study() -> Outcome {
    let out = tempfile::tempdir().unwrap();
    let report = match cmd_correlate(&ci_config(), out.path()) {
        Ok(r) => r,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let averages: Vec<String> = report
        .table
        .bands
        .iter()
        .map(|b| format!("{} {:.3}", b.band, b.average))
        .collect();
    let detail = format!("averages: {}", averages.join(", "));
    if report.table.lowest() == Some(BandName::Delta) {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn determinism() -> Outcome {
    let config = ci_config();
    let mut reports = Vec::new();
    for _ in 0..2 {
        let out = tempfile::tempdir().unwrap();
        if let Err(e) = cmd_pipeline(&config, out.path()) {
            return Outcome::Fail(e.to_string());
        }
        reports.push(std::fs::read(out.path().join(REPORT_FILE)).unwrap());
    }
    if reports[0] == reports[1] {
        Outcome::Pass(format!("{} identical bytes", reports[0].len()))
    } else {
        Outcome::Fail("report.json differs between runs".into())
    }
}

// ---------------------------------------------------------------- criterion 6

fn eegmmidb_root() -> Option<PathBuf> {
    let root = std::env::var_os("MINDID_EEGMMIDB")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/eegmmidb"));
    let sel = EdfSelection::default();
    mindid::data::eegmmidb_path(&root, 1, sel.run)
        .exists()
        .then_some(root)
}

fn public_data() -> Outcome {
    let Some(root) = eegmmidb_root() else {
        return Outcome::Skip("eegmmidb not found (set MINDID_EEGMMIDB to its root)".into());
    };
    let config = RunConfig {
        dataset: DatasetSource::Eegmmidb {
            root,
            selection: EdfSelection::default(),
        },
        ..ci_config()
    };
    let out = tempfile::tempdir().unwrap();
    match cmd_pipeline(&config, out.path()) {
        Ok(o) => {
            let acc = o.report.evaluation.accuracy;
            let detail = format!("delta accuracy {acc:.4} (reference 0.9989)");
            if acc >= 0.95 {
                Outcome::Pass(detail)
            } else {
                Outcome::Fail(detail)
            }
        }
        Err(e) => Outcome::Fail(e.to_string()),
    }
}

type Check = fn() -> Outcome;

fn main() {
    let criteria: [(&str, Check); 7] = [
        ("1 filter fidelity", filter_fidelity),
        ("2 gradient correctness", gradient_correctness),
        ("3 boosting oracle equivalence", boosting_oracle),
        ("5 correlation study", correlation_study),
        ("6 public data", public_data),
        ("4 end-to-end synthetic identification", end_to_end),
        ("8 determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let line = match check() {
            Outcome::Pass(d) => format!("PASS  criterion {name}: {d}"),
            Outcome::Skip(d) => format!("SKIP  criterion {name}: {d}"),
            Outcome::Fail(d) => {
                failed += 1;
                format!("FAIL  criterion {name}: {d}")
            }
        };
        println!("{line}");
    }
    println!(
        "INFO  criterion 7: the private-dataset accuracies 0.982 and 0.9882 need recordings that are not public; not run"
    );
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
