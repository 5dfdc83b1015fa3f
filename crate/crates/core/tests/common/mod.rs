#![allow(dead_code)]

use std::path::{Path, PathBuf};

use pqgcn::cli::{cmd_prepare, RunConfig};
use pqgcn::graphs::{load_bundle, GraphBundle};
use pqgcn::model::{ModelConfig, PqGcnParams};

pub fn toy_dir() -> PathBuf {
    // Resolves from both the core crate and the acceptance crate.
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data/toy")
}

/// Toy run config writing into `out`.
pub fn toy_config(out: &Path) -> RunConfig {
    let o = vec![("output_dir".to_string(), format!("{:?}", out.display().to_string()))];
    RunConfig::load(&toy_dir().join("config.toml"), &o).expect("toy config loads")
}

pub fn toy_bundle(out: &Path) -> (RunConfig, GraphBundle) {
    let cfg = toy_config(out);
    let dir = cmd_prepare(&cfg).expect("toy bundle prepares");
    (cfg, load_bundle(&dir).expect("toy bundle loads"))
}

/// Write a small corpus with class-specific keywords to `dir` and return
/// the config path. Every class has its own keywords; the frame words are
/// shared. Includes entity vectors so all five views build.
pub fn write_keyword_corpus(dir: &Path, per_class: usize, extra_config: &str) -> PathBuf {
    let classes = [
        ("ANIMAL", ["tiger", "wolf", "eagle", "shark", "otter", "falcon"]),
        ("PLACE", ["paris", "nigeria", "everest", "amazon", "sahara", "tokyo"]),
        ("NUMBER", ["million", "percent", "dozen", "distance", "population", "height"]),
    ];
    let frames = [
        "what is the big {a} of the {b}",
        "which {a} is the old {b}",
        "name the famous {a} near the {b}",
        "what {a} has the large {b}",
        "where is the small {a} and {b}",
    ];
    let mut train = String::new();
    let mut test = String::new();
    for (c, (label, words)) in classes.iter().enumerate() {
        for i in 0..per_class + 2 {
            let frame = frames[(i + c) % frames.len()];
            let a = words[i % words.len()];
            let b = words[(i * 2 + 1) % words.len()];
            let line = format!("{label}\t{}\n", frame.replace("{a}", a).replace("{b}", b));
            if i < per_class {
                train.push_str(&line);
            } else {
                test.push_str(&line);
            }
        }
    }
    std::fs::write(dir.join("train.tsv"), train).unwrap();
    std::fs::write(dir.join("test.tsv"), test).unwrap();
    let mut ents = String::new();
    for (c, (_, words)) in classes.iter().enumerate() {
        for (i, w) in words.iter().enumerate() {
            let v: Vec<String> = (0..3)
                .map(|d| format!("{:.3}", if d == c { 1.0 } else { 0.1 * (i as f64 - 2.5) }))
                .collect();
            ents.push_str(&format!("{w}\t{}\n", v.join(" ")));
        }
    }
    std::fs::write(dir.join("entities.vec"), ents).unwrap();
    let config = format!(
        "output_dir = \"out\"\n[corpus]\ntrain = \"train.tsv\"\ntest = \"test.tsv\"\n\
         [embeddings]\nentity = \"entities.vec\"\n{extra_config}"
    );
    let path = dir.join("config.toml");
    std::fs::write(&path, config).unwrap();
    path
}

type Dense = Vec<Vec<f64>>;

fn zeros(r: usize, c: usize) -> Dense {
    vec![vec![0.0; c]; r]
}

fn mm(a: &Dense, b: &Dense) -> Dense {
    let (n, k, m) = (a.len(), b.len(), b.first().map_or(0, Vec::len));
    let mut out = zeros(n, m);
    for i in 0..n {
        for j in 0..m {
            let mut s = 0.0;
            for t in 0..k {
                s += a[i][t] * b[t][j];
            }
            out[i][j] = s;
        }
    }
    out
}

fn tensor(t: &pqgcn::nn::Tensor) -> Dense {
    (0..t.rows()).map(|r| t.row(r).to_vec()).collect()
}

/// Straight-line evaluation-mode forward pass from the bundle's raw edges,
/// with the one-hot identity written out and no sparse kernels. `mask`
/// multiplies the question embedding elementwise (train-mode dropout).
pub fn dense_forward(bundle: &GraphBundle, config: &ModelConfig, params: &PqGcnParams, mask: Option<&Dense>) -> Dense {
    assert_eq!(config.view_depth, 1);
    assert!(config.final_hidden.is_none());
    let nq = bundle.num_questions();
    let mut q_parts: Vec<Dense> = Vec::new();
    for kind in config.views() {
        let view = bundle.view(kind).unwrap();
        let n = view.graph.vocab.len();
        let mut a = zeros(n, n);
        for (i, row) in a.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        for &(i, j, w) in &view.graph.edges {
            a[i][j] += w;
            a[j][i] += w;
        }
        let d: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
        let a_hat: Dense = (0..n)
            .map(|i| (0..n).map(|j| a[i][j] / (d[i].sqrt() * d[j].sqrt())).collect())
            .collect();
        let e = view.graph.pretrained.as_ref().map(tensor);
        let x: Dense = (0..n)
            .map(|i| {
                let mut row = vec![0.0; n];
                row[i] = 1.0;
                if let Some(e) = &e {
                    row.extend_from_slice(&e[i]);
                }
                row
            })
            .collect();
        let w = tensor(params.get(&format!("{kind}.w1")).unwrap());
        let h: Dense = mm(&mm(&a_hat, &x), &w)
            .into_iter()
            .map(|r| r.into_iter().map(|v| v.max(0.0)).collect())
            .collect();
        let mut t = zeros(nq, n);
        for (r, c, v) in view.incidence.matrix.triplets() {
            t[r][c] = v;
        }
        q_parts.push(mm(&t, &h));
    }
    let mut q: Dense = (0..nq).map(|i| q_parts.iter().flat_map(|p| p[i].clone()).collect()).collect();
    if let Some(m) = mask {
        for (row, mrow) in q.iter_mut().zip(m) {
            for (v, s) in row.iter_mut().zip(mrow) {
                *v *= s;
            }
        }
    }
    let norms: Vec<f64> = q.iter().map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    let mut aq = zeros(nq, nq);
    for i in 0..nq {
        for j in 0..nq {
            if i == j {
                aq[i][j] = 1.0;
                continue;
            }
            let s = if norms[i] < 1e-12 || norms[j] < 1e-12 {
                0.0
            } else {
                q[i].iter().zip(&q[j]).map(|(a, b)| a * b).sum::<f64>() / (norms[i] * norms[j])
            };
            if s >= config.threshold {
                aq[i][j] = s;
            }
        }
    }
    let dq: Vec<f64> = aq.iter().map(|r| r.iter().sum()).collect();
    let aq_hat: Dense = (0..nq)
        .map(|i| (0..nq).map(|j| aq[i][j] / (dq[i] * dq[j]).sqrt()).collect())
        .collect();
    mm(&mm(&aq_hat, &q), &tensor(params.get("question.out").unwrap()))
}

pub fn max_diff(a: &Dense, b: &pqgcn::nn::Tensor) -> f64 {
    assert_eq!((a.len(), a[0].len()), b.shape());
    let mut m: f64 = 0.0;
    for (i, row) in a.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            m = m.max((v - b.get(i, j)).abs());
        }
    }
    m
}
