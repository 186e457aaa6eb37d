#![allow(dead_code)]

use gnnevade::{DenseMatrix, Tape, Var};

pub const FD_STEP: f64 = 1e-5;
pub const FD_REL_TOL: f64 = 1e-4;
pub const FD_ABS_FLOOR: f64 = 1e-8;

/// Largest violation of `|a - n| <= rel * max(|a|, |n|) + floor`, expressed
/// as the ratio of the error to its allowance (pass iff < 1).
pub fn worst_ratio(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / (FD_REL_TOL * a.abs().max(n.abs()) + FD_ABS_FLOOR))
        .fold(0.0, f64::max)
}

/// Central finite differences of a scalar function of several matrices,
/// taken with respect to input `which`.
pub fn numeric_grad(
    inputs: &[DenseMatrix],
    which: usize,
    f: &dyn Fn(&[DenseMatrix]) -> f64,
) -> Vec<f64> {
    let mut work = inputs.to_vec();
    let len = work[which].data().len();
    let mut out = Vec::with_capacity(len);
    for k in 0..len {
        let orig = work[which].data()[k];
        work[which].data_mut()[k] = orig + FD_STEP;
        let up = f(&work);
        work[which].data_mut()[k] = orig - FD_STEP;
        let down = f(&work);
        work[which].data_mut()[k] = orig;
        out.push((up - down) / (2.0 * FD_STEP));
    }
    out
}

/// Records `build` on a fresh tape with every input as a leaf and returns
/// the worst FD ratio across all inputs.
pub fn check_all(inputs: &[DenseMatrix], build: &dyn Fn(&mut Tape, &[Var]) -> Var) -> f64 {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|m| tape.leaf(m.clone())).collect();
    let loss = build(&mut tape, &vars);
    let grads = tape.backward(loss).unwrap();
    let eval = |xs: &[DenseMatrix]| {
        let mut t = Tape::new();
        let vs: Vec<Var> = xs.iter().map(|m| t.leaf(m.clone())).collect();
        let l = build(&mut t, &vs);
        t.value(l).item()
    };
    let mut worst: f64 = 0.0;
    for (i, v) in vars.iter().enumerate() {
        let analytic = grads.wrt(*v).unwrap();
        let numeric = numeric_grad(inputs, i, &eval);
        worst = worst.max(worst_ratio(analytic.data(), &numeric));
    }
    worst
}

/// Deterministic pseudo-random matrix in [lo, hi).
pub fn rand_matrix(rows: usize, cols: usize, lo: f64, hi: f64, seed: u64) -> DenseMatrix {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let data = (0..rows * cols).map(|_| rng.gen_range(lo..hi)).collect();
    DenseMatrix::from_vec(rows, cols, data).unwrap()
}

/// Workspace-relative fixture path.
pub fn fixture(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

/// Connected random graph: a random spanning tree plus `extra` random
/// edges, so every node has at least one neighbour. Masks: nodes 0..3
/// train, 3..5 val, the rest test.
pub fn random_graph(
    n: usize,
    extra: usize,
    d: usize,
    classes: usize,
    kind: gnnevade::FeatureKind,
    seed: u64,
) -> gnnevade::Graph {
    use rand::{Rng, SeedableRng};
    use std::collections::BTreeSet;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut edges = BTreeSet::new();
    for v in 1..n {
        let u = rng.gen_range(0..v);
        edges.insert((u, v));
    }
    let mut tries = 0;
    while edges.len() < n - 1 + extra && tries < 10 * (extra + 1) {
        let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if a != b {
            edges.insert((a.min(b), a.max(b)));
        }
        tries += 1;
    }
    let mut x = DenseMatrix::zeros(n, d);
    for v in x.data_mut() {
        *v = match kind {
            gnnevade::FeatureKind::Binary => f64::from(rng.gen_bool(0.3)),
            gnnevade::FeatureKind::Continuous => rng.gen_range(0.0..1.0),
        };
    }
    gnnevade::Graph::new(gnnevade::GraphParts {
        name: format!("random-{seed}"),
        features: x,
        num_classes: classes,
        feature_kind: kind,
        edges: edges.into_iter().collect(),
        labels: (0..n).map(|_| Some(rng.gen_range(0..classes))).collect(),
        train: (0..3.min(n)).collect(),
        val: (3.min(n)..5.min(n)).collect(),
        test: (5.min(n)..n).collect(),
    })
    .unwrap()
}

/// Parameters with every tensor (biases and GIN eps included) drawn at
/// random, so no gradient is trivially zero.
pub fn random_params(arch: gnnevade::Architecture, g: &gnnevade::Graph, seed: u64) -> gnnevade::ModelParams {
    let spec = gnnevade::ModelSpec {
        arch,
        layers: 2,
        in_dim: g.num_features(),
        hidden: 5,
        out_dim: g.num_classes(),
        gin_hidden: 6,
    };
    let tensors = spec
        .param_shapes()
        .into_iter()
        .enumerate()
        .map(|(i, (_, (r, c)))| rand_matrix(r, c, -0.8, 0.8, seed * 100 + i as u64))
        .collect();
    gnnevade::ModelParams::from_tensors(spec, tensors).unwrap()
}

/// Worst finite-difference ratios for a model loss at victim node 0 with
/// respect to (a) every parameter, (b) the feature row of `attacker`, and
/// (c) every global edge candidate weight for the victim.
pub fn model_fd_ratios(params: &gnnevade::ModelParams, g: &gnnevade::Graph, attacker: usize) -> [f64; 3] {
    use gnnevade::attacks::global_candidate_edges;
    use std::sync::Arc;

    let victim = 0;
    let class = 1 % g.num_classes();
    let spec = params.spec().clone();
    let slots = spec.projection_slots();
    let cands = global_candidate_edges(g, victim, spec.layers).unwrap();
    let mut edges = g.edges().to_vec();
    let mut weights = vec![1.0; edges.len()];
    let mut cand_slots = Vec::new();
    for c in &cands {
        match edges.iter().position(|&e| e == (c.u, c.w)) {
            Some(i) => cand_slots.push(i),
            None => {
                cand_slots.push(edges.len());
                edges.push((c.u, c.w));
                weights.push(0.0);
            }
        }
    }
    let adj = Arc::new(
        gnnevade::SparseWeightedAdj::new(g.num_nodes(), edges)
            .unwrap()
            .with_self_loops(),
    );

    // inputs: params..., X, w
    let mut inputs: Vec<DenseMatrix> = params.tensors().to_vec();
    inputs.push(g.features().clone());
    inputs.push(DenseMatrix::column(&weights));
    let np = params.tensors().len();
    let build = |tape: &mut Tape, vars: &[Var]| -> Var {
        let x = vars[np];
        let proj: Vec<Var> = slots.iter().map(|&s| tape.matmul(x, vars[s]).unwrap()).collect();
        let out = params.forward(tape, &vars[..np], &proj, &adj, vars[np + 1], None).unwrap();
        tape.cross_entropy(out, &[victim], &[class]).unwrap()
    };
    let eval = |xs: &[DenseMatrix]| {
        let p = gnnevade::ModelParams::from_tensors(spec.clone(), xs[..np].to_vec()).unwrap();
        let mut t = Tape::new();
        let vs: Vec<Var> = xs.iter().map(|m| t.leaf(m.clone())).collect();
        let x = vs[np];
        let proj: Vec<Var> = slots.iter().map(|&s| t.matmul(x, vs[s]).unwrap()).collect();
        let out = p.forward(&mut t, &vs[..np], &proj, &adj, vs[np + 1], None).unwrap();
        let l = t.cross_entropy(out, &[victim], &[class]).unwrap();
        t.value(l).item()
    };
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|m| tape.leaf(m.clone())).collect();
    let loss = build(&mut tape, &vars);
    let grads = tape.backward(loss).unwrap();

    let mut param_worst: f64 = 0.0;
    for i in 0..np {
        let a = grads.wrt(vars[i]).unwrap();
        param_worst = param_worst.max(worst_ratio(a.data(), &numeric_grad(&inputs, i, &eval)));
    }

    let d = g.num_features();
    let gx = grads.wrt(vars[np]).unwrap();
    let mut row_numeric = Vec::with_capacity(d);
    let mut work = inputs.clone();
    for j in 0..d {
        let k = attacker * d + j;
        let orig = work[np].data()[k];
        work[np].data_mut()[k] = orig + FD_STEP;
        let up = eval(&work);
        work[np].data_mut()[k] = orig - FD_STEP;
        let down = eval(&work);
        work[np].data_mut()[k] = orig;
        row_numeric.push((up - down) / (2.0 * FD_STEP));
    }
    let row_worst = worst_ratio(gx.row(attacker), &row_numeric);

    let gw = grads.wrt(vars[np + 1]).unwrap();
    let w_numeric = numeric_grad(&inputs, np + 1, &eval);
    let analytic: Vec<f64> = cand_slots.iter().map(|&s| gw.data()[s]).collect();
    let numeric: Vec<f64> = cand_slots.iter().map(|&s| w_numeric[s]).collect();
    let edge_worst = worst_ratio(&analytic, &numeric);
    [param_worst, row_worst, edge_worst]
}

/// Exhaustive single-flip search on a binary attacker row: returns the
/// column whose flip maximizes the victim's loss on its predicted class,
/// and the gap to the runner-up.
pub fn best_single_flip(params: &gnnevade::ModelParams, g: &gnnevade::Graph, victim: usize, attacker: usize) -> (usize, f64) {
    let ones = vec![1.0; g.edges().len()];
    let clean = params.logits(g).unwrap();
    let class = gnnevade::tensor::argmax(clean.row(victim));
    let mut losses: Vec<(f64, usize)> = (0..g.num_features())
        .map(|j| {
            let mut x = g.features().clone();
            x.set(attacker, j, 1.0 - x.get(attacker, j));
            let l = params
                .logits_with(&gnnevade::CsrMatrix::from_dense(&x), g.adjacency(), &ones)
                .unwrap();
            let row = l.row(victim);
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + row.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
            (lse - row[class], j)
        })
        .collect();
    losses.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let gap = if losses.len() > 1 { losses[0].0 - losses[1].0 } else { f64::INFINITY };
    (losses[0].1, gap)
}

/// Random parameters in the near-linear regime: small weights, and biases
/// large enough that one input flip rarely moves a hidden unit across zero.
pub fn gentle_params(arch: gnnevade::Architecture, g: &gnnevade::Graph, seed: u64, scale: f64) -> gnnevade::ModelParams {
    let p = random_params(arch, g, seed);
    let spec = p.spec().clone();
    let tensors = p
        .names()
        .iter()
        .zip(p.tensors())
        .map(|(name, t)| {
            let mut t = t.clone();
            if !name.ends_with("bias") {
                t.scale_in_place(scale);
            }
            t
        })
        .collect();
    gnnevade::ModelParams::from_tensors(spec, tensors).unwrap()
}
