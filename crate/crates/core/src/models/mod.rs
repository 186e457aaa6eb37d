//! GCN, SGC, GIN and GraphSAGE-mean on top of the tape, plus training.
//!
//! Every architecture starts with linear maps of the input features, so a
//! forward pass takes those projections `X W_i` as inputs. Callers decide how
//! they are produced: a sparse product for training, a cached constant plus a
//! differentiable correction on a few rows for feature attacks.

mod checkpoint;
mod dropout;
mod train;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng;
use crate::tensor::{argmax, CsrMatrix, DenseMatrix, SparseWeightedAdj, Tape, Var};

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointHeader};
pub use dropout::Dropout;
pub use train::{accuracy, train, EpochStats, TrainConfig, TrainedModel};
pub(crate) use train::{clean_loss, fit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Gcn,
    Sgc,
    Gin,
    Sage,
}

impl Architecture {
    pub const ALL: [Architecture; 4] = [
        Architecture::Gcn,
        Architecture::Sgc,
        Architecture::Gin,
        Architecture::Sage,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Architecture::Gcn => "gcn",
            Architecture::Sgc => "sgc",
            Architecture::Gin => "gin",
            Architecture::Sage => "sage",
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gcn" => Ok(Architecture::Gcn),
            "sgc" => Ok(Architecture::Sgc),
            "gin" => Ok(Architecture::Gin),
            "sage" | "graphsage" => Ok(Architecture::Sage),
            other => Err(Error::Config(format!("unknown architecture '{other}'"))),
        }
    }
}

/// Shape-determining hyperparameters of a model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub arch: Architecture,
    pub layers: usize,
    pub in_dim: usize,
    pub hidden: usize,
    pub out_dim: usize,
    /// Width inside each GIN MLP.
    pub gin_hidden: usize,
}

impl ModelSpec {
    fn layer_dims(&self, l: usize) -> (usize, usize) {
        let fan_in = if l == 0 { self.in_dim } else { self.hidden };
        let fan_out = if l + 1 == self.layers { self.out_dim } else { self.hidden };
        (fan_in, fan_out)
    }

    /// Parameter manifest, in storage order.
    pub fn param_shapes(&self) -> Vec<(String, (usize, usize))> {
        let mut out = Vec::new();
        match self.arch {
            Architecture::Sgc => {
                out.push(("linear.weight".into(), (self.in_dim, self.out_dim)));
                out.push(("linear.bias".into(), (1, self.out_dim)));
            }
            Architecture::Gcn => {
                for l in 0..self.layers {
                    let (i, o) = self.layer_dims(l);
                    out.push((format!("layer{l}.weight"), (i, o)));
                    out.push((format!("layer{l}.bias"), (1, o)));
                }
            }
            Architecture::Gin => {
                let g = self.gin_hidden;
                for l in 0..self.layers {
                    let (i, o) = self.layer_dims(l);
                    out.push((format!("layer{l}.eps"), (1, 1)));
                    out.push((format!("layer{l}.mlp0.weight"), (i, g)));
                    out.push((format!("layer{l}.mlp0.bias"), (1, g)));
                    out.push((format!("layer{l}.mlp1.weight"), (g, o)));
                    out.push((format!("layer{l}.mlp1.bias"), (1, o)));
                }
            }
            Architecture::Sage => {
                for l in 0..self.layers {
                    let (i, o) = self.layer_dims(l);
                    out.push((format!("layer{l}.self.weight"), (i, o)));
                    out.push((format!("layer{l}.neigh.weight"), (i, o)));
                    out.push((format!("layer{l}.bias"), (1, o)));
                }
            }
        }
        out
    }

    /// Indices of the parameters applied directly to the input features.
    pub fn projection_slots(&self) -> &'static [usize] {
        match self.arch {
            Architecture::Gcn | Architecture::Sgc => &[0],
            Architecture::Gin => &[1],
            Architecture::Sage => &[0, 1],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 {
            return Err(Error::Config("layer count must be at least 1".into()));
        }
        if self.in_dim == 0 || self.out_dim == 0 || self.hidden == 0 || self.gin_hidden == 0 {
            return Err(Error::Config("model dimensions must be positive".into()));
        }
        Ok(())
    }
}

const INIT_DOMAIN: u64 = 0x1417;

/// Named parameter tensors of one model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    spec: ModelSpec,
    names: Vec<String>,
    tensors: Vec<DenseMatrix>,
}

impl ModelParams {
    /// Glorot-uniform weights from `seed`; biases and GIN epsilons start at 0.
    pub fn init(spec: ModelSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = rng::stream(&[INIT_DOMAIN, seed]);
        let mut names = Vec::new();
        let mut tensors = Vec::new();
        for (name, (r, c)) in spec.param_shapes() {
            let m = if name.ends_with(".weight") {
                let limit = (6.0 / (r + c) as f64).sqrt();
                let data = (0..r * c).map(|_| rng.gen_range(-limit..limit)).collect();
                DenseMatrix::from_vec(r, c, data)?
            } else {
                DenseMatrix::zeros(r, c)
            };
            names.push(name);
            tensors.push(m);
        }
        Ok(Self { spec, names, tensors })
    }

    pub fn from_tensors(spec: ModelSpec, tensors: Vec<DenseMatrix>) -> Result<Self> {
        spec.validate()?;
        let shapes = spec.param_shapes();
        if shapes.len() != tensors.len() {
            return Err(Error::shape(
                "model_params",
                format!("{} tensors for {} parameters", tensors.len(), shapes.len()),
            ));
        }
        for ((name, shape), t) in shapes.iter().zip(&tensors) {
            if t.shape() != *shape {
                return Err(Error::shape(
                    "model_params",
                    format!("{name} is {:?}, expected {shape:?}", t.shape()),
                ));
            }
            if !t.is_finite() {
                return Err(Error::Training(format!("parameter {name} is not finite")));
            }
        }
        Ok(Self {
            names: shapes.into_iter().map(|(n, _)| n).collect(),
            spec,
            tensors,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn arch(&self) -> Architecture {
        self.spec.arch
    }

    pub fn layers(&self) -> usize {
        self.spec.layers
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[DenseMatrix] {
        &self.tensors
    }

    pub(crate) fn tensors_mut(&mut self) -> &mut [DenseMatrix] {
        &mut self.tensors
    }

    pub fn get(&self, name: &str) -> Option<&DenseMatrix> {
        self.names.iter().position(|n| n == name).map(|i| &self.tensors[i])
    }

    /// Records every parameter on `tape`, as leaves when `trainable`.
    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> Vec<Var> {
        self.tensors
            .iter()
            .map(|t| {
                if trainable {
                    tape.leaf(t.clone())
                } else {
                    tape.constant(t.clone())
                }
            })
            .collect()
    }

    /// The input-side weight matrices, in projection order.
    pub fn projection_weights(&self) -> Vec<&DenseMatrix> {
        self.spec
            .projection_slots()
            .iter()
            .map(|&i| &self.tensors[i])
            .collect()
    }

    /// Constant projections `X W_i` for a feature matrix.
    pub fn project(&self, x: &CsrMatrix) -> Result<Vec<DenseMatrix>> {
        self.projection_weights()
            .into_iter()
            .map(|w| x.matmul(w))
            .collect()
    }

    /// Records `X W_i` on the tape against bound parameters.
    pub fn project_on_tape(&self, tape: &mut Tape, bound: &[Var], x: &Arc<CsrMatrix>) -> Result<Vec<Var>> {
        self.spec
            .projection_slots()
            .iter()
            .map(|&i| tape.sparse_matmul(x, bound[i]))
            .collect()
    }

    /// Logits for every node of `adj` given input projections.
    ///
    /// `weights` is an `E x 1` edge-weight column aligned with `adj.edges()`.
    /// `dropout`, when given, is applied after every hidden layer.
    pub fn forward(
        &self,
        tape: &mut Tape,
        bound: &[Var],
        proj: &[Var],
        adj: &Arc<SparseWeightedAdj>,
        weights: Var,
        dropout: Option<&Dropout>,
    ) -> Result<Var> {
        let slots = self.spec.projection_slots();
        if bound.len() != self.tensors.len() || proj.len() != slots.len() {
            return Err(Error::shape(
                "forward",
                format!("{} bound params, {} projections", bound.len(), proj.len()),
            ));
        }
        let layers = self.spec.layers;
        let hidden_out = |tape: &mut Tape, z: Var, l: usize| -> Result<Var> {
            let h = tape.relu(z)?;
            match dropout {
                Some(d) => {
                    let cols = tape.value(h).cols();
                    let mask = d.mask(l as u64 + 1, cols)?;
                    tape.mask(h, mask)
                }
                None => Ok(h),
            }
        };
        match self.spec.arch {
            Architecture::Sgc => {
                let coef = tape.gcn_norm(adj, weights)?;
                let mut z = proj[0];
                for _ in 0..layers {
                    z = tape.spmm_agg(adj, weights, coef, z)?;
                }
                tape.add_row(z, bound[1])
            }
            Architecture::Gcn => {
                let coef = tape.gcn_norm(adj, weights)?;
                let mut p = proj[0];
                let mut z = p;
                for l in 0..layers {
                    if l > 0 {
                        let h = hidden_out(tape, z, l - 1)?;
                        p = tape.matmul(h, bound[2 * l])?;
                    }
                    let a = tape.spmm_agg(adj, weights, coef, p)?;
                    z = tape.add_row(a, bound[2 * l + 1])?;
                }
                Ok(z)
            }
            Architecture::Gin => {
                // plain neighbour sums: coefficient 1 on edges, 0 on self-loops
                let mut c = vec![1.0; adj.num_entries()];
                c[adj.num_edges()..].iter_mut().for_each(|x| *x = 0.0);
                let coef = tape.constant(DenseMatrix::column(&c));
                let one = tape.constant(DenseMatrix::scalar(1.0));
                let mut z = proj[0];
                for l in 0..layers {
                    let base = 5 * l;
                    let p = if l == 0 {
                        proj[0]
                    } else {
                        let h = hidden_out(tape, z, l - 1)?;
                        tape.matmul(h, bound[base + 1])?
                    };
                    let scale = tape.add(bound[base], one)?;
                    let own = tape.scale_by(p, scale)?;
                    let nbr = tape.spmm_agg(adj, weights, coef, p)?;
                    let s = tape.add(own, nbr)?;
                    let s = tape.add_row(s, bound[base + 2])?;
                    let s = tape.relu(s)?;
                    let s = tape.matmul(s, bound[base + 3])?;
                    z = tape.add_row(s, bound[base + 4])?;
                }
                Ok(z)
            }
            Architecture::Sage => {
                let mut z = proj[0];
                for l in 0..layers {
                    let base = 3 * l;
                    let (ps, pn) = if l == 0 {
                        (proj[0], proj[1])
                    } else {
                        let h = hidden_out(tape, z, l - 1)?;
                        (tape.matmul(h, bound[base])?, tape.matmul(h, bound[base + 1])?)
                    };
                    let m = tape.mean_agg(adj, weights, pn)?;
                    let s = tape.add(ps, m)?;
                    z = tape.add_row(s, bound[base + 2])?;
                }
                Ok(z)
            }
        }
    }

    /// Eval-mode logits on an arbitrary structure with explicit edge weights.
    pub fn logits_with(
        &self,
        x: &CsrMatrix,
        adj: &Arc<SparseWeightedAdj>,
        weights: &[f64],
    ) -> Result<DenseMatrix> {
        let proj = self.project(x)?;
        self.logits_from_projections(proj, adj, weights)
    }

    pub fn logits_from_projections(
        &self,
        proj: Vec<DenseMatrix>,
        adj: &Arc<SparseWeightedAdj>,
        weights: &[f64],
    ) -> Result<DenseMatrix> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape, false);
        let proj: Vec<Var> = proj.into_iter().map(|p| tape.constant(p)).collect();
        let w = tape.constant(DenseMatrix::column(weights));
        let out = self.forward(&mut tape, &bound, &proj, adj, w, None)?;
        Ok(tape.value(out).clone())
    }

    /// Eval-mode logits on the full graph.
    pub fn logits(&self, g: &Graph) -> Result<DenseMatrix> {
        let ones = vec![1.0; g.edges().len()];
        self.logits_with(g.sparse_features(), g.adjacency(), &ones)
    }

    /// Argmax class per node (ties to the lowest class).
    pub fn predict(&self, g: &Graph) -> Result<Vec<usize>> {
        Ok(predict_rows(&self.logits(g)?))
    }
}

pub fn predict_rows(logits: &DenseMatrix) -> Vec<usize> {
    (0..logits.rows()).map(|r| argmax(logits.row(r))).collect()
}
