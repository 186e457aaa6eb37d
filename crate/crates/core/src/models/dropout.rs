use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::{CsrMatrix, DenseMatrix};

const DROPOUT_DOMAIN: u64 = 0xd209;

/// Inverted dropout whose mask for a node depends only on
/// `(seed, epoch, site, global node id)`, so the mask on a subgraph is the
/// exact restriction of the full-graph mask.
#[derive(Debug, Clone, Copy)]
pub struct Dropout<'a> {
    pub rate: f64,
    pub seed: u64,
    pub epoch: u64,
    /// Global id of each row.
    pub nodes: &'a [usize],
}

impl Dropout<'_> {
    fn keep_scale(&self) -> f64 {
        1.0 / (1.0 - self.rate)
    }

    fn row_stream(&self, site: u64, node: usize) -> rand_chacha::ChaCha8Rng {
        rng::stream(&[DROPOUT_DOMAIN, self.seed, self.epoch, site, node as u64])
    }

    /// Dense `rows x cols` mask of 0 or `1 / (1 - rate)` for a hidden layer.
    pub fn mask(&self, site: u64, cols: usize) -> Result<DenseMatrix> {
        let mut m = DenseMatrix::zeros(self.nodes.len(), cols);
        if self.rate == 0.0 {
            m.data_mut().iter_mut().for_each(|v| *v = 1.0);
            return Ok(m);
        }
        let s = self.keep_scale();
        for (r, &node) in self.nodes.iter().enumerate() {
            let mut g = self.row_stream(site, node);
            for v in m.row_mut(r) {
                *v = if g.gen::<f64>() < self.rate { 0.0 } else { s };
            }
        }
        Ok(m)
    }

    /// Input-feature dropout applied to the stored (non-zero) entries only.
    pub fn apply_sparse(&self, x: &CsrMatrix) -> Result<CsrMatrix> {
        if x.rows() != self.nodes.len() {
            return Err(Error::shape(
                "dropout",
                format!("{} rows for {} nodes", x.rows(), self.nodes.len()),
            ));
        }
        if self.rate == 0.0 {
            return Ok(x.clone());
        }
        let s = self.keep_scale();
        Ok(x.map_rows(|r, vals| {
            let mut g = self.row_stream(0, self.nodes[r]);
            for v in vals {
                *v = if g.gen::<f64>() < self.rate { 0.0 } else { *v * s };
            }
        }))
    }
}
