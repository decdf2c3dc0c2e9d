//! Bidirectional LSTM layers with highway connections.
//!
//! Per direction, a standard LSTM runs over the sequence; its outputs `h_t`
//! are then mixed with a linear transform of the layer input:
//!
//! ```text
//! r_t   = σ(W_r · [x_t; h_t] + b_r)
//! out_t = r_t ∘ h_t + (1 − r_t) ∘ (W_c · x_t)
//! ```
//!
//! A layer's output concatenates the forward and backward streams.

use rand::Rng;

use crate::autodiff::{Graph, ParamId, ParamStore, Tensor, Var};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct DirectionParams {
    pub w_x: ParamId,
    pub w_h: ParamId,
    pub b: ParamId,
    pub w_c: ParamId,
    pub w_r: ParamId,
    pub b_r: ParamId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct BiLayerParams {
    pub forward: DirectionParams,
    pub backward: DirectionParams,
}

fn glorot<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Tensor {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Tensor::matrix(
        rows,
        cols,
        (0..rows * cols).map(|_| rng.gen_range(-limit..limit)).collect(),
    )
    .expect("shape matches data")
}

impl DirectionParams {
    pub fn init<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        input_dim: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let mut bias = vec![0.0; 4 * hidden];
        // Gate layout is [input, forget, output, candidate]; forget starts open.
        bias[hidden..2 * hidden].iter_mut().for_each(|b| *b = 1.0);
        Ok(DirectionParams {
            w_x: store.add(format!("{}.w_x", prefix), glorot(rng, input_dim, 4 * hidden))?,
            w_h: store.add(format!("{}.w_h", prefix), glorot(rng, hidden, 4 * hidden))?,
            b: store.add(format!("{}.b", prefix), Tensor::row(bias))?,
            w_c: store.add(format!("{}.w_c", prefix), glorot(rng, input_dim, hidden))?,
            w_r: store.add(format!("{}.w_r", prefix), glorot(rng, input_dim + hidden, hidden))?,
            b_r: store.add(format!("{}.b_r", prefix), Tensor::row(vec![0.0; hidden]))?,
        })
    }


    /// Runs one direction over `x` (n×in) and returns the n×hidden highway output,
    /// rows in sequence order.
    pub fn run<'a>(
        &self,
        g: &mut Graph<'a>,
        store: &'a ParamStore,
        x: Var,
        reverse: bool,
    ) -> Result<Var> {
        let n = g.value(x).rows();
        let hidden = store.get(self.w_h).rows();
        let w_x = g.param(store, self.w_x);
        let w_h = g.param(store, self.w_h);
        let b = g.param(store, self.b);
        let projected = g.matmul(x, w_x)?;
        let projected = g.add(projected, b)?;

        let mut outputs: Vec<Option<Var>> = vec![None; n];
        let mut state: Option<(Var, Var)> = None;
        let steps: Box<dyn Iterator<Item = usize>> = if reverse {
            Box::new((0..n).rev())
        } else {
            Box::new(0..n)
        };
        for t in steps {
            let mut gates = g.slice(projected, 0, t, 1)?;
            if let Some((h_prev, _)) = state {
                let rec = g.matmul(h_prev, w_h)?;
                gates = g.add(gates, rec)?;
            }
            let i = g.slice(gates, 1, 0, hidden)?;
            let i = g.sigmoid(i);
            let f = g.slice(gates, 1, hidden, hidden)?;
            let f = g.sigmoid(f);
            let o = g.slice(gates, 1, 2 * hidden, hidden)?;
            let o = g.sigmoid(o);
            let cand = g.slice(gates, 1, 3 * hidden, hidden)?;
            let cand = g.tanh(cand);

            let mut c = g.mul(i, cand)?;
            if let Some((_, c_prev)) = state {
                let keep = g.mul(f, c_prev)?;
                c = g.add(c, keep)?;
            }
            let c_act = g.tanh(c);
            let h = g.mul(o, c_act)?;
            outputs[t] = Some(h);
            state = Some((h, c));
        }
        let rows: Vec<Var> = outputs.into_iter().map(|v| v.expect("every step ran")).collect();
        let h_all = g.concat(&rows, 0)?;

        let w_c = g.param(store, self.w_c);
        let w_r = g.param(store, self.w_r);
        let b_r = g.param(store, self.b_r);
        let carried = g.matmul(x, w_c)?;
        let gate_in = g.concat(&[x, h_all], 1)?;
        let gate = g.matmul(gate_in, w_r)?;
        let gate = g.add(gate, b_r)?;
        let gate = g.sigmoid(gate);
        // r∘h + (1−r)∘carried == carried + r∘(h − carried)
        let diff = g.sub(h_all, carried)?;
        let mixed = g.mul(gate, diff)?;
        g.add(carried, mixed)
    }
}

impl BiLayerParams {
    pub fn init<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        input_dim: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(BiLayerParams {
            forward: DirectionParams::init(store, &format!("{}.fw", prefix), input_dim, hidden, rng)?,
            backward: DirectionParams::init(store, &format!("{}.bw", prefix), input_dim, hidden, rng)?,
        })
    }


    /// n×in -> n×(2·hidden), forward half first.
    pub fn run<'a>(&self, g: &mut Graph<'a>, store: &'a ParamStore, x: Var) -> Result<Var> {
        let fw = self.forward.run(g, store, x, false)?;
        let bw = self.backward.run(g, store, x, true)?;
        g.concat(&[fw, bw], 1)
    }
}
