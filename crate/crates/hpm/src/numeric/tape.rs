//! Reverse-mode automatic differentiation on a tape of matrix operations.
//!
//! A `Tape` records every operation as a node referencing its parents by
//! index, so the node list is already topologically ordered. `backward`
//! walks it in reverse, accumulating adjoints. The op set is exactly what
//! the model needs; nothing speculative.

use rand::Rng;

use crate::error::{Error, Result};
use crate::numeric::matrix::{matmul, Matrix, Mode};

/// Handle to a node on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

enum Op {
    Leaf,
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    AddRow { x: NodeId, row: NodeId },
    AddScalar { x: NodeId, s: NodeId },
    MulScalar { x: NodeId, s: NodeId },
    DivScalar { x: NodeId, s: NodeId },
    ScaleConst(NodeId, f64),
    AddConst(NodeId),
    Relu(NodeId),
    Exp(NodeId),
    Softplus(NodeId),
    Matmul(NodeId, NodeId),
    Transpose(NodeId),
    Gather { table: NodeId, indices: Vec<usize> },
    SliceCols { x: NodeId, start: usize },
    ConcatCols(Vec<NodeId>),
    ConcatRows(Vec<NodeId>),
    SumAll(NodeId),
    RowSum(NodeId),
    MaskedSoftmaxRows { x: NodeId, allowed: Vec<bool> },
    LogSumExpRows(NodeId),
    DiagToCol(NodeId),
    RowNormalize { x: NodeId, eps: f64 },
    LayerNorm { x: NodeId, gamma: NodeId, beta: NodeId, eps: f64 },
    Dropout { x: NodeId, mask: Matrix },
}

struct Node {
    value: Matrix,
    op: Op,
    needs_grad: bool,
}

/// Gradients produced by one backward pass, indexed by node.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    /// Gradient of the loss with respect to the node, if any was
    /// accumulated. Leaves that the loss does not depend on yield `None`.
    pub fn get(&self, id: NodeId) -> Option<&Matrix> {
        self.grads.get(id.0).and_then(Option::as_ref)
    }
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Matrix {
        &self.nodes[id.0].value
    }

    fn push(&mut self, value: Matrix, op: Op, needs_grad: bool) -> NodeId {
        self.nodes.push(Node { value, op, needs_grad });
        NodeId(self.nodes.len() - 1)
    }

    fn needs(&self, id: NodeId) -> bool {
        self.nodes[id.0].needs_grad
    }

    /// Inserts a trainable leaf.
    pub fn param(&mut self, value: Matrix) -> NodeId {
        self.push(value, Op::Leaf, true)
    }

    /// Inserts a leaf that never receives a gradient.
    pub fn constant(&mut self, value: Matrix) -> NodeId {
        self.push(value, Op::Leaf, false)
    }

    fn same_shape(&self, a: NodeId, b: NodeId, what: &str) -> Result<()> {
        let (ar, ac) = self.value(a).shape();
        let (br, bc) = self.value(b).shape();
        if (ar, ac) != (br, bc) {
            return Err(Error::Shape(format!(
                "{what}: lhs {ar}x{ac} vs rhs {br}x{bc}"
            )));
        }
        Ok(())
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape(a, b, "add")?;
        let value = self.value(a).add(self.value(b))?;
        Ok(self.push(value, Op::Add(a, b), self.needs(a) || self.needs(b)))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape(a, b, "sub")?;
        let value = self.value(a).sub(self.value(b))?;
        Ok(self.push(value, Op::Sub(a, b), self.needs(a) || self.needs(b)))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape(a, b, "mul")?;
        let value = self.value(a).hadamard(self.value(b))?;
        Ok(self.push(value, Op::Mul(a, b), self.needs(a) || self.needs(b)))
    }

    /// Adds a 1 x d row to every row of an n x d matrix.
    pub fn add_row(&mut self, x: NodeId, row: NodeId) -> Result<NodeId> {
        let (_, xc) = self.value(x).shape();
        let (rr, rc) = self.value(row).shape();
        if rr != 1 || rc != xc {
            return Err(Error::Shape(format!(
                "add_row: input has {xc} columns but row is {rr}x{rc}"
            )));
        }
        let xv = self.value(x);
        let rv = self.value(row);
        let mut value = xv.clone();
        for r in 0..value.rows() {
            for (o, &b) in value.row_mut(r).iter_mut().zip(rv.row(0)) {
                *o += b;
            }
        }
        Ok(self.push(value, Op::AddRow { x, row }, self.needs(x) || self.needs(row)))
    }

    fn expect_scalar(&self, s: NodeId, what: &str) -> Result<f64> {
        let v = self.value(s);
        if v.shape() != (1, 1) {
            return Err(Error::Shape(format!(
                "{what}: scalar operand must be 1x1, got {}x{}",
                v.rows(),
                v.cols()
            )));
        }
        Ok(v.get(0, 0))
    }

    /// Adds a 1 x 1 scalar node to every entry.
    pub fn add_scalar(&mut self, x: NodeId, s: NodeId) -> Result<NodeId> {
        let sv = self.expect_scalar(s, "add_scalar")?;
        let value = self.value(x).map(|v| v + sv);
        Ok(self.push(value, Op::AddScalar { x, s }, self.needs(x) || self.needs(s)))
    }

    /// Multiplies every entry by a 1 x 1 scalar node.
    pub fn mul_scalar(&mut self, x: NodeId, s: NodeId) -> Result<NodeId> {
        let sv = self.expect_scalar(s, "mul_scalar")?;
        let value = self.value(x).scale(sv);
        Ok(self.push(value, Op::MulScalar { x, s }, self.needs(x) || self.needs(s)))
    }

    /// Divides every entry by a 1 x 1 scalar node.
    pub fn div_scalar(&mut self, x: NodeId, s: NodeId) -> Result<NodeId> {
        let sv = self.expect_scalar(s, "div_scalar")?;
        if sv == 0.0 {
            return Err(Error::NonFinite("div_scalar by zero".into()));
        }
        let value = self.value(x).scale(1.0 / sv);
        Ok(self.push(value, Op::DivScalar { x, s }, self.needs(x) || self.needs(s)))
    }

    pub fn scale_const(&mut self, x: NodeId, c: f64) -> NodeId {
        let value = self.value(x).scale(c);
        self.push(value, Op::ScaleConst(x, c), self.needs(x))
    }

    pub fn add_const(&mut self, x: NodeId, c: f64) -> NodeId {
        let value = self.value(x).map(|v| v + c);
        self.push(value, Op::AddConst(x), self.needs(x))
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let value = self.value(x).map(|v| v.max(0.0));
        self.push(value, Op::Relu(x), self.needs(x))
    }

    pub fn exp(&mut self, x: NodeId) -> NodeId {
        let value = self.value(x).map(f64::exp);
        self.push(value, Op::Exp(x), self.needs(x))
    }

    /// ln(1 + e^x), computed as max(x, 0) + ln(1 + e^-|x|) so large
    /// magnitudes neither overflow nor lose precision.
    pub fn softplus(&mut self, x: NodeId) -> NodeId {
        let value = self.value(x).map(|v| v.max(0.0) + (-v.abs()).exp().ln_1p());
        self.push(value, Op::Softplus(x), self.needs(x))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = matmul(self.value(a), self.value(b))?;
        Ok(self.push(value, Op::Matmul(a, b), self.needs(a) || self.needs(b)))
    }

    pub fn transpose(&mut self, x: NodeId) -> NodeId {
        let value = self.value(x).transpose();
        self.push(value, Op::Transpose(x), self.needs(x))
    }

    /// Collects rows of `table` at `indices` into a new matrix. The same
    /// row may be gathered more than once; backward adds contributions.
    pub fn gather(&mut self, table: NodeId, indices: &[usize]) -> Result<NodeId> {
        let t = self.value(table);
        let mut value = Matrix::zeros(indices.len(), t.cols());
        for (r, &idx) in indices.iter().enumerate() {
            if idx >= t.rows() {
                return Err(Error::Contract(format!(
                    "gather: index {idx} out of range for table with {} rows",
                    t.rows()
                )));
            }
            value.row_mut(r).copy_from_slice(t.row(idx));
        }
        let op = Op::Gather { table, indices: indices.to_vec() };
        Ok(self.push(value, op, self.needs(table)))
    }

    /// Extracts columns [start, end).
    pub fn slice_cols(&mut self, x: NodeId, start: usize, end: usize) -> Result<NodeId> {
        let xv = self.value(x);
        if start >= end || end > xv.cols() {
            return Err(Error::Shape(format!(
                "slice_cols: range {start}..{end} invalid for {} columns",
                xv.cols()
            )));
        }
        let mut value = Matrix::zeros(xv.rows(), end - start);
        for r in 0..xv.rows() {
            value.row_mut(r).copy_from_slice(&xv.row(r)[start..end]);
        }
        Ok(self.push(value, Op::SliceCols { x, start }, self.needs(x)))
    }

    /// Concatenates matrices with equal row counts side by side.
    pub fn concat_cols(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(Error::Contract("concat_cols: no parts".into()));
        }
        let rows = self.value(parts[0]).rows();
        let total: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut value = Matrix::zeros(rows, total);
        let mut offset = 0;
        for &p in parts {
            let pv = self.value(p);
            if pv.rows() != rows {
                return Err(Error::Shape(format!(
                    "concat_cols: expected {rows} rows, got {}",
                    pv.rows()
                )));
            }
            for r in 0..rows {
                value.row_mut(r)[offset..offset + pv.cols()].copy_from_slice(pv.row(r));
            }
            offset += pv.cols();
        }
        let needs = parts.iter().any(|&p| self.needs(p));
        Ok(self.push(value, Op::ConcatCols(parts.to_vec()), needs))
    }

    /// Stacks matrices with equal column counts on top of each other.
    pub fn concat_rows(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(Error::Contract("concat_rows: no parts".into()));
        }
        let cols = self.value(parts[0]).cols();
        let total: usize = parts.iter().map(|&p| self.value(p).rows()).sum();
        let mut value = Matrix::zeros(total, cols);
        let mut offset = 0;
        for &p in parts {
            let pv = self.value(p);
            if pv.cols() != cols {
                return Err(Error::Shape(format!(
                    "concat_rows: expected {cols} columns, got {}",
                    pv.cols()
                )));
            }
            for r in 0..pv.rows() {
                value.row_mut(offset + r).copy_from_slice(pv.row(r));
            }
            offset += pv.rows();
        }
        let needs = parts.iter().any(|&p| self.needs(p));
        Ok(self.push(value, Op::ConcatRows(parts.to_vec()), needs))
    }

    /// Sums every entry into a 1 x 1 scalar.
    pub fn sum_all(&mut self, x: NodeId) -> NodeId {
        let total: f64 = self.value(x).as_slice().iter().sum();
        self.push(Matrix::scalar(total), Op::SumAll(x), self.needs(x))
    }

    /// Sums each row into an n x 1 column.
    pub fn row_sum(&mut self, x: NodeId) -> NodeId {
        let xv = self.value(x);
        let mut value = Matrix::zeros(xv.rows(), 1);
        for r in 0..xv.rows() {
            value.set(r, 0, xv.row(r).iter().sum());
        }
        self.push(value, Op::RowSum(x), self.needs(x))
    }

    /// Row-wise softmax restricted to the allowed entries; disallowed
    /// entries come out exactly zero. `allowed` is row-major with the
    /// same shape as `x`. A row with nothing allowed is a contract error
    /// because its output would be undefined.
    pub fn masked_softmax_rows(&mut self, x: NodeId, allowed: &[bool]) -> Result<NodeId> {
        let xv = self.value(x);
        if allowed.len() != xv.len() {
            return Err(Error::Shape(format!(
                "masked_softmax_rows: mask has {} entries for a {}x{} input",
                allowed.len(),
                xv.rows(),
                xv.cols()
            )));
        }
        let cols = xv.cols();
        let mut value = Matrix::zeros(xv.rows(), cols);
        for r in 0..xv.rows() {
            let row = xv.row(r);
            let mask = &allowed[r * cols..(r + 1) * cols];
            let mut max = f64::NEG_INFINITY;
            for (v, &ok) in row.iter().zip(mask) {
                if ok && *v > max {
                    max = *v;
                }
            }
            if max == f64::NEG_INFINITY {
                return Err(Error::Contract(format!(
                    "masked_softmax_rows: row {r} has no allowed entries"
                )));
            }
            let mut sum = 0.0;
            let out = value.row_mut(r);
            for c in 0..cols {
                if mask[c] {
                    out[c] = (row[c] - max).exp();
                    sum += out[c];
                }
            }
            for v in out.iter_mut() {
                *v /= sum;
            }
        }
        let op = Op::MaskedSoftmaxRows { x, allowed: allowed.to_vec() };
        Ok(self.push(value, op, self.needs(x)))
    }

    /// Stable ln(sum(exp(row))) per row, as an n x 1 column.
    pub fn log_sum_exp_rows(&mut self, x: NodeId) -> NodeId {
        let xv = self.value(x);
        let mut value = Matrix::zeros(xv.rows(), 1);
        for r in 0..xv.rows() {
            let row = xv.row(r);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = row.iter().map(|v| (v - max).exp()).sum();
            value.set(r, 0, max + sum.ln());
        }
        self.push(value, Op::LogSumExpRows(x), self.needs(x))
    }

    /// Main diagonal of a square matrix as an n x 1 column.
    pub fn diag_to_col(&mut self, x: NodeId) -> Result<NodeId> {
        let xv = self.value(x);
        if xv.rows() != xv.cols() {
            return Err(Error::Shape(format!(
                "diag_to_col: matrix must be square, got {}x{}",
                xv.rows(),
                xv.cols()
            )));
        }
        let mut value = Matrix::zeros(xv.rows(), 1);
        for r in 0..xv.rows() {
            value.set(r, 0, xv.get(r, r));
        }
        Ok(self.push(value, Op::DiagToCol(x), self.needs(x)))
    }

    /// Scales each row to unit L2 norm; rows with norm below `eps` are
    /// divided by `eps` instead, so the zero row stays zero.
    pub fn row_normalize(&mut self, x: NodeId, eps: f64) -> NodeId {
        let xv = self.value(x);
        let mut value = xv.clone();
        for r in 0..value.rows() {
            let norm = xv.row(r).iter().map(|v| v * v).sum::<f64>().sqrt();
            let s = norm.max(eps);
            for v in value.row_mut(r) {
                *v /= s;
            }
        }
        self.push(value, Op::RowNormalize { x, eps }, self.needs(x))
    }

    /// Per-row layer normalization with learnable 1 x d gain and bias.
    pub fn layer_norm(
        &mut self,
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        eps: f64,
    ) -> Result<NodeId> {
        let value =
            crate::numeric::matrix::layer_norm(self.value(x), self.value(gamma), self.value(beta), eps)?;
        let needs = self.needs(x) || self.needs(gamma) || self.needs(beta);
        Ok(self.push(value, Op::LayerNorm { x, gamma, beta, eps }, needs))
    }

    /// Inverted dropout; in eval mode (or at rate zero) this is a no-op
    /// that returns `x` itself without growing the tape.
    pub fn dropout(
        &mut self,
        x: NodeId,
        rate: f64,
        mode: Mode,
        rng: &mut impl Rng,
    ) -> Result<NodeId> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config(format!(
                "dropout rate must lie in [0, 1), got {rate}"
            )));
        }
        if mode == Mode::Eval || rate == 0.0 {
            return Ok(x);
        }
        let xv = self.value(x);
        let keep = 1.0 - rate;
        let mut mask = Matrix::zeros(xv.rows(), xv.cols());
        for v in mask.as_mut_slice() {
            if rng.random::<f64>() >= rate {
                *v = 1.0 / keep;
            }
        }
        let value = xv.hadamard(&mask)?;
        Ok(self.push(value, Op::Dropout { x, mask }, self.needs(x)))
    }

    /// Propagates adjoints from a scalar loss back to every node that
    /// requires gradients. Errors when `loss` is not 1 x 1.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        if self.value(loss).shape() != (1, 1) {
            let (r, c) = self.value(loss).shape();
            return Err(Error::Contract(format!(
                "backward: loss must be a 1x1 scalar, got {r}x{c}"
            )));
        }
        let mut grads: Vec<Option<Matrix>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Matrix::scalar(1.0));
        for idx in (0..=loss.0).rev() {
            if !self.nodes[idx].needs_grad {
                grads[idx] = None;
                continue;
            }
            let Some(grad) = grads[idx].take() else { continue };
            self.propagate(idx, &grad, &mut grads);
            if matches!(self.nodes[idx].op, Op::Leaf) {
                grads[idx] = Some(grad);
            }
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, idx: usize, dy: &Matrix, grads: &mut [Option<Matrix>]) {
        let node = &self.nodes[idx];
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                self.accum(grads, *a, dy.clone());
                self.accum(grads, *b, dy.clone());
            }
            Op::Sub(a, b) => {
                self.accum(grads, *a, dy.clone());
                self.accum(grads, *b, dy.scale(-1.0));
            }
            Op::Mul(a, b) => {
                if self.needs(*a) {
                    self.accum(grads, *a, dy.hadamard(self.value(*b)).unwrap());
                }
                if self.needs(*b) {
                    self.accum(grads, *b, dy.hadamard(self.value(*a)).unwrap());
                }
            }
            Op::AddRow { x, row } => {
                self.accum(grads, *x, dy.clone());
                if self.needs(*row) {
                    let mut dr = Matrix::zeros(1, dy.cols());
                    for r in 0..dy.rows() {
                        for (o, &v) in dr.row_mut(0).iter_mut().zip(dy.row(r)) {
                            *o += v;
                        }
                    }
                    self.accum(grads, *row, dr);
                }
            }
            Op::AddScalar { x, s } => {
                self.accum(grads, *x, dy.clone());
                if self.needs(*s) {
                    let total: f64 = dy.as_slice().iter().sum();
                    self.accum(grads, *s, Matrix::scalar(total));
                }
            }
            Op::MulScalar { x, s } => {
                let sv = self.value(*s).get(0, 0);
                if self.needs(*x) {
                    self.accum(grads, *x, dy.scale(sv));
                }
                if self.needs(*s) {
                    let total: f64 = dy
                        .as_slice()
                        .iter()
                        .zip(self.value(*x).as_slice())
                        .map(|(&d, &v)| d * v)
                        .sum();
                    self.accum(grads, *s, Matrix::scalar(total));
                }
            }
            Op::DivScalar { x, s } => {
                let sv = self.value(*s).get(0, 0);
                if self.needs(*x) {
                    self.accum(grads, *x, dy.scale(1.0 / sv));
                }
                if self.needs(*s) {
                    let total: f64 = dy
                        .as_slice()
                        .iter()
                        .zip(self.value(*x).as_slice())
                        .map(|(&d, &v)| d * v)
                        .sum();
                    self.accum(grads, *s, Matrix::scalar(-total / (sv * sv)));
                }
            }
            Op::ScaleConst(x, c) => {
                self.accum(grads, *x, dy.scale(*c));
            }
            Op::AddConst(x) => {
                self.accum(grads, *x, dy.clone());
            }
            Op::Relu(x) => {
                let xv = self.value(*x);
                let mut dx = dy.clone();
                for (d, &v) in dx.as_mut_slice().iter_mut().zip(xv.as_slice()) {
                    if v <= 0.0 {
                        *d = 0.0;
                    }
                }
                self.accum(grads, *x, dx);
            }
            Op::Exp(x) => {
                self.accum(grads, *x, dy.hadamard(&node.value).unwrap());
            }
            Op::Softplus(x) => {
                let xv = self.value(*x);
                let mut dx = dy.clone();
                for (d, &v) in dx.as_mut_slice().iter_mut().zip(xv.as_slice()) {
                    let sig = if v >= 0.0 {
                        1.0 / (1.0 + (-v).exp())
                    } else {
                        let e = v.exp();
                        e / (1.0 + e)
                    };
                    *d *= sig;
                }
                self.accum(grads, *x, dx);
            }
            Op::Matmul(a, b) => {
                if self.needs(*a) {
                    let bt = self.value(*b).transpose();
                    self.accum(grads, *a, matmul(dy, &bt).unwrap());
                }
                if self.needs(*b) {
                    let at = self.value(*a).transpose();
                    self.accum(grads, *b, matmul(&at, dy).unwrap());
                }
            }
            Op::Transpose(x) => {
                self.accum(grads, *x, dy.transpose());
            }
            Op::Gather { table, indices } => {
                let t = self.value(*table);
                let mut dt = Matrix::zeros(t.rows(), t.cols());
                for (r, &idx) in indices.iter().enumerate() {
                    for (o, &v) in dt.row_mut(idx).iter_mut().zip(dy.row(r)) {
                        *o += v;
                    }
                }
                self.accum(grads, *table, dt);
            }
            Op::SliceCols { x, start } => {
                let xv = self.value(*x);
                let mut dx = Matrix::zeros(xv.rows(), xv.cols());
                for r in 0..dy.rows() {
                    dx.row_mut(r)[*start..*start + dy.cols()].copy_from_slice(dy.row(r));
                }
                self.accum(grads, *x, dx);
            }
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let w = self.value(p).cols();
                    if self.needs(p) {
                        let mut dp = Matrix::zeros(dy.rows(), w);
                        for r in 0..dy.rows() {
                            dp.row_mut(r).copy_from_slice(&dy.row(r)[offset..offset + w]);
                        }
                        self.accum(grads, p, dp);
                    }
                    offset += w;
                }
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let h = self.value(p).rows();
                    if self.needs(p) {
                        let mut dp = Matrix::zeros(h, dy.cols());
                        for r in 0..h {
                            dp.row_mut(r).copy_from_slice(dy.row(offset + r));
                        }
                        self.accum(grads, p, dp);
                    }
                    offset += h;
                }
            }
            Op::SumAll(x) => {
                let g = dy.get(0, 0);
                let xv = self.value(*x);
                self.accum(grads, *x, Matrix::zeros(xv.rows(), xv.cols()).map(|_| g));
            }
            Op::RowSum(x) => {
                let xv = self.value(*x);
                let mut dx = Matrix::zeros(xv.rows(), xv.cols());
                for r in 0..xv.rows() {
                    let g = dy.get(r, 0);
                    for v in dx.row_mut(r) {
                        *v = g;
                    }
                }
                self.accum(grads, *x, dx);
            }
            Op::MaskedSoftmaxRows { x, allowed } => {
                let y = &node.value;
                let cols = y.cols();
                let mut dx = Matrix::zeros(y.rows(), cols);
                for r in 0..y.rows() {
                    let dot: f64 = dy
                        .row(r)
                        .iter()
                        .zip(y.row(r))
                        .map(|(&d, &v)| d * v)
                        .sum();
                    for c in 0..cols {
                        if allowed[r * cols + c] {
                            dx.set(r, c, y.get(r, c) * (dy.get(r, c) - dot));
                        }
                    }
                }
                self.accum(grads, *x, dx);
            }
            Op::LogSumExpRows(x) => {
                let xv = self.value(*x);
                let mut dx = crate::numeric::matrix::softmax_rows(xv);
                for r in 0..dx.rows() {
                    let g = dy.get(r, 0);
                    for v in dx.row_mut(r) {
                        *v *= g;
                    }
                }
                self.accum(grads, *x, dx);
            }
            Op::DiagToCol(x) => {
                let n = self.value(*x).rows();
                let mut dx = Matrix::zeros(n, n);
                for r in 0..n {
                    dx.set(r, r, dy.get(r, 0));
                }
                self.accum(grads, *x, dx);
            }
            Op::RowNormalize { x, eps } => {
                let xv = self.value(*x);
                let mut dx = Matrix::zeros(xv.rows(), xv.cols());
                for r in 0..xv.rows() {
                    let row = xv.row(r);
                    let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                    let s = norm.max(*eps);
                    let dyr = dy.row(r);
                    if norm > *eps {
                        let dot: f64 = dyr.iter().zip(row).map(|(&d, &v)| d * v).sum();
                        for c in 0..xv.cols() {
                            dx.set(r, c, dyr[c] / s - row[c] * dot / (s * s * s));
                        }
                    } else {
                        for c in 0..xv.cols() {
                            dx.set(r, c, dyr[c] / s);
                        }
                    }
                }
                self.accum(grads, *x, dx);
            }
            Op::LayerNorm { x, gamma, beta, eps } => {
                let xv = self.value(*x);
                let gv = self.value(*gamma);
                let n = xv.cols() as f64;
                let mut dx = Matrix::zeros(xv.rows(), xv.cols());
                let mut dgamma = Matrix::zeros(1, xv.cols());
                let mut dbeta = Matrix::zeros(1, xv.cols());
                for r in 0..xv.rows() {
                    let row = xv.row(r);
                    let mean = row.iter().sum::<f64>() / n;
                    let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                    let denom = (var + eps).sqrt();
                    let xhat: Vec<f64> = row.iter().map(|&v| (v - mean) / denom).collect();
                    let dyr = dy.row(r);
                    let dxhat: Vec<f64> = (0..xv.cols())
                        .map(|c| dyr[c] * gv.get(0, c))
                        .collect();
                    let mean_dxhat = dxhat.iter().sum::<f64>() / n;
                    let mean_dxhat_xhat = dxhat
                        .iter()
                        .zip(&xhat)
                        .map(|(&a, &b)| a * b)
                        .sum::<f64>()
                        / n;
                    for c in 0..xv.cols() {
                        dx.set(
                            r,
                            c,
                            (dxhat[c] - mean_dxhat - xhat[c] * mean_dxhat_xhat) / denom,
                        );
                        dgamma.set(0, c, dgamma.get(0, c) + dyr[c] * xhat[c]);
                        dbeta.set(0, c, dbeta.get(0, c) + dyr[c]);
                    }
                }
                if self.needs(*x) {
                    self.accum(grads, *x, dx);
                }
                if self.needs(*gamma) {
                    self.accum(grads, *gamma, dgamma);
                }
                if self.needs(*beta) {
                    self.accum(grads, *beta, dbeta);
                }
            }
            Op::Dropout { x, mask } => {
                self.accum(grads, *x, dy.hadamard(mask).unwrap());
            }
        }
    }

    fn accum(&self, grads: &mut [Option<Matrix>], id: NodeId, contrib: Matrix) {
        if !self.needs(id) {
            return;
        }
        match &mut grads[id.0] {
            Some(g) => {
                let gs = g.as_mut_slice();
                for (o, &v) in gs.iter_mut().zip(contrib.as_slice()) {
                    *o += v;
                }
            }
            slot => *slot = Some(contrib),
        }
    }
}
