use std::rc::Rc;

use crate::error::{CoreError, Result};

use super::mat::{Mat, Real};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Matmul { a: usize, b: usize },
    Linear { x: usize, w: usize, b: usize },
    Add { a: usize, b: usize },
    Sub { a: usize, b: usize },
    Mul { a: usize, b: usize },
    Affine { x: usize, scale: f64, shift: f64 },
    ConcatCols { parts: Vec<usize> },
    SliceCols { x: usize, from: usize, to: usize },
    LeakyRelu { x: usize, slope: f64 },
    Relu { x: usize },
    Sigmoid { x: usize },
    Log { x: usize },
    PowConst { x: usize, p: f64 },
    SoftmaxRows { x: usize },
    SoftmaxPairs { x: usize, n: usize },
    LayerNormRows { x: usize, eps: f64 },
    SumAll { x: usize },
    MeanAll { x: usize },
    MeanAxis0 { x: usize },
    RowL2Norm { x: usize, eps: f64 },
    RbfEncode { x: usize, centers: Rc<Vec<f64>>, width: f64 },
    ExpandI { x: usize, n: usize },
    ExpandJ { x: usize, n: usize },
    SumOverJ { x: usize, n: usize, exclude_diag: bool },
    MulBcastCol { a: usize, s: usize },
    DivBcastCol { a: usize, s: usize },
    MulBcastRow { a: usize, r: usize },
    AddBcastRow { a: usize, r: usize },
    HeadSum { x: usize, heads: usize },
    HeadScale { x: usize, w: usize, heads: usize },
    HeadInterleave2 { a: usize, b: usize, heads: usize },
    GatherRows { x: usize, rows: Rc<Vec<usize>> },
    ScatterRows { base: usize, rows_data: usize, rows: Rc<Vec<usize>> },
    PickClass { x: usize, classes: Rc<Vec<usize>> },
}

struct Node<F> {
    value: Mat<F>,
    op: Op,
    needs_grad: bool,
}

/// Reverse-mode autodiff tape over dense matrices.
///
/// Operations append nodes in topological order; [`Tape::backward`] walks the
/// nodes in reverse, accumulating gradients. A tape is confined to a single
/// thread; independent tapes may run concurrently.
pub struct Tape<F: Real> {
    nodes: Vec<Node<F>>,
}

/// Gradients of a scalar root with respect to the tape's leaf inputs.
pub struct Grads<F> {
    grads: Vec<Option<Mat<F>>>,
}

impl<F: Real> Grads<F> {
    pub fn get(&self, v: Var) -> Option<&Mat<F>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }
}

impl<F: Real> Default for Tape<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Real> Tape<F> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Drops all recorded nodes. Outstanding `Var` handles become invalid.
    pub fn clear(&mut self) {
        self.nodes.clear();
    }

    pub fn value(&self, v: Var) -> &Mat<F> {
        &self.nodes[v.0].value
    }

    fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    fn push(&mut self, value: Mat<F>, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// Inserts a leaf whose gradient will be tracked.
    pub fn param(&mut self, value: Mat<F>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Inserts a leaf treated as a constant.
    pub fn constant(&mut self, value: Mat<F>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn input(&mut self, value: Mat<F>, requires_grad: bool) -> Var {
        self.push(value, Op::Leaf, requires_grad)
    }

    // ---- primitive operations ----

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, ka) = self.shape(a);
        let (kb, n) = self.shape(b);
        if ka != kb {
            return Err(CoreError::Shape(format!(
                "matmul {m}x{ka} . {kb}x{n}"
            )));
        }
        let value = self.nodes[a.0].value.matmul(&self.nodes[b.0].value);
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::Matmul { a: a.0, b: b.0 }, needs))
    }

    /// `x . w + bias`, bias broadcast over rows (`bias` is `[1, n]`).
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (m, kx) = self.shape(x);
        let (kw, n) = self.shape(w);
        let (br, bn) = self.shape(b);
        if kx != kw || br != 1 || bn != n {
            return Err(CoreError::Shape(format!(
                "linear x={m}x{kx} w={kw}x{n} b={br}x{bn}"
            )));
        }
        let mut value = self.nodes[x.0].value.matmul(&self.nodes[w.0].value);
        let bias = &self.nodes[b.0].value;
        for i in 0..m {
            let row = value.row_mut(i);
            for (j, rv) in row.iter_mut().enumerate() {
                *rv += bias.get(0, j);
            }
        }
        let needs = self.needs(x) || self.needs(w) || self.needs(b);
        Ok(self.push(
            value,
            Op::Linear {
                x: x.0,
                w: w.0,
                b: b.0,
            },
            needs,
        ))
    }

    fn binary_same_shape(&self, a: Var, b: Var, name: &str) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(CoreError::Shape(format!(
                "{name}: {:?} vs {:?}",
                self.shape(a),
                self.shape(b)
            )));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_same_shape(a, b, "add")?;
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        let data = va
            .as_slice()
            .iter()
            .zip(vb.as_slice())
            .map(|(&x, &y)| x + y)
            .collect();
        let value = Mat::from_vec(va.rows(), va.cols(), data);
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::Add { a: a.0, b: b.0 }, needs))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_same_shape(a, b, "sub")?;
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        let data = va
            .as_slice()
            .iter()
            .zip(vb.as_slice())
            .map(|(&x, &y)| x - y)
            .collect();
        let value = Mat::from_vec(va.rows(), va.cols(), data);
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::Sub { a: a.0, b: b.0 }, needs))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_same_shape(a, b, "mul")?;
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        let data = va
            .as_slice()
            .iter()
            .zip(vb.as_slice())
            .map(|(&x, &y)| x * y)
            .collect();
        let value = Mat::from_vec(va.rows(), va.cols(), data);
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::Mul { a: a.0, b: b.0 }, needs))
    }

    /// `scale * x + shift` with compile-time constants.
    pub fn affine(&mut self, x: Var, scale: f64, shift: f64) -> Var {
        let (s, c) = (F::from_f64(scale), F::from_f64(shift));
        let value = self.nodes[x.0].value.map(|v| s * v + c);
        let needs = self.needs(x);
        self.push(value, Op::Affine { x: x.0, scale, shift }, needs)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(CoreError::Shape("concat_cols: empty".into()));
        }
        let rows = self.shape(parts[0]).0;
        let mut cols = 0;
        for &p in parts {
            let (r, c) = self.shape(p);
            if r != rows {
                return Err(CoreError::Shape(format!(
                    "concat_cols: row mismatch {r} vs {rows}"
                )));
            }
            cols += c;
        }
        let mut value = Mat::zeros(rows, cols);
        let mut off = 0;
        for &p in parts {
            let v = &self.nodes[p.0].value;
            let c = v.cols();
            for i in 0..rows {
                let src = v.row(i);
                value.row_mut(i)[off..off + c].copy_from_slice(src);
            }
            off += c;
        }
        let needs = parts.iter().any(|&p| self.needs(p));
        Ok(self.push(
            value,
            Op::ConcatCols {
                parts: parts.iter().map(|p| p.0).collect(),
            },
            needs,
        ))
    }

    pub fn slice_cols(&mut self, x: Var, from: usize, to: usize) -> Result<Var> {
        let (rows, cols) = self.shape(x);
        if from >= to || to > cols {
            return Err(CoreError::Shape(format!(
                "slice_cols {from}..{to} of {cols}"
            )));
        }
        let v = &self.nodes[x.0].value;
        let mut value = Mat::zeros(rows, to - from);
        for i in 0..rows {
            value.row_mut(i).copy_from_slice(&v.row(i)[from..to]);
        }
        let needs = self.needs(x);
        Ok(self.push(value, Op::SliceCols { x: x.0, from, to }, needs))
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Var {
        let s = F::from_f64(slope);
        let value = self.nodes[x.0].value.map(|v| if v >= F::zero() { v } else { s * v });
        let needs = self.needs(x);
        self.push(value, Op::LeakyRelu { x: x.0, slope }, needs)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let value = self.nodes[x.0].value.map(|v| v.max(F::zero()));
        let needs = self.needs(x);
        self.push(value, Op::Relu { x: x.0 }, needs)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let one = F::one();
        let value = self.nodes[x.0].value.map(|v| one / (one + (-v).exp()));
        let needs = self.needs(x);
        self.push(value, Op::Sigmoid { x: x.0 }, needs)
    }

    pub fn log(&mut self, x: Var) -> Var {
        let value = self.nodes[x.0].value.map(|v| v.ln());
        let needs = self.needs(x);
        self.push(value, Op::Log { x: x.0 }, needs)
    }

    pub fn pow_const(&mut self, x: Var, p: f64) -> Var {
        let pf = F::from_f64(p);
        let value = self.nodes[x.0].value.map(|v| v.powf(pf));
        let needs = self.needs(x);
        self.push(value, Op::PowConst { x: x.0, p }, needs)
    }

    /// Softmax along each row.
    pub fn softmax_rows(&mut self, x: Var) -> Result<Var> {
        let (rows, cols) = self.shape(x);
        if cols == 0 {
            return Err(CoreError::Shape("softmax over empty axis".into()));
        }
        let v = &self.nodes[x.0].value;
        let mut value = Mat::zeros(rows, cols);
        for i in 0..rows {
            softmax_slice(v.row(i), value.row_mut(i));
        }
        let needs = self.needs(x);
        Ok(self.push(value, Op::SoftmaxRows { x: x.0 }, needs))
    }

    /// Softmax over the neighbor index `j` of a pairwise tensor.
    ///
    /// `x` is `[n*n, h]` with pair `(i, j)` at row `i*n + j`; for each fixed
    /// `(i, column)` the softmax normalizes over all `j` (self included).
    pub fn softmax_pairs_over_j(&mut self, x: Var, n: usize) -> Result<Var> {
        let (rows, h) = self.shape(x);
        if rows != n * n || n == 0 {
            return Err(CoreError::Shape(format!(
                "softmax_pairs_over_j: rows={rows} n={n}"
            )));
        }
        let v = &self.nodes[x.0].value;
        let mut value = Mat::zeros(rows, h);
        let mut col = vec![F::zero(); n];
        let mut out = vec![F::zero(); n];
        for i in 0..n {
            for c in 0..h {
                for j in 0..n {
                    col[j] = v.get(i * n + j, c);
                }
                softmax_slice(&col, &mut out);
                for j in 0..n {
                    value.set(i * n + j, c, out[j]);
                }
            }
        }
        let needs = self.needs(x);
        Ok(self.push(value, Op::SoftmaxPairs { x: x.0, n }, needs))
    }

    /// Layer normalization along each row (no learnable affine).
    pub fn layer_norm_rows(&mut self, x: Var) -> Result<Var> {
        self.layer_norm_rows_eps(x, 1e-5)
    }

    pub fn layer_norm_rows_eps(&mut self, x: Var, eps: f64) -> Result<Var> {
        let (rows, cols) = self.shape(x);
        if cols < 1 {
            return Err(CoreError::Shape("layer_norm over empty axis".into()));
        }
        let v = &self.nodes[x.0].value;
        let mut value = Mat::zeros(rows, cols);
        let nf = F::from_f64(cols as f64);
        let epsf = F::from_f64(eps);
        for i in 0..rows {
            let row = v.row(i);
            let mean = row.iter().copied().sum::<F>() / nf;
            let var = row
                .iter()
                .map(|&x| (x - mean) * (x - mean))
                .sum::<F>()
                / nf;
            let inv = F::one() / (var + epsf).sqrt();
            for (j, &x) in row.iter().enumerate() {
                value.set(i, j, (x - mean) * inv);
            }
        }
        let needs = self.needs(x);
        Ok(self.push(value, Op::LayerNormRows { x: x.0, eps }, needs))
    }

    pub fn sum_all(&mut self, x: Var) -> Var {
        let s = self.nodes[x.0].value.as_slice().iter().copied().sum::<F>();
        let needs = self.needs(x);
        self.push(Mat::scalar(s), Op::SumAll { x: x.0 }, needs)
    }

    pub fn mean_all(&mut self, x: Var) -> Var {
        let v = &self.nodes[x.0].value;
        let s = v.as_slice().iter().copied().sum::<F>() / F::from_f64(v.len() as f64);
        let needs = self.needs(x);
        self.push(Mat::scalar(s), Op::MeanAll { x: x.0 }, needs)
    }

    /// Column means: `[m, n] -> [1, n]`.
    pub fn mean_axis0(&mut self, x: Var) -> Var {
        let v = &self.nodes[x.0].value;
        let (m, n) = v.shape();
        let mf = F::from_f64(m as f64);
        let mut value = Mat::zeros(1, n);
        for i in 0..m {
            for (j, &x) in v.row(i).iter().enumerate() {
                let cur = value.get(0, j);
                value.set(0, j, cur + x);
            }
        }
        for j in 0..n {
            let cur = value.get(0, j);
            value.set(0, j, cur / mf);
        }
        let needs = self.needs(x);
        self.push(value, Op::MeanAxis0 { x: x.0 }, needs)
    }

    /// Euclidean norm of each row: `[m, n] -> [m, 1]`, `sqrt(sum + eps)`.
    ///
    /// `eps > 0` guards the d=0 singularity for inter-atom distances;
    /// `eps = 0` gives the exact norm (zero rows get zero gradient).
    pub fn row_l2_norm(&mut self, x: Var, eps: f64) -> Var {
        let v = &self.nodes[x.0].value;
        let (m, _) = v.shape();
        let epsf = F::from_f64(eps);
        let mut value = Mat::zeros(m, 1);
        for i in 0..m {
            let ss = v.row(i).iter().map(|&x| x * x).sum::<F>();
            value.set(i, 0, (ss + epsf).sqrt());
        }
        let needs = self.needs(x);
        self.push(value, Op::RowL2Norm { x: x.0, eps }, needs)
    }

    /// Gaussian radial basis encoding of a column of distances.
    ///
    /// `x` is `[m, 1]`; output `[m, K]` with `exp(-(d - mu_k)^2 / (2 w^2))`.
    pub fn rbf_encode(&mut self, x: Var, centers: Rc<Vec<f64>>, width: f64) -> Result<Var> {
        let (m, c) = self.shape(x);
        if c != 1 {
            return Err(CoreError::Shape(format!("rbf_encode expects [m,1], got [{m},{c}]")));
        }
        let v = &self.nodes[x.0].value;
        let k = centers.len();
        let denom = F::from_f64(2.0 * width * width);
        let mut value = Mat::zeros(m, k);
        for i in 0..m {
            let d = v.get(i, 0);
            for (kk, &mu) in centers.iter().enumerate() {
                let diff = d - F::from_f64(mu);
                value.set(i, kk, (-(diff * diff) / denom).exp());
            }
        }
        let needs = self.needs(x);
        Ok(self.push(value, Op::RbfEncode { x: x.0, centers, width }, needs))
    }

    /// Broadcast node rows over pairs by the central index:
    /// `[n, d] -> [n*n, d]` with `out[(i, j)] = x[i]`.
    pub fn expand_i(&mut self, x: Var, n: usize) -> Result<Var> {
        let (rows, d) = self.shape(x);
        if rows != n {
            return Err(CoreError::Shape(format!("expand_i: rows={rows} n={n}")));
        }
        let v = &self.nodes[x.0].value;
        let mut value = Mat::zeros(n * n, d);
        for i in 0..n {
            for j in 0..n {
                value.row_mut(i * n + j).copy_from_slice(v.row(i));
            }
        }
        let needs = self.needs(x);
        Ok(self.push(value, Op::ExpandI { x: x.0, n }, needs))
    }

    /// Broadcast node rows over pairs by the neighbor index:
    /// `[n, d] -> [n*n, d]` with `out[(i, j)] = x[j]`.
    pub fn expand_j(&mut self, x: Var, n: usize) -> Result<Var> {
        let (rows, d) = self.shape(x);
        if rows != n {
            return Err(CoreError::Shape(format!("expand_j: rows={rows} n={n}")));
        }
        let v = &self.nodes[x.0].value;
        let mut value = Mat::zeros(n * n, d);
        for i in 0..n {
            for j in 0..n {
                value.row_mut(i * n + j).copy_from_slice(v.row(j));
            }
        }
        let needs = self.needs(x);
        Ok(self.push(value, Op::ExpandJ { x: x.0, n }, needs))
    }

    /// Reduce a pairwise tensor over the neighbor index:
    /// `[n*n, d] -> [n, d]` with `out[i] = sum_j x[(i, j)]`.
    pub fn sum_over_j(&mut self, x: Var, n: usize, exclude_diag: bool) -> Result<Var> {
        let (rows, d) = self.shape(x);
        if rows != n * n {
            return Err(CoreError::Shape(format!("sum_over_j: rows={rows} n={n}")));
        }
        let v = &self.nodes[x.0].value;
        let mut value = Mat::zeros(n, d);
        for i in 0..n {
            for j in 0..n {
                if exclude_diag && i == j {
                    continue;
                }
                let src = v.row(i * n + j);
                let dst = value.row_mut(i);
                for (dv, &sv) in dst.iter_mut().zip(src) {
                    *dv += sv;
                }
            }
        }
        let needs = self.needs(x);
        Ok(self.push(
            value,
            Op::SumOverJ {
                x: x.0,
                n,
                exclude_diag,
            },
            needs,
        ))
    }

    /// `[m, n] * [m, 1]` with the column broadcast across `n`.
    pub fn mul_bcast_col(&mut self, a: Var, s: Var) -> Result<Var> {
        let (m, n) = self.shape(a);
        let (ms, cs) = self.shape(s);
        if ms != m || cs != 1 {
            return Err(CoreError::Shape(format!(
                "mul_bcast_col: a={m}x{n} s={ms}x{cs}"
            )));
        }
        let (va, vs) = (&self.nodes[a.0].value, &self.nodes[s.0].value);
        let mut value = Mat::zeros(m, n);
        for i in 0..m {
            let f = vs.get(i, 0);
            for (j, &x) in va.row(i).iter().enumerate() {
                value.set(i, j, x * f);
            }
        }
        let needs = self.needs(a) || self.needs(s);
        Ok(self.push(value, Op::MulBcastCol { a: a.0, s: s.0 }, needs))
    }

    /// `[m, n] / [m, 1]` with the column broadcast across `n`.
    pub fn div_bcast_col(&mut self, a: Var, s: Var) -> Result<Var> {
        let (m, n) = self.shape(a);
        let (ms, cs) = self.shape(s);
        if ms != m || cs != 1 {
            return Err(CoreError::Shape(format!(
                "div_bcast_col: a={m}x{n} s={ms}x{cs}"
            )));
        }
        let (va, vs) = (&self.nodes[a.0].value, &self.nodes[s.0].value);
        let mut value = Mat::zeros(m, n);
        for i in 0..m {
            let f = F::one() / vs.get(i, 0);
            for (j, &x) in va.row(i).iter().enumerate() {
                value.set(i, j, x * f);
            }
        }
        let needs = self.needs(a) || self.needs(s);
        Ok(self.push(value, Op::DivBcastCol { a: a.0, s: s.0 }, needs))
    }

    /// `[m, n] * [1, n]` with the row broadcast across `m`.
    pub fn mul_bcast_row(&mut self, a: Var, r: Var) -> Result<Var> {
        let (m, n) = self.shape(a);
        let (rr, rn) = self.shape(r);
        if rr != 1 || rn != n {
            return Err(CoreError::Shape(format!(
                "mul_bcast_row: a={m}x{n} r={rr}x{rn}"
            )));
        }
        let (va, vr) = (&self.nodes[a.0].value, &self.nodes[r.0].value);
        let mut value = Mat::zeros(m, n);
        for i in 0..m {
            for (j, &x) in va.row(i).iter().enumerate() {
                value.set(i, j, x * vr.get(0, j));
            }
        }
        let needs = self.needs(a) || self.needs(r);
        Ok(self.push(value, Op::MulBcastRow { a: a.0, r: r.0 }, needs))
    }

    /// `[m, n] + [1, n]` with the row broadcast across `m`.
    pub fn add_bcast_row(&mut self, a: Var, r: Var) -> Result<Var> {
        let (m, n) = self.shape(a);
        let (rr, rn) = self.shape(r);
        if rr != 1 || rn != n {
            return Err(CoreError::Shape(format!(
                "add_bcast_row: a={m}x{n} r={rr}x{rn}"
            )));
        }
        let (va, vr) = (&self.nodes[a.0].value, &self.nodes[r.0].value);
        let mut value = Mat::zeros(m, n);
        for i in 0..m {
            for (j, &x) in va.row(i).iter().enumerate() {
                value.set(i, j, x + vr.get(0, j));
            }
        }
        let needs = self.needs(a) || self.needs(r);
        Ok(self.push(value, Op::AddBcastRow { a: a.0, r: r.0 }, needs))
    }

    /// Sum within each contiguous head chunk: `[m, h*dh] -> [m, h]`.
    pub fn head_sum(&mut self, x: Var, heads: usize) -> Result<Var> {
        let (m, d) = self.shape(x);
        if heads == 0 || d % heads != 0 {
            return Err(CoreError::Shape(format!("head_sum: d={d} heads={heads}")));
        }
        let dh = d / heads;
        let v = &self.nodes[x.0].value;
        let mut value = Mat::zeros(m, heads);
        for i in 0..m {
            let row = v.row(i);
            for h in 0..heads {
                let s = row[h * dh..(h + 1) * dh].iter().copied().sum::<F>();
                value.set(i, h, s);
            }
        }
        let needs = self.needs(x);
        Ok(self.push(value, Op::HeadSum { x: x.0, heads }, needs))
    }

    /// Scale each head chunk of `x` by the matching column of `w`:
    /// `out[i, h*dh + c] = x[i, h*dh + c] * w[i, h]`.
    pub fn head_scale(&mut self, x: Var, w: Var, heads: usize) -> Result<Var> {
        let (m, d) = self.shape(x);
        let (mw, hw) = self.shape(w);
        if heads == 0 || d % heads != 0 || mw != m || hw != heads {
            return Err(CoreError::Shape(format!(
                "head_scale: x={m}x{d} w={mw}x{hw} heads={heads}"
            )));
        }
        let dh = d / heads;
        let (vx, vw) = (&self.nodes[x.0].value, &self.nodes[w.0].value);
        let mut value = Mat::zeros(m, d);
        for i in 0..m {
            let row = vx.row(i);
            let out = value.row_mut(i);
            for h in 0..heads {
                let f = vw.get(i, h);
                for c in 0..dh {
                    out[h * dh + c] = row[h * dh + c] * f;
                }
            }
        }
        let needs = self.needs(x) || self.needs(w);
        Ok(self.push(
            value,
            Op::HeadScale {
                x: x.0,
                w: w.0,
                heads,
            },
            needs,
        ))
    }

    /// Per-head concatenation of two tensors:
    /// `out[i, h*2dh .. h*2dh+dh] = a` chunk, `out[i, h*2dh+dh ..] = b` chunk.
    pub fn head_interleave2(&mut self, a: Var, b: Var, heads: usize) -> Result<Var> {
        let (m, d) = self.shape(a);
        if self.shape(b) != (m, d) || heads == 0 || d % heads != 0 {
            return Err(CoreError::Shape(format!(
                "head_interleave2: a={m}x{d} b={:?} heads={heads}",
                self.shape(b)
            )));
        }
        let dh = d / heads;
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        let mut value = Mat::zeros(m, 2 * d);
        for i in 0..m {
            let ra = va.row(i);
            let rb = vb.row(i);
            let out = value.row_mut(i);
            for h in 0..heads {
                out[h * 2 * dh..h * 2 * dh + dh].copy_from_slice(&ra[h * dh..(h + 1) * dh]);
                out[h * 2 * dh + dh..(h + 1) * 2 * dh].copy_from_slice(&rb[h * dh..(h + 1) * dh]);
            }
        }
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(
            value,
            Op::HeadInterleave2 {
                a: a.0,
                b: b.0,
                heads,
            },
            needs,
        ))
    }

    pub fn gather_rows(&mut self, x: Var, rows: Rc<Vec<usize>>) -> Result<Var> {
        let (m, d) = self.shape(x);
        if let Some(&bad) = rows.iter().find(|&&r| r >= m) {
            return Err(CoreError::Shape(format!("gather_rows: row {bad} of {m}")));
        }
        let v = &self.nodes[x.0].value;
        let mut value = Mat::zeros(rows.len(), d);
        for (k, &r) in rows.iter().enumerate() {
            value.row_mut(k).copy_from_slice(v.row(r));
        }
        let needs = self.needs(x);
        Ok(self.push(value, Op::GatherRows { x: x.0, rows }, needs))
    }

    /// Copy of `base` with `rows[k]` replaced by row `k` of `rows_data`.
    /// Row indexes must be unique.
    pub fn scatter_rows_replace(
        &mut self,
        base: Var,
        rows_data: Var,
        rows: Rc<Vec<usize>>,
    ) -> Result<Var> {
        let (m, d) = self.shape(base);
        let (k, dd) = self.shape(rows_data);
        if k != rows.len() || dd != d {
            return Err(CoreError::Shape(format!(
                "scatter_rows_replace: data={k}x{dd} rows={} base={m}x{d}",
                rows.len()
            )));
        }
        if let Some(&bad) = rows.iter().find(|&&r| r >= m) {
            return Err(CoreError::Shape(format!("scatter_rows_replace: row {bad} of {m}")));
        }
        let mut seen = vec![false; m];
        for &r in rows.iter() {
            if seen[r] {
                return Err(CoreError::Shape(format!(
                    "scatter_rows_replace: duplicate row {r}"
                )));
            }
            seen[r] = true;
        }
        let mut value = self.nodes[base.0].value.clone();
        let vd = &self.nodes[rows_data.0].value;
        for (kk, &r) in rows.iter().enumerate() {
            value.row_mut(r).copy_from_slice(vd.row(kk));
        }
        let needs = self.needs(base) || self.needs(rows_data);
        Ok(self.push(
            value,
            Op::ScatterRows {
                base: base.0,
                rows_data: rows_data.0,
                rows,
            },
            needs,
        ))
    }

    /// Select one column per row: `out[i, 0] = x[i, classes[i]]`.
    pub fn pick_class(&mut self, x: Var, classes: Rc<Vec<usize>>) -> Result<Var> {
        let (m, c) = self.shape(x);
        if classes.len() != m {
            return Err(CoreError::Shape(format!(
                "pick_class: {} classes for {m} rows",
                classes.len()
            )));
        }
        if let Some(&bad) = classes.iter().find(|&&t| t >= c) {
            return Err(CoreError::Shape(format!("pick_class: class {bad} of {c}")));
        }
        let v = &self.nodes[x.0].value;
        let mut value = Mat::zeros(m, 1);
        for (i, &t) in classes.iter().enumerate() {
            value.set(i, 0, v.get(i, t));
        }
        let needs = self.needs(x);
        Ok(self.push(value, Op::PickClass { x: x.0, classes }, needs))
    }

    // ---- backward ----

    /// Reverse pass from a scalar root. Returns gradients for leaf inputs
    /// created with `requires_grad = true`; intermediate gradients are freed
    /// as the walk proceeds.
    pub fn backward(&self, root: Var) -> Result<Grads<F>> {
        if self.shape(root) != (1, 1) {
            return Err(CoreError::Shape(format!(
                "backward root must be scalar, got {:?}",
                self.shape(root)
            )));
        }
        let mut grads: Vec<Option<Mat<F>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(Mat::scalar(F::one()));

        for id in (0..=root.0).rev() {
            if !self.nodes[id].needs_grad {
                grads[id] = None;
                continue;
            }
            if grads[id].is_none() {
                continue;
            }
            if matches!(self.nodes[id].op, Op::Leaf) {
                continue;
            }
            let g = grads[id].take().expect("checked above");
            self.propagate(id, &g, &mut grads);
        }

        Ok(Grads { grads })
    }

    fn acc(&self, grads: &mut [Option<Mat<F>>], id: usize, update: impl FnOnce(&mut Mat<F>)) {
        if !self.nodes[id].needs_grad {
            return;
        }
        let (r, c) = self.nodes[id].value.shape();
        let slot = &mut grads[id];
        if slot.is_none() {
            *slot = Some(Mat::zeros(r, c));
        }
        update(slot.as_mut().expect("just initialized"));
    }

    #[allow(clippy::too_many_lines)]
    fn propagate(&self, id: usize, g: &Mat<F>, grads: &mut [Option<Mat<F>>]) {
        match &self.nodes[id].op {
            Op::Leaf => {}
            Op::Matmul { a, b } => {
                let va = &self.nodes[*a].value;
                let vb = &self.nodes[*b].value;
                let (m, k) = va.shape();
                let n = vb.cols();
                // dA = G . B^T
                self.acc(grads, *a, |da| {
                    F::gemm(
                        m,
                        n,
                        k,
                        F::one(),
                        g.as_slice(),
                        n as isize,
                        1,
                        vb.as_slice(),
                        1,
                        n as isize,
                        F::one(),
                        da.as_mut_slice(),
                        k as isize,
                        1,
                    );
                });
                // dB = A^T . G
                self.acc(grads, *b, |db| {
                    F::gemm(
                        k,
                        m,
                        n,
                        F::one(),
                        va.as_slice(),
                        1,
                        k as isize,
                        g.as_slice(),
                        n as isize,
                        1,
                        F::one(),
                        db.as_mut_slice(),
                        n as isize,
                        1,
                    );
                });
            }
            Op::Linear { x, w, b } => {
                let vx = &self.nodes[*x].value;
                let vw = &self.nodes[*w].value;
                let (m, k) = vx.shape();
                let n = vw.cols();
                self.acc(grads, *x, |dx| {
                    F::gemm(
                        m,
                        n,
                        k,
                        F::one(),
                        g.as_slice(),
                        n as isize,
                        1,
                        vw.as_slice(),
                        1,
                        n as isize,
                        F::one(),
                        dx.as_mut_slice(),
                        k as isize,
                        1,
                    );
                });
                self.acc(grads, *w, |dw| {
                    F::gemm(
                        k,
                        m,
                        n,
                        F::one(),
                        vx.as_slice(),
                        1,
                        k as isize,
                        g.as_slice(),
                        n as isize,
                        1,
                        F::one(),
                        dw.as_mut_slice(),
                        n as isize,
                        1,
                    );
                });
                self.acc(grads, *b, |db| {
                    for i in 0..m {
                        for (j, &gv) in g.row(i).iter().enumerate() {
                            let cur = db.get(0, j);
                            db.set(0, j, cur + gv);
                        }
                    }
                });
            }
            Op::Add { a, b } => {
                self.acc(grads, *a, |da| add_into(da, g, F::one()));
                self.acc(grads, *b, |db| add_into(db, g, F::one()));
            }
            Op::Sub { a, b } => {
                self.acc(grads, *a, |da| add_into(da, g, F::one()));
                self.acc(grads, *b, |db| add_into(db, g, -F::one()));
            }
            Op::Mul { a, b } => {
                let va = &self.nodes[*a].value;
                let vb = &self.nodes[*b].value;
                self.acc(grads, *a, |da| {
                    for (d, (&gv, &bv)) in da
                        .as_mut_slice()
                        .iter_mut()
                        .zip(g.as_slice().iter().zip(vb.as_slice()))
                    {
                        *d += gv * bv;
                    }
                });
                self.acc(grads, *b, |db| {
                    for (d, (&gv, &av)) in db
                        .as_mut_slice()
                        .iter_mut()
                        .zip(g.as_slice().iter().zip(va.as_slice()))
                    {
                        *d += gv * av;
                    }
                });
            }
            Op::Affine { x, scale, .. } => {
                let s = F::from_f64(*scale);
                self.acc(grads, *x, |dx| add_into(dx, g, s));
            }
            Op::ConcatCols { parts } => {
                let mut off = 0;
                for &p in parts {
                    let c = self.nodes[p].value.cols();
                    self.acc(grads, p, |dp| {
                        for i in 0..dp.rows() {
                            let src = &g.row(i)[off..off + c];
                            for (d, &s) in dp.row_mut(i).iter_mut().zip(src) {
                                *d += s;
                            }
                        }
                    });
                    off += c;
                }
            }
            Op::SliceCols { x, from, .. } => {
                self.acc(grads, *x, |dx| {
                    for i in 0..g.rows() {
                        let dst = &mut dx.row_mut(i)[*from..*from + g.cols()];
                        for (d, &s) in dst.iter_mut().zip(g.row(i)) {
                            *d += s;
                        }
                    }
                });
            }
            Op::LeakyRelu { x, slope } => {
                let vx = &self.nodes[*x].value;
                let s = F::from_f64(*slope);
                self.acc(grads, *x, |dx| {
                    for (d, (&gv, &xv)) in dx
                        .as_mut_slice()
                        .iter_mut()
                        .zip(g.as_slice().iter().zip(vx.as_slice()))
                    {
                        *d += if xv >= F::zero() { gv } else { gv * s };
                    }
                });
            }
            Op::Relu { x } => {
                let vx = &self.nodes[*x].value;
                self.acc(grads, *x, |dx| {
                    for (d, (&gv, &xv)) in dx
                        .as_mut_slice()
                        .iter_mut()
                        .zip(g.as_slice().iter().zip(vx.as_slice()))
                    {
                        if xv > F::zero() {
                            *d += gv;
                        }
                    }
                });
            }
            Op::Sigmoid { x } => {
                let vy = &self.nodes[id].value;
                self.acc(grads, *x, |dx| {
                    for (d, (&gv, &yv)) in dx
                        .as_mut_slice()
                        .iter_mut()
                        .zip(g.as_slice().iter().zip(vy.as_slice()))
                    {
                        *d += gv * yv * (F::one() - yv);
                    }
                });
            }
            Op::Log { x } => {
                let vx = &self.nodes[*x].value;
                self.acc(grads, *x, |dx| {
                    for (d, (&gv, &xv)) in dx
                        .as_mut_slice()
                        .iter_mut()
                        .zip(g.as_slice().iter().zip(vx.as_slice()))
                    {
                        *d += gv / xv;
                    }
                });
            }
            Op::PowConst { x, p } => {
                let vx = &self.nodes[*x].value;
                let pf = F::from_f64(*p);
                self.acc(grads, *x, |dx| {
                    for (d, (&gv, &xv)) in dx
                        .as_mut_slice()
                        .iter_mut()
                        .zip(g.as_slice().iter().zip(vx.as_slice()))
                    {
                        if *p == 0.0 {
                            continue;
                        }
                        *d += gv * pf * xv.powf(pf - F::one());
                    }
                });
            }
            Op::SoftmaxRows { x } => {
                let vy = &self.nodes[id].value;
                self.acc(grads, *x, |dx| {
                    for i in 0..vy.rows() {
                        let y = vy.row(i);
                        let gr = g.row(i);
                        let dot = y
                            .iter()
                            .zip(gr)
                            .map(|(&yv, &gv)| yv * gv)
                            .sum::<F>();
                        for ((d, &yv), &gv) in dx.row_mut(i).iter_mut().zip(y).zip(gr) {
                            *d += yv * (gv - dot);
                        }
                    }
                });
            }
            Op::SoftmaxPairs { x, n } => {
                let vy = &self.nodes[id].value;
                let h = vy.cols();
                self.acc(grads, *x, |dx| {
                    for i in 0..*n {
                        for c in 0..h {
                            let mut dot = F::zero();
                            for j in 0..*n {
                                dot += vy.get(i * n + j, c) * g.get(i * n + j, c);
                            }
                            for j in 0..*n {
                                let y = vy.get(i * n + j, c);
                                let cur = dx.get(i * n + j, c);
                                dx.set(i * n + j, c, cur + y * (g.get(i * n + j, c) - dot));
                            }
                        }
                    }
                });
            }
            Op::LayerNormRows { x, eps } => {
                let vx = &self.nodes[*x].value;
                let vy = &self.nodes[id].value;
                let (rows, cols) = vx.shape();
                let nf = F::from_f64(cols as f64);
                let epsf = F::from_f64(*eps);
                self.acc(grads, *x, |dx| {
                    for i in 0..rows {
                        let xr = vx.row(i);
                        let yr = vy.row(i);
                        let gr = g.row(i);
                        let mean = xr.iter().copied().sum::<F>() / nf;
                        let var = xr.iter().map(|&v| (v - mean) * (v - mean)).sum::<F>() / nf;
                        let inv = F::one() / (var + epsf).sqrt();
                        let gmean = gr.iter().copied().sum::<F>() / nf;
                        let gydot = gr
                            .iter()
                            .zip(yr)
                            .map(|(&gv, &yv)| gv * yv)
                            .sum::<F>()
                            / nf;
                        for ((d, &gv), &yv) in dx.row_mut(i).iter_mut().zip(gr).zip(yr) {
                            *d += inv * (gv - gmean - yv * gydot);
                        }
                    }
                });
            }
            Op::SumAll { x } => {
                let gv = g.item();
                self.acc(grads, *x, |dx| {
                    for d in dx.as_mut_slice() {
                        *d += gv;
                    }
                });
            }
            Op::MeanAll { x } => {
                let len = self.nodes[*x].value.len();
                let gv = g.item() / F::from_f64(len as f64);
                self.acc(grads, *x, |dx| {
                    for d in dx.as_mut_slice() {
                        *d += gv;
                    }
                });
            }
            Op::MeanAxis0 { x } => {
                let m = self.nodes[*x].value.rows();
                let mf = F::from_f64(m as f64);
                self.acc(grads, *x, |dx| {
                    for i in 0..m {
                        for (j, d) in dx.row_mut(i).iter_mut().enumerate() {
                            *d += g.get(0, j) / mf;
                        }
                    }
                });
            }
            Op::RowL2Norm { x, .. } => {
                let vx = &self.nodes[*x].value;
                let vy = &self.nodes[id].value;
                self.acc(grads, *x, |dx| {
                    for i in 0..vx.rows() {
                        let norm = vy.get(i, 0);
                        if norm == F::zero() {
                            continue;
                        }
                        let gv = g.get(i, 0) / norm;
                        for (d, &xv) in dx.row_mut(i).iter_mut().zip(vx.row(i)) {
                            *d += gv * xv;
                        }
                    }
                });
            }
            Op::RbfEncode { x, centers, width } => {
                let vx = &self.nodes[*x].value;
                let vy = &self.nodes[id].value;
                let s2 = F::from_f64(width * width);
                self.acc(grads, *x, |dx| {
                    for i in 0..vx.rows() {
                        let d = vx.get(i, 0);
                        let mut acc = F::zero();
                        for (k, &mu) in centers.iter().enumerate() {
                            let diff = d - F::from_f64(mu);
                            acc += g.get(i, k) * vy.get(i, k) * (-diff / s2);
                        }
                        let cur = dx.get(i, 0);
                        dx.set(i, 0, cur + acc);
                    }
                });
            }
            Op::ExpandI { x, n } => {
                self.acc(grads, *x, |dx| {
                    for i in 0..*n {
                        for j in 0..*n {
                            let src = g.row(i * n + j);
                            for (d, &s) in dx.row_mut(i).iter_mut().zip(src) {
                                *d += s;
                            }
                        }
                    }
                });
            }
            Op::ExpandJ { x, n } => {
                self.acc(grads, *x, |dx| {
                    for i in 0..*n {
                        for j in 0..*n {
                            let src = g.row(i * n + j);
                            for (d, &s) in dx.row_mut(j).iter_mut().zip(src) {
                                *d += s;
                            }
                        }
                    }
                });
            }
            Op::SumOverJ { x, n, exclude_diag } => {
                self.acc(grads, *x, |dx| {
                    for i in 0..*n {
                        for j in 0..*n {
                            if *exclude_diag && i == j {
                                continue;
                            }
                            let src = g.row(i);
                            for (d, &s) in dx.row_mut(i * n + j).iter_mut().zip(src) {
                                *d += s;
                            }
                        }
                    }
                });
            }
            Op::MulBcastCol { a, s } => {
                let va = &self.nodes[*a].value;
                let vs = &self.nodes[*s].value;
                self.acc(grads, *a, |da| {
                    for i in 0..va.rows() {
                        let f = vs.get(i, 0);
                        for (d, &gv) in da.row_mut(i).iter_mut().zip(g.row(i)) {
                            *d += gv * f;
                        }
                    }
                });
                self.acc(grads, *s, |ds| {
                    for i in 0..va.rows() {
                        let dot = g
                            .row(i)
                            .iter()
                            .zip(va.row(i))
                            .map(|(&gv, &av)| gv * av)
                            .sum::<F>();
                        let cur = ds.get(i, 0);
                        ds.set(i, 0, cur + dot);
                    }
                });
            }
            Op::DivBcastCol { a, s } => {
                let va = &self.nodes[*a].value;
                let vs = &self.nodes[*s].value;
                self.acc(grads, *a, |da| {
                    for i in 0..va.rows() {
                        let f = F::one() / vs.get(i, 0);
                        for (d, &gv) in da.row_mut(i).iter_mut().zip(g.row(i)) {
                            *d += gv * f;
                        }
                    }
                });
                self.acc(grads, *s, |ds| {
                    for i in 0..va.rows() {
                        let sv = vs.get(i, 0);
                        let dot = g
                            .row(i)
                            .iter()
                            .zip(va.row(i))
                            .map(|(&gv, &av)| gv * av)
                            .sum::<F>();
                        let cur = ds.get(i, 0);
                        ds.set(i, 0, cur - dot / (sv * sv));
                    }
                });
            }
            Op::MulBcastRow { a, r } => {
                let va = &self.nodes[*a].value;
                let vr = &self.nodes[*r].value;
                self.acc(grads, *a, |da| {
                    for i in 0..va.rows() {
                        for (j, (d, &gv)) in da.row_mut(i).iter_mut().zip(g.row(i)).enumerate() {
                            *d += gv * vr.get(0, j);
                        }
                    }
                });
                self.acc(grads, *r, |dr| {
                    for i in 0..va.rows() {
                        for (j, (&gv, &av)) in g.row(i).iter().zip(va.row(i)).enumerate() {
                            let cur = dr.get(0, j);
                            dr.set(0, j, cur + gv * av);
                        }
                    }
                });
            }
            Op::AddBcastRow { a, r } => {
                self.acc(grads, *a, |da| add_into(da, g, F::one()));
                self.acc(grads, *r, |dr| {
                    for i in 0..g.rows() {
                        for (j, &gv) in g.row(i).iter().enumerate() {
                            let cur = dr.get(0, j);
                            dr.set(0, j, cur + gv);
                        }
                    }
                });
            }
            Op::HeadSum { x, heads } => {
                let d = self.nodes[*x].value.cols();
                let dh = d / heads;
                self.acc(grads, *x, |dx| {
                    for i in 0..dx.rows() {
                        let row = dx.row_mut(i);
                        for h in 0..*heads {
                            let gv = g.get(i, h);
                            for c in 0..dh {
                                row[h * dh + c] += gv;
                            }
                        }
                    }
                });
            }
            Op::HeadScale { x, w, heads } => {
                let vx = &self.nodes[*x].value;
                let vw = &self.nodes[*w].value;
                let d = vx.cols();
                let dh = d / heads;
                self.acc(grads, *x, |dx| {
                    for i in 0..vx.rows() {
                        let row = dx.row_mut(i);
                        let gr = g.row(i);
                        for h in 0..*heads {
                            let f = vw.get(i, h);
                            for c in 0..dh {
                                row[h * dh + c] += gr[h * dh + c] * f;
                            }
                        }
                    }
                });
                self.acc(grads, *w, |dw| {
                    for i in 0..vx.rows() {
                        let xr = vx.row(i);
                        let gr = g.row(i);
                        for h in 0..*heads {
                            let mut dot = F::zero();
                            for c in 0..dh {
                                dot += gr[h * dh + c] * xr[h * dh + c];
                            }
                            let cur = dw.get(i, h);
                            dw.set(i, h, cur + dot);
                        }
                    }
                });
            }
            Op::HeadInterleave2 { a, b, heads } => {
                let d = self.nodes[*a].value.cols();
                let dh = d / heads;
                self.acc(grads, *a, |da| {
                    for i in 0..da.rows() {
                        let gr = g.row(i);
                        let row = da.row_mut(i);
                        for h in 0..*heads {
                            for c in 0..dh {
                                row[h * dh + c] += gr[h * 2 * dh + c];
                            }
                        }
                    }
                });
                self.acc(grads, *b, |db| {
                    for i in 0..db.rows() {
                        let gr = g.row(i);
                        let row = db.row_mut(i);
                        for h in 0..*heads {
                            for c in 0..dh {
                                row[h * dh + c] += gr[h * 2 * dh + dh + c];
                            }
                        }
                    }
                });
            }
            Op::GatherRows { x, rows } => {
                self.acc(grads, *x, |dx| {
                    for (k, &r) in rows.iter().enumerate() {
                        for (d, &s) in dx.row_mut(r).iter_mut().zip(g.row(k)) {
                            *d += s;
                        }
                    }
                });
            }
            Op::ScatterRows {
                base,
                rows_data,
                rows,
            } => {
                self.acc(grads, *base, |db| {
                    let replaced: std::collections::HashSet<usize> = rows.iter().copied().collect();
                    for i in 0..db.rows() {
                        if replaced.contains(&i) {
                            continue;
                        }
                        for (d, &s) in db.row_mut(i).iter_mut().zip(g.row(i)) {
                            *d += s;
                        }
                    }
                });
                self.acc(grads, *rows_data, |dd| {
                    for (k, &r) in rows.iter().enumerate() {
                        for (d, &s) in dd.row_mut(k).iter_mut().zip(g.row(r)) {
                            *d += s;
                        }
                    }
                });
            }
            Op::PickClass { x, classes } => {
                self.acc(grads, *x, |dx| {
                    for (i, &t) in classes.iter().enumerate() {
                        let cur = dx.get(i, t);
                        dx.set(i, t, cur + g.get(i, 0));
                    }
                });
            }
        }
    }
}

fn add_into<F: Real>(dst: &mut Mat<F>, src: &Mat<F>, scale: F) {
    for (d, &s) in dst.as_mut_slice().iter_mut().zip(src.as_slice()) {
        *d += s * scale;
    }
}

fn softmax_slice<F: Real>(input: &[F], out: &mut [F]) {
    let max = input
        .iter()
        .copied()
        .fold(F::neg_infinity(), |a, b| a.max(b));
    let mut sum = F::zero();
    for (o, &v) in out.iter_mut().zip(input) {
        let e = (v - max).exp();
        *o = e;
        sum += e;
    }
    for o in out.iter_mut() {
        *o = *o / sum;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type T = Tape<f64>;

    #[test]
    fn matmul_forward_and_backward() {
        let mut t = T::new();
        let a = t.param(Mat::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]));
        let b = t.param(Mat::from_vec(2, 2, vec![5.0, 6.0, 7.0, 8.0]));
        let c = t.matmul(a, b).unwrap();
        assert_eq!(t.value(c).as_slice(), &[19.0, 22.0, 43.0, 50.0]);
        let s = t.sum_all(c);
        let g = t.backward(s).unwrap();
        // d(sum)/dA = 1 . B^T
        assert_eq!(g.get(a).unwrap().as_slice(), &[11.0, 15.0, 11.0, 15.0]);
        assert_eq!(g.get(b).unwrap().as_slice(), &[4.0, 4.0, 6.0, 6.0]);
    }

    #[test]
    fn softmax_of_equal_logits_is_uniform() {
        let mut t = T::new();
        let x = t.param(Mat::from_vec(1, 2, vec![0.0, 0.0]));
        let y = t.softmax_rows(x).unwrap();
        assert_eq!(t.value(y).as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn leaky_relu_values() {
        let mut t = T::new();
        let x = t.param(Mat::from_vec(1, 2, vec![-2.0, 3.0]));
        let y = t.leaky_relu(x, 0.01);
        assert!((t.value(y).get(0, 0) - (-0.02)).abs() < 1e-15);
        assert_eq!(t.value(y).get(0, 1), 3.0);
        let s = t.sum_all(y);
        let g = t.backward(s).unwrap();
        assert_eq!(g.get(x).unwrap().as_slice(), &[0.01, 1.0]);
    }

    #[test]
    fn layer_norm_is_standardized() {
        let mut t = T::new();
        let x = t.param(Mat::from_vec(1, 4, vec![1.0, 2.0, 3.0, 10.0]));
        let y = t.layer_norm_rows(x).unwrap();
        let row = t.value(y).row(0).to_vec();
        let mean: f64 = row.iter().sum::<f64>() / 4.0;
        let var: f64 = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-12);
        assert!((var - 1.0).abs() < 1e-4);
    }

    #[test]
    fn no_grad_inputs_do_not_need_grad() {
        let mut t = T::new();
        let a = t.constant(Mat::from_vec(1, 2, vec![1.0, 2.0]));
        let b = t.constant(Mat::from_vec(1, 2, vec![3.0, 4.0]));
        let c = t.mul(a, b).unwrap();
        let s = t.sum_all(c);
        let g = t.backward(s).unwrap();
        assert!(g.get(a).is_none());
        assert!(g.get(b).is_none());
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut t = T::new();
        let a = t.param(Mat::zeros(2, 3));
        let b = t.param(Mat::zeros(2, 3));
        assert!(t.matmul(a, b).is_err());
        assert!(t.add(a, b).is_ok());
    }

    #[test]
    fn gather_scatter_roundtrip() {
        let mut t = T::new();
        let x = t.param(Mat::from_vec(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
        let rows = Rc::new(vec![2usize, 0]);
        let gth = t.gather_rows(x, rows.clone()).unwrap();
        assert_eq!(t.value(gth).as_slice(), &[5.0, 6.0, 1.0, 2.0]);
        let back = t.scatter_rows_replace(x, gth, rows).unwrap();
        assert_eq!(t.value(back).as_slice(), t.value(x).as_slice());
    }
}
