use std::fmt;
use std::sync::Arc;

use super::kernels::{matmul_nn, matmul_nt, matmul_tn};
use super::unary::UnaryFn;
use crate::error::AutodiffError;
use crate::tensor::Tensor;

type Result<T> = std::result::Result<T, AutodiffError>;

/// Handle to a node on a [`Tape`]. Ids are tape indices and are only
/// meaningful for the tape that issued them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

/// A user-defined primitive with its own adjoint rule.
pub trait CustomOp: Send + Sync {
    fn name(&self) -> &'static str;
    fn forward(&self, inputs: &[&Tensor]) -> Result<Tensor>;
    /// Returns one gradient per input, each shaped like that input.
    fn backward(&self, inputs: &[&Tensor], output: &Tensor, grad: &Tensor) -> Vec<Tensor>;
}

#[derive(Clone)]
pub enum Op {
    Leaf,
    /// `[m,k] x [k,n] -> [m,n]` or `[m,k] x [k] -> [m]`
    MatMul,
    /// `[m,k] x [n,k]^T -> [m,n]`
    MatMulT,
    Add,
    Sub,
    Mul,
    Div,
    /// `[m,n] + [n]`, the vector added to every row
    AddRow,
    Unary(UnaryFn),
    /// Leaky rectifier with a learnable single-element slope operand.
    Prelu,
    Scale(f64),
    AddScalar(f64),
    Sum,
    Mean,
    /// Concatenation along the last axis.
    Concat,
    Custom(Arc<dyn CustomOp>),
}

impl Op {
    pub fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::MatMul => "matmul",
            Op::MatMulT => "matmul_t",
            Op::Add => "add",
            Op::Sub => "sub",
            Op::Mul => "mul",
            Op::Div => "div",
            Op::AddRow => "add_row",
            Op::Unary(f) => f.name(),
            Op::Prelu => "prelu",
            Op::Scale(_) => "scale",
            Op::AddScalar(_) => "add_scalar",
            Op::Sum => "sum",
            Op::Mean => "mean",
            Op::Concat => "concat",
            Op::Custom(c) => c.name(),
        }
    }
}

impl fmt::Debug for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One recorded value with its provenance.
#[derive(Debug, Clone)]
pub struct GraphNode {
    pub value: Tensor,
    pub op: Op,
    pub operands: Vec<Var>,
    needs_grad: bool,
}

/// Define-by-run gradient tape. Nodes are appended in evaluation order, so
/// every operand id is smaller than the id of the node consuming it.
#[derive(Debug, Default, Clone)]
pub struct Tape {
    nodes: Vec<GraphNode>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[GraphNode] {
        &self.nodes
    }

    pub fn node(&self, v: Var) -> &GraphNode {
        &self.nodes[v.0]
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// A differentiable leaf (parameter).
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push_leaf(value, true)
    }

    /// A leaf that never receives a gradient (inputs, targets, masks).
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push_leaf(value, false)
    }

    fn push_leaf(&mut self, value: Tensor, needs_grad: bool) -> Var {
        self.nodes.push(GraphNode {
            value,
            op: Op::Leaf,
            operands: Vec::new(),
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn push(&mut self, value: Tensor, op: Op, operands: Vec<Var>) -> Var {
        let needs_grad = operands.iter().any(|o| self.nodes[o.0].needs_grad);
        self.nodes.push(GraphNode {
            value,
            op,
            operands,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn check(&self, v: Var) -> Result<()> {
        if v.0 < self.nodes.len() {
            Ok(())
        } else {
            Err(AutodiffError::UnknownVar {
                id: v.0,
                len: self.nodes.len(),
            })
        }
    }

    fn mismatch(&self, op: &'static str, a: Var, b: Var) -> AutodiffError {
        AutodiffError::ShapeMismatch {
            op,
            lhs: self.value(a).shape().to_vec(),
            rhs: self.value(b).shape().to_vec(),
        }
    }

    /// Records `kind` applied to `operands`. The typed helpers below are
    /// thin wrappers over this.
    pub fn graph_op(&mut self, kind: Op, operands: &[Var]) -> Result<Var> {
        for &o in operands {
            self.check(o)?;
        }
        let arity = match kind {
            Op::Leaf => {
                return Err(AutodiffError::Domain {
                    op: "leaf",
                    detail: "leaves are created with param/constant".into(),
                })
            }
            Op::Unary(_) | Op::Scale(_) | Op::AddScalar(_) | Op::Sum | Op::Mean => 1,
            Op::Custom(_) => operands.len(),
            _ => 2,
        };
        if operands.len() != arity {
            return Err(AutodiffError::Domain {
                op: kind.name(),
                detail: format!("expected {arity} operands, got {}", operands.len()),
            });
        }
        let value = self.forward(&kind, operands)?;
        Ok(self.push(value, kind, operands.to_vec()))
    }

    fn forward(&self, kind: &Op, ops: &[Var]) -> Result<Tensor> {
        let name = kind.name();
        let val = |i: usize| self.value(ops[i]);
        let out = match kind {
            Op::Leaf => unreachable!(),
            Op::MatMul => {
                let (a, b) = (val(0), val(1));
                match (a.shape(), b.shape()) {
                    (&[m, k], &[k2]) if k == k2 => {
                        Tensor::new(vec![m], matmul_nn(a.data(), b.data(), m, k, 1))?
                    }
                    (&[m, k], &[k2, n]) if k == k2 => {
                        Tensor::new(vec![m, n], matmul_nn(a.data(), b.data(), m, k, n))?
                    }
                    _ => return Err(self.mismatch(name, ops[0], ops[1])),
                }
            }
            Op::MatMulT => {
                let (a, b) = (val(0), val(1));
                match (a.shape(), b.shape()) {
                    (&[m, k], &[n, k2]) if k == k2 => {
                        Tensor::new(vec![m, n], matmul_nt(a.data(), b.data(), m, k, n))?
                    }
                    _ => return Err(self.mismatch(name, ops[0], ops[1])),
                }
            }
            Op::Add | Op::Sub | Op::Mul | Op::Div => {
                let (a, b) = (val(0), val(1));
                if a.shape() != b.shape() {
                    return Err(self.mismatch(name, ops[0], ops[1]));
                }
                match kind {
                    Op::Add => a.zip_map(b, |x, y| x + y),
                    Op::Sub => a.zip_map(b, |x, y| x - y),
                    Op::Mul => a.zip_map(b, |x, y| x * y),
                    _ => {
                        if let Some(z) = b.data().iter().find(|v| **v == 0.0) {
                            return Err(AutodiffError::Domain {
                                op: name,
                                detail: format!("division by {z}"),
                            });
                        }
                        a.zip_map(b, |x, y| x / y)
                    }
                }
            }
            Op::AddRow => {
                let (a, b) = (val(0), val(1));
                match (a.shape(), b.shape()) {
                    (&[_, n], &[n2]) if n == n2 => {
                        let mut out = a.clone();
                        for row in out.data_mut().chunks_mut(n) {
                            for (o, bv) in row.iter_mut().zip(b.data()) {
                                *o += bv;
                            }
                        }
                        out
                    }
                    _ => return Err(self.mismatch(name, ops[0], ops[1])),
                }
            }
            Op::Unary(f) => {
                let a = val(0);
                for &x in a.data() {
                    f.check_domain(x)
                        .map_err(|detail| AutodiffError::Domain { op: name, detail })?;
                }
                a.map(|x| f.eval(x))
            }
            Op::Prelu => {
                let (a, s) = (val(0), val(1));
                if s.len() != 1 {
                    return Err(self.mismatch(name, ops[0], ops[1]));
                }
                let slope = s.item();
                a.map(|x| if x > 0.0 { x } else { slope * x })
            }
            Op::Scale(c) => val(0).map(|x| c * x),
            Op::AddScalar(c) => val(0).map(|x| x + c),
            Op::Sum => Tensor::scalar(val(0).sum()),
            Op::Mean => {
                let a = val(0);
                Tensor::scalar(a.sum() / a.len() as f64)
            }
            Op::Concat => {
                let (a, b) = (val(0), val(1));
                match (a.shape(), b.shape()) {
                    (&[n1], &[n2]) => {
                        let mut data = a.data().to_vec();
                        data.extend_from_slice(b.data());
                        Tensor::new(vec![n1 + n2], data)?
                    }
                    (&[m, n1], &[m2, n2]) if m == m2 => {
                        let mut data = Vec::with_capacity(m * (n1 + n2));
                        for r in 0..m {
                            data.extend_from_slice(a.row(r));
                            data.extend_from_slice(b.row(r));
                        }
                        Tensor::new(vec![m, n1 + n2], data)?
                    }
                    _ => return Err(self.mismatch(name, ops[0], ops[1])),
                }
            }
            Op::Custom(c) => {
                let inputs: Vec<&Tensor> = ops.iter().map(|&v| self.value(v)).collect();
                c.forward(&inputs)?
            }
        };
        Ok(out)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.graph_op(Op::MatMul, &[a, b])
    }

    pub fn matmul_t(&mut self, a: Var, b: Var) -> Result<Var> {
        self.graph_op(Op::MatMulT, &[a, b])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.graph_op(Op::Add, &[a, b])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.graph_op(Op::Sub, &[a, b])
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.graph_op(Op::Mul, &[a, b])
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.graph_op(Op::Div, &[a, b])
    }

    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        self.graph_op(Op::AddRow, &[a, row])
    }

    pub fn unary(&mut self, f: UnaryFn, a: Var) -> Result<Var> {
        self.graph_op(Op::Unary(f), &[a])
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.unary(UnaryFn::Tanh, a)
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.unary(UnaryFn::Sigmoid, a)
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        self.unary(UnaryFn::Exp, a)
    }

    pub fn log(&mut self, a: Var) -> Result<Var> {
        self.unary(UnaryFn::Log, a)
    }

    pub fn abs(&mut self, a: Var) -> Result<Var> {
        self.unary(UnaryFn::Abs, a)
    }

    pub fn sqrt(&mut self, a: Var) -> Result<Var> {
        self.unary(UnaryFn::Sqrt, a)
    }

    pub fn square(&mut self, a: Var) -> Result<Var> {
        self.unary(UnaryFn::Square, a)
    }

    pub fn prelu(&mut self, a: Var, slope: Var) -> Result<Var> {
        self.graph_op(Op::Prelu, &[a, slope])
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        self.graph_op(Op::Scale(c), &[a])
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Result<Var> {
        self.graph_op(Op::AddScalar(c), &[a])
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        self.graph_op(Op::Sum, &[a])
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        self.graph_op(Op::Mean, &[a])
    }

    pub fn concat(&mut self, a: Var, b: Var) -> Result<Var> {
        self.graph_op(Op::Concat, &[a, b])
    }

    pub fn custom(&mut self, op: Arc<dyn CustomOp>, operands: &[Var]) -> Result<Var> {
        self.graph_op(Op::Custom(op), operands)
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        self.check(loss)?;
        let shape = self.value(loss).shape();
        if self.value(loss).len() != 1 {
            return Err(AutodiffError::NonScalarLoss {
                shape: shape.to_vec(),
            });
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::filled(shape, 1.0));

        for id in (0..=loss.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            if node.needs_grad && !node.operands.is_empty() {
                let adjoints = self.adjoints(node, &g);
                for (operand, adj) in node.operands.iter().zip(adjoints) {
                    if !self.nodes[operand.0].needs_grad {
                        continue;
                    }
                    if let Some(adj) = adj {
                        match &mut grads[operand.0] {
                            Some(acc) => acc.add_scaled(&adj, 1.0),
                            slot => *slot = Some(adj),
                        }
                    }
                }
            }
            grads[id] = Some(g);
        }
        Ok(Gradients {
            grads,
            shapes: self.nodes.iter().map(|n| n.value.shape().to_vec()).collect(),
        })
    }

    /// Per-operand adjoints of `node` given the upstream gradient `g`.
    fn adjoints(&self, node: &GraphNode, g: &Tensor) -> Vec<Option<Tensor>> {
        let ops = &node.operands;
        let val = |i: usize| self.value(ops[i]);
        let want = |i: usize| self.nodes[ops[i].0].needs_grad;
        let y = &node.value;
        match &node.op {
            Op::Leaf => Vec::new(),
            Op::MatMul => {
                let (a, b) = (val(0), val(1));
                let (m, k) = (a.shape()[0], a.shape()[1]);
                let n = if b.rank() == 1 { 1 } else { b.shape()[1] };
                let da = want(0).then(|| {
                    Tensor::new(a.shape().to_vec(), matmul_nt(g.data(), b.data(), m, n, k))
                        .expect("matmul adjoint shape")
                });
                let db = want(1).then(|| {
                    Tensor::new(b.shape().to_vec(), matmul_tn(a.data(), g.data(), m, k, n))
                        .expect("matmul adjoint shape")
                });
                vec![da, db]
            }
            Op::MatMulT => {
                let (a, b) = (val(0), val(1));
                let (m, k) = (a.shape()[0], a.shape()[1]);
                let n = b.shape()[0];
                let da = want(0).then(|| {
                    Tensor::new(a.shape().to_vec(), matmul_nn(g.data(), b.data(), m, n, k))
                        .expect("matmul_t adjoint shape")
                });
                let db = want(1).then(|| {
                    Tensor::new(b.shape().to_vec(), matmul_tn(g.data(), a.data(), m, n, k))
                        .expect("matmul_t adjoint shape")
                });
                vec![da, db]
            }
            Op::Add => vec![want(0).then(|| g.clone()), want(1).then(|| g.clone())],
            Op::Sub => vec![want(0).then(|| g.clone()), want(1).then(|| g.map(|v| -v))],
            Op::Mul => {
                let (a, b) = (val(0), val(1));
                vec![
                    want(0).then(|| g.zip_map(b, |gv, bv| gv * bv)),
                    want(1).then(|| g.zip_map(a, |gv, av| gv * av)),
                ]
            }
            Op::Div => {
                let b = val(1);
                let da = want(0).then(|| g.zip_map(b, |gv, bv| gv / bv));
                let db = want(1).then(|| {
                    // d(a/b)/db = -y/b
                    let t = g.zip_map(y, |gv, yv| -gv * yv);
                    t.zip_map(b, |tv, bv| tv / bv)
                });
                vec![da, db]
            }
            Op::AddRow => {
                let n = val(1).len();
                let db = want(1).then(|| {
                    let mut acc = vec![0.0; n];
                    for row in g.data().chunks(n) {
                        for (a, v) in acc.iter_mut().zip(row) {
                            *a += v;
                        }
                    }
                    Tensor::vector(acc)
                });
                vec![want(0).then(|| g.clone()), db]
            }
            Op::Unary(f) => {
                let x = val(0);
                let data = g
                    .data()
                    .iter()
                    .zip(x.data())
                    .zip(y.data())
                    .map(|((&gv, &xv), &yv)| gv * f.derivative(xv, yv))
                    .collect();
                vec![Some(Tensor::new(x.shape().to_vec(), data).expect("unary adjoint"))]
            }
            Op::Prelu => {
                let (x, s) = (val(0), val(1));
                let slope = s.item();
                let dx = want(0).then(|| g.zip_map(x, |gv, xv| if xv > 0.0 { gv } else { gv * slope }));
                let ds = want(1).then(|| {
                    let total: f64 = g
                        .data()
                        .iter()
                        .zip(x.data())
                        .filter(|(_, &xv)| xv <= 0.0)
                        .map(|(gv, xv)| gv * xv)
                        .sum();
                    Tensor::filled(s.shape(), total)
                });
                vec![dx, ds]
            }
            Op::Scale(c) => vec![Some(g.map(|v| c * v))],
            Op::AddScalar(_) => vec![Some(g.clone())],
            Op::Sum => vec![Some(Tensor::filled(val(0).shape(), g.item()))],
            Op::Mean => {
                let a = val(0);
                vec![Some(Tensor::filled(a.shape(), g.item() / a.len() as f64))]
            }
            Op::Concat => {
                let (a, b) = (val(0), val(1));
                let (rows, n1) = a.dims2();
                let n2 = b.dims2().1;
                let mut da = Vec::with_capacity(a.len());
                let mut db = Vec::with_capacity(b.len());
                for row in g.data().chunks(n1 + n2).take(rows) {
                    da.extend_from_slice(&row[..n1]);
                    db.extend_from_slice(&row[n1..]);
                }
                vec![
                    want(0).then(|| Tensor::new(a.shape().to_vec(), da).expect("concat adjoint")),
                    want(1).then(|| Tensor::new(b.shape().to_vec(), db).expect("concat adjoint")),
                ]
            }
            Op::Custom(c) => {
                let inputs: Vec<&Tensor> = ops.iter().map(|&v| self.value(v)).collect();
                c.backward(&inputs, y, g).into_iter().map(Some).collect()
            }
        }
    }
}

/// Result of a reverse sweep. Nodes the loss does not depend on report a
/// zero gradient.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Tensor {
        match self.grads.get(v.0) {
            Some(Some(g)) => g.clone(),
            _ => Tensor::zeros(&self.shapes[v.0]),
        }
    }

    pub fn is_reached(&self, v: Var) -> bool {
        matches!(self.grads.get(v.0), Some(Some(_)))
    }
}
