use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;
use core::cell::RefCell;

use crate::error::{Error, Result};
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum UnaryKind {
    Neg,
    Exp,
    Ln,
    Ln1p,
    ExpM1,
    Sqrt,
    Softplus,
    Sigmoid,
    LnGamma,
    LogNormCdfNeg,
}

impl UnaryKind {
    fn name(self) -> &'static str {
        match self {
            UnaryKind::Neg => "neg",
            UnaryKind::Exp => "exp",
            UnaryKind::Ln => "ln",
            UnaryKind::Ln1p => "ln_1p",
            UnaryKind::ExpM1 => "exp_m1",
            UnaryKind::Sqrt => "sqrt",
            UnaryKind::Softplus => "softplus",
            UnaryKind::Sigmoid => "sigmoid",
            UnaryKind::LnGamma => "ln_gamma",
            UnaryKind::LogNormCdfNeg => "log_norm_cdf_neg",
        }
    }

    fn eval(self, x: f64) -> f64 {
        match self {
            UnaryKind::Neg => -x,
            UnaryKind::Exp => math::exp(x),
            UnaryKind::Ln => math::ln(x),
            UnaryKind::Ln1p => math::ln_1p(x),
            UnaryKind::ExpM1 => math::exp_m1(x),
            UnaryKind::Sqrt => math::sqrt(x),
            UnaryKind::Softplus => math::softplus(x),
            UnaryKind::Sigmoid => math::sigmoid(x),
            UnaryKind::LnGamma => math::ln_gamma(x),
            UnaryKind::LogNormCdfNeg => math::log_norm_cdf_neg(x),
        }
    }

    /// d out / d x given the input and output primal values.
    fn derivative(self, x: f64, out: f64) -> f64 {
        match self {
            UnaryKind::Neg => -1.0,
            UnaryKind::Exp => out,
            UnaryKind::Ln => 1.0 / x,
            UnaryKind::Ln1p => 1.0 / (1.0 + x),
            UnaryKind::ExpM1 => out + 1.0,
            UnaryKind::Sqrt => 0.5 / out,
            UnaryKind::Softplus => math::sigmoid(x),
            UnaryKind::Sigmoid => out * (1.0 - out),
            UnaryKind::LnGamma => math::digamma(x),
            UnaryKind::LogNormCdfNeg => math::log_norm_cdf_neg_derivative(x),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum BinKind {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinKind {
    fn name(self) -> &'static str {
        match self {
            BinKind::Add => "add",
            BinKind::Sub => "sub",
            BinKind::Mul => "mul",
            BinKind::Div => "div",
        }
    }
}

#[derive(Debug)]
struct SumOp {
    args: Box<[u32]>,
    out: u32,
}

#[derive(Debug)]
struct DotOp {
    a: Box<[u32]>,
    b: Box<[u32]>,
    out: u32,
}

#[derive(Debug)]
struct CholOp {
    /// packed lower input, length n(n+1)/2
    a: Box<[u32]>,
    out0: u32,
    n: u32,
}

#[derive(Debug)]
struct TriSolveOp {
    /// packed lower factor
    l: Box<[u32]>,
    /// right-hand sides, column-major, length n * n_cols
    b: Box<[u32]>,
    out0: u32,
    n: u32,
    n_cols: u32,
    transpose: bool,
}

#[derive(Debug)]
struct AffineOp {
    /// packed lower factor
    l: Box<[u32]>,
    mu: Box<[u32]>,
    /// constant noise vector
    eps: Box<[f64]>,
    out0: u32,
    n: u32,
}

#[derive(Debug)]
enum OpRec {
    Param,
    Const,
    Unary(UnaryKind, u32, u32),
    Binary(BinKind, u32, u32, u32),
    AddConst(u32, u32),
    MulConst(u32, f64, u32),
    Sum(Box<SumOp>),
    Dot(Box<DotOp>),
    Chol(Box<CholOp>),
    TriSolve(Box<TriSolveOp>),
    Affine(Box<AffineOp>),
}

impl OpRec {
    fn name(&self) -> &'static str {
        match self {
            OpRec::Param => "param",
            OpRec::Const => "const",
            OpRec::Unary(k, ..) => k.name(),
            OpRec::Binary(k, ..) => k.name(),
            OpRec::AddConst(..) => "add_const",
            OpRec::MulConst(..) => "mul_const",
            OpRec::Sum(_) => "sum",
            OpRec::Dot(_) => "dot",
            OpRec::Chol(_) => "cholesky",
            OpRec::TriSolve(_) => "tri_solve",
            OpRec::Affine(_) => "affine_tri_mul",
        }
    }
}

#[derive(Debug, Default)]
struct TapeInner {
    vals: Vec<f64>,
    ops: Vec<OpRec>,
    n_params: usize,
    zero_const: Option<u32>,
    jitter_events: usize,
}

/// Append-only record of a differentiable computation.
#[derive(Debug, Default)]
pub struct Tape {
    inner: RefCell<TapeInner>,
}

/// Handle to a tape node. Cheap to copy; all arithmetic on it records
/// further nodes on the owning tape.
#[derive(Debug, Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: u32,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Drops all recorded state but keeps allocations for reuse.
    pub fn reset(&mut self) {
        let inner = self.inner.get_mut();
        inner.vals.clear();
        inner.ops.clear();
        inner.n_params = 0;
        inner.zero_const = None;
        inner.jitter_events = 0;
    }

    pub fn n_nodes(&self) -> usize {
        self.inner.borrow().vals.len()
    }

    /// Count of factorizations that needed a nonzero jitter this tape.
    pub fn jitter_events(&self) -> usize {
        self.inner.borrow().jitter_events
    }

    fn push(&self, val: f64, make: impl FnOnce(u32) -> OpRec) -> Var<'_> {
        let mut inner = self.inner.borrow_mut();
        let id = inner.vals.len() as u32;
        inner.vals.push(val);
        let op = make(id);
        inner.ops.push(op);
        Var { tape: self, id }
    }

    /// Declares a trainable parameter. All parameters must be declared
    /// before any other node so gradients align with declaration order.
    pub fn param(&self, value: f64) -> Var<'_> {
        {
            let mut inner = self.inner.borrow_mut();
            assert_eq!(
                inner.vals.len(),
                inner.n_params,
                "parameters must be declared before other nodes"
            );
            inner.n_params += 1;
        }
        self.push(value, |_| OpRec::Param)
    }

    pub fn params(&self, values: &[f64]) -> Vec<Var<'_>> {
        values.iter().map(|&v| self.param(v)).collect()
    }

    pub fn constant(&self, value: f64) -> Var<'_> {
        self.push(value, |_| OpRec::Const)
    }

    /// Shared all-zero constant, used as structural zero in dense layouts.
    pub fn zero(&self) -> Var<'_> {
        if let Some(id) = self.inner.borrow().zero_const {
            return Var { tape: self, id };
        }
        let v = self.constant(0.0);
        self.inner.borrow_mut().zero_const = Some(v.id);
        v
    }

    fn val_of(&self, id: u32) -> f64 {
        self.inner.borrow().vals[id as usize]
    }

    pub(crate) fn unary(&self, kind: UnaryKind, a: Var<'_>) -> Var<'_> {
        debug_assert!(core::ptr::eq(self, a.tape));
        let v = kind.eval(self.val_of(a.id));
        self.push(v, |out| OpRec::Unary(kind, a.id, out))
    }

    pub(crate) fn binary(&self, kind: BinKind, a: Var<'_>, b: Var<'_>) -> Var<'_> {
        debug_assert!(core::ptr::eq(self, a.tape) && core::ptr::eq(self, b.tape));
        let (va, vb) = (self.val_of(a.id), self.val_of(b.id));
        let v = match kind {
            BinKind::Add => va + vb,
            BinKind::Sub => va - vb,
            BinKind::Mul => va * vb,
            BinKind::Div => va / vb,
        };
        self.push(v, |out| OpRec::Binary(kind, a.id, b.id, out))
    }

    pub(crate) fn add_const(&self, a: Var<'_>, c: f64) -> Var<'_> {
        let v = self.val_of(a.id) + c;
        self.push(v, |out| OpRec::AddConst(a.id, out))
    }

    pub(crate) fn mul_const(&self, a: Var<'_>, c: f64) -> Var<'_> {
        let v = self.val_of(a.id) * c;
        self.push(v, |out| OpRec::MulConst(a.id, c, out))
    }

    /// Σ xs.
    pub fn sum<'t>(&'t self, xs: &[Var<'t>]) -> Var<'t> {
        let total: f64 = {
            let inner = self.inner.borrow();
            xs.iter().map(|v| inner.vals[v.id as usize]).sum()
        };
        let args: Box<[u32]> = xs.iter().map(|v| v.id).collect();
        self.push(total, |out| OpRec::Sum(Box::new(SumOp { args, out })))
    }

    /// aᵀ b.
    pub fn dot<'t>(&'t self, a: &[Var<'t>], b: &[Var<'t>]) -> Var<'t> {
        assert_eq!(a.len(), b.len());
        let total: f64 = {
            let inner = self.inner.borrow();
            a.iter()
                .zip(b)
                .map(|(x, y)| inner.vals[x.id as usize] * inner.vals[y.id as usize])
                .sum()
        };
        let a_ids: Box<[u32]> = a.iter().map(|v| v.id).collect();
        let b_ids: Box<[u32]> = b.iter().map(|v| v.id).collect();
        self.push(total, |out| OpRec::Dot(Box::new(DotOp { a: a_ids, b: b_ids, out })))
    }

    /// Packed-lower Cholesky of a symmetric matrix given by its lower
    /// triangle (row-major packed, length n(n+1)/2). Retries with diagonal
    /// jitter escalating from `base_jitter` by factors of 10 (six
    /// escalations) before reporting degeneracy.
    pub fn chol_packed<'t>(
        &'t self,
        a: &[Var<'t>],
        n: usize,
        base_jitter: f64,
        name: &'static str,
    ) -> Result<Vec<Var<'t>>> {
        let len = n * (n + 1) / 2;
        assert_eq!(a.len(), len);
        let avals: Vec<f64> = {
            let inner = self.inner.borrow();
            a.iter().map(|v| inner.vals[v.id as usize]).collect()
        };
        let base = if base_jitter > 0.0 { base_jitter } else { 1e-12 };
        let mut jitter = 0.0;
        let mut factor: Option<Vec<f64>> = None;
        for attempt in 0..=crate::linalg::MAX_JITTER_ESCALATIONS {
            if let Some(l) = packed_cholesky(&avals, n, jitter) {
                factor = Some(l);
                break;
            }
            jitter = base * libm::pow(10.0, attempt as f64);
        }
        let Some(lvals) = factor else {
            return Err(Error::NumericalDegeneracy { matrix: name, max_jitter: jitter / 10.0 });
        };
        if jitter > 0.0 {
            self.inner.borrow_mut().jitter_events += 1;
        }
        let out0 = self.n_nodes() as u32;
        let op = CholOp { a: a.iter().map(|v| v.id).collect(), out0, n: n as u32 };
        let mut inner = self.inner.borrow_mut();
        inner.vals.extend_from_slice(&lvals);
        inner.ops.push(OpRec::Chol(Box::new(op)));
        drop(inner);
        Ok((0..len).map(|k| Var { tape: self, id: out0 + k as u32 }).collect())
    }

    /// Solves L x = b (or Lᵀ x = b) for a packed lower factor and
    /// column-major right-hand sides.
    pub fn tri_solve<'t>(
        &'t self,
        l: &[Var<'t>],
        b: &[Var<'t>],
        n: usize,
        transpose: bool,
    ) -> Vec<Var<'t>> {
        assert_eq!(l.len(), n * (n + 1) / 2);
        assert_eq!(b.len() % n.max(1), 0);
        let n_cols = if n == 0 { 0 } else { b.len() / n };
        let (lvals, bvals): (Vec<f64>, Vec<f64>) = {
            let inner = self.inner.borrow();
            (
                l.iter().map(|v| inner.vals[v.id as usize]).collect(),
                b.iter().map(|v| inner.vals[v.id as usize]).collect(),
            )
        };
        let mut xvals = vec![0.0; bvals.len()];
        for col in 0..n_cols {
            let rhs = &bvals[col * n..(col + 1) * n];
            let dst = &mut xvals[col * n..(col + 1) * n];
            if transpose {
                solve_packed_transpose(&lvals, rhs, dst, n);
            } else {
                solve_packed(&lvals, rhs, dst, n);
            }
        }
        let out0 = self.n_nodes() as u32;
        let op = TriSolveOp {
            l: l.iter().map(|v| v.id).collect(),
            b: b.iter().map(|v| v.id).collect(),
            out0,
            n: n as u32,
            n_cols: n_cols as u32,
            transpose,
        };
        let mut inner = self.inner.borrow_mut();
        inner.vals.extend_from_slice(&xvals);
        inner.ops.push(OpRec::TriSolve(Box::new(op)));
        drop(inner);
        (0..xvals.len()).map(|k| Var { tape: self, id: out0 + k as u32 }).collect()
    }

    /// Reparameterization transform: out = μ + L ε with constant noise ε.
    pub fn affine_tri_mul<'t>(
        &'t self,
        l: &[Var<'t>],
        mu: &[Var<'t>],
        eps: &[f64],
    ) -> Vec<Var<'t>> {
        let n = mu.len();
        assert_eq!(l.len(), n * (n + 1) / 2);
        assert_eq!(eps.len(), n);
        let mut out = vec![0.0; n];
        {
            let inner = self.inner.borrow();
            for i in 0..n {
                let mut acc = inner.vals[mu[i].id as usize];
                let row0 = i * (i + 1) / 2;
                for k in 0..=i {
                    acc += inner.vals[l[row0 + k].id as usize] * eps[k];
                }
                out[i] = acc;
            }
        }
        let out0 = self.n_nodes() as u32;
        let op = AffineOp {
            l: l.iter().map(|v| v.id).collect(),
            mu: mu.iter().map(|v| v.id).collect(),
            eps: eps.to_vec().into_boxed_slice(),
            out0,
            n: n as u32,
        };
        let mut inner = self.inner.borrow_mut();
        inner.vals.extend_from_slice(&out);
        inner.ops.push(OpRec::Affine(Box::new(op)));
        drop(inner);
        (0..n).map(|k| Var { tape: self, id: out0 + k as u32 }).collect()
    }

    /// Runs the backward pass from `output` and returns adjoints for the
    /// declared parameters, in declaration order.
    pub fn gradients(&self, output: Var<'_>) -> Result<Vec<f64>> {
        debug_assert!(core::ptr::eq(self, output.tape));
        let inner = self.inner.borrow();
        let mut adj = vec![0.0; inner.vals.len()];
        adj[output.id as usize] = 1.0;
        for op in inner.ops.iter().rev() {
            backward_op(op, &inner.vals, &mut adj);
        }
        // a poisoned adjoint anywhere means the gradient cannot be trusted
        if let Some(bad) = adj.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient {
                node: bad,
                op: find_op_name(&inner.ops, bad as u32),
            });
        }
        Ok(adj[..inner.n_params].to_vec())
    }
}

impl<'t> Var<'t> {
    pub fn id(&self) -> usize {
        self.id as usize
    }

    pub fn value(&self) -> f64 {
        self.tape.val_of(self.id)
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }
}

/// Names the operation that produced node `target` by replaying the output
/// layout; only used to label error reports.
fn find_op_name(ops: &[OpRec], target: u32) -> &'static str {
    let mut next = 0u32;
    for op in ops {
        let produced = match op {
            OpRec::Param
            | OpRec::Const
            | OpRec::Unary(..)
            | OpRec::Binary(..)
            | OpRec::AddConst(..)
            | OpRec::MulConst(..)
            | OpRec::Sum(_)
            | OpRec::Dot(_) => 1,
            OpRec::Chol(op) => op.n * (op.n + 1) / 2,
            OpRec::TriSolve(op) => op.n * op.n_cols,
            OpRec::Affine(op) => op.n,
        };
        if target < next + produced {
            return op.name();
        }
        next += produced;
    }
    "unknown"
}

#[inline]
fn packed_idx(i: usize, j: usize) -> usize {
    debug_assert!(i >= j);
    i * (i + 1) / 2 + j
}

/// Four-accumulator dot product; the explicit unroll lets the compiler
/// vectorize what strict float semantics would otherwise serialize.
#[inline]
fn dot4(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let chunks = a.len() / 4;
    let (mut s0, mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0, 0.0);
    for c in 0..chunks {
        let i = c * 4;
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    let mut rest = 0.0;
    for i in chunks * 4..a.len() {
        rest += a[i] * b[i];
    }
    (s0 + s1) + (s2 + s3) + rest
}

/// Packed-lower Cholesky with additive diagonal jitter; `None` when a pivot
/// is not strictly positive or has lost essentially all of its relative
/// magnitude (catastrophic pivots make the factor numerically useless and
/// must trigger jitter escalation instead).
fn packed_cholesky(a: &[f64], n: usize, jitter: f64) -> Option<Vec<f64>> {
    let mut l = vec![0.0; a.len()];
    for i in 0..n {
        let row_i = i * (i + 1) / 2;
        for j in 0..=i {
            let row_j = j * (j + 1) / 2;
            let mut sum = a[row_i + j];
            if i == j {
                sum += jitter;
            }
            sum -= dot4(&l[row_i..row_i + j], &l[row_j..row_j + j]);
            if i == j {
                let floor = 1e-10 * (a[row_i + i].abs() + jitter);
                if !(sum > floor) || !sum.is_finite() {
                    return None;
                }
                l[row_i + i] = math::sqrt(sum);
            } else {
                l[row_i + j] = sum / l[row_j + j];
            }
        }
    }
    Some(l)
}

/// Forward substitution L x = b on a packed factor, skipping leading zeros
/// of the right-hand side.
fn solve_packed(l: &[f64], b: &[f64], x: &mut [f64], n: usize) {
    let mut first = 0;
    while first < n && b[first] == 0.0 {
        x[first] = 0.0;
        first += 1;
    }
    for i in first..n {
        let row0 = i * (i + 1) / 2;
        let acc = b[i] - dot4(&l[row0 + first..row0 + i], &x[first..i]);
        x[i] = acc / l[row0 + i];
    }
}

/// Back substitution Lᵀ x = b on a packed factor.
fn solve_packed_transpose(l: &[f64], b: &[f64], x: &mut [f64], n: usize) {
    for i in (0..n).rev() {
        let mut acc = b[i];
        for k in (i + 1)..n {
            acc -= l[packed_idx(k, i)] * x[k];
        }
        x[i] = acc / l[packed_idx(i, i)];
    }
}

fn backward_op(op: &OpRec, vals: &[f64], adj: &mut [f64]) {
    match op {
        OpRec::Param | OpRec::Const => {}
        OpRec::Unary(kind, a, out) => {
            let w = adj[*out as usize];
            if w != 0.0 {
                adj[*a as usize] += w * kind.derivative(vals[*a as usize], vals[*out as usize]);
            }
        }
        OpRec::Binary(kind, a, b, out) => {
            let w = adj[*out as usize];
            if w == 0.0 {
                return;
            }
            let (ia, ib) = (*a as usize, *b as usize);
            match kind {
                BinKind::Add => {
                    adj[ia] += w;
                    adj[ib] += w;
                }
                BinKind::Sub => {
                    adj[ia] += w;
                    adj[ib] -= w;
                }
                BinKind::Mul => {
                    adj[ia] += w * vals[ib];
                    adj[ib] += w * vals[ia];
                }
                BinKind::Div => {
                    adj[ia] += w / vals[ib];
                    adj[ib] -= w * vals[*out as usize] / vals[ib];
                }
            }
        }
        OpRec::AddConst(a, out) => {
            adj[*a as usize] += adj[*out as usize];
        }
        OpRec::MulConst(a, c, out) => {
            adj[*a as usize] += adj[*out as usize] * c;
        }
        OpRec::Sum(op) => {
            let w = adj[op.out as usize];
            if w != 0.0 {
                for &arg in op.args.iter() {
                    adj[arg as usize] += w;
                }
            }
        }
        OpRec::Dot(op) => {
            let w = adj[op.out as usize];
            if w != 0.0 {
                for (&x, &y) in op.a.iter().zip(op.b.iter()) {
                    adj[x as usize] += w * vals[y as usize];
                    adj[y as usize] += w * vals[x as usize];
                }
            }
        }
        OpRec::Chol(op) => backward_chol(op, vals, adj),
        OpRec::TriSolve(op) => backward_tri_solve(op, vals, adj),
        OpRec::Affine(op) => {
            let n = op.n as usize;
            for i in 0..n {
                let w = adj[(op.out0 + i as u32) as usize];
                if w == 0.0 {
                    continue;
                }
                adj[op.mu[i] as usize] += w;
                let row0 = i * (i + 1) / 2;
                for k in 0..=i {
                    adj[op.l[row0 + k] as usize] += w * op.eps[k];
                }
            }
        }
    }
}

/// Dense row-major copy of Lᵀ from a packed lower factor, so transpose
/// solves walk contiguous memory.
fn transpose_dense(l: &[f64], n: usize) -> Vec<f64> {
    let mut lt = vec![0.0; n * n];
    for k in 0..n {
        let row0 = k * (k + 1) / 2;
        for i in 0..=k {
            lt[i * n + k] = l[row0 + i];
        }
    }
    lt
}

/// Back substitution Lᵀ x = b against the dense transposed factor.
fn solve_transpose_dense(lt: &[f64], b: &[f64], x: &mut [f64], n: usize) {
    for i in (0..n).rev() {
        let row = &lt[i * n..(i + 1) * n];
        let acc = b[i] - dot4(&row[i + 1..], &x[i + 1..]);
        x[i] = acc / row[i];
    }
}

/// Cholesky pullback: with P = Φ(Lᵀ L̄) (lower triangle, halved diagonal),
/// the input adjoint is S = L⁻ᵀ P L⁻¹ scattered symmetrically onto the
/// packed lower input.
fn backward_chol(op: &CholOp, vals: &[f64], adj: &mut [f64]) {
    let n = op.n as usize;
    let len = n * (n + 1) / 2;
    let out0 = op.out0 as usize;
    let lvals = &vals[out0..out0 + len];
    let lbar = &adj[out0..out0 + len];
    if lbar.iter().all(|&v| v == 0.0) {
        return;
    }
    let lbar: Vec<f64> = lbar.to_vec();

    // P = Φ(Lᵀ L̄) accumulated row-of-L by row-of-L so access is contiguous:
    // P_{ij} += L_{ki} L̄_{kj} for every k ≥ i ≥ j
    let mut p = vec![0.0; n * n];
    for k in 0..n {
        let row0 = k * (k + 1) / 2;
        let lrow = &lvals[row0..row0 + k + 1];
        let brow = &lbar[row0..row0 + k + 1];
        for i in 0..=k {
            let a = lrow[i];
            if a == 0.0 {
                continue;
            }
            let dst = &mut p[i * n..i * n + i + 1];
            for (d, b) in dst.iter_mut().zip(&brow[..i + 1]) {
                *d += a * b;
            }
        }
    }
    for i in 0..n {
        p[i * n + i] *= 0.5;
    }

    let lt = transpose_dense(lvals, n);
    // X = L⁻ᵀ P (solve Lᵀ X = P columnwise)
    let mut x = vec![0.0; n * n];
    let mut col = vec![0.0; n];
    let mut sol = vec![0.0; n];
    for j in 0..n {
        for i in 0..n {
            col[i] = p[i * n + j];
        }
        solve_transpose_dense(&lt, &col, &mut sol, n);
        for i in 0..n {
            x[i * n + j] = sol[i];
        }
    }
    // S = X L⁻¹ via Sᵀ = L⁻ᵀ Xᵀ (solve per row of X)
    let mut s = vec![0.0; n * n];
    for i in 0..n {
        solve_transpose_dense(&lt, &x[i * n..(i + 1) * n], &mut sol, n);
        s[i * n..(i + 1) * n].copy_from_slice(&sol);
    }
    // scatter: packed gradient is S_ii on the diagonal, S_ij + S_ji below it
    for i in 0..n {
        for j in 0..=i {
            let g = if i == j { s[i * n + i] } else { s[i * n + j] + s[j * n + i] };
            adj[op.a[packed_idx(i, j)] as usize] += g;
        }
    }
}

fn backward_tri_solve(op: &TriSolveOp, vals: &[f64], adj: &mut [f64]) {
    let n = op.n as usize;
    let n_cols = op.n_cols as usize;
    let out0 = op.out0 as usize;
    let lvals: Vec<f64> = op.l.iter().map(|&id| vals[id as usize]).collect();
    let lt = transpose_dense(&lvals, n);
    // L̄ accumulated densely here, scattered to node adjoints once at the end
    let mut lbar_acc = vec![0.0; n * (n + 1) / 2];
    let mut touched = false;
    let mut xbar = vec![0.0; n];
    let mut u = vec![0.0; n];
    for c in 0..n_cols {
        let xcol0 = out0 + c * n;
        let mut any = false;
        for i in 0..n {
            xbar[i] = adj[xcol0 + i];
            any |= xbar[i] != 0.0;
        }
        if !any {
            continue;
        }
        touched = true;
        let x = &vals[xcol0..xcol0 + n];
        if op.transpose {
            // x = L⁻ᵀ b: b̄ = L⁻¹ x̄, L̄_{ij} -= x_i u_j
            solve_packed(&lvals, &xbar, &mut u, n);
            for i in 0..n {
                adj[op.b[c * n + i] as usize] += u[i];
            }
            for i in 0..n {
                let f = x[i];
                if f == 0.0 {
                    continue;
                }
                let row0 = i * (i + 1) / 2;
                let dst = &mut lbar_acc[row0..row0 + i + 1];
                for (d, v) in dst.iter_mut().zip(&u[..i + 1]) {
                    *d -= f * v;
                }
            }
        } else {
            // x = L⁻¹ b: b̄ = L⁻ᵀ x̄, L̄_{ij} -= u_i x_j
            solve_transpose_dense(&lt, &xbar, &mut u, n);
            for i in 0..n {
                adj[op.b[c * n + i] as usize] += u[i];
            }
            for i in 0..n {
                let f = u[i];
                if f == 0.0 {
                    continue;
                }
                let row0 = i * (i + 1) / 2;
                let dst = &mut lbar_acc[row0..row0 + i + 1];
                for (d, v) in dst.iter_mut().zip(&x[..i + 1]) {
                    *d -= f * v;
                }
            }
        }
    }
    if touched {
        for (slot, &g) in op.l.iter().zip(&lbar_acc) {
            if g != 0.0 {
                adj[*slot as usize] += g;
            }
        }
    }
}

// ---- operator overloads -------------------------------------------------

impl<'t> core::ops::Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: Var<'t>) -> Var<'t> {
        self.tape.binary(BinKind::Add, self, rhs)
    }
}

impl<'t> core::ops::Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: Var<'t>) -> Var<'t> {
        self.tape.binary(BinKind::Sub, self, rhs)
    }
}

impl<'t> core::ops::Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: Var<'t>) -> Var<'t> {
        self.tape.binary(BinKind::Mul, self, rhs)
    }
}

impl<'t> core::ops::Div for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: Var<'t>) -> Var<'t> {
        self.tape.binary(BinKind::Div, self, rhs)
    }
}

impl<'t> core::ops::Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Var<'t> {
        self.tape.unary(UnaryKind::Neg, self)
    }
}
