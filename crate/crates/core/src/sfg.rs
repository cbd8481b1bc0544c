//! Signal-flow-graph engine.
//!
//! Edges carry gains `coeff · z^zpow`, where `coeff` is a transition
//! probability and `z` is the one-slot delay operator. For a graph whose
//! outgoing coefficients sum to one at every node, the source-to-sink
//! transfer function `H(z)` is the probability generating function of the
//! number of slots a packet spends in the graph, so `H(1) = 1` and the packet
//! throughput is `1 / H'(1)`.
//!
//! Two independent evaluators are provided: a linear solve of the node
//! equations `x = A(z) x + e_src` and Mason's gain formula over enumerated
//! forward paths and loops.

use std::collections::HashMap;
use std::fmt::{self, Display};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scalar::Field;

/// Mason enumeration is refused beyond this many nodes.
pub const MASON_MAX_NODES: usize = 20;

/// Cap on loop combinations visited while forming determinants.
pub const MASON_MAX_TERMS: usize = 20_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge<T> {
    pub from: NodeId,
    pub to: NodeId,
    pub coeff: T,
    pub zpow: u32,
}

/// Validated flow graph. Construct through [`FlowGraphBuilder`].
#[derive(Debug, Clone, PartialEq)]
pub struct FlowGraph<T> {
    names: Vec<String>,
    edges: Vec<Edge<T>>,
    source: NodeId,
    sink: NodeId,
}

/// `H(z₀)` and `H'(z₀)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferValue<T> {
    pub h: T,
    pub dh: T,
}

#[derive(Debug, Clone, Default)]
pub struct FlowGraphBuilder<T> {
    names: Vec<String>,
    index: HashMap<String, NodeId>,
    edges: Vec<Edge<T>>,
}

impl<T: Field> FlowGraphBuilder<T> {
    pub fn new() -> Self {
        Self {
            names: Vec::new(),
            index: HashMap::new(),
            edges: Vec::new(),
        }
    }

    /// Returns the id of `name`, creating the node on first use.
    pub fn node(&mut self, name: &str) -> NodeId {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = NodeId(self.names.len());
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), id);
        id
    }

    pub fn edge(&mut self, from: NodeId, to: NodeId, coeff: T, zpow: u32) -> &mut Self {
        self.edges.push(Edge {
            from,
            to,
            coeff,
            zpow,
        });
        self
    }

    pub fn build(self, source: NodeId, sink: NodeId) -> Result<FlowGraph<T>> {
        let g = FlowGraph {
            names: self.names,
            edges: self.edges,
            source,
            sink,
        };
        g.validate()?;
        Ok(g)
    }
}

impl<T: Field> FlowGraph<T> {
    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge<T>] {
        &self.edges
    }

    pub fn name(&self, id: NodeId) -> &str {
        &self.names[id.0]
    }

    pub fn node_id(&self, name: &str) -> Option<NodeId> {
        self.names.iter().position(|n| n == name).map(NodeId)
    }

    pub fn source(&self) -> NodeId {
        self.source
    }

    pub fn sink(&self) -> NodeId {
        self.sink
    }

    /// Sum of outgoing coefficients of `id`.
    pub fn out_mass(&self, id: NodeId) -> T {
        self.edges
            .iter()
            .filter(|e| e.from == id)
            .fold(T::zero(), |acc, e| acc + e.coeff)
    }

    /// Same graph over another scalar type. Conversions of valid
    /// coefficients are assumed to stay valid, so no re-validation happens.
    pub(crate) fn map_coeffs<U: Field>(&self, f: impl Fn(T) -> U) -> FlowGraph<U> {
        FlowGraph {
            names: self.names.clone(),
            edges: self
                .edges
                .iter()
                .map(|e| Edge {
                    from: e.from,
                    to: e.to,
                    coeff: f(e.coeff),
                    zpow: e.zpow,
                })
                .collect(),
            source: self.source,
            sink: self.sink,
        }
    }

    fn validate(&self) -> Result<()> {
        let n = self.names.len();
        let bad = |msg: String| Err(Error::InvalidGraph(msg));
        if self.source.0 >= n || self.sink.0 >= n {
            return bad("source or sink is not a node".into());
        }
        if self.source == self.sink {
            return bad("source and sink coincide".into());
        }
        for e in &self.edges {
            if e.from.0 >= n || e.to.0 >= n {
                return bad("edge references an unknown node".into());
            }
            if e.coeff < T::zero() || e.coeff > T::one() {
                return bad(format!(
                    "edge {} -> {} has coefficient {:?} outside [0, 1]",
                    self.names[e.from.0], self.names[e.to.0], e.coeff
                ));
            }
            if e.from == self.sink {
                return bad("sink has outgoing edges".into());
            }
        }
        let tol = T::identity_tol();
        for id in (0..n).map(NodeId).filter(|&id| id != self.sink) {
            let mass = self.out_mass(id);
            if (mass - T::one()).abs() > tol {
                return bad(format!(
                    "outgoing coefficients of {} sum to {mass:?}, not 1",
                    self.names[id.0]
                ));
            }
        }
        let reach = self.live_nodes();
        let back = self.reaches_sink();
        for (i, (&fwd, &bwd)) in reach.iter().zip(&back).enumerate() {
            if fwd && !bwd {
                return bad(format!(
                    "node {} is reachable from the source but cannot reach the sink",
                    self.names[i]
                ));
            }
        }
        Ok(())
    }

    /// Nodes reachable from the source over positive-coefficient edges.
    fn live_nodes(&self) -> Vec<bool> {
        let mut seen = vec![false; self.names.len()];
        let mut stack = vec![self.source.0];
        seen[self.source.0] = true;
        while let Some(u) = stack.pop() {
            for e in self
                .edges
                .iter()
                .filter(|e| e.from.0 == u && e.coeff > T::zero())
            {
                if !seen[e.to.0] {
                    seen[e.to.0] = true;
                    stack.push(e.to.0);
                }
            }
        }
        seen
    }

    fn reaches_sink(&self) -> Vec<bool> {
        let mut seen = vec![false; self.names.len()];
        let mut stack = vec![self.sink.0];
        seen[self.sink.0] = true;
        while let Some(v) = stack.pop() {
            for e in self
                .edges
                .iter()
                .filter(|e| e.to.0 == v && e.coeff > T::zero())
            {
                if !seen[e.from.0] {
                    seen[e.from.0] = true;
                    stack.push(e.from.0);
                }
            }
        }
        seen
    }

    /// Live nodes (compact indices) and the positive-coefficient edges among them.
    fn live_subgraph(&self) -> (Vec<usize>, Vec<Edge<T>>) {
        let live = self.live_nodes();
        let mut map = vec![usize::MAX; self.names.len()];
        let mut order = Vec::new();
        for (i, &l) in live.iter().enumerate() {
            if l {
                map[i] = order.len();
                order.push(i);
            }
        }
        let edges = self
            .edges
            .iter()
            .filter(|e| e.coeff > T::zero() && live[e.from.0] && live[e.to.0])
            .map(|e| Edge {
                from: NodeId(map[e.from.0]),
                to: NodeId(map[e.to.0]),
                coeff: e.coeff,
                zpow: e.zpow,
            })
            .collect();
        (map, edges)
    }
}

impl<T: Field + Display> FlowGraph<T> {
    /// Line-oriented dump: `source <name>`, `sink <name>`, then one
    /// `from to coeff zpow` line per edge in insertion order.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "source {}\nsink {}\n",
            self.names[self.source.0], self.names[self.sink.0]
        );
        for e in &self.edges {
            out.push_str(&format!(
                "{} {} {} {}\n",
                self.names[e.from.0], self.names[e.to.0], e.coeff, e.zpow
            ));
        }
        out
    }
}

impl<T: Field + FromStr> FlowGraph<T> {
    /// Parses the format written by [`FlowGraph::to_text`].
    pub fn from_text(text: &str) -> Result<Self> {
        let mut b = FlowGraphBuilder::<T>::new();
        let mut source = None;
        let mut sink = None;
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            let err = |m: &str| Error::InvalidGraph(format!("line {}: {m}", i + 1));
            match parts.as_slice() {
                ["source", name] => source = Some(b.node(name)),
                ["sink", name] => sink = Some(b.node(name)),
                [from, to, coeff, zpow] => {
                    let coeff: T = coeff.parse().map_err(|_| err("bad coefficient"))?;
                    let zpow: u32 = zpow.parse().map_err(|_| err("bad z power"))?;
                    let (f, t) = (b.node(from), b.node(to));
                    b.edge(f, t, coeff, zpow);
                }
                _ => return Err(err("expected `from to coeff zpow`")),
            }
        }
        let source = source.ok_or_else(|| Error::InvalidGraph("missing `source` line".into()))?;
        let sink = sink.ok_or_else(|| Error::InvalidGraph("missing `sink` line".into()))?;
        b.build(source, sink)
    }
}

impl<T: Field + Display> Display for FlowGraph<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

fn pow<T: Field>(z: T, k: u32) -> T {
    (0..k).fold(T::one(), |acc, _| acc * z)
}

fn check_z0<T: Field>(z0: T) -> Result<()> {
    if z0 <= T::zero() || z0 > T::one() {
        return Err(Error::OutOfRange("z0 must lie in (0, 1]".into()));
    }
    Ok(())
}

/// Dense LU with partial pivoting, stored in place.
struct Lu<T> {
    a: Vec<Vec<T>>,
    perm: Vec<usize>,
}

impl<T: Field> Lu<T> {
    fn factor(mut a: Vec<Vec<T>>) -> Result<Self> {
        let n = a.len();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let p = (k..n)
                .max_by(|&i, &j| {
                    a[i][k]
                        .abs()
                        .partial_cmp(&a[j][k].abs())
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
                .expect("non-empty range");
            if a[p][k].is_zero() {
                return Err(Error::SingularSystem);
            }
            a.swap(k, p);
            perm.swap(k, p);
            for i in k + 1..n {
                let f = a[i][k] / a[k][k];
                a[i][k] = f;
                #[allow(clippy::needless_range_loop)]
                for j in k + 1..n {
                    let t = a[k][j];
                    a[i][j] = a[i][j] - f * t;
                }
            }
        }
        Ok(Self { a, perm })
    }

    fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.a.len();
        let mut y: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                y[i] = y[i] - self.a[i][j] * y[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                y[i] = y[i] - self.a[i][j] * y[j];
            }
            y[i] = y[i] / self.a[i][i];
        }
        y
    }
}

/// Evaluates `H(z₀)` and `H'(z₀)` from the node equations: with
/// `(I − A(z₀)) x = e_src`, `H = x_sink`, and differentiating,
/// `(I − A(z₀)) x' = A'(z₀) x`.
pub fn transfer_linear_solve<T: Field>(g: &FlowGraph<T>, z0: T) -> Result<TransferValue<T>> {
    let (h, dh, _) = solve_derivatives(g, z0, false)?;
    Ok(TransferValue { h, dh })
}

/// `H''(z₀)` by one more solve against the same factorization. At `z₀ = 1`
/// this is the second factorial moment `E[S(S-1)]` of the path length.
pub fn transfer_second_derivative<T: Field>(g: &FlowGraph<T>, z0: T) -> Result<T> {
    let (_, _, d2h) = solve_derivatives(g, z0, true)?;
    Ok(d2h)
}

fn mat_vec<T: Field>(a: &[Vec<T>], x: &[T]) -> Vec<T> {
    a.iter()
        .map(|row| {
            row.iter()
                .zip(x)
                .fold(T::zero(), |acc, (&a, &xi)| acc + a * xi)
        })
        .collect()
}

/// Solves `(I - A)x = e_src` and its derivatives in `z`:
/// `(I - A)x' = A'x` and `(I - A)x'' = A''x + 2A'x'`.
fn solve_derivatives<T: Field>(g: &FlowGraph<T>, z0: T, second: bool) -> Result<(T, T, T)> {
    check_z0(z0)?;
    let (map, edges) = g.live_subgraph();
    let n = edges
        .iter()
        .map(|e| e.from.0.max(e.to.0) + 1)
        .max()
        .unwrap_or(1)
        .max(map.iter().filter(|&&m| m != usize::MAX).count());
    let src = map[g.source.0];
    let snk = map[g.sink.0];
    if snk == usize::MAX {
        return Err(Error::SingularSystem);
    }
    let mut m = vec![vec![T::zero(); n]; n];
    let mut da = vec![vec![T::zero(); n]; n];
    let mut d2a = vec![vec![T::zero(); n]; n];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = T::one();
    }
    for e in &edges {
        let (u, v) = (e.from.0, e.to.0);
        m[v][u] = m[v][u] - e.coeff * pow(z0, e.zpow);
        if e.zpow > 0 {
            da[v][u] = da[v][u] + e.coeff * T::from_u32(e.zpow) * pow(z0, e.zpow - 1);
        }
        if e.zpow > 1 {
            let k = T::from_u32(e.zpow * (e.zpow - 1));
            d2a[v][u] = d2a[v][u] + e.coeff * k * pow(z0, e.zpow - 2);
        }
    }
    let lu = Lu::factor(m)?;
    let mut b = vec![T::zero(); n];
    b[src] = T::one();
    let x = lu.solve(&b);
    let dx = lu.solve(&mat_vec(&da, &x));
    let d2h = if second {
        let two = T::one() + T::one();
        let rhs: Vec<T> = mat_vec(&d2a, &x)
            .into_iter()
            .zip(mat_vec(&da, &dx))
            .map(|(a, b)| a + two * b)
            .collect();
        lu.solve(&rhs)[snk]
    } else {
        T::zero()
    };
    Ok((x[snk], dx[snk], d2h))
}

/// Polynomial in `z`, coefficients by ascending power.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly<T>(pub Vec<T>);

impl<T: Field> Poly<T> {
    fn zero() -> Self {
        Poly(Vec::new())
    }

    fn add_monomial(&mut self, coeff: T, power: u32) {
        let p = power as usize;
        if self.0.len() <= p {
            self.0.resize(p + 1, T::zero());
        }
        self.0[p] = self.0[p] + coeff;
    }

    fn mul(&self, other: &Self) -> Self {
        if self.0.is_empty() || other.0.is_empty() {
            return Poly::zero();
        }
        let mut out = vec![T::zero(); self.0.len() + other.0.len() - 1];
        for (i, &a) in self.0.iter().enumerate() {
            for (j, &b) in other.0.iter().enumerate() {
                out[i + j] = out[i + j] + a * b;
            }
        }
        Poly(out)
    }

    pub fn eval(&self, z: T) -> T {
        self.0.iter().rev().fold(T::zero(), |acc, &c| acc * z + c)
    }

    pub fn derivative(&self) -> Self {
        Poly(
            self.0
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| c * T::from_u32(k as u32))
                .collect(),
        )
    }

    /// Coefficient of `z^k` (zero beyond the stored degree).
    pub fn coeff(&self, k: usize) -> T {
        self.0.get(k).copied().unwrap_or_else(T::zero)
    }
}

/// A monomial `coeff · z^power` with the set of nodes it touches.
#[derive(Debug, Clone, Copy)]
struct Term<T> {
    coeff: T,
    power: u32,
    nodes: u64,
}

/// Forward paths, loops, determinant and numerator of Mason's formula.
#[derive(Debug, Clone)]
pub struct MasonExpansion<T> {
    pub forward_paths: usize,
    pub loops: usize,
    /// `Δ(z) = 1 − Σ Lᵢ + Σ LᵢLⱼ − …` over non-touching loop sets.
    pub determinant: Poly<T>,
    /// `Σₖ Pₖ(z) Δₖ(z)`.
    pub numerator: Poly<T>,
}

impl<T: Field> MasonExpansion<T> {
    pub fn evaluate(&self, z0: T) -> Result<TransferValue<T>> {
        let d = self.determinant.eval(z0);
        if d.is_zero() {
            return Err(Error::SingularSystem);
        }
        let n = self.numerator.eval(z0);
        let dn = self.numerator.derivative().eval(z0);
        let dd = self.determinant.derivative().eval(z0);
        Ok(TransferValue {
            h: n / d,
            dh: (dn * d - n * dd) / (d * d),
        })
    }
}

struct Enumerator<'a, T> {
    adj: Vec<Vec<&'a Edge<T>>>,
    budget: usize,
}

impl<'a, T: Field> Enumerator<'a, T> {
    fn spend(&mut self, what: &str) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::EnumerationBudget(what.into()));
        }
        self.budget -= 1;
        Ok(())
    }

    fn paths(&mut self, from: usize, to: usize) -> Result<Vec<Term<T>>> {
        let mut out = Vec::new();
        let start = Term {
            coeff: T::one(),
            power: 0,
            nodes: 1u64 << from,
        };
        self.walk(from, to, start, &mut out, None)?;
        Ok(out)
    }

    /// Depth-first walk collecting simple paths ending at `target`. With
    /// `min_node = Some(s)` it collects cycles through `s` over nodes `≥ s`.
    fn walk(
        &mut self,
        at: usize,
        target: usize,
        acc: Term<T>,
        out: &mut Vec<Term<T>>,
        min_node: Option<usize>,
    ) -> Result<()> {
        let edges = self.adj[at].clone();
        for e in edges {
            let v = e.to.0;
            let next = Term {
                coeff: acc.coeff * e.coeff,
                power: acc.power + e.zpow,
                nodes: acc.nodes | (1u64 << v),
            };
            if v == target {
                self.spend("paths/loops")?;
                out.push(next);
                continue;
            }
            if acc.nodes & (1u64 << v) != 0 {
                continue;
            }
            if let Some(s) = min_node {
                if v < s {
                    continue;
                }
            }
            self.walk(v, target, next, out, min_node)?;
        }
        Ok(())
    }

    fn loops(&mut self, n: usize) -> Result<Vec<Term<T>>> {
        let mut out = Vec::new();
        for s in 0..n {
            let start = Term {
                coeff: T::one(),
                power: 0,
                nodes: 1u64 << s,
            };
            self.walk(s, s, start, &mut out, Some(s))?;
        }
        Ok(out)
    }

    /// `1 − Σ Lᵢ + Σ LᵢLⱼ − …` over loops avoiding `blocked`.
    fn determinant(&mut self, loops: &[Term<T>], blocked: u64) -> Result<Poly<T>> {
        let usable: Vec<Term<T>> = loops
            .iter()
            .copied()
            .filter(|l| l.nodes & blocked == 0)
            .collect();
        let mut poly = Poly::zero();
        self.combos(&usable, 0, 0, T::one(), 0, &mut poly)?;
        Ok(poly)
    }

    fn combos(
        &mut self,
        loops: &[Term<T>],
        from: usize,
        used: u64,
        coeff: T,
        power: u32,
        poly: &mut Poly<T>,
    ) -> Result<()> {
        self.spend("loop combinations")?;
        poly.add_monomial(coeff, power);
        for (i, l) in loops.iter().enumerate().skip(from) {
            if l.nodes & used == 0 {
                // Each added loop flips the sign.
                self.combos(
                    loops,
                    i + 1,
                    used | l.nodes,
                    -(coeff * l.coeff),
                    power + l.power,
                    poly,
                )?;
            }
        }
        Ok(())
    }
}

/// Forms Mason's expansion of the source-to-sink transfer function.
pub fn mason_expansion<T: Field>(g: &FlowGraph<T>) -> Result<MasonExpansion<T>> {
    let (map, edges) = g.live_subgraph();
    let n = map.iter().filter(|&&m| m != usize::MAX).count();
    if n > MASON_MAX_NODES {
        return Err(Error::EnumerationBudget(format!(
            "{n} live nodes exceeds the limit of {MASON_MAX_NODES}"
        )));
    }
    let mut adj: Vec<Vec<&Edge<T>>> = vec![Vec::new(); n];
    for e in &edges {
        adj[e.from.0].push(e);
    }
    let mut en = Enumerator {
        adj,
        budget: MASON_MAX_TERMS,
    };
    let src = map[g.source.0];
    let snk = map[g.sink.0];
    let paths = if snk == usize::MAX {
        Vec::new()
    } else {
        en.paths(src, snk)?
    };
    let loops = en.loops(n)?;
    let determinant = en.determinant(&loops, 0)?;
    let mut numerator = Poly::zero();
    for p in &paths {
        let cof = en.determinant(&loops, p.nodes)?;
        let mut mono = Poly::zero();
        mono.add_monomial(p.coeff, p.power);
        let prod = mono.mul(&cof);
        for (k, &c) in prod.0.iter().enumerate() {
            numerator.add_monomial(c, k as u32);
        }
    }
    Ok(MasonExpansion {
        forward_paths: paths.len(),
        loops: loops.len(),
        determinant,
        numerator,
    })
}

/// `H(z₀)` and `H'(z₀)` through Mason's gain formula, differentiating the
/// rational function `N(z)/Δ(z)` symbolically. `f64` graphs are expanded in
/// double-double arithmetic (see [`Field::mason_transfer`]).
pub fn transfer_mason<T: Field>(g: &FlowGraph<T>, z0: T) -> Result<TransferValue<T>> {
    check_z0(z0)?;
    T::mason_transfer(g, z0)
}

/// Packet throughput `1 / H'(1)` (packets per slot).
pub fn throughput<T: Field>(g: &FlowGraph<T>) -> Result<T> {
    let tv = transfer_linear_solve(g, T::one())?;
    if (tv.h - T::one()).abs() > T::identity_tol() {
        return Err(Error::InvalidGraph(format!(
            "H(1) = {:?} differs from 1",
            tv.h
        )));
    }
    if tv.dh <= T::zero() {
        return Err(Error::InvalidGraph(format!(
            "H'(1) = {:?} is not positive",
            tv.dh
        )));
    }
    Ok(T::one() / tv.dh)
}
