//! R-vine copulas given as an explicit edge list, compiled into h-function programs.

use super::event::PreparedEvent;
use super::pair::{PairCopula, PairFamily};
use crate::error::{Error, Result};
use crate::randkit::MarginSpec;
use std::collections::HashMap;

#[derive(Clone, Debug)]
pub struct VineEdge {
    /// conditioned pair (0-based)
    pub a: usize,
    pub b: usize,
    /// conditioning set (0-based)
    pub cond: Vec<usize>,
    pub pc: PairCopula,
}

impl VineEdge {
    pub fn new(a: usize, b: usize, cond: Vec<usize>, pc: PairCopula) -> Self {
        VineEdge { a, b, cond, pc }
    }

    fn cond_mask(&self) -> u64 {
        self.cond.iter().fold(0, |m, &c| m | (1 << c))
    }

    fn full_mask(&self) -> u64 {
        self.cond_mask() | (1 << self.a) | (1 << self.b)
    }
}

#[derive(Clone, Debug)]
enum Op {
    /// slot[out] = h_edge(slot[x] | slot[y])
    Fwd { edge: usize, x: usize, y: usize, out: usize },
    /// variable `var` through its chain of (edge, conditioning-value slot), lowest tree first
    Chain { var: usize, steps: Vec<(usize, usize)> },
}

#[derive(Clone, Debug)]
pub struct RVineSpec {
    d: usize,
    edges: Vec<VineEdge>,
    margins: Vec<MarginSpec>,
    order: Vec<usize>,
    ops: Vec<Op>,
    n_slots: usize,
}

impl RVineSpec {
    pub fn new(d: usize, edges: Vec<VineEdge>, margins: Vec<MarginSpec>) -> Result<Self> {
        if d < 2 || d > 60 {
            return Err(Error::Structure(format!("dimension {d} not supported")));
        }
        if margins.len() != d {
            return Err(Error::Shape(format!("{} margins for a {d}-dimensional vine", margins.len())));
        }
        validate(d, &edges)?;
        let (order, ops, n_slots) = compile(d, &edges)?;
        Ok(RVineSpec { d, edges, margins, order, ops, n_slots })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn edges(&self) -> &[VineEdge] {
        &self.edges
    }

    pub fn margins(&self) -> &[MarginSpec] {
        &self.margins
    }

    /// Order in which variables are generated.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn n_slots(&self) -> usize {
        self.n_slots
    }

    /// Three-variable example: C12 gaussian(0.5), C13 t(5, 0.5), C23|1 clayton(3).
    pub fn example_3d() -> Self {
        let e = |a, b, c: Vec<usize>, f| VineEdge::new(a, b, c, PairCopula::new(f).unwrap());
        RVineSpec::new(
            3,
            vec![
                e(0, 1, vec![], PairFamily::Gaussian { rho: 0.5 }),
                e(0, 2, vec![], PairFamily::StudentT { nu: 5.0, rho: 0.5 }),
                e(1, 2, vec![0], PairFamily::Clayton { delta: 3.0 }),
            ],
            vec![MarginSpec::uniform01(); 3],
        )
        .unwrap()
    }

    /// Four-variable example extending `example_3d` with C24 gumbel(3), C14|2 frank(3),
    /// C34|12 joe(3).
    pub fn example_4d() -> Self {
        let e = |a, b, c: Vec<usize>, f| VineEdge::new(a, b, c, PairCopula::new(f).unwrap());
        RVineSpec::new(
            4,
            vec![
                e(0, 1, vec![], PairFamily::Gaussian { rho: 0.5 }),
                e(0, 2, vec![], PairFamily::StudentT { nu: 5.0, rho: 0.5 }),
                e(1, 3, vec![], PairFamily::Gumbel { delta: 3.0 }),
                e(1, 2, vec![0], PairFamily::Clayton { delta: 3.0 }),
                e(0, 3, vec![1], PairFamily::Frank { delta: 3.0 }),
                e(2, 3, vec![0, 1], PairFamily::Joe { delta: 3.0 }),
            ],
            vec![MarginSpec::uniform01(); 4],
        )
        .unwrap()
    }

    /// Independence vine with the same tree structure as a D-vine on 0..d.
    pub fn independence(d: usize) -> Self {
        let mut edges = vec![];
        for k in 0..d - 1 {
            for i in 0..d - 1 - k {
                let cond = (i + 1..i + 1 + k).collect();
                edges.push(VineEdge::new(i, i + 1 + k, cond, PairCopula::independence()));
            }
        }
        RVineSpec::new(d, edges, vec![MarginSpec::uniform01(); d]).unwrap()
    }

    /// Text format, one record per line, 1-based variables:
    ///
    /// ```text
    /// dim 3
    /// margins uniform uniform uniform
    /// edge 1 2 | | gaussian rho=0.5
    /// edge 2 3 | 1 | clayton delta=3
    /// ```
    pub fn parse(text: &str) -> Result<Self> {
        let mut d = None;
        let mut margins = None;
        let mut edges = vec![];
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let bad = |m: &str| Error::Config(format!("vine file line {}: {m}", ln + 1));
            let (key, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
            match key {
                "dim" => d = Some(rest.trim().parse::<usize>().map_err(|_| bad("bad dimension"))?),
                "margins" => {
                    margins = Some(rest.split_whitespace().map(MarginSpec::parse).collect::<Result<Vec<_>>>()?);
                }
                "edge" => {
                    let parts: Vec<&str> = rest.split('|').collect();
                    if parts.len() != 3 {
                        return Err(bad("expected 'edge a b | cond... | family params'"));
                    }
                    let idx = |s: &str| -> Result<Vec<usize>> {
                        s.split_whitespace()
                            .map(|t| match t.parse::<usize>() {
                                Ok(k) if k >= 1 => Ok(k - 1),
                                _ => Err(bad(&format!("bad variable index '{t}'"))),
                            })
                            .collect()
                    };
                    let pair = idx(parts[0])?;
                    if pair.len() != 2 {
                        return Err(bad("conditioned set must have two variables"));
                    }
                    let pc = PairCopula::parse(parts[2]).map_err(|e| bad(&e.to_string()))?;
                    edges.push(VineEdge::new(pair[0], pair[1], idx(parts[1])?, pc));
                }
                other => return Err(bad(&format!("unknown record '{other}'"))),
            }
        }
        let d = d.ok_or_else(|| Error::Config("vine file lacks a 'dim' record".into()))?;
        let margins = margins.unwrap_or_else(|| vec![MarginSpec::uniform01(); d]);
        RVineSpec::new(d, edges, margins)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("dim {}\nmargins {}\n", self.d, self.margins.iter().map(|m| m.label()).collect::<Vec<_>>().join(" "));
        for e in &self.edges {
            let c: Vec<String> = e.cond.iter().map(|c| (c + 1).to_string()).collect();
            s += &format!("edge {} {} | {} | {}\n", e.a + 1, e.b + 1, c.join(" "), e.pc.label());
        }
        s
    }

    /// V ↦ U. `slots` must have length `n_slots()`. With a gate, stops at the first
    /// variable (in generation order) that leaves the event.
    #[inline]
    pub fn inverse_into(&self, v: &[f64], u: &mut [f64], slots: &mut [f64], gate: Option<&PreparedEvent>) -> bool {
        for op in &self.ops {
            match op {
                Op::Fwd { edge, x, y, out } => {
                    slots[*out] = self.edges[*edge].pc.h(slots[*x], slots[*y]);
                }
                Op::Chain { var, steps } => {
                    let mut q = v[*var];
                    for &(e, c) in steps.iter().rev() {
                        q = self.edges[e].pc.h_inv(q, slots[c]);
                    }
                    slots[*var] = q;
                    u[*var] = q;
                    if let Some(g) = gate {
                        if !g.passes(*var, q) {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }

    /// U ↦ V.
    pub fn forward_into(&self, u: &[f64], v: &mut [f64], slots: &mut [f64]) {
        slots[..self.d].copy_from_slice(u);
        for op in &self.ops {
            match op {
                Op::Fwd { edge, x, y, out } => {
                    slots[*out] = self.edges[*edge].pc.h(slots[*x], slots[*y]);
                }
                Op::Chain { var, steps } => {
                    let mut q = u[*var];
                    for &(e, c) in steps {
                        q = self.edges[e].pc.h(q, slots[c]);
                    }
                    v[*var] = q;
                }
            }
        }
    }

    pub fn rosenblatt_inverse(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_unit(v)?;
        let mut u = vec![0.0; self.d];
        let mut slots = vec![0.0; self.n_slots];
        self.inverse_into(v, &mut u, &mut slots, None);
        Ok(u)
    }

    pub fn rosenblatt_forward(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check_unit(u)?;
        let mut v = vec![0.0; self.d];
        let mut slots = vec![0.0; self.n_slots];
        self.forward_into(u, &mut v, &mut slots);
        Ok(v)
    }

    fn check_unit(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.d {
            return Err(Error::Shape(format!("expected a {}-vector, got length {}", self.d, v.len())));
        }
        if v.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
            return Err(Error::Domain("uniform coordinates must lie in (0,1)".into()));
        }
        Ok(())
    }
}

fn find(parent: &mut [usize], i: usize) -> usize {
    let mut r = i;
    while parent[r] != r {
        r = parent[r];
    }
    let mut j = i;
    while parent[j] != r {
        let next = parent[j];
        parent[j] = r;
        j = next;
    }
    r
}

fn validate(d: usize, edges: &[VineEdge]) -> Result<()> {
    let bad = |m: String| Err(Error::Structure(m));
    if edges.len() != d * (d - 1) / 2 {
        return bad(format!("a {d}-dimensional vine needs {} edges, got {}", d * (d - 1) / 2, edges.len()));
    }
    for e in edges {
        if e.a >= d || e.b >= d || e.a == e.b || e.cond.iter().any(|&c| c >= d || c == e.a || c == e.b) {
            return bad(format!("edge ({},{}|{:?}) has invalid indices", e.a + 1, e.b + 1, e.cond));
        }
        if (e.cond_mask().count_ones() as usize) != e.cond.len() {
            return bad("repeated variable in a conditioning set".into());
        }
    }
    let mut prev: Vec<u64> = vec![];
    for k in 0..d - 1 {
        let level: Vec<&VineEdge> = edges.iter().filter(|e| e.cond.len() == k).collect();
        if level.len() != d - 1 - k {
            return bad(format!("tree {} needs {} edges, got {}", k + 1, d - 1 - k, level.len()));
        }
        let nodes: Vec<u64> = if k == 0 { (0..d).map(|i| 1u64 << i).collect() } else { prev.clone() };
        let mut parent: Vec<usize> = (0..nodes.len()).collect();
        for e in &level {
            let cm = e.cond_mask();
            let ia = nodes.iter().position(|&n| n == cm | (1 << e.a));
            let ib = nodes.iter().position(|&n| n == cm | (1 << e.b));
            let (ia, ib) = match (ia, ib) {
                (Some(a), Some(b)) => (a, b),
                _ => {
                    return bad(format!(
                        "edge ({},{}|{:?}) violates the proximity condition",
                        e.a + 1,
                        e.b + 1,
                        e.cond.iter().map(|c| c + 1).collect::<Vec<_>>()
                    ))
                }
            };
            let (ra, rb) = (find(&mut parent, ia), find(&mut parent, ib));
            if ra == rb {
                return bad(format!("tree {} contains a cycle", k + 1));
            }
            parent[ra] = rb;
        }
        let fulls: Vec<u64> = level.iter().map(|e| e.full_mask()).collect();
        for i in 0..fulls.len() {
            if fulls[i + 1..].contains(&fulls[i]) {
                return bad(format!("duplicate edge in tree {}", k + 1));
            }
        }
        prev = fulls;
    }
    Ok(())
}

// chain of (edge, partner, conditioning mask) for `var` given the already generated set `done`
fn chain_for(edges: &[VineEdge], var: usize, done: u64, level: usize, dk: u64, out: &mut Vec<(usize, usize, u64)>) -> bool {
    if dk == done {
        return true;
    }
    for (ei, e) in edges.iter().enumerate() {
        if e.cond.len() != level || e.cond_mask() != dk {
            continue;
        }
        let m = if e.a == var {
            e.b
        } else if e.b == var {
            e.a
        } else {
            continue;
        };
        if done & (1 << m) == 0 || dk & (1 << m) != 0 {
            continue;
        }
        out.push((ei, m, dk));
        if chain_for(edges, var, done, level + 1, dk | (1 << m), out) {
            return true;
        }
        out.pop();
    }
    false
}

struct Compiler<'a> {
    edges: &'a [VineEdge],
    memo: HashMap<(usize, u64), usize>,
    ops: Vec<Op>,
    n_slots: usize,
}

impl Compiler<'_> {
    // slot holding F(var | mask)
    fn ensure(&mut self, var: usize, mask: u64) -> Option<usize> {
        if mask == 0 {
            return Some(var);
        }
        if let Some(&s) = self.memo.get(&(var, mask)) {
            return Some(s);
        }
        for (ei, e) in self.edges.iter().enumerate() {
            let w = if e.a == var {
                e.b
            } else if e.b == var {
                e.a
            } else {
                continue;
            };
            if mask & (1 << w) == 0 || e.cond_mask() != mask & !(1 << w) {
                continue;
            }
            let rest = mask & !(1 << w);
            let x = self.ensure(var, rest)?;
            let y = self.ensure(w, rest)?;
            let out = self.n_slots;
            self.n_slots += 1;
            self.ops.push(Op::Fwd { edge: ei, x, y, out });
            self.memo.insert((var, mask), out);
            return Some(out);
        }
        None
    }
}

fn compile_order(d: usize, edges: &[VineEdge], order: &[usize]) -> Option<(Vec<Op>, usize)> {
    let mut c = Compiler { edges, memo: HashMap::new(), ops: vec![], n_slots: d };
    let mut done = 0u64;
    for &var in order {
        let mut chain = vec![];
        if !chain_for(edges, var, done, 0, 0, &mut chain) {
            return None;
        }
        let mut steps = vec![];
        for (ei, m, dk) in chain {
            steps.push((ei, c.ensure(m, dk)?));
        }
        c.ops.push(Op::Chain { var, steps });
        done |= 1 << var;
    }
    Some((c.ops, c.n_slots))
}

fn compile(d: usize, edges: &[VineEdge]) -> Result<(Vec<usize>, Vec<Op>, usize)> {
    let mut order: Vec<usize> = (0..d).collect();
    loop {
        if let Some((ops, n)) = compile_order(d, edges, &order) {
            return Ok((order, ops, n));
        }
        if !next_permutation(&mut order) {
            return Err(Error::Structure("no sampling order found for the vine".into()));
        }
    }
}

fn next_permutation(a: &mut [usize]) -> bool {
    let n = a.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && a[i - 1] >= a[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while a[j] <= a[i - 1] {
        j -= 1;
    }
    a.swap(i - 1, j);
    a[i..].reverse();
    true
}
