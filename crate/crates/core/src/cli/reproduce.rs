//! `reproduce --table K`: our measurements next to the published ones.

use super::tables::{reference_table, Cells};
use super::{reference_prob, unconverged, write_json, RunConfig, EXIT_NONCONVERGENCE, EXIT_OK};
use crate::copulas::Model;
use crate::error::{Error, Result};
use crate::estimators::{replicate, write_csv, EstimateResult, Method};
use crate::oracle;
use std::time::Instant;

/// 1.00E-03 style, as printed in the published tables.
pub fn sci(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let s = format!("{x:.digits$e}");
    let (m, e) = s.split_once('e').unwrap();
    let e: i32 = e.parse().unwrap();
    format!("{m}E{}{:02}", if e < 0 { '-' } else { '+' }, e.abs())
}

fn vec_str(v: &[f64]) -> String {
    let f = |x: &f64| if x.abs() < 1.0 { format!("{x:.3}") } else { format!("{x:.2}") };
    match v {
        [x] => f(x),
        _ => format!("({})", v.iter().map(f).collect::<Vec<_>>().join(", ")),
    }
}

struct Grid {
    rows: Vec<(String, Vec<String>)>,
}

impl Grid {
    fn push(&mut self, label: impl Into<String>, cells: Vec<String>) {
        self.rows.push((label.into(), cells));
    }

    fn render(&self) -> String {
        let lw = self.rows.iter().map(|r| r.0.chars().count()).max().unwrap_or(0);
        let k = self.rows.iter().map(|r| r.1.len()).max().unwrap_or(0);
        let cw: Vec<usize> =
            (0..k).map(|j| self.rows.iter().filter_map(|r| r.1.get(j)).map(|c| c.chars().count()).max().unwrap_or(0)).collect();
        let mut s = String::new();
        for (label, cells) in &self.rows {
            s += &format!("{label:<lw$}");
            for (j, c) in cells.iter().enumerate() {
                s += &format!("   {c:<w$}", w = cw[j]);
            }
            s = s.trim_end().to_string();
            s.push('\n');
        }
        s
    }
}

fn short(m: Method) -> &'static str {
    match m {
        Method::Naive => "Naive",
        Method::IsT1 => "IS_t1",
        Method::IsT2 => "IS_t2",
        Method::IsT3 => "IS_t3",
        Method::IsLd => "IS_ld",
    }
}

struct Column {
    oracle: Option<String>,
    naive: EstimateResult,
    methods: Vec<EstimateResult>,
}

fn run_column(cfg: &RunConfig, model: &Model, methods: &[Method]) -> Result<Column> {
    let mut oracle_txt = None;
    let mut u_ref = reference_prob(cfg, model);
    if let Some(u) = u_ref {
        oracle_txt = Some(sci(u, 4));
    } else if let (Model::Vine(rv), Some(n), Some(p)) = (model, cfg.oracle_n, cfg.p) {
        let e = oracle::vine_corner_prob(rv, p, n, cfg.seed.unwrap_or(0));
        oracle_txt = Some(format!("{} ± {}", sci(e.estimate, 3), sci(e.half_width, 1)));
        u_ref = Some(e.estimate);
    }
    let run = |m: Method| -> Result<EstimateResult> {
        let t0 = Instant::now();
        let r = replicate(&cfg.experiment(model, m)?)?;
        eprintln!("  p = {:<7} {:<6} u = {}  ({:.1} s)", cfg.p.unwrap_or(f64::NAN), m.label(), sci(r.u_hat, 3), t0.elapsed().as_secs_f64());
        Ok(r)
    };
    let naive = run(Method::Naive)?;
    let mut rows = methods.iter().map(|&m| run(m)).collect::<Result<Vec<_>>>()?;
    // no oracle: the most precise tilted estimate stands in for u
    let u = u_ref.or_else(|| rows.iter().min_by(|a, b| a.std_err().total_cmp(&b.std_err())).map(|r| r.u_hat)).unwrap_or(naive.u_hat);
    let naive = if u > 0.0 { naive.with_wnrv(u)? } else { naive };
    if u > 0.0 {
        rows = rows.into_iter().map(|r| r.with_wnrv(u)).collect::<Result<_>>()?;
    }
    Ok(Column { oracle: oracle_txt, naive, methods: rows })
}

fn pair(ours: String, published: String) -> String {
    format!("{ours} | {published}")
}

fn stat_rows(g: &mut Grid, name: &str, ours: &[&EstimateResult], published: &Cells, cols: &[usize]) {
    let w = |r: &EstimateResult| r.wnrv.map(|w| sci(w, 2)).unwrap_or_else(|| "-".into());
    g.push(format!("{name} estimator"), ours.iter().zip(cols).map(|(r, &j)| pair(sci(r.u_hat, 2), sci(published.u[j], 2))).collect());
    g.push(format!("sd({name})"), ours.iter().zip(cols).map(|(r, &j)| pair(sci(r.sd, 2), sci(published.sd[j], 2))).collect());
    g.push(format!("WNRV({name})"), ours.iter().zip(cols).map(|(r, &j)| pair(w(r), sci(published.wnrv[j], 2))).collect());
}

pub(super) fn run(table: usize, columns: Option<&[usize]>, user: RunConfig) -> Result<i32> {
    let t = reference_table(table).ok_or_else(|| Error::Config(format!("table must be between 1 and 14, got {table}")))?;
    let k = t.ps.len();
    let cols: Vec<usize> = match columns {
        None => (0..k).collect(),
        Some(c) => c
            .iter()
            .map(|&j| if (1..=k).contains(&j) { Ok(j - 1) } else { Err(Error::Config(format!("column {j} outside 1..={k}"))) })
            .collect::<Result<_>>()?,
    };
    let base = user.clone().over(t.model.clone());
    let model = base.model()?;
    let methods: Vec<Method> = t.rows.iter().map(|r| Method::parse(&r.method)).collect::<Result<_>>()?;

    eprintln!("table {}: {}", t.id, t.title);
    let mut results = Vec::new();
    for &j in &cols {
        let cfg = RunConfig { p: Some(t.ps[j]), a: None, ..base.clone() };
        results.push(run_column(&cfg, &model, &methods)?);
    }

    let n = base.n.unwrap_or(500);
    let reps = base.reps.unwrap_or(5000);
    let mut g = Grid { rows: vec![] };
    g.push("p", cols.iter().map(|&j| format!("{}", t.ps[j])).collect());
    g.push("oracle u", results.iter().map(|c| c.oracle.clone().unwrap_or_else(|| "-".into())).collect());
    let naive: Vec<&EstimateResult> = results.iter().map(|c| &c.naive).collect();
    stat_rows(&mut g, "Naive", &naive, &t.naive, &cols);
    for (i, row) in t.rows.iter().enumerate() {
        let m = methods[i];
        let name = short(m);
        let ours: Vec<&EstimateResult> = results.iter().map(|c| &c.methods[i]).collect();
        g.push("", vec![]);
        g.push(
            format!("theta_{}", &name[3..]),
            ours.iter().zip(&cols).map(|(r, &j)| pair(vec_str(&r.theta), vec_str(&row.theta[j]))).collect(),
        );
        stat_rows(&mut g, name, &ours, &row.cells, &cols);
        g.push(
            format!("sd_eff(Naive, {name})"),
            ours.iter()
                .zip(&naive)
                .zip(&cols)
                .map(|((r, nv), &j)| pair(format!("{:.2}", nv.sd / r.sd), format!("{:.2}", t.naive.sd[j] / row.cells.sd[j])))
                .collect(),
        );
    }
    println!("Table {}: {}", t.id, t.title);
    println!("n = {n}, M = {reps}, seed = {}; each cell reads ours | published\n", base.seed.unwrap_or(0));
    print!("{}", g.render());

    let all: Vec<EstimateResult> = results.into_iter().flat_map(|c| std::iter::once(c.naive).chain(c.methods)).collect();
    if let Some(p) = &base.out {
        write_csv(std::fs::File::create(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?, &all)?;
    }
    if let Some(p) = &base.json {
        write_json(p, &all)?;
    }
    Ok(if unconverged(&all) { EXIT_NONCONVERGENCE } else { EXIT_OK })
}
