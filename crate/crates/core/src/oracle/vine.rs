//! Monte Carlo reference for vine corner probabilities with a 99.9% interval.

use crate::copulas::{Direction, PreparedEvent, RVineSpec};
use crate::parallel;
use crate::randkit::make_stream;
use rayon::prelude::*;
use serde::Serialize;

pub const Z_999: f64 = 3.2905;
const CHUNKS: u64 = 64;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleEstimate {
    pub p: f64,
    pub n: u64,
    pub hits: u64,
    pub estimate: f64,
    pub std_err: f64,
    /// 99.9% normal-approximation half width
    pub half_width: f64,
}

impl OracleEstimate {
    pub fn lower(&self) -> f64 {
        self.estimate - self.half_width
    }

    pub fn upper(&self) -> f64 {
        self.estimate + self.half_width
    }
}

/// P(U > (p, …, p)) for each p, all from one set of n crude draws.
pub fn vine_corner_probs(rv: &RVineSpec, ps: &[f64], n: u64, seed: u64) -> Vec<OracleEstimate> {
    let d = rv.dim();
    let pmin = ps.iter().cloned().fold(f64::INFINITY, f64::min);
    let gate = PreparedEvent::corner(Direction::Upper, vec![pmin; d]);
    let per = n / CHUNKS;
    let counts: Vec<Vec<u64>> = parallel::pool().install(|| {
        (0..CHUNKS)
            .into_par_iter()
            .map(|c| {
                let m = if c == CHUNKS - 1 { n - per * (CHUNKS - 1) } else { per };
                let mut s = make_stream(seed, c);
                let mut v = vec![0.0; d];
                let mut u = vec![0.0; d];
                let mut slots = vec![0.0; rv.n_slots()];
                let mut cnt = vec![0u64; ps.len()];
                for _ in 0..m {
                    for vi in v.iter_mut() {
                        *vi = s.uniform();
                    }
                    if !rv.inverse_into(&v, &mut u, &mut slots, Some(&gate)) {
                        continue;
                    }
                    let lo = u.iter().cloned().fold(f64::INFINITY, f64::min);
                    for (k, &p) in ps.iter().enumerate() {
                        if lo > p {
                            cnt[k] += 1;
                        }
                    }
                }
                cnt
            })
            .collect()
    });
    ps.iter()
        .enumerate()
        .map(|(k, &p)| {
            let hits: u64 = counts.iter().map(|c| c[k]).sum();
            let est = hits as f64 / n as f64;
            let se = (est * (1.0 - est) / n as f64).sqrt();
            OracleEstimate { p, n, hits, estimate: est, std_err: se, half_width: Z_999 * se }
        })
        .collect()
}

pub fn vine_corner_prob(rv: &RVineSpec, p: f64, n: u64, seed: u64) -> OracleEstimate {
    vine_corner_probs(rv, &[p], n, seed).remove(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn independence_vine() {
        let rv = RVineSpec::independence(3);
        let r = vine_corner_prob(&rv, 0.9, 2_000_000, 1);
        assert!((r.estimate - 1e-3).abs() < r.half_width, "{r:?}");
    }
}
