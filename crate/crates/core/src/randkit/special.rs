//! Normal and Student-t distribution functions.

use libm::erfc;
use statrs::function::{beta::beta_reg, gamma::ln_gamma};
use std::f64::consts::{FRAC_1_SQRT_2, PI};

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[inline]
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Upper tail 1 − Φ(x), accurate far into the right tail.
#[inline]
pub fn norm_sf(x: f64) -> f64 {
    0.5 * erfc(x * FRAC_1_SQRT_2)
}

/// Φ^{-1}(p), Wichura's AS241 (PPND16).
pub fn norm_ppf(p: f64) -> f64 {
    const A: [f64; 8] = [
        3.387_132_872_796_366_608,
        133.141_667_891_784_377_45,
        1_971.590_950_306_551_442_7,
        13_731.693_765_509_461_125,
        45_921.953_931_549_871_457,
        67_265.770_927_008_700_853,
        33_430.575_583_588_128_105,
        2_509.080_928_730_122_672_7,
    ];
    const B: [f64; 8] = [
        1.0,
        42.313_330_701_600_911_252,
        687.187_007_492_057_908_3,
        5_394.196_021_424_751_107_7,
        21_213.794_301_586_595_867,
        39_307.895_800_092_710_61,
        28_729.085_735_721_942_674,
        5_226.495_278_852_854_561,
    ];
    const C: [f64; 8] = [
        1.423_437_110_749_683_577_34,
        4.630_337_846_156_545_295_9,
        5.769_497_221_460_691_405_5,
        3.647_848_324_763_204_605_04,
        1.270_458_252_452_368_382_58,
        0.241_780_725_177_450_611_77,
        0.022_723_844_989_269_184_583_3,
        7.745_450_142_783_414_076_4e-4,
    ];
    const D: [f64; 8] = [
        1.0,
        2.053_191_626_637_758_821_87,
        1.676_384_830_183_803_849_4,
        0.689_767_334_985_100_004_55,
        0.148_103_976_427_480_074_59,
        0.015_198_666_563_616_457_196_6,
        5.475_938_084_995_344_946e-4,
        1.050_750_071_644_416_843_24e-9,
    ];
    const E: [f64; 8] = [
        6.657_904_643_501_103_777_2,
        5.463_784_911_164_114_369_9,
        1.784_826_539_917_291_335_8,
        0.296_560_571_828_504_891_23,
        0.026_532_189_526_576_123_093,
        0.001_242_660_947_388_078_438_6,
        2.711_555_568_743_487_578_15e-5,
        2.010_334_399_292_288_132_65e-7,
    ];
    const F: [f64; 8] = [
        1.0,
        0.599_832_206_555_887_937_69,
        0.136_929_880_922_735_805_31,
        0.014_875_361_290_850_614_852_5,
        7.868_691_311_456_132_591e-4,
        1.846_318_317_510_054_681_8e-5,
        1.421_511_758_316_445_888_7e-7,
        2.044_263_103_389_939_785_64e-15,
    ];
    #[inline]
    fn poly(c: &[f64; 8], x: f64) -> f64 {
        c.iter().rev().fold(0.0, |acc, &k| acc * x + k)
    }
    if p.is_nan() {
        return f64::NAN;
    }
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * poly(&A, r) / poly(&B, r);
    }
    let r0 = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-r0.ln()).sqrt();
    let x = if r <= 5.0 {
        r -= 1.6;
        poly(&C, r) / poly(&D, r)
    } else {
        r -= 5.0;
        poly(&E, r) / poly(&F, r)
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

/// Φ^{-1}(1 − q) without forming 1 − q.
#[inline]
pub fn norm_isf(q: f64) -> f64 {
    -norm_ppf(q)
}

/// Student-t law with cached normalising constant.
///
/// Integer ν up to 200 uses the finite trigonometric series (with its
/// convergent complement in the far tail); other ν go through the
/// regularised incomplete beta function.
#[derive(Clone, Debug, PartialEq)]
pub struct StudentT {
    nu: f64,
    int_nu: Option<u32>,
    log_norm: f64,
}

impl StudentT {
    pub fn new(nu: f64) -> crate::Result<Self> {
        if !(nu > 0.0) || !nu.is_finite() {
            return crate::error::param(format!("student-t degrees of freedom must be positive, got {nu}"));
        }
        let int_nu = if nu.fract() == 0.0 && nu <= 200.0 { Some(nu as u32) } else { None };
        let log_norm = ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu) - 0.5 * (nu * PI).ln();
        Ok(StudentT { nu, int_nu, log_norm })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    #[inline]
    pub fn pdf(&self, x: f64) -> f64 {
        (self.log_norm - 0.5 * (self.nu + 1.0) * (x * x / self.nu).ln_1p()).exp()
    }

    #[inline]
    pub fn ln_pdf(&self, x: f64) -> f64 {
        self.log_norm - 0.5 * (self.nu + 1.0) * (x * x / self.nu).ln_1p()
    }

    #[inline]
    pub fn cdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            self.sf_pos(-x)
        } else {
            1.0 - self.sf_pos(x)
        }
    }

    #[inline]
    pub fn sf(&self, x: f64) -> f64 {
        if x < 0.0 {
            1.0 - self.sf_pos(-x)
        } else {
            self.sf_pos(x)
        }
    }

    fn sf_pos(&self, x: f64) -> f64 {
        if x.is_infinite() {
            return 0.0;
        }
        match self.int_nu {
            Some(n) => sf_int(x, n),
            None => 0.5 * beta_reg(0.5 * self.nu, 0.5, self.nu / (self.nu + x * x)),
        }
    }

    pub fn quantile(&self, p: f64) -> f64 {
        if p.is_nan() {
            return f64::NAN;
        }
        if p <= 0.0 {
            return f64::NEG_INFINITY;
        }
        if p >= 1.0 {
            return f64::INFINITY;
        }
        if p == 0.5 {
            return 0.0;
        }
        match self.int_nu {
            Some(1) => return (PI * (p - 0.5)).tan(),
            Some(2) => return (2.0 * p - 1.0) / (2.0 * p * (1.0 - p)).sqrt(),
            _ => {}
        }
        if p < 0.5 {
            -self.isf_tail(p)
        } else {
            self.isf_tail(1.0 - p)
        }
    }

    /// Upper quantile: x with P(T > x) = q.
    pub fn isf(&self, q: f64) -> f64 {
        if q > 0.5 {
            return -self.isf(1.0 - q);
        }
        if q <= 0.0 {
            return f64::INFINITY;
        }
        if q == 0.5 {
            return 0.0;
        }
        self.isf_tail(q)
    }

    // solve sf(x) = tail for x > 0, tail in (0, 0.5)
    fn isf_tail(&self, tail: f64) -> f64 {
        let mut x = hill_start(2.0 * tail, self.nu);
        if !(x.is_finite() && x > 0.0) {
            x = 1.0;
        }
        let ln_tail = tail.ln();
        let (mut lo, mut hi) = (0.0_f64, f64::INFINITY);
        for _ in 0..100 {
            let s = self.sf_pos(x);
            if s > tail {
                lo = x;
            } else {
                hi = x;
            }
            if s <= 0.0 {
                x = 0.5 * (lo + x);
                continue;
            }
            let g = s.ln() - ln_tail;
            let step = g * s / self.pdf(x);
            let mut xn = x + step;
            if !(xn > lo && xn < hi) || !xn.is_finite() {
                xn = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * x.max(lo) };
            }
            let done = (xn - x).abs() <= 1e-15 * x.abs() || hi - lo <= 1e-15 * hi;
            x = xn;
            if done {
                break;
            }
        }
        x
    }
}

/// P(T_n > x) for integer n and x ≥ 0.
fn sf_int(x: f64, n: u32) -> f64 {
    if n == 1 {
        return (1.0_f64).atan2(x) / PI;
    }
    let nf = n as f64;
    let denom = nf + x * x;
    let c2 = nf / denom;
    let s = x / denom.sqrt();
    let m = (n / 2) as usize;
    if n % 2 == 0 {
        let finite = c2 >= 0.5 || x < 2.0;
        if finite {
            let (mut a, mut sum, mut pw) = (1.0, 0.0, 1.0);
            for k in 0..m {
                if k > 0 {
                    a *= (2 * k - 1) as f64 / (2 * k) as f64;
                    pw *= c2;
                }
                sum += a * pw;
            }
            let r = 0.5 - 0.5 * s * sum;
            if r >= 1e-3 {
                return r;
            }
        }
        {
            let mut a = 1.0;
            for k in 1..=m {
                a *= (2 * k - 1) as f64 / (2 * k) as f64;
            }
            let mut term = a * c2.powi(m as i32);
            let mut sum = 0.0;
            let mut k = m;
            while term > 1e-17 * sum || sum == 0.0 {
                sum += term;
                k += 1;
                term *= c2 * (2 * k - 1) as f64 / (2 * k) as f64;
                if k > m + 4000 || term == 0.0 {
                    break;
                }
            }
            0.5 * s * sum
        }
    } else {
        let c = c2.sqrt();
        if c2 >= 0.5 || x < 2.0 {
            let theta = (x / nf.sqrt()).atan();
            let (mut b, mut sum, mut pw) = (1.0, 0.0, 1.0);
            for k in 0..m {
                if k > 0 {
                    b *= (2 * k) as f64 / (2 * k + 1) as f64;
                    pw *= c2;
                }
                sum += b * pw;
            }
            let r = 0.5 - (theta + s * c * sum) / PI;
            if r >= 1e-3 {
                return r;
            }
        }
        {
            let mut b = 1.0;
            for k in 1..=m {
                b *= (2 * k) as f64 / (2 * k + 1) as f64;
            }
            let mut term = b * c2.powi(m as i32);
            let mut sum = 0.0;
            let mut k = m;
            while term > 1e-17 * sum || sum == 0.0 {
                sum += term;
                k += 1;
                term *= c2 * (2 * k) as f64 / (2 * k + 1) as f64;
                if k > m + 4000 || term == 0.0 {
                    break;
                }
            }
            s * c * sum / PI
        }
    }
}

// Hill (1970) starting value for the upper quantile at two-sided level p2.
fn hill_start(p2: f64, n: f64) -> f64 {
    let a = 1.0 / (n - 0.5);
    let b = 48.0 / (a * a);
    let mut c = ((20700.0 * a / b - 98.0) * a - 16.0) * a + 96.36;
    let d = ((94.5 / (b + c) - 3.0) / b + 1.0) * (a * PI / 2.0).sqrt() * n;
    let mut y = (d * p2).powf(2.0 / n);
    if y > 0.05 + a {
        let x = norm_ppf(0.5 * p2);
        y = x * x;
        if n < 5.0 {
            c += 0.3 * (n - 4.5) * (x + 0.6);
        }
        c = (((0.05 * d * x - 5.0) * x - 7.0) * x - 2.0) * x + b + c;
        y = (((((0.4 * y + 6.3) * y + 36.0) * y + 94.5) / c - y - 3.0) / b + 1.0) * x;
        y = (a * y * y).exp_m1();
    } else {
        y = ((1.0 / (((n + 6.0) / (n * y) - 0.089 * d - 0.822) * (n + 2.0) * 3.0) + 0.5 / (n + 4.0)) * y
            - 1.0)
            * (n + 1.0)
            / (n + 2.0)
            + 1.0 / y;
    }
    (n * y).sqrt()
}

/// ln(1 + e^x) without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// ln(Σ e^{x_i}).
pub fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}
