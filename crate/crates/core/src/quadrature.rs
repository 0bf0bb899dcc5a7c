//! Globally adaptive Gauss–Kronrod (7/15) quadrature carried out on log values.
//!
//! The integrand is supplied as `u ↦ log f(u)` for a nonnegative `f`. Every
//! panel sum is formed by shifting with the largest log value among its nodes,
//! so neither the products inside `f` nor the panel totals leave the range of
//! `f64` regardless of how large or small `f` is.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

// Kronrod abscissae on [-1, 1] (positive half, descending) and weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
// Gauss weights for the odd-indexed Kronrod nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Result of integrating a nonnegative function, on the log scale.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LogQuad {
    pub log_value: f64,
    /// Panels in the final partition.
    #[cfg_attr(not(test), allow(dead_code))]
    pub subdivisions: usize,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    lo: f64,
    hi: f64,
    log_value: f64,
    log_error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.log_error
            .total_cmp(&other.log_error)
            .then_with(|| other.lo.total_cmp(&self.lo))
    }
}

/// `log(Σ exp(xᵢ))` with the usual max shift. Returns `-∞` for an empty or all-`-∞` input.
pub(crate) fn log_sum_exp(xs: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.into_iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

fn gauss_kronrod<F: Fn(f64) -> f64>(log_f: &F, lo: f64, hi: f64) -> Panel {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);

    let mut logs = [f64::NEG_INFINITY; 15];
    logs[7] = log_f(center);
    for i in 0..7 {
        let dx = half * XGK[i];
        logs[i] = log_f(center - dx);
        logs[14 - i] = log_f(center + dx);
    }
    let shift = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if shift == f64::NEG_INFINITY {
        return Panel {
            lo,
            hi,
            log_value: f64::NEG_INFINITY,
            log_error: f64::NEG_INFINITY,
        };
    }
    let vals: Vec<f64> = logs.iter().map(|&l| (l - shift).exp()).collect();

    let mut kronrod = WGK[7] * vals[7];
    let mut gauss = WG[3] * vals[7];
    for i in 0..7 {
        let pair = vals[i] + vals[14 - i];
        kronrod += WGK[i] * pair;
        if i % 2 == 1 {
            gauss += WG[i / 2] * pair;
        }
    }
    let log_half = half.ln();
    let err = (kronrod - gauss).abs();
    Panel {
        lo,
        hi,
        log_value: shift + log_half + kronrod.ln(),
        log_error: if err > 0.0 {
            shift + log_half + err.ln()
        } else {
            f64::NEG_INFINITY
        },
    }
}

/// Integrates `exp(log_f)` over the finite interval `[lo, hi]`, pre-split at
/// `breakpoints` (points outside `(lo, hi)` are ignored).
///
/// Terminates when the summed error estimate is at most `rel_tol` times the
/// summed value, or fails once the panel count would exceed `max_panels`.
pub(crate) fn integrate_log<F: Fn(f64) -> f64>(
    log_f: F,
    lo: f64,
    hi: f64,
    breakpoints: &[f64],
    rel_tol: f64,
    max_panels: usize,
) -> Result<LogQuad> {
    if !(hi > lo) {
        return Ok(LogQuad {
            log_value: f64::NEG_INFINITY,
            subdivisions: 0,
        });
    }

    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&b| b > lo && b < hi)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut edges = Vec::with_capacity(cuts.len() + 2);
    edges.push(lo);
    edges.extend(cuts);
    edges.push(hi);

    let mut heap: BinaryHeap<Panel> = edges
        .windows(2)
        .map(|w| gauss_kronrod(&log_f, w[0], w[1]))
        .collect();
    let log_rel_tol = rel_tol.ln();

    loop {
        let log_value = log_sum_exp(heap.iter().map(|p| p.log_value));
        let log_error = log_sum_exp(heap.iter().map(|p| p.log_error));
        let done = log_value == f64::NEG_INFINITY || log_error <= log_rel_tol + log_value;
        if done {
            return Ok(LogQuad {
                log_value,
                subdivisions: heap.len(),
            });
        }

        let worst = *heap.peek().expect("at least one panel");
        let mid = 0.5 * (worst.lo + worst.hi);
        let resolvable = mid > worst.lo && mid < worst.hi;
        if heap.len() + 1 > max_panels || !resolvable {
            return Err(Error::QuadratureBudget {
                subdivisions: heap.len(),
                log_estimate: log_value,
                achieved_rel_tol: (log_error - log_value).exp(),
            });
        }
        heap.pop();
        heap.push(gauss_kronrod(&log_f, worst.lo, mid));
        heap.push(gauss_kronrod(&log_f, mid, worst.hi));
    }
}
