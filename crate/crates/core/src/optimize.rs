//! One-dimensional maximization for concave-by-pieces objectives.
//!
//! The exponent programs contain `[x]₊` terms, which put kinks at known
//! points. Each smooth piece is scanned on a grid and then refined by golden
//! section around the best grid point; the piece endpoints are always
//! evaluated so that boundary maxima are returned exactly.

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Maximum {
    pub arg: f64,
    pub value: f64,
}

impl Maximum {
    fn better(self, other: Maximum) -> Maximum {
        if other.value > self.value {
            other
        } else {
            self
        }
    }
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for the maximum of a unimodal `f` on `[lo, hi]`.
pub fn golden_section_max<F>(f: &F, lo: f64, hi: f64, tol: f64) -> Maximum
where
    F: Fn(f64) -> f64,
{
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        if !(c > a && d < b) {
            break;
        }
    }
    let arg = 0.5 * (a + b);
    Maximum { arg, value: f(arg) }
        .better(Maximum { arg: c, value: fc })
        .better(Maximum { arg: d, value: fd })
}

/// Maximize `f` over `[lo, hi]`, treating each interval between consecutive
/// `breakpoints` as a separate smooth piece.
pub fn maximize_piecewise<F>(f: &F, lo: f64, hi: f64, breakpoints: &[f64], grid_step: f64, tol: f64) -> Maximum
where
    F: Fn(f64) -> f64,
{
    let mut edges: Vec<f64> = vec![lo, hi];
    edges.extend(breakpoints.iter().copied().filter(|x| *x > lo && *x < hi));
    edges.sort_by(|a, b| a.total_cmp(b));
    edges.dedup();

    let mut best = Maximum {
        arg: lo,
        value: f(lo),
    };
    for piece in edges.windows(2) {
        best = best.better(maximize_piece(f, piece[0], piece[1], grid_step, tol));
    }
    best
}

fn maximize_piece<F>(f: &F, a: f64, b: f64, grid_step: f64, tol: f64) -> Maximum
where
    F: Fn(f64) -> f64,
{
    let cells = (((b - a) / grid_step).ceil() as usize).max(2);
    let h = (b - a) / cells as f64;
    let point = |i: usize| if i == cells { b } else { a + h * i as f64 };

    let mut best_i = 0;
    let mut best_v = f64::NEG_INFINITY;
    for i in 0..=cells {
        let v = f(point(i));
        if v > best_v {
            best_v = v;
            best_i = i;
        }
    }
    let grid_best = Maximum {
        arg: point(best_i),
        value: best_v,
    };
    let left = point(best_i.saturating_sub(1));
    let right = point((best_i + 1).min(cells));
    golden_section_max(f, left, right, tol).better(grid_best)
}
