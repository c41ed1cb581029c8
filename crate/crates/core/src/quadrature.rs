//! Globally adaptive Gauss-Kronrod (7, 15) quadrature that keeps the
//! weighted nodes of its final partition.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for the odd-indexed Kronrod nodes (plus the centre).
const WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

/// A quadrature node: abscissa, weight and integrand value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub t: f64,
    pub weight: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    /// Nodes of the final partition; `sum weight * value == value`.
    pub nodes: Vec<Node>,
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    nodes: Vec<Node>,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
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
        self.error.total_cmp(&other.error)
    }
}

fn panel(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> Panel {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut nodes = Vec::with_capacity(15);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    nodes.push(Node { t: c, weight: h * WGK[7], value: fc });
    for j in 0..7 {
        let dx = h * XGK[j];
        let (f1, f2) = (f(c - dx), f(c + dx));
        kronrod += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
        nodes.push(Node { t: c - dx, weight: h * WGK[j], value: f1 });
        nodes.push(Node { t: c + dx, weight: h * WGK[j], value: f2 });
    }
    Panel { a, b, value: h * kronrod, error: (h * (kronrod - gauss)).abs(), nodes }
}

/// Integrate `f` over `[breaks[0], breaks[last]]`, splitting every interval
/// between consecutive breakpoints into `per_interval` equal panels and then
/// bisecting the panel with the largest error estimate until the summed
/// estimate is below `max(abs_tol, rel_tol * |value|)`.
pub fn integrate(
    mut f: impl FnMut(f64) -> f64,
    breaks: &[f64],
    per_interval: usize,
    abs_tol: f64,
    rel_tol: f64,
    max_panels: usize,
) -> Result<Quadrature> {
    if breaks.len() < 2 || breaks.iter().any(|b| !b.is_finite()) || breaks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::ParameterOutOfRange {
            name: "interval",
            value: breaks.last().copied().unwrap_or(f64::NAN) - breaks.first().copied().unwrap_or(f64::NAN),
        });
    }
    let per = per_interval.max(1);
    let mut heap = BinaryHeap::new();
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        for i in 0..per {
            let lo = a + (b - a) * i as f64 / per as f64;
            let hi = if i + 1 == per { b } else { a + (b - a) * (i + 1) as f64 / per as f64 };
            heap.push(panel(&mut f, lo, hi));
        }
    }
    loop {
        let error: f64 = heap.iter().map(|p| p.error).sum();
        let value: f64 = heap.iter().map(|p| p.value).sum();
        let target = abs_tol.max(rel_tol * value.abs());
        if error <= target {
            break;
        }
        if heap.len() >= max_panels {
            return Err(Error::QuadratureFailed { achieved: error, requested: target });
        }
        let worst = heap.pop().expect("heap is nonempty");
        let mid = 0.5 * (worst.a + worst.b);
        if !(worst.a < mid && mid < worst.b) {
            return Err(Error::QuadratureFailed { achieved: error, requested: target });
        }
        heap.push(panel(&mut f, worst.a, mid));
        heap.push(panel(&mut f, mid, worst.b));
    }
    let mut panels = heap.into_vec();
    panels.sort_by(|p, q| p.a.total_cmp(&q.a));
    let value = panels.iter().map(|p| p.value).sum();
    let error = panels.iter().map(|p| p.error).sum();
    let mut nodes: Vec<Node> = panels.into_iter().flat_map(|p| p.nodes).collect();
    nodes.sort_by(|x, y| x.t.total_cmp(&y.t));
    Ok(Quadrature { value, error, nodes })
}
