//! Adaptive Gauss–Kronrod (7/15) quadrature for scalar and small vector integrands.

use std::collections::BinaryHeap;

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
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Clone, Debug)]
pub struct QuadResult {
    pub value: Vec<f64>,
    pub error: f64,
    pub evaluations: usize,
}

struct Panel {
    a: f64,
    b: f64,
    value: Vec<f64>,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: FnMut(f64, &mut [f64])>(f: &mut F, a: f64, b: f64, n: usize, buf: &mut [f64]) -> Panel {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut kron = vec![0.0; n];
    let mut gauss = vec![0.0; n];
    f(c, buf);
    for k in 0..n {
        kron[k] = WGK[7] * buf[k];
        gauss[k] = WG[3] * buf[k];
    }
    for j in 0..7 {
        let dx = h * XGK[j];
        for &x in &[c - dx, c + dx] {
            f(x, buf);
            for k in 0..n {
                kron[k] += WGK[j] * buf[k];
                if j % 2 == 1 {
                    gauss[k] += WG[j / 2] * buf[k];
                }
            }
        }
    }
    let mut error: f64 = 0.0;
    for k in 0..n {
        kron[k] *= h;
        gauss[k] *= h;
        error = error.max((kron[k] - gauss[k]).abs());
    }
    Panel {
        a,
        b,
        value: kron,
        error,
    }
}

/// Integrate the `n`-component integrand `f(x, out)` over `[a, b]`.
///
/// Panels are bisected largest-error-first until the summed error estimate
/// (max over components) drops below `max(abs_tol, rel_tol·|I|_∞)` or
/// `max_panels` is reached.
pub fn integrate_vec<F: FnMut(f64, &mut [f64])>(
    mut f: F,
    a: f64,
    b: f64,
    n: usize,
    abs_tol: f64,
    rel_tol: f64,
    max_panels: usize,
) -> QuadResult {
    let mut buf = vec![0.0; n];
    let mut heap = BinaryHeap::new();
    let first = gk15(&mut f, a, b, n, &mut buf);
    let mut total = first.value.clone();
    let mut error = first.error;
    heap.push(first);
    let mut evaluations = 15;
    while heap.len() < max_panels {
        let scale = total.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if error <= abs_tol.max(rel_tol * scale) {
            break;
        }
        let worst = heap.pop().unwrap();
        let mid = 0.5 * (worst.a + worst.b);
        let left = gk15(&mut f, worst.a, mid, n, &mut buf);
        let right = gk15(&mut f, mid, worst.b, n, &mut buf);
        evaluations += 30;
        for k in 0..n {
            total[k] += left.value[k] + right.value[k] - worst.value[k];
        }
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
    // resum to shed accumulated cancellation in the running totals
    let mut value = vec![0.0; n];
    let mut err = 0.0;
    for p in heap.iter() {
        for k in 0..n {
            value[k] += p.value[k];
        }
        err += p.error;
    }
    QuadResult {
        value,
        error: err,
        evaluations,
    }
}

/// Scalar adaptive integral of `f` over `[a, b]` to `max(abs_tol, rel_tol·|I|)`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> (f64, f64) {
    let r = integrate_vec(|x, out| out[0] = f(x), a, b, 1, abs_tol, rel_tol, 4096);
    (r.value[0], r.error)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomials_are_exact() {
        let (v, _) = integrate(|x| 3.0 * x * x - x + 2.0, -1.0, 2.0, 1e-14, 0.0);
        assert_relative_eq!(v, 9.0 - 1.5 + 6.0, max_relative = 1e-14);
    }

    #[test]
    fn endpoint_singularity() {
        let (v, _) = integrate(|x| 1.0 / x.sqrt(), 0.0, 1.0, 1e-10, 1e-12);
        assert_relative_eq!(v, 2.0, max_relative = 1e-8);
    }

    #[test]
    fn vector_components() {
        let r = integrate_vec(
            |x, out| {
                out[0] = x.exp();
                out[1] = x.cos();
            },
            0.0,
            3.0,
            2,
            1e-13,
            1e-13,
            1000,
        );
        assert_relative_eq!(r.value[0], 3f64.exp() - 1.0, max_relative = 1e-12);
        assert_relative_eq!(r.value[1], 3f64.sin(), max_relative = 1e-12);
    }
}
