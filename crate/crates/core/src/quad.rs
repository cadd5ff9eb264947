//! Quadrature machinery: a 21-point Gauss-Kronrod panel rule, an adaptive
//! driver with a worst-panel-first refinement queue, and Gauss-Legendre
//! nodes for fixed-order inner products.

/// Result of integrating one panel.
#[derive(Clone, Copy, Debug)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

/// 21-point Gauss-Kronrod abscissae (positive half) and weights, with the
/// embedded 10-point Gauss weights (QUADPACK data).
#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.000_000_000_000_000_000_000_000_000_000_000,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

fn qk21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);

    let fc = f(center);
    let mut kronrod = fc * WGK[10];
    let mut gauss = 0.0;

    for (j, &x) in XGK.iter().enumerate().take(10) {
        let dx = half * x;
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        kronrod += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }

    Panel {
        a,
        b,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

/// Outcome of adaptive integration.
pub(crate) struct QuadResult {
    pub value: f64,
    pub error: f64,
}

/// Heap entry ordered by error estimate, worst first.
struct ByError(Panel);

impl PartialEq for ByError {
    fn eq(&self, other: &Self) -> bool {
        self.0.error.total_cmp(&other.0.error).is_eq()
    }
}
impl Eq for ByError {}
impl PartialOrd for ByError {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for ByError {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.error.total_cmp(&other.0.error)
    }
}

/// Integrate `f` over `[a, b]`, seeding panels no wider than `max_width`,
/// then halving the worst panel until the summed error estimate drops below
/// `abs_tol + rel_tol * |integral|` or `max_panels` is reached. A heap keyed
/// by the error estimate keeps deep refinements (sharp near-boundary peaks)
/// from going quadratic.
pub(crate) fn integrate<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    max_width: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_panels: usize,
) -> QuadResult {
    let span = b - a;
    let initial = ((span / max_width).ceil() as usize).max(1);
    let mut heap: std::collections::BinaryHeap<ByError> = (0..initial)
        .map(|i| {
            let pa = a + span * i as f64 / initial as f64;
            let pb = a + span * (i + 1) as f64 / initial as f64;
            ByError(qk21(f, pa, pb))
        })
        .collect();
    let mut value: f64 = heap.iter().map(|p| p.0.value).sum();
    let mut error: f64 = heap.iter().map(|p| p.0.error).sum();

    loop {
        let tol = abs_tol + rel_tol * value.abs();
        if error <= tol || heap.len() >= max_panels {
            break;
        }
        let worst = heap.pop().expect("heap nonempty").0;
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Panel is at machine width; nothing more to gain.
            heap.push(ByError(worst));
            break;
        }
        let left = qk21(f, worst.a, mid);
        let right = qk21(f, mid, worst.b);
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(ByError(left));
        heap.push(ByError(right));
    }

    // Fresh sums shed the incremental rounding drift of the control loop.
    QuadResult {
        value: heap.iter().map(|p| p.0.value).sum(),
        error: heap.iter().map(|p| p.0.error).sum(),
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1], computed by Newton iteration
/// on the Legendre recurrence.
pub(crate) fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre P_n(x) and derivative via the three-term recurrence.
            let mut p0 = 1.0f64;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Fixed-order Gauss-Legendre integral of `f` over `[a, b]`.
#[cfg(test)]
pub(crate) fn fixed_gauss<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    nodes: &[f64],
    weights: &[f64],
) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut sum = 0.0;
    for (&x, &w) in nodes.iter().zip(weights) {
        sum += w * f(c + h * x);
    }
    sum * h
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn integrates_smooth_oscillation() {
        // int_0^{4pi} cos(x)^2 dx = 2pi
        let r = integrate(
            &|x: f64| x.cos().powi(2),
            0.0,
            4.0 * PI,
            PI / 4.0,
            1e-14,
            1e-14,
            1000,
        );
        assert!((r.value - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn refines_a_sharp_peak() {
        // Lorentzian of width 1e-4 around x = 1; exact integral over [0, 10]
        // is atan((10-1)/w)/w + atan(1/w)/w scaled.
        let w = 1e-4;
        let f = |x: f64| 1.0 / ((x - 1.0) * (x - 1.0) + w * w);
        let exact = (((10.0 - 1.0) / w).atan() + (1.0 / w).atan()) / w;
        let r = integrate(&f, 0.0, 10.0, 0.5, 0.0, 1e-10, 20_000);
        assert!(
            ((r.value - exact) / exact).abs() < 1e-9,
            "got {} want {}",
            r.value,
            exact
        );
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (nodes, weights) = gauss_legendre(64);
        // Degree-9 polynomial on [0, 2].
        let f = |x: f64| 3.0 * x.powi(9) - x.powi(4) + 2.0;
        let exact = 3.0 * 2f64.powi(10) / 10.0 - 2f64.powi(5) / 5.0 + 2.0 * 2.0;
        let got = fixed_gauss(&f, 0.0, 2.0, &nodes, &weights);
        assert!((got - exact).abs() < 1e-11 * exact.abs());
    }
}
