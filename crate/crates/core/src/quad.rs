//! Adaptive Gauss–Kronrod (7/15) quadrature.

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

/// One 15-point Kronrod estimate and its difference from the embedded Gauss rule.
fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Panel budget; once spent, remaining panels are accepted as they are.
const MAX_PANELS: usize = 4_000;

/// `∫_a^b f` to absolute tolerance `abs_tol` plus relative tolerance `rel_tol`.
/// Returns the estimate and the accumulated error bound.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> (f64, f64) {
    if a == b {
        return (0.0, 0.0);
    }
    let mut pending = vec![(a, b, 0usize)];
    let mut total = 0.0;
    let mut err = 0.0;
    let whole = gk15(&mut f, a, b).0.abs();
    if !whole.is_finite() {
        return (f64::NAN, f64::INFINITY);
    }
    let mut panels = 0;
    while let Some((lo, hi, depth)) = pending.pop() {
        let (v, e) = gk15(&mut f, lo, hi);
        if !v.is_finite() {
            return (f64::NAN, f64::INFINITY);
        }
        panels += 1;
        let share = (hi - lo).abs() / (b - a).abs();
        if e <= (abs_tol + rel_tol * whole) * share || depth >= 40 || panels + pending.len() >= MAX_PANELS {
            total += v;
            err += e;
        } else {
            let mid = 0.5 * (lo + hi);
            pending.push((lo, mid, depth + 1));
            pending.push((mid, hi, depth + 1));
        }
    }
    (total, err)
}
