//! The exponential integral `Ei(x) = −∫_{−x}^∞ e^{−t}/t dt`.

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const EPS: f64 = 1e-16;

/// `E₁(z)` for `z > 0`.
pub fn e1(z: f64) -> f64 {
    if z <= 0.0 {
        return if z == 0.0 { f64::INFINITY } else { f64::NAN };
    }
    if z <= 1.0 {
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..200 {
            term *= -z / k as f64;
            let add = term / k as f64;
            sum += add;
            if add.abs() < EPS * sum.abs() {
                break;
            }
        }
        return -EULER_GAMMA - z.ln() - sum;
    }
    // modified Lentz on the continued fraction
    let tiny = 1e-300;
    let mut b = z + 1.0;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..1000 {
        let an = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h * (-z).exp()
}

pub fn ei(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x == 0.0 {
        return f64::NEG_INFINITY;
    }
    if x < 0.0 {
        return -e1(-x);
    }
    if x <= 40.0 {
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..400 {
            term *= x / k as f64;
            let add = term / k as f64;
            sum += add;
            if add < EPS * sum {
                break;
            }
        }
        return EULER_GAMMA + x.ln() + sum;
    }
    // asymptotic: e^x/x Σ k!/x^k, truncated at the smallest term
    let mut sum = 1.0;
    let mut term = 1.0;
    for k in 1..(x as usize) {
        let next = term * k as f64 / x;
        if next < EPS * sum {
            break;
        }
        term = next;
        sum += term;
    }
    x.exp() / x * sum
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `E₁(z) = e^{−z} ∫₀^∞ e^{−u}/(z+u) du` by composite Simpson.
    fn e1_quadrature(z: f64) -> f64 {
        let (a, b, n) = (0.0, 60.0, 600_000);
        let h: f64 = (b - a) / n as f64;
        let f = |u: f64| (-u).exp() / (z + u);
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        (-z).exp() * s * h / 3.0
    }

    #[test]
    fn matches_quadrature_oracle_on_negative_axis() {
        for z in [0.05, 0.5, 1.0, 1.5, 3.0, 10.0, 30.0] {
            let got = -ei(-z);
            let want = e1_quadrature(z);
            assert!(
                (got - want).abs() <= 1e-11 * want.abs().max(1e-300),
                "z={z}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn positive_axis_is_continuous_at_the_switch() {
        let below = ei(40.0 - 1e-12);
        let above = ei(40.0 + 1e-12);
        assert!((below - above).abs() / below < 1e-9);
        assert!((ei(1.0) - 1.895_117_816_355_936_8).abs() < 1e-14);
    }

    #[test]
    fn limits() {
        assert_eq!(ei(0.0), f64::NEG_INFINITY);
        assert!(ei(-800.0) == 0.0 || ei(-800.0).abs() < 1e-300);
        assert!(ei(-1e-12).is_finite());
    }
}
