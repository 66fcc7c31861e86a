//! Exponential integrals and Gauss-Legendre nodes.

/// Euler-Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Entire exponential integral Ein(u) = sum_{k>=1} (-1)^{k+1} u^k / (k k!).
///
/// Ein(u) = E1(u) + ln u + gamma for u > 0.
pub fn ein(u: f64) -> f64 {
    if u > 4.0 {
        return e1(u) + u.ln() + EULER_GAMMA;
    }
    let mut term = 1.0;
    let mut sum = 0.0;
    for k in 1..200 {
        term *= -u / k as f64;
        let add = -term / k as f64;
        sum += add;
        if add.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// Exponential integral E1(u) = int_u^inf e^{-s}/s ds for u > 0.
pub fn e1(u: f64) -> f64 {
    assert!(u > 0.0, "E1 needs a positive argument, got {u}");
    if u <= 1.0 {
        return ein(u) - u.ln() - EULER_GAMMA;
    }
    // modified Lentz evaluation of the continued fraction
    let tiny = 1e-300;
    let mut b = u + 1.0;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let an = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h * (-u).exp()
}

/// g(u) = (1 - e^{-u})/u, the derivative of Ein.
pub fn ein_prime(u: f64) -> f64 {
    if u.abs() < 1e-3 {
        1.0 - u / 2.0 + u * u / 6.0 - u * u * u / 24.0
    } else {
        -(-u).exp_m1() / u
    }
}

/// Derivative of `ein_prime`: (e^{-u}(1+u) - 1)/u^2.
pub fn ein_second(u: f64) -> f64 {
    if u.abs() < 1e-2 {
        -0.5 + u / 3.0 - u * u / 8.0 + u * u * u / 30.0
    } else {
        ((-u).exp() * (1.0 + u) - 1.0) / (u * u)
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}
