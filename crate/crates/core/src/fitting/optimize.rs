//! Small derivative-free minimizers for the two-parameter power-law fit.

/// Nelder-Mead on a 2-D objective. Non-finite values act as walls.
pub(crate) fn nelder_mead(
    f: impl Fn([f64; 2]) -> f64,
    start: [f64; 2],
    step: [f64; 2],
    tol: f64,
    max_iter: usize,
) -> ([f64; 2], f64) {
    let eval = |x: [f64; 2]| {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let mut simplex = [start, [start[0] + step[0], start[1]], [start[0], start[1] + step[1]]];
    let mut fx = simplex.map(eval);

    for _ in 0..max_iter {
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| fx[a].total_cmp(&fx[b]));
        simplex = order.map(|i| simplex[i]);
        fx = order.map(|i| fx[i]);

        let spread = (fx[2] - fx[0]).abs();
        let size = (0..2)
            .map(|d| (simplex[1][d] - simplex[0][d]).abs().max((simplex[2][d] - simplex[0][d]).abs()))
            .fold(0.0, f64::max);
        if size < tol && (spread <= tol * (1.0 + fx[0].abs()) || !fx[2].is_finite()) {
            break;
        }

        let centroid = [0.5 * (simplex[0][0] + simplex[1][0]), 0.5 * (simplex[0][1] + simplex[1][1])];
        let along =
            |c: f64| [centroid[0] + c * (simplex[2][0] - centroid[0]), centroid[1] + c * (simplex[2][1] - centroid[1])];

        let reflected = along(-1.0);
        let fr = eval(reflected);
        if fr < fx[0] {
            let expanded = along(-2.0);
            let fe = eval(expanded);
            if fe < fr {
                simplex[2] = expanded;
                fx[2] = fe;
            } else {
                simplex[2] = reflected;
                fx[2] = fr;
            }
            continue;
        }
        if fr < fx[1] {
            simplex[2] = reflected;
            fx[2] = fr;
            continue;
        }
        let contracted = if fr < fx[2] { along(-0.5) } else { along(0.5) };
        let fc = eval(contracted);
        if fc < fx[2].min(fr) {
            simplex[2] = contracted;
            fx[2] = fc;
            continue;
        }
        // shrink toward the best vertex
        for i in 1..3 {
            simplex[i] = [
                simplex[0][0] + 0.5 * (simplex[i][0] - simplex[0][0]),
                simplex[0][1] + 0.5 * (simplex[i][1] - simplex[0][1]),
            ];
            fx[i] = eval(simplex[i]);
        }
    }
    let best = (0..3).min_by(|&a, &b| fx[a].total_cmp(&fx[b])).unwrap();
    (simplex[best], fx[best])
}

/// Golden-section search for a minimum of `f` on `[lo, hi]`.
pub(crate) fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let eval = |x: f64| {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let mut a = hi - INV_PHI * (hi - lo);
    let mut b = lo + INV_PHI * (hi - lo);
    let mut fa = eval(a);
    let mut fb = eval(b);
    while hi - lo > tol {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - INV_PHI * (hi - lo);
            fa = eval(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + INV_PHI * (hi - lo);
            fb = eval(b);
        }
    }
    if fa <= fb {
        (a, fa)
    } else {
        (b, fb)
    }
}
