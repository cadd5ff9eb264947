//! Derivative-free 2-D minimization (Nelder-Mead) used to polish grid
//! searches over the stability region. Objectives may return `INFINITY`
//! to encode constraint violations.

pub(crate) struct NmResult {
    pub x: (f64, f64),
    pub value: f64,
}

pub(crate) fn nelder_mead_2d<F: Fn(f64, f64) -> f64>(
    f: &F,
    start: (f64, f64),
    step: (f64, f64),
    size_tol: f64,
    max_iter: usize,
) -> NmResult {
    let mut simplex = [
        start,
        (start.0 + step.0, start.1),
        (start.0, start.1 + step.1),
    ];
    let mut values = [
        f(simplex[0].0, simplex[0].1),
        f(simplex[1].0, simplex[1].1),
        f(simplex[2].0, simplex[2].1),
    ];

    for _ in 0..max_iter {
        // Order best -> worst.
        let mut idx = [0usize, 1, 2];
        idx.sort_by(|&a, &b| {
            values[a]
                .partial_cmp(&values[b])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let (best, mid, worst) = (idx[0], idx[1], idx[2]);

        let diameter = simplex
            .iter()
            .flat_map(|p| {
                simplex
                    .iter()
                    .map(move |q| ((p.0 - q.0).powi(2) + (p.1 - q.1).powi(2)).sqrt())
            })
            .fold(0.0f64, f64::max);
        if diameter < size_tol {
            break;
        }

        let centroid = (
            0.5 * (simplex[best].0 + simplex[mid].0),
            0.5 * (simplex[best].1 + simplex[mid].1),
        );
        let reflect = (
            centroid.0 + (centroid.0 - simplex[worst].0),
            centroid.1 + (centroid.1 - simplex[worst].1),
        );
        let fr = f(reflect.0, reflect.1);

        if fr < values[best] {
            let expand = (
                centroid.0 + 2.0 * (centroid.0 - simplex[worst].0),
                centroid.1 + 2.0 * (centroid.1 - simplex[worst].1),
            );
            let fe = f(expand.0, expand.1);
            if fe < fr {
                simplex[worst] = expand;
                values[worst] = fe;
            } else {
                simplex[worst] = reflect;
                values[worst] = fr;
            }
        } else if fr < values[mid] {
            simplex[worst] = reflect;
            values[worst] = fr;
        } else {
            let contract = (
                centroid.0 + 0.5 * (simplex[worst].0 - centroid.0),
                centroid.1 + 0.5 * (simplex[worst].1 - centroid.1),
            );
            let fc = f(contract.0, contract.1);
            if fc < values[worst] {
                simplex[worst] = contract;
                values[worst] = fc;
            } else {
                // Shrink toward the best vertex.
                for i in [mid, worst] {
                    simplex[i] = (
                        simplex[best].0 + 0.5 * (simplex[i].0 - simplex[best].0),
                        simplex[best].1 + 0.5 * (simplex[i].1 - simplex[best].1),
                    );
                    values[i] = f(simplex[i].0, simplex[i].1);
                }
            }
        }
    }

    let mut best = 0;
    for i in 1..3 {
        if values[i] < values[best] {
            best = i;
        }
    }
    NmResult {
        x: simplex[best],
        value: values[best],
    }
}
