use hepflow::functor::FunctorExpr;
use hepflow::integration::{gk_adaptive, plain_mc, vegas, VegasConfig};
use hepflow::param::ParamSet;
use hepflow::parallel::WorkerPool;
use hepflow::rng::{uniform, RngKey};
use hepflow::sampling::BoundedRegion;

/// `(1 + Σ cᵢxᵢ + c' x₀x₁) · exp(−|x − μ|²/2s²)` on [0,1]², with draws from `key`.
fn random_integrand(key: RngKey) -> FunctorExpr {
    let u: Vec<f64> = (0..6).map(|i| uniform(key.at(i))).collect();
    let (c0, c1, c01) = (u[0], u[1], u[2]);
    let (m0, m1) = (0.2 + 0.6 * u[3], 0.2 + 0.6 * u[4]);
    let s = 0.15 + 0.3 * u[5];
    FunctorExpr::wrap(2, ParamSet::new(), move |x, _| {
        let r2 = (x[0] - m0).powi(2) + (x[1] - m1).powi(2);
        (1.0 + c0 * x[0] + c1 * x[1] + c01 * x[0] * x[1]) * (-0.5 * r2 / (s * s)).exp()
    })
}

#[test]
fn plain_and_vegas_agree_on_random_smooth_integrands() {
    let region = BoundedRegion::cube(2, 0.0, 1.0).unwrap();
    let pool = WorkerPool::new(2);
    let cfg = VegasConfig {
        calls_per_iteration: 20_000,
        iterations: 5,
        ..Default::default()
    };
    for trial in 0..20u64 {
        let f = random_integrand(RngKey::new(1000 + trial, 9, 0));
        let p = plain_mc(&f, &region, 200_000, RngKey::new(trial, 0, 0), &pool).unwrap();
        let v = vegas(&f, &region, &cfg, RngKey::new(trial, 0, 1 << 40), &pool)
            .unwrap()
            .result;
        let combined = (p.error.powi(2) + v.error.powi(2)).sqrt();
        assert!(
            (p.value - v.value).abs() < 3.0 * combined,
            "trial {trial}: plain {p:?} vegas {v:?}"
        );
    }
}

#[test]
fn gk_adaptive_matches_erf_oracle() {
    let f = FunctorExpr::wrap(1, ParamSet::new(), |x, _| (-x[0] * x[0]).exp());
    let r = gk_adaptive(&f, -2.0, 3.0, 1e-12, 200).unwrap();
    // √π/2·(erf 3 + erf 2), Python math.erf
    let truth = 1.7682887390219426;
    assert!((r.value - truth).abs() < 1e-12 * truth, "{r:?}");
}
