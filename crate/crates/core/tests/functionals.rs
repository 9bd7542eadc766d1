use bbgky_core::dynamics::PhasePoint;
use bbgky_core::functionals::library::{gaussian_profile, test_library, ObservableSpec, StateSpec};
use bbgky_core::functionals::{
    mc_integrate, mc_lebesgue, mean_value, normalization, pairing, phase_fn, reduce_state, MarginalTerm, ObservableSeq,
    SamplingSpec, StateSeq,
};

const TINY: f64 = 1e-6;

/// `D_n = λⁿ Π h(x_i)` on almost point-like spheres, sampled from `h` itself.
fn poisson_like(lambda: f64, n_max: usize) -> StateSeq {
    let sampling = SamplingSpec {
        sigma: TINY,
        ..SamplingSpec::gaussian([0.0; 3], 1.0)
    };
    let h = gaussian_profile([0.0; 3], 1.0, 1.0);
    let density = phase_fn(move |x: &[PhasePoint]| x.iter().map(&h).product());
    let mut d = StateSeq::vacuum(sampling, n_max);
    for n in 1..=n_max {
        d = d.with_density(n, lambda.powi(n as i32), density.clone());
    }
    d
}

#[test]
fn annihilation_of_separable_state_is_exact() {
    let d = poisson_like(0.7, 3);
    let a = d.annihilation();
    let h = gaussian_profile([0.0; 3], 1.0, 1.0);
    let x = [PhasePoint::new([0.3, -0.2, 0.1], [0.5, 0.0, -0.4])];
    let est = a.integrate_at(1, &x, 4096, 3).unwrap();
    let expected = 0.7 * 0.7 * h(&x[0]);
    assert!((est.value - expected).abs() < 1e-12 * expected, "{est:?} vs {expected}");
}

#[test]
fn mean_number_of_separable_state() {
    let lambda: f64 = 0.8;
    let d = poisson_like(lambda, 3);
    let n = ObservableSeq::number(TINY, 3);
    let est = mean_value(&n, &d, 20_000, 4).unwrap();
    let z = 1.0 + lambda + lambda.powi(2) / 2.0 + lambda.powi(3) / 6.0;
    let expected = (lambda + lambda.powi(2) + lambda.powi(3) / 2.0) / z;
    assert!((est.value - expected).abs() < 1e-6, "{est:?} vs {expected}");
    let zest = normalization(&d, 20_000, 4).unwrap();
    assert!((zest.value - z).abs() < 1e-6);
}

#[test]
fn creation_is_adjoint_to_annihilation() {
    let f = StateSpec::GaussianProduct {
        center: [0.0; 3],
        width: 1.3,
        beta: 1.0,
        weights: vec![0.0, 1.0, 0.8, 0.5],
    }
    .build(1.0, 3);
    let lib = test_library([0.0; 3]);
    let b = ObservableSpec::Components {
        components: vec![None, Some(lib[1].clone()), Some(lib[3].clone())],
    }
    .build(1.0, 3);
    let left = pairing(&b.creation(), &f, 50_000, 5).unwrap();
    let right = pairing(&b, &f.annihilation(), 50_000, 6).unwrap();
    assert!(left.agrees_with(&right, 5.0), "{left:?} vs {right:?}");
    assert!(left.value.abs() > 10.0 * left.stderr);
}

#[test]
fn reduced_pair_state_scales_by_normalization() {
    let d = StateSpec::GaussianProduct {
        center: [0.0; 3],
        width: 1.2,
        beta: 1.0,
        weights: vec![0.0, 0.0, 2.0],
    }
    .build(1.0, 2);
    let (f, z) = reduce_state(&d, 20_000, 7).unwrap();
    let x = [
        PhasePoint::new([0.0; 3], [0.1, 0.0, 0.0]),
        PhasePoint::new([1.5, 0.0, 0.0], [0.0, 0.2, 0.0]),
    ];
    let d2 = d.eval_exact(2, &x).unwrap();
    assert!((f.eval_exact(2, &x).unwrap() - d2 / z.value).abs() < 1e-15);
    // (I, F) over the pair component is one
    let pair_only = ObservableSpec::Kary {
        k: 2,
        function: bbgky_core::functionals::library::TestFunction::new(
            bbgky_core::functionals::library::OneBody::Constant,
        ),
    }
    .build(1.0, 2);
    let mean = pairing(&pair_only, &d.scaled(1.0 / z.value), 20_000, 7).unwrap();
    assert!((mean.value - 1.0).abs() < 1e-12, "{mean:?}");
    // the one-particle marginal integrates out the partner
    assert_eq!(f.terms(1).len(), 1);
    assert_eq!(f.terms(1)[0].extra, 1);
}

#[test]
fn expectation_and_lebesgue_integrals() {
    let spec = SamplingSpec::gaussian([0.0; 3], 1.0);
    let one = phase_fn(|_| 1.0);
    let e = mc_integrate(&one, 2, &spec, 5_000, 8).unwrap();
    assert_eq!((e.value, e.stderr), (1.0, 0.0));
    let h = gaussian_profile([0.0; 3], 1.0, 1.0);
    let dens = phase_fn(move |x: &[PhasePoint]| h(&x[0]));
    let l = mc_lebesgue(&dens, 1, &spec, 5_000, 8).unwrap();
    assert!((l.value - 1.0).abs() < 1e-12);
}

#[test]
fn terms_keep_their_weights_under_scaling() {
    let mut d = StateSeq::zero(SamplingSpec::default(), 2);
    d.push_term(
        1,
        MarginalTerm {
            weight: 2.0,
            extra: 0,
            density: phase_fn(|_| 1.5),
        },
    );
    let x = [PhasePoint::new([1.0; 3], [0.0; 3])];
    assert_eq!(d.scaled(0.5).eval_exact(1, &x), Some(1.5));
}
