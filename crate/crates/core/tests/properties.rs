use nalgebra::DMatrix;
use proptest::prelude::*;
use tiltcopula::copulas::*;
use tiltcopula::estimators::*;
use tiltcopula::oracle;
use tiltcopula::parallel::pool_with;
use tiltcopula::randkit::{make_stream, MarginSpec};
use tiltcopula::tilting::*;

fn gauss(rho: f64) -> Model {
    CopulaSpec::gaussian(equicorrelation(2, rho), vec![MarginSpec::std_normal(); 2]).unwrap().into()
}

fn student(rho: f64) -> Model {
    CopulaSpec::student_t(5.0, equicorrelation(2, rho), vec![MarginSpec::student_t(2.0).unwrap(); 2]).unwrap().into()
}

fn clayton() -> Model {
    CopulaSpec::clayton(3.0, 2, vec![MarginSpec::std_normal(); 2]).unwrap().into()
}

fn corner(model: &Model, p: f64) -> EventSpec {
    EventSpec::Corner(CornerEvent::equal(model.dim(), p, Direction::Upper))
}

fn scheme(model: &Model, p: f64, kind: TiltKind) -> Scheme {
    Scheme::new(model.clone(), model.prepare_event(&CornerEvent::equal(model.dim(), p, Direction::Upper)).unwrap(), kind).unwrap()
}

/// Every tilting family paired with an interior θ.
fn families() -> Vec<(TiltFamily, Vec<f64>)> {
    let s = equicorrelation(2, 0.4);
    vec![
        (TiltFamily::trunc_exp_product(2), vec![3.0, -2.0]),
        (TiltFamily::hazard_rate(2), vec![0.5]),
        (TiltFamily::mvn_shift(s.clone()).unwrap(), vec![0.8, 0.3]),
        (TiltFamily::t_gamma_normal(5.0, s, vec![1.0, 1.2]).unwrap(), vec![0.4, 0.3]),
        (TiltFamily::clayton_mo(3.0, 2).unwrap(), vec![0.5, 2.0, 1.0]),
    ]
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

#[test]
fn likelihood_ratio_integrates_to_one() {
    for (fam, theta) in families() {
        let mut s = make_stream(11, 0);
        let w: Vec<f64> = (0..40_000).map(|_| fam.sample_tilted(&mut s, &theta, false).unwrap().log_lr.exp()).collect();
        let (m, se) = mean_se(&w);
        assert!((m - 1.0).abs() < 4.0 * se, "{:?}: E_Q[LR] = {m} ± {se}", fam.kind());
    }
}

#[test]
fn tilted_estimators_are_unbiased_at_arbitrary_theta() {
    let cases: Vec<(Model, f64, Method, Vec<f64>)> = vec![
        (gauss(0.5), 1.0, Method::IsT1, vec![5.0, 2.0]),
        (gauss(0.5), 1.0, Method::IsT2, vec![0.9, 0.7]),
        (gauss(0.5), 1.0, Method::IsT3, vec![0.4]),
        (student(0.0), 2.0, Method::IsT2, vec![1.5, 1.5]),
        (student(0.0), 2.0, Method::IsLd, vec![1.0, 1.2]),
        (clayton(), 1.2, Method::IsT2, vec![0.7, 3.0, 3.0]),
    ];
    for (model, p, method, theta) in cases {
        let truth = oracle::corner_prob(&model, &CornerEvent::equal(2, p, Direction::Upper)).unwrap();
        let mut cfg = ExperimentConfig::new(model.clone(), corner(&model, p), method);
        cfg.n = 500;
        cfg.reps = 200;
        cfg.seed = 5;
        cfg.theta = ThetaSource::Explicit(theta.clone());
        let r = replicate(&cfg).unwrap();
        let z = (r.u_hat - truth) / r.std_err();
        assert!(z.abs() < 4.0, "{} {:?} θ={theta:?}: û={} truth={truth} z={z}", model.name(), method, r.u_hat);
    }
}

#[test]
fn theta_zero_reproduces_crude_draws_bit_for_bit() {
    // direct constructions: tilted at 0 equals the crude estimator exactly
    for (model, method) in [(gauss(0.3), Method::IsT2), (student(0.5), Method::IsT2), (student(0.5), Method::IsLd), (clayton(), Method::IsT2)] {
        let mut cfg = ExperimentConfig::new(model.clone(), corner(&model, 1.0), method);
        cfg.n = 300;
        cfg.reps = 20;
        cfg.seed = 9;
        let k = scheme_for(&cfg).unwrap().unwrap().family().theta_dim();
        let tilted = estimate_is(&cfg, &vec![0.0; k]).unwrap();
        let crude = estimate_crude(&cfg).unwrap();
        assert_eq!(tilted.u_hat.to_bits(), crude.u_hat.to_bits(), "{} {:?}", model.name(), method);
        assert_eq!(tilted.sd.to_bits(), crude.sd.to_bits());
        assert_eq!(tilted.hits, crude.hits);
    }
    // conditional inverse: both uniform tilts at 0 are the identity on V
    for model in [gauss(0.3), student(-0.5), clayton(), RVineSpec::example_3d().into()] {
        let p = if model.name() == "rvine" { 0.8 } else { 1.0 };
        let mut cfg = ExperimentConfig::new(model.clone(), corner(&model, p), Method::IsT1);
        cfg.n = 300;
        cfg.reps = 20;
        let t1 = estimate_is(&cfg, &vec![0.0; model.dim()]).unwrap();
        let t3 = estimate_hrt(&cfg, 0.0).unwrap();
        cfg.crude_route = CrudeRoute::ConditionalInverse;
        let crude = estimate_crude(&cfg).unwrap();
        assert_eq!(t1.u_hat.to_bits(), t3.u_hat.to_bits(), "{}", model.name());
        assert_eq!(t1.u_hat.to_bits(), crude.u_hat.to_bits(), "{}", model.name());
    }
    // the vine's direct sampler is the conditional inverse
    let v: Model = RVineSpec::example_4d().into();
    let cfg = ExperimentConfig { n: 200, reps: 10, ..ExperimentConfig::new(v.clone(), corner(&v, 0.8), Method::IsT1) };
    assert_eq!(estimate_is(&cfg, &[0.0; 4]).unwrap().u_hat.to_bits(), estimate_crude(&cfg).unwrap().u_hat.to_bits());
}

#[test]
fn replications_are_thread_count_invariant() {
    for (model, method) in [(gauss(0.5), Method::IsT1), (student(0.0), Method::IsT2), (RVineSpec::example_3d().into(), Method::IsT3)] {
        let p = if model.name() == "rvine" { 0.9 } else { 1.5 };
        let mut cfg = ExperimentConfig::new(model.clone(), corner(&model, p), method);
        cfg.n = 200;
        cfg.reps = 40;
        cfg.seed = 123;
        cfg.pilot.n_pilot = 5000;
        let a = replicate_in(&pool_with(1), &cfg).unwrap();
        let b = replicate_in(&pool_with(4), &cfg).unwrap();
        assert_eq!(a.u_hat.to_bits(), b.u_hat.to_bits());
        assert_eq!(a.sd.to_bits(), b.sd.to_bits());
        assert_eq!(a.theta, b.theta);
        assert_eq!(a.hits, b.hits);
    }
}

#[test]
fn first_order_condition_holds_at_the_solution() {
    let cases = [(gauss(0.0), 1.282, TiltKind::TruncExpProduct), (gauss(0.5), 1.712, TiltKind::MvnShift), (clayton(), 1.6, TiltKind::ClaytonMo)];
    for (model, p, kind) in cases {
        let sc = scheme(&model, p, kind);
        let sol = solve_theta_saa(&sc, &PilotConfig::default(), &mut make_stream(1, 1 << 62)).unwrap();
        assert!(sol.converged);
        let foc = first_order_check(&sc, &sol.theta, 20_000, &mut make_stream(2, 77)).unwrap();
        assert!(foc.max_abs_z < 3.0, "{kind:?}: {foc:?}");
    }
}

#[test]
fn g_hat_is_convex_along_random_chords() {
    let setups = [
        (gauss(0.0), 1.0, TiltKind::TruncExpProduct, vec![4.0, 4.0]),
        (gauss(0.5), 1.0, TiltKind::MvnShift, vec![1.0, 1.0]),
        (gauss(0.0), 1.0, TiltKind::HazardRate, vec![0.4]),
        (student(0.0), 2.0, TiltKind::TGammaNormal, vec![1.5, 1.5]),
        (clayton(), 1.2, TiltKind::ClaytonMo, vec![0.7, 3.0, 3.0]),
    ];
    for (model, p, kind, theta0) in setups {
        let sc = scheme(&model, p, kind);
        let pilot = Pilot::draw(&sc, &theta0, 4000, &mut make_stream(3, 0)).unwrap();
        let fam = sc.family();
        let mut s = make_stream(4, 0);
        let mut draw = || -> Vec<f64> {
            loop {
                let t: Vec<f64> = theta0.iter().map(|&c| c + (s.uniform() - 0.5) * if c.abs() < 1.0 { 0.5 } else { 2.0 }).collect();
                if fam.in_domain(&t) {
                    return t;
                }
            }
        };
        for _ in 0..100 {
            let (a, b) = (draw(), draw());
            let m: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
            let (ga, gb, gm) = (g_hat(fam, &a, &pilot).unwrap(), g_hat(fam, &b, &pilot).unwrap(), g_hat(fam, &m, &pilot).unwrap());
            assert!(gm <= 0.5 * ga + 0.5 * gb + 1e-12 * ga.max(gb), "{kind:?}: Ĝ(m)={gm} > mean({ga}, {gb})");
        }
    }
}

fn fd_grad(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut p = x.to_vec();
            let mut m = x.to_vec();
            p[i] += h;
            m[i] -= h;
            (f(&p) - f(&m)) / (2.0 * h)
        })
        .collect()
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * x.abs().max(1.0))
}

fn family_and_theta() -> impl Strategy<Value = (usize, Vec<f64>)> {
    (0usize..5, prop::collection::vec(-1.0f64..1.0, 3)).prop_map(|(i, r)| {
        let t = match i {
            0 => vec![8.0 * r[0], 20.0 * r[1]],
            1 => vec![0.9 * r[0]],
            2 => vec![2.0 * r[0], 2.0 * r[1]],
            3 => vec![0.3 * r[0], 0.3 * r[1]],
            _ => vec![0.9 * r[0], 5.0 * r[1], 5.0 * r[2]],
        };
        (i, t)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn psi_gradient_matches_finite_differences((i, theta) in family_and_theta()) {
        let (fam, _) = &families()[i];
        let g = fam.grad_psi(&theta).unwrap();
        let fd = fd_grad(|t| fam.psi_unchecked(t), &theta, 1e-5);
        prop_assert!(close(&g, &fd, 1e-6), "{:?} θ={theta:?}: {g:?} vs {fd:?}", fam.kind());
        let h = fam.hess_psi(&theta).unwrap();
        for j in 0..theta.len() {
            let col = fd_grad(|t| fam.grad_psi(t).unwrap()[j], &theta, 1e-5);
            let row: Vec<f64> = h.row(j).iter().copied().collect();
            prop_assert!(close(&row, &col, 1e-6), "{:?} Hessian row {j}: {row:?} vs {col:?}", fam.kind());
        }
    }

    #[test]
    fn conjugate_tilt_equals_negated_theta((i, theta) in family_and_theta(), seed in any::<u64>()) {
        let (fam, _) = &families()[i];
        let neg: Vec<f64> = theta.iter().map(|t| -t).collect();
        prop_assume!(fam.in_domain(&neg));
        let a = fam.sample_tilted(&mut make_stream(seed, 0), &theta, true).unwrap();
        let b = fam.sample_tilted(&mut make_stream(seed, 0), &neg, false).unwrap();
        prop_assert_eq!(a.stat.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), b.stat.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
        prop_assert_eq!(a.aux.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), b.aux.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn psi_vanishes_at_zero_and_is_convex((i, a) in family_and_theta(), (_j, b) in family_and_theta(), lam in 0.0f64..1.0) {
        let (fam, _) = &families()[i];
        prop_assume!(a.len() == b.len() && fam.in_domain(&b));
        prop_assert!(fam.psi(&vec![0.0; a.len()]).unwrap().abs() < 1e-15);
        let m: Vec<f64> = a.iter().zip(&b).map(|(x, y)| lam * x + (1.0 - lam) * y).collect();
        let lhs = fam.psi(&m).unwrap();
        let rhs = lam * fam.psi(&a).unwrap() + (1.0 - lam) * fam.psi(&b).unwrap();
        prop_assert!(lhs <= rhs + 1e-10 * rhs.abs().max(1.0));
    }

    #[test]
    fn log_g_hat_gradient_matches_finite_differences(t0 in 1.0f64..8.0, t1 in 1.0f64..8.0, w in 0.5f64..1.5) {
        let sc = scheme(&gauss(0.3), 1.2, TiltKind::TruncExpProduct);
        let pilot = Pilot::draw(&sc, &[4.0, 4.0], 3000, &mut make_stream(8, 0)).unwrap();
        let fam = sc.family();
        let theta = [t0, t1];
        let (_, g, _) = log_g_hat_derivatives(fam, &theta, &pilot).unwrap();
        let fd = fd_grad(|t| g_hat(fam, t, &pilot).unwrap().ln(), &theta, 1e-5);
        prop_assert!(close(&g, &fd, 1e-6), "{g:?} vs {fd:?}");
        let sc2 = scheme(&clayton(), 1.2, TiltKind::ClaytonMo);
        let pilot2 = Pilot::draw(&sc2, &[0.7, 3.0, 3.0], 3000, &mut make_stream(8, 1)).unwrap();
        let th2 = [0.5 * w, t0, t1];
        let (_, g2, _) = log_g_hat_derivatives(sc2.family(), &th2, &pilot2).unwrap();
        let fd2 = fd_grad(|t| g_hat(sc2.family(), t, &pilot2).unwrap().ln(), &th2, 1e-6);
        prop_assert!(close(&g2, &fd2, 1e-6), "{g2:?} vs {fd2:?}");
    }

    #[test]
    fn pair_h_functions_round_trip(fam in 0usize..7, par in 0.05f64..0.95, v1 in 0.001f64..0.999, v2 in 0.001f64..0.999) {
        let spec = match fam {
            0 => format!("gaussian rho={}", 1.8 * par - 0.9),
            1 => format!("t nu=5 rho={}", 1.8 * par - 0.9),
            2 => format!("clayton delta={}", 0.2 + 8.0 * par),
            3 => format!("gumbel delta={}", 1.05 + 6.0 * par),
            4 => format!("frank delta={}", 20.0 * par - 10.0),
            5 => format!("joe delta={}", 1.05 + 6.0 * par),
            _ => "indep".to_string(),
        };
        let pc = PairCopula::parse(&spec).unwrap();
        let q = pc.h(v2, v1);
        prop_assume!(q > 1e-6 && q < 1.0 - 1e-6);
        let back = pc.h_inv(q, v1);
        prop_assert!((back - v2).abs() < 1e-7, "{spec}: v2={v2} v1={v1} q={q} back={back}");
    }

    #[test]
    fn rosenblatt_round_trips(u in prop::collection::vec(0.001f64..0.999, 4), which in 0usize..5) {
        let model: Model = match which {
            0 => RVineSpec::example_3d().into(),
            1 => RVineSpec::example_4d().into(),
            2 => CopulaSpec::gaussian(equicorrelation(4, 0.5), vec![MarginSpec::std_normal(); 4]).unwrap().into(),
            3 => CopulaSpec::student_t(5.0, equicorrelation(3, -0.3), vec![MarginSpec::std_normal(); 3]).unwrap().into(),
            _ => CopulaSpec::clayton(3.0, 4, vec![MarginSpec::std_normal(); 4]).unwrap().into(),
        };
        let u = &u[..model.dim()];
        let v = model.rosenblatt_forward(u).unwrap();
        // within 1e-6 of 0 or 1 a double no longer pins down the preimage to 1e-7
        prop_assume!(v.iter().all(|&x| x > 1e-6 && x < 1.0 - 1e-6));
        let back = model.rosenblatt_inverse(&v).unwrap();
        for (a, b) in u.iter().zip(&back) {
            prop_assert!((a - b).abs() < 1e-7, "{}: {u:?} -> {back:?}", model.name());
        }
    }
}

#[test]
fn oracles_agree_with_crude_monte_carlo() {
    let m = CopulaSpec::gaussian(DMatrix::from_row_slice(3, 3, &[1.0, 0.3, 0.1, 0.3, 1.0, 0.5, 0.1, 0.5, 1.0]), vec![MarginSpec::std_normal(); 3])
        .unwrap()
        .into();
    for model in [m, student(0.5), clayton()] {
        let p = 0.7;
        let truth = oracle::corner_prob(&model, &CornerEvent::equal(model.dim(), p, Direction::Upper)).unwrap();
        let cfg = ExperimentConfig { n: 1000, reps: 100, seed: 17, ..ExperimentConfig::new(model.clone(), corner(&model, p), Method::Naive) };
        let r = estimate_crude(&cfg).unwrap();
        assert!(((r.u_hat - truth) / r.std_err()).abs() < 4.0, "{}: {} vs {truth}", model.name(), r.u_hat);
    }
}
