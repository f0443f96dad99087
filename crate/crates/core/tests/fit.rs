use polarprior::blend_fit::{apply_step, objective, FitState};
use polarprior::normals::estimate_polar_normals;
use polarprior::stokes::{compute_dolp, compute_stokes};
use polarprior::{
    fit_maps, render_synthetic, FitConfig, FitPriors, FitTargets, LossConfig, MaterialConfig, ReflectionStrengthMap,
    SceneSpec,
};

fn scene() -> polarprior::OracleBundle {
    render_synthetic(&SceneSpec { resolution: 24, ..Default::default() }).unwrap()
}

fn perturbed(bundle: &polarprior::OracleBundle) -> FitState {
    let mut s = FitState::initial(&bundle.gt_rgb);
    for (k, v) in s.base.data_mut().iter_mut().enumerate() {
        *v = (*v * 0.8 + 0.05 * ((k * 7 % 11) as f64 / 11.0)).max(0.0);
    }
    for (k, v) in s.refl.data_mut().iter_mut().enumerate() {
        *v = 0.1 + 0.2 * ((k * 5 % 13) as f64 / 13.0);
    }
    let (w, h) = (s.strength.width(), s.strength.height());
    s.strength = ReflectionStrengthMap::new(w, h, (0..w * h).map(|k| 0.2 + 0.5 * ((k % 9) as f64 / 9.0)).collect()).unwrap();
    s
}

#[test]
fn objective_gradient_matches_finite_differences() {
    let b = scene();
    let m = MaterialConfig::new(1.5).unwrap();
    let n_pol = estimate_polar_normals(&b.stack, &m);
    let dolp = compute_dolp(&compute_stokes(&b.stack));
    let targets = FitTargets { rgb: &b.gt_rgb, sp: &b.gt_sp, dp: &b.gt_dp };
    let priors = FitPriors { n_pol: &n_pol, dolp: &dolp };
    let loss = LossConfig::default();
    let state = perturbed(&b);
    let (_, grad) = objective(&state, &targets, &priors, &loss, true).unwrap();
    let grad = grad.unwrap();
    let f = |s: &FitState| objective(s, &targets, &priors, &loss, false).unwrap().0.total;
    let h = 1e-6;
    for k in [0, 37, 200, 411] {
        let mut p = state.clone();
        let mut q = state.clone();
        p.base.data_mut()[k] += h;
        q.base.data_mut()[k] -= h;
        let fd = (f(&p) - f(&q)) / (2.0 * h);
        assert!((fd - grad.base[k]).abs() < 1e-6 * (1.0 + fd.abs()), "base {k}: fd {fd} vs {}", grad.base[k]);

        let mut p = state.clone();
        let mut q = state.clone();
        p.refl.data_mut()[k] += h;
        q.refl.data_mut()[k] -= h;
        let fd = (f(&p) - f(&q)) / (2.0 * h);
        assert!((fd - grad.refl[k]).abs() < 1e-6 * (1.0 + fd.abs()), "refl {k}: fd {fd} vs {}", grad.refl[k]);
    }
    for k in [3, 100, 333] {
        let shift = |s: f64| {
            let mut st = state.clone();
            let mut d = st.strength.data().to_vec();
            d[k] += s;
            st.strength = ReflectionStrengthMap::new(st.strength.width(), st.strength.height(), d).unwrap();
            st
        };
        let fd = (f(&shift(h)) - f(&shift(-h))) / (2.0 * h);
        assert!((fd - grad.strength[k]).abs() < 1e-6 * (1.0 + fd.abs()), "strength {k}: fd {fd} vs {}", grad.strength[k]);
    }
}

#[test]
fn small_step_decreases_the_objective() {
    let b = scene();
    let m = MaterialConfig::new(1.5).unwrap();
    let n_pol = estimate_polar_normals(&b.stack, &m);
    let dolp = compute_dolp(&compute_stokes(&b.stack));
    let targets = FitTargets { rgb: &b.gt_rgb, sp: &b.gt_sp, dp: &b.gt_dp };
    let priors = FitPriors { n_pol: &n_pol, dolp: &dolp };
    let loss = LossConfig::default();
    let mut state = perturbed(&b);
    let (before, grad) = objective(&state, &targets, &priors, &loss, true).unwrap();
    apply_step(&mut state, &grad.unwrap(), 1e-4);
    let (after, _) = objective(&state, &targets, &priors, &loss, false).unwrap();
    assert!(after.total < before.total, "{} -> {}", before.total, after.total);
    assert_eq!(state.iteration, 1);
}

#[test]
fn short_fit_is_deterministic_and_records_history() {
    let b = scene();
    let m = MaterialConfig::new(1.5).unwrap();
    let n_pol = estimate_polar_normals(&b.stack, &m);
    let dolp = compute_dolp(&compute_stokes(&b.stack));
    let targets = FitTargets { rgb: &b.gt_rgb, sp: &b.gt_sp, dp: &b.gt_dp };
    let priors = FitPriors { n_pol: &n_pol, dolp: &dolp };
    let cfg = FitConfig { iterations: [3, 4, 2], ..Default::default() };
    let a = fit_maps(&targets, &priors, &cfg).unwrap();
    let c = fit_maps(&targets, &priors, &cfg).unwrap();
    assert_eq!(a, c);
    assert_eq!(a.iteration, 9);
    assert!(!a.loss_history.is_empty());
    assert!(a.final_image().data().iter().all(|v| (0.0..=1.0).contains(v)));
}
