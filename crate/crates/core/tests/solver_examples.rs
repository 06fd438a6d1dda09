use heteroclinic::diagnostics::shooting_oracle_scalar;
use heteroclinic::{
    discrete_energy, linear_competitor, make_profile, minimize, modica_lower_bound, solve_heteroclinic, Grid,
    InhomogeneityProfile, PotentialSpec, Profile, ProfileParams, SolveConfig,
};

fn interpolate(u: &Profile, x: f64) -> f64 {
    let g = u.grid();
    let t = (x - g.x(0)) / g.spacing();
    let i = (t.floor() as usize).min(g.node_count() - 2);
    let f = t - i as f64;
    (1.0 - f) * u.node(i)[0] + f * u.node(i + 1)[0]
}

#[test]
fn short_initial_onset_still_certifies() {
    let p = PotentialSpec::quartic();
    let cfg = SolveConfig { l: 2.0, ..Default::default() };
    let (_, r) = solve_heteroclinic(&p, &InhomogeneityProfile::constant(), &cfg).unwrap();
    assert!(r.tube_certificate);
    assert!(r.el_residual_max <= 1e-4, "residual {}", r.el_residual_max);
}

#[test]
fn periodic_weight_certifies() {
    let p = PotentialSpec::quartic();
    let h = make_profile(ProfileParams::Periodic { period: 1.0, base: 1.5, amp: 0.5 }).unwrap();
    let (_, r) = solve_heteroclinic(&p, &h, &SolveConfig::default()).unwrap();
    assert!(r.tube_certificate);
    assert!(r.el_residual_max <= 1e-3, "residual {}", r.el_residual_max);
}

#[test]
fn diverging_weight_has_lighter_tails() {
    let p = PotentialSpec::quartic();
    let cfg = SolveConfig::default();
    let h = make_profile(ProfileParams::Diverging { alpha: 1.0, c0: 0.0 }).unwrap();
    let (_, steep) = solve_heteroclinic(&p, &h, &cfg).unwrap();
    let (_, flat) = solve_heteroclinic(&p, &InhomogeneityProfile::constant(), &cfg).unwrap();
    assert!(steep.tube_certificate && flat.tube_certificate);
    assert_eq!(steep.l, flat.l);
    assert!(steep.tail_energy < flat.tail_energy, "{} vs {}", steep.tail_energy, flat.tail_energy);
}

#[test]
fn scaling_the_potential_rescales_space() {
    let p = PotentialSpec::quartic();
    let h = InhomogeneityProfile::constant();
    let cfg = SolveConfig::default();
    let (u1, r1) = solve_heteroclinic(&p, &h, &cfg).unwrap();
    let (u4, r4) = solve_heteroclinic(&p.scaled(4.0), &h, &cfg).unwrap();
    let g = u4.grid();
    let sup = (0..g.node_count())
        .map(|i| g.x(i))
        .filter(|x| (2.0 * x).abs() <= g.x(g.node_count() - 1))
        .map(|x| (interpolate(&u4, x) - interpolate(&u1, 2.0 * x)).abs())
        .fold(0.0f64, f64::max);
    assert!(sup <= 5e-3, "sup {sup}");
    let ratio = r4.energy / r1.energy;
    assert!((ratio / 2.0 - 1.0).abs() <= 1e-3, "ratio {ratio}");
}

#[test]
fn energy_sits_on_the_modica_bound() {
    let p = PotentialSpec::quartic();
    let (_, r) = solve_heteroclinic(&p, &InhomogeneityProfile::constant(), &SolveConfig::default()).unwrap();
    let bound = modica_lower_bound(&p, 20001);
    assert!(r.energy >= bound - 1e-4 && r.energy <= bound + 5e-4, "{} vs {bound}", r.energy);
}

/// Exact hits of a well happen only where the rest of that tail already sits
/// on the well up to roundoff, and no node overshoots a well.
#[test]
fn wells_are_reached_only_in_terminal_tails() {
    let p = PotentialSpec::quartic();
    let (lo, hi) = (p.a_minus()[0], p.a_plus()[0]);
    let weights = [
        InhomogeneityProfile::constant(),
        make_profile(ProfileParams::Diverging { alpha: 1.0, c0: 0.0 }).unwrap(),
    ];
    for h in &weights {
        let (u, r) = solve_heteroclinic(&p, h, &SolveConfig::default()).unwrap();
        assert!(r.tube_certificate);
        let v: Vec<f64> = (0..u.len()).map(|i| u.node(i)[0]).collect();
        let n = v.len();
        assert!(v.iter().all(|&x| x >= lo - 1e-14 && x <= hi + 1e-14));
        for i in 1..n - 1 {
            if v[i] == hi {
                assert!(v[i..].iter().all(|x| (x - hi).abs() <= 1e-14), "a_+ reached at interior node {i}");
            }
            if v[i] == lo {
                assert!(v[..=i].iter().all(|x| (x - lo).abs() <= 1e-14), "a_- reached at interior node {i}");
            }
        }
    }
}

#[test]
fn energy_stays_below_competitor_for_each_onset() {
    let p = PotentialSpec::quartic();
    let h = make_profile(ProfileParams::Periodic { period: 1.0, base: 1.5, amp: 0.5 }).unwrap();
    for l in [2.0, 3.0, 5.0, 8.0] {
        let cfg = SolveConfig::with_spacing(l, 0.02);
        let lin = linear_competitor(&p, &cfg.grid().unwrap()).unwrap();
        let (_, r) = minimize(&p, &h, &cfg, None).unwrap();
        assert!(r.energy <= discrete_energy(&p, &h, &lin), "L = {l}");
    }
}

#[test]
fn solver_matches_shooting_for_even_weights() {
    let p = PotentialSpec::quartic();
    let weights = [
        InhomogeneityProfile::constant(),
        make_profile(ProfileParams::Diverging { alpha: 1.0, c0: 0.0 }).unwrap(),
        make_profile(ProfileParams::Diverging { alpha: 2.0, c0: 1.0 }).unwrap(),
    ];
    for h in &weights {
        let (u, r) = solve_heteroclinic(&p, h, &SolveConfig::default()).unwrap();
        assert!(r.tube_certificate);
        let o = shooting_oracle_scalar(&p, h, u.grid()).unwrap();
        let gap = u.sup_distance(&o);
        assert!(gap <= 1e-3, "gap {gap}");
    }
}

#[test]
fn periodic_energy_is_invariant_under_period_shifts() {
    let p = PotentialSpec::quartic();
    let h = make_profile(ProfileParams::Periodic { period: 1.0, base: 1.5, amp: 0.5 }).unwrap();
    let g = Grid::with_spacing(20.0, 0.01).unwrap();
    let bump = |x0: f64| Profile::from_fn(g.clone(), 1, move |x| vec![((x - x0) / 0.7).tanh()]);
    let base = discrete_energy(&p, &h, &bump(0.3));
    for k in [-3.0, -1.0, 2.0, 4.0] {
        let e = discrete_energy(&p, &h, &bump(0.3 + k));
        assert!((e - base).abs() <= 1e-10 * base, "shift {k}: {e} vs {base}");
    }
}
