use orient_rds::fixtures::{band_limited, ridge};
use orient_rds::rds::run_rds_observed;
use orient_rds::{
    build_cake_wavelets, inpaint_relift, lift, project, run_rds, stable_timestep, Image, Mask,
    RdsInput, RdsParams, Volume,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_volume(size: usize, k: usize, seed: u64) -> Volume {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..size * size * k)
        .map(|_| rng.gen_range(0.0..1.0))
        .collect();
    Volume::new(size, size, k, data).unwrap()
}

fn oscillation(v: &Volume) -> f64 {
    let (lo, hi) = v.min_max();
    hi - lo
}

fn tau_for(v: &Volume, p: &RdsParams) -> f64 {
    stable_timestep(p, 1.0, v.dtheta())
}

#[test]
fn pure_diffusion_never_widens_the_range() {
    let v = random_volume(16, 8, 4);
    // with a huge contrast parameter the switch is one everywhere
    let p = RdsParams {
        lambda: 1e12,
        ..RdsParams::default()
    };
    let t = 20.0 * tau_for(&v, &p);
    let mut last = f64::INFINITY;
    run_rds_observed(RdsInput::Volume(&v), &p, t, None, &mut |_, _, s| {
        let osc = oscillation(&s.u);
        assert!(osc <= last + 1e-14, "{osc} > {last}");
        last = osc;
    })
    .unwrap();
    assert!(last < oscillation(&v));
}

#[test]
fn evolution_commutes_with_quarter_turns() {
    let w = build_cake_wavelets(8, 15, 3, 0.8).unwrap();
    let v = lift(&band_limited(32, 1.0, 6, 9), &w).unwrap();
    let p = RdsParams {
        lambda: 0.1,
        ..RdsParams::with_anisotropy(0.3, 0.3).unwrap()
    };
    let t = 5.0 * tau_for(&v, &p);
    let a = run_rds(RdsInput::Volume(&v.rotate90().unwrap()), &p, t, None).unwrap();
    let b = run_rds(RdsInput::Volume(&v), &p, t, None).unwrap();
    let b = b.volume.rotate90().unwrap();
    let err: f64 = a
        .volume
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).powi(2))
        .sum();
    let norm: f64 = b.data().iter().map(|y| y * y).sum();
    assert!((err / norm).sqrt() <= 1e-3);
}

#[test]
fn shock_switch_erodes_at_the_crest_of_a_ridge() {
    let w = build_cake_wavelets(16, 31, 3, 0.8).unwrap();
    let v = lift(&ridge(48, 0.0, 2.0), &w).unwrap();
    let out = run_rds_observed(
        RdsInput::Volume(&v),
        &RdsParams::default(),
        0.0,
        None,
        &mut |_, _, s| {
            // the crest of a bright line is concave, so the switch is negative
            // and the morphological term dilates it
            let idx = s.u.index(24, 24, 0);
            assert!(s.s_switch.data()[idx] < 0.0, "{}", s.s_switch.data()[idx]);
        },
    )
    .unwrap();
    assert_eq!(out.steps, 0);
}

#[test]
fn zero_time_returns_the_projected_lift() {
    let w = build_cake_wavelets(8, 15, 3, 0.8).unwrap();
    let f = band_limited(24, 1.0, 4, 2);
    let out = run_rds(RdsInput::Image(&f, &w), &RdsParams::default(), 0.0, None).unwrap();
    assert_eq!(out.image, project(&lift(&f, &w).unwrap()));
}

#[test]
fn clamped_voxels_keep_their_initial_value() {
    let v = random_volume(12, 4, 6);
    let mask = Mask::from_image_fn(12, 12, |x, y| (x * 7 + y * 3) % 5 == 0);
    let p = RdsParams::default();
    let out = run_rds(
        RdsInput::Volume(&v),
        &p,
        10.0 * tau_for(&v, &p),
        Some(&mask),
    )
    .unwrap();
    let mut changed = 0;
    for k in 0..4 {
        for y in 0..12 {
            for x in 0..12 {
                let (a, b) = (out.volume.get(x, y, k), v.get(x, y, k));
                if mask.get(x, y, 0) {
                    changed += usize::from(a != b);
                } else {
                    assert_eq!(a, b);
                }
            }
        }
    }
    assert!(changed > 0);
}

#[test]
fn empty_hole_leaves_the_image_untouched() {
    let w = build_cake_wavelets(8, 15, 3, 0.8).unwrap();
    let f = band_limited(20, 1.0, 4, 3);
    let mask = Mask::from_image_fn(20, 20, |_, _| false);
    let out = inpaint_relift(&f, &mask, &w, &RdsParams::default(), 1.0, 3).unwrap();
    assert_eq!(out, f);
    assert!(inpaint_relift(&f, &mask, &w, &RdsParams::default(), 1.0, 0).is_err());
    let wrong = Mask::from_image_fn(19, 20, |_, _| false);
    assert!(inpaint_relift(&f, &wrong, &w, &RdsParams::default(), 1.0, 1).is_err());
}

#[test]
fn invalid_inputs_are_rejected() {
    let v = random_volume(8, 4, 1);
    let p = RdsParams::default();
    assert!(run_rds(RdsInput::Volume(&v), &p, -1.0, None).is_err());
    assert!(run_rds(RdsInput::Volume(&v), &p, f64::NAN, None).is_err());
    let bad = RdsParams {
        lambda: 0.0,
        ..RdsParams::default()
    };
    assert!(run_rds(RdsInput::Volume(&v), &bad, 1.0, None).is_err());
    for scale in [0.0, -1.0, f64::INFINITY] {
        let bad = RdsParams {
            tau_scale: scale,
            ..RdsParams::default()
        };
        assert!(run_rds(RdsInput::Volume(&v), &bad, 1.0, None).is_err());
    }
    let img = Image::filled(8, 8, 0.0);
    let w = build_cake_wavelets(4, 9, 3, 0.8).unwrap();
    let mask = Mask::from_image_fn(7, 8, |_, _| true);
    assert!(run_rds(RdsInput::Image(&img, &w), &p, 1.0, Some(&mask)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn every_step_stays_within_the_initial_range(
        seed in 0u64..100_000,
        lambda in 0.01f64..2.0,
        zeta in 0.2f64..1.0,
        gauge in any::<bool>(),
    ) {
        let v = random_volume(10, 4, seed);
        let p = RdsParams {
            lambda,
            use_gauge: gauge,
            ..RdsParams::with_anisotropy(zeta, zeta).unwrap()
        };
        let (lo, hi) = v.min_max();
        let mut worst = 0.0f64;
        run_rds_observed(RdsInput::Volume(&v), &p, 8.0 * tau_for(&v, &p), None, &mut |_, _, s| {
            let (a, b) = s.u.min_max();
            worst = worst.max(lo - a).max(b - hi);
        }).unwrap();
        prop_assert!(worst <= 0.0, "excursion {}", worst);
    }
}
