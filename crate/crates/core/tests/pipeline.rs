use scatterlab::propagator::{evolve, Backend};
use scatterlab::randomizer::{build_partition, Ensemble};
use scatterlab::snapshot::{read_snapshot, write_snapshot, Provenance};
use scatterlab::spacetime::{spacetime_norm, TimeGrid};
use scatterlab::{derive_exponents, sample_profile, Grid, Profile};

#[test]
fn randomized_snapshot_roundtrip_keeps_provenance() {
    let grid = Grid::new(2, 32, 6.0).unwrap();
    let f = sample_profile(&grid, &Profile::gaussian(1.0)).unwrap();
    let pou = build_partition(&grid).unwrap();
    let fw = pou.randomize(&f, Ensemble::Uniform, 77, 3).unwrap();
    let prov = Provenance {
        master_seed: 77,
        trial: 3,
        ensemble: Ensemble::Uniform.tag(),
    };
    let mut buf = Vec::new();
    write_snapshot(&mut buf, &fw, &prov).unwrap();
    let (back, p) = read_snapshot(buf.as_slice()).unwrap();
    assert_eq!(p, prov);
    assert_eq!(back.values(), fw.values());
    assert_eq!(Ensemble::from_tag(p.ensemble), Some(Ensemble::Uniform));
}

#[test]
fn randomized_norm_is_linear_in_the_coefficients() {
    let grid = Grid::new(1, 256, 20.0).unwrap();
    let f = sample_profile(&grid, &Profile::gaussian(1.0)).unwrap();
    let pou = build_partition(&grid).unwrap();
    let e = derive_exponents(1, 3.0, 0.5).unwrap();
    let tg = TimeGrid::new(1.0, 1000.0, 32).unwrap();
    let fw = pou.randomize(&f, Ensemble::Rademacher, 5, 0).unwrap();
    let flipped = pou.combine(&f, &pou.draw_coefficients(Ensemble::Rademacher, 5, 0).iter().map(|g| -g).collect::<Vec<_>>()).unwrap();
    let a = spacetime_norm(&fw, e.q, e.r, &tg).unwrap().total;
    let b = spacetime_norm(&flipped, e.q, e.r, &tg).unwrap().total;
    assert!((a - b).abs() <= 1e-12 * a);
}

#[test]
fn backends_agree_on_wide_frequency_support() {
    let grid = Grid::new(1, 1024, 40.0).unwrap();
    let f = sample_profile(
        &grid,
        &Profile::ModulatedGaussian {
            center: [0.0; 3],
            width: 1.0,
            amplitude: 1.0,
            momentum: [1.0, 0.0, 0.0],
        },
    )
    .unwrap();
    let fresnel = evolve(&f, 1.0, Backend::Fresnel).unwrap().field;
    let periodic = evolve(&f, 1.0, Backend::Periodic).unwrap().field;
    let back = fresnel.resample(periodic.grid()).unwrap();
    let err = back.relative_l2_distance(&periodic).unwrap();
    assert!(err < 1e-8, "{err}");
}
