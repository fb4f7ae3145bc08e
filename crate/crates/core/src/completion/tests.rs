use proptest::prelude::*;
use rand::Rng as _;

use super::*;
use crate::gridmap::{Ternary, TernaryMap};
use crate::neuralnet::gradcheck::{numeric_gradient, relative_error};
use crate::neuralnet::{Tensor, ConvLayer};
use crate::rng::{seeded, Rng};
use crate::simworld::DatasetEntry;

fn tiny_generator(seed: u64) -> Generator {
    Generator::new(GeneratorConfig {
        size: 8,
        levels: 2,
        base_channels: 2,
        spectral_norm: true,
        dropout: 0.5,
        seed,
    })
    .unwrap()
}

fn tiny_discriminator(seed: u64) -> Discriminator {
    Discriminator::new(DiscriminatorConfig {
        depth: 2,
        base_channels: 2,
        spectral_norm: true,
        seed,
    })
    .unwrap()
}

fn random_map(rng: &mut Rng, size: usize) -> TernaryMap {
    let cells = (0..size * size)
        .map(|_| Ternary::ALL[rng.random_range(0..3)])
        .collect();
    TernaryMap::from_cells(size, size, cells).unwrap()
}

fn flat_params(layers: &[&ConvLayer]) -> Vec<f64> {
    layers
        .iter()
        .flat_map(|l| l.weight.iter().chain(&l.bias).copied())
        .collect()
}

fn set_params(layers: Vec<&mut ConvLayer>, flat: &[f64]) {
    let mut it = flat.iter().copied();
    for l in layers {
        l.weight.iter_mut().for_each(|w| *w = it.next().unwrap());
        l.bias.iter_mut().for_each(|b| *b = it.next().unwrap());
    }
}

fn flat_grads(g: &NetGrads) -> Vec<f64> {
    g.flat().into_iter().flatten().copied().collect()
}

#[test]
fn pack_channels() {
    let blank = TernaryMap::filled(4, 4, Ternary::Unsearched);
    let t = pack_input(&blank, 4).unwrap();
    assert!(t.plane(0, 0).iter().all(|&v| v == 0.5));
    assert!(t.plane(0, 1).iter().all(|&v| v == 1.0));
    let known = random_map(&mut seeded(1), 4);
    let mut known = known;
    for c in known.cells_mut() {
        if *c == Ternary::Unsearched {
            *c = Ternary::Free;
        }
    }
    assert!(pack_input(&known, 4).unwrap().plane(0, 1).iter().all(|&v| v == 0.0));
    assert!(pack_input(&known, 8).is_err());
}

proptest! {
    #[test]
    fn pack_then_unpack_is_identity(seed in any::<u64>(), size in 1usize..12) {
        let m = random_map(&mut seeded(seed), size);
        prop_assert_eq!(unpack_output(&pack_input(&m, size).unwrap()).unwrap(), m);
    }
}

#[test]
fn generator_shapes_and_codomain() {
    let g = Generator::new(GeneratorConfig::default()).unwrap();
    let m = random_map(&mut seeded(2), 64);
    let x = pack_input(&m, 64).unwrap();
    let (y, _) = g.forward(&x, None).unwrap();
    assert_eq!(y.shape(), [1, 2, 64, 64]);
    assert!(y.data().iter().all(|v| (0.0..=1.0).contains(v)));
    let a = generate(&g, &m, &mut seeded(0), false).unwrap();
    let b = generate(&g, &m, &mut seeded(99), false).unwrap();
    assert_eq!(a, b);
    for s in 0..2 {
        let c = generate(&g, &m, &mut seeded(s), true).unwrap();
        assert_eq!((c.width(), c.height()), (64, 64));
    }
    let blank = TernaryMap::filled(64, 64, Ternary::Unsearched);
    assert_eq!(generate(&g, &blank, &mut seeded(0), false).unwrap().len(), 4096);
}

#[test]
fn generator_rejects_wrong_input() {
    let g = tiny_generator(0);
    assert!(g.forward(&Tensor::zeros([1, 2, 16, 16]), None).is_err());
    assert!(g.forward(&Tensor::zeros([1, 3, 8, 8]), None).is_err());
    assert!(Generator::new(GeneratorConfig { size: 12, levels: 3, ..Default::default() }).is_err());
}

#[test]
fn l2_loss_cases() {
    let mut r = seeded(3);
    let t = Tensor::from_vec([1, 2, 3, 3], (0..18).map(|_| r.random()).collect()).unwrap();
    assert_eq!(l2_loss(&t, &t).unwrap().0, 0.0);
    let (l, _) = l2_loss(&t.map(|v| v + 0.1), &t).unwrap();
    assert!((l - 0.01).abs() < 1e-15);
    let p = t.map(|v| v * 0.7 + 0.05);
    let (_, g) = l2_loss(&p, &t).unwrap();
    let n = numeric_gradient(p.data(), 1e-6, |d| {
        l2_loss(&Tensor::from_vec(p.shape(), d.to_vec()).unwrap(), &t).unwrap().0
    });
    assert!(relative_error(g.data(), &n) < 1e-6);
    assert!(l2_loss(&t, &Tensor::zeros([1, 2, 3, 4])).is_err());
}

fn batch(seed: u64, size: usize) -> (Tensor, Tensor) {
    let mut r = seeded(seed);
    let x = pack_input(&random_map(&mut r, size), size).unwrap();
    let t = pack_input(&random_map(&mut r, size), size).unwrap();
    (x, t)
}

#[test]
fn generator_l2_gradients_match_finite_differences() {
    for seed in 0..3 {
        let mut g = tiny_generator(seed);
        g.power_iterate(2);
        let (x, t) = batch(seed, 8);
        let loss = |g: &Generator| {
            let (y, _) = g.forward(&x, Some(&mut seeded(seed))).unwrap();
            l2_loss(&y, &t).unwrap().0
        };
        let (y, trace) = g.forward(&x, Some(&mut seeded(seed))).unwrap();
        let (_, gy) = l2_loss(&y, &t).unwrap();
        let (grads, _) = g.backward(&trace, &gy).unwrap();
        let p0 = flat_params(&g.layers());
        let num = numeric_gradient(&p0, 1e-5, |p| {
            let mut h = g.clone();
            set_params(h.layers_mut(), p);
            loss(&h)
        });
        let err = relative_error(&flat_grads(&grads), &num);
        assert!(err < 1e-4, "seed {seed}: {err}");
    }
}

#[test]
fn gan_gradients_match_finite_differences() {
    for seed in 0..3 {
        let mut g = tiny_generator(10 + seed);
        let mut d = tiny_discriminator(20 + seed);
        g.power_iterate(2);
        d.power_iterate(2);
        let (x, t) = batch(30 + seed, 8);
        let lambda = 10.0;
        let l = gan_losses(&d, &g, &x, &t, lambda, Some(&mut seeded(seed))).unwrap();

        let dp = flat_params(&d.layers());
        let num_d = numeric_gradient(&dp, 1e-5, |p| {
            let mut h = d.clone();
            set_params(h.layers_mut(), p);
            gan_losses(&h, &g, &x, &t, lambda, Some(&mut seeded(seed))).unwrap().d_loss
        });
        let err = relative_error(&flat_grads(&l.d_grads), &num_d);
        assert!(err < 1e-4, "seed {seed} discriminator: {err}");

        let gp = flat_params(&g.layers());
        let num_g = numeric_gradient(&gp, 1e-5, |p| {
            let mut h = g.clone();
            set_params(h.layers_mut(), p);
            gan_losses(&d, &h, &x, &t, lambda, Some(&mut seeded(seed))).unwrap().g_loss
        });
        let err = relative_error(&flat_grads(&l.g_grads), &num_g);
        assert!(err < 1e-4, "seed {seed} generator: {err}");
    }
}

fn frozen_half_discriminator() -> Discriminator {
    let mut d = Discriminator::new(DiscriminatorConfig::default()).unwrap();
    d.head.weight.iter_mut().for_each(|w| *w = 0.0);
    d.head.bias.iter_mut().for_each(|b| *b = 0.0);
    d
}

#[test]
fn half_discriminator_gives_two_log_two() {
    let d = frozen_half_discriminator();
    for seed in 0..3 {
        let g = Generator::new(GeneratorConfig { seed, ..Default::default() }).unwrap();
        let (x, t) = batch(seed, 64);
        let l = gan_losses(&d, &g, &x, &t, 0.0, None).unwrap();
        assert!((l.d_loss - 2.0 * 2f64.ln()).abs() < 1e-12, "{}", l.d_loss);
        // lambda = 0 leaves only the adversarial term
        assert_eq!(l.g_loss, l.g_adv);
        assert!((l.g_adv - 2f64.ln()).abs() < 1e-12);
        let l10 = gan_losses(&d, &g, &x, &t, 10.0, None).unwrap();
        assert!((l10.g_loss - (l10.g_adv + 10.0 * l10.l2)).abs() < 1e-12);
    }
}

#[test]
fn identity_completion_leaves_maps_unchanged() {
    let mut r = seeded(4);
    for (w, h) in [(64, 64), (30, 50), (100, 80), (8, 200)] {
        let mut m = TernaryMap::filled(w, h, Ternary::Unsearched);
        // a searched blob that fits inside the field
        let (x0, y0) = (r.random_range(0..w.saturating_sub(10).max(1)), r.random_range(0..h.saturating_sub(10).max(1)));
        for y in y0..(y0 + 10).min(h) {
            for x in x0..(x0 + 10).min(w) {
                m.set(x, y, Ternary::ALL[r.random_range(0..3)]);
            }
        }
        let out = complete_with(&m, 64, |win| {
            assert_eq!((win.width(), win.height()), (64, 64));
            Ok(win.clone())
        })
        .unwrap();
        assert_eq!(out, m, "{w}x{h}");
    }
}

#[test]
fn window_covers_searched_region_and_rejects_oversize() {
    let mut m = TernaryMap::filled(120, 120, Ternary::Unsearched);
    m.set(70, 90, Ternary::Occupied);
    m.set(100, 110, Ternary::Free);
    let win = crop_window(&m, 64).unwrap();
    assert!(win.x0 >= 0 && win.x0 + 64 <= 120 && win.x0 <= 70 && win.x0 + 64 > 100);
    assert!(win.y0 >= 0 && win.y0 + 64 <= 120 && win.y0 <= 90 && win.y0 + 64 > 110);
    m.set(5, 5, Ternary::Free);
    assert!(matches!(
        crop_window(&m, 64),
        Err(crate::Error::RegionTooLarge { width: 96, height: 106, field: 64 })
    ));
}

#[test]
fn completion_fills_only_the_window() {
    let g = Generator::new(GeneratorConfig::default()).unwrap();
    let mut m = TernaryMap::filled(100, 70, Ternary::Unsearched);
    m.set(10, 10, Ternary::Occupied);
    let out = complete_ternary(&g, &m, &mut seeded(0), false).unwrap();
    assert_eq!((out.width(), out.height()), (100, 70));
    let win = crop_window(&m, 64).unwrap();
    for y in 0..70 {
        for x in 0..100 {
            let inside = (x as isize) >= win.x0 && (x as isize) < win.x0 + 64 && (y as isize) >= win.y0 && (y as isize) < win.y0 + 64;
            if !inside {
                assert_eq!(out.get(x, y), Ternary::Unsearched);
            }
        }
    }
}

#[test]
fn checkpoint_round_trip_preserves_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let mut g = tiny_generator(5);
    g.power_iterate(3);
    let path = dir.path().join("g.ckpt");
    save_generator(&g, 7, &path).unwrap();
    let back = load_generator(&path, None).unwrap();
    let (x, _) = batch(1, 8);
    assert_eq!(g.forward(&x, None).unwrap().0, back.forward(&x, None).unwrap().0);
    let other = GeneratorConfig { base_channels: 3, ..tiny_generator(5).config };
    assert!(matches!(
        load_generator(&path, Some(other)),
        Err(crate::Error::ArchitectureMismatch { .. })
    ));
}

fn tiny_dataset(n: usize, seed: u64) -> Vec<DatasetEntry> {
    let mut r = seeded(seed);
    (0..n)
        .map(|i| {
            let full = random_map(&mut r, 8);
            let mut partial = full.clone();
            for c in partial.cells_mut() {
                if r.random_bool(0.3) {
                    *c = Ternary::Unsearched;
                }
            }
            DatasetEntry { id: format!("e{i}"), partial, full }
        })
        .collect()
}

fn tiny_train_config(mode: TrainMode) -> TrainConfig {
    TrainConfig {
        mode,
        epochs: 3,
        batch_size: 2,
        checkpoint_every: 2,
        generator: tiny_generator(0).config,
        discriminator: tiny_discriminator(0).config,
        ..Default::default()
    }
}

#[test]
fn training_is_bit_reproducible() {
    let data = tiny_dataset(5, 1);
    for mode in [TrainMode::L2, TrainMode::Gan] {
        let cfg = tiny_train_config(mode);
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let ta = train(&data, &data[..2], &cfg, Some(a.path())).unwrap();
        train(&data, &data[..2], &cfg, Some(b.path())).unwrap();
        for f in [GENERATOR_FILE, "generator_e0002.ckpt", LOG_FILE] {
            let x = std::fs::read(a.path().join(f)).unwrap();
            assert_eq!(x, std::fs::read(b.path().join(f)).unwrap(), "{f}");
        }
        assert_eq!(ta.log.len(), 3);
        assert_eq!(ta.discriminator.is_some(), mode == TrainMode::Gan);
        assert_eq!(ta.log[0].d_loss.is_some(), mode == TrainMode::Gan);
        let lines = std::fs::read_to_string(a.path().join(LOG_FILE)).unwrap();
        assert_eq!(lines.lines().count(), 3);
    }
}

#[test]
fn divergence_reports_last_good_checkpoint() {
    let data = tiny_dataset(4, 2);
    let mut cfg = tiny_train_config(TrainMode::L2);
    cfg.epochs = 6;
    cfg.adam.lr = f64::INFINITY;
    let dir = tempfile::tempdir().unwrap();
    match train(&data, &[], &cfg, Some(dir.path())) {
        Err(crate::Error::Diverged { epoch, last_good }) => {
            assert!(epoch >= 1);
            if let Some(p) = last_good {
                assert!(p.exists());
            }
        }
        Err(e) => panic!("unexpected error {e}"),
        Ok(_) => panic!("training with an absurd learning rate should diverge"),
    }
}

#[test]
fn dihedral_gives_eight_distinct_permutations() {
    let t = Tensor::from_vec([1, 2, 4, 4], (0..32).map(f64::from).collect()).unwrap();
    let mut seen = Vec::new();
    for k in 0..8 {
        let d = super::train::dihedral(&t, k);
        let mut sorted = d.data().to_vec();
        sorted.sort_by(f64::total_cmp);
        assert_eq!(sorted, t.data());
        // channels never mix
        assert!(d.data()[..16].iter().all(|&v| v < 16.0));
        assert!(!seen.contains(&d), "transform {k} repeats");
        seen.push(d);
    }
    // mirror twice is identity, transpose twice is identity
    for k in [1, 2, 4] {
        assert_eq!(super::train::dihedral(&super::train::dihedral(&t, k), k), t);
    }
}
