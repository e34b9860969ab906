use blindsure_core::denoise::{divergence_free_wrap, Domain, Identity, LinearShrink, SoftThreshold, Threshold};
use blindsure_core::field::sample_channel;
use blindsure_core::linalg::dist_sq;
use blindsure_core::sure::{mc_divergence, sure, DivergenceMode, McOptions, SigmaTag};
use blindsure_core::{Denoiser, ScenarioConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn channel(n: usize, seed: u64) -> Vec<f64> {
    let cfg = ScenarioConfig { n_antennas: n, ..Default::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_channel(&cfg, &mut rng).unwrap().real.into_inner()
}

fn noisy(h: &[f64], sigma: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    h.iter().map(|x| x + sigma * rng.sample::<f64, _>(StandardNormal)).collect()
}

fn builtins() -> Vec<Box<dyn Denoiser>> {
    vec![
        Box::new(Identity),
        Box::new(SoftThreshold::default()),
        Box::new(SoftThreshold { threshold: Threshold::Scaled(1.5), domain: Domain::Angular }),
        Box::new(LinearShrink::default()),
        Box::new(divergence_free_wrap(Box::new(LinearShrink::default()), 1.0)),
        Box::new(divergence_free_wrap(
            Box::new(SoftThreshold { threshold: Threshold::Scaled(1.5), domain: Domain::Angular }),
            1.0,
        )),
    ]
}

/// Mean SURE over noise draws matches mean true MSE at 15 dB.
#[test]
fn sure_is_unbiased_for_every_builtin() {
    let h = channel(1024, 1);
    let sigma2 = 10f64.powf(-1.5) / 2.0;
    let sigma = sigma2.sqrt();
    for den in builtins() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (mut s_acc, mut m_acc) = (0.0, 0.0);
        for _ in 0..500 {
            let r = noisy(&h, sigma, &mut rng);
            let p = sure(den.as_ref(), &r, sigma2, DivergenceMode::Analytic, &mut rng, SigmaTag::Fixed).unwrap();
            let est = den.denoise(&r, sigma).unwrap();
            s_acc += p.sure;
            m_acc += dist_sq(&est, &h);
        }
        let rel = (s_acc - m_acc).abs() / m_acc;
        assert!(rel <= 0.02, "{}: relative bias {rel}", den.label());
    }
}

#[test]
fn zero_estimate_sure_tracks_channel_power() {
    #[derive(Debug)]
    struct Zero;
    impl Denoiser for Zero {
        fn denoise(&self, r: &[f64], _s: f64) -> blindsure_core::Result<Vec<f64>> {
            Ok(vec![0.0; r.len()])
        }
        fn divergence(&self, _r: &[f64], _s: f64) -> blindsure_core::Result<Option<f64>> {
            Ok(Some(0.0))
        }
        fn label(&self) -> String {
            "zero".into()
        }
    }
    let h = channel(1024, 3);
    let sigma2 = 10f64.powf(-1.5) / 2.0;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut acc = 0.0;
    for _ in 0..200 {
        let r = noisy(&h, sigma2.sqrt(), &mut rng);
        acc += sure(&Zero, &r, sigma2, DivergenceMode::Analytic, &mut rng, SigmaTag::Fixed).unwrap().sure;
    }
    let mean = acc / 200.0;
    assert!((mean - 1024.0).abs() <= 0.03 * 1024.0, "{mean}");
}

#[test]
fn shrink_per_instance_error_is_small() {
    let h = channel(1024, 5);
    let sigma2 = 10f64.powf(-1.5) / 2.0;
    let den = LinearShrink::default();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    let mut mean = 0.0;
    let mut ms = 0.0;
    for _ in 0..100 {
        let r = noisy(&h, sigma2.sqrt(), &mut rng);
        let p = sure(&den, &r, sigma2, DivergenceMode::Analytic, &mut rng, SigmaTag::Fixed).unwrap();
        let mse = dist_sq(&den.denoise(&r, sigma2.sqrt()).unwrap(), &h);
        let rel = (p.sure - mse).abs() / mse;
        worst = worst.max(rel);
        mean += rel / 100.0;
        ms += rel * rel / 100.0;
    }
    println!("shrink relative error: mean {mean:.4} rms {:.4} worst {worst:.4}", ms.sqrt());
    assert!(mean <= 0.03, "mean {mean}");
    // the worst of 100 draws sits near 3 rms; bound the spread instead
    assert!(ms.sqrt() <= 0.05, "rms {}", ms.sqrt());
}

fn relative_error_spread(n: usize) -> f64 {
    let h = channel(n, 7);
    let sigma2 = 10f64.powf(-1.5) / 2.0;
    let den = SoftThreshold::default();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let errs: Vec<f64> = (0..300)
        .map(|_| {
            let r = noisy(&h, sigma2.sqrt(), &mut rng);
            let p = sure(&den, &r, sigma2, DivergenceMode::Analytic, &mut rng, SigmaTag::Fixed).unwrap();
            let mse = dist_sq(&den.denoise(&r, sigma2.sqrt()).unwrap(), &h);
            (p.sure - mse) / mse
        })
        .collect();
    let m = errs.iter().sum::<f64>() / errs.len() as f64;
    (errs.iter().map(|e| (e - m).powi(2)).sum::<f64>() / errs.len() as f64).sqrt()
}

/// Quadrupling the dimension halves the spread of the relative error.
#[test]
fn sure_concentrates_with_dimension() {
    let s: Vec<f64> = [256, 1024, 4096].iter().map(|&n| relative_error_spread(n)).collect();
    for w in s.windows(2) {
        let ratio = w[0] / w[1];
        assert!((ratio - 2.0).abs() <= 0.6, "spreads {s:?}");
    }
}

#[test]
fn mc_divergence_is_unbiased_for_soft_threshold() {
    let h = channel(1024, 9);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let sigma = (10f64.powf(-1.5) / 2.0).sqrt();
    let r = noisy(&h, sigma, &mut rng);
    let den = SoftThreshold::default();
    let exact = den.divergence(&r, sigma).unwrap().unwrap();
    let opts = McOptions { probes: 200, epsilon: None };
    let mc = mc_divergence(&den, &r, sigma, &mut rng, &opts).unwrap();
    assert!((mc.divergence - exact).abs() <= 0.01 * exact, "{} vs {exact}", mc.divergence);
}

#[test]
fn divergence_free_wrappers_have_vanishing_mc_divergence() {
    let h = channel(1024, 11);
    let sigma = (10f64.powf(-1.5) / 2.0).sqrt();
    let inners: Vec<Box<dyn Denoiser>> = vec![
        Box::new(Identity),
        Box::new(SoftThreshold::default()),
        Box::new(SoftThreshold { threshold: Threshold::Scaled(1.5), domain: Domain::Angular }),
        Box::new(LinearShrink::default()),
    ];
    for inner in inners {
        let label = inner.label();
        let df = divergence_free_wrap(inner, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let draws: Vec<f64> = (0..40)
            .map(|_| {
                let r = noisy(&h, sigma, &mut rng);
                let mc = mc_divergence(&df, &r, sigma, &mut rng, &McOptions::default()).unwrap();
                mc.divergence / r.len() as f64
            })
            .collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let sd = (draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / draws.len() as f64).sqrt();
        assert!(mean.abs() <= 0.02, "df({label}): mean {mean}");
        assert!(sd <= 0.02, "df({label}): single-probe sd {sd}");
    }
}

#[test]
fn identity_sure_is_exact_for_any_input() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for k in 0..20 {
        let r: Vec<f64> = (0..2048).map(|_| 10.0 * rng.sample::<f64, _>(StandardNormal)).collect();
        let s2 = 0.001 * (k + 1) as f64;
        let p = sure(&Identity, &r, s2, DivergenceMode::Analytic, &mut rng, SigmaTag::Fixed).unwrap();
        assert_eq!(p.sure, 2048.0 * s2);
    }
}
