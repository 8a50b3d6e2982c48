use npinfl_core::diagnostics::mc_standard_error;
use npinfl_core::noise::dpm::{dpm_sweep, DpmPrior, DpmState};
use npinfl_core::noise::sv::{sv_update, SvPrior, SvState};
use npinfl_core::stats::{mean, quantiles};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal, StandardNormal};

#[test]
fn mixture_recovers_cluster_means() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let t = 400;
    let truth = [(-1.0, 0.5), (2.0, 1.0)];
    let labels: Vec<usize> = (0..t)
        .map(|_| usize::from(rng.random::<f64>() >= 0.6))
        .collect();
    let data: Vec<f64> = labels
        .iter()
        .map(|&c| truth[c].0 + truth[c].1 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let prior = DpmPrior::default();
    let mut st = DpmState::single(t, Some(1.0), 0.5);
    let mut sums = [0.0; 2];
    let mut kept = 0.0;
    for it in 0..4000 {
        dpm_sweep(&mut st, &data, None, &prior, &mut rng);
        if it == 1000 {
            st.alpha_step.freeze();
        }
        if it >= 1000 {
            kept += 1.0;
            for (c, sum) in sums.iter_mut().enumerate() {
                // component holding most of the observations drawn from cluster c
                let mut hits = vec![0usize; st.len()];
                for (l, &j) in labels.iter().zip(&st.alloc) {
                    if *l == c {
                        hits[j] += 1;
                    }
                }
                let j = (0..hits.len()).max_by_key(|&j| hits[j]).unwrap();
                *sum += st.means[j];
            }
        }
    }
    for c in 0..2 {
        let m = sums[c] / kept;
        println!("cluster {c}: posterior mean {m:.4}, truth {}", truth[c].0);
        assert!((m - truth[c].0).abs() < 0.15, "cluster {c} mean {m}");
    }
}

#[test]
fn mixture_sweeps_get_it_right() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let prior = DpmPrior::default();
    let t = 20;
    let alpha0 = Gamma::new(prior.alpha_shape, 1.0 / prior.alpha_rate)
        .unwrap()
        .sample(&mut rng);
    let mut st = DpmState::single(t, Some(0.5), alpha0);
    st.means[0] = Normal::new(0.0, 2.0).unwrap().sample(&mut rng);
    let mut alphas = Vec::new();
    let mut mus = Vec::new();
    for it in 0..10_000 {
        // data given parameters, then parameters given data
        let data: Vec<f64> = st
            .alloc
            .iter()
            .map(|&j| {
                st.means[j]
                    + st.vars.as_ref().unwrap()[j].sqrt() * rng.sample::<f64, _>(StandardNormal)
            })
            .collect();
        dpm_sweep(&mut st, &data, None, &prior, &mut rng);
        if it == 500 {
            st.alpha_step.freeze();
        }
        alphas.push(st.alpha);
        mus.push(st.means[0]);
    }
    let (ma, sa) = (mean(&alphas), mc_standard_error(&alphas));
    let (mm, sm) = (mean(&mus), mc_standard_error(&mus));
    println!("alpha {ma:.4} +- {sa:.4}; mu1 {mm:.4} +- {sm:.4}");
    assert!((ma - 0.5).abs() < 3.0 * sa);
    assert!(mm.abs() < 3.0 * sm);
}

#[test]
fn volatility_recovery() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let (t, rho, sig, mu) = (500, 0.95, 0.2, -0.5);
    let mut h = vec![0.0; t];
    h[0] = mu + sig / (1.0f64 - rho * rho).sqrt() * rng.sample::<f64, _>(StandardNormal);
    for i in 1..t {
        h[i] = mu + rho * (h[i - 1] - mu) + sig * rng.sample::<f64, _>(StandardNormal);
    }
    let e: Vec<f64> = h
        .iter()
        .map(|x| (x / 2.0).exp() * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let prior = SvPrior::default();
    let mut st = SvState::flat(t, 0.0);
    let mut rhos = Vec::new();
    let mut paths: Vec<Vec<f64>> = vec![Vec::new(); t];
    for it in 0..6000 {
        sv_update(&e, &mut st, &prior, &mut rng);
        if it >= 1000 {
            rhos.push(st.rho);
            for (p, x) in paths.iter_mut().zip(&st.h) {
                p.push((x / 2.0).exp());
            }
        }
    }
    let covered = paths
        .iter()
        .zip(&h)
        .filter(|(p, x)| {
            let q = quantiles(p, &[0.05, 0.95]);
            let v = (**x / 2.0).exp();
            v >= q[0] && v <= q[1]
        })
        .count() as f64
        / t as f64;
    let mr = mean(&rhos);
    println!("rho {mr:.4}, coverage {covered:.3}");
    assert!((0.90..1.0).contains(&mr), "rho {mr}");
    assert!(covered >= 0.8, "coverage {covered}");
}
