//! Greedy initialization: clusters are fitted one after another on the
//! events not yet explained, each claiming the events that go out of focus
//! when its motion is perturbed away from the optimum.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::iwe::GaussianKernel;
use crate::solver::ascent::climb;
use crate::solver::config::SolverConfig;
use crate::solver::kernels::Kernels;
use crate::solver::types::{AssociationMatrix, ClusterSet};
use crate::warp::{WarpModel, WarpParams, MAX_PARAMS};

/// Candidate values per parameter for the coarse search.
fn coarse_axes(k: &Kernels, base: &WarpParams, cfg: &SolverConfig) -> Vec<Vec<f64>> {
    let init = &cfg.init;
    let g = k.geometry;
    let levers = k.levers(base);
    let axis = |bound: f64, lever: f64| -> Vec<f64> {
        let step = init.coarse_step_px / lever;
        let n = (bound / step).ceil() as i64;
        (-n..=n).map(|i| (i as f64 * step).clamp(-bound, bound)).collect()
    };
    let cells = |len: usize| -> Vec<f64> {
        let c = init.center_cells.max(1);
        (0..c).map(|i| (i as f64 + 0.5) * len as f64 / c as f64 - 0.5).collect()
    };
    match base.model {
        WarpModel::Flow2 => vec![axis(init.max_speed, levers[0]), axis(init.max_speed, levers[1])],
        WarpModel::Rotation => {
            let omegas = axis(init.max_omega, levers[2]);
            if base.frozen[0] {
                vec![vec![base.theta()[0]], vec![base.theta()[1]], omegas]
            } else {
                vec![cells(g.width), cells(g.height), omegas]
            }
        }
        // Translation first; rotation and scale are left to the local ascent.
        WarpModel::FourDof => vec![axis(init.max_speed, levers[0]), axis(init.max_speed, levers[1]), vec![0.0], vec![0.0]],
    }
}

fn grid_points(base: &WarpParams, axes: &[Vec<f64>]) -> Vec<WarpParams> {
    let mut out = vec![*base];
    for (i, values) in axes.iter().enumerate() {
        out = out
            .iter()
            .flat_map(|p| {
                values.iter().map(move |&v| {
                    let mut q = *p;
                    q.theta_mut()[i] = v;
                    q
                })
            })
            .collect();
    }
    out
}

/// Local grid of +-`span` around `center` on every active parameter.
fn fine_axes(center: &WarpParams, spans: [f64; MAX_PARAMS]) -> Vec<Vec<f64>> {
    (0..center.model.param_count())
        .map(|i| {
            let c = center.theta()[i];
            if center.frozen[i] || spans[i] == 0.0 {
                vec![c]
            } else {
                (-3..=3).map(|s| c + s as f64 * spans[i] / 3.0).collect()
            }
        })
        .collect()
}

fn random_params(base: &WarpParams, k: &Kernels, cfg: &SolverConfig, rng: &mut ChaCha8Rng) -> WarpParams {
    let init = &cfg.init;
    let g = k.geometry;
    let mut p = *base;
    let th = p.theta_mut();
    let speed = |rng: &mut ChaCha8Rng, b: f64| if b > 0.0 { rng.random_range(-b..=b) } else { 0.0 };
    match base.model {
        WarpModel::Flow2 => {
            th[0] = speed(rng, init.max_speed);
            th[1] = speed(rng, init.max_speed);
        }
        WarpModel::Rotation => {
            if !base.frozen[0] {
                th[0] = rng.random_range(0.0..g.width as f64);
                th[1] = rng.random_range(0.0..g.height as f64);
            }
            th[2] = speed(rng, init.max_omega);
        }
        WarpModel::FourDof => {
            th[0] = speed(rng, init.max_speed);
            th[1] = speed(rng, init.max_speed);
            th[2] = speed(rng, init.max_omega);
            th[3] = speed(rng, init.max_scale_rate);
        }
    }
    p
}

fn top_candidates(mut scored: Vec<(f64, WarpParams)>, keep: usize) -> Vec<WarpParams> {
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    scored.into_iter().take(keep).map(|(_, p)| p).collect()
}

/// Global maximization of one cluster's contrast for the given event
/// weights: coarse grid on a strongly blurred IWE, a finer grid around the
/// best coarse cells, then ascent at the working blur. Returns the optimum
/// and its contrast at `cfg.sigma`.
pub(crate) fn maximize_contrast(k: &Kernels, base: &WarpParams, weights: &[f64], cfg: &SolverConfig) -> (WarpParams, f64) {
    let init = &cfg.init;
    let coarse_kernel = GaussianKernel::new(init.coarse_sigma);
    let fine_kernel = GaussianKernel::new(init.fine_sigma);
    let kernel = GaussianKernel::new(cfg.sigma);

    let coarse = grid_points(base, &coarse_axes(k, base, cfg));
    let scores = k.map(coarse.len(), |i| k.contrast(&coarse[i], Some(weights), &coarse_kernel));
    let seeds = top_candidates(scores.into_iter().zip(coarse).collect(), 3);

    let mut fine = Vec::new();
    for seed in &seeds {
        let levers = k.levers(seed);
        let mut spans = [0.0; MAX_PARAMS];
        for i in seed.active() {
            spans[i] = init.coarse_step_px / levers[i];
        }
        if seed.model == WarpModel::Rotation && !seed.frozen[0] {
            let g = k.geometry;
            let c = init.center_cells.max(1) as f64;
            spans[0] = 0.5 * g.width as f64 / c;
            spans[1] = 0.5 * g.height as f64 / c;
        }
        fine.extend(grid_points(seed, &fine_axes(seed, spans)));
    }
    let scores = k.map(fine.len(), |i| k.contrast(&fine[i], Some(weights), &fine_kernel));
    let seeds = top_candidates(scores.into_iter().zip(fine).collect(), 2);

    let objective = |p: &WarpParams| k.contrast(p, Some(weights), &kernel);
    let levers_of = |p: &WarpParams| k.levers(p);
    let polished = k.map(seeds.len(), |i| climb(&seeds[i], &levers_of, init.refine_iters, cfg, &objective));
    polished
        .into_iter()
        .fold(None::<(WarpParams, f64)>, |best, cand| match best {
            Some(b) if b.1 >= cand.1 => Some(b),
            _ => Some(cand),
        })
        .expect("at least one seed")
}

fn base_params(model: WarpModel, k: &Kernels, cfg: &SolverConfig) -> WarpParams {
    let p = WarpParams::zero(model, k.geometry);
    if cfg.init.freeze_rotation_center {
        p.with_frozen_center()
    } else {
        p
    }
}

pub(crate) fn greedy(k: &Kernels, models: &[WarpModel], cfg: &SolverConfig) -> Result<(ClusterSet, AssociationMatrix)> {
    let n = k.len();
    let j_total = models.len();
    let kernel = GaussianKernel::new(cfg.sigma);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.init.seed);
    let mut assoc = AssociationMatrix::uniform(n, j_total);
    let mut residual = vec![1.0; n];
    let mut params = Vec::with_capacity(j_total);
    let negligible = (cfg.collapse_frac * n as f64 / j_total as f64).max(0.5);
    let (claim, share) = if j_total == 1 {
        (1.0, 0.0)
    } else {
        (cfg.init.claim_prob, (1.0 - cfg.init.claim_prob) / (j_total - 1) as f64)
    };

    for (j, &model) in models.iter().enumerate() {
        let base = base_params(model, k, cfg);
        let last = j + 1 == j_total;
        let mass: f64 = residual.iter().sum();

        let theta = if mass < negligible {
            random_params(&base, k, cfg, &mut rng)
        } else {
            let zero_value = k.contrast(&base, Some(&residual), &kernel);
            let (mut best, mut value) = maximize_contrast(k, &base, &residual, cfg);
            let threshold = zero_value * (1.0 + cfg.rel_tol);
            if value <= threshold {
                let objective = |p: &WarpParams| k.contrast(p, Some(&residual), &kernel);
                let levers_of = |p: &WarpParams| k.levers(p);
                for _ in 0..cfg.init.random_draws {
                    let start = random_params(&base, k, cfg, &mut rng);
                    let (p, v) = climb(&start, &levers_of, cfg.init.refine_iters, cfg, &objective);
                    if v > value {
                        best = p;
                        value = v;
                    }
                }
                // Later clusters may be surplus; they keep their best draw and
                // are left to collapse.
                if value <= threshold && j == 0 {
                    return Err(Error::DegenerateInit { cluster: j });
                }
            }
            best
        };

        let claimed: Vec<usize> = if last {
            (0..n).filter(|&e| residual[e] > 0.0).collect()
        } else if mass < negligible {
            Vec::new()
        } else {
            claim_in_focus(k, &theta, &residual, &kernel, cfg)
        };
        for &e in &claimed {
            for c in 0..j_total {
                assoc.set(e, c, if c == j { claim } else { share });
            }
            residual[e] = 0.0;
        }
        params.push(theta);
    }
    Ok((ClusterSet::new(params), assoc))
}

/// Events with weight whose local contrast drops, on average over small
/// perturbations of every active parameter, by more than
/// `init.claim_drop` of its value at the optimum.
fn claim_in_focus(k: &Kernels, theta: &WarpParams, weights: &[f64], kernel: &GaussianKernel, cfg: &SolverConfig) -> Vec<usize> {
    let levers = k.levers(theta);
    let mut probes = Vec::new();
    for i in theta.active() {
        for sign in [-1.0, 1.0] {
            let mut p = *theta;
            p.theta_mut()[i] += sign * cfg.init.perturb_px / levers[i];
            probes.push(p);
        }
    }
    let (warped, image) = k.image(theta, Some(weights), kernel);
    let at_optimum = k.sample(&image, &warped);
    let perturbed = k.map(probes.len(), |i| {
        let (w, img) = k.image(&probes[i], Some(weights), kernel);
        k.sample(&img, &w)
    });
    let np = probes.len().max(1) as f64;
    (0..k.len())
        .filter(|&e| {
            if weights[e] == 0.0 || at_optimum[e] <= cfg.epsilon_c {
                return false;
            }
            let mean = perturbed.iter().map(|c| c[e]).sum::<f64>() / np;
            mean - at_optimum[e] < -cfg.init.claim_drop * at_optimum[e]
        })
        .collect()
}
