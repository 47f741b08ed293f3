use crate::error::{Error, Result};
use crate::iwe::Voting;

/// Settings of the greedy initialization and its global search.
#[derive(Debug, Clone, PartialEq)]
pub struct InitConfig {
    /// Association given to the events a cluster claims; the rest of the row
    /// is spread over the other clusters.
    pub claim_prob: f64,
    /// Size of the probe perturbation around a cluster optimum, in pixels of
    /// displacement over the packet.
    pub perturb_px: f64,
    /// An event is claimed when its mean local contrast under the probes drops
    /// by more than this fraction of its value at the optimum.
    pub claim_drop: f64,
    /// Search bounds.
    pub max_speed: f64,
    pub max_omega: f64,
    pub max_scale_rate: f64,
    /// Number of rotation-center candidates per image axis.
    pub center_cells: usize,
    /// Coarse grid resolution (px of displacement) and the blur used on it.
    pub coarse_step_px: f64,
    pub coarse_sigma: f64,
    pub fine_sigma: f64,
    /// Ascent steps used to polish each grid optimum.
    pub refine_iters: usize,
    /// Random restarts tried when the grid finds nothing better than zero motion.
    pub random_draws: usize,
    pub seed: u64,
    /// Hold rotation centers fixed at the image center (omega-only search).
    pub freeze_rotation_center: bool,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self {
            claim_prob: 0.9,
            perturb_px: 3.0,
            claim_drop: 0.04,
            max_speed: 250.0,
            max_omega: 20.0,
            max_scale_rate: 2.0,
            center_cells: 6,
            coarse_step_px: 6.0,
            coarse_sigma: 3.0,
            fine_sigma: 1.5,
            refine_iters: 40,
            random_draws: 8,
            seed: 0,
            freeze_rotation_center: false,
        }
    }
}

/// Solver settings shared by the three segmentation methods.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Initial ascent step, in pixels of displacement over the packet. The
    /// step adapts per cluster: doubled after a successful step, halved while
    /// backtracking.
    pub step_mu: f64,
    pub max_step_px: f64,
    pub min_step_px: f64,
    /// Backtracking halvings before a step is abandoned.
    pub backtrack: usize,
    /// Central-difference perturbation, native parameter units.
    pub fd_step: f64,
    pub max_iters: usize,
    pub rel_tol: f64,
    /// Consecutive low-gain iterations that count as convergence.
    pub stall_iters: usize,
    /// Gaussian blur of every IWE before contrast or local sampling (px).
    pub sigma: f64,
    pub epsilon_c: f64,
    /// A cluster dies when its association mass drops below
    /// `collapse_frac * N / J`. Zero disables collapse.
    pub collapse_frac: f64,
    /// Layered method: on convergence, merge a live cluster into a heavier
    /// one whose motion focuses its events about as well as its own
    /// (`merge_focus` of its contrast or more) when that raises the sum of
    /// contrasts, then keep iterating.
    pub merge: bool,
    pub merge_focus: f64,
    /// Fuzzy k-means blending exponent.
    pub fuzzy_b: f64,
    pub voting: Voting,
    /// Run exactly `max_iters` iterations (benchmarks).
    pub fixed_iterations: bool,
    /// Evaluate independent clusters and probes on the rayon pool.
    pub parallel: bool,
    pub init: InitConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            step_mu: 1.0,
            max_step_px: 4.0,
            min_step_px: 1e-3,
            backtrack: 8,
            fd_step: 1e-2,
            max_iters: 100,
            rel_tol: 1e-4,
            stall_iters: 3,
            sigma: 1.0,
            epsilon_c: 1e-6,
            collapse_frac: 0.02,
            merge: true,
            merge_focus: 0.9,
            fuzzy_b: 2.0,
            voting: Voting::Bilinear,
            fixed_iterations: false,
            parallel: true,
            init: InitConfig::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("max_step_px", self.max_step_px),
            ("min_step_px", self.min_step_px),
            ("fd_step", self.fd_step),
            ("rel_tol", self.rel_tol),
            ("epsilon_c", self.epsilon_c),
            ("init.perturb_px", self.init.perturb_px),
            ("init.coarse_step_px", self.init.coarse_step_px),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        let non_negative = [
            ("step_mu", self.step_mu),
            ("sigma", self.sigma),
            ("collapse_frac", self.collapse_frac),
            ("merge_focus", self.merge_focus),
            ("init.coarse_sigma", self.init.coarse_sigma),
            ("init.fine_sigma", self.init.fine_sigma),
            ("init.max_speed", self.init.max_speed),
            ("init.max_omega", self.init.max_omega),
            ("init.max_scale_rate", self.init.max_scale_rate),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be non-negative, got {v}")));
            }
        }
        if self.rel_tol >= 1.0 {
            return Err(Error::Config("rel_tol must be < 1".into()));
        }
        if self.collapse_frac >= 1.0 {
            return Err(Error::Config("collapse_frac must be < 1".into()));
        }
        if self.fuzzy_b <= 1.0 {
            return Err(Error::Config("fuzzy_b must be > 1".into()));
        }
        if self.max_iters == 0 || self.stall_iters == 0 {
            return Err(Error::Config("max_iters and stall_iters must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.init.claim_prob) {
            return Err(Error::Config("init.claim_prob must lie in [0, 1]".into()));
        }
        Ok(())
    }
}
