//! Randomized self-checks of the fast inference and gradient code against
//! the brute-force oracles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::inference::{log_m, marginals, predict_distribution};
use crate::learning::gradient_example;
use crate::model::{Block, HulmParams, LabelVector, TimeSeries};
use crate::oracle::{brute_log_m, brute_marginals, finite_diff_gradient, relative_error, OracleBudget};

/// Deliberate defects, used to confirm that the checks can fail.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fault {
    /// Negates the transition-weight gradient.
    FlipTransitionGradient,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyConfig {
    pub instances: usize,
    pub gradient_instances: usize,
    pub normalization_instances: usize,
    pub max_hidden: usize,
    pub max_len: usize,
    pub max_dim: usize,
    pub max_classes: usize,
    /// Parameters are drawn uniformly from `[-param_scale, param_scale]`.
    pub param_scale: f64,
    pub fd_step: f64,
    pub log_m_tolerance: f64,
    pub marginal_tolerance: f64,
    pub gradient_tolerance: f64,
    pub gradient_abs_floor: f64,
    pub normalization_tolerance: f64,
    pub budget: OracleBudget,
    pub seed: u64,
    pub fault: Option<Fault>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            instances: 200,
            gradient_instances: 50,
            normalization_instances: 1000,
            max_hidden: 3,
            max_len: 4,
            max_dim: 2,
            max_classes: 3,
            param_scale: 0.5,
            fd_step: 1e-5,
            log_m_tolerance: 1e-10,
            marginal_tolerance: 1e-9,
            gradient_tolerance: 1e-5,
            gradient_abs_floor: 1e-8,
            normalization_tolerance: 1e-12,
            budget: OracleBudget::default(),
            seed: 0,
            fault: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub instances: usize,
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckResult {
    fn new(name: impl Into<String>, instances: usize, worst: f64, tolerance: f64) -> Self {
        CheckResult { name: name.into(), instances, worst, tolerance, passed: worst <= tolerance }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// A random problem instance drawn from the configured family.
pub struct Instance {
    pub theta: HulmParams,
    pub x: TimeSeries,
    pub y: LabelVector,
}

pub fn random_instance(rng: &mut impl Rng, cfg: &VerifyConfig, min_classes: usize) -> Instance {
    let hidden = rng.gen_range(1..=cfg.max_hidden);
    let len = rng.gen_range(1..=cfg.max_len);
    let dim = rng.gen_range(1..=cfg.max_dim);
    let classes = rng.gen_range(min_classes.min(cfg.max_classes)..=cfg.max_classes);
    let s = cfg.param_scale;
    let mut theta = HulmParams::zeros(hidden, dim, classes);
    for block in Block::ALL {
        for v in theta.block_mut(block) {
            *v = rng.gen_range(-s..=s);
        }
    }
    let rows: Vec<Vec<f64>> = (0..len).map(|_| (0..dim).map(|_| rng.gen_range(-1.0..=1.0)).collect()).collect();
    let x = TimeSeries::from_rows(&rows).expect("finite frames");
    let y = LabelVector::new(rng.gen_range(0..classes), classes).expect("label in range");
    Instance { theta, x, y }
}

/// Scaled gradient discrepancy; at most `tolerance` exactly when
/// `|a - b| <= max(tolerance * max(|a|, |b|), abs_floor)`.
pub fn gradient_discrepancy(a: f64, b: f64, tolerance: f64, abs_floor: f64) -> f64 {
    let scale = a.abs().max(b.abs()).max(abs_floor / tolerance);
    (a - b).abs() / scale
}

pub fn check_log_m(cfg: &VerifyConfig) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut worst: f64 = 0.0;
    for _ in 0..cfg.instances {
        let inst = random_instance(&mut rng, cfg, 1);
        let fast = log_m(&inst.x, &inst.y, &inst.theta)?;
        let brute = brute_log_m(&inst.x, &inst.y, &inst.theta, cfg.budget)?;
        worst = worst.max(relative_error(fast, brute, 1.0));
    }
    Ok(CheckResult::new("log_m vs enumeration", cfg.instances, worst, cfg.log_m_tolerance))
}

pub fn check_marginals(cfg: &VerifyConfig) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut worst: f64 = 0.0;
    for _ in 0..cfg.instances {
        let inst = random_instance(&mut rng, cfg, 1);
        let fast = marginals(&inst.x, &inst.y, &inst.theta)?;
        let brute = brute_marginals(&inst.x, &inst.y, &inst.theta, cfg.budget)?;
        let (len, hidden) = (inst.x.len(), inst.theta.hidden());
        for t in 0..len {
            for h in 0..hidden {
                for k in 0..2 {
                    worst = worst.max((fast.gamma(t, h, k) - brute.gamma(t, h, k)).abs());
                    if t + 1 < len {
                        for l in 0..2 {
                            worst = worst.max((fast.xi(t, h, k, l) - brute.xi(t, h, k, l)).abs());
                        }
                    }
                }
            }
        }
        worst = worst.max(fast.max_inconsistency());
    }
    Ok(CheckResult::new("marginals vs enumeration", cfg.instances, worst, cfg.marginal_tolerance))
}

/// Worst discrepancy per parameter block between the analytic gradient and
/// central finite differences.
pub fn check_gradients(cfg: &VerifyConfig) -> Result<Vec<CheckResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(2));
    let mut worst = [0.0f64; 7];
    for _ in 0..cfg.gradient_instances {
        let inst = random_instance(&mut rng, cfg, 2);
        let mut analytic = gradient_example(&inst.x, &inst.y, &inst.theta)?;
        if cfg.fault == Some(Fault::FlipTransitionGradient) {
            for g in analytic.a.iter_mut() {
                *g = -*g;
            }
        }
        let numeric = finite_diff_gradient(&inst.x, &inst.y, &inst.theta, cfg.fd_step)?;
        for (w, block) in worst.iter_mut().zip(Block::ALL) {
            for (a, n) in analytic.block(block).iter().zip(numeric.block(block)) {
                *w = w.max(gradient_discrepancy(*a, *n, cfg.gradient_tolerance, cfg.gradient_abs_floor));
            }
        }
    }
    Ok(Block::ALL
        .into_iter()
        .zip(worst)
        .map(|(block, w)| {
            CheckResult::new(format!("gradient {} vs finite differences", block.name()), cfg.gradient_instances, w, cfg.gradient_tolerance)
        })
        .collect())
}

/// Normalization of the predictive distribution, with every fourth instance
/// forced to `T = 1` and every fourth (offset) to `H = 1`.
pub fn check_normalization(cfg: &VerifyConfig) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(3));
    let mut worst: f64 = 0.0;
    let wide = VerifyConfig { max_hidden: 8, max_len: 30, max_dim: 5, max_classes: 6, param_scale: 3.0, ..cfg.clone() };
    for i in 0..cfg.normalization_instances {
        let family = match i % 4 {
            0 => VerifyConfig { max_len: 1, ..wide.clone() },
            1 => VerifyConfig { max_hidden: 1, ..wide.clone() },
            _ => wide.clone(),
        };
        let inst = random_instance(&mut rng, &family, 1);
        let p = predict_distribution(&inst.x, &inst.theta)?;
        if p.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::NumericRange(format!("probability outside [0, 1]: {p:?}")));
        }
        worst = worst.max((p.iter().sum::<f64>() - 1.0).abs());
    }
    Ok(CheckResult::new("predictive normalization", cfg.normalization_instances, worst, cfg.normalization_tolerance))
}

/// Runs every check. Refuses configurations whose largest instance would
/// exceed the enumeration budget.
pub fn run_verification(cfg: &VerifyConfig) -> Result<VerifyReport> {
    if cfg.max_hidden == 0 || cfg.max_len == 0 || cfg.max_dim == 0 || cfg.max_classes < 2 {
        return Err(Error::invalid("verification needs H, T, D >= 1 and K >= 2"));
    }
    cfg.budget.check(cfg.max_hidden, cfg.max_len)?;
    let mut checks = vec![check_log_m(cfg)?, check_marginals(cfg)?];
    checks.extend(check_gradients(cfg)?);
    checks.push(check_normalization(cfg)?);
    Ok(VerifyReport { checks })
}
