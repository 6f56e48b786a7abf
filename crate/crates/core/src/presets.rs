//! Canned experiment sets, sized to run in seconds.

use crate::error::{Error, Result};
use crate::harness::{ExperimentConfig, NesterovModeSpec, OptimizerSpec, ProblemSpec};
use crate::objective::EvalBudget;
use crate::planner::PlannerConfig;
use crate::report::XAxis;

pub const PRESET_NAMES: [&str; 4] = [
    "convex-fig4",
    "rosenbrock-fig6",
    "rosenbrock-p5-fig8",
    "rosenbrock-adam-fig10",
];

/// "Zero error" for acceptance purposes.
pub const ZERO_ERROR: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct Preset {
    pub name: &'static str,
    pub title: &'static str,
    pub x_axis: XAxis,
    pub configs: Vec<ExperimentConfig>,
}

pub fn preset(name: &str) -> Result<Preset> {
    match name {
        "convex-fig4" => Ok(convex_fig4()),
        "rosenbrock-fig6" => Ok(rosenbrock_fig6()),
        "rosenbrock-p5-fig8" => Ok(rosenbrock_p5_fig8()),
        "rosenbrock-adam-fig10" => Ok(rosenbrock_adam_fig10()),
        other => Err(Error::UnknownName {
            kind: "preset",
            name: other.to_string(),
        }),
    }
}

fn csawg(label: String, problem: ProblemSpec, cfg: PlannerConfig, budget: EvalBudget) -> ExperimentConfig {
    ExperimentConfig::new(label, problem, OptimizerSpec::csawg(cfg), budget).recording(false, true)
}

/// `Q = diag(1000, 1)` from `(−1, 2)`: GD at 0.00099, Nesterov, and the
/// planner at γ = 0.0009 for K ∈ {2, 10, 100, 1000}.
pub fn convex_fig4() -> Preset {
    let budget = EvalBudget::iterations(5000);
    let mut configs = vec![
        ExperimentConfig::new("GD 0.00099", ProblemSpec::convex_2d(), OptimizerSpec::Gd { gamma: 0.00099 }, budget),
        ExperimentConfig::new(
            "Nesterov",
            ProblemSpec::convex_2d(),
            OptimizerSpec::Nesterov {
                mode: NesterovModeSpec::StronglyConvex,
                mu: None,
                l: None,
            },
            budget,
        ),
    ];
    for k in [2, 10, 100, 1000] {
        configs.push(csawg(
            format!("Csawg K{k}"),
            ProblemSpec::convex_2d(),
            PlannerConfig::single(0.0009, k),
            budget,
        ));
    }
    Preset {
        name: "convex-fig4",
        title: "Convex quadratic Q = diag(1000, 1)",
        x_axis: XAxis::Iteration,
        configs,
    }
}

/// Rosenbrock from `(−1, 0)`: the GD step-size grid and the planner for
/// K ∈ {2, 5, 10} at γ ∈ {0.001, 0.0015}, 20 000 gradient evaluations each.
pub fn rosenbrock_fig6() -> Preset {
    let budget = EvalBudget::iterations(u64::MAX).with_grad_evals(20_000);
    let mut configs = Vec::new();
    for gamma in [0.0005, 0.001, 0.0015, 0.002] {
        configs.push(ExperimentConfig::new(
            format!("GD {gamma}"),
            ProblemSpec::rosenbrock(),
            OptimizerSpec::Gd { gamma },
            budget,
        ));
    }
    for gamma in [0.001, 0.0015] {
        for k in [2, 5, 10] {
            configs.push(csawg(
                format!("Csawg K{k} {gamma}"),
                ProblemSpec::rosenbrock(),
                PlannerConfig::single(gamma, k),
                budget,
            ));
        }
    }
    Preset {
        name: "rosenbrock-fig6",
        title: "Rosenbrock: GD vs step-size planning",
        x_axis: XAxis::GradEvals,
        configs,
    }
}

/// Repeated planning (P = 5, M = 10) on Rosenbrock for K ∈ {2, 10, 100}.
pub fn rosenbrock_p5_fig8() -> Preset {
    let budget = EvalBudget::iterations(1000).with_error_floor(ZERO_ERROR);
    let mut configs = vec![ExperimentConfig::new(
        "GD 0.001",
        ProblemSpec::rosenbrock(),
        OptimizerSpec::Gd { gamma: 0.001 },
        budget,
    )];
    for k in [2, 10, 100] {
        configs.push(csawg(
            format!("Csawg-p5 K{k}"),
            ProblemSpec::rosenbrock(),
            PlannerConfig::repeated(0.001, k, 5, 10),
            budget,
        ));
    }
    Preset {
        name: "rosenbrock-p5-fig8",
        title: "Rosenbrock: repeated planning (P = 5, M = 10)",
        x_axis: XAxis::Iteration,
        configs,
    }
}

/// Heavy ball, RMSprop and Adam over their search grids on Rosenbrock,
/// with GD and repeated planning for reference.
pub fn rosenbrock_adam_fig10() -> Preset {
    let budget = EvalBudget::iterations(u64::MAX).with_grad_evals(20_000);
    let problem = ProblemSpec::rosenbrock();
    let mut configs = vec![ExperimentConfig::new(
        "GD 0.001",
        problem.clone(),
        OptimizerSpec::Gd { gamma: 0.001 },
        budget,
    )];
    for p in [0.8, 0.9] {
        configs.push(ExperimentConfig::new(
            format!("HB 0.0015 p={p}"),
            problem.clone(),
            OptimizerSpec::HeavyBall { gamma: 0.0015, p },
            budget,
        ));
    }
    for alpha in [0.0005, 0.001, 0.0015, 0.01] {
        for beta in [0.8, 0.9, 0.99] {
            configs.push(ExperimentConfig::new(
                format!("RMSprop {alpha} b={beta}"),
                problem.clone(),
                OptimizerSpec::Rmsprop {
                    alpha,
                    beta,
                    eps: crate::baselines::DEFAULT_RMSPROP_EPS,
                },
                budget,
            ));
        }
    }
    for alpha in [0.005, 0.01] {
        for beta1 in [0.9, 0.99, 0.999] {
            for beta2 in [0.99, 0.999, 0.9999] {
                configs.push(ExperimentConfig::new(
                    format!("Adam {alpha} b1={beta1} b2={beta2}"),
                    problem.clone(),
                    OptimizerSpec::Adam {
                        alpha,
                        beta1,
                        beta2,
                        eps: crate::baselines::DEFAULT_ADAM_EPS,
                    },
                    budget,
                ));
            }
        }
    }
    configs.push(csawg(
        "Csawg-p5 K2".into(),
        problem,
        PlannerConfig::repeated(0.001, 2, 5, 10),
        budget.with_error_floor(ZERO_ERROR),
    ));
    Preset {
        name: "rosenbrock-adam-fig10",
        title: "Rosenbrock: momentum vs normalization",
        x_axis: XAxis::GradEvals,
        configs,
    }
}
