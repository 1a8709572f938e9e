//! Step-size schedules γ^r and the theoretical ceiling γ̄.

use crate::error::{CoreError, Result};

/// γ̄ = min{τ/L_∇f, τ/(τ + L̃√n)}: the step threshold below which the
/// asymptotic convergence guarantee applies.
pub fn gamma_bar(tau: f64, l_grad_f: f64, l_tilde: f64, n_blocks: usize) -> Result<f64> {
    if !(tau > 0.0) || !(l_grad_f > 0.0) || !(l_tilde > 0.0) || n_blocks == 0 {
        return Err(CoreError::invalid(format!(
            "gamma_bar needs positive inputs (tau={tau}, l_grad_f={l_grad_f}, l_tilde={l_tilde}, n={n_blocks})"
        )));
    }
    let a = tau / l_grad_f;
    let b = tau / (tau + l_tilde * (n_blocks as f64).sqrt());
    Ok(a.min(b))
}

/// Step-size schedule. Every emitted step lies in (0, 1]; the diminishing
/// form is harmonic, so Σ_r γ^r = ∞ and the sequence is monotone
/// decreasing.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepSchedule {
    Constant { gamma0: f64 },
    /// γ^r = gamma0 / (1 + eta·r)
    Diminishing { gamma0: f64, eta: f64 },
    /// γ^r = max(floor, gamma0 / (1 + eta·r))
    DecreaseThenHold { gamma0: f64, eta: f64, floor: f64 },
}

impl StepSchedule {
    pub fn validate(&self) -> Result<()> {
        let ok_gamma = |g: f64| g > 0.0 && g <= 1.0;
        match *self {
            StepSchedule::Constant { gamma0 } => {
                if !ok_gamma(gamma0) {
                    return Err(CoreError::invalid(format!(
                        "constant step {gamma0} must lie in (0, 1]"
                    )));
                }
            }
            StepSchedule::Diminishing { gamma0, eta } => {
                if !ok_gamma(gamma0) || !(eta > 0.0) {
                    return Err(CoreError::invalid(format!(
                        "diminishing schedule needs gamma0 in (0, 1] and eta > 0 (got {gamma0}, {eta})"
                    )));
                }
            }
            StepSchedule::DecreaseThenHold { gamma0, eta, floor } => {
                if !ok_gamma(gamma0) || !(eta > 0.0) || !(floor > 0.0) || floor > gamma0 {
                    return Err(CoreError::invalid(format!(
                        "decrease-then-hold needs 0 < floor <= gamma0 <= 1 and eta > 0 \
                         (got gamma0={gamma0}, eta={eta}, floor={floor})"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn step_at(&self, r: u64) -> f64 {
        match *self {
            StepSchedule::Constant { gamma0 } => gamma0,
            StepSchedule::Diminishing { gamma0, eta } => gamma0 / (1.0 + eta * r as f64),
            StepSchedule::DecreaseThenHold { gamma0, eta, floor } => {
                (gamma0 / (1.0 + eta * r as f64)).max(floor)
            }
        }
    }

    /// limsup_{r→∞} γ^r, the quantity gated against γ̄.
    pub fn limit(&self) -> f64 {
        match *self {
            StepSchedule::Constant { gamma0 } => gamma0,
            StepSchedule::Diminishing { .. } => 0.0,
            StepSchedule::DecreaseThenHold { floor, .. } => floor,
        }
    }

    /// Monotone nonincreasing in r (required by the cyclic-rule guarantee).
    pub fn is_monotone_decreasing(&self) -> bool {
        !matches!(self, StepSchedule::Constant { .. })
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            StepSchedule::Constant { .. } => "constant",
            StepSchedule::Diminishing { .. } => "diminishing",
            StepSchedule::DecreaseThenHold { .. } => "decrease-then-hold",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_bar_examples() {
        assert!((gamma_bar(1.0, 2.0, 1.0, 4).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((gamma_bar(1.0, 1.0, 1.0, 1).unwrap() - 0.5).abs() < 1e-15);
        assert!(gamma_bar(0.0, 1.0, 1.0, 1).is_err());
        assert!(gamma_bar(1.0, -2.0, 1.0, 1).is_err());
    }

    #[test]
    fn step_at_examples() {
        let c = StepSchedule::Constant { gamma0: 0.4 };
        assert_eq!(c.step_at(0), 0.4);
        assert_eq!(c.step_at(10_000), 0.4);

        let d = StepSchedule::Diminishing {
            gamma0: 1.0,
            eta: 1.0,
        };
        assert!((d.step_at(3) - 0.25).abs() < 1e-15);

        let h = StepSchedule::DecreaseThenHold {
            gamma0: 1.0,
            eta: 1.0,
            floor: 0.1,
        };
        assert_eq!(h.step_at(100), 0.1);
    }

    #[test]
    fn schedules_are_nonincreasing_and_in_unit_interval() {
        let schedules = [
            StepSchedule::Constant { gamma0: 1.0 },
            StepSchedule::Diminishing {
                gamma0: 0.9,
                eta: 0.05,
            },
            StepSchedule::DecreaseThenHold {
                gamma0: 0.8,
                eta: 0.2,
                floor: 0.05,
            },
        ];
        for s in schedules {
            s.validate().unwrap();
            let mut prev = f64::INFINITY;
            for r in 0..2000 {
                let g = s.step_at(r);
                assert!(g > 0.0 && g <= 1.0);
                assert!(g <= prev + 1e-15);
                prev = g;
            }
            assert!(s.limit() <= s.step_at(1999) + 1e-15);
        }
    }

    #[test]
    fn validation_rejects_bad_parameters() {
        assert!(StepSchedule::Constant { gamma0: 0.0 }.validate().is_err());
        assert!(StepSchedule::Constant { gamma0: 1.5 }.validate().is_err());
        assert!(StepSchedule::Diminishing {
            gamma0: 0.5,
            eta: 0.0
        }
        .validate()
        .is_err());
        assert!(StepSchedule::DecreaseThenHold {
            gamma0: 0.5,
            eta: 1.0,
            floor: 0.6
        }
        .validate()
        .is_err());
    }
}
