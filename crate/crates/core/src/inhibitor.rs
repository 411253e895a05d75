//! Inhibitor functions: maps from geodesic distance to regularizing coefficient.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InhibitorKind {
    /// `c - c(exp(-d²/σ₂) - exp(-d²/σ₁))`
    #[serde(rename = "dog")]
    DoG,
    /// `c · 2/√(3σ√π) · (1 - d²/σ²) · exp(-d²/(2σ²))`
    Ricker,
    /// `c · dⁿ`
    Diffusion,
    /// `c + c·cos(μd)`
    Sinusoid,
    /// `c`
    Constant,
}

/// Parameters of an inhibitor function. Fields not used by `kind` are ignored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InhibitorSpec {
    pub kind: InhibitorKind,
    pub c: f64,
    #[serde(default = "default_sigma1")]
    pub sigma1: f64,
    #[serde(default = "default_sigma2")]
    pub sigma2: f64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_n_exp")]
    pub n_exp: f64,
    #[serde(default = "default_mu")]
    pub mu: f64,
    /// Clamp negative values (Ricker's outer lobe) to zero.
    #[serde(default)]
    pub clamp_nonnegative: bool,
}

fn default_sigma1() -> f64 {
    1.0
}
fn default_sigma2() -> f64 {
    5.0
}
fn default_sigma() -> f64 {
    1.0
}
fn default_n_exp() -> f64 {
    2.0
}
fn default_mu() -> f64 {
    2.0
}

/// Derivative value plus a flag for points where the function is not
/// differentiable (`Diffusion` with `n < 1` at the origin).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Derivative {
    pub value: f64,
    pub degenerate: bool,
}

impl InhibitorSpec {
    fn base(kind: InhibitorKind, c: f64) -> Self {
        InhibitorSpec {
            kind,
            c,
            sigma1: default_sigma1(),
            sigma2: default_sigma2(),
            sigma: default_sigma(),
            n_exp: default_n_exp(),
            mu: default_mu(),
            clamp_nonnegative: false,
        }
    }

    pub fn dog(c: f64, sigma1: f64, sigma2: f64) -> Result<Self> {
        let s = InhibitorSpec {
            sigma1,
            sigma2,
            ..Self::base(InhibitorKind::DoG, c)
        };
        s.validate()?;
        Ok(s)
    }

    pub fn ricker(c: f64, sigma: f64) -> Result<Self> {
        let s = InhibitorSpec {
            sigma,
            ..Self::base(InhibitorKind::Ricker, c)
        };
        s.validate()?;
        Ok(s)
    }

    pub fn diffusion(c: f64, n_exp: f64) -> Result<Self> {
        let s = InhibitorSpec {
            n_exp,
            ..Self::base(InhibitorKind::Diffusion, c)
        };
        s.validate()?;
        Ok(s)
    }

    pub fn sinusoid(c: f64, mu: f64) -> Result<Self> {
        let s = InhibitorSpec {
            mu,
            ..Self::base(InhibitorKind::Sinusoid, c)
        };
        s.validate()?;
        Ok(s)
    }

    pub fn constant(c: f64) -> Result<Self> {
        let s = Self::base(InhibitorKind::Constant, c);
        s.validate()?;
        Ok(s)
    }

    /// Default parameters per kind: DoG `c=10, σ₁=1, σ₂=5`; Ricker `c=1, σ=1`;
    /// Diffusion `c=1, n=2`; Sinusoid `c=10, μ=2`; Constant `c=1`.
    pub fn default_for(kind: InhibitorKind) -> Self {
        let c = match kind {
            InhibitorKind::DoG | InhibitorKind::Sinusoid => 10.0,
            _ => 1.0,
        };
        Self::base(kind, c)
    }

    pub fn with_clamp(mut self, clamp: bool) -> Self {
        self.clamp_nonnegative = clamp;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!(
                    "inhibitor parameter {name} must be positive, got {v}"
                )))
            }
        };
        positive("c", self.c)?;
        match self.kind {
            InhibitorKind::DoG => {
                positive("sigma1", self.sigma1)?;
                positive("sigma2", self.sigma2)?;
                if self.sigma2 <= self.sigma1 {
                    return Err(Error::InvalidArgument(format!(
                        "difference of Gaussians needs sigma2 > sigma1, got {} <= {}",
                        self.sigma2, self.sigma1
                    )));
                }
            }
            InhibitorKind::Ricker => positive("sigma", self.sigma)?,
            InhibitorKind::Diffusion => positive("n_exp", self.n_exp)?,
            InhibitorKind::Sinusoid => positive("mu", self.mu)?,
            InhibitorKind::Constant => {}
        }
        Ok(())
    }

    /// True for the nondecreasing kinds, whose penalty is minimized by
    /// collapsing every neuron onto a single point.
    pub fn is_monotone(&self) -> bool {
        matches!(self.kind, InhibitorKind::Diffusion | InhibitorKind::Constant)
    }

    /// Unchecked value at `d`; [`evaluate`] is the checked form.
    pub(crate) fn value(&self, d: f64) -> f64 {
        let c = self.c;
        let raw = match self.kind {
            InhibitorKind::DoG => {
                let d2 = d * d;
                c - c * ((-d2 / self.sigma2).exp() - (-d2 / self.sigma1).exp())
            }
            InhibitorKind::Ricker => {
                let s2 = self.sigma * self.sigma;
                let d2 = d * d;
                c * ricker_amplitude(self.sigma) * (1.0 - d2 / s2) * (-d2 / (2.0 * s2)).exp()
            }
            InhibitorKind::Diffusion => c * d.powf(self.n_exp),
            InhibitorKind::Sinusoid => c + c * (self.mu * d).cos(),
            InhibitorKind::Constant => c,
        };
        if self.clamp_nonnegative {
            raw.max(0.0)
        } else {
            raw
        }
    }

    pub(crate) fn slope(&self, d: f64) -> Derivative {
        let c = self.c;
        let ok = |value| Derivative {
            value,
            degenerate: false,
        };
        if self.clamp_nonnegative && self.value_unclamped(d) < 0.0 {
            return ok(0.0);
        }
        match self.kind {
            InhibitorKind::DoG => {
                let d2 = d * d;
                ok(2.0 * c * d * ((-d2 / self.sigma2).exp() / self.sigma2 - (-d2 / self.sigma1).exp() / self.sigma1))
            }
            InhibitorKind::Ricker => {
                let s2 = self.sigma * self.sigma;
                let d2 = d * d;
                ok(-c * ricker_amplitude(self.sigma) * d / s2 * (3.0 - d2 / s2) * (-d2 / (2.0 * s2)).exp())
            }
            InhibitorKind::Diffusion => {
                let n = self.n_exp;
                if d == 0.0 {
                    if n < 1.0 {
                        Derivative {
                            value: 0.0,
                            degenerate: true,
                        }
                    } else if n == 1.0 {
                        ok(c)
                    } else {
                        ok(0.0)
                    }
                } else {
                    ok(c * n * d.powf(n - 1.0))
                }
            }
            InhibitorKind::Sinusoid => ok(-c * self.mu * (self.mu * d).sin()),
            InhibitorKind::Constant => ok(0.0),
        }
    }

    fn value_unclamped(&self, d: f64) -> f64 {
        InhibitorSpec {
            clamp_nonnegative: false,
            ..self.clone()
        }
        .value(d)
    }
}

fn ricker_amplitude(sigma: f64) -> f64 {
    2.0 / (3.0 * sigma * PI.sqrt()).sqrt()
}

fn check_distance(d: f64) -> Result<()> {
    if d.is_nan() || d < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "inhibitor distance must be non-negative, got {d}"
        )));
    }
    Ok(())
}

pub fn evaluate(spec: &InhibitorSpec, d: f64) -> Result<f64> {
    check_distance(d)?;
    Ok(spec.value(d))
}

pub fn derivative(spec: &InhibitorSpec, d: f64) -> Result<Derivative> {
    check_distance(d)?;
    Ok(spec.slope(d))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_values() {
        let dog = InhibitorSpec::dog(10.0, 1.0, 5.0).unwrap();
        assert_eq!(evaluate(&dog, 0.0).unwrap(), 10.0);
        let diff = InhibitorSpec::diffusion(1.0, 2.0).unwrap();
        assert!((evaluate(&diff, 3.0).unwrap() - 9.0).abs() < 1e-12);
        let sin = InhibitorSpec::sinusoid(3.0, 2.0).unwrap();
        assert_eq!(evaluate(&sin, 0.0).unwrap(), 6.0);
        let k = InhibitorSpec::constant(2.5).unwrap();
        assert_eq!(evaluate(&k, 17.0).unwrap(), 2.5);
    }

    #[test]
    fn ricker_peak() {
        // 2 / sqrt(3·sqrt(pi)), evaluated independently to 0.867325...
        let r = InhibitorSpec::ricker(1.0, 1.0).unwrap();
        assert!((evaluate(&r, 0.0).unwrap() - 0.867_325_070_584_077_5).abs() < 1e-12);
        // zero crossing at d = σ
        assert!(evaluate(&r, 1.0).unwrap().abs() < 1e-15);
        assert!(evaluate(&r, 2.0).unwrap() < 0.0);
        assert_eq!(evaluate(&r.clone().with_clamp(true), 2.0).unwrap(), 0.0);
    }

    #[test]
    fn dog_far_value() {
        // 10 - 10(e^-10 - e^-50)
        let dog = InhibitorSpec::dog(10.0, 1.0, 5.0).unwrap();
        let v = evaluate(&dog, 50f64.sqrt()).unwrap();
        assert!((v - 9.999_546_000_702_375).abs() < 1e-12, "{v}");
    }

    #[test]
    fn derivative_special_cases() {
        let dog = InhibitorSpec::dog(10.0, 1.0, 5.0).unwrap();
        assert_eq!(derivative(&dog, 0.0).unwrap().value, 0.0);
        let k = InhibitorSpec::constant(4.0).unwrap();
        assert_eq!(derivative(&k, 3.0).unwrap().value, 0.0);
        let root = InhibitorSpec::diffusion(1.0, 0.5).unwrap();
        let d0 = derivative(&root, 0.0).unwrap();
        assert!(d0.degenerate);
        assert_eq!(d0.value, 0.0);
    }

    #[test]
    fn dog_derivative_matches_central_difference() {
        let dog = InhibitorSpec::dog(10.0, 1.0, 5.0).unwrap();
        let h = 1e-6;
        let fd = (dog.value(1.0 + h) - dog.value(1.0 - h)) / (2.0 * h);
        assert!((derivative(&dog, 1.0).unwrap().value - fd).abs() < 1e-7);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(InhibitorSpec::dog(10.0, 5.0, 1.0).is_err());
        assert!(InhibitorSpec::dog(10.0, 2.0, 2.0).is_err());
        assert!(InhibitorSpec::dog(-1.0, 1.0, 5.0).is_err());
        assert!(InhibitorSpec::ricker(1.0, 0.0).is_err());
        let dog = InhibitorSpec::dog(10.0, 1.0, 5.0).unwrap();
        assert!(evaluate(&dog, -0.1).is_err());
        assert!(derivative(&dog, -0.1).is_err());
    }

    #[test]
    fn monotone_classification() {
        use InhibitorKind::*;
        for kind in [DoG, Ricker, Diffusion, Sinusoid, Constant] {
            let s = InhibitorSpec::default_for(kind);
            assert_eq!(s.is_monotone(), matches!(kind, Diffusion | Constant));
        }
    }
}
