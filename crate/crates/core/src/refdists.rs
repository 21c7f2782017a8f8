//! Reference distributions for simulations: standard Gaussian, Laplace with
//! unit scale, standard logistic, and the symmetrized beta family
//! `f_r(x) = C_r (1 - x²/r)^{r/2}` on `[-√r, √r]`.

use crate::error::{Error, Result};
use crate::normal;
use crate::quad::{integrate, integrate_with_breaks, QuadConfig};
use crate::symlc::SymmetricDensity;
use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Family {
    Gaussian,
    Laplace,
    Logistic,
    SymBeta(f64),
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Gaussian => f.write_str("gaussian"),
            Family::Laplace => f.write_str("laplace"),
            Family::Logistic => f.write_str("logistic"),
            Family::SymBeta(r) => write!(f, "symbeta:{r}"),
        }
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "gaussian" | "normal" => return Ok(Family::Gaussian),
            "laplace" => return Ok(Family::Laplace),
            "logistic" => return Ok(Family::Logistic),
            _ => {}
        }
        if let Some(r) = lower.strip_prefix("symbeta:") {
            let r: f64 = r
                .parse()
                .map_err(|_| Error::InvalidInput(format!("bad symbeta parameter in '{s}'")))?;
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::InvalidInput(format!("symbeta needs r > 0, got {r}")));
            }
            return Ok(Family::SymBeta(r));
        }
        Err(Error::InvalidInput(format!("unknown family '{s}'")))
    }
}

impl TryFrom<String> for Family {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Family> for String {
    fn from(f: Family) -> String {
        f.to_string()
    }
}

/// A family shifted to center `theta0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceDistribution {
    pub family: Family,
    pub theta0: f64,
}

const FISHER_QUAD: QuadConfig = QuadConfig {
    abs_tol: 1e-14,
    rel_tol: 1e-12,
    max_subdivisions: 2000,
};

fn symbeta_log_norm(r: f64) -> f64 {
    libm::lgamma(1.5 + 0.5 * r)
        - 0.5 * (std::f64::consts::PI * r).ln()
        - libm::lgamma(1.0 + 0.5 * r)
}

impl Family {
    /// The five families used in the benchmark tables, in table order.
    pub fn benchmark_set() -> [Family; 5] {
        [
            Family::Gaussian,
            Family::Laplace,
            Family::SymBeta(2.1),
            Family::SymBeta(4.5),
            Family::Logistic,
        ]
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        match *self {
            Family::Gaussian => normal::ln_pdf(x),
            Family::Laplace => -x.abs() - std::f64::consts::LN_2,
            Family::Logistic => {
                let a = -x.abs();
                a - 2.0 * a.exp().ln_1p()
            }
            Family::SymBeta(r) => {
                let u = 1.0 - x * x / r;
                if u > 0.0 && x.abs() < r.sqrt() {
                    symbeta_log_norm(r) + 0.5 * r * u.ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.log_pdf(x).exp()
    }

    /// Right derivative of the log-density; zero outside the open support.
    pub fn score(&self, x: f64) -> f64 {
        match *self {
            Family::Gaussian => -x,
            Family::Laplace => {
                if x >= 0.0 {
                    -1.0
                } else {
                    1.0
                }
            }
            Family::Logistic => -(0.5 * x).tanh(),
            Family::SymBeta(r) => {
                let u = 1.0 - x * x / r;
                if u > 0.0 && x.abs() < r.sqrt() {
                    -x / u
                } else {
                    0.0
                }
            }
        }
    }

    /// Second derivative of the symmetrized-beta log-density,
    /// `-(1 + x²/r) / (1 - x²/r)²`, which is unbounded near `±√r`. `None`
    /// for the other families.
    pub fn symbeta_curvature(&self, x: f64) -> Option<f64> {
        match *self {
            Family::SymBeta(r) => {
                let u = 1.0 - x * x / r;
                Some(if u > 0.0 {
                    -(1.0 + x * x / r) / (u * u)
                } else {
                    f64::NAN
                })
            }
            _ => None,
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x > 0.0 {
            1.0 - self.sf(x)
        } else {
            self.sf(-x)
        }
    }

    /// `P(X > x)`.
    pub fn sf(&self, x: f64) -> f64 {
        match *self {
            Family::Gaussian => normal::sf(x),
            Family::Laplace => {
                if x >= 0.0 {
                    0.5 * (-x).exp()
                } else {
                    1.0 - 0.5 * x.exp()
                }
            }
            Family::Logistic => {
                if x >= 0.0 {
                    let e = (-x).exp();
                    e / (1.0 + e)
                } else {
                    1.0 / (1.0 + x.exp())
                }
            }
            Family::SymBeta(r) => {
                let s = r.sqrt();
                if x >= s {
                    return 0.0;
                }
                if x < 0.0 {
                    return 1.0 - self.sf(-x);
                }
                if x == 0.0 {
                    return 0.5;
                }
                let a = 1.0 + 0.5 * r;
                // X = √r (2B - 1), so P(X > x) = P(B < (1 - x/√r)/2)
                statrs::function::beta::beta_reg(a, a, 0.5 * (1.0 - x / s))
            }
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Family::Gaussian => 1.0,
            Family::Laplace => 2.0,
            Family::Logistic => std::f64::consts::PI.powi(2) / 3.0,
            Family::SymBeta(r) => r / (r + 3.0),
        }
    }

    pub fn support_radius(&self) -> f64 {
        match *self {
            Family::SymBeta(r) => r.sqrt(),
            _ => f64::INFINITY,
        }
    }

    // radius carrying all but a negligible fraction of the mass
    fn tail_radius(&self) -> f64 {
        match *self {
            Family::Gaussian => 40.0,
            Family::Laplace | Family::Logistic => 750.0,
            Family::SymBeta(r) => r.sqrt(),
        }
    }

    /// Fisher information for location `∫ (f'/f)² f`, infinite for the
    /// symmetrized beta with `r <= 2`.
    pub fn fisher_info(&self) -> Result<f64> {
        match *self {
            Family::SymBeta(r) if r <= 2.0 => Ok(f64::INFINITY),
            Family::SymBeta(r) => {
                // I = C_r r^{3/2} ∫_{-1}^{1} u² (1 - u²)^p du with p = r/2 - 2;
                // substituting 1 - u = s^k, k = 1/(p + 1), removes the endpoint
                // singularity of (1 - u)^p
                let p = 0.5 * r - 2.0;
                let k = 1.0 / (p + 1.0);
                let g = |s: f64| {
                    let u = 1.0 - s.powf(k);
                    k * u * u * (1.0 + u).powf(p)
                };
                let half = integrate(g, 0.0, 1.0, &FISHER_QUAD)?;
                Ok(2.0 * symbeta_log_norm(r).exp() * r.powf(1.5) * half)
            }
            _ => {
                let f = |x: f64| {
                    let s = self.score(x);
                    2.0 * s * s * self.pdf(x)
                };
                integrate_with_breaks(f, 0.0, self.tail_radius(), &[1.0, 5.0, 20.0], &FISHER_QUAD)
            }
        }
    }

    /// One draw from the centered family.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Family::Gaussian => rng.sample(StandardNormal),
            Family::Laplace => {
                let u: f64 = rng.random::<f64>() - 0.5;
                let v = 1.0 - 2.0 * u.abs();
                if v <= 0.0 {
                    return 0.0;
                }
                -u.signum() * v.ln()
            }
            Family::Logistic => {
                let u: f64 = rng.random();
                if u <= 0.0 {
                    return self.draw(rng);
                }
                (u / (1.0 - u)).ln()
            }
            Family::SymBeta(r) => {
                let a = 1.0 + 0.5 * r;
                let b = Beta::new(a, a).expect("valid beta shape");
                r.sqrt() * (2.0 * b.sample(rng) - 1.0)
            }
        }
    }
}

impl ReferenceDistribution {
    pub fn new(family: Family, theta0: f64) -> Self {
        Self { family, theta0 }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.family.pdf(x - self.theta0)
    }

    pub fn score(&self, x: f64) -> f64 {
        self.family.score(x - self.theta0)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.family.cdf(x - self.theta0)
    }

    pub fn fisher_info(&self) -> Result<f64> {
        self.family.fisher_info()
    }

    /// `n` independent draws.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        (0..n)
            .map(|_| self.theta0 + self.family.draw(rng))
            .collect()
    }
}

/// `n` draws from `dist` with a ChaCha generator seeded by `seed`.
pub fn ref_sample(dist: &ReferenceDistribution, n: usize, seed: u64) -> Vec<f64> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    dist.sample(n, &mut rng)
}

impl SymmetricDensity for Family {
    fn density(&self, z: f64) -> f64 {
        self.pdf(z)
    }
    fn log_density(&self, z: f64) -> f64 {
        self.log_pdf(z)
    }
    fn score(&self, z: f64) -> f64 {
        Family::score(self, z)
    }
    fn support_radius(&self) -> f64 {
        Family::support_radius(self)
    }
    fn effective_radius(&self) -> f64 {
        self.tail_radius()
    }
    fn breakpoints(&self) -> Vec<f64> {
        match self {
            Family::Laplace => vec![0.0],
            _ => Vec::new(),
        }
    }
    fn upper_tail(&self, z: f64) -> Result<f64> {
        Ok(self.sf(z))
    }
}
