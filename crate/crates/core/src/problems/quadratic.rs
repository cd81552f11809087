/// `f(x, y) = μx²/2 + Ly²/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticProblem {
    pub mu: f64,
    pub l: f64,
}

impl QuadraticProblem {
    pub fn new(mu: f64, l: f64) -> Result<Self, super::ProblemError> {
        if !(mu > 0.0 && l >= mu && l.is_finite()) {
            return Err(super::ProblemError::InvalidParameter(format!(
                "need 0 < mu <= L, got mu={mu} L={l}"
            )));
        }
        Ok(QuadraticProblem { mu, l })
    }

    pub fn value(&self, w: &[f64]) -> f64 {
        0.5 * self.mu * w[0] * w[0] + 0.5 * self.l * w[1] * w[1]
    }

    pub fn grad(&self, w: &[f64]) -> Vec<f64> {
        vec![self.mu * w[0], self.l * w[1]]
    }
}
