use super::LogDensity;

/// Position, momentum and the cached log-density/gradient at the position.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub position: Vec<f64>,
    pub momentum: Vec<f64>,
    pub grad: Vec<f64>,
    pub logp: f64,
}

impl PhasePoint {
    pub fn new<T: LogDensity + ?Sized>(target: &T, position: Vec<f64>, momentum: Vec<f64>) -> Self {
        let mut grad = vec![0.0; position.len()];
        let logp = target.logp_grad(&position, &mut grad);
        Self {
            position,
            momentum,
            grad,
            logp,
        }
    }

    pub fn kinetic_energy(&self) -> f64 {
        0.5 * self.momentum.iter().map(|p| p * p).sum::<f64>()
    }

    /// `-log p(q) + |p|^2 / 2`; NaN is mapped to +inf.
    pub fn hamiltonian(&self) -> f64 {
        let h = -self.logp + self.kinetic_energy();
        if h.is_nan() {
            f64::INFINITY
        } else {
            h
        }
    }

    pub fn is_finite(&self) -> bool {
        self.logp.is_finite()
            && self.grad.iter().all(|g| g.is_finite())
            && self.position.iter().all(|q| q.is_finite())
    }
}

/// One leapfrog step with identity mass matrix. A negative `step_size`
/// integrates backward in time.
pub fn leapfrog<T: LogDensity + ?Sized>(target: &T, point: &PhasePoint, step_size: f64) -> PhasePoint {
    let half = 0.5 * step_size;
    let momentum_half: Vec<f64> = point
        .momentum
        .iter()
        .zip(&point.grad)
        .map(|(p, g)| p + half * g)
        .collect();
    let position: Vec<f64> = point
        .position
        .iter()
        .zip(&momentum_half)
        .map(|(q, p)| q + step_size * p)
        .collect();
    let mut grad = vec![0.0; position.len()];
    let logp = target.logp_grad(&position, &mut grad);
    let momentum = momentum_half
        .iter()
        .zip(&grad)
        .map(|(p, g)| p + half * g)
        .collect();
    PhasePoint {
        position,
        momentum,
        grad,
        logp,
    }
}
