use rand::Rng;
use rand_distr::StandardNormal;

/// Ornstein-Uhlenbeck process, one independent coordinate per action unit.
#[derive(Clone, Debug, PartialEq)]
pub struct OuNoise {
    pub state: Vec<f64>,
    pub mu: f64,
    pub theta: f64,
    pub sigma: f64,
    pub dt: f64,
}

impl OuNoise {
    pub fn new(dim: usize, mu: f64, theta: f64, sigma: f64, dt: f64) -> Self {
        Self {
            state: vec![mu; dim],
            mu,
            theta,
            sigma,
            dt,
        }
    }

    /// `state += theta·(mu − state)·dt + sigma·√dt·N(0, 1)`
    pub fn step(&mut self, rng: &mut impl Rng) -> &[f64] {
        let sd = self.sigma * self.dt.sqrt();
        for x in &mut self.state {
            let z: f64 = rng.sample(StandardNormal);
            *x += self.theta * (self.mu - *x) * self.dt + sd * z;
        }
        &self.state
    }

    pub fn reset(&mut self) {
        self.state.iter_mut().for_each(|x| *x = self.mu);
    }
}
