//! Ground-truth radio channel: linear attenuation per meter plus bounded
//! uniform noise.

use rand::Rng;

use crate::model::NodeId;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reception {
    Received { rss: f64 },
    OutOfRange,
    BelowSensitivity { rss: f64 },
}

impl Reception {
    pub fn rss(self) -> Option<f64> {
        match self {
            Reception::Received { rss } => Some(rss),
            _ => None,
        }
    }
}

/// `RSS = P − α·d + noise`.
pub fn received_strength(tx_power: f64, alpha: f64, distance: f64, noise: f64) -> f64 {
    tx_power - alpha * distance + noise
}

/// Per-link attenuation coefficients, symmetric, fixed for a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    n: usize,
    alpha: Vec<f64>,
    /// Noise is uniform in `[-noise, noise]`.
    pub noise: f64,
}

impl Channel {
    /// Same coefficient on every link.
    pub fn uniform(n: usize, alpha: f64, noise: f64) -> Self {
        assert!(alpha > 0.0, "attenuation must be positive");
        Channel {
            n,
            alpha: vec![alpha; n * n],
            noise,
        }
    }

    /// One coefficient per unordered pair, uniform in `[lo, hi]`, drawn in
    /// pair order `(0,1), (0,2), …, (1,2), …`.
    pub fn random<R: Rng + ?Sized>(n: usize, lo: f64, hi: f64, noise: f64, rng: &mut R) -> Self {
        assert!(lo > 0.0 && lo <= hi, "attenuation range must be positive");
        let mut alpha = vec![lo; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let a = if hi > lo { rng.random_range(lo..=hi) } else { lo };
                alpha[i * n + j] = a;
                alpha[j * n + i] = a;
            }
        }
        Channel { n, alpha, noise }
    }

    pub fn alpha(&self, a: NodeId, b: NodeId) -> f64 {
        self.alpha[a.index() * self.n + b.index()]
    }

    pub fn set_alpha(&mut self, a: NodeId, b: NodeId, value: f64) {
        assert!(value > 0.0, "attenuation must be positive");
        self.alpha[a.index() * self.n + b.index()] = value;
        self.alpha[b.index() * self.n + a.index()] = value;
    }

    fn noise_sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.noise > 0.0 {
            rng.random_range(-self.noise..=self.noise)
        } else {
            0.0
        }
    }

    /// Outcome of sending at `tx_power` from `from` to `to` over `distance`.
    /// The receiver must be inside the sender's radio range and hear at
    /// least `min_rcv`.
    #[allow(clippy::too_many_arguments)]
    pub fn propagate<R: Rng + ?Sized>(
        &self,
        from: NodeId,
        to: NodeId,
        tx_power: f64,
        distance: f64,
        sender_range: f64,
        min_rcv: f64,
        rng: &mut R,
    ) -> Reception {
        // Draw noise unconditionally so the stream does not depend on outcomes.
        let noise = self.noise_sample(rng);
        if distance > sender_range {
            return Reception::OutOfRange;
        }
        let rss = received_strength(tx_power, self.alpha(from, to), distance, noise).min(tx_power);
        if rss < min_rcv {
            Reception::BelowSensitivity { rss }
        } else {
            Reception::Received { rss }
        }
    }
}
