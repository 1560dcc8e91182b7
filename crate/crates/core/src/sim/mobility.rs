//! Mobility models. Peripheral nodes never move; everybody else is stepped
//! every `dt` seconds and stays inside the arena.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::config::MobilityModel;
use crate::geometry::{distance, Point, Rect};
use crate::model::NodeState;

/// Per-node model state.
#[derive(Debug, Clone, PartialEq)]
pub enum Mobility {
    Static,
    Waypoint {
        target: Point,
        speed: f64,
        /// Seconds of pause left before heading to `target`.
        pause: f64,
    },
    Walk,
    Gaussian {
        sigma: f64,
    },
}

/// Knobs shared by all nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobilityParams {
    pub pause_max: f64,
    pub gaussian_sigma: f64,
}

fn uniform_point<R: Rng + ?Sized>(arena: Rect, rng: &mut R) -> Point {
    Point::new(
        rng.random_range(arena.min.x..=arena.max.x),
        rng.random_range(arena.min.y..=arena.max.y),
    )
}

fn waypoint_speed<R: Rng + ?Sized>(vmax: f64, rng: &mut R) -> f64 {
    // Bounded away from zero so nodes do not stall on a distant waypoint.
    rng.random_range(0.1 * vmax..=vmax)
}

impl Mobility {
    pub fn init<R: Rng + ?Sized>(
        model: MobilityModel,
        node: &NodeState,
        arena: Rect,
        params: MobilityParams,
        rng: &mut R,
    ) -> Self {
        if node.is_peripheral || node.max_velocity <= 0.0 {
            return Mobility::Static;
        }
        match model {
            MobilityModel::RandomWaypoint => Mobility::Waypoint {
                target: uniform_point(arena, rng),
                speed: waypoint_speed(node.max_velocity, rng),
                pause: 0.0,
            },
            MobilityModel::RandomWalk => Mobility::Walk,
            MobilityModel::Gaussian => Mobility::Gaussian {
                sigma: params.gaussian_sigma,
            },
        }
    }

    /// Advances `node` by `dt` seconds.
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        node: &mut NodeState,
        dt: f64,
        arena: Rect,
        params: MobilityParams,
        rng: &mut R,
    ) {
        assert!(dt > 0.0, "mobility step must be positive");
        let vmax = node.max_velocity;
        match self {
            Mobility::Static => node.velocity = Point::ORIGIN,
            Mobility::Waypoint { target, speed, pause } => {
                if *pause > 0.0 {
                    *pause = (*pause - dt).max(0.0);
                    node.velocity = Point::ORIGIN;
                    return;
                }
                let remaining = distance(node.position, *target);
                let reach = *speed * dt;
                if remaining <= reach {
                    node.position = *target;
                    node.velocity = Point::ORIGIN;
                    *target = uniform_point(arena, rng);
                    *speed = waypoint_speed(vmax, rng);
                    *pause = if params.pause_max > 0.0 {
                        rng.random_range(0.0..=params.pause_max)
                    } else {
                        0.0
                    };
                } else {
                    let v = (*target - node.position).unit() * *speed;
                    node.position = node.position + v * dt;
                    node.velocity = v;
                }
            }
            Mobility::Walk => {
                let heading = rng.random_range(0.0..std::f64::consts::TAU);
                let v = Point::new(heading.cos(), heading.sin()) * vmax;
                move_reflecting(node, v, dt, arena);
            }
            Mobility::Gaussian { sigma } => {
                let mut v = node.velocity;
                if *sigma > 0.0 {
                    let n = Normal::new(0.0, *sigma).expect("finite sigma");
                    v = v + Point::new(n.sample(rng), n.sample(rng));
                }
                if v.norm() > vmax {
                    v = v.unit() * vmax;
                }
                move_reflecting(node, v, dt, arena);
            }
        }
        node.position = arena.clamp(node.position);
    }
}

fn move_reflecting(node: &mut NodeState, v: Point, dt: f64, arena: Rect) {
    let (p, fx, fy) = arena.reflect(node.position + v * dt);
    node.position = p;
    node.velocity = Point::new(if fx { -v.x } else { v.x }, if fy { -v.y } else { v.y });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{NodeId, PowerLevels, ZoneId};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const PARAMS: MobilityParams = MobilityParams {
        pause_max: 2.0,
        gaussian_sigma: 0.5,
    };

    fn node(x: f64, y: f64, vmax: f64) -> NodeState {
        NodeState {
            id: NodeId(0),
            position: Point::new(x, y),
            velocity: Point::ORIGIN,
            max_velocity: vmax,
            residual_energy: 1.0,
            power_levels: PowerLevels::new(vec![1.0]).unwrap(),
            radio_range: 10.0,
            min_rcv: 1.0,
            zone_id: ZoneId(0),
            is_peripheral: false,
            alive: true,
        }
    }

    fn arena() -> Rect {
        Rect::new(Point::ORIGIN, Point::new(100.0, 100.0))
    }

    #[test]
    fn waypoint_moves_along_unit_vector() {
        let mut n = node(0.0, 0.0, 1.0);
        let mut m = Mobility::Waypoint {
            target: Point::new(3.0, 4.0),
            speed: 1.0,
            pause: 0.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        m.step(&mut n, 1.0, arena(), PARAMS, &mut rng);
        assert_relative_eq!(n.position.x, 0.6, epsilon = 1e-12);
        assert_relative_eq!(n.position.y, 0.8, epsilon = 1e-12);
    }

    #[test]
    fn zero_velocity_never_moves() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for model in [
            MobilityModel::RandomWaypoint,
            MobilityModel::RandomWalk,
            MobilityModel::Gaussian,
        ] {
            let mut n = node(5.0, 5.0, 0.0);
            let mut m = Mobility::init(model, &n, arena(), PARAMS, &mut rng);
            for _ in 0..10 {
                m.step(&mut n, 1.0, arena(), PARAMS, &mut rng);
            }
            assert_eq!(n.position, Point::new(5.0, 5.0));
        }
    }

    #[test]
    fn walk_reflects_off_walls() {
        let mut n = node(0.5, 50.0, 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        move_reflecting(&mut n, Point::new(-2.0, 0.0), 1.0, arena());
        assert_relative_eq!(n.position.x, 1.5);
        assert_eq!(n.velocity, Point::new(2.0, 0.0));
        let mut m = Mobility::Walk;
        for _ in 0..500 {
            m.step(&mut n, 1.0, arena(), PARAMS, &mut rng);
            assert!(arena().contains(n.position));
            assert_relative_eq!(n.velocity.norm(), 2.0, epsilon = 1e-9);
        }
    }

    proptest::proptest! {
        #[test]
        fn positions_stay_inside(seed in 0u64..1000, model_ix in 0usize..3, vmax in 0.0f64..30.0) {
            let model = [MobilityModel::RandomWaypoint, MobilityModel::RandomWalk, MobilityModel::Gaussian][model_ix];
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut n = node(99.0, 1.0, vmax);
            let mut m = Mobility::init(model, &n, arena(), PARAMS, &mut rng);
            for _ in 0..50 {
                m.step(&mut n, 1.0, arena(), PARAMS, &mut rng);
                proptest::prop_assert!(arena().contains(n.position));
                proptest::prop_assert!(n.velocity.norm() <= vmax * (1.0 + 1e-9) + 1e-12);
            }
        }
    }
}
