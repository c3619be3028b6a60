use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;

fn agent(role: Role, x: f64, y: f64) -> EntityState<f64> {
    EntityState {
        position: Vec2::new(x, y),
        velocity: Vec2::zero(),
        kind: EntityKind::Agent,
        role,
        radius: 0.05,
        max_speed: 1.0,
        accel_scale: 3.0,
        movable: true,
    }
}

fn landmark(x: f64, y: f64) -> EntityState<f64> {
    EntityState {
        position: Vec2::new(x, y),
        velocity: Vec2::zero(),
        kind: EntityKind::Landmark,
        role: Role::Landmark,
        radius: 0.05,
        max_speed: 0.0,
        accel_scale: 0.0,
        movable: false,
    }
}

fn world(agents: Vec<EntityState<f64>>, landmarks: Vec<EntityState<f64>>, payload: Payload<f64>) -> WorldState<f64> {
    let n = agents.len();
    WorldState {
        agents,
        landmarks,
        comm: vec![Vec::new(); n],
        timestep: 0,
        horizon: 25,
        payload,
    }
}

fn holds(env: &Env<f64>) -> Vec<EnvAction<f64>> {
    (0..env.n_agents())
        .map(|i| {
            let spec = env.action_spec(i);
            EnvAction {
                movement: spec.movement.then_some([1.0, 0.0, 0.0, 0.0, 0.0]),
                communication: (spec.comm > 0).then(|| vec![0.0; spec.comm]),
            }
        })
        .collect()
}

#[test]
fn reset_positions_in_unit_box_and_deterministic() {
    for cfg in [
        ScenarioConfig::cooperative_navigation(),
        ScenarioConfig::cooperative_communication(),
        ScenarioConfig::predator_prey(5, 3),
        ScenarioConfig::covert_communication(),
    ] {
        let env = Env::<f64>::new(cfg, PhysicsConfig::default()).unwrap();
        for seed in 0..20 {
            let w = env.reset(&mut ChaCha8Rng::seed_from_u64(seed));
            for e in w.agents.iter().chain(&w.landmarks) {
                assert!(e.position.x.abs() <= 1.0 && e.position.y.abs() <= 1.0);
                assert_eq!(e.velocity, Vec2::zero());
            }
            assert_eq!(w, env.reset(&mut ChaCha8Rng::seed_from_u64(seed)));
        }
    }
}

#[test]
fn cooperative_navigation_has_three_agents_and_landmarks() {
    let env = Env::<f64>::new(ScenarioConfig::cooperative_navigation(), PhysicsConfig::default()).unwrap();
    let w = env.reset(&mut ChaCha8Rng::seed_from_u64(0));
    assert_eq!(w.agents.len(), 3);
    assert_eq!(w.landmarks.len(), 3);
    assert_eq!(env.obs_len(0), 4 + 6 + 8);
}

#[test]
fn nonpositive_counts_rejected() {
    let bad = [
        ScenarioConfig::predator_prey(0, 1),
        ScenarioConfig::predator_prey(3, 0),
        ScenarioConfig {
            agents: 0,
            ..ScenarioConfig::cooperative_navigation()
        },
    ];
    for cfg in bad {
        assert!(matches!(Env::<f64>::new(cfg, PhysicsConfig::default()), Err(EnvError::Config(_))));
    }
}

#[test]
fn decode_examples() {
    assert_eq!(decode_action(&[1.0, 0.0, 0.0, 0.0, 0.0], 1.0).unwrap(), Vec2::new(0.0, 0.0));
    assert_eq!(decode_action(&[0.0, 1.0, 0.0, 0.0, 0.0], 1.0).unwrap(), Vec2::new(1.0, 0.0));
    assert_eq!(decode_action(&[0.0, 0.5, 0.5, 0.0, 0.0], 1.0).unwrap(), Vec2::new(0.0, 0.0));
    assert!(matches!(
        decode_action(&[0.0, f64::NAN, 0.0, 0.0, 0.0], 1.0),
        Err(EnvError::NonFinite { .. })
    ));
}

#[test]
fn hold_actions_keep_resting_agents_in_place() {
    let env = Env::<f64>::new(ScenarioConfig::predator_prey(3, 2), PhysicsConfig::default()).unwrap();
    let mut w = env.reset(&mut ChaCha8Rng::seed_from_u64(11));
    // Spread agents out so no contact forces act.
    for (k, a) in w.agents.iter_mut().enumerate() {
        a.position = Vec2::new(-0.8 + 0.4 * k as f64, 0.0);
    }
    let out = env.step(&w, &holds(&env)).unwrap();
    for (a, b) in out.world.agents.iter().zip(&w.agents) {
        assert_eq!(a.position, b.position);
    }
}

#[test]
fn integrator_hand_evaluation() {
    let cfg = ScenarioConfig {
        agents: 1,
        landmarks: 1,
        ..ScenarioConfig::cooperative_navigation()
    };
    let physics = PhysicsConfig {
        agent_accel: 1.0,
        ..PhysicsConfig::default()
    };
    let env = Env::<f64>::new(cfg, physics).unwrap();
    let mut w = env.reset(&mut ChaCha8Rng::seed_from_u64(0));
    w.agents[0].position = Vec2::new(0.2, 0.3);
    let act = EnvAction {
        movement: Some([0.0, 1.0, 0.0, 0.0, 0.0]),
        communication: None,
    };
    let out = env.step(&w, &[act]).unwrap();
    let a = &out.world.agents[0];
    assert!((a.velocity.x - 0.1).abs() < 1e-15 && a.velocity.y == 0.0);
    assert!((a.position.x - 0.21).abs() < 1e-15 && a.position.y == 0.3);
}

#[test]
fn step_is_deterministic_and_counts_actions() {
    let env = Env::<f64>::new(ScenarioConfig::cooperative_navigation(), PhysicsConfig::default()).unwrap();
    let w = env.reset(&mut ChaCha8Rng::seed_from_u64(2));
    let acts: Vec<_> = (0..3)
        .map(|i| env.decode_flat(i, &[0.1, 0.9, -0.2, 0.3, -0.7]).unwrap())
        .collect();
    assert_eq!(env.step(&w, &acts).unwrap(), env.step(&w, &acts).unwrap());
    assert!(matches!(env.step(&w, &acts[..2]), Err(EnvError::Contract(_))));
}

#[test]
fn role_inconsistent_action_rejected() {
    let env = Env::<f64>::new(ScenarioConfig::cooperative_communication(), PhysicsConfig::default()).unwrap();
    let w = env.reset(&mut ChaCha8Rng::seed_from_u64(2));
    // speaker given a movement channel
    let acts = vec![EnvAction::hold(), EnvAction::hold()];
    assert!(matches!(env.step(&w, &acts), Err(EnvError::Contract(_))));
}

#[test]
fn terminal_exactly_at_horizon() {
    let env = Env::<f64>::new(ScenarioConfig::cooperative_navigation(), PhysicsConfig::default()).unwrap();
    let mut w = env.reset(&mut ChaCha8Rng::seed_from_u64(5));
    for t in 1..=25 {
        let out = env.step(&w, &holds(&env)).unwrap();
        assert_eq!(out.terminal, t == 25);
        assert_eq!(out.rewards.len(), 3);
        w = out.world;
    }
    assert!(env.step(&w, &holds(&env)).is_err());
}

#[test]
fn relative_position_block() {
    let env = Env::<f64>::new(
        ScenarioConfig {
            agents: 2,
            landmarks: 1,
            ..ScenarioConfig::cooperative_navigation()
        },
        PhysicsConfig::default(),
    )
    .unwrap();
    let w = world(
        vec![agent(Role::Navigator, 0.0, 0.0), agent(Role::Navigator, 1.0, 1.0)],
        vec![landmark(0.5, -0.5)],
        Payload::None,
    );
    let obs = env.observe(&w, 0);
    // vel(2) pos(2) landmark(2) then other agent's relative position.
    assert_eq!(&obs[6..8], &[1.0, 1.0]);
    assert_eq!(obs.len(), env.obs_len(0));
}

#[test]
fn listener_does_not_see_goal_color() {
    let env = Env::<f64>::new(ScenarioConfig::cooperative_communication(), PhysicsConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut w = env.reset(&mut rng);
    w.payload = Payload::GoalColor(0);
    let a = env.observe(&w, 1);
    w.payload = Payload::GoalColor(2);
    let b = env.observe(&w, 1);
    assert_eq!(a, b);
    // the speaker does
    w.payload = Payload::GoalColor(0);
    let s0 = env.observe(&w, 0);
    w.payload = Payload::GoalColor(2);
    assert_ne!(s0, env.observe(&w, 0));
}

#[test]
fn observation_length_constant_across_steps() {
    for cfg in [
        ScenarioConfig::cooperative_navigation(),
        ScenarioConfig::cooperative_communication(),
        ScenarioConfig::predator_prey(5, 3),
        ScenarioConfig::covert_communication(),
    ] {
        let env = Env::<f64>::new(cfg, PhysicsConfig::default()).unwrap();
        let mut w = env.reset(&mut ChaCha8Rng::seed_from_u64(1));
        for _ in 0..5 {
            let out = env.step(&w, &holds(&env)).unwrap();
            for (i, o) in out.observations.iter().enumerate() {
                assert_eq!(o.len(), env.obs_len(i));
            }
            w = out.world;
        }
    }
}

#[test]
fn navigation_rewards() {
    // agents on distinct landmarks
    let w = world(
        vec![
            agent(Role::Navigator, -0.5, 0.0),
            agent(Role::Navigator, 0.0, 0.5),
            agent(Role::Navigator, 0.5, 0.0),
        ],
        vec![landmark(-0.5, 0.0), landmark(0.0, 0.5), landmark(0.5, 0.0)],
        Payload::None,
    );
    let c = detect_collisions(&w);
    assert!(c.is_empty());
    assert_eq!(reward_cooperative_navigation(&w, &c, 1.0), vec![0.0; 3]);

    // single landmark at origin, agents at (0,1) and (0,2)
    let w = world(
        vec![agent(Role::Navigator, 0.0, 1.0), agent(Role::Navigator, 0.0, 2.0)],
        vec![landmark(0.0, 0.0)],
        Payload::None,
    );
    assert_eq!(reward_cooperative_navigation(&w, &detect_collisions(&w), 1.0), vec![-1.0, -1.0]);

    // stacked: three pairs, each agent in two of them
    let w = world(
        vec![
            agent(Role::Navigator, 0.3, 0.3),
            agent(Role::Navigator, 0.3, 0.3),
            agent(Role::Navigator, 0.3, 0.3),
        ],
        vec![landmark(0.3, 0.3)],
        Payload::None,
    );
    let c = detect_collisions(&w);
    assert_eq!(c.len(), 3);
    assert_eq!(reward_cooperative_navigation(&w, &c, 1.0), vec![-2.0; 3]);
}

#[test]
fn communication_rewards() {
    let mut speaker = agent(Role::Speaker, 0.0, 0.0);
    speaker.movable = false;
    let lms = vec![landmark(0.0, 0.0), landmark(1.0, 0.0), landmark(-1.0, 0.5)];
    let w = world(
        vec![speaker.clone(), agent(Role::Listener, 1.0, 0.0)],
        lms.clone(),
        Payload::GoalColor(1),
    );
    assert_eq!(reward_cooperative_communication(&w), vec![0.0, 0.0]);
    let w = world(vec![speaker, agent(Role::Listener, 0.0, 1.0)], lms, Payload::GoalColor(0));
    assert_eq!(reward_cooperative_communication(&w), vec![-1.0, -1.0]);
}

fn pp_params() -> PredatorPreyRewards<f64> {
    PredatorPreyRewards {
        blue_capture: 10.0,
        green_capture: 100.0,
        boundary_penalty: 10.0,
    }
}

#[test]
fn predator_prey_rewards() {
    let far = world(
        vec![
            agent(Role::Predator, -0.5, -0.5),
            agent(Role::Predator, 0.5, 0.5),
            agent(Role::GreenPrey, 0.0, 0.9),
            agent(Role::BluePrey, 0.9, -0.9),
        ],
        vec![],
        Payload::None,
    );
    let (r, caps) = reward_predator_prey(&far, &detect_collisions(&far), &pp_params());
    assert_eq!(r, vec![0.0; 4]);
    assert_eq!(caps, Captures::default());

    let mut green_caught = far.clone();
    green_caught.agents[0].position = Vec2::new(0.0, 0.88);
    let c = detect_collisions(&green_caught);
    let (r, caps) = reward_predator_prey(&green_caught, &c, &pp_params());
    assert_eq!(r, vec![100.0, 100.0, -100.0, 0.0]);
    assert_eq!(caps.green, 1);

    let mut blue_caught = far.clone();
    blue_caught.agents[1].position = Vec2::new(0.9, -0.88);
    let (r, caps) = reward_predator_prey(&blue_caught, &detect_collisions(&blue_caught), &pp_params());
    assert_eq!(r, vec![10.0, 10.0, 0.0, -10.0]);
    assert_eq!(caps.blue, 1);

    let mut outside = far;
    outside.agents[3].position = Vec2::new(1.5, -0.5);
    let (r, _) = reward_predator_prey(&outside, &[], &pp_params());
    assert_eq!(r[3], -10.0 * 0.25);
    assert_eq!(r[0], 0.0);
}

#[test]
fn covert_rewards() {
    let mut agents = vec![
        agent(Role::Speaker, 0.0, 0.0),
        agent(Role::Listener, 0.5, 0.0),
        agent(Role::Adversary, -0.5, 0.0),
    ];
    agents.iter_mut().for_each(|a| a.movable = false);
    let m = vec![0.5, -0.5, 0.25, 1.0];
    let mut w = world(
        agents,
        vec![],
        Payload::Covert {
            message: m.clone(),
            key: vec![0.0; 4],
        },
    );
    w.comm = vec![vec![0.0; 4], m.clone(), m.iter().map(|x| -x).collect()];
    let r = reward_covert_communication(&w);
    let wrong: f64 = m.iter().map(|x| (2.0 * x) * (2.0 * x)).sum();
    assert_eq!(r, vec![wrong, wrong, -wrong]);
    assert!(r[0] > 0.0);

    w.comm[2] = m.clone();
    let r = reward_covert_communication(&w);
    assert_eq!(r[0], 0.0);
    assert_eq!(r[1], 0.0);
    assert!(r[2] <= 0.0);
}

#[test]
fn collision_boundary_is_strict() {
    let touching = world(
        vec![agent(Role::Navigator, 0.0, 0.0), agent(Role::Navigator, 0.1, 0.0)],
        vec![],
        Payload::None,
    );
    // 0.1 is exactly the radius sum: not a collision
    assert!(detect_collisions(&touching).is_empty());
    let same = world(
        vec![agent(Role::Navigator, 0.2, 0.2), agent(Role::Navigator, 0.2, 0.2)],
        vec![],
        Payload::None,
    );
    assert_eq!(detect_collisions(&same), vec![(0, 1)]);
    let apart = world(
        vec![agent(Role::Navigator, -1.0, 0.0), agent(Role::Navigator, 1.0, 0.0)],
        vec![],
        Payload::None,
    );
    assert!(detect_collisions(&apart).is_empty());
}

#[test]
fn prey_speed_ratios() {
    let env = Env::<f64>::new(ScenarioConfig::predator_prey(5, 3), PhysicsConfig::default()).unwrap();
    let w = env.reset(&mut ChaCha8Rng::seed_from_u64(0));
    let pred = w.agents[0].max_speed;
    assert_eq!(w.agents[5].role, Role::GreenPrey);
    assert_eq!(w.agents[5].max_speed, 3.0 * pred);
    assert_eq!(w.agents[6].role, Role::BluePrey);
    assert_eq!(w.agents[6].max_speed, 1.3 * pred);
}

#[test]
fn covert_payload_and_comm_copy() {
    let env = Env::<f64>::new(ScenarioConfig::covert_communication(), PhysicsConfig::default()).unwrap();
    let w = env.reset(&mut ChaCha8Rng::seed_from_u64(7));
    let Payload::Covert { message, key } = &w.payload else {
        panic!("covert payload expected")
    };
    assert!(message.iter().chain(key).all(|x| x.abs() <= 1.0));
    let acts: Vec<_> = (0..3)
        .map(|i| env.decode_flat(i, &[0.1 * i as f64, 0.2, 0.3, 0.4]).unwrap())
        .collect();
    let out = env.step(&w, &acts).unwrap();
    assert_eq!(out.world.comm[0], vec![0.0, 0.2, 0.3, 0.4]);
    // adversary sees exactly the speaker's vector
    assert_eq!(out.observations[2], out.world.comm[0]);
    assert_eq!(out.observations[1][4..], out.world.comm[0][..]);
}
