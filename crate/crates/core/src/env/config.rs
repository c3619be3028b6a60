use serde::{Deserialize, Serialize};

use super::EnvError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    CooperativeNavigation,
    CooperativeCommunication,
    PredatorPrey,
    CovertCommunication,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::CooperativeNavigation => "cooperative_navigation",
            Self::CooperativeCommunication => "cooperative_communication",
            Self::PredatorPrey => "predator_prey",
            Self::CovertCommunication => "covert_communication",
        }
    }
}

/// Which scenario to build and how many entities it holds. Counts that do
/// not apply to the chosen scenario are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    /// Cooperative navigation: number of agents.
    pub agents: usize,
    /// Cooperative navigation: number of landmarks.
    pub landmarks: usize,
    /// Predator-prey: m.
    pub predators: usize,
    /// Predator-prey: n, the first `green_prey` of which are green.
    pub prey: usize,
    pub green_prey: usize,
    /// Episode length T.
    pub horizon: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            kind: ScenarioKind::CooperativeNavigation,
            agents: 3,
            landmarks: 3,
            predators: 5,
            prey: 3,
            green_prey: 1,
            horizon: 25,
        }
    }
}

impl ScenarioConfig {
    pub fn cooperative_navigation() -> Self {
        Self::default()
    }

    pub fn cooperative_communication() -> Self {
        Self {
            kind: ScenarioKind::CooperativeCommunication,
            ..Self::default()
        }
    }

    pub fn predator_prey(predators: usize, prey: usize) -> Self {
        Self {
            kind: ScenarioKind::PredatorPrey,
            predators,
            prey,
            green_prey: 1.min(prey),
            ..Self::default()
        }
    }

    pub fn covert_communication() -> Self {
        Self {
            kind: ScenarioKind::CovertCommunication,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        let err = |msg: String| Err(EnvError::Config(msg));
        if self.horizon == 0 {
            return err("scenario.horizon must be positive".into());
        }
        match self.kind {
            ScenarioKind::CooperativeNavigation => {
                if self.agents == 0 {
                    return err("scenario.agents must be positive".into());
                }
                if self.landmarks == 0 {
                    return err("scenario.landmarks must be positive".into());
                }
            }
            ScenarioKind::PredatorPrey => {
                if self.predators == 0 {
                    return err("scenario.predators must be positive".into());
                }
                if self.prey == 0 {
                    return err("scenario.prey must be positive".into());
                }
                if self.green_prey > self.prey {
                    return err(format!(
                        "scenario.green_prey ({}) exceeds scenario.prey ({})",
                        self.green_prey, self.prey
                    ));
                }
            }
            ScenarioKind::CooperativeCommunication | ScenarioKind::CovertCommunication => {}
        }
        Ok(())
    }
}

/// Simulator constants. Prey speeds are expressed as ratios to the predator
/// speed so the 3x / 1.3x relation holds by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicsConfig {
    pub dt: f64,
    pub damping: f64,
    pub contact_stiffness: f64,
    pub agent_radius: f64,
    pub landmark_radius: f64,
    /// Navigators and listeners.
    pub agent_max_speed: f64,
    pub agent_accel: f64,
    pub predator_max_speed: f64,
    pub predator_accel: f64,
    pub blue_prey_speed_ratio: f64,
    pub blue_prey_accel: f64,
    pub green_prey_speed_ratio: f64,
    pub green_prey_accel: f64,
    pub collision_penalty: f64,
    pub blue_capture_reward: f64,
    pub green_capture_reward: f64,
    pub boundary_penalty: f64,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        Self {
            dt: 0.1,
            damping: 0.25,
            contact_stiffness: 100.0,
            agent_radius: 0.05,
            landmark_radius: 0.05,
            agent_max_speed: 1.0,
            agent_accel: 3.0,
            predator_max_speed: 1.0,
            predator_accel: 3.0,
            blue_prey_speed_ratio: 1.3,
            blue_prey_accel: 4.0,
            green_prey_speed_ratio: 3.0,
            green_prey_accel: 9.0,
            collision_penalty: 1.0,
            blue_capture_reward: 10.0,
            green_capture_reward: 100.0,
            boundary_penalty: 10.0,
        }
    }
}

impl PhysicsConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        let positive = [
            ("physics.dt", self.dt),
            ("physics.agent_radius", self.agent_radius),
            ("physics.landmark_radius", self.landmark_radius),
            ("physics.agent_max_speed", self.agent_max_speed),
            ("physics.predator_max_speed", self.predator_max_speed),
            ("physics.blue_prey_speed_ratio", self.blue_prey_speed_ratio),
            ("physics.green_prey_speed_ratio", self.green_prey_speed_ratio),
        ];
        for (key, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(EnvError::Config(format!("{key} must be positive and finite, got {v}")));
            }
        }
        let non_negative = [
            ("physics.contact_stiffness", self.contact_stiffness),
            ("physics.agent_accel", self.agent_accel),
            ("physics.predator_accel", self.predator_accel),
            ("physics.blue_prey_accel", self.blue_prey_accel),
            ("physics.green_prey_accel", self.green_prey_accel),
            ("physics.collision_penalty", self.collision_penalty),
            ("physics.blue_capture_reward", self.blue_capture_reward),
            ("physics.green_capture_reward", self.green_capture_reward),
            ("physics.boundary_penalty", self.boundary_penalty),
        ];
        for (key, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(EnvError::Config(format!("{key} must be non-negative and finite, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.damping) {
            return Err(EnvError::Config(format!(
                "physics.damping must lie in [0, 1], got {}",
                self.damping
            )));
        }
        Ok(())
    }
}
