use super::MarlError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Own,
    Ally,
    Enemy,
}

/// Per-agent partition of the other agents into allies `A(i)` and enemies `E(i)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TeamSpec {
    allies: Vec<Vec<usize>>,
    enemies: Vec<Vec<usize>>,
}

impl TeamSpec {
    /// Validates partition and ally symmetry.
    pub fn new(allies: Vec<Vec<usize>>, enemies: Vec<Vec<usize>>) -> Result<Self, MarlError> {
        let n = allies.len();
        if enemies.len() != n {
            return Err(MarlError::Config(format!(
                "team spec has {n} ally sets but {} enemy sets",
                enemies.len()
            )));
        }
        for i in 0..n {
            let mut seen = vec![false; n];
            for &k in allies[i].iter().chain(&enemies[i]) {
                if k >= n || k == i || seen[k] {
                    return Err(MarlError::Config(format!(
                        "agent {i}: ally/enemy sets must partition the other agents (bad entry {k})"
                    )));
                }
                seen[k] = true;
            }
            if seen.iter().enumerate().any(|(k, s)| k != i && !s) {
                return Err(MarlError::Config(format!(
                    "agent {i}: ally and enemy sets do not cover every other agent"
                )));
            }
            for &k in &allies[i] {
                if !allies[k].contains(&i) {
                    return Err(MarlError::Config(format!(
                        "ally relation is not symmetric between {i} and {k}"
                    )));
                }
            }
        }
        Ok(Self { allies, enemies })
    }

    /// Agents sharing a team id are allies; everyone else is an enemy.
    pub fn from_team_ids(ids: &[usize]) -> Self {
        let n = ids.len();
        let mut allies = vec![Vec::new(); n];
        let mut enemies = vec![Vec::new(); n];
        for i in 0..n {
            for k in (0..n).filter(|&k| k != i) {
                if ids[k] == ids[i] {
                    allies[i].push(k);
                } else {
                    enemies[i].push(k);
                }
            }
        }
        Self { allies, enemies }
    }

    pub fn all_allies(n: usize) -> Self {
        Self::from_team_ids(&vec![0; n])
    }

    pub fn all_enemies(n: usize) -> Self {
        Self::from_team_ids(&(0..n).collect::<Vec<_>>())
    }

    pub fn n_agents(&self) -> usize {
        self.allies.len()
    }

    pub fn allies(&self, i: usize) -> &[usize] {
        &self.allies[i]
    }

    pub fn enemies(&self, i: usize) -> &[usize] {
        &self.enemies[i]
    }

    pub fn relation(&self, i: usize, k: usize) -> Relation {
        if i == k {
            Relation::Own
        } else if self.allies[i].contains(&k) {
            Relation::Ally
        } else {
            Relation::Enemy
        }
    }
}
