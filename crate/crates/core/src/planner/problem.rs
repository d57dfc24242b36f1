use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Intervention, ProcessState};

/// Index of the no-op action; the intervention is always index 1.
pub const NO_OP: usize = 0;
pub const INTERVENE: usize = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    MediumExchange,
    Expansion,
}

/// Facility-time and medium costs, `C(T, M) = c_time·T + c_medium·M`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostModel {
    /// $/hour.
    pub c_time: f64,
    /// $/litre of medium.
    pub c_medium: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            c_time: 150.0,
            c_medium: 10.0,
        }
    }
}

impl CostModel {
    pub fn cost(&self, hours: f64, medium_liters: f64) -> f64 {
        self.c_time * hours + self.c_medium * medium_liters
    }
}

/// `unit_scale` for the exchange reward (cells per dollar), set so the best
/// ground-truth schedule at low noise scores about 167.
pub const EXCHANGE_UNIT_SCALE: f64 = 1833.0;
/// `unit_scale` for the expansion revenue, set so the best ground-truth
/// schedule at low noise earns about 8594 dollars.
pub const EXPANSION_UNIT_SCALE: f64 = 1.9826e8;

/// A finite-horizon intervention problem on a culture observed every `dt`
/// hours for `horizon_steps` intervals.
///
/// Decision epochs are steps `t = 1..=H` at hour `(t-1)·dt`; the harvest
/// reward is paid at step `H+1`. Interior rewards are zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecisionProblem {
    pub kind: ProblemKind,
    pub horizon_steps: usize,
    pub dt: f64,
    pub costs: CostModel,
    /// Converts raw model units into the reported reward units.
    pub unit_scale: f64,
    /// When false only the no-op is feasible.
    pub interventions_enabled: bool,
    /// Medium exchange: culture volume (L) that produces the cells.
    pub culture_liters: f64,
    /// Medium exchange: medium bought up front (L).
    pub initial_medium_liters: f64,
    /// Medium exchange: medium bought per exchange (L).
    pub exchange_medium_liters: f64,
    pub max_exchanges: usize,
    /// Expansion: vessel scale factor `n`.
    pub expansion_factor: f64,
    /// Expansion: price per cell.
    pub cell_price: f64,
    /// Expansion: starting vessel volume (L).
    pub initial_volume_liters: f64,
    /// First step at which an intervention may be chosen.
    pub first_decision_step: usize,
}

impl DecisionProblem {
    pub fn medium_exchange() -> Self {
        DecisionProblem {
            kind: ProblemKind::MediumExchange,
            horizon_steps: 10,
            dt: 3.0,
            costs: CostModel::default(),
            unit_scale: EXCHANGE_UNIT_SCALE,
            interventions_enabled: true,
            culture_liters: 100.0,
            initial_medium_liters: 100.0,
            exchange_medium_liters: 100.0,
            max_exchanges: 1,
            expansion_factor: 4.0,
            cell_price: 2e-6,
            initial_volume_liters: 1.0,
            first_decision_step: 1,
        }
    }

    pub fn expansion() -> Self {
        DecisionProblem {
            kind: ProblemKind::Expansion,
            unit_scale: EXPANSION_UNIT_SCALE,
            first_decision_step: 2,
            ..Self::medium_exchange()
        }
    }

    pub fn new(kind: ProblemKind) -> Self {
        match kind {
            ProblemKind::MediumExchange => Self::medium_exchange(),
            ProblemKind::Expansion => Self::expansion(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.horizon_steps == 0 || !(self.dt > 0.0) {
            return bad("problem.horizon_steps and problem.dt must be positive");
        }
        if !(self.unit_scale > 0.0 && self.unit_scale.is_finite()) {
            return bad("problem.unit_scale must be positive");
        }
        if !(self.expansion_factor > 1.0) {
            return bad("problem.expansion_factor must exceed 1");
        }
        if self.first_decision_step == 0 {
            return bad("problem.first_decision_step is 1-based");
        }
        if self.harvest_cost(self.max_interventions()) <= 0.0 || self.harvest_cost(0) <= 0.0 {
            return bad("problem costs must be positive");
        }
        Ok(())
    }

    /// Harvest time `T` in hours.
    pub fn harvest_hours(&self) -> f64 {
        self.horizon_steps as f64 * self.dt
    }

    pub fn intervention(&self) -> Intervention {
        match self.kind {
            ProblemKind::MediumExchange => Intervention::Exchange,
            ProblemKind::Expansion => Intervention::Expand {
                factor: self.expansion_factor,
            },
        }
    }

    pub fn max_interventions(&self) -> usize {
        match self.kind {
            ProblemKind::MediumExchange => self.max_exchanges,
            ProblemKind::Expansion => self.horizon_steps + 1 - self.first_decision_step.min(self.horizon_steps + 1),
        }
    }

    /// Whether the intervention is feasible at step `t` after `used` earlier
    /// interventions.
    pub fn can_intervene(&self, t: usize, used: usize) -> bool {
        self.interventions_enabled
            && t >= self.first_decision_step
            && t <= self.horizon_steps
            && used < self.max_interventions()
    }

    /// Feasible actions, no-op first.
    pub fn actions(&self, t: usize, used: usize) -> Vec<usize> {
        if self.can_intervene(t, used) {
            vec![NO_OP, INTERVENE]
        } else {
            vec![NO_OP]
        }
    }

    /// Upper bound on the number of feasible actions at step `t`.
    pub fn max_actions(&self, t: usize) -> usize {
        if self.can_intervene(t, 0) {
            2
        } else {
            1
        }
    }

    pub fn action_label(&self, action: usize) -> String {
        match action {
            NO_OP => "none".to_string(),
            _ => self.intervention().label(),
        }
    }

    /// Applies `action` at step `t`. Infeasible actions are errors.
    pub fn apply(&self, t: usize, used: usize, state: ProcessState, action: usize) -> Result<ProcessState> {
        match action {
            NO_OP => Ok(state),
            INTERVENE if self.can_intervene(t, used) => Ok(self.intervention().apply(state)),
            _ => Err(Error::InfeasibleAction {
                step: t,
                action: self.action_label(action),
                reason: format!("not allowed after {used} interventions"),
            }),
        }
    }

    /// Medium bought over the run with `used` interventions (L).
    pub fn medium_liters(&self, used: usize) -> f64 {
        match self.kind {
            ProblemKind::MediumExchange => {
                self.initial_medium_liters + self.exchange_medium_liters * used as f64
            }
            ProblemKind::Expansion => {
                let n = self.expansion_factor;
                self.initial_volume_liters
                    + (1..=used).map(|k| n.powi(k as i32) - n.powi(k as i32 - 1)).sum::<f64>()
            }
        }
    }

    pub fn harvest_cost(&self, used: usize) -> f64 {
        self.costs.cost(self.harvest_hours(), self.medium_liters(used))
    }

    /// Harvest reward split as `unit_scale·revenue − cost`.
    pub fn reward_parts(&self, rho_final: f64, rho_initial: f64, used: usize) -> (f64, f64) {
        match self.kind {
            ProblemKind::MediumExchange => (
                self.culture_liters * (rho_final - rho_initial) / self.harvest_cost(used),
                0.0,
            ),
            ProblemKind::Expansion => (
                self.cell_price * rho_final * self.expansion_factor.powi(used as i32),
                self.harvest_cost(used),
            ),
        }
    }

    pub fn terminal_reward(&self, rho_final: f64, rho_initial: f64, used: usize) -> f64 {
        let (revenue, cost) = self.reward_parts(rho_final, rho_initial, used);
        self.unit_scale * revenue - cost
    }

    /// Every open-loop schedule, in canonical order. For medium exchange:
    /// never, then one exchange at each feasible hour ascending. For
    /// expansion: bit `t - first_decision_step` of the index marks an
    /// expansion at step `t`.
    pub fn schedules(&self) -> Vec<Schedule> {
        let h = self.horizon_steps;
        let steps: Vec<usize> = (self.first_decision_step..=h).collect();
        if !self.interventions_enabled {
            return vec![Schedule::none(h)];
        }
        match self.kind {
            ProblemKind::MediumExchange => {
                let mut out = vec![Schedule::none(h)];
                if self.max_exchanges > 0 {
                    for &t in &steps {
                        let mut s = Schedule::none(h);
                        s.actions[t - 1] = INTERVENE;
                        out.push(s);
                    }
                }
                out
            }
            ProblemKind::Expansion => (0..1usize << steps.len())
                .map(|mask| {
                    let mut s = Schedule::none(h);
                    for (bit, &t) in steps.iter().enumerate() {
                        if mask >> bit & 1 == 1 {
                            s.actions[t - 1] = INTERVENE;
                        }
                    }
                    s
                })
                .collect(),
        }
    }

    /// Per-step interventions of a schedule.
    pub fn interventions(&self, schedule: &Schedule) -> Vec<Option<Intervention>> {
        schedule
            .actions
            .iter()
            .map(|&a| (a == INTERVENE).then(|| self.intervention()))
            .collect()
    }

    pub fn schedule_label(&self, schedule: &Schedule) -> String {
        let hours: Vec<String> = schedule
            .actions
            .iter()
            .enumerate()
            .filter(|(_, &a)| a == INTERVENE)
            .map(|(k, _)| format!("{}", k as f64 * self.dt))
            .collect();
        if hours.is_empty() {
            "none".to_string()
        } else {
            format!("{}@{}", self.intervention().label(), hours.join("+"))
        }
    }
}

/// Open-loop action sequence; entry `k` is the action at step `k + 1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Schedule {
    pub actions: Vec<usize>,
}

impl Schedule {
    pub fn none(horizon_steps: usize) -> Self {
        Schedule {
            actions: vec![NO_OP; horizon_steps],
        }
    }

    pub fn count(&self) -> usize {
        self.actions.iter().filter(|&&a| a == INTERVENE).count()
    }

    /// Hours of the interventions.
    pub fn hours(&self, dt: f64) -> Vec<f64> {
        self.actions
            .iter()
            .enumerate()
            .filter(|(_, &a)| a == INTERVENE)
            .map(|(k, _)| k as f64 * dt)
            .collect()
    }
}
