use serde::{Deserialize, Serialize};

use super::{Gradients, Group, Parameters, TrainConfig};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    #[default]
    Adamax,
    Sgd,
}

/// Adamax moments for one parameter group. Each group counts its own steps.
#[derive(Debug, Clone, PartialEq)]
struct GroupState {
    first_moment: Vec<f64>,
    inf_norm: Vec<f64>,
    steps: i32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    groups: Vec<GroupState>,
}

impl OptimizerState {
    pub fn new(p: &Parameters) -> Self {
        let groups = Group::ALL
            .iter()
            .map(|&g| {
                let n = p.layer(g).num_params();
                GroupState {
                    first_moment: vec![0.0; n],
                    inf_norm: vec![0.0; n],
                    steps: 0,
                }
            })
            .collect();
        Self { groups }
    }

    pub fn steps(&self, g: Group) -> i32 {
        self.groups[group_index(g)].steps
    }
}

fn group_index(g: Group) -> usize {
    Group::ALL.iter().position(|&x| x == g).expect("group listed in ALL")
}

/// Updates every group enabled in `tc.objectives`.
///
/// Adamax: `m = b1 m + (1 - b1) g`, `u = max(b2 u, |g|)`,
/// `theta -= lr / (1 - b1^t) * m / (u + eps)`. SGD: `theta -= lr g`.
pub fn optimizer_step(p: &mut Parameters, grads: &Gradients, state: &mut OptimizerState, tc: &TrainConfig) {
    let lr = tc.learning_rate;
    let (b1, b2) = tc.adamax_betas;
    for (gi, &g) in Group::ALL.iter().enumerate() {
        if !tc.objectives.updates(g) {
            continue;
        }
        let params = p.layer_mut(g);
        let grad = grads.layer(g);
        match tc.optimizer {
            OptimizerKind::Sgd => {
                for (w, dw) in params.values_mut().zip(grad.values()) {
                    *w -= lr * dw;
                }
            }
            OptimizerKind::Adamax => {
                let st = &mut state.groups[gi];
                st.steps += 1;
                let step = lr / (1.0 - b1.powi(st.steps));
                for (((w, dw), m), u) in params
                    .values_mut()
                    .zip(grad.values())
                    .zip(st.first_moment.iter_mut())
                    .zip(st.inf_norm.iter_mut())
                {
                    *m = b1 * *m + (1.0 - b1) * dw;
                    *u = (b2 * *u).max(dw.abs());
                    *w -= step * *m / (*u + tc.adamax_eps);
                }
            }
        }
    }
}
