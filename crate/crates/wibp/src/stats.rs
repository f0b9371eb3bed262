//! Trajectory statistics.
//!
//! For the buffet after n customers with accumulated weight W_n and
//! intensity Lambda_n, the tracked quantities are
//!
//! ```text
//!     Z_n = Lambda_n + (sum_i R_i K_i - beta L_n) / (W_n + c)
//!     G_n = sum over dishes of ((J(x) - beta)/(W_n + c))^2
//!     V_n = K-bar_n - Z_n,   K-bar_n = (K_1 + ... + K_n)/n
//! ```
//!
//! Z_n is the predictive mean E(K_{n+1} | F_n); the predictive second moment
//! is E(K_{n+1}^2 | F_n) = Z_n + Z_n^2 - G_n, since K_{n+1} given F_n is an
//! independent sum of dish Bernoullis and a Poisson(Lambda_n) count.

use crate::model::{BuffetState, ModelParams, Subset};
use crate::numerics::KahanSum;
use serde::ser::{Serialize, SerializeStruct, Serializer};
use std::collections::BTreeMap;

/// Predictive mean Z_n = E(K_{n+1} | F_n). Before any customer this is
/// alpha exactly (the buffet is empty and only the Poisson part remains).
pub fn z_of(state: &BuffetState, params: &ModelParams) -> f64 {
    if state.n() == 0 {
        return state.lambda();
    }
    let atomic = state.weighted_k_sum() - params.beta * state.l() as f64;
    state.lambda() + atomic / (state.w() + params.c)
}

/// Sum of squared inclusion probabilities G_n.
pub fn g_of(state: &BuffetState, params: &ModelParams) -> f64 {
    let denom = state.w() + params.c;
    let mut sum = KahanSum::new();
    for dish in state.dishes() {
        let p = (dish.weighted_count - params.beta) / denom;
        sum.add(p * p);
    }
    sum.value()
}

/// Number of dishes with labels in the subset, L_n(B).
pub fn l_of_b(state: &BuffetState, subset: &Subset) -> u64 {
    state
        .dishes()
        .iter()
        .filter(|d| subset.contains(d.label))
        .count() as u64
}

/// Predictive second moment E(K_{n+1}^2 | F_n) = Z_n + Z_n^2 - G_n.
pub fn conditional_second_moment(state: &BuffetState, params: &ModelParams) -> f64 {
    let z = z_of(state, params);
    z + z * z - g_of(state, params)
}

/// One recorded checkpoint of a trajectory.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct StatRow {
    /// Customers served.
    pub n: u64,
    /// Accumulated weight W_n.
    pub w: f64,
    /// New-dish intensity Lambda_n.
    pub lambda: f64,
    /// Distinct dishes L_n.
    pub l: u64,
    /// Dishes tried by customer n.
    pub k: u64,
    /// Dishes created by customer n.
    pub n_new: u64,
    /// Average dishes per customer, K-bar_n.
    pub kbar: f64,
    /// Predictive mean Z_n.
    pub z: f64,
    /// Sum of squared inclusion probabilities G_n.
    pub g: f64,
    /// Centered average V_n = K-bar_n - Z_n.
    pub v: f64,
    /// Dishes with labels in the configured subset; equals `l` when no
    /// subset is configured.
    pub l_b: u64,
    /// Running sum of K_i^2.
    pub sum_k_sq: f64,
    /// Running sum of R_i^2.
    pub sum_r_sq: f64,
}

impl StatRow {
    /// Snapshot of the state after its most recent customer.
    pub fn capture(state: &BuffetState, params: &ModelParams) -> StatRow {
        let z = z_of(state, params);
        let g = g_of(state, params);
        let kbar = state.kbar();
        let l_b = match &params.subset {
            Some(subset) => l_of_b(state, subset),
            None => state.l(),
        };
        StatRow {
            n: state.n(),
            w: state.w(),
            lambda: state.lambda(),
            l: state.l(),
            k: state.last_k(),
            n_new: state.last_n_new(),
            kbar,
            z,
            g,
            v: kbar - z,
            l_b,
            sum_k_sq: state.sum_k_sq(),
            sum_r_sq: state.sum_r_sq(),
        }
    }
}

/// A recorded trajectory: the resolved configuration that produced it and
/// one row per checkpoint. Serializes with an `artifact` marker so saved
/// files are self-describing.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    /// Flat key/value echo: parameters plus n, seed, stream_id, checkpoints.
    /// Feeding these back as configuration reproduces the file bit for bit.
    pub config: BTreeMap<String, String>,
    pub rows: Vec<StatRow>,
}

impl Serialize for Trajectory {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("Trajectory", 3)?;
        s.serialize_field("artifact", "trajectory")?;
        s.serialize_field("config", &self.config)?;
        s.serialize_field("rows", &self.rows)?;
        s.end()
    }
}

impl Trajectory {
    /// Fixed-schema CSV: `n, W, lambda, L, K, N, Kbar, Z, G, L_B` with
    /// floats at 17 significant digits so values round-trip exactly.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,W,lambda,L,K,N,Kbar,Z,G,L_B\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:.16e},{:.16e},{},{},{},{:.16e},{:.16e},{:.16e},{}\n",
                r.n, r.w, r.lambda, r.l, r.k, r.n_new, r.kbar, r.z, r.g, r.l_b
            ));
        }
        out
    }

    /// The final recorded row.
    pub fn last_row(&self) -> &StatRow {
        self.rows.last().expect("a trajectory records at least one row")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{run_trajectory, RecordPlan, WeightSpec};

    fn unit_params(alpha: f64, beta: f64, c: f64) -> ModelParams {
        ModelParams::new(alpha, beta, c, WeightSpec::Constant { r: 1.0 })
    }

    #[test]
    fn test_predictive_mean_before_first_customer_is_alpha() {
        let params = unit_params(2.5, 0.5, 1.0);
        let state = BuffetState::new(&params, 1, 0).unwrap();
        assert_eq!(z_of(&state, &params), 2.5);
        assert_eq!(g_of(&state, &params), 0.0);
    }

    /// Paired one-step check of both predictive moments: along each
    /// replicate, K_{n+1} - Z_n and K_{n+1}^2 - (Z_n + Z_n^2 - G_n) must
    /// average to zero within Monte Carlo error.
    #[test]
    fn test_predictive_moments_match_one_step_outcomes() {
        let params = ModelParams::new(
            1.0,
            0.5,
            1.0,
            WeightSpec::UniformInterval { lo: 1.0, hi: 2.0 },
        );
        let reps = 20_000u64;
        let mut d1 = Vec::with_capacity(reps as usize);
        let mut d2 = Vec::with_capacity(reps as usize);
        for i in 0..reps {
            let mut state = BuffetState::new(&params, 202, i).unwrap();
            for _ in 0..30 {
                state.advance(&params).unwrap();
            }
            let z = z_of(&state, &params);
            let m2 = conditional_second_moment(&state, &params);
            assert!(m2 >= z * z - 1e-12, "second moment below mean squared");
            let out = state.step(&params).unwrap();
            let k = out.k as f64;
            d1.push(k - z);
            d2.push(k * k - m2);
        }
        for (name, d) in [("mean", d1), ("second moment", d2)] {
            let m = d.iter().sum::<f64>() / reps as f64;
            let var = d.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / reps as f64;
            let band = 4.5 * (var / reps as f64).sqrt();
            assert!(m.abs() < band, "{name} residual {m} outside {band}");
        }
    }

    #[test]
    fn test_subset_count_tracks_label_measure() {
        let params = unit_params(1.0, 0.5, 1.0);
        let subset: Subset = "0-0.5".parse().unwrap();
        let full: Subset = "0-1".parse().unwrap();
        let mut ratio_sum = 0.0;
        let mut total_l = 0u64;
        for i in 0..300u64 {
            let mut state = BuffetState::new(&params, 77, i).unwrap();
            for _ in 0..200 {
                state.advance(&params).unwrap();
            }
            assert_eq!(l_of_b(&state, &full), state.l());
            total_l += state.l();
            ratio_sum += l_of_b(&state, &subset) as f64;
        }
        // Labels are uniform, so on average half the dishes land in [0, 0.5].
        let ratio = ratio_sum / total_l as f64;
        assert!((ratio - 0.5).abs() < 0.02, "subset fraction {ratio}");
    }

    #[test]
    fn test_captured_rows_are_coherent() {
        let params = ModelParams::new(
            1.0,
            0.25,
            1.0,
            WeightSpec::TwoPoint {
                v1: 1.0,
                v2: 2.0,
                p: 0.5,
            },
        )
        .with_subset("0-0.5".parse().unwrap());
        let plan = RecordPlan::exact(&[5, 50], 50);
        let traj = run_trajectory(&params, 50, 9, 2, &plan).unwrap();
        for row in &traj.rows {
            assert!(row.l_b <= row.l);
            assert!(row.k <= row.l);
            assert!((row.v - (row.kbar - row.z)).abs() < 1e-15);
            assert!(row.g >= 0.0 && row.z > 0.0);
            assert!(row.sum_k_sq >= (row.k as f64) * (row.k as f64));
            assert!(row.w > 0.0 && row.lambda > 0.0);
        }
        assert_eq!(traj.last_row().n, 50);
    }

    #[test]
    fn test_csv_schema_and_round_trip_precision() {
        let params = unit_params(1.0, 0.5, 1.0);
        let traj = run_trajectory(&params, 20, 3, 0, &RecordPlan::exact(&[20], 20)).unwrap();
        let csv = traj.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("n,W,lambda,L,K,N,Kbar,Z,G,L_B"));
        let row = lines.next().unwrap();
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields.len(), 10);
        assert_eq!(fields[0], "20");
        let lambda: f64 = fields[2].parse().unwrap();
        assert_eq!(lambda, traj.rows[0].lambda, "floats must round-trip");
        assert_eq!(lines.next(), None);
    }
}
