//! Models for the sequence of white-disk centerings driving the random
//! composition: a frozen centering, independent re-centering uniform on
//! the admissible disk, and finite-state Markov chains (stationary or
//! not), together with the chain's contraction coefficient used by the
//! decorrelation estimates.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Centering, Table};

/// Law of the first state of a Markov scatterer chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InitialLaw {
    /// Start from the stationary law; makes the sequence stationary.
    Stationary,
    /// Start from a fixed state (generally nonstationary).
    State(usize),
    /// Start from an explicit distribution over states.
    Weights(Vec<f64>),
}

/// Finite-state Markov chain over a list of centerings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovModel {
    pub states: Vec<Centering>,
    /// Row-stochastic transition matrix, `transition[(i, j)]` the
    /// probability of moving from state `i` to state `j`.
    pub transition: DMatrix<f64>,
    pub initial: InitialLaw,
}

/// A model for the random sequence of centerings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SequenceModel {
    /// The same centering at every step (a deterministic billiard).
    Fixed(Centering),
    /// Independent draws, uniform on the disk of radius `eps`.
    IidUniform,
    /// A Markov chain over finitely many centerings.
    Markov(MarkovModel),
}

/// A drawn sequence: the centerings, and the state indices when the
/// model is a Markov chain (empty otherwise).
#[derive(Debug, Clone)]
pub struct SequenceDraw {
    pub centerings: Vec<Centering>,
    pub states: Vec<usize>,
}

impl SequenceModel {
    /// Check the model against a table: centerings within `eps`, the
    /// transition matrix stochastic, the initial law a distribution.
    pub fn validate(&self, table: &Table) -> Result<()> {
        match self {
            SequenceModel::Fixed(c) => table.check_centering(c),
            SequenceModel::IidUniform => Ok(()),
            SequenceModel::Markov(m) => m.validate(table),
        }
    }

    /// Whether the drawn sequence is stationary in law.
    pub fn is_stationary(&self) -> bool {
        match self {
            SequenceModel::Markov(m) => m.initial == InitialLaw::Stationary,
            _ => true,
        }
    }

    /// Draw a sequence of `n` centerings.
    pub fn draw<R: Rng + ?Sized>(
        &self,
        table: &Table,
        n: usize,
        rng: &mut R,
    ) -> Result<SequenceDraw> {
        match self {
            SequenceModel::Fixed(c) => Ok(SequenceDraw {
                centerings: vec![*c; n],
                states: Vec::new(),
            }),
            SequenceModel::IidUniform => {
                let eps = table.eps();
                let centerings = (0..n)
                    .map(|_| {
                        let radius = eps * rng.gen::<f64>().sqrt();
                        let angle = rng.gen::<f64>() * std::f64::consts::TAU;
                        Centering::new(radius * angle.cos(), radius * angle.sin())
                    })
                    .collect();
                Ok(SequenceDraw {
                    centerings,
                    states: Vec::new(),
                })
            }
            SequenceModel::Markov(m) => m.draw(n, rng),
        }
    }
}

impl MarkovModel {
    pub fn validate(&self, table: &Table) -> Result<()> {
        let k = self.states.len();
        if k == 0 {
            return Err(Error::Model("Markov model needs at least one state".into()));
        }
        if self.transition.nrows() != k || self.transition.ncols() != k {
            return Err(Error::Model(format!(
                "transition matrix is {}x{}, expected {k}x{k}",
                self.transition.nrows(),
                self.transition.ncols()
            )));
        }
        for c in &self.states {
            table.check_centering(c)?;
        }
        for i in 0..k {
            let mut sum = 0.0;
            for j in 0..k {
                let p = self.transition[(i, j)];
                if !(0.0..=1.0 + 1e-12).contains(&p) {
                    return Err(Error::Model(format!(
                        "transition entry ({i}, {j}) = {p} is not a probability"
                    )));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::Model(format!(
                    "transition row {i} sums to {sum}, expected 1"
                )));
            }
        }
        match &self.initial {
            InitialLaw::Stationary => {
                stationary_law(&self.transition)?;
            }
            InitialLaw::State(s) => {
                if *s >= k {
                    return Err(Error::Model(format!(
                        "initial state {s} out of range for {k} states"
                    )));
                }
            }
            InitialLaw::Weights(w) => {
                if w.len() != k {
                    return Err(Error::Model(format!(
                        "initial law has {} weights for {k} states",
                        w.len()
                    )));
                }
                if w.iter().any(|&p| !(0.0..=1.0 + 1e-12).contains(&p))
                    || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9
                {
                    return Err(Error::Model(
                        "initial weights are not a distribution".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn draw<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<SequenceDraw> {
        let mut states = Vec::with_capacity(n);
        let mut centerings = Vec::with_capacity(n);
        if n == 0 {
            return Ok(SequenceDraw { centerings, states });
        }
        let mut state = match &self.initial {
            InitialLaw::Stationary => {
                let pi = stationary_law(&self.transition)?;
                sample_index(pi.as_slice(), rng)
            }
            InitialLaw::State(s) => *s,
            InitialLaw::Weights(w) => sample_index(w, rng),
        };
        for _ in 0..n {
            states.push(state);
            centerings.push(self.states[state]);
            state = sample_index(self.transition.row(state).transpose().as_slice(), rng);
        }
        Ok(SequenceDraw { centerings, states })
    }
}

fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let mut u = rng.gen::<f64>();
    for (i, &w) in weights.iter().enumerate() {
        if u < w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

/// Unique stationary law of a row-stochastic matrix, solved from the
/// balance equations with the normalization replacing one of them.
pub fn stationary_law(transition: &DMatrix<f64>) -> Result<DVector<f64>> {
    let k = transition.nrows();
    let mut a = transition.transpose() - DMatrix::<f64>::identity(k, k);
    for j in 0..k {
        a[(k - 1, j)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(k);
    b[k - 1] = 1.0;
    let pi = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Model("chain has no unique stationary law".into()))?;
    let residual = (transition.transpose() * &pi - &pi).norm();
    if residual > 1e-9 || pi.iter().any(|&p| p < -1e-12) {
        return Err(Error::Model(
            "chain has no unique stationary law".into(),
        ));
    }
    Ok(pi.map(|p| p.max(0.0)))
}

/// Contraction coefficient of the chain after `k` steps: the second
/// largest singular value of `D^{1/2} P^k D^{-1/2}` with `D` the diagonal
/// of the stationary law. The largest singular value is 1, carried by the
/// invariant direction, so this measures the decay of correlations of
/// state functions.
pub fn contraction_coefficient(transition: &DMatrix<f64>, k: usize) -> Result<f64> {
    let pi = stationary_law(transition)?;
    if pi.iter().any(|&p| p <= 0.0) {
        return Err(Error::Model(
            "stationary law must be strictly positive for the contraction coefficient".into(),
        ));
    }
    let n = transition.nrows();
    let mut pk = DMatrix::<f64>::identity(n, n);
    for _ in 0..k {
        pk = &pk * transition;
    }
    let d = DMatrix::from_diagonal(&pi.map(|p| p.sqrt()));
    let dinv = DMatrix::from_diagonal(&pi.map(|p| 1.0 / p.sqrt()));
    let m = d * pk * dinv;
    let mut sv: Vec<f64> = m.svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(if n >= 2 { sv[1] } else { 0.0 })
}
