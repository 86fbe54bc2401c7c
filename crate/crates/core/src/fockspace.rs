//! Truncated two-mode Fock bases and the ladder algebra acting on them.
//!
//! Two basis flavours are supported: the rectangular product space
//! `{0..=cutoff_a} x {0..=cutoff_b}` and a single charge sector
//! `{(N_A, N_B) : n N_A + N_B = Q}`. Both are wrapped in [`Basis`] so that
//! states and operators can be assembled uniformly.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::operator::OperatorMatrix;

/// Occupation numbers `(N_A, N_B)` of a two-mode Fock state.
pub type Occupation = (usize, usize);

/// Rectangular truncated two-mode Fock space, flattened row-major in `(N_A, N_B)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct TwoModeSpace {
    cutoff_a: usize,
    cutoff_b: usize,
}

impl TwoModeSpace {
    pub fn new(cutoff_a: usize, cutoff_b: usize) -> Self {
        TwoModeSpace { cutoff_a, cutoff_b }
    }

    pub fn cutoff_a(&self) -> usize {
        self.cutoff_a
    }

    pub fn cutoff_b(&self) -> usize {
        self.cutoff_b
    }

    pub fn dim(&self) -> usize {
        (self.cutoff_a + 1) * (self.cutoff_b + 1)
    }

    pub fn index_of(&self, na: usize, nb: usize) -> Option<usize> {
        (na <= self.cutoff_a && nb <= self.cutoff_b).then(|| na * (self.cutoff_b + 1) + nb)
    }

    pub fn occupation(&self, index: usize) -> Occupation {
        debug_assert!(index < self.dim());
        (index / (self.cutoff_b + 1), index % (self.cutoff_b + 1))
    }

    /// Indices of the basis grouped by conserved charge `n N_A + N_B`,
    /// in increasing charge order. Every index appears exactly once.
    pub fn charge_blocks(&self, n: usize) -> Vec<(usize, Vec<usize>)> {
        let max_charge = n * self.cutoff_a + self.cutoff_b;
        let mut blocks: Vec<Vec<usize>> = vec![Vec::new(); max_charge + 1];
        for idx in 0..self.dim() {
            let (na, nb) = self.occupation(idx);
            blocks[n * na + nb].push(idx);
        }
        blocks
            .into_iter()
            .enumerate()
            .filter(|(_, b)| !b.is_empty())
            .collect()
    }

    /// True when every state of the charge-`q` sector lies inside the truncation.
    pub fn contains_sector(&self, n: usize, q: usize) -> bool {
        q <= self.cutoff_b && q / n <= self.cutoff_a
    }
}

/// All two-mode Fock states with fixed conserved charge `n N_A + N_B = Q`,
/// ordered by descending `N_A` (the charger-full state first).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct ChargeSector {
    n: usize,
    charge: usize,
    states: Vec<Occupation>,
}

impl ChargeSector {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn charge(&self) -> usize {
        self.charge
    }

    pub fn states(&self) -> &[Occupation] {
        &self.states
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn index_of(&self, na: usize, nb: usize) -> Option<usize> {
        if self.n * na + nb != self.charge {
            return None;
        }
        let top = self.charge / self.n;
        Some(top - na)
    }
}

/// Enumerate the charge-`q` sector for nonlinearity order `n`.
pub fn enumerate_sector(n: usize, q: usize) -> Result<ChargeSector> {
    if n == 0 {
        return Err(Error::invalid("nonlinearity order n must be at least 1"));
    }
    let states = (0..=q / n).rev().map(|na| (na, q - n * na)).collect();
    Ok(ChargeSector {
        n,
        charge: q,
        states,
    })
}

/// A basis that states and operators are expressed in.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Basis {
    Product(TwoModeSpace),
    Sector(ChargeSector),
}

impl Basis {
    pub fn product(cutoff_a: usize, cutoff_b: usize) -> Arc<Basis> {
        Arc::new(Basis::Product(TwoModeSpace::new(cutoff_a, cutoff_b)))
    }

    pub fn sector(n: usize, q: usize) -> Result<Arc<Basis>> {
        Ok(Arc::new(Basis::Sector(enumerate_sector(n, q)?)))
    }

    pub fn dim(&self) -> usize {
        match self {
            Basis::Product(s) => s.dim(),
            Basis::Sector(s) => s.dim(),
        }
    }

    pub fn index_of(&self, na: usize, nb: usize) -> Option<usize> {
        match self {
            Basis::Product(s) => s.index_of(na, nb),
            Basis::Sector(s) => s.index_of(na, nb),
        }
    }

    pub fn occupation(&self, index: usize) -> Occupation {
        match self {
            Basis::Product(s) => s.occupation(index),
            Basis::Sector(s) => s.states[index],
        }
    }

    pub fn occupations(&self) -> impl Iterator<Item = Occupation> + '_ {
        (0..self.dim()).map(move |i| self.occupation(i))
    }

    /// Truncation levels that the leakage monitor watches. A charge sector is
    /// closed under every charge-conserving generator and has none.
    pub fn truncation(&self) -> Option<(usize, usize)> {
        match self {
            Basis::Product(s) => Some((s.cutoff_a, s.cutoff_b)),
            Basis::Sector(_) => None,
        }
    }

    pub fn as_product(&self) -> Option<&TwoModeSpace> {
        match self {
            Basis::Product(s) => Some(s),
            Basis::Sector(_) => None,
        }
    }
}

/// Ladder and number operators of both modes on a product space.
#[derive(Clone, Debug)]
pub struct LadderOps {
    pub a: OperatorMatrix,
    pub a_dag: OperatorMatrix,
    pub b: OperatorMatrix,
    pub b_dag: OperatorMatrix,
    pub n_a: OperatorMatrix,
    pub n_b: OperatorMatrix,
}

/// Build the ladder operators of a truncated product space. Raising past the
/// cutoff maps to zero.
pub fn ladder_ops(space: &Arc<Basis>) -> Result<LadderOps> {
    if space.as_product().is_none() {
        return Err(Error::BasisMismatch(
            "ladder operators change the charge and need a product space".into(),
        ));
    }
    let sq = |k: usize| (k as f64).sqrt();
    let a = OperatorMatrix::from_action(space, false, |(na, nb)| {
        (na > 0).then(|| ((na - 1, nb), sq(na).into()))
    });
    let a_dag = OperatorMatrix::from_action(space, false, |(na, nb)| {
        Some(((na + 1, nb), sq(na + 1).into()))
    });
    let b = OperatorMatrix::from_action(space, false, |(na, nb)| {
        (nb > 0).then(|| ((na, nb - 1), sq(nb).into()))
    });
    let b_dag = OperatorMatrix::from_action(space, false, |(na, nb)| {
        Some(((na, nb + 1), sq(nb + 1).into()))
    });
    Ok(LadderOps {
        a,
        a_dag,
        b,
        b_dag,
        n_a: number_a(space),
        n_b: number_b(space),
    })
}

/// `a†a` on any basis.
pub fn number_a(basis: &Arc<Basis>) -> OperatorMatrix {
    OperatorMatrix::diagonal(basis, |(na, _)| na as f64)
}

/// `b†b` on any basis.
pub fn number_b(basis: &Arc<Basis>) -> OperatorMatrix {
    OperatorMatrix::diagonal(basis, |(_, nb)| nb as f64)
}

/// Conserved charge `n a†a + b†b` on any basis.
pub fn charge_operator(basis: &Arc<Basis>, n: usize) -> OperatorMatrix {
    OperatorMatrix::diagonal(basis, |(na, nb)| (n * na + nb) as f64)
}

/// `sqrt(m (m-1) ... (m-k+1))`, the amplitude of `b^k |m>`; zero when `k > m`.
pub fn falling_sqrt(m: usize, k: usize) -> f64 {
    if k > m {
        return 0.0;
    }
    ((m - k + 1)..=m).map(|j| (j as f64).sqrt()).product()
}
