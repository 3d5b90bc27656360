//! Finite posets of candidate models.
//!
//! Models are indexed densely; `j ⪯ i` means model `j` is a submodel of
//! model `i`. The relation is stored as a dense boolean matrix (candidate
//! sets are small) and closed reflexively and transitively at construction,
//! which also catches cycles.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

/// Index of a model within a [`ModelPoset`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModelId(usize);

impl ModelId {
    pub const fn new(index: usize) -> Self {
        ModelId(index)
    }

    pub const fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum PosetError {
    #[error("a poset must contain at least one model")]
    Empty,
    #[error("model id {0} is not a member of the poset")]
    UnknownId(ModelId),
    #[error("cover relations imply a cycle through models {0} and {1}")]
    Cycle(ModelId, ModelId),
}

/// Finite partially ordered set of candidate models.
///
/// Immutable after construction and therefore freely shareable across
/// threads.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelPoset {
    len: usize,
    /// Row-major `len × len`; `leq[j * len + i]` holds iff `j ⪯ i`.
    leq: Vec<bool>,
}

impl ModelPoset {
    /// Builds the poset on models `0..num_models` whose order is the
    /// reflexive-transitive closure of the given cover pairs
    /// `(submodel, model)`.
    pub fn build(num_models: usize, covers: &[(ModelId, ModelId)]) -> Result<Self, PosetError> {
        if num_models == 0 {
            return Err(PosetError::Empty);
        }
        let mut leq = vec![false; num_models * num_models];
        for &(sub, sup) in covers {
            for id in [sub, sup] {
                if id.index() >= num_models {
                    return Err(PosetError::UnknownId(id));
                }
            }
            leq[sub.index() * num_models + sup.index()] = true;
        }
        // Warshall pass for the transitive closure.
        for k in 0..num_models {
            for a in 0..num_models {
                if leq[a * num_models + k] {
                    for b in 0..num_models {
                        if leq[k * num_models + b] {
                            leq[a * num_models + b] = true;
                        }
                    }
                }
            }
        }
        // Antisymmetry: a ⪯ b and b ⪯ a for distinct a, b is a cycle.
        for a in 0..num_models {
            for b in (a + 1)..num_models {
                if leq[a * num_models + b] && leq[b * num_models + a] {
                    return Err(PosetError::Cycle(ModelId(a), ModelId(b)));
                }
            }
        }
        for d in 0..num_models {
            leq[d * num_models + d] = true;
        }
        Ok(ModelPoset {
            len: num_models,
            leq,
        })
    }

    /// The total order `0 ⪯ 1 ⪯ … ⪯ num_models − 1`.
    pub fn chain(num_models: usize) -> Result<Self, PosetError> {
        let covers: Vec<_> = (1..num_models)
            .map(|i| (ModelId(i - 1), ModelId(i)))
            .collect();
        Self::build(num_models, &covers)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false // construction rejects empty posets
    }

    pub fn ids(&self) -> impl Iterator<Item = ModelId> + '_ {
        (0..self.len).map(ModelId)
    }

    pub fn contains(&self, id: ModelId) -> bool {
        id.index() < self.len
    }

    /// Whether `sub ⪯ sup`; false when either id is out of range.
    pub fn leq(&self, sub: ModelId, sup: ModelId) -> bool {
        self.contains(sub) && self.contains(sup) && self.leq[sub.index() * self.len + sup.index()]
    }

    /// All `j ⪯ i`, including `i` itself, in ascending index order.
    pub fn down_set(&self, i: ModelId) -> Result<Vec<ModelId>, PosetError> {
        if !self.contains(i) {
            return Err(PosetError::UnknownId(i));
        }
        Ok(self
            .ids()
            .filter(|&j| self.leq[j.index() * self.len + i.index()])
            .collect())
    }

    /// All `j ≺ i` (strict submodels), in ascending index order.
    pub fn strict_down_set(&self, i: ModelId) -> Result<Vec<ModelId>, PosetError> {
        let mut down = self.down_set(i)?;
        down.retain(|&j| j != i);
        Ok(down)
    }

    /// Whether `i` has no strict submodel.
    pub fn is_minimal(&self, i: ModelId) -> Result<bool, PosetError> {
        Ok(self.strict_down_set(i)?.is_empty())
    }

    /// A topological order: every model appears after all of its strict
    /// submodels. Ties are broken by ascending index, so the result is
    /// deterministic.
    pub fn linear_extension(&self) -> Vec<ModelId> {
        let mut emitted = vec![false; self.len];
        let mut order = Vec::with_capacity(self.len);
        while order.len() < self.len {
            for b in 0..self.len {
                if emitted[b] {
                    continue;
                }
                let ready =
                    (0..self.len).all(|a| a == b || !self.leq[a * self.len + b] || emitted[a]);
                if ready {
                    emitted[b] = true;
                    order.push(ModelId(b));
                    break;
                }
            }
        }
        order
    }
}
