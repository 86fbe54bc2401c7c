//! Sparse complex operators (CSR) tied to a [`Basis`].

use std::collections::BTreeMap;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fockspace::{Basis, Occupation};

#[derive(Clone, Debug)]
pub struct OperatorMatrix {
    basis: Arc<Basis>,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
    hermitian: bool,
}

impl OperatorMatrix {
    /// Assemble from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(
        basis: &Arc<Basis>,
        hermitian: bool,
        triplets: impl IntoIterator<Item = (usize, usize, C64)>,
    ) -> Self {
        let dim = basis.dim();
        let mut map: BTreeMap<(usize, usize), C64> = BTreeMap::new();
        for (r, c, v) in triplets {
            assert!(r < dim && c < dim, "triplet ({r}, {c}) outside dimension {dim}");
            *map.entry((r, c)).or_default() += v;
        }
        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(map.len());
        let mut vals = Vec::with_capacity(map.len());
        for ((r, c), v) in map {
            if v == C64::new(0.0, 0.0) {
                continue;
            }
            row_ptr[r + 1] += 1;
            cols.push(c);
            vals.push(v);
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        OperatorMatrix {
            basis: basis.clone(),
            row_ptr,
            cols,
            vals,
            hermitian,
        }
    }

    /// Build an operator from its action on each basis state. The closure maps
    /// a source occupation to (target occupation, amplitude) pairs; targets
    /// outside the basis are dropped.
    pub fn from_action<I, F>(basis: &Arc<Basis>, hermitian: bool, action: F) -> Self
    where
        F: Fn(Occupation) -> I,
        I: IntoIterator<Item = (Occupation, C64)>,
    {
        let triplets: Vec<_> = (0..basis.dim())
            .flat_map(|col| {
                let occ = basis.occupation(col);
                action(occ)
                    .into_iter()
                    .filter_map(move |((na, nb), amp)| {
                        basis.index_of(na, nb).map(|row| (row, col, amp))
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        Self::from_triplets(basis, hermitian, triplets)
    }

    /// Real diagonal operator.
    pub fn diagonal(basis: &Arc<Basis>, f: impl Fn(Occupation) -> f64) -> Self {
        let triplets = (0..basis.dim()).map(|i| (i, i, C64::from(f(basis.occupation(i)))));
        Self::from_triplets(basis, true, triplets)
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Whether the operator was assembled as Hermitian.
    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    /// Marks the operator Hermitian after verifying `M = M†` entrywise (exact).
    pub fn into_hermitian(mut self) -> Result<Self> {
        if !self.equals_adjoint_exactly() {
            return Err(Error::invalid("operator is not exactly Hermitian"));
        }
        self.hermitian = true;
        Ok(self)
    }

    pub fn equals_adjoint_exactly(&self) -> bool {
        self.iter()
            .all(|(r, c, v)| self.get(c, r) == v.conj())
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim()).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.cols[k], self.vals[k]))
        })
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (self.cols[k], self.vals[k]))
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[range.clone()].binary_search(&c) {
            Ok(k) => self.vals[range.start + k],
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.dim(), "vector length does not match operator");
        (0..self.dim())
            .map(|r| self.row(r).map(|(c, x)| x * v[c]).sum())
            .collect()
    }

    fn check_same_basis(&self, other: &OperatorMatrix) -> Result<()> {
        if Arc::ptr_eq(&self.basis, &other.basis) || self.basis == other.basis {
            Ok(())
        } else {
            Err(Error::BasisMismatch("operators live in different bases".into()))
        }
    }

    pub fn adjoint(&self) -> Self {
        let triplets: Vec<_> = self.iter().map(|(r, c, v)| (c, r, v.conj())).collect();
        Self::from_triplets(&self.basis, self.hermitian, triplets)
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = self.clone();
        out.vals.iter_mut().for_each(|v| *v *= s);
        out.hermitian = self.hermitian && s.im == 0.0;
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_basis(other)?;
        let triplets: Vec<_> = self.iter().chain(other.iter()).collect();
        Ok(Self::from_triplets(
            &self.basis,
            self.hermitian && other.hermitian,
            triplets,
        ))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    /// Sparse product `self * other`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        self.check_same_basis(other)?;
        let mut triplets = Vec::new();
        for r in 0..self.dim() {
            for (k, x) in self.row(r) {
                for (c, y) in other.row(k) {
                    triplets.push((r, c, x * y));
                }
            }
        }
        Ok(Self::from_triplets(&self.basis, false, triplets))
    }

    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.matmul(other)?.sub(&other.matmul(self)?)
    }

    /// Dense copy of the sub-matrix on the given index set.
    pub fn dense_block(&self, indices: &[usize]) -> nalgebra::DMatrix<C64> {
        let mut local = vec![usize::MAX; self.dim()];
        for (i, &g) in indices.iter().enumerate() {
            local[g] = i;
        }
        let mut m = nalgebra::DMatrix::zeros(indices.len(), indices.len());
        for (i, &g) in indices.iter().enumerate() {
            for (c, v) in self.row(g) {
                if local[c] != usize::MAX {
                    m[(i, local[c])] = v;
                }
            }
        }
        m
    }

    /// Connected components of the sparsity graph (indices sorted within each
    /// block, blocks ordered by smallest index).
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let dim = self.dim();
        let mut parent: Vec<usize> = (0..dim).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for (r, c, _) in self.iter() {
            let (ra, rb) = (find(&mut parent, r), find(&mut parent, c));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for i in 0..dim {
            let root = find(&mut parent, i);
            groups.entry(root).or_default().push(i);
        }
        groups.into_values().collect()
    }

    /// Frobenius norm.
    pub fn norm_fro(&self) -> f64 {
        self.vals.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Stable content hash used to tag propagators with their source.
    pub fn fingerprint(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.basis.hash(&mut h);
        self.row_ptr.hash(&mut h);
        self.cols.hash(&mut h);
        for v in &self.vals {
            v.re.to_bits().hash(&mut h);
            v.im.to_bits().hash(&mut h);
        }
        h.finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn triplets_sum_duplicates_and_drop_zeros() {
        let basis = Basis::product(1, 1);
        let m = OperatorMatrix::from_triplets(
            &basis,
            false,
            vec![(0, 1, c(1.0, 0.0)), (0, 1, c(2.0, 0.0)), (2, 2, c(1.0, 0.0)), (2, 2, c(-1.0, 0.0))],
        );
        assert_eq!(m.get(0, 1), c(3.0, 0.0));
        assert_eq!(m.nnz(), 1);
    }

    #[test]
    fn adjoint_and_hermiticity() {
        let basis = Basis::product(1, 1);
        let m = OperatorMatrix::from_triplets(&basis, false, vec![(0, 3, c(1.0, 2.0))]);
        let h = m.add(&m.adjoint()).unwrap();
        assert!(h.equals_adjoint_exactly());
        assert!(!m.equals_adjoint_exactly());
        assert!(m.clone().into_hermitian().is_err());
        assert!(h.into_hermitian().unwrap().is_hermitian());
    }

    #[test]
    fn blocks_follow_sparsity() {
        let basis = Basis::product(2, 1);
        let m = OperatorMatrix::from_triplets(
            &basis,
            false,
            vec![(0, 3, c(1.0, 0.0)), (3, 5, c(1.0, 0.0)), (1, 1, c(2.0, 0.0))],
        );
        assert_eq!(m.blocks(), vec![vec![0, 3, 5], vec![1], vec![2], vec![4]]);
    }

    #[test]
    fn mismatched_bases_are_rejected() {
        let a = OperatorMatrix::diagonal(&Basis::product(1, 1), |_| 1.0);
        let b = OperatorMatrix::diagonal(&Basis::product(1, 2), |_| 1.0);
        assert!(matches!(a.add(&b), Err(Error::BasisMismatch(_))));
        assert!(a.matmul(&b).is_err());
    }
}
