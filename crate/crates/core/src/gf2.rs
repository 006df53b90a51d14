//! Word-parallel GF(2) row reduction.
//!
//! Rows are bit vectors packed into `u64` words. The basis is kept in reduced
//! row echelon form: every basis row has a pivot column and every other basis
//! row is zero at that column. Reducing a vector therefore only needs one XOR
//! per pivot column that is set in the vector, and the reduction of a unit
//! vector `e_i` is a canonical coset representative.

use crate::error::{Error, Result};

const NO_PIVOT: u32 = u32::MAX;

#[derive(Clone, Debug)]
pub struct Gf2System {
    n: usize,
    words: usize,
    /// Basis rows, `words` words each, row-major.
    basis: Vec<u64>,
    pivots: Vec<usize>,
    pivot_row: Vec<u32>,
    inserted: usize,
}

#[inline]
fn bit(v: &[u64], i: usize) -> bool {
    (v[i >> 6] >> (i & 63)) & 1 == 1
}

#[inline]
fn toggle(v: &mut [u64], i: usize) {
    v[i >> 6] ^= 1u64 << (i & 63);
}

#[inline]
fn xor_into(dst: &mut [u64], src: &[u64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d ^= *s;
    }
}

fn first_set(v: &[u64]) -> Option<usize> {
    v.iter()
        .enumerate()
        .find(|(_, &w)| w != 0)
        .map(|(k, &w)| (k << 6) + w.trailing_zeros() as usize)
}

impl Gf2System {
    pub fn new(n: usize) -> Self {
        let words = n.div_ceil(64).max(1);
        Gf2System {
            n,
            words,
            basis: Vec::new(),
            pivots: Vec::new(),
            pivot_row: vec![NO_PIVOT; n],
            inserted: 0,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// GF(2) rank of all inserted rows.
    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    pub fn nullity(&self) -> usize {
        self.n - self.rank()
    }

    /// Number of rows inserted so far, dependent ones included.
    pub fn inserted_rows(&self) -> usize {
        self.inserted
    }

    fn row(&self, k: usize) -> &[u64] {
        &self.basis[k * self.words..(k + 1) * self.words]
    }

    fn check(&self, support: &[usize]) -> Result<()> {
        match support.iter().find(|&&i| i >= self.n) {
            Some(&index) => Err(Error::IndexOutOfRange { index, n: self.n }),
            None => Ok(()),
        }
    }

    /// Indicator vector of `support`. Repeated indices cancel in pairs.
    fn indicator(&self, support: &[usize]) -> Vec<u64> {
        let mut v = vec![0u64; self.words];
        for &i in support {
            toggle(&mut v, i);
        }
        v
    }

    /// Reduce a vector whose set bits are all listed in `candidates`.
    /// XOR-ing an RREF row never touches other pivot columns, so checking each
    /// candidate once in order is enough.
    fn reduce_sparse(&self, v: &mut [u64], candidates: &[usize]) {
        for &i in candidates {
            let k = self.pivot_row[i];
            if k != NO_PIVOT && bit(v, i) {
                let (start, end) = (k as usize * self.words, (k as usize + 1) * self.words);
                xor_into(v, &self.basis[start..end]);
            }
        }
    }

    fn reduce_dense(&self, v: &mut [u64]) {
        for (k, &p) in self.pivots.iter().enumerate() {
            if bit(v, p) {
                let (start, end) = (k * self.words, (k + 1) * self.words);
                xor_into(v, &self.basis[start..end]);
            }
        }
    }

    /// Insert the parity row with the given support; returns the rank increase
    /// (0 or 1).
    pub fn add_row(&mut self, support: &[usize]) -> Result<usize> {
        self.check(support)?;
        let mut v = self.indicator(support);
        self.reduce_sparse(&mut v, support);
        Ok(self.insert_reduced(v))
    }

    fn insert_reduced(&mut self, v: Vec<u64>) -> usize {
        self.inserted += 1;
        let Some(p) = first_set(&v) else {
            return 0;
        };
        let words = self.words;
        for k in 0..self.pivots.len() {
            let row = &mut self.basis[k * words..(k + 1) * words];
            if bit(row, p) {
                xor_into(row, &v);
            }
        }
        self.pivot_row[p] = self.pivots.len() as u32;
        self.pivots.push(p);
        self.basis.extend_from_slice(&v);
        1
    }

    /// Whether the indicator of `support` lies in the row space. Does not
    /// modify the basis.
    pub fn in_row_space(&self, support: &[usize]) -> Result<bool> {
        self.check(support)?;
        let mut v = self.indicator(support);
        self.reduce_sparse(&mut v, support);
        Ok(v.iter().all(|&w| w == 0))
    }

    /// Membership test for a dense packed vector of `n` bits.
    pub fn contains_packed(&self, packed: &[u64]) -> bool {
        let mut v = packed.to_vec();
        v.resize(self.words, 0);
        self.reduce_dense(&mut v);
        v.iter().all(|&w| w == 0)
    }

    /// `e_i` lies in the row space, i.e. `σ_i` is fixed by the constraints.
    pub fn is_determined(&self, i: usize) -> bool {
        let k = self.pivot_row[i];
        k != NO_PIVOT && self.row(k as usize).iter().map(|w| w.count_ones()).sum::<u32>() == 1
    }

    pub fn determined_variables(&self) -> Vec<bool> {
        let mut det = vec![false; self.n];
        for (k, &p) in self.pivots.iter().enumerate() {
            if self.row(k).iter().map(|w| w.count_ones()).sum::<u32>() == 1 {
                det[p] = true;
            }
        }
        det
    }

    pub fn determined_count(&self) -> usize {
        (0..self.rank())
            .filter(|&k| self.row(k).iter().map(|w| w.count_ones()).sum::<u32>() == 1)
            .count()
    }

    /// Canonical representative of `e_i` modulo the row space. Two variables
    /// have equal labels iff `σ_i σ_j` is fixed; the label is zero iff `σ_i`
    /// is fixed.
    pub fn coset_label(&self, i: usize) -> Vec<u64> {
        let k = self.pivot_row[i];
        if k == NO_PIVOT {
            let mut v = vec![0u64; self.words];
            toggle(&mut v, i);
            v
        } else {
            let mut v = self.row(k as usize).to_vec();
            toggle(&mut v, i);
            v
        }
    }
}
