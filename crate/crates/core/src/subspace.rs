//! Hamming-weight-k basis indexing and initial states.
//!
//! Basis states are `u64` masks where bit `i` is vertex/qubit `i`. The
//! canonical order is colexicographic, which for a fixed weight coincides
//! with increasing numeric value of the mask.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, QaoaError, Result};
use crate::rng::rng_from_seed;

/// Largest supported qubit count (masks live in a `u64`).
pub const MAX_QUBITS: usize = 63;

/// Binomial coefficient, saturating at `u64::MAX`.
pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * u128::from(n - i) / u128::from(i + 1);
        if acc > u128::from(u64::MAX) {
            return u64::MAX;
        }
    }
    acc as u64
}

/// Bijection between weight-k masks on `n` bits and `0..C(n,k)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubspaceIndex {
    n: usize,
    k: usize,
    dim: usize,
    // pascal[c * (k + 1) + i] = C(c, i)
    pascal: Vec<u64>,
}

impl SubspaceIndex {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if n > MAX_QUBITS {
            return Err(invalid(format!("n = {n} exceeds the {MAX_QUBITS}-bit limit")));
        }
        if k > n {
            return Err(invalid(format!("k = {k} exceeds n = {n}")));
        }
        let dim = binomial(n as u64, k as u64);
        let dim = usize::try_from(dim)
            .ok()
            .filter(|&d| d < usize::MAX)
            .ok_or_else(|| QaoaError::ResourceLimit(format!("C({n},{k}) does not fit in memory")))?;
        let mut pascal = vec![0u64; (n + 1) * (k + 1)];
        for c in 0..=n {
            for i in 0..=k {
                pascal[c * (k + 1) + i] = binomial(c as u64, i as u64);
            }
        }
        Ok(Self { n, k, dim, pascal })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn choose(&self, c: usize, i: usize) -> u64 {
        self.pascal[c * (self.k + 1) + i]
    }

    fn check_mask(&self, x: u64) -> Result<()> {
        if self.n < 64 && x >> self.n != 0 {
            return Err(invalid(format!("bitstring {x:#b} has bits beyond n = {}", self.n)));
        }
        let w = x.count_ones() as usize;
        if w != self.k {
            return Err(invalid(format!("bitstring {x:#b} has weight {w}, expected {}", self.k)));
        }
        Ok(())
    }

    /// Colexicographic rank of a weight-k mask.
    pub fn rank(&self, x: u64) -> Result<usize> {
        self.check_mask(x)?;
        Ok(self.rank_unchecked(x))
    }

    /// Rank without validating the weight; the caller guarantees `|x| = k`.
    #[inline]
    pub fn rank_unchecked(&self, x: u64) -> usize {
        let mut rest = x;
        let mut r = 0u64;
        let mut i = 1;
        while rest != 0 {
            let c = rest.trailing_zeros() as usize;
            r += self.choose(c, i);
            rest &= rest - 1;
            i += 1;
        }
        r as usize
    }

    pub fn unrank(&self, i: usize) -> Result<u64> {
        if i >= self.dim {
            return Err(invalid(format!("index {i} out of range for dimension {}", self.dim)));
        }
        let mut r = i as u64;
        let mut x = 0u64;
        let mut c = self.n;
        for slot in (1..=self.k).rev() {
            // largest c' < c with C(c', slot) <= r
            c -= 1;
            while self.choose(c, slot) > r {
                c -= 1;
            }
            r -= self.choose(c, slot);
            x |= 1u64 << c;
        }
        Ok(x)
    }

    /// All weight-k masks in canonical order.
    pub fn basis(&self) -> Vec<u64> {
        let mut out = Vec::with_capacity(self.dim);
        if self.k == 0 {
            out.push(0);
            return out;
        }
        let mut x: u64 = (1u64 << self.k) - 1;
        for _ in 0..self.dim {
            out.push(x);
            // Gosper's hack: next larger integer with the same popcount
            let c = x & x.wrapping_neg();
            let r = x.wrapping_add(c);
            x = (((r ^ x) >> 2) / c) | r;
        }
        out
    }
}

/// Complex amplitudes over the canonical weight-k basis.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n: usize,
    k: usize,
    amplitudes: Vec<Complex64>,
}

#[derive(Serialize, Deserialize)]
struct StateVectorJson {
    n: usize,
    k: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl StateVector {
    pub fn from_amplitudes(index: &SubspaceIndex, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != index.dim() {
            return Err(invalid(format!(
                "amplitude vector has length {}, expected {}",
                amplitudes.len(),
                index.dim()
            )));
        }
        Ok(Self { n: index.n(), k: index.k(), amplitudes })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    pub(crate) fn check_dim(&self, dim: usize) -> Result<()> {
        if self.dim() != dim {
            return Err(invalid(format!("state dimension {} does not match operator dimension {dim}", self.dim())));
        }
        Ok(())
    }

    /// Largest amplitude deviation from `other` after aligning global phase
    /// on the first amplitude of `self` with non-negligible magnitude.
    pub fn phase_aligned_distance(&self, other: &StateVector) -> f64 {
        let anchor = self.amplitudes.iter().position(|a| a.norm() > 1e-8);
        let phase = match anchor {
            Some(i) if other.amplitudes[i].norm() > 0.0 => {
                let r = self.amplitudes[i] / other.amplitudes[i];
                r / r.norm()
            }
            _ => Complex64::new(1.0, 0.0),
        };
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b * phase).norm())
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> String {
        let doc = StateVectorJson {
            n: self.n,
            k: self.k,
            re: self.amplitudes.iter().map(|a| a.re).collect(),
            im: self.amplitudes.iter().map(|a| a.im).collect(),
        };
        serde_json::to_string(&doc).expect("state vector serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: StateVectorJson = serde_json::from_str(text)?;
        if doc.re.len() != doc.im.len() {
            return Err(invalid("re and im arrays differ in length"));
        }
        let index = SubspaceIndex::new(doc.n, doc.k)?;
        let amps = doc.re.into_iter().zip(doc.im).map(|(re, im)| Complex64::new(re, im)).collect();
        Self::from_amplitudes(&index, amps)
    }
}

/// Uniform superposition over all weight-k basis states.
pub fn dicke_state(index: &SubspaceIndex) -> StateVector {
    let amp = Complex64::new(1.0 / (index.dim() as f64).sqrt(), 0.0);
    StateVector { n: index.n(), k: index.k(), amplitudes: vec![amp; index.dim()] }
}

pub fn basis_k_state(index: &SubspaceIndex, x: u64) -> Result<StateVector> {
    let i = index.rank(x)?;
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); index.dim()];
    amplitudes[i] = Complex64::new(1.0, 0.0);
    Ok(StateVector { n: index.n(), k: index.k(), amplitudes })
}

/// Basis state of a uniformly random weight-k bitstring, fixed by `seed`.
pub fn random_k_state(index: &SubspaceIndex, seed: u64) -> StateVector {
    let mut rng = rng_from_seed(seed);
    let i = rng.random_range(0..index.dim());
    let x = index.unrank(i).expect("index drawn in range");
    basis_k_state(index, x).expect("unranked mask has weight k")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn colex_enumeration(n: usize, k: usize) -> Vec<u64> {
        // brute force: all masks of weight k sorted by their reversed bit
        // pattern read most-significant first, i.e. colex order
        let mut v: Vec<u64> = (0..1u64 << n).filter(|x| x.count_ones() as usize == k).collect();
        v.sort_by_key(|&x| {
            let mut set: Vec<usize> = (0..n).filter(|&b| x >> b & 1 == 1).collect();
            set.reverse();
            set
        });
        v
    }

    #[test]
    fn rank_examples() {
        let idx = SubspaceIndex::new(4, 2).unwrap();
        assert_eq!(idx.rank(0b0011).unwrap(), 0);
        assert_eq!(idx.rank(0b1100).unwrap(), 5);
        assert_eq!(idx.unrank(0).unwrap(), 0b0011);
        assert_eq!(idx.unrank(5).unwrap(), 0b1100);
        let one = SubspaceIndex::new(1, 1).unwrap();
        assert_eq!(one.dim(), 1);
        assert_eq!(one.rank(1).unwrap(), 0);
    }

    #[test]
    fn rank_errors() {
        let idx = SubspaceIndex::new(4, 2).unwrap();
        assert!(matches!(idx.rank(0b0111), Err(QaoaError::InvalidArgument(_))));
        assert!(matches!(idx.rank(0b10001), Err(QaoaError::InvalidArgument(_))));
        assert!(matches!(idx.unrank(6), Err(QaoaError::InvalidArgument(_))));
        assert!(SubspaceIndex::new(3, 4).is_err());
    }

    #[test]
    fn order_matches_brute_force_colex() {
        for n in 1..=8 {
            for k in 0..=n {
                let idx = SubspaceIndex::new(n, k).unwrap();
                let expected = colex_enumeration(n, k);
                assert_eq!(idx.basis(), expected, "n={n} k={k}");
                for (i, &x) in expected.iter().enumerate() {
                    assert_eq!(idx.unrank(i).unwrap(), x);
                }
            }
        }
    }

    #[test]
    fn exhaustive_bijection_up_to_16() {
        for n in 1..=16 {
            for k in 0..=n {
                let idx = SubspaceIndex::new(n, k).unwrap();
                assert_eq!(idx.dim() as u64, binomial(n as u64, k as u64));
                let mut prev = None;
                for (i, x) in idx.basis().into_iter().enumerate() {
                    assert_eq!(idx.rank(x).unwrap(), i);
                    assert_eq!(idx.unrank(i).unwrap(), x);
                    if let Some(p) = prev {
                        assert!(x > p);
                    }
                    prev = Some(x);
                }
            }
        }
    }

    #[test]
    fn dims() {
        assert_eq!(SubspaceIndex::new(10, 5).unwrap().dim(), 252);
        assert_eq!(binomial(62, 31), 465428353255261088);
        assert_eq!(binomial(5, 6), 0);
    }

    #[test]
    fn dicke_amplitudes() {
        let idx = SubspaceIndex::new(4, 2).unwrap();
        let d = dicke_state(&idx);
        for a in d.amplitudes() {
            assert!((a.re - 1.0 / 6f64.sqrt()).abs() < 1e-15);
            assert_eq!(a.im, 0.0);
        }
        assert!((d.norm_sqr() - 1.0).abs() < 1e-12);
        let single = dicke_state(&SubspaceIndex::new(1, 1).unwrap());
        assert_eq!(single.amplitudes(), &[Complex64::new(1.0, 0.0)]);
    }

    #[test]
    fn dicke_is_relabeling_invariant() {
        let idx = SubspaceIndex::new(6, 3).unwrap();
        let d = dicke_state(&idx);
        let perm = [3usize, 0, 5, 1, 4, 2];
        let mut permuted = vec![Complex64::new(0.0, 0.0); idx.dim()];
        for (i, &x) in idx.basis().iter().enumerate() {
            let y = (0..6).filter(|&b| x >> b & 1 == 1).fold(0u64, |acc, b| acc | 1 << perm[b]);
            permuted[idx.rank(y).unwrap()] = d.amplitudes()[i];
        }
        assert_eq!(permuted, d.amplitudes());
    }

    #[test]
    fn basis_states() {
        let idx = SubspaceIndex::new(4, 2).unwrap();
        let e0 = basis_k_state(&idx, 0b0011).unwrap();
        assert_eq!(e0.amplitudes()[0], Complex64::new(1.0, 0.0));
        let e5 = basis_k_state(&idx, 0b1100).unwrap();
        assert_eq!(e5.amplitudes()[5], Complex64::new(1.0, 0.0));
        assert_eq!(e5.norm_sqr(), 1.0);
        assert!(basis_k_state(&idx, 0b0001).is_err());
    }

    #[test]
    fn random_k_state_is_deterministic_and_uniform() {
        let idx = SubspaceIndex::new(4, 2).unwrap();
        assert_eq!(random_k_state(&idx, 11), random_k_state(&idx, 11));
        let mut counts = [0usize; 6];
        let trials = 10_000;
        for seed in 0..trials {
            let s = random_k_state(&idx, seed);
            let ones: Vec<usize> = s.amplitudes().iter().enumerate().filter(|(_, a)| a.norm() > 0.0).map(|(i, _)| i).collect();
            assert_eq!(ones.len(), 1);
            assert_eq!(s.amplitudes()[ones[0]], Complex64::new(1.0, 0.0));
            counts[ones[0]] += 1;
        }
        for c in counts {
            let freq = c as f64 / trials as f64;
            assert!((freq - 1.0 / 6.0).abs() < 0.02, "frequency {freq}");
        }
    }

    #[test]
    fn state_json_round_trip() {
        let idx = SubspaceIndex::new(4, 2).unwrap();
        let s = random_k_state(&idx, 3);
        let text = s.to_json();
        assert!(text.starts_with("{\"n\":4,\"k\":2,\"re\":["));
        assert_eq!(StateVector::from_json(&text).unwrap(), s);
    }

    proptest! {
        #[test]
        fn rank_unrank_round_trip(n in 1usize..=40, seed in any::<u64>()) {
            let k = (seed as usize) % (n + 1);
            let idx = SubspaceIndex::new(n, k).unwrap();
            let i = (seed.rotate_left(17) as usize) % idx.dim();
            let x = idx.unrank(i).unwrap();
            prop_assert_eq!(x.count_ones() as usize, k);
            prop_assert_eq!(idx.rank(x).unwrap(), i);
        }
    }
}
