//! Random affine XOR hashes `h'(x) = A·x ⊕ a0` over GF(2), and their
//! encoding as parity constraints.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::formula::Formula;

/// One hash `h' : {0,1}^k → {0,1}^m`. Row `i` holds `a_{i,0}, …, a_{i,k}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct XorHash {
    pub k_bits: usize,
    pub m: usize,
    pub coeffs: Vec<Vec<bool>>,
}

pub fn pick_hash<R: Rng + ?Sized>(k_bits: usize, m: usize, rng: &mut R) -> XorHash {
    let coeffs = (0..m)
        .map(|_| (0..=k_bits).map(|_| rng.gen::<bool>()).collect())
        .collect();
    XorHash { k_bits, m, coeffs }
}

impl XorHash {
    pub fn apply(&self, bits: &[bool]) -> Result<Vec<bool>> {
        if bits.len() != self.k_bits {
            return Err(Error::LengthMismatch {
                expected: self.k_bits,
                got: bits.len(),
            });
        }
        Ok(self
            .coeffs
            .iter()
            .map(|row| {
                row[1..]
                    .iter()
                    .zip(bits)
                    .fold(row[0], |acc, (&a, &b)| acc ^ (a & b))
            })
            .collect())
    }

    /// `h'(bits) = 0^m` as a conjunction of parity atoms over `bitvars`.
    pub fn constraint(&self, bitvars: &[String]) -> Formula {
        rows_to_formula(&self.coeffs, bitvars)
    }

    /// Same solution set as [`XorHash::constraint`], after Gaussian
    /// elimination of the rows.
    pub fn constraint_presolved(&self, bitvars: &[String]) -> Formula {
        match self.echelon() {
            Some(rows) => rows_to_formula(&rows, bitvars),
            None => Formula::False,
        }
    }

    /// Reduced row echelon form of the system `Σ_j a_ij x_j = a_i0`, with
    /// zero rows removed. `None` if the system is inconsistent.
    pub fn echelon(&self) -> Option<Vec<Vec<bool>>> {
        let mut rows = self.coeffs.clone();
        let mut pivot_row = 0;
        for col in 1..=self.k_bits {
            let Some(found) = (pivot_row..rows.len()).find(|&r| rows[r][col]) else {
                continue;
            };
            rows.swap(pivot_row, found);
            let pivot = rows[pivot_row].clone();
            for (r, row) in rows.iter_mut().enumerate() {
                if r != pivot_row && row[col] {
                    for (x, p) in row.iter_mut().zip(&pivot) {
                        *x ^= p;
                    }
                }
            }
            pivot_row += 1;
        }
        let (kept, zero): (Vec<_>, Vec<_>) = rows.into_iter().partition(|r| r[1..].iter().any(|&b| b));
        if zero.iter().any(|r| r[0]) {
            return None;
        }
        Some(kept)
    }
}

fn rows_to_formula(rows: &[Vec<bool>], bitvars: &[String]) -> Formula {
    let atoms = rows.iter().map(|row| {
        let xs: Vec<Formula> = row[1..]
            .iter()
            .zip(bitvars)
            .filter(|(&a, _)| a)
            .map(|(_, v)| Formula::Bool(v.clone()))
            .collect();
        // a0 ⊕ (⊕ selected) = 0  ⇔  ⊕ selected = a0.
        match (row[0], xs.is_empty()) {
            (false, true) => Formula::True,
            (true, true) => Formula::False,
            (true, false) => Formula::Xor(xs),
            (false, false) => Formula::not(Formula::Xor(xs)),
        }
    });
    Formula::and_all(atoms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::Assignment;
    use crate::rat;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|i| format!("b{i}")).collect()
    }

    fn bits_of(x: u32, k: usize) -> Vec<bool> {
        (0..k).map(|j| x >> j & 1 == 1).collect()
    }

    fn eval_constraint(f: &Formula, bits: &[bool]) -> bool {
        let asg: Assignment = bits
            .iter()
            .enumerate()
            .map(|(i, &b)| (format!("b{i}"), rat::int(b as i64)))
            .collect();
        f.eval(&asg).unwrap()
    }

    #[test]
    fn zero_rows_is_true() {
        let h = pick_hash(5, 0, &mut rng(1));
        assert!(h.coeffs.is_empty());
        assert_eq!(h.constraint(&names(5)), Formula::True);
        assert_eq!(h.apply(&[false; 5]).unwrap(), Vec::<bool>::new());
    }

    #[test]
    fn same_seed_same_hash() {
        assert_eq!(pick_hash(4, 2, &mut rng(77)), pick_hash(4, 2, &mut rng(77)));
        assert_ne!(pick_hash(4, 2, &mut rng(77)), pick_hash(4, 2, &mut rng(78)));
    }

    #[test]
    fn coefficient_means_are_balanced() {
        let (k, m) = (4, 2);
        let mut ones = vec![0u32; m * (k + 1)];
        for seed in 0..10_000 {
            let h = pick_hash(k, m, &mut rng(seed));
            for (i, b) in h.coeffs.iter().flatten().enumerate() {
                ones[i] += *b as u32;
            }
        }
        for c in ones {
            let mean = c as f64 / 10_000.0;
            assert!((0.48..=0.52).contains(&mean), "mean {mean}");
        }
    }

    #[test]
    fn direct_evaluation() {
        let h = XorHash {
            k_bits: 1,
            m: 1,
            coeffs: vec![vec![true, true]],
        };
        assert_eq!(h.apply(&[false]).unwrap(), [true]);
        assert_eq!(h.apply(&[true]).unwrap(), [false]);
        assert!(matches!(h.apply(&[true, false]), Err(Error::LengthMismatch { expected: 1, got: 2 })));
        // 1 ⊕ b0 = 0  ⇔  b0 = 1.
        assert_eq!(h.constraint(&names(1)), Formula::Xor(vec![Formula::Bool("b0".into())]));
        let zero = XorHash {
            k_bits: 3,
            m: 2,
            coeffs: vec![vec![false; 4]; 2],
        };
        for x in 0..8 {
            assert_eq!(zero.apply(&bits_of(x, 3)).unwrap(), [false, false]);
        }
    }

    #[test]
    fn pairwise_independence() {
        let (k, m) = (6, 2);
        let (x1, x2) = (bits_of(5, k), bits_of(42, k));
        let mut hist = [[0u32; 4]; 4];
        let n = 20_000;
        for seed in 0..n {
            let h = pick_hash(k, m, &mut rng(seed));
            let w = |x: &[bool]| h.apply(x).unwrap().iter().enumerate().map(|(i, &b)| (b as usize) << i).sum::<usize>();
            hist[w(&x1)][w(&x2)] += 1;
        }
        for row in hist {
            for c in row {
                let p = c as f64 / n as f64;
                assert!((p - 1.0 / 16.0).abs() <= 0.01, "p = {p}");
            }
        }
    }

    #[test]
    fn constraint_matches_apply() {
        let mut r = rng(9);
        for _ in 0..1000 {
            let k = r.gen_range(1..8);
            let m = r.gen_range(0..5);
            let h = pick_hash(k, m, &mut r);
            let bits = bits_of(r.gen(), k);
            let zero = h.apply(&bits).unwrap().iter().all(|b| !b);
            assert_eq!(eval_constraint(&h.constraint(&names(k)), &bits), zero);
            assert_eq!(eval_constraint(&h.constraint_presolved(&names(k)), &bits), zero);
        }
    }

    #[test]
    fn surviving_fraction() {
        let (k, t) = (10, 6);
        let set: Vec<Vec<bool>> = (0..1u32 << t).map(|x| bits_of(x * 13 + 7, k)).collect();
        for m in 0..=t {
            let mut total = 0u64;
            for seed in 0..2000 {
                let h = pick_hash(k, m, &mut rng(seed * 31 + m as u64));
                total += set.iter().filter(|w| h.apply(w).unwrap().iter().all(|b| !b)).count() as u64;
            }
            let mean = total as f64 / 2000.0;
            let want = (1u64 << (t - m)) as f64;
            assert!((mean - want).abs() <= 0.1 * want, "m={m} mean={mean} want={want}");
        }
    }

    #[test]
    fn affine_over_gf2() {
        let mut r = rng(3);
        for _ in 0..500 {
            let h = pick_hash(8, 4, &mut r);
            let (x, y, z) = (bits_of(r.gen(), 8), bits_of(r.gen(), 8), bits_of(r.gen(), 8));
            let xyz: Vec<bool> = (0..8).map(|i| x[i] ^ y[i] ^ z[i]).collect();
            let lhs = h.apply(&xyz).unwrap();
            let (hx, hy, hz) = (h.apply(&x).unwrap(), h.apply(&y).unwrap(), h.apply(&z).unwrap());
            let rhs: Vec<bool> = (0..4).map(|i| hx[i] ^ hy[i] ^ hz[i]).collect();
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn presolve_preserves_solutions() {
        let mut r = rng(11);
        for _ in 0..300 {
            let k = r.gen_range(1..7);
            let m = r.gen_range(0..9);
            let h = pick_hash(k, m, &mut r);
            let plain = h.constraint(&names(k));
            let pre = h.constraint_presolved(&names(k));
            for x in 0..1u32 << k {
                let bits = bits_of(x, k);
                assert_eq!(eval_constraint(&plain, &bits), eval_constraint(&pre, &bits));
            }
            if let Some(rows) = h.echelon() {
                assert!(rows.len() <= k.min(m));
            }
        }
    }
}
