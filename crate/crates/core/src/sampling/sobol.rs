//! Unscrambled Sobol' sequence with Joe & Kuo direction numbers.
//!
//! Points are generated in Gray-code order, so index `i` of the sequence is
//! the XOR of the direction numbers selected by the set bits of `i ^ (i >> 1)`.
//! The first point (index 0) is the origin.

use super::PointSet;
use crate::error::{Error, Result};

const BITS: usize = 32;
const SCALE: f64 = 1.0 / 4_294_967_296.0;

/// Primitive-polynomial data `(degree, coefficients, initial m values)` for
/// dimensions 2 and up (dimension 1 is the van der Corput sequence).
const JOE_KUO: &[(u32, u32, &[u32])] = &[
    (1, 0, &[1]),
    (2, 1, &[1, 3]),
    (3, 1, &[1, 3, 1]),
    (3, 2, &[1, 1, 1]),
    (4, 1, &[1, 1, 3, 3]),
    (4, 4, &[1, 3, 5, 13]),
    (5, 2, &[1, 1, 5, 5, 17]),
    (5, 4, &[1, 1, 5, 5, 5]),
    (5, 7, &[1, 1, 7, 11, 19]),
    (5, 11, &[1, 1, 5, 1, 1]),
    (5, 13, &[1, 1, 1, 3, 11]),
    (5, 14, &[1, 3, 5, 5, 31]),
    (6, 1, &[1, 3, 3, 9, 7, 49]),
    (6, 13, &[1, 1, 1, 15, 21, 21]),
    (6, 16, &[1, 3, 1, 13, 27, 49]),
    (6, 19, &[1, 1, 1, 15, 7, 5]),
    (6, 22, &[1, 3, 1, 15, 13, 25]),
    (6, 25, &[1, 1, 5, 5, 19, 61]),
    (7, 1, &[1, 3, 7, 11, 23, 15, 103]),
    (7, 4, &[1, 3, 7, 13, 13, 15, 69]),
    (7, 7, &[1, 1, 3, 13, 7, 35, 63]),
    (7, 8, &[1, 3, 5, 9, 1, 25, 53]),
    (7, 14, &[1, 3, 1, 13, 9, 35, 107]),
    (7, 19, &[1, 3, 1, 5, 27, 61, 31]),
    (7, 21, &[1, 1, 5, 11, 19, 41, 61]),
    (7, 28, &[1, 3, 5, 3, 3, 13, 69]),
    (7, 31, &[1, 1, 7, 13, 1, 19, 1]),
    (7, 32, &[1, 3, 7, 5, 13, 19, 59]),
    (7, 37, &[1, 1, 3, 9, 25, 29, 41]),
    (7, 41, &[1, 3, 5, 13, 23, 1, 55]),
    (7, 42, &[1, 3, 7, 3, 13, 59, 17]),
];

/// Largest dimension supported by the embedded table.
pub const MAX_DIMENSION: usize = JOE_KUO.len() + 1;

fn direction_numbers(dim: usize) -> [u32; BITS] {
    let mut v = [0u32; BITS];
    if dim == 0 {
        for (k, vk) in v.iter_mut().enumerate() {
            *vk = 1u32 << (31 - k);
        }
        return v;
    }
    let (s, a, m) = JOE_KUO[dim - 1];
    let s = s as usize;
    for k in 0..s.min(BITS) {
        v[k] = m[k] << (31 - k);
    }
    for k in s..BITS {
        let mut val = v[k - s] ^ (v[k - s] >> s);
        for l in 1..s {
            if (a >> (s - 1 - l)) & 1 == 1 {
                val ^= v[k - l];
            }
        }
        v[k] = val;
    }
    v
}

/// Incremental generator over a fixed dimension.
#[derive(Debug, Clone)]
pub struct SobolSequence {
    directions: Vec<[u32; BITS]>,
    state: Vec<u32>,
    index: u64,
}

impl SobolSequence {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::domain("Sobol' dimension must be at least 1"));
        }
        if dim > MAX_DIMENSION {
            return Err(Error::UnsupportedDimension {
                requested: dim,
                max: MAX_DIMENSION,
            });
        }
        Ok(Self {
            directions: (0..dim).map(direction_numbers).collect(),
            state: vec![0; dim],
            index: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.state.len()
    }

    /// Positions the generator so the next emitted point has sequence index `index`.
    pub fn seek(&mut self, index: u64) {
        let gray = index ^ (index >> 1);
        for (x, dirs) in self.state.iter_mut().zip(&self.directions) {
            *x = 0;
            for (bit, dir) in dirs.iter().enumerate() {
                if (gray >> bit) & 1 == 1 {
                    *x ^= dir;
                }
            }
        }
        self.index = index;
    }

    /// Writes the current point into `out` and advances.
    pub fn next_into(&mut self, out: &mut [f64]) {
        for (o, x) in out.iter_mut().zip(&self.state) {
            *o = f64::from(*x) * SCALE;
        }
        let c = (!self.index).trailing_zeros() as usize;
        if c < BITS {
            for (x, dirs) in self.state.iter_mut().zip(&self.directions) {
                *x ^= dirs[c];
            }
        }
        self.index += 1;
    }
}

/// `n` points of the `d`-dimensional sequence after discarding the first `skip`.
pub fn sobol_points(d: usize, n: usize, skip: u64) -> Result<PointSet> {
    if n == 0 {
        return Err(Error::domain("Sobol' point count must be at least 1"));
    }
    let mut seq = SobolSequence::new(d)?;
    seq.seek(skip);
    let mut data = vec![0.0; n * d];
    for row in data.chunks_exact_mut(d) {
        seq.next_into(row);
    }
    Ok(PointSet::from_row_major(d, data))
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference coordinates from an independent Joe–Kuo implementation.
    #[test]
    fn matches_reference_points() {
        let pts = sobol_points(6, 1024, 0).unwrap();
        let expect: &[(usize, [f64; 6])] = &[
            (1, [0.5; 6]),
            (2, [0.75, 0.25, 0.25, 0.25, 0.75, 0.75]),
            (7, [0.125, 0.625, 0.375, 0.125, 0.125, 0.375]),
            (100, [0.4140625, 0.2578125, 0.7734375, 0.7265625, 0.8828125, 0.7421875]),
            (
                513,
                [0.5029296875, 0.7509765625, 0.4541015625, 0.4912109375, 0.9580078125, 0.0654296875],
            ),
            (
                1023,
                [0.0009765625, 0.7529296875, 0.6123046875, 0.1455078125, 0.1865234375, 0.4384765625],
            ),
        ];
        for (i, row) in expect {
            assert_eq!(pts.row(*i), row, "point {i}");
        }
        let wide = sobol_points(21, 1, 299).unwrap();
        let expect21 = [
            0.490234375, 0.669921875, 0.162109375, 0.466796875, 0.201171875, 0.904296875,
            0.130859375, 0.279296875, 0.021484375, 0.455078125, 0.876953125, 0.357421875,
            0.470703125, 0.619140625, 0.935546875, 0.048828125, 0.330078125, 0.189453125,
            0.501953125, 0.455078125, 0.361328125,
        ];
        assert_eq!(wide.row(0), expect21);
    }

    #[test]
    fn origin_first() {
        assert_eq!(sobol_points(1, 1, 0).unwrap().row(0), [0.0]);
    }

    #[test]
    fn skip_one_is_interior() {
        let pts = sobol_points(3, 500, 1).unwrap();
        assert!(pts.rows().flatten().all(|&x| x > 0.0 && x < 1.0));
    }

    #[test]
    fn seek_matches_sequential() {
        let all = sobol_points(6, 300, 0).unwrap();
        let tail = sobol_points(6, 100, 200).unwrap();
        for i in 0..100 {
            assert_eq!(all.row(200 + i), tail.row(i));
        }
    }

    #[test]
    fn rejects_large_dimension() {
        assert!(matches!(
            sobol_points(MAX_DIMENSION + 1, 4, 0),
            Err(Error::UnsupportedDimension { .. })
        ));
        assert!(sobol_points(MAX_DIMENSION, 4, 0).is_ok());
    }
}
