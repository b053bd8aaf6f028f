//! Unscrambled Sobol sequence with Joe–Kuo direction numbers (Gray-code order).

const BITS: usize = 32;

/// (degree s, polynomial a, initial m_1..m_s) for dimensions 2..=8.
const JOE_KUO: [(u32, u32, &[u32]); 7] = [
    (1, 0, &[1]),
    (2, 1, &[1, 3]),
    (3, 1, &[1, 3, 1]),
    (3, 2, &[1, 1, 1]),
    (4, 1, &[1, 1, 3, 3]),
    (4, 4, &[1, 3, 5, 13]),
    (5, 2, &[1, 1, 5, 5, 17]),
];

pub const MAX_DIM: usize = JOE_KUO.len() + 1;

#[derive(Debug, Clone)]
pub struct Sobol {
    directions: Vec<[u32; BITS]>,
    state: Vec<u32>,
    index: u64,
}

impl Sobol {
    /// Generator positioned at the origin (index 0).
    ///
    /// # Panics
    /// If `dim` is zero or larger than [`MAX_DIM`].
    pub fn new(dim: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&dim), "Sobol dimension {dim} outside 1..={MAX_DIM}");
        let mut directions = Vec::with_capacity(dim);
        let mut first = [0u32; BITS];
        for (i, v) in first.iter_mut().enumerate() {
            *v = 1 << (BITS - 1 - i);
        }
        directions.push(first);
        for &(s, a, m) in &JOE_KUO[..dim - 1] {
            let s = s as usize;
            let mut v = [0u32; BITS];
            for i in 0..BITS {
                v[i] = if i < s {
                    m[i] << (BITS - 1 - i)
                } else {
                    let mut x = v[i - s] ^ (v[i - s] >> s);
                    for k in 1..s {
                        if (a >> (s - 1 - k)) & 1 == 1 {
                            x ^= v[i - k];
                        }
                    }
                    x
                };
            }
            directions.push(v);
        }
        Self { directions, state: vec![0; dim], index: 0 }
    }

    pub fn dim(&self) -> usize {
        self.state.len()
    }

    /// Current point, then advance. The first call returns the origin.
    pub fn next_point(&mut self) -> Vec<f64> {
        let out = self.state.iter().map(|&x| x as f64 / (1u64 << BITS) as f64).collect();
        let c = (!self.index).trailing_zeros() as usize;
        assert!(c < BITS, "Sobol sequence exhausted");
        for (x, v) in self.state.iter_mut().zip(&self.directions) {
            *x ^= v[c];
        }
        self.index += 1;
        out
    }
}

impl Iterator for Sobol {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        Some(self.next_point())
    }
}
