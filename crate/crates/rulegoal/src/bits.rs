//! Fixed-width bitset over tuple indices, the workhorse of the mining fast
//! paths.

/// A bitset of fixed length `len`, bit t corresponding to tuple index t.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Bits {
    words: Vec<u64>,
    len: usize,
}

impl Bits {
    pub fn zeros(len: usize) -> Self {
        Bits { words: vec![0; len.div_ceil(64)], len }
    }

    pub fn ones(len: usize) -> Self {
        let mut b = Bits { words: vec![!0u64; len.div_ceil(64)], len };
        b.trim();
        b
    }

    fn trim(&mut self) {
        let tail = self.len % 64;
        if tail != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << tail) - 1;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn set(&mut self, i: usize) {
        debug_assert!(i < self.len);
        self.words[i / 64] |= 1u64 << (i % 64);
    }

    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        self.words[i / 64] & (1u64 << (i % 64)) != 0
    }

    pub fn and_assign(&mut self, other: &Bits) {
        debug_assert_eq!(self.len, other.len);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= b;
        }
    }

    pub fn or_assign(&mut self, other: &Bits) {
        debug_assert_eq!(self.len, other.len);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    pub fn count(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    pub fn any(&self) -> bool {
        self.words.iter().any(|&w| w != 0)
    }

    /// Shift toward lower indices: bit t of the result is bit t+k of self.
    pub fn shifted_down(&self, k: usize) -> Bits {
        let mut out = Bits::zeros(self.len);
        if k >= self.len {
            return out;
        }
        let word_shift = k / 64;
        let bit_shift = k % 64;
        let n = self.words.len();
        for i in 0..n - word_shift {
            let lo = self.words[i + word_shift] >> bit_shift;
            let hi = if bit_shift > 0 && i + word_shift + 1 < n {
                self.words[i + word_shift + 1] << (64 - bit_shift)
            } else {
                0
            };
            out.words[i] = lo | hi;
        }
        out
    }

    /// Shift toward higher indices: bit t of the result is bit t-k of self.
    /// Bits shifted beyond the length are discarded.
    pub fn shifted_up(&self, k: usize) -> Bits {
        let mut out = Bits::zeros(self.len);
        if k >= self.len {
            return out;
        }
        let word_shift = k / 64;
        let bit_shift = k % 64;
        let n = self.words.len();
        for i in (word_shift..n).rev() {
            let lo = self.words[i - word_shift] << bit_shift;
            let hi = if bit_shift > 0 && i > word_shift {
                self.words[i - word_shift - 1] >> (64 - bit_shift)
            } else {
                0
            };
            out.words[i] = lo | hi;
        }
        out.trim();
        out
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    None
                } else {
                    let b = w.trailing_zeros() as usize;
                    w &= w - 1;
                    Some(wi * 64 + b)
                }
            })
        })
    }
}
