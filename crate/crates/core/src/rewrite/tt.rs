use crate::verify::{exhaustive_word_count, valid_mask, VAR_MASKS};

/// Complete truth table over `vars` inputs, in the simulator's bit order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TruthTable {
    vars: usize,
    words: Vec<u64>,
}

impl TruthTable {
    pub fn from_words(vars: usize, mut words: Vec<u64>) -> Self {
        words.resize(exhaustive_word_count(vars), 0);
        let mask = valid_mask(vars);
        for w in &mut words {
            *w &= mask;
        }
        TruthTable { vars, words }
    }

    pub fn constant(vars: usize, value: bool) -> Self {
        let fill = if value { valid_mask(vars) } else { 0 };
        TruthTable { vars, words: vec![fill; exhaustive_word_count(vars)] }
    }

    pub fn var(vars: usize, i: usize) -> Self {
        let words = (0..exhaustive_word_count(vars))
            .map(|w| {
                if i < 6 {
                    VAR_MASKS[i]
                } else if (w >> (i - 6)) & 1 == 1 {
                    !0
                } else {
                    0
                }
            })
            .collect();
        Self::from_words(vars, words)
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn not(&self) -> Self {
        let mask = valid_mask(self.vars);
        TruthTable { vars: self.vars, words: self.words.iter().map(|w| !w & mask).collect() }
    }

    pub fn const_value(&self) -> Option<bool> {
        let mask = valid_mask(self.vars);
        if self.words.iter().all(|&w| w == 0) {
            Some(false)
        } else if self.words.iter().all(|&w| w == mask) {
            Some(true)
        } else {
            None
        }
    }

    /// The table with variable `i` fixed to `value`; still over `vars` inputs.
    pub fn cofactor(&self, i: usize, value: bool) -> Self {
        let words = if i < 6 {
            let shift = 1u32 << i;
            let m = VAR_MASKS[i];
            self.words
                .iter()
                .map(|&w| {
                    if value {
                        let hi = w & m;
                        hi | (hi >> shift)
                    } else {
                        let lo = w & !m;
                        lo | (lo << shift)
                    }
                })
                .collect()
        } else {
            let stride = 1usize << (i - 6);
            (0..self.words.len()).map(|w| self.words[if value { w | stride } else { w & !stride }]).collect()
        };
        Self::from_words(self.vars, words)
    }

    pub fn depends_on(&self, i: usize) -> bool {
        self.cofactor(i, false) != self.cofactor(i, true)
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.vars).filter(|&i| self.depends_on(i)).collect()
    }

    pub fn bit(&self, pattern: usize) -> bool {
        (self.words[pattern / 64] >> (pattern % 64)) & 1 == 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cofactors_agree_with_pointwise_definition() {
        for vars in [3, 7, 8] {
            let words: Vec<u64> = (0..exhaustive_word_count(vars) as u64)
                .map(|i| 0x9e37_79b9_7f4a_7c15u64.wrapping_mul(i + 3))
                .collect();
            let f = TruthTable::from_words(vars, words);
            for i in 0..vars {
                for value in [false, true] {
                    let c = f.cofactor(i, value);
                    for p in 0..(1usize << vars) {
                        let q = if value { p | (1 << i) } else { p & !(1 << i) };
                        assert_eq!(c.bit(p), f.bit(q), "vars {vars} var {i} pattern {p}");
                    }
                }
            }
        }
    }

    #[test]
    fn variables_and_support() {
        let a = TruthTable::var(7, 1);
        let b = TruthTable::var(7, 6);
        assert_eq!(a.support(), vec![1]);
        assert_eq!(b.support(), vec![6]);
        assert_eq!(TruthTable::constant(7, true).const_value(), Some(true));
        assert_eq!(a.not().not(), a);
        assert!(a.bit(2) && !a.bit(1) && b.bit(64) && !b.bit(63));
    }
}
