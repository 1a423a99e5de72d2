use serde::{Deserialize, Serialize};

/// Frequency-space region of a cubic interaction `(n1, n2, n3)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    A,
    B,
    C,
    D,
    Resonant,
}

/// A cubic interaction with output frequency `n = n1 + n2 + n3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyTriple {
    pub n1: i64,
    pub n2: i64,
    pub n3: i64,
    pub phase: i64,
    pub region: Region,
}

impl FrequencyTriple {
    pub fn new(n1: i64, n2: i64, n3: i64) -> Self {
        FrequencyTriple {
            n1,
            n2,
            n3,
            phase: resonance(n1, n2, n3),
            region: classify_region(n1, n2, n3),
        }
    }

    pub fn output(&self) -> i64 {
        self.n1 + self.n2 + self.n3
    }
}

/// `3 (n1 + n2)(n1 + n3)(n2 + n3)`, which equals `n^3 - n1^3 - n2^3 - n3^3`.
///
/// Panics on overflow.
pub fn resonance(n1: i64, n2: i64, n3: i64) -> i64 {
    let a = n1.checked_add(n2).expect("resonance overflow");
    let b = n1.checked_add(n3).expect("resonance overflow");
    let c = n2.checked_add(n3).expect("resonance overflow");
    3i64.checked_mul(a)
        .and_then(|x| x.checked_mul(b))
        .and_then(|x| x.checked_mul(c))
        .expect("resonance overflow")
}

/// The unfactored form `n^3 - n1^3 - n2^3 - n3^3`, in 128-bit arithmetic.
pub fn resonance_cubic(n1: i64, n2: i64, n3: i64) -> i128 {
    let cube = |x: i128| x * x * x;
    let n = n1 as i128 + n2 as i128 + n3 as i128;
    cube(n) - cube(n1 as i128) - cube(n2 as i128) - cube(n3 as i128)
}

// |a| << |b|
fn much_less(a: i64, b: i64) -> bool {
    4 * a.abs() <= b.abs()
}

// |a| <~ |b|
fn less_sim(a: i64, b: i64) -> bool {
    a.abs() <= 4 * b.abs()
}

/// Region label with `<<` read as a factor 4 and `<~` as at most 4 times;
/// overlaps resolve in the order D, A, C, B. Every non-resonant triple that is
/// not D, A or C is labelled B.
pub fn classify_region(n1: i64, n2: i64, n3: i64) -> Region {
    if resonance(n1, n2, n3) == 0 {
        return Region::Resonant;
    }
    let n = n1 + n2 + n3;
    if less_sim(n1, n3) {
        Region::D
    } else if much_less(n2, n1) {
        Region::A
    } else if less_sim(n, n3) && much_less(n3, n1) {
        Region::C
    } else {
        Region::B
    }
}
