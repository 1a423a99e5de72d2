//! Six-frequency index sets of the `E_3` drift, their Wick pairings, the bounding
//! sums used to control them, and exact and Monte Carlo evaluations of
//! `|| chi^{1/2} E*_{3,N} ||_{L^2(dmu)}`.
//!
//! A tuple `j = (j1, ..., j6)` carries the conjugation signature `(+,-,+,-,+,-)`:
//! it indexes `g_{j1} conj(g_{j2}) g_{j3} conj(g_{j4}) g_{j5} conj(g_{j6})`.
//! The index set is `I_N = { |j_i| <= N, L(j) = 0, |P(j)| > N }` with
//! `L = j1 - j2 + j3 - j4 + j5 - j6` and `P = j1 - j2 + j3`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::energies::e3_drift;
use crate::ensemble::ensemble_map;
use crate::error::{Error, Result};
use crate::measures::{bump_chi, sample_field, EnsembleSpec};
use crate::spectral_field::bracket;
use crate::stats::{rms_jackknife, Estimate};

/// Largest `N` accepted by exhaustive enumeration.
pub const ENUMERATION_CAP: usize = 64;
/// Largest `N` accepted by the exact Wick evaluation.
pub const WICK_CAP: usize = 3;

const SIGNATURE: [i64; 6] = [1, -1, 1, -1, 1, -1];

/// A six-frequency tuple with the fixed signature `(+,-,+,-,+,-)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IndexTuple {
    pub j: [i64; 6],
}

impl IndexTuple {
    pub fn new(j: [i64; 6]) -> Self {
        IndexTuple { j }
    }

    /// `j1 - j2 + j3 - j4 + j5 - j6`.
    pub fn l(&self) -> i64 {
        self.j.iter().zip(SIGNATURE).map(|(j, s)| j * s).sum()
    }

    /// `j1 - j2 + j3`.
    pub fn p(&self) -> i64 {
        self.j[0] - self.j[1] + self.j[2]
    }

    pub fn in_index_set(&self, n: usize) -> bool {
        let n = n as i64;
        self.j.iter().all(|j| j.abs() <= n) && self.l() == 0 && self.p().abs() > n
    }

    /// `a(j) = j3 / (<j1> ... <j6>)`.
    pub fn coefficient(&self) -> f64 {
        let mut v = self.j;
        v.sort_unstable();
        self.j[2] as f64 / v.iter().map(|&j| bracket(j as f64)).product::<f64>()
    }

    pub fn distinct(&self) -> usize {
        let mut v = self.j;
        v.sort_unstable();
        1 + v.windows(2).filter(|w| w[0] != w[1]).count()
    }

    /// `g_{j1} conj(g_{j2}) ... conj(g_{j6})` with `g` indexed by `j + n`.
    pub fn gaussian_product(&self, g: &[Complex64], n: usize) -> Complex64 {
        let at = |k: usize| g[(self.j[k] + n as i64) as usize];
        at(0) * at(1).conj() * at(2) * at(3).conj() * at(4) * at(5).conj()
    }
}

/// Pairing order and the canonical pairs (1-based positions, `+` position first).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairingClass {
    pub r: usize,
    pub pairs: Vec<(usize, usize)>,
}

/// Maximal pairing of equal frequencies across opposite signatures.
///
/// Each `+` position (1, 3, 5) in turn takes the smallest unused `-` position
/// (2, 4, 6) carrying the same frequency; this realises the maximum number of
/// pairs and is the lexicographically smallest such pair list.
pub fn classify_pairing(t: &IndexTuple) -> PairingClass {
    let mut used = [false; 3];
    let mut pairs = Vec::new();
    for plus in [0usize, 2, 4] {
        for (slot, minus) in [1usize, 3, 5].into_iter().enumerate() {
            if !used[slot] && t.j[plus] == t.j[minus] {
                used[slot] = true;
                pairs.push((plus + 1, minus + 1));
                break;
            }
        }
    }
    PairingClass {
        r: pairs.len(),
        pairs,
    }
}

/// `(k, l)` written with the `+` position first, validated.
fn oriented(k: usize, l: usize) -> Result<(usize, usize)> {
    let ok = |p: usize| (1..=6).contains(&p);
    if !ok(k) || !ok(l) || (k + l) % 2 == 0 {
        return Err(Error::InvalidArgument(format!(
            "positions ({k}, {l}) must be in 1..=6 with opposite signatures"
        )));
    }
    Ok(if k % 2 == 1 { (k, l) } else { (l, k) })
}

/// Which part of `I_N` to enumerate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Subset {
    All,
    /// 0-pairings.
    Zero,
    /// Every tuple with `j_k = j_l`, whatever its pairing order.
    Equal { k: usize, l: usize },
    /// 1-pairings whose single pair is `(k, l)`.
    Pairing { k: usize, l: usize },
    /// The part of `Pairing { k, l }` with exactly five distinct frequencies.
    Tilde { k: usize, l: usize },
    /// The rest of `Pairing { k, l }`.
    Hat { k: usize, l: usize },
    /// Pairing order at least 2.
    Higher,
}

impl Subset {
    fn constraint(&self) -> Result<Option<(usize, usize)>> {
        match *self {
            Subset::Equal { k, l }
            | Subset::Pairing { k, l }
            | Subset::Tilde { k, l }
            | Subset::Hat { k, l } => oriented(k, l).map(Some),
            _ => Ok(None),
        }
    }

    fn accepts(&self, t: &IndexTuple) -> bool {
        match *self {
            Subset::All | Subset::Equal { .. } => true,
            Subset::Zero => classify_pairing(t).r == 0,
            Subset::Higher => classify_pairing(t).r >= 2,
            Subset::Pairing { k, l } | Subset::Tilde { k, l } | Subset::Hat { k, l } => {
                let pair = oriented(k, l).expect("validated");
                let class = classify_pairing(t);
                let base = class.r == 1 && class.pairs[0] == pair;
                match self {
                    Subset::Tilde { .. } => base && t.distinct() == 5,
                    Subset::Hat { .. } => base && t.distinct() != 5,
                    _ => base,
                }
            }
        }
    }
}

/// Lazily enumerates the tuples of `subset` inside `I_N`.
///
/// One index is eliminated through `L = 0`; an equality constraint `j_k = j_l`
/// removes a second one, so constrained subsets cost `O(N^4)`.
pub fn enumerate_in(n: usize, subset: Subset) -> Result<impl Iterator<Item = IndexTuple>> {
    if n > ENUMERATION_CAP {
        return Err(Error::CapExceeded {
            requested: n,
            cap: ENUMERATION_CAP,
        });
    }
    let constraint = subset.constraint()?;
    let ni = n as i64;
    // positions (0-based) that are free, the copied one, and the solved one
    let (copy, solved) = match constraint {
        Some((k, l)) => {
            let (k, l) = (k - 1, l - 1);
            let solved = (0..6).rev().find(|&p| p != k && p != l).expect("four candidates");
            (Some((k, l)), solved)
        }
        None => (None, 5),
    };
    let free: Vec<usize> = (0..6)
        .filter(|&p| p != solved && copy.map_or(true, |(_, l)| p != l))
        .collect();
    let dims = free.len();
    let total = (2 * ni + 1).pow(dims as u32);
    let iter = (0..total).filter_map(move |mut code| {
        let mut j = [0i64; 6];
        for &p in &free {
            j[p] = code % (2 * ni + 1) - ni;
            code /= 2 * ni + 1;
        }
        if let Some((k, l)) = copy {
            j[l] = j[k];
        }
        let rest: i64 = (0..6).filter(|&p| p != solved).map(|p| SIGNATURE[p] * j[p]).sum();
        j[solved] = -SIGNATURE[solved] * rest;
        let t = IndexTuple { j };
        (j[solved].abs() <= ni && t.p().abs() > ni && subset.accepts(&t)).then_some(t)
    });
    Ok(iter)
}

/// `sum a(j) Im(g_j)` over a subset for one Gaussian draw.
pub fn im_sum(n: usize, subset: Subset, g: &[Complex64]) -> Result<f64> {
    Ok(enumerate_in(n, subset)?
        .map(|t| t.coefficient() * t.gaussian_product(g, n).im)
        .sum())
}

/// Bounding sums whose decay controls the drift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lemma {
    /// Five weights `<j>^{-2}`, at least one of the last three above `N/3`.
    L53,
    /// The two cases of the 1-pairing `(1,4)` bound.
    L55_14,
    /// The two cases of the 1-pairing `(2,5)` bound.
    L55_25,
    /// The 0-pairing bound: the `L53` region plus both of `j1, j2` high.
    L58,
    /// `sum_{|j| <= N} 1 / (<j> <N - j>)`.
    Llog,
}

impl Lemma {
    pub const ALL: [Lemma; 5] = [Lemma::L53, Lemma::L55_14, Lemma::L55_25, Lemma::L58, Lemma::Llog];

    pub fn name(&self) -> &'static str {
        match self {
            Lemma::L53 => "L53",
            Lemma::L55_14 => "L55_14",
            Lemma::L55_25 => "L55_25",
            Lemma::L58 => "L58",
            Lemma::Llog => "Llog",
        }
    }

    /// `N^{-1}` for the polynomial lemmas, `log N / N` for `Llog`.
    pub fn scale(&self, n: usize) -> f64 {
        let nf = n as f64;
        match self {
            Lemma::Llog => nf.ln() / nf,
            _ => 1.0 / nf,
        }
    }
}

/// `(S, S_low)` with `S = sum_{|j| <= N} <j>^{-2}` and `S_low` over `3|j| < N`.
pub fn weight_sums(n: usize) -> (f64, f64) {
    let ni = n as i64;
    let mut s = 0.0;
    let mut low = 0.0;
    for j in -ni..=ni {
        let w = 1.0 / (1.0 + (j * j) as f64);
        s += w;
        if 3 * j.abs() < ni {
            low += w;
        }
    }
    (s, low)
}

/// Exact value of a bounding sum, factorized over the product weights.
pub fn lemma_sum(lemma: Lemma, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("lemma sums need N >= 1".into()));
    }
    let (s, lo) = weight_sums(n);
    let hi = s - lo;
    Ok(match lemma {
        Lemma::L53 => s * s * (s.powi(3) - lo.powi(3)),
        Lemma::L58 => s * s * (s.powi(3) - lo.powi(3)) + hi * hi * lo.powi(3),
        Lemma::L55_14 | Lemma::L55_25 => s * (s * s * (s * s - lo * lo) + hi * hi * lo * lo),
        Lemma::Llog => {
            let ni = n as i64;
            (-ni..=ni)
                .map(|j| 1.0 / (bracket(j as f64) * bracket((ni - j) as f64)))
                .sum()
        }
    })
}

/// Partner of a tilde tuple under the conjugating involution, for the pairs
/// `(3,4)`: `(j1,j2,j,j,j5,j6) -> (j6,j5,j,j,j2,j1)` and
/// `(3,6)`: `(j1,j2,j,j4,j5,j) -> (j4,j5,j,j1,j2,j)`.
pub fn tilde_partner(t: &IndexTuple, pair: (usize, usize)) -> Result<IndexTuple> {
    let [j1, j2, j3, j4, j5, j6] = t.j;
    match oriented(pair.0, pair.1)? {
        (3, 4) => Ok(IndexTuple::new([j6, j5, j3, j4, j2, j1])),
        (3, 6) => Ok(IndexTuple::new([j4, j5, j3, j1, j2, j6])),
        other => Err(Error::InvalidArgument(format!("no tilde partner map for pair {other:?}"))),
    }
}

/// Result of [`tilde_cancellation`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cancellation {
    /// `|sum over tuples and partners of a(j) Im(g_j)|`.
    pub residual: f64,
    /// `sum |a(j) g_j|` over the same terms.
    pub scale: f64,
    pub tuples: usize,
}

/// Adds `a(j) Im(g_j)` over every tilde tuple of `pair` and its partner.
///
/// Each tuple appears once as itself and once as the partner of its partner, so
/// both are summed together and the total must vanish identically.
pub fn tilde_cancellation(n: usize, g: &[Complex64], pair: (usize, usize)) -> Result<Cancellation> {
    if n > 16 {
        return Err(Error::CapExceeded { requested: n, cap: 16 });
    }
    let (k, l) = oriented(pair.0, pair.1)?;
    let mut residual = 0.0;
    let mut scale = 0.0;
    let mut tuples = 0;
    for t in enumerate_in(n, Subset::Tilde { k, l })? {
        let partner = tilde_partner(&t, (k, l))?;
        let mine = t.coefficient() * t.gaussian_product(g, n);
        let theirs = partner.coefficient() * partner.gaussian_product(g, n);
        residual += mine.im + theirs.im;
        scale += mine.norm() + theirs.norm();
        tuples += 1;
    }
    Ok(Cancellation {
        residual: residual.abs(),
        scale,
        tuples,
    })
}

/// `|| chi_R(E_1(Pi_N u))^{1/2} E*_{3,N}(u) ||_{L^2(dmu)}` by Monte Carlo, with a
/// jackknife error. With `chi_on = false` the cutoff is dropped.
pub fn e3star_l2_mc(spec: &EnsembleSpec, chi_on: bool, workers: usize) -> Result<Estimate> {
    spec.validate()?;
    let out = ensemble_map(spec.count, workers, |i| {
        let u = sample_field(spec, i)?;
        let drift = e3_drift(&u, spec.n);
        Ok(if chi_on {
            drift * bump_chi(crate::energies::e1(&u), spec.r).sqrt()
        } else {
            drift
        })
    })?;
    if !out.failures.is_empty() {
        return Err(Error::InvalidArgument(format!("{} samples failed", out.failures.len())));
    }
    let values: Vec<f64> = out.results.into_iter().flatten().collect();
    Ok(rms_jackknife(&values))
}

/// How perfect matchings between the twelve factors are counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchingMethod {
    /// Depth-first matching of each unconjugated factor to an unused equal one.
    Recursive,
    /// All `6!` bijections, filtered for frequency consistency.
    Permutation,
}

fn count_recursive(unconj: &[i64; 6], conj: &[i64; 6]) -> u64 {
    fn rec(k: usize, unconj: &[i64; 6], conj: &[i64; 6], used: &mut [bool; 6]) -> u64 {
        if k == 6 {
            return 1;
        }
        let mut total = 0;
        for m in 0..6 {
            if !used[m] && conj[m] == unconj[k] {
                used[m] = true;
                total += rec(k + 1, unconj, conj, used);
                used[m] = false;
            }
        }
        total
    }
    rec(0, unconj, conj, &mut [false; 6])
}

fn all_permutations() -> Vec<[usize; 6]> {
    let mut out = Vec::with_capacity(720);
    let mut p = [0, 1, 2, 3, 4, 5];
    fn heap(k: usize, p: &mut [usize; 6], out: &mut Vec<[usize; 6]>) {
        if k == 1 {
            out.push(*p);
            return;
        }
        for i in 0..k {
            heap(k - 1, p, out);
            if k % 2 == 0 {
                p.swap(i, k - 1);
            } else {
                p.swap(0, k - 1);
            }
        }
    }
    heap(6, &mut p, &mut out);
    out
}

fn count_permutation(unconj: &[i64; 6], conj: &[i64; 6], perms: &[[usize; 6]]) -> u64 {
    perms
        .iter()
        .filter(|p| (0..6).all(|k| unconj[k] == conj[p[k]]))
        .count() as u64
}

/// Tuples grouped by their factor monomial: sorted unconjugated frequencies
/// `(j1, j3, j5)` and sorted conjugated ones `(j2, j4, j6)`, with summed `a(j)`.
fn monomials(n: usize) -> Result<BTreeMap<([i64; 3], [i64; 3]), f64>> {
    let mut groups: BTreeMap<([i64; 3], [i64; 3]), f64> = BTreeMap::new();
    for t in enumerate_in(n, Subset::All)? {
        let mut u = [t.j[0], t.j[2], t.j[4]];
        let mut c = [t.j[1], t.j[3], t.j[5]];
        u.sort_unstable();
        c.sort_unstable();
        *groups.entry((u, c)).or_insert(0.0) += t.coefficient();
    }
    Ok(groups)
}

/// Exact `|| E*_{3,N} ||_{L^2(dmu)}` (no cutoff) by the complex Wick expansion.
///
/// `E*_{3,N} = (6 / pi^2) Im S` with `S = sum_{I_N} a(j) g_j`; then
/// `E|Im S|^2 = (E|S|^2 - Re E[S^2]) / 2`, and each Gaussian moment is the number
/// of frequency-consistent perfect matchings between unconjugated and
/// conjugated factors.
pub fn e3star_l2_exact(n: usize, method: MatchingMethod) -> Result<f64> {
    if n > WICK_CAP {
        return Err(Error::CapExceeded {
            requested: n,
            cap: WICK_CAP,
        });
    }
    let groups: Vec<(([i64; 3], [i64; 3]), f64)> = monomials(n)?.into_iter().collect();
    if groups.is_empty() {
        return Ok(0.0);
    }
    // E[g_A conj(g_B)]: unconjugated factors U_A + C_B against C_A + U_B.
    // E[g_A g_B]:       unconjugated factors U_A + U_B against C_A + C_B.
    // Both vanish unless the net frequency content U - C of A matches (resp.
    // cancels) that of B, so groups are bucketed by that net content first.
    let net = |u: &[i64; 3], c: &[i64; 3]| -> Vec<(i64, i64)> {
        let mut m: BTreeMap<i64, i64> = BTreeMap::new();
        for &x in u {
            *m.entry(x).or_insert(0) += 1;
        }
        for &x in c {
            *m.entry(x).or_insert(0) -= 1;
        }
        m.into_iter().filter(|&(_, v)| v != 0).collect()
    };
    let mut buckets: BTreeMap<Vec<(i64, i64)>, Vec<usize>> = BTreeMap::new();
    for (idx, ((u, c), _)) in groups.iter().enumerate() {
        buckets.entry(net(u, c)).or_default().push(idx);
    }
    let perms = all_permutations();
    let count = |unconj: [i64; 6], conj: [i64; 6]| -> u64 {
        match method {
            MatchingMethod::Recursive => count_recursive(&unconj, &conj),
            MatchingMethod::Permutation => count_permutation(&unconj, &conj, &perms),
        }
    };
    let cat = |a: &[i64; 3], b: &[i64; 3]| [a[0], a[1], a[2], b[0], b[1], b[2]];
    let mut abs_s2 = 0.0;
    let mut s_sq = 0.0;
    for (key, members) in &buckets {
        for &a in members {
            let ((ua, ca), wa) = &groups[a];
            for &b in members {
                let ((ub, cb), wb) = &groups[b];
                let m = count(cat(ua, cb), cat(ca, ub));
                abs_s2 += wa * wb * m as f64;
            }
        }
        let negated: Vec<(i64, i64)> = key.iter().map(|&(f, v)| (f, -v)).collect();
        if let Some(partners) = buckets.get(&negated) {
            for &a in members {
                let ((ua, ca), wa) = &groups[a];
                for &b in partners {
                    let ((ub, cb), wb) = &groups[b];
                    let m = count(cat(ua, ub), cat(ca, cb));
                    s_sq += wa * wb * m as f64;
                }
            }
        }
    }
    let im_sq = 0.5 * (abs_s2 - s_sq);
    Ok(6.0 / (PI * PI) * im_sq.max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::gaussians;

    fn naive_index_set(n: usize) -> Vec<IndexTuple> {
        let ni = n as i64;
        let r = -ni..=ni;
        let mut out = Vec::new();
        for a in r.clone() {
            for b in r.clone() {
                for c in r.clone() {
                    for d in r.clone() {
                        for e in r.clone() {
                            for f in r.clone() {
                                let t = IndexTuple::new([a, b, c, d, e, f]);
                                if a - b + c - d + e - f == 0 && (a - b + c).abs() > ni {
                                    out.push(t);
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    #[test]
    fn pairing_examples() {
        assert_eq!(classify_pairing(&IndexTuple::new([0, 1, 2, 3, 4, 5])).r, 0);
        let c = classify_pairing(&IndexTuple::new([1, 1, 2, 2, 3, 3]));
        assert_eq!(c.r, 3);
        assert_eq!(c.pairs, vec![(1, 2), (3, 4), (5, 6)]);
        assert_eq!(classify_pairing(&IndexTuple::new([2, 9, 2, 5, 7, 5])).r, 0);
        let c = classify_pairing(&IndexTuple::new([4, 7, 4, 4, 1, 2]));
        assert_eq!(c.pairs, vec![(1, 4)]);
    }

    #[test]
    fn index_set_matches_naive_loop() {
        for n in 1..=3 {
            let mut fast: Vec<IndexTuple> = enumerate_in(n, Subset::All).unwrap().collect();
            fast.sort();
            let mut naive = naive_index_set(n);
            naive.sort();
            assert_eq!(fast, naive, "N = {n}");
            assert!(!fast.is_empty());
        }
    }

    #[test]
    fn constrained_enumeration_matches_filter() {
        let n = 3;
        let all: Vec<IndexTuple> = enumerate_in(n, Subset::All).unwrap().collect();
        for (k, l) in [(1, 2), (1, 4), (3, 4), (3, 6), (5, 6), (2, 5), (4, 5)] {
            let mut fast: Vec<IndexTuple> = enumerate_in(n, Subset::Equal { k, l }).unwrap().collect();
            fast.sort();
            let mut slow: Vec<IndexTuple> = all.iter().filter(|t| t.j[k - 1] == t.j[l - 1]).cloned().collect();
            slow.sort();
            assert_eq!(fast, slow, "({k},{l})");
        }
    }

    #[test]
    fn partition_counts_reconcile() {
        for n in 1..=4 {
            let all = enumerate_in(n, Subset::All).unwrap().count();
            let zero = enumerate_in(n, Subset::Zero).unwrap().count();
            let higher = enumerate_in(n, Subset::Higher).unwrap().count();
            let mut ones = 0;
            for k in [1, 3, 5] {
                for l in [2, 4, 6] {
                    let p = enumerate_in(n, Subset::Pairing { k, l }).unwrap().count();
                    let tilde = enumerate_in(n, Subset::Tilde { k, l }).unwrap().count();
                    let hat = enumerate_in(n, Subset::Hat { k, l }).unwrap().count();
                    assert_eq!(p, tilde + hat);
                    ones += p;
                }
            }
            assert_eq!(all, zero + ones + higher, "N = {n}");
        }
    }

    #[test]
    fn same_triplet_subsets_are_empty() {
        for n in [1, 2, 5, 8] {
            for (k, l) in [(5, 6), (4, 5), (2, 3), (1, 2)] {
                assert_eq!(enumerate_in(n, Subset::Equal { k, l }).unwrap().count(), 0);
            }
        }
    }

    #[test]
    fn tilde_tuples_have_five_distinct_values_and_partners() {
        let n = 4;
        for (k, l) in [(3, 4), (3, 6)] {
            let tuples: Vec<IndexTuple> = enumerate_in(n, Subset::Tilde { k, l }).unwrap().collect();
            assert!(!tuples.is_empty());
            for t in &tuples {
                assert_eq!(t.distinct(), 5);
                let p = tilde_partner(t, (k, l)).unwrap();
                assert_ne!(p, *t);
                assert!(p.in_index_set(n));
                assert!(tuples.contains(&p));
                assert_eq!(tilde_partner(&p, (k, l)).unwrap(), *t);
                assert_eq!(p.coefficient(), t.coefficient());
            }
        }
    }

    #[test]
    fn tilde_cancellation_and_controls() {
        let n = 4;
        let g = gaussians(7, 0, n);
        for pair in [(3, 4), (3, 6)] {
            let c = tilde_cancellation(n, &g, pair).unwrap();
            assert!(c.residual < 1e-12 * c.scale, "{c:?}");
        }
        let real: Vec<Complex64> = g.iter().map(|z| Complex64::new(z.re, 0.0)).collect();
        assert_eq!(tilde_cancellation(n, &real, (3, 4)).unwrap().residual, 0.0);
        let one = enumerate_in(n, Subset::Tilde { k: 3, l: 4 }).unwrap().next().unwrap();
        assert!((one.coefficient() * one.gaussian_product(&g, n).im).abs() > 0.0);
    }

    fn brute_weights(n: usize) -> Vec<(i64, f64, bool)> {
        let ni = n as i64;
        (-ni..=ni)
            .map(|j| (j, 1.0 / (1.0 + (j * j) as f64), 3 * j.abs() >= ni))
            .collect()
    }

    #[test]
    fn lemma_sums_match_brute_force() {
        for n in [3, 5, 7] {
            let w = brute_weights(n);
            let (mut l53, mut l58, mut l55) = (0.0, 0.0, 0.0);
            for a in &w {
                for b in &w {
                    for c in &w {
                        for d in &w {
                            for e in &w {
                                let prod = a.1 * b.1 * c.1 * d.1 * e.1;
                                let tail3 = c.2 || d.2 || e.2;
                                if tail3 {
                                    l53 += prod;
                                }
                                if tail3 || (a.2 && b.2) {
                                    l58 += prod;
                                }
                                // a free; (d, e) not both low, or (b, c) both high with (d, e) low
                                if d.2 || e.2 || (b.2 && c.2) {
                                    l55 += prod;
                                }
                            }
                        }
                    }
                }
            }
            let rel = |x: f64, y: f64| (x - y).abs() / y;
            assert!(rel(lemma_sum(Lemma::L53, n).unwrap(), l53) < 1e-10);
            assert!(rel(lemma_sum(Lemma::L58, n).unwrap(), l58) < 1e-10);
            assert!(rel(lemma_sum(Lemma::L55_14, n).unwrap(), l55) < 1e-10);
            assert_eq!(lemma_sum(Lemma::L55_14, n).unwrap(), lemma_sum(Lemma::L55_25, n).unwrap());
        }
    }

    #[test]
    fn lemma_sums_decay() {
        for lemma in Lemma::ALL {
            let mut prev = f64::INFINITY;
            for n in [16, 32, 64, 128, 256, 512] {
                let v = lemma_sum(lemma, n).unwrap();
                assert!(v >= 0.0 && v < prev, "{lemma:?} N={n}");
                prev = v;
            }
        }
        let ratio = lemma_sum(Lemma::L53, 64).unwrap() / lemma_sum(Lemma::L53, 32).unwrap();
        assert!(ratio <= 0.75);
    }

    #[test]
    fn wick_methods_agree_bitwise() {
        for n in 1..=2 {
            let a = e3star_l2_exact(n, MatchingMethod::Recursive).unwrap();
            let b = e3star_l2_exact(n, MatchingMethod::Permutation).unwrap();
            assert_eq!(a.to_bits(), b.to_bits());
            assert!(a > 0.0);
        }
        assert!(e3star_l2_exact(4, MatchingMethod::Recursive).is_err());
    }

    #[test]
    fn matching_counts() {
        let perms = all_permutations();
        assert_eq!(perms.len(), 720);
        let u = [1, 1, 2, 3, 3, 3];
        let c = [3, 1, 3, 2, 1, 3];
        assert_eq!(count_recursive(&u, &c), 12);
        assert_eq!(count_permutation(&u, &c, &perms), 12);
        assert_eq!(count_recursive(&u, &[1, 1, 2, 3, 3, 4]), 0);
    }

    #[test]
    fn wick_value_matches_monte_carlo() {
        let exact = e3star_l2_exact(1, MatchingMethod::Recursive).unwrap();
        let spec = EnsembleSpec {
            n: 1,
            master_seed: 11,
            count: 20_000,
            sign: crate::Sign::Defocusing,
            r: 1.0,
        };
        let mc = e3star_l2_mc(&spec, false, 1).unwrap();
        assert!(mc.consistent_with(exact, 4.0), "{mc:?} vs {exact}");
    }

    #[test]
    fn drift_equals_im_sum_formula() {
        let n = 3;
        let g = gaussians(5, 2, n);
        let u = crate::measures::field_from_gaussians(n, &g);
        let s = im_sum(n, Subset::All, &g).unwrap();
        let direct = e3_drift(&u, n);
        assert!((direct - 6.0 / (PI * PI) * s).abs() < 1e-10 * (1.0 + direct.abs()), "{direct} {s}");
    }
}
