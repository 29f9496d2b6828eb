//! Degree-truncated coefficient ring of the universal formal group law.
//!
//! Generators `a_ij` (with `a_ij = a_ji` identified, so symbols are kept with
//! `i <= j`) have degree `i + j - 1`. The generic series
//! `F(u,v) = u + v + sum a_ij u^i v^j` is substituted into itself and the
//! homogeneous components of `F(F(u,v),w) - F(u,F(v,w))` become relation
//! rows; unit and commutativity components vanish identically under the
//! symbol identification but are computed and asserted anyway. Each degree of
//! the quotient is handled by the presented-group kernel, which yields normal
//! forms and rank reports.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::groups::{GroupElement, PresentedGroup};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LazardError {
    #[error("element of degree {0} exceeds truncation degree {1}")]
    DegreeOverflow(usize, usize),
    #[error("nilpotency bound missing for formal group law application")]
    NilpotencyBoundMissing,
}

/// Generator symbol `a_ij` with `i <= j`; degree is `i + j - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct LazGen {
    pub i: u32,
    pub j: u32,
}

impl LazGen {
    pub fn new(i: u32, j: u32) -> Self {
        LazGen {
            i: i.min(j),
            j: i.max(j),
        }
    }

    pub fn degree(&self) -> usize {
        (self.i + self.j - 1) as usize
    }

    pub fn label(&self) -> String {
        format!("a{}{}", self.i, self.j)
    }
}

/// Multiplicative monomial in the generators, kept sorted by symbol.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Monomial(Vec<(LazGen, u32)>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn generator(g: LazGen) -> Self {
        Monomial(vec![(g, 1)])
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.0.iter().map(|(g, e)| g.degree() * *e as usize).sum()
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let mut map: BTreeMap<LazGen, u32> = self.0.iter().cloned().collect();
        for (g, e) in &other.0 {
            *map.entry(*g).or_insert(0) += e;
        }
        Monomial(map.into_iter().collect())
    }

    pub fn label(&self) -> String {
        if self.0.is_empty() {
            return "1".into();
        }
        self.0
            .iter()
            .map(|(g, e)| {
                if *e == 1 {
                    g.label()
                } else {
                    format!("{}^{}", g.label(), e)
                }
            })
            .collect::<Vec<_>>()
            .join("*")
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| self.0.cmp(&other.0))
    }
}

/// Sparse integer polynomial in the generators.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RingElem {
    terms: BTreeMap<Monomial, BigInt>,
}

impl RingElem {
    pub fn zero() -> Self {
        RingElem::default()
    }

    pub fn one() -> Self {
        Self::constant(BigInt::one())
    }

    pub fn constant(c: BigInt) -> Self {
        let mut e = RingElem::zero();
        e.add_term(Monomial::one(), c);
        e
    }

    pub fn generator(g: LazGen) -> Self {
        let mut e = RingElem::zero();
        e.add_term(Monomial::generator(g), BigInt::one());
        e
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &BigInt)> {
        self.terms.iter()
    }

    pub fn add_term(&mut self, m: Monomial, c: BigInt) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
        }
    }

    pub fn add(&self, other: &RingElem) -> RingElem {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn neg(&self) -> RingElem {
        RingElem {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        }
    }

    pub fn sub(&self, other: &RingElem) -> RingElem {
        self.add(&other.neg())
    }

    /// Product, dropping terms above the given truncation degree.
    pub fn mul_truncated(&self, other: &RingElem, max_degree: usize) -> RingElem {
        let mut out = RingElem::zero();
        for (m1, c1) in &self.terms {
            let d1 = m1.degree();
            if d1 > max_degree {
                continue;
            }
            for (m2, c2) in &other.terms {
                if d1 + m2.degree() > max_degree {
                    continue;
                }
                out.add_term(m1.mul(m2), c1 * c2);
            }
        }
        out
    }

    pub fn max_degree(&self) -> usize {
        self.terms.keys().map(|m| m.degree()).max().unwrap_or(0)
    }

    /// Split into homogeneous components, keyed by degree.
    pub fn homogeneous_parts(&self) -> BTreeMap<usize, RingElem> {
        let mut out: BTreeMap<usize, RingElem> = BTreeMap::new();
        for (m, c) in &self.terms {
            out.entry(m.degree())
                .or_insert_with(RingElem::zero)
                .add_term(m.clone(), c.clone());
        }
        out
    }
}

/// Polynomial in two or three formal variables with `RingElem` coefficients,
/// truncated by total formal degree. Keys are exponent vectors.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
struct Series<const N: usize> {
    coeffs: BTreeMap<[u32; N], RingElem>,
}

impl<const N: usize> Series<N> {
    fn zero() -> Self {
        Series {
            coeffs: BTreeMap::new(),
        }
    }

    fn add_term(&mut self, exps: [u32; N], c: RingElem) {
        if c.is_zero() {
            return;
        }
        let entry = self.coeffs.entry(exps).or_insert_with(RingElem::zero);
        *entry = entry.add(&c);
        if entry.is_zero() {
            self.coeffs.remove(&exps);
        }
    }

    fn variable(idx: usize) -> Self {
        let mut exps = [0u32; N];
        exps[idx] = 1;
        let mut s = Self::zero();
        s.add_term(exps, RingElem::one());
        s
    }

    fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (e, c) in &other.coeffs {
            out.add_term(*e, c.clone());
        }
        out
    }

    fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (e, c) in &other.coeffs {
            out.add_term(*e, c.neg());
        }
        out
    }

    fn mul(&self, other: &Self, max_total: u32, ring_cap: usize) -> Self {
        let mut out = Self::zero();
        for (e1, c1) in &self.coeffs {
            let t1: u32 = e1.iter().sum();
            for (e2, c2) in &other.coeffs {
                let t2: u32 = e2.iter().sum();
                if t1 + t2 > max_total {
                    continue;
                }
                let mut e = [0u32; N];
                for k in 0..N {
                    e[k] = e1[k] + e2[k];
                }
                out.add_term(e, c1.mul_truncated(c2, ring_cap));
            }
        }
        out
    }

    fn pow(&self, n: u32, max_total: u32, ring_cap: usize) -> Self {
        let mut out = {
            let mut s = Self::zero();
            s.add_term([0u32; N], RingElem::one());
            s
        };
        for _ in 0..n {
            out = out.mul(self, max_total, ring_cap);
        }
        out
    }

    fn scale(&self, c: &RingElem, ring_cap: usize) -> Self {
        let mut out = Self::zero();
        for (e, v) in &self.coeffs {
            out.add_term(*e, v.mul_truncated(c, ring_cap));
        }
        out
    }
}

/// Substitute the generic series coefficientwise: result is
/// `first + second + sum a_ij first^i second^j`, truncated.
fn generic_series_apply<const N: usize>(
    gens: &[LazGen],
    first: &Series<N>,
    second: &Series<N>,
    max_total: u32,
    ring_cap: usize,
) -> Series<N> {
    let mut out = first.add(second);
    for (i, j) in symbol_pairs(gens) {
        let coeff = RingElem::generator(LazGen::new(i, j));
        let fi = first.pow(i, max_total, ring_cap);
        let sj = second.pow(j, max_total, ring_cap);
        let term = fi.mul(&sj, max_total, ring_cap).scale(&coeff, ring_cap);
        out = out.add(&term);
    }
    out
}

/// All ordered pairs `(i, j)` with `i, j >= 1` whose symbol fits the
/// truncation, i.e. both `(i,j)` and `(j,i)` for off-diagonal symbols.
fn symbol_pairs(gens: &[LazGen]) -> Vec<(u32, u32)> {
    let mut pairs = Vec::new();
    for g in gens {
        pairs.push((g.i, g.j));
        if g.i != g.j {
            pairs.push((g.j, g.i));
        }
    }
    pairs.sort_unstable();
    pairs
}

/// Coefficients of the universal formal group law, truncated to total degree
/// `trunc + 1` in the two formal variables. Coefficient of `u^1 v^0` and
/// `u^0 v^1` is 1; coefficient of `u^i v^j` is the class of `a_ij`.
#[derive(Debug, Clone)]
pub struct FglSeries {
    pub trunc: usize,
    pub coeffs: BTreeMap<(u32, u32), RingElem>,
}

impl FglSeries {
    /// Coefficient lookup; absent keys are zero.
    pub fn coeff(&self, i: u32, j: u32) -> RingElem {
        self.coeffs.get(&(i, j)).cloned().unwrap_or_default()
    }
}

#[derive(Debug)]
pub struct TruncatedLazardRing {
    trunc: usize,
    gens: Vec<LazGen>,
    /// Monomial basis per degree 0..=trunc.
    basis: Vec<Vec<Monomial>>,
    /// One graded presented group covering all degrees; generator index in
    /// degree `d` equals position in `basis[d]`.
    groups: PresentedGroup,
    /// Homogeneous associativity components (ring relations), by degree.
    assoc_components: BTreeMap<usize, Vec<RingElem>>,
}

impl TruncatedLazardRing {
    pub fn build(trunc: usize) -> Self {
        let mut gens = Vec::new();
        for i in 1..=(trunc as u32 + 1) {
            for j in i..=(trunc as u32 + 1) {
                let g = LazGen::new(i, j);
                if g.degree() <= trunc && g.degree() >= 1 {
                    gens.push(g);
                }
            }
        }
        gens.sort_by_key(|g| (g.degree(), g.i, g.j));

        let basis: Vec<Vec<Monomial>> =
            (0..=trunc).map(|d| monomials_of_degree(&gens, d)).collect();

        let assoc_components = associativity_components(&gens, trunc);

        // Per degree: relation rows are monomial multiples of associativity
        // components, expressed over the degree's monomial basis.
        let mut parts: BTreeMap<i64, (Vec<String>, Vec<Vec<BigInt>>)> = BTreeMap::new();
        for d in 0..=trunc {
            let labels: Vec<String> = basis[d].iter().map(|m| m.label()).collect();
            let index: BTreeMap<&Monomial, usize> =
                basis[d].iter().enumerate().map(|(k, m)| (m, k)).collect();
            let mut rows = Vec::new();
            for (e, comps) in &assoc_components {
                if *e > d {
                    continue;
                }
                for comp in comps {
                    for mult in &basis[d - e] {
                        let prod = comp.mul_truncated(
                            &RingElem {
                                terms: BTreeMap::from([(mult.clone(), BigInt::one())]),
                            },
                            trunc,
                        );
                        let mut row = vec![BigInt::zero(); labels.len()];
                        for (m, c) in prod.terms() {
                            row[index[m]] = c.clone();
                        }
                        rows.push(row);
                    }
                }
            }
            parts.insert(d as i64, (labels, rows));
        }

        TruncatedLazardRing {
            trunc,
            gens,
            basis,
            groups: PresentedGroup::new(parts),
            assoc_components,
        }
    }

    pub fn truncation(&self) -> usize {
        self.trunc
    }

    pub fn generators(&self) -> &[LazGen] {
        &self.gens
    }

    pub fn basis(&self, degree: usize) -> &[Monomial] {
        &self.basis[degree]
    }

    pub fn assoc_components(&self) -> &BTreeMap<usize, Vec<RingElem>> {
        &self.assoc_components
    }

    /// Relation rows of one degree as ring elements (monomial multiples of
    /// associativity components). Used when tensoring groups with the ring.
    pub fn relation_rows(&self, degree: usize) -> Vec<RingElem> {
        let mut rows = Vec::new();
        for (e, comps) in &self.assoc_components {
            if *e > degree {
                continue;
            }
            for comp in comps {
                for mult in &self.basis[degree - e] {
                    rows.push(comp.mul_truncated(
                        &RingElem {
                            terms: BTreeMap::from([(mult.clone(), BigInt::one())]),
                        },
                        self.trunc,
                    ));
                }
            }
        }
        rows
    }

    /// Free rank and torsion of each degree 0..=trunc.
    pub fn degree_invariants(&self) -> Vec<(usize, Vec<BigInt>)> {
        (0..=self.trunc)
            .map(|d| self.groups.invariants(d as i64).expect("degree present"))
            .collect()
    }

    /// Canonical form: each homogeneous component reduced in its degree.
    pub fn normal_form(&self, p: &RingElem) -> Result<RingElem, LazardError> {
        let mut out = RingElem::zero();
        for (d, part) in p.homogeneous_parts() {
            if d > self.trunc {
                return Err(LazardError::DegreeOverflow(d, self.trunc));
            }
            let index: BTreeMap<&Monomial, usize> = self.basis[d]
                .iter()
                .enumerate()
                .map(|(k, m)| (m, k))
                .collect();
            let elem = GroupElement::from_coeffs(
                d as i64,
                part.terms().map(|(m, c)| (index[m], c.clone())),
            );
            let nf = self.groups.normal_form(&elem).expect("grade present");
            for (i, c) in &nf.coeffs {
                out.add_term(self.basis[d][*i].clone(), c.clone());
            }
        }
        Ok(out)
    }

    /// The universal formal group law over this ring.
    pub fn universal_fgl(&self) -> FglSeries {
        let mut coeffs = BTreeMap::new();
        coeffs.insert((1, 0), RingElem::one());
        coeffs.insert((0, 1), RingElem::one());
        for (i, j) in symbol_pairs(&self.gens) {
            if (i + j) as usize <= self.trunc + 1 {
                coeffs.insert((i, j), RingElem::generator(LazGen::new(i, j)));
            }
        }
        FglSeries {
            trunc: self.trunc,
            coeffs,
        }
    }

    /// The three formal group law identities, computed over the quotient:
    /// every returned component must reduce to zero in normal form.
    pub fn fgl_identity_components(&self) -> Vec<RingElem> {
        let cap = self.trunc;
        let max_total = self.trunc as u32 + 1;
        let u = Series::<3>::variable(0);
        let v = Series::<3>::variable(1);
        let w = Series::<3>::variable(2);
        let zero = Series::<3>::zero();
        let mut out = Vec::new();

        // unit: F(u, 0) - u
        let unit = generic_series_apply(&self.gens, &u, &zero, max_total, cap).sub(&u);
        out.extend(unit.coeffs.into_values());
        // commutativity: F(u, v) - F(v, u)
        let comm = generic_series_apply(&self.gens, &u, &v, max_total, cap)
            .sub(&generic_series_apply(&self.gens, &v, &u, max_total, cap));
        out.extend(comm.coeffs.into_values());
        // associativity: F(F(u, v), w) - F(u, F(v, w))
        let fuv = generic_series_apply(&self.gens, &u, &v, max_total, cap);
        let fvw = generic_series_apply(&self.gens, &v, &w, max_total, cap);
        let lhs = generic_series_apply(&self.gens, &fuv, &w, max_total, cap);
        let rhs = generic_series_apply(&self.gens, &u, &fvw, max_total, cap);
        out.extend(lhs.sub(&rhs).coeffs.into_values());
        out
    }
}

fn monomials_of_degree(gens: &[LazGen], d: usize) -> Vec<Monomial> {
    fn rec(
        gens: &[LazGen],
        d: usize,
        start: usize,
        current: &mut Vec<(LazGen, u32)>,
        out: &mut Vec<Monomial>,
    ) {
        if d == 0 {
            out.push(Monomial(current.clone()));
            return;
        }
        for k in start..gens.len() {
            let gd = gens[k].degree();
            if gd > d {
                continue;
            }
            let mut e = 1;
            while e * gd <= d {
                current.push((gens[k], e as u32));
                rec(gens, d - e * gd, k + 1, current, out);
                current.pop();
                e += 1;
            }
        }
    }
    let mut out = Vec::new();
    let mut current = Vec::new();
    rec(gens, d, 0, &mut current, &mut out);
    out.sort();
    out
}

/// Homogeneous components of `F(F(u,v),w) - F(u,F(v,w))` keyed by ring
/// degree, with identically-zero components dropped.
fn associativity_components(gens: &[LazGen], trunc: usize) -> BTreeMap<usize, Vec<RingElem>> {
    let max_total = trunc as u32 + 1;
    let u = Series::<3>::variable(0);
    let v = Series::<3>::variable(1);
    let w = Series::<3>::variable(2);
    let fuv = generic_series_apply(gens, &u, &v, max_total, trunc);
    let fvw = generic_series_apply(gens, &v, &w, max_total, trunc);
    let lhs = generic_series_apply(gens, &fuv, &w, max_total, trunc);
    let rhs = generic_series_apply(gens, &u, &fvw, max_total, trunc);
    let diff = lhs.sub(&rhs);
    let mut out: BTreeMap<usize, Vec<RingElem>> = BTreeMap::new();
    for (exps, comp) in diff.coeffs {
        if comp.is_zero() {
            continue;
        }
        let total: u32 = exps.iter().sum();
        let degree = total as usize - 1;
        debug_assert!(comp.homogeneous_parts().len() == 1);
        if degree <= trunc {
            out.entry(degree).or_default().push(comp);
        }
    }
    out
}

/// Apply the series `F(phi1, phi2)` to `x`: the sum over coefficients of
/// `c_ij * phi1^i phi2^j (x)`, finite because both operators are nilpotent on
/// `x` within the supplied bound.
pub fn fgl_apply<M, F1, F2>(
    series: &FglSeries,
    phi1: F1,
    phi2: F2,
    x: &M,
    bound: Option<u32>,
) -> Result<M, LazardError>
where
    M: FglModule,
    F1: Fn(&M) -> M,
    F2: Fn(&M) -> M,
{
    let bound = bound.ok_or(LazardError::NilpotencyBoundMissing)?;
    // powers of phi1 applied to x, up to the bound
    let mut p1_powers = vec![x.clone()];
    for k in 1..=bound {
        let next = phi1(&p1_powers[(k - 1) as usize]);
        p1_powers.push(next);
    }
    let mut acc: Option<M> = None;
    for ((i, j), c) in &series.coeffs {
        if *i > bound || *j > bound {
            continue;
        }
        let mut term = p1_powers[*i as usize].clone();
        for _ in 0..*j {
            term = phi2(&term);
        }
        if term.is_zero() {
            continue;
        }
        let scaled = term.scale(c);
        acc = Some(match acc {
            Some(a) => a.add(&scaled),
            None => scaled,
        });
    }
    Ok(acc.unwrap_or_else(|| {
        let mut z = x.clone();
        z.clear();
        z
    }))
}

/// Minimal module interface needed by [`fgl_apply`].
pub trait FglModule: Clone {
    fn add(&self, other: &Self) -> Self;
    fn scale(&self, c: &RingElem) -> Self;
    fn is_zero(&self) -> bool;
    /// Reset to the zero element (keeping any ambient bookkeeping).
    fn clear(&mut self);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degree_zero_ring() {
        let r = TruncatedLazardRing::build(0);
        assert!(r.generators().is_empty());
        assert_eq!(r.degree_invariants(), vec![(1, vec![])]);
    }

    #[test]
    fn degree_one_free_on_a11() {
        let r = TruncatedLazardRing::build(1);
        assert_eq!(r.generators(), &[LazGen::new(1, 1)]);
        assert_eq!(r.degree_invariants()[1], (1, vec![]));
    }

    #[test]
    fn ranks_match_partition_numbers() {
        let r = TruncatedLazardRing::build(4);
        let inv = r.degree_invariants();
        let ranks: Vec<usize> = inv.iter().map(|(r, _)| *r).collect();
        assert_eq!(ranks, vec![1, 1, 2, 3, 5]);
        for (_, torsion) in inv {
            assert!(torsion.is_empty(), "unexpected torsion");
        }
    }

    #[test]
    fn commutativity_is_symbol_identification() {
        let r = TruncatedLazardRing::build(3);
        let a21 = RingElem::generator(LazGen::new(2, 1));
        let a12 = RingElem::generator(LazGen::new(1, 2));
        assert_eq!(r.normal_form(&a21).unwrap(), r.normal_form(&a12).unwrap());
        assert!(r.normal_form(&RingElem::zero()).unwrap().is_zero());
    }

    #[test]
    fn first_relation_in_degree_three() {
        // 2*a11*a12 + 3*a13 - 2*a22 reduces to zero in the quotient
        let r = TruncatedLazardRing::build(3);
        let mut rel = RingElem::zero();
        rel.add_term(
            Monomial::generator(LazGen::new(1, 1)).mul(&Monomial::generator(LazGen::new(1, 2))),
            BigInt::from(2),
        );
        rel.add_term(Monomial::generator(LazGen::new(1, 3)), BigInt::from(3));
        rel.add_term(Monomial::generator(LazGen::new(2, 2)), BigInt::from(-2));
        assert!(r.normal_form(&rel).unwrap().is_zero());
        // but a13 alone does not vanish
        let a13 = RingElem::generator(LazGen::new(1, 3));
        assert!(!r.normal_form(&a13).unwrap().is_zero());
    }

    #[test]
    fn degree_overflow_rejected() {
        let r = TruncatedLazardRing::build(2);
        let a13 = RingElem::generator(LazGen::new(1, 3));
        assert_eq!(r.normal_form(&a13), Err(LazardError::DegreeOverflow(3, 2)));
    }

    #[test]
    fn universal_fgl_small_truncations() {
        // mod total degree 2: F = u + v
        let r = TruncatedLazardRing::build(0);
        let f = r.universal_fgl();
        assert_eq!(f.coeff(1, 0), RingElem::one());
        assert_eq!(f.coeff(0, 1), RingElem::one());
        assert!(f.coeffs.keys().all(|&(i, j)| i + j <= 1));
        // mod total degree 3: F = u + v + a11 uv
        let r = TruncatedLazardRing::build(1);
        let f = r.universal_fgl();
        assert_eq!(f.coeff(1, 1), RingElem::generator(LazGen::new(1, 1)));
        assert!(f.coeffs.keys().all(|&(i, j)| i + j <= 2));
    }

    #[test]
    fn fgl_identities_reduce_to_zero() {
        for n in 0..=5 {
            let r = TruncatedLazardRing::build(n);
            for comp in r.fgl_identity_components() {
                let nf = r.normal_form(&comp).expect("within truncation");
                assert!(
                    nf.is_zero(),
                    "nonzero identity component at N={n}: {comp:?}"
                );
            }
        }
    }

    impl FglModule for RingElem {
        fn add(&self, other: &Self) -> Self {
            RingElem::add(self, other)
        }
        fn scale(&self, c: &RingElem) -> Self {
            self.mul_truncated(c, usize::MAX)
        }
        fn is_zero(&self) -> bool {
            RingElem::is_zero(self)
        }
        fn clear(&mut self) {
            self.terms.clear();
        }
    }

    #[test]
    fn fgl_apply_zero_operators() {
        let r = TruncatedLazardRing::build(3);
        let f = r.universal_fgl();
        let x = RingElem::one();
        let out = fgl_apply(&f, |_| RingElem::zero(), |_| RingElem::zero(), &x, Some(2)).unwrap();
        assert!(out.is_zero(), "series has no constant term");
    }

    #[test]
    fn fgl_apply_unit_axiom() {
        // with phi2 = 0 the application is phi1 itself
        let r = TruncatedLazardRing::build(3);
        let f = r.universal_fgl();
        let a11 = RingElem::generator(LazGen::new(1, 1));
        let phi1 = |e: &RingElem| e.mul_truncated(&a11, 10);
        let x = RingElem::one();
        let out = fgl_apply(&f, phi1, |_| RingElem::zero(), &x, Some(5)).unwrap();
        assert_eq!(out, a11);
    }

    #[test]
    fn fgl_apply_bilinear_and_symmetric() {
        let r = TruncatedLazardRing::build(3);
        let f = r.universal_fgl();
        let a11 = RingElem::generator(LazGen::new(1, 1));
        let a12 = RingElem::generator(LazGen::new(1, 2));
        let phi = |e: &RingElem| e.mul_truncated(&a11, 10);
        let psi = |e: &RingElem| e.mul_truncated(&a12, 10);
        let x = RingElem::one();
        // swapping the two commuting operators gives the same value
        let fwd = fgl_apply(&f, phi, psi, &x, Some(4)).unwrap();
        let swp = fgl_apply(&f, psi, phi, &x, Some(4)).unwrap();
        assert_eq!(
            r.normal_form(&RingElem::sub(&fwd, &swp)).unwrap(),
            RingElem::zero()
        );
        // linear in the argument
        let two_x = x.add(&x);
        let doubled = fgl_apply(&f, phi, psi, &two_x, Some(4)).unwrap();
        assert_eq!(doubled, fwd.add(&fwd));
    }

    #[test]
    fn fgl_apply_missing_bound() {
        let r = TruncatedLazardRing::build(1);
        let f = r.universal_fgl();
        let res = fgl_apply(
            &f,
            |e: &RingElem| e.clone(),
            |e| e.clone(),
            &RingElem::one(),
            None,
        );
        assert_eq!(res.unwrap_err(), LazardError::NilpotencyBoundMissing);
    }

    /// Independent elimination oracle: re-derives the per-degree ranks with
    /// a separate dense expansion over `i64` and plain integer row reduction.
    mod elimination_oracle {
        use std::collections::BTreeMap;

        type Poly = BTreeMap<Vec<u32>, i64>; // exponents over sorted symbol list
        type Tri = BTreeMap<(u32, u32, u32), Poly>;

        fn syms(n: usize) -> Vec<(u32, u32)> {
            let mut v = Vec::new();
            for i in 1..=(n as u32 + 1) {
                for j in i..=(n as u32 + 1) {
                    if (i + j - 1) as usize <= n {
                        v.push((i, j));
                    }
                }
            }
            v.sort_by_key(|&(i, j)| (i + j - 1, i, j));
            v
        }

        fn deg(sym: &[(u32, u32)], e: &[u32]) -> usize {
            e.iter()
                .zip(sym)
                .map(|(k, (i, j))| *k as usize * (i + j - 1) as usize)
                .sum()
        }

        fn pmul(sym: &[(u32, u32)], a: &Poly, b: &Poly, cap: usize) -> Poly {
            let mut out = Poly::new();
            for (ea, ca) in a {
                for (eb, cb) in b {
                    let e: Vec<u32> = ea.iter().zip(eb).map(|(x, y)| x + y).collect();
                    if deg(sym, &e) > cap {
                        continue;
                    }
                    *out.entry(e).or_insert(0) += ca * cb;
                }
            }
            out.retain(|_, c| *c != 0);
            out
        }

        fn tmul(sym: &[(u32, u32)], a: &Tri, b: &Tri, maxt: u32, cap: usize) -> Tri {
            let mut out = Tri::new();
            for ((p1, q1, r1), c1) in a {
                for ((p2, q2, r2), c2) in b {
                    let (p, q, r) = (p1 + p2, q1 + q2, r1 + r2);
                    if p + q + r > maxt {
                        continue;
                    }
                    let prod = pmul(sym, c1, c2, cap);
                    if prod.is_empty() {
                        continue;
                    }
                    let ent = out.entry((p, q, r)).or_default();
                    for (e, c) in prod {
                        *ent.entry(e).or_insert(0) += c;
                    }
                    ent.retain(|_, c| *c != 0);
                }
            }
            out.retain(|_, p| !p.is_empty());
            out
        }

        fn apply(sym: &[(u32, u32)], a: &Tri, b: &Tri, maxt: u32, cap: usize) -> Tri {
            // a + b + sum a_ij a^i b^j
            let mut out = Tri::new();
            let mut acc = |src: &Tri| {
                for (k, p) in src {
                    let ent: &mut Poly = out.entry(*k).or_default();
                    for (e, c) in p {
                        *ent.entry(e.clone()).or_insert(0) += c;
                    }
                }
            };
            acc(a);
            acc(b);
            let mut pairs = Vec::new();
            for &(i, j) in sym {
                pairs.push((i, j));
                if i != j {
                    pairs.push((j, i));
                }
            }
            for (i, j) in pairs {
                let mut one = Tri::new();
                let sidx = sym.iter().position(|&s| s == (i.min(j), i.max(j))).unwrap();
                let mut e = vec![0u32; sym.len()];
                e[sidx] = 1;
                one.insert((0, 0, 0), Poly::from([(e, 1i64)]));
                let mut term = one;
                for _ in 0..i {
                    term = tmul(sym, &term, a, maxt, cap);
                }
                for _ in 0..j {
                    term = tmul(sym, &term, b, maxt, cap);
                }
                acc(&term);
            }
            for p in out.values_mut() {
                p.retain(|_, c| *c != 0);
            }
            out.retain(|_, p| !p.is_empty());
            out
        }

        fn var(sym: &[(u32, u32)], idx: usize) -> Tri {
            let key = match idx {
                0 => (1, 0, 0),
                1 => (0, 1, 0),
                _ => (0, 0, 1),
            };
            Tri::from([(key, Poly::from([(vec![0u32; sym.len()], 1i64)]))])
        }

        fn monoms(sym: &[(u32, u32)], d: usize) -> Vec<Vec<u32>> {
            fn rec(
                sym: &[(u32, u32)],
                d: usize,
                k: usize,
                cur: &mut Vec<u32>,
                out: &mut Vec<Vec<u32>>,
            ) {
                if k == sym.len() {
                    if d == 0 {
                        out.push(cur.clone());
                    }
                    return;
                }
                let gd = (sym[k].0 + sym[k].1 - 1) as usize;
                let mut e = 0;
                while e * gd <= d {
                    cur.push(e as u32);
                    rec(sym, d - e * gd, k + 1, cur, out);
                    cur.pop();
                    e += 1;
                }
            }
            let mut out = Vec::new();
            rec(sym, d, 0, &mut Vec::new(), &mut out);
            out.sort();
            out
        }

        /// Echelonize by integer row operations; returns the rank and the
        /// pivot columns together with the reduced rows.
        fn echelon(rows: Vec<Vec<i64>>, ncols: usize) -> (usize, Vec<usize>, Vec<Vec<i128>>) {
            let mut m: Vec<Vec<i128>> = rows
                .into_iter()
                .map(|r| r.into_iter().map(|x| x as i128).collect())
                .collect();
            let mut rank = 0;
            let mut pivot_cols = Vec::new();
            for col in 0..ncols {
                loop {
                    let mut best: Option<usize> = None;
                    for (i, r) in m.iter().enumerate().skip(rank) {
                        if r[col] != 0 {
                            best = match best {
                                Some(b) if m[b][col].abs() <= r[col].abs() => Some(b),
                                _ => Some(i),
                            };
                        }
                    }
                    let Some(p) = best else { break };
                    m.swap(rank, p);
                    let mut done = true;
                    let pivot_row = m[rank].clone();
                    for r in m.iter_mut().skip(rank + 1) {
                        if r[col] != 0 {
                            let q = r[col] / pivot_row[col];
                            for (a, b) in r.iter_mut().zip(&pivot_row) {
                                *a -= q * b;
                            }
                            if r[col] != 0 {
                                done = false;
                            }
                        }
                    }
                    if done {
                        break;
                    }
                }
                if rank < m.len() && m[rank][col] != 0 {
                    pivot_cols.push(col);
                    rank += 1;
                }
            }
            (rank, pivot_cols, m)
        }

        /// Determinant of the pivot minor, exactly, by cofactor-free
        /// triangular product: after echelonization the first `rank` rows
        /// restricted to the pivot columns are upper triangular.
        fn pivot_minor_det(
            m: &[Vec<i128>],
            rank: usize,
            pivot_cols: &[usize],
        ) -> num_bigint::BigInt {
            let mut det = num_bigint::BigInt::from(1);
            for i in 0..rank {
                det *= num_bigint::BigInt::from(m[i][pivot_cols[i]]);
            }
            det
        }

        /// Rank of the matrix over the prime field F_p.
        fn rank_mod_p(rows: &[Vec<i64>], ncols: usize, p: i64) -> usize {
            let mut m: Vec<Vec<i64>> = rows
                .iter()
                .map(|r| r.iter().map(|x| x.rem_euclid(p)).collect())
                .collect();
            let mut rank = 0;
            for col in 0..ncols {
                let Some(pi) = (rank..m.len()).find(|&i| m[i][col] % p != 0) else {
                    continue;
                };
                m.swap(rank, pi);
                let inv = mod_inverse(m[rank][col], p);
                for i in rank + 1..m.len() {
                    if m[i][col] % p != 0 {
                        let factor = (m[i][col] * inv).rem_euclid(p);
                        for j in col..ncols {
                            m[i][j] = (m[i][j] - factor * m[rank][j]).rem_euclid(p);
                        }
                    }
                }
                rank += 1;
            }
            rank
        }

        fn mod_inverse(a: i64, p: i64) -> i64 {
            let (mut t, mut new_t) = (0i64, 1i64);
            let (mut r, mut new_r) = (p, a.rem_euclid(p));
            while new_r != 0 {
                let q = r / new_r;
                (t, new_t) = (new_t, t - q * new_t);
                (r, new_r) = (new_r, r - q * new_r);
            }
            assert_eq!(r, 1, "not invertible");
            t.rem_euclid(p)
        }

        /// The quotient Z^n / rowspan is torsion free iff rank over F_p
        /// equals rank over Q for every prime p; torsion primes must divide
        /// the determinant of any full-rank pivot minor, so that finite set
        /// of primes is a complete certificate.
        fn torsion_free(
            rows: &[Vec<i64>],
            ncols: usize,
            rank: usize,
            minor: &num_bigint::BigInt,
        ) -> bool {
            use num_traits::{Signed, ToPrimitive, Zero};
            let mut n = minor.abs();
            if n.is_zero() {
                return rank == 0;
            }
            let mut primes = Vec::new();
            let mut p = num_bigint::BigInt::from(2);
            while &p * &p <= n {
                if (&n % &p).is_zero() {
                    primes.push(p.to_i64().unwrap());
                    while (&n % &p).is_zero() {
                        n = &n / &p;
                    }
                }
                p += 1;
            }
            if n > num_bigint::BigInt::from(1) {
                primes.push(n.to_i64().expect("desk-scale prime"));
            }
            primes
                .into_iter()
                .all(|p| rank_mod_p(rows, ncols, p) == rank)
        }

        #[test]
        fn ranks_by_independent_elimination() {
            for n in 0..=5usize {
                let sym = syms(n);
                let maxt = n as u32 + 1;
                let u = var(&sym, 0);
                let v = var(&sym, 1);
                let w = var(&sym, 2);
                let fuv = apply(&sym, &u, &v, maxt, n);
                let fvw = apply(&sym, &v, &w, maxt, n);
                let lhs = apply(&sym, &fuv, &w, maxt, n);
                let rhs = apply(&sym, &u, &fvw, maxt, n);
                // difference components by ring degree
                let mut comps: BTreeMap<usize, Vec<Poly>> = BTreeMap::new();
                let mut diff = lhs;
                for (k, p) in rhs {
                    let ent: &mut Poly = diff.entry(k).or_default();
                    for (e, c) in p {
                        *ent.entry(e).or_insert(0) -= c;
                    }
                }
                for ((p, q, r), poly) in diff {
                    let mut poly = poly;
                    poly.retain(|_, c| *c != 0);
                    if poly.is_empty() {
                        continue;
                    }
                    let d = (p + q + r) as usize - 1;
                    if d <= n {
                        comps.entry(d).or_default().push(poly);
                    }
                }
                let partition = [1usize, 1, 2, 3, 5, 7];
                for d in 0..=n {
                    let basis = monoms(&sym, d);
                    let index: BTreeMap<&Vec<u32>, usize> =
                        basis.iter().enumerate().map(|(i, b)| (b, i)).collect();
                    let mut rows = Vec::new();
                    for (e, polys) in &comps {
                        if *e > d {
                            continue;
                        }
                        for poly in polys {
                            for mult in monoms(&sym, d - e) {
                                let mut row = vec![0i64; basis.len()];
                                for (mon, c) in poly {
                                    let prod: Vec<u32> =
                                        mon.iter().zip(&mult).map(|(a, b)| a + b).collect();
                                    row[index[&prod]] += *c;
                                }
                                rows.push(row);
                            }
                        }
                    }
                    let (rank, pivot_cols, reduced) = echelon(rows.clone(), basis.len());
                    assert_eq!(
                        basis.len() - rank,
                        partition[d],
                        "free rank mismatch at N={n}, degree {d}"
                    );
                    let minor = pivot_minor_det(&reduced, rank, &pivot_cols);
                    assert!(
                        torsion_free(&rows, basis.len(), rank, &minor),
                        "torsion found at N={n}, degree {d}"
                    );
                }
            }
        }
    }
}
