//! Theories over a site: per-arrow groups, the three bivariant operations,
//! Chern operators, covariant/contravariant extraction and the exhaustive
//! axiom suite.
//!
//! Elements are sparse integer combinations of tensor keys (a coefficient
//! monomial from the truncated universal-law ring paired with a cycle
//! class). Raw kinds compare elements literally; quotient kinds compare
//! through the arrow's presented group, built from the enumerated generators
//! extended by whatever classes the relations and the query touch.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, Mutex};

use num_bigint::BigInt;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::cycles::{
    canonicalize, enum_m, enum_mprime, enum_ob, BivariantCycle, CycleClass, CycleError, CycleKind,
    GradeWindow,
};
use crate::groups::{GroupElement, PresentedGroup};
use crate::lazard::{Monomial, RingElem, TruncatedLazardRing};
use crate::site::{ConfinedSquare, FiniteSite, MorId, SiteError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum TheoryKind {
    M,
    MPrime,
    Ob,
    Ob1,
    Ob2,
    Ob3,
    Ob4,
}

impl TheoryKind {
    pub fn parse(s: &str) -> Option<TheoryKind> {
        Some(match s {
            "M" => TheoryKind::M,
            "Mprime" => TheoryKind::MPrime,
            "OB" => TheoryKind::Ob,
            "OB1" => TheoryKind::Ob1,
            "OB2" => TheoryKind::Ob2,
            "OB3" => TheoryKind::Ob3,
            "OB4" => TheoryKind::Ob4,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            TheoryKind::M => "M",
            TheoryKind::MPrime => "Mprime",
            TheoryKind::Ob => "OB",
            TheoryKind::Ob1 => "OB1",
            TheoryKind::Ob2 => "OB2",
            TheoryKind::Ob3 => "OB3",
            TheoryKind::Ob4 => "OB4",
        }
    }

    /// Underlying cycle flavour of elements.
    pub fn cycle_kind(&self) -> CycleKind {
        match self {
            TheoryKind::M | TheoryKind::Ob3 => CycleKind::M,
            TheoryKind::MPrime | TheoryKind::Ob2 | TheoryKind::Ob4 => CycleKind::MPrime,
            TheoryKind::Ob | TheoryKind::Ob1 => CycleKind::Ob,
        }
    }

    /// Carries coefficients from the truncated universal-law ring.
    pub fn tensored(&self) -> bool {
        matches!(self, TheoryKind::Ob1)
    }

    /// Has Chern class operators.
    pub fn oriented(&self) -> bool {
        matches!(self, TheoryKind::Ob | TheoryKind::Ob1)
    }

    /// Element equality passes through a quotient presentation.
    pub fn quotiented(&self) -> bool {
        matches!(self, TheoryKind::Ob1 | TheoryKind::Ob3)
    }

    /// Groups and extraction only; the three operations are not defined.
    pub fn groups_only(&self) -> bool {
        matches!(self, TheoryKind::Ob2 | TheoryKind::Ob4)
    }
}

#[derive(Debug, Error)]
pub enum TheoryError {
    #[error("{0}")]
    Site(#[from] SiteError),
    #[error("{0}")]
    Cycle(String),
    #[error("arrows are not composable: {0}")]
    NotComposable(String),
    #[error("map {0} is not confined for this theory")]
    NotConfined(MorId),
    #[error("element belongs to arrow {got}, expected {want}")]
    ArrowMismatch { got: MorId, want: MorId },
    #[error("theory does not support this operation: {0}")]
    Unsupported(&'static str),
    #[error("object {0} is not smooth")]
    NonSmooth(String),
    #[error("site fails validation: {0}")]
    InvalidSite(String),
    #[error("{0}")]
    Group(String),
    #[error("{0}")]
    Lazard(String),
}

impl From<CycleError> for TheoryError {
    fn from(e: CycleError) -> Self {
        match e {
            CycleError::Site(s) => TheoryError::Cycle(s),
            other => TheoryError::Cycle(other.to_string()),
        }
    }
}

impl From<crate::groups::GroupError> for TheoryError {
    fn from(e: crate::groups::GroupError) -> Self {
        TheoryError::Group(e.to_string())
    }
}

/// Generator key: a ring monomial tensored with a cycle class. For theories
/// without ring coefficients the monomial is always 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorKey {
    pub monomial: Monomial,
    pub class: CycleClass,
}

impl TensorKey {
    pub fn plain(class: CycleClass) -> Self {
        TensorKey {
            monomial: Monomial::one(),
            class,
        }
    }

    pub fn grade(&self) -> i64 {
        self.monomial.degree() as i64 + self.class.grade
    }

    pub fn label(&self) -> String {
        if self.monomial.is_one() {
            self.class.label()
        } else {
            format!("{}*{}", self.monomial.label(), self.class.label())
        }
    }
}

impl PartialOrd for TensorKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for TensorKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.grade()
            .cmp(&other.grade())
            .then_with(|| self.monomial.cmp(&other.monomial))
            .then_with(|| self.class.cmp(&other.class))
    }
}

/// Sparse element of a per-arrow group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Element {
    pub arrow: MorId,
    pub terms: BTreeMap<TensorKey, BigInt>,
}

impl Element {
    pub fn zero(arrow: &str) -> Self {
        Element {
            arrow: arrow.to_string(),
            terms: BTreeMap::new(),
        }
    }

    pub fn from_class(arrow: &str, class: CycleClass) -> Self {
        let mut e = Element::zero(arrow);
        e.add_term(TensorKey::plain(class), BigInt::one());
        e
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, key: TensorKey, coeff: BigInt) {
        if coeff.is_zero() {
            return;
        }
        match self.terms.entry(key) {
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += coeff;
                if o.get().is_zero() {
                    o.remove();
                }
            }
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(coeff);
            }
        }
    }

    pub fn add(&self, other: &Element) -> Element {
        debug_assert_eq!(self.arrow, other.arrow);
        let mut out = self.clone();
        for (k, c) in &other.terms {
            out.add_term(k.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Element) -> Element {
        debug_assert_eq!(self.arrow, other.arrow);
        let mut out = self.clone();
        for (k, c) in &other.terms {
            out.add_term(k.clone(), -c);
        }
        out
    }

    pub fn neg(&self) -> Element {
        Element {
            arrow: self.arrow.clone(),
            terms: self.terms.iter().map(|(k, c)| (k.clone(), -c)).collect(),
        }
    }

    pub fn scale(&self, k: &BigInt) -> Element {
        if k.is_zero() {
            return Element::zero(&self.arrow);
        }
        Element {
            arrow: self.arrow.clone(),
            terms: self
                .terms
                .iter()
                .map(|(key, c)| (key.clone(), c * k))
                .collect(),
        }
    }

    /// Multiply by a ring element, dropping monomials past the truncation.
    pub fn scale_ring(&self, r: &RingElem, trunc: usize) -> Element {
        let mut out = Element::zero(&self.arrow);
        for (key, c) in &self.terms {
            for (m, rc) in r.terms() {
                let prod = key.monomial.mul(m);
                if prod.degree() > trunc {
                    continue;
                }
                out.add_term(
                    TensorKey {
                        monomial: prod,
                        class: key.class.clone(),
                    },
                    c * rc,
                );
            }
        }
        out
    }

    pub fn grades(&self) -> BTreeSet<i64> {
        self.terms.keys().map(|k| k.grade()).collect()
    }

    pub fn classes(&self) -> BTreeSet<CycleClass> {
        self.terms.keys().map(|k| k.class.clone()).collect()
    }

    pub fn describe(&self) -> String {
        if self.is_zero() {
            return "0".into();
        }
        self.terms
            .iter()
            .map(|(k, c)| format!("{}·{}", c, k.label()))
            .collect::<Vec<_>>()
            .join(" + ")
    }
}

/// Relation row imposed on an arrow's group, with where it came from.
#[derive(Debug, Clone)]
pub struct Relation {
    pub element: Element,
    pub family: &'static str,
    pub provenance: String,
}

/// Generator of a dual-image theory: the canonical target arrow paired with
/// the normal-form label of the image of the dual cycle there.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct DualGenerator {
    pub grade: i64,
    pub target_arrow: MorId,
    pub image: String,
}

impl DualGenerator {
    pub fn label(&self) -> String {
        format!("[{} => {}]", self.target_arrow, self.image)
    }
}

pub struct Theory {
    pub kind: TheoryKind,
    pub site: Arc<FiniteSite>,
    /// Truncation degree of the coefficient ring (tensored kinds).
    pub trunc: usize,
    /// Bundle bound: elements never carry more bundle entries than this.
    pub bound: usize,
    pub window: GradeWindow,
    pub lazard: Option<Arc<TruncatedLazardRing>>,
    /// Relation rows per arrow (quotient kinds; empty for raw kinds).
    pub relations: BTreeMap<MorId, Vec<Relation>>,
    /// Inner quotient theory for the dual-image kinds.
    pub inner: Option<Arc<Theory>>,
    presentations: Mutex<BTreeMap<MorId, Arc<Presentation>>>,
}

impl std::fmt::Debug for Theory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Theory")
            .field("kind", &self.kind)
            .field("trunc", &self.trunc)
            .field("bound", &self.bound)
            .finish()
    }
}

impl Theory {
    pub fn m(site: Arc<FiniteSite>) -> Theory {
        Theory::raw(TheoryKind::M, site, 0, 0, GradeWindow::full())
    }

    pub fn mprime(site: Arc<FiniteSite>) -> Theory {
        Theory::raw(TheoryKind::MPrime, site, 0, 0, GradeWindow::full())
    }

    pub fn ob(site: Arc<FiniteSite>, bound: usize, window: GradeWindow) -> Theory {
        Theory::raw(TheoryKind::Ob, site, 0, bound, window)
    }

    pub fn raw(
        kind: TheoryKind,
        site: Arc<FiniteSite>,
        trunc: usize,
        bound: usize,
        window: GradeWindow,
    ) -> Theory {
        Theory {
            kind,
            site,
            trunc,
            bound,
            window,
            lazard: None,
            relations: BTreeMap::new(),
            inner: None,
            presentations: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn with_relations(
        kind: TheoryKind,
        site: Arc<FiniteSite>,
        trunc: usize,
        bound: usize,
        window: GradeWindow,
        lazard: Option<Arc<TruncatedLazardRing>>,
        relations: BTreeMap<MorId, Vec<Relation>>,
    ) -> Theory {
        Theory {
            kind,
            site,
            trunc,
            bound,
            window,
            lazard,
            relations,
            inner: None,
            presentations: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn dual_image(kind: TheoryKind, inner: Arc<Theory>) -> Theory {
        Theory {
            kind,
            site: inner.site.clone(),
            trunc: inner.trunc,
            bound: inner.bound,
            window: inner.window,
            lazard: inner.lazard.clone(),
            relations: BTreeMap::new(),
            inner: Some(inner),
            presentations: Mutex::new(BTreeMap::new()),
        }
    }

    // -------------------------------------------------------------------
    // Generators
    // -------------------------------------------------------------------

    /// Enumerated generator classes of the arrow's group.
    pub fn generator_classes(&self, arrow: &str) -> Result<Vec<CycleClass>, TheoryError> {
        Ok(match self.kind.cycle_kind() {
            CycleKind::M => enum_m(&self.site, arrow)?,
            CycleKind::MPrime => enum_mprime(&self.site, arrow)?,
            CycleKind::Ob => enum_ob(&self.site, arrow, self.bound, self.window)?,
        })
    }

    /// Generators as elements (coefficient 1, trivial monomial).
    pub fn generators(&self, arrow: &str) -> Result<Vec<Element>, TheoryError> {
        Ok(self
            .generator_classes(arrow)?
            .into_iter()
            .map(|c| Element::from_class(arrow, c))
            .collect())
    }

    /// Dual-image generators (the groups-only kinds). Requires a smooth
    /// source object on the queried arrow.
    pub fn dual_generators(&self, arrow: &str) -> Result<Vec<DualGenerator>, TheoryError> {
        let inner = self
            .inner
            .as_ref()
            .ok_or(TheoryError::Unsupported(
                "dual generators need an image theory",
            ))?
            .clone();
        let f = self.site.morphism(arrow)?;
        let src = self.site.object(&f.src)?;
        if !src.smooth {
            return Err(TheoryError::NonSmooth(src.id.clone()));
        }
        let mut out = BTreeSet::new();
        for class in enum_mprime(&self.site, arrow)? {
            out.insert(self.dual_image_of(&inner, &class)?);
        }
        Ok(out.into_iter().collect())
    }

    /// Key of the image of a dual cycle class: canonicalize the target arrow
    /// over declared isomorphisms on both sides, then reduce the identity
    /// cycle over it in the inner theory when admissible.
    fn dual_image_of(
        &self,
        inner: &Theory,
        class: &CycleClass,
    ) -> Result<DualGenerator, TheoryError> {
        let target = self.canonical_arrow(&class.carrier)?;
        let h = self.site.morphism(&target)?;
        let idy = self.site.identity_of(&h.src).clone();
        let cyc = BivariantCycle::new(inner.kind.cycle_kind(), &target, &idy, Vec::new());
        let image = match canonicalize(&self.site, &cyc) {
            Ok(cc) => {
                let elem = Element::from_class(&target, cc);
                let nf = inner.normal_form(&elem)?;
                nf.describe()
            }
            Err(CycleError::Inadmissible(_)) => format!("raw:[{}]", idy),
            Err(e) => return Err(e.into()),
        };
        Ok(DualGenerator {
            grade: class.grade,
            target_arrow: target,
            image,
        })
    }

    /// Least arrow in the orbit of `h` under pre- and post-composition with
    /// declared isomorphisms.
    fn canonical_arrow(&self, h: &str) -> Result<MorId, TheoryError> {
        let mut seen = BTreeSet::new();
        let mut queue = vec![h.to_string()];
        seen.insert(h.to_string());
        while let Some(cur) = queue.pop() {
            let m = self.site.morphism(&cur)?;
            for iso in self.site.isos_from(&m.dst) {
                let next = self.site.compose(&iso.id, &cur)?.clone();
                if seen.insert(next.clone()) {
                    queue.push(next);
                }
            }
            for iso in self.site.morphisms.values() {
                if iso.dst != m.src {
                    continue;
                }
                if iso.inverse.is_none() && !self.site.is_identity(&iso.id) {
                    continue;
                }
                let next = self.site.compose(&cur, &iso.id)?.clone();
                if seen.insert(next.clone()) {
                    queue.push(next);
                }
            }
        }
        Ok(seen.into_iter().next().expect("orbit nonempty"))
    }

    /// All arrows of the site, in id order.
    pub fn arrows(&self) -> Vec<MorId> {
        self.site.morphisms.keys().cloned().collect()
    }

    // -------------------------------------------------------------------
    // The three operations and the Chern operator
    // -------------------------------------------------------------------

    fn check_ops_supported(&self) -> Result<(), TheoryError> {
        if self.kind.groups_only() {
            Err(TheoryError::Unsupported(
                "this theory exposes groups and extraction only",
            ))
        } else {
            Ok(())
        }
    }

    pub fn confined(&self, f: &str) -> Result<bool, TheoryError> {
        Ok(match self.kind.cycle_kind() {
            CycleKind::M | CycleKind::Ob => self.site.morphism(f)?.proper,
            CycleKind::MPrime => self.site.mprime_confined(f)?,
        })
    }

    /// Bilinear product `T(X -f-> Y) x T(Y -g-> Z) -> T(X -gf-> Z)`.
    pub fn product(&self, a: &Element, b: &Element) -> Result<Element, TheoryError> {
        self.check_ops_supported()?;
        let fa = self.site.morphism(&a.arrow)?.clone();
        let fb = self.site.morphism(&b.arrow)?.clone();
        if fa.dst != fb.src {
            return Err(TheoryError::NotComposable(format!(
                "{} then {}",
                a.arrow, b.arrow
            )));
        }
        let target = self.site.compose(&b.arrow, &a.arrow)?.clone();
        let mut out = Element::zero(&target);
        for (ka, ca) in &a.terms {
            for (kb, cb) in &b.terms {
                let monomial = ka.monomial.mul(&kb.monomial);
                if self.kind.tensored() && monomial.degree() > self.trunc {
                    continue;
                }
                if let Some(class) =
                    self.class_product(&ka.class, &a.arrow, &kb.class, &b.arrow, &target)?
                {
                    out.add_term(TensorKey { monomial, class }, ca * cb);
                }
            }
        }
        Ok(out)
    }

    fn class_product(
        &self,
        a: &CycleClass,
        f: &str,
        b: &CycleClass,
        g: &str,
        target: &str,
    ) -> Result<Option<CycleClass>, TheoryError> {
        match self.kind.cycle_kind() {
            CycleKind::M | CycleKind::Ob => {
                // complete the two fiber squares and reassemble over the
                // composite arrow
                let sq1 = self.site.fiber_square(f, &b.carrier)?;
                let sq2 = self.site.fiber_square(&a.carrier, &sq1.p1)?;
                let carrier = self.site.compose(&a.carrier, &sq2.p1)?.clone();
                let mut bundles = Vec::new();
                for l in &a.bundles {
                    bundles.push(self.site.pullback_bundle(&sq2.p1, l)?);
                }
                let to_right = self.site.compose(&sq1.p2, &sq2.p2)?.clone();
                for m in &b.bundles {
                    bundles.push(self.site.pullback_bundle(&to_right, m)?);
                }
                if bundles.len() > self.bound {
                    return Ok(None);
                }
                let cyc = BivariantCycle::new(self.kind.cycle_kind(), target, &carrier, bundles);
                Ok(Some(canonicalize(&self.site, &cyc)?))
            }
            CycleKind::MPrime => {
                let sq1 = self.site.pushout_square(&a.carrier, g)?;
                let sq2 = self.site.pushout_square(&sq1.g_side, &b.carrier)?;
                let carrier = self.site.compose(&sq2.h_side, &sq1.g_side)?.clone();
                let cyc = BivariantCycle::new(CycleKind::MPrime, target, &carrier, Vec::new());
                Ok(Some(canonicalize(&self.site, &cyc)?))
            }
        }
    }

    /// Pushforward along a confined `step: X -> Y`, reindexing elements of
    /// `T(X -> Z)` to `T(Y -> Z)` where the ambient arrow is `target∘step`.
    pub fn pushforward(
        &self,
        step: &str,
        target: &str,
        a: &Element,
    ) -> Result<Element, TheoryError> {
        self.check_ops_supported()?;
        let composite = self.site.compose(target, step)?.clone();
        if composite != a.arrow {
            return Err(TheoryError::ArrowMismatch {
                got: a.arrow.clone(),
                want: composite,
            });
        }
        if !self.confined(step)? {
            return Err(TheoryError::NotConfined(step.to_string()));
        }
        let mut out = Element::zero(target);
        for (k, c) in &a.terms {
            let class = match self.kind.cycle_kind() {
                CycleKind::M | CycleKind::Ob => {
                    let carrier = self.site.compose(step, &k.class.carrier)?.clone();
                    let cyc = BivariantCycle::new(
                        self.kind.cycle_kind(),
                        target,
                        &carrier,
                        k.class.bundles.clone(),
                    );
                    canonicalize(&self.site, &cyc)?
                }
                CycleKind::MPrime => {
                    let cyc = BivariantCycle::new(
                        CycleKind::MPrime,
                        target,
                        &k.class.carrier,
                        Vec::new(),
                    );
                    canonicalize(&self.site, &cyc)?
                }
            };
            out.add_term(
                TensorKey {
                    monomial: k.monomial.clone(),
                    class,
                },
                c.clone(),
            );
        }
        Ok(out)
    }

    /// Pullback along a confined square: elements over the right leg map to
    /// elements over the left leg.
    pub fn pullback(&self, sq: &ConfinedSquare, a: &Element) -> Result<Element, TheoryError> {
        self.check_ops_supported()?;
        if a.arrow != sq.right {
            return Err(TheoryError::ArrowMismatch {
                got: a.arrow.clone(),
                want: sq.right.clone(),
            });
        }
        let mut out = Element::zero(&sq.left);
        for (k, c) in &a.terms {
            let class = match self.kind.cycle_kind() {
                CycleKind::M | CycleKind::Ob => {
                    let top_sq = self.site.fiber_square(&sq.top, &k.class.carrier)?;
                    let mut bundles = Vec::new();
                    for l in &k.class.bundles {
                        bundles.push(self.site.pullback_bundle(&top_sq.p2, l)?);
                    }
                    if bundles.len() > self.bound {
                        continue;
                    }
                    let cyc =
                        BivariantCycle::new(self.kind.cycle_kind(), &sq.left, &top_sq.p1, bundles);
                    canonicalize(&self.site, &cyc)?
                }
                CycleKind::MPrime => {
                    let carrier = self.site.compose(&k.class.carrier, &sq.bottom)?.clone();
                    let cyc =
                        BivariantCycle::new(CycleKind::MPrime, &sq.left, &carrier, Vec::new());
                    canonicalize(&self.site, &cyc)?
                }
            };
            out.add_term(
                TensorKey {
                    monomial: k.monomial.clone(),
                    class,
                },
                c.clone(),
            );
        }
        Ok(out)
    }

    /// First Chern class operator for a bundle over the source of the
    /// ambient arrow; lowers the grade by one. Classes whose bundle count
    /// would exceed the bound are dropped (the truncated fragment).
    pub fn chern(&self, bundle: &[i64], a: &Element) -> Result<Element, TheoryError> {
        self.check_ops_supported()?;
        if !self.kind.oriented() {
            return Err(TheoryError::Unsupported("theory is not oriented"));
        }
        let f = self.site.morphism(&a.arrow)?;
        let want = self.site.picard_rank(&f.src);
        if bundle.len() != want {
            return Err(TheoryError::Site(SiteError::RankMismatch {
                object: f.src.clone(),
                got: bundle.len(),
                want,
            }));
        }
        let mut out = Element::zero(&a.arrow);
        for (k, c) in &a.terms {
            let pulled = self.site.pullback_bundle(&k.class.carrier, bundle)?;
            let mut bundles = k.class.bundles.clone();
            bundles.push(pulled);
            if bundles.len() > self.bound {
                continue;
            }
            let cyc =
                BivariantCycle::new(self.kind.cycle_kind(), &a.arrow, &k.class.carrier, bundles);
            out.add_term(
                TensorKey {
                    monomial: k.monomial.clone(),
                    class: canonicalize(&self.site, &cyc)?,
                },
                c.clone(),
            );
        }
        Ok(out)
    }

    /// Number of further Chern applications after which every term of `a`
    /// must vanish under the bundle bound; a valid nilpotency bound.
    pub fn chern_nilpotency_bound(&self, a: &Element) -> u32 {
        a.terms
            .keys()
            .map(|k| self.bound.saturating_sub(k.class.bundles.len()) as u32 + 1)
            .max()
            .unwrap_or(1)
    }

    // -------------------------------------------------------------------
    // Presentations, normal forms, equality
    // -------------------------------------------------------------------

    /// The arrow's presented group over the enumerated generators plus the
    /// relation supports. `extras` widens the generator support for queries
    /// about classes outside the enumeration.
    pub fn presentation(
        &self,
        arrow: &str,
        extras: &BTreeSet<CycleClass>,
    ) -> Result<Arc<Presentation>, TheoryError> {
        let cacheable = extras.is_empty();
        if cacheable {
            if let Some(p) = self.presentations.lock().unwrap().get(arrow) {
                return Ok(p.clone());
            }
        }
        let p = Arc::new(self.build_presentation(arrow, extras)?);
        if cacheable {
            self.presentations
                .lock()
                .unwrap()
                .insert(arrow.to_string(), p.clone());
        }
        Ok(p)
    }

    fn build_presentation(
        &self,
        arrow: &str,
        extras: &BTreeSet<CycleClass>,
    ) -> Result<Presentation, TheoryError> {
        if self.kind.groups_only() {
            // free group on the dual-image generators
            let gens = self.dual_generators(arrow)?;
            let mut labels: BTreeMap<i64, Vec<String>> = BTreeMap::new();
            for g in gens {
                labels.entry(g.grade).or_default().push(g.label());
            }
            let parts = labels
                .into_iter()
                .map(|(g, ls)| (g, (ls, Vec::new())))
                .collect();
            return Ok(Presentation {
                arrow: arrow.to_string(),
                keys: BTreeMap::new(),
                index: BTreeMap::new(),
                group: PresentedGroup::new(parts),
            });
        }

        let mut class_support: BTreeSet<CycleClass> =
            self.generator_classes(arrow)?.into_iter().collect();
        let empty = Vec::new();
        let rels = self.relations.get(arrow).unwrap_or(&empty);
        for rel in rels {
            class_support.extend(rel.element.classes());
        }
        class_support.extend(extras.iter().cloned());

        // keys: monomial x class for tensored kinds, plain otherwise
        let mut keys: BTreeMap<i64, Vec<TensorKey>> = BTreeMap::new();
        if self.kind.tensored() {
            let ring = self
                .lazard
                .as_ref()
                .expect("tensored theory carries the coefficient ring");
            for d in 0..=self.trunc {
                for m in ring.basis(d) {
                    for c in &class_support {
                        let key = TensorKey {
                            monomial: m.clone(),
                            class: c.clone(),
                        };
                        keys.entry(key.grade()).or_default().push(key);
                    }
                }
            }
        } else {
            for c in &class_support {
                let key = TensorKey::plain(c.clone());
                keys.entry(key.grade()).or_default().push(key);
            }
        }
        for list in keys.values_mut() {
            list.sort();
            list.dedup();
        }
        let mut index: BTreeMap<TensorKey, (i64, usize)> = BTreeMap::new();
        for (g, list) in &keys {
            for (i, k) in list.iter().enumerate() {
                index.insert(k.clone(), (*g, i));
            }
        }

        // relation rows
        let mut rows: BTreeMap<i64, Vec<Vec<BigInt>>> = BTreeMap::new();
        {
            let mut add_row = |element: &Element| -> Result<(), TheoryError> {
                let mut by_grade: BTreeMap<i64, Vec<(usize, BigInt)>> = BTreeMap::new();
                for (k, c) in &element.terms {
                    let (g, i) = index.get(k).ok_or_else(|| {
                        TheoryError::Group(format!("key {} outside support", k.label()))
                    })?;
                    by_grade.entry(*g).or_default().push((*i, c.clone()));
                }
                for (g, entries) in by_grade {
                    let width = keys[&g].len();
                    let mut row = vec![BigInt::zero(); width];
                    for (i, c) in entries {
                        row[i] += c;
                    }
                    rows.entry(g).or_default().push(row);
                }
                Ok(())
            };
            for rel in rels {
                add_row(&rel.element)?;
            }
            // structural rows of the coefficient ring tensored with classes
            if self.kind.tensored() {
                let ring = self.lazard.as_ref().unwrap().clone();
                for d in 1..=self.trunc {
                    for r in ring.relation_rows(d) {
                        for c in &class_support {
                            let mut element = Element::zero(arrow);
                            for (m, coeff) in r.terms() {
                                element.add_term(
                                    TensorKey {
                                        monomial: m.clone(),
                                        class: c.clone(),
                                    },
                                    coeff.clone(),
                                );
                            }
                            add_row(&element)?;
                        }
                    }
                }
            }
        }

        let parts: BTreeMap<i64, (Vec<String>, Vec<Vec<BigInt>>)> = keys
            .iter()
            .map(|(g, list)| {
                let labels: Vec<String> = list.iter().map(|k| k.label()).collect();
                let grade_rows = rows.remove(g).unwrap_or_default();
                (*g, (labels, grade_rows))
            })
            .collect();
        Ok(Presentation {
            arrow: arrow.to_string(),
            keys,
            index,
            group: PresentedGroup::new(parts),
        })
    }

    /// Canonical representative modulo the arrow's relations.
    pub fn normal_form(&self, a: &Element) -> Result<Element, TheoryError> {
        if !self.kind.quotiented() {
            return Ok(a.clone());
        }
        let pres = self.presentation(&a.arrow, &a.classes())?;
        let mut out = Element::zero(&a.arrow);
        for (grade, ge) in pres.element_to_group(a)? {
            let nf = pres.group.normal_form(&ge)?;
            for (i, c) in nf.coeffs {
                out.add_term(pres.keys[&grade][i].clone(), c);
            }
        }
        Ok(out)
    }

    pub fn is_zero(&self, a: &Element) -> Result<bool, TheoryError> {
        if self.kind.quotiented() {
            Ok(self.normal_form(a)?.is_zero())
        } else {
            Ok(a.is_zero())
        }
    }

    pub fn elements_equal(&self, a: &Element, b: &Element) -> Result<bool, TheoryError> {
        if a.arrow != b.arrow {
            return Err(TheoryError::ArrowMismatch {
                got: b.arrow.clone(),
                want: a.arrow.clone(),
            });
        }
        self.is_zero(&a.sub(b))
    }

    /// Membership of `v` in the subgroup spanned by `span` plus the arrow's
    /// relations.
    pub fn membership(&self, v: &Element, span: &[Element]) -> Result<bool, TheoryError> {
        let mut extras = v.classes();
        for s in span {
            extras.extend(s.classes());
        }
        let pres = self.presentation(&v.arrow, &extras)?;
        let v_parts = pres.element_to_group(v)?;
        let mut span_parts: BTreeMap<i64, Vec<GroupElement>> = BTreeMap::new();
        for s in span {
            for (g, ge) in pres.element_to_group(s)? {
                span_parts.entry(g).or_default().push(ge);
            }
        }
        for (g, ge) in v_parts {
            if ge.is_zero() {
                continue;
            }
            let empty = Vec::new();
            let sp = span_parts.get(&g).unwrap_or(&empty);
            if pres.group.membership(&ge, sp)?.is_none() {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// (grade, rank, torsion) table, restricted to the window.
    pub fn group_invariants(
        &self,
        arrow: &str,
    ) -> Result<crate::bivariant::InvariantsTable, TheoryError> {
        let pres = self.presentation(arrow, &BTreeSet::new())?;
        let mut out = Vec::new();
        for g in pres.group.grades().collect::<Vec<_>>() {
            if !self.window.contains(g) {
                continue;
            }
            let (rank, torsion) = pres.group.invariants(g)?;
            out.push((g, rank, torsion));
        }
        Ok(out)
    }
}

/// Presented group of one arrow together with the key bookkeeping.
pub struct Presentation {
    pub arrow: MorId,
    pub keys: BTreeMap<i64, Vec<TensorKey>>,
    index: BTreeMap<TensorKey, (i64, usize)>,
    pub group: PresentedGroup,
}

impl Presentation {
    /// Split an element into per-grade group elements.
    pub fn element_to_group(&self, e: &Element) -> Result<Vec<(i64, GroupElement)>, TheoryError> {
        let mut by_grade: BTreeMap<i64, GroupElement> = BTreeMap::new();
        for (k, c) in &e.terms {
            let (g, i) = self.index.get(k).ok_or_else(|| {
                TheoryError::Group(format!("key {} outside presentation support", k.label()))
            })?;
            by_grade
                .entry(*g)
                .or_insert_with(|| GroupElement::zero(*g))
                .add_term(*i, c.clone());
        }
        Ok(by_grade.into_iter().collect())
    }
}

impl crate::lazard::FglModule for Element {
    fn add(&self, other: &Self) -> Self {
        Element::add(self, other)
    }
    fn scale(&self, c: &RingElem) -> Self {
        // callers working in a truncated tensor theory re-truncate when they
        // assemble relations; here the full product is kept
        self.scale_ring(c, usize::MAX)
    }
    fn is_zero(&self) -> bool {
        Element::is_zero(self)
    }
    fn clear(&mut self) {
        self.terms.clear();
    }
}

// ---------------------------------------------------------------------------
// Covariant / contravariant extraction
// ---------------------------------------------------------------------------

/// Per-grade invariants table: (grade, free rank, torsion coefficients).
pub type InvariantsTable = Vec<(i64, usize, Vec<BigInt>)>;

/// The covariant shadow at an object: its group over the structure arrow.
/// Pushforwards along confined maps are induced by [`Theory::pushforward`].
pub fn covariant_part(
    theory: &Theory,
    object: &str,
) -> Result<(MorId, InvariantsTable), TheoryError> {
    let arrow = theory.site.structure_map(object)?.clone();
    let table = theory.group_invariants(&arrow)?;
    Ok((arrow, table))
}

/// Induced pushforward on covariant parts along a confined map: each
/// generator of the source group mapped into the target group (normal form
/// for quotient kinds).
pub fn covariant_pushforward(
    theory: &Theory,
    step: &str,
) -> Result<Vec<(CycleClass, Element)>, TheoryError> {
    let m = theory.site.morphism(step)?.clone();
    let src_arrow = theory.site.structure_map(&m.src)?.clone();
    let dst_arrow = theory.site.structure_map(&m.dst)?.clone();
    let mut out = Vec::new();
    for class in theory.generator_classes(&src_arrow)? {
        let moved = theory.pushforward(
            step,
            &dst_arrow,
            &Element::from_class(&src_arrow, class.clone()),
        )?;
        out.push((class, theory.normal_form(&moved)?));
    }
    Ok(out)
}

/// One entry of a contravariant multiplication table: indices of the two
/// generator keys and the normal form of their product over the keys.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProductTableEntry {
    pub left: String,
    pub right: String,
    pub result: String,
}

/// The contravariant shadow at a smooth object: its group over the identity
/// arrow, with the ring structure tabulated on generator keys.
pub fn contravariant_part(
    theory: &Theory,
    object: &str,
) -> Result<(MorId, InvariantsTable, Vec<ProductTableEntry>), TheoryError> {
    let obj = theory.site.object(object)?;
    if !obj.smooth {
        return Err(TheoryError::NonSmooth(object.to_string()));
    }
    let arrow = theory.site.identity_of(object).clone();
    let table = theory.group_invariants(&arrow)?;
    let mut products = Vec::new();
    if !theory.kind.groups_only() {
        let pres = theory.presentation(&arrow, &BTreeSet::new())?;
        let mut keys: Vec<TensorKey> = Vec::new();
        for list in pres.keys.values() {
            keys.extend(list.iter().cloned());
        }
        for ka in &keys {
            let ea = key_element(&arrow, ka);
            for kb in &keys {
                let eb = key_element(&arrow, kb);
                match theory.product(&ea, &eb) {
                    Ok(prod) => {
                        let nf = theory.normal_form(&prod)?;
                        products.push(ProductTableEntry {
                            left: ka.label(),
                            right: kb.label(),
                            result: nf.describe(),
                        });
                    }
                    Err(TheoryError::Site(SiteError::MissingFiberSquare { .. }))
                    | Err(TheoryError::Site(SiteError::MissingPushoutSquare { .. })) => {
                        products.push(ProductTableEntry {
                            left: ka.label(),
                            right: kb.label(),
                            result: "(missing square)".into(),
                        });
                    }
                    Err(e) => return Err(e),
                }
            }
        }
    }
    Ok((arrow, table, products))
}

fn key_element(arrow: &str, key: &TensorKey) -> Element {
    let mut e = Element::zero(arrow);
    e.add_term(key.clone(), BigInt::one());
    e
}

// ---------------------------------------------------------------------------
// Axiom suite
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Default)]
pub struct AxiomResult {
    pub axiom: String,
    pub checked: usize,
    pub passed: usize,
    pub failed: usize,
    pub skipped: usize,
    pub failures: Vec<String>,
    pub skips: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct AxiomReport {
    pub theory: String,
    pub results: Vec<AxiomResult>,
}

impl AxiomReport {
    pub fn total_failed(&self) -> usize {
        self.results.iter().map(|r| r.failed).sum()
    }

    pub fn total_skipped(&self) -> usize {
        self.results.iter().map(|r| r.skipped).sum()
    }
}

enum Outcome {
    Pass,
    Fail(String),
    Skip(String),
}

fn record(result: &mut AxiomResult, outcome: Outcome, witness: &str) {
    match outcome {
        Outcome::Pass => {
            result.checked += 1;
            result.passed += 1;
        }
        Outcome::Fail(detail) => {
            result.checked += 1;
            result.failed += 1;
            if result.failures.len() < 20 {
                result.failures.push(format!("{witness}: {detail}"));
            }
        }
        Outcome::Skip(detail) => {
            result.skipped += 1;
            if result.skips.len() < 20 {
                result.skips.push(format!("{witness}: {detail}"));
            }
        }
    }
}

/// Classify an operation error: missing diagram data is a skip, anything
/// else is a failure.
fn classify(e: &TheoryError) -> Option<String> {
    match e {
        TheoryError::Site(SiteError::MissingFiberSquare { f, g }) => {
            Some(format!("missing fiber square ({f}, {g})"))
        }
        TheoryError::Site(SiteError::MissingPushoutSquare { h, g }) => {
            Some(format!("missing pushout square ({h}, {g})"))
        }
        _ => None,
    }
}

macro_rules! try_op {
    ($result:expr, $witness:expr, $e:expr) => {
        match $e {
            Ok(v) => v,
            Err(err) => {
                match classify(&err) {
                    Some(skip) => record($result, Outcome::Skip(skip), $witness),
                    None => record($result, Outcome::Fail(err.to_string()), $witness),
                }
                continue;
            }
        }
    };
}

/// Run every checkable axiom instance over the finite site: the seven
/// structural identities, and the four Chern compatibilities for oriented
/// kinds. Missing squares are recorded as skips, never as passes.
pub fn axiom_suite(theory: &Theory) -> Result<AxiomReport, TheoryError> {
    theory.check_ops_supported()?;
    let site = &theory.site;
    let mut results = Vec::new();

    // generator cache per arrow
    let mut gens: BTreeMap<MorId, Vec<Element>> = BTreeMap::new();
    for arrow in theory.arrows() {
        gens.insert(arrow.clone(), theory.generators(&arrow)?);
    }
    let composable: Vec<(MorId, MorId)> = {
        let mut v = Vec::new();
        for f in site.morphisms.values() {
            for g in site.morphisms.values() {
                if f.dst == g.src {
                    v.push((f.id.clone(), g.id.clone()));
                }
            }
        }
        v.sort();
        v
    };

    // --- product associativity -------------------------------------------
    let mut assoc = AxiomResult {
        axiom: "product-associativity".into(),
        ..Default::default()
    };
    for (f, g) in &composable {
        for h in site.morphisms.values() {
            let gm = site.morphism(g)?;
            if gm.dst != h.src {
                continue;
            }
            let h = &h.id;
            for a in &gens[f] {
                for b in &gens[g] {
                    for c in &gens[h] {
                        let witness = format!(
                            "f={f} g={g} h={h} a={} b={} c={}",
                            a.describe(),
                            b.describe(),
                            c.describe()
                        );
                        let ab = try_op!(&mut assoc, &witness, theory.product(a, b));
                        let ab_c = try_op!(&mut assoc, &witness, theory.product(&ab, c));
                        let bc = try_op!(&mut assoc, &witness, theory.product(b, c));
                        let a_bc = try_op!(&mut assoc, &witness, theory.product(a, &bc));
                        let eq = try_op!(&mut assoc, &witness, theory.elements_equal(&ab_c, &a_bc));
                        if eq {
                            record(&mut assoc, Outcome::Pass, &witness);
                        } else {
                            record(
                                &mut assoc,
                                Outcome::Fail(format!(
                                    "({}) vs ({})",
                                    ab_c.describe(),
                                    a_bc.describe()
                                )),
                                &witness,
                            );
                        }
                    }
                }
            }
        }
    }
    results.push(assoc);

    // --- pushforward functoriality ----------------------------------------
    let mut pf = AxiomResult {
        axiom: "pushforward-functoriality".into(),
        ..Default::default()
    };
    // identity part
    for arrow in theory.arrows() {
        let fm = site.morphism(&arrow)?;
        let idx = site.identity_of(&fm.src).clone();
        if !theory.confined(&idx)? {
            continue;
        }
        for a in &gens[&arrow] {
            let witness = format!("identity pushforward on {arrow} a={}", a.describe());
            let moved = try_op!(&mut pf, &witness, theory.pushforward(&idx, &arrow, a));
            let eq = try_op!(&mut pf, &witness, theory.elements_equal(&moved, a));
            if eq {
                record(&mut pf, Outcome::Pass, &witness);
            } else {
                record(&mut pf, Outcome::Fail(moved.describe()), &witness);
            }
        }
    }
    // composition part
    for (f1, f2) in &composable {
        if !theory.confined(f1)? || !theory.confined(f2)? {
            continue;
        }
        let f21 = site.compose(f2, f1)?.clone();
        let f2m = site.morphism(f2)?;
        for g in site.morphisms.values() {
            if g.src != f2m.dst {
                continue;
            }
            let g = &g.id;
            let total = site.compose(g, &f21)?.clone();
            let mid = site.compose(g, f2)?.clone();
            for a in &gens[&total] {
                let witness = format!("f1={f1} f2={f2} g={g} a={}", a.describe());
                let two_step = {
                    let first = try_op!(&mut pf, &witness, theory.pushforward(f1, &mid, a));
                    try_op!(&mut pf, &witness, theory.pushforward(f2, g, &first))
                };
                let one_step = try_op!(&mut pf, &witness, theory.pushforward(&f21, g, a));
                let eq = try_op!(
                    &mut pf,
                    &witness,
                    theory.elements_equal(&two_step, &one_step)
                );
                if eq {
                    record(&mut pf, Outcome::Pass, &witness);
                } else {
                    record(
                        &mut pf,
                        Outcome::Fail(format!(
                            "({}) vs ({})",
                            two_step.describe(),
                            one_step.describe()
                        )),
                        &witness,
                    );
                }
            }
        }
    }
    results.push(pf);

    // --- pullback functoriality -------------------------------------------
    let mut pb = AxiomResult {
        axiom: "pullback-functoriality".into(),
        ..Default::default()
    };
    // identity squares
    for arrow in theory.arrows() {
        let sq = ConfinedSquare::identity_over(site, &arrow);
        for a in &gens[&arrow] {
            let witness = format!("identity pullback over {arrow} a={}", a.describe());
            let moved = try_op!(&mut pb, &witness, theory.pullback(&sq, a));
            let eq = try_op!(&mut pb, &witness, theory.elements_equal(&moved, a));
            if eq {
                record(&mut pb, Outcome::Pass, &witness);
            } else {
                record(&mut pb, Outcome::Fail(moved.describe()), &witness);
            }
        }
    }
    // horizontally pasted pairs
    let squares = site.confined_squares();
    for s1 in &squares {
        for s2 in &squares {
            if s1.top_right != s2.top_left || s1.right != s2.left {
                continue;
            }
            let top = site.compose(&s2.top, &s1.top)?.clone();
            let bottom = site.compose(&s2.bottom, &s1.bottom)?.clone();
            let witness = format!(
                "squares ({}/{}) then ({}/{})",
                s1.top, s1.bottom, s2.top, s2.bottom
            );
            let Some(outer) = site.find_confined_square(&top, &s1.left, &s2.right, &bottom) else {
                record(
                    &mut pb,
                    Outcome::Skip("outer square not declared".into()),
                    &witness,
                );
                continue;
            };
            for a in &gens[&s2.right] {
                let witness = format!("{witness} a={}", a.describe());
                let step = {
                    let inner = try_op!(&mut pb, &witness, theory.pullback(s2, a));
                    try_op!(&mut pb, &witness, theory.pullback(s1, &inner))
                };
                let direct = try_op!(&mut pb, &witness, theory.pullback(&outer, a));
                let eq = try_op!(&mut pb, &witness, theory.elements_equal(&step, &direct));
                if eq {
                    record(&mut pb, Outcome::Pass, &witness);
                } else {
                    record(
                        &mut pb,
                        Outcome::Fail(format!("({}) vs ({})", step.describe(), direct.describe())),
                        &witness,
                    );
                }
            }
        }
    }
    results.push(pb);

    // --- product commutes with pushforward ---------------------------------
    let mut ppf = AxiomResult {
        axiom: "product-pushforward".into(),
        ..Default::default()
    };
    for (f, h) in &composable {
        if !theory.confined(f)? {
            continue;
        }
        let hf = site.compose(h, f)?.clone();
        let hm = site.morphism(h)?;
        for g in site.morphisms.values() {
            if g.src != hm.dst {
                continue;
            }
            let g = &g.id;
            for a in &gens[&hf] {
                for b in &gens[g] {
                    let witness =
                        format!("f={f} h={h} g={g} a={} b={}", a.describe(), b.describe());
                    let lhs = {
                        let fa = try_op!(&mut ppf, &witness, theory.pushforward(f, h, a));
                        try_op!(&mut ppf, &witness, theory.product(&fa, b))
                    };
                    let rhs = {
                        let ab = try_op!(&mut ppf, &witness, theory.product(a, b));
                        let target = site.compose(g, h)?.clone();
                        try_op!(&mut ppf, &witness, theory.pushforward(f, &target, &ab))
                    };
                    let eq = try_op!(&mut ppf, &witness, theory.elements_equal(&lhs, &rhs));
                    if eq {
                        record(&mut ppf, Outcome::Pass, &witness);
                    } else {
                        record(
                            &mut ppf,
                            Outcome::Fail(format!("({}) vs ({})", lhs.describe(), rhs.describe())),
                            &witness,
                        );
                    }
                }
            }
        }
    }
    results.push(ppf);

    // --- product commutes with pullback (identity-bottom squares) ----------
    let mut ppb = AxiomResult {
        axiom: "product-pullback".into(),
        ..Default::default()
    };
    for (hp, g) in &composable {
        // square with identity top over hp, then the product with b over g
        let sq_upper = ConfinedSquare::identity_over(site, hp);
        let gh = site.compose(g, hp)?.clone();
        let sq_lower = ConfinedSquare::identity_over(site, &gh);
        for a in &gens[hp] {
            for b in &gens[g] {
                let witness = format!("h'={hp} g={g} a={} b={}", a.describe(), b.describe());
                let lhs = {
                    let pa = try_op!(&mut ppb, &witness, theory.pullback(&sq_upper, a));
                    try_op!(&mut ppb, &witness, theory.product(&pa, b))
                };
                let rhs = {
                    let ab = try_op!(&mut ppb, &witness, theory.product(a, b));
                    try_op!(&mut ppb, &witness, theory.pullback(&sq_lower, &ab))
                };
                let eq = try_op!(&mut ppb, &witness, theory.elements_equal(&lhs, &rhs));
                if eq {
                    record(&mut ppb, Outcome::Pass, &witness);
                } else {
                    record(
                        &mut ppb,
                        Outcome::Fail(format!("({}) vs ({})", lhs.describe(), rhs.describe())),
                        &witness,
                    );
                }
            }
        }
    }
    results.push(ppb);

    // --- pushforward commutes with pullback --------------------------------
    let mut pfpb = AxiomResult {
        axiom: "pushforward-pullback".into(),
        ..Default::default()
    };
    {
        // upper squares with confined vertical legs; lower square either the
        // doubled-bottom identity form or a declared square sharing the edge
        let mut uppers = squares.clone();
        for arrow in theory.arrows() {
            uppers.push(ConfinedSquare::identity_over(site, &arrow));
        }
        uppers.sort();
        uppers.dedup();
        for s_top in &uppers {
            if !theory.confined(&s_top.left)? || !theory.confined(&s_top.right)? {
                continue;
            }
            let mut lowers = vec![ConfinedSquare::identity_legs(site, &s_top.bottom)];
            for s in &squares {
                if s.top == s_top.bottom
                    && s.top_left == s_top.bottom_left
                    && s.top_right == s_top.bottom_right
                {
                    lowers.push(s.clone());
                }
            }
            for s_bot in lowers {
                let witness_base = format!(
                    "upper ({}/{}) lower ({}/{})",
                    s_top.top, s_top.bottom, s_bot.top, s_bot.bottom
                );
                let right_arrow = site.compose(&s_bot.right, &s_top.right)?.clone();
                let left_arrow = site.compose(&s_bot.left, &s_top.left)?.clone();
                let Some(outer) =
                    site.find_confined_square(&s_top.top, &left_arrow, &right_arrow, &s_bot.bottom)
                else {
                    record(
                        &mut pfpb,
                        Outcome::Skip("pasted square not declared".into()),
                        &witness_base,
                    );
                    continue;
                };
                for a in &gens[&right_arrow] {
                    let witness = format!("{witness_base} a={}", a.describe());
                    let lhs = {
                        let pulled = try_op!(&mut pfpb, &witness, theory.pullback(&outer, a));
                        try_op!(
                            &mut pfpb,
                            &witness,
                            theory.pushforward(&s_top.left, &s_bot.left, &pulled)
                        )
                    };
                    let rhs = {
                        let pushed = try_op!(
                            &mut pfpb,
                            &witness,
                            theory.pushforward(&s_top.right, &s_bot.right, a)
                        );
                        try_op!(&mut pfpb, &witness, theory.pullback(&s_bot, &pushed))
                    };
                    let eq = try_op!(&mut pfpb, &witness, theory.elements_equal(&lhs, &rhs));
                    if eq {
                        record(&mut pfpb, Outcome::Pass, &witness);
                    } else {
                        record(
                            &mut pfpb,
                            Outcome::Fail(format!("({}) vs ({})", lhs.describe(), rhs.describe())),
                            &witness,
                        );
                    }
                }
            }
        }
    }
    results.push(pfpb);

    // --- projection formula -------------------------------------------------
    let mut proj = AxiomResult {
        axiom: "projection-formula".into(),
        ..Default::default()
    };
    {
        let mut projection_squares = squares.clone();
        for arrow in theory.arrows() {
            projection_squares.push(ConfinedSquare::identity_over(site, &arrow));
        }
        projection_squares.sort();
        projection_squares.dedup();
        for sq in &projection_squares {
            // top: g', bottom: g, left: f', right: f
            if !theory.confined(&sq.top)? || !theory.confined(&sq.bottom)? {
                continue;
            }
            for h in site.morphisms.values() {
                if h.src != sq.bottom_right {
                    continue;
                }
                let h = &h.id;
                let b_arrow = site.compose(h, &sq.bottom)?.clone();
                let target = site.compose(h, &sq.right)?.clone();
                for a in &gens[&sq.right] {
                    for b in &gens[&b_arrow] {
                        let witness = format!(
                            "square ({}/{}) h={h} a={} b={}",
                            sq.top,
                            sq.bottom,
                            a.describe(),
                            b.describe()
                        );
                        let lhs = {
                            let ga = try_op!(&mut proj, &witness, theory.pullback(sq, a));
                            let prod = try_op!(&mut proj, &witness, theory.product(&ga, b));
                            try_op!(
                                &mut proj,
                                &witness,
                                theory.pushforward(&sq.top, &target, &prod)
                            )
                        };
                        let rhs = {
                            let gb =
                                try_op!(&mut proj, &witness, theory.pushforward(&sq.bottom, h, b));
                            try_op!(&mut proj, &witness, theory.product(a, &gb))
                        };
                        let eq = try_op!(&mut proj, &witness, theory.elements_equal(&lhs, &rhs));
                        if eq {
                            record(&mut proj, Outcome::Pass, &witness);
                        } else {
                            record(
                                &mut proj,
                                Outcome::Fail(format!(
                                    "({}) vs ({})",
                                    lhs.describe(),
                                    rhs.describe()
                                )),
                                &witness,
                            );
                        }
                    }
                }
            }
        }
    }
    results.push(proj);

    // --- Chern compatibilities (oriented kinds) ----------------------------
    if theory.kind.oriented() {
        results.extend(chern_suite(theory, &gens, &squares, &composable)?);
    }

    Ok(AxiomReport {
        theory: theory.kind.name().to_string(),
        results,
    })
}

fn basics_over(site: &FiniteSite, obj: &str) -> Vec<Vec<i64>> {
    let rank = site.picard_rank(obj);
    (0..rank)
        .map(|k| {
            let mut v = vec![0i64; rank];
            v[k] = 1;
            v
        })
        .collect()
}

fn chern_suite(
    theory: &Theory,
    gens: &BTreeMap<MorId, Vec<Element>>,
    squares: &[ConfinedSquare],
    composable: &[(MorId, MorId)],
) -> Result<Vec<AxiomResult>, TheoryError> {
    let site = &theory.site;
    let mut out = Vec::new();

    // commuting operators
    let mut comm = AxiomResult {
        axiom: "chern-commute".into(),
        ..Default::default()
    };
    for arrow in theory.arrows() {
        let src = site.morphism(&arrow)?.src.clone();
        let basics = basics_over(site, &src);
        for l1 in &basics {
            for l2 in &basics {
                for a in &gens[&arrow] {
                    let witness = format!("arrow={arrow} L1={l1:?} L2={l2:?} a={}", a.describe());
                    let lhs = {
                        let x = try_op!(&mut comm, &witness, theory.chern(l2, a));
                        try_op!(&mut comm, &witness, theory.chern(l1, &x))
                    };
                    let rhs = {
                        let x = try_op!(&mut comm, &witness, theory.chern(l1, a));
                        try_op!(&mut comm, &witness, theory.chern(l2, &x))
                    };
                    let eq = try_op!(&mut comm, &witness, theory.elements_equal(&lhs, &rhs));
                    if eq {
                        record(&mut comm, Outcome::Pass, &witness);
                    } else {
                        record(
                            &mut comm,
                            Outcome::Fail(format!("({}) vs ({})", lhs.describe(), rhs.describe())),
                            &witness,
                        );
                    }
                }
            }
        }
    }
    out.push(comm);

    // pushforward compatibility
    let mut cpf = AxiomResult {
        axiom: "chern-pushforward".into(),
        ..Default::default()
    };
    for (f, g) in composable {
        if !theory.confined(f)? {
            continue;
        }
        let gf = site.compose(g, f)?.clone();
        let mid = site.morphism(f)?.dst.clone();
        for l in basics_over(site, &mid) {
            let pulled = site.pullback_bundle(f, &l)?;
            for a in &gens[&gf] {
                let witness = format!("f={f} g={g} L={l:?} a={}", a.describe());
                let lhs = {
                    let x = try_op!(&mut cpf, &witness, theory.chern(&pulled, a));
                    try_op!(&mut cpf, &witness, theory.pushforward(f, g, &x))
                };
                let rhs = {
                    let x = try_op!(&mut cpf, &witness, theory.pushforward(f, g, a));
                    try_op!(&mut cpf, &witness, theory.chern(&l, &x))
                };
                let eq = try_op!(&mut cpf, &witness, theory.elements_equal(&lhs, &rhs));
                if eq {
                    record(&mut cpf, Outcome::Pass, &witness);
                } else {
                    record(
                        &mut cpf,
                        Outcome::Fail(format!("({}) vs ({})", lhs.describe(), rhs.describe())),
                        &witness,
                    );
                }
            }
        }
    }
    out.push(cpf);

    // pullback compatibility
    let mut cpb = AxiomResult {
        axiom: "chern-pullback".into(),
        ..Default::default()
    };
    {
        let mut all = squares.to_vec();
        for arrow in theory.arrows() {
            all.push(ConfinedSquare::identity_over(site, &arrow));
        }
        all.sort();
        all.dedup();
        for sq in &all {
            for l in basics_over(site, &sq.top_right) {
                let pulled = site.pullback_bundle(&sq.top, &l)?;
                for a in &gens[&sq.right] {
                    let witness = format!(
                        "square ({}/{}) L={l:?} a={}",
                        sq.top,
                        sq.bottom,
                        a.describe()
                    );
                    let lhs = {
                        let x = try_op!(&mut cpb, &witness, theory.chern(&l, a));
                        try_op!(&mut cpb, &witness, theory.pullback(sq, &x))
                    };
                    let rhs = {
                        let x = try_op!(&mut cpb, &witness, theory.pullback(sq, a));
                        try_op!(&mut cpb, &witness, theory.chern(&pulled, &x))
                    };
                    let eq = try_op!(&mut cpb, &witness, theory.elements_equal(&lhs, &rhs));
                    if eq {
                        record(&mut cpb, Outcome::Pass, &witness);
                    } else {
                        record(
                            &mut cpb,
                            Outcome::Fail(format!("({}) vs ({})", lhs.describe(), rhs.describe())),
                            &witness,
                        );
                    }
                }
            }
        }
    }
    out.push(cpb);

    // product compatibility, both slots
    let mut cpl = AxiomResult {
        axiom: "chern-product-left".into(),
        ..Default::default()
    };
    let mut cpr = AxiomResult {
        axiom: "chern-product-right".into(),
        ..Default::default()
    };
    for (f, g) in composable {
        let fm = site.morphism(f)?.clone();
        for a in &gens[f] {
            for b in &gens[g] {
                for l1 in basics_over(site, &fm.src) {
                    let witness = format!(
                        "f={f} g={g} L1={l1:?} a={} b={}",
                        a.describe(),
                        b.describe()
                    );
                    let lhs = {
                        let x = try_op!(&mut cpl, &witness, theory.chern(&l1, a));
                        try_op!(&mut cpl, &witness, theory.product(&x, b))
                    };
                    let rhs = {
                        let ab = try_op!(&mut cpl, &witness, theory.product(a, b));
                        try_op!(&mut cpl, &witness, theory.chern(&l1, &ab))
                    };
                    let eq = try_op!(&mut cpl, &witness, theory.elements_equal(&lhs, &rhs));
                    if eq {
                        record(&mut cpl, Outcome::Pass, &witness);
                    } else {
                        record(
                            &mut cpl,
                            Outcome::Fail(format!("({}) vs ({})", lhs.describe(), rhs.describe())),
                            &witness,
                        );
                    }
                }
                for l2 in basics_over(site, &fm.dst) {
                    let pulled = site.pullback_bundle(f, &l2)?;
                    let witness = format!(
                        "f={f} g={g} L2={l2:?} a={} b={}",
                        a.describe(),
                        b.describe()
                    );
                    let lhs = {
                        let x = try_op!(&mut cpr, &witness, theory.chern(&l2, b));
                        try_op!(&mut cpr, &witness, theory.product(a, &x))
                    };
                    let rhs = {
                        let ab = try_op!(&mut cpr, &witness, theory.product(a, b));
                        try_op!(&mut cpr, &witness, theory.chern(&pulled, &ab))
                    };
                    let eq = try_op!(&mut cpr, &witness, theory.elements_equal(&lhs, &rhs));
                    if eq {
                        record(&mut cpr, Outcome::Pass, &witness);
                    } else {
                        record(
                            &mut cpr,
                            Outcome::Fail(format!("({}) vs ({})", lhs.describe(), rhs.describe())),
                            &witness,
                        );
                    }
                }
            }
        }
    }
    out.push(cpl);
    out.push(cpr);

    Ok(out)
}
