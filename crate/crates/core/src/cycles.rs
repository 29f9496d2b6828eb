//! Generators of the three raw theories and their equivalence classing.
//!
//! A cycle for an ambient arrow `f: X -> Y` is a carrier morphism together
//! with a bundle multiset: `h: W -> X` for the covariant-style kinds, or
//! `h: Y -> W` for the dual kind (which never carries bundles). Two cycles
//! are identified when a declared isomorphism matches them compatibly with
//! the ambient arrow; classes are represented by their least member under
//! the fixed order (grade, carrier object, carrier morphism, bundles).

use std::collections::BTreeSet;

use crate::site::{FiniteSite, MorId, SiteError};

pub type BundleVec = Vec<i64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum CycleKind {
    /// Cycles `[h: W -> X]` with `h` proper and `f∘h` smooth.
    M,
    /// Dual cycles `[h: Y -> W]` with `h` proper and `h∘f` smooth.
    MPrime,
    /// Oriented cycles `[h: W -> X; L_1..L_r]`, graded by `dim W - r`.
    Ob,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct BivariantCycle {
    pub kind: CycleKind,
    /// Ambient arrow id.
    pub arrow: MorId,
    /// Carrier morphism id.
    pub carrier: MorId,
    /// Sorted bundle multiset over the carrier source; empty unless `Ob`.
    pub bundles: Vec<BundleVec>,
}

impl BivariantCycle {
    pub fn new(kind: CycleKind, arrow: &str, carrier: &str, mut bundles: Vec<BundleVec>) -> Self {
        bundles.sort();
        BivariantCycle {
            kind,
            arrow: arrow.to_string(),
            carrier: carrier.to_string(),
            bundles,
        }
    }

    /// The object whose dimension grades the cycle: the carrier source for
    /// M/Ob, the carrier target for the dual kind.
    pub fn carrier_object<'s>(&self, site: &'s FiniteSite) -> Result<&'s str, SiteError> {
        let m = site.morphism(&self.carrier)?;
        Ok(match self.kind {
            CycleKind::M | CycleKind::Ob => &m.src,
            CycleKind::MPrime => &m.dst,
        })
    }

    pub fn grade(&self, site: &FiniteSite) -> Result<i64, SiteError> {
        let obj = self.carrier_object(site)?;
        let dim = site.object(obj)?.dim;
        Ok(match self.kind {
            CycleKind::M | CycleKind::MPrime => dim,
            CycleKind::Ob => dim - self.bundles.len() as i64,
        })
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CycleError {
    #[error("cycle is inadmissible: {0}")]
    Inadmissible(String),
    #[error("{0}")]
    Site(String),
}

use thiserror::Error;

impl From<SiteError> for CycleError {
    fn from(e: SiteError) -> Self {
        CycleError::Site(e.to_string())
    }
}

/// Equivalence class of cycles, keyed by the canonical representative.
/// Ordering is (grade, carrier object, carrier morphism, bundles).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct CycleClass {
    pub grade: i64,
    pub carrier_object: String,
    pub carrier: MorId,
    pub bundles: Vec<BundleVec>,
    pub kind: CycleKind,
}

impl CycleClass {
    pub fn label(&self) -> String {
        let bundles = if self.bundles.is_empty() {
            String::new()
        } else {
            let parts: Vec<String> = self
                .bundles
                .iter()
                .map(|b| {
                    format!(
                        "({})",
                        b.iter()
                            .map(|x| x.to_string())
                            .collect::<Vec<_>>()
                            .join(",")
                    )
                })
                .collect();
            format!("; {}", parts.join(" "))
        };
        format!("[{}{}]", self.carrier, bundles)
    }
}

/// Check the flag conditions for a cycle on its ambient arrow.
pub fn is_admissible(site: &FiniteSite, c: &BivariantCycle) -> Result<bool, SiteError> {
    let h = site.morphism(&c.carrier)?;
    let f = site.morphism(&c.arrow)?;
    Ok(match c.kind {
        CycleKind::M | CycleKind::Ob => {
            if h.dst != f.src {
                return Ok(false);
            }
            if !h.proper {
                return Ok(false);
            }
            let comp = site.compose(&f.id, &h.id)?;
            let rank = site.picard_rank(&h.src);
            if c.bundles.iter().any(|b| b.len() != rank) {
                return Ok(false);
            }
            site.morphism(comp)?.smooth
        }
        CycleKind::MPrime => {
            if h.src != f.dst || !c.bundles.is_empty() {
                return Ok(false);
            }
            if !h.proper {
                return Ok(false);
            }
            let comp = site.compose(&h.id, &f.id)?;
            site.morphism(comp)?.smooth
        }
    })
}

/// Full orbit of a cycle under declared isomorphisms, for the equivalence
/// that composes with the ambient arrow.
fn orbit(
    site: &FiniteSite,
    start: &BivariantCycle,
) -> Result<BTreeSet<BivariantCycle>, CycleError> {
    let mut seen: BTreeSet<BivariantCycle> = BTreeSet::new();
    let mut queue = vec![start.clone()];
    seen.insert(start.clone());
    while let Some(cur) = queue.pop() {
        let members = neighbors(site, &cur)?;
        for m in members {
            if seen.insert(m.clone()) {
                queue.push(m);
            }
        }
    }
    Ok(seen)
}

fn neighbors(site: &FiniteSite, c: &BivariantCycle) -> Result<Vec<BivariantCycle>, CycleError> {
    let mut out = Vec::new();
    match c.kind {
        CycleKind::M | CycleKind::Ob => {
            // members (W', h', B') with a declared iso g: W' -> W such that
            // f∘h'∘g' ... equivalently: for each declared iso g: W -> W',
            // every h': W' -> X with f∘h'∘g = f∘h, and B' the bundle
            // transport of B through the inverse of g.
            let f = &c.arrow;
            let h = site.morphism(&c.carrier)?;
            let fh = site.compose(f, &c.carrier)?.clone();
            for g in site.isos_from(&h.src) {
                let ginv = if site.is_identity(&g.id) {
                    g.id.clone()
                } else {
                    g.inverse.clone().expect("iso has inverse")
                };
                // transport bundles: B' = (g^{-1})^*(B)
                let mut bundles = Vec::new();
                let mut ok = true;
                for b in &c.bundles {
                    match site.pullback_bundle(&ginv, b) {
                        Ok(v) => bundles.push(v),
                        Err(_) => {
                            ok = false;
                            break;
                        }
                    }
                }
                if !ok {
                    continue;
                }
                bundles.sort();
                let target = site.morphism(&g.id)?.dst.clone();
                for hp in site.morphisms.values() {
                    if hp.src != target || hp.dst != h.dst {
                        continue;
                    }
                    let fhp = site.compose(f, &hp.id)?;
                    let fhpg = site.compose(fhp, &g.id)?;
                    if *fhpg == fh {
                        out.push(BivariantCycle::new(c.kind, f, &hp.id, bundles.clone()));
                    }
                }
            }
        }
        CycleKind::MPrime => {
            // members (g∘h: Y -> W') for declared isos g: W -> W'
            let h = site.morphism(&c.carrier)?;
            for g in site.isos_from(&h.dst) {
                let gh = site.compose(&g.id, &c.carrier)?;
                out.push(BivariantCycle::new(c.kind, &c.arrow, gh, Vec::new()));
            }
        }
    }
    Ok(out)
}

/// Canonical class of an admissible cycle: least orbit member.
pub fn canonicalize(site: &FiniteSite, c: &BivariantCycle) -> Result<CycleClass, CycleError> {
    if !is_admissible(site, c)? {
        return Err(CycleError::Inadmissible(format!(
            "cycle [{}] on arrow {} violates the flag conditions",
            c.carrier, c.arrow
        )));
    }
    let grade = c.grade(site)?;
    let orb = orbit(site, c)?;
    let mut best: Option<(String, &BivariantCycle)> = None;
    for member in &orb {
        let obj = member.carrier_object(site)?.to_string();
        match &best {
            Some((bobj, bc))
                if (bobj.as_str(), bc.carrier.as_str(), &bc.bundles)
                    <= (obj.as_str(), member.carrier.as_str(), &member.bundles) => {}
            _ => best = Some((obj, member)),
        }
    }
    let (obj, rep) = best.expect("orbit contains the start cycle");
    Ok(CycleClass {
        grade,
        carrier_object: obj,
        carrier: rep.carrier.clone(),
        bundles: rep.bundles.clone(),
        kind: c.kind,
    })
}

/// Grade window restriction for enumerations and reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GradeWindow {
    pub lo: Option<i64>,
    pub hi: Option<i64>,
}

impl GradeWindow {
    pub fn full() -> Self {
        GradeWindow { lo: None, hi: None }
    }

    pub fn contains(&self, g: i64) -> bool {
        self.lo.is_none_or(|lo| g >= lo) && self.hi.is_none_or(|hi| g <= hi)
    }
}

/// Enumerate the cycle classes of `M` on an arrow: admissible carriers up to
/// equivalence, in canonical order.
pub fn enum_m(site: &FiniteSite, arrow: &str) -> Result<Vec<CycleClass>, CycleError> {
    let f = site.morphism(arrow)?;
    let mut out = BTreeSet::new();
    for h in site.morphisms.values() {
        if h.dst != f.src {
            continue;
        }
        let c = BivariantCycle::new(CycleKind::M, arrow, &h.id, Vec::new());
        if is_admissible(site, &c)? {
            out.insert(canonicalize(site, &c)?);
        }
    }
    Ok(out.into_iter().collect())
}

/// Enumerate the dual cycle classes on an arrow.
pub fn enum_mprime(site: &FiniteSite, arrow: &str) -> Result<Vec<CycleClass>, CycleError> {
    let f = site.morphism(arrow)?;
    let mut out = BTreeSet::new();
    for h in site.morphisms.values() {
        if h.src != f.dst {
            continue;
        }
        let c = BivariantCycle::new(CycleKind::MPrime, arrow, &h.id, Vec::new());
        if is_admissible(site, &c)? {
            out.insert(canonicalize(site, &c)?);
        }
    }
    Ok(out.into_iter().collect())
}

/// Enumerate oriented cycle classes: carriers as for `M`, bundle multisets
/// drawn from the basic bundles and their negations, with at most
/// `min(dim W, bound)` entries, restricted to the grade window.
pub fn enum_ob(
    site: &FiniteSite,
    arrow: &str,
    bound: usize,
    window: GradeWindow,
) -> Result<Vec<CycleClass>, CycleError> {
    let f = site.morphism(arrow)?;
    let mut out = BTreeSet::new();
    for h in site.morphisms.values() {
        if h.dst != f.src {
            continue;
        }
        let base = BivariantCycle::new(CycleKind::Ob, arrow, &h.id, Vec::new());
        if !is_admissible(site, &base)? {
            continue;
        }
        let dim = site.object(&h.src)?.dim.max(0) as usize;
        let cap = dim.min(bound);
        let rank = site.picard_rank(&h.src);
        let mut alphabet: Vec<BundleVec> = Vec::new();
        for k in 0..rank {
            let mut plus = vec![0i64; rank];
            plus[k] = 1;
            let mut minus = vec![0i64; rank];
            minus[k] = -1;
            alphabet.push(plus);
            alphabet.push(minus);
        }
        alphabet.sort();
        for multiset in multisets_up_to(&alphabet, cap) {
            let c = BivariantCycle::new(CycleKind::Ob, arrow, &h.id, multiset);
            let class = canonicalize(site, &c)?;
            if window.contains(class.grade) {
                out.insert(class);
            }
        }
    }
    Ok(out.into_iter().collect())
}

/// All multisets over the alphabet of size 0..=cap, each sorted.
pub fn multisets_up_to(alphabet: &[BundleVec], cap: usize) -> Vec<Vec<BundleVec>> {
    fn rec(
        alphabet: &[BundleVec],
        cap: usize,
        start: usize,
        cur: &mut Vec<BundleVec>,
        out: &mut Vec<Vec<BundleVec>>,
    ) {
        out.push(cur.clone());
        if cur.len() == cap {
            return;
        }
        for k in start..alphabet.len() {
            cur.push(alphabet[k].clone());
            rec(alphabet, cap, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(alphabet, cap, 0, &mut Vec::new(), &mut out);
    out
}
