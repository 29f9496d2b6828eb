//! Finite declared geometric sites.
//!
//! A site is the engine's stand-in for a category of varieties: finitely many
//! objects and morphisms, a total composition table, flags on morphisms,
//! declared fiber and pushout squares, free Picard groups with pullback
//! matrices, section data and degeneration data. The loader resolves and
//! freezes everything; the validator reports structural violations without
//! throwing. Geometry is trusted input — only the algebraic bookkeeping is
//! checked.

use std::collections::{BTreeMap, BTreeSet};

use serde::Deserialize;
use thiserror::Error;

pub type ObjId = String;
pub type MorId = String;

#[derive(Debug, Error)]
pub enum SiteError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unsupported format version {0} (expected 1)")]
    Format(u64),
    #[error("dangling id {id} referenced by {context}")]
    DanglingId { id: String, context: String },
    #[error("duplicate id {0}")]
    DuplicateId(String),
    #[error("object {0} has no unambiguous identity morphism")]
    MissingIdentity(ObjId),
    #[error("no fiber square declared for ({f}, {g})")]
    MissingFiberSquare { f: MorId, g: MorId },
    #[error("no pushout square declared for ({h}, {g})")]
    MissingPushoutSquare { h: MorId, g: MorId },
    #[error("composite of {g} after {f} missing from composition table")]
    MissingComposite { f: MorId, g: MorId },
    #[error("bundle vector has rank {got}, object {object} has Picard rank {want}")]
    RankMismatch {
        object: ObjId,
        got: usize,
        want: usize,
    },
    #[error("site has no morphism {0}")]
    UnknownMorphism(MorId),
    #[error("site has no object {0}")]
    UnknownObject(ObjId),
    #[error("object {0} has no unique morphism to the final object")]
    NoStructureMap(ObjId),
}

// ---------------------------------------------------------------------------
// JSON schema (strict: unknown keys are rejected to keep goldens bit-exact)
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SiteDoc {
    format: u64,
    objects: Vec<ObjectDoc>,
    morphisms: Vec<MorphismDoc>,
    composition: Vec<[String; 3]>,
    #[serde(default)]
    fiber_squares: Vec<FiberSquareDoc>,
    #[serde(default)]
    pushout_squares: Vec<PushoutSquareDoc>,
    #[serde(default)]
    picard: PicardDoc,
    #[serde(default)]
    sections: Vec<SectionDoc>,
    #[serde(default)]
    degenerations: Vec<DegenerationDoc>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectDoc {
    id: String,
    dim: i64,
    smooth: bool,
    #[serde(default)]
    r#final: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MorphismDoc {
    id: String,
    src: String,
    dst: String,
    #[serde(default)]
    proper: bool,
    #[serde(default)]
    projective: bool,
    #[serde(default)]
    smooth: bool,
    #[serde(default)]
    closed_immersion: bool,
    #[serde(default)]
    inverse: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FiberSquareDoc {
    f: String,
    g: String,
    pullback: String,
    p1: String,
    p2: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PushoutSquareDoc {
    h: String,
    g: String,
    pushout: String,
    h_side: String,
    g_side: String,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct PicardDoc {
    #[serde(default)]
    basics: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pullbacks: BTreeMap<String, Vec<Vec<i64>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SectionDoc {
    object: String,
    bundle: Vec<i64>,
    zero_locus: String,
    inclusion: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DegenerationDoc {
    context: String,
    smooth_fiber: String,
    component_a: String,
    component_b: String,
    double_locus_bundle: String,
}

// ---------------------------------------------------------------------------
// Materialized site
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SiteObject {
    pub id: ObjId,
    pub dim: i64,
    pub smooth: bool,
    pub is_final: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SiteMorphism {
    pub id: MorId,
    pub src: ObjId,
    pub dst: ObjId,
    pub proper: bool,
    pub projective: bool,
    pub smooth: bool,
    pub closed_immersion: bool,
    pub inverse: Option<MorId>,
}

/// Declared fiber square over `(f: X -> Z, g: Y -> Z)`: the pullback object
/// with its two projections `p1: P -> X`, `p2: P -> Y`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiberSquare {
    pub f: MorId,
    pub g: MorId,
    pub pullback: ObjId,
    pub p1: MorId,
    pub p2: MorId,
}

/// Declared pushout square under `(h: Y -> W, g: Y -> Z)`: the pushout object
/// with the completing arrows `h_side: W -> Q`, `g_side: Z -> Q`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PushoutSquare {
    pub h: MorId,
    pub g: MorId,
    pub pushout: ObjId,
    pub h_side: MorId,
    pub g_side: MorId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SectionEntry {
    pub object: ObjId,
    pub bundle: Vec<i64>,
    pub zero_locus: ObjId,
    pub inclusion: MorId,
}

/// Declared degeneration quadruple into the context object: smooth fiber,
/// the two crossing components, and the projectivized bundle over the double
/// locus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegenerationEntry {
    pub context: ObjId,
    pub smooth_fiber: MorId,
    pub component_a: MorId,
    pub component_b: MorId,
    pub double_locus_bundle: MorId,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Violation {
    pub code: String,
    pub ids: Vec<String>,
    pub message: String,
}

impl Violation {
    fn new(code: &str, ids: &[&str], message: String) -> Self {
        Violation {
            code: code.to_string(),
            ids: ids.iter().map(|s| s.to_string()).collect(),
            message,
        }
    }
}

#[derive(Debug)]
pub struct FiniteSite {
    pub objects: BTreeMap<ObjId, SiteObject>,
    pub morphisms: BTreeMap<MorId, SiteMorphism>,
    /// (g, f) -> g∘f for every composable pair.
    pub composition: BTreeMap<(MorId, MorId), MorId>,
    pub identities: BTreeMap<ObjId, MorId>,
    pub fiber_squares: Vec<FiberSquare>,
    pub pushout_squares: Vec<PushoutSquare>,
    /// Basic bundle symbols per object (free Picard basis).
    pub picard_basics: BTreeMap<ObjId, Vec<String>>,
    /// Pullback matrix per morphism f: W -> X, mapping Pic(X) -> Pic(W);
    /// dimensions rank(W) x rank(X).
    pub picard_pullbacks: BTreeMap<MorId, Vec<Vec<i64>>>,
    pub sections: Vec<SectionEntry>,
    pub degenerations: Vec<DegenerationEntry>,
}

impl FiniteSite {
    pub fn load_str(text: &str) -> Result<FiniteSite, SiteError> {
        let doc: SiteDoc =
            serde_json::from_str(text).map_err(|e| SiteError::Parse(e.to_string()))?;
        Self::from_doc(doc)
    }

    fn from_doc(doc: SiteDoc) -> Result<FiniteSite, SiteError> {
        if doc.format != 1 {
            return Err(SiteError::Format(doc.format));
        }
        let mut objects = BTreeMap::new();
        for o in doc.objects {
            let obj = SiteObject {
                id: o.id.clone(),
                dim: o.dim,
                smooth: o.smooth,
                is_final: o.r#final,
            };
            if objects.insert(o.id.clone(), obj).is_some() {
                return Err(SiteError::DuplicateId(o.id));
            }
        }
        let mut morphisms = BTreeMap::new();
        for m in doc.morphisms {
            for (end, ctx) in [(&m.src, "src"), (&m.dst, "dst")] {
                if !objects.contains_key(end) {
                    return Err(SiteError::DanglingId {
                        id: end.clone(),
                        context: format!("morphism {} {ctx}", m.id),
                    });
                }
            }
            let mor = SiteMorphism {
                id: m.id.clone(),
                src: m.src,
                dst: m.dst,
                proper: m.proper,
                projective: m.projective,
                smooth: m.smooth,
                closed_immersion: m.closed_immersion,
                inverse: m.inverse,
            };
            if morphisms.insert(m.id.clone(), mor).is_some() {
                return Err(SiteError::DuplicateId(m.id));
            }
        }
        for m in morphisms.values() {
            if let Some(inv) = &m.inverse {
                if !morphisms.contains_key(inv) {
                    return Err(SiteError::DanglingId {
                        id: inv.clone(),
                        context: format!("inverse of {}", m.id),
                    });
                }
            }
        }
        let mut composition = BTreeMap::new();
        for [g, f, gf] in doc.composition {
            for id in [&g, &f, &gf] {
                if !morphisms.contains_key(id) {
                    return Err(SiteError::DanglingId {
                        id: id.clone(),
                        context: "composition table".into(),
                    });
                }
            }
            composition.insert((g, f), gf);
        }

        // Identities are inferred from the table: the unique e: O -> O that
        // is neutral on both sides for every declared composite.
        let mut identities = BTreeMap::new();
        for oid in objects.keys() {
            let mut candidates = Vec::new();
            'cand: for m in morphisms.values() {
                if &m.src != oid || &m.dst != oid {
                    continue;
                }
                for other in morphisms.values() {
                    if &other.dst == oid {
                        match composition.get(&(m.id.clone(), other.id.clone())) {
                            Some(c) if *c == other.id => {}
                            _ => continue 'cand,
                        }
                    }
                    if &other.src == oid {
                        match composition.get(&(other.id.clone(), m.id.clone())) {
                            Some(c) if *c == other.id => {}
                            _ => continue 'cand,
                        }
                    }
                }
                candidates.push(m.id.clone());
            }
            if candidates.len() != 1 {
                return Err(SiteError::MissingIdentity(oid.clone()));
            }
            identities.insert(oid.clone(), candidates.remove(0));
        }

        let mut fiber_squares = Vec::new();
        for s in doc.fiber_squares {
            for id in [&s.f, &s.g, &s.p1, &s.p2] {
                if !morphisms.contains_key(id) {
                    return Err(SiteError::DanglingId {
                        id: id.clone(),
                        context: "fiber square".into(),
                    });
                }
            }
            if !objects.contains_key(&s.pullback) {
                return Err(SiteError::DanglingId {
                    id: s.pullback.clone(),
                    context: "fiber square pullback object".into(),
                });
            }
            fiber_squares.push(FiberSquare {
                f: s.f,
                g: s.g,
                pullback: s.pullback,
                p1: s.p1,
                p2: s.p2,
            });
        }
        let mut pushout_squares = Vec::new();
        for s in doc.pushout_squares {
            for id in [&s.h, &s.g, &s.h_side, &s.g_side] {
                if !morphisms.contains_key(id) {
                    return Err(SiteError::DanglingId {
                        id: id.clone(),
                        context: "pushout square".into(),
                    });
                }
            }
            if !objects.contains_key(&s.pushout) {
                return Err(SiteError::DanglingId {
                    id: s.pushout.clone(),
                    context: "pushout square object".into(),
                });
            }
            pushout_squares.push(PushoutSquare {
                h: s.h,
                g: s.g,
                pushout: s.pushout,
                h_side: s.h_side,
                g_side: s.g_side,
            });
        }

        let mut picard_basics: BTreeMap<ObjId, Vec<String>> = BTreeMap::new();
        for (oid, basics) in doc.picard.basics {
            if !objects.contains_key(&oid) {
                return Err(SiteError::DanglingId {
                    id: oid,
                    context: "picard basics".into(),
                });
            }
            picard_basics.insert(oid, basics);
        }
        for oid in objects.keys() {
            picard_basics.entry(oid.clone()).or_default();
        }

        // Pullback matrices: declared ones are taken as-is; identities
        // default to the identity matrix; morphisms where either endpoint
        // has Picard rank zero are fully determined.
        let mut picard_pullbacks: BTreeMap<MorId, Vec<Vec<i64>>> = BTreeMap::new();
        for (mid, matrix) in doc.picard.pullbacks {
            if !morphisms.contains_key(&mid) {
                return Err(SiteError::DanglingId {
                    id: mid,
                    context: "picard pullbacks".into(),
                });
            }
            picard_pullbacks.insert(mid, matrix);
        }
        let identity_ids: BTreeSet<MorId> = identities.values().cloned().collect();
        for m in morphisms.values() {
            if picard_pullbacks.contains_key(&m.id) {
                continue;
            }
            let src_rank = picard_basics[&m.src].len();
            let dst_rank = picard_basics[&m.dst].len();
            let matrix = if identity_ids.contains(&m.id) {
                (0..src_rank)
                    .map(|i| (0..dst_rank).map(|j| i64::from(i == j)).collect())
                    .collect()
            } else if dst_rank == 0 || src_rank == 0 {
                vec![vec![0; dst_rank]; src_rank]
            } else {
                return Err(SiteError::Parse(format!(
                    "morphism {} needs an explicit picard pullback matrix",
                    m.id
                )));
            };
            picard_pullbacks.insert(m.id.clone(), matrix);
        }

        let mut sections = Vec::new();
        for s in doc.sections {
            if !objects.contains_key(&s.object) {
                return Err(SiteError::DanglingId {
                    id: s.object,
                    context: "section object".into(),
                });
            }
            if !objects.contains_key(&s.zero_locus) {
                return Err(SiteError::DanglingId {
                    id: s.zero_locus,
                    context: "section zero locus".into(),
                });
            }
            if !morphisms.contains_key(&s.inclusion) {
                return Err(SiteError::DanglingId {
                    id: s.inclusion,
                    context: "section inclusion".into(),
                });
            }
            sections.push(SectionEntry {
                object: s.object,
                bundle: s.bundle,
                zero_locus: s.zero_locus,
                inclusion: s.inclusion,
            });
        }
        let mut degenerations = Vec::new();
        for d in doc.degenerations {
            if !objects.contains_key(&d.context) {
                return Err(SiteError::DanglingId {
                    id: d.context,
                    context: "degeneration context".into(),
                });
            }
            for id in [
                &d.smooth_fiber,
                &d.component_a,
                &d.component_b,
                &d.double_locus_bundle,
            ] {
                if !morphisms.contains_key(id) {
                    return Err(SiteError::DanglingId {
                        id: id.clone(),
                        context: "degeneration morphism".into(),
                    });
                }
            }
            degenerations.push(DegenerationEntry {
                context: d.context,
                smooth_fiber: d.smooth_fiber,
                component_a: d.component_a,
                component_b: d.component_b,
                double_locus_bundle: d.double_locus_bundle,
            });
        }

        Ok(FiniteSite {
            objects,
            morphisms,
            composition,
            identities,
            fiber_squares,
            pushout_squares,
            picard_basics,
            picard_pullbacks,
            sections,
            degenerations,
        })
    }

    pub fn object(&self, id: &str) -> Result<&SiteObject, SiteError> {
        self.objects
            .get(id)
            .ok_or_else(|| SiteError::UnknownObject(id.to_string()))
    }

    pub fn morphism(&self, id: &str) -> Result<&SiteMorphism, SiteError> {
        self.morphisms
            .get(id)
            .ok_or_else(|| SiteError::UnknownMorphism(id.to_string()))
    }

    pub fn identity_of(&self, obj: &str) -> &MorId {
        &self.identities[obj]
    }

    pub fn is_identity(&self, mor: &str) -> bool {
        self.identities.values().any(|m| m == mor)
    }

    /// g after f, from the table.
    pub fn compose(&self, g: &str, f: &str) -> Result<&MorId, SiteError> {
        self.composition
            .get(&(g.to_string(), f.to_string()))
            .ok_or_else(|| SiteError::MissingComposite {
                f: f.to_string(),
                g: g.to_string(),
            })
    }

    pub fn final_object(&self) -> Option<&SiteObject> {
        self.objects.values().find(|o| o.is_final)
    }

    /// The unique morphism from `obj` to the final object.
    pub fn structure_map(&self, obj: &str) -> Result<&MorId, SiteError> {
        let fin = self
            .final_object()
            .ok_or_else(|| SiteError::NoStructureMap(obj.to_string()))?;
        let mut found = None;
        for m in self.morphisms.values() {
            if m.src == obj && m.dst == fin.id {
                if found.is_some() {
                    return Err(SiteError::NoStructureMap(obj.to_string()));
                }
                found = Some(&m.id);
            }
        }
        found.ok_or_else(|| SiteError::NoStructureMap(obj.to_string()))
    }

    /// Declared isomorphisms out of `obj` (morphisms with a declared
    /// inverse), identity included.
    pub fn isos_from(&self, obj: &str) -> Vec<&SiteMorphism> {
        self.morphisms
            .values()
            .filter(|m| m.src == obj && (m.inverse.is_some() || self.is_identity(&m.id)))
            .collect()
    }

    /// Fiber square lookup for `(f: X -> Z, g: Y -> Z)`. Identity squares
    /// are synthesized, the swapped key reuses the declared square with its
    /// legs exchanged, and anything else must be declared.
    pub fn fiber_square(&self, f: &str, g: &str) -> Result<FiberSquare, SiteError> {
        let fm = self.morphism(f)?;
        let gm = self.morphism(g)?;
        if self.is_identity(f) {
            // pullback of g along the identity is g itself
            return Ok(FiberSquare {
                f: f.to_string(),
                g: g.to_string(),
                pullback: gm.src.clone(),
                p1: g.to_string(),
                p2: self.identity_of(&gm.src).clone(),
            });
        }
        if self.is_identity(g) {
            return Ok(FiberSquare {
                f: f.to_string(),
                g: g.to_string(),
                pullback: fm.src.clone(),
                p1: self.identity_of(&fm.src).clone(),
                p2: f.to_string(),
            });
        }
        for sq in &self.fiber_squares {
            if sq.f == f && sq.g == g {
                return Ok(sq.clone());
            }
            if sq.f == g && sq.g == f {
                return Ok(FiberSquare {
                    f: f.to_string(),
                    g: g.to_string(),
                    pullback: sq.pullback.clone(),
                    p1: sq.p2.clone(),
                    p2: sq.p1.clone(),
                });
            }
        }
        Err(SiteError::MissingFiberSquare {
            f: f.to_string(),
            g: g.to_string(),
        })
    }

    /// Pushout square lookup for `(h: Y -> W, g: Y -> Z)`, dual to
    /// [`FiniteSite::fiber_square`].
    pub fn pushout_square(&self, h: &str, g: &str) -> Result<PushoutSquare, SiteError> {
        let hm = self.morphism(h)?;
        let gm = self.morphism(g)?;
        if self.is_identity(h) {
            return Ok(PushoutSquare {
                h: h.to_string(),
                g: g.to_string(),
                pushout: gm.dst.clone(),
                h_side: g.to_string(),
                g_side: self.identity_of(&gm.dst).clone(),
            });
        }
        if self.is_identity(g) {
            return Ok(PushoutSquare {
                h: h.to_string(),
                g: g.to_string(),
                pushout: hm.dst.clone(),
                h_side: self.identity_of(&hm.dst).clone(),
                g_side: h.to_string(),
            });
        }
        for sq in &self.pushout_squares {
            if sq.h == h && sq.g == g {
                return Ok(sq.clone());
            }
            if sq.h == g && sq.g == h {
                return Ok(PushoutSquare {
                    h: h.to_string(),
                    g: g.to_string(),
                    pushout: sq.pushout.clone(),
                    h_side: sq.g_side.clone(),
                    g_side: sq.h_side.clone(),
                });
            }
        }
        Err(SiteError::MissingPushoutSquare {
            h: h.to_string(),
            g: g.to_string(),
        })
    }

    pub fn picard_rank(&self, obj: &str) -> usize {
        self.picard_basics.get(obj).map_or(0, |b| b.len())
    }

    /// Pull a bundle vector over the target of `f` back to its source.
    pub fn pullback_bundle(&self, f: &str, bundle: &[i64]) -> Result<Vec<i64>, SiteError> {
        let m = self.morphism(f)?;
        let want = self.picard_rank(&m.dst);
        if bundle.len() != want {
            return Err(SiteError::RankMismatch {
                object: m.dst.clone(),
                got: bundle.len(),
                want,
            });
        }
        let matrix = &self.picard_pullbacks[&m.id];
        Ok(matrix
            .iter()
            .map(|row| row.iter().zip(bundle).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Confinedness test for the dual theory: every post-composition that is
    /// smooth forces the outer map to be smooth.
    pub fn mprime_confined(&self, f: &str) -> Result<bool, SiteError> {
        let fm = self.morphism(f)?;
        for g in self.morphisms.values() {
            if g.src != fm.dst {
                continue;
            }
            if let Some(gf) = self.composition.get(&(g.id.clone(), fm.id.clone())) {
                if self.morphisms[gf].smooth && !g.smooth {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    // -----------------------------------------------------------------------
    // Validation
    // -----------------------------------------------------------------------

    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        self.validate_objects(&mut out);
        self.validate_composition(&mut out);
        self.validate_flags(&mut out);
        self.validate_inverses(&mut out);
        self.validate_squares(&mut out);
        self.validate_picard(&mut out);
        self.validate_sections(&mut out);
        self.validate_pasting(&mut out);
        out.sort();
        out.dedup();
        out
    }

    fn validate_objects(&self, out: &mut Vec<Violation>) {
        let finals: Vec<&SiteObject> = self.objects.values().filter(|o| o.is_final).collect();
        if finals.len() != 1 {
            out.push(Violation::new(
                "final-object-count",
                &finals.iter().map(|o| o.id.as_str()).collect::<Vec<_>>(),
                format!("expected exactly one final object, found {}", finals.len()),
            ));
        }
        for o in finals {
            if o.dim != 0 || !o.smooth {
                out.push(Violation::new(
                    "final-object-shape",
                    &[&o.id],
                    "final object must be smooth of dimension 0".into(),
                ));
            }
        }
        for o in self.objects.values() {
            if o.dim < 0 {
                out.push(Violation::new(
                    "negative-dimension",
                    &[&o.id],
                    format!("object {} has negative dimension", o.id),
                ));
            }
        }
    }

    fn validate_composition(&self, out: &mut Vec<Violation>) {
        // type correctness of declared entries
        for ((g, f), gf) in &self.composition {
            let (gm, fm, cm) = (&self.morphisms[g], &self.morphisms[f], &self.morphisms[gf]);
            if fm.dst != gm.src || cm.src != fm.src || cm.dst != gm.dst {
                out.push(Violation::new(
                    "composition-typing",
                    &[g, f, gf],
                    format!("entry ({g}, {f}) -> {gf} is not type correct"),
                ));
            }
        }
        // totality
        for f in self.morphisms.values() {
            for g in self.morphisms.values() {
                if f.dst == g.src && !self.composition.contains_key(&(g.id.clone(), f.id.clone())) {
                    out.push(Violation::new(
                        "composition-missing",
                        &[&g.id, &f.id],
                        format!("no composite declared for {} after {}", g.id, f.id),
                    ));
                }
            }
        }
        // associativity, exhaustively over declared data
        for f in self.morphisms.values() {
            for g in self.morphisms.values() {
                if f.dst != g.src {
                    continue;
                }
                for h in self.morphisms.values() {
                    if g.dst != h.src {
                        continue;
                    }
                    let gf = self.composition.get(&(g.id.clone(), f.id.clone()));
                    let hg = self.composition.get(&(h.id.clone(), g.id.clone()));
                    if let (Some(gf), Some(hg)) = (gf, hg) {
                        let left = self.composition.get(&(h.id.clone(), gf.clone()));
                        let right = self.composition.get(&(hg.clone(), f.id.clone()));
                        match (left, right) {
                            (Some(a), Some(b)) if a == b => {}
                            _ => out.push(Violation::new(
                                "composition-associativity",
                                &[&h.id, &g.id, &f.id],
                                format!("associativity fails on ({}, {}, {})", h.id, g.id, f.id),
                            )),
                        }
                    }
                }
            }
        }
    }

    fn validate_flags(&self, out: &mut Vec<Violation>) {
        // identities carry all structure flags
        for (obj, id) in &self.identities {
            let m = &self.morphisms[id];
            if !(m.proper && m.projective && m.smooth) {
                out.push(Violation::new(
                    "identity-flags",
                    &[obj, id],
                    format!("identity of {obj} must be proper, projective and smooth"),
                ));
            }
        }
        // closure of proper/projective under composition
        for ((g, f), gf) in &self.composition {
            let (gm, fm, cm) = (&self.morphisms[g], &self.morphisms[f], &self.morphisms[gf]);
            if gm.proper && fm.proper && !cm.proper {
                out.push(Violation::new(
                    "proper-composition",
                    &[g, f, gf],
                    format!("composite {gf} of proper maps is not flagged proper"),
                ));
            }
            if gm.projective && fm.projective && !cm.projective {
                out.push(Violation::new(
                    "projective-composition",
                    &[g, f, gf],
                    format!("composite {gf} of projective maps is not flagged projective"),
                ));
            }
        }
        // base change along declared squares preserves proper/projective
        for sq in &self.fiber_squares {
            let f = &self.morphisms[&sq.f];
            let g = &self.morphisms[&sq.g];
            let p1 = &self.morphisms[&sq.p1];
            let p2 = &self.morphisms[&sq.p2];
            for (orig, pulled, name) in [(f, p2, "p2"), (g, p1, "p1")] {
                if orig.proper && !pulled.proper {
                    out.push(Violation::new(
                        "proper-base-change",
                        &[&sq.f, &sq.g, &pulled.id],
                        format!("{name} must inherit proper from {}", orig.id),
                    ));
                }
                if orig.projective && !pulled.projective {
                    out.push(Violation::new(
                        "projective-base-change",
                        &[&sq.f, &sq.g, &pulled.id],
                        format!("{name} must inherit projective from {}", orig.id),
                    ));
                }
            }
        }
    }

    fn validate_inverses(&self, out: &mut Vec<Violation>) {
        for m in self.morphisms.values() {
            let Some(inv) = &m.inverse else { continue };
            let im = &self.morphisms[inv];
            if im.src != m.dst || im.dst != m.src {
                out.push(Violation::new(
                    "inverse-typing",
                    &[&m.id, inv],
                    format!("inverse {inv} of {} has mismatched endpoints", m.id),
                ));
                continue;
            }
            let id_src = &self.identities[&m.src];
            let id_dst = &self.identities[&m.dst];
            let back = self.composition.get(&(inv.clone(), m.id.clone()));
            let forth = self.composition.get(&(m.id.clone(), inv.clone()));
            if back != Some(id_src) || forth != Some(id_dst) {
                out.push(Violation::new(
                    "inverse-composites",
                    &[&m.id, inv],
                    format!("composites of {} with {inv} are not identities", m.id),
                ));
            }
            if self.objects[&m.src].dim != self.objects[&m.dst].dim {
                out.push(Violation::new(
                    "inverse-dimension",
                    &[&m.id, inv],
                    format!(
                        "isomorphism {} connects objects of different dimension",
                        m.id
                    ),
                ));
            }
        }
    }

    fn validate_squares(&self, out: &mut Vec<Violation>) {
        for sq in &self.fiber_squares {
            let f = &self.morphisms[&sq.f];
            let g = &self.morphisms[&sq.g];
            let p1 = &self.morphisms[&sq.p1];
            let p2 = &self.morphisms[&sq.p2];
            if f.dst != g.dst
                || p1.src != sq.pullback
                || p2.src != sq.pullback
                || p1.dst != f.src
                || p2.dst != g.src
            {
                out.push(Violation::new(
                    "fiber-square-typing",
                    &[&sq.f, &sq.g],
                    format!("fiber square ({}, {}) is not type correct", sq.f, sq.g),
                ));
                continue;
            }
            let left = self.composition.get(&(sq.f.clone(), sq.p1.clone()));
            let right = self.composition.get(&(sq.g.clone(), sq.p2.clone()));
            match (left, right) {
                (Some(a), Some(b)) if a == b => {}
                _ => out.push(Violation::new(
                    "fiber-square-commutes",
                    &[&sq.f, &sq.g],
                    format!("fiber square ({}, {}) does not commute", sq.f, sq.g),
                )),
            }
        }
        for sq in &self.pushout_squares {
            let h = &self.morphisms[&sq.h];
            let g = &self.morphisms[&sq.g];
            let hs = &self.morphisms[&sq.h_side];
            let gs = &self.morphisms[&sq.g_side];
            if h.src != g.src
                || hs.src != h.dst
                || gs.src != g.dst
                || hs.dst != sq.pushout
                || gs.dst != sq.pushout
            {
                out.push(Violation::new(
                    "pushout-square-typing",
                    &[&sq.h, &sq.g],
                    format!("pushout square ({}, {}) is not type correct", sq.h, sq.g),
                ));
                continue;
            }
            let left = self.composition.get(&(sq.h_side.clone(), sq.h.clone()));
            let right = self.composition.get(&(sq.g_side.clone(), sq.g.clone()));
            match (left, right) {
                (Some(a), Some(b)) if a == b => {}
                _ => out.push(Violation::new(
                    "pushout-square-commutes",
                    &[&sq.h, &sq.g],
                    format!("pushout square ({}, {}) does not commute", sq.h, sq.g),
                )),
            }
        }
    }

    fn validate_picard(&self, out: &mut Vec<Violation>) {
        for m in self.morphisms.values() {
            let matrix = &self.picard_pullbacks[&m.id];
            let src_rank = self.picard_rank(&m.src);
            let dst_rank = self.picard_rank(&m.dst);
            if matrix.len() != src_rank || matrix.iter().any(|r| r.len() != dst_rank) {
                out.push(Violation::new(
                    "picard-matrix-shape",
                    &[&m.id],
                    format!(
                        "pullback matrix of {} must be {}x{}",
                        m.id, src_rank, dst_rank
                    ),
                ));
            }
        }
        // identity pullback is the identity matrix
        for id in self.identities.values() {
            let m = &self.morphisms[id];
            let rank = self.picard_rank(&m.src);
            let matrix = &self.picard_pullbacks[id];
            let is_id = matrix.len() == rank
                && matrix
                    .iter()
                    .enumerate()
                    .all(|(i, r)| r.iter().enumerate().all(|(j, &x)| x == i64::from(i == j)));
            if !is_id {
                out.push(Violation::new(
                    "picard-identity",
                    &[id],
                    format!("identity morphism {id} must pull bundles back unchanged"),
                ));
            }
        }
        // functoriality: (g after f)^* = f^* g^*
        for ((g, f), gf) in &self.composition {
            let (gm, fm) = (&self.morphisms[g], &self.morphisms[f]);
            if fm.dst != gm.src {
                continue;
            }
            let mf = &self.picard_pullbacks[f];
            let mg = &self.picard_pullbacks[g];
            let mc = &self.picard_pullbacks[gf];
            let src_rank = self.picard_rank(&fm.src);
            let mid_rank = self.picard_rank(&fm.dst);
            let dst_rank = self.picard_rank(&gm.dst);
            if mf.len() != src_rank
                || mg.len() != mid_rank
                || mc.len() != src_rank
                || mf.iter().any(|r| r.len() != mid_rank)
                || mg.iter().any(|r| r.len() != dst_rank)
                || mc.iter().any(|r| r.len() != dst_rank)
            {
                continue; // shape violation already reported
            }
            let mut prod = vec![vec![0i64; dst_rank]; src_rank];
            for i in 0..src_rank {
                for k in 0..mid_rank {
                    for j in 0..dst_rank {
                        prod[i][j] += mf[i][k] * mg[k][j];
                    }
                }
            }
            if &prod != mc {
                out.push(Violation::new(
                    "picard-functoriality",
                    &[g, f, gf],
                    format!("pullback of {gf} differs from composing pullbacks of {f} and {g}"),
                ));
            }
        }
    }

    fn validate_sections(&self, out: &mut Vec<Violation>) {
        for s in &self.sections {
            let inc = &self.morphisms[&s.inclusion];
            if !inc.closed_immersion {
                out.push(Violation::new(
                    "section-immersion",
                    &[&s.inclusion],
                    format!(
                        "section inclusion {} must be a closed immersion",
                        s.inclusion
                    ),
                ));
            }
            if inc.src != s.zero_locus || inc.dst != s.object {
                out.push(Violation::new(
                    "section-typing",
                    &[&s.inclusion],
                    format!(
                        "section inclusion {} must map {} into {}",
                        s.inclusion, s.zero_locus, s.object
                    ),
                ));
            }
            if s.bundle.len() != self.picard_rank(&s.object) {
                out.push(Violation::new(
                    "section-bundle-rank",
                    &[&s.object],
                    format!("section bundle over {} has the wrong rank", s.object),
                ));
            }
        }
    }

    /// Confined squares must paste: when two declared squares share an edge,
    /// the outside square they generate must itself be available, with the
    /// composite legs present in the table.
    fn validate_pasting(&self, out: &mut Vec<Violation>) {
        let squares: Vec<ConfinedSquare> = self.confined_squares();
        for s1 in &squares {
            for s2 in &squares {
                // s2 to the right of s1: s1.top: X -> X', s2.top: X' -> X''
                if s1.top_right == s2.top_left && s1.right == s2.left {
                    let top = self.composition.get(&(s2.top.clone(), s1.top.clone()));
                    let bottom = self
                        .composition
                        .get(&(s2.bottom.clone(), s1.bottom.clone()));
                    let (Some(top), Some(bottom)) = (top, bottom) else {
                        continue;
                    };
                    if !self.lookup_confined_square(top, &s1.left, &s2.right, bottom) {
                        out.push(Violation::new(
                            "square-pasting",
                            &[&s1.top, &s1.bottom, &s2.top, &s2.bottom],
                            format!(
                                "pasting of squares ({}, {}) and ({}, {}) is not declared",
                                s1.top, s1.bottom, s2.top, s2.bottom
                            ),
                        ));
                    }
                }
                // s2 below s1: s1.left: X -> Y, s2.left: Y -> Z
                if s1.bottom_left == s2.top_left
                    && s1.bottom_right == s2.top_right
                    && s1.bottom == s2.top
                {
                    let left = self.composition.get(&(s2.left.clone(), s1.left.clone()));
                    let right = self.composition.get(&(s2.right.clone(), s1.right.clone()));
                    let (Some(left), Some(right)) = (left, right) else {
                        continue;
                    };
                    if !self.lookup_confined_square(&s1.top, left, right, &s2.bottom) {
                        out.push(Violation::new(
                            "square-pasting",
                            &[&s1.top, &s1.bottom, &s2.top, &s2.bottom],
                            format!(
                                "vertical pasting of squares ({}, {}) and ({}, {}) is not declared",
                                s1.top, s1.bottom, s2.top, s2.bottom
                            ),
                        ));
                    }
                }
            }
        }
    }

    /// All confined squares the engine will use for pullbacks: both
    /// orientations of every declared fiber square. Identity squares are not
    /// listed; lookups synthesize them.
    pub fn confined_squares(&self) -> Vec<ConfinedSquare> {
        let mut out = Vec::new();
        for sq in &self.fiber_squares {
            let f = &self.morphisms[&sq.f];
            let g = &self.morphisms[&sq.g];
            out.push(ConfinedSquare {
                top: sq.p2.clone(),
                left: sq.p1.clone(),
                right: sq.g.clone(),
                bottom: sq.f.clone(),
                top_left: sq.pullback.clone(),
                top_right: g.src.clone(),
                bottom_left: f.src.clone(),
                bottom_right: f.dst.clone(),
            });
            out.push(ConfinedSquare {
                top: sq.p1.clone(),
                left: sq.p2.clone(),
                right: sq.f.clone(),
                bottom: sq.g.clone(),
                top_left: sq.pullback.clone(),
                top_right: f.src.clone(),
                bottom_left: g.src.clone(),
                bottom_right: g.dst.clone(),
            });
        }
        out.sort();
        out.dedup();
        out
    }

    fn lookup_confined_square(&self, top: &str, left: &str, right: &str, bottom: &str) -> bool {
        self.find_confined_square(top, left, right, bottom)
            .is_some()
    }

    /// Resolve a confined square by its four edges: one of the two
    /// always-available identity forms, or a declared orientation.
    pub fn find_confined_square(
        &self,
        top: &str,
        left: &str,
        right: &str,
        bottom: &str,
    ) -> Option<ConfinedSquare> {
        if self.is_identity(top) && self.is_identity(bottom) && left == right {
            let sq = ConfinedSquare::identity_over(self, &left.to_string());
            if sq.top == top && sq.bottom == bottom {
                return Some(sq);
            }
        }
        if self.is_identity(left) && self.is_identity(right) && top == bottom {
            let sq = ConfinedSquare::identity_legs(self, &top.to_string());
            if sq.left == left && sq.right == right {
                return Some(sq);
            }
        }
        self.confined_squares()
            .into_iter()
            .find(|s| s.top == top && s.left == left && s.right == right && s.bottom == bottom)
    }
}

/// A confined square in pullback orientation: `top: X -> X'` over
/// `bottom: Y -> Y'` with vertical legs `left: X -> Y`, `right: X' -> Y'`.
/// Pullback along it maps elements over the right leg to elements over the
/// left leg.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ConfinedSquare {
    pub top: MorId,
    pub left: MorId,
    pub right: MorId,
    pub bottom: MorId,
    pub top_left: ObjId,
    pub top_right: ObjId,
    pub bottom_left: ObjId,
    pub bottom_right: ObjId,
}

impl ConfinedSquare {
    /// Identity square over a vertical leg.
    pub fn identity_over(site: &FiniteSite, leg: &MorId) -> ConfinedSquare {
        let m = &site.morphisms[leg];
        ConfinedSquare {
            top: site.identity_of(&m.src).clone(),
            left: leg.clone(),
            right: leg.clone(),
            bottom: site.identity_of(&m.dst).clone(),
            top_left: m.src.clone(),
            top_right: m.src.clone(),
            bottom_left: m.dst.clone(),
            bottom_right: m.dst.clone(),
        }
    }

    /// Square with a horizontal arrow doubled and identity vertical legs.
    pub fn identity_legs(site: &FiniteSite, arrow: &MorId) -> ConfinedSquare {
        let m = &site.morphisms[arrow];
        ConfinedSquare {
            top: arrow.clone(),
            left: site.identity_of(&m.src).clone(),
            right: site.identity_of(&m.dst).clone(),
            bottom: arrow.clone(),
            top_left: m.src.clone(),
            top_right: m.dst.clone(),
            bottom_left: m.src.clone(),
            bottom_right: m.dst.clone(),
        }
    }
}
