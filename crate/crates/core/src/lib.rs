//! Exact computation with bivariant bordism theories over finite declared
//! geometric sites.
//!
//! The engine never touches floating point: group equality is decided by
//! Smith normal forms of integer relation matrices, the truncated universal
//! formal group law coefficient ring is presented degree by degree, and all
//! site structure (fiber squares, bundles, sections, degenerations) is user
//! declared data rather than computed geometry.

pub mod bivariant;
pub mod cycles;
pub mod groups;
pub mod lazard;
pub mod matrix;
pub mod quotients;
pub mod site;

pub use bivariant::{
    axiom_suite, contravariant_part, covariant_part, AxiomReport, AxiomResult, DualGenerator,
    Element, Relation, TensorKey, Theory, TheoryError, TheoryKind,
};
pub use cycles::{
    canonicalize, enum_m, enum_mprime, enum_ob, BivariantCycle, BundleVec, CycleClass, CycleError,
    CycleKind, GradeWindow,
};
pub use site::{FiniteSite, SiteError, SiteMorphism, SiteObject, Violation};

pub use groups::{GroupElement, GroupError, PresentedGroup, Witness};
pub use lazard::{FglSeries, LazardError, Monomial, RingElem, TruncatedLazardRing};
pub use matrix::{smith_normal_form, IntMatrix, SnfResult};
pub use quotients::{
    build_ob1, build_ob2, build_ob3, build_ob4, check_relation_stability, closure, dim_relations,
    dp_relations, fgl_relations, fundamental_class, sect_relations, DpRejection, RelationKind,
    RelationSet, StabilityReport,
};
