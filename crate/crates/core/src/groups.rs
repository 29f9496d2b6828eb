//! Finitely presented graded abelian groups.
//!
//! A group is a family of grades; each grade carries generator labels and a
//! relation matrix whose rows are integer combinations of those generators.
//! Relations never mix grades. Smith data is computed once per grade and
//! drives normal forms, membership tests and invariant reports.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::matrix::{smith_normal_form, IntMatrix, SnfResult};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GroupError {
    #[error("grade {0} not present in group")]
    UnknownGrade(i64),
    #[error("element references generator {index} but grade {grade} has {count} generators")]
    BadIndex {
        grade: i64,
        index: usize,
        count: usize,
    },
    #[error("elements of mixed grades: {0} vs {1}")]
    GradeMismatch(i64, i64),
}

/// Sparse element of a single grade.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GroupElement {
    pub grade: i64,
    pub coeffs: BTreeMap<usize, BigInt>,
}

impl GroupElement {
    pub fn zero(grade: i64) -> Self {
        GroupElement {
            grade,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn generator(grade: i64, index: usize) -> Self {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(index, BigInt::one());
        GroupElement { grade, coeffs }
    }

    pub fn from_coeffs(grade: i64, pairs: impl IntoIterator<Item = (usize, BigInt)>) -> Self {
        let mut e = GroupElement::zero(grade);
        for (i, c) in pairs {
            e.add_term(i, c);
        }
        e
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn add_term(&mut self, index: usize, c: BigInt) {
        if c.is_zero() {
            return;
        }
        let entry = self.coeffs.entry(index).or_insert_with(BigInt::zero);
        *entry += c;
        if entry.is_zero() {
            self.coeffs.remove(&index);
        }
    }

    pub fn add(&self, other: &GroupElement) -> Result<GroupElement, GroupError> {
        if self.grade != other.grade {
            return Err(GroupError::GradeMismatch(self.grade, other.grade));
        }
        let mut out = self.clone();
        for (i, c) in &other.coeffs {
            out.add_term(*i, c.clone());
        }
        Ok(out)
    }

    pub fn neg(&self) -> GroupElement {
        GroupElement {
            grade: self.grade,
            coeffs: self.coeffs.iter().map(|(i, c)| (*i, -c)).collect(),
        }
    }

    pub fn scale(&self, k: &BigInt) -> GroupElement {
        if k.is_zero() {
            return GroupElement::zero(self.grade);
        }
        GroupElement {
            grade: self.grade,
            coeffs: self.coeffs.iter().map(|(i, c)| (*i, c * k)).collect(),
        }
    }

    fn to_dense(&self, n: usize) -> Vec<BigInt> {
        let mut v = vec![BigInt::zero(); n];
        for (i, c) in &self.coeffs {
            v[*i] = c.clone();
        }
        v
    }

    fn from_dense(grade: i64, v: Vec<BigInt>) -> Self {
        let mut coeffs = BTreeMap::new();
        for (i, c) in v.into_iter().enumerate() {
            if !c.is_zero() {
                coeffs.insert(i, c);
            }
        }
        GroupElement { grade, coeffs }
    }
}

#[derive(Debug, Clone)]
struct GradePart {
    labels: Vec<String>,
    relations: IntMatrix,
    smith: SnfResult,
}

impl GradePart {
    fn new(labels: Vec<String>, relations: IntMatrix) -> Self {
        assert_eq!(relations.cols(), labels.len());
        let smith = smith_normal_form(&relations);
        GradePart {
            labels,
            relations,
            smith,
        }
    }
}

/// Witness for a positive membership answer: exact integer coefficients over
/// the span followed by coefficients over the grade's relation rows, with
/// `v = sum(span_coeffs * span) + sum(relation_coeffs * relations)` exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    pub span_coeffs: Vec<BigInt>,
    pub relation_coeffs: Vec<BigInt>,
}

#[derive(Debug, Clone)]
pub struct PresentedGroup {
    grades: BTreeMap<i64, GradePart>,
}

impl PresentedGroup {
    /// Build from per-grade generator labels and relation rows (each row a
    /// dense vector over that grade's generators).
    pub fn new(parts: BTreeMap<i64, (Vec<String>, Vec<Vec<BigInt>>)>) -> Self {
        let grades = parts
            .into_iter()
            .map(|(g, (labels, rel_rows))| {
                let n = labels.len();
                let rows = rel_rows.len();
                let m = if rows == 0 {
                    IntMatrix::zero(0, n)
                } else {
                    IntMatrix::from_rows(rel_rows)
                };
                assert_eq!(m.cols(), n, "relation width mismatch in grade {g}");
                (g, GradePart::new(labels, m))
            })
            .collect();
        PresentedGroup { grades }
    }

    /// Free group on the given labels per grade.
    pub fn free(parts: BTreeMap<i64, Vec<String>>) -> Self {
        Self::new(
            parts
                .into_iter()
                .map(|(g, labels)| (g, (labels, Vec::new())))
                .collect(),
        )
    }

    pub fn grades(&self) -> impl Iterator<Item = i64> + '_ {
        self.grades.keys().copied()
    }

    pub fn labels(&self, grade: i64) -> Result<&[String], GroupError> {
        self.grades
            .get(&grade)
            .map(|p| p.labels.as_slice())
            .ok_or(GroupError::UnknownGrade(grade))
    }

    pub fn generator_count(&self, grade: i64) -> Result<usize, GroupError> {
        Ok(self.labels(grade)?.len())
    }

    fn part(&self, grade: i64) -> Result<&GradePart, GroupError> {
        self.grades
            .get(&grade)
            .ok_or(GroupError::UnknownGrade(grade))
    }

    fn check_element(&self, v: &GroupElement) -> Result<&GradePart, GroupError> {
        let part = self.part(v.grade)?;
        if let Some((&i, _)) = v.coeffs.iter().next_back() {
            if i >= part.labels.len() {
                return Err(GroupError::BadIndex {
                    grade: v.grade,
                    index: i,
                    count: part.labels.len(),
                });
            }
        }
        Ok(part)
    }

    /// Free rank and torsion coefficients (in divisibility order, with unit
    /// factors suppressed) of one grade.
    pub fn invariants(&self, grade: i64) -> Result<(usize, Vec<BigInt>), GroupError> {
        let part = self.part(grade)?;
        let facs = part.smith.invariant_factors();
        let rank = part.labels.len() - facs.len();
        let torsion = facs.into_iter().filter(|f| !f.is_one()).collect();
        Ok((rank, torsion))
    }

    /// Quotient by additional homogeneous relations; labels are preserved.
    pub fn quotient(&self, new_relations: &[GroupElement]) -> Result<PresentedGroup, GroupError> {
        let mut extra: BTreeMap<i64, Vec<Vec<BigInt>>> = BTreeMap::new();
        for r in new_relations {
            let part = self.check_element(r)?;
            extra
                .entry(r.grade)
                .or_default()
                .push(r.to_dense(part.labels.len()));
        }
        let grades = self
            .grades
            .iter()
            .map(|(g, part)| {
                let mut rows: Vec<Vec<BigInt>> = (0..part.relations.rows())
                    .map(|i| part.relations.row(i).to_vec())
                    .collect();
                if let Some(more) = extra.get(g) {
                    rows.extend(more.iter().cloned());
                }
                let m = if rows.is_empty() {
                    IntMatrix::zero(0, part.labels.len())
                } else {
                    IntMatrix::from_rows(rows)
                };
                (*g, GradePart::new(part.labels.clone(), m))
            })
            .collect();
        Ok(PresentedGroup { grades })
    }

    /// Canonical representative of `v` modulo the relation subgroup.
    ///
    /// In diagonal coordinates `w = v * V` the relation lattice is spanned by
    /// `d_i * e_i`, so each `w_i` is reduced into `[0, d_i)`; the result maps
    /// back through `V^{-1}`.
    pub fn normal_form(&self, v: &GroupElement) -> Result<GroupElement, GroupError> {
        let part = self.check_element(v)?;
        let n = part.labels.len();
        if n == 0 {
            return Ok(GroupElement::zero(v.grade));
        }
        let dense = v.to_dense(n);
        let mut w = IntMatrix::vec_mul(&dense, &part.smith.v);
        let facs = part.smith.invariant_factors();
        for (i, d) in facs.iter().enumerate() {
            w[i] = w[i].mod_floor(d);
        }
        let back = IntMatrix::vec_mul(&w, &part.smith.vinv);
        Ok(GroupElement::from_dense(v.grade, back))
    }

    pub fn is_zero_in_quotient(&self, v: &GroupElement) -> Result<bool, GroupError> {
        Ok(self.normal_form(v)?.is_zero())
    }

    /// Decide whether `v` lies in the subgroup generated by `span` together
    /// with the grade's relations; on success the witness reconstructs `v`
    /// exactly.
    pub fn membership(
        &self,
        v: &GroupElement,
        span: &[GroupElement],
    ) -> Result<Option<Witness>, GroupError> {
        let part = self.check_element(v)?;
        for s in span {
            if s.grade != v.grade {
                return Err(GroupError::GradeMismatch(v.grade, s.grade));
            }
            self.check_element(s)?;
        }
        let n = part.labels.len();
        let s = span.len();
        let m = part.relations.rows();
        if n == 0 {
            return Ok(Some(Witness {
                span_coeffs: vec![BigInt::zero(); s],
                relation_coeffs: vec![BigInt::zero(); m],
            }));
        }
        // Stack span rows over relation rows and solve x * A = v over Z.
        let mut rows: Vec<Vec<BigInt>> = span.iter().map(|e| e.to_dense(n)).collect();
        for i in 0..m {
            rows.push(part.relations.row(i).to_vec());
        }
        let a = if rows.is_empty() {
            IntMatrix::zero(0, n)
        } else {
            IntMatrix::from_rows(rows)
        };
        let snf = smith_normal_form(&a);
        let w = IntMatrix::vec_mul(&v.to_dense(n), &snf.v);
        let facs = snf.invariant_factors();
        let k = facs.len();
        let total = s + m;
        let mut y = vec![BigInt::zero(); total];
        for (i, wi) in w.iter().enumerate() {
            if i < k {
                let (q, r) = wi.div_rem(&facs[i]);
                if !r.is_zero() {
                    return Ok(None);
                }
                y[i] = q;
            } else if !wi.is_zero() {
                return Ok(None);
            }
        }
        let x = IntMatrix::vec_mul(&y, &snf.u);
        Ok(Some(Witness {
            span_coeffs: x[..s].to_vec(),
            relation_coeffs: x[s..].to_vec(),
        }))
    }
}
