//! Data model for the background knowledge base: parameterized atoms,
//! schemata with contingency-table templates, type declarations and priors.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

/// A bare name. Constants start with a lowercase letter, parameters with an
/// uppercase letter; the rest is letters, digits and underscore.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Identifier(String);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid identifier {0:?}: must start with a letter and contain only letters, digits and '_'")]
pub struct InvalidIdentifier(pub String);

impl Identifier {
    pub fn new(text: &str) -> Result<Self, InvalidIdentifier> {
        let mut chars = text.chars();
        let ok = match chars.next() {
            Some(c) if c.is_ascii_alphabetic() => {
                chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
            }
            _ => false,
        };
        if ok {
            Ok(Identifier(text.to_owned()))
        } else {
            Err(InvalidIdentifier(text.to_owned()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Parameters are capitalized.
    pub fn is_parameter(&self) -> bool {
        self.0.chars().next().is_some_and(|c| c.is_ascii_uppercase())
    }

    pub fn is_constant(&self) -> bool {
        !self.is_parameter()
    }
}

impl fmt::Display for Identifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Convenience for tests and internal construction; panics on invalid text.
pub fn ident(text: &str) -> Identifier {
    Identifier::new(text).expect("valid identifier")
}

/// A predicate applied to a mix of constants and parameters.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SchemaAtom {
    pub predicate: Identifier,
    pub args: Vec<Identifier>,
}

impl SchemaAtom {
    pub fn new(predicate: Identifier, args: Vec<Identifier>) -> Self {
        debug_assert!(predicate.is_constant());
        SchemaAtom { predicate, args }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    /// The set of parameter identifiers among the arguments.
    pub fn params(&self) -> BTreeSet<Identifier> {
        self.args.iter().filter(|a| a.is_parameter()).cloned().collect()
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(|a| a.is_constant())
    }

    /// Substitutes constants for parameters. Every parameter of the atom must
    /// be in the substitution's domain.
    pub fn instantiate(&self, sub: &Substitution) -> GroundAtom {
        let args = self
            .args
            .iter()
            .map(|a| {
                if a.is_parameter() {
                    sub.get(a).expect("substitution covers all parameters").clone()
                } else {
                    a.clone()
                }
            })
            .collect();
        GroundAtom { predicate: self.predicate.clone(), args }
    }
}

impl fmt::Display for SchemaAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.predicate)?;
        if !self.args.is_empty() {
            write!(f, "(")?;
            for (i, a) in self.args.iter().enumerate() {
                if i > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{a}")?;
            }
            write!(f, ")")?;
        }
        Ok(())
    }
}

/// A fully instantiated atom: a proposition usable as a network node.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroundAtom {
    pub predicate: Identifier,
    pub args: Vec<Identifier>,
}

impl GroundAtom {
    pub fn new(predicate: Identifier, args: Vec<Identifier>) -> Self {
        debug_assert!(args.iter().all(|a| a.is_constant()));
        GroundAtom { predicate, args }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }
}

impl fmt::Display for GroundAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.predicate)?;
        if !self.args.is_empty() {
            write!(f, "(")?;
            for (i, a) in self.args.iter().enumerate() {
                if i > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{a}")?;
            }
            write!(f, ")")?;
        }
        Ok(())
    }
}

/// Maps schema parameters to the constants instantiating them.
pub type Substitution = BTreeMap<Identifier, Identifier>;

/// A named set of individuals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeDecl {
    pub name: Identifier,
    pub members: Vec<Identifier>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum QuantifierKind {
    Exists,
    Forall,
}

impl fmt::Display for QuantifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QuantifierKind::Exists => f.write_str("exists"),
            QuantifierKind::Forall => f.write_str("forall"),
        }
    }
}

/// A quantified parent term `exists X in type . a(X)` / `forall X in type . a(X)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct QuantifierRef {
    pub kind: QuantifierKind,
    pub bound: Identifier,
    pub type_name: Identifier,
    pub body: SchemaAtom,
}

impl fmt::Display for QuantifierRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} in {} . {}", self.kind, self.bound, self.type_name, self.body)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ParentRef {
    Atom(SchemaAtom),
    Quantifier(QuantifierRef),
}

impl fmt::Display for ParentRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParentRef::Atom(a) => write!(f, "{a}"),
            ParentRef::Quantifier(q) => write!(f, "{q}"),
        }
    }
}

/// A contingency-table template: each row maps a full truth assignment over
/// the schema's parents (in order) to P(child = true | assignment).
/// P(false | .) is the complement.
#[derive(Debug, Clone, PartialEq)]
pub struct CptTemplate {
    pub rows: BTreeMap<Vec<bool>, f64>,
}

impl CptTemplate {
    pub fn empty() -> Self {
        CptTemplate { rows: BTreeMap::new() }
    }

    pub fn is_complete(&self, parent_count: usize) -> bool {
        self.rows.len() == (1usize << parent_count)
            && self.rows.keys().all(|k| k.len() == parent_count)
    }
}

/// A parameterized dependency statement `parents -> child` plus its table.
#[derive(Debug, Clone, PartialEq)]
pub struct Schema {
    pub parents: Vec<ParentRef>,
    pub child: SchemaAtom,
    pub cpt: CptTemplate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Unique,
    RightMultiple,
    LeftMultiple,
    Quantified,
}

impl Schema {
    pub fn quantifier(&self) -> Option<&QuantifierRef> {
        self.parents.iter().find_map(|p| match p {
            ParentRef::Quantifier(q) => Some(q),
            ParentRef::Atom(_) => None,
        })
    }

    /// Parameters of the parent side; for a quantifier the bound parameter is
    /// excluded (it is expanded over the type, not substituted).
    pub fn parent_params(&self) -> BTreeSet<Identifier> {
        let mut out = BTreeSet::new();
        for p in &self.parents {
            match p {
                ParentRef::Atom(a) => out.extend(a.params()),
                ParentRef::Quantifier(q) => {
                    let mut ps = q.body.params();
                    ps.remove(&q.bound);
                    out.extend(ps);
                }
            }
        }
        out
    }

    /// All parameters requiring a substitution when grounding this schema.
    pub fn free_params(&self) -> BTreeSet<Identifier> {
        let mut out = self.parent_params();
        out.extend(self.child.params());
        out
    }
}

/// Classifies a schema by where its parameters occur. The parent side is the
/// left side of the arrow, the child the right.
pub fn classify(schema: &Schema) -> Classification {
    if schema.quantifier().is_some() {
        return Classification::Quantified;
    }
    let left = schema.parent_params();
    let right = schema.child.params();
    if left.iter().any(|p| !right.contains(p)) {
        Classification::LeftMultiple
    } else if right.iter().any(|p| !left.contains(p)) {
        Classification::RightMultiple
    } else {
        Classification::Unique
    }
}

/// A prior probability for a (possibly parameterized) root atom.
#[derive(Debug, Clone, PartialEq)]
pub struct Prior {
    pub atom: SchemaAtom,
    pub p_true: f64,
}

/// The static background knowledge: type declarations, schemata and priors,
/// plus individuals declared outside any type.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct KnowledgeBase {
    pub types: Vec<TypeDecl>,
    pub schemata: Vec<Schema>,
    pub priors: Vec<Prior>,
    pub extra_individuals: BTreeSet<Identifier>,
}

impl KnowledgeBase {
    pub fn type_decl(&self, name: &Identifier) -> Option<&TypeDecl> {
        self.types.iter().find(|t| &t.name == name)
    }

    /// The global individual pool: the union of all type members and the
    /// extra individuals, sorted.
    pub fn individual_pool(&self) -> Vec<Identifier> {
        let mut pool: BTreeSet<Identifier> = self.extra_individuals.clone();
        for t in &self.types {
            pool.extend(t.members.iter().cloned());
        }
        pool.into_iter().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagnosticCode {
    IncompleteCpt,
    ProbabilityOutOfRange,
    AmbiguousHead,
    UndeclaredQuantifierType,
    LeftMultipleRequiresQuantifier,
    PriorOnSchemaChild,
    UndefinedParent,
    DuplicateTypeName,
    DuplicatePrior,
    MalformedQuantifier,
}

/// A knowledge-base-level problem found by [`validate_kb`].
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub code: DiagnosticCode,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.code, self.message)
    }
}

/// True when `inner` can stand for `outer` under some parameter substitution:
/// same predicate and arity, and constant positions agree.
fn atom_covers(template: &SchemaAtom, atom: &SchemaAtom) -> bool {
    template.predicate == atom.predicate
        && template.arity() == atom.arity()
        && template.args.iter().zip(&atom.args).all(|(t, a)| {
            t.is_parameter() || a.is_parameter() || t == a
        })
}

/// Checks a knowledge base for structural problems. An empty result means the
/// KB is ready for grounding.
pub fn validate_kb(kb: &KnowledgeBase) -> Vec<Diagnostic> {
    let mut out = Vec::new();

    let mut seen_types = BTreeSet::new();
    for t in &kb.types {
        if !seen_types.insert(t.name.clone()) {
            out.push(Diagnostic {
                code: DiagnosticCode::DuplicateTypeName,
                message: format!("type `{}` is declared more than once", t.name),
            });
        }
    }

    // Ambiguous heads: two schemata whose children share predicate and arity.
    let mut heads: BTreeMap<(Identifier, usize), usize> = BTreeMap::new();
    for s in &kb.schemata {
        *heads.entry((s.child.predicate.clone(), s.child.arity())).or_insert(0) += 1;
    }
    for ((pred, arity), n) in &heads {
        if *n > 1 {
            out.push(Diagnostic {
                code: DiagnosticCode::AmbiguousHead,
                message: format!("{n} schemata define a child with head {pred}/{arity}"),
            });
        }
    }

    for s in &kb.schemata {
        let quantified = s.quantifier().is_some();
        if quantified {
            let q = s.quantifier().unwrap();
            if s.parents.len() != 1 {
                out.push(Diagnostic {
                    code: DiagnosticCode::MalformedQuantifier,
                    message: format!(
                        "schema for `{}` mixes a quantified parent with other parents",
                        s.child
                    ),
                });
            }
            if !q.body.params().contains(&q.bound) {
                out.push(Diagnostic {
                    code: DiagnosticCode::MalformedQuantifier,
                    message: format!(
                        "bound parameter {} does not occur in the body {}",
                        q.bound, q.body
                    ),
                });
            }
            if kb.type_decl(&q.type_name).is_none() {
                out.push(Diagnostic {
                    code: DiagnosticCode::UndeclaredQuantifierType,
                    message: format!("quantifier references undeclared type `{}`", q.type_name),
                });
            }
            // Free body parameters behave like left-multiple parameters.
            let mut free = q.body.params();
            free.remove(&q.bound);
            let child_params = s.child.params();
            if free.iter().any(|p| !child_params.contains(p)) {
                out.push(Diagnostic {
                    code: DiagnosticCode::LeftMultipleRequiresQuantifier,
                    message: format!(
                        "schema for `{}` has free parent parameters missing from the child; \
                         bind them with exists/forall",
                        s.child
                    ),
                });
            }
        } else if classify(s) == Classification::LeftMultiple {
            out.push(Diagnostic {
                code: DiagnosticCode::LeftMultipleRequiresQuantifier,
                message: format!(
                    "schema `{} -> {}` is left-multiple; a parent parameter not occurring \
                     in the child must be bound with exists/forall",
                    s.parents.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(", "),
                    s.child
                ),
            });
        }

        if !s.cpt.is_complete(s.parents.len()) {
            out.push(Diagnostic {
                code: DiagnosticCode::IncompleteCpt,
                message: format!(
                    "schema for `{}` has {} rows; {} parents require {} rows",
                    s.child,
                    s.cpt.rows.len(),
                    s.parents.len(),
                    1usize << s.parents.len()
                ),
            });
        }
        for (row, p) in &s.cpt.rows {
            if !(0.0..=1.0).contains(p) {
                out.push(Diagnostic {
                    code: DiagnosticCode::ProbabilityOutOfRange,
                    message: format!(
                        "row {row:?} of schema for `{}` has probability {p}",
                        s.child
                    ),
                });
            }
        }
    }

    let mut seen_priors: BTreeMap<(Identifier, usize), usize> = BTreeMap::new();
    for pr in &kb.priors {
        if !(0.0..=1.0).contains(&pr.p_true) {
            out.push(Diagnostic {
                code: DiagnosticCode::ProbabilityOutOfRange,
                message: format!("prior for `{}` has probability {}", pr.atom, pr.p_true),
            });
        }
        if kb.schemata.iter().any(|s| atom_covers(&s.child, &pr.atom)) {
            out.push(Diagnostic {
                code: DiagnosticCode::PriorOnSchemaChild,
                message: format!("`{}` has a prior but is also a schema child", pr.atom),
            });
        }
        *seen_priors.entry((pr.atom.predicate.clone(), pr.atom.arity())).or_insert(0) += 1;
    }
    for ((pred, arity), n) in &seen_priors {
        if *n > 1 {
            out.push(Diagnostic {
                code: DiagnosticCode::DuplicatePrior,
                message: format!("{n} priors declared for {pred}/{arity}"),
            });
        }
    }

    // Every parent atom (and quantifier body) needs a defining schema or prior.
    for s in &kb.schemata {
        let mut check = |atom: &SchemaAtom| {
            let defined = kb.schemata.iter().any(|d| atom_covers(&d.child, atom))
                || kb.priors.iter().any(|p| atom_covers(&p.atom, atom));
            if !defined {
                out.push(Diagnostic {
                    code: DiagnosticCode::UndefinedParent,
                    message: format!(
                        "parent `{atom}` of schema for `{}` has neither a defining schema \
                         nor a prior",
                        s.child
                    ),
                });
            }
        };
        for p in &s.parents {
            match p {
                ParentRef::Atom(a) => check(a),
                ParentRef::Quantifier(q) => check(&q.body),
            }
        }
    }

    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atom(pred: &str, args: &[&str]) -> SchemaAtom {
        SchemaAtom::new(ident(pred), args.iter().map(|a| ident(a)).collect())
    }

    fn two_row_cpt(t: f64, f: f64) -> CptTemplate {
        let mut rows = BTreeMap::new();
        rows.insert(vec![true], t);
        rows.insert(vec![false], f);
        CptTemplate { rows }
    }

    fn plain(parents: &[SchemaAtom], child: SchemaAtom) -> Schema {
        let n = parents.len();
        let mut rows = BTreeMap::new();
        for mask in 0..1usize << n {
            let key: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
            rows.insert(key, 0.5);
        }
        Schema {
            parents: parents.iter().cloned().map(ParentRef::Atom).collect(),
            child,
            cpt: CptTemplate { rows },
        }
    }

    #[test]
    fn identifier_case_convention() {
        assert!(ident("fire").is_constant());
        assert!(ident("X").is_parameter());
        assert!(ident("Board_member2").is_parameter());
        assert!(Identifier::new("").is_err());
        assert!(Identifier::new("2x").is_err());
        assert!(Identifier::new("a-b").is_err());
    }

    #[test]
    fn classify_unique() {
        // a(X), b -> c(X)
        let s = plain(&[atom("a", &["X"]), atom("b", &[])], atom("c", &["X"]));
        assert_eq!(classify(&s), Classification::Unique);
        // burglary, earthquake -> alarm_sound
        let s = plain(
            &[atom("burglary", &[]), atom("earthquake", &[])],
            atom("alarm_sound", &[]),
        );
        assert_eq!(classify(&s), Classification::Unique);
    }

    #[test]
    fn classify_right_multiple() {
        // a, b -> c(Y)
        let s = plain(&[atom("a", &[]), atom("b", &[])], atom("c", &["Y"]));
        assert_eq!(classify(&s), Classification::RightMultiple);
    }

    #[test]
    fn classify_left_multiple() {
        // a(X) -> b
        let s = plain(&[atom("a", &["X"])], atom("b", &[]));
        assert_eq!(classify(&s), Classification::LeftMultiple);
        // both-sided extras report LeftMultiple
        let s = plain(&[atom("a", &["X"])], atom("b", &["Y"]));
        assert_eq!(classify(&s), Classification::LeftMultiple);
    }

    #[test]
    fn classify_quantified() {
        let q = QuantifierRef {
            kind: QuantifierKind::Exists,
            bound: ident("X"),
            type_name: ident("person"),
            body: atom("a", &["X"]),
        };
        let s = Schema {
            parents: vec![ParentRef::Quantifier(q)],
            child: atom("b", &[]),
            cpt: two_row_cpt(0.7665, 0.0332),
        };
        assert_eq!(classify(&s), Classification::Quantified);
    }

    #[test]
    fn validate_rejects_bare_left_multiple() {
        let kb = KnowledgeBase {
            schemata: vec![plain(&[atom("a", &["X"])], atom("b", &[]))],
            priors: vec![Prior { atom: atom("a", &["X"]), p_true: 0.5 }],
            ..Default::default()
        };
        let diags = validate_kb(&kb);
        assert!(diags
            .iter()
            .any(|d| d.code == DiagnosticCode::LeftMultipleRequiresQuantifier));
    }

    #[test]
    fn validate_rejects_incomplete_cpt() {
        let mut s = plain(&[atom("a", &[]), atom("b", &[])], atom("c", &[]));
        s.cpt.rows.remove(&vec![true, true]);
        let kb = KnowledgeBase {
            schemata: vec![s],
            priors: vec![
                Prior { atom: atom("a", &[]), p_true: 0.5 },
                Prior { atom: atom("b", &[]), p_true: 0.5 },
            ],
            ..Default::default()
        };
        let diags = validate_kb(&kb);
        assert_eq!(
            diags.iter().filter(|d| d.code == DiagnosticCode::IncompleteCpt).count(),
            1
        );
    }

    #[test]
    fn validate_rejects_ambiguous_heads() {
        let kb = KnowledgeBase {
            schemata: vec![
                plain(&[atom("a", &[])], atom("c", &["X"])),
                plain(&[atom("b", &[])], atom("c", &["Y"])),
            ],
            priors: vec![
                Prior { atom: atom("a", &[]), p_true: 0.5 },
                Prior { atom: atom("b", &[]), p_true: 0.5 },
            ],
            ..Default::default()
        };
        let diags = validate_kb(&kb);
        assert!(diags.iter().any(|d| d.code == DiagnosticCode::AmbiguousHead));
    }

    #[test]
    fn validate_rejects_prior_on_child() {
        let kb = KnowledgeBase {
            schemata: vec![plain(&[atom("a", &[])], atom("b", &[]))],
            priors: vec![
                Prior { atom: atom("a", &[]), p_true: 0.5 },
                Prior { atom: atom("b", &[]), p_true: 0.5 },
            ],
            ..Default::default()
        };
        let diags = validate_kb(&kb);
        assert!(diags.iter().any(|d| d.code == DiagnosticCode::PriorOnSchemaChild));
    }

    #[test]
    fn validate_rejects_undefined_parent() {
        let kb = KnowledgeBase {
            schemata: vec![plain(&[atom("a", &[])], atom("b", &[]))],
            ..Default::default()
        };
        let diags = validate_kb(&kb);
        assert!(diags.iter().any(|d| d.code == DiagnosticCode::UndefinedParent));
    }

    #[test]
    fn validate_rejects_undeclared_quantifier_type() {
        let q = QuantifierRef {
            kind: QuantifierKind::Exists,
            bound: ident("X"),
            type_name: ident("person"),
            body: atom("a", &["X"]),
        };
        let kb = KnowledgeBase {
            schemata: vec![Schema {
                parents: vec![ParentRef::Quantifier(q)],
                child: atom("b", &[]),
                cpt: two_row_cpt(0.7, 0.1),
            }],
            priors: vec![Prior { atom: atom("a", &["X"]), p_true: 0.5 }],
            ..Default::default()
        };
        let diags = validate_kb(&kb);
        assert!(diags
            .iter()
            .any(|d| d.code == DiagnosticCode::UndeclaredQuantifierType));
    }

    #[test]
    fn exactly_one_classification_for_plain_schemata() {
        // classify is total: any plain schema lands in exactly one bucket.
        let cases = [
            plain(&[atom("a", &["X"])], atom("c", &["X"])),
            plain(&[atom("a", &[])], atom("c", &["Y"])),
            plain(&[atom("a", &["X"])], atom("c", &[])),
            plain(&[], atom("c", &[])),
        ];
        for s in &cases {
            let c = classify(s);
            assert_ne!(c, Classification::Quantified);
        }
    }
}
