//! Two-level label schema with hierarchical gating and exclusivity constraints.
//!
//! A [`Taxonomy`] is loaded from a versioned config document rather than being
//! hard-coded, so alternative label systems can be swapped in by pointing at a
//! different schema file. The crate ships three defaults (see [`builtin`]):
//! the native two-level networking schema plus two flat economic-sector
//! skeletons.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Identifier of a category, e.g. `government` or `government.executive`.
///
/// Sub-level identifiers are dot-qualified by their parent's identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TagId(String);

impl TagId {
    pub fn new(value: impl Into<String>) -> Result<Self, TaxonomyError> {
        let value = value.into();
        if value.is_empty() {
            return Err(TaxonomyError::EmptyTagId);
        }
        let ok = value
            .chars()
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_' || c == '.');
        if !ok || value.starts_with('.') || value.ends_with('.') {
            return Err(TaxonomyError::MalformedTagId(value));
        }
        Ok(TagId(value))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Parent identifier implied by dot-qualification, if any.
    pub fn qualified_parent(&self) -> Option<TagId> {
        self.0.rsplit_once('.').map(|(p, _)| TagId(p.to_string()))
    }

    /// Last path segment (`executive` for `government.executive`).
    pub fn leaf(&self) -> &str {
        self.0.rsplit_once('.').map_or(&self.0, |(_, l)| l)
    }
}

impl fmt::Display for TagId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for TagId {
    type Err = TaxonomyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TagId::new(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Top,
    Sub,
}

/// One category of the schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryNode {
    pub id: TagId,
    pub level: Level,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<TagId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exclusivity_group: Option<String>,
    #[serde(default)]
    pub description: String,
}

/// Serialized form of a taxonomy: what schema files contain.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaxonomyDocument {
    pub name: String,
    pub version: String,
    pub nodes: Vec<CategoryNode>,
}

/// A validated two-level label schema.
#[derive(Debug, Clone)]
pub struct Taxonomy {
    name: String,
    version: String,
    nodes: Vec<CategoryNode>,
    index: BTreeMap<TagId, usize>,
    children: BTreeMap<TagId, Vec<TagId>>,
}

#[derive(Debug, Error)]
pub enum TaxonomyError {
    #[error("tag id must be non-empty")]
    EmptyTagId,
    #[error("malformed tag id {0:?}: expected lowercase ascii, digits, '_' and '.'")]
    MalformedTagId(String),
    #[error("duplicate tag id {0}")]
    DuplicateId(TagId),
    #[error("node {child} references parent {parent} which is not in the schema")]
    DanglingParent { child: TagId, parent: TagId },
    #[error("sub-level node {0} has no parent")]
    SubWithoutParent(TagId),
    #[error("top-level node {0} must not declare a parent")]
    TopWithParent(TagId),
    #[error("node {child} under {parent} exceeds the two-level hierarchy")]
    TooDeep { child: TagId, parent: TagId },
    #[error("sub-level id {child} is not dot-qualified by its parent {parent}")]
    BadQualification { child: TagId, parent: TagId },
    #[error("exclusivity group {group:?} spans parents {a} and {b}")]
    GroupSpansParents { group: String, a: TagId, b: TagId },
    #[error("unknown tag {0}")]
    UnknownTag(TagId),
    #[error("{0} is not a top-level tag")]
    NotTopLevel(TagId),
    #[error("schema document: {0}")]
    Document(String),
    #[error("reading schema: {0}")]
    Io(#[from] std::io::Error),
}

/// A violation of the tag-set rules, reported by [`Taxonomy::validate_tagset`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// A sub-level tag is present without its parent top-level tag.
    MissingParent { tag: TagId, parent: TagId },
    /// Two tags share an exclusivity group.
    ExclusivityConflict { group: String, first: TagId, second: TagId },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MissingParent { tag, parent } => {
                write!(f, "{tag} requires its parent {parent}")
            }
            Violation::ExclusivityConflict { group, first, second } => {
                write!(f, "{first} and {second} both belong to exclusive group {group:?}")
            }
        }
    }
}

impl Taxonomy {
    /// Validates a parsed schema document and builds the lookup structures.
    pub fn from_document(doc: TaxonomyDocument) -> Result<Self, TaxonomyError> {
        let mut index = BTreeMap::new();
        for (i, node) in doc.nodes.iter().enumerate() {
            TagId::new(node.id.as_str())?;
            if index.insert(node.id.clone(), i).is_some() {
                return Err(TaxonomyError::DuplicateId(node.id.clone()));
            }
        }

        let mut children: BTreeMap<TagId, Vec<TagId>> = BTreeMap::new();
        for node in &doc.nodes {
            match (node.level, &node.parent) {
                (Level::Top, Some(_)) => {
                    return Err(TaxonomyError::TopWithParent(node.id.clone()));
                }
                (Level::Top, None) => {
                    children.entry(node.id.clone()).or_default();
                }
                (Level::Sub, None) => {
                    return Err(TaxonomyError::SubWithoutParent(node.id.clone()));
                }
                (Level::Sub, Some(parent)) => {
                    let Some(&pi) = index.get(parent) else {
                        return Err(TaxonomyError::DanglingParent {
                            child: node.id.clone(),
                            parent: parent.clone(),
                        });
                    };
                    if doc.nodes[pi].level != Level::Top {
                        return Err(TaxonomyError::TooDeep {
                            child: node.id.clone(),
                            parent: parent.clone(),
                        });
                    }
                    if node.id.qualified_parent().as_ref() != Some(parent) {
                        return Err(TaxonomyError::BadQualification {
                            child: node.id.clone(),
                            parent: parent.clone(),
                        });
                    }
                    children.entry(parent.clone()).or_default().push(node.id.clone());
                }
            }
        }

        // Exclusivity groups must not span parents.
        let mut group_parent: BTreeMap<&str, (&TagId, &Option<TagId>)> = BTreeMap::new();
        for node in &doc.nodes {
            if let Some(group) = &node.exclusivity_group {
                match group_parent.get(group.as_str()) {
                    None => {
                        group_parent.insert(group, (&node.id, &node.parent));
                    }
                    Some((first, parent)) if *parent != &node.parent => {
                        return Err(TaxonomyError::GroupSpansParents {
                            group: group.clone(),
                            a: (*first).clone(),
                            b: node.id.clone(),
                        });
                    }
                    Some(_) => {}
                }
            }
        }

        Ok(Taxonomy {
            name: doc.name,
            version: doc.version,
            nodes: doc.nodes,
            index,
            children,
        })
    }

    pub fn from_toml_str(text: &str) -> Result<Self, TaxonomyError> {
        let doc: TaxonomyDocument =
            toml::from_str(text).map_err(|e| TaxonomyError::Document(e.to_string()))?;
        Taxonomy::from_document(doc)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TaxonomyError> {
        let text = std::fs::read_to_string(path)?;
        Taxonomy::from_toml_str(&text)
    }

    /// The schema as a serializable document; `from_document` of the result
    /// reproduces the same node set.
    pub fn to_document(&self) -> TaxonomyDocument {
        TaxonomyDocument {
            name: self.name.clone(),
            version: self.version.clone(),
            nodes: self.nodes.clone(),
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&self.to_document()).expect("taxonomy document serializes")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn nodes(&self) -> &[CategoryNode] {
        &self.nodes
    }

    pub fn node(&self, id: &TagId) -> Option<&CategoryNode> {
        self.index.get(id).map(|&i| &self.nodes[i])
    }

    pub fn contains(&self, id: &TagId) -> bool {
        self.index.contains_key(id)
    }

    /// Top-level tags in schema order.
    pub fn top_tags(&self) -> Vec<TagId> {
        self.nodes
            .iter()
            .filter(|n| n.level == Level::Top)
            .map(|n| n.id.clone())
            .collect()
    }

    /// Sub-level tags in schema order.
    pub fn sub_tags(&self) -> Vec<TagId> {
        self.nodes
            .iter()
            .filter(|n| n.level == Level::Sub)
            .map(|n| n.id.clone())
            .collect()
    }

    /// Sub-tags of one top-level category, in schema order.
    pub fn subtags_of(&self, top: &TagId) -> Result<&[TagId], TaxonomyError> {
        let node = self.node(top).ok_or_else(|| TaxonomyError::UnknownTag(top.clone()))?;
        if node.level != Level::Top {
            return Err(TaxonomyError::NotTopLevel(top.clone()));
        }
        Ok(self.children.get(top).map(Vec::as_slice).unwrap_or(&[]))
    }

    /// The sub-level tags whose parent is in `top_tags`: the only candidates a
    /// sub-classifier may consider once the top level is decided.
    pub fn admissible_subtags(&self, top_tags: &TagSet) -> Result<TagSet, TaxonomyError> {
        let mut out = TagSet::new();
        for tag in top_tags.iter() {
            for sub in self.subtags_of(tag)? {
                out.insert(sub.clone());
            }
        }
        Ok(out)
    }

    /// Checks the two tag-set rules: every sub tag's parent present, and no two
    /// tags from one exclusivity group. Unknown tags are a hard error.
    pub fn validate_tagset(&self, tags: &TagSet) -> Result<Vec<Violation>, TaxonomyError> {
        let mut violations = Vec::new();
        let mut seen_groups: BTreeMap<&str, &TagId> = BTreeMap::new();
        for tag in tags.iter() {
            let node = self.node(tag).ok_or_else(|| TaxonomyError::UnknownTag(tag.clone()))?;
            if let Some(parent) = &node.parent {
                if !tags.contains(parent) {
                    violations.push(Violation::MissingParent {
                        tag: tag.clone(),
                        parent: parent.clone(),
                    });
                }
            }
            if let Some(group) = &node.exclusivity_group {
                if let Some(first) = seen_groups.get(group.as_str()) {
                    violations.push(Violation::ExclusivityConflict {
                        group: group.clone(),
                        first: (*first).clone(),
                        second: tag.clone(),
                    });
                } else {
                    seen_groups.insert(group, tag);
                }
            }
        }
        Ok(violations)
    }

    /// Convenience wrapper: `Ok(())` iff `validate_tagset` reports nothing.
    pub fn check_tagset(&self, tags: &TagSet) -> Result<(), TaxonomyError> {
        let violations = self.validate_tagset(tags)?;
        if violations.is_empty() {
            Ok(())
        } else {
            let detail = violations
                .iter()
                .map(Violation::to_string)
                .collect::<Vec<_>>()
                .join("; ");
            Err(TaxonomyError::Document(format!("invalid tag set: {detail}")))
        }
    }
}

/// An ordered set of tags. Ordering is lexicographic on the tag id, which keeps
/// every serialization of a tag set deterministic.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TagSet(BTreeSet<TagId>);

impl TagSet {
    pub fn new() -> Self {
        TagSet(BTreeSet::new())
    }

    pub fn insert(&mut self, tag: TagId) -> bool {
        self.0.insert(tag)
    }

    pub fn contains(&self, tag: &TagId) -> bool {
        self.0.contains(tag)
    }

    pub fn remove(&mut self, tag: &TagId) -> bool {
        self.0.remove(tag)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &TagId> {
        self.0.iter()
    }

    pub fn union(&self, other: &TagSet) -> TagSet {
        TagSet(self.0.union(&other.0).cloned().collect())
    }

    pub fn is_subset(&self, other: &TagSet) -> bool {
        self.0.is_subset(&other.0)
    }

    /// Tags of the set at the given level of `taxonomy`. Tags unknown to the
    /// taxonomy are skipped.
    pub fn at_level(&self, taxonomy: &Taxonomy, level: Level) -> TagSet {
        TagSet(
            self.0
                .iter()
                .filter(|t| taxonomy.node(t).is_some_and(|n| n.level == level))
                .cloned()
                .collect(),
        )
    }
}

impl FromIterator<TagId> for TagSet {
    fn from_iter<T: IntoIterator<Item = TagId>>(iter: T) -> Self {
        TagSet(iter.into_iter().collect())
    }
}

impl<'a> IntoIterator for &'a TagSet {
    type Item = &'a TagId;
    type IntoIter = std::collections::btree_set::Iter<'a, TagId>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

impl IntoIterator for TagSet {
    type Item = TagId;
    type IntoIter = std::collections::btree_set::IntoIter<TagId>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.into_iter()
    }
}

impl fmt::Display for TagSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for tag in &self.0 {
            if !first {
                f.write_str(";")?;
            }
            first = false;
            write!(f, "{tag}")?;
        }
        Ok(())
    }
}

/// Names of the schema documents shipped with the crate.
pub mod builtin {
    use super::{Taxonomy, TaxonomyError};

    pub const DEFAULT: &str = "linnaeus-v1";

    const SCHEMAS: &[(&str, &str)] = &[
        ("linnaeus-v1", include_str!("../data/linnaeus-v1.toml")),
        ("naicslite-v1", include_str!("../data/naicslite-v1.toml")),
        ("isic-v1", include_str!("../data/isic-v1.toml")),
    ];

    pub fn names() -> Vec<&'static str> {
        SCHEMAS.iter().map(|(n, _)| *n).collect()
    }

    pub fn schema_text(name: &str) -> Option<&'static str> {
        SCHEMAS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
    }

    pub fn load(name: &str) -> Result<Taxonomy, TaxonomyError> {
        let text = schema_text(name)
            .ok_or_else(|| TaxonomyError::Document(format!("no builtin schema named {name:?}")))?;
        Taxonomy::from_toml_str(text)
    }

    /// The default two-level networking schema.
    pub fn default_taxonomy() -> Taxonomy {
        load(DEFAULT).expect("builtin default schema is valid")
    }
}
