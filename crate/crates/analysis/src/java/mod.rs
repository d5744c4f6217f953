//! Java structural model.
//!
//! A [`SourceUnit`] is produced per file by [`parse_unit`]/[`parse_source`];
//! units are then combined into a [`StructuralModel`], which resolves type
//! references and method invocations across the corpus.

mod parse;
mod resolve;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

pub use parse::{parse_source, parse_unit};
pub use resolve::{ClassId, MethodId, ResolvedCall, StructuralModel, SuperRef};

/// Kind of a declared type, following the CK classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassKind {
    /// Top-level class or record.
    Normal,
    /// Named class nested in another type or declared locally in a method.
    Inner,
    Anonymous,
    Interface,
    #[serde(rename = "enum")]
    EnumDecl,
}

impl ClassKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ClassKind::Normal => "normal",
            ClassKind::Inner => "inner",
            ClassKind::Anonymous => "anonymous",
            ClassKind::Interface => "interface",
            ClassKind::EnumDecl => "enum",
        }
    }
}

impl fmt::Display for ClassKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Modifier bitmask using the `java.lang.reflect.Modifier` bit values.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Modifiers(pub u32);

impl Modifiers {
    pub const PUBLIC: u32 = 0x001;
    pub const PRIVATE: u32 = 0x002;
    pub const PROTECTED: u32 = 0x004;
    pub const STATIC: u32 = 0x008;
    pub const FINAL: u32 = 0x010;
    pub const SYNCHRONIZED: u32 = 0x020;
    pub const VOLATILE: u32 = 0x040;
    pub const TRANSIENT: u32 = 0x080;
    pub const NATIVE: u32 = 0x100;
    pub const INTERFACE: u32 = 0x200;
    pub const ABSTRACT: u32 = 0x400;
    pub const STRICT: u32 = 0x800;
    /// Not a reflection bit; marks interface `default` methods.
    pub const DEFAULT: u32 = 0x1000;

    pub fn from_keyword(kw: &str) -> u32 {
        match kw {
            "public" => Self::PUBLIC,
            "private" => Self::PRIVATE,
            "protected" => Self::PROTECTED,
            "static" => Self::STATIC,
            "final" => Self::FINAL,
            "synchronized" => Self::SYNCHRONIZED,
            "volatile" => Self::VOLATILE,
            "transient" => Self::TRANSIENT,
            "native" => Self::NATIVE,
            "abstract" => Self::ABSTRACT,
            "strictfp" => Self::STRICT,
            "default" => Self::DEFAULT,
            _ => 0,
        }
    }

    pub fn has(self, bit: u32) -> bool {
        self.0 & bit != 0
    }

    pub fn insert(&mut self, bit: u32) {
        self.0 |= bit;
    }

    pub fn is_public(self) -> bool {
        self.has(Self::PUBLIC)
    }
    pub fn is_private(self) -> bool {
        self.has(Self::PRIVATE)
    }
    pub fn is_protected(self) -> bool {
        self.has(Self::PROTECTED)
    }
    /// Package-private: none of the three access keywords.
    pub fn is_default_access(self) -> bool {
        !self.has(Self::PUBLIC | Self::PRIVATE | Self::PROTECTED)
    }
    pub fn is_static(self) -> bool {
        self.has(Self::STATIC)
    }
    pub fn is_final(self) -> bool {
        self.has(Self::FINAL)
    }
    pub fn is_abstract(self) -> bool {
        self.has(Self::ABSTRACT)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Import {
    /// Dotted path without the trailing `.*`.
    pub path: String,
    pub wildcard: bool,
    pub is_static: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldInfo {
    pub name: String,
    pub type_name: String,
    pub modifiers: Modifiers,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub type_name: String,
}

/// Receiver expression of a method invocation, as far as it matters for resolution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Receiver {
    /// `foo()`.
    Implicit,
    /// `this.foo()`.
    This,
    /// `super.foo()`.
    Super,
    /// Identifier or dotted identifier chain, e.g. `list.add()` or `com.x.Util.m()`.
    Name(String),
    /// `new Foo().bar()`.
    New(String),
    /// Anything else (call chains, array accesses, casts).
    Expr,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Invocation {
    pub name: String,
    pub arg_count: usize,
    pub receiver: Receiver,
}

/// Statement-level counters for a method body or a whole class scope.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatementStats {
    pub loop_count: u32,
    pub comparison_count: u32,
    pub try_catch_count: u32,
    pub return_count: u32,
    pub assignment_count: u32,
    pub math_op_count: u32,
    pub parenthesized_expr_count: u32,
    pub string_literal_count: u32,
    pub number_literal_count: u32,
    pub variable_decl_count: u32,
    pub max_nesting: u32,
    pub lambda_count: u32,
    pub unique_word_count: u32,
    pub log_statement_count: u32,
    /// Branch points counted by McCabe: if, loops, case labels, catch, `&&`, `||`, `?:`.
    pub decision_points: u32,
    /// Trimmed length of every code line.
    pub line_lengths: Vec<u32>,
    /// Length of every identifier occurrence.
    pub identifier_lengths: Vec<u32>,
}

impl StatementStats {
    pub fn mean_line_length(&self) -> f64 {
        mean_u32(&self.line_lengths)
    }

    pub fn mean_identifier_length(&self) -> f64 {
        mean_u32(&self.identifier_lengths)
    }
}

fn mean_u32(xs: &[u32]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().map(|&x| x as f64).sum::<f64>() / xs.len() as f64
    }
}

/// Raw observations consumed by the implementation-smell detectors.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SmellFacts {
    /// Whitespace-collapsed length of each simple statement and field declaration.
    pub statement_lengths: Vec<u32>,
    pub empty_catch_count: u32,
    pub switch_without_default_count: u32,
    /// Values of numeric literals outside `final` field initializers.
    pub numeric_literals: Vec<f64>,
    /// Names declared in this scope: the type itself, fields, methods, parameters, locals.
    pub declared_names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodInfo {
    pub name: String,
    pub is_constructor: bool,
    pub parameters: Vec<Param>,
    pub modifiers: Modifiers,
    pub has_body: bool,
    pub body_stats: StatementStats,
    pub invocations: Vec<Invocation>,
    /// Declared types of parameters and locals, by name.
    pub local_types: BTreeMap<String, String>,
    /// Identifiers read or written in the body (candidate field accesses).
    pub accessed_names: BTreeSet<String>,
    pub loc: u32,
    /// 1-based line of the declaration.
    pub line: u32,
}

impl MethodInfo {
    /// `name(T1,T2)` signature used as a row key.
    pub fn signature(&self) -> String {
        let params: Vec<&str> = self.parameters.iter().map(|p| p.type_name.as_str()).collect();
        format!("{}({})", self.name, params.join(","))
    }

    pub fn cyclomatic(&self) -> u32 {
        1 + self.body_stats.decision_points
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassInfo {
    pub qualified_name: String,
    /// Empty for anonymous classes.
    pub simple_name: String,
    pub kind: ClassKind,
    pub package: String,
    /// Index of the enclosing class within the same unit.
    pub enclosing: Option<usize>,
    pub superclass: Option<String>,
    pub interfaces: Vec<String>,
    pub modifiers: Modifiers,
    pub fields: Vec<FieldInfo>,
    pub methods: Vec<MethodInfo>,
    /// Calls made from field initializers and initializer blocks.
    pub initializer_invocations: Vec<Invocation>,
    pub loc: u32,
    /// Counters over the whole class scope, nested class bodies excluded.
    pub stats: StatementStats,
    /// Type names written in this class scope (declarations, casts, `new`, generics).
    pub type_refs: Vec<String>,
    /// Capitalised identifiers used as the object of a field access or call.
    pub static_refs: Vec<String>,
    pub smell_facts: SmellFacts,
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceUnit {
    /// Path as given to the parser, normally relative to the app root.
    pub path: String,
    pub package: String,
    pub imports: Vec<Import>,
    pub classes: Vec<ClassInfo>,
    /// Non-blank, non-comment lines in the file.
    pub loc: u32,
}

/// A file that could not be parsed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseFailure {
    pub path: String,
    /// 1-based line of the first syntax error.
    pub line: u32,
    pub message: String,
}

impl fmt::Display for ParseFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.path, self.line, self.message)
    }
}

impl std::error::Error for ParseFailure {}

/// Strip generic arguments, array dimensions, varargs and annotations from a type as written.
pub fn normalize_type_name(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut depth = 0usize;
    for token in raw.split_whitespace().filter(|t| !t.starts_with('@')) {
        for ch in token.chars() {
            match ch {
                '<' => depth += 1,
                '>' => depth = depth.saturating_sub(1),
                _ if depth > 0 => {}
                '[' | ']' => {}
                c => out.push(c),
            }
        }
    }
    out.trim_end_matches("...").to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalizes_type_names() {
        assert_eq!(normalize_type_name("List<Foo>"), "List");
        assert_eq!(normalize_type_name("Map<String, List<Bar>>"), "Map");
        assert_eq!(normalize_type_name("int[]"), "int");
        assert_eq!(normalize_type_name("com.x.Foo"), "com.x.Foo");
        assert_eq!(normalize_type_name("String..."), "String");
    }

    #[test]
    fn modifier_access_predicates() {
        let mut m = Modifiers::default();
        assert!(m.is_default_access());
        m.insert(Modifiers::PRIVATE | Modifiers::STATIC);
        assert!(m.is_private() && m.is_static() && !m.is_default_access());
    }
}
