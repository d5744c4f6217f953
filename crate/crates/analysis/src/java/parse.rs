use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use tree_sitter::{Node, Parser};

use super::{
    normalize_type_name, ClassInfo, ClassKind, FieldInfo, Import, Invocation, MethodInfo,
    Modifiers, Param, ParseFailure, Receiver, SmellFacts, SourceUnit, StatementStats,
};
use crate::words::split_words;

/// Receiver names or method names that mark a logging call.
const LOG_NAMES: [&str; 5] = ["Log", "log", "logger", "println", "printStackTrace"];

const STATEMENT_KINDS: [&str; 10] = [
    "expression_statement",
    "local_variable_declaration",
    "return_statement",
    "throw_statement",
    "assert_statement",
    "yield_statement",
    "explicit_constructor_invocation",
    "field_declaration",
    "constant_declaration",
    "break_statement",
];

/// Parse one Java file from disk.
pub fn parse_unit(path: &Path) -> Result<SourceUnit, ParseFailure> {
    let display = path.display().to_string();
    let bytes = std::fs::read(path).map_err(|e| ParseFailure {
        path: display.clone(),
        line: 0,
        message: format!("unreadable: {e}"),
    })?;
    let text = String::from_utf8_lossy(&bytes);
    parse_source(&display, &text)
}

/// Parse Java source text. `path` is recorded verbatim in the unit.
pub fn parse_source(path: &str, source: &str) -> Result<SourceUnit, ParseFailure> {
    let mut parser = Parser::new();
    parser
        .set_language(&tree_sitter_java::LANGUAGE.into())
        .expect("java grammar is compatible with the linked tree-sitter");
    let tree = parser.parse(source, None).ok_or_else(|| ParseFailure {
        path: path.to_string(),
        line: 0,
        message: "parser returned no tree".into(),
    })?;
    let root = tree.root_node();
    if root.has_error() {
        let (line, message) = first_error(root);
        return Err(ParseFailure { path: path.to_string(), line, message });
    }
    let mut builder = UnitBuilder::new(source);
    builder.walk(root);
    Ok(builder.finish(path))
}

fn first_error(root: Node) -> (u32, String) {
    let mut stack = vec![root];
    while let Some(node) = stack.pop() {
        if node.is_missing() {
            return (node.start_position().row as u32 + 1, format!("missing `{}`", node.kind()));
        }
        if node.is_error() {
            return (node.start_position().row as u32 + 1, "syntax error".to_string());
        }
        if node.has_error() {
            let mut cursor = node.walk();
            let children: Vec<Node> = node.children(&mut cursor).collect();
            stack.extend(children.into_iter().rev());
        }
    }
    (root.start_position().row as u32 + 1, "syntax error".to_string())
}

#[derive(Debug, Clone, Copy)]
struct Ctx {
    class: Option<usize>,
    method: Option<usize>,
    depth: u32,
    /// Inside the initializer of a `final` field: literals are named constants.
    exempt_numbers: bool,
}

#[derive(Default)]
struct ScopeAcc {
    words: BTreeSet<String>,
    rows: BTreeSet<usize>,
}

#[derive(Default)]
struct MethodAcc {
    scope: ScopeAcc,
    plain_idents: BTreeSet<String>,
    this_fields: BTreeSet<String>,
}

struct UnitBuilder<'a> {
    src: &'a str,
    lines: Vec<&'a str>,
    package: String,
    imports: Vec<Import>,
    classes: Vec<ClassInfo>,
    class_acc: Vec<ScopeAcc>,
    method_acc: Vec<Vec<MethodAcc>>,
    /// Anonymous-class counters keyed by the outermost enclosing class.
    anon_counters: HashMap<usize, u32>,
    unit_rows: BTreeSet<usize>,
}

impl<'a> UnitBuilder<'a> {
    fn new(src: &'a str) -> Self {
        Self {
            src,
            lines: src.lines().collect(),
            package: String::new(),
            imports: Vec::new(),
            classes: Vec::new(),
            class_acc: Vec::new(),
            method_acc: Vec::new(),
            anon_counters: HashMap::new(),
            unit_rows: BTreeSet::new(),
        }
    }

    fn text(&self, node: Node) -> &'a str {
        &self.src[node.byte_range()]
    }

    fn walk(&mut self, root: Node<'a>) {
        let top = Ctx { class: None, method: None, depth: 0, exempt_numbers: false };
        let mut stack: Vec<(Node<'a>, Ctx, bool)> = vec![(root, top, false)];
        while let Some((node, ctx, is_body)) = stack.pop() {
            let children = self.visit(node, ctx, is_body);
            for child in children.into_iter().rev() {
                stack.push(child);
            }
        }
    }

    /// Process one node and return its children with the context each is visited in.
    fn visit(&mut self, node: Node<'a>, ctx: Ctx, is_body: bool) -> Vec<(Node<'a>, Ctx, bool)> {
        let kind = node.kind();
        if node.child_count() == 0 {
            self.leaf(node, ctx);
            self.count(node, ctx, is_body);
            return Vec::new();
        }
        if kind == "line_comment" || kind == "block_comment" {
            return Vec::new();
        }

        let mut child_ctx = ctx;
        // Special-cased children: (node id, ctx, is_body)
        let mut overrides: Vec<(usize, Ctx, bool)> = Vec::new();

        match kind {
            "package_declaration" => {
                if let Some(name) = named_children(node).into_iter().find(|n| {
                    matches!(n.kind(), "scoped_identifier" | "identifier")
                }) {
                    self.package = self.text(name).to_string();
                }
            }
            "import_declaration" => self.import(node),
            "class_declaration" | "interface_declaration" | "enum_declaration"
            | "record_declaration" | "annotation_type_declaration" => {
                let id = self.declare_named_class(node, ctx);
                child_ctx = Ctx { class: Some(id), method: None, depth: 0, exempt_numbers: false };
            }
            "object_creation_expression" => {
                let body = named_children(node).into_iter().find(|n| n.kind() == "class_body");
                if let Some(body) = body {
                    let ty = node
                        .child_by_field_name("type")
                        .map(|t| normalize_type_name(self.text(t)))
                        .unwrap_or_default();
                    let id = self.declare_anonymous_class(ctx, Some(ty));
                    overrides.push((
                        body.id(),
                        Ctx { class: Some(id), method: None, depth: 0, exempt_numbers: false },
                        false,
                    ));
                }
            }
            "enum_constant" => {
                child_ctx.exempt_numbers = true;
                if let Some(body) = node.child_by_field_name("body") {
                    let enclosing_name = ctx
                        .class
                        .map(|c| self.classes[c].qualified_name.clone())
                        .unwrap_or_default();
                    let id = self.declare_anonymous_class(ctx, Some(enclosing_name));
                    overrides.push((
                        body.id(),
                        Ctx { class: Some(id), method: None, depth: 0, exempt_numbers: false },
                        false,
                    ));
                }
                if let Some(c) = ctx.class {
                    let name = node.child_by_field_name("name").map(|n| self.text(n).to_string());
                    if let Some(name) = name {
                        self.classes[c].smell_facts.declared_names.push(name);
                    }
                }
            }
            "method_declaration" | "constructor_declaration" | "compact_constructor_declaration"
                if ctx.class.is_some() && ctx.method.is_none() =>
            {
                let (mid, body) = self.declare_method(node, ctx.class.unwrap());
                child_ctx = Ctx { method: Some(mid), depth: 0, exempt_numbers: false, ..ctx };
                if let Some(body) = body {
                    overrides.push((body.id(), child_ctx, true));
                }
            }
            "field_declaration" | "constant_declaration" if ctx.class.is_some() => {
                let exempt = self.declare_fields(node, ctx.class.unwrap());
                child_ctx.exempt_numbers = exempt;
            }
            "static_initializer" => {
                child_ctx.depth = 0;
                if let Some(block) = named_children(node).into_iter().find(|n| n.kind() == "block") {
                    overrides.push((block.id(), child_ctx, true));
                }
            }
            "block" if !is_body && node.parent().is_some_and(|p| p.kind() == "class_body") => {
                // instance initializer: its own block is the scope root
                return self.children_with(node, Ctx { depth: 0, ..ctx }, &[]);
            }
            _ => {}
        }

        self.count(node, ctx, is_body);

        if matches!(kind, "block" | "switch_block") && !is_body {
            child_ctx.depth = ctx.depth + 1;
        }
        self.children_with(node, child_ctx, &overrides)
    }

    fn children_with(
        &self,
        node: Node<'a>,
        ctx: Ctx,
        overrides: &[(usize, Ctx, bool)],
    ) -> Vec<(Node<'a>, Ctx, bool)> {
        let mut cursor = node.walk();
        node.children(&mut cursor)
            .map(|child| {
                match overrides.iter().find(|(id, _, _)| *id == child.id()) {
                    Some((_, c, body)) => (child, *c, *body),
                    None => (child, ctx, false),
                }
            })
            .collect()
    }

    fn leaf(&mut self, node: Node<'a>, ctx: Ctx) {
        let kind = node.kind();
        if kind == "line_comment" || kind == "block_comment" {
            return;
        }
        let text = self.text(node);
        let (start, end) = (node.start_position().row, node.end_position().row);
        for row in start..=end {
            self.unit_rows.insert(row);
        }
        let Some(class) = ctx.class else { return };
        let words = split_words(text);
        {
            let acc = &mut self.class_acc[class];
            acc.rows.extend(start..=end);
            acc.words.extend(words.iter().cloned());
        }
        let is_ident = matches!(kind, "identifier" | "type_identifier");
        if is_ident {
            self.classes[class].stats.identifier_lengths.push(text.chars().count() as u32);
        }
        if kind == "type_identifier" {
            let parent_kind = node.parent().map(|p| p.kind()).unwrap_or("");
            if parent_kind != "scoped_type_identifier" && parent_kind != "type_parameter" && text != "var" {
                self.classes[class].type_refs.push(text.to_string());
            }
        }
        if let Some(m) = ctx.method {
            let method = &mut self.classes[class].methods[m];
            if is_ident {
                method.body_stats.identifier_lengths.push(text.chars().count() as u32);
            }
            let acc = &mut self.method_acc[class][m];
            acc.scope.rows.extend(start..=end);
            acc.scope.words.extend(words);
            if kind == "identifier" && !is_invocation_name(node) {
                if let Some(parent) = node.parent() {
                    if parent.kind() == "field_access"
                        && parent.child_by_field_name("field").map(|f| f.id()) == Some(node.id())
                    {
                        if parent.child_by_field_name("object").is_some_and(|o| o.kind() == "this") {
                            acc.this_fields.insert(text.to_string());
                        }
                        return;
                    }
                }
                acc.plain_idents.insert(text.to_string());
            }
        }
    }

    fn import(&mut self, node: Node) {
        let mut cursor = node.walk();
        let is_static = node.children(&mut cursor).any(|c| c.kind() == "static");
        let wildcard = named_children(node).iter().any(|n| n.kind() == "asterisk");
        let path = named_children(node)
            .into_iter()
            .find(|n| matches!(n.kind(), "scoped_identifier" | "identifier"))
            .map(|n| self.text(n).to_string())
            .unwrap_or_default();
        self.imports.push(Import { path, wildcard, is_static });
    }

    fn push_class(&mut self, info: ClassInfo) -> usize {
        self.classes.push(info);
        self.class_acc.push(ScopeAcc::default());
        self.method_acc.push(Vec::new());
        self.classes.len() - 1
    }

    fn declare_named_class(&mut self, node: Node<'a>, ctx: Ctx) -> usize {
        let name = node
            .child_by_field_name("name")
            .map(|n| self.text(n).to_string())
            .unwrap_or_default();
        let nested = ctx.class.is_some();
        let kind = match node.kind() {
            "interface_declaration" | "annotation_type_declaration" => ClassKind::Interface,
            "enum_declaration" => ClassKind::EnumDecl,
            _ if nested => ClassKind::Inner,
            _ => ClassKind::Normal,
        };
        let qualified_name = match ctx.class {
            Some(outer) => format!("{}.{}", self.classes[outer].qualified_name, name),
            None if self.package.is_empty() => name.clone(),
            None => format!("{}.{}", self.package, name),
        };
        let mut modifiers = self.modifiers_of(node);
        if kind == ClassKind::Interface {
            modifiers.insert(Modifiers::INTERFACE | Modifiers::ABSTRACT);
        }
        let superclass = node
            .child_by_field_name("superclass")
            .and_then(|s| named_children(s).into_iter().next())
            .map(|t| normalize_type_name(self.text(t)));
        let mut interfaces = Vec::new();
        for field in ["interfaces"] {
            if let Some(list_holder) = node.child_by_field_name(field) {
                interfaces.extend(self.type_list(list_holder));
            }
        }
        // `interface X extends A, B`
        if let Some(ext) = named_children(node).into_iter().find(|n| n.kind() == "extends_interfaces") {
            interfaces.extend(self.type_list(ext));
        }
        let mut fields = Vec::new();
        if node.kind() == "record_declaration" {
            if let Some(params) = node.child_by_field_name("parameters") {
                for p in named_children(params) {
                    if p.kind() == "formal_parameter" {
                        let (pname, ptype) = self.param_parts(p);
                        fields.push(FieldInfo {
                            name: pname,
                            type_name: ptype,
                            modifiers: Modifiers(Modifiers::PRIVATE | Modifiers::FINAL),
                        });
                    }
                }
            }
        }
        let mut smell_facts = SmellFacts::default();
        smell_facts.declared_names.push(name.clone());
        let info = ClassInfo {
            qualified_name,
            simple_name: name,
            kind,
            package: self.package.clone(),
            enclosing: ctx.class,
            superclass: if kind == ClassKind::Interface { None } else { superclass },
            interfaces,
            modifiers,
            fields,
            methods: Vec::new(),
            initializer_invocations: Vec::new(),
            loc: 0,
            stats: StatementStats::default(),
            type_refs: Vec::new(),
            static_refs: Vec::new(),
            smell_facts,
            line: node.start_position().row as u32 + 1,
        };
        self.push_class(info)
    }

    fn declare_anonymous_class(&mut self, ctx: Ctx, supertype: Option<String>) -> usize {
        let outer = ctx.class;
        let root = outer.map(|mut c| {
            while let Some(e) = self.classes[c].enclosing {
                c = e;
            }
            c
        });
        let qualified_name = match root {
            Some(r) => {
                let n = self.anon_counters.entry(r).or_insert(0);
                *n += 1;
                format!("{}${}", self.classes[r].qualified_name, n)
            }
            None => format!("{}$anonymous", self.package),
        };
        let info = ClassInfo {
            qualified_name,
            simple_name: String::new(),
            kind: ClassKind::Anonymous,
            package: self.package.clone(),
            enclosing: outer,
            superclass: supertype.filter(|s| !s.is_empty()),
            interfaces: Vec::new(),
            modifiers: Modifiers::default(),
            fields: Vec::new(),
            methods: Vec::new(),
            initializer_invocations: Vec::new(),
            loc: 0,
            stats: StatementStats::default(),
            type_refs: Vec::new(),
            static_refs: Vec::new(),
            smell_facts: SmellFacts::default(),
            line: 0,
        };
        self.push_class(info)
    }

    fn type_list(&self, holder: Node) -> Vec<String> {
        let mut out = Vec::new();
        for child in named_children(holder) {
            if child.kind() == "type_list" {
                for t in named_children(child) {
                    out.push(normalize_type_name(self.text(t)));
                }
            } else if !matches!(child.kind(), "line_comment" | "block_comment") {
                out.push(normalize_type_name(self.text(child)));
            }
        }
        out
    }

    fn modifiers_of(&self, node: Node) -> Modifiers {
        let mut mods = Modifiers::default();
        if let Some(m) = named_children(node).into_iter().find(|n| n.kind() == "modifiers") {
            let mut cursor = m.walk();
            for child in m.children(&mut cursor) {
                mods.insert(Modifiers::from_keyword(child.kind()));
            }
        }
        mods
    }

    fn in_interface(&self, class: usize) -> bool {
        self.classes[class].kind == ClassKind::Interface
    }

    fn param_parts(&self, p: Node) -> (String, String) {
        let name = p
            .child_by_field_name("name")
            .map(|n| self.text(n).to_string())
            .or_else(|| {
                // spread_parameter: `String... args`
                named_children(p)
                    .into_iter()
                    .find(|n| n.kind() == "variable_declarator")
                    .and_then(|d| d.child_by_field_name("name"))
                    .map(|n| self.text(n).to_string())
            })
            .unwrap_or_default();
        let ty = p
            .child_by_field_name("type")
            .or_else(|| {
                named_children(p).into_iter().find(|n| {
                    !matches!(n.kind(), "modifiers" | "variable_declarator" | "identifier")
                })
            })
            .map(|t| normalize_type_name(self.text(t)))
            .unwrap_or_default();
        (name, ty)
    }

    fn declare_method(&mut self, node: Node<'a>, class: usize) -> (usize, Option<Node<'a>>) {
        let is_constructor = node.kind() != "method_declaration";
        let name = node
            .child_by_field_name("name")
            .map(|n| self.text(n).to_string())
            .unwrap_or_default();
        let mut modifiers = self.modifiers_of(node);
        let body = node.child_by_field_name("body");
        if self.in_interface(class) {
            if !modifiers.has(Modifiers::PRIVATE) {
                modifiers.insert(Modifiers::PUBLIC);
            }
            if body.is_none() && !modifiers.is_static() {
                modifiers.insert(Modifiers::ABSTRACT);
            }
        }
        let mut parameters = Vec::new();
        let mut local_types = BTreeMap::new();
        if let Some(params) = node.child_by_field_name("parameters") {
            for p in named_children(params) {
                if matches!(p.kind(), "formal_parameter" | "spread_parameter") {
                    let (pname, ptype) = self.param_parts(p);
                    local_types.insert(pname.clone(), ptype.clone());
                    parameters.push(Param { name: pname, type_name: ptype });
                }
            }
        } else if node.kind() == "compact_constructor_declaration" {
            // record components are the implicit parameters
            for f in &self.classes[class].fields {
                parameters.push(Param { name: f.name.clone(), type_name: f.type_name.clone() });
            }
        }
        {
            let facts = &mut self.classes[class].smell_facts;
            if !is_constructor {
                facts.declared_names.push(name.clone());
            }
            facts.declared_names.extend(parameters.iter().map(|p| p.name.clone()));
        }
        let info = MethodInfo {
            name,
            is_constructor,
            parameters,
            modifiers,
            has_body: body.is_some(),
            body_stats: StatementStats::default(),
            invocations: Vec::new(),
            local_types,
            accessed_names: BTreeSet::new(),
            loc: 0,
            line: node.start_position().row as u32 + 1,
        };
        self.classes[class].methods.push(info);
        self.method_acc[class].push(MethodAcc::default());
        (self.classes[class].methods.len() - 1, body)
    }

    /// Register fields; returns whether the initializers are constant (final) definitions.
    fn declare_fields(&mut self, node: Node, class: usize) -> bool {
        let mut modifiers = self.modifiers_of(node);
        let constant = node.kind() == "constant_declaration" || self.in_interface(class);
        if constant {
            modifiers.insert(Modifiers::PUBLIC | Modifiers::STATIC | Modifiers::FINAL);
        }
        let ty = node
            .child_by_field_name("type")
            .map(|t| normalize_type_name(self.text(t)))
            .unwrap_or_default();
        let mut cursor = node.walk();
        let declarators: Vec<Node> = node.children_by_field_name("declarator", &mut cursor).collect();
        for d in declarators {
            if let Some(n) = d.child_by_field_name("name") {
                let name = self.text(n).to_string();
                self.classes[class].smell_facts.declared_names.push(name.clone());
                self.classes[class].fields.push(FieldInfo {
                    name,
                    type_name: ty.clone(),
                    modifiers,
                });
            }
        }
        modifiers.is_final()
    }

    /// Apply per-kind counters to the class scope and, when inside one, the method.
    fn count(&mut self, node: Node<'a>, ctx: Ctx, is_body: bool) {
        let Some(class) = ctx.class else { return };
        let kind = node.kind();
        let mut delta = StatementStats::default();

        match kind {
            "for_statement" | "enhanced_for_statement" | "while_statement" | "do_statement" => {
                delta.loop_count = 1;
                delta.decision_points = 1;
            }
            "if_statement" | "ternary_expression" => delta.decision_points = 1,
            "catch_clause" => {
                delta.decision_points = 1;
                if let Some(body) = node.child_by_field_name("body") {
                    let has_code = named_children(body)
                        .iter()
                        .any(|n| !matches!(n.kind(), "line_comment" | "block_comment"));
                    if !has_code {
                        self.classes[class].smell_facts.empty_catch_count += 1;
                    }
                }
            }
            "switch_label" => {
                if node.child(0).is_some_and(|c| c.kind() == "case") {
                    delta.decision_points = 1;
                }
            }
            "switch_expression" => {
                if !switch_has_default(node) {
                    self.classes[class].smell_facts.switch_without_default_count += 1;
                }
            }
            "binary_expression" => {
                let op = node.child_by_field_name("operator").map(|o| o.kind()).unwrap_or("");
                match op {
                    "&&" | "||" => delta.decision_points = 1,
                    "==" | "!=" | "<" | ">" | "<=" | ">=" => delta.comparison_count = 1,
                    "+" | "-" | "*" | "/" | "%" => delta.math_op_count = 1,
                    _ => {}
                }
            }
            "try_statement" | "try_with_resources_statement" => delta.try_catch_count = 1,
            "return_statement" => delta.return_count = 1,
            "assignment_expression" => delta.assignment_count = 1,
            "parenthesized_expression" => {
                let parent = node.parent().map(|p| p.kind()).unwrap_or("");
                if !matches!(
                    parent,
                    "if_statement" | "while_statement" | "do_statement" | "switch_expression"
                        | "synchronized_statement"
                ) {
                    delta.parenthesized_expr_count = 1;
                }
            }
            "string_literal" => delta.string_literal_count = 1,
            "decimal_integer_literal" | "hex_integer_literal" | "octal_integer_literal"
            | "binary_integer_literal" | "decimal_floating_point_literal"
            | "hex_floating_point_literal" => {
                delta.number_literal_count = 1;
                if !ctx.exempt_numbers {
                    let mut value = parse_number(self.text(node));
                    if node.parent().is_some_and(|p| {
                        p.kind() == "unary_expression"
                            && p.child_by_field_name("operator").is_some_and(|o| o.kind() == "-")
                    }) {
                        value = -value;
                    }
                    self.classes[class].smell_facts.numeric_literals.push(value);
                }
            }
            "lambda_expression" => delta.lambda_count = 1,
            "local_variable_declaration" => {
                let ty = node
                    .child_by_field_name("type")
                    .map(|t| normalize_type_name(self.text(t)))
                    .unwrap_or_default();
                let mut cursor = node.walk();
                let decls: Vec<Node> = node.children_by_field_name("declarator", &mut cursor).collect();
                for d in decls {
                    delta.variable_decl_count += 1;
                    if let Some(n) = d.child_by_field_name("name") {
                        let name = self.text(n).to_string();
                        let mut local_ty = ty.clone();
                        if local_ty == "var" {
                            local_ty = d
                                .child_by_field_name("value")
                                .filter(|v| v.kind() == "object_creation_expression")
                                .and_then(|v| v.child_by_field_name("type"))
                                .map(|t| normalize_type_name(self.text(t)))
                                .unwrap_or_default();
                        }
                        self.declare_local(ctx, name, local_ty);
                    }
                }
            }
            "resource" | "catch_formal_parameter" => {}
            "method_invocation" => self.invocation(node, ctx),
            "field_access" => {
                if let Some(obj) = node.child_by_field_name("object") {
                    if obj.kind() == "identifier" && starts_upper(self.text(obj)) {
                        let name = self.text(obj).to_string();
                        self.classes[class].static_refs.push(name);
                    }
                }
            }
            "scoped_type_identifier" if node.parent().map(|p| p.kind()) != Some("scoped_type_identifier") => {
                let t = normalize_type_name(self.text(node));
                self.classes[class].type_refs.push(t);
            }
            _ => {}
        }

        // loop variables and resources are declarations too
        if matches!(kind, "enhanced_for_statement" | "resource" | "catch_formal_parameter") {
            if let Some(n) = node.child_by_field_name("name") {
                let ty = if kind == "catch_formal_parameter" {
                    named_children(node)
                        .into_iter()
                        .find(|c| c.kind() == "catch_type")
                        .map(|t| normalize_type_name(self.text(t)))
                        .unwrap_or_default()
                } else {
                    node.child_by_field_name("type")
                        .map(|t| normalize_type_name(self.text(t)))
                        .unwrap_or_default()
                };
                if kind != "catch_formal_parameter" {
                    delta.variable_decl_count += 1;
                }
                let name = self.text(n).to_string();
                self.declare_local(ctx, name, ty);
            }
        }

        if STATEMENT_KINDS.contains(&kind) {
            let len = collapsed_len(node, self.src);
            self.classes[class].smell_facts.statement_lengths.push(len);
        }

        if matches!(kind, "block" | "switch_block") && !is_body {
            delta.max_nesting = ctx.depth + 1;
        }

        add_stats(&mut self.classes[class].stats, &delta);
        if let Some(m) = ctx.method {
            add_stats(&mut self.classes[class].methods[m].body_stats, &delta);
        }
    }

    fn declare_local(&mut self, ctx: Ctx, name: String, ty: String) {
        let Some(class) = ctx.class else { return };
        self.classes[class].smell_facts.declared_names.push(name.clone());
        if let Some(m) = ctx.method {
            self.classes[class].methods[m].local_types.entry(name).or_insert(ty);
        }
    }

    fn invocation(&mut self, node: Node<'a>, ctx: Ctx) {
        let Some(class) = ctx.class else { return };
        let name = node
            .child_by_field_name("name")
            .map(|n| self.text(n).to_string())
            .unwrap_or_default();
        let arg_count = node
            .child_by_field_name("arguments")
            .map(|a| {
                named_children(a)
                    .iter()
                    .filter(|n| !matches!(n.kind(), "line_comment" | "block_comment"))
                    .count()
            })
            .unwrap_or(0);
        let object = node.child_by_field_name("object");
        let receiver = match object {
            None => Receiver::Implicit,
            Some(o) => match o.kind() {
                "this" => Receiver::This,
                "super" => Receiver::Super,
                "identifier" => Receiver::Name(self.text(o).to_string()),
                "field_access" if is_name_chain(o) => Receiver::Name(self.text(o).split_whitespace().collect()),
                "object_creation_expression"
                    if !named_children(o).iter().any(|n| n.kind() == "class_body") =>
                {
                    Receiver::New(
                        o.child_by_field_name("type")
                            .map(|t| normalize_type_name(self.text(t)))
                            .unwrap_or_default(),
                    )
                }
                _ => Receiver::Expr,
            },
        };
        if let Receiver::Name(n) = &receiver {
            let first = n.split('.').next().unwrap_or("");
            if starts_upper(first) && !n.contains('.') {
                self.classes[class].static_refs.push(n.clone());
            }
        }
        let receiver_tail = match &receiver {
            Receiver::Name(n) => n.rsplit('.').next().unwrap_or("").to_string(),
            _ => String::new(),
        };
        let is_log = LOG_NAMES.contains(&name.as_str()) || LOG_NAMES.contains(&receiver_tail.as_str());
        let inv = Invocation { name, arg_count, receiver };
        if is_log {
            self.classes[class].stats.log_statement_count += 1;
        }
        match ctx.method {
            Some(m) => {
                let method = &mut self.classes[class].methods[m];
                if is_log {
                    method.body_stats.log_statement_count += 1;
                }
                method.invocations.push(inv);
            }
            None => self.classes[class].initializer_invocations.push(inv),
        }
    }

    fn finish(mut self, path: &str) -> SourceUnit {
        for (ci, class) in self.classes.iter_mut().enumerate() {
            let acc = &self.class_acc[ci];
            class.loc = acc.rows.len().max(1) as u32;
            class.stats.unique_word_count = acc.words.len() as u32;
            class.stats.line_lengths = row_lengths(&self.lines, &acc.rows);
            for (mi, method) in class.methods.iter_mut().enumerate() {
                let macc = &self.method_acc[ci][mi];
                method.loc = macc.scope.rows.len().max(1) as u32;
                method.body_stats.unique_word_count = macc.scope.words.len() as u32;
                method.body_stats.line_lengths = row_lengths(&self.lines, &macc.scope.rows);
                let mut accessed: BTreeSet<String> = macc
                    .plain_idents
                    .iter()
                    .filter(|n| !method.local_types.contains_key(*n))
                    .cloned()
                    .collect();
                accessed.extend(macc.this_fields.iter().cloned());
                method.accessed_names = accessed;
            }
        }
        SourceUnit {
            path: path.to_string(),
            package: self.package,
            imports: self.imports,
            classes: self.classes,
            loc: self.unit_rows.len() as u32,
        }
    }
}

fn add_stats(into: &mut StatementStats, d: &StatementStats) {
    into.loop_count += d.loop_count;
    into.comparison_count += d.comparison_count;
    into.try_catch_count += d.try_catch_count;
    into.return_count += d.return_count;
    into.assignment_count += d.assignment_count;
    into.math_op_count += d.math_op_count;
    into.parenthesized_expr_count += d.parenthesized_expr_count;
    into.string_literal_count += d.string_literal_count;
    into.number_literal_count += d.number_literal_count;
    into.variable_decl_count += d.variable_decl_count;
    into.max_nesting = into.max_nesting.max(d.max_nesting);
    into.lambda_count += d.lambda_count;
    into.decision_points += d.decision_points;
}

fn row_lengths(lines: &[&str], rows: &BTreeSet<usize>) -> Vec<u32> {
    rows.iter()
        .filter_map(|&r| lines.get(r))
        .map(|l| l.trim().chars().count() as u32)
        .collect()
}

fn named_children(node: Node) -> Vec<Node> {
    let mut cursor = node.walk();
    node.named_children(&mut cursor).collect()
}

fn is_invocation_name(node: Node) -> bool {
    node.parent().is_some_and(|p| {
        p.kind() == "method_invocation"
            && p.child_by_field_name("name").map(|n| n.id()) == Some(node.id())
    })
}

fn is_name_chain(node: Node) -> bool {
    match node.kind() {
        "identifier" | "this" => true,
        "field_access" => {
            node.child_by_field_name("object").is_some_and(is_name_chain)
                && node.child_by_field_name("field").is_some_and(|f| f.kind() == "identifier")
        }
        _ => false,
    }
}

fn starts_upper(s: &str) -> bool {
    s.chars().next().is_some_and(|c| c.is_uppercase())
}

fn switch_has_default(node: Node) -> bool {
    let Some(block) = node.child_by_field_name("body") else { return false };
    for entry in named_children(block) {
        for label in named_children(entry).into_iter().filter(|n| n.kind() == "switch_label") {
            let mut cursor = label.walk();
            if label.children(&mut cursor).any(|c| c.kind() == "default") {
                return true;
            }
        }
    }
    false
}

/// Length of a statement's text with whitespace runs collapsed to one space and the
/// bodies of anonymous classes and block lambdas elided.
fn collapsed_len(node: Node, src: &str) -> u32 {
    let mut total = 0u32;
    let mut prev_end: Option<usize> = None;
    let mut stack = vec![node];
    while let Some(n) = stack.pop() {
        let kind = n.kind();
        if kind == "line_comment" || kind == "block_comment" {
            continue;
        }
        let elided = kind == "class_body"
            || (kind == "block" && n.parent().is_some_and(|p| p.kind() == "lambda_expression"));
        if n.child_count() == 0 || elided {
            if let Some(end) = prev_end {
                if n.start_byte() > end {
                    total += 1;
                }
            }
            total += if elided { 2 } else { src[n.byte_range()].chars().count() as u32 };
            prev_end = Some(n.end_byte());
            continue;
        }
        let mut cursor = n.walk();
        let children: Vec<Node> = n.children(&mut cursor).collect();
        stack.extend(children.into_iter().rev());
    }
    total
}

/// Numeric value of a Java literal; unparseable forms fall back to NaN.
pub(crate) fn parse_number(text: &str) -> f64 {
    let t: String = text.chars().filter(|&c| c != '_').collect();
    let lower = t.to_ascii_lowercase();
    let int_part = lower.trim_end_matches('l');
    if let Some(hex) = int_part.strip_prefix("0x") {
        if !hex.contains('.') && !hex.contains('p') {
            return u64::from_str_radix(hex, 16).map(|v| v as f64).unwrap_or(f64::NAN);
        }
        return f64::NAN;
    }
    if let Some(bin) = int_part.strip_prefix("0b") {
        return u64::from_str_radix(bin, 2).map(|v| v as f64).unwrap_or(f64::NAN);
    }
    if int_part.len() > 1
        && int_part.starts_with('0')
        && int_part.chars().all(|c| c.is_ascii_digit())
    {
        return u64::from_str_radix(&int_part[1..], 8).map(|v| v as f64).unwrap_or(f64::NAN);
    }
    let float_part = lower.trim_end_matches(['f', 'd', 'l']);
    float_part.parse::<f64>().unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(src: &str) -> SourceUnit {
        parse_source("T.java", src).expect("parses")
    }

    #[test]
    fn one_empty_class() {
        let u = unit("class A {}");
        assert_eq!(u.classes.len(), 1);
        assert_eq!(u.classes[0].methods.len(), 0);
        assert_eq!(u.classes[0].kind, ClassKind::Normal);
        assert_eq!(u.classes[0].loc, 1);
    }

    #[test]
    fn anonymous_listener_gets_its_own_class() {
        let u = unit(
            "package p;\nclass A {\n  void f() {\n    b.set(new Listener() {\n      public void on() { g(); }\n    });\n  }\n}\n",
        );
        let kinds: Vec<ClassKind> = u.classes.iter().map(|c| c.kind).collect();
        assert_eq!(kinds, vec![ClassKind::Normal, ClassKind::Anonymous]);
        let anon = &u.classes[1];
        assert_eq!(anon.qualified_name, "p.A$1");
        assert_eq!(anon.superclass.as_deref(), Some("Listener"));
        assert_eq!(anon.enclosing, Some(0));
        assert_eq!(anon.methods[0].invocations.len(), 1);
        // the call inside the anonymous body is not attributed to f()
        assert_eq!(u.classes[0].methods[0].invocations.len(), 1);
        assert_eq!(u.classes[0].methods[0].invocations[0].name, "set");
    }

    #[test]
    fn unbalanced_braces_report_a_line() {
        let err = parse_source("Bad.java", "class A {\n  void f() {\n    if (x) {\n  }\n").unwrap_err();
        assert_eq!(err.path, "Bad.java");
        assert!(err.line >= 1, "{err}");
    }

    #[test]
    fn parse_is_deterministic() {
        let src = "package q; import java.util.*; class A extends B { int x; void f(int y) { if (y > 0 && x < 2) { x = y; } } }";
        assert_eq!(unit(src), unit(src));
    }

    #[test]
    fn counts_statement_kinds() {
        let u = unit(
            r#"class A {
  int f(int x) {
    int a = 1, b = 2;
    for (int i = 0; i < x; i++) { a += i * 2; }
    while (a > 100) { a = a / 2; }
    try { g("s"); } catch (Exception e) { }
    Runnable r = () -> {};
    Log.d("tag", "msg");
    return (a + b);
  }
}"#,
        );
        let s = &u.classes[0].methods[0].body_stats;
        assert_eq!(s.loop_count, 2);
        assert_eq!(s.comparison_count, 2);
        assert_eq!(s.try_catch_count, 1);
        assert_eq!(s.return_count, 1);
        assert_eq!(s.assignment_count, 2);
        assert_eq!(s.math_op_count, 3);
        assert_eq!(s.parenthesized_expr_count, 1);
        assert_eq!(s.string_literal_count, 3);
        assert_eq!(s.lambda_count, 1);
        assert_eq!(s.log_statement_count, 1);
        // a, b, i, r
        assert_eq!(s.variable_decl_count, 4);
        assert_eq!(s.max_nesting, 1);
        assert_eq!(u.classes[0].smell_facts.empty_catch_count, 1);
        // for, while, catch
        assert_eq!(s.decision_points, 3);
    }

    #[test]
    fn nesting_depth_counts_inner_blocks() {
        let u = unit("class A { void f() { if (a) { while (b) { { } } } } }");
        assert_eq!(u.classes[0].methods[0].body_stats.max_nesting, 3);
        let u = unit("class A { void f() { } }");
        assert_eq!(u.classes[0].methods[0].body_stats.max_nesting, 0);
    }

    #[test]
    fn switch_without_default_is_recorded() {
        let u = unit("class A { void f(int x) { switch (x) { case 1: break; } switch (x) { case 2 -> g(); default -> h(); } } }");
        assert_eq!(u.classes[0].smell_facts.switch_without_default_count, 1);
        assert_eq!(u.classes[0].methods[0].body_stats.decision_points, 2);
    }

    #[test]
    fn final_field_literals_are_exempt() {
        let u = unit("class A { static final int K = 42; int y = 7; void f() { g(-1, 3, 2.5f); } }");
        let lits = &u.classes[0].smell_facts.numeric_literals;
        assert_eq!(lits, &vec![7.0, -1.0, 3.0, 2.5]);
        assert_eq!(u.classes[0].stats.number_literal_count, 5);
    }

    #[test]
    fn interface_members_are_public() {
        let u = unit("interface I { int K = 1; void a(); default void b() {} }");
        let c = &u.classes[0];
        assert_eq!(c.kind, ClassKind::Interface);
        assert!(c.methods.iter().all(|m| m.modifiers.is_public()));
        assert!(c.methods[0].modifiers.is_abstract());
        assert!(!c.methods[1].modifiers.is_abstract());
        assert!(c.fields[0].modifiers.is_final());
    }

    #[test]
    fn nested_and_local_classes_are_inner() {
        let u = unit("package p; class A { static class B {} enum E { X } void f() { class L {} } }");
        let names: Vec<(&str, ClassKind)> =
            u.classes.iter().map(|c| (c.qualified_name.as_str(), c.kind)).collect();
        assert_eq!(
            names,
            vec![
                ("p.A", ClassKind::Normal),
                ("p.A.B", ClassKind::Inner),
                ("p.A.E", ClassKind::EnumDecl),
                ("p.A.L", ClassKind::Inner),
            ]
        );
    }

    #[test]
    fn field_accesses_separate_this_and_locals() {
        let u = unit("class A { int x; int y; void f(int x) { this.x = x; y++; } }");
        let m = &u.classes[0].methods[0];
        assert!(m.accessed_names.contains("x"));
        assert!(m.accessed_names.contains("y"));
        assert_eq!(m.local_types.get("x").map(String::as_str), Some("int"));
    }

    #[test]
    fn number_parsing() {
        assert_eq!(parse_number("0x1F"), 31.0);
        assert_eq!(parse_number("1_000L"), 1000.0);
        assert_eq!(parse_number("017"), 15.0);
        assert_eq!(parse_number("0b101"), 5.0);
        assert_eq!(parse_number("2.5f"), 2.5);
        assert_eq!(parse_number("1e3"), 1000.0);
        assert_eq!(parse_number("0"), 0.0);
    }

    #[test]
    fn method_loc_and_signature() {
        let u = unit("class A {\n  // note\n  void f(int a, String b) {\n\n    g();\n  }\n}\n");
        let m = &u.classes[0].methods[0];
        assert_eq!(m.loc, 3);
        assert_eq!(m.signature(), "f(int,String)");
        assert_eq!(u.classes[0].loc, 5);
        assert_eq!(u.loc, 5);
    }
}
