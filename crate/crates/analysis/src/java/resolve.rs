use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{normalize_type_name, ClassInfo, ClassKind, Import, Invocation, MethodInfo, Receiver, SourceUnit};

pub type ClassId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MethodId {
    pub class: ClassId,
    pub index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SuperRef {
    None,
    /// Declared but not a corpus class (library or ambiguous).
    External,
    Internal(ClassId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolvedCall {
    /// Class whose member is invoked, when it is part of the corpus.
    pub target_class: Option<ClassId>,
    pub target_method: Option<MethodId>,
}

impl ResolvedCall {
    const UNRESOLVED: ResolvedCall = ResolvedCall { target_class: None, target_method: None };
}

/// File-level facts kept after the classes are moved into the flat class list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitInfo {
    pub path: String,
    pub package: String,
    pub imports: Vec<Import>,
    pub loc: u32,
    pub classes: Vec<ClassId>,
}

/// All parsed units of one app with corpus-wide name resolution applied.
///
/// Type names resolve by priority: same file (enclosing chain first), same
/// package, explicit single-type import, wildcard import, then a simple name
/// that is unique in the corpus. Anything else is external.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StructuralModel {
    pub units: Vec<UnitInfo>,
    pub classes: Vec<ClassInfo>,
    pub class_unit: Vec<usize>,
    pub enclosing: Vec<Option<ClassId>>,
    pub superclass: Vec<SuperRef>,
    /// Internal supertypes reached through `implements`/interface `extends`.
    pub interfaces: Vec<Vec<ClassId>>,
    /// Internal classes referenced as types (excluding self).
    pub type_deps: Vec<BTreeSet<ClassId>>,
    /// Per class, per method, per invocation.
    pub calls: Vec<Vec<Vec<ResolvedCall>>>,
    pub initializer_calls: Vec<Vec<ResolvedCall>>,
    pub by_qualified: BTreeMap<String, ClassId>,
    pub by_simple: BTreeMap<String, Vec<ClassId>>,
}

const PRIMITIVES: [&str; 10] = ["int", "long", "short", "byte", "char", "boolean", "float", "double", "void", "var"];

impl StructuralModel {
    pub fn build(units: Vec<SourceUnit>) -> Self {
        let mut infos = Vec::with_capacity(units.len());
        let mut classes = Vec::new();
        let mut class_unit = Vec::new();
        let mut enclosing = Vec::new();
        for (ui, unit) in units.into_iter().enumerate() {
            let offset = classes.len();
            let ids: Vec<ClassId> = (offset..offset + unit.classes.len()).collect();
            for mut class in unit.classes {
                class.enclosing = class.enclosing.map(|e| e + offset);
                enclosing.push(class.enclosing);
                class_unit.push(ui);
                classes.push(class);
            }
            infos.push(UnitInfo {
                path: unit.path,
                package: unit.package,
                imports: unit.imports,
                loc: unit.loc,
                classes: ids,
            });
        }
        let mut by_qualified = BTreeMap::new();
        let mut by_simple: BTreeMap<String, Vec<ClassId>> = BTreeMap::new();
        for (id, c) in classes.iter().enumerate() {
            by_qualified.entry(c.qualified_name.clone()).or_insert(id);
            if !c.simple_name.is_empty() {
                by_simple.entry(c.simple_name.clone()).or_default().push(id);
            }
        }
        let n = classes.len();
        let mut model = StructuralModel {
            units: infos,
            classes,
            class_unit,
            enclosing,
            superclass: vec![SuperRef::None; n],
            interfaces: vec![Vec::new(); n],
            type_deps: vec![BTreeSet::new(); n],
            calls: Vec::new(),
            initializer_calls: Vec::new(),
            by_qualified,
            by_simple,
        };
        model.resolve_hierarchy();
        model.resolve_type_deps();
        model.resolve_calls();
        model
    }

    pub fn class(&self, id: ClassId) -> &ClassInfo {
        &self.classes[id]
    }

    pub fn method(&self, id: MethodId) -> &MethodInfo {
        &self.classes[id.class].methods[id.index]
    }

    pub fn method_ids(&self) -> impl Iterator<Item = MethodId> + '_ {
        self.classes.iter().enumerate().flat_map(|(class, c)| {
            (0..c.methods.len()).map(move |index| MethodId { class, index })
        })
    }

    pub fn unit_of(&self, class: ClassId) -> usize {
        self.class_unit[class]
    }

    fn member_class(&self, owner: ClassId, name: &str) -> Option<ClassId> {
        let unit = &self.units[self.class_unit[owner]];
        unit.classes
            .iter()
            .copied()
            .find(|&c| self.enclosing[c] == Some(owner) && self.classes[c].simple_name == name)
    }

    /// Resolve a type name as written inside class `from`.
    pub fn resolve_type(&self, raw: &str, from: ClassId) -> Option<ClassId> {
        let name = normalize_type_name(raw);
        if name.is_empty() || PRIMITIVES.contains(&name.as_str()) {
            return None;
        }
        if name.contains('.') {
            if let Some(&id) = self.by_qualified.get(&name) {
                return Some(id);
            }
            let mut parts = name.split('.');
            let mut cur = self.resolve_simple(parts.next()?, from)?;
            for part in parts {
                cur = self.member_class(cur, part)?;
            }
            return Some(cur);
        }
        self.resolve_simple(&name, from)
    }

    fn resolve_simple(&self, name: &str, from: ClassId) -> Option<ClassId> {
        let unit = &self.units[self.class_unit[from]];
        let mut cur = Some(from);
        while let Some(c) = cur {
            if self.classes[c].simple_name == name {
                return Some(c);
            }
            if let Some(m) = self.member_class(c, name) {
                return Some(m);
            }
            cur = self.enclosing[c];
        }
        if let Some(&c) = unit.classes.iter().find(|&&c| self.classes[c].simple_name == name) {
            return Some(c);
        }
        let candidates = self.by_simple.get(name).map(Vec::as_slice).unwrap_or(&[]);
        let package = &self.classes[from].package;
        if let Some(&c) = candidates
            .iter()
            .find(|&&c| self.enclosing[c].is_none() && &self.classes[c].package == package)
        {
            return Some(c);
        }
        for import in unit.imports.iter().filter(|i| !i.is_static && !i.wildcard) {
            if import.path == name || import.path.ends_with(&format!(".{name}")) {
                // an explicit import decides, even when it names a library type
                return self.by_qualified.get(&import.path).copied();
            }
        }
        for import in unit.imports.iter().filter(|i| !i.is_static && i.wildcard) {
            if let Some(&c) = self.by_qualified.get(&format!("{}.{}", import.path, name)) {
                return Some(c);
            }
        }
        match candidates {
            [only] => Some(*only),
            _ => None,
        }
    }

    fn resolve_hierarchy(&mut self) {
        for id in 0..self.classes.len() {
            let mut interfaces: Vec<ClassId> = Vec::new();
            let mut superclass = SuperRef::None;
            if let Some(name) = self.classes[id].superclass.clone() {
                let scope = self.enclosing[id].filter(|_| self.classes[id].kind == ClassKind::Anonymous).unwrap_or(id);
                superclass = match self.resolve_type(&name, scope) {
                    Some(t) if t != id => {
                        if self.classes[t].kind == ClassKind::Interface {
                            interfaces.push(t);
                            SuperRef::External
                        } else {
                            SuperRef::Internal(t)
                        }
                    }
                    _ => SuperRef::External,
                };
                // anonymous `new SomeInterface() {}` has only Object as superclass
                if !interfaces.is_empty() {
                    superclass = SuperRef::None;
                }
            }
            for name in self.classes[id].interfaces.clone() {
                if let Some(t) = self.resolve_type(&name, id) {
                    if t != id && !interfaces.contains(&t) {
                        interfaces.push(t);
                    }
                }
            }
            self.superclass[id] = superclass;
            self.interfaces[id] = interfaces;
        }
    }

    fn resolve_type_deps(&mut self) {
        for id in 0..self.classes.len() {
            let mut deps = BTreeSet::new();
            let class = &self.classes[id];
            for name in class.type_refs.iter().chain(class.static_refs.iter()) {
                if let Some(t) = self.resolve_type(name, id) {
                    if t != id {
                        deps.insert(t);
                    }
                }
            }
            self.type_deps[id] = deps;
        }
    }

    fn resolve_calls(&mut self) {
        let mut calls = Vec::with_capacity(self.classes.len());
        let mut init_calls = Vec::with_capacity(self.classes.len());
        for id in 0..self.classes.len() {
            let class = &self.classes[id];
            let per_method: Vec<Vec<ResolvedCall>> = class
                .methods
                .iter()
                .map(|m| m.invocations.iter().map(|inv| self.resolve_call(inv, id, Some(m))).collect())
                .collect();
            let init: Vec<ResolvedCall> = class
                .initializer_invocations
                .iter()
                .map(|inv| self.resolve_call(inv, id, None))
                .collect();
            calls.push(per_method);
            init_calls.push(init);
        }
        self.calls = calls;
        self.initializer_calls = init_calls;
    }

    /// Find a non-constructor method by name and arity in `class`, its internal
    /// superclasses and its internal interfaces.
    pub fn find_method(&self, class: ClassId, name: &str, arity: usize) -> Option<MethodId> {
        let mut seen = BTreeSet::new();
        let mut queue = vec![class];
        while let Some(c) = queue.pop() {
            if !seen.insert(c) {
                continue;
            }
            if let Some(index) = self.classes[c]
                .methods
                .iter()
                .position(|m| !m.is_constructor && m.name == name && m.parameters.len() == arity)
            {
                return Some(MethodId { class: c, index });
            }
            // interfaces are searched after the superclass chain
            for &i in self.interfaces[c].iter().rev() {
                queue.push(i);
            }
            if let SuperRef::Internal(s) = self.superclass[c] {
                queue.push(s);
            }
        }
        None
    }

    fn find_field_type(&self, class: ClassId, name: &str) -> Option<(ClassId, String)> {
        let mut cur = Some(class);
        while let Some(outer) = cur {
            let mut seen = BTreeSet::new();
            let mut c = Some(outer);
            while let Some(k) = c {
                if !seen.insert(k) {
                    break;
                }
                if let Some(f) = self.classes[k].fields.iter().find(|f| f.name == name) {
                    return Some((k, f.type_name.clone()));
                }
                c = match self.superclass[k] {
                    SuperRef::Internal(s) => Some(s),
                    _ => None,
                };
            }
            cur = self.enclosing[outer];
        }
        None
    }

    fn receiver_class(&self, receiver: &str, class: ClassId, method: Option<&MethodInfo>) -> Option<ClassId> {
        if let Some(field) = receiver.strip_prefix("this.") {
            if field.contains('.') {
                return None;
            }
            let (owner, ty) = self.find_field_type(class, field)?;
            return self.resolve_type(&ty, owner);
        }
        if receiver.contains('.') {
            return self.resolve_type(receiver, class);
        }
        if let Some(ty) = method.and_then(|m| m.local_types.get(receiver)) {
            return self.resolve_type(ty, class);
        }
        if let Some((owner, ty)) = self.find_field_type(class, receiver) {
            return self.resolve_type(&ty, owner);
        }
        if receiver.chars().next().is_some_and(char::is_uppercase) {
            return self.resolve_type(receiver, class);
        }
        None
    }

    fn resolve_call(&self, inv: &Invocation, class: ClassId, method: Option<&MethodInfo>) -> ResolvedCall {
        let arity = inv.arg_count;
        let target = match &inv.receiver {
            Receiver::Implicit => {
                let mut cur = Some(class);
                while let Some(c) = cur {
                    if let Some(m) = self.find_method(c, &inv.name, arity) {
                        return ResolvedCall { target_class: Some(m.class), target_method: Some(m) };
                    }
                    cur = self.enclosing[c];
                }
                return ResolvedCall::UNRESOLVED;
            }
            Receiver::This => Some(class),
            Receiver::Super => match self.superclass[class] {
                SuperRef::Internal(s) => Some(s),
                _ => None,
            },
            Receiver::Name(n) => self.receiver_class(n, class, method),
            Receiver::New(t) => self.resolve_type(t, class),
            Receiver::Expr => None,
        };
        match target {
            Some(t) => match self.find_method(t, &inv.name, arity) {
                Some(m) => ResolvedCall { target_class: Some(m.class), target_method: Some(m) },
                None => ResolvedCall { target_class: Some(t), target_method: None },
            },
            None => ResolvedCall::UNRESOLVED,
        }
    }

    /// Distinct resolved (caller, callee) pairs between methods, self-calls excluded.
    pub fn call_edges(&self) -> BTreeSet<(MethodId, MethodId)> {
        let mut edges = BTreeSet::new();
        for (class, per_method) in self.calls.iter().enumerate() {
            for (index, calls) in per_method.iter().enumerate() {
                let caller = MethodId { class, index };
                for call in calls {
                    if let Some(callee) = call.target_method {
                        if callee != caller {
                            edges.insert((caller, callee));
                        }
                    }
                }
            }
        }
        edges
    }

    /// Internal classes whose resolved superclass is `id`.
    pub fn subclasses(&self, id: ClassId) -> Vec<ClassId> {
        (0..self.classes.len())
            .filter(|&c| self.superclass[c] == SuperRef::Internal(id))
            .collect()
    }

    /// Depth of inheritance: 1 for an implicit `Object` parent, +1 per internal
    /// ancestor, and 1 more for an external root superclass.
    pub fn dit(&self, id: ClassId) -> u32 {
        let mut depth = 1;
        let mut seen = BTreeSet::new();
        let mut cur = id;
        loop {
            if !seen.insert(cur) {
                return depth;
            }
            match self.superclass[cur] {
                SuperRef::None => return depth,
                SuperRef::External => return depth + 1,
                SuperRef::Internal(s) => {
                    depth += 1;
                    cur = s;
                }
            }
        }
    }
}
