use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{FuncId, Param, Program, Ty, TypeId, VarId};

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub enum Position {
    Param(usize),
    Return,
}

/// A parameter or return value of a library function, the alphabet of path
/// specifications.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct VisibleVar {
    pub func: FuncId,
    pub pos: Position,
}

impl VisibleVar {
    pub fn param(func: impl Into<String>, i: usize) -> Self {
        VisibleVar { func: FuncId(func.into()), pos: Position::Param(i) }
    }

    pub fn ret(func: impl Into<String>) -> Self {
        VisibleVar { func: FuncId(func.into()), pos: Position::Return }
    }

    pub fn is_return(&self) -> bool {
        self.pos == Position::Return
    }
}

impl fmt::Display for VisibleVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.pos {
            Position::Param(i) => write!(f, "{}#{i}", self.func),
            Position::Return => write!(f, "{}#ret", self.func),
        }
    }
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct FnSig {
    pub id: FuncId,
    pub params: Vec<Param>,
    pub ret: Option<Param>,
}

/// The visible surface of a library: non-constructor library functions and
/// their reference-typed parameters and returns.
#[derive(Clone, Debug)]
pub struct Interface {
    pub functions: Vec<FnSig>,
    /// Declaration order: per function, reference parameters then return.
    pub visible: Vec<VisibleVar>,
    names: Vec<String>,
    by_var: HashMap<VisibleVar, usize>,
    by_name: HashMap<String, usize>,
}

pub fn library_interface(p: &Program) -> Interface {
    Interface::new(
        p.library_functions()
            .filter(|f| !f.is_ctor)
            .map(|f| FnSig { id: f.id.clone(), params: f.params.clone(), ret: f.ret.clone() })
            .collect(),
    )
}

impl Interface {
    pub fn new(functions: Vec<FnSig>) -> Interface {
        let mut visible = Vec::new();
        let mut raw = Vec::new();
        for f in &functions {
            for (i, p) in f.params.iter().enumerate() {
                if p.ty.is_ref() {
                    visible.push(VisibleVar { func: f.id.clone(), pos: Position::Param(i) });
                    raw.push((p.name.clone(), f.id.clone()));
                }
            }
            if let Some(r) = &f.ret {
                if r.ty.is_ref() {
                    visible.push(VisibleVar { func: f.id.clone(), pos: Position::Return });
                    raw.push((r.name.clone(), f.id.clone()));
                }
            }
        }
        let short: Vec<String> = raw.iter().map(|(n, f)| format!("{n}_{}", f.short())).collect();
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for s in &short {
            *counts.entry(s).or_default() += 1;
        }
        let names: Vec<String> = raw
            .iter()
            .zip(&short)
            .map(|((n, f), s)| if counts[s.as_str()] > 1 { format!("{n}_{f}") } else { s.clone() })
            .collect();
        let by_var = visible.iter().cloned().enumerate().map(|(i, v)| (v, i)).collect();
        let by_name = names.iter().cloned().enumerate().map(|(i, n)| (n, i)).collect();
        Interface { functions, visible, names, by_var, by_name }
    }

    pub fn len(&self) -> usize {
        self.visible.len()
    }

    pub fn is_empty(&self) -> bool {
        self.visible.is_empty()
    }

    pub fn index_of(&self, v: &VisibleVar) -> Option<usize> {
        self.by_var.get(v).copied()
    }

    /// Display name such as `ob_set` or `r_get`.
    pub fn name(&self, v: &VisibleVar) -> String {
        match self.index_of(v) {
            Some(i) => self.names[i].clone(),
            None => v.to_string(),
        }
    }

    pub fn name_at(&self, i: usize) -> &str {
        &self.names[i]
    }

    /// Inverse of [`Interface::name`]; also accepts fully qualified names.
    pub fn resolve(&self, name: &str) -> Option<VisibleVar> {
        if let Some(&i) = self.by_name.get(name) {
            return Some(self.visible[i].clone());
        }
        let (var, func) = name.split_once('_')?;
        self.visible
            .iter()
            .find(|v| v.func.as_str() == func && self.var_name(v) == var)
            .cloned()
    }

    pub fn sig(&self, f: &FuncId) -> Option<&FnSig> {
        self.functions.iter().find(|s| &s.id == f)
    }

    fn slot(&self, v: &VisibleVar) -> &Param {
        let sig = self.sig(&v.func).expect("visible variable of an unknown function");
        match v.pos {
            Position::Param(i) => &sig.params[i],
            Position::Return => sig.ret.as_ref().expect("function has no return"),
        }
    }

    /// The declared variable name, e.g. `ob` or `r`.
    pub fn var_name(&self, v: &VisibleVar) -> &str {
        &self.slot(v).name
    }

    pub fn ty(&self, v: &VisibleVar) -> &Ty {
        &self.slot(v).ty
    }

    /// Type of a visible variable as a reference type.
    pub fn ref_type(&self, v: &VisibleVar) -> TypeId {
        match self.ty(v) {
            Ty::Ref(t) => t.clone(),
            Ty::Prim(_) => unreachable!("primitive slots are not visible"),
        }
    }

    pub fn var_id(&self, v: &VisibleVar) -> VarId {
        VarId { func: v.func.clone(), name: self.var_name(v).to_string() }
    }

    /// Indices of the visible variables of one function.
    pub fn vars_of(&self, f: &FuncId) -> Vec<usize> {
        (0..self.visible.len()).filter(|&i| &self.visible[i].func == f).collect()
    }

    pub fn params(&self) -> Vec<usize> {
        (0..self.visible.len()).filter(|&i| !self.visible[i].is_return()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_program;

    const BOX: &str = "library Box {\n  field f;\n  ctor make(this) { }\n  fn set(this, ob) {\n    this.f = ob;\n  }\n  fn get(this) -> r {\n    r = this.f;\n  }\n  fn size(this) -> n: int {\n    n = 0;\n  }\n}\n";

    #[test]
    fn box_interface_order_and_names() {
        let p = parse_program(BOX).unwrap();
        let iface = library_interface(&p);
        let names: Vec<&str> = (0..iface.len()).map(|i| iface.name_at(i)).collect();
        assert_eq!(names, vec!["this_set", "ob_set", "this_get", "r_get", "this_size"]);
        assert_eq!(iface.resolve("ob_set"), Some(VisibleVar::param("Box.set", 1)));
        assert_eq!(iface.resolve("r_Box.get"), Some(VisibleVar::ret("Box.get")));
    }

    #[test]
    fn clashing_short_names_are_qualified() {
        let src = format!("{BOX}\nlibrary Bag {{\n  field g;\n  fn get(this) -> r {{\n    r = this.g;\n  }}\n}}\n");
        let p = parse_program(&src).unwrap();
        let iface = library_interface(&p);
        assert_eq!(iface.name(&VisibleVar::ret("Box.get")), "r_Box.get");
        assert_eq!(iface.name(&VisibleVar::ret("Bag.get")), "r_Bag.get");
        assert_eq!(iface.name(&VisibleVar::param("Box.set", 1)), "ob_set");
    }
}
