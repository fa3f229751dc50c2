//! A small imperative language shared by client programs, library
//! implementations, synthesized unit tests and generated code fragments.
//!
//! Programs are flat: every function body is a list of statements with no
//! control flow. Variables are function-local names; the analysis turns them
//! into [`VarId`]s qualified by the enclosing function.

mod interface;
mod parse;
mod print;
mod validate;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use interface::{library_interface, FnSig, Interface, Position, VisibleVar};
pub use parse::parse_program;
pub use print::{print_function, print_program};
pub use validate::validate;

macro_rules! name_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(s: impl Into<String>) -> Self {
                Self(s.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_string())
            }
        }
    };
}

name_type!(
    /// Qualified function name: `Box.set` for library functions, a bare name
    /// for client functions.
    FuncId
);
name_type!(TypeId);
name_type!(FieldId);
name_type!(
    /// Allocation site label. Sites starting with `~` belong to generated
    /// fragments and never show up in program points-to reports.
    AllocSiteId
);

impl FuncId {
    /// The unqualified part after the last `.`.
    pub fn short(&self) -> &str {
        self.0.rsplit('.').next().unwrap_or(&self.0)
    }

    /// The owning library type, if the name is qualified.
    pub fn owner(&self) -> Option<&str> {
        self.0.rsplit_once('.').map(|(o, _)| o)
    }
}

impl AllocSiteId {
    pub fn is_fragment(&self) -> bool {
        self.0.starts_with('~')
    }
}

pub const OBJECT: &str = "Object";

/// A variable qualified by the function that declares it.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct VarId {
    pub func: FuncId,
    pub name: String,
}

impl VarId {
    pub fn new(func: impl Into<String>, name: impl Into<String>) -> Self {
        VarId { func: FuncId(func.into()), name: name.into() }
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}::{}", self.func, self.name)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub enum PrimType {
    Int,
    Bool,
    Char,
}

impl PrimType {
    pub fn keyword(self) -> &'static str {
        match self {
            PrimType::Int => "int",
            PrimType::Bool => "bool",
            PrimType::Char => "char",
        }
    }

    pub fn default_literal(self) -> Literal {
        match self {
            PrimType::Int => Literal::Int(0),
            PrimType::Bool => Literal::Bool(true),
            PrimType::Char => Literal::Char('a'),
        }
    }
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub enum Ty {
    Ref(TypeId),
    Prim(PrimType),
}

impl Ty {
    pub fn object() -> Ty {
        Ty::Ref(TypeId::new(OBJECT))
    }

    pub fn is_ref(&self) -> bool {
        matches!(self, Ty::Ref(_))
    }
}

impl fmt::Display for Ty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ty::Ref(t) => f.write_str(t.as_str()),
            Ty::Prim(p) => f.write_str(p.keyword()),
        }
    }
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub enum Literal {
    Null,
    Int(i64),
    Bool(bool),
    Char(char),
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Null => f.write_str("null"),
            Literal::Int(i) => write!(f, "{i}"),
            Literal::Bool(b) => write!(f, "{b}"),
            Literal::Char(c) => write!(f, "'{c}'"),
        }
    }
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub enum Stmt {
    /// `dst = src;`
    Assign { dst: String, src: String },
    /// `dst = new T @site;`
    Alloc { dst: String, ty: TypeId, site: AllocSiteId },
    /// `base.field = src;`
    Store { base: String, field: FieldId, src: String },
    /// `dst = base.field;`
    Load { dst: String, base: String, field: FieldId },
    /// `[dst =] f(args);`
    Call { dst: Option<String>, func: FuncId, args: Vec<String> },
    /// `return src;`
    Return { src: String },
    /// `dst = literal;`
    PrimInit { dst: String, lit: Literal },
    /// `return lhs == rhs;`, the final statement of a unit test.
    ReturnSame { lhs: String, rhs: String },
}

impl Stmt {
    /// Variables the statement writes.
    pub fn defined(&self) -> Option<&str> {
        match self {
            Stmt::Assign { dst, .. }
            | Stmt::Alloc { dst, .. }
            | Stmt::Load { dst, .. }
            | Stmt::PrimInit { dst, .. } => Some(dst),
            Stmt::Call { dst, .. } => dst.as_deref(),
            _ => None,
        }
    }

    /// Variables the statement reads.
    pub fn used(&self) -> Vec<&str> {
        match self {
            Stmt::Assign { src, .. } => vec![src],
            Stmt::Store { base, src, .. } => vec![base, src],
            Stmt::Load { base, .. } => vec![base],
            Stmt::Call { args, .. } => args.iter().map(|a| a.as_str()).collect(),
            Stmt::Return { src } => vec![src],
            Stmt::ReturnSame { lhs, rhs } => vec![lhs, rhs],
            Stmt::Alloc { .. } | Stmt::PrimInit { .. } => vec![],
        }
    }
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub ty: Ty,
}

impl Param {
    pub fn new(name: impl Into<String>, ty: Ty) -> Self {
        Param { name: name.into(), ty }
    }
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct FunctionDef {
    pub id: FuncId,
    pub params: Vec<Param>,
    pub ret: Option<Param>,
    pub body: Vec<Stmt>,
    pub is_library: bool,
    pub is_ctor: bool,
}

impl FunctionDef {
    pub fn var(&self, name: &str) -> VarId {
        VarId { func: self.id.clone(), name: name.to_string() }
    }

    pub fn param_var(&self, i: usize) -> VarId {
        self.var(&self.params[i].name)
    }

    pub fn ret_var(&self) -> Option<VarId> {
        self.ret.as_ref().map(|r| self.var(&r.name))
    }

    /// Type of a parameter or return variable, if `name` is one.
    pub fn declared_type(&self, name: &str) -> Option<&Ty> {
        self.params
            .iter()
            .chain(self.ret.iter())
            .find(|p| p.name == name)
            .map(|p| &p.ty)
    }

    /// Every variable name mentioned by the signature or the body, in first
    /// occurrence order.
    pub fn locals(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        let mut push = |s: &str| {
            if !out.iter().any(|o| o == s) {
                out.push(s.to_string());
            }
        };
        for p in self.params.iter().chain(self.ret.iter()) {
            push(&p.name);
        }
        for s in &self.body {
            if let Some(d) = s.defined() {
                push(d);
            }
            for u in s.used() {
                push(u);
            }
        }
        out
    }
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct FieldDecl {
    pub id: FieldId,
    /// Fields introduced by generated fragments.
    pub ghost: bool,
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct TypeDef {
    pub id: TypeId,
    pub fields: Vec<FieldDecl>,
    pub ctors: Vec<FuncId>,
    /// Declared with `library` rather than `type`.
    pub library: bool,
}

impl TypeDef {
    pub fn has_field(&self, f: &FieldId) -> bool {
        self.fields.iter().any(|d| &d.id == f)
    }
}

/// A whole program: type declarations and functions in declaration order.
#[derive(Clone, PartialEq, Debug, Default, Serialize, Deserialize)]
pub struct Program {
    pub types: Vec<TypeDef>,
    pub functions: Vec<FunctionDef>,
    pub entry: Option<FuncId>,
}

impl Program {
    pub fn function(&self, id: &FuncId) -> Option<&FunctionDef> {
        self.functions.iter().find(|f| &f.id == id)
    }

    pub fn function_by_name(&self, name: &str) -> Option<&FunctionDef> {
        self.functions.iter().find(|f| f.id.as_str() == name)
    }

    pub fn type_def(&self, id: &TypeId) -> Option<&TypeDef> {
        self.types.iter().find(|t| &t.id == id)
    }

    /// `Object` is built in; every other reference type must be declared.
    pub fn has_type(&self, id: &TypeId) -> bool {
        id.as_str() == OBJECT || self.type_def(id).is_some()
    }

    pub fn has_field(&self, f: &FieldId) -> bool {
        self.types.iter().any(|t| t.has_field(f))
    }

    pub fn fields(&self) -> impl Iterator<Item = &FieldId> {
        self.types.iter().flat_map(|t| t.fields.iter().map(|d| &d.id))
    }

    pub fn library_functions(&self) -> impl Iterator<Item = &FunctionDef> {
        self.functions.iter().filter(|f| f.is_library)
    }

    pub fn client_functions(&self) -> impl Iterator<Item = &FunctionDef> {
        self.functions.iter().filter(|f| !f.is_library)
    }

    /// All allocation sites in declaration order.
    pub fn sites(&self) -> Vec<&AllocSiteId> {
        self.functions
            .iter()
            .flat_map(|f| f.body.iter())
            .filter_map(|s| match s {
                Stmt::Alloc { site, .. } => Some(site),
                _ => None,
            })
            .collect()
    }

    /// Keeps only the library part (types and library functions).
    pub fn library_only(&self) -> Program {
        Program {
            types: self.types.clone(),
            functions: self.library_functions().cloned().collect(),
            entry: None,
        }
    }

    /// Union of two programs. Identical type declarations are shared;
    /// conflicting declarations, duplicate functions and duplicate
    /// allocation sites are errors.
    pub fn merge(&self, other: &Program) -> Result<Program, IrError> {
        let mut out = self.clone();
        for t in &other.types {
            match out.type_def(&t.id) {
                Some(existing) if existing == t => {}
                Some(_) => {
                    return Err(IrError::Validation(format!(
                        "conflicting declarations of type {}",
                        t.id
                    )))
                }
                None => out.types.push(t.clone()),
            }
        }
        for f in &other.functions {
            if out.function(&f.id).is_some() {
                return Err(IrError::Validation(format!("function {} declared twice", f.id)));
            }
            out.functions.push(f.clone());
        }
        let mut seen = std::collections::HashSet::new();
        for s in out.sites() {
            if !seen.insert(s.clone()) {
                return Err(IrError::Validation(format!("allocation site {s} declared twice")));
            }
        }
        if out.entry.is_none() {
            out.entry = other.entry.clone();
        }
        Ok(out)
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum IrError {
    #[error("parse error at {line}:{col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    #[error("invalid program: {0}")]
    Validation(String),
}

pub(crate) fn lower_first(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_lowercase().collect::<String>() + c.as_str(),
        None => String::new(),
    }
}

pub(crate) fn upper_first(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().collect::<String>() + c.as_str(),
        None => String::new(),
    }
}
