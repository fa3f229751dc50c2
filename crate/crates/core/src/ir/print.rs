use std::fmt::Write;

use super::parse::auto_site_base;
use super::{FunctionDef, Program, Stmt, Ty};

fn param_text(f: &FunctionDef, name: &str, ty: &Ty) -> String {
    let default = match (f.is_library, f.id.owner(), name) {
        (true, Some(owner), "this") => Ty::Ref(super::TypeId::new(owner)),
        _ => Ty::object(),
    };
    if *ty == default {
        name.to_string()
    } else {
        format!("{name}: {ty}")
    }
}

fn stmt_text(f: &FunctionDef, s: &Stmt) -> String {
    match s {
        Stmt::Assign { dst, src } => format!("{dst} = {src};"),
        Stmt::Alloc { dst, ty, site } => {
            if site.as_str() == auto_site_base(f, dst) {
                format!("{dst} = new {ty};")
            } else {
                format!("{dst} = new {ty} @{site};")
            }
        }
        Stmt::Store { base, field, src } => format!("{base}.{field} = {src};"),
        Stmt::Load { dst, base, field } => format!("{dst} = {base}.{field};"),
        Stmt::Call { dst, func, args } => match dst {
            Some(d) => format!("{d} = {func}({});", args.join(", ")),
            None => format!("{func}({});", args.join(", ")),
        },
        Stmt::Return { src } => format!("return {src};"),
        Stmt::PrimInit { dst, lit } => format!("{dst} = {lit};"),
        Stmt::ReturnSame { lhs, rhs } => format!("return {lhs} == {rhs};"),
    }
}

/// Renders one function with the given indentation for its header.
pub fn print_function(f: &FunctionDef, indent: &str) -> String {
    let mut out = String::new();
    let kw = if f.is_ctor { "ctor" } else { "fn" };
    let name = if f.is_library { f.id.short() } else { f.id.as_str() };
    let params: Vec<String> = f.params.iter().map(|p| param_text(f, &p.name, &p.ty)).collect();
    let _ = write!(out, "{indent}{kw} {name}({})", params.join(", "));
    if let Some(r) = &f.ret {
        if r.ty == Ty::object() {
            let _ = write!(out, " -> {}", r.name);
        } else {
            let _ = write!(out, " -> {}: {}", r.name, r.ty);
        }
    }
    let mut body: &[Stmt] = &f.body;
    if let (Some(r), Some(Stmt::Return { src })) = (&f.ret, body.last()) {
        if *src == r.name {
            body = &body[..body.len() - 1];
        }
    }
    if body.is_empty() {
        out.push_str(" { }\n");
        return out;
    }
    out.push_str(" {\n");
    for s in body {
        let _ = writeln!(out, "{indent}  {}", stmt_text(f, s));
    }
    let _ = writeln!(out, "{indent}}}");
    out
}

/// Renders a program in the canonical layout the parser reads back to the
/// same value.
pub fn print_program(p: &Program) -> String {
    let mut blocks: Vec<String> = Vec::new();
    for t in &p.types {
        let mut b = String::new();
        let members: Vec<&FunctionDef> = p
            .functions
            .iter()
            .filter(|f| f.is_library && f.id.owner() == Some(t.id.as_str()))
            .collect();
        if t.library {
            let _ = writeln!(b, "library {} {{", t.id);
        } else if t.fields.is_empty() {
            let _ = writeln!(b, "type {};", t.id);
            blocks.push(b);
            continue;
        } else {
            let _ = writeln!(b, "type {} {{", t.id);
        }
        for fd in &t.fields {
            if fd.ghost {
                let _ = writeln!(b, "  field {}; // ghost", fd.id);
            } else {
                let _ = writeln!(b, "  field {};", fd.id);
            }
        }
        for f in members {
            b.push_str(&print_function(f, "  "));
        }
        b.push_str("}\n");
        blocks.push(b);
    }
    for f in p.client_functions() {
        blocks.push(print_function(f, ""));
    }
    if let Some(e) = &p.entry {
        blocks.push(format!("entry {e};\n"));
    }
    blocks.join("\n")
}
